//! Dissipative dynamics of two two-level atoms coupled to a single lossy
//! cavity mode, aimed at mapping how measurement-induced thermal dephasing
//! degrades or protects the interatomic dark state.
//!
//! The crate integrates the Lindblad master equation
//!
//! ```text
//! d rho/dt = -i [H, rho]
//!          + gamma_out D[a](rho) + gamma_in D[a+](rho)
//!          + gamma_deph1 D[d1](rho) + gamma_deph2 D[d2](rho)
//! ```
//!
//! with the resonant exchange Hamiltonian
//! `H = omega (a+ a + d1 + d2) + g1 (a+ s1 + a s1+) + g2 (a+ s2 + a s2+)`
//! (hbar = 1, rates in MHz, time in microseconds), and sweeps the two
//! dephasing rates to locate the crossover between anti-Zeno acceleration
//! and Zeno freezing of dark-state relaxation.
//!
//! Module map:
//! - [`hilbert`]: truncated photon ladder x two atoms, basis bookkeeping.
//! - [`model`]: Hamiltonian, Lindblad channels, dark state, parameter ratios.
//! - [`integrate`]: split-step Euler and RK4 propagation with monitors.
//! - [`observables`]: populations, fidelities, stabilization time, retention.
//! - [`sweep`]: dephasing grids, diagonal scans, coupling-threshold search,
//!   and the vectorized-Liouvillian steady-state oracle.
//! - [`config`] / [`output`] / [`cli`]: run descriptions, exporters, and the
//!   thin command-line front end.
//!
//! The `examples/` directory holds one runnable study per capability; start
//! with `cargo run --release --example zeno_crossover_diagonal`.

pub mod cli;
pub mod config;
pub mod error;
pub mod hilbert;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod output;
pub mod sweep;

pub use error::{Error, Result};
