//! Cross-check the integrator against a direct steady-state solve.
//!
//! The null space of the vectorized Liouvillian gives the stationary
//! density matrix with no time stepping at all. A long RK4 run must land
//! on the same state, and with every rate active the result is the
//! product thermal state: populations follow mu^(n + s1 + s2).
//!
//! With photon loss as the only channel the steady state is not unique
//! (any mixture of vacuum and the protected dark state is stationary),
//! which the solver reports rather than picking one arbitrarily.

use darkstate_sim::config::preset;
use darkstate_sim::integrate::evolve_partial;
use darkstate_sim::model::{
    build_channels, build_hamiltonian, dark_state, thermal_parameter, ChannelToggles,
};
use darkstate_sim::observables::{populations, trace_distance};
use darkstate_sim::output::state_labels;
use darkstate_sim::sweep::steady_state_oracle;
use darkstate_sim::Result;

fn main() -> Result<()> {
    let mut cfg = preset("fig1")?;
    cfg.integrator.t_end = 20.0;

    let space = cfg.space()?;
    let h = build_hamiltonian(&space, &cfg.model, cfg.sweep.rotating);
    let channels = build_channels(&space, &cfg.model, cfg.channels);
    let rho_ss = steady_state_oracle(&h, &channels)?;

    let dark = dark_state(&space, &cfg.model, 0)?;
    let rho0 = cfg.initial_state()?.build(&space, &cfg.model)?;
    let (rec, _) = evolve_partial(&rho0, &h, &channels, &cfg.integrator, &dark)?;

    let dist = trace_distance(&rec.rho_final, &rho_ss);
    println!(
        "trace distance between rho(t={}) and the null-space state: {dist:.3e}",
        cfg.integrator.t_end
    );

    let mu = thermal_parameter(&cfg.model)?;
    let pops = populations(&rho_ss, &space);
    let z: f64 = space.states().map(|s| mu.powi(s.excitations() as i32)).sum();
    println!("state     population   mu^N/Z (mu = {mu})");
    let labels = state_labels(&space);
    for (i, s) in space.states().enumerate() {
        let predicted = mu.powi(s.excitations() as i32) / z;
        println!("{:8} {:11.8}  {predicted:.8}", labels[i], pops[i]);
    }

    let out_only = build_channels(&space, &cfg.model, ChannelToggles::out_only());
    match steady_state_oracle(&h, &out_only) {
        Err(e) => println!("photon loss only: {e}"),
        Ok(_) => unreachable!("degenerate case must be reported"),
    }
    Ok(())
}
