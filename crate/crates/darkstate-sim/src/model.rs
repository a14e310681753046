//! Tavis-Cummings model of two atoms in a resonant cavity plus its four
//! Lindblad channels.
//!
//! ```text
//! H = omega (a+ a + d1 + d2) + g1 (a+ s1 + a s1+) + g2 (a+ s2 + a s2+)
//! ```
//!
//! with d_i = s_i+ s_i. Dissipation (rates in MHz):
//!
//! * photon loss        D[a]   at gamma_out
//! * thermal photon gain D[a+] at gamma_in
//! * dephasing on atom i D[d_i] at gamma_deph_i, the measurement back-action
//!   of a detector that watches which atom is excited.
//!
//! The interaction part shares no matrix element with the interatomic dark
//! state, so with photon channels alone that state is stationary; dephasing
//! is the only channel that connects it to the bright sector.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    atomic_lowering, excitation_projector, photon_annihilation, BasisState,
    DensityOp, HilbertSpace, Operator, StateVector,
};
use crate::linalg::{dagger, CMat, I, ONE};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Cavity and atomic transition frequency (resonant), MHz.
    pub omega: f64,
    /// Atom-cavity couplings, MHz.
    pub g1: f64,
    pub g2: f64,
    /// Photon escape rate, MHz.
    pub gamma_out: f64,
    /// Thermal photon injection rate, MHz.
    pub gamma_in: f64,
    /// Measurement-induced dephasing rates per atom, MHz.
    pub gamma_deph1: f64,
    pub gamma_deph2: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("omega", self.omega),
            ("g1", self.g1),
            ("g2", self.g2),
            ("gamma_out", self.gamma_out),
            ("gamma_in", self.gamma_in),
            ("gamma_deph1", self.gamma_deph1),
            ("gamma_deph2", self.gamma_deph2),
        ];
        for (name, value) in named {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidRate { name, value });
            }
        }
        Ok(())
    }

    /// Largest frequency scale, used by the default step-size rule.
    pub fn max_rate(&self) -> f64 {
        [
            self.omega,
            self.g1,
            self.g2,
            self.gamma_out,
            self.gamma_in,
            self.gamma_deph1,
            self.gamma_deph2,
        ]
        .into_iter()
        .fold(0.0_f64, f64::max)
    }
}

/// Thermal occupation parameter mu = gamma_in / gamma_out = exp(-omega / T).
pub fn thermal_parameter(params: &ModelParams) -> Result<f64> {
    if params.gamma_out == 0.0 {
        return Err(Error::ZeroDenominator {
            what: "thermal parameter gamma_in/gamma_out",
        });
    }
    Ok(params.gamma_in / params.gamma_out)
}

/// Temperature that realizes a given mu at frequency omega, in natural units
/// (hbar = K = 1): T = omega / ln(1/mu). With omega = 1 this is the value in
/// units of hbar*omega/K. mu = 0 maps to T = 0; mu >= 1 has no finite
/// positive temperature.
pub fn temperature_for_mu(mu: f64, omega: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::UnphysicalTemperature(mu));
    }
    if mu == 0.0 {
        return Ok(0.0);
    }
    Ok(omega / (1.0 / mu).ln())
}

/// Measurement asymmetry k_d = gamma_deph1 / gamma_deph2.
pub fn measurement_ratio(params: &ModelParams) -> Result<f64> {
    if params.gamma_deph2 == 0.0 {
        return Err(Error::ZeroDenominator {
            what: "measurement ratio gamma_deph1/gamma_deph2",
        });
    }
    Ok(params.gamma_deph1 / params.gamma_deph2)
}

/// Coupling asymmetry k_g = g2 / g1.
pub fn coupling_ratio(params: &ModelParams) -> Result<f64> {
    if params.g1 == 0.0 {
        return Err(Error::ZeroDenominator {
            what: "coupling ratio g2/g1",
        });
    }
    Ok(params.g2 / params.g1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    PhotonOut,
    PhotonIn,
    Dephasing1,
    Dephasing2,
}

impl ChannelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelKind::PhotonOut => "out",
            ChannelKind::PhotonIn => "in",
            ChannelKind::Dephasing1 => "deph1",
            ChannelKind::Dephasing2 => "deph2",
        }
    }
}

/// Which Lindblad channels participate in a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChannelToggles {
    pub photon_out: bool,
    pub photon_in: bool,
    pub dephasing1: bool,
    pub dephasing2: bool,
}

impl Default for ChannelToggles {
    fn default() -> Self {
        ChannelToggles {
            photon_out: true,
            photon_in: true,
            dephasing1: true,
            dephasing2: true,
        }
    }
}

impl ChannelToggles {
    pub fn dephasing_only() -> Self {
        ChannelToggles {
            photon_out: false,
            photon_in: false,
            dephasing1: true,
            dephasing2: true,
        }
    }

    pub fn out_only() -> Self {
        ChannelToggles {
            photon_out: true,
            photon_in: false,
            dephasing1: false,
            dephasing2: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LindbladChannel {
    pub kind: ChannelKind,
    pub rate: f64,
    pub op: Operator,
}

/// Hamiltonian on the truncated space. `rotating` drops the free term
/// (interaction picture at resonance); populations and dark weight are
/// invariant under that change because every jump operator commutes with
/// the phase generated by the total excitation number.
pub fn build_hamiltonian(space: &HilbertSpace, params: &ModelParams, rotating: bool) -> Operator {
    let dim = space.dim();
    let mut h = Operator::zeros((dim, dim));
    if !rotating {
        for state in space.states() {
            let idx = space.index_of(state).unwrap();
            h[(idx, idx)] = Complex64::new(params.omega * state.excitations() as f64, 0.0);
        }
    }
    let a = photon_annihilation(space);
    let ad = dagger(&a);
    for (atom, g) in [(1usize, params.g1), (2usize, params.g2)] {
        if g == 0.0 {
            continue;
        }
        let sig = atomic_lowering(space, atom).unwrap();
        let sigd = dagger(&sig);
        let coupling = (ad.dot(&sig) + a.dot(&sigd)).mapv(|z| g * z);
        h = h + coupling;
    }
    h
}

/// Channels in canonical order (out, in, deph1, deph2), restricted to the
/// toggled set. Zero-rate channels stay in the list so a run's channel
/// content is explicit in its outputs.
pub fn build_channels(
    space: &HilbertSpace,
    params: &ModelParams,
    toggles: ChannelToggles,
) -> Vec<LindbladChannel> {
    let mut channels = Vec::new();
    if toggles.photon_out {
        channels.push(LindbladChannel {
            kind: ChannelKind::PhotonOut,
            rate: params.gamma_out,
            op: photon_annihilation(space),
        });
    }
    if toggles.photon_in {
        channels.push(LindbladChannel {
            kind: ChannelKind::PhotonIn,
            rate: params.gamma_in,
            op: dagger(&photon_annihilation(space)),
        });
    }
    if toggles.dephasing1 {
        channels.push(LindbladChannel {
            kind: ChannelKind::Dephasing1,
            rate: params.gamma_deph1,
            op: excitation_projector(space, 1).unwrap(),
        });
    }
    if toggles.dephasing2 {
        channels.push(LindbladChannel {
            kind: ChannelKind::Dephasing2,
            rate: params.gamma_deph2,
            op: excitation_projector(space, 2).unwrap(),
        });
    }
    channels
}

/// Interatomic dark state with n photons:
///
/// ```text
/// |D(n)> = (g1 |n,01> - g2 |n,10>) / sqrt(g1^2 + g2^2)
/// ```
///
/// The phase convention keeps the |01> amplitude real and non-negative.
/// H_int annihilates |D(0)>; for n > 0 the same atomic combination is only
/// dark when g1 = g2.
pub fn dark_state(space: &HilbertSpace, params: &ModelParams, n: usize) -> Result<StateVector> {
    let norm = (params.g1 * params.g1 + params.g2 * params.g2).sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateCouplings);
    }
    let i01 = space.index_of(BasisState { n, s1: 0, s2: 1 })?;
    let i10 = space.index_of(BasisState { n, s1: 1, s2: 0 })?;
    let mut psi = StateVector::zeros(space.dim());
    psi[i01] = Complex64::new(params.g1 / norm, 0.0);
    psi[i10] = Complex64::new(-params.g2 / norm, 0.0);
    Ok(psi)
}

/// Initial-state families used by runs and sweeps. The dark preset depends
/// on the couplings, so sweeps that vary g rebuild it per grid cell.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    /// Dark state with n photons.
    Dark(usize),
    /// Product basis state.
    Ket(BasisState),
    /// Explicit amplitudes over the full basis, normalized on build.
    Explicit(Vec<Complex64>),
}

impl InitialState {
    pub fn build(&self, space: &HilbertSpace, params: &ModelParams) -> Result<DensityOp> {
        let psi = self.build_ket(space, params)?;
        Ok(crate::hilbert::pure_density(&psi))
    }

    pub fn build_ket(&self, space: &HilbertSpace, params: &ModelParams) -> Result<StateVector> {
        match self {
            InitialState::Dark(n) => dark_state(space, params, *n),
            InitialState::Ket(state) => space.ket(*state),
            InitialState::Explicit(amps) => {
                if amps.len() != space.dim() {
                    return Err(Error::InvalidState(format!(
                        "{} amplitudes for dimension {}",
                        amps.len(),
                        space.dim()
                    )));
                }
                let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm < 1e-12 {
                    return Err(Error::InvalidState(
                        "explicit amplitudes have zero norm".into(),
                    ));
                }
                let mut psi = StateVector::zeros(space.dim());
                for (i, z) in amps.iter().enumerate() {
                    psi[i] = z / norm;
                }
                Ok(psi)
            }
        }
    }
}

/// Single-channel dissipator gamma (A rho A+ - {A+ A, rho} / 2).
pub fn apply_dissipator(channel: &LindbladChannel, rho: &DensityOp) -> DensityOp {
    let a = &channel.op;
    let ad = dagger(a);
    let ada = ad.dot(a);
    let jump = a.dot(rho).dot(&ad);
    let anti = ada.dot(rho) + rho.dot(&ada);
    let mut out = jump - anti.mapv(|z| 0.5 * z);
    out.mapv_inplace(|z| channel.rate * z);
    out
}

/// Full right-hand side -i[H, rho] + sum of dissipators. This is the dense
/// reference route; the integrator compiles a structured fast path and is
/// cross-checked against this one.
pub fn apply_liouvillian(
    h: &Operator,
    channels: &[LindbladChannel],
    rho: &DensityOp,
) -> DensityOp {
    let comm = h.dot(rho) - rho.dot(h);
    let mut out = comm.mapv(|z| -I * z);
    for ch in channels {
        if ch.rate == 0.0 {
            continue;
        }
        out = out + apply_dissipator(ch, rho);
    }
    out
}

/// Indices (ascending) and projector of the three-state manifold
/// {|0,01>, |0,10>, |1,00>} that carries the low-excitation exchange
/// dynamics. Compressing the photon ladder operators onto this manifold
/// yields zero matrices (their images leave it), so a reduced run evolves
/// under the compressed Hamiltonian and dephasing alone.
pub fn reduced_projection(space: &HilbertSpace) -> (Vec<usize>, Operator) {
    let states = [
        BasisState { n: 0, s1: 0, s2: 1 },
        BasisState { n: 0, s1: 1, s2: 0 },
        BasisState { n: 1, s1: 0, s2: 0 },
    ];
    let mut indices: Vec<usize> = states
        .iter()
        .map(|&s| space.index_of(s).expect("manifold fits any valid space"))
        .collect();
    indices.sort_unstable();
    let dim = space.dim();
    let mut proj = Operator::zeros((dim, dim));
    for &i in &indices {
        proj[(i, i)] = ONE;
    }
    (indices, proj)
}

/// Compress an operator onto the reduced manifold (3x3).
pub fn compress(space: &HilbertSpace, indices: &[usize], op: &Operator) -> CMat {
    let _ = space;
    let m = indices.len();
    let mut out = Array2::zeros((m, m));
    for (r, &i) in indices.iter().enumerate() {
        for (c, &j) in indices.iter().enumerate() {
            out[(r, c)] = op[(i, j)];
        }
    }
    out
}
