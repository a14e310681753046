//! Time integration of the master equation.
//!
//! Two schemes: a split step (exact unitary half via a cached propagator,
//! first-order dissipative correction) and classical RK4 on the full
//! right-hand side. RK4 runs on a compiled form of the Liouvillian that
//! exploits the model's structure:
//!
//! * every jump operator has a diagonal A+A, so the anticommutator is an
//!   elementwise real mask on rho;
//! * dephasing jumps are diagonal and fold into the same mask;
//! * photon jumps shift whole photon blocks, a gather at row/column
//!   offset +-4;
//! * the interaction Hamiltonian has at most two couplings per row, a
//!   short sparse commutator.
//!
//! The state is stored as separate real and imaginary planes. Summation
//! orders are fixed and atom-exchange symmetric pairs are accumulated as
//! two-term subtotals, so swapping the two dephasing rates at g1 = g2
//! permutes trajectories bitwise instead of merely approximately.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{DensityOp, Operator, StateVector};
use crate::linalg::{dagger, eigh, hermiticity_deviation, max_abs, min_eigenvalue, CMat};
use crate::model::{apply_dissipator, apply_liouvillian, LindbladChannel, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    EulerSplit,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Step size in inverse MHz (microseconds).
    pub dt: f64,
    pub t_end: f64,
    /// Record every this many steps (the initial state is always sample 0).
    pub record_stride: usize,
    /// Warning threshold for trace/Hermiticity/positivity monitors; the
    /// run aborts when a monitor exceeds 1000x this value.
    pub monitor_tol: f64,
    /// Hermitize and renormalize after every step.
    pub sanitize: bool,
    /// When set, stop once linear extrapolation of the recorded population
    /// movement over the remaining horizon falls below a tenth of this
    /// value for three consecutive samples (stationarity reached).
    pub stop_epsilon: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            dt: 1e-3,
            t_end: 10.0,
            record_stride: 100,
            monitor_tol: 1e-6,
            sanitize: false,
            stop_epsilon: None,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::Config(format!(
                "t_end ({}) must be at least dt ({})",
                self.t_end, self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        if !(self.monitor_tol > 0.0) {
            return Err(Error::Config("monitor_tol must be positive".into()));
        }
        Ok(())
    }

    /// Whether sanitation is on by default for a method: the split scheme
    /// drifts at first order and gets it, RK4 stays clean on its own.
    pub fn default_sanitize(method: Method) -> bool {
        matches!(method, Method::EulerSplit)
    }
}

/// Default step: a thousandth of the fastest period in the problem.
pub fn default_dt(params: &ModelParams) -> f64 {
    let m = params.max_rate();
    if m > 0.0 {
        1e-3 / m
    } else {
        1e-3
    }
}

/// (rho + rho+)/2 then rho / Tr rho.
pub fn sanitize(rho: &DensityOp) -> Result<DensityOp> {
    let herm = (rho + &dagger(rho)).mapv(|z| 0.5 * z);
    let tr: Complex64 = (0..herm.nrows()).map(|i| herm[(i, i)]).sum();
    if tr.norm() < 1e-6 {
        return Err(Error::DegenerateTrace(tr.norm()));
    }
    Ok(herm.mapv(|z| z / tr.re))
}

/// Cached exact propagator U = exp(-i H dt) from one Hermitian
/// eigendecomposition.
pub struct Propagator {
    u: CMat,
    ud: CMat,
}

impl Propagator {
    pub fn new(h: &Operator, dt: f64) -> Result<Self> {
        let dev = hermiticity_deviation(h);
        let scale = max_abs(h).max(1.0);
        if dev > 1e-9 * scale {
            return Err(Error::NonHermitian(dev));
        }
        let herm = (h + &dagger(h)).mapv(|z| 0.5 * z);
        let (vals, vecs) = eigh(&herm);
        let dim = h.nrows();
        let mut u = CMat::zeros((dim, dim));
        for (k, &lam) in vals.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -lam * dt);
            for i in 0..dim {
                u[(i, k)] = vecs[(i, k)] * phase;
            }
        }
        let u = u.dot(&dagger(&vecs));
        let ud = dagger(&u);
        Ok(Propagator { u, ud })
    }

    pub fn apply(&self, rho: &DensityOp) -> DensityOp {
        self.u.dot(rho).dot(&self.ud)
    }
}

/// One split step: exact coherent rotation, then the dissipative part
/// applied at first order to the rotated state.
pub fn euler_step(
    rho: &DensityOp,
    h: &Operator,
    channels: &[LindbladChannel],
    dt: f64,
) -> Result<DensityOp> {
    let prop = Propagator::new(h, dt)?;
    Ok(euler_step_cached(rho, &prop, channels, dt))
}

pub fn euler_step_cached(
    rho: &DensityOp,
    prop: &Propagator,
    channels: &[LindbladChannel],
    dt: f64,
) -> DensityOp {
    let rotated = prop.apply(rho);
    let mut out = rotated.clone();
    for ch in channels {
        if ch.rate == 0.0 {
            continue;
        }
        out = out + apply_dissipator(ch, &rotated).mapv(|z| dt * z);
    }
    out
}

/// Classical RK4 step on the dense right-hand side.
pub fn rk4_step(
    rho: &DensityOp,
    h: &Operator,
    channels: &[LindbladChannel],
    dt: f64,
) -> DensityOp {
    let k1 = apply_liouvillian(h, channels, rho);
    let s2 = rho + &k1.mapv(|z| 0.5 * dt * z);
    let k2 = apply_liouvillian(h, channels, &s2);
    let s3 = rho + &k2.mapv(|z| 0.5 * dt * z);
    let k3 = apply_liouvillian(h, channels, &s3);
    let s4 = rho + &k3.mapv(|z| dt * z);
    let k4 = apply_liouvillian(h, channels, &s4);
    let mut incr = k1 + k4;
    incr = incr + (k2 + k3).mapv(|z| 2.0 * z);
    rho + &incr.mapv(|z| dt / 6.0 * z)
}

enum HGroup {
    One(usize, f64),
    Two((usize, f64), (usize, f64)),
    Many(Vec<(usize, f64)>),
}

struct Scatter {
    /// Source offset: destination (i, j) gathers from (i + shift, j + shift).
    shift: usize,
    /// True when the shift is toward larger indices (photon loss).
    forward: bool,
    /// Per-destination weight gamma v_i v_j over the full plane; zero
    /// outside the valid gather region.
    w: Vec<f64>,
}

/// Structured form of the right-hand side for the splitted real/imaginary
/// plane representation. See the module docs for the layout.
pub struct CompiledLiouvillian {
    dim: usize,
    freq: Vec<f64>,
    mask: Vec<f64>,
    scatters: Vec<Scatter>,
    rows: Vec<Vec<HGroup>>,
    has_offdiag: bool,
}

/// Scratch planes for the commutator; reuse across calls.
pub struct Workspace {
    b_re: Vec<f64>,
    b_im: Vec<f64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        Workspace {
            b_re: vec![0.0; dim * dim],
            b_im: vec![0.0; dim * dim],
        }
    }
}

const PHOTON_BLOCK: usize = 4;

impl CompiledLiouvillian {
    pub fn compile(h: &Operator, channels: &[LindbladChannel]) -> Result<Self> {
        let dim = h.nrows();
        let scale = max_abs(h).max(1.0);
        if hermiticity_deviation(h) > 1e-9 * scale {
            return Err(Error::Compile("Hamiltonian is not Hermitian".into()));
        }

        let mut freq = vec![0.0; dim * dim];
        let diag: Vec<f64> = (0..dim)
            .map(|i| {
                debug_assert!(h[(i, i)].im.abs() <= 1e-12 * scale);
                h[(i, i)].re
            })
            .collect();
        for i in 0..dim {
            for j in 0..dim {
                freq[i * dim + j] = diag[i] - diag[j];
            }
        }

        // Sparse symmetric off-diagonal part, grouped per row by source
        // photon block. Two couplings into the same block form a
        // commutative pair, which keeps atom-exchanged runs bit-identical.
        let mut rows: Vec<Vec<HGroup>> = Vec::with_capacity(dim);
        let mut has_offdiag = false;
        for i in 0..dim {
            let mut entries: Vec<(usize, f64)> = Vec::new();
            for j in 0..dim {
                if i == j {
                    continue;
                }
                let z = h[(i, j)];
                if z.norm() == 0.0 {
                    continue;
                }
                if z.im.abs() > 1e-12 * scale {
                    return Err(Error::Compile(
                        "complex couplings are not supported by the fast path".into(),
                    ));
                }
                entries.push((j, z.re));
            }
            entries.sort_unstable_by_key(|&(j, _)| j);
            let mut groups: Vec<HGroup> = Vec::new();
            let mut k = 0;
            while k < entries.len() {
                let block = entries[k].0 / PHOTON_BLOCK;
                let mut end = k + 1;
                while end < entries.len() && entries[end].0 / PHOTON_BLOCK == block {
                    end += 1;
                }
                groups.push(match end - k {
                    1 => HGroup::One(entries[k].0, entries[k].1),
                    2 => HGroup::Two(entries[k], entries[k + 1]),
                    _ => HGroup::Many(entries[k..end].to_vec()),
                });
                k = end;
            }
            if !groups.is_empty() {
                has_offdiag = true;
            }
            rows.push(groups);
        }

        // Channel classification. Diagonal jump operators fold completely
        // into the mask; monomial shift operators become block gathers.
        let mut mask_main = vec![0.0; dim * dim];
        let mut diag_channels: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut scatters = Vec::new();
        for ch in channels {
            if ch.rate == 0.0 {
                continue;
            }
            let op = &ch.op;
            let mut is_diagonal = true;
            for i in 0..dim {
                for j in 0..dim {
                    if i != j && op[(i, j)].norm() != 0.0 {
                        is_diagonal = false;
                    }
                    if op[(i, j)].im != 0.0 {
                        return Err(Error::Compile(
                            "complex jump operators are not supported by the fast path".into(),
                        ));
                    }
                }
            }
            if is_diagonal {
                let v: Vec<f64> = (0..dim).map(|i| op[(i, i)].re).collect();
                diag_channels.push((ch.rate, v));
                continue;
            }
            // Monomial with a uniform index shift: at most one entry per
            // row, all on the same diagonal.
            let mut shift: Option<isize> = None;
            let mut v = vec![0.0; dim];
            for i in 0..dim {
                let mut found: Option<usize> = None;
                for j in 0..dim {
                    if op[(i, j)].norm() != 0.0 {
                        if found.is_some() {
                            return Err(Error::Compile(
                                "jump operator is neither diagonal nor a shift".into(),
                            ));
                        }
                        found = Some(j);
                    }
                }
                if let Some(j) = found {
                    let s = j as isize - i as isize;
                    match shift {
                        None => shift = Some(s),
                        Some(prev) if prev == s => {}
                        Some(_) => {
                            return Err(Error::Compile(
                                "jump operator mixes different shifts".into(),
                            ))
                        }
                    }
                    v[i] = op[(i, j)].re;
                }
            }
            let Some(s) = shift else {
                continue; // zero operator contributes nothing
            };
            // Loss half of the dissipator: diag(A+A) enters the mask.
            // A+A is exactly diagonal for a monomial operator.
            let ada = dagger(op).dot(op);
            let w: Vec<f64> = (0..dim).map(|i| ada[(i, i)].re).collect();
            for i in 0..dim {
                for j in 0..dim {
                    mask_main[i * dim + j] += ch.rate * 0.5 * (w[i] + w[j]);
                }
            }
            let forward = s > 0;
            let sa = s.unsigned_abs();
            let mut wplane = vec![0.0; dim * dim];
            for i in 0..dim {
                for j in 0..dim {
                    let valid = if forward {
                        i + sa < dim && j + sa < dim
                    } else {
                        i >= sa && j >= sa
                    };
                    if valid {
                        wplane[i * dim + j] = ch.rate * v[i] * v[j];
                    }
                }
            }
            scatters.push(Scatter {
                shift: sa,
                forward,
                w: wplane,
            });
        }

        // Diagonal channels in commutative pairs: gamma_a f_a + gamma_b f_b
        // is one expression, invariant under swapping the pair.
        let mut mask = mask_main;
        let mut k = 0;
        while k < diag_channels.len() {
            if k + 1 < diag_channels.len() {
                let (ra, va) = &diag_channels[k];
                let (rb, vb) = &diag_channels[k + 1];
                for i in 0..dim {
                    for j in 0..dim {
                        let fa = 0.5 * (va[i] - va[j]) * (va[i] - va[j]);
                        let fb = 0.5 * (vb[i] - vb[j]) * (vb[i] - vb[j]);
                        mask[i * dim + j] += ra * fa + rb * fb;
                    }
                }
                k += 2;
            } else {
                let (ra, va) = &diag_channels[k];
                for i in 0..dim {
                    for j in 0..dim {
                        let fa = 0.5 * (va[i] - va[j]) * (va[i] - va[j]);
                        mask[i * dim + j] += ra * fa;
                    }
                }
                k += 1;
            }
        }

        Ok(CompiledLiouvillian {
            dim,
            freq,
            mask,
            scatters,
            rows,
            has_offdiag,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Full right-hand side into (out_re, out_im).
    pub fn apply_into(
        &self,
        re: &[f64],
        im: &[f64],
        out_re: &mut [f64],
        out_im: &mut [f64],
        ws: &mut Workspace,
    ) {
        let d = self.dim;
        for e in 0..d * d {
            out_re[e] = self.freq[e] * im[e] - self.mask[e] * re[e];
            out_im[e] = -self.freq[e] * re[e] - self.mask[e] * im[e];
        }
        self.add_scatters(re, im, out_re, out_im);
        if self.has_offdiag {
            self.add_commutator(re, im, out_re, out_im, ws);
        }
    }

    /// Dissipative part only (mask and gathers, no commutator, no phase),
    /// for the split-step scheme.
    pub fn apply_dissipative_into(
        &self,
        re: &[f64],
        im: &[f64],
        out_re: &mut [f64],
        out_im: &mut [f64],
    ) {
        let d = self.dim;
        for e in 0..d * d {
            out_re[e] = -self.mask[e] * re[e];
            out_im[e] = -self.mask[e] * im[e];
        }
        self.add_scatters(re, im, out_re, out_im);
    }

    fn add_scatters(&self, re: &[f64], im: &[f64], out_re: &mut [f64], out_im: &mut [f64]) {
        let d = self.dim;
        for sc in &self.scatters {
            let s = sc.shift;
            if sc.forward {
                for i in 0..d - s {
                    let wrow = &sc.w[i * d..i * d + (d - s)];
                    let sre = &re[(i + s) * d + s..(i + s) * d + d];
                    let sim = &im[(i + s) * d + s..(i + s) * d + d];
                    let dre = &mut out_re[i * d..i * d + (d - s)];
                    let dim_ = &mut out_im[i * d..i * d + (d - s)];
                    for j in 0..d - s {
                        dre[j] += wrow[j] * sre[j];
                        dim_[j] += wrow[j] * sim[j];
                    }
                }
            } else {
                for i in s..d {
                    let wrow = &sc.w[i * d + s..i * d + d];
                    let sre = &re[(i - s) * d..(i - s) * d + (d - s)];
                    let sim = &im[(i - s) * d..(i - s) * d + (d - s)];
                    let dre = &mut out_re[i * d + s..i * d + d];
                    let dim_ = &mut out_im[i * d + s..i * d + d];
                    for j in 0..d - s {
                        dre[j] += wrow[j] * sre[j];
                        dim_[j] += wrow[j] * sim[j];
                    }
                }
            }
        }
    }

    /// -i [H_off, rho] via B = H_off rho and the Hermitian identity
    /// rho H_off = B+ (valid because rho stays exactly Hermitian in this
    /// representation).
    fn add_commutator(
        &self,
        re: &[f64],
        im: &[f64],
        out_re: &mut [f64],
        out_im: &mut [f64],
        ws: &mut Workspace,
    ) {
        let d = self.dim;
        let Workspace { b_re, b_im } = ws;
        b_re.fill(0.0);
        b_im.fill(0.0);
        for i in 0..d {
            let base = i * d;
            for g in &self.rows[i] {
                match g {
                    HGroup::One(c, v) => {
                        let sre = &re[c * d..c * d + d];
                        let sim = &im[c * d..c * d + d];
                        for j in 0..d {
                            b_re[base + j] += v * sre[j];
                            b_im[base + j] += v * sim[j];
                        }
                    }
                    HGroup::Two((c1, v1), (c2, v2)) => {
                        let s1re = &re[c1 * d..c1 * d + d];
                        let s1im = &im[c1 * d..c1 * d + d];
                        let s2re = &re[c2 * d..c2 * d + d];
                        let s2im = &im[c2 * d..c2 * d + d];
                        for j in 0..d {
                            b_re[base + j] += v1 * s1re[j] + v2 * s2re[j];
                            b_im[base + j] += v1 * s1im[j] + v2 * s2im[j];
                        }
                    }
                    HGroup::Many(list) => {
                        for &(c, v) in list {
                            let sre = &re[c * d..c * d + d];
                            let sim = &im[c * d..c * d + d];
                            for j in 0..d {
                                b_re[base + j] += v * sre[j];
                                b_im[base + j] += v * sim[j];
                            }
                        }
                    }
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                out_re[i * d + j] += b_im[i * d + j] + b_im[j * d + i];
                out_im[i * d + j] -= b_re[i * d + j] - b_re[j * d + i];
            }
        }
    }
}

/// Where a run tripped its monitors.
#[derive(Clone, Copy, Debug)]
pub struct Divergence {
    pub t: f64,
    pub deviation: f64,
    pub what: &'static str,
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// One row per sample, one column per basis state.
    pub populations: Array2<f64>,
    pub dark_weight: Vec<f64>,
    pub trace_dev: Vec<f64>,
    pub herm_dev: Vec<f64>,
    pub min_eig: Vec<f64>,
    /// Population of the highest photon block (truncation diagnostic).
    pub leakage: Vec<f64>,
    /// Max-norm of the right-hand side at the sample.
    pub drift: Vec<f64>,
    pub rho_final: DensityOp,
    pub steps: usize,
    pub dt: f64,
    pub stopped_early: bool,
}

impl TrajectoryRecord {
    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }
}

/// Weight of a pure state in rho, specialized to two-component targets so
/// the sum order is a commutative pair (see module docs).
struct WeightProbe {
    kind: ProbeKind,
}

enum ProbeKind {
    Pair {
        i: usize,
        j: usize,
        ai: f64,
        aj: f64,
    },
    General(StateVector),
}

impl WeightProbe {
    fn new(psi: &StateVector) -> Self {
        let nz: Vec<usize> = (0..psi.len()).filter(|&k| psi[k].norm() != 0.0).collect();
        if nz.len() == 2 && psi[nz[0]].im == 0.0 && psi[nz[1]].im == 0.0 {
            WeightProbe {
                kind: ProbeKind::Pair {
                    i: nz[0],
                    j: nz[1],
                    ai: psi[nz[0]].re,
                    aj: psi[nz[1]].re,
                },
            }
        } else {
            WeightProbe {
                kind: ProbeKind::General(psi.clone()),
            }
        }
    }

    fn eval_planes(&self, re: &[f64], im: &[f64], d: usize) -> f64 {
        match &self.kind {
            ProbeKind::Pair { i, j, ai, aj } => {
                let direct = ai * ai * re[i * d + i] + aj * aj * re[j * d + j];
                let cross = re[i * d + j] + re[j * d + i];
                direct + ai * aj * cross
            }
            ProbeKind::General(psi) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..d {
                    for c in 0..d {
                        let z = Complex64::new(re[r * d + c], im[r * d + c]);
                        acc += psi[r].conj() * z * psi[c];
                    }
                }
                acc.re
            }
        }
    }

}

/// Trace as a balanced per-photon-block sum; exact under atom exchange.
/// Dimensions without the photon-block layout fall back to a plain sum.
fn trace_planes(re: &[f64], d: usize) -> f64 {
    if d % PHOTON_BLOCK != 0 {
        return (0..d).map(|i| re[i * d + i]).sum();
    }
    let mut total = 0.0;
    let mut b = 0;
    while b < d {
        let r0 = re[b * d + b];
        let r1 = re[(b + 1) * d + b + 1];
        let r2 = re[(b + 2) * d + b + 2];
        let r3 = re[(b + 3) * d + b + 3];
        total += (r0 + r3) + (r1 + r2);
        b += PHOTON_BLOCK;
    }
    total
}

/// Population of the highest photon layer, the truncation-leakage probe.
/// Zero for spaces without the photon-block layout.
fn top_block_population(re: &[f64], d: usize) -> f64 {
    if d % PHOTON_BLOCK != 0 || d < PHOTON_BLOCK {
        return 0.0;
    }
    let b = d - PHOTON_BLOCK;
    let r0 = re[b * d + b];
    let r1 = re[(b + 1) * d + b + 1];
    let r2 = re[(b + 2) * d + b + 2];
    let r3 = re[(b + 3) * d + b + 3];
    (r0 + r3) + (r1 + r2)
}

fn herm_dev_planes(re: &[f64], im: &[f64], d: usize) -> f64 {
    let mut dev = 0.0_f64;
    for i in 0..d {
        for j in i..d {
            dev = dev.max((re[i * d + j] - re[j * d + i]).abs());
            dev = dev.max((im[i * d + j] + im[j * d + i]).abs());
        }
    }
    dev
}

fn planes_from_dense(rho: &DensityOp) -> (Vec<f64>, Vec<f64>) {
    let d = rho.nrows();
    let mut re = vec![0.0; d * d];
    let mut im = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            re[i * d + j] = rho[(i, j)].re;
            im[i * d + j] = rho[(i, j)].im;
        }
    }
    (re, im)
}

fn dense_from_planes(re: &[f64], im: &[f64], d: usize) -> DensityOp {
    let mut rho = DensityOp::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            rho[(i, j)] = Complex64::new(re[i * d + j], im[i * d + j]);
        }
    }
    rho
}

struct Recorder {
    dim: usize,
    probe: WeightProbe,
    times: Vec<f64>,
    pops: Vec<f64>,
    dark: Vec<f64>,
    trace_dev: Vec<f64>,
    herm_dev: Vec<f64>,
    min_eig: Vec<f64>,
    leakage: Vec<f64>,
    drift: Vec<f64>,
    monitor_tol: f64,
}

impl Recorder {
    fn new(dim: usize, dark: &StateVector, monitor_tol: f64) -> Self {
        Recorder {
            dim,
            probe: WeightProbe::new(dark),
            times: Vec::new(),
            pops: Vec::new(),
            dark: Vec::new(),
            trace_dev: Vec::new(),
            herm_dev: Vec::new(),
            min_eig: Vec::new(),
            leakage: Vec::new(),
            drift: Vec::new(),
            monitor_tol,
        }
    }

    /// Record one sample from planes; `drift` is the RHS max-norm already
    /// computed by the caller. Returns a divergence if a monitor blew up.
    fn push_planes(
        &mut self,
        t: f64,
        re: &[f64],
        im: &[f64],
        drift: f64,
    ) -> Option<Divergence> {
        let d = self.dim;
        let tr = trace_planes(re, d);
        let tdev = (tr - 1.0).abs();
        let hdev = herm_dev_planes(re, im, d);
        let rho = dense_from_planes(re, im, d);
        let me = min_eigenvalue(&rho);
        self.times.push(t);
        for i in 0..d {
            self.pops.push(re[i * d + i]);
        }
        self.dark.push(self.probe.eval_planes(re, im, d));
        self.trace_dev.push(tdev);
        self.herm_dev.push(hdev);
        self.min_eig.push(me);
        self.leakage.push(top_block_population(re, d));
        self.drift.push(drift);
        self.check(t, tdev, hdev, me)
    }

    fn push_dense(&mut self, t: f64, rho: &DensityOp, drift: f64) -> Option<Divergence> {
        let (re, im) = planes_from_dense(rho);
        self.push_planes(t, &re, &im, drift)
    }

    fn check(&self, t: f64, tdev: f64, hdev: f64, me: f64) -> Option<Divergence> {
        let cap = 1e3 * self.monitor_tol;
        if !tdev.is_finite() || !hdev.is_finite() || !me.is_finite() {
            return Some(Divergence {
                t,
                deviation: f64::NAN,
                what: "non-finite state",
            });
        }
        if tdev > cap {
            return Some(Divergence {
                t,
                deviation: tdev,
                what: "trace",
            });
        }
        if hdev > cap {
            return Some(Divergence {
                t,
                deviation: hdev,
                what: "hermiticity",
            });
        }
        if me < -cap {
            return Some(Divergence {
                t,
                deviation: me,
                what: "positivity",
            });
        }
        None
    }

    fn finish(self, rho_final: DensityOp, steps: usize, dt: f64, stopped_early: bool) -> TrajectoryRecord {
        let n = self.times.len();
        TrajectoryRecord {
            times: self.times,
            populations: Array2::from_shape_vec((n, self.dim), self.pops)
                .expect("sample count matches"),
            dark_weight: self.dark,
            trace_dev: self.trace_dev,
            herm_dev: self.herm_dev,
            min_eig: self.min_eig,
            leakage: self.leakage,
            drift: self.drift,
            rho_final,
            steps,
            dt,
            stopped_early,
        }
    }
}

/// Early-stop bookkeeping. A sample is quiet when the per-state population
/// range over the trailing window, scaled by remaining-horizon over
/// window-span, is below 0.1 x epsilon: the observed movement rate cannot
/// carry any population out of a stationarity band of width epsilon before
/// t_end. Drift-based rules fail here because the right-hand side bottoms
/// out at the rounding floor instead of decaying to zero.
struct EarlyStop {
    epsilon: f64,
    quiet: usize,
}

const STOP_WINDOW: usize = 17;

impl EarlyStop {
    fn observe(&mut self, rec: &Recorder, t_end: f64) -> bool {
        if self.quiet_sample(rec, t_end) {
            self.quiet += 1;
        } else {
            self.quiet = 0;
        }
        self.quiet >= 3
    }

    fn quiet_sample(&self, rec: &Recorder, t_end: f64) -> bool {
        let n = rec.times.len();
        if n < STOP_WINDOW {
            return false;
        }
        let d = rec.dim;
        let mut worst = 0.0_f64;
        for s in 0..d {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for k in n - STOP_WINDOW..n {
                let v = rec.pops[k * d + s];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            worst = worst.max(hi - lo);
        }
        // Flat to well below the band. For an exponentially relaxing mode
        // with rate lambda the remaining excursion is about
        // range / (lambda * span), which stays under epsilon whenever the
        // horizon covers the slowest relaxation time; it also catches
        // trajectories stuck in an ulp-scale limit cycle that never freeze
        // bitwise and so would defeat the extrapolation rule below.
        if worst < 1e-3 * self.epsilon {
            return true;
        }
        let t_now = rec.times[n - 1];
        let span = t_now - rec.times[n - STOP_WINDOW];
        let remaining = t_end - t_now;
        if !(span > 0.0) || remaining <= 0.0 {
            return false;
        }
        worst * (remaining / span) < 0.1 * self.epsilon
    }
}

/// Integrate and keep the partial trajectory even on divergence.
pub fn evolve_partial(
    rho0: &DensityOp,
    h: &Operator,
    channels: &[LindbladChannel],
    config: &IntegratorConfig,
    dark: &StateVector,
) -> Result<(TrajectoryRecord, Option<Divergence>)> {
    config.validate()?;
    let dim = h.nrows();
    if rho0.nrows() != dim || rho0.ncols() != dim {
        return Err(Error::InvalidState(format!(
            "initial state is {}x{}, Hamiltonian is {}x{}",
            rho0.nrows(),
            rho0.ncols(),
            dim,
            dim
        )));
    }
    let n_steps = ((config.t_end / config.dt) - 1e-9).ceil().max(1.0) as usize;
    match config.method {
        Method::Rk4 => evolve_rk4(rho0, h, channels, config, dark, n_steps),
        Method::EulerSplit => evolve_euler(rho0, h, channels, config, dark, n_steps),
    }
}

/// Integrate to t_end; a tripped monitor is an error (the partial record
/// is dropped; use evolve_partial to keep it).
pub fn evolve(
    rho0: &DensityOp,
    h: &Operator,
    channels: &[LindbladChannel],
    config: &IntegratorConfig,
    dark: &StateVector,
) -> Result<TrajectoryRecord> {
    let (record, diverged) = evolve_partial(rho0, h, channels, config, dark)?;
    if let Some(div) = diverged {
        return Err(Error::IntegrationDiverged {
            t: div.t,
            deviation: div.deviation,
        });
    }
    Ok(record)
}

fn evolve_rk4(
    rho0: &DensityOp,
    h: &Operator,
    channels: &[LindbladChannel],
    config: &IntegratorConfig,
    dark: &StateVector,
    n_steps: usize,
) -> Result<(TrajectoryRecord, Option<Divergence>)> {
    let compiled = CompiledLiouvillian::compile(h, channels)?;
    let d = compiled.dim;
    let (mut re, mut im) = planes_from_dense(rho0);
    let mut ws = Workspace::new(d);
    let mut stage_re = vec![0.0; d * d];
    let mut stage_im = vec![0.0; d * d];
    let mut k_re = vec![0.0; d * d];
    let mut k_im = vec![0.0; d * d];
    let mut acc_re = vec![0.0; d * d];
    let mut acc_im = vec![0.0; d * d];

    let mut recorder = Recorder::new(d, dark, config.monitor_tol);
    let mut stop = config.stop_epsilon.map(|eps| EarlyStop { epsilon: eps, quiet: 0 });

    let dt = config.dt;
    let h2 = 0.5 * dt;
    let h6 = dt / 6.0;

    // Sample 0 reuses the k buffers for the drift probe.
    compiled.apply_into(&re, &im, &mut k_re, &mut k_im, &mut ws);
    let drift0 = plane_max(&k_re).max(plane_max(&k_im));
    if let Some(div) = recorder.push_planes(0.0, &re, &im, drift0) {
        let rho = dense_from_planes(&re, &im, d);
        return Ok((recorder.finish(rho, 0, dt, false), Some(div)));
    }

    let mut diverged = None;
    let mut stopped_early = false;
    let mut steps_done = 0usize;
    'outer: for step in 1..=n_steps {
        // k1
        compiled.apply_into(&re, &im, &mut k_re, &mut k_im, &mut ws);
        acc_re.copy_from_slice(&k_re);
        acc_im.copy_from_slice(&k_im);
        // k2
        for e in 0..d * d {
            stage_re[e] = re[e] + h2 * k_re[e];
            stage_im[e] = im[e] + h2 * k_im[e];
        }
        compiled.apply_into(&stage_re, &stage_im, &mut k_re, &mut k_im, &mut ws);
        for e in 0..d * d {
            acc_re[e] += 2.0 * k_re[e];
            acc_im[e] += 2.0 * k_im[e];
        }
        // k3
        for e in 0..d * d {
            stage_re[e] = re[e] + h2 * k_re[e];
            stage_im[e] = im[e] + h2 * k_im[e];
        }
        compiled.apply_into(&stage_re, &stage_im, &mut k_re, &mut k_im, &mut ws);
        for e in 0..d * d {
            acc_re[e] += 2.0 * k_re[e];
            acc_im[e] += 2.0 * k_im[e];
        }
        // k4
        for e in 0..d * d {
            stage_re[e] = re[e] + dt * k_re[e];
            stage_im[e] = im[e] + dt * k_im[e];
        }
        compiled.apply_into(&stage_re, &stage_im, &mut k_re, &mut k_im, &mut ws);
        for e in 0..d * d {
            re[e] += h6 * (acc_re[e] + k_re[e]);
            im[e] += h6 * (acc_im[e] + k_im[e]);
        }
        steps_done = step;

        if config.sanitize {
            // The planes stay exactly Hermitian, so only renormalize.
            let tr = trace_planes(&re, d);
            if tr.abs() < 1e-6 {
                return Err(Error::DegenerateTrace(tr.abs()));
            }
            for e in 0..d * d {
                re[e] /= tr;
                im[e] /= tr;
            }
        }

        if step % config.record_stride == 0 || step == n_steps {
            let t = step as f64 * dt;
            compiled.apply_into(&re, &im, &mut k_re, &mut k_im, &mut ws);
            let drift = plane_max(&k_re).max(plane_max(&k_im));
            if let Some(div) = recorder.push_planes(t, &re, &im, drift) {
                diverged = Some(div);
                break 'outer;
            }
            if let Some(es) = stop.as_mut() {
                if es.observe(&recorder, config.t_end) {
                    stopped_early = true;
                    break 'outer;
                }
            }
        }
    }

    let rho_final = dense_from_planes(&re, &im, d);
    Ok((
        recorder.finish(rho_final, steps_done, dt, stopped_early),
        diverged,
    ))
}

fn plane_max(p: &[f64]) -> f64 {
    p.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
}

fn evolve_euler(
    rho0: &DensityOp,
    h: &Operator,
    channels: &[LindbladChannel],
    config: &IntegratorConfig,
    dark: &StateVector,
    n_steps: usize,
) -> Result<(TrajectoryRecord, Option<Divergence>)> {
    let d = h.nrows();
    let prop = Propagator::new(h, config.dt)?;
    let mut rho = rho0.clone();
    let mut recorder = Recorder::new(d, dark, config.monitor_tol);
    let mut stop = config.stop_epsilon.map(|eps| EarlyStop { epsilon: eps, quiet: 0 });

    let drift0 = max_abs(&apply_liouvillian(h, channels, &rho));
    if let Some(div) = recorder.push_dense(0.0, &rho, drift0) {
        return Ok((recorder.finish(rho, 0, config.dt, false), Some(div)));
    }

    let mut diverged = None;
    let mut stopped_early = false;
    let mut steps_done = 0usize;
    for step in 1..=n_steps {
        rho = euler_step_cached(&rho, &prop, channels, config.dt);
        if config.sanitize {
            rho = sanitize(&rho)?;
        }
        steps_done = step;
        if step % config.record_stride == 0 || step == n_steps {
            let t = step as f64 * config.dt;
            let drift = max_abs(&apply_liouvillian(h, channels, &rho));
            if let Some(div) = recorder.push_dense(t, &rho, drift) {
                diverged = Some(div);
                break;
            }
            if let Some(es) = stop.as_mut() {
                if es.observe(&recorder, config.t_end) {
                    stopped_early = true;
                    break;
                }
            }
        }
    }
    Ok((
        recorder.finish(rho.clone(), steps_done, config.dt, stopped_early),
        diverged,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{pure_density, BasisState, HilbertSpace};
    use crate::linalg::trace;
    use crate::model::{
        build_channels, build_hamiltonian, dark_state, ChannelToggles, ModelParams,
    };

    fn space2() -> HilbertSpace {
        HilbertSpace::new(2).unwrap()
    }

    fn params_fig1() -> ModelParams {
        ModelParams {
            omega: 1000.0,
            g1: 30.0,
            g2: 50.0,
            gamma_out: 20.0,
            gamma_in: 10.0,
            gamma_deph1: 20.0,
            gamma_deph2: 20.0,
        }
    }

    fn random_density(dim: usize, seed: u64) -> DensityOp {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = CMat::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = Complex64::new(next(), next());
            }
        }
        let md = dagger(&m);
        let psd = m.dot(&md);
        let tr = trace(&psd).re;
        psd.mapv(|z| z / tr)
    }

    fn decay_toy() -> (HilbertSpace, ModelParams) {
        let space = HilbertSpace::new(1).unwrap();
        let p = ModelParams {
            omega: 0.0,
            g1: 0.0,
            g2: 0.0,
            gamma_out: 1.0,
            gamma_in: 0.0,
            gamma_deph1: 0.0,
            gamma_deph2: 0.0,
        };
        (space, p)
    }

    #[test]
    fn sanitize_restores_hermiticity_and_trace() {
        let rho0 = random_density(8, 3);
        let mut bad = rho0.clone();
        bad[(0, 1)] += Complex64::new(0.0, 1e-9);
        bad = bad.mapv(|z| 1.001 * z);
        let fixed = sanitize(&bad).unwrap();
        assert!(hermiticity_deviation(&fixed) < 1e-16);
        assert!((trace(&fixed).re - 1.0).abs() < 1e-14);
        let already = sanitize(&rho0).unwrap();
        assert!(max_abs(&(&already - &rho0)) < 1e-12);
        let tiny = rho0.mapv(|z| 1e-8 * z);
        assert!(matches!(sanitize(&tiny), Err(Error::DegenerateTrace(_))));
    }

    #[test]
    fn unitary_propagator_preserves_spectrum() {
        let space = space2();
        let h = build_hamiltonian(&space, &params_fig1(), false);
        let dt = 1e-4;
        let prop = Propagator::new(&h, dt).unwrap();
        let rho = random_density(space.dim(), 11);
        let moved = prop.apply(&rho);
        let before = crate::linalg::eigvalsh(&rho);
        let after = crate::linalg::eigvalsh(&moved);
        for (a, b) in before.iter().zip(after.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        // H = 0 is the identity propagator.
        let h0 = Operator::zeros((4, 4));
        let p0 = Propagator::new(&h0, 0.3).unwrap();
        let r4 = random_density(4, 5);
        assert!(max_abs(&(&p0.apply(&r4) - &r4)) < 1e-14);
    }

    #[test]
    fn propagator_rejects_non_hermitian() {
        let mut h = Operator::zeros((4, 4));
        h[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            Propagator::new(&h, 0.1),
            Err(Error::NonHermitian(_))
        ));
    }

    #[test]
    fn euler_without_channels_is_pure_rotation() {
        let space = space2();
        let h = build_hamiltonian(&space, &params_fig1(), false);
        let rho = random_density(space.dim(), 2);
        let dt = 1e-4;
        let prop = Propagator::new(&h, dt).unwrap();
        let via_euler = euler_step(&rho, &h, &[], dt).unwrap();
        let via_unitary = prop.apply(&rho);
        assert!(max_abs(&(&via_euler - &via_unitary)) < 1e-13);
    }

    #[test]
    fn euler_local_error_is_second_order_on_decay_toy() {
        let (space, p) = decay_toy();
        let h = build_hamiltonian(&space, &p, false);
        let channels = build_channels(&space, &p, ChannelToggles::out_only());
        let excited = space.index_of(BasisState { n: 1, s1: 0, s2: 0 }).unwrap();
        let rho = pure_density(&space.ket(BasisState { n: 1, s1: 0, s2: 0 }).unwrap());
        let err_at = |dt: f64| {
            let stepped = euler_step(&rho, &h, &channels, dt).unwrap();
            (stepped[(excited, excited)].re - (-dt).exp()).abs()
        };
        let e1 = err_at(0.1);
        let e2 = err_at(0.05);
        let ratio = e1 / e2;
        assert!(
            (3.0..5.0).contains(&ratio),
            "local order ratio {ratio} not ~4"
        );
    }

    #[test]
    fn rk4_single_step_matches_exponential_decay() {
        let (space, p) = decay_toy();
        let h = build_hamiltonian(&space, &p, false);
        let channels = build_channels(&space, &p, ChannelToggles::out_only());
        let excited = space.index_of(BasisState { n: 1, s1: 0, s2: 0 }).unwrap();
        let rho = pure_density(&space.ket(BasisState { n: 1, s1: 0, s2: 0 }).unwrap());
        let dt = 0.1;
        let stepped = rk4_step(&rho, &h, &channels, dt);
        // Leading local error is (gamma dt)^5/120 ~ 8e-8 at dt = 0.1.
        let err = (stepped[(excited, excited)].re - (-dt).exp()).abs();
        assert!(err < 1e-7, "single-step error {err:.3e}");
        let half = rk4_step(&rho, &h, &channels, dt / 2.0);
        let err_half = (half[(excited, excited)].re - (-dt / 2.0).exp()).abs();
        assert!(err / err_half > 20.0, "fifth-order local scaling violated");
    }

    #[test]
    fn compiled_rhs_matches_dense_reference() {
        let space = space2();
        let p = params_fig1();
        for rotating in [false, true] {
            let h = build_hamiltonian(&space, &p, rotating);
            let channels = build_channels(&space, &p, ChannelToggles::default());
            let compiled = CompiledLiouvillian::compile(&h, &channels).unwrap();
            let rho = random_density(space.dim(), 17);
            let want = apply_liouvillian(&h, &channels, &rho);
            let (re, im) = planes_from_dense(&rho);
            let d = space.dim();
            let mut out_re = vec![0.0; d * d];
            let mut out_im = vec![0.0; d * d];
            let mut ws = Workspace::new(d);
            compiled.apply_into(&re, &im, &mut out_re, &mut out_im, &mut ws);
            let got = dense_from_planes(&out_re, &out_im, d);
            let scale = max_abs(&want).max(1.0);
            assert!(
                max_abs(&(&got - &want)) < 1e-12 * scale,
                "fast path deviates {:.3e} (rotating = {rotating})",
                max_abs(&(&got - &want))
            );
        }
    }

    #[test]
    fn compiled_dissipative_part_matches_dense_reference() {
        let space = space2();
        let p = params_fig1();
        let h = build_hamiltonian(&space, &p, true);
        let channels = build_channels(&space, &p, ChannelToggles::default());
        let compiled = CompiledLiouvillian::compile(&h, &channels).unwrap();
        let rho = random_density(space.dim(), 23);
        let mut want = DensityOp::zeros((space.dim(), space.dim()));
        for ch in &channels {
            want = want + apply_dissipator(ch, &rho);
        }
        let (re, im) = planes_from_dense(&rho);
        let d = space.dim();
        let mut out_re = vec![0.0; d * d];
        let mut out_im = vec![0.0; d * d];
        compiled.apply_dissipative_into(&re, &im, &mut out_re, &mut out_im);
        let got = dense_from_planes(&out_re, &out_im, d);
        let scale = max_abs(&want).max(1.0);
        assert!(max_abs(&(&got - &want)) < 1e-12 * scale);
    }

    #[test]
    fn dark_state_is_stationary_under_photon_loss() {
        let space = space2();
        let p = params_fig1();
        let dark = dark_state(&space, &p, 0).unwrap();
        let rho0 = pure_density(&dark);
        let h = build_hamiltonian(&space, &p, false);
        let channels = build_channels(&space, &p, ChannelToggles::out_only());
        let config = IntegratorConfig {
            dt: default_dt(&p),
            t_end: 1000.0 * default_dt(&p),
            record_stride: 100,
            ..Default::default()
        };
        let record = evolve(&rho0, &h, &channels, &config, &dark).unwrap();
        for w in &record.dark_weight {
            assert!((w - 1.0).abs() < 1e-12, "dark weight moved to {w}");
        }
        assert!(record.drift.iter().all(|&r| r < 1e-10));
    }

    #[test]
    fn trajectory_monitors_stay_clean_on_full_model() {
        let space = space2();
        let p = params_fig1();
        let dark = dark_state(&space, &p, 0).unwrap();
        let rho0 = pure_density(&dark);
        let h = build_hamiltonian(&space, &p, true);
        let channels = build_channels(&space, &p, ChannelToggles::default());
        let config = IntegratorConfig {
            dt: 1e-3,
            t_end: 2.0,
            record_stride: 50,
            ..Default::default()
        };
        let record = evolve(&rho0, &h, &channels, &config, &dark).unwrap();
        assert!(record.times.windows(2).all(|w| w[1] > w[0]));
        for k in 0..record.times.len() {
            assert!(record.trace_dev[k] < 1e-10);
            assert!(record.herm_dev[k] < 1e-12);
            assert!(record.min_eig[k] > -1e-10);
            let row_sum: f64 = record.populations.row(k).sum();
            assert!((row_sum - 1.0).abs() < 1e-8);
        }
        // Dephasing bleeds weight out of the dark state.
        assert!(record.dark_weight.last().unwrap() < &0.99);
    }

    #[test]
    fn rotating_frame_matches_lab_frame_observables() {
        let space = space2();
        let p = params_fig1();
        let dark = dark_state(&space, &p, 0).unwrap();
        let rho0 = pure_density(&dark);
        let channels = build_channels(&space, &p, ChannelToggles::default());
        let config = IntegratorConfig {
            dt: 5e-7,
            t_end: 5e-3,
            record_stride: 1000,
            ..Default::default()
        };
        let lab = evolve(
            &rho0,
            &build_hamiltonian(&space, &p, false),
            &channels,
            &config,
            &dark,
        )
        .unwrap();
        let rot = evolve(
            &rho0,
            &build_hamiltonian(&space, &p, true),
            &channels,
            &config,
            &dark,
        )
        .unwrap();
        for k in 0..lab.times.len() {
            assert!((lab.dark_weight[k] - rot.dark_weight[k]).abs() < 1e-8);
            for s in 0..space.dim() {
                assert!(
                    (lab.populations[(k, s)] - rot.populations[(k, s)]).abs() < 1e-8
                );
            }
        }
    }

    #[test]
    fn euler_and_rk4_converge_to_each_other() {
        let space = space2();
        let p = params_fig1();
        let dark = dark_state(&space, &p, 0).unwrap();
        let rho0 = pure_density(&dark);
        let h = build_hamiltonian(&space, &p, true);
        let channels = build_channels(&space, &p, ChannelToggles::default());
        let gap = |dt: f64| {
            let mk = |method, sanitize| IntegratorConfig {
                method,
                dt,
                t_end: 0.2,
                record_stride: usize::MAX,
                monitor_tol: 1e-6,
                sanitize,
                stop_epsilon: None,
            };
            let e = evolve(&rho0, &h, &channels, &mk(Method::EulerSplit, true), &dark).unwrap();
            let r = evolve(&rho0, &h, &channels, &mk(Method::Rk4, false), &dark).unwrap();
            max_abs(&(&e.rho_final - &r.rho_final))
        };
        let coarse = gap(4e-4);
        let fine = gap(2e-4);
        assert!(coarse < 0.05, "methods disagree badly: {coarse}");
        assert!(fine < 0.7 * coarse, "gap not shrinking with dt");
    }

    #[test]
    fn divergence_reports_partial_record() {
        let space = space2();
        let p = params_fig1();
        let dark = dark_state(&space, &p, 0).unwrap();
        let rho0 = pure_density(&dark);
        let h = build_hamiltonian(&space, &p, true);
        let channels = build_channels(&space, &p, ChannelToggles::default());
        // dt far beyond the stability bound blows the trace up fast.
        let config = IntegratorConfig {
            dt: 0.5,
            t_end: 50.0,
            record_stride: 1,
            ..Default::default()
        };
        let (record, div) = evolve_partial(&rho0, &h, &channels, &config, &dark).unwrap();
        let div = div.expect("monitors must trip");
        assert!(div.deviation.is_nan() || div.deviation.abs() > 1e-3);
        assert!(!record.times.is_empty());
        assert!(matches!(
            evolve(&rho0, &h, &channels, &config, &dark),
            Err(Error::IntegrationDiverged { .. })
        ));
    }

    #[test]
    fn early_stop_truncates_settled_runs() {
        let space = space2();
        let p = params_fig1();
        let dark = dark_state(&space, &p, 0).unwrap();
        let rho0 = pure_density(&dark);
        let h = build_hamiltonian(&space, &p, true);
        let channels = build_channels(&space, &p, ChannelToggles::default());
        let base = IntegratorConfig {
            dt: 1e-3,
            t_end: 400.0,
            record_stride: 200,
            ..Default::default()
        };
        let full = evolve(&rho0, &h, &channels, &base, &dark).unwrap();
        let stopped = evolve(
            &rho0,
            &h,
            &channels,
            &IntegratorConfig {
                stop_epsilon: Some(1e-12),
                ..base
            },
            &dark,
        )
        .unwrap();
        assert!(stopped.stopped_early);
        assert!(stopped.t_final() < 0.9 * full.t_final());
        // The truncated prefix is the same trajectory.
        let n = stopped.times.len();
        for k in 0..n {
            assert_eq!(stopped.times[k], full.times[k]);
            assert_eq!(stopped.dark_weight[k], full.dark_weight[k]);
        }
        // Both runs have settled to the same steady state.
        assert!(
            (stopped.dark_weight.last().unwrap() - full.dark_weight.last().unwrap()).abs()
                < 1e-9
        );
    }

    #[test]
    fn equal_coupling_runs_swap_exactly_under_dephasing_exchange() {
        let space = space2();
        let mut p = params_fig1();
        p.g1 = 30.0;
        p.g2 = 30.0;
        p.gamma_deph1 = 35.0;
        p.gamma_deph2 = 5.0;
        let mut q = p;
        q.gamma_deph1 = 5.0;
        q.gamma_deph2 = 35.0;

        let dim = space.dim();
        // Atom-exchange permutation: swap s1 and s2 within each block.
        let perm: Vec<usize> = (0..dim)
            .map(|i| {
                let (block, rest) = (i / 4, i % 4);
                let swapped = ((rest & 1) << 1) | (rest >> 1);
                block * 4 + swapped
            })
            .collect();

        let start = space.index_of(BasisState { n: 0, s1: 0, s2: 1 }).unwrap();
        let rho_p = pure_density(&space.ket(BasisState { n: 0, s1: 0, s2: 1 }).unwrap());
        let rho_q = pure_density(
            &space
                .ket(space.state_of(perm[start]).unwrap())
                .unwrap(),
        );
        let dark = dark_state(&space, &p, 0).unwrap();
        let config = IntegratorConfig {
            dt: 2e-4,
            t_end: 0.5,
            record_stride: 100,
            ..Default::default()
        };
        let run_p = evolve(
            &rho_p,
            &build_hamiltonian(&space, &p, true),
            &build_channels(&space, &p, ChannelToggles::default()),
            &config,
            &dark,
        )
        .unwrap();
        let run_q = evolve(
            &rho_q,
            &build_hamiltonian(&space, &q, true),
            &build_channels(&space, &q, ChannelToggles::default()),
            &config,
            &dark,
        )
        .unwrap();
        for k in 0..run_p.times.len() {
            for s in 0..dim {
                let a = run_p.populations[(k, s)];
                let b = run_q.populations[(k, perm[s])];
                assert!(
                    a == b,
                    "bit-exact permutation violated at sample {k}, state {s}: {a} vs {b}"
                );
            }
            assert!(run_p.dark_weight[k] == run_q.dark_weight[k]);
            assert!(run_p.trace_dev[k] == run_q.trace_dev[k]);
            assert!(run_p.drift[k] == run_q.drift[k]);
        }
    }

    #[test]
    #[ignore = "timing probe, run explicitly"]
    fn bench_rk4_throughput() {
        let space = space2();
        let p = params_fig1();
        let dark = dark_state(&space, &p, 0).unwrap();
        let rho0 = pure_density(&dark);
        let h = build_hamiltonian(&space, &p, true);
        let channels = build_channels(&space, &p, ChannelToggles::default());
        let steps = 200_000usize;
        let config = IntegratorConfig {
            dt: 1e-3,
            t_end: steps as f64 * 1e-3,
            record_stride: 1000,
            ..Default::default()
        };
        let t0 = std::time::Instant::now();
        let record = evolve(&rho0, &h, &channels, &config, &dark).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        println!(
            "rk4: {} steps in {:.3} s = {:.0} steps/s",
            record.steps,
            dt,
            record.steps as f64 / dt
        );
    }

    #[test]
    fn compiled_path_keeps_planes_exactly_hermitian() {
        let space = space2();
        let p = params_fig1();
        let dark = dark_state(&space, &p, 0).unwrap();
        let rho0 = pure_density(&dark);
        let h = build_hamiltonian(&space, &p, true);
        let channels = build_channels(&space, &p, ChannelToggles::default());
        let config = IntegratorConfig {
            dt: 1e-3,
            t_end: 1.0,
            record_stride: 250,
            ..Default::default()
        };
        let record = evolve(&rho0, &h, &channels, &config, &dark).unwrap();
        assert!(record.herm_dev.iter().all(|&x| x == 0.0));
    }
}
