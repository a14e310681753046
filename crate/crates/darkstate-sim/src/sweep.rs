//! Parameter sweeps: retention/stabilization heatmaps, diagonal dephasing
//! scans with gamma_min extraction, the coupling-ratio threshold k0, and a
//! brute-force steady-state oracle used to verify the integrator.
//!
//! Grid cells are independent; they are computed by a worker pool into
//! order-preserving slots, so results are bit-identical for any thread
//! count. Sweeps run in the rotating frame by default: the free evolution
//! commutes with every jump operator, so populations and dark weight are
//! frame-invariant, and the step size no longer has to resolve omega.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{DensityOp, HilbertSpace, Operator};
use crate::integrate::{evolve_partial, IntegratorConfig};
use crate::linalg::{dagger, kron, max_abs, trace, CMat, CVec, Lu, eigh, I};
use crate::model::{
    apply_liouvillian, build_channels, build_hamiltonian, dark_state, ChannelToggles,
    InitialState, LindbladChannel, ModelParams,
};
use crate::observables::stabilization_time;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisParam {
    GammaDeph1,
    GammaDeph2,
    Mu,
    G,
    KG,
}

impl AxisParam {
    pub fn name(&self) -> &'static str {
        match self {
            AxisParam::GammaDeph1 => "gamma_deph1",
            AxisParam::GammaDeph2 => "gamma_deph2",
            AxisParam::Mu => "mu",
            AxisParam::G => "g",
            AxisParam::KG => "k_g",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub param: AxisParam,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.min < self.max) {
            return Err(Error::EmptyGrid(format!(
                "axis {}: min {} not below max {}",
                self.param.name(),
                self.min,
                self.max
            )));
        }
        if self.points < 2 {
            return Err(Error::EmptyGrid(format!(
                "axis {}: needs at least 2 points",
                self.param.name()
            )));
        }
        if self.min < 0.0 {
            return Err(Error::EmptyGrid(format!(
                "axis {}: negative values are unphysical",
                self.param.name()
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| self.min + (self.max - self.min) * k as f64 / (n - 1) as f64)
            .collect()
    }

    /// Base parameters with this axis set to `value`. The mu axis scales
    /// gamma_in against the base gamma_out; g sets both couplings; k_g
    /// scales g2 against the base g1.
    pub fn apply(&self, base: &ModelParams, value: f64, tie_dephasing: bool) -> ModelParams {
        let mut p = *base;
        match self.param {
            AxisParam::GammaDeph1 => {
                p.gamma_deph1 = value;
                if tie_dephasing {
                    p.gamma_deph2 = value;
                }
            }
            AxisParam::GammaDeph2 => {
                p.gamma_deph2 = value;
                if tie_dephasing {
                    p.gamma_deph1 = value;
                }
            }
            AxisParam::Mu => p.gamma_in = value * p.gamma_out,
            AxisParam::G => {
                p.g1 = value;
                p.g2 = value;
            }
            AxisParam::KG => p.g2 = value * p.g1,
        }
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    /// Stationarity band width for T_stab.
    pub epsilon: f64,
    /// A dephasing axis drives both atoms' rates (symmetric scans).
    pub tie_dephasing: bool,
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
    /// Integrate in the rotating frame.
    pub rotating: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            epsilon: 1e-12,
            tie_dephasing: false,
            threads: 0,
            rotating: true,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CellOutcome {
    pub t_stab: f64,
    pub p_ret: f64,
    pub censored: bool,
}

/// One grid point: build, integrate, extract stabilization and retention.
/// Divergence or an uncertified band yields a censored cell, never an error.
fn run_cell(
    space: &HilbertSpace,
    params: &ModelParams,
    toggles: ChannelToggles,
    initial: &InitialState,
    integ: &IntegratorConfig,
    opts: &SweepOptions,
) -> Result<CellOutcome> {
    params.validate()?;
    let h = build_hamiltonian(space, params, opts.rotating);
    let channels = build_channels(space, params, toggles);
    let dark = dark_state(space, params, 0)?;
    let rho0 = initial.build(space, params)?;
    let mut config = *integ;
    config.stop_epsilon = Some(opts.epsilon);
    let (traj, diverged) = evolve_partial(&rho0, &h, &channels, &config, &dark)?;
    if diverged.is_some() {
        return Ok(CellOutcome {
            t_stab: f64::NAN,
            p_ret: f64::NAN,
            censored: true,
        });
    }
    let ret = stabilization_time(&traj, opts.epsilon);
    Ok(CellOutcome {
        t_stab: ret.t_stab,
        p_ret: ret.p_ret,
        censored: !ret.converged,
    })
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("worker pool")
            .install(f)
    }
}

#[derive(Clone, Debug)]
pub struct HeatmapResult {
    pub axes: [AxisSpec; 2],
    /// Raw grids indexed [first axis, second axis]; censored cells hold NaN
    /// when the run diverged.
    pub t_stab: Array2<f64>,
    pub p_ret: Array2<f64>,
    pub censored: Array2<bool>,
    pub t_stab_norm: Array2<f64>,
    pub p_ret_norm: Array2<f64>,
    /// Raw (min, max) over non-censored cells, for denormalization.
    pub t_stab_range: (f64, f64),
    pub p_ret_range: (f64, f64),
}

/// Min-max normalization over non-censored cells. A constant grid maps to
/// all zeros (min = max in the metadata). All-censored grids are an error.
pub fn normalize_heatmap(
    grid: &Array2<f64>,
    censored: &Array2<bool>,
) -> Result<(Array2<f64>, (f64, f64))> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (v, &c) in grid.iter().zip(censored.iter()) {
        if !c {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if !lo.is_finite() {
        return Err(Error::EmptyGrid("all cells censored".into()));
    }
    let span = hi - lo;
    let norm = grid
        .indexed_iter()
        .map(|(idx, &v)| {
            if censored[idx] || span == 0.0 {
                0.0
            } else {
                (v - lo) / span
            }
        })
        .collect::<Vec<_>>();
    Ok((
        Array2::from_shape_vec(grid.dim(), norm).expect("shape preserved"),
        (lo, hi),
    ))
}

pub fn run_heatmap(
    space: &HilbertSpace,
    base: &ModelParams,
    toggles: ChannelToggles,
    axes: [AxisSpec; 2],
    initial: &InitialState,
    integ: &IntegratorConfig,
    opts: &SweepOptions,
) -> Result<HeatmapResult> {
    axes[0].validate()?;
    axes[1].validate()?;
    if axes[0].param == axes[1].param {
        return Err(Error::EmptyGrid(format!(
            "both axes sweep {}",
            axes[0].param.name()
        )));
    }
    let xs = axes[0].values();
    let ys = axes[1].values();
    let nx = xs.len();
    let ny = ys.len();
    let cells: Vec<Result<CellOutcome>> = with_pool(opts.threads, || {
        (0..nx * ny)
            .into_par_iter()
            .map(|idx| {
                let (ix, iy) = (idx / ny, idx % ny);
                let p = axes[1].apply(
                    &axes[0].apply(base, xs[ix], opts.tie_dephasing),
                    ys[iy],
                    opts.tie_dephasing,
                );
                run_cell(space, &p, toggles, initial, integ, opts)
            })
            .collect()
    });
    let mut t_stab_grid = Array2::zeros((nx, ny));
    let mut p_ret = Array2::zeros((nx, ny));
    let mut censored = Array2::from_elem((nx, ny), false);
    for (idx, cell) in cells.into_iter().enumerate() {
        let cell = cell?;
        let (ix, iy) = (idx / ny, idx % ny);
        t_stab_grid[(ix, iy)] = cell.t_stab;
        p_ret[(ix, iy)] = cell.p_ret;
        censored[(ix, iy)] = cell.censored;
    }
    let (t_norm, t_range) = normalize_heatmap(&t_stab_grid, &censored)?;
    let (p_norm, p_range) = normalize_heatmap(&p_ret, &censored)?;
    Ok(HeatmapResult {
        axes,
        t_stab: t_stab_grid,
        p_ret,
        censored,
        t_stab_norm: t_norm,
        p_ret_norm: p_norm,
        t_stab_range: t_range,
        p_ret_range: p_range,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    AntiZeno,
    Zeno,
    /// Censored cell or the gamma = 0 endpoint, which has a different
    /// stationarity structure and never participates in classification.
    Excluded,
}

impl RegimeLabel {
    pub fn name(&self) -> &'static str {
        match self {
            RegimeLabel::AntiZeno => "anti_zeno",
            RegimeLabel::Zeno => "zeno",
            RegimeLabel::Excluded => "excluded",
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiagonalScan {
    pub gamma: Vec<f64>,
    pub t_stab: Vec<f64>,
    pub p_ret: Vec<f64>,
    pub censored: Vec<bool>,
    pub labels: Vec<RegimeLabel>,
    /// Grid argmin of T_stab over eligible points.
    pub argmin: Option<usize>,
    /// Parabolically refined interior minimum; None when the minimum sits
    /// on the scan boundary (monotone series).
    pub gamma_min: Option<f64>,
    pub t_min: Option<f64>,
    /// Retention at the grid argmin cell.
    pub p_ret_at_min: Option<f64>,
    pub boundary_minimum: bool,
}

/// Vertex of the parabola through three bracketing points.
pub fn parabola_vertex(
    (x0, y0): (f64, f64),
    (x1, y1): (f64, f64),
    (x2, y2): (f64, f64),
) -> Option<(f64, f64)> {
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == 0.0 {
        return None;
    }
    let xv = x1 - 0.5 * num / den;
    // Lagrange evaluation at the vertex.
    let l0 = (xv - x1) * (xv - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (xv - x0) * (xv - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (xv - x0) * (xv - x1) / ((x2 - x0) * (x2 - x1));
    Some((xv, y0 * l0 + y1 * l1 + y2 * l2))
}

/// Symmetric-dephasing cut gamma_deph1 = gamma_deph2 = gamma.
pub fn diagonal_scan(
    space: &HilbertSpace,
    base: &ModelParams,
    toggles: ChannelToggles,
    range: (f64, f64),
    points: usize,
    initial: &InitialState,
    integ: &IntegratorConfig,
    opts: &SweepOptions,
) -> Result<DiagonalScan> {
    let axis = AxisSpec {
        param: AxisParam::GammaDeph1,
        min: range.0,
        max: range.1,
        points,
    };
    axis.validate()?;
    let gamma = axis.values();
    let cells: Vec<Result<CellOutcome>> = with_pool(opts.threads, || {
        gamma
            .par_iter()
            .map(|&gv| {
                let p = axis.apply(base, gv, true);
                run_cell(space, &p, toggles, initial, integ, opts)
            })
            .collect()
    });
    let mut t_stab = Vec::with_capacity(points);
    let mut p_ret = Vec::with_capacity(points);
    let mut censored = Vec::with_capacity(points);
    for cell in cells {
        let cell = cell?;
        t_stab.push(cell.t_stab);
        p_ret.push(cell.p_ret);
        censored.push(cell.censored);
    }

    let eligible = |k: usize| !censored[k] && gamma[k] > 0.0;
    let argmin = (0..points)
        .filter(|&k| eligible(k))
        .min_by(|&a, &b| t_stab[a].total_cmp(&t_stab[b]));

    let mut gamma_min = None;
    let mut t_min = None;
    let mut p_ret_at_min = None;
    let mut boundary = false;
    if let Some(a) = argmin {
        p_ret_at_min = Some(p_ret[a]);
        let left = (0..a).rev().find(|&k| eligible(k));
        let right = (a + 1..points).find(|&k| eligible(k));
        match (left, right) {
            (Some(l), Some(r)) => {
                match parabola_vertex(
                    (gamma[l], t_stab[l]),
                    (gamma[a], t_stab[a]),
                    (gamma[r], t_stab[r]),
                ) {
                    Some((xv, yv)) if xv.is_finite() => {
                        // Clamp pathological fits back to the bracket.
                        let xv = xv.clamp(gamma[l], gamma[r]);
                        gamma_min = Some(xv);
                        t_min = Some(yv.min(t_stab[a]));
                    }
                    _ => {
                        gamma_min = Some(gamma[a]);
                        t_min = Some(t_stab[a]);
                    }
                }
            }
            _ => {
                boundary = true;
                t_min = Some(t_stab[a]);
            }
        }
    }

    let labels = (0..points)
        .map(|k| {
            if !eligible(k) {
                RegimeLabel::Excluded
            } else {
                match argmin {
                    Some(a) if k < a => RegimeLabel::AntiZeno,
                    Some(_) => RegimeLabel::Zeno,
                    None => RegimeLabel::Excluded,
                }
            }
        })
        .collect();

    Ok(DiagonalScan {
        gamma,
        t_stab,
        p_ret,
        censored,
        labels,
        argmin,
        gamma_min,
        t_min,
        p_ret_at_min,
        boundary_minimum: boundary,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct GminPoint {
    pub g: f64,
    pub gamma_min: Option<f64>,
    pub t_min: Option<f64>,
    pub p_ret_min: Option<f64>,
    pub boundary_minimum: bool,
}

/// Optimal dephasing rate versus symmetric coupling strength.
pub fn gmin_vs_g(
    space: &HilbertSpace,
    base: &ModelParams,
    toggles: ChannelToggles,
    g_values: &[f64],
    gamma_range: (f64, f64),
    gamma_points: usize,
    initial: &InitialState,
    integ: &IntegratorConfig,
    opts: &SweepOptions,
) -> Result<Vec<GminPoint>> {
    if g_values.is_empty() {
        return Err(Error::EmptyGrid("no coupling values".into()));
    }
    let mut out = Vec::with_capacity(g_values.len());
    for &g in g_values {
        let mut p = *base;
        p.g1 = g;
        p.g2 = g;
        let scan = diagonal_scan(
            space,
            &p,
            toggles,
            gamma_range,
            gamma_points,
            initial,
            integ,
            opts,
        )?;
        out.push(GminPoint {
            g,
            gamma_min: scan.gamma_min,
            t_min: scan.t_min,
            p_ret_min: scan.p_ret_at_min,
            boundary_minimum: scan.boundary_minimum,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeClass {
    ZenoFirst,
    Saddle,
    AntiZenoFirst,
}

impl RegimeClass {
    pub fn name(&self) -> &'static str {
        match self {
            RegimeClass::ZenoFirst => "zeno_first",
            RegimeClass::Saddle => "saddle",
            RegimeClass::AntiZenoFirst => "anti_zeno_first",
        }
    }
}

/// Classify a diagonal scan by the initial T_stab slope: the sign of the
/// difference across the two smallest eligible gamma points, with a saddle
/// band at 1% of the series' dynamic range.
pub fn classify_scan(scan: &DiagonalScan) -> Result<RegimeClass> {
    let eligible: Vec<usize> = (0..scan.gamma.len())
        .filter(|&k| !scan.censored[k] && scan.gamma[k] > 0.0)
        .collect();
    if eligible.len() < 2 {
        return Err(Error::EmptyGrid(
            "classification needs two eligible points".into(),
        ));
    }
    let lo = eligible
        .iter()
        .map(|&k| scan.t_stab[k])
        .fold(f64::INFINITY, f64::min);
    let hi = eligible
        .iter()
        .map(|&k| scan.t_stab[k])
        .fold(f64::NEG_INFINITY, f64::max);
    let dynamic = hi - lo;
    let slope = scan.t_stab[eligible[1]] - scan.t_stab[eligible[0]];
    if slope.abs() < 0.01 * dynamic || dynamic == 0.0 {
        Ok(RegimeClass::Saddle)
    } else if slope < 0.0 {
        Ok(RegimeClass::AntiZenoFirst)
    } else {
        Ok(RegimeClass::ZenoFirst)
    }
}

#[derive(Clone, Debug)]
pub struct K0Evaluation {
    pub g1: f64,
    pub k: f64,
    pub class: RegimeClass,
}

#[derive(Clone, Debug)]
pub struct ThresholdScan {
    pub g1: Vec<f64>,
    pub k0: Vec<f64>,
    pub evaluations: Vec<K0Evaluation>,
}

#[derive(Clone, Debug)]
pub struct K0ScanSpec {
    pub g1_values: Vec<f64>,
    pub k_lo: f64,
    pub k_hi: f64,
    /// Classification diagonal: gamma in [gamma_max/points, gamma_max],
    /// skipping zero so every point is eligible.
    pub gamma_max: f64,
    pub gamma_points: usize,
}

/// Bisection on the classification predicate to 1% relative width in k.
/// A saddle evaluation is the boundary itself. Both ends agreeing means
/// the range does not bracket the threshold.
fn bisect_k0(
    k_lo: f64,
    k_hi: f64,
    mut eval: impl FnMut(f64) -> Result<RegimeClass>,
) -> Result<(f64, Vec<(f64, RegimeClass)>)> {
    let mut trail = Vec::new();
    let class_lo = eval(k_lo)?;
    trail.push((k_lo, class_lo));
    let class_hi = eval(k_hi)?;
    trail.push((k_hi, class_hi));
    if class_lo == RegimeClass::Saddle {
        return Ok((k_lo, trail));
    }
    if class_hi == RegimeClass::Saddle {
        return Ok((k_hi, trail));
    }
    if class_lo == class_hi {
        return Err(Error::NotBracketed {
            class: class_lo.name().to_string(),
        });
    }
    let mut lo = k_lo;
    let mut hi = k_hi;
    while (hi - lo) > 0.01 * (0.5 * (hi + lo)) {
        let mid = 0.5 * (lo + hi);
        let c = eval(mid)?;
        trail.push((mid, c));
        if c == RegimeClass::Saddle {
            return Ok((mid, trail));
        }
        if c == class_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), trail))
}

/// Coupling-ratio threshold k0(g1) between the Zeno-first and
/// anti-Zeno-first patterns.
pub fn k0_scan(
    space: &HilbertSpace,
    base: &ModelParams,
    toggles: ChannelToggles,
    spec: &K0ScanSpec,
    initial: &InitialState,
    integ: &IntegratorConfig,
    opts: &SweepOptions,
) -> Result<ThresholdScan> {
    if spec.g1_values.is_empty() {
        return Err(Error::EmptyGrid("no g1 values".into()));
    }
    if !(spec.k_lo < spec.k_hi) {
        return Err(Error::EmptyGrid("k range is empty".into()));
    }
    let gamma_lo = spec.gamma_max / spec.gamma_points as f64;
    let mut scan = ThresholdScan {
        g1: Vec::new(),
        k0: Vec::new(),
        evaluations: Vec::new(),
    };
    for &g1 in &spec.g1_values {
        let eval = |k: f64| -> Result<RegimeClass> {
            let mut p = *base;
            p.g1 = g1;
            p.g2 = k * g1;
            let diag = diagonal_scan(
                space,
                &p,
                toggles,
                (gamma_lo, spec.gamma_max),
                spec.gamma_points,
                initial,
                integ,
                opts,
            )?;
            classify_scan(&diag)
        };
        let (k0, trail) = bisect_k0(spec.k_lo, spec.k_hi, eval)?;
        scan.g1.push(g1);
        scan.k0.push(k0);
        for (k, class) in trail {
            scan.evaluations.push(K0Evaluation { g1, k, class });
        }
    }
    Ok(scan)
}

/// Full Liouvillian as a dim^2 x dim^2 matrix acting on row-major vec(rho).
pub fn liouvillian_matrix(h: &Operator, channels: &[LindbladChannel]) -> CMat {
    let d = h.nrows();
    let id = CMat::eye(d);
    let ht = h.t().to_owned();
    let mut m = (kron(h, &id) - kron(&id, &ht)).mapv(|z| -I * z);
    for ch in channels {
        if ch.rate == 0.0 {
            continue;
        }
        let a = &ch.op;
        let ad = dagger(a);
        let ada = ad.dot(a);
        let adat = ada.t().to_owned();
        let aconj = a.mapv(|z| z.conj());
        let jump = kron(a, &aconj);
        let anti = kron(&ada, &id) + kron(&id, &adat);
        m = m + (jump - anti.mapv(|z| 0.5 * z)).mapv(|z| ch.rate * z);
    }
    m
}

/// Steady state from the null space of the vectorized Liouvillian,
/// independent of the time integrator: smallest singular vector of M via
/// an eigendecomposition of M+M, refined by shifted inverse iteration.
pub fn steady_state_oracle(h: &Operator, channels: &[LindbladChannel]) -> Result<DensityOp> {
    if channels.iter().all(|c| c.rate == 0.0) {
        return Err(Error::InvalidState(
            "steady-state oracle needs at least one dissipative channel".into(),
        ));
    }
    let d = h.nrows();
    let n = d * d;
    let m = liouvillian_matrix(h, channels);
    let g = dagger(&m).dot(&m);
    let (vals, vecs) = eigh(&g);
    // Forming G = M'M rounds its zero eigenvalue up to ~n*eps*|G|, while the
    // slowest genuine relaxation rate squared sits orders of magnitude above
    // that floor. Count null directions against a band between the two.
    let tau = 1e-11 * n as f64 * vals[n - 1].max(f64::MIN_POSITIVE);
    let multiplicity = vals.iter().filter(|&&l| l < tau).count();
    if multiplicity != 1 {
        return Err(Error::DegenerateSteadyState { multiplicity });
    }

    let mut x: CVec = vecs.column(0).to_owned();
    let mut shifted = g;
    for i in 0..n {
        shifted[(i, i)] += Complex64::new(tau, 0.0);
    }
    let lu = Lu::factor(&shifted)?;
    for _ in 0..2 {
        x = lu.solve(&x);
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        x.mapv_inplace(|z| z / norm);
    }

    let mut rho = DensityOp::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            rho[(i, j)] = x[i * d + j];
        }
    }
    let rho_h = (&rho + &dagger(&rho)).mapv(|z| 0.5 * z);
    let tr = trace(&rho_h);
    if tr.norm() < 1e-8 {
        return Err(Error::DegenerateTrace(tr.norm()));
    }
    let rho_ss = rho_h.mapv(|z| z / tr);

    let residual = max_abs(&apply_liouvillian(h, channels, &rho_ss));
    let tol = 1e-10;
    if residual > tol {
        return Err(Error::OracleResidual { residual, tol });
    }
    Ok(rho_ss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::BasisState;
    use crate::integrate::{evolve, Method};
    use crate::observables::trace_distance;

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

    fn fast_integ(t_end: f64) -> IntegratorConfig {
        IntegratorConfig {
            method: Method::Rk4,
            dt: 1e-3,
            t_end,
            record_stride: 50,
            monitor_tol: 1e-6,
            sanitize: false,
            stop_epsilon: None,
        }
    }

    #[test]
    fn axis_values_and_validation() {
        let ax = AxisSpec {
            param: AxisParam::GammaDeph1,
            min: 0.0,
            max: 2.0,
            points: 5,
        };
        ax.validate().unwrap();
        assert_eq!(ax.values(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let bad = AxisSpec { points: 1, ..ax };
        assert!(bad.validate().is_err());
        let bad = AxisSpec { min: 3.0, ..ax };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn axis_application_touches_the_right_parameters() {
        let base = params_fig1();
        let mu_axis = AxisSpec {
            param: AxisParam::Mu,
            min: 0.1,
            max: 0.9,
            points: 2,
        };
        let p = mu_axis.apply(&base, 0.25, false);
        assert!((p.gamma_in - 5.0).abs() < 1e-12);
        assert_eq!(p.gamma_out, base.gamma_out);

        let kg_axis = AxisSpec {
            param: AxisParam::KG,
            min: 1.0,
            max: 3.0,
            points: 2,
        };
        let p = kg_axis.apply(&base, 2.0, false);
        assert!((p.g2 - 60.0).abs() < 1e-12);

        let deph_axis = AxisSpec {
            param: AxisParam::GammaDeph1,
            min: 0.0,
            max: 10.0,
            points: 2,
        };
        let tied = deph_axis.apply(&base, 7.0, true);
        assert_eq!(tied.gamma_deph1, 7.0);
        assert_eq!(tied.gamma_deph2, 7.0);
        let untied = deph_axis.apply(&base, 7.0, false);
        assert_eq!(untied.gamma_deph2, base.gamma_deph2);
    }

    #[test]
    fn parabola_vertex_recovers_analytic_minimum() {
        // y = 3 (x - 1.3)^2 + 0.7
        let f = |x: f64| 3.0 * (x - 1.3).powi(2) + 0.7;
        let (xv, yv) = parabola_vertex((0.9, f(0.9)), (1.2, f(1.2)), (1.8, f(1.8))).unwrap();
        assert!((xv - 1.3).abs() < 1e-6);
        assert!((yv - 0.7).abs() < 1e-6);
        // Collinear points have no vertex.
        assert!(parabola_vertex((0.0, 0.0), (1.0, 1.0), (2.0, 2.0)).is_none());
    }

    #[test]
    fn normalization_and_round_trip() {
        let grid = Array2::from_shape_vec((1, 2), vec![1.0, 3.0]).unwrap();
        let censored = Array2::from_elem((1, 2), false);
        let (norm, (lo, hi)) = normalize_heatmap(&grid, &censored).unwrap();
        assert_eq!(norm[(0, 0)], 0.0);
        assert_eq!(norm[(0, 1)], 1.0);
        for (v, n) in grid.iter().zip(norm.iter()) {
            assert!((n * (hi - lo) + lo - v).abs() < 1e-12);
        }
        let flat = Array2::from_elem((2, 2), 5.0);
        let cen = Array2::from_elem((2, 2), false);
        let (norm, (lo, hi)) = normalize_heatmap(&flat, &cen).unwrap();
        assert!(norm.iter().all(|&v| v == 0.0));
        assert_eq!(lo, hi);
        let all = Array2::from_elem((2, 2), true);
        assert!(matches!(
            normalize_heatmap(&flat, &all),
            Err(Error::EmptyGrid(_))
        ));
    }

    #[test]
    fn bisection_finds_a_mock_threshold() {
        let (k0, trail) = bisect_k0(1.0, 3.0, |k| {
            Ok(if k < 1.77 {
                RegimeClass::ZenoFirst
            } else {
                RegimeClass::AntiZenoFirst
            })
        })
        .unwrap();
        assert!((k0 - 1.77).abs() < 0.01 * 1.77 + 0.02, "k0 = {k0}");
        assert!(trail.len() >= 4);
        // Reversed orientation works too.
        let (k0r, _) = bisect_k0(1.0, 3.0, |k| {
            Ok(if k < 2.4 {
                RegimeClass::AntiZenoFirst
            } else {
                RegimeClass::ZenoFirst
            })
        })
        .unwrap();
        assert!((k0r - 2.4).abs() < 0.05);
        assert!(matches!(
            bisect_k0(1.0, 3.0, |_| Ok(RegimeClass::ZenoFirst)),
            Err(Error::NotBracketed { .. })
        ));
    }

    #[test]
    fn frozen_atoms_make_the_steady_state_degenerate() {
        // With g = 0 the atomic populations are conserved, so the photon
        // channels leave a multi-dimensional stationary family behind.
        let space = space2();
        let mut p = params_fig1();
        p.g1 = 0.0;
        p.g2 = 0.0;
        p.gamma_out = 10.0;
        p.gamma_in = 3.0;
        let toggles = ChannelToggles {
            photon_out: true,
            photon_in: true,
            dephasing1: false,
            dephasing2: false,
        };
        let h = build_hamiltonian(&space, &p, false);
        let channels = build_channels(&space, &p, toggles);
        let err = steady_state_oracle(&h, &channels).unwrap_err();
        match err {
            Error::DegenerateSteadyState { multiplicity } => assert!(multiplicity > 1),
            other => panic!("expected degeneracy, got {other}"),
        }
        // Dephasing kills coherences but not populations: still degenerate.
        let mut p2 = p;
        p2.gamma_deph1 = 1.0;
        p2.gamma_deph2 = 1.0;
        let channels = build_channels(&space, &p2, ChannelToggles::default());
        let err = steady_state_oracle(&h, &channels).unwrap_err();
        assert!(matches!(err, Error::DegenerateSteadyState { .. }));
    }

    #[test]
    fn single_mode_thermal_oracle_is_geometric() {
        // A bare cavity with balanced in/out jumps satisfies detailed
        // balance level by level even after truncation, so the oracle must
        // land exactly on the truncated geometric distribution mu^n.
        use crate::model::ChannelKind;
        let n_max = 6;
        let d = n_max + 1;
        let mut h = Operator::zeros((d, d));
        let mut lower = Operator::zeros((d, d));
        for n in 0..d {
            h[(n, n)] = Complex64::new(5.0 * n as f64, 0.0);
            if n + 1 < d {
                lower[(n, n + 1)] = Complex64::new(((n + 1) as f64).sqrt(), 0.0);
            }
        }
        let raise = dagger(&lower);
        let (gamma_out, gamma_in) = (10.0, 3.0);
        let mu = gamma_in / gamma_out;
        let channels = vec![
            LindbladChannel {
                kind: ChannelKind::PhotonOut,
                rate: gamma_out,
                op: lower,
            },
            LindbladChannel {
                kind: ChannelKind::PhotonIn,
                rate: gamma_in,
                op: raise,
            },
        ];
        let rho = steady_state_oracle(&h, &channels).unwrap();
        let z: f64 = (0..d).map(|n| mu.powi(n as i32)).sum();
        for n in 0..d {
            let expected = mu.powi(n as i32) / z;
            assert!(
                (rho[(n, n)].re - expected).abs() < 1e-10,
                "level {n}: {} vs {}",
                rho[(n, n)].re,
                expected
            );
        }
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    assert!(rho[(i, j)].norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn oracle_agrees_with_long_integration_on_full_model() {
        let space = space2();
        let p = params_fig1();
        let h = build_hamiltonian(&space, &p, true);
        let channels = build_channels(&space, &p, ChannelToggles::default());
        let rho_ss = steady_state_oracle(&h, &channels).unwrap();
        assert!((trace(&rho_ss).re - 1.0).abs() < 1e-12);
        assert!(max_abs(&apply_liouvillian(&h, &channels, &rho_ss)) < 1e-10);

        let dark = dark_state(&space, &p, 0).unwrap();
        let rho0 = crate::hilbert::pure_density(&dark);
        let config = fast_integ(8.0);
        let record = evolve(&rho0, &h, &channels, &config, &dark).unwrap();
        let dist = trace_distance(&record.rho_final, &rho_ss);
        assert!(dist < 1e-8, "trace distance {dist:.3e}");
    }

    #[test]
    fn tiny_heatmap_runs_and_normalizes() {
        let space = space2();
        let p = params_fig1();
        let axes = [
            AxisSpec {
                param: AxisParam::GammaDeph1,
                min: 5.0,
                max: 25.0,
                points: 2,
            },
            AxisSpec {
                param: AxisParam::GammaDeph2,
                min: 5.0,
                max: 25.0,
                points: 2,
            },
        ];
        let opts = SweepOptions {
            epsilon: 1e-9,
            ..Default::default()
        };
        let map = run_heatmap(
            &space,
            &p,
            ChannelToggles::default(),
            axes,
            &InitialState::Dark(0),
            &fast_integ(30.0),
            &opts,
        )
        .unwrap();
        assert_eq!(map.t_stab.dim(), (2, 2));
        assert!(map.censored.iter().all(|&c| !c));
        assert!(map.t_stab.iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(map.p_ret.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(map
            .t_stab_norm
            .iter()
            .all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn identical_axes_are_rejected() {
        let space = space2();
        let ax = AxisSpec {
            param: AxisParam::Mu,
            min: 0.1,
            max: 0.5,
            points: 2,
        };
        let err = run_heatmap(
            &space,
            &params_fig1(),
            ChannelToggles::default(),
            [ax, ax],
            &InitialState::Dark(0),
            &fast_integ(1.0),
            &SweepOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyGrid(_)));
    }

    #[test]
    fn heatmap_is_deterministic_across_thread_counts() {
        let space = space2();
        let mut p = params_fig1();
        p.g1 = 30.0;
        p.g2 = 30.0;
        let axes = [
            AxisSpec {
                param: AxisParam::GammaDeph1,
                min: 4.0,
                max: 30.0,
                points: 2,
            },
            AxisSpec {
                param: AxisParam::GammaDeph2,
                min: 4.0,
                max: 30.0,
                points: 2,
            },
        ];
        let integ = fast_integ(25.0);
        let run = |threads: usize| {
            let opts = SweepOptions {
                epsilon: 1e-9,
                threads,
                ..Default::default()
            };
            run_heatmap(
                &space,
                &p,
                ChannelToggles::default(),
                axes,
                &InitialState::Dark(0),
                &integ,
                &opts,
            )
            .unwrap()
        };
        let a = run(1);
        let b = run(4);
        let c = run(1);
        for (x, y) in a.t_stab.iter().zip(b.t_stab.iter()) {
            assert!(x.to_bits() == y.to_bits());
        }
        for (x, y) in a.p_ret.iter().zip(b.p_ret.iter()) {
            assert!(x.to_bits() == y.to_bits());
        }
        for (x, y) in a.p_ret.iter().zip(c.p_ret.iter()) {
            assert!(x.to_bits() == y.to_bits());
        }
    }

    #[test]
    fn symmetric_couplings_give_exactly_symmetric_heatmaps() {
        let space = space2();
        let mut p = params_fig1();
        p.g1 = 30.0;
        p.g2 = 30.0;
        let axes = [
            AxisSpec {
                param: AxisParam::GammaDeph1,
                min: 4.0,
                max: 36.0,
                points: 3,
            },
            AxisSpec {
                param: AxisParam::GammaDeph2,
                min: 4.0,
                max: 36.0,
                points: 3,
            },
        ];
        let opts = SweepOptions {
            epsilon: 1e-9,
            ..Default::default()
        };
        let map = run_heatmap(
            &space,
            &p,
            ChannelToggles::default(),
            axes,
            &InitialState::Dark(0),
            &fast_integ(25.0),
            &opts,
        )
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    map.t_stab[(i, j)].to_bits() == map.t_stab[(j, i)].to_bits(),
                    "t_stab asymmetry at ({i},{j})"
                );
                assert!(map.p_ret[(i, j)].to_bits() == map.p_ret[(j, i)].to_bits());
            }
        }
    }

    #[test]
    fn diagonal_scan_labels_partition_the_grid() {
        let space = space2();
        let mut p = params_fig1();
        p.g1 = 30.0;
        p.g2 = 30.0;
        p.gamma_out = 10.0;
        p.gamma_in = 3.0;
        let opts = SweepOptions {
            epsilon: 1e-9,
            ..Default::default()
        };
        let scan = diagonal_scan(
            &space,
            &p,
            ChannelToggles::default(),
            (0.0, 40.0),
            5,
            &InitialState::Dark(0),
            &fast_integ(40.0),
            &opts,
        )
        .unwrap();
        assert_eq!(scan.labels.len(), 5);
        assert_eq!(scan.labels[0], RegimeLabel::Excluded);
        let transitions = scan
            .labels
            .windows(2)
            .filter(|w| {
                w[0] == RegimeLabel::AntiZeno && w[1] == RegimeLabel::Zeno
            })
            .count();
        assert!(transitions <= 1);
        if let Some(a) = scan.argmin {
            assert!(!scan.censored[a]);
            assert!(scan.gamma[a] > 0.0);
        }
    }

    #[test]
    fn ket_initial_state_recovers_dark_weight() {
        // A non-dark start under the full model picks up dark weight; the
        // cell must come out positive and uncensored.
        let space = space2();
        let mut p = params_fig1();
        p.gamma_out = 10.0;
        p.gamma_in = 8.0;
        p.g1 = 30.0;
        p.g2 = 70.0;
        p.gamma_deph1 = 2.0;
        p.gamma_deph2 = 2.0;
        let opts = SweepOptions {
            epsilon: 1e-9,
            ..Default::default()
        };
        let integ = IntegratorConfig {
            dt: 2.5e-3,
            t_end: 60.0,
            record_stride: 40,
            ..Default::default()
        };
        let cell = run_cell(
            &space,
            &p,
            ChannelToggles::default(),
            &InitialState::Ket(BasisState { n: 0, s1: 0, s2: 1 }),
            &integ,
            &opts,
        )
        .unwrap();
        assert!(!cell.censored, "cell censored");
        assert!(cell.p_ret > 0.0, "p_ret = {}", cell.p_ret);
    }
}
