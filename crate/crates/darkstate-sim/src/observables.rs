//! Populations, dark-state weight, stabilization time and retention.
//!
//! The stabilization time is the earliest recorded time T after which every
//! basis-state population stays within an epsilon band of its value at T.
//! Retention is the dark-state weight at that sample.

use ndarray::ArrayView2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{DensityOp, HilbertSpace, StateVector};
use crate::integrate::TrajectoryRecord;
use crate::linalg::eigvalsh;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetentionResult {
    pub t_stab: f64,
    pub p_ret: f64,
    /// False when the run never certifiably settled: either the band was
    /// still exited at the final sample or the terminal drift guard failed.
    pub converged: bool,
    /// Recorded-sample index of t_stab.
    pub index: usize,
}

/// Real diagonal of rho in the product basis.
pub fn populations(rho: &DensityOp, space: &HilbertSpace) -> Vec<f64> {
    debug_assert_eq!(rho.nrows(), space.dim());
    (0..rho.nrows()).map(|i| rho[(i, i)].re).collect()
}

/// <psi|rho|psi> for a normalized pure target.
pub fn fidelity_to_pure(rho: &DensityOp, psi: &StateVector) -> Result<f64> {
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidState(format!(
            "target state norm^2 = {norm}, expected 1"
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            acc += psi[i].conj() * rho[(i, j)] * psi[j];
        }
    }
    Ok(acc.re)
}

/// Half the sum of absolute eigenvalues of (a - b).
pub fn trace_distance(a: &DensityOp, b: &DensityOp) -> f64 {
    let diff = a - b;
    0.5 * eigvalsh(&diff).iter().map(|l| l.abs()).sum::<f64>()
}

/// Index of the earliest sample whose trailing suffix stays inside the
/// epsilon band anchored at that sample, scanning backward from the end:
/// the sample right after the last band exit.
pub fn stabilization_index(populations: ArrayView2<'_, f64>, epsilon: f64) -> usize {
    let m = populations.nrows();
    let ns = populations.ncols();
    if m == 0 {
        return 0;
    }
    let mut lo = vec![f64::INFINITY; ns];
    let mut hi = vec![f64::NEG_INFINITY; ns];
    let mut t_index = m - 1;
    for k in (0..m).rev() {
        // lo/hi cover samples strictly after k here.
        let mut ok = true;
        for s in 0..ns {
            let v = populations[(k, s)];
            if hi[s] - v >= epsilon || v - lo[s] >= epsilon {
                ok = false;
                break;
            }
        }
        if !ok {
            break;
        }
        t_index = k;
        for s in 0..ns {
            let v = populations[(k, s)];
            if v < lo[s] {
                lo[s] = v;
            }
            if v > hi[s] {
                hi[s] = v;
            }
        }
    }
    t_index
}

/// Stabilization time, retention, and the convergence verdict for a
/// trajectory. Convergence requires the band to hold over a nonempty tail
/// and the final right-hand side to be quiet (max-norm below 100 x epsilon).
pub fn stabilization_time(traj: &TrajectoryRecord, epsilon: f64) -> RetentionResult {
    let idx = stabilization_index(traj.populations.view(), epsilon);
    let last = traj.times.len().saturating_sub(1);
    let terminal_quiet = traj
        .drift
        .last()
        .map(|&r| r.is_finite() && r < 100.0 * epsilon)
        .unwrap_or(false);
    RetentionResult {
        t_stab: traj.times.get(idx).copied().unwrap_or(0.0),
        p_ret: traj.dark_weight.get(idx).copied().unwrap_or(0.0),
        converged: terminal_quiet && idx < last,
        index: idx,
    }
}

/// Dark weight at the recorded sample nearest to t.
pub fn retention(traj: &TrajectoryRecord, t: f64) -> f64 {
    if traj.times.is_empty() {
        return 0.0;
    }
    let mut best = 0usize;
    let mut gap = f64::INFINITY;
    for (k, &tk) in traj.times.iter().enumerate() {
        let d = (tk - t).abs();
        if d < gap {
            gap = d;
            best = k;
        }
    }
    traj.dark_weight[best]
}
