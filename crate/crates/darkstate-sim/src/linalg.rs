//! Dense complex linear algebra for small matrices.
//!
//! Everything in the simulator lives in dimension <= a few hundred (the
//! vectorized Liouvillian is the largest at dim^2 x dim^2), so a cyclic
//! Jacobi eigensolver and an LU factorization with partial pivoting cover
//! all needs without pulling in a LAPACK binding. Jacobi is also strictly
//! deterministic, which the sweep reproducibility guarantees rely on.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(a: &CMat) -> Complex64 {
    (0..a.nrows()).map(|i| a[(i, i)]).sum()
}

/// Max |a - a^dagger| entry, zero for exactly Hermitian input.
pub fn hermiticity_deviation(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Kronecker product, row-major convention: (A kron B)[(i*p+k),(j*q+l)] = A[i,j] B[k,l].
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (m, n) = a.dim();
    let (p, q) = b.dim();
    let mut out = CMat::zeros((m * p, n * q));
    for i in 0..m {
        for j in 0..n {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..p {
                for l in 0..q {
                    out[(i * p + k, j * q + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues ascending and the unitary of column eigenvectors,
/// a = v diag(w) v^dagger. Input asymmetry is not checked here; callers
/// validate where the contract demands it.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    jacobi(a, true)
}

/// Eigenvalues only (ascending); skips eigenvector accumulation.
pub fn eigvalsh(a: &CMat) -> Vec<f64> {
    jacobi(a, false).0
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    eigvalsh(a)[0]
}

fn jacobi(a: &CMat, with_vectors: bool) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh requires a square matrix");
    let mut m = a.clone();
    let mut v = CMat::eye(n);
    let scale = frobenius(a).max(f64::MIN_POSITIVE);
    let tol = 1e-30 * scale * scale;

    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let abs = apq.norm();
                if abs <= 1e-300 {
                    continue;
                }
                // Phase that makes the pivot real, then a real rotation.
                let phase = apq / abs;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let zeta = (aqq - app) / (2.0 * abs);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Column rotation coefficients: new_p = c*col_p - s*conj(phase)*col_q,
                // new_q = s*phase*col_p + c*col_q, applied symmetrically.
                let sp = s * phase;
                let spc = s * phase.conj();
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - spc * mkq;
                    m[(k, q)] = sp * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - sp * mqk;
                    m[(q, k)] = spc * mpk + c * mqk;
                }
                // Clean the pivot pair exactly.
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);
                if with_vectors {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - spc * vkq;
                        v[(k, q)] = sp * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.partial_cmp(&m[(j, j)].re).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| m[(i, i)].re).collect();
    let vecs = if with_vectors {
        let mut sorted = CMat::zeros((n, n));
        for (new, &old) in order.iter().enumerate() {
            for k in 0..n {
                sorted[(k, new)] = v[(k, old)];
            }
        }
        sorted
    } else {
        v
    };
    (vals, vecs)
}

/// LU factorization with partial pivoting for complex square matrices.
pub struct Lu {
    lu: CMat,
    piv: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &CMat) -> Result<Lu> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU requires a square matrix");
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pivot = k;
            let mut best = lu[(k, k)].norm();
            for r in (k + 1)..n {
                let cand = lu[(r, k)].norm();
                if cand > best {
                    best = cand;
                    pivot = r;
                }
            }
            if best < 1e-300 {
                return Err(Error::SingularMatrix("zero pivot in LU factorization"));
            }
            if pivot != k {
                piv.swap(k, pivot);
                for c in 0..n {
                    let tmp = lu[(k, c)];
                    lu[(k, c)] = lu[(pivot, c)];
                    lu[(pivot, c)] = tmp;
                }
            }
            let inv = ONE / lu[(k, k)];
            for r in (k + 1)..n {
                let f = lu[(r, k)] * inv;
                lu[(r, k)] = f;
                if f != ZERO {
                    for c in (k + 1)..n {
                        let sub = f * lu[(k, c)];
                        lu[(r, c)] -= sub;
                    }
                }
            }
        }
        Ok(Lu { lu, piv })
    }

    pub fn solve(&self, b: &CVec) -> CVec {
        let n = self.lu.nrows();
        let mut x = CVec::zeros(n);
        for i in 0..n {
            x[i] = b[self.piv[i]];
        }
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        // Small deterministic LCG so tests stay reproducible without an RNG dep.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut a = CMat::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = Complex64::new(next(), next());
            }
        }
        let ad = dagger(&a);
        (&a + &ad).mapv(|z| 0.5 * z)
    }

    #[test]
    fn eigh_reconstructs_diagonal_matrix() {
        let mut a = CMat::zeros((3, 3));
        a[(0, 0)] = Complex64::new(2.0, 0.0);
        a[(1, 1)] = Complex64::new(-1.0, 0.0);
        a[(2, 2)] = Complex64::new(0.5, 0.0);
        let (w, v) = eigh(&a);
        assert_eq!(w, vec![-1.0, 0.5, 2.0]);
        // Columns must be the standard basis up to phase.
        for c in 0..3 {
            let col: Vec<f64> = (0..3).map(|r| v[(r, c)].norm()).collect();
            let on: f64 = col.iter().map(|x| x * x).sum();
            assert!((on - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn eigh_known_two_level() {
        // Pauli x has eigenvalues -1, +1.
        let mut a = CMat::zeros((2, 2));
        a[(0, 1)] = ONE;
        a[(1, 0)] = ONE;
        let (w, v) = eigh(&a);
        assert!((w[0] + 1.0).abs() < 1e-14);
        assert!((w[1] - 1.0).abs() < 1e-14);
        let recon = reconstruct(&w, &v);
        assert!(max_abs(&(&recon - &a)) < 1e-14);
    }

    fn reconstruct(w: &[f64], v: &CMat) -> CMat {
        let n = w.len();
        let mut d = CMat::zeros((n, n));
        for i in 0..n {
            d[(i, i)] = Complex64::new(w[i], 0.0);
        }
        v.dot(&d).dot(&dagger(v))
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        for seed in 1..=8u64 {
            let n = 4 + (seed as usize % 9);
            let a = random_hermitian(n, seed);
            let (w, v) = eigh(&a);
            let recon = reconstruct(&w, &v);
            let scale = frobenius(&a).max(1.0);
            assert!(
                max_abs(&(&recon - &a)) < 1e-13 * scale,
                "reconstruction failed at n = {n}"
            );
            let vtv = dagger(&v).dot(&v);
            let eye = CMat::eye(n);
            assert!(max_abs(&(&vtv - &eye)) < 1e-13, "not unitary at n = {n}");
            for k in 1..w.len() {
                assert!(w[k] >= w[k - 1]);
            }
        }
    }

    #[test]
    fn lu_solves_known_system() {
        let mut a = CMat::zeros((2, 2));
        a[(0, 0)] = Complex64::new(2.0, 0.0);
        a[(0, 1)] = Complex64::new(0.0, 1.0);
        a[(1, 0)] = Complex64::new(0.0, -1.0);
        a[(1, 1)] = Complex64::new(3.0, 0.0);
        let lu = Lu::factor(&a).unwrap();
        let b = CVec::from(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)]);
        let x = lu.solve(&b);
        let r0 = a[(0, 0)] * x[0] + a[(0, 1)] * x[1] - b[0];
        let r1 = a[(1, 0)] * x[0] + a[(1, 1)] * x[1] - b[1];
        assert!(r0.norm() < 1e-14 && r1.norm() < 1e-14);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = CMat::zeros((3, 3));
        assert!(Lu::factor(&a).is_err());
    }

    #[test]
    fn kron_matches_hand_computation() {
        let mut a = CMat::zeros((2, 2));
        a[(0, 1)] = Complex64::new(2.0, 0.0);
        let mut b = CMat::eye(2);
        b[(1, 1)] = Complex64::new(3.0, 0.0);
        let k = kron(&a, &b);
        assert_eq!(k.dim(), (4, 4));
        assert_eq!(k[(0, 2)], Complex64::new(2.0, 0.0));
        assert_eq!(k[(1, 3)], Complex64::new(6.0, 0.0));
        assert_eq!(k[(2, 0)], ZERO);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prop_eigh_residual_small(seed in 1u64..500) {
            let n = 3 + (seed as usize % 6);
            let a = random_hermitian(n, seed);
            let (w, v) = eigh(&a);
            let recon = reconstruct(&w, &v);
            let scale = frobenius(&a).max(1.0);
            prop_assert!(max_abs(&(&recon - &a)) < 1e-12 * scale);
        }

        #[test]
        fn prop_lu_solve_residual(seed in 1u64..500) {
            let n = 3 + (seed as usize % 6);
            let mut a = random_hermitian(n, seed);
            for i in 0..n {
                a[(i, i)] += Complex64::new(4.0 * n as f64, 0.0);
            }
            let lu = Lu::factor(&a).unwrap();
            let b = CVec::from((0..n).map(|i| Complex64::new(i as f64 + 1.0, -(i as f64))).collect::<Vec<_>>());
            let x = lu.solve(&b);
            let mut rmax = 0.0_f64;
            for i in 0..n {
                let mut acc = -b[i];
                for j in 0..n {
                    acc += a[(i, j)] * x[j];
                }
                rmax = rmax.max(acc.norm());
            }
            prop_assert!(rmax < 1e-10 * frobenius(&a));
        }
    }
}
