//! Truncated product basis for one cavity mode and two two-level atoms.
//!
//! Basis kets are |n, s1 s2> with photon number n in 0..=n_max and atomic
//! occupations s1, s2 in {0, 1}. Ordering is photon-major:
//!
//! ```text
//! index = n * 4 + s1 * 2 + s2,        dim = (n_max + 1) * 4
//! ```
//!
//! so |0,00>, |0,01>, |0,10>, |0,11>, |1,00>, ... The photon ladder is hard
//! truncated: the raising operator annihilates the n = n_max layer, and
//! integration records the population of that layer so truncation error is
//! observable rather than silent.

use ndarray::Array1;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, ONE};

pub type Operator = CMat;
pub type StateVector = Array1<Complex64>;
pub type DensityOp = CMat;

const ATOM_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasisState {
    pub n: usize,
    pub s1: u8,
    pub s2: u8,
}

impl BasisState {
    pub fn excitations(&self) -> usize {
        self.n + self.s1 as usize + self.s2 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HilbertSpace {
    n_max: usize,
}

impl HilbertSpace {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidTruncation(n_max));
        }
        Ok(HilbertSpace { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        (self.n_max + 1) * ATOM_DIM
    }

    pub fn index_of(&self, state: BasisState) -> Result<usize> {
        if state.n > self.n_max || state.s1 > 1 || state.s2 > 1 {
            return Err(Error::StateOutOfRange {
                n: state.n,
                s1: state.s1,
                s2: state.s2,
                n_max: self.n_max,
            });
        }
        Ok(state.n * ATOM_DIM + state.s1 as usize * 2 + state.s2 as usize)
    }

    pub fn state_of(&self, index: usize) -> Result<BasisState> {
        if index >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index,
                dim: self.dim(),
            });
        }
        Ok(BasisState {
            n: index / ATOM_DIM,
            s1: ((index % ATOM_DIM) / 2) as u8,
            s2: (index % 2) as u8,
        })
    }

    pub fn states(&self) -> impl Iterator<Item = BasisState> + '_ {
        (0..self.dim()).map(move |i| self.state_of(i).expect("index in range"))
    }

    /// Human-readable ket label, used in CSV headers.
    pub fn label(&self, index: usize) -> Result<String> {
        let s = self.state_of(index)?;
        Ok(format!("n{}_a{}{}", s.n, s.s1, s.s2))
    }

    /// Basis ket as a state vector.
    pub fn ket(&self, state: BasisState) -> Result<StateVector> {
        let idx = self.index_of(state)?;
        let mut v = StateVector::zeros(self.dim());
        v[idx] = ONE;
        Ok(v)
    }
}

/// Cavity annihilation operator: a |n, s1 s2> = sqrt(n) |n-1, s1 s2>.
pub fn photon_annihilation(space: &HilbertSpace) -> Operator {
    let dim = space.dim();
    let mut a = Operator::zeros((dim, dim));
    for state in space.states() {
        if state.n == 0 {
            continue;
        }
        let from = space.index_of(state).unwrap();
        let to = space
            .index_of(BasisState {
                n: state.n - 1,
                ..state
            })
            .unwrap();
        a[(to, from)] = Complex64::new((state.n as f64).sqrt(), 0.0);
    }
    a
}

/// Cavity number operator a^dagger a (diagonal).
pub fn photon_number(space: &HilbertSpace) -> Operator {
    let dim = space.dim();
    let mut n = Operator::zeros((dim, dim));
    for state in space.states() {
        let i = space.index_of(state).unwrap();
        n[(i, i)] = Complex64::new(state.n as f64, 0.0);
    }
    n
}

fn check_atom(atom: usize) -> Result<()> {
    if atom == 1 || atom == 2 {
        Ok(())
    } else {
        Err(Error::InvalidAtom(atom))
    }
}

/// Atomic lowering operator sigma_i = |0><1| on atom i (1 or 2).
pub fn atomic_lowering(space: &HilbertSpace, atom: usize) -> Result<Operator> {
    check_atom(atom)?;
    let dim = space.dim();
    let mut sig = Operator::zeros((dim, dim));
    for state in space.states() {
        let occupied = if atom == 1 { state.s1 } else { state.s2 };
        if occupied == 0 {
            continue;
        }
        let from = space.index_of(state).unwrap();
        let lowered = if atom == 1 {
            BasisState { s1: 0, ..state }
        } else {
            BasisState { s2: 0, ..state }
        };
        let to = space.index_of(lowered).unwrap();
        sig[(to, from)] = ONE;
    }
    Ok(sig)
}

/// Excitation projector d_i = sigma_i^dagger sigma_i, the jump operator of
/// the measurement-induced dephasing channel on atom i.
pub fn excitation_projector(space: &HilbertSpace, atom: usize) -> Result<Operator> {
    check_atom(atom)?;
    let dim = space.dim();
    let mut d = Operator::zeros((dim, dim));
    for state in space.states() {
        let occupied = if atom == 1 { state.s1 } else { state.s2 };
        if occupied == 1 {
            let i = space.index_of(state).unwrap();
            d[(i, i)] = ONE;
        }
    }
    Ok(d)
}

pub fn identity(space: &HilbertSpace) -> Operator {
    Operator::eye(space.dim())
}

/// Projector |psi><psi| as a density matrix.
pub fn pure_density(psi: &StateVector) -> DensityOp {
    let dim = psi.len();
    let mut rho = DensityOp::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            rho[(i, j)] = psi[i] * psi[j].conj();
        }
    }
    rho
}

/// Total population of the topmost photon layer; the truncation-leakage
/// diagnostic recorded along every trajectory.
pub fn truncation_leakage(space: &HilbertSpace, rho: &DensityOp) -> f64 {
    let base = space.n_max * ATOM_DIM;
    (0..ATOM_DIM).map(|k| rho[(base + k, base + k)].re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, max_abs};
    use proptest::prelude::*;

    #[test]
    fn dimension_counts_photon_layers() {
        assert_eq!(HilbertSpace::new(1).unwrap().dim(), 8);
        assert_eq!(HilbertSpace::new(2).unwrap().dim(), 12);
        assert_eq!(HilbertSpace::new(5).unwrap().dim(), 24);
    }

    #[test]
    fn truncation_below_one_rejected() {
        assert!(matches!(
            HilbertSpace::new(0),
            Err(Error::InvalidTruncation(0))
        ));
    }

    #[test]
    fn photon_major_ordering() {
        let space = HilbertSpace::new(2).unwrap();
        let idx = space
            .index_of(BasisState { n: 1, s1: 1, s2: 1 })
            .unwrap();
        assert_eq!(idx, 7);
        let st = space.state_of(7).unwrap();
        assert_eq!(st, BasisState { n: 1, s1: 1, s2: 1 });
        assert_eq!(
            space.index_of(BasisState { n: 0, s1: 0, s2: 1 }).unwrap(),
            1
        );
        assert_eq!(
            space.index_of(BasisState { n: 0, s1: 1, s2: 0 }).unwrap(),
            2
        );
    }

    #[test]
    fn out_of_range_lookups_fail() {
        let space = HilbertSpace::new(2).unwrap();
        assert!(space.index_of(BasisState { n: 3, s1: 0, s2: 0 }).is_err());
        assert!(space.state_of(12).is_err());
        assert!(space.index_of(BasisState { n: 0, s1: 2, s2: 0 }).is_err());
    }

    #[test]
    fn annihilation_entries_are_sqrt_n() {
        let space = HilbertSpace::new(2).unwrap();
        let a = photon_annihilation(&space);
        // <1,00| a |2,00> = sqrt(2)
        assert!((a[(4, 8)].re - 2.0_f64.sqrt()).abs() < 1e-15);
        assert!((a[(0, 4)].re - 1.0).abs() < 1e-15);
        // vacuum annihilated
        for j in 0..4 {
            for i in 0..space.dim() {
                assert_eq!(a[(i, j)], crate::linalg::ZERO);
            }
        }
    }

    #[test]
    fn commutator_a_adag_is_identity_below_truncation() {
        let space = HilbertSpace::new(3).unwrap();
        let a = photon_annihilation(&space);
        let ad = dagger(&a);
        let comm = a.dot(&ad) - ad.dot(&a);
        for state in space.states() {
            let i = space.index_of(state).unwrap();
            let expect = if state.n < space.n_max() { 1.0 } else { -(space.n_max() as f64) };
            assert!(
                (comm[(i, i)].re - expect).abs() < 1e-14,
                "diagonal wrong at n = {}",
                state.n
            );
        }
    }

    #[test]
    fn atomic_algebra() {
        let space = HilbertSpace::new(1).unwrap();
        for atom in [1, 2] {
            let s = atomic_lowering(&space, atom).unwrap();
            let sd = dagger(&s);
            // sigma^2 = 0
            assert!(max_abs(&s.dot(&s)) < 1e-15);
            // sigma^dag sigma + sigma sigma^dag = identity
            let sum = sd.dot(&s) + s.dot(&sd);
            assert!(max_abs(&(&sum - &identity(&space))) < 1e-15);
            // projector matches
            let d = excitation_projector(&space, atom).unwrap();
            assert!(max_abs(&(&sd.dot(&s) - &d)) < 1e-15);
            assert!(max_abs(&(&d.dot(&d) - &d)) < 1e-15);
        }
        assert!(atomic_lowering(&space, 3).is_err());
        assert!(excitation_projector(&space, 0).is_err());
    }

    #[test]
    fn operators_on_different_factors_commute() {
        let space = HilbertSpace::new(2).unwrap();
        let a = photon_annihilation(&space);
        for atom in [1, 2] {
            let s = atomic_lowering(&space, atom).unwrap();
            let comm = a.dot(&s) - s.dot(&a);
            assert!(max_abs(&comm) < 1e-15);
        }
        let s1 = atomic_lowering(&space, 1).unwrap();
        let s2 = atomic_lowering(&space, 2).unwrap();
        assert!(max_abs(&(&s1.dot(&s2) - &s2.dot(&s1))) < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_index_state_roundtrip(n_max in 1usize..8, idx_seed in 0usize..1000) {
            let space = HilbertSpace::new(n_max).unwrap();
            let idx = idx_seed % space.dim();
            let st = space.state_of(idx).unwrap();
            prop_assert_eq!(space.index_of(st).unwrap(), idx);
            prop_assert!(st.n <= n_max);
        }

        #[test]
        fn prop_states_enumeration_is_bijective(n_max in 1usize..6) {
            let space = HilbertSpace::new(n_max).unwrap();
            let mut seen = vec![false; space.dim()];
            for st in space.states() {
                let i = space.index_of(st).unwrap();
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
            prop_assert!(seen.iter().all(|&b| b));
        }
    }
}
