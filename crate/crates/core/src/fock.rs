//! Bosonic Fock space over a fixed number of optical modes.
//!
//! States are occupation vectors with a fixed total photon number, ordered
//! lexicographically descending, so for two modes and two photons the basis
//! reads (2,0), (1,1), (0,2). A mode unitary acts on this space through the
//! permanent-based lift, and mixed states are compared with the Uhlmann
//! fidelity.

use std::collections::HashMap;


use crate::linalg::{dagger, sqrt_psd, C64, CMat, CVec};
use crate::{Error, Result};

/// Photon-number basis for `modes` optical modes at a fixed total `photons`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockBasis {
    pub modes: usize,
    pub photons: usize,
    states: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

/// Number of occupation vectors: C(modes + photons − 1, photons).
pub fn dimension(modes: usize, photons: usize) -> usize {
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for k in 0..photons {
        num *= (modes + photons - 1 - k) as u128;
        den *= (k + 1) as u128;
    }
    (num / den) as usize
}

impl FockBasis {
    /// Enumerates all occupation vectors in lexicographically descending order.
    pub fn new(modes: usize, photons: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidInput("a Fock basis needs at least one mode".into()));
        }
        let mut states = Vec::with_capacity(dimension(modes, photons));
        let mut current = vec![0usize; modes];
        fill(&mut states, &mut current, 0, photons);
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Self { modes, photons, states, index })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<usize>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[usize] {
        &self.states[i]
    }

    /// Index of an occupation vector, if it belongs to this basis.
    pub fn index_of(&self, occupation: &[usize]) -> Option<usize> {
        self.index.get(occupation).copied()
    }
}

fn fill(states: &mut Vec<Vec<usize>>, current: &mut Vec<usize>, mode: usize, left: usize) {
    if mode == current.len() - 1 {
        current[mode] = left;
        states.push(current.clone());
        current[mode] = 0;
        return;
    }
    for k in (0..=left).rev() {
        current[mode] = k;
        fill(states, current, mode + 1, left - k);
    }
    current[mode] = 0;
}

/// Factorial as a float, exact for the small arguments used here.
pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Permanent of a square complex matrix (Ryser's formula, Gray-code order).
pub fn permanent(a: &CMat) -> C64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "permanent needs a square matrix");
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    assert!(n <= 24, "permanent limited to 24x24");
    let mut sums = vec![C64::new(0.0, 0.0); n];
    let mut total = C64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for k in 1..(1u64 << n) {
        let next = k ^ (k >> 1);
        let changed = next ^ gray;
        let j = changed.trailing_zeros() as usize;
        if next & changed != 0 {
            for (i, s) in sums.iter_mut().enumerate() {
                *s += a[[i, j]];
            }
        } else {
            for (i, s) in sums.iter_mut().enumerate() {
                *s -= a[[i, j]];
            }
        }
        gray = next;
        let prod: C64 = sums.iter().product();
        if (n as u32 - next.count_ones()) % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}

/// Expands an occupation vector into its list of occupied mode indices.
pub fn occupied_modes(occupation: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    for (mode, &n) in occupation.iter().enumerate() {
        for _ in 0..n {
            out.push(mode);
        }
    }
    out
}

/// Lifts a mode unitary to the `photons`-photon Fock space.
///
/// Entry (out, in) is the permanent of the submatrix with rows repeated by
/// the output occupation and columns by the input occupation, normalised by
/// the square roots of the occupation factorials.
pub fn lift_unitary(u: &CMat, basis: &FockBasis) -> Result<CMat> {
    if u.nrows() != basis.modes || u.ncols() != basis.modes {
        return Err(Error::InvalidInput(format!(
            "unitary is {}x{} but the basis has {} modes",
            u.nrows(),
            u.ncols(),
            basis.modes
        )));
    }
    let dim = basis.len();
    let n = basis.photons;
    let mut phi = CMat::zeros((dim, dim));
    let mode_lists: Vec<Vec<usize>> = basis.states().iter().map(|s| occupied_modes(s)).collect();
    let norms: Vec<f64> = basis
        .states()
        .iter()
        .map(|s| s.iter().map(|&k| factorial(k)).product::<f64>().sqrt())
        .collect();
    let mut sub = CMat::zeros((n, n));
    for (row, rows) in mode_lists.iter().enumerate() {
        for (col, cols) in mode_lists.iter().enumerate() {
            for (i, &ri) in rows.iter().enumerate() {
                for (j, &cj) in cols.iter().enumerate() {
                    sub[[i, j]] = u[[ri, cj]];
                }
            }
            phi[[row, col]] = permanent(&sub) / (norms[row] * norms[col]);
        }
    }
    Ok(phi)
}

/// Directional derivative of `lift_unitary` at `u` along `du`.
///
/// The permanent is multilinear in the submatrix entries, so each lifted
/// entry differentiates to a sum of permanental minors weighted by the
/// matching entries of `du`; repeated rows or columns contribute once per
/// appearance.
pub fn lift_derivative(u: &CMat, du: &CMat, basis: &FockBasis) -> Result<CMat> {
    if u.dim() != du.dim() {
        return Err(Error::InvalidInput("matrix and derivative shapes differ".into()));
    }
    if u.nrows() != basis.modes {
        return Err(Error::InvalidInput(format!(
            "unitary is {}x{} but the basis has {} modes",
            u.nrows(),
            u.ncols(),
            basis.modes
        )));
    }
    let dim = basis.len();
    let n = basis.photons;
    let mut dphi = CMat::zeros((dim, dim));
    let mode_lists: Vec<Vec<usize>> = basis.states().iter().map(|s| occupied_modes(s)).collect();
    let norms: Vec<f64> = basis
        .states()
        .iter()
        .map(|s| s.iter().map(|&k| factorial(k)).product::<f64>().sqrt())
        .collect();
    let mut sub = CMat::zeros((n, n));
    let mut minor = CMat::zeros((n.max(1) - 1, n.max(1) - 1));
    for (row, rows) in mode_lists.iter().enumerate() {
        for (col, cols) in mode_lists.iter().enumerate() {
            for (i, &ri) in rows.iter().enumerate() {
                for (j, &cj) in cols.iter().enumerate() {
                    sub[[i, j]] = u[[ri, cj]];
                }
            }
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..n {
                for c in 0..n {
                    let weight = if n == 1 {
                        C64::new(1.0, 0.0)
                    } else {
                        for (mi, i) in (0..n).filter(|&i| i != r).enumerate() {
                            for (mj, j) in (0..n).filter(|&j| j != c).enumerate() {
                                minor[[mi, mj]] = sub[[i, j]];
                            }
                        }
                        permanent(&minor)
                    };
                    acc += weight * du[[rows[r], cols[c]]];
                }
            }
            dphi[[row, col]] = acc / (norms[row] * norms[col]);
        }
    }
    Ok(dphi)
}

/// Mixed state on a Fock basis, stored as a dense Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub mat: CMat,
}

impl DensityMatrix {
    /// Rank-one density matrix |ψ⟩⟨ψ| (the vector need not be normalised).
    pub fn from_pure(psi: &CVec) -> Self {
        let d = psi.len();
        let mut mat = CMat::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                mat[[i, j]] = psi[i] * psi[j].conj();
            }
        }
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[[i, i]].re).sum()
    }

    /// `U ρ U†` for an operator already lifted to the Fock space.
    pub fn conjugated_by(&self, op: &CMat) -> Self {
        Self { mat: op.dot(&self.mat).dot(&dagger(op)) }
    }

    /// Scales the matrix so its trace becomes one; errors on (near-)zero trace.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t <= 1e-300 {
            return Err(Error::Numerical("cannot normalise a zero-trace state".into()));
        }
        Ok(Self { mat: self.mat.mapv(|z| z / t) })
    }

    /// Projects onto a subset of basis indices without renormalising.
    pub fn projected(&self, keep: &[usize]) -> Self {
        let d = self.dim();
        let mut mat = CMat::zeros((d, d));
        for &i in keep {
            for &j in keep {
                mat[[i, j]] = self.mat[[i, j]];
            }
        }
        Self { mat }
    }

    /// Diagonal populations (real parts of the diagonal).
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[[i, i]].re).collect()
    }
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²` between two (possibly unnormalised)
/// positive semidefinite matrices.
pub fn uhlmann_fidelity(rho: &CMat, sigma: &CMat) -> Result<f64> {
    let sr = sqrt_psd(rho)?;
    let inner = sr.dot(sigma).dot(&sr);
    let root = sqrt_psd(&inner)?;
    let tr: f64 = (0..root.nrows()).map(|i| root[[i, i]].re).sum();
    Ok(tr * tr)
}

/// Fidelity `⟨ψ|ρ|ψ⟩` against a pure target, matching the Uhlmann value.
pub fn fidelity_to_pure(rho: &CMat, psi: &CVec) -> f64 {
    let d = psi.len();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += psi[i].conj() * rho[[i, j]] * psi[j];
        }
    }
    acc.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_unitary_seeded, unitarity_error};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1};

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        let mut items: Vec<usize> = (0..n).collect();
        let mut out = Vec::new();
        heap(&mut items, n, &mut out);
        out
    }

    fn heap(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k {
            heap(items, k - 1, out);
            if k % 2 == 0 {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }

    /// Independent lift: literal double sum over photon permutations in the
    /// n-fold tensor product of the mode space.
    fn tensor_lift_oracle(u: &CMat, basis: &FockBasis) -> CMat {
        let n = basis.photons;
        let dim = basis.len();
        let perms = permutations(n);
        let mut phi = CMat::zeros((dim, dim));
        for (row, occ_out) in basis.states().iter().enumerate() {
            let p_out = occupied_modes(occ_out);
            let norm_out =
                (factorial(n) * occ_out.iter().map(|&k| factorial(k)).product::<f64>()).sqrt();
            for (col, occ_in) in basis.states().iter().enumerate() {
                let p_in = occupied_modes(occ_in);
                let norm_in =
                    (factorial(n) * occ_in.iter().map(|&k| factorial(k)).product::<f64>()).sqrt();
                let mut acc = C64::new(0.0, 0.0);
                for tau in &perms {
                    for sigma in &perms {
                        let mut term = C64::new(1.0, 0.0);
                        for i in 0..n {
                            term *= u[[p_out[tau[i]], p_in[sigma[i]]]];
                        }
                        acc += term;
                    }
                }
                phi[[row, col]] = acc / (norm_out * norm_in);
            }
        }
        phi
    }

    #[test]
    fn basis_order_is_lexicographic_descending() {
        let b = FockBasis::new(2, 2).unwrap();
        let want = vec![vec![2, 0], vec![1, 1], vec![0, 2]];
        assert_eq!(b.states(), &want[..], "two-mode two-photon order");
        assert_eq!(b.index_of(&[1, 1]), Some(1));
        assert_eq!(b.index_of(&[3, 0]), None, "wrong photon total must miss");
    }

    #[test]
    fn basis_sizes_match_binomials() {
        assert_eq!(FockBasis::new(6, 2).unwrap().len(), 21, "C(7,2)");
        assert_eq!(FockBasis::new(4, 3).unwrap().len(), 20, "C(6,3)");
        assert_eq!(FockBasis::new(5, 0).unwrap().len(), 1, "vacuum only");
        assert_eq!(dimension(8, 3), 120, "C(10,3)");
    }

    #[test]
    fn basis_rejects_zero_modes() {
        assert!(FockBasis::new(0, 2).is_err(), "zero modes must be rejected");
    }

    #[test]
    fn permanent_matches_small_formulas() {
        let a = array![
            [C64::new(1.0, 2.0), C64::new(0.5, -1.0)],
            [C64::new(-2.0, 0.3), C64::new(0.0, 1.0)]
        ];
        let want = a[[0, 0]] * a[[1, 1]] + a[[0, 1]] * a[[1, 0]];
        assert!((permanent(&a) - want).norm() < 1e-14, "2x2 permanent is ad+bc");

        let ones = CMat::from_elem((4, 4), C64::new(1.0, 0.0));
        assert!((permanent(&ones) - C64::new(24.0, 0.0)).norm() < 1e-12, "per(ones(4)) = 4!");

        let id = crate::linalg::identity(5);
        assert!((permanent(&id) - C64::new(1.0, 0.0)).norm() < 1e-14, "per(I) = 1");

        let empty = CMat::zeros((0, 0));
        assert_eq!(permanent(&empty), C64::new(1.0, 0.0), "per of empty matrix is 1");
    }

    #[test]
    fn permanent_three_by_three_expansion() {
        let a = haar_unitary_seeded(3, 11);
        // Explicit 6-term expansion.
        let mut want = C64::new(0.0, 0.0);
        for p in permutations(3) {
            want += a[[0, p[0]]] * a[[1, p[1]]] * a[[2, p[2]]];
        }
        assert!((permanent(&a) - want).norm() < 1e-13, "3x3 permanent expansion");
    }

    #[test]
    fn lift_matches_tensor_oracle() {
        for (modes, photons, seed) in [(2usize, 2usize, 1u64), (3, 2, 2), (2, 3, 3), (4, 2, 4)] {
            let u = haar_unitary_seeded(modes, seed);
            let basis = FockBasis::new(modes, photons).unwrap();
            let phi = lift_unitary(&u, &basis).unwrap();
            let oracle = tensor_lift_oracle(&u, &basis);
            let err = (&phi - &oracle).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(
                err < 1e-12,
                "lift mismatch {err:.3e} for {modes} modes, {photons} photons"
            );
            assert!(
                unitarity_error(&phi) < 1e-10,
                "lift of a unitary must stay unitary"
            );
        }
    }

    #[test]
    fn balanced_splitter_cancels_coincidences() {
        let inv = 1.0 / 2.0_f64.sqrt();
        let b = array![
            [C64::new(inv, 0.0), C64::new(0.0, inv)],
            [C64::new(0.0, inv), C64::new(inv, 0.0)]
        ];
        let basis = FockBasis::new(2, 2).unwrap();
        let phi = lift_unitary(&b, &basis).unwrap();
        let one_one = basis.index_of(&[1, 1]).unwrap();
        let two_zero = basis.index_of(&[2, 0]).unwrap();
        let zero_two = basis.index_of(&[0, 2]).unwrap();
        assert!(
            phi[[one_one, one_one]].norm() < 1e-14,
            "balanced splitter sends (1,1) fully to bunched outputs"
        );
        assert_abs_diff_eq!(phi[[two_zero, one_one]].norm_sqr(), 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(phi[[zero_two, one_one]].norm_sqr(), 0.5, epsilon = 1e-13);
    }

    #[test]
    fn lift_is_multiplicative() {
        let basis = FockBasis::new(3, 2).unwrap();
        let a = haar_unitary_seeded(3, 21);
        let b = haar_unitary_seeded(3, 22);
        let lhs = lift_unitary(&a.dot(&b), &basis).unwrap();
        let rhs = lift_unitary(&a, &basis).unwrap().dot(&lift_unitary(&b, &basis).unwrap());
        let err = (&lhs - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-11, "lift must be a homomorphism, error {err:.3e}");
    }

    #[test]
    fn uhlmann_agrees_with_pure_overlap() {
        let d = 4;
        let u = haar_unitary_seeded(d, 31);
        let psi: Array1<C64> = u.column(0).to_owned();
        let chi: Array1<C64> = {
            let v = haar_unitary_seeded(d, 32);
            v.column(0).to_owned()
        };
        let rho = DensityMatrix::from_pure(&psi);
        let sigma = DensityMatrix::from_pure(&chi);
        let overlap: C64 = (0..d).map(|i| psi[i].conj() * chi[i]).sum();
        let f = uhlmann_fidelity(&rho.mat, &sigma.mat).unwrap();
        assert_abs_diff_eq!(f, overlap.norm_sqr(), epsilon = 1e-10);
        assert_abs_diff_eq!(
            uhlmann_fidelity(&rho.mat, &rho.mat).unwrap(),
            1.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(fidelity_to_pure(&sigma.mat, &psi), overlap.norm_sqr(), epsilon = 1e-12);
    }

    #[test]
    fn uhlmann_on_commuting_mixtures() {
        // Diagonal states: F = (Σ √(p_i q_i))².
        let p = [0.5, 0.3, 0.2];
        let q = [0.1, 0.6, 0.3];
        let mut rho = CMat::zeros((3, 3));
        let mut sigma = CMat::zeros((3, 3));
        for i in 0..3 {
            rho[[i, i]] = C64::new(p[i], 0.0);
            sigma[[i, i]] = C64::new(q[i], 0.0);
        }
        let want: f64 = p
            .iter()
            .zip(q.iter())
            .map(|(&a, &b)| (a * b).sqrt())
            .sum::<f64>()
            .powi(2);
        assert_abs_diff_eq!(uhlmann_fidelity(&rho, &sigma).unwrap(), want, epsilon = 1e-10);
    }

    #[test]
    fn density_matrix_projection_tracks_trace() {
        let psi = Array1::from_vec(vec![
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.8),
            C64::new(0.0, 0.0),
        ]);
        let rho = DensityMatrix::from_pure(&psi);
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-14);
        let proj = rho.projected(&[0]);
        assert_abs_diff_eq!(proj.trace(), 0.36, epsilon = 1e-14);
        let renorm = proj.normalized().unwrap();
        assert_abs_diff_eq!(renorm.trace(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn lift_derivative_matches_finite_differences() {
        let basis = FockBasis::new(4, 2).unwrap();
        let u = haar_unitary_seeded(4, 91);
        // An arbitrary (non-unitary) direction exercises every minor term.
        let v = haar_unitary_seeded(4, 92);
        let w = haar_unitary_seeded(4, 93);
        let du = &v + &w.mapv(|z| z * C64::new(0.3, 0.7));
        let analytic = lift_derivative(&u, &du, &basis).unwrap();
        let h = 1e-6;
        let plus = lift_unitary(&(&u + &du.mapv(|z| z * h)), &basis).unwrap();
        let minus = lift_unitary(&(&u - &du.mapv(|z| z * h)), &basis).unwrap();
        let fd = (&plus - &minus).mapv(|z| z / (2.0 * h));
        let err = (&analytic - &fd).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "lift derivative deviates from finite differences by {err:.2e}");
    }
}
