//! Dense complex linear algebra helpers shared across the crate.
//!
//! Everything here stays in pure Rust on top of `ndarray` so the same code
//! runs natively and under WebAssembly: the Hermitian eigensolver is a cyclic
//! Jacobi sweep, which is plenty accurate for the small (≤ ~40 dimensional)
//! matrices the simulator produces.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

/// Complex conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

/// Identity matrix of size `n`.
pub fn identity(n: usize) -> CMat {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

/// Largest entry of `U†U − I`; zero for an exactly unitary matrix.
pub fn unitarity_error(u: &CMat) -> f64 {
    let n = u.ncols();
    let gram = dagger(u).dot(u);
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            err = err.max((gram[[i, j]] - target).norm());
        }
    }
    err
}

fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching unitary of
/// column eigenvectors, so that `A = V · diag(λ) · V†`.
pub fn hermitian_eig(a: &CMat) -> Result<(Array1<f64>, CMat)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidInput(format!(
            "hermitian_eig needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let scale = frobenius(a).max(1.0);
    let herm_err = (a - &dagger(a)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm_err > 1e-8 * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not Hermitian (deviation {herm_err:.3e})"
        )));
    }
    // Work on the exactly Hermitian part to keep rotations well defined.
    let mut m = (a + &dagger(a)).mapv(|z| z * 0.5);
    let mut v = identity(n);
    let tol = 1e-15 * scale;

    for _sweep in 0..100 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[[p, q]].norm());
            }
        }
        if off <= tol {
            let mut pairs: Vec<(f64, usize)> =
                (0..n).map(|i| (m[[i, i]].re, i)).collect();
            pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            let vals = Array1::from_iter(pairs.iter().map(|&(l, _)| l));
            let mut vecs = CMat::zeros((n, n));
            for (new_col, &(_, old_col)) in pairs.iter().enumerate() {
                vecs.column_mut(new_col).assign(&v.column(old_col));
            }
            return Ok((vals, vecs));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = m[[p, q]];
                let g = alpha.norm();
                if g <= tol {
                    continue;
                }
                let phase = alpha / g;
                let app = m[[p, p]].re;
                let aqq = m[[q, q]].re;
                // Real Jacobi angle after rotating the off-diagonal phase away.
                let theta_c = (app - aqq) / (2.0 * g);
                let t = if theta_c >= 0.0 {
                    1.0 / (theta_c + (theta_c * theta_c + 1.0).sqrt())
                } else {
                    -1.0 / (-theta_c + (theta_c * theta_c + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let jpq = C64::new(-s, 0.0);
                let jqp = phase.conj() * s;
                let jqq = phase.conj() * c;
                let cpp = C64::new(c, 0.0);
                // Column update: M ← M·J, V ← V·J.
                for i in 0..n {
                    let mp = m[[i, p]];
                    let mq = m[[i, q]];
                    m[[i, p]] = cpp * mp + jqp * mq;
                    m[[i, q]] = jpq * mp + jqq * mq;
                    let vp = v[[i, p]];
                    let vq = v[[i, q]];
                    v[[i, p]] = cpp * vp + jqp * vq;
                    v[[i, q]] = jpq * vp + jqq * vq;
                }
                // Row update: M ← J†·M.
                for j in 0..n {
                    let mp = m[[p, j]];
                    let mq = m[[q, j]];
                    m[[p, j]] = cpp * mp + jqp.conj() * mq;
                    m[[q, j]] = jpq.conj() * mp + jqq.conj() * mq;
                }
            }
        }
    }
    Err(Error::Numerical(
        "Jacobi eigensolver did not converge within 100 sweeps".into(),
    ))
}

/// Square root of a positive semidefinite Hermitian matrix.
///
/// Eigenvalues in `[-1e-10·scale, 0)` are treated as numerical noise and
/// clipped to zero; anything more negative is rejected.
pub fn sqrt_psd(a: &CMat) -> Result<CMat> {
    let (vals, vecs) = hermitian_eig(a)?;
    let scale = vals.iter().fold(1.0_f64, |m, &l| m.max(l.abs()));
    let mut roots = Array1::<f64>::zeros(vals.len());
    for (i, &l) in vals.iter().enumerate() {
        if l < -1e-10 * scale {
            return Err(Error::Numerical(format!(
                "matrix is not PSD: eigenvalue {l:.3e}"
            )));
        }
        // The square root amplifies rounding noise near zero (1e-16 -> 1e-8),
        // so eigenvalues indistinguishable from zero are flattened outright.
        roots[i] = if l < 1e-13 * scale { 0.0 } else { l.sqrt() };
    }
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let r = C64::new(roots[j], 0.0);
        scaled.column_mut(j).mapv_inplace(|z| z * r);
    }
    Ok(scaled.dot(&dagger(&vecs)))
}

/// Haar-random unitary drawn from `rng` (QR of a complex Ginibre matrix).
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let mut g = CMat::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            g[[i, j]] = C64::new(re, im);
        }
    }
    // Modified Gram-Schmidt; the positive real diagonal of R makes Q Haar.
    let mut q = g;
    for j in 0..n {
        for k in 0..j {
            let proj: C64 = (0..n).map(|i| q[[i, k]].conj() * q[[i, j]]).sum();
            for i in 0..n {
                let sub = proj * q[[i, k]];
                q[[i, j]] -= sub;
            }
        }
        let norm = (0..n).map(|i| q[[i, j]].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            q[[i, j]] /= norm;
        }
    }
    q
}

/// Haar-random unitary from a fixed seed (deterministic across runs).
pub fn haar_unitary_seeded(n: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_unitary(n, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn eig_of_known_two_by_two() {
        let a = array![
            [C64::new(1.0, 0.0), C64::new(0.0, 1.0)],
            [C64::new(0.0, -1.0), C64::new(1.0, 0.0)]
        ];
        let (vals, vecs) = hermitian_eig(&a).unwrap();
        assert_abs_diff_eq!(vals[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 2.0, epsilon = 1e-12);
        assert!(unitarity_error(&vecs) < 1e-12, "eigenvectors must be orthonormal");
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let u = haar_unitary_seeded(12, 7);
        let mut a = CMat::zeros((12, 12));
        for (j, l) in (0..12).map(|j| (j, j as f64 - 3.5)) {
            for r in 0..12 {
                for c in 0..12 {
                    a[[r, c]] += u[[r, j]] * C64::new(l, 0.0) * u[[c, j]].conj();
                }
            }
        }
        let (vals, vecs) = hermitian_eig(&a).unwrap();
        let mut recon = CMat::zeros((12, 12));
        for j in 0..12 {
            for r in 0..12 {
                for c in 0..12 {
                    recon[[r, c]] += vecs[[r, j]] * C64::new(vals[j], 0.0) * vecs[[c, j]].conj();
                }
            }
        }
        let err = (&a - &recon).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "reconstruction error {err:.3e} too large");
        for j in 0..12 {
            assert_abs_diff_eq!(vals[j], j as f64 - 3.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let u = haar_unitary_seeded(6, 3);
        let mut a = CMat::zeros((6, 6));
        for j in 0..6 {
            let l = C64::new((j + 1) as f64 * 0.3, 0.0);
            for r in 0..6 {
                for c in 0..6 {
                    a[[r, c]] += u[[r, j]] * l * u[[c, j]].conj();
                }
            }
        }
        let s = sqrt_psd(&a).unwrap();
        let err = (&s.dot(&s) - &a).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "sqrt squared back with error {err:.3e}");
    }

    #[test]
    fn sqrt_psd_rejects_indefinite() {
        let a = array![
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(-0.5, 0.0)]
        ];
        assert!(sqrt_psd(&a).is_err(), "negative eigenvalue must be rejected");
    }

    #[test]
    fn haar_unitary_is_unitary_and_seeded() {
        let u1 = haar_unitary_seeded(8, 42);
        let u2 = haar_unitary_seeded(8, 42);
        let u3 = haar_unitary_seeded(8, 43);
        assert!(unitarity_error(&u1) < 1e-12, "Haar sample must be unitary");
        assert_eq!(u1, u2, "same seed must give the same unitary");
        assert!(u1 != u3, "different seeds must differ");
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let a = array![
            [C64::new(1.0, 0.0), C64::new(1.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
        ];
        assert!(hermitian_eig(&a).is_err(), "non-Hermitian input must be rejected");
    }
}
