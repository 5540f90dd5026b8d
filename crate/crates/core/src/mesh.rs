//! Mach-Zehnder mesh parametrisation of mode unitaries.
//!
//! A single interferometer on neighbouring modes (m, m+1) implements
//!
//! ```text
//! T(θ, φ) = i·e^{iθ} · [ e^{iφ}·sinθ   cosθ  ]
//!                      [ e^{iφ}·cosθ  −sinθ  ]
//! ```
//!
//! so θ = π/2 is the bar state (T(π/2, π) is exactly the identity) and θ = 0
//! is the cross state. Any N-mode unitary factors into a rectangular
//! brick-wall of N·(N−1)/2 such blocks plus one output phase per mode; this
//! module computes that factorisation and its inverse.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::linalg::{unitarity_error, C64, CMat};
use crate::{Error, Result};

/// One interferometer placement inside the rectangular mesh.
///
/// `mode` is the 1-based index of the upper arm, so the block couples modes
/// (mode, mode+1); `column` is the 1-based time slot, earliest first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub column: usize,
    pub mode: usize,
    pub theta: f64,
    pub phi: f64,
}

/// Rectangular mesh: placements plus one output phase (radians) per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshPlan {
    #[serde(rename = "N")]
    pub modes: usize,
    pub placements: Vec<Placement>,
    pub delta: Vec<f64>,
}

/// Interferometer angles of the bar (straight-through) routing state.
pub const BAR: (f64, f64) = (FRAC_PI_2, PI);
/// Interferometer angles of the cross (swap) routing state.
pub const CROSS: (f64, f64) = (0.0, 0.0);

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x % TAU;
    if y < 0.0 {
        y += TAU;
    }
    if y >= TAU {
        y = 0.0;
    }
    y
}

/// The 2×2 interferometer matrix T(θ, φ).
pub fn mzi(theta: f64, phi: f64) -> CMat {
    // The bar setting is contractually the exact identity; rounding in the
    // phase factors would otherwise leave ~1e-16 imaginary residue.
    if theta == BAR.0 && phi == BAR.1 {
        return crate::linalg::identity(2);
    }
    let (s, c) = theta.sin_cos();
    let front = C64::new(0.0, 1.0) * C64::from_polar(1.0, theta);
    let ph = C64::from_polar(1.0, phi);
    let mut t = CMat::zeros((2, 2));
    t[[0, 0]] = front * ph * s;
    t[[0, 1]] = front * c;
    t[[1, 0]] = front * ph * c;
    t[[1, 1]] = -front * s;
    t
}

/// Embeds a 2×2 block on modes (mode, mode+1), 1-based, into an N×N identity.
pub fn embed(block: &CMat, modes: usize, mode: usize) -> CMat {
    assert!(mode >= 1 && mode < modes, "arm pair ({}, {}) out of range", mode, mode + 1);
    let mut m = crate::linalg::identity(modes);
    let i = mode - 1;
    m[[i, i]] = block[[0, 0]];
    m[[i, i + 1]] = block[[0, 1]];
    m[[i + 1, i]] = block[[1, 0]];
    m[[i + 1, i + 1]] = block[[1, 1]];
    m
}

const DEGENERATE: f64 = 1e-13;

/// Angles of the right-multiplied block that nulls `target` against its right
/// neighbour `next` (entries U[r, m] and U[r, m+1]).
fn right_null_angles(target: C64, next: C64) -> (f64, f64) {
    if target.norm() <= DEGENERATE {
        (FRAC_PI_2, PI)
    } else if next.norm() <= DEGENERATE {
        (0.0, 0.0)
    } else {
        let theta = next.norm().atan2(target.norm());
        let phi = target.arg() - (-next).arg();
        (theta, phi)
    }
}

/// Angles of the left-multiplied block that nulls `target` against the entry
/// `above` it (entries U[r, c] and U[r−1, c]).
fn left_null_angles(above: C64, target: C64) -> (f64, f64) {
    if target.norm() <= DEGENERATE {
        (FRAC_PI_2, PI)
    } else if above.norm() <= DEGENERATE {
        (0.0, 0.0)
    } else {
        let theta = above.norm().atan2(target.norm());
        let phi = target.arg() - above.arg();
        (theta, phi)
    }
}

/// In place U ← U·T†(θ, φ) on columns (mode, mode+1), 1-based.
fn apply_tdag_right(u: &mut CMat, mode: usize, theta: f64, phi: f64) {
    let (s, c) = theta.sin_cos();
    let front = -C64::new(0.0, 1.0) * C64::from_polar(1.0, -theta);
    let ph = C64::from_polar(1.0, -phi);
    let t00 = front * ph * s;
    let t01 = front * ph * c;
    let t10 = front * c;
    let t11 = -front * s;
    let (a, b) = (mode - 1, mode);
    for r in 0..u.nrows() {
        let ua = u[[r, a]];
        let ub = u[[r, b]];
        u[[r, a]] = ua * t00 + ub * t10;
        u[[r, b]] = ua * t01 + ub * t11;
    }
}

/// In place U ← T(θ, φ)·U on rows (mode, mode+1), 1-based.
fn apply_t_left(u: &mut CMat, mode: usize, theta: f64, phi: f64) {
    if theta == BAR.0 && phi == BAR.1 {
        return;
    }
    let (s, c) = theta.sin_cos();
    let front = C64::new(0.0, 1.0) * C64::from_polar(1.0, theta);
    let ph = C64::from_polar(1.0, phi);
    let t00 = front * ph * s;
    let t01 = front * c;
    let t10 = front * ph * c;
    let t11 = -front * s;
    let (a, b) = (mode - 1, mode);
    for col in 0..u.ncols() {
        let ua = u[[a, col]];
        let ub = u[[b, col]];
        u[[a, col]] = t00 * ua + t01 * ub;
        u[[b, col]] = t10 * ua + t11 * ub;
    }
}

/// Factors a unitary into a rectangular interferometer mesh.
///
/// The result reconstructs the input to numerical precision and always fills
/// the brick-wall pattern: N·(N−1)/2 placements in at most N columns, where
/// odd columns hold blocks on odd upper arms and even columns on even ones.
pub fn decompose(u: &CMat) -> Result<MeshPlan> {
    let n = u.nrows();
    if n == 0 || u.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "decompose needs a square non-empty matrix, got {}x{}",
            n,
            u.ncols()
        )));
    }
    let uerr = unitarity_error(u);
    if uerr > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "matrix is not unitary (deviation {uerr:.3e})"
        )));
    }

    let mut work = u.clone();
    // (mode, theta, phi) lists in the order the rotations were applied.
    let mut right: Vec<(usize, f64, f64)> = Vec::new();
    let mut left: Vec<(usize, f64, f64)> = Vec::new();

    for i in 1..n {
        if i % 2 == 1 {
            for j in 0..i {
                let r = n - j; // 1-based row of the entry to null
                let m = i - j; // 1-based column of the entry, also the arm pair
                let target = work[[r - 1, m - 1]];
                let next = work[[r - 1, m]];
                let (theta, phi) = right_null_angles(target, next);
                apply_tdag_right(&mut work, m, theta, phi);
                right.push((m, theta, phi));
            }
        } else {
            for j in 1..=i {
                let r = n + j - i; // 1-based row of the entry to null
                let c = j; // 1-based column
                let above = work[[r - 2, c - 1]];
                let target = work[[r - 1, c - 1]];
                let (theta, phi) = left_null_angles(above, target);
                apply_t_left(&mut work, r - 1, theta, phi);
                left.push((r - 1, theta, phi));
            }
        }
    }

    let mut off: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                off = off.max(work[[r, c]].norm());
            }
        }
    }
    if off > 1e-9 {
        return Err(Error::Numerical(format!(
            "nulling left an off-diagonal residue of {off:.3e}"
        )));
    }

    let mut diag: Vec<C64> = (0..n).map(|i| work[[i, i]]).collect();

    // Move the diagonal to the far left: T†(θ,φ)·D = D'·T(θ,φ'). Blocks that
    // were inserted as exact bar placements stay exact identities, keeping
    // e.g. decompose(I) free of spurious phases.
    let mut ordered: Vec<(usize, f64, f64)> = right;
    for &(mode, theta, phi) in left.iter().rev() {
        let dm = diag[mode - 1];
        let dm1 = diag[mode];
        if (theta - FRAC_PI_2).abs() < 1e-15 {
            diag[mode - 1] = -C64::from_polar(1.0, -phi) * dm;
            ordered.push((mode, FRAC_PI_2, PI));
        } else {
            let phi_new = (dm * dm1.conj()).arg();
            let d1 = -C64::from_polar(1.0, -2.0 * theta) * dm1;
            let d0 = d1 * C64::from_polar(1.0, -phi);
            diag[mode - 1] = d0;
            diag[mode] = d1;
            ordered.push((mode, theta, phi_new));
        }
    }

    // Greedy earliest-slot packing in application order fills the brick-wall.
    let mut last_col = vec![0usize; n + 2];
    let mut placements = Vec::with_capacity(ordered.len());
    for (mode, theta, phi) in ordered {
        let col = 1 + last_col[mode].max(last_col[mode + 1]);
        last_col[mode] = col;
        last_col[mode + 1] = col;
        placements.push(Placement {
            column: col,
            mode,
            theta: wrap_angle(theta),
            phi: wrap_angle(phi),
        });
    }
    placements.sort_by_key(|p| (p.column, p.mode));

    let delta = diag.iter().map(|d| wrap_angle(d.arg())).collect();
    Ok(MeshPlan { modes: n, placements, delta })
}

/// Rebuilds the mode unitary from a mesh plan (columns applied in order,
/// then the output phases).
pub fn reconstruct(plan: &MeshPlan) -> Result<CMat> {
    let n = plan.modes;
    if plan.delta.len() != n {
        return Err(Error::InvalidInput(format!(
            "plan has {} output phases for {} modes",
            plan.delta.len(),
            n
        )));
    }
    let max_col = plan.placements.iter().map(|p| p.column).max().unwrap_or(0);
    let mut u = crate::linalg::identity(n);
    for col in 1..=max_col {
        for p in plan.placements.iter().filter(|p| p.column == col) {
            if p.mode == 0 || p.mode >= n {
                return Err(Error::InvalidInput(format!(
                    "placement arm {} out of range for {} modes",
                    p.mode, n
                )));
            }
            apply_t_left(&mut u, p.mode, p.theta, p.phi);
        }
    }
    for (i, &d) in plan.delta.iter().enumerate() {
        let ph = C64::from_polar(1.0, d);
        for c in 0..n {
            u[[i, c]] *= ph;
        }
    }
    Ok(u)
}
