//! Coincidence-time filtering of sorted two-photon outputs.
//!
//! The outgoing state of an emitter network attaches a spectral amplitude to
//! every detection pattern; transforming each attachment to the time domain
//! gives the joint distribution of the two detection times at that outcome.
//! Thresholding the distribution of the input a detector outcome is assigned
//! to yields a per-outcome acceptance mask, and gating on the masks trades
//! efficiency for sorting fidelity.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::engine::{pattern_pair, ExtendedState};
use crate::nonlinear::{to_time_domain, TimeGrid};
use crate::tasks::OutcomeAssignment;
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Joint probability density of the two detection times at one outcome.
#[derive(Debug, Clone)]
pub struct TwoTimeDistribution {
    /// Detector mode pair (i ≤ j).
    pub outcome: (usize, usize),
    pub grid: TimeGrid,
    /// |ψ̃(t₁, t₂)|²; integrates (with Δt²) to the outcome population.
    pub values: Array2<f64>,
}

impl TwoTimeDistribution {
    /// Total probability mass, Σ values·Δt².
    pub fn integral(&self) -> f64 {
        let w = self.grid.spacing * self.grid.spacing;
        self.values.iter().sum::<f64>() * w
    }

    /// Mass inside a boolean region.
    pub fn masked_integral(&self, keep: &Array2<bool>) -> f64 {
        let w = self.grid.spacing * self.grid.spacing;
        self.values.iter().zip(keep.iter()).filter(|(_, &k)| k).map(|(v, _)| v).sum::<f64>() * w
    }
}

/// Acceptance region for one detector outcome.
#[derive(Debug, Clone)]
pub struct FilterMask {
    pub outcome: (usize, usize),
    pub keep: Array2<bool>,
    /// Threshold fraction of the peak density.
    pub fraction: f64,
}

/// Filtered figures of merit of a sorting task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilteredMetrics {
    #[serde(rename = "F")]
    pub fidelity: f64,
    /// Ensemble efficiency, the mean of `eta_per_input`.
    pub eta: f64,
    /// In-mask probability conditioned on each input separately.
    pub eta_per_input: Vec<f64>,
}

/// One row of a threshold scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanPoint {
    pub fraction: f64,
    /// Maximal mask extent along (t₁+t₂)/√2.
    pub window: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub eta: f64,
    pub eta_per_input: Vec<f64>,
}

/// Transforms every pattern's attachment to the time domain. The integrals
/// sum to the state norm because the transform is unitary.
pub fn two_time_distributions(output: &ExtendedState) -> Result<Vec<TwoTimeDistribution>> {
    output
        .basis
        .states()
        .iter()
        .zip(output.parts.iter())
        .map(|(occ, part)| {
            let (psi_t, grid) = to_time_domain(&output.grid, part)?;
            Ok(TwoTimeDistribution {
                outcome: pattern_pair(occ),
                grid,
                values: psi_t.mapv(|z| z.norm_sqr()),
            })
        })
        .collect()
}

fn find_distribution<'a>(
    dists: &'a [TwoTimeDistribution],
    outcome: (usize, usize),
) -> Result<&'a TwoTimeDistribution> {
    dists
        .iter()
        .find(|d| d.outcome == outcome)
        .ok_or_else(|| Error::InvalidInput(format!("no distribution at outcome {outcome:?}")))
}

/// Builds one mask per assigned outcome by thresholding the distribution the
/// assigned input produces there: keep(t₁,t₂) ⇔ P(t₁,t₂) ≥ f·max(P).
///
/// `per_input` holds the distributions of every task input, in task order.
pub fn build_masks(
    per_input: &[Vec<TwoTimeDistribution>],
    assignment: &OutcomeAssignment,
    fraction: f64,
) -> Result<Vec<FilterMask>> {
    if !(0.0..1.0).contains(&fraction) || fraction <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "threshold fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if per_input.len() != assignment.per_state.len() {
        return Err(Error::InvalidInput(format!(
            "{} input distributions for {} assigned states",
            per_input.len(),
            assignment.per_state.len()
        )));
    }
    let mut masks = Vec::new();
    for (state, outcomes) in assignment.per_state.iter().enumerate() {
        for &outcome in outcomes {
            let dist = find_distribution(&per_input[state], outcome)?;
            let peak = dist.values.iter().cloned().fold(0.0, f64::max);
            let threshold = fraction * peak;
            masks.push(FilterMask {
                outcome,
                keep: dist.values.mapv(|v| v >= threshold),
                fraction,
            });
        }
    }
    Ok(masks)
}

/// Which Bell state an outcome is assigned to, if any.
fn assigned_state(assignment: &OutcomeAssignment, outcome: (usize, usize)) -> Option<usize> {
    assignment.per_state.iter().position(|outs| outs.contains(&outcome))
}

/// Gated efficiency and sorting fidelity.
///
/// η is the mean probability that an input's photons land inside any
/// assigned outcome's mask; F is the in-mask mass that lands at an outcome
/// assigned to the input that produced it, over all in-mask mass.
pub fn filtered_metrics(
    per_input: &[Vec<TwoTimeDistribution>],
    assignment: &OutcomeAssignment,
    masks: &[FilterMask],
) -> Result<FilteredMetrics> {
    for outcomes in &assignment.per_state {
        for &o in outcomes {
            if !masks.iter().any(|m| m.outcome == o) {
                return Err(Error::InvalidInput(format!(
                    "assigned outcome {o:?} has no filter mask"
                )));
            }
        }
    }
    let inputs = per_input.len() as f64;
    let mut any_mass = 0.0;
    let mut correct_mass = 0.0;
    let mut eta_per_input = vec![0.0; per_input.len()];
    for (k, dists) in per_input.iter().enumerate() {
        for mask in masks {
            let Some(owner) = assigned_state(assignment, mask.outcome) else { continue };
            let mass = find_distribution(dists, mask.outcome)?.masked_integral(&mask.keep);
            any_mass += mass;
            eta_per_input[k] += mass;
            if owner == k {
                correct_mass += mass;
            }
        }
    }
    if any_mass <= 1e-12 {
        return Err(Error::Numerical(
            "filter keeps no probability mass at any assigned outcome".into(),
        ));
    }
    Ok(FilteredMetrics {
        fidelity: correct_mass / any_mass,
        eta: any_mass / inputs,
        eta_per_input,
    })
}

/// Extent of a mask along the arrival-sum axis (t₁+t₂)/√2, counting the
/// full footprint of each kept cell.
pub fn mask_window(mask: &FilterMask, grid: &TimeGrid) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for ((a, b), &kept) in mask.keep.indexed_iter() {
        if kept {
            let s = (grid.time(a) + grid.time(b)) / std::f64::consts::SQRT_2;
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    if lo > hi {
        return 0.0;
    }
    // A Δt×Δt cell projects onto the diagonal with width √2·Δt.
    hi - lo + std::f64::consts::SQRT_2 * grid.spacing
}

/// Sweeps the threshold fraction and reports (f, window, F, η) per value.
pub fn filter_scan(
    per_input: &[Vec<TwoTimeDistribution>],
    assignment: &OutcomeAssignment,
    fractions: &[f64],
) -> Result<Vec<ScanPoint>> {
    let point = |&f: &f64| -> Result<ScanPoint> {
        let masks = build_masks(per_input, assignment, f)?;
        let metrics = filtered_metrics(per_input, assignment, &masks)?;
        let grid = &per_input[0][0].grid;
        let window =
            masks.iter().map(|m| mask_window(m, grid)).fold(0.0, f64::max);
        Ok(ScanPoint {
            fraction: f,
            window,
            fidelity: metrics.fidelity,
            eta: metrics.eta,
            eta_per_input: metrics.eta_per_input,
        })
    };
    #[cfg(feature = "parallel")]
    let points = fractions.par_iter().map(point).collect::<Result<Vec<_>>>()?;
    #[cfg(not(feature = "parallel"))]
    let points = fractions.iter().map(point).collect::<Result<Vec<_>>>()?;
    Ok(points)
}
