//! Browser bindings: three interactive views on the simulator, each
//! returning a JSON string so the page stays a plain canvas script.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use qpnn_core::distinguishability::{
    input_fidelity, mean_visibility, mean_visibility_analytic, JitterConvention,
};
use qpnn_core::engine::{evaluate, EvalOptions, NetworkSpec, Nonlinearity};
use qpnn_core::mesh::decompose;
use qpnn_core::nonlinear::{
    gaussian_wavepacket, scatter_pair, to_time_domain, transmission, SpectralGrid,
};
use qpnn_core::tasks::{cnot_task, linear_cnot_unitary};

fn reply<T: Serialize>(result: Result<T, String>) -> String {
    match result {
        Ok(value) => serde_json::to_string(&value)
            .unwrap_or_else(|e| format!("{{\"error\":\"serialization: {e}\"}}")),
        Err(message) => serde_json::to_string(&serde_json::json!({ "error": message }))
            .expect("an error string always serializes"),
    }
}

#[derive(Serialize)]
struct VisibilityPoint {
    sigma_j: f64,
    #[serde(rename = "V")]
    visibility: f64,
    #[serde(rename = "V_analytic")]
    analytic: f64,
    #[serde(rename = "F_in")]
    input_fidelity: f64,
}

/// Mean pairwise visibility and input fidelity over a detector-jitter range
/// (FWHM, units of the pulse duration).
#[wasm_bindgen]
pub fn visibility_curve(sigma_j_max: f64, points: usize, samples: usize, seed: u64) -> String {
    reply((|| {
        if !(2..=401).contains(&points) {
            return Err(format!("points must lie in [2, 401], got {points}"));
        }
        if sigma_j_max <= 0.0 {
            return Err("the jitter range must be positive".into());
        }
        let mut curve = Vec::with_capacity(points);
        for i in 0..points {
            let sj = sigma_j_max * i as f64 / (points - 1) as f64;
            let v = mean_visibility(sj, 1.0, JitterConvention::Fwhm, samples, seed)
                .map_err(|e| e.to_string())?;
            curve.push(VisibilityPoint {
                sigma_j: sj,
                visibility: v,
                analytic: mean_visibility_analytic(sj, 1.0, JitterConvention::Fwhm),
                input_fidelity: input_fidelity(v),
            });
        }
        Ok(curve)
    })())
}

#[derive(Serialize)]
struct GatePoint {
    #[serde(rename = "V")]
    visibility: f64,
    #[serde(rename = "F")]
    fidelity: f64,
    eta: f64,
}

/// Post-selected fidelity and efficiency of the fixed six-mode linear CNOT
/// as the source visibility degrades.
#[wasm_bindgen]
pub fn linear_cnot_curve(points: usize) -> String {
    reply((|| {
        if !(2..=201).contains(&points) {
            return Err(format!("points must lie in [2, 201], got {points}"));
        }
        let plan = decompose(&linear_cnot_unitary()).map_err(|e| e.to_string())?;
        let spec =
            NetworkSpec::new(vec![plan], Nonlinearity::None, 0).map_err(|e| e.to_string())?;
        let task = cnot_task(6).map_err(|e| e.to_string())?;
        let mut curve = Vec::with_capacity(points);
        for i in 0..points {
            let v = i as f64 / (points - 1) as f64;
            let opts = EvalOptions { visibility: v, ..Default::default() };
            let report = evaluate(&spec, &task, &opts, None).map_err(|e| e.to_string())?;
            curve.push(GatePoint { visibility: v, fidelity: report.fidelity, eta: report.eta });
        }
        Ok(curve)
    })())
}

#[derive(Serialize)]
struct EmitterResponse {
    /// Time axis, units of the pulse duration.
    t: Vec<f64>,
    /// Input pulse density |ψ̃(t)|².
    pulse: Vec<f64>,
    /// Scattered single-photon density |ã(t)|².
    single: Vec<f64>,
    /// Scattered two-photon joint density |ψ̃(t₁,t₂)|², row-major on `t`.
    joint: Vec<Vec<f64>>,
    /// Frequency axis and single-photon transmission phase arg t(ω).
    omega: Vec<f64>,
    phase: Vec<f64>,
}

fn stride_for(len: usize, keep: usize) -> usize {
    len.div_ceil(keep).max(1)
}

/// Diagonal of the two-photon time density of a product amplitude a⊗a,
/// which is the single-photon time density |ã(t)|².
fn product_time_density(
    grid: &SpectralGrid,
    amp: &[Complex64],
    stride: usize,
) -> Result<Vec<f64>, String> {
    let m = grid.size;
    let mut outer = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            outer[[i, j]] = amp[i] * amp[j];
        }
    }
    let (tilde, _) = to_time_domain(grid, &outer).map_err(|e| e.to_string())?;
    Ok((0..m).step_by(stride).map(|p| tilde[[p, p]].norm()).collect())
}

/// Time-domain response of the chiral emitter to a Gaussian pulse pair:
/// the reshaped single-photon wavepacket and the antibunched joint density.
#[wasm_bindgen]
pub fn emitter_response(sigma_p: f64, tau: f64, delta: f64, grid_size: usize) -> String {
    reply((|| {
        let grid = SpectralGrid::for_pulse(sigma_p, tau, grid_size).map_err(|e| e.to_string())?;
        let m = grid.size;
        let pulse = gaussian_wavepacket(&grid, sigma_p, 0.0);
        let scattered_single: Vec<Complex64> = (0..m)
            .map(|k| transmission(grid.omega(k), delta, tau) * pulse[k])
            .collect();

        let mut pair = Array2::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                pair[[i, j]] = pulse[i] * pulse[j];
            }
        }
        let scattered_pair = scatter_pair(&grid, &pair, delta, tau).map_err(|e| e.to_string())?;
        let (tilde, time_grid) = to_time_domain(&grid, &scattered_pair).map_err(|e| e.to_string())?;

        // Decimate to keep the payload small enough for a canvas redraw.
        let stride = stride_for(m, 128);
        let idx: Vec<usize> = (0..m).step_by(stride).collect();
        let joint = idx
            .iter()
            .map(|&p| idx.iter().map(|&q| tilde[[p, q]].norm_sqr()).collect())
            .collect();
        Ok(EmitterResponse {
            t: idx.iter().map(|&p| time_grid.time(p)).collect(),
            pulse: product_time_density(&grid, pulse.as_slice().unwrap(), stride)?,
            single: product_time_density(&grid, &scattered_single, stride)?,
            joint,
            omega: idx.iter().map(|&k| grid.omega(k)).collect(),
            phase: idx.iter().map(|&k| transmission(grid.omega(k), delta, tau).arg()).collect(),
        })
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visibility_curve_starts_at_one() {
        let json = visibility_curve(3.0, 7, 400, 5);
        let curve: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(curve.as_array().unwrap().len(), 7);
        assert_eq!(curve[0]["V"], 1.0, "zero jitter keeps the photons indistinguishable");
        let last = curve[6]["V"].as_f64().unwrap();
        assert!(last < 0.6, "three pulse widths of jitter must erode visibility, got {last}");
    }

    #[test]
    fn gate_curve_spans_the_known_endpoints() {
        let json = linear_cnot_curve(3);
        let curve: serde_json::Value = serde_json::from_str(&json).unwrap();
        let f = |i: usize| curve[i]["F"].as_f64().unwrap();
        assert!((f(2) - 1.0).abs() < 1e-9, "perfect visibility gives a perfect gate");
        assert!((f(1) - 0.75).abs() < 1e-9, "V = 0.5 drops the gate to 3/4");
        assert!((f(0) - 2.0 / 3.0).abs() < 1e-9, "fully distinguishable photons give 2/3");
    }

    #[test]
    fn emitter_response_shows_photon_correlations_at_resonance() {
        let json = emitter_response(1.0, 1.0, 0.0, 128);
        let resp: serde_json::Value = serde_json::from_str(&json).unwrap();
        let t = resp["t"].as_array().unwrap();
        let joint = resp["joint"].as_array().unwrap();
        let single = resp["single"].as_array().unwrap();
        assert_eq!(t.len(), joint.len(), "joint grid is square on the time axis");
        let dt = t[1].as_f64().unwrap() - t[0].as_f64().unwrap();

        // Scattering is unitary: both the single photon and the pair keep
        // their norm on the grid.
        let single_mass: f64 = single.iter().map(|x| x.as_f64().unwrap()).sum::<f64>() * dt;
        assert!((single_mass - 1.0).abs() < 1e-3, "|t(ω)| = 1 preserves the pulse, got {single_mass}");
        let joint_mass: f64 = joint
            .iter()
            .flat_map(|row| row.as_array().unwrap())
            .map(|x| x.as_f64().unwrap())
            .sum::<f64>()
            * dt
            * dt;
        assert!((joint_mass - 1.0).abs() < 0.01, "pair norm off: {joint_mass}");

        // On the rising edge the equal-time density sits far below the
        // uncorrelated product: the emitter cannot pass both photons at once.
        let early = t.len() / 2 - 2;
        let s = single[early].as_f64().unwrap();
        let j = joint[early][early].as_f64().unwrap();
        assert!(s > 0.05, "probe sits on the pulse edge, single = {s}");
        assert!(j < 0.5 * s * s, "equal-time suppression failed: joint {j} vs product {}", s * s);
    }

    #[test]
    fn invalid_requests_come_back_as_json_errors() {
        for json in [
            visibility_curve(-1.0, 10, 100, 1),
            linear_cnot_curve(1),
            emitter_response(1.0, 0.05, 0.0, 128),
        ] {
            let value: serde_json::Value = serde_json::from_str(&json).unwrap();
            assert!(value["error"].is_string(), "errors surface in-band: {json}");
        }
    }
}
