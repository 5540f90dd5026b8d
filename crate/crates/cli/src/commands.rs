//! The seven subcommands.
//!
//! Each command reads one config file, computes, and writes its artifacts
//! plus a manifest into the output directory. Verification-style commands
//! print a PASS/FAIL verdict; failures surface as exit code 2, bad inputs
//! as 1, and numerical breakdowns as 3.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use qpnn_core::distinguishability::{
    input_fidelity, mean_visibility, mean_visibility_analytic, JitterConvention,
};
use qpnn_core::engine::{
    calibrate_budget, evaluate, extended_from_coeffs, linear_fiber_length, mzi_traversals,
    propagate_low_rank, protocol_steps, switch_traversals, transmissivity, EmitterFamily,
    EvalOptions, EvaluationReport, LossBudget, NetworkSpec, Nonlinearity,
};
use qpnn_core::fock::{lift_unitary, FockBasis};
use qpnn_core::linalg::{identity, unitarity_error, CMat};
use qpnn_core::mesh::{decompose, reconstruct, MeshPlan};
use qpnn_core::nonlinear::{gaussian_wavepacket, SpectralGrid};
use qpnn_core::scheduler::{compile_layers, control_table, simulate_single_photons};
use qpnn_core::tasks::{bsa_task, cnot_task, linear_cnot_unitary, OutcomeAssignment};
use qpnn_core::timegate::{
    build_masks, filter_scan, filtered_metrics, mask_window, two_time_distributions,
    TwoTimeDistribution,
};
use qpnn_core::trainer::{
    best_record, optimize, records_to_jsonl, summary_csv, Parameterization, TaskKind,
    TrainNonlinearity,
};

use crate::config::{BestModel, BudgetSection, BudgetPreset, ExperimentConfig, TaskName};
use crate::store::ResultStore;
use crate::CliError;

/// A complex matrix as two real grids, the on-disk form of a unitary.
#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixFile {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixFile {
    #[cfg(test)]
    pub fn from_matrix(u: &CMat) -> Self {
        let rows = |f: fn(&Complex64) -> f64| {
            u.rows().into_iter().map(|r| r.iter().map(f).collect()).collect()
        };
        Self { re: rows(|z| z.re), im: rows(|z| z.im) }
    }

    pub fn to_matrix(&self) -> Result<CMat, CliError> {
        let n = self.re.len();
        let square = |rows: &[Vec<f64>]| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if n == 0 || !square(&self.re) || !square(&self.im) {
            return Err(CliError::Validation(
                "matrix file must hold square, equally sized re and im grids".into(),
            ));
        }
        let mut u = CMat::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                u[[i, j]] = Complex64::new(self.re[i][j], self.im[i][j]);
            }
        }
        Ok(u)
    }
}

fn frobenius_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Factors the unitary in the config file into a crossing mesh and checks
/// the factorization by rebuilding the matrix.
pub fn cmd_decompose(config_path: &Path, store: &ResultStore) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", config_path.display())))?;
    let file: MatrixFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", config_path.display())))?;
    let u = file.to_matrix()?;
    let residual = unitarity_error(&u);
    if residual > 1e-8 {
        return Err(CliError::Validation(format!(
            "matrix is not unitary: ‖U†U − I‖ = {residual:.3e}"
        )));
    }
    let plan = decompose(&u)?;
    let rebuilt = reconstruct(&plan)?;
    let round_trip = frobenius_diff(&rebuilt, &u);
    store.write_json("plan.json", &plan)?;
    store.write_manifest("decompose", &text, None)?;
    println!(
        "decomposed {}-mode unitary into {} crossings; round-trip error {round_trip:.3e}",
        plan.modes,
        plan.placements.len()
    );
    if round_trip > 1e-9 {
        return Err(CliError::Numerical(format!(
            "reconstruction drifted: ‖rebuilt − U‖_F = {round_trip:.3e}"
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ScheduleVerdict {
    pass: bool,
    frobenius_error: f64,
    modes: usize,
    layers: usize,
    buffer: usize,
    /// Bins between a mode's first and last visit to one layer.
    span: usize,
    /// Total protocol steps L·(span + buffer).
    n_t: usize,
    time_bins: usize,
}

/// Compiles mesh plans into a two-loop control program, then verifies the
/// program by simulating single photons through it.
pub fn cmd_schedule(config_path: &Path, buffer: usize, store: &ResultStore) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", config_path.display())))?;
    // A plan file holds either one layer or a list of layers.
    let plans: Vec<MeshPlan> = match serde_json::from_str::<Vec<MeshPlan>>(&text) {
        Ok(list) => list,
        Err(_) => vec![serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", config_path.display())))?],
    };
    if plans.is_empty() {
        return Err(CliError::Validation("plan file holds no layers".into()));
    }
    let mut expected = identity(plans[0].modes);
    for plan in &plans {
        expected = reconstruct(plan)?.dot(&expected);
    }

    let compiled = compile_layers(&plans, buffer)
        .map_err(|e| CliError::Verification(format!("cannot compile the plan: {e}")));
    let schedule = match compiled {
        Ok(s) => s,
        Err(e) => {
            println!("FAIL: the plan does not compile");
            return Err(e);
        }
    };
    let simulated = simulate_single_photons(&schedule)
        .map_err(|e| CliError::Verification(format!("simulation failed: {e}")))?;
    let fro = frobenius_diff(&simulated, &expected);

    let mut table = csv::Writer::from_writer(Vec::new());
    table
        .write_record(["t", "mzi", "theta_rad", "phi_rad", "switch", "ps_rad", "top", "bottom"])
        .map_err(|e| CliError::Validation(format!("control table: {e}")))?;
    let angle = |a: Option<f64>| a.map(|v| v.to_string()).unwrap_or_default();
    for row in control_table(&schedule) {
        table
            .write_record([
                row.t.to_string(),
                row.mzi,
                angle(row.theta),
                angle(row.phi),
                row.switch,
                angle(row.ps),
                row.top,
                row.bottom,
            ])
            .map_err(|e| CliError::Validation(format!("control table: {e}")))?;
    }
    let bytes = table
        .into_inner()
        .map_err(|e| CliError::Validation(format!("control table: {e}")))?;
    store.write_text(
        "control_table.csv",
        std::str::from_utf8(&bytes).expect("csv output is ASCII"),
    )?;
    store.write_json("schedule.json", &schedule)?;

    let pass = fro < 1e-10;
    let verdict = ScheduleVerdict {
        pass,
        frobenius_error: fro,
        modes: schedule.modes,
        layers: schedule.layers,
        buffer,
        span: schedule.span,
        n_t: protocol_steps(schedule.modes, schedule.layers, buffer),
        time_bins: schedule.steps.len(),
    };
    store.write_json("verification.json", &verdict)?;
    store.write_manifest("schedule", &text, None)?;
    if pass {
        println!(
            "PASS: schedule matches the mesh to {fro:.3e}; span {} bins/layer, {} steps total",
            verdict.span, verdict.n_t
        );
        Ok(())
    } else {
        println!("FAIL: schedule deviates from the mesh by {fro:.3e}");
        Err(CliError::Verification(format!(
            "scheduled interferometer is off by ‖ΔU‖_F = {fro:.3e}"
        )))
    }
}

/// Trains a network over random restarts and stores every trial plus the
/// best model bundle.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    config_text: &str,
    seed_override: Option<u64>,
    store: &ResultStore,
) -> Result<(), CliError> {
    let tc = cfg.train_config(seed_override)?;
    let records = optimize(&tc)?;
    store.write_text("records.jsonl", &records_to_jsonl(&records)?)?;
    store.write_text("summary.csv", &summary_csv(&records))?;

    let mut trajectories = String::from("trial,epoch,cost\n");
    for rec in &records {
        for (epoch, cost) in rec.cost_trajectory.iter().enumerate() {
            let _ = writeln!(trajectories, "{},{},{}", rec.trial, epoch, cost);
        }
    }
    store.write_text("trajectories.csv", &trajectories)?;

    let best = best_record(&records)
        .ok_or_else(|| CliError::Numerical("no trial produced a finite cost".into()))?;
    store.write_json("best_model.json", &BestModel { train: tc.clone(), record: best.clone() })?;
    store.write_manifest("train", config_text, Some(tc.seed))?;
    println!(
        "{} trials × {} epochs: best trial {} reached F = {:.6}, eta = {:.6}",
        tc.trials, tc.epochs, best.trial, best.fidelity, best.eta
    );
    Ok(())
}

/// Restores a trained network (or the fixed linear CNOT) from the config.
fn resolve_network(cfg: &ExperimentConfig) -> Result<(NetworkSpec, TaskResolved), CliError> {
    if let Some(path) = &cfg.model {
        let bundle = BestModel::load(path)?;
        let emitter = matches!(bundle.train.nonlinearity, TrainNonlinearity::Emitter);
        let par = Parameterization::new(bundle.train.modes, bundle.train.layers, emitter)?;
        let buffer = cfg.buffer.unwrap_or(bundle.train.buffer);
        let spec = par.network(&bundle.record.params, &bundle.train.nonlinearity, buffer)?;
        let task = match bundle.train.task {
            TaskKind::Cnot => cnot_task(bundle.train.modes)?,
            TaskKind::Bsa => {
                let assignment = bundle.record.assignment.as_ref().ok_or_else(|| {
                    CliError::Validation("model bundle is missing its outcome assignment".into())
                })?;
                bsa_task(bundle.train.modes, assignment)?
            }
        };
        return Ok((spec, TaskResolved { task, bundle: Some(bundle) }));
    }
    match cfg.task {
        Some(TaskName::LinearCnot) | None => {
            let plan = decompose(&linear_cnot_unitary())?;
            let spec = NetworkSpec::new(vec![plan], Nonlinearity::None, cfg.buffer.unwrap_or(0))?;
            Ok((spec, TaskResolved { task: cnot_task(6)?, bundle: None }))
        }
        Some(_) => Err(CliError::Validation(
            "evaluate needs a \"model\" path, or task \"linear_cnot\" for the fixed gate".into(),
        )),
    }
}

struct TaskResolved {
    task: qpnn_core::tasks::LogicalTask,
    bundle: Option<BestModel>,
}

/// Applies the budget section: preset, then either a fixed scale or a
/// calibration against a target aggregate loss.
fn resolve_budget(
    section: &BudgetSection,
    spec: &NetworkSpec,
) -> Result<(LossBudget, Option<f64>), CliError> {
    let base = match section.preset {
        BudgetPreset::Nominal => LossBudget::nominal(section.tau_b),
        BudgetPreset::Lossless => LossBudget::lossless(section.tau_b),
    };
    if let Some(target) = section.target_alpha {
        let (budget, scale) = calibrate_budget(spec, &base, target)?;
        Ok((budget, Some(scale)))
    } else if let Some(scale) = section.scale {
        Ok((base.scaled(scale), Some(scale)))
    } else {
        Ok((base, None))
    }
}

/// Evaluates a network across source visibilities, optionally under a loss
/// budget, and emits the sweep as JSON and CSV.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    config_text: &str,
    store: &ResultStore,
) -> Result<(), CliError> {
    let (spec, resolved) = resolve_network(cfg)?;
    let budget = cfg
        .budget
        .as_ref()
        .map(|section| resolve_budget(section, &spec))
        .transpose()?;
    let (budget, scale) = match budget {
        Some((b, s)) => (Some(b), s),
        None => (None, None),
    };
    let visibilities = cfg.visibility.clone().unwrap_or_else(|| vec![1.0]);
    let grid_size = cfg.grid.as_ref().map(|g| g.size).unwrap_or(256);
    let sigma_p = cfg
        .sigma_p
        .or_else(|| resolved.bundle.as_ref().map(|b| b.train.sigma_p))
        .unwrap_or(1.0);

    let mut reports: Vec<EvaluationReport> = Vec::with_capacity(visibilities.len());
    for &v in &visibilities {
        let opts = EvalOptions { visibility: v, grid_size, sigma_p };
        reports.push(evaluate(&spec, &resolved.task, &opts, budget.as_ref())?);
    }

    let mut sweep = String::from("V,F,eta,C_avg,C_raw,alpha,n_t,r_hz\n");
    for rep in &reports {
        let rate = rep.r.map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(
            sweep,
            "{},{},{},{},{},{},{},{}",
            rep.visibility, rep.fidelity, rep.eta, rep.cost_avg, rep.cost_raw, rep.alpha, rep.n_t,
            rate
        );
    }
    store.write_text("vsweep.csv", &sweep)?;
    store.write_json("report.json", &reports)?;
    if let Some(s) = scale {
        store.write_json("budget.json", &BudgetReport::new(s, budget.as_ref().unwrap(), &spec)?)?;
    }
    store.write_manifest("evaluate", config_text, None)?;

    let last = reports.last().expect("at least one visibility");
    match last.r {
        Some(r) => println!(
            "{}: V = {}: F = {:.6}, eta = {:.6}, alpha = {:.4}, r = {:.1} Hz",
            last.task, last.visibility, last.fidelity, last.eta, last.alpha, r
        ),
        None => println!(
            "{}: V = {}: F = {:.6}, eta = {:.6}",
            last.task, last.visibility, last.fidelity, last.eta
        ),
    }
    Ok(())
}

/// Loss-budget calibration result: the dB-space scale and what it buys.
#[derive(Debug, Serialize)]
struct BudgetReport {
    scale: f64,
    achieved_alpha: f64,
    budget: LossBudget,
}

impl BudgetReport {
    fn new(scale: f64, budget: &LossBudget, spec: &NetworkSpec) -> Result<Self, CliError> {
        Ok(Self {
            scale,
            achieved_alpha: 1.0 - transmissivity(spec, budget)?,
            budget: budget.clone(),
        })
    }
}

/// Scales a component loss budget until an N-mode, L-layer network hits a
/// target aggregate loss, and reports the per-component breakdown.
pub fn cmd_calibrate_loss(
    cfg: &ExperimentConfig,
    config_text: &str,
    store: &ResultStore,
) -> Result<(), CliError> {
    let modes = cfg
        .modes
        .ok_or_else(|| CliError::Validation("config needs \"N\", the mode count".into()))?;
    let layers = cfg.layers.unwrap_or(1);
    let buffer = cfg.buffer.unwrap_or(0);
    let section = cfg
        .budget
        .as_ref()
        .ok_or_else(|| CliError::Validation("config needs a \"budget\" section".into()))?;
    let target = section.target_alpha.ok_or_else(|| {
        CliError::Validation("calibrate-loss needs \"budget.target_alpha\"".into())
    })?;

    // Component counts depend only on the layout, so an identity mesh per
    // layer stands in for any concrete network of this shape.
    let plan = decompose(&identity(modes))?;
    let spec = NetworkSpec::new(vec![plan; layers], Nonlinearity::None, buffer)?;
    let base = match section.preset {
        BudgetPreset::Nominal => LossBudget::nominal(section.tau_b),
        BudgetPreset::Lossless => LossBudget::lossless(section.tau_b),
    };
    let (budget, scale) = calibrate_budget(&spec, &base, target)?;
    let achieved = 1.0 - transmissivity(&spec, &budget)?;

    let omega_mzi = mzi_traversals(modes);
    let omega_sw = switch_traversals(modes)?;
    let fiber_km = linear_fiber_length(modes, &budget);
    let mut breakdown = String::from("component,traversals_per_layer_or_km,alpha_base,alpha_scaled\n");
    let mut row = |name: &str, count: f64, a0: f64, a1: f64| {
        let _ = writeln!(breakdown, "{name},{count},{a0},{a1}");
    };
    row("mzi", omega_mzi as f64, base.alpha_mzi, budget.alpha_mzi);
    row("switch", omega_sw as f64, base.alpha_switch, budget.alpha_switch);
    row("phase_shifter", 1.0, base.alpha_ps, budget.alpha_ps);
    row("chip_coupling", 2.0 * (omega_sw as f64 - 1.0), base.alpha_chip, budget.alpha_chip);
    row("fiber_per_km", fiber_km, base.fiber_attenuation, budget.fiber_attenuation);
    store.write_text("breakdown.csv", &breakdown)?;
    store.write_json("budget.json", &BudgetReport { scale, achieved_alpha: achieved, budget })?;
    store.write_manifest("calibrate-loss", config_text, None)?;
    println!(
        "scale {scale:.6}: alpha = {achieved:.6} (target {target}) for N = {modes}, L = {layers}; n_t = {}",
        protocol_steps(modes, layers, buffer)
    );
    Ok(())
}

/// Sweeps detector jitter and reports the induced mean pairwise visibility
/// and two-photon input fidelity.
pub fn cmd_visibility_sweep(
    cfg: &ExperimentConfig,
    config_text: &str,
    seed_override: Option<u64>,
    store: &ResultStore,
) -> Result<(), CliError> {
    let sigma_p = cfg.sigma_p();
    let sigma_j: Vec<f64> = cfg
        .sigma_j
        .clone()
        .unwrap_or_else(|| (0..=12).map(|i| 0.25 * i as f64 * sigma_p).collect());
    let convention = cfg.jitter_convention.unwrap_or(JitterConvention::Fwhm);
    let samples = cfg.samples.unwrap_or(4000);
    let seed = seed_override.unwrap_or_else(|| cfg.train.as_ref().map(|t| t.seed).unwrap_or(1));

    let mut table = String::from("sigma_j_ns,V,V_analytic,F_in\n");
    for &sj in &sigma_j {
        let v = mean_visibility(sj, sigma_p, convention, samples, seed)?;
        let va = mean_visibility_analytic(sj, sigma_p, convention);
        let _ = writeln!(table, "{},{},{},{}", sj, v, va, input_fidelity(v));
    }
    store.write_text("visibility.csv", &table)?;
    store.write_manifest("visibility-sweep", config_text, Some(seed))?;
    let v0 = mean_visibility(sigma_j[0], sigma_p, convention, samples, seed)?;
    let vl = mean_visibility(*sigma_j.last().unwrap(), sigma_p, convention, samples, seed)?;
    println!(
        "{} jitter points over [{}, {}] ns: V from {:.6} down to {:.6}",
        sigma_j.len(),
        sigma_j[0],
        sigma_j.last().unwrap(),
        v0,
        vl
    );
    Ok(())
}

/// Metadata stored beside each raw distribution dump.
#[derive(Debug, Serialize)]
struct DistributionMeta {
    input: String,
    outcome: (usize, usize),
    grid_size: usize,
    dt_ns: f64,
    /// Probability mass of the dump, Σ values·Δt².
    mass: f64,
}

/// Sweeps the coincidence-window threshold on a trained sorter and emits
/// the efficiency/fidelity trade-off plus the underlying distributions.
pub fn cmd_filter_scan(
    cfg: &ExperimentConfig,
    config_text: &str,
    store: &ResultStore,
) -> Result<(), CliError> {
    let path = cfg
        .model
        .as_ref()
        .ok_or_else(|| CliError::Validation("filter-scan needs a \"model\" path".into()))?;
    let bundle = BestModel::load(path)?;
    if bundle.train.task != TaskKind::Bsa
        || !matches!(bundle.train.nonlinearity, TrainNonlinearity::Emitter)
    {
        return Err(CliError::Validation(
            "filter-scan applies to emitter-based sorter models".into(),
        ));
    }
    let assignment: OutcomeAssignment = bundle.record.assignment.clone().ok_or_else(|| {
        CliError::Validation("model bundle is missing its outcome assignment".into())
    })?;

    let modes = bundle.train.modes;
    let par = Parameterization::new(modes, bundle.train.layers, true)?;
    let spec = par.network(&bundle.record.params, &bundle.train.nonlinearity, bundle.train.buffer)?;
    let (tau, detunings) = par.emitter_params(&bundle.record.params)?;
    let sigma_p = cfg.sigma_p.unwrap_or(bundle.train.sigma_p);
    let grid_size = cfg.grid.as_ref().map(|g| g.size).unwrap_or(256);
    let grid = SpectralGrid::for_pulse(sigma_p, tau, grid_size)?;
    let pulse = gaussian_wavepacket(&grid, sigma_p, 0.0);
    let family = EmitterFamily::new(grid.clone(), &pulse, tau, &detunings)?;
    let basis = FockBasis::new(modes, 2)?;
    let task = bsa_task(modes, &assignment)?;
    let lifts = spec
        .unitaries()?
        .iter()
        .map(|u| lift_unitary(u, &basis))
        .collect::<qpnn_core::Result<Vec<_>>>()?;

    let mut per_input: Vec<Vec<TwoTimeDistribution>> = Vec::with_capacity(task.len());
    for k in 0..task.len() {
        let c0 = task.input_vector(k, &basis)?;
        let coeffs = propagate_low_rank(&lifts, &basis, &c0, &family)?;
        let state = extended_from_coeffs(&basis, &family, &coeffs)?;
        per_input.push(two_time_distributions(&state)?);
    }

    let fractions: Vec<f64> = cfg
        .fractions
        .clone()
        .unwrap_or_else(|| (1..=99).map(|i| 0.01 * i as f64).collect());
    let scan = filter_scan(&per_input, &assignment, &fractions)?;

    let mut table = String::from("f,window_ns,F,eta");
    for label in &task.input_labels {
        let _ = write!(table, ",eta_{label}");
    }
    table.push('\n');
    for point in &scan {
        let _ = write!(table, "{},{},{},{}", point.fraction, point.window, point.fidelity, point.eta);
        for e in &point.eta_per_input {
            let _ = write!(table, ",{e}");
        }
        table.push('\n');
    }
    store.write_text("scan.csv", &table)?;

    // Contour masks and filtered metrics at three representative thresholds.
    let mut snapshots = Vec::new();
    for f in [0.2, 0.5, 0.9] {
        let masks = build_masks(&per_input, &assignment, f)?;
        let metrics = filtered_metrics(&per_input, &assignment, &masks)?;
        let time_grid = &per_input[0][0].grid;
        for mask in &masks {
            let mut grid_csv = format!(
                "mask_rows_t1_cols_t2_dt_ns={}_window_ns={}\n",
                time_grid.spacing,
                mask_window(mask, time_grid)
            );
            for row in mask.keep.rows() {
                let cells: Vec<&str> = row.iter().map(|&k| if k { "1" } else { "0" }).collect();
                grid_csv.push_str(&cells.join(","));
                grid_csv.push('\n');
            }
            store.write_text(
                &format!("mask_f{:02}_{}-{}.csv", (f * 100.0).round() as u32, mask.outcome.0, mask.outcome.1),
                &grid_csv,
            )?;
        }
        snapshots.push(serde_json::json!({ "fraction": f, "metrics": metrics }));
    }
    store.write_json("filtered.json", &snapshots)?;

    // Raw distributions for each input at its assigned outcomes.
    for (k, dists) in per_input.iter().enumerate() {
        for &(a, b) in &assignment.per_state[k] {
            let dist = dists
                .iter()
                .find(|d| d.outcome == (a, b))
                .expect("assignments come from the same outcome enumeration");
            let values: Vec<Complex64> =
                dist.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let name = format!("dist_{}_{}-{}.bin", task.input_labels[k], a, b);
            let meta = DistributionMeta {
                input: task.input_labels[k].clone(),
                outcome: dist.outcome,
                grid_size: dist.grid.size,
                dt_ns: dist.grid.spacing,
                mass: dist.integral(),
            };
            store.write_grid_binary(&name, dist.grid.spacing, 0.0, &values, &meta)?;
        }
    }
    store.write_manifest("filter-scan", config_text, None)?;

    let first = scan.first().expect("fractions are validated upstream");
    let last = scan.last().unwrap();
    println!(
        "{} thresholds: f = {} gives F = {:.4} at eta = {:.4}; f = {} gives F = {:.4} at eta = {:.4}",
        scan.len(),
        first.fraction,
        first.fidelity,
        first.eta,
        last.fraction,
        last.fidelity,
        last.eta
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use qpnn_core::linalg::haar_unitary_seeded;

    #[test]
    fn matrix_files_round_trip() {
        let u = haar_unitary_seeded(5, 7);
        let file = MatrixFile::from_matrix(&u);
        let back = file.to_matrix().expect("well-formed file");
        assert!(
            frobenius_diff(&u, &back) == 0.0,
            "serialization must not perturb the matrix"
        );
    }

    #[test]
    fn ragged_matrix_files_are_rejected() {
        let file = MatrixFile { re: vec![vec![1.0, 0.0], vec![0.0]], im: vec![vec![0.0; 2]; 2] };
        assert!(file.to_matrix().is_err(), "ragged rows must fail validation");
    }
}
