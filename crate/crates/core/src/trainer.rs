//! Gradient training of photonic network parameters.
//!
//! A network is parameterized by the interferometer angles of each layer
//! (two per crossing plus one output phase per mode) and, for emitter
//! networks, a shared log-lifetime and one detuning per nonlinear layer.
//! Trials start from independent random points and descend the task cost
//! with BFGS and a monotone backtracking line search; Kerr networks with
//! indistinguishable photons use an analytic gradient through the permanent
//! lift, everything else falls back to central finite differences.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::engine::{cost, evaluate, EvalOptions, NetworkSpec, Nonlinearity};
use crate::fock::{lift_derivative, lift_unitary, FockBasis};
use crate::linalg::{identity, C64, CMat, CVec};
use crate::mesh::{decompose, mzi, MeshPlan};
use crate::nonlinear::kerr_unitary;
use crate::tasks::{assign_outcomes, bsa_task, cnot_task, LogicalTask, OutcomeAssignment, TargetState};
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Which logical task to train towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Cnot,
    Bsa,
}

/// Nonlinearity placed between layers; emitter parameters are trained.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainNonlinearity {
    Kerr { phase: f64 },
    Emitter,
}

/// What to train and for how long.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: TaskKind,
    pub modes: usize,
    pub layers: usize,
    pub nonlinearity: TrainNonlinearity,
    /// Pairwise photon visibility assumed while training.
    pub visibility: f64,
    pub epochs: usize,
    pub trials: usize,
    pub seed: u64,
    /// Spectral grid size used during emitter training.
    pub grid_size: usize,
    /// Finer spectral grid for the final evaluation of each trial.
    pub eval_grid_size: usize,
    /// Pulse duration, the time unit of emitter networks.
    pub sigma_p: f64,
    /// Idle buffer steps per layer (affects the protocol step count only).
    pub buffer: usize,
}

impl TrainConfig {
    /// Two Kerr layers on four modes trained towards a CNOT.
    pub fn kerr_cnot(trials: usize, epochs: usize, seed: u64) -> Self {
        Self {
            task: TaskKind::Cnot,
            modes: 4,
            layers: 2,
            nonlinearity: TrainNonlinearity::Kerr { phase: PI },
            visibility: 1.0,
            epochs,
            trials,
            seed,
            grid_size: 128,
            eval_grid_size: 512,
            sigma_p: 1.0,
            buffer: 1,
        }
    }

    /// Two emitter-coupled layers trained to sort Bell states.
    pub fn qd_bsa(modes: usize, trials: usize, epochs: usize, seed: u64) -> Self {
        Self {
            task: TaskKind::Bsa,
            modes,
            layers: 2,
            nonlinearity: TrainNonlinearity::Emitter,
            visibility: 1.0,
            epochs,
            trials,
            seed,
            grid_size: 128,
            eval_grid_size: 512,
            sigma_p: 1.0,
            buffer: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidInput("training needs at least one epoch".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("training needs at least one trial".into()));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::InvalidInput(format!(
                "visibility must lie in [0, 1], got {}",
                self.visibility
            )));
        }
        if self.sigma_p <= 0.0 {
            return Err(Error::InvalidInput("pulse duration must be positive".into()));
        }
        Ok(())
    }
}

/// Fixed rectangular mesh topology whose angles live in a flat vector.
///
/// Layout per layer: `[θ_1, φ_1, …, θ_P, φ_P, δ_1, …, δ_N]` with crossings
/// in (column, arm) order; emitter networks append `[ln τ, Δ_1, …, Δ_{L−1}]`.
#[derive(Debug, Clone)]
pub struct Parameterization {
    pub modes: usize,
    pub layers: usize,
    template: MeshPlan,
    emitter: bool,
}

impl Parameterization {
    pub fn new(modes: usize, layers: usize, emitter: bool) -> Result<Self> {
        if layers == 0 {
            return Err(Error::InvalidInput("a network needs at least one layer".into()));
        }
        let template = decompose(&identity(modes))?;
        Ok(Self { modes, layers, template, emitter })
    }

    pub fn crossings_per_layer(&self) -> usize {
        self.template.placements.len()
    }

    fn layer_len(&self) -> usize {
        2 * self.template.placements.len() + self.modes
    }

    /// Total number of trainable parameters.
    pub fn len(&self) -> usize {
        self.layers * self.layer_len() + if self.emitter { self.layers } else { 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "parameter vector has length {}, expected {}",
                x.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Mesh plans for every layer with angles read from `x`.
    pub fn plans(&self, x: &[f64]) -> Result<Vec<MeshPlan>> {
        self.check(x)?;
        let mut plans = Vec::with_capacity(self.layers);
        for l in 0..self.layers {
            let off = l * self.layer_len();
            let mut plan = self.template.clone();
            for (q, p) in plan.placements.iter_mut().enumerate() {
                p.theta = x[off + 2 * q];
                p.phi = x[off + 2 * q + 1];
            }
            let dstart = off + 2 * plan.placements.len();
            for (m, d) in plan.delta.iter_mut().enumerate() {
                *d = x[dstart + m];
            }
            plans.push(plan);
        }
        Ok(plans)
    }

    /// Emitter lifetime and per-layer detunings read from `x`.
    pub fn emitter_params(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(x)?;
        if !self.emitter {
            return Err(Error::InvalidInput("parameterization has no emitter block".into()));
        }
        let off = self.layers * self.layer_len();
        Ok((x[off].exp(), x[off + 1..].to_vec()))
    }

    /// Builds the network described by `x`.
    pub fn network(&self, x: &[f64], nl: &TrainNonlinearity, buffer: usize) -> Result<NetworkSpec> {
        let plans = self.plans(x)?;
        let nonlinearity = match nl {
            TrainNonlinearity::Kerr { phase } => Nonlinearity::Kerr { phase: *phase },
            TrainNonlinearity::Emitter => {
                let (tau, detunings) = self.emitter_params(x)?;
                Nonlinearity::Emitter { tau, detunings }
            }
        };
        NetworkSpec::new(plans, nonlinearity, buffer)
    }

    /// Draws a random starting point. Angles are uniform over a period; the
    /// lifetime starts log-uniform near the pulse duration, inside the window
    /// a 128-point grid can resolve on both the pulse and the emitter side,
    /// and detunings start within ±2/τ.
    pub fn random_init(&self, rng: &mut impl Rng, sigma_p: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        for _ in 0..self.layers * self.layer_len() {
            x.push(rng.gen::<f64>() * 2.0 * PI);
        }
        if self.emitter {
            let log_tau = sigma_p.ln() + rng.gen_range(-0.2..0.25);
            x.push(log_tau);
            let tau = log_tau.exp();
            for _ in 1..self.layers {
                x.push(rng.gen_range(-2.0 / tau..2.0 / tau));
            }
        }
        x
    }
}

/// One trial's outcome: the descent trajectory, final metrics, and the
/// trained parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub trial: usize,
    pub seed: u64,
    /// Accepted cost after every epoch; entry 0 is the initialization cost.
    pub cost_trajectory: Vec<f64>,
    pub final_cost: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub eta: f64,
    pub params: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignment: Option<OutcomeAssignment>,
    /// |F(eval grid) − F(train grid)|, reported for emitter networks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_gap: Option<f64>,
}

/// Builds the task a config trains towards, plus the outcome assignment for
/// sorting tasks.
pub fn build_task(cfg: &TrainConfig) -> Result<(LogicalTask, Option<OutcomeAssignment>)> {
    match cfg.task {
        TaskKind::Cnot => Ok((cnot_task(cfg.modes)?, None)),
        TaskKind::Bsa => {
            let assignment = assign_outcomes(cfg.modes, cfg.seed)?;
            let task = bsa_task(cfg.modes, &assignment)?;
            Ok((task, Some(assignment)))
        }
    }
}

fn train_opts(cfg: &TrainConfig) -> EvalOptions {
    EvalOptions {
        visibility: cfg.visibility,
        grid_size: cfg.grid_size,
        sigma_p: cfg.sigma_p,
    }
}

/// Runs every trial of a training config and returns the records in trial
/// order. Trials are independent and deterministic under (seed, trial).
pub fn optimize(cfg: &TrainConfig) -> Result<Vec<TrainRecord>> {
    cfg.validate()?;
    let par = Parameterization::new(
        cfg.modes,
        cfg.layers,
        matches!(cfg.nonlinearity, TrainNonlinearity::Emitter),
    )?;
    let trials: Vec<usize> = (0..cfg.trials).collect();
    #[cfg(feature = "parallel")]
    let records = trials
        .par_iter()
        .map(|&t| run_trial(cfg, &par, t))
        .collect::<Result<Vec<_>>>()?;
    #[cfg(not(feature = "parallel"))]
    let records = trials
        .iter()
        .map(|&t| run_trial(cfg, &par, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(records)
}

/// The record with the lowest final cost.
pub fn best_record(records: &[TrainRecord]) -> Option<&TrainRecord> {
    records
        .iter()
        .min_by(|a, b| a.final_cost.partial_cmp(&b.final_cost).expect("finite costs"))
}

fn run_trial(cfg: &TrainConfig, par: &Parameterization, trial: usize) -> Result<TrainRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    // Sorting tasks draw a fresh outcome mapping per trial: which Bell state
    // lands on which coincidence outcome is itself part of the search space.
    let (task, assignment) = match cfg.task {
        TaskKind::Cnot => (cnot_task(cfg.modes)?, None),
        TaskKind::Bsa => {
            let assignment = assign_outcomes(cfg.modes, rng.gen())?;
            let task = bsa_task(cfg.modes, &assignment)?;
            (task, Some(assignment))
        }
    };
    let task = &task;
    let x0 = par.random_init(&mut rng, cfg.sigma_p);
    let opts = train_opts(cfg);
    let eval = |x: &[f64]| -> Result<f64> {
        let spec = par.network(x, &cfg.nonlinearity, cfg.buffer)?;
        Ok(cost(&spec, task, &opts, 0.0)?.raw)
    };
    let analytic = match &cfg.nonlinearity {
        TrainNonlinearity::Kerr { phase }
            if cfg.visibility == 1.0
                && task.targets.iter().all(|t| matches!(t, TargetState::Pure(_))) =>
        {
            Some(*phase)
        }
        _ => None,
    };
    let basis = FockBasis::new(cfg.modes, 2)?;
    let grad = |x: &[f64]| -> Result<Vec<f64>> {
        match analytic {
            Some(phase) => kerr_gradient(par, task, &basis, phase, x),
            None => fd_gradient(&eval, x),
        }
    };
    let (x, traj) = bfgs_minimize(x0, cfg.epochs, &eval, &grad)
        .map_err(|e| Error::Numerical(format!("trial {trial}: {e}")))?;

    let spec = par.network(&x, &cfg.nonlinearity, cfg.buffer)?;
    let eval_opts = EvalOptions { grid_size: cfg.eval_grid_size, ..opts.clone() };
    // A trial can stall on a model that puts no light on the conditioned
    // outcomes; its fidelity is undefined, so it records as a dead trial
    // rather than poisoning the whole run.
    let (fidelity, eta, fine_ok) = match evaluate(&spec, task, &eval_opts, None) {
        Ok(report) => (report.fidelity, report.eta, true),
        Err(Error::Numerical(_)) => (0.0, 0.0, false),
        Err(e) => return Err(e),
    };
    let grid_gap = match cfg.nonlinearity {
        TrainNonlinearity::Emitter if fine_ok => match evaluate(&spec, task, &opts, None) {
            Ok(coarse) => Some((fidelity - coarse.fidelity).abs()),
            Err(Error::Numerical(_)) => None,
            Err(e) => return Err(e),
        },
        _ => None,
    };
    Ok(TrainRecord {
        trial,
        seed: cfg.seed,
        final_cost: *traj.last().expect("trajectory is never empty"),
        cost_trajectory: traj,
        fidelity,
        eta,
        params: x,
        assignment,
        grid_gap,
    })
}

/// BFGS descent with Armijo backtracking; only strict improvements are
/// accepted, so the returned trajectory is non-increasing. Steps whose cost
/// fails to evaluate (for example a lifetime the grid cannot resolve) are
/// rejected like any insufficient decrease.
fn bfgs_minimize(
    x0: Vec<f64>,
    epochs: usize,
    eval: &dyn Fn(&[f64]) -> Result<f64>,
    grad: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    const ARMIJO: f64 = 1e-4;
    const MAX_BACKTRACKS: usize = 40;
    let n = x0.len();
    let mut x = Array1::from(x0);
    let mut c = eval(x.as_slice().unwrap())?;
    if !c.is_finite() {
        return Err(Error::Numerical(format!("initial cost is not finite ({c})")));
    }
    let mut traj = Vec::with_capacity(epochs);
    traj.push(c);
    if epochs == 1 {
        return Ok((x.to_vec(), traj));
    }
    // A gradient can fail at the edge of the resolvable-lifetime domain;
    // the iterate is still valid, so treat the trial as converged there.
    let pad = |traj: &mut Vec<f64>, c: f64| {
        while traj.len() < epochs {
            traj.push(c);
        }
    };
    let mut g = match grad(x.as_slice().unwrap()) {
        Ok(g) => Array1::from(g),
        Err(_) => {
            pad(&mut traj, c);
            return Ok((x.to_vec(), traj));
        }
    };
    let search = |x: &Array1<f64>, c: f64, d: &Array1<f64>, slope: f64| {
        let mut step = 1.0;
        for _ in 0..MAX_BACKTRACKS {
            let xt = x + &d.mapv(|v| v * step);
            if let Ok(ct) = eval(xt.as_slice().unwrap()) {
                if ct.is_finite() && ct <= c + ARMIJO * step * slope {
                    return Some((xt, ct));
                }
            }
            step *= 0.5;
        }
        None
    };
    let mut h: Array2<f64> = Array2::eye(n);
    let mut h_fresh = true;
    let mut first_update = true;
    for _ in 1..epochs {
        if g.dot(&g).sqrt() < 1e-12 {
            traj.push(c);
            continue;
        }
        let mut d = -h.dot(&g);
        let mut slope = d.dot(&g);
        if !(slope < 0.0) {
            h = Array2::eye(n);
            h_fresh = true;
            first_update = true;
            d = -g.clone();
            slope = d.dot(&g);
        }
        let mut accepted = search(&x, c, &d, slope);
        if accepted.is_none() && !h_fresh {
            // The quasi-Newton direction can go stale in strongly nonconvex
            // regions; restart from steepest descent before giving up.
            h = Array2::eye(n);
            h_fresh = true;
            first_update = true;
            d = -g.clone();
            slope = d.dot(&g);
            accepted = search(&x, c, &d, slope);
        }
        let Some((xt, ct)) = accepted else {
            // No descent direction survives the backtracking budget: the
            // trial has converged, so the trajectory holds its last value.
            pad(&mut traj, c);
            break;
        };
        let Ok(gt) = grad(xt.as_slice().unwrap()).map(Array1::from) else {
            x = xt;
            c = ct;
            traj.push(c);
            pad(&mut traj, c);
            break;
        };
        let s = &xt - &x;
        let y = &gt - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 {
            if first_update {
                // Scale the seed Hessian to the first measured curvature so
                // subsequent steps start near the right magnitude.
                let yy = y.dot(&y);
                if yy > 0.0 {
                    h *= sy / yy;
                }
                first_update = false;
            }
            let rho = 1.0 / sy;
            let hy = h.dot(&y);
            let yhy = y.dot(&hy);
            for i in 0..n {
                for j in 0..n {
                    h[[i, j]] += (rho * rho * yhy + rho) * s[i] * s[j]
                        - rho * (s[i] * hy[j] + hy[i] * s[j]);
                }
            }
            h_fresh = false;
        }
        x = xt;
        c = ct;
        g = gt;
        traj.push(c);
    }
    Ok((x.to_vec(), traj))
}

/// Central finite-difference gradient with a 1e−6 step.
pub fn fd_gradient(eval: &dyn Fn(&[f64]) -> Result<f64>, x: &[f64]) -> Result<Vec<f64>> {
    const H: f64 = 1e-6;
    let mut g = Vec::with_capacity(x.len());
    let mut xt = x.to_vec();
    for i in 0..x.len() {
        xt[i] = x[i] + H;
        let plus = eval(&xt)?;
        xt[i] = x[i] - H;
        let minus = eval(&xt)?;
        xt[i] = x[i];
        g.push((plus - minus) / (2.0 * H));
    }
    Ok(g)
}

/// Applies the crossing block on arm (i, i+1) from the left: u ← T·u.
fn t_left(u: &mut CMat, arm: usize, block: &CMat) {
    let i = arm - 1;
    for c in 0..u.ncols() {
        let a = u[[i, c]];
        let b = u[[i + 1, c]];
        u[[i, c]] = block[[0, 0]] * a + block[[0, 1]] * b;
        u[[i + 1, c]] = block[[1, 0]] * a + block[[1, 1]] * b;
    }
}

/// Applies the crossing block on arm (i, i+1) from the right: u ← u·T.
fn t_right(u: &mut CMat, arm: usize, block: &CMat) {
    let i = arm - 1;
    for r in 0..u.nrows() {
        let a = u[[r, i]];
        let b = u[[r, i + 1]];
        u[[r, i]] = a * block[[0, 0]] + b * block[[1, 0]];
        u[[r, i + 1]] = a * block[[0, 1]] + b * block[[1, 1]];
    }
}

/// ∂T/∂θ of the crossing block.
fn mzi_dtheta(theta: f64, phi: f64) -> CMat {
    let (s, c) = theta.sin_cos();
    let f = C64::new(0.0, 1.0) * C64::from_polar(1.0, theta);
    let p = C64::from_polar(1.0, phi);
    let i = C64::new(0.0, 1.0);
    let mut t = CMat::zeros((2, 2));
    t[[0, 0]] = f * p * (i * s + c);
    t[[0, 1]] = f * (i * c - s);
    t[[1, 0]] = f * p * (i * c - s);
    t[[1, 1]] = -f * (i * s + c);
    t
}

/// ∂T/∂φ of the crossing block.
fn mzi_dphi(theta: f64, phi: f64) -> CMat {
    let (s, c) = theta.sin_cos();
    let f = C64::new(0.0, 1.0) * C64::from_polar(1.0, theta);
    let ip = C64::new(0.0, 1.0) * C64::from_polar(1.0, phi);
    let mut t = CMat::zeros((2, 2));
    t[[0, 0]] = f * ip * s;
    t[[1, 0]] = f * ip * c;
    t
}

/// Per-layer mesh factorization: U = D·T_P···T_1 with all partial products.
struct LayerChain {
    u: CMat,
    lift: CMat,
    /// pre[q] = T_q···T_1 (pre[0] = I).
    pre: Vec<CMat>,
    /// suf[q] = D·T_P···T_{q+1} (suf[P] = D).
    suf: Vec<CMat>,
}

fn layer_chain(plan: &MeshPlan, basis: &FockBasis) -> Result<LayerChain> {
    let n = plan.modes;
    let p = plan.placements.len();
    let mut pre = Vec::with_capacity(p + 1);
    pre.push(identity(n));
    for q in 0..p {
        let mut next = pre[q].clone();
        let block = mzi(plan.placements[q].theta, plan.placements[q].phi);
        t_left(&mut next, plan.placements[q].mode, &block);
        pre.push(next);
    }
    let mut d = CMat::zeros((n, n));
    for (m, &delta) in plan.delta.iter().enumerate() {
        d[[m, m]] = C64::from_polar(1.0, delta);
    }
    let mut suf = vec![CMat::zeros((0, 0)); p + 1];
    suf[p] = d;
    for q in (0..p).rev() {
        let mut next = suf[q + 1].clone();
        let block = mzi(plan.placements[q].theta, plan.placements[q].phi);
        t_right(&mut next, plan.placements[q].mode, &block);
        suf[q] = next;
    }
    let u = suf[0].clone();
    let lift = lift_unitary(&u, basis)?;
    Ok(LayerChain { u, lift, pre, suf })
}

/// dU for a crossing parameter: suf[q]·(∂T embedded on the arm)·pre[q−1],
/// contracted through the 2×2 block only.
fn mesh_derivative(chain: &LayerChain, q: usize, arm: usize, dblock: &CMat) -> CMat {
    let suf = &chain.suf[q + 1];
    let pre = &chain.pre[q];
    let n = suf.nrows();
    let i = arm - 1;
    let mut du = CMat::zeros((n, n));
    for r in 0..n {
        for c in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    acc += suf[[r, i + a]] * dblock[[a, b]] * pre[[i + b, c]];
                }
            }
            du[[r, c]] = acc;
        }
    }
    du
}

/// Analytic cost gradient for Kerr networks with indistinguishable photons
/// and pure targets: C = (1/K)·Σ_k (1 − |⟨t_k|S|c_k⟩|²) differentiated
/// through every factor of S = Φ(U_L)·K·…·K·Φ(U_1).
fn kerr_gradient(
    par: &Parameterization,
    task: &LogicalTask,
    basis: &FockBasis,
    phase: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    let plans = par.plans(x)?;
    let layers = par.layers;
    let chains: Vec<LayerChain> =
        plans.iter().map(|p| layer_chain(p, basis)).collect::<Result<_>>()?;
    let kerr = kerr_unitary(basis, phase);
    let kdiag: CVec = kerr.diag().to_owned();
    let factors = 2 * layers - 1;
    let apply = |j: usize, v: &CVec| -> CVec {
        if j % 2 == 0 {
            chains[j / 2].lift.dot(v)
        } else {
            v * &kdiag
        }
    };
    let apply_dagger = |j: usize, v: &CVec| -> CVec {
        if j % 2 == 0 {
            chains[j / 2].lift.t().mapv(|z| z.conj()).dot(v)
        } else {
            v * &kdiag.mapv(|z| z.conj())
        }
    };

    let kcount = task.len();
    let mut fwd = Vec::with_capacity(kcount);
    let mut dual = Vec::with_capacity(kcount);
    let mut amp = Vec::with_capacity(kcount);
    for k in 0..kcount {
        let c = task.input_vector(k, basis)?;
        let t = match &task.targets[k] {
            TargetState::Pure(t) => t.clone(),
            TargetState::Mixture(_) => {
                return Err(Error::InvalidInput(
                    "analytic gradient needs pure target states".into(),
                ))
            }
        };
        let mut f = Vec::with_capacity(factors + 1);
        f.push(c);
        for j in 0..factors {
            let next = apply(j, &f[j]);
            f.push(next);
        }
        let mut d = vec![CVec::zeros(0); factors];
        d[factors - 1] = t.clone();
        for j in (0..factors - 1).rev() {
            d[j] = apply_dagger(j + 1, &d[j + 1]);
        }
        let a: C64 = t.iter().zip(f[factors].iter()).map(|(ti, fi)| ti.conj() * fi).sum();
        fwd.push(f);
        dual.push(d);
        amp.push(a);
    }

    let layer_len = 2 * par.crossings_per_layer() + par.modes;
    let mut g = vec![0.0; par.len()];
    let mut slot = 0usize;
    for (l, chain) in chains.iter().enumerate() {
        let j = 2 * l;
        let push = |du: &CMat, slot: usize, g: &mut Vec<f64>| -> Result<()> {
            let dphi = lift_derivative(&chain.u, du, basis)?;
            let mut acc = 0.0;
            for k in 0..kcount {
                let w = dphi.dot(&fwd[k][j]);
                let term: C64 =
                    dual[k][j].iter().zip(w.iter()).map(|(di, wi)| di.conj() * wi).sum();
                acc += (amp[k].conj() * term).re;
            }
            g[slot] = -2.0 * acc / kcount as f64;
            Ok(())
        };
        for (q, p) in plans[l].placements.iter().enumerate() {
            let du = mesh_derivative(chain, q, p.mode, &mzi_dtheta(p.theta, p.phi));
            push(&du, slot + 2 * q, &mut g)?;
            let du = mesh_derivative(chain, q, p.mode, &mzi_dphi(p.theta, p.phi));
            push(&du, slot + 2 * q + 1, &mut g)?;
        }
        let dstart = slot + 2 * plans[l].placements.len();
        for m in 0..par.modes {
            let mut du = CMat::zeros((par.modes, par.modes));
            for c in 0..par.modes {
                du[[m, c]] = C64::new(0.0, 1.0) * chain.u[[m, c]];
            }
            push(&du, dstart + m, &mut g)?;
        }
        slot += layer_len;
    }
    Ok(g)
}

/// Records serialized one JSON object per line.
pub fn records_to_jsonl(records: &[TrainRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        let line = serde_json::to_string(r)
            .map_err(|e| Error::InvalidInput(format!("record serialization failed: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn records_from_jsonl(text: &str) -> Result<Vec<TrainRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l)
                .map_err(|e| Error::InvalidInput(format!("bad training record: {e}")))
        })
        .collect()
}

/// One summary row per trial.
pub fn summary_csv(records: &[TrainRecord]) -> String {
    let mut out = String::from("trial,final_cost,F,eta\n");
    for r in records {
        out.push_str(&format!("{},{},{},{}\n", r.trial, r.final_cost, r.fidelity, r.eta));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parameter_vector_length_matches_the_network_shape() {
        let kerr = Parameterization::new(4, 2, false).unwrap();
        assert_eq!(kerr.len(), 32, "4 modes x 2 layers: 2*(12 + 4) angles");
        let qd = Parameterization::new(4, 2, true).unwrap();
        assert_eq!(qd.len(), 34, "emitter adds a lifetime and one detuning");
        let single = Parameterization::new(6, 1, false).unwrap();
        assert_eq!(single.len(), 36, "6 modes x 1 layer: 30 + 6 angles");
    }

    #[test]
    fn plans_round_trip_the_parameter_vector() {
        let par = Parameterization::new(4, 2, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = par.random_init(&mut rng, 1.0);
        let plans = par.plans(&x).unwrap();
        assert_eq!(plans.len(), 2, "one mesh plan per layer");
        assert_abs_diff_eq!(plans[1].placements[0].theta, x[16], epsilon = 0.0);
        let (tau, det) = par.emitter_params(&x).unwrap();
        assert_abs_diff_eq!(tau.ln(), x[32], epsilon = 1e-15);
        assert_eq!(det.len(), 1, "one detuning per nonlinear layer");
        assert!(det[0].abs() <= 2.0 / tau, "detuning starts within the linewidth");
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let cfg = TrainConfig::kerr_cnot(1, 1, 414);
        let (task, _) = build_task(&cfg).unwrap();
        let par = Parameterization::new(4, 2, false).unwrap();
        let basis = FockBasis::new(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(414);
        let x = par.random_init(&mut rng, 1.0);
        let opts = train_opts(&cfg);
        let eval = |x: &[f64]| -> Result<f64> {
            let spec = par.network(x, &cfg.nonlinearity, cfg.buffer)?;
            Ok(cost(&spec, &task, &opts, 0.0)?.raw)
        };
        let analytic = kerr_gradient(&par, &task, &basis, PI, &x).unwrap();
        let fd = fd_gradient(&eval, &x).unwrap();
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(scale > 1e-3, "gradient should not vanish at a random point, max {scale:.2e}");
        for (i, (a, f)) in analytic.iter().zip(fd.iter()).enumerate() {
            let err = (a - f).abs() / scale.max(f.abs());
            assert!(err < 1e-4, "component {i}: analytic {a:.8e} vs fd {f:.8e}");
        }
    }

    #[test]
    fn cost_per_input_stays_within_the_unit_interval() {
        for seed in [3u64, 4, 5] {
            let cfg = TrainConfig::qd_bsa(4, 1, 1, seed);
            let (task, _) = build_task(&cfg).unwrap();
            let par = Parameterization::new(4, 2, true).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = par.random_init(&mut rng, 1.0);
            let spec = par.network(&x, &cfg.nonlinearity, cfg.buffer).unwrap();
            let summary = cost(&spec, &task, &train_opts(&cfg), 0.0).unwrap();
            for (k, c) in summary.per_input.iter().enumerate() {
                assert!(
                    (-1e-9..=1.0 + 1e-9).contains(c),
                    "input {k} cost {c} escapes [0, 1] at seed {seed}"
                );
            }
        }
    }

    #[test]
    fn epochs_one_returns_the_initialization_cost() {
        let cfg = TrainConfig::kerr_cnot(1, 1, 7);
        let records = optimize(&cfg).unwrap();
        assert_eq!(records[0].cost_trajectory.len(), 1, "one epoch, one cost");
        let par = Parameterization::new(4, 2, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        rng.set_stream(0);
        let x = par.random_init(&mut rng, 1.0);
        let (task, _) = build_task(&cfg).unwrap();
        let spec = par.network(&x, &cfg.nonlinearity, cfg.buffer).unwrap();
        let c0 = cost(&spec, &task, &train_opts(&cfg), 0.0).unwrap().raw;
        assert_abs_diff_eq!(records[0].cost_trajectory[0], c0, epsilon = 0.0);
    }

    #[test]
    fn zero_epochs_is_rejected() {
        let cfg = TrainConfig::kerr_cnot(1, 0, 7);
        assert!(optimize(&cfg).is_err(), "epochs = 0 must be an input error");
    }

    #[test]
    fn training_descends_deterministically() {
        let cfg = TrainConfig::kerr_cnot(2, 40, 11);
        let records = optimize(&cfg).unwrap();
        let again = optimize(&cfg).unwrap();
        assert_eq!(records, again, "identical config must reproduce records bit for bit");
        for r in &records {
            assert_eq!(r.cost_trajectory.len(), 40, "trajectory covers every epoch");
            for w in r.cost_trajectory.windows(2) {
                assert!(w[1] <= w[0] + 1e-15, "accepted costs must not increase: {w:?}");
            }
            assert!(
                r.final_cost < r.cost_trajectory[0],
                "40 epochs should improve on the random start (trial {})",
                r.trial
            );
        }
    }

    #[test]
    fn kerr_cnot_training_reaches_high_fidelity() {
        let cfg = TrainConfig::kerr_cnot(6, 150, 2026);
        let records = optimize(&cfg).unwrap();
        let best = best_record(&records).unwrap();
        assert!(
            best.fidelity > 0.99,
            "best of 6 trials should exceed 0.99, got F = {} (cost {})",
            best.fidelity,
            best.final_cost
        );
        assert_abs_diff_eq!(best.eta, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn bsa_training_descends_and_reports_grid_gap() {
        let mut cfg = TrainConfig::qd_bsa(4, 1, 12, 31);
        cfg.eval_grid_size = 256;
        let records = optimize(&cfg).unwrap();
        let r = &records[0];
        assert!(r.final_cost < r.cost_trajectory[0], "descent should reduce the cost");
        assert!(r.assignment.is_some(), "sorting tasks carry their outcome assignment");
        let gap = r.grid_gap.expect("emitter networks report a grid gap");
        assert!(gap < 0.05, "fidelity should be near converged at the training grid, gap {gap}");
    }

    #[test]
    fn records_round_trip_through_jsonl() {
        let cfg = TrainConfig::kerr_cnot(2, 3, 17);
        let records = optimize(&cfg).unwrap();
        let text = records_to_jsonl(&records).unwrap();
        let back = records_from_jsonl(&text).unwrap();
        assert_eq!(records, back, "JSON lines round-trip must be lossless");
        let csv = summary_csv(&records);
        assert!(csv.starts_with("trial,final_cost,F,eta\n"), "summary names its columns");
        assert_eq!(csv.lines().count(), 3, "header plus one row per trial");
    }
}
