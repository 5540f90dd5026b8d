//! Network assembly and evaluation: lifted transfer matrices, spectral
//! propagation through emitter layers, loss budgets, and the
//! fidelity/efficiency/rate report.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::distinguishability::{input_fidelity, ordered_network_populations};
use crate::fock::{
    fidelity_to_pure, lift_unitary, occupied_modes, uhlmann_fidelity, DensityMatrix, FockBasis,
};
use crate::linalg::{dagger, C64, CMat, CVec};
use crate::mesh::{reconstruct, MeshPlan};
use crate::nonlinear::{
    gaussian_wavepacket, inner_pair, kerr_unitary, norm2_pair, scatter_pair, transmission,
    SpectralGrid,
};
use crate::scheduler::protocol_span;
use crate::tasks::{LogicalTask, TargetState};
use crate::{Error, Result};

/// Speed of light over a group index of 1.46, in km per ns.
pub const GROUP_VELOCITY_KM_PER_NS: f64 = 2.99792458e-4 / 1.46;

/// The photon-photon interaction applied between linear layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    None,
    Kerr {
        phase: f64,
    },
    /// Chirally coupled two-level emitter with lifetime `tau` and one
    /// detuning per nonlinear layer.
    Emitter {
        tau: f64,
        detunings: Vec<f64>,
    },
}

/// A layered network: L mesh plans with a nonlinearity between consecutive
/// layers, plus the storage buffer (in time bins) of each nonlinear segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<MeshPlan>,
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub buffer: usize,
}

impl NetworkSpec {
    pub fn new(layers: Vec<MeshPlan>, nonlinearity: Nonlinearity, buffer: usize) -> Result<Self> {
        let spec = Self { layers, nonlinearity, buffer };
        spec.validate()?;
        Ok(spec)
    }

    pub fn modes(&self) -> usize {
        self.layers.first().map_or(0, |p| p.modes)
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidInput("a network needs at least one linear layer".into()));
        }
        let n = self.modes();
        if self.layers.iter().any(|p| p.modes != n) {
            return Err(Error::InvalidInput("all layers must act on the same modes".into()));
        }
        match &self.nonlinearity {
            Nonlinearity::None => {}
            Nonlinearity::Kerr { phase } => {
                if !phase.is_finite() {
                    return Err(Error::InvalidInput("Kerr phase must be finite".into()));
                }
            }
            Nonlinearity::Emitter { tau, detunings } => {
                if *tau <= 0.0 {
                    return Err(Error::InvalidInput("emitter lifetime must be positive".into()));
                }
                if detunings.len() != self.layers.len() - 1 {
                    return Err(Error::InvalidInput(format!(
                        "{} layers need {} detunings, got {}",
                        self.layers.len(),
                        self.layers.len() - 1,
                        detunings.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// The mode unitary of each linear layer.
    pub fn unitaries(&self) -> Result<Vec<CMat>> {
        self.layers.iter().map(reconstruct).collect()
    }
}

/// Full transfer matrix on the lifted photon basis, for discrete
/// nonlinearities: Φ(U_L)·K·Φ(U_{L−1})·…·K·Φ(U_1).
pub fn system_function(spec: &NetworkSpec, basis: &FockBasis) -> Result<CMat> {
    spec.validate()?;
    if basis.modes != spec.modes() {
        return Err(Error::InvalidInput("basis does not match the network".into()));
    }
    let kerr = match &spec.nonlinearity {
        Nonlinearity::None => None,
        Nonlinearity::Kerr { phase } => Some(kerr_unitary(basis, *phase)),
        Nonlinearity::Emitter { .. } => {
            return Err(Error::InvalidInput(
                "emitter networks carry wavefunctions; use extended propagation".into(),
            ))
        }
    };
    let us = spec.unitaries()?;
    let mut s = lift_unitary(&us[0], basis)?;
    for u in &us[1..] {
        if let Some(k) = &kerr {
            s = k.dot(&s);
        }
        s = lift_unitary(u, basis)?.dot(&s);
    }
    Ok(s)
}

/// The two occupied modes (i ≤ j) of a two-photon pattern.
pub fn pattern_pair(occ: &[usize]) -> (usize, usize) {
    let modes = occupied_modes(occ);
    (modes[0], modes[1])
}

/// A two-photon state with a spectral amplitude attached to every basis
/// pattern: pattern {i<j} stores ψ(ω₁, ω₂) with ω₁ on the photon in mode i,
/// and pattern {i,i} stores its (symmetric) amplitude scaled so that the
/// total norm is the plain sum of attachment norms.
#[derive(Debug, Clone)]
pub struct ExtendedState {
    pub basis: FockBasis,
    pub grid: SpectralGrid,
    pub parts: Vec<CMat>,
}

impl ExtendedState {
    pub fn empty(basis: FockBasis, grid: SpectralGrid) -> Result<Self> {
        if basis.photons != 2 {
            return Err(Error::InvalidInput("extended states carry photon pairs".into()));
        }
        let m = grid.size;
        let parts = (0..basis.len()).map(|_| Array2::zeros((m, m))).collect();
        Ok(Self { basis, grid, parts })
    }

    /// Adds `amp · a†_a(ψ₁) a†_b(ψ₂)` to the state.
    pub fn inject_pair(
        &mut self,
        a: usize,
        b: usize,
        amp: C64,
        psi1: &CVec,
        psi2: &CVec,
    ) -> Result<()> {
        if a > b {
            return self.inject_pair(b, a, amp, psi2, psi1);
        }
        let n = self.basis.modes;
        let m = self.grid.size;
        if b >= n {
            return Err(Error::InvalidInput(format!("mode {b} outside a {n}-mode state")));
        }
        if psi1.len() != m || psi2.len() != m {
            return Err(Error::InvalidInput("wavepacket does not match the grid".into()));
        }
        let mut occ = vec![0usize; n];
        occ[a] += 1;
        occ[b] += 1;
        let idx = self.basis.index_of(&occ).expect("pattern is in the basis");
        let part = &mut self.parts[idx];
        if a < b {
            for i in 0..m {
                for j in 0..m {
                    part[[i, j]] += amp * psi1[i] * psi2[j];
                }
            }
        } else {
            let symm = amp / std::f64::consts::SQRT_2;
            for i in 0..m {
                for j in 0..m {
                    part[[i, j]] += symm * (psi1[i] * psi2[j] + psi2[i] * psi1[j]);
                }
            }
        }
        Ok(())
    }

    /// Total squared norm over all patterns and spectra.
    pub fn total_norm2(&self) -> f64 {
        self.parts.iter().map(|p| norm2_pair(&self.grid, p)).sum()
    }

    /// Reduced density matrix over the patterns (spectra traced out).
    pub fn density(&self) -> DensityMatrix {
        let d = self.basis.len();
        let mut mat = Array2::zeros((d, d));
        for m in 0..d {
            for m2 in 0..=m {
                let v = inner_pair(&self.grid, &self.parts[m2], &self.parts[m]);
                mat[[m, m2]] = v;
                mat[[m2, m]] = v.conj();
            }
        }
        DensityMatrix { mat }
    }

    /// Mixes the attachments by a broadband mode unitary.
    pub fn apply_linear(&mut self, u: &CMat) -> Result<()> {
        let n = self.basis.modes;
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::InvalidInput("layer size does not match the state".into()));
        }
        let m = self.grid.size;
        let d = self.basis.len();
        let sqrt2 = std::f64::consts::SQRT_2;
        let pairs: Vec<(usize, usize)> =
            self.basis.states().iter().map(|occ| pattern_pair(occ)).collect();
        let live: Vec<bool> =
            self.parts.iter().map(|p| p.iter().any(|z| z.norm_sqr() > 0.0)).collect();
        let parts = &self.parts;
        let mix = |dst: usize, buf: &mut CMat| {
            let (k, l) = pairs[dst];
            for (src, &(i, j)) in pairs.iter().enumerate() {
                if !live[src] {
                    continue;
                }
                let a = &parts[src];
                // Coefficients on the attachment and on its frequency swap.
                let (c_dir, c_swp) = if k < l {
                    if i < j {
                        (u[[k, i]] * u[[l, j]], u[[l, i]] * u[[k, j]])
                    } else {
                        (u[[k, i]] * u[[l, i]] * sqrt2, C64::new(0.0, 0.0))
                    }
                } else if i < j {
                    let c = u[[k, i]] * u[[k, j]] / sqrt2;
                    (c, c)
                } else {
                    (u[[k, i]] * u[[k, i]], C64::new(0.0, 0.0))
                };
                if c_dir.norm_sqr() > 0.0 {
                    Zip::from(&mut *buf).and(a).for_each(|o, &x| *o += c_dir * x);
                }
                if c_swp.norm_sqr() > 0.0 {
                    Zip::from(&mut *buf).and(&a.t()).for_each(|o, &x| *o += c_swp * x);
                }
            }
        };
        let mut out: Vec<CMat> = (0..d).map(|_| Array2::zeros((m, m))).collect();
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(dst, buf)| mix(dst, buf));
        }
        #[cfg(not(feature = "parallel"))]
        for (dst, buf) in out.iter_mut().enumerate() {
            mix(dst, buf);
        }
        self.parts = out;
        Ok(())
    }

    /// Scatters every pattern on the emitter: photons in distinct bins pick
    /// up t(ω) each; a doubly occupied bin scatters as an interacting pair.
    pub fn apply_emitter(&mut self, delta: f64, tau: f64) -> Result<()> {
        let t: Vec<C64> =
            (0..self.grid.size).map(|k| transmission(self.grid.omega(k), delta, tau)).collect();
        let states: Vec<(usize, usize)> =
            self.basis.states().iter().map(|occ| pattern_pair(occ)).collect();
        for (idx, &(i, j)) in states.iter().enumerate() {
            if i == j {
                self.parts[idx] = scatter_pair(&self.grid, &self.parts[idx], delta, tau)?;
            } else {
                for ((r, c), v) in self.parts[idx].indexed_iter_mut() {
                    *v *= t[r] * t[c];
                }
            }
        }
        Ok(())
    }
}

/// Propagates an extended state through an emitter network:
/// U_1, scatter, U_2, …, scatter, U_L.
pub fn propagate_extended(spec: &NetworkSpec, input: &ExtendedState) -> Result<ExtendedState> {
    spec.validate()?;
    let (tau, detunings) = match &spec.nonlinearity {
        Nonlinearity::Emitter { tau, detunings } => (*tau, detunings),
        _ => {
            return Err(Error::InvalidInput(
                "extended propagation is defined for emitter networks".into(),
            ))
        }
    };
    if input.basis.modes != spec.modes() {
        return Err(Error::InvalidInput("state does not match the network".into()));
    }
    let us = spec.unitaries()?;
    let mut state = input.clone();
    for (l, u) in us.iter().enumerate() {
        state.apply_linear(u)?;
        if l + 1 < us.len() {
            state.apply_emitter(detunings[l], tau)?;
        }
    }
    Ok(state)
}

/// A task input as an extended state: every injected pair carries the same
/// Gaussian pulse in both photons.
pub fn input_extended(
    task: &LogicalTask,
    k: usize,
    grid: &SpectralGrid,
    sigma_p: f64,
) -> Result<ExtendedState> {
    if k >= task.len() {
        return Err(Error::InvalidInput(format!("task has {} inputs, asked for {k}", task.len())));
    }
    let basis = FockBasis::new(task.modes, 2)?;
    let pulse = gaussian_wavepacket(grid, sigma_p, 0.0);
    let mut state = ExtendedState::empty(basis, grid.clone())?;
    for &((a, b), amp) in &task.input_pairs[k] {
        state.inject_pair(a, b, amp, &pulse, &pulse)?;
    }
    Ok(state)
}

/// Expands low-rank coefficients back into a dense extended state:
/// pattern m gets Σ_r coeffs[m, r]·f_r.
pub fn extended_from_coeffs(
    basis: &FockBasis,
    family: &EmitterFamily,
    coeffs: &CMat,
) -> Result<ExtendedState> {
    if coeffs.nrows() != basis.len() || coeffs.ncols() != family.rank() {
        return Err(Error::InvalidInput(format!(
            "coefficients are {}x{} but basis/family need {}x{}",
            coeffs.nrows(),
            coeffs.ncols(),
            basis.len(),
            family.rank()
        )));
    }
    let mut state = ExtendedState::empty(basis.clone(), family.grid.clone())?;
    for (m, part) in state.parts.iter_mut().enumerate() {
        for (r, f) in family.fns.iter().enumerate() {
            let c = coeffs[[m, r]];
            if c.norm_sqr() > 0.0 {
                part.scaled_add(c, f);
            }
        }
    }
    Ok(state)
}

/// The closed family of spectral amplitudes an emitter network generates
/// from one pulse shape: indexing bit k of function r says whether the pair
/// scattered interactingly (1) or linearly (0) at nonlinear layer k.
#[derive(Debug, Clone)]
pub struct EmitterFamily {
    pub grid: SpectralGrid,
    pub tau: f64,
    pub detunings: Vec<f64>,
    pub fns: Vec<CMat>,
    /// gram[r, s] = ⟨f_r, f_s⟩ including the grid measure.
    pub gram: CMat,
}

impl EmitterFamily {
    pub fn new(grid: SpectralGrid, pulse: &CVec, tau: f64, detunings: &[f64]) -> Result<Self> {
        if pulse.len() != grid.size {
            return Err(Error::InvalidInput("pulse does not match the grid".into()));
        }
        if tau <= 0.0 {
            return Err(Error::InvalidInput("emitter lifetime must be positive".into()));
        }
        let m = grid.size;
        let mut seed = Array2::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                seed[[i, j]] = pulse[i] * pulse[j];
            }
        }
        let mut fns = vec![seed];
        for &delta in detunings {
            let t: Vec<C64> = (0..m).map(|k| transmission(grid.omega(k), delta, tau)).collect();
            let mut next = Vec::with_capacity(2 * fns.len());
            for f in &fns {
                let mut lin = f.clone();
                for ((r, c), v) in lin.indexed_iter_mut() {
                    *v *= t[r] * t[c];
                }
                next.push(lin);
            }
            for f in &fns {
                next.push(scatter_pair(&grid, f, delta, tau)?);
            }
            fns = next;
        }
        let r = fns.len();
        let mut gram = Array2::zeros((r, r));
        for a in 0..r {
            for b in 0..=a {
                let v = inner_pair(&grid, &fns[a], &fns[b]);
                gram[[a, b]] = v;
                gram[[b, a]] = v.conj();
            }
        }
        Ok(Self { grid, tau, detunings: detunings.to_vec(), fns, gram })
    }

    pub fn rank(&self) -> usize {
        self.fns.len()
    }
}

/// Propagates pattern coefficients over an emitter family: linear layers
/// mix patterns by their lifted amplitudes; each nonlinear layer routes
/// doubly occupied patterns to the interacting branch of the family.
pub fn propagate_low_rank(
    lifts: &[CMat],
    basis: &FockBasis,
    input: &CVec,
    family: &EmitterFamily,
) -> Result<CMat> {
    let nl_layers = family.detunings.len();
    if lifts.len() != nl_layers + 1 {
        return Err(Error::InvalidInput(format!(
            "{} lifted layers need {} nonlinear layers in the family, got {}",
            lifts.len(),
            lifts.len() - 1,
            nl_layers
        )));
    }
    let d = basis.len();
    if input.len() != d {
        return Err(Error::InvalidInput("input does not match the basis".into()));
    }
    let doubly: Vec<bool> =
        basis.states().iter().map(|occ| occ.iter().any(|&n| n == 2)).collect();
    let mut c = Array2::zeros((d, 1));
    for m in 0..d {
        c[[m, 0]] = input[m];
    }
    for (l, lift) in lifts.iter().enumerate() {
        c = lift.dot(&c);
        if l < nl_layers {
            let r = c.ncols();
            let mut next = Array2::zeros((d, 2 * r));
            for m in 0..d {
                let offset = if doubly[m] { r } else { 0 };
                for col in 0..r {
                    next[[m, col + offset]] = c[[m, col]];
                }
            }
            c = next;
        }
    }
    if c.ncols() != family.rank() {
        return Err(Error::InvalidInput("family rank does not match the layer count".into()));
    }
    Ok(c)
}

/// Density matrix of low-rank coefficients: ρ = C·Gᵀ·C†.
pub fn density_from_coeffs(coeffs: &CMat, family: &EmitterFamily) -> DensityMatrix {
    let mat = coeffs.dot(&family.gram.t()).dot(&dagger(coeffs));
    DensityMatrix { mat }
}

/// Fractional losses of every component class, plus the fibre/timing
/// parameters needed to convert a network layout into a transmissivity.
/// Lengths are km, times are ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub alpha_mzi: f64,
    pub alpha_switch: f64,
    pub alpha_ps: f64,
    pub alpha_chip: f64,
    /// Fractional loss per km of delay fibre.
    pub fiber_attenuation: f64,
    /// Propagation speed in the fibre, km per ns.
    pub group_velocity: f64,
    /// Time-bin duration in ns.
    pub tau_b: f64,
}

impl LossBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, a) in [
            ("alpha_mzi", self.alpha_mzi),
            ("alpha_switch", self.alpha_switch),
            ("alpha_ps", self.alpha_ps),
            ("alpha_chip", self.alpha_chip),
            ("fiber_attenuation", self.fiber_attenuation),
        ] {
            if !(0.0..1.0).contains(&a) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0, 1), got {a}")));
            }
        }
        if self.group_velocity <= 0.0 || self.tau_b <= 0.0 {
            return Err(Error::InvalidInput("group velocity and tau_b must be positive".into()));
        }
        Ok(())
    }

    /// A budget with no component loss at all.
    pub fn lossless(tau_b: f64) -> Self {
        Self {
            alpha_mzi: 0.0,
            alpha_switch: 0.0,
            alpha_ps: 0.0,
            alpha_chip: 0.0,
            fiber_attenuation: 0.0,
            group_velocity: GROUP_VELOCITY_KM_PER_NS,
            tau_b,
        }
    }

    /// Plausible component losses for an integrated platform; calibrate
    /// against an aggregate target before quoting rates.
    pub fn nominal(tau_b: f64) -> Self {
        Self {
            alpha_mzi: 0.03,
            alpha_switch: 0.03,
            alpha_ps: 0.01,
            alpha_chip: 0.05,
            // 0.2 dB/km standard telecom fibre.
            fiber_attenuation: 1.0 - 10f64.powf(-0.02),
            group_velocity: GROUP_VELOCITY_KM_PER_NS,
            tau_b,
        }
    }

    /// Scales every component in decibel space by `s` (s = 1 is identity).
    pub fn scaled(&self, s: f64) -> Self {
        let scale = |a: f64| 1.0 - (1.0 - a).powf(s);
        Self {
            alpha_mzi: scale(self.alpha_mzi),
            alpha_switch: scale(self.alpha_switch),
            alpha_ps: scale(self.alpha_ps),
            alpha_chip: scale(self.alpha_chip),
            fiber_attenuation: scale(self.fiber_attenuation),
            group_velocity: self.group_velocity,
            tau_b: self.tau_b,
        }
    }
}

/// MZI traversals per mode and linear layer.
pub fn mzi_traversals(modes: usize) -> usize {
    modes + 2 - (modes % 2)
}

/// Switch traversals per mode and linear layer; the layout needs at least
/// four modes.
pub fn switch_traversals(modes: usize) -> Result<usize> {
    if modes < 4 {
        return Err(Error::InvalidInput(format!(
            "switch count is defined for at least 4 modes, got {modes}"
        )));
    }
    Ok((modes - 4) / 2 + 6)
}

/// Delay fibre per linear layer, km.
pub fn linear_fiber_length(modes: usize, budget: &LossBudget) -> f64 {
    0.5 * ((modes + 1) * (modes + 2)) as f64 * budget.tau_b * budget.group_velocity
}

/// Total power transmissivity (1 − α) of a network under a loss budget.
pub fn transmissivity(spec: &NetworkSpec, budget: &LossBudget) -> Result<f64> {
    spec.validate()?;
    budget.validate()?;
    let n = spec.modes();
    let l = spec.num_layers();
    let omega_mzi = mzi_traversals(n) as f64;
    let omega_sw = switch_traversals(n)? as f64;
    let fiber_t = |km: f64| (1.0 - budget.fiber_attenuation).powf(km);
    let t_lin = (1.0 - budget.alpha_mzi).powf(omega_mzi)
        * (1.0 - budget.alpha_switch).powf(omega_sw)
        * (1.0 - budget.alpha_ps)
        * (1.0 - budget.alpha_chip).powf(2.0 * (omega_sw - 1.0))
        * fiber_t(linear_fiber_length(n, budget));
    let t_seg = fiber_t(spec.buffer as f64 * budget.tau_b * budget.group_velocity);
    Ok(t_lin.powi(l as i32) * t_seg.powi(l as i32 - 1))
}

/// Time bins a photon pair occupies the hardware: layers × (span + buffer).
pub fn protocol_steps(modes: usize, layers: usize, buffer: usize) -> usize {
    layers * (protocol_span(modes) + buffer)
}

/// Repetition rate r = η(1−α)/(n_t·τ_B) in Hz, with τ_B in ns.
pub fn operational_rate(eta: f64, alpha: f64, n_t: usize, tau_b: f64) -> Result<f64> {
    if n_t == 0 {
        return Err(Error::InvalidInput("a protocol needs at least one time step".into()));
    }
    if !(0.0..=1.0).contains(&alpha) || eta < 0.0 || tau_b <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "rate inputs out of range: eta {eta}, alpha {alpha}, tau_b {tau_b}"
        )));
    }
    Ok(eta * (1.0 - alpha) / (n_t as f64 * tau_b) * 1e9)
}

/// Scales a baseline budget in decibel space until the network's aggregate
/// loss hits `target_alpha`; returns the calibrated budget and the scale.
pub fn calibrate_budget(
    spec: &NetworkSpec,
    base: &LossBudget,
    target_alpha: f64,
) -> Result<(LossBudget, f64)> {
    if !(0.0..1.0).contains(&target_alpha) {
        return Err(Error::InvalidInput(format!(
            "target loss must lie in [0, 1), got {target_alpha}"
        )));
    }
    let alpha_at = |s: f64| -> Result<f64> { Ok(1.0 - transmissivity(spec, &base.scaled(s))?) };
    if target_alpha == 0.0 {
        return Ok((base.scaled(0.0), 0.0));
    }
    let mut hi = 1.0;
    while alpha_at(hi)? < target_alpha {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Numerical(
                "budget has no lossy components to scale toward the target".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if alpha_at(mid)? < target_alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok((base.scaled(s), s))
}

/// Knobs of an evaluation that are not part of the network itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Pairwise photon visibility V of the source.
    pub visibility: f64,
    /// Spectral grid size for emitter networks.
    pub grid_size: usize,
    /// Pulse duration for emitter networks (same unit as the lifetime).
    pub sigma_p: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { visibility: 1.0, grid_size: 256, sigma_p: 1.0 }
    }
}

/// Unnormalised output density matrix for every task input.
pub fn network_outputs(
    spec: &NetworkSpec,
    task: &LogicalTask,
    opts: &EvalOptions,
) -> Result<Vec<DensityMatrix>> {
    spec.validate()?;
    if task.modes != spec.modes() {
        return Err(Error::InvalidInput("task and network mode counts differ".into()));
    }
    let v = opts.visibility;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidInput(format!("visibility must lie in [0, 1], got {v}")));
    }
    let basis = FockBasis::new(spec.modes(), 2)?;
    match &spec.nonlinearity {
        Nonlinearity::Emitter { tau, detunings } => {
            if (v - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(
                    "emitter networks are evaluated with indistinguishable photons".into(),
                ));
            }
            let grid = SpectralGrid::for_pulse(opts.sigma_p, *tau, opts.grid_size)?;
            let pulse = gaussian_wavepacket(&grid, opts.sigma_p, 0.0);
            let family = EmitterFamily::new(grid, &pulse, *tau, detunings)?;
            let lifts: Vec<CMat> = spec
                .unitaries()?
                .iter()
                .map(|u| lift_unitary(u, &basis))
                .collect::<Result<_>>()?;
            (0..task.len())
                .map(|k| {
                    let c0 = task.input_vector(k, &basis)?;
                    let c = propagate_low_rank(&lifts, &basis, &c0, &family)?;
                    Ok(density_from_coeffs(&c, &family))
                })
                .collect()
        }
        Nonlinearity::None | Nonlinearity::Kerr { .. } => {
            let s = system_function(spec, &basis)?;
            let us = spec.unitaries()?;
            (0..task.len())
                .map(|k| {
                    let out = s.dot(&task.input_vector(k, &basis)?);
                    let mut rho = DensityMatrix::from_pure(&out);
                    if v < 1.0 {
                        // Photons offset in time never overlap inside a
                        // nonlinear site, so the distinguishable branch sees
                        // only the linear layers.
                        let dist = ordered_network_populations(
                            &us,
                            None,
                            &task.input_pairs[k],
                            &basis,
                        )?;
                        rho.mat = rho.mat.mapv(|z| z * v) + dist.mat.mapv(|z| z * (1.0 - v));
                    }
                    Ok(rho)
                })
                .collect()
        }
    }
}

fn target_fidelity(
    task: &LogicalTask,
    k: usize,
    basis: &FockBasis,
    rho: &DensityMatrix,
) -> Result<f64> {
    match &task.targets[k] {
        TargetState::Pure(t) => Ok(fidelity_to_pure(&rho.mat, t)),
        TargetState::Mixture(_) => uhlmann_fidelity(&task.target_density(k, basis), &rho.mat),
    }
}

/// Training objective per input and averaged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostSummary {
    /// Mean of 1 − fid_k/F_in.
    pub raw: f64,
    /// The raw mean scaled by the surviving fraction (1 − α).
    pub scaled: f64,
    pub per_input: Vec<f64>,
}

/// Cost of a network on a task: C_k = 1 − fid_k/F_in, averaged over inputs
/// and scaled by (1 − alpha).
pub fn cost(
    spec: &NetworkSpec,
    task: &LogicalTask,
    opts: &EvalOptions,
    alpha: f64,
) -> Result<CostSummary> {
    let outs = network_outputs(spec, task, opts)?;
    let basis = FockBasis::new(spec.modes(), 2)?;
    let f_in = input_fidelity(opts.visibility);
    let per_input: Vec<f64> = (0..task.len())
        .map(|k| Ok(1.0 - target_fidelity(task, k, &basis, &outs[k])? / f_in))
        .collect::<Result<_>>()?;
    let raw = per_input.iter().sum::<f64>() / per_input.len() as f64;
    Ok(CostSummary { raw, scaled: (1.0 - alpha) * raw, per_input })
}

/// Everything an evaluation run reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub task: String,
    #[serde(rename = "V")]
    pub visibility: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub eta: f64,
    #[serde(rename = "C_avg")]
    pub cost_avg: f64,
    #[serde(rename = "C_raw")]
    pub cost_raw: f64,
    pub alpha: f64,
    pub n_t: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub input_labels: Vec<String>,
    pub outcome_labels: Vec<String>,
    /// P(outcome | input, logical), one row per input.
    pub table: Vec<Vec<f64>>,
}

/// Runs a task through a network and reports fidelity, efficiency, cost,
/// loss, and rate. Fidelity is the mean conditional fidelity
/// (1/K)·Σ fid_k/η_k; efficiency is the mean logical-output probability.
pub fn evaluate(
    spec: &NetworkSpec,
    task: &LogicalTask,
    opts: &EvalOptions,
    budget: Option<&LossBudget>,
) -> Result<EvaluationReport> {
    let outs = network_outputs(spec, task, opts)?;
    let basis = FockBasis::new(spec.modes(), 2)?;
    let f_in = input_fidelity(opts.visibility);
    let mut fid_sum = 0.0;
    let mut eta_sum = 0.0;
    let mut cost_sum = 0.0;
    let mut table = Vec::with_capacity(task.len());
    for k in 0..task.len() {
        let pops = outs[k].populations();
        let eta_k: f64 = task.cb_patterns.iter().map(|&c| pops[c]).sum();
        if eta_k <= 1e-12 {
            return Err(Error::Numerical(format!(
                "input {k} produces no logical output to condition on"
            )));
        }
        let fid = target_fidelity(task, k, &basis, &outs[k])?;
        fid_sum += fid / eta_k;
        eta_sum += eta_k;
        cost_sum += 1.0 - fid / f_in;
        table.push(task.cb_patterns.iter().map(|&c| pops[c] / eta_k).collect());
    }
    let kf = task.len() as f64;
    let eta = eta_sum / kf;
    let alpha = match budget {
        Some(b) => 1.0 - transmissivity(spec, b)?,
        None => 0.0,
    };
    let n_t = protocol_steps(spec.modes(), spec.num_layers(), spec.buffer);
    let r = budget.map(|b| operational_rate(eta, alpha, n_t, b.tau_b)).transpose()?;
    Ok(EvaluationReport {
        task: task.name.clone(),
        visibility: opts.visibility,
        fidelity: fid_sum / kf,
        eta,
        cost_avg: (1.0 - alpha) * cost_sum / kf,
        cost_raw: cost_sum / kf,
        alpha,
        n_t,
        tau_b: budget.map(|b| b.tau_b),
        r,
        input_labels: task.input_labels.clone(),
        outcome_labels: task.cb_labels.clone(),
        table,
    })
}
