//! Logical task definitions: dual-rail gate encodings, input/target sets,
//! and measurement-outcome bookkeeping for evaluation and training.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fock::FockBasis;
use crate::linalg::{C64, CMat, CVec};
use crate::{Error, Result};

/// A logical target for one input: a pure state in the pair basis, or a
/// uniform statistical mixture over basis patterns.
#[derive(Debug, Clone)]
pub enum TargetState {
    Pure(CVec),
    Mixture(Vec<(usize, f64)>),
}

/// A gate or analyzer specification: photon-pair inputs, their targets, and
/// which output patterns count as logical.
#[derive(Debug, Clone)]
pub struct LogicalTask {
    pub name: String,
    pub modes: usize,
    /// Each input as a superposition of ordered mode pairs with amplitudes.
    pub input_pairs: Vec<Vec<((usize, usize), C64)>>,
    pub input_labels: Vec<String>,
    pub targets: Vec<TargetState>,
    /// Basis indices of the valid logical output patterns.
    pub cb_patterns: Vec<usize>,
    pub cb_labels: Vec<String>,
}

impl LogicalTask {
    pub fn len(&self) -> usize {
        self.input_pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_pairs.is_empty()
    }

    /// The k-th input as a vector over the two-photon basis.
    pub fn input_vector(&self, k: usize, basis: &FockBasis) -> Result<CVec> {
        if basis.modes != self.modes || basis.photons != 2 {
            return Err(Error::InvalidInput("basis does not match the task".into()));
        }
        let mut v = CVec::zeros(basis.len());
        for &((a, b), c) in &self.input_pairs[k] {
            let mut occ = vec![0usize; self.modes];
            occ[a] += 1;
            occ[b] += 1;
            let idx = basis
                .index_of(&occ)
                .ok_or_else(|| Error::InvalidInput("input pattern outside the basis".into()))?;
            // Same-mode creation gives the doubly occupied state an extra √2.
            let scale = if a == b { std::f64::consts::SQRT_2 } else { 1.0 };
            v[idx] += c * scale;
        }
        Ok(v)
    }

    /// The k-th target as a density matrix over the two-photon basis.
    pub fn target_density(&self, k: usize, basis: &FockBasis) -> CMat {
        match &self.targets[k] {
            TargetState::Pure(t) => {
                let mut m = Array2::zeros((basis.len(), basis.len()));
                for (i, a) in t.iter().enumerate() {
                    for (j, b) in t.iter().enumerate() {
                        m[[i, j]] = a * b.conj();
                    }
                }
                m
            }
            TargetState::Mixture(parts) => {
                let mut m = Array2::zeros((basis.len(), basis.len()));
                for &(idx, p) in parts {
                    m[[idx, idx]] = C64::new(p, 0.0);
                }
                m
            }
        }
    }
}

/// Index of the pattern with one photon in each of two distinct modes.
pub fn pair_pattern(basis: &FockBasis, a: usize, b: usize) -> usize {
    let mut occ = vec![0usize; basis.modes];
    occ[a] += 1;
    occ[b] += 1;
    basis.index_of(&occ).expect("pair pattern is in the basis")
}

fn pure_pattern(basis: &FockBasis, a: usize, b: usize) -> TargetState {
    let mut v = CVec::zeros(basis.len());
    v[pair_pattern(basis, a, b)] = C64::new(1.0, 0.0);
    TargetState::Pure(v)
}

/// Embeds a real two-mode coupler of transmissivity `eta` at rows/columns
/// (x, y): x keeps √η while y picks up the −√η sign.
fn couple(u: &mut CMat, x: usize, y: usize, eta: f64) {
    let n = u.nrows();
    let t = eta.sqrt();
    let r = (1.0 - eta).sqrt();
    let mut block = Array2::eye(n).mapv(|v: f64| C64::new(v, 0.0));
    block[[x, x]] = C64::new(t, 0.0);
    block[[x, y]] = C64::new(r, 0.0);
    block[[y, x]] = C64::new(r, 0.0);
    block[[y, y]] = C64::new(-t, 0.0);
    *u = block.dot(u);
}

/// Six-mode post-selected CNOT: control rails (1, 2), target rails (3, 4),
/// dump modes 0 and 5. Succeeds with probability 1/9 on coincidence
/// detection in the rails; every truth-table amplitude is +1/3.
pub fn linear_cnot_unitary() -> CMat {
    let mut u = Array2::eye(6).mapv(|v: f64| C64::new(v, 0.0));
    couple(&mut u, 3, 4, 0.5);
    couple(&mut u, 2, 3, 1.0 / 3.0);
    couple(&mut u, 0, 1, 1.0 / 3.0);
    couple(&mut u, 5, 4, 1.0 / 3.0);
    couple(&mut u, 3, 4, 0.5);
    u
}

/// Dual-rail CNOT task on the rails of `cnot_rails(modes)`.
///
/// `modes = 6` matches the post-selected linear gate layout; `modes = 4`
/// uses all modes as rails (deterministic gates).
pub fn cnot_task(modes: usize) -> Result<LogicalTask> {
    let (c0, c1, t0, t1) = cnot_rails(modes)?;
    let basis = FockBasis::new(modes, 2)?;
    let logical = [(c0, t0), (c0, t1), (c1, t0), (c1, t1)];
    let labels = ["00", "01", "10", "11"];
    // Control high flips the target rail.
    let flipped = [(c0, t0), (c0, t1), (c1, t1), (c1, t0)];
    Ok(LogicalTask {
        name: format!("cnot{modes}"),
        modes,
        input_pairs: logical
            .iter()
            .map(|&(a, b)| vec![((a, b), C64::new(1.0, 0.0))])
            .collect(),
        input_labels: labels.iter().map(|s| s.to_string()).collect(),
        targets: flipped.iter().map(|&(a, b)| pure_pattern(&basis, a, b)).collect(),
        cb_patterns: logical.iter().map(|&(a, b)| pair_pattern(&basis, a, b)).collect(),
        cb_labels: labels.iter().map(|s| s.to_string()).collect(),
    })
}

/// Rail assignment for the CNOT encodings.
pub fn cnot_rails(modes: usize) -> Result<(usize, usize, usize, usize)> {
    match modes {
        6 => Ok((1, 2, 3, 4)),
        4 => Ok((0, 1, 2, 3)),
        _ => Err(Error::InvalidInput(format!("no CNOT rail layout for {modes} modes"))),
    }
}

pub const BELL_LABELS: [&str; 4] = ["phi+", "phi-", "psi+", "psi-"];

/// The four maximally entangled two-qubit states on dual rails (0,1)/(2,3),
/// as ordered-pair superpositions.
pub fn bell_pairs() -> Vec<Vec<((usize, usize), C64)>> {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    vec![
        vec![((0, 2), h), ((1, 3), h)],
        vec![((0, 2), h), ((1, 3), -h)],
        vec![((0, 3), h), ((1, 2), h)],
        vec![((0, 3), h), ((1, 2), -h)],
    ]
}

/// Which coincidence outcomes announce which entangled input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeAssignment {
    /// Mode pairs (i < j) assigned to each of the four entangled inputs.
    pub per_state: Vec<Vec<(usize, usize)>>,
    pub seed: u64,
}

/// Distributes ⌊C(N,2)/4⌋ of the two-mode coincidence outcomes to each
/// entangled input, uniformly at random; the remainder stay non-logical.
pub fn assign_outcomes(modes: usize, seed: u64) -> Result<OutcomeAssignment> {
    if modes < 4 {
        return Err(Error::InvalidInput(format!(
            "outcome assignment needs at least 4 modes, got {modes}"
        )));
    }
    let mut outcomes: Vec<(usize, usize)> = Vec::new();
    for i in 0..modes {
        for j in (i + 1)..modes {
            outcomes.push((i, j));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    outcomes.shuffle(&mut rng);
    let share = outcomes.len() / 4;
    let per_state = (0..4).map(|k| {
        let mut set = outcomes[k * share..(k + 1) * share].to_vec();
        set.sort_unstable();
        set
    });
    Ok(OutcomeAssignment { per_state: per_state.collect(), seed })
}

/// Entangled-state analyzer task: the four Bell inputs on the first four
/// modes, each targeting a uniform mixture over its assigned outcomes.
pub fn bsa_task(modes: usize, assignment: &OutcomeAssignment) -> Result<LogicalTask> {
    if modes < 4 {
        return Err(Error::InvalidInput("analyzer needs at least 4 modes".into()));
    }
    if assignment.per_state.len() != 4 {
        return Err(Error::InvalidInput("assignment must cover the four entangled inputs".into()));
    }
    let basis = FockBasis::new(modes, 2)?;
    let mut targets = Vec::new();
    let mut cb = Vec::new();
    let mut cb_labels = Vec::new();
    for (state, label) in assignment.per_state.iter().zip(BELL_LABELS) {
        if state.is_empty() {
            return Err(Error::InvalidInput("every entangled input needs an outcome".into()));
        }
        let p = 1.0 / state.len() as f64;
        let mut parts = Vec::new();
        for &(a, b) in state {
            let idx = pair_pattern(&basis, a, b);
            parts.push((idx, p));
            cb.push(idx);
            cb_labels.push(format!("{label}:({a},{b})"));
        }
        targets.push(TargetState::Mixture(parts));
    }
    Ok(LogicalTask {
        name: format!("bsa{modes}"),
        modes,
        input_pairs: bell_pairs(),
        input_labels: BELL_LABELS.iter().map(|s| s.to_string()).collect(),
        targets,
        cb_patterns: cb,
        cb_labels,
    })
}
