//! Compiles a rectangular mesh into a control program for the two-loop
//! time-bin interferometer, and simulates that program at amplitude level.
//!
//! The machine has one physical MZI joining two fiber loops. The top loop
//! delays p = ⌈N/2⌉ time bins. The bottom loop delays p+1 bins, split by the
//! in/out coupling switch into an MZI→switch segment of 2 bins and a
//! switch→MZI segment of p−1 bins. Modes live in time bins; every step the
//! MZI acts on the pair of bins arriving from the two loops, and the switch
//! either passes the bottom-loop bin through, couples a new mode in, or
//! couples a finished mode out.
//!
//! The compiler lays the mesh columns onto this pipeline so that every mode
//! spends exactly (N+1)(N+2)/2 bins inside a layer, modes exit in the order
//! they entered, and consecutive layers are separated by a configurable
//! number of bins spent in the outer loop. Compilation replays the whole
//! program symbolically (tracking which mode occupies which bin) and rejects
//! any internally inconsistent schedule, so a returned [`Schedule`] is
//! guaranteed collision-free.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::linalg::{C64, CMat};
use crate::mesh::{mzi, MeshPlan};
use crate::{Error, Result};

/// Where a coupled mode comes from or goes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Port {
    /// The external input/output bus.
    Bus,
    /// The outer recirculation loop between layers.
    Outer,
}

/// Setting of the loop-joining MZI during one time bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MziOp {
    /// Straight through (the default): top stays top, bottom stays bottom.
    Bar,
    /// Swap the two bins (pure routing).
    Cross,
    /// Apply the mesh block T(θ, φ) for the rail pair (mode, mode+1).
    Compute {
        layer: usize,
        mode: usize,
        theta: f64,
        phi: f64,
        /// True when the top arm carries rail mode+1 at the input.
        top_is_max: bool,
        /// True when rail `mode` leaves through the top arm.
        min_exits_top: bool,
    },
}

/// Setting of the coupling switch during one time bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SwitchOp {
    /// Bottom-loop content passes through (the default).
    Closed,
    CoupleIn {
        layer: usize,
        mode: usize,
        from: Port,
    },
    CoupleOut {
        layer: usize,
        mode: usize,
        to: Port,
    },
    /// Couple one mode out and another in during the same bin.
    CoupleThrough {
        out_layer: usize,
        out_mode: usize,
        to: Port,
        in_layer: usize,
        in_mode: usize,
        from: Port,
    },
}

/// One time bin of the compiled program, with occupancy annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeStep {
    pub t: usize,
    pub mzi: MziOp,
    pub switch: SwitchOp,
    /// (layer, rail) arriving at the MZI from the top loop this bin.
    pub top: Option<(usize, usize)>,
    /// (layer, rail) arriving at the MZI from the bottom loop this bin.
    pub bottom: Option<(usize, usize)>,
}

/// Compiled control program for one or more mesh layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub modes: usize,
    pub layers: usize,
    /// Bins spent in the outer loop between consecutive layers.
    pub gap: usize,
    /// Top-loop delay p = ⌈N/2⌉.
    pub top_delay: usize,
    /// Bottom-loop delay from MZI to switch (always 2 bins).
    pub mzi_to_switch: usize,
    /// Bottom-loop delay from switch to MZI (p−1 bins).
    pub switch_to_mzi: usize,
    /// Bins a mode spends inside one layer: (N+1)(N+2)/2.
    pub span: usize,
    /// Output phase per mode, per layer.
    pub delta: Vec<Vec<f64>>,
    pub steps: Vec<TimeStep>,
}

/// Bins a mode spends inside one layer of an N-mode mesh.
pub fn protocol_span(modes: usize) -> usize {
    (modes + 1) * (modes + 2) / 2
}

impl Schedule {
    /// Total number of time bins in the program.
    pub fn total_steps(&self) -> usize {
        self.steps.len()
    }

    /// Bins from the first mode entering to the last layer's first exit,
    /// i.e. the latency of the first output.
    pub fn first_output_latency(&self) -> usize {
        (self.layers - 1) * (self.span + self.gap) + self.span
    }
}

/// Compiles a single mesh layer (no outer-loop traversal).
pub fn compile(plan: &MeshPlan) -> Result<Schedule> {
    compile_layers(std::slice::from_ref(plan), 0)
}

/// Compiles consecutive mesh layers separated by `gap` outer-loop bins.
pub fn compile_layers(plans: &[MeshPlan], gap: usize) -> Result<Schedule> {
    if plans.is_empty() {
        return Err(Error::InvalidInput("at least one mesh layer is required".into()));
    }
    let n = plans[0].modes;
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "the two-loop pipeline needs at least 3 modes, got {n}"
        )));
    }
    if plans.iter().any(|p| p.modes != n) {
        return Err(Error::InvalidInput("all layers must have the same mode count".into()));
    }
    let layers = plans.len();
    let p = n.div_ceil(2);
    let chi = protocol_span(n);
    let period = chi + gap;
    let total = (layers - 1) * period + chi + n;

    let mut mzi_events: BTreeMap<usize, MziOp> = BTreeMap::new();
    let mut s2_events: BTreeMap<usize, SwitchOp> = BTreeMap::new();

    for (li, plan) in plans.iter().enumerate() {
        let layer = li + 1;
        let off = li * period;
        let cols = brick_wall_columns(plan)?;
        let odd_rails = p; // rails 1,3,…
        let even_rails = n - p; // rails 2,4,…
        let from = if layer == 1 { Port::Bus } else { Port::Outer };
        let to = if layer == layers { Port::Bus } else { Port::Outer };

        // Couple-in: odd rails first, then even rails.
        for k in 0..odd_rails {
            insert_s2(&mut s2_events, off + k, SwitchOp::CoupleIn { layer, mode: 2 * k + 1, from })?;
        }
        for k in 0..even_rails {
            insert_s2(&mut s2_events, off + p + k, SwitchOp::CoupleIn { layer, mode: 2 * k + 2, from })?;
        }
        // Odd rails cross up into the top loop on first arrival at the MZI.
        for k in 0..odd_rails {
            insert_mzi(&mut mzi_events, off + p - 1 + k, MziOp::Cross)?;
        }
        // Interferometer columns.
        let round = 2 * p + 1;
        let odd_cols = n.div_ceil(2);
        let even_cols = n / 2;
        for r in 0..odd_cols {
            let col = 2 * r + 1;
            let final_col = col == n;
            for (k, &(mode, theta, phi)) in cols[col - 1].iter().enumerate() {
                debug_assert_eq!(mode, 2 * k + 1);
                insert_mzi(
                    &mut mzi_events,
                    off + 2 * p - 1 + r * round + k,
                    MziOp::Compute {
                        layer,
                        mode,
                        theta,
                        phi,
                        top_is_max: col != 1,
                        min_exits_top: !final_col,
                    },
                )?;
            }
            // First rail parks in the bottom loop after each odd column. For
            // an odd mode count the reversed final column routes it out
            // directly, so the last park is skipped.
            if n % 2 == 0 || r + 1 < odd_cols {
                insert_mzi(&mut mzi_events, off + 3 * p - 1 + r * round, MziOp::Cross)?;
            }
        }
        for r in 0..even_cols {
            let col = 2 * r + 2;
            for (k, &(mode, theta, phi)) in cols[col - 1].iter().enumerate() {
                debug_assert_eq!(mode, 2 * k + 2);
                insert_mzi(
                    &mut mzi_events,
                    off + 3 * p + r * round + k,
                    MziOp::Compute { layer, mode, theta, phi, top_is_max: true, min_exits_top: true },
                )?;
            }
        }
        if n % 2 == 0 {
            // Last rail parks in the top loop after each odd column.
            for r in 0..odd_cols {
                insert_mzi(&mut mzi_events, off + 4 * p - 1 + r * round, MziOp::Cross)?;
            }
        } else {
            // Last rail re-enters the top loop between even columns.
            for r in 1..even_cols {
                insert_mzi(&mut mzi_events, off + 3 * p - 2 + r * round, MziOp::Cross)?;
            }
        }
        // Couple-out in entry order; even rails cross down two bins earlier.
        for k in 0..odd_rails {
            insert_s2(&mut s2_events, off + chi + k, SwitchOp::CoupleOut { layer, mode: 2 * k + 1, to })?;
        }
        for k in 0..even_rails {
            insert_mzi(&mut mzi_events, off + chi + p + k - 2, MziOp::Cross)?;
            insert_s2(&mut s2_events, off + chi + p + k, SwitchOp::CoupleOut { layer, mode: 2 * k + 2, to })?;
        }
    }

    let mut steps: Vec<TimeStep> = (0..total)
        .map(|t| TimeStep {
            t,
            mzi: mzi_events.get(&t).copied().unwrap_or(MziOp::Bar),
            switch: s2_events.get(&t).copied().unwrap_or(SwitchOp::Closed),
            top: None,
            bottom: None,
        })
        .collect();

    let delta = plans.iter().map(|p| p.delta.clone()).collect();
    let mut schedule = Schedule {
        modes: n,
        layers,
        gap,
        top_delay: p,
        mzi_to_switch: 2,
        switch_to_mzi: p - 1,
        span: chi,
        delta,
        steps,
    };
    let annotations = verify_labels(&schedule)?;
    steps = schedule.steps;
    for (step, (top, bottom)) in steps.iter_mut().zip(annotations) {
        step.top = top;
        step.bottom = bottom;
    }
    schedule.steps = steps;
    Ok(schedule)
}

fn insert_mzi(map: &mut BTreeMap<usize, MziOp>, t: usize, op: MziOp) -> Result<()> {
    match map.get(&t) {
        None => {
            map.insert(t, op);
            Ok(())
        }
        Some(MziOp::Cross) if matches!(op, MziOp::Cross) => Ok(()),
        Some(prev) => Err(Error::InvalidInput(format!(
            "MZI conflict at bin {t}: {prev:?} vs {op:?}; increase the layer gap"
        ))),
    }
}

fn insert_s2(map: &mut BTreeMap<usize, SwitchOp>, t: usize, op: SwitchOp) -> Result<()> {
    let merged = match (map.get(&t).copied(), op) {
        (None, op) => op,
        (
            Some(SwitchOp::CoupleOut { layer: ol, mode: om, to }),
            SwitchOp::CoupleIn { layer, mode, from },
        ) => SwitchOp::CoupleThrough {
            out_layer: ol,
            out_mode: om,
            to,
            in_layer: layer,
            in_mode: mode,
            from,
        },
        (
            Some(SwitchOp::CoupleIn { layer, mode, from }),
            SwitchOp::CoupleOut { layer: ol, mode: om, to },
        ) => SwitchOp::CoupleThrough {
            out_layer: ol,
            out_mode: om,
            to,
            in_layer: layer,
            in_mode: mode,
            from,
        },
        (Some(prev), op) => {
            return Err(Error::InvalidInput(format!(
                "switch conflict at bin {t}: {prev:?} vs {op:?}; increase the layer gap"
            )))
        }
    };
    map.insert(t, merged);
    Ok(())
}

/// Groups a plan's placements by column and checks it is the full brick wall.
fn brick_wall_columns(plan: &MeshPlan) -> Result<Vec<Vec<(usize, f64, f64)>>> {
    let n = plan.modes;
    if plan.delta.len() != n {
        return Err(Error::InvalidInput("plan output phases do not match the mode count".into()));
    }
    let mut cols: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); n];
    for p in &plan.placements {
        if p.column == 0 || p.column > n || p.mode == 0 || p.mode >= n {
            return Err(Error::InvalidInput(format!(
                "placement at column {} arm {} is outside the {}-mode brick wall",
                p.column, p.mode, n
            )));
        }
        cols[p.column - 1].push((p.mode, p.theta, p.phi));
    }
    for (ci, col) in cols.iter_mut().enumerate() {
        let c = ci + 1;
        col.sort_by_key(|&(m, _, _)| m);
        let expect: Vec<usize> = (1..n).filter(|m| m % 2 == c % 2).collect();
        let got: Vec<usize> = col.iter().map(|&(m, _, _)| m).collect();
        if got != expect {
            return Err(Error::InvalidInput(format!(
                "column {c} holds arms {got:?}, expected {expect:?}; the plan must be a full \
                 rectangular mesh (pad with bar placements if needed)"
            )));
        }
    }
    Ok(cols)
}

/// Replays the program tracking which (layer, rail) occupies each bin.
///
/// Checks every compute event sees exactly its rail pair in the expected
/// orientation, couple-ins land in empty bins, couple-outs carry the right
/// rail, every mode's dwell time inside a layer is exactly the protocol span,
/// and modes leave in the order they entered. Returns per-step MZI occupancy.
type Label = (usize, usize);

fn verify_labels(schedule: &Schedule) -> Result<Vec<(Option<Label>, Option<Label>)>> {
    let n = schedule.modes;
    let p = schedule.top_delay;
    let mut top: Vec<Option<Label>> = vec![None; p];
    let mut seg1: Vec<Option<Label>> = vec![None; schedule.mzi_to_switch];
    let mut seg2: Vec<Option<Label>> = vec![None; schedule.switch_to_mzi];
    let mut outer: BTreeMap<usize, Label> = BTreeMap::new();
    let mut entry_time: BTreeMap<Label, usize> = BTreeMap::new();
    let mut exits: Vec<(Label, usize)> = Vec::new();
    let mut annotations = Vec::with_capacity(schedule.steps.len());
    let internal = |t: usize, msg: String| Error::Numerical(format!("schedule bin {t}: {msg}"));

    for step in &schedule.steps {
        let t = step.t;
        let top_in = top.remove(0);
        let bot_in = seg2.remove(0);
        annotations.push((top_in, bot_in));
        let (top_out, bot_out) = match step.mzi {
            MziOp::Bar => (top_in, bot_in),
            MziOp::Cross => (bot_in, top_in),
            MziOp::Compute { layer, mode, top_is_max, min_exits_top, .. } => {
                let want_top = if top_is_max { mode + 1 } else { mode };
                let want_bot = if top_is_max { mode } else { mode + 1 };
                if top_in != Some((layer, want_top)) || bot_in != Some((layer, want_bot)) {
                    return Err(internal(
                        t,
                        format!(
                            "compute on rails ({mode},{}) found top={top_in:?} bottom={bot_in:?}",
                            mode + 1
                        ),
                    ));
                }
                let min = Some((layer, mode));
                let max = Some((layer, mode + 1));
                if min_exits_top { (min, max) } else { (max, min) }
            }
        };
        top.push(top_out);
        let at_switch = seg1.remove(0);
        seg1.push(bot_out);
        let passed = match step.switch {
            SwitchOp::Closed => at_switch,
            SwitchOp::CoupleIn { layer, mode, from } => {
                if at_switch.is_some() {
                    return Err(internal(t, format!("couple-in over occupied bin {at_switch:?}")));
                }
                take_incoming(&mut outer, &mut entry_time, t, layer, mode, from)?
            }
            SwitchOp::CoupleOut { layer, mode, to } => {
                release(at_switch, &mut outer, &mut exits, &entry_time, schedule, t, layer, mode, to)?;
                None
            }
            SwitchOp::CoupleThrough { out_layer, out_mode, to, in_layer, in_mode, from } => {
                release(at_switch, &mut outer, &mut exits, &entry_time, schedule, t, out_layer, out_mode, to)?;
                take_incoming(&mut outer, &mut entry_time, t, in_layer, in_mode, from)?
            }
        };
        seg2.push(passed);
    }

    if top.iter().chain(&seg1).chain(&seg2).any(|s| s.is_some()) || !outer.is_empty() {
        return Err(Error::Numerical("schedule ended with modes still circulating".into()));
    }
    // Exit order must equal entry order, layer by layer.
    let mut sorted = exits.clone();
    sorted.sort_by_key(|&(label, _)| entry_time[&label]);
    if sorted != exits {
        return Err(Error::Numerical("modes exit out of order".into()));
    }
    let expected = schedule.layers * n;
    if exits.len() != expected {
        return Err(Error::Numerical(format!(
            "{} exits recorded, expected {expected}",
            exits.len()
        )));
    }
    Ok(annotations)
}

fn take_incoming(
    outer: &mut BTreeMap<usize, Label>,
    entry_time: &mut BTreeMap<Label, usize>,
    t: usize,
    layer: usize,
    mode: usize,
    from: Port,
) -> Result<Option<Label>> {
    if from == Port::Outer && outer.remove(&t).is_none() {
        return Err(Error::Numerical(format!(
            "schedule bin {t}: couple-in expected a mode arriving from the outer loop"
        )));
    }
    let label = (layer, mode);
    entry_time.insert(label, t);
    Ok(Some(label))
}

#[allow(clippy::too_many_arguments)]
fn release(
    at_switch: Option<Label>,
    outer: &mut BTreeMap<usize, Label>,
    exits: &mut Vec<(Label, usize)>,
    entry_time: &BTreeMap<Label, usize>,
    schedule: &Schedule,
    t: usize,
    layer: usize,
    mode: usize,
    to: Port,
) -> Result<()> {
    let label = (layer, mode);
    if at_switch != Some(label) {
        return Err(Error::Numerical(format!(
            "schedule bin {t}: couple-out of {label:?} found {at_switch:?}"
        )));
    }
    let entered = entry_time[&label];
    if t - entered != schedule.span {
        return Err(Error::Numerical(format!(
            "schedule bin {t}: {label:?} dwelt {} bins, expected {}",
            t - entered,
            schedule.span
        )));
    }
    if to == Port::Outer {
        outer.insert(t + schedule.gap, label);
    }
    exits.push((label, t));
    Ok(())
}

/// Propagates single-photon amplitudes through the compiled program.
///
/// Returns the N×N matrix taking bus inputs (columns) to bus outputs (rows);
/// for an L-layer schedule this equals U_L ⋯ U_1 of the compiled plans.
pub fn simulate_single_photons(schedule: &Schedule) -> Result<CMat> {
    let n = schedule.modes;
    let zero = || vec![C64::new(0.0, 0.0); n];
    let is_vacuum = |v: &Vec<C64>| v.iter().all(|z| z.norm() < 1e-9);
    let mut top: Vec<Vec<C64>> = (0..schedule.top_delay).map(|_| zero()).collect();
    let mut seg1: Vec<Vec<C64>> = (0..schedule.mzi_to_switch).map(|_| zero()).collect();
    let mut seg2: Vec<Vec<C64>> = (0..schedule.switch_to_mzi).map(|_| zero()).collect();
    let mut outer: BTreeMap<usize, Vec<C64>> = BTreeMap::new();
    let mut out = CMat::zeros((n, n));

    for step in &schedule.steps {
        let t = step.t;
        let top_in = top.remove(0);
        let bot_in = seg2.remove(0);
        let (top_out, bot_out) = match step.mzi {
            MziOp::Bar => (top_in, bot_in),
            MziOp::Cross => (bot_in, top_in),
            MziOp::Compute { theta, phi, top_is_max, min_exits_top, .. } => {
                let t2 = mzi(theta, phi);
                let (a_min, a_max) = if top_is_max { (bot_in, top_in) } else { (top_in, bot_in) };
                let mut b_min = zero();
                let mut b_max = zero();
                for i in 0..n {
                    b_min[i] = t2[[0, 0]] * a_min[i] + t2[[0, 1]] * a_max[i];
                    b_max[i] = t2[[1, 0]] * a_min[i] + t2[[1, 1]] * a_max[i];
                }
                if min_exits_top { (b_min, b_max) } else { (b_max, b_min) }
            }
        };
        top.push(top_out);
        let at_switch = seg1.remove(0);
        seg1.push(bot_out);
        let passed = match step.switch {
            SwitchOp::Closed => at_switch,
            SwitchOp::CoupleIn { layer, mode, from } => {
                if !is_vacuum(&at_switch) {
                    return Err(Error::Numerical(format!(
                        "bin {t}: couple-in collided with residual amplitude"
                    )));
                }
                inject(&mut outer, t, n, layer, mode, from)
            }
            SwitchOp::CoupleOut { layer, mode, to } => {
                collect(at_switch, &mut outer, &mut out, schedule, t, layer, mode, to);
                zero()
            }
            SwitchOp::CoupleThrough { out_layer, out_mode, to, in_layer, in_mode, from } => {
                collect(at_switch, &mut outer, &mut out, schedule, t, out_layer, out_mode, to);
                inject(&mut outer, t, n, in_layer, in_mode, from)
            }
        };
        seg2.push(passed);
    }
    Ok(out)
}

fn inject(
    outer: &mut BTreeMap<usize, Vec<C64>>,
    t: usize,
    n: usize,
    _layer: usize,
    mode: usize,
    from: Port,
) -> Vec<C64> {
    match from {
        Port::Bus => {
            let mut v = vec![C64::new(0.0, 0.0); n];
            v[mode - 1] = C64::new(1.0, 0.0);
            v
        }
        Port::Outer => outer.remove(&t).expect("verified schedule has an outer arrival"),
    }
}

fn collect(
    amp: Vec<C64>,
    outer: &mut BTreeMap<usize, Vec<C64>>,
    out: &mut CMat,
    schedule: &Schedule,
    t: usize,
    layer: usize,
    mode: usize,
    to: Port,
) {
    let phase = C64::from_polar(1.0, schedule.delta[layer - 1][mode - 1]);
    let shifted: Vec<C64> = amp.into_iter().map(|z| z * phase).collect();
    match to {
        Port::Bus => {
            for (k, z) in shifted.iter().enumerate() {
                out[[mode - 1, k]] = *z;
            }
        }
        Port::Outer => {
            outer.insert(t + schedule.gap, shifted);
        }
    }
}

/// One row of the human-readable control table.
#[derive(Debug, Clone, Serialize)]
pub struct ControlRow {
    pub t: usize,
    pub mzi: String,
    pub theta: Option<f64>,
    pub phi: Option<f64>,
    pub switch: String,
    pub ps: Option<f64>,
    pub top: String,
    pub bottom: String,
}

/// Renders the schedule as one row per time bin.
pub fn control_table(schedule: &Schedule) -> Vec<ControlRow> {
    let fmt_label = |l: &Option<(usize, usize)>| match l {
        Some((layer, rail)) => {
            if schedule.layers == 1 {
                format!("m{rail}")
            } else {
                format!("L{layer}:m{rail}")
            }
        }
        None => "-".into(),
    };
    schedule
        .steps
        .iter()
        .map(|s| {
            let (mzi, theta, phi) = match s.mzi {
                MziOp::Bar => ("bar".to_string(), None, None),
                MziOp::Cross => ("cross".to_string(), None, None),
                MziOp::Compute { layer, mode, theta, phi, .. } => {
                    let name = if schedule.layers == 1 {
                        format!("T({},{})", mode, mode + 1)
                    } else {
                        format!("L{layer}:T({},{})", mode, mode + 1)
                    };
                    (name, Some(theta), Some(phi))
                }
            };
            let (switch, ps) = match s.switch {
                SwitchOp::Closed => ("closed".to_string(), None),
                SwitchOp::CoupleIn { layer, mode, from } => {
                    (format!("in L{layer}:m{mode} ({from:?})"), None)
                }
                SwitchOp::CoupleOut { layer, mode, to } => (
                    format!("out L{layer}:m{mode} ({to:?})"),
                    Some(schedule.delta[layer - 1][mode - 1]),
                ),
                SwitchOp::CoupleThrough { out_layer, out_mode, to, in_layer, in_mode, from } => (
                    format!(
                        "out L{out_layer}:m{out_mode} ({to:?}) + in L{in_layer}:m{in_mode} ({from:?})"
                    ),
                    Some(schedule.delta[out_layer - 1][out_mode - 1]),
                ),
            };
            ControlRow {
                t: s.t,
                mzi,
                theta,
                phi,
                switch,
                ps,
                top: fmt_label(&s.top),
                bottom: fmt_label(&s.bottom),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_unitary_seeded;
    use crate::mesh::decompose;

    fn max_entry_diff(a: &CMat, b: &CMat) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn span_formula() {
        assert_eq!(protocol_span(3), 10);
        assert_eq!(protocol_span(4), 15);
        assert_eq!(protocol_span(5), 21);
        assert_eq!(protocol_span(6), 28, "six-mode span");
    }

    #[test]
    fn rejects_small_meshes() {
        let u = haar_unitary_seeded(2, 1);
        let plan = decompose(&u).unwrap();
        assert!(compile(&plan).is_err(), "two-mode meshes cannot be pipelined");
    }

    #[test]
    fn six_mode_anchor_timeline() {
        let u = haar_unitary_seeded(6, 60);
        let plan = decompose(&u).unwrap();
        let s = compile(&plan).unwrap();
        assert_eq!(s.top_delay, 3);
        assert_eq!(s.switch_to_mzi, 2);
        assert_eq!(s.total_steps(), 34, "28-bin span plus 6 exits");
        // First column acts at bins 5..7, the first-rail park swap at 8,
        // second column at 9..10, the last-rail park swap at 11.
        for (t, want_pair) in [(5, 1), (6, 3), (7, 5)] {
            match s.steps[t].mzi {
                MziOp::Compute { mode, top_is_max, .. } => {
                    assert_eq!(mode, want_pair, "first column pair at bin {t}");
                    assert!(!top_is_max, "first column arrives with the lower rail on top");
                }
                ref other => panic!("bin {t} should compute, found {other:?}"),
            }
        }
        assert_eq!(s.steps[8].mzi, MziOp::Cross, "first-rail park at bin 8");
        match s.steps[9].mzi {
            MziOp::Compute { mode, top_is_max, .. } => {
                assert_eq!(mode, 2);
                assert!(top_is_max, "later columns arrive with the higher rail on top");
            }
            ref other => panic!("bin 9 should compute, found {other:?}"),
        }
        assert_eq!(s.steps[11].mzi, MziOp::Cross, "last-rail park at bin 11");
        // Outputs leave at bins 28..33 in entry order (odd rails first).
        let want_out = [(28, 1), (29, 3), (30, 5), (31, 2), (32, 4), (33, 6)];
        for (t, mode) in want_out {
            match s.steps[t].switch {
                SwitchOp::CoupleOut { mode: m, to: Port::Bus, .. } => {
                    assert_eq!(m, mode, "exit order at bin {t}")
                }
                ref other => panic!("bin {t} should couple out, found {other:?}"),
            }
        }
    }

    #[test]
    fn single_layer_reproduces_the_unitary() {
        for n in 3..=7 {
            let u = haar_unitary_seeded(n, 200 + n as u64);
            let plan = decompose(&u).unwrap();
            let s = compile(&plan).unwrap();
            let m = simulate_single_photons(&s).unwrap();
            let err = max_entry_diff(&m, &u);
            assert!(err < 1e-10, "pipeline error {err:.3e} for N={n}");
        }
    }

    #[test]
    fn two_layers_compose_with_gap() {
        let n = 4;
        let u1 = haar_unitary_seeded(n, 41);
        let u2 = haar_unitary_seeded(n, 42);
        let plans = [decompose(&u1).unwrap(), decompose(&u2).unwrap()];
        for gap in [0usize, 1, 3, 40] {
            let s = compile_layers(&plans, gap).unwrap();
            assert_eq!(s.total_steps(), 2 * 15 + gap + n, "program length at gap {gap}");
            assert_eq!(s.first_output_latency(), 30 + gap);
            let m = simulate_single_photons(&s).unwrap();
            let want = u2.dot(&u1);
            let err = max_entry_diff(&m, &want);
            assert!(err < 1e-10, "two-layer error {err:.3e} at gap {gap}");
        }
    }

    #[test]
    fn three_layers_of_five_modes() {
        let n = 5;
        let plans: Vec<MeshPlan> = (0..3)
            .map(|i| decompose(&haar_unitary_seeded(n, 70 + i)).unwrap())
            .collect();
        let s = compile_layers(&plans, 2).unwrap();
        let m = simulate_single_photons(&s).unwrap();
        let want = haar_unitary_seeded(n, 72)
            .dot(&haar_unitary_seeded(n, 71))
            .dot(&haar_unitary_seeded(n, 70));
        let err = max_entry_diff(&m, &want);
        assert!(err < 1e-10, "three-layer composition error {err:.3e}");
    }

    #[test]
    fn control_table_covers_every_bin() {
        let u = haar_unitary_seeded(4, 90);
        let plan = decompose(&u).unwrap();
        let s = compile(&plan).unwrap();
        let rows = control_table(&s);
        assert_eq!(rows.len(), s.total_steps());
        assert!(rows.iter().any(|r| r.mzi.starts_with("T(")), "table must show compute bins");
        assert!(rows.iter().any(|r| r.ps.is_some()), "output phases appear at couple-out");
    }

    #[test]
    fn schedule_serialises() {
        let u = haar_unitary_seeded(3, 91);
        let plan = decompose(&u).unwrap();
        let s = compile(&plan).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: Schedule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s, "schedule JSON round trip");
    }
}
