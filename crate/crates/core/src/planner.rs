//! Synthesis of quasi-adiabatic permutation schedules.
//!
//! The Diracs are switched on slowly at start positions whose interval
//! lengths decrease left to right, so mode `k` localizes in interval `k`.
//! They are then moved one at a time. Away from length coincidences the
//! motion is slow; wherever two interval lengths become equal the moving
//! Dirac crosses a short window at unit speed so the energy stays in its
//! interval instead of following the adiabatic branch. Finally the Diracs
//! are switched off slowly and each interval's energy lands on the sine
//! mode matching its length rank.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{interval_lengths, validate_positions};
use crate::schedule::{ControlSchedule, EtaSpec, PositionSpec, ScheduleSegment, SegmentKind};

/// Positions closer than this are treated as the same crossing.
const POSITION_TOL: f64 = 1e-9;

/// A permutation of `1..=M`, stored with 1-based images.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let m = images.len();
        let mut seen = vec![false; m];
        for &s in &images {
            if s == 0 || s > m || seen[s - 1] {
                return Err(Error::validation(format!(
                    "{images:?} is not a permutation of 1..={m}"
                )));
            }
            seen[s - 1] = true;
        }
        Ok(Permutation(images))
    }

    pub fn identity(m: usize) -> Self {
        Permutation((1..=m).collect())
    }

    /// Parses `"2,3,1"`.
    pub fn parse(text: &str) -> Result<Self> {
        let images = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::validation(format!("bad permutation entry `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(images)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &s)| s == i + 1)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &s) in self.0.iter().enumerate() {
            inv[s - 1] = i + 1;
        }
        Permutation(inv)
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

/// Tunable planner parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanParams {
    pub eta_max: f64,
    #[serde(rename = "T")]
    pub total_time: f64,
    pub adiabatic_slope: f64,
    pub transition_slope: f64,
    pub transition_width: f64,
    pub margin: f64,
    pub min_gap: f64,
    pub min_dwell: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams {
            eta_max: 2000.0,
            total_time: 200.0,
            adiabatic_slope: 1e-3,
            transition_slope: 1.0,
            transition_width: 1e-2,
            margin: 0.05,
            min_gap: 0.02,
            min_dwell: 1.0,
        }
    }
}

/// Move Dirac `dirac` (0-based) to `target`, holding the others.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveSpec {
    pub dirac: usize,
    pub target: f64,
}

/// How the movement phase `[T/4, 3T/4]` is shared between moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSplit {
    ProportionalToTravel,
    Equal,
}

/// Geometry of a plan: where the Diracs start and the sequence of moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanLayout {
    pub start: Vec<f64>,
    pub moves: Vec<MoveSpec>,
    pub split: TimeSplit,
}

/// Interval lengths coincide while one Dirac moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    /// 0-based Dirac index.
    pub dirac: usize,
    pub position: f64,
    /// 0-based interval index pairs whose lengths are equal at `position`.
    pub pairs: Vec<(usize, usize)>,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub sigma: Permutation,
    pub start_positions: Vec<f64>,
    pub final_positions: Vec<f64>,
    pub start_lengths: Vec<f64>,
    pub final_lengths: Vec<f64>,
    pub transition_events: Vec<TransitionEvent>,
    /// 0-based Dirac index of each move, in order.
    pub move_order: Vec<usize>,
    /// Realized pairing: final mode `k` carries the magnitude of initial
    /// mode `pairing[k - 1]` (both 1-based).
    pub pairing: Vec<usize>,
    pub minimum_total_time: f64,
}

impl PermutationPlan {
    pub fn n_modes(&self) -> usize {
        self.start_lengths.len()
    }
}

/// Plans a schedule realizing `sigma` with default geometry.
pub fn plan_permutation(
    sigma: &Permutation,
    params: &PlanParams,
) -> Result<(PermutationPlan, ControlSchedule)> {
    let layout = default_layout(sigma, params)?;
    plan_with_layout(sigma, &layout, params)
}

/// Start positions and moves used when none are given explicitly.
pub fn default_layout(sigma: &Permutation, params: &PlanParams) -> Result<PlanLayout> {
    let m = sigma.len();
    if m < 2 {
        return Err(Error::validation("a permutation plan needs M >= 2 modes"));
    }
    let start = match m {
        3 => vec![0.36, 0.7],
        4 => vec![0.27, 0.53, 0.77],
        _ => positions_from_lengths(&taper(m, 0.25)),
    };
    if sigma.is_identity() {
        return Ok(PlanLayout { start, moves: vec![], split: TimeSplit::ProportionalToTravel });
    }
    match sigma.images() {
        [2, 3, 1] => {
            return Ok(PlanLayout {
                start,
                moves: vec![MoveSpec { dirac: 0, target: 0.31 }, MoveSpec { dirac: 1, target: 0.68 }],
                split: TimeSplit::ProportionalToTravel,
            })
        }
        [2, 4, 3, 1] => {
            return Ok(PlanLayout {
                start,
                moves: vec![
                    MoveSpec { dirac: 0, target: 0.26 },
                    MoveSpec { dirac: 1, target: 0.50 },
                    MoveSpec { dirac: 2, target: 0.73 },
                    MoveSpec { dirac: 1, target: 0.49 },
                ],
                split: TimeSplit::Equal,
            })
        }
        _ => {}
    }
    generic_layout(sigma, start, params)
}

/// `l_k = (1 + g (M + 1 - 2k) / (M - 1)) / M`: decreasing, summing to 1,
/// with `l_1 / l_M = (1 + g) / (1 - g)`.
fn taper(m: usize, g: f64) -> Vec<f64> {
    let mf = m as f64;
    (1..=m)
        .map(|k| (1.0 + g * (mf + 1.0 - 2.0 * k as f64) / (mf - 1.0)) / mf)
        .collect()
}

fn positions_from_lengths(lengths: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    lengths[..lengths.len() - 1]
        .iter()
        .map(|l| {
            acc += l;
            acc
        })
        .collect()
}

fn generic_layout(sigma: &Permutation, start: Vec<f64>, params: &PlanParams) -> Result<PlanLayout> {
    let m = sigma.len();
    let j = m - 1;
    let orders: Vec<Vec<usize>> = if j <= 5 {
        let mut all = Vec::new();
        permutations(&(0..j).collect::<Vec<_>>(), &mut Vec::new(), &mut all);
        all
    } else {
        vec![(0..j).collect(), (0..j).rev().collect()]
    };
    for g_final in [0.2, 0.15, 0.1, 0.25, 0.3, 0.05] {
        let ranked = taper(m, g_final);
        // interval sigma(k) takes the k-th largest length
        let mut final_lengths = vec![0.0; m];
        for (k, &s) in sigma.images().iter().enumerate() {
            final_lengths[s - 1] = ranked[k];
        }
        let targets = positions_from_lengths(&final_lengths);
        for order in &orders {
            let moves: Vec<MoveSpec> = order
                .iter()
                .filter(|&&d| (targets[d] - start[d]).abs() > POSITION_TOL)
                .map(|&d| MoveSpec { dirac: d, target: targets[d] })
                .collect();
            let layout = PlanLayout { start: start.clone(), moves, split: TimeSplit::ProportionalToTravel };
            if trace_moves(&layout, params).is_ok() {
                return Ok(layout);
            }
        }
    }
    Err(Error::validation(format!(
        "no non-degenerate sequential move layout found for sigma = {:?}; supply an explicit layout",
        sigma.images()
    )))
}

fn permutations(rest: &[usize], prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if rest.is_empty() {
        out.push(prefix.clone());
        return;
    }
    for i in 0..rest.len() {
        prefix.push(rest[i]);
        let mut r = rest.to_vec();
        r.remove(i);
        permutations(&r, prefix, out);
        prefix.pop();
    }
}

/// Geometry of one move after crossing detection.
#[derive(Debug, Clone)]
struct TracedMove {
    dirac: usize,
    from: f64,
    to: f64,
    /// Crossings along the path, ordered by travel.
    events: Vec<(f64, Vec<(usize, usize)>)>,
    /// Merged transition windows `(x_in, x_out)` in travel order.
    windows: Vec<(f64, f64)>,
    /// Positions before the move.
    #[cfg_attr(not(test), allow(dead_code))]
    config: Vec<f64>,
}

impl TracedMove {
    fn travel(&self) -> f64 {
        (self.to - self.from).abs()
    }

    fn transition_travel(&self) -> f64 {
        self.windows.iter().map(|(a, b)| (b - a).abs()).sum()
    }

    /// Adiabatic pieces `(x_from, x_to)` between windows, zero-length ones dropped.
    fn adiabatic_pieces(&self) -> Vec<(f64, f64, bool)> {
        let mut out = Vec::new();
        let mut cur = self.from;
        for (idx, &(a, b)) in self.windows.iter().enumerate() {
            if (a - cur).abs() > POSITION_TOL {
                // interior iff bounded by windows on both sides
                out.push((cur, a, idx > 0));
            }
            cur = b;
        }
        if (self.to - cur).abs() > POSITION_TOL {
            out.push((cur, self.to, false));
        }
        out
    }
}

fn check_configuration(config: &[f64], params: &PlanParams, what: &str) -> Result<()> {
    validate_positions(config).map_err(|e| Error::validation(format!("{what}: {e}")))?;
    if config.iter().any(|&x| x <= params.margin || x >= 1.0 - params.margin) {
        return Err(Error::validation(format!(
            "{what}: positions {config:?} violate margin {}",
            params.margin
        )));
    }
    if config.windows(2).any(|w| w[1] - w[0] < params.min_gap) {
        return Err(Error::validation(format!(
            "{what}: positions {config:?} closer than min_gap {}",
            params.min_gap
        )));
    }
    let lengths = interval_lengths(config);
    let max = lengths.iter().copied().fold(f64::MIN, f64::max);
    let min = lengths.iter().copied().fold(f64::MAX, f64::min);
    if !(max < 2.0 * min) {
        return Err(Error::validation(format!(
            "{what}: lengths {lengths:?} break the factor-2 constraint (max < 2 min)"
        )));
    }
    for p in 0..lengths.len() {
        for q in (p + 1)..lengths.len() {
            if (lengths[p] - lengths[q]).abs() <= POSITION_TOL {
                return Err(Error::validation(format!(
                    "{what}: intervals {} and {} have equal length {}",
                    p + 1,
                    q + 1,
                    lengths[p]
                )));
            }
        }
    }
    Ok(())
}

/// Positions where a length adjacent to Dirac `d` equals another length as
/// `d` travels from `from` to `to`. Each is the root of an affine equation.
fn crossings(config: &[f64], d: usize, from: f64, to: f64) -> Vec<(f64, Vec<(usize, usize)>)> {
    let lengths = interval_lengths(config);
    let left_edge = if d == 0 { 0.0 } else { config[d - 1] };
    let right_edge = if d + 1 == config.len() { 1.0 } else { config[d + 1] };
    let (left, right) = (d, d + 1);
    let mut raw: Vec<(f64, (usize, usize))> = vec![(0.5 * (left_edge + right_edge), (left, right))];
    for (o, &lo) in lengths.iter().enumerate() {
        if o == left || o == right {
            continue;
        }
        raw.push((left_edge + lo, (left.min(o), left.max(o))));
        raw.push((right_edge - lo, (right.min(o), right.max(o))));
    }
    let (lo, hi) = (from.min(to), from.max(to));
    let mut inside: Vec<(f64, (usize, usize))> = raw
        .into_iter()
        .filter(|&(x, _)| x > lo + POSITION_TOL && x < hi - POSITION_TOL)
        .collect();
    let dir = (to - from).signum();
    inside.sort_by(|a, b| (dir * a.0).total_cmp(&(dir * b.0)));
    let mut grouped: Vec<(f64, Vec<(usize, usize)>)> = Vec::new();
    for (x, pair) in inside {
        match grouped.last_mut() {
            Some((gx, pairs)) if (x - *gx).abs() <= POSITION_TOL => pairs.push(pair),
            _ => grouped.push((x, vec![pair])),
        }
    }
    for (_, pairs) in &mut grouped {
        pairs.sort_unstable();
    }
    grouped
}

/// Walks the moves, checking every intermediate configuration and building
/// the merged transition windows.
fn trace_moves(layout: &PlanLayout, params: &PlanParams) -> Result<Vec<TracedMove>> {
    let mut config = layout.start.clone();
    check_configuration(&config, params, "start configuration")?;
    let mut traced = Vec::with_capacity(layout.moves.len());
    for (i, mv) in layout.moves.iter().enumerate() {
        if mv.dirac >= config.len() {
            return Err(Error::validation(format!("move {i}: no Dirac {}", mv.dirac)));
        }
        let from = config[mv.dirac];
        let to = mv.target;
        if (to - from).abs() <= POSITION_TOL {
            return Err(Error::validation(format!("move {i}: Dirac {} does not move", mv.dirac + 1)));
        }
        let events = crossings(&config, mv.dirac, from, to);
        let dir = (to - from).signum();
        let half = 0.5 * params.transition_width;
        let mut windows: Vec<(f64, f64)> = Vec::new();
        for &(x, _) in &events {
            let mut a = x - dir * half;
            let mut b = x + dir * half;
            if (a - from).abs() <= POSITION_TOL {
                a = from;
            }
            if (b - to).abs() <= POSITION_TOL {
                b = to;
            }
            if dir * (a - from) < 0.0 || dir * (to - b) < 0.0 {
                return Err(Error::validation(format!(
                    "move {i}: crossing at x = {x} is closer than half a transition window to the \
                     endpoints {from} -> {to}"
                )));
            }
            match windows.last_mut() {
                Some(last) if dir * (a - last.1) <= POSITION_TOL => last.1 = b,
                _ => windows.push((a, b)),
            }
        }
        traced.push(TracedMove { dirac: mv.dirac, from, to, events, windows, config: config.clone() });
        config[mv.dirac] = to;
        check_configuration(&config, params, &format!("configuration after move {i}"))?;
    }
    Ok(traced)
}

fn move_fractions(traced: &[TracedMove], split: TimeSplit) -> Vec<f64> {
    match split {
        TimeSplit::Equal => vec![1.0 / traced.len() as f64; traced.len()],
        TimeSplit::ProportionalToTravel => {
            let total: f64 = traced.iter().map(TracedMove::travel).sum();
            traced.iter().map(|m| m.travel() / total).collect()
        }
    }
}

/// Shortest total time for which the layout respects the slope cap, the
/// transition speed and the minimum dwell between transitions.
fn minimum_total_time(traced: &[TracedMove], split: TimeSplit, params: &PlanParams) -> f64 {
    let fractions = move_fractions(traced, split);
    traced
        .iter()
        .zip(fractions)
        .map(|(m, frac)| {
            let fast = m.transition_travel() / params.transition_slope;
            let pieces = m.adiabatic_pieces();
            let slow_travel: f64 = pieces.iter().map(|(a, b, _)| (b - a).abs()).sum();
            let mut slow_time = slow_travel / params.adiabatic_slope;
            for (a, b, interior) in &pieces {
                if *interior {
                    slow_time = slow_time.max(params.min_dwell * slow_travel / (b - a).abs());
                }
            }
            // the move owns frac * T / 2 of the movement phase
            2.0 * (fast + slow_time) / frac
        })
        .fold(0.0, f64::max)
}

/// Plans a schedule for an explicit layout.
pub fn plan_with_layout(
    sigma: &Permutation,
    layout: &PlanLayout,
    params: &PlanParams,
) -> Result<(PermutationPlan, ControlSchedule)> {
    let m = sigma.len();
    if layout.start.len() + 1 != m {
        return Err(Error::validation(format!(
            "M = {m} modes need {} Diracs, layout has {}",
            m - 1,
            layout.start.len()
        )));
    }
    if !(params.eta_max >= 0.0 && params.total_time > 0.0 && params.adiabatic_slope > 0.0
        && params.transition_slope > 0.0 && params.transition_width > 0.0)
    {
        return Err(Error::validation("plan parameters must be positive"));
    }
    let start_lengths = interval_lengths(&layout.start);
    if start_lengths.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::validation(format!(
            "start lengths {start_lengths:?} must be strictly decreasing"
        )));
    }

    let traced = trace_moves(layout, params)?;
    let t_min = if traced.is_empty() { 0.0 } else { minimum_total_time(&traced, layout.split, params) };
    let total = params.total_time;
    if total < t_min * (1.0 - 1e-12) {
        return Err(Error::Infeasible {
            reason: "movement phase too short for the slope cap, transitions and dwell".into(),
            required_t: t_min,
        });
    }

    let eta_max = params.eta_max;
    let t_up = 0.25 * total;
    let t_down = 0.75 * total;
    let mut segments = Vec::new();
    let const_positions = |c: &[f64]| c.iter().map(|&x0| PositionSpec::Const { x0 }).collect::<Vec<_>>();

    segments.push(ScheduleSegment {
        kind: SegmentKind::EtaRampUp,
        t_begin: 0.0,
        t_end: t_up,
        eta: EtaSpec::CosineRamp { eta_start: 0.0, eta_end: eta_max },
        positions: const_positions(&layout.start),
    });

    let mut events = Vec::new();
    let mut config = layout.start.clone();
    if traced.is_empty() {
        segments.push(ScheduleSegment {
            kind: SegmentKind::Hold,
            t_begin: t_up,
            t_end: t_down,
            eta: EtaSpec::Const { value: eta_max },
            positions: const_positions(&config),
        });
    } else {
        let fractions = move_fractions(&traced, layout.split);
        let mut t0 = t_up;
        let mut acc = 0.0;
        for (i, (mv, frac)) in traced.iter().zip(&fractions).enumerate() {
            acc += frac;
            let t1 = if i + 1 == traced.len() { t_down } else { t_up + acc * (t_down - t_up) };
            let mut builder = MoveBuilder {
                segments: &mut segments,
                events: &mut events,
                config: &mut config,
                eta: eta_max,
                dirac: mv.dirac,
            };
            builder.build(mv, t0, t1, params);
            t0 = t1;
        }
    }

    segments.push(ScheduleSegment {
        kind: SegmentKind::EtaRampDown,
        t_begin: t_down,
        t_end: total,
        eta: EtaSpec::CosineRamp { eta_start: eta_max, eta_end: 0.0 },
        positions: const_positions(&config),
    });

    let schedule = ControlSchedule::new(m - 1, segments)?;
    let final_lengths = interval_lengths(&config);
    let mut ranked: Vec<usize> = (0..m).collect();
    ranked.sort_by(|&a, &b| final_lengths[b].total_cmp(&final_lengths[a]));
    let pairing = ranked.iter().map(|&i| i + 1).collect();

    let plan = PermutationPlan {
        sigma: sigma.clone(),
        start_positions: layout.start.clone(),
        final_positions: config,
        start_lengths,
        final_lengths,
        transition_events: events,
        move_order: traced.iter().map(|m| m.dirac).collect(),
        pairing,
        minimum_total_time: t_min,
    };
    Ok((plan, schedule))
}

struct MoveBuilder<'a> {
    segments: &'a mut Vec<ScheduleSegment>,
    events: &'a mut Vec<TransitionEvent>,
    config: &'a mut Vec<f64>,
    eta: f64,
    dirac: usize,
}

impl MoveBuilder<'_> {
    fn push(&mut self, kind: SegmentKind, t_begin: f64, t_end: f64, x0: f64, x1: f64) {
        let positions = self
            .config
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                if j == self.dirac && kind == SegmentKind::Hold {
                    PositionSpec::Const { x0 }
                } else if j == self.dirac {
                    PositionSpec::Linear { x0, x1 }
                } else {
                    PositionSpec::Const { x0: c }
                }
            })
            .collect();
        self.segments.push(ScheduleSegment {
            kind,
            t_begin,
            t_end,
            eta: EtaSpec::Const { value: self.eta },
            positions,
        });
    }

    fn build(&mut self, mv: &TracedMove, t0: f64, t1: f64, params: &PlanParams) {
        let budget = t1 - t0;
        let fast_time = mv.transition_travel() / params.transition_slope;
        let pieces = mv.adiabatic_pieces();
        let slow_travel: f64 = pieces.iter().map(|(a, b, _)| (b - a).abs()).sum();

        // Ordered path pieces: (x_from, x_to, is_transition).
        let mut path: Vec<(f64, f64, bool)> = Vec::new();
        let mut cur = mv.from;
        for &(a, b) in &mv.windows {
            if (a - cur).abs() > POSITION_TOL {
                path.push((cur, a, false));
            }
            path.push((a, b, true));
            cur = b;
        }
        if (mv.to - cur).abs() > POSITION_TOL {
            path.push((cur, mv.to, false));
        }

        let mut t = t0;
        if slow_travel == 0.0 {
            // the whole move is fast; hold symmetrically around it
            let hold = 0.5 * (budget - fast_time);
            if hold > 0.0 {
                self.push(SegmentKind::Hold, t, t + hold, mv.from, mv.from);
                t += hold;
            }
        }
        let slow_time = budget - fast_time;
        let n = path.len();
        for (i, &(a, b, fast)) in path.iter().enumerate() {
            let dur = if fast {
                (b - a).abs() / params.transition_slope
            } else {
                (b - a).abs() / slow_travel * slow_time
            };
            let last_motion = i + 1 == n;
            let end = if last_motion && slow_travel > 0.0 { t1 } else { t + dur };
            if fast {
                for (x, pairs) in &mv.events {
                    let lo = a.min(b) - POSITION_TOL;
                    let hi = a.max(b) + POSITION_TOL;
                    if *x >= lo && *x <= hi {
                        self.events.push(TransitionEvent {
                            dirac: mv.dirac,
                            position: *x,
                            pairs: pairs.clone(),
                            time: t + (x - a).abs() / params.transition_slope,
                        });
                    }
                }
            }
            let kind = if fast { SegmentKind::TransitionMove } else { SegmentKind::AdiabaticMove };
            self.push(kind, t, end, a, b);
            t = end;
        }
        if t < t1 {
            self.push(SegmentKind::Hold, t, t1, mv.to, mv.to);
        }
        self.config[self.dirac] = mv.to;
        // keep the tiling exact
        if let Some(last) = self.segments.last_mut() {
            last.t_end = t1;
        }
    }
}
