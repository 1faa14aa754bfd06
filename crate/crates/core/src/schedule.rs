//! Piecewise control schedules `t -> (eta(t), a_1(t), ..., a_J(t))`.
//!
//! A schedule is a contiguous list of segments tiling `[0, T]`. Inside a
//! segment, `eta` is either constant or a cosine ramp and each Dirac
//! position is either constant or linear in time, so every quantity can be
//! evaluated analytically at any time (the integrator samples midpoints).

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Phase type of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    EtaRampUp,
    EtaRampDown,
    Hold,
    AdiabaticMove,
    TransitionMove,
}

impl SegmentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SegmentKind::EtaRampUp => "eta_ramp_up",
            SegmentKind::EtaRampDown => "eta_ramp_down",
            SegmentKind::Hold => "hold",
            SegmentKind::AdiabaticMove => "adiabatic_move",
            SegmentKind::TransitionMove => "transition_move",
        }
    }
}

/// Dirac strength over a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaSpec {
    Const { value: f64 },
    /// `eta_start + (eta_end - eta_start) (1 - cos(pi tau)) / 2`, `tau` in [0, 1].
    CosineRamp { eta_start: f64, eta_end: f64 },
}

impl EtaSpec {
    fn at(&self, tau: f64) -> f64 {
        match *self {
            EtaSpec::Const { value } => value,
            EtaSpec::CosineRamp { eta_start, eta_end } => {
                let w = 0.5 * (1.0 - (PI * tau).cos());
                eta_start * (1.0 - w) + eta_end * w
            }
        }
    }

    pub fn start(&self) -> f64 {
        self.at(0.0)
    }

    pub fn end(&self) -> f64 {
        self.at(1.0)
    }
}

/// One Dirac's trajectory over a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PositionSpec {
    Const { x0: f64 },
    Linear { x0: f64, x1: f64 },
}

impl PositionSpec {
    fn at(&self, tau: f64) -> f64 {
        match *self {
            PositionSpec::Const { x0 } => x0,
            PositionSpec::Linear { x0, x1 } => (1.0 - tau) * x0 + tau * x1,
        }
    }

    pub fn start(&self) -> f64 {
        self.at(0.0)
    }

    pub fn end(&self) -> f64 {
        self.at(1.0)
    }

    fn travel(&self) -> f64 {
        match *self {
            PositionSpec::Const { .. } => 0.0,
            PositionSpec::Linear { x0, x1 } => x1 - x0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSegment {
    pub kind: SegmentKind,
    pub t_begin: f64,
    pub t_end: f64,
    pub eta: EtaSpec,
    pub positions: Vec<PositionSpec>,
}

impl ScheduleSegment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_begin
    }

    fn tau(&self, t: f64) -> f64 {
        ((t - self.t_begin) / self.duration()).clamp(0.0, 1.0)
    }

    pub fn eta_at(&self, t: f64) -> f64 {
        self.eta.at(self.tau(t))
    }

    pub fn positions_into(&self, t: f64, out: &mut [f64]) {
        let tau = self.tau(t);
        for (o, p) in out.iter_mut().zip(&self.positions) {
            *o = p.at(tau);
        }
    }

    /// Signed velocity `da_j/dt` of every Dirac.
    pub fn slopes(&self) -> Vec<f64> {
        self.positions
            .iter()
            .map(|p| p.travel() / self.duration())
            .collect()
    }

    pub fn is_moving(&self) -> bool {
        self.positions.iter().any(|p| p.travel() != 0.0)
    }
}

/// Contiguous segments tiling `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct ControlSchedule {
    total_time: f64,
    n_diracs: usize,
    segments: Vec<ScheduleSegment>,
}

#[derive(Serialize, Deserialize)]
struct RawSchedule {
    #[serde(rename = "T")]
    total_time: f64,
    n_diracs: usize,
    segments: Vec<ScheduleSegment>,
}

impl TryFrom<RawSchedule> for ControlSchedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        let s = ControlSchedule::new(raw.n_diracs, raw.segments)?;
        let tol = 1e-9 * s.total_time.max(1.0);
        if (s.total_time - raw.total_time).abs() > tol {
            return Err(Error::validation(format!(
                "T = {} does not match the last segment end {}",
                raw.total_time, s.total_time
            )));
        }
        Ok(s)
    }
}

impl From<ControlSchedule> for RawSchedule {
    fn from(s: ControlSchedule) -> Self {
        RawSchedule {
            total_time: s.total_time,
            n_diracs: s.n_diracs,
            segments: s.segments,
        }
    }
}

impl ControlSchedule {
    /// Checks the tiling structure; physical constraints are left to
    /// [`validate`].
    pub fn new(n_diracs: usize, segments: Vec<ScheduleSegment>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::validation("schedule has no segments"))?;
        if first.t_begin != 0.0 {
            return Err(Error::validation(format!(
                "schedule must start at t = 0, first segment begins at {}",
                first.t_begin
            )));
        }
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.t_begin.is_finite() && seg.t_end.is_finite() && seg.t_begin < seg.t_end) {
                return Err(Error::validation(format!(
                    "segment {i}: needs t_begin < t_end, got [{}, {}]",
                    seg.t_begin, seg.t_end
                )));
            }
            if seg.positions.len() != n_diracs {
                return Err(Error::validation(format!(
                    "segment {i}: {} position specs for {n_diracs} Diracs",
                    seg.positions.len()
                )));
            }
            let values = [seg.eta.start(), seg.eta.end()]
                .into_iter()
                .chain(seg.positions.iter().flat_map(|p| [p.start(), p.end()]));
            if values.into_iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("segment {i}: non-finite parameter")));
            }
        }
        for (i, w) in segments.windows(2).enumerate() {
            let gap = w[1].t_begin - w[0].t_end;
            if gap.abs() > 1e-12 * w[0].t_end.abs().max(1.0) {
                return Err(Error::validation(format!(
                    "segments {i} and {} leave a gap or overlap of {gap:e}",
                    i + 1
                )));
            }
        }
        let total_time = segments.last().map(|s| s.t_end).unwrap_or(0.0);
        Ok(ControlSchedule {
            total_time,
            n_diracs,
            segments,
        })
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn n_diracs(&self) -> usize {
        self.n_diracs
    }

    pub fn segments(&self) -> &[ScheduleSegment] {
        &self.segments
    }

    /// Segment start times plus `T`.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().map(|s| s.t_begin).collect();
        b.push(self.total_time);
        b
    }

    /// Index of the segment owning `t`; boundaries belong to the later segment.
    pub fn segment_index(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0 && t <= self.total_time) {
            return Err(Error::domain(format!(
                "time {t} outside schedule range [0, {}]",
                self.total_time
            )));
        }
        let idx = self.segments.partition_point(|s| s.t_begin <= t);
        Ok(idx.saturating_sub(1))
    }

    /// `(eta(t), (a_1(t), ..., a_J(t)))`.
    pub fn sample(&self, t: f64) -> Result<(f64, Vec<f64>)> {
        let mut pos = vec![0.0; self.n_diracs];
        let eta = self.sample_into(t, &mut pos)?;
        Ok((eta, pos))
    }

    pub fn sample_into(&self, t: f64, positions: &mut [f64]) -> Result<f64> {
        let seg = &self.segments[self.segment_index(t)?];
        seg.positions_into(t, positions);
        Ok(seg.eta_at(t))
    }

    pub fn max_eta(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.eta.start().max(s.eta.end()))
            .fold(0.0, f64::max)
    }

    /// `[t_begin, t_end]` of every transition segment.
    pub fn transition_windows(&self) -> Vec<(f64, f64)> {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::TransitionMove)
            .map(|s| (s.t_begin, s.t_end))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Ramp direction for [`eta_ramp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RampDirection {
    Up,
    Down,
}

/// Cosine ramp between 0 and `eta_max` over `[0, ramp_time]`, with zero
/// slope at both ends.
pub fn eta_ramp(t: f64, ramp_time: f64, eta_max: f64, direction: RampDirection) -> Result<f64> {
    if !(ramp_time > 0.0) || eta_max < 0.0 {
        return Err(Error::validation("ramp needs ramp_time > 0 and eta_max >= 0"));
    }
    if !(0.0..=ramp_time).contains(&t) {
        return Err(Error::domain(format!("t = {t} outside ramp [0, {ramp_time}]")));
    }
    let spec = match direction {
        RampDirection::Up => EtaSpec::CosineRamp { eta_start: 0.0, eta_end: eta_max },
        RampDirection::Down => EtaSpec::CosineRamp { eta_start: eta_max, eta_end: 0.0 },
    };
    Ok(spec.at(t / ramp_time))
}

/// Time derivative of [`eta_ramp`].
pub fn eta_ramp_rate(t: f64, ramp_time: f64, eta_max: f64, direction: RampDirection) -> f64 {
    let rate = 0.5 * PI * eta_max / ramp_time * (PI * t / ramp_time).sin();
    match direction {
        RampDirection::Up => rate,
        RampDirection::Down => -rate,
    }
}

/// Limits audited by [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationLimits {
    pub adiabatic_slope_max: f64,
    pub transition_slope: f64,
    pub min_gap: f64,
    pub margin: f64,
    pub audit_points: usize,
}

impl Default for ValidationLimits {
    fn default() -> Self {
        ValidationLimits {
            adiabatic_slope_max: 1e-3,
            transition_slope: 1.0,
            min_gap: 0.02,
            margin: 0.05,
            audit_points: 10_000,
        }
    }
}

/// A constraint broken by a schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    Discontinuity { t: f64, quantity: String, jump: f64 },
    PositionsIntersect { segment: usize, t: f64 },
    GapTooSmall { segment: usize, t: f64, gap: f64 },
    OutsideMargin { segment: usize, t: f64, dirac: usize, position: f64 },
    SlopeCapExceeded { segment: usize, dirac: usize, slope: f64, cap: f64 },
    TransitionSlopeMismatch { segment: usize, dirac: usize, slope: f64, expected: f64 },
    NegativeEta { segment: usize, t: f64, eta: f64 },
    KindMismatch { segment: usize, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Discontinuity { t, quantity, jump } => {
                write!(f, "discontinuity in {quantity} at t={t} (jump {jump:e})")
            }
            Violation::PositionsIntersect { segment, t } => {
                write!(f, "segment {segment}: positions intersect at t={t}")
            }
            Violation::GapTooSmall { segment, t, gap } => {
                write!(f, "segment {segment}: Dirac gap {gap} below minimum at t={t}")
            }
            Violation::OutsideMargin { segment, t, dirac, position } => write!(
                f,
                "segment {segment}: a_{} = {position} outside margin at t={t}",
                dirac + 1
            ),
            Violation::SlopeCapExceeded { segment, dirac, slope, cap } => write!(
                f,
                "segment {segment}: slope cap exceeded for a_{} (|{slope:e}| > {cap:e})",
                dirac + 1
            ),
            Violation::TransitionSlopeMismatch { segment, dirac, slope, expected } => write!(
                f,
                "segment {segment}: transition slope of a_{} is {slope:e}, expected +-{expected:e}",
                dirac + 1
            ),
            Violation::NegativeEta { segment, t, eta } => {
                write!(f, "segment {segment}: eta = {eta} < 0 at t={t}")
            }
            Violation::KindMismatch { segment, detail } => {
                write!(f, "segment {segment}: {detail}")
            }
        }
    }
}

/// Audits continuity, ordering, gaps, margins, slope caps and `eta >= 0`.
/// Returns an empty list for a feasible schedule.
pub fn validate(schedule: &ControlSchedule, limits: &ValidationLimits) -> Vec<Violation> {
    let mut out = Vec::new();
    let segs = schedule.segments();

    for w in segs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let t = b.t_begin;
        let jump = (a.eta.end() - b.eta.start()).abs();
        if jump > 1e-12 * a.eta.end().abs().max(1.0) {
            out.push(Violation::Discontinuity { t, quantity: "eta".into(), jump });
        }
        for (j, (pa, pb)) in a.positions.iter().zip(&b.positions).enumerate() {
            let jump = (pa.end() - pb.start()).abs();
            if jump > 1e-12 {
                out.push(Violation::Discontinuity { t, quantity: format!("a_{}", j + 1), jump });
            }
        }
    }

    let n_audit = limits.audit_points.max(2);
    let mut pos = vec![0.0; schedule.n_diracs()];
    for (i, seg) in segs.iter().enumerate() {
        kind_checks(i, seg, limits, &mut out);

        let (mut intersect, mut gap, mut margin, mut neg) = (false, false, false, false);
        for p in 0..n_audit {
            let t = seg.t_begin + seg.duration() * p as f64 / (n_audit - 1) as f64;
            seg.positions_into(t, &mut pos);
            let eta = seg.eta_at(t);
            if !neg && eta < 0.0 {
                neg = true;
                out.push(Violation::NegativeEta { segment: i, t, eta });
            }
            for (j, &x) in pos.iter().enumerate() {
                if !margin && !(x > limits.margin && x < 1.0 - limits.margin) {
                    margin = true;
                    out.push(Violation::OutsideMargin { segment: i, t, dirac: j, position: x });
                }
            }
            for w in pos.windows(2) {
                let g = w[1] - w[0];
                if g <= 0.0 {
                    if !intersect {
                        intersect = true;
                        out.push(Violation::PositionsIntersect { segment: i, t });
                    }
                } else if g < limits.min_gap && !gap && !intersect {
                    gap = true;
                    out.push(Violation::GapTooSmall { segment: i, t, gap: g });
                }
            }
        }
        if intersect && gap {
            out.retain(|v| !matches!(v, Violation::GapTooSmall { segment, .. } if *segment == i));
        }
    }
    out
}

fn kind_checks(i: usize, seg: &ScheduleSegment, limits: &ValidationLimits, out: &mut Vec<Violation>) {
    let mismatch = |detail: &str| Violation::KindMismatch { segment: i, detail: format!("{}: {detail}", seg.kind.as_str()) };
    let eta_const = matches!(seg.eta, EtaSpec::Const { .. });
    match seg.kind {
        SegmentKind::EtaRampUp | SegmentKind::EtaRampDown => {
            let rising = seg.eta.end() > seg.eta.start();
            let ok = matches!(seg.eta, EtaSpec::CosineRamp { .. })
                && (rising == (seg.kind == SegmentKind::EtaRampUp));
            if !ok {
                out.push(mismatch("eta must be a cosine ramp in the stated direction"));
            }
            if seg.is_moving() {
                out.push(mismatch("positions must be held during a ramp"));
            }
        }
        SegmentKind::Hold => {
            if !eta_const {
                out.push(mismatch("eta must be constant"));
            }
            if seg.is_moving() {
                out.push(mismatch("positions must be constant"));
            }
        }
        SegmentKind::AdiabaticMove => {
            if !eta_const {
                out.push(mismatch("eta must be constant while moving"));
            }
            let cap = limits.adiabatic_slope_max;
            for (j, s) in seg.slopes().into_iter().enumerate() {
                if s.abs() > cap * (1.0 + 1e-9) {
                    out.push(Violation::SlopeCapExceeded { segment: i, dirac: j, slope: s, cap });
                }
            }
        }
        SegmentKind::TransitionMove => {
            if !eta_const {
                out.push(mismatch("eta must be constant while moving"));
            }
            if !seg.is_moving() {
                out.push(mismatch("no Dirac moves"));
            }
            let expected = limits.transition_slope;
            for (j, s) in seg.slopes().into_iter().enumerate() {
                if s != 0.0 && (s.abs() - expected).abs() > 1e-6 * expected {
                    out.push(Violation::TransitionSlopeMismatch { segment: i, dirac: j, slope: s, expected });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn seg(kind: SegmentKind, t0: f64, t1: f64, eta: EtaSpec, pos: Vec<PositionSpec>) -> ScheduleSegment {
        ScheduleSegment { kind, t_begin: t0, t_end: t1, eta, positions: pos }
    }

    fn two_dirac_hold() -> ControlSchedule {
        let c = |x0| PositionSpec::Const { x0 };
        ControlSchedule::new(
            2,
            vec![
                seg(SegmentKind::EtaRampUp, 0.0, 1.0, EtaSpec::CosineRamp { eta_start: 0.0, eta_end: 10.0 }, vec![c(0.3), c(0.6)]),
                seg(SegmentKind::Hold, 1.0, 2.0, EtaSpec::Const { value: 10.0 }, vec![c(0.3), c(0.6)]),
                seg(SegmentKind::EtaRampDown, 2.0, 3.0, EtaSpec::CosineRamp { eta_start: 10.0, eta_end: 0.0 }, vec![c(0.3), c(0.6)]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn ramp_values_and_rates() {
        assert_eq!(eta_ramp(0.0, 50.0, 2000.0, RampDirection::Up).unwrap(), 0.0);
        assert_abs_diff_eq!(eta_ramp(25.0, 50.0, 2000.0, RampDirection::Up).unwrap(), 1000.0, epsilon = 1e-9);
        assert_eq!(eta_ramp(50.0, 50.0, 2000.0, RampDirection::Up).unwrap(), 2000.0);
        assert_eq!(eta_ramp(0.0, 50.0, 2000.0, RampDirection::Down).unwrap(), 2000.0);
        assert_eq!(eta_ramp(50.0, 50.0, 2000.0, RampDirection::Down).unwrap(), 0.0);
        assert_abs_diff_eq!(eta_ramp_rate(0.0, 50.0, 2000.0, RampDirection::Up), 0.0);
        assert_abs_diff_eq!(eta_ramp_rate(50.0, 50.0, 2000.0, RampDirection::Up), 0.0, epsilon = 1e-12);
        assert!(matches!(eta_ramp(51.0, 50.0, 1.0, RampDirection::Up), Err(Error::Domain(_))));
    }

    #[test]
    fn sampling_and_boundaries() {
        let s = two_dirac_hold();
        let (eta, pos) = s.sample(0.0).unwrap();
        assert_eq!(eta, 0.0);
        assert_eq!(pos, vec![0.3, 0.6]);
        assert_eq!(s.sample(3.0).unwrap().0, 0.0);
        assert_eq!(s.segment_index(1.0).unwrap(), 1);
        assert_eq!(s.segment_index(3.0).unwrap(), 2);
        assert!(matches!(s.sample(3.0001), Err(Error::Domain(_))));
        assert!(matches!(s.sample(-1e-9), Err(Error::Domain(_))));
        assert!(validate(&s, &ValidationLimits::default()).is_empty());
    }

    #[test]
    fn structural_errors() {
        let c = |x0| PositionSpec::Const { x0 };
        let gap = ControlSchedule::new(
            1,
            vec![
                seg(SegmentKind::Hold, 0.0, 1.0, EtaSpec::Const { value: 0.0 }, vec![c(0.5)]),
                seg(SegmentKind::Hold, 1.5, 2.0, EtaSpec::Const { value: 0.0 }, vec![c(0.5)]),
            ],
        );
        assert!(gap.is_err());
        let arity = ControlSchedule::new(2, vec![seg(SegmentKind::Hold, 0.0, 1.0, EtaSpec::Const { value: 0.0 }, vec![c(0.5)])]);
        assert!(arity.is_err());
        let late = ControlSchedule::new(1, vec![seg(SegmentKind::Hold, 0.5, 1.0, EtaSpec::Const { value: 0.0 }, vec![c(0.5)])]);
        assert!(late.is_err());
    }

    #[test]
    fn crossing_diracs_give_one_intersection() {
        let s = ControlSchedule::new(
            2,
            vec![seg(
                SegmentKind::TransitionMove,
                0.0,
                0.3,
                EtaSpec::Const { value: 100.0 },
                vec![PositionSpec::Linear { x0: 0.4, x1: 0.7 }, PositionSpec::Const { x0: 0.6 }],
            )],
        )
        .unwrap();
        let v = validate(&s, &ValidationLimits::default());
        let intersect: Vec<_> = v.iter().filter(|v| matches!(v, Violation::PositionsIntersect { .. })).collect();
        assert_eq!(intersect.len(), 1, "{v:?}");
        assert!(!v.iter().any(|v| matches!(v, Violation::GapTooSmall { .. })));
    }

    #[test]
    fn adiabatic_slope_cap() {
        let s = ControlSchedule::new(
            1,
            vec![seg(
                SegmentKind::AdiabaticMove,
                0.0,
                10.0,
                EtaSpec::Const { value: 100.0 },
                vec![PositionSpec::Linear { x0: 0.5, x1: 0.49 }],
            )],
        )
        .unwrap();
        let limits = ValidationLimits { adiabatic_slope_max: 1e-4, ..Default::default() };
        let v = validate(&s, &limits);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(v[0], Violation::SlopeCapExceeded { dirac: 0, .. }));
        assert!(validate(&s, &ValidationLimits { adiabatic_slope_max: 2e-3, ..Default::default() }).is_empty());
    }

    #[test]
    fn discontinuity_reported() {
        let c = |x0| PositionSpec::Const { x0 };
        let s = ControlSchedule::new(
            1,
            vec![
                seg(SegmentKind::Hold, 0.0, 1.0, EtaSpec::Const { value: 5.0 }, vec![c(0.5)]),
                seg(SegmentKind::Hold, 1.0, 2.0, EtaSpec::Const { value: 6.0 }, vec![c(0.4)]),
            ],
        )
        .unwrap();
        let v = validate(&s, &ValidationLimits::default());
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|v| matches!(v, Violation::Discontinuity { .. })));
    }

    #[test]
    fn json_roundtrip_and_field_names() {
        let s = two_dirac_hold();
        let text = s.to_json().unwrap();
        assert!(text.contains("\"T\""));
        assert!(text.contains("\"eta_ramp_up\""));
        assert!(text.contains("\"cosine_ramp\""));
        let back = ControlSchedule::from_json(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn json_rejects_inconsistent_total_time() {
        let text = two_dirac_hold().to_json().unwrap().replace("\"T\": 3.0", "\"T\": 4.0");
        assert!(ControlSchedule::from_json(&text).is_err());
    }
}
