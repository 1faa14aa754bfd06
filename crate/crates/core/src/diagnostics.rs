//! Post-processing of trajectory records: permutation fidelity, adiabatic
//! drift in the tracked instantaneous eigenbasis, slope sweeps through a
//! crossing and the continuity bound across a fast window.

use std::fmt::Write as _;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{DiracConfig, EigenDecomposition, ModeTracker, RankStructuredHamiltonian};
use crate::integrator::{evolve, parallel_map, RecordOptions, TimeGrid, TrajectoryRecord};
use crate::io::{csv_row, fmt_f64};
use crate::planner::Permutation;
use crate::schedule::{ControlSchedule, EtaSpec, PositionSpec, ScheduleSegment, SegmentKind};
use crate::spectral::{Basis, SpectralState};

/// Final-time magnitudes against the magnitudes they should carry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationReport {
    pub sigma: Permutation,
    /// Final mode `k` is compared with initial mode `pairing[k - 1]` (1-based).
    pub pairing: Vec<usize>,
    pub target_magnitudes: Vec<f64>,
    pub achieved_magnitudes: Vec<f64>,
    /// `| |c_k(T)| - |c_pairing[k](0)| |` per final mode.
    pub coefficient_errors: Vec<f64>,
    /// l2 norm of the coefficients beyond mode M.
    pub residual_norm: f64,
    /// l2 norm of `coefficient_errors`.
    pub in_band_mismatch: f64,
    /// `c_k(T) / |c_k(T)|`; `None` where the coefficient vanishes.
    pub phases: Vec<Option<Complex64>>,
}

impl PermutationReport {
    pub fn max_error(&self) -> f64 {
        self.coefficient_errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "mode,source_mode,target_magnitude,achieved_magnitude,abs_error,phase_re,phase_im")?;
        for k in 0..self.pairing.len() {
            let (re, im) = match self.phases[k] {
                Some(p) => (fmt_f64(p.re), fmt_f64(p.im)),
                None => ("undefined".into(), "undefined".into()),
            };
            writeln!(
                out,
                "{}",
                csv_row([
                    (k + 1).to_string(),
                    self.pairing[k].to_string(),
                    fmt_f64(self.target_magnitudes[k]),
                    fmt_f64(self.achieved_magnitudes[k]),
                    fmt_f64(self.coefficient_errors[k]),
                    re,
                    im,
                ])
            )?;
        }
        Ok(())
    }

    /// Human-readable block; `tolerances` are `(coefficient, residual)`.
    pub fn summary(&self, tolerances: Option<(f64, f64)>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "permutation sigma = {:?}", self.sigma.images());
        let _ = writeln!(s, "  mode  source  target        achieved      |error|");
        for k in 0..self.pairing.len() {
            let _ = writeln!(
                s,
                "  {:>4}  {:>6}  {:<12.6}  {:<12.6}  {:.3e}",
                k + 1,
                self.pairing[k],
                self.target_magnitudes[k],
                self.achieved_magnitudes[k],
                self.coefficient_errors[k]
            );
        }
        let _ = writeln!(s, "  residual ||w|| = {:.3e}", self.residual_norm);
        let _ = writeln!(s, "  in-band mismatch = {:.3e}", self.in_band_mismatch);
        if let Some((tol_c, tol_w)) = tolerances {
            let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
            let _ = writeln!(s, "  max coefficient error <= {tol_c:e}: {}", verdict(self.max_error() <= tol_c));
            let _ = writeln!(s, "  residual <= {tol_w:e}: {}", verdict(self.residual_norm <= tol_w));
        }
        s
    }
}

/// Compares final sine magnitudes with the permuted initial ones.
///
/// `pairing` defaults to `sigma` itself (final mode `k` carries initial mode
/// `sigma(k)`); planner output supplies the realized pairing explicitly.
pub fn permutation_report(
    traj: &TrajectoryRecord,
    sigma: &Permutation,
    pairing: Option<&[usize]>,
) -> Result<PermutationReport> {
    let m = sigma.len();
    let n = traj.final_state.len();
    if m > n {
        return Err(Error::validation(format!("M = {m} exceeds the basis size {n}")));
    }
    let (eta0, eta_t) = (traj.eta.first().copied().unwrap_or(0.0), traj.eta.last().copied().unwrap_or(0.0));
    if eta0 != 0.0 || eta_t != 0.0 {
        return Err(Error::validation(format!(
            "permutation report needs eta(0) = eta(T) = 0, got {eta0} and {eta_t}"
        )));
    }
    let pairing = pairing.unwrap_or(sigma.images()).to_vec();
    Permutation::new(pairing.clone())?;
    if pairing.len() != m {
        return Err(Error::Dimension { expected: m, got: pairing.len() });
    }
    let c0 = traj.initial_state.coefficients();
    let ct = traj.final_state.coefficients();
    let target: Vec<f64> = pairing.iter().map(|&p| c0[p - 1].norm()).collect();
    let achieved: Vec<f64> = ct[..m].iter().map(|c| c.norm()).collect();
    let errors: Vec<f64> = target.iter().zip(&achieved).map(|(t, a)| (a - t).abs()).collect();
    Ok(PermutationReport {
        sigma: sigma.clone(),
        pairing,
        residual_norm: ct[m..].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt(),
        in_band_mismatch: errors.iter().map(|e| e * e).sum::<f64>().sqrt(),
        phases: ct[..m].iter().map(|&c| (c.norm() > 0.0).then(|| c / c.norm())).collect(),
        target_magnitudes: target,
        achieved_magnitudes: achieved,
        coefficient_errors: errors,
    })
}

/// Populations of tracked instantaneous eigenmodes over a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdiabaticityReport {
    pub times: Vec<f64>,
    /// `energies[s][k]`: population of tracked mode `k` at sample `s`.
    pub energies: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    /// Largest `|E_k(t) - E_k(0)|` outside transition windows.
    pub max_drift: Vec<f64>,
    /// `max_drift` divided by the initial squared norm (drift of the
    /// energy distribution).
    pub max_relative_drift: Vec<f64>,
    /// `max_drift / E_k(0)`, `None` for modes that start empty.
    pub max_drift_per_mode: Vec<Option<f64>>,
    /// Samples inside transition windows.
    pub in_window: Vec<bool>,
    /// Samples where the label assignment was ambiguous; excluded from drift.
    pub ambiguous_samples: Vec<usize>,
    /// Largest `|sum_k |<phi_k, psi>|^2 - ||psi||^2|` over all samples.
    pub sum_rule_error: f64,
}

impl AdiabaticityReport {
    pub fn worst_relative_drift(&self) -> f64 {
        self.max_relative_drift.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let m = self.initial.len();
        let mut header = vec!["time".to_string(), "in_window".into()];
        header.extend((1..=m).map(|k| format!("E_eig_{k}")));
        writeln!(out, "{}", header.join(","))?;
        for (s, t) in self.times.iter().enumerate() {
            let mut row = vec![fmt_f64(*t), u8::from(self.in_window[s]).to_string()];
            row.extend(self.energies[s].iter().map(|&e| fmt_f64(e)));
            writeln!(out, "{}", csv_row(row))?;
        }
        Ok(())
    }
}

fn decompose_at(eta: f64, positions: &[f64], basis: Basis) -> Result<EigenDecomposition> {
    RankStructuredHamiltonian::assemble(&DiracConfig::new(eta, positions.to_vec())?, basis).eigendecompose()
}

/// Projects stored states on the overlap-tracked eigenvectors of `H(t)` at
/// every sample and measures how far the first `modes` populations move.
pub fn adiabaticity_report(
    traj: &TrajectoryRecord,
    schedule: &ControlSchedule,
    modes: usize,
) -> Result<AdiabaticityReport> {
    let states = traj
        .states
        .as_ref()
        .ok_or_else(|| Error::validation("adiabaticity report needs stored states"))?;
    if traj.is_empty() {
        return Err(Error::validation("empty trajectory"));
    }
    let basis = traj.initial_state.basis();
    let modes = modes.min(basis.n_modes());
    let windows = schedule.transition_windows();
    let inside = |t: f64| windows.iter().any(|&(a, b)| t >= a && t <= b);

    let first = decompose_at(traj.eta[0], &traj.positions[0], basis)?;
    let mut tracker = ModeTracker::new(&first, modes);
    let mut energies = Vec::with_capacity(traj.len());
    let mut ambiguous = vec![];
    let mut sum_rule_error: f64 = 0.0;
    for s in 0..traj.len() {
        let eig = if s == 0 { first.clone() } else { decompose_at(traj.eta[s], &traj.positions[s], basis)? };
        let pops = eig.populations(states[s].coefficients());
        sum_rule_error = sum_rule_error.max((pops.iter().sum::<f64>() - states[s].norm_sq()).abs());
        let cols = if s == 0 {
            (0..modes).collect()
        } else {
            let tracked = tracker.update(&eig);
            if tracked.ambiguous {
                ambiguous.push(s);
            }
            tracked.columns
        };
        energies.push(cols.iter().map(|&c| pops[c]).collect::<Vec<_>>());
    }

    let initial = energies[0].clone();
    let mut max_drift = vec![0.0f64; modes];
    let in_window: Vec<bool> = traj.sample_times.iter().map(|&t| inside(t)).collect();
    for (s, e) in energies.iter().enumerate() {
        if in_window[s] || ambiguous.contains(&s) {
            continue;
        }
        for k in 0..modes {
            max_drift[k] = max_drift[k].max((e[k] - initial[k]).abs());
        }
    }
    let total = traj.initial_state.norm_sq().max(f64::MIN_POSITIVE);
    Ok(AdiabaticityReport {
        times: traj.sample_times.clone(),
        max_relative_drift: max_drift.iter().map(|d| d / total).collect(),
        max_drift_per_mode: max_drift
            .iter()
            .zip(&initial)
            .map(|(d, &e0)| (e0 > 1e-12 * total).then(|| d / e0))
            .collect(),
        max_drift,
        energies,
        initial,
        in_window,
        ambiguous_samples: ambiguous,
        sum_rule_error,
    })
}

/// A single Dirac of constant strength moving linearly through a crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepGeometry {
    pub eta: f64,
    /// Position traversed at mid-run, from right to left.
    pub crossing: f64,
    /// Run length; the Dirac covers `slope * duration` centred on the crossing.
    pub duration: f64,
    pub n_modes: usize,
    pub dt: f64,
    /// Instantaneous modes reported at the end.
    pub report_modes: usize,
}

impl Default for SweepGeometry {
    fn default() -> Self {
        SweepGeometry { eta: 2000.0, crossing: 0.5, duration: 0.01, n_modes: 200, dt: 1e-5, report_modes: 3 }
    }
}

impl SweepGeometry {
    pub fn schedule(&self, slope: f64) -> Result<ControlSchedule> {
        let half = 0.5 * slope * self.duration;
        let positions = if slope == 0.0 {
            PositionSpec::Const { x0: self.crossing }
        } else {
            PositionSpec::Linear { x0: self.crossing + half, x1: self.crossing - half }
        };
        ControlSchedule::new(
            1,
            vec![ScheduleSegment {
                kind: if slope == 0.0 { SegmentKind::Hold } else { SegmentKind::TransitionMove },
                t_begin: 0.0,
                t_end: self.duration,
                eta: EtaSpec::Const { value: self.eta },
                positions: vec![positions],
            }],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub slope: f64,
    pub initial_energies: Vec<f64>,
    /// Populations of the first instantaneous modes at the end of the run.
    pub final_energies: Vec<f64>,
}

impl SweepRow {
    /// Fraction of the initial mode-1 energy no longer in mode 1.
    pub fn mode1_transfer(&self) -> f64 {
        1.0 - self.final_energies[0] / self.initial_energies[0]
    }
}

/// Superposition of instantaneous eigenvectors with real weights.
pub fn eigen_superposition(eig: &EigenDecomposition, weights: &[f64]) -> Result<SpectralState> {
    let mut c = vec![Complex64::default(); eig.dim()];
    for (k, &w) in weights.iter().enumerate() {
        for (ci, v) in c.iter_mut().zip(eig.eigenvector(k)) {
            *ci += w * v;
        }
    }
    SpectralState::new(c)
}

/// Runs one evolution per slope and reports the final energy distribution
/// in the instantaneous eigenbasis. `initial` holds weights on the
/// instantaneous eigenvectors at `t = 0`.
pub fn slope_sweep(slopes: &[f64], initial: &[f64], geometry: &SweepGeometry) -> Result<Vec<SweepRow>> {
    let basis = Basis::new(geometry.n_modes)?;
    let run = |&slope: &f64| -> Result<SweepRow> {
        if !(slope >= 0.0 && slope.is_finite()) {
            return Err(Error::validation(format!("slope {slope} must be finite and non-negative")));
        }
        let schedule = geometry.schedule(slope)?;
        let (eta0, pos0) = schedule.sample(0.0)?;
        let eig0 = decompose_at(eta0, &pos0, basis)?;
        let psi0 = eigen_superposition(&eig0, initial)?;
        let grid = TimeGrid::for_schedule(&schedule, geometry.dt)?;
        let opts = RecordOptions { record_every: usize::MAX, store_states: false, mode_count: 1, eigen_modes: None };
        let rec = evolve(&psi0, &schedule, &grid, &opts)?;
        let (eta_t, pos_t) = schedule.sample(geometry.duration)?;
        let eig_t = decompose_at(eta_t, &pos_t, basis)?;
        let k = geometry.report_modes;
        Ok(SweepRow {
            slope,
            initial_energies: eig0.populations(psi0.coefficients())[..k].to_vec(),
            final_energies: eig_t.populations(rec.final_state.coefficients())[..k].to_vec(),
        })
    };
    parallel_map(slopes, run).into_iter().collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    let m = rows.first().map_or(0, |r| r.final_energies.len());
    let mut header = vec!["slope".to_string()];
    header.extend((1..=m).map(|k| format!("E0_{k}")));
    header.extend((1..=m).map(|k| format!("E_{k}")));
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        let mut row = vec![fmt_f64(r.slope)];
        row.extend(r.initial_energies.iter().chain(&r.final_energies).map(|&e| fmt_f64(e)));
        writeln!(out, "{}", csv_row(row))?;
    }
    Ok(())
}

/// Sine coefficients of the Dirichlet ground mode of `[b, c]`,
/// `sqrt(2/l) sin(pi (x - b) / l)` extended by zero.
pub fn interval_ground_mode(b: f64, c: f64, basis: Basis) -> Result<SpectralState> {
    if !(0.0 <= b && b < c && c <= 1.0) {
        return Err(Error::domain(format!("[{b}, {c}] is not a sub-interval of [0, 1]")));
    }
    let l = c - b;
    let beta = std::f64::consts::PI / l;
    let coeffs = (1..=basis.n_modes())
        .map(|k| {
            let alpha = k as f64 * std::f64::consts::PI;
            let ends = (alpha * c).sin() + (alpha * b).sin();
            let resonant = if (beta - alpha).abs() < 1e-9 * beta { l * (alpha * b).cos() } else { ends / (beta - alpha) };
            Complex64::new((resonant + ends / (alpha + beta)) / l.sqrt(), 0.0)
        })
        .collect();
    SpectralState::new(coeffs)
}

/// Adds a combination of the first `J` sine modes so that the truncated
/// series vanishes exactly at every point of `zeros`.
pub fn vanish_at(f: &SpectralState, zeros: &[f64]) -> Result<SpectralState> {
    let j = zeros.len();
    if j == 0 {
        return Ok(f.clone());
    }
    if j > f.len() {
        return Err(Error::validation("more constraints than modes"));
    }
    let values = f.evaluate(zeros)?;
    let a = nalgebra::DMatrix::<f64>::from_fn(j, j, |r, k| Basis::basis_function(k + 1, zeros[r]));
    let lu = a.lu();
    let mut c = f.coefficients().to_vec();
    for part in 0..2 {
        let rhs = nalgebra::DVector::from_iterator(j, values.iter().map(|v| if part == 0 { -v.re } else { -v.im }));
        let beta = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("zero-constraint system is singular".into()))?;
        for k in 0..j {
            if part == 0 {
                c[k].re += beta[k];
            } else {
                c[k].im += beta[k];
            }
        }
    }
    SpectralState::new(c)
}

/// Measured growth of `||psi - f||^2` over a window against `C |t2 - t1|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityCheck {
    pub t1: f64,
    pub t2: f64,
    pub lhs_growth: f64,
    pub constant: f64,
    pub rhs_bound: f64,
    pub passed: bool,
}

pub const CONTINUITY_TOL: f64 = 1e-6;

/// Evaluates both sides of the continuity estimate on the stored samples
/// of `traj` between `t1` (reference) and `t2`. `profile(t)` must vanish at
/// the Dirac positions of every sample; `dt_fd` is the step of the central
/// difference used for `d f / dt`.
pub fn continuity_check(
    traj: &TrajectoryRecord,
    profile: impl Fn(f64) -> Result<SpectralState>,
    t1: f64,
    t2: f64,
    dt_fd: f64,
) -> Result<ContinuityCheck> {
    let states = traj
        .states
        .as_ref()
        .ok_or_else(|| Error::validation("continuity check needs stored states"))?;
    let (lo, hi) = (t1.min(t2), t1.max(t2));
    let samples: Vec<usize> = (0..traj.len())
        .filter(|&s| traj.sample_times[s] >= lo - 1e-12 && traj.sample_times[s] <= hi + 1e-12)
        .collect();
    if samples.len() < 2 {
        return Err(Error::validation(format!("fewer than two samples in [{lo}, {hi}]")));
    }
    let reference = traj.nearest_sample(t1);
    if (traj.sample_times[reference] - t1).abs() > 1e-9 {
        return Err(Error::validation(format!("no sample at t1 = {t1}")));
    }
    let psi1 = &states[reference];
    let psi1_norm = psi1.norm();
    let f1 = profile(t1)?;
    let base = (psi1 - &f1).norm_sq();

    let mut growth = f64::NEG_INFINITY;
    let mut sup: f64 = 0.0;
    for &s in &samples {
        let t = traj.sample_times[s];
        let f = profile(t)?;
        let at_diracs = f.evaluate(&traj.positions[s])?;
        if at_diracs.iter().any(|v| v.norm() > 1e-6 * f.norm().max(1e-300)) {
            return Err(Error::validation(format!("profile does not vanish at the Diracs at t = {t}")));
        }
        growth = growth.max((&states[s] - &f).norm_sq() - base);
        let fxx: f64 = f
            .coefficients()
            .iter()
            .enumerate()
            .map(|(k, c)| (Basis::laplacian_eigenvalue(k + 1) * c.norm()).powi(2))
            .sum::<f64>()
            .sqrt();
        let ft = (&profile(t + dt_fd)? - &profile(t - dt_fd)?).norm() / (2.0 * dt_fd);
        sup = sup.max(psi1_norm * fxx + (f.norm() + psi1_norm) * ft);
    }
    let constant = 2.0 * sup;
    let rhs = constant * (t2 - t1).abs();
    Ok(ContinuityCheck { t1, t2, lhs_growth: growth, constant, rhs_bound: rhs, passed: growth <= rhs + CONTINUITY_TOL })
}

/// Minimal SVG line chart of several series over a shared axis.
pub fn write_svg_chart<W: Write>(mut out: W, title: &str, x: &[f64], series: &[(String, Vec<f64>)]) -> Result<()> {
    const W: f64 = 720.0;
    const H: f64 = 360.0;
    const PAD: f64 = 48.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let finite = |v: &f64| v.is_finite();
    let (x0, x1) = x.iter().filter(|v| finite(v)).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (y0, y1) = series
        .iter()
        .flat_map(|s| s.1.iter())
        .filter(|v| finite(v))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let px = |v: f64| PAD + (v - x0) / span(x0, x1) * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (v - y0) / span(y0, y1) * (H - 2.0 * PAD);
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#)?;
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#, W / 2.0, escape(title))?;
    writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    )?;
    for (txt, xx, yy) in [
        (format!("{x0:.3}"), PAD, H - PAD + 16.0),
        (format!("{x1:.3}"), W - PAD, H - PAD + 16.0),
    ] {
        writeln!(out, r#"<text x="{xx}" y="{yy}" text-anchor="middle" font-family="sans-serif" font-size="10">{txt}</text>"#)?;
    }
    for (txt, yy) in [(format!("{y0:.3}"), H - PAD), (format!("{y1:.3}"), PAD)] {
        writeln!(out, r#"<text x="{}" y="{yy}" text-anchor="end" font-family="sans-serif" font-size="10">{txt}</text>"#, PAD - 4.0)?;
    }
    for (i, (label, ys)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (xv, yv) in x.iter().zip(ys).filter(|(a, b)| finite(a) && finite(b)) {
            let _ = write!(d, "{}{:.2},{:.2}", if d.is_empty() { "M" } else { " L" }, px(*xv), py(*yv));
        }
        writeln!(out, r#"<path d="{d}" stroke="{color}" fill="none" stroke-width="1.5"/>"#)?;
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            W - PAD + 4.0,
            PAD + 14.0 * i as f64,
            escape(label)
        )?;
    }
    writeln!(out, "</svg>")?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
