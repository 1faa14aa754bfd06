//! Implicit midpoint (Cayley) time stepping through a control schedule.
//!
//! One step solves `(I + i dt/2 H_mid) psi' = (I - i dt/2 H_mid) psi` with
//! `H_mid` assembled at the midpoint time. `H` is diagonal plus rank `J`, so
//! the left operator is inverted with the Woodbury identity: an entrywise
//! diagonal inverse plus a `J x J` complex capacitance solve. The Cayley
//! transform of a Hermitian matrix is unitary, so the norm is conserved up
//! to rounding.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::{validate_positions, DiracConfig, RankStructuredHamiltonian};
use crate::io::{csv_row, fmt_f64};
use crate::schedule::ControlSchedule;
use crate::spectral::{Basis, SpectralState};

/// Capacitance systems worse conditioned than this signal corrupted input.
pub const MAX_CAPACITANCE_CONDITION: f64 = 1e12;

/// Steps between non-finite checks.
const FINITE_CHECK_STRIDE: usize = 1000;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Uniform sub-grids between consecutive snap points.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    dt: f64,
    snap_points: Vec<f64>,
}

impl TimeGrid {
    /// Grid on `[t_start, t_end]` whose nodes include every snap point
    /// strictly inside the range.
    pub fn new(t_start: f64, t_end: f64, dt: f64, snap_points: &[f64]) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation("dt must be positive"));
        }
        if !(t_start < t_end) {
            return Err(Error::validation(format!("empty time range [{t_start}, {t_end}]")));
        }
        let tol = 1e-12 * t_end.abs().max(1.0);
        let mut snaps: Vec<f64> = snap_points
            .iter()
            .copied()
            .filter(|&t| t > t_start + tol && t < t_end - tol)
            .collect();
        snaps.sort_by(f64::total_cmp);
        snaps.dedup_by(|a, b| (*a - *b).abs() <= tol);
        Ok(TimeGrid { t_start, t_end, dt, snap_points: snaps })
    }

    /// Grid over the whole schedule with every segment boundary as a node.
    pub fn for_schedule(schedule: &ControlSchedule, dt: f64) -> Result<Self> {
        Self::new(0.0, schedule.total_time(), dt, &schedule.boundaries())
    }

    /// Grid over a sub-window of the schedule.
    pub fn for_window(schedule: &ControlSchedule, t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        Self::new(t_start, t_end, dt, &schedule.boundaries())
    }

    pub fn with_extra_snaps(&self, extra: &[f64]) -> Result<Self> {
        let mut all = self.snap_points.clone();
        all.extend_from_slice(extra);
        Self::new(self.t_start, self.t_end, self.dt, &all)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn snap_points(&self) -> &[f64] {
        &self.snap_points
    }

    /// `(begin, end, steps)` per sub-grid; each step is `<= dt`.
    pub fn pieces(&self) -> Vec<(f64, f64, usize)> {
        let mut edges = Vec::with_capacity(self.snap_points.len() + 2);
        edges.push(self.t_start);
        edges.extend_from_slice(&self.snap_points);
        edges.push(self.t_end);
        edges
            .windows(2)
            .map(|w| {
                let len = w[1] - w[0];
                let steps = ((len / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                (w[0], w[1], steps)
            })
            .collect()
    }

    pub fn n_steps(&self) -> usize {
        self.pieces().iter().map(|p| p.2).sum()
    }
}

/// Scratch buffers for repeated Cayley steps at a fixed size.
#[derive(Debug, Clone)]
pub struct MidpointStepper {
    rhs: Vec<Complex64>,
    hpsi: Vec<Complex64>,
    z: Vec<Vec<Complex64>>,
    cap: Vec<Complex64>,
    proj: Vec<Complex64>,
}

impl MidpointStepper {
    pub fn new(n: usize, j: usize) -> Self {
        MidpointStepper {
            rhs: vec![Complex64::default(); n],
            hpsi: vec![Complex64::default(); n],
            z: vec![vec![Complex64::default(); n]; j],
            cap: vec![Complex64::default(); j * j],
            proj: vec![Complex64::default(); j],
        }
    }

    /// Advances `psi` in place by one Cayley step with generator `h`.
    pub fn step(&mut self, h: &RankStructuredHamiltonian, dt: f64, psi: &mut [Complex64]) -> Result<()> {
        let n = h.dim();
        if psi.len() != n {
            return Err(Error::Dimension { expected: n, got: psi.len() });
        }
        let j = h.rank_vectors().len();
        if self.rhs.len() != n || self.z.len() != j {
            *self = MidpointStepper::new(n, j);
        }
        let tau = 0.5 * dt;

        // rhs = (I - i tau H) psi, then y = Delta^{-1} rhs with Delta = I + i tau diag(nu)
        h.apply_into(psi, &mut self.hpsi);
        for ((r, &p), &hp) in self.rhs.iter_mut().zip(psi.iter()).zip(&self.hpsi) {
            *r = p - I * tau * hp;
        }
        for (r, &nu) in self.rhs.iter_mut().zip(h.diagonal()) {
            *r /= Complex64::new(1.0, tau * nu);
        }

        let eta = h.strength();
        if j == 0 || eta == 0.0 {
            psi.copy_from_slice(&self.rhs);
            return Ok(());
        }

        // Z = Delta^{-1} S, C = I + 2 i tau eta S^T Z, solve C w = S^T y
        let coupling = I * (2.0 * tau * eta);
        for (zj, s) in self.z.iter_mut().zip(h.rank_vectors()) {
            for ((z, &sk), &nu) in zj.iter_mut().zip(s).zip(h.diagonal()) {
                *z = sk / Complex64::new(1.0, tau * nu);
            }
        }
        let rank = h.rank_vectors();
        for a in 0..j {
            for b in 0..j {
                let dot: Complex64 = rank[a].iter().zip(&self.z[b]).map(|(&s, z)| z * s).sum();
                let delta = if a == b { 1.0 } else { 0.0 };
                self.cap[a * j + b] = coupling * dot + delta;
            }
            self.proj[a] = rank[a].iter().zip(&self.rhs).map(|(&s, y)| y * s).sum();
        }
        let w = solve_small(&self.cap, &self.proj, j)?;
        for (zj, wj) in self.z.iter().zip(&w) {
            let c = coupling * wj;
            for (y, z) in self.rhs.iter_mut().zip(zj) {
                *y -= c * z;
            }
        }
        psi.copy_from_slice(&self.rhs);
        Ok(())
    }
}

/// Gauss-Jordan inverse of the `j x j` capacitance matrix with a 1-norm
/// condition check, then `C^{-1} b`.
fn solve_small(c: &[Complex64], b: &[Complex64], j: usize) -> Result<Vec<Complex64>> {
    let norm1 = |m: &[Complex64]| {
        (0..j)
            .map(|col| (0..j).map(|row| m[row * j + col].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mut a = c.to_vec();
    let mut inv = vec![Complex64::default(); j * j];
    for i in 0..j {
        inv[i * j + i] = Complex64::new(1.0, 0.0);
    }
    for col in 0..j {
        let pivot = (col..j)
            .max_by(|&x, &y| a[x * j + col].norm().total_cmp(&a[y * j + col].norm()))
            .unwrap_or(col);
        if a[pivot * j + col].norm() == 0.0 {
            return Err(Error::Numerical("singular capacitance system".into()));
        }
        if pivot != col {
            for k in 0..j {
                a.swap(pivot * j + k, col * j + k);
                inv.swap(pivot * j + k, col * j + k);
            }
        }
        let p = a[col * j + col];
        for k in 0..j {
            a[col * j + k] /= p;
            inv[col * j + k] /= p;
        }
        for row in 0..j {
            if row == col {
                continue;
            }
            let f = a[row * j + col];
            if f == Complex64::default() {
                continue;
            }
            for k in 0..j {
                let (ak, ik) = (a[col * j + k], inv[col * j + k]);
                a[row * j + k] -= f * ak;
                inv[row * j + k] -= f * ik;
            }
        }
    }
    let cond = norm1(c) * norm1(&inv);
    if !(cond <= MAX_CAPACITANCE_CONDITION) {
        return Err(Error::Numerical(format!(
            "capacitance condition number {cond:e} exceeds {MAX_CAPACITANCE_CONDITION:e}"
        )));
    }
    Ok((0..j)
        .map(|row| (0..j).map(|k| inv[row * j + k] * b[k]).sum())
        .collect())
}

/// One implicit midpoint step of `i psi' = H_mid psi`.
pub fn step_midpoint(state: &SpectralState, h_mid: &RankStructuredHamiltonian, dt: f64) -> Result<SpectralState> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(Error::validation("dt must be finite and non-zero"));
    }
    let mut psi = state.coefficients().to_vec();
    MidpointStepper::new(state.len(), h_mid.rank_vectors().len()).step(h_mid, dt, &mut psi)?;
    SpectralState::new(psi)
}

/// What to record during [`evolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct RecordOptions {
    /// Record every this many steps (segment boundaries are always recorded).
    pub record_every: usize,
    /// Number of leading sine-mode energies kept per sample.
    pub mode_count: usize,
    /// Keep the full state at every sample.
    pub store_states: bool,
    /// Leading eigenvalues of `H(t)` per sample (dense eigensolve per sample).
    pub eigen_modes: Option<usize>,
}

impl Default for RecordOptions {
    fn default() -> Self {
        RecordOptions {
            record_every: 100,
            mode_count: 10,
            store_states: true,
            eigen_modes: None,
        }
    }
}

/// Sampled time series of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub sample_times: Vec<f64>,
    pub eta: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub norm_sq: Vec<f64>,
    pub mode_energies: Vec<Vec<f64>>,
    pub interval_energies: Vec<Vec<f64>>,
    pub eigenvalues: Option<Vec<Vec<f64>>>,
    /// Parallel to `sample_times` when states were stored.
    pub states: Option<Vec<SpectralState>>,
    pub initial_state: SpectralState,
    pub final_state: SpectralState,
    pub steps: usize,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.sample_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times.is_empty()
    }

    pub fn n_diracs(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    /// Index of the sample closest to `t`.
    pub fn nearest_sample(&self, t: f64) -> usize {
        self.sample_times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map_or(0, |(i, _)| i)
    }

    /// Writes `time,eta,a_1..a_J,norm_sq,E_mode_1..E_mode_M,E_interval_0..E_interval_J`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let j = self.n_diracs();
        let m = self.mode_energies.first().map_or(0, Vec::len);
        let mut header = vec!["time".to_string(), "eta".to_string()];
        header.extend((1..=j).map(|k| format!("a_{k}")));
        header.push("norm_sq".into());
        header.extend((1..=m).map(|k| format!("E_mode_{k}")));
        header.extend((0..=j).map(|k| format!("E_interval_{k}")));
        writeln!(out, "{}", header.join(","))?;
        for s in 0..self.len() {
            let mut row = vec![fmt_f64(self.sample_times[s]), fmt_f64(self.eta[s])];
            row.extend(self.positions[s].iter().map(|&x| fmt_f64(x)));
            row.push(fmt_f64(self.norm_sq[s]));
            row.extend(self.mode_energies[s].iter().map(|&x| fmt_f64(x)));
            row.extend(self.interval_energies[s].iter().map(|&x| fmt_f64(x)));
            writeln!(out, "{}", csv_row(row))?;
        }
        Ok(())
    }
}

struct Recorder<'a> {
    opts: &'a RecordOptions,
    rec: TrajectoryRecord,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, eta: f64, positions: &[f64], psi: &[Complex64], h: &RankStructuredHamiltonian) -> Result<()> {
        let state = SpectralState::new(psi.to_vec())?;
        let energies = state.mode_energies();
        let m = self.opts.mode_count.min(energies.len());
        self.rec.sample_times.push(t);
        self.rec.eta.push(eta);
        self.rec.positions.push(positions.to_vec());
        self.rec.norm_sq.push(energies.iter().sum());
        self.rec.mode_energies.push(energies[..m].to_vec());
        self.rec.interval_energies.push(state.partition_energies(positions)?);
        if let (Some(k), Some(series)) = (self.opts.eigen_modes, self.rec.eigenvalues.as_mut()) {
            let eig = h.eigendecompose()?;
            series.push(eig.eigenvalues[..k.min(eig.dim())].to_vec());
        }
        if let Some(states) = self.rec.states.as_mut() {
            states.push(state);
        }
        Ok(())
    }
}

fn checked_sample(schedule: &ControlSchedule, t: f64, positions: &mut [f64]) -> Result<f64> {
    let eta = schedule.sample_into(t, positions)?;
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::validation(format!("eta({t}) = {eta} is not a finite non-negative value")));
    }
    validate_positions(positions).map_err(|e| Error::validation(format!("at t = {t}: {e}")))?;
    Ok(eta)
}

/// Integrates `initial` over `grid`, re-assembling `H` from `schedule` at
/// every midpoint time.
pub fn evolve(
    initial: &SpectralState,
    schedule: &ControlSchedule,
    grid: &TimeGrid,
    opts: &RecordOptions,
) -> Result<TrajectoryRecord> {
    if opts.record_every == 0 {
        return Err(Error::validation("record_every must be >= 1"));
    }
    let basis = initial.basis();
    let j = schedule.n_diracs();
    let mut positions = vec![0.0; j];
    let eta0 = checked_sample(schedule, grid.t_start(), &mut positions)?;
    checked_sample(schedule, grid.t_end(), &mut vec![0.0; j])?;
    let mut h = RankStructuredHamiltonian::assemble(&DiracConfig::new(eta0, positions.clone())?, basis);
    if !initial.all_finite() {
        return Err(Error::Numerical("initial state has non-finite coefficients".into()));
    }

    let mut psi = initial.coefficients().to_vec();
    let mut rec = Recorder {
        opts,
        rec: TrajectoryRecord {
            sample_times: vec![],
            eta: vec![],
            positions: vec![],
            norm_sq: vec![],
            mode_energies: vec![],
            interval_energies: vec![],
            eigenvalues: opts.eigen_modes.map(|_| vec![]),
            states: opts.store_states.then(Vec::new),
            initial_state: initial.clone(),
            final_state: initial.clone(),
            steps: 0,
        },
    };
    rec.push(grid.t_start(), eta0, &positions, &psi, &h)?;

    let mut stepper = MidpointStepper::new(basis.n_modes(), j);
    let mut step = 0usize;
    let pieces = grid.pieces();
    for (p_idx, &(t0, t1, n)) in pieces.iter().enumerate() {
        let dt = (t1 - t0) / n as f64;
        for i in 0..n {
            let ta = t0 + i as f64 * dt;
            let tb = if i + 1 == n { t1 } else { t0 + (i + 1) as f64 * dt };
            let eta = checked_sample(schedule, 0.5 * (ta + tb), &mut positions)?;
            h.reassemble(eta, &positions);
            stepper.step(&h, tb - ta, &mut psi)?;
            step += 1;
            if step.is_multiple_of(FINITE_CHECK_STRIDE) && !psi.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite state at t = {tb} (step {step}); check the schedule"
                )));
            }
            let boundary = i + 1 == n;
            if boundary || step.is_multiple_of(opts.record_every) {
                let eta_b = checked_sample(schedule, tb, &mut positions)?;
                if opts.eigen_modes.is_some() {
                    h.reassemble(eta_b, &positions);
                }
                rec.push(tb, eta_b, &positions, &psi, &h)?;
            }
        }
        let _ = p_idx;
    }
    if !psi.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        return Err(Error::Numerical(format!("non-finite final state (step {step})")));
    }
    let mut out = rec.rec;
    out.final_state = SpectralState::new(psi)?;
    out.steps = step;
    Ok(out)
}

/// Initial data and schedule for a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceProblem {
    pub schedule: ControlSchedule,
    /// Leading sine coefficients; zero-padded to each run's basis.
    pub initial: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n_modes: usize,
    pub dt: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    /// Errors over the N list at `dt_ref`, against `(N_ref, dt_ref)`.
    pub spatial: Vec<ConvergenceRow>,
    /// Errors over the dt list at `N_ref`, against `(N_ref, dt_ref)`.
    pub temporal: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// `log(e_i / e_{i+1}) / log(dt_i / dt_{i+1})` for consecutive temporal rows.
    pub fn temporal_orders(&self) -> Vec<f64> {
        self.temporal
            .windows(2)
            .map(|w| (w[0].error / w[1].error).ln() / (w[0].dt / w[1].dt).ln())
            .collect()
    }
}

fn final_state(problem: &ConvergenceProblem, n: usize, dt: f64) -> Result<SpectralState> {
    let basis = Basis::new(n)?;
    let initial = SpectralState::from_leading_complex(&problem.initial, basis)?;
    let grid = TimeGrid::for_schedule(&problem.schedule, dt)?;
    let opts = RecordOptions { record_every: usize::MAX, store_states: false, mode_count: 1, eigen_modes: None };
    Ok(evolve(&initial, &problem.schedule, &grid, &opts)?.final_state)
}

/// L2 distance between a run and the first `N` coefficients of the reference.
fn l2_error(run: &SpectralState, reference: &SpectralState) -> f64 {
    (run - &reference.project(run.basis())).norm()
}

/// Runs `f` over `items` on scoped threads, preserving order. Sequential
/// on wasm, which has no threads.
pub(crate) fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if cfg!(target_arch = "wasm32") {
        return items.iter().map(f).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = items.iter().map(|it| scope.spawn(|| f(it))).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Self-convergence in N (at `dt_ref`) and in dt (at `N_ref`) against the
/// single reference run `(N_ref, dt_ref)`.
pub fn convergence_study(
    problem: &ConvergenceProblem,
    n_list: &[usize],
    dt_list: &[f64],
    reference: (usize, f64),
) -> Result<ConvergenceTable> {
    let (n_ref, dt_ref) = reference;
    if n_list.iter().any(|&n| n >= n_ref) {
        return Err(Error::validation("every N must be below N_ref"));
    }
    if dt_list.iter().any(|&dt| dt <= dt_ref) {
        return Err(Error::validation("every dt must exceed dt_ref"));
    }
    let reference_state = final_state(problem, n_ref, dt_ref)?;
    let spatial = parallel_map(n_list, |&n| {
        final_state(problem, n, dt_ref).map(|s| ConvergenceRow { n_modes: n, dt: dt_ref, error: l2_error(&s, &reference_state) })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let temporal = parallel_map(dt_list, |&dt| {
        final_state(problem, n_ref, dt).map(|s| ConvergenceRow { n_modes: n_ref, dt, error: l2_error(&s, &reference_state) })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable { spatial, temporal })
}

/// Spatial sweep only: every N at a fixed dt against `N_ref` at that dt.
pub fn spatial_convergence(problem: &ConvergenceProblem, n_list: &[usize], n_ref: usize, dt: f64) -> Result<Vec<ConvergenceRow>> {
    let reference = final_state(problem, n_ref, dt)?;
    parallel_map(n_list, |&n| {
        final_state(problem, n, dt).map(|s| ConvergenceRow { n_modes: n, dt, error: l2_error(&s, &reference) })
    })
    .into_iter()
    .collect()
}

/// Temporal sweep only: every dt at a fixed N against `dt_ref` at that N.
pub fn temporal_convergence(problem: &ConvergenceProblem, n: usize, dt_list: &[f64], dt_ref: f64) -> Result<Vec<ConvergenceRow>> {
    let reference = final_state(problem, n, dt_ref)?;
    parallel_map(dt_list, |&dt| {
        final_state(problem, n, dt).map(|s| ConvergenceRow { n_modes: n, dt, error: l2_error(&s, &reference) })
    })
    .into_iter()
    .collect()
}
