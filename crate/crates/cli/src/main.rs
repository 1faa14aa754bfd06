use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use deltaperm::config::RunConfig;
use deltaperm::diagnostics::{permutation_report, write_svg_chart};
use deltaperm::hamiltonian::{split_limit_eigenvalues, write_eigen_report, DiracConfig, RankStructuredHamiltonian};
use deltaperm::integrator::{convergence_study, evolve, ConvergenceProblem, RecordOptions, TimeGrid};
use deltaperm::planner::{plan_permutation, Permutation, PermutationPlan, PlanParams};
use deltaperm::schedule::{validate, ControlSchedule, ValidationLimits};
use deltaperm::spectral::Basis;
use deltaperm::{Error, Result};

mod experiment;

#[derive(Parser, Debug)]
#[command(name = "deltaperm", version, about = "Energy permutation by moving Dirac potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a run configuration and write its trajectory
    Evolve(EvolveArgs),
    /// Plan a control schedule realizing a permutation
    Plan(PlanArgs),
    /// Eigenvalues of a static Dirac configuration
    Eigen(EigenArgs),
    /// Self-convergence study in N and dt
    Convergence(ConvergenceArgs),
    /// Run a preset end to end: 1, 2 or sweep
    Experiment(experiment::ExperimentArgs),
    /// Lint a schedule file
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[arg(long)]
    config: PathBuf,
    /// Trajectory CSV (stdout when neither this nor the config names one)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Permutation report; `.csv` gets per-mode rows, anything else the summary
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
    /// SVG chart of the leading mode energies
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    record_every: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct PlanOverrides {
    /// JSON file with planner parameters; flags below override it
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long = "T", alias = "total-time")]
    total_time: Option<f64>,
    #[arg(long)]
    eta_max: Option<f64>,
    #[arg(long)]
    adiabatic_slope: Option<f64>,
    #[arg(long)]
    transition_slope: Option<f64>,
    #[arg(long)]
    transition_width: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    min_gap: Option<f64>,
    #[arg(long)]
    min_dwell: Option<f64>,
}

impl PlanOverrides {
    pub fn apply(&self, base: PlanParams) -> Result<PlanParams> {
        let mut p = match &self.params {
            Some(path) => serde_json::from_str(&read_text(path)?)
                .map_err(|e| Error::Validation(format!("plan params {}: {e}", path.display())))?,
            None => base,
        };
        let set = |field: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *field = v;
            }
        };
        set(&mut p.total_time, self.total_time);
        set(&mut p.eta_max, self.eta_max);
        set(&mut p.adiabatic_slope, self.adiabatic_slope);
        set(&mut p.transition_slope, self.transition_slope);
        set(&mut p.transition_width, self.transition_width);
        set(&mut p.margin, self.margin);
        set(&mut p.min_gap, self.min_gap);
        set(&mut p.min_dwell, self.min_dwell);
        Ok(p)
    }
}

#[derive(Args, Debug)]
struct PlanArgs {
    /// One-line permutation, e.g. 2,3,1
    #[arg(long)]
    sigma: String,
    #[command(flatten)]
    overrides: PlanOverrides,
    #[arg(long, default_value = "schedule.json")]
    out: PathBuf,
    /// Plan details (positions, lengths, events, pairing) as JSON
    #[arg(long, default_value = "plan.json")]
    summary: PathBuf,
}

#[derive(Args, Debug)]
struct EigenArgs {
    #[arg(long)]
    eta: f64,
    /// Comma-separated Dirac positions; empty for none
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    positions: String,
    #[arg(long = "N", default_value_t = 200)]
    n_modes: usize,
    #[arg(long, default_value_t = 10)]
    modes: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    /// Run configuration supplying the schedule and initial coefficients
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "25,50,100")]
    n_list: String,
    #[arg(long, default_value = "4e-3,2e-3,1e-3")]
    dt_list: String,
    #[arg(long, default_value_t = 400)]
    n_ref: usize,
    #[arg(long, default_value_t = 1e-5)]
    dt_ref: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long)]
    slope_cap: Option<f64>,
    #[arg(long)]
    transition_slope: Option<f64>,
    #[arg(long)]
    min_gap: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evolve(a) => cmd_evolve(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Eigen(a) => cmd_eigen(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::Experiment(a) => experiment::run(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            report_error(&e);
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible { .. } => 3,
        Error::Validation(_) | Error::Domain(_) | Error::Dimension { .. } | Error::Parse(_) | Error::Json(_) => 2,
        _ => 1,
    }
}

/// One line on stderr: `error[<kind>]: <message>`.
fn report_error(e: &Error) {
    let (kind, msg) = match e {
        Error::Validation(m) => ("validation", m.clone()),
        Error::Domain(m) => ("domain", m.clone()),
        Error::Parse(m) => ("parse", m.clone()),
        Error::Numerical(m) => ("numerical", m.clone()),
        Error::Capability(m) => ("capability", m.clone()),
        Error::Infeasible { reason, required_t } => ("infeasible", format!("{reason}; required_T={required_t}")),
        Error::Dimension { .. } => ("dimension", e.to_string()),
        Error::Io(_) => ("io", e.to_string()),
        Error::Json(_) => ("json", e.to_string()),
    };
    eprintln!("error[{kind}]: {msg}");
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes through `f` to `path`, or to stdout when `path` is `None`.
fn write_to(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
        }
    }
    Ok(())
}

pub fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad {what} entry '{s}'"))))
        .collect()
}

pub fn energy_chart(path: &Path, title: &str, times: &[f64], energies: &[Vec<f64>], modes: usize) -> Result<()> {
    let series: Vec<(String, Vec<f64>)> = (0..modes)
        .map(|k| (format!("|c_{}|^2", k + 1), energies.iter().map(|e| e.get(k).copied().unwrap_or(f64::NAN)).collect()))
        .collect();
    let mut w = create(path)?;
    write_svg_chart(&mut w, title, times, &series)?;
    w.flush()?;
    Ok(())
}

fn cmd_evolve(a: EvolveArgs) -> Result<ExitCode> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(r) = a.record_every {
        cfg.diagnostics.record_every = r;
    }
    if a.out.is_some() {
        cfg.outputs.trajectory = a.out.clone();
    }
    if a.report.is_some() {
        cfg.outputs.report = a.report.clone();
    }
    if a.snapshot_dir.is_some() {
        cfg.outputs.snapshot_dir = a.snapshot_dir.clone();
    }
    let resolved = cfg.resolve()?;
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }
    let cfg = &resolved.config;
    let snaps = &cfg.outputs.snapshot_times;
    let grid = TimeGrid::for_schedule(&resolved.schedule, cfg.dt)?.with_extra_snaps(snaps)?;
    let opts = RecordOptions {
        record_every: cfg.diagnostics.record_every,
        mode_count: cfg.diagnostics.mode_count,
        store_states: !snaps.is_empty(),
        eigen_modes: cfg.diagnostics.eigen_series.then_some(cfg.diagnostics.eigen_modes),
    };
    let rec = evolve(&resolved.initial, &resolved.schedule, &grid, &opts)?;

    write_to(cfg.outputs.trajectory.as_deref(), |w| rec.write_csv(w))?;
    if let (Some(series), Some(path)) = (&rec.eigenvalues, &cfg.outputs.trajectory) {
        let eig_path = path.with_extension("eigenvalues.csv");
        let mut w = create(&eig_path)?;
        let k = series.first().map_or(0, Vec::len);
        let header: Vec<String> = std::iter::once("time".to_string()).chain((1..=k).map(|i| format!("lambda_{i}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for (t, row) in rec.sample_times.iter().zip(series) {
            let cells: Vec<String> = std::iter::once(*t).chain(row.iter().copied()).map(deltaperm::io::fmt_f64).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()?;
    }
    if !snaps.is_empty() {
        let dir = cfg.outputs.snapshot_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        let states = rec.states.as_ref().expect("states stored when snapshots are requested");
        for &t in snaps {
            let s = rec.nearest_sample(t);
            let mut w = create(&dir.join(format!("snapshot_t{t}.csv")))?;
            states[s].write_snapshot_csv(&mut w)?;
            w.flush()?;
        }
    }
    if let Some(path) = &a.svg {
        energy_chart(path, "mode energies", &rec.sample_times, &rec.mode_energies, cfg.diagnostics.mode_count.min(6))?;
    }
    if let (Some(path), Some(plan)) = (&cfg.outputs.report, &resolved.plan) {
        let report = permutation_report(&rec, &plan.sigma, Some(&plan.pairing))?;
        let mut w = create(path)?;
        if path.extension().is_some_and(|e| e == "csv") {
            report.write_csv(&mut w)?;
        } else {
            w.write_all(report.summary(None).as_bytes())?;
        }
        w.flush()?;
    }
    let drift = rec.final_state.norm_sq() - rec.initial_state.norm_sq();
    eprintln!(
        "evolved {} steps to t = {}; norm^2 {:.12} -> {:.12} (drift {drift:.3e})",
        rec.steps,
        grid.t_end(),
        rec.initial_state.norm_sq(),
        rec.final_state.norm_sq()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn plan_summary(plan: &PermutationPlan) -> String {
    let mut s = format!("sigma = {:?}\n", plan.sigma.images());
    s += &format!("start positions {:?}, lengths {:?}\n", plan.start_positions, plan.start_lengths);
    s += &format!("final positions {:?}, lengths {:?}\n", plan.final_positions, plan.final_lengths);
    s += &format!("{} transition events\n", plan.transition_events.len());
    for ev in &plan.transition_events {
        s += &format!("  t = {:.4}  Dirac {} at x = {:.6}  intervals {:?}\n", ev.time, ev.dirac + 1, ev.position, ev.pairs);
    }
    s += &format!("realized pairing (final k <- initial): {:?}\n", plan.pairing);
    s += &format!("minimum total time {:.3}\n", plan.minimum_total_time);
    s
}

fn cmd_plan(a: PlanArgs) -> Result<ExitCode> {
    let sigma = Permutation::parse(&a.sigma)?;
    let params = a.overrides.apply(PlanParams::default())?;
    let (plan, schedule) = plan_permutation(&sigma, &params)?;
    let mut w = create(&a.out)?;
    w.write_all(schedule.to_json()?.as_bytes())?;
    w.flush()?;
    let mut w = create(&a.summary)?;
    w.write_all(serde_json::to_string_pretty(&plan)?.as_bytes())?;
    w.flush()?;
    print!("{}", plan_summary(&plan));
    Ok(ExitCode::SUCCESS)
}

fn cmd_eigen(a: EigenArgs) -> Result<ExitCode> {
    let positions: Vec<f64> = parse_list(&a.positions, "position")?;
    let config = DiracConfig::new(a.eta, positions.clone())?;
    let h = RankStructuredHamiltonian::assemble(&config, Basis::new(a.n_modes)?);
    let eig = h.eigendecompose()?;
    write_to(a.out.as_deref(), |w| write_eigen_report(w, &[(0.0, &eig)], a.modes))?;
    if !positions.is_empty() {
        let limit = split_limit_eigenvalues(&positions, a.modes.min(eig.dim()))?;
        eprintln!("split limit: {limit:.6?}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_convergence(a: ConvergenceArgs) -> Result<ExitCode> {
    let resolved = RunConfig::load(&a.config)?.resolve()?;
    let leading = resolved.initial.coefficients();
    let last = leading.iter().rposition(|c| c.norm() > 0.0).map_or(1, |i| i + 1);
    let problem = ConvergenceProblem { schedule: resolved.schedule, initial: leading[..last].to_vec() };
    let n_list: Vec<usize> = parse_list(&a.n_list, "N")?;
    let dt_list: Vec<f64> = parse_list(&a.dt_list, "dt")?;
    let table = convergence_study(&problem, &n_list, &dt_list, (a.n_ref, a.dt_ref))?;
    let orders = table.temporal_orders();
    write_to(a.out.as_deref(), |w| {
        writeln!(w, "sweep,N,dt,error,observed_order")?;
        for r in &table.spatial {
            writeln!(w, "spatial,{},{},{},", r.n_modes, deltaperm::io::fmt_f64(r.dt), deltaperm::io::fmt_f64(r.error))?;
        }
        for (i, r) in table.temporal.iter().enumerate() {
            let order = if i == 0 { String::new() } else { deltaperm::io::fmt_f64(orders[i - 1]) };
            writeln!(w, "temporal,{},{},{},{order}", r.n_modes, deltaperm::io::fmt_f64(r.dt), deltaperm::io::fmt_f64(r.error))?;
        }
        Ok(())
    })?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(a: ValidateArgs) -> Result<ExitCode> {
    let schedule = ControlSchedule::from_json(&read_text(&a.schedule)?)
        .map_err(|e| Error::Validation(format!("schedule: {e}")))?;
    let mut limits = ValidationLimits::default();
    if let Some(v) = a.slope_cap {
        limits.adiabatic_slope_max = v;
    }
    if let Some(v) = a.transition_slope {
        limits.transition_slope = v;
    }
    if let Some(v) = a.min_gap {
        limits.min_gap = v;
    }
    if let Some(v) = a.margin {
        limits.margin = v;
    }
    let violations = validate(&schedule, &limits);
    for v in &violations {
        println!("{v}");
    }
    if violations.is_empty() {
        println!("ok: {} segments, T = {}", schedule.segments().len(), schedule.total_time());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error[validation]: {} schedule violation(s)", violations.len());
        Ok(ExitCode::from(2))
    }
}
