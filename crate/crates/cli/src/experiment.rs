//! Preset runs: the two permutation experiments and the slope sweep.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Args;

use deltaperm::config::{Preset, ScheduleSource};
use deltaperm::diagnostics::{permutation_report, slope_sweep, write_sweep_csv, write_svg_chart, SweepGeometry};
use deltaperm::integrator::{evolve, RecordOptions, TimeGrid};
use deltaperm::planner::PlanParams;
use deltaperm::{Error, Result};

use crate::{create, energy_chart, parse_list, plan_summary, PlanOverrides};

fn sci(v: &[f64]) -> String {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", cells.join(", "))
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// 1, 2 or sweep
    #[arg(long)]
    id: String,
    /// Run directory (default runs/<name>)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also write SVG charts
    #[arg(long)]
    svg: bool,
    #[arg(long = "N")]
    n_modes: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[command(flatten)]
    overrides: PlanOverrides,
    /// Sweep slopes
    #[arg(long, default_value = "1,1e-1,1e-2,1e-3,1e-4")]
    slopes: String,
}

pub fn run(a: ExperimentArgs) -> Result<ExitCode> {
    if a.id == "sweep" {
        return run_sweep(&a);
    }
    let preset = Preset::from_name(&a.id)?;
    let out_dir = a.out_dir.clone().unwrap_or_else(|| Path::new("runs").join(preset.name()));
    fs::create_dir_all(&out_dir)?;

    let mut cfg = preset.config();
    if let Some(n) = a.n_modes {
        cfg.n_modes = n;
    }
    if let Some(dt) = a.dt {
        cfg.dt = dt;
    }
    if let ScheduleSource::Plan { params, .. } = &mut cfg.schedule {
        *params = a.overrides.apply(PlanParams::default())?;
    }
    let resolved = cfg.resolve()?;
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }
    let plan = resolved.plan.as_ref().expect("presets are planned");

    let mut manifest = resolved.config.clone();
    manifest.schedule = ScheduleSource::Inline(resolved.schedule.clone());
    let manifest_json = serde_json::json!({
        "experiment": preset.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "sigma": preset.sigma(),
        "plan_params": match &cfg.schedule { ScheduleSource::Plan { params, .. } => Some(params), _ => None },
        "config": manifest,
    });
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest_json)?)?;
    fs::write(out_dir.join("schedule.json"), resolved.schedule.to_json()?)?;
    fs::write(out_dir.join("plan.json"), serde_json::to_string_pretty(plan)?)?;

    let grid = TimeGrid::for_schedule(&resolved.schedule, cfg.dt)?;
    let opts = RecordOptions {
        record_every: cfg.diagnostics.record_every,
        mode_count: cfg.diagnostics.mode_count,
        store_states: false,
        eigen_modes: None,
    };
    let rec = evolve(&resolved.initial, &resolved.schedule, &grid, &opts)?;
    let report = permutation_report(&rec, &plan.sigma, Some(&plan.pairing))?;

    let mut w = create(&out_dir.join("trajectory.csv"))?;
    rec.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&out_dir.join("report.csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;

    let published = preset.published();
    let mut summary = plan_summary(plan);
    summary += "\n";
    summary += &report.summary(Some(preset.tolerances()));
    summary += &format!("\npublished: ||w|| = {:.3e}, |c_k| errors = {}\n", published.residual_norm, sci(&published.coefficient_errors));
    summary += &format!(
        "this run:  ||w|| = {:.3e}, |c_k| errors = {}\n",
        report.residual_norm,
        sci(&report.coefficient_errors)
    );
    fs::write(out_dir.join("summary.txt"), &summary)?;

    if a.svg {
        let m = plan.n_modes();
        energy_chart(&out_dir.join("energies.svg"), "mode energies |c_k|^2", &rec.sample_times, &rec.mode_energies, m)?;
        let series: Vec<(String, Vec<f64>)> = (0..rec.n_diracs())
            .map(|j| (format!("a_{}", j + 1), rec.positions.iter().map(|p| p[j]).collect()))
            .collect();
        let mut w = create(&out_dir.join("positions.svg"))?;
        write_svg_chart(&mut w, "Dirac positions", &rec.sample_times, &series)?;
        w.flush()?;
    }
    print!("{summary}");
    eprintln!("wrote {}", out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn run_sweep(a: &ExperimentArgs) -> Result<ExitCode> {
    let out_dir = a.out_dir.clone().unwrap_or_else(|| Path::new("runs").join("sweep"));
    fs::create_dir_all(&out_dir)?;
    let slopes: Vec<f64> = parse_list(&a.slopes, "slope")?;
    if slopes.is_empty() {
        return Err(Error::Validation("no slopes given".into()));
    }
    let mut geometry = SweepGeometry::default();
    if let Some(n) = a.n_modes {
        geometry.n_modes = n;
    }
    if let Some(dt) = a.dt {
        geometry.dt = dt;
    }
    if let Some(eta) = a.overrides.eta_max {
        geometry.eta = eta;
    }
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&serde_json::json!({
        "experiment": "sweep",
        "version": env!("CARGO_PKG_VERSION"),
        "geometry": geometry,
        "slopes": slopes,
    }))?)?;

    for (name, weights) in [("2phi1", vec![2.0]), ("2phi1_phi2", vec![2.0, 1.0])] {
        let rows = slope_sweep(&slopes, &weights, &geometry)?;
        let mut w = create(&out_dir.join(format!("sweep_{name}.csv")))?;
        write_sweep_csv(&rows, &mut w)?;
        w.flush()?;
        println!("initial {name}:");
        println!("  {:>8}  {}", "slope", (1..=geometry.report_modes).map(|k| format!("{:>10}", format!("E_{k}"))).collect::<String>());
        for r in &rows {
            println!("  {:>8.0e}  {}", r.slope, r.final_energies.iter().map(|e| format!("{e:>10.4}")).collect::<String>());
        }
        if a.svg {
            let x: Vec<f64> = rows.iter().map(|r| r.slope.log10()).collect();
            let series: Vec<(String, Vec<f64>)> = (0..geometry.report_modes)
                .map(|k| (format!("E_{}", k + 1), rows.iter().map(|r| r.final_energies[k]).collect()))
                .collect();
            let mut w = create(&out_dir.join(format!("sweep_{name}.svg")))?;
            write_svg_chart(&mut w, &format!("final energies vs log10 slope ({name})"), &x, &series)?;
            w.flush()?;
        }
    }
    eprintln!("wrote {}", out_dir.display());
    Ok(ExitCode::SUCCESS)
}
