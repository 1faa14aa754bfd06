//! Run configuration (JSON) and the two permutation presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{plan_permutation, Permutation, PermutationPlan, PlanParams};
use crate::schedule::ControlSchedule;
use crate::spectral::{Basis, SpectralState};

/// Where the control schedule comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleSource {
    /// Planned from a permutation, e.g. `{"plan": {"sigma": [2, 3, 1]}}`.
    Plan {
        sigma: Vec<usize>,
        #[serde(default)]
        params: PlanParams,
    },
    /// Path to a schedule JSON file, relative to the config file.
    File(PathBuf),
    Inline(ControlSchedule),
}

/// Initial state, as leading sine coefficients, a preset or a snapshot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpec {
    Coefficients(Vec<f64>),
    Preset(String),
    Snapshot(PathBuf),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub trajectory: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub snapshot_times: Vec<f64>,
    pub snapshot_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticToggles {
    pub eigen_series: bool,
    pub eigen_modes: usize,
    pub record_every: usize,
    pub mode_count: usize,
}

impl Default for DiagnosticToggles {
    fn default() -> Self {
        DiagnosticToggles { eigen_series: false, eigen_modes: 3, record_every: 100, mode_count: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "N", default = "default_n")]
    pub n_modes: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub schedule: ScheduleSource,
    pub initial: InitialSpec,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub diagnostics: DiagnosticToggles,
}

fn default_n() -> usize {
    200
}

fn default_dt() -> f64 {
    1e-3
}

/// A config with its schedule, plan and initial state materialized.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub schedule: ControlSchedule,
    pub plan: Option<PermutationPlan>,
    pub initial: SpectralState,
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    /// Makes relative input paths relative to `dir`.
    pub fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let ScheduleSource::File(p) = &mut self.schedule {
            fix(p);
        }
        if let InitialSpec::Snapshot(p) = &mut self.initial {
            fix(p);
        }
    }

    /// Checks ranges that do not need the schedule.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("dt must be positive"));
        }
        if self.n_modes == 0 {
            return Err(Error::validation("N must be >= 1"));
        }
        if self.diagnostics.record_every == 0 {
            return Err(Error::validation("record_every must be >= 1"));
        }
        Ok(())
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        self.validate()?;
        let mut warnings = vec![];
        let (schedule, plan) = match &self.schedule {
            ScheduleSource::Plan { sigma, params } => {
                let sigma = Permutation::new(sigma.clone())?;
                let (plan, schedule) = plan_permutation(&sigma, params)?;
                (schedule, Some(plan))
            }
            ScheduleSource::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Validation(format!("cannot read schedule {}: {e}", path.display())))?;
                (ControlSchedule::from_json(&text).map_err(|e| Error::Validation(format!("schedule: {e}")))?, None)
            }
            ScheduleSource::Inline(s) => (s.clone(), None),
        };
        if let Some(plan) = &plan {
            let m = plan.n_modes();
            if self.n_modes < m {
                return Err(Error::validation(format!("N = {} is below the permutation size M = {m}", self.n_modes)));
            }
            if self.n_modes < 10 * m {
                warnings.push(format!("N = {} is below 10 M = {}", self.n_modes, 10 * m));
            }
        }
        let t_end = schedule.total_time();
        if let Some(t) = self.outputs.snapshot_times.iter().find(|&&t| !(0.0..=t_end).contains(&t)) {
            return Err(Error::validation(format!("snapshot time {t} outside [0, {t_end}]")));
        }
        let basis = Basis::new(self.n_modes)?;
        let initial = match &self.initial {
            InitialSpec::Coefficients(c) => SpectralState::from_leading(c, basis)?,
            InitialSpec::Preset(name) => SpectralState::from_leading(&Preset::from_name(name)?.initial_coefficients(), basis)?,
            InitialSpec::Snapshot(path) => {
                let file = std::fs::File::open(path)
                    .map_err(|e| Error::Validation(format!("cannot read snapshot {}: {e}", path.display())))?;
                SpectralState::read_snapshot_csv(std::io::BufReader::new(file))?.project(basis)
            }
        };
        Ok(ResolvedRun { config: self.clone(), schedule, plan, initial, warnings })
    }
}

/// The two published permutation experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Experiment1,
    Experiment2,
}

/// Published final-time figures for a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedValues {
    pub residual_norm: f64,
    /// Per final mode, in mode order.
    pub coefficient_errors: Vec<f64>,
}

impl Preset {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "1" | "experiment1" | "exp1" => Ok(Preset::Experiment1),
            "2" | "experiment2" | "exp2" => Ok(Preset::Experiment2),
            _ => Err(Error::validation(format!("unknown preset '{name}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Experiment1 => "experiment1",
            Preset::Experiment2 => "experiment2",
        }
    }

    pub fn sigma(self) -> Vec<usize> {
        match self {
            Preset::Experiment1 => vec![2, 3, 1],
            Preset::Experiment2 => vec![2, 4, 3, 1],
        }
    }

    pub fn initial_coefficients(self) -> Vec<f64> {
        match self {
            Preset::Experiment1 => vec![1.0, 1.5, 2.0],
            Preset::Experiment2 => vec![0.5, 1.0, 1.5, 2.0],
        }
    }

    /// `(coefficient, residual)` acceptance tolerances.
    pub fn tolerances(self) -> (f64, f64) {
        match self {
            Preset::Experiment1 => (1e-2, 2e-2),
            Preset::Experiment2 => (3e-2, 1e-1),
        }
    }

    pub fn published(self) -> PublishedValues {
        match self {
            Preset::Experiment1 => PublishedValues { residual_norm: 1.1e-2, coefficient_errors: vec![4.01e-3, 1.12e-4, 1.2e-3] },
            Preset::Experiment2 => PublishedValues { residual_norm: 5.76e-2, coefficient_errors: vec![8.8e-3, 1.95e-2, 9.80e-3, 1.80e-2] },
        }
    }

    pub fn config(self) -> RunConfig {
        RunConfig {
            n_modes: 200,
            dt: 1e-3,
            schedule: ScheduleSource::Plan { sigma: self.sigma(), params: PlanParams::default() },
            initial: InitialSpec::Coefficients(self.initial_coefficients()),
            outputs: Outputs::default(),
            diagnostics: DiagnosticToggles::default(),
        }
    }
}
