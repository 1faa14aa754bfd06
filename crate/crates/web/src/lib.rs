//! wasm-bindgen exports behind `www/index.html`. Every export returns a JSON
//! string; the `*_json` functions hold the logic so they run natively in tests.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use deltaperm::diagnostics::{slope_sweep, SweepGeometry};
use deltaperm::hamiltonian::{split_limit_eigenvalues, DiracConfig, RankStructuredHamiltonian};
use deltaperm::planner::{plan_permutation, Permutation, PlanParams};
use deltaperm::spectral::Basis;
use deltaperm::Error;

type Res<T> = Result<T, String>;

fn err(e: Error) -> String {
    e.to_string()
}

/// Lowest eigenvalues with one Dirac of strength `eta` at each of `points`
/// positions across (0, 1), alongside the infinite-strength limit.
pub fn spectrum_json(eta: f64, n_modes: usize, modes: usize, points: usize) -> Res<String> {
    if !(2..=400).contains(&points) {
        return Err("points must lie in 2..=400".into());
    }
    let basis = Basis::new(n_modes).map_err(err)?;
    let modes = modes.min(n_modes);
    let mut xs = Vec::with_capacity(points);
    let mut finite = Vec::with_capacity(points);
    let mut limit = Vec::with_capacity(points);
    for i in 0..points {
        let x = 0.02 + 0.96 * i as f64 / (points - 1) as f64;
        let h = RankStructuredHamiltonian::assemble(&DiracConfig::new(eta, vec![x]).map_err(err)?, basis);
        let eig = h.eigendecompose().map_err(err)?;
        xs.push(x);
        finite.push(eig.eigenvalues[..modes].to_vec());
        limit.push(split_limit_eigenvalues(&[x], modes).map_err(err)?);
    }
    Ok(json!({ "x": xs, "eigenvalues": finite, "split_limit": limit }).to_string())
}

/// Final energies in the instantaneous modes after a linear pass through
/// x = 0.5, one row per slope.
pub fn sweep_json(slopes: &[f64], weights: &[f64], n_modes: usize) -> Res<String> {
    let geometry = SweepGeometry { n_modes, ..SweepGeometry::default() };
    let rows = slope_sweep(slopes, weights, &geometry).map_err(err)?;
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| json!({ "slope": r.slope, "initial": r.initial_energies, "final": r.final_energies, "transfer": r.mode1_transfer() }))
        .collect();
    Ok(json!({ "rows": rows }).to_string())
}

/// Planned schedule sampled at `samples` times, with its transition events.
pub fn plan_json(sigma: &str, total_time: f64, samples: usize) -> Res<String> {
    let sigma = Permutation::parse(sigma).map_err(err)?;
    let params = PlanParams { total_time, ..PlanParams::default() };
    let (plan, schedule) = match plan_permutation(&sigma, &params) {
        Err(Error::Infeasible { reason, required_t }) => {
            return Err(format!("{reason}; needs T >= {required_t:.1}"));
        }
        other => other.map_err(err)?,
    };
    let samples = samples.clamp(2, 4000);
    let t_end = schedule.total_time();
    let mut t = Vec::with_capacity(samples);
    let mut eta = Vec::with_capacity(samples);
    let mut positions = Vec::with_capacity(samples);
    for i in 0..samples {
        let ti = t_end * i as f64 / (samples - 1) as f64;
        let (e, p) = schedule.sample(ti).map_err(err)?;
        t.push(ti);
        eta.push(e);
        positions.push(p);
    }
    let events: Vec<Value> = plan
        .transition_events
        .iter()
        .map(|ev| json!({ "t": ev.time, "dirac": ev.dirac, "x": ev.position }))
        .collect();
    Ok(json!({
        "t": t,
        "eta": eta,
        "positions": positions,
        "events": events,
        "pairing": plan.pairing,
        "minimum_total_time": plan.minimum_total_time,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn spectrum(eta: f64, n_modes: usize, modes: usize, points: usize) -> Result<String, JsError> {
    spectrum_json(eta, n_modes, modes, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sweep(slopes: &[f64], weights: &[f64], n_modes: usize) -> Result<String, JsError> {
    sweep_json(slopes, weights, n_modes).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn plan(sigma: &str, total_time: f64, samples: usize) -> Result<String, JsError> {
    plan_json(sigma, total_time, samples).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_sits_between_free_and_split_limit() {
        let v: Value = serde_json::from_str(&spectrum_json(500.0, 60, 3, 5).unwrap()).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        for (row, lim) in v["eigenvalues"].as_array().unwrap().iter().zip(v["split_limit"].as_array().unwrap()) {
            let l0 = row[0].as_f64().unwrap();
            assert!(l0 > pi2 && l0 < lim[0].as_f64().unwrap());
        }
    }

    #[test]
    fn plan_reports_events_and_infeasibility() {
        let v: Value = serde_json::from_str(&plan_json("2,3,1", 200.0, 50).unwrap()).unwrap();
        assert_eq!(v["t"].as_array().unwrap().len(), 50);
        assert!(!v["events"].as_array().unwrap().is_empty());
        assert!(plan_json("2,3,1", 1.0, 50).unwrap_err().contains("needs T"));
        assert!(plan_json("1,1", 200.0, 50).is_err());
    }

    #[test]
    fn fast_sweep_transfers_slow_sweep_does_not() {
        let v: Value = serde_json::from_str(&sweep_json(&[1.0, 1e-4], &[2.0], 60).unwrap()).unwrap();
        let rows = v["rows"].as_array().unwrap();
        assert!(rows[0]["transfer"].as_f64().unwrap() > 0.9);
        assert!(rows[1]["transfer"].as_f64().unwrap() < 0.1);
    }
}
