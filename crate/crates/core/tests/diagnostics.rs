use deltaperm::diagnostics::{
    adiabaticity_report, continuity_check, eigen_superposition, interval_ground_mode, slope_sweep, vanish_at,
    SweepGeometry,
};
use deltaperm::hamiltonian::{DiracConfig, RankStructuredHamiltonian};
use deltaperm::integrator::{evolve, RecordOptions, TimeGrid};
use deltaperm::schedule::{ControlSchedule, EtaSpec, PositionSpec, ScheduleSegment, SegmentKind};
use deltaperm::spectral::{Basis, SpectralState};

fn crossing(from: f64, to: f64) -> ControlSchedule {
    ControlSchedule::new(
        1,
        vec![ScheduleSegment {
            kind: SegmentKind::TransitionMove,
            t_begin: 0.0,
            t_end: 0.02,
            eta: EtaSpec::Const { value: 2000.0 },
            positions: vec![PositionSpec::Linear { x0: from, x1: to }],
        }],
    )
    .unwrap()
}

/// Runs the window and checks the continuity estimate with the left
/// split-mode profile, in both time directions of the comparison.
fn continuity_holds(from: f64, to: f64) {
    let basis = Basis::new(120).unwrap();
    let schedule = crossing(from, to);
    let h0 = RankStructuredHamiltonian::assemble(&DiracConfig::new(2000.0, vec![from]).unwrap(), basis);
    let psi0 = eigen_superposition(&h0.eigendecompose().unwrap(), &[1.0, 0.5]).unwrap();
    let grid = TimeGrid::for_schedule(&schedule, 1e-4).unwrap();
    let rec = evolve(&psi0, &schedule, &grid, &RecordOptions { record_every: 10, ..Default::default() }).unwrap();
    let amplitude = interval_ground_mode(0.0, from, basis).unwrap().inner(&psi0).unwrap();
    let profile = |t: f64| -> deltaperm::Result<SpectralState> {
        let (_, pos) = schedule.sample(t.clamp(0.0, 0.02))?;
        vanish_at(&(&interval_ground_mode(0.0, pos[0], basis)? * amplitude), &pos)
    };
    let forward = continuity_check(&rec, profile, 0.0, 0.02, 1e-7).unwrap();
    assert!(forward.passed, "{forward:?}");
    let backward = continuity_check(&rec, profile, 0.02, 0.0, 1e-7).unwrap();
    assert!(backward.passed, "{backward:?}");
}

#[test]
fn continuity_bound_on_crossing_window() {
    continuity_holds(0.51, 0.49);
}

#[test]
fn continuity_bound_on_reversed_schedule() {
    continuity_holds(0.49, 0.51);
}

#[test]
fn instantaneous_energies_sum_to_norm() {
    let basis = Basis::new(80).unwrap();
    let schedule = crossing(0.52, 0.48);
    let psi0 = SpectralState::from_leading(&[1.0, 0.7, 0.2], basis).unwrap();
    let grid = TimeGrid::for_schedule(&schedule, 1e-4).unwrap();
    let rec = evolve(&psi0, &schedule, &grid, &RecordOptions { record_every: 20, ..Default::default() }).unwrap();
    let report = adiabaticity_report(&rec, &schedule, 3).unwrap();
    assert!(report.sum_rule_error <= 1e-10);
    assert!(report.in_window.iter().all(|&w| w));
}

#[test]
fn sweep_extremes_are_ordered() {
    let geometry = SweepGeometry { n_modes: 120, ..SweepGeometry::default() };
    for initial in [vec![2.0], vec![2.0, 1.0]] {
        let rows = slope_sweep(&[1.0, 1e-4], &initial, &geometry).unwrap();
        assert!(rows[0].mode1_transfer() > rows[1].mode1_transfer(), "{rows:?}");
    }
}
