use sdl_core::io::{parse_numeric_csv, read_trajectory_csv, write_diagnostics_json, write_report_curves, write_trajectory_csv};
use sdl_core::model::{make_initial, Grid, InitialKind, InitialSpec, ProblemParams};
use sdl_core::regularization::corridor_schedule;
use sdl_core::solver::{solve_regularized, solve_singular, SolveOptions, StepConfig};
use sdl_core::verify::{check_linfty, epsilon_grid, l1_distance};

fn params(t: f64) -> ProblemParams {
    ProblemParams::new(-0.5, 0.5, 3.0, 1.0, t).unwrap()
}

fn opts(dt: f64) -> SolveOptions {
    SolveOptions::new(StepConfig::fixed(dt)).with_stride(5)
}

#[test]
fn vanishing_data_levels_stay_positive_and_approach_each_other() {
    let pr = params(0.2);
    let grid = Grid::new(81).unwrap();
    let u0 = make_initial(&InitialSpec::new(InitialKind::Plateau { a: 0.25, b: 0.75, height: 0.8 }), grid, &pr).unwrap();
    let (traj, record) = solve_singular(&u0, &pr, &[0.08, 0.04, 0.02], &opts(1e-3), 0.2, None).unwrap();
    assert!(record.min_at_t0.iter().all(|&m| m > 0.0));
    assert!(record.l1_at_t0.windows(2).all(|w| w[1] < w[0]), "{:?}", record.l1_at_t0);
    assert!((traj.end_time() - 0.2).abs() < 1e-12);
    assert!(traj.last().min() > 0.0);
    assert!(check_linfty(&traj, &pr).pass);
}

#[test]
fn positive_data_two_phase_solve_matches_direct_solve() {
    let pr = params(0.1);
    let grid = Grid::new(41).unwrap();
    let u0 = make_initial(&InitialSpec::new(InitialKind::Constant { value: 0.5 }), grid, &pr).unwrap();
    let o = opts(1e-3);
    let (two_phase, record) = solve_singular(&u0, &pr, &[0.02, 0.01], &o, 0.1, None).unwrap();
    let direct = solve_regularized(&u0, &pr, corridor_schedule(&pr, &u0, None).unwrap(), &o, 0.1).unwrap();
    let gap = l1_distance(two_phase.last(), direct.last()).unwrap();
    // the mollified start differs from u0 by about the finest width
    let finest = *record.deltas.last().unwrap();
    assert!(gap < 2.0 * epsilon_grid(&pr, grid, 1e-3) + 2.0 * finest, "gap {gap}");
}

#[test]
fn artifacts_written_to_disk_read_back() {
    let pr = params(0.02);
    let grid = Grid::new(21).unwrap();
    let u0 = make_initial(&InitialSpec::new(InitialKind::Constant { value: 0.5 }), grid, &pr).unwrap();
    let traj = solve_regularized(&u0, &pr, corridor_schedule(&pr, &u0, None).unwrap(), &opts(1e-3), 0.02).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let csv = dir.path().join("trajectory.csv");
    write_trajectory_csv(&traj, &csv).unwrap();
    let fields = read_trajectory_csv(&csv).unwrap();
    assert_eq!(fields.len(), traj.snapshots.len());
    for (a, b) in fields.iter().zip(&traj.snapshots) {
        assert_eq!(a.values(), b.values());
        assert_eq!(a.time(), b.time());
    }

    let json = dir.path().join("diagnostics.json");
    write_diagnostics_json(&traj, &json).unwrap();
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(value["n"], 21);

    let report = check_linfty(&traj, &pr);
    write_report_curves(&report, &dir.path().join("curves"), "sup").unwrap();
    let rows = parse_numeric_csv(&std::fs::read_to_string(dir.path().join("curves/sup_bound.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), report.times.len());
    assert!(rows.iter().all(|r| r.len() == 2 && r[1] > 0.0));
}
