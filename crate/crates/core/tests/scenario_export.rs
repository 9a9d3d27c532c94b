use spinsat::scenario::{
    export, read_trajectory_csv, render_trajectory_csv, render_trajectory_json, report_path,
    Format, OutputSpec, Strategy, CSV_HEADER,
};
use spinsat::*;

fn run_preset(name: &str, s: Strategy) -> (Trajectory, ScenarioReport) {
    run(&preset(name).unwrap().with_strategy(s)).unwrap()
}

#[test]
fn csv_round_trip_reproduces_rendered_samples() {
    let dir = tempfile::tempdir().unwrap();
    let (traj, report) = run_preset("case1", Strategy::Local);
    let spec = OutputSpec {
        path: dir.path().join("case1.csv"),
        format: Format::Csv,
    };
    let (tp, rp) = export(&traj, &report, &spec).unwrap();
    assert_eq!(rp, report_path(&tp));
    let rows = read_trajectory_csv(&tp).unwrap();
    assert_eq!(rows.len(), traj.len());
    for (row, s) in rows.iter().zip(&traj.samples) {
        assert_eq!(format!("{:.8e}", row.t), format!("{:.8e}", s.t));
        assert_eq!(format!("{:.8e}", row.y), format!("{:.8e}", s.state.y));
        assert_eq!(format!("{:.8e}", row.z), format!("{:.8e}", s.state.z));
        assert_eq!(format!("{:.8e}", row.u), format!("{:.8e}", s.u));
        assert_eq!(row.phase, s.phase);
    }
    let text = std::fs::read_to_string(&tp).unwrap();
    assert!(text.starts_with(CSV_HEADER));
}

#[test]
fn exports_are_byte_deterministic() {
    let (a, ra) = run_preset("south-pole", Strategy::Optimal);
    let (b, rb) = run_preset("south-pole", Strategy::Optimal);
    let p = ra.diagnostics.params;
    assert_eq!(render_trajectory_csv(&a, &p), render_trajectory_csv(&b, &p));
    assert_eq!(
        render_trajectory_json(&a, &p),
        render_trajectory_json(&b, &p)
    );
    assert_eq!(
        serde_json::to_string(&ra).unwrap(),
        serde_json::to_string(&rb).unwrap()
    );
}

#[test]
fn report_carries_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let (traj, report) = run_preset("case1", Strategy::Optimal);
    let spec = OutputSpec {
        path: dir.path().join("opt.json"),
        format: Format::Json,
    };
    let (_, rp) = export(&traj, &report, &spec).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(rp).unwrap()).unwrap();
    for key in [
        "strategy",
        "reached",
        "duration",
        "min_distance",
        "segments",
        "switch_points",
        "diagnostics",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["strategy"], "optimal");
    assert!(v["diagnostics"]["pmp"]["h_rel_spread"].as_f64().unwrap() < 1e-6);
    let back: ScenarioReport = serde_json::from_value(v).unwrap();
    assert_eq!(back, report);
}

#[test]
fn export_reports_path_on_failure() {
    let (traj, report) = run_preset("south-pole", Strategy::Free);
    let spec = OutputSpec {
        path: "/nonexistent-dir/x.csv".into(),
        format: Format::Csv,
    };
    let err = export(&traj, &report, &spec).unwrap_err();
    assert!(err.to_string().contains("/nonexistent-dir/x.csv"), "{err}");
}

#[test]
fn reached_reports_satisfy_invariants() {
    for (name, s) in [
        ("case1", Strategy::Local),
        ("case1", Strategy::Optimal),
        ("case1", Strategy::Unbounded),
        ("south-pole", Strategy::Local),
        ("south-pole", Strategy::Free),
    ] {
        let (traj, r) = run_preset(name, s);
        assert!(r.reached, "{name} {s}");
        assert_eq!(r.duration, r.segments.last().map(|g| g.t_end), "{name} {s}");
        assert!(r.min_distance <= 1e-6, "{name} {s}: {}", r.min_distance);
        assert!(
            (traj.end_time() - r.duration.unwrap()).abs() < 1e-12,
            "{name} {s}"
        );
    }
}

#[test]
fn compare_south_pole_strategies() {
    let (_, l) = run_preset("south-pole", Strategy::Local);
    let (_, o) = run_preset("south-pole", Strategy::Optimal);
    let c = compare(&l, &o).unwrap();
    let d = c.duration_delta.unwrap();
    assert!(d > 0.0 && (d - 0.0005).abs() < 2e-4, "{d}");
    assert!(c.verdict.starts_with("optimal faster"));
    assert!(c.switch_deltas.iter().any(|s| s.label == "singular_entry"));
}
