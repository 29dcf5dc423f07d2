//! File formats shared with other tools: the samples CSV read by the
//! plotting script, its smoothed companion, and CSV arrival traces.

use std::fs;
use std::path::PathBuf;

use parsimony::audit::audit;
use parsimony::config::RunConfig;
use parsimony::metrics::{self, moving_average};
use parsimony::sim::{run, Distribution};
use parsimony::workload::WorkloadDescriptor;
use parsimony::{Error, ScaleAction};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn fixture_is_reproduced_by_the_simulator() {
    // The fixture is the samples.csv of `simulate --seed 3 --horizon 120`.
    let cfg = RunConfig::default()
        .with_overrides(&["seed=3", "horizon=120"])
        .unwrap();
    let out = run(&cfg.sim()).unwrap();
    let mut buf = Vec::new();
    metrics::write_samples(&mut buf, &out.samples).unwrap();
    assert_eq!(buf, fs::read(fixture("samples.csv")).unwrap());
}

#[test]
fn smoothed_export_matches_moving_average_on_fixture() {
    let samples = metrics::read_samples(fs::File::open(fixture("samples.csv")).unwrap()).unwrap();
    let smoothed =
        metrics::read_smoothed(fs::File::open(fixture("samples_smoothed_w10.csv")).unwrap()).unwrap();
    assert_eq!(samples.len(), smoothed.len());
    let w: Vec<f64> = samples.iter().map(|s| s.w as f64).collect();
    let p: Vec<f64> = samples.iter().map(|s| f64::from(s.p)).collect();
    let w_ma = moving_average(&w, 10).unwrap();
    let p_ma = moving_average(&p, 10).unwrap();
    for i in 0..samples.len() {
        assert_eq!(smoothed[i].time, samples[i].time);
        assert!((smoothed[i].w_ma - w_ma[i]).abs() <= 1e-9);
        assert!((smoothed[i].p_ma - p_ma[i]).abs() <= 1e-9);
    }
}

#[test]
fn samples_round_trip_through_the_fixture() {
    let text = fs::read(fixture("samples.csv")).unwrap();
    let samples = metrics::read_samples(text.as_slice()).unwrap();
    let mut again = Vec::new();
    metrics::write_samples(&mut again, &samples).unwrap();
    assert_eq!(again, text);
    assert!(samples.windows(2).all(|w| w[0].time <= w[1].time));
}

#[test]
fn summary_json_fields() {
    let out = run(&RunConfig::default().with_overrides(&["horizon=300"]).unwrap().sim()).unwrap();
    let mut buf = Vec::new();
    metrics::write_summary(&mut buf, &out.summary).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    for key in [
        "time_average_w",
        "time_average_p",
        "max_w",
        "requests_generated",
        "requests_served",
        "mean_response_time",
        "creations",
        "destructions",
        "rng",
    ] {
        assert!(v.get(key).is_some(), "{key} missing");
    }
    assert!(buf.ends_with(b"\n"));
}

#[test]
fn trace_replay_drives_the_simulation() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = tmp.path().join("trace.csv");
    fs::write(&trace, "time_s,service_demand_s\n0.5,2.0\n1.2,1.0\n3.0,0.5\n").unwrap();
    let cfg = RunConfig {
        horizon: f64::INFINITY,
        startup: Distribution::Constant { value: 0.0 },
        workload: WorkloadDescriptor::Trace {
            path: trace,
            limit: None,
        },
        ..RunConfig::default()
    };
    let sim = cfg.sim();
    let out = run(&sim).unwrap();
    assert!(audit(&sim, &out).is_clean());
    let arrivals: Vec<f64> = out
        .actions
        .iter()
        .filter_map(|a| match a.action {
            ScaleAction::Dispatch { arrival_time, .. } => Some(arrival_time),
            _ => None,
        })
        .collect();
    assert_eq!(arrivals, vec![0.5, 1.2, 3.0]);
    // One worker, FIFO: 0.5 -> 2.5, 1.2 waits until 2.5 -> 3.5, 3.0 waits until 3.5 -> 4.0.
    assert_eq!(out.summary.requests_served, 3);
    assert_eq!(out.summary.end_time, 4.0);
    let rt = out.summary.mean_response_time.unwrap();
    assert!((rt - (2.0 + 2.3 + 1.0) / 3.0).abs() < 1e-12);
}

#[test]
fn malformed_trace_reports_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = tmp.path().join("trace.csv");
    fs::write(&trace, "time_s\n0.5\n0.4\n").unwrap();
    let cfg = RunConfig {
        workload: WorkloadDescriptor::Trace {
            path: trace,
            limit: None,
        },
        ..RunConfig::default()
    };
    match run(&cfg.sim()) {
        Err(Error::Trace { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}
