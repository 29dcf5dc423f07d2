//! Replaying a recorded arrival trace instead of a synthetic process.
//!
//! With a path argument the trace is read from a CSV file with columns
//! `time_s[,service_demand_s]`; otherwise a short bursty trace is built in
//! memory.

use std::path::Path;

use parsimony::audit::audit;
use parsimony::sim::{run_with_arrivals, Recording, SimConfig};
use parsimony::workload::{load_trace, ArrivalGenerator, TraceRow};

fn main() -> parsimony::Result<()> {
    let rows = match std::env::args().nth(1) {
        Some(path) => load_trace(Path::new(&path))?,
        None => bursty_trace(),
    };
    println!("{} arrivals, last at {:.1} s", rows.len(), rows.last().map_or(0.0, |r| r.time));


    // Leave time after the last arrival for the queue to drain.
    let cfg = SimConfig {
        horizon: rows.last().map_or(0.0, |r| r.time) + 600.0,
        ..SimConfig::default()
    };
    let out = run_with_arrivals(&cfg, ArrivalGenerator::from_trace_rows(rows, None), Recording::default())?;
    let s = &out.summary;
    println!(
        "served {} by {:.1} s, avg W {:.2}, avg P {:.2}, max P {}",
        s.requests_served, s.end_time, s.time_average_w, s.time_average_p, s.max_p
    );
    let report = audit(&cfg, &out);
    println!(
        "audit: {} events, {} created in {} batches, {} destroyed, {} violations",
        report.events,
        report.creations,
        report.batch_creations,
        report.destructions,
        report.violations.len()
    );
    Ok(())
}

/// Quiet, a 60 s spike at four times the rate, quiet again.
fn bursty_trace() -> Vec<TraceRow> {
    let mut rows = Vec::new();
    let mut t = 0.0;
    while t < 300.0 {
        let gap = if (100.0..160.0).contains(&t) { 0.25 } else { 1.0 };
        t += gap;
        rows.push(TraceRow {
            time: t,
            service_demand: Some(4.0 + (rows.len() % 3) as f64),
        });
    }
    rows
}
