//! The default scenario: Poisson arrivals at 1/s, exponential service with
//! mean 5 s, target queue length 25, one hour.
//!
//! Prints the summary and a coarse view of the smoothed queue length and
//! pool size. With a directory argument, also writes the usual run files.
//!
//! ```text
//! cargo run --release --example autoscale -- out/default
//! ```

use std::path::PathBuf;

use parsimony::cli::write_run;
use parsimony::config::RunConfig;
use parsimony::metrics::smooth_samples;
use parsimony::sim::run;

fn main() -> parsimony::Result<()> {
    let mut cfg = RunConfig::default();
    let out_dir = std::env::args().nth(1).map(PathBuf::from);
    let out = run(&cfg.sim())?;
    let s = &out.summary;

    println!(
        "avg W {:.2}  avg P {:.2}  max W {}  max P {}",
        s.time_average_w, s.time_average_p, s.max_w, s.max_p
    );
    println!(
        "{} requests, {} served, mean response {:.1} s",
        s.requests_generated,
        s.requests_served,
        s.mean_response_time.unwrap_or(f64::NAN)
    );
    println!("{} workers created, {} destroyed", s.creations, s.destructions);

    let smoothed = smooth_samples(&out.samples, cfg.output.window)?;
    println!("\n{:>7} {:>8} {:>8}", "t", "W (ma)", "P (ma)");
    let mut next = 0.0;
    for row in &smoothed {
        if row.time >= next {
            println!("{:>7.0} {:>8.2} {:>8.2}", row.time, row.w_ma, row.p_ma);
            next += 300.0;
        }
    }

    if let Some(dir) = out_dir {
        cfg.output.dir = dir;
        write_run(&cfg, &out)?;
        println!("\nwrote {}", cfg.output.dir.display());
    }
    Ok(())
}
