//! Target queue length against average pool size, three seeds per point.

use parsimony::cli::{run_sweep, SweepSpec};
use parsimony::config::RunConfig;
use toml::Value;

fn main() -> parsimony::Result<()> {
    let mut base = RunConfig {
        horizon: 1800.0,
        ..RunConfig::default()
    };
    base.output.dir = std::env::temp_dir().join("parsimony-sweep-example");

    let spec = SweepSpec {
        seeds: vec![1, 2, 3],
        grid: [(
            "control.target".to_owned(),
            [5.0, 10.0, 25.0, 50.0].map(Value::Float).to_vec(),
        )]
        .into(),
    };
    let runs = run_sweep(&base, &spec)?;

    println!("{:>6} {:>5} {:>8} {:>8} {:>10}", "target", "seed", "avg W", "avg P", "resp (s)");
    for (cfg, s) in &runs {
        println!(
            "{:>6} {:>5} {:>8.2} {:>8.2} {:>10.1}",
            cfg.control.target,
            cfg.seed,
            s.time_average_w,
            s.time_average_p,
            s.mean_response_time.unwrap_or(f64::NAN)
        );
    }
    println!("run directories under {}", base.output.dir.display());
    Ok(())
}
