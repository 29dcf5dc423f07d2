//! Steady-state M/M/c numbers for a range of pool sizes.
//!
//! ```text
//! cargo run --example erlang_c -- 1.0 0.2
//! ```

use parsimony::mmc::{erlang_c, mean_queue_length, mean_wait, MmcParams};

fn main() -> parsimony::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>());
    let lambda = args.next().transpose().ok().flatten().unwrap_or(1.0);
    let mu = args.next().transpose().ok().flatten().unwrap_or(0.2);

    let first = (lambda / mu).floor() as u32 + 1;
    println!("lambda={lambda} mu={mu}");
    println!("{:>4} {:>8} {:>10} {:>10} {:>10}", "c", "rho", "P(wait)", "Lq", "Wq");
    for c in first..first + 10 {
        let p = MmcParams::new(lambda, mu, c)?;
        println!(
            "{c:>4} {:>8.4} {:>10.6} {:>10.6} {:>10.6}",
            p.utilisation(),
            erlang_c(&p)?,
            mean_queue_length(&p)?,
            mean_wait(&p)?
        );
    }
    Ok(())
}
