//! Controller off: the simulator as a plain M/M/c queue, checked against
//! the Erlang C mean queue length.

use parsimony::cli::validate_fixed_pool;
use parsimony::mmc::MmcParams;

fn main() -> parsimony::Result<()> {
    for (lambda, mu, c) in [(1.0, 0.2, 6), (1.0, 0.2, 8), (0.1, 1.0, 1), (4.0, 1.0, 5)] {
        let params = MmcParams::new(lambda, mu, c)?;
        let v = validate_fixed_pool(params, 200_000, 1)?;
        println!(
            "lambda={lambda:<4} mu={mu:<4} c={c:<2} analytic Lq={:.4} simulated Lq={:.4} rel err={:.4}",
            v.analytic_lq, v.simulated_lq, v.relative_error
        );
    }
    Ok(())
}
