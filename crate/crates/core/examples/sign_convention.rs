//! The two error conventions describe the same controller: `e = W - T` with
//! positive gains and `e = T - W` with negated gains give identical runs.

use parsimony::sim::{run, ControlConfig, SimConfig};
use parsimony::SignConvention;

fn main() -> parsimony::Result<()> {
    let w_minus_t = SimConfig {
        horizon: 900.0,
        ..SimConfig::default()
    };
    let t_minus_w = SimConfig {
        control: ControlConfig {
            kp: -0.9,
            kd: -0.2,
            sign_convention: SignConvention::ErrorIsTMinusW,
            ..ControlConfig::default()
        },
        ..w_minus_t.clone()
    };
    let a = run(&w_minus_t)?;
    let b = run(&t_minus_w)?;
    println!("W - T, positive gains: avg P {:.3}", a.summary.time_average_p);
    println!("T - W, negative gains: avg P {:.3}", b.summary.time_average_p);
    println!("identical actions: {}", a.actions == b.actions);
    Ok(())
}
