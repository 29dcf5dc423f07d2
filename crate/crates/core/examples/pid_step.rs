//! One controller evaluation at a time: error, PID output, wanted pool size.

use parsimony::{compute_error, pid_step, wanted_pool, ControlTarget, PidGains, PidState};

fn main() -> parsimony::Result<()> {
    let gains = PidGains::default();
    let target = ControlTarget::default();
    let mut state = PidState::default();
    let mut p = 5;

    // (time, queue length) observed at successive events.
    let observations = [(0.0, 25), (1.5, 35), (2.0, 36), (4.0, 30), (4.1, 12), (9.0, 12)];
    println!("{:>6} {:>4} {:>7} {:>9} {:>4} {:>9}", "t", "W", "e", "p_out", "P", "P_wanted");
    for (now, w) in observations {
        let e = compute_error(w, &target, &gains);
        let (next, p_out) = pid_step(&state, &gains, e, now)?;
        state = next;
        let p_wanted = wanted_pool(p, p_out, &target);
        println!("{now:>6.1} {w:>4} {e:>7.1} {p_out:>9.3} {p:>4} {p_wanted:>9}");
        // Only growth is immediate; shrinking happens one pull at a time.
        p = p.max(p_wanted);
    }
    Ok(())
}
