//! Driving the orchestrator by hand, without the event kernel.
//!
//! Arrivals and pulls are fed in explicitly so every scaling decision can be
//! followed step by step.

use parsimony::{
    ControlTarget, Orchestrator, PidGains, Request, RequestQueue, ScaleAction, WorkerState,
};

fn main() -> parsimony::Result<()> {
    let mut queue = RequestQueue::new();
    let mut orch = Orchestrator::new(PidGains::default(), ControlTarget::default(), true, 5, 0.0)?;
    let mut demand = |_: &Request| 5.0;

    // A burst of 40 requests in four seconds.
    let mut now = 0.0;
    for id in 1..=40u64 {
        now = id as f64 * 0.1;
        queue.enqueue(Request {
            id,
            arrival_time: now,
            service_demand: None,
        })?;
        for action in orch.on_arrival(&mut queue, now, &mut demand)? {
            if !action.is_noop() {
                println!("{now:>5.1} arrival  W={:<3} {action}", queue.len());
            }
        }
    }
    println!("pool after burst: {} (wanted {})", orch.pool_size(), orch.p_wanted());

    // Busy workers finish and starting workers come up; each of them pulls.
    // The queue drains and the pool shrinks.
    for round in 1..=20 {
        now += 1.0;
        let ready: Vec<(u64, WorkerState)> = orch
            .workers()
            .filter(|w| w.state != WorkerState::Idle)
            .map(|w| (w.id, w.state))
            .collect();
        let mut destroyed = 0;
        for (id, state) in ready {
            if state == WorkerState::Busy {
                orch.complete_service(id)?;
            }
            let action = orch.on_pull(&mut queue, id, now, &mut demand)?;
            if matches!(action, ScaleAction::DestroyWorker { .. }) {
                destroyed += 1;
            }
        }
        println!(
            "{now:>5.1} pulls    W={:<3} destroyed {destroyed}, pool {}",
            queue.len(),
            orch.pool_size()
        );
        if queue.is_empty() && round > 2 {
            break;
        }
    }
    println!("pool at the end: {} (wanted {})", orch.pool_size(), orch.p_wanted());
    Ok(())
}
