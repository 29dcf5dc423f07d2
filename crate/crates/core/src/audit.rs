//! Independent replay of a recorded run.
//!
//! The audit rebuilds the queue and the worker lifecycle from the event and
//! action logs alone and reports every rule that does not hold:
//!
//! - a destroyed worker was idle at that instant;
//! - workers are created only while handling an arrival;
//! - a pull destroys at most one worker;
//! - `p_min <= P <= p_max` after every event (when scaling is on);
//! - the queue never grows between two arrivals;
//! - dispatch is FIFO and every dispatch completes exactly `demand` later;
//! - events never run before they were scheduled, and the clock never goes back;
//! - requests are conserved and the summary agrees with the replay.

use std::collections::HashMap;

use crate::orchestrator::{ScaleAction, WorkerState};
use crate::sim::{EventKind, RunOutput, SimConfig};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub events: u64,
    pub creations: u64,
    pub destructions: u64,
    /// Create actions that added more than one worker.
    pub batch_creations: u64,
    pub largest_batch: u64,
    pub max_destructions_per_pull: u64,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Replays `out`, which must have been produced with full trace recording.
pub fn audit(cfg: &SimConfig, out: &RunOutput) -> AuditReport {
    let mut report = AuditReport::default();
    let mut violations = Vec::new();
    let mut v = |msg: String| report_violation(&mut violations, msg);

    let initial = cfg.control.initial_workers();
    let mut workers: HashMap<u64, WorkerState> =
        (1..=u64::from(initial)).map(|id| (id, WorkerState::Idle)).collect();
    let mut next_worker = u64::from(initial) + 1;
    // request -> (worker, completion time)
    let mut in_flight: HashMap<u64, (u64, f64)> = HashMap::new();
    let mut serving: HashMap<u64, u64> = HashMap::new();
    let mut queued: u64 = 0;
    let mut arrived: u64 = 0;
    let mut served: u64 = 0;
    let mut next_dispatch: u64 = 1;
    let mut clock = 0.0f64;

    let mut by_event: HashMap<u64, Vec<&ScaleAction>> = HashMap::new();
    for a in &out.actions {
        by_event.entry(a.event_seq).or_default().push(&a.action);
    }

    for e in &out.events {
        report.events += 1;
        if e.time < clock {
            v(format!("clock went back from {clock} to {} (event {})", e.time, e.seq));
        }
        if e.time < e.scheduled_at {
            v(format!("event {} ran at {} before it was scheduled at {}", e.seq, e.time, e.scheduled_at));
        }
        clock = e.time;
        let queued_before = queued;

        let is_arrival = matches!(e.kind, EventKind::Arrival(_));
        match &e.kind {
            EventKind::Arrival(r) => {
                arrived += 1;
                queued += 1;
                if r.id != arrived {
                    v(format!("arrival id {} but {} requests seen", r.id, arrived));
                }
            }
            EventKind::StartupComplete { worker } => match workers.get_mut(worker) {
                Some(s @ WorkerState::Starting) => *s = WorkerState::Idle,
                other => v(format!("startup of worker {worker} in state {other:?}")),
            },
            EventKind::ServiceComplete { worker, request } => {
                served += 1;
                match in_flight.remove(request) {
                    Some((w, due)) => {
                        if w != *worker {
                            v(format!("request {request} completed on {worker}, dispatched to {w}"));
                        }
                        if due != e.time {
                            v(format!("request {request} completed at {} instead of {due}", e.time));
                        }
                    }
                    None => v(format!("completion of request {request} that was never dispatched")),
                }
                serving.remove(worker);
                match workers.get_mut(worker) {
                    Some(s @ WorkerState::Busy) => *s = WorkerState::Idle,
                    other => v(format!("completion on worker {worker} in state {other:?}")),
                }
            }
        }

        let mut destroyed_here = 0;
        for action in by_event.remove(&e.seq).unwrap_or_default() {
            match action {
                ScaleAction::CreateWorkers { ids } => {
                    let n = ids.end.saturating_sub(ids.start);
                    if !is_arrival {
                        v(format!("creation of {n} workers outside an arrival at {}", e.time));
                    }
                    if n == 0 {
                        v(format!("empty creation at {}", e.time));
                    }
                    if ids.start != next_worker {
                        v(format!("worker ids jump from {next_worker} to {}", ids.start));
                    }
                    next_worker = ids.end;
                    report.creations += n;
                    report.largest_batch = report.largest_batch.max(n);
                    if n > 1 {
                        report.batch_creations += 1;
                    }
                    for id in ids.clone() {
                        workers.insert(id, WorkerState::Starting);
                    }
                }
                ScaleAction::DestroyWorker { worker } => {
                    destroyed_here += 1;
                    report.destructions += 1;
                    if is_arrival {
                        v(format!("destruction of worker {worker} on an arrival at {}", e.time));
                    }
                    match workers.remove(worker) {
                        Some(WorkerState::Idle) => {}
                        other => v(format!(
                            "destroyed worker {worker} in state {other:?} at {}",
                            e.time
                        )),
                    }
                }
                ScaleAction::Dispatch {
                    request,
                    worker,
                    demand,
                    ..
                } => {
                    if *request != next_dispatch {
                        v(format!("dispatched request {request}, expected {next_dispatch} (FIFO)"));
                    }
                    next_dispatch = request + 1;
                    if queued == 0 {
                        v(format!("dispatch of request {request} from an empty queue"));
                    }
                    queued = queued.saturating_sub(1);
                    match workers.get_mut(worker) {
                        Some(s @ WorkerState::Idle) => *s = WorkerState::Busy,
                        other => v(format!("dispatch to worker {worker} in state {other:?}")),
                    }
                    serving.insert(*worker, *request);
                    in_flight.insert(*request, (*worker, e.time + demand));
                }
                ScaleAction::NoOp => {}
            }
        }
        report.max_destructions_per_pull = report.max_destructions_per_pull.max(destroyed_here);
        if destroyed_here > 1 {
            v(format!("{destroyed_here} destructions in one pull at {}", e.time));
        }

        if !is_arrival && queued > queued_before {
            v(format!("queue grew from {queued_before} to {queued} without an arrival at {}", e.time));
        }
        let p = workers.len() as u32;
        if cfg.control.enabled && (p < cfg.control.p_min || p > cfg.control.p_max) {
            v(format!(
                "pool size {p} outside [{}, {}] at {}",
                cfg.control.p_min, cfg.control.p_max, e.time
            ));
        }
    }

    let busy = workers.values().filter(|s| **s == WorkerState::Busy).count() as u64;
    if arrived != served + queued + busy {
        v(format!(
            "conservation: {arrived} arrived != {served} served + {queued} queued + {busy} in service"
        ));
    }
    if busy != in_flight.len() as u64 || busy != serving.len() as u64 {
        v(format!("{busy} busy workers but {} requests in flight", in_flight.len()));
    }

    let s = &out.summary;
    let expect = [
        ("requests_generated", s.requests_generated, arrived),
        ("requests_served", s.requests_served, served),
        ("requests_in_queue", s.requests_in_queue, queued),
        ("requests_in_service", s.requests_in_service, busy),
        ("final_p", u64::from(s.final_p), workers.len() as u64),
        ("creations", s.creations, report.creations),
        ("destructions", s.destructions, report.destructions),
    ];
    for (name, got, replayed) in expect {
        if got != replayed {
            v(format!("summary {name} = {got}, replay gives {replayed}"));
        }
    }
    if !s.requests_conserved() {
        v("summary violates request conservation".into());
    }
    if !s.pool_conserved() {
        v("summary violates creations - destructions = final P - initial P".into());
    }
    report.violations = violations;
    report
}

fn report_violation(list: &mut Vec<String>, msg: String) {
    // Keep reports readable when something is systematically wrong.
    if list.len() < 100 {
        list.push(msg);
    }
}
