//! The controller's scaling state machine.
//!
//! Two entry points drive everything:
//!
//! * [`Orchestrator::on_arrival`] runs after a request has been enqueued.
//!   Workers parked on an empty queue get the new request first, then the
//!   PID law is evaluated and `P_w - P` workers are created when `P_w > P`.
//!   Nothing is ever destroyed on this path.
//! * [`Orchestrator::on_pull`] runs when a worker becomes free. The PID law
//!   is evaluated again; when `P_w < P` the pulling worker itself is
//!   destroyed (so a busy worker can never be destroyed, and at most one
//!   worker goes per pull). Otherwise it gets the head of the queue, or
//!   parks if the queue is empty.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::ops::Range;

use crate::control::{compute_error, wanted_pool, ControlTarget, PidGains, PidState};
use crate::error::{Error, Result};
use crate::metrics::{SampleRecord, Trigger};
use crate::queue::{Request, RequestQueue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerState {
    Starting,
    Idle,
    Busy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Worker {
    pub id: u64,
    pub state: WorkerState,
    /// Creation time.
    pub started_at: f64,
    /// Set iff `state == Busy`.
    pub busy_until: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScaleAction {
    /// `ids` are freshly assigned and contiguous; `ids.len() >= 1`.
    CreateWorkers { ids: Range<u64> },
    DestroyWorker { worker: u64 },
    Dispatch {
        request: u64,
        worker: u64,
        arrival_time: f64,
        demand: f64,
    },
    NoOp,
}

impl ScaleAction {
    pub fn is_noop(&self) -> bool {
        matches!(self, ScaleAction::NoOp)
    }
}

impl fmt::Display for ScaleAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleAction::CreateWorkers { ids } => write!(
                f,
                "create count={} ids={}..={}",
                ids.end - ids.start,
                ids.start,
                ids.end - 1
            ),
            ScaleAction::DestroyWorker { worker } => write!(f, "destroy worker={worker}"),
            ScaleAction::Dispatch {
                request,
                worker,
                demand,
                ..
            } => write!(f, "dispatch request={request} worker={worker} demand={demand}"),
            ScaleAction::NoOp => f.write_str("noop"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Orchestrator {
    gains: PidGains,
    target: ControlTarget,
    /// `false` pins the pool at its initial size.
    scaling: bool,
    pid: PidState,
    workers: BTreeMap<u64, Worker>,
    /// Idle workers that pulled on an empty queue, in parking order.
    parked: VecDeque<u64>,
    next_worker_id: u64,
    p_wanted: u32,
    samples: Vec<SampleRecord>,
    record_samples: bool,
    sample_count: u64,
}

impl Orchestrator {
    /// Starts with `initial_workers` ready workers, parked idle at `now`.
    pub fn new(
        gains: PidGains,
        target: ControlTarget,
        scaling: bool,
        initial_workers: u32,
        now: f64,
    ) -> Result<Self> {
        gains.validate()?;
        target.validate()?;
        if scaling && !(target.p_min..=target.p_max).contains(&initial_workers) {
            return Err(Error::invalid(format!(
                "initial pool {initial_workers} outside [{}, {}]",
                target.p_min, target.p_max
            )));
        }
        let mut o = Self {
            gains,
            target,
            scaling,
            pid: PidState::default(),
            workers: BTreeMap::new(),
            parked: VecDeque::new(),
            next_worker_id: 1,
            p_wanted: initial_workers,
            samples: Vec::new(),
            record_samples: true,
            sample_count: 0,
        };
        for _ in 0..initial_workers {
            let id = o.next_id();
            o.workers.insert(
                id,
                Worker {
                    id,
                    state: WorkerState::Idle,
                    started_at: now,
                    busy_until: None,
                },
            );
            o.parked.push_back(id);
        }
        Ok(o)
    }

    /// `P(t)`: starting, idle and busy workers.
    pub fn pool_size(&self) -> u32 {
        self.workers.len() as u32
    }

    pub fn p_wanted(&self) -> u32 {
        self.p_wanted
    }

    pub fn worker(&self, id: u64) -> Option<&Worker> {
        self.workers.get(&id)
    }

    pub fn workers(&self) -> impl Iterator<Item = &Worker> {
        self.workers.values()
    }

    pub fn busy_count(&self) -> u64 {
        self.workers
            .values()
            .filter(|w| w.state == WorkerState::Busy)
            .count() as u64
    }

    pub fn pid_state(&self) -> &PidState {
        &self.pid
    }

    /// Keep only the count of observations, not the records themselves.
    pub fn set_record_samples(&mut self, on: bool) {
        self.record_samples = on;
    }

    /// Number of PID evaluations so far, recorded or not.
    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn samples(&self) -> &[SampleRecord] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<SampleRecord> {
        self.samples
    }

    /// Handles a gateway notification. The triggering request must already
    /// be in `queue`. `demand` resolves the service time of a dispatched
    /// request.
    pub fn on_arrival(
        &mut self,
        queue: &mut RequestQueue,
        now: f64,
        demand: &mut dyn FnMut(&Request) -> f64,
    ) -> Result<Vec<ScaleAction>> {
        let mut actions = Vec::new();
        while !queue.is_empty() {
            let Some(worker) = self.parked.pop_front() else {
                break;
            };
            actions.push(self.dispatch(queue, worker, now, demand)?);
        }

        let p = self.pool_size();
        let wanted = self.evaluate(queue.len(), now, Trigger::Arrival)?;
        if wanted > p {
            let first = self.next_worker_id;
            for _ in p..wanted {
                let id = self.next_id();
                self.workers.insert(
                    id,
                    Worker {
                        id,
                        state: WorkerState::Starting,
                        started_at: now,
                        busy_until: None,
                    },
                );
            }
            actions.push(ScaleAction::CreateWorkers {
                ids: first..self.next_worker_id,
            });
        }
        if actions.is_empty() {
            actions.push(ScaleAction::NoOp);
        }
        Ok(actions)
    }

    /// Handles a request for work from `worker_id`. A starting worker
    /// becomes idle at its first pull.
    pub fn on_pull(
        &mut self,
        queue: &mut RequestQueue,
        worker_id: u64,
        now: f64,
        demand: &mut dyn FnMut(&Request) -> f64,
    ) -> Result<ScaleAction> {
        let worker = self
            .workers
            .get_mut(&worker_id)
            .ok_or_else(|| Error::Protocol(format!("pull from unknown worker {worker_id}")))?;
        match worker.state {
            WorkerState::Busy => {
                return Err(Error::Protocol(format!(
                    "pull from busy worker {worker_id}"
                )))
            }
            WorkerState::Starting => worker.state = WorkerState::Idle,
            WorkerState::Idle => {}
        }
        self.parked.retain(|&id| id != worker_id);

        let p = self.pool_size();
        let wanted = self.evaluate(queue.len(), now, Trigger::Pull)?;
        if wanted < p {
            self.workers.remove(&worker_id);
            return Ok(ScaleAction::DestroyWorker { worker: worker_id });
        }
        if queue.is_empty() {
            self.parked.push_back(worker_id);
            return Ok(ScaleAction::NoOp);
        }
        self.dispatch(queue, worker_id, now, demand)
    }

    /// Marks a busy worker as finished; it must pull next.
    pub fn complete_service(&mut self, worker_id: u64) -> Result<()> {
        let worker = self
            .workers
            .get_mut(&worker_id)
            .ok_or_else(|| Error::Protocol(format!("completion from unknown worker {worker_id}")))?;
        if worker.state != WorkerState::Busy {
            return Err(Error::Protocol(format!(
                "completion from worker {worker_id} that is not busy"
            )));
        }
        worker.state = WorkerState::Idle;
        worker.busy_until = None;
        Ok(())
    }

    fn dispatch(
        &mut self,
        queue: &mut RequestQueue,
        worker_id: u64,
        now: f64,
        demand: &mut dyn FnMut(&Request) -> f64,
    ) -> Result<ScaleAction> {
        let request = queue
            .dequeue()
            .ok_or_else(|| Error::Protocol("dispatch from an empty queue".into()))?;
        let d = request.service_demand.unwrap_or_else(|| demand(&request));
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::invalid(format!(
                "service demand for request {} must be positive, got {d}",
                request.id
            )));
        }
        let worker = self
            .workers
            .get_mut(&worker_id)
            .ok_or_else(|| Error::Protocol(format!("dispatch to unknown worker {worker_id}")))?;
        worker.state = WorkerState::Busy;
        worker.busy_until = Some(now + d);
        Ok(ScaleAction::Dispatch {
            request: request.id,
            worker: worker_id,
            arrival_time: request.arrival_time,
            demand: d,
        })
    }

    /// Samples `W`, runs the control law and records the observation.
    fn evaluate(&mut self, w: u64, now: f64, trigger: Trigger) -> Result<u32> {
        let p = self.pool_size();
        let error = compute_error(w, &self.target, &self.gains);
        let (p_out, wanted) = if self.scaling {
            let p_out = self.pid.step(&self.gains, error, now)?;
            (p_out, wanted_pool(p, p_out, &self.target))
        } else {
            (0.0, p)
        };
        self.p_wanted = wanted;
        self.sample_count += 1;
        if !self.record_samples {
            return Ok(wanted);
        }
        self.samples.push(SampleRecord {
            time: now,
            w,
            error,
            p,
            p_wanted: wanted,
            p_out,
            trigger,
        });
        Ok(wanted)
    }

    fn next_id(&mut self) -> u64 {
        let id = self.next_worker_id;
        self.next_worker_id += 1;
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(id: u64, t: f64) -> Request {
        Request {
            id,
            arrival_time: t,
            service_demand: Some(2.0),
        }
    }

    fn fill(q: &mut RequestQueue, n: u64) {
        for id in 1..=n {
            q.enqueue(req(id, 0.0)).unwrap();
        }
    }

    fn no_demand(_: &Request) -> f64 {
        unreachable!("trace demand is always present in these tests")
    }

    /// Orchestrator with `p` busy workers and a primed PID (so the derivative
    /// term sees a constant error).
    fn primed(p: u32, q: &mut RequestQueue, w: u64, gains: PidGains) -> Orchestrator {
        let mut o = Orchestrator::new(gains, ControlTarget::default(), true, p, 0.0).unwrap();
        let ids: Vec<u64> = o.parked.drain(..).collect();
        for id in ids {
            let wk = o.workers.get_mut(&id).unwrap();
            wk.state = WorkerState::Busy;
            wk.busy_until = Some(100.0);
        }
        fill(q, w);
        let e = compute_error(w, &o.target, &o.gains);
        o.pid = PidState {
            integral: 0.0,
            prev_error: Some(e),
            prev_time: Some(0.0),
        };
        o
    }

    #[test]
    fn arrival_at_setpoint_is_noop() {
        let mut q = RequestQueue::new();
        let mut o = primed(5, &mut q, 25, PidGains::default());
        let acts = o.on_arrival(&mut q, 1.0, &mut no_demand).unwrap();
        assert_eq!(acts, vec![ScaleAction::NoOp]);
        assert_eq!(o.pool_size(), 5);
    }

    #[test]
    fn arrival_creates_the_shortfall() {
        // W = 35 against T = 25: p_out = 0.9 * 10 = 9, P_w = 14.
        let mut q = RequestQueue::new();
        let mut o = primed(5, &mut q, 35, PidGains::default());
        let acts = o.on_arrival(&mut q, 1.0, &mut no_demand).unwrap();
        assert_eq!(acts, vec![ScaleAction::CreateWorkers { ids: 6..15 }]);
        assert_eq!(o.pool_size(), 14);
        assert!(o
            .workers()
            .filter(|w| w.id >= 6)
            .all(|w| w.state == WorkerState::Starting && w.started_at == 1.0));
        let s = o.samples().last().unwrap();
        assert_eq!((s.w, s.p, s.p_wanted, s.trigger), (35, 5, 14, Trigger::Arrival));
    }

    #[test]
    fn arrival_never_destroys() {
        // W = 23: p_out = -1.8, P_w = 3 < 5, but arrivals only create.
        let mut q = RequestQueue::new();
        let mut o = primed(5, &mut q, 23, PidGains::default());
        let acts = o.on_arrival(&mut q, 1.0, &mut no_demand).unwrap();
        assert_eq!(o.p_wanted(), 3);
        assert_eq!(acts, vec![ScaleAction::NoOp]);
        assert_eq!(o.pool_size(), 5);
    }

    #[test]
    fn pull_destroys_the_puller_when_oversized() {
        // P = 6; W = 22 gives p_out = -2.7, P_w = 3 (< 6).
        let mut q = RequestQueue::new();
        let mut o = primed(6, &mut q, 22, PidGains::default());
        o.complete_service(3).unwrap();
        let act = o.on_pull(&mut q, 3, 1.0, &mut no_demand).unwrap();
        assert_eq!(act, ScaleAction::DestroyWorker { worker: 3 });
        assert_eq!(o.pool_size(), 5);
        assert!(o.worker(3).is_none());
        assert_eq!(q.len(), 22);
    }

    #[test]
    fn pull_dispatches_head_at_setpoint() {
        let mut q = RequestQueue::new();
        let mut o = primed(5, &mut q, 25, PidGains::default());
        for _ in 0..17 {
            q.dequeue();
        }
        for id in 26..=42 {
            q.enqueue(req(id, 0.5)).unwrap();
        }
        // queue: ids 18..=42, W = 25, head = 18
        o.complete_service(2).unwrap();
        let act = o.on_pull(&mut q, 2, 1.0, &mut no_demand).unwrap();
        assert_eq!(
            act,
            ScaleAction::Dispatch {
                request: 18,
                worker: 2,
                arrival_time: 0.0,
                demand: 2.0
            }
        );
        let w = o.worker(2).unwrap();
        assert_eq!(w.state, WorkerState::Busy);
        assert_eq!(w.busy_until, Some(3.0));
    }

    #[test]
    fn pull_on_empty_queue_parks() {
        // Scaling off so the empty queue does not trigger destruction.
        let mut q = RequestQueue::new();
        let mut o = Orchestrator::new(PidGains::default(), ControlTarget::default(), false, 5, 0.0).unwrap();
        o.parked.clear();
        let act = o.on_pull(&mut q, 4, 1.0, &mut no_demand).unwrap();
        assert_eq!(act, ScaleAction::NoOp);
        assert_eq!(o.worker(4).unwrap().state, WorkerState::Idle);
        assert_eq!(o.parked, VecDeque::from([4]));
    }

    #[test]
    fn parked_worker_takes_new_arrival_before_measurement() {
        let mut q = RequestQueue::new();
        let mut o = Orchestrator::new(PidGains::default(), ControlTarget::default(), true, 1, 0.0).unwrap();
        q.enqueue(req(1, 0.7)).unwrap();
        let acts = o.on_arrival(&mut q, 0.7, &mut no_demand).unwrap();
        assert!(matches!(acts[0], ScaleAction::Dispatch { request: 1, worker: 1, .. }));
        assert_eq!(o.samples()[0].w, 0);
        assert!(q.is_empty());
    }

    #[test]
    fn sampled_demand_when_absent() {
        let mut q = RequestQueue::new();
        let mut o = Orchestrator::new(PidGains::default(), ControlTarget::default(), false, 1, 0.0).unwrap();
        q.enqueue(Request {
            id: 1,
            arrival_time: 0.0,
            service_demand: None,
        })
        .unwrap();
        let acts = o.on_arrival(&mut q, 0.0, &mut |_| 4.25).unwrap();
        assert!(matches!(acts[0], ScaleAction::Dispatch { demand, .. } if demand == 4.25));
    }

    #[test]
    fn starting_worker_becomes_idle_on_first_pull() {
        let mut q = RequestQueue::new();
        let mut o = primed(1, &mut q, 40, PidGains::default());
        o.on_arrival(&mut q, 1.0, &mut no_demand).unwrap();
        assert_eq!(o.worker(2).unwrap().state, WorkerState::Starting);
        let act = o.on_pull(&mut q, 2, 2.0, &mut no_demand).unwrap();
        assert!(matches!(act, ScaleAction::Dispatch { worker: 2, request: 1, .. }));
    }

    #[test]
    fn protocol_errors() {
        let mut q = RequestQueue::new();
        let mut o = primed(2, &mut q, 3, PidGains::default());
        assert!(matches!(
            o.on_pull(&mut q, 99, 1.0, &mut no_demand),
            Err(Error::Protocol(_))
        ));
        assert!(matches!(
            o.on_pull(&mut q, 1, 1.0, &mut no_demand),
            Err(Error::Protocol(_))
        ));
        assert!(o.complete_service(99).is_err());
    }

    #[test]
    fn fixed_pool_never_scales() {
        let mut q = RequestQueue::new();
        let mut o = Orchestrator::new(PidGains::default(), ControlTarget::default(), false, 6, 0.0).unwrap();
        o.parked.clear();
        for w in o.workers.values_mut() {
            w.state = WorkerState::Busy;
        }
        fill(&mut q, 200);
        let acts = o.on_arrival(&mut q, 1.0, &mut no_demand).unwrap();
        assert_eq!(acts, vec![ScaleAction::NoOp]);
        let s = o.samples()[0];
        assert_eq!((s.p, s.p_wanted, s.p_out), (6, 6, 0.0));
    }

    #[test]
    fn initial_pool_must_respect_bounds() {
        let t = ControlTarget {
            p_min: 2,
            ..ControlTarget::default()
        };
        assert!(Orchestrator::new(PidGains::default(), t, true, 1, 0.0).is_err());
        assert!(Orchestrator::new(PidGains::default(), t, false, 1, 0.0).is_ok());
    }
}
