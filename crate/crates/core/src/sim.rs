//! Deterministic discrete-event kernel.
//!
//! Events are processed in `(time, seq)` order, `seq` being the order in
//! which they were scheduled. Three independent ChaCha8 streams derived from
//! the run seed drive arrivals, service demands and startup delays, so
//! changing one distribution does not perturb the others.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{ControlTarget, PidGains, SignConvention};
use crate::error::{Error, Result};
use crate::metrics::{RunSummary, SampleRecord, Trigger};
use crate::orchestrator::{Orchestrator, ScaleAction};
use crate::queue::{Request, RequestQueue};
use crate::workload::{ArrivalGenerator, WorkloadDescriptor};

pub const RNG_NAME: &str = "ChaCha8Rng(seed_from_u64); streams arrivals=0 service=1 startup=2";

const STREAM_ARRIVALS: u64 = 0;
const STREAM_SERVICE: u64 = 1;
const STREAM_STARTUP: u64 = 2;

/// `-mean * ln(u)` with `u` uniform on `(0, 1)`; always strictly positive.
pub fn sample_exponential<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return -mean * u.ln();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Constant { value: f64 },
    Exponential { mean: f64 },
}

impl Distribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Constant { value } => value,
            Distribution::Exponential { mean } => sample_exponential(rng, mean),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Constant { value } => value,
            Distribution::Exponential { mean } => mean,
        }
    }

    /// `allow_zero` admits a constant of exactly 0 (instant startup).
    fn validate(&self, name: &str, allow_zero: bool) -> Result<()> {
        let v = self.mean();
        let ok = v.is_finite()
            && match self {
                Distribution::Constant { .. } if allow_zero => v >= 0.0,
                _ => v > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("{name} parameter must be positive, got {v}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// `false` disables the controller and pins the pool at `initial_workers`.
    pub enabled: bool,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub sign_convention: SignConvention,
    pub integral_clamp: f64,
    /// Target queue length `T`.
    pub target: f64,
    pub p_min: u32,
    pub p_max: u32,
    /// Defaults to `p_min`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_workers: Option<u32>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        let g = PidGains::default();
        let t = ControlTarget::default();
        Self {
            enabled: true,
            kp: g.kp,
            ki: g.ki,
            kd: g.kd,
            sign_convention: g.sign_convention,
            integral_clamp: g.integral_clamp,
            target: t.target_queue_length,
            p_min: t.p_min,
            p_max: t.p_max,
            initial_workers: None,
        }
    }
}

impl ControlConfig {
    pub fn gains(&self) -> PidGains {
        PidGains {
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
            sign_convention: self.sign_convention,
            integral_clamp: self.integral_clamp,
        }
    }

    pub fn target(&self) -> ControlTarget {
        ControlTarget {
            target_queue_length: self.target,
            p_min: self.p_min,
            p_max: self.p_max,
        }
    }

    pub fn initial_workers(&self) -> u32 {
        self.initial_workers.unwrap_or(self.p_min)
    }

    /// A controller-less pool of exactly `workers`.
    pub fn fixed(workers: u32) -> Self {
        Self {
            enabled: false,
            initial_workers: Some(workers),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Seconds; may be infinite when the workload is finite.
    pub horizon: f64,
    pub workload: WorkloadDescriptor,
    pub service: Distribution,
    pub startup: Distribution,
    pub control: ControlConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            horizon: 3600.0,
            workload: WorkloadDescriptor::default(),
            service: Distribution::Exponential { mean: 5.0 },
            startup: Distribution::Constant { value: 1.0 },
            control: ControlConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon.is_nan() || self.horizon <= 0.0 {
            return Err(Error::invalid(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if self.horizon.is_infinite()
            && self.workload.limit().is_none()
            && !matches!(self.workload, WorkloadDescriptor::Trace { .. })
        {
            return Err(Error::invalid(
                "an infinite horizon needs a finite workload (set workload.limit)",
            ));
        }
        self.workload.validate()?;
        self.service.validate("service", false)?;
        self.startup.validate("startup", true)?;
        self.control.gains().validate()?;
        self.control.target().validate()?;
        if self.control.enabled {
            let init = self.control.initial_workers();
            if init < self.control.p_min || init > self.control.p_max {
                return Err(Error::invalid(format!(
                    "control.initial_workers {init} outside [{}, {}]",
                    self.control.p_min, self.control.p_max
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Arrival(Request),
    StartupComplete { worker: u64 },
    ServiceComplete { worker: u64, request: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap.
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A processed event, kept for auditing the run.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub seq: u64,
    pub time: f64,
    /// Time at which the event was put on the calendar.
    pub scheduled_at: f64,
    pub kind: EventKind,
}

/// One controller decision, tied to the event that triggered it.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    pub time: f64,
    pub event_seq: u64,
    pub trigger: Trigger,
    pub action: ScaleAction,
}

impl std::fmt::Display for ActionRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let trigger = match self.trigger {
            Trigger::Arrival => "arrival",
            Trigger::Pull => "pull",
        };
        write!(
            f,
            "{} event={} trigger={} {}",
            self.time, self.event_seq, trigger, self.action
        )
    }
}

/// What to keep besides the summary. Long validation runs switch both off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Recording {
    pub samples: bool,
    pub trace: bool,
}

impl Default for Recording {
    fn default() -> Self {
        Self {
            samples: true,
            trace: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub samples: Vec<SampleRecord>,
    pub actions: Vec<ActionRecord>,
    pub events: Vec<EventRecord>,
    pub summary: RunSummary,
}

pub fn run(cfg: &SimConfig) -> Result<RunOutput> {
    run_with(cfg, Recording::default())
}

pub fn run_with(cfg: &SimConfig, recording: Recording) -> Result<RunOutput> {
    cfg.validate()?;
    let arrivals = ArrivalGenerator::new(&cfg.workload)?;
    Kernel::new(cfg, arrivals, recording)?.run()
}

/// Runs with an explicit arrival stream (e.g. in-memory trace rows).
pub fn run_with_arrivals(
    cfg: &SimConfig,
    arrivals: ArrivalGenerator,
    recording: Recording,
) -> Result<RunOutput> {
    cfg.validate()?;
    Kernel::new(cfg, arrivals, recording)?.run()
}

struct Kernel<'a> {
    cfg: &'a SimConfig,
    recording: Recording,
    calendar: BinaryHeap<Event>,
    next_seq: u64,
    now: f64,
    arrivals: ArrivalGenerator,
    rng_arrivals: ChaCha8Rng,
    rng_service: ChaCha8Rng,
    rng_startup: ChaCha8Rng,
    queue: RequestQueue,
    orch: Orchestrator,
    /// `event seq -> scheduled_at` for auditing.
    scheduled_at: HashMap<u64, f64>,
    events: Vec<EventRecord>,
    actions: Vec<ActionRecord>,
    // Accumulators for the piecewise-constant W(t) and P(t).
    last_change: f64,
    area_w: f64,
    area_p: f64,
    max_w: u64,
    max_p: u32,
    generated: u64,
    served: u64,
    in_service: u64,
    response_sum: f64,
    creations: u64,
    destructions: u64,
}

impl<'a> Kernel<'a> {
    fn new(cfg: &'a SimConfig, arrivals: ArrivalGenerator, recording: Recording) -> Result<Self> {
        let stream = |s| {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
            r.set_stream(s);
            r
        };
        let initial = cfg.control.initial_workers();
        let mut orch = Orchestrator::new(
            cfg.control.gains(),
            cfg.control.target(),
            cfg.control.enabled,
            initial,
            0.0,
        )?;
        orch.set_record_samples(recording.samples);
        Ok(Self {
            cfg,
            recording,
            calendar: BinaryHeap::new(),
            next_seq: 0,
            now: 0.0,
            arrivals,
            rng_arrivals: stream(STREAM_ARRIVALS),
            rng_service: stream(STREAM_SERVICE),
            rng_startup: stream(STREAM_STARTUP),
            queue: RequestQueue::new(),
            orch,
            scheduled_at: HashMap::new(),
            events: Vec::new(),
            actions: Vec::new(),
            last_change: 0.0,
            area_w: 0.0,
            area_p: 0.0,
            max_w: 0,
            max_p: initial,
            generated: 0,
            served: 0,
            in_service: 0,
            response_sum: 0.0,
            creations: 0,
            destructions: 0,
        })
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        if self.recording.trace {
            self.scheduled_at.insert(seq, self.now);
        }
        self.calendar.push(Event { time, seq, kind });
    }

    fn schedule_next_arrival(&mut self) {
        if let Some(r) = self.arrivals.next_arrival(&mut self.rng_arrivals) {
            self.schedule(r.arrival_time, EventKind::Arrival(r));
        }
    }

    fn advance_to(&mut self, t: f64) {
        let dt = t - self.last_change;
        self.area_w += self.queue.len() as f64 * dt;
        self.area_p += f64::from(self.orch.pool_size()) * dt;
        self.last_change = t;
    }

    fn run(mut self) -> Result<RunOutput> {
        let initial_p = self.orch.pool_size();
        self.schedule_next_arrival();

        while let Some(ev) = self.calendar.pop() {
            if ev.time > self.cfg.horizon {
                break;
            }
            debug_assert!(ev.time >= self.now);
            self.advance_to(ev.time);
            self.now = ev.time;
            if self.recording.trace {
                let scheduled_at = self.scheduled_at.remove(&ev.seq).unwrap_or(ev.time);
                self.events.push(EventRecord {
                    seq: ev.seq,
                    time: ev.time,
                    scheduled_at,
                    kind: ev.kind.clone(),
                });
            }
            self.process(ev)?;
            self.max_w = self.max_w.max(self.queue.len());
            self.max_p = self.max_p.max(self.orch.pool_size());
        }

        let end_time = if self.cfg.horizon.is_finite() {
            self.cfg.horizon
        } else {
            self.now
        };
        self.advance_to(end_time);
        let (time_average_w, time_average_p) = if end_time > 0.0 {
            (self.area_w / end_time, self.area_p / end_time)
        } else {
            (self.queue.len() as f64, f64::from(self.orch.pool_size()))
        };

        let summary = RunSummary {
            rng: RNG_NAME.to_owned(),
            seed: self.cfg.seed,
            end_time,
            time_average_w,
            time_average_p,
            max_w: self.max_w,
            max_p: self.max_p,
            requests_generated: self.generated,
            requests_served: self.served,
            requests_in_queue: self.queue.len(),
            requests_in_service: self.in_service,
            mean_response_time: (self.served > 0).then(|| self.response_sum / self.served as f64),
            initial_p,
            final_p: self.orch.pool_size(),
            creations: self.creations,
            destructions: self.destructions,
            samples: self.orch.sample_count(),
        };
        let samples = if self.recording.samples {
            self.orch.into_samples()
        } else {
            Vec::new()
        };
        Ok(RunOutput {
            samples,
            actions: self.actions,
            events: self.events,
            summary,
        })
    }

    fn process(&mut self, ev: Event) -> Result<()> {
        let now = ev.time;
        let service = self.cfg.service;
        let rng_service = &mut self.rng_service;
        let mut demand = |_: &Request| service.sample(rng_service);

        let (trigger, actions) = match ev.kind {
            EventKind::Arrival(r) => {
                self.queue.enqueue(r)?;
                self.generated += 1;
                let actions = self.orch.on_arrival(&mut self.queue, now, &mut demand)?;
                (Trigger::Arrival, actions)
            }
            EventKind::StartupComplete { worker } => {
                let a = self.orch.on_pull(&mut self.queue, worker, now, &mut demand)?;
                (Trigger::Pull, vec![a])
            }
            EventKind::ServiceComplete { worker, .. } => {
                self.served += 1;
                self.in_service -= 1;
                self.orch.complete_service(worker)?;
                let a = self.orch.on_pull(&mut self.queue, worker, now, &mut demand)?;
                (Trigger::Pull, vec![a])
            }
        };
        for action in actions {
            match &action {
                ScaleAction::CreateWorkers { ids } => {
                    self.creations += ids.end - ids.start;
                    for worker in ids.clone() {
                        let delay = self.cfg.startup.sample(&mut self.rng_startup);
                        self.schedule(now + delay, EventKind::StartupComplete { worker });
                    }
                }
                ScaleAction::DestroyWorker { .. } => self.destructions += 1,
                ScaleAction::Dispatch {
                    request,
                    worker,
                    arrival_time,
                    demand,
                } => {
                    self.in_service += 1;
                    let done = now + demand;
                    self.response_sum += done - arrival_time;
                    self.schedule(
                        done,
                        EventKind::ServiceComplete {
                            worker: *worker,
                            request: *request,
                        },
                    );
                }
                ScaleAction::NoOp => {}
            }
            if self.recording.trace {
                self.actions.push(ActionRecord {
                    time: now,
                    event_seq: ev.seq,
                    trigger,
                    action,
                });
            }
        }

        if trigger == Trigger::Arrival {
            self.schedule_next_arrival();
        }
        Ok(())
    }
}
