//! PID-driven horizontal autoscaling of a pull-based worker pool.
//!
//! Requests arrive at a single FIFO queue. A controller samples the queue
//! length `W` whenever a request arrives or a worker asks for work, runs a
//! PID law against a target `T`, and resizes the pool: arrivals may create
//! many workers at once, while each pull may destroy at most the worker
//! that is pulling. Everything runs inside a deterministic discrete-event
//! simulation so that runs can be reproduced bit for bit and checked against
//! the Erlang C formula when the controller is switched off.
//!
//! The modules, bottom up:
//!
//! - [`control`]: error signal, PID step over irregular samples, wanted pool size.
//! - [`queue`]: FIFO with ID-difference queue length.
//! - [`orchestrator`]: arrival/pull state machine over the worker pool.
//! - [`workload`]: Poisson, deterministic and CSV-trace arrival streams.
//! - [`sim`]: the event kernel and run configuration.
//! - [`mmc`]: M/M/c steady-state formulas.
//! - [`metrics`]: samples, smoothing, time averages, CSV/JSON export.
//! - [`audit`]: replays a run trace and checks the pool lifecycle rules.
//! - [`config`] and [`cli`]: file-based configuration and the command-line front end.

pub mod audit;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod metrics;
pub mod mmc;
pub mod orchestrator;
pub mod queue;
pub mod sim;
pub mod workload;

pub use control::{compute_error, pid_step, wanted_pool, ControlTarget, PidGains, PidState, SignConvention};
pub use error::{Error, Result};
pub use metrics::{RunSummary, SampleRecord, Trigger};
pub use orchestrator::{Orchestrator, ScaleAction, Worker, WorkerState};
pub use queue::{Request, RequestQueue};
pub use sim::{run, run_with, ControlConfig, Distribution, RunOutput, SimConfig};
pub use workload::WorkloadDescriptor;
