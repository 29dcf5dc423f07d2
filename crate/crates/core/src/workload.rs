//! Request-stream generators.

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queue::Request;
use crate::sim::sample_exponential;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorkloadDescriptor {
    /// Exponential inter-arrival times.
    Poisson {
        mean_interarrival: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<u64>,
    },
    /// Arrivals at `interval, 2 * interval, ...`.
    Deterministic {
        interval: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<u64>,
    },
    /// CSV replay with header `time_s[,service_demand_s]`.
    Trace {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<u64>,
    },
}

impl Default for WorkloadDescriptor {
    fn default() -> Self {
        WorkloadDescriptor::Poisson {
            mean_interarrival: 1.0,
            limit: None,
        }
    }
}

impl WorkloadDescriptor {
    pub fn limit(&self) -> Option<u64> {
        match self {
            WorkloadDescriptor::Poisson { limit, .. }
            | WorkloadDescriptor::Deterministic { limit, .. }
            | WorkloadDescriptor::Trace { limit, .. } => *limit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WorkloadDescriptor::Poisson {
                mean_interarrival: m,
                ..
            } if !(m.is_finite() && *m > 0.0) => Err(Error::invalid(format!(
                "workload.mean_interarrival must be > 0, got {m}"
            ))),
            WorkloadDescriptor::Deterministic { interval, .. }
                if !(interval.is_finite() && *interval > 0.0) =>
            {
                Err(Error::invalid(format!(
                    "workload.interval must be > 0, got {interval}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// One row of a replayed trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub service_demand: Option<f64>,
}

/// Loads and validates a trace: strictly increasing, finite, non-negative
/// times and positive demands. Errors carry the file line number.
pub fn load_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let file = File::open(path).map_err(|e| Error::Trace {
        path: path.to_owned(),
        line: 0,
        msg: e.to_string(),
    })?;
    parse_trace(file, path)
}

pub fn parse_trace<R: std::io::Read>(input: R, path: &Path) -> Result<Vec<TraceRow>> {
    let err = |line: u64, msg: String| Error::Trace {
        path: path.to_owned(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| err(1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let with_demand = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["time_s"] => false,
        ["time_s", "service_demand_s"] => true,
        _ => {
            return Err(err(
                1,
                format!("expected header time_s[,service_demand_s], got {:?}", header.join(",")),
            ))
        }
    };

    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<f64> {
            let raw = record
                .get(i)
                .ok_or_else(|| err(line, format!("missing {name}")))?;
            raw.parse::<f64>()
                .map_err(|_| err(line, format!("{name} is not a number: {raw:?}")))
        };
        let time = field(0, "time_s")?;
        if !time.is_finite() || time < 0.0 {
            return Err(err(line, format!("time_s must be finite and >= 0, got {time}")));
        }
        if let Some(p) = prev {
            if time <= p {
                return Err(err(
                    line,
                    format!("time_s must strictly increase ({time} after {p})"),
                ));
            }
        }
        prev = Some(time);
        let service_demand = if with_demand {
            let d = field(1, "service_demand_s")?;
            if !(d.is_finite() && d > 0.0) {
                return Err(err(line, format!("service_demand_s must be > 0, got {d}")));
            }
            Some(d)
        } else {
            None
        };
        rows.push(TraceRow {
            time,
            service_demand,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
enum Process {
    Poisson { mean: f64 },
    Deterministic { interval: f64 },
    Trace { rows: Vec<TraceRow> },
}

/// Stateful arrival generator owned by one simulation.
#[derive(Debug, Clone)]
pub struct ArrivalGenerator {
    process: Process,
    limit: Option<u64>,
    /// Number of requests emitted so far (also the last id).
    emitted: u64,
    clock: f64,
}

impl ArrivalGenerator {
    pub fn new(desc: &WorkloadDescriptor) -> Result<Self> {
        desc.validate()?;
        let process = match desc {
            WorkloadDescriptor::Poisson {
                mean_interarrival, ..
            } => Process::Poisson {
                mean: *mean_interarrival,
            },
            WorkloadDescriptor::Deterministic { interval, .. } => Process::Deterministic {
                interval: *interval,
            },
            WorkloadDescriptor::Trace { path, .. } => Process::Trace {
                rows: load_trace(path)?,
            },
        };
        Ok(Self {
            process,
            limit: desc.limit(),
            emitted: 0,
            clock: 0.0,
        })
    }

    pub fn from_trace_rows(rows: Vec<TraceRow>, limit: Option<u64>) -> Self {
        Self {
            process: Process::Trace { rows },
            limit,
            emitted: 0,
            clock: 0.0,
        }
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Next request, or `None` once the stream is exhausted.
    pub fn next_arrival<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Request> {
        if self.limit.is_some_and(|l| self.emitted >= l) {
            return None;
        }
        let id = self.emitted + 1;
        let (time, service_demand) = match &self.process {
            Process::Poisson { mean } => {
                // A gap too small to move the clock would repeat a timestamp.
                let mut t = self.clock + sample_exponential(rng, *mean);
                while t <= self.clock {
                    t = self.clock + sample_exponential(rng, *mean);
                }
                (t, None)
            }
            Process::Deterministic { interval } => (id as f64 * interval, None),
            Process::Trace { rows } => {
                let row = rows.get(self.emitted as usize)?;
                (row.time, row.service_demand)
            }
        };
        self.clock = time;
        self.emitted = id;
        Some(Request {
            id,
            arrival_time: time,
            service_demand,
        })
    }
}
