//! Controller samples, smoothing, time averages and file export.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header of `samples.csv`.
pub const SAMPLES_HEADER: &str = "time_s,w,error,p,p_wanted,p_out,trigger";
/// Header of `samples_smoothed.csv`.
pub const SMOOTHED_HEADER: &str = "time_s,w_ma,p_ma";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    Arrival,
    Pull,
}

/// One controller observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    #[serde(rename = "time_s")]
    pub time: f64,
    pub w: u64,
    pub error: f64,
    pub p: u32,
    pub p_wanted: u32,
    pub p_out: f64,
    pub trigger: Trigger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedSample {
    #[serde(rename = "time_s")]
    pub time: f64,
    pub w_ma: f64,
    pub p_ma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub rng: String,
    pub seed: u64,
    pub end_time: f64,
    pub time_average_w: f64,
    pub time_average_p: f64,
    pub max_w: u64,
    pub max_p: u32,
    pub requests_generated: u64,
    pub requests_served: u64,
    pub requests_in_queue: u64,
    pub requests_in_service: u64,
    pub mean_response_time: Option<f64>,
    pub initial_p: u32,
    pub final_p: u32,
    pub creations: u64,
    pub destructions: u64,
    pub samples: u64,
}

impl RunSummary {
    /// `generated == served + queued + in service`.
    pub fn requests_conserved(&self) -> bool {
        self.requests_generated
            == self.requests_served + self.requests_in_queue + self.requests_in_service
    }

    /// `creations - destructions == final P - initial P`.
    pub fn pool_conserved(&self) -> bool {
        self.creations as i64 - self.destructions as i64
            == i64::from(self.final_p) - i64::from(self.initial_p)
    }
}

/// Trailing mean over the last `min(i + 1, window)` values.
pub fn moving_average(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::invalid("moving average window must be >= 1"));
    }
    Ok((0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let slice = &values[lo..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}

/// Smooths `w` and `p` of a sample series, keeping time stamps.
pub fn smooth_samples(samples: &[SampleRecord], window: usize) -> Result<Vec<SmoothedSample>> {
    let w: Vec<f64> = samples.iter().map(|s| s.w as f64).collect();
    let p: Vec<f64> = samples.iter().map(|s| f64::from(s.p)).collect();
    let w_ma = moving_average(&w, window)?;
    let p_ma = moving_average(&p, window)?;
    Ok(samples
        .iter()
        .zip(w_ma)
        .zip(p_ma)
        .map(|((s, w_ma), p_ma)| SmoothedSample {
            time: s.time,
            w_ma,
            p_ma,
        })
        .collect())
}

/// Time average of a piecewise-constant signal given as `(time, value)`
/// change points. Each value holds until the next point; the last one holds
/// until `horizon`. The signal is taken as zero before the first point and
/// points past `horizon` are ignored.
pub fn time_average(series: &[(f64, f64)], horizon: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::invalid("time average of an empty series"));
    }
    if horizon.is_nan() || horizon <= 0.0 {
        return Err(Error::invalid(format!("horizon must be > 0, got {horizon}")));
    }
    let mut area = 0.0;
    for (i, &(t, v)) in series.iter().enumerate() {
        if t >= horizon {
            break;
        }
        let until = series.get(i + 1).map_or(horizon, |n| n.0.min(horizon));
        area += v * (until - t);
    }
    Ok(area / horizon)
}

/// Writes `samples.csv` with the exact [`SAMPLES_HEADER`] and `\n` endings.
pub fn write_samples<W: Write>(out: W, samples: &[SampleRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SAMPLES_HEADER.split(','))?;
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples<R: Read>(input: R) -> Result<Vec<SampleRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != SAMPLES_HEADER {
        return Err(Error::invalid(format!(
            "unexpected samples header {:?}, expected {SAMPLES_HEADER:?}",
            header.join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_smoothed<W: Write>(out: W, smoothed: &[SmoothedSample]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SMOOTHED_HEADER.split(','))?;
    for s in smoothed {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_smoothed<R: Read>(input: R) -> Result<Vec<SmoothedSample>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_summary<W: Write>(mut out: W, summary: &RunSummary) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n")?;
    Ok(())
}
