//! Deviation and fluctuation statistics of sampled motion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled position channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub dt: f64,
    pub names: Vec<String>,
    pub channels: Vec<Vec<f64>>,
}

impl SampleStream {
    pub fn new(dt: f64, names: &[&str]) -> Self {
        SampleStream { dt, names: names.iter().map(|s| s.to_string()).collect(), channels: vec![Vec::new(); names.len()] }
    }

    pub fn push(&mut self, values: &[f64]) {
        for (c, v) in self.channels.iter_mut().zip(values) {
            c.push(*v);
        }
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Central differences, one-sided at the ends.
pub fn difference(x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (x[1] - x[0]) / dt
            } else if i == n - 1 {
                (x[n - 1] - x[n - 2]) / dt
            } else {
                (x[i + 1] - x[i - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

/// Statistics of one derived signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalMetrics {
    pub name: String,
    pub max_deviation: f64,
    pub mean_deviation: f64,
    pub deviation_std: f64,
    /// Of the actual signal.
    pub peak: f64,
    pub rms: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub samples: usize,
    pub dt: f64,
    pub signals: Vec<SignalMetrics>,
}

impl MetricsReport {
    pub fn get(&self, name: &str) -> Option<&SignalMetrics> {
        self.signals.iter().find(|s| s.name == name)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Velocity, acceleration and jerk of every channel, compared sample by
/// sample. Signals are named `<channel>.velocity`, `.acceleration`, `.jerk`.
pub fn compute_metrics(ideal: &SampleStream, actual: &SampleStream) -> Result<MetricsReport> {
    if ideal.channels.len() != actual.channels.len() {
        return Err(Error::LengthMismatch { a: ideal.channels.len(), b: actual.channels.len() });
    }
    if ideal.len() != actual.len() {
        return Err(Error::LengthMismatch { a: ideal.len(), b: actual.len() });
    }
    if ideal.len() < 2 {
        return Err(Error::InvalidPath("streams need at least two samples".into()));
    }
    if ideal.dt != actual.dt || !(ideal.dt > 0.0) {
        return Err(Error::InconsistentSpec(format!("stream periods differ ({} vs {})", ideal.dt, actual.dt)));
    }
    let mut signals = Vec::new();
    for (c, name) in ideal.names.iter().enumerate() {
        let mut xi = ideal.channels[c].clone();
        let mut xa = actual.channels[c].clone();
        for label in ["velocity", "acceleration", "jerk"] {
            xi = difference(&xi, ideal.dt);
            xa = difference(&xa, ideal.dt);
            let dev: Vec<f64> = xi.iter().zip(&xa).map(|(a, b)| (b - a).abs()).collect();
            signals.push(SignalMetrics {
                name: format!("{name}.{label}"),
                max_deviation: dev.iter().copied().fold(0.0, f64::max),
                mean_deviation: mean(&dev),
                deviation_std: std_dev(&dev),
                peak: xa.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                rms: (xa.iter().map(|v| v * v).sum::<f64>() / xa.len() as f64).sqrt(),
                std: std_dev(&xa),
            });
        }
    }
    Ok(MetricsReport { samples: ideal.len(), dt: ideal.dt, signals })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(f: impl Fn(f64) -> f64) -> SampleStream {
        let mut s = SampleStream::new(0.01, &["task"]);
        for i in 0..200 {
            s.push(&[f(i as f64 * 0.01)]);
        }
        s
    }

    #[test]
    fn identical_streams_have_zero_deviation() {
        let a = stream(|t| t * t * t);
        let rep = compute_metrics(&a, &a).unwrap();
        assert!(rep.signals.iter().all(|s| s.max_deviation == 0.0));
    }

    #[test]
    fn feed_offset_of_one() {
        let a = stream(|t| 20.0 * t);
        let b = stream(|t| 21.0 * t);
        let rep = compute_metrics(&a, &b).unwrap();
        let f = rep.get("task.velocity").unwrap();
        assert!((f.max_deviation - 1.0).abs() < 1e-9 && (f.mean_deviation - 1.0).abs() < 1e-9);
        assert!(f.deviation_std < 1e-9);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let a = stream(|t| t);
        let mut b = a.clone();
        b.channels[0].pop();
        assert!(matches!(compute_metrics(&a, &b), Err(Error::LengthMismatch { .. })));
    }
}
