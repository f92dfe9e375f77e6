//! Fixed-period parameter interpolators driven by a constant feed.

use crate::bspline::{ArcLengthTable, BSplineCurve};
use crate::error::{Error, Result};
use crate::modifier::ModifierPolySet;

use super::metrics::SampleStream;

#[derive(Debug, Clone, Copy)]
pub enum BaselineMethod<'a> {
    /// `u` proportional to the commanded arc length.
    Natural,
    Taylor1,
    Taylor2,
    Modifier(&'a ModifierPolySet),
}

impl BaselineMethod<'_> {
    pub fn label(&self) -> String {
        match self {
            BaselineMethod::Natural => "natural".into(),
            BaselineMethod::Taylor1 => "taylor1".into(),
            BaselineMethod::Taylor2 => "taylor2".into(),
            BaselineMethod::Modifier(m) => format!("modifier({:e})", m.tolerance()),
        }
    }
}

/// Constant commanded feed (mm/s) at a fixed period (s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedSchedule {
    pub feed: f64,
    pub period: f64,
}

/// Commanded and achieved arc length at every tick.
#[derive(Debug, Clone)]
pub struct BaselineStream {
    pub method: String,
    pub period: f64,
    pub u: Vec<f64>,
    pub ideal: Vec<f64>,
    pub actual: Vec<f64>,
    /// Some step ran past `u = 1` and was clipped.
    pub overrun: bool,
}

impl BaselineStream {
    pub fn streams(&self) -> (SampleStream, SampleStream) {
        let mut a = SampleStream::new(self.period, &["task"]);
        let mut b = a.clone();
        for (i, s) in self.ideal.iter().zip(&self.actual) {
            a.push(&[*i]);
            b.push(&[*s]);
        }
        (a, b)
    }
}

/// Runs one interpolator over the whole path. The stream stops at the last
/// full step that fits into the path length.
pub fn baseline_interpolate(
    method: BaselineMethod,
    curve: &BSplineCurve,
    table: &ArcLengthTable,
    schedule: FeedSchedule,
) -> Result<BaselineStream> {
    if !(schedule.feed > 0.0) || !(schedule.period > 0.0) {
        return Err(Error::InfeasibleLimits { name: "feed schedule".into(), value: schedule.feed.min(schedule.period) });
    }
    let total = table.total_length();
    let step = schedule.feed * schedule.period;
    let count = (total / step + 1e-9).floor() as usize;
    if count < 2 {
        return Err(Error::InvalidPath("path shorter than two interpolation steps".into()));
    }
    let mut u = Vec::with_capacity(count + 1);
    let mut overrun = false;
    let mut cur = 0.0f64;
    for k in 0..=count {
        let s = k as f64 * step;
        let next = match method {
            BaselineMethod::Natural => s / total,
            BaselineMethod::Modifier(m) => m.eval_unchecked(s, 0),
            BaselineMethod::Taylor1 | BaselineMethod::Taylor2 => {
                if k == 0 {
                    0.0
                } else {
                    let [_, d1, d2, _] = curve.eval_all(cur);
                    let n2 = d1.norm_squared();
                    let mut v = cur + step / n2.sqrt();
                    if matches!(method, BaselineMethod::Taylor2) {
                        // constant feed: the s̈ term vanishes
                        v -= 0.5 * step * step * d1.dot(&d2) / (n2 * n2);
                    }
                    v
                }
            }
        };
        cur = if next > 1.0 {
            overrun = true;
            1.0
        } else {
            next.max(0.0)
        };
        u.push(cur);
    }
    let ideal = (0..=count).map(|k| k as f64 * step).collect();
    let actual = u.iter().map(|&x| table.length_at(curve, x)).collect();
    Ok(BaselineStream { method: method.label(), period: schedule.period, u, ideal, actual, overrun })
}

/// One line of the interpolator comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: String,
    /// Modifier segment count.
    pub segments: Option<usize>,
    pub feed_max: f64,
    pub feed_mean: f64,
    pub accel_max: f64,
    pub accel_mean: f64,
    pub jerk_max: f64,
    pub jerk_mean: f64,
    pub overrun: bool,
}

/// Runs natural, both Taylor schemes and one modifier set per tolerance
/// under the same feed schedule.
pub fn compare_interpolators(curve: &BSplineCurve, table: &ArcLengthTable, schedule: FeedSchedule, eps: &[f64]) -> Result<Vec<CompareRow>> {
    let mut sets = Vec::with_capacity(eps.len());
    for &e in eps {
        sets.push(crate::modifier::fit_modifier_polynomials(table, curve, e)?);
    }
    let mut methods = vec![BaselineMethod::Natural, BaselineMethod::Taylor1, BaselineMethod::Taylor2];
    methods.extend(sets.iter().map(BaselineMethod::Modifier));
    let mut rows = Vec::with_capacity(methods.len());
    for m in methods {
        let stream = baseline_interpolate(m, curve, table, schedule)?;
        let (ideal, actual) = stream.streams();
        let rep = super::compute_metrics(&ideal, &actual)?;
        let get = |name: &str| rep.get(name).expect("task signals present");
        let (f, a, j) = (get("task.velocity"), get("task.acceleration"), get("task.jerk"));
        rows.push(CompareRow {
            method: stream.method.clone(),
            segments: match m {
                BaselineMethod::Modifier(set) => Some(set.segments().len()),
                _ => None,
            },
            feed_max: f.max_deviation,
            feed_mean: f.mean_deviation,
            accel_max: a.max_deviation,
            accel_mean: a.mean_deviation,
            jerk_max: j.max_deviation,
            jerk_mean: j.mean_deviation,
            overrun: stream.overrun,
        });
    }
    Ok(rows)
}
