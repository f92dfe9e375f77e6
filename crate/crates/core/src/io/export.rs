use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::io_error;
use crate::engine::{
    compute_metrics, fluctuation_comparison, CompareRow, FluctuationReport, JointLut, MetricsReport, MotionPlan, TrackingReport,
};
use crate::error::{Error, Result};
use crate::minjerk::timing::ConstraintPeak;

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanMetrics {
    pub path_length_mm: f64,
    pub total_time_s: f64,
    pub time_scale: f64,
    pub binding_constraint: String,
    pub peaks: Vec<ConstraintPeak>,
    pub tracking: TrackingReport,
    pub fluctuation: FluctuationReport,
    pub metrics: MetricsReport,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Writes `samples.csv`, `joint_lut.csv`, `metrics.json` and `plotdata/`
/// into `dir`, creating it when needed.
pub fn export_plan(plan: &MotionPlan, dir: &Path) -> Result<PlanMetrics> {
    std::fs::create_dir_all(dir.join("plotdata")).map_err(|e| io_error(dir, e))?;
    write(&dir.join("samples.csv"), &samples_csv(plan))?;
    write_joint_lut(&plan.lut, &dir.join("joint_lut.csv"))?;
    let (ideal, actual) = plan.streams(4)?;
    let metrics = compute_metrics(&ideal, &actual)?;
    let report = PlanMetrics {
        path_length_mm: plan.chain.total_length(),
        total_time_s: plan.total_time(),
        time_scale: plan.scale.k,
        binding_constraint: plan.scale.peaks[plan.scale.binding].name.clone(),
        peaks: plan.scale.peaks.clone(),
        tracking: plan.tracking_error(4)?,
        fluctuation: fluctuation_comparison(plan)?,
        metrics,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| io_error(dir, e))?;
    write(&dir.join("metrics.json"), &json)?;
    write_plotdata(plan, &dir.join("plotdata"), &ideal, &actual)?;
    Ok(report)
}

/// Parses `metrics.json` against the schema and checks every number is finite.
pub fn validate_metrics_json(text: &str) -> Result<PlanMetrics> {
    let m: PlanMetrics =
        serde_json::from_str(text).map_err(|e| Error::Parse { path: "metrics.json".into(), line: e.line(), message: e.to_string() })?;
    let mut numbers = vec![m.path_length_mm, m.total_time_s, m.time_scale, m.tracking.max_position_mm, m.tracking.max_alpha_rad];
    numbers.extend(m.fluctuation.optimized);
    numbers.extend(m.fluctuation.baseline);
    for s in &m.metrics.signals {
        numbers.extend([s.max_deviation, s.mean_deviation, s.deviation_std, s.peak, s.rms, s.std]);
    }
    if numbers.iter().any(|v| !v.is_finite()) || m.metrics.samples == 0 {
        return Err(Error::Parse { path: "metrics.json".into(), line: 0, message: "non-finite or empty metrics".into() });
    }
    Ok(m)
}

fn samples_csv(plan: &MotionPlan) -> String {
    let mut out = String::from("# offline samples: lengths in mm, angles in deg, time in s\n");
    let mut cols = vec!["t_s".to_string()];
    let axes = ["x", "y", "z"];
    for (order, suffix) in [(0, ""), (1, "_per_s"), (2, "_per_s2"), (3, "_per_s3")] {
        let pre = ["", "d", "dd", "ddd"][order];
        for a in axes {
            cols.push(format!("{pre}{a}_mm{suffix}"));
        }
        cols.push(format!("{pre}alpha_deg{suffix}"));
    }
    for (order, suffix) in [(0, ""), (1, "_per_s"), (2, "_per_s2"), (3, "_per_s3")] {
        let pre = ["", "d", "dd", "ddd"][order];
        for j in 1..=4 {
            cols.push(format!("{pre}q{j}_mm{suffix}"));
        }
    }
    cols.extend(["s_mm".into(), "u".into(), "w".into()]);
    out.push_str(&cols.join(","));
    out.push('\n');
    for smp in &plan.samples {
        let mut row = vec![smp.t, smp.pose.p.x, smp.pose.p.y, smp.pose.p.z, smp.pose.alpha.to_degrees()];
        for d in &smp.pose_derivatives {
            row.extend([d[0], d[1], d[2], d[3].to_degrees()]);
        }
        row.extend(smp.joints.iter());
        for d in &smp.joint_derivatives {
            row.extend(d.iter());
        }
        row.extend([smp.s, smp.u, smp.w]);
        let strs: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&strs.join(","));
        out.push('\n');
    }
    out
}

/// One row per joint and segment with 17 significant digits.
pub fn write_joint_lut(lut: &JointLut, path: &Path) -> Result<()> {
    let n = lut.degree();
    let mut out = String::from("# joint lookup table: Bezier control points in mm, times in s\n");
    out.push_str("joint,segment,t_start_s,tau_s");
    for c in 0..=n {
        let _ = write!(out, ",c{c}_mm");
    }
    out.push('\n');
    for k in 0..lut.segment_count() {
        for j in 0..4 {
            let _ = write!(out, "{},{},{:.16e},{:.16e}", j + 1, k, lut.starts()[k], lut.durations()[k]);
            for c in lut.control(k, j) {
                let _ = write!(out, ",{c:.16e}");
            }
            out.push('\n');
        }
    }
    write(path, &out)
}

pub fn import_joint_lut(path: &Path) -> Result<JointLut> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    read_joint_lut(&text, &path.display().to_string())
}

/// Parses the text written by [`write_joint_lut`].
pub fn read_joint_lut(text: &str, label: &str) -> Result<JointLut> {
    let err = |line: usize, message: String| Error::Parse { path: label.to_string(), line, message };
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let width = reader.headers().map_err(|e| err(1, e.to_string()))?.len();
    if width < 6 {
        return Err(err(1, "too few columns".into()));
    }
    let degree = width - 5;
    let (mut starts, mut taus, mut coeffs) = (Vec::new(), Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let num =
            |i: usize| -> Result<f64> { rec[i].trim().parse::<f64>().map_err(|_| err(line, format!("column {}: '{}'", i + 1, &rec[i]))) };
        let joint: usize = rec[0].trim().parse().map_err(|_| err(line, "bad joint index".into()))?;
        let seg: usize = rec[1].trim().parse().map_err(|_| err(line, "bad segment index".into()))?;
        if joint != coeffs.len() / (degree + 1) % 4 + 1 || seg != starts.len().saturating_sub(usize::from(joint != 1)) {
            return Err(err(line, format!("rows out of order at joint {joint}, segment {seg}")));
        }
        if joint == 1 {
            starts.push(num(2)?);
            taus.push(num(3)?);
        }
        for c in 0..=degree {
            coeffs.push(num(4 + c)?);
        }
    }
    JointLut::from_parts(degree, starts, taus, coeffs)
}

fn write_plotdata(plan: &MotionPlan, dir: &Path, ideal: &crate::engine::SampleStream, actual: &crate::engine::SampleStream) -> Result<()> {
    use crate::engine::metrics_difference as diff;
    // feed, acceleration and jerk, ideal against actual
    let mut out = String::from(
        "# tangential signals; mm/s, mm/s^2, mm/s^3\nt_s,feed_ideal,feed_actual,accel_ideal,accel_actual,jerk_ideal,jerk_actual\n",
    );
    let (fi, fa) = (diff(&ideal.channels[0], ideal.dt), diff(&actual.channels[0], actual.dt));
    let (ai, aa) = (diff(&fi, ideal.dt), diff(&fa, actual.dt));
    let (ji, ja) = (diff(&ai, ideal.dt), diff(&aa, actual.dt));
    for i in 0..fi.len() {
        let _ = writeln!(out, "{},{},{},{},{},{},{}", i as f64 * ideal.dt, fi[i], fa[i], ai[i], aa[i], ji[i], ja[i]);
    }
    write(&dir.join("feed.csv"), &out)?;

    let mut out = String::from("# orientation path against its parameter\nw,q0,q1,q2,q3\n");
    for i in 0..=500 {
        let w = i as f64 / 500.0;
        let q = plan.chain.orientation.eval(w)?;
        let _ = writeln!(out, "{},{},{},{},{}", w, q.w, q.v.x, q.v.y, q.v.z);
    }
    write(&dir.join("quaternion.csv"), &out)?;

    let total = plan.chain.total_length();
    let mut u_out = String::from("# curve parameter against arc length (mm)\ns_mm,u_modifier,u_exact\n");
    let mut w_out = String::from("# orientation parameter against arc length (mm)\ns_mm,w\n");
    for i in 0..=1000 {
        let s = total * i as f64 / 1000.0;
        let exact = plan.chain.arc_table.param_at(&plan.chain.curve, s);
        let _ = writeln!(u_out, "{},{},{}", s, plan.chain.modifier.eval_unchecked(s, 0), exact);
        let _ = writeln!(w_out, "{},{}", s, plan.chain.sync.eval_unchecked(s, 0));
    }
    write(&dir.join("u_of_s.csv"), &u_out)?;
    write(&dir.join("w_of_s.csv"), &w_out)?;

    let mut out = String::from("# joint table at the offline samples; mm and s\nt_s,q1_mm,q2_mm,q3_mm,q4_mm,dq1,dq2,dq3,dq4\n");
    for smp in &plan.samples {
        let (d, dd) = plan.lut.eval(smp.t);
        let _ = writeln!(out, "{},{},{},{},{},{},{},{},{}", smp.t, d[0], d[1], d[2], d[3], dd[0][0], dd[0][1], dd[0][2], dd[0][3]);
    }
    write(&dir.join("joints.csv"), &out)
}

/// Interpolator comparison as CSV, one row per method.
pub fn write_compare_csv(rows: &[CompareRow], path: &Path) -> Result<()> {
    write(path, &compare_csv(rows))
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from(
        "method,segments,feed_max_dev_mm_s,feed_mean_dev_mm_s,accel_max_dev_mm_s2,accel_mean_dev_mm_s2,jerk_max_dev_mm_s3,jerk_mean_dev_mm_s3\n",
    );
    for r in rows {
        let seg = r.segments.map_or(String::new(), |s| s.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.method, seg, r.feed_max, r.feed_mean, r.accel_max, r.accel_mean, r.jerk_max, r.jerk_mean
        );
    }
    out
}
