use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_error, line_of_key, line_of_offset};
use crate::engine::PlanConfig;
use crate::error::{Error, Result};
use crate::minjerk::KinematicLimits;

/// Settings of the interpolator comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    /// Commanded feed (mm/s).
    pub feed: f64,
    /// Interpolation period (s).
    pub period: f64,
    pub eps_mse: Vec<f64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig { feed: 220.0, period: 0.010, eps_mse: vec![1e-8, 1e-10, 1e-12] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    /// Geometry file, relative to the configuration file; the built-in
    /// machine when absent.
    #[serde(default)]
    pub geometry: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_limits")]
    pub limits: KinematicLimits,
    #[serde(default)]
    pub plan: PlanConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_limits() -> KinematicLimits {
    KinematicLimits { v_max: 20.0, a_max: 300.0, j_max: 5000.0, vd_max: 40.0, ad_max: 600.0, jd_max: 10000.0 }
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            geometry: None,
            output_dir: default_output(),
            limits: default_limits(),
            plan: PlanConfig::default(),
            compare: CompareConfig::default(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ProjectConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut cfg = parse_config(&text, &path.display().to_string())?;
    if let (Some(g), Some(dir)) = (&cfg.geometry, path.parent()) {
        if g.is_relative() {
            cfg.geometry = Some(dir.join(g));
        }
    }
    Ok(cfg)
}

/// Parses and validates a configuration; semantic errors name the field
/// and the line it was set on.
pub fn parse_config(text: &str, label: &str) -> Result<ProjectConfig> {
    let cfg: ProjectConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: label.to_string(),
        line: e.span().map_or(0, |s| line_of_offset(text, s.start)),
        message: e.message().to_string(),
    })?;
    let locate = |section: &str, field: &str, message: String| {
        let at = line_of_key(text, section, field).map_or(String::new(), |l| format!(" (line {l})"));
        let name = if section.is_empty() { field.to_string() } else { format!("{section}.{field}") };
        Error::Config { field: name, message: format!("{message}{at}") }
    };
    if let Err(e) = cfg.limits.validate() {
        if let Error::InfeasibleLimits { name, value } = e {
            return Err(locate("limits", &name, format!("must be positive, got {value}")));
        }
        return Err(e);
    }
    if let Err(Error::Config { field, message }) = cfg.plan.validate() {
        return Err(locate("plan", &field, message));
    }
    if !(cfg.compare.feed > 0.0) {
        return Err(locate("compare", "feed", "must be positive".into()));
    }
    if !(cfg.compare.period > 0.0) {
        return Err(locate("compare", "period", "must be positive".into()));
    }
    if cfg.compare.eps_mse.iter().any(|e| !(*e > 0.0)) {
        return Err(locate("compare", "eps_mse", "all tolerances must be positive".into()));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_config("", "t").unwrap(), ProjectConfig::default());
    }

    #[test]
    fn nonpositive_values_name_field_and_line() {
        let text = "output_dir = \"o\"\n[plan]\ndt_offline = 0.01\neps_mse = 0.0\n";
        match parse_config(text, "t") {
            Err(Error::Config { field, message }) => {
                assert_eq!(field, "plan.eps_mse");
                assert!(message.contains("line 4"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let text = "[limits]\nv_max = 20.0\na_max = -1.0\nj_max = 1.0\nvd_max = 1.0\nad_max = 1.0\njd_max = 1.0\n";
        match parse_config(text, "t") {
            Err(Error::Config { field, message }) => {
                assert_eq!(field, "limits.a_max");
                assert!(message.contains("line 3"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        match parse_config("[plan]\nbogus = 1\n", "t") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
