//! File formats: waypoint CSV, TOML configuration and geometry, plan export.

mod config;
mod export;
mod geometry;
mod waypoints;

pub use config::{load_config, parse_config, CompareConfig, ProjectConfig};
pub use export::{
    compare_csv, export_plan, import_joint_lut, read_joint_lut, validate_metrics_json, write_compare_csv, write_joint_lut, PlanMetrics,
};
pub use geometry::{geometry_to_toml, load_geometry, parse_geometry};
pub use waypoints::{load_waypoints, parse_waypoints, waypoints_to_csv, WAYPOINT_HEADER};

use std::path::Path;

use crate::error::Error;

pub(crate) fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

/// 1-based line of a byte offset.
pub(crate) fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// 1-based line where `key` is assigned inside `[section]` (top level when
/// `section` is empty).
pub(crate) fn line_of_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}
