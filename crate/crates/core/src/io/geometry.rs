use std::path::Path;

use log::warn;

use super::{io_error, line_of_offset};
use crate::error::{Error, Result};
use crate::kinematics::RobotGeometry;

pub fn load_geometry(path: &Path) -> Result<RobotGeometry> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_geometry(&text, &path.display().to_string())
}

/// Parses and validates a geometry file; a stored home configuration is
/// checked against the closed-form inverse kinematics.
pub fn parse_geometry(text: &str, label: &str) -> Result<RobotGeometry> {
    let g: RobotGeometry = toml::from_str(text).map_err(|e| Error::Parse {
        path: label.to_string(),
        line: e.span().map_or(0, |s| line_of_offset(text, s.start)),
        message: e.message().to_string(),
    })?;
    g.validate()?;
    if let Some(h) = &g.home {
        let d = g.inverse_position(&g.home_pose())?;
        let err = (0..4).map(|i| (d[i] - h.d[i]).abs()).fold(0.0, f64::max);
        if err > 1e-9 {
            warn!("{label}: stored home displacements differ from inverse kinematics by {err:e} mm");
        }
    }
    Ok(g)
}

pub fn geometry_to_toml(g: &RobotGeometry) -> String {
    toml::to_string(g).expect("geometry serializes")
}
