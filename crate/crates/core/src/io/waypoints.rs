use std::path::Path;

use nalgebra::Vector3;

use super::io_error;
use crate::error::{Error, Result};
use crate::waypoints::WaypointSet;

pub const WAYPOINT_HEADER: [&str; 6] = ["x_mm", "y_mm", "z_mm", "alpha_deg", "beta_deg", "gamma_deg"];

pub fn load_waypoints(path: &Path) -> Result<WaypointSet> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_waypoints(&text, &path.display().to_string())
}

/// Parses waypoint CSV text. `#` lines are comments; errors cite 1-based
/// line numbers of the text.
pub fn parse_waypoints(text: &str, label: &str) -> Result<WaypointSet> {
    let err = |line: usize, message: String| Error::Parse { path: label.to_string(), line, message };
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let header_line = reader.position().line().max(1) as usize;
    let found: Vec<&str> = header.iter().collect();
    if found != WAYPOINT_HEADER {
        return Err(err(header_line, format!("expected header '{}', found '{}'", WAYPOINT_HEADER.join(","), found.join(","))));
    }
    let mut positions = Vec::new();
    let mut orientations = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 6 {
            return Err(err(line, format!("expected 6 fields, found {}", rec.len())));
        }
        let mut v = [0.0; 6];
        for (i, field) in rec.iter().enumerate() {
            v[i] = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(line, format!("column {}: '{}' is not a finite number", WAYPOINT_HEADER[i], field)))?;
        }
        positions.push(Vector3::new(v[0], v[1], v[2]));
        orientations.push([v[3], v[4], v[5]]);
    }
    WaypointSet::new(positions, orientations)
}

/// CSV text with the standard header and shortest round-trip numbers.
pub fn waypoints_to_csv(wp: &WaypointSet, comment: &str) -> String {
    let mut out = String::new();
    for line in comment.lines() {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str(&WAYPOINT_HEADER.join(","));
    out.push('\n');
    for (p, o) in wp.positions.iter().zip(&wp.orientations_deg) {
        out.push_str(&format!("{},{},{},{},{},{}\n", p.x, p.y, p.z, o[0], o[1], o[2]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_are_skipped() {
        let text = "# fan\nx_mm,y_mm,z_mm,alpha_deg,beta_deg,gamma_deg\n# row\n0,0,0,0,0,0\n1,0,0,5,0,0\n";
        let wp = parse_waypoints(text, "t").unwrap();
        assert_eq!(wp.len(), 2);
        assert_eq!(wp.orientations_deg[1][0], 5.0);
    }

    #[test]
    fn bad_number_cites_line_and_column() {
        let mut text = String::from("x_mm,y_mm,z_mm,alpha_deg,beta_deg,gamma_deg\n");
        for i in 0..5 {
            text.push_str(&format!("{i},0,0,0,0,0\n"));
        }
        text.push_str("6,0,abc,0,0,0\n");
        match parse_waypoints(&text, "t") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 7);
                assert!(message.contains("z_mm"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_rows_rejected() {
        let text = "x_mm,y_mm,z_mm,alpha_deg,beta_deg,gamma_deg\n0,0,0,0,0,0\n0,0,0,0,0,0\n";
        assert!(matches!(parse_waypoints(text, "t"), Err(Error::DuplicateConsecutiveWaypoint { index: 1 })));
    }
}
