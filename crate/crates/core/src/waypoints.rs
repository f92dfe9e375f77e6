//! Ordered tool poses.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Tool positions (mm) and X-Y-Z intrinsic Euler angles (deg).
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointSet {
    pub positions: Vec<Vector3<f64>>,
    pub orientations_deg: Vec<[f64; 3]>,
}

impl WaypointSet {
    pub fn new(positions: Vec<Vector3<f64>>, orientations_deg: Vec<[f64; 3]>) -> Result<Self> {
        if positions.len() != orientations_deg.len() {
            return Err(Error::LengthMismatch { a: positions.len(), b: orientations_deg.len() });
        }
        let w = WaypointSet { positions, orientations_deg };
        w.check_duplicates()?;
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    fn check_duplicates(&self) -> Result<()> {
        for (k, w) in self.positions.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(Error::DuplicateConsecutiveWaypoint { index: k + 1 });
            }
        }
        Ok(())
    }
}
