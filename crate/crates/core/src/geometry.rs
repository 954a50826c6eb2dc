//! Sensor geometry and the two-terminal measurement schedule.
//!
//! The sensing layer is a square sheet with electrodes distributed evenly
//! along its boundary, the same number per side. A frame measures every
//! unordered electrode pair once, injecting and measuring on the same pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical layout of the square sensing layer.
///
/// Lengths are in centimeters, conductivity in S/m. The coordinate origin is
/// the sensor center, so the sheet covers `[-side_length/2, side_length/2]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorGeometry {
    /// Side length of the square sheet (cm).
    pub side_length: f64,
    /// Total number of boundary electrodes; must be a positive multiple of 4.
    pub electrode_count: usize,
    /// Length of each electrode along the boundary (cm).
    pub electrode_length: f64,
    /// Center-to-center spacing of adjacent electrodes on one side (cm).
    pub electrode_pitch: f64,
    /// Background conductivity of the undisturbed sheet (S/m).
    pub baseline_conductivity: f64,
}

impl Default for SensorGeometry {
    fn default() -> Self {
        Self {
            side_length: 10.0,
            electrode_count: 16,
            electrode_length: 0.5,
            electrode_pitch: 2.5,
            baseline_conductivity: 1.0,
        }
    }
}

/// Which side of the square an electrode sits on, in counterclockwise order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

/// Position of one electrode on the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectrodePosition {
    pub side: Side,
    /// Signed offset of the electrode center along the side's counterclockwise
    /// direction, measured from the side midpoint (cm).
    pub offset: f64,
    /// Center coordinates (cm).
    pub center: (f64, f64),
}

impl SensorGeometry {
    /// Validate the geometric invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.side_length > 0.0) {
            return Err(Error::Config("side_length must be positive".into()));
        }
        if self.electrode_count == 0 || !self.electrode_count.is_multiple_of(4) {
            return Err(Error::Config(format!(
                "electrode_count must be a positive multiple of 4, got {}",
                self.electrode_count
            )));
        }
        if !(self.electrode_length > 0.0) || !(self.electrode_pitch > 0.0) {
            return Err(Error::Config(
                "electrode_length and electrode_pitch must be positive".into(),
            ));
        }
        if self.electrode_length >= self.electrode_pitch {
            return Err(Error::Config(format!(
                "electrode_length ({}) must be smaller than electrode_pitch ({})",
                self.electrode_length, self.electrode_pitch
            )));
        }
        let perimeter = 4.0 * self.side_length;
        if self.electrode_count as f64 * self.electrode_pitch > perimeter + 1e-12 {
            return Err(Error::Config(format!(
                "{} electrodes at pitch {} exceed the perimeter {}",
                self.electrode_count, self.electrode_pitch, perimeter
            )));
        }
        if !(self.baseline_conductivity > 0.0) {
            return Err(Error::Config(
                "baseline_conductivity must be positive".into(),
            ));
        }
        // Electrodes must fit on their side without reaching the corners.
        let per_side = self.electrode_count / 4;
        let max_offset = (per_side as f64 / 2.0 - 0.5) * self.electrode_pitch;
        if max_offset + self.electrode_length / 2.0 >= self.side_length / 2.0 {
            return Err(Error::Config(
                "electrode layout reaches the square corners".into(),
            ));
        }
        Ok(())
    }

    /// Electrodes per side.
    pub fn electrodes_per_side(&self) -> usize {
        self.electrode_count / 4
    }

    /// Half of the side length (cm); the domain is `[-h, h]²`.
    pub fn half_side(&self) -> f64 {
        self.side_length / 2.0
    }

    /// Electrode center positions, ordered counterclockwise starting on the
    /// bottom side. Within a side the electrodes are centered on the side
    /// midpoint at `electrode_pitch` spacing.
    pub fn electrode_positions(&self) -> Vec<ElectrodePosition> {
        let m = self.electrodes_per_side();
        let h = self.half_side();
        let mut out = Vec::with_capacity(self.electrode_count);
        for side_idx in 0..4 {
            let side = match side_idx {
                0 => Side::Bottom,
                1 => Side::Right,
                2 => Side::Top,
                _ => Side::Left,
            };
            for slot in 0..m {
                let offset = (slot as f64 + 0.5 - m as f64 / 2.0) * self.electrode_pitch;
                // The offset runs along the counterclockwise perimeter
                // direction of each side.
                let center = match side {
                    Side::Bottom => (offset, -h),
                    Side::Right => (h, offset),
                    Side::Top => (-offset, h),
                    Side::Left => (-h, -offset),
                };
                out.push(ElectrodePosition {
                    side,
                    offset,
                    center,
                });
            }
        }
        out
    }
}

/// Ordered list of all unordered electrode pairs `(i, j)` with `i < j`.
///
/// For `n` electrodes the schedule holds `n·(n-1)/2` entries in lexicographic
/// order; the default 16-electrode layout yields 120 measurements per frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSchedule {
    electrode_count: usize,
    pairs: Vec<(usize, usize)>,
}

/// Build the full pair schedule for `n` electrodes.
pub fn pair_schedule(n: usize) -> Result<PairSchedule> {
    if n < 2 {
        return Err(Error::Config(format!(
            "need at least 2 electrodes for a pair schedule, got {n}"
        )));
    }
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    Ok(PairSchedule {
        electrode_count: n,
        pairs,
    })
}

impl PairSchedule {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn electrode_count(&self) -> usize {
        self.electrode_count
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Schedule index of the unordered pair `{i, j}`, if present.
    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        if i == j || i >= self.electrode_count || j >= self.electrode_count {
            return None;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        // Lexicographic layout: pairs for first index a start at
        // a*n - a*(a+1)/2 entries in.
        let n = self.electrode_count;
        let base = a * n - a * (a + 1) / 2;
        Some(base + (b - a - 1))
    }
}
