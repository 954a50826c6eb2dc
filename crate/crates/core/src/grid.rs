//! Raster grid over the sensing domain and images on it.
//!
//! The grid tiles the square exactly. Pixels are indexed row-major with row 0
//! at the top of the domain (largest y), matching image conventions, and each
//! pixel knows which mesh elements it overlaps and by how much area.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Rectangular pixel grid tied to a mesh by an area-overlap map.
#[derive(Debug, Clone)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    side_length: f64,
    element_count: usize,
    /// Per pixel: `(element, overlap area)` entries. Overlap areas for one
    /// pixel sum to the pixel area.
    overlap: Vec<Vec<(usize, f64)>>,
}

impl PixelGrid {
    /// Build the overlap map by clipping every mesh triangle against the
    /// pixel rectangles it can touch.
    pub fn build(mesh: &Mesh, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config("pixel grid dimensions must be positive".into()));
        }
        let side = mesh.geometry().side_length;
        let half = side / 2.0;
        let dx = side / width as f64;
        let dy = side / height as f64;

        let mut overlap: Vec<Vec<(usize, f64)>> = vec![Vec::new(); width * height];
        for e in 0..mesh.element_count() {
            let tri = mesh.triangles()[e];
            let pts: [(f64, f64); 3] = [
                mesh.nodes()[tri[0]],
                mesh.nodes()[tri[1]],
                mesh.nodes()[tri[2]],
            ];
            let min_x = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let max_x = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let min_y = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let max_y = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);

            let c0 = (((min_x + half) / dx).floor() as isize).clamp(0, width as isize - 1) as usize;
            let c1 = (((max_x + half) / dx).floor() as isize).clamp(0, width as isize - 1) as usize;
            // Row 0 covers the top band [half - dy, half].
            let r0 = (((half - max_y) / dy).floor() as isize).clamp(0, height as isize - 1) as usize;
            let r1 = (((half - min_y) / dy).floor() as isize).clamp(0, height as isize - 1) as usize;

            for r in r0..=r1 {
                for c in c0..=c1 {
                    let x_lo = -half + c as f64 * dx;
                    let x_hi = x_lo + dx;
                    let y_hi = half - r as f64 * dy;
                    let y_lo = y_hi - dy;
                    let area = clip_triangle_area(&pts, x_lo, x_hi, y_lo, y_hi);
                    if area > 1e-14 {
                        overlap[r * width + c].push((e, area));
                    }
                }
            }
        }

        Ok(Self {
            width,
            height,
            side_length: side,
            element_count: mesh.element_count(),
            overlap,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    /// Element count of the mesh this grid was built against.
    pub fn element_count(&self) -> usize {
        self.element_count
    }

    pub fn pixel_area(&self) -> f64 {
        (self.side_length / self.width as f64) * (self.side_length / self.height as f64)
    }

    /// Overlap entries `(element, area)` for pixel `p`.
    pub fn overlap(&self, p: usize) -> &[(usize, f64)] {
        &self.overlap[p]
    }

    /// Center of pixel `(row, col)` in cm.
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        let half = self.side_length / 2.0;
        let dx = self.side_length / self.width as f64;
        let dy = self.side_length / self.height as f64;
        (
            -half + (col as f64 + 0.5) * dx,
            half - (row as f64 + 0.5) * dy,
        )
    }

    /// Pixel `(row, col)` containing the point, if inside the domain.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let half = self.side_length / 2.0;
        if x < -half || x > half || y < -half || y > half {
            return None;
        }
        let dx = self.side_length / self.width as f64;
        let dy = self.side_length / self.height as f64;
        let col = (((x + half) / dx) as usize).min(self.width - 1);
        let row = (((half - y) / dy) as usize).min(self.height - 1);
        Some((row, col))
    }
}

/// Area of a triangle clipped to an axis-aligned rectangle
/// (Sutherland–Hodgman against the four half-planes).
fn clip_triangle_area(tri: &[(f64, f64); 3], x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> f64 {
    enum Plane {
        XMin(f64),
        XMax(f64),
        YMin(f64),
        YMax(f64),
    }
    let planes = [
        Plane::XMin(x_lo),
        Plane::XMax(x_hi),
        Plane::YMin(y_lo),
        Plane::YMax(y_hi),
    ];
    let mut poly: Vec<(f64, f64)> = tri.to_vec();
    for plane in planes {
        if poly.is_empty() {
            return 0.0;
        }
        let inside = |p: &(f64, f64)| match plane {
            Plane::XMin(v) => p.0 >= v,
            Plane::XMax(v) => p.0 <= v,
            Plane::YMin(v) => p.1 >= v,
            Plane::YMax(v) => p.1 <= v,
        };
        let intersect = |a: &(f64, f64), b: &(f64, f64)| match plane {
            Plane::XMin(v) | Plane::XMax(v) => {
                let t = (v - a.0) / (b.0 - a.0);
                (v, a.1 + t * (b.1 - a.1))
            }
            Plane::YMin(v) | Plane::YMax(v) => {
                let t = (v - a.1) / (b.1 - a.1);
                (a.0 + t * (b.0 - a.0), v)
            }
        };
        let mut next = Vec::with_capacity(poly.len() + 2);
        for i in 0..poly.len() {
            let cur = poly[i];
            let prev = poly[(i + poly.len() - 1) % poly.len()];
            match (inside(&prev), inside(&cur)) {
                (true, true) => next.push(cur),
                (true, false) => next.push(intersect(&prev, &cur)),
                (false, true) => {
                    next.push(intersect(&prev, &cur));
                    next.push(cur);
                }
                (false, false) => {}
            }
        }
        poly = next;
    }
    polygon_area(&poly)
}

fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % poly.len()];
        twice += x0 * y1 - x1 * y0;
    }
    twice.abs() / 2.0
}

/// Raster image of conductivity-change values (S/m, signed), row-major with
/// row 0 at the top of the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductivityImage {
    width: usize,
    height: usize,
    side_length: f64,
    values: Vec<f64>,
}

impl ConductivityImage {
    pub fn zeros(width: usize, height: usize, side_length: f64) -> Self {
        Self {
            width,
            height,
            side_length,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_values(
        width: usize,
        height: usize,
        side_length: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Config(format!(
                "image of {}x{} needs {} values, got {}",
                width,
                height,
                width * height,
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("image values must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            side_length,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.width + col] = value;
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > hi {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// `(row, col)` of the largest value; first occurrence wins.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best / self.width, best % self.width)
    }

    /// Center of pixel `(row, col)` in cm.
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        let half = self.side_length / 2.0;
        let dx = self.side_length / self.width as f64;
        let dy = self.side_length / self.height as f64;
        (
            -half + (col as f64 + 0.5) * dx,
            half - (row as f64 + 0.5) * dy,
        )
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SensorGeometry;
    use crate::mesh::build_mesh;

    #[test]
    fn overlap_areas_tile_pixels_exactly() {
        let mesh = build_mesh(&SensorGeometry::default(), 20).unwrap();
        let grid = PixelGrid::build(&mesh, 16, 16).unwrap();
        let pixel_area = grid.pixel_area();
        for p in 0..grid.pixel_count() {
            let sum: f64 = grid.overlap(p).iter().map(|&(_, a)| a).sum();
            assert!(
                (sum - pixel_area).abs() < 1e-9,
                "pixel {p}: overlap sum {sum} vs pixel area {pixel_area}"
            );
        }
    }

    #[test]
    fn overlap_areas_partition_elements() {
        let mesh = build_mesh(&SensorGeometry::default(), 20).unwrap();
        let grid = PixelGrid::build(&mesh, 16, 16).unwrap();
        let mut per_element = vec![0.0; mesh.element_count()];
        for p in 0..grid.pixel_count() {
            for &(e, a) in grid.overlap(p) {
                per_element[e] += a;
            }
        }
        for (e, &covered) in per_element.iter().enumerate() {
            assert!(
                (covered - mesh.element_areas()[e]).abs() < 1e-9,
                "element {e} area mismatch"
            );
        }
    }

    #[test]
    fn pixel_centers_and_locate_are_consistent() {
        let mesh = build_mesh(&SensorGeometry::default(), 20).unwrap();
        let grid = PixelGrid::build(&mesh, 64, 64).unwrap();
        for &(r, c) in &[(0usize, 0usize), (63, 63), (10, 42), (31, 32)] {
            let (x, y) = grid.pixel_center(r, c);
            assert_eq!(grid.locate(x, y), Some((r, c)));
        }
        // Row 0 is the top of the domain.
        let (_, y_top) = grid.pixel_center(0, 0);
        let (_, y_bot) = grid.pixel_center(63, 0);
        assert!(y_top > y_bot);
        assert_eq!(grid.locate(100.0, 0.0), None);
    }

    #[test]
    fn clipped_area_of_contained_triangle_is_triangle_area() {
        let tri = [(0.1, 0.1), (0.4, 0.1), (0.1, 0.5)];
        let area = clip_triangle_area(&tri, 0.0, 1.0, 0.0, 1.0);
        assert!((area - 0.06).abs() < 1e-12);
        // Fully outside.
        assert_eq!(clip_triangle_area(&tri, 2.0, 3.0, 0.0, 1.0), 0.0);
        // Partially covered by the half plane x >= 0.25.
        let part = clip_triangle_area(&tri, 0.25, 1.0, 0.0, 1.0);
        assert!(part > 0.0 && part < 0.06);
    }

    #[test]
    fn image_argmax_and_minmax() {
        let mut img = ConductivityImage::zeros(4, 4, 10.0);
        img.set(2, 1, 3.5);
        img.set(0, 3, -1.0);
        assert_eq!(img.argmax(), (2, 1));
        assert_eq!(img.min_max(), (-1.0, 3.5));
        assert!((img.sum() - 2.5).abs() < 1e-12);
    }
}
