//! Structured triangular FEM mesh of the square sensing layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SensorGeometry, Side};

/// Triangulated square domain with electrode node sets on the boundary.
///
/// The mesh is a structured grid of `density × density` nodes; every grid
/// cell is split into two triangles along its lower-left/upper-right
/// diagonal. Node indices are row-major: `id = row * density + col` with the
/// column running along x and the row along y, both starting at the lower
/// left corner of the domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mesh {
    geometry: SensorGeometry,
    density: usize,
    nodes: Vec<(f64, f64)>,
    triangles: Vec<[usize; 3]>,
    element_areas: Vec<f64>,
    electrode_nodes: Vec<Vec<usize>>,
    electrode_weights: Vec<Vec<f64>>,
}

/// Build a structured mesh with `density` nodes per side.
///
/// Each electrode's node set contains the boundary nodes whose spacing-wide
/// boundary segment overlaps the electrode extent; the set is rejected as a
/// configuration error when it resolves to fewer than two nodes. Each node
/// carries a weight proportional to that overlap, so injected current is
/// spread at uniform density over the electrode length regardless of how the
/// grid lines fall.
pub fn build_mesh(geometry: &SensorGeometry, density: usize) -> Result<Mesh> {
    geometry.validate()?;
    if density < 2 {
        return Err(Error::Config(format!(
            "mesh density must be at least 2 nodes per side, got {density}"
        )));
    }
    let n = density;
    let h = geometry.side_length / (n - 1) as f64;
    let half = geometry.half_side();

    let coord = |k: usize| -> f64 {
        if k == n - 1 {
            half
        } else {
            -half + k as f64 * h
        }
    };

    let mut nodes = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            nodes.push((coord(col), coord(row)));
        }
    }

    let mut triangles = Vec::with_capacity(2 * (n - 1) * (n - 1));
    for row in 0..n - 1 {
        for col in 0..n - 1 {
            let n00 = row * n + col;
            let n10 = n00 + 1;
            let n01 = n00 + n;
            let n11 = n01 + 1;
            // Diagonal n00-n11; both triangles counterclockwise.
            triangles.push([n00, n10, n11]);
            triangles.push([n00, n11, n01]);
        }
    }

    let element_areas = triangles
        .iter()
        .map(|t| signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]))
        .collect::<Vec<_>>();
    debug_assert!(element_areas.iter().all(|&a| a > 0.0));

    let (electrode_nodes, electrode_weights) = electrode_node_sets(geometry, &nodes, h)?;

    Ok(Mesh {
        geometry: geometry.clone(),
        density,
        nodes,
        triangles,
        element_areas,
        electrode_nodes,
        electrode_weights,
    })
}

fn signed_area(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    0.5 * ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1))
}

/// Per-electrode node ids and matching current weights.
type ElectrodeSets = (Vec<Vec<usize>>, Vec<Vec<f64>>);

fn electrode_node_sets(
    geometry: &SensorGeometry,
    nodes: &[(f64, f64)],
    h: f64,
) -> Result<ElectrodeSets> {
    let half = geometry.half_side();
    let half_len = geometry.electrode_length / 2.0;
    let positions = geometry.electrode_positions();

    let mut sets = Vec::with_capacity(positions.len());
    let mut weights = Vec::with_capacity(positions.len());
    for (k, pos) in positions.iter().enumerate() {
        let mut set = Vec::new();
        let mut w = Vec::new();
        for (id, &(x, y)) in nodes.iter().enumerate() {
            let on_side = match pos.side {
                Side::Bottom => y == -half,
                Side::Right => x == half,
                Side::Top => y == half,
                Side::Left => x == -half,
            };
            if !on_side {
                continue;
            }
            // Along-side coordinate in the counterclockwise direction.
            let t = match pos.side {
                Side::Bottom => x,
                Side::Right => y,
                Side::Top => -x,
                Side::Left => -y,
            };
            // Overlap of the node's boundary cell [t - h/2, t + h/2] with the
            // electrode extent.
            let lo = (t - h / 2.0).max(pos.offset - half_len);
            let hi = (t + h / 2.0).min(pos.offset + half_len);
            if hi - lo > 1e-9 * h {
                set.push(id);
                w.push(hi - lo);
            }
        }
        if set.len() < 2 {
            return Err(Error::Config(format!(
                "mesh density too coarse to resolve electrode {k}: {} node(s) in its extent",
                set.len()
            )));
        }
        let sum: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= sum;
        }
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.sort_unstable_by_key(|&i| set[i]);
        sets.push(order.iter().map(|&i| set[i]).collect());
        weights.push(order.iter().map(|&i| w[i]).collect());
    }

    // Node sets must not share nodes between electrodes.
    let mut seen = std::collections::HashSet::new();
    for (k, set) in sets.iter().enumerate() {
        for &id in set {
            if !seen.insert(id) {
                return Err(Error::Config(format!(
                    "electrode {k} shares boundary node {id} with another electrode"
                )));
            }
        }
    }
    Ok((sets, weights))
}

impl Mesh {
    pub fn geometry(&self) -> &SensorGeometry {
        &self.geometry
    }

    /// Nodes per side of the structured grid.
    pub fn density(&self) -> usize {
        self.density
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn element_areas(&self) -> &[f64] {
        &self.element_areas
    }

    pub fn electrode_nodes(&self) -> &[Vec<usize>] {
        &self.electrode_nodes
    }

    /// Per-electrode current weights, parallel to [`Mesh::electrode_nodes`];
    /// each electrode's weights sum to one.
    pub fn electrode_weights(&self) -> &[Vec<f64>] {
        &self.electrode_weights
    }

    /// Centroid of element `e` (cm).
    pub fn element_centroid(&self, e: usize) -> (f64, f64) {
        let [a, b, c] = self.triangles[e];
        let (ax, ay) = self.nodes[a];
        let (bx, by) = self.nodes[b];
        let (cx, cy) = self.nodes[c];
        ((ax + bx + cx) / 3.0, (ay + by + cy) / 3.0)
    }

    /// Index of the node closest to the domain center; used as the potential
    /// reference when solving.
    pub fn center_node(&self) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (id, &(x, y)) in self.nodes.iter().enumerate() {
            let d = x * x + y * y;
            if d < best_d {
                best_d = d;
                best = id;
            }
        }
        best
    }

    /// True if the node lies on the square boundary.
    pub fn is_boundary_node(&self, id: usize) -> bool {
        let half = self.geometry.half_side();
        let (x, y) = self.nodes[id];
        x == -half || x == half || y == -half || y == half
    }

    /// Gradients of the three linear shape functions of element `e`,
    /// as `[(d/dx, d/dy); 3]` matching the triangle's vertex order.
    pub fn shape_gradients(&self, e: usize) -> [(f64, f64); 3] {
        let [a, b, c] = self.triangles[e];
        let (ax, ay) = self.nodes[a];
        let (bx, by) = self.nodes[b];
        let (cx, cy) = self.nodes[c];
        let inv2a = 1.0 / (2.0 * self.element_areas[e]);
        [
            ((by - cy) * inv2a, (cx - bx) * inv2a),
            ((cy - ay) * inv2a, (ax - cx) * inv2a),
            ((ay - by) * inv2a, (bx - ax) * inv2a),
        ]
    }
}
