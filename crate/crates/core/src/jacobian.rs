//! Sensitivity (Jacobian) of the measurement frame with respect to per-pixel
//! conductivity changes.
//!
//! For the two-terminal scheme the measurement functional of a pair equals
//! its injection pattern, so the adjoint field coincides with the forward
//! field and each entry reduces to a weighted energy integral:
//!
//! `∂V_m/∂σ_p = -Σ_e overlap(e, p) · |∇u_m|²_e`
//!
//! where `u_m` is the forward potential of pair `m` at the reference field
//! and `overlap(e, p)` is the element-pixel overlap area. This is the exact
//! derivative of the discrete forward map under the pixel parametrization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::{solve_field, ConductivityField};
use crate::geometry::PairSchedule;
use crate::grid::PixelGrid;
use crate::mesh::Mesh;

/// Dense sensitivity matrix: one row per schedule pair, one column per pixel.
#[derive(Debug, Clone)]
pub struct SensitivityMatrix {
    matrix: DMatrix<f64>,
    electrode_count: usize,
    grid_width: usize,
    grid_height: usize,
    side_length: f64,
    mesh_density: usize,
    reference: Vec<f64>,
    cache_key: u64,
}

impl SensitivityMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn electrode_count(&self) -> usize {
        self.electrode_count
    }

    pub fn grid_width(&self) -> usize {
        self.grid_width
    }

    pub fn grid_height(&self) -> usize {
        self.grid_height
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn mesh_density(&self) -> usize {
        self.mesh_density
    }

    /// Reference conductivity field the linearization was computed at.
    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    /// Hash of geometry, mesh density, grid shape and reference field;
    /// identifies a cached matrix on disk.
    pub fn cache_key(&self) -> u64 {
        self.cache_key
    }

    /// Reassemble from raw parts (used by the binary cache reader).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        matrix: DMatrix<f64>,
        electrode_count: usize,
        grid_width: usize,
        grid_height: usize,
        side_length: f64,
        mesh_density: usize,
        reference: Vec<f64>,
        cache_key: u64,
    ) -> Self {
        Self {
            matrix,
            electrode_count,
            grid_width,
            grid_height,
            side_length,
            mesh_density,
            reference,
            cache_key,
        }
    }

    /// Largest singular value, by power iteration on `J·Jᵀ`.
    pub fn largest_singular_value(&self) -> f64 {
        let j = &self.matrix;
        let gram = j * j.transpose();
        let m = gram.nrows();
        let mut v = DVector::<f64>::from_element(m, 1.0 / (m as f64).sqrt());
        let mut lambda = 0.0;
        for _ in 0..200 {
            let w = &gram * &v;
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0;
            }
            let next = w / norm;
            let delta = (&next - &v).norm();
            v = next;
            lambda = norm;
            if delta < 1e-13 {
                break;
            }
        }
        lambda.sqrt()
    }
}

/// Deterministic FNV-1a hash identifying the Jacobian's inputs.
pub fn jacobian_cache_key(mesh: &Mesh, reference: &ConductivityField, grid: &PixelGrid) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x1000_0000_01b3);
        }
    };
    let geo = mesh.geometry();
    eat(&geo.side_length.to_le_bytes());
    eat(&(geo.electrode_count as u64).to_le_bytes());
    eat(&geo.electrode_length.to_le_bytes());
    eat(&geo.electrode_pitch.to_le_bytes());
    eat(&geo.baseline_conductivity.to_le_bytes());
    eat(&(mesh.density() as u64).to_le_bytes());
    eat(&(grid.width() as u64).to_le_bytes());
    eat(&(grid.height() as u64).to_le_bytes());
    for v in reference.values() {
        eat(&v.to_le_bytes());
    }
    hash
}

/// Compute the sensitivity matrix at a reference field.
pub fn compute_jacobian(
    mesh: &Mesh,
    reference: &ConductivityField,
    schedule: &PairSchedule,
    grid: &PixelGrid,
) -> Result<SensitivityMatrix> {
    if grid.element_count() != mesh.element_count() {
        return Err(Error::Config(
            "pixel grid was built against a different mesh".into(),
        ));
    }
    if schedule.electrode_count() != mesh.electrode_nodes().len() {
        return Err(Error::Config(
            "schedule does not match the mesh electrode count".into(),
        ));
    }
    let solution = solve_field(mesh, reference)?;

    let n_pairs = schedule.len();
    let n_pixels = grid.pixel_count();
    let mut matrix = DMatrix::<f64>::zeros(n_pairs, n_pixels);
    let mut energy = vec![0.0f64; mesh.element_count()];

    for (m, &(i, j)) in schedule.pairs().iter().enumerate() {
        let u = solution.pair_potential(i, j);
        for (e, tri) in mesh.triangles().iter().enumerate() {
            let grads = mesh.shape_gradients(e);
            let mut gx = 0.0;
            let mut gy = 0.0;
            for (v, g) in tri.iter().zip(grads.iter()) {
                gx += u[*v] * g.0;
                gy += u[*v] * g.1;
            }
            energy[e] = gx * gx + gy * gy;
        }
        for p in 0..n_pixels {
            let mut s = 0.0;
            for &(e, a) in grid.overlap(p) {
                s += a * energy[e];
            }
            matrix[(m, p)] = -s;
        }
    }

    Ok(SensitivityMatrix {
        matrix,
        electrode_count: schedule.electrode_count(),
        grid_width: grid.width(),
        grid_height: grid.height(),
        side_length: grid.side_length(),
        mesh_density: mesh.density(),
        reference: reference.values().to_vec(),
        cache_key: jacobian_cache_key(mesh, reference, grid),
    })
}

/// Apply a per-pixel conductivity perturbation to a field, spreading it over
/// the overlapped elements in proportion to covered area fraction.
///
/// This is the parametrization the Jacobian differentiates; finite
/// differences built on it probe the same map.
pub fn perturb_pixel(
    mesh: &Mesh,
    grid: &PixelGrid,
    field: &ConductivityField,
    pixel: usize,
    delta: f64,
) -> Result<ConductivityField> {
    let mut values = field.values().to_vec();
    for &(e, a) in grid.overlap(pixel) {
        values[e] += delta * a / mesh.element_areas()[e];
    }
    ConductivityField::new(mesh, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::forward_solve;
    use crate::geometry::{pair_schedule, SensorGeometry};
    use crate::mesh::build_mesh;

    fn coarse_setup() -> (Mesh, PairSchedule, PixelGrid, ConductivityField) {
        let geo = SensorGeometry::default();
        let mesh = build_mesh(&geo, 13).unwrap();
        let schedule = pair_schedule(16).unwrap();
        let grid = PixelGrid::build(&mesh, 12, 12).unwrap();
        let field = ConductivityField::homogeneous(&mesh, 1.0).unwrap();
        (mesh, schedule, grid, field)
    }

    /// Central finite difference of one (pair, pixel) sensitivity entry.
    fn fd_entry(
        mesh: &Mesh,
        schedule: &PairSchedule,
        grid: &PixelGrid,
        field: &ConductivityField,
        pair: usize,
        pixel: usize,
        delta: f64,
    ) -> f64 {
        let plus = perturb_pixel(mesh, grid, field, pixel, delta).unwrap();
        let minus = perturb_pixel(mesh, grid, field, pixel, -delta).unwrap();
        let f_plus = forward_solve(mesh, &plus, schedule, 1.0).unwrap();
        let f_minus = forward_solve(mesh, &minus, schedule, 1.0).unwrap();
        (f_plus.values()[pair] - f_minus.values()[pair]) / (2.0 * delta)
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (mesh, schedule, grid, field) = coarse_setup();
        let jac = compute_jacobian(&mesh, &field, &schedule, &grid).unwrap();
        // Deterministic spread of probe points.
        let probes = [
            (0usize, 5usize),
            (17, 40),
            (40, 77),
            (63, 100),
            (90, 130),
            (110, 60),
            (119, 143),
            (55, 0),
        ];
        for (pair, pixel) in probes {
            let fd = fd_entry(&mesh, &schedule, &grid, &field, pair, pixel, 1e-6);
            let j = jac.matrix()[(pair, pixel)];
            let rel = (j - fd).abs() / fd.abs().max(1e-30);
            assert!(
                rel < 1e-3,
                "pair {pair}, pixel {pixel}: jacobian {j} vs fd {fd} (rel {rel:.2e})"
            );
        }
    }

    #[test]
    fn all_entries_are_nonpositive() {
        // Measurement pattern equals injection pattern, so raising any
        // pixel's conductivity can only lower the measured voltage.
        let (mesh, schedule, grid, field) = coarse_setup();
        let jac = compute_jacobian(&mesh, &field, &schedule, &grid).unwrap();
        for v in jac.matrix().iter() {
            assert!(*v <= 0.0);
        }
    }

    #[test]
    fn sensitivity_sign_matches_finite_difference_probes() {
        let (mesh, schedule, grid, field) = coarse_setup();
        let pixels = [3usize, 20, 45, 60, 77, 90, 101, 120, 130, 140];
        for (k, &pixel) in pixels.iter().enumerate() {
            let pair = (k * 13) % schedule.len();
            let fd = fd_entry(&mesh, &schedule, &grid, &field, pair, pixel, 1e-6);
            assert!(
                fd <= 1e-12,
                "pixel {pixel}, pair {pair}: positive sensitivity {fd}"
            );
        }
    }

    #[test]
    fn homogeneous_jacobian_rotation_symmetry() {
        // Mesh cells and pixels align (32 cells per side, 32x32 pixels), so
        // a 90° rotation maps pixel energies exactly.
        let geo = SensorGeometry::default();
        let mesh = build_mesh(&geo, 33).unwrap();
        let schedule = pair_schedule(16).unwrap();
        let grid = PixelGrid::build(&mesh, 32, 32).unwrap();
        let field = ConductivityField::homogeneous(&mesh, 1.0).unwrap();
        let jac = compute_jacobian(&mesh, &field, &schedule, &grid).unwrap();

        let w = grid.width();
        let h = grid.height();
        let scale = jac.matrix().amax();
        for (m, &(i, j)) in schedule.pairs().iter().enumerate() {
            let ri = (i + 4) % 16;
            let rj = (j + 4) % 16;
            let mr = schedule.index_of(ri, rj).unwrap();
            for row in 0..h {
                for col in 0..w {
                    // 90° counterclockwise rotation of the domain maps pixel
                    // (row, col) to (h-1-col, row) in image coordinates.
                    let p = row * w + col;
                    let pr = (h - 1 - col) * w + row;
                    let a = jac.matrix()[(m, p)];
                    let b = jac.matrix()[(mr, pr)];
                    assert!(
                        (a - b).abs() <= 1e-10 * scale,
                        "pair ({i},{j}) pixel ({row},{col}): {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn grid_mesh_mismatch_is_rejected() {
        let (mesh, schedule, _, field) = coarse_setup();
        let other_mesh = build_mesh(&SensorGeometry::default(), 20).unwrap();
        let other_grid = PixelGrid::build(&other_mesh, 12, 12).unwrap();
        assert!(compute_jacobian(&mesh, &field, &schedule, &other_grid).is_err());
    }

    #[test]
    fn cache_key_tracks_inputs() {
        let (mesh, _, grid, field) = coarse_setup();
        let k1 = jacobian_cache_key(&mesh, &field, &grid);
        let k2 = jacobian_cache_key(&mesh, &field, &grid);
        assert_eq!(k1, k2);
        let other = field.with_perturbed_element(0, -0.1);
        assert_ne!(k1, jacobian_cache_key(&mesh, &other, &grid));
    }
}
