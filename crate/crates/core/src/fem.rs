//! Quasi-static forward solver for the sensing layer.
//!
//! Solves `∇·(σ∇u) = 0` on the meshed square with linear triangular elements
//! and a gap electrode model: unit current enters spread uniformly over the
//! injecting electrode's boundary nodes and leaves through the extracting
//! electrode's nodes. Each frame measures the voltage between the injecting
//! pair itself, one value per schedule entry.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PairSchedule;
use crate::mesh::Mesh;

/// Per-element conductivity values (S/m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductivityField {
    values: Vec<f64>,
}

impl ConductivityField {
    /// Wrap per-element values; every value must be positive and the length
    /// must match the mesh's element count.
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.element_count() {
            return Err(Error::Config(format!(
                "field has {} values but the mesh has {} elements",
                values.len(),
                mesh.element_count()
            )));
        }
        if !values.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::Config(
                "conductivity values must be finite and positive".into(),
            ));
        }
        Ok(Self { values })
    }

    /// Uniform field at the given conductivity.
    pub fn homogeneous(mesh: &Mesh, sigma: f64) -> Result<Self> {
        Self::new(mesh, vec![sigma; mesh.element_count()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// A copy scaled by `k > 0`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Config("scale factor must be positive".into()));
        }
        Ok(Self {
            values: self.values.iter().map(|v| v * k).collect(),
        })
    }

    /// A copy with element `e` multiplied by `k`.
    pub fn with_scaled_element(&self, e: usize, k: f64) -> Self {
        let mut values = self.values.clone();
        values[e] *= k;
        Self { values }
    }

    /// A copy with `delta` added to element `e`.
    pub fn with_perturbed_element(&self, e: usize, delta: f64) -> Self {
        let mut values = self.values.clone();
        values[e] += delta;
        Self { values }
    }
}

/// One acquisition frame: a voltage per schedule pair (V).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageFrame {
    values: Vec<f64>,
    schedule: PairSchedule,
}

impl VoltageFrame {
    pub fn new(values: Vec<f64>, schedule: PairSchedule) -> Result<Self> {
        if values.len() != schedule.len() {
            return Err(Error::Config(format!(
                "frame has {} values for a schedule of {} pairs",
                values.len(),
                schedule.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("frame values must be finite".into()));
        }
        Ok(Self { values, schedule })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn schedule(&self) -> &PairSchedule {
        &self.schedule
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Voltage for the unordered pair `{i, j}`.
    pub fn value_for_pair(&self, i: usize, j: usize) -> Option<f64> {
        self.schedule.index_of(i, j).map(|k| self.values[k])
    }

    /// Root-mean-square of the frame values.
    pub fn rms(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }
}

/// Difference `contact - baseline`, the reconstruction input.
pub fn frame_delta(contact: &VoltageFrame, baseline: &VoltageFrame) -> Result<Vec<f64>> {
    if contact.schedule() != baseline.schedule() {
        return Err(Error::Config(
            "frames measured under different schedules cannot be differenced".into(),
        ));
    }
    Ok(contact
        .values()
        .iter()
        .zip(baseline.values())
        .map(|(c, b)| c - b)
        .collect())
}

/// Nodal potentials for every electrode's unit injection pattern, relative to
/// electrode 0's pattern. The solution for pair `(i, j)` is the difference of
/// columns `i` and `j`.
pub struct FieldSolution {
    /// One full-length nodal vector per electrode; column 0 is zero.
    potentials: Vec<DVector<f64>>,
}

impl FieldSolution {
    /// Nodal potential field for unit current injected at electrode `i` and
    /// extracted at electrode `j`.
    pub fn pair_potential(&self, i: usize, j: usize) -> DVector<f64> {
        &self.potentials[i] - &self.potentials[j]
    }

    /// Potential of electrode `k` under the nodal field `u`: the
    /// current-weighted mean over its nodes.
    pub fn electrode_mean(&self, mesh: &Mesh, k: usize, u: &DVector<f64>) -> f64 {
        mesh.electrode_nodes()[k]
            .iter()
            .zip(&mesh.electrode_weights()[k])
            .map(|(&n, &w)| w * u[n])
            .sum()
    }

    pub fn electrode_count(&self) -> usize {
        self.potentials.len()
    }
}

/// Assemble the global stiffness matrix for the field (dense; used by tests
/// and small oracles).
#[cfg(test)]
fn assemble_stiffness(mesh: &Mesh, field: &ConductivityField) -> nalgebra::DMatrix<f64> {
    use nalgebra::DMatrix;
    let n = mesh.node_count();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for (e, tri) in mesh.triangles().iter().enumerate() {
        let sigma = field.values()[e];
        let area = mesh.element_areas()[e];
        let grads = mesh.shape_gradients(e);
        for a in 0..3 {
            for b in 0..3 {
                let dot = grads[a].0 * grads[b].0 + grads[a].1 * grads[b].1;
                k[(tri[a], tri[b])] += sigma * area * dot;
            }
        }
    }
    k
}

/// Symmetric banded matrix in lower-band storage: `data[d * n + i]` holds
/// entry `(i + d, i)` for diagonals `d = 0..=bandwidth`.
struct BandMatrix {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            data: vec![0.0; (bandwidth + 1) * n],
        }
    }

    #[inline]
    fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row >= col && row - col <= self.bandwidth);
        self.data[(row - col) * self.n + col] += value;
    }

    #[inline]
    fn get(&self, row: usize, col: usize) -> f64 {
        self.data[(row - col) * self.n + col]
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[(row - col) * self.n + col] = value;
    }

    /// In-place banded Cholesky; afterwards the storage holds `L` with
    /// `A = L·Lᵀ`. Fails if the matrix is not positive definite.
    fn cholesky_in_place(&mut self) -> Result<()> {
        let n = self.n;
        let bw = self.bandwidth;
        for j in 0..n {
            let k0 = j.saturating_sub(bw);
            let mut d = self.get(j, j);
            for k in k0..j {
                let l = self.get(j, k);
                d -= l * l;
            }
            if !(d > 0.0) {
                return Err(Error::Solver(
                    "stiffness matrix is not positive definite (disconnected mesh?)".into(),
                ));
            }
            let diag = d.sqrt();
            self.set(j, j, diag);
            let imax = (j + bw).min(n - 1);
            for i in (j + 1)..=imax {
                let mut s = self.get(i, j);
                let k0 = i.saturating_sub(bw);
                for k in k0..j {
                    s -= self.get(i, k) * self.get(j, k);
                }
                self.set(i, j, s / diag);
            }
        }
        Ok(())
    }

    /// Solve `L·Lᵀ x = b` after factorization.
    fn solve_factored(&self, b: &mut [f64]) {
        let n = self.n;
        let bw = self.bandwidth;
        // Forward: L y = b.
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            let k0 = i.saturating_sub(bw);
            let mut s = b[i];
            for k in k0..i {
                s -= self.get(i, k) * b[k];
            }
            b[i] = s / self.get(i, i);
        }
        // Backward: Lᵀ x = y.
        #[allow(clippy::needless_range_loop)]
        for i in (0..n).rev() {
            let imax = (i + bw).min(n - 1);
            let mut s = b[i];
            for k in (i + 1)..=imax {
                s -= self.get(k, i) * b[k];
            }
            b[i] = s / self.get(i, i);
        }
    }
}

/// Factorized system for one conductivity field; reusable across injection
/// patterns and frames.
pub struct StiffnessSystem {
    band: BandMatrix,
    ground: usize,
    node_count: usize,
}

impl StiffnessSystem {
    /// Assemble and factorize, grounding the node nearest the domain center.
    ///
    /// The structured mesh keeps the stiffness matrix banded, so the
    /// factorization costs O(nodes · density²).
    pub fn build(mesh: &Mesh, field: &ConductivityField) -> Result<Self> {
        if field.values().len() != mesh.element_count() {
            return Err(Error::Config(
                "conductivity field does not match the mesh".into(),
            ));
        }
        let n = mesh.node_count();
        let ground = mesh.center_node();
        let reduced = |i: usize| if i > ground { i - 1 } else { i };

        let mut bandwidth = 0usize;
        for tri in mesh.triangles() {
            for a in 0..3 {
                for b in 0..3 {
                    if tri[a] != ground && tri[b] != ground {
                        let (ra, rb) = (reduced(tri[a]), reduced(tri[b]));
                        bandwidth = bandwidth.max(ra.abs_diff(rb));
                    }
                }
            }
        }

        let mut band = BandMatrix::zeros(n - 1, bandwidth);
        for (e, tri) in mesh.triangles().iter().enumerate() {
            let sigma = field.values()[e];
            let area = mesh.element_areas()[e];
            let grads = mesh.shape_gradients(e);
            for a in 0..3 {
                if tri[a] == ground {
                    continue;
                }
                for b in 0..3 {
                    if tri[b] == ground {
                        continue;
                    }
                    let (ra, rb) = (reduced(tri[a]), reduced(tri[b]));
                    if ra >= rb {
                        let dot = grads[a].0 * grads[b].0 + grads[a].1 * grads[b].1;
                        band.add(ra, rb, sigma * area * dot);
                    }
                }
            }
        }
        band.cholesky_in_place()?;
        Ok(Self {
            band,
            ground,
            node_count: n,
        })
    }

    /// Solve `K u = b` with the grounded node pinned to zero. `b` must sum to
    /// zero for the solution to be physical.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut reduced = vec![0.0; self.node_count - 1];
        for i in 0..self.node_count {
            match i.cmp(&self.ground) {
                std::cmp::Ordering::Less => reduced[i] = b[i],
                std::cmp::Ordering::Equal => {}
                std::cmp::Ordering::Greater => reduced[i - 1] = b[i],
            }
        }
        self.band.solve_factored(&mut reduced);
        let mut full = DVector::<f64>::zeros(self.node_count);
        for i in 0..self.node_count {
            match i.cmp(&self.ground) {
                std::cmp::Ordering::Less => full[i] = reduced[i],
                std::cmp::Ordering::Equal => {}
                std::cmp::Ordering::Greater => full[i] = reduced[i - 1],
            }
        }
        full
    }
}

/// Solve the nodal fields of every electrode injection pattern for one
/// conductivity field.
pub fn solve_field(mesh: &Mesh, field: &ConductivityField) -> Result<FieldSolution> {
    let system = StiffnessSystem::build(mesh, field)?;
    let n = mesh.node_count();
    let sets = mesh.electrode_nodes();

    // Current pattern of electrode k: unit current at uniform density over
    // the electrode length, split across nodes by boundary-cell overlap. All
    // patterns are solved against electrode 0's as the return path;
    // differences of the results give every pair.
    let pattern = |k: usize| {
        let mut c = DVector::<f64>::zeros(n);
        for (&node, &w) in sets[k].iter().zip(&mesh.electrode_weights()[k]) {
            c[node] = w;
        }
        c
    };

    let reference = pattern(0);
    let mut potentials = Vec::with_capacity(sets.len());
    potentials.push(DVector::<f64>::zeros(n));
    for k in 1..sets.len() {
        let b = pattern(k) - &reference;
        potentials.push(system.solve(&b));
    }
    Ok(FieldSolution { potentials })
}

/// Compute a full measurement frame.
///
/// For each schedule pair `(i, j)`: current `current` enters at electrode `i`
/// and leaves at `j`; the recorded value is the potential difference between
/// the two electrodes (mean over their node sets).
pub fn forward_solve(
    mesh: &Mesh,
    field: &ConductivityField,
    schedule: &PairSchedule,
    current: f64,
) -> Result<VoltageFrame> {
    if schedule.electrode_count() != mesh.electrode_nodes().len() {
        return Err(Error::Config(format!(
            "schedule is for {} electrodes but the mesh has {}",
            schedule.electrode_count(),
            mesh.electrode_nodes().len()
        )));
    }
    if !current.is_finite() || current == 0.0 {
        return Err(Error::Config("injection current must be finite and nonzero".into()));
    }
    let solution = solve_field(mesh, field)?;
    let mut values = Vec::with_capacity(schedule.len());
    for &(i, j) in schedule.pairs() {
        let u = solution.pair_potential(i, j);
        let v = solution.electrode_mean(mesh, i, &u) - solution.electrode_mean(mesh, j, &u);
        values.push(current * v);
    }
    VoltageFrame::new(values, schedule.clone())
}
