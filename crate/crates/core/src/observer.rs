//! Coarse-mesh observation operators `I_H` and the nudging matrix.
//!
//! Observations are stored component-major: the first half holds the
//! x-component on every coarse entity, the second half the y-component.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::{CoarsePartition, Point};
use crate::mms::VelocityField;
use crate::quadrature::QuadratureRule;
use crate::space::{CellGeometry, MixedSpace};
use crate::sparse::{SparseMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserverKind {
    /// Piecewise-constant averages over coarse triangles.
    CellAverage,
    /// Continuous P1 interpolation at coarse vertices.
    CoarseLagrange,
}

impl FromStr for ObserverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cell_average" | "cell-average" => Ok(Self::CellAverage),
            "coarse_lagrange" | "coarse-lagrange" => Ok(Self::CoarseLagrange),
            other => Err(format!("unknown observer `{other}` (expected cell_average | coarse_lagrange)")),
        }
    }
}

impl fmt::Display for ObserverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CellAverage => "cell_average",
            Self::CoarseLagrange => "coarse_lagrange",
        })
    }
}

/// Linear map from fine velocity coefficients to coarse observations,
/// together with the coarse mass matrix that defines `(I_H u, I_H v)`.
#[derive(Debug, Clone)]
pub struct CoarseObserver {
    kind: ObserverKind,
    partition: CoarsePartition,
    /// `n_obs x n_vel`.
    p: SparseMatrix,
    /// `n_obs x n_obs`.
    m_h: SparseMatrix,
}

fn check_alignment(partition: &CoarsePartition, space: &MixedSpace) -> Result<()> {
    if !partition.is_aligned_with(space.mesh()) {
        return Err(Error::invalid(format!(
            "coarse partition built for n = {} but the space has n = {}",
            partition.fine_n(),
            space.mesh().n()
        )));
    }
    Ok(())
}

/// Cell-average observer. Row `K` of the scalar map is
/// `|K|^-1 sum_{tau in K} int_tau phi_j`; on P2 the vertex functions integrate
/// to zero and the edge functions to `|tau|/3`.
pub fn build_cell_average_observer(partition: &CoarsePartition, space: &MixedSpace) -> Result<CoarseObserver> {
    check_alignment(partition, space)?;
    let coarse = partition.coarse_mesh();
    let nk = coarse.num_cells();
    let nn = space.n_nodes();
    let mut b = TripletBuilder::with_capacity(2 * nk, 2 * nn, 6 * space.mesh().num_cells());
    for (f, &k) in partition.fine_to_coarse().iter().enumerate() {
        let w = space.mesh().signed_area(f) / 3.0 / coarse.signed_area(k);
        for &node in &space.cell_nodes(f)[3..] {
            for comp in 0..2 {
                b.add(comp * nk + k, comp * nn + node, w);
            }
        }
    }
    let mut mb = TripletBuilder::with_capacity(2 * nk, 2 * nk, 2 * nk);
    for comp in 0..2 {
        for k in 0..nk {
            mb.add(comp * nk + k, comp * nk + k, coarse.signed_area(k));
        }
    }
    Ok(CoarseObserver {
        kind: ObserverKind::CellAverage,
        partition: partition.clone(),
        p: b.build(),
        m_h: mb.build(),
    })
}

/// P1 interpolation on the coarse mesh: reads the fine vertex coefficients
/// at coarse vertices and measures with the coarse P1 mass matrix.
pub fn build_coarse_lagrange_observer(partition: &CoarsePartition, space: &MixedSpace) -> Result<CoarseObserver> {
    check_alignment(partition, space)?;
    let coarse = partition.coarse_mesh();
    let nv = coarse.num_vertices();
    let nn = space.n_nodes();
    let mut b = TripletBuilder::with_capacity(2 * nv, 2 * nn, 2 * nv);
    for (v, &fine_v) in partition.coarse_vertex_to_fine().iter().enumerate() {
        for comp in 0..2 {
            b.add(comp * nv + v, comp * nn + fine_v, 1.0);
        }
    }
    let mut mb = TripletBuilder::with_capacity(2 * nv, 2 * nv, 18 * coarse.num_cells());
    for (c, tri) in coarse.cells().iter().enumerate() {
        let area = coarse.signed_area(c);
        for (a, &va) in tri.iter().enumerate() {
            for (bb, &vb) in tri.iter().enumerate() {
                let m = if a == bb { area / 6.0 } else { area / 12.0 };
                for comp in 0..2 {
                    mb.add(comp * nv + va, comp * nv + vb, m);
                }
            }
        }
    }
    Ok(CoarseObserver {
        kind: ObserverKind::CoarseLagrange,
        partition: partition.clone(),
        p: b.build(),
        m_h: mb.build(),
    })
}

pub fn build_observer(kind: ObserverKind, partition: &CoarsePartition, space: &MixedSpace) -> Result<CoarseObserver> {
    match kind {
        ObserverKind::CellAverage => build_cell_average_observer(partition, space),
        ObserverKind::CoarseLagrange => build_coarse_lagrange_observer(partition, space),
    }
}

impl CoarseObserver {
    pub fn kind(&self) -> ObserverKind {
        self.kind
    }

    pub fn partition(&self) -> &CoarsePartition {
        &self.partition
    }

    pub fn n_obs(&self) -> usize {
        self.p.nrows()
    }

    /// Observation map `P`, `n_obs x n_vel`.
    pub fn matrix(&self) -> &SparseMatrix {
        &self.p
    }

    pub fn coarse_mass(&self) -> &SparseMatrix {
        &self.m_h
    }

    /// `P u` for fine velocity coefficients `u`.
    pub fn observe_discrete(&self, u: &[f64]) -> Vec<f64> {
        self.p.mul_vec(u)
    }

    /// Observations of a continuous field at time `t`.
    ///
    /// Cell averages are integrated with the degree-8 rule on each fine
    /// triangle, split further until sub-triangles have legs `<= 1/64`.
    pub fn observe_exact(&self, field: &dyn VelocityField, t: f64) -> Vec<f64> {
        let coarse = self.partition.coarse_mesh();
        match self.kind {
            ObserverKind::CoarseLagrange => {
                let nv = coarse.num_vertices();
                let mut out = vec![0.0; 2 * nv];
                for (v, p) in coarse.vertices().iter().enumerate() {
                    let u = field.velocity(p[0], p[1], t);
                    out[v] = u[0];
                    out[nv + v] = u[1];
                }
                out
            }
            ObserverKind::CellAverage => {
                let nk = coarse.num_cells();
                let fine_n = self.partition.fine_n();
                let split = 64usize.div_ceil(fine_n).max(1);
                let rule = QuadratureRule::degree8();
                let fine = build_fine_cells(fine_n);
                let mut out = vec![0.0; 2 * nk];
                for (f, &k) in self.partition.fine_to_coarse().iter().enumerate() {
                    let mut acc = [0.0; 2];
                    for sub in split_triangle(fine[f], split) {
                        let geo = CellGeometry::new(sub);
                        for (q, l) in rule.points.iter().enumerate() {
                            let p = geo.point(l);
                            let u = field.velocity(p[0], p[1], t);
                            let w = rule.weights[q] * 2.0 * geo.area;
                            acc[0] += w * u[0];
                            acc[1] += w * u[1];
                        }
                    }
                    out[k] += acc[0];
                    out[nk + k] += acc[1];
                }
                for k in 0..nk {
                    let a = coarse.signed_area(k);
                    out[k] /= a;
                    out[nk + k] /= a;
                }
                out
            }
        }
    }

    /// `beta P^T M_H obs`, the nudging contribution to the momentum right-hand side.
    pub fn nudging_rhs(&self, beta: f64, obs: &[f64]) -> Vec<f64> {
        let mut r = self.p.tr_mul_vec(&self.m_h.mul_vec(obs));
        r.iter_mut().for_each(|v| *v *= beta);
        r
    }

    /// Writes `index,component,value` rows.
    pub fn write_observations_csv(&self, path: impl AsRef<Path>, obs: &[f64]) -> Result<()> {
        let path = path.as_ref();
        let wrap = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(wrap)?);
        writeln!(out, "# observer={}", self.kind).map_err(wrap)?;
        writeln!(out, "index,component,value").map_err(wrap)?;
        let half = obs.len() / 2;
        for (i, v) in obs.iter().enumerate() {
            writeln!(out, "{},{},{:.17e}", i % half, i / half, v).map_err(wrap)?;
        }
        out.flush().map_err(wrap)
    }
}

fn build_fine_cells(n: usize) -> Vec<[Point; 3]> {
    let mesh = crate::mesh::build_uniform_mesh(n).expect("n >= 1");
    (0..mesh.num_cells()).map(|c| mesh.cell_vertices(c)).collect()
}

/// Uniform red refinement of a triangle into `k^2` pieces.
pub(crate) fn split_triangle(tri: [Point; 3], k: usize) -> Vec<[Point; 3]> {
    let [p0, p1, p2] = tri;
    let h = 1.0 / k as f64;
    let at = |a: f64, b: f64| {
        [
            p0[0] + a * (p1[0] - p0[0]) + b * (p2[0] - p0[0]),
            p0[1] + a * (p1[1] - p0[1]) + b * (p2[1] - p0[1]),
        ]
    };
    let mut subs = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..(k - i) {
            let (a, b) = (i as f64 * h, j as f64 * h);
            subs.push([at(a, b), at(a + h, b), at(a, b + h)]);
            if i + j + 1 < k {
                subs.push([at(a + h, b), at(a + h, b + h), at(a, b + h)]);
            }
        }
    }
    subs
}

/// Parameters of the nudging term `beta (I_H u, I_H v)`.
#[derive(Debug, Clone)]
pub struct NudgingMatrixSpec {
    pub beta: f64,
    pub observer: CoarseObserver,
}

impl NudgingMatrixSpec {
    pub fn new(beta: f64, observer: CoarseObserver) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::invalid(format!("nudging parameter must be >= 0, got {beta}")));
        }
        Ok(Self { beta, observer })
    }
}

/// `B = beta P^T M_H P`. The pattern does not depend on `beta`.
pub fn assemble_nudging_matrix(spec: &NudgingMatrixSpec) -> Result<SparseMatrix> {
    let p = spec.observer.matrix();
    let mp = spec.observer.coarse_mass().matmul(p)?;
    Ok(p.transpose().matmul(&mp)?.scaled(spec.beta))
}
