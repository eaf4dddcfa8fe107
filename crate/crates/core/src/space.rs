//! Taylor-Hood P2/P1 degrees of freedom on a [`TriMesh`].
//!
//! Scalar P2 nodes are the mesh vertices followed by the edge midpoints.
//! Velocity unknowns are stored component-blocked: `comp * n_nodes + node`.
//! Pressure unknowns are the vertex values of a continuous P1 function.

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};

/// Affine map of one triangle plus the (constant) barycentric gradients.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub vertices: [Point; 3],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl CellGeometry {
    pub fn new(vertices: [Point; 3]) -> Self {
        let [p0, p1, p2] = vertices;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let mut grad_lambda = [[0.0; 2]; 3];
        for (k, g) in grad_lambda.iter_mut().enumerate() {
            let a = vertices[(k + 1) % 3];
            let b = vertices[(k + 2) % 3];
            *g = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        }
        Self {
            vertices,
            area: 0.5 * det,
            grad_lambda,
        }
    }

    pub fn point(&self, lambda: &[f64; 3]) -> Point {
        let mut p = [0.0; 2];
        for (l, v) in lambda.iter().zip(&self.vertices) {
            p[0] += l * v[0];
            p[1] += l * v[1];
        }
        p
    }

    /// Barycentric coordinates of `p` (not clamped).
    pub fn barycentric(&self, p: Point) -> [f64; 3] {
        let mut l = [0.0; 3];
        for (k, lk) in l.iter_mut().enumerate() {
            let v = self.vertices[(k + 1) % 3];
            let g = self.grad_lambda[k];
            *lk = g[0] * (p[0] - v[0]) + g[1] * (p[1] - v[1]);
        }
        l
    }
}

/// Values of the six local P2 basis functions at barycentric point `l`.
/// Local nodes 0..3 are the vertices, node `3 + k` is the midpoint of local
/// edge `k` (vertices `k`, `k+1`).
#[inline]
pub fn p2_values(l: &[f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

#[inline]
pub fn p2_gradients(l: &[f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    for k in 0..3 {
        let s = 4.0 * l[k] - 1.0;
        out[k] = [s * g[k][0], s * g[k][1]];
        let (a, b) = (k, (k + 1) % 3);
        out[3 + k] = [
            4.0 * (l[b] * g[a][0] + l[a] * g[b][0]),
            4.0 * (l[b] * g[a][1] + l[a] * g[b][1]),
        ];
    }
    out
}

#[derive(Debug, Clone)]
pub struct MixedSpace {
    mesh: TriMesh,
    n_nodes: usize,
    node_coords: Vec<Point>,
    cell_nodes: Vec<[usize; 6]>,
    dirichlet_mask: Vec<bool>,
}

pub fn build_mixed_space(mesh: &TriMesh) -> Result<MixedSpace> {
    if mesh.num_cells() == 0 {
        return Err(Error::invalid("empty mesh"));
    }
    let nv = mesh.num_vertices();
    let ne = mesh.num_edges();
    let n_nodes = nv + ne;
    let mut node_coords = mesh.vertices().to_vec();
    for e in mesh.edges() {
        let a = mesh.vertices()[e.vertices[0]];
        let b = mesh.vertices()[e.vertices[1]];
        node_coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
    }
    let cell_nodes = mesh
        .cells()
        .iter()
        .zip(mesh.cell_edges())
        .map(|(v, e)| [v[0], v[1], v[2], nv + e[0], nv + e[1], nv + e[2]])
        .collect();
    let mut on_boundary = mesh.boundary_vertex_flags().to_vec();
    on_boundary.extend_from_slice(mesh.boundary_edge_flags());
    let mut dirichlet_mask = on_boundary.clone();
    dirichlet_mask.extend_from_slice(&on_boundary);
    Ok(MixedSpace {
        mesh: mesh.clone(),
        n_nodes,
        node_coords,
        cell_nodes,
        dirichlet_mask,
    })
}

impl MixedSpace {
    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    /// Number of scalar P2 nodes.
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_vel(&self) -> usize {
        2 * self.n_nodes
    }

    pub fn n_pres(&self) -> usize {
        self.mesh.num_vertices()
    }

    #[inline]
    pub fn velocity_dof(&self, node: usize, comp: usize) -> usize {
        comp * self.n_nodes + node
    }

    pub fn pressure_dof(&self, vertex: usize) -> usize {
        vertex
    }

    pub fn node_coords(&self) -> &[Point] {
        &self.node_coords
    }

    pub fn cell_nodes(&self, c: usize) -> &[usize; 6] {
        &self.cell_nodes[c]
    }

    pub fn cell_pressure_dofs(&self, c: usize) -> [usize; 3] {
        self.mesh.cells()[c]
    }

    pub fn geometry(&self, c: usize) -> CellGeometry {
        CellGeometry::new(self.mesh.cell_vertices(c))
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet_mask
    }

    /// Sets the constrained velocity unknowns to zero.
    pub fn apply_homogeneous_bc(&self, u: &mut [f64]) {
        for (ui, &m) in u.iter_mut().zip(&self.dirichlet_mask) {
            if m {
                *ui = 0.0;
            }
        }
    }

    /// Nodal P2 interpolant of a vector field.
    pub fn interpolate_velocity(&self, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let mut u = vec![0.0; self.n_vel()];
        for (node, &p) in self.node_coords.iter().enumerate() {
            let v = f(p);
            u[node] = v[0];
            u[self.n_nodes + node] = v[1];
        }
        u
    }

    /// Nodal P1 interpolant of a scalar field.
    pub fn interpolate_pressure(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.mesh.vertices().iter().map(|&p| f(p)).collect()
    }

    /// Local velocity coefficients of cell `c`: `[[x; 6], [y; 6]]`.
    #[inline]
    pub fn local_velocity(&self, u: &[f64], c: usize) -> [[f64; 6]; 2] {
        let nodes = &self.cell_nodes[c];
        let mut out = [[0.0; 6]; 2];
        for (k, &n) in nodes.iter().enumerate() {
            out[0][k] = u[n];
            out[1][k] = u[self.n_nodes + n];
        }
        out
    }

    /// Value and gradient `[[du/dx, du/dy], [dv/dx, dv/dy]]` of a velocity field
    /// at barycentric point `l` of cell `c`.
    pub fn eval_velocity_in_cell(
        &self,
        u: &[f64],
        c: usize,
        geo: &CellGeometry,
        l: &[f64; 3],
    ) -> ([f64; 2], [[f64; 2]; 2]) {
        let local = self.local_velocity(u, c);
        let phi = p2_values(l);
        let dphi = p2_gradients(l, &geo.grad_lambda);
        let mut val = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        for comp in 0..2 {
            for k in 0..6 {
                val[comp] += local[comp][k] * phi[k];
                grad[comp][0] += local[comp][k] * dphi[k][0];
                grad[comp][1] += local[comp][k] * dphi[k][1];
            }
        }
        (val, grad)
    }

    /// Velocity at an arbitrary point of the domain.
    pub fn eval_velocity(&self, u: &[f64], p: Point) -> Option<[f64; 2]> {
        let c = self.mesh.locate(p)?;
        let geo = self.geometry(c);
        let l = geo.barycentric(p);
        Some(self.eval_velocity_in_cell(u, c, &geo, &l).0)
    }

    pub fn eval_pressure(&self, p_coeffs: &[f64], p: Point) -> Option<f64> {
        let c = self.mesh.locate(p)?;
        let geo = self.geometry(c);
        let l = geo.barycentric(p);
        let dofs = self.cell_pressure_dofs(c);
        Some((0..3).map(|k| l[k] * p_coeffs[dofs[k]]).sum())
    }
}
