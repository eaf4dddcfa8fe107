//! Assembly of the bilinear and trilinear forms of the nudged scheme.
//!
//! | matrix | form |
//! |--------|------|
//! | `M` | `(u, v)` |
//! | `A` | `(grad u, grad v)` |
//! | `D` | `(q, div v)`, pressure rows |
//! | `G` | `(div u, div v)` |
//! | `B` | `beta (I_H u, I_H v)` |
//! | `N(w)` | `((w.grad) u, v) + 1/2 ((div w) u, v)` |
//!
//! `nu` and `mu` are kept outside `A` and `G`; they are applied when the
//! velocity block is formed.

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use crate::mms::VelocityField;
use crate::observer::{assemble_nudging_matrix, NudgingMatrixSpec};
use crate::quadrature::QuadratureRule;
use crate::space::{p2_gradients, p2_values, MixedSpace};
use crate::sparse::{SparseMatrix, TripletBuilder};

/// Scalar P2 sparsity pattern with the CSR slot of every local element entry.
#[derive(Debug, Clone)]
pub struct P2Pattern {
    matrix: SparseMatrix,
    /// `cell_slots[c][6*i + j]` is the value index of entry `(node_i, node_j)`.
    cell_slots: Vec<[usize; 36]>,
}

impl P2Pattern {
    pub fn new(space: &MixedSpace) -> Self {
        let n = space.n_nodes();
        let ncells = space.mesh().num_cells();
        let mut b = TripletBuilder::with_capacity(n, n, 36 * ncells);
        for c in 0..ncells {
            let nodes = space.cell_nodes(c);
            for &i in nodes {
                for &j in nodes {
                    b.add(i, j, 0.0);
                }
            }
        }
        let matrix = b.build();
        let mut cell_slots = Vec::with_capacity(ncells);
        for c in 0..ncells {
            let nodes = space.cell_nodes(c);
            let mut slots = [0usize; 36];
            for (li, &i) in nodes.iter().enumerate() {
                let start = matrix.row_ptr()[i];
                let cols = &matrix.col_idx()[start..matrix.row_ptr()[i + 1]];
                for (lj, &j) in nodes.iter().enumerate() {
                    slots[6 * li + lj] = start + cols.binary_search(&j).expect("node pair in pattern");
                }
            }
            cell_slots.push(slots);
        }
        Self { matrix, cell_slots }
    }

    /// Scatters local 6x6 matrices into the scalar pattern.
    fn assemble(&self, local: impl Fn(usize) -> [[f64; 6]; 6]) -> SparseMatrix {
        let mut m = self.matrix.clone();
        let vals = m.values_mut();
        for (c, slots) in self.cell_slots.iter().enumerate() {
            let k = local(c);
            for i in 0..6 {
                for j in 0..6 {
                    vals[slots[6 * i + j]] += k[i][j];
                }
            }
        }
        m
    }

    /// Scalar matrix repeated on both velocity components.
    fn block_diagonal(&self, scalar: &SparseMatrix) -> SparseMatrix {
        let n = scalar.nrows();
        let nnz = scalar.nnz();
        let mut row_ptr = Vec::with_capacity(2 * n + 1);
        row_ptr.extend_from_slice(scalar.row_ptr());
        row_ptr.extend(scalar.row_ptr()[1..].iter().map(|&p| p + nnz));
        let mut col_idx = Vec::with_capacity(2 * nnz);
        col_idx.extend_from_slice(scalar.col_idx());
        col_idx.extend(scalar.col_idx().iter().map(|&j| j + n));
        let mut values = Vec::with_capacity(2 * nnz);
        values.extend_from_slice(scalar.values());
        values.extend_from_slice(scalar.values());
        SparseMatrix::from_raw(2 * n, 2 * n, row_ptr, col_idx, values)
    }
}

/// Value positions of a sub-pattern inside a larger pattern.
#[derive(Debug, Clone)]
pub(crate) struct SlotMap(Vec<usize>);

impl SlotMap {
    fn new(outer: &SparseMatrix, inner: &SparseMatrix) -> Self {
        let mut slots = Vec::with_capacity(inner.nnz());
        for i in 0..inner.nrows() {
            let start = outer.row_ptr()[i];
            let cols = &outer.col_idx()[start..outer.row_ptr()[i + 1]];
            for (j, _) in inner.row(i) {
                slots.push(start + cols.binary_search(&j).expect("sub-pattern entry"));
            }
        }
        SlotMap(slots)
    }

    fn add_scaled(&self, target: &mut [f64], s: f64, inner: &SparseMatrix) {
        for (&k, &v) in self.0.iter().zip(inner.values()) {
            target[k] += s * v;
        }
    }
}

/// All assembled operators of one discretization and parameter set.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub m: SparseMatrix,
    pub a: SparseMatrix,
    /// `n_pres x n_vel`, entries `(q_k, div phi_i)`.
    pub d: SparseMatrix,
    pub g: SparseMatrix,
    pub b: SparseMatrix,
    /// P1 pressure mass matrix.
    pub mp: SparseMatrix,
    /// `int q_k`, the zero-mean gauge row.
    pub pressure_mass: Vec<f64>,
    pub nu: f64,
    pub mu: f64,
    pub beta: f64,
    pub(crate) pattern: P2Pattern,
    pub(crate) velocity_pattern: SparseMatrix,
    pub(crate) slots: [SlotMap; 5],
}

/// Assembles `M, A, D, G` (degree-4 quadrature) and the nudging matrix `B`.
pub fn assemble_constant_operators(
    mesh: &TriMesh,
    space: &MixedSpace,
    nu: f64,
    mu: f64,
    nudge: &NudgingMatrixSpec,
) -> Result<OperatorSet> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::invalid(format!("viscosity must be positive, got {nu}")));
    }
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::invalid(format!("grad-div coefficient must be >= 0, got {mu}")));
    }
    if mesh.num_cells() != space.mesh().num_cells() || mesh.n() != space.mesh().n() {
        return Err(Error::invalid("mesh does not match the finite element space"));
    }
    let pattern = P2Pattern::new(space);
    let rule = QuadratureRule::degree4();
    let nn = space.n_nodes();
    let np = space.n_pres();

    // Basis values at the quadrature points are the same on every cell.
    let phi_q: Vec<[f64; 6]> = rule.points.iter().map(p2_values).collect();

    let mut mass_local = Vec::with_capacity(mesh.num_cells());
    let mut stiff_local = Vec::with_capacity(mesh.num_cells());
    let mut gb = TripletBuilder::with_capacity(2 * nn, 2 * nn, 4 * 36 * mesh.num_cells());
    let mut db = TripletBuilder::with_capacity(np, 2 * nn, 2 * 18 * mesh.num_cells());
    let mut mpb = TripletBuilder::with_capacity(np, np, 9 * mesh.num_cells());
    let mut pressure_mass = vec![0.0; np];

    for c in 0..mesh.num_cells() {
        let geo = space.geometry(c);
        let nodes = space.cell_nodes(c);
        let pdofs = space.cell_pressure_dofs(c);
        let mut ml = [[0.0; 6]; 6];
        let mut al = [[0.0; 6]; 6];
        // gl[a][b][i][j] = int d_a phi_j d_b phi_i (row component b, column component a)
        let mut gl = [[[[0.0; 6]; 6]; 2]; 2];
        let mut dl = [[[0.0; 6]; 2]; 3];
        let mut mpl = [[0.0; 3]; 3];
        for (q, l) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * 2.0 * geo.area;
            let phi = &phi_q[q];
            let dphi = p2_gradients(l, &geo.grad_lambda);
            for i in 0..6 {
                for j in 0..6 {
                    ml[i][j] += w * phi[i] * phi[j];
                    al[i][j] += w * (dphi[i][0] * dphi[j][0] + dphi[i][1] * dphi[j][1]);
                    for a in 0..2 {
                        for b in 0..2 {
                            gl[a][b][i][j] += w * dphi[j][a] * dphi[i][b];
                        }
                    }
                }
            }
            for k in 0..3 {
                for j in 0..6 {
                    for a in 0..2 {
                        dl[k][a][j] += w * l[k] * dphi[j][a];
                    }
                }
                for m in 0..3 {
                    mpl[k][m] += w * l[k] * l[m];
                }
            }
        }
        mass_local.push(ml);
        stiff_local.push(al);
        for a in 0..2 {
            for b in 0..2 {
                for i in 0..6 {
                    for j in 0..6 {
                        gb.add(b * nn + nodes[i], a * nn + nodes[j], gl[a][b][i][j]);
                    }
                }
            }
        }
        for k in 0..3 {
            for a in 0..2 {
                for j in 0..6 {
                    db.add(pdofs[k], a * nn + nodes[j], dl[k][a][j]);
                }
            }
            for m in 0..3 {
                mpb.add(pdofs[k], pdofs[m], mpl[k][m]);
            }
            pressure_mass[pdofs[k]] += geo.area / 3.0;
        }
    }

    let m = pattern.block_diagonal(&pattern.assemble(|c| mass_local[c]));
    let a = pattern.block_diagonal(&pattern.assemble(|c| stiff_local[c]));
    let g = gb.build();
    let d = db.build();
    let mp = mpb.build();
    let b = assemble_nudging_matrix(nudge)?;
    if b.nrows() != space.n_vel() {
        return Err(Error::invalid("nudging matrix does not match the velocity space"));
    }

    let velocity_pattern = SparseMatrix::linear_combination(&[(0.0, &m), (0.0, &a), (0.0, &g), (0.0, &b)])?;
    let slots = [
        SlotMap::new(&velocity_pattern, &m),
        SlotMap::new(&velocity_pattern, &a),
        SlotMap::new(&velocity_pattern, &g),
        SlotMap::new(&velocity_pattern, &b),
        // N(w) has the block-diagonal pattern of M.
        SlotMap::new(&velocity_pattern, &m),
    ];

    Ok(OperatorSet {
        m,
        a,
        d,
        g,
        b,
        mp,
        pressure_mass,
        nu,
        mu,
        beta: nudge.beta,
        pattern,
        velocity_pattern,
        slots,
    })
}

impl OperatorSet {
    /// `c0 M + nu A + mu G + B + N`, on a pattern that depends only on the mesh.
    pub fn velocity_block(&self, c0: f64, convection: Option<&SparseMatrix>) -> Result<SparseMatrix> {
        let mut k = self.velocity_pattern.clone();
        let vals = k.values_mut();
        self.slots[0].add_scaled(vals, c0, &self.m);
        self.slots[1].add_scaled(vals, self.nu, &self.a);
        self.slots[2].add_scaled(vals, self.mu, &self.g);
        self.slots[3].add_scaled(vals, 1.0, &self.b);
        if let Some(n) = convection {
            if !n.same_pattern(&self.m) {
                return Err(Error::invalid("convection matrix pattern does not match the velocity space"));
            }
            self.slots[4].add_scaled(vals, 1.0, n);
        }
        Ok(k)
    }

    pub fn n_vel(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_pres(&self) -> usize {
        self.mp.nrows()
    }

    /// Convection matrix on the cached element pattern.
    pub fn convection(&self, space: &MixedSpace, w: &[f64]) -> Result<SparseMatrix> {
        assemble_convection_with(&self.pattern, space, w)
    }

    /// `sqrt(u^T M u)`.
    pub fn mass_norm(&self, u: &[f64]) -> f64 {
        self.m.bilinear(u, u).max(0.0).sqrt()
    }
}

/// `N(w)[i][j] = b_h(w, phi_j, phi_i)` with degree-6 quadrature.
pub fn assemble_convection(space: &MixedSpace, w: &[f64]) -> Result<SparseMatrix> {
    assemble_convection_with(&P2Pattern::new(space), space, w)
}

fn assemble_convection_with(pattern: &P2Pattern, space: &MixedSpace, w: &[f64]) -> Result<SparseMatrix> {
    if w.len() != space.n_vel() {
        return Err(Error::invalid(format!(
            "convection field has {} entries, expected {}",
            w.len(),
            space.n_vel()
        )));
    }
    let rule = QuadratureRule::degree6();
    let phi_q: Vec<[f64; 6]> = rule.points.iter().map(p2_values).collect();
    let scalar = pattern.assemble(|c| {
        let geo = space.geometry(c);
        let wl = space.local_velocity(w, c);
        let mut k = [[0.0; 6]; 6];
        for (q, l) in rule.points.iter().enumerate() {
            let wq = rule.weights[q] * 2.0 * geo.area;
            let phi = &phi_q[q];
            let dphi = p2_gradients(l, &geo.grad_lambda);
            let mut wv = [0.0; 2];
            let mut div = 0.0;
            for n in 0..6 {
                wv[0] += wl[0][n] * phi[n];
                wv[1] += wl[1][n] * phi[n];
                div += wl[0][n] * dphi[n][0] + wl[1][n] * dphi[n][1];
            }
            for j in 0..6 {
                let adv = wv[0] * dphi[j][0] + wv[1] * dphi[j][1] + 0.5 * div * phi[j];
                for i in 0..6 {
                    k[i][j] += wq * adv * phi[i];
                }
            }
        }
        k
    });
    Ok(pattern.block_diagonal(&scalar))
}

/// Load vector `(f, phi_i)` with the degree-8 rule.
pub fn assemble_load(space: &MixedSpace, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let rule = QuadratureRule::degree8();
    let phi_q: Vec<[f64; 6]> = rule.points.iter().map(p2_values).collect();
    let nn = space.n_nodes();
    let mut out = vec![0.0; space.n_vel()];
    for c in 0..space.mesh().num_cells() {
        let geo = space.geometry(c);
        let nodes = space.cell_nodes(c);
        for (q, l) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * 2.0 * geo.area;
            let fv = f(geo.point(l));
            for (i, &node) in nodes.iter().enumerate() {
                out[node] += w * fv[0] * phi_q[q][i];
                out[nn + node] += w * fv[1] * phi_q[q][i];
            }
        }
    }
    out
}

/// `||u_h - u(., t)||_{L2}` evaluated with `rule` on every cell.
pub fn l2_error_against_analytic(
    space: &MixedSpace,
    coeffs: &[f64],
    field: &dyn VelocityField,
    t: f64,
    rule: &QuadratureRule,
) -> f64 {
    l2_error_and_norm(space, coeffs, field, t, rule).0
}

/// Relative error `||u_h - u|| / ||u||`.
pub fn relative_l2_error(
    space: &MixedSpace,
    coeffs: &[f64],
    field: &dyn VelocityField,
    t: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let (err, norm) = l2_error_and_norm(space, coeffs, field, t, rule);
    if norm == 0.0 {
        return Err(Error::DegenerateReference);
    }
    Ok(err / norm)
}

/// `(||u_h - u||, ||u||)`.
pub fn l2_error_and_norm(
    space: &MixedSpace,
    coeffs: &[f64],
    field: &dyn VelocityField,
    t: f64,
    rule: &QuadratureRule,
) -> (f64, f64) {
    assert_eq!(coeffs.len(), space.n_vel(), "coefficient vector length");
    let phi_q: Vec<[f64; 6]> = rule.points.iter().map(p2_values).collect();
    let mut err2 = 0.0;
    let mut norm2 = 0.0;
    for c in 0..space.mesh().num_cells() {
        let geo = space.geometry(c);
        let ul = space.local_velocity(coeffs, c);
        for (q, l) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * 2.0 * geo.area;
            let p = geo.point(l);
            let ex = field.velocity(p[0], p[1], t);
            for comp in 0..2 {
                let uh: f64 = (0..6).map(|k| ul[comp][k] * phi_q[q][k]).sum();
                let e = uh - ex[comp];
                err2 += w * (e * e);
                norm2 += w * (ex[comp] * ex[comp]);
            }
        }
    }
    (err2.sqrt(), norm2.sqrt())
}
