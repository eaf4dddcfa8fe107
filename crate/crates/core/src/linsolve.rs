//! Saddle-point solves with a zero-mean pressure gauge.
//!
//! The assembled system is
//!
//! ```text
//! [  K   -D^T  0 ] [u]   [rhs_u]
//! [ -D    0    m ] [p] = [rhs_p]
//! [  0    m^T  0 ] [l]   [  0  ]
//! ```
//!
//! with `m_k = int q_k`. The direct path factors an equivalent system with
//! one pressure pinned (see `SaddleSolver::solve`) and hands faer the CSR
//! arrays, which are the CSC arrays of the transpose, solving with the
//! transposed factors.

use std::fmt;
use std::str::FromStr;

use dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, NumericLu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par};

use crate::assembly::OperatorSet;
use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, SparseMatrix};

#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub k_uu: SparseMatrix,
    /// `n_pres x n_vel`; the system uses `-D^T` and `-D`.
    pub d: SparseMatrix,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
    /// Zero-mean row `int q_k`. `None` leaves the pressure constant free.
    pub gauge: Option<Vec<f64>>,
}

impl SaddleSystem {
    fn n_vel(&self) -> usize {
        self.k_uu.nrows()
    }

    fn n_pres(&self) -> usize {
        self.d.nrows()
    }

    fn dim(&self) -> usize {
        self.n_vel() + self.n_pres() + usize::from(self.gauge.is_some())
    }

    fn validate(&self) -> Result<()> {
        let (nv, np) = (self.n_vel(), self.n_pres());
        let ok = self.k_uu.ncols() == nv
            && self.d.ncols() == nv
            && self.rhs_u.len() == nv
            && self.rhs_p.len() == np
            && self.gauge.as_ref().is_none_or(|g| g.len() == np);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("saddle system blocks have inconsistent dimensions"))
        }
    }

    /// Full matrix in CSR form, unknowns ordered `[u, p, l]`.
    fn assemble(&self) -> SparseMatrix {
        self.assemble_with(self.gauge.as_deref(), None)
    }

    /// `[u, p]` matrix without the multiplier, pressure row `k0` replaced by
    /// `scale * p_k0`.
    fn assemble_pinned(&self, k0: usize, scale: f64) -> SparseMatrix {
        self.assemble_with(None, Some((k0, scale)))
    }

    fn assemble_with(&self, gauge: Option<&[f64]>, pin: Option<(usize, f64)>) -> SparseMatrix {
        let (nv, np) = (self.n_vel(), self.n_pres());
        let n = nv + np + usize::from(gauge.is_some());
        let dt = self.d.transpose();
        let nnz = self.k_uu.nnz() + 2 * self.d.nnz() + 2 * np;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for i in 0..nv {
            for (j, v) in self.k_uu.row(i) {
                col_idx.push(j);
                values.push(v);
            }
            for (k, v) in dt.row(i) {
                col_idx.push(nv + k);
                values.push(-v);
            }
            row_ptr.push(col_idx.len());
        }
        for k in 0..np {
            match pin {
                Some((k0, scale)) if k0 == k => {
                    col_idx.push(nv + k);
                    values.push(scale);
                }
                _ => {
                    for (j, v) in self.d.row(k) {
                        col_idx.push(j);
                        values.push(-v);
                    }
                    if let Some(g) = gauge {
                        col_idx.push(nv + np);
                        values.push(g[k]);
                    }
                }
            }
            row_ptr.push(col_idx.len());
        }
        if let Some(g) = gauge {
            for (k, &v) in g.iter().enumerate() {
                col_idx.push(nv + k);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix::from_raw(n, n, row_ptr, col_idx, values)
    }

    fn rhs(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.dim());
        b.extend_from_slice(&self.rhs_u);
        b.extend_from_slice(&self.rhs_p);
        if self.gauge.is_some() {
            b.push(0.0);
        }
        b
    }

    /// True when constant pressures lie in the kernel of `D^T`, so that
    /// without a gauge the pressure is only defined up to a constant.
    fn has_constant_pressure_mode(&self) -> bool {
        let ones = vec![1.0; self.n_pres()];
        let dt1 = self.d.tr_mul_vec(&ones);
        let scale = self.d.frobenius_norm().max(f64::MIN_POSITIVE);
        norm2(&dt1) <= 1e-12 * scale
    }
}

/// `K_uu = c0 M + nu A + mu G + B + N(w)`, Dirichlet rows and columns
/// eliminated, with the zero-mean gauge attached.
pub fn build_system(
    ops: &OperatorSet,
    dirichlet: &[bool],
    c0: f64,
    convection: Option<&SparseMatrix>,
    mut rhs_u: Vec<f64>,
) -> Result<SaddleSystem> {
    let nv = ops.n_vel();
    if dirichlet.len() != nv || rhs_u.len() != nv {
        return Err(Error::invalid(format!(
            "system of size {nv} given a mask of length {} and a right-hand side of length {}",
            dirichlet.len(),
            rhs_u.len()
        )));
    }
    if let Some(n) = convection {
        if n.nrows() != nv || n.ncols() != nv {
            return Err(Error::invalid("convection matrix has the wrong dimensions"));
        }
    }
    let mut k_uu = ops.velocity_block(c0, convection)?;
    k_uu.eliminate_symmetric(dirichlet);
    let mut d = ops.d.clone();
    d.zero_columns(dirichlet);
    for (r, &fixed) in rhs_u.iter_mut().zip(dirichlet) {
        if fixed {
            *r = 0.0;
        }
    }
    Ok(SaddleSystem {
        k_uu,
        d,
        rhs_u,
        rhs_p: vec![0.0; ops.n_pres()],
        gauge: Some(ops.pressure_mass.clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    SparseDirect,
    Iterative,
}

impl FromStr for SolverMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sparse_direct" | "direct" => Ok(Self::SparseDirect),
            "iterative" | "gmres" => Ok(Self::Iterative),
            other => Err(format!("unknown solver `{other}` (expected sparse_direct | iterative)")),
        }
    }
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SparseDirect => "sparse_direct",
            Self::Iterative => "iterative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub method: SolverMethod,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Krylov subspace size between restarts.
    pub restart: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            method: SolverMethod::SparseDirect,
            rel_tol: 1e-10,
            max_iter: 2000,
            restart: 100,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid(format!("solver rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.max_iter == 0 || self.restart == 0 {
            return Err(Error::invalid("solver max_iter and restart must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// `||A x - b|| / ||b||` of the full system (0 for a zero right-hand side).
    pub residual: f64,
    /// Krylov iterations; 0 on the direct path.
    pub iterations: usize,
}

/// Sparse LU with the symbolic analysis kept while the pattern is unchanged.
struct DirectSolver {
    pattern: Option<(Vec<usize>, Vec<usize>)>,
    symbolic: Option<SymbolicLu<usize>>,
    numeric: NumericLu<usize, f64>,
    par: Par,
}

impl DirectSolver {
    fn new() -> Self {
        Self {
            pattern: None,
            symbolic: None,
            numeric: NumericLu::new(),
            par: Par::Seq,
        }
    }

    /// Factors `a^T` (CSR of `a` read as CSC).
    fn factor(&mut self, a: &SparseMatrix) -> Result<()> {
        let n = a.nrows();
        let same = self
            .pattern
            .as_ref()
            .is_some_and(|(rp, ci)| rp == a.row_ptr() && ci == a.col_idx());
        if !same {
            let sym = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
            let lu = factorize_symbolic_lu(sym, Default::default())
                .map_err(|e| Error::SingularSystem(format!("symbolic analysis failed: {e:?}")))?;
            self.symbolic = Some(lu);
            self.pattern = Some((a.row_ptr().to_vec(), a.col_idx().to_vec()));
        }
        let symbolic = self.symbolic.as_ref().expect("symbolic factorization present");
        let sym = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
        let mat = SparseColMatRef::new(sym, a.values());
        let mut buf = MemBuffer::new(symbolic.factorize_numeric_lu_scratch::<f64>(self.par, Default::default()));
        symbolic
            .factorize_numeric_lu(
                &mut self.numeric,
                mat,
                self.par,
                MemStack::new(&mut buf),
                Default::default(),
            )
            .map_err(|e| Error::SingularSystem(format!("LU factorization failed: {e:?}")))?;
        Ok(())
    }

    /// Solves `a x = b` in place using the factors of `a^T`.
    fn solve_in_place(&self, b: &mut [f64]) {
        let symbolic = self.symbolic.as_ref().expect("factor before solve");
        let lu = faer::sparse::linalg::lu::LuRef::new_unchecked(symbolic, &self.numeric);
        let n = b.len();
        let rhs = MatMut::from_column_major_slice_mut(b, n, 1);
        let mut buf = MemBuffer::new(symbolic.solve_transpose_in_place_scratch::<f64>(1, self.par));
        lu.solve_transpose_in_place_with_conj(Conj::No, rhs, self.par, MemStack::new(&mut buf));
    }
}

/// Reusable solver; keeps the symbolic factorization between solves whose
/// matrices share a sparsity pattern.
pub struct SaddleSolver {
    settings: SolverSettings,
    direct: DirectSolver,
    velocity: DirectSolver,
    pressure_mass: DirectSolver,
}

impl SaddleSolver {
    pub fn new(settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self {
            settings,
            direct: DirectSolver::new(),
            velocity: DirectSolver::new(),
            pressure_mass: DirectSolver::new(),
        })
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    /// Solves the gauged system. On the direct path the multiplier is
    /// computed from the pressure rows and the factored matrix has one
    /// pressure row replaced by `p_0 = 0`; the residual is still measured
    /// against the full gauged matrix.
    pub fn solve(&mut self, system: &SaddleSystem) -> Result<SaddleSolution> {
        self.solve_with_pressure_mass(system, None)
    }

    /// As [`solve`](Self::solve); `mp` (pressure mass matrix) is used by the
    /// iterative path's Schur approximation and ignored otherwise.
    pub fn solve_with_pressure_mass(
        &mut self,
        system: &SaddleSystem,
        mp: Option<(&SparseMatrix, f64)>,
    ) -> Result<SaddleSolution> {
        system.validate()?;
        if system.gauge.is_none() && system.has_constant_pressure_mode() {
            return Err(Error::SingularSystem(
                "pressure is determined only up to a constant; attach the zero-mean gauge".into(),
            ));
        }
        let a = system.assemble();
        let b = system.rhs();
        let bnorm = norm2(&b);
        let (nv, np) = (system.n_vel(), system.n_pres());
        if bnorm == 0.0 {
            return Ok(SaddleSolution {
                u: vec![0.0; nv],
                p: vec![0.0; np],
                residual: 0.0,
                iterations: 0,
            });
        }
        let (x, iterations) = match self.settings.method {
            SolverMethod::SparseDirect => match &system.gauge {
                Some(g) => (self.solve_pinned(system, g)?, 0),
                None => {
                    self.direct.factor(&a)?;
                    let mut x = b.clone();
                    self.direct.solve_in_place(&mut x);
                    (x, 0)
                }
            },
            SolverMethod::Iterative => {
                let mp = mp.ok_or_else(|| {
                    Error::invalid("iterative solves need the pressure mass matrix and viscosity scale")
                })?;
                self.gmres(system, &a, &b, mp)?
            }
        };
        let mut r = a.mul_vec(&x);
        r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri -= bi);
        let residual = norm2(&r) / bnorm;
        if !residual.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("solution contains non-finite values".into()));
        }
        if residual > self.settings.rel_tol {
            return match self.settings.method {
                SolverMethod::SparseDirect => Err(Error::SingularSystem(format!(
                    "direct solve residual {residual:.3e} exceeds tolerance {:.3e}",
                    self.settings.rel_tol
                ))),
                SolverMethod::Iterative => Err(Error::ConvergenceFailure { iterations, residual }),
            };
        }
        let u = x[..nv].to_vec();
        let mut p = x[nv..nv + np].to_vec();
        if let Some(g) = &system.gauge {
            // Remove round-off drift from the zero-mean constraint.
            let total: f64 = g.iter().sum();
            let mean = dot(g, &p) / total;
            p.iter_mut().for_each(|v| *v -= mean);
        }
        Ok(SaddleSolution {
            u,
            p,
            residual,
            iterations,
        })
    }

    /// Restarted right-preconditioned GMRES. The preconditioner is block upper
    /// triangular: exact `K^{-1}` and `-(nu_eff) M_p^{-1}` for the pressure.
    /// Direct solve of the gauged system. Constant pressures span the kernel
    /// of the ungauged matrix, so the multiplier follows from summing the
    /// pressure rows; one redundant pressure row is then replaced by
    /// `p_0 = 0`, which keeps the dense gauge out of the factorization, and
    /// the pressure is shifted to zero mean afterwards.
    fn solve_pinned(&mut self, system: &SaddleSystem, g: &[f64]) -> Result<Vec<f64>> {
        let (nv, np) = (system.n_vel(), system.n_pres());
        let total: f64 = g.iter().sum();
        if total == 0.0 {
            return Err(Error::SingularSystem("pressure gauge has zero total weight".into()));
        }
        let lambda = system.rhs_p.iter().sum::<f64>() / total;
        let k0 = 0;
        let scale = system
            .d
            .row(k0)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let pinned = system.assemble_pinned(k0, scale);
        self.direct.factor(&pinned)?;
        let mut x = Vec::with_capacity(nv + np + 1);
        x.extend_from_slice(&system.rhs_u);
        x.extend(system.rhs_p.iter().zip(g).map(|(r, gk)| r - gk * lambda));
        x[nv + k0] = 0.0;
        self.direct.solve_in_place(&mut x);
        let shift = dot(g, &x[nv..]) / total;
        x[nv..].iter_mut().for_each(|v| *v -= shift);
        x.push(lambda);
        Ok(x)
    }

    fn gmres(
        &mut self,
        system: &SaddleSystem,
        a: &SparseMatrix,
        b: &[f64],
        (mp, nu_eff): (&SparseMatrix, f64),
    ) -> Result<(Vec<f64>, usize)> {
        let (nv, np) = (system.n_vel(), system.n_pres());
        if mp.nrows() != np {
            return Err(Error::invalid("pressure mass matrix does not match the system"));
        }
        self.velocity.factor(&system.k_uu.transpose())?;
        self.pressure_mass.factor(&mp.transpose())?;
        let dt = system.d.transpose();
        let n = a.nrows();
        let precondition = |r: &[f64], velocity: &DirectSolver, pressure: &DirectSolver| -> Vec<f64> {
            let mut z = r.to_vec();
            {
                let zp = &mut z[nv..nv + np];
                pressure.solve_in_place(zp);
                zp.iter_mut().for_each(|v| *v *= -nu_eff);
            }
            let zp = z[nv..nv + np].to_vec();
            let mut ru = r[..nv].to_vec();
            for (i, ri) in ru.iter_mut().enumerate() {
                *ri += dt.row(i).map(|(k, v)| v * zp[k]).sum::<f64>();
            }
            velocity.solve_in_place(&mut ru);
            z[..nv].copy_from_slice(&ru);
            z
        };

        let bnorm = norm2(b);
        let tol = 0.5 * self.settings.rel_tol * bnorm;
        let m = self.settings.restart.min(n);
        let mut x = vec![0.0; n];
        let mut total = 0usize;
        loop {
            let mut r = a.mul_vec(&x);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            let beta = norm2(&r);
            if beta <= tol {
                return Ok((x, total));
            }
            if total >= self.settings.max_iter {
                return Err(Error::ConvergenceFailure {
                    iterations: total,
                    residual: beta / bnorm,
                });
            }
            let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
            let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
            let mut h = vec![vec![0.0; m]; m + 1];
            let mut cs = vec![0.0; m];
            let mut sn = vec![0.0; m];
            let mut g = vec![0.0; m + 1];
            g[0] = beta;
            let mut k = 0;
            while k < m && total < self.settings.max_iter {
                let z = precondition(&basis[k], &self.velocity, &self.pressure_mass);
                let mut w = a.mul_vec(&z);
                zs.push(z);
                for (j, v) in basis.iter().enumerate() {
                    let hij = dot(&w, v);
                    h[j][k] = hij;
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hij * vi);
                }
                let wn = norm2(&w);
                h[k + 1][k] = wn;
                for j in 0..k {
                    let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                    h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                    h[j][k] = t;
                }
                let rho = h[k][k].hypot(h[k + 1][k]);
                cs[k] = h[k][k] / rho;
                sn[k] = h[k + 1][k] / rho;
                h[k][k] = rho;
                h[k + 1][k] = 0.0;
                g[k + 1] = -sn[k] * g[k];
                g[k] *= cs[k];
                total += 1;
                k += 1;
                if g[k].abs() <= tol || wn == 0.0 {
                    break;
                }
                basis.push(w.iter().map(|v| v / wn).collect());
            }
            let mut y = vec![0.0; k];
            for i in (0..k).rev() {
                let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
                y[i] = (g[i] - s) / h[i][i];
            }
            for (yi, z) in y.iter().zip(&zs) {
                x.iter_mut().zip(z).for_each(|(xi, zi)| *xi += yi * zi);
            }
        }
    }
}

/// One-off solve; see [`SaddleSolver`] for repeated solves.
pub fn solve_saddle(system: &SaddleSystem, settings: &SolverSettings) -> Result<SaddleSolution> {
    SaddleSolver::new(*settings)?.solve(system)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_constant_operators, assemble_load, l2_error_against_analytic};
    use crate::mesh::{build_coarse_partition, build_uniform_mesh};
    use crate::mms::{ExactSolution, ManufacturedSolution};
    use crate::observer::{build_cell_average_observer, NudgingMatrixSpec};
    use crate::quadrature::QuadratureRule;
    use crate::space::{build_mixed_space, MixedSpace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, nu: f64, mu: f64, beta: f64) -> (MixedSpace, OperatorSet) {
        let mesh = build_uniform_mesh(n).unwrap();
        let space = build_mixed_space(&mesh).unwrap();
        let ratio = if n % 2 == 0 { 2 } else { 1 };
        let part = build_coarse_partition(&mesh, ratio).unwrap();
        let obs = build_cell_average_observer(&part, &space).unwrap();
        let ops = assemble_constant_operators(&mesh, &space, nu, mu, &NudgingMatrixSpec::new(beta, obs).unwrap()).unwrap();
        (space, ops)
    }

    #[test]
    fn pinned_solve_matches_factoring_the_gauged_matrix() {
        let (space, ops) = setup(4, 1e-3, 0.05, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w: Vec<f64> = (0..space.n_vel()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = ops.convection(&space, &w).unwrap();
        let rhs: Vec<f64> = (0..space.n_vel()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut sys = build_system(&ops, space.dirichlet_mask(), 20.0, Some(&n), rhs).unwrap();
        sys.rhs_p = (0..space.n_pres()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut full = DirectSolver::new();
        full.factor(&sys.assemble()).unwrap();
        let mut x = sys.rhs();
        full.solve_in_place(&mut x);
        let out = SaddleSolver::new(SolverSettings::default()).unwrap().solve(&sys).unwrap();
        let nv = space.n_vel();
        for (a, b) in out.u.iter().zip(&x[..nv]) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        for (a, b) in out.p.iter().zip(&x[nv..nv + space.n_pres()]) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    fn stokes_error(n: usize, method: SolverMethod) -> f64 {
        let (space, ops) = setup(n, 1.0, 0.0, 0.0);
        let sol = ManufacturedSolution;
        let t = 0.4;
        // Steady Stokes with nu = 1: f = -lap u + grad p.
        let f = |p: [f64; 2]| {
            let lap = sol.velocity_laplacian(p[0], p[1], t);
            let g = sol.pressure_gradient(p[0], p[1], t);
            [-lap[0] + g[0], -lap[1] + g[1]]
        };
        let rhs = assemble_load(&space, f);
        let sys = build_system(&ops, space.dirichlet_mask(), 0.0, None, rhs).unwrap();
        let settings = SolverSettings {
            method,
            ..Default::default()
        };
        let mut solver = SaddleSolver::new(settings).unwrap();
        let out = solver.solve_with_pressure_mass(&sys, Some((&ops.mp, 1.0))).unwrap();
        l2_error_against_analytic(&space, &out.u, &sol, t, &QuadratureRule::degree8())
    }

    #[test]
    fn stokes_velocity_converges_at_third_order() {
        let errs: Vec<f64> = [4, 8, 16].iter().map(|&n| stokes_error(n, SolverMethod::SparseDirect)).collect();
        let hs = [0.25f64, 0.125, 0.0625];
        let slope = crate::diagnostics::fit_slope(&hs, &errs).unwrap().slope;
        assert!((2.6..=3.4).contains(&slope), "slope {slope} from {errs:?}");
    }

    #[test]
    fn iterative_matches_direct() {
        let a = stokes_error(8, SolverMethod::SparseDirect);
        let b = stokes_error(8, SolverMethod::Iterative);
        assert!((a - b).abs() <= 1e-8 * a, "{a} vs {b}");
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let (space, ops) = setup(3, 1.0, 0.1, 1.0);
        let sys = build_system(&ops, space.dirichlet_mask(), 2.0, None, vec![0.0; space.n_vel()]).unwrap();
        let out = solve_saddle(&sys, &SolverSettings::default()).unwrap();
        assert!(out.u.iter().chain(&out.p).all(|&v| v == 0.0));
    }

    #[test]
    fn missing_gauge_is_singular() {
        let (space, ops) = setup(4, 1.0, 0.0, 0.0);
        let rhs = assemble_load(&space, |p| [p[1], -p[0]]);
        let mut sys = build_system(&ops, space.dirichlet_mask(), 1.0, None, rhs).unwrap();
        sys.gauge = None;
        assert!(matches!(solve_saddle(&sys, &SolverSettings::default()), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn velocity_block_is_sum_of_dense_blocks() {
        let (space, ops) = setup(1, 0.3, 0.2, 1.7);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w: Vec<f64> = (0..space.n_vel()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nw = ops.convection(&space, &w).unwrap();
        let k = ops.velocity_block(2.5, Some(&nw)).unwrap().to_dense();
        let (m, a, g, b, nd) = (ops.m.to_dense(), ops.a.to_dense(), ops.g.to_dense(), ops.b.to_dense(), nw.to_dense());
        for i in 0..space.n_vel() {
            for j in 0..space.n_vel() {
                let expect = 2.5 * m[i][j] + 0.3 * a[i][j] + 0.2 * g[i][j] + b[i][j] + nd[i][j];
                assert!((k[i][j] - expect).abs() < 1e-14);
            }
        }
        let plain = SaddleSystem {
            k_uu: ops.velocity_block(1.0, None).unwrap(),
            ..build_system(&ops, space.dirichlet_mask(), 1.0, None, vec![0.0; space.n_vel()]).unwrap()
        };
        assert_eq!(plain.k_uu.nrows(), space.n_vel());
    }

    #[test]
    fn mass_only_block_equals_mass() {
        let mesh = build_uniform_mesh(2).unwrap();
        let space = build_mixed_space(&mesh).unwrap();
        let part = build_coarse_partition(&mesh, 1).unwrap();
        let obs = build_cell_average_observer(&part, &space).unwrap();
        let ops = assemble_constant_operators(&mesh, &space, 1.0, 0.0, &NudgingMatrixSpec::new(0.0, obs).unwrap()).unwrap();
        let ops = OperatorSet { nu: 0.0, ..ops };
        let k = ops.velocity_block(1.0, None).unwrap();
        let diff = SparseMatrix::linear_combination(&[(1.0, &k), (-1.0, &ops.m)]).unwrap();
        assert_eq!(diff.max_abs(), 0.0);
    }

    #[test]
    fn nudging_contributes_beta_norm_on_constants() {
        let (space, ops) = setup(4, 1e-3, 0.0, 1.0);
        let v = vec![1.0; space.n_vel()];
        let k = ops.velocity_block(0.0, None).unwrap();
        let nu_part = ops.a.bilinear(&v, &v) * ops.nu;
        // Cell averages reproduce constants, so (I_H v, I_H v) = ||v||^2 = 2.
        assert!((k.bilinear(&v, &v) - nu_part - 2.0).abs() < 1e-12);
    }

    #[test]
    fn solve_contracts_hold_for_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for &(nu, mu, beta) in &[(1e-2, 0.0, 1.0), (1e-6, 0.05, 1.0), (1.0, 0.0, 0.0)] {
            let (space, ops) = setup(6, nu, mu, beta);
            let w: Vec<f64> = (0..space.n_vel()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nw = ops.convection(&space, &w).unwrap();
            let rhs: Vec<f64> = (0..space.n_vel()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sys = build_system(&ops, space.dirichlet_mask(), 40.0, Some(&nw), rhs).unwrap();
            let out = solve_saddle(&sys, &SolverSettings::default()).unwrap();
            assert!(out.residual <= 1e-10);
            let mean: f64 = dot(&ops.pressure_mass, &out.p);
            assert!(mean.abs() <= 1e-12, "mean {mean}");
            let du = norm2(&sys.d.mul_vec(&out.u));
            assert!(du <= 10.0 * 1e-10 * norm2(&out.u) * sys.d.frobenius_norm(), "{du}");

            let mut shifted = sys.clone();
            shifted.rhs_p.iter_mut().zip(&ops.pressure_mass).for_each(|(r, m)| *r += 3.0 * m);
            let out2 = solve_saddle(&shifted, &SolverSettings::default()).unwrap();
            let diff: f64 = out.u.iter().zip(&out2.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-10 * out.u.iter().map(|v| v.abs()).fold(0.0, f64::max));
        }
    }

    #[test]
    fn symbolic_factorization_is_reused_across_values() {
        let (space, ops) = setup(4, 1e-2, 0.0, 1.0);
        let mut solver = SaddleSolver::new(SolverSettings::default()).unwrap();
        let rhs = assemble_load(&space, |p| [p[1] - 0.5, 0.5 - p[0]]);
        let mut last = None;
        for c0 in [10.0, 20.0] {
            let sys = build_system(&ops, space.dirichlet_mask(), c0, None, rhs.clone()).unwrap();
            let out = solver.solve(&sys).unwrap();
            let fresh = solve_saddle(&sys, &SolverSettings::default()).unwrap();
            assert_eq!(out.u, fresh.u);
            last = Some(out.u);
        }
        assert!(last.is_some());
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let (space, ops) = setup(2, 1.0, 0.0, 0.0);
        assert!(build_system(&ops, space.dirichlet_mask(), 1.0, None, vec![0.0; 3]).is_err());
        assert!(SaddleSolver::new(SolverSettings { rel_tol: 0.0, ..Default::default() }).is_err());
    }
}
