//! Manufactured Navier-Stokes solution on the unit square and generic
//! analytic-field plumbing.
//!
//! The velocity is `g(t) * curl(psi)` with stream function
//! `psi = 8 sin^2(pi x) (y(1-y))^2` and amplitude `g(t) = (6 + 4 cos 4t)/10`:
//!
//! ```text
//! u1 =  g(t) * 8 sin^2(pi x) * 2y(1-y)(1-2y)
//! u2 = -g(t) * 8 pi sin(2 pi x) * (y(1-y))^2
//! p  =  g(t) * sin(pi x) cos(pi y)
//! ```
//!
//! The forcing `f = u_t - nu Lap(u) + (u.grad)u + grad p` is written out in
//! closed form below.

use std::f64::consts::PI;

use crate::mesh::Point;
use crate::space::MixedSpace;
use crate::timestepping::DiscreteState;

/// Time-dependent vector field on the unit square.
pub trait VelocityField: Sync {
    fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2];
}

impl<F> VelocityField for F
where
    F: Fn(f64, f64, f64) -> [f64; 2] + Sync,
{
    fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        self(x, y, t)
    }
}

/// Analytic solution of the forced Navier-Stokes problem.
pub trait ExactSolution: VelocityField {
    fn pressure(&self, x: f64, y: f64, t: f64) -> f64;
    fn forcing(&self, x: f64, y: f64, t: f64, nu: f64) -> [f64; 2];
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ManufacturedSolution;

/// Spatial factors of the solution and their derivatives at one point.
struct Profile {
    u: [f64; 2],
    grad: [[f64; 2]; 2],
    lap: [f64; 2],
    grad_p: [f64; 2],
    p: f64,
}

fn profile(x: f64, y: f64) -> Profile {
    let s = (PI * x).sin();
    let c = (PI * x).cos();
    let s2x = (2.0 * PI * x).sin();
    let c2x = (2.0 * PI * x).cos();
    let yy = y * (1.0 - y);
    let yp = 1.0 - 2.0 * y;
    // q = d/dy (y(1-y))^2 and its derivatives.
    let q = 2.0 * yy * yp;
    let dq = 2.0 * (yp * yp - 2.0 * yy);
    let ddq = -12.0 * yp;
    let pi2 = PI * PI;

    let u1 = 8.0 * s * s * q;
    let u2 = -8.0 * PI * s2x * yy * yy;
    let u1x = 8.0 * PI * s2x * q;
    let u1y = 8.0 * s * s * dq;
    let u2x = -16.0 * pi2 * c2x * yy * yy;
    let u2y = -8.0 * PI * s2x * q;
    let lap1 = 16.0 * pi2 * c2x * q + 8.0 * s * s * ddq;
    let lap2 = 32.0 * pi2 * PI * s2x * yy * yy - 8.0 * PI * s2x * dq;

    let cy = (PI * y).cos();
    let sy = (PI * y).sin();
    Profile {
        u: [u1, u2],
        grad: [[u1x, u1y], [u2x, u2y]],
        lap: [lap1, lap2],
        grad_p: [PI * c * cy, -PI * s * sy],
        p: s * cy,
    }
}

impl ManufacturedSolution {
    /// Time amplitude `(6 + 4 cos 4t) / 10`.
    pub fn amplitude(t: f64) -> f64 {
        (6.0 + 4.0 * (4.0 * t).cos()) / 10.0
    }

    pub fn amplitude_derivative(t: f64) -> f64 {
        -1.6 * (4.0 * t).sin()
    }

    /// Stream function `psi` with `u = (d psi/dy, -d psi/dx)`.
    pub fn stream_function(x: f64, y: f64, t: f64) -> f64 {
        let s = (PI * x).sin();
        let yy = y * (1.0 - y);
        Self::amplitude(t) * 8.0 * s * s * yy * yy
    }

    /// `(u1, u2, p)` at `(x, y, t)`.
    pub fn eval_exact(&self, x: f64, y: f64, t: f64) -> (f64, f64, f64) {
        let g = Self::amplitude(t);
        let pr = profile(x, y);
        (g * pr.u[0], g * pr.u[1], g * pr.p)
    }

    pub fn velocity_gradient(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
        let g = Self::amplitude(t);
        let pr = profile(x, y);
        pr.grad.map(|row| row.map(|v| g * v))
    }

    pub fn velocity_laplacian(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let g = Self::amplitude(t);
        let pr = profile(x, y);
        pr.lap.map(|v| g * v)
    }

    pub fn pressure_gradient(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let g = Self::amplitude(t);
        profile(x, y).grad_p.map(|v| g * v)
    }

    pub fn eval_forcing(&self, x: f64, y: f64, t: f64, nu: f64) -> [f64; 2] {
        let g = Self::amplitude(t);
        let dg = Self::amplitude_derivative(t);
        let pr = profile(x, y);
        let mut f = [0.0; 2];
        for (k, fk) in f.iter_mut().enumerate() {
            let conv = pr.u[0] * pr.grad[k][0] + pr.u[1] * pr.grad[k][1];
            *fk = dg * pr.u[k] + g * (-nu * pr.lap[k] + pr.grad_p[k]) + g * g * conv;
        }
        f
    }
}

impl VelocityField for ManufacturedSolution {
    fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let (u1, u2, _) = self.eval_exact(x, y, t);
        [u1, u2]
    }
}

impl ExactSolution for ManufacturedSolution {
    fn pressure(&self, x: f64, y: f64, t: f64) -> f64 {
        self.eval_exact(x, y, t).2
    }

    fn forcing(&self, x: f64, y: f64, t: f64, nu: f64) -> [f64; 2] {
        self.eval_forcing(x, y, t, nu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialData {
    Zero,
    ExactInterpolant,
}

impl std::str::FromStr for InitialData {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(Self::Zero),
            "exact_interpolant" | "exact-interpolant" => Ok(Self::ExactInterpolant),
            other => Err(format!("unknown initial data `{other}` (expected zero | exact_interpolant)")),
        }
    }
}

impl std::fmt::Display for InitialData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::ExactInterpolant => "exact_interpolant",
        })
    }
}

/// `int psi_k` for every P1 pressure basis function.
pub fn pressure_mass_vector(space: &MixedSpace) -> Vec<f64> {
    let mesh = space.mesh();
    let mut m = vec![0.0; space.n_pres()];
    for (c, tri) in mesh.cells().iter().enumerate() {
        let a = mesh.signed_area(c) / 3.0;
        for &v in tri {
            m[v] += a;
        }
    }
    m
}

/// Shifts P1 pressure coefficients so that `int p = 0`.
pub fn remove_pressure_mean(space: &MixedSpace, p: &mut [f64]) {
    let m = pressure_mass_vector(space);
    let total: f64 = m.iter().sum();
    let mean = m.iter().zip(p.iter()).map(|(a, b)| a * b).sum::<f64>() / total;
    p.iter_mut().for_each(|v| *v -= mean);
}

/// Initial state at `t0`: zero, or the nodal interpolant of the exact fields.
pub fn project_initial_data(
    space: &MixedSpace,
    exact: &dyn ExactSolution,
    mode: InitialData,
    t0: f64,
) -> DiscreteState {
    match mode {
        InitialData::Zero => DiscreteState::new(vec![0.0; space.n_vel()], vec![0.0; space.n_pres()]),
        InitialData::ExactInterpolant => {
            let mut u = space.interpolate_velocity(|p: Point| exact.velocity(p[0], p[1], t0));
            space.apply_homogeneous_bc(&mut u);
            let mut p = space.interpolate_pressure(|q: Point| exact.pressure(q[0], q[1], t0));
            remove_pressure_mean(space, &mut p);
            DiscreteState::new(u, p)
        }
    }
}
