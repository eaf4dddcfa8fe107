//! Implicit Euler, implicit BDF2 and semi-implicit BDF2 for the nudged system.
//!
//! Every step solves
//!
//! ```text
//! c0 M u + nu A u + mu G u + B u + N(w) u - D^T p = M h + F
//! D u = 0
//! ```
//!
//! where `c0 M u - M h` is the time difference and `F` collects the load and
//! the nudging data at `t_n`. The implicit schemes iterate on `w` (Picard);
//! the semi-implicit scheme takes `w = 2 u^{n-1} - u^{n-2}` and solves once.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::assembly::{assemble_load, relative_l2_error, OperatorSet};
use crate::diagnostics::compute_gamma;
use crate::error::{Error, Result};
use crate::linsolve::{build_system, SaddleSolver, SolverSettings};
use crate::mms::{project_initial_data, ExactSolution, InitialData};
use crate::observer::CoarseObserver;
use crate::quadrature::QuadratureRule;
use crate::space::MixedSpace;
use crate::sparse::norm2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    EulerImplicit,
    Bdf2Implicit,
    Bdf2SemiImplicit,
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler_implicit" | "euler" => Ok(Self::EulerImplicit),
            "bdf2_implicit" => Ok(Self::Bdf2Implicit),
            "bdf2_semi_implicit" | "bdf2_semi" => Ok(Self::Bdf2SemiImplicit),
            other => Err(format!(
                "unknown scheme `{other}` (expected euler_implicit | bdf2_implicit | bdf2_semi_implicit)"
            )),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::EulerImplicit => "euler_implicit",
            Self::Bdf2Implicit => "bdf2_implicit",
            Self::Bdf2SemiImplicit => "bdf2_semi_implicit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    pub picard: PicardSettings,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, dt: f64, t_final: f64) -> Self {
        Self {
            scheme,
            dt,
            t_final,
            picard: PicardSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(Error::invalid(format!(
                "final time {} must be at least one time step {}",
                self.t_final, self.dt
            )));
        }
        if self.picard.max_iter == 0 {
            return Err(Error::invalid("picard max_iter must be at least 1"));
        }
        if !(self.picard.rel_tol >= 0.0) || !(self.picard.abs_tol >= 0.0) {
            return Err(Error::invalid("picard tolerances must be non-negative"));
        }
        Ok(())
    }

    /// Number of steps `round(T / dt)`.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// `(u^n, p^n)` with the previous velocity when the scheme needs it.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub t_index: usize,
    /// `u^{n-1}`, present from the first step on.
    pub history: Option<Vec<f64>>,
}

impl DiscreteState {
    pub fn new(u: Vec<f64>, p: Vec<f64>) -> Self {
        Self {
            u,
            p,
            t_index: 0,
            history: None,
        }
    }

    fn advance(&self, u: Vec<f64>, p: Vec<f64>) -> Self {
        Self {
            history: Some(self.u.clone()),
            u,
            p,
            t_index: self.t_index + 1,
        }
    }
}

/// Per-step solver effort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepStats {
    pub picard_iters: usize,
    pub linear_solves: usize,
}

/// Holds the operators of one run and the reusable linear solver.
pub struct Stepper<'a> {
    space: &'a MixedSpace,
    ops: &'a OperatorSet,
    solver: SaddleSolver,
    convection: bool,
}

impl<'a> Stepper<'a> {
    pub fn new(space: &'a MixedSpace, ops: &'a OperatorSet, settings: SolverSettings) -> Result<Self> {
        if ops.n_vel() != space.n_vel() || ops.n_pres() != space.n_pres() {
            return Err(Error::invalid("operators do not match the finite element space"));
        }
        Ok(Self {
            space,
            ops,
            solver: SaddleSolver::new(settings)?,
            convection: true,
        })
    }

    /// Drops the convection term (Stokes-type problems and ODE checks).
    pub fn without_convection(mut self) -> Self {
        self.convection = false;
        self
    }

    fn solve_linear(&mut self, c0: f64, w: &[f64], rhs: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = if self.convection { Some(self.ops.convection(self.space, w)?) } else { None };
        let sys = build_system(self.ops, self.space.dirichlet_mask(), c0, n.as_ref(), rhs)?;
        let nu_eff = self.ops.nu + self.ops.mu;
        let sol = self.solver.solve_with_pressure_mass(&sys, Some((&self.ops.mp, nu_eff)))?;
        Ok((sol.u, sol.p))
    }

    /// `M h + extra`.
    fn rhs(&self, h: &[f64], extra: &[f64]) -> Result<Vec<f64>> {
        if extra.len() != self.space.n_vel() || h.len() != self.space.n_vel() {
            return Err(Error::invalid("right-hand side has the wrong length"));
        }
        let mut r = self.ops.m.mul_vec(h);
        r.iter_mut().zip(extra).for_each(|(a, b)| *a += b);
        Ok(r)
    }

    fn picard(
        &mut self,
        c0: f64,
        start: &[f64],
        rhs: Vec<f64>,
        settings: &PicardSettings,
    ) -> Result<(Vec<f64>, Vec<f64>, StepStats)> {
        let mut w = start.to_vec();
        let mut last_update = f64::INFINITY;
        let mut threshold = 0.0;
        for k in 1..=settings.max_iter {
            let (u, p) = self.solve_linear(c0, &w, rhs.clone())?;
            let diff: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - b).collect();
            last_update = self.ops.mass_norm(&diff);
            threshold = settings.rel_tol * self.ops.mass_norm(&u) + settings.abs_tol;
            if !last_update.is_finite() {
                break;
            }
            if last_update <= threshold || !self.convection {
                let stats = StepStats {
                    picard_iters: k,
                    linear_solves: k,
                };
                return Ok((u, p, stats));
            }
            w = u;
        }
        Err(Error::NonlinearDivergence {
            iterations: settings.max_iter,
            last_update,
            threshold,
        })
    }

    /// `(u - u^{n-1}) / dt` with Picard on the convection.
    pub fn step_euler(
        &mut self,
        state: &DiscreteState,
        extra: &[f64],
        dt: f64,
        picard: &PicardSettings,
    ) -> Result<(DiscreteState, StepStats)> {
        let h: Vec<f64> = state.u.iter().map(|v| v / dt).collect();
        let rhs = self.rhs(&h, extra)?;
        let (u, p, stats) = self.picard(1.0 / dt, &state.u, rhs, picard)?;
        Ok((state.advance(u, p), stats))
    }

    /// `(3u - 4u^{n-1} + u^{n-2}) / (2 dt)` with Picard on the convection.
    pub fn step_bdf2_implicit(
        &mut self,
        state: &DiscreteState,
        extra: &[f64],
        dt: f64,
        picard: &PicardSettings,
    ) -> Result<(DiscreteState, StepStats)> {
        let prev = state
            .history
            .as_ref()
            .ok_or_else(|| Error::InvalidState("BDF2 needs two previous velocities".into()))?;
        let h: Vec<f64> = state.u.iter().zip(prev).map(|(a, b)| (4.0 * a - b) / (2.0 * dt)).collect();
        let rhs = self.rhs(&h, extra)?;
        let (u, p, stats) = self.picard(1.5 / dt, &state.u, rhs, picard)?;
        Ok((state.advance(u, p), stats))
    }

    /// BDF2 with convection frozen at `2u^{n-1} - u^{n-2}`; one linear solve.
    pub fn step_bdf2_semi(
        &mut self,
        state: &DiscreteState,
        extra: &[f64],
        dt: f64,
    ) -> Result<(DiscreteState, StepStats)> {
        let prev = state
            .history
            .as_ref()
            .ok_or_else(|| Error::InvalidState("BDF2 needs two previous velocities".into()))?;
        let h: Vec<f64> = state.u.iter().zip(prev).map(|(a, b)| (4.0 * a - b) / (2.0 * dt)).collect();
        let w = extrapolate(&state.u, prev);
        let rhs = self.rhs(&h, extra)?;
        let (u, p) = self.solve_linear(1.5 / dt, &w, rhs)?;
        let stats = StepStats {
            picard_iters: 0,
            linear_solves: 1,
        };
        Ok((state.advance(u, p), stats))
    }

    /// First semi-implicit step: BDF2 cannot start, so the convection is
    /// frozen at `u^0` inside one Euler solve.
    fn step_semi_startup(&mut self, state: &DiscreteState, extra: &[f64], dt: f64) -> Result<(DiscreteState, StepStats)> {
        let h: Vec<f64> = state.u.iter().map(|v| v / dt).collect();
        let rhs = self.rhs(&h, extra)?;
        let (u, p) = self.solve_linear(1.0 / dt, &state.u, rhs)?;
        Ok((
            state.advance(u, p),
            StepStats {
                picard_iters: 0,
                linear_solves: 1,
            },
        ))
    }
}

/// `2 a - b`.
pub fn extrapolate(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 2.0 * x - y).collect()
}

/// Time series of one run; entry 0 is the initial state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub rel_vel_errors: Vec<f64>,
    /// `||D u^n||_2`.
    pub div_norms: Vec<f64>,
    pub picard_iters: Vec<usize>,
    pub linear_solves: Vec<usize>,
    pub wall_time: Duration,
}

impl RunRecord {
    pub const CSV_HEADER: &'static str = "t,rel_err_vel,div_norm,picard_iters";

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, err: f64, div: f64, stats: StepStats) {
        self.times.push(t);
        self.rel_vel_errors.push(err);
        self.div_norms.push(div);
        self.picard_iters.push(stats.picard_iters);
        self.linear_solves.push(stats.linear_solves);
    }

    /// CSV with `#` comment lines first, then `schema=1`, header and rows.
    pub fn write_csv(&self, mut out: impl Write, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "# schema=1")?;
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{}",
                self.times[i], self.rel_vel_errors[i], self.div_norms[i], self.picard_iters[i]
            )?;
        }
        Ok(())
    }
}

/// A run that stopped early; `partial` holds the steps completed so far.
#[derive(Debug)]
pub struct RunError {
    pub source: Error,
    pub partial: Box<RunRecord>,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run failed after {} recorded steps: {}", self.partial.len(), self.source)
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Everything a run reads but does not modify; shareable between threads.
#[derive(Clone, Copy)]
pub struct RunContext<'a> {
    pub space: &'a MixedSpace,
    pub ops: &'a OperatorSet,
    pub observer: &'a CoarseObserver,
    pub exact: &'a dyn ExactSolution,
    pub solver: SolverSettings,
    /// Interpolation constant for the advisory step-size warning.
    pub c_i: f64,
}

impl RunContext<'_> {
    /// Load and nudging data at `t`.
    fn step_data(&self, t: f64) -> Vec<f64> {
        let nu = self.ops.nu;
        let mut f = assemble_load(self.space, |p| self.exact.forcing(p[0], p[1], t, nu));
        if self.ops.beta > 0.0 {
            let obs = self.observer.observe_exact(self.exact, t);
            let nudge = self.observer.nudging_rhs(self.ops.beta, &obs);
            f.iter_mut().zip(&nudge).for_each(|(a, b)| *a += b);
        }
        f
    }

    fn measure(&self, u: &[f64], t: f64, rule: &QuadratureRule) -> Result<(f64, f64)> {
        let err = relative_l2_error(self.space, u, self.exact, t, rule)?;
        let div = norm2(&self.ops.d.mul_vec(u));
        Ok((err, div))
    }

    fn warn_on_step_bound(&self, cfg: &SchemeConfig) {
        let bound = match cfg.scheme {
            Scheme::EulerImplicit => return,
            Scheme::Bdf2Implicit => 24.0,
            Scheme::Bdf2SemiImplicit => 12.0,
        };
        let h_coarse = self.observer.partition().h_coarse();
        if let Ok(gamma) = compute_gamma(self.ops.nu, h_coarse, self.ops.beta, self.c_i) {
            if cfg.dt * gamma > bound {
                log::warn!(
                    "dt = {} exceeds the {} bound {:.6e} = {bound}/gamma of the error analysis",
                    cfg.dt,
                    cfg.scheme,
                    bound / gamma
                );
            }
        }
    }
}

/// Advances from `t = 0` to `T`, recording the relative velocity error at
/// every step.
pub fn run(cfg: &SchemeConfig, ctx: &RunContext<'_>, initial: InitialData) -> Result<RunRecord, RunError> {
    run_until(cfg, ctx, initial, |_| false)
}

/// As [`run`], but stops after any step for which `stop` returns true.
pub fn run_until(
    cfg: &SchemeConfig,
    ctx: &RunContext<'_>,
    initial: InitialData,
    mut stop: impl FnMut(&RunRecord) -> bool,
) -> Result<RunRecord, RunError> {
    let start = Instant::now();
    let mut record = RunRecord::default();
    let fail = |source: Error, mut partial: RunRecord| RunError {
        source,
        partial: {
            partial.wall_time = start.elapsed();
            Box::new(partial)
        },
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(e, record));
    }
    ctx.warn_on_step_bound(cfg);
    let mut stepper = match Stepper::new(ctx.space, ctx.ops, ctx.solver) {
        Ok(s) => s,
        Err(e) => return Err(fail(e, record)),
    };
    let rule = QuadratureRule::degree8();
    let mut state = project_initial_data(ctx.space, ctx.exact, initial, 0.0);
    match ctx.measure(&state.u, 0.0, &rule) {
        Ok((err, div)) => record.push(0.0, err, div, StepStats::default()),
        Err(e) => return Err(fail(e, record)),
    }
    for n in 1..=cfg.n_steps() {
        let t = n as f64 * cfg.dt;
        let extra = ctx.step_data(t);
        let step = match (cfg.scheme, n) {
            (Scheme::EulerImplicit, _) | (Scheme::Bdf2Implicit, 1) => {
                stepper.step_euler(&state, &extra, cfg.dt, &cfg.picard)
            }
            (Scheme::Bdf2Implicit, _) => stepper.step_bdf2_implicit(&state, &extra, cfg.dt, &cfg.picard),
            (Scheme::Bdf2SemiImplicit, 1) => stepper.step_semi_startup(&state, &extra, cfg.dt),
            (Scheme::Bdf2SemiImplicit, _) => stepper.step_bdf2_semi(&state, &extra, cfg.dt),
        };
        let (next, stats) = match step {
            Ok(s) => s,
            Err(e) => return Err(fail(e, record)),
        };
        state = next;
        match ctx.measure(&state.u, t, &rule) {
            Ok((err, div)) => record.push(t, err, div, stats),
            Err(e) => return Err(fail(e, record)),
        }
        if stop(&record) {
            break;
        }
    }
    record.wall_time = start.elapsed();
    Ok(record)
}

/// `M g`, the load that makes `g` the time derivative.
pub fn mass_times(ops: &OperatorSet, g: &[f64]) -> Vec<f64> {
    ops.m.mul_vec(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_constant_operators;
    use crate::linsolve::solve_saddle;
    use crate::mesh::{build_coarse_partition, build_uniform_mesh};
    use crate::mms::ManufacturedSolution;
    use crate::observer::{build_cell_average_observer, NudgingMatrixSpec};
    use crate::space::build_mixed_space;

    struct Fixture {
        space: MixedSpace,
        ops: OperatorSet,
        observer: CoarseObserver,
    }

    fn fixture(n: usize, ratio: usize, nu: f64, mu: f64, beta: f64) -> Fixture {
        let mesh = build_uniform_mesh(n).unwrap();
        let space = build_mixed_space(&mesh).unwrap();
        let part = build_coarse_partition(&mesh, ratio).unwrap();
        let observer = build_cell_average_observer(&part, &space).unwrap();
        let ops =
            assemble_constant_operators(&mesh, &space, nu, mu, &NudgingMatrixSpec::new(beta, observer.clone()).unwrap())
                .unwrap();
        Fixture { space, ops, observer }
    }

    /// A discretely divergence-free velocity: the Stokes solution for a
    /// rotational load.
    fn solenoidal(f: &Fixture) -> Vec<f64> {
        let rhs = assemble_load(&f.space, |p| [p[1] - 0.5, 0.5 - p[0]]);
        let sys = build_system(&f.ops, f.space.dirichlet_mask(), 0.0, None, rhs).unwrap();
        solve_saddle(&sys, &SolverSettings::default()).unwrap().u
    }

    fn mass_only(f: &Fixture) -> OperatorSet {
        OperatorSet {
            nu: 0.0,
            mu: 0.0,
            ..f.ops.clone()
        }
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let f = fixture(4, 2, 1e-2, 0.05, 0.0);
        let mut st = Stepper::new(&f.space, &f.ops, SolverSettings::default()).unwrap();
        let zero = DiscreteState::new(vec![0.0; f.space.n_vel()], vec![0.0; f.space.n_pres()]);
        let extra = vec![0.0; f.space.n_vel()];
        let (next, stats) = st.step_euler(&zero, &extra, 0.1, &PicardSettings::default()).unwrap();
        assert_eq!(stats.picard_iters, 1);
        assert!(next.u.iter().all(|&v| v == 0.0));
        let (two, _) = st.step_bdf2_implicit(&next, &extra, 0.1, &PicardSettings::default()).unwrap();
        assert!(two.u.iter().all(|&v| v == 0.0));
        let (three, stats) = st.step_bdf2_semi(&two, &extra, 0.1).unwrap();
        assert_eq!(stats.linear_solves, 1);
        assert!(three.u.iter().all(|&v| v == 0.0));
        assert_eq!(three.t_index, 3);
    }

    #[test]
    fn bdf2_without_history_is_invalid_state() {
        let f = fixture(2, 1, 1e-2, 0.0, 0.0);
        let mut st = Stepper::new(&f.space, &f.ops, SolverSettings::default()).unwrap();
        let s = DiscreteState::new(vec![0.0; f.space.n_vel()], vec![0.0; f.space.n_pres()]);
        let extra = vec![0.0; f.space.n_vel()];
        assert!(matches!(
            st.step_bdf2_semi(&s, &extra, 0.1),
            Err(Error::InvalidState(_))
        ));
        assert!(matches!(
            st.step_bdf2_implicit(&s, &extra, 0.1, &PicardSettings::default()),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn extrapolation_of_constant_history() {
        let a = vec![1.0, -2.0, 3.5];
        assert_eq!(extrapolate(&a, &a), a);
    }

    #[test]
    fn euler_reproduces_linear_growth_on_mass_system() {
        let f = fixture(4, 2, 1.0, 0.0, 0.0);
        let g = solenoidal(&f);
        let ops = mass_only(&f);
        let mut st = Stepper::new(&f.space, &ops, SolverSettings::default()).unwrap().without_convection();
        let dt = 0.05;
        let a: Vec<f64> = g.iter().map(|v| 0.3 * v).collect();
        let s = DiscreteState::new(a.clone(), vec![0.0; f.space.n_pres()]);
        let (next, _) = st.step_euler(&s, &mass_times(&ops, &g), dt, &PicardSettings::default()).unwrap();
        let expect: Vec<f64> = a.iter().zip(&g).map(|(x, y)| x + dt * y).collect();
        assert!(max_diff(&next.u, &expect) <= 1e-10 * max_diff(&expect, &vec![0.0; expect.len()]));
    }

    #[test]
    fn bdf2_is_exact_on_linear_and_quadratic_data_euler_is_not() {
        let f = fixture(4, 2, 1.0, 0.0, 0.0);
        let g = solenoidal(&f);
        let ops = mass_only(&f);
        let mut st = Stepper::new(&f.space, &ops, SolverSettings::default()).unwrap().without_convection();
        let dt = 0.1;
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let at = |t: f64, k: fn(f64) -> f64| g.iter().map(|v| k(t) * v).collect::<Vec<f64>>();
        let np = f.space.n_pres();
        let picard = PicardSettings::default();

        // Linear in time: u = t g, du/dt = g.
        let mut s = DiscreteState::new(at(dt, |t| t), vec![0.0; np]);
        s.history = Some(at(0.0, |t| t));
        let (next, _) = st.step_bdf2_implicit(&s, &mass_times(&ops, &g), dt, &picard).unwrap();
        assert!(max_diff(&next.u, &at(2.0 * dt, |t| t)) <= 1e-10 * scale);

        // Quadratic: u = t^2 g, du/dt(t_n) = 2 t_n g.
        let tn = 3.0 * dt;
        let load = mass_times(&ops, &at(tn, |t| 2.0 * t));
        let mut s = DiscreteState::new(at(2.0 * dt, |t| t * t), vec![0.0; np]);
        s.history = Some(at(dt, |t| t * t));
        let (bdf, _) = st.step_bdf2_semi(&s, &load, dt).unwrap();
        assert!(max_diff(&bdf.u, &at(tn, |t| t * t)) <= 1e-10 * scale);
        // Euler from the same u^{n-1}: (t_{n-1}^2 + 2 dt t_n) g = (t_n^2 + dt^2) g.
        let (eul, _) = st.step_euler(&s, &load, dt, &picard).unwrap();
        let err = max_diff(&eul.u, &at(tn, |t| t * t));
        assert!((err - dt * dt * scale).abs() <= 1e-9 * scale, "{err}");
    }

    #[test]
    fn semi_implicit_uses_one_solve_and_implicit_uses_picard_count() {
        let f = fixture(6, 3, 1e-2, 0.05, 1.0);
        let sol = ManufacturedSolution;
        let ctx = RunContext {
            space: &f.space,
            ops: &f.ops,
            observer: &f.observer,
            exact: &sol,
            solver: SolverSettings::default(),
            c_i: 1.0,
        };
        let semi = run(&SchemeConfig::new(Scheme::Bdf2SemiImplicit, 0.1, 0.5), &ctx, InitialData::ExactInterpolant).unwrap();
        assert!(semi.linear_solves[1..].iter().all(|&k| k == 1));
        let imp = run(&SchemeConfig::new(Scheme::Bdf2Implicit, 0.1, 0.5), &ctx, InitialData::ExactInterpolant).unwrap();
        assert!(imp.picard_iters[1..].iter().all(|&k| k >= 2));
        assert_eq!(imp.picard_iters, imp.linear_solves);
        for rec in [&semi, &imp] {
            assert!(rec.div_norms[1..].iter().all(|&d| d <= 1e-8), "{:?}", rec.div_norms);
            assert_eq!(rec.len(), 6);
        }
    }

    #[test]
    fn minimal_and_zero_initial_runs() {
        let f = fixture(6, 3, 1e-6, 0.05, 1.0);
        let sol = ManufacturedSolution;
        let ctx = RunContext {
            space: &f.space,
            ops: &f.ops,
            observer: &f.observer,
            exact: &sol,
            solver: SolverSettings::default(),
            c_i: 1.0,
        };
        let rec = run(&SchemeConfig::new(Scheme::Bdf2SemiImplicit, 0.025, 0.025), &ctx, InitialData::Zero).unwrap();
        assert_eq!(rec.len(), 2);
        assert_eq!(rec.rel_vel_errors[0], 1.0);
        assert!(rec.rel_vel_errors[1] < 1.0);
        let mut buf = Vec::new();
        rec.write_csv(&mut buf, &["nu=1e-6".to_string()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# nu=1e-6");
        assert_eq!(lines[1], "# schema=1");
        assert_eq!(lines[2], RunRecord::CSV_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(run(&SchemeConfig::new(Scheme::EulerImplicit, 0.1, 0.05), &ctx, InitialData::Zero).is_err());
    }

    #[test]
    fn one_step_from_zero_regression() {
        let f = fixture(12, 3, 1e-6, 0.05, 1.0);
        let sol = ManufacturedSolution;
        let ctx = RunContext {
            space: &f.space,
            ops: &f.ops,
            observer: &f.observer,
            exact: &sol,
            solver: SolverSettings::default(),
            c_i: 1.0,
        };
        let rec = run(&SchemeConfig::new(Scheme::EulerImplicit, 0.025, 0.025), &ctx, InitialData::Zero).unwrap();
        let e = rec.rel_vel_errors[1];
        assert!(e < 1.0);
        assert!((e - FROZEN_ONE_STEP_ERROR).abs() <= 1e-10, "{e:.17e}");
    }

    const FROZEN_ONE_STEP_ERROR: f64 = 0.983546629487876078;
}
