//! Manufactured-solution experiments: one run, temporal and spatial studies,
//! and the theory report for a configuration.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::assembly::{assemble_constant_operators, OperatorSet};
use crate::config::ExperimentConfig;
use crate::diagnostics::{
    asymptotic_window_max, check_conditions, estimate_l, estimate_l_semi, fit_slope, fit_temporal_slope,
    plateau_reached, ConditionInputs, SlopeFit, TheoryReport,
};
use crate::error::{Error, Result};
use crate::mesh::{build_coarse_partition, build_uniform_mesh, TriMesh};
use crate::mms::{ManufacturedSolution, VelocityField};
use crate::observer::{build_observer, CoarseObserver, NudgingMatrixSpec};
use crate::space::{build_mixed_space, MixedSpace};
use crate::timestepping::{run_until, RunContext, RunError, RunRecord};

/// Mesh, spaces and operators for one `(n, ratio, observer, nu, mu, beta)`.
pub struct Discretization {
    pub mesh: TriMesh,
    pub space: MixedSpace,
    pub observer: CoarseObserver,
    pub ops: OperatorSet,
}

impl Discretization {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let mesh = build_uniform_mesh(cfg.n)?;
        let space = build_mixed_space(&mesh)?;
        let partition = build_coarse_partition(&mesh, cfg.ratio)?;
        let observer = build_observer(cfg.observer, &partition, &space)?;
        let nudge = NudgingMatrixSpec::new(cfg.beta, observer.clone())?;
        let ops = assemble_constant_operators(&mesh, &space, cfg.nu, cfg.mu, &nudge)?;
        Ok(Self {
            mesh,
            space,
            observer,
            ops,
        })
    }

    pub fn context<'a>(&'a self, cfg: &ExperimentConfig, exact: &'a ManufacturedSolution) -> RunContext<'a> {
        RunContext {
            space: &self.space,
            ops: &self.ops,
            observer: &self.observer,
            exact,
            solver: cfg.solver,
            c_i: cfg.c_i,
        }
    }
}

fn run_error(source: Error) -> RunError {
    RunError {
        source,
        partial: Box::default(),
    }
}

/// Runs `cfg` on an existing discretization.
pub fn run_on(disc: &Discretization, cfg: &ExperimentConfig) -> Result<RunRecord, RunError> {
    let exact = ManufacturedSolution;
    run_until(&cfg.scheme_config(), &disc.context(cfg, &exact), cfg.initial_data, |_| false)
}

/// Builds the discretization and runs `cfg`.
pub fn run_config(cfg: &ExperimentConfig) -> Result<RunRecord, RunError> {
    let disc = Discretization::build(cfg).map_err(run_error)?;
    run_on(&disc, cfg)
}

/// Runs up to `cfg.t_final`, stopping early once the window maxima over the
/// last two windows of length `width` (checked at multiples of `width`)
/// agree to `rel_tol`.
pub fn run_until_plateau(cfg: &ExperimentConfig, width: f64, rel_tol: f64) -> Result<RunRecord, RunError> {
    let disc = Discretization::build(cfg).map_err(run_error)?;
    let exact = ManufacturedSolution;
    let per_window = (width / cfg.dt).round().max(1.0) as usize;
    run_until(&cfg.scheme_config(), &disc.context(cfg, &exact), cfg.initial_data, |rec| {
        let steps = rec.len() - 1;
        steps % per_window == 0 && plateau_reached(rec, width, rel_tol).unwrap_or(false)
    })
}

/// One member of a convergence study.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub n: usize,
    pub dt: f64,
    pub window_max: f64,
    pub record: RunRecord,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub fit: SlopeFit,
    /// Indices of the rows used in the fit.
    pub fitted: Vec<usize>,
}

/// A study that stopped on a failing member; `rows` holds the members that
/// completed.
#[derive(Debug)]
pub struct StudyError {
    pub source: Error,
    pub rows: Vec<StudyRow>,
}

impl std::fmt::Display for StudyError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "study failed ({} members completed): {}", self.rows.len(), self.source)
    }
}

impl std::error::Error for StudyError {}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidState(format!("cannot start worker pool: {e}")))
}

fn distinct<T: PartialEq + Copy + std::fmt::Display>(values: &[T], what: &str) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::invalid(format!("a study needs at least two {what} values")));
    }
    for (i, a) in values.iter().enumerate() {
        if values[..i].contains(a) {
            return Err(Error::invalid(format!("{what} value {a} appears twice")));
        }
    }
    Ok(())
}

fn collect_rows(results: Vec<Result<StudyRow, Error>>) -> Result<Vec<StudyRow>, StudyError> {
    let mut rows = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(source) => Err(StudyError { source, rows }),
        None => Ok(rows),
    }
}

fn window_row(cfg: &ExperimentConfig, record: RunRecord) -> Result<StudyRow> {
    let (ta, tb) = cfg.window();
    Ok(StudyRow {
        n: cfg.n,
        dt: cfg.dt,
        window_max: asymptotic_window_max(&record, ta, tb)?,
        record,
    })
}

/// Runs `cfg` for every `dt` on one shared discretization and fits the
/// pre-plateau slope of the window-max error against `dt`.
pub fn study_time(cfg: &ExperimentConfig, dts: &[f64], jobs: usize) -> Result<StudyResult, StudyError> {
    let fail = |source| StudyError { source, rows: Vec::new() };
    distinct(dts, "dt").map_err(fail)?;
    let disc = Discretization::build(cfg).map_err(fail)?;
    let results: Vec<Result<StudyRow, Error>> = pool(jobs).map_err(fail)?.install(|| {
        dts.par_iter()
            .map(|&dt| {
                let member = ExperimentConfig { dt, ..cfg.clone() };
                let record = run_on(&disc, &member).map_err(|e| e.source)?;
                window_row(&member, record)
            })
            .collect()
    });
    let rows = collect_rows(results)?;
    let xs: Vec<f64> = rows.iter().map(|r| r.dt).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.window_max).collect();
    let fitted = crate::diagnostics::pre_plateau_window(&xs, &ys).map_err(fail)?;
    let fit = fit_temporal_slope(&xs, &ys).map_err(fail)?;
    Ok(StudyResult { rows, fit, fitted })
}

/// Runs `cfg` on every mesh in `ns` and fits the window-max error against `h`.
pub fn study_space(cfg: &ExperimentConfig, ns: &[usize], jobs: usize) -> Result<StudyResult, StudyError> {
    let fail = |source| StudyError { source, rows: Vec::new() };
    distinct(ns, "n").map_err(fail)?;
    if let Some(&n) = ns.iter().find(|&&n| n % cfg.ratio != 0) {
        return Err(fail(Error::invalid(format!("ratio {} does not divide n = {n}", cfg.ratio))));
    }
    let results: Vec<Result<StudyRow, Error>> = pool(jobs).map_err(fail)?.install(|| {
        ns.par_iter()
            .map(|&n| {
                let member = ExperimentConfig { n, ..cfg.clone() };
                let record = run_config(&member).map_err(|e| e.source)?;
                window_row(&member, record)
            })
            .collect()
    });
    let rows = collect_rows(results)?;
    let xs: Vec<f64> = rows.iter().map(|r| 1.0 / r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.window_max).collect();
    let fit = fit_slope(&xs, &ys).map_err(fail)?;
    Ok(StudyResult {
        fitted: (0..rows.len()).collect(),
        rows,
        fit,
    })
}

/// Time levels at which the reference field is sampled for `L`: one period
/// of the amplitude, in eight intervals.
pub fn reference_times() -> Vec<f64> {
    (0..=8).map(|k| k as f64 * FRAC_PI_2 / 8.0).collect()
}

/// Theory report with `L` and `L'` estimated from the interpolated reference
/// solution, or from `history` when given.
pub fn theory_report(disc: &Discretization, cfg: &ExperimentConfig, history: Option<&[Vec<f64>]>) -> Result<TheoryReport> {
    let sampled;
    let fields = match history {
        Some(h) => h,
        None => {
            let exact = ManufacturedSolution;
            sampled = reference_times()
                .into_iter()
                .map(|t| disc.space.interpolate_velocity(|p| exact.velocity(p[0], p[1], t)))
                .collect::<Vec<_>>();
            &sampled
        }
    };
    let l = estimate_l(&disc.space, fields, cfg.nu, cfg.mu)?;
    let l_semi = estimate_l_semi(&disc.space, fields, cfg.nu, cfg.mu)?;
    check_conditions(ConditionInputs {
        nu: cfg.nu,
        mu: cfg.mu,
        beta: cfg.beta,
        h_coarse: cfg.h_coarse(),
        dt: cfg.dt,
        l_estimate: l,
        l_semi: Some(l_semi),
        c_i: cfg.c_i,
        delta: cfg.delta(),
    })
}
