//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for configuration and I/O errors, 2 when a
//! run fails numerically.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigSource, ExperimentConfig};
use crate::diagnostics::TheoryReport;
use crate::error::{Error, Result};
use crate::experiment::{run_on, study_space, study_time, theory_report, Discretization, StudyError, StudyResult, StudyRow};
use crate::timestepping::RunRecord;

#[derive(Debug, Parser)]
#[command(name = "cda-fem", version, about = "Nudged Navier-Stokes experiments with Taylor-Hood elements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration and write the error history.
    Run(Common),
    /// Temporal convergence study over `dt_list`.
    StudyTime(Study),
    /// Spatial convergence study over `n_list`.
    StudySpace(Study),
    /// Print gamma, L and the theorem conditions for a configuration.
    Check(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file with `key = value` lines.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (default: the `output` key, else `out`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for studies (default: available parallelism).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Study {
    #[command(flatten)]
    pub common: Common,
    /// Start from the full-scale preset (fine mesh, long horizon).
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StudyKind {
    Time,
    Space,
}

impl StudyKind {
    fn name(self) -> &'static str {
        match self {
            StudyKind::Time => "study_time",
            StudyKind::Space => "study_space",
        }
    }
}

/// Full-scale settings shared by both studies.
const FULL_BASE: [(&str, &str); 9] = [
    ("nu", "1e-6"),
    ("mu", "0.05"),
    ("beta", "1"),
    ("n", "48"),
    ("ratio", "3"),
    ("T", "40"),
    ("window", "32,40"),
    ("scheme", "bdf2_semi_implicit"),
    ("initial_data", "exact_interpolant"),
];

fn full_preset(kind: StudyKind) -> Vec<(&'static str, &'static str)> {
    let mut p = FULL_BASE.to_vec();
    match kind {
        StudyKind::Time => {
            p.push(("dt", "1/10"));
            p.push(("dt_list", "1/10,1/20,1/40,1/80,1/160"));
        }
        StudyKind::Space => {
            p.push(("dt", "1/160"));
            p.push(("n_list", "12,24,48"));
        }
    }
    p
}

/// Reads the file, then the preset, then the `--set` overrides.
pub fn load_config(path: Option<&Path>, preset: &[(&str, &str)], overrides: &[String]) -> Result<ExperimentConfig> {
    let mut src = match path {
        Some(p) => ConfigSource::from_file(p)?,
        None => ConfigSource::default(),
    };
    for (k, v) in preset {
        src.set(k, v);
    }
    src.apply_overrides(overrides)?;
    src.resolve()
}

fn out_dir(common: &Common, cfg: &ExperimentConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn jobs(common: &Common) -> Result<usize> {
    match common.jobs {
        Some(0) => Err(Error::Config {
            path: "--jobs".into(),
            line: 0,
            message: "must be at least 1".into(),
        }),
        Some(j) => Ok(j),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("output");
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(contents).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn record_csv(record: &RunRecord, cfg: &ExperimentConfig, status: Option<&str>) -> Vec<u8> {
    let mut comments = cfg.to_lines();
    if let Some(s) = status {
        comments.push(format!("status={s}"));
    }
    let mut buf = Vec::new();
    record.write_csv(&mut buf, &comments).expect("writing to memory");
    buf
}

fn header(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    for line in cfg.to_lines() {
        let _ = writeln!(s, "# {line}");
    }
    s.push_str("# schema=1\n");
    s
}

fn summary_csv(cfg: &ExperimentConfig, record: &RunRecord, report: &TheoryReport) -> Result<String> {
    let (ta, tb) = cfg.window();
    let wmax = crate::diagnostics::asymptotic_window_max(record, ta, tb)?;
    let mut s = header(cfg);
    let _ = writeln!(s, "window_max_rel_err,steps,wall_time_s,{}", TheoryReport::csv_header());
    let _ = writeln!(
        s,
        "{wmax:.16e},{},{:.3},{}",
        record.len() - 1,
        record.wall_time.as_secs_f64(),
        report.csv_row()
    );
    Ok(s)
}

fn cmd_run(common: &Common) -> Result<()> {
    let cfg = load_config(common.config.as_deref(), &[], &common.set)?;
    let out = out_dir(common, &cfg);
    let disc = Discretization::build(&cfg)?;
    let report = theory_report(&disc, &cfg, None)?;
    log::info!("gamma = {:.6e}, L = {:.6e}", report.gamma, report.inputs.l_estimate);
    match run_on(&disc, &cfg) {
        Ok(record) => {
            write_atomic(&out.join("run.csv"), &record_csv(&record, &cfg, None))?;
            write_atomic(&out.join("summary.csv"), summary_csv(&cfg, &record, &report)?.as_bytes())?;
            log::info!("{} steps in {:.2?}", record.len() - 1, record.wall_time);
            Ok(())
        }
        Err(e) => {
            let status = format!("failed at t={}: {}", e.partial.times.last().copied().unwrap_or(0.0), e.source);
            write_atomic(&out.join("run.csv"), &record_csv(&e.partial, &cfg, Some(&status)))?;
            Err(e.source)
        }
    }
}

fn study_tables(kind: StudyKind, cfg: &ExperimentConfig, rows: &[StudyRow], fit: Option<&StudyResult>) -> (String, String) {
    let var = match kind {
        StudyKind::Time => "dt",
        StudyKind::Space => "n",
    };
    let value = |r: &StudyRow| match kind {
        StudyKind::Time => format!("{:.16e}", r.dt),
        StudyKind::Space => r.n.to_string(),
    };
    let mut csv = header(cfg);
    let mut md = format!("# {}\n\n", kind.name());
    if let Some(res) = fit {
        let _ = writeln!(csv, "# slope={:.16e}", res.fit.slope);
        let _ = writeln!(md, "slope = {:.4}\n", res.fit.slope);
    } else {
        let _ = writeln!(md, "study incomplete\n");
    }
    let _ = writeln!(csv, "{var},window_max_rel_err,in_fit");
    let _ = writeln!(md, "| {var} | window max rel. error | in fit |\n|---|---|---|");
    for (i, r) in rows.iter().enumerate() {
        let used = fit.is_some_and(|f| f.fitted.contains(&i));
        let _ = writeln!(csv, "{},{:.16e},{}", value(r), r.window_max, used);
        let _ = writeln!(md, "| {} | {:.6e} | {} |", value(r), r.window_max, if used { "yes" } else { "no" });
    }
    (csv, md)
}

fn member_file(kind: StudyKind, index: usize, row: &StudyRow) -> String {
    match kind {
        StudyKind::Time => format!("run_dt{index}.csv"),
        StudyKind::Space => format!("run_n{}.csv", row.n),
    }
}

fn cmd_study(kind: StudyKind, study: &Study) -> Result<()> {
    let preset = if study.full { full_preset(kind) } else { Vec::new() };
    let common = &study.common;
    let cfg = load_config(common.config.as_deref(), &preset, &common.set)?;
    let jobs = jobs(common)?;
    let out = out_dir(common, &cfg);
    let missing = |key: &str| Error::Config {
        path: "<config>".into(),
        line: 0,
        message: format!("`{key}` is required for this study"),
    };
    let result = match kind {
        StudyKind::Time if cfg.dt_list.is_empty() => return Err(missing("dt_list")),
        StudyKind::Space if cfg.n_list.is_empty() => return Err(missing("n_list")),
        StudyKind::Time => study_time(&cfg, &cfg.dt_list, jobs),
        StudyKind::Space => study_space(&cfg, &cfg.n_list, jobs),
    };
    let (rows, fit, err) = match result {
        Ok(res) => (res.rows.clone(), Some(res), None),
        Err(StudyError { source, rows }) => (rows, None, Some(source)),
    };
    for (i, r) in rows.iter().enumerate() {
        let member = ExperimentConfig {
            n: r.n,
            dt: r.dt,
            ..cfg.clone()
        };
        write_atomic(&out.join(member_file(kind, i, r)), &record_csv(&r.record, &member, None))?;
    }
    let (csv, md) = study_tables(kind, &cfg, &rows, fit.as_ref());
    write_atomic(&out.join(format!("{}.csv", kind.name())), csv.as_bytes())?;
    write_atomic(&out.join(format!("{}.md", kind.name())), md.as_bytes())?;
    if let Some(res) = &fit {
        println!("slope = {:.4}", res.fit.slope);
    }
    err.map_or(Ok(()), Err)
}

fn cmd_check(common: &Common) -> Result<()> {
    let cfg = load_config(common.config.as_deref(), &[], &common.set)?;
    let disc = Discretization::build(&cfg)?;
    let report = theory_report(&disc, &cfg, None)?;
    print!("{}", report.to_key_value());
    if let Some(out) = common.out.clone().or_else(|| cfg.output.clone()) {
        let mut s = header(&cfg);
        let _ = writeln!(s, "{}\n{}", TheoryReport::csv_header(), report.csv_row());
        write_atomic(&out.join("check.csv"), s.as_bytes())?;
    }
    Ok(())
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::StudyTime(s) => cmd_study(StudyKind::Time, s),
        Command::StudySpace(s) => cmd_study(StudyKind::Space, s),
        Command::Check(c) => cmd_check(c),
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_sits_between_file_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        fs::write(&path, "nu = 1\nmu = 0\nn = 6\ndt = 0.5\nT = 1\n").unwrap();
        let cfg = load_config(Some(&path), &[("n", "12"), ("mu", "0.1")], &["mu=0.2".to_string()]).unwrap();
        assert_eq!((cfg.n, cfg.mu, cfg.nu), (12, 0.2, 1.0));
    }

    #[test]
    fn full_presets_resolve() {
        for kind in [StudyKind::Time, StudyKind::Space] {
            let cfg = load_config(None, &full_preset(kind), &[]).unwrap();
            assert_eq!(cfg.n, 48);
            assert!(!cfg.dt_list.is_empty() || !cfg.n_list.is_empty());
            assert!(cfg.n_list.iter().all(|n| n % cfg.ratio == 0));
        }
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("a.csv");
        write_atomic(&p, b"x\n").unwrap();
        write_atomic(&p, b"y\n").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "y\n");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn exit_codes_follow_error_class() {
        let cfg_err = load_config(None, &[], &[]).unwrap_err();
        assert_eq!(exit_code(&cfg_err), 1);
        assert_eq!(exit_code(&Error::SingularSystem("x".into())), 2);
    }
}
