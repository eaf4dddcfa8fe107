//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Command-line
//! overrides are applied after the file, so the later value wins.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linsolve::{SolverMethod, SolverSettings};
use crate::mms::InitialData;
use crate::observer::ObserverKind;
use crate::timestepping::{PicardSettings, Scheme, SchemeConfig};

const REQUIRED: [&str; 5] = ["nu", "mu", "n", "dt", "T"];

const KNOWN: [&str; 23] = [
    "nu",
    "mu",
    "beta",
    "n",
    "ratio",
    "dt",
    "T",
    "scheme",
    "observer",
    "initial_data",
    "window",
    "solver",
    "solver_rel_tol",
    "solver_max_iter",
    "solver_restart",
    "picard_rel_tol",
    "picard_abs_tol",
    "picard_max_iter",
    "c_i",
    "delta",
    "dt_list",
    "n_list",
    "output",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub nu: f64,
    pub mu: f64,
    pub beta: f64,
    pub n: usize,
    /// `H / h`.
    pub ratio: usize,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub observer: ObserverKind,
    pub initial_data: InitialData,
    /// Error window `[t_a, t_b]`; defaults to the last eighth of the horizon.
    pub window: Option<(f64, f64)>,
    pub solver: SolverSettings,
    pub picard: PicardSettings,
    pub c_i: f64,
    /// Semi-implicit analysis parameter; defaults by `mu`.
    pub delta: Option<f64>,
    pub dt_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub output: Option<PathBuf>,
}

/// One `key = value` entry and where it came from.
#[derive(Debug, Clone)]
struct Entry {
    value: String,
    source: String,
    line: usize,
}

/// Raw entries before validation.
#[derive(Debug, Clone, Default)]
pub struct ConfigSource {
    entries: BTreeMap<String, Entry>,
}

impl ConfigSource {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut src = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            src.insert_line(line, origin, i + 1, true)?;
        }
        Ok(src)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Applies `KEY=VALUE` overrides; the `n`-th override reports line `n`.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for (i, o) in overrides.iter().enumerate() {
            self.insert_line(o.as_ref(), "--set", i + 1, false)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                source: "preset".into(),
                line: 0,
            },
        );
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn insert_line(&mut self, line: &str, origin: &str, lineno: usize, reject_duplicates: bool) -> Result<()> {
        let err = |message: String| Error::Config {
            path: origin.to_string(),
            line: lineno,
            message,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KNOWN.contains(&k) {
            return Err(err(format!("unknown key `{k}`")));
        }
        if v.is_empty() {
            return Err(err(format!("empty value for `{k}`")));
        }
        if reject_duplicates {
            if let Some(prev) = self.entries.get(k) {
                if prev.source == origin {
                    return Err(err(format!("duplicate key `{k}` (first set on line {})", prev.line)));
                }
            }
        }
        self.entries.insert(
            k.to_string(),
            Entry {
                value: v.to_string(),
                source: origin.to_string(),
                line: lineno,
            },
        );
        Ok(())
    }

    fn error(&self, key: &str, message: String) -> Error {
        match self.entries.get(key) {
            Some(e) => Error::Config {
                path: e.source.clone(),
                line: e.line,
                message,
            },
            None => Error::Config {
                path: "<config>".into(),
                line: 0,
                message,
            },
        }
    }

    fn get<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .map_err(|m| self.error(key, format!("invalid value `{}` for `{key}`: {m}", e.value))),
        }
    }

    fn require<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T> {
        self.get(key, parse)?
            .ok_or_else(|| self.error(key, format!("missing required key `{key}`")))
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        for key in REQUIRED {
            if !self.entries.contains_key(key) {
                return Err(Error::Config {
                    path: "<config>".into(),
                    line: 0,
                    message: format!("missing required key `{key}`"),
                });
            }
        }
        let defaults = SolverSettings::default();
        let picard = PicardSettings::default();
        let cfg = ExperimentConfig {
            nu: self.require("nu", parse_number)?,
            mu: self.require("mu", parse_number)?,
            beta: self.get("beta", parse_number)?.unwrap_or(1.0),
            n: self.require("n", parse_from_str)?,
            ratio: self.get("ratio", parse_from_str)?.unwrap_or(3),
            dt: self.require("dt", parse_number)?,
            t_final: self.require("T", parse_number)?,
            scheme: self.get("scheme", parse_from_str)?.unwrap_or(Scheme::Bdf2SemiImplicit),
            observer: self.get("observer", parse_from_str)?.unwrap_or(ObserverKind::CellAverage),
            initial_data: self.get("initial_data", parse_from_str)?.unwrap_or(InitialData::Zero),
            window: self.get("window", |s| {
                let v = parse_list(s, parse_number)?;
                match v.as_slice() {
                    [a, b] => Ok((*a, *b)),
                    _ => Err("expected `t_a, t_b`".into()),
                }
            })?,
            solver: SolverSettings {
                method: self.get("solver", parse_from_str::<SolverMethod>)?.unwrap_or(defaults.method),
                rel_tol: self.get("solver_rel_tol", parse_number)?.unwrap_or(defaults.rel_tol),
                max_iter: self.get("solver_max_iter", parse_from_str)?.unwrap_or(defaults.max_iter),
                restart: self.get("solver_restart", parse_from_str)?.unwrap_or(defaults.restart),
            },
            picard: PicardSettings {
                rel_tol: self.get("picard_rel_tol", parse_number)?.unwrap_or(picard.rel_tol),
                abs_tol: self.get("picard_abs_tol", parse_number)?.unwrap_or(picard.abs_tol),
                max_iter: self.get("picard_max_iter", parse_from_str)?.unwrap_or(picard.max_iter),
            },
            c_i: self.get("c_i", parse_number)?.unwrap_or(1.0),
            delta: self.get("delta", parse_number)?,
            dt_list: self.get("dt_list", |s| parse_list(s, parse_number))?.unwrap_or_default(),
            n_list: self.get("n_list", |s| parse_list(s, parse_from_str))?.unwrap_or_default(),
            output: self.get("output", |s| Ok(PathBuf::from(s)))?,
        };
        self.validate(&cfg)?;
        Ok(cfg)
    }

    fn validate(&self, c: &ExperimentConfig) -> Result<()> {
        let check = |ok: bool, key: &str, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(self.error(key, format!("`{key}` {what}")))
            }
        };
        check(c.nu > 0.0 && c.nu.is_finite(), "nu", "must be positive")?;
        check(c.mu >= 0.0 && c.mu.is_finite(), "mu", "must be non-negative")?;
        check(c.beta >= 0.0 && c.beta.is_finite(), "beta", "must be non-negative")?;
        check(c.n >= 1, "n", "must be at least 1")?;
        check(c.ratio >= 1 && c.n % c.ratio == 0, "ratio", "must divide n")?;
        check(c.dt > 0.0 && c.dt.is_finite(), "dt", "must be positive")?;
        check(c.t_final >= c.dt && c.t_final.is_finite(), "T", "must be at least dt")?;
        check(c.c_i > 0.0, "c_i", "must be positive")?;
        check(c.delta.is_none_or(|d| d > 0.0), "delta", "must be positive")?;
        check(c.solver.rel_tol > 0.0, "solver_rel_tol", "must be positive")?;
        check(c.picard.max_iter >= 1, "picard_max_iter", "must be at least 1")?;
        if let Some((a, b)) = c.window {
            check(0.0 <= a && a <= b && b <= c.t_final * (1.0 + 1e-12), "window", "must satisfy 0 <= t_a <= t_b <= T")?;
        }
        check(c.dt_list.iter().all(|&d| d > 0.0), "dt_list", "entries must be positive")?;
        check(c.n_list.iter().all(|&n| n >= 1), "n_list", "entries must be positive")?;
        Ok(())
    }
}

fn parse_from_str<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

/// A float, or a fraction `a/b`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            a / b
        }
        None => s.parse().map_err(|e| format!("{e}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err("not a finite number".into())
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split(',').map(|x| item(x.trim())).collect()
}

impl ExperimentConfig {
    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            scheme: self.scheme,
            dt: self.dt,
            t_final: self.t_final,
            picard: self.picard,
        }
    }

    pub fn window(&self) -> (f64, f64) {
        self.window.unwrap_or((self.t_final * 7.0 / 8.0, self.t_final))
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or_else(|| crate::diagnostics::default_delta(self.mu))
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn h_coarse(&self) -> f64 {
        self.ratio as f64 / self.n as f64
    }

    /// Fully resolved `key=value` lines, suitable for comment headers and
    /// for parsing back.
    pub fn to_lines(&self) -> Vec<String> {
        let list = |v: Vec<String>| v.join(",");
        let (a, b) = self.window();
        let mut out = vec![
            format!("nu={}", self.nu),
            format!("mu={}", self.mu),
            format!("beta={}", self.beta),
            format!("n={}", self.n),
            format!("ratio={}", self.ratio),
            format!("dt={}", self.dt),
            format!("T={}", self.t_final),
            format!("scheme={}", self.scheme),
            format!("observer={}", self.observer),
            format!("initial_data={}", self.initial_data),
            format!("window={a},{b}"),
            format!("solver={}", self.solver.method),
            format!("solver_rel_tol={}", self.solver.rel_tol),
            format!("solver_max_iter={}", self.solver.max_iter),
            format!("solver_restart={}", self.solver.restart),
            format!("picard_rel_tol={}", self.picard.rel_tol),
            format!("picard_abs_tol={}", self.picard.abs_tol),
            format!("picard_max_iter={}", self.picard.max_iter),
            format!("c_i={}", self.c_i),
            format!("delta={}", self.delta()),
        ];
        if !self.dt_list.is_empty() {
            out.push(format!("dt_list={}", list(self.dt_list.iter().map(|v| v.to_string()).collect())));
        }
        if !self.n_list.is_empty() {
            out.push(format!("n_list={}", list(self.n_list.iter().map(|v| v.to_string()).collect())));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "# default setup\nnu = 1e-6\nmu = 0.05\nn = 12\ndt = 1/40\nT = 1\n";

    #[test]
    fn defaults_and_fractions() {
        let c = ConfigSource::parse(BASE, "base.cfg").unwrap().resolve().unwrap();
        assert_eq!(c.beta, 1.0);
        assert_eq!(c.ratio, 3);
        assert_eq!(c.observer, ObserverKind::CellAverage);
        assert_eq!(c.scheme, Scheme::Bdf2SemiImplicit);
        assert_eq!(c.initial_data, InitialData::Zero);
        assert_eq!(c.dt, 0.025);
        assert_eq!(c.window(), (0.875, 1.0));
        assert_eq!(c.delta(), 1.0 / 12.0);
    }

    #[test]
    fn missing_key_is_named() {
        let err = ConfigSource::parse("mu = 0\nn = 4\ndt = 0.1\nT = 1\n", "x.cfg").unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("`nu`"), "{err}");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = ConfigSource::parse("nu = 1\n\nbogus = 3\n", "x.cfg").unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }), "{err}");
        let err = ConfigSource::parse("nu = 1\nnu = 2\n", "x.cfg").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let err = ConfigSource::parse(&format!("{BASE}beta = -1\n"), "x.cfg").unwrap().resolve().unwrap_err();
        assert!(matches!(err, Error::Config { line: 7, .. }), "{err}");
        let err = ConfigSource::parse(&format!("{BASE}scheme = rk4\n"), "x.cfg").unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("rk4"));
    }

    #[test]
    fn overrides_win_and_roundtrip() {
        let mut src = ConfigSource::parse(BASE, "base.cfg").unwrap();
        src.apply_overrides(&["beta=2", "scheme=euler_implicit", "dt_list=1/10,1/20"]).unwrap();
        let c = src.resolve().unwrap();
        assert_eq!(c.beta, 2.0);
        assert_eq!(c.scheme, Scheme::EulerImplicit);
        assert_eq!(c.dt_list, vec![0.1, 0.05]);
        let text = c.to_lines().join("\n");
        let back = ConfigSource::parse(&text, "echo").unwrap().resolve().unwrap();
        assert_eq!(back.to_lines(), c.to_lines());
        assert!(src.apply_overrides(&["noequals"]).is_err());
    }

    #[test]
    fn ratio_must_divide_n() {
        let mut src = ConfigSource::parse(BASE, "base.cfg").unwrap();
        src.apply_overrides(&["ratio=5"]).unwrap();
        assert!(src.resolve().is_err());
    }
}
