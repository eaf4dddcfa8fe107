//! Hypothesis quantities of the error analysis and convergence-rate fitting.
//!
//! Sup norms of discrete fields are sampled at the degree-6 quadrature points
//! and the vertices of every cell; this is a surrogate for the true maxima.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use crate::space::MixedSpace;
use crate::timestepping::RunRecord;

/// `gamma = min(nu / (4 c_I^2 H^2), beta / 4)`.
pub fn compute_gamma(nu: f64, h_coarse: f64, beta: f64, c_i: f64) -> Result<f64> {
    for (name, v) in [("nu", nu), ("H", h_coarse), ("beta", beta), ("c_I", c_i)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(gamma_unchecked(nu, h_coarse, beta, c_i))
}

fn gamma_unchecked(nu: f64, h_coarse: f64, beta: f64, c_i: f64) -> f64 {
    (nu / (4.0 * c_i * c_i * h_coarse * h_coarse)).min(beta / 4.0)
}

/// Sampled `||w||_inf` (pointwise Euclidean norm) and `||grad w||_inf`
/// (pointwise Frobenius norm).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SupNorms {
    pub value: f64,
    pub gradient: f64,
}

pub fn sup_norms(space: &MixedSpace, w: &[f64]) -> SupNorms {
    let rule = QuadratureRule::degree6();
    let mut samples: Vec<[f64; 3]> = rule.points.clone();
    samples.extend([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    let mut out = SupNorms::default();
    for c in 0..space.mesh().num_cells() {
        let geo = space.geometry(c);
        for l in &samples {
            let (val, grad) = space.eval_velocity_in_cell(w, c, &geo, l);
            out.value = out.value.max(val[0].hypot(val[1]));
            let g2: f64 = grad.iter().flatten().map(|v| v * v).sum();
            out.gradient = out.gradient.max(g2.sqrt());
        }
    }
    out
}

/// `L_hat(w, eps) = ||grad w||_inf / 2 + ||w||_inf^2 / (4 eps)`.
pub fn l_hat(norms: SupNorms, eps: f64) -> f64 {
    0.5 * norms.gradient + norms.value * norms.value / (4.0 * eps)
}

/// `L` of the implicit schemes, maximized over the recorded time levels.
///
/// With `mu = 0`: `L_hat(w, nu) + ||grad w||_inf / 2`; with `mu > 0`:
/// `2 L_hat(w, mu) + ||grad w||_inf`.
pub fn estimate_l(space: &MixedSpace, history: &[Vec<f64>], nu: f64, mu: f64) -> Result<f64> {
    let norms = history_norms(space, history, nu, mu)?;
    Ok(norms
        .iter()
        .map(|&n| if mu > 0.0 { 2.0 * l_hat(n, mu) + n.gradient } else { l_hat(n, nu) + 0.5 * n.gradient })
        .fold(0.0, f64::max))
}

/// `L'` of the semi-implicit scheme: `max L_hat(w, nu)` (`mu = 0`) or
/// `2 max L_hat(w, mu)` (`mu > 0`).
pub fn estimate_l_semi(space: &MixedSpace, history: &[Vec<f64>], nu: f64, mu: f64) -> Result<f64> {
    let norms = history_norms(space, history, nu, mu)?;
    Ok(norms
        .iter()
        .map(|&n| if mu > 0.0 { 2.0 * l_hat(n, mu) } else { l_hat(n, nu) })
        .fold(0.0, f64::max))
}

fn history_norms(space: &MixedSpace, history: &[Vec<f64>], nu: f64, mu: f64) -> Result<Vec<SupNorms>> {
    if history.is_empty() {
        return Err(Error::invalid("estimating L needs at least one field"));
    }
    if !(nu > 0.0) || !(mu >= 0.0) {
        return Err(Error::invalid("estimating L needs nu > 0 and mu >= 0"));
    }
    if let Some(w) = history.iter().find(|w| w.len() != space.n_vel()) {
        return Err(Error::invalid(format!(
            "field has {} coefficients, expected {}",
            w.len(),
            space.n_vel()
        )));
    }
    Ok(history.iter().map(|w| sup_norms(space, w)).collect())
}

/// Default semi-implicit analysis parameter.
pub fn default_delta(mu: f64) -> f64 {
    if mu > 0.0 {
        1.0 / 12.0
    } else {
        1.0 / 48.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionInputs {
    pub nu: f64,
    pub mu: f64,
    pub beta: f64,
    pub h_coarse: f64,
    pub dt: f64,
    pub l_estimate: f64,
    /// `L'` for the semi-implicit checks; skipped when absent.
    pub l_semi: Option<f64>,
    pub c_i: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub inputs: ConditionInputs,
    pub gamma: f64,
    pub beta_ge_8l: bool,
    pub h_condition: bool,
    pub dt_bdf2_implicit: bool,
    pub dt_bdf2_semi: bool,
    pub beta_ge_8l_semi: Option<bool>,
    pub h_condition_semi: Option<bool>,
}

/// Evaluates the hypotheses of the error bounds. Advisory only.
///
/// `beta = 0` gives `gamma = 0`, for which the time-step bounds are vacuous.
pub fn check_conditions(inputs: ConditionInputs) -> Result<TheoryReport> {
    let ConditionInputs {
        nu,
        mu,
        beta,
        h_coarse,
        dt,
        l_estimate,
        l_semi,
        c_i,
        delta,
    } = inputs;
    for (name, v) in [("nu", nu), ("H", h_coarse), ("dt", dt), ("c_I", c_i), ("delta", delta)] {
        if !(v > 0.0) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    for (name, v) in [("mu", mu), ("beta", beta), ("L", l_estimate), ("L'", l_semi.unwrap_or(0.0))] {
        if !(v >= 0.0) {
            return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
        }
    }
    let gamma = gamma_unchecked(nu, h_coarse, beta, c_i);
    let h_bound = |l: f64, scale: f64| -> bool {
        // H <= sqrt(nu scale) / (sqrt(8 L) c_I), written without dividing by L.
        h_coarse * c_i * (8.0 * l).sqrt() <= (nu * scale).sqrt()
    };
    Ok(TheoryReport {
        inputs,
        gamma,
        beta_ge_8l: beta >= 8.0 * l_estimate,
        h_condition: h_bound(l_estimate, 1.0),
        dt_bdf2_implicit: dt * gamma <= 24.0,
        dt_bdf2_semi: dt * gamma <= 12.0,
        beta_ge_8l_semi: l_semi.map(|l| beta * delta >= 8.0 * l),
        h_condition_semi: l_semi.map(|l| h_bound(l, delta)),
    })
}

impl TheoryReport {
    fn entries(&self) -> Vec<(&'static str, String)> {
        let i = &self.inputs;
        let opt = |b: Option<bool>| b.map_or_else(|| "na".to_string(), |v| v.to_string());
        vec![
            ("gamma", format!("{:.16e}", self.gamma)),
            ("L_estimate", format!("{:.16e}", i.l_estimate)),
            ("L_semi_estimate", i.l_semi.map_or_else(|| "na".into(), |v| format!("{v:.16e}"))),
            ("L_sampling", "degree6_quadrature_points_and_vertices".into()),
            ("c_I_assumed", format!("{}", i.c_i)),
            ("delta", format!("{}", i.delta)),
            ("beta_ge_8L", self.beta_ge_8l.to_string()),
            ("H_condition", self.h_condition.to_string()),
            ("dt_bdf2_implicit", self.dt_bdf2_implicit.to_string()),
            ("dt_bdf2_semi", self.dt_bdf2_semi.to_string()),
            ("beta_ge_8L_semi", opt(self.beta_ge_8l_semi)),
            ("H_condition_semi", opt(self.h_condition_semi)),
        ]
    }

    /// `key = value` lines.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn csv_header() -> String {
        let dummy = TheoryReport {
            inputs: ConditionInputs {
                nu: 1.0,
                mu: 0.0,
                beta: 0.0,
                h_coarse: 1.0,
                dt: 1.0,
                l_estimate: 0.0,
                l_semi: None,
                c_i: 1.0,
                delta: 1.0,
            },
            gamma: 0.0,
            beta_ge_8l: false,
            h_condition: false,
            dt_bdf2_implicit: false,
            dt_bdf2_semi: false,
            beta_ge_8l_semi: None,
            h_condition_semi: None,
        };
        dummy.entries().iter().map(|(k, _)| *k).collect::<Vec<_>>().join(",")
    }

    pub fn csv_row(&self) -> String {
        self.entries().into_iter().map(|(_, v)| v).collect::<Vec<_>>().join(",")
    }
}

/// Least-squares line through `(log x, log y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation from the fitted line in log space.
    pub residual: f64,
}

pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("slope fit needs as many ordinates as abscissae"));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("slope fit needs at least two points"));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("slope fit needs positive finite data"));
    }
    let points: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 1e-24 * (1.0 + mx * mx) {
        return Err(Error::invalid("slope fit needs at least two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(SlopeFit {
        points,
        slope,
        intercept,
        residual,
    })
}

/// Indices (into the input) of the points used for a temporal slope fit.
///
/// Points are ordered from coarse to fine step; while more than two remain,
/// the finest is dropped if its error is within 10% of the next coarser one.
pub fn pre_plateau_window(dts: &[f64], errors: &[f64]) -> Result<Vec<usize>> {
    if dts.len() != errors.len() || dts.len() < 2 {
        return Err(Error::invalid("pre-plateau window needs at least two (dt, error) pairs"));
    }
    let mut idx: Vec<usize> = (0..dts.len()).collect();
    idx.sort_by(|&a, &b| dts[b].total_cmp(&dts[a]));
    while idx.len() > 2 {
        let fine = errors[idx[idx.len() - 1]];
        let coarse = errors[idx[idx.len() - 2]];
        if (coarse - fine).abs() < 0.1 * coarse.abs() {
            idx.pop();
        } else {
            break;
        }
    }
    Ok(idx)
}

/// Slope over the pre-plateau window.
pub fn fit_temporal_slope(dts: &[f64], errors: &[f64]) -> Result<SlopeFit> {
    let idx = pre_plateau_window(dts, errors)?;
    let xs: Vec<f64> = idx.iter().map(|&i| dts[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| errors[i]).collect();
    fit_slope(&xs, &ys)
}

/// Maximum relative velocity error over the steps with `t in [ta, tb]`.
pub fn asymptotic_window_max(record: &RunRecord, ta: f64, tb: f64) -> Result<f64> {
    let tol = 1e-9 * tb.abs().max(1.0);
    record
        .times
        .iter()
        .zip(&record.rel_vel_errors)
        .filter(|(&t, _)| t >= ta - tol && t <= tb + tol)
        .map(|(_, &e)| e)
        .reduce(f64::max)
        .ok_or_else(|| Error::invalid(format!("no recorded step lies in the window [{ta}, {tb}]")))
}

/// Compares window maxima over the last two windows of length `width`; the
/// run is on its plateau when they agree to `rel_tol`.
pub fn plateau_reached(record: &RunRecord, width: f64, rel_tol: f64) -> Result<bool> {
    let t_end = *record.times.last().ok_or_else(|| Error::invalid("empty run record"))?;
    if t_end < 2.0 * width {
        return Ok(false);
    }
    let last = asymptotic_window_max(record, t_end - width, t_end)?;
    let prev = asymptotic_window_max(record, t_end - 2.0 * width, t_end - width)?;
    Ok((last - prev).abs() <= rel_tol * last.max(prev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_mesh;
    use crate::mms::{ManufacturedSolution, VelocityField};
    use crate::space::build_mixed_space;
    use proptest::prelude::*;

    fn record(times: Vec<f64>, errs: Vec<f64>) -> RunRecord {
        let n = times.len();
        RunRecord {
            times,
            rel_vel_errors: errs,
            div_norms: vec![0.0; n],
            picard_iters: vec![0; n],
            linear_solves: vec![0; n],
            wall_time: std::time::Duration::ZERO,
        }
    }

    #[test]
    fn gamma_examples() {
        assert!((compute_gamma(1e-6, 1.0 / 16.0, 1.0, 1.0).unwrap() - 6.4e-5).abs() < 1e-18);
        assert!((compute_gamma(1e-2, 0.25, 1.0, 1.0).unwrap() - 0.04).abs() < 1e-16);
        assert_eq!(compute_gamma(1e-2, 0.25, 1e9, 1.0).unwrap(), 1e-2 / (4.0 * 0.0625));
        assert!(compute_gamma(0.0, 0.25, 1.0, 1.0).is_err());
        assert!(compute_gamma(1.0, 0.25, -1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn gamma_is_monotone(nu in 1e-8f64..1.0, h in 0.01f64..1.0, beta in 0.01f64..10.0, ci in 0.1f64..10.0, s in 1.0f64..4.0) {
            let g = compute_gamma(nu, h, beta, ci).unwrap();
            prop_assert!(compute_gamma(nu * s, h, beta, ci).unwrap() >= g);
            prop_assert!(compute_gamma(nu, h, beta * s, ci).unwrap() >= g);
            prop_assert!(compute_gamma(nu, h * s, beta, ci).unwrap() <= g);
            prop_assert!(compute_gamma(nu, h, beta, ci * s).unwrap() <= g);
        }

        #[test]
        fn slope_is_exact_on_power_laws(p in -4.0f64..4.0, c in 0.01f64..100.0, seed in 0u64..1000) {
            let mut xs = vec![1.0, 0.5, 0.25, 0.125, 0.0625];
            let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(p)).collect();
            let fit = fit_slope(&xs, &ys).unwrap();
            prop_assert!((fit.slope - p).abs() < 1e-12);
            // Order of the points does not matter.
            let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
            pairs.rotate_left((seed % 5) as usize);
            pairs.swap(0, (seed % 3) as usize + 1);
            xs = pairs.iter().map(|p| p.0).collect();
            let ys2: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let fit2 = fit_slope(&xs, &ys2).unwrap();
            prop_assert!((fit2.slope - fit.slope).abs() < 1e-12);
        }

        #[test]
        fn l_scales_superlinearly(s in 1.0f64..5.0, mu in prop::sample::select(vec![0.0, 0.05])) {
            let mesh = build_uniform_mesh(3).unwrap();
            let space = build_mixed_space(&mesh).unwrap();
            let sol = ManufacturedSolution;
            let w = space.interpolate_velocity(|p| sol.velocity(p[0], p[1], 0.2));
            let ws: Vec<f64> = w.iter().map(|v| s * v).collect();
            let l1 = estimate_l(&space, &[w], 1e-2, mu).unwrap();
            let ls = estimate_l(&space, &[ws], 1e-2, mu).unwrap();
            prop_assert!(ls >= s * l1 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn slope_of_squares() {
        let xs = [0.1, 0.05, 0.025, 0.0125];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let fit = fit_slope(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert!(fit_slope(&[0.1], &[0.2]).is_err());
        assert!(fit_slope(&[0.1, 0.1], &[0.2, 0.3]).is_err());
        assert!(fit_slope(&[0.1, 0.2], &[0.0, 0.3]).is_err());
    }

    #[test]
    fn plateau_window_drops_flat_tail() {
        // Second order until the last halving, which stalls.
        let dts = [0.1, 0.05, 0.025, 0.0125];
        let errs = [4e-2, 1.1e-2, 2.9e-3, 2.8e-3];
        let idx = pre_plateau_window(&dts, &errs).unwrap();
        assert_eq!(idx, vec![0, 1, 2]);
        let fit = fit_temporal_slope(&dts, &errs).unwrap();
        assert!((1.7..=2.1).contains(&fit.slope), "{}", fit.slope);
        // Order of input is irrelevant.
        let fit2 = fit_temporal_slope(&[0.0125, 0.1, 0.025, 0.05], &[2.8e-3, 4e-2, 2.9e-3, 1.1e-2]).unwrap();
        assert!((fit2.slope - fit.slope).abs() < 1e-14);
    }

    #[test]
    fn l_of_zero_and_constant_fields() {
        let mesh = build_uniform_mesh(2).unwrap();
        let space = build_mixed_space(&mesh).unwrap();
        assert_eq!(estimate_l(&space, &[vec![0.0; space.n_vel()]], 1e-3, 0.0).unwrap(), 0.0);
        let c = 0.7;
        let w = space.interpolate_velocity(|_| [c, 0.0]);
        let l = estimate_l(&space, &[w.clone()], 1e-3, 0.0).unwrap();
        assert!((l - c * c / (4.0 * 1e-3)).abs() < 1e-9);
        let l_mu = estimate_l(&space, &[w], 1e-3, 0.05).unwrap();
        assert!((l_mu - 2.0 * c * c / (4.0 * 0.05)).abs() < 1e-12);
        assert!(estimate_l(&space, &[], 1e-3, 0.0).is_err());
    }

    #[test]
    fn manufactured_l_matches_dense_sampling() {
        let mesh = build_uniform_mesh(16).unwrap();
        let space = build_mixed_space(&mesh).unwrap();
        let sol = ManufacturedSolution;
        let w = space.interpolate_velocity(|p| sol.velocity(p[0], p[1], 0.0));
        let norms = sup_norms(&space, &w);
        // Independent sampling: 10^4 points of a regular lattice, evaluated
        // through point location and the global field.
        let mut dense = SupNorms::default();
        let k = 100;
        for i in 0..k {
            for j in 0..k {
                let p = [(i as f64 + 0.5) / k as f64, (j as f64 + 0.5) / k as f64];
                let c = space.mesh().locate(p).unwrap();
                let geo = space.geometry(c);
                let (v, g) = space.eval_velocity_in_cell(&w, c, &geo, &geo.barycentric(p));
                dense.value = dense.value.max(v[0].hypot(v[1]));
                dense.gradient = dense.gradient.max(g.iter().flatten().map(|x| x * x).sum::<f64>().sqrt());
            }
        }
        assert!((norms.value - dense.value).abs() <= 0.02 * dense.value, "{norms:?} vs {dense:?}");
        assert!((norms.gradient - dense.gradient).abs() <= 0.05 * dense.gradient, "{norms:?} vs {dense:?}");
        let l = estimate_l(&space, &[w], 1e-6, 0.05).unwrap();
        assert!((l - FROZEN_L_N16).abs() <= 1e-10 * FROZEN_L_N16, "{l:.17e}");
    }

    const FROZEN_L_N16: f64 = 56.993250785150153;

    #[test]
    fn condition_boundaries_are_non_strict() {
        let base = ConditionInputs {
            nu: 1e-2,
            mu: 0.0,
            beta: 8.0,
            h_coarse: 0.25,
            dt: 0.1,
            l_estimate: 1.0,
            l_semi: Some(0.5),
            c_i: 1.0,
            delta: default_delta(0.0),
        };
        let r = check_conditions(base).unwrap();
        assert!(r.beta_ge_8l);
        let gamma = r.gamma;
        let at = check_conditions(ConditionInputs { dt: 24.0 / gamma, ..base }).unwrap();
        assert!(at.dt_bdf2_implicit);
        let above = check_conditions(ConditionInputs {
            dt: (24.0 / gamma) * (1.0 + f64::EPSILON),
            ..base
        })
        .unwrap();
        assert!(!above.dt_bdf2_implicit);
        let semi = check_conditions(ConditionInputs { dt: 12.0 / gamma, ..base }).unwrap();
        assert!(semi.dt_bdf2_semi);
        assert!(!check_conditions(ConditionInputs { beta: 0.0, ..base }).unwrap().beta_ge_8l);
        let zero_l = check_conditions(ConditionInputs {
            beta: 0.0,
            l_estimate: 0.0,
            l_semi: Some(0.0),
            ..base
        })
        .unwrap();
        assert!(zero_l.beta_ge_8l && zero_l.beta_ge_8l_semi == Some(true) && zero_l.h_condition);
    }

    #[test]
    fn report_serializations_agree() {
        let r = check_conditions(ConditionInputs {
            nu: 1e-6,
            mu: 0.05,
            beta: 1.0,
            h_coarse: 1.0 / 16.0,
            dt: 0.025,
            l_estimate: 3.0,
            l_semi: None,
            c_i: 1.0,
            delta: default_delta(0.05),
        })
        .unwrap();
        let kv = r.to_key_value();
        assert!(kv.contains("c_I_assumed = 1"));
        assert!(kv.contains("beta_ge_8L = false"));
        assert_eq!(TheoryReport::csv_header().split(',').count(), r.csv_row().split(',').count());
    }

    #[test]
    fn window_max() {
        let rec = record(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 0.5, 0.25, 0.25]);
        assert_eq!(asymptotic_window_max(&rec, 2.0, 3.0).unwrap(), 0.25);
        assert_eq!(asymptotic_window_max(&rec, 1.0, 1.0).unwrap(), 0.5);
        assert!(asymptotic_window_max(&rec, 1.2, 1.8).is_err());
        let flat = record(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![0.3; 5]);
        assert_eq!(asymptotic_window_max(&flat, 0.0, 4.0).unwrap(), 0.3);
        assert!(plateau_reached(&flat, 2.0, 0.01).unwrap());
        assert!(!plateau_reached(&rec, 1.0, 0.01).unwrap());
    }
}
