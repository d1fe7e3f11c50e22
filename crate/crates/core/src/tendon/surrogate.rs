//! Quartic loading/unloading surrogates of a steady-state hysteresis loop.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cycles::{branch_work, CycleBranches, HysteresisLoop};
use crate::error::{Error, Result};

pub const SURROGATE_ORDER: usize = 4;
/// Fewest samples per branch accepted by the fit.
pub const MIN_BRANCH_SAMPLES: usize = 10;
const GRID: usize = 401;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateTag {
    Unjammed,
    Jammed,
}

impl StateTag {
    pub fn as_str(self) -> &'static str {
        match self {
            StateTag::Unjammed => "unjammed",
            StateTag::Jammed => "jammed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopBranch {
    Loading,
    Unloading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolySurrogate {
    /// c₀..c₄ in N per mm^k.
    pub loading_coeffs: [f64; SURROGATE_ORDER + 1],
    pub unloading_coeffs: [f64; SURROGATE_ORDER + 1],
    pub x_max_mm: f64,
    pub state_tag: StateTag,
    pub loading_rmse: f64,
    pub unloading_rmse: f64,
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Ordinary least squares on `u = x / x_max`, rescaled back to mm powers.
/// Returns coefficients, RMSE and largest absolute residual.
fn fit_branch(points: &[(f64, f64)], x_max: f64) -> Result<([f64; SURROGATE_ORDER + 1], f64, f64)> {
    if points.len() < MIN_BRANCH_SAMPLES {
        return Err(Error::IllConditioned(format!(
            "{} samples in branch, need at least {MIN_BRANCH_SAMPLES}",
            points.len()
        )));
    }
    let n = SURROGATE_ORDER + 1;
    let a = DMatrix::from_fn(points.len(), n, |i, j| (points[i].0 / x_max).powi(j as i32));
    let b = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::IllConditioned(
            "branch samples do not span the polynomial basis".into(),
        ));
    }
    let u = svd
        .solve(&b, 1e-14 * smax)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    let mut coeffs = [0.0; SURROGATE_ORDER + 1];
    for (k, c) in coeffs.iter_mut().enumerate() {
        *c = u[k] / x_max.powi(k as i32);
    }
    let residuals: Vec<f64> = points.iter().map(|&(x, f)| horner(&coeffs, x) - f).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let worst = residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    Ok((coeffs, (sse / points.len() as f64).sqrt(), worst))
}

/// Fits quartic surrogates to the final cycle of `hysteresis`.
///
/// The loading curve must be non-decreasing and lie above the unloading
/// curve on the domain, both up to the largest fit residual; otherwise the
/// fit is rejected.
pub fn fit_poly_surrogate(hysteresis: &HysteresisLoop, state_tag: StateTag) -> Result<PolySurrogate> {
    let cycle = hysteresis
        .last_cycle()
        .ok_or_else(|| Error::InvalidSpec("loop has no cycles".into()))?;
    fit_cycle(&cycle, hysteresis.amplitude_mm, state_tag)
}

pub fn fit_cycle(cycle: &CycleBranches, x_max_mm: f64, state_tag: StateTag) -> Result<PolySurrogate> {
    if !(x_max_mm > 0.0) {
        return Err(Error::IllConditioned("zero-amplitude loop".into()));
    }
    let (loading_coeffs, loading_rmse, loading_worst) = fit_branch(&cycle.loading, x_max_mm)?;
    let (unloading_coeffs, unloading_rmse, unloading_worst) = fit_branch(&cycle.unloading, x_max_mm)?;
    let s = PolySurrogate {
        loading_coeffs,
        unloading_coeffs,
        x_max_mm,
        state_tag,
        loading_rmse,
        unloading_rmse,
    };
    s.check_shape(loading_worst, unloading_worst)?;
    Ok(s)
}

impl PolySurrogate {
    fn raw(&self, x: f64, branch: LoopBranch) -> f64 {
        match branch {
            LoopBranch::Loading => horner(&self.loading_coeffs, x),
            LoopBranch::Unloading => horner(&self.unloading_coeffs, x),
        }
    }

    fn check_shape(&self, loading_worst: f64, unloading_worst: f64) -> Result<()> {
        let tol = loading_worst + 1e-9;
        let mut running_max = f64::NEG_INFINITY;
        for i in 0..GRID {
            let x = self.x_max_mm * i as f64 / (GRID - 1) as f64;
            let f = self.raw(x, LoopBranch::Loading);
            if f < running_max - tol {
                return Err(Error::NonMonotone(format!(
                    "loading curve falls by {} N at x = {x} mm",
                    running_max - f
                )));
            }
            running_max = running_max.max(f);
            let gap = self.raw(x, LoopBranch::Unloading) - f;
            if gap > tol + unloading_worst {
                return Err(Error::NonMonotone(format!(
                    "unloading curve exceeds loading by {gap} N at x = {x} mm"
                )));
            }
        }
        Ok(())
    }

    /// Force at extension `x_mm`; compression returns exactly zero.
    pub fn eval(&self, x_mm: f64, branch: LoopBranch) -> Result<f64> {
        eval_surrogate(self, x_mm, branch)
    }

    /// Damping capacity of the surrogate pair over the full domain.
    pub fn damping_capacity(&self) -> f64 {
        let xs: Vec<f64> = (0..GRID)
            .map(|i| self.x_max_mm * i as f64 / (GRID - 1) as f64)
            .collect();
        let curve = |b| -> Vec<(f64, f64)> { xs.iter().map(|&x| (x, self.raw(x, b).max(0.0))).collect() };
        let load = branch_work(&curve(LoopBranch::Loading));
        let unload = branch_work(&curve(LoopBranch::Unloading));
        if load <= 0.0 {
            0.0
        } else {
            (load - unload) / load
        }
    }
}

pub fn eval_surrogate(s: &PolySurrogate, x_mm: f64, branch: LoopBranch) -> Result<f64> {
    if x_mm.is_nan() {
        return Err(Error::Domain("extension is NaN".into()));
    }
    if x_mm < 0.0 {
        return Ok(0.0);
    }
    if x_mm > s.x_max_mm + 1e-9 {
        return Err(Error::ExtensionLimit {
            extension_mm: x_mm,
            limit_mm: s.x_max_mm,
        });
    }
    Ok(s.raw(x_mm, branch).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tendon::cycles::{damping_capacity, run_tension_cycles};
    use crate::tendon::iwan::{SlipElement, TendonModel};

    fn spring_loop(k: f64) -> HysteresisLoop {
        let mut m = TendonModel::from_elements(vec![SlipElement::new(k, 1e9)], None).unwrap();
        run_tension_cycles(&mut m, 20.0, 5.0, 2, 0.05).unwrap()
    }

    #[test]
    fn linear_spring_gives_linear_coefficients() {
        let s = fit_poly_surrogate(&spring_loop(2.5), StateTag::Unjammed).unwrap();
        let expected = [0.0, 2.5, 0.0, 0.0, 0.0];
        for (c, e) in s.loading_coeffs.iter().zip(expected) {
            assert!((c - e).abs() < 1e-9, "{:?}", s.loading_coeffs);
        }
        assert!(s.loading_rmse < 1e-9);
    }

    #[test]
    fn eval_handles_domain_edges() {
        let s = fit_poly_surrogate(&spring_loop(2.0), StateTag::Jammed).unwrap();
        assert_eq!(s.eval(-3.0, LoopBranch::Loading).unwrap(), 0.0);
        assert!(s.eval(0.0, LoopBranch::Unloading).unwrap().abs() < 1e-9);
        assert!((s.eval(20.0, LoopBranch::Loading).unwrap() - 40.0).abs() < 1e-9);
        assert!(matches!(
            s.eval(20.5, LoopBranch::Loading),
            Err(Error::ExtensionLimit { .. })
        ));
    }

    #[test]
    fn sparse_branches_are_ill_conditioned() {
        let mut m = TendonModel::from_elements(vec![SlipElement::new(1.0, 5.0)], None).unwrap();
        let l = run_tension_cycles(&mut m, 20.0, 5.0, 1, 0.5).unwrap();
        assert!(matches!(
            fit_poly_surrogate(&l, StateTag::Jammed),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn jenkins_fit_quality_is_frozen() {
        let mut m = TendonModel::from_elements(vec![SlipElement::new(1.0, 5.0)], None).unwrap();
        let l = run_tension_cycles(&mut m, 20.0, 5.0, 1, 0.01).unwrap();
        let s = fit_poly_surrogate(&l, StateTag::Jammed).unwrap();
        // Independent fit of the same 401-point branch.
        assert!((s.loading_rmse - 0.166129).abs() < 1e-5, "{}", s.loading_rmse);
        let end = s.eval(20.0, LoopBranch::Loading).unwrap();
        assert!((end - l.peak_force()).abs() <= s.loading_rmse, "{end}");
        let d = damping_capacity(&l).unwrap().capacity;
        assert!((s.damping_capacity() - d).abs() < 0.02);
    }

    #[test]
    fn unloading_above_loading_is_rejected() {
        let cycle = CycleBranches {
            loading: (0..=20).map(|i| (i as f64, i as f64)).collect(),
            unloading: (0..=20).rev().map(|i| (i as f64, 2.0 * i as f64)).collect(),
        };
        assert!(matches!(
            fit_cycle(&cycle, 20.0, StateTag::Jammed),
            Err(Error::NonMonotone(_))
        ));
        let falling = CycleBranches {
            loading: (0..=20).map(|i| (i as f64, 20.0 - i as f64)).collect(),
            unloading: (0..=20).rev().map(|i| (i as f64, 0.0)).collect(),
        };
        assert!(matches!(
            fit_cycle(&falling, 20.0, StateTag::Jammed),
            Err(Error::NonMonotone(_))
        ));
    }
}
