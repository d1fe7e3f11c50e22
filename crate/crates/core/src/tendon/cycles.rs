//! Triangular tensile cycling and the damping capacity of the resulting loop.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::iwan::TendonModel;
use crate::error::{Error, Result};

/// Loading-work floor below which damping capacity is undefined, N·mm.
pub const WORK_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Loading,
    Unloading,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Loading => "loading",
            Branch::Unloading => "unloading",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSample {
    pub time_s: f64,
    pub displacement_mm: f64,
    pub force_n: f64,
    pub branch: Branch,
    pub cycle: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HysteresisLoop {
    pub samples: Vec<LoopSample>,
    pub cycles: usize,
    pub rate_mm_s: f64,
    pub amplitude_mm: f64,
}

/// Loading and unloading branches of one cycle, each ordered in time.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleBranches {
    pub loading: Vec<(f64, f64)>,
    pub unloading: Vec<(f64, f64)>,
}

impl HysteresisLoop {
    /// Samples of cycle `index` split into branches. The loading branch
    /// starts from the state the previous cycle ended in.
    pub fn cycle(&self, index: usize) -> Option<CycleBranches> {
        let first = self.samples.iter().position(|s| s.cycle == index)?;
        let mut loading = Vec::new();
        let mut unloading = Vec::new();
        if first > 0 {
            let prev = &self.samples[first - 1];
            loading.push((prev.displacement_mm, prev.force_n));
        }
        let mut peak = None;
        for s in self.samples[first..].iter().take_while(|s| s.cycle == index) {
            match s.branch {
                Branch::Loading => {
                    loading.push((s.displacement_mm, s.force_n));
                    peak = Some((s.displacement_mm, s.force_n));
                }
                Branch::Unloading => {
                    if unloading.is_empty() {
                        if let Some(p) = peak {
                            unloading.push(p);
                        }
                    }
                    unloading.push((s.displacement_mm, s.force_n));
                }
            }
        }
        Some(CycleBranches { loading, unloading })
    }

    pub fn last_cycle(&self) -> Option<CycleBranches> {
        self.cycle(self.cycles.checked_sub(1)?)
    }

    pub fn peak_force(&self) -> f64 {
        self.samples.iter().map(|s| s.force_n).fold(0.0, f64::max)
    }

    /// CSV with header `t_s,x_mm,f_N,branch`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,x_mm,f_N,branch\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                s.time_s,
                s.displacement_mm,
                s.force_n,
                s.branch.as_str()
            );
        }
        out
    }
}

/// Cycles `model` through a triangular 0 → amplitude → 0 profile.
///
/// Each half cycle is divided into `ceil(amplitude / rate / dt)` equal steps
/// so the turning points land on samples.
pub fn run_tension_cycles(
    model: &mut TendonModel,
    amplitude_mm: f64,
    rate_mm_s: f64,
    cycles: usize,
    dt: f64,
) -> Result<HysteresisLoop> {
    if amplitude_mm > model.extension_limit_mm {
        return Err(Error::ExtensionLimit {
            extension_mm: amplitude_mm,
            limit_mm: model.extension_limit_mm,
        });
    }
    if !(amplitude_mm >= 0.0) || !(rate_mm_s > 0.0) || !(dt > 0.0) || cycles == 0 {
        return Err(Error::InvalidSpec(
            "cycling needs amplitude ≥ 0, rate > 0, dt > 0 and at least one cycle".into(),
        ));
    }
    let half = amplitude_mm / rate_mm_s;
    let steps = ((half / dt) - 1e-9).ceil().max(1.0) as usize;
    let step_dt = if half > 0.0 { half / steps as f64 } else { dt };
    let mut samples = Vec::with_capacity(cycles * 2 * steps + 1);
    let mut tick = 0usize;
    let mut push = |model: &mut TendonModel, x: f64, branch, cycle, tick: &mut usize| -> Result<()> {
        let f = model.force_step(x)?;
        samples.push(LoopSample {
            time_s: *tick as f64 * step_dt,
            displacement_mm: x,
            force_n: f,
            branch,
            cycle,
        });
        *tick += 1;
        Ok(())
    };
    push(model, 0.0, Branch::Loading, 0, &mut tick)?;
    for cycle in 0..cycles {
        for k in 1..=steps {
            let x = amplitude_mm * k as f64 / steps as f64;
            push(model, x, Branch::Loading, cycle, &mut tick)?;
        }
        for k in (0..steps).rev() {
            let x = amplitude_mm * k as f64 / steps as f64;
            push(model, x, Branch::Unloading, cycle, &mut tick)?;
        }
    }
    Ok(HysteresisLoop {
        samples,
        cycles,
        rate_mm_s,
        amplitude_mm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingReport {
    /// Damping capacity ΔU / U_load.
    pub capacity: f64,
    /// Energy dissipated over the cycle, N·mm.
    pub dissipated: f64,
    /// Area under the loading branch, N·mm.
    pub loading_work: f64,
    pub peak_force: f64,
}

/// Trapezoidal ∫ f dx along an ordered branch (sign follows the direction of travel).
pub fn branch_work(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum()
}

/// Damping capacity of the final cycle of `hysteresis`.
pub fn damping_capacity(hysteresis: &HysteresisLoop) -> Result<DampingReport> {
    let cycle = hysteresis
        .last_cycle()
        .filter(|c| c.loading.len() >= 2 && c.unloading.len() >= 2)
        .ok_or_else(|| Error::InvalidSpec("loop has no complete load/unload cycle".into()))?;
    damping_from_branches(&cycle)
}

pub fn damping_from_branches(cycle: &CycleBranches) -> Result<DampingReport> {
    let loading_work = branch_work(&cycle.loading);
    let recovered = -branch_work(&cycle.unloading);
    if loading_work.abs() <= WORK_FLOOR {
        return Err(Error::UndefinedDamping);
    }
    let dissipated = loading_work - recovered;
    let peak_force = cycle
        .loading
        .iter()
        .chain(&cycle.unloading)
        .map(|p| p.1)
        .fold(0.0, f64::max);
    Ok(DampingReport {
        capacity: dissipated / loading_work,
        dissipated,
        loading_work,
        peak_force,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tendon::iwan::{SlipElement, TendonModel};

    fn jenkins() -> TendonModel {
        TendonModel::from_elements(vec![SlipElement::new(1.0, 5.0)], None).unwrap()
    }

    #[test]
    fn zero_amplitude_gives_flat_loop() {
        let mut m = jenkins();
        let l = run_tension_cycles(&mut m, 0.0, 5.0, 1, 0.01).unwrap();
        assert!(l.samples.iter().all(|s| s.force_n == 0.0 && s.displacement_mm == 0.0));
        assert!(matches!(damping_capacity(&l), Err(Error::UndefinedDamping)));
    }

    #[test]
    fn jenkins_single_cycle_matches_closed_form() {
        // Closed form: U_load = 5·5/2 + 5·15 = 87.5, recovered = 5·5/2 = 12.5.
        let mut m = jenkins();
        let l = run_tension_cycles(&mut m, 20.0, 5.0, 1, 0.01).unwrap();
        let r = damping_capacity(&l).unwrap();
        assert!((r.loading_work - 87.5).abs() < 1e-9);
        assert!((r.loading_work - r.dissipated - 12.5).abs() < 1e-9);
        assert!((r.capacity - 75.0 / 87.5).abs() < 1e-12);
        assert!((r.peak_force - 5.0).abs() < 1e-12);
    }

    #[test]
    fn linear_spring_has_no_damping() {
        let mut m = TendonModel::from_elements(vec![SlipElement::new(2.0, 1e9)], None).unwrap();
        let l = run_tension_cycles(&mut m, 20.0, 5.0, 2, 0.02).unwrap();
        let r = damping_capacity(&l).unwrap();
        assert!(r.capacity.abs() < 1e-12);
    }

    #[test]
    fn branches_alternate_and_are_ordered() {
        let mut m = jenkins();
        let l = run_tension_cycles(&mut m, 20.0, 5.0, 3, 0.05).unwrap();
        let mut last_branch = Branch::Loading;
        let mut switches = 0;
        for w in l.samples.windows(2) {
            assert!(w[1].time_s > w[0].time_s);
            if w[1].branch == Branch::Loading && w[0].branch == Branch::Loading {
                assert!(w[1].displacement_mm >= w[0].displacement_mm);
            }
            if w[1].branch != last_branch {
                switches += 1;
                last_branch = w[1].branch;
            }
        }
        assert_eq!(switches, 5);
        assert!(l.samples.iter().all(|s| (0.0..=20.0).contains(&s.displacement_mm)));
        assert!(l.to_csv().starts_with("t_s,x_mm,f_N,branch\n0,0,0,loading\n"));
    }

    #[test]
    fn amplitude_beyond_limit_is_rejected() {
        let mut m = jenkins();
        assert!(run_tension_cycles(&mut m, 25.0, 5.0, 1, 0.01).is_err());
    }

    #[test]
    fn steady_state_after_first_cycle() {
        let mut m = jenkins();
        let l = run_tension_cycles(&mut m, 20.0, 5.0, 5, 0.01).unwrap();
        let second = l.cycle(1).unwrap();
        let last = l.last_cycle().unwrap();
        assert_eq!(second, last);
        assert_ne!(l.cycle(0).unwrap(), second);
    }
}
