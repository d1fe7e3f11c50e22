//! Shared rig plumbing: calibrated tendons and the fixed-step run loop.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use nalgebra::DVector;

use crate::dynamics::{step, Actuation, Environment, LegModel, SimState, StepInfo, Surface, Vec2, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::tendon::calibrate::calibrate_leg_tendon;
use crate::tendon::iwan::TendonParams;

/// Parameters of the 2.0 mm hex4 tendon, calibrated once per process.
pub fn leg_tendon_params() -> Result<TendonParams> {
    static CACHE: OnceLock<std::result::Result<TendonParams, String>> = OnceLock::new();
    CACHE
        .get_or_init(|| calibrate_leg_tendon().map(|c| c.params).map_err(|e| e.to_string()))
        .clone()
        .map_err(|message| Error::Calibration {
            message,
            iterations: 0,
            residuals: Vec::new(),
        })
}

/// Integration settings shared by the scenario runners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub dt: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self { dt: DEFAULT_DT }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1e-3) {
            return Err(Error::InvalidSpec(format!("dt {} s must lie in (0, 1e-3]", self.dt)));
        }
        Ok(())
    }

    pub fn steps(&self, duration: f64) -> usize {
        (duration / self.dt).round() as usize
    }
}

/// A model, its surroundings and drive, advanced together.
pub struct Rig {
    pub model: LegModel,
    pub env: Environment,
    pub actuation: Actuation,
    pub state: SimState,
    pub dt: f64,
}

impl Rig {
    pub fn step(&mut self) -> Result<StepInfo> {
        step(&self.model, &self.env, &self.actuation, &mut self.state, self.dt)
    }

    /// Runs `duration` seconds, discarding per-step output.
    pub fn advance(&mut self, duration: f64) -> Result<()> {
        let n = (duration / self.dt).round() as usize;
        for _ in 0..n {
            self.step()?;
        }
        Ok(())
    }

    /// Generalised speed norm.
    pub fn speed(&self) -> f64 {
        self.state.qdot.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// World heel and toe of the sole at `q`.
pub fn sole_segment(model: &LegModel, q: &[f64]) -> (Vec2, Vec2) {
    let qv = DVector::from_column_slice(q);
    let frames = model.chain.frames(&qv, &DVector::zeros(q.len()));
    let foot = model.foot_link();
    (
        frames.point(foot, model.foot.heel_local()),
        frames.point(foot, model.foot.toe_local()),
    )
}

/// Smallest gap between the sole and `surface`, m; negative when overlapping.
pub fn sole_clearance(model: &LegModel, q: &[f64], surface: &Surface) -> f64 {
    let (a, b) = sole_segment(model, q);
    match *surface {
        Surface::Ground { height, .. } => a.y.min(b.y) - height,
        Surface::Disc { center, radius, .. } => {
            let c = Vec2::new(center[0], center[1]);
            let ab = b - a;
            let s = ((c - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            (a + s * ab - c).norm() - radius
        }
    }
}

/// Slide height at which the sole sits `gap` above the nearest surface.
pub fn height_for_clearance(model: &LegModel, q: &[f64], env: &Environment, gap: f64) -> Result<f64> {
    let clearance = |y: f64| {
        let mut qq = q.to_vec();
        qq[0] = y;
        env.surfaces
            .iter()
            .map(|s| sole_clearance(model, &qq, s))
            .fold(f64::INFINITY, f64::min)
    };
    if env.surfaces.is_empty() {
        return Err(Error::InvalidSpec("no surface to stand on".into()));
    }
    let (mut lo, mut hi) = (-2.0, 2.0);
    if !(clearance(lo) < gap && clearance(hi) > gap) {
        return Err(Error::InvalidSpec("sole clearance cannot be bracketed".into()));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if clearance(mid) < gap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
