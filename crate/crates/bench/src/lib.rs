//! Fixtures shared by the benchmarks.

use jamleg_core::analysis::Series;
use jamleg_core::dynamics::{Actuation, Environment, LegModel, Pose, SimState};
use jamleg_core::scenarios::{height_for_clearance, leg_tendon_params};
use jamleg_core::tendon::JammingState;
use jamleg_core::Result;

/// The walking leg 10 mm above flat ground with every tendon jammed.
pub struct LegFixture {
    pub model: LegModel,
    pub env: Environment,
    pub actuation: Actuation,
    pub state: SimState,
}

pub fn falling_leg() -> Result<LegFixture> {
    let model = LegModel::jeg(3.65, leg_tendon_params()?)?;
    let env = Environment::flat_ground();
    let mut q = model.pose_q(0.0, &Pose::touchdown());
    q[0] = height_for_clearance(&model, &q, &env, 0.01)?;
    let dof = q.len();
    let jam = vec![JammingState::jammed(); model.attachments.len()];
    let state = SimState::new(&model, q, vec![0.0; dof], jam)?;
    Ok(LegFixture {
        model,
        env,
        actuation: Actuation::free(dof),
        state,
    })
}

/// `cycles` stance-like bumps sampled at 1 kHz with a small ripple.
pub fn synthetic_grf(cycles: usize) -> Result<Series> {
    let n = cycles * 10_000;
    let t: Vec<f64> = (0..n).map(|i| i as f64 * 1e-3).collect();
    let v = t
        .iter()
        .map(|&x| {
            let phase = (x % 10.0) / 10.0;
            let stance = if phase < 0.6 {
                (std::f64::consts::PI * phase / 0.6).sin() * 40.0
            } else {
                0.0
            };
            stance + 0.3 * (x * 377.0).sin()
        })
        .collect();
    Series::from_samples(&t, v)
}

/// One triangular 20 mm cycle at 5 mm/s sampled every 10 ms.
pub fn triangle_cycle() -> Vec<f64> {
    let up: Vec<f64> = (0..=400).map(|i| i as f64 * 0.05).collect();
    up.iter().chain(up.iter().rev().skip(1)).copied().collect()
}
