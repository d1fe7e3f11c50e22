//! Touchdown of the leg onto a hemispherical obstacle.

use serde::{Deserialize, Serialize};

use super::jam::{JamConfig, PerturbMode};
use super::record::{sample_stride, TrialRecord};
use super::rig::{height_for_clearance, leg_tendon_params, Rig, RunSettings};
use crate::dynamics::{
    energy_audit, Actuation, ContactParams, Environment, JointDrive, LegModel, SimState, Surface, Vec2, ANKLE, HIP,
    KNEE, LEG_MOMENT_ARM_MM, LEG_TENDON_UNITS, SLIDE,
};
use crate::error::{Error, Result};

const SETTLE_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionSpec {
    pub total_mass_kg: f64,
    /// Gap from the obstacle top to the sole at release, m.
    pub drop_height_m: f64,
    pub obstacle_radius_m: f64,
    /// Obstacle centre relative to the ankle, positive ahead, m.
    pub toe_down_offset_m: f64,
    pub toe_up_offset_m: f64,
    /// Leave the obstacle out and drop onto flat ground.
    pub obstacle: bool,
    pub contact: ContactParams,
    pub moment_arm_mm: f64,
    pub tendon_units: u32,
    pub horizon_s: f64,
    /// Generalised speed below which the leg counts as at rest.
    pub settle_speed: f64,
    pub settle_window_s: f64,
    pub run: RunSettings,
}

impl Default for CollisionSpec {
    fn default() -> Self {
        Self {
            total_mass_kg: 3.65,
            drop_height_m: 0.005,
            obstacle_radius_m: 0.02,
            toe_down_offset_m: -0.03,
            toe_up_offset_m: 0.05,
            obstacle: true,
            contact: ContactParams::default(),
            moment_arm_mm: LEG_MOMENT_ARM_MM,
            tendon_units: LEG_TENDON_UNITS,
            horizon_s: 0.3,
            settle_speed: 1e-3,
            settle_window_s: 0.02,
            run: RunSettings::default(),
        }
    }
}

impl CollisionSpec {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        self.contact.validate()?;
        if !(self.drop_height_m >= 0.0) || !(self.obstacle_radius_m > 0.0) {
            return Err(Error::InvalidSpec(
                "drop height must be ≥ 0 and obstacle radius > 0".into(),
            ));
        }
        if !(self.horizon_s > 0.0 && self.settle_speed > 0.0 && self.settle_window_s > 0.0) {
            return Err(Error::InvalidSpec(
                "horizon and settling thresholds must be positive".into(),
            ));
        }
        if !(self.toe_down_offset_m < 0.0 && self.toe_up_offset_m > 0.0) {
            return Err(Error::InvalidSpec(
                "toe-down obstacle must sit behind the ankle and toe-up ahead of it".into(),
            ));
        }
        Ok(())
    }

    pub fn offset(&self, mode: PerturbMode) -> f64 {
        match mode {
            PerturbMode::ToeDown => self.toe_down_offset_m,
            PerturbMode::ToeUp => self.toe_up_offset_m,
        }
    }
}

/// The six configurations compared in the collision study.
pub fn collision_configs(mode: PerturbMode) -> Vec<JamConfig> {
    // Extending pair: k1k3 toe-down, k1k4 toe-up; compressing pair the complement.
    let (ext, comp) = match mode {
        PerturbMode::ToeDown => (0b0101, 0b1010),
        PerturbMode::ToeUp => (0b1001, 0b0110),
    };
    [0, 0b0011, 0b1100, ext, comp, 0b1111]
        .into_iter()
        .map(JamConfig::from_mask)
        .collect()
}

/// Drops the leg in its touchdown pose, hip locked, onto the obstacle.
///
/// Channels: total contact force, tendon stored energy, kinetic energy, and
/// the four tendon extensions.
pub fn run_collision(spec: &CollisionSpec, mode: PerturbMode, jam: &JamConfig) -> Result<TrialRecord> {
    spec.validate()?;
    let mut model = LegModel::jeg(spec.total_mass_kg, leg_tendon_params()?)?;
    model.contact = spec.contact;
    for a in &mut model.attachments {
        a.moment_arm_mm = a.moment_arm_mm.signum() * spec.moment_arm_mm;
        a.units = spec.tendon_units;
    }
    model.validate()?;
    let pose = model.touchdown;
    let mut q = model.pose_q(0.0, &pose);
    let probe = SimState::new(&model, q.clone(), vec![0.0; 4], jam.jamming_states())?;
    let frames = model.chain.frames(
        &nalgebra::DVector::from_column_slice(&probe.q),
        &nalgebra::DVector::zeros(4),
    );
    let ankle_x = frames.pivots[model.foot_link()].x;
    let mut surfaces = vec![Surface::ground(0.0)];
    if spec.obstacle {
        surfaces.push(Surface::disc(
            Vec2::new(ankle_x + spec.offset(mode), 0.0),
            spec.obstacle_radius_m,
        ));
    }
    let env = Environment { surfaces };
    q[0] = height_for_clearance(&model, &q, &env, spec.drop_height_m)?;
    let state = SimState::new(&model, q, vec![0.0; 4], jam.jamming_states())?;
    let actuation = Actuation::free(4).with(HIP, JointDrive::Locked);
    let mut rig = Rig {
        model,
        env,
        actuation: actuation.clone(),
        state,
        dt: spec.run.dt,
    };
    if spec.drop_height_m == 0.0 {
        // Lowered onto the surface with damped joints rather than dropped.
        rig.actuation = actuation
            .clone()
            .with(SLIDE, JointDrive::Pd { kp: 0.0, kd: 200.0 })
            .with(KNEE, JointDrive::Pd { kp: 0.0, kd: 2.0 })
            .with(ANKLE, JointDrive::Pd { kp: 0.0, kd: 2.0 });
        rig.advance(SETTLE_S)?;
        rig.actuation = actuation;
        rig.state.qdot.iter_mut().for_each(|v| *v = 0.0);
        rig.state.t = 0.0;
    }

    let mut rec = TrialRecord::new(
        "collide",
        &format!("{}_{}", mode.as_str(), jam.label()),
        &[
            ("force", "N"),
            ("stored", "J"),
            ("kinetic", "J"),
            ("x1", "mm"),
            ("x2", "mm"),
            ("x3", "mm"),
            ("x4", "mm"),
        ],
    );
    let sample = |rig: &Rig, force: f64, rec: &mut TrialRecord| {
        let e = energy_audit(&rig.model, &rig.env, &rig.actuation, &rig.state);
        let x = rig.state.extensions(&rig.model);
        rec.push(
            rig.state.t,
            &[force, e.tendon_stored, e.kinetic, x[0], x[1], x[2], x[3]],
        );
    };
    sample(&rig, 0.0, &mut rec);

    let stride = sample_stride(rig.dt);
    let n = spec.run.steps(spec.horizon_s);
    let window = spec.run.steps(spec.settle_window_s).max(1);
    let mut first_contact: Option<(f64, f64)> = None;
    let mut peak_force = 0.0_f64;
    let mut calm = 0usize;
    let mut settled_at = None;
    for k in 1..=n {
        let before = foot_speed(&rig);
        let info = rig.step()?;
        let f = info.total_contact_force().norm();
        peak_force = peak_force.max(f);
        if first_contact.is_none() && f > 0.0 {
            first_contact = Some((rig.state.t, before));
        }
        if k % stride == 0 {
            sample(&rig, f, &mut rec);
        }
        if first_contact.is_some() {
            calm = if rig.speed() < spec.settle_speed { calm + 1 } else { 0 };
            if calm >= window && k % stride == 0 {
                settled_at = Some(rig.state.t - spec.settle_window_s);
                break;
            }
        }
    }
    rec.set_metric("peak_impact_force_N", peak_force);
    rec.set_metric("peak_stored_energy_J", rec.max_of("stored"));
    rec.set_metric("peak_kinetic_J", rec.max_of("kinetic"));
    rec.set_metric("first_contact_s", first_contact.map_or(f64::NAN, |c| c.0));
    rec.set_metric("contact_speed_m_s", first_contact.map_or(f64::NAN, |c| c.1));
    rec.set_metric("settling_time_s", settled_at.unwrap_or(f64::NAN));
    rec.set_metric(
        "supported_weight_N",
        rig.model.chain.total_mass() * rig.model.chain.gravity,
    );
    if first_contact.is_none() {
        rec.flag("no_contact");
    }
    if settled_at.is_none() {
        rec.flag("unsettled");
    }
    Ok(rec)
}

/// Fastest sole point speed, m/s.
fn foot_speed(rig: &Rig) -> f64 {
    let m = &rig.model;
    let q = nalgebra::DVector::from_column_slice(&rig.state.q);
    let qd = nalgebra::DVector::from_column_slice(&rig.state.qdot);
    let frames = m.chain.frames(&q, &qd);
    let foot = m.foot_link();
    [m.foot.heel_local(), m.foot.toe_local()]
        .into_iter()
        .map(|p| (m.chain.point_jacobian(&frames, foot, frames.point(foot, p)) * &qd).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(mask: u8) -> TrialRecord {
        run_collision(
            &CollisionSpec::default(),
            PerturbMode::ToeDown,
            &JamConfig::from_mask(mask),
        )
        .unwrap()
    }

    #[test]
    fn toe_down_ordering() {
        let recs: Vec<(u8, TrialRecord)> = collision_configs(PerturbMode::ToeDown)
            .iter()
            .map(|c| (c.mask().unwrap(), run(c.mask().unwrap())))
            .collect();
        let get = |m: u8, key: &str| recs.iter().find(|r| r.0 == m).unwrap().1.metric(key);
        assert!(get(15, "peak_impact_force_N") < get(0, "peak_impact_force_N"));
        assert!(get(0b1100, "peak_impact_force_N") < get(0b0011, "peak_impact_force_N"));
        let top = [0b0101, 0b1100, 15].map(|m| get(m, "peak_stored_energy_J"));
        let (lo, hi) = top.iter().fold((f64::MAX, 0.0_f64), |(a, b), e| (a.min(*e), b.max(*e)));
        assert!(hi / lo < 1.15);
        for m in [0, 0b0011, 0b1010] {
            assert!(get(m, "peak_stored_energy_J") < lo);
        }
        assert!(recs.iter().all(|r| !r.1.flags.iter().any(|f| f == "no_contact")));
    }

    #[test]
    fn resting_on_flat_ground_carries_weight() {
        let spec = CollisionSpec {
            obstacle: false,
            drop_height_m: 0.0,
            horizon_s: 0.1,
            ..CollisionSpec::default()
        };
        let r = run_collision(&spec, PerturbMode::ToeDown, &JamConfig::unjammed()).unwrap();
        let w = r.metric("supported_weight_N");
        assert!((r.metric("peak_impact_force_N") - w).abs() < 0.05 * w);
    }

    #[test]
    fn rejects_misplaced_obstacle() {
        let spec = CollisionSpec {
            toe_down_offset_m: 0.01,
            ..CollisionSpec::default()
        };
        assert!(spec.validate().is_err());
    }
}
