//! Drop test of the single-joint rig onto a spherical perturbator.

use serde::{Deserialize, Serialize};

use super::record::{sample_stride, TrialRecord};
use super::rig::{leg_tendon_params, Rig, RunSettings};
use crate::analysis::{savgol, SAVGOL_ORDER, SAVGOL_WINDOW};
use crate::dynamics::{
    assemble, dynamics_rhs, Actuation, ContactParams, Environment, JointDrive, LegModel, LinkSpec, SimState, SlideStop,
    Surface, Vec2, SLIDE,
};
use crate::error::{Error, Result};
use crate::tendon::iwan::TendonParams;
use crate::tendon::jamming::JammingState;

const SETTLE_S: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropSpec {
    /// Gap between the foot pad and the perturbator tip, m. Zero starts the
    /// rig at rest on the perturbator.
    pub height_m: f64,
    pub total_mass_kg: f64,
    pub beam_mass_kg: f64,
    pub beam_length_m: f64,
    /// Beam centre of mass ahead of the hinge, m.
    pub beam_com_m: f64,
    /// Perturbator centre ahead of the hinge, m.
    pub contact_offset_m: f64,
    pub sphere_radius_m: f64,
    /// Carriage travel after first contact before it reaches the rail bumper, m.
    pub floor_gap_m: f64,
    pub bumper_stiffness: f64,
    pub bumper_damping: f64,
    pub moment_arm_mm: f64,
    pub pad: ContactParams,
    pub duration_s: f64,
    pub run: RunSettings,
}

impl Default for DropSpec {
    fn default() -> Self {
        Self {
            height_m: 0.05,
            total_mass_kg: 2.0,
            beam_mass_kg: 0.08,
            beam_length_m: 0.15,
            beam_com_m: 0.05,
            contact_offset_m: 0.09,
            sphere_radius_m: 0.02,
            floor_gap_m: 0.02,
            bumper_stiffness: 2e4,
            bumper_damping: 100.0,
            moment_arm_mm: 30.0,
            pad: ContactParams {
                k_n: 5e3,
                c_n: 20.0,
                ..ContactParams::default()
            },
            duration_s: 1.0,
            run: RunSettings::default(),
        }
    }
}

impl DropSpec {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        self.pad.validate()?;
        let positive = [
            self.total_mass_kg,
            self.beam_mass_kg,
            self.beam_length_m,
            self.sphere_radius_m,
            self.moment_arm_mm,
            self.duration_s,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.height_m >= 0.0) || !(self.floor_gap_m >= 0.0) {
            return Err(Error::InvalidSpec("drop rig dimensions must be positive".into()));
        }
        if !(self.contact_offset_m > 0.0 && self.contact_offset_m <= self.beam_length_m) {
            return Err(Error::InvalidSpec("perturbator must sit under the beam".into()));
        }
        Ok(())
    }

    pub fn model(&self, params: TendonParams) -> Result<LegModel> {
        let mut m = LegModel::drop_rig(self.total_mass_kg, params)?;
        let l = self.beam_length_m;
        m.chain.links[0] = LinkSpec {
            name: "foot_beam".into(),
            mass: self.beam_mass_kg,
            length: l,
            com_offset: self.beam_com_m,
            inertia_zz: self.beam_mass_kg * l * l / 12.0,
        };
        m.chain.carriage_mass = self.total_mass_kg - self.beam_mass_kg;
        m.foot.heel = 0.0;
        m.foot.toe = l;
        m.contact = self.pad;
        for a in &mut m.attachments {
            a.moment_arm_mm = a.moment_arm_mm.signum() * self.moment_arm_mm;
        }
        m.validate()?;
        Ok(m)
    }
}

/// Drops the rig with both tendons at `pressure_kpa`.
///
/// Channels: perturbator force, pivot reaction on the carriage, joint angular
/// velocity, carriage height.
pub fn run_drop_test(spec: &DropSpec, pressure_kpa: f64) -> Result<TrialRecord> {
    spec.validate()?;
    let params = leg_tendon_params()?;
    let model = spec.model(params)?;
    let jam = JammingState::settled(pressure_kpa);
    jam.validate()?;
    let r = spec.sphere_radius_m;
    let y0 = r + spec.height_m + model.foot.sole_depth;
    let floor = y0 - spec.height_m - spec.floor_gap_m;
    let mut model = model;
    model.slide_floor = Some(SlideStop {
        height: floor,
        stiffness: spec.bumper_stiffness,
        damping: spec.bumper_damping,
    });
    let q0 = vec![y0, std::f64::consts::FRAC_PI_2];
    let state = SimState::new(&model, q0, vec![0.0; 2], vec![jam; 2])?;
    let env = Environment {
        surfaces: vec![Surface::disc(Vec2::new(spec.contact_offset_m, 0.0), r)],
    };
    let carriage = model.chain.carriage_mass;
    let g = model.chain.gravity;
    let mut rig = Rig {
        model,
        env,
        actuation: Actuation::free(2),
        state,
        dt: spec.run.dt,
    };
    if spec.height_m == 0.0 {
        // Lower the rig onto the perturbator with damped drives, then release.
        rig.actuation = Actuation::free(2)
            .with(SLIDE, JointDrive::Pd { kp: 0.0, kd: 100.0 })
            .with(1, JointDrive::Pd { kp: 0.0, kd: 0.2 });
        rig.advance(SETTLE_S)?;
        rig.actuation = Actuation::free(2);
        rig.state.qdot.iter_mut().for_each(|v| *v = 0.0);
        rig.state.t = 0.0;
    }
    let y0 = rig.state.q[0];
    let mut rec = TrialRecord::new(
        "drop",
        &format!("{pressure_kpa}kPa"),
        &[
            ("force", "N"),
            ("reaction", "N"),
            ("omega", "rad_s"),
            ("y", "m"),
            ("extension", "mm"),
        ],
    );
    let stride = sample_stride(rig.dt);
    let n = spec.run.steps(spec.duration_s);
    let asm = assemble(&rig.model, &rig.env, &rig.state, &rig.actuation);
    let a0 = dynamics_rhs(&rig.model, &rig.env, &rig.state, &rig.actuation)?;
    let f0 = asm.contacts.iter().fold(Vec2::zeros(), |acc, c| acc + c.force).norm();
    let r0 = carriage * (a0[0] + g) - asm.floor_force;
    let x0 = rig.state.extensions(&rig.model)[0];
    rec.push(0.0, &[f0, r0, 0.0, y0, x0]);
    let mut first_contact = None;
    for k in 1..=n {
        let info = rig.step()?;
        let f = info.total_contact_force().norm();
        if first_contact.is_none() && f > 0.0 {
            first_contact = Some(rig.state.t);
        }
        if k % stride == 0 {
            // Force the carriage receives through the hinge.
            let reaction = carriage * (info.qddot[0] + g) - info.floor_force;
            let x = rig.state.extensions(&rig.model)[0];
            rec.push(rig.state.t, &[f, reaction, rig.state.qdot[1], rig.state.q[0], x]);
        }
    }
    // Transmitted force is read off the smoothed hinge reaction, as from a load cell.
    let reaction = rec.channel("reaction").unwrap_or(&[]).to_vec();
    let smoothed = if reaction.len() >= SAVGOL_WINDOW {
        savgol(&reaction, SAVGOL_WINDOW, SAVGOL_ORDER)?
    } else {
        reaction
    };
    let omega = rec.channel("omega").unwrap_or(&[]).to_vec();
    let omega = if omega.len() >= SAVGOL_WINDOW {
        savgol(&omega, SAVGOL_WINDOW, SAVGOL_ORDER)?
    } else {
        omega
    };
    let peak = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(*x));
    rec.set_metric("peak_force_N", peak(&smoothed));
    rec.set_metric("peak_contact_force_N", rec.max_of("force"));
    rec.set_metric("peak_omega_rad_s", omega.iter().fold(0.0_f64, |m, w| m.max(w.abs())));
    rec.set_metric("pressure_kPa", pressure_kpa);
    rec.set_metric("first_contact_s", first_contact.unwrap_or(f64::NAN));
    if first_contact.is_none() {
        rec.flag("no_contact");
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unjammed_transmits_less_and_spins_faster() {
        let spec = DropSpec::default();
        let soft = run_drop_test(&spec, 0.0).unwrap();
        let hard = run_drop_test(&spec, 50.0).unwrap();
        let reduction = 1.0 - soft.metric("peak_force_N") / hard.metric("peak_force_N");
        assert!((0.15..=0.45).contains(&reduction), "{reduction}");
        assert!(soft.metric("peak_omega_rad_s") > hard.metric("peak_omega_rad_s"));
        assert!(soft.flags.is_empty());
        assert!(soft.max_of("extension") < 10.0);
    }

    #[test]
    fn resting_start_holds_static_reaction() {
        let spec = DropSpec {
            height_m: 0.0,
            duration_s: 0.2,
            ..DropSpec::default()
        };
        let r = run_drop_test(&spec, 0.0).unwrap();
        let f = r.channel("reaction").unwrap();
        let last = *f.last().unwrap();
        assert!(last > 0.0);
        assert!((r.metric("peak_force_N") - last).abs() < 0.01 * last);
        assert!(r.metric("peak_omega_rad_s") < 1e-3);
    }

    #[test]
    fn rejects_bad_geometry() {
        let spec = DropSpec {
            contact_offset_m: 0.5,
            ..DropSpec::default()
        };
        assert!(run_drop_test(&spec, 0.0).is_err());
        let spec = DropSpec {
            height_m: -0.01,
            ..DropSpec::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn halving_dt_barely_moves_the_endpoint() {
        let run = |dt| {
            let spec = DropSpec {
                run: RunSettings { dt },
                ..DropSpec::default()
            };
            let r = run_drop_test(&spec, 0.0).unwrap();
            let y = r.channel("y").unwrap();
            (y[y.len() - 1] - y[0], r.metric("peak_force_N"))
        };
        let (coarse, fc) = run(1e-4);
        let (fine, ff) = run(5e-5);
        assert!(((coarse - fine) / fine).abs() < 0.01, "{coarse} vs {fine}");
        assert!(((fc - ff) / ff).abs() < 0.01, "{fc} vs {ff}");
    }
}
