//! Treadmill-style walking of the leg on a force plate.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::gait::{jamming_schedule, leg_ik, GaitCase, GaitSpec};
use super::record::{sample_stride, TrialRecord, SAMPLE_DT};
use super::rig::{leg_tendon_params, Rig, RunSettings};
use crate::analysis::{
    gaussian_lowpass, resultant, segment_and_peaks, spike_height, GrfRecord, Series, CONTACT_THRESHOLD_N,
    GAUSSIAN_SIGMA_S,
};
use crate::dynamics::{
    assemble, Actuation, ContactParams, ContactSample, Environment, JointDrive, LegModel, Pose, SimState, SlideStop,
    Surface, Vec2, HIP, KNEE, LEG_MOMENT_ARM_MM, LEG_TENDON_UNITS,
};
use crate::error::{Error, Result};
use crate::tendon::jamming::JammingState;

/// Window around the jam onset searched for a force spike, s.
pub const SPIKE_HALF_WINDOW_S: f64 = 0.3;
/// Width of the baseline the spike is measured against, s.
pub const SPIKE_BASELINE_SIGMA_S: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkSpec {
    pub gait: GaitSpec,
    pub cycles: usize,
    pub total_mass_kg: f64,
    pub contact: ContactParams,
    pub moment_arm_mm: f64,
    pub tendon_units: u32,
    pub hip_kp: f64,
    pub hip_kd: f64,
    /// Depth the flat foot would reach below the plate with the carriage on its
    /// stop, m; negative leaves a gap.
    pub stance_penetration_m: f64,
    pub stop_stiffness: f64,
    pub stop_damping: f64,
    pub jam_time_constant_s: f64,
    /// Run the plate as a belt at the mean stance foot speed, so the fixed
    /// hip does not drag the foot.
    pub belt: bool,
    /// Hip tracking error beyond which the record is flagged, deg.
    pub tracking_limit_deg: f64,
    pub run: RunSettings,
}

impl Default for WalkSpec {
    fn default() -> Self {
        Self {
            gait: GaitSpec::default(),
            cycles: 4,
            total_mass_kg: 3.65,
            contact: ContactParams::default(),
            moment_arm_mm: LEG_MOMENT_ARM_MM,
            tendon_units: LEG_TENDON_UNITS,
            hip_kp: 300.0,
            hip_kd: 5.0,
            stance_penetration_m: 0.0,
            stop_stiffness: 2e4,
            stop_damping: 200.0,
            jam_time_constant_s: 0.1,
            belt: true,
            tracking_limit_deg: 10.0,
            run: RunSettings::default(),
        }
    }
}

impl WalkSpec {
    pub fn validate(&self) -> Result<()> {
        self.gait.validate()?;
        self.run.validate()?;
        self.contact.validate()?;
        if self.cycles == 0 {
            return Err(Error::InvalidSpec("at least one gait cycle required".into()));
        }
        let positive = [
            self.hip_kp,
            self.stop_stiffness,
            self.tracking_limit_deg,
            self.moment_arm_mm,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.hip_kd >= 0.0) || !(self.stop_damping >= 0.0) {
            return Err(Error::InvalidSpec(
                "hip gains, stop and tracking limit must be positive".into(),
            ));
        }
        if !self.stance_penetration_m.is_finite() || !(self.jam_time_constant_s >= 0.0) {
            return Err(Error::InvalidSpec(
                "penetration must be finite and jam lag non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn sole_frames(model: &LegModel, q: &[f64]) -> crate::dynamics::Frames {
    let n = q.len();
    model.chain.frames(&DVector::from_column_slice(q), &DVector::zeros(n))
}

fn target_pose(model: &LegModel, gait: &GaitSpec, t: f64) -> Result<Pose> {
    let phase = gait.phase(t);
    leg_ik(model, Vec2::zeros(), gait.ankle(phase)?, gait.pitch_at(phase))
}

/// Walks `spec.cycles` cycles of `case`.
///
/// Channels: plate forces `fz`, `fx` and their resultant `fr` (raw), carriage
/// height, joint angles, tendon extensions and vacuum levels.
pub fn run_walking(spec: &WalkSpec, case: GaitCase) -> Result<TrialRecord> {
    spec.validate()?;
    let gait = &spec.gait;
    let mut model = LegModel::jeg(spec.total_mass_kg, leg_tendon_params()?)?;
    model.contact = spec.contact;
    for a in &mut model.attachments {
        a.moment_arm_mm = a.moment_arm_mm.signum() * spec.moment_arm_mm;
        a.units = spec.tendon_units;
    }
    let depth = -gait.stance[0][1];
    let stop = depth + model.foot.sole_depth - spec.stance_penetration_m;
    model.slide_floor = Some(SlideStop {
        height: stop,
        stiffness: spec.stop_stiffness,
        damping: spec.stop_damping,
    });
    // Start at rest at mid-swing, foot clear of the plate, one warm-up cycle
    // before recording begins.
    let swing = 100.0 - gait.toe_off_pct + gait.heel_strike_pct;
    let t0 = -(100.0 - (gait.toe_off_pct + 0.5 * swing)).rem_euclid(100.0) / 100.0 * gait.cycle_duration_s;
    let pose = target_pose(&model, gait, t0)?;
    for a in &mut model.attachments {
        a.reference_rad = if a.joint == KNEE { pose.knee } else { pose.ankle };
    }
    model.validate()?;

    let q = model.pose_q(stop, &pose);
    let jam = jamming_schedule(gait, case, gait.phase(t0))?.map(|p| JammingState {
        time_constant_s: spec.jam_time_constant_s,
        ..JammingState::settled(p)
    });
    let mut state = SimState::new(&model, q, vec![0.0; 4], jam.to_vec())?;
    state.t = t0 - gait.cycle_duration_s;
    let actuation = Actuation::free(4).with(
        HIP,
        JointDrive::Pd {
            kp: spec.hip_kp,
            kd: spec.hip_kd,
        },
    );
    let mut rig = Rig {
        model,
        env: Environment {
            surfaces: vec![Surface::belt(0.0, if spec.belt { gait.stance_speed() } else { 0.0 })],
        },
        actuation,
        state,
        dt: spec.run.dt,
    };

    let mut rec = TrialRecord::new(
        "walk",
        &format!("case_{}", case.as_str()),
        &[
            ("fz", "N"),
            ("fx", "N"),
            ("fr", "N"),
            ("cop", "m"),
            ("y", "m"),
            ("hip", "rad"),
            ("knee", "rad"),
            ("ankle", "rad"),
            ("x1", "mm"),
            ("x2", "mm"),
            ("x3", "mm"),
            ("x4", "mm"),
            ("p1", "kPa"),
            ("p2", "kPa"),
            ("p3", "kPa"),
            ("p4", "kPa"),
        ],
    );
    let sample = |rig: &Rig, contacts: &[ContactSample], rec: &mut TrialRecord| {
        let s = &rig.state;
        let f = contacts.iter().fold(Vec2::zeros(), |acc, c| acc + c.force);
        let ankle = sole_frames(&rig.model, &s.q).pivots[rig.model.foot_link()];
        let cop = if f.y > 0.0 {
            contacts.iter().map(|c| c.point.x * c.force.y).sum::<f64>() / f.y - ankle.x
        } else {
            0.0
        };
        let x = s.extensions(&rig.model);
        let p: Vec<f64> = s.jamming.iter().map(|j| j.pressure_kpa).collect();
        rec.push(
            s.t,
            &[
                f.y,
                f.x,
                f.norm(),
                cop,
                s.q[0],
                s.q[1],
                s.q[2],
                s.q[3],
                x[0],
                x[1],
                x[2],
                x[3],
                p[0],
                p[1],
                p[2],
                p[3],
            ],
        );
    };

    let stride = sample_stride(rig.dt);
    let lead = spec.run.steps(gait.cycle_duration_s);
    let n = lead + spec.run.steps(spec.cycles as f64 * gait.cycle_duration_s);
    let h = 1e-4 * gait.cycle_duration_s;
    let mut worst_tracking = 0.0_f64;
    let mut hyperextended = false;
    for k in 0..n {
        if k == lead {
            // Samples sit on the grid t0, t0 + 1 ms, ...
            rig.state.t = t0;
            let asm = assemble(&rig.model, &rig.env, &rig.state, &rig.actuation);
            sample(&rig, &asm.contacts, &mut rec);
        }
        let t = rig.state.t;
        let pose = target_pose(&rig.model, gait, t)?;
        let ahead = target_pose(&rig.model, gait, t + h)?;
        let behind = target_pose(&rig.model, gait, t - h)?;
        rig.actuation.targets[HIP] = pose.hip;
        rig.actuation.target_rates[HIP] = (ahead.hip - behind.hip) / (2.0 * h);
        rig.state.references = vec![pose.knee, pose.knee, pose.ankle, pose.ankle];
        let pressures = jamming_schedule(gait, case, gait.phase(t))?;
        for (j, p) in rig.state.jamming.iter_mut().zip(pressures) {
            j.set_target(p);
        }
        let info = rig.step()?;
        if k < lead {
            continue;
        }
        worst_tracking = worst_tracking.max((rig.state.q[HIP] - pose.hip).abs());
        hyperextended |= rig.state.q[KNEE] < 0.0;
        if (k + 1 - lead).is_multiple_of(stride) {
            sample(&rig, &info.contacts, &mut rec);
        }
    }

    let grf = grf_peaks(&rec, gait)?;
    rec.set_metric("touchdown_mean_N", grf.touchdown.mean);
    rec.set_metric("pushoff_mean_N", grf.pushoff.mean);
    rec.set_metric("stances", grf.cycles.len() as f64);
    rec.set_metric(
        "distinct_pushoff_fraction",
        grf.cycles.iter().filter(|c| c.pushoff_prominent).count() as f64 / grf.cycles.len().max(1) as f64,
    );
    rec.set_metric(
        "distinct_fraction",
        grf.cycles
            .iter()
            .filter(|c| c.touchdown_prominent && c.pushoff_prominent)
            .count() as f64
            / grf.cycles.len().max(1) as f64,
    );
    let weight = rig.model.chain.total_mass() * rig.model.chain.gravity;
    rec.set_metric("supported_weight_N", weight);
    rec.set_metric("impulse_ratio", impulse_ratio(&rec, &grf, weight)?);
    rec.set_metric("swing_peak_N", swing_peak(&rec, gait)?);
    rec.set_metric("onset_spike_N", onset_spike(&rec, gait, spec.cycles)?);
    rec.set_metric("max_hip_error_deg", worst_tracking.to_degrees());
    if grf.no_contact {
        rec.flag("no_contact");
    }
    if worst_tracking.to_degrees() > spec.tracking_limit_deg {
        rec.flag("tracking_lost");
    }
    if hyperextended {
        rec.flag("knee_hyperextension");
    }
    Ok(rec)
}

/// Gaussian-filtered resultant plate force of a walking record.
pub fn filtered_grf(rec: &TrialRecord) -> Result<Series> {
    let fz = rec
        .channel("fz")
        .ok_or_else(|| Error::InvalidSpec("record has no fz channel".into()))?;
    let fx = rec
        .channel("fx")
        .ok_or_else(|| Error::InvalidSpec("record has no fx channel".into()))?;
    let fr = Series::new(rec.t.first().copied().unwrap_or(0.0), SAMPLE_DT, resultant(fz, fx)?)?;
    gaussian_lowpass(&fr, GAUSSIAN_SIGMA_S)
}

/// Stance segmentation and touchdown / push-off peaks.
pub fn grf_peaks(rec: &TrialRecord, gait: &GaitSpec) -> Result<GrfRecord> {
    segment_and_peaks(&filtered_grf(rec)?, CONTACT_THRESHOLD_N, gait.cycle_duration_s)
}

/// Mean over stances of the vertical impulse divided by weight times contact
/// duration.
pub fn impulse_ratio(rec: &TrialRecord, grf: &GrfRecord, weight: f64) -> Result<f64> {
    let fz = rec
        .channel("fz")
        .ok_or_else(|| Error::InvalidSpec("record has no fz channel".into()))?;
    let ratios: Vec<f64> = grf
        .cycles
        .iter()
        .filter(|c| c.end > c.start + 1)
        .map(|c| {
            let imp: f64 = fz[c.start..c.end].iter().sum::<f64>() * SAMPLE_DT;
            imp / (weight * (c.end - c.start) as f64 * SAMPLE_DT)
        })
        .collect();
    if ratios.is_empty() {
        return Ok(f64::NAN);
    }
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// Largest filtered force over the middle half of every swing, N.
pub fn swing_peak(rec: &TrialRecord, gait: &GaitSpec) -> Result<f64> {
    let fr = filtered_grf(rec)?;
    let swing = 100.0 - gait.toe_off_pct + gait.heel_strike_pct;
    let (from, to) = (gait.toe_off_pct + 0.25 * swing, gait.toe_off_pct + 0.75 * swing);
    Ok((0..fr.len())
        .filter(|&i| {
            let p = gait.phase(fr.time(i));
            let p = if p < gait.toe_off_pct { p + 100.0 } else { p };
            (from..to).contains(&p)
        })
        .map(|i| fr.values[i])
        .fold(0.0, f64::max))
}

/// Largest force excursion above the smoothed baseline near the case IV jam
/// onset, over all cycles, N.
pub fn onset_spike(rec: &TrialRecord, gait: &GaitSpec, cycles: usize) -> Result<f64> {
    let fr = filtered_grf(rec)?;
    let mut best = 0.0_f64;
    for c in 0..cycles {
        let t = (c as f64 + gait.case4_onset_pct / 100.0) * gait.cycle_duration_s;
        best = best.max(spike_height(&fr, t, SPIKE_HALF_WINDOW_S, SPIKE_BASELINE_SIGMA_S)?);
    }
    Ok(best)
}

/// `case,cycle,touchdown_peak_N,pushoff_peak_N`.
pub fn grf_summary_csv<L: std::fmt::Display>(rows: &[(L, GrfRecord)]) -> String {
    let mut s = String::from("case,cycle,touchdown_peak_N,pushoff_peak_N\n");
    for (case, grf) in rows {
        for (i, c) in grf.cycles.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", case, i + 1, c.touchdown_peak, c.pushoff_peak);
        }
    }
    s
}
