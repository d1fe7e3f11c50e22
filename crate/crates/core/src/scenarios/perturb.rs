//! Rotational perturbation: a probe on a tilting plate pushes on the sole.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::jam::{ForceTable, JamConfig, PerturbMode};
use super::record::{sample_stride, TrialRecord};
use super::rig::{leg_tendon_params, Rig, RunSettings};
use crate::dynamics::{
    Actuation, ContactParams, Environment, JointDrive, LegModel, SimState, Surface, Vec2, ANKLE, HIP, KNEE,
    LEG_MOMENT_ARM_MM, LEG_TENDON_UNITS, SLIDE,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbSpec {
    pub total_mass_kg: f64,
    pub tilt_limit_deg: f64,
    pub tilt_rate_deg_s: f64,
    pub probe_radius_m: f64,
    /// Probe contact point relative to the ankle, positive ahead, m.
    pub toe_down_probe_m: f64,
    pub toe_up_probe_m: f64,
    /// Probe distance from the plate hinge, m.
    pub toe_down_lever_m: f64,
    pub toe_up_lever_m: f64,
    /// Sole–probe contact; the sock raises friction.
    pub contact: ContactParams,
    pub moment_arm_mm: f64,
    pub tendon_units: u32,
    pub settle_s: f64,
    pub run: RunSettings,
}

impl Default for PerturbSpec {
    fn default() -> Self {
        Self {
            total_mass_kg: 3.65,
            tilt_limit_deg: 15.0,
            tilt_rate_deg_s: 5.0,
            probe_radius_m: 0.015,
            toe_down_probe_m: -0.045,
            toe_up_probe_m: 0.06,
            toe_down_lever_m: 0.06,
            toe_up_lever_m: 0.08,
            contact: ContactParams {
                mu: 0.8,
                ..ContactParams::default()
            },
            moment_arm_mm: LEG_MOMENT_ARM_MM,
            tendon_units: LEG_TENDON_UNITS,
            settle_s: 0.5,
            run: RunSettings::default(),
        }
    }
}

impl PerturbSpec {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        self.contact.validate()?;
        if !(self.tilt_limit_deg >= 0.0 && self.tilt_limit_deg <= 45.0) {
            return Err(Error::InvalidSpec("tilt limit must lie in [0, 45]°".into()));
        }
        if !(self.tilt_rate_deg_s > 0.0 && self.probe_radius_m > 0.0) {
            return Err(Error::InvalidSpec("tilt rate and probe radius must be positive".into()));
        }
        if !(self.toe_down_lever_m > 0.0 && self.toe_up_lever_m > 0.0 && self.settle_s >= 0.0) {
            return Err(Error::InvalidSpec("plate levers must be positive".into()));
        }
        if !(self.toe_down_probe_m < 0.0 && self.toe_up_probe_m > 0.0) {
            return Err(Error::InvalidSpec(
                "toe-down probe sits behind the ankle, toe-up ahead".into(),
            ));
        }
        Ok(())
    }

    fn probe_and_lever(&self, mode: PerturbMode) -> (f64, f64) {
        match mode {
            PerturbMode::ToeDown => (self.toe_down_probe_m, self.toe_down_lever_m),
            PerturbMode::ToeUp => (self.toe_up_probe_m, self.toe_up_lever_m),
        }
    }
}

/// Tilts the plate to the limit and reports the largest probe force.
///
/// The leg hangs from a locked carriage and hip; tendon slides hold the pose
/// it settles into under gravity. Channels: probe force, tilt, extensions.
pub fn run_perturbation(spec: &PerturbSpec, mode: PerturbMode, jam: &JamConfig) -> Result<TrialRecord> {
    spec.validate()?;
    let mut model = LegModel::jeg(spec.total_mass_kg, leg_tendon_params()?)?;
    model.contact = spec.contact;
    for a in &mut model.attachments {
        a.moment_arm_mm = a.moment_arm_mm.signum() * spec.moment_arm_mm;
        a.units = spec.tendon_units;
    }
    model.validate()?;
    let pose = model.touchdown;
    let q = model.pose_q(0.0, &pose);
    let state = SimState::new(&model, q, vec![0.0; 4], jam.jamming_states())?;
    let hold = Actuation::free(4)
        .with(SLIDE, JointDrive::Locked)
        .with(HIP, JointDrive::Locked);
    let mut rig = Rig {
        model,
        env: Environment::default(),
        actuation: hold
            .clone()
            .with(KNEE, JointDrive::Pd { kp: 0.0, kd: 1.0 })
            .with(ANKLE, JointDrive::Pd { kp: 0.0, kd: 1.0 }),
        state,
        dt: spec.run.dt,
    };
    rig.advance(spec.settle_s)?;
    rig.actuation = hold;
    rig.state.qdot.iter_mut().for_each(|v| *v = 0.0);
    rig.state.t = 0.0;

    // Probe touching the sole, plate hinge on the side that makes it rise.
    let (along, lever) = spec.probe_and_lever(mode);
    let r = spec.probe_radius_m;
    let m = &rig.model;
    let qv = DVector::from_column_slice(&rig.state.q);
    let frames = m.chain.frames(&qv, &DVector::zeros(4));
    let foot = m.foot_link();
    let contact_point = frames.point(foot, Vec2::new(along, -m.foot.sole_depth));
    let c0 = contact_point - r * frames.normal(foot);
    let (pivot, sense) = match mode {
        PerturbMode::ToeDown => (c0 + Vec2::new(lever, 0.0), -1.0),
        PerturbMode::ToeUp => (c0 - Vec2::new(lever, 0.0), 1.0),
    };
    let limit = spec.tilt_limit_deg.to_radians();
    let rate = spec.tilt_rate_deg_s.to_radians();
    let probe_at = |tilt: f64| {
        let a = sense * tilt;
        let d = c0 - pivot;
        let c = pivot + Vec2::new(a.cos() * d.x - a.sin() * d.y, a.sin() * d.x + a.cos() * d.y);
        let w = if tilt < limit { sense * rate } else { 0.0 };
        let v = w * Vec2::new(-(c - pivot).y, (c - pivot).x);
        Surface::Disc {
            center: [c.x, c.y],
            radius: r,
            velocity: [v.x, v.y],
        }
    };
    rig.env.surfaces = vec![probe_at(0.0)];

    let mut rec = TrialRecord::new(
        "perturb",
        &format!("{}_{}", mode.as_str(), jam.label()),
        &[
            ("force", "N"),
            ("tilt", "deg"),
            ("x1", "mm"),
            ("x2", "mm"),
            ("x3", "mm"),
            ("x4", "mm"),
        ],
    );
    let push = |rig: &Rig, f: f64, tilt: f64, rec: &mut TrialRecord| {
        let x = rig.state.extensions(&rig.model);
        rec.push(rig.state.t, &[f, tilt.to_degrees(), x[0], x[1], x[2], x[3]]);
    };
    push(&rig, 0.0, 0.0, &mut rec);
    let stride = sample_stride(rig.dt);
    let n = if limit > 0.0 { spec.run.steps(limit / rate) } else { 0 };
    let mut peak = 0.0_f64;
    let mut engaged = false;
    let mut lost = 0usize;
    let lost_limit = spec.run.steps(0.05).max(1);
    for k in 1..=n {
        let tilt = (k as f64 * rig.dt * rate).min(limit);
        let info = rig.step()?;
        rig.env.surfaces[0] = probe_at(tilt);
        let f = info.total_contact_force().norm();
        peak = peak.max(f);
        if k % stride == 0 || k == n {
            push(&rig, f, tilt, &mut rec);
        }
        if f > 0.0 {
            engaged = true;
            lost = 0;
        } else if engaged {
            lost += 1;
            if lost >= lost_limit {
                rec.flag("slip_off");
                break;
            }
        }
    }
    rec.set_metric("peak_probe_force_N", peak);
    rec.set_metric("tilt_limit_deg", spec.tilt_limit_deg);
    Ok(rec)
}

/// One configuration's repeated peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: PerturbMode,
    pub config: JamConfig,
    pub mean: f64,
    pub sd: f64,
    pub peaks: Vec<f64>,
    /// Failed or flagged repeats, with reason.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

/// Outcome of a single sweep trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTrial {
    pub mode: PerturbMode,
    pub config: JamConfig,
    pub repeat: usize,
}

/// Every trial of a sweep in canonical order: mode, table row, repeat.
pub fn sweep_trials(modes: &[PerturbMode], repeats: usize) -> Vec<SweepTrial> {
    let mut out = Vec::new();
    for &mode in modes {
        for config in JamConfig::table() {
            for repeat in 0..repeats {
                out.push(SweepTrial { mode, config, repeat });
            }
        }
    }
    out
}

/// Sensor noise added to recorded peaks; zero SD keeps repeats identical.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PeakNoise {
    pub sd_n: f64,
    pub seed: u64,
}

impl PeakNoise {
    /// Noise for one trial, independent of execution order.
    pub fn sample(&self, trial_index: usize) -> f64 {
        if !(self.sd_n > 0.0) {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (trial_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        Normal::new(0.0, self.sd_n).map_or(0.0, |d| d.sample(&mut rng))
    }
}

impl SweepTable {
    /// Collates trial outcomes given in [`sweep_trials`] order.
    pub fn collate(
        trials: &[SweepTrial],
        outcomes: Vec<std::result::Result<TrialRecord, String>>,
        noise: PeakNoise,
    ) -> Self {
        let mut rows: Vec<SweepRow> = Vec::new();
        for (i, (trial, outcome)) in trials.iter().zip(outcomes).enumerate() {
            let row = match rows.last_mut() {
                Some(r) if r.mode == trial.mode && r.config == trial.config => r,
                _ => {
                    rows.push(SweepRow {
                        mode: trial.mode,
                        config: trial.config,
                        mean: f64::NAN,
                        sd: f64::NAN,
                        peaks: Vec::new(),
                        failures: Vec::new(),
                    });
                    rows.last_mut().expect("just pushed")
                }
            };
            match outcome {
                Ok(rec) => {
                    for f in &rec.flags {
                        row.failures.push(format!("repeat {}: {f}", trial.repeat));
                    }
                    row.peaks.push(rec.metric("peak_probe_force_N") + noise.sample(i));
                }
                Err(e) => row.failures.push(format!("repeat {}: {e}", trial.repeat)),
            }
        }
        for row in &mut rows {
            let n = row.peaks.len();
            if n > 0 {
                row.mean = row.peaks.iter().sum::<f64>() / n as f64;
                row.sd = if n > 1 {
                    (row.peaks.iter().map(|p| (p - row.mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
            }
        }
        Self { rows }
    }

    pub fn force_table(&self, mode: PerturbMode) -> ForceTable {
        ForceTable {
            rows: self
                .rows
                .iter()
                .filter(|r| r.mode == mode && r.mean.is_finite())
                .map(|r| (r.config, r.mean))
                .collect(),
        }
    }

    /// `mode,config,mean_peak_N,sd_N`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mode,config,mean_peak_N,sd_N\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.mode.as_str(), r.config.label(), r.mean, r.sd);
        }
        s
    }
}

/// Runs the sweep on the calling thread.
pub fn run_perturbation_sweep(
    spec: &PerturbSpec,
    modes: &[PerturbMode],
    repeats: usize,
    noise: PeakNoise,
) -> SweepTable {
    let trials = sweep_trials(modes, repeats);
    let mut last: Option<(PerturbMode, JamConfig, std::result::Result<TrialRecord, String>)> = None;
    let mut outcomes = Vec::with_capacity(trials.len());
    for t in &trials {
        // Repeats of a deterministic trial are identical; run each configuration once.
        match &last {
            Some((m, c, r)) if *m == t.mode && *c == t.config => outcomes.push(r.clone()),
            _ => {
                let r = run_perturbation(spec, t.mode, &t.config).map_err(|e| e.to_string());
                outcomes.push(r.clone());
                last = Some((t.mode, t.config, r));
            }
        }
    }
    SweepTable::collate(&trials, outcomes, noise)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_tilt_no_force() {
        let spec = PerturbSpec {
            tilt_limit_deg: 0.0,
            ..PerturbSpec::default()
        };
        let r = run_perturbation(&spec, PerturbMode::ToeUp, &JamConfig::unjammed()).unwrap();
        assert!(
            r.metric("peak_probe_force_N") < 1e-6,
            "{}",
            r.metric("peak_probe_force_N")
        );
    }

    #[test]
    fn jamming_stiffens_toe_up() {
        let spec = PerturbSpec::default();
        let peak = |mask| {
            run_perturbation(&spec, PerturbMode::ToeUp, &JamConfig::from_mask(mask))
                .unwrap()
                .metric("peak_probe_force_N")
        };
        let (free, k1, k4, all) = (peak(0), peak(0b0001), peak(0b1000), peak(0b1111));
        assert!(free < k4 && k4 <= all, "{free} {k4} {all}");
        assert!(k4 > k1);
    }

    #[test]
    fn collate_repeats() {
        let trials = sweep_trials(&[PerturbMode::ToeDown], 3);
        assert_eq!(trials.len(), 48);
        let mut rec = TrialRecord::new("perturb", "x", &[("force", "N")]);
        rec.set_metric("peak_probe_force_N", 10.0);
        let outcomes: Vec<_> = trials
            .iter()
            .map(|t| {
                if t.config.mask() == Some(3) && t.repeat == 1 {
                    Err("blew up".to_string())
                } else {
                    Ok(rec.clone())
                }
            })
            .collect();
        let table = SweepTable::collate(&trials, outcomes.clone(), PeakNoise::default());
        assert_eq!(table.rows.len(), 16);
        assert!(table.rows.iter().all(|r| r.mean == 10.0 && r.sd == 0.0));
        let bad = table.rows.iter().find(|r| r.config.mask() == Some(3)).unwrap();
        assert_eq!((bad.peaks.len(), bad.failures.len()), (2, 1));

        let noise = PeakNoise { sd_n: 1.0, seed: 7 };
        let a = SweepTable::collate(&trials, outcomes.clone(), noise);
        let b = SweepTable::collate(&trials, outcomes, noise);
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.rows.iter().all(|r| r.sd > 0.0));
    }
}
