//! Foot trajectory, leg inverse kinematics and the jamming schedules.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{LegModel, Pose, Vec2};
use crate::error::{Error, Result};
use crate::tendon::jamming::JAMMED_KPA;

/// De Casteljau evaluation of a planar Bezier curve.
pub fn bezier_point(control: &[Vec2], s: f64) -> Result<Vec2> {
    if control.len() < 2 {
        return Err(Error::InvalidSpec(
            "a Bezier curve needs at least two control points".into(),
        ));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("Bezier parameter {s} outside [0, 1]")));
    }
    let mut pts = control.to_vec();
    for level in (1..pts.len()).rev() {
        for i in 0..level {
            pts[i] = (1.0 - s) * pts[i] + s * pts[i + 1];
        }
    }
    Ok(pts[0])
}

/// Thigh and shank lengths of a leg model.
fn segment_lengths(model: &LegModel) -> Result<(f64, f64)> {
    match model.chain.links.as_slice() {
        [femur, tibia, _] => Ok((femur.length, tibia.length)),
        _ => Err(Error::Configuration("inverse kinematics needs a three-link leg".into())),
    }
}

/// Joint angles placing the ankle at `ankle` with the sole pitched `pitch`
/// rad toe-up, hip at `hip`. The knee bends forward of the hip–ankle line.
pub fn leg_ik(model: &LegModel, hip: Vec2, ankle: Vec2, pitch: f64) -> Result<Pose> {
    let (l1, l2) = segment_lengths(model)?;
    let d = ankle - hip;
    let r = d.norm();
    let (near, far) = ((l1 - l2).abs(), l1 + l2);
    if r > far {
        return Err(Error::Unreachable { excess_m: r - far });
    }
    if r < near || r == 0.0 {
        return Err(Error::Unreachable { excess_m: near - r });
    }
    let cos_knee = ((r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let knee = cos_knee.acos();
    let beta = d.x.atan2(-d.y);
    let cos_alpha = ((l1 * l1 + r * r - l2 * l2) / (2.0 * l1 * r)).clamp(-1.0, 1.0);
    let hip_angle = beta + cos_alpha.acos();
    let shank = hip_angle - knee;
    Ok(Pose {
        hip: hip_angle,
        knee,
        ankle: shank + FRAC_PI_2 - pitch,
    })
}

/// Ankle position and toe-up sole pitch of `pose` with the hip at `hip`.
pub fn leg_fk(model: &LegModel, hip: Vec2, pose: &Pose) -> Result<(Vec2, f64)> {
    let (l1, l2) = segment_lengths(model)?;
    let shank = pose.hip - pose.knee;
    let ankle = hip + l1 * Vec2::new(pose.hip.sin(), -pose.hip.cos()) + l2 * Vec2::new(shank.sin(), -shank.cos());
    Ok((ankle, shank + FRAC_PI_2 - pose.ankle))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GaitCase {
    I,
    II,
    III,
    IV,
}

impl GaitCase {
    pub const ALL: [GaitCase; 4] = [GaitCase::I, GaitCase::II, GaitCase::III, GaitCase::IV];

    pub fn as_str(self) -> &'static str {
        match self {
            GaitCase::I => "I",
            GaitCase::II => "II",
            GaitCase::III => "III",
            GaitCase::IV => "IV",
        }
    }
}

impl fmt::Display for GaitCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GaitCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(GaitCase::I),
            "II" | "2" => Ok(GaitCase::II),
            "III" | "3" => Ok(GaitCase::III),
            "IV" | "4" => Ok(GaitCase::IV),
            _ => Err(Error::UnknownCase(s.to_string())),
        }
    }
}

/// Per-tendon jammed windows `[start, end)` in percent of the cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JamWindows {
    pub k1: Vec<[f64; 2]>,
    pub k2: Vec<[f64; 2]>,
    pub k3: Vec<[f64; 2]>,
    pub k4: Vec<[f64; 2]>,
}

impl Default for JamWindows {
    fn default() -> Self {
        Self {
            k1: vec![[0.0, 30.0], [85.0, 100.0]],
            k2: vec![[30.0, 60.0]],
            k3: vec![[0.0, 15.0], [60.0, 100.0]],
            k4: vec![[10.0, 55.0]],
        }
    }
}

impl JamWindows {
    fn tendons(&self) -> [&[[f64; 2]]; 4] {
        [&self.k1, &self.k2, &self.k3, &self.k4]
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.tendons().into_iter().flatten() {
            if !(0.0 <= w[0] && w[0] < w[1] && w[1] <= 100.0) {
                return Err(Error::InvalidSpec(format!(
                    "jamming window {w:?} must satisfy 0 ≤ start < end ≤ 100"
                )));
            }
        }
        Ok(())
    }
}

/// Planar foot path and timing of one gait cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitSpec {
    pub cycle_duration_s: f64,
    /// Ankle path relative to the hip while the foot is down, m.
    pub stance: Vec<[f64; 2]>,
    /// Ankle path from toe-off back to heel strike, m.
    pub swing: Vec<[f64; 2]>,
    pub heel_strike_pct: f64,
    pub midstance_pct: f64,
    pub push_off_pct: f64,
    pub toe_off_pct: f64,
    /// Sole pitch keyframes `[phase %, deg toe-up]`, linear and periodic.
    pub pitch: Vec<[f64; 2]>,
    pub case: GaitCase,
    pub case3: JamWindows,
    pub case4_onset_pct: f64,
}

impl Default for GaitSpec {
    fn default() -> Self {
        let depth = 0.475;
        Self {
            cycle_duration_s: 10.0,
            stance: vec![[0.06, -depth], [-0.06, -depth]],
            swing: vec![
                [-0.06, -depth],
                [-0.08, -depth + 0.04],
                [0.08, -depth + 0.04],
                [0.06, -depth],
            ],
            heel_strike_pct: 5.0,
            midstance_pct: 40.0,
            push_off_pct: 60.0,
            toe_off_pct: 70.0,
            pitch: vec![
                [0.0, 10.0],
                [5.0, 10.0],
                [15.0, 0.0],
                [40.0, 0.0],
                [60.0, -10.0],
                [70.0, -20.0],
                [85.0, 0.0],
            ],
            case: GaitCase::II,
            case3: JamWindows::default(),
            case4_onset_pct: 43.0,
        }
    }
}

fn points(v: &[[f64; 2]]) -> Vec<Vec2> {
    v.iter().map(|p| Vec2::new(p[0], p[1])).collect()
}

impl GaitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cycle_duration_s > 0.0) {
            return Err(Error::InvalidSpec("cycle duration must be positive".into()));
        }
        let marks = [
            self.heel_strike_pct,
            self.midstance_pct,
            self.push_off_pct,
            self.toe_off_pct,
        ];
        if !(marks[0] >= 0.0 && marks.windows(2).all(|w| w[0] < w[1]) && marks[3] < 100.0) {
            return Err(Error::InvalidSpec(
                "heel strike, midstance, push-off and toe-off must increase within [0, 100)".into(),
            ));
        }
        if self.stance.len() < 2 || self.swing.len() < 2 {
            return Err(Error::InvalidSpec(
                "stance and swing need at least two control points".into(),
            ));
        }
        let close = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12;
        let joins =
            close(self.stance.last().unwrap(), &self.swing[0]) && close(self.swing.last().unwrap(), &self.stance[0]);
        if !joins {
            return Err(Error::InvalidSpec(
                "stance and swing must join into a closed foot path".into(),
            ));
        }
        if self.pitch.is_empty() || !self.pitch.windows(2).all(|w| w[0][0] < w[1][0]) {
            return Err(Error::InvalidSpec(
                "pitch keyframes must be non-empty with increasing phase".into(),
            ));
        }
        if self.pitch.iter().any(|k| !(0.0..100.0).contains(&k[0])) {
            return Err(Error::InvalidSpec("pitch keyframe phases must lie in [0, 100)".into()));
        }
        if !(0.0..100.0).contains(&self.case4_onset_pct) {
            return Err(Error::InvalidSpec("case IV onset must lie in [0, 100)".into()));
        }
        self.case3.validate()
    }

    /// Phase of time `t`, percent.
    pub fn phase(&self, t: f64) -> f64 {
        (100.0 * t / self.cycle_duration_s).rem_euclid(100.0)
    }

    /// Ankle target relative to the hip at `phase` percent.
    pub fn ankle(&self, phase: f64) -> Result<Vec2> {
        let (hs, to) = (self.heel_strike_pct, self.toe_off_pct);
        let p = phase.rem_euclid(100.0);
        if (hs..to).contains(&p) {
            bezier_point(&points(&self.stance), (p - hs) / (to - hs))
        } else {
            let swing_len = 100.0 - to + hs;
            let into = (p - to).rem_euclid(100.0);
            bezier_point(&points(&self.swing), (into / swing_len).clamp(0.0, 1.0))
        }
    }

    /// Toe-up sole pitch at `phase`, rad.
    pub fn pitch_at(&self, phase: f64) -> f64 {
        let p = phase.rem_euclid(100.0);
        let k = &self.pitch;
        let n = k.len();
        let i = k.iter().rposition(|kf| kf[0] <= p);
        let (a, b) = match i {
            Some(i) if i + 1 < n => (k[i], k[i + 1]),
            Some(i) => (k[i], [k[0][0] + 100.0, k[0][1]]),
            None => ([k[n - 1][0] - 100.0, k[n - 1][1]], k[0]),
        };
        let w = if b[0] > a[0] { (p - a[0]) / (b[0] - a[0]) } else { 0.0 };
        (a[1] + w * (b[1] - a[1])).to_radians()
    }

    /// Mean horizontal ankle speed over stance relative to the hip, m/s.
    pub fn stance_speed(&self) -> f64 {
        let (a, b) = (self.stance[0], self.stance[self.stance.len() - 1]);
        let duration = (self.toe_off_pct - self.heel_strike_pct) / 100.0 * self.cycle_duration_s;
        (b[0] - a[0]) / duration
    }

    pub fn in_stance(&self, phase: f64) -> bool {
        (self.heel_strike_pct..self.toe_off_pct).contains(&phase.rem_euclid(100.0))
    }
}

/// Target vacuum of k1..k4 at `phase` percent, kPa.
pub fn jamming_schedule(spec: &GaitSpec, case: GaitCase, phase: f64) -> Result<[f64; 4]> {
    if !(0.0..100.0).contains(&phase) {
        return Err(Error::Domain(format!("gait phase {phase} outside [0, 100)")));
    }
    Ok(match case {
        GaitCase::I => [0.0; 4],
        GaitCase::II => [JAMMED_KPA; 4],
        GaitCase::III => spec.case3.tendons().map(|ws| {
            if ws.iter().any(|w| (w[0]..w[1]).contains(&phase)) {
                JAMMED_KPA
            } else {
                0.0
            }
        }),
        GaitCase::IV => {
            if phase < spec.case4_onset_pct {
                [0.0; 4]
            } else {
                [JAMMED_KPA; 4]
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tendon::iwan::TendonParams;
    use crate::tendon::material::FibreBundleSpec;
    use proptest::prelude::*;

    fn leg() -> LegModel {
        LegModel::jeg(
            3.65,
            TendonParams::initial_guess(&FibreBundleSpec::new(2.0, 4)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn bezier_endpoints_and_midpoint() {
        let c = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 2.0), Vec2::new(3.0, -1.0)];
        assert_eq!(bezier_point(&c, 0.0).unwrap(), c[0]);
        assert_eq!(bezier_point(&c, 1.0).unwrap(), c[2]);
        let mid = 0.25 * c[0] + 0.5 * c[1] + 0.25 * c[2];
        assert!((bezier_point(&c, 0.5).unwrap() - mid).norm() < 1e-12);
        assert!(bezier_point(&c, 1.5).is_err());
        assert!(bezier_point(&c[..1], 0.5).is_err());
    }

    #[test]
    fn straight_leg_down() {
        let m = leg();
        let pose = leg_ik(&m, Vec2::zeros(), Vec2::new(0.0, -0.5), 0.0).unwrap();
        assert!(pose.knee.abs() < 1e-12 && pose.hip.abs() < 1e-12);
        match leg_ik(&m, Vec2::zeros(), Vec2::new(0.0, -0.501), 0.0) {
            Err(Error::Unreachable { excess_m }) => assert!((excess_m - 0.001).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn touchdown_pose_round_trips() {
        let m = leg();
        let td = Pose::touchdown();
        let (ankle, pitch) = leg_fk(&m, Vec2::zeros(), &td).unwrap();
        assert!((pitch.to_degrees() - 6.5).abs() < 1e-9);
        let back = leg_ik(&m, Vec2::zeros(), ankle, pitch).unwrap();
        assert!((back.hip - td.hip).abs() < 1e-9 && (back.knee - td.knee).abs() < 1e-9);
        assert!((back.ankle - td.ankle).abs() < 1e-9);
    }

    #[test]
    fn schedules() {
        let g = GaitSpec::default();
        assert_eq!(jamming_schedule(&g, GaitCase::I, 50.0).unwrap(), [0.0; 4]);
        assert_eq!(jamming_schedule(&g, GaitCase::II, 50.0).unwrap(), [50.0; 4]);
        assert_eq!(jamming_schedule(&g, GaitCase::IV, 10.0).unwrap(), [0.0; 4]);
        assert_eq!(jamming_schedule(&g, GaitCase::IV, 60.0).unwrap(), [50.0; 4]);
        assert_eq!(
            jamming_schedule(&g, GaitCase::III, 12.0).unwrap(),
            [50.0, 0.0, 50.0, 50.0]
        );
        assert_eq!(
            jamming_schedule(&g, GaitCase::III, 70.0).unwrap(),
            [0.0, 0.0, 50.0, 0.0]
        );
        assert!(jamming_schedule(&g, GaitCase::I, 100.0).is_err());
        assert!("V".parse::<GaitCase>().is_err());
        assert_eq!("iii".parse::<GaitCase>().unwrap(), GaitCase::III);
    }

    #[test]
    fn default_path_is_closed_and_periodic() {
        let g = GaitSpec::default();
        g.validate().unwrap();
        let a = g.ankle(g.heel_strike_pct).unwrap();
        let b = g.ankle(g.heel_strike_pct - 1e-9).unwrap();
        assert!((a - b).norm() < 1e-9);
        let top = (0..1000)
            .map(|i| g.ankle(i as f64 / 10.0).unwrap().y)
            .fold(f64::MIN, f64::max);
        assert!((top - (-0.475 + 0.03)).abs() < 1e-9);
        assert!((g.pitch_at(99.9999) - g.pitch_at(0.0)).abs() < 1e-5);
        assert!((g.pitch_at(50.0).to_degrees() + 5.0).abs() < 1e-9);
        let mut bad = g.clone();
        bad.swing[0] = [0.0, 0.0];
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn ik_round_trip(r in 0.05f64..0.499, ang in -1.2f64..1.2, pitch in -0.6f64..0.6, hx in -1.0f64..1.0) {
            let m = leg();
            let hip = Vec2::new(hx, 0.3);
            let target = hip + r * Vec2::new(ang.sin(), -ang.cos());
            let pose = leg_ik(&m, hip, target, pitch).unwrap();
            let (ankle, p) = leg_fk(&m, hip, &pose).unwrap();
            prop_assert!((ankle - target).norm() < 1e-9);
            prop_assert!((p - pitch).abs() < 1e-9);
            prop_assert!(pose.knee >= 0.0);
        }

        #[test]
        fn bezier_translation(dx in -1.0f64..1.0, dy in -1.0f64..1.0, s in 0.0f64..=1.0) {
            let c = [Vec2::new(0.0, 0.0), Vec2::new(0.3, 0.7), Vec2::new(1.0, -0.2), Vec2::new(1.5, 0.4)];
            let shift = Vec2::new(dx, dy);
            let moved: Vec<Vec2> = c.iter().map(|p| p + shift).collect();
            let d = bezier_point(&moved, s).unwrap() - bezier_point(&c, s).unwrap();
            prop_assert!((d - shift).norm() < 1e-12);
        }

        #[test]
        fn bezier_hits_endpoints_exactly(pts in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 2..6)) {
            let c: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
            prop_assert_eq!(bezier_point(&c, 0.0).unwrap(), c[0]);
            prop_assert_eq!(bezier_point(&c, 1.0).unwrap(), c[c.len() - 1]);
        }
    }
}
