//! Leg and drop-rig descriptions: chain, foot, tendon attachments.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::chain::{Chain, JointSpec, LinkSpec, Vec2, STANDARD_GRAVITY};
use super::contact::ContactParams;
use crate::error::{Error, Result};
use crate::tendon::iwan::{TendonModel, TendonParams};
use crate::tendon::jamming::{JammingState, JAMMED_KPA};
use crate::tendon::material::FibreBundleSpec;
use crate::tendon::surrogate::{LoopBranch, PolySurrogate};

/// Index of each generalised coordinate of the leg.
pub const SLIDE: usize = 0;
pub const HIP: usize = 1;
pub const KNEE: usize = 2;
pub const ANKLE: usize = 3;

pub const TRAVEL_LIMIT_MM: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TendonId {
    /// Knee extensor.
    K1,
    /// Knee flexor.
    K2,
    /// Ankle dorsiflexor.
    K3,
    /// Ankle plantarflexor.
    K4,
}

impl TendonId {
    pub const ALL: [TendonId; 4] = [TendonId::K1, TendonId::K2, TendonId::K3, TendonId::K4];

    pub fn as_str(self) -> &'static str {
        match self {
            TendonId::K1 => "k1",
            TendonId::K2 => "k2",
            TendonId::K3 => "k3",
            TendonId::K4 => "k4",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Force law driving a tendon attachment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForceLaw {
    Hysteretic {
        spec: FibreBundleSpec,
        params: TendonParams,
    },
    Surrogate {
        unjammed: PolySurrogate,
        jammed: PolySurrogate,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TendonAttachment {
    pub id: TendonId,
    /// Index of the driven coordinate in `q`.
    pub joint: usize,
    /// Signed lever arm, mm of tendon extension per radian.
    pub moment_arm_mm: f64,
    /// Joint angle at which the tendon is unstretched, rad.
    pub reference_rad: f64,
    pub travel_limit_mm: f64,
    /// Identical tendons acting in parallel.
    pub units: u32,
    pub law: ForceLaw,
}

impl TendonAttachment {
    pub fn extension_mm(&self, angle: f64, reference: f64) -> f64 {
        self.moment_arm_mm * (angle - reference)
    }
}

/// Heel, toe and sole depth of the last link, in its local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootGeometry {
    /// Distance behind the pivot, m.
    pub heel: f64,
    /// Distance ahead of the pivot, m.
    pub toe: f64,
    /// Depth of the sole below the pivot, m.
    pub sole_depth: f64,
    /// Sole samples between heel and toe tested against the ground.
    pub sole_samples: usize,
}

impl FootGeometry {
    pub fn heel_local(&self) -> Vec2 {
        Vec2::new(-self.heel, -self.sole_depth)
    }

    pub fn toe_local(&self) -> Vec2 {
        Vec2::new(self.toe, -self.sole_depth)
    }

    /// Heel, interior samples and toe, in order.
    pub fn ground_points(&self) -> Vec<Vec2> {
        let n = self.sole_samples + 2;
        (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                self.heel_local() + s * (self.toe_local() - self.heel_local())
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardStop {
    /// N per m of travel beyond the limit.
    pub stiffness: f64,
    /// N·s/m while moving further out.
    pub damping: f64,
}

impl Default for HardStop {
    fn default() -> Self {
        Self {
            stiffness: 2e6,
            damping: 500.0,
        }
    }
}

/// Compliant end stop under the carriage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlideStop {
    /// Slide coordinate at which the stop engages, m.
    pub height: f64,
    pub stiffness: f64,
    /// N·s/m while compressing.
    pub damping: f64,
}

impl SlideStop {
    pub fn rigid(height: f64) -> Self {
        let h = HardStop::default();
        Self {
            height,
            stiffness: h.stiffness,
            damping: h.damping,
        }
    }
}

/// Joint angles of a pose, rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub hip: f64,
    pub knee: f64,
    pub ankle: f64,
}

impl Pose {
    pub fn from_degrees(hip: f64, knee: f64, ankle: f64) -> Self {
        Self {
            hip: hip.to_radians(),
            knee: knee.to_radians(),
            ankle: ankle.to_radians(),
        }
    }

    /// Heel-strike pose of the leg.
    pub fn touchdown() -> Self {
        Self::from_degrees(14.0, 17.5, 80.0)
    }
}

/// A planar rig: chain, foot, tendons, contact and end stops.
///
/// Leg angle conventions: `θ_hip` is the femur angle from the downward
/// vertical, positive forward; `θ_knee` is knee flexion, so the shank sits at
/// `θ_hip − θ_knee`; `θ_ankle` is the included angle between shin and foot,
/// 90° at neutral, smaller when dorsiflexed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegModel {
    pub chain: Chain,
    pub foot: FootGeometry,
    pub attachments: Vec<TendonAttachment>,
    pub contact: ContactParams,
    pub stops: HardStop,
    pub touchdown: Pose,
    /// Lower end stop of the slide, if any.
    pub slide_floor: Option<SlideStop>,
}

pub const LEG_MOMENT_ARM_MM: f64 = 25.0;
pub const LEG_TENDON_UNITS: u32 = 2;
pub const DROP_RIG_ARM_MM: f64 = 30.0;

impl LegModel {
    /// The four-tendon leg with default links and a carriage making up `total_mass`.
    pub fn jeg(total_mass: f64, params: TendonParams) -> Result<Self> {
        let femur = LinkSpec::rod("femur", 0.9, 0.25);
        let tibia = LinkSpec::rod("tibia", 0.9, 0.25);
        let foot = LinkSpec {
            name: "foot".into(),
            mass: 0.25,
            length: 0.14,
            com_offset: 0.01,
            inertia_zz: 0.25 * 0.14 * 0.14 / 12.0,
        };
        let links_mass = femur.mass + tibia.mass + foot.mass;
        if !(total_mass > links_mass) {
            return Err(Error::InvalidSpec(format!(
                "rig mass {total_mass} kg must exceed the {links_mass} kg of the links"
            )));
        }
        let chain = Chain {
            carriage_mass: total_mass - links_mass,
            slide_x: 0.0,
            links: vec![femur, tibia, foot],
            joints: vec![
                JointSpec::DIRECT,
                JointSpec {
                    sign: -1.0,
                    offset: 0.0,
                },
                JointSpec { sign: -1.0, offset: PI },
            ],
            gravity: STANDARD_GRAVITY,
        };
        let touchdown = Pose::touchdown();
        let spec = FibreBundleSpec::new(2.0, 4);
        let attach = |id, joint, arm, reference| TendonAttachment {
            id,
            joint,
            moment_arm_mm: arm,
            reference_rad: reference,
            travel_limit_mm: TRAVEL_LIMIT_MM,
            units: LEG_TENDON_UNITS,
            law: ForceLaw::Hysteretic {
                spec: spec.clone(),
                params,
            },
        };
        let r = LEG_MOMENT_ARM_MM;
        let model = Self {
            chain,
            foot: FootGeometry {
                heel: 0.06,
                toe: 0.08,
                sole_depth: 0.03,
                sole_samples: 3,
            },
            attachments: vec![
                attach(TendonId::K1, KNEE, r, touchdown.knee),
                attach(TendonId::K2, KNEE, -r, touchdown.knee),
                attach(TendonId::K3, ANKLE, r, touchdown.ankle),
                attach(TendonId::K4, ANKLE, -r, touchdown.ankle),
            ],
            contact: ContactParams::default(),
            stops: HardStop::default(),
            touchdown,
            slide_floor: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// Single-joint drop rig: a foot beam hinged under a sliding platform,
    /// held level by an antagonistic tendon pair.
    pub fn drop_rig(total_mass: f64, params: TendonParams) -> Result<Self> {
        let beam = LinkSpec {
            name: "foot_beam".into(),
            mass: 0.3,
            length: 0.15,
            com_offset: 0.045,
            inertia_zz: 0.3 * 0.15 * 0.15 / 12.0,
        };
        if !(total_mass > beam.mass) {
            return Err(Error::InvalidSpec("rig mass must exceed the beam mass".into()));
        }
        let chain = Chain {
            carriage_mass: total_mass - beam.mass,
            slide_x: 0.0,
            links: vec![beam],
            joints: vec![JointSpec::DIRECT],
            gravity: STANDARD_GRAVITY,
        };
        let spec = FibreBundleSpec::new(2.0, 4);
        let attach = |id, arm| TendonAttachment {
            id,
            joint: 1,
            moment_arm_mm: arm,
            reference_rad: FRAC_PI_2,
            travel_limit_mm: TRAVEL_LIMIT_MM,
            units: 1,
            law: ForceLaw::Hysteretic {
                spec: spec.clone(),
                params,
            },
        };
        let model = Self {
            chain,
            foot: FootGeometry {
                heel: 0.03,
                toe: 0.12,
                sole_depth: 0.01,
                sole_samples: 3,
            },
            attachments: vec![
                attach(TendonId::K3, DROP_RIG_ARM_MM),
                attach(TendonId::K4, -DROP_RIG_ARM_MM),
            ],
            contact: ContactParams::default(),
            stops: HardStop::default(),
            touchdown: Pose {
                hip: FRAC_PI_2,
                knee: 0.0,
                ankle: 0.0,
            },
            slide_floor: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        self.contact.validate()?;
        let dof = self.chain.dof();
        for a in &self.attachments {
            if a.joint == 0 || a.joint >= dof {
                return Err(Error::InvalidSpec(format!(
                    "tendon {} drives coordinate {} of {dof}",
                    a.id.as_str(),
                    a.joint
                )));
            }
            if a.units == 0 || !(a.travel_limit_mm > 0.0) {
                return Err(Error::InvalidSpec("tendon needs units ≥ 1 and travel > 0".into()));
            }
        }
        for (i, a) in self.attachments.iter().enumerate() {
            if self.attachments[..i].iter().any(|b| b.id == a.id) {
                return Err(Error::InvalidSpec(format!("tendon {} attached twice", a.id.as_str())));
            }
            let antagonists = self.attachments.iter().filter(|b| b.joint == a.joint && b.id != a.id);
            for b in antagonists {
                if a.moment_arm_mm * b.moment_arm_mm >= 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "tendons {} and {} on one joint need opposite lever arms",
                        a.id.as_str(),
                        b.id.as_str()
                    )));
                }
            }
        }
        if self.foot.heel < 0.0 || self.foot.toe <= 0.0 {
            return Err(Error::InvalidSpec("foot needs heel ≥ 0 and toe > 0".into()));
        }
        Ok(())
    }

    pub fn foot_link(&self) -> usize {
        self.chain.links.len() - 1
    }

    /// Joint coordinates of a pose with the slide at `height`.
    pub fn pose_q(&self, height: f64, pose: &Pose) -> Vec<f64> {
        match self.chain.dof() {
            2 => vec![height, pose.hip],
            _ => vec![height, pose.hip, pose.knee, pose.ankle],
        }
    }

    pub fn attachment(&self, id: TendonId) -> Option<&TendonAttachment> {
        self.attachments.iter().find(|a| a.id == id)
    }
}

/// Runtime state of one tendon attachment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TendonState {
    Hysteretic(TendonModel),
    Surrogate(SurrogateState),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateState {
    pub unjammed: PolySurrogate,
    pub jammed: PolySurrogate,
    pub pressure_kpa: f64,
    pub extension_mm: f64,
    pub branch: LoopBranch,
    /// Work done on the tendon, N·mm.
    pub work: f64,
    force: f64,
}

impl SurrogateState {
    fn blend(&self) -> f64 {
        (self.pressure_kpa / JAMMED_KPA).clamp(0.0, 1.0)
    }

    fn eval(&self, x: f64, branch: LoopBranch) -> Result<f64> {
        let w = self.blend();
        let x = x.min(self.jammed.x_max_mm.min(self.unjammed.x_max_mm));
        Ok((1.0 - w) * self.unjammed.eval(x, branch)? + w * self.jammed.eval(x, branch)?)
    }

    /// Area under the blended loading curve up to `x`.
    fn loading_energy(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let n = 64;
        let h = x / n as f64;
        let f = |s: f64| self.eval(s, LoopBranch::Loading).unwrap_or(0.0);
        (0..n)
            .map(|i| 0.5 * h * (f(i as f64 * h) + f((i + 1) as f64 * h)))
            .sum()
    }
}

impl TendonState {
    pub fn new(law: &ForceLaw, jam: &JammingState) -> Result<Self> {
        Ok(match law {
            ForceLaw::Hysteretic { spec, params } => TendonState::Hysteretic(TendonModel::build(spec, params, jam)?),
            ForceLaw::Surrogate { unjammed, jammed } => TendonState::Surrogate(SurrogateState {
                unjammed: unjammed.clone(),
                jammed: jammed.clone(),
                pressure_kpa: jam.pressure_kpa,
                extension_mm: 0.0,
                branch: LoopBranch::Loading,
                work: 0.0,
                force: 0.0,
            }),
        })
    }

    pub fn set_pressure(&mut self, pressure_kpa: f64) {
        match self {
            TendonState::Hysteretic(m) => m.set_pressure(pressure_kpa),
            TendonState::Surrogate(s) => {
                s.pressure_kpa = pressure_kpa;
                if let Ok(f) = s.eval(s.extension_mm, s.branch) {
                    s.force = f;
                }
            }
        }
    }

    /// Moves the tendon to `x_mm` and returns the new force of one unit, N.
    pub fn update(&mut self, x_mm: f64) -> Result<f64> {
        match self {
            TendonState::Hysteretic(m) => m.force_step(x_mm),
            TendonState::Surrogate(s) => {
                let dx = x_mm - s.extension_mm;
                if dx > 0.0 {
                    s.branch = LoopBranch::Loading;
                } else if dx < 0.0 {
                    s.branch = LoopBranch::Unloading;
                }
                if x_mm > s.jammed.x_max_mm + 1e-9 {
                    return Err(Error::ExtensionLimit {
                        extension_mm: x_mm,
                        limit_mm: s.jammed.x_max_mm,
                    });
                }
                let f = s.eval(x_mm, s.branch)?;
                s.work += 0.5 * (f + s.force) * dx;
                s.force = f;
                s.extension_mm = x_mm;
                Ok(f)
            }
        }
    }

    pub fn force(&self) -> f64 {
        match self {
            TendonState::Hysteretic(m) => m.force(),
            TendonState::Surrogate(s) => s.force,
        }
    }

    /// Recoverable energy of one unit, N·mm.
    pub fn stored_energy(&self) -> f64 {
        match self {
            TendonState::Hysteretic(m) => m.stored_energy(),
            TendonState::Surrogate(s) => s.loading_energy(s.extension_mm),
        }
    }

    /// Energy lost to friction by one unit, N·mm.
    pub fn dissipated_energy(&self) -> f64 {
        match self {
            TendonState::Hysteretic(m) => m.dissipated_energy(),
            TendonState::Surrogate(s) => (s.work - s.loading_energy(s.extension_mm)).max(0.0),
        }
    }

    /// Energy added by pressure changes, N·mm.
    pub fn jamming_work(&self) -> f64 {
        match self {
            TendonState::Hysteretic(m) => m.jamming_work(),
            TendonState::Surrogate(_) => 0.0,
        }
    }
}
