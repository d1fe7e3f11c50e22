//! Reduced-order tendon: parallel Jenkins (spring + Coulomb slider) elements
//! on top of a hyperelastic fibre backbone.
//!
//! The bundle is tension-only. Its internal extension `y` follows the grip
//! displacement while the internal force is non-negative; once unloading
//! would drive the internal force negative the bundle buckles and goes slack,
//! leaving the sliders where they were. Below zero grip displacement only a
//! small linear compression stiffness acts.

use serde::{Deserialize, Serialize};

use super::jamming::JammingState;
use super::material::{FibreBundleSpec, FibreElasticity};
use crate::error::{Error, Result};

pub const DEFAULT_ELEMENT_COUNT: usize = 8;
pub const EXTENSION_LIMIT_MM: f64 = 20.0;

/// Calibrated parameters of the reduced-order tendon.
///
/// Element stiffness and slip force both scale with the effective contact
/// pressure `min(p, saturation) + precontact`, so the slip displacement of
/// each element does not depend on the vacuum level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TendonParams {
    /// Multiplier on the analytic bundle elasticity.
    pub backbone_scale: f64,
    /// Summed element stiffness per kPa of effective pressure, N/mm/kPa.
    pub stiffness_per_kpa: f64,
    /// Summed slip force per kPa of effective pressure and unit friction, N/kPa.
    pub slip_per_kpa: f64,
    /// Contact pressure present without vacuum, kPa.
    pub precontact_kpa: f64,
    pub element_count: usize,
    /// Ratio of the largest to the smallest slip threshold.
    pub slip_spread: f64,
    /// Pressure above which jamming adds no further contact force, kPa.
    pub saturation_kpa: f64,
}

impl TendonParams {
    /// Starting point for calibration, derived from the analytic fibre bundle.
    pub fn initial_guess(spec: &FibreBundleSpec) -> Result<Self> {
        let fibres = spec.fibre_count()? as f64;
        let k0 = spec.fibre_elasticity().initial_stiffness() * fibres;
        Ok(Self {
            backbone_scale: 8.0,
            stiffness_per_kpa: k0 / 20.0,
            slip_per_kpa: 0.01 * fibres * spec.fibre_area_mm2(),
            precontact_kpa: 30.0,
            element_count: DEFAULT_ELEMENT_COUNT,
            slip_spread: 10.0,
            saturation_kpa: 50.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("backbone_scale", self.backbone_scale),
            ("slip_spread", self.slip_spread),
            ("saturation_kpa", self.saturation_kpa),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("stiffness_per_kpa", self.stiffness_per_kpa),
            ("slip_per_kpa", self.slip_per_kpa),
            ("precontact_kpa", self.precontact_kpa),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidSpec(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.element_count == 0 {
            return Err(Error::InvalidSpec("at least one slip element required".into()));
        }
        Ok(())
    }

    pub fn effective_pressure(&self, pressure_kpa: f64) -> f64 {
        pressure_kpa.clamp(0.0, self.saturation_kpa) + self.precontact_kpa
    }

    /// Normalised log-spaced slip weights, smallest first.
    pub fn slip_weights(&self) -> Vec<f64> {
        let n = self.element_count;
        let raw: Vec<f64> = (0..n)
            .map(|i| {
                if n == 1 {
                    1.0
                } else {
                    self.slip_spread.powf(i as f64 / (n - 1) as f64)
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

/// One Jenkins element: linear spring in series with a Coulomb slider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlipElement {
    /// N/mm.
    pub stiffness: f64,
    /// N at the current pressure.
    pub slip_force: f64,
    /// Slider position, mm.
    pub slider: f64,
}

impl SlipElement {
    pub fn new(stiffness: f64, slip_force: f64) -> Self {
        Self {
            stiffness,
            slip_force,
            slider: 0.0,
        }
    }

    /// Force if the element were moved monotonically to `y` from its current state.
    fn force_at(&self, y: f64) -> f64 {
        (self.stiffness * (y - self.slider)).clamp(-self.slip_force, self.slip_force)
    }

    fn force(&self, y: f64) -> f64 {
        self.stiffness * (y - self.slider)
    }

    /// Moves the element to `y`; returns the frictional work dissipated.
    fn advance(&mut self, y: f64) -> f64 {
        let trial = self.stiffness * (y - self.slider);
        if trial.abs() > self.slip_force {
            let slider = y - trial.signum() * self.slip_force / self.stiffness;
            let work = self.slip_force * (slider - self.slider).abs();
            self.slider = slider;
            work
        } else {
            0.0
        }
    }

    fn energy(&self, y: f64) -> f64 {
        if self.stiffness > 0.0 {
            let f = self.force(y);
            0.5 * f * f / self.stiffness
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backbone {
    pub fibre: FibreElasticity,
    pub fibres: u32,
    pub scale: f64,
}

impl Backbone {
    pub fn force(&self, y: f64) -> f64 {
        self.scale * self.fibres as f64 * self.fibre.force(y)
    }

    pub fn energy(&self, y: f64) -> f64 {
        self.scale * self.fibres as f64 * self.fibre.energy(y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TendonModel {
    pub elements: Vec<SlipElement>,
    pub backbone: Option<Backbone>,
    pub extension_limit_mm: f64,
    /// N/mm, acting only below zero grip displacement.
    pub compression_stiffness: f64,
    /// Pressure scaling, absent for hand-built element sets.
    pub params: Option<TendonParams>,
    pub friction: f64,
    pressure_kpa: f64,
    /// Internal bundle extension, mm.
    internal: f64,
    /// Last grip displacement, mm.
    grip: f64,
    dissipated: f64,
    jamming_work: f64,
}

impl TendonModel {
    /// Builds the tendon for `spec` at the current pressure of `state`.
    pub fn build(spec: &FibreBundleSpec, params: &TendonParams, state: &JammingState) -> Result<Self> {
        spec.validate()?;
        params.validate()?;
        state.validate()?;
        let backbone = Backbone {
            fibre: spec.fibre_elasticity(),
            fibres: spec.fibre_count()?,
            scale: params.backbone_scale,
        };
        let mut model = Self {
            elements: vec![SlipElement::new(0.0, 0.0); params.element_count],
            backbone: Some(backbone),
            extension_limit_mm: EXTENSION_LIMIT_MM,
            compression_stiffness: 0.0,
            params: Some(*params),
            friction: spec.effective_friction(),
            pressure_kpa: state.pressure_kpa,
            internal: 0.0,
            grip: 0.0,
            dissipated: 0.0,
            jamming_work: 0.0,
        };
        model.apply_pressure_scaling();
        model.compression_stiffness = model.default_compression_stiffness();
        Ok(model)
    }

    /// A tendon made of explicit elements, with or without a backbone.
    pub fn from_elements(elements: Vec<SlipElement>, backbone: Option<Backbone>) -> Result<Self> {
        for e in &elements {
            if !(e.stiffness > 0.0) || !(e.slip_force >= 0.0) {
                return Err(Error::InvalidSpec(
                    "element stiffness must be positive and slip force non-negative".into(),
                ));
            }
        }
        let mut model = Self {
            elements,
            backbone,
            extension_limit_mm: EXTENSION_LIMIT_MM,
            compression_stiffness: 0.0,
            params: None,
            friction: 1.0,
            pressure_kpa: 0.0,
            internal: 0.0,
            grip: 0.0,
            dissipated: 0.0,
            jamming_work: 0.0,
        };
        model.compression_stiffness = model.default_compression_stiffness();
        Ok(model)
    }

    fn default_compression_stiffness(&self) -> f64 {
        let smallest = self
            .elements
            .iter()
            .map(|e| e.stiffness)
            .filter(|k| *k > 0.0)
            .fold(f64::INFINITY, f64::min);
        if smallest.is_finite() {
            0.01 * smallest
        } else {
            0.0
        }
    }

    fn apply_pressure_scaling(&mut self) {
        let Some(params) = self.params else { return };
        let phi = params.effective_pressure(self.pressure_kpa);
        // Stiffness keeps a 1 kPa floor so every element stays a proper spring.
        let k = params.stiffness_per_kpa * phi.max(1.0) / params.element_count as f64;
        let y = self.internal;
        for (e, w) in self.elements.iter_mut().zip(params.slip_weights()) {
            let before = e.energy(y);
            let deformation = y - e.slider;
            e.stiffness = k;
            e.slip_force = params.slip_per_kpa * self.friction * phi * w;
            let stretched = e.energy(y);
            self.jamming_work += stretched - before;
            let force = k * deformation;
            if force.abs() > e.slip_force {
                e.slider = y - force.signum() * e.slip_force / k;
                self.dissipated += stretched - e.energy(y);
            }
        }
    }

    pub fn pressure_kpa(&self) -> f64 {
        self.pressure_kpa
    }

    /// Changes the vacuum level. Element forces rescale at fixed deformation;
    /// the energy this adds is booked as jamming work.
    pub fn set_pressure(&mut self, pressure_kpa: f64) {
        if pressure_kpa == self.pressure_kpa {
            return;
        }
        self.pressure_kpa = pressure_kpa;
        self.apply_pressure_scaling();
        let grip = self.grip;
        self.move_to(grip);
    }

    /// Zeroes all internal state and energy counters.
    pub fn reset(&mut self) {
        for e in &mut self.elements {
            e.slider = 0.0;
        }
        self.internal = 0.0;
        self.grip = 0.0;
        self.dissipated = 0.0;
        self.jamming_work = 0.0;
    }

    fn internal_force_at(&self, y: f64) -> f64 {
        let elements: f64 = self.elements.iter().map(|e| e.force_at(y)).sum();
        elements + self.backbone.map_or(0.0, |b| b.force(y))
    }

    fn internal_force(&self) -> f64 {
        let y = self.internal;
        let elements: f64 = self.elements.iter().map(|e| e.force(y)).sum();
        elements + self.backbone.map_or(0.0, |b| b.force(y))
    }

    fn advance_internal(&mut self, y: f64) {
        for e in &mut self.elements {
            self.dissipated += e.advance(y);
        }
        self.internal = y;
    }

    fn move_to(&mut self, grip: f64) {
        self.grip = grip;
        let target = grip.max(0.0);
        if target >= self.internal || self.internal_force_at(target) >= 0.0 {
            self.advance_internal(target);
            return;
        }
        if self.internal_force() <= 0.0 {
            // Already slack: the grips close without touching the bundle.
            return;
        }
        let (mut lo, mut hi) = (target, self.internal);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.internal_force_at(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        self.advance_internal(hi);
    }

    /// Moves the grips to `extension_mm` and returns the tendon force, N.
    pub fn force_step(&mut self, extension_mm: f64) -> Result<f64> {
        if !extension_mm.is_finite() {
            return Err(Error::Domain(format!("non-finite extension {extension_mm}")));
        }
        if extension_mm > self.extension_limit_mm + 1e-9 {
            return Err(Error::ExtensionLimit {
                extension_mm,
                limit_mm: self.extension_limit_mm,
            });
        }
        self.move_to(extension_mm);
        Ok(self.force())
    }

    /// Tendon force at the current state, N. Never negative for non-negative grip.
    pub fn force(&self) -> f64 {
        self.internal_force().max(0.0) + self.compression_stiffness * self.grip.min(0.0)
    }

    pub fn grip_mm(&self) -> f64 {
        self.grip
    }

    pub fn internal_extension_mm(&self) -> f64 {
        self.internal
    }

    /// Recoverable elastic energy, N·mm.
    pub fn stored_energy(&self) -> f64 {
        let y = self.internal;
        let elements: f64 = self.elements.iter().map(|e| e.energy(y)).sum();
        let c = self.grip.min(0.0);
        elements + self.backbone.map_or(0.0, |b| b.energy(y)) + 0.5 * self.compression_stiffness * c * c
    }

    /// Cumulative frictional dissipation, N·mm.
    pub fn dissipated_energy(&self) -> f64 {
        self.dissipated
    }

    /// Cumulative energy added by pressure changes, N·mm.
    pub fn jamming_work(&self) -> f64 {
        self.jamming_work
    }

    /// Total slip force across elements, N.
    pub fn total_slip_force(&self) -> f64 {
        self.elements.iter().map(|e| e.slip_force).sum()
    }
}
