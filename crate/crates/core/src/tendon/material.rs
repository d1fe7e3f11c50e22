//! Printed fibre materials and the bundle geometry they are assembled into.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Yeoh coefficients fitted to the Shore A 30 print resin, MPa.
pub const A30_YEOH: Yeoh = Yeoh {
    c1: 1.2e-2,
    c2: -1.0e-4,
    c3: 6.2e-4,
};

/// Young's modulus of the Shore A 85 print resin, MPa.
pub const A85_MODULUS: f64 = 11.51;

/// Incompressible Yeoh hyperelastic law, coefficients in MPa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Yeoh {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Yeoh {
    /// Nominal (first Piola) stress under uniaxial tension at `stretch`.
    pub fn nominal_stress(&self, stretch: f64) -> Result<f64> {
        yeoh_uniaxial_stress(stretch, self.c1, self.c2, self.c3)
    }

    /// Strain energy density W(I1); its stretch derivative is the nominal stress.
    pub fn energy_density(&self, stretch: f64) -> f64 {
        let j = first_invariant(stretch) - 3.0;
        self.c1 * j + self.c2 * j * j + self.c3 * j * j * j
    }

    fn stress_unchecked(&self, stretch: f64) -> f64 {
        let j = first_invariant(stretch) - 3.0;
        2.0 * (stretch - stretch.powi(-2)) * (self.c1 + 2.0 * self.c2 * j + 3.0 * self.c3 * j * j)
    }

    fn stress_slope(&self, stretch: f64) -> f64 {
        let j = first_invariant(stretch) - 3.0;
        let di = 2.0 * (stretch - stretch.powi(-2));
        let ddi = 2.0 * (1.0 + 2.0 * stretch.powi(-3));
        let bracket = self.c1 + 2.0 * self.c2 * j + 3.0 * self.c3 * j * j;
        ddi * bracket + di * di * (2.0 * self.c2 + 6.0 * self.c3 * j)
    }
}

fn first_invariant(stretch: f64) -> f64 {
    stretch * stretch + 2.0 / stretch
}

/// Uniaxial nominal stress of an incompressible Yeoh solid.
///
/// `P = 2(λ − λ⁻²)(C1 + 2·C2·(I1 − 3) + 3·C3·(I1 − 3)²)` with `I1 = λ² + 2/λ`.
pub fn yeoh_uniaxial_stress(stretch: f64, c1: f64, c2: f64, c3: f64) -> Result<f64> {
    if !(stretch > 0.0) || !stretch.is_finite() {
        return Err(Error::Domain(format!("stretch must be positive, got {stretch}")));
    }
    Ok(Yeoh { c1, c2, c3 }.stress_unchecked(stretch))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentLabel {
    SoftA30,
    StiffA85,
    RigidEndCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constitutive {
    Yeoh(Yeoh),
    Linear { modulus: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSegment {
    pub label: SegmentLabel,
    pub length_mm: f64,
    pub model: Constitutive,
}

impl MaterialSegment {
    pub fn soft_a30(length_mm: f64) -> Self {
        Self {
            label: SegmentLabel::SoftA30,
            length_mm,
            model: Constitutive::Yeoh(A30_YEOH),
        }
    }

    pub fn stiff_a85(length_mm: f64) -> Self {
        Self {
            label: SegmentLabel::StiffA85,
            length_mm,
            model: Constitutive::Linear { modulus: A85_MODULUS },
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.length_mm > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "segment {:?} length must be positive",
                self.label
            )));
        }
        match (self.label, self.model) {
            (SegmentLabel::SoftA30, Constitutive::Yeoh(_)) => Ok(()),
            (SegmentLabel::StiffA85 | SegmentLabel::RigidEndCap, Constitutive::Linear { modulus }) if modulus > 0.0 => {
                Ok(())
            }
            (label, model) => Err(Error::InvalidSpec(format!(
                "segment {label:?} cannot use constitutive model {model:?}"
            ))),
        }
    }
}

/// Interfibre Coulomb friction for the three material pairings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionCoefficients {
    pub soft_soft: f64,
    pub soft_stiff: f64,
    pub stiff_stiff: f64,
}

impl Default for FrictionCoefficients {
    fn default() -> Self {
        Self {
            soft_soft: 0.74,
            soft_stiff: 0.75,
            stiff_stiff: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Packing {
    Hexagonal,
}

/// Geometry of one printed fibre bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FibreBundleSpec {
    pub fibre_diameter_mm: f64,
    pub layers: u32,
    pub packing: Packing,
    pub segments: Vec<MaterialSegment>,
    pub free_length_mm: f64,
    pub overall_length_mm: f64,
    pub friction: FrictionCoefficients,
}

pub const FIBRE_DIAMETERS_MM: [f64; 4] = [1.5, 2.0, 2.5, 3.0];

impl FibreBundleSpec {
    /// Bundle with the printed layout: a 55 mm A85 section in series with a 30 mm A30 section.
    pub fn new(fibre_diameter_mm: f64, layers: u32) -> Self {
        let segments = vec![MaterialSegment::stiff_a85(55.0), MaterialSegment::soft_a30(30.0)];
        let free_length_mm = segments.iter().map(|s| s.length_mm).sum();
        Self {
            fibre_diameter_mm,
            layers,
            packing: Packing::Hexagonal,
            segments,
            free_length_mm,
            overall_length_mm: 120.0,
            friction: FrictionCoefficients::default(),
        }
    }

    /// Parses ids of the form `2.0mm_hex4`.
    pub fn from_id(id: &str) -> Result<Self> {
        let bad = || Error::InvalidSpec(format!("unrecognised tendon id `{id}`"));
        let (d, l) = id.split_once("mm_hex").ok_or_else(bad)?;
        let d: f64 = d.parse().map_err(|_| bad())?;
        let l: u32 = l.parse().map_err(|_| bad())?;
        let spec = Self::new(d, l);
        spec.validate()?;
        Ok(spec)
    }

    pub fn id(&self) -> String {
        format!("{:.1}mm_hex{}", self.fibre_diameter_mm, self.layers)
    }

    pub fn validate(&self) -> Result<()> {
        if !FIBRE_DIAMETERS_MM
            .iter()
            .any(|d| (d - self.fibre_diameter_mm).abs() < 1e-9)
        {
            return Err(Error::InvalidSpec(format!(
                "fibre diameter {} mm not in {:?}",
                self.fibre_diameter_mm, FIBRE_DIAMETERS_MM
            )));
        }
        if !(3..=5).contains(&self.layers) {
            return Err(Error::InvalidSpec(format!("layer count {} not in 3..=5", self.layers)));
        }
        if self.segments.is_empty() {
            return Err(Error::InvalidSpec("bundle has no segments".into()));
        }
        for segment in &self.segments {
            segment.validate()?;
        }
        let total: f64 = self.segments.iter().map(|s| s.length_mm).sum();
        if (total - self.free_length_mm).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!(
                "segment lengths sum to {total} mm, free length is {} mm",
                self.free_length_mm
            )));
        }
        if !(self.overall_length_mm > self.free_length_mm) {
            return Err(Error::InvalidSpec(
                "overall length must exceed the free fibre length".into(),
            ));
        }
        let f = self.friction;
        for mu in [f.soft_soft, f.soft_stiff, f.stiff_stiff] {
            if !(mu > 0.0 && mu < 2.0) {
                return Err(Error::InvalidSpec(format!("friction coefficient {mu} outside (0, 2)")));
            }
        }
        Ok(())
    }

    pub fn fibre_area_mm2(&self) -> f64 {
        std::f64::consts::PI * self.fibre_diameter_mm * self.fibre_diameter_mm / 4.0
    }

    /// Length-weighted interfibre friction, assuming neighbouring fibres
    /// present like material to each other along the bundle.
    pub fn effective_friction(&self) -> f64 {
        let f = self.friction;
        let mut weighted = 0.0;
        let mut length = 0.0;
        for s in &self.segments {
            let mu = match s.label {
                SegmentLabel::SoftA30 => f.soft_soft,
                SegmentLabel::StiffA85 => f.stiff_stiff,
                SegmentLabel::RigidEndCap => continue,
            };
            weighted += mu * s.length_mm;
            length += s.length_mm;
        }
        if length > 0.0 {
            weighted / length
        } else {
            f.soft_stiff
        }
    }

    pub fn fibre_count(&self) -> Result<u32> {
        fibre_count(self.layers)
    }

    /// Single-fibre series elasticity over the bundle's segments.
    pub fn fibre_elasticity(&self) -> FibreElasticity {
        let mut soft = None;
        let mut compliance = 0.0;
        for s in &self.segments {
            match s.model {
                Constitutive::Yeoh(law) => {
                    soft = Some((law, s.length_mm));
                }
                Constitutive::Linear { modulus } => compliance += s.length_mm / modulus,
            }
        }
        let (law, soft_length_mm) = soft.unwrap_or((A30_YEOH, 0.0));
        FibreElasticity {
            law,
            soft_length_mm,
            linear_compliance: compliance,
            area_mm2: self.fibre_area_mm2(),
        }
    }
}

/// Number of fibres in a centred hexagonal bundle with `layers` rings.
pub fn fibre_count(layers: u32) -> Result<u32> {
    if layers == 0 {
        return Err(Error::InvalidSpec("layer count must be at least 1".into()));
    }
    Ok(3 * layers * (layers - 1) + 1)
}

/// A hyperelastic section in series with linear sections (lumped as a
/// compliance `Σ L/E`, mm/MPa), all sharing one cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FibreElasticity {
    pub law: Yeoh,
    pub soft_length_mm: f64,
    pub linear_compliance: f64,
    pub area_mm2: f64,
}

impl FibreElasticity {
    fn extension_at(&self, stretch: f64) -> f64 {
        self.soft_length_mm * (stretch - 1.0) + self.linear_compliance * self.law.stress_unchecked(stretch)
    }

    /// Stretch of the soft section when the fibre is extended by `extension_mm`.
    pub fn soft_stretch(&self, extension_mm: f64) -> f64 {
        if extension_mm <= 0.0 {
            return 1.0;
        }
        if self.soft_length_mm <= 0.0 {
            return 1.0;
        }
        // Extension is monotone in stretch; Newton from the all-soft guess,
        // safeguarded by the bracket [1, 1 + x/L].
        let mut lo = 1.0;
        let mut hi = 1.0 + extension_mm / self.soft_length_mm;
        let mut s = hi;
        for _ in 0..60 {
            let g = self.extension_at(s) - extension_mm;
            if g.abs() < 1e-13 * (1.0 + extension_mm) {
                break;
            }
            if g > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let slope = self.soft_length_mm + self.linear_compliance * self.law.stress_slope(s);
            let mut next = s - g / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            s = next;
        }
        s
    }

    /// Axial force (N) carried by one fibre at `extension_mm`.
    pub fn force(&self, extension_mm: f64) -> f64 {
        if extension_mm <= 0.0 {
            return 0.0;
        }
        self.area_mm2 * self.law.stress_unchecked(self.soft_stretch(extension_mm))
    }

    /// Elastic energy (N·mm) stored in one fibre at `extension_mm`.
    pub fn energy(&self, extension_mm: f64) -> f64 {
        if extension_mm <= 0.0 {
            return 0.0;
        }
        let stretch = self.soft_stretch(extension_mm);
        let stress = self.law.stress_unchecked(stretch);
        self.area_mm2
            * (self.soft_length_mm * self.law.energy_density(stretch) + 0.5 * self.linear_compliance * stress * stress)
    }

    /// Small-strain axial stiffness, N/mm.
    pub fn initial_stiffness(&self) -> f64 {
        let soft = if self.soft_length_mm > 0.0 {
            self.soft_length_mm / (6.0 * self.law.c1)
        } else {
            0.0
        };
        self.area_mm2 / (soft + self.linear_compliance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts lattice points of a triangular lattice within `rings - 1`
    /// hexagonal steps of the origin.
    fn enumerate_hex(rings: u32) -> u32 {
        let r = rings as i32 - 1;
        let mut n = 0;
        for q in -r..=r {
            for s in -r..=r {
                let t = -q - s;
                if q.abs().max(s.abs()).max(t.abs()) <= r {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn fibre_count_matches_lattice_enumeration() {
        assert_eq!(fibre_count(1).unwrap(), 1);
        assert_eq!(fibre_count(3).unwrap(), 19);
        assert_eq!(fibre_count(4).unwrap(), 37);
        for rings in 1..8 {
            assert_eq!(fibre_count(rings).unwrap(), enumerate_hex(rings));
        }
        assert!(matches!(fibre_count(0), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn yeoh_reference_values() {
        let law = A30_YEOH;
        assert_eq!(law.nominal_stress(1.0).unwrap(), 0.0);
        // Frozen from an independent evaluation of the closed form at λ = 5/3.
        let p = law.nominal_stress(5.0 / 3.0).unwrap();
        assert!((p - 0.035_496_3).abs() < 1e-6, "{p}");
        let eps = 1e-7;
        let slope = law.nominal_stress(1.0 + eps).unwrap() / eps;
        assert!((slope - 0.072).abs() < 1e-5, "{slope}");
        assert!(yeoh_uniaxial_stress(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(yeoh_uniaxial_stress(-1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn energy_density_differentiates_to_stress() {
        let law = A30_YEOH;
        for &l in &[0.8, 1.0, 1.2, 1.5, 1.7] {
            let h = 1e-6;
            let fd = (law.energy_density(l + h) - law.energy_density(l - h)) / (2.0 * h);
            assert!((fd - law.nominal_stress(l).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn series_fibre_is_consistent() {
        let spec = FibreBundleSpec::new(2.0, 4);
        let fibre = spec.fibre_elasticity();
        for &x in &[0.5, 5.0, 12.0, 20.0] {
            let s = fibre.soft_stretch(x);
            assert!((fibre.extension_at(s) - x).abs() < 1e-10);
            let h = 1e-5;
            let fd = (fibre.energy(x + h) - fibre.energy(x - h)) / (2.0 * h);
            assert!((fd - fibre.force(x)).abs() < 1e-7 * (1.0 + fibre.force(x)));
        }
        assert_eq!(fibre.force(-1.0), 0.0);
        let k0 = fibre.initial_stiffness();
        assert!((fibre.force(1e-4) / 1e-4 - k0).abs() / k0 < 1e-3);
    }

    #[test]
    fn spec_validation() {
        assert!(FibreBundleSpec::new(2.0, 4).validate().is_ok());
        assert!(FibreBundleSpec::new(1.7, 4).validate().is_err());
        assert!(FibreBundleSpec::new(2.0, 6).validate().is_err());
        let mut spec = FibreBundleSpec::new(2.0, 4);
        spec.free_length_mm = 80.0;
        assert!(spec.validate().is_err());
        let mut spec = FibreBundleSpec::new(2.0, 4);
        spec.friction.stiff_stiff = 2.5;
        assert!(spec.validate().is_err());
        let mut spec = FibreBundleSpec::new(2.0, 4);
        spec.segments[1].model = Constitutive::Linear { modulus: 1.0 };
        spec.validate().unwrap_err();
        assert_eq!(FibreBundleSpec::from_id("2.0mm_hex4").unwrap().layers, 4);
        assert!(FibreBundleSpec::from_id("2mm_hex").is_err());
    }
}
