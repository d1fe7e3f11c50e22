//! Least-squares calibration of [`TendonParams`] against tensile targets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cycles::{damping_capacity, run_tension_cycles, DampingReport};
use super::iwan::{TendonModel, TendonParams};
use super::jamming::{JammingState, JAMMED_KPA};
use super::material::FibreBundleSpec;
use crate::error::{Error, Result};

/// Tensile protocol: 20 mm at 5 mm/s.
pub const TEST_AMPLITUDE_MM: f64 = 20.0;
pub const TEST_RATE_MM_S: f64 = 5.0;
pub const TEST_CYCLES: usize = 5;
pub const TEST_DT_S: f64 = 0.01;

/// Relative peak-force tolerance and absolute damping tolerance of a fit.
pub const PEAK_TOLERANCE: f64 = 0.02;
pub const DAMPING_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateTarget {
    pub peak_n: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub unjammed: StateTarget,
    pub jammed: StateTarget,
}

/// One row of the tensile characterisation table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensileRow {
    pub fibre_diameter_mm: f64,
    pub layers: u32,
    pub targets: CalibrationTargets,
}

const fn row(d: f64, layers: u32, pu: f64, pj: f64, du: f64, dj: f64) -> TensileRow {
    TensileRow {
        fibre_diameter_mm: d,
        layers,
        targets: CalibrationTargets {
            unjammed: StateTarget {
                peak_n: pu,
                damping: du,
            },
            jammed: StateTarget {
                peak_n: pj,
                damping: dj,
            },
        },
    }
}

/// Mean peak forces and damping capacities of the printed tendons.
pub const TENSILE_TABLE: [TensileRow; 10] = [
    row(1.5, 3, 13.1, 16.0, 0.21, 0.29),
    row(1.5, 4, 23.6, 31.3, 0.28, 0.33),
    row(1.5, 5, 48.0, 68.0, 0.29, 0.54),
    row(2.0, 3, 20.5, 28.8, 0.20, 0.36),
    row(2.0, 4, 46.9, 57.8, 0.32, 0.50),
    row(2.0, 5, 85.7, 106.7, 0.39, 0.66),
    row(2.5, 3, 34.7, 46.2, 0.30, 0.39),
    row(2.5, 4, 67.4, 88.5, 0.37, 0.51),
    row(3.0, 3, 45.4, 64.7, 0.32, 0.44),
    row(3.0, 4, 88.4, 102.7, 0.45, 0.52),
];

impl TensileRow {
    pub fn spec(&self) -> FibreBundleSpec {
        FibreBundleSpec::new(self.fibre_diameter_mm, self.layers)
    }

    pub fn find(spec: &FibreBundleSpec) -> Option<&'static TensileRow> {
        TENSILE_TABLE
            .iter()
            .find(|r| (r.fibre_diameter_mm - spec.fibre_diameter_mm).abs() < 1e-9 && r.layers == spec.layers)
    }
}

impl CalibrationTargets {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("unjammed", self.unjammed), ("jammed", self.jammed)] {
            if !(t.peak_n > 0.0) {
                return Err(Error::InvalidSpec(format!("{name} peak must be positive")));
            }
            if !(0.0..1.0).contains(&t.damping) {
                return Err(Error::InvalidSpec(format!("{name} damping must lie in [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Peak force and damping of a model cycled under the tensile protocol.
pub fn characterise(
    spec: &FibreBundleSpec,
    params: &TendonParams,
    pressure_kpa: f64,
    cycles: usize,
) -> Result<DampingReport> {
    let mut model = TendonModel::build(spec, params, &JammingState::settled(pressure_kpa))?;
    let hysteresis = run_tension_cycles(&mut model, TEST_AMPLITUDE_MM, TEST_RATE_MM_S, cycles, TEST_DT_S)?;
    damping_capacity(&hysteresis)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Achieved {
    pub unjammed: DampingReport,
    pub jammed: DampingReport,
}

impl Achieved {
    pub fn within_tolerance(&self, targets: &CalibrationTargets) -> bool {
        let ok = |r: &DampingReport, t: &StateTarget| {
            ((r.peak_force - t.peak_n) / t.peak_n).abs() <= PEAK_TOLERANCE
                && (r.capacity - t.damping).abs() <= DAMPING_TOLERANCE
        };
        ok(&self.unjammed, &targets.unjammed) && ok(&self.jammed, &targets.jammed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub spec_id: String,
    pub params: TendonParams,
    pub targets: CalibrationTargets,
    pub achieved: Achieved,
    /// Residuals in tolerance units (1.0 = at the tolerance edge).
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop once every residual is below this many tolerance units.
    pub residual_goal: f64,
    /// Cycles simulated per residual evaluation; the loop is periodic after the first.
    pub cycles: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 60,
            residual_goal: 0.05,
            cycles: 2,
        }
    }
}

/// Log-space starting points tried in order.
const STARTS: [[f64; 4]; 3] = [[5.0, 0.05, 0.3, 40.0], [10.0, 0.5, 0.2, 100.0], [3.0, 0.02, 0.5, 20.0]];

/// Smallest value a log parameter may take, keeping the model well-defined.
const LOG_FLOOR: f64 = -18.0;

struct Problem<'a> {
    spec: &'a FibreBundleSpec,
    base: TendonParams,
    targets: CalibrationTargets,
    cycles: usize,
}

impl Problem<'_> {
    fn params(&self, z: &DVector<f64>) -> TendonParams {
        TendonParams {
            backbone_scale: z[0].exp(),
            stiffness_per_kpa: z[1].exp(),
            slip_per_kpa: z[2].exp(),
            precontact_kpa: z[3].exp(),
            ..self.base
        }
    }

    fn reports(&self, z: &DVector<f64>) -> Result<Achieved> {
        let p = self.params(z);
        Ok(Achieved {
            unjammed: characterise(self.spec, &p, 0.0, self.cycles)?,
            jammed: characterise(self.spec, &p, JAMMED_KPA, self.cycles)?,
        })
    }

    fn residuals(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let a = self.reports(z)?;
        let t = &self.targets;
        Ok(DVector::from_vec(vec![
            (a.unjammed.peak_force - t.unjammed.peak_n) / t.unjammed.peak_n / PEAK_TOLERANCE,
            (a.unjammed.capacity - t.unjammed.damping) / DAMPING_TOLERANCE,
            (a.jammed.peak_force - t.jammed.peak_n) / t.jammed.peak_n / PEAK_TOLERANCE,
            (a.jammed.capacity - t.jammed.damping) / DAMPING_TOLERANCE,
        ]))
    }

    fn jacobian(&self, z: &DVector<f64>, r: &DVector<f64>) -> Result<DMatrix<f64>> {
        let h = 1e-5;
        let mut jac = DMatrix::zeros(r.len(), z.len());
        for j in 0..z.len() {
            let mut zp = z.clone();
            zp[j] += h;
            let rp = self.residuals(&zp)?;
            jac.set_column(j, &((rp - r) / h));
        }
        Ok(jac)
    }
}

struct Outcome {
    z: DVector<f64>,
    r: DVector<f64>,
    iterations: usize,
}

/// Levenberg-Marquardt with Marquardt diagonal scaling.
fn levenberg_marquardt(problem: &Problem, z0: DVector<f64>, options: &SolverOptions) -> Result<Outcome> {
    let mut z = z0;
    let mut r = problem.residuals(&z)?;
    let mut cost = r.norm_squared();
    let mut lambda = 1e-2;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        if r.amax() < options.residual_goal {
            break;
        }
        iterations += 1;
        let jac = problem.jacobian(&z, &r)?;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-9);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = (&z + step).map(|v| v.max(LOG_FLOOR));
            match problem.residuals(&candidate) {
                Ok(rc) if rc.norm_squared() < cost => {
                    z = candidate;
                    cost = rc.norm_squared();
                    r = rc;
                    lambda = (lambda / 3.0).max(1e-9);
                    improved = true;
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        if !improved {
            break;
        }
    }
    Ok(Outcome { z, r, iterations })
}

/// Fits backbone scale, element stiffness, slip force and pre-contact
/// pressure so the unjammed and jammed loops hit their targets.
pub fn calibrate_tendon(
    targets: &CalibrationTargets,
    spec: &FibreBundleSpec,
    options: &SolverOptions,
) -> Result<Calibration> {
    spec.validate()?;
    targets.validate()?;
    let problem = Problem {
        spec,
        base: TendonParams::initial_guess(spec)?,
        targets: *targets,
        cycles: options.cycles.max(2),
    };
    let mut best: Option<Outcome> = None;
    let mut spent = 0;
    for start in STARTS {
        let z0 = DVector::from_iterator(4, start.iter().map(|v| v.ln()));
        let outcome = levenberg_marquardt(&problem, z0, options)?;
        spent += outcome.iterations;
        let better = best
            .as_ref()
            .is_none_or(|b| outcome.r.norm_squared() < b.r.norm_squared());
        if better {
            best = Some(outcome);
        }
        if best.as_ref().is_some_and(|b| b.r.amax() < options.residual_goal) {
            break;
        }
    }
    let best = best.expect("at least one start");
    let residuals: Vec<f64> = best.r.iter().copied().collect();
    if best.r.amax() > 1.0 {
        return Err(Error::Calibration {
            message: format!("{} did not reach tolerance", spec.id()),
            iterations: spent,
            residuals,
        });
    }
    let params = problem.params(&best.z);
    let achieved = Achieved {
        unjammed: characterise(spec, &params, 0.0, TEST_CYCLES)?,
        jammed: characterise(spec, &params, JAMMED_KPA, TEST_CYCLES)?,
    };
    Ok(Calibration {
        spec_id: spec.id(),
        params,
        targets: *targets,
        achieved,
        residuals,
        iterations: spent,
    })
}

/// Calibration of the tendon used throughout the leg.
pub fn calibrate_leg_tendon() -> Result<Calibration> {
    let spec = FibreBundleSpec::new(2.0, 4);
    let row = TensileRow::find(&spec).expect("2.0 mm hex4 is tabulated");
    calibrate_tendon(&row.targets, &spec, &SolverOptions::default())
}
