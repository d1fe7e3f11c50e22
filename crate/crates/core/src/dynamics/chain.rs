//! Planar serial chain on a vertical slide, in reduced coordinates.
//!
//! `q[0]` is the height of the first pivot (the hip) and `q[i]`, `i ≥ 1`, is
//! the angle of revolute joint `i`. Link angles are measured counter-clockwise
//! from the downward vertical, so a link at angle `φ` points along
//! `(sin φ, −cos φ)`. Joint `i` sets `φ_i = φ_{i−1} + sign_i·q_i + offset_i`.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

pub const STANDARD_GRAVITY: f64 = 9.8066;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    /// kg.
    pub mass: f64,
    /// Pivot to next pivot, m.
    pub length: f64,
    /// Centre of mass along the link from its pivot, m.
    pub com_offset: f64,
    /// kg·m² about the centre of mass.
    pub inertia_zz: f64,
}

impl LinkSpec {
    /// Uniform rod of the given length about its midpoint.
    pub fn rod(name: &str, mass: f64, length: f64) -> Self {
        Self {
            name: name.into(),
            mass,
            length,
            com_offset: 0.5 * length,
            inertia_zz: mass * length * length / 12.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !(self.length > 0.0) || !(self.inertia_zz >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "link `{}` needs mass > 0, length > 0 and inertia ≥ 0",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub sign: f64,
    pub offset: f64,
}

impl JointSpec {
    pub const DIRECT: JointSpec = JointSpec { sign: 1.0, offset: 0.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// Mass riding on the slide, kg.
    pub carriage_mass: f64,
    /// Horizontal position of the slide, m.
    pub slide_x: f64,
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    pub gravity: f64,
}

/// Pivot positions and absolute link angles at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    /// `pivots[i]` is the pivot of link `i`; the extra last entry is the chain tip.
    pub pivots: Vec<Vec2>,
    pub angles: Vec<f64>,
    /// Absolute angular velocity of each link.
    pub rates: Vec<f64>,
}

impl Frames {
    pub fn axis(&self, link: usize) -> Vec2 {
        let a = self.angles[link];
        Vec2::new(a.sin(), -a.cos())
    }

    pub fn normal(&self, link: usize) -> Vec2 {
        let a = self.angles[link];
        Vec2::new(a.cos(), a.sin())
    }

    /// World position of `local = (along, normal)` on `link`.
    pub fn point(&self, link: usize, local: Vec2) -> Vec2 {
        self.pivots[link] + local.x * self.axis(link) + local.y * self.normal(link)
    }
}

/// Planar cross product `ẑ × r`.
fn perp(r: Vec2) -> Vec2 {
    Vec2::new(-r.y, r.x)
}

impl Chain {
    pub fn dof(&self) -> usize {
        self.links.len() + 1
    }

    pub fn total_mass(&self) -> f64 {
        self.carriage_mass + self.links.iter().map(|l| l.mass).sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.links.len() != self.joints.len() || self.links.is_empty() {
            return Err(Error::InvalidSpec("chain needs one joint per link".into()));
        }
        if !(self.carriage_mass > 0.0) {
            return Err(Error::InvalidSpec("carriage mass must be positive".into()));
        }
        if !(self.gravity > 0.0) {
            return Err(Error::InvalidSpec("gravity must be positive".into()));
        }
        for l in &self.links {
            l.validate()?;
        }
        Ok(())
    }

    pub fn frames(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Frames {
        let n = self.links.len();
        let mut pivots = Vec::with_capacity(n + 1);
        let mut angles = Vec::with_capacity(n);
        let mut rates = Vec::with_capacity(n);
        let mut p = Vec2::new(self.slide_x, q[0]);
        let (mut phi, mut omega) = (0.0, 0.0);
        for (i, (link, joint)) in self.links.iter().zip(&self.joints).enumerate() {
            phi += joint.sign * q[i + 1] + joint.offset;
            omega += joint.sign * qdot[i + 1];
            pivots.push(p);
            angles.push(phi);
            rates.push(omega);
            p += link.length * Vec2::new(phi.sin(), -phi.cos());
        }
        pivots.push(p);
        Frames { pivots, angles, rates }
    }

    /// Jacobian of a world point rigidly attached to `link`.
    pub fn point_jacobian(&self, frames: &Frames, link: usize, point: Vec2) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(2, self.dof());
        j[(1, 0)] = 1.0;
        for k in 0..=link {
            let col = self.joints[k].sign * perp(point - frames.pivots[k]);
            j[(0, k + 1)] = col.x;
            j[(1, k + 1)] = col.y;
        }
        j
    }

    /// Row of `∂φ_link/∂q`.
    pub fn angle_jacobian(&self, link: usize) -> DVector<f64> {
        let mut j = DVector::zeros(self.dof());
        for k in 0..=link {
            j[k + 1] = self.joints[k].sign;
        }
        j
    }

    /// Acceleration of a point on `link` at `local` when `q̈ = 0`.
    pub fn centripetal(&self, frames: &Frames, link: usize, local: Vec2) -> Vec2 {
        let mut a = Vec2::zeros();
        for k in 0..link {
            a -= self.links[k].length * frames.rates[k].powi(2) * frames.axis(k);
        }
        let w2 = frames.rates[link].powi(2);
        a - w2 * (local.x * frames.axis(link) + local.y * frames.normal(link))
    }

    pub fn com_local(&self, link: usize) -> Vec2 {
        Vec2::new(self.links[link].com_offset, 0.0)
    }

    /// Mass matrix and the velocity-product bias `h` in `M q̈ + h = τ`.
    pub fn mass_matrix_and_bias(&self, frames: &Frames) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.dof();
        let mut m = DMatrix::zeros(n, n);
        let mut h = DVector::zeros(n);
        m[(0, 0)] = self.carriage_mass;
        for (i, link) in self.links.iter().enumerate() {
            let local = self.com_local(i);
            let c = frames.point(i, local);
            let jc = self.point_jacobian(frames, i, c);
            let jw = self.angle_jacobian(i);
            m += link.mass * jc.transpose() * &jc + link.inertia_zz * &jw * jw.transpose();
            let a0 = self.centripetal(frames, i, local);
            h += link.mass * jc.transpose() * DVector::from_column_slice(a0.as_slice());
        }
        (m, h)
    }

    /// Generalised gravity forces.
    pub fn gravity_forces(&self, frames: &Frames) -> DVector<f64> {
        let mut tau = DVector::zeros(self.dof());
        tau[0] = -self.carriage_mass * self.gravity;
        for (i, link) in self.links.iter().enumerate() {
            let c = frames.point(i, self.com_local(i));
            let jc = self.point_jacobian(frames, i, c);
            for k in 0..self.dof() {
                tau[k] -= link.mass * self.gravity * jc[(1, k)];
            }
        }
        tau
    }

    pub fn kinetic_energy(&self, frames: &Frames, qdot: &DVector<f64>) -> f64 {
        let (m, _) = self.mass_matrix_and_bias(frames);
        0.5 * qdot.dot(&(m * qdot))
    }

    pub fn potential_energy(&self, frames: &Frames) -> f64 {
        let mut e = self.carriage_mass * self.gravity * frames.pivots[0].y;
        for (i, link) in self.links.iter().enumerate() {
            e += link.mass * self.gravity * frames.point(i, self.com_local(i)).y;
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Chain {
        Chain {
            carriage_mass: 1.0,
            slide_x: 0.0,
            links: vec![
                LinkSpec::rod("a", 0.9, 0.25),
                LinkSpec::rod("b", 0.9, 0.25),
                LinkSpec {
                    name: "c".into(),
                    mass: 0.25,
                    length: 0.14,
                    com_offset: 0.01,
                    inertia_zz: 4e-4,
                },
            ],
            joints: vec![
                JointSpec::DIRECT,
                JointSpec {
                    sign: -1.0,
                    offset: 0.0,
                },
                JointSpec {
                    sign: -1.0,
                    offset: std::f64::consts::PI,
                },
            ],
            gravity: STANDARD_GRAVITY,
        }
    }

    fn q(v: [f64; 4]) -> DVector<f64> {
        DVector::from_column_slice(&v)
    }

    #[test]
    fn point_jacobian_matches_finite_differences() {
        let c = chain();
        let q0 = q([0.3, 0.2, 0.4, 1.3]);
        let zero = DVector::zeros(4);
        let local = Vec2::new(0.08, -0.03);
        let f0 = c.frames(&q0, &zero);
        let j = c.point_jacobian(&f0, 2, f0.point(2, local));
        let h = 1e-7;
        for k in 0..4 {
            let mut qp = q0.clone();
            let mut qm = q0.clone();
            qp[k] += h;
            qm[k] -= h;
            let dp = (c.frames(&qp, &zero).point(2, local) - c.frames(&qm, &zero).point(2, local)) / (2.0 * h);
            assert!((dp.x - j[(0, k)]).abs() < 1e-8 && (dp.y - j[(1, k)]).abs() < 1e-8);
        }
    }

    #[test]
    fn straight_reference_pose() {
        let c = chain();
        let f = c.frames(&q([0.0, 0.0, 0.0, std::f64::consts::FRAC_PI_2]), &DVector::zeros(4));
        assert!((f.pivots[1] - Vec2::new(0.0, -0.25)).norm() < 1e-15);
        assert!((f.pivots[2] - Vec2::new(0.0, -0.5)).norm() < 1e-15);
        // Foot points forward at a right-angle ankle.
        assert!((f.axis(2) - Vec2::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hip_rotation_is_rigid() {
        let c = chain();
        let zero = DVector::zeros(4);
        let q0 = q([0.0, 0.1, 0.3, 1.4]);
        let mut q1 = q0.clone();
        let d = 0.37;
        q1[1] += d;
        let (f0, f1) = (c.frames(&q0, &zero), c.frames(&q1, &zero));
        let rot = nalgebra::Rotation2::new(d);
        for link in 0..3 {
            let p0 = f0.point(link, Vec2::new(0.05, 0.02));
            let p1 = f1.point(link, Vec2::new(0.05, 0.02));
            assert!((rot * p0 - p1).norm() < 1e-12);
        }
    }

    #[test]
    fn mass_matrix_is_symmetric_positive_definite() {
        let c = chain();
        let q0 = q([0.0, 0.3, 0.5, 1.2]);
        let qd = q([0.1, 1.0, -2.0, 0.5]);
        let f = c.frames(&q0, &qd);
        let (m, _) = c.mass_matrix_and_bias(&f);
        assert!((&m - m.transpose()).amax() < 1e-14);
        assert!(m.clone().cholesky().is_some());
        assert!((m[(0, 0)] - c.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn centripetal_matches_finite_differences() {
        let c = chain();
        let q0 = q([0.0, 0.3, 0.5, 1.2]);
        let qd = q([0.0, 1.0, -2.0, 0.5]);
        let dt = 1e-6;
        let local = c.com_local(2);
        let vel = |qq: &DVector<f64>| {
            let f = c.frames(qq, &qd);
            c.point_jacobian(&f, 2, f.point(2, local)) * &qd
        };
        let q1 = &q0 + &qd * dt;
        let qm = &q0 - &qd * dt;
        let a_fd = (vel(&q1) - vel(&qm)) / (2.0 * dt);
        let a = c.centripetal(&c.frames(&q0, &qd), 2, local);
        assert!((a_fd[0] - a.x).abs() < 1e-6 && (a_fd[1] - a.y).abs() < 1e-6);
    }
}
