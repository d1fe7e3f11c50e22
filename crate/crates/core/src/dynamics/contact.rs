//! Penalty contact with regularised Coulomb friction.

use serde::{Deserialize, Serialize};

use super::chain::Vec2;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactParams {
    /// N/m.
    pub k_n: f64,
    /// N·s/m, acting only while penetration grows.
    pub c_n: f64,
    pub mu: f64,
    /// m/s.
    pub v_reg: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            k_n: 5e4,
            c_n: 200.0,
            mu: 0.4,
            v_reg: 1e-3,
        }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_n > 0.0) || !(self.c_n >= 0.0) || !(self.mu >= 0.0) || !(self.v_reg > 0.0) {
            return Err(Error::InvalidSpec(
                "contact needs k_n > 0, c_n ≥ 0, μ ≥ 0 and v_reg > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Scalar contact response plus its sensitivities to the contact velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContactResponse {
    pub normal: f64,
    pub tangential: f64,
    /// Normal damping rate, `∂F_n/∂δ̇`.
    pub normal_damping: f64,
    /// Friction slope, `−∂F_t/∂v_t`.
    pub friction_damping: f64,
}

/// Penalty response for penetration `depth` growing at `depth_rate`, with
/// tangential slip velocity `v_t`.
pub fn contact_force(depth: f64, depth_rate: f64, v_t: f64, params: &ContactParams) -> ContactResponse {
    if depth <= 0.0 {
        return ContactResponse::default();
    }
    let damping = if depth_rate > 0.0 { params.c_n } else { 0.0 };
    let normal = params.k_n * depth + damping * depth_rate;
    let s = v_t / params.v_reg;
    let tangential = -params.mu * normal * s.tanh();
    let sech2 = 1.0 - s.tanh().powi(2);
    ContactResponse {
        normal,
        tangential,
        normal_damping: damping,
        friction_damping: params.mu * normal * sech2 / params.v_reg,
    }
}

/// Geometry a body point or segment can touch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surface {
    /// Horizontal ground at `height`, moving sideways at `speed` like a belt.
    Ground {
        height: f64,
        #[serde(default)]
        speed: f64,
    },
    /// Rigid disc (the section of a hemisphere or dome), possibly moving.
    Disc {
        center: [f64; 2],
        radius: f64,
        velocity: [f64; 2],
    },
}

/// Where and how deep a probe overlaps a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub point: Vec2,
    pub depth: f64,
    /// Unit normal pushing the body out of the surface.
    pub normal: Vec2,
    pub surface_velocity: Vec2,
}

impl Surface {
    pub fn ground(height: f64) -> Self {
        Surface::Ground { height, speed: 0.0 }
    }

    /// Ground running at `speed` m/s along x.
    pub fn belt(height: f64, speed: f64) -> Self {
        Surface::Ground { height, speed }
    }

    pub fn disc(center: Vec2, radius: f64) -> Self {
        Surface::Disc {
            center: [center.x, center.y],
            radius,
            velocity: [0.0, 0.0],
        }
    }

    /// Overlap of a single body point with the surface.
    pub fn point_overlap(&self, p: Vec2) -> Option<Overlap> {
        match *self {
            Surface::Ground { height, speed } => (p.y < height).then(|| Overlap {
                point: p,
                depth: height - p.y,
                normal: Vec2::new(0.0, 1.0),
                surface_velocity: Vec2::new(speed, 0.0),
            }),
            Surface::Disc { .. } => self.segment_overlap(p, p),
        }
    }

    /// Overlap of the segment `a`–`b` with a disc; ground is tested at the endpoints.
    pub fn segment_overlap(&self, a: Vec2, b: Vec2) -> Option<Overlap> {
        match *self {
            Surface::Ground { .. } => {
                let (pa, pb) = (self.point_overlap(a), self.point_overlap(b));
                match (pa, pb) {
                    (Some(x), Some(y)) => Some(if x.depth >= y.depth { x } else { y }),
                    (x, y) => x.or(y),
                }
            }
            Surface::Disc {
                center,
                radius,
                velocity,
            } => {
                let c = Vec2::new(center[0], center[1]);
                let ab = b - a;
                let len2 = ab.norm_squared();
                let t = if len2 > 0.0 {
                    ((c - a).dot(&ab) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let closest = a + t * ab;
                let r = closest - c;
                let dist = r.norm();
                if dist >= radius {
                    return None;
                }
                let normal = if dist > 1e-12 { r / dist } else { Vec2::new(0.0, 1.0) };
                Some(Overlap {
                    point: closest,
                    depth: radius - dist,
                    normal,
                    surface_velocity: Vec2::new(velocity[0], velocity[1]),
                })
            }
        }
    }
}
