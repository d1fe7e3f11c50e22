//! Force assembly, fixed-step integration and energy bookkeeping.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::chain::Vec2;
use super::contact::{contact_force, Surface};
use super::leg::{LegModel, TendonState};
use crate::error::{Error, Result};
use crate::tendon::jamming::JammingState;

pub const DEFAULT_DT: f64 = 1e-4;
/// Generalised speed beyond which a run is declared divergent.
const SPEED_LIMIT: f64 = 1e3;
const MM: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JointDrive {
    Free,
    /// Held exactly at its current value.
    Locked,
    /// PD servo toward the actuation target.
    Pd {
        kp: f64,
        kd: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actuation {
    pub drives: Vec<JointDrive>,
    pub targets: Vec<f64>,
    pub target_rates: Vec<f64>,
}

impl Actuation {
    pub fn free(dof: usize) -> Self {
        Self {
            drives: vec![JointDrive::Free; dof],
            targets: vec![0.0; dof],
            target_rates: vec![0.0; dof],
        }
    }

    pub fn with(mut self, coordinate: usize, drive: JointDrive) -> Self {
        self.drives[coordinate] = drive;
        self
    }
}

/// Surfaces the foot can touch.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Environment {
    pub surfaces: Vec<Surface>,
}

impl Environment {
    pub fn flat_ground() -> Self {
        Self {
            surfaces: vec![Surface::ground(0.0)],
        }
    }
}

/// Cumulative energy flows, J.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyFlows {
    pub contact_dissipated: f64,
    pub stop_dissipated: f64,
    pub actuator_work: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub tendons: Vec<TendonState>,
    pub jamming: Vec<JammingState>,
    /// Joint angle at which each tendon's slide leaves it unstretched.
    pub references: Vec<f64>,
    pub contact_active: Vec<bool>,
    pub at_stop: Vec<bool>,
    pub flows: EnergyFlows,
}

impl SimState {
    pub fn new(model: &LegModel, q: Vec<f64>, qdot: Vec<f64>, jamming: Vec<JammingState>) -> Result<Self> {
        let dof = model.chain.dof();
        if q.len() != dof || qdot.len() != dof {
            return Err(Error::LengthMismatch(q.len().max(qdot.len()), dof));
        }
        if jamming.len() != model.attachments.len() {
            return Err(Error::LengthMismatch(jamming.len(), model.attachments.len()));
        }
        let mut tendons = Vec::with_capacity(jamming.len());
        for (a, jam) in model.attachments.iter().zip(&jamming) {
            jam.validate()?;
            tendons.push(TendonState::new(&a.law, jam)?);
        }
        let references = model.attachments.iter().map(|a| a.reference_rad).collect();
        let mut state = Self {
            t: 0.0,
            q,
            qdot,
            tendons,
            jamming,
            references,
            contact_active: Vec::new(),
            at_stop: vec![false; model.attachments.len()],
            flows: EnergyFlows::default(),
        };
        state.sync_tendons(model)?;
        Ok(state)
    }

    /// Extension of every tendon at the current configuration, mm.
    pub fn extensions(&self, model: &LegModel) -> Vec<f64> {
        model
            .attachments
            .iter()
            .zip(&self.references)
            .map(|(a, r)| a.extension_mm(self.q[a.joint], *r))
            .collect()
    }

    /// Total force of each attachment, N.
    pub fn tendon_forces(&self, model: &LegModel) -> Vec<f64> {
        model
            .attachments
            .iter()
            .zip(&self.tendons)
            .map(|(a, t)| a.units as f64 * t.force())
            .collect()
    }

    fn sync_tendons(&mut self, model: &LegModel) -> Result<()> {
        let xs = self.extensions(model);
        for (tendon, x) in self.tendons.iter_mut().zip(xs) {
            tendon.update(x)?;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.qdot).all(|v| v.is_finite())
    }
}

/// One active contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSample {
    pub surface: usize,
    pub point: Vec2,
    /// Force on the foot, N.
    pub force: Vec2,
    pub normal: f64,
    pub tangential: f64,
    pub depth: f64,
}

/// Forces and their velocity sensitivities at one state.
pub struct Assembly {
    pub mass: DMatrix<f64>,
    /// Generalised forces excluding inertia, `τ − h`.
    pub forces: DVector<f64>,
    /// `−∂τ/∂q̇` of the damping-like terms.
    pub damping: DMatrix<f64>,
    pub contacts: Vec<ContactSample>,
    pub stop_active: Vec<bool>,
    /// Power dissipated by contact damping and friction, W.
    pub contact_power: f64,
    pub stop_power: f64,
    pub actuator_power: f64,
    pub contact_energy: f64,
    pub stop_energy: f64,
    /// Upward force of the slide end stop on the carriage, N.
    pub floor_force: f64,
}

/// Ground and obstacle overlaps of the foot, with their world-space data.
fn foot_overlaps(
    model: &LegModel,
    env: &Environment,
    frames: &super::chain::Frames,
) -> Vec<(usize, super::contact::Overlap)> {
    let link = model.foot_link();
    let heel = frames.point(link, model.foot.heel_local());
    let toe = frames.point(link, model.foot.toe_local());
    let mut out = Vec::new();
    for (si, s) in env.surfaces.iter().enumerate() {
        match s {
            Surface::Ground { .. } => {
                for local in model.foot.ground_points() {
                    if let Some(o) = s.point_overlap(frames.point(link, local)) {
                        out.push((si, o));
                    }
                }
            }
            Surface::Disc { .. } => {
                if let Some(o) = s.segment_overlap(heel, toe) {
                    out.push((si, o));
                }
            }
        }
    }
    out
}

pub fn assemble(model: &LegModel, env: &Environment, state: &SimState, act: &Actuation) -> Assembly {
    let chain = &model.chain;
    let n = chain.dof();
    let q = DVector::from_column_slice(&state.q);
    let qd = DVector::from_column_slice(&state.qdot);
    let frames = chain.frames(&q, &qd);
    let (mass, bias) = chain.mass_matrix_and_bias(&frames);
    let mut forces = chain.gravity_forces(&frames) - bias;
    let mut damping = DMatrix::zeros(n, n);

    let mut stop_active = vec![false; model.attachments.len()];
    let (mut stop_power, mut stop_energy) = (0.0, 0.0);
    for (i, a) in model.attachments.iter().enumerate() {
        let j = a.joint;
        let arm = a.moment_arm_mm * MM;
        let f = a.units as f64 * state.tendons[i].force();
        forces[j] -= arm * f;
        let x = a.extension_mm(q[j], state.references[i]);
        let excess = (x.abs() - a.travel_limit_mm) * MM;
        if excess > 0.0 {
            stop_active[i] = true;
            let dir = x.signum();
            let outward = dir * arm * qd[j];
            let c = if outward > 0.0 { model.stops.damping } else { 0.0 };
            let fs = model.stops.stiffness * excess + c * outward;
            forces[j] -= dir * arm * fs;
            damping[(j, j)] += c * arm * arm;
            stop_power += c * outward * outward;
            stop_energy += 0.5 * model.stops.stiffness * excess * excess;
        }
    }

    let mut floor_force = 0.0;
    if let Some(floor) = model.slide_floor {
        let depth = floor.height - q[0];
        if depth > 0.0 {
            let c = if qd[0] < 0.0 { floor.damping } else { 0.0 };
            floor_force = floor.stiffness * depth - c * qd[0];
            forces[0] += floor_force;
            damping[(0, 0)] += c;
            stop_power += c * qd[0] * qd[0];
            stop_energy += 0.5 * floor.stiffness * depth * depth;
        }
    }

    let link = model.foot_link();
    let mut contacts = Vec::new();
    let (mut contact_power, mut contact_energy) = (0.0, 0.0);
    for (si, o) in foot_overlaps(model, env, &frames) {
        let jac = chain.point_jacobian(&frames, link, o.point);
        let vp = &jac * &qd;
        let v = Vec2::new(vp[0], vp[1]) - o.surface_velocity;
        let tangent = Vec2::new(o.normal.y, -o.normal.x);
        let depth_rate = -o.normal.dot(&v);
        let v_t = tangent.dot(&v);
        let r = contact_force(o.depth, depth_rate, v_t, &model.contact);
        let force = r.normal * o.normal + r.tangential * tangent;
        forces += jac.transpose() * DVector::from_column_slice(force.as_slice());
        let nn = o.normal * o.normal.transpose() * r.normal_damping;
        let tt = tangent * tangent.transpose() * r.friction_damping;
        let d = DMatrix::from_column_slice(2, 2, (nn + tt).as_slice());
        damping += jac.transpose() * d * &jac;
        contact_power += r.normal_damping * depth_rate * depth_rate - r.tangential * v_t;
        contact_energy += 0.5 * model.contact.k_n * o.depth * o.depth;
        contacts.push(ContactSample {
            surface: si,
            point: o.point,
            force,
            normal: r.normal,
            tangential: r.tangential,
            depth: o.depth,
        });
    }

    let mut actuator_power = 0.0;
    for k in 0..n {
        if let JointDrive::Pd { kp, kd } = act.drives[k] {
            let tau = kp * (act.targets[k] - q[k]) + kd * (act.target_rates[k] - qd[k]);
            forces[k] += tau;
            damping[(k, k)] += kd;
            actuator_power += tau * qd[k];
        }
    }

    Assembly {
        mass,
        forces,
        damping,
        contacts,
        stop_active,
        contact_power,
        stop_power,
        actuator_power,
        contact_energy,
        stop_energy,
        floor_force,
    }
}

fn free_indices(act: &Actuation) -> Vec<usize> {
    (0..act.drives.len())
        .filter(|&k| act.drives[k] != JointDrive::Locked)
        .collect()
}

fn solve_free(a: &DMatrix<f64>, b: &DVector<f64>, free: &[usize]) -> Result<DVector<f64>> {
    let m = free.len();
    let sub = DMatrix::from_fn(m, m, |i, j| a[(free[i], free[j])]);
    let rhs = DVector::from_fn(m, |i, _| b[free[i]]);
    let x = sub
        .cholesky()
        .ok_or_else(|| Error::Configuration("mass matrix is not positive definite".into()))?
        .solve(&rhs);
    let mut out = DVector::zeros(a.nrows());
    for (i, &k) in free.iter().enumerate() {
        out[k] = x[i];
    }
    Ok(out)
}

/// Joint accelerations with every force treated explicitly.
pub fn dynamics_rhs(model: &LegModel, env: &Environment, state: &SimState, act: &Actuation) -> Result<DVector<f64>> {
    let asm = assemble(model, env, state, act);
    solve_free(&asm.mass, &asm.forces, &free_indices(act))
}

/// Per-step outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub qddot: DVector<f64>,
    pub contacts: Vec<ContactSample>,
    /// Slide end-stop force at the start of the step, N.
    pub floor_force: f64,
}

impl StepInfo {
    /// Net contact force on the foot from the given surfaces, N.
    pub fn contact_force_from(&self, surfaces: impl Fn(usize) -> bool) -> Vec2 {
        self.contacts
            .iter()
            .filter(|c| surfaces(c.surface))
            .fold(Vec2::zeros(), |acc, c| acc + c.force)
    }

    pub fn total_contact_force(&self) -> Vec2 {
        self.contact_force_from(|_| true)
    }
}

/// Semi-implicit Euler step. Damping-like forces (contact damping, friction
/// slope, PD rate gains, end-stop damping) are taken implicitly:
/// `(M + dt·C)·Δq̇ = dt·τ`, then `q ← q + dt·q̇`.
pub fn step(model: &LegModel, env: &Environment, act: &Actuation, state: &mut SimState, dt: f64) -> Result<StepInfo> {
    if !(dt > 0.0) {
        return Err(Error::InvalidSpec("time step must be positive".into()));
    }
    let asm = assemble(model, env, state, act);
    let free = free_indices(act);
    let lhs = &asm.mass + dt * &asm.damping;
    let dv = solve_free(&lhs, &(dt * &asm.forces), &free)?;
    let previous = state.clone();
    let fail = |state: &SimState, message: String| Error::BlowUp {
        time: state.t,
        message,
        last_valid: Box::new(previous.clone()),
    };
    for &k in &free {
        state.qdot[k] += dv[k];
        state.q[k] += dt * state.qdot[k];
    }
    for k in 0..state.q.len() {
        if act.drives[k] == JointDrive::Locked {
            state.qdot[k] = 0.0;
        }
    }
    state.t += dt;
    if !state.is_finite() || state.qdot.iter().any(|v| v.abs() > SPEED_LIMIT) {
        return Err(fail(state, "state diverged".into()));
    }
    for (i, jam) in state.jamming.iter_mut().enumerate() {
        let before = jam.pressure_kpa;
        let after = jam.advance(dt);
        if after != before {
            state.tendons[i].set_pressure(after);
        }
    }
    if let Err(e) = state.sync_tendons(model) {
        return Err(fail(state, e.to_string()));
    }
    state.flows.contact_dissipated += dt * asm.contact_power;
    state.flows.stop_dissipated += dt * asm.stop_power;
    state.flows.actuator_work += dt * asm.actuator_power;
    state.contact_active = asm.contacts.iter().map(|c| c.normal > 0.0).collect();
    state.at_stop = asm.stop_active;
    Ok(StepInfo {
        qddot: dv / dt,
        contacts: asm.contacts,
        floor_force: asm.floor_force,
    })
}

/// Energy partition at one instant, J.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyAudit {
    pub kinetic: f64,
    pub gravitational: f64,
    pub tendon_stored: f64,
    pub tendon_dissipated: f64,
    pub contact_dissipated: f64,
    /// Penalty energy held in contacts and end stops.
    pub penalty_stored: f64,
    pub stop_dissipated: f64,
    pub jamming_work: f64,
    pub actuator_work: f64,
}

impl EnergyAudit {
    pub fn mechanical(&self) -> f64 {
        self.kinetic + self.gravitational + self.tendon_stored + self.penalty_stored
    }

    pub fn dissipated(&self) -> f64 {
        self.tendon_dissipated + self.contact_dissipated + self.stop_dissipated
    }

    /// Mechanical energy plus everything lost, minus everything supplied.
    pub fn balance(&self) -> f64 {
        self.mechanical() + self.dissipated() - self.jamming_work - self.actuator_work
    }
}

pub fn energy_audit(model: &LegModel, env: &Environment, act: &Actuation, state: &SimState) -> EnergyAudit {
    let chain = &model.chain;
    let q = DVector::from_column_slice(&state.q);
    let qd = DVector::from_column_slice(&state.qdot);
    let frames = chain.frames(&q, &qd);
    let asm = assemble(model, env, state, act);
    let mut audit = EnergyAudit {
        kinetic: chain.kinetic_energy(&frames, &qd),
        gravitational: chain.potential_energy(&frames),
        penalty_stored: asm.contact_energy + asm.stop_energy,
        contact_dissipated: state.flows.contact_dissipated,
        stop_dissipated: state.flows.stop_dissipated,
        actuator_work: state.flows.actuator_work,
        ..EnergyAudit::default()
    };
    for (a, t) in model.attachments.iter().zip(&state.tendons) {
        let units = a.units as f64 * MM;
        audit.tendon_stored += units * t.stored_energy();
        audit.tendon_dissipated += units * t.dissipated_energy();
        audit.jamming_work += units * t.jamming_work();
    }
    audit
}

/// A recorded sample of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub extensions_mm: Vec<f64>,
    pub forces_n: Vec<f64>,
    /// Net contact force on the foot `(F_x, F_z)`, N.
    pub contact_force: [f64; 2],
    pub normal_n: f64,
    pub tangential_n: f64,
    pub energy: EnergyAudit,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn record(
        &mut self,
        model: &LegModel,
        env: &Environment,
        act: &Actuation,
        state: &SimState,
        info: Option<&StepInfo>,
    ) {
        let (contact_force, normal, tangential) = match info {
            Some(i) => {
                let f = i.total_contact_force();
                (
                    [f.x, f.y],
                    i.contacts.iter().map(|c| c.normal).sum(),
                    i.contacts.iter().map(|c| c.tangential.abs()).sum(),
                )
            }
            None => ([0.0, 0.0], 0.0, 0.0),
        };
        self.samples.push(TrajectorySample {
            t: state.t,
            q: state.q.clone(),
            qdot: state.qdot.clone(),
            extensions_mm: state.extensions(model),
            forces_n: state.tendon_forces(model),
            contact_force,
            normal_n: normal,
            tangential_n: tangential,
            energy: energy_audit(model, env, act, state),
        });
    }

    /// CSV with columns `t_s,y_m,<joint>_rad…,x1_mm…,f1_N…,Fn_N,Ft_N`.
    pub fn to_csv(&self, joint_names: &[&str]) -> String {
        let Some(first) = self.samples.first() else {
            return String::new();
        };
        let mut out = String::from("t_s,y_m");
        for name in joint_names {
            let _ = write!(out, ",th_{name}_rad");
        }
        for i in 1..=first.extensions_mm.len() {
            let _ = write!(out, ",x{i}_mm");
        }
        for i in 1..=first.forces_n.len() {
            let _ = write!(out, ",f{i}_N");
        }
        out.push_str(",Fn_N,Ft_N\n");
        for s in &self.samples {
            let _ = write!(out, "{}", s.t);
            for v in s.q.iter().chain(&s.extensions_mm).chain(&s.forces_n) {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{},{}", s.normal_n, s.tangential_n);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::leg::{LegModel, ANKLE, HIP, KNEE, SLIDE};
    use crate::tendon::iwan::TendonParams;
    use crate::tendon::material::FibreBundleSpec;

    fn leg() -> LegModel {
        let params = TendonParams::initial_guess(&FibreBundleSpec::new(2.0, 4)).unwrap();
        LegModel::jeg(3.65, params).unwrap()
    }

    fn state(model: &LegModel, q: Vec<f64>) -> SimState {
        let n = q.len();
        SimState::new(model, q, vec![0.0; n], vec![JammingState::unjammed(); 4]).unwrap()
    }

    #[test]
    fn resting_state_is_unchanged_without_forces() {
        let model = leg();
        let mut s = state(&model, model.pose_q(1.0, &model.touchdown));
        let act = Actuation::free(4)
            .with(SLIDE, JointDrive::Locked)
            .with(HIP, JointDrive::Locked)
            .with(KNEE, JointDrive::Locked)
            .with(ANKLE, JointDrive::Locked);
        let before = s.clone();
        step(&model, &Environment::default(), &act, &mut s, DEFAULT_DT).unwrap();
        assert_eq!(s.q, before.q);
        assert_eq!(s.qdot, before.qdot);
        assert!((s.t - DEFAULT_DT).abs() < 1e-18);
    }

    #[test]
    fn carriage_free_fall_matches_kinematics() {
        let model = leg();
        let mut s = state(&model, model.pose_q(1.0, &model.touchdown));
        let act = Actuation::free(4)
            .with(HIP, JointDrive::Locked)
            .with(KNEE, JointDrive::Locked)
            .with(ANKLE, JointDrive::Locked);
        let env = Environment::default();
        for _ in 0..1000 {
            step(&model, &env, &act, &mut s, DEFAULT_DT).unwrap();
        }
        let drop = 1.0 - s.q[0];
        let exact = 0.5 * model.chain.gravity * 0.1 * 0.1;
        assert!(((drop - exact) / exact).abs() < 1e-3, "{drop} vs {exact}");
    }

    #[test]
    fn balanced_antagonists_cancel() {
        let model = leg();
        let s = state(&model, model.pose_q(1.0, &model.touchdown));
        let asm = assemble(&model, &Environment::default(), &s, &Actuation::free(4));
        let gravity_only = {
            let q = DVector::from_column_slice(&s.q);
            let f = model.chain.frames(&q, &DVector::zeros(4));
            model.chain.gravity_forces(&f)
        };
        assert!((asm.forces[KNEE] - gravity_only[KNEE]).abs() < 1e-12);
        assert!((asm.forces[ANKLE] - gravity_only[ANKLE]).abs() < 1e-12);
    }

    #[test]
    fn divergence_returns_last_valid_state() {
        let model = leg();
        let mut s = state(&model, model.pose_q(1.0, &model.touchdown));
        s.qdot[HIP] = f64::NAN;
        let err = step(&model, &Environment::default(), &Actuation::free(4), &mut s, DEFAULT_DT);
        assert!(matches!(err, Err(Error::BlowUp { .. }) | Err(Error::Configuration(_))));
    }

    #[test]
    fn csv_header_names_every_column() {
        let model = leg();
        let s = state(&model, model.pose_q(1.0, &model.touchdown));
        let mut traj = Trajectory::default();
        traj.record(&model, &Environment::default(), &Actuation::free(4), &s, None);
        let csv = traj.to_csv(&["hip", "knee", "ankle"]);
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "t_s,y_m,th_hip_rad,th_knee_rad,th_ankle_rad,x1_mm,x2_mm,x3_mm,x4_mm,f1_N,f2_N,f3_N,f4_N,Fn_N,Ft_N"
        );
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 15);
    }

    /// Largest excursion of kinetic plus potential energy over a free swing,
    /// relative to the largest kinetic energy reached.
    fn swing_drift(dt: f64, duration: f64) -> f64 {
        let mut model = LegModel::jeg(3.65, crate::scenarios::leg_tendon_params().unwrap()).unwrap();
        model.attachments.clear();
        model.validate().unwrap();
        let env = Environment::default();
        let act = Actuation::free(4).with(SLIDE, JointDrive::Locked);
        let q = model.pose_q(0.5, &crate::dynamics::Pose::from_degrees(35.0, 20.0, 80.0));
        let mut s = SimState::new(&model, q, vec![0.0; 4], Vec::new()).unwrap();
        let e = |s: &SimState| {
            let a = energy_audit(&model, &env, &act, s);
            (a.kinetic + a.gravitational, a.kinetic)
        };
        let (e0, _) = e(&s);
        let (mut worst, mut ke_max) = (0.0_f64, 0.0_f64);
        for _ in 0..(duration / dt).round() as usize {
            step(&model, &env, &act, &mut s, dt).unwrap();
            let (et, ke) = e(&s);
            worst = worst.max((et - e0).abs());
            ke_max = ke_max.max(ke);
        }
        assert!(ke_max > 0.1, "leg barely swung");
        worst / ke_max
    }

    #[test]
    fn free_swing_conserves_energy() {
        let drift = swing_drift(1e-4, 5.0);
        assert!(drift < 1e-3, "drift {drift}");
    }

    #[test]
    fn swing_drift_shrinks_with_dt() {
        assert!(swing_drift(5e-5, 1.0) < swing_drift(2e-4, 1.0));
    }
}
