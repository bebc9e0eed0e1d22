//! Penalty-contact rigid-body simulation of kinematically driven spherical
//! fingertips acting on a free spherical object.
//!
//! Each fingertip follows the contact curves planned by a [`PairSystem`]
//! (finger = body 1, object = body 2). The plan is expressed in a drive frame
//! that translates with the object's centre of mass but does not turn with
//! it, so any object rotation produced by friction shows up as physical slip
//! at the contacts. Gravity is absent.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use serde::Serialize;

use crate::contact::{normalize_angle, relative_velocity_at, spin_rate_at, ContactState};
use crate::error::{Error, Result};
use crate::geodesic::PairSystem;
use crate::ode::Rk4;
use crate::surface::{geometry_at, Vec3};

/// Free rigid body. Angular velocity is expressed in world axes; the inertia
/// tensor in body axes.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidBodyState {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
    pub velocity: Vec3,
    pub angular_velocity: Vec3,
    pub mass: f64,
    pub inertia: Matrix3<f64>,
}

/// Packed length of the kinematic part of a [`RigidBodyState`].
pub const BODY_STATE_LEN: usize = 13;

impl RigidBodyState {
    /// Uniform solid sphere at rest at the origin.
    pub fn solid_sphere(mass: f64, radius: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid("mass", format!("must be positive, got {mass}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(RigidBodyState {
            position: Vec3::zeros(),
            orientation: UnitQuaternion::identity(),
            velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
            mass,
            inertia: Matrix3::identity() * (0.4 * mass * radius * radius),
        })
    }

    /// Check the quaternion norm and that the inertia is symmetric positive
    /// definite.
    pub fn validate(&self) -> Result<()> {
        let qn = self.orientation.as_ref().norm();
        if (qn - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("orientation", format!("quaternion norm {qn}")));
        }
        let asym = (self.inertia - self.inertia.transpose()).amax();
        if asym > 1e-12 * self.inertia.amax() || self.inertia.cholesky().is_none() {
            return Err(Error::invalid("inertia", "must be symmetric positive definite"));
        }
        Ok(())
    }

    pub fn inertia_world(&self) -> Matrix3<f64> {
        let r = self.orientation.to_rotation_matrix();
        r.matrix() * self.inertia * r.matrix().transpose()
    }

    pub fn momentum(&self) -> Vec3 {
        self.velocity * self.mass
    }

    pub fn angular_momentum(&self) -> Vec3 {
        self.inertia_world() * self.angular_velocity + self.position.cross(&self.momentum())
    }

    pub fn pack(&self) -> [f64; BODY_STATE_LEN] {
        let q = self.orientation.as_ref();
        let (p, v, w) = (self.position, self.velocity, self.angular_velocity);
        [
            p.x, p.y, p.z, q.w, q.i, q.j, q.k, v.x, v.y, v.z, w.x, w.y, w.z,
        ]
    }

    /// Overwrite the kinematic state from a packed slice, renormalizing the
    /// quaternion.
    pub fn unpack_from(&mut self, y: &[f64]) {
        self.position = Vec3::new(y[0], y[1], y[2]);
        self.orientation = UnitQuaternion::from_quaternion(Quaternion::new(y[3], y[4], y[5], y[6]));
        self.velocity = Vec3::new(y[7], y[8], y[9]);
        self.angular_velocity = Vec3::new(y[10], y[11], y[12]);
    }

    /// Time derivative of the packed state under an external wrench about
    /// the centre of mass.
    pub fn derivative(&self, y: &[f64], force: &Vec3, torque: &Vec3, dy: &mut [f64]) {
        let q = Quaternion::new(y[3], y[4], y[5], y[6]);
        let w = Vec3::new(y[10], y[11], y[12]);
        let dq = Quaternion::from_imag(w) * q * 0.5;
        let r = UnitQuaternion::from_quaternion(q).to_rotation_matrix();
        let iw = r.matrix() * self.inertia * r.matrix().transpose();
        let dw = iw
            .try_inverse()
            .map(|inv| inv * (torque - w.cross(&(iw * w))))
            .unwrap_or_else(|| Vec3::repeat(f64::NAN));
        let a = force / self.mass;
        dy[..3].copy_from_slice(&y[7..10]);
        dy[3] = dq.w;
        dy[4] = dq.i;
        dy[5] = dq.j;
        dy[6] = dq.k;
        dy[7..10].copy_from_slice(a.as_slice());
        dy[10..13].copy_from_slice(dw.as_slice());
    }
}

/// Forces at one contact, tangential part in the object's contact frame and
/// acting on the fingertip.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ContactForceRecord {
    pub f_n: f64,
    pub f_tx: f64,
    pub f_ty: f64,
    pub saturated: bool,
}

impl ContactForceRecord {
    pub fn tangential_norm(&self) -> f64 {
        self.f_tx.hypot(self.f_ty)
    }
}

/// Spring-damper normal force, zero when the bodies are apart and never
/// adhesive.
pub fn penalty_normal_force(penetration: f64, penetration_rate: f64, k: f64, c: f64) -> f64 {
    if penetration > 0.0 {
        (k * penetration + c * penetration_rate).max(0.0)
    } else {
        0.0
    }
}

/// Viscous-capped Coulomb friction opposing `slip`: magnitude
/// `min(gain ‖slip‖, μ f_N)`.
pub fn friction_force(slip: [f64; 2], f_n: f64, mu: f64, viscous_gain: f64) -> [f64; 2] {
    let speed = slip[0].hypot(slip[1]);
    if speed == 0.0 || f_n <= 0.0 {
        return [0.0, 0.0];
    }
    let cap = mu * f_n;
    if viscous_gain * speed >= cap {
        [-cap * slip[0] / speed, -cap * slip[1] / speed]
    } else {
        [-viscous_gain * slip[0], -viscous_gain * slip[1]]
    }
}

pub fn friction_saturates(slip: [f64; 2], f_n: f64, mu: f64, viscous_gain: f64) -> bool {
    f_n > 0.0 && viscous_gain * slip[0].hypot(slip[1]) >= mu * f_n
}

/// Contact law parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContactParams {
    pub stiffness: f64,
    pub damping: f64,
    pub mu: f64,
    pub friction_gain: f64,
    /// Penetration the finger drive holds at the contact.
    pub preload_depth: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams {
            stiffness: 1.0e4,
            damping: 1.0e3,
            mu: 0.5,
            friction_gain: 1.0e3,
            preload_depth: 1.0e-4,
        }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("stiffness", self.stiffness > 0.0),
            ("damping", self.damping >= 0.0),
            ("mu", self.mu >= 0.0),
            ("friction_gain", self.friction_gain > 0.0),
            ("preload_depth", self.preload_depth > 0.0),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::invalid(name, "out of range"));
            }
        }
        Ok(())
    }
}

/// One kinematically driven fingertip: its contact plan and radius.
pub struct FingerDrive<'a> {
    pub plan: PairSystem<'a>,
    pub finger_radius: f64,
}

/// Evaluated contact at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ContactSample {
    /// Planned contact state with disturbances applied and `dpsi` filled.
    pub state: ContactState,
    /// Relative velocity of the finger contact frame with respect to the
    /// object, object contact-frame components. Equals the planned value
    /// while the object does not rotate.
    pub v_rel: [f64; 2],
    pub force: ContactForceRecord,
}

struct ContactWrench {
    sample: ContactSample,
    force: Vec3,
    torque: Vec3,
}

struct Model<'a> {
    drives: Vec<FingerDrive<'a>>,
    object: RigidBodyState,
    object_radius: f64,
    params: ContactParams,
}

impl Model<'_> {
    fn dim(&self) -> usize {
        self.drives.len() * ContactState::PACKED_LEN + BODY_STATE_LEN
    }

    fn body_slice<'y>(&self, y: &'y [f64]) -> &'y [f64] {
        &y[self.drives.len() * ContactState::PACKED_LEN..]
    }

    fn contact(&self, i: usize, t: f64, y: &[f64]) -> Result<ContactWrench> {
        const N: usize = ContactState::PACKED_LEN;
        let drive = &self.drives[i];
        let plan = &drive.plan;
        let mut st = plan.effective_state(t, &y[i * N..(i + 1) * N]);
        let g1 = geometry_at(plan.chart1, st.u1, st.v1)?;
        let g2 = geometry_at(plan.chart2, st.u2, st.v2)?;
        st.dpsi = spin_rate_at(&g1, &g2, &st);
        let planned = relative_velocity_at(&g1, &g2, &st);

        let body = self.body_slice(y);
        let omega = Vec3::new(body[10], body[11], body[12]);
        let (p, n) = (g2.point, g2.normal);
        let (ex, ey) = (g2.x_axis(), g2.y_axis());

        // Finger centre relative to the object centre and its drive velocity.
        let rf = drive.finger_radius;
        let arm = rf - self.params.preload_depth;
        let centre = p + n * arm;
        let dp = g2.partials.du * st.du2 + g2.partials.dv * st.dv2;
        let dcentre = dp * (1.0 + arm / self.object_radius);
        let dist = centre.norm();
        let penetration = self.object_radius + rf - dist;
        let penetration_rate = -centre.dot(&dcentre) / dist;
        let f_n = penalty_normal_force(
            penetration,
            penetration_rate,
            self.params.stiffness,
            self.params.damping,
        );

        // Material slip of the finger over the object is −v_rel; object spin
        // moves the object's material point under the finger.
        let spin = omega.cross(&p);
        let v_rel = [planned[0] + spin.dot(&ex), planned[1] + spin.dot(&ey)];
        let slip = [-v_rel[0], -v_rel[1]];
        let ft = friction_force(slip, f_n, self.params.mu, self.params.friction_gain);
        let saturated = friction_saturates(slip, f_n, self.params.mu, self.params.friction_gain);

        let on_object = -n * f_n - (ex * ft[0] + ey * ft[1]);
        Ok(ContactWrench {
            sample: ContactSample {
                state: st,
                v_rel,
                force: ContactForceRecord {
                    f_n,
                    f_tx: ft[0],
                    f_ty: ft[1],
                    saturated,
                },
            },
            torque: p.cross(&on_object),
            force: on_object,
        })
    }

    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        const N: usize = ContactState::PACKED_LEN;
        let mut force = Vec3::zeros();
        let mut torque = Vec3::zeros();
        for i in 0..self.drives.len() {
            let w = self.contact(i, t, y)?;
            force += w.force;
            torque += w.torque;
            self.drives[i]
                .plan
                .rhs(t, &y[i * N..(i + 1) * N], &mut dy[i * N..(i + 1) * N])?;
        }
        let off = self.drives.len() * N;
        self.object.derivative(&y[off..], &force, &torque, &mut dy[off..]);
        Ok(())
    }
}

/// Object plus fingertip drives, advanced with fixed-step RK4.
pub struct World<'a> {
    model: Model<'a>,
    rk: Rk4,
    y: Vec<f64>,
    t: f64,
}

impl<'a> World<'a> {
    /// `object_radius` is the radius of the spherical object whose chart is
    /// each drive's body-2 chart, centred on the object's centre of mass.
    pub fn new(
        object: RigidBodyState,
        object_radius: f64,
        drives: Vec<(FingerDrive<'a>, ContactState)>,
        params: ContactParams,
        t0: f64,
    ) -> Result<Self> {
        object.validate()?;
        params.validate()?;
        if !(object_radius > 0.0) {
            return Err(Error::invalid("object_radius", "must be positive"));
        }
        let mut y = Vec::new();
        let mut ds = Vec::with_capacity(drives.len());
        for (d, s) in drives {
            if !(d.finger_radius > params.preload_depth) {
                return Err(Error::invalid("finger_radius", "must exceed the preload depth"));
            }
            y.extend_from_slice(&s.pack());
            ds.push(d);
        }
        y.extend_from_slice(&object.pack());
        let model = Model {
            drives: ds,
            object,
            object_radius,
            params,
        };
        Ok(World {
            rk: Rk4::new(model.dim()),
            model,
            y,
            t: t0,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn contact_count(&self) -> usize {
        self.model.drives.len()
    }

    pub fn object(&self) -> RigidBodyState {
        let mut o = self.model.object.clone();
        o.unpack_from(self.model.body_slice(&self.y));
        o
    }

    pub fn params(&self) -> &ContactParams {
        &self.model.params
    }

    /// Contacts evaluated at the current state.
    pub fn samples(&self) -> Result<Vec<ContactSample>> {
        (0..self.contact_count())
            .map(|i| Ok(self.model.contact(i, self.t, &self.y)?.sample))
            .collect()
    }

    /// Total number of plan evaluations where the contraction condition
    /// failed, with the earliest such time.
    pub fn contraction_warnings(&self) -> (usize, Option<f64>) {
        self.model.drives.iter().fold((0, None), |(n, first), d| {
            let w = d.plan.warning;
            let first = match (first, w.first_t) {
                (Some(a), Some(b)) => Some(f64::min(a, b)),
                (a, b) => a.or(b),
            };
            (n + w.count, first)
        })
    }

    /// Advance the world by `dt`: fingertips follow their drives, the object
    /// integrates the summed contact wrench.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        let t = self.t;
        let model = &mut self.model;
        self.rk
            .step(&mut |t, y: &[f64], dy: &mut [f64]| model.rhs(t, y, dy), t, &mut self.y, dt)
            .map_err(|e| e.at_time(t))?;
        self.t = t + dt;
        const N: usize = ContactState::PACKED_LEN;
        for i in 0..self.model.drives.len() {
            self.y[i * N + 4] = normalize_angle(self.y[i * N + 4]);
        }
        let off = self.model.drives.len() * N;
        let qn = self.y[off + 3..off + 7].iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut self.y[off + 3..off + 7] {
            *x /= qn;
        }
        if self.y.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { t: self.t });
        }
        Ok(())
    }
}

/// Advance `world` by one step of size `dt`.
pub fn step_dynamics(world: &mut World<'_>, dt: f64) -> Result<()> {
    world.step(dt)
}

/// Sampled output of a dynamic run.
#[derive(Clone, Debug, Default)]
pub struct DynamicsLog {
    pub times: Vec<f64>,
    /// `contacts[i][k]` is contact `i` at `times[k]`.
    pub contacts: Vec<Vec<ContactSample>>,
    pub final_object: Option<RigidBodyState>,
}

/// Run `world` to `t1` with steps close to `dt`, recording every step.
pub fn simulate(world: &mut World<'_>, t1: f64, dt: f64) -> Result<DynamicsLog> {
    let n = crate::ode::step_count(world.time(), t1, dt)?;
    let h = (t1 - world.time()) / n as f64;
    let mut log = DynamicsLog {
        times: Vec::with_capacity(n + 1),
        contacts: vec![Vec::with_capacity(n + 1); world.contact_count()],
        final_object: None,
    };
    let record = |w: &World<'_>, log: &mut DynamicsLog| -> Result<()> {
        log.times.push(w.time());
        for (i, s) in w.samples().map_err(|e| e.at_time(w.time()))?.into_iter().enumerate() {
            log.contacts[i].push(s);
        }
        Ok(())
    };
    record(world, &mut log)?;
    let t0 = world.time();
    for k in 0..n {
        world.step(h)?;
        // avoid drift in the time base
        world.t = t0 + (k + 1) as f64 * h;
        record(world, &mut log)?;
    }
    log.final_object = Some(world.object());
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{RateOffset, SigmaProfile};
    use crate::rolling::rolling_rates;
    use crate::surface::sphere_chart;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn normal_force_examples() {
        assert_abs_diff_eq!(penalty_normal_force(1e-4, 0.0, 1e4, 1e3), 1.0, epsilon = 1e-12);
        assert_eq!(penalty_normal_force(0.0, 5.0, 1e4, 1e3), 0.0);
        assert_eq!(penalty_normal_force(-1e-3, 5.0, 1e4, 1e3), 0.0);
        assert_abs_diff_eq!(penalty_normal_force(1e-4, -1e-3, 1e4, 1e3), 0.0, epsilon = 1e-12);
        assert_eq!(penalty_normal_force(1e-4, -1.0, 1e4, 1e3), 0.0);
    }

    #[test]
    fn friction_examples() {
        let f = friction_force([10.0, -3.0], 1.0, 0.5, 1e3);
        assert_abs_diff_eq!(f[0].hypot(f[1]), 0.5, epsilon = 1e-15);
        assert!(f[0] < 0.0 && f[1] > 0.0);
        assert_eq!(friction_force([0.0, 0.0], 1.0, 0.5, 1e3), [0.0, 0.0]);
        let f = friction_force([1e-4, 0.0], 1.0, 0.5, 1e3);
        assert_abs_diff_eq!(f[0], -0.1, epsilon = 1e-15);
        assert_eq!(f[1], 0.0);
        assert!(!friction_saturates([1e-4, 0.0], 1.0, 0.5, 1e3));
        assert!(friction_saturates([1e-3, 0.0], 1.0, 0.5, 1e3));
        assert_eq!(friction_force([1.0, 0.0], 0.0, 0.5, 1e3), [0.0, 0.0]);
    }

    #[test]
    fn sphere_inertia_and_validation() {
        let b = RigidBodyState::solid_sphere(4.18, 0.1).unwrap();
        assert_abs_diff_eq!(b.inertia[(0, 0)], 0.4 * 4.18 * 0.01, epsilon = 1e-15);
        b.validate().unwrap();
        let mut bad = b.clone();
        bad.inertia[(0, 1)] = 1.0;
        assert!(bad.validate().is_err());
        assert!(RigidBodyState::solid_sphere(-1.0, 0.1).is_err());
    }

    #[test]
    fn free_body_conserves_momentum() {
        let mut b = RigidBodyState::solid_sphere(2.0, 0.1).unwrap();
        b.inertia = Matrix3::from_diagonal(&Vec3::new(0.01, 0.02, 0.03));
        b.velocity = Vec3::new(0.3, -0.2, 0.1);
        b.angular_velocity = Vec3::new(1.0, 2.0, -0.5);
        let mut w = World::new(b.clone(), 0.1, vec![], ContactParams::default(), 0.0).unwrap();
        let (p0, l0) = (b.momentum(), b.angular_momentum());
        for _ in 0..1000 {
            w.step(1e-3).unwrap();
            let o = w.object();
            assert!((o.momentum() - p0).norm() < 1e-12);
            assert!((o.angular_momentum() - l0).norm() < 1e-8);
            assert!((o.orientation.as_ref().norm() - 1.0).abs() < 1e-12);
        }
        assert!((w.object().position - b.velocity).norm() < 1e-12);
    }

    #[test]
    fn static_object_without_contact() {
        let b = RigidBodyState::solid_sphere(4.18, 0.1).unwrap();
        let mut w = World::new(b.clone(), 0.1, vec![], ContactParams::default(), 0.0).unwrap();
        for _ in 0..10 {
            step_dynamics(&mut w, 0.01).unwrap();
        }
        assert_eq!(w.object().pack(), b.pack());
    }

    fn one_finger_world<'a>(
        finger: &'a dyn crate::surface::Chart,
        object: &'a dyn crate::surface::Chart,
        sigma: &'a SigmaProfile,
        offsets: Vec<RateOffset>,
    ) -> World<'a> {
        let mut st = ContactState {
            u1: PI / 2.0,
            v1: 0.0,
            u2: PI / 2.0,
            v2: 0.3,
            psi: -PI / 2.0,
            du1: 0.0,
            dv1: 0.5,
            ..Default::default()
        };
        let r = rolling_rates(&st, finger, object).unwrap();
        st.du2 = r.du2;
        st.dv2 = r.dv2;
        let plan = PairSystem::new(finger, object, sigma, Some(100.0))
            .unwrap()
            .with_rate_offsets(offsets);
        World::new(
            RigidBodyState::solid_sphere(4.18, 0.1).unwrap(),
            0.1,
            vec![(FingerDrive { plan, finger_radius: 0.04 }, st)],
            ContactParams::default(),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn steady_rolling_has_no_slip() {
        let finger = sphere_chart(0.04).unwrap();
        let object = sphere_chart(0.1).unwrap();
        let sigma = SigmaProfile::new(vec![1.0, 0.2, -0.02]).unwrap();
        let mut w = one_finger_world(&finger, &object, &sigma, vec![]);
        let log = simulate(&mut w, 0.5, 1e-3).unwrap();
        for s in &log.contacts[0] {
            assert!(s.v_rel[0].hypot(s.v_rel[1]) < 1e-9);
            assert_abs_diff_eq!(s.force.f_n, 1.0, epsilon = 1e-9);
            assert!(!s.force.saturated);
        }
    }

    #[test]
    fn disturbance_saturates_friction_within_cone() {
        let finger = sphere_chart(0.04).unwrap();
        let object = sphere_chart(0.1).unwrap();
        let sigma = SigmaProfile::new(vec![1.0, 0.2, -0.02]).unwrap();
        let off = RateOffset { t_start: 0.1, t_end: 0.2, du: 0.6, dv: 1.0 };
        let mut w = one_finger_world(&finger, &object, &sigma, vec![off]);
        let log = simulate(&mut w, 0.4, 1e-4).unwrap();
        let mut saw = false;
        for s in &log.contacts[0] {
            let f = &s.force;
            assert!(f.tangential_norm() <= 0.5 * f.f_n + 1e-9);
            if f.saturated {
                saw = true;
                assert_abs_diff_eq!(f.tangential_norm(), 0.5 * f.f_n, epsilon = 1e-9);
            }
        }
        assert!(saw);
        let last = log.contacts[0].last().unwrap();
        assert!(last.v_rel[0].hypot(last.v_rel[1]) < 1e-3);
        assert!(log.final_object.unwrap().angular_velocity.norm() > 0.0);
    }
}
