//! Two-body contact configuration and relative kinematics of the contact
//! frames, expressed in the moving frame of body 2.
//!
//! Body 1 is the manipulating body (a fingertip), body 2 the object. Only the
//! two tangential components of relative velocity and acceleration are
//! modelled; the normal component is never populated.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::surface::{geometry_at, Chart, SurfaceGeometry};

/// Contact coordinates of both bodies, the spin angle between their `u`
/// directions, and the time derivatives of all five.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    pub u1: f64,
    pub v1: f64,
    pub u2: f64,
    pub v2: f64,
    pub psi: f64,
    pub du1: f64,
    pub dv1: f64,
    pub du2: f64,
    pub dv2: f64,
    pub dpsi: f64,
}

impl ContactState {
    /// Length of the packed first-order state: coordinates, ψ, then the four
    /// coordinate rates. ψ̇ is not part of it (it is derived).
    pub const PACKED_LEN: usize = 9;

    pub fn pack(&self) -> [f64; Self::PACKED_LEN] {
        [
            self.u1, self.v1, self.u2, self.v2, self.psi, self.du1, self.dv1, self.du2, self.dv2,
        ]
    }

    pub fn unpack(y: &[f64]) -> Self {
        ContactState {
            u1: y[0],
            v1: y[1],
            u2: y[2],
            v2: y[3],
            psi: y[4],
            du1: y[5],
            dv1: y[6],
            du2: y[7],
            dv2: y[8],
            dpsi: 0.0,
        }
    }
}

/// Wrap an angle into `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Tangential relative velocity and acceleration of the contact frames in
/// the frame of body 2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RelativeMotion {
    pub v_rel_x: f64,
    pub v_rel_y: f64,
    pub a_rel_x: f64,
    pub a_rel_y: f64,
}

impl RelativeMotion {
    pub fn velocity(&self) -> [f64; 2] {
        [self.v_rel_x, self.v_rel_y]
    }

    pub fn acceleration(&self) -> [f64; 2] {
        [self.a_rel_x, self.a_rel_y]
    }
}

/// Map from the body-1 contact frame to the body-2 contact frame. The
/// tangential block is a reflection, so the matrix is symmetric and its own
/// inverse.
pub fn rotation_psi(psi: f64) -> Matrix3<f64> {
    let (s, c) = psi.sin_cos();
    Matrix3::new(c, -s, 0.0, -s, -c, 0.0, 0.0, 0.0, -1.0)
}

/// Tangential block of [`rotation_psi`] applied to `w`.
pub(crate) fn reflect(psi: f64, w: [f64; 2]) -> [f64; 2] {
    let (s, c) = psi.sin_cos();
    [c * w[0] - s * w[1], -s * w[0] - c * w[1]]
}

/// Surface velocity of a body's contact point in its own normalized frame,
/// `M (du, dv)`.
pub(crate) fn frame_velocity(g: &SurfaceGeometry, du: f64, dv: f64) -> [f64; 2] {
    [g.norm_u * du, g.norm_v * dv]
}

/// Geometry of both bodies at the state's contact coordinates.
pub fn pair_geometry(
    state: &ContactState,
    chart1: &dyn Chart,
    chart2: &dyn Chart,
) -> Result<(SurfaceGeometry, SurfaceGeometry)> {
    Ok((
        geometry_at(chart1, state.u1, state.v1)?,
        geometry_at(chart2, state.u2, state.v2)?,
    ))
}

/// `v_rel = R_ψ M₁ α̇₁ − M₂ α̇₂` from precomputed geometry.
pub fn relative_velocity_at(g1: &SurfaceGeometry, g2: &SurfaceGeometry, s: &ContactState) -> [f64; 2] {
    let w1 = reflect(s.psi, frame_velocity(g1, s.du1, s.dv1));
    let w2 = frame_velocity(g2, s.du2, s.dv2);
    [w1[0] - w2[0], w1[1] - w2[1]]
}

/// Tangential relative velocity of the body-1 contact frame with respect to
/// the body-2 contact frame, in the body-2 frame.
pub fn relative_velocity(
    state: &ContactState,
    chart1: &dyn Chart,
    chart2: &dyn Chart,
) -> Result<[f64; 2]> {
    let (g1, g2) = pair_geometry(state, chart1, chart2)?;
    Ok(relative_velocity_at(&g1, &g2, state))
}

/// Covariant (tangential) acceleration of a contact curve in its own
/// normalized frame: `M (ü + Γ¹(α̇,α̇), v̈ + Γ²(α̇,α̇))`.
pub(crate) fn frame_acceleration(g: &SurfaceGeometry, du: f64, dv: f64, ddu: f64, ddv: f64) -> [f64; 2] {
    let (qu, qv) = g.christoffel.quadratic(du, dv);
    [g.norm_u * (ddu + qu), g.norm_v * (ddv + qv)]
}

/// Relative velocity and acceleration from precomputed geometry.
/// `accels` is `(ü₁, v̈₁, ü₂, v̈₂)`.
pub fn relative_motion_at(
    g1: &SurfaceGeometry,
    g2: &SurfaceGeometry,
    s: &ContactState,
    accels: [f64; 4],
) -> RelativeMotion {
    let [vx, vy] = relative_velocity_at(g1, g2, s);
    let a1 = reflect(s.psi, frame_acceleration(g1, s.du1, s.dv1, accels[0], accels[1]));
    let a2 = frame_acceleration(g2, s.du2, s.dv2, accels[2], accels[3]);
    // The Coriolis term 2 ω_rel × v has no tangential part: with no spin about
    // the normal, ω_rel and the contact velocity both lie in the tangent plane.
    RelativeMotion {
        v_rel_x: vx,
        v_rel_y: vy,
        a_rel_x: a1[0] - a2[0],
        a_rel_y: a1[1] - a2[1],
    }
}

/// Tangential relative acceleration `a_rel = R_ψ M₁ a₁ − M₂ a₂`, together
/// with the relative velocity. `accels` is `(ü₁, v̈₁, ü₂, v̈₂)`.
pub fn relative_acceleration(
    state: &ContactState,
    accels: [f64; 4],
    chart1: &dyn Chart,
    chart2: &dyn Chart,
) -> Result<RelativeMotion> {
    let (g1, g2) = pair_geometry(state, chart1, chart2)?;
    Ok(relative_motion_at(&g1, &g2, state, accels))
}

/// Spin rate of the contact angle for contact without spin about the normal:
/// `ψ̇ = T₁ M₁ α̇₁ + T₂ M₂ α̇₂`, the sum of the tangent-frame spin rates of
/// both bodies.
pub fn spin_rate_at(g1: &SurfaceGeometry, g2: &SurfaceGeometry, s: &ContactState) -> f64 {
    g1.frame_spin(s.du1, s.dv1) + g2.frame_spin(s.du2, s.dv2)
}

/// Time derivative of the components of `v_rel` in the moving body-2 frame.
///
/// It differs from `a_rel` by terms that come from the rotation of the two
/// tangent frames; when `ψ̇` equals [`spin_rate_at`] the difference is
/// `−ω₂ J v_rel` (`J` the quarter turn), which rotates `v_rel` without
/// changing its length.
pub fn relative_velocity_rate_at(
    g1: &SurfaceGeometry,
    g2: &SurfaceGeometry,
    s: &ContactState,
    accels: [f64; 4],
) -> [f64; 2] {
    let m = relative_motion_at(g1, g2, s, accels);
    let w1 = frame_velocity(g1, s.du1, s.dv1);
    let w2 = frame_velocity(g2, s.du2, s.dv2);
    let spin1 = g1.frame_spin(s.du1, s.dv1);
    let spin2 = g2.frame_spin(s.du2, s.dv2);
    // d/dt R_ψ = ψ̇ R_ψ J, and d/dt w_i = a_i − spin_i J w_i with J w = (−w_y, w_x)
    let jw1 = reflect(s.psi, [-w1[1], w1[0]]);
    let k = s.dpsi - spin1;
    [
        m.a_rel_x + k * jw1[0] - spin2 * w2[1],
        m.a_rel_y + k * jw1[1] + spin2 * w2[0],
    ]
}

/// `‖a_rel − (σ̇/σ) v_rel‖∞` for the given coordinate accelerations. Zero (up
/// to rounding) whenever both curves follow time-parameterized geodesics.
pub fn proportionality_residual(
    state: &ContactState,
    accels: [f64; 4],
    sigma: &crate::geodesic::SigmaProfile,
    t: f64,
    chart1: &dyn Chart,
    chart2: &dyn Chart,
) -> Result<f64> {
    let (s, ds) = sigma.eval(t)?;
    let m = relative_acceleration(state, accels, chart1, chart2)?;
    let ratio = ds / s;
    Ok((m.a_rel_x - ratio * m.v_rel_x)
        .abs()
        .max((m.a_rel_y - ratio * m.v_rel_y).abs()))
}
