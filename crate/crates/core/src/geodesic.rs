//! Path-speed profiles, time-parameterized geodesic equations and their
//! slip-rejecting modification.
//!
//! With `σ = ds/dt`, a geodesic `α(s)` traversed in time obeys
//!
//! ```text
//! α̈^k = (σ̇/σ) α̇^k − Γ^k_ij α̇^i α̇^j
//! ```
//!
//! The modified equations keep body 1 on this geodesic and add a feedback
//! `σ² η (M₂⁻¹ R_ψ M₁ α̇₁ − α̇₂)` to body 2, which turns the relation between
//! relative acceleration and relative velocity into
//! `a_rel = (σ̇/σ − η σ²) v_rel`.

use serde::{Deserialize, Serialize};

use crate::contact::{
    frame_velocity, normalize_angle, pair_geometry, reflect, spin_rate_at, ContactState,
};
use crate::error::{Error, Result};
use crate::ode::{integrate_with, Trajectory};
use crate::surface::{geometry_at, Chart, SurfaceGeometry};

/// `|σ|` below which the profile is treated as singular.
pub const SIGMA_FLOOR: f64 = 1e-9;

/// Maximum polynomial degree of a σ profile.
pub const MAX_SIGMA_DEGREE: usize = 5;

/// Polynomial `σ(t) = Σ c_k t^k`, coefficients in ascending powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SigmaProfile {
    coefficients: Vec<f64>,
}

impl SigmaProfile {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::invalid("sigma", "needs at least one coefficient"));
        }
        if coefficients.len() > MAX_SIGMA_DEGREE + 1 {
            return Err(Error::invalid(
                "sigma",
                format!("degree {} exceeds {MAX_SIGMA_DEGREE}", coefficients.len() - 1),
            ));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("sigma", "coefficients must be finite"));
        }
        Ok(SigmaProfile { coefficients })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(vec![c])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn value(&self, t: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * t + k as f64 * c)
    }

    /// `(σ, σ̇)` at `t`, failing where `|σ| < SIGMA_FLOOR`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        let s = self.value(t);
        if !(s.abs() >= SIGMA_FLOOR) {
            return Err(Error::SingularProfile { t, sigma: s });
        }
        Ok((s, self.derivative(t)))
    }
}

impl TryFrom<Vec<f64>> for SigmaProfile {
    type Error = Error;

    fn try_from(c: Vec<f64>) -> Result<Self> {
        SigmaProfile::new(c)
    }
}

impl From<SigmaProfile> for Vec<f64> {
    fn from(p: SigmaProfile) -> Self {
        p.coefficients
    }
}

pub fn sigma_eval(profile: &SigmaProfile, t: f64) -> Result<(f64, f64)> {
    profile.eval(t)
}

/// Coordinate accelerations of one body.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GeodesicRates {
    pub ddu: f64,
    pub ddv: f64,
}

/// Geodesic accelerations from precomputed geometry; `ratio` is `σ̇/σ`.
pub fn geodesic_rates_at(g: &SurfaceGeometry, du: f64, dv: f64, ratio: f64) -> GeodesicRates {
    let (qu, qv) = g.christoffel.quadratic(du, dv);
    GeodesicRates {
        ddu: ratio * du - qu,
        ddv: ratio * dv - qv,
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.abs() >= SIGMA_FLOOR) {
        return Err(Error::SingularProfile { t: f64::NAN, sigma });
    }
    Ok(())
}

/// Accelerations of a time-parameterized geodesic through `(u, v)` with
/// coordinate rates `(du, dv)`.
pub fn geodesic_rhs(
    chart: &dyn Chart,
    u: f64,
    v: f64,
    du: f64,
    dv: f64,
    sigma: f64,
    sigma_dot: f64,
) -> Result<GeodesicRates> {
    check_sigma(sigma)?;
    let g = geometry_at(chart, u, v)?;
    Ok(geodesic_rates_at(&g, du, dv, sigma_dot / sigma))
}

/// Output of the slip-rejecting contact equations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModifiedRates {
    pub body1: GeodesicRates,
    pub body2: GeodesicRates,
    /// `σ̇/σ − η σ²`; the relative speed decays at this rate when negative.
    pub contraction_rate: f64,
}

impl ModifiedRates {
    pub fn is_contracting(&self) -> bool {
        self.contraction_rate < 0.0
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() && eta > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("eta", format!("must be positive, got {eta}")))
    }
}

/// Modified rates from precomputed geometry.
pub fn modified_rates_at(
    g1: &SurfaceGeometry,
    g2: &SurfaceGeometry,
    s: &ContactState,
    sigma: f64,
    sigma_dot: f64,
    eta: f64,
) -> ModifiedRates {
    let ratio = sigma_dot / sigma;
    let body1 = geodesic_rates_at(g1, s.du1, s.dv1, ratio);
    let free = geodesic_rates_at(g2, s.du2, s.dv2, ratio);
    // body-2 rates that would roll on body 1
    let target = reflect(s.psi, frame_velocity(g1, s.du1, s.dv1));
    let gain = sigma * sigma * eta;
    let body2 = GeodesicRates {
        ddu: free.ddu + gain * (target[0] / g2.norm_u - s.du2),
        ddv: free.ddv + gain * (target[1] / g2.norm_v - s.dv2),
    };
    ModifiedRates {
        body1,
        body2,
        contraction_rate: ratio - eta * sigma * sigma,
    }
}

/// Body 1 follows its geodesic; body 2 gets the slip feedback.
pub fn modified_geodesic_rhs(
    state: &ContactState,
    chart1: &dyn Chart,
    chart2: &dyn Chart,
    sigma: f64,
    sigma_dot: f64,
    eta: f64,
) -> Result<ModifiedRates> {
    check_sigma(sigma)?;
    check_eta(eta)?;
    let (g1, g2) = pair_geometry(state, chart1, chart2)?;
    Ok(modified_rates_at(&g1, &g2, state, sigma, sigma_dot, eta))
}

/// Integrate a single time-parameterized geodesic. State is `[u, v, u̇, v̇]`.
pub fn integrate_geodesic(
    chart: &dyn Chart,
    start: [f64; 4],
    sigma: &SigmaProfile,
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<Trajectory> {
    integrate_with(
        |t, y: &[f64], dy: &mut [f64]| {
            let (s, ds) = sigma.eval(t)?;
            let g = geometry_at(chart, y[0], y[1])?;
            let r = geodesic_rates_at(&g, y[2], y[3], ds / s);
            dy[0] = y[2];
            dy[1] = y[3];
            dy[2] = r.ddu;
            dy[3] = r.ddv;
            Ok(())
        },
        |_, _| {},
        &start,
        t0,
        t1,
        step,
    )
}

/// Additive acceleration on the body-1 coordinates during `[t_start, t_end)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccelerationOffset {
    pub t_start: f64,
    pub t_end: f64,
    pub ddu: f64,
    pub ddv: f64,
}

impl AccelerationOffset {
    pub fn active(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }
}

/// Additive offset on the body-2 coordinate rates during `[t_start, t_end)`.
///
/// The offset perturbs the integrated curve itself: the body-2 coordinates
/// advance with the offset rates and the slip-rejecting term sees the
/// resulting relative velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateOffset {
    pub t_start: f64,
    pub t_end: f64,
    pub du: f64,
    pub dv: f64,
}

impl RateOffset {
    pub fn active(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }
}

/// Record of instants where the contraction condition failed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ContractionWarning {
    pub count: usize,
    pub first_t: Option<f64>,
}

/// Coupled contact-curve equations of one body pair.
///
/// With `eta = None` both bodies follow plain time-parameterized geodesics;
/// otherwise body 2 obeys the slip-rejecting modification. In both cases ψ
/// evolves with the no-spin rate [`spin_rate_at`].
pub struct PairSystem<'a> {
    pub chart1: &'a dyn Chart,
    pub chart2: &'a dyn Chart,
    pub sigma: &'a SigmaProfile,
    pub eta: Option<f64>,
    pub accel_offsets: Vec<AccelerationOffset>,
    pub rate_offsets: Vec<RateOffset>,
    pub warning: ContractionWarning,
}

/// Samples of a pair integration; `dpsi` is filled in every state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ContactState>,
}

impl<'a> PairSystem<'a> {
    pub fn new(
        chart1: &'a dyn Chart,
        chart2: &'a dyn Chart,
        sigma: &'a SigmaProfile,
        eta: Option<f64>,
    ) -> Result<Self> {
        if let Some(eta) = eta {
            check_eta(eta)?;
        }
        Ok(PairSystem {
            chart1,
            chart2,
            sigma,
            eta,
            accel_offsets: Vec::new(),
            rate_offsets: Vec::new(),
            warning: ContractionWarning::default(),
        })
    }

    pub fn with_offsets(mut self, offsets: Vec<AccelerationOffset>) -> Self {
        self.accel_offsets = offsets;
        self
    }

    pub fn with_rate_offsets(mut self, offsets: Vec<RateOffset>) -> Self {
        self.rate_offsets = offsets;
        self
    }

    /// Packed state with the active rate offsets applied to the body-2 rates.
    /// `dpsi` is left at zero.
    pub fn effective_state(&self, t: f64, y: &[f64]) -> ContactState {
        let mut st = ContactState::unpack(y);
        for d in self.rate_offsets.iter().filter(|d| d.active(t)) {
            st.du2 += d.du;
            st.dv2 += d.dv;
        }
        st
    }

    /// Right-hand side of the packed state (see [`ContactState::pack`]).
    pub fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let (s, ds) = self.sigma.eval(t)?;
        let st = self.effective_state(t, y);
        let (g1, g2) = pair_geometry(&st, self.chart1, self.chart2)?;
        let (b1, b2) = match self.eta {
            Some(eta) => {
                let m = modified_rates_at(&g1, &g2, &st, s, ds, eta);
                if !m.is_contracting() {
                    self.warning.count += 1;
                    self.warning.first_t.get_or_insert(t);
                }
                (m.body1, m.body2)
            }
            None => {
                let ratio = ds / s;
                (
                    geodesic_rates_at(&g1, st.du1, st.dv1, ratio),
                    geodesic_rates_at(&g2, st.du2, st.dv2, ratio),
                )
            }
        };
        let (mut ddu1, mut ddv1) = (b1.ddu, b1.ddv);
        for d in self.accel_offsets.iter().filter(|d| d.active(t)) {
            ddu1 += d.ddu;
            ddv1 += d.ddv;
        }
        dy[0] = st.du1;
        dy[1] = st.dv1;
        dy[2] = st.du2;
        dy[3] = st.dv2;
        dy[4] = spin_rate_at(&g1, &g2, &st);
        dy[5] = ddu1;
        dy[6] = ddv1;
        dy[7] = b2.ddu;
        dy[8] = b2.ddv;
        Ok(())
    }

    /// Integrate from `initial` over `[t0, t1]`; ψ is wrapped to `(−π, π]`
    /// after every step.
    pub fn simulate(
        &mut self,
        initial: &ContactState,
        t0: f64,
        t1: f64,
        step: f64,
    ) -> Result<PairTrajectory> {
        let tr = integrate_with(
            |t, y: &[f64], dy: &mut [f64]| self.rhs(t, y, dy),
            |_, y: &mut [f64]| y[4] = normalize_angle(y[4]),
            &initial.pack(),
            t0,
            t1,
            step,
        )?;
        let mut states = Vec::with_capacity(tr.len());
        for (t, y) in tr.times.iter().zip(&tr.states) {
            let mut st = self.effective_state(*t, y);
            let (g1, g2) = pair_geometry(&st, self.chart1, self.chart2).map_err(|e| e.at_time(*t))?;
            st.dpsi = spin_rate_at(&g1, &g2, &st);
            states.push(st);
        }
        Ok(PairTrajectory {
            times: tr.times,
            states,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{relative_acceleration, relative_velocity};
    use crate::surface::{cylinder_chart, ellipsoid_chart, sphere_chart};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn sigma_values() {
        let p = SigmaProfile::new(vec![0.001, 0.0, -0.4]).unwrap();
        assert_eq!(p.eval(0.0).unwrap(), (0.001, 0.0));
        let p = SigmaProfile::new(vec![0.1, 0.2, -0.02]).unwrap();
        let (s, ds) = p.eval(0.0).unwrap();
        assert_abs_diff_eq!(s, 0.1);
        assert_abs_diff_eq!(ds, 0.2);
        let (s, ds) = p.eval(2.0).unwrap();
        assert_abs_diff_eq!(s, -0.08 + 0.4 + 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(ds, 0.2 - 0.08, epsilon = 1e-15);
        let c = SigmaProfile::constant(0.7).unwrap();
        for t in [0.0, 1.0, -3.0, 100.0] {
            assert_eq!(c.eval(t).unwrap(), (0.7, 0.0));
        }
    }

    #[test]
    fn sigma_zero_crossing_is_singular() {
        let p = SigmaProfile::new(vec![0.001, 0.0, -0.4]).unwrap();
        assert!(matches!(p.eval(0.05), Err(Error::SingularProfile { .. })));
        assert!(SigmaProfile::new(vec![]).is_err());
        assert!(SigmaProfile::new(vec![1.0; 7]).is_err());
        assert!(SigmaProfile::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn sigma_derivative_matches_difference() {
        let p = SigmaProfile::new(vec![0.3, -1.0, 0.5, 2.0, -0.7, 0.1]).unwrap();
        for t in [-1.0, 0.0, 0.4, 1.3] {
            let h = 1e-6;
            let fd = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(p.derivative(t), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn cylinder_geodesics_are_unaccelerated() {
        let c = cylinder_chart(0.1).unwrap();
        let r = geodesic_rhs(&c, 0.3, 1.0, 0.8, -0.2, 2.0, 0.0).unwrap();
        assert_eq!(r, GeodesicRates { ddu: 0.0, ddv: 0.0 });
    }

    #[test]
    fn equator_stays_on_equator() {
        let s = sphere_chart(1.0).unwrap();
        let sigma = SigmaProfile::constant(1.0).unwrap();
        let tr = integrate_geodesic(&s, [PI / 2.0, 0.0, 0.0, 1.0], &sigma, 0.0, 1.0, 1e-3).unwrap();
        for y in &tr.states {
            assert_abs_diff_eq!(y[0], PI / 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn sphere_geodesic_is_great_circle() {
        let r = 0.1;
        let s = sphere_chart(r).unwrap();
        let sigma = SigmaProfile::constant(1.0).unwrap();
        let start = [1.1, 0.3, 0.6, 0.9];
        let tr = integrate_geodesic(&s, start, &sigma, 0.0, 1.0, 1e-4).unwrap();
        // plane through the centre spanned by start point and start tangent
        let g = geometry_at(&s, start[0], start[1]).unwrap();
        let n = g.point.cross(&g.velocity(start[2], start[3])).normalize();
        let worst = tr
            .states
            .iter()
            .map(|y| n.dot(&s.point(y[0], y[1])).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "plane distance {worst:e}");
    }

    #[test]
    fn geodesic_speed_is_constant() {
        let e = ellipsoid_chart(0.3, 0.2, 0.1).unwrap();
        let sigma = SigmaProfile::constant(1.0).unwrap();
        let tr = integrate_geodesic(&e, [1.0, 0.4, 0.5, 0.7], &sigma, 0.0, 1.0, 1e-4).unwrap();
        let speed = |y: &[f64]| geometry_at(&e, y[0], y[1]).unwrap().velocity(y[2], y[3]).norm();
        let s0 = speed(&tr.states[0]);
        for y in &tr.states {
            assert!((speed(y) - s0).abs() < 1e-8);
        }
    }

    fn sample_state() -> ContactState {
        ContactState {
            u1: 1.0,
            v1: 0.2,
            u2: 0.9,
            v2: 1.3,
            psi: 0.3,
            du1: 0.7,
            dv1: -0.4,
            du2: 0.2,
            dv2: 0.5,
            dpsi: 0.0,
        }
    }

    #[test]
    fn modified_rhs_reduces_to_geodesic_when_rolling() {
        let c1 = sphere_chart(0.04).unwrap();
        let c2 = ellipsoid_chart(0.3, 0.2, 0.1).unwrap();
        let mut st = sample_state();
        let (g1, g2) = pair_geometry(&st, &c1, &c2).unwrap();
        let w = reflect(st.psi, frame_velocity(&g1, st.du1, st.dv1));
        st.du2 = w[0] / g2.norm_u;
        st.dv2 = w[1] / g2.norm_v;
        let m = modified_geodesic_rhs(&st, &c1, &c2, 0.5, 0.1, 100.0).unwrap();
        let b1 = geodesic_rhs(&c1, st.u1, st.v1, st.du1, st.dv1, 0.5, 0.1).unwrap();
        let b2 = geodesic_rhs(&c2, st.u2, st.v2, st.du2, st.dv2, 0.5, 0.1).unwrap();
        assert_eq!(m.body1, b1);
        assert_abs_diff_eq!(m.body2.ddu, b2.ddu, epsilon = 1e-12);
        assert_abs_diff_eq!(m.body2.ddv, b2.ddv, epsilon = 1e-12);
    }

    #[test]
    fn modified_rhs_gives_contracting_relative_acceleration() {
        let c1 = sphere_chart(0.04).unwrap();
        let c2 = ellipsoid_chart(0.3, 0.2, 0.1).unwrap();
        let st = sample_state();
        let (s, ds, eta) = (0.8, 0.3, 100.0);
        let m = modified_geodesic_rhs(&st, &c1, &c2, s, ds, eta).unwrap();
        let rel = relative_acceleration(
            &st,
            [m.body1.ddu, m.body1.ddv, m.body2.ddu, m.body2.ddv],
            &c1,
            &c2,
        )
        .unwrap();
        let v = relative_velocity(&st, &c1, &c2).unwrap();
        let k = ds / s - eta * s * s;
        assert_abs_diff_eq!(m.contraction_rate, k);
        assert_abs_diff_eq!(rel.a_rel_x, k * v[0], epsilon = 1e-8);
        assert_abs_diff_eq!(rel.a_rel_y, k * v[1], epsilon = 1e-8);
        assert!(m.is_contracting());
    }

    #[test]
    fn modified_rhs_rejects_bad_eta() {
        let c = sphere_chart(0.1).unwrap();
        let st = sample_state();
        assert!(modified_geodesic_rhs(&st, &c, &c, 1.0, 0.0, 0.0).is_err());
        assert!(modified_geodesic_rhs(&st, &c, &c, 1.0, 0.0, -1.0).is_err());
        assert!(modified_geodesic_rhs(&st, &c, &c, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn contraction_violation_is_recorded() {
        let c1 = sphere_chart(0.04).unwrap();
        let c2 = sphere_chart(0.1).unwrap();
        // σ̇/σ = 2, η σ² = 1e-2: not contracting
        let sigma = SigmaProfile::new(vec![0.1, 0.2]).unwrap();
        let mut sys = PairSystem::new(&c1, &c2, &sigma, Some(1.0)).unwrap();
        sys.simulate(&sample_state(), 0.0, 0.01, 1e-3).unwrap();
        assert!(sys.warning.count > 0);
        assert_eq!(sys.warning.first_t, Some(0.0));
    }
}
