//! Rolling constraint evolution and the geodesic corollary check: if two
//! bodies roll without slip or spin and body 1 traces a geodesic, body 2
//! traces one too.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::contact::{frame_velocity, normalize_angle, reflect, ContactState};
use crate::error::{Error, Result};
use crate::geodesic::{PairTrajectory, SigmaProfile};
use crate::ode::integrate_with;
use crate::surface::{geometry_at, Chart, SurfaceGeometry, Vec3};

/// Body-2 coordinate rates and spin rate induced by the body-1 rates when
/// the contact rolls.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RollingEvolution {
    pub du2: f64,
    pub dv2: f64,
    pub dpsi: f64,
}

pub fn rolling_rates_at(
    g1: &SurfaceGeometry,
    g2: &SurfaceGeometry,
    psi: f64,
    du1: f64,
    dv1: f64,
) -> RollingEvolution {
    let w = reflect(psi, frame_velocity(g1, du1, dv1));
    let du2 = w[0] / g2.norm_u;
    let dv2 = w[1] / g2.norm_v;
    RollingEvolution {
        du2,
        dv2,
        dpsi: g1.frame_spin(du1, dv1) + g2.frame_spin(du2, dv2),
    }
}

/// Solve `v_rel = 0` for the body-2 rates and evaluate the no-spin ψ̇.
/// Only the body-1 rates of `state` are read.
pub fn rolling_rates(state: &ContactState, chart1: &dyn Chart, chart2: &dyn Chart) -> Result<RollingEvolution> {
    let g1 = geometry_at(chart1, state.u1, state.v1)?;
    let g2 = geometry_at(chart2, state.u2, state.v2)?;
    Ok(rolling_rates_at(&g1, &g2, state.psi, state.du1, state.dv1))
}

/// Initial condition of a rolling run: body 1 starts on a geodesic with
/// path-parameter rates `(du1_ds, dv1_ds)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RollingStart {
    pub u1: f64,
    pub v1: f64,
    pub du1_ds: f64,
    pub dv1_ds: f64,
    pub u2: f64,
    pub v2: f64,
    pub psi: f64,
}

/// Body 1 follows a geodesic traversed at speed `σ(t)`, body 2 follows by
/// rolling.
///
/// Body 1 is integrated in path form (`α' = σ p`, `p' = −σ Γ(p, p)`), which
/// is the time-parameterized geodesic but stays regular where `σ = 0`, as it
/// does at the ends of a rest-to-rest profile.
pub fn integrate_rolling(
    chart1: &dyn Chart,
    chart2: &dyn Chart,
    start: &RollingStart,
    sigma: &SigmaProfile,
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<PairTrajectory> {
    let y0 = [
        start.u1,
        start.v1,
        start.du1_ds,
        start.dv1_ds,
        start.u2,
        start.v2,
        start.psi,
    ];
    let eval = |t: f64, y: &[f64]| -> Result<(ContactState, RollingEvolution, [f64; 2])> {
        let s = sigma.value(t);
        let g1 = geometry_at(chart1, y[0], y[1])?;
        let g2 = geometry_at(chart2, y[4], y[5])?;
        let (du1, dv1) = (s * y[2], s * y[3]);
        let roll = rolling_rates_at(&g1, &g2, y[6], du1, dv1);
        let (qu, qv) = g1.christoffel.quadratic(y[2], y[3]);
        let st = ContactState {
            u1: y[0],
            v1: y[1],
            u2: y[4],
            v2: y[5],
            psi: y[6],
            du1,
            dv1,
            du2: roll.du2,
            dv2: roll.dv2,
            dpsi: roll.dpsi,
        };
        Ok((st, roll, [-s * qu, -s * qv]))
    };
    let tr = integrate_with(
        |t, y: &[f64], dy: &mut [f64]| {
            let (st, roll, dp) = eval(t, y)?;
            dy[0] = st.du1;
            dy[1] = st.dv1;
            dy[2] = dp[0];
            dy[3] = dp[1];
            dy[4] = roll.du2;
            dy[5] = roll.dv2;
            dy[6] = roll.dpsi;
            Ok(())
        },
        |_, y: &mut [f64]| y[6] = normalize_angle(y[6]),
        &y0,
        t0,
        t1,
        step,
    )?;
    let mut states = Vec::with_capacity(tr.len());
    for (t, y) in tr.times.iter().zip(&tr.states) {
        states.push(eval(*t, y).map_err(|e| e.at_time(*t))?.0);
    }
    Ok(PairTrajectory {
        times: tr.times,
        states,
    })
}

/// One sample of a contact curve: time, coordinates and coordinate rates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CurveSample {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub du: f64,
    pub dv: f64,
}

impl PairTrajectory {
    pub fn body1_samples(&self) -> Vec<CurveSample> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| CurveSample { t, u: s.u1, v: s.v1, du: s.du1, dv: s.dv1 })
            .collect()
    }

    pub fn body2_samples(&self) -> Vec<CurveSample> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| CurveSample { t, u: s.u2, v: s.v2, du: s.du2, dv: s.dv2 })
            .collect()
    }
}

/// Second-order accurate derivative of sampled values on a possibly
/// non-uniform grid. Needs at least three samples.
pub fn sampled_derivative(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let n = times.len();
    if n < 3 || values.len() != n {
        return Err(Error::TooFewSamples { len: n.min(values.len()), min: 3 });
    }
    let three_point = |i0: usize, at: usize| {
        let (t0, t1, t2) = (times[i0], times[i0 + 1], times[i0 + 2]);
        let (f0, f1, f2) = (values[i0], values[i0 + 1], values[i0 + 2]);
        // derivative of the interpolating parabola at times[at]
        let x = times[at];
        f0 * (2.0 * x - t1 - t2) / ((t0 - t1) * (t0 - t2))
            + f1 * (2.0 * x - t0 - t2) / ((t1 - t0) * (t1 - t2))
            + f2 * (2.0 * x - t0 - t1) / ((t2 - t0) * (t2 - t1))
    };
    Ok((0..n)
        .map(|i| match i {
            0 => three_point(0, 0),
            i if i == n - 1 => three_point(n - 3, n - 1),
            i => three_point(i - 1, i),
        })
        .collect())
}

/// Left-hand sides of the time-parameterized geodesic equations,
/// `(α̈ − (σ̇/σ) α̇ + Γ(α̇, α̇)) / σ²`, at one sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GeodesicResidual {
    pub rho_u: f64,
    pub rho_v: f64,
}

impl GeodesicResidual {
    pub fn max_abs(&self) -> f64 {
        self.rho_u.abs().max(self.rho_v.abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorollaryReport {
    /// `None` where `|σ|` was below the evaluation floor.
    pub residuals: Vec<Option<GeodesicResidual>>,
    pub max_residual: f64,
}

/// Evaluate the geodesic residual along a sampled curve. Accelerations come
/// from differences of the stored rates, independent of how the curve was
/// generated. Samples with `|σ| < min_sigma` are skipped.
pub fn corollary_check(
    chart: &dyn Chart,
    samples: &[CurveSample],
    sigma: &SigmaProfile,
    min_sigma: f64,
) -> Result<CorollaryReport> {
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let ddu = sampled_derivative(&times, &samples.iter().map(|s| s.du).collect::<Vec<_>>())?;
    let ddv = sampled_derivative(&times, &samples.iter().map(|s| s.dv).collect::<Vec<_>>())?;
    let mut max_residual = 0.0f64;
    let mut residuals = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let sg = sigma.value(s.t);
        if sg.abs() < min_sigma.max(crate::geodesic::SIGMA_FLOOR) {
            residuals.push(None);
            continue;
        }
        let ratio = sigma.derivative(s.t) / sg;
        let g = geometry_at(chart, s.u, s.v)?;
        let (qu, qv) = g.christoffel.quadratic(s.du, s.dv);
        let r = GeodesicResidual {
            rho_u: (ddu[i] - ratio * s.du + qu) / (sg * sg),
            rho_v: (ddv[i] - ratio * s.dv + qv) / (sg * sg),
        };
        max_residual = max_residual.max(r.max_abs());
        residuals.push(Some(r));
    }
    Ok(CorollaryReport {
        residuals,
        max_residual,
    })
}

/// Signed geodesic curvature of a sampled curve, measured against the
/// chart's own normal: `n · (r' × r'') / |r'|³`.
pub fn geodesic_curvature(chart: &dyn Chart, samples: &[CurveSample]) -> Result<Vec<f64>> {
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let ddu = sampled_derivative(&times, &samples.iter().map(|s| s.du).collect::<Vec<_>>())?;
    let ddv = sampled_derivative(&times, &samples.iter().map(|s| s.dv).collect::<Vec<_>>())?;
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let g = geometry_at(chart, s.u, s.v)?;
            let p = &g.partials;
            let vel = p.du * s.du + p.dv * s.dv;
            let speed = vel.norm();
            if !(speed > 1e-14) {
                return Err(Error::ZeroSpeed { index: i });
            }
            let acc = p.duu * (s.du * s.du)
                + p.duv * (2.0 * s.du * s.dv)
                + p.dvv * (s.dv * s.dv)
                + p.du * ddu[i]
                + p.dv * ddv[i];
            Ok(g.normal.dot(&vel.cross(&acc)) / speed.powi(3))
        })
        .collect()
}

/// Per-sample `|κ₁ − κ₂|` for the two contact curves of a rolling pair, with
/// both curvatures measured against body 1's outward normal. Body 2's normal
/// is opposite at the contact, so `κ₂` flips sign relative to
/// [`geodesic_curvature`].
pub fn contact_curvature_mismatch(
    chart1: &dyn Chart,
    chart2: &dyn Chart,
    trajectory: &PairTrajectory,
) -> Result<Vec<f64>> {
    let k1 = geodesic_curvature(chart1, &trajectory.body1_samples())?;
    let k2 = geodesic_curvature(chart2, &trajectory.body2_samples())?;
    Ok(k1.iter().zip(&k2).map(|(a, b)| (a + b).abs()).collect())
}

/// Largest distance of `points` from the best-fit plane through `center`.
/// Zero for points on a great circle of a sphere centred at `center`.
pub fn plane_deviation(points: &[Vec3], center: &Vec3) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p - center;
        scatter += d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &l)| if l < best.1 { (i, l) } else { best });
    let normal = eig.eigenvectors.column(k).into_owned();
    points
        .iter()
        .map(|p| normal.dot(&(p - center)).abs())
        .fold(0.0, f64::max)
}
