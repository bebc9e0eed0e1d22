//! Parametric surface charts and the differential-geometric quantities
//! derived from them.
//!
//! Every chart used by the kinematics must be orthogonal (`f_u · f_v = 0`);
//! the Christoffel symbols below use the diagonal-metric form, where each
//! symbol is an inner product with an unnormalized partial divided by the
//! matching squared norm.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Below this `|f_u x f_v|` a chart point is treated as singular.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// Relative orthogonality tolerance, `|f_u · f_v| <= tol * |f_u| |f_v|`.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;

/// Default step of [`FiniteDifferenceChart`], in coordinate units.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Validity of one chart coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    /// Open interval `(lo, hi)`.
    Open(f64, f64),
    /// Any finite value; used for periodic or unbounded coordinates.
    Unbounded,
}

impl Bound {
    pub fn contains(&self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        match *self {
            Bound::Open(lo, hi) => x > lo && x < hi,
            Bound::Unbounded => true,
        }
    }

    /// Interval used when sampling the coordinate; one period for unbounded
    /// coordinates.
    pub fn sampling_range(&self) -> (f64, f64) {
        match *self {
            Bound::Open(lo, hi) => (lo, hi),
            Bound::Unbounded => (-PI, PI),
        }
    }
}

/// Rectangular validity box of a chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub u: Bound,
    pub v: Bound,
}

impl Domain {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        self.u.contains(u) && self.v.contains(v)
    }
}

/// First and second partial derivatives of a chart at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Partials {
    pub du: Vec3,
    pub dv: Vec3,
    pub duu: Vec3,
    pub duv: Vec3,
    pub dvv: Vec3,
}

/// A parametric surface patch `f(u, v) -> R^3`.
pub trait Chart: Send + Sync {
    fn name(&self) -> &str;

    fn domain(&self) -> Domain;

    /// Surface point. Does not check the domain.
    fn point(&self, u: f64, v: f64) -> Vec3;

    fn partials(&self, u: f64, v: f64) -> Result<Partials>;

    fn check_domain(&self, u: f64, v: f64) -> Result<()> {
        if self.domain().contains(u, v) {
            Ok(())
        } else {
            Err(Error::Domain {
                chart: self.name().to_string(),
                u,
                v,
            })
        }
    }

    fn eval(&self, u: f64, v: f64) -> Result<Vec3> {
        self.check_domain(u, v)?;
        Ok(self.point(u, v))
    }
}

impl fmt::Debug for dyn Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("name", &self.name())
            .field("domain", &self.domain())
            .finish()
    }
}

/// Christoffel symbols of the second kind, `Γ^k_ij`, named `k_ij`.
/// The mixed symbols are symmetric, `Γ^k_12 = Γ^k_21`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Christoffel {
    pub u_uu: f64,
    pub u_uv: f64,
    pub u_vv: f64,
    pub v_uu: f64,
    pub v_uv: f64,
    pub v_vv: f64,
}

impl Christoffel {
    /// The quadratic terms `(Γ^1(w, w), Γ^2(w, w))` of the geodesic equation
    /// for the coordinate rate `w = (du, dv)`.
    pub fn quadratic(&self, du: f64, dv: f64) -> (f64, f64) {
        (
            self.u_uu * du * du + 2.0 * self.u_uv * du * dv + self.u_vv * dv * dv,
            self.v_uu * du * du + 2.0 * self.v_uv * du * dv + self.v_vv * dv * dv,
        )
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.u_uu, self.u_uv, self.u_vv, self.v_uu, self.v_uv, self.v_vv]
    }
}

/// Geometry of a chart at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceGeometry {
    pub point: Vec3,
    pub partials: Partials,
    /// `|f_u|`
    pub norm_u: f64,
    /// `|f_v|`
    pub norm_v: f64,
    /// `(f_u x f_v) / |f_u x f_v|`
    pub normal: Vec3,
    pub christoffel: Christoffel,
    /// Torsion form of the normalized tangent frame, per unit arc length along
    /// the `u` and `v` directions: `(ŷ·∂x̂/∂u / |f_u|, ŷ·∂x̂/∂v / |f_v|)`.
    pub torsion: [f64; 2],
}

impl SurfaceGeometry {
    /// Unit tangent along `u`.
    pub fn x_axis(&self) -> Vec3 {
        self.partials.du / self.norm_u
    }

    /// Unit tangent along `v`.
    pub fn y_axis(&self) -> Vec3 {
        self.partials.dv / self.norm_v
    }

    /// Spin rate of the tangent frame about the normal while the coordinates
    /// move at `(du, dv)`.
    pub fn frame_spin(&self, du: f64, dv: f64) -> f64 {
        self.torsion[0] * self.norm_u * du + self.torsion[1] * self.norm_v * dv
    }

    /// Velocity of the surface point for coordinate rates `(du, dv)`.
    pub fn velocity(&self, du: f64, dv: f64) -> Vec3 {
        self.partials.du * du + self.partials.dv * dv
    }
}

/// Evaluate norms, normal, Christoffel symbols and torsion form at `(u, v)`.
pub fn geometry_at(chart: &dyn Chart, u: f64, v: f64) -> Result<SurfaceGeometry> {
    chart.check_domain(u, v)?;
    let p = chart.partials(u, v)?;
    let cross = p.du.cross(&p.dv);
    let cross_norm = cross.norm();
    if !(cross_norm >= DEGENERACY_TOLERANCE) {
        return Err(Error::DegenerateChart {
            chart: chart.name().to_string(),
            u,
            v,
            cross: cross_norm,
        });
    }
    let guu = p.du.norm_squared();
    let gvv = p.dv.norm_squared();
    let christoffel = Christoffel {
        u_uu: p.du.dot(&p.duu) / guu,
        u_uv: p.du.dot(&p.duv) / guu,
        u_vv: p.du.dot(&p.dvv) / guu,
        v_uu: p.dv.dot(&p.duu) / gvv,
        v_uv: p.dv.dot(&p.duv) / gvv,
        v_vv: p.dv.dot(&p.dvv) / gvv,
    };
    let norm_u = guu.sqrt();
    let norm_v = gvv.sqrt();
    let y_axis = p.dv / norm_v;
    let torsion = [
        y_axis.dot(&p.duu) / guu,
        y_axis.dot(&p.duv) / (norm_u * norm_v),
    ];
    Ok(SurfaceGeometry {
        point: chart.point(u, v),
        partials: p,
        norm_u,
        norm_v,
        normal: cross / cross_norm,
        christoffel,
        torsion,
    })
}

/// Largest relative `|f_u · f_v| / (|f_u| |f_v|)` over an `n x n` grid of
/// cell centres covering the chart domain. Fails if any point is singular
/// or the chart is not orthogonal within [`ORTHOGONALITY_TOLERANCE`].
pub fn check_orthogonal(chart: &dyn Chart, n: usize) -> Result<f64> {
    let (u0, u1) = chart.domain().u.sampling_range();
    let (v0, v1) = chart.domain().v.sampling_range();
    let mut worst = 0.0f64;
    for i in 0..n {
        let u = u0 + (u1 - u0) * (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let v = v0 + (v1 - v0) * (j as f64 + 0.5) / n as f64;
            let p = chart.partials(u, v)?;
            let scale = p.du.norm() * p.dv.norm();
            if scale < DEGENERACY_TOLERANCE {
                // umbilic-type singular points are excluded, not counted
                continue;
            }
            let rel = p.du.dot(&p.dv).abs() / scale;
            worst = worst.max(rel);
            if rel > ORTHOGONALITY_TOLERANCE {
                return Err(Error::invalid(
                    "chart",
                    format!(
                        "{} chart is not orthogonal at ({u}, {v}): relative f_u·f_v = {rel:e}",
                        chart.name()
                    ),
                ));
            }
        }
    }
    Ok(worst)
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive, got {value}")))
    }
}

/// `f(u, v) = r (sin u cos v, sin u sin v, cos u)`, with the poles excluded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sphere {
    radius: f64,
}

pub fn sphere_chart(radius: f64) -> Result<Sphere> {
    positive("radius", radius)?;
    Ok(Sphere { radius })
}

impl Sphere {
    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl Chart for Sphere {
    fn name(&self) -> &str {
        "sphere"
    }

    fn domain(&self) -> Domain {
        Domain {
            u: Bound::Open(0.0, PI),
            v: Bound::Unbounded,
        }
    }

    fn point(&self, u: f64, v: f64) -> Vec3 {
        let r = self.radius;
        let (su, cu) = u.sin_cos();
        let (sv, cv) = v.sin_cos();
        Vec3::new(r * su * cv, r * su * sv, r * cu)
    }

    fn partials(&self, u: f64, v: f64) -> Result<Partials> {
        self.check_domain(u, v)?;
        let r = self.radius;
        let (su, cu) = u.sin_cos();
        let (sv, cv) = v.sin_cos();
        Ok(Partials {
            du: Vec3::new(r * cu * cv, r * cu * sv, -r * su),
            dv: Vec3::new(-r * su * sv, r * su * cv, 0.0),
            duu: Vec3::new(-r * su * cv, -r * su * sv, -r * cu),
            duv: Vec3::new(-r * cu * sv, r * cu * cv, 0.0),
            dvv: Vec3::new(-r * su * cv, -r * su * sv, 0.0),
        })
    }
}

/// `f(u, v) = (r cos u, r sin u, v)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cylinder {
    radius: f64,
}

pub fn cylinder_chart(radius: f64) -> Result<Cylinder> {
    positive("radius", radius)?;
    Ok(Cylinder { radius })
}

impl Cylinder {
    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl Chart for Cylinder {
    fn name(&self) -> &str {
        "cylinder"
    }

    fn domain(&self) -> Domain {
        Domain {
            u: Bound::Unbounded,
            v: Bound::Unbounded,
        }
    }

    fn point(&self, u: f64, v: f64) -> Vec3 {
        let (su, cu) = u.sin_cos();
        Vec3::new(self.radius * cu, self.radius * su, v)
    }

    fn partials(&self, u: f64, v: f64) -> Result<Partials> {
        self.check_domain(u, v)?;
        let r = self.radius;
        let (su, cu) = u.sin_cos();
        Ok(Partials {
            du: Vec3::new(-r * su, r * cu, 0.0),
            dv: Vec3::new(0.0, 0.0, 1.0),
            duu: Vec3::new(-r * cu, -r * su, 0.0),
            duv: Vec3::zeros(),
            dvv: Vec3::zeros(),
        })
    }
}

/// Triaxial ellipsoid in curvature-line coordinates:
///
/// ```text
/// x = r1 cos u sqrt(r1² − r2² sin²v − r3² cos²v) / sqrt(r1² − r3²)
/// y = r2 sin u cos v
/// z = r3 sin v sqrt(r1² sin²u + r2² cos²u − r3²) / sqrt(r1² − r3²)
/// ```
///
/// With `r1 > r2 > r3 > 0` both radicands are bounded below by
/// `r1² − r2²` and `r2² − r3²`, so the chart is defined on all of R².
/// It is singular only at the four umbilics `sin u = 0, cos v = 0`, which
/// [`geometry_at`] reports as degenerate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipsoid {
    radii: [f64; 3],
}

pub fn ellipsoid_chart(r1: f64, r2: f64, r3: f64) -> Result<Ellipsoid> {
    positive("r1", r1)?;
    positive("r2", r2)?;
    positive("r3", r3)?;
    if !(r1 > r2 && r2 > r3) {
        return Err(Error::invalid(
            "radii",
            format!("ellipsoid chart requires r1 > r2 > r3, got ({r1}, {r2}, {r3})"),
        ));
    }
    Ok(Ellipsoid { radii: [r1, r2, r3] })
}

/// `sqrt(a(x)) / d` and its first two derivatives, given `a`, `a'`, `a''`.
fn scaled_sqrt(a: f64, da: f64, dda: f64, d: f64) -> (f64, f64, f64) {
    let s = a.sqrt();
    (
        s / d,
        da / (2.0 * s * d),
        (dda / (2.0 * s) - da * da / (4.0 * a * s)) / d,
    )
}

impl Ellipsoid {
    pub fn radii(&self) -> [f64; 3] {
        self.radii
    }

    fn denom(&self) -> f64 {
        let [r1, _, r3] = self.radii;
        (r1 * r1 - r3 * r3).sqrt()
    }

    /// Factor of `x` depending on `v`, with derivatives.
    fn g(&self, v: f64) -> (f64, f64, f64) {
        let [r1, r2, r3] = self.radii;
        let (sv, cv) = v.sin_cos();
        let k = r2 * r2 - r3 * r3;
        let a = r1 * r1 - r2 * r2 * sv * sv - r3 * r3 * cv * cv;
        scaled_sqrt(a, -k * (2.0 * v).sin(), -2.0 * k * (2.0 * v).cos(), self.denom())
    }

    /// Factor of `z` depending on `u`, with derivatives.
    fn h(&self, u: f64) -> (f64, f64, f64) {
        let [r1, r2, r3] = self.radii;
        let (su, cu) = u.sin_cos();
        let k = r1 * r1 - r2 * r2;
        let b = r1 * r1 * su * su + r2 * r2 * cu * cu - r3 * r3;
        scaled_sqrt(b, k * (2.0 * u).sin(), 2.0 * k * (2.0 * u).cos(), self.denom())
    }
}

impl Chart for Ellipsoid {
    fn name(&self) -> &str {
        "ellipsoid"
    }

    fn domain(&self) -> Domain {
        Domain {
            u: Bound::Unbounded,
            v: Bound::Unbounded,
        }
    }

    fn point(&self, u: f64, v: f64) -> Vec3 {
        let [r1, r2, r3] = self.radii;
        let (g, _, _) = self.g(v);
        let (h, _, _) = self.h(u);
        Vec3::new(r1 * u.cos() * g, r2 * u.sin() * v.cos(), r3 * v.sin() * h)
    }

    fn partials(&self, u: f64, v: f64) -> Result<Partials> {
        self.check_domain(u, v)?;
        let [r1, r2, r3] = self.radii;
        let (su, cu) = u.sin_cos();
        let (sv, cv) = v.sin_cos();
        let (g, dg, ddg) = self.g(v);
        let (h, dh, ddh) = self.h(u);
        Ok(Partials {
            du: Vec3::new(-r1 * su * g, r2 * cu * cv, r3 * sv * dh),
            dv: Vec3::new(r1 * cu * dg, -r2 * su * sv, r3 * cv * h),
            duu: Vec3::new(-r1 * cu * g, -r2 * su * cv, r3 * sv * ddh),
            duv: Vec3::new(-r1 * su * dg, -r2 * cu * sv, r3 * cv * dh),
            dvv: Vec3::new(r1 * cu * ddg, -r2 * su * cv, -r3 * sv * h),
        })
    }
}

/// Chart whose derivatives come from central differences of a point map.
/// Lets callers supply surfaces without hand-derived partials.
pub struct FiniteDifferenceChart<F> {
    name: String,
    eval: F,
    step: f64,
    domain: Domain,
}

pub fn finite_difference_chart<F>(
    name: impl Into<String>,
    eval: F,
    domain: Domain,
    step: f64,
) -> Result<FiniteDifferenceChart<F>>
where
    F: Fn(f64, f64) -> Vec3 + Send + Sync,
{
    positive("step", step)?;
    Ok(FiniteDifferenceChart {
        name: name.into(),
        eval,
        step,
        domain,
    })
}

impl<F> FiniteDifferenceChart<F> {
    pub fn step(&self) -> f64 {
        self.step
    }
}

impl<F> Chart for FiniteDifferenceChart<F>
where
    F: Fn(f64, f64) -> Vec3 + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn point(&self, u: f64, v: f64) -> Vec3 {
        (self.eval)(u, v)
    }

    fn partials(&self, u: f64, v: f64) -> Result<Partials> {
        let h = self.step;
        // every stencil point has to be inside the domain
        for (du, dv) in [(-h, -h), (-h, h), (h, -h), (h, h)] {
            if !self.domain.contains(u + du, v + dv) {
                return Err(Error::Domain {
                    chart: self.name.clone(),
                    u,
                    v,
                });
            }
        }
        let f = &self.eval;
        let c = f(u, v);
        let (up, um) = (f(u + h, v), f(u - h, v));
        let (vp, vm) = (f(u, v + h), f(u, v - h));
        let (pp, pm) = (f(u + h, v + h), f(u + h, v - h));
        let (mp, mm) = (f(u - h, v + h), f(u - h, v - h));
        Ok(Partials {
            du: (up - um) / (2.0 * h),
            dv: (vp - vm) / (2.0 * h),
            duu: (up - 2.0 * c + um) / (h * h),
            duv: (pp - pm - mp + mm) / (4.0 * h * h),
            dvv: (vp - 2.0 * c + vm) / (h * h),
        })
    }
}
