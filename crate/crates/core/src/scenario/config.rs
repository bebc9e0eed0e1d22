//! Scenario files: TOML parsing, angle expressions and eager validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::ContactParams;
use crate::error::{Error, Result};
use crate::geodesic::{SigmaProfile, SIGMA_FLOOR};
use crate::surface::{
    check_orthogonal, cylinder_chart, ellipsoid_chart, geometry_at, sphere_chart, Chart,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Finger geodesic, object on the slip-rejecting modified geodesic.
    Kinematic,
    /// Object geodesic, finger follows by rolling; checks the finger curve.
    RollingCorollary,
    /// Kinematic plan drives fingertips against a free rigid object.
    Dynamic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "chart", rename_all = "kebab-case")]
pub enum ChartSpec {
    Sphere { radius: f64 },
    Cylinder { radius: f64 },
    Ellipsoid { radii: [f64; 3] },
}

impl ChartSpec {
    pub fn build(&self) -> Result<Box<dyn Chart>> {
        Ok(match *self {
            ChartSpec::Sphere { radius } => Box::new(sphere_chart(radius)?),
            ChartSpec::Cylinder { radius } => Box::new(cylinder_chart(radius)?),
            ChartSpec::Ellipsoid { radii: [a, b, c] } => Box::new(ellipsoid_chart(a, b, c)?),
        })
    }

    pub fn sphere_radius(&self) -> Option<f64> {
        match *self {
            ChartSpec::Sphere { radius } => Some(radius),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BodySpec {
    #[serde(flatten)]
    pub chart: ChartSpec,
    pub mass: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContactSpec {
    /// Object contact coordinates.
    pub object: [f64; 2],
    /// Finger contact coordinates.
    pub finger: [f64; 2],
    pub psi: f64,
    /// Initial rates of the driving curve: finger coordinate rates, or in
    /// corollary mode the object's path-parameter rates.
    pub rates: [f64; 2],
    /// Initial relative velocity in the object contact frame.
    pub initial_slip: [f64; 2],
    /// Extra initial slip of this speed in a seeded random direction.
    pub random_slip: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceKind {
    /// Added to the finger coordinate accelerations.
    AccelerationOffset,
    /// Added to the object coordinate rates.
    RateOffset,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Disturbance {
    pub kind: DisturbanceKind,
    pub magnitude: [f64; 2],
    pub t_start: f64,
    pub t_end: f64,
    /// Zero-based contact indices.
    pub contacts: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntegratorSpec {
    pub step: f64,
    pub horizon: f64,
    pub t0: f64,
}

impl IntegratorSpec {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.horizon
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    /// Relative-velocity magnitude below which slip counts as rejected, m/s.
    pub threshold: f64,
    /// Write every `stride`-th sample to the CSV logs.
    pub stride: usize,
    /// Corollary mode skips residual samples with `|σ|` below this.
    pub min_sigma: f64,
}

pub const DEFAULT_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub mode: Mode,
    pub eta: Option<f64>,
    pub seed: u64,
    pub finger: BodySpec,
    pub object: BodySpec,
    pub contacts: Vec<ContactSpec>,
    pub sigma: SigmaProfile,
    pub disturbances: Vec<Disturbance>,
    pub integrator: IntegratorSpec,
    pub output: OutputSpec,
    pub dynamics: ContactParams,
}

/// Bundled scenarios, by name.
pub const BUILTINS: &[(&str, &str)] = &[
    ("sphere_eta100", include_str!("../../scenarios/sphere_eta100.toml")),
    ("sphere_accel_eta100", include_str!("../../scenarios/sphere_accel_eta100.toml")),
    ("ellipsoid_eta100", include_str!("../../scenarios/ellipsoid_eta100.toml")),
    ("ellipsoid_slow_sigma", include_str!("../../scenarios/ellipsoid_slow_sigma.toml")),
    ("corollary_sphere", include_str!("../../scenarios/corollary_sphere.toml")),
    ("corollary_minjerk", include_str!("../../scenarios/corollary_minjerk.toml")),
    ("corollary_cylinder_sphere", include_str!("../../scenarios/corollary_cylinder_sphere.toml")),
    ("dynamic_case1", include_str!("../../scenarios/dynamic_case1.toml")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

pub fn builtin(name: &str) -> Result<Scenario> {
    let (_, text) = BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::validation("name", format!("no bundled scenario `{name}`")))?;
    Scenario::from_toml_str(text)
}

/// Read, parse and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_toml_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        e => e,
    })
}

/// Evaluate an angle given as a number or a short expression such as
/// `"pi/6"`, `"-2*pi/3"` or `"0.5pi"`.
pub fn parse_angle(text: &str) -> Option<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let s = s.to_ascii_lowercase();
    let (sign, s) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(&s)),
    };
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().ok()?),
        None => (s, 1.0),
    };
    let value = match num.strip_suffix("pi") {
        Some(k) => {
            let k = k.strip_suffix('*').unwrap_or(k);
            let k = if k.is_empty() { 1.0 } else { k.parse::<f64>().ok()? };
            k * std::f64::consts::PI
        }
        None => num.parse::<f64>().ok()?,
    };
    let v = sign * value / den;
    v.is_finite().then_some(v)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAngle {
    Number(f64),
    Text(String),
}

impl RawAngle {
    fn resolve(&self, field: &str) -> Result<f64> {
        match self {
            RawAngle::Number(x) => Ok(*x),
            RawAngle::Text(s) => parse_angle(s)
                .ok_or_else(|| Error::validation(field, format!("cannot read angle `{s}`"))),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    description: String,
    mode: Mode,
    eta: Option<f64>,
    #[serde(default)]
    seed: u64,
    body: RawBodies,
    #[serde(rename = "contact", default)]
    contacts: Vec<RawContact>,
    sigma: RawSigma,
    #[serde(rename = "disturbance", default)]
    disturbances: Vec<RawDisturbance>,
    integrator: RawIntegrator,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    dynamics: RawDynamics,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBodies {
    finger: RawBody,
    object: RawBody,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBody {
    chart: String,
    radius: Option<f64>,
    radii: Option<[f64; 3]>,
    mass: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContact {
    object: [RawAngle; 2],
    finger: [RawAngle; 2],
    psi: RawAngle,
    finger_rates: Option<[f64; 2]>,
    object_rates: Option<[f64; 2]>,
    #[serde(default)]
    initial_slip: [f64; 2],
    #[serde(default)]
    random_slip: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSigma {
    coefficients: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisturbance {
    kind: DisturbanceKind,
    magnitude: [f64; 2],
    t_start: f64,
    t_end: f64,
    contacts: Option<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    step: f64,
    horizon: f64,
    #[serde(default)]
    t0: f64,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    threshold: Option<f64>,
    stride: Option<usize>,
    min_sigma: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDynamics {
    stiffness: Option<f64>,
    damping: Option<f64>,
    mu: Option<f64>,
    friction_gain: Option<f64>,
    preload_depth: Option<f64>,
}

fn body_spec(raw: RawBody, which: &str) -> Result<BodySpec> {
    let field = |f: &str| format!("body.{which}.{f}");
    let radius = || raw.radius.ok_or_else(|| Error::validation(field("radius"), "required"));
    let chart = match raw.chart.as_str() {
        "sphere" => ChartSpec::Sphere { radius: radius()? },
        "cylinder" => ChartSpec::Cylinder { radius: radius()? },
        "ellipsoid" => ChartSpec::Ellipsoid {
            radii: raw.radii.ok_or_else(|| Error::validation(field("radii"), "required"))?,
        },
        other => {
            return Err(Error::validation(
                field("chart"),
                format!("unknown chart `{other}` (sphere, cylinder, ellipsoid)"),
            ))
        }
    };
    if let Some(m) = raw.mass {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::validation(field("mass"), format!("must be positive, got {m}")));
        }
    }
    Ok(BodySpec { chart, mass: raw.mass })
}

impl Scenario {
    /// Parse and validate a scenario from TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let finger = body_spec(raw.body.finger, "finger")?;
        let object = body_spec(raw.body.object, "object")?;
        let mut contacts = Vec::with_capacity(raw.contacts.len());
        for (i, c) in raw.contacts.iter().enumerate() {
            let f = |name: &str| format!("contact[{i}].{name}");
            let rates = match (raw.mode, c.finger_rates, c.object_rates) {
                (Mode::RollingCorollary, None, Some(r)) => r,
                (Mode::RollingCorollary, _, _) => {
                    return Err(Error::validation(f("object_rates"), "required alone in rolling-corollary mode"))
                }
                (_, Some(r), None) => r,
                _ => return Err(Error::validation(f("finger_rates"), "required alone in this mode")),
            };
            contacts.push(ContactSpec {
                object: [c.object[0].resolve(&f("object"))?, c.object[1].resolve(&f("object"))?],
                finger: [c.finger[0].resolve(&f("finger"))?, c.finger[1].resolve(&f("finger"))?],
                psi: c.psi.resolve(&f("psi"))?,
                rates,
                initial_slip: c.initial_slip,
                random_slip: c.random_slip,
            });
        }
        let n = contacts.len();
        let disturbances = raw
            .disturbances
            .into_iter()
            .map(|d| Disturbance {
                kind: d.kind,
                magnitude: d.magnitude,
                t_start: d.t_start,
                t_end: d.t_end,
                contacts: d.contacts.unwrap_or_else(|| (0..n).collect()),
            })
            .collect();
        let sigma = SigmaProfile::new(raw.sigma.coefficients)
            .map_err(|e| Error::validation("sigma.coefficients", e.to_string()))?;
        let defaults = ContactParams::default();
        let d = raw.dynamics;
        let scenario = Scenario {
            name: raw.name,
            description: raw.description,
            mode: raw.mode,
            eta: raw.eta,
            seed: raw.seed,
            finger,
            object,
            contacts,
            sigma,
            disturbances,
            integrator: IntegratorSpec {
                step: raw.integrator.step,
                horizon: raw.integrator.horizon,
                t0: raw.integrator.t0,
            },
            output: OutputSpec {
                dir: raw.output.dir,
                threshold: raw.output.threshold.unwrap_or(DEFAULT_THRESHOLD),
                stride: raw.output.stride.unwrap_or(1),
                min_sigma: raw.output.min_sigma.unwrap_or(1e-3),
            },
            dynamics: ContactParams {
                stiffness: d.stiffness.unwrap_or(defaults.stiffness),
                damping: d.damping.unwrap_or(defaults.damping),
                mu: d.mu.unwrap_or(defaults.mu),
                friction_gain: d.friction_gain.unwrap_or(defaults.friction_gain),
                preload_depth: d.preload_depth.unwrap_or(defaults.preload_depth),
            },
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Charts of (finger, object).
    pub fn charts(&self) -> Result<(Box<dyn Chart>, Box<dyn Chart>)> {
        let finger = self
            .finger
            .chart
            .build()
            .map_err(|e| Error::validation("body.finger", e.to_string()))?;
        let object = self
            .object
            .chart
            .build()
            .map_err(|e| Error::validation("body.object", e.to_string()))?;
        Ok((finger, object))
    }

    /// Every check that does not require integrating.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::validation("name", "must not be empty"));
        }
        let it = &self.integrator;
        if !(it.step > 0.0 && it.step.is_finite()) {
            return Err(Error::validation("integrator.step", format!("must be positive, got {}", it.step)));
        }
        if !(it.horizon > 0.0 && it.horizon.is_finite()) {
            return Err(Error::validation("integrator.horizon", format!("must be positive, got {}", it.horizon)));
        }
        if it.step > it.horizon {
            return Err(Error::validation("integrator.step", "exceeds the horizon"));
        }
        if !it.t0.is_finite() {
            return Err(Error::validation("integrator.t0", "must be finite"));
        }
        let out = &self.output;
        if !(out.threshold > 0.0 && out.threshold.is_finite()) {
            return Err(Error::validation("output.threshold", "must be positive"));
        }
        if out.stride == 0 {
            return Err(Error::validation("output.stride", "must be at least 1"));
        }
        if !(out.min_sigma >= 0.0) {
            return Err(Error::validation("output.min_sigma", "must be non-negative"));
        }
        match (self.mode, self.eta) {
            (Mode::RollingCorollary, _) => {}
            (_, None) => return Err(Error::validation("eta", "required in this mode")),
            (_, Some(eta)) if !(eta > 0.0 && eta.is_finite()) => {
                return Err(Error::validation("eta", format!("must be positive, got {eta}")))
            }
            _ => {}
        }
        if self.mode != Mode::RollingCorollary {
            self.check_sigma_nonzero()?;
        }
        if self.contacts.is_empty() {
            return Err(Error::validation("contact", "at least one contact is required"));
        }

        let (finger, object) = self.charts()?;
        for (name, chart) in [("body.finger", &finger), ("body.object", &object)] {
            check_orthogonal(chart.as_ref(), 20).map_err(|e| Error::validation(name, e.to_string()))?;
        }
        for (i, c) in self.contacts.iter().enumerate() {
            for (name, chart, [u, v]) in [("object", &object, c.object), ("finger", &finger, c.finger)] {
                geometry_at(chart.as_ref(), u, v)
                    .map_err(|e| Error::validation(format!("contact[{i}].{name}"), e.to_string()))?;
            }
            let finite = c.psi.is_finite()
                && c.rates.iter().chain(&c.initial_slip).all(|x| x.is_finite())
                && c.random_slip.is_finite()
                && c.random_slip >= 0.0;
            if !finite {
                return Err(Error::validation(format!("contact[{i}]"), "non-finite or negative value"));
            }
        }

        for (k, d) in self.disturbances.iter().enumerate() {
            let f = |name: &str| format!("disturbance[{k}].{name}");
            if !(d.t_end > d.t_start) {
                return Err(Error::validation(f("t_end"), format!("must exceed t_start = {}", d.t_start)));
            }
            if !d.magnitude.iter().all(|x| x.is_finite()) {
                return Err(Error::validation(f("magnitude"), "must be finite"));
            }
            if let Some(&bad) = d.contacts.iter().find(|&&i| i >= self.contacts.len()) {
                return Err(Error::validation(f("contacts"), format!("no contact with index {bad}")));
            }
            if self.mode == Mode::RollingCorollary {
                return Err(Error::validation(f("kind"), "disturbances are not used in rolling-corollary mode"));
            }
        }

        if self.mode == Mode::Dynamic {
            if self.object.chart.sphere_radius().is_none() || self.finger.chart.sphere_radius().is_none() {
                return Err(Error::validation("body", "dynamic mode needs spherical finger and object"));
            }
            if self.object.mass.is_none() {
                return Err(Error::validation("body.object.mass", "required in dynamic mode"));
            }
            self.dynamics
                .validate()
                .map_err(|e| Error::validation("dynamics", e.to_string()))?;
            let rf = self.finger.chart.sphere_radius().unwrap_or(0.0);
            if !(rf > self.dynamics.preload_depth) {
                return Err(Error::validation("dynamics.preload_depth", "must be below the finger radius"));
            }
        }
        Ok(())
    }

    /// The slip-rejecting equations divide by σ; refuse profiles that reach
    /// zero on the simulated interval.
    fn check_sigma_nonzero(&self) -> Result<()> {
        let it = &self.integrator;
        let n = 10_000;
        let mut prev = self.sigma.value(it.t0);
        for k in 0..=n {
            let t = it.t0 + it.horizon * k as f64 / n as f64;
            let s = self.sigma.value(t);
            if s.abs() < SIGMA_FLOOR || s.signum() != prev.signum() {
                return Err(Error::validation(
                    "sigma.coefficients",
                    format!("sigma vanishes near t = {t} on the simulated interval"),
                ));
            }
            prev = s;
        }
        Ok(())
    }

    /// Indices of the disturbances acting on contact `i`.
    pub fn disturbances_for(&self, i: usize) -> impl Iterator<Item = &Disturbance> {
        self.disturbances.iter().filter(move |d| d.contacts.contains(&i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn angle_expressions() {
        assert_eq!(parse_angle("pi/6"), Some(PI / 6.0));
        assert_eq!(parse_angle("-2*pi/3"), Some(-2.0 * PI / 3.0));
        assert_eq!(parse_angle(" 2pi / 3 "), Some(2.0 * PI / 3.0));
        assert_eq!(parse_angle("pi"), Some(PI));
        assert_eq!(parse_angle("0.25"), Some(0.25));
        assert_eq!(parse_angle("-1.5/3"), Some(-0.5));
        assert_eq!(parse_angle("tau"), None);
        assert_eq!(parse_angle("pi/0"), None);
    }

    #[test]
    fn every_builtin_validates() {
        for name in builtin_names() {
            let s = builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.name, name);
        }
    }

    #[test]
    fn unknown_builtin() {
        assert!(builtin("nope").unwrap_err().is_validation());
    }
}
