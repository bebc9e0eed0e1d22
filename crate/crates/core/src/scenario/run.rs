//! Scenario execution and summary metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{ContactSpec, DisturbanceKind, Mode, Scenario};
use crate::contact::{relative_velocity, ContactState};
use crate::dynamics::{self, ContactForceRecord, FingerDrive, RigidBodyState, World};
use crate::error::{Error, Result};
use crate::geodesic::{AccelerationOffset, PairSystem, PairTrajectory, RateOffset};
use crate::rolling::{
    contact_curvature_mismatch, corollary_check, integrate_rolling, plane_deviation, rolling_rates,
    RollingStart,
};
use crate::surface::{geometry_at, Chart};

/// One logged instant of one contact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub state: ContactState,
    pub v_rel: [f64; 2],
    pub force: Option<ContactForceRecord>,
}

impl LogRow {
    pub fn slip_speed(&self) -> f64 {
        self.v_rel[0].hypot(self.v_rel[1])
    }
}

/// Time series of every contact of a run. In rolling-corollary mode body 1
/// is the object; otherwise body 1 is the finger.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub mode: Mode,
    pub contacts: Vec<Vec<LogRow>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ForceMetrics {
    pub max_normal_force: f64,
    pub min_normal_force: f64,
    pub max_tangential_force: f64,
    pub saturated_samples: usize,
    /// Largest `|‖f_t‖ − μ f_N|` over saturated samples.
    pub saturation_error: Option<f64>,
    pub cone_violations: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CorollaryMetrics {
    pub max_geodesic_residual: f64,
    /// Largest distance of the finger contact curve from its best-fit plane
    /// through the finger centre; spherical fingers only.
    pub max_plane_deviation: Option<f64>,
    pub max_curvature_mismatch: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ContactMetrics {
    pub index: usize,
    pub max_v_rel: f64,
    /// Disturbance window acting on this contact, if any.
    pub disturbance: Option<[f64; 2]>,
    pub max_v_rel_disturbance: Option<f64>,
    /// Rejection is measured from here: the end of the disturbance window,
    /// or the start of the run.
    pub reference_time: f64,
    /// First instant from which `‖v_rel‖` stays below the threshold.
    pub rejection_instant: Option<f64>,
    pub rejection_time: Option<f64>,
    /// Time after the reference until `‖v_rel‖` stays below 1% of its peak
    /// (peak over the disturbance window, or the initial value).
    pub relative_rejection_time: Option<f64>,
    pub forces: Option<ForceMetrics>,
    pub corollary: Option<CorollaryMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryMetrics {
    pub scenario: String,
    pub mode: Mode,
    pub threshold: f64,
    pub step: f64,
    pub seed: u64,
    pub samples: usize,
    pub contraction_warnings: usize,
    pub first_contraction_warning: Option<f64>,
    /// Largest rejection time over the contacts; `None` if any contact
    /// never settles below the threshold.
    pub max_rejection_time: Option<f64>,
    pub contacts: Vec<ContactMetrics>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub log: TrajectoryLog,
    pub summary: SummaryMetrics,
}

/// Relative level for [`ContactMetrics::relative_rejection_time`].
pub const RELATIVE_REJECTION_LEVEL: f64 = 0.01;

/// Initial slip of every contact, including the seeded random part.
pub fn initial_slips(scenario: &Scenario) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    scenario
        .contacts
        .iter()
        .map(|c| {
            let theta: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            [
                c.initial_slip[0] + c.random_slip * theta.cos(),
                c.initial_slip[1] + c.random_slip * theta.sin(),
            ]
        })
        .collect()
}

/// Initial contact state with finger as body 1: the object rates are the
/// rolling rates less the requested slip.
pub fn initial_state(
    c: &ContactSpec,
    slip: [f64; 2],
    finger: &dyn Chart,
    object: &dyn Chart,
) -> Result<ContactState> {
    let mut st = ContactState {
        u1: c.finger[0],
        v1: c.finger[1],
        u2: c.object[0],
        v2: c.object[1],
        psi: c.psi,
        du1: c.rates[0],
        dv1: c.rates[1],
        ..Default::default()
    };
    let roll = rolling_rates(&st, finger, object)?;
    let g2 = geometry_at(object, st.u2, st.v2)?;
    st.du2 = roll.du2 - slip[0] / g2.norm_u;
    st.dv2 = roll.dv2 - slip[1] / g2.norm_v;
    st.dpsi = roll.dpsi;
    Ok(st)
}

fn offsets_for(scenario: &Scenario, i: usize) -> (Vec<AccelerationOffset>, Vec<RateOffset>) {
    let mut acc = Vec::new();
    let mut rate = Vec::new();
    for d in scenario.disturbances_for(i) {
        match d.kind {
            DisturbanceKind::AccelerationOffset => acc.push(AccelerationOffset {
                t_start: d.t_start,
                t_end: d.t_end,
                ddu: d.magnitude[0],
                ddv: d.magnitude[1],
            }),
            DisturbanceKind::RateOffset => rate.push(RateOffset {
                t_start: d.t_start,
                t_end: d.t_end,
                du: d.magnitude[0],
                dv: d.magnitude[1],
            }),
        }
    }
    (acc, rate)
}

fn rows_from(tr: &PairTrajectory, chart1: &dyn Chart, chart2: &dyn Chart) -> Result<Vec<LogRow>> {
    tr.times
        .iter()
        .zip(&tr.states)
        .map(|(&t, st)| {
            Ok(LogRow {
                t,
                state: *st,
                v_rel: relative_velocity(st, chart1, chart2).map_err(|e| e.at_time(t))?,
                force: None,
            })
        })
        .collect()
}

struct Partial {
    contacts: Vec<Vec<LogRow>>,
    corollary: Vec<Option<CorollaryMetrics>>,
    warnings: (usize, Option<f64>),
}

fn merge_warning(acc: &mut (usize, Option<f64>), count: usize, first: Option<f64>) {
    acc.0 += count;
    acc.1 = match (acc.1, first) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
}

fn run_kinematic(s: &Scenario, finger: &dyn Chart, object: &dyn Chart) -> Result<Partial> {
    let it = &s.integrator;
    let slips = initial_slips(s);
    let mut out = Partial {
        contacts: Vec::new(),
        corollary: vec![None; s.contacts.len()],
        warnings: (0, None),
    };
    for (i, c) in s.contacts.iter().enumerate() {
        let ctx = |e: Error| e.context(format!("scenario `{}`, contact {i}", s.name));
        let init = initial_state(c, slips[i], finger, object).map_err(ctx)?;
        let (acc, rate) = offsets_for(s, i);
        let mut sys = PairSystem::new(finger, object, &s.sigma, s.eta)
            .map_err(ctx)?
            .with_offsets(acc)
            .with_rate_offsets(rate);
        let tr = sys.simulate(&init, it.t0, it.t_end(), it.step).map_err(ctx)?;
        merge_warning(&mut out.warnings, sys.warning.count, sys.warning.first_t);
        out.contacts.push(rows_from(&tr, finger, object).map_err(ctx)?);
    }
    Ok(out)
}

fn run_corollary(s: &Scenario, finger: &dyn Chart, object: &dyn Chart) -> Result<Partial> {
    let it = &s.integrator;
    let mut out = Partial {
        contacts: Vec::new(),
        corollary: Vec::new(),
        warnings: (0, None),
    };
    for (i, c) in s.contacts.iter().enumerate() {
        let ctx = |e: Error| e.context(format!("scenario `{}`, contact {i}", s.name));
        let start = RollingStart {
            u1: c.object[0],
            v1: c.object[1],
            du1_ds: c.rates[0],
            dv1_ds: c.rates[1],
            u2: c.finger[0],
            v2: c.finger[1],
            psi: c.psi,
        };
        let tr = integrate_rolling(object, finger, &start, &s.sigma, it.t0, it.t_end(), it.step)
            .map_err(ctx)?;
        out.corollary.push(Some(corollary_metrics(s, &tr, finger, object).map_err(ctx)?));
        out.contacts.push(rows_from(&tr, object, finger).map_err(ctx)?);
    }
    Ok(out)
}

/// Corollary diagnostics on the samples where `|σ| ≥ min_sigma`; body 1 is
/// the object.
fn corollary_metrics(
    s: &Scenario,
    tr: &PairTrajectory,
    finger: &dyn Chart,
    object: &dyn Chart,
) -> Result<CorollaryMetrics> {
    let report = corollary_check(finger, &tr.body2_samples(), &s.sigma, s.output.min_sigma)?;
    let max_plane_deviation = s.finger.chart.sphere_radius().map(|_| {
        let pts: Vec<_> = tr.states.iter().map(|st| finger.point(st.u2, st.v2)).collect();
        plane_deviation(&pts, &crate::surface::Vec3::zeros())
    });
    let keep: Vec<usize> = (0..tr.times.len())
        .filter(|&k| s.sigma.value(tr.times[k]).abs() >= s.output.min_sigma.max(1e-12))
        .collect();
    let moving = PairTrajectory {
        times: keep.iter().map(|&k| tr.times[k]).collect(),
        states: keep.iter().map(|&k| tr.states[k]).collect(),
    };
    let max_curvature_mismatch = contact_curvature_mismatch(object, finger, &moving)?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(CorollaryMetrics {
        max_geodesic_residual: report.max_residual,
        max_plane_deviation,
        max_curvature_mismatch,
    })
}

fn run_dynamic(s: &Scenario, finger: &dyn Chart, object: &dyn Chart) -> Result<Partial> {
    let it = &s.integrator;
    let ctx = |e: Error| e.context(format!("scenario `{}`", s.name));
    let slips = initial_slips(s);
    let ro = s.object.chart.sphere_radius().ok_or_else(|| Error::validation("body.object", "sphere required"))?;
    let rf = s.finger.chart.sphere_radius().ok_or_else(|| Error::validation("body.finger", "sphere required"))?;
    let mass = s.object.mass.ok_or_else(|| Error::validation("body.object.mass", "required"))?;
    let mut drives = Vec::with_capacity(s.contacts.len());
    for (i, c) in s.contacts.iter().enumerate() {
        let init = initial_state(c, slips[i], finger, object).map_err(ctx)?;
        let (acc, rate) = offsets_for(s, i);
        let plan = PairSystem::new(finger, object, &s.sigma, s.eta)
            .map_err(ctx)?
            .with_offsets(acc)
            .with_rate_offsets(rate);
        drives.push((FingerDrive { plan, finger_radius: rf }, init));
    }
    let body = RigidBodyState::solid_sphere(mass, ro).map_err(ctx)?;
    let mut world = World::new(body, ro, drives, s.dynamics, it.t0).map_err(ctx)?;
    let log = dynamics::simulate(&mut world, it.t_end(), it.step).map_err(ctx)?;
    let contacts = log
        .contacts
        .iter()
        .map(|samples| {
            log.times
                .iter()
                .zip(samples)
                .map(|(&t, c)| LogRow {
                    t,
                    state: c.state,
                    v_rel: c.v_rel,
                    force: Some(c.force),
                })
                .collect()
        })
        .collect();
    let (count, first) = world.contraction_warnings();
    Ok(Partial {
        contacts,
        corollary: vec![None; s.contacts.len()],
        warnings: (count, first),
    })
}

/// Last index `k` from which every later sample is strictly below `level`,
/// searching only samples with `t ≥ from`.
fn settle_time(rows: &[LogRow], from: f64, level: f64) -> Option<f64> {
    let first = rows.iter().position(|r| r.t >= from)?;
    let tail = &rows[first..];
    match tail.iter().rposition(|r| !(r.slip_speed() < level)) {
        None => Some(tail[0].t),
        Some(k) if k + 1 < tail.len() => Some(tail[k + 1].t),
        Some(_) => None,
    }
}

fn force_metrics(rows: &[LogRow], mu: f64) -> Option<ForceMetrics> {
    let mut m = ForceMetrics {
        min_normal_force: f64::INFINITY,
        ..Default::default()
    };
    let mut any = false;
    for f in rows.iter().filter_map(|r| r.force) {
        any = true;
        let ft = f.tangential_norm();
        m.max_normal_force = m.max_normal_force.max(f.f_n);
        m.min_normal_force = m.min_normal_force.min(f.f_n);
        m.max_tangential_force = m.max_tangential_force.max(ft);
        if ft > mu * f.f_n + 1e-9 {
            m.cone_violations += 1;
        }
        if f.saturated {
            m.saturated_samples += 1;
            let err = (ft - mu * f.f_n).abs();
            m.saturation_error = Some(m.saturation_error.map_or(err, |e: f64| e.max(err)));
        }
    }
    any.then_some(m)
}

fn contact_metrics(s: &Scenario, i: usize, rows: &[LogRow], corollary: Option<CorollaryMetrics>) -> ContactMetrics {
    let window = s.disturbances_for(i).fold(None, |w: Option<[f64; 2]>, d| {
        Some(match w {
            None => [d.t_start, d.t_end],
            Some([a, b]) => [a.min(d.t_start), b.max(d.t_end)],
        })
    });
    let reference_time = window.map_or(s.integrator.t0, |w| w[1]);
    let max_in = |lo: f64, hi: f64| {
        rows.iter()
            .filter(|r| r.t >= lo && r.t <= hi)
            .map(LogRow::slip_speed)
            .fold(0.0, f64::max)
    };
    let max_v_rel_disturbance = window.map(|[a, b]| max_in(a, b));
    let peak = max_v_rel_disturbance.unwrap_or_else(|| rows.first().map_or(0.0, LogRow::slip_speed));
    let rejection_instant = settle_time(rows, reference_time, s.output.threshold);
    let relative_rejection_time = (peak > 0.0)
        .then(|| settle_time(rows, reference_time, RELATIVE_REJECTION_LEVEL * peak))
        .flatten()
        .map(|t| t - reference_time);
    ContactMetrics {
        index: i,
        max_v_rel: rows.iter().map(LogRow::slip_speed).fold(0.0, f64::max),
        disturbance: window,
        max_v_rel_disturbance,
        reference_time,
        rejection_instant,
        rejection_time: rejection_instant.map(|t| t - reference_time),
        relative_rejection_time,
        forces: force_metrics(rows, s.dynamics.mu),
        corollary,
    }
}

/// Execute a validated scenario.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    scenario.validate()?;
    let (finger, object) = scenario.charts()?;
    let (finger, object) = (finger.as_ref(), object.as_ref());
    let partial = match scenario.mode {
        Mode::Kinematic => run_kinematic(scenario, finger, object)?,
        Mode::RollingCorollary => run_corollary(scenario, finger, object)?,
        Mode::Dynamic => run_dynamic(scenario, finger, object)?,
    };
    let contacts: Vec<ContactMetrics> = partial
        .contacts
        .iter()
        .zip(partial.corollary)
        .enumerate()
        .map(|(i, (rows, cor))| contact_metrics(scenario, i, rows, cor))
        .collect();
    let max_rejection_time = contacts
        .iter()
        .map(|c| c.rejection_time)
        .try_fold(0.0f64, |acc, t| t.map(|t| acc.max(t)));
    let summary = SummaryMetrics {
        scenario: scenario.name.clone(),
        mode: scenario.mode,
        threshold: scenario.output.threshold,
        step: scenario.integrator.step,
        seed: scenario.seed,
        samples: partial.contacts.first().map_or(0, Vec::len),
        contraction_warnings: partial.warnings.0,
        first_contraction_warning: partial.warnings.1,
        max_rejection_time,
        contacts,
    };
    Ok(RunOutput {
        log: TrajectoryLog {
            mode: scenario.mode,
            contacts: partial.contacts,
        },
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, v: f64) -> LogRow {
        LogRow {
            t,
            state: ContactState::default(),
            v_rel: [v, 0.0],
            force: None,
        }
    }

    #[test]
    fn settle_time_rules() {
        let rows: Vec<LogRow> = [(0.0, 1.0), (0.1, 0.5), (0.2, 1e-4), (0.3, 2e-3), (0.4, 1e-4), (0.5, 0.0)]
            .iter()
            .map(|&(t, v)| row(t, v))
            .collect();
        assert_eq!(settle_time(&rows, 0.0, 1e-3), Some(0.4));
        assert_eq!(settle_time(&rows, 0.45, 1e-3), Some(0.5));
        assert_eq!(settle_time(&rows, 0.0, 10.0), Some(0.0));
        let mut bad = rows.clone();
        bad.last_mut().unwrap().v_rel = [1.0, 0.0];
        assert_eq!(settle_time(&bad, 0.0, 1e-3), None);
        assert_eq!(settle_time(&rows, 0.9, 1e-3), None);
    }
}
