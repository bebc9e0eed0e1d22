//! Fixed-step classical fourth-order Runge-Kutta integration.

use crate::error::{Error, Result};

/// Sampled solution, one row per step including the initial state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.last()?, self.states.last()?.as_slice()))
    }
}

/// Number of steps of size close to `step` that exactly cover `[t0, t1]`.
pub fn step_count(t0: f64, t1: f64, step: f64) -> Result<usize> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("step", format!("must be positive, got {step}")));
    }
    if !(t1 > t0) {
        return Err(Error::invalid("t1", format!("must exceed t0 = {t0}, got {t1}")));
    }
    let n = (t1 - t0) / step;
    let rounded = n.round();
    let count = if (n - rounded).abs() < 1e-9 * n.max(1.0) {
        rounded
    } else {
        n.ceil()
    };
    Ok(count.max(1.0) as usize)
}

/// Workspace for repeated RK4 steps of a fixed dimension.
#[derive(Clone, Debug)]
pub struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
        }
    }

    /// Advance `y` in place from `t` to `t + h`.
    pub fn step<F>(&mut self, rhs: &mut F, t: f64, y: &mut [f64], h: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let n = y.len();
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;

        rhs(t, y, k1)?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, tmp, k2)?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, tmp, k3)?;
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        rhs(t + h, tmp, k4)?;
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(())
    }
}

/// Integrate `y' = rhs(t, y)` over `[t0, t1]`.
pub fn integrate<F>(rhs: F, y0: &[f64], t0: f64, t1: f64, step: f64) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    integrate_with(rhs, |_, _| {}, y0, t0, t1, step)
}

/// Like [`integrate`], calling `post_step(t, y)` after every accepted step
/// (for example to wrap angles).
pub fn integrate_with<F, P>(
    mut rhs: F,
    mut post_step: P,
    y0: &[f64],
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    P: FnMut(f64, &mut [f64]),
{
    let n = step_count(t0, t1, step)?;
    let h = (t1 - t0) / n as f64;
    if y0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { t: t0 });
    }
    let mut rk = Rk4::new(y0.len());
    let mut y = y0.to_vec();
    let mut out = Trajectory {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
    };
    out.times.push(t0);
    out.states.push(y.clone());
    for i in 0..n {
        let t = t0 + i as f64 * h;
        rk.step(&mut rhs, t, &mut y, h).map_err(|e| e.at_time(t))?;
        let t_next = t0 + (i + 1) as f64 * h;
        post_step(t_next, &mut y);
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { t: t_next });
        }
        out.times.push(t_next);
        out.states.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_rhs_keeps_state() {
        let tr = integrate(
            |_, _, dy: &mut [f64]| {
                dy.fill(0.0);
                Ok(())
            },
            &[1.0, -2.0, 3.5],
            0.0,
            1.0,
            0.1,
        )
        .unwrap();
        assert_eq!(tr.len(), 11);
        for s in &tr.states {
            assert_eq!(s, &vec![1.0, -2.0, 3.5]);
        }
        assert_abs_diff_eq!(tr.times[10], 1.0);
    }

    #[test]
    fn exponential_decay_is_fourth_order() {
        let run = |h: f64| {
            let tr = integrate(
                |_, y: &[f64], dy: &mut [f64]| {
                    dy[0] = -y[0];
                    Ok(())
                },
                &[1.0],
                0.0,
                1.0,
                h,
            )
            .unwrap();
            (tr.last().unwrap().1[0] - (-1.0f64).exp()).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn errors_carry_time() {
        let err = integrate(
            |t, _, dy: &mut [f64]| {
                if t > 0.45 {
                    return Err(Error::SingularProfile { t, sigma: 0.0 });
                }
                dy[0] = 1.0;
                Ok(())
            },
            &[0.0],
            0.0,
            1.0,
            0.1,
        )
        .unwrap_err();
        match err {
            Error::Integration { t, .. } => assert_abs_diff_eq!(t, 0.4, epsilon = 1e-12),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn nan_aborts() {
        let err = integrate(
            |_, _, dy: &mut [f64]| {
                dy[0] = f64::NAN;
                Ok(())
            },
            &[0.0],
            0.0,
            1.0,
            0.5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn step_count_rules() {
        assert_eq!(step_count(0.0, 0.2, 1e-4).unwrap(), 2000);
        assert_eq!(step_count(0.0, 1.0, 0.3).unwrap(), 4);
        assert!(step_count(0.0, 1.0, 0.0).is_err());
        assert!(step_count(1.0, 1.0, 0.1).is_err());
    }
}
