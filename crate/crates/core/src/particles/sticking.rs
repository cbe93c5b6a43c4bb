//! Two-body reduction `x'' = -x' psi(x)` with `psi(s) = s^(-alpha)`, `alpha < 1`.
//!
//! Along solutions `x' + Psi(x)` is constant, which decides between sticking,
//! collision at nonzero speed and no collision at all.

use crate::error::ParticleError;
use crate::kernels::psi_primitive;
use crate::ode::{step_factor, DormandPrince, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StickingOutcome {
    pub sticks: bool,
    pub collides: bool,
    /// Time at which `x` reaches zero, when it does.
    pub t_event: Option<f64>,
    /// `|x'|` when `x` reaches zero (zero when sticking).
    pub impact_speed: Option<f64>,
    /// Limit distance approached when there is no collision.
    pub limit_distance: Option<f64>,
    /// `v0 + Psi(x0)`.
    pub first_integral: f64,
}

fn check_args(x0: f64, v0: f64, alpha: f64) -> Result<(), ParticleError> {
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(ParticleError::InvalidParams(format!("x0 must be > 0, got {x0}")));
    }
    if !v0.is_finite() {
        return Err(ParticleError::InvalidParams("v0 must be finite".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ParticleError::InvalidParams(format!(
            "sticking analysis needs alpha in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Classifies the two-body trajectory from relative distance `x0` and
/// relative velocity `v0`.
pub fn two_particle_sticking(x0: f64, v0: f64, alpha: f64) -> Result<StickingOutcome, ParticleError> {
    check_args(x0, v0, alpha)?;
    let p0 = psi_primitive(alpha, x0)?;
    let c = v0 + p0;
    let scale = 1.0f64.max(v0.abs()).max(p0);
    let critical = c.abs() <= 1e-12 * scale;

    if critical {
        return Ok(StickingOutcome {
            sticks: true,
            collides: true,
            t_event: Some((1.0 - alpha) * x0.powf(alpha) / alpha),
            impact_speed: Some(0.0),
            limit_distance: None,
            first_integral: c,
        });
    }
    if c > 0.0 {
        // x' = c - Psi(x) vanishes where Psi(x*) = c
        let x_star = ((1.0 - alpha) * c).powf(1.0 / (1.0 - alpha));
        return Ok(StickingOutcome {
            sticks: false,
            collides: false,
            t_event: None,
            impact_speed: None,
            limit_distance: Some(x_star),
            first_integral: c,
        });
    }
    // t = int_0^x0 dx / (Psi(x) - c), with x = y^(1/alpha) to tame the origin
    let inv = 1.0 / alpha;
    let f = |y: f64| {
        let x = y.powf(inv);
        let psi = x.powf(1.0 - alpha) / (1.0 - alpha);
        inv * y.powf(inv - 1.0) / (psi - c)
    };
    let t = adaptive_simpson(&f, 0.0, x0.powf(alpha), 1e-13, 50);
    Ok(StickingOutcome {
        sticks: false,
        collides: true,
        t_event: Some(t),
        impact_speed: Some(-c),
        limit_distance: None,
        first_integral: c,
    })
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, depth)
}

/// Numerically integrated relative path `(t, x, x')`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativePath {
    pub alpha: f64,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    /// Whether integration stopped because `x` fell below the stop distance.
    pub reached_contact: bool,
}

impl RelativePath {
    /// Largest deviation of `x' + Psi(x)` from its initial value.
    pub fn first_integral_drift(&self) -> f64 {
        let c = |k: usize| self.xdot[k] + psi_primitive(self.alpha, self.x[k]).expect("x > 0");
        let c0 = c(0);
        (0..self.t.len()).map(|k| (c(k) - c0).abs()).fold(0.0, f64::max)
    }

    pub fn min_distance(&self) -> f64 {
        self.x.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Integrates the two-body reduction directly, stopping at `t_end` or once
/// `x` drops below `x_stop`. Steps are capped at a tenth of `x / |x'|`.
pub fn integrate_relative(
    x0: f64,
    v0: f64,
    alpha: f64,
    t_end: f64,
    x_stop: f64,
    tol: Tolerances,
) -> Result<RelativePath, ParticleError> {
    check_args(x0, v0, alpha)?;
    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), ParticleError> {
        if !(y[0] > 0.0) {
            return Err(ParticleError::SingularOverlap {
                i: 0,
                j: 1,
                distance: y[0],
                t: _t,
            });
        }
        dy[0] = y[1];
        dy[1] = -y[1] * y[0].powf(-alpha);
        Ok(())
    };
    let mut dp = DormandPrince::new(2);
    let mut y = [x0, v0];
    let mut y_new = [0.0; 2];
    let mut t = 0.0;
    let mut h = 1e-3f64;
    let mut path = RelativePath {
        alpha,
        t: vec![0.0],
        x: vec![x0],
        xdot: vec![v0],
        reached_contact: false,
    };
    let mut steps = 0usize;
    while t < t_end {
        steps += 1;
        if steps > 10_000_000 {
            return Err(ParticleError::TooManySteps(steps));
        }
        let ceiling = 0.1 * y[0] / (y[1].abs() + 1e-300);
        let step = h.min(ceiling).min(t_end - t);
        match dp.try_step(&mut rhs, t, &y, step, tol, &mut y_new) {
            Ok(err) if err <= 1.0 && y_new[0] > 0.0 => {
                t = if step == t_end - t { t_end } else { t + step };
                y = y_new;
                path.t.push(t);
                path.x.push(y[0]);
                path.xdot.push(y[1]);
                h = step * step_factor(err);
                if y[0] < x_stop {
                    path.reached_contact = true;
                    break;
                }
            }
            Ok(err) if err.is_finite() && err > 1.0 => h = step * step_factor(err),
            Ok(_) | Err(ParticleError::SingularOverlap { .. }) => h = step * 0.2,
            Err(e) => return Err(e),
        }
        if h < 1e-300 {
            return Err(ParticleError::StepUnderflow { t, h, d_min: y[0] });
        }
    }
    Ok(path)
}
