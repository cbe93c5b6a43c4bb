//! Dormand-Prince 5(4) embedded Runge-Kutta stepper.
//!
//! The stepper only performs single attempted steps; step-size control lives
//! with the callers because the particle integrator layers distance-based
//! ceilings and event handling on top of the usual error control.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Absolute and relative error tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

/// Workspace for Dormand-Prince steps on a state of fixed dimension.
#[derive(Debug, Clone)]
pub struct DormandPrince {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl DormandPrince {
    pub fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.tmp.len()
    }

    /// Attempts one step of size `h` from `(t, y)` and writes the
    /// fifth-order solution into `y_out`. Returns the scaled RMS error
    /// estimate: values `<= 1` mean the step is acceptable.
    pub fn try_step<F, E>(
        &mut self,
        f: &mut F,
        t: f64,
        y: &[f64],
        h: f64,
        tol: Tolerances,
        y_out: &mut [f64],
    ) -> Result<f64, E>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    {
        let n = y.len();
        debug_assert_eq!(n, self.dim());
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;

        f(t, y, k1)?;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, tmp, k2)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, tmp, k3)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, tmp, k4)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, tmp, k5)?;
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, tmp, k6)?;
        for i in 0..n {
            y_out[i] =
                y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        f(t + h, y_out, k7)?;

        let mut acc = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = tol.atol + tol.rtol * y[i].abs().max(y_out[i].abs());
            acc += (e / scale).powi(2);
        }
        Ok(if n == 0 { 0.0 } else { (acc / n as f64).sqrt() })
    }
}

/// Step-size update factor from an error estimate (order-5 controller).
pub fn step_factor(err: f64) -> f64 {
    const SAFETY: f64 = 0.9;
    if err == 0.0 {
        5.0
    } else {
        (SAFETY * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}

/// Integrates `y' = f(t, y)` from `t0` through each time in `samples`
/// (which must be sorted and `>= t0`), returning the state at every sample.
/// Steps are clipped to land on sample times exactly.
pub fn integrate_samples<F, E>(
    f: &mut F,
    t0: f64,
    y0: &[f64],
    samples: &[f64],
    tol: Tolerances,
    h_init: f64,
    h_min: f64,
) -> Result<Vec<Vec<f64>>, IntegrateError<E>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    let mut dp = DormandPrince::new(y0.len());
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; y0.len()];
    let mut t = t0;
    let mut h = h_init;
    let mut out = Vec::with_capacity(samples.len());
    for &ts in samples {
        while t < ts {
            let step = h.min(ts - t);
            let err = dp
                .try_step(f, t, &y, step, tol, &mut y_new)
                .map_err(IntegrateError::Rhs)?;
            if err <= 1.0 && err.is_finite() {
                t = if step == ts - t { ts } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                h = step * step_factor(err);
            } else {
                h = step * if err.is_finite() { step_factor(err) } else { 0.2 };
                if h < h_min {
                    return Err(IntegrateError::StepUnderflow { t, h });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntegrateError<E> {
    Rhs(E),
    StepUnderflow { t: f64, h: f64 },
}
