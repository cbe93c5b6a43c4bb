//! Scalar observables of particle ensembles and checkers for the flocking,
//! bonding and pattern-control asymptotics.

use crate::error::DiagnosticsError;
use crate::kernels::CommKernel;
use crate::particles::{BondingParams, ControlParams, ParticleEnsemble, Trajectory};

/// Fraction of the time span treated as the late window.
pub const LATE_WINDOW_FRACTION: f64 = 0.2;

/// Relative slack of the pointwise decay bound.
const DECAY_BOUND_SLACK: f64 = 1e-3;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `(N/2) sum_i m_i |v_i|^2`, which is `1/2 sum_i |v_i|^2` for equal masses.
pub fn kinetic_energy(state: &ParticleEnsemble) -> f64 {
    let n = state.len() as f64;
    let s: f64 = (0..state.len())
        .map(|i| state.mass(i) * state.velocity(i).iter().map(|c| c * c).sum::<f64>())
        .sum();
    0.5 * n * s
}

/// `sum_{i,j} |v_i - v_j|^2` over ordered pairs.
pub fn velocity_pair_sum(state: &ParticleEnsemble) -> f64 {
    pair_sum(state, |s, i| s.velocity(i))
}

/// `sum_{i,j} |x_i - x_j|^2` over ordered pairs.
pub fn position_pair_sum(state: &ParticleEnsemble) -> f64 {
    pair_sum(state, |s, i| s.position(i))
}

fn pair_sum<'a>(state: &'a ParticleEnsemble, f: impl Fn(&'a ParticleEnsemble, usize) -> &'a [f64]) -> f64 {
    let n = state.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            acc += sq_dist(f(state, i), f(state, j));
        }
    }
    2.0 * acc
}

/// `(max |x_i - x_j|, max |v_i - v_j|)`.
pub fn diameters(state: &ParticleEnsemble) -> (f64, f64) {
    let n = state.len();
    let (mut dx, mut dv) = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in i + 1..n {
            dx = dx.max(sq_dist(state.position(i), state.position(j)));
            dv = dv.max(sq_dist(state.velocity(i), state.velocity(j)));
        }
    }
    (dx.sqrt(), dv.sqrt())
}

/// Smallest distance between any two particles of distinct classes
/// (infinite when there is a single class).
pub fn min_pair_distance(state: &ParticleEnsemble) -> f64 {
    state.min_interclass_distance().map_or(f64::INFINITY, |p| p.0)
}

/// Time derivative of `sum_i |v_i|^2` for equal masses predicted by the
/// dissipation identity: `-(1/N) sum_{i,j} |v_i - v_j|^2 psi(|x_i - x_j|)`.
/// With general masses this is `-N sum_{i,j} m_i m_j |v_i - v_j|^2 psi`,
/// matching the `(N/2) sum m |v|^2` energy convention.
pub fn dissipation_rate(state: &ParticleEnsemble, kernel: &CommKernel) -> f64 {
    let n = state.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            if state.same_class(i, j) {
                continue;
            }
            let d = sq_dist(state.position(i), state.position(j)).sqrt();
            acc += state.mass(i)
                * state.mass(j)
                * sq_dist(state.velocity(i), state.velocity(j))
                * kernel.eval_unchecked(d);
        }
    }
    -2.0 * n as f64 * acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlockReport {
    pub aligned: bool,
    pub flocked: bool,
    pub position_diameter_sup: f64,
    /// `(t, sum_{i,j} |v_i - v_j|^2)`.
    pub velocity_norm_series: Vec<(f64, f64)>,
    pub fitted_decay_rate: f64,
    /// `psi(x_M)`.
    pub bound_rate: f64,
    /// Empirical extrema of `sum_{i,j} |x_i - x_j|^2`.
    pub x_m: f64,
    pub x_big_m: f64,
    /// Bound holds with the norm read as the squared pair sum.
    pub squared_reading_holds: bool,
    /// Bound holds with the norm read as the root of the pair sum.
    pub root_reading_holds: bool,
    /// First sample violating the squared reading, if any.
    pub first_violation: Option<usize>,
    /// Smallness hypothesis on the initial data, for the conditional case.
    pub hypothesis_met: Option<bool>,
}

impl FlockReport {
    pub fn bound_holds(&self) -> bool {
        self.squared_reading_holds || self.root_reading_holds
    }
}

fn flock_report(traj: &Trajectory, alpha: f64) -> Result<FlockReport, DiagnosticsError> {
    let kernel = CommKernel::singular(alpha)
        .map_err(|e| DiagnosticsError::Precondition(e.to_string()))?;
    let first = traj.first();
    let x0 = position_pair_sum(first);
    if !(x0 > 0.0) {
        return Err(DiagnosticsError::Precondition(
            "initial positions coincide (|x0| = 0)".into(),
        ));
    }
    let mut x_m = f64::INFINITY;
    let mut x_big_m = 0.0f64;
    let mut diam_sup = 0.0f64;
    let mut series = Vec::with_capacity(traj.samples.len());
    for s in &traj.samples {
        let p = position_pair_sum(&s.state);
        x_m = x_m.min(p);
        x_big_m = x_big_m.max(p);
        diam_sup = diam_sup.max(diameters(&s.state).0);
        series.push((s.t, velocity_pair_sum(&s.state)));
    }
    let rate = kernel.eval_unchecked(x_big_m);
    let v0 = series[0].1;
    let mut first_violation = None;
    let mut root_ok = true;
    for (k, &(t, v)) in series.iter().enumerate() {
        let decay = (-rate * t).exp();
        let bound = (1.0 + DECAY_BOUND_SLACK) * v0 * decay + 1e-13 * v0;
        if v > bound && first_violation.is_none() {
            first_violation = Some(k);
        }
        let root_bound = (1.0 + DECAY_BOUND_SLACK) * v0.sqrt() * decay + 1e-13 * v0.sqrt();
        if v.sqrt() > root_bound {
            root_ok = false;
        }
    }
    let t_end = series.last().map_or(0.0, |s| s.0);
    let positive: Vec<(f64, f64)> = series.iter().copied().filter(|s| s.1 > 0.0).collect();
    let fitted = if positive.len() >= 2 && v0 > 0.0 {
        fit_decay_rate(&positive, (0.0, t_end)).unwrap_or(f64::NAN)
    } else {
        f64::INFINITY
    };
    let v_end = series.last().map_or(0.0, |s| s.1);
    let aligned = v_end <= 1e-6 * v0.max(f64::MIN_POSITIVE) || v_end == 0.0;
    Ok(FlockReport {
        aligned,
        flocked: aligned && diam_sup.is_finite(),
        position_diameter_sup: diam_sup,
        velocity_norm_series: series,
        fitted_decay_rate: fitted,
        bound_rate: rate,
        x_m,
        x_big_m,
        squared_reading_holds: first_violation.is_none(),
        root_reading_holds: root_ok,
        first_violation,
        hypothesis_met: None,
    })
}

fn violation(report: &FlockReport) -> DiagnosticsError {
    let k = report.first_violation.unwrap_or(0);
    let (t, v) = report.velocity_norm_series[k];
    let v0 = report.velocity_norm_series[0].1;
    DiagnosticsError::ReportViolation {
        index: k,
        t,
        observed: v,
        bound: v0 * (-report.bound_rate * t).exp(),
    }
}

/// Checks `x_m <= sum (x_i - x_j)^2 <= x_M` and the exponential decay of the
/// velocity pair sum at rate `psi(x_M)` for `alpha in (0, 1]`, under both
/// readings of the norm. Fails only if neither reading holds.
pub fn check_unconditional_flocking(
    traj: &Trajectory,
    alpha: f64,
) -> Result<FlockReport, DiagnosticsError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DiagnosticsError::Precondition(format!(
            "unconditional flocking needs alpha in (0, 1], got {alpha}"
        )));
    }
    let report = flock_report(traj, alpha)?;
    if report.bound_holds() {
        Ok(report)
    } else {
        Err(violation(&report))
    }
}

/// Initial-data hypothesis for `alpha > 1`:
/// `(sum (x_i - x_j)^2)^((1 - alpha)/2) >= (alpha - 1) sqrt(sum (v_i - v_j)^2)`.
pub fn conditional_hypothesis(state: &ParticleEnsemble, alpha: f64) -> bool {
    let xs = position_pair_sum(state).sqrt();
    let vs = velocity_pair_sum(state).sqrt();
    xs.powf(1.0 - alpha) >= (alpha - 1.0) * vs
}

/// Same verification as the unconditional case for `alpha > 1`. An unmet
/// hypothesis is recorded in the report, not treated as an error.
pub fn check_conditional_flocking(
    traj: &Trajectory,
    alpha: f64,
) -> Result<FlockReport, DiagnosticsError> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(DiagnosticsError::Precondition(format!(
            "conditional flocking needs alpha > 1, got {alpha}"
        )));
    }
    let mut report = flock_report(traj, alpha)?;
    report.hypothesis_met = Some(conditional_hypothesis(traj.first(), alpha));
    if report.bound_holds() {
        Ok(report)
    } else {
        Err(violation(&report))
    }
}

fn late_window_start(traj: &Trajectory) -> f64 {
    let t_end = traj.samples.last().map_or(0.0, |s| s.t);
    t_end * (1.0 - LATE_WINDOW_FRACTION)
}

fn late_min_distance(traj: &Trajectory) -> f64 {
    let t0 = late_window_start(traj);
    traj.samples
        .iter()
        .filter(|s| s.t >= t0)
        .map(|s| min_pair_distance(&s.state))
        .fold(f64::INFINITY, f64::min)
}

fn centroid_radius(state: &ParticleEnsemble) -> f64 {
    let d = state.dim();
    let mut c = vec![0.0; d];
    for i in 0..state.len() {
        for k in 0..d {
            c[k] += state.mass(i) * state.position(i)[k];
        }
    }
    (0..state.len())
        .map(|i| sq_dist(state.position(i), &c).sqrt())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BondingReport {
    /// `E_k(t_end) / E_k(0)`; zero when the initial energy vanishes.
    pub energy_ratio: f64,
    pub final_energy: f64,
    /// Minimum pairwise distance over the late window.
    pub late_min_distance: f64,
    /// Maximum pairwise distance at `t_end`.
    pub final_diameter: f64,
    /// Largest distance from the centroid at `t_end`.
    pub final_centroid_radius: f64,
    pub two_r: f64,
}

impl BondingReport {
    pub fn diameter_within(&self, rel_slack: f64) -> bool {
        self.final_diameter <= self.two_r * (1.0 + rel_slack)
    }

    pub fn centroid_radius_within(&self, rel_slack: f64) -> bool {
        self.final_centroid_radius <= self.two_r * (1.0 + rel_slack)
    }
}

pub fn check_bonding_asymptotics(traj: &Trajectory, p: &BondingParams) -> BondingReport {
    let e0 = kinetic_energy(traj.first());
    let last = traj.last();
    let e1 = kinetic_energy(last);
    BondingReport {
        energy_ratio: if e0 > 0.0 { e1 / e0 } else { 0.0 },
        final_energy: e1,
        late_min_distance: late_min_distance(traj),
        final_diameter: diameters(last).0,
        final_centroid_radius: centroid_radius(last),
        two_r: 2.0 * p.radius,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlReport {
    /// `max_i |x_i - x_{i-1} + z_{i-1}|` at `t_end`.
    pub pattern_residual: f64,
    pub velocity_diameter: f64,
    pub late_min_distance: f64,
    /// Residual below `1e-2`.
    pub converged: bool,
}

/// Late-window distances below this fraction of the initial minimum distance
/// are taken as an approaching collision.
const ASYMPTOTIC_COLLISION_FRACTION: f64 = 1e-3;

pub fn check_control_pattern(
    traj: &Trajectory,
    p: &ControlParams,
) -> Result<ControlReport, DiagnosticsError> {
    let last = traj.last();
    if p.offsets.len() + 1 != last.len() {
        return Err(DiagnosticsError::Precondition("offset count does not match N - 1".into()));
    }
    let d0 = min_pair_distance(traj.first());
    let late = late_min_distance(traj);
    if !(late > ASYMPTOTIC_COLLISION_FRACTION * d0) {
        return Err(DiagnosticsError::AsymptoticCollisionSuspected(late));
    }
    let mut residual = 0.0f64;
    for (k, z) in p.offsets.iter().enumerate() {
        let (a, b) = (last.position(k), last.position(k + 1));
        let r: f64 = (0..last.dim())
            .map(|c| (b[c] - a[c] + z[c]).powi(2))
            .sum::<f64>()
            .sqrt();
        residual = residual.max(r);
    }
    Ok(ControlReport {
        pattern_residual: residual,
        velocity_diameter: diameters(last).1,
        late_min_distance: late,
        converged: residual < 1e-2,
    })
}

/// Negated least-squares slope of `ln(value)` against `t` over the samples
/// with `t` in `window`.
pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64, DiagnosticsError> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if pts.len() < 2 {
        return Err(DiagnosticsError::Precondition(
            "need at least two samples in the window".into(),
        ));
    }
    if let Some(&(t, value)) = pts.iter().find(|p| !(p.1 > 0.0)) {
        return Err(DiagnosticsError::NonPositiveValue { t, value });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, v) in &pts {
        sxy += (t - mt) * (v.ln() - ml);
        sxx += (t - mt) * (t - mt);
    }
    if sxx == 0.0 {
        return Err(DiagnosticsError::Precondition("window has a single time".into()));
    }
    Ok(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::{integrate, IntegrationOptions, SampleTimes, System};

    fn ens1d(x: &[f64], v: &[f64]) -> ParticleEnsemble {
        let xs: Vec<Vec<f64>> = x.iter().map(|&a| vec![a]).collect();
        let vs: Vec<Vec<f64>> = v.iter().map(|&a| vec![a]).collect();
        ParticleEnsemble::with_equal_masses(1, &xs, &vs).unwrap()
    }

    #[test]
    fn kinetic_energy_examples() {
        assert_eq!(kinetic_energy(&ens1d(&[0.0, 1.0], &[0.0, 0.0])), 0.0);
        let s = ens1d(&[0.0, 1.0], &[1.0, -1.0]);
        assert!((kinetic_energy(&s) - 1.0).abs() < 1e-15);
        assert!((velocity_pair_sum(&s) / (4.0 * 2.0) - 1.0).abs() < 1e-15);
        // translation: energy without any velocity spread
        let s = ens1d(&[0.0, 1.0, 2.0], &[2.0, 2.0, 2.0]);
        assert!((kinetic_energy(&s) - 6.0).abs() < 1e-14);
        assert_eq!(velocity_pair_sum(&s), 0.0);
    }

    #[test]
    fn diameter_examples() {
        let one = ParticleEnsemble::with_equal_masses(2, &[vec![1.0, 2.0]], &[vec![3.0, 4.0]]).unwrap();
        assert_eq!(diameters(&one), (0.0, 0.0));
        assert_eq!(diameters(&ens1d(&[0.0, 3.0], &[1.0, 1.0])), (3.0, 0.0));
    }

    #[test]
    fn energy_identity_under_mean_zero() {
        let mut s = ParticleEnsemble::random_uniform(7, 3, 1.0, 1.0, 11);
        let p = s.momentum();
        let mut y = s.to_state_vector();
        let nd = 7 * 3;
        for i in 0..7 {
            for c in 0..3 {
                y[nd + i * 3 + c] -= p[c];
            }
        }
        s.set_state_vector(&y);
        let lhs = kinetic_energy(&s);
        let rhs = velocity_pair_sum(&s) / (4.0 * 7.0);
        assert!((lhs - rhs).abs() < 1e-12 * lhs.max(1.0));
    }

    #[test]
    fn decay_fit_examples() {
        let s: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 0.1, (-2.0 * k as f64 * 0.1).exp())).collect();
        assert!((fit_decay_rate(&s, (0.0, 5.0)).unwrap() - 2.0).abs() < 1e-10);
        let c: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 3.0)).collect();
        assert!(fit_decay_rate(&c, (0.0, 10.0)).unwrap().abs() < 1e-15);
        let bad = vec![(0.0, 1.0), (1.0, 0.0)];
        assert!(matches!(
            fit_decay_rate(&bad, (0.0, 1.0)),
            Err(DiagnosticsError::NonPositiveValue { .. })
        ));
    }

    #[test]
    fn two_birds_rate_beats_regular_weight_bound() {
        // x' = v, v' = -v/(1+|x|)^alpha for the relative coordinates
        let alpha = 0.7;
        let s = ens1d(&[0.0, 1.0], &[0.5, -0.2]);
        let sys = System::Cs {
            kernel: CommKernel::regular(alpha).unwrap(),
        };
        let opts = IntegrationOptions {
            samples: SampleTimes::Uniform(200),
            ..Default::default()
        };
        let traj = integrate(&sys, &s, 20.0, &opts).unwrap();
        let x_max = traj
            .samples
            .iter()
            .map(|p| diameters(&p.state).0)
            .fold(0.0, f64::max);
        let series: Vec<(f64, f64)> = traj
            .samples
            .iter()
            .map(|p| (p.t, diameters(&p.state).1))
            .collect();
        let rate = fit_decay_rate(&series, (0.0, 20.0)).unwrap();
        assert!(rate >= (1.0 + x_max).powf(-alpha), "{rate}");
    }

    #[test]
    fn unconditional_flocking_two_body() {
        let s = ens1d(&[0.0, 1.0], &[0.5, -0.5]);
        let sys = System::Cs {
            kernel: CommKernel::singular(1.0).unwrap(),
        };
        let opts = IntegrationOptions {
            samples: SampleTimes::Uniform(100),
            ..Default::default()
        };
        let traj = integrate(&sys, &s, 20.0, &opts).unwrap();
        let r = check_unconditional_flocking(&traj, 1.0).unwrap();
        assert!(r.bound_holds());
        assert!(r.fitted_decay_rate > r.bound_rate);
        assert!(r.aligned && r.flocked);
        assert!(matches!(
            check_unconditional_flocking(&traj, 1.5),
            Err(DiagnosticsError::Precondition(_))
        ));
    }

    #[test]
    fn consensus_flocks_trivially() {
        let s = ens1d(&[0.0, 1.0, 3.0], &[0.2, 0.2, 0.2]);
        let sys = System::Cs {
            kernel: CommKernel::singular(0.5).unwrap(),
        };
        let traj = integrate(&sys, &s, 1.0, &IntegrationOptions::default()).unwrap();
        let r = check_unconditional_flocking(&traj, 0.5).unwrap();
        assert!(r.squared_reading_holds && r.root_reading_holds);
        assert!(r.velocity_norm_series.iter().all(|p| p.1 == 0.0));
    }

    #[test]
    fn conditional_hypothesis_cases() {
        // v0 = 0: always satisfied
        assert!(conditional_hypothesis(&ens1d(&[0.0, 5.0], &[0.0, 0.0]), 2.0));
        // N = 2, alpha = 2: (sqrt(2) |dx|)^-1 >= sqrt(2) |dv|  <=>  |dv| <= 1/(2|dx|)
        let dx: f64 = 2.0;
        let dv = 1.0 / (2.0 * dx);
        assert!(conditional_hypothesis(&ens1d(&[0.0, dx], &[dv * (1.0 - 1e-12), 0.0]), 2.0));
        assert!(!conditional_hypothesis(&ens1d(&[0.0, dx], &[dv * 1.01, 0.0]), 2.0));
    }

    #[test]
    fn conditional_flocking_reports_unmet_hypothesis() {
        let s = ens1d(&[0.0, 1.0], &[2.0, -2.0]);
        let sys = System::Cs {
            kernel: CommKernel::singular(2.0).unwrap(),
        };
        let traj = integrate(&sys, &s, 10.0, &IntegrationOptions::default()).unwrap();
        let r = check_conditional_flocking(&traj, 2.0);
        match r {
            Ok(rep) => assert_eq!(rep.hypothesis_met, Some(false)),
            Err(DiagnosticsError::ReportViolation { .. }) => {}
            Err(e) => panic!("{e}"),
        }
        assert!(check_conditional_flocking(&traj, 1.0).is_err());
    }

    #[test]
    fn bonding_equilibrium_report() {
        let r = 0.5;
        let s = ParticleEnsemble::with_equal_masses(
            2,
            &[vec![-r, 0.0], vec![r, 0.0]],
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let p = BondingParams {
            k1: 1.0,
            k2: 1.0,
            k_tilde: 1.0,
            radius: r,
            simplified: false,
        };
        let sys = System::Bonding {
            kernel: CommKernel::singular(1.0).unwrap(),
            params: p,
        };
        let traj = integrate(&sys, &s, 5.0, &IntegrationOptions::default()).unwrap();
        let rep = check_bonding_asymptotics(&traj, &p);
        assert_eq!(rep.energy_ratio, 0.0);
        assert!((rep.late_min_distance - 2.0 * r).abs() < 1e-14);
        assert!(rep.diameter_within(0.0) || (rep.final_diameter - 2.0 * r).abs() < 1e-14);
    }

    #[test]
    fn bonding_rest_state_satisfies_virial_balance() {
        // at rest, sum_i x_i . F_i = 0 gives sum_pairs (d - 2R) d = 0,
        // so some pair sits beyond 2R once N exceeds d + 1
        let p = BondingParams {
            k1: 1.0,
            k2: 1.0,
            k_tilde: 1.0,
            radius: 1.0,
            simplified: false,
        };
        let sys = System::Bonding {
            kernel: CommKernel::singular(1.0).unwrap(),
            params: p,
        };
        let s0 = ParticleEnsemble::random_uniform(5, 2, 2.0, 0.5, 505).centered();
        let traj = integrate(&sys, &s0, 300.0, &IntegrationOptions::default()).unwrap();
        let last = traj.last();
        let mut virial = 0.0;
        for i in 0..5 {
            for j in i + 1..5 {
                let d = sq_dist(last.position(i), last.position(j)).sqrt();
                virial += (d - 2.0) * d;
            }
        }
        assert!(virial.abs() < 1e-6, "{virial}");
        let rep = check_bonding_asymptotics(&traj, &p);
        assert!(rep.final_diameter > rep.two_r);
    }

    #[test]
    fn control_on_pattern_has_zero_residual() {
        let s = ParticleEnsemble::with_equal_masses(
            2,
            &[vec![0.0, 0.0], vec![-1.0, 0.0], vec![-1.0, -1.0]],
            &vec![vec![0.0, 0.0]; 3],
        )
        .unwrap();
        let p = ControlParams {
            k: 1.0,
            beta: 0.5,
            offsets: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let sys = System::Control {
            kernel: CommKernel::singular(1.0).unwrap(),
            params: p.clone(),
        };
        let traj = integrate(&sys, &s, 3.0, &IntegrationOptions::default()).unwrap();
        let rep = check_control_pattern(&traj, &p).unwrap();
        assert_eq!(rep.pattern_residual, 0.0);
        assert!(rep.converged);
    }

    #[test]
    fn control_order_conflict_in_one_dimension() {
        // z_1 = -1 asks for x_2 = x_1 + 1 but particle 2 starts to the left
        let s = ens1d(&[1.0, 0.0], &[0.0, 0.0]);
        let p = ControlParams {
            k: 1.0,
            beta: 0.5,
            offsets: vec![vec![-1.0]],
        };
        let sys = System::Control {
            kernel: CommKernel::singular(1.0).unwrap(),
            params: p.clone(),
        };
        let opts = IntegrationOptions {
            samples: SampleTimes::Uniform(200),
            ..Default::default()
        };
        // the gap closes like exp(-1.4 t) and the relative motion stiffens with it
        match integrate(&sys, &s, 8.0, &opts) {
            Ok(traj) => match check_control_pattern(&traj, &p) {
                Err(DiagnosticsError::AsymptoticCollisionSuspected(_)) => {}
                Ok(rep) => assert!(!rep.converged, "{rep:?}"),
                Err(e) => panic!("{e}"),
            },
            // the control drives the pair into the singularity
            Err(_) => {}
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn kinetic_energy_non_increasing(seed in 0u64..1000, which in 0usize..4) {
                let alpha = [0.25, 0.5, 1.0, 1.5][which];
                let s = ParticleEnsemble::random_uniform(5, 2, 1.0, 1.0, seed);
                let sys = System::Cs { kernel: CommKernel::singular(alpha).unwrap() };
                let opts = IntegrationOptions { samples: SampleTimes::Uniform(40), ..Default::default() };
                let traj = integrate(&sys, &s, 4.0, &opts).unwrap();
                let e: Vec<f64> = traj.samples.iter().map(|p| kinetic_energy(&p.state)).collect();
                for w in e.windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-9);
                }
            }
        }
    }
}
