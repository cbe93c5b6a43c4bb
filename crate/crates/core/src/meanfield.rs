//! Atomic measures on phase space, the bounded-Lipschitz distance between
//! them, and mean-field experiments built on particle approximations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::MeanFieldError;
use crate::kernels::CommKernel;
use crate::ode::{integrate_samples, IntegrateError, Tolerances};
use crate::particles::{integrate, IntegrationOptions, ParticleEnsemble, SampleTimes, System};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Weighted Dirac masses at points `(x, v)` of `R^d x R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    dim: usize,
    xs: Vec<f64>,
    vs: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(dim: usize, xs: Vec<f64>, vs: Vec<f64>, weights: Vec<f64>) -> Result<Self, MeanFieldError> {
        if dim == 0 {
            return Err(MeanFieldError::InvalidMeasure("dimension must be >= 1".into()));
        }
        let n = weights.len();
        if xs.len() != n * dim || vs.len() != n * dim {
            return Err(MeanFieldError::InvalidMeasure("buffer length mismatch".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(MeanFieldError::InvalidMeasure("weights must be positive".into()));
        }
        if xs.iter().chain(&vs).any(|c| !c.is_finite()) {
            return Err(MeanFieldError::InvalidMeasure("non-finite coordinate".into()));
        }
        Ok(Self { dim, xs, vs, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, a: usize) -> &[f64] {
        &self.xs[a * self.dim..(a + 1) * self.dim]
    }

    pub fn v(&self, a: usize) -> &[f64] {
        &self.vs[a * self.dim..(a + 1) * self.dim]
    }

    pub fn weight(&self, a: usize) -> f64 {
        self.weights[a]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= WEIGHT_SUM_TOL
    }

    /// Joint Euclidean distance between atom `a` of `self` and atom `b` of `other`.
    pub fn phase_distance(&self, a: usize, other: &AtomicMeasure, b: usize) -> f64 {
        let dx: f64 = self.x(a).iter().zip(other.x(b)).map(|(p, q)| (p - q).powi(2)).sum();
        let dv: f64 = self.v(a).iter().zip(other.v(b)).map(|(p, q)| (p - q).powi(2)).sum();
        (dx + dv).sqrt()
    }

    /// Integral of `phi(x, v)` against the measure.
    pub fn integrate(&self, phi: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
        (0..self.len()).map(|a| self.weights[a] * phi(self.x(a), self.v(a))).sum()
    }

    /// Particle ensemble with one particle per atom; requires unit mass.
    pub fn to_ensemble(&self) -> Result<ParticleEnsemble, MeanFieldError> {
        Ok(ParticleEnsemble::from_flat(
            self.dim,
            self.xs.clone(),
            self.vs.clone(),
            self.weights.clone(),
        )?)
    }
}

/// One atom per merged class, weighted by the class mass.
pub fn empirical_measure(state: &ParticleEnsemble) -> AtomicMeasure {
    let d = state.dim();
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    let mut weights = Vec::new();
    for class in state.classes() {
        let m: f64 = class.iter().map(|&i| state.mass(i)).sum();
        for k in 0..d {
            xs.push(class.iter().map(|&i| state.mass(i) * state.position(i)[k]).sum::<f64>() / m);
        }
        for k in 0..d {
            vs.push(class.iter().map(|&i| state.mass(i) * state.velocity(i)[k]).sum::<f64>() / m);
        }
        weights.push(m);
    }
    AtomicMeasure {
        dim: d,
        xs,
        vs,
        weights,
    }
}

/// Minimum-cost balanced transportation by successive shortest paths with
/// node potentials. Returns the optimal cost and the flow matrix (row-major).
fn transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<(f64, Vec<f64>), MeanFieldError> {
    let m = supply.len();
    let n = demand.len();
    let total: f64 = supply.iter().sum();
    let eps = 1e-15 * total.max(f64::MIN_POSITIVE);
    let mut flow = vec![0.0; m * n];
    let mut rs = supply.to_vec();
    let mut rd = demand.to_vec();
    let mut pot_s = vec![0.0; m];
    let mut pot_t = vec![0.0; n];
    let mut dist_s = vec![0.0; m];
    let mut dist_t = vec![0.0; n];
    let mut pred_t = vec![usize::MAX; n];
    let mut pred_s = vec![usize::MAX; m];
    let mut done_s = vec![false; m];
    let mut done_t = vec![false; n];
    let max_rounds = 10 * (m + n) * (m + n) + 100;

    for _ in 0..max_rounds {
        if rs.iter().all(|&r| r <= eps) || rd.iter().all(|&r| r <= eps) {
            let value = flow.iter().zip(cost).map(|(f, c)| f * c).sum();
            return Ok((value, flow));
        }
        for i in 0..m {
            dist_s[i] = if rs[i] > eps { 0.0 } else { f64::INFINITY };
            pred_s[i] = usize::MAX;
            done_s[i] = false;
        }
        for j in 0..n {
            dist_t[j] = f64::INFINITY;
            pred_t[j] = usize::MAX;
            done_t[j] = false;
        }
        loop {
            // dense Dijkstra: pick the closest unsettled node
            let mut best = f64::INFINITY;
            let mut pick: Option<(bool, usize)> = None;
            for i in 0..m {
                if !done_s[i] && dist_s[i] < best {
                    best = dist_s[i];
                    pick = Some((true, i));
                }
            }
            for j in 0..n {
                if !done_t[j] && dist_t[j] < best {
                    best = dist_t[j];
                    pick = Some((false, j));
                }
            }
            let Some((is_source, u)) = pick else { break };
            if is_source {
                done_s[u] = true;
                for j in 0..n {
                    let rc = (cost[u * n + j] + pot_s[u] - pot_t[j]).max(0.0);
                    if best + rc < dist_t[j] {
                        dist_t[j] = best + rc;
                        pred_t[j] = u;
                    }
                }
            } else {
                done_t[u] = true;
                for i in 0..m {
                    if flow[i * n + u] > eps {
                        let rc = (-cost[i * n + u] + pot_t[u] - pot_s[i]).max(0.0);
                        if best + rc < dist_s[i] {
                            dist_s[i] = best + rc;
                            pred_s[i] = u;
                        }
                    }
                }
            }
        }
        let target = (0..n)
            .filter(|&j| rd[j] > eps && dist_t[j].is_finite())
            .min_by(|&a, &b| dist_t[a].total_cmp(&dist_t[b]))
            .ok_or_else(|| MeanFieldError::LpFailure("no augmenting path".into()))?;
        let cap = dist_t[target];
        for i in 0..m {
            pot_s[i] += dist_s[i].min(cap);
        }
        for j in 0..n {
            pot_t[j] += dist_t[j].min(cap);
        }
        // trace back to a source with remaining supply
        let mut bottleneck = rd[target];
        let mut path = Vec::new();
        let mut j = target;
        let start = loop {
            let i = pred_t[j];
            path.push((i, j, true));
            if pred_s[i] == usize::MAX {
                break i;
            }
            let jj = pred_s[i];
            path.push((i, jj, false));
            bottleneck = bottleneck.min(flow[i * n + jj]);
            j = jj;
        };
        bottleneck = bottleneck.min(rs[start]);
        if !(bottleneck > 0.0) {
            return Err(MeanFieldError::LpFailure("degenerate augmentation".into()));
        }
        for &(i, j, forward) in &path {
            if forward {
                flow[i * n + j] += bottleneck;
            } else {
                flow[i * n + j] -= bottleneck;
            }
        }
        rs[start] -= bottleneck;
        rd[target] -= bottleneck;
    }
    Err(MeanFieldError::LpFailure(format!(
        "no convergence after {max_rounds} augmentations"
    )))
}

/// Bounded-Lipschitz distance
/// `sup { int phi d(mu - nu) : |phi| <= 1, Lip(phi) <= 1 }`
/// on phase space with the joint Euclidean metric.
///
/// Computed exactly through the dual problem: the positive and negative
/// parts of `mu - nu` are transported at Euclidean cost, and any mass may
/// instead be created or destroyed at a ground node for cost 1 per unit.
/// Unequal total masses are allowed.
pub fn d1_distance(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<f64, MeanFieldError> {
    if mu.dim != nu.dim {
        return Err(MeanFieldError::InvalidMeasure("dimension mismatch".into()));
    }
    let (p, q) = (mu.len(), nu.len());
    let mut supply = mu.weights.clone();
    supply.push(nu.total_mass());
    let mut demand = nu.weights.clone();
    demand.push(mu.total_mass());
    let n = q + 1;
    let mut cost = vec![0.0; (p + 1) * n];
    for a in 0..p {
        for b in 0..q {
            cost[a * n + b] = mu.phase_distance(a, nu, b);
        }
        cost[a * n + q] = 1.0;
    }
    for b in 0..q {
        cost[p * n + b] = 1.0;
    }
    let (value, _) = transport(&supply, &demand, &cost)?;
    Ok(value.max(0.0))
}

/// Kinetic alignment force `F(f)(x, v) = int (w - v) psi(|x - y|) df(y, w)`
/// at atom `a` of `f`, skipping atoms that sit at the same position.
fn kinetic_force(f_dim: usize, xs: &[f64], vs: &[f64], weights: &[f64], kernel: &CommKernel, a: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|c| *c = 0.0);
    let xa = &xs[a * f_dim..(a + 1) * f_dim];
    let va = &vs[a * f_dim..(a + 1) * f_dim];
    for b in 0..weights.len() {
        let xb = &xs[b * f_dim..(b + 1) * f_dim];
        let r: f64 = xa.iter().zip(xb).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        if b == a || (kernel.is_singular() && r == 0.0) {
            continue;
        }
        let w = weights[b] * kernel.eval_unchecked(r);
        for k in 0..f_dim {
            out[k] += w * (vs[b * f_dim + k] - va[k]);
        }
    }
}

/// Atomic measures sampled along an evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTrajectory {
    pub times: Vec<f64>,
    pub measures: Vec<AtomicMeasure>,
}

/// Evolves an atomic measure along the characteristics of the Vlasov
/// equation `f_t + v . grad_x f + div_v(F(f) f) = 0`: each atom moves with
/// `x' = v`, `v' = F(f)(x, v)`. Atoms are never merged.
pub fn evolve_atomic(
    f0: &AtomicMeasure,
    kernel: &CommKernel,
    times: &[f64],
    tol: Tolerances,
) -> Result<MeasureTrajectory, MeanFieldError> {
    let d = f0.dim;
    let na = f0.len();
    let weights = f0.weights.clone();
    let mut force = vec![0.0; d];
    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), MeanFieldError> {
        let (xs, vs) = y.split_at(na * d);
        let (dx, dv) = dy.split_at_mut(na * d);
        dx.copy_from_slice(vs);
        for a in 0..na {
            kinetic_force(d, xs, vs, &weights, kernel, a, &mut force);
            dv[a * d..(a + 1) * d].copy_from_slice(&force);
        }
        if dv.iter().any(|c| !c.is_finite()) {
            return Err(MeanFieldError::InvalidMeasure("atoms collided".into()));
        }
        Ok(())
    };
    let mut y0 = f0.xs.clone();
    y0.extend_from_slice(&f0.vs);
    let out = integrate_samples(&mut rhs, 0.0, &y0, times, tol, 1e-3, 1e-14).map_err(|e| match e {
        IntegrateError::Rhs(e) => e,
        IntegrateError::StepUnderflow { t, h } => {
            MeanFieldError::InvalidMeasure(format!("step underflow {h:e} at t = {t}"))
        }
    })?;
    let measures = out
        .into_iter()
        .map(|y| AtomicMeasure {
            dim: d,
            xs: y[..na * d].to_vec(),
            vs: y[na * d..].to_vec(),
            weights: f0.weights.clone(),
        })
        .collect();
    Ok(MeasureTrajectory {
        times: times.to_vec(),
        measures,
    })
}

/// Initial kinetic density for convergence experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDistribution {
    /// Uniform on a product of boxes; degenerate intervals give a Dirac factor.
    UniformBox {
        x: Vec<(f64, f64)>,
        v: Vec<(f64, f64)>,
    },
    /// Already atomic; sampling returns it unchanged.
    Atomic(AtomicMeasure),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Midpoint strata in the first position coordinate, Kronecker lattice
    /// in the others. Reproducible bit for bit.
    Stratified,
    /// Seeded pseudo-random draws.
    MonteCarlo { seed: u64 },
}

const KRONECKER: [f64; 6] = [
    0.618_033_988_749_894_8,  // golden ratio conjugate
    0.414_213_562_373_095_1,  // sqrt 2 - 1
    0.732_050_807_568_877_2,  // sqrt 3 - 1
    0.236_067_977_499_789_7,  // sqrt 5 - 2
    0.645_751_311_064_590_6,  // sqrt 7 - 2
    0.316_624_790_355_399_8,  // sqrt 11 - 3
];

impl InitialDistribution {
    pub fn dim(&self) -> usize {
        match self {
            InitialDistribution::UniformBox { x, .. } => x.len(),
            InitialDistribution::Atomic(m) => m.dim,
        }
    }

    /// `n` equally weighted atoms approximating the distribution.
    pub fn sample(&self, n: usize, sampling: Sampling) -> Result<AtomicMeasure, MeanFieldError> {
        let (xb, vb) = match self {
            InitialDistribution::Atomic(m) => return Ok(m.clone()),
            InitialDistribution::UniformBox { x, v } => (x, v),
        };
        let d = xb.len();
        if d == 0 || vb.len() != d {
            return Err(MeanFieldError::InvalidMeasure("box dimensions mismatch".into()));
        }
        if 2 * d - 1 > KRONECKER.len() {
            return Err(MeanFieldError::InvalidMeasure("dimension too large for stratified sampling".into()));
        }
        if n == 0 {
            return Err(MeanFieldError::InvalidMeasure("need at least one atom".into()));
        }
        let mut xs = Vec::with_capacity(n * d);
        let mut vs = Vec::with_capacity(n * d);
        let lerp = |(lo, hi): (f64, f64), u: f64| lo + (hi - lo) * u;
        match sampling {
            Sampling::Stratified => {
                for i in 0..n {
                    let s = i as f64 + 0.5;
                    for k in 0..d {
                        let u = if k == 0 { s / n as f64 } else { (s * KRONECKER[k - 1]).fract() };
                        xs.push(lerp(xb[k], u));
                    }
                    for k in 0..d {
                        vs.push(lerp(vb[k], (s * KRONECKER[d - 1 + k]).fract()));
                    }
                }
            }
            Sampling::MonteCarlo { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..n {
                    for k in 0..d {
                        xs.push(lerp(xb[k], rng.random::<f64>()));
                    }
                    for k in 0..d {
                        vs.push(lerp(vb[k], rng.random::<f64>()));
                    }
                }
            }
        }
        AtomicMeasure::new(d, xs, vs, vec![1.0 / n as f64; n])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub t: f64,
    /// `d1(f_N(T), f_2N(T))`.
    pub d1_vs_double: f64,
    /// `d1(f_N(0), proxy of f0)`.
    pub d1_initial_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Set when the exponent lies outside `(0, 1/2)`.
    pub regime_warning: bool,
    pub proxy_atoms: usize,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,t,d1_vs_double,d1_initial_gap\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{:e},{:e}\n", r.n, r.t, r.d1_vs_double, r.d1_initial_gap));
        }
        s
    }

    /// Whether `d1_vs_double` decreases along the table.
    pub fn decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].d1_vs_double < w[0].d1_vs_double)
    }
}

/// Evolves a measure through the particle solver (merging stuck pairs) and
/// returns the empirical measure at `t_end`.
pub fn evolve_via_particles(
    f0: &AtomicMeasure,
    kernel: &CommKernel,
    t_end: f64,
    opts: &IntegrationOptions,
) -> Result<AtomicMeasure, MeanFieldError> {
    let state = f0.to_ensemble()?;
    let mut opts = opts.clone();
    opts.samples = SampleTimes::Times(vec![0.0, t_end]);
    let traj = integrate(&System::Cs { kernel: *kernel }, &state, t_end, &opts)?;
    Ok(empirical_measure(traj.last()))
}

/// For each `N` in `n_list`, samples `f_{N,0}` and `f_{2N,0}`, evolves both
/// to `t_end` through the particle solver and tabulates the distances.
/// Runs for distinct `N` execute in parallel; rows keep the input order.
pub fn meanfield_convergence(
    f0: &InitialDistribution,
    n_list: &[usize],
    t_end: f64,
    kernel: &CommKernel,
    sampling: Sampling,
    opts: &IntegrationOptions,
) -> Result<ConvergenceTable, MeanFieldError> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MeanFieldError::InvalidMeasure("N list must be increasing and non-empty".into()));
    }
    let alpha = kernel.exponent();
    let regime_warning = !(kernel.is_singular() && alpha > 0.0 && alpha < 0.5);
    let proxy_atoms = 8 * n_list.last().copied().unwrap_or(1);
    let proxy = f0.sample(proxy_atoms, sampling)?;

    let mut needed: Vec<usize> = n_list.iter().flat_map(|&n| [n, 2 * n]).collect();
    needed.sort_unstable();
    needed.dedup();
    let evolved: Vec<(usize, AtomicMeasure, AtomicMeasure)> = needed
        .par_iter()
        .map(|&n| {
            let init = f0.sample(n, sampling)?;
            let end = evolve_via_particles(&init, kernel, t_end, opts)?;
            Ok((n, init, end))
        })
        .collect::<Result<_, MeanFieldError>>()?;
    let find = |n: usize| evolved.iter().find(|e| e.0 == n).expect("sampled size");

    let rows = n_list
        .par_iter()
        .map(|&n| {
            let (_, init, end) = find(n);
            let (_, _, end2) = find(2 * n);
            Ok(ConvergenceRow {
                n,
                t: t_end,
                d1_vs_double: d1_distance(end, end2)?,
                d1_initial_gap: d1_distance(init, &proxy)?,
            })
        })
        .collect::<Result<Vec<_>, MeanFieldError>>()?;
    Ok(ConvergenceTable {
        rows,
        regime_warning,
        proxy_atoms,
    })
}

/// Smooth test functions `Phi(x, v)` with analytic gradients.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Constant(f64),
    /// `a . x + b . v`.
    Linear { a: Vec<f64>, b: Vec<f64> },
    /// Monomial in `(x - cx, v - cv)` times the bump `exp(-1 / (1 - r^2/R^2))`
    /// with `r` the joint distance to `(cx, cv)`.
    PolyBump {
        cx: Vec<f64>,
        cv: Vec<f64>,
        radius: f64,
        px: Vec<u32>,
        pv: Vec<u32>,
    },
}

impl TestFunction {
    /// Value and gradients `(Phi, grad_x Phi, grad_v Phi)`.
    pub fn eval(&self, x: &[f64], v: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let d = x.len();
        match self {
            TestFunction::Constant(c) => (*c, vec![0.0; d], vec![0.0; d]),
            TestFunction::Linear { a, b } => {
                let val = a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>()
                    + b.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
                (val, a.clone(), b.clone())
            }
            TestFunction::PolyBump {
                cx,
                cv,
                radius,
                px,
                pv,
            } => {
                let yx: Vec<f64> = x.iter().zip(cx).map(|(p, c)| p - c).collect();
                let yv: Vec<f64> = v.iter().zip(cv).map(|(p, c)| p - c).collect();
                let r2 = (yx.iter().chain(&yv).map(|c| c * c).sum::<f64>()) / (radius * radius);
                if r2 >= 1.0 {
                    return (0.0, vec![0.0; d], vec![0.0; d]);
                }
                let s = 1.0 - r2;
                let bump = (-1.0 / s).exp();
                // d bump / d y_k = bump * (-1/s^2) * 2 y_k / R^2
                let dbump = -bump * 2.0 / (s * s * radius * radius);
                let coords: Vec<(f64, u32)> = yx
                    .iter()
                    .zip(px)
                    .chain(yv.iter().zip(pv))
                    .map(|(&y, &p)| (y, p))
                    .collect();
                let poly: f64 = coords.iter().map(|&(y, p)| y.powi(p as i32)).product();
                let grad: Vec<f64> = (0..2 * d)
                    .map(|k| {
                        let (y, p) = coords[k];
                        let dpoly = if p == 0 {
                            0.0
                        } else {
                            p as f64
                                * y.powi(p as i32 - 1)
                                * coords
                                    .iter()
                                    .enumerate()
                                    .filter(|&(l, _)| l != k)
                                    .map(|(_, &(yl, pl))| yl.powi(pl as i32))
                                    .product::<f64>()
                        };
                        dpoly * bump + poly * dbump * y
                    })
                    .collect();
                (poly * bump, grad[..d].to_vec(), grad[d..].to_vec())
            }
        }
    }
}

/// A fixed battery of test functions in dimension `d`: constants, linear
/// functions, and polynomial bumps centred at `centre`.
pub fn standard_battery(d: usize, centre_x: &[f64], centre_v: &[f64], radius: f64) -> Vec<TestFunction> {
    let mut out = vec![TestFunction::Constant(1.0)];
    for k in 0..d {
        let mut b = vec![0.0; d];
        b[k] = 1.0;
        out.push(TestFunction::Linear { a: vec![0.0; d], b });
    }
    let exps: [(u32, u32); 4] = [(0, 0), (1, 0), (0, 1), (2, 1)];
    for &(ex, ev) in &exps {
        out.push(TestFunction::PolyBump {
            cx: centre_x.to_vec(),
            cv: centre_v.to_vec(),
            radius,
            px: vec![ex; d],
            pv: vec![ev; d],
        });
    }
    out
}

/// Weak-form residual of the Vlasov equation along a sampled atomic
/// trajectory, for a time-independent test function:
/// `int_0^T <f, v . grad_x Phi + F(f) . grad_v Phi> dt - (<f(T), Phi> - <f(0), Phi>)`.
/// Time integration uses composite Simpson on uniform samples (trapezoid
/// otherwise). Returns the largest absolute residual over the battery.
pub fn vlasov_residual(traj: &MeasureTrajectory, battery: &[TestFunction], kernel: &CommKernel) -> f64 {
    let nt = traj.times.len();
    if nt < 2 {
        return 0.0;
    }
    let uniform = {
        let h = traj.times[1] - traj.times[0];
        traj.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.abs().max(1.0))
    };
    let mut worst = 0.0f64;
    for phi in battery {
        let integrand: Vec<f64> = traj
            .measures
            .iter()
            .map(|f| {
                let d = f.dim;
                let mut force = vec![0.0; d];
                (0..f.len())
                    .map(|a| {
                        let (_, gx, gv) = phi.eval(f.x(a), f.v(a));
                        kinetic_force(d, &f.xs, &f.vs, &f.weights, kernel, a, &mut force);
                        let transport: f64 = f.v(a).iter().zip(&gx).map(|(p, q)| p * q).sum();
                        let accel: f64 = force.iter().zip(&gv).map(|(p, q)| p * q).sum();
                        f.weights[a] * (transport + accel)
                    })
                    .sum::<f64>()
            })
            .collect();
        let integral = if uniform && (nt - 1) % 2 == 0 {
            let h = traj.times[1] - traj.times[0];
            let mut acc = integrand[0] + integrand[nt - 1];
            for (k, v) in integrand.iter().enumerate().take(nt - 1).skip(1) {
                acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            acc * h / 3.0
        } else {
            traj.times
                .windows(2)
                .zip(integrand.windows(2))
                .map(|(t, g)| 0.5 * (t[1] - t[0]) * (g[0] + g[1]))
                .sum()
        };
        let end = traj.measures[nt - 1].integrate(|x, v| phi.eval(x, v).0);
        let start = traj.measures[0].integrate(|x, v| phi.eval(x, v).0);
        worst = worst.max((integral - (end - start)).abs());
    }
    worst
}
