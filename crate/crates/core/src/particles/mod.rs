//! Singular Cucker-Smale particle systems.
//!
//! Three right-hand sides share one state type: the plain alignment system
//! with arbitrary masses, the alignment system with a bonding force, and the
//! alignment system with a decentralized pattern control. Merged (stuck)
//! particles are tracked as classes; interactions inside a class are
//! excluded from every sum.

mod integrate;
mod sticking;

pub use integrate::{
    integrate, EventKind, EventLog, EventRecord, IntegrationOptions, SampleTimes, System,
    Trajectory, TrajectorySample,
};
pub use sticking::{integrate_relative, two_particle_sticking, RelativePath, StickingOutcome};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ParticleError;
use crate::kernels::CommKernel;

/// Inter-class distance below which singular kernels refuse to evaluate.
pub const HARD_DISTANCE_FLOOR: f64 = 1e-13;

const MASS_SUM_TOL: f64 = 1e-12;

/// Positions, velocities and masses of `N` agents in `R^d`, plus the
/// partition into merged classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    positions: Vec<f64>,
    velocities: Vec<f64>,
    masses: Vec<f64>,
    /// Class label of each particle: the smallest index in its class.
    class_of: Vec<usize>,
}

impl ParticleEnsemble {
    /// Builds an ensemble from per-particle vectors. Masses must be positive
    /// and sum to one.
    pub fn new(
        dim: usize,
        positions: &[Vec<f64>],
        velocities: &[Vec<f64>],
        masses: &[f64],
    ) -> Result<Self, ParticleError> {
        let n = positions.len();
        if velocities.len() != n || masses.len() != n {
            return Err(ParticleError::InvalidEnsemble(format!(
                "length mismatch: {} positions, {} velocities, {} masses",
                n,
                velocities.len(),
                masses.len()
            )));
        }
        if positions.iter().chain(velocities).any(|p| p.len() != dim) {
            return Err(ParticleError::InvalidEnsemble(format!(
                "every vector must have dimension {dim}"
            )));
        }
        Self::from_flat(
            dim,
            positions.concat(),
            velocities.concat(),
            masses.to_vec(),
        )
    }

    /// Equal masses `1/N`.
    pub fn with_equal_masses(
        dim: usize,
        positions: &[Vec<f64>],
        velocities: &[Vec<f64>],
    ) -> Result<Self, ParticleError> {
        let n = positions.len();
        Self::new(dim, positions, velocities, &vec![1.0 / n as f64; n])
    }

    pub fn from_flat(
        dim: usize,
        positions: Vec<f64>,
        velocities: Vec<f64>,
        masses: Vec<f64>,
    ) -> Result<Self, ParticleError> {
        if dim == 0 {
            return Err(ParticleError::InvalidEnsemble("dimension must be >= 1".into()));
        }
        let n = masses.len();
        if n == 0 {
            return Err(ParticleError::InvalidEnsemble("ensemble is empty".into()));
        }
        if positions.len() != n * dim || velocities.len() != n * dim {
            return Err(ParticleError::InvalidEnsemble("flat buffer length mismatch".into()));
        }
        if masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(ParticleError::InvalidEnsemble("masses must be positive".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_SUM_TOL {
            return Err(ParticleError::InvalidEnsemble(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        if positions.iter().chain(&velocities).any(|x| !x.is_finite()) {
            return Err(ParticleError::InvalidEnsemble("non-finite coordinate".into()));
        }
        Ok(Self {
            dim,
            positions,
            velocities,
            masses,
            class_of: (0..n).collect(),
        })
    }

    /// `n` particles with equal masses drawn uniformly from boxes
    /// `[-pos_half, pos_half]^d` and `[-vel_half, vel_half]^d`.
    pub fn random_uniform(n: usize, dim: usize, pos_half: f64, vel_half: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions = (0..n * dim)
            .map(|_| rng.random_range(-pos_half..=pos_half))
            .collect();
        let velocities = (0..n * dim)
            .map(|_| rng.random_range(-vel_half..=vel_half))
            .collect();
        Self::from_flat(dim, positions, velocities, vec![1.0 / n as f64; n])
            .expect("generated ensemble is valid")
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn class_of(&self, i: usize) -> usize {
        self.class_of[i]
    }

    pub fn class_labels(&self) -> &[usize] {
        &self.class_of
    }

    pub fn same_class(&self, i: usize, j: usize) -> bool {
        self.class_of[i] == self.class_of[j]
    }

    /// Merged classes in order of their smallest member.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; self.len()];
        for i in 0..self.len() {
            let c = self.class_of[i];
            if slot[c] == usize::MAX {
                slot[c] = out.len();
                out.push(Vec::new());
            }
            out[slot[c]].push(i);
        }
        out
    }

    pub fn class_mass(&self, label: usize) -> f64 {
        (0..self.len())
            .filter(|&i| self.class_of[i] == label)
            .map(|i| self.masses[i])
            .sum()
    }

    /// `sum_i m_i v_i`.
    pub fn momentum(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        for i in 0..self.len() {
            for (pk, vk) in p.iter_mut().zip(self.velocity(i)) {
                *pk += self.masses[i] * vk;
            }
        }
        p
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Shifts to the frame with zero mass-weighted mean position and velocity.
    pub fn centered(&self) -> Self {
        let m = self.total_mass();
        let mut out = self.clone();
        for (field, src) in [(&mut out.positions, &self.positions), (&mut out.velocities, &self.velocities)] {
            for k in 0..self.dim {
                let mean: f64 = (0..self.len()).map(|i| self.masses[i] * src[i * self.dim + k]).sum::<f64>() / m;
                for i in 0..self.len() {
                    field[i * self.dim + k] -= mean;
                }
            }
        }
        out
    }

    /// Smallest distance between particles of distinct classes, with the
    /// achieving pair. `None` when everything is one class.
    pub fn min_interclass_distance(&self) -> Option<(f64, usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                if self.same_class(i, j) {
                    continue;
                }
                let d = dist(self.position(i), self.position(j));
                if best.is_none_or(|(b, _, _)| d < b) {
                    best = Some((d, i, j));
                }
            }
        }
        best
    }

    /// Packs positions then velocities into one state vector.
    pub fn to_state_vector(&self) -> Vec<f64> {
        let mut y = self.positions.clone();
        y.extend_from_slice(&self.velocities);
        y
    }

    /// Replaces positions and velocities from a packed state vector,
    /// keeping masses and classes.
    pub fn set_state_vector(&mut self, y: &[f64]) {
        let m = self.positions.len();
        self.positions.copy_from_slice(&y[..m]);
        self.velocities.copy_from_slice(&y[m..]);
    }
}

/// Bonding-force coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondingParams {
    pub k1: f64,
    pub k2: f64,
    pub k_tilde: f64,
    /// Target half-distance between bonded agents.
    pub radius: f64,
    /// Drop the radial relative-velocity term.
    pub simplified: bool,
}

impl BondingParams {
    pub fn validate(&self) -> Result<(), ParticleError> {
        if !(self.radius > 0.0) {
            return Err(ParticleError::InvalidParams("bonding radius must be > 0".into()));
        }
        if self.k1 < 0.0 || self.k2 < 0.0 || self.k_tilde < 0.0 {
            return Err(ParticleError::InvalidParams(
                "bonding coefficients must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Decentralized pattern control: agent `i` steers toward
/// `x_{i-1} - z_{i-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlParams {
    pub k: f64,
    pub beta: f64,
    /// `N - 1` offsets, each of the ensemble's dimension.
    pub offsets: Vec<Vec<f64>>,
}

impl ControlParams {
    /// Offsets that make `pattern` (one point per agent) an equilibrium:
    /// `z_k = p_k - p_{k+1}`.
    pub fn from_pattern(k: f64, beta: f64, pattern: &[Vec<f64>]) -> Self {
        Self {
            k,
            beta,
            offsets: pattern
                .windows(2)
                .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect())
                .collect(),
        }
    }

    pub fn validate(&self, state: &ParticleEnsemble) -> Result<(), ParticleError> {
        if self.k < 0.0 {
            return Err(ParticleError::InvalidParams("control coupling must be >= 0".into()));
        }
        if !(self.beta > 0.0) {
            return Err(ParticleError::InvalidParams("beta must be > 0".into()));
        }
        if self.offsets.len() + 1 != state.len() {
            return Err(ParticleError::InvalidParams(format!(
                "expected {} offsets, got {}",
                state.len() - 1,
                self.offsets.len()
            )));
        }
        if self.offsets.iter().any(|z| z.len() != state.dim()) {
            return Err(ParticleError::InvalidParams("offset dimension mismatch".into()));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Distance check shared by all right-hand sides. Strongly singular weights
/// refuse (near) coincident points of distinct classes; integrable ones are
/// evaluated at the floor distance instead, since a collision is a single
/// instant the integrator steps across.
#[inline]
fn checked_weight(
    kernel: &CommKernel,
    d: f64,
    i: usize,
    j: usize,
    t: f64,
) -> Result<f64, ParticleError> {
    if kernel.is_singular() && !(d >= HARD_DISTANCE_FLOOR) {
        if !kernel.is_strongly_singular() && !d.is_nan() {
            return Ok(kernel.eval_unchecked(HARD_DISTANCE_FLOOR));
        }
        return Err(ParticleError::SingularOverlap {
            i,
            j,
            distance: d,
            t,
        });
    }
    Ok(kernel.eval_unchecked(d))
}

/// Alignment accelerations `sum_{j not in class(i)} w_j (v_j - v_i) psi(|x_i - x_j|)`
/// accumulated into `dv` with per-partner weights `w_j`.
///
/// Sums run over `j` in increasing order for every `i`, so members of the
/// same class receive bitwise identical accelerations.
#[allow(clippy::too_many_arguments)]
fn add_alignment(
    dim: usize,
    x: &[f64],
    v: &[f64],
    weights: &[f64],
    class_of: &[usize],
    kernel: &CommKernel,
    coeff: f64,
    t: f64,
    dv: &mut [f64],
) -> Result<(), ParticleError> {
    let n = weights.len();
    for i in 0..n {
        let xi = &x[i * dim..(i + 1) * dim];
        let vi = &v[i * dim..(i + 1) * dim];
        for j in 0..n {
            if class_of[i] == class_of[j] {
                continue;
            }
            let xj = &x[j * dim..(j + 1) * dim];
            let vj = &v[j * dim..(j + 1) * dim];
            let w = coeff * weights[j] * checked_weight(kernel, dist(xi, xj), i, j, t)?;
            for k in 0..dim {
                dv[i * dim + k] += w * (vj[k] - vi[k]);
            }
        }
    }
    Ok(())
}

/// Accelerations of the mass-weighted alignment system on raw buffers.
pub(crate) fn cs_accel(
    dim: usize,
    x: &[f64],
    v: &[f64],
    masses: &[f64],
    class_of: &[usize],
    kernel: &CommKernel,
    t: f64,
    dv: &mut [f64],
) -> Result<(), ParticleError> {
    dv.iter_mut().for_each(|a| *a = 0.0);
    add_alignment(dim, x, v, masses, class_of, kernel, 1.0, t, dv)
}

pub(crate) fn bonding_accel(
    dim: usize,
    x: &[f64],
    v: &[f64],
    class_of: &[usize],
    kernel: &CommKernel,
    p: &BondingParams,
    t: f64,
    dv: &mut [f64],
) -> Result<(), ParticleError> {
    let n = class_of.len();
    let inv_n = 1.0 / n as f64;
    dv.iter_mut().for_each(|a| *a = 0.0);
    let uniform = vec![1.0; n];
    add_alignment(dim, x, v, &uniform, class_of, kernel, p.k1 * inv_n, t, dv)?;
    for i in 0..n {
        let xi = &x[i * dim..(i + 1) * dim];
        let vi = &v[i * dim..(i + 1) * dim];
        for j in 0..n {
            if class_of[i] == class_of[j] {
                continue;
            }
            let xj = &x[j * dim..(j + 1) * dim];
            let vj = &v[j * dim..(j + 1) * dim];
            let d = dist(xi, xj);
            if !(d >= HARD_DISTANCE_FLOOR) {
                return Err(ParticleError::SingularOverlap {
                    i,
                    j,
                    distance: d,
                    t,
                });
            }
            // (v_i - v_j).(x_i - x_j) / (2 |x_i - x_j|^2)
            let radial = if p.simplified {
                0.0
            } else {
                let dot: f64 = (0..dim).map(|k| (vi[k] - vj[k]) * (xi[k] - xj[k])).sum();
                p.k_tilde * inv_n * dot / (2.0 * d * d)
            };
            let spring = p.k2 * inv_n * (d - 2.0 * p.radius) / (2.0 * d);
            for k in 0..dim {
                dv[i * dim + k] += (radial + spring) * (xj[k] - xi[k]);
            }
        }
    }
    Ok(())
}

pub(crate) fn control_accel(
    dim: usize,
    x: &[f64],
    v: &[f64],
    class_of: &[usize],
    kernel: &CommKernel,
    p: &ControlParams,
    phi: &CommKernel,
    t: f64,
    dv: &mut [f64],
) -> Result<(), ParticleError> {
    let n = class_of.len();
    dv.iter_mut().for_each(|a| *a = 0.0);
    let uniform = vec![1.0; n];
    add_alignment(dim, x, v, &uniform, class_of, kernel, p.k / n as f64, t, dv)?;
    // g_k = phi(|y_k|^2) y_k with y_k = x_k - x_{k+1} - z_k;  u_i = g_{i-1} - g_i
    let mut y = vec![0.0; dim];
    for (kk, z) in p.offsets.iter().enumerate() {
        for c in 0..dim {
            y[c] = x[kk * dim + c] - x[(kk + 1) * dim + c] - z[c];
        }
        let sq: f64 = y.iter().map(|a| a * a).sum();
        let w = phi.eval_unchecked(sq);
        for c in 0..dim {
            let g = w * y[c];
            dv[kk * dim + c] -= g;
            dv[(kk + 1) * dim + c] += g;
        }
    }
    Ok(())
}

/// Right-hand side of the alignment system with the ensemble's masses:
/// returns `(dx, dv)` with `dx_i = v_i`.
pub fn cs_rhs(
    state: &ParticleEnsemble,
    kernel: &CommKernel,
) -> Result<(Vec<f64>, Vec<f64>), ParticleError> {
    let mut dv = vec![0.0; state.velocities.len()];
    cs_accel(
        state.dim,
        &state.positions,
        &state.velocities,
        &state.masses,
        &state.class_of,
        kernel,
        0.0,
        &mut dv,
    )?;
    Ok((state.velocities.clone(), dv))
}

/// Right-hand side with bonding force (uniform `1/N` averaging).
pub fn bonding_rhs(
    state: &ParticleEnsemble,
    kernel: &CommKernel,
    p: &BondingParams,
) -> Result<(Vec<f64>, Vec<f64>), ParticleError> {
    p.validate()?;
    let mut dv = vec![0.0; state.velocities.len()];
    bonding_accel(
        state.dim,
        &state.positions,
        &state.velocities,
        &state.class_of,
        kernel,
        p,
        0.0,
        &mut dv,
    )?;
    Ok((state.velocities.clone(), dv))
}

/// Right-hand side with decentralized pattern control.
pub fn control_rhs(
    state: &ParticleEnsemble,
    kernel: &CommKernel,
    p: &ControlParams,
) -> Result<(Vec<f64>, Vec<f64>), ParticleError> {
    p.validate(state)?;
    let phi = CommKernel::control_phi(p.beta)?;
    let mut dv = vec![0.0; state.velocities.len()];
    control_accel(
        state.dim,
        &state.positions,
        &state.velocities,
        &state.class_of,
        kernel,
        p,
        &phi,
        0.0,
        &mut dv,
    )?;
    Ok((state.velocities.clone(), dv))
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Merges stuck pairs into classes. Every member of a resulting class gets
/// the class's mass-weighted mean position and velocity, so total mass and
/// momentum are unchanged.
pub fn merge_stuck(
    state: &ParticleEnsemble,
    pairs: &[(usize, usize)],
    tol_x: f64,
    tol_v: f64,
) -> Result<ParticleEnsemble, ParticleError> {
    let n = state.len();
    for &(i, j) in pairs {
        if i >= n || j >= n {
            return Err(ParticleError::InvalidParams(format!("pair ({i}, {j}) out of range")));
        }
        let dx = dist(state.position(i), state.position(j));
        let dv = dist(state.velocity(i), state.velocity(j));
        if dx > tol_x || dv > tol_v {
            return Err(ParticleError::PairNotStuck { i, j, dx, dv });
        }
    }
    let mut uf = UnionFind((0..n).collect());
    for i in 0..n {
        uf.union(i, state.class_of[i]);
    }
    for &(i, j) in pairs {
        uf.union(i, j);
    }
    let labels: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();

    let mut out = state.clone();
    let d = state.dim;
    let mut mass = vec![0.0; n];
    let mut px = vec![0.0; n * d];
    let mut pv = vec![0.0; n * d];
    for i in 0..n {
        let c = labels[i];
        mass[c] += state.masses[i];
        for k in 0..d {
            px[c * d + k] += state.masses[i] * state.position(i)[k];
            pv[c * d + k] += state.masses[i] * state.velocity(i)[k];
        }
    }
    for i in 0..n {
        let c = labels[i];
        for k in 0..d {
            out.positions[i * d + k] = px[c * d + k] / mass[c];
            out.velocities[i * d + k] = pv[c * d + k] / mass[c];
        }
    }
    out.class_of = labels;
    Ok(out)
}
