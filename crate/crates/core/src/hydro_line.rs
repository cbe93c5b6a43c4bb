//! Implicit finite-volume solvers on a truncated line `[-M, M]`:
//! pressureless Navier-Stokes with viscosity `rho^2`,
//!
//! `rho_t + (rho u)_x = 0`, `(rho u)_t + (rho u^2)_x - (rho^2 u_x)_x = 0`,
//!
//! and the porous medium equation `r_t = (r^2 / 2)_xx`. Both use implicit
//! Euler in time with Newton on block-tridiagonal systems. With the default
//! impermeable walls no mass crosses `x = -M, M`, so mass is conserved up to
//! the Newton residual.

use rayon::prelude::*;

use crate::error::LineError;

/// Newton stops once the max-norm residual falls below this value.
pub const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 40;
/// Added to `rho^2` in the viscosity coefficient only.
pub const VISCOSITY_FLOOR: f64 = 1e-14;
const MAX_HALVINGS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// `u = 0` on the walls: no mass or momentum crosses them, and the
    /// viscous stress uses the wall value. On the manifold `u = -rho_x` this
    /// is the zero-flux condition of the porous medium equation.
    ImpermeableWall,
    /// `u_x = 0` and `rho_x = 0`: boundary fluxes take the edge-cell values,
    /// so mass may leave or enter the domain.
    NeumannZeroVelocityGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineGrid {
    pub half_width: f64,
    pub n_cells: usize,
    pub dx: f64,
    pub bc: BoundaryCondition,
}

impl LineGrid {
    /// Grid with impermeable walls.
    pub fn new(half_width: f64, n_cells: usize) -> Result<Self, LineError> {
        if !(half_width > 0.0 && half_width.is_finite()) || n_cells < 3 {
            return Err(LineError::Invalid(format!(
                "need M > 0 and at least 3 cells, got M = {half_width}, n = {n_cells}"
            )));
        }
        Ok(Self {
            half_width,
            n_cells,
            dx: 2.0 * half_width / n_cells as f64,
            bc: BoundaryCondition::ImpermeableWall,
        })
    }

    pub fn with_bc(mut self, bc: BoundaryCondition) -> Self {
        self.bc = bc;
        self
    }

    /// Grid whose spacing is `dx` rounded to fit `[-M, M]` exactly.
    pub fn with_spacing(half_width: f64, dx: f64) -> Result<Self, LineError> {
        if !(dx > 0.0) {
            return Err(LineError::Invalid(format!("dx must be positive, got {dx}")));
        }
        Self::new(half_width, (2.0 * half_width / dx).round() as usize)
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.x(i)).collect()
    }

    pub fn field(&self, f: impl Fn(f64) -> f64) -> LineField1D {
        LineField1D {
            values: self.centers().into_iter().map(f).collect(),
            bc: self.bc,
        }
    }
}

/// Cell averages on a [`LineGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct LineField1D {
    pub values: Vec<f64>,
    pub bc: BoundaryCondition,
}

impl LineField1D {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            bc: BoundaryCondition::ImpermeableWall,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn integral(&self, dx: f64) -> f64 {
        self.values.iter().sum::<f64>() * dx
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineState {
    pub rho: LineField1D,
    pub u: LineField1D,
    pub time: f64,
}

/// The two initial densities `0.2/(1+x^2)` and
/// `0.2/(1+(x-10)^2) + 0.2/(1+(x+10)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineCase {
    One,
    Two,
}

impl LineCase {
    pub fn from_index(k: u32) -> Result<Self, LineError> {
        match k {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            _ => Err(LineError::Invalid(format!("case must be 1 or 2, got {k}"))),
        }
    }

    pub fn index(self) -> u32 {
        match self {
            Self::One => 1,
            Self::Two => 2,
        }
    }

    pub fn rho0(self, x: f64) -> f64 {
        let bump = |y: f64| 0.2 / (1.0 + y * y);
        match self {
            Self::One => bump(x),
            Self::Two => bump(x - 10.0) + bump(x + 10.0),
        }
    }

    /// Exact derivative of [`LineCase::rho0`].
    pub fn rho0_x(self, x: f64) -> f64 {
        let d = |y: f64| -0.4 * y / (1.0 + y * y).powi(2);
        match self {
            Self::One => d(x),
            Self::Two => d(x - 10.0) + d(x + 10.0),
        }
    }
}

/// Density and velocity `u0 = c rho0_x` sampled at cell centres.
pub fn initial_case(case: LineCase, c: f64, grid: &LineGrid) -> LineState {
    LineState {
        rho: grid.field(|x| case.rho0(x)),
        u: grid.field(|x| c * case.rho0_x(x)),
        time: 0.0,
    }
}

type Mat2 = [[f64; 2]; 2];
type Vec2 = [f64; 2];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn mat_vec(a: &Mat2, v: &Vec2) -> Vec2 {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn mat_inv(a: &Mat2) -> Option<Mat2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let s = 1.0 / det;
    Some([[a[1][1] * s, -a[0][1] * s], [-a[1][0] * s, a[0][0] * s]])
}

/// Solves `L_i z_{i-1} + D_i z_i + U_i z_{i+1} = r_i` in place of `r`.
fn block_thomas(lower: &[Mat2], diag: &mut [Mat2], upper: &[Mat2], r: &mut [Vec2]) -> Option<()> {
    let n = diag.len();
    let mut inv = Vec::with_capacity(n);
    inv.push(mat_inv(&diag[0])?);
    for i in 1..n {
        let w = mat_mul(&lower[i], &inv[i - 1]);
        let wu = mat_mul(&w, &upper[i - 1]);
        for a in 0..2 {
            for b in 0..2 {
                diag[i][a][b] -= wu[a][b];
            }
        }
        let wr = mat_vec(&w, &r[i - 1]);
        r[i][0] -= wr[0];
        r[i][1] -= wr[1];
        inv.push(mat_inv(&diag[i])?);
    }
    r[n - 1] = mat_vec(&inv[n - 1], &r[n - 1]);
    for i in (0..n - 1).rev() {
        let uz = mat_vec(&upper[i], &r[i + 1]);
        r[i] = mat_vec(&inv[i], &[r[i][0] - uz[0], r[i][1] - uz[1]]);
    }
    if r.iter().all(|v| v[0].is_finite() && v[1].is_finite()) {
        Some(())
    } else {
        None
    }
}

/// Scalar tridiagonal solve of `a_i z_{i-1} + b_i z_i + c_i z_{i+1} = r_i`.
fn thomas(a: &[f64], b: &mut [f64], c: &[f64], r: &mut [f64]) -> Option<()> {
    let n = b.len();
    for i in 1..n {
        if b[i - 1] == 0.0 {
            return None;
        }
        let w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        r[i] -= w * r[i - 1];
    }
    r[n - 1] /= b[n - 1];
    for i in (0..n - 1).rev() {
        r[i] = (r[i] - c[i] * r[i + 1]) / b[i];
    }
    if r.iter().all(|v| v.is_finite()) {
        Some(())
    } else {
        None
    }
}

/// Flux pair at one interior face and its partial derivatives with respect
/// to `(rho_L, u_L)` and `(rho_R, u_R)`; rows are (mass, momentum).
struct Face {
    flux: Vec2,
    d_left: Mat2,
    d_right: Mat2,
}

fn ns_face(rl: f64, ul: f64, rr: f64, ur: f64, dx: f64) -> Face {
    let a = 0.5 * (ul + ur);
    let (ap, am) = (a.max(0.0), a.min(0.0));
    let up = a > 0.0;
    let (r_up, m_up) = if up { (rl, rl * ul) } else { (rr, rr * ur) };
    let f = ap * rl + am * rr;
    let g_conv = ap * rl * ul + am * rr * ur;
    let rbar = 0.5 * (rl + rr);
    let mu = rbar * rbar + VISCOSITY_FLOOR;
    let grad = (ur - ul) / dx;
    let g = g_conv - mu * grad;
    let dmu = -rbar * grad;
    Face {
        flux: [f, g],
        d_left: [[ap, 0.5 * r_up], [ap * ul + dmu, ap * rl + 0.5 * m_up + mu / dx]],
        d_right: [[am, 0.5 * r_up], [am * ur + dmu, am * rr + 0.5 * m_up - mu / dx]],
    }
}

struct NsSystem {
    res: Vec<Vec2>,
    lower: Vec<Mat2>,
    diag: Vec<Mat2>,
    upper: Vec<Mat2>,
}

fn ns_assemble(
    rho: &[f64],
    u: &[f64],
    rho_old: &[f64],
    mom_old: &[f64],
    lam: f64,
    dx: f64,
    bc: BoundaryCondition,
) -> NsSystem {
    let n = rho.len();
    let mut sys = NsSystem {
        res: (0..n)
            .map(|i| [rho[i] - rho_old[i], rho[i] * u[i] - mom_old[i]])
            .collect(),
        lower: vec![[[0.0; 2]; 2]; n],
        diag: (0..n).map(|i| [[1.0, 0.0], [u[i], rho[i]]]).collect(),
        upper: vec![[[0.0; 2]; 2]; n],
    };
    for i in 0..n - 1 {
        let face = ns_face(rho[i], u[i], rho[i + 1], u[i + 1], dx);
        for a in 0..2 {
            sys.res[i][a] += lam * face.flux[a];
            sys.res[i + 1][a] -= lam * face.flux[a];
            for b in 0..2 {
                sys.diag[i][a][b] += lam * face.d_left[a][b];
                sys.upper[i][a][b] += lam * face.d_right[a][b];
                sys.lower[i + 1][a][b] -= lam * face.d_left[a][b];
                sys.diag[i + 1][a][b] -= lam * face.d_right[a][b];
            }
        }
    }
    // (cell, sign): the right wall is an outgoing face, the left incoming
    for (i, sign) in [(n - 1, 1.0), (0, -1.0)] {
        match bc {
            BoundaryCondition::ImpermeableWall => {
                // stress -mu (u_wall - u_i) / (dx/2) across the half cell
                let mu = rho[i] * rho[i] + VISCOSITY_FLOOR;
                sys.res[i][1] += lam * 2.0 * mu * u[i] / dx;
                sys.diag[i][1][0] += lam * 4.0 * rho[i] * u[i] / dx;
                sys.diag[i][1][1] += lam * 2.0 * mu / dx;
            }
            BoundaryCondition::NeumannZeroVelocityGradient => {
                let face = ns_face(rho[i], u[i], rho[i], u[i], dx);
                for a in 0..2 {
                    sys.res[i][a] += sign * lam * face.flux[a];
                    for b in 0..2 {
                        sys.diag[i][a][b] += sign * lam * (face.d_left[a][b] + face.d_right[a][b]);
                    }
                }
            }
        }
    }
    sys
}

fn max_norm2(r: &[Vec2]) -> f64 {
    r.iter().fold(0.0f64, |m, v| m.max(v[0].abs()).max(v[1].abs()))
}

fn ns_newton(grid: &LineGrid, state: &LineState, dt: f64) -> Result<LineState, LineError> {
    let dx = grid.dx;
    let lam = dt / dx;
    let rho_old = &state.rho.values;
    let mom_old: Vec<f64> = rho_old.iter().zip(&state.u.values).map(|(r, u)| r * u).collect();
    let mut rho = rho_old.clone();
    let mut u = state.u.values.clone();
    let t = state.time + dt;
    let mut sys = ns_assemble(&rho, &u, rho_old, &mom_old, lam, dx, grid.bc);
    let mut norm = max_norm2(&sys.res);
    for _ in 0..NEWTON_MAX_ITER {
        if norm < NEWTON_TOL {
            return Ok(LineState {
                rho: LineField1D::new(rho),
                u: LineField1D::new(u),
                time: t,
            });
        }
        let mut delta: Vec<Vec2> = sys.res.iter().map(|r| [-r[0], -r[1]]).collect();
        block_thomas(&sys.lower, &mut sys.diag, &sys.upper, &mut delta)
            .ok_or(LineError::NewtonDivergence { t, residual: norm })?;
        // backtracking on the max-norm residual
        let mut step = 1.0;
        loop {
            let r_try: Vec<f64> = rho.iter().zip(&delta).map(|(r, d)| r + step * d[0]).collect();
            let u_try: Vec<f64> = u.iter().zip(&delta).map(|(v, d)| v + step * d[1]).collect();
            let trial = ns_assemble(&r_try, &u_try, rho_old, &mom_old, lam, dx, grid.bc);
            let n_try = max_norm2(&trial.res);
            if n_try < norm || step < 1e-3 {
                rho = r_try;
                u = u_try;
                sys = trial;
                norm = n_try;
                break;
            }
            step *= 0.5;
        }
        if !norm.is_finite() {
            break;
        }
    }
    if norm < NEWTON_TOL {
        return Ok(LineState {
            rho: LineField1D::new(rho),
            u: LineField1D::new(u),
            time: t,
        });
    }
    Err(LineError::NewtonDivergence { t, residual: norm })
}

/// One implicit Euler step of the Navier-Stokes system. On Newton failure
/// the step is split in halves, up to six times.
pub fn ns_step(grid: &LineGrid, state: &LineState, dt: f64) -> Result<LineState, LineError> {
    check_step(grid, state.rho.len(), dt)?;
    if state.u.len() != grid.n_cells {
        return Err(LineError::Invalid("velocity length does not match grid".into()));
    }
    let out = ns_halving(grid, state, dt, 0)?;
    let min_rho = out.rho.min();
    if min_rho < -1e-10 {
        return Err(LineError::NegativeDensity { t: out.time, min_rho });
    }
    Ok(out)
}

fn ns_halving(grid: &LineGrid, state: &LineState, dt: f64, depth: u32) -> Result<LineState, LineError> {
    match ns_newton(grid, state, dt) {
        Ok(s) => Ok(s),
        Err(e) if depth >= MAX_HALVINGS => Err(e),
        Err(_) => {
            let mid = ns_halving(grid, state, 0.5 * dt, depth + 1)?;
            let mut end = ns_halving(grid, &mid, 0.5 * dt, depth + 1)?;
            end.time = state.time + dt;
            Ok(end)
        }
    }
}

fn check_step(grid: &LineGrid, len: usize, dt: f64) -> Result<(), LineError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(LineError::Invalid(format!("dt must be positive, got {dt}")));
    }
    if len != grid.n_cells {
        return Err(LineError::Invalid("field length does not match grid".into()));
    }
    Ok(())
}

fn pm_residual(r: &[f64], old: &[f64], lam: f64) -> Vec<f64> {
    let n = r.len();
    let p = |i: usize| 0.5 * r[i] * r[i];
    (0..n)
        .map(|i| {
            let mut div = 0.0;
            if i + 1 < n {
                div += p(i + 1) - p(i);
            }
            if i > 0 {
                div -= p(i) - p(i - 1);
            }
            r[i] - old[i] - lam * div
        })
        .collect()
}

/// One implicit Euler step of `r_t = (r^2/2)_xx` with zero-flux boundaries.
pub fn pm_step(grid: &LineGrid, rho: &LineField1D, dt: f64) -> Result<LineField1D, LineError> {
    check_step(grid, rho.len(), dt)?;
    let n = grid.n_cells;
    let lam = dt / (grid.dx * grid.dx);
    let old = &rho.values;
    let mut r = old.clone();
    let mut res = pm_residual(&r, old, lam);
    let mut norm = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for _ in 0..NEWTON_MAX_ITER {
        if norm < NEWTON_TOL {
            break;
        }
        let mut a = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut b = vec![1.0; n];
        for i in 0..n {
            if i + 1 < n {
                b[i] += lam * r[i];
                c[i] = -lam * r[i + 1];
            }
            if i > 0 {
                b[i] += lam * r[i];
                a[i] = -lam * r[i - 1];
            }
        }
        let mut delta: Vec<f64> = res.iter().map(|v| -v).collect();
        thomas(&a, &mut b, &c, &mut delta).ok_or(LineError::NewtonDivergence {
            t: f64::NAN,
            residual: norm,
        })?;
        for (ri, d) in r.iter_mut().zip(&delta) {
            *ri += d;
        }
        res = pm_residual(&r, old, lam);
        norm = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    if !(norm < NEWTON_TOL) {
        return Err(LineError::NewtonDivergence {
            t: f64::NAN,
            residual: norm,
        });
    }
    Ok(LineField1D { values: r, bc: rho.bc })
}

/// `L^2` norm of the primitive `F(x) = int_{-M}^x (f - g)` sampled at cell
/// faces; requires equal masses to within `1e-8`.
pub fn hminus1_distance(f: &LineField1D, g: &LineField1D, dx: f64) -> Result<f64, LineError> {
    if f.len() != g.len() {
        return Err(LineError::Invalid("fields have different lengths".into()));
    }
    let mut prim = 0.0;
    let mut acc = 0.0;
    for (a, b) in f.values.iter().zip(&g.values) {
        prim += (a - b) * dx;
        acc += prim * prim;
    }
    if prim.abs() > 1e-8 {
        return Err(LineError::MassMismatch(prim));
    }
    Ok((acc * dx).sqrt())
}

/// Self-similar solution `t^(-1/3) (A - x^2 / (6 t^(2/3)))_+` of
/// `r_t = (r^2/2)_xx`.
pub fn barenblatt(x: f64, t: f64, a: f64) -> f64 {
    let s = t.powf(-1.0 / 3.0);
    s * (a - x * x * s * s / 6.0).max(0.0)
}

/// Cell averages of [`barenblatt`], exact including the cells cut by the
/// free boundary.
pub fn barenblatt_cells(grid: &LineGrid, t: f64, a: f64) -> LineField1D {
    let s = t.powf(-1.0 / 3.0);
    let edge = (6.0 * a).sqrt() / s;
    let anti = |x: f64| {
        let x = x.clamp(-edge, edge);
        s * (a * x - x * x * x * s * s / 18.0)
    };
    grid.field(|x| (anti(x + 0.5 * grid.dx) - anti(x - 0.5 * grid.dx)) / grid.dx)
}

pub fn barenblatt_mass(a: f64) -> f64 {
    4.0 / 3.0 * a * (6.0 * a).sqrt()
}

pub fn barenblatt_radius(t: f64, a: f64) -> f64 {
    (6.0 * a).sqrt() * t.powf(1.0 / 3.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub rho: LineField1D,
    pub u: LineField1D,
    pub rho_pm: LineField1D,
}

impl Snapshot {
    pub fn linf_gap(&self) -> f64 {
        self.rho
            .values
            .iter()
            .zip(&self.rho_pm.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Coupled Navier-Stokes and porous-medium run from one initial density.
#[derive(Debug, Clone, PartialEq)]
pub struct CRun {
    pub case: LineCase,
    pub c: f64,
    pub snapshots: Vec<Snapshot>,
    /// `(t, hminus1_distance(rho, rho_pm))` at every recorded time.
    pub hminus1: Vec<(f64, f64)>,
    pub max_mass_drift: f64,
    pub min_rho: f64,
}

impl CRun {
    /// Rows `t,x,rho,u,rho_pm` for every snapshot.
    pub fn profile_rows(&self, grid: &LineGrid) -> Vec<[f64; 5]> {
        let xs = grid.centers();
        let mut rows = Vec::new();
        for s in &self.snapshots {
            for (i, x) in xs.iter().enumerate() {
                rows.push([s.t, *x, s.rho.values[i], s.u.values[i], s.rho_pm.values[i]]);
            }
        }
        rows
    }

    /// Rows `c,t,h_minus1,linf_gap` at the snapshot times.
    pub fn summary_rows(&self, grid: &LineGrid) -> Vec<[f64; 4]> {
        self.snapshots
            .iter()
            .map(|s| {
                let h = hminus1_distance(&s.rho, &s.rho_pm, grid.dx).unwrap_or(f64::NAN);
                [self.c, s.t, h, s.linf_gap()]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub case: LineCase,
    pub c_list: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    pub grid: LineGrid,
    pub dt: f64,
    /// Spacing of the recorded `H^-1` series.
    pub record_every: f64,
}

impl SweepConfig {
    /// Default `c` values of the sweep.
    pub const STANDARD_C: [f64; 7] = [-0.1, -0.5, -0.9, -1.0, -1.1, -1.5, -1.9];

    /// Full experiment: `[-20, 20]`, `dx = dt = 0.01`, snapshots 0, 200, 400.
    pub fn standard(case: LineCase) -> Self {
        Self {
            case,
            c_list: Self::STANDARD_C.to_vec(),
            snapshot_times: vec![0.0, 200.0, 400.0],
            grid: LineGrid::with_spacing(20.0, 0.01).expect("valid grid"),
            dt: 0.01,
            record_every: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), LineError> {
        if self.c_list.is_empty() {
            return Err(LineError::Invalid("empty c list".into()));
        }
        if self.snapshot_times.is_empty() || self.snapshot_times.iter().any(|t| !(*t >= 0.0)) {
            return Err(LineError::Invalid("snapshot times must be non-negative".into()));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(LineError::Invalid("snapshot times must be sorted".into()));
        }
        if !(self.dt > 0.0) || !(self.record_every > 0.0) {
            return Err(LineError::Invalid("dt and record spacing must be positive".into()));
        }
        Ok(())
    }
}

/// Runs Navier-Stokes and the porous medium equation side by side with a
/// fixed step, stopping at each snapshot time.
pub fn coupled_run(case: LineCase, c: f64, grid: &LineGrid, dt: f64, snapshot_times: &[f64], record_every: f64) -> Result<CRun, LineError> {
    let s0 = initial_case(case, c, grid);
    let m0 = s0.rho.integral(grid.dx);
    let mut ns = s0.clone();
    let mut pm = s0.rho.clone();
    let mut run = CRun {
        case,
        c,
        snapshots: Vec::with_capacity(snapshot_times.len()),
        hminus1: vec![(0.0, 0.0)],
        max_mass_drift: 0.0,
        min_rho: s0.rho.min(),
    };
    let t_end = snapshot_times.iter().copied().fold(0.0, f64::max);
    let n_steps = (t_end / dt).round() as usize;
    let rec_stride = ((record_every / dt).round() as usize).max(1);
    let snap_steps: Vec<usize> = snapshot_times.iter().map(|t| (t / dt).round() as usize).collect();
    let mut next_snap = 0;
    for k in 0..=n_steps {
        if k > 0 {
            let t = k as f64 * dt;
            let h = t - ns.time;
            ns = ns_step(grid, &ns, h)?;
            ns.time = t;
            pm = pm_step(grid, &pm, h).map_err(|e| match e {
                LineError::NewtonDivergence { residual, .. } => LineError::NewtonDivergence { t, residual },
                other => other,
            })?;
            run.min_rho = run.min_rho.min(ns.rho.min()).min(pm.min());
            let drift = (ns.rho.integral(grid.dx) - m0).abs().max((pm.integral(grid.dx) - m0).abs());
            run.max_mass_drift = run.max_mass_drift.max(drift);
            if k % rec_stride == 0 {
                run.hminus1.push((t, hminus1_distance(&ns.rho, &pm, grid.dx)?));
            }
        }
        while next_snap < snap_steps.len() && snap_steps[next_snap] == k {
            run.snapshots.push(Snapshot {
                t: snapshot_times[next_snap],
                rho: ns.rho.clone(),
                u: ns.u.clone(),
                rho_pm: pm.clone(),
            });
            next_snap += 1;
        }
    }
    Ok(run)
}

/// One coupled run per `c`; a failing `c` is reported without stopping
/// the others. Runs execute on the current rayon pool.
pub fn c_sweep(cfg: &SweepConfig) -> Result<Vec<(f64, Result<CRun, LineError>)>, LineError> {
    cfg.validate()?;
    Ok(cfg
        .c_list
        .par_iter()
        .map(|&c| {
            (
                c,
                coupled_run(cfg.case, c, &cfg.grid, cfg.dt, &cfg.snapshot_times, cfg.record_every),
            )
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaRow {
    pub eta: f64,
    pub c: f64,
    /// `sup_t hminus1_distance(t) / sqrt(t)`.
    pub sup_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaStudy {
    pub rows: Vec<EtaRow>,
    /// Least-squares slope of `log sup_ratio` against `log eta`.
    pub slope: f64,
}

/// `||sqrt(rho0) rho0_x||_{L^2}` on the grid; `eta = |c + 1|` times this.
pub fn eta_unit(case: LineCase, grid: &LineGrid) -> f64 {
    (grid
        .centers()
        .iter()
        .map(|&x| case.rho0(x) * case.rho0_x(x).powi(2))
        .sum::<f64>()
        * grid.dx)
        .sqrt()
}

/// Runs Navier-Stokes with `c = -1 + fraction` for each fraction (so
/// `eta = fraction * eta_unit`) against one porous-medium run.
pub fn eta_rate_study(case: LineCase, fractions: &[f64], t_end: f64, grid: &LineGrid, dt: f64) -> Result<EtaStudy, LineError> {
    if fractions.len() < 2 || fractions.iter().any(|f| !(*f > 0.0)) {
        return Err(LineError::Invalid("need at least two positive eta fractions".into()));
    }
    let unit = eta_unit(case, grid);
    let rows: Result<Vec<EtaRow>, LineError> = fractions
        .par_iter()
        .map(|&frac| {
            let c = -1.0 + frac;
            let run = coupled_run(case, c, grid, dt, &[t_end], dt)?;
            let sup = run
                .hminus1
                .iter()
                .filter(|(t, _)| *t > 0.0)
                .map(|(t, d)| d / t.sqrt())
                .fold(0.0, f64::max);
            Ok(EtaRow {
                eta: frac * unit,
                c,
                sup_ratio: sup,
            })
        })
        .collect();
    let rows = rows?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eta.ln(), r.sup_ratio.ln())).collect();
    Ok(EtaStudy {
        slope: ls_slope(&pts),
        rows,
    })
}

pub(crate) fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `L^1` error against the Barenblatt solution after advancing its cell
/// averages from `t0` to `t1`, for each spacing. Returns `(dx, error)`.
pub fn barenblatt_study(half_width: f64, a: f64, t0: f64, t1: f64, spacings: &[f64]) -> Result<Vec<(f64, f64)>, LineError> {
    spacings
        .par_iter()
        .map(|&dx| {
            let grid = LineGrid::with_spacing(half_width, dx)?;
            let dt = dx;
            let n = ((t1 - t0) / dt).round() as usize;
            let mut r = barenblatt_cells(&grid, t0, a);
            for _ in 0..n {
                r = pm_step(&grid, &r, dt)?;
            }
            let exact = barenblatt_cells(&grid, t0 + n as f64 * dt, a);
            let err: f64 = r.values.iter().zip(&exact.values).map(|(p, q)| (p - q).abs()).sum::<f64>() * grid.dx;
            Ok((grid.dx, err))
        })
        .collect()
}
