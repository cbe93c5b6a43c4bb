//! Python bindings: kernels, particle ensembles and integration, two-body
//! sticking, the d1 distance, the torus solver and the coupled line runs.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use singular_cs::error::{LineError, MeanFieldError, ParticleError, TorusError};
use singular_cs::hydro_line::{self, BoundaryCondition, LineCase, LineGrid};
use singular_cs::hydro_torus::{self, PeriodicField1D, TorusSolver, TorusState};
use singular_cs::kernels::CommKernel;
use singular_cs::meanfield::{self, AtomicMeasure};
use singular_cs::particles::{self, IntegrationOptions, ParticleEnsemble, SampleTimes, System};
use singular_cs::{diagnostics, KernelError};

create_exception!(singular_cs_py, SimulationError, PyException);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn sim_err(e: impl std::fmt::Display) -> PyErr {
    SimulationError::new_err(e.to_string())
}

fn particle_err(e: ParticleError) -> PyErr {
    match e {
        ParticleError::InvalidEnsemble(_) | ParticleError::InvalidParams(_) | ParticleError::Kernel(_) => value_err(e),
        _ => sim_err(e),
    }
}

fn torus_err(e: TorusError) -> PyErr {
    match e {
        TorusError::InvalidField(_) => value_err(e),
        _ => sim_err(e),
    }
}

fn line_err(e: LineError) -> PyErr {
    match e {
        LineError::Invalid(_) => value_err(e),
        _ => sim_err(e),
    }
}

fn measure_err(e: MeanFieldError) -> PyErr {
    match e {
        MeanFieldError::InvalidMeasure(_) => value_err(e),
        _ => sim_err(e),
    }
}

/// Communication weight `s^-alpha` (singular) or `(1 + s)^-alpha` (regular).
#[pyclass(name = "Kernel", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyKernel {
    inner: CommKernel,
}

#[pymethods]
impl PyKernel {
    #[staticmethod]
    fn singular(alpha: f64) -> PyResult<Self> {
        CommKernel::singular(alpha).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn regular(alpha: f64) -> PyResult<Self> {
        CommKernel::regular(alpha).map(|inner| Self { inner }).map_err(value_err)
    }

    fn __call__(&self, s: f64) -> PyResult<f64> {
        self.inner.eval(s).map_err(|e: KernelError| value_err(e))
    }

    #[getter]
    fn exponent(&self) -> f64 {
        self.inner.exponent()
    }

    #[getter]
    fn is_singular(&self) -> bool {
        self.inner.is_singular()
    }

    fn __repr__(&self) -> String {
        format!("Kernel({:?}, {})", self.inner.kind(), self.inner.exponent())
    }
}

fn rows(flat: &[f64], dim: usize) -> Vec<Vec<f64>> {
    flat.chunks(dim).map(<[f64]>::to_vec).collect()
}

/// Particles with positions, velocities, masses summing to one and class
/// labels (particles that have stuck together share a label).
#[pyclass(name = "Ensemble", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyEnsemble {
    inner: ParticleEnsemble,
}

#[pymethods]
impl PyEnsemble {
    #[new]
    #[pyo3(signature = (positions, velocities, masses=None))]
    fn new(positions: Vec<Vec<f64>>, velocities: Vec<Vec<f64>>, masses: Option<Vec<f64>>) -> PyResult<Self> {
        let dim = positions.first().map_or(0, Vec::len);
        let inner = match masses {
            Some(m) => ParticleEnsemble::new(dim, &positions, &velocities, &m),
            None => ParticleEnsemble::with_equal_masses(dim, &positions, &velocities),
        }
        .map_err(particle_err)?;
        Ok(Self { inner })
    }

    /// Uniform samples in `[-pos_half, pos_half]^d x [-vel_half, vel_half]^d`.
    #[staticmethod]
    #[pyo3(signature = (n, dim, pos_half=1.0, vel_half=1.0, seed=0))]
    fn random(n: usize, dim: usize, pos_half: f64, vel_half: f64, seed: u64) -> PyResult<Self> {
        if n == 0 || dim == 0 {
            return Err(value_err("n and dim must be positive"));
        }
        Ok(Self {
            inner: ParticleEnsemble::random_uniform(n, dim, pos_half, vel_half, seed),
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn positions(&self) -> Vec<Vec<f64>> {
        rows(self.inner.positions(), self.inner.dim())
    }

    #[getter]
    fn velocities(&self) -> Vec<Vec<f64>> {
        rows(self.inner.velocities(), self.inner.dim())
    }

    #[getter]
    fn masses(&self) -> Vec<f64> {
        self.inner.masses().to_vec()
    }

    #[getter]
    fn classes(&self) -> Vec<Vec<usize>> {
        self.inner.classes()
    }

    fn momentum(&self) -> Vec<f64> {
        self.inner.momentum()
    }

    fn kinetic_energy(&self) -> f64 {
        diagnostics::kinetic_energy(&self.inner)
    }

    /// `(position diameter, velocity diameter)`.
    fn diameters(&self) -> (f64, f64) {
        diagnostics::diameters(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Ensemble(n={}, dim={})", self.inner.len(), self.inner.dim())
    }
}

#[pyclass(name = "Trajectory", frozen)]
pub struct PyTrajectory {
    inner: particles::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times()
    }

    #[getter]
    fn states(&self) -> Vec<PyEnsemble> {
        self.inner
            .samples
            .iter()
            .map(|s| PyEnsemble { inner: s.state.clone() })
            .collect()
    }

    /// `(t, kind, members)` for every collision, sticking and merge.
    #[getter]
    fn events(&self) -> Vec<(f64, &'static str, Vec<usize>)> {
        self.inner
            .events
            .records()
            .iter()
            .map(|r| (r.time, r.kind.as_str(), r.members.clone()))
            .collect()
    }

    #[getter]
    fn steps_accepted(&self) -> usize {
        self.inner.steps_accepted
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }
}

/// Integrates the Cucker-Smale system to `t_end`, sampling `samples + 1`
/// equally spaced times.
#[pyfunction]
#[pyo3(signature = (ensemble, kernel, t_end, samples=100, max_steps=None))]
fn integrate_cs(
    py: Python<'_>,
    ensemble: &PyEnsemble,
    kernel: &PyKernel,
    t_end: f64,
    samples: usize,
    max_steps: Option<usize>,
) -> PyResult<PyTrajectory> {
    let mut opts = IntegrationOptions {
        samples: SampleTimes::Uniform(samples.max(1)),
        ..Default::default()
    };
    if let Some(m) = max_steps {
        opts.max_steps = m;
    }
    let system = System::Cs {
        kernel: kernel.inner.clone(),
    };
    let state = ensemble.inner.clone();
    let traj = py
        .detach(|| particles::integrate(&system, &state, t_end, &opts))
        .map_err(particle_err)?;
    Ok(PyTrajectory { inner: traj })
}

#[pyclass(name = "StickingOutcome", frozen, get_all)]
pub struct PyStickingOutcome {
    sticks: bool,
    collides: bool,
    t_event: Option<f64>,
    impact_speed: Option<f64>,
    limit_distance: Option<f64>,
    first_integral: f64,
}

#[pymethods]
impl PyStickingOutcome {
    fn __repr__(&self) -> String {
        let py_bool = |b: bool| if b { "True" } else { "False" };
        format!(
            "StickingOutcome(sticks={}, collides={}, t_event={}, first_integral={})",
            py_bool(self.sticks),
            py_bool(self.collides),
            self.t_event.map_or("None".to_string(), |t| t.to_string()),
            self.first_integral
        )
    }
}

/// Classifies the relative two-body motion from distance `x0 > 0` and
/// relative velocity `v0`, for `0 < alpha < 1`.
#[pyfunction]
fn two_particle_sticking(x0: f64, v0: f64, alpha: f64) -> PyResult<PyStickingOutcome> {
    let o = particles::two_particle_sticking(x0, v0, alpha).map_err(particle_err)?;
    Ok(PyStickingOutcome {
        sticks: o.sticks,
        collides: o.collides,
        t_event: o.t_event,
        impact_speed: o.impact_speed,
        limit_distance: o.limit_distance,
        first_integral: o.first_integral,
    })
}

fn measure(xs: Vec<Vec<f64>>, vs: Vec<Vec<f64>>, w: Option<Vec<f64>>) -> PyResult<AtomicMeasure> {
    let n = xs.len();
    let dim = xs.first().map_or(0, Vec::len);
    if xs.iter().chain(&vs).any(|p| p.len() != dim) {
        return Err(value_err("all points must have the same dimension"));
    }
    let w = w.unwrap_or_else(|| vec![1.0 / n.max(1) as f64; n]);
    AtomicMeasure::new(dim, xs.concat(), vs.concat(), w).map_err(measure_err)
}

/// Bounded-Lipschitz distance between two weighted atomic measures on
/// phase space. Weights default to uniform.
#[pyfunction]
#[pyo3(signature = (x1, v1, x2, v2, w1=None, w2=None))]
fn d1_distance(
    x1: Vec<Vec<f64>>,
    v1: Vec<Vec<f64>>,
    x2: Vec<Vec<f64>>,
    v2: Vec<Vec<f64>>,
    w1: Option<Vec<f64>>,
    w2: Option<Vec<f64>>,
) -> PyResult<f64> {
    let mu = measure(x1, v1, w1)?;
    let nu = measure(x2, v2, w2)?;
    meanfield::d1_distance(&mu, &nu).map_err(measure_err)
}

#[pyclass(name = "TorusSnapshot", frozen, get_all)]
pub struct PyTorusSnapshot {
    t: f64,
    rho: Vec<f64>,
    u: Vec<f64>,
    e: Vec<f64>,
}

fn torus_state(rho: Vec<f64>, u: Vec<f64>, gamma: f64) -> PyResult<TorusState> {
    let rho = PeriodicField1D::new(rho).map_err(torus_err)?;
    let u = PeriodicField1D::new(u).map_err(torus_err)?;
    TorusState::from_rho_u(&rho, &u, gamma).map_err(torus_err)
}

/// Evolves density and velocity samples on the periodic grid
/// `x_j = 2 pi j / n` and returns the state at each requested time. The
/// step defaults to the stability limit of the initial state.
#[pyfunction]
#[pyo3(signature = (rho, u, gamma, times, dt=None))]
fn torus_run(
    py: Python<'_>,
    rho: Vec<f64>,
    u: Vec<f64>,
    gamma: f64,
    times: Vec<f64>,
    dt: Option<f64>,
) -> PyResult<Vec<PyTorusSnapshot>> {
    let s0 = torus_state(rho, u, gamma)?;
    let solver = TorusSolver::new(s0.n());
    let dt = match dt {
        Some(dt) => dt,
        None => solver.stable_dt(&s0).map_err(torus_err)?,
    };
    let traj = py.detach(|| solver.run(&s0, dt, &times)).map_err(torus_err)?;
    traj.iter()
        .map(|s| {
            let u = solver.velocity(s).map_err(torus_err)?;
            Ok(PyTorusSnapshot {
                t: s.t,
                rho: s.rho.values().to_vec(),
                u,
                e: s.e.values().to_vec(),
            })
        })
        .collect()
}

/// Lower bound on the density for all time. `full_length=True` keeps the
/// torus length in the bound.
#[pyfunction]
#[pyo3(signature = (rho, u, gamma, full_length=false))]
fn torus_density_floor(rho: Vec<f64>, u: Vec<f64>, gamma: f64, full_length: bool) -> PyResult<f64> {
    let s = torus_state(rho, u, gamma)?;
    Ok(if full_length {
        hydro_torus::density_floor_full_length(&s)
    } else {
        hydro_torus::density_floor(&s)
    })
}

#[pyfunction]
fn periodic_kernel_infimum(gamma: f64) -> PyResult<f64> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(value_err(format!("gamma must lie in (0, 2), got {gamma}")));
    }
    Ok(hydro_torus::periodic_kernel_infimum(gamma))
}

#[pyclass(name = "LineSnapshot", frozen, get_all)]
pub struct PyLineSnapshot {
    t: f64,
    rho: Vec<f64>,
    u: Vec<f64>,
    rho_pm: Vec<f64>,
    linf_gap: f64,
}

#[pyclass(name = "LineRun", frozen, get_all)]
pub struct PyLineRun {
    c: f64,
    x: Vec<f64>,
    snapshots: Vec<Py<PyLineSnapshot>>,
    hminus1: Vec<(f64, f64)>,
    max_mass_drift: f64,
    min_rho: f64,
}

/// Navier-Stokes with viscosity `rho^2` against the porous-medium equation
/// on `[-half_width, half_width]`, from initial case 1 or 2 with `u0 = c rho0_x`.
#[pyfunction]
#[pyo3(signature = (case, c, times, half_width=20.0, dx=0.01, dt=0.01, record_every=1.0, bc="wall"))]
#[allow(clippy::too_many_arguments)]
fn line_run(
    py: Python<'_>,
    case: u32,
    c: f64,
    times: Vec<f64>,
    half_width: f64,
    dx: f64,
    dt: f64,
    record_every: f64,
    bc: &str,
) -> PyResult<PyLineRun> {
    let case = LineCase::from_index(case).map_err(line_err)?;
    let bc = match bc {
        "wall" => BoundaryCondition::ImpermeableWall,
        "neumann" => BoundaryCondition::NeumannZeroVelocityGradient,
        other => return Err(value_err(format!("bc must be 'wall' or 'neumann', got '{other}'"))),
    };
    let grid = LineGrid::with_spacing(half_width, dx).map_err(line_err)?.with_bc(bc);
    let run = py
        .detach(|| hydro_line::coupled_run(case, c, &grid, dt, &times, record_every))
        .map_err(line_err)?;
    let snapshots = run
        .snapshots
        .iter()
        .map(|s| {
            Py::new(
                py,
                PyLineSnapshot {
                    t: s.t,
                    rho: s.rho.values.clone(),
                    u: s.u.values.clone(),
                    rho_pm: s.rho_pm.values.clone(),
                    linf_gap: s.linf_gap(),
                },
            )
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok(PyLineRun {
        c: run.c,
        x: grid.centers(),
        snapshots,
        hminus1: run.hminus1,
        max_mass_drift: run.max_mass_drift,
        min_rho: run.min_rho,
    })
}

/// Self-similar porous-medium profile `t^(-1/3) (a - x^2 / (6 t^(2/3)))_+`.
#[pyfunction]
fn barenblatt(x: f64, t: f64, a: f64) -> f64 {
    hydro_line::barenblatt(x, t, a)
}

#[pymodule]
fn singular_cs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SimulationError", m.py().get_type::<SimulationError>())?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyStickingOutcome>()?;
    m.add_class::<PyTorusSnapshot>()?;
    m.add_class::<PyLineSnapshot>()?;
    m.add_class::<PyLineRun>()?;
    m.add_function(wrap_pyfunction!(integrate_cs, m)?)?;
    m.add_function(wrap_pyfunction!(two_particle_sticking, m)?)?;
    m.add_function(wrap_pyfunction!(d1_distance, m)?)?;
    m.add_function(wrap_pyfunction!(torus_run, m)?)?;
    m.add_function(wrap_pyfunction!(torus_density_floor, m)?)?;
    m.add_function(wrap_pyfunction!(periodic_kernel_infimum, m)?)?;
    m.add_function(wrap_pyfunction!(line_run, m)?)?;
    m.add_function(wrap_pyfunction!(barenblatt, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
