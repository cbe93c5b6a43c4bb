//! Subcommand arguments and their runners.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use singular_cs::diagnostics::{
    check_bonding_asymptotics, check_conditional_flocking, check_control_pattern, check_unconditional_flocking,
    diameters, kinetic_energy, min_pair_distance, FlockReport,
};
use singular_cs::hydro_line::{coupled_run, BoundaryCondition, LineCase, LineGrid};
use singular_cs::hydro_torus::{
    density_floor, density_floor_full_length, q_transport_check, TorusInitial, TorusSolver,
};
use singular_cs::kernels::CommKernel;
use singular_cs::meanfield::{meanfield_convergence, InitialDistribution, Sampling};
use singular_cs::particles::{
    integrate, integrate_relative, two_particle_sticking, BondingParams, ControlParams, EventKind, IntegrationOptions,
    ParticleEnsemble, SampleTimes, System, Trajectory,
};
use singular_cs::DiagnosticsError;

use crate::error::{invalid, CliError};
use crate::output::{num, RunDir};
use crate::plot::{render, Panel, Series};

#[derive(Parser, Debug)]
#[command(name = "scs", version, about = "Singular Cucker-Smale experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Cucker-Smale particle system from random initial data.
    Particles(ParticlesArgs),
    /// Two-body sticking classification and relative path.
    Sticking(StickingArgs),
    /// Particles with the bonding force.
    Bonding(BondingArgs),
    /// Decentralized pattern control.
    Control(ControlArgs),
    /// Mean-field convergence table in the d1 distance.
    Meanfield(MeanfieldArgs),
    /// Fractional Euler alignment on the torus.
    HydroTorus(TorusArgs),
    /// Navier-Stokes against porous medium on the line, one run per c.
    HydroLine(LineArgs),
    /// Flocking checks over a grid of alphas and seeds.
    Sweep(SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Particles(_) => "particles",
            Command::Sticking(_) => "sticking",
            Command::Bonding(_) => "bonding",
            Command::Control(_) => "control",
            Command::Meanfield(_) => "meanfield",
            Command::HydroTorus(_) => "hydro-torus",
            Command::HydroLine(_) => "hydro-line",
            Command::Sweep(_) => "sweep",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Particles(a) => &a.common,
            Command::Sticking(a) => &a.common,
            Command::Bonding(a) => &a.common,
            Command::Control(a) => &a.common,
            Command::Meanfield(a) => &a.common,
            Command::HydroTorus(a) => &a.common,
            Command::HydroLine(a) => &a.common,
            Command::Sweep(a) => &a.common,
        }
    }

    /// Hash of every setting except the output directory.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        let common = match &mut c {
            Command::Particles(a) => &mut a.common,
            Command::Sticking(a) => &mut a.common,
            Command::Bonding(a) => &mut a.common,
            Command::Control(a) => &mut a.common,
            Command::Meanfield(a) => &mut a.common,
            Command::HydroTorus(a) => &mut a.common,
            Command::HydroLine(a) => &mut a.common,
            Command::Sweep(a) => &mut a.common,
        };
        common.out = PathBuf::new();
        hex::encode(Sha256::digest(format!("{c:?}").as_bytes()))
    }
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output root; files go to <out>/<subcommand>/<run-id>/.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelArg {
    Singular,
    Regular,
}

#[derive(Args, Debug, Clone)]
pub struct ParticlesArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = KernelArg::Singular)]
    pub kernel: KernelArg,
    #[arg(long, default_value_t = 20.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub pos_half: f64,
    #[arg(long, default_value_t = 1.0)]
    pub vel_half: f64,
}

#[derive(Args, Debug, Clone)]
pub struct StickingArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub x0: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub v0: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
}

#[derive(Args, Debug, Clone)]
pub struct BondingArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k_tilde: f64,
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    #[arg(long)]
    pub simplified: bool,
    #[arg(long, default_value_t = 100.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 2.0)]
    pub pos_half: f64,
    #[arg(long, default_value_t = 0.5)]
    pub vel_half: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternArg {
    /// Regular polygon with the given side length.
    Polygon,
    /// Equally spaced points on a line.
    Line,
}

#[derive(Args, Debug, Clone)]
pub struct ControlArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, value_enum, default_value_t = PatternArg::Polygon)]
    pub pattern: PatternArg,
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    #[arg(long, default_value_t = 100.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 2.0)]
    pub pos_half: f64,
    #[arg(long, default_value_t = 0.5)]
    pub vel_half: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingArg {
    Stratified,
    MonteCarlo,
}

#[derive(Args, Debug, Clone)]
pub struct MeanfieldArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, value_enum, default_value_t = SamplingArg::Stratified)]
    pub sampling: SamplingArg,
    #[arg(long, default_value_t = 1.0)]
    pub x_half: f64,
    #[arg(long, default_value_t = 0.5)]
    pub v_half: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum TorusIcArg {
    Constant,
    Single,
    Two,
}

#[derive(Args, Debug, Clone)]
pub struct TorusArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = TorusIcArg::Single)]
    pub ic: TorusIcArg,
    #[arg(long, default_value_t = 1.0)]
    pub rho0: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub amp: f64,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub amp2: f64,
    #[arg(long, default_value_t = 0.4, allow_hyphen_values = true)]
    pub phase: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub u0: f64,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub vel_amp: f64,
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    pub vel_amp2: f64,
    #[arg(long, default_value_t = 1)]
    pub mode: u32,
    #[arg(long, default_value_t = 5.0)]
    pub t_end: f64,
    /// Fixed step; defaults to `cfl` times the initial stability limit.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 0.4)]
    pub cfl: f64,
    #[arg(long, default_value_t = 5)]
    pub snapshots: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineBc {
    /// u = 0 at the wall, no mass flux.
    Wall,
    /// Zero velocity gradient; mass may leave the domain.
    Neumann,
}

#[derive(Args, Debug, Clone)]
pub struct LineArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1)]
    pub case: u32,
    /// Comma-separated list of c values.
    #[arg(long, value_delimiter = ',', num_args = 0.., allow_hyphen_values = true, required = true)]
    pub c: Vec<f64>,
    #[arg(long, default_value_t = 400.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dx: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 20.0)]
    pub half_width: f64,
    /// Boundary treatment at x = +-half_width.
    #[arg(long, value_enum, default_value_t = LineBc::Wall)]
    pub bc: LineBc,
    /// Snapshot times; defaults to 0, t_end/2, t_end.
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Vec<f64>,
    /// Spacing of the recorded H^-1 series.
    #[arg(long, default_value_t = 1.0)]
    pub record_every: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5")]
    pub alphas: Vec<f64>,
    /// Seeds `seed .. seed + seeds`.
    #[arg(long, default_value_t = 4)]
    pub seeds: u64,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 20.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Step budget per cell; cells exceeding it are marked failed.
    #[arg(long, default_value_t = 5_000_000)]
    pub max_steps: usize,
}

/// Result of a run that did not hit a configuration error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    PartialFailure(usize),
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::PartialFailure(_) => 3,
        }
    }
}

fn check_pos(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

fn check_count(name: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be >= {min}, got {v}")))
    }
}

pub fn run(cmd: &Command) -> Result<Outcome, CliError> {
    let hash = cmd.config_hash();
    let common = cmd.common();
    let run_id = format!("{}-{}", cmd.name(), &hash[..12]);
    match cmd {
        Command::Particles(a) => validate_particles(a)?,
        Command::Sticking(a) => {
            check_pos("x0", a.x0)?;
            check_pos("t-end", a.t_end)?;
            if !(a.alpha > 0.0 && a.alpha < 1.0) {
                return Err(invalid(format!("sticking needs alpha in (0, 1), got {}", a.alpha)));
            }
            if !a.v0.is_finite() {
                return Err(invalid("v0 must be finite"));
            }
        }
        Command::Bonding(a) => {
            check_count("n", a.n, 2)?;
            check_count("dim", a.dim, 1)?;
            check_pos("alpha", a.alpha)?;
            check_pos("radius", a.radius)?;
            check_pos("t-end", a.t_end)?;
            check_count("samples", a.samples, 1)?;
            if a.k1 < 0.0 || a.k2 < 0.0 || a.k_tilde < 0.0 {
                return Err(invalid("bonding coefficients must be non-negative"));
            }
        }
        Command::Control(a) => {
            check_count("n", a.n, 2)?;
            check_count("dim", a.dim, 1)?;
            check_pos("alpha", a.alpha)?;
            check_pos("beta", a.beta)?;
            check_pos("spacing", a.spacing)?;
            check_pos("t-end", a.t_end)?;
            check_count("samples", a.samples, 1)?;
            if a.pattern == PatternArg::Polygon && a.dim < 2 {
                return Err(invalid("polygon pattern needs dim >= 2"));
            }
        }
        Command::Meanfield(a) => {
            check_pos("alpha", a.alpha)?;
            check_count("dim", a.dim, 1)?;
            if a.dim > 3 {
                return Err(invalid("meanfield supports dim <= 3"));
            }
            check_pos("t-end", a.t_end)?;
            check_pos("x-half", a.x_half)?;
            check_pos("v-half", a.v_half)?;
            if a.n_list.is_empty() || a.n_list.contains(&0) || a.n_list.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("n-list must be non-empty, positive and increasing"));
            }
        }
        Command::HydroTorus(a) => {
            if !(a.gamma > 0.0 && a.gamma < 2.0) {
                return Err(invalid(format!("gamma must lie in (0, 2), got {}", a.gamma)));
            }
            if a.n < 16 || !a.n.is_power_of_two() {
                return Err(invalid(format!("n must be a power of two >= 16, got {}", a.n)));
            }
            check_pos("t-end", a.t_end)?;
            check_pos("cfl", a.cfl)?;
            check_count("snapshots", a.snapshots, 1)?;
            if let Some(dt) = a.dt {
                check_pos("dt", dt)?;
            }
        }
        Command::HydroLine(a) => {
            if a.c.is_empty() {
                return Err(invalid("c list is empty"));
            }
            LineCase::from_index(a.case).map_err(|e| invalid(e.to_string()))?;
            check_pos("t-end", a.t_end)?;
            check_pos("dx", a.dx)?;
            check_pos("dt", a.dt)?;
            check_pos("half-width", a.half_width)?;
            check_pos("record-every", a.record_every)?;
            if a.c.iter().any(|c| !c.is_finite()) {
                return Err(invalid("c values must be finite"));
            }
            if a.snapshots.iter().any(|t| !(*t >= 0.0 && *t <= a.t_end)) {
                return Err(invalid("snapshot times must lie in [0, t-end]"));
            }
        }
        Command::Sweep(a) => {
            if a.alphas.is_empty() || a.alphas.iter().any(|x| !(*x > 0.0)) {
                return Err(invalid("alphas must be a non-empty list of positive values"));
            }
            check_count("seeds", a.seeds as usize, 1)?;
            check_count("n", a.n, 2)?;
            check_count("dim", a.dim, 1)?;
            check_pos("t-end", a.t_end)?;
            check_count("samples", a.samples, 1)?;
        }
    }
    let mut dir = RunDir::create(&common.out, cmd.name(), &run_id)?;
    dir.set("tool", "scs");
    dir.set("tool_version", env!("CARGO_PKG_VERSION"));
    dir.set("subcommand", cmd.name());
    dir.set("run_id", &run_id);
    dir.set("config_hash", &hash);
    dir.set("seed", common.seed.map_or("none".to_string(), |s| s.to_string()));
    dir.set("config", format!("{cmd:?}").replace('\n', " "));
    let result = match cmd {
        Command::Particles(a) => particles(a, &mut dir),
        Command::Sticking(a) => sticking(a, &mut dir),
        Command::Bonding(a) => bonding(a, &mut dir),
        Command::Control(a) => control(a, &mut dir),
        Command::Meanfield(a) => meanfield(a, &mut dir),
        Command::HydroTorus(a) => hydro_torus(a, &mut dir),
        Command::HydroLine(a) => hydro_line(a, &mut dir),
        Command::Sweep(a) => sweep(a, &mut dir),
    };
    if let Err(e) = &result {
        dir.set("error", e);
    }
    dir.write_manifest()?;
    result?;
    Ok(match dir.failures() {
        0 => Outcome::Success,
        k => Outcome::PartialFailure(k),
    })
}

fn validate_particles(a: &ParticlesArgs) -> Result<(), CliError> {
    check_count("n", a.n, 1)?;
    check_count("dim", a.dim, 1)?;
    check_pos("alpha", a.alpha)?;
    check_pos("t-end", a.t_end)?;
    check_count("samples", a.samples, 1)?;
    check_pos("pos-half", a.pos_half)?;
    if !(a.vel_half >= 0.0) {
        return Err(invalid("vel-half must be >= 0"));
    }
    Ok(())
}

fn kernel_of(kind: KernelArg, alpha: f64) -> Result<CommKernel, CliError> {
    match kind {
        KernelArg::Singular => CommKernel::singular(alpha),
        KernelArg::Regular => CommKernel::regular(alpha),
    }
    .map_err(|e| invalid(e.to_string()))
}

fn header_xv(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "particle", "class", "mass"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=dim).map(|k| format!("x{k}")));
    h.extend((1..=dim).map(|k| format!("v{k}")));
    h
}

fn write_trajectory(dir: &RunDir, traj: &Trajectory) -> Result<(), CliError> {
    let dim = traj.first().dim();
    let header = header_xv(dim);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for s in &traj.samples {
        for i in 0..s.state.len() {
            let mut r = vec![num(s.t), i.to_string(), s.state.class_of(i).to_string(), num(s.state.mass(i))];
            r.extend(s.state.position(i).iter().map(|v| num(*v)));
            r.extend(s.state.velocity(i).iter().map(|v| num(*v)));
            rows.push(r);
        }
    }
    dir.write_csv("data.csv", &header, rows)?;
    let events = traj.events.records().iter().map(|e| {
        vec![
            num(e.time),
            e.kind.as_str().to_string(),
            e.members.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" "),
        ]
    });
    dir.write_csv("events.csv", &["t", "kind", "members"], events)
}

fn series_panels(traj: &Trajectory) -> Vec<Panel> {
    let ek: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, kinetic_energy(&s.state))).collect();
    let (dx, dv): (Vec<(f64, f64)>, Vec<(f64, f64)>) = traj
        .samples
        .iter()
        .map(|s| {
            let (a, b) = diameters(&s.state);
            ((s.t, a), (s.t, b))
        })
        .unzip();
    let dmin: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, min_pair_distance(&s.state))).collect();
    vec![
        Panel::new("kinetic energy", "t", "E_k").log_y().with(Series::new("E_k", ek)),
        Panel::new("diameters", "t", "diameter")
            .log_y()
            .with(Series::new("position", dx))
            .with(Series::new("velocity", dv))
            .with(Series::new("min distance", dmin)),
    ]
}

fn path_panel(traj: &Trajectory) -> Panel {
    let st = traj.first();
    let mut p = Panel::new("paths", "x1", if st.dim() >= 2 { "x2" } else { "t" });
    for i in 0..st.len() {
        let pts = traj
            .samples
            .iter()
            .map(|s| {
                let x = s.state.position(i);
                if x.len() >= 2 {
                    (x[0], x[1])
                } else {
                    (x[0], s.t)
                }
            })
            .collect();
        p.series.push(Series::new(format!("{i}"), pts));
    }
    p
}

fn record_flocking(dir: &mut RunDir, r: &FlockReport) {
    dir.set("flock.aligned", r.aligned);
    dir.set("flock.flocked", r.flocked);
    dir.set("flock.position_diameter_sup", num(r.position_diameter_sup));
    dir.set("flock.fitted_decay_rate", num(r.fitted_decay_rate));
    dir.set("flock.bound_rate", num(r.bound_rate));
    dir.set("flock.squared_reading_holds", r.squared_reading_holds);
    dir.set("flock.root_reading_holds", r.root_reading_holds);
    if let Some(h) = r.hypothesis_met {
        dir.set("flock.hypothesis_met", h);
    }
}

fn flock_check(traj: &Trajectory, alpha: f64) -> Result<FlockReport, DiagnosticsError> {
    if alpha <= 1.0 {
        check_unconditional_flocking(traj, alpha)
    } else {
        check_conditional_flocking(traj, alpha)
    }
}

fn particles(a: &ParticlesArgs, dir: &mut RunDir) -> Result<(), CliError> {
    let kernel = kernel_of(a.kernel, a.alpha)?;
    let seed = a.common.seed.unwrap_or(0);
    let state = ParticleEnsemble::random_uniform(a.n, a.dim, a.pos_half, a.vel_half, seed);
    let opts = IntegrationOptions {
        samples: SampleTimes::Uniform(a.samples),
        ..Default::default()
    };
    let t0 = Instant::now();
    let res = integrate(&System::Cs { kernel }, &state, a.t_end, &opts);
    let wall = t0.elapsed();
    let traj = match res {
        Ok(t) => t,
        Err(e) => {
            dir.record_run("particles", false, wall, e.to_string());
            return Err(CliError::Run(e.to_string()));
        }
    };
    dir.record_run("particles", true, wall, "");
    write_trajectory(dir, &traj)?;
    dir.set("steps_accepted", traj.steps_accepted);
    dir.set("steps_rejected", traj.steps_rejected);
    dir.set("forced_collision_steps", traj.forced_collision_steps);
    dir.set("beyond_classical_regime", traj.beyond_classical_regime);
    dir.set("collisions", traj.events.count(EventKind::Collision));
    dir.set("merges", traj.events.count(EventKind::Merge));
    if a.kernel == KernelArg::Singular {
        match flock_check(&traj, a.alpha) {
            Ok(r) => record_flocking(dir, &r),
            Err(e) => dir.set("flock.error", e),
        }
    }
    let mut panels = series_panels(&traj);
    panels.push(path_panel(&traj));
    dir.write_text("plot.svg", &render(&panels, 3))
}

fn sticking(a: &StickingArgs, dir: &mut RunDir) -> Result<(), CliError> {
    let t0 = Instant::now();
    let outcome = two_particle_sticking(a.x0, a.v0, a.alpha).map_err(|e| invalid(e.to_string()))?;
    let tol = singular_cs::ode::Tolerances {
        rtol: 1e-12,
        atol: 1e-14,
    };
    let path = integrate_relative(a.x0, a.v0, a.alpha, a.t_end, 1e-10, tol);
    let wall = t0.elapsed();
    dir.set("sticks", outcome.sticks);
    dir.set("collides", outcome.collides);
    dir.set("t_event", outcome.t_event.map_or("none".into(), num));
    dir.set("impact_speed", outcome.impact_speed.map_or("none".into(), num));
    dir.set("limit_distance", outcome.limit_distance.map_or("none".into(), num));
    dir.set("first_integral", num(outcome.first_integral));
    let kind = if outcome.sticks {
        "sticking"
    } else if outcome.collides {
        "collision"
    } else {
        "none"
    };
    dir.write_csv(
        "events.csv",
        &["t", "kind", "impact_speed"],
        outcome
            .t_event
            .map(|t| vec![num(t), kind.to_string(), num(outcome.impact_speed.unwrap_or(0.0))]),
    )?;
    let path = match path {
        Ok(p) => p,
        Err(e) => {
            dir.record_run("relative-path", false, wall, e.to_string());
            return Err(CliError::Run(e.to_string()));
        }
    };
    dir.record_run("relative-path", true, wall, "");
    dir.set("reached_contact", path.reached_contact);
    dir.set("first_integral_drift", num(path.first_integral_drift()));
    dir.set("min_distance", num(path.min_distance()));
    let rows = (0..path.t.len()).map(|k| vec![num(path.t[k]), num(path.x[k]), num(path.xdot[k])]);
    dir.write_csv("data.csv", &["t", "x", "xdot"], rows)?;
    let xs: Vec<(f64, f64)> = path.t.iter().copied().zip(path.x.iter().copied()).collect();
    let vs: Vec<(f64, f64)> = path.t.iter().copied().zip(path.xdot.iter().copied()).collect();
    let panels = [
        Panel::new("relative distance", "t", "x").with(Series::new("x", xs)),
        Panel::new("relative velocity", "t", "x'").with(Series::new("x'", vs)),
    ];
    dir.write_text("plot.svg", &render(&panels, 2))
}

fn bonding(a: &BondingArgs, dir: &mut RunDir) -> Result<(), CliError> {
    let kernel = CommKernel::singular(a.alpha).map_err(|e| invalid(e.to_string()))?;
    let params = BondingParams {
        k1: a.k1,
        k2: a.k2,
        k_tilde: a.k_tilde,
        radius: a.radius,
        simplified: a.simplified,
    };
    let state = ParticleEnsemble::random_uniform(a.n, a.dim, a.pos_half, a.vel_half, a.common.seed.unwrap_or(0))
        .centered();
    let opts = IntegrationOptions {
        samples: SampleTimes::Uniform(a.samples),
        ..Default::default()
    };
    let t0 = Instant::now();
    let res = integrate(&System::Bonding { kernel, params }, &state, a.t_end, &opts);
    let wall = t0.elapsed();
    let traj = match res {
        Ok(t) => t,
        Err(e) => {
            dir.record_run("bonding", false, wall, e.to_string());
            return Err(CliError::Run(e.to_string()));
        }
    };
    dir.record_run("bonding", true, wall, "");
    write_trajectory(dir, &traj)?;
    let r = check_bonding_asymptotics(&traj, &params);
    dir.set("energy_ratio", num(r.energy_ratio));
    dir.set("final_energy", num(r.final_energy));
    dir.set("late_min_distance", num(r.late_min_distance));
    dir.set("final_diameter", num(r.final_diameter));
    dir.set("final_centroid_radius", num(r.final_centroid_radius));
    dir.set("two_r", num(r.two_r));
    dir.set("diameter_within_5pct", r.diameter_within(0.05));
    dir.set("centroid_radius_within_5pct", r.centroid_radius_within(0.05));
    let mut panels = series_panels(&traj);
    panels.push(path_panel(&traj));
    dir.write_text("plot.svg", &render(&panels, 3))
}

/// Vertices of the target pattern, one per agent.
pub fn pattern_points(pattern: PatternArg, n: usize, dim: usize, spacing: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let mut p = vec![0.0; dim];
            match pattern {
                PatternArg::Line => p[0] = k as f64 * spacing,
                PatternArg::Polygon => {
                    let r = spacing / (2.0 * (std::f64::consts::PI / n as f64).sin());
                    let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    p[0] = r * th.cos();
                    p[1] = r * th.sin();
                }
            }
            p
        })
        .collect()
}

fn control(a: &ControlArgs, dir: &mut RunDir) -> Result<(), CliError> {
    let kernel = CommKernel::singular(a.alpha).map_err(|e| invalid(e.to_string()))?;
    let pattern = pattern_points(a.pattern, a.n, a.dim, a.spacing);
    let params = ControlParams::from_pattern(a.k, a.beta, &pattern);
    let state = ParticleEnsemble::random_uniform(a.n, a.dim, a.pos_half, a.vel_half, a.common.seed.unwrap_or(0));
    let opts = IntegrationOptions {
        samples: SampleTimes::Uniform(a.samples),
        ..Default::default()
    };
    let t0 = Instant::now();
    let res = integrate(&System::Control { kernel, params: params.clone() }, &state, a.t_end, &opts);
    let wall = t0.elapsed();
    let traj = match res {
        Ok(t) => t,
        Err(e) => {
            dir.record_run("control", false, wall, e.to_string());
            return Err(CliError::Run(e.to_string()));
        }
    };
    dir.record_run("control", true, wall, "");
    write_trajectory(dir, &traj)?;
    match check_control_pattern(&traj, &params) {
        Ok(r) => {
            dir.set("pattern_residual", num(r.pattern_residual));
            dir.set("velocity_diameter", num(r.velocity_diameter));
            dir.set("late_min_distance", num(r.late_min_distance));
            dir.set("converged", r.converged);
        }
        Err(e) => dir.set("control.error", e),
    }
    let mut panels = series_panels(&traj);
    panels.push(path_panel(&traj));
    dir.write_text("plot.svg", &render(&panels, 3))
}

fn meanfield(a: &MeanfieldArgs, dir: &mut RunDir) -> Result<(), CliError> {
    let kernel = CommKernel::singular(a.alpha).map_err(|e| invalid(e.to_string()))?;
    let f0 = InitialDistribution::UniformBox {
        x: vec![(-a.x_half, a.x_half); a.dim],
        v: vec![(-a.v_half, a.v_half); a.dim],
    };
    let sampling = match a.sampling {
        SamplingArg::Stratified => Sampling::Stratified,
        SamplingArg::MonteCarlo => Sampling::MonteCarlo {
            seed: a.common.seed.unwrap_or(0),
        },
    };
    let t0 = Instant::now();
    let res = meanfield_convergence(&f0, &a.n_list, a.t_end, &kernel, sampling, &IntegrationOptions::default());
    let wall = t0.elapsed();
    let table = match res {
        Ok(t) => t,
        Err(e) => {
            dir.record_run("meanfield", false, wall, e.to_string());
            return Err(CliError::Run(e.to_string()));
        }
    };
    dir.record_run("meanfield", true, wall, "");
    dir.set("regime_warning", table.regime_warning);
    dir.set("proxy_atoms", table.proxy_atoms);
    dir.set("decreasing", table.decreasing());
    dir.write_csv(
        "data.csv",
        &["N", "t", "d1_vs_double", "d1_initial_gap"],
        table
            .rows
            .iter()
            .map(|r| vec![r.n.to_string(), num(r.t), num(r.d1_vs_double), num(r.d1_initial_gap)]),
    )?;
    dir.write_csv("events.csv", &["t", "kind", "members"], Vec::<Vec<String>>::new())?;
    let pts = |f: fn(&singular_cs::meanfield::ConvergenceRow) -> f64| {
        table.rows.iter().map(|r| (r.n as f64, f(r))).collect::<Vec<_>>()
    };
    let panel = Panel::new("d1 convergence", "N", "d1")
        .log_xy()
        .with(Series::new("f_N vs f_2N at t_end", pts(|r| r.d1_vs_double)))
        .with(Series::new("initial gap", pts(|r| r.d1_initial_gap)));
    dir.write_text("plot.svg", &render(&[panel], 1))
}

fn torus_initial(a: &TorusArgs) -> TorusInitial {
    match a.ic {
        TorusIcArg::Constant => TorusInitial::Constant { rho: a.rho0, u: a.u0 },
        TorusIcArg::Single => TorusInitial::SingleMode {
            rho0: a.rho0,
            a: a.amp,
            u0: a.u0,
            b: a.vel_amp,
            k: a.mode,
        },
        TorusIcArg::Two => TorusInitial::TwoMode {
            rho0: a.rho0,
            a1: a.amp,
            a2: a.amp2,
            phase: a.phase,
            u0: a.u0,
            b1: a.vel_amp,
            b2: a.vel_amp2,
        },
    }
}

fn hydro_torus(a: &TorusArgs, dir: &mut RunDir) -> Result<(), CliError> {
    let s0 = torus_initial(a).state(a.n, a.gamma).map_err(|e| invalid(e.to_string()))?;
    let solver = TorusSolver::new(a.n);
    let dt = match a.dt {
        Some(dt) => dt,
        None => a.cfl * solver.stable_dt(&s0).map_err(|e| invalid(e.to_string()))? / solver.c_cfl,
    };
    let snaps: Vec<f64> = (0..=a.snapshots).map(|k| a.t_end * k as f64 / a.snapshots as f64).collect();
    let t0 = Instant::now();
    let res = solver.run(&s0, dt, &snaps);
    let wall = t0.elapsed();
    dir.set("dt", num(dt));
    dir.set("density_floor", num(density_floor(&s0)));
    dir.set("density_floor_full_length", num(density_floor_full_length(&s0)));
    let traj = match res {
        Ok(t) => t,
        Err(e) => {
            dir.record_run("hydro-torus", false, wall, e.to_string());
            return Err(CliError::Run(e.to_string()));
        }
    };
    dir.record_run("hydro-torus", true, wall, "");
    let last = traj.last().expect("at least one snapshot");
    dir.set("mass_drift", num((last.rho.integral() - s0.rho.integral()).abs()));
    dir.set("e_drift", num((last.e.integral() - s0.e.integral()).abs()));
    let q = q_transport_check(&traj);
    dir.set("q_max_drift", num(q.max_drift));
    dir.set("q_min_drift", num(q.min_drift));
    dir.set("min_rho", num(traj.iter().map(|s| s.rho.min()).fold(f64::INFINITY, f64::min)));
    let xs = singular_cs::hydro_torus::grid(a.n);
    let mut rows = Vec::new();
    let mut rho_panel = Panel::new("density", "x", "rho");
    let mut q_panel = Panel::new("q = e / rho", "x", "q");
    for s in &traj {
        let u = solver.velocity(s).map_err(|e| CliError::Run(e.to_string()))?;
        let (r, e) = (s.rho.values(), s.e.values());
        for j in 0..a.n {
            rows.push(vec![num(s.t), num(xs[j]), num(r[j]), num(u[j]), num(e[j]), num(e[j] / r[j])]);
        }
        let label = format!("t={}", num(s.t));
        rho_panel.series.push(Series::new(&label, xs.iter().copied().zip(r.iter().copied()).collect()));
        q_panel
            .series
            .push(Series::new(&label, (0..a.n).map(|j| (xs[j], e[j] / r[j])).collect()));
    }
    dir.write_csv("data.csv", &["t", "x", "rho", "u", "e", "q"], rows)?;
    dir.write_csv("events.csv", &["t", "kind", "members"], Vec::<Vec<String>>::new())?;
    dir.write_text("plot.svg", &render(&[rho_panel, q_panel], 2))
}

fn hydro_line(a: &LineArgs, dir: &mut RunDir) -> Result<(), CliError> {
    let case = LineCase::from_index(a.case).map_err(|e| invalid(e.to_string()))?;
    let bc = match a.bc {
        LineBc::Wall => BoundaryCondition::ImpermeableWall,
        LineBc::Neumann => BoundaryCondition::NeumannZeroVelocityGradient,
    };
    let grid = LineGrid::with_spacing(a.half_width, a.dx)
        .map_err(|e| invalid(e.to_string()))?
        .with_bc(bc);
    let snaps = if a.snapshots.is_empty() {
        vec![0.0, 0.5 * a.t_end, a.t_end]
    } else {
        let mut s = a.snapshots.clone();
        s.sort_by(f64::total_cmp);
        s.dedup();
        s
    };
    let runs: Vec<_> = a
        .c
        .par_iter()
        .map(|&c| {
            let t0 = Instant::now();
            let r = coupled_run(case, c, &grid, a.dt, &snaps, a.record_every);
            (c, r, t0.elapsed())
        })
        .collect();
    let xs = grid.centers();
    let mut data = Vec::new();
    let mut summary = Vec::new();
    let mut series = Vec::new();
    let mut events = Vec::new();
    let mut panels = Vec::new();
    for (c, r, wall) in &runs {
        match r {
            Ok(run) => {
                dir.record_run(format!("c={}", num(*c)), true, *wall, "");
                events.push(vec![num(*c), "ok".into(), String::new()]);
                dir.set(&format!("c={}.max_mass_drift", num(*c)), num(run.max_mass_drift));
                dir.set(&format!("c={}.min_rho", num(*c)), num(run.min_rho));
                for s in &run.snapshots {
                    for (i, x) in xs.iter().enumerate() {
                        data.push(vec![
                            num(*c),
                            num(s.t),
                            num(*x),
                            num(s.rho.values[i]),
                            num(s.u.values[i]),
                            num(s.rho_pm.values[i]),
                        ]);
                    }
                    let title = format!("c = {}, t = {}", num(*c), num(s.t));
                    panels.push(
                        Panel::new(title, "x", "")
                            .with(Series::new("rho", xs.iter().copied().zip(s.rho.values.iter().copied()).collect()))
                            .with(Series::new(
                                "rho_pm",
                                xs.iter().copied().zip(s.rho_pm.values.iter().copied()).collect(),
                            ))
                            .with(Series::new("u", xs.iter().copied().zip(s.u.values.iter().copied()).collect())),
                    );
                }
                for row in run.summary_rows(&grid) {
                    summary.push(row.iter().map(|v| num(*v)).collect::<Vec<_>>());
                }
                for (t, h) in &run.hminus1 {
                    series.push(vec![num(*c), num(*t), num(*h)]);
                }
            }
            Err(e) => {
                dir.record_run(format!("c={}", num(*c)), false, *wall, e.to_string());
                events.push(vec![num(*c), "failed".into(), e.to_string()]);
            }
        }
    }
    dir.set("case", case.index());
    dir.set("n_cells", grid.n_cells);
    dir.set("bc", format!("{bc:?}"));
    dir.write_csv("data.csv", &["c", "t", "x", "rho", "u", "rho_pm"], data)?;
    dir.write_csv("summary.csv", &["c", "t", "h_minus1", "linf_gap"], summary)?;
    dir.write_csv("hminus1.csv", &["c", "t", "h_minus1"], series)?;
    dir.write_csv("events.csv", &["c", "status", "detail"], events)?;
    dir.write_text("plot.svg", &render(&panels, snaps.len()))
}

fn sweep(a: &SweepArgs, dir: &mut RunDir) -> Result<(), CliError> {
    let base = a.common.seed.unwrap_or(0);
    let cells: Vec<(f64, u64)> = a
        .alphas
        .iter()
        .flat_map(|&al| (base..base + a.seeds).map(move |s| (al, s)))
        .collect();
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(alpha, seed)| {
            let t0 = Instant::now();
            let r = (|| -> Result<(Trajectory, FlockReport), String> {
                let kernel = CommKernel::singular(alpha).map_err(|e| e.to_string())?;
                let state = ParticleEnsemble::random_uniform(a.n, a.dim, 1.0, 1.0, seed);
                let opts = IntegrationOptions {
                    samples: SampleTimes::Uniform(a.samples),
                    max_steps: a.max_steps,
                    ..Default::default()
                };
                let traj = integrate(&System::Cs { kernel }, &state, a.t_end, &opts).map_err(|e| e.to_string())?;
                let rep = flock_check(&traj, alpha).map_err(|e| e.to_string())?;
                Ok((traj, rep))
            })();
            (alpha, seed, r, t0.elapsed())
        })
        .collect();
    let mut rows = Vec::new();
    let mut events = Vec::new();
    let mut by_alpha: Vec<Series> = Vec::new();
    for (alpha, seed, r, wall) in &results {
        let label = format!("alpha={} seed={seed}", num(*alpha));
        match r {
            Ok((traj, rep)) => {
                dir.record_run(&label, true, *wall, "");
                let min_d = traj
                    .samples
                    .iter()
                    .map(|s| min_pair_distance(&s.state))
                    .fold(f64::INFINITY, f64::min);
                rows.push(vec![
                    num(*alpha),
                    seed.to_string(),
                    "ok".into(),
                    num(min_d),
                    num(diameters(traj.last()).1),
                    num(rep.fitted_decay_rate),
                    num(rep.bound_rate),
                    rep.bound_holds().to_string(),
                ]);
                let name = format!("alpha={}", num(*alpha));
                let pts: Vec<(f64, f64)> = rep.velocity_norm_series.clone();
                if !by_alpha.iter().any(|s| s.name == name) {
                    by_alpha.push(Series::new(name, pts));
                }
            }
            Err(e) => {
                dir.record_run(&label, false, *wall, e);
                rows.push(vec![
                    num(*alpha),
                    seed.to_string(),
                    "failed".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
                events.push(vec![num(*alpha), seed.to_string(), e.clone()]);
            }
        }
    }
    dir.write_csv(
        "data.csv",
        &[
            "alpha",
            "seed",
            "status",
            "min_distance",
            "final_velocity_diameter",
            "fitted_rate",
            "bound_rate",
            "bound_holds",
        ],
        rows,
    )?;
    dir.write_csv("events.csv", &["alpha", "seed", "error"], events)?;
    let mut panel = Panel::new("velocity pair sum, first seed", "t", "norm").log_y();
    panel.series = by_alpha;
    dir.write_text("plot.svg", &render(&[panel], 1))
}
