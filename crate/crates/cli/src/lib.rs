//! Command-line front end for the inequality laboratory.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on bad
//! input (unknown geometry, unreadable mesh, non-positive density, ...).

pub mod commands;
pub mod config;
pub mod density;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{Command, GeometrySpec, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Output(String),
}

/// What a command decided, before it is turned into an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

#[derive(Debug, Parser)]
#[command(name = "abp", version, about = "Discrete checks of the sharp Sobolev inequality on surfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Write an analytic mesh and its reference values.
    Generate(Flags),
    /// Evaluate both sides of the inequality and the Neumann residuals.
    Verify(Flags),
    /// Run the transport checks: coverage, Jacobian bound, integral chain.
    Abp(Flags),
    /// Error table against the analytic reference over refinement levels.
    Convergence(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON run configuration; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// flat_disk, sphere, catenoid, enneper or holomorphic.
    #[arg(long)]
    pub geometry: Option<String>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Base resolution of the generator.
    #[arg(long)]
    pub res: Option<usize>,
    /// Ambient dimension for the flat disk and the sphere.
    #[arg(long)]
    pub ambient: Option<usize>,
    /// Degree of the holomorphic graph.
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub waist: Option<f64>,
    #[arg(long)]
    pub half_height: Option<f64>,
    /// Refinement level of the generated mesh.
    #[arg(long)]
    pub level: Option<usize>,
    /// Level range of a convergence study, e.g. `1..4`.
    #[arg(long, value_parser = config::parse_levels)]
    pub levels: Option<[usize; 2]>,
    /// Mesh file (.json or .off) instead of a geometry.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Density: a constant or an expression in x1..x4.
    #[arg(long, allow_hyphen_values = true)]
    pub density: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub tol_psd: Option<f64>,
    #[arg(long)]
    pub tol_open: Option<f64>,
    #[arg(long)]
    pub tol_jac: Option<f64>,
    #[arg(long)]
    pub tol_disc: Option<f64>,
    #[arg(long)]
    pub tol_recon: Option<f64>,
    #[arg(long)]
    pub eps_eq: Option<f64>,
    #[arg(long)]
    pub cg_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Sampling seed; overrides ABP_SEED and the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Coverage samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Normal-fibre samples per vertex for the Jacobian bound.
    #[arg(long)]
    pub jacobian_samples: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Mesh file for `generate`; report file for the other commands.
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl Flags {
    /// Merges defaults, the config file, `ABP_SEED` and the flags, in that
    /// order of increasing precedence, and validates the result.
    pub fn into_config(self, command: Command, env_seed: Option<&str>) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(name) = self.geometry {
            let mut g = c.geometry.take().unwrap_or_default();
            g.name = name;
            c.geometry = Some(g);
        }
        let has_params = self.radius.is_some()
            || self.res.is_some()
            || self.ambient.is_some()
            || self.k.is_some()
            || self.waist.is_some()
            || self.half_height.is_some();
        if has_params {
            let g: &mut GeometrySpec = c
                .geometry
                .as_mut()
                .ok_or_else(|| CliError::Input("geometry parameters given without --geometry".into()))?;
            g.radius = self.radius.or(g.radius);
            g.resolution = self.res.or(g.resolution);
            g.ambient = self.ambient.or(g.ambient);
            g.k = self.k.or(g.k);
            g.waist = self.waist.or(g.waist);
            g.half_height = self.half_height.or(g.half_height);
        }
        if self.mesh.is_some() {
            c.mesh = self.mesh;
        }
        c.level = self.level.or(c.level);
        set(&mut c.levels, self.levels);
        set(&mut c.density, self.density);
        set(&mut c.n, self.n);
        c.m = self.m.or(c.m);
        set(&mut c.tolerances.tol_psd, self.tol_psd);
        set(&mut c.tolerances.tol_open, self.tol_open);
        set(&mut c.tolerances.tol_jac, self.tol_jac);
        c.tolerances.tol_disc = self.tol_disc.or(c.tolerances.tol_disc);
        c.tolerances.tol_recon = self.tol_recon.or(c.tolerances.tol_recon);
        set(&mut c.tolerances.eps_eq, self.eps_eq);
        set(&mut c.solver.cg_tol, self.cg_tol);
        c.solver.max_iters = self.max_iters.or(c.solver.max_iters);
        if let Some(s) = env_seed {
            c.seed = s
                .trim()
                .parse()
                .map_err(|e| CliError::Input(format!("{}={s:?}: {e}", config::SEED_ENV)))?;
        }
        set(&mut c.seed, self.seed);
        set(&mut c.samples, self.samples);
        set(&mut c.jacobian_samples, self.jacobian_samples);
        c.threads = self.threads.or(c.threads);
        match command {
            Command::Generate => {
                c.output = self.output.or(c.output);
                c.report = self.report.or(c.report);
            }
            _ => {
                if self.output.is_some() && self.report.is_some() {
                    return Err(CliError::Input("-o and --report both name the report; give one".into()));
                }
                c.report = self.report.or(self.output).or(c.report);
            }
        }
        c.resolve(command)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Runs one parsed invocation and maps the outcome to the exit-code contract.
pub fn run(cli: Cli) -> ExitCode {
    let (command, flags) = match cli.command {
        Sub::Generate(f) => (Command::Generate, f),
        Sub::Verify(f) => (Command::Verify, f),
        Sub::Abp(f) => (Command::Abp, f),
        Sub::Convergence(f) => (Command::Convergence, f),
    };
    let env_seed = std::env::var(config::SEED_ENV).ok();
    let result = flags
        .into_config(command, env_seed.as_deref())
        .and_then(|cfg| {
            if let Some(t) = cfg.threads {
                abp_core::exec::init_threads(t).map_err(CliError::Input)?;
            }
            commands::execute(&cfg)
        });
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
