//! The four subcommands. Every report is pretty JSON that starts with the
//! resolved configuration, so a rerun with the same config is byte-identical.

use std::path::{Path, PathBuf};

use abp_core::convergence::{convergence_study, ConvergenceTable};
use abp_core::harness::{deficit, equality_diagnostics, isoperimetric_report, IsoperimetricReport};
use abp_core::io::{read_mesh, write_mesh};
use abp_core::pde::normalize_and_solve;
use abp_core::pipeline::PipelineError;
use abp_core::transport::{ChainReport, JacobianBoundReport, DEFAULT_SIGMAS};
use abp_core::{AbpRun, AnalyticReference, AnalyticSurface, CoverageReport, EqualityDiagnostics, InequalityReport, Mesh, PdeError, ShapeData, Tolerances};
use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::density::Expr;
use crate::{CliError, Outcome};

/// Smallest hit fraction accepted by `abp`.
pub const COVERAGE_THRESHOLD: f64 = 0.99;

pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command.expect("resolved config has a command") {
        Command::Generate => generate(cfg),
        Command::Verify => verify(cfg),
        Command::Abp => abp(cfg),
        Command::Convergence => convergence(cfg),
    }
}

#[derive(Debug, Serialize)]
struct MeshSummary {
    vertices: usize,
    faces: usize,
    ambient_dim: usize,
    components: usize,
    boundary_loops: usize,
    relative_h: f64,
}

impl MeshSummary {
    fn of(m: &Mesh) -> Self {
        Self {
            vertices: m.num_vertices(),
            faces: m.num_faces(),
            ambient_dim: m.ambient_dim(),
            components: m.component_labels().0,
            boundary_loops: m.boundary_loops().len(),
            relative_h: m.relative_h(),
        }
    }
}

fn surface(cfg: &RunConfig) -> Result<Option<(AnalyticSurface, usize)>, CliError> {
    cfg.geometry
        .as_ref()
        .map(|g| g.surface().map(|s| (s, g.resolution(&s))))
        .transpose()
}

fn load_mesh(cfg: &RunConfig) -> Result<(Mesh, Option<AnalyticSurface>), CliError> {
    if let Some((s, res)) = surface(cfg)? {
        return Ok((s.mesh_at_level(res, cfg.level.unwrap_or_default()), Some(s)));
    }
    let path = cfg.mesh.as_ref().expect("resolved config has a geometry or a mesh");
    let mesh = read_mesh(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((mesh, None))
}

/// Evaluates the density at every vertex; it must be finite and positive.
pub fn density_values(expr: &Expr, source: &str, mesh: &Mesh) -> Result<Vec<f64>, CliError> {
    mesh.vertices()
        .iter()
        .enumerate()
        .map(|(v, p)| {
            let x = [p[0], p[1], p[2], p[3]];
            let value = expr.eval(&x);
            if value.is_finite() && value > 0.0 {
                Ok(value)
            } else {
                Err(CliError::Input(format!(
                    "density {source:?} is {value} at vertex {v}; it must be positive"
                )))
            }
        })
        .collect()
}

fn parse_density(cfg: &RunConfig) -> Result<Expr, CliError> {
    Expr::parse(&cfg.density).map_err(|e| CliError::Input(format!("density {:?}: {e}", cfg.density)))
}

fn codimension(cfg: &RunConfig, mesh: &Mesh) -> usize {
    cfg.m.unwrap_or(mesh.ambient_dim() - abp_core::SURFACE_DIM)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Output(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write_text(path, &text)
}

#[derive(Debug, Serialize)]
struct GenerateReport<'a> {
    config: &'a RunConfig,
    mesh_file: PathBuf,
    reference_file: PathBuf,
    mesh: MeshSummary,
    reference: AnalyticReference,
}

/// `<dir>/<stem>.reference.json` next to the mesh file.
pub fn reference_path(mesh_path: &Path) -> PathBuf {
    let stem = mesh_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    mesh_path.with_file_name(format!("{stem}.reference.json"))
}

fn generate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (s, res) = surface(cfg)?.expect("generate has a geometry");
    let mesh = s.mesh_at_level(res, cfg.level.unwrap_or_default());
    let mesh_file = cfg.output.clone().unwrap_or_else(|| PathBuf::from(format!("{}.json", s.name())));
    write_mesh(&mesh_file, &mesh).map_err(|e| match e {
        abp_core::io::IoError::Io(err) => CliError::Output(format!("{}: {err}", mesh_file.display())),
        other => CliError::Input(format!("{}: {other}", mesh_file.display())),
    })?;
    let reference_file = reference_path(&mesh_file);
    let report = GenerateReport {
        config: cfg,
        mesh_file,
        reference_file: reference_file.clone(),
        mesh: MeshSummary::of(&mesh),
        reference: s.reference(),
    };
    write_json(Some(&reference_file), &report)?;
    write_json(cfg.report.as_deref(), &report)?;
    Ok(Outcome::Pass)
}

#[derive(Debug, Serialize)]
struct PdeSummary {
    component: usize,
    vertices: usize,
    normalization_constant: f64,
    cg_iterations: usize,
    linear_residual: f64,
    interior_pde_residual: f64,
    boundary_flux_error: f64,
    threshold: f64,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct VerifyReport<'a> {
    config: &'a RunConfig,
    mesh: MeshSummary,
    tolerances: Tolerances,
    inequality: InequalityReport,
    isoperimetric: IsoperimetricReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<AnalyticReference>,
    pde: Vec<PdeSummary>,
    pass: bool,
}

fn solve_component(c: usize, comp: &Mesh, f: &[f64], cfg: &RunConfig) -> PdeSummary {
    let shape = ShapeData::compute(comp);
    let threshold = cfg.tolerances.disc(comp);
    let mut s = PdeSummary {
        component: c,
        vertices: comp.num_vertices(),
        normalization_constant: f64::NAN,
        cg_iterations: 0,
        linear_residual: f64::NAN,
        interior_pde_residual: f64::NAN,
        boundary_flux_error: f64::NAN,
        threshold,
        pass: false,
        error: None,
    };
    match normalize_and_solve(comp, f, &shape, &cfg.solver) {
        Ok(sol) => {
            // the interior residual is an L² norm; compare it per unit area
            let rel_interior = sol.interior_pde_residual / comp.area().sqrt();
            s.normalization_constant = sol.normalization_constant;
            s.cg_iterations = sol.cg_iterations;
            s.linear_residual = sol.linear_residual;
            s.interior_pde_residual = sol.interior_pde_residual;
            s.boundary_flux_error = sol.boundary_flux_error;
            s.pass = sol.boundary_flux_error <= threshold && rel_interior <= threshold;
        }
        Err(e) => s.error = Some(e.to_string()),
    }
    s
}

fn verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let expr = parse_density(cfg)?;
    let (mesh, analytic) = load_mesh(cfg)?;
    let f = density_values(&expr, &cfg.density, &mesh)?;
    let shape = ShapeData::compute(&mesh);
    let inequality = deficit(&mesh, &f, cfg.n, codimension(cfg, &mesh), &shape, &cfg.tolerances)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let mut pde = Vec::new();
    for (c, comp) in mesh.components().iter().enumerate() {
        let fc = density_values(&expr, &cfg.density, comp)?;
        pde.push(solve_component(c, comp, &fc, cfg));
    }
    let pass = inequality.pass && pde.iter().all(|p| p.pass);
    let report = VerifyReport {
        config: cfg,
        mesh: MeshSummary::of(&mesh),
        tolerances: cfg.tolerances.resolved(&mesh),
        isoperimetric: isoperimetric_report(&mesh, &shape),
        inequality,
        reference: analytic.map(|s| s.reference()),
        pde,
        pass,
    };
    write_json(cfg.report.as_deref(), &report)?;
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

#[derive(Debug, Serialize)]
struct AbpComponent {
    component: usize,
    mesh: MeshSummary,
    tolerances: Tolerances,
    normalization_constant: f64,
    cg_iterations: usize,
    coverage: CoverageReport,
    jacobian: JacobianBoundReport,
    chain: ChainReport,
    equality: EqualityDiagnostics,
    coverage_threshold: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct AbpFailure {
    component: usize,
    error: String,
}

#[derive(Debug, Serialize)]
struct AbpReport<'a> {
    config: &'a RunConfig,
    mesh: MeshSummary,
    components: Vec<AbpComponent>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    errors: Vec<AbpFailure>,
    pass: bool,
}

fn abp(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let expr = parse_density(cfg)?;
    let (mesh, _) = load_mesh(cfg)?;
    density_values(&expr, &cfg.density, &mesh)?;
    let mut components = Vec::new();
    let mut errors = Vec::new();
    for (c, comp) in mesh.components().iter().enumerate() {
        let f = density_values(&expr, &cfg.density, comp)?;
        let run = match AbpRun::new(comp, &f, &cfg.solver, &cfg.tolerances) {
            Ok(r) => r,
            Err(PipelineError::Pde(e @ (PdeError::NonPositiveDensity { .. } | PdeError::SizeMismatch { .. }))) => {
                return Err(CliError::Input(e.to_string()))
            }
            Err(e) => {
                errors.push(AbpFailure {
                    component: c,
                    error: e.to_string(),
                });
                continue;
            }
        };
        let coverage = match run.state.coverage_check(cfg.samples, cfg.seed) {
            Ok(r) => r,
            Err(e) => {
                errors.push(AbpFailure {
                    component: c,
                    error: e.to_string(),
                });
                continue;
            }
        };
        let jacobian = run.state.jacobian_bound_check(cfg.jacobian_samples, cfg.seed);
        let chain = match run.state.annulus_chain_check(&DEFAULT_SIGMAS) {
            Ok(r) => r,
            Err(e) => {
                errors.push(AbpFailure {
                    component: c,
                    error: e.to_string(),
                });
                continue;
            }
        };
        let equality = equality_diagnostics(&run.mesh, &run.solution.density, &run.state, &run.shape);
        let pass = coverage.fraction >= COVERAGE_THRESHOLD && jacobian.pass && chain.monotone;
        components.push(AbpComponent {
            component: c,
            mesh: MeshSummary::of(comp),
            tolerances: *run.state.tolerances(),
            normalization_constant: run.solution.normalization_constant,
            cg_iterations: run.solution.cg_iterations,
            coverage,
            jacobian,
            chain,
            equality,
            coverage_threshold: COVERAGE_THRESHOLD,
            pass,
        });
    }
    let pass = errors.is_empty() && components.iter().all(|c| c.pass);
    let report = AbpReport {
        config: cfg,
        mesh: MeshSummary::of(&mesh),
        components,
        errors,
        pass,
    };
    write_json(cfg.report.as_deref(), &report)?;
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

#[derive(Debug, Serialize)]
struct ConvergenceReport<'a> {
    config: &'a RunConfig,
    table: ConvergenceTable,
}

/// Writes the table as CSV, or as JSON with the config when the report path
/// ends in `.json`. Next to a CSV report go `<stem>.orders.csv` and
/// `<stem>.config.json`; without a report path both tables go to stdout.
fn convergence(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (s, res) = surface(cfg)?.expect("convergence has a geometry");
    let table = convergence_study(&s, res, cfg.levels[0]..=cfg.levels[1]);
    match cfg.report.as_deref() {
        Some(p) if p.extension().is_some_and(|e| e == "json") => {
            write_json(Some(p), &ConvergenceReport { config: cfg, table })?;
        }
        Some(p) => {
            write_text(Some(p), &table.to_csv())?;
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            write_text(Some(&p.with_file_name(format!("{stem}.orders.csv"))), &table.orders_csv())?;
            write_json(Some(&p.with_file_name(format!("{stem}.config.json"))), cfg)?;
        }
        None => write_text(None, &format!("{}\n{}", table.to_csv(), table.orders_csv()))?,
    }
    Ok(Outcome::Pass)
}
