//! Run configuration: JSON file, command-line flags and defaults merged into
//! one resolved record that every report embeds.

use std::path::{Path, PathBuf};

use abp_core::pde::SolverConfig;
use abp_core::{AnalyticSurface, Tolerances};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_JACOBIAN_SAMPLES: usize = 4;
pub const SEED_ENV: &str = "ABP_SEED";
/// Refinement level used by verify, abp and convergence meshes when none is given.
pub const DEFAULT_LEVEL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Generate,
    Verify,
    Abp,
    Convergence,
}

/// Geometry name plus the parameters of that family. Missing values take the
/// family defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySpec {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ambient: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waist: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_height: Option<f64>,
}

impl GeometrySpec {
    pub fn surface(&self) -> Result<AnalyticSurface, CliError> {
        let radius = |default: f64| self.radius.unwrap_or(default);
        let s = match self.name.as_str() {
            "flat_disk" | "disk" => AnalyticSurface::FlatDisk {
                radius: radius(1.0),
                ambient_dim: self.ambient.unwrap_or(3),
            },
            "sphere" => AnalyticSurface::Sphere {
                radius: radius(1.0),
                ambient_dim: self.ambient.unwrap_or(3),
            },
            "catenoid" => AnalyticSurface::Catenoid {
                waist: self.waist.unwrap_or(1.0),
                half_height: self.half_height.unwrap_or(1.0),
            },
            "enneper" => AnalyticSurface::Enneper { radius: radius(0.5) },
            "holomorphic" => AnalyticSurface::Holomorphic {
                degree: self.k.unwrap_or(2),
                radius: radius(1.0),
            },
            other => return Err(CliError::Input(format!("unknown geometry {other:?}"))),
        };
        s.validate().map_err(CliError::Input)?;
        Ok(s)
    }

    pub fn resolution(&self, surface: &AnalyticSurface) -> usize {
        self.resolution.unwrap_or_else(|| surface.default_resolution())
    }

    /// Same geometry with every defaulted parameter written out.
    fn resolved(&self) -> Result<Self, CliError> {
        let s = self.surface()?;
        let mut out = GeometrySpec {
            name: s.name().to_string(),
            resolution: Some(self.resolution(&s)),
            ..Default::default()
        };
        match s {
            AnalyticSurface::FlatDisk { radius, ambient_dim } | AnalyticSurface::Sphere { radius, ambient_dim } => {
                out.radius = Some(radius);
                out.ambient = Some(ambient_dim);
            }
            AnalyticSurface::Catenoid { waist, half_height } => {
                out.waist = Some(waist);
                out.half_height = Some(half_height);
            }
            AnalyticSurface::Enneper { radius } => out.radius = Some(radius),
            AnalyticSurface::Holomorphic { degree, radius } => {
                out.k = Some(degree);
                out.radius = Some(radius);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
    /// Refinement level applied to an analytic geometry; 0 for `generate`
    /// and 3 for the other commands when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    /// Inclusive level range of a convergence study.
    pub levels: [usize; 2],
    /// Constant or expression over `x1..x4`.
    pub density: String,
    pub n: usize,
    /// Codimension; defaults to `ambient − 2` of the mesh.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub tolerances: Tolerances,
    pub solver: SolverConfig,
    pub seed: u64,
    /// Coverage samples.
    pub samples: usize,
    /// Normal-fibre samples per vertex for the Jacobian bound.
    pub jacobian_samples: usize,
    // Thread count and output paths do not change any computed value and are
    // left out of embedded configs, so reports from reruns compare equal.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    /// Mesh file written by `generate`.
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub report: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            geometry: None,
            mesh: None,
            level: None,
            levels: [0, 3],
            density: "1".into(),
            n: 2,
            m: None,
            tolerances: Tolerances::default(),
            solver: SolverConfig::default(),
            seed: DEFAULT_SEED,
            samples: DEFAULT_SAMPLES,
            jacobian_samples: DEFAULT_JACOBIAN_SAMPLES,
            threads: None,
            output: None,
            report: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// Checks the invariants and writes defaulted geometry parameters out.
    pub fn resolve(mut self, command: Command) -> Result<Self, CliError> {
        self.command = Some(command);
        if command == Command::Convergence {
            // the study runs over `levels`
            self.level = None;
        } else if self.geometry.is_some() {
            let default_level = if command == Command::Generate { 0 } else { DEFAULT_LEVEL };
            self.level = Some(self.level.unwrap_or(default_level));
        } else if self.level.is_some() {
            return Err(CliError::Input("a level applies to a geometry, not to a mesh file".into()));
        }
        match (&self.geometry, &self.mesh) {
            (Some(_), Some(_)) => return Err(CliError::Input("give either a geometry or a mesh path, not both".into())),
            (None, None) => return Err(CliError::Input("a geometry or a mesh path is required".into())),
            _ => {}
        }
        if command == Command::Convergence && self.geometry.is_none() {
            return Err(CliError::Input("convergence needs an analytic geometry".into()));
        }
        if command == Command::Generate && self.geometry.is_none() {
            return Err(CliError::Input("generate needs a geometry".into()));
        }
        if let Some(g) = &self.geometry {
            self.geometry = Some(g.resolved()?);
        }
        if self.n != abp_core::SURFACE_DIM {
            return Err(CliError::Input(format!(
                "n = {} is not supported; meshes are surfaces (n = 2)",
                self.n
            )));
        }
        if self.m == Some(0) {
            return Err(CliError::Input("m must be at least 1".into()));
        }
        let t = &self.tolerances;
        let positive = [
            ("tol_psd", Some(t.tol_psd)),
            ("tol_open", Some(t.tol_open)),
            ("tol_jac", Some(t.tol_jac)),
            ("tol_disc", t.tol_disc),
            ("tol_recon", t.tol_recon),
            ("eps_eq", Some(t.eps_eq)),
            ("cg_tol", Some(self.solver.cg_tol)),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(CliError::Input(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if self.levels[0] > self.levels[1] {
            return Err(CliError::Input(format!(
                "empty level range {}..{}",
                self.levels[0], self.levels[1]
            )));
        }
        if command == Command::Convergence && self.levels[1] - self.levels[0] < 1 {
            return Err(CliError::Input("a convergence study needs at least two levels".into()));
        }
        if self.samples == 0 || self.jacobian_samples == 0 {
            return Err(CliError::Input("sample counts must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Input("threads must be positive".into()));
        }
        Ok(self)
    }
}

/// Parses `a..b` or `a..=b` (both inclusive) or a single level.
pub fn parse_levels(s: &str) -> Result<[usize; 2], String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    match s.split_once("..") {
        Some((a, b)) => Ok([parse(a)?, parse(b.trim_start_matches('='))?]),
        None => {
            let v = parse(s)?;
            Ok([v, v])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> GeometrySpec {
        GeometrySpec {
            name: "flat_disk".into(),
            ..Default::default()
        }
    }

    #[test]
    fn defaults_are_written_out() {
        let c = RunConfig {
            geometry: Some(disk()),
            ..Default::default()
        }
        .resolve(Command::Verify)
        .unwrap();
        let g = c.geometry.unwrap();
        assert_eq!(g.radius, Some(1.0));
        assert_eq!(g.ambient, Some(3));
        assert_eq!(g.resolution, Some(4));
        assert_eq!(c.command, Some(Command::Verify));
    }

    #[test]
    fn invariants() {
        let both = RunConfig {
            geometry: Some(disk()),
            mesh: Some("m.json".into()),
            ..Default::default()
        };
        assert!(both.resolve(Command::Verify).is_err());
        assert!(RunConfig::default().resolve(Command::Verify).is_err());
        let mut bad_tol = RunConfig {
            geometry: Some(disk()),
            ..Default::default()
        };
        bad_tol.tolerances.tol_jac = 0.0;
        assert!(bad_tol.resolve(Command::Verify).is_err());
        let unknown = RunConfig {
            geometry: Some(GeometrySpec {
                name: "torus".into(),
                ..Default::default()
            }),
            ..Default::default()
        };
        assert!(matches!(unknown.resolve(Command::Generate), Err(CliError::Input(_))));
        let mesh_only = RunConfig {
            mesh: Some("m.json".into()),
            ..Default::default()
        };
        assert!(mesh_only.resolve(Command::Convergence).is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = RunConfig {
            geometry: Some(disk()),
            density: "1 + x1^2".into(),
            ..Default::default()
        }
        .resolve(Command::Abp)
        .unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.level, Some(DEFAULT_LEVEL));
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
    }

    #[test]
    fn level_ranges() {
        assert_eq!(parse_levels("1..4"), Ok([1, 4]));
        assert_eq!(parse_levels("1..=4"), Ok([1, 4]));
        assert_eq!(parse_levels("2"), Ok([2, 2]));
        assert!(parse_levels("a..2").is_err());
    }
}
