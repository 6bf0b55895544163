//! The weighted Neumann problem
//!
//! ```text
//! div(f ∇u) = n f^{n/(n-1)} − √(|∇f|² + f²|H|²)   in Σ,
//! ⟨∇u, η⟩ = 1                                      on ∂Σ,
//! ```
//!
//! discretized with piecewise-linear elements. The Neumann datum is the
//! natural boundary condition of the weak form
//! `∫ f⟨∇u, ∇φ⟩ = ∫_∂ f φ − ∫ (n f^{n/(n-1)} − √…) φ`, which is solvable
//! exactly when the density has been normalized so that both sides of the
//! Sobolev inequality agree up to the factor in front of `∫ f^{n/(n-1)}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::harness::lhs_integrand;
use crate::mesh::Mesh;
use crate::shape::{face_gradient, ShapeData};
use crate::sparse::{pcg_projected, CsrMatrix, Preconditioner};
use crate::SURFACE_DIM;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error("density must be positive, found {value} at vertex {vertex}")]
    NonPositiveDensity { vertex: usize, value: f64 },
    #[error("mesh has {0} connected components; solve each separately")]
    DisconnectedMesh(usize),
    #[error("load does not integrate to zero ({imbalance:e} against scale {scale:e}); normalize the density first")]
    CompatibilityViolation { imbalance: f64, scale: f64 },
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("field has {got} values, mesh has {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub cg_tol: f64,
    /// Defaults to `10 · V` when absent.
    pub max_iters: Option<usize>,
    pub precond: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cg_tol: 1e-10,
            max_iters: None,
            precond: Preconditioner::Jacobi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeumannSolution {
    /// Solution with zero mass-weighted mean.
    pub u: Vec<f64>,
    /// The normalized density the problem was solved for.
    pub density: Vec<f64>,
    pub cg_iterations: usize,
    pub linear_residual: f64,
    pub interior_pde_residual: f64,
    pub boundary_flux_error: f64,
    pub normalization_constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeResidual {
    /// Lumped L² norm of `div(f∇u) − RHS` over pointwise-valid vertices, with
    /// derivatives taken from the quadratic fits.
    pub interior_pde_residual: f64,
    /// `max |⟨∇u, η⟩ − 1|` over boundary edges; zero without boundary.
    pub boundary_flux_error: f64,
}

/// `n/(n-1)`.
pub fn sobolev_exponent(n: usize) -> f64 {
    n as f64 / (n as f64 - 1.0)
}

fn check_positive(f: &[f64]) -> Result<(), PdeError> {
    match f.iter().position(|&x| !(x > 0.0)) {
        Some(vertex) => Err(PdeError::NonPositiveDensity {
            vertex,
            value: f[vertex],
        }),
        None => Ok(()),
    }
}

fn check_size(mesh: &Mesh, f: &[f64]) -> Result<(), PdeError> {
    if f.len() != mesh.num_vertices() {
        return Err(PdeError::SizeMismatch {
            expected: mesh.num_vertices(),
            got: f.len(),
        });
    }
    Ok(())
}

/// Returns `(L, R)` with `L = ∫√(|∇f|²+f²|H|²) + ∫_∂ f` and
/// `R = n ∫ f^{n/(n-1)}`.
pub fn balance_terms(mesh: &Mesh, f: &[f64], shape: &ShapeData) -> (f64, f64) {
    let n = SURFACE_DIM;
    let p = sobolev_exponent(n);
    let integrand = lhs_integrand(mesh, shape, f);
    let dual = mesh.dual_areas();
    let lumped = |vals: &mut dyn Iterator<Item = f64>| -> f64 { vals.zip(&dual).map(|(x, d)| x * d).sum() };
    let l = lumped(&mut integrand.iter().copied()) + mesh.boundary_integrate(f).expect("sized");
    let r = n as f64 * lumped(&mut f.iter().map(|x| x.powf(p)));
    (l, r)
}

/// Scales `f` by `c = (L/R)^{n-1}` so that `L = R` afterwards (`L` is linear
/// in `f`, `R` has degree `n/(n-1)`).
pub fn normalize_density(
    mesh: &Mesh,
    f: &[f64],
    shape: &ShapeData,
) -> Result<(Vec<f64>, f64), PdeError> {
    check_size(mesh, f)?;
    check_positive(f)?;
    let (l, r) = balance_terms(mesh, f, shape);
    let c = (l / r).powi(SURFACE_DIM as i32 - 1);
    Ok((f.iter().map(|x| c * x).collect(), c))
}

/// Galerkin matrix `K_ij = ∫ f ⟨∇φ_i, ∇φ_j⟩` with `f` constant per face
/// (vertex mean).
pub fn assemble_weighted_stiffness(mesh: &Mesh, f: &[f64]) -> CsrMatrix {
    let local = exec::map_slice(mesh.triangles(), |t| {
        let fw = (f[t[0]] + f[t[1]] + f[t[2]]) / 3.0;
        let mut out = Vec::with_capacity(12);
        for k in 0..3 {
            let (i, j, o) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let a = mesh.vertex(i) - mesh.vertex(o);
            let b = mesh.vertex(j) - mesh.vertex(o);
            let cross = (a.norm_squared() * b.norm_squared() - a.dot(&b).powi(2)).max(0.0).sqrt();
            let w = 0.5 * fw * a.dot(&b) / cross;
            out.extend([(i, j, -w), (j, i, -w), (i, i, w), (j, j, w)]);
        }
        out
    });
    let triplets: Vec<(usize, usize, f64)> = local.into_iter().flatten().collect();
    CsrMatrix::from_triplets(mesh.num_vertices(), &triplets)
}

/// Right-hand side of the weak form, lumped on the circumcentric dual cells.
pub fn neumann_load(mesh: &Mesh, f: &[f64], shape: &ShapeData) -> Vec<f64> {
    let g = source_term(mesh, f, shape);
    let mass = mesh.dual_areas();
    let bmass = mesh.boundary_masses();
    (0..mesh.num_vertices())
        .map(|i| bmass[i] * f[i] - mass[i] * g[i])
        .collect()
}

/// `n f^{n/(n-1)} − √(|∇f|² + f²|H|²)` per vertex.
pub fn source_term(mesh: &Mesh, f: &[f64], shape: &ShapeData) -> Vec<f64> {
    let n = SURFACE_DIM;
    let p = sobolev_exponent(n);
    let integrand = lhs_integrand(mesh, shape, f);
    f.iter()
        .zip(&integrand)
        .map(|(fi, ii)| n as f64 * fi.powf(p) - ii)
        .collect()
}

/// Solves with a zero initial guess. `f` must already be normalized.
pub fn solve_neumann(
    mesh: &Mesh,
    f: &[f64],
    shape: &ShapeData,
    config: &SolverConfig,
) -> Result<NeumannSolution, PdeError> {
    solve_neumann_from(mesh, f, shape, config, None)
}

pub fn solve_neumann_from(
    mesh: &Mesh,
    f: &[f64],
    shape: &ShapeData,
    config: &SolverConfig,
    initial_guess: Option<&[f64]>,
) -> Result<NeumannSolution, PdeError> {
    check_size(mesh, f)?;
    check_positive(f)?;
    let (components, _) = mesh.component_labels();
    if components != 1 {
        return Err(PdeError::DisconnectedMesh(components));
    }
    let mut b = neumann_load(mesh, f, shape);
    let imbalance: f64 = b.iter().sum();
    let scale: f64 = b.iter().map(|x| x.abs()).sum();
    if imbalance.abs() > 1e-8 * scale {
        return Err(PdeError::CompatibilityViolation { imbalance, scale });
    }
    let shift = imbalance / b.len() as f64;
    b.iter_mut().for_each(|x| *x -= shift);

    let k = assemble_weighted_stiffness(mesh, f);
    let mass = mesh.vertex_masses();
    let mut u = match initial_guess {
        Some(g) => {
            check_size(mesh, g)?;
            g.to_vec()
        }
        None => vec![0.0; mesh.num_vertices()],
    };
    let max_iters = config.max_iters.unwrap_or(10 * mesh.num_vertices());
    let out = pcg_projected(&k, &b, &mut u, &mass, config.cg_tol, max_iters, config.precond);
    if !out.converged {
        return Err(PdeError::NoConvergence {
            iterations: out.iterations,
            residual: out.relative_residual,
        });
    }
    crate::sparse::remove_weighted_mean(&mut u, &mass);
    let res = pde_residual(mesh, f, &u, shape);
    Ok(NeumannSolution {
        u,
        density: f.to_vec(),
        cg_iterations: out.iterations,
        linear_residual: out.relative_residual,
        interior_pde_residual: res.interior_pde_residual,
        boundary_flux_error: res.boundary_flux_error,
        normalization_constant: 1.0,
    })
}

/// Normalizes `f` and solves; the returned solution records the constant.
pub fn normalize_and_solve(
    mesh: &Mesh,
    f: &[f64],
    shape: &ShapeData,
    config: &SolverConfig,
) -> Result<NeumannSolution, PdeError> {
    let (scaled, c) = normalize_density(mesh, f, shape)?;
    let mut sol = solve_neumann(mesh, &scaled, shape, config)?;
    sol.normalization_constant = c;
    Ok(sol)
}

pub fn pde_residual(mesh: &Mesh, f: &[f64], u: &[f64], shape: &ShapeData) -> PdeResidual {
    let g = source_term(mesh, f, shape);
    let mass = mesh.dual_areas();
    let terms = exec::map_range(mesh.num_vertices(), |v| {
        if !shape.is_pointwise_valid(v) {
            return 0.0;
        }
        let (Some(fu), Some(ff)) = (shape.fits.fit(v, |j| u[j]), shape.fits.fit(v, |j| f[j])) else {
            return 0.0;
        };
        let div = f[v] * fu.hessian.trace() + ff.gradient.dot(&fu.gradient);
        mass[v] * (div - g[v]).powi(2)
    });
    let interior = terms.iter().sum::<f64>().sqrt();

    let grad = face_gradient(mesh, u);
    let mut flux: f64 = 0.0;
    if mesh.has_boundary() {
        let mut edge_face = std::collections::HashMap::new();
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for k in 0..3 {
                edge_face.insert((tri[k], tri[(k + 1) % 3]), (t, tri[(k + 2) % 3]));
            }
        }
        for e in mesh.boundary_edges() {
            let (t, o) = edge_face[&(e[0], e[1])];
            let dir = (mesh.vertex(e[1]) - mesh.vertex(e[0])).normalize();
            let away = mesh.vertex(e[0]) - mesh.vertex(o);
            let eta = (away - dir * dir.dot(&away)).normalize();
            flux = flux.max((grad.values[t].dot(&eta) - 1.0).abs());
        }
    }
    PdeResidual {
        interior_pde_residual: interior,
        boundary_flux_error: flux,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AnalyticSurface;
    use std::f64::consts::PI;

    fn disk(level: usize) -> Mesh {
        AnalyticSurface::FlatDisk { radius: 1.0, ambient_dim: 4 }.mesh_at_level(4, level)
    }

    #[test]
    fn normalization_examples() {
        let m = disk(2);
        let s = ShapeData::compute(&m);
        let (l, r) = balance_terms(&m, &vec![1.0; m.num_vertices()], &s);
        assert!((l - m.boundary_length()).abs() < 1e-9);
        assert!((r - 2.0 * m.area()).abs() < 1e-12);
        assert!((l - 2.0 * PI).abs() < 0.01 && (r - 2.0 * PI).abs() < 0.01);

        let (scaled, c) = normalize_density(&m, &vec![4.0; m.num_vertices()], &s).unwrap();
        let expected_c = 0.25 * m.boundary_length() / (2.0 * m.area());
        assert!((c - expected_c).abs() < 1e-12);
        assert!((c - 0.25).abs() < 0.01);
        let (l2, r2) = balance_terms(&m, &scaled, &s);
        assert!((l2 / r2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn non_positive_density_is_rejected() {
        let m = disk(0);
        let s = ShapeData::compute(&m);
        let mut f = vec![1.0; m.num_vertices()];
        f[3] = 0.0;
        assert_eq!(
            normalize_density(&m, &f, &s).unwrap_err(),
            PdeError::NonPositiveDensity { vertex: 3, value: 0.0 }
        );
    }

    #[test]
    fn stiffness_properties() {
        let m = disk(1);
        let f: Vec<f64> = m.vertices().iter().map(|p| 1.0 + 0.3 * p[0]).collect();
        let k = assemble_weighted_stiffness(&m, &f);
        assert!(k.max_asymmetry() < 1e-14);
        for r in 0..k.dim() {
            assert!(k.row(r).map(|(_, v)| v).sum::<f64>().abs() < 1e-12);
        }
        let f2: Vec<f64> = f.iter().map(|x| 2.0 * x).collect();
        let k2 = assemble_weighted_stiffness(&m, &f2);
        for r in 0..k.dim() {
            for (c, v) in k.row(r) {
                assert!((k2.get(r, c) - 2.0 * v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn unit_weight_gives_cotangent_laplacian() {
        // right isoceles triangle: the 45° angles contribute cot = 1, the
        // right angle nothing
        let m = Mesh::new(
            3,
            vec![
                crate::Point::zeros(),
                crate::Point::new(1.0, 0.0, 0.0, 0.0),
                crate::Point::new(0.0, 1.0, 0.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let k = assemble_weighted_stiffness(&m, &[1.0; 3]);
        assert!(k.get(1, 2).abs() < 1e-15);
        assert!((k.get(0, 1) + 0.5).abs() < 1e-15);
        assert!((k.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unnormalized_density_is_incompatible() {
        let m = disk(1);
        let s = ShapeData::compute(&m);
        let f = vec![3.0; m.num_vertices()];
        assert!(matches!(
            solve_neumann(&m, &f, &s, &SolverConfig::default()),
            Err(PdeError::CompatibilityViolation { .. })
        ));
    }

    #[test]
    fn disconnected_mesh_is_rejected() {
        let d = disk(0);
        let shifted = d.map_vertices(|p| p + crate::Point::new(5.0, 0.0, 0.0, 0.0)).unwrap();
        let m = Mesh::disjoint_union(&[d, shifted]).unwrap();
        let s = ShapeData::compute(&m);
        let f = vec![1.0; m.num_vertices()];
        assert_eq!(
            normalize_and_solve(&m, &f, &s, &SolverConfig::default()).unwrap_err(),
            PdeError::DisconnectedMesh(2)
        );
    }

    #[test]
    fn energy_identity_and_gauge() {
        let m = disk(2);
        let s = ShapeData::compute(&m);
        let f: Vec<f64> = m.vertices().iter().map(|p| 1.0 + 0.2 * p[1]).collect();
        let cfg = SolverConfig::default();
        let sol = normalize_and_solve(&m, &f, &s, &cfg).unwrap();
        let k = assemble_weighted_stiffness(&m, &sol.density);
        let b = neumann_load(&m, &sol.density, &s);
        let ku = k.mul_vec(&sol.u);
        let uku: f64 = sol.u.iter().zip(&ku).map(|(a, b)| a * b).sum();
        let ub: f64 = sol.u.iter().zip(&b).map(|(a, b)| a * b).sum();
        assert!((uku - ub).abs() <= 1e-9 * uku.abs());

        let guess = vec![7.5; m.num_vertices()];
        let sol2 = solve_neumann_from(&m, &sol.density, &s, &cfg, Some(&guess)).unwrap();
        let diff = sol.u.iter().zip(&sol2.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");

        let mass = m.vertex_masses();
        let mean: f64 = sol.u.iter().zip(&mass).map(|(a, b)| a * b).sum::<f64>() / m.area();
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn renormalization_is_idempotent() {
        let m = disk(1);
        let s = ShapeData::compute(&m);
        let f: Vec<f64> = m.vertices().iter().map(|p| 1.0 + 0.1 * p[0]).collect();
        let f3: Vec<f64> = f.iter().map(|x| 3.0 * x).collect();
        let cfg = SolverConfig { cg_tol: 1e-13, ..Default::default() };
        let a = normalize_and_solve(&m, &f, &s, &cfg).unwrap();
        let b = normalize_and_solve(&m, &f3, &s, &cfg).unwrap();
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
