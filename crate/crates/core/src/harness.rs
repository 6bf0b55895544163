//! Both sides of the inequality, deficit ratios, the isoperimetric special
//! case and diagnostics of the rigidity statement in the equality case.

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::Mesh;
use crate::shape::{vertex_gradient, ShapeData};
use crate::transport::TransportState;
use crate::{Point, SURFACE_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("ball dimension must be at least 1, got {0}")]
    BallDimension(usize),
    #[error("intrinsic dimension must be at least 2, got {0}")]
    IntrinsicDimension(usize),
    #[error("codimension must be at least 1")]
    Codimension,
}

/// Numerical slack used by the checks. `None` entries resolve to `5·h` where
/// `h` is the relative mesh size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Eigenvalue slack for `D²u − ⟨II, y⟩ ⪰ 0`, relative to the local scale
    /// `max(1, ‖D²u‖, ‖II‖)`.
    pub tol_psd: f64,
    /// Vertices with `|∇u| ≥ 1 − tol_open` are excluded from Ω.
    pub tol_open: f64,
    /// Allowed excess of `det DΦ / f^{n/(n-1)}` over 1.
    pub tol_jac: f64,
    pub tol_disc: Option<f64>,
    /// Largest accepted `|Φ(x̄, ȳ) − ξ|` for a coverage hit.
    pub tol_recon: Option<f64>,
    /// Deficit slack for the near-equality verdict.
    pub eps_eq: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_psd: 1e-6,
            tol_open: 1e-6,
            tol_jac: 0.02,
            tol_disc: None,
            tol_recon: None,
            eps_eq: 0.01,
        }
    }
}

impl Tolerances {
    pub fn disc(&self, mesh: &Mesh) -> f64 {
        self.tol_disc.unwrap_or(5.0 * mesh.relative_h())
    }

    pub fn recon(&self, mesh: &Mesh) -> f64 {
        self.tol_recon.unwrap_or(5.0 * mesh.relative_h())
    }

    /// Copy with every mesh-dependent entry filled in.
    pub fn resolved(&self, mesh: &Mesh) -> Self {
        Self {
            tol_disc: Some(self.disc(mesh)),
            tol_recon: Some(self.recon(mesh)),
            ..*self
        }
    }
}

/// `|B^d|` for `d ≥ 0` by the two-step recursion `|B^d| = (2π/d)|B^{d-2}|`.
fn unit_ball(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball(d - 2),
    }
}

/// Volume of the unit ball in `R^d`.
pub fn ball_volume(d: usize) -> Result<f64, HarnessError> {
    if d < 1 {
        return Err(HarnessError::BallDimension(d));
    }
    Ok(unit_ball(d))
}

/// Constant of the inequality for intrinsic dimension `n` and codimension
/// `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolevConstant {
    pub n: usize,
    pub m: usize,
    /// Codimension the constant was evaluated with; codimension one uses the
    /// codimension-two constant.
    pub m_effective: usize,
    pub value: f64,
    pub ball_n: f64,
    pub ball_m: f64,
    pub ball_n_plus_m: f64,
    pub note: Option<String>,
}

pub fn sobolev_constant(n: usize, m: usize) -> Result<SobolevConstant, HarnessError> {
    if n < 2 {
        return Err(HarnessError::IntrinsicDimension(n));
    }
    if m < 1 {
        return Err(HarnessError::Codimension);
    }
    let (m_eff, note) = if m == 1 {
        (
            2,
            Some("codimension 1 evaluated with the codimension 2 constant (hypersurface viewed in one more dimension)".to_string()),
        )
    } else {
        (m, None)
    };
    let (bn, bm, bnm) = (unit_ball(n), unit_ball(m_eff), unit_ball(n + m_eff));
    let value = n as f64 * ((n + m_eff) as f64 * bnm / (m_eff as f64 * bm)).powf(1.0 / n as f64);
    Ok(SobolevConstant {
        n,
        m,
        m_effective: m_eff,
        value,
        ball_n: bn,
        ball_m: bm,
        ball_n_plus_m: bnm,
        note,
    })
}

/// `√(|∇f|² + f²|H|²)` per vertex, with the face-averaged vertex gradient.
pub fn lhs_integrand(mesh: &Mesh, shape: &ShapeData, f: &[f64]) -> Vec<f64> {
    let grad = vertex_gradient(mesh, &shape.frames, f);
    (0..mesh.num_vertices())
        .map(|v| {
            let h = shape.mean_curvature.values[v].norm_squared();
            (grad[v].norm_squared() + f[v] * f[v] * h).sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LhsTerms {
    /// `∫ √(|∇f|² + f²|H|²)`.
    pub interior: f64,
    /// `∫_∂ f`.
    pub boundary: f64,
    pub total: f64,
}

pub fn sobolev_lhs(mesh: &Mesh, f: &[f64], shape: &ShapeData) -> LhsTerms {
    let interior = mesh.integrate(&lhs_integrand(mesh, shape, f)).expect("field sized to mesh");
    let boundary = mesh.boundary_integrate(f).expect("field sized to mesh");
    LhsTerms {
        interior,
        boundary,
        total: interior + boundary,
    }
}

/// `∫ f^{n/(n-1)}`.
pub fn density_power_integral(mesh: &Mesh, f: &[f64], n: usize) -> f64 {
    let p = n as f64 / (n as f64 - 1.0);
    let fp: Vec<f64> = f.iter().map(|x| x.powf(p)).collect();
    mesh.integrate(&fp).expect("field sized to mesh")
}

pub fn sobolev_rhs(mesh: &Mesh, f: &[f64], n: usize, m: usize) -> Result<f64, HarnessError> {
    let c = sobolev_constant(n, m)?;
    let i = density_power_integral(mesh, f, n);
    Ok(c.value * i.powf((n as f64 - 1.0) / n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub n: usize,
    pub m: usize,
    pub m_effective: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub deficit: f64,
    pub constant: f64,
    pub density_power_integral: f64,
    pub interior_term: f64,
    pub boundary_term: f64,
    pub ball_n: f64,
    pub ball_m: f64,
    pub ball_n_plus_m: f64,
    pub tol_disc: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// `lhs/rhs`; passes when it is at least `1 − tol_disc`.
pub fn deficit(
    mesh: &Mesh,
    f: &[f64],
    n: usize,
    m: usize,
    shape: &ShapeData,
    tolerances: &Tolerances,
) -> Result<InequalityReport, HarnessError> {
    let c = sobolev_constant(n, m)?;
    let lhs = sobolev_lhs(mesh, f, shape);
    let integral = density_power_integral(mesh, f, n);
    let rhs = c.value * integral.powf((n as f64 - 1.0) / n as f64);
    let ratio = lhs.total / rhs;
    let tol = tolerances.disc(mesh);
    Ok(InequalityReport {
        n,
        m,
        m_effective: c.m_effective,
        lhs: lhs.total,
        rhs,
        deficit: ratio,
        constant: c.value,
        density_power_integral: integral,
        interior_term: lhs.interior,
        boundary_term: lhs.boundary,
        ball_n: c.ball_n,
        ball_m: c.ball_m,
        ball_n_plus_m: c.ball_n_plus_m,
        tol_disc: tol,
        pass: ratio >= 1.0 - tol,
        note: c.note,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsoperimetricReport {
    pub area: f64,
    pub boundary_length: f64,
    /// `|∂Σ| / (n|Bⁿ|^{1/n} |Σ|^{(n-1)/n})`.
    pub ratio: f64,
    /// `|∂Σ|² / (4π|Σ|)`.
    pub squared_ratio: f64,
    /// Largest `|H|` over interior vertices; near zero for minimal surfaces.
    pub max_interior_mean_curvature: f64,
}

pub fn isoperimetric_report(mesh: &Mesh, shape: &ShapeData) -> IsoperimetricReport {
    let n = SURFACE_DIM as f64;
    let area = mesh.area();
    let len = mesh.boundary_length();
    let c = n * unit_ball(SURFACE_DIM).powf(1.0 / n);
    let max_h = (0..mesh.num_vertices())
        .filter(|&v| !mesh.is_boundary_vertex(v))
        .map(|v| shape.mean_curvature_norm(v))
        .fold(0.0, f64::max);
    IsoperimetricReport {
        area,
        boundary_length: len,
        ratio: len / (c * area.powf((n - 1.0) / n)),
        squared_ratio: len * len / (4.0 * std::f64::consts::PI * area),
        max_interior_mean_curvature: max_h,
    }
}

/// `u ≈ ½λ|x − p|² + c` on the best-fit plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticPotential {
    pub lambda: f64,
    pub center: Vec<f64>,
    pub offset: f64,
    /// Root-mean-square misfit over vertices.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NearEquality,
    NotEquality,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EqualityDiagnostics {
    pub deficit: f64,
    /// Largest `‖II‖` over Ω.
    pub max_second_fundamental: f64,
    /// `max |f − f̄| / f̄` with `f̄` the area mean.
    pub density_variation: f64,
    /// Largest `‖D²u − f^{1/(n-1)} g‖` over Ω.
    pub hessian_deviation: f64,
    pub quadratic_fit: Option<QuadraticPotential>,
    /// RMS distance of the vertices to the best-fit plane.
    pub flatness: f64,
    /// `max(λ|x − p| − 1, 0)` over vertices.
    pub containment_excess: f64,
    pub tolerance: f64,
    pub eps_eq: f64,
    pub verdict: Verdict,
    /// Checks that failed; empty for a near-equality verdict.
    pub failed: Vec<String>,
}

/// Best-fit plane of the vertices: mass-weighted centroid and the two
/// leading principal directions.
fn best_fit_plane(mesh: &Mesh) -> (Point, [Point; 2], f64) {
    let mass = mesh.vertex_masses();
    let total: f64 = mass.iter().sum();
    let centroid = mesh
        .vertices()
        .iter()
        .zip(&mass)
        .fold(Point::zeros(), |acc, (p, w)| acc + p * *w)
        / total;
    let mut cov = Matrix4::<f64>::zeros();
    for (p, w) in mesh.vertices().iter().zip(&mass) {
        let d = p - centroid;
        cov += d * d.transpose() * *w;
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let a: Point = eig.eigenvectors.column(order[0]).into_owned();
    let b: Point = eig.eigenvectors.column(order[1]).into_owned();
    let sq: f64 = mesh
        .vertices()
        .iter()
        .map(|p| {
            let d = p - centroid;
            (d - a * a.dot(&d) - b * b.dot(&d)).norm_squared()
        })
        .sum();
    (centroid, [a, b], (sq / mesh.num_vertices() as f64).sqrt())
}

fn fit_quadratic_potential(mesh: &Mesh, u: &[f64], origin: &Point, plane: &[Point; 2]) -> Option<QuadraticPotential> {
    let nv = mesh.num_vertices();
    let mut design = DMatrix::<f64>::zeros(nv, 4);
    let rhs = DVector::from_column_slice(u);
    for (i, p) in mesh.vertices().iter().enumerate() {
        let d = p - origin;
        let (z1, z2) = (plane[0].dot(&d), plane[1].dot(&d));
        design[(i, 0)] = 0.5 * (z1 * z1 + z2 * z2);
        design[(i, 1)] = z1;
        design[(i, 2)] = z2;
        design[(i, 3)] = 1.0;
    }
    let coef = design.clone().svd(true, true).solve(&rhs, 1e-12).ok()?;
    let lambda = coef[0];
    if !(lambda > 0.0) {
        return None;
    }
    let (q1, q2) = (-coef[1] / lambda, -coef[2] / lambda);
    let center = origin + plane[0] * q1 + plane[1] * q2;
    let offset = coef[3] - 0.5 * lambda * (q1 * q1 + q2 * q2);
    let resid = (&design * &coef - rhs).norm() / (nv as f64).sqrt();
    Some(QuadraticPotential {
        lambda,
        center: center.iter().take(mesh.ambient_dim()).copied().collect(),
        offset,
        residual: resid,
    })
}

/// Measures how far the state is from the rigid equality configuration
/// (flat round ball, constant density, `u` a quadratic with Hessian
/// `f^{1/(n-1)} g`).
pub fn equality_diagnostics(mesh: &Mesh, f: &[f64], state: &TransportState, shape: &ShapeData) -> EqualityDiagnostics {
    let tol = state.tolerances();
    let schedule = tol.disc(mesh);
    let report = deficit(mesh, f, SURFACE_DIM, 2, shape, tol).expect("fixed dimensions");

    let omega: Vec<usize> = (0..mesh.num_vertices()).filter(|&v| state.in_omega(v)).collect();
    let max_ii = omega.iter().map(|&v| shape.ii_norm_sq(v).sqrt()).fold(0.0, f64::max);

    let mass = mesh.vertex_masses();
    let fbar = f.iter().zip(&mass).map(|(a, b)| a * b).sum::<f64>() / mesh.area();
    let variation = f.iter().map(|x| (x - fbar).abs()).fold(0.0, f64::max) / fbar;

    let exponent = 1.0 / (SURFACE_DIM as f64 - 1.0);
    let hess_dev = omega
        .iter()
        .map(|&v| {
            let target = nalgebra::Matrix2::identity() * f[v].powf(exponent);
            (state.hessian(v) - target).norm()
        })
        .fold(0.0, f64::max);

    let (origin, plane, flatness) = best_fit_plane(mesh);
    let fit = fit_quadratic_potential(mesh, state.u(), &origin, &plane);
    let containment = fit.as_ref().map_or(f64::INFINITY, |q| {
        let p = Point::from_iterator(q.center.iter().copied().chain(std::iter::repeat(0.0)).take(4));
        mesh.vertices()
            .iter()
            .map(|x| (q.lambda * (x - p).norm() - 1.0).max(0.0))
            .fold(0.0, f64::max)
    });

    let mut failed = Vec::new();
    if report.deficit > 1.0 + tol.eps_eq {
        failed.push("deficit".to_string());
    }
    if max_ii > schedule {
        failed.push("second-fundamental-form".to_string());
    }
    if variation > schedule {
        failed.push("density-variation".to_string());
    }
    if hess_dev > schedule {
        failed.push("hessian-deviation".to_string());
    }
    if flatness > schedule {
        failed.push("flatness".to_string());
    }
    if fit.is_none() {
        failed.push("quadratic-fit".to_string());
    }
    if containment > schedule {
        failed.push("containment".to_string());
    }
    EqualityDiagnostics {
        deficit: report.deficit,
        max_second_fundamental: max_ii,
        density_variation: variation,
        hessian_deviation: hess_dev,
        quadratic_fit: fit,
        flatness,
        containment_excess: containment,
        tolerance: schedule,
        eps_eq: tol.eps_eq,
        verdict: if failed.is_empty() {
            Verdict::NearEquality
        } else {
            Verdict::NotEquality
        },
        failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AnalyticSurface;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn ball_volumes() {
        assert_relative_eq!(ball_volume(2).unwrap(), PI, epsilon = 1e-15);
        assert_relative_eq!(ball_volume(3).unwrap(), 4.0 * PI / 3.0, epsilon = 1e-15);
        assert_relative_eq!(ball_volume(4).unwrap(), PI * PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(ball_volume(5).unwrap(), 8.0 * PI * PI / 15.0, epsilon = 1e-14);
        assert_eq!(ball_volume(0), Err(HarnessError::BallDimension(0)));
        for n in 1..=10 {
            let lhs = (n + 2) as f64 * ball_volume(n + 2).unwrap();
            let rhs = 2.0 * PI * ball_volume(n).unwrap();
            assert!((lhs - rhs).abs() <= 1e-13);
        }
    }

    #[test]
    fn constants() {
        let c = sobolev_constant(2, 2).unwrap();
        assert!((c.value - 2.0 * PI.sqrt()).abs() < 1e-12);
        assert!((c.value - 3.544908).abs() < 1e-6);
        let c3 = sobolev_constant(2, 3).unwrap();
        assert!((c3.value - 2.0 * (2.0 * PI / 3.0).sqrt()).abs() < 1e-12);
        assert!(c3.value < c.value);
        let c1 = sobolev_constant(2, 1).unwrap();
        assert_eq!(c1.m_effective, 2);
        assert!(c1.note.is_some());
        assert_eq!(c1.value, c.value);
        assert!(sobolev_constant(1, 2).is_err());
    }

    #[test]
    fn flat_disk_sides() {
        let m = AnalyticSurface::FlatDisk { radius: 1.0, ambient_dim: 4 }.mesh_at_level(4, 2);
        let s = ShapeData::compute(&m);
        let f = vec![1.0; m.num_vertices()];
        let lhs = sobolev_lhs(&m, &f, &s);
        assert!(lhs.interior.abs() < 1e-9);
        assert!((lhs.total - m.boundary_length()).abs() < 1e-9);
        let r = deficit(&m, &f, 2, 2, &s, &Tolerances::default()).unwrap();
        assert!((r.deficit - r.lhs / r.rhs).abs() < 1e-12);
        assert!((r.deficit - 1.0).abs() < 0.02);
        assert!(r.pass);
        let iso = isoperimetric_report(&m, &s);
        assert!((iso.ratio - 1.0).abs() < 0.02);
        assert!((iso.squared_ratio - iso.ratio * iso.ratio).abs() < 1e-12);
    }

    #[test]
    fn constant_density_on_minimal_surface_is_boundary_length() {
        let m = AnalyticSurface::Catenoid { waist: 1.0, half_height: 1.0 }.mesh_at_level(3, 1);
        let s = ShapeData::compute(&m);
        let c = 2.5;
        let lhs = sobolev_lhs(&m, &vec![c; m.num_vertices()], &s);
        assert!((lhs.boundary - c * m.boundary_length()).abs() < 1e-12);
    }
}
