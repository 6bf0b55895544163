//! The normal-bundle map `Φ(x, y) = ∇u(x) + y` built from a solved
//! potential, the sets
//!
//! ```text
//! Ω = { x interior : |∇u(x)| < 1 }
//! U = { (x, y) : x ∈ Ω, |∇u(x)|² + |y|² < 1 }
//! A = { (x, y) ∈ U : D²u(x) − ⟨II(x), y⟩ ⪰ 0 }
//! ```
//!
//! and sampled checks that `Φ(A)` covers the unit ball, that its Jacobian
//! `det(D²u − ⟨II, y⟩)` stays below `f^{n/(n-1)}`, and that the integral
//! chain between the two holds.
//!
//! Normal coordinates `y` are always taken in the frame of the vertex they
//! are attached to. Surfaces in R³ are embedded in R⁴ first, so the normal
//! space is two-dimensional everywhere.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix4, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exec;
use crate::harness::{ball_volume, Tolerances};
use crate::mesh::Mesh;
use crate::pde::{sobolev_exponent, NeumannSolution};
use crate::shape::{vertex_gradient, ShapeData};
use crate::{Point, SURFACE_DIM};

/// Ambient dimension the transport map works in.
pub const TRANSPORT_DIM: usize = 4;
const CODIM: usize = TRANSPORT_DIM - SURFACE_DIM;
/// Targets beyond this radius are tallied separately.
pub const NEAR_BOUNDARY_RADIUS: f64 = 0.98;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("vertex {0} has no usable second-order fit")]
    FlaggedVertex(usize),
    #[error("field has {got} values, mesh has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("sigma must lie in [0, 1), got {0}")]
    SigmaOutOfRange(f64),
    #[error("target |ξ| = {0} is not inside the unit ball")]
    TargetOutsideBall(f64),
}

/// Everything the ABP checks read. Owns a copy of the mesh (embedded in R⁴)
/// and its shape data.
#[derive(Debug, Clone)]
pub struct TransportState {
    mesh: Mesh,
    shape: ShapeData,
    f: Vec<f64>,
    u: Vec<f64>,
    grad_u: Vec<Point>,
    hess_u: Vec<Matrix2<f64>>,
    hess_flagged: Vec<bool>,
    omega: Vec<bool>,
    tolerances: Tolerances,
}

fn min_eigenvalue(m: &Matrix2<f64>) -> f64 {
    let a = m[(0, 0)];
    let d = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mean = 0.5 * (a + d);
    mean - (0.25 * (a - d).powi(2) + b * b).sqrt()
}

/// Builds the state from a normalized density and its solved potential. The
/// shape data must belong to `mesh`; it is recomputed when the mesh is
/// embedded into R⁴.
pub fn build_transport_state(
    mesh: &Mesh,
    f: &[f64],
    solution: &NeumannSolution,
    shape: &ShapeData,
    tolerances: &Tolerances,
) -> Result<TransportState, TransportError> {
    let nv = mesh.num_vertices();
    for len in [f.len(), solution.u.len(), shape.num_vertices()] {
        if len != nv {
            return Err(TransportError::SizeMismatch { expected: nv, got: len });
        }
    }
    let (mesh, shape) = if mesh.ambient_dim() == TRANSPORT_DIM {
        (mesh.clone(), shape.clone())
    } else {
        let m = mesh.promoted();
        let s = ShapeData::compute(&m);
        (m, s)
    };
    let u = solution.u.clone();
    let grad_u = vertex_gradient(&mesh, &shape.frames, &u);
    let fits = exec::map_range(nv, |v| shape.fits.fit(v, |j| u[j]));
    let hess_flagged: Vec<bool> = fits.iter().map(Option::is_none).collect();
    let hess_u: Vec<Matrix2<f64>> = fits.iter().map(|q| q.map_or_else(Matrix2::zeros, |q| q.hessian)).collect();
    let omega = (0..nv)
        .map(|v| !shape.boundary[v] && !hess_flagged[v] && grad_u[v].norm() < 1.0 - tolerances.tol_open)
        .collect();
    Ok(TransportState {
        tolerances: tolerances.resolved(&mesh),
        mesh,
        shape,
        f: f.to_vec(),
        u,
        grad_u,
        hess_u,
        hess_flagged,
        omega,
    })
}

/// Value of `Φ` together with the membership of `(x, y)` in `U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiValue {
    pub point: Point,
    pub outside_u: bool,
}

impl TransportState {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn shape(&self) -> &ShapeData {
        &self.shape
    }

    pub fn density(&self) -> &[f64] {
        &self.f
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }

    pub fn gradient(&self, v: usize) -> &Point {
        &self.grad_u[v]
    }

    /// Fitted `D²u` in the vertex tangent basis (zero at flagged vertices).
    pub fn hessian(&self, v: usize) -> Matrix2<f64> {
        self.hess_u[v]
    }

    pub fn in_omega(&self, v: usize) -> bool {
        self.omega[v]
    }

    pub fn omega_mask(&self) -> &[bool] {
        &self.omega
    }

    pub fn relative_h(&self) -> f64 {
        self.mesh.relative_h()
    }

    /// `Φ(x_v, y) = ∇u(x_v) + Σ y_α ν_α(x_v)`.
    pub fn phi_eval(&self, v: usize, y: &[f64]) -> PhiValue {
        let g = self.grad_u[v];
        let y2: f64 = y.iter().map(|c| c * c).sum();
        PhiValue {
            point: g + self.shape.frames[v].normal_vector(y),
            outside_u: !self.omega[v] || g.norm_squared() + y2 >= 1.0,
        }
    }

    /// `D²u(x_v) − ⟨II(x_v), y⟩`.
    pub fn transport_matrix(&self, v: usize, y: &[f64]) -> Result<Matrix2<f64>, TransportError> {
        if self.hess_flagged[v] || self.shape.flagged[v] {
            return Err(TransportError::FlaggedVertex(v));
        }
        Ok(self.hess_u[v] - self.shape.ii_along(v, y))
    }

    /// Jacobian determinant of `Φ` at `(x_v, y)`.
    pub fn jacobian_det(&self, v: usize, y: &[f64]) -> Result<f64, TransportError> {
        self.transport_matrix(v, y).map(|m| m.determinant())
    }

    /// Slack scale for the PSD test at `v`.
    fn psd_scale(&self, v: usize) -> f64 {
        1f64.max(self.hess_u[v].norm()).max(self.shape.ii_norm_sq(v).sqrt())
    }

    /// Whether `D²u(x_v) − ⟨II, y⟩ ⪰ −tol_psd · scale`, and its smallest
    /// eigenvalue.
    pub fn psd_test(&self, v: usize, y: &[f64]) -> (bool, f64) {
        match self.transport_matrix(v, y) {
            Ok(m) => {
                let e = min_eigenvalue(&m);
                (e >= -self.tolerances.tol_psd * self.psd_scale(v), e)
            }
            Err(_) => (false, f64::NAN),
        }
    }

    pub fn in_a(&self, v: usize, y: &[f64]) -> bool {
        !self.phi_eval(v, y).outside_u && self.psd_test(v, y).0
    }

    /// Jacobian of `Φ` by differentiating it numerically over the fitting
    /// stencil of `v`, returned as a determinant in the frame at `v`.
    ///
    /// Neighbouring normal frames are obtained by projecting the frame at
    /// `v` onto the neighbour's normal space, so `y` is transported
    /// continuously.
    pub fn jacobian_fd(&self, v: usize, y: &[f64]) -> Result<f64, TransportError> {
        if self.shape.flagged[v] {
            return Err(TransportError::FlaggedVertex(v));
        }
        let frame = &self.shape.frames[v];
        let phi_at = |j: usize| -> Point {
            let fj = &self.shape.frames[j];
            let mut moved: Vec<Point> = Vec::with_capacity(CODIM);
            for n in &frame.normals {
                let mut p = fj.normal_vector(&fj.normal_coords(n));
                for q in &moved {
                    p -= q * q.dot(&p);
                }
                moved.push(p.normalize());
            }
            moved
                .iter()
                .zip(y)
                .fold(self.grad_u[j], |acc, (n, c)| acc + n * *c)
        };
        let mut cols = [Point::zeros(); 2];
        for k in 0..TRANSPORT_DIM {
            let fit = self
                .shape
                .fits
                .fit(v, |j| phi_at(j)[k])
                .ok_or(TransportError::FlaggedVertex(v))?;
            cols[0][k] = fit.gradient[0];
            cols[1][k] = fit.gradient[1];
        }
        let mut m = Matrix4::<f64>::zeros();
        let basis: Vec<Point> = frame.tangent.iter().chain(&frame.normals).copied().collect();
        let columns = [cols[0], cols[1], frame.normals[0], frame.normals[1]];
        for (c, col) in columns.iter().enumerate() {
            for (r, b) in basis.iter().enumerate() {
                m[(r, c)] = b.dot(col);
            }
        }
        Ok(m.determinant())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    MinimizerOnBoundary,
    PsdViolation,
    RadiusViolation,
    ReconstructionError,
}

impl FailureReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MinimizerOnBoundary => "minimizer-on-boundary",
            Self::PsdViolation => "psd-violation",
            Self::RadiusViolation => "radius-violation",
            Self::ReconstructionError => "reconstruction-error",
        }
    }
}

/// Outcome of minimizing `w = u − ⟨x, ξ⟩` for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct Preimage {
    /// Vertex minimizing `w`.
    pub vertex: usize,
    /// Newton offset from the vertex in its tangent coordinates.
    pub offset: Vector2<f64>,
    /// Normal coordinates of `ξ` in the frame at `vertex`.
    pub y: Vec<f64>,
    pub interior: bool,
    pub in_u: bool,
    pub psd: bool,
    pub min_eigenvalue: f64,
    /// `|Φ(x̄, ȳ) − ξ|`.
    pub reconstruction_error: f64,
    pub failure: Option<FailureReason>,
}

impl TransportState {
    fn local_edge(&self, v: usize) -> f64 {
        self.mesh
            .vertex_neighbors(v)
            .iter()
            .map(|&w| (self.mesh.vertex(w) - self.mesh.vertex(v)).norm())
            .fold(0.0, f64::max)
    }

    /// `∇u` at `x_v + s` by linear interpolation of vertex gradients in the
    /// incident face that best contains the offset.
    fn gradient_at(&self, v: usize, s: &Vector2<f64>) -> Point {
        if s.norm() == 0.0 {
            return self.grad_u[v];
        }
        let frame = &self.shape.frames[v];
        let target = frame.tangent[0] * s[0] + frame.tangent[1] * s[1];
        let mut best: Option<(f64, [f64; 3], [usize; 3])> = None;
        for &f in self.mesh.vertex_faces(v) {
            let t = self.mesh.triangles()[f];
            let p0 = self.mesh.vertex(t[0]) - self.mesh.vertex(v);
            let e1 = self.mesh.vertex(t[1]) - self.mesh.vertex(t[0]);
            let e2 = self.mesh.vertex(t[2]) - self.mesh.vertex(t[0]);
            let d = target - p0;
            let (g11, g12, g22) = (e1.dot(&e1), e1.dot(&e2), e2.dot(&e2));
            let (r1, r2) = (e1.dot(&d), e2.dot(&d));
            let det = g11 * g22 - g12 * g12;
            let b1 = (g22 * r1 - g12 * r2) / det;
            let b2 = (g11 * r2 - g12 * r1) / det;
            let bary = [1.0 - b1 - b2, b1, b2];
            let worst = bary.iter().copied().fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(w, _, _)| worst > w) {
                best = Some((worst, bary, t));
            }
        }
        let Some((_, bary, t)) = best else {
            return self.grad_u[v];
        };
        let clamped = bary.map(|b| b.max(0.0));
        let total: f64 = clamped.iter().sum();
        (0..3).fold(Point::zeros(), |acc, k| acc + self.grad_u[t[k]] * (clamped[k] / total))
    }

    /// Minimizes `w(x) = u(x) − ⟨x, ξ⟩` over the vertices (ties go to the
    /// lowest index), refines with one Newton step in the tangent plane and
    /// classifies the result.
    pub fn locate_preimage(&self, xi: &Point) -> Preimage {
        let v = (0..self.mesh.num_vertices())
            .map(|i| (i, self.u[i] - self.mesh.vertex(i).dot(xi)))
            .fold((0usize, f64::INFINITY), |best, (i, w)| if w < best.1 { (i, w) } else { best })
            .0;
        let frame = &self.shape.frames[v];
        let y = frame.normal_coords(xi);
        let interior = !self.shape.boundary[v];

        let mut offset = Vector2::zeros();
        if let Some(fit) = self.shape.fits.fit(v, |j| self.u[j]) {
            let grad_w = fit.gradient - frame.tangent_coords(xi);
            let hess_w = fit.hessian - self.shape.ii_along(v, &y);
            if min_eigenvalue(&hess_w) > 0.0 {
                if let Some(inv) = hess_w.try_inverse() {
                    let s = -(inv * grad_w);
                    if s.norm() <= 1.5 * self.local_edge(v) {
                        offset = s;
                    }
                }
            }
        }
        let grad = self.gradient_at(v, &offset);
        let reconstruction_error = (grad - frame.project_tangent(xi)).norm();
        let y2: f64 = y.iter().map(|c| c * c).sum();
        let in_u = self.omega[v] && grad.norm_squared() + y2 < 1.0;
        let (psd, min_eig) = self.psd_test(v, &y);
        let failure = if !interior {
            Some(FailureReason::MinimizerOnBoundary)
        } else if !psd {
            Some(FailureReason::PsdViolation)
        } else if !in_u {
            Some(FailureReason::RadiusViolation)
        } else if reconstruction_error > self.tolerances.recon(&self.mesh) {
            Some(FailureReason::ReconstructionError)
        } else {
            None
        };
        Preimage {
            vertex: v,
            offset,
            y,
            interior,
            in_u,
            psd,
            min_eigenvalue: min_eig,
            reconstruction_error,
            failure,
        }
    }
}

/// Per-sample generator: stream `index` of a ChaCha8 keyed by `seed`, so
/// results do not depend on scheduling.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform point of the open unit ball in `R^dim` by rejection from the cube.
pub fn sample_ball(rng: &mut impl Rng, dim: usize) -> Point {
    loop {
        let mut p = Point::zeros();
        for k in 0..dim {
            p[k] = rng.gen_range(-1.0..1.0);
        }
        if p.norm_squared() < 1.0 {
            return p;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageFailure {
    pub sample: usize,
    pub xi: [f64; 4],
    pub vertex: usize,
    pub reason: FailureReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub samples: usize,
    pub hits: usize,
    pub fraction: f64,
    pub seed: u64,
    /// Samples with `|ξ| > 0.98` and how many of them were hit.
    pub near_boundary_samples: usize,
    pub near_boundary_hits: usize,
    /// Hit fraction over samples with `|ξ| ≤ 0.98`.
    pub interior_fraction: f64,
    /// Largest `|Φ(x̄, ȳ) − ξ|` over hits.
    pub max_reconstruction_error: f64,
    pub reconstruction_tolerance: f64,
    pub failure_counts: BTreeMap<String, usize>,
    pub failures: Vec<CoverageFailure>,
}

impl TransportState {
    pub fn coverage_check(&self, sample_count: usize, seed: u64) -> Result<CoverageReport, TransportError> {
        if sample_count == 0 {
            return Err(TransportError::NoSamples);
        }
        let results = exec::map_range(sample_count, |i| {
            let mut rng = sample_rng(seed, i as u64);
            let xi = sample_ball(&mut rng, TRANSPORT_DIM);
            (xi, self.locate_preimage(&xi))
        });
        let mut hits = 0;
        let (mut nb, mut nb_hits) = (0, 0);
        let mut max_err: f64 = 0.0;
        let mut counts = BTreeMap::new();
        let mut failures = Vec::new();
        for (i, (xi, pre)) in results.iter().enumerate() {
            let near = xi.norm() > NEAR_BOUNDARY_RADIUS;
            nb += near as usize;
            match pre.failure {
                None => {
                    hits += 1;
                    nb_hits += near as usize;
                    max_err = max_err.max(pre.reconstruction_error);
                }
                Some(reason) => {
                    *counts.entry(reason.as_str().to_string()).or_insert(0) += 1;
                    failures.push(CoverageFailure {
                        sample: i,
                        xi: [xi[0], xi[1], xi[2], xi[3]],
                        vertex: pre.vertex,
                        reason,
                    });
                }
            }
        }
        let inner = sample_count - nb;
        Ok(CoverageReport {
            samples: sample_count,
            hits,
            fraction: hits as f64 / sample_count as f64,
            seed,
            near_boundary_samples: nb,
            near_boundary_hits: nb_hits,
            interior_fraction: if inner == 0 { 1.0 } else { (hits - nb_hits) as f64 / inner as f64 },
            max_reconstruction_error: max_err,
            reconstruction_tolerance: self.tolerances.recon(&self.mesh),
            failure_counts: counts,
            failures,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobianBoundReport {
    /// Sampled pairs that landed in `A`.
    pub evaluated: usize,
    pub max_ratio: f64,
    pub argmax_vertex: Option<usize>,
    pub argmax_y: Vec<f64>,
    /// Smallest determinant over accepted pairs; should be ≥ 0 up to slack.
    pub min_det: f64,
    pub tol_jac: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobianFdReport {
    pub evaluated: usize,
    pub max_relative_error: f64,
    pub mean_relative_error: f64,
    pub argmax_vertex: Option<usize>,
    pub tolerance: f64,
    pub pass: bool,
}

impl TransportState {
    /// Normal vectors drawn uniformly from the disk of radius
    /// `√(1 − |∇u|²) − tol_open` at vertex `v`.
    fn normal_samples(&self, v: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let radius = (1.0 - self.grad_u[v].norm_squared()).max(0.0).sqrt() - self.tolerances.tol_open;
        if radius <= 0.0 {
            return Vec::new();
        }
        let mut rng = sample_rng(seed, v as u64);
        (0..count)
            .map(|_| {
                let p = sample_ball(&mut rng, CODIM);
                (0..CODIM).map(|k| p[k] * radius).collect()
            })
            .collect()
    }

    /// `max det DΦ / f^{n/(n-1)}` over sampled `(x, y) ∈ A`.
    pub fn jacobian_bound_check(&self, samples_per_vertex: usize, seed: u64) -> JacobianBoundReport {
        let p = sobolev_exponent(SURFACE_DIM);
        let per_vertex = exec::map_range(self.mesh.num_vertices(), |v| {
            let mut out = Vec::new();
            if !self.omega[v] {
                return out;
            }
            for y in self.normal_samples(v, samples_per_vertex, seed) {
                if !self.in_a(v, &y) {
                    continue;
                }
                let det = self.jacobian_det(v, &y).expect("Ω vertices are unflagged");
                out.push((det, det / self.f[v].powf(p), y));
            }
            out
        });
        let mut evaluated = 0;
        let mut max_ratio = f64::NEG_INFINITY;
        let mut min_det = f64::INFINITY;
        let mut arg = None;
        let mut arg_y = Vec::new();
        for (v, list) in per_vertex.into_iter().enumerate() {
            for (det, ratio, y) in list {
                evaluated += 1;
                min_det = min_det.min(det);
                if ratio > max_ratio {
                    max_ratio = ratio;
                    arg = Some(v);
                    arg_y = y;
                }
            }
        }
        let tol = self.tolerances.tol_jac;
        JacobianBoundReport {
            evaluated,
            max_ratio,
            argmax_vertex: arg,
            argmax_y: arg_y,
            min_det,
            tol_jac: tol,
            pass: evaluated > 0 && max_ratio <= 1.0 + tol && min_det >= -tol,
        }
    }

    /// Compares [`jacobian_det`](Self::jacobian_det) with
    /// [`jacobian_fd`](Self::jacobian_fd) at Ω vertices whose stencil avoids
    /// the boundary, for `y = 0` and sampled `y`. Errors are relative to
    /// `max(|det|, f^{n/(n-1)})`; the tolerance is `10·h`.
    pub fn jacobian_fd_check(&self, samples_per_vertex: usize, seed: u64) -> JacobianFdReport {
        let p = sobolev_exponent(SURFACE_DIM);
        let errors = exec::map_range(self.mesh.num_vertices(), |v| {
            if !self.omega[v] || self.shape.fits.stencil(v).iter().any(|&j| self.shape.boundary[j]) {
                return Vec::new();
            }
            let mut ys = vec![vec![0.0; CODIM]];
            ys.extend(self.normal_samples(v, samples_per_vertex, seed));
            ys.iter()
                .filter_map(|y| {
                    let a = self.jacobian_det(v, y).ok()?;
                    let b = self.jacobian_fd(v, y).ok()?;
                    Some((a - b).abs() / a.abs().max(self.f[v].powf(p)))
                })
                .collect()
        });
        let mut evaluated = 0;
        let mut max_err: f64 = 0.0;
        let mut sum = 0.0;
        let mut arg = None;
        for (v, list) in errors.into_iter().enumerate() {
            for e in list {
                evaluated += 1;
                sum += e;
                if e > max_err {
                    max_err = e;
                    arg = Some(v);
                }
            }
        }
        let tol = 10.0 * self.relative_h();
        JacobianFdReport {
            evaluated,
            max_relative_error: max_err,
            mean_relative_error: if evaluated > 0 { sum / evaluated as f64 } else { 0.0 },
            argmax_vertex: arg,
            tolerance: tol,
            pass: evaluated > 0 && max_err <= tol,
        }
    }
}

pub const DEFAULT_SIGMAS: [f64; 6] = [0.0, 0.25, 0.5, 0.75, 0.9, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainRow {
    pub sigma: f64,
    /// `|B^{n+m}|(1 − σ^{n+m})`.
    pub lhs: f64,
    /// `|B^m| ∫_Ω [(1 − |∇u|²)^{m/2} − (σ² − |∇u|²)₊^{m/2}] f^{n/(n-1)}`.
    pub middle: f64,
    /// `(m/2)|B^m|(1 − σ²) ∫_Ω f^{n/(n-1)}`.
    pub rhs: f64,
    pub lhs_below_middle: bool,
    pub middle_below_rhs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub rows: Vec<ChainRow>,
    pub tolerance: f64,
    /// `lhs/(1 − σ)` and `rhs/(1 − σ)` at the largest σ.
    pub lhs_divided_difference: f64,
    pub rhs_divided_difference: f64,
    /// `(n+m)|B^{n+m}|` and `m|B^m| ∫_Ω f^{n/(n-1)}`.
    pub lhs_limit: f64,
    pub rhs_limit: f64,
    pub monotone: bool,
}

impl ChainReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sigma,lhs,middle,rhs,lhs_below_middle,middle_below_rhs\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{},{}\n",
                r.sigma, r.lhs, r.middle, r.rhs, r.lhs_below_middle, r.middle_below_rhs
            ));
        }
        s
    }
}

impl TransportState {
    /// Lumped weights of Ω. A boundary vertex's dual cell counts when its
    /// nearest interior vertex lies in Ω, so the boundary strip is not lost.
    pub fn omega_weights(&self) -> Vec<f64> {
        let mass = self.mesh.vertex_masses();
        (0..self.mesh.num_vertices())
            .map(|v| if self.omega[self.shape.nearest_interior[v]] { mass[v] } else { 0.0 })
            .collect()
    }

    pub fn annulus_chain_check(&self, sigmas: &[f64]) -> Result<ChainReport, TransportError> {
        if let Some(&s) = sigmas.iter().find(|s| !(0.0..1.0).contains(*s)) {
            return Err(TransportError::SigmaOutOfRange(s));
        }
        let (n, m) = (SURFACE_DIM, CODIM);
        let half_m = m as f64 / 2.0;
        let p = sobolev_exponent(n);
        let bm = ball_volume(m).expect("m ≥ 1");
        let bnm = ball_volume(n + m).expect("n + m ≥ 1");
        let weights = self.omega_weights();
        let fp: Vec<f64> = self.f.iter().map(|x| x.powf(p)).collect();
        let f_integral: f64 = weights.iter().zip(&fp).map(|(w, x)| w * x).sum();
        let tol = self.tolerances.disc(&self.mesh);
        let rows: Vec<ChainRow> = sigmas
            .iter()
            .map(|&sigma| {
                let middle: f64 = (0..self.mesh.num_vertices())
                    .map(|v| {
                        let g2 = self.grad_u[v].norm_squared();
                        let outer = (1.0 - g2).max(0.0).powf(half_m);
                        let inner = (sigma * sigma - g2).max(0.0).powf(half_m);
                        weights[v] * (outer - inner) * fp[v]
                    })
                    .sum::<f64>()
                    * bm;
                let lhs = bnm * (1.0 - sigma.powi((n + m) as i32));
                let rhs = half_m * bm * (1.0 - sigma * sigma) * f_integral;
                ChainRow {
                    sigma,
                    lhs,
                    middle,
                    rhs,
                    lhs_below_middle: lhs <= middle * (1.0 + tol),
                    middle_below_rhs: middle <= rhs * (1.0 + tol),
                }
            })
            .collect();
        let last = rows.iter().max_by(|a, b| a.sigma.total_cmp(&b.sigma));
        let (ld, rd) = last.map_or((f64::NAN, f64::NAN), |r| (r.lhs / (1.0 - r.sigma), r.rhs / (1.0 - r.sigma)));
        Ok(ChainReport {
            monotone: rows.iter().all(|r| r.lhs_below_middle && r.middle_below_rhs),
            rows,
            tolerance: tol,
            lhs_divided_difference: ld,
            rhs_divided_difference: rd,
            lhs_limit: (n + m) as f64 * bnm,
            rhs_limit: m as f64 * bm * f_integral,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AnalyticSurface;
    use crate::pde::{normalize_and_solve, SolverConfig};
    use std::f64::consts::PI;

    fn disk_state(level: usize, tol: Tolerances) -> TransportState {
        let m = AnalyticSurface::FlatDisk { radius: 1.0, ambient_dim: 4 }.mesh_at_level(4, level);
        let s = ShapeData::compute(&m);
        let f = vec![1.0; m.num_vertices()];
        let sol = normalize_and_solve(&m, &f, &s, &SolverConfig::default()).unwrap();
        build_transport_state(&m, &sol.density, &sol, &s, &tol).unwrap()
    }

    #[test]
    fn min_eigenvalue_of_diagonal() {
        assert_eq!(min_eigenvalue(&Matrix2::new(2.0, 0.0, 0.0, -1.0)), -1.0);
        let m = Matrix2::new(2.0, 1.0, 1.0, 2.0);
        assert!((min_eigenvalue(&m) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn disk_omega_and_phi() {
        let st = disk_state(2, Tolerances::default());
        let mesh = st.mesh().clone();
        for v in 0..mesh.num_vertices() {
            assert_eq!(st.in_omega(v), !mesh.is_boundary_vertex(v));
            let phi = st.phi_eval(v, &[0.0, 0.0]);
            if st.in_omega(v) {
                assert!((phi.point - mesh.vertex(v)).norm() < 0.05);
            }
        }
        let center = (0..mesh.num_vertices()).find(|&v| mesh.vertex(v).norm() < 1e-12).unwrap();
        assert!(st.phi_eval(center, &[0.8, 0.7]).outside_u);
        assert!(!st.phi_eval(center, &[0.3, 0.2]).outside_u);
        assert!((st.jacobian_det(center, &[0.4, -0.3]).unwrap() - 1.0).abs() < 0.05);
    }

    #[test]
    fn open_tolerance_shrinks_omega() {
        let tol = Tolerances { tol_open: 0.5, ..Default::default() };
        let st = disk_state(2, tol);
        let h = st.mesh().max_edge_length();
        for v in 0..st.mesh().num_vertices() {
            let r = st.mesh().vertex(v).norm();
            if st.in_omega(v) {
                assert!(r < 0.5 + h);
            } else if !st.mesh().is_boundary_vertex(v) {
                assert!(r > 0.5 - h);
            }
        }
    }

    #[test]
    fn preimage_on_disk() {
        let st = disk_state(3, Tolerances::default());
        let xi = Point::new(0.3, 0.0, 0.2, 0.1);
        let pre = st.locate_preimage(&xi);
        let x = st.mesh().vertex(pre.vertex);
        assert!((x - Point::new(0.3, 0.0, 0.0, 0.0)).norm() < 2.0 * st.mesh().max_edge_length());
        let y_amb = st.shape().frames[pre.vertex].normal_vector(&pre.y);
        assert!((y_amb - Point::new(0.0, 0.0, 0.2, 0.1)).norm() < 1e-10);
        assert_eq!(pre.failure, None);
        assert!(pre.reconstruction_error < 5.0 * st.relative_h());

        let zero = st.locate_preimage(&Point::zeros());
        assert!(st.mesh().vertex(zero.vertex).norm() < 1e-12);
        assert!(zero.y.iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn sphere_with_constant_density() {
        let m = AnalyticSurface::Sphere { radius: 1.0, ambient_dim: 3 }.mesh_at_level(1, 3);
        let s = ShapeData::compute(&m);
        let f = vec![1.0; m.num_vertices()];
        let sol = NeumannSolution {
            u: vec![0.0; m.num_vertices()],
            density: f.clone(),
            cg_iterations: 0,
            linear_residual: 0.0,
            interior_pde_residual: 0.0,
            boundary_flux_error: 0.0,
            normalization_constant: 1.0,
        };
        let st = build_transport_state(&m, &f, &sol, &s, &Tolerances::default()).unwrap();
        assert_eq!(st.mesh().ambient_dim(), 4);
        assert!(st.omega_mask().iter().all(|&b| b));
        // Φ(x, y) = y in the normal plane
        let phi = st.phi_eval(0, &[0.3, 0.4]);
        assert!((phi.point.norm() - 0.5).abs() < 1e-12);
        let report = st.jacobian_bound_check(16, 7);
        assert!(report.evaluated > 0);
        assert!(report.max_ratio < 1.0 + 0.05, "{report:?}");

        let x0 = *st.mesh().vertex(5);
        let pre = st.locate_preimage(&(x0 * 0.5));
        assert!((st.mesh().vertex(pre.vertex) - x0).norm() < 1e-12);
        assert!(pre.psd);
    }

    #[test]
    fn coverage_is_deterministic() {
        let st = disk_state(2, Tolerances::default());
        assert_eq!(st.coverage_check(0, 1), Err(TransportError::NoSamples));
        let a = st.coverage_check(300, 42).unwrap();
        let b = st.coverage_check(300, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.hits <= a.samples);
        assert_eq!(a.fraction, a.hits as f64 / a.samples as f64);
    }

    #[test]
    fn chain_on_disk() {
        let st = disk_state(3, Tolerances::default());
        let r = st.annulus_chain_check(&DEFAULT_SIGMAS).unwrap();
        assert!(r.monotone, "{r:?}");
        let half = r.rows.iter().find(|row| row.sigma == 0.5).unwrap();
        assert!((half.lhs - 4.6264).abs() < 1e-4);
        assert!((half.rhs - 0.75 * PI * PI).abs() < 0.1);
        assert!((r.lhs_limit - 2.0 * PI * PI).abs() < 1e-12);
        assert!(st.annulus_chain_check(&[1.0]).is_err());
    }

    #[test]
    fn jacobian_formula_matches_differences() {
        let st = disk_state(2, Tolerances::default());
        let r = st.jacobian_fd_check(2, 3);
        assert!(r.pass, "{r:?}");
    }
}
