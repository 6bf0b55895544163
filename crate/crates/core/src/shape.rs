//! First- and second-order discrete geometry: gradients, vertex Hessians,
//! the mean curvature vector, the second fundamental form and the boundary
//! conormal.
//!
//! `H` comes from the cotangent Laplacian of the position (Δx = H holds in
//! any codimension). `II` comes from independent quadratic height fits; the
//! two estimators are cross-checked through `tr⟨II, ν⟩ = ⟨H, ν⟩`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector2};
use thiserror::Error;

use crate::exec;
use crate::fields::{face_plane, AmbientVectorField, SymTensorField, TangentBasis, TangentVectorField};
use crate::fit::LocalFits;
use crate::mesh::Mesh;
use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("vertex {0} has a rank-deficient fitting neighbourhood")]
    RankDeficientNeighborhood(usize),
}

/// Orthonormal tangent basis plus a completing normal frame at a vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexFrame {
    pub tangent: TangentBasis,
    pub normals: Vec<Point>,
}

impl VertexFrame {
    pub fn project_tangent(&self, p: &Point) -> Point {
        self.tangent[0] * self.tangent[0].dot(p) + self.tangent[1] * self.tangent[1].dot(p)
    }

    pub fn tangent_coords(&self, p: &Point) -> Vector2<f64> {
        Vector2::new(self.tangent[0].dot(p), self.tangent[1].dot(p))
    }

    pub fn normal_coords(&self, p: &Point) -> Vec<f64> {
        self.normals.iter().map(|n| n.dot(p)).collect()
    }

    pub fn normal_vector(&self, coords: &[f64]) -> Point {
        self.normals
            .iter()
            .zip(coords)
            .fold(Point::zeros(), |acc, (n, c)| acc + n * *c)
    }
}

/// Per-vertex shape information of a mesh.
#[derive(Debug, Clone)]
pub struct ShapeData {
    pub frames: Vec<VertexFrame>,
    /// Mean curvature vector; boundary vertices carry the value of their
    /// nearest interior vertex.
    pub mean_curvature: AmbientVectorField,
    /// `⟨II, ν_α⟩` in the tangent basis, one matrix per normal.
    pub second_fundamental: Vec<Vec<Matrix2<f64>>>,
    /// Outward conormal at boundary vertices.
    pub conormal: Vec<Option<Point>>,
    /// Vertices whose fitting stencil is rank deficient.
    pub flagged: Vec<bool>,
    pub boundary: Vec<bool>,
    /// Nearest interior vertex (identity for interior vertices).
    pub nearest_interior: Vec<usize>,
    pub fits: LocalFits,
}

impl ShapeData {
    pub fn compute(mesh: &Mesh) -> Self {
        second_fundamental_form(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.frames.len()
    }

    pub fn codim(&self) -> usize {
        self.frames.first().map_or(0, |f| f.normals.len())
    }

    /// Interior and with a well-conditioned stencil: pointwise curvature
    /// checks apply here.
    pub fn is_pointwise_valid(&self, v: usize) -> bool {
        !self.boundary[v] && !self.flagged[v]
    }

    pub fn tangent_bases(&self) -> Vec<TangentBasis> {
        self.frames.iter().map(|f| f.tangent).collect()
    }

    /// `‖II‖²` summed over the normal frame.
    pub fn ii_norm_sq(&self, v: usize) -> f64 {
        self.second_fundamental[v].iter().map(|m| m.norm_squared()).sum()
    }

    /// `⟨II, y⟩ = Σ y_α ⟨II, ν_α⟩` for `y` given in the normal frame.
    pub fn ii_along(&self, v: usize, y: &[f64]) -> Matrix2<f64> {
        self.second_fundamental[v]
            .iter()
            .zip(y)
            .fold(Matrix2::zeros(), |acc, (m, c)| acc + m * *c)
    }

    pub fn mean_curvature_norm(&self, v: usize) -> f64 {
        self.mean_curvature.values[v].norm()
    }

    /// Largest `|tr⟨II, ν_α⟩ − ⟨H, ν_α⟩|` over pointwise-valid vertices.
    pub fn trace_consistency(&self) -> f64 {
        (0..self.num_vertices())
            .filter(|&v| self.is_pointwise_valid(v))
            .flat_map(|v| {
                let h = self.mean_curvature.values[v];
                self.frames[v]
                    .normals
                    .iter()
                    .zip(&self.second_fundamental[v])
                    .map(move |(n, m)| (m.trace() - h.dot(n)).abs())
            })
            .fold(0.0, f64::max)
    }

    /// `vertex,mean_curvature_norm,ii_norm_sq,valid` rows.
    pub fn curvature_csv(&self) -> String {
        let mut s = String::from("vertex,mean_curvature_norm,ii_norm_sq,pointwise_valid\n");
        for v in 0..self.num_vertices() {
            let _ = writeln!(
                s,
                "{},{:.12e},{:.12e},{}",
                v,
                self.mean_curvature_norm(v),
                self.ii_norm_sq(v),
                self.is_pointwise_valid(v)
            );
        }
        s
    }
}

fn cross3(a: &Point, b: &Point) -> Point {
    Point::new(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
        0.0,
    )
}

/// Tangent basis from the area-weighted mean of incident face-plane
/// projectors, completed to a normal frame.
pub fn vertex_frames(mesh: &Mesh) -> Vec<VertexFrame> {
    let planes: Vec<TangentBasis> = (0..mesh.num_faces()).map(|f| face_plane(mesh, f)).collect();
    exec::map_range(mesh.num_vertices(), |v| {
        let mut proj = Matrix4::<f64>::zeros();
        let mut normal3 = Point::zeros();
        for &f in mesh.vertex_faces(v) {
            let [a, b] = planes[f];
            let w = mesh.face_area(f);
            proj += (a * a.transpose() + b * b.transpose()) * w;
            normal3 += cross3(&a, &b) * w;
        }
        let eig = SymmetricEigen::new(proj);
        let mut order = [0usize, 1, 2, 3];
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let t1: Point = eig.eigenvectors.column(order[0]).into_owned();
        let mut t2: Point = eig.eigenvectors.column(order[1]).into_owned();
        let t1 = t1.normalize();
        t2 = (t2 - t1 * t1.dot(&t2)).normalize();
        let normals = if mesh.ambient_dim() == 3 {
            if cross3(&t1, &t2).dot(&normal3) < 0.0 {
                t2 = -t2;
            }
            vec![cross3(&t1, &t2)]
        } else {
            complete_frame(&[t1, t2], mesh.ambient_dim())
        };
        VertexFrame {
            tangent: [t1, t2],
            normals,
        }
    })
}

/// Gram–Schmidt over the coordinate axes, taking at each step the axis with
/// the largest residual (lowest index on ties).
fn complete_frame(tangent: &[Point], dim: usize) -> Vec<Point> {
    let mut basis: Vec<Point> = tangent.to_vec();
    let mut normals = Vec::new();
    while basis.len() < dim {
        let mut best: Option<Point> = None;
        for k in 0..dim {
            let mut r = Point::zeros();
            r[k] = 1.0;
            for b in &basis {
                r -= b * b.dot(&r);
            }
            if best.is_none_or(|b| r.norm() > b.norm() + 1e-12) {
                best = Some(r);
            }
        }
        let n = best.expect("dim > 0").normalize();
        basis.push(n);
        normals.push(n);
    }
    normals
}

/// Constant gradient of the piecewise-linear interpolant on each face.
pub fn face_gradient(mesh: &Mesh, u: &[f64]) -> TangentVectorField {
    let values = mesh
        .triangles()
        .iter()
        .map(|t| {
            let e1 = mesh.vertex(t[1]) - mesh.vertex(t[0]);
            let e2 = mesh.vertex(t[2]) - mesh.vertex(t[0]);
            let (d1, d2) = (u[t[1]] - u[t[0]], u[t[2]] - u[t[0]]);
            let (g11, g12, g22) = (e1.dot(&e1), e1.dot(&e2), e2.dot(&e2));
            let det = g11 * g22 - g12 * g12;
            let a = (g22 * d1 - g12 * d2) / det;
            let b = (g11 * d2 - g12 * d1) / det;
            e1 * a + e2 * b
        })
        .collect();
    TangentVectorField { values }
}

/// Area-weighted mean of incident face gradients, projected onto the vertex
/// tangent plane.
pub fn vertex_gradient(mesh: &Mesh, frames: &[VertexFrame], u: &[f64]) -> Vec<Point> {
    let fg = face_gradient(mesh, u);
    (0..mesh.num_vertices())
        .map(|v| {
            let mut g = Point::zeros();
            let mut w = 0.0;
            for &f in mesh.vertex_faces(v) {
                g += fg.values[f] * mesh.face_area(f);
                w += mesh.face_area(f);
            }
            frames[v].project_tangent(&(g / w))
        })
        .collect()
}

/// Hessian of `u` at every vertex from the 2-ring quadratic fit. Flagged
/// vertices get a zero tensor and `true` in the returned mask.
pub fn vertex_hessian(shape: &ShapeData, u: &[f64]) -> (SymTensorField, Vec<bool>) {
    let n = shape.num_vertices();
    let fits = exec::map_range(n, |v| shape.fits.fit(v, |j| u[j]));
    let flagged = fits.iter().map(Option::is_none).collect();
    let values = fits
        .iter()
        .map(|f| f.map_or_else(Matrix2::zeros, |f| f.hessian))
        .collect();
    (
        SymTensorField {
            basis: shape.tangent_bases(),
            values,
        },
        flagged,
    )
}

/// Like [`vertex_hessian`] for a single vertex, reporting rank deficiency as
/// an error.
pub fn vertex_hessian_at(shape: &ShapeData, u: &[f64], v: usize) -> Result<Matrix2<f64>, ShapeError> {
    shape
        .fits
        .fit(v, |j| u[j])
        .map(|f| f.hessian)
        .ok_or(ShapeError::RankDeficientNeighborhood(v))
}

/// `L x` with cotangent weights, unnormalized by mass.
fn cotan_laplacian_of_position(mesh: &Mesh) -> Vec<Point> {
    let mut lx = vec![Point::zeros(); mesh.num_vertices()];
    for t in mesh.triangles() {
        for k in 0..3 {
            let (i, j, o) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let a = mesh.vertex(i) - mesh.vertex(o);
            let b = mesh.vertex(j) - mesh.vertex(o);
            let cross = (a.norm_squared() * b.norm_squared() - a.dot(&b).powi(2)).max(0.0).sqrt();
            let w = 0.5 * a.dot(&b) / cross;
            let d = mesh.vertex(j) - mesh.vertex(i);
            lx[i] += d * w;
            lx[j] -= d * w;
        }
    }
    lx
}

/// For each boundary vertex the closest interior vertex found by
/// breadth-first search (closest in space among the first layer reached).
pub fn nearest_interior(mesh: &Mesh) -> Vec<usize> {
    (0..mesh.num_vertices())
        .map(|v| {
            if !mesh.is_boundary_vertex(v) {
                return v;
            }
            let mut seen = vec![v];
            let mut frontier = VecDeque::from([v]);
            while !frontier.is_empty() {
                let mut layer = Vec::new();
                for _ in 0..frontier.len() {
                    let w = frontier.pop_front().unwrap();
                    for &x in mesh.vertex_neighbors(w) {
                        if !seen.contains(&x) {
                            seen.push(x);
                            layer.push(x);
                            frontier.push_back(x);
                        }
                    }
                }
                let best = layer
                    .iter()
                    .filter(|&&x| !mesh.is_boundary_vertex(x))
                    .min_by(|&&a, &&b| {
                        let da = (mesh.vertex(a) - mesh.vertex(v)).norm();
                        let db = (mesh.vertex(b) - mesh.vertex(v)).norm();
                        da.total_cmp(&db).then(a.cmp(&b))
                    });
                if let Some(&b) = best {
                    return b;
                }
            }
            v
        })
        .collect()
}

/// `H = Δ_Σ x` at interior vertices (dual cell areas); boundary vertices take the
/// value of their nearest interior vertex.
pub fn mean_curvature_vector(mesh: &Mesh) -> AmbientVectorField {
    mean_curvature_with(mesh, &nearest_interior(mesh))
}

fn mean_curvature_with(mesh: &Mesh, nearest: &[usize]) -> AmbientVectorField {
    let lx = cotan_laplacian_of_position(mesh);
    let mass = mesh.dual_areas();
    let raw: Vec<Point> = lx.iter().zip(&mass).map(|(l, m)| l / *m).collect();
    AmbientVectorField {
        values: nearest.iter().map(|&w| raw[w]).collect(),
    }
}

/// Outward unit conormal at each boundary vertex, orthogonal to the averaged
/// boundary direction within the vertex tangent plane.
pub fn conormal(mesh: &Mesh, frames: &[VertexFrame]) -> Vec<Option<Point>> {
    let mut out = vec![None; mesh.num_vertices()];
    for lp in mesh.boundary_loops() {
        let n = lp.vertices.len();
        for k in 0..n {
            let v = lp.vertices[k];
            let prev = lp.vertices[(k + n - 1) % n];
            let next = lp.vertices[(k + 1) % n];
            let frame = &frames[v];
            let dir = frame.tangent_coords(&(mesh.vertex(next) - mesh.vertex(prev)));
            let perp = frame.tangent[0] * (-dir[1]) + frame.tangent[1] * dir[0];
            let mut inward = Point::zeros();
            for &f in mesh.vertex_faces(v) {
                let t = mesh.triangles()[f];
                let c = (mesh.vertex(t[0]) + mesh.vertex(t[1]) + mesh.vertex(t[2])) / 3.0;
                inward += c - mesh.vertex(v);
            }
            let eta = perp.normalize();
            out[v] = Some(if eta.dot(&inward) > 0.0 { -eta } else { eta });
        }
    }
    out
}

/// Full shape data: frames, `H`, `II` by height fits, conormals.
pub fn second_fundamental_form(mesh: &Mesh) -> ShapeData {
    let frames = vertex_frames(mesh);
    let bases: Vec<TangentBasis> = frames.iter().map(|f| f.tangent).collect();
    let fits = LocalFits::build(mesh, &bases);
    let nearest = nearest_interior(mesh);
    let mean_curvature = mean_curvature_with(mesh, &nearest);
    let second_fundamental = exec::map_range(mesh.num_vertices(), |v| {
        let x0 = mesh.vertex(v);
        frames[v]
            .normals
            .iter()
            .map(|n| {
                fits.fit(v, |j| (mesh.vertex(j) - x0).dot(n))
                    .map_or_else(Matrix2::zeros, |f| f.hessian)
            })
            .collect()
    });
    let flagged = (0..mesh.num_vertices()).map(|v| fits.is_flagged(v)).collect();
    let conormal = conormal(mesh, &frames);
    ShapeData {
        frames,
        mean_curvature,
        second_fundamental,
        conormal,
        flagged,
        boundary: (0..mesh.num_vertices()).map(|v| mesh.is_boundary_vertex(v)).collect(),
        nearest_interior: nearest,
        fits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AnalyticSurface;

    fn disk(level: usize) -> Mesh {
        AnalyticSurface::FlatDisk { radius: 1.0, ambient_dim: 4 }.mesh_at_level(4, level)
    }

    #[test]
    fn linear_gradient_is_exact() {
        let m = disk(1);
        let u: Vec<f64> = m.vertices().iter().map(|p| p[0]).collect();
        let g = face_gradient(&m, &u);
        for v in &g.values {
            assert!((v - Point::new(1.0, 0.0, 0.0, 0.0)).norm() < 1e-12);
        }
        let c = face_gradient(&m, &vec![3.0; m.num_vertices()]);
        assert!(c.values.iter().all(|v| v.norm() < 1e-12));
        assert!(g.max_normal_component(&m) < 1e-10);
    }

    #[test]
    fn quadratic_gradient_near_centroid() {
        let m = disk(2);
        let u: Vec<f64> = m.vertices().iter().map(|p| 0.5 * p.norm_squared()).collect();
        let g = face_gradient(&m, &u);
        let h = m.max_edge_length();
        for (f, t) in m.triangles().iter().enumerate() {
            let c = (m.vertex(t[0]) + m.vertex(t[1]) + m.vertex(t[2])) / 3.0;
            assert!((g.values[f] - c).norm() <= h);
        }
    }

    #[test]
    fn hessian_of_quadratics_on_flat_disk() {
        let m = disk(1);
        let s = ShapeData::compute(&m);
        let u: Vec<f64> = m.vertices().iter().map(|p| p[0] * p[0] - p[1] * p[1]).collect();
        let (hess, flagged) = vertex_hessian(&s, &u);
        assert!(hess.max_asymmetry() < 1e-12);
        for v in 0..m.num_vertices() {
            assert!(!flagged[v]);
            // rotate back to ambient coordinates
            let [t1, t2] = hess.basis[v];
            let r = Matrix2::new(t1[0], t2[0], t1[1], t2[1]);
            let h = r * hess.values[v] * r.transpose();
            assert!((h - Matrix2::new(2.0, 0.0, 0.0, -2.0)).norm() < 1e-9, "{h}");
        }
        let lin: Vec<f64> = m.vertices().iter().map(|p| 2.0 * p[0] - p[1]).collect();
        let (hl, _) = vertex_hessian(&s, &lin);
        assert!(hl.values.iter().all(|h| h.norm() < 1e-9));
    }

    #[test]
    fn flat_disk_has_no_curvature() {
        let m = disk(2);
        let s = ShapeData::compute(&m);
        assert_eq!(s.codim(), 2);
        for v in 0..m.num_vertices() {
            assert!(s.mean_curvature_norm(v) < 1e-10);
            assert!(s.ii_norm_sq(v) < 1e-18);
        }
    }

    #[test]
    fn frames_are_orthonormal() {
        let m = AnalyticSurface::Holomorphic { degree: 2, radius: 1.0 }.mesh_at_level(4, 1);
        let s = ShapeData::compute(&m);
        for f in &s.frames {
            let all: Vec<Point> = f.tangent.iter().chain(&f.normals).copied().collect();
            for (i, a) in all.iter().enumerate() {
                for (j, b) in all.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((a.dot(b) - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn disk_conormal_is_radial() {
        let m = disk(2);
        let s = ShapeData::compute(&m);
        let h = m.max_edge_length();
        let mut count = 0;
        for v in 0..m.num_vertices() {
            if let Some(eta) = s.conormal[v] {
                let p = m.vertex(v);
                assert!((eta - p / p.norm()).norm() <= h);
                count += 1;
            }
        }
        assert_eq!(count, m.boundary_edges().len());
    }

    #[test]
    fn closed_sphere_has_no_conormal() {
        let m = AnalyticSurface::Sphere { radius: 1.0, ambient_dim: 3 }.mesh_at_level(1, 1);
        let s = ShapeData::compute(&m);
        assert!(s.conormal.iter().all(Option::is_none));
    }

    #[test]
    fn catenoid_top_conormal_points_up() {
        let m = AnalyticSurface::Catenoid { waist: 1.0, half_height: 1.0 }.mesh_at_level(3, 1);
        let s = ShapeData::compute(&m);
        for v in 0..m.num_vertices() {
            if let Some(eta) = s.conormal[v] {
                assert!(eta[2] * m.vertex(v)[2] > 0.0);
            }
        }
    }

    #[test]
    fn single_triangle_is_flagged() {
        let m = Mesh::new(
            3,
            vec![Point::zeros(), Point::new(1.0, 0.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let s = ShapeData::compute(&m);
        assert!(s.flagged.iter().all(|&f| f));
        assert_eq!(
            vertex_hessian_at(&s, &[0.0, 1.0, 2.0], 1),
            Err(ShapeError::RankDeficientNeighborhood(1))
        );
    }
}
