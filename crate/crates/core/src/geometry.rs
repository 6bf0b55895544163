//! Analytic test surfaces with closed-form (or quadrature) reference values.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::mesh::{Mesh, Reprojector};
use crate::quadrature;
use crate::Point;

/// A surface family with known geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum AnalyticSurface {
    /// Disk `{|x| ≤ radius}` in the (x1, x2)-plane of R^d.
    FlatDisk { radius: f64, ambient_dim: usize },
    /// `r = waist·cosh(z/waist)`, `|z| ≤ half_height`, in R³.
    Catenoid { waist: f64, half_height: f64 },
    /// Enneper's surface over `|w| ≤ radius` in R³.
    Enneper { radius: f64 },
    /// Graph `z ↦ (z, z^k)` over `|z| ≤ radius` in C² = R⁴.
    Holomorphic { degree: u32, radius: f64 },
    /// Round sphere in the first three coordinates of R^d.
    Sphere { radius: f64, ambient_dim: usize },
}

/// Pointwise curvature reference: a constant when one exists, plus a
/// human-readable formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReference {
    pub constant: Option<f64>,
    pub formula: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReference {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    pub ambient_dim: usize,
    pub exact_area: f64,
    /// Integrand used when the area is obtained by quadrature.
    pub area_quadrature: Option<String>,
    pub exact_boundary_length: f64,
    pub mean_curvature_norm: CurvatureReference,
    pub second_fundamental_norm_sq: CurvatureReference,
    pub is_minimal: bool,
}

const QUAD_TOL: f64 = 1e-12;

impl AnalyticSurface {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FlatDisk { .. } => "flat_disk",
            Self::Catenoid { .. } => "catenoid",
            Self::Enneper { .. } => "enneper",
            Self::Holomorphic { .. } => "holomorphic",
            Self::Sphere { .. } => "sphere",
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match *self {
            Self::FlatDisk { ambient_dim, .. } | Self::Sphere { ambient_dim, .. } => ambient_dim,
            Self::Catenoid { .. } | Self::Enneper { .. } => 3,
            Self::Holomorphic { .. } => 4,
        }
    }

    pub fn is_minimal(&self) -> bool {
        !matches!(self, Self::Sphere { .. })
    }

    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            Self::FlatDisk {
                radius,
                ambient_dim,
            }
            | Self::Sphere {
                radius,
                ambient_dim,
            } => radius > 0.0 && (ambient_dim == 3 || ambient_dim == 4),
            Self::Catenoid { waist, half_height } => waist > 0.0 && half_height > 0.0,
            Self::Enneper { radius } => radius > 0.0 && radius <= 1.0,
            Self::Holomorphic { degree, radius } => degree >= 1 && radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid parameters for {}: {:?}", self.name(), self))
        }
    }

    pub fn parameters(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match *self {
            Self::FlatDisk {
                radius,
                ambient_dim,
            }
            | Self::Sphere {
                radius,
                ambient_dim,
            } => vec![("radius", radius), ("ambient_dim", ambient_dim as f64)],
            Self::Catenoid { waist, half_height } => {
                vec![("waist", waist), ("half_height", half_height)]
            }
            Self::Enneper { radius } => vec![("radius", radius)],
            Self::Holomorphic { degree, radius } => {
                vec![("degree", degree as f64), ("radius", radius)]
            }
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Coarse mesh; `resolution` is the ring count for disk-like surfaces,
    /// the number of axial segments per half for the catenoid, and the number
    /// of subdivisions of the icosahedron for the sphere.
    pub fn base_mesh(&self, resolution: usize) -> Mesh {
        let resolution = resolution.max(1);
        match *self {
            Self::FlatDisk {
                radius,
                ambient_dim,
            } => {
                let (pts, tris) = ring_disk(radius, resolution);
                let verts = pts.iter().map(|&(x, y)| Point::new(x, y, 0.0, 0.0)).collect();
                Mesh::new(ambient_dim, verts, tris).expect("disk mesh")
            }
            Self::Enneper { radius } => {
                let (pts, tris) = ring_disk(radius, resolution);
                let verts = pts.iter().map(|&(u, v)| enneper(u, v)).collect();
                Mesh::new(3, verts, tris).expect("enneper mesh")
            }
            Self::Holomorphic { degree, radius } => {
                let (pts, tris) = ring_disk(radius, resolution);
                let verts = pts.iter().map(|&(x, y)| holomorphic(degree, x, y)).collect();
                Mesh::new(4, verts, tris).expect("holomorphic mesh")
            }
            Self::Catenoid { waist, half_height } => catenoid_grid(waist, half_height, resolution),
            Self::Sphere {
                radius,
                ambient_dim,
            } => {
                let mut m = icosahedron(radius, ambient_dim);
                for _ in 1..resolution {
                    m = m.refine(Some(self));
                }
                m
            }
        }
    }

    /// Base mesh refined `level` times with midpoints projected onto the
    /// surface. The catenoid grid is regenerated at `resolution · 2^level`
    /// instead, which has the same connectivity.
    pub fn mesh_at_level(&self, resolution: usize, level: usize) -> Mesh {
        if let Self::Catenoid { waist, half_height } = *self {
            // the grid is generated directly in (θ, z): reprojected chord
            // midpoints drift off the parameter lattice and the cotangent
            // Laplacian stops converging pointwise
            return catenoid_grid(waist, half_height, resolution.max(1) << level);
        }
        let mut m = self.base_mesh(resolution);
        for _ in 0..level {
            m = m.refine(Some(self));
        }
        m
    }

    /// Base resolution used by the convergence tables and the level-based
    /// entry points.
    pub fn default_resolution(&self) -> usize {
        match self {
            Self::Sphere { .. } => 1,
            Self::Catenoid { .. } => 3,
            _ => 4,
        }
    }

    pub fn exact_area(&self) -> f64 {
        match *self {
            Self::FlatDisk { radius, .. } => PI * radius * radius,
            Self::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            Self::Catenoid { waist: a, half_height: h } => quadrature::integrate(
                |z| TAU * a * (z / a).cosh().powi(2),
                -h,
                h,
                QUAD_TOL,
            ),
            Self::Enneper { radius } => {
                quadrature::integrate(|r| TAU * (1.0 + r * r).powi(2) * r, 0.0, radius, QUAD_TOL)
            }
            Self::Holomorphic { degree: k, radius } => {
                let k = k as f64;
                quadrature::integrate(
                    |r| TAU * (1.0 + k * k * r.powf(2.0 * k - 2.0)) * r,
                    0.0,
                    radius,
                    QUAD_TOL,
                )
            }
        }
    }

    pub fn exact_boundary_length(&self) -> f64 {
        match *self {
            Self::FlatDisk { radius, .. } => TAU * radius,
            Self::Sphere { .. } => 0.0,
            Self::Catenoid { waist: a, half_height: h } => 2.0 * TAU * a * (h / a).cosh(),
            Self::Enneper { radius: r } => TAU * r * (1.0 + r * r),
            Self::Holomorphic { degree: k, radius: r } => {
                let k = k as f64;
                TAU * r * (1.0 + k * k * r.powf(2.0 * k - 2.0)).sqrt()
            }
        }
    }

    /// `|H|` at a point of the surface (trace convention: unit sphere has 2).
    pub fn mean_curvature_norm(&self, _p: &Point) -> f64 {
        match *self {
            Self::Sphere { radius, .. } => 2.0 / radius,
            _ => 0.0,
        }
    }

    /// `‖II‖²` at a point of the surface.
    pub fn second_fundamental_norm_sq(&self, p: &Point) -> f64 {
        match *self {
            Self::FlatDisk { .. } => 0.0,
            Self::Sphere { radius, .. } => 2.0 / (radius * radius),
            Self::Catenoid { waist: a, .. } => 2.0 / (a * a * (p[2] / a).cosh().powi(4)),
            Self::Enneper { .. } => {
                let (u, v) = enneper_inverse(p);
                8.0 / (1.0 + u * u + v * v).powi(4)
            }
            Self::Holomorphic { degree, .. } => {
                let k = degree as f64;
                let z = Complex::new(p[0], p[1]);
                let d1 = if degree >= 1 { z.powu(degree - 1) * k } else { Complex::new(0.0, 0.0) };
                let d2 = if degree >= 2 {
                    z.powu(degree - 2) * (k * (k - 1.0))
                } else {
                    Complex::new(0.0, 0.0)
                };
                4.0 * d2.norm_sqr() / (1.0 + d1.norm_sqr()).powi(3)
            }
        }
    }

    pub fn reference(&self) -> AnalyticReference {
        let (h_const, h_formula, ii_const, ii_formula) = match *self {
            Self::FlatDisk { .. } => (Some(0.0), "0", Some(0.0), "0"),
            Self::Sphere { radius, .. } => (
                Some(2.0 / radius),
                "2/r",
                Some(2.0 / (radius * radius)),
                "2/r^2",
            ),
            Self::Catenoid { .. } => (Some(0.0), "0", None, "2/(a^2 cosh^4(z/a))"),
            Self::Enneper { .. } => (Some(0.0), "0", None, "8/(1+|w|^2)^4"),
            Self::Holomorphic { degree: 1, .. } => (Some(0.0), "0", Some(0.0), "0"),
            Self::Holomorphic { .. } => (Some(0.0), "0", None, "4|F''|^2/(1+|F'|^2)^3, F = z^k"),
        };
        let area_quadrature = match self {
            Self::Catenoid { .. } => Some("2π ∫_{-h}^{h} a cosh²(z/a) dz".to_string()),
            Self::Enneper { .. } => Some("2π ∫_0^r (1+ρ²)² ρ dρ".to_string()),
            Self::Holomorphic { .. } => Some("2π ∫_0^r (1 + k²ρ^{2k-2}) ρ dρ".to_string()),
            _ => None,
        };
        AnalyticReference {
            name: self.name().to_string(),
            parameters: self.parameters(),
            ambient_dim: self.ambient_dim(),
            exact_area: self.exact_area(),
            area_quadrature,
            exact_boundary_length: self.exact_boundary_length(),
            mean_curvature_norm: CurvatureReference {
                constant: h_const,
                formula: h_formula.to_string(),
            },
            second_fundamental_norm_sq: CurvatureReference {
                constant: ii_const,
                formula: ii_formula.to_string(),
            },
            is_minimal: self.is_minimal(),
        }
    }
}

impl Reprojector for AnalyticSurface {
    fn project(&self, p: &Point, on_boundary: bool) -> Point {
        match *self {
            Self::FlatDisk { radius, .. } => {
                if on_boundary {
                    let s = radius / (p[0] * p[0] + p[1] * p[1]).sqrt();
                    Point::new(p[0] * s, p[1] * s, 0.0, 0.0)
                } else {
                    *p
                }
            }
            Self::Sphere { radius, .. } => {
                let q = Point::new(p[0], p[1], p[2], 0.0);
                q * (radius / q.norm())
            }
            Self::Catenoid { waist: a, half_height: h } => {
                let z = if on_boundary { h * p[2].signum() } else { p[2] };
                let target = a * (z / a).cosh();
                let s = target / (p[0] * p[0] + p[1] * p[1]).sqrt();
                Point::new(p[0] * s, p[1] * s, z, 0.0)
            }
            Self::Enneper { radius } => {
                let (mut u, mut v) = enneper_inverse(p);
                if on_boundary {
                    let s = radius / (u * u + v * v).sqrt();
                    u *= s;
                    v *= s;
                }
                enneper(u, v)
            }
            Self::Holomorphic { degree, radius } => {
                let (mut x, mut y) = (p[0], p[1]);
                if on_boundary {
                    let s = radius / (x * x + y * y).sqrt();
                    x *= s;
                    y *= s;
                }
                holomorphic(degree, x, y)
            }
        }
    }
}

/// Concentric-ring triangulation: ring `k` carries `6k` vertices.
fn ring_disk(radius: f64, rings: usize) -> (Vec<(f64, f64)>, Vec<[usize; 3]>) {
    let mut pts = vec![(0.0, 0.0)];
    let mut tris = Vec::new();
    let mut prev: Vec<(usize, f64)> = vec![(0, 0.0)];
    for k in 1..=rings {
        let n = 6 * k;
        let r = radius * k as f64 / rings as f64;
        let ring: Vec<(usize, f64)> = (0..n)
            .map(|j| {
                let t = TAU * j as f64 / n as f64;
                pts.push((r * t.cos(), r * t.sin()));
                (pts.len() - 1, t)
            })
            .collect();
        if k == 1 {
            for j in 0..n {
                tris.push([0, ring[j].0, ring[(j + 1) % n].0]);
            }
        } else {
            stitch_rings(&prev, &ring, &mut tris);
        }
        prev = ring;
    }
    (pts, tris)
}

/// Triangulates the band between two closed rings sorted by angle, both
/// starting at angle zero, merging by angle.
fn stitch_rings(inner: &[(usize, f64)], outer: &[(usize, f64)], tris: &mut Vec<[usize; 3]>) {
    let (a, b) = (inner.len(), outer.len());
    let angle = |ring: &[(usize, f64)], i: usize| {
        let n = ring.len();
        ring[i % n].1 + TAU * (i / n) as f64
    };
    let (mut i, mut j) = (0, 0);
    while i < a || j < b {
        let advance_inner = j == b || (i < a && angle(inner, i + 1) < angle(outer, j + 1));
        if advance_inner {
            tris.push([inner[i % a].0, outer[j % b].0, inner[(i + 1) % a].0]);
            i += 1;
        } else {
            tris.push([inner[i % a].0, outer[j % b].0, outer[(j + 1) % b].0]);
            j += 1;
        }
    }
}

fn catenoid_grid(a: f64, h: f64, resolution: usize) -> Mesh {
    let n_theta = 6 * resolution;
    let n_z = 2 * resolution;
    let mut verts = Vec::with_capacity(n_theta * (n_z + 1));
    for j in 0..=n_z {
        let z = -h + 2.0 * h * j as f64 / n_z as f64;
        let r = a * (z / a).cosh();
        for i in 0..n_theta {
            let t = TAU * i as f64 / n_theta as f64;
            verts.push(Point::new(r * t.cos(), r * t.sin(), z, 0.0));
        }
    }
    let idx = |i: usize, j: usize| j * n_theta + (i % n_theta);
    let mut tris = Vec::with_capacity(2 * n_theta * n_z);
    for j in 0..n_z {
        for i in 0..n_theta {
            let (p00, p10, p11, p01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            tris.push([p00, p10, p11]);
            tris.push([p00, p11, p01]);
        }
    }
    Mesh::new(3, verts, tris).expect("catenoid mesh")
}

fn icosahedron(radius: f64, ambient_dim: usize) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let verts = raw
        .iter()
        .map(|&(x, y, z)| {
            let p = Point::new(x, y, z, 0.0);
            p * (radius / p.norm())
        })
        .collect();
    let tris = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    Mesh::new(ambient_dim, verts, tris).expect("icosahedron")
}

fn enneper(u: f64, v: f64) -> Point {
    Point::new(
        u - u * u * u / 3.0 + u * v * v,
        -v - u * u * v + v * v * v / 3.0,
        u * u - v * v,
        0.0,
    )
}

/// Closest parameter by Gauss–Newton, started from the linearization at 0.
fn enneper_inverse(p: &Point) -> (f64, f64) {
    let (mut u, mut v) = (p[0], -p[1]);
    for _ in 0..60 {
        let q = enneper(u, v);
        let r = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
        let ju = [1.0 - u * u + v * v, -2.0 * u * v, 2.0 * u];
        let jv = [2.0 * u * v, -1.0 - u * u + v * v, -2.0 * v];
        let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let (a11, a12, a22) = (dot(&ju, &ju), dot(&ju, &jv), dot(&jv, &jv));
        let (b1, b2) = (dot(&ju, &r), dot(&jv, &r));
        let det = a11 * a22 - a12 * a12;
        let du = (a22 * b1 - a12 * b2) / det;
        let dv = (a11 * b2 - a12 * b1) / det;
        u -= du;
        v -= dv;
        if du.abs() + dv.abs() < 1e-15 {
            break;
        }
    }
    (u, v)
}

fn holomorphic(k: u32, x: f64, y: f64) -> Point {
    let w = Complex::new(x, y).powu(k);
    Point::new(x, y, w.re, w.im)
}

pub fn gen_flat_disk(radius: f64, resolution: usize, ambient_dim: usize) -> (Mesh, AnalyticReference) {
    let s = AnalyticSurface::FlatDisk {
        radius,
        ambient_dim,
    };
    (s.base_mesh(resolution), s.reference())
}

pub fn gen_catenoid(waist: f64, half_height: f64, resolution: usize) -> (Mesh, AnalyticReference) {
    let s = AnalyticSurface::Catenoid { waist, half_height };
    (s.base_mesh(resolution), s.reference())
}

pub fn gen_enneper(radius: f64, resolution: usize) -> (Mesh, AnalyticReference) {
    let s = AnalyticSurface::Enneper { radius };
    (s.base_mesh(resolution), s.reference())
}

pub fn gen_holomorphic_graph(degree: u32, radius: f64, resolution: usize) -> (Mesh, AnalyticReference) {
    let s = AnalyticSurface::Holomorphic { degree, radius };
    (s.base_mesh(resolution), s.reference())
}

pub fn gen_sphere(radius: f64, resolution: usize, ambient_dim: usize) -> (Mesh, AnalyticReference) {
    let s = AnalyticSurface::Sphere {
        radius,
        ambient_dim,
    };
    (s.base_mesh(resolution), s.reference())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_counts_and_measures() {
        let (m, r) = gen_flat_disk(1.0, 4, 4);
        assert_eq!(m.num_faces(), 6 * 16);
        assert_eq!(m.num_vertices(), 1 + 3 * 4 * 5);
        assert_eq!(m.boundary_loops().len(), 1);
        assert_eq!(m.euler_characteristic(), 1);
        assert!((r.exact_area - PI).abs() < 1e-15);
        assert!((r.exact_boundary_length - TAU).abs() < 1e-15);
        let (_, r2) = gen_flat_disk(2.0, 3, 3);
        assert!((r2.exact_area - 4.0 * PI).abs() < 1e-14);
        assert!((r2.exact_boundary_length - 4.0 * PI).abs() < 1e-14);
        assert_eq!(r2.second_fundamental_norm_sq.constant, Some(0.0));
    }

    #[test]
    fn disk_orientation_is_upward() {
        let (m, _) = gen_flat_disk(1.0, 3, 3);
        for t in m.triangles() {
            let (a, b, c) = (m.vertex(t[0]), m.vertex(t[1]), m.vertex(t[2]));
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            assert!(cross > 0.0);
        }
    }

    #[test]
    fn sphere_is_closed() {
        let (m, r) = gen_sphere(1.0, 2, 3);
        assert!(m.boundary_loops().is_empty());
        assert_eq!(m.euler_characteristic(), 2);
        assert_eq!(m.num_faces(), 80);
        assert_eq!(r.exact_boundary_length, 0.0);
        assert_eq!(r.mean_curvature_norm.constant, Some(2.0));
        let (_, r2) = gen_sphere(2.0, 1, 4);
        assert_eq!(r2.mean_curvature_norm.constant, Some(1.0));
        for p in m.vertices() {
            assert!((p.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn catenoid_topology_and_positions() {
        let (m, _) = gen_catenoid(1.0, 1.0, 2);
        assert_eq!(m.boundary_loops().len(), 2);
        assert_eq!(m.euler_characteristic(), 0);
        for p in m.vertices() {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - p[2].cosh()).abs() < 1e-14);
        }
    }

    #[test]
    fn enneper_inverse_recovers_parameters() {
        for &(u, v) in &[(0.3, -0.2), (0.9, 0.1), (-0.5, 0.7), (0.0, 0.0)] {
            let (a, b) = enneper_inverse(&enneper(u, v));
            assert!((a - u).abs() < 1e-12 && (b - v).abs() < 1e-12);
        }
    }

    #[test]
    fn holomorphic_degree_one_is_flat() {
        let s = AnalyticSurface::Holomorphic { degree: 1, radius: 1.0 };
        assert_eq!(s.second_fundamental_norm_sq(&Point::new(0.3, 0.2, 0.3, 0.2)), 0.0);
        let s2 = AnalyticSurface::Holomorphic { degree: 2, radius: 1.0 };
        assert!((s2.second_fundamental_norm_sq(&Point::zeros()) - 16.0).abs() < 1e-14);
    }

    #[test]
    fn reprojection_keeps_points_on_surface() {
        let s = AnalyticSurface::Catenoid { waist: 1.0, half_height: 1.0 };
        let m = s.base_mesh(2).refine(Some(&s)).refine(Some(&s));
        for p in m.vertices() {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - p[2].cosh()).abs() < 1e-12);
        }
        for l in m.boundary_loops() {
            for &v in &l.vertices {
                assert!((m.vertex(v)[2].abs() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(AnalyticSurface::Enneper { radius: 1.5 }.validate().is_err());
        assert!(AnalyticSurface::FlatDisk { radius: -1.0, ambient_dim: 3 }.validate().is_err());
        assert!(AnalyticSurface::Holomorphic { degree: 0, radius: 1.0 }.validate().is_err());
        assert!(AnalyticSurface::Catenoid { waist: 1.0, half_height: 1.0 }.validate().is_ok());
    }
}
