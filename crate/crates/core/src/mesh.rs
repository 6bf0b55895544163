//! Oriented triangle meshes immersed in R³ or R⁴.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("ambient dimension must be 3 or 4, got {0}")]
    InvalidAmbientDim(usize),
    #[error("vertex {index} has {got} coordinates, expected {expected}")]
    VertexDimension {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("triangle {triangle} references vertex {index} out of range")]
    IndexOutOfRange { triangle: usize, index: usize },
    #[error("mesh has no triangles")]
    Empty,
    #[error("edge ({a}, {b}) is shared by {count} triangles")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("orientation cannot be made consistent at triangle {0}")]
    InconsistentOrientation(usize),
    #[error("boundary is not a union of simple closed loops at vertex {0}")]
    NonManifoldBoundary(usize),
    #[error("field has {got} values, mesh has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("non-finite coordinate at vertex {0}")]
    NonFinite(usize),
}

/// Closed boundary curve, oriented so the surface lies to its left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLoop {
    pub vertices: Vec<usize>,
    pub length: f64,
}

/// Maps refinement midpoints back onto an analytic surface.
pub trait Reprojector {
    fn project(&self, p: &Point, on_boundary: bool) -> Point;
}

impl<F: Fn(&Point, bool) -> Point> Reprojector for F {
    fn project(&self, p: &Point, on_boundary: bool) -> Point {
        self(p, on_boundary)
    }
}

/// Validated, immutable triangle mesh with derived connectivity.
#[derive(Debug, Clone)]
pub struct Mesh {
    ambient_dim: usize,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    vertex_faces: Vec<Vec<usize>>,
    vertex_neighbors: Vec<Vec<usize>>,
    on_boundary: Vec<bool>,
    face_areas: Vec<f64>,
    edge_count: usize,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    let e1 = b - a;
    let e2 = c - a;
    let g = e1.norm_squared() * e2.norm_squared() - e1.dot(&e2).powi(2);
    0.5 * g.max(0.0).sqrt()
}

impl Mesh {
    /// Validates and builds a mesh, repairing inconsistent winding by
    /// breadth-first propagation from the lowest-index face of each component.
    pub fn new(
        ambient_dim: usize,
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        if ambient_dim != 3 && ambient_dim != 4 {
            return Err(MeshError::InvalidAmbientDim(ambient_dim));
        }
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let mut vertices = vertices;
        for (i, v) in vertices.iter_mut().enumerate() {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(MeshError::NonFinite(i));
            }
            if ambient_dim == 3 {
                v[3] = 0.0;
            }
        }
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= nv) {
                return Err(MeshError::IndexOutOfRange {
                    triangle: t,
                    index: bad,
                });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::DegenerateTriangle(t));
            }
        }

        let face_areas: Vec<f64> = triangles
            .iter()
            .map(|t| triangle_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]))
            .collect();
        let mean_area = face_areas.iter().sum::<f64>() / face_areas.len() as f64;
        if let Some(t) = face_areas.iter().position(|&a| !(a > 1e-14 * mean_area)) {
            return Err(MeshError::DegenerateTriangle(t));
        }

        let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                edge_faces
                    .entry(edge_key(tri[k], tri[(k + 1) % 3]))
                    .or_default()
                    .push(t);
            }
        }
        // deterministic error reporting
        let mut sorted_edges: Vec<_> = edge_faces.iter().collect();
        sorted_edges.sort_by_key(|(k, _)| **k);
        for (&(a, b), faces) in &sorted_edges {
            if faces.len() > 2 {
                return Err(MeshError::NonManifoldEdge {
                    a,
                    b,
                    count: faces.len(),
                });
            }
        }

        let triangles = orient(triangles, &edge_faces)?;

        let mut boundary_edges = Vec::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if edge_faces[&edge_key(a, b)].len() == 1 {
                    boundary_edges.push([a, b]);
                }
            }
        }
        let mut out_degree = vec![0usize; nv];
        let mut in_degree = vec![0usize; nv];
        for e in &boundary_edges {
            out_degree[e[0]] += 1;
            in_degree[e[1]] += 1;
        }
        if let Some(v) = (0..nv).find(|&v| out_degree[v] > 1 || out_degree[v] != in_degree[v]) {
            return Err(MeshError::NonManifoldBoundary(v));
        }
        let on_boundary: Vec<bool> = out_degree.iter().map(|&d| d > 0).collect();

        let mut vertex_faces = vec![Vec::new(); nv];
        let mut vertex_neighbors = vec![Vec::new(); nv];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                vertex_faces[tri[k]].push(t);
                vertex_neighbors[tri[k]].push(tri[(k + 1) % 3]);
                vertex_neighbors[tri[k]].push(tri[(k + 2) % 3]);
            }
        }
        for n in &mut vertex_neighbors {
            n.sort_unstable();
            n.dedup();
        }

        Ok(Self {
            ambient_dim,
            vertices,
            triangles,
            boundary_edges,
            vertex_faces,
            vertex_neighbors,
            on_boundary,
            face_areas,
            edge_count: edge_faces.len(),
        })
    }

    /// Builds from raw coordinate rows of length `ambient_dim`.
    pub fn from_coords(
        ambient_dim: usize,
        coords: &[Vec<f64>],
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        if ambient_dim != 3 && ambient_dim != 4 {
            return Err(MeshError::InvalidAmbientDim(ambient_dim));
        }
        let mut vertices = Vec::with_capacity(coords.len());
        for (i, c) in coords.iter().enumerate() {
            if c.len() != ambient_dim {
                return Err(MeshError::VertexDimension {
                    index: i,
                    expected: ambient_dim,
                    got: c.len(),
                });
            }
            let mut p = Point::zeros();
            for (k, x) in c.iter().enumerate() {
                p[k] = *x;
            }
            vertices.push(p);
        }
        Self::new(ambient_dim, vertices, triangles)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Codimension of the surface in its ambient space.
    pub fn codim(&self) -> usize {
        self.ambient_dim - crate::SURFACE_DIM
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Point {
        &self.vertices[i]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_count
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
    }

    /// Directed edges lying in exactly one triangle, in face order.
    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    pub fn has_boundary(&self) -> bool {
        !self.boundary_edges.is_empty()
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    /// Sorted 1-ring neighbors.
    pub fn vertex_neighbors(&self, v: usize) -> &[usize] {
        &self.vertex_neighbors[v]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        self.face_areas[f]
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    pub fn area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    /// Lumped mass: one third of the area of every incident face.
    pub fn vertex_masses(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.num_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                m[v] += self.face_areas[t] / 3.0;
            }
        }
        m
    }

    /// Circumcentric dual cell areas. Obtuse faces make these lopsided, so if
    /// any cell comes out non-positive the mixed Voronoi areas are used instead.
    /// Either way the total equals the mesh area.
    pub fn dual_areas(&self) -> Vec<f64> {
        let n = self.num_vertices();
        let mut circ = vec![0.0; n];
        let mut mixed = vec![0.0; n];
        for (t, tri) in self.triangles.iter().enumerate() {
            let a = self.face_areas[t];
            if a <= 0.0 {
                continue;
            }
            let p = [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]];
            // squared edge lengths and cotangents, indexed by the opposite corner
            let mut l2 = [0.0; 3];
            let mut cot = [0.0; 3];
            for k in 0..3 {
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                l2[k] = (p[j] - p[i]).norm_squared();
                cot[k] = (p[i] - p[k]).dot(&(p[j] - p[k])) / (2.0 * a);
            }
            let obtuse = (0..3).find(|&k| cot[k] < 0.0);
            for k in 0..3 {
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                let voronoi = (l2[j] * cot[j] + l2[i] * cot[i]) / 8.0;
                circ[tri[k]] += voronoi;
                mixed[tri[k]] += match obtuse {
                    None => voronoi,
                    Some(o) if o == k => a / 2.0,
                    Some(_) => a / 4.0,
                };
            }
        }
        if circ.iter().all(|&x| x > 0.0) {
            circ
        } else {
            mixed
        }
    }

    /// Half the length of every incident boundary edge; zero in the interior.
    pub fn boundary_masses(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.num_vertices()];
        for e in &self.boundary_edges {
            let l = (self.vertices[e[1]] - self.vertices[e[0]]).norm();
            m[e[0]] += 0.5 * l;
            m[e[1]] += 0.5 * l;
        }
        m
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges
            .iter()
            .map(|e| (self.vertices[e[1]] - self.vertices[e[0]]).norm())
            .sum()
    }

    fn check_size(&self, values: &[f64]) -> Result<(), MeshError> {
        if values.len() != self.num_vertices() {
            return Err(MeshError::SizeMismatch {
                expected: self.num_vertices(),
                got: values.len(),
            });
        }
        Ok(())
    }

    /// `Σ_faces area · mean(vertex values)`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64, MeshError> {
        self.check_size(values)?;
        Ok(self
            .triangles
            .iter()
            .zip(&self.face_areas)
            .map(|(t, a)| a * (values[t[0]] + values[t[1]] + values[t[2]]) / 3.0)
            .sum())
    }

    /// `Σ_boundary edges length · mean(endpoint values)`.
    pub fn boundary_integrate(&self, values: &[f64]) -> Result<f64, MeshError> {
        self.check_size(values)?;
        Ok(self
            .boundary_edges
            .iter()
            .map(|e| {
                let l = (self.vertices[e[1]] - self.vertices[e[0]]).norm();
                l * 0.5 * (values[e[0]] + values[e[1]])
            })
            .sum())
    }

    /// Boundary loops, each following the directed boundary edges.
    pub fn boundary_loops(&self) -> Vec<BoundaryLoop> {
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        for e in &self.boundary_edges {
            next.insert(e[0], e[1]);
        }
        let mut loops = Vec::new();
        while let Some((&start, _)) = next.iter().next() {
            let mut verts = vec![start];
            let mut length = 0.0;
            let mut cur = start;
            loop {
                let nxt = next.remove(&cur).expect("boundary validated at build");
                length += (self.vertices[nxt] - self.vertices[cur]).norm();
                if nxt == start {
                    break;
                }
                verts.push(nxt);
                cur = nxt;
            }
            loops.push(BoundaryLoop {
                vertices: verts,
                length,
            });
        }
        loops
    }

    pub fn edge_lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.triangles.iter().flat_map(move |t| {
            (0..3).map(move |k| (self.vertices[t[(k + 1) % 3]] - self.vertices[t[k]]).norm())
        })
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edge_lengths().fold(0.0, f64::max)
    }

    /// Radius of the disk with the same area; used to make `h` dimensionless.
    pub fn length_scale(&self) -> f64 {
        (self.area() / std::f64::consts::PI).sqrt()
    }

    /// Max edge length divided by [`Mesh::length_scale`].
    pub fn relative_h(&self) -> f64 {
        self.max_edge_length() / self.length_scale()
    }

    /// Connected-component label per vertex, labels numbered in order of
    /// first appearance.
    pub fn component_labels(&self) -> (usize, Vec<usize>) {
        let nv = self.num_vertices();
        let mut label = vec![usize::MAX; nv];
        let mut count = 0;
        for s in 0..nv {
            if label[s] != usize::MAX || self.vertex_faces[s].is_empty() {
                continue;
            }
            label[s] = count;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &w in &self.vertex_neighbors[v] {
                    if label[w] == usize::MAX {
                        label[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    pub fn is_connected(&self) -> bool {
        self.component_labels().0 == 1
    }

    /// Splits into connected components, dropping unreferenced vertices.
    pub fn components(&self) -> Vec<Mesh> {
        let (count, label) = self.component_labels();
        (0..count)
            .map(|c| {
                let mut remap = vec![usize::MAX; self.num_vertices()];
                let mut verts = Vec::new();
                for v in 0..self.num_vertices() {
                    if label[v] == c {
                        remap[v] = verts.len();
                        verts.push(self.vertices[v]);
                    }
                }
                let tris = self
                    .triangles
                    .iter()
                    .filter(|t| label[t[0]] == c)
                    .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
                    .collect();
                Mesh::new(self.ambient_dim, verts, tris).expect("component of a valid mesh")
            })
            .collect()
    }

    /// Disjoint union of meshes with the same ambient dimension.
    pub fn disjoint_union(parts: &[Mesh]) -> Result<Mesh, MeshError> {
        let dim = parts.first().map(|m| m.ambient_dim).ok_or(MeshError::Empty)?;
        let mut verts = Vec::new();
        let mut tris = Vec::new();
        for p in parts {
            if p.ambient_dim != dim {
                return Err(MeshError::InvalidAmbientDim(p.ambient_dim));
            }
            let off = verts.len();
            verts.extend_from_slice(&p.vertices);
            tris.extend(p.triangles.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
        }
        Mesh::new(dim, verts, tris)
    }

    /// Same triangles, positions transformed by `f`.
    pub fn map_vertices(&self, f: impl Fn(&Point) -> Point) -> Result<Mesh, MeshError> {
        Mesh::new(
            self.ambient_dim,
            self.vertices.iter().map(f).collect(),
            self.triangles.clone(),
        )
    }

    /// Views an R³ mesh as a surface in R⁴ (zero last coordinate).
    pub fn promoted(&self) -> Mesh {
        let mut m = self.clone();
        m.ambient_dim = 4;
        m
    }

    /// 1→4 midpoint subdivision. New midpoints go through `reproject` when
    /// given; boundary midpoints are flagged so the reprojector can snap them
    /// onto the boundary curve.
    pub fn refine(&self, reproject: Option<&dyn Reprojector>) -> Mesh {
        let mut verts = self.vertices.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let boundary: std::collections::HashSet<(usize, usize)> = self
            .boundary_edges
            .iter()
            .map(|e| edge_key(e[0], e[1]))
            .collect();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Point>| -> usize {
            let key = edge_key(a, b);
            *mid.entry(key).or_insert_with(|| {
                let p = (verts[a] + verts[b]) * 0.5;
                let p = match reproject {
                    Some(r) => r.project(&p, boundary.contains(&key)),
                    None => p,
                };
                verts.push(p);
                verts.len() - 1
            })
        };
        let mut tris = Vec::with_capacity(4 * self.triangles.len());
        for t in &self.triangles {
            let ab = midpoint(t[0], t[1], &mut verts);
            let bc = midpoint(t[1], t[2], &mut verts);
            let ca = midpoint(t[2], t[0], &mut verts);
            tris.push([t[0], ab, ca]);
            tris.push([ab, t[1], bc]);
            tris.push([ca, bc, t[2]]);
            tris.push([ab, bc, ca]);
        }
        Mesh::new(self.ambient_dim, verts, tris).expect("refinement of a valid mesh")
    }
}

fn orient(
    mut triangles: Vec<[usize; 3]>,
    edge_faces: &HashMap<(usize, usize), Vec<usize>>,
) -> Result<Vec<[usize; 3]>, MeshError> {
    let nf = triangles.len();
    let mut visited = vec![false; nf];
    let has_directed = |tri: &[usize; 3], a: usize, b: usize| {
        (0..3).any(|k| tri[k] == a && tri[(k + 1) % 3] == b)
    };
    for seed in 0..nf {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let mut queue = VecDeque::from([seed]);
        while let Some(t) = queue.pop_front() {
            let tri = triangles[t];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                for &g in &edge_faces[&edge_key(a, b)] {
                    if g == t {
                        continue;
                    }
                    // a consistent neighbour traverses the shared edge as b→a
                    let consistent = !has_directed(&triangles[g], a, b);
                    if visited[g] {
                        if !consistent {
                            return Err(MeshError::InconsistentOrientation(g));
                        }
                    } else {
                        if !consistent {
                            triangles[g].swap(1, 2);
                        }
                        visited[g] = true;
                        queue.push_back(g);
                    }
                }
            }
        }
    }
    Ok(triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z, 0.0)
    }

    #[test]
    fn single_triangle() {
        let m = Mesh::new(3, vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)], vec![[0, 1, 2]])
            .unwrap();
        assert_eq!(m.boundary_edges().len(), 3);
        let loops = m.boundary_loops();
        assert_eq!(loops.len(), 1);
        assert!((loops[0].length - (2.0 + 2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn dual_areas_match_cotangent_identity() {
        // irregular fan around the origin
        let ring = [(1.0, 0.1), (0.4, 0.9), (-0.7, 0.8), (-1.1, -0.2), (-0.3, -0.9), (0.8, -0.7)];
        let mut verts = vec![p(0.05, -0.02, 0.0)];
        verts.extend(ring.iter().map(|&(x, y)| p(x, y, 0.0)));
        let tris: Vec<[usize; 3]> = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
        let m = Mesh::new(3, verts, tris).unwrap();
        let d = m.dual_areas();
        assert!((d.iter().sum::<f64>() - m.area()).abs() < 1e-14);
        // Σ_j w_ij |x_j − x_i|² = 4 A_i for the half-cotangent weights
        let mut s = 0.0;
        for t in m.triangles() {
            for k in 0..3 {
                let (i, j, o) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
                if i != 0 && j != 0 {
                    continue;
                }
                let a = m.vertex(i) - m.vertex(o);
                let b = m.vertex(j) - m.vertex(o);
                let cross = (a.norm_squared() * b.norm_squared() - a.dot(&b).powi(2)).sqrt();
                s += 0.5 * a.dot(&b) / cross * (m.vertex(j) - m.vertex(i)).norm_squared();
            }
        }
        assert!((s - 4.0 * d[0]).abs() < 1e-12);
    }

    #[test]
    fn orientation_repair() {
        let verts = vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(1., 1., 0.)];
        // second triangle wound the same way across the shared edge 1-2
        let m = Mesh::new(3, verts, vec![[0, 1, 2], [1, 2, 3]]).unwrap();
        assert_eq!(m.boundary_edges().len(), 4);
        assert_eq!(m.triangles()[1], [1, 3, 2]);
        assert_eq!(m.boundary_loops().len(), 1);
    }

    #[test]
    fn three_faces_on_an_edge() {
        let verts = vec![
            p(0., 0., 0.),
            p(1., 0., 0.),
            p(0., 1., 0.),
            p(0., -1., 0.),
            p(0., 0., 1.),
        ];
        let err = Mesh::new(3, verts, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap_err();
        assert!(matches!(err, MeshError::NonManifoldEdge { a: 0, b: 1, count: 3 }));
    }

    #[test]
    fn moebius_strip_is_rejected() {
        // 5-segment strip whose ends are glued with a half twist
        let n = 5;
        let mut verts = Vec::new();
        for i in 0..n {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            verts.push(p(t.cos(), t.sin(), -0.2));
            verts.push(p(t.cos(), t.sin(), 0.2));
        }
        let mut tris = Vec::new();
        for i in 0..n {
            let (a, b) = (2 * i, 2 * i + 1);
            let (c, d) = if i + 1 < n {
                (2 * (i + 1), 2 * (i + 1) + 1)
            } else {
                (1, 0)
            };
            tris.push([a, c, b]);
            tris.push([b, c, d]);
        }
        assert!(matches!(
            Mesh::new(3, verts, tris),
            Err(MeshError::InconsistentOrientation(_))
        ));
    }

    #[test]
    fn degenerate_and_bad_input() {
        let verts = vec![p(0., 0., 0.), p(1., 0., 0.), p(2., 0., 0.), p(0., 1., 0.)];
        assert!(matches!(
            Mesh::new(3, verts.clone(), vec![[0, 1, 3], [0, 1, 2]]),
            Err(MeshError::DegenerateTriangle(1))
        ));
        assert!(matches!(
            Mesh::new(3, verts.clone(), vec![[0, 1, 7]]),
            Err(MeshError::IndexOutOfRange { index: 7, .. })
        ));
        assert!(matches!(
            Mesh::new(5, verts, vec![[0, 1, 3]]),
            Err(MeshError::InvalidAmbientDim(5))
        ));
    }

    #[test]
    fn refine_counts() {
        let m = Mesh::new(3, vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)], vec![[0, 1, 2]])
            .unwrap();
        let r = m.refine(None);
        assert_eq!(r.num_faces(), 4);
        assert_eq!(r.num_vertices(), 3 + 3);
        assert_eq!(r.euler_characteristic(), m.euler_characteristic());
        assert!((r.area() - m.area()).abs() < 1e-15);
        assert_eq!(r.boundary_edges().len(), 6);
    }

    #[test]
    fn integrate_size_mismatch() {
        let m = Mesh::new(3, vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)], vec![[0, 1, 2]])
            .unwrap();
        assert!(matches!(
            m.integrate(&[1.0, 2.0]),
            Err(MeshError::SizeMismatch { expected: 3, got: 2 })
        ));
        assert!((m.integrate(&[1.0, 1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
    }
}
