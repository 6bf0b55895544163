//! Discrete fields over a mesh.

use nalgebra::Matrix2;

use crate::mesh::Mesh;
use crate::Point;

/// Per-vertex scalar values.
pub type ScalarField = Vec<f64>;

/// Per-face ambient vectors lying in the face plane.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVectorField {
    pub values: Vec<Point>,
}

/// Per-vertex ambient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientVectorField {
    pub values: Vec<Point>,
}

/// Orthonormal tangent basis `(t1, t2)` attached to a vertex.
pub type TangentBasis = [Point; 2];

/// Per-vertex symmetric 2×2 tensors expressed in a per-vertex tangent basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    pub basis: Vec<TangentBasis>,
    pub values: Vec<Matrix2<f64>>,
}

/// Orthonormal basis of the plane spanned by a face.
pub fn face_plane(mesh: &Mesh, f: usize) -> TangentBasis {
    let t = mesh.triangles()[f];
    let e1 = mesh.vertex(t[1]) - mesh.vertex(t[0]);
    let e2 = mesh.vertex(t[2]) - mesh.vertex(t[0]);
    let a = e1.normalize();
    let b = (e2 - a * a.dot(&e2)).normalize();
    [a, b]
}

impl TangentVectorField {
    /// Largest relative out-of-plane component over all faces.
    pub fn max_normal_component(&self, mesh: &Mesh) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(f, v)| {
                let [a, b] = face_plane(mesh, f);
                let out = v - a * a.dot(v) - b * b.dot(v);
                out.norm() / v.norm().max(1e-300)
            })
            .fold(0.0, f64::max)
    }
}

impl SymTensorField {
    pub fn max_asymmetry(&self) -> f64 {
        self.values
            .iter()
            .map(|m| (m[(0, 1)] - m[(1, 0)]).abs())
            .fold(0.0, f64::max)
    }
}
