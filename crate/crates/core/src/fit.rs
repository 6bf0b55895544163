//! Weighted least-squares quadratic fits over 2-ring stencils.
//!
//! At vertex `v` with tangent basis `(t1, t2)`, a neighbour `x_j` gets planar
//! coordinates `s_j = (⟨x_j − x_v, t1⟩, ⟨x_j − x_v, t2⟩)` and a sampled
//! quantity is modelled as
//!
//! ```text
//! q(s) = g1 s1 + g2 s2 + ½ h11 s1² + h12 s1 s2 + ½ h22 s2²
//! ```
//!
//! with weights `1/|s_j|`. The pseudo-inverse is precomputed once per vertex,
//! so fitting any number of fields is a matrix-vector product.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::exec;
use crate::fields::TangentBasis;
use crate::mesh::Mesh;

const MIN_STENCIL: usize = 6;
const MIN_SINGULAR_RATIO: f64 = 1e-6;

/// Gradient and Hessian of a fitted quadratic, in the tangent basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    pub gradient: Vector2<f64>,
    pub hessian: Matrix2<f64>,
}

#[derive(Debug, Clone)]
struct VertexStencil {
    neighbors: Vec<usize>,
    /// 5 × k, maps value differences to (g1, g2, h11, h12, h22).
    operator: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct LocalFits {
    stencils: Vec<VertexStencil>,
}

/// Vertices within two edges of `v`, excluding `v`, sorted.
pub fn two_ring(mesh: &Mesh, v: usize) -> Vec<usize> {
    let mut out: Vec<usize> = mesh
        .vertex_neighbors(v)
        .iter()
        .flat_map(|&w| std::iter::once(w).chain(mesh.vertex_neighbors(w).iter().copied()))
        .filter(|&w| w != v)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn build_stencil(mesh: &Mesh, v: usize, basis: &TangentBasis) -> VertexStencil {
    let neighbors = two_ring(mesh, v);
    let k = neighbors.len();
    if k < MIN_STENCIL {
        return VertexStencil {
            neighbors,
            operator: None,
        };
    }
    let x0 = mesh.vertex(v);
    let coords: Vec<(f64, f64)> = neighbors
        .iter()
        .map(|&j| {
            let d = mesh.vertex(j) - x0;
            (basis[0].dot(&d), basis[1].dot(&d))
        })
        .collect();
    let scale = coords.iter().map(|(a, b)| a.hypot(*b)).sum::<f64>() / k as f64;
    let mut design = DMatrix::<f64>::zeros(k, 5);
    let mut sqrt_w = DVector::<f64>::zeros(k);
    for (r, &(a, b)) in coords.iter().enumerate() {
        let (a, b) = (a / scale, b / scale);
        let dist = a.hypot(b).max(1e-12);
        let w = (1.0 / dist).sqrt();
        sqrt_w[r] = w;
        let row = [a, b, 0.5 * a * a, a * b, 0.5 * b * b];
        for (c, x) in row.iter().enumerate() {
            design[(r, c)] = w * x;
        }
    }
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > MIN_SINGULAR_RATIO * smax) {
        return VertexStencil {
            neighbors,
            operator: None,
        };
    }
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let sigma_inv = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / s));
    // (W^½ D)^+ W^½, then undo the coordinate scaling
    let mut op = vt.transpose() * sigma_inv * u.transpose();
    for c in 0..k {
        for r in 0..5 {
            op[(r, c)] *= sqrt_w[c];
        }
    }
    for c in 0..k {
        op[(0, c)] /= scale;
        op[(1, c)] /= scale;
        for r in 2..5 {
            op[(r, c)] /= scale * scale;
        }
    }
    VertexStencil {
        neighbors,
        operator: Some(op),
    }
}

impl LocalFits {
    pub fn build(mesh: &Mesh, bases: &[TangentBasis]) -> Self {
        let stencils = exec::map_range(mesh.num_vertices(), |v| build_stencil(mesh, v, &bases[v]));
        Self { stencils }
    }

    /// True when the stencil is too small or ill-conditioned for a fit.
    pub fn is_flagged(&self, v: usize) -> bool {
        self.stencils[v].operator.is_none()
    }

    pub fn stencil(&self, v: usize) -> &[usize] {
        &self.stencils[v].neighbors
    }

    /// Fits `value(j) − value(v)` over the stencil of `v`. `value` receives
    /// vertex indices.
    pub fn fit(&self, v: usize, value: impl Fn(usize) -> f64) -> Option<QuadraticFit> {
        let st = &self.stencils[v];
        let op = st.operator.as_ref()?;
        let center = value(v);
        let mut c = [0.0; 5];
        for (col, &j) in st.neighbors.iter().enumerate() {
            let d = value(j) - center;
            for (r, cr) in c.iter_mut().enumerate() {
                *cr += op[(r, col)] * d;
            }
        }
        Some(QuadraticFit {
            gradient: Vector2::new(c[0], c[1]),
            hessian: Matrix2::new(c[2], c[3], c[3], c[4]),
        })
    }
}
