//! Refinement studies against the analytic references.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::geometry::AnalyticSurface;
use crate::harness::{deficit, Tolerances};
use crate::mesh::Mesh;
use crate::pde::{normalize_and_solve, SolverConfig};
use crate::shape::ShapeData;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub level: usize,
    pub vertices: usize,
    pub faces: usize,
    /// Relative mesh size.
    pub h: f64,
    /// Relative area error.
    pub area_error: f64,
    /// Relative boundary length error; zero for closed surfaces.
    pub boundary_error: f64,
    /// Largest `||H| − |H_exact||` over interior vertices.
    pub mean_curvature_error: f64,
    /// Root-mean-square `|‖II‖ − ‖II_exact‖|` over pointwise-valid vertices.
    pub second_fundamental_error: f64,
    pub pde_residual: f64,
    pub flux_error: f64,
    pub deficit: f64,
    pub deficit_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderFit {
    pub order: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub geometry: AnalyticSurface,
    pub resolution: usize,
    pub rows: Vec<LevelRow>,
    pub orders: BTreeMap<String, OrderFit>,
}

/// Least-squares slope of `log err` against `log h` with its R². Entries with
/// a non-positive error are skipped; `None` with fewer than two usable points.
pub fn fit_order(h: &[f64], err: &[f64]) -> Option<OrderFit> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(err)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(OrderFit {
        order: slope,
        r_squared: r2,
    })
}

/// Deficit of the smooth surface with `f ≡ 1`.
pub fn exact_constant_deficit(surface: &AnalyticSurface) -> f64 {
    let area = surface.exact_area();
    let mean_curvature_integral = match *surface {
        AnalyticSurface::Sphere { radius, .. } => 8.0 * std::f64::consts::PI * radius,
        _ => 0.0,
    };
    let lhs = surface.exact_boundary_length() + mean_curvature_integral;
    lhs / (2.0 * (std::f64::consts::PI * area).sqrt())
}

fn level_row(surface: &AnalyticSurface, mesh: &Mesh, level: usize, exact_deficit: f64) -> LevelRow {
    let shape = ShapeData::compute(mesh);
    let exact_area = surface.exact_area();
    let exact_len = surface.exact_boundary_length();
    let nv = mesh.num_vertices();

    let h_err = (0..nv)
        .filter(|&v| !mesh.is_boundary_vertex(v))
        .map(|v| (shape.mean_curvature_norm(v) - surface.mean_curvature_norm(mesh.vertex(v))).abs())
        .fold(0.0, f64::max);
    let valid: Vec<usize> = (0..nv).filter(|&v| shape.is_pointwise_valid(v)).collect();
    let ii_err = if valid.is_empty() {
        0.0
    } else {
        let sq: f64 = valid
            .iter()
            .map(|&v| (shape.ii_norm_sq(v).sqrt() - surface.second_fundamental_norm_sq(mesh.vertex(v)).sqrt()).powi(2))
            .sum();
        (sq / valid.len() as f64).sqrt()
    };

    let f = vec![1.0; nv];
    let report = deficit(mesh, &f, 2, 2, &shape, &Tolerances::default()).expect("fixed dimensions");
    let (pde_residual, flux_error) = match normalize_and_solve(mesh, &f, &shape, &SolverConfig::default()) {
        Ok(sol) => (sol.interior_pde_residual, sol.boundary_flux_error),
        Err(_) => (f64::NAN, f64::NAN),
    };
    LevelRow {
        level,
        vertices: nv,
        faces: mesh.num_faces(),
        h: mesh.relative_h(),
        area_error: (mesh.area() - exact_area).abs() / exact_area,
        boundary_error: if exact_len > 0.0 {
            (mesh.boundary_length() - exact_len).abs() / exact_len
        } else {
            0.0
        },
        mean_curvature_error: h_err,
        second_fundamental_error: ii_err,
        pde_residual,
        flux_error,
        deficit: report.deficit,
        deficit_error: (report.deficit - exact_deficit).abs(),
    }
}

type Column = fn(&LevelRow) -> f64;

/// Errors at each level in `levels` (inclusive range of refinement levels
/// above `resolution`) with fitted orders.
pub fn convergence_study(surface: &AnalyticSurface, resolution: usize, levels: std::ops::RangeInclusive<usize>) -> ConvergenceTable {
    let exact_deficit = exact_constant_deficit(surface);
    let mut rows = Vec::new();
    for level in levels {
        let mesh = surface.mesh_at_level(resolution, level);
        rows.push(level_row(surface, &mesh, level, exact_deficit));
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let columns: [(&str, Column); 8] = [
        ("area_error", |r| r.area_error),
        ("boundary_error", |r| r.boundary_error),
        ("mean_curvature_error", |r| r.mean_curvature_error),
        ("second_fundamental_error", |r| r.second_fundamental_error),
        ("pde_residual", |r| r.pde_residual),
        ("flux_error", |r| r.flux_error),
        ("deficit_error", |r| r.deficit_error),
        ("deficit", |r| r.deficit),
    ];
    let mut orders = BTreeMap::new();
    for (name, get) in columns.iter().take(7) {
        let err: Vec<f64> = rows.iter().map(get).collect();
        if let Some(o) = fit_order(&h, &err) {
            orders.insert(name.to_string(), o);
        }
    }
    ConvergenceTable {
        geometry: *surface,
        resolution,
        rows,
        orders,
    }
}

impl ConvergenceTable {
    pub fn order(&self, column: &str) -> Option<OrderFit> {
        self.orders.get(column).copied()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "level,vertices,faces,h,area_error,boundary_error,mean_curvature_error,second_fundamental_error,pde_residual,flux_error,deficit,deficit_error\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.12},{:.6e}",
                r.level,
                r.vertices,
                r.faces,
                r.h,
                r.area_error,
                r.boundary_error,
                r.mean_curvature_error,
                r.second_fundamental_error,
                r.pde_residual,
                r.flux_error,
                r.deficit,
                r.deficit_error
            );
        }
        s
    }

    /// `column,order,r_squared` rows.
    pub fn orders_csv(&self) -> String {
        let mut s = String::from("column,order,r_squared\n");
        for (k, o) in &self.orders {
            let _ = writeln!(s, "{},{:.4},{:.4}", k, o.order, o.r_squared);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_of_exact_power_law() {
        let h = [0.4, 0.2, 0.1, 0.05];
        let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        let o = fit_order(&h, &e).unwrap();
        assert!((o.order - 2.0).abs() < 1e-12);
        assert!((o.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_order(&[0.1], &[0.2]).is_none());
        assert!(fit_order(&[0.1, 0.2], &[0.0, 0.0]).is_none());
    }

    #[test]
    fn exact_deficits() {
        use std::f64::consts::PI;
        let disk = AnalyticSurface::FlatDisk { radius: 1.0, ambient_dim: 3 };
        assert!((exact_constant_deficit(&disk) - 1.0).abs() < 1e-14);
        let sphere = AnalyticSurface::Sphere { radius: 1.0, ambient_dim: 3 };
        assert!((exact_constant_deficit(&sphere) - 2.0).abs() < 1e-14);
        let holo = AnalyticSurface::Holomorphic { degree: 2, radius: 1.0 };
        let iso = holo.exact_boundary_length() / (2.0 * (PI * holo.exact_area()).sqrt());
        assert!((exact_constant_deficit(&holo) - iso).abs() < 1e-14);
    }

    #[test]
    fn small_disk_study() {
        let disk = AnalyticSurface::FlatDisk { radius: 1.0, ambient_dim: 3 };
        let t = convergence_study(&disk, 4, 0..=2);
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows.windows(2).all(|w| w[1].area_error < w[0].area_error));
        assert!(t.to_csv().lines().count() == 4);
    }
}
