//! Mesh file formats.
//!
//! JSON: `{"ambient_dim": d, "vertices": [[x1, .., xd], ...], "triangles": [[i, j, k], ...]}`
//! for d ∈ {3, 4}. OFF is read for d = 3 only (polygons are fan-triangulated).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{Mesh, MeshError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("OFF parse error: {0}")]
    Off(String),
    #[error("unsupported mesh extension {0:?}")]
    Extension(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshJson {
    pub ambient_dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl From<&Mesh> for MeshJson {
    fn from(m: &Mesh) -> Self {
        let d = m.ambient_dim();
        MeshJson {
            ambient_dim: d,
            vertices: m.vertices().iter().map(|p| p.as_slice()[..d].to_vec()).collect(),
            triangles: m.triangles().to_vec(),
        }
    }
}

impl TryFrom<MeshJson> for Mesh {
    type Error = MeshError;

    fn try_from(j: MeshJson) -> Result<Self, Self::Error> {
        Mesh::from_coords(j.ambient_dim, &j.vertices, j.triangles)
    }
}

pub fn mesh_to_json(mesh: &Mesh) -> String {
    serde_json::to_string(&MeshJson::from(mesh)).expect("mesh serializes")
}

pub fn mesh_from_json(text: &str) -> Result<Mesh, IoError> {
    let j: MeshJson = serde_json::from_str(text)?;
    Ok(Mesh::try_from(j)?)
}

pub fn parse_off(text: &str) -> Result<Mesh, IoError> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let header = tokens.next().ok_or_else(|| IoError::Off("empty file".into()))?;
    if header != "OFF" {
        return Err(IoError::Off(format!("expected OFF header, found {header:?}")));
    }
    let mut next_num = |what: &str| -> Result<f64, IoError> {
        tokens
            .next()
            .ok_or_else(|| IoError::Off(format!("unexpected end of file reading {what}")))?
            .parse::<f64>()
            .map_err(|e| IoError::Off(format!("{what}: {e}")))
    };
    let nv = next_num("vertex count")? as usize;
    let nf = next_num("face count")? as usize;
    let _ne = next_num("edge count")?;
    let mut coords = Vec::with_capacity(nv);
    for _ in 0..nv {
        coords.push(vec![next_num("x")?, next_num("y")?, next_num("z")?]);
    }
    let mut triangles = Vec::with_capacity(nf);
    for f in 0..nf {
        let k = next_num("polygon size")? as usize;
        if k < 3 {
            return Err(IoError::Off(format!("face {f} has {k} vertices")));
        }
        let mut idx = Vec::with_capacity(k);
        for _ in 0..k {
            idx.push(next_num("vertex index")? as usize);
        }
        for i in 1..k - 1 {
            triangles.push([idx[0], idx[i], idx[i + 1]]);
        }
    }
    Ok(Mesh::from_coords(3, &coords, triangles)?)
}

pub fn write_off(mesh: &Mesh) -> Result<String, IoError> {
    if mesh.ambient_dim() != 3 {
        return Err(IoError::Off("OFF output requires ambient dimension 3".into()));
    }
    let mut s = format!("OFF\n{} {} 0\n", mesh.num_vertices(), mesh.num_faces());
    for p in mesh.vertices() {
        s.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
    }
    for t in mesh.triangles() {
        s.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    Ok(s)
}

/// Reads `.json` or `.off` by extension.
pub fn read_mesh(path: &Path) -> Result<Mesh, IoError> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => mesh_from_json(&text),
        Some("off") | Some("OFF") => parse_off(&text),
        other => Err(IoError::Extension(other.unwrap_or("").to_string())),
    }
}

pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<(), IoError> {
    let text = match path.extension().and_then(|e| e.to_str()) {
        Some("off") | Some("OFF") => write_off(mesh)?,
        _ => mesh_to_json(mesh),
    };
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn off_quad_is_fanned() {
        let text = "OFF\n# unit square\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let m = parse_off(text).unwrap();
        assert_eq!(m.num_faces(), 2);
        assert!((m.area() - 1.0).abs() < 1e-15);
        assert_eq!(m.boundary_loops().len(), 1);
    }

    #[test]
    fn json_round_trip_r4() {
        let text = r#"{"ambient_dim":4,"vertices":[[0,0,0,0],[1,0,0,1],[0,1,0,0]],"triangles":[[0,1,2]]}"#;
        let m = mesh_from_json(text).unwrap();
        assert_eq!(m.ambient_dim(), 4);
        let back = mesh_from_json(&mesh_to_json(&m)).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
    }

    #[test]
    fn json_wrong_row_length() {
        let text = r#"{"ambient_dim":4,"vertices":[[0,0,0],[1,0,0],[0,1,0]],"triangles":[[0,1,2]]}"#;
        assert!(matches!(
            mesh_from_json(text),
            Err(IoError::Mesh(MeshError::VertexDimension { .. }))
        ));
    }

    #[test]
    fn off_truncated() {
        assert!(matches!(parse_off("OFF\n3 1 0\n0 0 0\n"), Err(IoError::Off(_))));
    }
}
