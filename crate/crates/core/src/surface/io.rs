//! Text mesh format:
//!
//! ```text
//! minkmesh <space_dim> <time_dim>
//! v <coords...>          # spatial-first, space_dim + time_dim floats
//! c <i0> <i1> <i2>       # 0-based vertex indices
//! b <i0> <i1>            # optional boundary faces, derived when absent
//! ```

use crate::error::{Error, Result};
use crate::mink::{MinkVec, Signature};
use crate::surface::mesh::SurfaceMesh;
use std::io::{BufRead, Write};

pub fn read_minkmesh<R: BufRead>(reader: R) -> Result<SurfaceMesh> {
    let mut sig: Option<Signature> = None;
    let mut vertices: Vec<MinkVec> = Vec::new();
    let mut cells: Vec<[usize; 3]> = Vec::new();
    let mut boundary: Vec<[usize; 2]> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let tag = parts.next().unwrap();
        let bad = |msg: &str| Error::BadInput(format!("line {}: {msg}", lineno + 1));
        match tag {
            "minkmesh" => {
                let p: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("missing space_dim"))?;
                let q: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("missing time_dim"))?;
                sig = Some(Signature::new(p, q)?);
            }
            "v" => {
                let s = sig.ok_or_else(|| bad("vertex before header"))?;
                let coords: Vec<f64> = parts
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("bad coordinate"))?;
                vertices.push(MinkVec::new(coords, s)?);
            }
            "c" => {
                let idx: Vec<usize> = parts
                    .map(|t| t.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("bad cell index"))?;
                if idx.len() != 3 {
                    return Err(bad("cells must have three vertices"));
                }
                cells.push([idx[0], idx[1], idx[2]]);
            }
            "b" => {
                let idx: Vec<usize> = parts
                    .map(|t| t.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("bad boundary index"))?;
                if idx.len() != 2 {
                    return Err(bad("boundary faces must have two vertices"));
                }
                boundary.push([idx[0], idx[1]]);
            }
            other => return Err(bad(&format!("unknown record '{other}'"))),
        }
    }

    let sig = sig.ok_or_else(|| Error::BadInput("missing minkmesh header".into()))?;
    if boundary.is_empty() {
        SurfaceMesh::new(sig, vertices, cells)
    } else {
        SurfaceMesh::with_boundary(sig, vertices, cells, boundary)
    }
}

pub fn write_minkmesh<W: Write>(mesh: &SurfaceMesh, mut writer: W) -> Result<()> {
    writeln!(
        writer,
        "minkmesh {} {}",
        mesh.sig.space_dim, mesh.sig.time_dim
    )?;
    for v in &mesh.vertices {
        write!(writer, "v")?;
        for c in &v.coords {
            write!(writer, " {c:.17e}")?;
        }
        writeln!(writer)?;
    }
    for c in &mesh.cells {
        writeln!(writer, "c {} {} {}", c[0], c[1], c[2])?;
    }
    for b in &mesh.boundary {
        writeln!(writer, "b {} {}", b[0], b[1])?;
    }
    Ok(())
}

pub fn read_minkmesh_file(path: &std::path::Path) -> Result<SurfaceMesh> {
    let file = std::fs::File::open(path)?;
    read_minkmesh(std::io::BufReader::new(file))
}

pub fn write_minkmesh_file(mesh: &SurfaceMesh, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_minkmesh(mesh, std::io::BufWriter::new(file))
}
