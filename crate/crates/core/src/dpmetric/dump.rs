//! Flat binary dumps of meshes and solutions.
//!
//! Every field is a little-endian 64-bit float; counts and indices are
//! stored as floats and are exact below 2^53.
//!
//! Mesh (`DPMESH01`): magic, then `[vertices, tets, edges, p = 0, shells,
//! radius, inner_ratio, label_bytes]`, then vertex coordinates (3 per
//! vertex), shell radii (`shells + 1`), tetrahedra (4 indices each),
//! weights, metric gradients (12 per tet), edges (`i, j, length`), and the
//! UTF-8 metric label padded with zeros to a multiple of 8 bytes.
//!
//! Solution (`DPSOL001`): magic, then `[vertices, tets, p, shells, source,
//! target, primal, dual, gap, newton_steps, flagged]`, then the potential
//! (one per vertex) and the flow (3 per tet).

use std::io::{Read, Write};

use super::mesh::{MeshGraph, MeshSpec};
use super::solver::DpSolution;
use crate::error::{Error, Result};

pub const MESH_MAGIC: &[u8; 8] = b"DPMESH01";
pub const SOLUTION_MAGIC: &[u8; 8] = b"DPSOL001";

fn put(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn f64(&mut self) -> Result<f64> {
        let end = self.pos + 8;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::Io("dump truncated".into()))?;
        self.pos = end;
        Ok(f64::from_le_bytes(bytes.try_into().expect("8-byte slice")))
    }

    fn count(&mut self) -> Result<usize> {
        let v = self.f64()?;
        if !(v >= 0.0 && v.fract() == 0.0 && v < 9.007_199_254_740_992e15) {
            return Err(Error::Io(format!("invalid count {v} in dump")));
        }
        Ok(v as usize)
    }

    fn many(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

fn check_magic(buf: &[u8], magic: &[u8; 8]) -> Result<usize> {
    if buf.get(..8) != Some(&magic[..]) {
        return Err(Error::Io(format!("missing {} header", String::from_utf8_lossy(magic))));
    }
    Ok(8)
}

pub fn encode_mesh(mesh: &MeshGraph) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MESH_MAGIC);
    let label = mesh.metric.as_bytes();
    for v in [
        mesh.vertices.len() as f64,
        mesh.tets.len() as f64,
        mesh.edges.len() as f64,
        0.0,
        mesh.spec.shells as f64,
        mesh.spec.radius,
        mesh.spec.inner_ratio,
        label.len() as f64,
    ] {
        put(&mut out, v);
    }
    mesh.vertices.iter().flatten().for_each(|v| put(&mut out, *v));
    mesh.radii.iter().for_each(|v| put(&mut out, *v));
    mesh.tets.iter().flatten().for_each(|v| put(&mut out, *v as f64));
    mesh.weights.iter().for_each(|v| put(&mut out, *v));
    mesh.grads.iter().flatten().flatten().for_each(|v| put(&mut out, *v));
    for (i, j, l) in &mesh.edges {
        put(&mut out, *i as f64);
        put(&mut out, *j as f64);
        put(&mut out, *l);
    }
    out.extend_from_slice(label);
    out.resize(out.len().div_ceil(8) * 8, 0);
    out
}

pub fn decode_mesh(buf: &[u8]) -> Result<MeshGraph> {
    let pos = check_magic(buf, MESH_MAGIC)?;
    let mut r = Reader { buf, pos };
    let (nv, nt, ne) = (r.count()?, r.count()?, r.count()?);
    let _p = r.f64()?;
    let shells = r.count()?;
    let (radius, inner_ratio) = (r.f64()?, r.f64()?);
    let label_len = r.count()?;
    let coords = r.many(3 * nv)?;
    let radii = r.many(shells + 1)?;
    let tet_idx = r.many(4 * nt)?;
    let weights = r.many(nt)?;
    let grad_vals = r.many(12 * nt)?;
    let edge_vals = r.many(3 * ne)?;
    let label = buf
        .get(r.pos..r.pos + label_len)
        .ok_or_else(|| Error::Io("dump truncated in metric label".into()))?;
    let metric = String::from_utf8(label.to_vec()).map_err(|e| Error::Io(e.to_string()))?;
    let index = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 && (v as usize) < nv {
            Ok(v as usize)
        } else {
            Err(Error::Io(format!("vertex index {v} out of range")))
        }
    };
    let vertices = coords.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    let tets = tet_idx
        .chunks(4)
        .map(|c| Ok([index(c[0])?, index(c[1])?, index(c[2])?, index(c[3])?]))
        .collect::<Result<Vec<_>>>()?;
    let grads = grad_vals
        .chunks(12)
        .map(|c| {
            let mut g = [[0.0; 3]; 4];
            for k in 0..4 {
                g[k] = [c[3 * k], c[3 * k + 1], c[3 * k + 2]];
            }
            g
        })
        .collect();
    let edges = edge_vals
        .chunks(3)
        .map(|c| Ok((index(c[0])?, index(c[1])?, c[2])))
        .collect::<Result<Vec<_>>>()?;
    let boundary = (0..super::mesh::DIRECTIONS)
        .map(|d| 1 + super::mesh::DIRECTIONS * (shells - 1) + d)
        .collect();
    Ok(MeshGraph {
        spec: MeshSpec {
            radius,
            shells,
            inner_ratio,
        },
        metric,
        vertices,
        radii,
        tets,
        weights,
        grads,
        edges,
        boundary,
    })
}

pub fn encode_solution(sol: &DpSolution, shells: usize) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(SOLUTION_MAGIC);
    for v in [
        sol.potential.len() as f64,
        sol.flow.len() as f64,
        sol.p,
        shells as f64,
        sol.source as f64,
        sol.target as f64,
        sol.primal,
        sol.dual,
        sol.gap,
        sol.newton_steps as f64,
        if sol.flagged { 1.0 } else { 0.0 },
    ] {
        put(&mut out, v);
    }
    sol.potential.iter().for_each(|v| put(&mut out, *v));
    sol.flow.iter().flatten().for_each(|v| put(&mut out, *v));
    out
}

/// Decoded solution and the mesh resolution recorded with it.
pub fn decode_solution(buf: &[u8]) -> Result<(DpSolution, usize)> {
    let pos = check_magic(buf, SOLUTION_MAGIC)?;
    let mut r = Reader { buf, pos };
    let (nv, nt) = (r.count()?, r.count()?);
    let p = r.f64()?;
    let shells = r.count()?;
    let (source, target) = (r.count()?, r.count()?);
    let (primal, dual, gap) = (r.f64()?, r.f64()?, r.f64()?);
    let newton_steps = r.count()?;
    let flagged = r.f64()? != 0.0;
    let potential = r.many(nv)?;
    let flow = r.many(3 * nt)?.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok((
        DpSolution {
            source,
            target,
            p,
            potential,
            flow,
            primal,
            dual,
            gap,
            newton_steps,
            flagged,
        },
        shells,
    ))
}

pub fn write_mesh<W: Write>(mesh: &MeshGraph, mut w: W) -> Result<()> {
    w.write_all(&encode_mesh(mesh))?;
    Ok(())
}

pub fn read_mesh<R: Read>(mut r: R) -> Result<MeshGraph> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode_mesh(&buf)
}

pub fn write_solution<W: Write>(sol: &DpSolution, shells: usize, mut w: W) -> Result<()> {
    w.write_all(&encode_solution(sol, shells))?;
    Ok(())
}

pub fn read_solution<R: Read>(mut r: R) -> Result<(DpSolution, usize)> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode_solution(&buf)
}
