//! Binary mesh files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "VMSH" | version u32 | node count u64 | ring count u64
//! ring offsets: u64 × ring count
//! nodes: { ring u32, theta f64, direction f64×3, neighbors u64×6 } × node count
//! ```
//!
//! The geometry configuration is not stored; the reader is given the one the
//! caller expects the file to hold.

use std::io::{Read, Write};

use super::{MeshError, MeshNode, VisualMesh};
use crate::geometry::MeshGeometryConfig;

pub const MESH_MAGIC: [u8; 4] = *b"VMSH";
pub const MESH_VERSION: u32 = 1;

pub fn write_mesh<W: Write>(mut w: W, mesh: &VisualMesh) -> Result<(), MeshError> {
    w.write_all(&MESH_MAGIC)?;
    w.write_all(&MESH_VERSION.to_le_bytes())?;
    w.write_all(&(mesh.nodes.len() as u64).to_le_bytes())?;
    w.write_all(&(mesh.ring_offsets.len() as u64).to_le_bytes())?;
    for &offset in &mesh.ring_offsets {
        w.write_all(&(offset as u64).to_le_bytes())?;
    }
    for node in &mesh.nodes {
        w.write_all(&node.ring.to_le_bytes())?;
        w.write_all(&node.theta.to_le_bytes())?;
        for v in node.direction {
            w.write_all(&v.to_le_bytes())?;
        }
        for n in node.neighbors {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], MeshError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, MeshError> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, MeshError> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, MeshError> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

fn read_index<R: Read>(r: &mut R, bound: usize, what: &str) -> Result<usize, MeshError> {
    let value = read_u64(r)?;
    usize::try_from(value)
        .ok()
        .filter(|&v| v < bound)
        .ok_or_else(|| MeshError::Corrupt(format!("{what} {value} out of range (< {bound})")))
}

pub fn read_mesh<R: Read>(mut r: R, config: MeshGeometryConfig) -> Result<VisualMesh, MeshError> {
    let magic: [u8; 4] = read_array(&mut r)?;
    if magic != MESH_MAGIC {
        return Err(MeshError::BadMagic(magic));
    }
    let version = read_u32(&mut r)?;
    if version != MESH_VERSION {
        return Err(MeshError::UnsupportedVersion(version));
    }
    let node_count = usize::try_from(read_u64(&mut r)?).map_err(|_| MeshError::Corrupt("node count".into()))?;
    let ring_count = read_u64(&mut r)?;
    if node_count == 0 || ring_count == 0 || ring_count > node_count as u64 {
        return Err(MeshError::Corrupt(format!("{node_count} nodes in {ring_count} rings")));
    }

    let ring_offsets = (0..ring_count)
        .map(|_| read_index(&mut r, node_count, "ring offset"))
        .collect::<Result<Vec<_>, _>>()?;
    if ring_offsets[0] != 0 || ring_offsets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MeshError::Corrupt("ring offsets must start at 0 and increase".into()));
    }

    // Cap the up-front allocation so a bogus count cannot exhaust memory before truncation is seen.
    let mut nodes = Vec::with_capacity(node_count.min(1 << 20));
    for _ in 0..node_count {
        let ring = read_u32(&mut r)?;
        if u64::from(ring) >= ring_count {
            return Err(MeshError::Corrupt(format!("node ring {ring} out of range")));
        }
        let theta = read_f64(&mut r)?;
        let direction = [read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?];
        let mut neighbors = [0usize; 6];
        for n in &mut neighbors {
            *n = read_index(&mut r, node_count, "neighbor")?;
        }
        nodes.push(MeshNode { ring, theta, direction, neighbors });
    }
    Ok(VisualMesh { nodes, ring_offsets, config })
}
