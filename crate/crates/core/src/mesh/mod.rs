//! The linked sample graph and its projection into images.

mod camera;
pub mod io;
mod onscreen;

use std::f64::consts::{FRAC_PI_3, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, GeometryError, MeshGeometryConfig, PhiSeries};

pub use camera::{project_node, unproject_pixel, CameraPose, LensModel, Projection, Rotation};
pub use onscreen::{lookup_onscreen, sample_image, ImageView, OnScreenMesh};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid camera pose: {0}")]
    InvalidCamera(String),
    #[error("invalid lens: {0}")]
    InvalidLens(String),
    #[error("image is {actual:?} (w×h×c) but the lens expects {expected:?} pixels")]
    ImageSize { expected: [u32; 2], actual: [usize; 3] },
    #[error("not a mesh file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported mesh file version {0}")]
    UnsupportedVersion(u32),
    #[error("mesh file is truncated")]
    Truncated,
    #[error("corrupt mesh: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(std::io::Error),
}

impl From<std::io::Error> for MeshError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            MeshError::Truncated
        } else {
            MeshError::Io(e)
        }
    }
}

/// Neighbour slot layout shared by the mesh and the inference engine.
pub mod slot {
    pub const LEFT: usize = 0;
    pub const RIGHT: usize = 1;
    pub const BELOW: [usize; 2] = [2, 3];
    pub const ABOVE: [usize; 2] = [4, 5];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshNode {
    pub ring: u32,
    /// Azimuth about the vertical, radians in `[0, 2π)`.
    pub theta: f64,
    /// Unit ray in the observation-plane frame.
    pub direction: [f64; 3],
    /// `[left, right, below, below, above, above]`.
    pub neighbors: [usize; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualMesh {
    pub nodes: Vec<MeshNode>,
    /// Index of the first node of each ring.
    pub ring_offsets: Vec<usize>,
    pub config: MeshGeometryConfig,
}

impl VisualMesh {
    /// Builds the mesh for a configuration.
    pub fn generate(config: &MeshGeometryConfig) -> Result<Self, GeometryError> {
        let series = geometry::build_phi_series(config)?;
        Ok(build_mesh(&series, config))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ring_count(&self) -> usize {
        self.ring_offsets.len()
    }

    /// Node index range of a ring.
    pub fn ring(&self, ring: usize) -> std::ops::Range<usize> {
        let start = self.ring_offsets[ring];
        let end = self.ring_offsets.get(ring + 1).copied().unwrap_or(self.nodes.len());
        start..end
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }
}

/// Number of nodes on a ring with the given azimuthal spacing.
///
/// Ratios within 1e-9 of an integer are taken as that integer so rounding
/// noise in `2π / Δθ` cannot add a node.
pub fn ring_node_count(delta_theta: f64) -> usize {
    let ratio = TAU / delta_theta;
    if !ratio.is_finite() {
        return 1;
    }
    let nearest = ratio.round();
    let count = if (ratio - nearest).abs() < 1e-9 { nearest } else { ratio.ceil() };
    (count as usize).max(1)
}

/// The two nodes of an evenly spaced ring that bracket `theta`, preceding node
/// first. When `theta` sits exactly on a node the preceding node is paired with it.
fn bracketing(theta: f64, offset: usize, count: usize) -> [usize; 2] {
    let position = theta / (TAU / count as f64);
    let upper = position.ceil() as i64;
    let n = count as i64;
    [offset + (upper - 1).rem_euclid(n) as usize, offset + upper.rem_euclid(n) as usize]
}

/// The single node of an evenly spaced ring nearest `theta`, ties towards the preceding node.
fn nearest(theta: f64, offset: usize, count: usize) -> usize {
    let position = theta / (TAU / count as f64);
    offset + ((position - 0.5).ceil() as i64).rem_euclid(count as i64) as usize
}

/// Lays out nodes ring by ring and links each to its six neighbours.
///
/// Ring 0 is the single node below the camera; its six slots hold the ring-1
/// nodes nearest to six equally spaced azimuths. Every other node links to
/// its two ring neighbours and to the two nodes bracketing its azimuth on
/// the rings below and above. Ring-1 nodes use the centre node for both
/// "below" slots; nodes of the last ring point their "above" slots at
/// themselves. A mesh with no ring 1 has a centre node linked to itself.
pub fn build_mesh(series: &PhiSeries, config: &MeshGeometryConfig) -> VisualMesh {
    let counts: Vec<usize> = series
        .angles
        .iter()
        .enumerate()
        .map(|(n, &phi)| if n == 0 { 1 } else { ring_node_count(geometry::ring_delta_theta(config, series, phi)) })
        .collect();

    let mut ring_offsets = Vec::with_capacity(counts.len());
    let mut total = 0;
    for &count in &counts {
        ring_offsets.push(total);
        total += count;
    }

    let last_ring = counts.len() - 1;
    let mut nodes = Vec::with_capacity(total);
    for (ring, (&phi, &count)) in series.angles.iter().zip(&counts).enumerate() {
        let offset = ring_offsets[ring];
        let spacing = TAU / count as f64;
        let (sin_phi, cos_phi) = phi.sin_cos();
        for j in 0..count {
            let index = offset + j;
            let theta = j as f64 * spacing;
            let (sin_theta, cos_theta) = theta.sin_cos();
            let direction = [sin_phi * cos_theta, sin_phi * sin_theta, cos_phi];

            let neighbors = if ring == 0 {
                if last_ring == 0 {
                    [index; 6]
                } else {
                    std::array::from_fn(|s| nearest(s as f64 * FRAC_PI_3, ring_offsets[1], counts[1]))
                }
            } else {
                let left = offset + (j + count - 1) % count;
                let right = offset + (j + 1) % count;
                let below = if ring == 1 { [0, 0] } else { bracketing(theta, ring_offsets[ring - 1], counts[ring - 1]) };
                let above = if ring == last_ring {
                    [index, index]
                } else {
                    bracketing(theta, ring_offsets[ring + 1], counts[ring + 1])
                };
                [left, right, below[0], below[1], above[0], above[1]]
            };
            nodes.push(MeshNode { ring: ring as u32, theta, direction, neighbors });
        }
    }

    VisualMesh { nodes, ring_offsets, config: *config }
}

/// Reuses generated meshes across frames.
///
/// A cached mesh is returned for any request with the same shape, density and
/// distance bound whose camera height is within `height_tolerance` (relative)
/// of the cached height.
#[derive(Debug)]
pub struct MeshCache {
    height_tolerance: f64,
    meshes: Vec<Arc<VisualMesh>>,
}

impl Default for MeshCache {
    fn default() -> Self {
        MeshCache::new(0.02)
    }
}

impl MeshCache {
    pub fn new(height_tolerance: f64) -> Self {
        MeshCache { height_tolerance, meshes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.meshes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meshes.is_empty()
    }

    pub fn find(&self, config: &MeshGeometryConfig) -> Option<Arc<VisualMesh>> {
        self.meshes.iter().find(|m| reusable(&m.config, config, self.height_tolerance)).cloned()
    }

    pub fn insert(&mut self, mesh: VisualMesh) -> Arc<VisualMesh> {
        let mesh = Arc::new(mesh);
        self.meshes.push(mesh.clone());
        mesh
    }

    pub fn get_or_build(&mut self, config: &MeshGeometryConfig) -> Result<Arc<VisualMesh>, GeometryError> {
        if let Some(mesh) = self.find(config) {
            return Ok(mesh);
        }
        Ok(self.insert(VisualMesh::generate(config)?))
    }
}

/// Whether a mesh built for `cached` serves a request for `wanted`.
pub fn reusable(cached: &MeshGeometryConfig, wanted: &MeshGeometryConfig, height_tolerance: f64) -> bool {
    cached.shape == wanted.shape
        && cached.density == wanted.density
        && cached.max_ground_distance == wanted.max_ground_distance
        && (wanted.height - cached.height).abs() <= height_tolerance * cached.height
}
