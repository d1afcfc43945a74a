//! Brute-force validators for the mesh and a hexagonal baseline.
//!
//! Nothing here calls into [`crate::geometry`] or the projection code in
//! [`crate::mesh`]: ring inclinations come from the tangent construction of
//! a sphere (or the closed form for circles), visibility and lens inversion
//! are re-derived, and object hits are plain ray/solid intersection tests.

mod hex;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{MeshGeometryConfig, ShapeKind};
use crate::mesh::{lookup_onscreen, CameraPose, LensModel, MeshError, Projection, VisualMesh};

pub use hex::{calibrate_hex_spacing, hex_point_count, hexagonal_grid, HexGrid};

/// Relative slack for tangency. Some rings are exactly tangent to a target
/// directly below the camera; grazing rays count as hits.
const TANGENT_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("lattice spacing must be positive, got {0}")]
    InvalidSpacing(f64),
    #[error("could not match {target} lattice points (closest {best})")]
    Calibration { target: usize, best: usize },
    #[error("distance list is empty")]
    NoDistances,
    #[error("distances must be non-negative and strictly increasing")]
    UnorderedDistances,
}

/// A target object resting on the observation plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedObject {
    pub shape: ShapeKind,
    pub radius: f64,
    /// Plane coordinates of the object's centre (sphere) or middle (circle).
    pub ground: [f64; 2],
}

impl PlacedObject {
    pub fn at(shape: ShapeKind, radius: f64, distance: f64, azimuth: f64) -> Self {
        PlacedObject { shape, radius, ground: [distance * azimuth.cos(), distance * azimuth.sin()] }
    }

    /// Whether the ray from a camera `camera_height` above the plane along
    /// `direction` (plane frame, `z` down) meets the object.
    pub fn hit_by(&self, direction: [f64; 3], camera_height: f64) -> bool {
        let [dx, dy, dz] = direction;
        let norm = (dx * dx + dy * dy + dz * dz).sqrt();
        let [gx, gy] = self.ground;
        let r = self.radius;
        match self.shape {
            ShapeKind::Sphere => {
                let centre = [gx, gy, camera_height - r];
                let along = (centre[0] * dx + centre[1] * dy + centre[2] * dz) / norm;
                let centre_sq = centre.iter().map(|c| c * c).sum::<f64>();
                let reach = r * r * (1.0 + TANGENT_SLACK);
                if centre_sq <= reach {
                    return true;
                }
                along > 0.0 && centre_sq - along * along <= reach
            }
            ShapeKind::Circle => {
                if dz <= 0.0 {
                    return false;
                }
                let t = camera_height / dz;
                (t * dx - gx).powi(2) + (t * dy - gy).powi(2) <= r * r * (1.0 + TANGENT_SLACK)
            }
        }
    }
}

/// Next ring from the far tangent of a sphere whose near tangent is `phi`.
fn tangent_step(phi: f64, height: f64, radius: f64) -> f64 {
    let drop = height - radius;
    // Horizontal offset of a sphere centre lying at distance `radius` from the ray.
    let offset = drop * phi.tan() + radius / phi.cos();
    let centre = offset.atan2(drop);
    let half_angle = (radius / offset.hypot(drop)).asin();
    centre + half_angle
}

fn sphere_inclination(height: f64, radius: f64, steps: u64) -> f64 {
    let mut phi = 0.0;
    for _ in 0..steps {
        phi = tangent_step(phi, height, radius);
        if !(phi < FRAC_PI_2) {
            return FRAC_PI_2;
        }
    }
    phi
}

/// Radius of the sub-spheres whose `p·q` rings cover `q` rings of the target.
fn sub_sphere_radius(config: &MeshGeometryConfig) -> f64 {
    let (p, q) = (u64::from(config.density.p()), u64::from(config.density.q()));
    let (h, r0) = (config.height, config.shape.radius);
    if p == 1 {
        return r0;
    }
    let target = sphere_inclination(h, r0, q);
    let (mut lo, mut hi) = (0.0, r0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sphere_inclination(h, mid, p * q) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ring inclinations re-derived from the target geometry.
pub fn ring_inclinations(config: &MeshGeometryConfig) -> Vec<f64> {
    let h = config.height;
    let r = config.shape.radius;
    let limit = config.max_ground_distance;
    let mut rings = vec![0.0];
    match config.shape.kind {
        ShapeKind::Circle => {
            // Ring n meets the plane n sub-diameters from the foot.
            let step = 2.0 * r / config.density.value();
            for n in 1.. {
                let ground = n as f64 * step;
                if ground > limit {
                    break;
                }
                rings.push((ground / h).atan());
            }
        }
        ShapeKind::Sphere => {
            let small = sub_sphere_radius(config);
            let mut phi = 0.0;
            loop {
                let next = tangent_step(phi, h, small);
                if !(next < FRAC_PI_2 && next > phi) || (h - r) * next.tan() > limit {
                    break;
                }
                rings.push(next);
                phi = next;
            }
        }
    }
    rings
}

/// How many rings pass through an object at `distance` from the foot of the camera.
pub fn count_ring_intersections(config: &MeshGeometryConfig, distance: f64) -> usize {
    let rings = ring_inclinations(config);
    let h = config.height;
    let r = config.shape.radius;
    match config.shape.kind {
        ShapeKind::Sphere => {
            let drop = h - r;
            let centre = distance.atan2(drop);
            let ratio = r / distance.hypot(drop);
            let half_angle = if ratio >= 1.0 { PI } else { ratio.asin() };
            let reach = half_angle * (1.0 + TANGENT_SLACK);
            rings.iter().filter(|&&phi| (phi - centre).abs() <= reach).count()
        }
        ShapeKind::Circle => {
            let reach = r * (1.0 + TANGENT_SLACK);
            rings.iter().filter(|&&phi| (h * phi.tan() - distance).abs() <= reach).count()
        }
    }
}

/// Pixel for a plane-frame direction, or `None` when it is not imaged.
fn image_of(direction: [f64; 3], pose: &CameraPose, lens: &LensModel) -> Option<[f64; 2]> {
    let m = &pose.orientation.0;
    let cam: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| m[i][j] * direction[j]).sum());
    let norm = (cam[0] * cam[0] + cam[1] * cam[1] + cam[2] * cam[2]).sqrt();
    let angle = (cam[2] / norm).clamp(-1.0, 1.0).acos();
    if angle > lens.fov {
        return None;
    }
    let radial = match lens.projection {
        Projection::Rectilinear if cam[2] <= 0.0 => return None,
        Projection::Rectilinear => lens.focal_length * (cam[0] * cam[0] + cam[1] * cam[1]).sqrt() / cam[2],
        Projection::Equisolid => 2.0 * lens.focal_length * (angle / 2.0).sin(),
    };
    let lateral = cam[0].hypot(cam[1]);
    let (ux, uy) = if lateral > 0.0 { (cam[0] / lateral, cam[1] / lateral) } else { (0.0, 0.0) };
    let px = [lens.center[0] + radial * ux, lens.center[1] + radial * uy];
    let [w, h] = lens.resolution;
    let inside = px[0] >= 0.0 && px[0] <= f64::from(w) - 1.0 && px[1] >= 0.0 && px[1] <= f64::from(h) - 1.0;
    inside.then_some(px)
}

/// Plane-frame direction seen at a pixel.
fn ray_of(pixel: [f64; 2], pose: &CameraPose, lens: &LensModel) -> Option<[f64; 3]> {
    let (dx, dy) = (pixel[0] - lens.center[0], pixel[1] - lens.center[1]);
    let radial = dx.hypot(dy);
    let angle = match lens.projection {
        Projection::Rectilinear => (radial / lens.focal_length).atan(),
        Projection::Equisolid => {
            let s = radial / (2.0 * lens.focal_length);
            if s > 1.0 {
                return None;
            }
            2.0 * s.asin()
        }
    };
    if angle > lens.fov {
        return None;
    }
    let (ux, uy) = if radial > 0.0 { (dx / radial, dy / radial) } else { (0.0, 0.0) };
    let cam = [angle.sin() * ux, angle.sin() * uy, angle.cos()];
    let m = &pose.orientation.0;
    Some(std::array::from_fn(|j| (0..3).map(|i| m[i][j] * cam[i]).sum()))
}

/// Indices of visible mesh nodes whose rays meet the object.
pub fn nodes_in_object(mesh: &VisualMesh, pose: &CameraPose, lens: &LensModel, object: &PlacedObject) -> Vec<usize> {
    mesh.nodes
        .iter()
        .enumerate()
        .filter(|(_, node)| object.hit_by(node.direction, pose.height) && image_of(node.direction, pose, lens).is_some())
        .map(|(i, _)| i)
        .collect()
}

/// Visible mesh nodes on an object of `radius` (shape from the mesh
/// configuration) centred at `ground_position` on the plane.
pub fn count_nodes_in_object(
    mesh: &VisualMesh,
    pose: &CameraPose,
    lens: &LensModel,
    ground_position: [f64; 2],
    radius: f64,
) -> usize {
    let object = PlacedObject { shape: mesh.config.shape.kind, radius, ground: ground_position };
    nodes_in_object(mesh, pose, lens, &object).len()
}

/// Visible mesh nodes, counted without the projection code under test.
pub fn count_visible_nodes(mesh: &VisualMesh, pose: &CameraPose, lens: &LensModel) -> usize {
    mesh.nodes.iter().filter(|n| image_of(n.direction, pose, lens).is_some()).count()
}

/// Lattice points whose pixel rays meet the object.
pub fn hex_points_on_object(grid: &HexGrid, pose: &CameraPose, lens: &LensModel, object: &PlacedObject) -> usize {
    grid.points
        .iter()
        .filter_map(|&px| ray_of(px, pose, lens))
        .filter(|&ray| object.hit_by(ray, pose.height))
        .count()
}

/// Reference scene for density checks: the soccer-ball mesh seen through a
/// 180° equisolid fisheye (1280×1024) pitched 0.5 rad up from straight down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub config: MeshGeometryConfig,
    pub pose: CameraPose,
    pub lens: LensModel,
}

impl Scene {
    pub fn soccer() -> Self {
        let config = MeshGeometryConfig::soccer_ball();
        Scene {
            config,
            pose: CameraPose::from_euler(config.height, 0.0, 0.5, 0.0),
            lens: LensModel {
                projection: Projection::Equisolid,
                focal_length: 400.0,
                center: [639.5, 511.5],
                resolution: [1280, 1024],
                fov: FRAC_PI_2,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub ground_distance: f64,
    pub mesh_point_count: usize,
    pub ring_intersection_count: usize,
    pub hex_point_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub rows: Vec<DensityRow>,
    /// Lattice spacing of the hexagonal baseline, pixels.
    pub hex_spacing: f64,
    /// Visible mesh nodes the lattice was matched to.
    pub visible_nodes: usize,
}

impl DensityReport {
    pub const CSV_HEADER: &'static str = "distance_m,mesh_points,ring_intersections,hex_points";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                format_significant(row.ground_distance, 6),
                row.mesh_point_count,
                row.ring_intersection_count,
                row.hex_point_count
            );
        }
        out
    }
}

/// Formats like C's `%.{digits}g`.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exponent) = sci.split_once('e').unwrap();
    let exponent: i32 = exponent.parse().unwrap();
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exponent < -4 || exponent >= digits as i32 {
        format!("{}e{}{:02}", trim(mantissa), if exponent < 0 { '-' } else { '+' }, exponent.abs())
    } else {
        let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
        trim(&format!("{value:.decimals$}"))
    }
}

/// Sweeps an object away from the camera along its heading and counts
/// samples on it three ways: visible mesh nodes, analytic ring crossings,
/// and points of a hexagonal lattice holding as many points as the visible mesh.
pub fn density_sweep(
    config: &MeshGeometryConfig,
    pose: &CameraPose,
    lens: &LensModel,
    distances: &[f64],
) -> Result<DensityReport, OracleError> {
    density_sweep_at(config, pose, lens, distances, pose.heading())
}

/// [`density_sweep`] along an explicit azimuth.
pub fn density_sweep_at(
    config: &MeshGeometryConfig,
    pose: &CameraPose,
    lens: &LensModel,
    distances: &[f64],
    azimuth: f64,
) -> Result<DensityReport, OracleError> {
    if distances.is_empty() {
        return Err(OracleError::NoDistances);
    }
    if distances[0] < 0.0 || distances.windows(2).any(|w| w[0] >= w[1]) {
        return Err(OracleError::UnorderedDistances);
    }
    pose.validate()?;
    lens.validate()?;
    let mesh = VisualMesh::generate(config).map_err(MeshError::from)?;
    let visible_nodes = lookup_onscreen(&mesh, pose, lens).len();
    let hex_spacing = calibrate_hex_spacing(lens, visible_nodes)?;
    let grid = hexagonal_grid(lens, hex_spacing)?;

    let rows = distances
        .iter()
        .map(|&d| {
            let object = PlacedObject::at(config.shape.kind, config.shape.radius, d, azimuth);
            DensityRow {
                ground_distance: d,
                mesh_point_count: nodes_in_object(&mesh, pose, lens, &object).len(),
                ring_intersection_count: count_ring_intersections(config, d),
                hex_point_count: hex_points_on_object(&grid, pose, lens, &object),
            }
        })
        .collect();
    Ok(DensityReport { rows, hex_spacing, visible_nodes })
}
