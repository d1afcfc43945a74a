//! Lens intrinsics, camera extrinsics and the node projection.
//!
//! The observation-plane frame has its origin at the camera, `z` pointing
//! straight down at the plane and `x`, `y` spanning it. The camera frame is
//! the usual image convention: `x` right, `y` down, `z` along the optical axis.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::MeshError;

/// A 3×3 rotation matrix stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rotation(pub [[f64; 3]; 3]);

impl Rotation {
    pub const IDENTITY: Rotation = Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn about_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn about_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Rotation(std::array::from_fn(|i| std::array::from_fn(|j| m[j][i])))
    }

    pub fn mul(&self, other: &Rotation) -> Self {
        let (a, b) = (&self.0, &other.0);
        Rotation(std::array::from_fn(|i| {
            std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j])
        }))
    }

    #[inline]
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Orthonormal with determinant +1, each to within `tolerance`.
    pub fn is_proper(&self, tolerance: f64) -> bool {
        let product = self.mul(&self.transpose());
        let orthonormal = (0..3).all(|i| {
            (0..3).all(|j| {
                let expected = if i == j { 1.0 } else { 0.0 };
                (product.0[i][j] - expected).abs() <= tolerance
            })
        });
        orthonormal && (self.determinant() - 1.0).abs() <= tolerance
    }
}

/// Camera placement relative to the observation plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    /// Meters above the plane.
    pub height: f64,
    /// Rotates observation-plane vectors into the camera frame.
    pub orientation: Rotation,
}

impl CameraPose {
    pub fn new(height: f64, orientation: Rotation) -> Result<Self, MeshError> {
        let pose = CameraPose { height, orientation };
        pose.validate()?;
        Ok(pose)
    }

    /// Builds a pose from Euler angles.
    ///
    /// With all angles zero the camera looks straight down with the top of
    /// the image towards `+x`. `pitch` tilts the optical axis up towards the
    /// heading (π/2 is level with the horizon), `yaw` turns the heading about
    /// the vertical and `roll` spins the image about the optical axis.
    pub fn from_euler(height: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        // Camera axes at rest: x → +y, y → −x, z → +z.
        let rest = Rotation([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let plane_from_camera = Rotation::about_z(yaw)
            .mul(&rest)
            .mul(&Rotation::about_x(pitch))
            .mul(&Rotation::about_z(roll));
        CameraPose { height, orientation: plane_from_camera.transpose() }
    }

    pub fn looking_down(height: f64) -> Self {
        CameraPose { height, orientation: Rotation::IDENTITY }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if !(self.height.is_finite() && self.height > 0.0) {
            return Err(MeshError::InvalidCamera(format!("height must be positive, got {}", self.height)));
        }
        if !self.orientation.is_proper(1e-9) {
            return Err(MeshError::InvalidCamera("orientation is not a proper rotation".into()));
        }
        Ok(())
    }

    /// Optical axis expressed in the observation-plane frame.
    pub fn optical_axis(&self) -> [f64; 3] {
        let m = &self.orientation.0;
        [m[2][0], m[2][1], m[2][2]]
    }

    /// Azimuth of the optical axis projected on the plane; 0 when looking straight down.
    pub fn heading(&self) -> f64 {
        let axis = self.optical_axis();
        if axis[0].hypot(axis[1]) < 1e-12 {
            0.0
        } else {
            axis[1].atan2(axis[0])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    /// Pinhole: `ρ = f·tan θ`.
    Rectilinear,
    /// Fisheye: `ρ = 2f·sin(θ/2)`.
    Equisolid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensModel {
    pub projection: Projection,
    /// Pixels.
    pub focal_length: f64,
    /// Pixel coordinates of the optical axis.
    pub center: [f64; 2],
    /// Width × height in pixels.
    pub resolution: [u32; 2],
    /// Largest accepted angle from the optical axis, radians.
    pub fov: f64,
}

impl LensModel {
    pub fn validate(&self) -> Result<(), MeshError> {
        if !(self.focal_length.is_finite() && self.focal_length > 0.0) {
            return Err(MeshError::InvalidLens(format!("focal length must be positive, got {}", self.focal_length)));
        }
        if !(self.fov > 0.0 && self.fov <= PI) {
            return Err(MeshError::InvalidLens(format!("fov must be in (0, π], got {}", self.fov)));
        }
        if self.resolution[0] == 0 || self.resolution[1] == 0 {
            return Err(MeshError::InvalidLens("resolution must be non-zero".into()));
        }
        if !(self.center[0].is_finite() && self.center[1].is_finite()) {
            return Err(MeshError::InvalidLens("center must be finite".into()));
        }
        Ok(())
    }

    /// Radial pixel distance for an angle from the optical axis.
    pub fn radius_for_angle(&self, theta: f64) -> f64 {
        match self.projection {
            Projection::Rectilinear => self.focal_length * theta.tan(),
            Projection::Equisolid => 2.0 * self.focal_length * (0.5 * theta).sin(),
        }
    }

    /// Maps a camera-frame ray to pixel coordinates, ignoring image bounds.
    pub fn ray_to_pixel(&self, ray: [f64; 3]) -> Option<[f64; 2]> {
        let lateral = ray[0].hypot(ray[1]);
        let theta = lateral.atan2(ray[2]);
        if theta > self.fov {
            return None;
        }
        if self.projection == Projection::Rectilinear && theta >= FRAC_PI_2 {
            return None;
        }
        if lateral == 0.0 {
            return Some(self.center);
        }
        let rho = self.radius_for_angle(theta);
        Some([self.center[0] + rho * ray[0] / lateral, self.center[1] + rho * ray[1] / lateral])
    }

    /// Inverse of [`ray_to_pixel`](Self::ray_to_pixel): the unit camera-frame ray through a pixel.
    pub fn pixel_to_ray(&self, pixel: [f64; 2]) -> Option<[f64; 3]> {
        let dx = pixel[0] - self.center[0];
        let dy = pixel[1] - self.center[1];
        let rho = dx.hypot(dy);
        if rho == 0.0 {
            return Some([0.0, 0.0, 1.0]);
        }
        let (sin_theta, cos_theta) = match self.projection {
            Projection::Rectilinear => {
                let t = rho / self.focal_length;
                let norm = t.hypot(1.0);
                (t / norm, 1.0 / norm)
            }
            Projection::Equisolid => {
                let half_sin = rho / (2.0 * self.focal_length);
                if half_sin > 1.0 {
                    return None;
                }
                let half_cos = (1.0 - half_sin * half_sin).sqrt();
                (2.0 * half_sin * half_cos, 1.0 - 2.0 * half_sin * half_sin)
            }
        };
        if sin_theta.atan2(cos_theta) > self.fov {
            return None;
        }
        Some([sin_theta * dx / rho, sin_theta * dy / rho, cos_theta])
    }

    pub fn contains(&self, pixel: [f64; 2]) -> bool {
        let [w, h] = self.resolution;
        (0.0..=f64::from(w - 1)).contains(&pixel[0]) && (0.0..=f64::from(h - 1)).contains(&pixel[1])
    }
}

/// Projects an observation-plane direction to a pixel, or `None` when the
/// direction is outside the field of view, behind a pinhole camera, or lands
/// outside the image.
pub fn project_node(direction: [f64; 3], pose: &CameraPose, lens: &LensModel) -> Option<[f64; 2]> {
    let ray = pose.orientation.apply(direction);
    lens.ray_to_pixel(ray).filter(|px| lens.contains(*px))
}

/// Observation-plane direction seen at a pixel.
pub fn unproject_pixel(pixel: [f64; 2], pose: &CameraPose, lens: &LensModel) -> Option<[f64; 3]> {
    lens.pixel_to_ray(pixel).map(|ray| pose.orientation.transpose().apply(ray))
}
