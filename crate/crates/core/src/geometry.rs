//! Ring placement for constant sample density.
//!
//! Sample rays are arranged on nested cones around the vertical through the
//! camera. Each cone has an inclination `φ` measured from straight down, and
//! successive inclinations are spaced by the angular size of the target
//! object (a flat circle lying on the observation plane, or a sphere resting
//! on it). Around each cone, rays are spaced by the object's azimuthal extent
//! `Δθ`. Both spacings can be subdivided so that `k` samples land on every
//! object instead of one.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute angle tolerance of the subdivided radius solve.
pub const RADIUS_SOLVE_TOLERANCE: f64 = 1e-12;

/// Maximum number of bisection steps in [`solve_subdivided_radius`].
pub const RADIUS_SOLVE_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("inclination {phi} rad is outside [0, π/2)")]
    InclinationOutOfRange { phi: f64 },
    #[error("ray at inclination {phi} rad reaches the horizon")]
    HorizonReached { phi: f64 },
    #[error(
        "cannot build a mesh when the height of objects ({object_height} m) is greater than \
         or equal to the height of the camera ({camera_height} m)"
    )]
    ObjectTooTall { object_height: f64, camera_height: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error(
        "subdivided radius did not converge after {iterations} steps \
         (bracket [{lower}, {upper}], residual {residual:e} rad)"
    )]
    NoConvergence { iterations: usize, lower: f64, upper: f64, residual: f64 },
}

fn invalid(name: &'static str, reason: impl Into<String>) -> GeometryError {
    GeometryError::InvalidParameter { name, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Circle,
    Sphere,
}

/// The object the mesh is tuned to detect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetShape {
    pub kind: ShapeKind,
    /// Meters.
    pub radius: f64,
}

impl TargetShape {
    pub fn circle(radius: f64) -> Self {
        TargetShape { kind: ShapeKind::Circle, radius }
    }

    pub fn sphere(radius: f64) -> Self {
        TargetShape { kind: ShapeKind::Sphere, radius }
    }

    /// Height of the object's centre above the observation plane.
    pub fn centre_height(&self) -> f64 {
        match self.kind {
            ShapeKind::Circle => 0.0,
            ShapeKind::Sphere => self.radius,
        }
    }
}

/// Number of samples per object, `k = p / q`, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDensity", into = "RawDensity")]
pub struct Density {
    p: u32,
    q: u32,
}

#[derive(Serialize, Deserialize)]
struct RawDensity {
    p: u32,
    q: u32,
}

impl TryFrom<RawDensity> for Density {
    type Error = GeometryError;

    fn try_from(raw: RawDensity) -> Result<Self, Self::Error> {
        Density::new(raw.p, raw.q)
    }
}

impl From<Density> for RawDensity {
    fn from(d: Density) -> Self {
        RawDensity { p: d.p, q: d.q }
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Density {
    /// Requires `p >= q >= 1`.
    pub fn new(p: u32, q: u32) -> Result<Self, GeometryError> {
        if q == 0 || p < q {
            return Err(invalid("density", format!("need p >= q >= 1, got {p}/{q}")));
        }
        let g = gcd(p, q);
        Ok(Density { p: p / g, q: q / g })
    }

    pub fn integer(k: u32) -> Result<Self, GeometryError> {
        Density::new(k, 1)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn value(&self) -> f64 {
        f64::from(self.p) / f64::from(self.q)
    }
}

impl Default for Density {
    fn default() -> Self {
        Density { p: 4, q: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshGeometryConfig {
    /// Camera height above the observation plane, meters.
    pub height: f64,
    pub shape: TargetShape,
    #[serde(default)]
    pub density: Density,
    /// Furthest ground distance (meters) at which objects are sampled.
    pub max_ground_distance: f64,
}

impl MeshGeometryConfig {
    pub fn new(
        height: f64,
        shape: TargetShape,
        density: Density,
        max_ground_distance: f64,
    ) -> Result<Self, GeometryError> {
        let config = MeshGeometryConfig { height, shape, density, max_ground_distance };
        config.validate()?;
        Ok(config)
    }

    /// Robot soccer defaults: a 9.5 cm ball seen from 1.1 m, four rings per ball, 10 m range.
    pub fn soccer_ball() -> Self {
        MeshGeometryConfig {
            height: 1.1,
            shape: TargetShape::sphere(0.095),
            density: Density::default(),
            max_ground_distance: 10.0,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.height.is_finite() && self.height > 0.0) {
            return Err(invalid("height", format!("must be positive, got {}", self.height)));
        }
        let r = self.shape.radius;
        if !(r.is_finite() && r > 0.0) {
            return Err(invalid("radius", format!("must be positive, got {r}")));
        }
        if !(self.max_ground_distance.is_finite() && self.max_ground_distance > 0.0) {
            return Err(invalid(
                "max_ground_distance",
                format!("must be positive, got {}", self.max_ground_distance),
            ));
        }
        if self.shape.kind == ShapeKind::Sphere && self.height <= r {
            return Err(GeometryError::ObjectTooTall { object_height: r, camera_height: self.height });
        }
        Ok(())
    }

    /// Height of the camera above the plane holding the object centres.
    pub fn centre_plane_height(&self) -> f64 {
        self.height - self.shape.centre_height()
    }
}

/// Inclinations of the sample cones, starting straight down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSeries {
    pub angles: Vec<f64>,
    /// Radius of the object that places consecutive rings: `r / k` for
    /// circles, the solved sub-sphere radius for spheres.
    pub effective_radius: f64,
    /// Ground distance (on the plane of object centres) reached by the last ring.
    pub coverage: f64,
}

impl PhiSeries {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

fn check_inclination(phi: f64) -> Result<(), GeometryError> {
    if (0.0..FRAC_PI_2).contains(&phi) {
        Ok(())
    } else {
        Err(GeometryError::InclinationOutOfRange { phi })
    }
}

fn below_horizon(prev: f64, next: f64) -> Result<f64, GeometryError> {
    if next.is_finite() && next < FRAC_PI_2 && next > prev {
        Ok(next)
    } else {
        Err(GeometryError::HorizonReached { phi: prev })
    }
}

/// Next ring inclination for a flat circle of the given diameter on the plane.
///
/// The rays at `phi` and the result meet the plane exactly one diameter apart.
pub fn phi_next_circle(phi: f64, height: f64, effective_diameter: f64) -> Result<f64, GeometryError> {
    check_inclination(phi)?;
    if !(height > 0.0) {
        return Err(invalid("height", format!("must be positive, got {height}")));
    }
    if !(effective_diameter > 0.0) {
        return Err(invalid("effective_diameter", format!("must be positive, got {effective_diameter}")));
    }
    below_horizon(phi, (phi.tan() + effective_diameter / height).atan())
}

/// Next ring inclination for a sphere resting on the plane.
///
/// `phi` is the near tangent of a sphere; the result is its far tangent.
pub fn phi_next_sphere(phi: f64, height: f64, radius: f64) -> Result<f64, GeometryError> {
    check_inclination(phi)?;
    if !(radius > 0.0) {
        return Err(invalid("radius", format!("must be positive, got {radius}")));
    }
    if height <= radius {
        return Err(GeometryError::ObjectTooTall { object_height: radius, camera_height: height });
    }
    let next = 2.0 * (radius / phi.cos() / (height - radius) + phi.tan()).atan() - phi;
    below_horizon(phi, next)
}

/// Azimuthal angle subtended at the foot of the camera by an object of the
/// given radius whose centre lies under the ray at `phi`.
///
/// When the object is closer to the foot than its own radius the angle is
/// clamped to π. Rays at or above the horizon subtend nothing and return 0.
pub fn delta_theta(phi: f64, height: f64, effective_radius: f64) -> f64 {
    if !(phi.abs() < FRAC_PI_2) {
        return 0.0;
    }
    // Magnitudes, so inputs outside the domain still land in [0, π].
    let ratio = (effective_radius / (height * phi.tan())).abs();
    if !(ratio < 1.0) {
        PI
    } else {
        2.0 * ratio.asin()
    }
}

/// Applies the sphere recursion `steps` times from straight down.
fn sphere_orbit(height: f64, radius: f64, steps: u64) -> Result<f64, GeometryError> {
    let mut phi = 0.0;
    for _ in 0..steps {
        phi = phi_next_sphere(phi, height, radius)?;
    }
    Ok(phi)
}

/// Finds the radius `r₁` of the smaller spheres such that `p·q` of their rings
/// span the same inclination as `q` rings of the target sphere `r₀`.
pub fn solve_subdivided_radius(height: f64, radius_r0: f64, p: u32, q: u32) -> Result<f64, GeometryError> {
    if !(radius_r0 > 0.0) {
        return Err(invalid("radius", format!("must be positive, got {radius_r0}")));
    }
    if height <= radius_r0 {
        return Err(GeometryError::ObjectTooTall { object_height: radius_r0, camera_height: height });
    }
    if q == 0 || p < q {
        return Err(invalid("density", format!("need p >= q >= 1, got {p}/{q}")));
    }
    if p == 1 {
        return Ok(radius_r0);
    }

    let target = sphere_orbit(height, radius_r0, u64::from(q))?;
    let steps = u64::from(p) * u64::from(q);
    // Reaching the horizon means the radius is too large.
    let residual = |r: f64| match sphere_orbit(height, r, steps) {
        Ok(phi) => phi - target,
        Err(_) => f64::INFINITY,
    };

    let mut lower = f64::EPSILON;
    let mut upper = radius_r0;
    let lower_residual = residual(lower);
    if lower_residual >= 0.0 {
        return Err(GeometryError::NoConvergence {
            iterations: 0,
            lower,
            upper,
            residual: lower_residual,
        });
    }

    let mut best = (upper, residual(upper).abs());
    for iteration in 0..RADIUS_SOLVE_MAX_ITERATIONS {
        let mid = 0.5 * (lower + upper);
        if mid <= lower || mid >= upper {
            break;
        }
        let value = residual(mid);
        if value.abs() < best.1 {
            best = (mid, value.abs());
        }
        if value.abs() <= 0.1 * RADIUS_SOLVE_TOLERANCE {
            return Ok(mid);
        }
        if value < 0.0 {
            lower = mid;
        } else {
            upper = mid;
        }
        if iteration + 1 == RADIUS_SOLVE_MAX_ITERATIONS {
            break;
        }
    }
    if best.1 < RADIUS_SOLVE_TOLERANCE {
        Ok(best.0)
    } else {
        Err(GeometryError::NoConvergence {
            iterations: RADIUS_SOLVE_MAX_ITERATIONS,
            lower,
            upper,
            residual: best.1,
        })
    }
}

/// Builds the ring inclinations for a configuration.
///
/// Rings are generated until the next one would meet the plane of object
/// centres beyond `max_ground_distance`, or would reach the horizon.
pub fn build_phi_series(config: &MeshGeometryConfig) -> Result<PhiSeries, GeometryError> {
    config.validate()?;
    let h = config.height;
    let k = config.density;
    let step: Box<dyn Fn(f64) -> Result<f64, GeometryError>>;
    let effective_radius = match config.shape.kind {
        ShapeKind::Circle => {
            let r = config.shape.radius / k.value();
            step = Box::new(move |phi| phi_next_circle(phi, h, 2.0 * r));
            r
        }
        ShapeKind::Sphere => {
            let r = solve_subdivided_radius(h, config.shape.radius, k.p(), k.q())?;
            step = Box::new(move |phi| phi_next_sphere(phi, h, r));
            r
        }
    };

    let plane = config.centre_plane_height();
    let mut angles = vec![0.0];
    let mut phi = 0.0;
    loop {
        let next = match step(phi) {
            Ok(next) => next,
            Err(GeometryError::HorizonReached { .. }) => break,
            Err(e) => return Err(e),
        };
        if plane * next.tan() > config.max_ground_distance {
            break;
        }
        angles.push(next);
        phi = next;
    }
    Ok(PhiSeries { coverage: plane * phi.tan(), angles, effective_radius })
}

/// Azimuthal spacing of ring `phi`, including the density subdivision.
///
/// Circles divide the object's azimuthal extent by `k`; spheres use the
/// extent of the smaller solved sphere.
pub fn ring_delta_theta(config: &MeshGeometryConfig, series: &PhiSeries, phi: f64) -> f64 {
    match config.shape.kind {
        ShapeKind::Circle => delta_theta(phi, config.height, config.shape.radius) / config.density.value(),
        ShapeKind::Sphere => delta_theta(phi, config.height, series.effective_radius),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn circle_step_examples() {
        close(phi_next_circle(0.0, 1.0, 1.0).unwrap(), PI / 4.0, 1e-15);
        close(phi_next_circle(PI / 4.0, 1.0, 1.0).unwrap(), 1.107_148_717_794_090_5, 1e-14);
        close(phi_next_circle(0.0, 2.0, 0.2).unwrap(), 0.099_668_652_491_162_03, 1e-15);
    }

    #[test]
    fn circle_rejects_horizon() {
        assert!(matches!(
            phi_next_circle(FRAC_PI_2, 1.0, 1.0),
            Err(GeometryError::InclinationOutOfRange { .. })
        ));
        assert!(phi_next_circle(-0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn sphere_step_examples() {
        // h = 2r puts the far tangent exactly on the horizon.
        assert!(matches!(phi_next_sphere(0.0, 1.0, 0.5), Err(GeometryError::HorizonReached { .. })));
        close(phi_next_sphere(0.0, 2.0, 0.5).unwrap(), 0.643_501_108_793_284_4, 1e-15);
        close(phi_next_sphere(0.2, 2.0, 0.5).unwrap(), 0.794_632_664_198_204_3, 1e-14);
    }

    #[test]
    fn sphere_rejects_tall_objects() {
        assert!(matches!(phi_next_sphere(0.0, 0.5, 0.5), Err(GeometryError::ObjectTooTall { .. })));
        assert!(matches!(phi_next_sphere(0.0, 0.4, 0.5), Err(GeometryError::ObjectTooTall { .. })));
    }

    #[test]
    fn delta_theta_examples() {
        let r = 0.25;
        let h = 1.5;
        let at_distance = |d: f64| (d / h).atan();
        close(delta_theta(at_distance(2.0 * r), h, r), PI / 3.0, 1e-14);
        close(delta_theta(at_distance(r), h, r), PI, 1e-6);
        close(delta_theta(PI / 4.0, 1.0, 0.1), 0.200_334_842_323_119_6, 1e-14);
    }

    #[test]
    fn delta_theta_clamps() {
        assert_eq!(delta_theta(0.0, 1.0, 0.1), PI);
        assert_eq!(delta_theta(1e-9, 1.0, 0.1), PI);
        assert_eq!(delta_theta(FRAC_PI_2, 1.0, 0.1), 0.0);
        assert_eq!(delta_theta(3.0, 1.0, 0.1), 0.0);
    }

    #[test]
    fn subdivided_radius_identity() {
        assert_eq!(solve_subdivided_radius(1.3, 0.2, 1, 1).unwrap(), 0.2);
    }

    #[test]
    fn subdivided_radius_matches_bisection_oracle() {
        // Frozen from a 40-digit bisection of f^p(0, r1) = f(0, r0).
        let r2 = solve_subdivided_radius(1.0, 0.1, 2, 1).unwrap();
        let r4 = solve_subdivided_radius(1.0, 0.1, 4, 1).unwrap();
        close(r2, 0.052_786_404_500_042_06, 1e-12);
        close(r4, 0.027_129_195_498_412_093, 1e-12);
        assert!(r4 < r2);
    }

    #[test]
    fn subdivided_radius_rejects_bad_density() {
        assert!(solve_subdivided_radius(1.0, 0.1, 1, 2).is_err());
        assert!(solve_subdivided_radius(1.0, 0.1, 2, 0).is_err());
        assert!(matches!(
            solve_subdivided_radius(0.1, 0.1, 2, 1),
            Err(GeometryError::ObjectTooTall { .. })
        ));
    }

    #[test]
    fn circle_series_example() {
        let config = MeshGeometryConfig::new(1.0, TargetShape::circle(0.5), Density::integer(1).unwrap(), 3.0).unwrap();
        let series = build_phi_series(&config).unwrap();
        let expected = [0.0, 1f64.atan(), 2f64.atan(), 3f64.atan()];
        assert_eq!(series.len(), expected.len());
        for (a, b) in series.angles.iter().zip(expected) {
            close(*a, b, 1e-15);
        }
        close(series.coverage, 3.0, 1e-12);
    }

    #[test]
    fn circle_series_halves_spacing() {
        let config = MeshGeometryConfig::new(1.0, TargetShape::circle(0.5), Density::integer(2).unwrap(), 3.0).unwrap();
        let series = build_phi_series(&config).unwrap();
        assert_eq!(series.len(), 7);
        for (n, phi) in series.angles.iter().enumerate() {
            close(phi.tan(), n as f64 * 0.5, 1e-13);
        }
    }

    #[test]
    fn sphere_just_below_camera_has_single_ring() {
        let config = MeshGeometryConfig::new(0.5 + 1e-9, TargetShape::sphere(0.5), Density::integer(1).unwrap(), 100.0).unwrap();
        let series = build_phi_series(&config).unwrap();
        assert_eq!(series.angles, vec![0.0]);
    }

    #[test]
    fn density_reduces_and_validates() {
        let d = Density::new(6, 4).unwrap();
        assert_eq!((d.p(), d.q()), (3, 2));
        assert!(Density::new(1, 2).is_err());
        assert!(Density::new(0, 0).is_err());
        assert!(serde_json::from_str::<Density>(r#"{"p":1,"q":3}"#).is_err());
    }

    #[test]
    fn config_rejects_sphere_at_camera_height() {
        let err = MeshGeometryConfig::new(0.2, TargetShape::sphere(0.2), Density::default(), 5.0).unwrap_err();
        assert!(err.to_string().contains("greater than or equal to the height of the camera"));
    }
}
