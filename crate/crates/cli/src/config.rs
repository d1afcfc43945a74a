//! Run configuration: one JSON document, every field overridable by a flag
//! named after its JSON path.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use visual_mesh::geometry::{Density, MeshGeometryConfig, ShapeKind, TargetShape};
use visual_mesh::mesh::{CameraPose, LensModel, Projection};
use visual_mesh::oracle::Scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub lens: LensSection,
    #[serde(default)]
    pub pose: PoseSection,
    #[serde(default)]
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    /// Camera height above the plane, metres.
    pub height: f64,
    pub shape: ShapeKind,
    pub radius: f64,
    /// Samples per object: an integer or "p/q".
    pub k: DensityValue,
    pub max_distance: f64,
}

/// `k` as written in config files and flags: `4`, `"4"` or `"3/2"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub struct DensityValue(pub Density);

impl FromStr for DensityValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("bad density {s:?}: {e}"));
        let (p, q) = match s.split_once('/') {
            Some((p, q)) => (parse(p)?, parse(q)?),
            None => (parse(s)?, 1),
        };
        Density::new(p, q).map(DensityValue).map_err(|e| e.to_string())
    }
}

impl fmt::Display for DensityValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0.q() {
            1 => write!(f, "{}", self.0.p()),
            q => write!(f, "{}/{q}", self.0.p()),
        }
    }
}

impl TryFrom<serde_json::Value> for DensityValue {
    type Error = String;

    fn try_from(v: serde_json::Value) -> Result<Self, Self::Error> {
        match v {
            serde_json::Value::Number(n) => n.to_string().parse(),
            serde_json::Value::String(s) => s.parse(),
            other => Err(format!("density must be a number or \"p/q\", got {other}")),
        }
    }
}

impl From<DensityValue> for serde_json::Value {
    fn from(d: DensityValue) -> Self {
        if d.0.q() == 1 {
            d.0.p().into()
        } else {
            d.to_string().into()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LensSection {
    pub projection: Projection,
    /// Pixels.
    pub focal_length: f64,
    pub center: [f64; 2],
    pub resolution: [u32; 2],
    /// Largest accepted angle from the optical axis, radians.
    pub fov: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSection {
    #[serde(default)]
    pub roll: f64,
    #[serde(default)]
    pub pitch: f64,
    #[serde(default)]
    pub yaw: f64,
    /// Defaults to the geometry height.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_cache: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

// Defaults reproduce the reference soccer scene.
impl Default for GeometrySection {
    fn default() -> Self {
        let c = Scene::soccer().config;
        GeometrySection {
            height: c.height,
            shape: c.shape.kind,
            radius: c.shape.radius,
            k: DensityValue(c.density),
            max_distance: c.max_ground_distance,
        }
    }
}

impl Default for LensSection {
    fn default() -> Self {
        let l = Scene::soccer().lens;
        LensSection {
            projection: l.projection,
            focal_length: l.focal_length,
            center: l.center,
            resolution: l.resolution,
            fov: l.fov,
        }
    }
}

impl Default for PoseSection {
    fn default() -> Self {
        PoseSection { roll: 0.0, pitch: 0.5, yaw: 0.0, height: None }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: GeometrySection::default(),
            lens: LensSection::default(),
            pose: PoseSection::default(),
            paths: PathsSection::default(),
        }
    }
}

/// Flags that override config fields. Names follow the JSON paths.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration; flags below override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long = "geometry.height", global = true, value_name = "M")]
    pub geometry_height: Option<f64>,
    #[arg(long = "geometry.shape", global = true, value_parser = parse_shape, value_name = "circle|sphere")]
    pub geometry_shape: Option<ShapeKind>,
    #[arg(long = "geometry.radius", global = true, value_name = "M")]
    pub geometry_radius: Option<f64>,
    #[arg(long = "geometry.k", global = true, value_name = "K|P/Q")]
    pub geometry_k: Option<DensityValue>,
    #[arg(long = "geometry.max_distance", global = true, value_name = "M")]
    pub geometry_max_distance: Option<f64>,

    #[arg(long = "lens.projection", global = true, value_parser = parse_projection, value_name = "rectilinear|equisolid")]
    pub lens_projection: Option<Projection>,
    #[arg(long = "lens.focal_length", global = true, value_name = "PX")]
    pub lens_focal_length: Option<f64>,
    #[arg(long = "lens.center", global = true, value_parser = parse_pair::<f64>, value_name = "X,Y")]
    pub lens_center: Option<[f64; 2]>,
    #[arg(long = "lens.resolution", global = true, value_parser = parse_pair::<u32>, value_name = "W,H")]
    pub lens_resolution: Option<[u32; 2]>,
    #[arg(long = "lens.fov", global = true, value_name = "RAD")]
    pub lens_fov: Option<f64>,

    #[arg(long = "pose.roll", global = true, value_name = "RAD", allow_hyphen_values = true)]
    pub pose_roll: Option<f64>,
    #[arg(long = "pose.pitch", global = true, value_name = "RAD", allow_hyphen_values = true)]
    pub pose_pitch: Option<f64>,
    #[arg(long = "pose.yaw", global = true, value_name = "RAD", allow_hyphen_values = true)]
    pub pose_yaw: Option<f64>,
    #[arg(long = "pose.height", global = true, value_name = "M")]
    pub pose_height: Option<f64>,

    #[arg(long = "paths.mesh_cache", global = true, value_name = "FILE")]
    pub paths_mesh_cache: Option<PathBuf>,
    #[arg(long = "paths.network", global = true, value_name = "FILE")]
    pub paths_network: Option<PathBuf>,
    #[arg(long = "paths.image", global = true, value_name = "FILE")]
    pub paths_image: Option<PathBuf>,
    #[arg(long = "paths.output", global = true, value_name = "FILE")]
    pub paths_output: Option<PathBuf>,
}

fn parse_shape(s: &str) -> Result<ShapeKind, String> {
    serde_json::from_value(s.into()).map_err(|_| format!("unknown shape {s:?}"))
}

fn parse_projection(s: &str) -> Result<Projection, String> {
    serde_json::from_value(s.into()).map_err(|_| format!("unknown projection {s:?}"))
}

fn parse_pair<T: FromStr>(s: &str) -> Result<[T; 2], String>
where
    T::Err: fmt::Display,
{
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated values, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<T>().map_err(|e| format!("{t:?}: {e}"));
    Ok([parse(a)?, parse(b)?])
}

fn set<T>(field: &mut T, value: &Option<T>)
where
    T: Clone,
{
    if let Some(v) = value {
        *field = v.clone();
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// The config file (or defaults) with flag overrides applied, validated.
    pub fn resolve(flags: &Overrides) -> Result<Self> {
        let mut config = match &flags.config {
            Some(path) => Self::load(path)?,
            None => RunConfig::default(),
        };
        config.apply(flags);
        config.geometry()?;
        config.lens()?;
        config.pose()?;
        Ok(config)
    }

    pub fn apply(&mut self, f: &Overrides) {
        let g = &mut self.geometry;
        set(&mut g.height, &f.geometry_height);
        set(&mut g.shape, &f.geometry_shape);
        set(&mut g.radius, &f.geometry_radius);
        set(&mut g.k, &f.geometry_k);
        set(&mut g.max_distance, &f.geometry_max_distance);
        let l = &mut self.lens;
        set(&mut l.projection, &f.lens_projection);
        set(&mut l.focal_length, &f.lens_focal_length);
        set(&mut l.center, &f.lens_center);
        set(&mut l.resolution, &f.lens_resolution);
        set(&mut l.fov, &f.lens_fov);
        let p = &mut self.pose;
        set(&mut p.roll, &f.pose_roll);
        set(&mut p.pitch, &f.pose_pitch);
        set(&mut p.yaw, &f.pose_yaw);
        if f.pose_height.is_some() {
            p.height = f.pose_height;
        }
        let paths = &mut self.paths;
        for (field, value) in [
            (&mut paths.mesh_cache, &f.paths_mesh_cache),
            (&mut paths.network, &f.paths_network),
            (&mut paths.image, &f.paths_image),
            (&mut paths.output, &f.paths_output),
        ] {
            if value.is_some() {
                *field = value.clone();
            }
        }
    }

    pub fn geometry(&self) -> Result<MeshGeometryConfig> {
        let g = &self.geometry;
        let shape = TargetShape { kind: g.shape, radius: g.radius };
        Ok(MeshGeometryConfig::new(g.height, shape, g.k.0, g.max_distance)?)
    }

    pub fn lens(&self) -> Result<LensModel> {
        let l = &self.lens;
        let lens = LensModel {
            projection: l.projection,
            focal_length: l.focal_length,
            center: l.center,
            resolution: l.resolution,
            fov: l.fov,
        };
        lens.validate()?;
        Ok(lens)
    }

    pub fn pose(&self) -> Result<CameraPose> {
        let p = &self.pose;
        let height = p.height.unwrap_or(self.geometry.height);
        if !(height.is_finite() && height > 0.0) {
            bail!("pose height must be positive, got {height}");
        }
        if ![p.roll, p.pitch, p.yaw].iter().all(|a| a.is_finite()) {
            bail!("pose angles must be finite");
        }
        Ok(CameraPose::from_euler(height, p.roll, p.pitch, p.yaw))
    }
}
