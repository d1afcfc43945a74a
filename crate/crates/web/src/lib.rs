//! Browser bindings for the demo page in `www/`.
//!
//! Three operations: draw the mesh for a camera, sweep a ball away from the
//! camera and count samples on it, and drop a ball where the user clicks.
//! Parameters arrive as one JSON object; see [`Params`].

use std::cell::RefCell;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use visual_mesh::geometry::{Density, MeshGeometryConfig, ShapeKind, TargetShape};
use visual_mesh::mesh::{lookup_onscreen, unproject_pixel, CameraPose, LensModel, Projection, VisualMesh};
use visual_mesh::oracle::{density_sweep_at, nodes_in_object, PlacedObject, Scene};
use wasm_bindgen::prelude::*;

/// Everything the page can change. Missing fields take the reference scene's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    pub height: f64,
    pub shape: ShapeKind,
    pub radius: f64,
    pub k: u32,
    pub max_distance: f64,
    pub projection: Projection,
    pub focal_length: f64,
    pub width: u32,
    pub image_height: u32,
    pub fov: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Default for Params {
    fn default() -> Self {
        let s = Scene::soccer();
        Params {
            height: s.config.height,
            shape: s.config.shape.kind,
            radius: s.config.shape.radius,
            k: s.config.density.p(),
            max_distance: s.config.max_ground_distance,
            projection: s.lens.projection,
            focal_length: s.lens.focal_length,
            width: s.lens.resolution[0],
            image_height: s.lens.resolution[1],
            fov: s.lens.fov,
            roll: 0.0,
            pitch: 0.5,
            yaw: 0.0,
        }
    }
}

struct Setup {
    mesh: Rc<VisualMesh>,
    pose: CameraPose,
    lens: LensModel,
}

thread_local! {
    // Sliders that only move the camera should not rebuild the mesh.
    static LAST_MESH: RefCell<Option<Rc<VisualMesh>>> = const { RefCell::new(None) };
}

impl Params {
    pub fn parse(json: &str) -> Result<Self, String> {
        serde_json::from_str(json).map_err(|e| format!("bad parameters: {e}"))
    }

    fn geometry(&self) -> Result<MeshGeometryConfig, String> {
        let density = Density::integer(self.k).map_err(|e| e.to_string())?;
        let shape = TargetShape { kind: self.shape, radius: self.radius };
        MeshGeometryConfig::new(self.height, shape, density, self.max_distance).map_err(|e| e.to_string())
    }

    fn lens(&self) -> Result<LensModel, String> {
        let lens = LensModel {
            projection: self.projection,
            focal_length: self.focal_length,
            center: [(f64::from(self.width) - 1.0) / 2.0, (f64::from(self.image_height) - 1.0) / 2.0],
            resolution: [self.width, self.image_height],
            fov: self.fov,
        };
        lens.validate().map_err(|e| e.to_string())?;
        Ok(lens)
    }

    fn setup(&self) -> Result<Setup, String> {
        let geometry = self.geometry()?;
        let mesh = LAST_MESH.with(|slot| -> Result<Rc<VisualMesh>, String> {
            let mut slot = slot.borrow_mut();
            match slot.as_ref() {
                Some(mesh) if mesh.config == geometry => Ok(mesh.clone()),
                _ => {
                    let mesh = Rc::new(VisualMesh::generate(&geometry).map_err(|e| e.to_string())?);
                    *slot = Some(mesh.clone());
                    Ok(mesh)
                }
            }
        })?;
        Ok(Setup { mesh, pose: CameraPose::from_euler(self.height, self.roll, self.pitch, self.yaw), lens: self.lens()? })
    }
}

/// Visible nodes as pixel pairs and edges as index pairs into them.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Overlay {
    points: Vec<f32>,
    edges: Vec<u32>,
    total: usize,
    rings: usize,
}

#[wasm_bindgen]
impl Overlay {
    /// `[x0, y0, x1, y1, ...]`.
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f32> {
        self.points.clone()
    }

    /// `[a0, b0, a1, b1, ...]`, each edge once.
    #[wasm_bindgen(getter)]
    pub fn edges(&self) -> Vec<u32> {
        self.edges.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn visible(&self) -> usize {
        self.points.len() / 2
    }

    #[wasm_bindgen(getter)]
    pub fn total(&self) -> usize {
        self.total
    }

    #[wasm_bindgen(getter)]
    pub fn rings(&self) -> usize {
        self.rings
    }
}

pub fn overlay(params: &Params) -> Result<Overlay, String> {
    let Setup { mesh, pose, lens } = params.setup()?;
    let onscreen = lookup_onscreen(&mesh, &pose, &lens);
    let points = onscreen.pixel_coords.iter().flat_map(|p| [p[0] as f32, p[1] as f32]).collect();
    let sentinel = onscreen.sentinel();
    let mut edges = Vec::new();
    for (i, neighbors) in onscreen.neighbors.iter().enumerate() {
        for &n in neighbors {
            if n != sentinel && n > i {
                edges.extend([i as u32, n as u32]);
            }
        }
    }
    Ok(Overlay { points, edges, total: mesh.len(), rings: mesh.ring_count() })
}

#[derive(Debug, Clone, Serialize)]
pub struct Curve {
    pub distances: Vec<f64>,
    pub mesh: Vec<usize>,
    pub rings: Vec<usize>,
    pub hex: Vec<usize>,
    pub visible: usize,
}

/// Samples on a ball moved from under the camera out to `max` metres along the heading.
pub fn density(params: &Params, max: f64, step: f64) -> Result<Curve, String> {
    if !(step > 0.0 && max >= 0.0) {
        return Err(format!("need step > 0 and max ≥ 0, got {step} and {max}"));
    }
    let Setup { mesh, pose, lens } = params.setup()?;
    let distances: Vec<f64> = (0..=(max / step).floor() as usize).map(|i| step * i as f64).collect();
    let report = density_sweep_at(&mesh.config, &pose, &lens, &distances, pose.heading()).map_err(|e| e.to_string())?;
    Ok(Curve {
        distances,
        mesh: report.rows.iter().map(|r| r.mesh_point_count).collect(),
        rings: report.rows.iter().map(|r| r.ring_intersection_count).collect(),
        hex: report.rows.iter().map(|r| r.hex_point_count).collect(),
        visible: report.visible_nodes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Drop {
    /// Ball centre on the plane, metres.
    pub ground: [f64; 2],
    pub distance: f64,
    /// Pixel positions of mesh nodes on the ball, `[x0, y0, ...]`.
    pub nodes: Vec<f64>,
}

/// Places the ball where the ray through pixel `(x, y)` meets the ground.
pub fn drop_ball(params: &Params, x: f64, y: f64) -> Result<Option<Drop>, String> {
    let Setup { mesh, pose, lens } = params.setup()?;
    let Some(ray) = unproject_pixel([x, y], &pose, &lens) else {
        return Ok(None);
    };
    // The plane frame points z down, so the ground is ahead only for z > 0.
    if ray[2] <= 1e-9 {
        return Ok(None);
    }
    let depth = match params.shape {
        ShapeKind::Sphere => pose.height - params.radius,
        ShapeKind::Circle => pose.height,
    };
    let t = depth / ray[2];
    let ground = [t * ray[0], t * ray[1]];
    let object = PlacedObject { shape: params.shape, radius: params.radius, ground };
    let onscreen = lookup_onscreen(&mesh, &pose, &lens);
    let hits = nodes_in_object(&mesh, &pose, &lens, &object);
    let mut nodes = Vec::with_capacity(hits.len() * 2);
    for (i, &origin) in onscreen.origin_indices.iter().enumerate() {
        if hits.binary_search(&origin).is_ok() {
            nodes.extend(onscreen.pixel_coords[i]);
        }
    }
    Ok(Some(Drop { ground, distance: ground[0].hypot(ground[1]), nodes }))
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = meshOverlay)]
pub fn mesh_overlay_js(params: &str) -> Result<Overlay, JsError> {
    overlay(&Params::parse(params).map_err(js)?).map_err(js)
}

/// JSON: `{distances, mesh, rings, hex, visible}`.
#[wasm_bindgen(js_name = densityCurve)]
pub fn density_curve_js(params: &str, max: f64, step: f64) -> Result<String, JsError> {
    let curve = density(&Params::parse(params).map_err(js)?, max, step).map_err(js)?;
    Ok(serde_json::to_string(&curve)?)
}

/// JSON `{ground, distance, nodes}`, or `null` when the click misses the ground.
#[wasm_bindgen(js_name = dropBall)]
pub fn drop_ball_js(params: &str, x: f64, y: f64) -> Result<String, JsError> {
    let drop = drop_ball(&Params::parse(params).map_err(js)?, x, y).map_err(js)?;
    Ok(serde_json::to_string(&drop)?)
}

/// Defaults as JSON, so the page starts from the same scene as the CLI.
#[wasm_bindgen(js_name = defaultParams)]
pub fn default_params_js() -> String {
    serde_json::to_string(&Params::default()).unwrap_or_default()
}
