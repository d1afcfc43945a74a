use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use image::{DynamicImage, ImageFormat, RgbImage};
use visual_mesh::engine::io::load_network;
use visual_mesh::engine::{self, NetworkSpec};
use visual_mesh::geometry::MeshGeometryConfig;
use visual_mesh::mesh::io::{read_mesh, write_mesh};
use visual_mesh::mesh::{lookup_onscreen, reusable, ImageView, LensModel, VisualMesh};
use visual_mesh::oracle::{density_sweep_at, format_significant};
use visual_mesh::pipeline;

use crate::config::RunConfig;
use crate::draw;
use crate::{Failure, Outcome, ResultExt};

/// Relative camera-height change a cached mesh tolerates.
pub const CACHE_HEIGHT_TOLERANCE: f64 = 0.02;

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn cached_mesh(path: &Path, wanted: &MeshGeometryConfig) -> Option<VisualMesh> {
    let text = std::fs::read_to_string(sidecar(path)).ok()?;
    let cached: MeshGeometryConfig = serde_json::from_str(&text).ok()?;
    if !reusable(&cached, wanted, CACHE_HEIGHT_TOLERANCE) {
        return None;
    }
    let file = File::open(path).ok()?;
    read_mesh(BufReader::new(file), cached).ok()
}

fn store_mesh(path: &Path, mesh: &VisualMesh) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_mesh(BufWriter::new(File::create(path)?), mesh)?;
    std::fs::write(sidecar(path), serde_json::to_string_pretty(&mesh.config)?)?;
    Ok(())
}

/// The mesh for this run, read from the cache file when one is configured and fits.
fn load_mesh(config: &RunConfig, cache: Option<&Path>) -> Result<(VisualMesh, bool), Failure> {
    let geometry = config.geometry().config_err()?;
    if let Some(mesh) = cache.and_then(|p| cached_mesh(p, &geometry)) {
        return Ok((mesh, true));
    }
    let mesh = VisualMesh::generate(&geometry).config_err()?;
    if let Some(path) = cache {
        store_mesh(path, &mesh).with_context(|| format!("writing {}", path.display())).runtime_err()?;
    }
    Ok((mesh, false))
}

fn required<'a>(path: &'a Option<PathBuf>, name: &str, command: &str) -> Result<&'a Path, Failure> {
    path.as_deref().ok_or_else(|| Failure::Config(anyhow!("{command} needs paths.{name} (--paths.{name})")))
}

fn describe(mesh: &VisualMesh) -> String {
    let c = &mesh.config;
    let k = match c.density.q() {
        1 => c.density.p().to_string(),
        q => format!("{}/{q}", c.density.p()),
    };
    format!(
        "{} nodes in {} rings (h = {} m, {:?} r = {} m, k = {k}, max {} m)",
        mesh.len(),
        mesh.ring_count(),
        c.height,
        c.shape.kind,
        c.shape.radius,
        c.max_ground_distance
    )
}

pub fn generate(config: &RunConfig) -> Outcome {
    let path = config.paths.mesh_cache.clone().or_else(|| config.paths.output.clone());
    let path = required(&path, "mesh_cache", "generate")?;
    let (mesh, hit) = load_mesh(config, Some(path))?;
    let status = if hit { "cache hit" } else { "built" };
    println!("{status}: {} -> {}", describe(&mesh), path.display());
    Ok(())
}

fn read_image(path: &Path, lens: &LensModel) -> Result<DynamicImage, Failure> {
    let img = image::open(path).with_context(|| format!("reading {}", path.display())).runtime_err()?;
    let [w, h] = lens.resolution;
    if (img.width(), img.height()) != (w, h) {
        return Err(Failure::Runtime(anyhow!(
            "{} is {}×{} but the lens resolution is {w}×{h}",
            path.display(),
            img.width(),
            img.height()
        )));
    }
    Ok(img)
}

fn write_png(img: &RgbImage, path: &Path) -> Outcome {
    img.save_with_format(path, ImageFormat::Png).with_context(|| format!("writing {}", path.display())).runtime_err()
}

pub fn project(config: &RunConfig) -> Outcome {
    let output = required(&config.paths.output, "output", "project")?;
    let lens = config.lens().config_err()?;
    let pose = config.pose().config_err()?;
    let (mesh, _) = load_mesh(config, config.paths.mesh_cache.as_deref())?;
    let mut canvas = match &config.paths.image {
        Some(path) => read_image(path, &lens)?.to_rgb8(),
        None => RgbImage::new(lens.resolution[0], lens.resolution[1]),
    };
    let onscreen = lookup_onscreen(&mesh, &pose, &lens);
    if onscreen.is_empty() {
        eprintln!("warning: no mesh nodes are visible with this pose and lens");
    }
    draw::mesh(&mut canvas, &onscreen);
    write_png(&canvas, output)?;
    println!("{} of {} nodes visible -> {}", onscreen.len(), mesh.len(), output.display());
    Ok(())
}

pub fn density(config: &RunConfig, distances: Option<Vec<f64>>, azimuth: Option<f64>) -> Outcome {
    let geometry = config.geometry().config_err()?;
    let lens = config.lens().config_err()?;
    let pose = config.pose().config_err()?;
    let distances = distances.unwrap_or_else(|| {
        let steps = (geometry.max_ground_distance / 0.5).floor() as usize;
        (0..=steps).map(|i| 0.5 * i as f64).collect()
    });
    let azimuth = azimuth.unwrap_or_else(|| pose.heading());
    let report = density_sweep_at(&geometry, &pose, &lens, &distances, azimuth).config_err()?;
    emit(&report.to_csv(), config.paths.output.as_deref())
}

fn emit(text: &str, path: Option<&Path>) -> Outcome {
    match path {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())).runtime_err(),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn network_for(config: &RunConfig, random: Option<u64>, depth: usize, input_width: usize) -> Result<NetworkSpec, Failure> {
    match (&config.paths.network, random) {
        (Some(path), _) => load_network(path).with_context(|| format!("reading {}", path.display())).runtime_err(),
        (None, Some(seed)) => {
            if depth == 0 {
                return Err(Failure::Config(anyhow!("depth must be at least 1")));
            }
            let widths = NetworkSpec::widths(input_width, 4, depth, 2);
            Ok(NetworkSpec::random(&widths, engine::Activation::Selu, seed))
        }
        (None, None) => Err(Failure::Config(anyhow!("needs paths.network (--paths.network) or --random-network SEED"))),
    }
}

/// Pixels in the layout the network reads: one, three or four channels.
fn pixels_for(img: &DynamicImage, channels: usize) -> Result<Vec<u8>, Failure> {
    match channels {
        1 => Ok(img.to_luma8().into_raw()),
        3 => Ok(img.to_rgb8().into_raw()),
        4 => Ok(img.to_rgba8().into_raw()),
        n => Err(Failure::Runtime(anyhow!("network takes {n} input features; images supply 1, 3 or 4 channels"))),
    }
}

pub fn classify(config: &RunConfig, random: Option<u64>) -> Outcome {
    let image_path = required(&config.paths.image, "image", "classify")?;
    let output = required(&config.paths.output, "output", "classify")?;
    let lens = config.lens().config_err()?;
    let pose = config.pose().config_err()?;
    let network = network_for(config, random, 9, 3)?;
    let (mesh, _) = load_mesh(config, config.paths.mesh_cache.as_deref())?;
    let img = read_image(image_path, &lens)?;
    let channels = network.input_width();
    let pixels = pixels_for(&img, channels)?;
    let view = ImageView::new(img.width() as usize, img.height() as usize, channels, &pixels);
    let frame = pipeline::run_frame(&mesh, &pose, &lens, &view, &network).runtime_err()?;

    let mut csv = String::from("node,x,y");
    for c in 0..network.output_classes {
        let _ = write!(csv, ",p{c}");
    }
    csv.push('\n');
    let mut overlay = img.to_rgb8();
    for (i, probs) in frame.probabilities.rows().enumerate() {
        let [x, y] = frame.onscreen.pixel_coords[i];
        let _ = write!(csv, "{},{},{}", frame.onscreen.origin_indices[i], format_significant(x, 6), format_significant(y, 6));
        for p in probs {
            let _ = write!(csv, ",{}", format_significant(*p, 6));
        }
        csv.push('\n');
        if let Some(colour) = draw::confidence_colour(probs[0]) {
            draw::dot(&mut overlay, [x, y], colour);
        }
    }
    let csv_path = output.with_extension("csv");
    let png_path = output.with_extension("png");
    emit(&csv, Some(&csv_path))?;
    write_png(&overlay, &png_path)?;
    let detections = frame.probabilities.rows().filter(|p| p[0] > 0.5).count();
    println!(
        "{} nodes classified, {detections} above 0.5 -> {}, {}",
        frame.onscreen.len(),
        csv_path.display(),
        png_path.display()
    );
    Ok(())
}

/// Deterministic stand-in frame when no image is given.
fn synthetic_image(lens: &LensModel, channels: usize) -> Vec<u8> {
    let [w, h] = lens.resolution;
    let mut data = Vec::with_capacity(w as usize * h as usize * channels);
    for y in 0..h as usize {
        for x in 0..w as usize {
            for c in 0..channels {
                data.push(((x * 7 + y * 13 + c * 101) % 256) as u8);
            }
        }
    }
    data
}

pub struct BenchOptions {
    pub iterations: usize,
    pub random: Option<u64>,
    pub depth: usize,
    pub json: bool,
}

pub fn bench(config: &RunConfig, options: &BenchOptions) -> Outcome {
    if options.iterations == 0 {
        return Err(Failure::Config(anyhow!("iterations must be at least 1")));
    }
    let lens = config.lens().config_err()?;
    let pose = config.pose().config_err()?;
    let network = network_for(config, options.random.or(Some(0)), options.depth, 3)?;
    let (mesh, _) = load_mesh(config, config.paths.mesh_cache.as_deref())?;
    let channels = network.input_width();
    let (pixels, w, h) = match &config.paths.image {
        Some(path) => {
            let img = read_image(path, &lens)?;
            (pixels_for(&img, channels)?, img.width() as usize, img.height() as usize)
        }
        None => (synthetic_image(&lens, channels), lens.resolution[0] as usize, lens.resolution[1] as usize),
    };
    let view = ImageView::new(w, h, channels, &pixels);
    let report = pipeline::bench(&mesh, &pose, &lens, &view, &network, options.iterations).runtime_err()?;

    let text = if options.json {
        serde_json::to_string_pretty(&report).runtime_err()? + "\n"
    } else {
        let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
        let mut out = format!(
            "{} visible of {} nodes, {} layers, {} iteration{}\n",
            report.visible_nodes,
            mesh.len(),
            report.layers,
            report.iterations,
            if report.iterations == 1 { "" } else { "s" }
        );
        if report.iterations == 1 {
            let _ = writeln!(out, "frame  {:.3} ms", ms(report.frames[0]));
        } else {
            let _ = writeln!(out, "mean   {:.3} ms", ms(report.mean()));
            let _ = writeln!(out, "median {:.3} ms", ms(report.median()));
            let _ = writeln!(out, "p99    {:.3} ms", ms(report.p99()));
        }
        let _ = writeln!(out, "{:.1} ns per node", report.ns_per_node());
        out
    };
    emit(&text, config.paths.output.as_deref())
}
