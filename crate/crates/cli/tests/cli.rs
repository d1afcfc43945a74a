use std::path::Path;
use std::process::{Command, Output};

use image::{Rgb, RgbImage};
use visual_mesh::engine::io::save_network;
use visual_mesh::engine::{Activation, NetworkSpec};
use visual_mesh::geometry::{Density, MeshGeometryConfig, TargetShape};
use visual_mesh::mesh::{CameraPose, ImageView, LensModel, Projection, VisualMesh};
use visual_mesh::pipeline::run_frame;

/// A small camera so every run stays quick.
const SMALL: [&str; 10] = [
    "--lens.resolution",
    "320,256",
    "--lens.center",
    "159.5,127.5",
    "--lens.focal_length",
    "100",
    "--geometry.k",
    "2",
    "--geometry.max_distance",
    "6",
];

fn vmesh(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vmesh")).current_dir(dir).args(args).output().unwrap()
}

fn small(dir: &Path, args: &[&str]) -> Output {
    let all: Vec<&str> = args.iter().chain(SMALL.iter()).copied().collect();
    vmesh(dir, &all)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn scene_image(path: &Path) {
    // Grass with a white disc near the middle.
    let img = RgbImage::from_fn(320, 256, |x, y| {
        let (dx, dy) = (x as f64 - 160.0, y as f64 - 170.0);
        if dx * dx + dy * dy < 400.0 {
            Rgb([250, 250, 250])
        } else {
            Rgb([30, 140, 40])
        }
    });
    img.save(path).unwrap();
}

fn probabilities(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(1).map(|l| l.split(',').skip(3).map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn generate_builds_then_hits_cache() {
    let dir = tempfile::tempdir().unwrap();
    let first = small(dir.path(), &["generate", "--paths.mesh_cache", "mesh.vmsh"]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).starts_with("built: "), "{}", stdout(&first));
    assert!(dir.path().join("mesh.vmsh.json").exists());

    let again = small(dir.path(), &["generate", "--paths.mesh_cache", "mesh.vmsh"]);
    assert!(stdout(&again).starts_with("cache hit: "), "{}", stdout(&again));
    // Within 2% of the cached height the mesh is reused; beyond it, rebuilt.
    let near = small(dir.path(), &["generate", "--paths.mesh_cache", "mesh.vmsh", "--geometry.height", "1.115"]);
    assert!(stdout(&near).starts_with("cache hit: "));
    let far = small(dir.path(), &["generate", "--paths.mesh_cache", "mesh.vmsh", "--geometry.height", "1.3"]);
    assert!(stdout(&far).starts_with("built: "));
}

#[test]
fn camera_below_object_top_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = vmesh(dir.path(), &["generate", "--paths.mesh_cache", "m.vmsh", "--geometry.height", "0.095"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("greater than or equal to the height of the camera"), "{}", stderr(&out));
}

#[test]
fn bad_flags_and_missing_paths_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(vmesh(dir.path(), &["density", "--lens.fov", "4"]).status.code(), Some(2));
    assert_eq!(vmesh(dir.path(), &["project"]).status.code(), Some(2));
    assert_eq!(vmesh(dir.path(), &["nonsense"]).status.code(), Some(2));
    assert_eq!(vmesh(dir.path(), &["density", "--config", "missing.json"]).status.code(), Some(2));
}

#[test]
fn project_writes_overlay_of_lens_size() {
    let dir = tempfile::tempdir().unwrap();
    scene_image(&dir.path().join("frame.png"));
    let out = small(dir.path(), &["project", "--paths.image", "frame.png", "--paths.output", "overlay.png"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let overlay = image::open(dir.path().join("overlay.png")).unwrap();
    assert_eq!((overlay.width(), overlay.height()), (320, 256));

    // Looking up at the sky: nothing visible, still a blank overlay.
    let out = small(dir.path(), &["project", "--paths.output", "sky.png", "--pose.pitch", "3.1"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("warning"));
    assert!(image::open(dir.path().join("sky.png")).unwrap().to_rgb8().pixels().all(|p| p.0 == [0, 0, 0]));
}

#[test]
fn image_size_mismatch_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    RgbImage::new(100, 100).save(dir.path().join("tiny.png")).unwrap();
    let out = small(dir.path(), &["project", "--paths.image", "tiny.png", "--paths.output", "o.png"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("lens resolution"));
}

#[test]
fn density_csv_peaks_below_camera() {
    let dir = tempfile::tempdir().unwrap();
    let out = vmesh(dir.path(), &["density", "--distances", "0,1,2,4,8"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("distance_m,mesh_points,ring_intersections,hex_points"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[1..].iter().all(|r| r[1] < rows[0][1]));
    assert!(rows[4][3] * 4.0 <= rows[2][3]);

    let single = vmesh(dir.path(), &["density", "--distances", "3"]);
    assert_eq!(stdout(&single).lines().count(), 2);
    let unordered = vmesh(dir.path(), &["density", "--distances", "3,1"]);
    assert_eq!(unordered.status.code(), Some(2));
}

#[test]
fn zero_network_gives_even_odds() {
    let dir = tempfile::tempdir().unwrap();
    scene_image(&dir.path().join("frame.png"));
    save_network(&NetworkSpec::zeros(&NetworkSpec::widths(3, 4, 9, 2), Activation::Selu), dir.path().join("zero.vmnw"))
        .unwrap();
    let out = small(
        dir.path(),
        &["classify", "--paths.image", "frame.png", "--paths.network", "zero.vmnw", "--paths.output", "result"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("result.csv")).unwrap();
    assert!(csv.starts_with("node,x,y,p0,p1\n"));
    let probs = probabilities(&csv);
    assert!(!probs.is_empty());
    assert!(probs.iter().flatten().all(|&p| p == 0.5));
    let overlay = image::open(dir.path().join("result.png")).unwrap();
    assert_eq!((overlay.width(), overlay.height()), (320, 256));
}

#[test]
fn classify_matches_library_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    scene_image(&dir.path().join("frame.png"));
    let network = NetworkSpec::random(&NetworkSpec::widths(3, 4, 5, 2), Activation::Selu, 42);
    save_network(&network, dir.path().join("net.vmnw")).unwrap();
    let args = ["classify", "--paths.image", "frame.png", "--paths.network", "net.vmnw", "--paths.output", "a"];
    assert!(small(dir.path(), &args).status.success());
    let first = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert!(small(dir.path(), &args).status.success());
    assert_eq!(std::fs::read_to_string(dir.path().join("a.csv")).unwrap(), first);

    let config =
        MeshGeometryConfig::new(1.1, TargetShape::sphere(0.095), Density::integer(2).unwrap(), 6.0).unwrap();
    let mesh = VisualMesh::generate(&config).unwrap();
    let lens = LensModel {
        projection: Projection::Equisolid,
        focal_length: 100.0,
        center: [159.5, 127.5],
        resolution: [320, 256],
        fov: std::f64::consts::FRAC_PI_2,
    };
    let pixels = image::open(dir.path().join("frame.png")).unwrap().to_rgb8().into_raw();
    let view = ImageView::new(320, 256, 3, &pixels);
    let frame = run_frame(&mesh, &CameraPose::from_euler(1.1, 0.0, 0.5, 0.0), &lens, &view, &network).unwrap();
    let probs = probabilities(&first);
    assert_eq!(probs.len(), frame.probabilities.len());
    for (ours, theirs) in probs.iter().zip(frame.probabilities.rows()) {
        for (a, b) in ours.iter().zip(theirs) {
            assert!((a - b).abs() <= 5e-6 * b.abs(), "{a} vs {b}");
        }
        assert!((ours.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    }
}

#[test]
fn network_width_mismatch_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    scene_image(&dir.path().join("frame.png"));
    save_network(&NetworkSpec::random(&[2, 4, 2], Activation::Relu, 1), dir.path().join("two.vmnw")).unwrap();
    let out = small(
        dir.path(),
        &["classify", "--paths.image", "frame.png", "--paths.network", "two.vmnw", "--paths.output", "r"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("input features"), "{}", stderr(&out));
}

#[test]
fn bench_reports() {
    let dir = tempfile::tempdir().unwrap();
    let once = small(dir.path(), &["bench", "--iterations", "1"]);
    assert!(once.status.success(), "{}", stderr(&once));
    let text = stdout(&once);
    assert!(text.contains("frame ") && !text.contains("median"), "{text}");

    let json = small(dir.path(), &["bench", "--iterations", "3", "--depth", "5", "--json"]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(report["frames"].as_array().unwrap().len(), 3);
    assert_eq!(report["layers"], 5);
    assert!(report["visible_nodes"].as_u64().unwrap() > 0);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{
            "geometry": {"height": 2.0, "shape": "circle", "radius": 0.3, "k": "3/2", "max_distance": 4},
            "lens": {"projection": "rectilinear", "focal_length": 200, "center": [159.5, 127.5], "resolution": [320, 256], "fov": 1.2},
            "pose": {"pitch": 0.0},
            "paths": {"mesh_cache": "circle.vmsh"}
        }"#,
    )
    .unwrap();
    let out = vmesh(dir.path(), &["generate", "--config", "run.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("Circle r = 0.3 m, k = 3/2, max 4 m"), "{}", stdout(&out));
    let out = vmesh(dir.path(), &["generate", "--config", "run.json", "--geometry.k", "3"]);
    assert!(stdout(&out).contains("built: ") && stdout(&out).contains("k = 3,"), "{}", stdout(&out));
}
