//! One frame end to end: projection, sampling and inference.

use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::engine::{self, EngineError, NetworkSpec, Probabilities};
use crate::mesh::{self, CameraPose, ImageView, LensModel, MeshError, OnScreenMesh, VisualMesh};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub onscreen: OnScreenMesh,
    pub probabilities: Probabilities,
}

/// Projects the mesh, samples the image at visible nodes and classifies them.
pub fn run_frame(
    mesh: &VisualMesh,
    pose: &CameraPose,
    lens: &LensModel,
    image: &ImageView<'_>,
    network: &NetworkSpec,
) -> Result<FrameOutput, PipelineError> {
    let onscreen = mesh::lookup_onscreen(mesh, pose, lens);
    let features = mesh::sample_image(image, &onscreen)?;
    let probabilities = engine::forward(network, &onscreen, &features)?;
    Ok(FrameOutput { onscreen, probabilities })
}

/// Per-frame timings of [`run_frame`].
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub iterations: usize,
    pub visible_nodes: usize,
    pub layers: usize,
    #[serde(serialize_with = "durations_ns")]
    pub frames: Vec<Duration>,
}

fn durations_ns<S: serde::Serializer>(frames: &[Duration], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(frames.iter().map(|d| d.as_nanos() as u64))
}

impl BenchReport {
    fn sorted(&self) -> Vec<Duration> {
        let mut sorted = self.frames.clone();
        sorted.sort_unstable();
        sorted
    }

    pub fn mean(&self) -> Duration {
        self.frames.iter().sum::<Duration>() / self.frames.len().max(1) as u32
    }

    pub fn median(&self) -> Duration {
        let sorted = self.sorted();
        let n = sorted.len();
        if n == 0 {
            Duration::ZERO
        } else if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2
        }
    }

    /// Nearest-rank 99th percentile.
    pub fn p99(&self) -> Duration {
        let sorted = self.sorted();
        if sorted.is_empty() {
            return Duration::ZERO;
        }
        let rank = ((0.99 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        sorted[rank - 1]
    }

    pub fn ns_per_node(&self) -> f64 {
        self.median().as_nanos() as f64 / self.visible_nodes.max(1) as f64
    }
}

/// Times `iterations` frames after one untimed warm-up frame.
pub fn bench(
    mesh: &VisualMesh,
    pose: &CameraPose,
    lens: &LensModel,
    image: &ImageView<'_>,
    network: &NetworkSpec,
    iterations: usize,
) -> Result<BenchReport, PipelineError> {
    let warm = run_frame(mesh, pose, lens, image, network)?;
    let mut frames = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let start = Instant::now();
        let out = run_frame(mesh, pose, lens, image, network)?;
        frames.push(start.elapsed());
        std::hint::black_box(out);
    }
    Ok(BenchReport { iterations, visible_nodes: warm.onscreen.len(), layers: network.depth(), frames })
}
