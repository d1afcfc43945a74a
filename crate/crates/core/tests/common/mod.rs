#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_3, TAU};

use rand::rngs::StdRng;
use rand::Rng;
use visual_mesh::engine::{Activation, NetworkSpec, NodeFeatures, SELU_ALPHA, SELU_LAMBDA};
use visual_mesh::geometry::{Density, MeshGeometryConfig, TargetShape};
use visual_mesh::mesh::{slot, OnScreenMesh, VisualMesh};

/// Random geometry sized so the mesh stays within a few thousand nodes.
pub fn random_config(rng: &mut StdRng) -> MeshGeometryConfig {
    let height = rng.random_range(0.3..5.0);
    let q = rng.random_range(1..=3u32);
    let p = rng.random_range(q..=8u32);
    let density = Density::new(p, q).unwrap();
    let shape = if rng.random_bool(0.5) {
        TargetShape::circle(rng.random_range(0.02..0.5) * height)
    } else {
        TargetShape::sphere(rng.random_range(0.02..0.3) * height)
    };
    // About 5 to 40 ring spacings out from the centre.
    let spacing = 2.0 * shape.radius / density.value();
    let max_ground_distance = rng.random_range(5.0..40.0) * spacing;
    MeshGeometryConfig::new(height, shape, density, max_ground_distance).unwrap()
}

fn wrap(angle: f64) -> f64 {
    angle.rem_euclid(TAU)
}

/// Checks the neighbour graph against the ring layout by brute force.
pub fn check_graph(mesh: &VisualMesh) -> Result<(), String> {
    let n = mesh.len();
    let rings = mesh.ring_count();
    if n == 0 || mesh.ring(0).len() != 1 {
        return Err("mesh must start with a single centre node".into());
    }
    for (i, node) in mesh.nodes.iter().enumerate() {
        let norm = node.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(format!("node {i} direction norm {norm}"));
        }
        if let Some(&bad) = node.neighbors.iter().find(|&&m| m >= n) {
            return Err(format!("node {i} links to {bad} of {n}"));
        }
        if !mesh.ring(node.ring as usize).contains(&i) {
            return Err(format!("node {i} outside ring {}", node.ring));
        }
    }

    // Centre node: nearest ring-1 node to each multiple of 60°.
    let centre = &mesh.nodes[0];
    if rings == 1 {
        return if centre.neighbors == [0; 6] { Ok(()) } else { Err("lone centre must self-link".into()) };
    }
    let ring1 = mesh.ring(1);
    let step1 = TAU / ring1.len() as f64;
    for (s, &m) in centre.neighbors.iter().enumerate() {
        if !ring1.contains(&m) {
            return Err(format!("centre slot {s} -> {m} not on ring 1"));
        }
        let target = s as f64 * FRAC_PI_3;
        let off = wrap(mesh.nodes[m].theta - target);
        let dist = off.min(TAU - off);
        if dist > 0.5 * step1 + 1e-9 {
            return Err(format!("centre slot {s} -> {m} is {dist} rad from {target}"));
        }
    }

    for ring in 1..rings {
        let range = mesh.ring(ring);
        let count = range.len();
        for i in range.clone() {
            let node = &mesh.nodes[i];
            let nb = node.neighbors;
            let (left, right) = (nb[slot::LEFT], nb[slot::RIGHT]);
            if !range.contains(&left) || !range.contains(&right) {
                return Err(format!("node {i} ring links leave ring {ring}"));
            }
            if mesh.nodes[left].neighbors[slot::RIGHT] != i || mesh.nodes[right].neighbors[slot::LEFT] != i {
                return Err(format!("node {i} ring cycle is not symmetric"));
            }
            if count >= 3 && left == right {
                return Err(format!("node {i} has one ring neighbour on a ring of {count}"));
            }

            let below = [nb[slot::BELOW[0]], nb[slot::BELOW[1]]];
            if ring == 1 {
                if below != [0, 0] {
                    return Err(format!("ring-1 node {i} must link below to the centre"));
                }
            } else {
                check_bracket(mesh, i, ring - 1, below)?;
            }
            let above = [nb[slot::ABOVE[0]], nb[slot::ABOVE[1]]];
            if ring == rings - 1 {
                if above != [i, i] {
                    return Err(format!("outer node {i} must self-link above"));
                }
            } else {
                check_bracket(mesh, i, ring + 1, above)?;
            }
        }
        // Every ring is one closed cycle.
        let mut seen = 1;
        let mut at = mesh.nodes[range.start].neighbors[slot::RIGHT];
        while at != range.start {
            at = mesh.nodes[at].neighbors[slot::RIGHT];
            seen += 1;
            if seen > count {
                return Err(format!("ring {ring} does not close"));
            }
        }
        if seen != count {
            return Err(format!("ring {ring} cycle has {seen} of {count} nodes"));
        }
    }
    Ok(())
}

/// `pair` must be two consecutive nodes on `ring` whose azimuths enclose node `i`'s.
fn check_bracket(mesh: &VisualMesh, i: usize, ring: usize, pair: [usize; 2]) -> Result<(), String> {
    let range = mesh.ring(ring);
    let count = range.len();
    let [a, b] = pair;
    if !range.contains(&a) || !range.contains(&b) {
        return Err(format!("node {i} bracket {pair:?} not on ring {ring}"));
    }
    if count == 1 {
        return if a == b { Ok(()) } else { Err(format!("node {i} bracket on single-node ring")) };
    }
    if (a - range.start + 1) % count != b - range.start {
        return Err(format!("node {i} bracket {pair:?} not consecutive"));
    }
    let theta = mesh.nodes[i].theta;
    let step = TAU / count as f64;
    // Offset of node i past `a`, going the way of increasing azimuth.
    let past = wrap(theta - mesh.nodes[a].theta);
    let past = if past > TAU - 1e-9 { 0.0 } else { past };
    if past > step + 1e-9 {
        return Err(format!("node {i} at {theta} not between {a} and {b} on ring {ring}"));
    }
    // Brute force: nothing on the ring is strictly closer on either side.
    for m in range {
        let off = wrap(mesh.nodes[m].theta - theta);
        let gap = off.min(TAU - off);
        let best = wrap(mesh.nodes[a].theta - theta).min(TAU - wrap(mesh.nodes[a].theta - theta));
        let best_b = wrap(mesh.nodes[b].theta - theta).min(TAU - wrap(mesh.nodes[b].theta - theta));
        if gap + 1e-9 < best.min(best_b) {
            return Err(format!("node {i}: {m} on ring {ring} is nearer than {pair:?}"));
        }
    }
    Ok(())
}

/// Plain double-precision forward pass written for clarity, not speed.
pub fn reference_forward(network: &NetworkSpec, graph: &OnScreenMesh, input: &NodeFeatures) -> Vec<Vec<f64>> {
    let n = graph.len();
    let mut x: Vec<Vec<f64>> = (0..=n).map(|i| input.row(i).iter().map(|&v| f64::from(v)).collect()).collect();
    let depth = network.layers.len();
    for (l, layer) in network.layers.iter().enumerate() {
        let mut next = Vec::with_capacity(n + 1);
        for i in 0..n {
            let mut gathered = x[i].clone();
            for &m in &graph.neighbors[i] {
                gathered.extend_from_slice(&x[m]);
            }
            let mut out = Vec::with_capacity(layer.out_width);
            for o in 0..layer.out_width {
                let mut acc = f64::from(layer.bias[o]);
                for (k, v) in gathered.iter().enumerate() {
                    acc += v * f64::from(layer.weight(k, o));
                }
                out.push(if l + 1 < depth { activate(network.hidden_activation, acc) } else { acc });
            }
            next.push(out);
        }
        next.push(vec![0.0; layer.out_width]);
        x = next;
    }
    x.truncate(n);
    x.into_iter()
        .map(|logits| {
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

fn activate(activation: Activation, x: f64) -> f64 {
    match activation {
        Activation::Selu if x > 0.0 => SELU_LAMBDA * x,
        Activation::Selu => SELU_LAMBDA * SELU_ALPHA * x.exp_m1(),
        Activation::Elu if x > 0.0 => x,
        Activation::Elu => x.exp_m1(),
        Activation::Relu => x.max(0.0),
    }
}

/// A random graph in the engine's layout: every node has six links, some off-screen.
pub fn random_graph(rng: &mut StdRng, nodes: usize) -> OnScreenMesh {
    let neighbors = (0..nodes)
        .map(|_| std::array::from_fn(|_| if rng.random_bool(0.1) { nodes } else { rng.random_range(0..nodes) }))
        .collect();
    OnScreenMesh {
        pixel_coords: vec![[0.0, 0.0]; nodes],
        neighbors,
        origin_indices: (0..nodes).collect(),
        resolution: [1, 1],
    }
}

pub fn random_features(rng: &mut StdRng, nodes: usize, width: usize) -> NodeFeatures {
    let data = (0..nodes * width).map(|_| rng.random_range(0.0f32..1.0)).collect();
    NodeFeatures::from_rows(width, data).unwrap()
}

/// Graph distance from `start` over visible links; the sentinel is not a node.
pub fn graph_distances(graph: &OnScreenMesh, start: usize) -> Vec<usize> {
    let n = graph.len();
    let mut dist = vec![usize::MAX; n];
    dist[start] = 0;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        for &m in &graph.neighbors[i] {
            if m < n && dist[m] == usize::MAX {
                dist[m] = dist[i] + 1;
                queue.push_back(m);
            }
        }
    }
    dist
}
