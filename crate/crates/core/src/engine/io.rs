//! Binary network files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "VMNW" | version u32 | layer count u32 | activation u8 | class count u32
//! per layer: in_width u32 | out_width u32 | weights f32 × (7·in·out) | bias f32 × out
//! ```
//!
//! Activation codes: 0 SELU, 1 ELU, 2 ReLU.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, EngineError, LayerWeights, NetworkSpec, GATHER_SIZE};

pub const NETWORK_MAGIC: [u8; 4] = *b"VMNW";
pub const NETWORK_VERSION: u32 = 1;

/// Largest layer width accepted when reading, to reject garbage before allocating.
const MAX_WIDTH: u32 = 1 << 16;

pub fn write_network<W: Write>(mut w: W, spec: &NetworkSpec) -> Result<(), EngineError> {
    spec.validate()?;
    w.write_all(&NETWORK_MAGIC)?;
    w.write_all(&NETWORK_VERSION.to_le_bytes())?;
    w.write_all(&(spec.layers.len() as u32).to_le_bytes())?;
    w.write_all(&[spec.hidden_activation.code()])?;
    w.write_all(&(spec.output_classes as u32).to_le_bytes())?;
    for layer in &spec.layers {
        w.write_all(&(layer.in_width as u32).to_le_bytes())?;
        w.write_all(&(layer.out_width as u32).to_le_bytes())?;
        for v in layer.weights.iter().chain(&layer.bias) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, EngineError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f32>, EngineError> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
}

/// Reads and validates a network. Nothing is returned unless the whole file is sound.
pub fn read_network<R: Read>(mut r: R) -> Result<NetworkSpec, EngineError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != NETWORK_MAGIC {
        return Err(EngineError::BadMagic(magic));
    }
    let version = read_u32(&mut r)?;
    if version != NETWORK_VERSION {
        return Err(EngineError::UnsupportedVersion(version));
    }
    let layer_count = read_u32(&mut r)?;
    let mut code = [0u8; 1];
    r.read_exact(&mut code)?;
    let hidden_activation = Activation::from_code(code[0])?;
    let output_classes = read_u32(&mut r)? as usize;

    let mut layers = Vec::new();
    for index in 0..layer_count {
        let in_width = read_u32(&mut r)?;
        let out_width = read_u32(&mut r)?;
        if in_width == 0 || out_width == 0 || in_width > MAX_WIDTH || out_width > MAX_WIDTH {
            return Err(EngineError::InvalidNetwork(format!("layer {index} is {in_width}→{out_width}")));
        }
        let (in_width, out_width) = (in_width as usize, out_width as usize);
        let weights = read_f32s(&mut r, GATHER_SIZE * in_width * out_width)?;
        let bias = read_f32s(&mut r, out_width)?;
        layers.push(LayerWeights { in_width, out_width, weights, bias });
    }
    let spec = NetworkSpec { layers, hidden_activation, output_classes };
    spec.validate()?;
    Ok(spec)
}

pub fn save_network(spec: &NetworkSpec, path: impl AsRef<Path>) -> Result<(), EngineError> {
    write_network(BufWriter::new(File::create(path)?), spec)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<NetworkSpec, EngineError> {
    read_network(BufReader::new(File::open(path)?))
}
