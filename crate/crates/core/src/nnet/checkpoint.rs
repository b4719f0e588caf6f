//! Model checkpoint format.
//!
//! Layout: magic `GJNN`, format version u16 LE, u32 LE descriptor length,
//! descriptor JSON (architecture, heads, target statistics), then one block
//! per parameter vector: u32 LE element count followed by that many f32 LE
//! values. Block order matches [`NetworkParams::param_blocks`].

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::layers::{Conv2d, Linear};
use super::{HeadParams, NetConfig, NetworkParams, ResBlock, TaskHead};

pub const MAGIC: &[u8; 4] = b"GJNN";
pub const FORMAT_VERSION: u16 = 1;

/// Descriptor JSON must stay below this; real descriptors are ~1 KiB.
const MAX_DESCRIPTOR_LEN: u32 = 1 << 20;
/// No parameter vector in the compact network exceeds this.
const MAX_BLOCK_LEN: u32 = 1 << 24;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    VersionMismatch(u16),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HeadMeta {
    spec: TaskHead,
    target_mean: f64,
    target_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Descriptor {
    config: NetConfig,
    heads: Vec<HeadMeta>,
}

pub fn save(params: &NetworkParams, mut w: impl Write) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let desc = Descriptor {
        config: params.config.clone(),
        heads: params
            .heads
            .iter()
            .map(|h| HeadMeta {
                spec: h.spec.clone(),
                target_mean: h.target_mean,
                target_std: h.target_std,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&desc).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for block in params.param_blocks() {
        w.write_all(&(block.len() as u32).to_le_bytes())?;
        for &v in block {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_to_file(params: &NetworkParams, path: &std::path::Path) -> Result<(), CheckpointError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    save(params, &mut f)?;
    Ok(())
}

fn read_u16(r: &mut impl Read) -> Result<u16, CheckpointError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_block(r: &mut impl Read, expect: usize) -> Result<Vec<f64>, CheckpointError> {
    let len = read_u32(r)?;
    if len > MAX_BLOCK_LEN {
        return Err(CheckpointError::Malformed(format!("block of {len} values")));
    }
    if len as usize != expect {
        return Err(CheckpointError::Malformed(format!(
            "block holds {len} values, architecture expects {expect}"
        )));
    }
    let mut bytes = vec![0u8; len as usize * 4];
    r.read_exact(&mut bytes)?;
    let vals: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(CheckpointError::Malformed("non-finite parameter".into()));
    }
    Ok(vals)
}

pub fn load(mut r: impl Read) -> Result<NetworkParams, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u16(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch(version));
    }
    let desc_len = read_u32(&mut r)?;
    if desc_len > MAX_DESCRIPTOR_LEN {
        return Err(CheckpointError::Malformed(format!("descriptor of {desc_len} bytes")));
    }
    let mut desc_bytes = vec![0u8; desc_len as usize];
    r.read_exact(&mut desc_bytes)?;
    let desc: Descriptor = serde_json::from_slice(&desc_bytes)
        .map_err(|e| CheckpointError::Malformed(e.to_string()))?;

    validate_descriptor(&desc)?;
    let mut params = skeleton(&desc)?;
    for block in params.param_blocks_mut() {
        let expect = block.len();
        *block = read_block(&mut r, expect)?;
    }
    // Trailing garbage means the file was not produced by this writer.
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(CheckpointError::Malformed("trailing bytes".into()));
    }
    Ok(params)
}

pub fn load_from_file(path: &std::path::Path) -> Result<NetworkParams, CheckpointError> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    load(f)
}

fn validate_descriptor(desc: &Descriptor) -> Result<(), CheckpointError> {
    let c = &desc.config;
    let dims_ok = |d: (usize, usize)| d.0 >= 1 && d.0 <= 64 && d.1 >= 1 && d.1 <= 64;
    if c.stem_channels == 0
        || c.stem_channels > 1024
        || !dims_ok(c.stem_kernel)
        || !dims_ok(c.stem_stride)
        || !dims_ok(c.pool.kernel)
        || !dims_ok(c.pool.stride)
        || c.block_widths.is_empty()
        || c.block_widths.len() != c.block_strides.len()
        || c.block_widths.len() > 16
        || c.block_widths.iter().any(|&w| w == 0 || w > 4096)
        || c.block_strides.iter().any(|&s| !dims_ok(s))
    {
        return Err(CheckpointError::Malformed("implausible architecture".into()));
    }
    if desc.heads.is_empty() || desc.heads.len() > 64 {
        return Err(CheckpointError::Malformed("bad head count".into()));
    }
    for h in &desc.heads {
        h.spec
            .validate()
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        if h.spec.n_c > 65_536 || !h.target_mean.is_finite() || !(h.target_std > 0.0) {
            return Err(CheckpointError::Malformed("bad head metadata".into()));
        }
    }
    Ok(())
}

fn skeleton(desc: &Descriptor) -> Result<NetworkParams, CheckpointError> {
    let config = desc.config.clone();
    let stem = Conv2d::from_shape(&super::layers::ConvShape {
        in_c: 1,
        out_c: config.stem_channels,
        kernel: config.stem_kernel,
        stride: config.stem_stride,
        pad: (config.stem_kernel.0 / 2, config.stem_kernel.1 / 2),
    });
    let mut blocks = Vec::new();
    let mut in_c = config.stem_channels;
    for (w, s) in config.block_widths.iter().zip(&config.block_strides) {
        blocks.push(ResBlock {
            conv1: Conv2d::from_shape(&super::layers::ConvShape {
                in_c,
                out_c: *w,
                kernel: (3, 3),
                stride: *s,
                pad: (1, 1),
            }),
            conv2: Conv2d::from_shape(&super::layers::ConvShape {
                in_c: *w,
                out_c: *w,
                kernel: (3, 3),
                stride: (1, 1),
                pad: (1, 1),
            }),
            proj: Conv2d::from_shape(&super::layers::ConvShape {
                in_c,
                out_c: *w,
                kernel: (1, 1),
                stride: *s,
                pad: (0, 0),
            }),
        });
        in_c = *w;
    }
    let emb = config.embedding_dim();
    let heads = desc
        .heads
        .iter()
        .map(|h| HeadParams {
            spec: h.spec.clone(),
            linear: Linear {
                in_dim: emb,
                out_dim: h.spec.n_c,
                weight: vec![0.0; h.spec.n_c * emb],
                bias: vec![0.0; h.spec.n_c],
            },
            target_mean: h.target_mean,
            target_std: h.target_std,
        })
        .collect();
    Ok(NetworkParams { config, stem, blocks, heads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::TaskHead;
    use crate::rng::DetRng;

    fn tiny_params() -> NetworkParams {
        let heads = vec![
            TaskHead::classification("type", 7),
            TaskHead::regression("bandwidth_mhz"),
        ];
        NetworkParams::init(NetConfig::default(), &heads, &mut DetRng::new(5)).unwrap()
    }

    #[test]
    fn round_trip_preserves_f32_values() {
        let params = tiny_params();
        let mut bytes = Vec::new();
        save(&params, &mut bytes).unwrap();
        let loaded = load(bytes.as_slice()).unwrap();
        assert_eq!(loaded.config, params.config);
        assert_eq!(loaded.heads.len(), params.heads.len());
        for (a, b) in params.param_blocks().iter().zip(loaded.param_blocks().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
        // Saving the loaded model reproduces the bytes exactly.
        let mut again = Vec::new();
        save(&loaded, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let params = tiny_params();
        let mut bytes = Vec::new();
        save(&params, &mut bytes).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(load(bad.as_slice()), Err(CheckpointError::BadMagic)));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(load(bad.as_slice()), Err(CheckpointError::VersionMismatch(_))));

        let truncated = &bytes[..bytes.len() - 3];
        assert!(load(truncated).is_err());

        let mut extended = bytes.clone();
        extended.push(0);
        assert!(matches!(load(extended.as_slice()), Err(CheckpointError::Malformed(_))));
    }
}
