//! Head checkpoints: `BIDH` magic, u32 version, u32 head kind, u32 layer
//! count, then per layer u32 fan-out and u32 fan-in, then per layer the
//! weights (row-major, fan-out × fan-in) followed by the biases. Little-endian
//! throughout; values are f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::head::{HeadKind, HeadParams, Layer};
use super::{Result, TrainerError};
use crate::linalg::Matrix;

pub const HEAD_MAGIC: [u8; 4] = *b"BIDH";
pub const HEAD_VERSION: u32 = 1;

pub fn write_head<W: Write>(head: &HeadParams, mut w: W) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&HEAD_MAGIC);
    buf.extend_from_slice(&HEAD_VERSION.to_le_bytes());
    buf.extend_from_slice(&head.kind().code().to_le_bytes());
    buf.extend_from_slice(&(head.layers().len() as u32).to_le_bytes());
    for l in head.layers() {
        buf.extend_from_slice(&(l.fan_out() as u32).to_le_bytes());
        buf.extend_from_slice(&(l.fan_in() as u32).to_le_bytes());
    }
    for l in head.layers() {
        for &v in l.weight.data().iter().chain(&l.bias) {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> TrainerError {
    TrainerError::Checkpoint(msg.into())
}

pub fn read_head<R: Read>(mut r: R) -> Result<HeadParams> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let u32_at = |pos: &mut usize| -> Result<u32> {
        let s = bytes
            .get(*pos..*pos + 4)
            .ok_or_else(|| bad("truncated header"))?;
        *pos += 4;
        Ok(u32::from_le_bytes(s.try_into().unwrap()))
    };
    if bytes.get(..4) != Some(&HEAD_MAGIC[..]) {
        return Err(bad("bad magic"));
    }
    pos += 4;
    let version = u32_at(&mut pos)?;
    if version != HEAD_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let kind = HeadKind::from_code(u32_at(&mut pos)?).ok_or_else(|| bad("unknown head kind"))?;
    let n_layers = u32_at(&mut pos)? as usize;
    if n_layers > 64 {
        return Err(bad(format!("implausible layer count {n_layers}")));
    }
    let mut shapes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let out = u32_at(&mut pos)? as usize;
        let inp = u32_at(&mut pos)? as usize;
        shapes.push((out, inp));
    }
    let total: usize = shapes.iter().map(|(o, i)| o * i + o).sum();
    let body = &bytes[pos..];
    if body.len() != total * 4 {
        return Err(bad(format!(
            "expected {} bytes of weights, found {}",
            total * 4,
            body.len()
        )));
    }
    let mut vals = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())));
    let mut layers = Vec::with_capacity(n_layers);
    for (out, inp) in shapes {
        let w: Vec<f64> = vals.by_ref().take(out * inp).collect();
        let b: Vec<f64> = vals.by_ref().take(out).collect();
        if w.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(bad("non-finite weight"));
        }
        layers.push(Layer {
            weight: Matrix::from_vec(out, inp, w),
            bias: b,
        });
    }
    HeadParams::from_layers(kind, layers)
}

pub fn save_head(head: &HeadParams, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_head(head, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_head(path: &Path) -> Result<HeadParams> {
    read_head(BufReader::new(File::open(path)?))
}
