use std::fs;
use std::path::Path;

use super::mlp::MlpModel;
use crate::datagen::feature_len;
use crate::error::{Error, Result};
use crate::gate::MAX_QUBITS;

const MAGIC: &[u8; 4] = b"MDLM";
const VERSION: u16 = 1;

/// Serializes as `MDLM`, version, qubit count, layer count, then per layer
/// (rows, cols, f32 weights row-major, f32 biases), then a CRC32 of all
/// preceding bytes. Little-endian throughout.
pub fn model_to_bytes(model: &MlpModel) -> Vec<u8> {
    let dims = model.layer_dims();
    let mut buf = Vec::with_capacity(8 + 8 * dims.len() + 4 * model.param_count() + 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(model.qubits() as u8);
    buf.push((dims.len() - 1) as u8);
    for l in 0..dims.len() - 1 {
        buf.extend_from_slice(&(dims[l + 1] as u32).to_le_bytes());
        buf.extend_from_slice(&(dims[l] as u32).to_le_bytes());
        for &w in model.layer_weights(l).iter().chain(model.layer_biases(l)) {
            buf.extend_from_slice(&(w as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Format(format!(
                "model file truncated while reading {what}"
            )));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<MlpModel> {
    if bytes.len() < 12 {
        return Err(Error::Format("model file truncated".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, expected MDLM".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let version = u16::from_le_bytes([body[4], body[5]]);
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported model version {version}"
        )));
    }
    let qubits = body[6] as usize;
    if qubits == 0 || qubits > MAX_QUBITS {
        return Err(Error::QubitCount(qubits));
    }
    let layers = body[7] as usize;
    if layers == 0 {
        return Err(Error::Format("model has no layers".into()));
    }
    let mut r = Reader {
        bytes: body,
        pos: 8,
    };
    let mut dims = Vec::with_capacity(layers + 1);
    let mut params = Vec::new();
    for l in 0..layers {
        let rows = r.u32("layer rows")? as usize;
        let cols = r.u32("layer cols")? as usize;
        match dims.last() {
            None => dims.push(cols),
            Some(&prev) if prev != cols => {
                return Err(Error::Format(format!(
                    "layer {l} expects {cols} inputs but the previous layer emits {prev}"
                )));
            }
            Some(_) => {}
        }
        dims.push(rows);
        let count = rows
            .checked_mul(cols)
            .and_then(|w| w.checked_add(rows))
            .ok_or_else(|| Error::Format("layer size overflows".into()))?;
        let raw = r.take(
            count
                .checked_mul(4)
                .ok_or_else(|| Error::Format("layer size overflows".into()))?,
            "layer parameters",
        )?;
        params.extend(
            raw.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64),
        );
    }
    if r.pos != body.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the last layer",
            body.len() - r.pos
        )));
    }
    if dims[0] != feature_len(qubits) {
        return Err(Error::Shape {
            expected: feature_len(qubits),
            got: dims[0],
        });
    }
    MlpModel::from_parts(qubits, dims, params)
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    model_from_bytes(&fs::read(path)?)
}

/// Loads a model and checks it can score `target_qubits`-qubit residuals.
pub fn load_model_for(path: &Path, target_qubits: usize) -> Result<MlpModel> {
    let model = load_model(path)?;
    model.check_target(target_qubits)?;
    Ok(model)
}
