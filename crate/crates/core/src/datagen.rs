//! Training data: rejection-sampled Clifford+T circuits, curriculum cuts,
//! phase normalization and the binary dataset format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gate::{Gate, GateKind, MAX_QUBITS};
use crate::par::{map_indexed, Execution};
use crate::peephole::optimize;
use crate::rng::{substream, StreamRng};
use crate::unitary::{kron_pad, residual, Unitary};

/// Reference-entry threshold for phase normalization.
pub const PHASE_THRESHOLD: f64 = 1e-7;
pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub qubits: usize,
    /// Inclusive T-count range.
    pub t_count_range: (usize, usize),
    /// Inclusive range of optimized gate counts.
    pub gate_count_range: (usize, usize),
    pub seed: u64,
    pub max_attempts: usize,
}

impl SamplerConfig {
    pub fn new(qubits: usize, seed: u64) -> Self {
        SamplerConfig {
            qubits,
            t_count_range: (0, 20),
            gate_count_range: (3, 60),
            seed,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn with_t_range(mut self, lo: usize, hi: usize) -> Self {
        self.t_count_range = (lo, hi);
        self
    }

    pub fn with_gate_range(mut self, lo: usize, hi: usize) -> Self {
        self.gate_count_range = (lo, hi);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits == 0 || self.qubits > MAX_QUBITS {
            return Err(Error::QubitCount(self.qubits));
        }
        let (tl, th) = self.t_count_range;
        let (gl, gh) = self.gate_count_range;
        if tl > th || gl > gh {
            return Err(Error::Config(format!(
                "empty range: t {tl}..={th}, gates {gl}..={gh}"
            )));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be positive".into()));
        }
        Ok(())
    }
}

fn random_clifford(n: usize, rng: &mut impl Rng) -> Gate {
    let kinds: &[GateKind] = if n > 1 {
        &[GateKind::H, GateKind::S, GateKind::Cx]
    } else {
        &[GateKind::H, GateKind::S]
    };
    let q = |rng: &mut dyn rand::RngCore| rng.random_range(0..n) as u8;
    match kinds[rng.random_range(0..kinds.len())] {
        GateKind::H => Gate::H(q(rng)),
        GateKind::S => Gate::S(q(rng)),
        _ => {
            let c = rng.random_range(0..n);
            let mut t = rng.random_range(0..n - 1);
            if t >= c {
                t += 1;
            }
            Gate::Cx(c as u8, t as u8)
        }
    }
}

/// One proposal with exactly `k` T gates and `length` gates before
/// optimization.
fn propose(n: usize, k: usize, length: usize, rng: &mut impl Rng) -> Vec<Gate> {
    let mut gates: Vec<Gate> = (0..length.saturating_sub(k))
        .map(|_| random_clifford(n, rng))
        .collect();
    for _ in 0..k {
        let pos = rng.random_range(0..=gates.len());
        gates.insert(pos, Gate::T(rng.random_range(0..n) as u8));
    }
    gates.shuffle(rng);
    gates
}

/// Draws a T-count uniformly, then proposes random circuits until one keeps
/// that T-count under peephole optimization and lands in the gate-count range.
pub fn sample_circuit(cfg: &SamplerConfig, rng: &mut impl Rng) -> Result<Circuit> {
    cfg.validate()?;
    let k = rng.random_range(cfg.t_count_range.0..=cfg.t_count_range.1);
    sample_with_t_count(cfg, k, rng)
}

/// Rejection sampler for a fixed T-count.
pub fn sample_with_t_count(cfg: &SamplerConfig, k: usize, rng: &mut impl Rng) -> Result<Circuit> {
    cfg.validate()?;
    let n = cfg.qubits;
    let (lo, hi) = cfg.gate_count_range;
    let budget_error = Error::RejectionBudget {
        attempts: cfg.max_attempts,
        t_count: k,
        min_gates: lo,
        max_gates: hi,
    };
    if k > hi {
        return Err(budget_error);
    }
    let len_lo = lo.max(k);
    for _ in 0..cfg.max_attempts {
        let length = rng.random_range(len_lo..=hi);
        let raw = Circuit::from_parts_unchecked(n, propose(n, k, length, rng));
        let opt = optimize(&raw);
        if opt.t_count() == k && (lo..=hi).contains(&opt.len()) {
            return Ok(opt);
        }
    }
    Err(budget_error)
}

/// Cut positions: always 0, plus after the floor(k/2)-th T gate when the
/// circuit has k >= 5 T gates, plus after the floor(3k/4)-th when k >= 10.
pub fn curriculum_cuts(c: &Circuit) -> Vec<usize> {
    let t_positions: Vec<usize> = c
        .gates()
        .iter()
        .enumerate()
        .filter(|(_, g)| g.kind() == GateKind::T)
        .map(|(i, _)| i)
        .collect();
    let k = t_positions.len();
    let mut cuts = vec![0];
    if k >= 5 {
        cuts.push(t_positions[k / 2 - 1] + 1);
    }
    if k >= 10 {
        cuts.push(t_positions[3 * k / 4 - 1] + 1);
    }
    cuts.dedup();
    cuts
}

/// Removes the global phase: multiplies by `e^{-i theta}` where `theta` is
/// the argument of the first row-major entry with modulus above `threshold`.
pub fn phase_normalize(r: &Unitary, threshold: f64) -> Result<Unitary> {
    let idx = r
        .entries()
        .iter()
        .position(|z| z.norm() > threshold)
        .ok_or(Error::NoPhaseReference(threshold))?;
    let reference = r.entries()[idx];
    let mut out = r.scale(Complex64::from_polar(1.0, -reference.arg()));
    // Pin the reference entry exactly onto the real axis.
    out.entries_mut()[idx] = Complex64::new(reference.norm(), 0.0);
    Ok(out)
}

/// All real parts row-major, then all imaginary parts row-major.
pub fn flatten(u: &Unitary) -> Vec<f64> {
    let e = u.entries();
    e.iter()
        .map(|z| z.re)
        .chain(e.iter().map(|z| z.im))
        .collect()
}

/// Inverse of [`flatten`].
pub fn unflatten(features: &[f64]) -> Result<Unitary> {
    let half = features.len() / 2;
    let n = (1..=MAX_QUBITS)
        .find(|&n| 1usize << (2 * n) == half && features.len() == 2 * half)
        .ok_or(Error::Shape {
            expected: 2,
            got: features.len(),
        })?;
    let data = (0..half)
        .map(|i| Complex64::new(features[i], features[half + i]))
        .collect();
    Unitary::from_entries(n, data)
}

/// Network input for a residual: pad to the model's register, strip the
/// phase, flatten.
pub fn featurize(r: &Unitary, model_qubits: usize) -> Result<Vec<f64>> {
    let padded;
    let r = if r.qubits() == model_qubits {
        r
    } else {
        padded = kron_pad(r, model_qubits)?;
        &padded
    };
    Ok(flatten(&phase_normalize(r, PHASE_THRESHOLD)?))
}

pub fn feature_len(qubits: usize) -> usize {
    2 << (2 * qubits)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub features: Vec<f64>,
    pub label: u16,
}

/// Builds one example per curriculum cut of an optimized circuit.
pub fn make_examples(c: &Circuit, resuffix_optimize: bool) -> Result<Vec<TrainingExample>> {
    let target = c.unitary();
    curriculum_cuts(c)
        .into_iter()
        .map(|t| {
            let prefix = c.slice(0, t).unitary();
            let r = residual(&prefix, &target)?;
            let label = if resuffix_optimize {
                optimize(&c.slice(t, c.len())).len()
            } else {
                c.len() - t
            };
            Ok(TrainingExample {
                features: flatten(&phase_normalize(&r, PHASE_THRESHOLD)?),
                label: label as u16,
            })
        })
        .collect()
}

/// An endless stream of training examples from one seeded RNG.
pub struct ExampleStream {
    cfg: SamplerConfig,
    resuffix_optimize: bool,
    rng: StreamRng,
    pending: std::vec::IntoIter<TrainingExample>,
}

impl ExampleStream {
    pub fn new(cfg: SamplerConfig, resuffix_optimize: bool, stream: u64) -> Result<Self> {
        cfg.validate()?;
        let rng = substream(cfg.seed, "datagen", stream);
        Ok(ExampleStream {
            cfg,
            resuffix_optimize,
            rng,
            pending: Vec::new().into_iter(),
        })
    }

    pub fn qubits(&self) -> usize {
        self.cfg.qubits
    }
}

impl Iterator for ExampleStream {
    type Item = Result<TrainingExample>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(ex) = self.pending.next() {
                return Some(Ok(ex));
            }
            let batch = sample_circuit(&self.cfg, &mut self.rng)
                .and_then(|c| make_examples(&c, self.resuffix_optimize));
            match batch {
                Ok(b) => self.pending = b.into_iter(),
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

/// Generates at least `count` examples (truncated to exactly `count`) using
/// independent per-chunk streams; output is identical for any worker count.
pub fn generate_examples(
    cfg: &SamplerConfig,
    count: usize,
    resuffix_optimize: bool,
    exec: Execution,
) -> Result<Vec<TrainingExample>> {
    const CHUNK: usize = 256;
    cfg.validate()?;
    let chunks = count.div_ceil(CHUNK);
    let parts = map_indexed(exec, chunks, |i| -> Result<Vec<TrainingExample>> {
        let want = CHUNK.min(count - i * CHUNK);
        ExampleStream::new(cfg.clone(), resuffix_optimize, i as u64)?
            .take(want)
            .collect()
    });
    let mut out = Vec::with_capacity(count);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// A set of examples sharing one register size.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub qubits: usize,
    pub examples: Vec<TrainingExample>,
}

const DATASET_MAGIC: &[u8; 4] = b"MDLD";
const DATASET_VERSION: u16 = 1;

impl Dataset {
    /// Serializes as `MDLD`, version, qubit count, example count, then per
    /// example the f32 features and u16 label, all little-endian, followed by
    /// a CRC32 of everything before it.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let width = feature_len(self.qubits);
        let mut buf = Vec::with_capacity(15 + self.examples.len() * (4 * width + 2) + 4);
        buf.extend_from_slice(DATASET_MAGIC);
        buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        buf.push(self.qubits as u8);
        buf.extend_from_slice(&(self.examples.len() as u64).to_le_bytes());
        for ex in &self.examples {
            if ex.features.len() != width {
                return Err(Error::Shape {
                    expected: width,
                    got: ex.features.len(),
                });
            }
            for &x in &ex.features {
                buf.extend_from_slice(&(x as f32).to_le_bytes());
            }
            buf.extend_from_slice(&ex.label.to_le_bytes());
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
        if bytes.is_empty() {
            return Ok(Dataset {
                qubits: 0,
                examples: Vec::new(),
            });
        }
        if bytes.len() < 19 {
            return Err(Error::Format("dataset file truncated".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if &body[..4] != DATASET_MAGIC {
            return Err(Error::Format("bad magic, expected MDLD".into()));
        }
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let version = u16::from_le_bytes([body[4], body[5]]);
        if version != DATASET_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset version {version}"
            )));
        }
        let qubits = body[6] as usize;
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(Error::QubitCount(qubits));
        }
        let count = u64::from_le_bytes(body[7..15].try_into().expect("8 bytes")) as usize;
        let width = feature_len(qubits);
        let record = 4 * width + 2;
        let payload = &body[15..];
        if payload.len() != count.saturating_mul(record) {
            return Err(Error::Format(format!(
                "header declares {count} examples of {width} features for {qubits} qubits, \
                 payload has {} bytes",
                payload.len()
            )));
        }
        let examples = payload
            .chunks_exact(record)
            .map(|rec| {
                let features = rec[..4 * width]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                    .collect();
                let label = u16::from_le_bytes([rec[4 * width], rec[4 * width + 1]]);
                TrainingExample { features, label }
            })
            .collect();
        Ok(Dataset { qubits, examples })
    }
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&ds.to_bytes()?)?;
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    Dataset::from_bytes(&bytes)
}
