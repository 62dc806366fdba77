//! Expert/random labeled states and per-feature standardization.
//!
//! Binary file layout (all integers and floats little-endian):
//!
//! ```text
//! magic    4 bytes  "SGDS"
//! version  u8       1
//! dim      u32      |S|
//! count    u64      number of samples
//! samples  count x (dim x f64, label u8)
//! ```
//!
//! The CSV variant has a header `label,s0,s1,...` and one row per sample.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"SGDS";
pub const DATASET_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledState {
    pub state: Vec<f64>,
    /// True when the state was visited by the reference policy.
    pub expert: bool,
}

/// Per-feature affine standardization `(s - mean) / std`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Features whose spread is at or below this are treated as constant.
const DEGENERATE_STD: f64 = 1e-12;

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Population mean and standard deviation per feature. Constant
    /// features get std 1, so they standardize to exactly 0.
    pub fn fit<S: AsRef<[f64]>>(states: &[S]) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::Validation("cannot fit a standardizer on no samples".into()))?;
        let dim = first.as_ref().len();
        let n = states.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in states {
            let s = s.as_ref();
            if s.len() != dim {
                return Err(Error::Validation("ragged states in standardizer fit".into()));
            }
            for (m, x) in mean.iter_mut().zip(s) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for s in states {
            for ((v, x), m) in var.iter_mut().zip(s.as_ref()).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd <= DEGENERATE_STD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, state: &[f64]) -> Vec<f64> {
        state
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn apply_in_place(&self, state: &mut [f64]) {
        for (x, (m, s)) in state.iter_mut().zip(self.mean.iter().zip(&self.std)) {
            *x = (*x - m) / s;
        }
    }

    pub fn invert(&self, standardized: &[f64]) -> Vec<f64> {
        standardized
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStateDataset {
    pub samples: Vec<LabeledState>,
    pub standardizer: Standardizer,
}

impl LabeledStateDataset {
    /// Pools the samples and fits the standardizer over both labels.
    pub fn new(samples: Vec<LabeledState>) -> Result<Self> {
        let states: Vec<&[f64]> = samples.iter().map(|s| s.state.as_slice()).collect();
        let standardizer = Standardizer::fit(&states)?;
        Ok(LabeledStateDataset {
            samples,
            standardizer,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn expert_count(&self) -> usize {
        self.samples.iter().filter(|s| s.expert).count()
    }

    /// Same samples with the standardizer replaced by the identity.
    pub fn without_standardization(mut self) -> Self {
        self.standardizer = Standardizer::identity(self.state_dim());
        self
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.encode(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn encode<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&[DATASET_VERSION])?;
        w.write_all(&(self.state_dim() as u32).to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for s in &self.samples {
            for x in &s.state {
                w.write_all(&x.to_le_bytes())?;
            }
            w.write_all(&[s.expert as u8])?;
        }
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&mut BufReader::new(file)).map_err(|reason| Error::artifact(path, reason))
    }

    pub fn decode<R: Read>(r: &mut R) -> std::result::Result<Self, String> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| "truncated header")?;
        if &magic != DATASET_MAGIC {
            return Err("bad magic".into());
        }
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte).map_err(|_| "truncated header")?;
        if byte[0] != DATASET_VERSION {
            return Err(format!("unsupported version {}", byte[0]));
        }
        let mut u32b = [0u8; 4];
        r.read_exact(&mut u32b).map_err(|_| "truncated header")?;
        let dim = u32::from_le_bytes(u32b) as usize;
        let mut u64b = [0u8; 8];
        r.read_exact(&mut u64b).map_err(|_| "truncated header")?;
        let count = u64::from_le_bytes(u64b) as usize;
        if dim == 0 || count == 0 {
            return Err("empty dataset".into());
        }
        let mut samples = Vec::with_capacity(count.min(1 << 20));
        let mut f = [0u8; 8];
        for i in 0..count {
            let mut state = Vec::with_capacity(dim);
            for _ in 0..dim {
                r.read_exact(&mut f).map_err(|_| format!("truncated at sample {i}"))?;
                state.push(f64::from_le_bytes(f));
            }
            r.read_exact(&mut byte).map_err(|_| format!("truncated at sample {i}"))?;
            let expert = match byte[0] {
                0 => false,
                1 => true,
                other => return Err(format!("label byte {other} at sample {i}")),
            };
            samples.push(LabeledState { state, expert });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| e.to_string())? != 0 {
            return Err("trailing bytes after last sample".into());
        }
        Self::new(samples).map_err(|e| e.to_string())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header: Vec<String> = std::iter::once("label".to_string())
            .chain((0..self.state_dim()).map(|i| format!("s{i}")))
            .collect();
        let io = |e| Error::io(path, e);
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        for s in &self.samples {
            let row: Vec<String> = std::iter::once((s.expert as u8).to_string())
                .chain(s.state.iter().map(|x| x.to_string()))
                .collect();
            writeln!(w, "{}", row.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let bad = |reason: String| Error::artifact(path, reason);
        let header = lines
            .next()
            .ok_or_else(|| bad("missing header".into()))?
            .map_err(|e| Error::io(path, e))?;
        let dim = header.split(',').count().saturating_sub(1);
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let expert = match fields.next().map(str::trim) {
                Some("0") => false,
                Some("1") => true,
                other => return Err(bad(format!("row {}: bad label {other:?}", i + 1))),
            };
            let state = fields
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
            if state.len() != dim {
                return Err(bad(format!("row {}: expected {dim} features", i + 1)));
            }
            samples.push(LabeledState { state, expert });
        }
        Self::new(samples).map_err(|e| bad(e.to_string()))
    }
}
