//! Linear state projection `e = chi * standardize(s)` and its text file.
//!
//! File layout: a header line `"<E> <S>"`, then `E` rows of `S`
//! space-separated decimals (the matrix), then one row with the
//! standardizer means and one with the standard deviations. Values are
//! written in shortest round-trip form, so a write/read cycle is bit-exact.

use std::path::Path;

use crate::dataset::Standardizer;
use crate::error::{Error, Result};
use crate::nn::Mat;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProjection {
    /// `E x S`, row-major.
    matrix: Mat,
    standardizer: Standardizer,
}

impl LinearProjection {
    /// Requires `E < S` and a standardizer of width `S`.
    pub fn new(matrix: Mat, standardizer: Standardizer) -> Result<Self> {
        if matrix.rows == 0 || matrix.rows >= matrix.cols {
            return Err(Error::Validation(format!(
                "projection must reduce dimension: got {} x {}",
                matrix.rows, matrix.cols
            )));
        }
        Self::unchecked(matrix, standardizer)
    }

    fn unchecked(matrix: Mat, standardizer: Standardizer) -> Result<Self> {
        if standardizer.dim() != matrix.cols {
            return Err(Error::Validation(format!(
                "standardizer width {} differs from projection width {}",
                standardizer.dim(),
                matrix.cols
            )));
        }
        Ok(LinearProjection {
            matrix,
            standardizer,
        })
    }

    /// Identity map without standardization: the baseline that feeds raw
    /// states to the discriminator through the same code path.
    pub fn identity(state_dim: usize) -> Self {
        let mut m = Mat::zeros(state_dim, state_dim);
        for i in 0..state_dim {
            m.data[i * state_dim + i] = 1.0;
        }
        LinearProjection {
            matrix: m,
            standardizer: Standardizer::identity(state_dim),
        }
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut Mat {
        &mut self.matrix
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn embedding_dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn state_dim(&self) -> usize {
        self.matrix.cols
    }

    /// `chi * s` for an already standardized state.
    pub fn encode(&self, standardized: &[f64]) -> Result<Vec<f64>> {
        if standardized.len() != self.state_dim() {
            return Err(Error::Validation(format!(
                "projection expects |S|={}, got {}",
                self.state_dim(),
                standardized.len()
            )));
        }
        Ok((0..self.embedding_dim())
            .map(|r| dot(self.matrix.row(r), standardized))
            .collect())
    }

    /// Standardizes a raw state, then projects it.
    pub fn embed(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim() {
            return Err(Error::Validation(format!(
                "projection expects |S|={}, got {}",
                self.state_dim(),
                state.len()
            )));
        }
        self.encode(&self.standardizer.apply(state))
    }

    /// Row-wise [`LinearProjection::embed`].
    pub fn embed_batch(&self, states: &Mat) -> Result<Mat> {
        if states.cols != self.state_dim() {
            return Err(Error::Validation(format!(
                "projection expects |S|={}, got {}",
                self.state_dim(),
                states.cols
            )));
        }
        let mut out = Mat::zeros(states.rows, self.embedding_dim());
        let mut z = vec![0.0; self.state_dim()];
        for r in 0..states.rows {
            z.copy_from_slice(states.row(r));
            self.standardizer.apply_in_place(&mut z);
            for (e, chi_row) in out.row_mut(r).iter_mut().zip(self.matrix.data.chunks(self.matrix.cols)) {
                *e = dot(chi_row, &z);
            }
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let line = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut out = format!("{} {}\n", self.embedding_dim(), self.state_dim());
        for r in 0..self.embedding_dim() {
            out.push_str(&line(self.matrix.row(r)));
            out.push('\n');
        }
        out.push_str(&line(&self.standardizer.mean));
        out.push('\n');
        out.push_str(&line(&self.standardizer.std));
        out.push('\n');
        out
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("empty projection file")?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| format!("bad header token {t:?}")))
            .collect::<std::result::Result<_, _>>()?;
        let [e, s] = dims[..] else {
            return Err(format!("header must hold two integers, got {header:?}"));
        };
        if e == 0 || s == 0 {
            return Err("dimensions must be positive".into());
        }
        let mut row = |what: &str| -> std::result::Result<Vec<f64>, String> {
            let line = lines.next().ok_or_else(|| format!("missing {what} row"))?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| format!("bad number {t:?} in {what} row")))
                .collect::<std::result::Result<_, _>>()?;
            if values.len() != s {
                return Err(format!("{what} row has {} values, header says {s}", values.len()));
            }
            Ok(values)
        };
        let mut data = Vec::with_capacity(e * s);
        for r in 0..e {
            data.extend(row(&format!("matrix {r}"))?);
        }
        let mean = row("mean")?;
        let std = row("std")?;
        if std.iter().any(|v| !(*v > 0.0)) {
            return Err("standard deviations must be positive".into());
        }
        if lines.next().is_some() {
            return Err("trailing rows after the standardizer".into());
        }
        let matrix = Mat::from_vec(e, s, data);
        let standardizer = Standardizer { mean, std };
        if e == s {
            // square files are identity baselines written by hand
            Self::unchecked(matrix, standardizer).map_err(|e| e.to_string())
        } else {
            Self::new(matrix, standardizer).map_err(|e| e.to_string())
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|reason| Error::artifact(path, reason))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::component_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn plain(matrix: Vec<f64>, e: usize, s: usize) -> LinearProjection {
        LinearProjection::new(Mat::from_vec(e, s, matrix), Standardizer::identity(s)).unwrap()
    }

    #[test]
    fn coordinate_selection() {
        assert_eq!(plain(vec![1.0, 0.0], 1, 2).encode(&[0.3, 0.9]).unwrap(), vec![0.3]);
    }

    #[test]
    fn arithmetic() {
        assert_eq!(plain(vec![0.5, 0.5], 1, 2).encode(&[2.0, 4.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn null_space_direction_is_invisible() {
        let p = plain(vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0], 2, 3);
        let s = [0.25, -1.5, 3.0];
        let moved = [0.25, -1.5, 3.0 + 17.0];
        assert_eq!(p.encode(&s).unwrap(), p.encode(&moved).unwrap());
    }

    #[test]
    fn rejects_non_reducing_and_mismatched() {
        assert!(LinearProjection::new(Mat::zeros(2, 2), Standardizer::identity(2)).is_err());
        assert!(LinearProjection::new(Mat::zeros(1, 2), Standardizer::identity(3)).is_err());
        assert!(plain(vec![1.0, 0.0], 1, 2).encode(&[1.0]).is_err());
    }

    #[test]
    fn embed_standardizes_first() {
        let st = Standardizer {
            mean: vec![1.0, 2.0],
            std: vec![2.0, 4.0],
        };
        let p = LinearProjection::new(Mat::from_vec(1, 2, vec![1.0, 1.0]), st).unwrap();
        assert_eq!(p.embed(&[3.0, 6.0]).unwrap(), vec![2.0]);
        let batch = p.embed_batch(&Mat::from_rows(&[[3.0, 6.0], [1.0, 2.0]])).unwrap();
        assert_eq!(batch.data, vec![2.0, 0.0]);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut rng = component_rng(4, "proj-io");
        let matrix = Mat::from_vec(3, 17, (0..51).map(|_| rng.gen_range(-1.0..1.0) / 3.0).collect());
        let st = Standardizer {
            mean: (0..17).map(|_| rng.gen_range(-5.0..5.0)).collect(),
            std: (0..17).map(|_| rng.gen_range(0.01..5.0)).collect(),
        };
        let p = LinearProjection::new(matrix, st).unwrap();
        let back = LinearProjection::from_text(&p.to_text()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.standardizer(), p.standardizer());
    }

    #[test]
    fn malformed_files() {
        assert!(LinearProjection::from_text("").is_err());
        let two_rows = "3 17\n".to_string() + &"0 ".repeat(17) + "\n" + &"0 ".repeat(17) + "\n";
        assert!(LinearProjection::from_text(&two_rows).is_err());
        assert!(LinearProjection::from_text("1 2\n1 0\n0 0\n1\n").is_err());
        assert!(LinearProjection::from_text("1 2\n1 0\n0 0\n1 0\n").is_err());
        assert!(LinearProjection::from_text("1 2\n1 x\n0 0\n1 1\n").is_err());
        assert!(LinearProjection::from_text("1 2\n1 0\n0 0\n1 1\n5 5\n").is_err());
        assert!(LinearProjection::from_text("1 2\n1 0\n0 0\n1 1\n").is_ok());
    }

    proptest! {
        #[test]
        fn encode_is_linear(chi in prop::collection::vec(-2.0f64..2.0, 6),
                            s1 in prop::collection::vec(-5.0f64..5.0, 3),
                            s2 in prop::collection::vec(-5.0f64..5.0, 3),
                            a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let p = plain(chi, 2, 3);
            let mixed: Vec<f64> = s1.iter().zip(&s2).map(|(x, y)| a * x + b * y).collect();
            let lhs = p.encode(&mixed).unwrap();
            let e1 = p.encode(&s1).unwrap();
            let e2 = p.encode(&s2).unwrap();
            for i in 0..2 {
                prop_assert!((lhs[i] - (a * e1[i] + b * e2[i])).abs() < 1e-9);
            }
        }
    }
}
