//! Per-band standardisation fitted on training pixels.

use std::fmt::Write as _;

use super::patch::Patch;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl BandStats {
    /// Zero-mean, unit-variance statistics over the centre pixels of
    /// `patches`. Constant bands get unit scale.
    pub fn fit<'a>(patches: impl IntoIterator<Item = &'a Patch>) -> Result<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sum_sq: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for p in patches {
            let spec = p.center_spectrum();
            if sum.is_empty() {
                sum = vec![0.0; spec.len()];
                sum_sq = vec![0.0; spec.len()];
            } else if spec.len() != sum.len() {
                return Err(Error::DimensionMismatch(format!(
                    "patch with {} bands among patches with {}",
                    spec.len(),
                    sum.len()
                )));
            }
            for (b, &v) in spec.iter().enumerate() {
                let v = f64::from(v);
                sum[b] += v;
                sum_sq[b] += v * v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::InvalidArgument(
                "cannot fit band statistics on zero pixels".into(),
            ));
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let std = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| {
                let var = (sq / nf - m * m).max(0.0);
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(BandStats { mean, std })
    }

    pub fn identity(bands: usize) -> Self {
        BandStats {
            mean: vec![0.0; bands],
            std: vec![1.0; bands],
        }
    }

    pub fn bands(&self) -> usize {
        self.mean.len()
    }

    /// Standardised, flattened patch.
    pub fn apply(&self, patch: &Patch) -> Vec<f64> {
        let bands = self.bands();
        patch
            .tensor
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let b = i % bands;
                (f64::from(v) - self.mean[b]) / self.std[b]
            })
            .collect()
    }

    /// One `band mean std` line per band.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# band mean std\n");
        for (b, (m, s)) in self.mean.iter().zip(&self.std).enumerate() {
            writeln!(out, "{b} {m} {s}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut mean = Vec::new();
        let mut std = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::format("band statistics", format!("bad number {s:?}")))
            };
            if fields.len() != 3 || parse(fields[0])? as usize != mean.len() {
                return Err(Error::format(
                    "band statistics",
                    format!("bad line {line:?}"),
                ));
            }
            mean.push(parse(fields[1])?);
            std.push(parse(fields[2])?);
        }
        Ok(BandStats { mean, std })
    }
}
