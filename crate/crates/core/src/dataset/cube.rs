//! Labelled hyperspectral cubes and their binary file format.
//!
//! Layout (little-endian): `b"HSIC"`, `u32` version (1), `u32` height,
//! `u32` width, `u32` bands, `u32` class count, then `height*width*bands`
//! `f32` values in (row, col, band) order, then `height*width` `u16` labels.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const CUBE_MAGIC: &[u8; 4] = b"HSIC";
pub const CUBE_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    height: usize,
    width: usize,
    bands: usize,
    num_classes: u16,
    values: Vec<f32>,
    labels: Vec<u16>,
}

impl HyperCube {
    /// Builds a validated cube. `num_classes` must cover every label present.
    pub fn new(
        height: usize,
        width: usize,
        bands: usize,
        num_classes: u16,
        values: Vec<f32>,
        labels: Vec<u16>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::InvalidArgument(format!(
                "cube dimensions must be positive, got {height}x{width}x{bands}"
            )));
        }
        let expected = height * width * bands;
        if values.len() != expected {
            return Err(Error::SizeMismatch {
                expected: expected * 4,
                found: values.len() * 4,
            });
        }
        if labels.len() != height * width {
            return Err(Error::SizeMismatch {
                expected: height * width * 2,
                found: labels.len() * 2,
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinitePayload(i));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > num_classes) {
            return Err(Error::format(
                "cube",
                format!("label {bad} exceeds class count {num_classes}"),
            ));
        }
        Ok(HyperCube {
            height,
            width,
            bands,
            num_classes,
            values,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn label(&self, row: usize, col: usize) -> u16 {
        self.labels[row * self.width + col]
    }

    /// Spectrum of pixel `(row, col)`.
    pub fn spectrum(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.width + col) * self.bands;
        &self.values[start..start + self.bands]
    }

    /// Number of pixels per label; index 0 counts unlabelled pixels.
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.num_classes as usize + 1];
        for &l in &self.labels {
            hist[l as usize] += 1;
        }
        hist
    }

    pub fn labelled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(HEADER_LEN + self.values.len() * 4 + self.labels.len() * 2);
        out.extend_from_slice(CUBE_MAGIC);
        for v in [
            CUBE_VERSION,
            self.height as u32,
            self.width as u32,
            self.bands as u32,
            u32::from(self.num_classes),
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format("cube header", "file shorter than header"));
        }
        if &bytes[..4] != CUBE_MAGIC {
            return Err(Error::format("cube header", "bad magic, expected HSIC"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let version = word(0);
        if version != CUBE_VERSION {
            return Err(Error::format(
                "cube header",
                format!("unsupported version {version}"),
            ));
        }
        let (h, w, c) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let classes = word(4);
        let classes = u16::try_from(classes).map_err(|_| {
            Error::format("cube header", format!("class count {classes} exceeds u16"))
        })?;
        let pixels = h
            .checked_mul(w)
            .ok_or_else(|| Error::format("cube header", "dimensions overflow"))?;
        let n_values = pixels
            .checked_mul(c)
            .ok_or_else(|| Error::format("cube header", "dimensions overflow"))?;
        let expected = n_values * 4 + pixels * 2;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                found: payload.len(),
            });
        }
        let (vals, labs) = payload.split_at(n_values * 4);
        let values = vals
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let labels = labs
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes(b.try_into().unwrap()))
            .collect();
        HyperCube::new(h, w, c, classes, values, labels)
    }
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<HyperCube> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    HyperCube::from_bytes(&bytes)
}

pub fn save_cube(cube: &HyperCube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, cube.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads the `<name>.classes` sidecar next to a cube: line `i` names label `i`.
pub fn load_class_names(cube_path: impl AsRef<Path>) -> Result<Option<Vec<String>>> {
    let sidecar = cube_path.as_ref().with_extension("classes");
    if !sidecar.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    Ok(Some(
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
    ))
}
