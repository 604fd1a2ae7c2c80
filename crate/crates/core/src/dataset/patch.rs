//! Spatial-spectral patch extraction around labelled pixels.

use rayon::prelude::*;

use super::cube::HyperCube;
use crate::error::{Error, Result};

/// A `window x window x bands` neighbourhood centred on a labelled pixel,
/// stored in (row, col, band) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub center_row: usize,
    pub center_col: usize,
    pub window: usize,
    pub bands: usize,
    pub tensor: Vec<f32>,
    pub label: u16,
}

impl Patch {
    /// Flattened patch as a 64-bit vector (the network input).
    pub fn to_f64(&self) -> Vec<f64> {
        self.tensor.iter().map(|&v| f64::from(v)).collect()
    }

    /// Spectrum of the centre pixel.
    pub fn center_spectrum(&self) -> &[f32] {
        let half = self.window / 2;
        let start = (half * self.window + half) * self.bands;
        &self.tensor[start..start + self.bands]
    }

    pub fn dim(&self) -> usize {
        self.tensor.len()
    }
}

/// Symmetric (edge-repeating) reflection of a possibly out-of-range index
/// into `0..len`: `-1 -> 0`, `-2 -> 1`, `len -> len - 1`.
pub fn mirror_index(i: isize, len: usize) -> usize {
    let period = 2 * len as isize;
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// One patch per labelled pixel, row-major by centre pixel. Pixels near the
/// border are filled by mirroring.
pub fn extract_patches(cube: &HyperCube, window: usize) -> Result<Vec<Patch>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "patch window must be odd, got {window}"
        )));
    }
    let centers: Vec<(usize, usize)> = (0..cube.height())
        .flat_map(|r| (0..cube.width()).map(move |c| (r, c)))
        .filter(|&(r, c)| cube.label(r, c) != 0)
        .collect();
    let half = (window / 2) as isize;
    let bands = cube.bands();
    Ok(centers
        .par_iter()
        .map(|&(row, col)| {
            let mut tensor = Vec::with_capacity(window * window * bands);
            for dr in -half..=half {
                let r = mirror_index(row as isize + dr, cube.height());
                for dc in -half..=half {
                    let c = mirror_index(col as isize + dc, cube.width());
                    tensor.extend_from_slice(cube.spectrum(r, c));
                }
            }
            Patch {
                center_row: row,
                center_col: col,
                window,
                bands,
                tensor,
                label: cube.label(row, col),
            }
        })
        .collect())
}
