//! Accuracy metrics, McNemar's test, clustering agreement and
//! classification maps.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use crate::dataset::HyperCube;
use crate::error::{Error, Result};

/// Counts indexed `[true class - 1][predicted class - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if n == 0 || counts.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(
                "confusion matrix must be square and non-empty".into(),
            ));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn build(preds: &[u16], labels: &[u16], num_classes: usize) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictions for {} labels",
                preds.len(),
                labels.len()
            )));
        }
        if preds.is_empty() {
            return Err(Error::InvalidArgument("no samples to evaluate".into()));
        }
        let mut counts = vec![vec![0u64; num_classes]; num_classes];
        for (&p, &l) in preds.iter().zip(labels) {
            if l == 0 || p == 0 || l as usize > num_classes || p as usize > num_classes {
                return Err(Error::InvalidArgument(format!(
                    "label {l} / prediction {p} outside 1..={num_classes}"
                )));
            }
            counts[l as usize - 1][p as usize - 1] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    /// Recall per class; `None` for classes with no true samples.
    pub per_class: Vec<Option<f64>>,
    pub confusion: ConfusionMatrix,
}

impl Metrics {
    /// OA = trace / total, AA = mean recall over classes with samples,
    /// kappa = (p_o - p_e) / (1 - p_e) with p_e from the marginals.
    pub fn from_confusion(confusion: ConfusionMatrix) -> Result<Self> {
        let n = confusion.num_classes();
        let total = confusion.total();
        if total == 0 {
            return Err(Error::InvalidArgument("no samples to evaluate".into()));
        }
        let total_f = total as f64;
        let trace: u64 = (0..n).map(|i| confusion.get(i, i)).sum();
        let row_sum = |i: usize| (0..n).map(|j| confusion.get(i, j)).sum::<u64>();
        let col_sum = |j: usize| (0..n).map(|i| confusion.get(i, j)).sum::<u64>();
        let per_class: Vec<Option<f64>> = (0..n)
            .map(|i| {
                let r = row_sum(i);
                (r > 0).then(|| confusion.get(i, i) as f64 / r as f64)
            })
            .collect();
        let present: Vec<f64> = per_class.iter().flatten().copied().collect();
        let aa = present.iter().sum::<f64>() / present.len() as f64;
        let oa = trace as f64 / total_f;
        let pe = (0..n)
            .map(|i| row_sum(i) as f64 * col_sum(i) as f64)
            .sum::<f64>()
            / (total_f * total_f);
        let kappa = if (1.0 - pe).abs() < f64::EPSILON {
            if trace == total {
                1.0
            } else {
                0.0
            }
        } else {
            (oa - pe) / (1.0 - pe)
        };
        Ok(Metrics {
            oa,
            aa,
            kappa,
            per_class,
            confusion,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "metric,value\noa,{}\naa,{}\nkappa,{}\n",
            self.oa, self.aa, self.kappa
        );
        for (i, acc) in self.per_class.iter().enumerate() {
            match acc {
                Some(a) => writeln!(out, "class_{},{a}", i + 1).unwrap(),
                None => writeln!(out, "class_{},", i + 1).unwrap(),
            }
        }
        out
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>9}", "class", "accuracy")?;
        for (i, acc) in self.per_class.iter().enumerate() {
            match acc {
                Some(a) => writeln!(f, "{:<10} {:>8.2}%", i + 1, 100.0 * a)?,
                None => writeln!(f, "{:<10} {:>9}", i + 1, "-")?,
            }
        }
        writeln!(f, "{:<10} {:>8.2}%", "OA", 100.0 * self.oa)?;
        writeln!(f, "{:<10} {:>8.2}%", "AA", 100.0 * self.aa)?;
        write!(f, "{:<10} {:>9.4}", "Kappa", self.kappa)
    }
}

/// Metrics over classes `1..=max(label, prediction)`.
pub fn metrics(preds: &[u16], labels: &[u16]) -> Result<Metrics> {
    let num_classes = preds.iter().chain(labels).copied().max().unwrap_or(0) as usize;
    Metrics::from_confusion(ConfusionMatrix::build(preds, labels, num_classes)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McNemarResult {
    /// Samples method i gets right and method j gets wrong.
    pub f_ij: u64,
    pub f_ji: u64,
    pub statistic: f64,
    /// `|statistic| > 1.96`.
    pub significant: bool,
}

pub const MCNEMAR_CRITICAL: f64 = 1.96;

impl McNemarResult {
    pub fn from_counts(f_ij: u64, f_ji: u64) -> Self {
        let statistic = if f_ij + f_ji == 0 {
            0.0
        } else {
            (f_ij as f64 - f_ji as f64) / ((f_ij + f_ji) as f64).sqrt()
        };
        McNemarResult {
            f_ij,
            f_ji,
            statistic,
            significant: statistic.abs() > MCNEMAR_CRITICAL,
        }
    }
}

/// Positive when method `i` is right more often where the two disagree.
pub fn mcnemar(preds_i: &[u16], preds_j: &[u16], labels: &[u16]) -> Result<McNemarResult> {
    if preds_i.len() != labels.len() || preds_j.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "prediction vectors of length {} and {} for {} labels",
            preds_i.len(),
            preds_j.len(),
            labels.len()
        )));
    }
    let mut f_ij = 0;
    let mut f_ji = 0;
    for ((&a, &b), &y) in preds_i.iter().zip(preds_j).zip(labels) {
        match (a == y, b == y) {
            (true, false) => f_ij += 1,
            (false, true) => f_ji += 1,
            _ => {}
        }
    }
    Ok(McNemarResult::from_counts(f_ij, f_ji))
}

fn choose2(n: u64) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index<A: Ord + Clone, B: Ord + Clone>(a: &[A], b: &[B]) -> Result<f64> {
    use std::collections::BTreeMap;
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "labelings of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut table: BTreeMap<(A, B), u64> = BTreeMap::new();
    let mut rows: BTreeMap<A, u64> = BTreeMap::new();
    let mut cols: BTreeMap<B, u64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x.clone(), y.clone())).or_default() += 1;
        *rows.entry(x.clone()).or_default() += 1;
        *cols.entry(y.clone()).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if max_index == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max_index - expected))
}

/// One RGB colour per class, in class order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette(pub Vec<[u8; 3]>);

impl Palette {
    /// Parses one `R G B` triple per non-empty line.
    pub fn from_text(text: &str) -> Result<Self> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|line| {
                let parts: Vec<u8> = line
                    .split_whitespace()
                    .map(|v| v.parse::<u8>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::format("palette", format!("bad line {line:?}")))?;
                <[u8; 3]>::try_from(parts)
                    .map_err(|_| Error::format("palette", format!("bad line {line:?}")))
            })
            .collect::<Result<_>>()
            .map(Palette)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Fixed, well-separated colours; cycles hue beyond the base set.
    pub fn default_for(num_classes: usize) -> Self {
        const BASE: [[u8; 3]; 16] = [
            [230, 25, 75],
            [60, 180, 75],
            [255, 225, 25],
            [0, 130, 200],
            [245, 130, 48],
            [145, 30, 180],
            [70, 240, 240],
            [240, 50, 230],
            [210, 245, 60],
            [250, 190, 212],
            [0, 128, 128],
            [220, 190, 255],
            [170, 110, 40],
            [255, 250, 200],
            [128, 0, 0],
            [170, 255, 195],
        ];
        Palette(
            (0..num_classes)
                .map(|i| {
                    let [r, g, b] = BASE[i % BASE.len()];
                    let shift = (i / BASE.len()) as u8;
                    [
                        r.wrapping_add(shift * 37),
                        g.wrapping_add(shift * 59),
                        b.wrapping_add(shift * 83),
                    ]
                })
                .collect(),
        )
    }
}

/// Binary PPM (P6) of the cube's extent: labelled pixels coloured by their
/// predicted class, everything else black. `preds` follows the row-major
/// order of labelled pixels.
pub fn classification_map(cube: &HyperCube, preds: &[u16], palette: &Palette) -> Result<Vec<u8>> {
    if palette.0.len() < cube.num_classes() as usize {
        return Err(Error::InvalidArgument(format!(
            "palette has {} colours for {} classes",
            palette.0.len(),
            cube.num_classes()
        )));
    }
    let labelled = cube.labelled_count();
    if preds.len() != labelled {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {labelled} labelled pixels",
            preds.len()
        )));
    }
    let mut out = format!("P6\n{} {}\n255\n", cube.width(), cube.height()).into_bytes();
    let mut next = preds.iter();
    for &label in cube.labels() {
        if label == 0 {
            out.extend_from_slice(&[0, 0, 0]);
        } else {
            let p = *next.next().unwrap();
            let colour = palette
                .0
                .get((p as usize).wrapping_sub(1))
                .ok_or_else(|| Error::InvalidArgument(format!("prediction {p} has no colour")))?;
            out.extend_from_slice(colour);
        }
    }
    Ok(out)
}
