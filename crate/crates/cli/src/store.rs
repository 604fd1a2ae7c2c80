//! Files exchanged between commands in a run directory.

use std::fmt::Write as _;
use std::path::Path;

use dmem_core::dataset::Patch;

use crate::error::CliError;

pub const STORE_MAGIC: &[u8; 4] = b"PTCH";
pub const STORE_VERSION: u32 = 1;

/// Extracted patches of a prepared dataset, in row-major centre order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchStore {
    pub window: usize,
    pub bands: usize,
    pub num_classes: u16,
    pub patches: Vec<Patch>,
    /// Planted sub-cluster of each patch, for synthetic data.
    pub subclusters: Option<Vec<u16>>,
}

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn malformed(what: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("malformed {what}: {why}"))
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let end = self.at + n;
        let s = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| malformed("patch store", "truncated"))?;
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u16(&mut self) -> Result<u16, CliError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
}

impl PatchStore {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(STORE_MAGIC);
        for v in [
            STORE_VERSION,
            self.patches.len() as u32,
            self.window as u32,
            self.bands as u32,
            u32::from(self.num_classes),
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(u8::from(self.subclusters.is_some()));
        for (i, p) in self.patches.iter().enumerate() {
            out.extend_from_slice(&(p.center_row as u32).to_le_bytes());
            out.extend_from_slice(&(p.center_col as u32).to_le_bytes());
            out.extend_from_slice(&p.label.to_le_bytes());
            if let Some(s) = &self.subclusters {
                out.extend_from_slice(&s[i].to_le_bytes());
            }
            for v in &p.tensor {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != STORE_MAGIC {
            return Err(malformed("patch store", "bad magic"));
        }
        let version = r.u32()?;
        if version != STORE_VERSION {
            return Err(malformed(
                "patch store",
                format!("unsupported version {version}"),
            ));
        }
        let count = r.u32()? as usize;
        let window = r.u32()? as usize;
        let bands = r.u32()? as usize;
        let num_classes =
            u16::try_from(r.u32()?).map_err(|_| malformed("patch store", "class count"))?;
        let has_truth = r.take(1)?[0] == 1;
        let dim = window * window * bands;
        let mut patches = Vec::with_capacity(count);
        let mut truth = Vec::new();
        for _ in 0..count {
            let center_row = r.u32()? as usize;
            let center_col = r.u32()? as usize;
            let label = r.u16()?;
            if has_truth {
                truth.push(r.u16()?);
            }
            let tensor = r
                .take(dim * 4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            patches.push(Patch {
                center_row,
                center_col,
                window,
                bands,
                tensor,
                label,
            });
        }
        if r.at != bytes.len() {
            return Err(malformed("patch store", "trailing bytes"));
        }
        Ok(PatchStore {
            window,
            bands,
            num_classes,
            patches,
            subclusters: has_truth.then_some(truth),
        })
    }

    pub fn labels(&self) -> Vec<u16> {
        self.patches.iter().map(|p| p.label).collect()
    }
}

/// Train/test membership: one `index train|test` line per patch.
pub fn split_to_text(train: &[usize], test: &[usize], header: &str) -> String {
    let mut set = vec![""; train.len() + test.len()];
    for &i in train {
        set[i] = "train";
    }
    for &i in test {
        set[i] = "test";
    }
    let mut out = format!("# {header}\n");
    for (i, s) in set.iter().enumerate() {
        writeln!(out, "{i} {s}").unwrap();
    }
    out
}

pub fn split_from_text(text: &str) -> Result<(Vec<usize>, Vec<usize>), CliError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for line in text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
    {
        match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            [i, "train"] => train.push(i.parse().map_err(|_| malformed("split", line))?),
            [i, "test"] => test.push(i.parse().map_err(|_| malformed("split", line))?),
            _ => return Err(malformed("split", line)),
        }
    }
    Ok((train, test))
}

/// Predictions of one run: `patch_index prediction label` per test patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub indices: Vec<usize>,
    pub predicted: Vec<u16>,
    pub labels: Vec<u16>,
}

impl Predictions {
    pub fn to_text(&self) -> String {
        let mut out = String::from("# patch_index prediction label\n");
        for ((i, p), l) in self.indices.iter().zip(&self.predicted).zip(&self.labels) {
            writeln!(out, "{i} {p} {l}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut out = Predictions {
            indices: Vec::new(),
            predicted: Vec::new(),
            labels: Vec::new(),
        };
        for line in text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        {
            let f: Vec<&str> = line.split_whitespace().collect();
            let parsed = match f.as_slice() {
                [i, p, l] => i.parse().ok().zip(p.parse().ok()).zip(l.parse().ok()),
                _ => None,
            };
            let ((i, p), l) = parsed.ok_or_else(|| malformed("predictions", line))?;
            out.indices.push(i);
            out.predicted.push(p);
            out.labels.push(l);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(row: usize, label: u16, v: f32) -> Patch {
        Patch {
            center_row: row,
            center_col: 0,
            window: 1,
            bands: 2,
            tensor: vec![v, -v],
            label,
        }
    }

    #[test]
    fn store_round_trip() {
        for truth in [None, Some(vec![0, 1])] {
            let store = PatchStore {
                window: 1,
                bands: 2,
                num_classes: 3,
                patches: vec![patch(0, 1, 0.5), patch(1, 3, 2.0)],
                subclusters: truth,
            };
            let bytes = store.to_bytes();
            assert_eq!(PatchStore::from_bytes(&bytes).unwrap(), store);
            assert!(PatchStore::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        }
    }

    #[test]
    fn split_and_predictions_round_trip() {
        let text = split_to_text(&[0, 3], &[1, 2], "seed=1");
        assert_eq!(split_from_text(&text).unwrap(), (vec![0, 3], vec![1, 2]));
        let p = Predictions {
            indices: vec![4, 9],
            predicted: vec![1, 2],
            labels: vec![2, 2],
        };
        assert_eq!(Predictions::from_text(&p.to_text()).unwrap(), p);
        assert!(split_from_text("0 maybe\n").is_err());
    }
}
