//! Run configuration: every key a command understands, resolved to values.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dmem_core::config::ConfigMap;
use dmem_core::dataset::{ManifoldKind, SplitMode, SyntheticSpec};
use dmem_core::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Cube(PathBuf),
    /// Generated data. The spec's `seed` is ignored; the run seed is used.
    Synthetic(SyntheticSpec),
}

/// Values swept by the `sweep` command. Each list defaults to the single
/// value of the base run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub k: Vec<usize>,
    pub b: Vec<usize>,
    pub delta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub seeds: Vec<u64>,
}

pub const DEFAULT_SWEEP_SEEDS: u64 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub window: usize,
    pub split: SplitMode,
    pub train: TrainConfig,
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub palette: Option<PathBuf>,
    pub compare_predictions: Option<PathBuf>,
    pub dump_geodesics: bool,
    pub out: Option<PathBuf>,
    pub sweep: SweepGrid,
}

fn resolve(base: &Path, value: String) -> PathBuf {
    let p = PathBuf::from(value);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths are taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut map = ConfigMap::parse(text)?;
        let cube = map.take_str("cube");
        let synthetic_keys = [
            "synthetic.manifold",
            "synthetic.classes",
            "synthetic.subclusters",
            "synthetic.samples",
            "synthetic.dim",
            "synthetic.noise",
        ];
        let any_synthetic = synthetic_keys.iter().any(|k| map.contains(k));
        let data = match (cube, any_synthetic) {
            (Some(_), true) => {
                return Err(CliError::Config(
                    "give either `cube` or `synthetic.*` keys, not both".into(),
                ))
            }
            (Some(c), false) => DataSource::Cube(resolve(base, c)),
            (None, true) => {
                let manifold: String = map.take_or("synthetic.manifold", "arc".to_string())?;
                DataSource::Synthetic(SyntheticSpec {
                    manifold: manifold.parse::<ManifoldKind>()?,
                    num_classes: map.take_or("synthetic.classes", 3)?,
                    subclusters_per_class: map.take_or("synthetic.subclusters", 2)?,
                    samples_per_subcluster: map.take_or("synthetic.samples", 100)?,
                    ambient_dim: map.take_or("synthetic.dim", 10)?,
                    noise_sigma: map.take_or("synthetic.noise", 0.05)?,
                    seed: 0,
                })
            }
            (None, false) => {
                return Err(CliError::Config(
                    "no data source: set `cube` or the `synthetic.*` keys".into(),
                ))
            }
        };
        let synthetic = matches!(data, DataSource::Synthetic(_));
        let window = map.take_or("window", if synthetic { 1 } else { 5 })?;

        let split = match (
            map.take::<usize>("train_per_class")?,
            map.take::<f64>("train_fraction")?,
        ) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "give either `train_per_class` or `train_fraction`, not both".into(),
                ))
            }
            (Some(n), None) => SplitMode::CountPerClass(n),
            (None, Some(f)) => SplitMode::FractionPerClass(f),
            (None, None) if synthetic => SplitMode::FractionPerClass(0.5),
            (None, None) => SplitMode::CountPerClass(200),
        };

        let train = TrainConfig::from_config(&mut map)?;
        let hidden = map.take_list("hidden")?.unwrap_or_else(|| vec![256, 128]);
        let feature_dim = map.take_or("feature_dim", 64)?;
        let palette = map.take_str("palette").map(|p| resolve(base, p));
        let compare_predictions = map
            .take_str("compare_predictions")
            .map(|p| resolve(base, p));
        let dump_geodesics = map.take_or("dump_geodesics", false)?;
        let out = map.take_str("out").map(|p| resolve(base, p));
        let sweep = SweepGrid {
            k: map.take_list("sweep.k")?.unwrap_or(vec![train.manifold.k]),
            b: map.take_list("sweep.b")?.unwrap_or(vec![train.manifold.b]),
            delta: map
                .take_list("sweep.delta")?
                .unwrap_or(vec![train.loss.delta]),
            lambda: map.take_list("sweep.lambda")?.unwrap_or(vec![train.lambda]),
            seeds: map
                .take_list("sweep.seeds")?
                .unwrap_or_else(|| (0..DEFAULT_SWEEP_SEEDS).map(|i| train.seed + i).collect()),
        };
        map.finish()?;

        let cfg = RunConfig {
            data,
            window,
            split,
            train,
            hidden,
            feature_dim,
            palette,
            compare_predictions,
            dump_geodesics,
            out,
            sweep,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.window % 2 == 0 {
            return bad(format!("window must be odd, got {}", self.window));
        }
        match self.split {
            SplitMode::CountPerClass(0) => return bad("train_per_class must be positive".into()),
            SplitMode::FractionPerClass(f) if !(f > 0.0 && f <= 1.0) => {
                return bad(format!("train_fraction must lie in (0, 1], got {f}"))
            }
            _ => {}
        }
        if self.hidden.contains(&0) || self.feature_dim == 0 {
            return bad("layer widths must be positive".into());
        }
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        let s = &self.sweep;
        if s.k.is_empty()
            || s.b.is_empty()
            || s.delta.is_empty()
            || s.lambda.is_empty()
            || s.seeds.is_empty()
        {
            return bad("sweep lists must not be empty".into());
        }
        for (k, b, d, l) in self.grid() {
            let mut t = self.train.clone();
            t.manifold.k = k;
            t.manifold.b = b;
            t.loss.delta = d;
            t.lambda = l;
            t.validate()?;
        }
        Ok(())
    }

    /// Sweep cells as `(k, b, delta, lambda)`, in row-major order.
    pub fn grid(&self) -> Vec<(usize, usize, f64, f64)> {
        let s = &self.sweep;
        let mut cells = Vec::new();
        for &k in &s.k {
            for &b in &s.b {
                for &d in &s.delta {
                    for &l in &s.lambda {
                        cells.push((k, b, d, l));
                    }
                }
            }
        }
        cells
    }

    /// Fully resolved `key = value` text; parses back to the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match &self.data {
            DataSource::Cube(p) => writeln!(out, "cube = {}", p.display()).unwrap(),
            DataSource::Synthetic(s) => {
                writeln!(out, "synthetic.manifold = {}", s.manifold.name()).unwrap();
                writeln!(out, "synthetic.classes = {}", s.num_classes).unwrap();
                writeln!(out, "synthetic.subclusters = {}", s.subclusters_per_class).unwrap();
                writeln!(out, "synthetic.samples = {}", s.samples_per_subcluster).unwrap();
                writeln!(out, "synthetic.dim = {}", s.ambient_dim).unwrap();
                writeln!(out, "synthetic.noise = {}", s.noise_sigma).unwrap();
            }
        }
        writeln!(out, "window = {}", self.window).unwrap();
        match self.split {
            SplitMode::CountPerClass(n) => writeln!(out, "train_per_class = {n}").unwrap(),
            SplitMode::FractionPerClass(f) => writeln!(out, "train_fraction = {f}").unwrap(),
        }
        out.push_str(&self.train.to_text());
        writeln!(out, "hidden = {}", join(&self.hidden)).unwrap();
        writeln!(out, "feature_dim = {}", self.feature_dim).unwrap();
        if let Some(p) = &self.palette {
            writeln!(out, "palette = {}", p.display()).unwrap();
        }
        if let Some(p) = &self.compare_predictions {
            writeln!(out, "compare_predictions = {}", p.display()).unwrap();
        }
        writeln!(out, "dump_geodesics = {}", self.dump_geodesics).unwrap();
        if let Some(p) = &self.out {
            writeln!(out, "out = {}", p.display()).unwrap();
        }
        writeln!(out, "sweep.k = {}", join(&self.sweep.k)).unwrap();
        writeln!(out, "sweep.b = {}", join(&self.sweep.b)).unwrap();
        writeln!(out, "sweep.delta = {}", join(&self.sweep.delta)).unwrap();
        writeln!(out, "sweep.lambda = {}", join(&self.sweep.lambda)).unwrap();
        writeln!(out, "sweep.seeds = {}", join(&self.sweep.seeds)).unwrap();
        out
    }
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_parses_back() {
        let text = "synthetic.manifold = swiss-roll\nsynthetic.classes = 2\nhidden = 16,8\nsweep.k = 1,2\nlr = 0.05\n";
        let cfg = RunConfig::parse(text, Path::new("/tmp")).unwrap();
        let again = RunConfig::parse(&cfg.to_text(), Path::new("/elsewhere")).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(cfg.grid().len(), 2);
        assert_eq!(cfg.sweep.seeds.len(), 5);
    }

    #[test]
    fn relative_cube_path_follows_config() {
        let cfg = RunConfig::parse("cube = data/pavia.hsic\n", Path::new("/runs")).unwrap();
        assert_eq!(
            cfg.data,
            DataSource::Cube(PathBuf::from("/runs/data/pavia.hsic"))
        );
        assert_eq!(cfg.window, 5);
        assert_eq!(cfg.split, SplitMode::CountPerClass(200));
    }

    #[test]
    fn typos_and_conflicts_rejected() {
        let base = Path::new(".");
        for text in [
            "cube = a\nlearning_rate = 0.1\n",
            "cube = a\nsynthetic.classes = 2\n",
            "lr = 0.1\n",
            "cube = a\ntrain_per_class = 3\ntrain_fraction = 0.5\n",
            "cube = a\nwindow = 4\n",
        ] {
            assert!(
                matches!(RunConfig::parse(text, base), Err(CliError::Config(_))),
                "{text}"
            );
        }
    }
}
