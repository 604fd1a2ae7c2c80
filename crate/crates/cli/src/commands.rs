//! The pipeline commands. Each one reads its inputs from the run directory,
//! refuses to overwrite existing outputs unless forced, snapshots the
//! resolved config and then computes.

use std::fmt;
use std::path::{Path, PathBuf};

use dmem_core::dataset::{
    extract_patches, load_cube, save_cube, split_indices, synthesize, BandStats, HyperCube,
    SplitMode, SplitSpec,
};
use dmem_core::eval::{
    adjusted_rand_index, classification_map, mcnemar, metrics, McNemarResult, Metrics, Palette,
};
use dmem_core::manifold::{assemble, model_manifolds_detailed};
use dmem_core::model::{load_checkpoint, predict, save_checkpoint, Activation};
use dmem_core::rng::{derive_seed, Stream};
use dmem_core::trainer::train as train_network;
use dmem_core::{Error, ModelParams, NetworkSpec, SubClassPartition, TrainLog};
use ndarray::Array2;
use rayon::prelude::*;

use crate::config::{DataSource, RunConfig};
use crate::error::CliError;
use crate::store::{self, PatchStore, Predictions};

pub const PATCHES: &str = "patches.bin";
pub const SPLIT: &str = "split.txt";
pub const BANDS: &str = "bands.txt";
pub const SYNTHETIC_CUBE: &str = "synthetic.hsic";
pub const PARTITION: &str = "partition.txt";
pub const CHECKPOINT: &str = "model.ckpt";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const NONFINITE_DUMP: &str = "nonfinite_batch.txt";
pub const METRICS: &str = "metrics.csv";
pub const PREDICTIONS: &str = "predictions.txt";
pub const MCNEMAR: &str = "mcnemar.csv";
pub const MAP: &str = "map.ppm";
pub const SWEEP: &str = "sweep.csv";
pub const SWEEP_FAILURES: &str = "sweep_failures.txt";

/// Rows fed to the network at once when predicting.
const PREDICT_CHUNK: usize = 4096;

pub fn snapshot_name(command: &str) -> String {
    format!("config.{command}.txt")
}

/// Creates `out`, refuses existing outputs unless `force`, then writes the
/// config snapshot.
fn begin(
    cfg: &RunConfig,
    out: &Path,
    command: &str,
    outputs: &[&str],
    force: bool,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", out.display())))?;
    let snapshot = snapshot_name(command);
    if !force {
        for name in outputs.iter().copied().chain([snapshot.as_str()]) {
            let path = out.join(name);
            if path.exists() {
                return Err(CliError::Input(format!(
                    "{} already exists; pass --force to overwrite",
                    path.display()
                )));
            }
        }
    }
    store::write(&out.join(snapshot), cfg.to_text())
}

struct Prepared {
    store: PatchStore,
    train: Vec<usize>,
    test: Vec<usize>,
    bands: BandStats,
}

fn load_prepared(out: &Path) -> Result<Prepared, CliError> {
    let store = PatchStore::from_bytes(&store::read(&out.join(PATCHES))?)?;
    let (train, test) = store::split_from_text(&store::read_text(&out.join(SPLIT))?)?;
    if train.len() + test.len() != store.patches.len() {
        return Err(CliError::Input(format!(
            "split covers {} patches but the store holds {}; rerun prepare",
            train.len() + test.len(),
            store.patches.len()
        )));
    }
    let bands = BandStats::from_text(&store::read_text(&out.join(BANDS))?)?;
    Ok(Prepared {
        store,
        train,
        test,
        bands,
    })
}

/// Normalised, flattened patches as matrix rows.
fn design(store: &PatchStore, indices: &[usize], bands: &BandStats) -> Array2<f64> {
    let dim = store.window * store.window * store.bands;
    let mut x = Array2::zeros((indices.len(), dim));
    for (mut row, &i) in x.rows_mut().into_iter().zip(indices) {
        row.assign(&ndarray::ArrayView1::from(&bands.apply(&store.patches[i])));
    }
    x
}

fn predict_indices(
    params: &ModelParams,
    store: &PatchStore,
    indices: &[usize],
    bands: &BandStats,
) -> Result<Vec<u16>, CliError> {
    let mut preds = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(PREDICT_CHUNK) {
        preds.extend(predict(params, design(store, chunk, bands).view())?);
    }
    Ok(preds)
}

fn source_cube(cfg: &RunConfig, out: &Path) -> Result<HyperCube, CliError> {
    Ok(match &cfg.data {
        DataSource::Cube(p) => load_cube(p)?,
        DataSource::Synthetic(_) => load_cube(out.join(SYNTHETIC_CUBE))?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepareReport {
    pub bands: usize,
    /// `(class, train, test)` counts.
    pub per_class: Vec<(u16, usize, usize)>,
}

impl fmt::Display for PrepareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<6} {:>7} {:>7}", "class", "train", "test")?;
        for (c, tr, te) in &self.per_class {
            writeln!(f, "{c:<6} {tr:>7} {te:>7}")?;
        }
        let tr: usize = self.per_class.iter().map(|c| c.1).sum();
        let te: usize = self.per_class.iter().map(|c| c.2).sum();
        write!(f, "{:<6} {tr:>7} {te:>7}", "total")
    }
}

pub fn prepare(cfg: &RunConfig, out: &Path, force: bool) -> Result<PrepareReport, CliError> {
    let synthetic = matches!(cfg.data, DataSource::Synthetic(_));
    let mut outputs = vec![PATCHES, SPLIT, BANDS];
    if synthetic {
        outputs.push(SYNTHETIC_CUBE);
    }
    if let DataSource::Cube(p) = &cfg.data {
        if !p.exists() {
            return Err(CliError::Input(format!(
                "cube file {} not found",
                p.display()
            )));
        }
    }
    begin(cfg, out, "prepare", &outputs, force)?;
    let root = cfg.train.seed;

    let (cube, truth) = match &cfg.data {
        DataSource::Cube(p) => (load_cube(p)?, None),
        DataSource::Synthetic(spec) => {
            let spec = dmem_core::dataset::SyntheticSpec {
                seed: derive_seed(root, Stream::Synthesis),
                ..spec.clone()
            };
            let data = synthesize(&spec)?;
            let values = data.points.iter().flatten().map(|&v| v as f32).collect();
            let cube = HyperCube::new(
                data.points.len(),
                1,
                data.dim,
                spec.num_classes,
                values,
                data.labels.clone(),
            )?;
            save_cube(&cube, out.join(SYNTHETIC_CUBE))?;
            (cube, Some(data.subclusters))
        }
    };
    let patches = extract_patches(&cube, cfg.window)?;
    let labels: Vec<u16> = patches.iter().map(|p| p.label).collect();
    let split_seed = derive_seed(root, Stream::Split);
    let split = split_indices(
        &labels,
        &SplitSpec {
            mode: cfg.split,
            seed: split_seed,
        },
    )?;
    let bands = BandStats::fit(split.train.iter().map(|&i| &patches[i]))?;

    let mut per_class: Vec<(u16, usize, usize)> =
        (1..=cube.num_classes()).map(|c| (c, 0, 0)).collect();
    for &i in &split.train {
        per_class[labels[i] as usize - 1].1 += 1;
    }
    for &i in &split.test {
        per_class[labels[i] as usize - 1].2 += 1;
    }
    per_class.retain(|c| c.1 + c.2 > 0);

    // Synthetic cubes are one column wide, so the centre row is the sample.
    let subclusters = truth.map(|t| patches.iter().map(|p| t[p.center_row]).collect());
    let store = PatchStore {
        window: cfg.window,
        bands: cube.bands(),
        num_classes: cube.num_classes(),
        patches,
        subclusters,
    };
    let mode = match cfg.split {
        SplitMode::CountPerClass(n) => format!("train_per_class={n}"),
        SplitMode::FractionPerClass(x) => format!("train_fraction={x}"),
    };
    store::write(&out.join(PATCHES), store.to_bytes())?;
    store::write(
        &out.join(SPLIT),
        store::split_to_text(
            &split.train,
            &split.test,
            &format!("{mode} seed={split_seed}"),
        ),
    )?;
    store::write(&out.join(BANDS), bands.to_text())?;
    Ok(PrepareReport {
        bands: cube.bands(),
        per_class,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSummary {
    pub class: u16,
    pub samples: usize,
    pub components: usize,
    pub subclasses: usize,
    pub max_diameter: f64,
    pub euclidean_fallback: bool,
}

#[derive(Debug, Clone)]
pub struct ClusterReport {
    pub classes: Vec<ClassSummary>,
    pub partition: SubClassPartition,
    /// Agreement with planted sub-clusters, when the data has them.
    pub ari: Option<f64>,
    pub warnings: Vec<String>,
}

impl fmt::Display for ClusterReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<6} {:>7} {:>10} {:>10} {:>12}",
            "class", "samples", "components", "subclasses", "diameter"
        )?;
        for c in &self.classes {
            write!(
                f,
                "{:<6} {:>7} {:>10} {:>10} {:>12.4}",
                c.class, c.samples, c.components, c.subclasses, c.max_diameter
            )?;
            if c.euclidean_fallback {
                write!(f, "  (components joined by Euclidean distance)")?;
            }
            writeln!(f)?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        match self.ari {
            Some(a) => write!(f, "ARI vs planted sub-clusters: {a:.6}"),
            None => write!(f, "no planted sub-clusters to compare against"),
        }
    }
}

pub fn cluster(cfg: &RunConfig, out: &Path, force: bool) -> Result<ClusterReport, CliError> {
    let prepared = load_prepared(out)?;
    begin(cfg, out, "cluster", &[PARTITION], force)?;
    let Prepared {
        store,
        train,
        bands,
        ..
    } = prepared;
    let points: Vec<Vec<f64>> = train
        .iter()
        .map(|&i| bands.apply(&store.patches[i]))
        .collect();
    let labels: Vec<u16> = train.iter().map(|&i| store.patches[i].label).collect();
    let params = cfg.train.manifold;
    let models = model_manifolds_detailed(&points, &labels, params)?;

    let mut classes = Vec::new();
    let mut warnings = Vec::new();
    for m in &models {
        let p = &m.partition;
        classes.push(ClassSummary {
            class: p.class_id,
            samples: p.samples.len(),
            components: p.clustering.components,
            subclasses: p.clustering.num_subclasses,
            max_diameter: p.max_diameter,
            euclidean_fallback: p.clustering.euclidean_fallback,
        });
        warnings.extend(
            p.clustering
                .warnings
                .iter()
                .map(|w| format!("class {}: {w}", p.class_id)),
        );
        if cfg.dump_geodesics {
            if let Some(g) = &m.geodesic {
                let path = out.join(format!("geodesic_class{}.bin", p.class_id));
                if path.exists() && !force {
                    return Err(CliError::Input(format!(
                        "{} already exists; pass --force to overwrite",
                        path.display()
                    )));
                }
                g.save(&path)?;
            }
        }
    }
    let partition = assemble(
        params,
        points.len(),
        models.into_iter().map(|m| m.partition).collect(),
    );
    store::write(&out.join(PARTITION), partition.to_text(&train))?;

    let ari = match &store.subclusters {
        Some(truth) => {
            let planted: Vec<(u16, u16)> = train
                .iter()
                .map(|&i| (store.patches[i].label, truth[i]))
                .collect();
            Some(adjusted_rand_index(partition.tags(), &planted)?)
        }
        None => None,
    };
    Ok(ClusterReport {
        classes,
        partition,
        ari,
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub spec: NetworkSpec,
    pub log: TrainLog,
}

impl fmt::Display for TrainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for w in &self.log.warnings {
            writeln!(f, "warning: {w}")?;
        }
        write!(f, "trained {} parameters", self.spec.parameter_count())?;
        if let Some(last) = self.log.rows.last() {
            write!(
                f,
                "; iteration {}: ce={:.6} l0={:.6} ld={:.6} total={:.6}",
                last.iter, last.ce, last.l0, last.ld, last.total
            )?;
        }
        Ok(())
    }
}

pub fn train(cfg: &RunConfig, out: &Path, force: bool) -> Result<TrainReport, CliError> {
    let prepared = load_prepared(out)?;
    let (ids, partition) = SubClassPartition::from_text(&store::read_text(&out.join(PARTITION))?)?;
    if ids != prepared.train {
        return Err(CliError::Input(
            "partition does not cover the training split; rerun cluster".into(),
        ));
    }
    begin(cfg, out, "train", &[CHECKPOINT, TRAIN_LOG], force)?;
    let Prepared {
        store,
        train,
        bands,
        ..
    } = prepared;
    let x = design(&store, &train, &bands);
    let labels: Vec<u16> = train.iter().map(|&i| store.patches[i].label).collect();
    let spec = NetworkSpec {
        input_dim: x.ncols(),
        hidden_dims: cfg.hidden.clone(),
        feature_dim: cfg.feature_dim,
        num_classes: store.num_classes as usize,
        activation: Activation::Relu,
        init_seed: derive_seed(cfg.train.seed, Stream::Init),
    };
    let (params, log) = match train_network(x.view(), &labels, partition.tags(), &spec, &cfg.train)
    {
        Ok(r) => r,
        Err(e @ Error::NonFiniteLoss { .. }) => {
            if let Error::NonFiniteLoss {
                iteration,
                ce,
                l0,
                ld,
                batch,
            } = &e
            {
                let mut dump =
                    format!("# iteration={iteration} ce={ce} l0={l0} ld={ld}\n# patch_index\n");
                for &pos in batch {
                    dump.push_str(&format!("{}\n", train[pos]));
                }
                store::write(&out.join(NONFINITE_DUMP), dump)?;
            }
            return Err(CliError::Numeric(format!(
                "{e}; batch written to {}",
                out.join(NONFINITE_DUMP).display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    save_checkpoint(out.join(CHECKPOINT), &spec, &params)?;
    store::write(&out.join(TRAIN_LOG), log.to_csv())?;
    Ok(TrainReport { spec, log })
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub metrics: Metrics,
    pub predictions: Predictions,
    pub mcnemar: Option<McNemarResult>,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.metrics)?;
        if let Some(m) = &self.mcnemar {
            write!(
                f,
                "\nMcNemar vs comparison run: Z={:.4} (f_ij={}, f_ji={}){}",
                m.statistic,
                m.f_ij,
                m.f_ji,
                if m.significant {
                    ", significant at 5%"
                } else {
                    ""
                }
            )?;
        }
        Ok(())
    }
}

fn check_checkpoint(spec: &NetworkSpec, store: &PatchStore) -> Result<(), CliError> {
    let dim = store.window * store.window * store.bands;
    if spec.input_dim != dim || spec.num_classes < store.num_classes as usize {
        return Err(CliError::Input(format!(
            "checkpoint/spec mismatch: network takes {} inputs and {} classes, data has {dim} and {}",
            spec.input_dim, spec.num_classes, store.num_classes
        )));
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig, out: &Path, force: bool) -> Result<EvalReport, CliError> {
    let prepared = load_prepared(out)?;
    let (spec, params) = load_checkpoint(out.join(CHECKPOINT))?;
    check_checkpoint(&spec, &prepared.store)?;
    if prepared.test.is_empty() {
        return Err(CliError::Input("the split has no test samples".into()));
    }
    let other = match &cfg.compare_predictions {
        Some(p) => Some(Predictions::from_text(&store::read_text(p)?)?),
        None => None,
    };
    let mut outputs = vec![METRICS, PREDICTIONS];
    if other.is_some() {
        outputs.push(MCNEMAR);
    }
    begin(cfg, out, "evaluate", &outputs, force)?;
    let Prepared {
        store, test, bands, ..
    } = prepared;
    let predicted = predict_indices(&params, &store, &test, &bands)?;
    let labels: Vec<u16> = test.iter().map(|&i| store.patches[i].label).collect();
    let m = metrics(&predicted, &labels)?;
    let predictions = Predictions {
        indices: test,
        predicted,
        labels,
    };
    store::write(&out.join(METRICS), m.to_csv())?;
    store::write(&out.join(PREDICTIONS), predictions.to_text())?;

    let mcnemar = match other {
        Some(o) => {
            if o.indices != predictions.indices || o.labels != predictions.labels {
                return Err(CliError::Input(
                    "comparison predictions cover a different test set".into(),
                ));
            }
            let r = mcnemar(&predictions.predicted, &o.predicted, &predictions.labels)?;
            store::write(
                &out.join(MCNEMAR),
                format!(
                    "f_ij,f_ji,statistic,significant\n{},{},{},{}\n",
                    r.f_ij, r.f_ji, r.statistic, r.significant
                ),
            )?;
            Some(r)
        }
        None => None,
    };
    Ok(EvalReport {
        metrics: m,
        predictions,
        mcnemar,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapReport {
    pub path: PathBuf,
    pub height: usize,
    pub width: usize,
    pub predicted_pixels: usize,
}

impl fmt::Display for MapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "wrote {}x{} map with {} predicted pixels to {}",
            self.width,
            self.height,
            self.predicted_pixels,
            self.path.display()
        )
    }
}

pub fn map(cfg: &RunConfig, out: &Path, force: bool) -> Result<MapReport, CliError> {
    let prepared = load_prepared(out)?;
    let (spec, params) = load_checkpoint(out.join(CHECKPOINT))?;
    check_checkpoint(&spec, &prepared.store)?;
    let cube = source_cube(cfg, out)?;
    let palette = match &cfg.palette {
        Some(p) => Palette::load(p)?,
        None => Palette::default_for(cube.num_classes() as usize),
    };
    begin(cfg, out, "map", &[MAP], force)?;
    let window = prepared.store.window;
    let all = PatchStore {
        window,
        bands: cube.bands(),
        num_classes: cube.num_classes(),
        patches: extract_patches(&cube, window)?,
        subclusters: None,
    };
    let indices: Vec<usize> = (0..all.patches.len()).collect();
    let preds = predict_indices(&params, &all, &indices, &prepared.bands)?;
    let image = classification_map(&cube, &preds, &palette)?;
    let path = out.join(MAP);
    store::write(&path, image)?;
    Ok(MapReport {
        path,
        height: cube.height(),
        width: cube.width(),
        predicted_pixels: preds.len(),
    })
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub k: usize,
    pub b: usize,
    pub delta: f64,
    pub lambda: f64,
    pub runs: Vec<(u64, Metrics)>,
    pub failures: Vec<(u64, String)>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl SweepCell {
    fn name(&self) -> String {
        format!(
            "k{}_b{}_delta{}_lambda{}",
            self.k, self.b, self.delta, self.lambda
        )
    }

    /// `(mean, sample SD)` of OA, AA and kappa over the successful runs.
    pub fn summary(&self) -> [(f64, f64); 3] {
        let pick = |f: fn(&Metrics) -> f64| {
            mean_sd(&self.runs.iter().map(|(_, m)| f(m)).collect::<Vec<_>>())
        };
        [pick(|m| m.oa), pick(|m| m.aa), pick(|m| m.kappa)]
    }
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from(
        "k,b,delta,lambda,runs,failures,oa_mean,oa_sd,aa_mean,aa_sd,kappa_mean,kappa_sd\n",
    );
    for c in cells {
        let [oa, aa, kappa] = c.summary();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.k,
            c.b,
            c.delta,
            c.lambda,
            c.runs.len(),
            c.failures.len(),
            oa.0,
            oa.1,
            aa.0,
            aa.1,
            kappa.0,
            kappa.1
        ));
    }
    out
}

/// Runs prepare, cluster, train and evaluate for one seed of a cell.
pub fn run_pipeline(cfg: &RunConfig, out: &Path, force: bool) -> Result<EvalReport, CliError> {
    prepare(cfg, out, force)?;
    cluster(cfg, out, force)?;
    train(cfg, out, force)?;
    evaluate(cfg, out, force)
}

/// Every grid cell is run for every seed in its own directory under
/// `out/sweep`. A failed run is recorded and the sweep continues. Cell
/// directories are overwritten; `force` only guards the aggregate files.
pub fn sweep(cfg: &RunConfig, out: &Path, force: bool) -> Result<Vec<SweepCell>, CliError> {
    begin(cfg, out, "sweep", &[SWEEP, SWEEP_FAILURES], force)?;
    let cells: Vec<SweepCell> = cfg
        .grid()
        .into_par_iter()
        .map(|(k, b, delta, lambda)| {
            let mut cell = SweepCell {
                k,
                b,
                delta,
                lambda,
                runs: Vec::new(),
                failures: Vec::new(),
            };
            for &seed in &cfg.sweep.seeds {
                let mut run = cfg.clone();
                run.train.seed = seed;
                run.train.manifold.k = k;
                run.train.manifold.b = b;
                run.train.loss.delta = delta;
                run.train.lambda = lambda;
                run.compare_predictions = None;
                let dir = out
                    .join("sweep")
                    .join(cell.name())
                    .join(format!("seed{seed}"));
                match run_pipeline(&run, &dir, true) {
                    Ok(r) => cell.runs.push((seed, r.metrics)),
                    Err(e) => cell.failures.push((seed, e.to_string())),
                }
            }
            cell
        })
        .collect();
    store::write(&out.join(SWEEP), sweep_csv(&cells))?;
    let mut failures = String::from("# cell seed message\n");
    for c in &cells {
        for (seed, msg) in &c.failures {
            failures.push_str(&format!("{} {seed} {}\n", c.name(), msg.replace('\n', " ")));
        }
    }
    store::write(&out.join(SWEEP_FAILURES), failures)?;
    Ok(cells)
}
