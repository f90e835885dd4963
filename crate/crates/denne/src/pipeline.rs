//! Experiment driver: a single TOML config describes dataset, noise,
//! model, walks and evaluation; each stage reads its inputs from the
//! output directory and writes deterministic artifacts back into it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval;
use crate::files;
use crate::graph::{load_edge_list, load_labels, write_edge_list, Graph, LabelTable};
use crate::model::{
    CommunityConfig, DegreeConfig, Embeddings, LrSchedule, Model, ModelConfig, NoiseMode,
};
use crate::objective::train::{train, TrainReport};
use crate::sampling::WalkConfig;
use crate::synth::{
    calibrate_geometric_radius, calibrate_partition_probs, gen_geometric, gen_partition,
    inject_noise, GeometricSpec, NoiseSpec, PartitionSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Basic,
    Com,
    Deg,
    Adap,
    ComDeg,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::Com => "com",
            Variant::Deg => "deg",
            Variant::Adap => "adap",
            Variant::ComDeg => "com-deg",
        }
    }

    fn uses_community(&self) -> bool {
        matches!(self, Variant::Com | Variant::ComDeg)
    }

    fn uses_degree(&self) -> bool {
        matches!(self, Variant::Deg | Variant::ComDeg)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        match s {
            "basic" => Ok(Variant::Basic),
            "com" => Ok(Variant::Com),
            "deg" => Ok(Variant::Deg),
            "adap" => Ok(Variant::Adap),
            "com-deg" | "com+deg" => Ok(Variant::ComDeg),
            other => Err(Error::Config(format!(
                "unknown variant {other:?}; expected basic|com|deg|adap|com-deg"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_mix_ratio() -> f64 {
    0.1
}

/// Dataset source: a synthetic generator spec or file paths. Generator
/// densities can be given directly or calibrated from a target edge
/// count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetConfig {
    Geometric {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_edges: Option<usize>,
    },
    Partition {
        n: usize,
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p_in: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p_out: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_edges: Option<usize>,
        #[serde(default = "default_mix_ratio")]
        mix_ratio: f64,
    },
    Files {
        edges: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<PathBuf>,
    },
}

impl DatasetConfig {
    pub fn name(&self) -> String {
        match self {
            DatasetConfig::Geometric { .. } => "geometric".into(),
            DatasetConfig::Partition { .. } => "partition".into(),
            DatasetConfig::Files { edges, .. } => edges
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "files".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub add_ratio: f64,
    #[serde(default)]
    pub remove_ratio: f64,
}

/// Model hyperparameters; defaults mirror `ModelConfig::default`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub dim: usize,
    pub split: Option<usize>,
    pub alpha_u: f64,
    pub alpha_e: f64,
    pub alpha_com: f64,
    pub alpha_deg: f64,
    pub init_scale: f64,
    pub clamp_delta: f64,
    pub negatives: usize,
    pub neg_exponent: f64,
    pub lr0: f64,
    pub epochs: usize,
    /// Community count for the com variants; defaults to the partition
    /// group count when the dataset provides one.
    pub communities: Option<usize>,
    pub sigma_c2: f64,
    pub sigma_w2: f64,
    /// Freeze community memberships to the dataset's ground-truth groups
    /// when available.
    pub use_memberships: bool,
    pub lambda: f64,
    /// Epochs trained before the noise table is released.
    pub noise_warmup_epochs: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let base = ModelConfig::default();
        ModelSection {
            dim: base.dim,
            split: None,
            alpha_u: base.alpha_u,
            alpha_e: base.alpha_e,
            alpha_com: base.alpha_com,
            alpha_deg: base.alpha_deg,
            init_scale: base.init_scale,
            clamp_delta: base.clamp_delta,
            negatives: base.negatives,
            neg_exponent: base.neg_exponent,
            lr0: base.lr0,
            epochs: 5,
            communities: None,
            sigma_c2: 1.0,
            sigma_w2: 1.0,
            use_memberships: true,
            lambda: DegreeConfig::default().lambda,
            noise_warmup_epochs: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkSection {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
}

impl Default for WalkSection {
    fn default() -> Self {
        let base = WalkConfig::default();
        WalkSection {
            walks_per_node: base.walks_per_node,
            walk_length: base.walk_length,
            window: base.window,
        }
    }
}

fn default_fractions() -> Vec<f64> {
    vec![0.3, 0.5, 0.7]
}

fn default_nc_seeds() -> u64 {
    20
}

fn default_ratios() -> Vec<f64> {
    (1..=11).map(|i| i as f64 / 1000.0).collect()
}

fn default_l2() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Training fractions for node classification.
    pub fractions: Vec<f64>,
    /// Number of random splits per fraction.
    pub nc_seeds: u64,
    /// Pair-count ratios for graph reconstruction.
    pub ratios: Vec<f64>,
    /// Ridge weight of the classifier.
    pub l2: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            fractions: default_fractions(),
            nc_seeds: default_nc_seeds(),
            ratios: default_ratios(),
            l2: default_l2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub variant: Variant,
    pub dataset: DatasetConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub walk: WalkSection,
    #[serde(default)]
    pub eval: EvalSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            walks_per_node: self.walk.walks_per_node,
            walk_length: self.walk.walk_length,
            window: self.walk.window,
            seed: self.seed,
        }
    }

    fn model_config(&self, groups: Option<&[u32]>) -> Result<ModelConfig> {
        let m = &self.model;
        let mut problems = Vec::new();
        if m.dim == 0 {
            problems.push("model.dim must be positive");
        }
        if m.epochs == 0 {
            problems.push("model.epochs must be positive");
        }
        if m.lr0 <= 0.0 {
            problems.push("model.lr0 must be positive");
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        let community = if self.variant.uses_community() {
            let memberships = if m.use_memberships { groups.map(<[u32]>::to_vec) } else { None };
            let communities = match (m.communities, &memberships) {
                (Some(k), _) => k,
                (None, Some(g)) => g.iter().max().map(|&x| x as usize + 1).unwrap_or(0),
                (None, None) => {
                    return Err(Error::Config(
                        "model.communities is required for the com variant without ground-truth groups".into(),
                    ))
                }
            };
            Some(CommunityConfig {
                communities,
                sigma_c2: m.sigma_c2,
                sigma_w2: m.sigma_w2,
                memberships,
            })
        } else {
            None
        };
        let degree = self
            .variant
            .uses_degree()
            .then_some(DegreeConfig { lambda: m.lambda });
        let noise_mode = if self.variant == Variant::Adap {
            NoiseMode::default_adaptive()
        } else {
            NoiseMode::Gaussian
        };
        Ok(ModelConfig {
            dim: m.dim,
            split: m.split,
            community,
            degree,
            noise_mode,
            alpha_u: m.alpha_u,
            alpha_e: m.alpha_e,
            alpha_com: m.alpha_com,
            alpha_deg: m.alpha_deg,
            init_scale: m.init_scale,
            clamp_delta: m.clamp_delta,
            negatives: m.negatives,
            neg_exponent: m.neg_exponent,
            lr0: m.lr0,
            lr_schedule: LrSchedule::Linear,
            freeze_noise: false,
            noise_warmup_epochs: m.noise_warmup_epochs,
            seed: self.seed,
        })
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_manifest(config: &ExperimentConfig) -> Result<()> {
    let mut w = create(&config.path("manifest.toml"))?;
    w.write_all(config.to_toml()?.as_bytes())?;
    Ok(())
}

/// Generate the configured synthetic dataset into the output directory:
/// `edges.txt`, a positions or groups sidecar, and a manifest echoing the
/// resolved config.
pub fn run_synth(config: &ExperimentConfig) -> Result<Graph> {
    std::fs::create_dir_all(&config.output_dir)?;
    let graph = match &config.dataset {
        DatasetConfig::Geometric {
            n,
            radius,
            target_edges,
        } => {
            let radius = match (radius, target_edges) {
                (Some(r), _) => *r,
                (None, Some(target)) => calibrate_geometric_radius(*n, *target)?,
                (None, None) => {
                    return Err(Error::Config(
                        "geometric dataset needs radius or target_edges".into(),
                    ))
                }
            };
            let spec = GeometricSpec {
                n: *n,
                radius,
                seed: config.seed,
            };
            let (graph, points) = gen_geometric(&spec)?;
            files::write_positions(&mut create(&config.path("positions.txt"))?, &points)?;
            graph
        }
        DatasetConfig::Partition {
            n,
            k,
            p_in,
            p_out,
            target_edges,
            mix_ratio,
        } => {
            let (p_in, p_out) = match (p_in, p_out, target_edges) {
                (Some(a), Some(b), _) => (*a, *b),
                (None, None, Some(target)) => {
                    calibrate_partition_probs(*n, *k, *target, *mix_ratio)?
                }
                _ => {
                    return Err(Error::Config(
                        "partition dataset needs both p_in and p_out, or target_edges".into(),
                    ))
                }
            };
            let spec = PartitionSpec {
                n: *n,
                k: *k,
                p_in,
                p_out,
                seed: config.seed,
            };
            let (graph, groups) = gen_partition(&spec)?;
            files::write_groups(&mut create(&config.path("groups.txt"))?, &groups)?;
            graph
        }
        DatasetConfig::Files { .. } => {
            return Err(Error::Config(
                "dataset is file-backed; nothing to synthesize".into(),
            ))
        }
    };
    write_edge_list(&mut create(&config.path("edges.txt"))?, &graph)?;
    write_manifest(config)?;
    Ok(graph)
}

/// The pristine graph: the synthesized edge list for generator datasets,
/// the configured edge file otherwise.
pub fn load_pristine(config: &ExperimentConfig) -> Result<Graph> {
    let path = match &config.dataset {
        DatasetConfig::Files { edges, .. } => edges.clone(),
        _ => config.path("edges.txt"),
    };
    let (graph, _) = load_edge_list(open(&path)?)?;
    Ok(graph)
}

/// The label table, when the dataset has one: partition groups or the
/// configured label file.
pub fn load_label_table(config: &ExperimentConfig, n: usize) -> Result<Option<LabelTable>> {
    let path = match &config.dataset {
        DatasetConfig::Files { labels, .. } => match labels {
            Some(p) => p.clone(),
            None => return Ok(None),
        },
        DatasetConfig::Partition { .. } => config.path("groups.txt"),
        DatasetConfig::Geometric { .. } => return Ok(None),
    };
    Ok(Some(load_labels(open(&path)?, n)?))
}

/// Inject the configured noise into the pristine graph, writing
/// `observed.txt` and `delta.txt`.
pub fn run_perturb(config: &ExperimentConfig) -> Result<Graph> {
    let section = config
        .noise
        .ok_or_else(|| Error::Config("no [noise] section in config".into()))?;
    let pristine = load_pristine(config)?;
    let spec = NoiseSpec {
        add_ratio: section.add_ratio,
        remove_ratio: section.remove_ratio,
        seed: config.seed,
    };
    let (observed, delta) = inject_noise(&pristine, &spec)?;
    std::fs::create_dir_all(&config.output_dir)?;
    write_edge_list(&mut create(&config.path("observed.txt"))?, &observed)?;
    files::write_delta(&mut create(&config.path("delta.txt"))?, &delta)?;
    Ok(observed)
}

/// The graph training and evaluation observe: the perturbed edge list if
/// a perturb stage ran, else the pristine graph.
pub fn load_observed(config: &ExperimentConfig) -> Result<Graph> {
    let observed = config.path("observed.txt");
    if observed.exists() {
        let (graph, _) = load_edge_list(open(&observed)?)?;
        Ok(graph)
    } else {
        load_pristine(config)
    }
}

/// Train the configured variant on the observed graph; writes
/// `embeddings.txt`, `noise.txt`, `train_report.csv` and the manifest.
pub fn run_train(config: &ExperimentConfig) -> Result<TrainReport> {
    let graph = load_observed(config)?;
    let groups = match &config.dataset {
        DatasetConfig::Partition { .. } if config.path("groups.txt").exists() => Some(
            files::read_groups(open(&config.path("groups.txt"))?, graph.n())?,
        ),
        _ => None,
    };
    let model_config = config.model_config(groups.as_deref())?;
    let mut model = Model::init(model_config, &graph)?;
    let report = train(&mut model, &graph, &config.walk_config(), config.model.epochs)?;
    std::fs::create_dir_all(&config.output_dir)?;
    files::write_embeddings(&mut create(&config.path("embeddings.txt"))?, &model.embeddings())?;
    files::write_noise_dump(&mut create(&config.path("noise.txt"))?, &model)?;
    files::write_train_report(&mut create(&config.path("train_report.csv"))?, &report)?;
    write_manifest(config)?;
    Ok(report)
}

fn load_embeddings(config: &ExperimentConfig) -> Result<Embeddings> {
    files::read_embeddings(open(&config.path("embeddings.txt"))?)
}

/// Node classification: one (macro, micro) F1 row pair per fraction and
/// split seed, plus mean/std aggregate rows. Writes `metrics_nc.csv`.
pub fn run_eval_nc(config: &ExperimentConfig) -> Result<Vec<files::MetricRow>> {
    let embeddings = load_embeddings(config)?;
    let labels = load_label_table(config, embeddings.n())?
        .ok_or_else(|| Error::Data("dataset has no labels for classification".into()))?;
    if labels.labeled_nodes().is_empty() {
        return Err(Error::Data("label table is empty".into()));
    }
    let mut rows = Vec::new();
    for &fraction in &config.eval.fractions {
        for split_seed in 0..config.eval.nc_seeds {
            let split = eval::make_split(
                &labels,
                fraction,
                config.seed.wrapping_mul(10_000).wrapping_add(split_seed),
            )?;
            let clf =
                eval::fit_classifier(&embeddings, &labels, &split, config.eval.l2, config.seed)?;
            let truth: Vec<Vec<u32>> = split
                .test_ids
                .iter()
                .map(|&v| labels.labels_of(v).to_vec())
                .collect();
            let counts: Vec<usize> = truth.iter().map(Vec::len).collect();
            let predicted = eval::predict(&clf, &embeddings, &split.test_ids, Some(&counts));
            for (metric, value) in [
                ("macro_f1", eval::macro_f1(&predicted, &truth, labels.num_labels())),
                ("micro_f1", eval::micro_f1(&predicted, &truth, labels.num_labels())),
            ] {
                rows.push(files::MetricRow {
                    variant: config.variant.to_string(),
                    dataset: config.dataset.name(),
                    key: format!("{fraction}"),
                    seed: format!("{split_seed}"),
                    metric: metric.into(),
                    value,
                });
            }
        }
    }
    rows.extend(files::aggregate_rows(&rows));
    files::write_metrics_csv(&mut create(&config.path("metrics_nc.csv"))?, &rows)?;
    Ok(rows)
}

/// Graph reconstruction against the pristine edges: precision/recall/F1
/// rows over the configured pair-count ratio grid. Writes
/// `metrics_gr.csv`.
pub fn run_eval_gr(config: &ExperimentConfig) -> Result<Vec<files::MetricRow>> {
    let embeddings = load_embeddings(config)?;
    let pristine = load_pristine(config)?;
    if pristine.n() != embeddings.n() {
        return Err(Error::Shape(format!(
            "embeddings cover {} nodes but the graph has {}",
            embeddings.n(),
            pristine.n()
        )));
    }
    let pairs = embeddings.n() * (embeddings.n() - 1) / 2;
    let mut rows = Vec::new();
    for &ratio in &config.eval.ratios {
        let k = ((ratio * pairs as f64).round() as usize).clamp(1, pairs);
        let predicted = eval::reconstruct(&embeddings, k)?;
        let (precision, recall, f1) = eval::reconstruction_f1(&predicted, &pristine);
        for (metric, value) in [
            ("precision", precision),
            ("recall", recall),
            ("reconstruction_f1", f1),
        ] {
            rows.push(files::MetricRow {
                variant: config.variant.to_string(),
                dataset: config.dataset.name(),
                key: format!("{ratio}"),
                seed: format!("{}", config.seed),
                metric: metric.into(),
                value,
            });
        }
    }
    rows.extend(files::aggregate_rows(&rows));
    files::write_metrics_csv(&mut create(&config.path("metrics_gr.csv"))?, &rows)?;
    Ok(rows)
}

/// Merge metric CSVs (dropping their aggregate rows) and recompute
/// mean/std over the union.
pub fn run_report(inputs: &[PathBuf], output: &Path) -> Result<Vec<files::MetricRow>> {
    let mut rows = Vec::new();
    for path in inputs {
        let loaded = files::read_metrics_csv(open(path)?)?;
        rows.extend(
            loaded
                .into_iter()
                .filter(|r| r.seed != "mean" && r.seed != "std"),
        );
    }
    if rows.is_empty() {
        return Err(Error::Data("no metric rows in the given inputs".into()));
    }
    rows.extend(files::aggregate_rows(&rows));
    files::write_metrics_csv(&mut create(output)?, &rows)?;
    Ok(rows)
}
