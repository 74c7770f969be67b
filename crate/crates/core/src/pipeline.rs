//! Run configuration and the discover / assess workflows.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::criteria::{composite_cost, CompositeCost, CriteriaContext, ValidationData};
use crate::data::{
    apply_scaler, engineer_features, fit_scaler, load_csv, make_assessment_split, make_discovery_split,
    AssessmentSizes, DiscoverySizes, LabeledDataset,
};
use crate::error::{Error, Result};
use crate::genome::{identity_in, KernelGenome, SearchSpace};
use crate::kernels::{cross_gram, gram};
use crate::ocsvm::{accuracy, decision_scores, predict, train_ocsvm_with, SolverOptions};
use crate::optimizers::{
    read_trace_jsonl, run_optimizer, CompositeObjective, EvaluationCache, Evaluator, OptimizationTrace,
    OptimizerConfig, TraceHeader,
};
use crate::pauli::default_threshold;
use crate::roc::{mean_std, roc_auc};

/// Largest DLA threshold used when none is configured.
pub const DEFAULT_DLA_CAP: usize = 4095;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    /// Feature pairs `(i, j)` appended as `(x_i − π)(x_j − π)` after scaling.
    pub engineered_pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceConfig {
    /// Qubit count; defaults to the number of raw features.
    pub n: Option<usize>,
    pub m: usize,
    pub b: usize,
    /// Explicit bandwidth table overriding `i/b`.
    pub bandwidths: Option<Vec<f64>>,
    /// Starting genome; defaults to the identity genome.
    pub initial: Option<PathBuf>,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self {
            n: None,
            m: 8,
            b: 10,
            bandwidths: None,
            initial: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriteriaConfig {
    pub weights: BTreeMap<String, f64>,
    pub nu: f64,
    pub dla_threshold: Option<usize>,
    pub expressivity_samples: usize,
    pub task_model_cutoff: usize,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self {
            weights: BTreeMap::from([("validation".to_string(), 1.0)]),
            nu: 0.1,
            dla_threshold: None,
            expressivity_samples: 200,
            task_model_cutoff: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub split: u64,
    pub optimizer: u64,
    pub expressivity: u64,
    pub assessment: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output: Option<PathBuf>,
    pub data: DataConfig,
    pub space: SpaceConfig,
    pub optimizer: OptimizerConfig,
    pub criteria: CriteriaConfig,
    pub discovery: DiscoverySizes,
    pub assessment: AssessmentSizes,
    pub seeds: Seeds,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.space.b == 0 && self.space.bandwidths.is_none() {
            return Err(Error::Config("space.b must be >= 1".into()));
        }
        if !(self.criteria.nu > 0.0 && self.criteria.nu < 1.0) {
            return Err(Error::Config(format!("nu = {} outside (0, 1)", self.criteria.nu)));
        }
        for (name, w) in &self.criteria.weights {
            name.parse::<crate::criteria::CriterionName>()?;
            if !w.is_finite() {
                return Err(Error::Config(format!("weight of {name} is not finite")));
            }
        }
        Ok(())
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory configured".into()))
    }

    fn dataset(&self) -> Result<LabeledDataset> {
        let path = self
            .data
            .path
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset path configured".into()))?;
        load_csv(path)
    }

    /// Search space for a dataset with `d` model features and `raw` raw features.
    pub fn search_space(&self, raw: usize, d: usize) -> SearchSpace {
        let n = self.space.n.unwrap_or(raw);
        match &self.space.bandwidths {
            Some(bw) => SearchSpace::with_bandwidths(n, self.space.m, d, bw.clone()),
            None => SearchSpace::new(n, self.space.m, d, self.space.b),
        }
    }

    pub fn dla_threshold(&self, n: usize) -> usize {
        self.criteria
            .dla_threshold
            .unwrap_or_else(|| default_threshold(n).unwrap_or(DEFAULT_DLA_CAP).min(DEFAULT_DLA_CAP))
    }

    fn criteria_context(&self, data: Option<ValidationData>, n: usize) -> CriteriaContext {
        CriteriaContext {
            data,
            nu: self.criteria.nu,
            dla_threshold: self.dla_threshold(n),
            expressivity_samples: self.criteria.expressivity_samples,
            expressivity_seed: self.seeds.expressivity,
            task_model_cutoff: self.criteria.task_model_cutoff,
        }
    }
}

/// Scales with statistics of `train` rows only, then appends engineered features.
fn prepare(ds: &LabeledDataset, train: &[usize], pairs: &[(usize, usize)]) -> Result<LabeledDataset> {
    let scaler = fit_scaler(&ds.rows(train))?;
    engineer_features(&apply_scaler(&scaler, ds)?, pairs)
}

fn discovery_data(config: &RunConfig) -> Result<(ValidationData, usize)> {
    let ds = config.dataset()?;
    let split = make_discovery_split(&ds, config.discovery, config.seeds.split)?;
    let prepared = prepare(&ds, &split.train, &config.data.engineered_pairs)?;
    let data = ValidationData {
        train: prepared.rows(&split.train),
        validation: prepared.rows(&split.validation),
        validation_labels: prepared.labels_of(&split.validation),
    };
    Ok((data, ds.dim()))
}

fn check_genome_fits(genome: &KernelGenome, d: usize) -> Result<()> {
    genome.ensure_valid()?;
    if genome.d != d {
        return Err(Error::Incompatible(format!(
            "genome reads {} features, the prepared dataset has {d}",
            genome.d
        )));
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoverySummary {
    pub optimizer: String,
    pub evaluations: usize,
    pub budget: usize,
    pub best_cost: f64,
    pub best_flat: Vec<u32>,
    pub best_criteria: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

#[derive(Debug)]
pub struct DiscoveryOutcome {
    pub trace: OptimizationTrace,
    pub best: KernelGenome,
    pub summary: DiscoverySummary,
}

/// Runs the configured optimizer on a discovery split and writes
/// `config.toml`, `trace.jsonl`, `best.qkg` and `summary.json` to the
/// output directory. The trace is written even if the search fails.
pub fn run_discover(config: &RunConfig, resume: Option<&Path>) -> Result<DiscoveryOutcome> {
    config.validate()?;
    let out = config.output_dir()?.to_path_buf();
    let (data, raw) = discovery_data(config)?;
    let d = data.train.first().map_or(0, Vec::len);
    let space = config.search_space(raw, d);
    let initial = match &config.space.initial {
        Some(p) => KernelGenome::read_qkg(p)?,
        None => identity_in(&space),
    };
    check_genome_fits(&initial, d)?;
    let ctx = config.criteria_context(Some(data), initial.n);
    let objective = CompositeObjective {
        weights: config.criteria.weights.clone(),
        context: ctx,
    };

    create_dir(&out)?;
    write_text(&out.join("config.toml"), &config.to_toml()?)?;

    let header = TraceHeader::new(config.optimizer.clone(), initial.space(), config.seeds.optimizer);
    let mut ev = Evaluator::new(&objective, EvaluationCache::new(), config.optimizer.budget, header);
    if let Some(path) = resume {
        let previous = read_trace_jsonl(path)?;
        let mut expected = ev.trace().header.clone();
        expected.config.budget = previous.header.config.budget;
        if previous.header != expected {
            return Err(Error::Config(format!(
                "{} was produced by a different configuration",
                path.display()
            )));
        }
        ev = ev.with_replay(&previous.evaluations);
    }
    let result = run_optimizer(&config.optimizer, &initial, &mut ev, config.seeds.optimizer);
    let misses = ev.misses();
    let trace = ev.into_trace();
    trace.save_jsonl(&out.join("trace.jsonl"))?;
    result?;

    let best_record = trace
        .best
        .clone()
        .ok_or_else(|| Error::Numerical("optimizer evaluated nothing".into()))?;
    let best = trace.best_genome()?.expect("best record present");
    best.write_qkg(&out.join("best.qkg"))?;
    let summary = DiscoverySummary {
        optimizer: config.optimizer.kind.as_str().to_string(),
        evaluations: misses,
        budget: config.optimizer.budget,
        best_cost: best_record.cost,
        best_flat: best_record.flat.clone(),
        best_criteria: trace.evaluations[best_record.index].criteria.clone(),
        notes: trace.notes.clone(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(DiscoveryOutcome { trace, best, summary })
}

/// Evaluates the configured criteria for one genome on the discovery split.
pub fn run_criteria(config: &RunConfig, genome: &KernelGenome) -> Result<CompositeCost> {
    config.validate()?;
    let data = if config.data.path.is_some() {
        let (data, _) = discovery_data(config)?;
        check_genome_fits(genome, data.train.first().map_or(0, Vec::len))?;
        Some(data)
    } else {
        None
    };
    let ctx = config.criteria_context(data, genome.n);
    composite_cost(genome, &config.criteria.weights, &ctx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub auc: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentSummary {
    pub repeats: Vec<RepeatResult>,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    /// Training Gram was constant, so every test score is identical.
    pub degenerate: bool,
    pub rho_from_bounds: bool,
    pub support_vectors: usize,
}

/// Trains an OC-SVM on the assessment training rows and scores every test
/// repeat. Writes `assessment.json` and `roc_<i>.csv` when `out` is given.
pub fn run_assess(config: &RunConfig, genome: &KernelGenome, out: Option<&Path>) -> Result<AssessmentSummary> {
    config.validate()?;
    let ds = config.dataset()?;
    let split = make_assessment_split(&ds, config.assessment, config.seeds.assessment)?;
    let prepared = prepare(&ds, &split.train, &config.data.engineered_pairs)?;
    check_genome_fits(genome, prepared.dim())?;

    let train = prepared.rows(&split.train);
    let k_train = gram(genome, &train)?;
    let model = train_ocsvm_with(Arc::new(k_train), config.criteria.nu, SolverOptions::default())?;

    if let Some(dir) = out {
        create_dir(dir)?;
        write_text(&dir.join("config.toml"), &config.to_toml()?)?;
        genome.write_qkg(&dir.join("genome.qkg"))?;
    }
    let mut repeats = Vec::with_capacity(split.tests.len());
    for (i, test) in split.tests.iter().enumerate() {
        let rows = prepared.rows(test);
        let labels = prepared.labels_of(test);
        let scores = decision_scores(&model, &cross_gram(genome, &rows, &train)?)?;
        let anomaly: Vec<f64> = scores.iter().map(|s| -s).collect();
        let curve = roc_auc(&anomaly, &labels)?;
        if let Some(dir) = out {
            let path = dir.join(format!("roc_{i}.csv"));
            let mut buf = Vec::new();
            curve.write_csv(&mut buf).map_err(|e| Error::io(&path, e))?;
            std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        }
        repeats.push(RepeatResult {
            auc: curve.auc,
            accuracy: accuracy(&predict(&scores), &labels),
        });
    }
    let aucs: Vec<f64> = repeats.iter().map(|r| r.auc).collect();
    let accs: Vec<f64> = repeats.iter().map(|r| r.accuracy).collect();
    let (auc_mean, auc_std) = mean_std(&aucs);
    let (accuracy_mean, accuracy_std) = mean_std(&accs);
    let summary = AssessmentSummary {
        repeats,
        auc_mean,
        auc_std,
        accuracy_mean,
        accuracy_std,
        degenerate: model.degenerate,
        rho_from_bounds: model.rho_from_bounds,
        support_vectors: model.support_indices.len(),
    };
    if let Some(dir) = out {
        write_json(&dir.join("assessment.json"), &summary)?;
    }
    Ok(summary)
}
