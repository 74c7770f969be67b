//! Criteria that score a kernel genome, and their weighted combination.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::genome::KernelGenome;
use crate::kernels::{cross_gram, gram, GramMatrix};
use crate::ocsvm::{accuracy, decision_scores, predict, train_ocsvm};
use crate::pauli::dla_closure;
use crate::statevector::encode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub name: String,
    pub value: f64,
    pub auxiliary: BTreeMap<String, f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl CriterionReport {
    fn new(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            auxiliary: BTreeMap::new(),
            wall_time: Duration::ZERO,
        }
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.auxiliary.insert(key.to_string(), v);
        self
    }

    pub fn is_flagged(&self) -> bool {
        self.auxiliary.get("degenerate").is_some_and(|&v| v != 0.0)
    }
}

fn check_square_labels(k: &GramMatrix, y: &[f64]) -> Result<()> {
    if !k.is_square() {
        return Err(Error::dim(k.rows(), k.cols()));
    }
    if y.len() != k.rows() {
        return Err(Error::dim(k.rows(), y.len()));
    }
    Ok(())
}

fn frobenius_alignment(k: &[f64], t: &[f64]) -> Result<f64> {
    let inner: f64 = k.iter().zip(t).map(|(a, b)| a * b).sum();
    let nk = k.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nt = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nk <= 1e-12 || nt <= 1e-12 {
        return Err(Error::Numerical("alignment undefined for a zero matrix".into()));
    }
    Ok((inner / (nk * nt)).clamp(-1.0, 1.0))
}

fn outer(y: &[f64]) -> Vec<f64> {
    y.iter().flat_map(|a| y.iter().map(move |b| a * b)).collect()
}

/// Kernel-target alignment `⟨K, yyᵀ⟩_F / (‖K‖_F ‖yyᵀ‖_F)`.
pub fn kta(k: &GramMatrix, y: &[f64]) -> Result<f64> {
    check_square_labels(k, y)?;
    frobenius_alignment(k.values(), &outer(y))
}

/// `H A H` with `H = I − 11ᵀ/m`.
fn center(a: &[f64], m: usize) -> Vec<f64> {
    let mf = m as f64;
    let row_mean: Vec<f64> = (0..m).map(|i| a[i * m..(i + 1) * m].iter().sum::<f64>() / mf).collect();
    let col_mean: Vec<f64> = (0..m).map(|j| (0..m).map(|i| a[i * m + j]).sum::<f64>() / mf).collect();
    let total = row_mean.iter().sum::<f64>() / mf;
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            out[i * m + j] = a[i * m + j] - row_mean[i] - col_mean[j] + total;
        }
    }
    out
}

/// Alignment after centering both `K` and `yyᵀ`.
pub fn centered_kta(k: &GramMatrix, y: &[f64]) -> Result<f64> {
    check_square_labels(k, y)?;
    let m = y.len();
    let kc = center(k.values(), m);
    let yc = center(&outer(y), m);
    let scale = k.values().iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let norm = kc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 1e-12 * scale * m as f64 {
        return Err(Error::Numerical("centered Gram matrix is numerically zero".into()));
    }
    frobenius_alignment(&kc, &yc)
}

/// Per-eigenvalue target power of a Gram matrix, eigenvalues descending.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralPower {
    pub eigenvalues: Vec<f64>,
    pub power: Vec<f64>,
}

/// Eigendecomposes `K`, clips eigenvalues at 0 and computes
/// `power_j = λ_j (v_j·y)²`. Within a group of equal eigenvalues the group's
/// total power is spread uniformly, which makes the result basis-invariant.
pub fn spectral_power(k: &GramMatrix, y: &[f64]) -> Result<SpectralPower> {
    check_square_labels(k, y)?;
    let m = y.len();
    let eig = nalgebra::SymmetricEigen::new(k.to_dmatrix());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambdas: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j].max(0.0)).collect();
    let proj2: Vec<f64> = order
        .iter()
        .map(|&j| {
            let v = eig.eigenvectors.column(j);
            let dot: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
            dot * dot
        })
        .collect();

    let scale = lambdas.first().copied().unwrap_or(0.0).max(1.0);
    let tie = 1e-9 * scale;
    let mut power = vec![0.0; m];
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && (lambdas[start] - lambdas[end]).abs() <= tie {
            end += 1;
        }
        let group_lambda = lambdas[start..end].iter().sum::<f64>() / (end - start) as f64;
        let group_power = group_lambda * proj2[start..end].iter().sum::<f64>();
        for p in &mut power[start..end] {
            *p = group_power / (end - start) as f64;
        }
        start = end;
    }
    Ok(SpectralPower {
        eigenvalues: lambdas,
        power,
    })
}

/// Fraction of target power carried by the top `cutoff` eigen-directions.
pub fn task_model_alignment(k: &GramMatrix, y: &[f64], cutoff: usize) -> Result<f64> {
    if cutoff == 0 || cutoff > k.rows() {
        return Err(Error::OutOfRange {
            index: cutoff,
            limit: k.rows() + 1,
        });
    }
    let sp = spectral_power(k, y)?;
    let total: f64 = sp.power.iter().sum();
    if total <= 1e-14 {
        return Err(Error::Numerical("target has zero power under this kernel".into()));
    }
    let top: f64 = sp.power[..cutoff].iter().sum();
    Ok((top / total).clamp(0.0, 1.0))
}

/// Rank of the dynamical Lie algebra generated by the genome's gates.
pub fn dla_rank_criterion(genome: &KernelGenome, threshold: usize) -> Result<CriterionReport> {
    genome.ensure_valid()?;
    let start = Instant::now();
    let gens = genome.generators()?;
    let closure = dla_closure(&gens, threshold)?;
    let mut r = CriterionReport::new("dla_rank", closure.rank as f64)
        .with("truncated", closure.truncated as u8 as f64)
        .with("threshold", threshold as f64);
    r.wall_time = start.elapsed();
    Ok(r)
}

/// Haar value of the t = 2 frame potential on `2^n` dimensions.
pub fn haar_frame_potential(n: usize) -> f64 {
    let dim = (1u64 << n) as f64;
    2.0 / (dim * (dim + 1.0))
}

/// Monte Carlo estimate of the gap between the ensemble's t = 2 frame
/// potential and the Haar value. Inputs are drawn uniformly from (−π, π)^d,
/// one independent pair per sample.
pub fn expressivity_estimate(genome: &KernelGenome, sample_count: usize, seed: u64) -> Result<CriterionReport> {
    if sample_count < 2 {
        return Err(Error::InvalidArgument("expressivity needs at least 2 samples".into()));
    }
    genome.ensure_valid()?;
    let start = Instant::now();
    let pi = std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<f64> { (0..genome.d).map(|_| rng.random_range(-pi..pi)).collect() };
    let mut values = Vec::with_capacity(sample_count);
    for _ in 0..sample_count {
        let a = encode(genome, &draw())?;
        let b = encode(genome, &draw())?;
        let f = a.inner(&b)?.norm_sqr();
        values.push(f * f);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let haar = haar_frame_potential(genome.n);
    let mut r = CriterionReport::new("expressivity", mean - haar)
        .with("frame_potential", mean)
        .with("haar", haar)
        .with("std_error", (var / n).sqrt());
    r.wall_time = start.elapsed();
    Ok(r)
}

/// Training and validation rows handed to data-dependent criteria.
#[derive(Clone, Debug)]
pub struct ValidationData {
    /// SM-only training rows.
    pub train: Vec<Vec<f64>>,
    pub validation: Vec<Vec<f64>>,
    pub validation_labels: Vec<Label>,
}

impl ValidationData {
    pub fn signs(&self) -> Vec<f64> {
        self.validation_labels.iter().map(|l| l.sign()).collect()
    }
}

/// Validation error `1 − accuracy` of an OC-SVM trained with the genome's
/// kernel. Solver failures and constant kernels yield 1.0 with the report
/// flagged `degenerate`.
pub fn validation_cost(genome: &KernelGenome, data: &ValidationData, nu: f64) -> Result<CriterionReport> {
    genome.ensure_valid()?;
    if data.validation.is_empty() {
        return Err(Error::Data("empty validation set".into()));
    }
    let start = Instant::now();
    let outcome = (|| -> Result<(f64, bool)> {
        let k_train = gram(genome, &data.train)?;
        let model = train_ocsvm(&k_train, nu)?;
        if model.degenerate {
            return Ok((0.0, true));
        }
        let k_val = cross_gram(genome, &data.validation, &data.train)?;
        let scores = decision_scores(&model, &k_val)?;
        Ok((accuracy(&predict(&scores), &data.validation_labels), false))
    })();
    let mut r = match outcome {
        Ok((acc, false)) => CriterionReport::new("validation", 1.0 - acc).with("accuracy", acc),
        Ok((_, true)) => CriterionReport::new("validation", 1.0).with("degenerate", 1.0),
        Err(Error::Dimension { expected, actual }) => return Err(Error::dim(expected, actual)),
        Err(_) => CriterionReport::new("validation", 1.0).with("degenerate", 1.0),
    };
    r.wall_time = start.elapsed();
    Ok(r)
}

/// Named criteria usable in a weighted cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CriterionName {
    Validation,
    DlaRank,
    DlaRankOverThreshold,
    Expressivity,
    KtaLoss,
    CenteredKtaLoss,
    TaskModelLoss,
}

impl CriterionName {
    pub const ALL: [CriterionName; 7] = [
        CriterionName::Validation,
        CriterionName::DlaRank,
        CriterionName::DlaRankOverThreshold,
        CriterionName::Expressivity,
        CriterionName::KtaLoss,
        CriterionName::CenteredKtaLoss,
        CriterionName::TaskModelLoss,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CriterionName::Validation => "validation",
            CriterionName::DlaRank => "dla_rank",
            CriterionName::DlaRankOverThreshold => "dla_rank_over_T",
            CriterionName::Expressivity => "expressivity",
            CriterionName::KtaLoss => "kta_loss",
            CriterionName::CenteredKtaLoss => "centered_kta_loss",
            CriterionName::TaskModelLoss => "task_model_loss",
        }
    }
}

impl fmt::Display for CriterionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CriterionName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown criterion {s:?}")))
    }
}

/// Everything the criteria need besides the genome.
#[derive(Clone, Debug)]
pub struct CriteriaContext {
    pub data: Option<ValidationData>,
    pub nu: f64,
    pub dla_threshold: usize,
    pub expressivity_samples: usize,
    pub expressivity_seed: u64,
    pub task_model_cutoff: usize,
}

impl CriteriaContext {
    pub fn new(data: Option<ValidationData>, nu: f64, dla_threshold: usize) -> Self {
        Self {
            data,
            nu,
            dla_threshold,
            expressivity_samples: 200,
            expressivity_seed: 0,
            task_model_cutoff: 5,
        }
    }

    fn data(&self) -> Result<&ValidationData> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::Config("criterion needs a dataset".into()))
    }
}

/// One criterion evaluated on its own.
pub fn evaluate_criterion(genome: &KernelGenome, name: CriterionName, ctx: &CriteriaContext) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut report = match name {
        CriterionName::Validation => validation_cost(genome, ctx.data()?, ctx.nu)?,
        CriterionName::DlaRank => dla_rank_criterion(genome, ctx.dla_threshold)?,
        CriterionName::DlaRankOverThreshold => {
            let r = dla_rank_criterion(genome, ctx.dla_threshold)?;
            let mut out = CriterionReport::new(name.as_str(), r.value / ctx.dla_threshold as f64);
            out.auxiliary = r.auxiliary;
            out.auxiliary.insert("rank".into(), r.value);
            out
        }
        CriterionName::Expressivity => expressivity_estimate(genome, ctx.expressivity_samples, ctx.expressivity_seed)?,
        CriterionName::KtaLoss | CriterionName::CenteredKtaLoss | CriterionName::TaskModelLoss => {
            let data = ctx.data()?;
            let k = gram(genome, &data.validation)?;
            let y = data.signs();
            let value = match name {
                CriterionName::KtaLoss => kta(&k, &y),
                CriterionName::CenteredKtaLoss => centered_kta(&k, &y),
                _ => task_model_alignment(&k, &y, ctx.task_model_cutoff.min(k.rows())),
            };
            match value {
                Ok(v) => CriterionReport::new(name.as_str(), 1.0 - v).with("alignment", v),
                Err(Error::Numerical(_)) => CriterionReport::new(name.as_str(), 1.0).with("degenerate", 1.0),
                Err(e) => return Err(e),
            }
        }
    };
    report.name = name.as_str().to_string();
    report.wall_time = start.elapsed();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeCost {
    pub weights: BTreeMap<String, f64>,
    pub reports: Vec<CriterionReport>,
    pub cost: f64,
}

/// `Σ weight_i · C_i(genome)` over the named criteria, in name order.
pub fn composite_cost(
    genome: &KernelGenome,
    weights: &BTreeMap<String, f64>,
    ctx: &CriteriaContext,
) -> Result<CompositeCost> {
    let parsed: Vec<(CriterionName, f64)> = weights
        .iter()
        .map(|(k, &w)| Ok((k.parse::<CriterionName>()?, w)))
        .collect::<Result<_>>()?;
    let mut reports = Vec::with_capacity(parsed.len());
    let mut cost = 0.0;
    for (name, w) in parsed {
        let r = evaluate_criterion(genome, name, ctx)?;
        if !r.value.is_finite() {
            return Err(Error::Numerical(format!("criterion {name} is not finite")));
        }
        cost += w * r.value;
        reports.push(r);
    }
    Ok(CompositeCost {
        weights: weights.clone(),
        reports,
        cost,
    })
}
