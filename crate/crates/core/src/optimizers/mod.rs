//! Search over kernel genomes: greedy, genetic, Bayesian, SARSA, and a
//! random-search baseline.

mod bayesian;
mod genetic;
mod greedy;
mod random;
mod sarsa;
mod trace;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{composite_cost, CriteriaContext, CriterionReport};
use crate::error::{Error, Result};
use crate::genome::KernelGenome;

pub use bayesian::{bayesian_search, Acquisition, BayesianParams, GpSurrogate};
pub use genetic::{genetic_search, GeneticParams};
pub use greedy::{greedy_search, GreedyParams};
pub use random::random_search;
pub use sarsa::{sarsa_search, SarsaParams};
pub use trace::{read_trace_jsonl, OptimizationTrace, TraceHeader, TraceRecord};

/// Result of one cost evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    pub reports: Vec<CriterionReport>,
}

impl Evaluation {
    pub fn scalar(cost: f64) -> Self {
        Self {
            cost,
            reports: Vec::new(),
        }
    }
}

pub trait CostFunction: Sync {
    fn evaluate(&self, genome: &KernelGenome) -> Result<Evaluation>;
}

/// Adapts a plain closure returning a scalar cost.
pub struct FnCost<F>(pub F);

impl<F> CostFunction for FnCost<F>
where
    F: Fn(&KernelGenome) -> f64 + Sync,
{
    fn evaluate(&self, genome: &KernelGenome) -> Result<Evaluation> {
        Ok(Evaluation::scalar((self.0)(genome)))
    }
}

/// Weighted sum of named criteria.
pub struct CompositeObjective {
    pub weights: BTreeMap<String, f64>,
    pub context: CriteriaContext,
}

impl CostFunction for CompositeObjective {
    fn evaluate(&self, genome: &KernelGenome) -> Result<Evaluation> {
        let c = composite_cost(genome, &self.weights, &self.context)?;
        Ok(Evaluation {
            cost: c.cost,
            reports: c.reports,
        })
    }
}

/// Cost cache keyed by flat encoding, shareable across optimizer runs.
#[derive(Clone, Default)]
pub struct EvaluationCache {
    inner: Arc<Mutex<HashMap<Vec<u32>, Evaluation>>>,
}

impl EvaluationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &[u32]) -> Option<Evaluation> {
        self.inner.lock().expect("cache poisoned").get(key).cloned()
    }

    /// Keeps the first value stored under `key`.
    pub fn insert_if_absent(&self, key: Vec<u32>, value: Evaluation) {
        self.inner.lock().expect("cache poisoned").entry(key).or_insert(value);
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Greedy,
    Genetic,
    #[default]
    Bayesian,
    Sarsa,
    RandomSearch,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Greedy => "greedy",
            OptimizerKind::Genetic => "genetic",
            OptimizerKind::Bayesian => "bayesian",
            OptimizerKind::Sarsa => "sarsa",
            OptimizerKind::RandomSearch => "random_search",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            OptimizerKind::Greedy,
            OptimizerKind::Genetic,
            OptimizerKind::Bayesian,
            OptimizerKind::Sarsa,
            OptimizerKind::RandomSearch,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown optimizer {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    /// Maximum number of cost evaluations that miss the cache.
    pub budget: usize,
    /// Keep the measurement mask of the initial genome fixed.
    pub freeze_mask: bool,
    pub greedy: GreedyParams,
    pub genetic: GeneticParams,
    pub bayesian: BayesianParams,
    pub sarsa: SarsaParams,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::default(),
            budget: 1000,
            freeze_mask: false,
            greedy: GreedyParams::default(),
            genetic: GeneticParams::default(),
            bayesian: BayesianParams::default(),
            sarsa: SarsaParams::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind, budget: usize) -> Self {
        Self {
            kind,
            budget,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.budget == 0 {
            return bad("optimizer budget must be >= 1");
        }
        let g = &self.genetic;
        if g.population < 2 {
            return bad("genetic population must be >= 2");
        }
        if g.tournament == 0 || g.elitism >= g.population {
            return bad("genetic tournament must be >= 1 and elitism below the population");
        }
        if !(0.0..=1.0).contains(&g.mutation_rate) {
            return bad("genetic mutation_rate must lie in [0, 1]");
        }
        let b = &self.bayesian;
        if b.batch == 0 {
            return bad("bayesian batch must be >= 1");
        }
        if !(0.0..=1.0).contains(&b.mutation_rate) {
            return bad("bayesian mutation_rate must lie in [0, 1]");
        }
        if b.length_scale.is_some_and(|l| !(l > 0.0)) {
            return bad("bayesian length_scale must be positive");
        }
        let s = &self.sarsa;
        if s.episodes == 0 {
            return bad("sarsa episodes must be >= 1");
        }
        for (name, v) in [
            ("epsilon_start", s.epsilon_start),
            ("epsilon_end", s.epsilon_end),
            ("learning_rate", s.learning_rate),
            ("discount", s.discount),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("sarsa {name} must lie in [0, 1]")));
            }
        }
        if self.greedy.max_sweeps == 0 {
            return bad("greedy max_sweeps must be >= 1");
        }
        Ok(())
    }
}

/// Runs the configured optimizer. The evaluator keeps the trace even when
/// the run fails part-way.
pub fn run_optimizer(
    config: &OptimizerConfig,
    initial: &KernelGenome,
    evaluator: &mut Evaluator<'_>,
    seed: u64,
) -> Result<()> {
    config.validate()?;
    initial.ensure_valid()?;
    let space = initial.space();
    let frozen = config.freeze_mask.then_some(initial.measure_mask);
    match config.kind {
        OptimizerKind::Greedy => greedy_search(initial, evaluator, &config.greedy, config.freeze_mask),
        OptimizerKind::Genetic => genetic_search(&space, evaluator, &config.genetic, frozen, seed),
        OptimizerKind::Bayesian => bayesian_search(initial, evaluator, &config.bayesian, frozen, seed),
        OptimizerKind::Sarsa => sarsa_search(&space, evaluator, &config.sarsa, frozen, seed),
        OptimizerKind::RandomSearch => random_search(&space, evaluator, frozen, seed),
    }
}

/// Convenience wrapper returning the finished trace.
pub fn optimize(
    config: &OptimizerConfig,
    initial: &KernelGenome,
    cost: &dyn CostFunction,
    cache: &EvaluationCache,
    seed: u64,
) -> Result<OptimizationTrace> {
    let header = TraceHeader::new(config.clone(), initial.space(), seed);
    let mut ev = Evaluator::new(cost, cache.clone(), config.budget, header);
    run_optimizer(config, initial, &mut ev, seed)?;
    Ok(ev.into_trace())
}

/// Budgeted, cached access to a cost function that records every
/// evaluation in order.
pub struct Evaluator<'a> {
    cost: &'a dyn CostFunction,
    cache: EvaluationCache,
    budget: usize,
    misses: usize,
    replay: HashMap<Vec<u32>, Evaluation>,
    seen: HashSet<Vec<u32>>,
    trace: OptimizationTrace,
}

impl<'a> Evaluator<'a> {
    pub fn new(cost: &'a dyn CostFunction, cache: EvaluationCache, budget: usize, header: TraceHeader) -> Self {
        Self {
            cost,
            cache,
            budget,
            misses: 0,
            replay: HashMap::new(),
            seen: HashSet::new(),
            trace: OptimizationTrace::new(header),
        }
    }

    /// Supplies results of an interrupted run. They are charged to the
    /// budget as if freshly computed, so a resumed run matches an
    /// uninterrupted one.
    pub fn with_replay(mut self, records: &[TraceRecord]) -> Self {
        for r in records {
            let reports = r
                .criteria
                .iter()
                .map(|(name, &value)| CriterionReport {
                    name: name.clone(),
                    value,
                    auxiliary: BTreeMap::new(),
                    wall_time: Default::default(),
                })
                .collect();
            self.replay.entry(r.flat.clone()).or_insert(Evaluation {
                cost: r.cost,
                reports,
            });
        }
        self
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn misses(&self) -> usize {
        self.misses
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.misses
    }

    pub fn exhausted(&self) -> bool {
        self.misses >= self.budget
    }

    pub fn trace(&self) -> &OptimizationTrace {
        &self.trace
    }

    pub fn into_trace(self) -> OptimizationTrace {
        self.trace
    }

    pub fn was_evaluated(&self, genome: &KernelGenome) -> bool {
        genome.encode_flat().is_ok_and(|f| self.seen.contains(&f))
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.trace.notes.push(text.into());
    }

    pub fn commit(&mut self, cost: f64) {
        self.trace.committed.push(cost);
    }

    pub fn evaluate(&mut self, genome: &KernelGenome) -> Result<Option<f64>> {
        Ok(self.evaluate_batch(std::slice::from_ref(genome))?[0])
    }

    /// Costs in candidate order; `None` for candidates dropped because the
    /// budget ran out. Misses are computed in parallel.
    pub fn evaluate_batch(&mut self, genomes: &[KernelGenome]) -> Result<Vec<Option<f64>>> {
        let keys: Vec<Vec<u32>> = genomes.iter().map(|g| g.encode_flat()).collect::<Result<_>>()?;

        enum Source {
            Cached(Evaluation),
            Replayed(Evaluation),
            Compute(usize),
            Dropped,
        }
        let mut sources = Vec::with_capacity(genomes.len());
        let mut pending: HashMap<&[u32], usize> = HashMap::new();
        let mut to_compute: Vec<usize> = Vec::new();
        let mut charged = 0usize;
        for (i, key) in keys.iter().enumerate() {
            if let Some(&slot) = pending.get(key.as_slice()) {
                sources.push(Source::Compute(slot));
                continue;
            }
            if let Some(e) = self.cache.get(key) {
                sources.push(Source::Cached(e));
                continue;
            }
            if self.misses + charged >= self.budget {
                sources.push(Source::Dropped);
                continue;
            }
            charged += 1;
            if let Some(e) = self.replay.get(key) {
                sources.push(Source::Replayed(e.clone()));
                self.cache.insert_if_absent(key.clone(), e.clone());
                continue;
            }
            pending.insert(key, to_compute.len());
            sources.push(Source::Compute(to_compute.len()));
            to_compute.push(i);
        }

        let computed: Vec<Result<Evaluation>> = to_compute
            .par_iter()
            .map(|&i| self.cost.evaluate(&genomes[i]))
            .collect();
        let computed: Vec<Evaluation> = computed.into_iter().collect::<Result<_>>()?;
        for (slot, &i) in to_compute.iter().enumerate() {
            if !computed[slot].cost.is_finite() {
                return Err(Error::Numerical(format!(
                    "cost of {} is not finite",
                    genomes[i].flat_string()
                )));
            }
            self.cache.insert_if_absent(keys[i].clone(), computed[slot].clone());
        }

        let mut out = Vec::with_capacity(genomes.len());
        for (i, src) in sources.into_iter().enumerate() {
            let (eval, fresh) = match src {
                Source::Dropped => {
                    out.push(None);
                    continue;
                }
                Source::Cached(e) => (e, false),
                Source::Replayed(e) => (e, true),
                Source::Compute(slot) => (computed[slot].clone(), true),
            };
            if self.seen.insert(keys[i].clone()) {
                if fresh {
                    self.misses += 1;
                }
                self.trace.push(keys[i].clone(), &eval, !fresh);
            }
            out.push(Some(eval.cost));
        }
        Ok(out)
    }
}

/// Replaces the mask of `g` when the mask is frozen.
pub(crate) fn apply_frozen(g: KernelGenome, frozen: Option<u64>) -> KernelGenome {
    match frozen {
        Some(mask) => KernelGenome { measure_mask: mask, ..g },
        None => g,
    }
}
