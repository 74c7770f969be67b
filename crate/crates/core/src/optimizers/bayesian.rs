use std::collections::HashSet;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::{apply_frozen, Evaluator};
use crate::error::{Error, Result};
use crate::genome::{random_genome, KernelGenome};

const JITTERS: [f64; 3] = [1e-8, 1e-6, 1e-4];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acquisition {
    /// Expected improvement.
    #[default]
    Ei,
    /// Lower confidence bound `μ − κσ` (upper bound on `−cost`).
    Ucb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesianParams {
    pub iterations: usize,
    pub batch: usize,
    /// Random genomes added to the initial guess.
    pub initial_random: usize,
    /// Hamming length scale; defaults to an eighth of the flat length.
    pub length_scale: Option<f64>,
    pub pool_random: usize,
    pub pool_mutations: usize,
    pub mutation_rate: f64,
    pub acquisition: Acquisition,
    pub xi: f64,
    pub kappa: f64,
}

impl Default for BayesianParams {
    fn default() -> Self {
        Self {
            iterations: 5,
            batch: 5,
            initial_random: 4,
            length_scale: None,
            pool_random: 200,
            pool_mutations: 200,
            mutation_rate: 0.15,
            acquisition: Acquisition::Ei,
            xi: 0.0,
            kappa: 2.0,
        }
    }
}

fn hamming(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Gaussian-process regression over flat encodings with the kernel
/// `exp(−hamming/ℓ)` on standardized targets.
pub struct GpSurrogate {
    xs: Vec<Vec<u32>>,
    length_scale: f64,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    weights: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
}

impl GpSurrogate {
    /// Fits with escalating diagonal jitter; fails if every level does.
    pub fn fit(xs: &[Vec<u32>], ys: &[f64], length_scale: f64) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::dim(xs.len(), ys.len()));
        }
        let n = xs.len() as f64;
        let y_mean = ys.iter().sum::<f64>() / n;
        let sd = (ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n).sqrt();
        let y_scale = if sd > 1e-12 { sd } else { 1.0 };
        let y = DVector::from_iterator(ys.len(), ys.iter().map(|v| (v - y_mean) / y_scale));
        let k = DMatrix::from_fn(xs.len(), xs.len(), |i, j| {
            (-(hamming(&xs[i], &xs[j]) as f64) / length_scale).exp()
        });
        for jitter in JITTERS {
            let kj = &k + DMatrix::identity(xs.len(), xs.len()) * jitter;
            if let Some(chol) = Cholesky::new(kj) {
                let weights = chol.solve(&y);
                if weights.iter().all(|w| w.is_finite()) {
                    return Ok(Self {
                        xs: xs.to_vec(),
                        length_scale,
                        jitter,
                        chol,
                        weights,
                        y_mean,
                        y_scale,
                    });
                }
            }
        }
        Err(Error::Numerical("surrogate covariance is not positive definite".into()))
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Posterior mean and standard deviation in cost units.
    pub fn predict(&self, x: &[u32]) -> (f64, f64) {
        let kstar = DVector::from_iterator(
            self.xs.len(),
            self.xs.iter().map(|xi| (-(hamming(xi, x) as f64) / self.length_scale).exp()),
        );
        let mean = kstar.dot(&self.weights);
        let v = self.chol.l().solve_lower_triangular(&kstar).unwrap_or_else(|| kstar.clone());
        let var = (1.0 - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }
}

/// Acquisition value to maximize.
fn acquire(kind: Acquisition, mean: f64, sd: f64, best: f64, params: &BayesianParams) -> f64 {
    match kind {
        Acquisition::Ucb => -(mean - params.kappa * sd),
        Acquisition::Ei => {
            let gain = best - mean - params.xi;
            if sd <= 1e-12 {
                return gain.max(0.0);
            }
            let z = gain / sd;
            let normal = Normal::standard();
            gain * normal.cdf(z) + sd * normal.pdf(z)
        }
    }
}

/// Identity-plus-random initial design, then `iterations` rounds of
/// surrogate-ranked batches drawn from a pool of random genomes and
/// mutations of the incumbent.
pub fn bayesian_search(
    initial: &KernelGenome,
    ev: &mut Evaluator<'_>,
    params: &BayesianParams,
    frozen_mask: Option<u64>,
    seed: u64,
) -> Result<()> {
    let space = initial.space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let length_scale = params
        .length_scale
        .unwrap_or_else(|| (space.flat_len() as f64 / 8.0).max(1.0));

    let mut design = vec![initial.clone()];
    for _ in 0..params.initial_random {
        design.push(apply_frozen(random_genome(&space, &mut rng)?, frozen_mask));
    }
    ev.evaluate_batch(&design)?;

    for iteration in 0..params.iterations {
        if ev.exhausted() {
            break;
        }
        let trace = ev.trace();
        let xs: Vec<Vec<u32>> = trace.evaluations.iter().map(|r| r.flat.clone()).collect();
        let ys: Vec<f64> = trace.evaluations.iter().map(|r| r.cost).collect();
        let best = trace.best.as_ref().expect("initial design evaluated");
        let best_cost = best.cost;
        let incumbent = KernelGenome::decode_flat(&best.flat, &space)?;
        let evaluated: HashSet<Vec<u32>> = xs.iter().cloned().collect();

        let mut pool: Vec<(Vec<u32>, KernelGenome)> = Vec::new();
        let mut in_pool: HashSet<Vec<u32>> = HashSet::new();
        let mut offer = |g: KernelGenome| -> Result<()> {
            let g = apply_frozen(g, frozen_mask);
            let key = g.encode_flat()?;
            if !evaluated.contains(&key) && in_pool.insert(key.clone()) {
                pool.push((key, g));
            }
            Ok(())
        };
        for _ in 0..params.pool_random {
            offer(random_genome(&space, &mut rng)?)?;
        }
        for _ in 0..params.pool_mutations {
            offer(incumbent.mutate(params.mutation_rate, &mut rng)?)?;
        }
        if pool.is_empty() {
            ev.note(format!("iteration {iteration}: candidate pool exhausted"));
            break;
        }

        let batch: Vec<KernelGenome> = match GpSurrogate::fit(&xs, &ys, length_scale) {
            Ok(gp) => {
                if gp.jitter() > JITTERS[0] {
                    ev.note(format!("iteration {iteration}: surrogate jitter {:e}", gp.jitter()));
                }
                let scores: Vec<f64> = pool
                    .iter()
                    .map(|(key, _)| {
                        let (mu, sd) = gp.predict(key);
                        acquire(params.acquisition, mu, sd, best_cost, params)
                    })
                    .collect();
                let mut order: Vec<usize> = (0..pool.len()).collect();
                order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
                order.iter().take(params.batch).map(|&i| pool[i].1.clone()).collect()
            }
            Err(_) => {
                ev.note(format!("iteration {iteration}: surrogate fallback to random proposals"));
                pool.shuffle(&mut rng);
                pool.iter().take(params.batch).map(|(_, g)| g.clone()).collect()
            }
        };
        ev.evaluate_batch(&batch)?;
    }
    Ok(())
}
