//! One-class SVM over precomputed Gram matrices.
//!
//! Solves the dual
//!
//! ```text
//!   min ½ αᵀKα   s.t.  0 ≤ α_i ≤ 1/(ν m),  Σ α_i = 1
//! ```
//!
//! by pairwise coordinate updates on the maximal KKT-violating pair. The
//! decision function is `Σ_j α_j κ(x, x_j) − ρ`; non-negative scores are
//! regular (SM).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::kernels::GramMatrix;

const ALPHA_EPS: f64 = 1e-9;
const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when `max_{α>0} G − min_{α<C} G` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OcsvmModel {
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub support_indices: Vec<usize>,
    pub nu: f64,
    pub train_gram: Arc<GramMatrix>,
    /// No free support vector existed; ρ is the midpoint of the KKT interval.
    pub rho_from_bounds: bool,
    /// Every entry of the training Gram is equal, so every feasible α is optimal
    /// and the decision function is constant.
    pub degenerate: bool,
    pub iterations: usize,
    pub converged: bool,
}

impl OcsvmModel {
    pub fn upper_bound(&self) -> f64 {
        1.0 / (self.nu * self.alphas.len() as f64)
    }

    /// `½ αᵀKα`.
    pub fn objective(&self) -> f64 {
        dual_objective(&self.train_gram, &self.alphas)
    }

    /// `Σ_j α_j K_ij` for each training row.
    pub fn training_margins(&self) -> Vec<f64> {
        let k = &self.train_gram;
        (0..k.rows())
            .map(|i| k.row(i).iter().zip(&self.alphas).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest KKT residual: zero-α rows must have margin ≥ ρ, rows at the
    /// upper bound margin ≤ ρ, free rows margin = ρ.
    pub fn kkt_residual(&self) -> f64 {
        let c = self.upper_bound();
        self.training_margins()
            .iter()
            .zip(&self.alphas)
            .map(|(&g, &a)| {
                if a <= ALPHA_EPS {
                    (self.rho - g).max(0.0)
                } else if a >= c - ALPHA_EPS {
                    (g - self.rho).max(0.0)
                } else {
                    (g - self.rho).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn dual_objective(k: &GramMatrix, alphas: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..k.rows() {
        if alphas[i] == 0.0 {
            continue;
        }
        let row: f64 = k.row(i).iter().zip(alphas).map(|(a, b)| a * b).sum();
        acc += alphas[i] * row;
    }
    0.5 * acc
}

pub fn train_ocsvm(k: &GramMatrix, nu: f64) -> Result<OcsvmModel> {
    train_ocsvm_with(Arc::new(k.clone()), nu, SolverOptions::default())
}

pub fn train_ocsvm_with(k: Arc<GramMatrix>, nu: f64, opts: SolverOptions) -> Result<OcsvmModel> {
    if !k.is_square() {
        return Err(Error::dim(k.rows(), k.cols()));
    }
    let m = k.rows();
    if m == 0 {
        return Err(Error::InvalidArgument("empty training Gram".into()));
    }
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::InvalidArgument(format!("nu = {nu} outside (0, 1)")));
    }
    if nu * (m as f64) < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "infeasible box: nu·m = {} < 1",
            nu * m as f64
        )));
    }
    if k.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("training Gram has non-finite entries".into()));
    }
    if k.max_asymmetry() > 1e-9 {
        return Err(Error::InvalidArgument("training Gram is not symmetric".into()));
    }

    let c = 1.0 / (nu * m as f64);
    // uniform start is feasible since 1/m ≤ 1/(νm), and keeps symmetric problems symmetric
    let mut alpha = vec![1.0 / m as f64; m];
    let mut grad: Vec<f64> = (0..m).map(|i| k.row(i).iter().sum::<f64>() / m as f64).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        // i: cheapest direction to grow, j: most expensive to shrink; ties keep the first index
        let mut i_up = None;
        let mut g_min = f64::INFINITY;
        let mut j_low = None;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..m {
            if alpha[t] < c && grad[t] < g_min {
                g_min = grad[t];
                i_up = Some(t);
            }
            if alpha[t] > 0.0 && grad[t] > g_max {
                g_max = grad[t];
                j_low = Some(t);
            }
        }
        let (Some(i), Some(j)) = (i_up, j_low) else {
            converged = true;
            break;
        };
        if g_max - g_min <= opts.tolerance || i == j {
            converged = true;
            break;
        }
        let eta = (k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j)).max(TAU);
        let step = ((g_max - g_min) / eta).min(c - alpha[i]).min(alpha[j]);
        if step <= 0.0 {
            converged = true;
            break;
        }
        alpha[i] += step;
        alpha[j] -= step;
        // snap to the box to avoid drift
        if c - alpha[i] < 1e-15 {
            alpha[i] = c;
        }
        if alpha[j] < 1e-15 {
            alpha[j] = 0.0;
        }
        let (ri, rj) = (k.row(i), k.row(j));
        for t in 0..m {
            grad[t] += step * (ri[t] - rj[t]);
        }
        iterations += 1;
    }

    let free: Vec<usize> = (0..m)
        .filter(|&t| alpha[t] > ALPHA_EPS && alpha[t] < c - ALPHA_EPS)
        .collect();
    let (rho, rho_from_bounds) = if !free.is_empty() {
        (free.iter().map(|&t| grad[t]).sum::<f64>() / free.len() as f64, false)
    } else {
        let at_bound = (0..m).filter(|&t| alpha[t] >= c - ALPHA_EPS).map(|t| grad[t]);
        let at_zero = (0..m).filter(|&t| alpha[t] <= ALPHA_EPS).map(|t| grad[t]);
        let lo = at_bound.fold(f64::NEG_INFINITY, f64::max);
        let hi = at_zero.fold(f64::INFINITY, f64::min);
        let rho = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => return Err(Error::Numerical("OC-SVM produced no usable α".into())),
        };
        (rho, true)
    };

    let first = k.values()[0];
    let degenerate = k.values().iter().all(|&v| (v - first).abs() <= 1e-12);
    let support_indices = (0..m).filter(|&t| alpha[t] > ALPHA_EPS).collect();

    Ok(OcsvmModel {
        alphas: alpha,
        rho,
        support_indices,
        nu,
        train_gram: k,
        rho_from_bounds,
        degenerate,
        iterations,
        converged,
    })
}

/// `score_i = Σ_j α_j K_cross[i, j] − ρ`.
pub fn decision_scores(model: &OcsvmModel, k_cross: &GramMatrix) -> Result<Vec<f64>> {
    if k_cross.cols() != model.alphas.len() {
        return Err(Error::dim(model.alphas.len(), k_cross.cols()));
    }
    Ok((0..k_cross.rows())
        .map(|i| {
            k_cross
                .row(i)
                .iter()
                .zip(&model.alphas)
                .map(|(k, a)| k * a)
                .sum::<f64>()
                - model.rho
        })
        .collect())
}

pub fn predict(scores: &[f64]) -> Vec<Label> {
    scores.iter().map(|&s| Label::from_score(s)).collect()
}

pub fn accuracy(predicted: &[Label], truth: &[Label]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}
