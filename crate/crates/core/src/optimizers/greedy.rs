use serde::{Deserialize, Serialize};

use super::Evaluator;
use crate::error::Result;
use crate::genome::KernelGenome;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyParams {
    pub max_sweeps: usize,
}

impl Default for GreedyParams {
    fn default() -> Self {
        Self { max_sweeps: 100 }
    }
}

/// Coordinate descent over flat cells in index order. Each cell takes its
/// cheapest value; the current value wins ties, so committed costs never
/// increase. Stops after a sweep without change.
pub fn greedy_search(
    initial: &KernelGenome,
    ev: &mut Evaluator<'_>,
    params: &GreedyParams,
    freeze_mask: bool,
) -> Result<()> {
    let space = initial.space();
    let Some(mut cost) = ev.evaluate(initial)? else {
        return Ok(());
    };
    let mut current = initial.clone();
    ev.commit(cost);

    for _ in 0..params.max_sweeps {
        let mut changed = false;
        for cell in 0..space.flat_len() {
            if freeze_mask && space.is_mask_cell(cell) {
                continue;
            }
            let candidates = current.enumerate_cell_values(cell)?;
            let costs = ev.evaluate_batch(&candidates)?;
            let mut best: Option<(usize, f64)> = None;
            for (i, c) in costs.iter().enumerate() {
                if let Some(c) = *c {
                    if c < best.map_or(cost, |b| b.1) {
                        best = Some((i, c));
                    }
                }
            }
            if let Some((i, c)) = best {
                current = candidates[i].clone();
                cost = c;
                changed = true;
            }
            ev.commit(cost);
            if ev.exhausted() {
                return Ok(());
            }
        }
        if !changed {
            break;
        }
    }
    Ok(())
}
