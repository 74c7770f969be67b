use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{apply_frozen, Evaluator};
use crate::error::Result;
use crate::genome::{random_genome, SearchSpace};

/// Draw cap relative to the budget; repeats cost nothing, so this only
/// matters once the space is nearly exhausted.
const DRAWS_PER_BUDGET: usize = 100;

/// Uniform sampling of valid genomes until `budget` distinct genomes have
/// been evaluated.
pub fn random_search(space: &SearchSpace, ev: &mut Evaluator<'_>, frozen_mask: Option<u64>, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_draws = ev.budget().saturating_mul(DRAWS_PER_BUDGET);
    for _ in 0..max_draws {
        if ev.exhausted() {
            break;
        }
        let g = apply_frozen(random_genome(space, &mut rng)?, frozen_mask);
        ev.evaluate(&g)?;
    }
    Ok(())
}
