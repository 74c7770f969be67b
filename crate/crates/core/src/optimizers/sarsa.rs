use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Evaluator;
use crate::error::{Error, Result};
use crate::genome::{GateSpec, KernelGenome, SearchSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SarsaParams {
    pub episodes: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub learning_rate: f64,
    pub discount: f64,
}

impl Default for SarsaParams {
    fn default() -> Self {
        Self {
            episodes: 200,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            learning_rate: 0.5,
            discount: 1.0,
        }
    }
}

/// Gate tuples in mixed radix `(alpha, beta, p, q-slot, feature, bandwidth)`.
struct ActionSpace {
    radices: [u32; 6],
    gate_actions: u32,
    mask_actions: u32,
}

impl ActionSpace {
    fn new(space: &SearchSpace) -> Result<Self> {
        if space.n < 2 || space.d == 0 || space.b() == 0 {
            return Err(Error::InvalidArgument(
                "SARSA needs n >= 2, d >= 1 and b >= 1".into(),
            ));
        }
        if space.n > 31 {
            return Err(Error::InvalidArgument("mask action space too large".into()));
        }
        let radices = [4, 4, space.n as u32, space.n as u32 - 1, space.d as u32, space.b() as u32];
        Ok(Self {
            radices,
            gate_actions: radices.iter().product(),
            mask_actions: (1u32 << space.n) - 1,
        })
    }

    fn gate(&self, mut action: u32) -> GateSpec {
        let mut digits = [0u32; 6];
        for i in (0..6).rev() {
            digits[i] = action % self.radices[i];
            action /= self.radices[i];
        }
        let [alpha, beta, p, q, k, j] = digits;
        GateSpec::new(alpha as u8, beta as u8, p as usize, q as usize, k as usize, j as usize)
    }
}

type QTable = HashMap<Vec<u32>, BTreeMap<u32, f64>>;

fn q_value(q: &QTable, state: &[u32], action: u32) -> f64 {
    q.get(state).and_then(|row| row.get(&action)).copied().unwrap_or(0.0)
}

/// ε-greedy over `0..count`; unvisited actions have value 0 and greedy ties
/// are broken uniformly.
fn choose<R: Rng>(q: &QTable, state: &[u32], count: u32, epsilon: f64, rng: &mut R) -> u32 {
    if rng.random::<f64>() < epsilon {
        return rng.random_range(0..count);
    }
    let empty = BTreeMap::new();
    let row = q.get(state).unwrap_or(&empty);
    let unseen = count as usize - row.len();
    let mut best = if unseen > 0 { 0.0 } else { f64::NEG_INFINITY };
    for &v in row.values() {
        best = best.max(v);
    }
    let tied_seen: Vec<u32> = row.iter().filter(|(_, &v)| v == best).map(|(&a, _)| a).collect();
    let tied_unseen = if best == 0.0 { unseen } else { 0 };
    let pick = rng.random_range(0..tied_seen.len() + tied_unseen);
    if pick < tied_seen.len() {
        return tied_seen[pick];
    }
    let mut remaining = pick - tied_seen.len();
    for a in 0..count {
        if !row.contains_key(&a) {
            if remaining == 0 {
                return a;
            }
            remaining -= 1;
        }
    }
    unreachable!("tie index within range")
}

/// Tabular SARSA where an episode places gates one by one (and then picks
/// the measurement mask unless it is frozen). The only reward is the
/// negated cost of the finished genome.
pub fn sarsa_search(
    space: &SearchSpace,
    ev: &mut Evaluator<'_>,
    params: &SarsaParams,
    frozen_mask: Option<u64>,
    seed: u64,
) -> Result<()> {
    let actions = ActionSpace::new(space)?;
    let steps = space.m + usize::from(frozen_mask.is_none());
    if steps == 0 {
        return Err(Error::InvalidArgument("nothing to choose: m = 0 and mask frozen".into()));
    }
    let count_at = |t: usize| if t < space.m { actions.gate_actions } else { actions.mask_actions };
    let build = |path: &[u32]| KernelGenome {
        n: space.n,
        d: space.d,
        gates: path[..space.m].iter().map(|&a| actions.gate(a)).collect(),
        measure_mask: frozen_mask.unwrap_or_else(|| path[space.m] as u64 + 1),
        bandwidths: space.bandwidths.clone(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: QTable = HashMap::new();
    let lr = params.learning_rate;
    for episode in 0..params.episodes {
        if ev.exhausted() {
            break;
        }
        let frac = if params.episodes > 1 {
            episode as f64 / (params.episodes - 1) as f64
        } else {
            0.0
        };
        let epsilon = params.epsilon_start + (params.epsilon_end - params.epsilon_start) * frac;

        let mut state: Vec<u32> = Vec::with_capacity(steps);
        let mut action = choose(&q, &state, count_at(0), epsilon, &mut rng);
        loop {
            let mut next = state.clone();
            next.push(action);
            let target = if next.len() == steps {
                match ev.evaluate(&build(&next))? {
                    Some(cost) => -cost,
                    None => return Ok(()),
                }
            } else {
                let next_action = choose(&q, &next, count_at(next.len()), epsilon, &mut rng);
                let t = params.discount * q_value(&q, &next, next_action);
                let old = q_value(&q, &state, action);
                q.entry(state).or_default().insert(action, old + lr * (t - old));
                state = next;
                action = next_action;
                continue;
            };
            let old = q_value(&q, &state, action);
            q.entry(state).or_default().insert(action, old + lr * (target - old));
            break;
        }
    }
    Ok(())
}
