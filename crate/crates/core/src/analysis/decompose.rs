//! Attribution of the expected cost to the set of banks that failed
//! fundamentally in each draw.

use super::{AnalysisError, Scenario};
use crate::risk::monte_carlo_expected_cost;

pub const MAX_DECOMPOSITION_BANKS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionEntry {
    /// Banks in the fundamental-default set, 1-based and increasing.
    pub banks: Vec<usize>,
    pub mask: u64,
    /// Fraction of the total cost incurred in draws with exactly this set.
    pub share: f64,
    pub draws: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTable {
    /// Every nonempty subset, singletons first, then pairs in lexicographic
    /// order, and so on.
    pub entries: Vec<DecompositionEntry>,
    /// Draws without any fundamental default (they never cost anything).
    pub zero_set_draws: u64,
    pub zero_set_share: f64,
    pub expected_cost: f64,
    pub std_error: f64,
}

/// Nonempty subsets of `n` banks as masks: by size, then lexicographic.
pub fn fig11_order(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity((1usize << n) - 1);
    for size in 1..=n {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.iter().fold(0u64, |m, &i| m | 1 << i));
            // Advance to the next combination in lexicographic order.
            let mut pos = size;
            while pos > 0 && idx[pos - 1] == n - size + pos - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            for k in pos..size {
                idx[k] = idx[k - 1] + 1;
            }
        }
    }
    out
}

/// Each draw's cost is charged to its fundamental-default set. Shares are
/// all zero if the scenario never incurs any cost.
pub fn decompose_collective_defaults(
    scenario: &Scenario,
    n_draws: usize,
    seed: u64,
) -> Result<DecompositionTable, AnalysisError> {
    let n = scenario.network.n_banks();
    if n > MAX_DECOMPOSITION_BANKS {
        return Err(AnalysisError::TooManyBanks {
            what: "cost decomposition",
            n,
            max: MAX_DECOMPOSITION_BANKS,
        });
    }
    let result = monte_carlo_expected_cost(
        &scenario.network,
        &scenario.universe,
        &scenario.portfolio,
        &scenario.spec,
        n_draws,
        seed,
    )?;
    let total: f64 = crate::stats::neumaier_sum(result.fundamental_set_counts.values().map(|v| v.1));
    let share = |c: f64| if total > 0.0 { c / total } else { 0.0 };
    let entries = fig11_order(n)
        .into_iter()
        .map(|mask| {
            let (draws, c) = result.fundamental_set_counts.get(&mask).copied().unwrap_or((0, 0.0));
            DecompositionEntry {
                banks: (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect(),
                mask,
                share: share(c),
                draws,
            }
        })
        .collect();
    let (zero_set_draws, zero_cost) = result.fundamental_set_counts.get(&0).copied().unwrap_or((0, 0.0));
    Ok(DecompositionTable {
        entries,
        zero_set_draws,
        zero_set_share: share(zero_cost),
        expected_cost: result.expected_cost,
        std_error: result.std_error,
    })
}
