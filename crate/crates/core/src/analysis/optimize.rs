//! Exhaustive search over single-asset allocations.
//!
//! Every bank holds exactly one of the six assets, giving `6^N` candidate
//! allocations. All candidates are evaluated on the same return draws, and
//! the per-draw default counts are kept so that costs for any exponent, and
//! paired comparisons between candidates, come from a single pass.

use rayon::prelude::*;

use super::AnalysisError;
use crate::assets::{sample_returns, AssetUniverse};
use crate::risk::{estimate_from_histogram, CostSpec, Estimate, Network};

pub const MAX_OPTIMIZER_BANKS: usize = 6;

/// Width of the tie band, in standard errors.
pub const TIE_STD_ERRORS: f64 = 2.0;

const K: usize = 6;

/// How the standard error of the tie band is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Standard error of the best candidate's own estimate.
    BestStdError,
    /// Standard error of the per-draw cost difference to the best candidate.
    /// Appropriate because all candidates share the same draws.
    #[default]
    PairedDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationEntry {
    /// Asset of each bank, 1..=6.
    pub assignment: Vec<usize>,
    pub expected_cost: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    /// Lowest estimated cost (lexicographically first on exact equality).
    pub best_assignment: Vec<usize>,
    pub best_cost: f64,
    pub best_std_error: f64,
    /// Lexicographically smallest co-optimal assignment.
    pub canonical_assignment: Vec<usize>,
    /// Every candidate, in lexicographic order of assignment.
    pub cost_table: Vec<AllocationEntry>,
    /// Co-optimal assignments, lexicographic.
    pub ties: Vec<Vec<usize>>,
    pub s: f64,
    pub tie_rule: TieRule,
    pub n_draws: usize,
    pub seed: u64,
}

/// Per-draw default counts for every allocation on one network.
#[derive(Debug, Clone)]
pub struct AllocationSweep {
    n_banks: usize,
    n_draws: usize,
    seed: u64,
    /// `counts[a * n_draws + d]`: defaults of allocation `a` in draw `d`.
    counts: Vec<u8>,
}

/// Allocation index to assets (0-based), bank 1 most significant.
fn decode(mut index: usize, n: usize, out: &mut [usize]) {
    for i in (0..n).rev() {
        out[i] = index % K;
        index /= K;
    }
}

fn encode(assignment: &[usize]) -> usize {
    assignment.iter().fold(0, |acc, &a| acc * K + a)
}

impl AllocationSweep {
    pub fn run(network: &Network, universe: &AssetUniverse, n_draws: usize, seed: u64) -> Result<Self, AnalysisError> {
        let n = network.n_banks();
        if universe.k_assets() != K {
            return Err(AnalysisError::NotSixAssets);
        }
        if n > MAX_OPTIMIZER_BANKS {
            return Err(AnalysisError::TooManyBanks {
                what: "allocation search",
                n,
                max: MAX_OPTIMIZER_BANKS,
            });
        }
        if n_draws == 0 {
            return Err(crate::risk::RiskError::NoDraws.into());
        }
        let sample = sample_returns(universe, n_draws, seed);
        let returns = sample.as_slice();
        // A bank can only fail when its asset is below the failure threshold.
        let cutoff = network.default_return_threshold() + 1e-9;
        let below: Vec<u8> = returns
            .chunks_exact(K)
            .map(|row| row.iter().enumerate().fold(0u8, |m, (k, &r)| if r < cutoff { m | 1 << k } else { m }))
            .collect();

        let n_assign = K.pow(n as u32);
        let mut counts = vec![0u8; n_assign * n_draws];
        counts
            .par_chunks_mut(n_draws)
            .enumerate()
            .try_for_each_init(
                || (network.workspace(), vec![0usize; n], vec![0.0; n]),
                |(ws, assets, r), (index, out)| -> Result<(), AnalysisError> {
                    decode(index, n, assets);
                    let used = assets.iter().fold(0u8, |m, &a| m | 1 << a);
                    for (d, slot) in out.iter_mut().enumerate() {
                        if below[d] & used == 0 {
                            continue;
                        }
                        let row = &returns[d * K..(d + 1) * K];
                        for (ri, &a) in r.iter_mut().zip(assets.iter()) {
                            *ri = row[a];
                        }
                        *slot = network.evaluate(r, ws)?.n_defaults as u8;
                    }
                    Ok(())
                },
            )?;
        Ok(Self {
            n_banks: n,
            n_draws,
            seed,
            counts,
        })
    }

    pub fn n_banks(&self) -> usize {
        self.n_banks
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_assignments(&self) -> usize {
        self.counts.len() / self.n_draws
    }

    /// Assets (1-based) of allocation number `index`.
    pub fn assignment(&self, index: usize) -> Vec<usize> {
        let mut a = vec![0; self.n_banks];
        decode(index, self.n_banks, &mut a);
        a.iter().map(|x| x + 1).collect()
    }

    fn row(&self, index: usize) -> &[u8] {
        &self.counts[index * self.n_draws..(index + 1) * self.n_draws]
    }

    fn histogram(&self, index: usize) -> Vec<u64> {
        let mut h = vec![0u64; self.n_banks + 1];
        for &c in self.row(index) {
            h[c as usize] += 1;
        }
        h
    }

    /// Cost of one allocation given as 1-based assets.
    pub fn cost_of(&self, assignment: &[usize], spec: &CostSpec) -> Option<Estimate> {
        if assignment.len() != self.n_banks || assignment.iter().any(|&a| a == 0 || a > K) {
            return None;
        }
        let zero_based: Vec<usize> = assignment.iter().map(|a| a - 1).collect();
        Some(estimate_from_histogram(&self.histogram(encode(&zero_based)), spec))
    }

    /// Standard error of the mean per-draw cost difference between two
    /// allocations.
    fn paired_se(&self, a: usize, b: usize, costs: &[f64]) -> f64 {
        let d = self.n_draws as f64;
        let diffs = self
            .row(a)
            .iter()
            .zip(self.row(b))
            .map(|(&x, &y)| costs[x as usize] - costs[y as usize]);
        let mean = crate::stats::neumaier_sum(diffs.clone()) / d;
        if self.n_draws < 2 {
            return 0.0;
        }
        let ss = crate::stats::neumaier_sum(diffs.map(|v| (v - mean) * (v - mean)));
        (ss / (d - 1.0) / d).sqrt()
    }

    pub fn result(&self, spec: &CostSpec, rule: TieRule) -> AllocationResult {
        let costs = spec.table(self.n_banks);
        let estimates: Vec<Estimate> = (0..self.n_assignments())
            .into_par_iter()
            .map(|a| estimate_from_histogram(&self.histogram(a), spec))
            .collect();
        let best = (0..estimates.len())
            .min_by(|&a, &b| estimates[a].value.total_cmp(&estimates[b].value).then(a.cmp(&b)))
            .expect("at least one allocation");
        let best_est = estimates[best];
        let tie_indices: Vec<usize> = (0..estimates.len())
            .into_par_iter()
            .filter(|&a| {
                let gap = estimates[a].value - best_est.value;
                let band = match rule {
                    TieRule::BestStdError => best_est.std_error,
                    TieRule::PairedDifference => self.paired_se(a, best, &costs),
                };
                gap <= TIE_STD_ERRORS * band
            })
            .collect();
        let ties: Vec<Vec<usize>> = tie_indices.iter().map(|&a| self.assignment(a)).collect();
        AllocationResult {
            best_assignment: self.assignment(best),
            best_cost: best_est.value,
            best_std_error: best_est.std_error,
            canonical_assignment: ties[0].clone(),
            cost_table: estimates
                .iter()
                .enumerate()
                .map(|(a, e)| AllocationEntry {
                    assignment: self.assignment(a),
                    expected_cost: e.value,
                    std_error: e.std_error,
                })
                .collect(),
            ties,
            s: spec.s,
            tie_rule: rule,
            n_draws: self.n_draws,
            seed: self.seed,
        }
    }
}

impl AllocationResult {
    /// Banks holding `asset` (1-based) in the canonical assignment.
    pub fn canonical_count(&self, asset: usize) -> usize {
        self.canonical_assignment.iter().filter(|&&a| a == asset).count()
    }

    /// Assets used by any co-optimal assignment.
    pub fn assets_in_ties(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self.ties.iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        used
    }
}

/// Cheapest single-asset allocation under the default tie rule.
pub fn optimize_allocation_discrete(
    network: &Network,
    universe: &AssetUniverse,
    spec: &CostSpec,
    n_draws: usize,
    seed: u64,
) -> Result<AllocationResult, AnalysisError> {
    Ok(AllocationSweep::run(network, universe, n_draws, seed)?.result(spec, TieRule::default()))
}
