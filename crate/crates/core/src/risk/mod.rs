//! Default costs `C(n) = n^s`, their closed-form expectations without a
//! network, and the Monte Carlo estimator for networked scenarios.

mod network;
mod sweep;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

pub use network::{DrawOutcome, Network, NetworkWorkspace, MAX_BANKS};
pub(crate) use network::simulate_batches;
pub use sweep::{simultaneity_sweep, write_sweep_csv, SweepMode, SweepRow};

use crate::assets::{batch_layout, AssetError, AssetUniverse, PortfolioMatrix, ReturnFamily};
use crate::balance::BalanceError;
use crate::clearing::ClearingError;
use crate::graph::GraphError;
use crate::stats::neumaier_sum;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("cost exponent must be finite and at least 1, got {0}")]
    InvalidExponent(f64),
    #[error("probability must lie in (0, 1), got {0}")]
    ProbabilityRange(f64),
    #[error("at least one bank is required")]
    NoBanks,
    #[error("at least one draw is required")]
    NoDraws,
    #[error("{n} banks exceed the supported maximum of {max}")]
    TooManyBanks { n: usize, max: usize },
    #[error("a network with edges must be connected")]
    Disconnected,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Convexity of the social cost of simultaneous defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub s: f64,
}

impl CostSpec {
    pub fn new(s: f64) -> Result<Self, RiskError> {
        if s.is_finite() && s >= 1.0 {
            Ok(Self { s })
        } else {
            Err(RiskError::InvalidExponent(s))
        }
    }

    pub fn cost(&self, n: usize) -> f64 {
        cost(n, self)
    }

    /// `C(0..=n_max)`.
    pub fn table(&self, n_max: usize) -> Vec<f64> {
        (0..=n_max).map(|n| self.cost(n)).collect()
    }
}

impl Default for CostSpec {
    fn default() -> Self {
        Self { s: 4.0 }
    }
}

pub fn cost(n: usize, spec: &CostSpec) -> f64 {
    if n == 0 {
        0.0
    } else {
        (n as f64).powf(spec.s)
    }
}

/// A Monte Carlo (or exact, with zero error) estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

fn check_probability(p: f64) -> Result<(), RiskError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(RiskError::ProbabilityRange(p))
    }
}

/// Expected cost when each of `n` banks fails independently with
/// probability `p`: the `s`-th moment of Binomial(n, p).
pub fn expected_cost_diversity(n: usize, p: f64, spec: &CostSpec) -> Result<f64, RiskError> {
    if n == 0 {
        return Err(RiskError::NoBanks);
    }
    check_probability(p)?;
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    Ok(neumaier_sum((1..=n).map(|k| {
        let log_pmf = ln_binomial(n as u64, k as u64) + k as f64 * lp + (n - k) as f64 * lq;
        log_pmf.exp() * cost(k, spec)
    })))
}

/// Probability that a bank holding the equal-weighted portfolio of `n`
/// i.i.d. assets fails, when a single asset fails with probability `p`.
/// Exact for normal returns; Monte Carlo with `draws` samples otherwise.
pub fn diversification_default_probability(
    n: usize,
    p: f64,
    family: ReturnFamily,
    draws: usize,
    seed: u64,
) -> Result<Estimate, RiskError> {
    if n == 0 {
        return Err(RiskError::NoBanks);
    }
    check_probability(p)?;
    family.validate()?;
    let q = family.standard_quantile(p);
    if let ReturnFamily::Normal = family {
        return Ok(Estimate {
            value: family.standard_cdf((n as f64).sqrt() * q),
            std_error: 0.0,
        });
    }
    if draws == 0 {
        return Err(RiskError::NoDraws);
    }
    let universe = AssetUniverse::independent(n, family, 1.0)?;
    let hits: u64 = batch_layout(draws)
        .map(|(batch, rows)| {
            let mut buf = vec![0.0; rows * n];
            universe.fill_batch(seed, batch, rows, &mut buf);
            buf.chunks_exact(n)
                .filter(|row| row.iter().sum::<f64>() / (n as f64) < q)
                .count() as u64
        })
        .sum();
    let prob = hits as f64 / draws as f64;
    Ok(Estimate {
        value: prob,
        std_error: (prob * (1.0 - prob) / draws as f64).sqrt(),
    })
}

/// Expected cost when all `n` banks hold the same equal-weighted portfolio:
/// they fail together, so the cost is `P(fail) * n^s`.
pub fn expected_cost_diversification(
    n: usize,
    p: f64,
    spec: &CostSpec,
    family: ReturnFamily,
    draws: usize,
    seed: u64,
) -> Result<Estimate, RiskError> {
    let prob = diversification_default_probability(n, p, family, draws, seed)?;
    let c = cost(n, spec);
    Ok(Estimate {
        value: prob.value * c,
        std_error: prob.std_error * c,
    })
}

/// Default draws for the heavy-tailed diversification integral.
pub const DEFAULT_T_DRAWS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub expected_cost: f64,
    pub std_error: f64,
    /// `default_histogram[n]` counts draws with exactly `n` defaults.
    pub default_histogram: Vec<u64>,
    /// Fundamental-default set (bit mask) to (draw count, summed cost).
    pub fundamental_set_counts: BTreeMap<u64, (u64, f64)>,
    pub n_draws: usize,
    pub seed: u64,
}

impl SimulationResult {
    /// Expected cost and standard error under another cost exponent, from
    /// the stored histogram.
    pub fn expected_cost_at(&self, spec: &CostSpec) -> Estimate {
        estimate_from_histogram(&self.default_histogram, spec)
    }

    /// Empirical `q(n)`.
    pub fn default_distribution(&self) -> Vec<f64> {
        let d = self.n_draws as f64;
        self.default_histogram.iter().map(|&c| c as f64 / d).collect()
    }
}

pub(crate) fn estimate_from_histogram(histogram: &[u64], spec: &CostSpec) -> Estimate {
    let draws: u64 = histogram.iter().sum();
    let d = draws as f64;
    let mean = neumaier_sum(histogram.iter().enumerate().map(|(n, &c)| c as f64 * cost(n, spec))) / d;
    let std_error = if draws > 1 {
        let ss = neumaier_sum(histogram.iter().enumerate().map(|(n, &c)| {
            let dev = cost(n, spec) - mean;
            c as f64 * dev * dev
        }));
        (ss / (d - 1.0) / d).sqrt()
    } else {
        0.0
    };
    Estimate { value: mean, std_error }
}

struct CostAccumulator {
    histogram: Vec<u64>,
    sets: BTreeMap<u64, (u64, f64)>,
}

/// Monte Carlo estimate of the expected cost of `portfolio` on `network`.
pub fn monte_carlo_expected_cost(
    network: &Network,
    universe: &AssetUniverse,
    portfolio: &PortfolioMatrix,
    spec: &CostSpec,
    n_draws: usize,
    seed: u64,
) -> Result<SimulationResult, RiskError> {
    if n_draws == 0 {
        return Err(RiskError::NoDraws);
    }
    let n = network.n_banks();
    let costs = spec.table(n);
    let parts = simulate_batches(
        network,
        universe,
        portfolio,
        n_draws,
        seed,
        || CostAccumulator {
            histogram: vec![0; n + 1],
            sets: BTreeMap::new(),
        },
        |acc, out| {
            acc.histogram[out.n_defaults] += 1;
            let e = acc.sets.entry(out.fundamental).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += costs[out.n_defaults];
        },
    )?;
    let mut histogram = vec![0u64; n + 1];
    let mut sets: BTreeMap<u64, (u64, f64)> = BTreeMap::new();
    for part in parts {
        for (h, c) in histogram.iter_mut().zip(part.histogram) {
            *h += c;
        }
        for (mask, (count, total)) in part.sets {
            let e = sets.entry(mask).or_insert((0, 0.0));
            e.0 += count;
            e.1 += total;
        }
    }
    let est = estimate_from_histogram(&histogram, spec);
    Ok(SimulationResult {
        expected_cost: est.value,
        std_error: est.std_error,
        default_histogram: histogram,
        fundamental_set_counts: sets,
        n_draws,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::BalanceRatios;
    use crate::graph::Topology;
    use approx::assert_abs_diff_eq;

    fn stirling2(n: usize, k: usize) -> f64 {
        let mut t = vec![vec![0.0; k + 1]; n + 1];
        t[0][0] = 1.0;
        for i in 1..=n {
            for j in 1..=k.min(i) {
                t[i][j] = j as f64 * t[i - 1][j] + t[i - 1][j - 1];
            }
        }
        t[n][k]
    }

    /// E[X^s] = sum_j S(s, j) n!/(n-j)! p^j for integer s.
    fn binomial_moment(n: usize, p: f64, s: usize) -> f64 {
        (0..=s.min(n))
            .map(|j| {
                let falling: f64 = (0..j).map(|i| (n - i) as f64).product();
                stirling2(s, j) * falling * p.powi(j as i32)
            })
            .sum()
    }

    #[test]
    fn cost_examples() {
        assert_eq!(cost(0, &CostSpec::new(4.0).unwrap()), 0.0);
        assert_eq!(cost(2, &CostSpec::new(4.0).unwrap()), 16.0);
        assert_eq!(cost(3, &CostSpec::new(1.0).unwrap()), 3.0);
        assert!(CostSpec::new(0.5).is_err());
        assert!(CostSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn diversity_closed_form_examples() {
        let s4 = CostSpec::new(4.0).unwrap();
        assert_abs_diff_eq!(expected_cost_diversity(1, 0.3, &s4).unwrap(), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(expected_cost_diversity(2, 0.1, &s4).unwrap(), 0.34, epsilon = 1e-14);
        let s1 = CostSpec::new(1.0).unwrap();
        assert_abs_diff_eq!(expected_cost_diversity(5, 0.1, &s1).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn diversity_is_the_binomial_moment() {
        for n in 1..=20 {
            for &p in &[0.05, 0.1, 0.2, 0.5] {
                for s in 1..=6 {
                    let spec = CostSpec::new(s as f64).unwrap();
                    let got = expected_cost_diversity(n, p, &spec).unwrap();
                    let want = binomial_moment(n, p, s);
                    assert!((got - want).abs() <= 1e-11 * want.max(1.0), "n={n} p={p} s={s}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn diversification_normal_factor() {
        let s4 = CostSpec::new(4.0).unwrap();
        let prob = diversification_default_probability(5, 0.2, ReturnFamily::Normal, 0, 0).unwrap();
        assert_abs_diff_eq!(prob.value, 0.0299, epsilon = 1e-4);
        let c = expected_cost_diversification(5, 0.2, &s4, ReturnFamily::Normal, 0, 0).unwrap();
        assert_abs_diff_eq!(c.value, prob.value * 625.0, epsilon = 1e-12);
        let one = expected_cost_diversification(1, 0.2, &s4, ReturnFamily::Normal, 0, 0).unwrap();
        assert_abs_diff_eq!(one.value, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn diversification_declines_for_large_n() {
        let s4 = CostSpec::new(4.0).unwrap();
        let values: Vec<f64> = (30..=60)
            .map(|n| expected_cost_diversification(n, 0.1, &s4, ReturnFamily::Normal, 0, 0).unwrap().value)
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn t_diversification_single_asset_recovers_p() {
        let est = diversification_default_probability(1, 0.1, ReturnFamily::StudentT { dof: 3.0 }, 100_000, 3).unwrap();
        assert!((est.value - 0.1).abs() < 3.0 * est.std_error + 1e-12, "{est:?}");
    }

    #[test]
    fn histogram_estimate_matches_direct_mean() {
        let spec = CostSpec::new(2.0).unwrap();
        let est = estimate_from_histogram(&[3, 1, 0, 1], &spec);
        // costs 0, 0, 0, 1, 9
        let (m, se) = crate::stats::mean_and_se(&[0.0, 0.0, 0.0, 1.0, 9.0]);
        assert_abs_diff_eq!(est.value, m, epsilon = 1e-15);
        assert_abs_diff_eq!(est.std_error, se, epsilon = 1e-15);
    }

    #[test]
    fn zero_variance_universe_costs_nothing() {
        let net = Network::new(Topology::complete(5).unwrap(), &BalanceRatios::default()).unwrap();
        let u = AssetUniverse::independent(5, ReturnFamily::Normal, 0.0).unwrap();
        let pf = PortfolioMatrix::full_diversity(5, 5);
        let r = monte_carlo_expected_cost(&net, &u, &pf, &CostSpec::default(), 5000, 1).unwrap();
        assert_eq!(r.expected_cost, 0.0);
        assert_eq!(r.default_histogram[0], 5000);
    }
}
