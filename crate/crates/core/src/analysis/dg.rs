//! Random scan over continuous portfolio weights, summarised by the
//! distance between banks `D` and the distance from equal weights `G`.

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use super::AnalysisError;
use crate::assets::{sample_returns, stream_rng, AssetUniverse, PortfolioMatrix, ReturnSample};
use crate::risk::{estimate_from_histogram, CostSpec, Estimate, Network};

/// Portfolio streams start here, far above the return-batch streams.
const PORTFOLIO_STREAM_BASE: u64 = 1 << 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortfolioKind {
    FullDiversity,
    FullDiversification,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgPoint {
    pub kind: PortfolioKind,
    pub d: f64,
    pub g: f64,
    pub expected_cost: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgLandscape {
    /// Full diversity first, then full diversification, then random patterns.
    pub points: Vec<DgPoint>,
    pub portfolios: Vec<PortfolioMatrix>,
    pub best_index: usize,
    /// Cost of full diversification minus the best cost, estimated per draw
    /// on the shared returns.
    pub diversification_gap: Estimate,
    pub n_draws: usize,
    pub seed: u64,
}

impl DgLandscape {
    pub fn best(&self) -> &DgPoint {
        &self.points[self.best_index]
    }

    pub fn full_diversification(&self) -> &DgPoint {
        &self.points[1]
    }
}

/// Row-stochastic weights with every row uniform on the simplex.
fn random_portfolio(n: usize, k: usize, seed: u64, index: u64) -> Result<PortfolioMatrix, AnalysisError> {
    let mut rng = stream_rng(seed, PORTFOLIO_STREAM_BASE + index);
    let mut weights = Vec::with_capacity(n * k);
    for _ in 0..n {
        let e: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = e.iter().sum();
        weights.extend(e.iter().map(|x| x / total));
    }
    Ok(PortfolioMatrix::new(n, k, weights)?)
}

fn default_counts(network: &Network, portfolio: &PortfolioMatrix, sample: &ReturnSample) -> Result<Vec<u8>, AnalysisError> {
    let mut ws = network.workspace();
    sample
        .rows()
        .map(|row| Ok(network.evaluate_portfolio(portfolio, row, &mut ws)?.n_defaults as u8))
        .collect()
}

fn histogram(counts: &[u8], n: usize) -> Vec<u64> {
    let mut h = vec![0u64; n + 1];
    for &c in counts {
        h[c as usize] += 1;
    }
    h
}

/// Evaluates `n_portfolios` patterns (the two corners plus random ones) on
/// one shared set of `n_draws` return draws.
pub fn dg_landscape(
    network: &Network,
    universe: &AssetUniverse,
    spec: &CostSpec,
    n_portfolios: usize,
    n_draws: usize,
    seed: u64,
) -> Result<DgLandscape, AnalysisError> {
    if n_portfolios < 2 {
        return Err(AnalysisError::TooFewPortfolios { min: 2, got: n_portfolios });
    }
    if n_draws == 0 {
        return Err(crate::risk::RiskError::NoDraws.into());
    }
    let n = network.n_banks();
    let k = universe.k_assets();
    let mut portfolios = vec![PortfolioMatrix::full_diversity(n, k), PortfolioMatrix::full_diversification(n, k)];
    for index in 0..(n_portfolios - 2) as u64 {
        portfolios.push(random_portfolio(n, k, seed, index)?);
    }
    network.check_portfolio(universe, &portfolios[0])?;
    let sample = sample_returns(universe, n_draws, seed);

    let estimates: Vec<Estimate> = portfolios
        .par_iter()
        .map(|pf| Ok(estimate_from_histogram(&histogram(&default_counts(network, pf, &sample)?, n), spec)))
        .collect::<Result<_, AnalysisError>>()?;
    let best_index = (0..estimates.len())
        .min_by(|&a, &b| estimates[a].value.total_cmp(&estimates[b].value).then(a.cmp(&b)))
        .expect("at least two portfolios");

    let costs = spec.table(n);
    let div = default_counts(network, &portfolios[1], &sample)?;
    let best = default_counts(network, &portfolios[best_index], &sample)?;
    let diffs: Vec<f64> = div.iter().zip(&best).map(|(&a, &b)| costs[a as usize] - costs[b as usize]).collect();
    let (gap, gap_se) = crate::stats::mean_and_se(&diffs);

    let kinds = [PortfolioKind::FullDiversity, PortfolioKind::FullDiversification];
    let points = portfolios
        .iter()
        .zip(&estimates)
        .enumerate()
        .map(|(i, (pf, e))| DgPoint {
            kind: kinds.get(i).copied().unwrap_or(PortfolioKind::Random),
            d: pf.distance_d(),
            g: pf.distance_g(),
            expected_cost: e.value,
            std_error: e.std_error,
        })
        .collect();
    Ok(DgLandscape {
        points,
        portfolios,
        best_index,
        diversification_gap: Estimate {
            value: gap,
            std_error: gap_se,
        },
        n_draws,
        seed,
    })
}
