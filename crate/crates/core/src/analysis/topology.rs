//! Optimal allocation against the two fixed policies on every connected
//! five-bank network.

use super::{AllocationResult, AllocationSweep, AnalysisError, TieRule};
use crate::assets::{AssetUniverse, PortfolioMatrix};
use crate::balance::BalanceRatios;
use crate::graph::{canonical_code, enumerate_connected_topologies, ShareWeighting, Topology};
use crate::risk::{monte_carlo_expected_cost, CostSpec, Estimate, Network};

const N: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyRow {
    pub topology: Topology,
    pub code: u64,
    pub entropy_degree: f64,
    pub entropy_pagerank: f64,
    pub hhi_degree: f64,
    pub hhi_pagerank: f64,
    pub s: f64,
    /// Bank i holds independent asset i.
    pub cost_full_diversity: Estimate,
    /// Every bank holds the mean of five independent assets.
    pub cost_full_diversification: Estimate,
    /// Best single-asset allocation in the correlated universe.
    pub cost_optimal: Estimate,
    pub allocation: AllocationResult,
}

/// One row per connected five-bank topology, for a single cost exponent.
pub fn optimization_vs_topology(
    spec: &CostSpec,
    rho: f64,
    p: f64,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<TopologyRow>, AnalysisError> {
    Ok(optimization_vs_topology_multi(&[*spec], rho, p, n_draws, seed, TieRule::default())?
        .pop()
        .expect("one spec"))
}

/// As [`optimization_vs_topology`] for several exponents from one set of
/// simulations; the outer vector follows `specs`.
///
/// The fixed policies use the six-asset universe at zero correlation, whose
/// first five assets are independent and whose sixth is their mean. The
/// optimum uses the universe at `rho`. Both are driven by the same seed, so
/// they share the underlying normal draws.
pub fn optimization_vs_topology_multi(
    specs: &[CostSpec],
    rho: f64,
    p: f64,
    n_draws: usize,
    seed: u64,
    rule: TieRule,
) -> Result<Vec<Vec<TopologyRow>>, AnalysisError> {
    let ratios = BalanceRatios::default();
    let threshold = ratios.default_return_threshold();
    let independent = AssetUniverse::calibrated_correlated_six(0.0, p, threshold)?;
    let correlated = AssetUniverse::calibrated_correlated_six(rho, p, threshold)?;
    let diversity = PortfolioMatrix::from_assignment(&[0, 1, 2, 3, 4], 6)?;
    let diversification = PortfolioMatrix::from_assignment(&[5; N], 6)?;
    let base_spec = specs.first().copied().unwrap_or_default();

    let mut out: Vec<Vec<TopologyRow>> = vec![Vec::new(); specs.len()];
    for topology in enumerate_connected_topologies(N)? {
        let network = Network::new(topology.clone(), &ratios)?;
        let by_degree = topology.fragility(ShareWeighting::Degree)?;
        let by_pagerank = topology.fragility(ShareWeighting::PageRank)?;
        let fd = monte_carlo_expected_cost(&network, &independent, &diversity, &base_spec, n_draws, seed)?;
        let fdn = monte_carlo_expected_cost(&network, &independent, &diversification, &base_spec, n_draws, seed)?;
        let sweep = AllocationSweep::run(&network, &correlated, n_draws, seed)?;
        for (spec, rows) in specs.iter().zip(out.iter_mut()) {
            let allocation = sweep.result(spec, rule);
            rows.push(TopologyRow {
                topology: topology.clone(),
                code: canonical_code(&topology)?,
                entropy_degree: by_degree.entropy,
                entropy_pagerank: by_pagerank.entropy,
                hhi_degree: by_degree.hhi,
                hhi_pagerank: by_pagerank.hhi,
                s: spec.s,
                cost_full_diversity: fd.expected_cost_at(spec),
                cost_full_diversification: fdn.expected_cost_at(spec),
                cost_optimal: Estimate {
                    value: allocation.best_cost,
                    std_error: allocation.best_std_error,
                },
                allocation,
            });
        }
    }
    Ok(out)
}
