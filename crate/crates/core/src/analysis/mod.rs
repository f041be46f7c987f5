//! Experiments built on the Monte Carlo engine.

mod contagion;
mod decompose;
mod dg;
mod optimize;
mod sstar;
mod topology;

use thiserror::Error;

pub use contagion::{contagion_and_infection, contagion_matrix, infection_scores, ContagionMatrix, InfectionScores};
pub use decompose::{decompose_collective_defaults, fig11_order, DecompositionEntry, DecompositionTable, MAX_DECOMPOSITION_BANKS};
pub use dg::{dg_landscape, DgLandscape, DgPoint, PortfolioKind};
pub use optimize::{
    optimize_allocation_discrete, AllocationEntry, AllocationResult, AllocationSweep, TieRule, MAX_OPTIMIZER_BANKS,
};
pub use sstar::{c_a, c_b, s_star_residual, s_star_threshold};
pub use topology::{optimization_vs_topology, optimization_vs_topology_multi, TopologyRow};

use crate::assets::{AssetUniverse, PortfolioMatrix, ReturnFamily};
use crate::balance::BalanceRatios;
use crate::graph::Topology;
use crate::risk::{CostSpec, Network, RiskError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error("{what} supports at most {max} banks, got {n}")]
    TooManyBanks { what: &'static str, n: usize, max: usize },
    #[error("the allocation search needs the six-asset universe")]
    NotSixAssets,
    #[error("need 0 < q < p < 1, got p = {p}, q = {q}")]
    ProbabilityOrder { p: f64, q: f64 },
    #[error("at least {min} portfolios are required, got {got}")]
    TooFewPortfolios { min: usize, got: usize },
}

impl From<crate::assets::AssetError> for AnalysisError {
    fn from(e: crate::assets::AssetError) -> Self {
        AnalysisError::Risk(e.into())
    }
}

impl From<crate::graph::GraphError> for AnalysisError {
    fn from(e: crate::graph::GraphError) -> Self {
        AnalysisError::Risk(e.into())
    }
}

/// A network with a fixed asset universe and portfolio.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: Network,
    pub universe: AssetUniverse,
    pub portfolio: PortfolioMatrix,
    pub spec: CostSpec,
}

impl Scenario {
    pub fn new(
        network: Network,
        universe: AssetUniverse,
        portfolio: PortfolioMatrix,
        spec: CostSpec,
    ) -> Result<Self, AnalysisError> {
        network.check_portfolio(&universe, &portfolio)?;
        Ok(Self {
            network,
            universe,
            portfolio,
            spec,
        })
    }

    /// Each bank holds its own i.i.d. asset, calibrated so that a bank fails
    /// on its own with probability `p`.
    pub fn full_diversity(
        topology: Topology,
        ratios: &BalanceRatios,
        family: ReturnFamily,
        p: f64,
        spec: CostSpec,
    ) -> Result<Self, AnalysisError> {
        let n = topology.n_banks();
        let network = Network::new(topology, ratios)?;
        let universe = AssetUniverse::calibrated_independent(n, family, p, ratios.default_return_threshold())?;
        Self::new(network, universe, PortfolioMatrix::full_diversity(n, n), spec)
    }
}
