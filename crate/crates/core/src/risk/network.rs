//! A topology with its balance sheets and clearing engine, evaluated one
//! return draw at a time.

use rayon::prelude::*;

use super::RiskError;
use crate::assets::{batch_layout, AssetUniverse, PortfolioMatrix};
use crate::balance::{build_balance_sheets, liability_weights, BalanceRatios, BankBalanceSheet};
use crate::clearing::{ClearingEngine, ClearingOptions, ClearingWorkspace};
use crate::graph::Topology;

/// Default sets are stored as bit masks.
pub const MAX_BANKS: usize = 64;

#[derive(Debug, Clone)]
pub struct Network {
    topology: Topology,
    sheets: Vec<BankBalanceSheet>,
    engine: Option<ClearingEngine>,
    threshold: f64,
}

/// Outcome of one draw. Bit `i` of a mask is bank `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DrawOutcome {
    pub n_defaults: usize,
    pub defaulted: u64,
    pub fundamental: u64,
    pub all_bankrupt: bool,
}

impl DrawOutcome {
    pub fn contagious(&self) -> u64 {
        self.defaulted & !self.fundamental
    }
}

#[derive(Debug, Clone)]
pub struct NetworkWorkspace {
    bank_returns: Vec<f64>,
    cash: Vec<f64>,
    clearing: Option<ClearingWorkspace>,
}

impl Network {
    pub fn new(topology: Topology, ratios: &BalanceRatios) -> Result<Self, RiskError> {
        Self::with_options(topology, ratios, ClearingOptions::default())
    }

    pub fn with_options(topology: Topology, ratios: &BalanceRatios, opts: ClearingOptions) -> Result<Self, RiskError> {
        let n = topology.n_banks();
        if n > MAX_BANKS {
            return Err(RiskError::TooManyBanks { n, max: MAX_BANKS });
        }
        if topology.n_edges() > 0 && !topology.is_connected() {
            return Err(RiskError::Disconnected);
        }
        let sheets = build_balance_sheets(&topology, ratios)?;
        let engine = if topology.n_edges() > 0 {
            let p_bar: Vec<f64> = sheets.iter().map(|s| s.p_bar).collect();
            Some(ClearingEngine::new(&liability_weights(&topology), &p_bar, opts)?)
        } else {
            None
        };
        Ok(Self {
            topology,
            sheets,
            engine,
            threshold: ratios.default_return_threshold(),
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn sheets(&self) -> &[BankBalanceSheet] {
        &self.sheets
    }

    pub fn n_banks(&self) -> usize {
        self.topology.n_banks()
    }

    /// False for the no-network mode, where clearing is skipped.
    pub fn has_edges(&self) -> bool {
        self.engine.is_some()
    }

    /// Per-unit external return below which a bank fails on its own.
    pub fn default_return_threshold(&self) -> f64 {
        self.threshold
    }

    pub fn workspace(&self) -> NetworkWorkspace {
        let n = self.n_banks();
        NetworkWorkspace {
            bank_returns: vec![0.0; n],
            cash: vec![0.0; n],
            clearing: self.engine.as_ref().map(ClearingEngine::workspace),
        }
    }

    /// Clears one draw given each bank's portfolio return.
    pub fn evaluate(&self, bank_returns: &[f64], ws: &mut NetworkWorkspace) -> Result<DrawOutcome, RiskError> {
        let n = self.n_banks();
        if bank_returns.len() != n {
            return Err(RiskError::Dimension(format!("{n} banks, {} returns", bank_returns.len())));
        }
        let Some(engine) = &self.engine else {
            let mut mask = 0u64;
            for (i, &r) in bank_returns.iter().enumerate() {
                if r < self.threshold {
                    mask |= 1 << i;
                }
            }
            return Ok(DrawOutcome {
                n_defaults: mask.count_ones() as usize,
                defaulted: mask,
                fundamental: mask,
                all_bankrupt: false,
            });
        };
        for ((c, s), r) in ws.cash.iter_mut().zip(&self.sheets).zip(bank_returns) {
            *c = s.cash(s.a * (1.0 + r));
        }
        let cws = ws.clearing.as_mut().expect("workspace built for this network");
        let draw = engine.clear(&ws.cash, cws)?;
        Ok(DrawOutcome {
            n_defaults: draw.n_defaults,
            defaulted: to_mask(&cws.defaulted),
            fundamental: to_mask(&cws.fundamental),
            all_bankrupt: draw.all_bankrupt,
        })
    }

    /// Values `portfolio` on one row of asset returns and clears.
    pub fn evaluate_portfolio(
        &self,
        portfolio: &PortfolioMatrix,
        asset_returns: &[f64],
        ws: &mut NetworkWorkspace,
    ) -> Result<DrawOutcome, RiskError> {
        let mut r = std::mem::take(&mut ws.bank_returns);
        portfolio.bank_returns_into(asset_returns, &mut r);
        let out = self.evaluate(&r, ws);
        ws.bank_returns = r;
        out
    }

    pub(crate) fn check_portfolio(&self, universe: &AssetUniverse, portfolio: &PortfolioMatrix) -> Result<(), RiskError> {
        if portfolio.n_banks() != self.n_banks() || portfolio.k_assets() != universe.k_assets() {
            return Err(RiskError::Dimension(format!(
                "portfolio is {}x{}, network has {} banks and universe {} assets",
                portfolio.n_banks(),
                portfolio.k_assets(),
                self.n_banks(),
                universe.k_assets()
            )));
        }
        Ok(())
    }
}

fn to_mask(flags: &[bool]) -> u64 {
    flags
        .iter()
        .enumerate()
        .fold(0u64, |m, (i, &f)| if f { m | 1 << i } else { m })
}

/// Runs every draw through `visit`, one accumulator per batch of
/// [`crate::assets::BATCH_ROWS`] draws. Batches run in parallel; the returned
/// accumulators are in batch order, so merging them sequentially gives
/// results independent of the thread count.
pub(crate) fn simulate_batches<A, I, V>(
    network: &Network,
    universe: &AssetUniverse,
    portfolio: &PortfolioMatrix,
    n_draws: usize,
    seed: u64,
    init: I,
    visit: V,
) -> Result<Vec<A>, RiskError>
where
    A: Send,
    I: Fn() -> A + Sync,
    V: Fn(&mut A, &DrawOutcome) + Sync,
{
    network.check_portfolio(universe, portfolio)?;
    let k = universe.k_assets();
    let batches: Vec<(u64, usize)> = batch_layout(n_draws).collect();
    batches
        .into_par_iter()
        .map(|(batch, rows)| {
            let mut returns = vec![0.0; rows * k];
            universe.fill_batch(seed, batch, rows, &mut returns);
            let mut ws = network.workspace();
            let mut acc = init();
            for row in returns.chunks_exact(k) {
                let out = network.evaluate_portfolio(portfolio, row, &mut ws)?;
                visit(&mut acc, &out);
            }
            Ok(acc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_disconnected_networks_with_edges() {
        let t = Topology::new(4, &[(1, 2), (3, 4)]).unwrap();
        assert!(matches!(
            Network::new(t, &BalanceRatios::default()),
            Err(RiskError::Disconnected)
        ));
    }

    #[test]
    fn isolated_banks_use_the_return_threshold() {
        let net = Network::new(Topology::empty(3).unwrap(), &BalanceRatios::default()).unwrap();
        assert!(!net.has_edges());
        let mut ws = net.workspace();
        let out = net.evaluate(&[-0.25, -0.1, -0.2001], &mut ws).unwrap();
        assert_eq!(out.defaulted, 0b101);
        assert_eq!(out.fundamental, 0b101);
        assert_eq!(out.contagious(), 0);
        assert_eq!(out.n_defaults, 2);
    }

    #[test]
    fn star_hub_failure_masks() {
        let net = Network::new(Topology::star(5).unwrap(), &BalanceRatios::default()).unwrap();
        let mut ws = net.workspace();
        let calm = net.evaluate(&[0.0; 5], &mut ws).unwrap();
        assert_eq!(calm, DrawOutcome::default());
        let hit = net.evaluate(&[-1.0, 0.0, 0.0, 0.0, 0.0], &mut ws).unwrap();
        assert_eq!(hit.fundamental, 1);
        assert_eq!(hit.defaulted & 1, 1);
        assert_eq!(hit.contagious(), hit.defaulted & !1);
    }

    #[test]
    fn dimension_check() {
        let net = Network::new(Topology::complete(3).unwrap(), &BalanceRatios::default()).unwrap();
        let mut ws = net.workspace();
        assert!(matches!(net.evaluate(&[0.0; 2], &mut ws), Err(RiskError::Dimension(_))));
    }
}
