//! Cost of simultaneous defaults without a network, across system sizes and
//! degrees of portfolio overlap.

use serde::Serialize;

use super::{monte_carlo_expected_cost, CostSpec, Network, RiskError};
use crate::assets::{AssetUniverse, PortfolioMatrix, ReturnFamily};
use crate::balance::BalanceRatios;
use crate::graph::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Each bank holds its own asset.
    FullDiversity,
    /// Every bank holds the equal-weighted portfolio of all assets.
    FullDiversification,
    /// The first `m` banks diversify; the rest hold their own asset.
    MDiversified(usize),
}

impl SweepMode {
    pub fn label(&self) -> String {
        match self {
            SweepMode::FullDiversity => "full_diversity".into(),
            SweepMode::FullDiversification => "full_diversification".into(),
            SweepMode::MDiversified(m) => format!("m_diversified_{m}"),
        }
    }

    fn portfolio(&self, n: usize) -> Result<PortfolioMatrix, RiskError> {
        Ok(match *self {
            SweepMode::FullDiversity => PortfolioMatrix::full_diversity(n, n),
            SweepMode::FullDiversification => PortfolioMatrix::full_diversification(n, n),
            SweepMode::MDiversified(m) => PortfolioMatrix::partially_diversified(n, m)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scenario_id: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    pub p: f64,
    pub family: String,
    pub mode: String,
    pub expected_cost: f64,
    pub std_error: f64,
    pub draws: usize,
    pub seed: u64,
}

/// Monte Carlo expected cost for every combination of size, family and
/// mode. `n` banks face `n` i.i.d. assets calibrated so a single-asset bank
/// fails with probability `p`. All rows share `seed`, so rows with the same
/// `n` and family see the same return draws.
pub fn simultaneity_sweep(
    n_list: &[usize],
    families: &[ReturnFamily],
    p: f64,
    spec: &CostSpec,
    modes: &[SweepMode],
    draws: usize,
    seed: u64,
) -> Result<Vec<SweepRow>, RiskError> {
    let ratios = BalanceRatios::default();
    let threshold = ratios.default_return_threshold();
    let mut rows = Vec::new();
    for &family in families {
        for &n in n_list {
            let network = Network::new(Topology::empty(n)?, &ratios)?;
            let universe = AssetUniverse::calibrated_independent(n, family, p, threshold)?;
            for mode in modes {
                let portfolio = mode.portfolio(n)?;
                let r = monte_carlo_expected_cost(&network, &universe, &portfolio, spec, draws, seed)?;
                rows.push(SweepRow {
                    scenario_id: format!("{}-{}-n{n}", family.label(), mode.label()),
                    n,
                    s: spec.s,
                    p,
                    family: family.label(),
                    mode: mode.label(),
                    expected_cost: r.expected_cost,
                    std_error: r.std_error,
                    draws,
                    seed,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario_id",
        "N",
        "s",
        "p",
        "family",
        "mode",
        "expected_cost",
        "std_error",
        "draws",
        "seed",
    ])?;
    for r in rows {
        w.write_record([
            r.scenario_id.clone(),
            r.n.to_string(),
            crate::fmt_float(r.s),
            crate::fmt_float(r.p),
            r.family.clone(),
            r.mode.clone(),
            crate::fmt_float(r.expected_cost),
            crate::fmt_float(r.std_error),
            r.draws.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
