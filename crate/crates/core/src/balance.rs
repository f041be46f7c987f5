//! Bank balance sheets and the interbank liability-weight matrix.
//!
//! Every connected bank shares the same balance-sheet composition and each
//! edge carries one unit loan in each direction, so a bank's size scales with
//! its degree: `l = p_bar = k * unit_loan`, and the remaining items follow
//! from the capital ratios.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Topology;

/// Tolerance for the balance-sheet identity and ratio consistency checks.
const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BalanceError {
    #[error("ratio `{field}` must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("capital_to_assets must lie in (0, 1), got {0}")]
    CapitalRatioRange(f64),
    #[error("ratios imply a negative riskless asset holding (b/w = {0})")]
    NegativeRiskless(f64),
    #[error("ratios imply negative deposits (d/w = {0})")]
    NegativeDeposits(f64),
    #[error(
        "interbank asset and liability ratios must match under symmetric unit loans \
         (l/w = {assets}, p_bar/w = {liabilities})"
    )]
    AsymmetricInterbank { assets: f64, liabilities: f64 },
}

/// Common balance-sheet ratios. `Default` is the baseline calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BalanceRatios {
    /// `w / (a + b + l)`
    pub capital_to_assets: f64,
    /// `a / w`
    pub external_to_capital: f64,
    /// `l / w`
    pub ib_asset_to_capital: f64,
    /// `p_bar / w`
    pub ib_liability_to_capital: f64,
    /// Money volume of one interbank loan.
    pub unit_loan: f64,
}

impl Default for BalanceRatios {
    fn default() -> Self {
        Self {
            capital_to_assets: 0.1,
            external_to_capital: 5.0,
            ib_asset_to_capital: 4.0,
            ib_liability_to_capital: 4.0,
            unit_loan: 1.0,
        }
    }
}

impl BalanceRatios {
    pub fn validate(&self) -> Result<(), BalanceError> {
        for (field, value) in [
            ("capital_to_assets", self.capital_to_assets),
            ("external_to_capital", self.external_to_capital),
            ("ib_asset_to_capital", self.ib_asset_to_capital),
            ("ib_liability_to_capital", self.ib_liability_to_capital),
            ("unit_loan", self.unit_loan),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(BalanceError::NonPositive { field, value });
            }
        }
        if self.capital_to_assets >= 1.0 {
            return Err(BalanceError::CapitalRatioRange(self.capital_to_assets));
        }
        if (self.ib_asset_to_capital - self.ib_liability_to_capital).abs() > IDENTITY_TOL {
            return Err(BalanceError::AsymmetricInterbank {
                assets: self.ib_asset_to_capital,
                liabilities: self.ib_liability_to_capital,
            });
        }
        let b = self.riskless_to_capital();
        if b < -IDENTITY_TOL {
            return Err(BalanceError::NegativeRiskless(b));
        }
        let d = self.deposits_to_capital();
        if d < -IDENTITY_TOL {
            return Err(BalanceError::NegativeDeposits(d));
        }
        Ok(())
    }

    /// `b / w` implied by the asset side.
    pub fn riskless_to_capital(&self) -> f64 {
        1.0 / self.capital_to_assets - self.external_to_capital - self.ib_asset_to_capital
    }

    /// `d / w` implied by the liability side.
    pub fn deposits_to_capital(&self) -> f64 {
        1.0 / self.capital_to_assets - self.ib_liability_to_capital - 1.0
    }

    /// Per-unit external return below which a bank fails even when all
    /// counterparties repay in full: `-w / a`.
    pub fn default_return_threshold(&self) -> f64 {
        -1.0 / self.external_to_capital
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankBalanceSheet {
    /// External risk assets.
    pub a: f64,
    /// Riskless asset.
    pub b: f64,
    /// Interbank assets.
    pub l: f64,
    /// Interbank liabilities at face value.
    pub p_bar: f64,
    /// Deposits.
    pub d: f64,
    /// Net worth.
    pub w: f64,
}

impl BankBalanceSheet {
    /// Funds left for interbank creditors once external assets are worth
    /// `a_tilde`: deposits are senior and come off first.
    pub fn cash(&self, a_tilde: f64) -> f64 {
        a_tilde + self.b - self.d
    }

    pub fn identity_gap(&self) -> f64 {
        (self.a + self.b + self.l) - (self.p_bar + self.d + self.w)
    }
}

/// Row-stochastic borrowing weights: `pi[i][j]` is the share of bank i's
/// interbank debt owed to bank j.
#[derive(Debug, Clone, PartialEq)]
pub struct LiabilityMatrix {
    n: usize,
    pi: Vec<f64>,
}

impl LiabilityMatrix {
    pub fn from_dense(n: usize, pi: Vec<f64>) -> Self {
        assert_eq!(pi.len(), n * n, "liability matrix must be n x n");
        Self { n, pi }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pi[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.pi[i * self.n..(i + 1) * self.n].iter().sum()
    }

    /// `Pi' x`: what each bank receives when bank j pays `x[j]`.
    pub fn transpose_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut out = vec![0.0; self.n];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.pi[j * self.n + i] * xj;
            }
        }
        out
    }
}

/// Equal weights `1/k_i` on each of bank i's neighbours.
pub fn liability_weights(t: &Topology) -> LiabilityMatrix {
    let n = t.n_banks();
    let mut pi = vec![0.0; n * n];
    for i in 0..n {
        let k = t.degree(i);
        for &j in t.neighbors(i) {
            pi[i * n + j] = 1.0 / k as f64;
        }
    }
    LiabilityMatrix { n, pi }
}

/// Balance sheets for every bank of `t`.
///
/// Isolated banks hold no interbank positions; they are normalised to one
/// money unit of external assets with the same capital and riskless ratios,
/// so their failure threshold is the same per-unit return `-w/a`.
pub fn build_balance_sheets(
    t: &Topology,
    ratios: &BalanceRatios,
) -> Result<Vec<BankBalanceSheet>, BalanceError> {
    ratios.validate()?;
    let b_ratio = ratios.riskless_to_capital().max(0.0);
    let d_ratio = ratios.deposits_to_capital().max(0.0);
    let sheets = (0..t.n_banks())
        .map(|i| {
            let k = t.degree(i);
            if k == 0 {
                let a = 1.0;
                let w = a / ratios.external_to_capital;
                let b = b_ratio * w;
                BankBalanceSheet {
                    a,
                    b,
                    l: 0.0,
                    p_bar: 0.0,
                    d: a + b - w,
                    w,
                }
            } else {
                let l = k as f64 * ratios.unit_loan;
                let w = l / ratios.ib_asset_to_capital;
                BankBalanceSheet {
                    a: ratios.external_to_capital * w,
                    b: b_ratio * w,
                    l,
                    p_bar: ratios.ib_liability_to_capital * w,
                    d: d_ratio * w,
                    w,
                }
            }
        })
        .collect();
    Ok(sheets)
}
