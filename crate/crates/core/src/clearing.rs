//! Interbank clearing: the greatest fixed point of
//! `Phi(p) = p_bar ∧ (Pi' p + cash)`, clipped into `[0, p_bar]`.
//!
//! `cash_i = a_tilde_i + b_i - d_i` is what bank i has for interbank creditors
//! before receiving anything from its debtors; it can be negative. When the
//! network is strongly connected and `sum(cash) > 0` the fixed point is
//! unique; when `sum(cash) <= 0` every bank is declared bankrupt.
//!
//! Two solvers are provided. [`ClearingMethod::FictitiousDefault`] guesses
//! which banks pay in full, pay partially or pay nothing, solves the linear
//! system for the partial payers, and repeats until the guess reproduces
//! itself; it finishes in a handful of rounds and is what the Monte Carlo
//! loops use. [`ClearingMethod::Picard`] iterates `Phi` down from `p_bar`.
//! Both are checked against [`clearing_vector_oracle`], which enumerates every
//! solvent/partial/zero pattern.

use thiserror::Error;

use crate::balance::LiabilityMatrix;
use crate::linalg;

/// Largest network the brute-force oracle accepts.
pub const ORACLE_MAX_BANKS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClearingError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("face values must be finite and non-negative (bank {0})")]
    NegativeFaceValue(usize),
    #[error("clearing did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("oracle supports at most {max} banks, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error("no consistent payment pattern found")]
    NoConsistentPattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClearingMethod {
    FictitiousDefault,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearingOptions {
    pub method: ClearingMethod,
    /// Picard stopping rule on successive iterates (max norm).
    pub tol: f64,
    /// A bank defaults iff `p*_i < p_bar_i - default_tol`.
    pub default_tol: f64,
    pub max_iter: usize,
}

impl Default for ClearingOptions {
    fn default() -> Self {
        Self {
            method: ClearingMethod::FictitiousDefault,
            tol: 1e-10,
            default_tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearingProblem {
    pub pi: LiabilityMatrix,
    pub p_bar: Vec<f64>,
    pub cash: Vec<f64>,
}

impl ClearingProblem {
    pub fn new(pi: LiabilityMatrix, p_bar: Vec<f64>, cash: Vec<f64>) -> Result<Self, ClearingError> {
        let n = pi.n();
        if p_bar.len() != n || cash.len() != n {
            return Err(ClearingError::Dimension(format!(
                "{n} banks, {} face values, {} cash entries",
                p_bar.len(),
                cash.len()
            )));
        }
        if let Some(i) = p_bar.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ClearingError::NegativeFaceValue(i + 1));
        }
        Ok(Self { pi, p_bar, cash })
    }

    pub fn n(&self) -> usize {
        self.p_bar.len()
    }

    /// One application of the clearing map.
    pub fn payment_map(&self, p: &[f64]) -> Vec<f64> {
        let inflow = self.pi.transpose_mul(p);
        inflow
            .iter()
            .zip(&self.cash)
            .zip(&self.p_bar)
            .map(|((f, c), pb)| (f + c).clamp(0.0, *pb))
            .collect()
    }

    /// Funds of each bank if every counterparty repays in full.
    pub fn full_repayment_funds(&self) -> Vec<f64> {
        let inflow = self.pi.transpose_mul(&self.p_bar);
        inflow.iter().zip(&self.cash).map(|(f, c)| f + c).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearingOutcome {
    pub p_star: Vec<f64>,
    pub defaulted: Vec<bool>,
    pub fundamental: Vec<bool>,
    pub contagious: Vec<bool>,
    pub all_bankrupt_shortcircuit: bool,
}

impl ClearingOutcome {
    pub fn n_defaults(&self) -> usize {
        self.defaulted.iter().filter(|&&d| d).count()
    }
}

/// Fundamental defaults fail even under full repayment; contagious ones are
/// the remaining defaults.
pub fn classify_defaults(cp: &ClearingProblem, defaulted: &[bool], tol: f64) -> (Vec<bool>, Vec<bool>) {
    let funds = cp.full_repayment_funds();
    let fundamental: Vec<bool> = funds.iter().zip(&cp.p_bar).map(|(f, pb)| *f < pb - tol).collect();
    let contagious = defaulted.iter().zip(&fundamental).map(|(&d, &f)| d && !f).collect();
    (fundamental, contagious)
}

pub fn clearing_vector(cp: &ClearingProblem, opts: &ClearingOptions) -> Result<ClearingOutcome, ClearingError> {
    let engine = ClearingEngine::new(&cp.pi, &cp.p_bar, *opts)?;
    let mut ws = engine.workspace();
    let summary = engine.clear(&cp.cash, &mut ws)?;
    let p_star = if summary.all_bankrupt {
        // Payments are undefined here; report the clipped Picard limit.
        engine.picard(&cp.cash, &mut ws).map(|_| ws.payments.clone()).or_else(|e| match e {
            ClearingError::NonConvergence(_) => Ok(ws.payments.clone()),
            other => Err(other),
        })?
    } else {
        ws.payments.clone()
    };
    Ok(ClearingOutcome {
        p_star,
        defaulted: ws.defaulted.clone(),
        fundamental: ws.fundamental.clone(),
        contagious: ws
            .defaulted
            .iter()
            .zip(&ws.fundamental)
            .map(|(&d, &f)| d && !f)
            .collect(),
        all_bankrupt_shortcircuit: summary.all_bankrupt,
    })
}

/// Brute-force clearing vector: tries every assignment of banks to
/// {pays in full, pays its funds, pays nothing}, keeps the assignments that
/// respect limited liability, priority and proportionality, and returns the
/// one with the largest total payment.
pub fn clearing_vector_oracle(cp: &ClearingProblem) -> Result<Vec<f64>, ClearingError> {
    let n = cp.n();
    if n > ORACLE_MAX_BANKS {
        return Err(ClearingError::TooLarge {
            n,
            max: ORACLE_MAX_BANKS,
        });
    }
    let scale = cp
        .p_bar
        .iter()
        .chain(cp.cash.iter())
        .fold(1.0_f64, |m, v| m.max(v.abs()));
    let eps = 1e-9 * scale;
    let total: usize = 3usize.pow(n as u32);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pattern = vec![0u8; n];
    let mut p = vec![0.0; n];

    for code in 0..total {
        let mut c = code;
        for s in pattern.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let partial: Vec<usize> = (0..n).filter(|&i| pattern[i] == 1).collect();
        for i in 0..n {
            p[i] = match pattern[i] {
                0 => cp.p_bar[i],
                _ => 0.0,
            };
        }
        if !partial.is_empty() {
            let m = partial.len();
            let mut a = vec![0.0; m * m];
            let mut rhs = vec![0.0; m];
            for (r, &i) in partial.iter().enumerate() {
                a[r * m + r] = 1.0;
                for (c, &j) in partial.iter().enumerate() {
                    a[r * m + c] -= cp.pi.get(j, i);
                }
                rhs[r] = cp.cash[i] + (0..n).filter(|&j| pattern[j] == 0).map(|j| cp.pi.get(j, i) * cp.p_bar[j]).sum::<f64>();
            }
            if !linalg::solve_in_place(&mut a, &mut rhs, m) {
                continue;
            }
            for (r, &i) in partial.iter().enumerate() {
                p[i] = rhs[r];
            }
        }
        let funds = cp.pi.transpose_mul(&p);
        let consistent = (0..n).all(|i| {
            let f = funds[i] + cp.cash[i];
            match pattern[i] {
                0 => f >= cp.p_bar[i] - eps,
                1 => p[i] >= -eps && p[i] <= cp.p_bar[i] + eps,
                _ => f <= eps,
            }
        });
        if !consistent {
            continue;
        }
        let sum: f64 = p.iter().sum();
        if best.as_ref().is_none_or(|(b, _)| sum > *b + eps) {
            best = Some((sum, p.iter().enumerate().map(|(i, v)| v.clamp(0.0, cp.p_bar[i])).collect()));
        }
    }
    best.map(|(_, p)| p).ok_or(ClearingError::NoConsistentPattern)
}

/// Summary of one clearing; per-bank detail lives in the workspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClearedDraw {
    pub n_defaults: usize,
    pub n_fundamental: usize,
    pub all_bankrupt: bool,
}

/// Scratch buffers reused across clearings of the same network.
#[derive(Debug, Clone)]
pub struct ClearingWorkspace {
    /// Clearing payments; NaN after an all-bankrupt short circuit.
    pub payments: Vec<f64>,
    pub defaulted: Vec<bool>,
    pub fundamental: Vec<bool>,
    funds: Vec<f64>,
    state: Vec<u8>,
    next_state: Vec<u8>,
    partial: Vec<usize>,
    mat: Vec<f64>,
    rhs: Vec<f64>,
}

const SOLVENT: u8 = 0;
const PARTIAL: u8 = 1;
const ZERO: u8 = 2;

/// Precomputed clearing data for one network.
#[derive(Debug, Clone)]
pub struct ClearingEngine {
    n: usize,
    /// `Pi'` row-major: `inflow[i * n + j] = pi[j][i]`.
    inflow: Vec<f64>,
    p_bar: Vec<f64>,
    full_inflow: Vec<f64>,
    opts: ClearingOptions,
    verify_tol: f64,
}

impl ClearingEngine {
    pub fn new(pi: &LiabilityMatrix, p_bar: &[f64], opts: ClearingOptions) -> Result<Self, ClearingError> {
        let n = pi.n();
        if p_bar.len() != n {
            return Err(ClearingError::Dimension(format!("{n} banks, {} face values", p_bar.len())));
        }
        if let Some(i) = p_bar.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ClearingError::NegativeFaceValue(i + 1));
        }
        let mut inflow = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                inflow[i * n + j] = pi.get(j, i);
            }
        }
        let full_inflow = pi.transpose_mul(p_bar);
        let scale = p_bar.iter().fold(1.0_f64, |m, v| m.max(*v));
        Ok(Self {
            n,
            inflow,
            p_bar: p_bar.to_vec(),
            full_inflow,
            opts,
            verify_tol: 1e-9 * scale,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p_bar(&self) -> &[f64] {
        &self.p_bar
    }

    /// `Pi' p_bar`, the interbank assets at face value.
    pub fn full_inflow(&self) -> &[f64] {
        &self.full_inflow
    }

    pub fn workspace(&self) -> ClearingWorkspace {
        let n = self.n;
        ClearingWorkspace {
            payments: vec![0.0; n],
            defaulted: vec![false; n],
            fundamental: vec![false; n],
            funds: vec![0.0; n],
            state: vec![0; n],
            next_state: vec![0; n],
            partial: Vec::with_capacity(n),
            mat: vec![0.0; n * n],
            rhs: vec![0.0; n],
        }
    }

    /// Clears one cash vector, filling `ws.payments`, `ws.defaulted` and
    /// `ws.fundamental`.
    pub fn clear(&self, cash: &[f64], ws: &mut ClearingWorkspace) -> Result<ClearedDraw, ClearingError> {
        let n = self.n;
        if cash.len() != n {
            return Err(ClearingError::Dimension(format!("{n} banks, {} cash entries", cash.len())));
        }
        let tol = self.opts.default_tol;
        let mut n_fundamental = 0;
        for i in 0..n {
            let f = cash[i] + self.full_inflow[i] < self.p_bar[i] - tol;
            ws.fundamental[i] = f;
            n_fundamental += f as usize;
        }
        if n_fundamental == 0 {
            ws.payments.copy_from_slice(&self.p_bar);
            ws.defaulted.iter_mut().for_each(|d| *d = false);
            return Ok(ClearedDraw {
                n_defaults: 0,
                n_fundamental: 0,
                all_bankrupt: false,
            });
        }
        if cash.iter().sum::<f64>() <= 0.0 {
            ws.payments.iter_mut().for_each(|p| *p = f64::NAN);
            ws.defaulted.iter_mut().for_each(|d| *d = true);
            return Ok(ClearedDraw {
                n_defaults: n,
                n_fundamental,
                all_bankrupt: true,
            });
        }

        let solved = match self.opts.method {
            ClearingMethod::FictitiousDefault => self.fictitious_default(cash, ws),
            ClearingMethod::Picard => false,
        };
        if !solved {
            self.picard(cash, ws)?;
        }

        let mut n_defaults = 0;
        for i in 0..n {
            let d = ws.payments[i] < self.p_bar[i] - tol;
            ws.defaulted[i] = d;
            n_defaults += d as usize;
        }
        Ok(ClearedDraw {
            n_defaults,
            n_fundamental,
            all_bankrupt: false,
        })
    }

    fn classify(&self, funds: &[f64], state: &mut [u8]) {
        for i in 0..self.n {
            state[i] = if funds[i] >= self.p_bar[i] {
                SOLVENT
            } else if funds[i] <= 0.0 {
                ZERO
            } else {
                PARTIAL
            };
        }
    }

    fn compute_funds(&self, cash: &[f64], payments: &[f64], funds: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.inflow[i * n..(i + 1) * n];
            funds[i] = cash[i] + row.iter().zip(payments).map(|(m, p)| m * p).sum::<f64>();
        }
    }

    /// Payments implied by `ws.state`; false if the partial block is singular.
    fn solve_state(&self, cash: &[f64], ws: &mut ClearingWorkspace) -> bool {
        let n = self.n;
        ws.partial.clear();
        for i in 0..n {
            match ws.state[i] {
                SOLVENT => ws.payments[i] = self.p_bar[i],
                ZERO => ws.payments[i] = 0.0,
                _ => {
                    ws.payments[i] = 0.0;
                    ws.partial.push(i);
                }
            }
        }
        let m = ws.partial.len();
        if m == 0 {
            return true;
        }
        let mat = &mut ws.mat[..m * m];
        let rhs = &mut ws.rhs[..m];
        for (r, &i) in ws.partial.iter().enumerate() {
            let row = &self.inflow[i * n..(i + 1) * n];
            // Inflow from full payers; zero payers contribute nothing.
            rhs[r] = cash[i]
                + row
                    .iter()
                    .zip(&ws.payments)
                    .map(|(m, p)| m * p)
                    .sum::<f64>();
            for (c, &j) in ws.partial.iter().enumerate() {
                mat[r * m + c] = if r == c { 1.0 } else { 0.0 } - row[j];
            }
        }
        if !linalg::solve_in_place(mat, rhs, m) {
            return false;
        }
        for (r, &i) in ws.partial.iter().enumerate() {
            ws.payments[i] = rhs[r];
        }
        true
    }

    fn fictitious_default(&self, cash: &[f64], ws: &mut ClearingWorkspace) -> bool {
        let n = self.n;
        for i in 0..n {
            ws.funds[i] = cash[i] + self.full_inflow[i];
        }
        self.classify(&ws.funds, &mut ws.state);
        for _ in 0..(3 * n + 3) {
            if !self.solve_state(cash, ws) {
                return false;
            }
            // Out-of-range partial payers move to the matching bound first.
            let mut moved = false;
            for i in 0..n {
                if ws.state[i] == PARTIAL {
                    if ws.payments[i] < 0.0 {
                        ws.state[i] = ZERO;
                        moved = true;
                    } else if ws.payments[i] > self.p_bar[i] {
                        ws.state[i] = SOLVENT;
                        moved = true;
                    }
                }
            }
            if moved {
                continue;
            }
            self.compute_funds(cash, &ws.payments, &mut ws.funds);
            self.classify(&ws.funds, &mut ws.next_state);
            if ws.next_state == ws.state {
                return self.is_fixed_point(&ws.funds, &ws.payments);
            }
            std::mem::swap(&mut ws.state, &mut ws.next_state);
        }
        false
    }

    fn is_fixed_point(&self, funds: &[f64], payments: &[f64]) -> bool {
        (0..self.n).all(|i| (funds[i].clamp(0.0, self.p_bar[i]) - payments[i]).abs() <= self.verify_tol)
    }

    /// Iterates the clearing map from `p_bar` until successive iterates agree
    /// to `opts.tol`.
    fn picard(&self, cash: &[f64], ws: &mut ClearingWorkspace) -> Result<usize, ClearingError> {
        let n = self.n;
        ws.payments.copy_from_slice(&self.p_bar);
        for iter in 1..=self.opts.max_iter {
            self.compute_funds(cash, &ws.payments, &mut ws.funds);
            let mut delta = 0.0_f64;
            for i in 0..n {
                let next = ws.funds[i].clamp(0.0, self.p_bar[i]);
                delta = delta.max((next - ws.payments[i]).abs());
                ws.payments[i] = next;
            }
            if delta < self.opts.tol {
                return Ok(iter);
            }
        }
        Err(ClearingError::NonConvergence(self.opts.max_iter))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::{build_balance_sheets, liability_weights, BalanceRatios};
    use crate::graph::Topology;
    use approx::assert_abs_diff_eq;

    fn swap_problem(cash: [f64; 2]) -> ClearingProblem {
        let pi = LiabilityMatrix::from_dense(2, vec![0.0, 1.0, 1.0, 0.0]);
        ClearingProblem::new(pi, vec![1.0, 1.0], cash.to_vec()).unwrap()
    }

    fn both_methods() -> [ClearingOptions; 2] {
        [
            ClearingOptions::default(),
            ClearingOptions {
                method: ClearingMethod::Picard,
                ..Default::default()
            },
        ]
    }

    #[test]
    fn two_bank_partial_default() {
        let cp = swap_problem([-0.1, 0.25]);
        for opts in both_methods() {
            let out = clearing_vector(&cp, &opts).unwrap();
            assert_abs_diff_eq!(out.p_star[0], 0.9, epsilon = 1e-9);
            assert_abs_diff_eq!(out.p_star[1], 1.0, epsilon = 1e-9);
            assert_eq!(out.defaulted, vec![true, false]);
            assert_eq!(out.fundamental, vec![true, false]);
            assert_eq!(out.contagious, vec![false, false]);
            assert!(!out.all_bankrupt_shortcircuit);
        }
        let oracle = clearing_vector_oracle(&cp).unwrap();
        assert_abs_diff_eq!(oracle[0], 0.9, epsilon = 1e-9);
        assert_abs_diff_eq!(oracle[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn nonpositive_total_cash_bankrupts_everyone() {
        let cp = swap_problem([-1.0, 0.25]);
        let out = clearing_vector(&cp, &ClearingOptions::default()).unwrap();
        assert!(out.all_bankrupt_shortcircuit);
        assert_eq!(out.defaulted, vec![true, true]);
        assert_eq!(out.fundamental, vec![true, false]);
        assert_eq!(out.contagious, vec![false, true]);
        for (p, pb) in out.p_star.iter().zip(&cp.p_bar) {
            assert!(*p >= 0.0 && p <= pb);
        }
    }

    #[test]
    fn no_shock_means_full_payment() {
        for t in [Topology::complete(5).unwrap(), Topology::star(5).unwrap()] {
            let sheets = build_balance_sheets(&t, &BalanceRatios::default()).unwrap();
            let cash = sheets.iter().map(|s| s.cash(s.a)).collect();
            let p_bar: Vec<f64> = sheets.iter().map(|s| s.p_bar).collect();
            let cp = ClearingProblem::new(liability_weights(&t), p_bar.clone(), cash).unwrap();
            let out = clearing_vector(&cp, &ClearingOptions::default()).unwrap();
            assert_eq!(out.p_star, p_bar);
            assert_eq!(out.n_defaults(), 0);
            assert!(out.fundamental.iter().all(|f| !f));
            assert_eq!(clearing_vector_oracle(&cp).unwrap(), p_bar);
        }
    }

    #[test]
    fn hub_wipeout_on_star() {
        let t = Topology::star(5).unwrap();
        let sheets = build_balance_sheets(&t, &BalanceRatios::default()).unwrap();
        let cash: Vec<f64> = sheets
            .iter()
            .enumerate()
            .map(|(i, s)| s.cash(if i == 0 { 0.0 } else { s.a }))
            .collect();
        let p_bar: Vec<f64> = sheets.iter().map(|s| s.p_bar).collect();
        let cp = ClearingProblem::new(liability_weights(&t), p_bar, cash).unwrap();
        let out = clearing_vector(&cp, &ClearingOptions::default()).unwrap();
        assert!(out.fundamental[0]);
        assert!(out.fundamental[1..].iter().all(|f| !f));
        for i in 1..5 {
            assert_eq!(out.contagious[i], out.defaulted[i]);
        }
    }

    #[test]
    fn dimension_and_face_value_errors() {
        let pi = LiabilityMatrix::from_dense(2, vec![0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            ClearingProblem::new(pi.clone(), vec![1.0], vec![0.0, 0.0]),
            Err(ClearingError::Dimension(_))
        ));
        assert_eq!(
            ClearingProblem::new(pi, vec![1.0, -1.0], vec![0.0, 0.0]),
            Err(ClearingError::NegativeFaceValue(2))
        );
    }

    #[test]
    fn oracle_size_guard() {
        let n = 13;
        let pi = LiabilityMatrix::from_dense(n, vec![0.0; n * n]);
        let cp = ClearingProblem::new(pi, vec![0.0; n], vec![0.0; n]).unwrap();
        assert_eq!(
            clearing_vector_oracle(&cp),
            Err(ClearingError::TooLarge { n: 13, max: 12 })
        );
    }

    #[test]
    fn picard_reports_non_convergence() {
        // Slow contraction: a two-bank loop where almost nothing leaks out.
        let cp = swap_problem([-0.999_999, 1.0]);
        let opts = ClearingOptions {
            method: ClearingMethod::Picard,
            max_iter: 1,
            ..Default::default()
        };
        assert_eq!(clearing_vector(&cp, &opts), Err(ClearingError::NonConvergence(1)));
    }

    #[test]
    fn negative_cash_pays_nothing() {
        // Bank 1 is under water even before interbank flows.
        let pi = LiabilityMatrix::from_dense(3, vec![0.0, 0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.5, 0.0]);
        let cp = ClearingProblem::new(pi, vec![1.0, 1.0, 1.0], vec![-3.0, 0.6, 2.5]).unwrap();
        let fast = clearing_vector(&cp, &ClearingOptions::default()).unwrap();
        let oracle = clearing_vector_oracle(&cp).unwrap();
        assert_eq!(fast.p_star[0], 0.0);
        for (a, b) in fast.p_star.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }
}
