//! External-asset universes, return sampling and portfolio metrics.
//!
//! Returns are per unit of external assets and have mean zero. A bank holding
//! weights `w` over the assets sees `a_tilde = a * (1 + w . r)`.
//!
//! Sampling is split into fixed batches of [`BATCH_ROWS`] draws. Batch `b` of
//! seed `s` always comes from ChaCha8 seeded with `s` on stream `b`, so any
//! draw can be regenerated independently and parallel runs merge to the same
//! numbers regardless of how batches are scheduled.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

/// Draws per RNG stream.
pub const BATCH_ROWS: usize = 1024;

/// Row-sum tolerance for portfolio weights.
const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssetError {
    #[error("probability must lie in (0, 1), got {0}")]
    ProbabilityRange(f64),
    #[error("loss threshold must be negative, got {0}")]
    NonNegativeThreshold(f64),
    #[error("no finite scale puts probability {p} below a negative threshold (median is zero)")]
    NoFiniteScale { p: f64 },
    #[error("rho must lie in [0, 1], got {0}")]
    RhoRange(f64),
    #[error("scale must be finite and non-negative, got {0}")]
    InvalidScale(f64),
    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDof(f64),
    #[error("universe needs at least one asset")]
    NoAssets,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("portfolio row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("portfolio row {row} has a negative or non-finite weight")]
    BadWeight { row: usize },
}

/// Marginal law of a standardised asset return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReturnFamily {
    Normal,
    StudentT { dof: f64 },
}

impl ReturnFamily {
    pub fn validate(&self) -> Result<(), AssetError> {
        match *self {
            ReturnFamily::StudentT { dof } if !(dof > 0.0 && dof.is_finite()) => Err(AssetError::InvalidDof(dof)),
            _ => Ok(()),
        }
    }

    /// Short label used in result tables, e.g. `normal` or `t3`.
    pub fn label(&self) -> String {
        match self {
            ReturnFamily::Normal => "normal".to_string(),
            ReturnFamily::StudentT { dof } => format!("t{dof}"),
        }
    }

    pub fn standard_cdf(&self, x: f64) -> f64 {
        match *self {
            ReturnFamily::Normal => Normal::standard().cdf(x),
            ReturnFamily::StudentT { dof } => students_t(dof).cdf(x),
        }
    }

    /// Quantile of the unit-scale law.
    ///
    /// The Student-t branch starts from the incomplete-beta inversion and
    /// polishes with Newton steps on the CDF so the result is good to ~1e-12.
    pub fn standard_quantile(&self, p: f64) -> f64 {
        match *self {
            ReturnFamily::Normal => {
                let n = Normal::standard();
                polish_quantile(n.inverse_cdf(p), p, |x| n.cdf(x), |x| n.pdf(x))
            }
            ReturnFamily::StudentT { dof } => {
                let t = students_t(dof);
                polish_quantile(t.inverse_cdf(p), p, |x| t.cdf(x), |x| t.pdf(x))
            }
        }
    }
}

/// A few Newton steps on `cdf(x) = p`; statrs quantiles are only good to ~1e-10.
fn polish_quantile(mut x: f64, p: f64, cdf: impl Fn(f64) -> f64, pdf: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..4 {
        let density = pdf(x);
        if !(density > 0.0) {
            break;
        }
        let step = (cdf(x) - p) / density;
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

fn students_t(dof: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, dof).expect("validated degrees of freedom")
}

enum FamilySampler {
    Normal,
    StudentT(StudentT<f64>),
}

impl FamilySampler {
    fn new(family: ReturnFamily) -> Self {
        match family {
            ReturnFamily::Normal => FamilySampler::Normal,
            ReturnFamily::StudentT { dof } => {
                FamilySampler::StudentT(StudentT::new(dof).expect("validated degrees of freedom"))
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FamilySampler::Normal => rng.sample(StandardNormal),
            FamilySampler::StudentT(t) => t.sample(rng),
        }
    }
}

/// Scale `sigma` such that `P(sigma * X < loss_threshold) = p`.
pub fn calibrate_scale(family: ReturnFamily, p: f64, loss_threshold: f64) -> Result<f64, AssetError> {
    family.validate()?;
    if !(p > 0.0 && p < 1.0) {
        return Err(AssetError::ProbabilityRange(p));
    }
    if !(loss_threshold < 0.0) {
        return Err(AssetError::NonNegativeThreshold(loss_threshold));
    }
    let q = family.standard_quantile(p);
    if !(q < 0.0) {
        return Err(AssetError::NoFiniteScale { p });
    }
    Ok(loss_threshold / q)
}

/// How the asset returns are generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UniverseKind {
    /// `k` i.i.d. returns `scale * X`.
    Independent { k: usize, family: ReturnFamily },
    /// Six normal assets: `a1`, `-rho a1 + (1-rho) a2_hat`, `a3`,
    /// `rho a3 + (1-rho) a4_hat`, `a5`, and the mean of the first five.
    CorrelatedSix { rho: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetUniverse {
    pub kind: UniverseKind,
    /// Standard deviation scale of a single base asset.
    pub scale: f64,
    /// Single-asset failure probability the scale was calibrated to, if any.
    pub default_prob: Option<f64>,
}

impl AssetUniverse {
    pub fn independent(k: usize, family: ReturnFamily, scale: f64) -> Result<Self, AssetError> {
        if k == 0 {
            return Err(AssetError::NoAssets);
        }
        family.validate()?;
        check_scale(scale)?;
        Ok(Self {
            kind: UniverseKind::Independent { k, family },
            scale,
            default_prob: None,
        })
    }

    pub fn correlated_six(rho: f64, sigma: f64) -> Result<Self, AssetError> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(AssetError::RhoRange(rho));
        }
        check_scale(sigma)?;
        Ok(Self {
            kind: UniverseKind::CorrelatedSix { rho },
            scale: sigma,
            default_prob: None,
        })
    }

    /// Independent universe whose scale makes a single-asset bank fail with
    /// probability `p` at `loss_threshold`.
    pub fn calibrated_independent(
        k: usize,
        family: ReturnFamily,
        p: f64,
        loss_threshold: f64,
    ) -> Result<Self, AssetError> {
        let scale = calibrate_scale(family, p, loss_threshold)?;
        let mut u = Self::independent(k, family, scale)?;
        u.default_prob = Some(p);
        Ok(u)
    }

    pub fn calibrated_correlated_six(rho: f64, p: f64, loss_threshold: f64) -> Result<Self, AssetError> {
        let scale = calibrate_scale(ReturnFamily::Normal, p, loss_threshold)?;
        let mut u = Self::correlated_six(rho, scale)?;
        u.default_prob = Some(p);
        Ok(u)
    }

    pub fn k_assets(&self) -> usize {
        match self.kind {
            UniverseKind::Independent { k, .. } => k,
            UniverseKind::CorrelatedSix { .. } => 6,
        }
    }

    pub fn family(&self) -> ReturnFamily {
        match self.kind {
            UniverseKind::Independent { family, .. } => family,
            UniverseKind::CorrelatedSix { .. } => ReturnFamily::Normal,
        }
    }

    /// Fills `out` (row-major, `rows × k`) with batch `batch` of `seed`.
    pub fn fill_batch(&self, seed: u64, batch: u64, rows: usize, out: &mut [f64]) {
        let k = self.k_assets();
        assert_eq!(out.len(), rows * k, "batch buffer has wrong size");
        let mut rng = stream_rng(seed, batch);
        match self.kind {
            UniverseKind::Independent { family, .. } => {
                let sampler = FamilySampler::new(family);
                for v in out.iter_mut() {
                    *v = self.scale * sampler.sample(&mut rng);
                }
            }
            UniverseKind::CorrelatedSix { rho } => {
                let sigma = self.scale;
                let aux = auxiliary_scale(rho, sigma);
                for row in out.chunks_exact_mut(6) {
                    let z: [f64; 5] = std::array::from_fn(|_| rng.sample(StandardNormal));
                    let a1 = sigma * z[0];
                    let a3 = sigma * z[2];
                    let a5 = sigma * z[4];
                    // (1 - rho) * a_hat; its variance tends to zero as rho -> 1.
                    let shock2 = aux.map_or(0.0, |s| (1.0 - rho) * s * z[1]);
                    let shock4 = aux.map_or(0.0, |s| (1.0 - rho) * s * z[3]);
                    let a2 = -rho * a1 + shock2;
                    let a4 = rho * a3 + shock4;
                    row[0] = a1;
                    row[1] = a2;
                    row[2] = a3;
                    row[3] = a4;
                    row[4] = a5;
                    row[5] = (a1 + a2 + a3 + a4 + a5) / 5.0;
                }
            }
        }
    }
}

fn check_scale(scale: f64) -> Result<(), AssetError> {
    if scale.is_finite() && scale >= 0.0 {
        Ok(())
    } else {
        Err(AssetError::InvalidScale(scale))
    }
}

/// Standard deviation of the auxiliary shocks that keeps every base asset
/// at variance `sigma^2`: `sigma_hat^2 = (1 + rho) / (1 - rho) * sigma^2`.
/// `None` at `rho = 1`, where the shock term vanishes.
pub fn auxiliary_scale(rho: f64, sigma: f64) -> Option<f64> {
    (rho < 1.0).then(|| sigma * ((1.0 + rho) / (1.0 - rho)).sqrt())
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Number of batches covering `n_draws`, and the row count of batch `b`.
pub(crate) fn batch_layout(n_draws: usize) -> impl Iterator<Item = (u64, usize)> {
    let n_batches = n_draws.div_ceil(BATCH_ROWS);
    (0..n_batches).map(move |b| (b as u64, BATCH_ROWS.min(n_draws - b * BATCH_ROWS)))
}

/// Materialised `draws × k` return matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSample {
    k: usize,
    returns: Vec<f64>,
}

impl ReturnSample {
    pub fn n_draws(&self) -> usize {
        self.returns.len() / self.k
    }

    pub fn k_assets(&self) -> usize {
        self.k
    }

    pub fn row(&self, draw: usize) -> &[f64] {
        &self.returns[draw * self.k..(draw + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.returns.chunks_exact(self.k)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.returns
    }

    /// One CSV row per draw, one column per asset.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (1..=self.k).map(|k| format!("asset_{k}")).collect();
        w.write_record(&header)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| crate::fmt_float(*v)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Deterministic in `(universe, n_draws, seed)`; draws are i.i.d. rows.
pub fn sample_returns(u: &AssetUniverse, n_draws: usize, seed: u64) -> ReturnSample {
    let k = u.k_assets();
    let mut returns = vec![0.0; n_draws * k];
    for (batch, rows) in batch_layout(n_draws) {
        let start = batch as usize * BATCH_ROWS * k;
        u.fill_batch(seed, batch, rows, &mut returns[start..start + rows * k]);
    }
    ReturnSample { k, returns }
}

/// `n × k` non-negative weights; row i is bank i's external-asset mix.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioMatrix {
    n: usize,
    k: usize,
    weights: Vec<f64>,
}

impl PortfolioMatrix {
    pub fn new(n: usize, k: usize, weights: Vec<f64>) -> Result<Self, AssetError> {
        if weights.len() != n * k {
            return Err(AssetError::Dimension(format!(
                "expected {n}x{k} = {} weights, got {}",
                n * k,
                weights.len()
            )));
        }
        for (row, chunk) in weights.chunks_exact(k).enumerate() {
            if chunk.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(AssetError::BadWeight { row });
            }
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_TOL {
                return Err(AssetError::RowSum { row, sum });
            }
        }
        Ok(Self { n, k, weights })
    }

    /// Each bank holds exactly one asset; `assignment[i]` is 0-based.
    pub fn from_assignment(assignment: &[usize], k: usize) -> Result<Self, AssetError> {
        let n = assignment.len();
        let mut weights = vec![0.0; n * k];
        for (i, &a) in assignment.iter().enumerate() {
            if a >= k {
                return Err(AssetError::Dimension(format!("bank {} assigned asset {} of {k}", i + 1, a + 1)));
            }
            weights[i * k + a] = 1.0;
        }
        Ok(Self { n, k, weights })
    }

    /// Bank i holds asset `i mod k` only.
    pub fn full_diversity(n: usize, k: usize) -> Self {
        let assignment: Vec<usize> = (0..n).map(|i| i % k).collect();
        Self::from_assignment(&assignment, k).expect("indices are in range")
    }

    /// Every bank holds the equal-weighted portfolio of all `k` assets.
    pub fn full_diversification(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            weights: vec![1.0 / k as f64; n * k],
        }
    }

    /// With `k = n`: the first `m` banks hold the equal-weighted portfolio,
    /// bank `i >= m` holds its own asset `i`.
    pub fn partially_diversified(n: usize, m: usize) -> Result<Self, AssetError> {
        if m > n {
            return Err(AssetError::Dimension(format!("{m} diversified banks out of {n}")));
        }
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            if i < m {
                weights[i * n..(i + 1) * n].fill(1.0 / n as f64);
            } else {
                weights[i * n + i] = 1.0;
            }
        }
        Ok(Self { n, k: n, weights })
    }

    pub fn n_banks(&self) -> usize {
        self.n
    }

    pub fn k_assets(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.k..(i + 1) * self.k]
    }

    pub fn weight(&self, i: usize, k: usize) -> f64 {
        self.weights[i * self.k + k]
    }

    /// Per-bank portfolio return `w_i . r` for one draw.
    pub fn bank_returns_into(&self, returns: &[f64], out: &mut [f64]) {
        debug_assert_eq!(returns.len(), self.k);
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.k)) {
            *o = row.iter().zip(returns).map(|(w, r)| w * r).sum();
        }
    }

    /// Mean absolute distance between banks' weight vectors, in `[0, 1]`.
    pub fn distance_d(&self) -> f64 {
        let n = self.n;
        if n < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>();
            }
        }
        total / (2.0 * n as f64 * (n as f64 - 1.0))
    }

    /// Distance of the aggregate holding from equal weights.
    pub fn distance_g(&self) -> f64 {
        let target = 1.0 / self.k as f64;
        (0..self.k)
            .map(|k| (0..self.n).map(|i| self.weight(i, k) - target).sum::<f64>().abs())
            .sum::<f64>()
            / self.n as f64
    }
}

/// Ex-post external asset values `a_i * (1 + w_i . r)`.
pub fn portfolio_value(p: &PortfolioMatrix, a_money: &[f64], returns: &[f64]) -> Result<Vec<f64>, AssetError> {
    if a_money.len() != p.n_banks() {
        return Err(AssetError::Dimension(format!(
            "{} banks in portfolio, {} external totals",
            p.n_banks(),
            a_money.len()
        )));
    }
    if returns.len() != p.k_assets() {
        return Err(AssetError::Dimension(format!(
            "{} assets in portfolio, {} returns",
            p.k_assets(),
            returns.len()
        )));
    }
    let mut r = vec![0.0; p.n_banks()];
    p.bank_returns_into(returns, &mut r);
    Ok(a_money.iter().zip(r).map(|(a, ri)| a * (1.0 + ri)).collect())
}
