//! Three isolated banks choosing between (a) `(a1, a2, a2)` and
//! (b) `(a1, a6, a6)`. Assets 1 and 2 fail with probability `p` and never
//! together; asset 6 fails with probability `q < p`, independently of them.
//! Above the exponent `s*`, the rare triple default makes (b) the costlier
//! allocation.

use super::AnalysisError;

/// Expected cost of configuration (a): `p + p 2^s`.
pub fn c_a(p: f64, s: f64) -> f64 {
    p + p * 2f64.powf(s)
}

/// Expected cost of configuration (b): `p(1-q) + q(1-p) 2^s + pq 3^s`.
pub fn c_b(p: f64, q: f64, s: f64) -> f64 {
    p * (1.0 - q) + q * (1.0 - p) * 2f64.powf(s) + p * q * 3f64.powf(s)
}

/// `3^s - 1 - (1 + (p - q) / (pq)) 2^s`; `C_b - C_a = pq` times this.
pub fn s_star_residual(p: f64, q: f64, s: f64) -> f64 {
    3f64.powf(s) - 1.0 - (1.0 + (p - q) / (p * q)) * 2f64.powf(s)
}

/// The exponent above which `C_b >= C_a`.
pub fn s_star_threshold(p: f64, q: f64) -> Result<f64, AnalysisError> {
    if !(q > 0.0 && q < p && p < 1.0) {
        return Err(AnalysisError::ProbabilityOrder { p, q });
    }
    let h = |s: f64| s_star_residual(p, q, s);
    // h(1) = -2 (p - q) / (pq) < 0 and h grows like 3^s.
    let mut lo = 1.0;
    let mut hi = 2.0;
    while h(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    // Bisect until the bracket cannot shrink further.
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if h(lo).abs() <= h(hi).abs() { lo } else { hi })
}
