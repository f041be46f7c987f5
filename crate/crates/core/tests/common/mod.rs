use banknet::balance::LiabilityMatrix;
use banknet::clearing::ClearingProblem;
use rand::Rng;

/// A strongly connected clearing problem with random relative liabilities.
/// A ring `i -> i+1` guarantees connectivity; other links appear with
/// probability one half.
pub fn random_problem<R: Rng>(rng: &mut R, n: usize) -> ClearingProblem {
    let mut pi = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let ring = n > 1 && j == (i + 1) % n;
            if i != j && (ring || rng.random_bool(0.5)) {
                pi[i * n + j] = rng.random_range(0.1..1.0);
            }
        }
        let total: f64 = pi[i * n..(i + 1) * n].iter().sum();
        if total > 0.0 {
            pi[i * n..(i + 1) * n].iter_mut().for_each(|v| *v /= total);
        }
    }
    let p_bar = (0..n).map(|_| rng.random_range(0.5..5.0)).collect();
    let cash = (0..n).map(|_| rng.random_range(-2.0..3.0)).collect();
    ClearingProblem::new(LiabilityMatrix::from_dense(n, pi), p_bar, cash).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
