//! Who infects whom: default rates conditional on a single fundamental
//! default, infectivity and susceptibility.

use super::{AnalysisError, Scenario};
use crate::risk::simulate_batches;

#[derive(Debug, Clone, PartialEq)]
pub struct ContagionMatrix {
    /// `rates[i][j]`: defaults of bank j per 1000 draws in which bank i is
    /// the only fundamental default. `None` when bank i never was.
    pub rates: Vec<Option<Vec<f64>>>,
    /// Draws in which each bank was the only fundamental default.
    pub event_counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfectionScores {
    /// Mean number of contagious defaults per single fundamental default.
    pub infectivity: Vec<Option<f64>>,
    /// Contagious defaults suffered over own fundamental defaults.
    pub susceptibility: Vec<Option<f64>>,
    pub event_counts: Vec<u64>,
    pub fundamental_counts: Vec<u64>,
    pub contagious_counts: Vec<u64>,
}

#[derive(Clone)]
struct Tally {
    n: usize,
    events: Vec<u64>,
    hits: Vec<u64>,
    infected: Vec<u64>,
    fundamental: Vec<u64>,
    contagious: Vec<u64>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            n,
            events: vec![0; n],
            hits: vec![0; n * n],
            infected: vec![0; n],
            fundamental: vec![0; n],
            contagious: vec![0; n],
        }
    }

    fn merge(&mut self, other: &Tally) {
        let add = |a: &mut Vec<u64>, b: &Vec<u64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.events, &other.events);
        add(&mut self.hits, &other.hits);
        add(&mut self.infected, &other.infected);
        add(&mut self.fundamental, &other.fundamental);
        add(&mut self.contagious, &other.contagious);
    }
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask >> i & 1 == 1)
}

fn tally(scenario: &Scenario, n_draws: usize, seed: u64) -> Result<Tally, AnalysisError> {
    let n = scenario.network.n_banks();
    let parts = simulate_batches(
        &scenario.network,
        &scenario.universe,
        &scenario.portfolio,
        n_draws,
        seed,
        || Tally::new(n),
        |t, out| {
            let contagious = out.contagious();
            for i in bits(out.fundamental) {
                t.fundamental[i] += 1;
            }
            for j in bits(contagious) {
                t.contagious[j] += 1;
            }
            if out.fundamental.count_ones() == 1 {
                let i = out.fundamental.trailing_zeros() as usize;
                t.events[i] += 1;
                t.infected[i] += contagious.count_ones() as u64;
                for j in bits(out.defaulted) {
                    t.hits[i * t.n + j] += 1;
                }
            }
        },
    )?;
    let mut total = Tally::new(n);
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

/// Both tables from one pass over the draws.
pub fn contagion_and_infection(
    scenario: &Scenario,
    n_draws: usize,
    seed: u64,
) -> Result<(ContagionMatrix, InfectionScores), AnalysisError> {
    let t = tally(scenario, n_draws, seed)?;
    let n = t.n;
    let rates = (0..n)
        .map(|i| {
            (t.events[i] > 0).then(|| {
                (0..n)
                    .map(|j| 1000.0 * t.hits[i * n + j] as f64 / t.events[i] as f64)
                    .collect()
            })
        })
        .collect();
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let scores = InfectionScores {
        infectivity: (0..n).map(|i| ratio(t.infected[i], t.events[i])).collect(),
        susceptibility: (0..n).map(|i| ratio(t.contagious[i], t.fundamental[i])).collect(),
        event_counts: t.events.clone(),
        fundamental_counts: t.fundamental,
        contagious_counts: t.contagious,
    };
    Ok((
        ContagionMatrix {
            rates,
            event_counts: t.events,
        },
        scores,
    ))
}

pub fn contagion_matrix(scenario: &Scenario, n_draws: usize, seed: u64) -> Result<ContagionMatrix, AnalysisError> {
    Ok(contagion_and_infection(scenario, n_draws, seed)?.0)
}

pub fn infection_scores(scenario: &Scenario, n_draws: usize, seed: u64) -> Result<InfectionScores, AnalysisError> {
    Ok(contagion_and_infection(scenario, n_draws, seed)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{AssetUniverse, PortfolioMatrix, ReturnFamily};
    use crate::balance::BalanceRatios;
    use crate::graph::Topology;
    use crate::risk::{CostSpec, Network};

    fn full_diversity(t: Topology) -> Scenario {
        Scenario::full_diversity(t, &BalanceRatios::default(), ReturnFamily::Normal, 0.2, CostSpec::default()).unwrap()
    }

    #[test]
    fn edgeless_has_no_contagion() {
        let (m, s) = contagion_and_infection(&full_diversity(Topology::empty(4).unwrap()), 20_000, 1).unwrap();
        for (i, row) in m.rates.iter().enumerate() {
            let row = row.as_ref().unwrap();
            assert_eq!(row[i], 1000.0);
            assert!(row.iter().enumerate().all(|(j, &v)| j == i || v == 0.0));
        }
        assert!(s.infectivity.iter().all(|v| *v == Some(0.0)));
        assert!(s.susceptibility.iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn diagonal_is_a_thousand_and_rates_bounded() {
        let (m, s) = contagion_and_infection(&full_diversity(Topology::star(5).unwrap()), 20_000, 2).unwrap();
        for (i, row) in m.rates.iter().enumerate() {
            let row = row.as_ref().unwrap();
            assert_eq!(row[i], 1000.0);
            assert!(row.iter().all(|&v| (0.0..=1000.0).contains(&v)));
            let inf = s.infectivity[i].unwrap();
            assert!((0.0..=4.0).contains(&inf));
        }
    }

    #[test]
    fn undefined_rows_when_no_bank_ever_fails() {
        let net = Network::new(Topology::complete(3).unwrap(), &BalanceRatios::default()).unwrap();
        let u = AssetUniverse::independent(3, ReturnFamily::Normal, 0.0).unwrap();
        let sc = Scenario::new(net, u, PortfolioMatrix::full_diversity(3, 3), CostSpec::default()).unwrap();
        let (m, s) = contagion_and_infection(&sc, 2000, 3).unwrap();
        assert!(m.rates.iter().all(Option::is_none));
        assert!(s.infectivity.iter().all(Option::is_none));
        assert!(s.susceptibility.iter().all(Option::is_none));
        assert_eq!(s.fundamental_counts, vec![0; 3]);
    }

    #[test]
    fn relabeling_permutes_scores() {
        let t = crate::graph::named_topology("e").unwrap().topology;
        let perm = [2, 4, 0, 1, 3];
        let base = full_diversity(t.clone());
        let moved_t = t.permuted(&perm);
        // Bank perm[i] of the relabeled network holds asset i.
        let mut assignment = vec![0; 5];
        for (i, &pi) in perm.iter().enumerate() {
            assignment[pi] = i;
        }
        let moved = Scenario::new(
            Network::new(moved_t, &BalanceRatios::default()).unwrap(),
            base.universe.clone(),
            PortfolioMatrix::from_assignment(&assignment, 5).unwrap(),
            CostSpec::default(),
        )
        .unwrap();
        let a = infection_scores(&base, 20_000, 9).unwrap();
        let b = infection_scores(&moved, 20_000, 9).unwrap();
        for i in 0..5 {
            assert_eq!(a.infectivity[i], b.infectivity[perm[i]]);
            assert_eq!(a.susceptibility[i], b.susceptibility[perm[i]]);
        }
    }
}
