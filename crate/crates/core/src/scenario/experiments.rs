use super::{Experiment, NetworkChoice, Resolved, ScenarioError};
use crate::analysis::{
    contagion_and_infection, decompose_collective_defaults, dg_landscape, optimization_vs_topology_multi,
    AllocationSweep, PortfolioKind, Scenario, TieRule,
};
use crate::assets::{AssetUniverse, ReturnFamily};
use crate::graph::{Topology, DEFAULT_ALPHA, DEFAULT_BETA};
use crate::risk::{simultaneity_sweep, write_sweep_csv, CostSpec, Network, SweepMode};
use crate::fmt_float;

type Writer = csv::Writer<Vec<u8>>;

const NA: &str = "NA";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), fmt_float)
}

fn dashed(values: &[usize]) -> String {
    values.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

fn edge_string(t: &Topology) -> String {
    t.edges().iter().map(|(i, j)| format!("{i}-{j}")).collect::<Vec<_>>().join(" ")
}

impl Resolved {
    fn spec(&self) -> Result<CostSpec, ScenarioError> {
        Ok(CostSpec::new(self.s)?)
    }

    fn topology(&self) -> &Topology {
        match &self.network {
            NetworkChoice::Single(t) => t,
            _ => unreachable!("validated: experiment has a single network"),
        }
    }

    fn network(&self) -> Result<Network, ScenarioError> {
        Ok(Network::new(self.topology().clone(), &self.ratios)?)
    }

    fn six_asset_universe(&self) -> Result<AssetUniverse, ScenarioError> {
        let threshold = self.ratios.default_return_threshold();
        Ok(AssetUniverse::calibrated_correlated_six(self.rho, self.p, threshold)?)
    }
}

pub(super) fn render(r: &Resolved) -> Result<Vec<u8>, ScenarioError> {
    if r.experiment == Experiment::Fig1 || r.experiment == Experiment::Fig2 {
        let mut buf = Vec::new();
        write_sweep_csv(&sweep_rows(r)?, &mut buf)?;
        return Ok(buf);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    match r.experiment {
        Experiment::Fig1 | Experiment::Fig2 => unreachable!(),
        Experiment::Dg => dg(r, &mut w)?,
        Experiment::Contagion => contagion(r, &mut w)?,
        Experiment::Infection => infection(r, &mut w)?,
        Experiment::Decompose => decompose(r, &mut w)?,
        Experiment::Optimize => optimize(r, &mut w)?,
        Experiment::SweepS => sweep_s(r, &mut w)?,
        Experiment::TopologyTable => topology_table(r, &mut w)?,
    }
    w.flush()?;
    w.into_inner().map_err(|e| ScenarioError::Io(e.into_error()))
}

fn sweep_rows(r: &Resolved) -> Result<Vec<crate::risk::SweepRow>, ScenarioError> {
    let spec = r.spec()?;
    let rows = if r.experiment == Experiment::Fig1 {
        let v = match r.family {
            ReturnFamily::StudentT { dof } => dof,
            ReturnFamily::Normal => 3.0,
        };
        let n_list: Vec<usize> = (1..=r.n_max).collect();
        simultaneity_sweep(
            &n_list,
            &[ReturnFamily::Normal, ReturnFamily::StudentT { dof: v }],
            r.p,
            &spec,
            &[SweepMode::FullDiversity, SweepMode::FullDiversification],
            r.draws,
            r.seed,
        )?
    } else {
        let modes: Vec<SweepMode> = (0..=r.banks).map(SweepMode::MDiversified).collect();
        simultaneity_sweep(&[r.banks], &[r.family], r.p, &spec, &modes, r.draws, r.seed)?
    };
    Ok(rows)
}

fn dg(r: &Resolved, w: &mut Writer) -> Result<(), ScenarioError> {
    let network = r.network()?;
    let threshold = r.ratios.default_return_threshold();
    let universe = AssetUniverse::calibrated_independent(r.k, r.family, r.p, threshold)?;
    let l = dg_landscape(&network, &universe, &r.spec()?, r.portfolios, r.draws, r.seed)?;
    w.write_record(["portfolio", "kind", "D", "G", "expected_cost", "std_error", "best"])?;
    for (i, pt) in l.points.iter().enumerate() {
        let kind = match pt.kind {
            PortfolioKind::FullDiversity => "full_diversity",
            PortfolioKind::FullDiversification => "full_diversification",
            PortfolioKind::Random => "random",
        };
        w.write_record([
            i.to_string(),
            kind.to_string(),
            fmt_float(pt.d),
            fmt_float(pt.g),
            fmt_float(pt.expected_cost),
            fmt_float(pt.std_error),
            (i == l.best_index).to_string(),
        ])?;
    }
    Ok(())
}

fn full_diversity_scenario(r: &Resolved) -> Result<Scenario, ScenarioError> {
    Ok(Scenario::full_diversity(r.topology().clone(), &r.ratios, r.family, r.p, r.spec()?)?)
}

fn contagion(r: &Resolved, w: &mut Writer) -> Result<(), ScenarioError> {
    let (m, _) = contagion_and_infection(&full_diversity_scenario(r)?, r.draws, r.seed)?;
    w.write_record(["i", "j", "defaults_per_1000", "single_default_events"])?;
    let n = m.rates.len();
    for i in 0..n {
        for j in 0..n {
            let rate = m.rates[i].as_ref().map(|row| row[j]);
            w.write_record([
                (i + 1).to_string(),
                (j + 1).to_string(),
                opt(rate),
                m.event_counts[i].to_string(),
            ])?;
        }
    }
    Ok(())
}

fn infection(r: &Resolved, w: &mut Writer) -> Result<(), ScenarioError> {
    let t = r.topology();
    let (_, s) = contagion_and_infection(&full_diversity_scenario(r)?, r.draws, r.seed)?;
    // PageRank is undefined with isolated banks.
    let pagerank = t.pagerank(DEFAULT_ALPHA, DEFAULT_BETA).ok().map(|c| c.pagerank);
    w.write_record([
        "bank",
        "degree",
        "pagerank",
        "infectivity",
        "susceptibility",
        "single_default_events",
        "fundamental_defaults",
        "contagious_defaults",
    ])?;
    for i in 0..t.n_banks() {
        w.write_record([
            (i + 1).to_string(),
            t.degree(i).to_string(),
            opt(pagerank.as_ref().map(|p| p[i])),
            opt(s.infectivity[i]),
            opt(s.susceptibility[i]),
            s.event_counts[i].to_string(),
            s.fundamental_counts[i].to_string(),
            s.contagious_counts[i].to_string(),
        ])?;
    }
    Ok(())
}

fn decompose(r: &Resolved, w: &mut Writer) -> Result<(), ScenarioError> {
    let table = decompose_collective_defaults(&full_diversity_scenario(r)?, r.draws, r.seed)?;
    w.write_record(["index", "banks", "size", "draws", "cost_share"])?;
    for (i, e) in table.entries.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            dashed(&e.banks),
            e.banks.len().to_string(),
            e.draws.to_string(),
            fmt_float(e.share),
        ])?;
    }
    w.write_record([
        "0".to_string(),
        "none".to_string(),
        "0".to_string(),
        table.zero_set_draws.to_string(),
        fmt_float(table.zero_set_share),
    ])?;
    Ok(())
}

fn optimize(r: &Resolved, w: &mut Writer) -> Result<(), ScenarioError> {
    let sweep = AllocationSweep::run(&r.network()?, &r.six_asset_universe()?, r.draws, r.seed)?;
    let result = sweep.result(&r.spec()?, TieRule::default());
    w.write_record(["assignment", "expected_cost", "std_error", "co_optimal", "canonical", "best"])?;
    // Both lists are in lexicographic order, so ties can be matched by merging.
    let mut ties = result.ties.iter().peekable();
    for e in &result.cost_table {
        let tied = ties.peek().is_some_and(|t| **t == e.assignment);
        if tied {
            ties.next();
        }
        w.write_record([
            dashed(&e.assignment),
            fmt_float(e.expected_cost),
            fmt_float(e.std_error),
            tied.to_string(),
            (e.assignment == result.canonical_assignment).to_string(),
            (e.assignment == result.best_assignment).to_string(),
        ])?;
    }
    Ok(())
}

fn sweep_s(r: &Resolved, w: &mut Writer) -> Result<(), ScenarioError> {
    let sweep = AllocationSweep::run(&r.network()?, &r.six_asset_universe()?, r.draws, r.seed)?;
    w.write_record([
        "s",
        "canonical_assignment",
        "asset6_banks",
        "best_assignment",
        "best_cost",
        "best_std_error",
        "co_optimal_count",
    ])?;
    for &s in &r.s_values {
        let res = sweep.result(&CostSpec::new(s)?, TieRule::default());
        w.write_record([
            fmt_float(s),
            dashed(&res.canonical_assignment),
            res.canonical_count(6).to_string(),
            dashed(&res.best_assignment),
            fmt_float(res.best_cost),
            fmt_float(res.best_std_error),
            res.ties.len().to_string(),
        ])?;
    }
    Ok(())
}

fn topology_table(r: &Resolved, w: &mut Writer) -> Result<(), ScenarioError> {
    let rows = optimization_vs_topology_multi(&[r.spec()?], r.rho, r.p, r.draws, r.seed, TieRule::default())?
        .pop()
        .expect("one spec");
    w.write_record([
        "code",
        "edges",
        "entropy_degree",
        "entropy_pagerank",
        "hhi_degree",
        "hhi_pagerank",
        "s",
        "cost_full_diversity",
        "std_error_full_diversity",
        "cost_full_diversification",
        "std_error_full_diversification",
        "cost_optimal",
        "std_error_optimal",
        "canonical_assignment",
    ])?;
    for row in &rows {
        w.write_record([
            row.code.to_string(),
            edge_string(&row.topology),
            fmt_float(row.entropy_degree),
            fmt_float(row.entropy_pagerank),
            fmt_float(row.hhi_degree),
            fmt_float(row.hhi_pagerank),
            fmt_float(row.s),
            fmt_float(row.cost_full_diversity.value),
            fmt_float(row.cost_full_diversity.std_error),
            fmt_float(row.cost_full_diversification.value),
            fmt_float(row.cost_full_diversification.std_error),
            fmt_float(row.cost_optimal.value),
            fmt_float(row.cost_optimal.std_error),
            dashed(&row.allocation.canonical_assignment),
        ])?;
    }
    Ok(())
}
