//! Scenario files, validation and artifact output.
//!
//! A scenario is a TOML file (or the equivalent command-line flags). Running
//! it writes `<experiment>_<hash>.csv` and `<experiment>_<hash>.manifest.toml`
//! to the output directory, where `<hash>` identifies the fully resolved
//! configuration. The manifest's top-level keys are the resolved
//! configuration itself, so a manifest can be run again as a scenario file.

mod experiments;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assets::ReturnFamily;
use crate::balance::BalanceRatios;
use crate::graph::{named_topology, Topology};
use crate::risk::MAX_BANKS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Fig1,
    Fig2,
    Dg,
    Contagion,
    Infection,
    Decompose,
    Optimize,
    SweepS,
    TopologyTable,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Fig1,
        Experiment::Fig2,
        Experiment::Dg,
        Experiment::Contagion,
        Experiment::Infection,
        Experiment::Decompose,
        Experiment::Optimize,
        Experiment::SweepS,
        Experiment::TopologyTable,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Dg => "dg",
            Experiment::Contagion => "contagion",
            Experiment::Infection => "infection",
            Experiment::Decompose => "decompose",
            Experiment::Optimize => "optimize",
            Experiment::SweepS => "sweep-s",
            Experiment::TopologyTable => "topology-table",
        }
    }

    fn default_draws(&self) -> usize {
        match self {
            Experiment::Fig1 => 200_000,
            Experiment::Fig2 | Experiment::Dg => 20_000,
            Experiment::Contagion | Experiment::Infection | Experiment::Decompose => 100_000,
            Experiment::Optimize | Experiment::SweepS | Experiment::TopologyTable => 5_000,
        }
    }

    fn default_p(&self) -> f64 {
        match self {
            Experiment::Fig1 | Experiment::Fig2 | Experiment::Dg => 0.1,
            _ => 0.2,
        }
    }

    fn needs_topology(&self) -> bool {
        !matches!(self, Experiment::Fig1 | Experiment::Fig2 | Experiment::TopologyTable)
    }

    fn uses_rho(&self) -> bool {
        matches!(self, Experiment::Optimize | Experiment::SweepS | Experiment::TopologyTable)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Normal,
    StudentT,
}

impl FromStr for FamilyName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(FamilyName::Normal),
            "student_t" | "t" => Ok(FamilyName::StudentT),
            other => Err(format!("unknown return family `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniverseConfig {
    pub family: Option<FamilyName>,
    /// Degrees of freedom for `student_t`.
    pub v: Option<f64>,
    pub rho: Option<f64>,
    /// Probability that a single-asset bank fails on its own.
    pub p: Option<f64>,
    /// Number of independent assets in the D/G scan.
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    /// System size for `fig2`.
    pub banks: Option<usize>,
    /// Largest system size for `fig1`.
    pub n_max: Option<usize>,
    /// Portfolio patterns for `dg`.
    pub portfolios: Option<usize>,
    /// Cost exponents for `sweep-s`.
    pub s_values: Option<Vec<f64>>,
}

/// Everything a run needs. Unset fields take the baseline defaults of the
/// chosen experiment; `seed` has no default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub draws: Option<usize>,
    /// Reference network (`a`..`h` or a degree name), `complete:N`,
    /// `star:N`, `empty:N`, or `all` for every connected five-bank network.
    pub topology: Option<String>,
    /// Edge-list file; overrides `topology`.
    pub edges: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub ratios: BalanceRatios,
    #[serde(default)]
    pub universe: UniverseConfig,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub params: ParamsConfig,
}

impl ScenarioConfig {
    /// Parses a scenario file or a manifest (its `provenance` table is
    /// ignored).
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        table.remove("provenance");
        table.try_into().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string(self).map_err(|e| ScenarioError::Serialize(e.to_string()))
    }
}

/// A problem with one configuration field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn diag(field: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("cannot serialize scenario: {0}")]
    Serialize(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
    #[error(transparent)]
    Risk(#[from] crate::risk::RiskError),
}

impl From<crate::assets::AssetError> for ScenarioError {
    fn from(e: crate::assets::AssetError) -> Self {
        ScenarioError::Risk(e.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum NetworkChoice {
    None,
    Single(Topology),
    AllFive,
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Resolved {
    pub experiment: Experiment,
    pub seed: u64,
    pub draws: usize,
    pub network: NetworkChoice,
    pub ratios: BalanceRatios,
    pub family: ReturnFamily,
    pub rho: f64,
    pub p: f64,
    pub k: usize,
    pub s: f64,
    pub banks: usize,
    pub n_max: usize,
    pub portfolios: usize,
    pub s_values: Vec<f64>,
    echo: ScenarioConfig,
}

const DEFAULT_S_VALUES: [f64; 11] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0, 12.0, 15.0];

fn parse_topology(spec: &str) -> Result<NetworkChoice, String> {
    let spec = spec.trim();
    if spec == "all" {
        return Ok(NetworkChoice::AllFive);
    }
    if let Some((kind, n)) = spec.split_once(':') {
        let n: usize = n.parse().map_err(|_| format!("bad bank count in `{spec}`"))?;
        let t = match kind {
            "complete" => Topology::complete(n),
            "star" => Topology::star(n),
            "empty" => Topology::empty(n),
            _ => return Err(format!("unknown topology family `{kind}`")),
        };
        return t.map(NetworkChoice::Single).map_err(|e| e.to_string());
    }
    named_topology(spec)
        .map(|nt| NetworkChoice::Single(nt.topology))
        .ok_or_else(|| format!("unknown topology `{spec}`"))
}

fn resolve(cfg: &ScenarioConfig) -> Result<Resolved, Vec<Diagnostic>> {
    let mut d = Vec::new();
    if cfg.seed.is_none() {
        d.push(diag("seed", "a seed is required"));
    }
    let Some(experiment) = cfg.experiment else {
        d.push(diag("experiment", "an experiment is required"));
        return Err(d);
    };

    let draws = cfg.draws.unwrap_or(experiment.default_draws());
    if draws == 0 {
        d.push(diag("draws", "must be at least 1"));
    }
    let p = cfg.universe.p.unwrap_or(experiment.default_p());
    if !(p > 0.0 && p < 1.0) {
        d.push(diag("universe.p", format!("must lie in (0, 1), got {p}")));
    }
    let rho = cfg.universe.rho.unwrap_or(0.8);
    if !(0.0..=1.0).contains(&rho) {
        d.push(diag("universe.rho", format!("must lie in [0, 1], got {rho}")));
    }
    let s = cfg.cost.s.unwrap_or(4.0);
    if !(s.is_finite() && s >= 1.0) {
        d.push(diag("cost.s", format!("must be at least 1, got {s}")));
    }
    let family_name = cfg.universe.family.unwrap_or(FamilyName::Normal);
    let v = cfg.universe.v.unwrap_or(3.0);
    let family = match family_name {
        FamilyName::Normal => ReturnFamily::Normal,
        FamilyName::StudentT => ReturnFamily::StudentT { dof: v },
    };
    if family.validate().is_err() {
        d.push(diag("universe.v", format!("degrees of freedom must be positive, got {v}")));
    }
    if experiment.uses_rho() && family_name != FamilyName::Normal {
        d.push(diag("universe.family", "the correlated six-asset universe is normal only"));
    }
    let k = cfg.universe.k.unwrap_or(3);
    if k == 0 {
        d.push(diag("universe.k", "must be at least 1"));
    }
    if let Err(e) = cfg.ratios.validate() {
        d.push(diag("ratios", e.to_string()));
    }
    let banks = cfg.params.banks.unwrap_or(10);
    let n_max = cfg.params.n_max.unwrap_or(30);
    for (field, value) in [("params.banks", banks), ("params.n_max", n_max)] {
        if value == 0 || value > MAX_BANKS {
            d.push(diag(field, format!("must lie in 1..={MAX_BANKS}, got {value}")));
        }
    }
    let portfolios = cfg.params.portfolios.unwrap_or(5_000);
    if portfolios < 2 {
        d.push(diag("params.portfolios", "at least 2 are required"));
    }
    let s_values = cfg.params.s_values.clone().unwrap_or_else(|| DEFAULT_S_VALUES.to_vec());
    if s_values.is_empty() || s_values.iter().any(|v| !(v.is_finite() && *v >= 1.0)) {
        d.push(diag("params.s_values", "need one or more exponents, each at least 1"));
    }

    let network = if experiment == Experiment::TopologyTable {
        NetworkChoice::AllFive
    } else if !experiment.needs_topology() {
        NetworkChoice::None
    } else if let Some(path) = &cfg.edges {
        match std::fs::read_to_string(path) {
            Ok(text) => match Topology::parse_edge_list(&text) {
                Ok(t) => NetworkChoice::Single(t),
                Err(e) => {
                    d.push(diag("edges", e.to_string()));
                    NetworkChoice::None
                }
            },
            Err(e) => {
                d.push(diag("edges", format!("cannot read {}: {e}", path.display())));
                NetworkChoice::None
            }
        }
    } else if let Some(spec) = &cfg.topology {
        match parse_topology(spec) {
            Ok(NetworkChoice::AllFive) => {
                d.push(diag("topology", "`all` is only valid for topology-table"));
                NetworkChoice::None
            }
            Ok(choice) => choice,
            Err(e) => {
                d.push(diag("topology", e));
                NetworkChoice::None
            }
        }
    } else {
        d.push(diag("topology", format!("required for {experiment}")));
        NetworkChoice::None
    };
    if let NetworkChoice::Single(t) = &network {
        let field = if cfg.edges.is_some() { "edges" } else { "topology" };
        if t.n_edges() > 0 && !t.is_connected() {
            d.push(diag(field, "network has interbank links but is not connected"));
        }
        if t.n_banks() > MAX_BANKS {
            d.push(diag(field, format!("at most {MAX_BANKS} banks are supported")));
        }
        let limit = match experiment {
            Experiment::Optimize | Experiment::SweepS => Some(crate::analysis::MAX_OPTIMIZER_BANKS),
            Experiment::Decompose => Some(crate::analysis::MAX_DECOMPOSITION_BANKS),
            _ => None,
        };
        if let Some(max) = limit.filter(|&m| t.n_banks() > m) {
            d.push(diag(field, format!("{experiment} supports at most {max} banks")));
        }
    }
    if !d.is_empty() {
        return Err(d);
    }

    let echo = ScenarioConfig {
        experiment: Some(experiment),
        seed: cfg.seed,
        draws: Some(draws),
        topology: cfg.topology.clone(),
        edges: cfg.edges.clone(),
        out_dir: cfg.out_dir.clone(),
        ratios: cfg.ratios,
        universe: UniverseConfig {
            family: Some(family_name),
            v: Some(v),
            rho: Some(rho),
            p: Some(p),
            k: Some(k),
        },
        cost: CostConfig { s: Some(s) },
        params: ParamsConfig {
            banks: Some(banks),
            n_max: Some(n_max),
            portfolios: Some(portfolios),
            s_values: Some(s_values.clone()),
        },
    };
    Ok(Resolved {
        experiment,
        seed: cfg.seed.expect("checked above"),
        draws,
        network,
        ratios: cfg.ratios,
        family,
        rho,
        p,
        k,
        s,
        banks,
        n_max,
        portfolios,
        s_values,
        echo,
    })
}

/// Problems that would make [`run`] reject `cfg`; empty when it is valid.
pub fn validate(cfg: &ScenarioConfig) -> Vec<Diagnostic> {
    resolve(cfg).err().unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
struct Provenance {
    library: &'static str,
    version: &'static str,
    scenario_hash: String,
    csv_file: String,
    csv_sha256: String,
    wall_time_seconds: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    #[serde(flatten)]
    config: &'a ScenarioConfig,
    provenance: Provenance,
}

/// Files written by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub scenario_hash: String,
}

impl Resolved {
    /// Hash of everything that determines the CSV contents.
    fn scenario_hash(&self) -> Result<String, ScenarioError> {
        let mut echo = self.echo.clone();
        echo.out_dir = None;
        echo.edges = None;
        let mut h = Sha256::new();
        h.update(echo.to_toml()?.as_bytes());
        if let NetworkChoice::Single(t) = &self.network {
            h.update(t.to_edge_list().as_bytes());
        }
        Ok(hex::encode(h.finalize())[..16].to_string())
    }
}

/// Produces the CSV for `cfg` without touching the file system.
pub fn render_csv(cfg: &ScenarioConfig) -> Result<Vec<u8>, ScenarioError> {
    let resolved = resolve(cfg).map_err(ScenarioError::Invalid)?;
    experiments::render(&resolved)
}

/// Runs the experiment and writes its CSV and manifest. Nothing is left in
/// the output directory if any step fails.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, ScenarioError> {
    let start = Instant::now();
    let resolved = resolve(cfg).map_err(ScenarioError::Invalid)?;
    let csv = experiments::render(&resolved)?;
    let hash = resolved.scenario_hash()?;
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&out_dir)?;

    let stem = format!("{}_{hash}", resolved.experiment);
    let csv_name = format!("{stem}.csv");
    let manifest = Manifest {
        config: &resolved.echo,
        provenance: Provenance {
            library: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            scenario_hash: hash.clone(),
            csv_file: csv_name.clone(),
            csv_sha256: hex::encode(Sha256::digest(&csv)),
            wall_time_seconds: start.elapsed().as_secs_f64(),
        },
    };
    let manifest_text = toml::to_string(&manifest).map_err(|e| ScenarioError::Serialize(e.to_string()))?;

    let mut csv_tmp = tempfile::NamedTempFile::new_in(&out_dir)?;
    csv_tmp.write_all(&csv)?;
    let mut manifest_tmp = tempfile::NamedTempFile::new_in(&out_dir)?;
    manifest_tmp.write_all(manifest_text.as_bytes())?;

    let csv_path = out_dir.join(&csv_name);
    let manifest_path = out_dir.join(format!("{stem}.manifest.toml"));
    csv_tmp.persist(&csv_path).map_err(|e| e.error)?;
    if let Err(e) = manifest_tmp.persist(&manifest_path) {
        let _ = std::fs::remove_file(&csv_path);
        return Err(e.error.into());
    }
    Ok(RunOutput {
        csv: csv_path,
        manifest: manifest_path,
        scenario_hash: hash,
    })
}
