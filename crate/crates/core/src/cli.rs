//! Command implementations behind the `netclear` binary.
//!
//! Every command reads JSON inputs, writes CSV (17 significant digits) or
//! JSON into an output directory and maps failures onto exit codes:
//! 2 for bad input, 3 when a solver gives up.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::centrality::{centrality_report, CounterfactualRule};
use crate::clearing::{ClearingError, ClearingProblem, Selection};
use crate::equity::{EquityError, EquityMatrix};
use crate::game::{enumerate_nash, load_game, GameError, NASH_TOL};
use crate::network::{BankruptcyCostSpec, Network, NetworkError};
use crate::regulation::*;
use crate::replicate::{self, fmt_f64, ReplicateError, Table};
use crate::returns::{ReturnsError, ScenarioSet};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl From<ClearingError> for CliError {
    fn from(e: ClearingError) -> Self {
        match e {
            ClearingError::NoConvergence { .. } => CliError::Solver(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EquityError> for CliError {
    fn from(e: EquityError) -> Self {
        match e {
            EquityError::Clearing(c) => c.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        match e {
            GameError::Clearing(c) => c.into(),
            GameError::Equity(q) => q.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<RegulationError> for CliError {
    fn from(e: RegulationError) -> Self {
        match e {
            RegulationError::Clearing(c) => c.into(),
            RegulationError::Game(g) => g.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ReplicateError> for CliError {
    fn from(e: ReplicateError) -> Self {
        match e {
            ReplicateError::Clearing(c) => c.into(),
            ReplicateError::Equity(q) => q.into(),
            ReplicateError::Game(g) => g.into(),
            ReplicateError::Regulation(r) => r.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ReturnsError> for CliError {
    fn from(e: ReturnsError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| {
        CliError::Config(format!("{}: parse error at line {}, column {}: {e}", path.display(), e.line(), e.column()))
    })
}

fn out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_table(table: &Table, path: &Path) -> Result<(), CliError> {
    Ok(table.write_csv(path)?)
}

/// Inputs of `clear`.
#[derive(Debug, Clone)]
pub struct ClearArgs {
    pub network: PathBuf,
    /// Without scenarios the portfolio rows are investment values.
    pub scenarios: Option<PathBuf>,
    pub portfolio: Option<PathBuf>,
    pub equity: Option<PathBuf>,
    pub costs: BankruptcyCostSpec,
    pub selection: Selection,
    pub samples: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
}

fn load_scenarios(path: &Path, samples: Option<usize>, seed: u64) -> Result<ScenarioSet, CliError> {
    let sc = ScenarioSet::from_json(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(match samples {
        Some(n) => sc.with_monte_carlo(n, seed)?,
        None => sc,
    })
}

fn load_network(path: &Path) -> Result<Network, CliError> {
    Network::from_json(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Clears the network in every scenario; writes one JSON solution per
/// scenario and a summary CSV.
pub fn cmd_clear(args: &ClearArgs) -> Result<(), CliError> {
    let net = load_network(&args.network)?;
    let n = net.n();
    let scenarios = match &args.scenarios {
        Some(p) => load_scenarios(p, args.samples, args.seed)?,
        None => ScenarioSet::deterministic(vec![1.0])?,
    };
    let q: Vec<Vec<f64>> = match &args.portfolio {
        Some(p) => parse_json(p)?,
        None => vec![vec![0.0; scenarios.k()]; n],
    };
    let equity = match &args.equity {
        Some(p) => Some(EquityMatrix::from_json(&read(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let mut pb = ClearingProblem::new(&net, args.costs, args.selection);
    if let Some(s) = &equity {
        if s.n() != n {
            return Err(CliError::Config(format!("equity matrix is {0}x{0} for {n} banks", s.n())));
        }
        pb = pb.with_equity(s.as_slice());
    }
    out_dir(&args.out)?;
    let mut header = vec!["scenario".to_string(), "probability".into(), "defaults".into(), "total_cost".into(), "outside_value".into()];
    header.extend((1..=n).map(|i| format!("V_{i}")));
    let mut table = Table { header, rows: Vec::new() };
    for (k, s) in scenarios.points().iter().enumerate() {
        let sol = pb.solve_portfolio(&q, &s.returns)?;
        write_text(&args.out.join(format!("solution_{k}.json")), &sol.to_json())?;
        let mut row = vec![
            k.to_string(),
            fmt_f64(s.prob),
            sol.defaults.iter().map(|b| (b + 1).to_string()).collect::<Vec<_>>().join(" "),
            fmt_f64(sol.total_cost()),
            fmt_f64(sol.outside_value),
        ];
        row.extend(sol.values.iter().map(|&v| fmt_f64(v)));
        table.rows.push(row);
    }
    write_table(&table, &args.out.join("clearing.csv"))
}

/// Pure Nash equilibria of a game file.
pub fn cmd_nash(game: &Path, out: &Path) -> Result<usize, CliError> {
    let g = load_game(game)?;
    let nash = enumerate_nash(&g, NASH_TOL)?;
    let mut header = vec!["equilibrium".to_string(), "welfare".into(), "expected_defaults".into()];
    header.extend((1..=g.n()).map(|i| format!("strategy_{i}")));
    header.extend((1..=g.n()).map(|i| format!("equity_{i}")));
    let mut table = Table { header, rows: Vec::new() };
    for (k, p) in nash.iter().enumerate() {
        let e = g.evaluate(p)?;
        let mut row = vec![k.to_string(), fmt_f64(e.welfare), fmt_f64(e.expected_defaults)];
        row.extend(p.iter().zip(&g.spaces).map(|(&s, sp)| sp.label(s)));
        row.extend(e.equity.iter().map(|&v| fmt_f64(v)));
        table.rows.push(row);
    }
    out_dir(out)?;
    write_table(&table, &out.join("nash.csv"))?;
    Ok(nash.len())
}

/// Welfare of a policy (laissez-faire when none is given).
pub fn cmd_welfare(game: &Path, policy: Option<&Path>, out: &Path) -> Result<PolicyOutcome, CliError> {
    let g = load_game(game)?;
    let pol = match policy {
        Some(p) => Policy::from_json(&read(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => Policy::laissez_faire(g.n()),
    };
    let o = policy_welfare(&pol, &g)?;
    let mut t = Table {
        header: ["welfare", "expected_bankruptcy_costs", "expected_bailout_costs", "expected_defaults", "expected_bailouts"]
            .map(String::from)
            .to_vec(),
        rows: Vec::new(),
    };
    t.rows.push(vec![
        fmt_f64(o.welfare),
        fmt_f64(o.expected_bankruptcy_costs),
        fmt_f64(o.expected_bailout_costs),
        fmt_f64(o.expected_defaults),
        fmt_f64(o.expected_bailouts),
    ]);
    out_dir(out)?;
    write_table(&t, &out.join("welfare.csv"))?;
    Ok(o)
}

/// Exhaustive policy search over each bank's injected caps.
pub fn cmd_search(game: &Path, rate: f64, bailout_cost: Option<f64>, out: &Path) -> Result<SearchResult, CliError> {
    let g = load_game(game)?;
    let cands = game_candidate_caps(&g, rate);
    let costs = bailout_cost.map(|c| vec![c; g.n()]);
    let res = optimal_policy_search(&g, &cands, costs.as_deref())?;
    out_dir(out)?;
    let json: Vec<String> = res.optimal.iter().map(Policy::to_json).collect();
    write_text(&out.join("optimal_policies.json"), &format!("[{}]\n", json.join(",\n")))?;
    let mut t = Table { header: vec!["policy".into(), "welfare".into(), "evaluated".into()], rows: Vec::new() };
    for (k, _) in res.optimal.iter().enumerate() {
        t.rows.push(vec![k.to_string(), fmt_f64(res.welfare), res.evaluated.to_string()]);
    }
    write_table(&t, &out.join("search.csv"))?;
    Ok(res)
}

/// NFC and bailout centrality per bank against moving all capital into
/// `safe_asset`.
pub fn cmd_centrality(args: &ClearArgs, safe_asset: usize) -> Result<(), CliError> {
    let net = load_network(&args.network)?;
    let Some(sp) = &args.scenarios else {
        return Err(CliError::Config("centrality needs --scenarios".into()));
    };
    let Some(pp) = &args.portfolio else {
        return Err(CliError::Config("centrality needs --portfolio".into()));
    };
    let sc = load_scenarios(sp, args.samples, args.seed)?;
    let q: Vec<Vec<f64>> = parse_json(pp)?;
    let rows = centrality_report(&net, &q, &CounterfactualRule::AllIn { asset: safe_asset }, &sc, &args.costs, args.selection)?;
    let mut t = Table { header: vec!["bank".into(), "nfc".into(), "bailout_centrality".into()], rows: Vec::new() };
    for r in rows {
        t.rows.push(vec![(r.bank + 1).to_string(), fmt_f64(r.nfc), fmt_f64(r.bailout)]);
    }
    out_dir(&args.out)?;
    write_table(&t, &args.out.join("centrality.csv"))
}

/// One swept parameter of a core-periphery instance.
#[derive(Debug, Clone, Deserialize)]
pub struct Axis {
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    fn values(&self) -> Vec<f64> {
        (0..self.steps)
            .map(|i| {
                if self.steps <= 1 {
                    self.min
                } else {
                    self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64
                }
            })
            .collect()
    }
}

/// Sweep description.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepConfig {
    /// Regime classification over a grid of core-periphery parameters;
    /// the first axis varies slowest.
    CorePeriphery { base: CPParams, axes: Vec<Axis> },
    RegimeMap { spec: RegimeMapSpec },
    DefaultsVsM { base: CPParams, ms: Vec<usize> },
}

fn set_param(p: &mut CPParams, name: &str, v: f64) -> Result<(), CliError> {
    let whole = |v: f64| -> Result<usize, CliError> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(CliError::Config(format!("parameter {name} needs whole values, got {v}")))
        }
    };
    match name {
        "theta" => p.theta = v,
        "chi" => p.chi = v,
        "d" => p.d = v,
        "d0" => p.d0 = v,
        "r" => p.r = v,
        "r_high" => p.r_high = v,
        "m" => p.m = whole(v)?,
        "n_c" => p.n_c = whole(v)?,
        other => return Err(CliError::Config(format!("unknown sweep parameter `{other}`"))),
    }
    Ok(())
}

pub fn cmd_sweep(config: &Path, out: &Path) -> Result<usize, CliError> {
    let cfg: SweepConfig = parse_json(config)?;
    let table = match cfg {
        SweepConfig::CorePeriphery { base, axes } => {
            if axes.is_empty() || axes.iter().any(|a| a.steps == 0) {
                return Err(CliError::Config("core_periphery sweep needs at least one axis with steps >= 1".into()));
            }
            let mut header: Vec<String> = axes.iter().map(|a| a.param.clone()).collect();
            header.extend(
                [
                    "k_risky", "k_safe", "theta_symmetric", "theta_high", "theta_low", "regime", "boundary", "welfare",
                    "welfare_laissez_faire", "welfare_symmetric",
                ]
                .map(String::from),
            );
            let mut t = Table { header, rows: Vec::new() };
            let grids: Vec<Vec<f64>> = axes.iter().map(Axis::values).collect();
            let total: usize = grids.iter().map(Vec::len).product();
            for idx in 0..total {
                let mut rest = idx;
                let mut point = vec![0.0; grids.len()];
                for (a, g) in grids.iter().enumerate().rev() {
                    point[a] = g[rest % g.len()];
                    rest /= g.len();
                }
                let mut p = base;
                for (a, &v) in axes.iter().zip(&point) {
                    set_param(&mut p, &a.param, v)?;
                }
                let v = cp_optimal_regime(&p)?;
                let th = &v.thresholds;
                let mut row: Vec<String> = point.iter().map(|&x| fmt_f64(x)).collect();
                row.extend([
                    th.k_risky.to_string(),
                    th.k_safe.to_string(),
                    fmt_f64(th.theta_symmetric),
                    fmt_f64(th.theta_high),
                    th.theta_low.map_or(String::new(), fmt_f64),
                    v.regime.label(),
                    v.boundary.to_string(),
                    fmt_f64(v.welfare),
                    fmt_f64(v.welfare_laissez_faire),
                    fmt_f64(v.welfare_symmetric),
                ]);
                t.rows.push(row);
            }
            t
        }
        SweepConfig::RegimeMap { spec } => {
            let cells = sweep_regime_map(&spec)?;
            let mut t = Table {
                header: ["ix", "iy", "x", "y", "opportunity_cost", "nfc", "bailout_cost", "regime", "boundary"]
                    .map(String::from)
                    .to_vec(),
                rows: Vec::new(),
            };
            for c in cells {
                t.rows.push(vec![
                    c.ix.to_string(),
                    c.iy.to_string(),
                    fmt_f64(c.x),
                    fmt_f64(c.y),
                    fmt_f64(c.opportunity_cost),
                    fmt_f64(c.nfc),
                    fmt_f64(c.bailout_cost),
                    c.regime.as_str().into(),
                    c.boundary.to_string(),
                ]);
            }
            t
        }
        SweepConfig::DefaultsVsM { base, ms } => {
            let rows = sweep_defaults_vs_m(&base, &ms)?;
            let mut t = Table {
                header: ["m", "k_risky", "expected_defaults", "closed_form"].map(String::from).to_vec(),
                rows: Vec::new(),
            };
            for r in rows {
                t.rows.push(vec![r.m.to_string(), r.k_risky.to_string(), fmt_f64(r.expected_defaults), fmt_f64(r.closed_form)]);
            }
            t
        }
    };
    out_dir(out)?;
    write_table(&table, &out.join("sweep.csv"))?;
    Ok(table.rows.len())
}

/// Runs one target (or `all`), writes `<target>.csv` and
/// `<target>_report.txt`, and returns whether every check passed.
pub fn cmd_replicate(name: &str, seed: u64, out: &Path) -> Result<bool, CliError> {
    let names: Vec<&str> = if name == "all" { replicate::TARGETS.to_vec() } else { vec![name] };
    if let Some(bad) = names.iter().find(|n| !replicate::TARGETS.contains(n)) {
        return Err(CliError::Config(format!(
            "unknown target `{bad}`; known targets: {}",
            replicate::TARGETS.join(", ")
        )));
    }
    out_dir(out)?;
    let mut all = true;
    for t in names {
        let rep = if t == "conservation" { replicate::conservation(seed)? } else { replicate::run(t)? };
        write_table(&rep.table, &out.join(format!("{t}.csv")))?;
        let text = rep.render();
        write_text(&out.join(format!("{t}_report.txt")), &text)?;
        print!("{text}");
        all &= rep.pass();
    }
    Ok(all)
}
