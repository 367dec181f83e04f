//! The portfolio-choice game.
//!
//! Each bank picks a portfolio row from a finite strategy space and is
//! paid its expected equity `E[V_i^+]`. Profiles are vectors of strategy
//! indices, enumerated lexicographically with bank 0 most significant.
//! Everything here is exhaustive: payoff tables cover the whole product
//! space, so spaces stay small (at most [`MAX_PROFILES`] for Nash and
//! optimum searches).

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clearing::{ClearingError, ClearingProblem, ClearingSolution, Selection};
use crate::equity::{EquityError, EquityMatrix};
use crate::network::{BankruptcyCostSpec, Network, NetworkError};
use crate::returns::{ReturnsError, ScenarioSet};

/// Default absolute tolerance for best responses.
pub const NASH_TOL: f64 = 1e-9;
/// Largest product space for Nash and social-optimum enumeration.
pub const MAX_PROFILES: usize = 1_000_000;
/// Largest product space for the dominance check.
pub const MAX_DOMINANCE_PROFILES: usize = 10_000_000;
const GRID_DEDUP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("strategy space has {size} profiles, limit is {limit}")]
    SpaceTooLarge { size: usize, limit: usize },
    #[error("invalid game: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Returns(#[from] ReturnsError),
    #[error(transparent)]
    Equity(#[from] EquityError),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

impl From<serde_json::Error> for GameError {
    fn from(e: serde_json::Error) -> Self {
        GameError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Strategies open to one bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategySpace {
    /// Share `grid[s]` in the risky asset, the rest in the safe asset.
    RiskyShareGrid { grid: Vec<f64>, risky: usize, safe: usize },
    /// Everything in one of the listed assets.
    AssetChoice { assets: Vec<usize> },
    /// A single fixed portfolio row (a bank that does not move).
    Fixed { row: Vec<f64> },
}

impl StrategySpace {
    /// Uniform grid of `points` shares with `kinks` injected; kinks outside
    /// `[0, 1]` are dropped and near-duplicates merged.
    pub fn risky_share_grid(points: usize, risky: usize, safe: usize, kinks: &[f64]) -> Self {
        let points = points.max(2);
        let mut grid: Vec<f64> = (0..points).map(|s| s as f64 / (points - 1) as f64).collect();
        grid.extend(kinks.iter().copied().filter(|k| (0.0..=1.0).contains(k)));
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() <= GRID_DEDUP);
        StrategySpace::RiskyShareGrid { grid, risky, safe }
    }

    pub fn len(&self) -> usize {
        match self {
            StrategySpace::RiskyShareGrid { grid, .. } => grid.len(),
            StrategySpace::AssetChoice { assets } => assets.len(),
            StrategySpace::Fixed { .. } => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Portfolio row of strategy `s` over `k` assets.
    pub fn row(&self, s: usize, k: usize) -> Vec<f64> {
        let mut row = vec![0.0; k];
        match self {
            StrategySpace::RiskyShareGrid { grid, risky, safe } => {
                row[*risky] = grid[s];
                row[*safe] = 1.0 - grid[s];
            }
            StrategySpace::AssetChoice { assets } => row[assets[s]] = 1.0,
            StrategySpace::Fixed { row: r } => row.copy_from_slice(r),
        }
        row
    }

    /// Human-readable label of strategy `s`.
    pub fn label(&self, s: usize) -> String {
        match self {
            StrategySpace::RiskyShareGrid { grid, .. } => format!("{}", grid[s]),
            StrategySpace::AssetChoice { assets } => format!("asset{}", assets[s]),
            StrategySpace::Fixed { .. } => "fixed".to_string(),
        }
    }

    /// Index of the full-risky point of a share grid.
    pub fn full_risky_index(&self) -> Option<usize> {
        match self {
            StrategySpace::RiskyShareGrid { grid, .. } => grid.iter().position(|&g| g == 1.0),
            _ => None,
        }
    }

    fn validate(&self, k: usize) -> Result<(), String> {
        match self {
            StrategySpace::RiskyShareGrid { grid, risky, safe } => {
                if *risky >= k || *safe >= k || risky == safe {
                    return Err(format!("risky/safe ids {risky}/{safe} invalid for {k} assets"));
                }
                if grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
                    return Err("grid values must lie in [0, 1]".into());
                }
                if grid.windows(2).any(|w| w[0] >= w[1]) {
                    return Err("grid must be strictly increasing".into());
                }
                if grid.first() != Some(&0.0) || grid.last() != Some(&1.0) {
                    return Err("grid must include 0 and 1".into());
                }
            }
            StrategySpace::AssetChoice { assets } => {
                if assets.is_empty() || assets.iter().any(|&a| a >= k) {
                    return Err(format!("asset choice {assets:?} invalid for {k} assets"));
                }
            }
            StrategySpace::Fixed { row } => {
                if row.len() != k || row.iter().any(|&x| !(x >= 0.0)) {
                    return Err("fixed row must have one nonnegative entry per asset".into());
                }
            }
        }
        Ok(())
    }
}

/// A game: network, returns, costs, selection rule and strategy spaces.
#[derive(Debug, Clone)]
pub struct GameSpec {
    pub network: Network,
    pub scenarios: ScenarioSet,
    pub costs: BankruptcyCostSpec,
    pub selection: Selection,
    pub spaces: Vec<StrategySpace>,
    pub equity: Option<EquityMatrix>,
}

/// Strategy index per bank.
pub type Profile = Vec<usize>;

/// Expected outcomes of one profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileEval {
    /// `E[V_i^+]` per bank.
    pub equity: Vec<f64>,
    /// `E[sum q.p - sum b]`.
    pub welfare: f64,
    pub expected_costs: Vec<f64>,
    pub expected_defaults: f64,
}

impl GameSpec {
    pub fn new(
        network: Network,
        scenarios: ScenarioSet,
        costs: BankruptcyCostSpec,
        selection: Selection,
        spaces: Vec<StrategySpace>,
    ) -> Result<Self, GameError> {
        let g = GameSpec {
            network,
            scenarios,
            costs,
            selection,
            spaces,
            equity: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_equity(mut self, s: EquityMatrix) -> Result<Self, GameError> {
        self.equity = Some(s);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), GameError> {
        let n = self.network.n();
        if self.spaces.len() != n {
            return Err(GameError::InvalidSpec(format!("{} strategy spaces for {n} banks", self.spaces.len())));
        }
        let k = self.scenarios.k();
        for (b, sp) in self.spaces.iter().enumerate() {
            sp.validate(k).map_err(|m| GameError::InvalidSpec(format!("bank position {b}: {m}")))?;
        }
        if let Some(s) = &self.equity {
            if s.n() != n {
                return Err(GameError::InvalidSpec(format!("equity matrix is {0}x{0} for {n} banks", s.n())));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.network.n()
    }

    /// The clearing setup shared by every profile.
    pub fn problem(&self) -> ClearingProblem<'_> {
        let pb = ClearingProblem::new(&self.network, self.costs, self.selection);
        match &self.equity {
            Some(s) => pb.with_equity(s.as_slice()),
            None => pb,
        }
    }

    /// Number of pure profiles (saturating).
    pub fn profile_count(&self) -> usize {
        self.spaces.iter().fold(1usize, |acc, s| acc.saturating_mul(s.len()))
    }

    /// Portfolio matrix of a profile.
    pub fn rows(&self, profile: &[usize]) -> Vec<Vec<f64>> {
        let k = self.scenarios.k();
        self.spaces.iter().zip(profile).map(|(sp, &s)| sp.row(s, k)).collect()
    }

    /// Profile at lexicographic position `idx`.
    pub fn profile_at(&self, mut idx: usize) -> Profile {
        let mut p = vec![0; self.n()];
        for b in (0..self.n()).rev() {
            let len = self.spaces[b].len();
            p[b] = idx % len;
            idx /= len;
        }
        p
    }

    /// Lexicographic position of a profile.
    pub fn profile_index(&self, profile: &[usize]) -> usize {
        profile.iter().zip(&self.spaces).fold(0, |acc, (&s, sp)| acc * sp.len() + s)
    }

    fn check_profile(&self, profile: &[usize]) -> Result<(), GameError> {
        if profile.len() != self.n() || profile.iter().zip(&self.spaces).any(|(&s, sp)| s >= sp.len()) {
            return Err(GameError::InvalidSpec(format!("profile {profile:?} outside the strategy spaces")));
        }
        Ok(())
    }

    /// Clears one profile in every scenario.
    pub fn solutions(&self, profile: &[usize]) -> Result<Vec<ClearingSolution>, GameError> {
        self.check_profile(profile)?;
        let rows = self.rows(profile);
        let pb = self.problem();
        let mut out = Vec::new();
        for s in self.scenarios.points() {
            out.push(pb.solve_portfolio(&rows, &s.returns)?);
        }
        Ok(out)
    }

    /// Expected outcomes of a profile.
    pub fn evaluate(&self, profile: &[usize]) -> Result<ProfileEval, GameError> {
        self.check_profile(profile)?;
        Ok(evaluate_rows(&self.problem(), &self.rows(profile), &self.scenarios)?)
    }
}

/// Expected outcomes of a portfolio matrix under a clearing setup.
pub fn evaluate_rows(
    pb: &ClearingProblem<'_>,
    rows: &[Vec<f64>],
    scenarios: &ScenarioSet,
) -> Result<ProfileEval, ClearingError> {
    let n = pb.network.n();
    let mut ev = ProfileEval {
        equity: vec![0.0; n],
        welfare: 0.0,
        expected_costs: vec![0.0; n],
        expected_defaults: 0.0,
    };
    for s in scenarios.points() {
        let sol = pb.solve_portfolio(rows, &s.returns)?;
        accumulate(&mut ev, &sol, s.prob);
    }
    Ok(ev)
}

fn accumulate(ev: &mut ProfileEval, sol: &ClearingSolution, prob: f64) {
    for b in 0..sol.n() {
        ev.equity[b] += prob * sol.values[b].max(0.0);
        ev.expected_costs[b] += prob * sol.costs[b];
    }
    ev.welfare += prob * (sol.investment.iter().sum::<f64>() - sol.total_cost());
    ev.expected_defaults += prob * sol.defaults.len() as f64;
}

/// `E[V_i^+]` of bank position `i` under a profile.
pub fn expected_equity(game: &GameSpec, profile: &[usize], i: usize) -> Result<f64, GameError> {
    Ok(game.evaluate(profile)?.equity[i])
}

/// Every strategy of bank `i` within `tol` of its best payoff against the
/// rest of `profile`, in index order.
pub fn best_responses(game: &GameSpec, profile: &[usize], i: usize, tol: f64) -> Result<Vec<usize>, GameError> {
    game.check_profile(profile)?;
    let payoffs = (0..game.spaces[i].len())
        .map(|s| {
            let mut p = profile.to_vec();
            p[i] = s;
            expected_equity(game, &p, i)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(argmax_set(&payoffs, tol))
}

fn argmax_set(xs: &[f64], tol: f64) -> Vec<usize> {
    let best = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..xs.len()).filter(|&s| xs[s] >= best - tol).collect()
}

/// Expected outcomes of every profile, in lexicographic order.
#[derive(Debug, Clone)]
pub struct PayoffTable {
    pub sizes: Vec<usize>,
    /// `equity[idx * n + b]`.
    pub equity: Vec<f64>,
    pub welfare: Vec<f64>,
    pub expected_defaults: Vec<f64>,
}

impl PayoffTable {
    pub fn len(&self) -> usize {
        self.welfare.len()
    }

    pub fn is_empty(&self) -> bool {
        self.welfare.is_empty()
    }

    pub fn payoff(&self, idx: usize, b: usize) -> f64 {
        self.equity[idx * self.sizes.len() + b]
    }

    fn stride(&self, b: usize) -> usize {
        self.sizes[b + 1..].iter().product()
    }

    /// For each profile, whether bank `b` is within `tol` of its best
    /// deviation against the same opponents.
    fn best_response_flags(&self, b: usize, tol: f64) -> Vec<bool> {
        let stride = self.stride(b);
        let len = self.sizes[b];
        let block = stride * len;
        let mut flags = vec![false; self.len()];
        for base in (0..self.len()).step_by(block) {
            for off in 0..stride {
                let idxs = (0..len).map(|s| base + s * stride + off);
                let best = idxs.clone().map(|i| self.payoff(i, b)).fold(f64::NEG_INFINITY, f64::max);
                for i in idxs {
                    flags[i] = self.payoff(i, b) >= best - tol;
                }
            }
        }
        flags
    }
}

/// Evaluates every profile, in parallel, refusing spaces above `limit`.
pub fn payoff_table(game: &GameSpec, limit: usize) -> Result<PayoffTable, GameError> {
    let size = game.profile_count();
    if size > limit {
        return Err(GameError::SpaceTooLarge { size, limit });
    }
    let n = game.n();
    let k = game.scenarios.k();
    let pts = game.scenarios.points();
    // investment value of every (bank, strategy, scenario)
    let inv: Vec<Vec<Vec<f64>>> = game
        .spaces
        .iter()
        .map(|sp| {
            (0..sp.len())
                .map(|s| {
                    let row = sp.row(s, k);
                    pts.iter().map(|p| row.iter().zip(&p.returns).map(|(a, b)| a * b).sum()).collect()
                })
                .collect()
        })
        .collect();
    let pb = game.problem();
    let evals: Vec<ProfileEval> = (0..size)
        .into_par_iter()
        .map(|idx| {
            let profile = game.profile_at(idx);
            let mut ev = ProfileEval {
                equity: vec![0.0; n],
                welfare: 0.0,
                expected_costs: vec![0.0; n],
                expected_defaults: 0.0,
            };
            let mut e = vec![0.0; n];
            for (si, s) in pts.iter().enumerate() {
                for b in 0..n {
                    e[b] = inv[b][profile[b]][si];
                }
                let sol = pb.solve(&e)?;
                accumulate(&mut ev, &sol, s.prob);
            }
            Ok(ev)
        })
        .collect::<Result<_, ClearingError>>()?;
    let mut t = PayoffTable {
        sizes: game.spaces.iter().map(StrategySpace::len).collect(),
        equity: Vec::with_capacity(size * n),
        welfare: Vec::with_capacity(size),
        expected_defaults: Vec::with_capacity(size),
    };
    for ev in evals {
        t.equity.extend_from_slice(&ev.equity);
        t.welfare.push(ev.welfare);
        t.expected_defaults.push(ev.expected_defaults);
    }
    Ok(t)
}

/// Pure Nash equilibria, in lexicographic order.
pub fn enumerate_nash(game: &GameSpec, tol: f64) -> Result<Vec<Profile>, GameError> {
    let table = payoff_table(game, MAX_PROFILES)?;
    Ok(nash_from_table(game, &table, tol))
}

/// Nash profiles of an already computed table.
pub fn nash_from_table(game: &GameSpec, table: &PayoffTable, tol: f64) -> Vec<Profile> {
    let mut ok = vec![true; table.len()];
    for b in 0..game.n() {
        for (o, f) in ok.iter_mut().zip(table.best_response_flags(b, tol)) {
            *o &= f;
        }
    }
    (0..table.len()).filter(|&i| ok[i]).map(|i| game.profile_at(i)).collect()
}

/// Welfare-maximizing profiles (all within `tol` of the best).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SocialOptimum {
    pub profiles: Vec<Profile>,
    pub welfare: f64,
}

/// Exhaustive welfare argmax over the game's strategy spaces.
pub fn social_optimum(game: &GameSpec, tol: f64) -> Result<SocialOptimum, GameError> {
    let table = payoff_table(game, MAX_PROFILES)?;
    let set = argmax_set(&table.welfare, tol);
    let welfare = set.iter().map(|&i| table.welfare[i]).fold(f64::NEG_INFINITY, f64::max);
    Ok(SocialOptimum {
        profiles: set.into_iter().map(|i| game.profile_at(i)).collect(),
        welfare,
    })
}

/// Outcome of the full-risky dominance check for one bank.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub bank: usize,
    /// Smallest payoff gain of full risk over any other grid point.
    pub min_margin: f64,
    /// Opponent profiles and own strategies where the gain is not positive
    /// (first few only).
    pub violations: Vec<(Profile, f64)>,
    pub violation_count: usize,
    /// Risky and safe returns coincide in every scenario, so strictness
    /// cannot hold (the distribution is not atomless in any useful sense).
    pub degenerate: bool,
    pub holds: bool,
}

/// Checks that a full-risky share strictly beats every other grid point
/// of each share-grid bank against every opponent profile.
pub fn check_dominance_full_risky(game: &GameSpec) -> Result<Vec<DominanceReport>, GameError> {
    let table = payoff_table(game, MAX_DOMINANCE_PROFILES)?;
    let mut out = Vec::new();
    for (b, sp) in game.spaces.iter().enumerate() {
        let StrategySpace::RiskyShareGrid { risky, safe, .. } = sp else {
            continue;
        };
        let full = sp.full_risky_index().expect("validated grids contain 1");
        let degenerate = game.scenarios.points().iter().all(|s| s.returns[*risky] == s.returns[*safe]);
        let stride = table.stride(b);
        let len = sp.len();
        let mut min_margin = f64::INFINITY;
        let mut violations = Vec::new();
        let mut count = 0;
        for base in (0..table.len()).step_by(stride * len) {
            for off in 0..stride {
                let top = table.payoff(base + full * stride + off, b);
                for s in (0..len).filter(|&s| s != full) {
                    let idx = base + s * stride + off;
                    let margin = top - table.payoff(idx, b);
                    min_margin = min_margin.min(margin);
                    if !(margin > 0.0) {
                        count += 1;
                        if violations.len() < 20 {
                            violations.push((game.profile_at(idx), margin));
                        }
                    }
                }
            }
        }
        out.push(DominanceReport {
            bank: b,
            min_margin,
            violations,
            violation_count: count,
            degenerate,
            holds: count == 0,
        });
    }
    Ok(out)
}

/// Pairs `(i, j)` (node numbers) meeting the sufficient condition that
/// rules out independent portfolios: `D_ij > 0`,
/// `R_low <= D_i^L - D_i^A < R_high` and `R_low < D_j^L - D_j^A`.
pub fn prop2_sufficient_condition(network: &Network, r_high: f64, r_low: f64) -> Vec<(usize, usize)> {
    let gap = |i: usize| network.liabilities(i) - network.assets(i);
    let mut out = Vec::new();
    for i in 1..network.nodes() {
        let gi = gap(i);
        if !(r_low <= gi && gi < r_high) {
            continue;
        }
        for j in 1..network.nodes() {
            if j != i && network.claim(i, j) > 0.0 && r_low < gap(j) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Which sufficient condition for a fully correlated equilibrium each bank
/// meets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CorrelationVerdict {
    /// (i) not on a directed debt cycle.
    pub acyclic: bool,
    /// (ii) `D_i^L <= R_low`.
    pub covered_by_low: bool,
    /// (iii) `D_i^L - D_i^A >= R_low`.
    pub net_debtor: bool,
}

impl CorrelationVerdict {
    pub fn holds(&self) -> bool {
        self.acyclic || self.covered_by_low || self.net_debtor
    }
}

/// Per-bank verdicts of the sufficient condition.
pub fn prop3_sufficient_condition(network: &Network, r_low: f64) -> Vec<CorrelationVerdict> {
    let cyc = network.on_debt_cycle();
    (0..network.n())
        .map(|b| {
            let node = b + 1;
            let dl = network.liabilities(node);
            CorrelationVerdict {
                acyclic: !cyc[b],
                covered_by_low: dl <= r_low,
                net_debtor: dl - network.assets(node) >= r_low,
            }
        })
        .collect()
}

/// Profile in which every asset-choice bank holds `asset` (fixed banks keep
/// their row); `None` if some bank cannot hold it.
pub fn correlated_profile(game: &GameSpec, asset: usize) -> Option<Profile> {
    game.spaces
        .iter()
        .map(|sp| match sp {
            StrategySpace::AssetChoice { assets } => assets.iter().position(|&a| a == asset),
            StrategySpace::Fixed { .. } => Some(0),
            StrategySpace::RiskyShareGrid { .. } => None,
        })
        .collect()
}

/// Whether `profile` is a Nash equilibrium, by direct best responses.
pub fn is_nash(game: &GameSpec, profile: &[usize], tol: f64) -> Result<bool, GameError> {
    for b in 0..game.n() {
        if !best_responses(game, profile, b, tol)?.contains(&profile[b]) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Outcome of the strict-complementarity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub holds: bool,
    /// A bank and two opponent high/low patterns breaking the condition.
    pub violation: Option<(usize, Vec<bool>, Vec<bool>)>,
    /// When the condition holds: whether every Nash profile puts all banks
    /// in the same portfolio.
    pub all_nash_correlated: Option<bool>,
}

/// Checks that the gain `V_i^+(own high) - V_i^+(own low)` strictly grows
/// with the number of opponents realizing high, using the extreme returns
/// of the selectable assets. When it holds, enumerates Nash equilibria
/// and checks they are all fully correlated.
pub fn prop4_uniqueness_condition(game: &GameSpec, tol: f64) -> Result<UniquenessReport, GameError> {
    let n = game.n();
    let (r_low, r_high) = selectable_range(game);
    let pb = game.problem();
    let mut violation = None;
    'banks: for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&b| b != i).collect();
        // (highs count, gain, pattern)
        let mut gains: Vec<(usize, f64, Vec<bool>)> = Vec::new();
        for mask in 0..1usize << others.len() {
            let pattern: Vec<bool> = (0..others.len()).map(|t| mask >> t & 1 == 1).collect();
            let mut e = vec![0.0; n];
            for (t, &b) in others.iter().enumerate() {
                e[b] = if pattern[t] { r_high } else { r_low };
            }
            e[i] = r_high;
            let hi = pb.solve(&e)?.values[i].max(0.0);
            e[i] = r_low;
            let lo = pb.solve(&e)?.values[i].max(0.0);
            gains.push((pattern.iter().filter(|&&x| x).count(), hi - lo, pattern));
        }
        for a in &gains {
            for b in &gains {
                if a.0 > b.0 && !(a.1 - b.1 > tol) {
                    violation = Some((i + 1, a.2.clone(), b.2.clone()));
                    break 'banks;
                }
            }
        }
    }
    let all_nash_correlated = if violation.is_none() {
        let nash = enumerate_nash(game, tol)?;
        let k = game.scenarios.k();
        Some(nash.iter().all(|p| {
            let rows: Vec<Vec<f64>> = game.spaces.iter().zip(p).map(|(sp, &s)| sp.row(s, k)).collect();
            rows.windows(2).all(|w| w[0] == w[1])
        }))
    } else {
        None
    };
    Ok(UniquenessReport {
        holds: violation.is_none(),
        violation,
        all_nash_correlated,
    })
}

// Lowest and highest return among assets some bank can select.
fn selectable_range(game: &GameSpec) -> (f64, f64) {
    let k = game.scenarios.k();
    let mut used = vec![false; k];
    for sp in &game.spaces {
        match sp {
            StrategySpace::AssetChoice { assets } => assets.iter().for_each(|&a| used[a] = true),
            StrategySpace::RiskyShareGrid { risky, safe, .. } => {
                used[*risky] = true;
                used[*safe] = true;
            }
            StrategySpace::Fixed { row } => row.iter().enumerate().filter(|(_, &x)| x > 0.0).for_each(|(a, _)| used[a] = true),
        }
    }
    game.scenarios
        .points()
        .iter()
        .flat_map(|s| s.returns.iter().enumerate().filter(|(a, _)| used[*a]).map(|(_, &x)| x))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// On-disk game description; paths are relative to the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameFile {
    pub network: String,
    pub scenarios: String,
    pub costs: BankruptcyCostSpec,
    #[serde(default)]
    pub selection: Selection,
    pub spaces: Vec<StrategySpace>,
    #[serde(default)]
    pub equity: Option<String>,
}

fn read(path: &Path) -> Result<String, GameError> {
    std::fs::read_to_string(path).map_err(|e| GameError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Loads a game file and the files it references.
pub fn load_game(path: &Path) -> Result<GameSpec, GameError> {
    let file: GameFile = serde_json::from_str(&read(path)?)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let network = Network::from_json(&read(&dir.join(&file.network))?)?;
    let scenarios = ScenarioSet::from_json(&read(&dir.join(&file.scenarios))?)?;
    let costs = BankruptcyCostSpec::new(file.costs.a, file.costs.chi)?;
    let game = GameSpec::new(network, scenarios, costs, file.selection, file.spaces)?;
    match file.equity {
        Some(p) => game.with_equity(EquityMatrix::from_json(&read(&dir.join(p))?)?),
        None => Ok(game),
    }
}
