//! Regulation: caps on risky shares, ex-post bailouts, and the search for
//! welfare-optimal policies.
//!
//! A [`Policy`] caps each bank's risky share and may name banks that are
//! bailed out. Banks invest up to their cap (see [`induced_profile`]), and
//! welfare is `E[sum q.p - sum b - bailout charges]`, gross of transfers to
//! depositors. Bailed-out banks are cleared as forced-solvent; a bailout
//! cost `c_i` is charged in each scenario where bank `i` needed the support.

mod core_periphery;
mod sweep;

pub use core_periphery::*;
pub use sweep::*;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clearing::{ClearingError, ClearingProblem, Selection};
use crate::centrality::{nfc, CentralityQuery};
use crate::game::{GameError, GameSpec, Profile, StrategySpace, NASH_TOL};
use crate::network::{BankruptcyCostSpec, Network, NetworkError};
use crate::returns::{pairwise_sum, ReturnsError, ScenarioSet};

/// Largest policy space [`optimal_policy_search`] will enumerate.
pub const MAX_POLICIES: usize = 1_000_000;
/// Welfare tolerance for argmax sets and regime ties.
pub const WELFARE_TOL: f64 = 1e-9;
const CAP_MATCH: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegulationError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("bank {bank}: cap {cap} is not a best response (share {best} does better)")]
    CapNotBestResponse { bank: usize, cap: f64, best: f64 },
    #[error("bank {bank}: liabilities {liabilities} exceed the safe gross return {gross}")]
    CapInfeasible { bank: usize, liabilities: f64, gross: f64 },
    #[error("policy space has {size} policies, limit is {limit}")]
    SpaceTooLarge { size: usize, limit: usize },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Returns(#[from] ReturnsError),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

impl From<serde_json::Error> for RegulationError {
    fn from(e: serde_json::Error) -> Self {
        RegulationError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Banks the regulator bails out, with the cost of each bailout event.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bailout {
    /// Node numbers (bank position + 1).
    pub members: Vec<usize>,
    pub costs: Vec<f64>,
}

/// Caps on risky shares plus an optional bailout set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    /// Maximum risky share per bank position; 1 means unregulated.
    pub caps: Vec<f64>,
    #[serde(default)]
    pub bailout: Bailout,
}

impl Policy {
    pub fn laissez_faire(n: usize) -> Self {
        Policy::with_caps(vec![1.0; n])
    }

    pub fn with_caps(caps: Vec<f64>) -> Self {
        Policy {
            caps,
            bailout: Bailout::default(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), RegulationError> {
        if self.caps.len() != n {
            return Err(RegulationError::InvalidPolicy(format!("{} caps for {n} banks", self.caps.len())));
        }
        if let Some(c) = self.caps.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(RegulationError::InvalidPolicy(format!("cap {c} outside [0, 1]")));
        }
        let b = &self.bailout;
        if b.members.len() != b.costs.len() {
            return Err(RegulationError::InvalidPolicy("bailout members and costs differ in length".into()));
        }
        if let Some(c) = b.costs.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return Err(RegulationError::InvalidPolicy(format!("bailout cost {c} must be finite and >= 0")));
        }
        let mut seen = vec![false; n];
        for &node in &b.members {
            if node == 0 || node > n || std::mem::replace(&mut seen[node - 1], true) {
                return Err(RegulationError::InvalidPolicy(format!("bailout member {node} invalid or repeated")));
            }
        }
        Ok(())
    }

    /// Forced-solvent mask and per-position bailout cost.
    fn bailout_by_position(&self, n: usize) -> (Vec<bool>, Vec<f64>) {
        let mut forced = vec![false; n];
        let mut cost = vec![0.0; n];
        for (&node, &c) in self.bailout.members.iter().zip(&self.bailout.costs) {
            forced[node - 1] = true;
            cost[node - 1] = c;
        }
        (forced, cost)
    }

    pub fn from_json(text: &str) -> Result<Self, RegulationError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    /// True when no bank is capped below 1 and nobody is bailed out.
    pub fn is_laissez_faire(&self) -> bool {
        self.caps.iter().all(|&c| c == 1.0) && self.bailout.members.is_empty()
    }
}

/// Expected outcomes of a policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyOutcome {
    pub welfare: f64,
    pub expected_bankruptcy_costs: f64,
    pub expected_bailout_costs: f64,
    pub expected_defaults: f64,
    /// Expected number of bailout events.
    pub expected_bailouts: f64,
}

/// Portfolio rows when every bank invests up to its cap.
pub fn policy_rows(policy: &Policy, game: &GameSpec) -> Result<Vec<Vec<f64>>, RegulationError> {
    policy.validate(game.n())?;
    let k = game.scenarios.k();
    game.spaces
        .iter()
        .zip(&policy.caps)
        .enumerate()
        .map(|(b, (sp, &cap))| match sp {
            StrategySpace::RiskyShareGrid { risky, safe, .. } => {
                let mut row = vec![0.0; k];
                row[*risky] = cap;
                row[*safe] = 1.0 - cap;
                Ok(row)
            }
            StrategySpace::Fixed { row } => Ok(row.clone()),
            StrategySpace::AssetChoice { .. } => Err(RegulationError::InvalidPolicy(format!(
                "bank position {b} chooses among assets; caps need a risky share grid"
            ))),
        })
        .collect()
}

fn outcome_of_rows(
    game: &GameSpec,
    forced: &[bool],
    bail_cost: &[f64],
    rows: &[Vec<f64>],
) -> Result<PolicyOutcome, RegulationError> {
    let pb = game.problem().with_forced(forced);
    let pts = game.scenarios.points();
    let mut welfare = Vec::with_capacity(pts.len());
    let mut costs = Vec::with_capacity(pts.len());
    let mut bail = Vec::with_capacity(pts.len());
    let mut defaults = Vec::with_capacity(pts.len());
    let mut events = Vec::with_capacity(pts.len());
    for s in pts {
        let sol = pb.solve_portfolio(rows, &s.returns)?;
        let charge: f64 = sol.bailed_out.iter().map(|&b| bail_cost[b]).sum();
        let b = sol.total_cost();
        welfare.push(s.prob * (sol.investment.iter().sum::<f64>() - b - charge));
        costs.push(s.prob * b);
        bail.push(s.prob * charge);
        defaults.push(s.prob * sol.defaults.len() as f64);
        events.push(s.prob * sol.bailed_out.len() as f64);
    }
    Ok(PolicyOutcome {
        welfare: pairwise_sum(&welfare),
        expected_bankruptcy_costs: pairwise_sum(&costs),
        expected_bailout_costs: pairwise_sum(&bail),
        expected_defaults: pairwise_sum(&defaults),
        expected_bailouts: pairwise_sum(&events),
    })
}

/// Expected welfare when every bank invests up to its cap.
pub fn policy_welfare(policy: &Policy, game: &GameSpec) -> Result<PolicyOutcome, RegulationError> {
    let rows = policy_rows(policy, game)?;
    let (forced, cost) = policy.bailout_by_position(game.n());
    outcome_of_rows(game, &forced, &cost, &rows)
}

/// The profile in which each bank holds its cap, verified: within its
/// capped grid, the cap must be a best response of `E[V_i^+]` to the
/// others' caps, cleared under the policy's bailouts.
pub fn induced_profile(policy: &Policy, game: &GameSpec) -> Result<Profile, RegulationError> {
    let rows = policy_rows(policy, game)?;
    let (forced, _) = policy.bailout_by_position(game.n());
    let pb = game.problem().with_forced(&forced);
    let k = game.scenarios.k();
    let mut profile = Vec::with_capacity(game.n());
    for (b, sp) in game.spaces.iter().enumerate() {
        let cap = policy.caps[b];
        let StrategySpace::RiskyShareGrid { grid, .. } = sp else {
            profile.push(0);
            continue;
        };
        let at = grid.iter().position(|&g| (g - cap).abs() <= CAP_MATCH).ok_or_else(|| {
            RegulationError::InvalidPolicy(format!("cap {cap} of bank position {b} is not a grid point"))
        })?;
        let mut trial = rows.clone();
        let mut best = (f64::NEG_INFINITY, cap);
        let mut at_cap = 0.0;
        for (s, &g) in grid.iter().enumerate().take(at + 1) {
            trial[b] = sp.row(s, k);
            let eq = expected_own_equity(&pb, &trial, &game.scenarios, b)?;
            if s == at {
                at_cap = eq;
            }
            if eq > best.0 {
                best = (eq, g);
            }
        }
        if at_cap < best.0 - NASH_TOL {
            return Err(RegulationError::CapNotBestResponse { bank: b, cap, best: best.1 });
        }
        profile.push(at);
    }
    Ok(profile)
}

fn expected_own_equity(
    pb: &ClearingProblem<'_>,
    rows: &[Vec<f64>],
    scenarios: &ScenarioSet,
    b: usize,
) -> Result<f64, ClearingError> {
    let mut terms = Vec::with_capacity(scenarios.points().len());
    for s in scenarios.points() {
        terms.push(s.prob * pb.solve_portfolio(rows, &s.returns)?.values[b].max(0.0));
    }
    Ok(pairwise_sum(&terms))
}

/// Candidate caps for bank position `b`: 1, 0, and every
/// `1 - (D_b0 + sum of the k largest interbank claims of b)/(1+r)` that is
/// nonnegative, k = 0, 1, ... The k-th cap is the least safe holding with
/// which `b` survives k counterparty defaults when its risky asset pays 0.
/// In a core-periphery network these are `1 - (D_0 + kD)/(1+r)`.
pub fn injected_caps(network: &Network, b: usize, r: f64) -> Vec<f64> {
    let node = b + 1;
    let gross = 1.0 + r;
    let mut claims: Vec<f64> = (1..=network.n())
        .filter(|&j| j != node)
        .map(|j| network.claim(node, j))
        .filter(|&c| c > 0.0)
        .collect();
    claims.sort_by(|a, b| b.total_cmp(a));
    let net = network.liabilities(node) - network.assets(node);
    let mut caps = vec![1.0, 0.0];
    let mut need = net;
    for k in 0..=claims.len() {
        if k > 0 {
            need += claims[k - 1];
        }
        let cap = 1.0 - need / gross;
        if cap < -CAP_MATCH {
            break;
        }
        caps.push(cap.clamp(0.0, 1.0));
    }
    caps.sort_by(|a, b| b.total_cmp(a));
    caps.dedup_by(|a, b| (*a - *b).abs() <= CAP_MATCH);
    caps
}

/// Result of an exhaustive policy search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    /// Every policy within [`WELFARE_TOL`] of the best, in encoding order.
    pub optimal: Vec<Policy>,
    pub welfare: f64,
    pub evaluated: usize,
}

/// Exhaustive argmax of [`policy_welfare`] over per-bank candidate caps
/// and, when `bailout_costs` is given, every bailout subset (bank `b`
/// costing `bailout_costs[b]` per event). Policies are encoded with bank 0
/// as the most significant digit and the bailout mask last; the argmax set
/// keeps that order.
pub fn optimal_policy_search(
    game: &GameSpec,
    candidates: &[Vec<f64>],
    bailout_costs: Option<&[f64]>,
) -> Result<SearchResult, RegulationError> {
    let n = game.n();
    if candidates.len() != n || candidates.iter().any(|c| c.is_empty()) {
        return Err(RegulationError::InvalidPolicy(format!("need a nonempty candidate list for each of {n} banks")));
    }
    if let Some(c) = bailout_costs {
        if c.len() != n {
            return Err(RegulationError::InvalidPolicy(format!("{} bailout costs for {n} banks", c.len())));
        }
    }
    let masks = if bailout_costs.is_some() {
        1usize.checked_shl(n as u32).unwrap_or(usize::MAX)
    } else {
        1
    };
    let size = candidates
        .iter()
        .fold(masks, |acc, c| acc.saturating_mul(c.len()));
    if size > MAX_POLICIES {
        return Err(RegulationError::SpaceTooLarge { size, limit: MAX_POLICIES });
    }
    let decode = |mut idx: usize| {
        let mask = idx % masks;
        idx /= masks;
        let mut caps = vec![0.0; n];
        for b in (0..n).rev() {
            caps[b] = candidates[b][idx % candidates[b].len()];
            idx /= candidates[b].len();
        }
        let mut policy = Policy::with_caps(caps);
        if let Some(costs) = bailout_costs {
            for b in 0..n {
                if mask & (1 << (n - 1 - b)) != 0 {
                    policy.bailout.members.push(b + 1);
                    policy.bailout.costs.push(costs[b]);
                }
            }
        }
        policy
    };
    let welfare = (0..size)
        .into_par_iter()
        .map(|idx| Ok(policy_welfare(&decode(idx), game)?.welfare))
        .collect::<Result<Vec<f64>, RegulationError>>()?;
    let best = welfare.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let optimal = (0..size)
        .filter(|&i| welfare[i] >= best - WELFARE_TOL)
        .map(decode)
        .collect();
    Ok(SearchResult {
        optimal,
        welfare: best,
        evaluated: size,
    })
}

/// Policy shape used when comparing search output with the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyShape {
    LaissezFaire,
    /// Every bank capped at the same level below 1.
    Symmetric,
    Asymmetric,
}

pub fn policy_shape(policy: &Policy) -> PolicyShape {
    let first = policy.caps[0];
    if policy.caps.iter().any(|&c| (c - first).abs() > CAP_MATCH) {
        PolicyShape::Asymmetric
    } else if first == 1.0 && policy.bailout.members.is_empty() {
        PolicyShape::LaissezFaire
    } else {
        PolicyShape::Symmetric
    }
}

/// Intervention for a single bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankRegime {
    LaissezFaire,
    Restrict,
    Bailout,
}

impl BankRegime {
    pub fn as_str(self) -> &'static str {
        match self {
            BankRegime::LaissezFaire => "laissez_faire",
            BankRegime::Restrict => "restrict",
            BankRegime::Bailout => "bailout",
        }
    }
}

/// Cheapest of the three social losses: `nfc` if nothing is done,
/// `opportunity_cost` if the bank is restricted, `bailout_cost` if it is
/// bailed out. Intervention needs a strict improvement; ties go to
/// laissez-faire, then to restriction, and are flagged as boundary points.
pub fn classify_regime(opportunity_cost: f64, nfc: f64, bailout_cost: f64) -> (BankRegime, bool) {
    let scale = opportunity_cost.abs().max(nfc.abs()).max(bailout_cost.abs()).max(1.0);
    let eq = |a: f64, b: f64| (a - b).abs() <= 1e-12 * scale;
    let losses = [
        (BankRegime::LaissezFaire, nfc),
        (BankRegime::Restrict, opportunity_cost),
        (BankRegime::Bailout, bailout_cost),
    ];
    let mut best = losses[0];
    for &cand in &losses[1..] {
        if cand.1 < best.1 && !eq(cand.1, best.1) {
            best = cand;
        }
    }
    let ties = losses.iter().filter(|l| eq(l.1, best.1)).count();
    (best.0, ties > 1)
}

/// Inputs of [`single_bank_regime`]. `q` holds every bank's portfolio;
/// the row of `bank` is replaced by full-risky and capped portfolios.
#[derive(Debug, Clone, Copy)]
pub struct SingleBankQuery<'a> {
    pub network: &'a Network,
    pub q: &'a [Vec<f64>],
    pub bank: usize,
    pub risky: usize,
    pub safe: usize,
    pub r: f64,
    pub bailout_cost: f64,
    pub scenarios: &'a ScenarioSet,
    pub costs: BankruptcyCostSpec,
    pub selection: Selection,
}

/// Regime verdict for one bank with the quantities behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleBankVerdict {
    pub regime: BankRegime,
    pub boundary: bool,
    /// `1 - D_i^L/(1+r)`.
    pub cap: f64,
    /// `[E[p_r]/(1+r) - 1] D_i^L`.
    pub opportunity_cost: f64,
    /// NFC of moving from full-risky to the cap.
    pub nfc: f64,
    pub bailout_cost: f64,
}

/// Restrict, bail out, or leave alone a single bank in a two-asset setting.
pub fn single_bank_regime(query: &SingleBankQuery<'_>) -> Result<SingleBankVerdict, RegulationError> {
    let SingleBankQuery { network, q, bank, risky, safe, r, bailout_cost, scenarios, .. } = *query;
    if bank >= network.n() || q.len() != network.n() {
        return Err(RegulationError::InvalidParams(format!("bank position {bank} invalid")));
    }
    let k = scenarios.k();
    if risky >= k || safe >= k || risky == safe {
        return Err(RegulationError::InvalidParams(format!("risky/safe ids {risky}/{safe} invalid")));
    }
    if !(bailout_cost >= 0.0) {
        return Err(RegulationError::InvalidParams(format!("bailout cost {bailout_cost} must be >= 0")));
    }
    let dl = network.liabilities(bank + 1);
    let gross = 1.0 + r;
    if dl > gross {
        return Err(RegulationError::CapInfeasible { bank, liabilities: dl, gross });
    }
    let cap = 1.0 - dl / gross;
    let mean = scenarios.expectation(|p| p[risky]);
    let opportunity_cost = (mean / gross - 1.0) * dl;
    let mut full = vec![0.0; k];
    full[risky] = 1.0;
    let mut capped = vec![0.0; k];
    capped[risky] = cap;
    capped[safe] = 1.0 - cap;
    let mut base = q.to_vec();
    base[bank] = full;
    let nfc = nfc(&CentralityQuery {
        network,
        q: &base,
        bank,
        alt_row: &capped,
        scenarios,
        costs: query.costs,
        selection: query.selection,
        equity: None,
    })?;
    let (regime, boundary) = classify_regime(opportunity_cost, nfc, bailout_cost);
    Ok(SingleBankVerdict {
        regime,
        boundary,
        cap,
        opportunity_cost,
        nfc,
        bailout_cost,
    })
}

#[cfg(test)]
mod tests;
