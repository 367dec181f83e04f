//! Closed-form regulation on core-periphery and nested split cores.
//!
//! Peripheral banks are collapsed into node 0: each core bank owes `D_0`
//! directly to the outside, and a core bank's bankruptcy cost `chi` stands
//! for the whole failure including its periphery. Welfare is gross of the
//! `D_0` pass-through, matching [`policy_welfare`].

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::{injected_caps, policy_welfare, Policy, RegulationError, WELFARE_TOL};
use crate::clearing::Selection;
use crate::game::{GameSpec, StrategySpace};
use crate::network::{
    build_core_periphery, build_nested_split, BankruptcyCostSpec, CorePeripherySpec, NestedSplit, NestedSplitSpec,
};
use crate::returns::{MCorrelationSpec, ScenarioSet};

// Slack for the floors defining k^R and k^r, so that exact multiples such
// as R = D_0 + 2D are not lost to rounding.
const FLOOR_SLACK: f64 = 1e-9;
/// Share grid resolution used by [`cp_game`]; caps are injected as kinks.
pub const CP_GRID_POINTS: usize = 11;

/// Parameters of the symmetric core-periphery model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CPParams {
    pub n_c: usize,
    pub n_p: usize,
    pub d: f64,
    pub d0: f64,
    pub theta: f64,
    pub r_high: f64,
    pub r: f64,
    pub chi: f64,
    pub m: usize,
}

fn floor_ratio(num: f64, den: f64) -> usize {
    (num / den + FLOOR_SLACK).floor().max(0.0) as usize
}

impl CPParams {
    /// Counterparty defaults a core bank survives with a high return.
    pub fn k_risky(&self) -> usize {
        floor_ratio(self.r_high - self.d0, self.d)
    }

    /// Counterparty defaults a core bank survives fully in the safe asset.
    pub fn k_safe(&self) -> usize {
        floor_ratio(1.0 + self.r - self.d0, self.d)
    }

    pub fn gross(&self) -> f64 {
        1.0 + self.r
    }

    /// Cap with which a bank survives `k` counterparty defaults.
    pub fn cap_surviving(&self, k: usize) -> f64 {
        (1.0 - (self.d0 + k as f64 * self.d) / self.gross()).clamp(0.0, 1.0)
    }

    pub fn validate(&self) -> Result<(), RegulationError> {
        let bad = |m: String| Err(RegulationError::InvalidParams(m));
        let p = self;
        if p.n_c < 2 {
            return bad(format!("need n_c >= 2, got {}", p.n_c));
        }
        if p.n_p % p.n_c != 0 {
            return bad(format!("n_p = {} is not a multiple of n_c = {}", p.n_p, p.n_c));
        }
        if p.m == 0 || p.m > p.n_c {
            return bad(format!("need 1 <= m <= n_c, got m = {}", p.m));
        }
        if !(p.d > 0.0 && p.d0 > 0.0 && p.d.is_finite() && p.d0.is_finite()) {
            return bad(format!("need D > 0 and D_0 > 0, got D = {}, D_0 = {}", p.d, p.d0));
        }
        if !(p.theta > 0.0 && p.theta < 1.0) {
            return bad(format!("theta {} outside (0, 1)", p.theta));
        }
        if p.theta < 1.0 - p.m as f64 / p.n_c as f64 - 1e-12 {
            return bad(format!("theta {} below 1 - m/n_c", p.theta));
        }
        if !(p.r > -1.0) || !(p.theta * p.r_high > p.gross()) {
            return bad(format!("need theta*R > 1+r, got {} vs {}", p.theta * p.r_high, p.gross()));
        }
        if p.d0 > p.gross() {
            return bad(format!("D_0 = {} exceeds 1+r = {}", p.d0, p.gross()));
        }
        if !(p.r_high < p.d0 + (p.n_c - 1) as f64 * p.d) {
            return bad(format!("need R < D_0 + (n_c-1)D, got R = {}", p.r_high));
        }
        let zero_recovery = p.r_high + (p.n_c as f64 - 2.0 - p.k_risky() as f64) * p.d;
        if !(p.chi >= zero_recovery) || !p.chi.is_finite() {
            return bad(format!("need chi >= R + (n_c-2-k^R)D = {zero_recovery}, got {}", p.chi));
        }
        Ok(())
    }

    /// Probability that some m-subset of proprietary assets fails.
    pub fn failure_mass(&self) -> f64 {
        self.n_c as f64 * (1.0 - self.theta) / self.m as f64
    }
}

/// Thresholds of the core-periphery model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CPThresholds {
    /// k^R.
    pub k_risky: usize,
    /// k^r.
    pub k_safe: usize,
    /// Symmetric-cap threshold when m <= k^R: regulate iff theta is below.
    pub theta_symmetric: f64,
    /// theta-bar: when m > k^R, the symmetric cap beats laissez-faire iff
    /// theta is below.
    pub theta_high: f64,
    /// theta-underbar: the asymmetric construction beats the symmetric cap
    /// iff theta is above. `None` when that construction cannot win.
    pub theta_low: Option<f64>,
    pub asym_feasible: bool,
}

// n_c D_0 - (n_c - k^r)(D_0 + k^r D): total slack freed by letting k^r
// banks take risk, in units of the safe holding.
fn asym_slack(p: &CPParams, k: usize) -> f64 {
    p.n_c as f64 * p.d0 - (p.n_c - k) as f64 * (p.d0 + k as f64 * p.d)
}

pub fn cp_thresholds(params: &CPParams) -> Result<CPThresholds, RegulationError> {
    params.validate()?;
    let p = params;
    let rho = p.r_high / p.gross();
    let kr = p.k_safe().min(p.n_c);
    let a = p.n_c as f64 / p.m as f64;
    let y = asym_slack(p, kr);
    let asym_feasible = kr >= 1 && y > 0.0;
    let theta_low = asym_feasible.then(|| (y + kr as f64 * p.chi) / (y * rho + kr as f64 * p.chi));
    Ok(CPThresholds {
        k_risky: p.k_risky(),
        k_safe: kr,
        theta_symmetric: (p.chi + p.d0) / (p.chi + rho * p.d0),
        theta_high: (a * p.chi + p.d0) / (a * p.chi + rho * p.d0),
        theta_low,
        asym_feasible,
    })
}

/// Optimal regime within the cap family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    LaissezFaire,
    SymmetricCap,
    /// `free` banks unregulated, the rest capped so they survive `free`
    /// counterparty defaults.
    AsymmetricCap { free: usize },
}

impl Regime {
    pub fn label(&self) -> String {
        match self {
            Regime::LaissezFaire => "laissez_faire".into(),
            Regime::SymmetricCap => "symmetric_cap".into(),
            Regime::AsymmetricCap { free } => format!("asymmetric_cap_{free}"),
        }
    }
}

/// The optimal cap assignment with the closed-form welfare of the
/// textbook candidates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeVerdict {
    pub regime: Regime,
    /// Another cap composition ties with the optimum; the least
    /// interventionist one was chosen.
    pub boundary: bool,
    pub thresholds: CPThresholds,
    /// Optimal caps, most permissive first (freed banks lowest indexed).
    pub policy: Policy,
    pub welfare: f64,
    pub welfare_laissez_faire: f64,
    pub welfare_symmetric: f64,
    /// Welfare of `k^r` free banks with the rest capped at
    /// `1 - (D_0 + k^r D)/(1+r)`; `None` unless `m > k^R` and `k^r >= 1`.
    pub welfare_construction: Option<f64>,
}

/// Closed-form welfare of a regime (all core banks, gross of `D_0`).
pub fn cp_regime_welfare(params: &CPParams, regime: Regime) -> f64 {
    let p = params;
    let nc = p.n_c as f64;
    let tr = p.theta * p.r_high;
    let excess = (tr - p.gross()) / p.gross();
    match regime {
        Regime::LaissezFaire => nc * tr - cp_laissez_faire_defaults(p) * p.chi,
        Regime::SymmetricCap => nc * (tr - p.d0 * excess),
        Regime::AsymmetricCap { free } => {
            let k = free as f64;
            k * (tr - (1.0 - p.theta) * p.chi) + (nc - k) * (tr - (p.d0 + k * p.d) * excess)
        }
    }
}

/// Expected core defaults under laissez-faire.
pub fn cp_laissez_faire_defaults(params: &CPParams) -> f64 {
    let nc = params.n_c as f64;
    let base = (1.0 - params.theta) * nc;
    if params.m > params.k_risky() {
        nc / params.m as f64 * base
    } else {
        base
    }
}

/// Expected outcome of one cap assignment under zero recovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapAssignmentValue {
    pub welfare: f64,
    pub expected_defaults: f64,
}

/// Closed-form evaluation of a cap assignment on the complete core.
///
/// A bank with cap `c` and realized return `p` owns `e = cp + (1-c)(1+r)`
/// and receives nothing from defaulters, so it survives `x` defaulted
/// counterparties iff `e + (n_c - 1 - x)D >= (n_c - 1)D + D_0`, i.e.
/// `x <= (e - D_0)/D`. The default set is the least set closed under these
/// thresholds, which is the greatest clearing equilibrium when defaulters
/// repay nothing.
pub fn cp_cap_assignment_value(params: &CPParams, caps: &[f64]) -> CapAssignmentValue {
    let p = params;
    let n = p.n_c;
    let tr = p.theta * p.r_high;
    let invest: f64 = caps.iter().map(|&c| c * tr + (1.0 - c) * p.gross()).sum();
    let threshold = |c: f64, ret: f64| ((c * ret + (1.0 - c) * p.gross() - p.d0) / p.d + FLOOR_SLACK).floor() as i64;
    let cascade = |t: &[i64]| {
        let mut out = vec![false; n];
        let mut count = 0i64;
        loop {
            let mut grew = false;
            for b in 0..n {
                if !out[b] && count > t[b] {
                    out[b] = true;
                    count += 1;
                    grew = true;
                }
            }
            if !grew {
                return count;
            }
        }
    };
    // count > t covers t < 0 on the first pass, since count starts at 0
    let high: Vec<i64> = caps.iter().map(|&c| threshold(c, p.r_high)).collect();
    let mut defaults = (1.0 - p.failure_mass()) * cascade(&high) as f64;
    let subsets: Vec<Vec<usize>> = (0..n).combinations(p.m).collect();
    let each = p.failure_mass() / subsets.len() as f64;
    for fail in &subsets {
        let mut t = high.clone();
        for &b in fail {
            t[b] = threshold(caps[b], 0.0);
        }
        defaults += each * cascade(&t) as f64;
    }
    CapAssignmentValue {
        welfare: invest - defaults * p.chi,
        expected_defaults: defaults,
    }
}

/// Candidate caps: 1, `1 - (D_0 + kD)/(1+r)` for `k = 0..=k^r`, and 0.
pub fn cp_candidate_caps(params: &CPParams) -> Vec<f64> {
    let mut caps = vec![1.0];
    caps.extend((0..=params.k_safe()).map(|k| params.cap_surviving(k)));
    caps.push(0.0);
    caps.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    caps
}

fn shape_rank(caps: &[f64]) -> (Regime, u8) {
    let free = caps.iter().filter(|&&c| c == 1.0).count();
    if free == caps.len() {
        (Regime::LaissezFaire, 0)
    } else if caps.iter().all(|&c| c == caps[0]) {
        (Regime::SymmetricCap, 1)
    } else {
        (Regime::AsymmetricCap { free }, 2)
    }
}

/// Welfare-optimal cap assignment for the core-periphery model.
///
/// Every multiset of candidate caps is evaluated with
/// [`cp_cap_assignment_value`]; by symmetry of the complete core and the
/// m-correlated returns, the multiset determines welfare. The published
/// threshold statements hold as implications of this optimum: with
/// `m <= k^R` it regulates iff `theta < theta_symmetric`; with `m > k^R`
/// it regulates when `theta < theta_high`, asymmetrically when also
/// `theta > theta_low`.
pub fn cp_optimal_regime(params: &CPParams) -> Result<RegimeVerdict, RegulationError> {
    let thresholds = cp_thresholds(params)?;
    let cands = cp_candidate_caps(params);
    let mut best: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut top = f64::NEG_INFINITY;
    for combo in cands.iter().copied().combinations_with_replacement(params.n_c) {
        let w = cp_cap_assignment_value(params, &combo).welfare;
        top = top.max(w);
        best.push((combo, w));
    }
    let tol = super::WELFARE_TOL;
    let mut optimal: Vec<&(Vec<f64>, f64)> = best.iter().filter(|(_, w)| *w >= top - tol).collect();
    // least interventionist first: shape, then most permissive caps
    optimal.sort_by(|a, b| {
        shape_rank(&a.0)
            .1
            .cmp(&shape_rank(&b.0).1)
            .then_with(|| b.0.iter().sum::<f64>().total_cmp(&a.0.iter().sum::<f64>()))
    });
    let (caps, welfare) = optimal[0].clone();
    let regime = shape_rank(&caps).0;
    let construction = (params.m > thresholds.k_risky && thresholds.k_safe >= 1)
        .then(|| cp_regime_welfare(params, Regime::AsymmetricCap { free: thresholds.k_safe }));
    Ok(RegimeVerdict {
        regime,
        boundary: optimal.iter().any(|o| shape_rank(&o.0).0 != regime),
        thresholds,
        policy: Policy::with_caps(caps),
        welfare,
        welfare_laissez_faire: cp_regime_welfare(params, Regime::LaissezFaire),
        welfare_symmetric: cp_regime_welfare(params, Regime::SymmetricCap),
        welfare_construction: construction,
    })
}

/// Caps implementing a regime; freed banks are the lowest indexed.
pub fn cp_policy(params: &CPParams, regime: Regime) -> Policy {
    let n = params.n_c;
    match regime {
        Regime::LaissezFaire => Policy::laissez_faire(n),
        Regime::SymmetricCap => Policy::with_caps(vec![params.cap_surviving(0); n]),
        Regime::AsymmetricCap { free } => {
            let cap = params.cap_surviving(free);
            Policy::with_caps((0..n).map(|b| if b < free { 1.0 } else { cap }).collect())
        }
    }
}

/// Policy that puts all but `free` banks fully in the safe asset.
pub fn cp_safe_core_policy(params: &CPParams, free: usize) -> Policy {
    Policy::with_caps((0..params.n_c).map(|b| if b < free { 1.0 } else { 0.0 }).collect())
}

/// Closed-form welfare of [`cp_safe_core_policy`] with `k^r` free banks.
pub fn cp_safe_core_welfare(params: &CPParams) -> f64 {
    let k = params.k_safe() as f64;
    (params.n_c as f64 - k) * params.gross() + k * (params.theta * params.r_high - (1.0 - params.theta) * params.chi)
}

fn m_scenarios(params: &CPParams, n_c: usize) -> Result<ScenarioSet, RegulationError> {
    Ok(ScenarioSet::m_correlated(&MCorrelationSpec {
        n_c,
        theta: params.theta,
        m: params.m,
        r_high: params.r_high,
        r: params.r,
    })?)
}

fn grid_game(
    network: crate::network::Network,
    scenarios: ScenarioSet,
    params: &CPParams,
) -> Result<GameSpec, RegulationError> {
    let n = network.n();
    let spaces = (0..n)
        .map(|b| StrategySpace::risky_share_grid(CP_GRID_POINTS, b, n, &injected_caps(&network, b, params.r)))
        .collect();
    let costs = BankruptcyCostSpec::new(0.0, params.chi)?;
    Ok(GameSpec::new(network, scenarios, costs, Selection::Greatest, spaces)?)
}

/// The core-periphery game: a complete core, m-correlated proprietary
/// assets, zero proportional costs, and a share grid per bank with the
/// injected caps as kinks.
pub fn cp_game(params: &CPParams) -> Result<GameSpec, RegulationError> {
    params.validate()?;
    let net = build_core_periphery(&CorePeripherySpec {
        n_c: params.n_c,
        n_p: 0,
        d: params.d,
        d0: params.d0,
    })?;
    grid_game(net, m_scenarios(params, params.n_c)?, params)
}

/// Per-bank candidate caps of a game built by [`cp_game`] or [`ns_game`].
pub fn game_candidate_caps(game: &GameSpec, r: f64) -> Vec<Vec<f64>> {
    (0..game.n()).map(|b| injected_caps(&game.network, b, r)).collect()
}

/// A nested split core with m-correlated assets. `params.n_c` must equal
/// the total core size; `params.d`, `params.d0` override the spec's.
pub fn ns_game(spec: &NestedSplitSpec, params: &CPParams) -> Result<(GameSpec, NestedSplit), RegulationError> {
    let spec = NestedSplitSpec {
        tiers: spec.tiers.clone(),
        d: params.d,
        d0: params.d0,
        n_p: 0,
    };
    let split = build_nested_split(&spec)?;
    if split.network.n() != params.n_c {
        return Err(RegulationError::InvalidParams(format!(
            "core has {} banks but n_c = {}",
            split.network.n(),
            params.n_c
        )));
    }
    let game = grid_game(split.network.clone(), m_scenarios(params, params.n_c)?, params)?;
    Ok((game, split))
}

// Checks that hold on any core: the model constraints that do not refer to
// a complete core.
fn validate_ns(params: &CPParams) -> Result<(), RegulationError> {
    let p = params;
    if p.m == 0 || p.m > p.n_c || !(p.theta > 0.0 && p.theta < 1.0) {
        return Err(RegulationError::InvalidParams("need 1 <= m <= n_c and theta in (0, 1)".into()));
    }
    if p.theta < 1.0 - p.m as f64 / p.n_c as f64 - 1e-12 || !(p.theta * p.r_high > p.gross()) {
        return Err(RegulationError::InvalidParams("need theta >= 1 - m/n_c and theta*R > 1+r".into()));
    }
    if !(p.d > 0.0 && p.d0 > 0.0 && p.d0 <= p.gross() && p.chi >= 0.0) {
        return Err(RegulationError::InvalidParams("need D, D_0 > 0, D_0 <= 1+r, chi >= 0".into()));
    }
    Ok(())
}

/// Verdict on the hierarchical policy for a nested split core.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NsVerdict {
    pub threshold: f64,
    /// The threshold inequality, in the linear form
    /// `theta * denominator > numerator` (safe when the denominator is <= 0).
    pub threshold_holds: bool,
    pub hierarchical: Policy,
    pub hierarchical_welfare: f64,
    pub hierarchical_formula: f64,
    pub best_symmetric_cap: f64,
    pub best_symmetric_welfare: f64,
    /// Engine confirmation that the hierarchical policy strictly beats
    /// every nontrivial symmetric cap; `None` when the threshold does not
    /// hold.
    pub certified: Option<bool>,
}

/// Clique fully safe; the lowest-indexed `k^r` independent banks free;
/// other independent banks capped at `1 - D_0/(1+r)`.
pub fn hierarchical_policy(split: &NestedSplit, params: &CPParams) -> Policy {
    let n = split.network.n();
    let kr = params.k_safe();
    let mut caps = vec![0.0; n];
    for (i, &b) in split.independent.iter().enumerate() {
        caps[b] = if i < kr { 1.0 } else { params.cap_surviving(0) };
    }
    Policy::with_caps(caps)
}

pub fn ns_regime_check(spec: &NestedSplitSpec, params: &CPParams) -> Result<NsVerdict, RegulationError> {
    validate_ns(params)?;
    let (game, split) = ns_game(spec, params)?;
    let kr = params.k_safe();
    let kbig = params.k_risky();
    if params.m <= kbig {
        return Err(RegulationError::PreconditionFailed(format!("need m > k^R, got m = {}, k^R = {kbig}", params.m)));
    }
    if kr == 0 || kr > split.independent.len() {
        return Err(RegulationError::PreconditionFailed(format!(
            "need 1 <= k^r <= N^ind, got k^r = {kr}, N^ind = {}",
            split.independent.len()
        )));
    }
    let p = params;
    let n_cl = split.clique.len() as f64;
    let n_ind = split.independent.len() as f64;
    let k = kr as f64;
    let rho = p.r_high / p.gross();
    let shift = (p.gross() - p.d0) / k * n_cl;
    let num = p.chi + p.d0 - shift;
    let den = p.chi + rho * (p.d0 - shift);
    let threshold_holds = p.theta * den > num;
    let tr = p.theta * p.r_high;
    let hierarchical_formula = n_cl * p.gross()
        + (n_ind - k) * (tr * (p.gross() - p.d0) / p.gross() + p.d0)
        + k * (tr - (1.0 - p.theta) * p.chi);
    let hierarchical = hierarchical_policy(&split, p);
    let hierarchical_welfare = policy_welfare(&hierarchical, &game)?.welfare;
    // nontrivial symmetric caps only; laissez-faire is not a regulation
    let mut sym_caps: Vec<f64> = vec![0.0];
    sym_caps.extend((0..=kr).map(|j| p.cap_surviving(j)));
    sym_caps.sort_by(|a, b| b.total_cmp(a));
    sym_caps.dedup();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &c in &sym_caps {
        let w = policy_welfare(&Policy::with_caps(vec![c; split.network.n()]), &game)?.welfare;
        if w > best.0 {
            best = (w, c);
        }
    }
    Ok(NsVerdict {
        threshold: num / den,
        threshold_holds,
        hierarchical,
        hierarchical_welfare,
        hierarchical_formula,
        best_symmetric_cap: best.1,
        best_symmetric_welfare: best.0,
        certified: threshold_holds.then_some(hierarchical_welfare > best.0 + WELFARE_TOL),
    })
}

/// Exact count, over every m-subset of failing proprietary assets, of the
/// subsets in which some bank of `group` defaults under `policy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CascadeCount {
    pub subsets: usize,
    pub group_defaults: usize,
}

pub fn cascade_count(
    game: &GameSpec,
    params: &CPParams,
    policy: &Policy,
    group: &[usize],
) -> Result<CascadeCount, RegulationError> {
    let rows = super::policy_rows(policy, game)?;
    let n = game.n();
    let pb = game.problem();
    let mut count = CascadeCount { subsets: 0, group_defaults: 0 };
    for fail in (0..n).combinations(params.m) {
        let mut p = vec![params.r_high; n];
        for &b in &fail {
            p[b] = 0.0;
        }
        p.push(params.gross());
        let sol = pb.solve_portfolio(&rows, &p)?;
        count.subsets += 1;
        if group.iter().any(|&b| sol.is_default(b)) {
            count.group_defaults += 1;
        }
    }
    Ok(count)
}
