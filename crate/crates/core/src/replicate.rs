//! Named reproduction targets.
//!
//! Each target recomputes a known result from scratch, compares it with
//! the value it should have and returns a report of checks plus a CSV
//! table. The acceptance test and the `replicate` subcommand share these.

use std::collections::VecDeque;
use std::path::Path;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::centrality::{nfc_ranking, CounterfactualRule};
use crate::clearing::{conservation_residual, ClearingError, ClearingProblem, Selection};
use crate::equity::{clear_debt_equity, countervailing_example, countervailing_network, EquityError, EquityMatrix};
use crate::game::{
    check_dominance_full_risky, enumerate_nash, social_optimum, GameError, GameSpec, StrategySpace, NASH_TOL,
};
use crate::network::{
    build_directed_wheel, build_star, BankruptcyCostSpec, NestedSplitSpec, Network, NetworkError, TierSpec,
};
use crate::regulation::*;
use crate::returns::{MCorrelationSpec, ReturnsError, Scenario, ScenarioSet};

pub const TARGETS: [&str; 11] = [
    "motivating-2bank",
    "claim1",
    "cp-regimes",
    "cp-asym-example",
    "ns-example",
    "star-nfc",
    "wheel-nfc",
    "sweep-m",
    "regime-map",
    "equity-countervail",
    "conservation",
];

#[derive(Debug, Error)]
pub enum ReplicateError {
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Returns(#[from] ReturnsError),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
    #[error(transparent)]
    Equity(#[from] EquityError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Regulation(#[from] RegulationError),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub computed: String,
    pub expected: String,
    pub pass: bool,
}

impl Check {
    fn new(label: impl Into<String>, computed: impl Into<String>, expected: impl Into<String>, pass: bool) -> Self {
        Check { label: label.into(), computed: computed.into(), expected: expected.into(), pass }
    }

    fn close(label: impl Into<String>, computed: f64, expected: f64, rel: f64) -> Self {
        let pass = (computed - expected).abs() <= rel * computed.abs().max(expected.abs()).max(1.0);
        Check::new(label, fmt_f64(computed), fmt_f64(expected), pass)
    }

    fn flag(label: impl Into<String>, ok: bool) -> Self {
        Check::new(label, ok.to_string(), "true", ok)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ReplicateError> {
        let io = |e: csv::Error| ReplicateError::Io { path: path.display().to_string(), message: e.to_string() };
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| ReplicateError::Io { path: path.display().to_string(), message: e.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub target: String,
    /// One line describing what is reproduced.
    pub title: String,
    pub checks: Vec<Check>,
    pub table: Table,
}

impl Report {
    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    /// Plain-text report: title, then one line per check.
    pub fn render(&self) -> String {
        let mut s = format!("# {}: {}\n", self.target, self.title);
        for c in &self.checks {
            s.push_str(&format!(
                "{}: {} (computed {}, expected {})\n",
                c.label,
                if c.pass { "PASS" } else { "FAIL" },
                c.computed,
                c.expected
            ));
        }
        s.push_str(&format!("overall: {}\n", if self.pass() { "PASS" } else { "FAIL" }));
        s
    }

    pub fn checks_table(&self) -> Table {
        let mut t = Table::new(&["check", "computed", "expected", "pass"]);
        for c in &self.checks {
            t.push(vec![c.label.clone(), c.computed.clone(), c.expected.clone(), c.pass.to_string()]);
        }
        t
    }
}

pub fn run(target: &str) -> Result<Report, ReplicateError> {
    match target {
        "motivating-2bank" => motivating_two_bank(),
        "claim1" => three_asset_matching(),
        "cp-regimes" => cp_regimes(),
        "cp-asym-example" => cp_asym_example(),
        "ns-example" => ns_example(),
        "star-nfc" => star_nfc(),
        "wheel-nfc" => wheel_nfc(),
        "sweep-m" => sweep_m(),
        "regime-map" => regime_map(),
        "equity-countervail" => equity_countervail(),
        "conservation" => conservation(42),
        other => Err(ReplicateError::UnknownTarget(other.to_string())),
    }
}

fn grid_index(space: &StrategySpace, x: f64) -> Option<usize> {
    match space {
        StrategySpace::RiskyShareGrid { grid, .. } => grid.iter().position(|&g| (g - x).abs() <= 1e-12),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// two-bank chain

/// Bank 2 owes `2D` to bank 1, which owes `D` to node 0. Both banks split
/// their unit between the risky asset (index 0) and the safe asset.
pub fn motivating_game(d: f64, r: f64, theta: f64, r_high: f64, chi: f64, points: usize) -> Result<GameSpec, ReplicateError> {
    let net = Network::build_general(&[vec![0.0, d, 0.0], vec![0.0, 0.0, 2.0 * d], vec![0.0; 3]])?;
    let sc = ScenarioSet::independent_two_point(1, theta, r_high, 0.0)?.with_safe_asset(1.0 + r);
    let kinks = [1.0 - d / (1.0 + r), 1.0 - 2.0 * d / (1.0 + r)];
    let grid = StrategySpace::risky_share_grid(points, 0, 1, &kinks);
    Ok(GameSpec::new(net, sc, BankruptcyCostSpec::new(0.0, chi)?, Selection::Greatest, vec![grid.clone(), grid])?)
}

fn motivating_two_bank() -> Result<Report, ReplicateError> {
    let (d, r, theta, rh, chi) = (0.3, 0.05, 0.8, 1.5, 0.5);
    let mut checks = Vec::new();
    let premium = 2.0 * d / (1.0 + r) * (theta * rh - (1.0 + r));
    let lhs = 2.0 * (1.0 - theta) * chi;
    checks.push(Check::new("social inequality 2(1-θ)χ > (2D/(1+r))(θR-(1+r))", fmt_f64(lhs), format!("> {}", fmt_f64(premium)), lhs > premium));

    let g = motivating_game(d, r, theta, rh, chi, 101)?;
    let full = grid_index(&g.spaces[0], 1.0).expect("grid holds 1");
    let cap = grid_index(&g.spaces[1], 1.0 - 2.0 * d / (1.0 + r)).expect("grid holds the cap");
    let nash = enumerate_nash(&g, NASH_TOL)?;
    checks.push(Check::new("unique grid Nash is full risk for both", format!("{nash:?}"), format!("[[{full}, {full}]]"), nash == vec![vec![full, full]]));
    let opt = social_optimum(&g, NASH_TOL)?;
    let nash_w = g.evaluate(&[full, full])?.welfare;
    checks.push(Check::new("optimum caps bank 2 at 1-2D/(1+r)", format!("{:?}", opt.profiles), format!("[[{full}, {cap}]]"), opt.profiles == vec![vec![full, cap]]));
    checks.push(Check::new("welfare(optimum) - welfare(Nash) > 0", fmt_f64(opt.welfare - nash_w), "> 0", opt.welfare > nash_w));

    // Both comparisons are linear in chi; find each crossing from two points.
    let social_gap = |c: f64| -> Result<f64, ReplicateError> {
        let g = motivating_game(d, r, theta, rh, c, 3)?;
        Ok(g.evaluate(&[full_of(&g), cap_of(&g, d, r)])?.welfare - g.evaluate(&[full_of(&g), full_of(&g)])?.welfare)
    };
    let private_gap = |c: f64| -> Result<f64, ReplicateError> {
        let g = motivating_game(d, r, theta, rh, c, 3)?;
        let signed = |p: &[usize]| -> Result<f64, ReplicateError> {
            let sols = g.solutions(p)?;
            Ok(g.scenarios.points().iter().zip(&sols).map(|(s, sol)| s.prob * sol.values[1]).sum())
        };
        Ok(signed(&[full_of(&g), cap_of(&g, d, r)])? - signed(&[full_of(&g), full_of(&g)])?)
    };
    let root = |f: &dyn Fn(f64) -> Result<f64, ReplicateError>| -> Result<f64, ReplicateError> {
        let (f0, f1) = (f(0.0)?, f(1.0)?);
        Ok(-f0 / (f1 - f0))
    };
    let chi_social = root(&social_gap)?;
    let chi_private = root(&private_gap)?;
    let ex = (theta * rh - (1.0 + r)) * 2.0 * d / (1.0 + r) / (1.0 - theta);
    checks.push(Check::close("social indifference χ", chi_social, ex / 2.0, 1e-12));
    checks.push(Check::close("bank-2 indifference χ (own cost and liability internalized)", chi_private, ex, 1e-12));
    checks.push(Check::close("wedge factor between the two", chi_private / chi_social, 2.0, 1e-12));

    let mut table = Table::new(&["q1", "q2", "welfare", "equity_1", "equity_2", "expected_defaults"]);
    for p in [[full, full], [full, cap]] {
        let e = g.evaluate(&p)?;
        let StrategySpace::RiskyShareGrid { grid, .. } = &g.spaces[0] else { unreachable!() };
        table.push(vec![
            fmt_f64(grid[p[0]]),
            fmt_f64(grid[p[1]]),
            fmt_f64(e.welfare),
            fmt_f64(e.equity[0]),
            fmt_f64(e.equity[1]),
            fmt_f64(e.expected_defaults),
        ]);
    }
    Ok(Report {
        target: "motivating-2bank".into(),
        title: "two-bank chain: full-risk equilibrium versus capped social optimum, and the factor-two wedge".into(),
        checks,
        table,
    })
}

fn full_of(g: &GameSpec) -> usize {
    grid_index(&g.spaces[0], 1.0).expect("grid holds 1")
}

fn cap_of(g: &GameSpec, d: f64, r: f64) -> usize {
    grid_index(&g.spaces[1], 1.0 - 2.0 * d / (1.0 + r)).expect("grid holds the cap")
}

// ---------------------------------------------------------------------------
// three-bank correlation example

/// Bank 1 owes `D` to node 0; banks 2 and 3 each owe `D` to bank 1 and
/// `D/2` to each other. Bank 1 holds asset 0; banks 2 and 3 pick one of
/// three independent risky assets.
pub fn three_asset_game(rs: [f64; 3], theta: f64, chi: f64) -> Result<GameSpec, ReplicateError> {
    let d = 1.0;
    let net = Network::build_general(&[
        vec![0.0, d, 0.0, 0.0],
        vec![0.0, 0.0, d, d],
        vec![0.0, 0.0, 0.0, 0.5 * d],
        vec![0.0, 0.0, 0.5 * d, 0.0],
    ])?;
    let mut sc = Vec::new();
    for mask in 0..8usize {
        let high: Vec<bool> = (0..3).map(|k| mask >> (2 - k) & 1 == 0).collect();
        sc.push(Scenario {
            prob: high.iter().map(|&h| if h { theta } else { 1.0 - theta }).product(),
            returns: (0..3).map(|k| if high[k] { rs[k] } else { 0.0 }).collect(),
        });
    }
    let choice = StrategySpace::AssetChoice { assets: vec![0, 1, 2] };
    Ok(GameSpec::new(
        net,
        ScenarioSet::new(sc)?,
        BankruptcyCostSpec::new(0.0, chi)?,
        Selection::Greatest,
        vec![StrategySpace::Fixed { row: vec![1.0, 0.0, 0.0] }, choice.clone(), choice],
    )?)
}

fn three_asset_matching() -> Result<Report, ReplicateError> {
    let (theta, chi) = (0.6, 0.4);
    let mut checks = Vec::new();
    let mut table = Table::new(&["returns", "kind", "bank2_asset", "bank3_asset", "welfare"]);
    for rs in [[2.0, 2.0, 2.0], [2.0, 2.01, 1.995]] {
        let g = three_asset_game(rs, theta, chi)?;
        let nash = enumerate_nash(&g, NASH_TOL)?;
        let same = !nash.is_empty() && nash.iter().all(|p| p[1] == p[2]);
        checks.push(Check::new(
            format!("all Nash have banks 2,3 on same asset (R = {rs:?})"),
            format!("{} equilibria", nash.len()),
            "nonempty, all matched",
            same,
        ));
        let opt = social_optimum(&g, NASH_TOL)?;
        let distinct = !opt.profiles.is_empty() && opt.profiles.iter().all(|p| p.iter().all_unique());
        checks.push(Check::new(format!("social optimum diversifies (R = {rs:?})"), format!("{:?}", opt.profiles), "all assets distinct", distinct));
        let tag = format!("{rs:?}");
        for p in &nash {
            table.push(vec![tag.clone(), "nash".into(), p[1].to_string(), p[2].to_string(), fmt_f64(g.evaluate(p)?.welfare)]);
        }
        for p in &opt.profiles {
            table.push(vec![tag.clone(), "optimum".into(), p[1].to_string(), p[2].to_string(), fmt_f64(opt.welfare)]);
        }
        if rs[2] < rs[1] {
            checks.push(Check::flag("both on the lowest-return asset is an equilibrium", nash.contains(&vec![0, 2, 2])));
        }
    }
    Ok(Report {
        target: "claim1".into(),
        title: "three-bank correlation example: equilibria correlate, the optimum diversifies".into(),
        checks,
        table,
    })
}

// ---------------------------------------------------------------------------
// core-periphery regimes

/// Base instance of the regime cross-check: k^R = k^r = 1, m = 2.
pub fn cp_regime_base(n_c: usize) -> CPParams {
    CPParams { n_c, n_p: 0, d: 0.1, d0: 1.0, theta: 0.99, r_high: 1.19, r: 0.15, chi: 3.0, m: 2 }
}

/// One grid point of the regime cross-check.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeGridPoint {
    pub params: CPParams,
    pub verdict: RegimeVerdict,
    pub search_welfare: f64,
    /// Shapes of the exhaustive argmax set.
    pub search_shapes: Vec<PolicyShape>,
    pub in_asym_region: bool,
}

pub fn cp_regime_grid(n_c: usize, steps: usize) -> Result<Vec<RegimeGridPoint>, ReplicateError> {
    let base = cp_regime_base(n_c);
    let floor = base.r_high + (n_c as f64 - 2.0 - base.k_risky() as f64) * base.d;
    let at = |lo: f64, hi: f64, i: usize| if steps <= 1 { lo } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 };
    let mut out = Vec::with_capacity(steps * steps);
    for it in 0..steps {
        for ic in 0..steps {
            let p = CPParams { theta: at(0.98, 0.998, it), chi: at(floor, floor + 2.0, ic), ..base };
            let verdict = cp_optimal_regime(&p)?;
            let game = cp_game(&p)?;
            let search = optimal_policy_search(&game, &game_candidate_caps(&game, p.r), None)?;
            let t = &verdict.thresholds;
            let in_asym_region = t.asym_feasible
                && t.theta_low.is_some_and(|low| p.theta > low)
                && p.theta < t.theta_high;
            let mut search_shapes: Vec<PolicyShape> = search.optimal.iter().map(policy_shape).collect();
            search_shapes.sort_by_key(|s| *s as u8);
            search_shapes.dedup();
            out.push(RegimeGridPoint { params: p, verdict, search_welfare: search.welfare, search_shapes, in_asym_region });
        }
    }
    Ok(out)
}

fn regime_shape(r: Regime) -> PolicyShape {
    match r {
        Regime::LaissezFaire => PolicyShape::LaissezFaire,
        Regime::SymmetricCap => PolicyShape::Symmetric,
        Regime::AsymmetricCap { .. } => PolicyShape::Asymmetric,
    }
}

fn cp_regimes() -> Result<Report, ReplicateError> {
    let mut checks = Vec::new();
    let mut table = Table::new(&[
        "n_c", "theta", "chi", "regime", "boundary", "welfare", "search_welfare", "search_shapes", "in_asym_region",
    ]);
    for n_c in 3..=5 {
        let pts = cp_regime_grid(n_c, 20)?;
        let gap = pts.iter().map(|g| (g.verdict.welfare - g.search_welfare).abs()).fold(0.0, f64::max);
        checks.push(Check::new(format!("n_c={n_c}: max welfare gap"), fmt_f64(gap), "< 1e-9", gap < 1e-9));
        let agree = pts.iter().all(|g| {
            let shape = regime_shape(g.verdict.regime);
            if g.verdict.boundary {
                g.search_shapes.contains(&shape)
            } else {
                g.search_shapes == vec![shape]
            }
        });
        checks.push(Check::flag(format!("n_c={n_c}: regime shape matches the search argmax"), agree));
        let region: Vec<&RegimeGridPoint> = pts.iter().filter(|g| g.in_asym_region).collect();
        let all_asym = region.iter().all(|g| g.search_shapes == vec![PolicyShape::Asymmetric]);
        checks.push(Check::new(
            format!("n_c={n_c}: every optimum asymmetric inside the asymmetric band"),
            format!("{} points, all asymmetric: {all_asym}", region.len()),
            "> 0 points, all asymmetric",
            !region.is_empty() && all_asym,
        ));
        for g in &pts {
            table.push(vec![
                n_c.to_string(),
                fmt_f64(g.params.theta),
                fmt_f64(g.params.chi),
                g.verdict.regime.label(),
                g.verdict.boundary.to_string(),
                fmt_f64(g.verdict.welfare),
                fmt_f64(g.search_welfare),
                g.search_shapes.iter().map(|s| format!("{s:?}")).join("|"),
                g.in_asym_region.to_string(),
            ]);
        }
    }
    Ok(Report {
        target: "cp-regimes".into(),
        title: "core-periphery regimes: classifier versus exhaustive search on 20x20 (theta, chi) grids".into(),
        checks,
        table,
    })
}

fn cp_asym_example() -> Result<Report, ReplicateError> {
    let p = CPParams { n_c: 3, n_p: 0, d: 0.15, d0: 1.0, theta: 0.99, r_high: 1.28, r: 0.2, chi: 3.0, m: 2 };
    let diff = |chi: f64| -> Result<f64, ReplicateError> {
        let q = CPParams { chi, ..p };
        let game = cp_game(&q)?;
        Ok(policy_welfare(&cp_safe_core_policy(&q, 1), &game)?.welfare
            - policy_welfare(&cp_policy(&q, Regime::SymmetricCap), &game)?.welfare)
    };
    let predicted = (3.0 * p.d0 / p.gross() - 2.0) * (p.theta * p.r_high - p.gross()) / (1.0 - p.theta);
    let (a, b) = (p.r_high, predicted + 2.0);
    let (fa, fb) = (diff(a)?, diff(b)?);
    let root = a - fa * (b - a) / (fb - fa);
    let mut table = Table::new(&["chi", "safe_core_minus_symmetric"]);
    for i in 0..=20 {
        let chi = a + (b - a) * i as f64 / 20.0;
        table.push(vec![fmt_f64(chi), fmt_f64(diff(chi)?)]);
    }
    let checks = vec![
        Check::flag("k^R = k^r = 1", p.k_risky() == 1 && p.k_safe() == 1),
        Check::new("asymmetric ahead below the crossing", fmt_f64(fa), "> 0", fa > 0.0),
        Check::new("symmetric ahead above the crossing", fmt_f64(fb), "< 0", fb < 0.0),
        Check::close("crossing (1-θ)χ = [3D_0/(1+r) - 2][θR - (1+r)]", root, predicted, 1e-12),
    ];
    Ok(Report {
        target: "cp-asym-example".into(),
        title: "three-bank core: where two safe banks and one free bank stop beating the symmetric cap".into(),
        checks,
        table,
    })
}

// ---------------------------------------------------------------------------
// nested split

/// Two-tier core: a top clique of two banks and three independent banks
/// linked only to the clique.
pub fn two_tier_spec(d: f64, d0: f64) -> NestedSplitSpec {
    NestedSplitSpec {
        tiers: vec![
            TierSpec { size: 3, counterparty_tiers: vec![1] },
            TierSpec { size: 2, counterparty_tiers: vec![0, 1] },
        ],
        d,
        d0,
        n_p: 0,
    }
}

fn ns_example() -> Result<Report, ReplicateError> {
    let spec = two_tier_spec(1.0, 1.0);
    let p = CPParams { n_c: 5, n_p: 0, d: 1.0, d0: 1.0, theta: 0.8, r_high: 3.5, r: 1.2, chi: 5.0, m: 3 };
    let (game, split) = ns_game(&spec, &p)?;
    let clique_safe = Policy::with_caps(vec![0.0, 0.0, 1.0, 1.0, 1.0]);
    let ind_safe = Policy::with_caps(vec![1.0, 1.0, 0.0, 0.0, 1.0]);
    let a = cascade_count(&game, &p, &clique_safe, &split.clique)?;
    let b = cascade_count(&game, &p, &ind_safe, &[2, 3])?;
    let wa = policy_welfare(&clique_safe, &game)?.welfare;
    let wb = policy_welfare(&ind_safe, &game)?.welfare;
    let tr = p.theta * p.r_high;
    let surplus = |frac: f64| 2.0 * (p.gross() - p.failure_mass() * frac * p.chi) + 3.0 * (tr - (1.0 - p.theta) * p.chi);
    let mut checks = vec![
        Check::flag("k^R = 2, k^r = 1, m = 3", p.k_risky() == 2 && p.k_safe() == 1),
        Check::new("clique regulated: clique defaults in failing subsets", format!("{}/{}", a.group_defaults, a.subsets), "7/10", (a.group_defaults, a.subsets) == (7, 10)),
        Check::new("two independent banks regulated: they default in failing subsets", format!("{}/{}", b.group_defaults, b.subsets), "3/10", (b.group_defaults, b.subsets) == (3, 10)),
        Check::close("surplus, clique regulated", wa, surplus(0.7), 1e-12),
        Check::close("surplus, independent banks regulated", wb, surplus(0.3), 1e-12),
        Check::new("independent-set regulation beats clique regulation", fmt_f64(wb - wa), "> 0", wb > wa),
    ];
    // an instance where the hierarchical policy is certified
    let q = CPParams { n_c: 5, n_p: 0, d: 0.3, d0: 1.0, theta: 0.98, r_high: 1.5, r: 0.35, chi: 1.0, m: 2 };
    let v = ns_regime_check(&two_tier_spec(q.d, q.d0), &q)?;
    checks.push(Check::close("hierarchical surplus formula", v.hierarchical_welfare, v.hierarchical_formula, 1e-12));
    checks.push(Check::new(
        "above the threshold the hierarchical policy beats every nontrivial symmetric cap",
        format!("threshold {}, certified {:?}", fmt_f64(v.threshold), v.certified),
        "certified",
        v.threshold_holds && v.certified == Some(true),
    ));
    let mut table = Table::new(&["policy", "caps", "group_defaults", "subsets", "welfare"]);
    table.push(vec!["clique_regulated".into(), format!("{:?}", clique_safe.caps), a.group_defaults.to_string(), a.subsets.to_string(), fmt_f64(wa)]);
    table.push(vec!["independent_regulated".into(), format!("{:?}", ind_safe.caps), b.group_defaults.to_string(), b.subsets.to_string(), fmt_f64(wb)]);
    Ok(Report {
        target: "ns-example".into(),
        title: "two-tier nested core: regulating peripheral-tier banks can beat regulating the clique".into(),
        checks,
        table,
    })
}

// ---------------------------------------------------------------------------
// net financial centrality

fn all_risky(n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|b| {
            let mut row = vec![0.0; k];
            row[b] = 1.0;
            row
        })
        .collect()
}

fn ranking_table(rank: &[(usize, f64)]) -> Table {
    let mut t = Table::new(&["bank", "nfc", "rank"]);
    for (i, &(b, v)) in rank.iter().enumerate() {
        t.push(vec![(b + 1).to_string(), fmt_f64(v), (i + 1).to_string()]);
    }
    t
}

fn star_nfc() -> Result<Report, ReplicateError> {
    // 1 + D <= 1 + r < 1 + (n - 1) D
    let (n, d, r) = (4, 0.5, 0.6);
    let net = build_star(n, d, 1.0)?;
    let sc = ScenarioSet::m_correlated(&MCorrelationSpec { n_c: n, theta: 0.7, m: n, r_high: 4.0, r })?;
    let costs = BankruptcyCostSpec::new(0.0, 50.0)?;
    let rank = nfc_ranking(&net, &all_risky(n, n + 1), &CounterfactualRule::AllIn { asset: n }, &sc, &costs, Selection::Greatest)?;
    let center = rank.iter().find(|x| x.0 == 0).map_or(f64::NAN, |x| x.1);
    let periph_min = rank.iter().filter(|x| x.0 != 0).map(|x| x.1).fold(f64::INFINITY, f64::min);
    Ok(Report {
        target: "star-nfc".into(),
        title: "star with perfectly correlated returns: the center has zero NFC".into(),
        checks: vec![
            Check::flag("1 + D <= 1 + r < 1 + (n-1)D", 1.0 + d <= 1.0 + r && 1.0 + r < 1.0 + (n - 1) as f64 * d),
            Check::new("center NFC", fmt_f64(center), "0", center == 0.0),
            Check::new("smallest peripheral NFC", fmt_f64(periph_min), "> 0", periph_min > 0.0),
        ],
        table: ranking_table(&rank),
    })
}

fn wheel_nfc() -> Result<Report, ReplicateError> {
    let (n, d, r) = (5, 0.5, 0.05);
    let net = build_directed_wheel(n, d, 1.0)?;
    let mut highs = vec![1.2; n];
    highs[0] = (n - 1) as f64 * d + 1.5;
    let sc = ScenarioSet::independent_two_point_each(0.8, &highs, 0.0)?.with_safe_asset(1.0 + r);
    let costs = BankruptcyCostSpec::new(0.0, 50.0)?;
    let rank = nfc_ranking(&net, &all_risky(n, n + 1), &CounterfactualRule::AllIn { asset: n }, &sc, &costs, Selection::Greatest)?;
    let center = rank.iter().find(|x| x.0 == 0).map_or(f64::NAN, |x| x.1);
    let periph_min = rank.iter().filter(|x| x.0 != 0).map(|x| x.1).fold(f64::INFINITY, f64::min);
    Ok(Report {
        target: "wheel-nfc".into(),
        title: "directed wheel: every peripheral bank is more central than the hub".into(),
        checks: vec![
            Check::flag("R_1 > (n-1)D + 1 and 1 < R_-1 < D + 1", highs[0] > (n - 1) as f64 * d + 1.0 && highs[1] > 1.0 && highs[1] < d + 1.0),
            Check::new("hub ranks last", rank.last().map_or("none".into(), |x| (x.0 + 1).to_string()), "1", rank.last().map(|x| x.0) == Some(0)),
            Check::new("peripheral NFC minus hub NFC", fmt_f64(periph_min - center), "> 0", periph_min > center),
        ],
        table: ranking_table(&rank),
    })
}

// ---------------------------------------------------------------------------
// defaults versus correlation

fn sweep_m() -> Result<Report, ReplicateError> {
    let base = CPParams { n_c: 6, n_p: 0, d: 0.5, d0: 1.0, theta: 0.9, r_high: 2.2, r: 0.05, chi: 4.0, m: 1 };
    let n = base.n_c;
    let k = base.k_risky();
    let rows = sweep_defaults_vs_m(&base, &(1..=n).collect::<Vec<_>>())?;
    let flat = (1.0 - base.theta) * n as f64;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let ed: Vec<f64> = rows.iter().map(|r| r.expected_defaults).collect();
    let peak = ed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let argmax: Vec<usize> = (0..n).filter(|&i| ed[i] == peak).map(|i| i + 1).collect();
    let mut table = Table::new(&["m", "k_risky", "expected_defaults", "closed_form"]);
    for r in &rows {
        table.push(vec![r.m.to_string(), r.k_risky.to_string(), fmt_f64(r.expected_defaults), fmt_f64(r.closed_form)]);
    }
    Ok(Report {
        target: "sweep-m".into(),
        title: "expected core defaults against the number of jointly failing assets".into(),
        checks: vec![
            Check::flag("n_c - 2 >= k^R >= (1-θ)n_c", n - 2 >= k && k as f64 >= flat),
            Check::flag("constant at (1-θ)n_c for m <= k^R", ed[..k].iter().all(|&x| close(x, flat))),
            Check::new("global maximum", format!("{argmax:?}"), format!("[{}]", k + 1), argmax == vec![k + 1]),
            Check::flag("strict decline after the peak", ed[k..].windows(2).all(|w| w[1] < w[0])),
            Check::close("value at m = n_c", ed[n - 1], flat, 1e-12),
            Check::flag("matches the closed form", rows.iter().all(|r| close(r.expected_defaults, r.closed_form))),
        ],
        table,
    })
}

// ---------------------------------------------------------------------------
// single-bank regime map

// Independent reading of the three regions: the smallest loss wins and ties
// are boundaries.
fn expected_regime(oc: f64, nfc: f64, c: f64) -> (BankRegime, bool) {
    let lo = oc.min(nfc).min(c);
    let ties = [oc, nfc, c].iter().filter(|&&x| x == lo).count();
    let r = if nfc == lo {
        BankRegime::LaissezFaire
    } else if oc == lo {
        BankRegime::Restrict
    } else {
        BankRegime::Bailout
    };
    (r, ties > 1)
}

// Cells of one regime, boundaries excluded, form one 4-connected piece.
fn contiguous(cells: &[RegimeCell], steps: usize, regime: BankRegime) -> bool {
    let member = |ix: usize, iy: usize| {
        let c = &cells[iy * steps + ix];
        c.regime == regime && !c.boundary
    };
    let Some(start) = cells.iter().position(|c| c.regime == regime && !c.boundary) else { return false };
    let total = cells.iter().filter(|c| c.regime == regime && !c.boundary).count();
    let mut seen = vec![false; cells.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut count = 0;
    while let Some(i) = queue.pop_front() {
        count += 1;
        let (ix, iy) = (i % steps, i / steps);
        let mut nb = Vec::new();
        if ix > 0 { nb.push((ix - 1, iy)); }
        if ix + 1 < steps { nb.push((ix + 1, iy)); }
        if iy > 0 { nb.push((ix, iy - 1)); }
        if iy + 1 < steps { nb.push((ix, iy + 1)); }
        for (x, y) in nb {
            let j = y * steps + x;
            if !seen[j] && member(x, y) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    count == total
}

fn regime_map() -> Result<Report, ReplicateError> {
    let planes = [
        ("excess_nfc", RegimeMapSpec {
            plane: RegimePlane::ExcessNfc { bailout_cost: 1.0, liabilities: 1.0 },
            x_min: 0.0, x_max: 2.0, y_min: 0.0, y_max: 2.0, steps: 21,
        }),
        ("cost_nfc", RegimeMapSpec {
            plane: RegimePlane::CostNfc { excess_return: 1.0, liabilities: 1.0 },
            x_min: 0.0, x_max: 2.0, y_min: 0.0, y_max: 2.0, steps: 21,
        }),
    ];
    let mut checks = Vec::new();
    let mut table = Table::new(&["plane", "x", "y", "opportunity_cost", "nfc", "bailout_cost", "regime", "boundary"]);
    for (name, spec) in planes {
        let cells = sweep_regime_map(&spec)?;
        let mismatches = cells
            .iter()
            .filter(|c| {
                let (r, b) = expected_regime(c.opportunity_cost, c.nfc, c.bailout_cost);
                b != c.boundary || (!b && r != c.regime)
            })
            .count();
        checks.push(Check::new(format!("{name}: cells matching the region rules"), format!("{} mismatches", mismatches), "0 mismatches", mismatches == 0));
        for r in [BankRegime::LaissezFaire, BankRegime::Restrict, BankRegime::Bailout] {
            checks.push(Check::flag(format!("{name}: {} region is one contiguous piece", r.as_str()), contiguous(&cells, spec.steps, r)));
        }
        let on_lines = cells.iter().filter(|c| c.boundary).all(|c| {
            c.opportunity_cost == c.nfc || c.bailout_cost == c.nfc || c.opportunity_cost == c.bailout_cost
        });
        checks.push(Check::flag(format!("{name}: boundaries lie on OC = NFC, c = NFC or OC = c"), on_lines));
        for c in &cells {
            table.push(vec![
                name.into(),
                fmt_f64(c.x),
                fmt_f64(c.y),
                fmt_f64(c.opportunity_cost),
                fmt_f64(c.nfc),
                fmt_f64(c.bailout_cost),
                c.regime.as_str().into(),
                c.boundary.to_string(),
            ]);
        }
    }
    Ok(Report {
        target: "regime-map".into(),
        title: "single-bank regulation regions: laissez-faire, portfolio restriction, bailout".into(),
        checks,
        table,
    })
}

// ---------------------------------------------------------------------------
// debt plus equity

/// One point of the countervailing sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountervailPoint {
    pub theta: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Best risky share found by clearing every grid point.
    pub best_share: f64,
    pub cap: f64,
}

pub fn countervail_sweep(points: usize) -> Result<Vec<CountervailPoint>, ReplicateError> {
    let (d, s, r_high, r) = (0.5, 0.8, 2.0, 0.05);
    let (net, eq) = countervailing_network(d, s)?;
    let costs = BankruptcyCostSpec::new(0.0, 0.5)?;
    let mut out = Vec::with_capacity(points);
    for i in 0..points {
        let theta = 0.55 + 0.4 * i as f64 / (points - 1).max(1) as f64;
        let cv = countervailing_example(d, s, theta, r_high, r)?;
        let sc = ScenarioSet::independent_two_point(2, theta, r_high, 0.0)?.with_safe_asset(1.0 + r);
        let StrategySpace::RiskyShareGrid { grid, .. } = StrategySpace::risky_share_grid(101, 0, 2, &[cv.q1_star]) else {
            unreachable!()
        };
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &q1 in &grid {
            let q = vec![vec![q1, 0.0, 1.0 - q1], vec![0.0, 1.0, 0.0]];
            let mut terms = Vec::new();
            for pt in sc.points() {
                let sol = clear_debt_equity(&net, &eq, &q, &pt.returns, &costs, Selection::Greatest)?;
                terms.push(pt.prob * sol.values[0].max(0.0));
            }
            let v: f64 = crate::returns::pairwise_sum(&terms);
            if v > best.0 + NASH_TOL {
                best = (v, q1);
            }
        }
        out.push(CountervailPoint { theta, lhs: cv.lhs, rhs: cv.rhs, best_share: best.1, cap: cv.q1_star });
    }
    Ok(out)
}

fn equity_countervail() -> Result<Report, ReplicateError> {
    let pts = countervail_sweep(50)?;
    let mut table = Table::new(&["theta", "lhs", "rhs", "best_share", "cap", "predicted"]);
    let mut agree = true;
    let mut flips = 0;
    for (i, p) in pts.iter().enumerate() {
        let predicted = if p.lhs > p.rhs { p.cap } else { 1.0 };
        agree &= (p.best_share - predicted).abs() < 1e-12;
        if i > 0 && (pts[i - 1].best_share == 1.0) != (p.best_share == 1.0) {
            flips += 1;
        }
        table.push(vec![fmt_f64(p.theta), fmt_f64(p.lhs), fmt_f64(p.rhs), fmt_f64(p.best_share), fmt_f64(p.cap), fmt_f64(predicted)]);
    }
    Ok(Report {
        target: "equity-countervail".into(),
        title: "debt plus equity: the owner of a debtor switches from full risk to the safe cap".into(),
        checks: vec![
            Check::flag("best response is the cap iff 1 - θ(2-θ) > ((1-s)/s)(θR-(1+r))/(1+r), on all 50 points", agree),
            Check::new("regime changes along the sweep", flips.to_string(), "1", flips == 1),
        ],
        table,
    })
}

// ---------------------------------------------------------------------------
// value conservation

fn random_network(rng: &mut ChaCha8Rng, n: usize) -> Result<Network, ReplicateError> {
    let m = n + 1;
    let mut debt = vec![0.0; m * m];
    for i in 1..m {
        for j in 1..m {
            if i != j && rng.gen::<f64>() < 0.5 {
                debt[i * m + j] = rng.gen_range(0.0..2.0);
            }
        }
        debt[i] = rng.gen_range(0.05..1.0);
        if rng.gen::<f64>() < 0.3 {
            debt[i * m] = rng.gen_range(0.0..0.5);
        }
    }
    Ok(Network::new(n, debt)?)
}

fn random_equity(rng: &mut ChaCha8Rng, n: usize) -> Result<EquityMatrix, ReplicateError> {
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen::<f64>() < 0.5 {
                s[i * n + j] = rng.gen_range(0.0..0.45);
            }
        }
    }
    for j in 0..n {
        let sum: f64 = (0..n).map(|i| s[i * n + j]).sum();
        if sum > 0.9 {
            for i in 0..n {
                s[i * n + j] *= 0.9 / sum;
            }
        }
    }
    Ok(EquityMatrix::new(n, s)?)
}

/// Conservation residuals on 100 debt-only and 100 debt-plus-equity
/// seeded instances, both selection rules.
pub fn conservation(seed: u64) -> Result<Report, ReplicateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = Table::new(&["instance", "kind", "n", "selection", "residual"]);
    let mut worst = [0.0f64; 2];
    for inst in 0..200 {
        let with_equity = inst >= 100;
        let n = rng.gen_range(1..=6);
        let net = random_network(&mut rng, n)?;
        let costs = BankruptcyCostSpec::new(if rng.gen() { 0.0 } else { rng.gen_range(0.0..0.5) }, rng.gen_range(0.0..1.5))?;
        // two assets: a risky one and a safe one
        let q: Vec<Vec<f64>> = (0..n).map(|_| {
            let x = rng.gen_range(0.0..2.0);
            let share = rng.gen::<f64>();
            vec![x * share, x * (1.0 - share)]
        }).collect();
        let p = [rng.gen_range(0.0..3.0), 1.05];
        let eq = if with_equity { Some(random_equity(&mut rng, n)?) } else { None };
        for sel in [Selection::Greatest, Selection::Least] {
            let sol = match &eq {
                Some(s) => clear_debt_equity(&net, s, &q, &p, &costs, sel)?,
                None => ClearingProblem::new(&net, costs, sel).solve_portfolio(&q, &p)?,
            };
            let res = conservation_residual(&sol);
            let k = usize::from(with_equity);
            worst[k] = worst[k].max(res);
            table.push(vec![
                inst.to_string(),
                if with_equity { "debt_equity" } else { "debt" }.into(),
                n.to_string(),
                format!("{sel:?}").to_lowercase(),
                fmt_f64(res),
            ]);
        }
    }
    Ok(Report {
        target: "conservation".into(),
        title: "value conservation: outside value equals investment returns minus bankruptcy costs".into(),
        checks: vec![
            Check::new("max residual, 100 debt-only instances", fmt_f64(worst[0]), "< 1e-9", worst[0] < 1e-9),
            Check::new("max residual, 100 debt-plus-equity instances", fmt_f64(worst[1]), "< 1e-9", worst[1] < 1e-9),
        ],
        table,
    })
}

// ---------------------------------------------------------------------------
// dominance of full risk (not a named target; used by the acceptance suite)

/// Full-risky dominance on a 101-point grid for the two-bank chain and a
/// three-bank star.
pub fn dominance_checks() -> Result<Vec<Check>, ReplicateError> {
    let (d, r, theta, rh, chi) = (0.3, 0.05, 0.8, 1.5, 0.5);
    let chain = motivating_game(d, r, theta, rh, chi, 101)?;
    let net = build_star(3, d, 0.2)?;
    let sc = ScenarioSet::independent_two_point(1, theta, rh, 0.0)?.with_safe_asset(1.0 + r);
    let spaces = (1..=3)
        .map(|i| StrategySpace::risky_share_grid(101, 0, 1, &[1.0 - net.liabilities(i) / (1.0 + r)]))
        .collect();
    let star = GameSpec::new(net, sc, BankruptcyCostSpec::new(0.0, chi)?, Selection::Greatest, spaces)?;
    let mut out = Vec::new();
    for (name, g) in [("two-bank chain", chain), ("three-bank star", star)] {
        let rep = check_dominance_full_risky(&g)?;
        let margin = rep.iter().map(|r| r.min_margin).fold(f64::INFINITY, f64::min);
        let ok = rep.iter().all(|r| r.holds && !r.degenerate);
        out.push(Check::new(format!("{name}: full risk strictly dominant"), fmt_f64(margin), "> 0", ok && margin > 0.0));
    }
    Ok(out)
}
