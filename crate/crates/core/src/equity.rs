//! Cross-holdings of equity on top of debt.
//!
//! `S_ij` is the share of bank `j` held by bank `i`; whatever banks do not
//! hold belongs to outside investors, `S_0j = 1 - sum_i S_ij`. A solvent
//! bank passes `S_ij V_j` to each holder; a defaulting bank's equity is
//! worthless. Clearing itself lives in [`crate::clearing`]; this module
//! validates ownership, detects feedback cycles and carries the
//! two-bank countervailing-incentive example.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::clearing::{conservation_residual, ClearingError, ClearingProblem, ClearingSolution, Selection};
use crate::network::{BankruptcyCostSpec, Network};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquityError {
    #[error("share S[{holder}][{issuer}] = {value} outside [0, 1]")]
    InvalidShare { holder: usize, issuer: usize, value: f64 },
    #[error("bank {bank} holds a share of itself")]
    SelfHolding { bank: usize },
    #[error("shares of bank {issuer} held by banks sum to {sum} > 1")]
    Overallocated { issuer: usize, sum: f64 },
    /// Some bank has no equity path to an outside investor.
    #[error("bank {bank} has no equity path to outside investors")]
    SingularOwnership { bank: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

impl From<serde_json::Error> for EquityError {
    fn from(e: serde_json::Error) -> Self {
        EquityError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Validated cross-holding matrix over bank positions.
#[derive(Debug, Clone, PartialEq)]
pub struct EquityMatrix {
    n: usize,
    s: Vec<f64>,
}

impl EquityMatrix {
    /// `s[i * n + j]` is the share of bank position `j` held by bank `i`.
    pub fn new(n: usize, s: Vec<f64>) -> Result<Self, EquityError> {
        if s.len() != n * n {
            return Err(EquityError::DimensionMismatch { expected: n * n, got: s.len() });
        }
        for i in 0..n {
            for j in 0..n {
                let v = s[i * n + j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(EquityError::InvalidShare { holder: i, issuer: j, value: v });
                }
                if i == j && v != 0.0 {
                    return Err(EquityError::SelfHolding { bank: i });
                }
            }
        }
        for j in 0..n {
            let sum: f64 = (0..n).map(|i| s[i * n + j]).sum();
            if sum > 1.0 + 1e-12 {
                return Err(EquityError::Overallocated { issuer: j, sum });
            }
        }
        let m = EquityMatrix { n, s };
        if let Some(bank) = m.stranded_bank() {
            return Err(EquityError::SingularOwnership { bank });
        }
        Ok(m)
    }

    pub fn zeros(n: usize) -> Self {
        EquityMatrix { n, s: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, EquityError> {
        let n = rows.len();
        let mut flat = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(EquityError::DimensionMismatch { expected: n, got: r.len() });
            }
            flat.extend_from_slice(r);
        }
        EquityMatrix::new(n, flat)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Share of `issuer` held by `holder` (bank positions).
    pub fn share(&self, holder: usize, issuer: usize) -> f64 {
        self.s[holder * self.n + issuer]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.s
    }

    /// `S_0j`: the outside investors' share of bank `j`.
    pub fn outside_share(&self, issuer: usize) -> f64 {
        1.0 - (0..self.n).map(|i| self.share(i, issuer)).sum::<f64>()
    }

    // First bank whose value cannot leak to an outside investor through
    // any chain of holdings.
    fn stranded_bank(&self) -> Option<usize> {
        let n = self.n;
        let mut reaches: Vec<bool> = (0..n).map(|j| self.outside_share(j) > 1e-15).collect();
        loop {
            let mut changed = false;
            for j in 0..n {
                if !reaches[j] && (0..n).any(|i| self.share(i, j) > 0.0 && reaches[i]) {
                    reaches[j] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        reaches.iter().position(|&r| !r)
    }

    /// JSON: an `n x n` array of rows.
    pub fn from_json(text: &str) -> Result<Self, EquityError> {
        let rows: Vec<Vec<f64>> = serde_json::from_str(text)?;
        EquityMatrix::from_rows(&rows)
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<&[f64]> = self.s.chunks(self.n.max(1)).collect();
        serde_json::to_string_pretty(&rows).expect("matrix serializes")
    }
}

fn check_dims(network: &Network, s: &EquityMatrix) -> Result<(), EquityError> {
    if network.n() != s.n() {
        return Err(EquityError::DimensionMismatch { expected: network.n(), got: s.n() });
    }
    Ok(())
}

/// Clears a debt-plus-equity network.
pub fn clear_debt_equity(
    network: &Network,
    s: &EquityMatrix,
    q: &[Vec<f64>],
    p: &[f64],
    costs: &BankruptcyCostSpec,
    selection: Selection,
) -> Result<ClearingSolution, EquityError> {
    check_dims(network, s)?;
    Ok(ClearingProblem::new(network, *costs, selection)
        .with_equity(s.as_slice())
        .solve_portfolio(q, p)?)
}

/// `|V_0 - (sum q.p - sum b)|` on a debt-plus-equity network.
pub fn conservation_check_equity(
    network: &Network,
    s: &EquityMatrix,
    q: &[Vec<f64>],
    p: &[f64],
    costs: &BankruptcyCostSpec,
    selection: Selection,
) -> Result<f64, EquityError> {
    Ok(conservation_residual(&clear_debt_equity(network, s, q, p, costs, selection)?))
}

/// Result of [`feedback_risk`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackRisk {
    pub at_risk: bool,
    /// Witness cycle as node numbers, starting and ending at the bank.
    pub cycle: Vec<usize>,
}

/// Whether bank position `i` sits on a cycle that starts with an equity
/// claim on it and contains at least one debt claim. Edges run from the
/// obligor to the claim holder.
pub fn feedback_risk(network: &Network, s: &EquityMatrix, i: usize) -> Result<FeedbackRisk, EquityError> {
    check_dims(network, s)?;
    let n = network.n();
    if i >= n {
        return Err(EquityError::DimensionMismatch { expected: n, got: i });
    }
    let debt = |from: usize, to: usize| network.claim(to + 1, from + 1) > 0.0;
    let equity = |from: usize, to: usize| s.share(to, from) > 0.0;
    // BFS over (bank, seen a debt edge yet)
    let idx = |b: usize, flag: bool| b * 2 + usize::from(flag);
    let mut parent: Vec<Option<usize>> = vec![None; 2 * n];
    let mut seen = vec![false; 2 * n];
    let mut queue = VecDeque::new();
    for h in 0..n {
        if equity(i, h) {
            let st = idx(h, false);
            if !seen[st] {
                seen[st] = true;
                queue.push_back(st);
            }
        }
    }
    let target = idx(i, true);
    while let Some(st) = queue.pop_front() {
        if st == target {
            break;
        }
        let (b, flag) = (st / 2, st % 2 == 1);
        for c in 0..n {
            for (linked, via_debt) in [(debt(b, c), true), (equity(b, c), false)] {
                if !linked {
                    continue;
                }
                let nx = idx(c, flag || via_debt);
                if !seen[nx] {
                    seen[nx] = true;
                    parent[nx] = Some(st);
                    queue.push_back(nx);
                }
            }
        }
    }
    if !seen[target] {
        return Ok(FeedbackRisk { at_risk: false, cycle: Vec::new() });
    }
    let mut path = vec![target / 2 + 1];
    let mut cur = target;
    while let Some(p) = parent[cur] {
        path.push(p / 2 + 1);
        cur = p;
    }
    path.push(i + 1);
    path.reverse();
    Ok(FeedbackRisk { at_risk: true, cycle: path })
}

/// Direct plus indirect claims `C = (I - S)^{-1} S`; `C[i * n + j]` is
/// bank `i`'s total claim on bank `j`.
pub fn indirect_claims(s: &EquityMatrix) -> Result<Vec<f64>, EquityError> {
    let n = s.n();
    let sm = DMatrix::from_row_slice(n, n, s.as_slice());
    let a = DMatrix::<f64>::identity(n, n) - &sm;
    let inv = a.try_inverse().ok_or(EquityError::SingularOwnership { bank: 0 })?;
    let c = inv * sm;
    Ok((0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| c[(i, j)]).collect())
}

/// Total claims held on bank `j`: the `j`-th column sum of `C`.
pub fn total_claims_on(s: &EquityMatrix) -> Result<Vec<f64>, EquityError> {
    let n = s.n();
    let c = indirect_claims(s)?;
    Ok((0..n).map(|j| (0..n).map(|i| c[i * n + j]).sum()).collect())
}

/// Largest single-bank (direct or indirect) claim on another bank.
pub fn max_pairwise_claim(s: &EquityMatrix) -> Result<f64, EquityError> {
    Ok(indirect_claims(s)?.into_iter().fold(0.0, f64::max))
}

/// `(θR - (1+r)) / ((1-θ)^2 (1+r))`.
pub fn no_feedback_bound(theta: f64, r_high: f64, r: f64) -> f64 {
    (theta * r_high - (1.0 + r)) / ((1.0 - theta).powi(2) * (1.0 + r))
}

/// Sufficient condition for full-risky investment in the two-bank
/// countervailing configuration: the largest claim `c` satisfies
/// `c / (1 - c) < bound`. Comparing `c` itself with the bound is not
/// sufficient (see the tests).
pub fn full_risky_guaranteed(max_claim: f64, theta: f64, r_high: f64, r: f64) -> bool {
    if max_claim >= 1.0 {
        return false;
    }
    max_claim / (1.0 - max_claim) < no_feedback_bound(theta, r_high, r)
}

/// Closed-form analysis of the two-bank countervailing example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Countervailing {
    /// Largest risky share that keeps bank 2 solvent when both assets fail.
    pub q1_star: f64,
    pub prefers_safe: bool,
    /// `1 - θ(2-θ)`.
    pub lhs: f64,
    /// `((1-s)/s)(θR - (1+r))/(1+r)`.
    pub rhs: f64,
    /// Bank 1's expected value when fully risky.
    pub value_full_risky: f64,
    /// Bank 1's expected value at `q1_star`.
    pub value_at_cap: f64,
}

/// Bank 2 owes `d` to bank 1 and owns share `s` of it; each bank splits
/// its unit of capital between its own risky asset and the safe asset.
pub fn countervailing_example(d: f64, s: f64, theta: f64, r_high: f64, r: f64) -> Result<Countervailing, EquityError> {
    if !(s > 0.0 && s < 1.0) || !(d > 0.0) {
        return Err(EquityError::PreconditionFailed(format!("need 0 < s < 1 and d > 0, got s={s}, d={d}")));
    }
    if s * (1.0 + r) < d {
        return Err(EquityError::PreconditionFailed(format!(
            "need s(1+r) >= d, got {} < {d}",
            s * (1.0 + r)
        )));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(EquityError::PreconditionFailed(format!("theta {theta} outside (0, 1)")));
    }
    let safe = 1.0 + r;
    let odds = (1.0 - s) / s;
    let q1_star = 1.0 - odds * d / safe;
    let excess = (theta * r_high - safe) / safe;
    let lhs = 1.0 - theta * (2.0 - theta);
    let rhs = odds * excess;
    Ok(Countervailing {
        q1_star,
        prefers_safe: lhs > rhs,
        lhs,
        rhs,
        value_full_risky: theta * (r_high + (2.0 - theta) * d),
        value_at_cap: theta * r_high + d - d * odds * excess,
    })
}

/// Network and ownership of the countervailing example.
pub fn countervailing_network(d: f64, s: f64) -> Result<(Network, EquityMatrix), EquityError> {
    let net = Network::build_general(&[vec![0.0; 3], vec![0.0, 0.0, d], vec![0.0; 3]])
        .map_err(|e| EquityError::PreconditionFailed(e.to_string()))?;
    let eq = EquityMatrix::new(2, vec![0.0, 0.0, s, 0.0])?;
    Ok((net, eq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearing::clear;
    use proptest::prelude::*;

    fn costs() -> BankruptcyCostSpec {
        BankruptcyCostSpec::new(0.0, 0.5).unwrap()
    }

    #[test]
    fn validation() {
        assert!(matches!(
            EquityMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]),
            Err(EquityError::SingularOwnership { .. })
        ));
        assert!(matches!(EquityMatrix::new(2, vec![0.5, 0.0, 0.0, 0.0]), Err(EquityError::SelfHolding { bank: 0 })));
        assert!(matches!(
            EquityMatrix::new(3, vec![0.0, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0, 0.6, 0.0]),
            Err(EquityError::Overallocated { issuer: 1, .. })
        ));
        let ok = EquityMatrix::new(2, vec![0.0, 0.3, 0.2, 0.0]).unwrap();
        assert!((ok.outside_share(1) - 0.7).abs() < 1e-15);
        assert_eq!(EquityMatrix::from_json(&ok.to_json()).unwrap(), ok);
    }

    #[test]
    fn zero_holdings_reduce_to_debt_only() {
        let net = Network::build_general(&[
            vec![0.0, 0.2, 0.3],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.8, 0.0],
        ])
        .unwrap();
        let q = vec![vec![1.0, 0.0], vec![0.3, 0.7]];
        let p = [0.1, 1.05];
        for sel in [Selection::Greatest, Selection::Least] {
            let a = clear(&net, &q, &p, &costs(), sel).unwrap();
            let b = clear_debt_equity(&net, &EquityMatrix::zeros(2), &q, &p, &costs(), sel).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn countervailing_cap_keeps_debtor_solvent() {
        let (d, s, r) = (0.5, 0.8, 0.05);
        let (net, eq) = countervailing_network(d, s).unwrap();
        let cv = countervailing_example(d, s, 0.6, 2.0, r).unwrap();
        let q = vec![vec![cv.q1_star, 0.0, 1.0 - cv.q1_star], vec![0.0, 1.0, 0.0]];
        let sol = clear_debt_equity(&net, &eq, &q, &[0.0, 0.0, 1.0 + r], &costs(), Selection::Greatest).unwrap();
        // bank 1 worth d/s, bank 2 exactly on its solvency boundary
        assert!((sol.values[0] - d / s).abs() < 1e-12);
        assert!(sol.defaults.is_empty());
        assert_eq!(sol.values[1], 0.0);
        assert!(conservation_residual(&sol) < 1e-12);
        // a little more risk and bank 2 fails
        let q = vec![vec![cv.q1_star + 1e-6, 0.0, 1.0 - cv.q1_star - 1e-6], vec![0.0, 1.0, 0.0]];
        let sol = clear_debt_equity(&net, &eq, &q, &[0.0, 0.0, 1.0 + r], &costs(), Selection::Greatest).unwrap();
        assert_eq!(sol.defaults, vec![1]);
    }

    #[test]
    fn feedback_cycles() {
        let (net, eq) = countervailing_network(0.5, 0.8).unwrap();
        let fr = feedback_risk(&net, &eq, 0).unwrap();
        assert!(fr.at_risk);
        assert_eq!(fr.cycle, vec![1, 2, 1]);
        assert!(!feedback_risk(&net, &eq, 1).unwrap().at_risk);

        let debt_only = EquityMatrix::zeros(2);
        assert!(!feedback_risk(&net, &debt_only, 0).unwrap().at_risk);

        // equity-only star: center holds shares of the spokes and vice versa
        let empty = Network::new(3, vec![0.0; 16]).unwrap();
        let star = EquityMatrix::new(3, vec![0.0, 0.3, 0.3, 0.2, 0.0, 0.0, 0.2, 0.0, 0.0]).unwrap();
        for b in 0..3 {
            assert!(!feedback_risk(&empty, &star, b).unwrap().at_risk);
        }
    }

    #[test]
    fn indirect_claims_chain() {
        // 1 holds half of 2, 2 holds half of 3
        let eq = EquityMatrix::new(3, vec![0.0, 0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0]).unwrap();
        let c = indirect_claims(&eq).unwrap();
        assert!((c[2] - 0.25).abs() < 1e-15);
        assert!((max_pairwise_claim(&eq).unwrap() - 0.5).abs() < 1e-15);
        assert!((total_claims_on(&eq).unwrap()[2] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn literal_claim_bound_is_not_sufficient() {
        // claim 0.8 sits below the bound of 1.0, yet the safer cap wins
        let (theta, r_high, r, s) = (0.5, 2.5, 0.0, 0.8);
        assert!((no_feedback_bound(theta, r_high, r) - 1.0).abs() < 1e-15);
        let cv = countervailing_example(0.5, s, theta, r_high, r).unwrap();
        assert!(cv.prefers_safe);
        assert!(!full_risky_guaranteed(s, theta, r_high, r));
        // the odds form does guarantee full risk below the bound
        assert!(full_risky_guaranteed(0.49, theta, r_high, r));
        let cv = countervailing_example(0.4, 0.49, theta, r_high, r).unwrap();
        assert!(!cv.prefers_safe);
    }

    #[test]
    fn countervailing_closed_forms_match_clearing() {
        use crate::returns::ScenarioSet;
        for &(d, s, theta, r_high, r) in &[(0.5, 0.8, 0.6, 2.0, 0.05), (0.4, 0.49, 0.5, 2.5, 0.0), (0.3, 0.9, 0.7, 1.8, 0.1)] {
            let (net, eq) = countervailing_network(d, s).unwrap();
            let cv = countervailing_example(d, s, theta, r_high, r).unwrap();
            let sc = ScenarioSet::independent_two_point(2, theta, r_high, 0.0).unwrap().with_safe_asset(1.0 + r);
            let value = |q1: f64| {
                let q = vec![vec![q1, 0.0, 1.0 - q1], vec![0.0, 1.0, 0.0]];
                sc.expectation(|p| {
                    clear_debt_equity(&net, &eq, &q, p, &costs(), Selection::Greatest).unwrap().values[0]
                })
            };
            assert!((value(1.0) - cv.value_full_risky).abs() < 1e-12);
            assert!((value(cv.q1_star) - cv.value_at_cap).abs() < 1e-12);
            assert_eq!(cv.prefers_safe, cv.value_at_cap > cv.value_full_risky);
        }
    }

    #[test]
    fn countervailing_preconditions() {
        assert!(countervailing_example(0.9, 0.5, 0.5, 2.5, 0.0).is_err());
        assert!(countervailing_example(0.5, 1.0, 0.5, 2.5, 0.0).is_err());
    }

    fn arb_equity_instance() -> impl Strategy<Value = (Network, EquityMatrix, Vec<Vec<f64>>, BankruptcyCostSpec)> {
        (2usize..5).prop_flat_map(|n| {
            let m = n + 1;
            (
                proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.5], m * m),
                proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..0.45], n * n),
                proptest::collection::vec(0.0f64..2.0, n),
                0.0f64..0.5,
                0.0f64..1.0,
            )
                .prop_map(move |(mut debt, mut sh, e, a, chi)| {
                    for i in 0..m {
                        debt[i * m + i] = 0.0;
                    }
                    for i in 0..n {
                        sh[i * n + i] = 0.0;
                    }
                    // keep every column sum below 1
                    for j in 0..n {
                        let sum: f64 = (0..n).map(|i| sh[i * n + j]).sum();
                        if sum > 0.9 {
                            for i in 0..n {
                                sh[i * n + j] *= 0.9 / sum;
                            }
                        }
                    }
                    let q = e.iter().map(|&x| vec![x]).collect();
                    (
                        Network::new(n, debt).unwrap(),
                        EquityMatrix::new(n, sh).unwrap(),
                        q,
                        BankruptcyCostSpec::new(a, chi).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn equity_conservation((net, eq, q, c) in arb_equity_instance()) {
            for sel in [Selection::Greatest, Selection::Least] {
                let sol = clear_debt_equity(&net, &eq, &q, &[1.0], &c, sel).unwrap();
                prop_assert!(conservation_residual(&sol) < 1e-9);
                for (j, &v) in sol.values.iter().enumerate() {
                    prop_assert_eq!(sol.is_default(j), v < 0.0);
                }
            }
        }

        #[test]
        fn equity_monotone_in_returns((net, eq, q, c) in arb_equity_instance(), lift in 1.0f64..2.0) {
            let lo = clear_debt_equity(&net, &eq, &q, &[1.0], &c, Selection::Greatest).unwrap();
            let hi = clear_debt_equity(&net, &eq, &q, &[lift], &c, Selection::Greatest).unwrap();
            for (a, b) in lo.values.iter().zip(&hi.values) {
                prop_assert!(*a <= b + 1e-9);
            }
        }

        #[test]
        fn equity_lattice_order((net, eq, q, c) in arb_equity_instance()) {
            let hi = clear_debt_equity(&net, &eq, &q, &[1.0], &c, Selection::Greatest).unwrap();
            let lo = clear_debt_equity(&net, &eq, &q, &[1.0], &c, Selection::Least).unwrap();
            for (a, b) in lo.values.iter().zip(&hi.values) {
                prop_assert!(*a <= b + 1e-9);
            }
        }
    }
}
