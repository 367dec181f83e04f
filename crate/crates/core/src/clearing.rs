//! Equilibrium bank values with bankruptcy costs.
//!
//! Bank `i` holds investments worth `e_i = q_i . p`, receives `d_i^A` from
//! its debtors and (optionally) equity income from solvent banks it owns
//! shares in. It is solvent when those assets cover `D_i^L`; otherwise it
//! loses `chi + a * assets` and its creditors split what is left pro rata.
//!
//! Solver: fictitious default. For a candidate default set `S` the map
//! `T_S` treats banks in `S` as insolvent and everyone else as paying in
//! full. `T_S` is monotone, so iterating from an upper (lower) bound
//! converges to its greatest (least) fixed point. Greatest selection grows
//! `S` from empty; Least shrinks it from every bank with liabilities. Each
//! inner solve is finished with an exact linear solve on the current
//! payment regime, accepted only if it reproduces that regime and is a
//! fixed point on the correct side of the iterate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{BankruptcyCostSpec, Network};
use crate::returns::{pairwise_sum, ScenarioSet};

/// Inner payment tolerance.
pub const EPS_PAY: f64 = 1e-10;
/// Relative slack in the solvency test `assets >= D^L`.
pub const SOLVENCY_TOL: f64 = 1e-12;
const MAX_INNER: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClearingError {
    /// Iteration budget exhausted; indicates a bug, not a model state.
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// `I - S` cannot be inverted.
    #[error("ownership matrix is singular")]
    SingularOwnership,
}

/// Which fixed point to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    #[default]
    Greatest,
    Least,
}

/// A solved clearing problem. Vectors are indexed by bank position.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearingSolution {
    pub values: Vec<f64>,
    /// Realized payments over all nodes, row-major `(n + 1)^2`, creditor rows.
    pub payments: Vec<f64>,
    /// Defaulting bank positions in increasing order.
    pub defaults: Vec<usize>,
    pub costs: Vec<f64>,
    /// Value accruing to node 0.
    pub outside_value: f64,
    /// Investment value `q_i . p` per bank.
    pub investment: Vec<f64>,
    /// Total assets at the fixed point (investments, receipts, equity income).
    pub assets: Vec<f64>,
    /// Forced-solvent banks whose assets fell short of their liabilities.
    pub bailed_out: Vec<usize>,
    /// Outer rounds of default-set updates.
    pub rounds: usize,
}

impl ClearingSolution {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn payment(&self, creditor: usize, debtor: usize) -> f64 {
        self.payments[creditor * (self.n() + 1) + debtor]
    }

    pub fn is_default(&self, b: usize) -> bool {
        self.defaults.binary_search(&b).is_ok()
    }

    pub fn total_cost(&self) -> f64 {
        self.costs.iter().sum()
    }

    /// JSON export `{V, payments, defaults, costs}`; banks and payment rows
    /// use node numbering (bank position + 1).
    pub fn to_json(&self) -> String {
        let m = self.n() + 1;
        let rows: Vec<&[f64]> = (0..m).map(|i| &self.payments[i * m..(i + 1) * m]).collect();
        let v = serde_json::json!({
            "V": self.values,
            "payments": rows,
            "defaults": self.defaults.iter().map(|b| b + 1).collect::<Vec<_>>(),
            "costs": self.costs,
            "outside_value": self.outside_value,
        });
        serde_json::to_string_pretty(&v).expect("solution serializes")
    }
}

/// Componentwise `max(V, 0)`.
pub fn equity_values(solution: &ClearingSolution) -> Vec<f64> {
    solution.values.iter().map(|&v| v.max(0.0)).collect()
}

/// A clearing problem minus the investment values, so one setup serves
/// many scenarios.
#[derive(Debug, Clone, Copy)]
pub struct ClearingProblem<'a> {
    pub network: &'a Network,
    /// Cross-holdings `S[i * n + j]`: share of bank `j` held by bank `i`.
    pub equity: Option<&'a [f64]>,
    /// Banks whose payments are pinned to face value (bailed out).
    pub forced: Option<&'a [bool]>,
    pub costs: BankruptcyCostSpec,
    pub selection: Selection,
}

impl<'a> ClearingProblem<'a> {
    pub fn new(network: &'a Network, costs: BankruptcyCostSpec, selection: Selection) -> Self {
        ClearingProblem {
            network,
            equity: None,
            forced: None,
            costs,
            selection,
        }
    }

    pub fn with_equity(mut self, s: &'a [f64]) -> Self {
        self.equity = Some(s);
        self
    }

    pub fn with_forced(mut self, forced: &'a [bool]) -> Self {
        self.forced = Some(forced);
        self
    }

    /// Clears for the given per-bank investment values `q_i . p`.
    pub fn solve(&self, investment: &[f64]) -> Result<ClearingSolution, ClearingError> {
        let n = self.network.n();
        if investment.len() != n {
            return Err(ClearingError::DimensionMismatch {
                what: "investment",
                expected: n,
                got: investment.len(),
            });
        }
        if investment.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(ClearingError::InvalidInput("investment values must be finite and nonnegative".into()));
        }
        if let Some(s) = self.equity {
            if s.len() != n * n {
                return Err(ClearingError::DimensionMismatch {
                    what: "equity",
                    expected: n * n,
                    got: s.len(),
                });
            }
        }
        if let Some(f) = self.forced {
            if f.len() != n {
                return Err(ClearingError::DimensionMismatch {
                    what: "forced",
                    expected: n,
                    got: f.len(),
                });
            }
        }
        let mut ws = Workspace::new(self, investment);
        if n == 0 {
            return Ok(ws.finish(0));
        }
        let rounds = match self.selection {
            Selection::Greatest => ws.greatest()?,
            Selection::Least => ws.least()?,
        };
        Ok(ws.finish(rounds))
    }

    /// Clears with investment values computed from portfolio rows and returns.
    pub fn solve_portfolio(&self, q: &[Vec<f64>], p: &[f64]) -> Result<ClearingSolution, ClearingError> {
        let e = investment_values(self.network.n(), q, p)?;
        self.solve(&e)
    }
}

/// `q_i . p` for every bank, with shape and sign checks.
pub fn investment_values(n: usize, q: &[Vec<f64>], p: &[f64]) -> Result<Vec<f64>, ClearingError> {
    if q.len() != n {
        return Err(ClearingError::DimensionMismatch {
            what: "portfolio rows",
            expected: n,
            got: q.len(),
        });
    }
    if p.iter().any(|&x| !(x >= 0.0)) {
        return Err(ClearingError::InvalidInput("returns must be nonnegative".into()));
    }
    q.iter()
        .map(|row| {
            if row.len() != p.len() {
                return Err(ClearingError::DimensionMismatch {
                    what: "portfolio row",
                    expected: p.len(),
                    got: row.len(),
                });
            }
            if row.iter().any(|&x| !(x >= 0.0)) {
                return Err(ClearingError::InvalidInput("portfolio shares must be nonnegative".into()));
            }
            Ok(row.iter().zip(p).map(|(a, b)| a * b).sum())
        })
        .collect()
}

/// Debt-only clearing of portfolio `q` under returns `p`.
pub fn clear(
    network: &Network,
    q: &[Vec<f64>],
    p: &[f64],
    costs: &BankruptcyCostSpec,
    selection: Selection,
) -> Result<ClearingSolution, ClearingError> {
    ClearingProblem::new(network, *costs, selection).solve_portfolio(q, p)
}

/// Expected welfare decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Welfare {
    /// `E[sum q.p] - E[sum b]`.
    pub total: f64,
    pub per_bank_returns: Vec<f64>,
    pub expected_costs: Vec<f64>,
    pub expected_defaults: f64,
}

/// Welfare of a fixed problem setup under portfolio `q`.
pub fn problem_welfare(
    problem: &ClearingProblem<'_>,
    q: &[Vec<f64>],
    scenarios: &ScenarioSet,
) -> Result<Welfare, ClearingError> {
    let n = problem.network.n();
    let pts = scenarios.points();
    let mut sols = Vec::with_capacity(pts.len());
    for s in pts {
        sols.push(problem.solve_portfolio(q, &s.returns)?);
    }
    let weighted = |f: &dyn Fn(&ClearingSolution) -> f64| {
        let terms: Vec<f64> = pts.iter().zip(&sols).map(|(s, sol)| s.prob * f(sol)).collect();
        pairwise_sum(&terms)
    };
    Ok(Welfare {
        total: weighted(&|sol| sol.investment.iter().sum::<f64>() - sol.total_cost()),
        per_bank_returns: (0..n).map(|b| weighted(&|sol| sol.investment[b])).collect(),
        expected_costs: (0..n).map(|b| weighted(&|sol| sol.costs[b])).collect(),
        expected_defaults: weighted(&|sol| sol.defaults.len() as f64),
    })
}

/// Expected welfare of portfolio `q` on a debt-only network.
pub fn expected_welfare(
    network: &Network,
    q: &[Vec<f64>],
    scenarios: &ScenarioSet,
    costs: &BankruptcyCostSpec,
    selection: Selection,
) -> Result<Welfare, ClearingError> {
    problem_welfare(&ClearingProblem::new(network, *costs, selection), q, scenarios)
}

/// `|V_0 - (sum q.p - sum b)|` for a solved problem.
pub fn conservation_residual(solution: &ClearingSolution) -> f64 {
    let lhs = solution.outside_value;
    let rhs = solution.investment.iter().sum::<f64>() - solution.total_cost();
    (lhs - rhs).abs()
}

/// Clears and returns the outside-value conservation residual.
pub fn value_conservation_check(
    network: &Network,
    q: &[Vec<f64>],
    p: &[f64],
    costs: &BankruptcyCostSpec,
    selection: Selection,
) -> Result<f64, ClearingError> {
    Ok(conservation_residual(&clear(network, q, p, costs, selection)?))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Zone {
    Zero,
    Partial,
    Full,
    Negative,
    Positive,
}

struct Workspace<'p, 'a> {
    pb: &'p ClearingProblem<'a>,
    n: usize,
    e: &'p [f64],
    dl: Vec<f64>,
    tol: Vec<f64>,
    in_s: Vec<bool>,
    forced: Vec<bool>,
    v: Vec<f64>,
    next: Vec<f64>,
    assets: Vec<f64>,
    frac: Vec<f64>,
    zones: Vec<Zone>,
    scratch_zones: Vec<Zone>,
    track_sign: bool,
}

impl<'p, 'a> Workspace<'p, 'a> {
    fn new(pb: &'p ClearingProblem<'a>, e: &'p [f64]) -> Self {
        let n = pb.network.n();
        let dl: Vec<f64> = (1..=n).map(|i| pb.network.liabilities(i)).collect();
        let tol = dl.iter().map(|&x| SOLVENCY_TOL * x.max(1.0)).collect();
        let forced = pb.forced.map_or_else(|| vec![false; n], |f| f.to_vec());
        let holds_equity = pb.equity.is_some_and(|s| s.iter().any(|&x| x > 0.0));
        let track_sign = holds_equity || forced.iter().any(|&f| f);
        Workspace {
            pb,
            n,
            e,
            dl,
            tol,
            in_s: vec![false; n],
            forced,
            v: vec![0.0; n],
            next: vec![0.0; n],
            assets: vec![0.0; n],
            frac: vec![1.0; n],
            zones: vec![Zone::Full; n],
            scratch_zones: vec![Zone::Full; n],
            track_sign,
        }
    }

    #[inline]
    fn pay_fraction(&self, j: usize, v: f64) -> f64 {
        if self.in_s[j] {
            ((v + self.dl[j]) / self.dl[j]).clamp(0.0, 1.0)
        } else {
            1.0
        }
    }

    // out = T_S(v); also records assets.
    fn apply(&mut self, from_next: bool) {
        let n = self.n;
        let net = self.pb.network;
        {
            let src = if from_next { &self.next } else { &self.v };
            for j in 0..n {
                self.frac[j] = if self.in_s[j] {
                    ((src[j] + self.dl[j]) / self.dl[j]).clamp(0.0, 1.0)
                } else {
                    1.0
                };
            }
        }
        let (a_cost, chi) = (self.pb.costs.a, self.pb.costs.chi);
        for i in 0..n {
            let src = if from_next { &self.next } else { &self.v };
            let node = i + 1;
            let mut a = self.e[i] + net.claim(node, 0);
            for j in 0..n {
                let d = net.claim(node, j + 1);
                if d > 0.0 {
                    a += d * self.frac[j];
                }
            }
            if let Some(s) = self.pb.equity {
                for j in 0..n {
                    let share = s[i * n + j];
                    if share > 0.0 && !self.in_s[j] && src[j] > 0.0 {
                        a += share * src[j];
                    }
                }
            }
            self.assets[i] = a;
            let out = if self.in_s[i] {
                (1.0 - a_cost) * a - chi - self.dl[i]
            } else if self.forced[i] {
                (a - self.dl[i]).max(0.0)
            } else {
                a - self.dl[i]
            };
            if from_next {
                self.v[i] = out;
            } else {
                self.next[i] = out;
            }
        }
    }

    fn classify(&self, v: &[f64], out: &mut [Zone]) {
        for j in 0..self.n {
            out[j] = if self.in_s[j] {
                let cover = v[j] + self.dl[j];
                if cover <= 0.0 {
                    Zone::Zero
                } else if v[j] >= 0.0 {
                    Zone::Full
                } else {
                    Zone::Partial
                }
            } else if self.track_sign && v[j] > 0.0 {
                Zone::Positive
            } else if self.track_sign {
                Zone::Negative
            } else {
                Zone::Full
            };
        }
    }

    fn scale(&self) -> f64 {
        let vmax = self.v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        self.dl.iter().fold(vmax, |m, &x| m.max(x))
    }

    // Exact fixed point of T_S on the payment regime `zones`.
    fn regime_solution(&self, zones: &[Zone]) -> Option<Vec<f64>> {
        let n = self.n;
        let net = self.pb.network;
        let (a_cost, chi) = (self.pb.costs.a, self.pb.costs.chi);
        let mut m = DMatrix::<f64>::identity(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for i in 0..n {
            let node = i + 1;
            if self.forced[i] && zones[i] == Zone::Negative {
                continue; // V_i = 0
            }
            let alpha = if self.in_s[i] { 1.0 - a_cost } else { 1.0 };
            let beta = if self.in_s[i] { -chi - self.dl[i] } else { -self.dl[i] };
            let mut c = self.e[i] + net.claim(node, 0);
            for j in 0..n {
                let d = net.claim(node, j + 1);
                if d > 0.0 {
                    match zones[j] {
                        Zone::Zero => {}
                        Zone::Partial => {
                            c += d;
                            m[(i, j)] -= alpha * d / self.dl[j];
                        }
                        _ => c += d,
                    }
                }
                if let Some(s) = self.pb.equity {
                    let share = s[i * n + j];
                    if share > 0.0 && zones[j] == Zone::Positive {
                        m[(i, j)] -= alpha * share;
                    }
                }
            }
            rhs[i] = alpha * c + beta;
        }
        let x = m.lu().solve(&rhs)?;
        if x.iter().all(|v| v.is_finite()) {
            Some(x.iter().copied().collect())
        } else {
            None
        }
    }

    // Tries to jump to the exact fixed point for the current regime.
    fn polish(&mut self, descending: bool) -> bool {
        let mut zones = std::mem::take(&mut self.zones);
        self.classify(&self.v, &mut zones);
        let cand = self.regime_solution(&zones);
        self.zones = zones;
        let Some(cand) = cand else { return false };
        let scale = self.scale().max(cand.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        let slack = 1e-12 * scale;
        let ordered = cand.iter().zip(&self.v).all(|(&c, &v)| {
            if descending {
                c <= v + slack
            } else {
                c >= v - slack
            }
        });
        if !ordered {
            return false;
        }
        let mut cz = std::mem::take(&mut self.scratch_zones);
        self.classify(&cand, &mut cz);
        let same = cz == self.zones;
        self.scratch_zones = cz;
        if !same {
            return false;
        }
        let saved = std::mem::replace(&mut self.v, cand);
        self.apply(false);
        let fixed = self.v.iter().zip(&self.next).all(|(a, b)| (a - b).abs() <= slack);
        if !fixed {
            self.v = saved;
            self.apply(false);
            return false;
        }
        true
    }

    // Monotone iteration of T_S from the current `v` to its extreme fixed
    // point in the given direction. Leaves `assets` consistent with `v`.
    fn inner(&mut self, descending: bool) -> Result<(), ClearingError> {
        let mut last = std::mem::take(&mut self.scratch_zones);
        self.classify(&self.v, &mut last);
        self.scratch_zones = last.clone();
        if self.polish(descending) {
            return Ok(());
        }
        for _ in 0..MAX_INNER {
            self.apply(false);
            let mut diff = 0.0f64;
            for i in 0..self.n {
                let nx = if descending {
                    self.next[i].min(self.v[i])
                } else {
                    self.next[i].max(self.v[i])
                };
                diff = diff.max((nx - self.v[i]).abs());
                self.v[i] = nx;
            }
            let mut now = std::mem::take(&mut self.scratch_zones);
            self.classify(&self.v, &mut now);
            let changed = now != last;
            if changed {
                last.copy_from_slice(&now);
            }
            self.scratch_zones = now;
            if changed && self.polish(descending) {
                return Ok(());
            }
            if diff <= EPS_PAY * self.scale() {
                if !self.polish(descending) {
                    self.apply(false);
                }
                return Ok(());
            }
        }
        Err(ClearingError::NoConvergence { iterations: MAX_INNER })
    }

    fn greatest(&mut self) -> Result<usize, ClearingError> {
        let n = self.n;
        // Upper bound: every claim paid in full, no liabilities deducted.
        let base: Vec<f64> = (0..n).map(|i| self.e[i] + self.pb.network.assets(i + 1)).collect();
        self.v = match self.pb.equity.filter(|s| s.iter().any(|&x| x > 0.0)) {
            None => base,
            Some(s) => {
                let m = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - s[i * n + j]);
                let x = m.lu().solve(&DVector::from_vec(base)).ok_or(ClearingError::SingularOwnership)?;
                x.iter().map(|&v| v.max(0.0)).collect()
            }
        };
        let mut rounds = 0;
        loop {
            rounds += 1;
            self.inner(true)?;
            let mut grew = false;
            for i in 0..n {
                if !self.in_s[i] && !self.forced[i] && self.assets[i] < self.dl[i] - self.tol[i] {
                    self.in_s[i] = true;
                    grew = true;
                }
            }
            if !grew {
                return Ok(rounds);
            }
        }
    }

    fn least(&mut self) -> Result<usize, ClearingError> {
        let n = self.n;
        let (a_cost, chi) = (self.pb.costs.a, self.pb.costs.chi);
        for i in 0..n {
            self.in_s[i] = self.dl[i] > 0.0 && !self.forced[i];
            self.v[i] = (1.0 - a_cost) * self.e[i] - chi - self.dl[i];
        }
        let mut rounds = 0;
        loop {
            rounds += 1;
            self.inner(false)?;
            let mut shrank = false;
            for i in 0..n {
                if self.in_s[i] && self.assets[i] >= self.dl[i] - self.tol[i] {
                    self.in_s[i] = false;
                    shrank = true;
                }
            }
            if !shrank {
                return Ok(rounds);
            }
        }
    }

    fn finish(mut self, rounds: usize) -> ClearingSolution {
        let n = self.n;
        let net = self.pb.network;
        let m = n + 1;
        for i in 0..n {
            if !self.in_s[i] && self.v[i] < 0.0 {
                // solvent within tolerance
                self.v[i] = 0.0;
            }
        }
        let mut payments = vec![0.0; m * m];
        for i in 0..m {
            payments[i * m] = net.claim(i, 0);
            for j in 0..n {
                payments[i * m + j + 1] = net.claim(i, j + 1) * self.pay_fraction(j, self.v[j]);
            }
        }
        let costs: Vec<f64> = (0..n)
            .map(|i| if self.in_s[i] { self.pb.costs.cost(self.assets[i]) } else { 0.0 })
            .collect();
        let defaults: Vec<usize> = (0..n).filter(|&i| self.in_s[i]).collect();
        let bailed_out = (0..n)
            .filter(|&i| self.forced[i] && self.assets[i] < self.dl[i] - self.tol[i])
            .collect();

        // Value accruing to node 0: net debt position, outside equity of
        // solvent banks, and the shortfall of banks whose costs exceed assets.
        let mut v0 = payments[..m].iter().sum::<f64>() - net.liabilities(0);
        for j in 0..n {
            if self.in_s[j] {
                let cover = self.v[j] + self.dl[j];
                if cover < 0.0 {
                    v0 += cover;
                }
            } else {
                let held: f64 = self.pb.equity.map_or(0.0, |s| (0..n).map(|i| s[i * n + j]).sum());
                v0 += (1.0 - held) * self.v[j];
            }
        }
        ClearingSolution {
            values: self.v,
            payments,
            defaults,
            costs,
            outside_value: v0,
            investment: self.e.to_vec(),
            assets: self.assets,
            bailed_out,
            rounds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain(d: f64) -> Network {
        Network::build_general(&[
            vec![0.0, d, 0.0],
            vec![0.0, 0.0, 2.0 * d],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap()
    }

    fn costs(a: f64, chi: f64) -> BankruptcyCostSpec {
        BankruptcyCostSpec::new(a, chi).unwrap()
    }

    #[test]
    fn no_banks() {
        let net = Network::new(0, vec![0.0]).unwrap();
        for sel in [Selection::Greatest, Selection::Least] {
            let sol = ClearingProblem::new(&net, costs(0.0, 1.0), sel).solve(&[]).unwrap();
            assert!(sol.values.is_empty() && sol.defaults.is_empty());
            assert_eq!(sol.outside_value, 0.0);
        }
    }

    #[test]
    fn isolated_bank() {
        let net = Network::build_general(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let sol = clear(&net, &[vec![1.0]], &[5.0], &costs(0.0, 1.0), Selection::Greatest).unwrap();
        assert_eq!(sol.values, vec![5.0]);
        assert!(sol.defaults.is_empty());
        assert_eq!(conservation_residual(&sol), 0.0);
    }

    #[test]
    fn two_bank_chain_both_default() {
        // [risky, safe] with the risky asset paying 0
        let q = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let sol = clear(&chain(0.3), &q, &[0.0, 1.05], &costs(0.0, 0.5), Selection::Greatest).unwrap();
        assert_eq!(sol.defaults, vec![0, 1]);
        assert!((sol.values[0] + 0.8).abs() < 1e-15);
        assert!((sol.values[1] + 1.1).abs() < 1e-15);
        assert_eq!(sol.payment(1, 2), 0.0);
        assert_eq!(equity_values(&sol), vec![0.0, 0.0]);
        assert!(conservation_residual(&sol) < 1e-12);
    }

    #[test]
    fn three_asset_single_winner() {
        let d = 1.0;
        let net = Network::build_general(&[
            vec![0.0, d, 0.0, 0.0],
            vec![0.0, 0.0, d, d],
            vec![0.0, 0.0, 0.0, 0.5 * d],
            vec![0.0, 0.0, 0.5 * d, 0.0],
        ])
        .unwrap();
        let r = 1.6;
        let q = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let sol = clear(&net, &q, &[0.0, r, 0.0], &costs(0.0, 0.4), Selection::Greatest).unwrap();
        assert_eq!(sol.defaults, vec![2]);
        // bank 3 keeps 0.5D - chi and splits it pro rata over D and 0.5D
        let from_three = (0.5 * d - 0.4) / 3.0;
        assert!((sol.values[1] - (r + from_three - 1.5 * d)).abs() < 1e-12);
        assert!(sol.values[0] >= 0.0);
        assert_eq!(sol.payment(1, 2), d);
    }

    #[test]
    fn equity_clamp() {
        let sol = ClearingSolution {
            values: vec![-1.0, 2.0],
            payments: vec![0.0; 9],
            defaults: vec![0],
            costs: vec![0.0, 0.0],
            outside_value: 0.0,
            investment: vec![0.0, 0.0],
            assets: vec![0.0, 0.0],
            bailed_out: vec![],
            rounds: 1,
        };
        assert_eq!(equity_values(&sol), vec![0.0, 2.0]);
    }

    #[test]
    fn mutual_default_has_two_equilibria() {
        // Two banks owe each other 1; each holds 0.5 and owes 0.1 outside.
        let net = Network::build_general(&[
            vec![0.0, 0.1, 0.1],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let q = vec![vec![1.0], vec![1.0]];
        let c = costs(0.0, 1.0);
        let hi = clear(&net, &q, &[0.5], &c, Selection::Greatest).unwrap();
        let lo = clear(&net, &q, &[0.5], &c, Selection::Least).unwrap();
        assert!(hi.defaults.is_empty());
        assert!((hi.values[0] - 0.4).abs() < 1e-12);
        assert_eq!(lo.defaults, vec![0, 1]);
        assert!((lo.values[0] - (0.5 - 1.0 - 1.1)).abs() < 1e-12);
        assert!(conservation_residual(&lo) < 1e-12);
    }

    #[test]
    fn forced_bank_pays_in_full() {
        let q = vec![vec![1.0], vec![1.0]];
        let net = chain(0.3);
        let forced = [false, true];
        let c = costs(0.0, 0.5);
        let sol = ClearingProblem::new(&net, c, Selection::Greatest)
            .with_forced(&forced)
            .solve_portfolio(&q, &[0.0])
            .unwrap();
        assert_eq!(sol.values, vec![0.3, 0.0]);
        assert_eq!(sol.bailed_out, vec![1]);
        assert!(sol.defaults.is_empty());
    }

    #[test]
    fn welfare_without_debt() {
        let net = Network::build_general(&[vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]]).unwrap();
        let s = ScenarioSet::independent_two_point(1, 0.5, 2.0, 0.0).unwrap().with_safe_asset(1.05);
        let q = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
        let w = expected_welfare(&net, &q, &s, &costs(0.0, 1.0), Selection::Greatest).unwrap();
        assert!((w.total - 2.1).abs() < 1e-15);
        assert_eq!(w.expected_costs, vec![0.0, 0.0]);
        assert_eq!(w.expected_defaults, 0.0);
    }

    #[test]
    fn bad_inputs() {
        let net = chain(0.3);
        let c = costs(0.0, 0.5);
        assert!(matches!(
            clear(&net, &[vec![1.0]], &[1.0], &c, Selection::Greatest),
            Err(ClearingError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            clear(&net, &[vec![1.0], vec![-1.0]], &[1.0], &c, Selection::Greatest),
            Err(ClearingError::InvalidInput(_))
        ));
    }

    fn arb_instance() -> impl Strategy<Value = (Network, Vec<f64>, BankruptcyCostSpec)> {
        (2usize..6).prop_flat_map(|n| {
            let m = n + 1;
            (
                proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..2.0], m * m),
                proptest::collection::vec(0.0f64..3.0, n),
                prop_oneof![Just(0.0), 0.0f64..1.0],
                0.0f64..2.0,
            )
                .prop_map(move |(mut debt, e, a, chi)| {
                    for i in 0..m {
                        debt[i * m + i] = 0.0;
                        debt[i] = 0.0;
                    }
                    (Network::new(n, debt).unwrap(), e, BankruptcyCostSpec::new(a, chi).unwrap())
                })
        })
    }

    fn check_invariants(net: &Network, sol: &ClearingSolution, c: &BankruptcyCostSpec) -> Result<(), TestCaseError> {
        let n = net.n();
        for j in 0..n {
            let node = j + 1;
            let dl = net.liabilities(node);
            let defaulted = sol.is_default(j);
            prop_assert_eq!(defaulted, sol.values[j] < 0.0);
            for i in 0..=n {
                let face = net.claim(i, node);
                let paid = sol.payment(i, node);
                prop_assert!(paid >= 0.0 && paid <= face + 1e-12);
                if defaulted {
                    let want = face / dl * (sol.values[j] + dl).max(0.0);
                    prop_assert!((paid - want).abs() <= 1e-9 * face.max(1.0));
                } else {
                    prop_assert_eq!(paid, face);
                }
            }
            let want_cost = if defaulted { c.cost(sol.assets[j]) } else { 0.0 };
            prop_assert!((sol.costs[j] - want_cost).abs() < 1e-12);
        }
        Ok(())
    }

    proptest! {
        #[test]
        fn solution_invariants((net, e, c) in arb_instance()) {
            for sel in [Selection::Greatest, Selection::Least] {
                let sol = ClearingProblem::new(&net, c, sel).solve(&e).unwrap();
                check_invariants(&net, &sol, &c)?;
                prop_assert!(sol.rounds <= net.n() + 1);
                prop_assert!(conservation_residual(&sol) < 1e-9);
            }
        }

        #[test]
        fn greatest_dominates_least((net, e, c) in arb_instance()) {
            let hi = ClearingProblem::new(&net, c, Selection::Greatest).solve(&e).unwrap();
            let lo = ClearingProblem::new(&net, c, Selection::Least).solve(&e).unwrap();
            for (h, l) in hi.values.iter().zip(&lo.values) {
                prop_assert!(h + 1e-9 >= *l);
            }
        }

        #[test]
        fn monotone_in_returns((net, e, c) in arb_instance(), bump in proptest::collection::vec(0.0f64..1.0, 5)) {
            let up: Vec<f64> = e.iter().zip(&bump).map(|(x, b)| x + b).collect();
            let base = ClearingProblem::new(&net, c, Selection::Greatest).solve(&e).unwrap();
            let more = ClearingProblem::new(&net, c, Selection::Greatest).solve(&up).unwrap();
            for (a, b) in base.values.iter().zip(&more.values) {
                prop_assert!(a <= &(b + 1e-9));
            }
        }
    }
}
