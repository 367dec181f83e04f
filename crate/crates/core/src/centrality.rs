//! Net financial centrality and bailout centrality.
//!
//! Both measure an expected change in total bankruptcy costs: NFC from
//! moving one bank to a different portfolio, bailout centrality from
//! guaranteeing that one bank pays its debts in full. Both sides of each
//! difference use the same selection rule, and the expectation is taken
//! of the per-scenario difference so that swapping baseline and
//! counterfactual flips the sign exactly.

use rayon::prelude::*;
use serde::Serialize;

use crate::clearing::{ClearingError, ClearingProblem, Selection};
use crate::equity::EquityMatrix;
use crate::network::{BankruptcyCostSpec, Network};
use crate::returns::{pairwise_sum, ScenarioSet};

/// One NFC question: bank `bank` moves from `q[bank]` to `alt_row`.
#[derive(Debug, Clone, Copy)]
pub struct CentralityQuery<'a> {
    pub network: &'a Network,
    pub q: &'a [Vec<f64>],
    pub bank: usize,
    pub alt_row: &'a [f64],
    pub scenarios: &'a ScenarioSet,
    pub costs: BankruptcyCostSpec,
    pub selection: Selection,
    pub equity: Option<&'a EquityMatrix>,
}

impl CentralityQuery<'_> {
    fn problem(&self) -> ClearingProblem<'_> {
        let pb = ClearingProblem::new(self.network, self.costs, self.selection);
        match self.equity {
            Some(s) => pb.with_equity(s.as_slice()),
            None => pb,
        }
    }
}

fn check_bank(network: &Network, q: &[Vec<f64>], bank: usize) -> Result<(), ClearingError> {
    if bank >= network.n() || q.len() != network.n() {
        return Err(ClearingError::InvalidInput(format!(
            "bank position {bank} or {} portfolio rows invalid for {} banks",
            q.len(),
            network.n()
        )));
    }
    Ok(())
}

// E[f(baseline) - f(other)] where each side is total cost in a scenario.
fn expected_difference(
    scenarios: &ScenarioSet,
    base: impl Fn(&[f64]) -> Result<f64, ClearingError>,
    other: impl Fn(&[f64]) -> Result<f64, ClearingError>,
) -> Result<f64, ClearingError> {
    let terms = scenarios
        .points()
        .iter()
        .map(|s| Ok(s.prob * (base(&s.returns)? - other(&s.returns)?)))
        .collect::<Result<Vec<_>, ClearingError>>()?;
    Ok(pairwise_sum(&terms))
}

/// `E[sum_j b_j(q) - sum_j b_j(q_i', q_-i)]`.
pub fn nfc(query: &CentralityQuery<'_>) -> Result<f64, ClearingError> {
    check_bank(query.network, query.q, query.bank)?;
    let pb = query.problem();
    let mut alt = query.q.to_vec();
    alt[query.bank] = query.alt_row.to_vec();
    expected_difference(
        query.scenarios,
        |p| Ok(pb.solve_portfolio(query.q, p)?.total_cost()),
        |p| Ok(pb.solve_portfolio(&alt, p)?.total_cost()),
    )
}

/// `E[sum_j b_j(unassisted) - sum_j b_j(bank i forced to pay in full)]`.
///
/// Forcing a bank to pay shrinks the default set (greatest selection), so
/// with fixed costs only this is nonnegative. With proportional costs it
/// can be negative: a creditor that still defaults now loses a share of
/// the larger payment it receives.
pub fn bailout_centrality(
    network: &Network,
    q: &[Vec<f64>],
    i: usize,
    scenarios: &ScenarioSet,
    costs: &BankruptcyCostSpec,
    selection: Selection,
) -> Result<f64, ClearingError> {
    check_bank(network, q, i)?;
    let pb = ClearingProblem::new(network, *costs, selection);
    let mut forced = vec![false; network.n()];
    forced[i] = true;
    let assisted = pb.with_forced(&forced);
    expected_difference(
        scenarios,
        |p| Ok(pb.solve_portfolio(q, p)?.total_cost()),
        |p| Ok(assisted.solve_portfolio(q, p)?.total_cost()),
    )
}

/// How each bank's counterfactual portfolio is formed.
#[derive(Debug, Clone, PartialEq)]
pub enum CounterfactualRule {
    /// Move the bank's whole capital into the given (safe) asset.
    AllIn { asset: usize },
    /// Explicit counterfactual row per bank.
    Rows(Vec<Vec<f64>>),
}

impl CounterfactualRule {
    fn row(&self, q: &[Vec<f64>], b: usize) -> Vec<f64> {
        match self {
            CounterfactualRule::AllIn { asset } => {
                let mut row = vec![0.0; q[b].len()];
                row[*asset] = q[b].iter().sum();
                row
            }
            CounterfactualRule::Rows(rows) => rows[b].clone(),
        }
    }
}

/// A bank's centralities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CentralityRow {
    pub bank: usize,
    pub nfc: f64,
    pub bailout: f64,
}

/// NFC and bailout centrality of every bank, by bank position.
pub fn centrality_report(
    network: &Network,
    q: &[Vec<f64>],
    rule: &CounterfactualRule,
    scenarios: &ScenarioSet,
    costs: &BankruptcyCostSpec,
    selection: Selection,
) -> Result<Vec<CentralityRow>, ClearingError> {
    if let CounterfactualRule::Rows(rows) = rule {
        if rows.len() != network.n() {
            return Err(ClearingError::DimensionMismatch {
                what: "counterfactual rows",
                expected: network.n(),
                got: rows.len(),
            });
        }
    }
    if let CounterfactualRule::AllIn { asset } = rule {
        if q.iter().any(|row| *asset >= row.len()) {
            return Err(ClearingError::InvalidInput(format!("asset {asset} out of range")));
        }
    }
    (0..network.n())
        .into_par_iter()
        .map(|b| {
            let alt = rule.row(q, b);
            let query = CentralityQuery {
                network,
                q,
                bank: b,
                alt_row: &alt,
                scenarios,
                costs: *costs,
                selection,
                equity: None,
            };
            Ok(CentralityRow {
                bank: b,
                nfc: nfc(&query)?,
                bailout: bailout_centrality(network, q, b, scenarios, costs, selection)?,
            })
        })
        .collect()
}

/// Bank positions with their NFC, sorted by NFC descending, ties by index.
pub fn nfc_ranking(
    network: &Network,
    q: &[Vec<f64>],
    rule: &CounterfactualRule,
    scenarios: &ScenarioSet,
    costs: &BankruptcyCostSpec,
    selection: Selection,
) -> Result<Vec<(usize, f64)>, ClearingError> {
    let mut out = (0..network.n())
        .map(|b| {
            let alt = rule.row(q, b);
            let query = CentralityQuery {
                network,
                q,
                bank: b,
                alt_row: &alt,
                scenarios,
                costs: *costs,
                selection,
                equity: None,
            };
            Ok((b, nfc(&query)?))
        })
        .collect::<Result<Vec<_>, ClearingError>>()?;
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out)
}
