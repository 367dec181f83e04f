//! Debt networks with an outside node.
//!
//! Node 0 is the outside sector (depositors, outside investors); banks are
//! nodes `1..=n`. The face value `D_ij` is what node `j` owes node `i`, so
//! rows are creditors and columns are debtors. The matrix is stored
//! row-major over all `n + 1` nodes, which keeps proportional rationing
//! uniform: outside creditors are just another row.
//!
//! Everywhere else in the crate, per-bank vectors (values, portfolios,
//! strategy spaces) are indexed by bank position `b`, which is node `b + 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while building or loading a network.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    /// A debt entry is negative or not finite.
    #[error("debt entry ({row}, {col}) = {value} must be finite and nonnegative")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    /// A node holds a claim on itself.
    #[error("node {node} has a self-claim of {value}")]
    NonzeroDiagonal { node: usize, value: f64 },
    /// The matrix does not have `(n + 1)^2` entries or is not square.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// A constructor spec violates its own invariants.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    /// Tier counterparty sets do not form a nested split graph.
    #[error("tiers are not nested: {0}")]
    NotNested(String),
    /// Too few banks for the requested topology.
    #[error("need at least {min} banks, got {n}")]
    TooSmall { min: usize, n: usize },
    /// Malformed JSON input.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

impl From<serde_json::Error> for NetworkError {
    fn from(e: serde_json::Error) -> Self {
        NetworkError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// A validated debt network over `n` banks plus the outside node.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    debt: Vec<f64>,
    labels: Option<Vec<String>>,
    assets: Vec<f64>,
    liabilities: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    n: usize,
    debt: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl Network {
    /// Builds a network from a row-major `(n + 1)^2` matrix.
    pub fn new(n: usize, debt: Vec<f64>) -> Result<Self, NetworkError> {
        let m = n + 1;
        if debt.len() != m * m {
            return Err(NetworkError::DimensionMismatch {
                expected: m * m,
                got: debt.len(),
            });
        }
        for i in 0..m {
            for j in 0..m {
                let v = debt[i * m + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(NetworkError::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                if i == j && v != 0.0 {
                    return Err(NetworkError::NonzeroDiagonal { node: i, value: v });
                }
            }
        }
        let assets = (0..m).map(|i| debt[i * m..(i + 1) * m].iter().sum()).collect();
        let liabilities = (0..m).map(|j| (0..m).map(|i| debt[i * m + j]).sum()).collect();
        Ok(Network {
            n,
            debt,
            labels: None,
            assets,
            liabilities,
        })
    }

    /// Builds a network from a square matrix given as rows.
    pub fn build_general(matrix: &[Vec<f64>]) -> Result<Self, NetworkError> {
        let m = matrix.len();
        if m == 0 {
            return Err(NetworkError::DimensionMismatch { expected: 1, got: 0 });
        }
        let mut flat = Vec::with_capacity(m * m);
        for row in matrix {
            if row.len() != m {
                return Err(NetworkError::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Network::new(m - 1, flat)
    }

    /// Attaches bank names; `labels[b]` names node `b + 1`.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, NetworkError> {
        if labels.len() != self.n {
            return Err(NetworkError::DimensionMismatch {
                expected: self.n,
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Number of banks (excluding node 0).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nodes including node 0.
    pub fn nodes(&self) -> usize {
        self.n + 1
    }

    /// Face value node `debtor` owes node `creditor`.
    #[inline]
    pub fn claim(&self, creditor: usize, debtor: usize) -> f64 {
        self.debt[creditor * (self.n + 1) + debtor]
    }

    /// The full row-major matrix.
    pub fn debt(&self) -> &[f64] {
        &self.debt
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// `D_i^A`: total face value owed to node `i`.
    #[inline]
    pub fn assets(&self, node: usize) -> f64 {
        self.assets[node]
    }

    /// `D_i^L`: total face value node `i` owes.
    #[inline]
    pub fn liabilities(&self, node: usize) -> f64 {
        self.liabilities[node]
    }

    /// Banks that both owe node 0 and are owed by it. Canonical constructors
    /// never produce these; general networks may.
    pub fn outside_two_way(&self) -> Vec<usize> {
        (1..=self.n)
            .filter(|&i| self.claim(0, i) > 0.0 && self.claim(i, 0) > 0.0)
            .collect()
    }

    /// Net position of node 0: what it is owed minus what it owes.
    pub fn outside_net_position(&self) -> f64 {
        self.assets[0] - self.liabilities[0]
    }

    /// For each bank position, whether the bank lies on a directed cycle of
    /// interbank debt (node 0 excluded).
    pub fn on_debt_cycle(&self) -> Vec<bool> {
        let reach = self.bank_reachability(|net, i, j| net.claim(i, j) > 0.0);
        (0..self.n).map(|b| reach[b * self.n + b]).collect()
    }

    // Transitive closure over banks; `edge(net, i, j)` takes node indices and
    // an edge b -> c means a claim of c's node on b's node.
    fn bank_reachability(&self, edge: impl Fn(&Self, usize, usize) -> bool) -> Vec<bool> {
        let n = self.n;
        let mut r = vec![false; n * n];
        for b in 0..n {
            for c in 0..n {
                // path direction: debtor b -> creditor c
                r[b * n + c] = edge(self, c + 1, b + 1);
            }
        }
        for k in 0..n {
            for b in 0..n {
                if r[b * n + k] {
                    for c in 0..n {
                        if r[k * n + c] {
                            r[b * n + c] = true;
                        }
                    }
                }
            }
        }
        r
    }

    /// Parses the JSON form `{"n", "debt", "labels"}`.
    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let file: NetworkFile = serde_json::from_str(text)?;
        let net = Network::new(file.n, file.debt)?;
        match file.labels {
            Some(l) => net.with_labels(l),
            None => Ok(net),
        }
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            n: self.n,
            debt: self.debt.clone(),
            labels: self.labels.clone(),
        };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }
}

/// Bankruptcy cost `b_i = chi + a * assets` charged on default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankruptcyCostSpec {
    pub a: f64,
    pub chi: f64,
}

impl BankruptcyCostSpec {
    pub fn new(a: f64, chi: f64) -> Result<Self, NetworkError> {
        if !(0.0..=1.0).contains(&a) || !(chi >= 0.0) || !chi.is_finite() {
            return Err(NetworkError::InvalidSpec(format!(
                "bankruptcy costs need 0 <= a <= 1 and chi >= 0, got a={a}, chi={chi}"
            )));
        }
        Ok(BankruptcyCostSpec { a, chi })
    }

    /// Cost incurred by a defaulting bank with the given assets.
    #[inline]
    pub fn cost(&self, assets: f64) -> f64 {
        self.chi + self.a * assets
    }
}

/// Primitive assets and which of them each bank may hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetUniverse {
    pub k: usize,
    /// `available[b]`: 0-based asset ids open to bank position `b`.
    pub available: Vec<Vec<usize>>,
    pub capital: Vec<f64>,
}

impl AssetUniverse {
    pub fn new(k: usize, available: Vec<Vec<usize>>, capital: Vec<f64>) -> Result<Self, NetworkError> {
        if available.len() != capital.len() {
            return Err(NetworkError::DimensionMismatch {
                expected: available.len(),
                got: capital.len(),
            });
        }
        for (b, set) in available.iter().enumerate() {
            if set.is_empty() || set.iter().any(|&a| a >= k) {
                return Err(NetworkError::InvalidSpec(format!(
                    "bank position {b} has an empty or out-of-range asset set"
                )));
            }
        }
        if capital.iter().any(|&c| !(c > 0.0)) {
            return Err(NetworkError::InvalidSpec("capital must be positive".into()));
        }
        Ok(AssetUniverse { k, available, capital })
    }

    /// Every bank may hold every asset, with unit capital.
    pub fn open(n: usize, k: usize) -> Self {
        AssetUniverse {
            k,
            available: vec![(0..k).collect(); n],
            capital: vec![1.0; n],
        }
    }

    /// Checks budget and availability for a portfolio row.
    pub fn row_feasible(&self, b: usize, row: &[f64]) -> bool {
        if row.len() != self.k {
            return false;
        }
        let mut total = 0.0;
        for (a, &x) in row.iter().enumerate() {
            if !(x >= 0.0) {
                return false;
            }
            if x > 0.0 && !self.available[b].contains(&a) {
                return false;
            }
            total += x;
        }
        total <= self.capital[b] * (1.0 + 1e-12)
    }
}

/// Core clique with peripheral depositors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorePeripherySpec {
    pub n_c: usize,
    pub n_p: usize,
    pub d: f64,
    pub d0: f64,
}

/// One tier of a nested split core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierSpec {
    pub size: usize,
    /// 0-based indices of tiers this tier's banks are linked to. A tier
    /// listing itself is internally complete.
    pub counterparty_tiers: Vec<usize>,
}

/// Nested split core. `tiers[0]` is the lowest tier, the last is the top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedSplitSpec {
    pub tiers: Vec<TierSpec>,
    pub d: f64,
    pub d0: f64,
    pub n_p: usize,
}

/// Output of [`build_nested_split`]: the network and its partition.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedSplit {
    pub network: Network,
    /// Tier index for each core bank position.
    pub tier_of: Vec<usize>,
    /// Core bank positions in the clique, in index order.
    pub clique: Vec<usize>,
    /// Core bank positions in the independent set, in index order.
    pub independent: Vec<usize>,
    /// Number of tiers below the clique (the cut between the two sets).
    pub clique_cut: usize,
    /// Core degree of each tier.
    pub tier_degree: Vec<usize>,
}

fn check_amounts(d: f64, d0: f64) -> Result<(), NetworkError> {
    if !(d > 0.0 && d.is_finite() && d0 > 0.0 && d0.is_finite()) {
        return Err(NetworkError::InvalidSpec(format!(
            "need D > 0 and D_0 > 0, got D={d}, D_0={d0}"
        )));
    }
    Ok(())
}

// Lays out a core of `n_c` banks (nodes 1..=n_c) linked by `link`, each
// owing `d0` to its own peripheral banks (or to node 0 when there is no
// periphery). Peripheral banks pass their inflow through to node 0.
fn core_with_periphery(
    n_c: usize,
    n_p: usize,
    d: f64,
    d0: f64,
    link: impl Fn(usize, usize) -> bool,
) -> Result<Network, NetworkError> {
    if n_c == 0 {
        return Err(NetworkError::InvalidSpec("core must be nonempty".into()));
    }
    if n_p % n_c != 0 {
        return Err(NetworkError::InvalidSpec(format!(
            "n_p = {n_p} is not a multiple of n_c = {n_c}"
        )));
    }
    let n = n_c + n_p;
    let m = n + 1;
    let mut debt = vec![0.0; m * m];
    for b in 0..n_c {
        for c in 0..n_c {
            if b != c && link(b, c) {
                debt[(b + 1) * m + (c + 1)] = d;
            }
        }
    }
    let per = n_p / n_c;
    for b in 0..n_c {
        if per == 0 {
            debt[b + 1] = d0;
            continue;
        }
        let share = d0 / per as f64;
        for k in 0..per {
            let p = n_c + 1 + b * per + k;
            debt[p * m + (b + 1)] = share;
            debt[p] = share;
        }
    }
    Network::new(n, debt)
}

/// Core clique with mutual claims `D`; each core bank owes `D_0` split
/// equally over its `n_p / n_c` peripheral banks, which owe their full
/// inflow to node 0. With `n_p = 0` core banks owe `D_0` to node 0 directly.
pub fn build_core_periphery(spec: &CorePeripherySpec) -> Result<Network, NetworkError> {
    check_amounts(spec.d, spec.d0)?;
    core_with_periphery(spec.n_c, spec.n_p, spec.d, spec.d0, |_, _| true)
}

/// Builds a nested split core. Banks are numbered from the top tier down,
/// so the clique occupies the lowest core indices.
pub fn build_nested_split(spec: &NestedSplitSpec) -> Result<NestedSplit, NetworkError> {
    check_amounts(spec.d, spec.d0)?;
    let l = spec.tiers.len();
    if l == 0 {
        return Err(NetworkError::InvalidSpec("no tiers".into()));
    }
    let mut sets: Vec<Vec<bool>> = Vec::with_capacity(l);
    for (t, tier) in spec.tiers.iter().enumerate() {
        if tier.size == 0 {
            return Err(NetworkError::InvalidSpec(format!("tier {t} is empty")));
        }
        let mut s = vec![false; l];
        for &u in &tier.counterparty_tiers {
            if u >= l {
                return Err(NetworkError::InvalidSpec(format!("tier {t} lists unknown tier {u}")));
            }
            s[u] = true;
        }
        sets.push(s);
    }
    for a in 0..l {
        for b in 0..l {
            if sets[a][b] != sets[b][a] {
                return Err(NetworkError::NotNested(format!("tiers {a} and {b} disagree on their link")));
            }
        }
    }
    if sets[l - 1].iter().any(|&x| !x) {
        return Err(NetworkError::NotNested("top tier must link to every tier".into()));
    }
    let subset = |a: &[bool], b: &[bool]| a.iter().zip(b).all(|(&x, &y)| !x || y);
    for lo in 0..l {
        for hi in lo + 1..l {
            if !subset(&sets[lo], &sets[hi]) || sets[lo] == sets[hi] {
                return Err(NetworkError::NotNested(format!(
                    "counterparties of tier {lo} are not a strict subset of tier {hi}'s"
                )));
            }
        }
    }
    // Self-linked tiers form the clique and must be an upper segment.
    let clique_cut = (0..l).find(|&t| sets[t][t]).unwrap_or(l);
    if (clique_cut..l).any(|t| !sets[t][t]) {
        return Err(NetworkError::NotNested("self-linked tiers must sit above the rest".into()));
    }
    for t in 0..clique_cut {
        if (0..clique_cut).any(|u| sets[t][u]) {
            return Err(NetworkError::NotNested(format!(
                "independent tier {t} links below the clique"
            )));
        }
    }
    let tier_degree: Vec<usize> = (0..l)
        .map(|t| {
            let raw: usize = (0..l).filter(|&u| sets[t][u]).map(|u| spec.tiers[u].size).sum();
            raw - usize::from(sets[t][t])
        })
        .collect();
    if tier_degree.windows(2).any(|w| w[0] >= w[1]) {
        return Err(NetworkError::NotNested("tier degrees must strictly increase".into()));
    }

    let mut tier_of = Vec::new();
    for t in (0..l).rev() {
        tier_of.extend(std::iter::repeat(t).take(spec.tiers[t].size));
    }
    let n_c = tier_of.len();
    let network = core_with_periphery(n_c, spec.n_p, spec.d, spec.d0, |b, c| {
        sets[tier_of[b]][tier_of[c]]
    })?;
    let clique = (0..n_c).filter(|&b| tier_of[b] >= clique_cut).collect();
    let independent = (0..n_c).filter(|&b| tier_of[b] < clique_cut).collect();
    Ok(NestedSplit {
        network,
        tier_of,
        clique,
        independent,
        clique_cut,
        tier_degree,
    })
}

/// Star: bank 1 is the center with mutual claims `D` to every spoke; every
/// bank owes `outside_debt` to node 0.
pub fn build_star(n: usize, d: f64, outside_debt: f64) -> Result<Network, NetworkError> {
    if n < 2 {
        return Err(NetworkError::TooSmall { min: 2, n });
    }
    let m = n + 1;
    let mut debt = vec![0.0; m * m];
    for j in 2..=n {
        debt[m + j] = d;
        debt[j * m + 1] = d;
    }
    for j in 1..=n {
        debt[j] = outside_debt;
    }
    Network::new(n, debt)
}

/// Directed wheel: bank 1 owes `D` to each of banks `2..=n`; bank `j` owes
/// `2D` to bank `j + 1` and bank `n` owes `2D` to bank 2; every bank owes
/// `outside_debt` to node 0.
pub fn build_directed_wheel(n: usize, d: f64, outside_debt: f64) -> Result<Network, NetworkError> {
    if n < 4 {
        return Err(NetworkError::TooSmall { min: 4, n });
    }
    let m = n + 1;
    let mut debt = vec![0.0; m * m];
    for j in 2..=n {
        debt[j * m + 1] = d;
        let next = if j == n { 2 } else { j + 1 };
        debt[next * m + j] = 2.0 * d;
    }
    for j in 1..=n {
        debt[j] = outside_debt;
    }
    Network::new(n, debt)
}
