//! FDR estimation and control over a discovered graph.
//!
//! Hypotheses are the distinct identifiers left in the ledger; each carries
//! one p-value bound and the edge marks it asserts. The Benjamini-Yekutieli
//! estimator `m·α·C(m) / max(R, 1)` with `C(m) = Σ 1/i` is valid under
//! arbitrary dependence between the bounds.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{shd, EdgeMark, GraphError, MixedGraph};
use crate::ledger::{HypothesisId, PValueLedger};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdrError {
    #[error("no p-values")]
    Empty,
    #[error("p-value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("level {0} outside (0, 1)")]
    BadLevel(f64),
    #[error("identifier {0} appears twice")]
    DuplicateIdentifier(HypothesisId),
    #[error("edge {0}-{1} is not covered by any hypothesis")]
    Uncovered(usize, usize),
    #[error("edge {0}-{1} is bidirected")]
    Bidirected(usize, usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Edge mark asserted by a hypothesis, read in the `(a, b)` orientation.
/// Directed assertions are always stored as `a -> b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct AssertedEdge {
    pub a: usize,
    pub b: usize,
    pub mark: EdgeMark,
}

impl AssertedEdge {
    /// Undirected assertions need only the adjacency; directed ones need
    /// the exact orientation.
    pub fn holds_in(&self, truth: &MixedGraph) -> bool {
        match self.mark {
            EdgeMark::Undirected => truth.adjacent(self.a, self.b),
            mark => truth.mark(self.a, self.b) == mark,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub id: HypothesisId,
    pub p_value: f64,
    pub edges: Vec<AssertedEdge>,
}

impl Hypothesis {
    pub fn is_true_discovery(&self, truth: &MixedGraph) -> bool {
        self.edges.iter().all(|e| e.holds_in(truth))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HypothesisSet {
    entries: Vec<Hypothesis>,
}

impl HypothesisSet {
    pub fn new(mut entries: Vec<Hypothesis>) -> Result<Self, FdrError> {
        entries.sort_by_key(|h| h.id);
        for w in entries.windows(2) {
            if w[0].id == w[1].id {
                return Err(FdrError::DuplicateIdentifier(w[0].id));
            }
        }
        for h in &entries {
            if !(0.0..=1.0).contains(&h.p_value) {
                return Err(FdrError::OutOfRange(h.p_value));
            }
        }
        Ok(Self { entries })
    }

    /// Collects the final bounds of a run. Edges sharing an identifier form
    /// one hypothesis whose p-value is the largest of their bounds.
    pub fn from_run(graph: &MixedGraph, ledger: &PValueLedger) -> Result<Self, FdrError> {
        let mut groups: BTreeMap<HypothesisId, Hypothesis> = BTreeMap::new();
        for (lo, hi, mark) in graph.edges() {
            let (a, b, asserted) = match mark {
                EdgeMark::Undirected => (lo, hi, EdgeMark::Undirected),
                EdgeMark::DirectedForward => (lo, hi, EdgeMark::DirectedForward),
                EdgeMark::DirectedBackward => (hi, lo, EdgeMark::DirectedForward),
                EdgeMark::Bidirected => return Err(FdrError::Bidirected(lo, hi)),
                EdgeMark::Absent => unreachable!(),
            };
            let (Some(id), Some(p)) = (ledger.identifier(a, b), ledger.p2(a, b)) else {
                return Err(FdrError::Uncovered(lo, hi));
            };
            let h = groups.entry(id).or_insert(Hypothesis {
                id,
                p_value: p,
                edges: Vec::new(),
            });
            h.p_value = h.p_value.max(p);
            h.edges.push(AssertedEdge { a, b, mark: asserted });
        }
        Self::new(groups.into_values().collect())
    }

    pub fn entries(&self) -> &[Hypothesis] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn p_values(&self) -> Vec<f64> {
        self.entries.iter().map(|h| h.p_value).collect()
    }

    pub fn get(&self, id: HypothesisId) -> Option<&Hypothesis> {
        self.entries
            .binary_search_by_key(&id, |h| h.id)
            .ok()
            .map(|i| &self.entries[i])
    }
}

/// `Σ_{i=1}^{m} 1/i` with compensated summation.
pub fn harmonic(m: usize) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for i in 1..=m {
        let x = 1.0 / i as f64;
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn validate(pvals: &[f64]) -> Result<(), FdrError> {
    if pvals.is_empty() {
        return Err(FdrError::Empty);
    }
    match pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(&p) => Err(FdrError::OutOfRange(p)),
        None => Ok(()),
    }
}

fn estimate_unchecked(pvals: &[f64], c: f64, alpha: f64) -> f64 {
    let r = pvals.iter().filter(|&&p| p <= alpha).count().max(1);
    pvals.len() as f64 * alpha * c / r as f64
}

/// The BY estimate at threshold `alpha`. Not clamped to 1.
pub fn by_estimate(pvals: &[f64], alpha: f64) -> Result<f64, FdrError> {
    validate(pvals)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(FdrError::OutOfRange(alpha));
    }
    Ok(estimate_unchecked(pvals, harmonic(pvals.len()), alpha))
}

/// Largest threshold whose BY estimate stays at or below `q`; 0 when no
/// threshold that rejects anything qualifies.
pub fn by_alpha_star(pvals: &[f64], q: f64) -> Result<f64, FdrError> {
    validate(pvals)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(FdrError::BadLevel(q));
    }
    let m = pvals.len();
    let c = harmonic(m);
    let mc = m as f64 * c;
    let mut sorted = pvals.to_vec();
    sorted.sort_by(f64::total_cmp);
    for k in (1..=m).rev() {
        let alpha = q * k as f64 / mc;
        if sorted[k - 1] > alpha {
            continue;
        }
        // undo any upward rounding without leaving the k-th segment
        let mut a = alpha;
        for _ in 0..8 {
            if a < sorted[k - 1] || estimate_unchecked(pvals, c, a) <= q {
                break;
            }
            a = a.next_down();
        }
        if a >= sorted[k - 1] && estimate_unchecked(pvals, c, a) <= q {
            return Ok(a);
        }
    }
    Ok(0.0)
}

/// Removes every edge asserted by a hypothesis with `p > alpha_star`.
pub fn prune_graph(
    graph: &MixedGraph,
    hypotheses: &HypothesisSet,
    alpha_star: f64,
) -> Result<MixedGraph, FdrError> {
    let n = graph.vertex_count();
    let mut covered = vec![false; n * n];
    let mut pruned = graph.clone();
    for h in hypotheses.entries() {
        for e in &h.edges {
            if e.a >= n || e.b >= n {
                return Err(GraphError::VertexOutOfRange {
                    vertex: e.a.max(e.b),
                    count: n,
                }
                .into());
            }
            covered[e.a.min(e.b) * n + e.a.max(e.b)] = true;
            if h.p_value > alpha_star && pruned.adjacent(e.a, e.b) {
                pruned.remove_edge(e.a, e.b);
            }
        }
    }
    if let Some((a, b, _)) = graph.edges().find(|&(a, b, _)| !covered[a * n + b]) {
        return Err(FdrError::Uncovered(a, b));
    }
    Ok(pruned)
}

/// `count` equispaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| {
                if i == count - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

pub fn default_q_grid() -> Vec<f64> {
    linspace(0.001, 0.1, 100)
}

pub fn default_alpha_grid() -> Vec<f64> {
    linspace(1e-10, 0.1, 100)
}

/// `V / max(R, 1)` at threshold `alpha`.
pub fn realized_fdr(hypotheses: &HypothesisSet, truth: &MixedGraph, alpha: f64) -> f64 {
    let (mut r, mut v) = (0usize, 0usize);
    for h in hypotheses.entries() {
        if h.p_value <= alpha {
            r += 1;
            if !h.is_true_discovery(truth) {
                v += 1;
            }
        }
    }
    v as f64 / r.max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiasMetrics {
    /// Mean `max(FDR(α*) - q, 0)` over the q grid.
    pub uc: f64,
    /// Mean `max(q - FDR(α*), 0)` over the q grid.
    pub oc: f64,
    /// Mean `max(FDR(α) - estimate(α), 0)` over the α grid.
    pub ue: f64,
    /// Mean `max(estimate(α) - FDR(α), 0)` over the α grid.
    pub oe: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdrConfig {
    /// Level used for pruning.
    pub q: f64,
    pub q_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
}

impl Default for FdrConfig {
    fn default() -> Self {
        Self {
            q: 0.1,
            q_grid: default_q_grid(),
            alpha_grid: default_alpha_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdrReport {
    pub alpha_grid: Vec<f64>,
    /// BY estimate at each α grid point.
    pub estimates: Vec<f64>,
    pub q: f64,
    pub alpha_star: f64,
    pub pruned_graph: MixedGraph,
    /// Realized FDR at `alpha_star`, when a truth was given.
    pub realized_fdr: Option<f64>,
    /// Realized FDR at each α grid point, when a truth was given.
    pub realized_curve: Option<Vec<f64>>,
    pub metrics: Option<BiasMetrics>,
    /// SHD between the unpruned estimate and the truth.
    pub shd: Option<usize>,
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len();
    if n == 0 {
        0.0
    } else {
        v.sum::<f64>() / n as f64
    }
}

/// Estimates, controls and, given a truth, scores a run.
pub fn evaluate(
    graph: &MixedGraph,
    hypotheses: &HypothesisSet,
    truth: Option<&MixedGraph>,
    cfg: &FdrConfig,
) -> Result<FdrReport, FdrError> {
    if let Some(t) = truth {
        if t.vertex_count() != graph.vertex_count() {
            return Err(GraphError::SizeMismatch {
                left: graph.vertex_count(),
                right: t.vertex_count(),
            }
            .into());
        }
    }
    let pvals = hypotheses.p_values();
    let alpha_star_at = |q: f64| -> Result<f64, FdrError> {
        if pvals.is_empty() {
            Ok(0.0)
        } else {
            by_alpha_star(&pvals, q)
        }
    };
    let estimates: Vec<f64> = cfg
        .alpha_grid
        .iter()
        .map(|&a| if pvals.is_empty() { Ok(0.0) } else { by_estimate(&pvals, a) })
        .collect::<Result<_, _>>()?;
    let alpha_star = alpha_star_at(cfg.q)?;
    let pruned_graph = prune_graph(graph, hypotheses, alpha_star)?;

    let mut report = FdrReport {
        alpha_grid: cfg.alpha_grid.clone(),
        estimates,
        q: cfg.q,
        alpha_star,
        pruned_graph,
        realized_fdr: None,
        realized_curve: None,
        metrics: None,
        shd: None,
    };
    let Some(truth) = truth else {
        return Ok(report);
    };

    let curve: Vec<f64> = cfg
        .alpha_grid
        .iter()
        .map(|&a| realized_fdr(hypotheses, truth, a))
        .collect();
    let mut uc = Vec::with_capacity(cfg.q_grid.len());
    let mut oc = Vec::with_capacity(cfg.q_grid.len());
    for &q in &cfg.q_grid {
        let fdr = realized_fdr(hypotheses, truth, alpha_star_at(q)?);
        uc.push((fdr - q).max(0.0));
        oc.push((q - fdr).max(0.0));
    }
    let ue = curve.iter().zip(&report.estimates).map(|(f, e)| (f - e).max(0.0));
    let oe = curve.iter().zip(&report.estimates).map(|(f, e)| (e - f).max(0.0));
    report.metrics = Some(BiasMetrics {
        uc: mean(uc.into_iter()),
        oc: mean(oc.into_iter()),
        ue: mean(ue),
        oe: mean(oe),
    });
    report.realized_fdr = Some(realized_fdr(hypotheses, truth, alpha_star));
    report.realized_curve = Some(curve);
    report.shd = Some(shd(graph, truth)?);
    Ok(report)
}
