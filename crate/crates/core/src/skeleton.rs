//! Skeleton discovery.
//!
//! Two modes share one ledger layout:
//!
//! * [`SkeletonMode::Stable`] snapshots every adjacency set at the start of a
//!   level and conditions only on snapshot subsets, which makes the result
//!   independent of the processing order.
//! * [`SkeletonMode::Legacy`] conditions on the live neighbourhood, so an
//!   early (possibly wrong) deletion changes which tests later pairs see.
//!
//! In stable mode each level runs every test of every ordered pair against
//! the snapshot in parallel, then a single coordinator replays the results
//! in pair order. The replay is what a sequential run would do, so output is
//! independent of the thread count. Every size-`l` set that separated the
//! pair in either direction is kept as a sepset; recording only the first
//! one would make the sepsets depend on which direction ran first.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::citest::{CiError, CiTest};
use crate::graph::MixedGraph;
use crate::subsets;

pub use crate::ledger::PValueLedger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SkeletonMode {
    #[default]
    Stable,
    Legacy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonConfig {
    pub alpha: f64,
    /// Largest conditioning set; `None` searches until no pair has enough
    /// neighbours.
    pub l_max: Option<usize>,
    pub mode: SkeletonMode,
    /// Vertex processing order (a permutation); identity when `None`.
    pub order: Option<Vec<usize>>,
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            l_max: Some(2),
            mode: SkeletonMode::Stable,
            order: None,
        }
    }
}

impl SkeletonConfig {
    fn ranks(&self, d: usize) -> Result<Vec<usize>, CiError> {
        let order: Vec<usize> = match &self.order {
            Some(o) => o.clone(),
            None => (0..d).collect(),
        };
        let mut rank = vec![usize::MAX; d];
        for (r, &v) in order.iter().enumerate() {
            if v >= d || rank[v] != usize::MAX {
                return Err(CiError::InvalidQuery(
                    "processing order is not a permutation of the variables".into(),
                ));
            }
            rank[v] = r;
        }
        if order.len() != d {
            return Err(CiError::InvalidQuery(
                "processing order is not a permutation of the variables".into(),
            ));
        }
        Ok(rank)
    }
}

/// Runs skeleton search from the complete graph and finalizes the ledger.
pub fn discover_skeleton<T: CiTest + ?Sized>(
    tester: &T,
    config: &SkeletonConfig,
) -> Result<(MixedGraph, PValueLedger), CiError> {
    let d = tester.variable_count();
    if d < 2 {
        return Err(CiError::InvalidQuery("need at least two variables".into()));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(CiError::InvalidQuery(format!(
            "alpha must lie in (0, 1), got {}",
            config.alpha
        )));
    }
    let rank = config.ranks(d)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by_key(|&v| rank[v]);

    let mut graph = MixedGraph::complete(d);
    let mut ledger = PValueLedger::new(d);
    let mut l = 0;
    loop {
        match config.mode {
            SkeletonMode::Stable => {
                stable_level(tester, config.alpha, l, &order, &rank, &mut graph, &mut ledger)?
            }
            SkeletonMode::Legacy => {
                legacy_level(tester, config.alpha, l, &order, &rank, &mut graph, &mut ledger)?
            }
        }
        if config.l_max.is_some_and(|m| l >= m) {
            break;
        }
        let more = (0..d).any(|a| {
            let deg = graph.neighbors(a).len();
            deg >= 1 && deg - 1 > l
        });
        if !more {
            break;
        }
        l += 1;
    }
    finalize_edge_pvalues(&graph, &mut ledger);
    Ok((graph, ledger))
}

fn sorted_by_rank(mut v: Vec<usize>, rank: &[usize]) -> Vec<usize> {
    v.sort_by_key(|&x| rank[x]);
    v
}

type PairTests = Vec<(Vec<usize>, f64)>;

fn stable_level<T: CiTest + ?Sized>(
    tester: &T,
    alpha: f64,
    l: usize,
    order: &[usize],
    rank: &[usize],
    graph: &mut MixedGraph,
    ledger: &mut PValueLedger,
) -> Result<(), CiError> {
    let snapshot: Vec<Vec<usize>> = (0..graph.vertex_count())
        .map(|v| sorted_by_rank(graph.neighbors(v), rank))
        .collect();
    let mut pairs = Vec::new();
    for &a in order {
        for &b in &snapshot[a] {
            if snapshot[a].len() > l {
                pairs.push((a, b));
            }
        }
    }

    let results: Vec<PairTests> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let cands: Vec<usize> = snapshot[a].iter().copied().filter(|&v| v != b).collect();
            subsets::of_size(&cands, l)
                .map(|s| tester.test(a, b, &s).map(|r| (s, r.p_value)))
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let position: HashMap<(usize, usize), usize> =
        pairs.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    for (idx, &(a, b)) in pairs.iter().enumerate() {
        if !graph.adjacent(a, b) {
            continue;
        }
        let separating: Vec<&Vec<usize>> = results[idx]
            .iter()
            .filter(|(_, p)| *p > alpha)
            .map(|(s, _)| s)
            .collect();
        if separating.is_empty() {
            for &(_, p) in &results[idx] {
                ledger.push_p1(a, b, p);
            }
            continue;
        }
        graph.remove_edge(a, b);
        ledger.clear_p1(a, b);
        for s in separating {
            ledger.add_sepset(a, b, s);
        }
        // the reverse direction saw the same snapshot level
        if let Some(&rev) = position.get(&(b, a)) {
            for (s, p) in &results[rev] {
                if *p > alpha {
                    ledger.add_sepset(a, b, s);
                }
            }
        }
    }
    Ok(())
}

fn legacy_level<T: CiTest + ?Sized>(
    tester: &T,
    alpha: f64,
    l: usize,
    order: &[usize],
    rank: &[usize],
    graph: &mut MixedGraph,
    ledger: &mut PValueLedger,
) -> Result<(), CiError> {
    for &a in order {
        for b in sorted_by_rank(graph.neighbors(a), rank) {
            if !graph.adjacent(a, b) {
                continue;
            }
            let cands: Vec<usize> = sorted_by_rank(graph.neighbors(a), rank)
                .into_iter()
                .filter(|&v| v != b)
                .collect();
            if cands.len() < l {
                continue;
            }
            for s in subsets::of_size(&cands, l) {
                let p = tester.test(a, b, &s)?.p_value;
                if p <= alpha {
                    ledger.push_p1(a, b, p);
                } else {
                    graph.remove_edge(a, b);
                    ledger.clear_p1(a, b);
                    ledger.add_sepset(a, b, &s);
                    break;
                }
            }
        }
    }
    Ok(())
}

/// Reduces every surviving edge's P¹ cell to its maximum and gives the edge
/// one identifier shared by both orderings. Idempotent.
pub fn finalize_edge_pvalues(graph: &MixedGraph, ledger: &mut PValueLedger) {
    let pairs: Vec<(usize, usize)> = graph.edges().map(|(a, b, _)| (a, b)).collect();
    for (a, b) in pairs {
        if ledger.p1(a, b).is_some() {
            ledger.reduce_p1(a, b);
            ledger.assign_skeleton_identifier(a, b);
        }
    }
}
