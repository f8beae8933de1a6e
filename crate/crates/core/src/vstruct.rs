//! Unshielded collider orientation with p-value bounds.
//!
//! For every non-adjacent `{a, b}` with a common neighbour `c` outside all
//! of their separating sets, `c` is taken as a collider. The extra test
//! p-value γ is the largest p-value of `a ⟂ b | S` over conditioning sets
//! that contain `c`; each arm's bound then combines its own P¹ value with
//! γ and the *other* arm's P¹ value.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::citest::{CiError, CiTest};
use crate::graph::{EdgeMark, MixedGraph};
use crate::ledger::{HypothesisId, PValueLedger};
use crate::subsets;

/// How constituent p-values of a conjunction are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum BoundPolicy {
    /// Maximum of the constituents: stays valid when one of them is too small.
    #[default]
    Robust,
    /// Minimum of the constituents.
    NonRobust,
}

impl BoundPolicy {
    #[inline]
    pub fn combine(self, x: f64, y: f64) -> f64 {
        match self {
            BoundPolicy::Robust => x.max(y),
            BoundPolicy::NonRobust => x.min(y),
        }
    }

    pub fn combine_all(self, values: impl IntoIterator<Item = f64>) -> Option<f64> {
        values.into_iter().reduce(|x, y| self.combine(x, y))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("no contributions to combine")]
    Empty,
    #[error("p-value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("rule 3 needs at least two paths, got {0}")]
    TooFewPaths(usize),
}

pub(crate) fn check_p(p: f64) -> Result<f64, BoundError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(BoundError::OutOfRange(p))
    }
}

/// `min(1, max{p_ac, Σ max(p_bc_i, γ_i)})`, or the min/min form for
/// [`BoundPolicy::NonRobust`].
pub fn combine_vstruct_bound(
    p_ac: f64,
    contributions: &[(f64, f64)],
    policy: BoundPolicy,
) -> Result<f64, BoundError> {
    if contributions.is_empty() {
        return Err(BoundError::Empty);
    }
    check_p(p_ac)?;
    let mut sum = 0.0;
    for &(p_bc, gamma) in contributions {
        sum += policy.combine(check_p(p_bc)?, check_p(gamma)?);
    }
    Ok(policy.combine(p_ac, sum).min(1.0))
}

/// Largest p-value of `a ⟂ b | S` over every `S ⊆ N̂(a)∖{b}` and every
/// `S ⊆ N̂(b)∖{a}` that contains `c`, with `|S| ≤ l_max` (at least 1).
pub fn gamma_pvalue<T: CiTest + ?Sized>(
    tester: &T,
    graph: &MixedGraph,
    a: usize,
    b: usize,
    c: usize,
    l_max: Option<usize>,
) -> Result<f64, CiError> {
    if graph.adjacent(a, b) || !graph.adjacent(a, c) || !graph.adjacent(b, c) {
        return Err(CiError::InvalidQuery(format!(
            "({a}, {b}, {c}) is not an unshielded triple"
        )));
    }
    let cap = l_max.unwrap_or(usize::MAX).max(1);
    let mut sets = subsets::containing(&graph.neighbors(a), c, cap);
    sets.extend(subsets::containing(&graph.neighbors(b), c, cap));
    sets.sort();
    sets.dedup();
    let mut best: f64 = 0.0;
    for s in &sets {
        best = best.max(tester.test(a, b, s)?.p_value);
    }
    Ok(best)
}

/// One oriented collider `a -> c <- b`.
#[derive(Debug, Clone, PartialEq)]
pub struct VStructRecord {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub gamma_p: f64,
    /// Set when this collider alone explains both arms.
    pub shared_identifier: Option<HypothesisId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VStructOptions {
    pub l_max: Option<usize>,
    pub policy: BoundPolicy,
    /// Keep conflicting arrowheads and turn every edge involved into an
    /// ambiguous undirected edge. When off, later colliders over-write
    /// earlier orientations.
    pub ambiguation: bool,
    /// With over-writing, bound each edge only by the collider that wrote
    /// its final direction.
    pub last_writer_only: bool,
}

impl Default for VStructOptions {
    fn default() -> Self {
        Self {
            l_max: Some(2),
            policy: BoundPolicy::Robust,
            ambiguation: true,
            last_writer_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Contribution {
    triple: usize,
    other_arm: usize,
    p_other: f64,
    gamma: f64,
}

pub(crate) fn p1_of(ledger: &PValueLedger, a: usize, b: usize) -> Result<f64, CiError> {
    ledger.p1(a, b).ok_or_else(|| {
        CiError::InvalidQuery(format!("edge {a}-{b} has no skeleton p-value"))
    })
}

/// Orients colliders in place and writes P² and identifiers for every
/// edge left directed.
pub fn orient_v_structures<T: CiTest + ?Sized>(
    graph: &mut MixedGraph,
    ledger: &mut PValueLedger,
    tester: &T,
    opts: &VStructOptions,
) -> Result<Vec<VStructRecord>, CiError> {
    let n = graph.vertex_count();
    let mut triples = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if graph.adjacent(a, b) {
                continue;
            }
            for c in 0..n {
                if c != a
                    && c != b
                    && graph.adjacent(a, c)
                    && graph.adjacent(b, c)
                    && !ledger.in_any_sepset(a, b, c)
                {
                    triples.push((a, b, c));
                }
            }
        }
    }

    let frozen = &*graph;
    let gammas: Vec<f64> = triples
        .par_iter()
        .map(|&(a, b, c)| gamma_pvalue(tester, frozen, a, b, c, opts.l_max))
        .collect::<Result<_, _>>()?;

    let policy = opts.policy;
    let mut contrib: BTreeMap<(usize, usize), Vec<Contribution>> = BTreeMap::new();
    for (t, &(a, b, c)) in triples.iter().enumerate() {
        let gamma = gammas[t];
        let (pa, pb) = (p1_of(ledger, a, c)?, p1_of(ledger, b, c)?);
        for (x, other, p_other) in [(a, b, pb), (b, a, pa)] {
            if opts.ambiguation {
                graph.add_arrowhead(x, c);
            } else {
                graph.set_mark(x, c, EdgeMark::DirectedForward);
                if opts.last_writer_only {
                    contrib.remove(&(x, c));
                    ledger.clear_p_prime(x, c);
                }
            }
            contrib.entry((x, c)).or_default().push(Contribution {
                triple: t,
                other_arm: other,
                p_other,
                gamma,
            });
            ledger.push_p_prime(x, c, policy.combine(p_other, gamma));
        }
    }

    if opts.ambiguation {
        let before = graph.clone();
        for (x, y, mark) in before.edges() {
            if mark != EdgeMark::Bidirected {
                continue;
            }
            graph.make_ambiguous(x, y);
            for end in [x, y] {
                for w in before.neighbors(end) {
                    if before.has_arrowhead_at(w, end) {
                        graph.make_ambiguous(w, end);
                    }
                }
            }
        }
        let ambiguous: Vec<_> = graph.ambiguous_pairs().collect();
        for (x, y) in ambiguous {
            ledger.reset_to_undirected(x, y);
        }
    }

    let directed: Vec<(usize, usize)> = graph
        .edges()
        .filter_map(|(x, y, m)| match m {
            EdgeMark::DirectedForward => Some((x, y)),
            EdgeMark::DirectedBackward => Some((y, x)),
            _ => None,
        })
        .collect();
    let mut triple_ids: HashMap<usize, HypothesisId> = HashMap::new();
    for (x, c) in directed {
        let list = contrib
            .get(&(x, c))
            .filter(|l| !l.is_empty())
            .ok_or_else(|| CiError::InvalidQuery(format!("edge {x}->{c} has no collider")))?;
        let pairs: Vec<(f64, f64)> = list.iter().map(|k| (k.p_other, k.gamma)).collect();
        let p2 = combine_vstruct_bound(p1_of(ledger, x, c)?, &pairs, policy)
            .map_err(|e| CiError::InvalidQuery(e.to_string()))?;
        let shared = list.len() == 1 && {
            let k = list[0];
            graph.is_directed(k.other_arm, c)
                && contrib
                    .get(&(k.other_arm, c))
                    .is_some_and(|o| o.len() == 1 && o[0].triple == k.triple)
        };
        let id = if shared {
            *triple_ids
                .entry(list[0].triple)
                .or_insert_with(|| ledger.fresh_identifier())
        } else {
            ledger.fresh_identifier()
        };
        ledger.set_directed(x, c, p2, id);
    }

    Ok(triples
        .iter()
        .zip(&gammas)
        .enumerate()
        .map(|(t, (&(a, b, c), &gamma_p))| VStructRecord {
            a,
            b,
            c,
            gamma_p,
            shared_identifier: triple_ids.get(&t).copied(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citest::{OracleTest, ScriptedTest};
    use crate::graph::Dag;
    use crate::skeleton::{discover_skeleton, SkeletonConfig};

    #[test]
    fn combine_examples() {
        let r = BoundPolicy::Robust;
        assert_eq!(combine_vstruct_bound(0.02, &[(0.03, 0.01)], r).unwrap(), 0.03);
        let two = [(0.03, 0.01), (0.02, 0.04)];
        assert!((combine_vstruct_bound(0.05, &two, r).unwrap() - 0.07).abs() < 1e-15);
        let nr = combine_vstruct_bound(0.05, &two, BoundPolicy::NonRobust).unwrap();
        assert!((nr - 0.03).abs() < 1e-15);
        assert_eq!(combine_vstruct_bound(0.1, &[(0.7, 0.2), (0.6, 0.9)], r).unwrap(), 1.0);
        assert_eq!(combine_vstruct_bound(0.1, &[], r), Err(BoundError::Empty));
        assert!(combine_vstruct_bound(1.1, &[(0.1, 0.1)], r).is_err());
    }

    fn oracle_run(dag: Dag) -> (MixedGraph, PValueLedger, Vec<VStructRecord>) {
        let t = OracleTest::new(dag);
        let cfg = SkeletonConfig {
            l_max: None,
            ..Default::default()
        };
        let (mut g, mut l) = discover_skeleton(&t, &cfg).unwrap();
        let recs = orient_v_structures(&mut g, &mut l, &t, &VStructOptions::default()).unwrap();
        (g, l, recs)
    }

    #[test]
    fn oracle_collider_gets_one_shared_identifier() {
        let (g, l, recs) = oracle_run(Dag::new(3, &[(0, 2), (1, 2)]).unwrap());
        assert!(g.is_directed(0, 2) && g.is_directed(1, 2));
        assert_eq!(l.identifier(0, 2), l.identifier(1, 2));
        assert!(l.identifier(0, 2).is_some());
        assert_eq!(l.identifier(2, 0), None);
        assert_eq!(l.p2(0, 2), Some(0.0));
        assert_eq!(l.p2(1, 2), Some(0.0));
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].shared_identifier, l.identifier(0, 2));
    }

    #[test]
    fn gamma_schedule() {
        let collider = Dag::new(3, &[(0, 2), (1, 2)]).unwrap();
        let g = MixedGraph::skeleton_of(&collider);
        assert_eq!(gamma_pvalue(&OracleTest::new(collider), &g, 0, 1, 2, None).unwrap(), 0.0);

        let chain = Dag::new(3, &[(0, 2), (2, 1)]).unwrap();
        let g = MixedGraph::skeleton_of(&chain);
        assert_eq!(gamma_pvalue(&OracleTest::new(chain), &g, 0, 1, 2, None).unwrap(), 1.0);
    }

    /// Answers from a fixed table and counts distinct queries.
    struct Table(std::sync::Mutex<Vec<Vec<usize>>>, usize);

    impl CiTest for Table {
        fn test(&self, _: usize, _: usize, s: &[usize]) -> Result<crate::citest::CiResult, CiError> {
            self.0.lock().unwrap().push(s.to_vec());
            let p = match s {
                [2] => 0.01,
                [2, 3] => 0.04,
                _ => 0.5,
            };
            Ok(crate::citest::CiResult {
                p_value: p,
                statistic: 0.0,
                conditioning_size: s.len(),
            })
        }
        fn variable_count(&self) -> usize {
            self.1
        }
    }

    #[test]
    fn gamma_enumerates_sets_containing_c() {
        // a=0 -> c=2 <- b=1, a -> d=3
        let dag = Dag::new(4, &[(0, 2), (1, 2), (0, 3)]).unwrap();
        let g = MixedGraph::skeleton_of(&dag);
        let t = Table(Default::default(), 4);
        let p = gamma_pvalue(&t, &g, 0, 1, 2, Some(2)).unwrap();
        assert_eq!(p, 0.04);
        let mut seen = t.0.into_inner().unwrap();
        seen.sort();
        assert_eq!(seen, vec![vec![2], vec![2, 3]]);
    }

    // truth B->A, B->C, D->C, C->E with A ⟂ C | {} wrongly found
    fn conflict_scenario() -> (ScriptedTest<OracleTest>, Dag) {
        let dag = Dag::new(5, &[(1, 0), (1, 2), (3, 2), (2, 4)]).unwrap();
        let t = ScriptedTest::new(OracleTest::new(dag.clone())).with(0, 2, &[], true);
        (t, dag)
    }

    fn conflict_run(opts: VStructOptions) -> (MixedGraph, PValueLedger) {
        let (t, _) = conflict_scenario();
        let cfg = SkeletonConfig {
            l_max: None,
            ..Default::default()
        };
        let (mut g, mut l) = discover_skeleton(&t, &cfg).unwrap();
        assert_eq!(l.sepsets(0, 2), &[Vec::<usize>::new()]);
        orient_v_structures(&mut g, &mut l, &t, &opts).unwrap();
        (g, l)
    }

    #[test]
    fn conflicting_colliders_become_ambiguous() {
        let (g, l) = conflict_run(VStructOptions::default());
        for (x, y) in [(0, 1), (1, 2), (2, 3)] {
            assert!(g.is_undirected(x, y) && g.is_ambiguous(x, y), "{x}-{y}");
            assert_eq!(l.p2(x, y), None);
            assert_eq!(l.identifier(x, y), l.skeleton_identifier(x, y));
        }
        assert!(g.is_undirected(2, 4) && !g.is_ambiguous(2, 4));
        assert!(!g.has_bidirected());
    }

    #[test]
    fn without_ambiguation_the_last_collider_wins() {
        let (g, l) = conflict_run(VStructOptions {
            ambiguation: false,
            ..Default::default()
        });
        assert!(g.is_directed(0, 1) && g.is_directed(1, 2) && g.is_directed(3, 2));
        assert!(g.ambiguous_pairs().next().is_none());
        // 1->2 is supported by a single collider whose other arm survived
        assert_eq!(l.identifier(1, 2), l.identifier(3, 2));
        // 0->1 lost its partner arm 2->1
        assert_ne!(l.identifier(0, 1), l.identifier(1, 2));
        assert!(l.p2(0, 1).is_some());
    }

    #[test]
    fn contributions_are_cross_wired() {
        // a=0 -> c=2 <- b=1 with asymmetric skeleton p-values
        let mut g = MixedGraph::empty(3);
        g.set_mark(0, 2, EdgeMark::Undirected);
        g.set_mark(1, 2, EdgeMark::Undirected);
        let mut l = PValueLedger::new(3);
        l.push_p1(0, 2, 0.01);
        l.push_p1(1, 2, 0.07);
        l.assign_skeleton_identifier(0, 2);
        l.assign_skeleton_identifier(1, 2);
        l.add_sepset(0, 1, &[]);
        let t = Table(Default::default(), 3); // γ = 0.01 from S = {2}
        orient_v_structures(&mut g, &mut l, &t, &VStructOptions::default()).unwrap();
        assert_eq!(l.p_prime(0, 2), &[0.07]);
        assert_eq!(l.p_prime(1, 2), &[0.01]);
        assert_eq!(l.p2(0, 2), Some(0.07));
        assert_eq!(l.p2(1, 2), Some(0.07));
    }
}
