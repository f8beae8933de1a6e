//! Orientation-rule propagation with p-value bounds.
//!
//! Rules, for an undirected `a - b`:
//!
//! 1. some `c -> a` with `c`, `b` non-adjacent;
//! 2. some `a -> c -> b`;
//! 3. two paths `a - c -> b`, `a - d -> b` with `c`, `d` non-adjacent.
//!
//! Each application is a disjunction over its witnesses, so witness bounds
//! are summed. In the default mode all rules are evaluated against the graph
//! as it was at the start of an iteration and write into a copy; opposing
//! orientations of one edge are turned into ambiguous undirected edges
//! together with the edges that justified them.

use std::collections::BTreeMap;

use crate::citest::CiError;
use crate::graph::{EdgeMark, MixedGraph};
use crate::ledger::PValueLedger;
use crate::vstruct::{check_p, p1_of, BoundError, BoundPolicy};

/// `min(1, max{p_ab, Σ p(c_i -> a)})`.
pub fn bound_rule1(p_ab: f64, p_ci_to_a: &[f64], policy: BoundPolicy) -> Result<f64, BoundError> {
    if p_ci_to_a.is_empty() {
        return Err(BoundError::Empty);
    }
    let mut sum = 0.0;
    for &p in p_ci_to_a {
        sum += check_p(p)?;
    }
    Ok(policy.combine(check_p(p_ab)?, sum).min(1.0))
}

/// `min(1, max{p_ab, Σ max(p(a -> c_i), p(c_i -> b))})`.
pub fn bound_rule2(p_ab: f64, chains: &[(f64, f64)], policy: BoundPolicy) -> Result<f64, BoundError> {
    if chains.is_empty() {
        return Err(BoundError::Empty);
    }
    let mut sum = 0.0;
    for &(x, y) in chains {
        sum += policy.combine(check_p(x)?, check_p(y)?);
    }
    Ok(policy.combine(check_p(p_ab)?, sum).min(1.0))
}

/// Rule 3 over every pair of the given paths `(p(a - c_i), p(c_i -> b))`;
/// the caller admits only pairwise non-adjacent middle vertices.
pub fn bound_rule3(p_ab: f64, paths: &[(f64, f64)], policy: BoundPolicy) -> Result<f64, BoundError> {
    if paths.len() < 2 {
        return Err(BoundError::TooFewPaths(paths.len()));
    }
    let mut pairs = Vec::new();
    for (i, &(x1, y1)) in paths.iter().enumerate() {
        for &(x2, y2) in &paths[i + 1..] {
            pairs.push([x1, y1, x2, y2]);
        }
    }
    bound_rule3_pairs(p_ab, &pairs, policy)
}

fn bound_rule3_pairs(p_ab: f64, pairs: &[[f64; 4]], policy: BoundPolicy) -> Result<f64, BoundError> {
    if pairs.is_empty() {
        return Err(BoundError::Empty);
    }
    let mut sum = 0.0;
    for quad in pairs {
        for &p in quad {
            check_p(p)?;
        }
        sum += policy.combine_all(quad.iter().copied()).unwrap_or(0.0);
    }
    Ok(policy.combine(check_p(p_ab)?, sum).min(1.0))
}

/// The edges that made one rule application fire. Each edge is written as
/// `(from, to)`; for the undirected legs of rule 3 that is `(a, c)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Antecedents {
    pub rule: u8,
    pub edges: Vec<(usize, usize)>,
}

/// Rule applications behind every edge directed by this phase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    entries: BTreeMap<(usize, usize), Vec<Antecedents>>,
}

impl Provenance {
    pub fn get(&self, from: usize, to: usize) -> &[Antecedents] {
        self.entries.get(&(from, to)).map_or(&[], Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<Antecedents>)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MeekOptions {
    pub policy: BoundPolicy,
    pub ambiguation: bool,
    /// Classic else-if rule chain applied to the live graph; each edge is
    /// bounded by the rule that oriented it.
    pub legacy: bool,
}

fn p2_of(ledger: &PValueLedger, a: usize, b: usize) -> Result<f64, CiError> {
    ledger
        .p2(a, b)
        .ok_or_else(|| CiError::InvalidQuery(format!("directed edge {a}->{b} has no bound")))
}

struct Firing {
    value: f64,
    antecedents: Vec<Antecedents>,
}

fn usable_undirected(g: &MixedGraph, a: usize, b: usize) -> bool {
    g.is_undirected(a, b) && !g.is_ambiguous(a, b)
}

fn rule1(g: &MixedGraph, l: &PValueLedger, a: usize, b: usize) -> Result<Option<Firing>, CiError> {
    let cs: Vec<usize> = (0..g.vertex_count())
        .filter(|&c| c != a && c != b && g.is_directed(c, a) && !g.adjacent(c, b))
        .collect();
    if cs.is_empty() {
        return Ok(None);
    }
    let mut value = 0.0;
    for &c in &cs {
        value += p2_of(l, c, a)?;
    }
    Ok(Some(Firing {
        value,
        antecedents: cs
            .iter()
            .map(|&c| Antecedents {
                rule: 1,
                edges: vec![(c, a)],
            })
            .collect(),
    }))
}

fn rule2(
    g: &MixedGraph,
    l: &PValueLedger,
    a: usize,
    b: usize,
    policy: BoundPolicy,
) -> Result<Option<Firing>, CiError> {
    let cs: Vec<usize> = (0..g.vertex_count())
        .filter(|&c| c != a && c != b && g.is_directed(a, c) && g.is_directed(c, b))
        .collect();
    if cs.is_empty() {
        return Ok(None);
    }
    let mut value = 0.0;
    for &c in &cs {
        value += policy.combine(p2_of(l, a, c)?, p2_of(l, c, b)?);
    }
    Ok(Some(Firing {
        value,
        antecedents: cs
            .iter()
            .map(|&c| Antecedents {
                rule: 2,
                edges: vec![(a, c), (c, b)],
            })
            .collect(),
    }))
}

fn rule3(
    g: &MixedGraph,
    l: &PValueLedger,
    a: usize,
    b: usize,
    policy: BoundPolicy,
) -> Result<Option<Firing>, CiError> {
    let cs: Vec<usize> = (0..g.vertex_count())
        .filter(|&c| c != a && c != b && usable_undirected(g, a, c) && g.is_directed(c, b))
        .collect();
    let mut value = 0.0;
    let mut antecedents = Vec::new();
    for (i, &ci) in cs.iter().enumerate() {
        for &cj in &cs[i + 1..] {
            if g.adjacent(ci, cj) {
                continue;
            }
            let quad = [p1_of(l, a, ci)?, p2_of(l, ci, b)?, p1_of(l, a, cj)?, p2_of(l, cj, b)?];
            value += policy.combine_all(quad).unwrap_or(0.0);
            antecedents.push(Antecedents {
                rule: 3,
                edges: vec![(a, ci), (ci, b), (a, cj), (cj, b)],
            });
        }
    }
    Ok((!antecedents.is_empty()).then_some(Firing { value, antecedents }))
}

/// Propagates orientations to a fixpoint, then copies P¹ into P² (both
/// orderings) for every edge left undirected.
pub fn apply_orientation_rules(
    graph: &mut MixedGraph,
    ledger: &mut PValueLedger,
    opts: &MeekOptions,
) -> Result<Provenance, CiError> {
    let mut prov = Provenance::default();
    if opts.legacy {
        while legacy_sweep(graph, ledger, opts.policy, &mut prov)? {}
    } else {
        while shadow_iteration(graph, ledger, opts, &mut prov)? {}
    }
    let undirected: Vec<(usize, usize)> = graph
        .edges()
        .filter(|&(_, _, m)| m == EdgeMark::Undirected)
        .map(|(a, b, _)| (a, b))
        .collect();
    for (a, b) in undirected {
        let p = p1_of(ledger, a, b)?;
        ledger.reset_to_undirected(a, b);
        ledger.set_p2(a, b, p);
        ledger.set_p2(b, a, p);
    }
    Ok(prov)
}

fn shadow_iteration(
    graph: &mut MixedGraph,
    ledger: &mut PValueLedger,
    opts: &MeekOptions,
    prov: &mut Provenance,
) -> Result<bool, CiError> {
    let g = graph.clone();
    let n = g.vertex_count();
    let policy = opts.policy;
    let candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .filter(|&(a, b)| a != b && usable_undirected(&g, a, b))
        .collect();
    if candidates.is_empty() {
        return Ok(false);
    }

    let mut shadow = g.clone();
    let mut fired: BTreeMap<(usize, usize), Vec<Antecedents>> = BTreeMap::new();
    for rule in 1..=3 {
        for &(a, b) in &candidates {
            let firing = match rule {
                1 => rule1(&g, ledger, a, b)?,
                2 => rule2(&g, ledger, a, b, policy)?,
                _ => rule3(&g, ledger, a, b, policy)?,
            };
            let Some(f) = firing else { continue };
            if opts.ambiguation {
                shadow.add_arrowhead(a, b);
            } else {
                shadow.set_mark(a, b, EdgeMark::DirectedForward);
            }
            ledger.push_p_prime(a, b, f.value);
            fired.entry((a, b)).or_default().extend(f.antecedents);
        }
    }
    if fired.is_empty() {
        return Ok(false);
    }

    if opts.ambiguation {
        let conflicts: Vec<(usize, usize)> = shadow
            .edges()
            .filter(|&(_, _, m)| m == EdgeMark::Bidirected)
            .map(|(a, b, _)| (a, b))
            .collect();
        for (a, b) in conflicts {
            shadow.make_ambiguous(a, b);
            for dir in [(a, b), (b, a)] {
                for ante in fired.get(&dir).into_iter().flatten() {
                    for &(x, y) in &ante.edges {
                        shadow.make_ambiguous(x, y);
                    }
                }
            }
        }
        let ambiguous: Vec<_> = shadow.ambiguous_pairs().collect();
        for (a, b) in ambiguous {
            ledger.reset_to_undirected(a, b);
        }
    }
    *graph = shadow;

    for (&(a, b), antecedents) in &fired {
        if !graph.is_directed(a, b) {
            continue;
        }
        let sum: f64 = ledger.p_prime(a, b).iter().sum();
        let p2 = policy.combine(p1_of(ledger, a, b)?, sum).min(1.0);
        let id = ledger.fresh_identifier();
        ledger.set_directed(a, b, p2, id);
        prov.entries.insert((a, b), antecedents.clone());
    }
    ledger.clear_all_p_prime();
    Ok(true)
}

fn legacy_sweep(
    graph: &mut MixedGraph,
    ledger: &mut PValueLedger,
    policy: BoundPolicy,
    prov: &mut Provenance,
) -> Result<bool, CiError> {
    let n = graph.vertex_count();
    let mut changed = false;
    for a in 0..n {
        for b in 0..n {
            if a == b || !usable_undirected(graph, a, b) {
                continue;
            }
            let p_ab = p1_of(ledger, a, b)?;
            let firing = match rule1(graph, ledger, a, b)? {
                Some(f) => Some(f),
                None => match rule2(graph, ledger, a, b, policy)? {
                    Some(f) => Some(f),
                    None => rule3(graph, ledger, a, b, policy)?,
                },
            };
            let Some(f) = firing else { continue };
            let p2 = policy.combine(p_ab, f.value).min(1.0);
            graph.set_mark(a, b, EdgeMark::DirectedForward);
            let id = ledger.fresh_identifier();
            ledger.set_directed(a, b, p2, id);
            prov.entries.insert((a, b), f.antecedents);
            changed = true;
        }
    }
    Ok(changed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const R: BoundPolicy = BoundPolicy::Robust;

    #[test]
    fn rule_bounds() {
        assert_eq!(bound_rule1(0.04, &[0.01], R).unwrap(), 0.04);
        assert_abs_diff_eq!(bound_rule1(0.01, &[0.02, 0.03], R).unwrap(), 0.05, epsilon = 1e-15);
        assert_eq!(bound_rule1(0.5, &[0.6, 0.7], R).unwrap(), 1.0);
        assert_eq!(bound_rule1(0.5, &[], R), Err(BoundError::Empty));

        assert_eq!(bound_rule2(0.02, &[(0.01, 0.03)], R).unwrap(), 0.03);
        assert_eq!(bound_rule2(0.10, &[(0.01, 0.03), (0.04, 0.02)], R).unwrap(), 0.10);
        assert_eq!(bound_rule2(0.0, &[(0.0, 0.0)], R).unwrap(), 0.0);

        assert_eq!(bound_rule3(0.02, &[(0.01, 0.03), (0.04, 0.02)], R).unwrap(), 0.04);
        assert_abs_diff_eq!(bound_rule3(0.0, &[(0.01, 0.01); 3], R).unwrap(), 0.03, epsilon = 1e-15);
        assert_eq!(bound_rule3(0.0, &[(0.0, 0.0); 2], R).unwrap(), 0.0);
        assert_eq!(bound_rule3(0.0, &[(0.0, 0.0)], R), Err(BoundError::TooFewPaths(1)));
    }

    #[test]
    fn non_robust_rule_bounds_use_min() {
        let nr = BoundPolicy::NonRobust;
        assert_eq!(bound_rule1(0.04, &[0.01], nr).unwrap(), 0.01);
        assert_eq!(bound_rule2(0.10, &[(0.01, 0.03)], nr).unwrap(), 0.01);
        assert_eq!(bound_rule3(0.5, &[(0.01, 0.03), (0.04, 0.02)], nr).unwrap(), 0.01);
    }

    fn ledger_for(g: &MixedGraph, p1: f64) -> PValueLedger {
        let mut l = PValueLedger::new(g.vertex_count());
        for (a, b, _) in g.edges() {
            l.push_p1(a, b, p1);
            l.assign_skeleton_identifier(a, b);
        }
        l
    }

    fn direct(g: &mut MixedGraph, l: &mut PValueLedger, a: usize, b: usize, p2: f64) {
        g.set_mark(a, b, EdgeMark::DirectedForward);
        let id = l.fresh_identifier();
        l.set_directed(a, b, p2, id);
    }

    #[test]
    fn opposing_rule_one_firings_ambiguate_everything_involved() {
        // A=0 B=1 C=2 D=3 E=4 F=5: D->A, C->A, E->B, F->B, A-B
        let mut g = MixedGraph::empty(6);
        for (a, b) in [(3, 0), (2, 0), (4, 1), (5, 1), (0, 1)] {
            g.set_mark(a, b, EdgeMark::Undirected);
        }
        let mut l = ledger_for(&g, 0.01);
        for (a, b) in [(3, 0), (2, 0), (4, 1), (5, 1)] {
            direct(&mut g, &mut l, a, b, 0.02);
        }
        let opts = MeekOptions {
            ambiguation: true,
            ..Default::default()
        };
        apply_orientation_rules(&mut g, &mut l, &opts).unwrap();
        for (a, b) in [(3, 0), (2, 0), (4, 1), (5, 1), (0, 1)] {
            assert!(g.is_undirected(a, b) && g.is_ambiguous(a, b));
            assert_eq!(l.p2(a, b), Some(0.01));
            assert_eq!(l.p2(b, a), Some(0.01));
            assert_eq!(l.identifier(a, b), l.skeleton_identifier(a, b));
        }
    }

    #[test]
    fn rule_one_twice_sums() {
        // only D->A and C->A remain: two witnesses for A->B
        let mut g = MixedGraph::empty(4);
        for (a, b) in [(3, 0), (2, 0), (0, 1)] {
            g.set_mark(a, b, EdgeMark::Undirected);
        }
        let mut l = ledger_for(&g, 0.01);
        direct(&mut g, &mut l, 3, 0, 0.02);
        direct(&mut g, &mut l, 2, 0, 0.03);
        let opts = MeekOptions {
            ambiguation: true,
            ..Default::default()
        };
        let prov = apply_orientation_rules(&mut g, &mut l, &opts).unwrap();
        assert!(g.is_directed(0, 1));
        assert_abs_diff_eq!(l.p2(0, 1).unwrap(), 0.05, epsilon = 1e-15);
        assert_eq!(l.p2(1, 0), None);
        assert_eq!(prov.get(0, 1).len(), 2);
    }

    fn two_rules_graph() -> (MixedGraph, PValueLedger) {
        // A=0 B=1 C=2 D=3 E=4 F=5
        let mut g = MixedGraph::empty(6);
        for (a, b) in [(0, 1), (0, 2), (0, 3), (0, 4), (2, 1), (3, 1), (5, 4), (4, 1)] {
            g.set_mark(a, b, EdgeMark::Undirected);
        }
        let mut l = PValueLedger::new(6);
        for (a, b, p) in [
            (0, 1, 0.001),
            (0, 2, 0.002),
            (0, 3, 0.003),
            (0, 4, 0.004),
            (2, 1, 0.005),
            (3, 1, 0.006),
            (5, 4, 0.007),
            (4, 1, 0.008),
        ] {
            l.push_p1(a, b, p);
            l.assign_skeleton_identifier(a, b);
        }
        direct(&mut g, &mut l, 0, 4, 0.010);
        direct(&mut g, &mut l, 2, 1, 0.020);
        direct(&mut g, &mut l, 3, 1, 0.030);
        direct(&mut g, &mut l, 5, 4, 0.040);
        direct(&mut g, &mut l, 4, 1, 0.050);
        (g, l)
    }

    #[test]
    fn rules_two_and_three_accumulate() {
        let (mut g, mut l) = two_rules_graph();
        let opts = MeekOptions {
            ambiguation: true,
            ..Default::default()
        };
        let prov = apply_orientation_rules(&mut g, &mut l, &opts).unwrap();
        assert!(g.is_directed(0, 1));
        // rule 2 via E: max(0.010, 0.050); rule 3 via C, D: max(.002, .020, .003, .030)
        assert_abs_diff_eq!(l.p2(0, 1).unwrap(), 0.050 + 0.030, epsilon = 1e-15);
        let rules: Vec<u8> = prov.get(0, 1).iter().map(|a| a.rule).collect();
        assert_eq!(rules, vec![2, 3]);
        assert!(g.is_undirected(0, 2) && !g.is_ambiguous(0, 2));
        assert_eq!(l.p2(0, 2), Some(0.002));
    }

    #[test]
    fn legacy_chain_uses_first_rule_only() {
        let (mut g, mut l) = two_rules_graph();
        let opts = MeekOptions {
            legacy: true,
            ..Default::default()
        };
        apply_orientation_rules(&mut g, &mut l, &opts).unwrap();
        assert!(g.is_directed(0, 1));
        assert_eq!(l.p2(0, 1), Some(0.050));
    }

    #[test]
    fn ambiguous_edges_are_not_antecedents() {
        // C->A is directed but A-B ambiguous, and B-D hangs off an ambiguous edge
        let mut g = MixedGraph::empty(4);
        for (a, b) in [(2, 0), (0, 1), (1, 3)] {
            g.set_mark(a, b, EdgeMark::Undirected);
        }
        let mut l = ledger_for(&g, 0.01);
        direct(&mut g, &mut l, 2, 0, 0.02);
        g.make_ambiguous(0, 1);
        let prov = apply_orientation_rules(&mut g, &mut l, &MeekOptions::default()).unwrap();
        assert!(prov.is_empty());
        assert!(g.is_undirected(0, 1) && g.is_undirected(1, 3));
    }
}
