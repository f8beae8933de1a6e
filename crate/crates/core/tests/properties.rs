use std::collections::HashSet;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use pcp_core::fdr::{by_alpha_star, by_estimate};
use pcp_core::graph::{d_separated, shd, true_cpdag};
use pcp_core::harness::bench::make_replicate;
use pcp_core::harness::{run_pipeline, run_with, PipelineConfig};
use pcp_core::meek::{bound_rule1, bound_rule2, bound_rule3};
use pcp_core::simgen::rng;
use pcp_core::skeleton::discover_skeleton;
use pcp_core::vstruct::combine_vstruct_bound;
use pcp_core::{
    BoundPolicy, CiTest, Dag, DatasetStats, EdgeMark, FisherZ, MixedGraph, OracleTest, PipelineInput,
    ScriptedTest, SkeletonConfig, VariantConfig,
};

fn dag_strategy(min_n: usize, max_n: usize) -> impl Strategy<Value = Dag> {
    (min_n..=max_n).prop_flat_map(|n| {
        let order = Just((0..n).collect::<Vec<usize>>()).prop_shuffle();
        let keep = proptest::collection::vec(proptest::bool::weighted(0.4), n * (n - 1) / 2);
        (Just(n), order, keep).prop_map(|(n, order, keep)| {
            let mut edges = Vec::new();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if keep[k] {
                        edges.push((order[i], order[j]));
                    }
                    k += 1;
                }
            }
            Dag::new(n, &edges).unwrap()
        })
    })
}

fn mixed_strategy(n: usize) -> impl Strategy<Value = MixedGraph> {
    proptest::collection::vec(0u8..5, n * (n - 1) / 2).prop_map(move |marks| {
        let mut g = MixedGraph::empty(n);
        let mut k = 0;
        for a in 0..n {
            for b in a + 1..n {
                let mark = match marks[k] {
                    1 => Some(EdgeMark::Undirected),
                    2 => Some(EdgeMark::DirectedForward),
                    3 => Some(EdgeMark::DirectedBackward),
                    4 => Some(EdgeMark::Bidirected),
                    _ => None,
                };
                if let Some(m) = mark {
                    g.set_mark(a, b, m);
                }
                k += 1;
            }
        }
        g
    })
}

/// Descendants of `v`, including `v`.
fn descendants(dag: &Dag, v: usize) -> Vec<bool> {
    let mut seen = vec![false; dag.vertex_count()];
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        if !seen[u] {
            seen[u] = true;
            stack.extend_from_slice(dag.children(u));
        }
    }
    seen
}

/// d-separation by enumerating every simple path between `x` and `y`.
fn brute_force_dsep(dag: &Dag, x: usize, y: usize, z: &[usize]) -> bool {
    fn search(dag: &Dag, path: &mut Vec<usize>, y: usize, z: &[usize]) -> bool {
        let last = *path.last().unwrap();
        if last == y {
            return path_active(dag, path, z);
        }
        let n = dag.vertex_count();
        for next in 0..n {
            if dag.adjacent(last, next) && !path.contains(&next) {
                path.push(next);
                if search(dag, path, y, z) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    fn path_active(dag: &Dag, path: &[usize], z: &[usize]) -> bool {
        path.windows(3).all(|w| {
            let (a, c, b) = (w[0], w[1], w[2]);
            if dag.has_edge(a, c) && dag.has_edge(b, c) {
                let desc = descendants(dag, c);
                z.iter().any(|&v| desc[v])
            } else {
                !z.contains(&c)
            }
        })
    }
    !search(dag, &mut vec![x], y, z)
}

fn unshielded_colliders(dag: &Dag) -> HashSet<(usize, usize, usize)> {
    let n = dag.vertex_count();
    let mut out = HashSet::new();
    for c in 0..n {
        let ps = dag.parents(c);
        for (i, &a) in ps.iter().enumerate() {
            for &b in &ps[i + 1..] {
                if !dag.adjacent(a, b) {
                    out.insert((a.min(b), c, a.max(b)));
                }
            }
        }
    }
    out
}

/// CPDAG by enumerating every orientation of the skeleton and keeping the
/// acyclic ones with the same unshielded colliders.
fn brute_force_cpdag(dag: &Dag) -> MixedGraph {
    let edges = dag.edges();
    let target = unshielded_colliders(dag);
    let n = dag.vertex_count();
    let mut forced: Vec<Option<bool>> = vec![None; edges.len()];
    let mut agree = vec![true; edges.len()];
    for mask in 0u32..(1 << edges.len()) {
        let oriented: Vec<(usize, usize)> = edges
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| if mask >> i & 1 == 1 { (v, u) } else { (u, v) })
            .collect();
        let Ok(member) = Dag::new(n, &oriented) else { continue };
        if unshielded_colliders(&member) != target {
            continue;
        }
        for i in 0..edges.len() {
            let dir = mask >> i & 1 == 1;
            match forced[i] {
                None => forced[i] = Some(dir),
                Some(d) if d != dir => agree[i] = false,
                _ => {}
            }
        }
    }
    let mut g = MixedGraph::empty(n);
    for (i, &(u, v)) in edges.iter().enumerate() {
        if agree[i] {
            g.set_mark(u, v, EdgeMark::DirectedForward);
        } else {
            g.set_mark(u, v, EdgeMark::Undirected);
        }
    }
    g
}

fn random_stats(seed: u64, p: usize, n: usize) -> DatasetStats {
    let mut r = rng(seed, 0);
    let mix = DMatrix::from_fn(p, p, |_, _| r.sample::<f64, _>(StandardNormal) * 0.5);
    let noise = DMatrix::from_fn(n, p, |_, _| r.sample::<f64, _>(StandardNormal));
    DatasetStats::from_data(&(&noise + &noise * mix)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn d_separation_matches_path_enumeration(
        dag in dag_strategy(2, 6),
        picks in proptest::collection::vec(any::<proptest::sample::Index>(), 2..5),
    ) {
        let n = dag.vertex_count();
        let x = picks[0].index(n);
        let y = picks[1].index(n);
        prop_assume!(x != y);
        let mut z: Vec<usize> = picks[2..].iter().map(|i| i.index(n)).filter(|&v| v != x && v != y).collect();
        z.sort_unstable();
        z.dedup();
        let fast = d_separated(&dag, x, y, &z).unwrap();
        prop_assert_eq!(fast, brute_force_dsep(&dag, x, y, &z));
        prop_assert_eq!(fast, d_separated(&dag, y, x, &z).unwrap());
    }

    #[test]
    fn cpdag_matches_equivalence_class_enumeration(dag in dag_strategy(2, 6)) {
        prop_assume!(dag.edge_count() <= 12);
        prop_assert_eq!(true_cpdag(&dag), brute_force_cpdag(&dag));
    }

    #[test]
    fn shd_is_a_metric(g1 in mixed_strategy(6), g2 in mixed_strategy(6), g3 in mixed_strategy(6)) {
        let d12 = shd(&g1, &g2).unwrap();
        prop_assert_eq!(d12, shd(&g2, &g1).unwrap());
        prop_assert_eq!(shd(&g1, &g1).unwrap(), 0);
        prop_assert!(shd(&g1, &g3).unwrap() <= d12 + shd(&g2, &g3).unwrap());
    }

    #[test]
    fn robust_bounds_dominate(
        p_ab in 0.0..=1.0f64,
        pairs in proptest::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 2..6),
    ) {
        let singles: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let r = BoundPolicy::Robust;
        let w = BoundPolicy::NonRobust;
        let checks = [
            (combine_vstruct_bound(p_ab, &pairs, r).unwrap(), combine_vstruct_bound(p_ab, &pairs, w).unwrap()),
            (bound_rule1(p_ab, &singles, r).unwrap(), bound_rule1(p_ab, &singles, w).unwrap()),
            (bound_rule2(p_ab, &pairs, r).unwrap(), bound_rule2(p_ab, &pairs, w).unwrap()),
            (bound_rule3(p_ab, &pairs, r).unwrap(), bound_rule3(p_ab, &pairs, w).unwrap()),
        ];
        for (robust, weak) in checks {
            prop_assert!(robust >= weak);
            prop_assert!((0.0..=1.0).contains(&robust) && (0.0..=1.0).contains(&weak));
        }
    }

    #[test]
    fn alpha_star_is_the_largest_feasible_threshold(
        pvals in proptest::collection::vec(0.0..=1.0f64, 1..40),
        q in 0.001..0.5f64,
    ) {
        let a = by_alpha_star(&pvals, q).unwrap();
        if a > 0.0 {
            prop_assert!(by_estimate(&pvals, a).unwrap() <= q);
            prop_assert!(pvals.iter().any(|&p| p <= a));
        }
        for &p in pvals.iter().filter(|&&p| p > a) {
            prop_assert!(by_estimate(&pvals, p).unwrap() > q);
        }
    }

    #[test]
    fn empty_script_defers_to_fallback(dag in dag_strategy(3, 7), a in 0usize..7, b in 0usize..7, s in proptest::collection::vec(0usize..7, 0..3)) {
        let n = dag.vertex_count();
        let (a, b) = (a % n, b % n);
        prop_assume!(a != b);
        let s: Vec<usize> = s.into_iter().map(|v| v % n).filter(|&v| v != a && v != b).collect::<HashSet<_>>().into_iter().collect();
        let oracle = OracleTest::new(dag.clone());
        let scripted = ScriptedTest::new(OracleTest::new(dag));
        prop_assert_eq!(scripted.test(a, b, &s).unwrap(), oracle.test(a, b, &s).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn oracle_pipeline_recovers_the_cpdag(dag in dag_strategy(2, 10)) {
        let truth = true_cpdag(&dag);
        let cfg = PipelineConfig { l_max: None, ..Default::default() };
        for v in [VariantConfig::PCP, VariantConfig::NO_STABLE, VariantConfig::LEGACY_PC] {
            let r = run_pipeline(&PipelineInput::Oracle(dag.clone()), v, &cfg, Some(&truth)).unwrap();
            prop_assert_eq!(&r.graph, &truth);
        }
    }

    #[test]
    fn oracle_result_ignores_alpha(dag in dag_strategy(2, 8), alpha in 0.001..0.999f64) {
        let cfg = PipelineConfig { alpha, l_max: None, ..Default::default() };
        let r = run_pipeline(&PipelineInput::Oracle(dag.clone()), VariantConfig::PCP, &cfg, None).unwrap();
        prop_assert_eq!(r.graph, true_cpdag(&dag));
    }

    #[test]
    fn partial_correlation_matches_recursion(seed in any::<u64>(), k in 1usize..4) {
        let stats = random_stats(seed, 6, 50);
        let s: Vec<usize> = (2..2 + k).collect();
        // ρ(a,b|S) from ρ(·,·|S \ {c}) with c the last element of S
        let rec = |a: usize, b: usize| {
            let (c, rest) = s.split_last().unwrap();
            let rab = stats.partial_correlation(a, b, rest).unwrap();
            let rac = stats.partial_correlation(a, *c, rest).unwrap();
            let rbc = stats.partial_correlation(b, *c, rest).unwrap();
            (rab - rac * rbc) / ((1.0 - rac * rac) * (1.0 - rbc * rbc)).sqrt()
        };
        let direct = stats.partial_correlation(0, 1, &s).unwrap();
        prop_assert!((direct - rec(0, 1)).abs() < 1e-10);
    }

    #[test]
    fn stable_skeleton_ignores_order(seed in 0u64..10_000, perm in Just((0..8).collect::<Vec<usize>>()).prop_shuffle()) {
        let tester = FisherZ::new(random_stats(seed, 8, 120));
        let base = discover_skeleton(&tester, &SkeletonConfig::default()).unwrap();
        let cfg = SkeletonConfig { order: Some(perm), ..Default::default() };
        let other = discover_skeleton(&tester, &cfg).unwrap();
        prop_assert_eq!(&base.0, &other.0);
        for a in 0..8 {
            for b in a + 1..8 {
                prop_assert_eq!(base.1.sepsets_sorted(a, b), other.1.sepsets_sorted(a, b));
                prop_assert_eq!(base.1.p1(a, b), other.1.p1(a, b));
            }
        }
    }

    #[test]
    fn robust_bounds_never_undercut_skeleton_pvalues(seed in 0u64..10_000) {
        let rep = make_replicate(seed, 10, 300, 2, 2);
        let r = run_with(FisherZ::new(rep.stats), VariantConfig::PCP, &PipelineConfig::default(), None).unwrap();
        for (a, b, mark) in r.graph.edges() {
            let p1 = r.ledger.p1(a, b).unwrap();
            let (from, to) = match mark {
                EdgeMark::DirectedForward => (a, b),
                EdgeMark::DirectedBackward => (b, a),
                EdgeMark::Undirected => {
                    prop_assert_eq!(r.ledger.p2(a, b), Some(p1));
                    prop_assert_eq!(r.ledger.p2(b, a), Some(p1));
                    continue;
                }
                _ => unreachable!("no bidirected edges survive"),
            };
            let p2 = r.ledger.p2(from, to).unwrap();
            prop_assert!(p2 >= p1 && p2 <= 1.0);
        }
        for h in r.hypotheses.entries() {
            prop_assert!((0.0..=1.0).contains(&h.p_value));
        }
    }
}
