//! Graph types: ground-truth DAGs, the mixed working graph, d-separation,
//! CPDAG derivation and structural Hamming distance.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("vertex {vertex} out of range for a graph with {count} vertices")]
    VertexOutOfRange { vertex: usize, count: usize },
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("more than one edge between {0} and {1}")]
    DuplicateEdge(usize, usize),
    #[error("edge set contains a directed cycle")]
    Cycle,
    #[error("graph sizes differ: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

fn check_vertex(v: usize, n: usize) -> Result<(), GraphError> {
    if v < n {
        Ok(())
    } else {
        Err(GraphError::VertexOutOfRange { vertex: v, count: n })
    }
}

/// A simple directed acyclic graph over vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    n: usize,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            parents: vec![Vec::new(); n],
            children: vec![Vec::new(); n],
        }
    }

    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut dag = Self::empty(n);
        let mut seen = BTreeSet::new();
        for &(p, c) in edges {
            check_vertex(p, n)?;
            check_vertex(c, n)?;
            if p == c {
                return Err(GraphError::SelfLoop(p));
            }
            if !seen.insert((p.min(c), p.max(c))) {
                return Err(GraphError::DuplicateEdge(p, c));
            }
            dag.parents[c].push(p);
            dag.children[p].push(c);
        }
        for list in dag.parents.iter_mut().chain(dag.children.iter_mut()) {
            list.sort_unstable();
        }
        if dag.topological_order().len() != n {
            return Err(GraphError::Cycle);
        }
        Ok(dag)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.children[parent].binary_search(&child).is_ok()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    /// All edges as `(parent, child)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|p| self.children[p].iter().map(move |&c| (p, c)))
            .collect()
    }

    /// Kahn's algorithm; shorter than `n` iff the edge set is cyclic.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..self.n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(self.n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in &self.children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        order
    }

    /// Vertices with a directed path into some vertex of `set`, `set` included.
    pub fn ancestors_of(&self, set: &[usize]) -> Vec<bool> {
        let mut mark = vec![false; self.n];
        let mut stack: Vec<usize> = set.to_vec();
        while let Some(v) = stack.pop() {
            if !mark[v] {
                mark[v] = true;
                stack.extend_from_slice(&self.parents[v]);
            }
        }
        mark
    }
}

/// Edge mark of an unordered pair, read relative to a queried orientation
/// `(a, b)`: `DirectedForward` means `a -> b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum EdgeMark {
    #[default]
    Absent,
    Undirected,
    DirectedForward,
    DirectedBackward,
    Bidirected,
}

impl EdgeMark {
    /// The same mark read from the other endpoint.
    pub fn reversed(self) -> Self {
        match self {
            EdgeMark::DirectedForward => EdgeMark::DirectedBackward,
            EdgeMark::DirectedBackward => EdgeMark::DirectedForward,
            other => other,
        }
    }

    pub fn is_present(self) -> bool {
        self != EdgeMark::Absent
    }
}

impl fmt::Display for EdgeMark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EdgeMark::Absent => "   ",
            EdgeMark::Undirected => "---",
            EdgeMark::DirectedForward => "-->",
            EdgeMark::DirectedBackward => "<--",
            EdgeMark::Bidirected => "<->",
        };
        f.write_str(s)
    }
}

/// Working graph of the discovery pipeline.
///
/// One mark per unordered pair, stored for `(lo, hi)` with `lo < hi`.
/// Ambiguous pairs always carry [`EdgeMark::Undirected`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedGraph {
    n: usize,
    marks: Vec<EdgeMark>,
    ambiguous: BTreeSet<(usize, usize)>,
}

impl MixedGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            marks: vec![EdgeMark::Absent; n * n],
            ambiguous: BTreeSet::new(),
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for a in 0..n {
            for b in a + 1..n {
                g.set_mark(a, b, EdgeMark::Undirected);
            }
        }
        g
    }

    /// Every DAG edge as a directed mark.
    pub fn from_dag(dag: &Dag) -> Self {
        let mut g = Self::empty(dag.vertex_count());
        for (p, c) in dag.edges() {
            g.set_mark(p, c, EdgeMark::DirectedForward);
        }
        g
    }

    /// The DAG's adjacencies, all undirected.
    pub fn skeleton_of(dag: &Dag) -> Self {
        let mut g = Self::empty(dag.vertex_count());
        for (p, c) in dag.edges() {
            g.set_mark(p, c, EdgeMark::Undirected);
        }
        g
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, a: usize, b: usize) -> usize {
        debug_assert!(a != b && a < self.n && b < self.n);
        a.min(b) * self.n + a.max(b)
    }

    /// Mark of the pair read in the `(a, b)` orientation.
    #[inline]
    pub fn mark(&self, a: usize, b: usize) -> EdgeMark {
        let m = self.marks[self.slot(a, b)];
        if a < b {
            m
        } else {
            m.reversed()
        }
    }

    /// Sets the mark read in the `(a, b)` orientation. Any mark other than
    /// `Undirected` clears the ambiguity label.
    pub fn set_mark(&mut self, a: usize, b: usize, mark: EdgeMark) {
        let slot = self.slot(a, b);
        self.marks[slot] = if a < b { mark } else { mark.reversed() };
        if mark != EdgeMark::Undirected {
            self.ambiguous.remove(&(a.min(b), a.max(b)));
        }
    }

    #[inline]
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        a != b && self.marks[self.slot(a, b)].is_present()
    }

    pub fn is_undirected(&self, a: usize, b: usize) -> bool {
        self.mark(a, b) == EdgeMark::Undirected
    }

    /// `a -> b`.
    pub fn is_directed(&self, a: usize, b: usize) -> bool {
        self.mark(a, b) == EdgeMark::DirectedForward
    }

    /// True when the edge carries an arrowhead at `b` (`a -> b` or `a <-> b`).
    pub fn has_arrowhead_at(&self, a: usize, b: usize) -> bool {
        matches!(
            self.mark(a, b),
            EdgeMark::DirectedForward | EdgeMark::Bidirected
        )
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.set_mark(a, b, EdgeMark::Absent);
    }

    /// Adds an arrowhead at `b` without erasing an existing one at `a`, so
    /// opposing orientations accumulate into `a <-> b`.
    pub fn add_arrowhead(&mut self, a: usize, b: usize) {
        let next = match self.mark(a, b) {
            EdgeMark::Undirected | EdgeMark::DirectedForward => EdgeMark::DirectedForward,
            EdgeMark::DirectedBackward | EdgeMark::Bidirected => EdgeMark::Bidirected,
            EdgeMark::Absent => panic!("add_arrowhead on non-adjacent pair ({a}, {b})"),
        };
        self.set_mark(a, b, next);
    }

    /// Resets an edge to undirected and labels it ambiguous.
    pub fn make_ambiguous(&mut self, a: usize, b: usize) {
        debug_assert!(self.adjacent(a, b));
        self.set_mark(a, b, EdgeMark::Undirected);
        self.ambiguous.insert((a.min(b), a.max(b)));
    }

    pub fn is_ambiguous(&self, a: usize, b: usize) -> bool {
        self.ambiguous.contains(&(a.min(b), a.max(b)))
    }

    /// Sorted `(lo, hi)` ambiguous pairs.
    pub fn ambiguous_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.ambiguous.iter().copied()
    }

    /// Sorted neighbors of `a` regardless of mark.
    pub fn neighbors(&self, a: usize) -> Vec<usize> {
        (0..self.n).filter(|&b| self.adjacent(a, b)).collect()
    }

    /// Vertices `c` with `c -> a`.
    pub fn parents(&self, a: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&c| c != a && self.is_directed(c, a))
            .collect()
    }

    /// Adjacent pairs `(lo, hi, mark)` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, EdgeMark)> + '_ {
        (0..self.n).flat_map(move |a| {
            (a + 1..self.n).filter_map(move |b| {
                let m = self.marks[a * self.n + b];
                m.is_present().then_some((a, b, m))
            })
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn has_bidirected(&self) -> bool {
        self.edges().any(|(_, _, m)| m == EdgeMark::Bidirected)
    }

    /// Same adjacencies, ignoring marks.
    pub fn same_skeleton(&self, other: &MixedGraph) -> bool {
        self.n == other.n
            && self
                .marks
                .iter()
                .zip(&other.marks)
                .all(|(x, y)| x.is_present() == y.is_present())
    }
}

/// Reachability ("Bayes-ball") d-separation test.
///
/// A traversal over `(vertex, arrived-from-child?)` states: a ball moving up
/// may continue to parents and children of an unobserved vertex; a ball moving
/// down passes unobserved vertices to their children and bounces back up at
/// vertices that are ancestors of `z` (activated colliders).
pub fn d_separated(dag: &Dag, x: usize, y: usize, z: &[usize]) -> Result<bool, GraphError> {
    let n = dag.vertex_count();
    check_vertex(x, n)?;
    check_vertex(y, n)?;
    for &v in z {
        check_vertex(v, n)?;
    }
    if x == y {
        return Err(GraphError::InvalidQuery(format!("x and y are both {x}")));
    }
    if z.contains(&x) || z.contains(&y) {
        return Err(GraphError::InvalidQuery(
            "conditioning set contains an endpoint".into(),
        ));
    }

    let mut observed = vec![false; n];
    for &v in z {
        observed[v] = true;
    }
    let activates = dag.ancestors_of(z);

    // visited[v][0]: reached moving up (from a child); [1]: moving down.
    let mut visited = vec![[false; 2]; n];
    let mut stack = vec![(x, true)];
    while let Some((v, up)) = stack.pop() {
        let dir = usize::from(!up);
        if visited[v][dir] {
            continue;
        }
        visited[v][dir] = true;
        if v == y && !observed[v] {
            return Ok(false);
        }
        if up {
            if !observed[v] {
                stack.extend(dag.parents(v).iter().map(|&p| (p, true)));
                stack.extend(dag.children(v).iter().map(|&c| (c, false)));
            }
        } else {
            if !observed[v] {
                stack.extend(dag.children(v).iter().map(|&c| (c, false)));
            }
            if activates[v] {
                stack.extend(dag.parents(v).iter().map(|&p| (p, true)));
            }
        }
    }
    Ok(true)
}

/// The CPDAG of `dag`'s Markov equivalence class.
///
/// Keeps the skeleton, orients the DAG's unshielded colliders and closes
/// the result under the three orientation rules.
pub fn true_cpdag(dag: &Dag) -> MixedGraph {
    let n = dag.vertex_count();
    let mut g = MixedGraph::skeleton_of(dag);
    for c in 0..n {
        let pa = dag.parents(c);
        for (i, &a) in pa.iter().enumerate() {
            for &b in &pa[i + 1..] {
                if !dag.adjacent(a, b) {
                    g.set_mark(a, c, EdgeMark::DirectedForward);
                    g.set_mark(b, c, EdgeMark::DirectedForward);
                }
            }
        }
    }

    loop {
        let mut changed = false;
        for a in 0..n {
            for b in 0..n {
                if a == b || !g.is_undirected(a, b) {
                    continue;
                }
                if compelled_by_rules(&g, a, b) {
                    g.set_mark(a, b, EdgeMark::DirectedForward);
                    changed = true;
                }
            }
        }
        if !changed {
            return g;
        }
    }
}

fn compelled_by_rules(g: &MixedGraph, a: usize, b: usize) -> bool {
    let n = g.vertex_count();
    let others = || (0..n).filter(move |&c| c != a && c != b);
    // c -> a, c and b non-adjacent
    if others().any(|c| g.is_directed(c, a) && !g.adjacent(c, b)) {
        return true;
    }
    // a -> c -> b
    if others().any(|c| g.is_directed(a, c) && g.is_directed(c, b)) {
        return true;
    }
    // a - c -> b and a - d -> b with c, d non-adjacent
    let mids: Vec<usize> = others()
        .filter(|&c| g.is_undirected(a, c) && g.is_directed(c, b))
        .collect();
    mids.iter()
        .enumerate()
        .any(|(i, &c)| mids[i + 1..].iter().any(|&d| !g.adjacent(c, d)))
}

/// Number of unordered pairs whose marks differ. Ambiguity labels are ignored.
pub fn shd(g1: &MixedGraph, g2: &MixedGraph) -> Result<usize, GraphError> {
    if g1.vertex_count() != g2.vertex_count() {
        return Err(GraphError::SizeMismatch {
            left: g1.vertex_count(),
            right: g2.vertex_count(),
        });
    }
    let n = g1.vertex_count();
    let mut count = 0;
    for a in 0..n {
        for b in a + 1..n {
            if g1.mark(a, b) != g2.mark(a, b) {
                count += 1;
            }
        }
    }
    Ok(count)
}
