//! Per-pair bookkeeping shared by the discovery phases.
//!
//! All tables are dense `n × n` and indexed by ordered pair. Cells written
//! "for both orderings" are kept equal by the setters here.

use std::fmt;

/// Names one distinct hypothesis test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HypothesisId(pub u32);

impl fmt::Display for HypothesisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PValueLedger {
    n: usize,
    p1: Vec<Vec<f64>>,
    p2: Vec<Option<f64>>,
    p_prime: Vec<Vec<f64>>,
    sepsets: Vec<Vec<Vec<usize>>>,
    identifiers: Vec<Option<HypothesisId>>,
    skeleton_ids: Vec<Option<HypothesisId>>,
    next_identifier: u32,
}

impl PValueLedger {
    pub fn new(n: usize) -> Self {
        let nn = n * n;
        Self {
            n,
            p1: vec![Vec::new(); nn],
            p2: vec![None; nn],
            p_prime: vec![Vec::new(); nn],
            sepsets: vec![Vec::new(); nn],
            identifiers: vec![None; nn],
            skeleton_ids: vec![None; nn],
            next_identifier: 0,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    #[inline]
    fn ix(&self, a: usize, b: usize) -> usize {
        debug_assert!(a < self.n && b < self.n && a != b);
        a * self.n + b
    }

    // P¹

    /// Records a significant p-value in both orderings.
    pub fn push_p1(&mut self, a: usize, b: usize, p: f64) {
        let (i, j) = (self.ix(a, b), self.ix(b, a));
        self.p1[i].push(p);
        self.p1[j].push(p);
    }

    pub fn clear_p1(&mut self, a: usize, b: usize) {
        let (i, j) = (self.ix(a, b), self.ix(b, a));
        self.p1[i].clear();
        self.p1[j].clear();
    }

    pub fn p1_cell(&self, a: usize, b: usize) -> &[f64] {
        &self.p1[self.ix(a, b)]
    }

    /// Largest stored value; after finalization the cell holds only that.
    pub fn p1(&self, a: usize, b: usize) -> Option<f64> {
        self.p1[self.ix(a, b)].iter().copied().reduce(f64::max)
    }

    /// Reduces a non-empty cell to its maximum (both orderings).
    pub fn reduce_p1(&mut self, a: usize, b: usize) {
        if let Some(m) = self.p1(a, b) {
            let (i, j) = (self.ix(a, b), self.ix(b, a));
            self.p1[i] = vec![m];
            self.p1[j] = vec![m];
        }
    }

    // P²

    pub fn p2(&self, a: usize, b: usize) -> Option<f64> {
        self.p2[self.ix(a, b)]
    }

    pub fn set_p2(&mut self, a: usize, b: usize, p: f64) {
        let i = self.ix(a, b);
        self.p2[i] = Some(p);
    }

    pub fn clear_p2(&mut self, a: usize, b: usize) {
        let i = self.ix(a, b);
        self.p2[i] = None;
    }

    // P′

    pub fn p_prime(&self, a: usize, b: usize) -> &[f64] {
        &self.p_prime[self.ix(a, b)]
    }

    pub fn push_p_prime(&mut self, a: usize, b: usize, p: f64) {
        let i = self.ix(a, b);
        self.p_prime[i].push(p);
    }

    pub fn clear_p_prime(&mut self, a: usize, b: usize) {
        let i = self.ix(a, b);
        self.p_prime[i].clear();
    }

    pub fn clear_all_p_prime(&mut self) {
        self.p_prime.iter_mut().for_each(Vec::clear);
    }

    // separating sets

    /// Adds `s` (sorted) for both orderings unless already present.
    pub fn add_sepset(&mut self, a: usize, b: usize, s: &[usize]) {
        let mut s = s.to_vec();
        s.sort_unstable();
        for k in [self.ix(a, b), self.ix(b, a)] {
            if !self.sepsets[k].contains(&s) {
                self.sepsets[k].push(s.clone());
            }
        }
    }

    pub fn sepsets(&self, a: usize, b: usize) -> &[Vec<usize>] {
        &self.sepsets[self.ix(a, b)]
    }

    /// Sorted copy of the recorded sets, for order-insensitive comparison.
    pub fn sepsets_sorted(&self, a: usize, b: usize) -> Vec<Vec<usize>> {
        let mut v = self.sepsets(a, b).to_vec();
        v.sort();
        v
    }

    pub fn in_any_sepset(&self, a: usize, b: usize, c: usize) -> bool {
        self.sepsets(a, b).iter().any(|s| s.contains(&c))
    }

    // identifiers

    pub fn fresh_identifier(&mut self) -> HypothesisId {
        let id = HypothesisId(self.next_identifier);
        self.next_identifier += 1;
        id
    }

    pub fn identifier(&self, a: usize, b: usize) -> Option<HypothesisId> {
        self.identifiers[self.ix(a, b)]
    }

    pub fn set_identifier(&mut self, a: usize, b: usize, id: Option<HypothesisId>) {
        let i = self.ix(a, b);
        self.identifiers[i] = id;
    }

    /// Identifier assigned to the adjacency during skeleton finalization.
    pub fn skeleton_identifier(&self, a: usize, b: usize) -> Option<HypothesisId> {
        self.skeleton_ids[self.ix(a, b)]
    }

    /// Assigns one fresh identifier to both orderings, once.
    pub fn assign_skeleton_identifier(&mut self, a: usize, b: usize) {
        if self.skeleton_identifier(a, b).is_some() {
            return;
        }
        let id = Some(self.fresh_identifier());
        let (i, j) = (self.ix(a, b), self.ix(b, a));
        self.skeleton_ids[i] = id;
        self.skeleton_ids[j] = id;
        self.identifiers[i] = id;
        self.identifiers[j] = id;
    }

    /// Puts an edge back into its undirected state: P² cleared and the
    /// skeleton identifier restored in both orderings.
    pub fn reset_to_undirected(&mut self, a: usize, b: usize) {
        let (i, j) = (self.ix(a, b), self.ix(b, a));
        self.p2[i] = None;
        self.p2[j] = None;
        self.identifiers[i] = self.skeleton_ids[i];
        self.identifiers[j] = self.skeleton_ids[j];
    }

    /// Makes `a -> b` the only live orientation: the reverse P² and
    /// identifier cells are cleared.
    pub fn set_directed(&mut self, a: usize, b: usize, p2: f64, id: HypothesisId) {
        let (i, j) = (self.ix(a, b), self.ix(b, a));
        self.p2[i] = Some(p2);
        self.identifiers[i] = Some(id);
        self.p2[j] = None;
        self.identifiers[j] = None;
    }
}
