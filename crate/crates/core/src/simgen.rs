//! Synthetic ground truth: degree-bounded random DAGs and linear Gaussian
//! structural equation models.
//!
//! All randomness goes through [`Rng`], ChaCha8 seeded from a `u64`.
//! Independent draws for the same seed use separate streams, so replicates
//! can be generated in any order or in parallel.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::graph::Dag;

pub type Rng = ChaCha8Rng;

/// Generator for `seed`, positioned on stream `stream`.
pub fn rng(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// A random order, then every forward pair in random order, each kept with
/// probability 1/2 while both degree caps allow it.
pub fn random_dag(p: usize, max_in: usize, max_out: usize, rng: &mut Rng) -> Dag {
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut candidates: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .map(|(i, j)| (order[i], order[j]))
        .collect();
    candidates.shuffle(rng);
    let mut indeg = vec![0; p];
    let mut outdeg = vec![0; p];
    let mut edges = Vec::new();
    for (u, v) in candidates {
        if outdeg[u] < max_out && indeg[v] < max_in && rng.random_bool(0.5) {
            outdeg[u] += 1;
            indeg[v] += 1;
            edges.push((u, v));
        }
    }
    Dag::new(p, &edges).expect("edges follow a topological order")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemModel {
    pub dag: Dag,
    /// `weights[(parent, child)]`; zero off the edge set.
    pub weights: DMatrix<f64>,
    pub noise_sd: Vec<f64>,
}

/// Weights and noise scales drawn from the standard normal; noise scales
/// are taken in absolute value and floored at 0.1.
pub fn random_sem(dag: &Dag, rng: &mut Rng) -> SemModel {
    let p = dag.vertex_count();
    let mut weights = DMatrix::zeros(p, p);
    for (u, v) in dag.edges() {
        weights[(u, v)] = rng.sample(StandardNormal);
    }
    let noise_sd = (0..p)
        .map(|_| rng.sample::<f64, _>(StandardNormal).abs().max(0.1))
        .collect();
    SemModel {
        dag: dag.clone(),
        weights,
        noise_sd,
    }
}

impl SemModel {
    /// `(I - W)^{-T} D (I - W)^{-1}` with `D` the noise variances.
    pub fn population_covariance(&self) -> DMatrix<f64> {
        let p = self.dag.vertex_count();
        let inv = (DMatrix::identity(p, p) - &self.weights)
            .try_inverse()
            .expect("I - W is unit triangular for a DAG");
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            p,
            self.noise_sd.iter().map(|s| s * s),
        ));
        inv.transpose() * d * inv
    }

    pub fn population_correlation(&self) -> DMatrix<f64> {
        let cov = self.population_covariance();
        let sd: Vec<f64> = (0..cov.nrows()).map(|i| cov[(i, i)].sqrt()).collect();
        DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| cov[(i, j)] / (sd[i] * sd[j]))
    }
}

/// `n × p` samples, each row generated in topological order.
pub fn sample(sem: &SemModel, n: usize, rng: &mut Rng) -> DMatrix<f64> {
    let p = sem.dag.vertex_count();
    let order = sem.dag.topological_order();
    let mut data = DMatrix::zeros(n, p);
    for row in 0..n {
        for &v in &order {
            let mut x = sem.noise_sd[v] * rng.sample::<f64, _>(StandardNormal);
            for &u in sem.dag.parents(v) {
                x += sem.weights[(u, v)] * data[(row, u)];
            }
            data[(row, v)] = x;
        }
    }
    data
}
