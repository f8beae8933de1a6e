//! Conditional-independence tests.
//!
//! Every tester canonicalizes a query to `(min(a,b), max(a,b), sorted S)`
//! before computing anything, so `test(a, b, S)` and `test(b, a, S')` with
//! `S'` a permutation of `S` return bit-identical results.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::{d_separated, Dag, GraphError};

/// Correlations are clamped to `±(1 - CLAMP_EPS)` before `atanh`.
pub const CLAMP_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CiError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("{samples} samples are too few to condition on {conditioning} variables")]
    InsufficientSamples { samples: usize, conditioning: usize },
    #[error("variable {vertex} out of range for {count} variables")]
    OutOfRange { vertex: usize, count: usize },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

impl From<GraphError> for CiError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::VertexOutOfRange { vertex, count } => CiError::OutOfRange { vertex, count },
            other => CiError::InvalidQuery(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiResult {
    pub p_value: f64,
    /// The z statistic; 0 for oracle and scripted answers.
    pub statistic: f64,
    pub conditioning_size: usize,
}

impl CiResult {
    fn decision(independent: bool, conditioning_size: usize) -> Self {
        Self {
            p_value: if independent { 1.0 } else { 0.0 },
            statistic: 0.0,
            conditioning_size,
        }
    }
}

/// A conditional-independence test `a ⟂ b | s`.
pub trait CiTest: Sync {
    fn test(&self, a: usize, b: usize, s: &[usize]) -> Result<CiResult, CiError>;
    fn variable_count(&self) -> usize;
}

impl<T: CiTest + ?Sized> CiTest for &T {
    fn test(&self, a: usize, b: usize, s: &[usize]) -> Result<CiResult, CiError> {
        (**self).test(a, b, s)
    }
    fn variable_count(&self) -> usize {
        (**self).variable_count()
    }
}

fn canonical(a: usize, b: usize, s: &[usize], d: usize) -> Result<(usize, usize, Vec<usize>), CiError> {
    for &v in [a, b].iter().chain(s) {
        if v >= d {
            return Err(CiError::OutOfRange { vertex: v, count: d });
        }
    }
    if a == b {
        return Err(CiError::InvalidQuery(format!("both endpoints are {a}")));
    }
    let mut s = s.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.contains(&a) || s.contains(&b) {
        return Err(CiError::InvalidQuery(
            "conditioning set contains an endpoint".into(),
        ));
    }
    Ok((a.min(b), a.max(b), s))
}

/// Sample size plus the correlation matrix of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    n: usize,
    corr: DMatrix<f64>,
}

impl DatasetStats {
    /// Validates a supplied correlation matrix.
    pub fn new(n: usize, corr: DMatrix<f64>) -> Result<Self, CiError> {
        if n == 0 {
            return Err(CiError::Degenerate("zero samples".into()));
        }
        if !corr.is_square() {
            return Err(CiError::Degenerate("correlation matrix is not square".into()));
        }
        let d = corr.nrows();
        for i in 0..d {
            if corr[(i, i)] != 1.0 {
                return Err(CiError::Degenerate(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                let r = corr[(i, j)];
                if !(-1.0..=1.0).contains(&r) || r != corr[(j, i)] {
                    return Err(CiError::Degenerate(format!(
                        "entry ({i}, {j}) is not a symmetric correlation"
                    )));
                }
            }
        }
        Ok(Self { n, corr })
    }

    /// Pearson correlations of the columns of an `n × d` data matrix.
    pub fn from_data(data: &DMatrix<f64>) -> Result<Self, CiError> {
        let (n, d) = data.shape();
        if n < 2 {
            return Err(CiError::Degenerate("need at least two samples".into()));
        }
        let mut centered = data.clone();
        for j in 0..d {
            let mut col = centered.column_mut(j);
            let mean = col.mean();
            col.add_scalar_mut(-mean);
            let norm = col.norm();
            if norm == 0.0 || !norm.is_finite() {
                return Err(CiError::Degenerate(format!("column {j} is constant")));
            }
            col /= norm;
        }
        let mut corr = centered.tr_mul(&centered);
        for i in 0..d {
            corr[(i, i)] = 1.0;
            for j in 0..i {
                let r = corr[(i, j)].clamp(-1.0, 1.0);
                corr[(i, j)] = r;
                corr[(j, i)] = r;
            }
        }
        Ok(Self { n, corr })
    }

    /// Spearman correlations: each column is replaced by its average ranks.
    pub fn spearman_prepare(data: &DMatrix<f64>) -> Result<Self, CiError> {
        if data.nrows() < 4 {
            return Err(CiError::Degenerate("need at least four samples".into()));
        }
        let mut ranked = data.clone();
        for j in 0..data.ncols() {
            let ranks = average_ranks(data.column(j).as_slice());
            ranked.set_column(j, &DVector::from_vec(ranks));
        }
        Self::from_data(&ranked)
    }

    pub fn sample_count(&self) -> usize {
        self.n
    }

    pub fn variable_count(&self) -> usize {
        self.corr.nrows()
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.corr
    }

    /// Partial correlation of `a` and `b` given `s`, from the residual
    /// covariance of `(a, b)` after regressing on `s`.
    pub fn partial_correlation(&self, a: usize, b: usize, s: &[usize]) -> Result<f64, CiError> {
        let (a, b, s) = canonical(a, b, s, self.variable_count())?;
        self.partial_correlation_canonical(a, b, &s)
    }

    fn partial_correlation_canonical(&self, a: usize, b: usize, s: &[usize]) -> Result<f64, CiError> {
        let c = &self.corr;
        if s.is_empty() {
            return Ok(c[(a, b)]);
        }
        let k = s.len();
        let sigma_ss = DMatrix::from_fn(k, k, |i, j| c[(s[i], s[j])]);
        let cross = DMatrix::from_fn(k, 2, |i, j| c[(s[i], if j == 0 { a } else { b })]);
        let chol = sigma_ss
            .cholesky()
            .ok_or_else(|| CiError::Degenerate("conditioning submatrix is singular".into()))?;
        let solved = chol.solve(&cross);
        let adj = cross.tr_mul(&solved);
        let r00 = 1.0 - adj[(0, 0)];
        let r11 = 1.0 - adj[(1, 1)];
        let r01 = c[(a, b)] - adj[(0, 1)];
        if r00 <= 1e-12 || r11 <= 1e-12 {
            return Err(CiError::Degenerate(
                "an endpoint is determined by the conditioning set".into(),
            ));
        }
        Ok((r01 / (r00 * r11).sqrt()).clamp(-1.0, 1.0))
    }
}

/// 1-based ranks, ties receiving the average of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Two-sided normal tail probability `2(1 - Φ(|z|))`.
pub fn two_sided_normal_p(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Fisher's z test on (possibly rank-transformed) Gaussian data.
#[derive(Debug, Clone)]
pub struct FisherZ {
    stats: DatasetStats,
}

impl FisherZ {
    pub fn new(stats: DatasetStats) -> Self {
        Self { stats }
    }

    pub fn from_data(data: &DMatrix<f64>) -> Result<Self, CiError> {
        DatasetStats::from_data(data).map(Self::new)
    }

    pub fn spearman(data: &DMatrix<f64>) -> Result<Self, CiError> {
        DatasetStats::spearman_prepare(data).map(Self::new)
    }

    pub fn stats(&self) -> &DatasetStats {
        &self.stats
    }
}

impl CiTest for FisherZ {
    fn test(&self, a: usize, b: usize, s: &[usize]) -> Result<CiResult, CiError> {
        let (a, b, s) = canonical(a, b, s, self.stats.variable_count())?;
        let n = self.stats.n;
        if n < s.len() + 4 {
            return Err(CiError::InsufficientSamples {
                samples: n,
                conditioning: s.len(),
            });
        }
        let r = match self.stats.partial_correlation_canonical(a, b, &s) {
            Ok(r) => r,
            Err(CiError::Degenerate(_)) => {
                return Ok(CiResult {
                    p_value: 0.0,
                    statistic: f64::INFINITY,
                    conditioning_size: s.len(),
                })
            }
            Err(e) => return Err(e),
        };
        let r = r.clamp(-1.0 + CLAMP_EPS, 1.0 - CLAMP_EPS);
        let z = r.atanh() * ((n - s.len() - 3) as f64).sqrt();
        Ok(CiResult {
            p_value: two_sided_normal_p(z),
            statistic: z,
            conditioning_size: s.len(),
        })
    }

    fn variable_count(&self) -> usize {
        self.stats.variable_count()
    }
}

/// d-separation oracle: p = 1 when d-separated, 0 otherwise.
#[derive(Debug, Clone)]
pub struct OracleTest {
    dag: Dag,
}

impl OracleTest {
    pub fn new(dag: Dag) -> Self {
        Self { dag }
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }
}

impl CiTest for OracleTest {
    fn test(&self, a: usize, b: usize, s: &[usize]) -> Result<CiResult, CiError> {
        let (a, b, s) = canonical(a, b, s, self.dag.vertex_count())?;
        let sep = d_separated(&self.dag, a, b, &s)?;
        Ok(CiResult::decision(sep, s.len()))
    }

    fn variable_count(&self) -> usize {
        self.dag.vertex_count()
    }
}

/// Prescribed decisions for chosen queries; everything else goes to `fallback`.
#[derive(Debug, Clone)]
pub struct ScriptedTest<T> {
    script: HashMap<(usize, usize, Vec<usize>), bool>,
    fallback: T,
}

impl<T: CiTest> ScriptedTest<T> {
    pub fn new(fallback: T) -> Self {
        Self {
            script: HashMap::new(),
            fallback,
        }
    }

    /// Scripts `a ⟂ b | s` to be judged independent (`true`) or dependent.
    pub fn with(mut self, a: usize, b: usize, s: &[usize], independent: bool) -> Self {
        let key = canonical(a, b, s, self.fallback.variable_count())
            .expect("scripted query must be valid");
        self.script.insert(key, independent);
        self
    }
}

impl<T: CiTest> CiTest for ScriptedTest<T> {
    fn test(&self, a: usize, b: usize, s: &[usize]) -> Result<CiResult, CiError> {
        let key = canonical(a, b, s, self.fallback.variable_count())?;
        match self.script.get(&key) {
            Some(&independent) => Ok(CiResult::decision(independent, key.2.len())),
            None => self.fallback.test(key.0, key.1, &key.2),
        }
    }

    fn variable_count(&self) -> usize {
        self.fallback.variable_count()
    }
}
