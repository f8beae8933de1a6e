//! Simulation benchmark: random DAGs, linear Gaussian data, all six
//! variants per replicate.
//!
//! Output files in the target directory:
//!
//! * `metrics.csv`: one row per variant and replicate.
//! * `curves.csv`: BY estimate and realized FDR on the α grid.
//! * `summary.csv`: per-variant means (and SDs) over replicates.
//! * `timing.csv`: wall-clock seconds per row; the only file that is not
//!   reproducible byte for byte.

use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;

use super::{run_pipeline, PipelineConfig, PipelineError, PipelineInput, RunReport, VariantConfig};
use crate::citest::DatasetStats;
use crate::graph::true_cpdag;
use crate::simgen::{random_dag, random_sem, rng, sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// 20 vertices, n = 10 000.
    LowDim,
    /// 100 vertices, n = 1000.
    HighDim,
    /// 100, 200 and 300 vertices, n = 1000.
    HighDimFull,
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lowdim" => Ok(Suite::LowDim),
            "highdim" => Ok(Suite::HighDim),
            "highdim-full" => Ok(Suite::HighDimFull),
            _ => Err(format!("unknown suite {s:?}; expected lowdim, highdim or highdim-full")),
        }
    }
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::LowDim => "lowdim",
            Suite::HighDim => "highdim",
            Suite::HighDimFull => "highdim-full",
        }
    }

    /// `(vertices, samples)` for each replicate seed.
    pub fn sizes(self) -> &'static [(usize, usize)] {
        match self {
            Suite::LowDim => &[(20, 10_000)],
            Suite::HighDim => &[(100, 1000)],
            Suite::HighDimFull => &[(100, 1000), (200, 1000), (300, 1000)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub pipeline: PipelineConfig,
    pub max_in: usize,
    pub max_out: usize,
    pub variants: Vec<VariantConfig>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            max_in: 2,
            max_out: 2,
            variants: VariantConfig::ALL.to_vec(),
        }
    }
}

/// One simulated problem.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub seed: u64,
    pub vertices: usize,
    pub samples: usize,
    pub dag: crate::graph::Dag,
    pub stats: DatasetStats,
}

/// DAG from stream 0 of `seed`, SEM from stream 1, data from stream 2.
pub fn make_replicate(seed: u64, vertices: usize, samples: usize, max_in: usize, max_out: usize) -> Replicate {
    let dag = random_dag(vertices, max_in, max_out, &mut rng(seed, 0));
    let sem = random_sem(&dag, &mut rng(seed, 1));
    let data = sample(&sem, samples, &mut rng(seed, 2));
    let stats = DatasetStats::from_data(&data).expect("simulated columns have positive variance");
    Replicate {
        seed,
        vertices,
        samples,
        dag,
        stats,
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub suite: Suite,
    pub seed: u64,
    pub vertices: usize,
    pub samples: usize,
    pub report: RunReport,
}

pub const METRICS_HEADER: &str =
    "suite,variant,seed,vertices,samples,edges,hypotheses,uc,oc,ue,oe,shd,alpha_star,realized_fdr,ci_tests";

impl BenchRow {
    pub fn metrics(&self) -> crate::fdr::BiasMetrics {
        self.report.fdr_report.metrics.expect("bench runs always score against the truth")
    }

    fn csv(&self) -> String {
        let m = self.metrics();
        let f = &self.report.fdr_report;
        format!(
            "{},{},{},{},{},{},{},{:?},{:?},{:?},{:?},{},{:?},{:?},{}",
            self.suite.name(),
            self.report.variant.name(),
            self.seed,
            self.vertices,
            self.samples,
            self.report.graph.edge_count(),
            self.report.hypotheses.len(),
            m.uc,
            m.oc,
            m.ue,
            m.oe,
            f.shd.unwrap_or(0),
            f.alpha_star,
            f.realized_fdr.unwrap_or(0.0),
            self.report.ci_test_count,
        )
    }
}

/// Runs every variant on every replicate. Rows come back in
/// (size, seed, variant) order whatever the thread scheduling.
pub fn run_suite(suite: Suite, seeds: &[u64], cfg: &BenchConfig) -> Result<Vec<BenchRow>, PipelineError> {
    let jobs: Vec<(usize, usize, u64)> = suite
        .sizes()
        .iter()
        .flat_map(|&(p, n)| seeds.iter().map(move |&s| (p, n, s)))
        .collect();
    let per_job: Vec<Vec<BenchRow>> = jobs
        .par_iter()
        .map(|&(p, n, seed)| {
            let rep = make_replicate(seed, p, n, cfg.max_in, cfg.max_out);
            let truth = true_cpdag(&rep.dag);
            let input = PipelineInput::Data(rep.stats.clone());
            cfg.variants
                .iter()
                .map(|&v| {
                    run_pipeline(&input, v, &cfg.pipeline, Some(&truth)).map(|report| BenchRow {
                        suite,
                        seed,
                        vertices: p,
                        samples: n,
                        report,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: String,
    pub vertices: usize,
    pub replicates: usize,
    pub mean_uc: f64,
    pub sd_uc: f64,
    pub mean_oc: f64,
    pub sd_oc: f64,
    pub mean_ue: f64,
    pub mean_oe: f64,
    pub mean_shd: f64,
}

pub const SUMMARY_HEADER: &str = "variant,vertices,replicates,mean_uc,sd_uc,mean_oc,sd_oc,mean_ue,mean_oe,mean_shd";

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Per (variant, vertex count) aggregates in first-appearance order.
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(&'static str, usize)> = Vec::new();
    for r in rows {
        let k = (r.report.variant.name(), r.vertices);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(name, p)| {
            let sel: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| r.report.variant.name() == name && r.vertices == p)
                .collect();
            let col = |f: &dyn Fn(&BenchRow) -> f64| sel.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (mean_uc, sd_uc) = mean_sd(&col(&|r| r.metrics().uc));
            let (mean_oc, sd_oc) = mean_sd(&col(&|r| r.metrics().oc));
            SummaryRow {
                variant: name.to_owned(),
                vertices: p,
                replicates: sel.len(),
                mean_uc,
                sd_uc,
                mean_oc,
                sd_oc,
                mean_ue: mean_sd(&col(&|r| r.metrics().ue)).0,
                mean_oe: mean_sd(&col(&|r| r.metrics().oe)).0,
                mean_shd: mean_sd(&col(&|r| r.report.fdr_report.shd.unwrap_or(0) as f64)).0,
            }
        })
        .collect()
}

/// Writes the four CSV files into `dir` (created if missing).
pub fn write_outputs(rows: &[BenchRow], dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;

    let mut metrics = String::from(METRICS_HEADER);
    metrics.push('\n');
    let mut curves = String::from("suite,variant,seed,vertices,alpha,estimate,realized_fdr\n");
    let mut timing = String::from("suite,variant,seed,vertices,wall_seconds\n");
    for r in rows {
        metrics.push_str(&r.csv());
        metrics.push('\n');
        let f = &r.report.fdr_report;
        let realized = f.realized_curve.as_deref().unwrap_or(&[]);
        for (i, (&a, &e)) in f.alpha_grid.iter().zip(&f.estimates).enumerate() {
            curves.push_str(&format!(
                "{},{},{},{},{:?},{:?},{:?}\n",
                r.suite.name(),
                r.report.variant.name(),
                r.seed,
                r.vertices,
                a,
                e,
                realized.get(i).copied().unwrap_or(f64::NAN)
            ));
        }
        timing.push_str(&format!(
            "{},{},{},{},{:.6}\n",
            r.suite.name(),
            r.report.variant.name(),
            r.seed,
            r.vertices,
            r.report.wall_time.as_secs_f64()
        ));
    }

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for s in summarize(rows) {
        summary.push_str(&format!(
            "{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
            s.variant, s.vertices, s.replicates, s.mean_uc, s.sd_uc, s.mean_oc, s.sd_oc, s.mean_ue, s.mean_oe, s.mean_shd
        ));
    }

    fs::write(dir.join("metrics.csv"), metrics)?;
    fs::write(dir.join("curves.csv"), curves)?;
    fs::write(dir.join("summary.csv"), summary)?;
    fs::write(dir.join("timing.csv"), timing)?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// [`run_suite`] followed by [`write_outputs`].
pub fn bench(suite: Suite, seeds: &[u64], cfg: &BenchConfig, dir: &Path) -> Result<Vec<BenchRow>, BenchError> {
    let rows = run_suite(suite, seeds, cfg)?;
    write_outputs(&rows, dir)?;
    Ok(rows)
}
