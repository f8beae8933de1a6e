//! End-to-end runs, the six-variant ablation and file formats.

pub mod bench;
pub mod io;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::citest::{CiError, CiResult, CiTest, DatasetStats, FisherZ, OracleTest};
use crate::fdr::{evaluate, FdrConfig, FdrError, FdrReport, HypothesisSet};
use crate::graph::{Dag, MixedGraph};
use crate::ledger::PValueLedger;
use crate::meek::{apply_orientation_rules, MeekOptions, Provenance};
use crate::skeleton::{discover_skeleton, SkeletonConfig, SkeletonMode};
use crate::vstruct::{orient_v_structures, BoundPolicy, VStructOptions, VStructRecord};

/// Which of the pipeline's safeguards are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VariantConfig {
    pub stable: bool,
    pub ambiguation: bool,
    pub policy: BoundPolicy,
    /// Classic PC: order-dependent skeleton, over-writing orientations,
    /// else-if rules, each edge bounded by whatever oriented it last.
    pub legacy_pc: bool,
}

impl VariantConfig {
    pub const PCP: Self = Self {
        stable: true,
        ambiguation: true,
        policy: BoundPolicy::Robust,
        legacy_pc: false,
    };
    pub const NO_STABLE: Self = Self {
        stable: false,
        ..Self::PCP
    };
    pub const NO_AMBIG: Self = Self {
        ambiguation: false,
        ..Self::PCP
    };
    pub const NO_STABLE_NO_AMBIG: Self = Self {
        stable: false,
        ambiguation: false,
        ..Self::PCP
    };
    pub const NO_ROBUST: Self = Self {
        policy: BoundPolicy::NonRobust,
        ..Self::PCP
    };
    pub const LEGACY_PC: Self = Self {
        stable: false,
        ambiguation: false,
        policy: BoundPolicy::Robust,
        legacy_pc: true,
    };

    /// The ablation matrix, in reporting order.
    pub const ALL: [Self; 6] = [
        Self::PCP,
        Self::NO_STABLE,
        Self::NO_AMBIG,
        Self::NO_STABLE_NO_AMBIG,
        Self::NO_ROBUST,
        Self::LEGACY_PC,
    ];

    pub fn name(&self) -> &'static str {
        match *self {
            Self::PCP => "pcp",
            Self::NO_STABLE => "no-stable",
            Self::NO_AMBIG => "no-ambig",
            Self::NO_STABLE_NO_AMBIG => "no-stable-no-ambig",
            Self::NO_ROBUST => "no-robust",
            Self::LEGACY_PC => "legacy-pc",
            _ => "custom",
        }
    }

    /// Legacy PC implies the order-dependent skeleton and over-writing.
    pub fn normalized(mut self) -> Self {
        if self.legacy_pc {
            self.stable = false;
            self.ambiguation = false;
        }
        self
    }
}

impl fmt::Display for VariantConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantConfig {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|v| v.name()).collect();
                format!("unknown variant {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// Data to run on: sample correlations, or a DAG queried as a d-separation
/// oracle.
#[derive(Debug, Clone)]
pub enum PipelineInput {
    Data(DatasetStats),
    Oracle(Dag),
}

impl PipelineInput {
    pub fn variable_count(&self) -> usize {
        match self {
            PipelineInput::Data(s) => s.variable_count(),
            PipelineInput::Oracle(d) => d.vertex_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub alpha: f64,
    pub l_max: Option<usize>,
    /// Skeleton processing order; identity when `None`.
    pub order: Option<Vec<usize>>,
    pub fdr: FdrConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            l_max: Some(2),
            order: None,
            fdr: FdrConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ci(#[from] CiError),
    #[error(transparent)]
    Fdr(#[from] FdrError),
}

impl PipelineError {
    /// Problems with the input rather than with the implementation.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            PipelineError::Ci(
                CiError::Degenerate(_) | CiError::InsufficientSamples { .. } | CiError::OutOfRange { .. }
            )
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub variant: VariantConfig,
    pub graph: MixedGraph,
    pub ledger: PValueLedger,
    pub hypotheses: HypothesisSet,
    pub fdr_report: FdrReport,
    pub v_structures: Vec<VStructRecord>,
    pub provenance: Provenance,
    pub wall_time: Duration,
    pub ci_test_count: usize,
}

struct Counting<T> {
    inner: T,
    count: AtomicUsize,
}

impl<T: CiTest> CiTest for Counting<T> {
    fn test(&self, a: usize, b: usize, s: &[usize]) -> Result<CiResult, CiError> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.test(a, b, s)
    }
    fn variable_count(&self) -> usize {
        self.inner.variable_count()
    }
}

/// Skeleton, colliders, orientation rules and FDR analysis under one
/// variant. Metrics are filled in when `truth` (a CPDAG) is given.
pub fn run_pipeline(
    input: &PipelineInput,
    variant: VariantConfig,
    cfg: &PipelineConfig,
    truth: Option<&MixedGraph>,
) -> Result<RunReport, PipelineError> {
    match input {
        PipelineInput::Data(stats) => run_with(FisherZ::new(stats.clone()), variant, cfg, truth),
        PipelineInput::Oracle(dag) => run_with(OracleTest::new(dag.clone()), variant, cfg, truth),
    }
}

/// [`run_pipeline`] with any tester.
pub fn run_with<T: CiTest>(
    tester: T,
    variant: VariantConfig,
    cfg: &PipelineConfig,
    truth: Option<&MixedGraph>,
) -> Result<RunReport, PipelineError> {
    let start = Instant::now();
    let variant = variant.normalized();
    let tester = Counting {
        inner: tester,
        count: AtomicUsize::new(0),
    };
    let skel = SkeletonConfig {
        alpha: cfg.alpha,
        l_max: cfg.l_max,
        mode: if variant.stable {
            SkeletonMode::Stable
        } else {
            SkeletonMode::Legacy
        },
        order: cfg.order.clone(),
    };
    let (mut graph, mut ledger) = discover_skeleton(&tester, &skel)?;
    let v_structures = orient_v_structures(
        &mut graph,
        &mut ledger,
        &tester,
        &VStructOptions {
            l_max: cfg.l_max,
            policy: variant.policy,
            ambiguation: variant.ambiguation,
            last_writer_only: variant.legacy_pc,
        },
    )?;
    let provenance = apply_orientation_rules(
        &mut graph,
        &mut ledger,
        &MeekOptions {
            policy: variant.policy,
            ambiguation: variant.ambiguation,
            legacy: variant.legacy_pc,
        },
    )?;
    let hypotheses = HypothesisSet::from_run(&graph, &ledger)?;
    let fdr_report = evaluate(&graph, &hypotheses, truth, &cfg.fdr)?;
    Ok(RunReport {
        variant,
        graph,
        ledger,
        hypotheses,
        fdr_report,
        v_structures,
        provenance,
        wall_time: start.elapsed(),
        ci_test_count: tester.count.into_inner(),
    })
}
