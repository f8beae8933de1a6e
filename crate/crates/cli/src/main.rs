//! `pcp`: simulate data, discover graphs with edge p-value bounds, score
//! them against a truth and run the simulation benchmark.
//!
//! Exit codes: 0 success, 1 bad input (unreadable or malformed files,
//! invalid options, degenerate data), 2 internal error.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use pcp_core::fdr::{evaluate, FdrConfig};
use pcp_core::graph::{shd, true_cpdag};
use pcp_core::harness::bench::{bench, summarize, BenchConfig, Suite};
use pcp_core::harness::io::{read_graph, read_hypotheses, write_graph, write_hypotheses};
use pcp_core::harness::{run_pipeline, PipelineConfig};
use pcp_core::simgen::{random_dag, random_sem, rng, sample};
use pcp_core::{Dataset, DatasetStats, MixedGraph, PipelineInput, VariantConfig};

#[derive(Parser)]
#[command(name = "pcp", version, about = "PC-p causal discovery with FDR control")]
struct Cli {
    /// Flat `key = value` file supplying defaults for any long option.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random DAG and linear Gaussian data from it.
    Simulate(SimulateArgs),
    /// Learn a CPDAG with edge p-value bounds from a CSV dataset.
    Discover(DiscoverArgs),
    /// Compare an estimated graph (and its hypotheses) with a truth.
    Evaluate(EvaluateArgs),
    /// Run the six-variant simulation benchmark.
    Bench(BenchArgs),
    /// Check oracle runs against the true CPDAG on random DAGs.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    vertices: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_in: Option<usize>,
    #[arg(long)]
    max_out: Option<usize>,
    /// Dataset CSV to write.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Where to write the true CPDAG.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Where to write the generating DAG.
    #[arg(long)]
    dag: Option<PathBuf>,
}

#[derive(Args)]
struct DiscoverArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Largest conditioning set size, or `none` for no cap.
    #[arg(long)]
    lmax: Option<String>,
    /// pcp, no-stable, no-ambig, no-stable-no-ambig, no-robust or legacy-pc.
    #[arg(long)]
    variant: Option<String>,
    /// FDR level used for pruning.
    #[arg(long)]
    fdr_q: Option<f64>,
    /// `fisher-z` or `spearman`.
    #[arg(long)]
    test: Option<String>,
    /// Output graph; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Hypotheses CSV; defaults to `<out>.hypotheses.csv`.
    #[arg(long)]
    hypotheses: Option<PathBuf>,
    /// Graph pruned at the FDR threshold.
    #[arg(long)]
    pruned: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    estimate: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Hypotheses CSV written by `discover`.
    #[arg(long)]
    hypotheses: Option<PathBuf>,
    #[arg(long)]
    fdr_q: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    /// lowdim, highdim or highdim-full.
    #[arg(long)]
    suite: Option<String>,
    /// Number of replicates; seeds 1..=N.
    #[arg(long)]
    replicates: Option<u64>,
    /// Explicit comma-separated seeds; overrides `--replicates`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    max_vertices: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Bad input, as opposed to a bug.
#[derive(Debug)]
struct InputError(anyhow::Error);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for InputError {}

fn input(e: impl Into<anyhow::Error>) -> anyhow::Error {
    InputError(e.into()).into()
}

trait InputContext<T> {
    fn input(self, what: impl FnOnce() -> String) -> anyhow::Result<T>;
}

impl<T, E: Into<anyhow::Error>> InputContext<T> for Result<T, E> {
    fn input(self, what: impl FnOnce() -> String) -> anyhow::Result<T> {
        self.map_err(|e| input(e.into().context(what())))
    }
}

struct Config(HashMap<String, String>);

impl Config {
    fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut map = HashMap::new();
        let Some(path) = path else { return Ok(Self(map)) };
        let text = fs::read_to_string(path).input(|| format!("reading config {}", path.display()))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| input(anyhow!("{}:{}: expected `key = value`", path.display(), i + 1)))?;
            map.insert(k.trim().replace('_', "-"), v.trim().to_owned());
        }
        Ok(Self(map))
    }

    /// The flag value if given, else the config value, else `default`.
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: Option<T>) -> anyhow::Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| input(anyhow!("config key {key}: {e}"))),
            None => Ok(default),
        }
    }

    fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> anyhow::Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.pick(flag, key, None)?
            .ok_or_else(|| input(anyhow!("missing --{key}")))
    }
}

fn write_out(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).input(|| format!("writing {}", path.display()))
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).input(|| format!("reading {}", path.display()))
}

fn parse_lmax(s: &str) -> anyhow::Result<Option<usize>> {
    match s {
        "none" | "inf" => Ok(None),
        _ => s
            .parse()
            .map(Some)
            .map_err(|_| input(anyhow!("--lmax must be a non-negative integer or `none`, got {s:?}"))),
    }
}

fn simulate(a: SimulateArgs, cfg: &Config) -> anyhow::Result<()> {
    let p: usize = cfg.require(a.vertices, "vertices")?;
    let n: usize = cfg.require(a.samples, "samples")?;
    let seed: u64 = cfg.pick(a.seed, "seed", Some(1))?.unwrap();
    let max_in: usize = cfg.pick(a.max_in, "max-in", Some(2))?.unwrap();
    let max_out: usize = cfg.pick(a.max_out, "max-out", Some(2))?.unwrap();
    let data_path: PathBuf = cfg.require(a.data, "data")?;
    if p < 2 || n < 1 {
        return Err(input(anyhow!("need at least 2 vertices and 1 sample")));
    }

    let dag = random_dag(p, max_in, max_out, &mut rng(seed, 0));
    let sem = random_sem(&dag, &mut rng(seed, 1));
    let values = sample(&sem, n, &mut rng(seed, 2));
    let names = Dataset::default_names(p);
    let ds = Dataset::new(names.clone(), values)?;
    let file = fs::File::create(&data_path).input(|| format!("creating {}", data_path.display()))?;
    ds.write_csv(std::io::BufWriter::new(file))?;

    if let Some(path) = cfg.pick(a.truth, "truth", None)? {
        write_out(&path, &write_graph(&true_cpdag(&dag), &names))?;
    }
    if let Some(path) = cfg.pick(a.dag, "dag", None)? {
        write_out(&path, &write_graph(&MixedGraph::from_dag(&dag), &names))?;
    }
    eprintln!("simulated {n} samples of {p} variables ({} edges)", dag.edge_count());
    Ok(())
}

fn discover(a: DiscoverArgs, cfg: &Config) -> anyhow::Result<()> {
    let data_path: PathBuf = cfg.require(a.data, "data")?;
    let alpha: f64 = cfg.pick(a.alpha, "alpha", Some(0.2))?.unwrap();
    let lmax = parse_lmax(&cfg.pick(a.lmax, "lmax", Some("2".to_owned()))?.unwrap())?;
    let variant: VariantConfig = cfg
        .pick(a.variant, "variant", Some("pcp".to_owned()))?
        .unwrap()
        .parse()
        .map_err(|e: String| input(anyhow!(e)))?;
    let q: f64 = cfg.pick(a.fdr_q, "fdr-q", Some(0.1))?.unwrap();
    let test = cfg.pick(a.test, "test", Some("fisher-z".to_owned()))?.unwrap();
    let out: Option<PathBuf> = cfg.pick(a.out, "out", None)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(input(anyhow!("--alpha must lie in (0, 1)")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(input(anyhow!("--fdr-q must lie in (0, 1)")));
    }

    let file = fs::File::open(&data_path).input(|| format!("opening {}", data_path.display()))?;
    let ds = Dataset::read_csv(std::io::BufReader::new(file)).input(|| format!("reading {}", data_path.display()))?;
    let stats = match test.as_str() {
        "fisher-z" => DatasetStats::from_data(&ds.values),
        "spearman" => DatasetStats::spearman_prepare(&ds.values),
        other => return Err(input(anyhow!("unknown --test {other:?}; expected fisher-z or spearman"))),
    }
    .input(|| "preparing the dataset".to_owned())?;

    let pipeline = PipelineConfig {
        alpha,
        l_max: lmax,
        order: None,
        fdr: FdrConfig {
            q,
            ..Default::default()
        },
    };
    let report = run_pipeline(&PipelineInput::Data(stats), variant, &pipeline, None).map_err(|e| {
        if e.is_data_error() {
            input(e)
        } else {
            e.into()
        }
    })?;

    let graph_text = write_graph(&report.graph, &ds.names);
    let hyp_text = write_hypotheses(&report.hypotheses, &ds.names);
    let hyp_path: Option<PathBuf> = cfg
        .pick(a.hypotheses, "hypotheses", None)?
        .or_else(|| out.as_ref().map(|o| PathBuf::from(format!("{}.hypotheses.csv", o.display()))));
    match &out {
        Some(path) => write_out(path, &graph_text)?,
        None => print!("{graph_text}"),
    }
    if let Some(path) = hyp_path {
        write_out(&path, &hyp_text)?;
    }
    if let Some(path) = cfg.pick::<PathBuf>(a.pruned, "pruned", None)? {
        write_out(&path, &write_graph(&report.fdr_report.pruned_graph, &ds.names))?;
    }
    eprintln!(
        "variant {}: {} edges, {} hypotheses, alpha* = {:e} at q = {q}, {} CI tests",
        report.variant,
        report.graph.edge_count(),
        report.hypotheses.len(),
        report.fdr_report.alpha_star,
        report.ci_test_count
    );
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs, cfg: &Config) -> anyhow::Result<()> {
    let truth_path: PathBuf = cfg.require(a.truth, "truth")?;
    let est_path: PathBuf = cfg.require(a.estimate, "estimate")?;
    let q: f64 = cfg.pick(a.fdr_q, "fdr-q", Some(0.1))?.unwrap();
    let (truth, names) = read_graph(&read_text(&truth_path)?, None).input(|| format!("parsing {}", truth_path.display()))?;
    let (estimate, _) =
        read_graph(&read_text(&est_path)?, Some(&names)).input(|| format!("parsing {}", est_path.display()))?;
    if estimate.vertex_count() != truth.vertex_count() {
        return Err(input(anyhow!("the two graphs have different vertex sets")));
    }
    println!("shd = {}", shd(&estimate, &truth)?);

    if let Some(path) = cfg.pick::<PathBuf>(a.hypotheses, "hypotheses", None)? {
        let hyps = read_hypotheses(&read_text(&path)?, &names).input(|| format!("parsing {}", path.display()))?;
        let fdr_cfg = FdrConfig {
            q,
            ..Default::default()
        };
        let r = evaluate(&estimate, &hyps, Some(&truth), &fdr_cfg).map_err(input)?;
        let m = r.metrics.expect("truth given");
        println!("hypotheses = {}", hyps.len());
        println!("alpha_star = {:e}", r.alpha_star);
        println!("realized_fdr = {}", r.realized_fdr.unwrap_or(0.0));
        println!("uc = {}\noc = {}\nue = {}\noe = {}", m.uc, m.oc, m.ue, m.oe);
    }
    Ok(())
}

fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| input(anyhow!("bad seed {t:?}"))))
        .collect()
}

fn bench_cmd(a: BenchArgs, cfg: &Config) -> anyhow::Result<()> {
    let suite: Suite = cfg
        .pick(a.suite, "suite", Some("lowdim".to_owned()))?
        .unwrap()
        .parse()
        .map_err(|e: String| input(anyhow!(e)))?;
    let seeds = match cfg.pick::<String>(a.seeds, "seeds", None)? {
        Some(s) => parse_seeds(&s)?,
        None => {
            let default = if suite == Suite::LowDim { 30 } else { 10 };
            let n: u64 = cfg.pick(a.replicates, "replicates", Some(default))?.unwrap();
            (1..=n).collect()
        }
    };
    let out: PathBuf = cfg.pick(a.out, "out", Some(PathBuf::from("bench-out")))?.unwrap();
    let mut bcfg = BenchConfig::default();
    bcfg.pipeline.alpha = cfg.pick(a.alpha, "alpha", Some(0.2))?.unwrap();

    let rows = bench(suite, &seeds, &bcfg, &out)?;
    println!("variant,vertices,replicates,mean_uc,mean_oc,mean_ue,mean_oe,mean_shd");
    for s in summarize(&rows) {
        println!(
            "{},{},{},{:.5},{:.5},{:.5},{:.5},{:.3}",
            s.variant, s.vertices, s.replicates, s.mean_uc, s.mean_oc, s.mean_ue, s.mean_oe, s.mean_shd
        );
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn oracle_check(a: OracleArgs, cfg: &Config) -> anyhow::Result<()> {
    let trials: u64 = cfg.pick(a.trials, "trials", Some(200))?.unwrap();
    let max_p: usize = cfg.pick(a.max_vertices, "max-vertices", Some(12))?.unwrap();
    let seed: u64 = cfg.pick(a.seed, "seed", Some(0))?.unwrap();
    if max_p < 2 {
        return Err(input(anyhow!("--max-vertices must be at least 2")));
    }
    let pipeline = PipelineConfig {
        l_max: None,
        ..Default::default()
    };
    let mut exact = 0;
    for t in 0..trials {
        let s = seed.wrapping_add(t);
        let p = 2 + (t as usize) % (max_p - 1);
        let dag = random_dag(p, 2, 2, &mut rng(s, 0));
        let truth = true_cpdag(&dag);
        let r = run_pipeline(&PipelineInput::Oracle(dag), VariantConfig::PCP, &pipeline, Some(&truth))?;
        if r.fdr_report.shd == Some(0) {
            exact += 1;
        } else {
            eprintln!("seed {s}: SHD {:?}", r.fdr_report.shd);
        }
    }
    println!("{exact}/{trials} oracle runs recovered the CPDAG");
    if exact != trials {
        bail!("oracle mismatch in {} runs", trials - exact);
    }
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("PCP_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| input(anyhow!("PCP_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(input(anyhow!("PCP_THREADS must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(a) => simulate(a, &cfg),
        Command::Discover(a) => discover(a, &cfg),
        Command::Evaluate(a) => evaluate_cmd(a, &cfg),
        Command::Bench(a) => bench_cmd(a, &cfg),
        Command::OracleCheck(a) => oracle_check(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InputError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
