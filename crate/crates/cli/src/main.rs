use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use qkdisc::data::import_hep;
use qkdisc::genome::KernelGenome;
use qkdisc::optimizers::OptimizerKind;
use qkdisc::pauli::{default_threshold, dla_closure};
use qkdisc::pipeline::{run_assess, run_criteria, run_discover, RunConfig, DEFAULT_DLA_CAP};
use qkdisc::roc::{read_scores_csv, roc_auc};

#[derive(Parser)]
#[command(name = "qkdisc", version, about = "Quantum kernel discovery for anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a kernel genome and write the best one with its trace.
    Discover(DiscoverArgs),
    /// Train a one-class SVM with a genome and report ROC/AUC over test repeats.
    Assess(AssessArgs),
    /// Evaluate the configured criteria for a genome.
    Criteria(CriteriaArgs),
    /// Rank of the dynamical Lie algebra generated by a genome.
    Dla(DlaArgs),
    /// ROC curve and AUC from a `score,label` CSV.
    Roc(RocArgs),
    /// Convert SM and BSM latent arrays (.npy) into a labeled CSV.
    ImportHep(ImportArgs),
}

#[derive(Args)]
struct Overrides {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Criterion weight `name=value`; repeatable, replaces the configured weights.
    #[arg(long = "weight", value_parser = parse_weight)]
    weights: Vec<(String, f64)>,
    #[arg(long)]
    nu: Option<f64>,
}

#[derive(Args)]
struct DiscoverArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(short, long)]
    m: Option<usize>,
    /// Bayesian iterations.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Trace of an interrupted run with the same configuration.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct AssessArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long)]
    genome: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CriteriaArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long)]
    genome: PathBuf,
}

#[derive(Args)]
struct DlaArgs {
    #[arg(long)]
    genome: PathBuf,
    #[arg(long)]
    threshold: Option<usize>,
}

#[derive(Args)]
struct RocArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Write the curve as CSV here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ImportArgs {
    #[arg(long)]
    sm: PathBuf,
    #[arg(long)]
    bsm: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_weight(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or("expected name=value")?;
    let v: f64 = value.parse().map_err(|_| format!("bad weight {value:?}"))?;
    Ok((name.to_string(), v))
}

fn load_config(o: &Overrides) -> Result<RunConfig> {
    let mut c = match &o.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &o.data {
        c.data.path = Some(d.clone());
    }
    if let Some(d) = &o.output {
        c.output = Some(d.clone());
    }
    if !o.weights.is_empty() {
        c.criteria.weights = o.weights.iter().cloned().collect::<BTreeMap<_, _>>();
    }
    if let Some(nu) = o.nu {
        c.criteria.nu = nu;
    }
    Ok(c)
}

fn read_genome(path: &Path) -> Result<KernelGenome> {
    Ok(KernelGenome::read_qkg(path)?)
}

fn discover(a: DiscoverArgs) -> Result<()> {
    let mut c = load_config(&a.common)?;
    if let Some(k) = &a.optimizer {
        c.optimizer.kind = k.parse::<OptimizerKind>()?;
    }
    if let Some(b) = a.budget {
        c.optimizer.budget = b;
    }
    if let Some(m) = a.m {
        c.space.m = m;
    }
    if let Some(t) = a.iterations {
        c.optimizer.bayesian.iterations = t;
    }
    if let Some(s) = a.seed {
        c.seeds.optimizer = s;
    }
    if let Some(s) = a.split_seed {
        c.seeds.split = s;
    }
    let out = run_discover(&c, a.resume.as_deref())?;
    let dir = c.output_dir()?;
    println!("optimizer   {}", out.summary.optimizer);
    println!("evaluations {}/{}", out.summary.evaluations, out.summary.budget);
    println!("best cost   {}", out.summary.best_cost);
    println!("best genome {}", out.best.flat_string());
    for (name, v) in &out.summary.best_criteria {
        println!("  {name} = {v}");
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn assess(a: AssessArgs) -> Result<()> {
    let mut c = load_config(&a.common)?;
    if let Some(s) = a.seed {
        c.seeds.assessment = s;
    }
    let genome = read_genome(&a.genome)?;
    let s = run_assess(&c, &genome, c.output.as_deref())?;
    for (i, r) in s.repeats.iter().enumerate() {
        println!("repeat {i}: auc {:.6} accuracy {:.6}", r.auc, r.accuracy);
    }
    println!("auc      {:.6} ± {:.6}", s.auc_mean, s.auc_std);
    println!("accuracy {:.6} ± {:.6}", s.accuracy_mean, s.accuracy_std);
    if s.degenerate {
        println!("warning: constant training kernel (degenerate model)");
    }
    if let Some(dir) = &c.output {
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn criteria(a: CriteriaArgs) -> Result<()> {
    let c = load_config(&a.common)?;
    let genome = read_genome(&a.genome)?;
    let cost = run_criteria(&c, &genome)?;
    println!("{}", serde_json::to_string_pretty(&cost)?);
    Ok(())
}

fn dla(a: DlaArgs) -> Result<()> {
    let genome = read_genome(&a.genome)?;
    let threshold = a
        .threshold
        .unwrap_or_else(|| default_threshold(genome.n).unwrap_or(DEFAULT_DLA_CAP).min(DEFAULT_DLA_CAP));
    let closure = dla_closure(&genome.generators()?, threshold)?;
    println!("rank {}", closure.rank);
    println!("threshold {threshold}");
    println!("truncated {}", closure.truncated);
    Ok(())
}

fn roc(a: RocArgs) -> Result<()> {
    let (scores, labels) = read_scores_csv(&a.scores)?;
    let curve = roc_auc(&scores, &labels)?;
    println!("auc {}", curve.auc);
    if let Some(path) = &a.output {
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        curve.write_csv(std::io::BufWriter::new(file))?;
    }
    Ok(())
}

fn import(a: ImportArgs) -> Result<()> {
    let ds = import_hep(&a.sm, &a.bsm, &a.out)?;
    println!("wrote {} rows with {} features to {}", ds.len(), ds.dim(), a.out.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<qkdisc::Error>() {
        Some(e) => e.exit_code() as u8,
        None if err.downcast_ref::<std::io::Error>().is_some() => 2,
        None => 1,
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
    let result = match cli.command {
        Command::Discover(a) => discover(a),
        Command::Assess(a) => assess(a),
        Command::Criteria(a) => criteria(a),
        Command::Dla(a) => dla(a),
        Command::Roc(a) => roc(a),
        Command::ImportHep(a) => import(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
