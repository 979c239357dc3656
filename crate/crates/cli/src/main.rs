use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gcmvsc::data::{read_labels, write_labels, write_matrix_csv, ViewSpec};
use gcmvsc::pipeline::{bench_size, landmark_sweep, BenchConfig, PipelineTimings};
use gcmvsc::{
    accuracy, cluster, generate_synthetic, kmedoids_landmarks, load_manifest, nmi, random_landmarks, write_dataset,
    ClampMode, ClusterOptions, LandmarkMethod, MatrixFormat, SigmaMode, SyntheticSpec,
};

#[derive(Parser)]
#[command(name = "gcmvsc", version, about = "Multi-view spectral clustering on landmark graphs")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a dataset described by a manifest.
    Cluster(ClusterArgs),
    /// Score predicted labels against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic multi-view dataset.
    Synth(SynthArgs),
    /// Select landmark samples and write their indices.
    Landmarks(LandmarksArgs),
    /// Time every pipeline stage on synthetic data of growing size.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Clamp {
    Zero,
    Abs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampler {
    Kmedoids,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    F32le,
}

#[derive(Args)]
struct ClusterArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Use only these views (names or 1-based positions, comma separated).
    #[arg(long, value_delimiter = ',')]
    views: Vec<String>,
    /// Cluster the concatenation of all views as one view.
    #[arg(long)]
    concat: bool,
    /// Z-score every feature column first.
    #[arg(long)]
    standardize: bool,
    /// Landmark count.
    #[arg(long, default_value_t = 600)]
    p: usize,
    /// Nearest landmarks kept per sample.
    #[arg(long, default_value_t = 8)]
    q: usize,
    #[arg(long, default_value_t = 10)]
    max_iters: usize,
    /// Convergence threshold on the embedding projector [default: 1e-3 * sqrt(2k)].
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussian bandwidth: `median` (per view) or a positive number.
    #[arg(long, default_value = "median")]
    sigma: String,
    /// Random pairs used for the median bandwidth on large views.
    #[arg(long, default_value_t = gcmvsc::affinity::DEFAULT_MEDIAN_PAIRS)]
    median_pairs: usize,
    #[arg(long, value_enum, default_value_t = Sampler::Kmedoids)]
    landmarks: Sampler,
    #[arg(long, default_value_t = gcmvsc::sampling::DEFAULT_KMEDOIDS_ITERS)]
    kmedoids_iters: usize,
    /// Treatment of negative fused affinities in the update.
    #[arg(long, value_enum, default_value_t = Clamp::Zero)]
    clamp: Clamp,
    /// Keep updated affinity rows unnormalized.
    #[arg(long)]
    no_row_renormalize: bool,
    #[arg(long, default_value_t = gcmvsc::kmeans::DEFAULT_RESTARTS)]
    restarts: usize,
    /// k-means runs averaged for ACC/NMI.
    #[arg(long, default_value_t = gcmvsc::pipeline::DEFAULT_TESTS)]
    tests: usize,
    /// Scale embedding rows to unit norm before k-means.
    #[arg(long)]
    row_normalize_embedding: bool,
    /// Also write the embedding to embedding.csv.
    #[arg(long)]
    dump_embedding: bool,
    /// Also rerun for each of these landmark counts and write sweep.csv.
    #[arg(long, value_delimiter = ',')]
    landmark_sweep: Vec<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    views: usize,
    #[arg(long, default_value_t = 20)]
    dim: usize,
    /// Within-cluster standard deviation.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Scale of the cluster means.
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    /// Make clusters indistinguishable in one view, as `VIEW:C1,C2,...`
    /// (1-based view, 0-based clusters). Repeatable.
    #[arg(long = "merge")]
    merges: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LandmarksArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    p: usize,
    #[arg(long, value_enum, default_value_t = Sampler::Kmedoids)]
    method: Sampler,
    #[arg(long, default_value_t = gcmvsc::sampling::DEFAULT_KMEDOIDS_ITERS)]
    iters: usize,
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// One-column CSV of sample indices.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Sample counts, ascending, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 500)]
    p: usize,
    #[arg(long, default_value_t = 8)]
    q: usize,
    #[arg(long, default_value_t = 3)]
    views: usize,
    #[arg(long, default_value_t = 20)]
    dim: usize,
    /// Co-training rounds per run, never cut short.
    #[arg(long, default_value_t = 5)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.downcast_ref::<gcmvsc::Error>().map_or("usage", gcmvsc::Error::kind);
            let doc = serde_json::json!({ "error": kind, "message": format!("{e:#}") });
            eprintln!("{doc}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Cluster(a) => cmd_cluster(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Landmarks(a) => cmd_landmarks(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn sigma_mode(text: &str, pairs: usize) -> anyhow::Result<SigmaMode> {
    if text == "median" {
        return Ok(SigmaMode::Median { pairs });
    }
    let s: f64 = text
        .parse()
        .with_context(|| format!("--sigma expects `median` or a number, got `{text}`"))?;
    Ok(SigmaMode::Fixed(s))
}

fn cmd_cluster(a: ClusterArgs) -> anyhow::Result<()> {
    let mut ds = load_manifest(&a.manifest)?;
    if !a.views.is_empty() {
        let idx = a
            .views
            .iter()
            .map(|key| ds.resolve_view(key))
            .collect::<gcmvsc::Result<Vec<_>>>()?;
        ds = ds.select_views(&idx)?;
    }

    let mut opts = ClusterOptions::new(a.k);
    let c = &mut opts.cotrain;
    c.p = a.p;
    c.q = a.q;
    c.max_iters = a.max_iters;
    if let Some(tol) = a.tol {
        c.tol = tol;
    }
    c.seed = a.seed;
    c.sigma = sigma_mode(&a.sigma, a.median_pairs)?;
    c.landmarks = match a.landmarks {
        Sampler::Kmedoids => LandmarkMethod::KMedoids { iters: a.kmedoids_iters },
        Sampler::Random => LandmarkMethod::Random,
    };
    c.update.clamp = match a.clamp {
        Clamp::Zero => ClampMode::Zero,
        Clamp::Abs => ClampMode::Abs,
    };
    c.update.renormalize_rows = !a.no_row_renormalize;
    opts.concat = a.concat;
    opts.standardize = a.standardize;
    opts.kmeans_restarts = a.restarts;
    opts.tests = a.tests;
    opts.row_normalize_embedding = a.row_normalize_embedding;

    let run = cluster(&ds, &opts)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut outputs = Vec::new();
    let mut record = |name: &str| {
        let p = a.out.join(name);
        outputs.push(p.display().to_string());
        p
    };

    write_labels(record("labels.csv"), &run.labels)?;
    let names: Vec<&str> = run.report.views.iter().map(String::as_str).collect();
    write_text(&record("trace.csv"), &run.trace.to_csv(&names))?;
    if a.dump_embedding {
        write_matrix_csv(record("embedding.csv"), run.embedding.view())?;
    }
    if !a.landmark_sweep.is_empty() {
        let points = landmark_sweep(&ds, &opts, &a.landmark_sweep)?;
        let mut csv = String::from("p,acc_mean,acc_std,nmi_mean,nmi_std,seconds\n");
        for s in points {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.p, s.acc_mean, s.acc_std, s.nmi_mean, s.nmi_std, s.seconds
            ));
        }
        write_text(&record("sweep.csv"), &csv)?;
    }
    let report_path = record("report.json");
    let mut report = run.report;
    report.outputs = outputs;
    write_text(&report_path, &serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Scores {
    acc: f64,
    nmi: f64,
}

fn cmd_eval(a: EvalArgs) -> anyhow::Result<()> {
    let pred = read_labels(&a.pred)?;
    let truth = read_labels(&a.truth)?;
    let scores = Scores {
        acc: accuracy(&pred, &truth)?,
        nmi: nmi(&pred, &truth)?,
    };
    println!("{}", serde_json::to_string(&scores)?);
    Ok(())
}

fn parse_merge(text: &str) -> anyhow::Result<(usize, Vec<usize>)> {
    let (view, clusters) = text
        .split_once(':')
        .with_context(|| format!("--merge expects VIEW:C1,C2,..., got `{text}`"))?;
    let view: usize = view.trim().parse().context("merge view must be a number")?;
    if view == 0 {
        bail!("merge views are numbered from 1");
    }
    let clusters = clusters
        .split(',')
        .map(|c| c.trim().parse::<usize>().context("merge clusters must be numbers"))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok((view - 1, clusters))
}

fn cmd_synth(a: SynthArgs) -> anyhow::Result<()> {
    let spec = SyntheticSpec {
        n: a.n,
        k: a.k,
        views: vec![ViewSpec { dim: a.dim, noise: a.noise }; a.views],
        separation: a.separation,
        merges: a.merges.iter().map(|m| parse_merge(m)).collect::<anyhow::Result<_>>()?,
        seed: a.seed,
    };
    let ds = generate_synthetic(&spec)?;
    let format = match a.format {
        Format::Csv => MatrixFormat::Csv,
        Format::F32le => MatrixFormat::F32le,
    };
    let manifest = write_dataset(&ds, &a.out, format)?;
    println!("{}", manifest.display());
    Ok(())
}

fn cmd_landmarks(a: LandmarksArgs) -> anyhow::Result<()> {
    let mut ds = load_manifest(&a.manifest)?;
    if a.standardize {
        ds = ds.standardized();
    }
    let set = match a.method {
        Sampler::Kmedoids => kmedoids_landmarks(ds.concatenated().view(0).data(), a.p, a.iters, a.seed)?,
        Sampler::Random => random_landmarks(ds.n(), a.p, a.seed)?,
    };
    write_labels(&a.out, set.indices())?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> anyhow::Result<()> {
    if a.sizes.is_empty() {
        bail!("--sizes needs at least one value");
    }
    if a.sizes.windows(2).any(|w| w[0] > w[1]) {
        bail!("--sizes must be ascending");
    }
    let config = BenchConfig {
        k: a.k,
        p: a.p,
        q: a.q,
        views: a.views,
        dim: a.dim,
        rounds: a.rounds,
        seed: a.seed,
    };
    let mut csv = String::from("n,landmarks,bandwidth,affinity,cotrain,kmeans,total,error\n");
    let mut failures = 0;
    for &n in &a.sizes {
        let outcome = std::panic::catch_unwind(|| bench_size(n, &config))
            .unwrap_or_else(|_| Err(gcmvsc::Error::InvalidParameter(format!("run of size {n} aborted"))));
        match outcome {
            Ok(t) => {
                let PipelineTimings {
                    landmarks,
                    bandwidth,
                    affinity,
                    cotrain,
                    kmeans,
                    total,
                } = t;
                csv.push_str(&format!("{n},{landmarks},{bandwidth},{affinity},{cotrain},{kmeans},{total},\n"));
            }
            Err(e) => {
                failures += 1;
                eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string(), "n": n }));
                let msg = e.to_string().replace('"', "'");
                csv.push_str(&format!("{n},,,,,,,\"{msg}\"\n"));
            }
        }
    }
    match &a.out {
        Some(path) => write_text(path, &csv)?,
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    if failures > 0 {
        bail!("{failures} of {} sizes failed", a.sizes.len());
    }
    Ok(())
}
