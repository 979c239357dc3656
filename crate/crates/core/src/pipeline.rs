//! End-to-end runs: co-training, final k-means, evaluation, scaling
//! measurements and landmark sweeps.

use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cotrain::{run_guided_cotraining, CoTrainConfig, CoTrainingTrace};
use crate::data::{generate_synthetic, MultiViewDataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, row_normalize, ClusteringResult, DEFAULT_MAX_ITERS, DEFAULT_RESTARTS};
use crate::metrics::{accuracy, nmi};
use crate::rng::substream_seed;

/// Number of k-means runs averaged when ground truth is available.
pub const DEFAULT_TESTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOptions {
    pub cotrain: CoTrainConfig,
    /// Run on the column-wise concatenation of all views as a single view.
    pub concat: bool,
    /// Z-score every feature column before anything else.
    pub standardize: bool,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    /// Independent k-means runs over which metrics are averaged; the first
    /// one provides the reported labels.
    pub tests: usize,
    /// Scale embedding rows to unit norm before k-means.
    pub row_normalize_embedding: bool,
}

impl ClusterOptions {
    pub fn new(k: usize) -> Self {
        Self {
            cotrain: CoTrainConfig::new(k),
            concat: false,
            standardize: false,
            kmeans_restarts: DEFAULT_RESTARTS,
            kmeans_max_iters: DEFAULT_MAX_ITERS,
            tests: DEFAULT_TESTS,
            row_normalize_embedding: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineTimings {
    pub landmarks: f64,
    pub bandwidth: f64,
    pub affinity: f64,
    pub cotrain: f64,
    pub kmeans: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub acc: Vec<f64>,
    pub nmi: Vec<f64>,
}

impl Metrics {
    fn from_runs(acc: Vec<f64>, nmi: Vec<f64>) -> Self {
        let (acc_mean, acc_std) = mean_std(&acc);
        let (nmi_mean, nmi_std) = mean_std(&nmi);
        Self {
            acc_mean,
            acc_std,
            nmi_mean,
            nmi_std,
            acc,
            nmi,
        }
    }
}

/// Population mean and standard deviation.
fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub options: ClusterOptions,
    pub n: usize,
    pub views: Vec<String>,
    pub dims: Vec<usize>,
    /// Rounds of co-training that ran; zero for single-view baselines.
    pub iterations: usize,
    pub final_delta: f64,
    pub converged: bool,
    pub sigmas: Vec<f64>,
    pub timings: PipelineTimings,
    pub inertia: f64,
    pub metrics: Option<Metrics>,
    /// Filled in by callers that write files.
    #[serde(default)]
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ClusterRun {
    pub report: RunReport,
    pub labels: Vec<usize>,
    /// The `n x k` matrix handed to k-means.
    pub embedding: Array2<f64>,
    pub trace: CoTrainingTrace,
}

/// Seed of the `t`-th evaluation k-means run.
pub fn test_seed(seed: u64, t: usize) -> u64 {
    substream_seed(seed, &format!("kmeans-test-{t}"))
}

/// Prepare the views, co-train, cluster, and score against the dataset's
/// labels when present.
///
/// A run on one view, including the concatenated view, is plain landmark
/// spectral clustering: the co-training update is skipped.
pub fn cluster(ds: &MultiViewDataset, opts: &ClusterOptions) -> Result<ClusterRun> {
    if opts.tests == 0 {
        return Err(Error::InvalidParameter("need at least one k-means test".into()));
    }
    let start = Instant::now();
    let mut prepared = if opts.standardize { ds.standardized() } else { ds.clone() };
    if opts.concat {
        prepared = prepared.concatenated();
    }
    let mut config = opts.cotrain.clone();
    if prepared.num_views() == 1 {
        config.max_iters = 0;
    }

    let (aug, trace) = run_guided_cotraining(&prepared, &config)?;
    let k = config.k;
    let embedding = if opts.row_normalize_embedding {
        row_normalize(aug.ustar.u())
    } else {
        aug.ustar.into_u()
    };

    let clock = Instant::now();
    let runs: Vec<ClusteringResult> = (0..opts.tests)
        .map(|t| {
            kmeans(
                embedding.view(),
                k,
                opts.kmeans_max_iters,
                opts.kmeans_restarts,
                test_seed(config.seed, t),
            )
        })
        .collect::<Result<_>>()?;
    let kmeans_secs = clock.elapsed().as_secs_f64();

    let metrics = match ds.labels() {
        Some(truth) => {
            let scores = runs
                .par_iter()
                .map(|r| Ok((accuracy(&r.labels, truth)?, nmi(&r.labels, truth)?)))
                .collect::<Result<Vec<_>>>()?;
            let (acc, nmi): (Vec<f64>, Vec<f64>) = scores.into_iter().unzip();
            Some(Metrics::from_runs(acc, nmi))
        }
        None => None,
    };

    let first = runs.into_iter().next().expect("tests checked positive");
    let t = trace.timings;
    let report = RunReport {
        options: opts.clone(),
        n: prepared.n(),
        views: prepared.views().iter().map(|v| v.name().to_string()).collect(),
        dims: prepared.dims(),
        iterations: if config.max_iters == 0 { 0 } else { trace.records.len() },
        final_delta: trace.final_delta(),
        converged: trace.converged,
        sigmas: trace.sigmas.clone(),
        timings: PipelineTimings {
            landmarks: t.landmarks,
            bandwidth: t.bandwidth,
            affinity: t.affinity,
            cotrain: t.cotrain,
            kmeans: kmeans_secs,
            total: start.elapsed().as_secs_f64(),
        },
        inertia: first.inertia,
        metrics,
        outputs: Vec::new(),
    };
    Ok(ClusterRun {
        report,
        labels: first.labels,
        embedding,
        trace,
    })
}

/// Parameters of a synthetic scaling measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub k: usize,
    pub p: usize,
    pub q: usize,
    pub views: usize,
    pub dim: usize,
    /// Co-training rounds, all of which are executed.
    pub rounds: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            k: 5,
            p: 500,
            q: 8,
            views: 3,
            dim: 20,
            rounds: 5,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn options(&self) -> ClusterOptions {
        let mut opts = ClusterOptions::new(self.k);
        opts.cotrain.p = self.p;
        opts.cotrain.q = self.q;
        opts.cotrain.max_iters = self.rounds;
        // a fixed amount of work per size: never stop early
        opts.cotrain.tol = f64::MIN_POSITIVE;
        opts.cotrain.seed = self.seed;
        opts.tests = 1;
        opts
    }

    pub fn dataset(&self, n: usize) -> Result<MultiViewDataset> {
        generate_synthetic(&SyntheticSpec::blobs(n, self.k, self.views, self.dim, 1.0, self.seed))
    }
}

/// Wall time per stage of one synthetic run of size `n`. Data generation is
/// not timed.
pub fn bench_size(n: usize, config: &BenchConfig) -> Result<PipelineTimings> {
    let ds = config.dataset(n)?;
    Ok(cluster(&ds, &config.options())?.report.timings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub seconds: f64,
}

/// Repeat a labelled run for every landmark count in `ps`.
pub fn landmark_sweep(ds: &MultiViewDataset, opts: &ClusterOptions, ps: &[usize]) -> Result<Vec<SweepPoint>> {
    if ds.labels().is_none() {
        return Err(Error::InvalidParameter("a landmark sweep needs ground-truth labels".into()));
    }
    ps.iter()
        .map(|&p| {
            let mut o = opts.clone();
            o.cotrain.p = p;
            let run = cluster(ds, &o)?;
            let m = run.report.metrics.expect("labels checked");
            Ok(SweepPoint {
                p,
                acc_mean: m.acc_mean,
                acc_std: m.acc_std,
                nmi_mean: m.nmi_mean,
                nmi_std: m.nmi_std,
                seconds: run.report.timings.total,
            })
        })
        .collect()
}
