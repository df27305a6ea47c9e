//! Experiment drivers behind the `lb` subcommands. Everything here is
//! deterministic in its data outputs given the inputs and seed; only the
//! wall-time fields vary between runs.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::bridge::{self, BetaBridgeCurves, Curve};
use crate::dist::{Covariance, LogitGaussian};
use crate::error::{Error, Result};
use crate::io::{DirichletRecord, Line, LogitRecord};
use crate::metrics::{self, SimplexHistogram};
use crate::predictive::{self, Method};
use crate::rng::{self, derive_seed};
use crate::specfun::ShapePair;
use crate::topk::{self, TopKResult};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_MC_SAMPLES: usize = 1000;
pub const DEFAULT_K_MAX: usize = 10;
pub const TRUTH_SAMPLES: usize = 100_000;
pub const FIG2_GRID: usize = 512;
pub const FIG2_PAIRS: [(f64, f64); 3] = [(0.8, 0.9), (4.0, 2.0), (2.0, 7.0)];

/// Settings shared by the experiment subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub samples: usize,
    pub bins_per_axis: usize,
    pub threshold: f64,
    pub k_max: usize,
    pub output_path: Option<std::path::PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            samples: DEFAULT_MC_SAMPLES,
            bins_per_axis: metrics::DEFAULT_BINS,
            threshold: topk::DEFAULT_THRESHOLD,
            k_max: DEFAULT_K_MAX,
            output_path: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("samples", self.samples), ("bins", self.bins_per_axis), ("k-max", self.k_max)] {
            if v == 0 {
                return Err(Error::Parse { line: 0, message: format!("{name} must be at least 1") });
            }
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Parse {
                line: 0,
                message: format!("threshold must lie in (0, 1), got {}", self.threshold),
            });
        }
        Ok(())
    }
}

fn record_id(id: &Option<String>, line: usize) -> String {
    id.clone().unwrap_or_else(|| format!("line-{line}"))
}

/// Dirichlet records to logit Gaussians (full covariance).
pub fn bridge_forward(lines: &[Line<DirichletRecord>]) -> Result<Vec<LogitRecord>> {
    lines
        .par_iter()
        .map(|l| {
            let id = record_id(&l.record.id, l.line);
            let params = l.record.to_params(&id)?;
            let g = bridge::forward(&params).to_logit_gaussian();
            Ok(LogitRecord::from_gaussian(id, l.record.label, &g))
        })
        .collect()
}

/// Logit Gaussians to Dirichlet records.
pub fn bridge_inverse(lines: &[Line<LogitRecord>]) -> Result<Vec<DirichletRecord>> {
    lines
        .par_iter()
        .map(|l| {
            let r = &l.record;
            let g = r.to_gaussian()?;
            let alpha = bridge::inverse(&g).map_err(|e| e.in_record(&r.id))?;
            Ok(DirichletRecord {
                id: Some(r.id.clone()),
                label: r.label,
                alpha: alpha.into_alpha(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Sample-count sweep of histogram KL divergences on the 2-simplex.

/// A named `K = 3` logit Gaussian.
#[derive(Debug, Clone)]
pub struct KlSetting {
    pub name: String,
    pub gaussian: LogitGaussian,
}

/// `μ = (−1, 2, −1)` with `Σ ∈ {10·I, 1·I, 0.1·I}`.
pub fn default_kl_settings() -> Vec<KlSetting> {
    [10.0, 1.0, 0.1]
        .into_iter()
        .map(|s: f64| KlSetting {
            name: format!("sigma={s}"),
            gaussian: LogitGaussian::isotropic(vec![-1.0, 2.0, -1.0], s).expect("valid default Gaussian"),
        })
        .collect()
}

/// `1, 2, 5, 10, 20, 50, …` restricted to `[min, max]`.
pub fn sample_counts_125(min: usize, max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut decade = 1usize;
    'outer: loop {
        for m in [1, 2, 5] {
            let Some(n) = decade.checked_mul(m) else { break 'outer };
            if n > max {
                break 'outer;
            }
            if n >= min {
                out.push(n);
            }
        }
        decade = match decade.checked_mul(10) {
            Some(d) => d,
            None => break,
        };
    }
    out
}

#[derive(Debug, Clone)]
pub struct KlConfig {
    pub seed: u64,
    pub truth_samples: usize,
    pub sample_counts: Vec<usize>,
    pub bins_per_axis: usize,
}

impl Default for KlConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            truth_samples: TRUTH_SAMPLES,
            sample_counts: sample_counts_125(10, 100_000),
            bins_per_axis: metrics::DEFAULT_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlRow {
    pub setting: String,
    pub sample_count: usize,
    /// `KL(p_true ‖ p_sample)`.
    pub kl_sampling: f64,
    /// `KL(p_true ‖ p_LB)`.
    pub kl_lb: f64,
    pub wall_time_sampling: f64,
    pub wall_time_lb: f64,
}

fn histogram_of(g: &LogitGaussian, n: usize, seed: u64, bins: usize) -> Result<SimplexHistogram> {
    metrics::build_histogram(&g.sample_softmax(n, seed)?, bins)
}

/// One row per `(setting, sample count)`. The reference histogram uses
/// `truth_samples` draws; each sample count uses fresh draws.
pub fn kl_experiment(settings: &[KlSetting], cfg: &KlConfig) -> Result<Vec<KlRow>> {
    if cfg.sample_counts.is_empty() || cfg.sample_counts.contains(&0) || cfg.truth_samples == 0 {
        return Err(Error::Parse { line: 0, message: "sample counts must be at least 1".into() });
    }
    let mut rows = Vec::new();
    for (si, s) in settings.iter().enumerate() {
        if s.gaussian.k() != 3 {
            return Err(Error::UnsupportedK(s.gaussian.k()));
        }
        let tag = (si as u64) << 32;
        let truth = histogram_of(&s.gaussian, cfg.truth_samples, derive_seed(cfg.seed, tag), cfg.bins_per_axis)?;

        let t = Instant::now();
        let masses = metrics::dirichlet_cell_masses(&bridge::inverse(&s.gaussian)?, cfg.bins_per_axis)?;
        let wall_time_lb = t.elapsed().as_secs_f64();
        let kl_lb = metrics::kl_hist_vs_masses(&truth, &masses)?;

        for (i, &n) in cfg.sample_counts.iter().enumerate() {
            let t = Instant::now();
            let h = histogram_of(&s.gaussian, n, derive_seed(cfg.seed, tag | (i as u64 + 1)), cfg.bins_per_axis)?;
            let wall_time_sampling = t.elapsed().as_secs_f64();
            rows.push(KlRow {
                setting: s.name.clone(),
                sample_count: n,
                kl_sampling: metrics::kl_hist_vs_hist(&truth, &h)?,
                kl_lb,
                wall_time_sampling,
                wall_time_lb,
            });
        }
    }
    Ok(rows)
}

/// Smallest sample count from which sampling stays at or below the bridge
/// for the rest of the sweep. `rows` must belong to one setting.
pub fn crossover(rows: &[KlRow]) -> Option<usize> {
    let mut at = None;
    for r in rows.iter().rev() {
        if r.kl_sampling <= r.kl_lb {
            at = Some(r.sample_count);
        } else {
            break;
        }
    }
    at
}

// ---------------------------------------------------------------------------
// Predictive comparison on in-distribution vs out-of-distribution inputs.

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OodReport {
    pub method: String,
    pub seed: u64,
    pub samples: usize,
    pub records_in: usize,
    pub records_out: usize,
    pub mmc_in: f64,
    pub mmc_out: f64,
    pub auroc: f64,
    pub wall_time: f64,
    /// Largest `|1 − Σₖ pₖ|` over all records; SODPP only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_normalization_residual: Option<f64>,
}

/// Predictive vectors for every record, in input order. Record `i` uses the
/// Monte Carlo seed `derive_seed(seed, i)`.
pub fn predict_batch(lines: &[Line<LogitRecord>], method: Method, samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    lines
        .par_iter()
        .enumerate()
        .map(|(i, l)| {
            let g = l.record.to_gaussian()?;
            predictive::predictive(&g, method, samples, derive_seed(seed, i as u64))
                .map_err(|e| e.in_record(&l.record.id))
        })
        .collect()
}

/// Largest component, clipped to `[0, 1]` (unnormalized methods can leave
/// the simplex).
pub fn confidence(p: &[f64]) -> f64 {
    p.iter().copied().fold(f64::NEG_INFINITY, f64::max).clamp(0.0, 1.0)
}

pub fn ood_eval(
    in_dist: &[Line<LogitRecord>],
    ood: &[Line<LogitRecord>],
    method: Method,
    samples: usize,
    seed: u64,
) -> Result<OodReport> {
    let k_in = crate::io::check_consistent_k(in_dist)?;
    let k_out = crate::io::check_consistent_k(ood)?;
    if k_in != k_out {
        return Err(Error::dimension(format!("in-distribution K = {k_in}, OOD K = {k_out}")));
    }
    let t = Instant::now();
    let p_in = predict_batch(in_dist, method, samples, seed)?;
    let p_out = predict_batch(ood, method, samples, seed)?;
    let wall_time = t.elapsed().as_secs_f64();

    let c_in: Vec<f64> = p_in.iter().map(|p| confidence(p)).collect();
    let c_out: Vec<f64> = p_out.iter().map(|p| confidence(p)).collect();
    let residual = (method == Method::Sodpp).then(|| {
        p_in.iter()
            .chain(&p_out)
            .map(|p| (1.0 - p.iter().sum::<f64>()).abs())
            .fold(0.0, f64::max)
    });
    Ok(OodReport {
        method: method.to_string(),
        seed,
        samples,
        records_in: in_dist.len(),
        records_out: ood.len(),
        mmc_in: metrics::mmc(&c_in)?,
        mmc_out: metrics::mmc(&c_out)?,
        auroc: metrics::auroc(&c_in, &c_out)?,
        wall_time,
        max_normalization_residual: residual,
    })
}

// ---------------------------------------------------------------------------
// Uncertainty-aware top-k over labelled logit Gaussians.

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopkReport {
    pub threshold: f64,
    pub k_max: usize,
    pub records: usize,
    pub accuracy: f64,
    pub mean_k: f64,
    /// Counts for `k = 1..=k_max`.
    pub histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramRow {
    pub k: usize,
    pub count: usize,
}

impl TopkReport {
    pub fn histogram_rows(&self) -> Vec<HistogramRow> {
        self.histogram
            .iter()
            .enumerate()
            .map(|(i, &count)| HistogramRow { k: i + 1, count })
            .collect()
    }
}

/// Inverse bridge then top-k per record; sets are capped at `k_max`.
pub fn topk_eval(lines: &[Line<LogitRecord>], threshold: f64, k_max: usize) -> Result<(TopkReport, Vec<TopKResult>)> {
    crate::io::check_consistent_k(lines)?;
    if k_max == 0 {
        return Err(Error::domain("k_max must be at least 1"));
    }
    let labels: Vec<usize> = lines
        .iter()
        .map(|l| {
            l.record.label.ok_or_else(|| Error::Parse {
                line: l.line,
                message: format!("record {} has no label", l.record.id),
            })
        })
        .collect::<Result<_>>()?;
    let results: Vec<TopKResult> = lines
        .par_iter()
        .map(|l| {
            let g = l.record.to_gaussian()?;
            let params = bridge::inverse(&g).map_err(|e| e.in_record(&l.record.id))?;
            topk::uncertainty_aware_topk(&params, threshold, Some(k_max)).map_err(|e| e.in_record(&l.record.id))
        })
        .collect::<Result<_>>()?;

    let mut histogram = vec![0; k_max];
    let mut hits = 0;
    for (r, (l, &y)) in results.iter().zip(lines.iter().zip(&labels)) {
        if y >= l.record.k() {
            return Err(Error::Parse {
                line: l.line,
                message: format!("record {} has label {y} but K = {}", l.record.id, l.record.k()),
            });
        }
        histogram[r.k - 1] += 1;
        hits += r.classes.contains(&y) as usize;
    }
    let n = results.len() as f64;
    let report = TopkReport {
        threshold,
        k_max,
        records: results.len(),
        accuracy: hits as f64 / n,
        mean_k: results.iter().map(|r| r.k as f64).sum::<f64>() / n,
        histogram,
    };
    Ok((report, results))
}

// ---------------------------------------------------------------------------
// Per-record cost of the bridge vs Monte Carlo.

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub k: usize,
    pub batch: usize,
    pub repeats: usize,
    pub seed: u64,
    pub mc_samples: Vec<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            k: 10,
            batch: 10_000,
            repeats: 3,
            seed: DEFAULT_SEED,
            mc_samples: vec![10, 100, 1000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: String,
    /// Monte Carlo draws per record (0 for the bridge).
    pub samples: usize,
    /// Median over repeats of the whole-batch time, in seconds.
    pub batch_time: f64,
    pub per_record_time: f64,
    /// `per_record_time / lb per_record_time`.
    pub ratio_to_lb: f64,
}

/// Random full-covariance logit Gaussians: `μ ~ N(0, 4 I)`,
/// `Σ = s · A Aᵀ / K + 0.01 I` with standard normal `A`, `s ~ U(0.1, 3)`.
pub fn bench_gaussians(k: usize, batch: usize, seed: u64) -> Vec<LogitGaussian> {
    rng::map_shards(batch, seed, |rng, count| {
        (0..count)
            .map(|_| {
                let mean: Vec<f64> = (0..k).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
                let a = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
                let s: f64 = rng.random_range(0.1..3.0);
                let mut cov = &a * a.transpose() * (s / k as f64) + DMatrix::identity(k, k) * 0.01;
                cov = (&cov + cov.transpose()) * 0.5;
                LogitGaussian::new(mean, Covariance::Full(cov)).expect("symmetric PSD by construction")
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time_batch(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64());
    }
    Ok(median(times))
}

/// Times the bridge predictive and Monte Carlo at each sample count on one
/// thread. Monte Carlo timings include factoring each covariance.
pub fn bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.batch == 0 || cfg.repeats == 0 || cfg.k < 2 {
        return Err(Error::Parse { line: 0, message: "bench needs K >= 2, batch >= 1 and repeats >= 1".into() });
    }
    let batch = bench_gaussians(cfg.k, cfg.batch, cfg.seed);
    let seeds: Vec<u64> = (0..batch.len() as u64).map(|i| derive_seed(cfg.seed, i)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    pool.install(|| {
        let n = batch.len() as f64;
        let lb = time_batch(cfg.repeats, || {
            for g in &batch {
                std::hint::black_box(predictive::lb_predictive_mean(std::hint::black_box(g))?);
            }
            Ok(())
        })?;
        let mut rows = vec![BenchRow {
            method: "lb".into(),
            samples: 0,
            batch_time: lb,
            per_record_time: lb / n,
            ratio_to_lb: 1.0,
        }];
        for &m in &cfg.mc_samples {
            let t = time_batch(cfg.repeats, || {
                for (g, &s) in batch.iter().zip(&seeds) {
                    std::hint::black_box(predictive::mc_softmax_mean(std::hint::black_box(g), m, s)?);
                }
                Ok(())
            })?;
            rows.push(BenchRow {
                method: format!("mc@{m}"),
                samples: m,
                batch_time: t,
                per_record_time: t / n,
                ratio_to_lb: t / lb,
            });
        }
        Ok(rows)
    })
}

// ---------------------------------------------------------------------------
// Beta / Laplace / bridge curves for two-class Dirichlets.

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Row {
    pub a: f64,
    pub b: f64,
    pub curve: &'static str,
    pub x: Option<f64>,
    pub density: Option<f64>,
    pub status: &'static str,
}

fn push_curve(rows: &mut Vec<Fig2Row>, s: ShapePair, name: &'static str, c: &Curve) {
    rows.extend(c.x.iter().zip(&c.density).map(|(&x, &d)| Fig2Row {
        a: s.a(),
        b: s.b(),
        curve: name,
        x: Some(x),
        density: Some(d),
        status: "ok",
    }));
}

/// Long-format rows for each pair: `beta`, `laplace` (or a single
/// `absent` row when the approximation does not exist), `bridge_logit`
/// and `bridge`.
pub fn fig2(pairs: &[(f64, f64)], grid: usize) -> Result<(Vec<BetaBridgeCurves>, Vec<Fig2Row>)> {
    let curves: Vec<BetaBridgeCurves> = pairs
        .iter()
        .map(|&(a, b)| bridge::beta_bridge_curves(ShapePair::new(a, b)?, grid))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for c in &curves {
        push_curve(&mut rows, c.shapes, "beta", &c.beta);
        match &c.laplace {
            Some(l) => push_curve(&mut rows, c.shapes, "laplace", l),
            None => rows.push(Fig2Row {
                a: c.shapes.a(),
                b: c.shapes.b(),
                curve: "laplace",
                x: None,
                density: None,
                status: "absent",
            }),
        }
        push_curve(&mut rows, c.shapes, "bridge_logit", &c.bridge_logit);
        push_curve(&mut rows, c.shapes, "bridge", &c.bridge);
    }
    Ok((curves, rows))
}
