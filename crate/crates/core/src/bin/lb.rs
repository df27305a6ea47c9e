//! `lb`: file-level front end for the library.
//!
//! Exit codes: 0 success, 2 malformed input or configuration, 3 valid
//! input with no valid result (e.g. a non-positive variance), naming the
//! offending record.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use laplace_bridge::harness::{self, BenchConfig, ExperimentConfig, KlConfig};
use laplace_bridge::io::{self as lbio, DirichletRecord, LogitRecord};
use laplace_bridge::predictive::Method;
use laplace_bridge::{metrics, topk, Error, Result};

#[derive(Parser)]
#[command(name = "lb", version, about = "Laplace Bridge between logit Gaussians and Dirichlet distributions")]
struct Cli {
    /// Worker threads for per-record work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    /// Dirichlet records to logit Gaussians.
    Forward,
    /// Logit Gaussians to Dirichlet records.
    Inverse,
}

#[derive(clap::Args)]
struct SeedArg {
    #[arg(long, env = "LB_SEED", default_value_t = harness::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Map a JSONL file through the bridge.
    Bridge {
        direction: Direction,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Histogram KL of sampling vs the bridge as the sample count grows.
    KlExperiment {
        #[command(flatten)]
        seed: SeedArg,
        /// Largest sample count in the 1-2-5 sweep.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = metrics::DEFAULT_BINS)]
        bins: usize,
        /// CSV destination (default stdout).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// MMC and AUROC of a predictive approximation on in-distribution vs OOD records.
    OodEval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        ood: PathBuf,
        #[arg(long, default_value = "lb", value_parser = parse_method)]
        method: Method,
        /// Monte Carlo draws per record.
        #[arg(long, default_value_t = harness::DEFAULT_MC_SAMPLES)]
        samples: usize,
        #[command(flatten)]
        seed: SeedArg,
        /// Also write the report as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Uncertainty-aware top-k over labelled records.
    Topk {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = topk::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = harness::DEFAULT_K_MAX)]
        k_max: usize,
        /// Histogram CSV destination.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Single-threaded per-record timing of the bridge vs Monte Carlo.
    Bench {
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 10_000)]
        batch: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Beta, Laplace and bridge curves for two-class Dirichlets.
    Fig2 {
        #[arg(long, default_value_t = harness::FIG2_GRID)]
        grid: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Bridge { direction, input, output } => {
            let out = sink(output.as_deref())?;
            match direction {
                Direction::Forward => {
                    let lines = lbio::read_jsonl_file::<DirichletRecord>(&input)?;
                    lbio::write_jsonl(out, &harness::bridge_forward(&lines)?)
                }
                Direction::Inverse => {
                    let lines = lbio::read_jsonl_file::<LogitRecord>(&input)?;
                    lbio::check_consistent_k(&lines)?;
                    lbio::write_jsonl(out, &harness::bridge_inverse(&lines)?)
                }
            }
        }
        Cmd::KlExperiment { seed, samples, bins, output } => {
            ExperimentConfig { seed: seed.seed, samples, bins_per_axis: bins, ..Default::default() }.validate()?;
            let cfg = KlConfig {
                seed: seed.seed,
                sample_counts: harness::sample_counts_125(10, samples.max(10)),
                bins_per_axis: bins,
                ..Default::default()
            };
            eprintln!(
                "# lb kl-experiment seed={} truth_samples={} bins={}",
                cfg.seed, cfg.truth_samples, cfg.bins_per_axis
            );
            let settings = harness::default_kl_settings();
            let rows = harness::kl_experiment(&settings, &cfg)?;
            for s in &settings {
                let mine: Vec<_> = rows.iter().filter(|r| r.setting == s.name).cloned().collect();
                match harness::crossover(&mine) {
                    Some(n) => eprintln!("{}: sampling matches the bridge from n = {n}", s.name),
                    None => eprintln!("{}: sampling stays above the bridge", s.name),
                }
            }
            lbio::write_csv(sink(output.as_deref())?, &rows)
        }
        Cmd::OodEval { input, ood, method, samples, seed, output } => {
            ExperimentConfig { seed: seed.seed, samples, ..Default::default() }.validate()?;
            let a = lbio::read_jsonl_file::<LogitRecord>(&input)?;
            let b = lbio::read_jsonl_file::<LogitRecord>(&ood)?;
            let r = harness::ood_eval(&a, &b, method, samples, seed.seed)?;
            println!("# lb ood-eval seed={} method={} samples={}", r.seed, r.method, r.samples);
            println!("records_in = {}", r.records_in);
            println!("records_out = {}", r.records_out);
            println!("mmc_in = {}", r.mmc_in);
            println!("mmc_out = {}", r.mmc_out);
            println!("auroc = {}", r.auroc);
            println!("wall_time = {}", r.wall_time);
            if let Some(res) = r.max_normalization_residual {
                println!("max_normalization_residual = {res}");
            }
            if let Some(p) = output {
                let mut w = sink(Some(&p))?;
                serde_json::to_writer_pretty(&mut w, &r).map_err(|e| Error::Io(e.to_string()))?;
                writeln!(w)?;
            }
            Ok(())
        }
        Cmd::Topk { input, threshold, k_max, output } => {
            ExperimentConfig { threshold, k_max, ..Default::default() }.validate()?;
            let lines = lbio::read_jsonl_file::<LogitRecord>(&input)?;
            let (r, _) = harness::topk_eval(&lines, threshold, k_max)?;
            println!("# lb topk threshold={} k_max={}", r.threshold, r.k_max);
            println!("records = {}", r.records);
            println!("accuracy = {}", r.accuracy);
            println!("mean_k = {}", r.mean_k);
            match output {
                Some(p) => lbio::write_csv(sink(Some(&p))?, &r.histogram_rows()),
                None => {
                    for row in r.histogram_rows() {
                        println!("k{} = {}", row.k, row.count);
                    }
                    Ok(())
                }
            }
        }
        Cmd::Bench { classes, batch, repeats, seed, output } => {
            let cfg = BenchConfig { k: classes, batch, repeats, seed: seed.seed, ..Default::default() };
            println!(
                "# lb bench seed={} classes={} batch={} repeats={} threads=1",
                cfg.seed, cfg.k, cfg.batch, cfg.repeats
            );
            let rows = harness::bench(&cfg)?;
            for r in &rows {
                println!(
                    "{:<8} per_record = {:.3e} s  ratio_to_lb = {:.1}",
                    r.method, r.per_record_time, r.ratio_to_lb
                );
            }
            if let Some(p) = output {
                lbio::write_csv(sink(Some(&p))?, &rows)?;
            }
            Ok(())
        }
        Cmd::Fig2 { grid, output } => {
            let (curves, rows) = harness::fig2(&harness::FIG2_PAIRS, grid)?;
            for c in &curves {
                eprintln!(
                    "a={} b={}: beta integral {:.6}, bridge integral {:.6}{}",
                    c.shapes.a(),
                    c.shapes.b(),
                    c.beta.integral(),
                    c.bridge.integral(),
                    if c.laplace.is_none() { ", laplace absent" } else { "" }
                );
            }
            lbio::write_csv(sink(output.as_deref())?, &rows)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("lb: error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lb: error: {e}");
            ExitCode::from(if e.is_domain() { 3 } else { 2 })
        }
    }
}
