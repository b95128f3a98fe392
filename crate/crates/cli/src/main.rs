//! `coreadership` command-line tool.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use coreadership::logstore::DedupPeriod;
use coreadership::pipeline::{AnalysisParams, RateBasisChoice};
use coreadership::synth::SynthConfig;

use crate::manifest::{absolute, Manifest, Run};

#[derive(Parser, Debug)]
#[command(name = "coreadership", version, about = "Spectral analysis of co-readership in usage logs")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic usage log and its ground truth.
    Synth(SynthArgs),
    /// Sample users, build co-read matrices and compute the spectrum.
    Analyze(AnalyzeArgs),
    /// Leading eigenvalue across nested sample sizes, with a power-law fit.
    Sweep(SweepArgs),
    /// Project an analyze run onto leading eigenvectors and report a sphere neighborhood.
    Probe(ProbeArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// JSON SynthConfig; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    users: Option<usize>,
    #[arg(long)]
    papers: Option<usize>,
    #[arg(long)]
    mean_reads: Option<f64>,
    #[arg(long)]
    dispersion: Option<f64>,
    #[arg(long)]
    max_reads: Option<usize>,
    /// Preferential-attachment exponent; 0 is uniform paper choice.
    #[arg(long)]
    bias: Option<f64>,
    #[arg(long)]
    noise_users: Option<usize>,
    #[arg(long)]
    months: Option<u32>,
    #[arg(long)]
    repeat_prob: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    out: PathBuf,
}

impl SynthArgs {
    fn config(&self) -> Result<SynthConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => SynthConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {$(
                if let Some(v) = self.$flag {
                    c.$field = v;
                }
            )*};
        }
        set!(users => n_users, papers => n_papers, mean_reads => mean_reads, dispersion => dispersion,
             max_reads => max_reads, bias => attachment_bias, noise_users => noise_users, months => months,
             repeat_prob => repeat_access_prob, seed => seed);
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Dedup {
    Month,
    FullRange,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Basis {
    ActiveMonths,
    FullInterval,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Usage log files (tab-separated: timestamp, cookie, bibcode, access type).
    #[arg(long = "log", required = true, num_args = 1..)]
    logs: Vec<PathBuf>,
    /// Journal tags to keep, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "ApJ,ApJL,ApJS,AJ,A&A,MNRAS,PASP")]
    journals: Vec<String>,
    #[arg(long, value_enum, default_value = "month")]
    dedup: Dedup,
    #[arg(long, default_value_t = 10.0)]
    min_rate: f64,
    #[arg(long, default_value_t = 100.0)]
    max_rate: f64,
    #[arg(long, value_enum, default_value = "active-months")]
    rate_basis: Basis,
    /// Fraction of malformed log lines tolerated before ingestion fails.
    #[arg(long, default_value_t = coreadership::logstore::DEFAULT_MAX_MALFORMED_FRACTION)]
    max_malformed: f64,
    /// Above this sample size only the leading --top-k eigenpairs are computed.
    #[arg(long, default_value_t = coreadership::coread::DEFAULT_DENSE_THRESHOLD)]
    dense_threshold: usize,
    #[arg(long, default_value_t = coreadership::spectra::CHECKED_PAIRS)]
    top_k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

impl PipelineArgs {
    fn params(&self, n_s: usize) -> AnalysisParams {
        AnalysisParams {
            journals: self.journals.clone(),
            dedup: match self.dedup {
                Dedup::Month => DedupPeriod::Month,
                Dedup::FullRange => DedupPeriod::FullRange,
            },
            min_rate: self.min_rate,
            max_rate: self.max_rate,
            rate_basis: match self.rate_basis {
                Basis::ActiveMonths => RateBasisChoice::ActiveMonths,
                Basis::FullInterval => RateBasisChoice::FullInterval,
            },
            max_malformed_fraction: self.max_malformed,
            n_s,
            dense_threshold: self.dense_threshold,
            top_k: self.top_k,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Sample size.
    #[arg(long, default_value_t = 2000)]
    ns: usize,
    /// Histogram bins for the spectral density (default: Freedman-Diaconis).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    bins: Option<u64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,400,800,1600")]
    sizes: Vec<usize>,
    /// CSV of n_s,epsilon1 points to fit directly, skipping the pipeline.
    #[arg(long, hide = true)]
    fit_points: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// Directory written by `analyze`.
    #[arg(long)]
    run: PathBuf,
    /// Sphere center, comma separated, one coordinate per component.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    center: Vec<f64>,
    #[arg(long)]
    radius: f64,
    /// Number of leading eigenvectors to project onto.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Tab-separated bibcode and citation count table.
    #[arg(long)]
    citations: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    min_citations: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// A manifest.json or the run directory holding it.
    manifest: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

fn to_run(cmd: &Command) -> Result<(Run, PathBuf)> {
    Ok(match cmd {
        Command::Synth(a) => (Run::Synth { config: a.config()? }, a.out.clone()),
        Command::Analyze(a) => (
            Run::Analyze {
                logs: commands::resolve_logs(&a.pipeline.logs)?,
                params: a.pipeline.params(a.ns),
                bins: a.bins.map(|b| b as usize),
            },
            a.pipeline.out.clone(),
        ),
        Command::Sweep(a) => {
            let sizes = commands::normalize_sizes(&a.sizes);
            (
                Run::Sweep {
                    logs: commands::resolve_logs(&a.pipeline.logs)?,
                    params: a.pipeline.params(sizes.last().copied().unwrap_or(0)),
                    sizes,
                    fit_points: a.fit_points.as_deref().map(absolute).transpose()?,
                },
                a.pipeline.out.clone(),
            )
        }
        Command::Probe(a) => {
            if a.seed.is_some() {
                log::info!("probe reuses the analyze run's seed; --seed is ignored");
            }
            (
                Run::Probe {
                    run: absolute(&a.run)?,
                    center: a.center.clone(),
                    radius: a.radius,
                    k: a.k,
                    citations: a.citations.as_deref().map(absolute).transpose()?,
                    min_citations: a.min_citations,
                },
                a.out.clone(),
            )
        }
        Command::Replay(a) => (Manifest::read(&a.manifest)?.run, a.out.clone()),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match to_run(&cli.command).and_then(|(run, out)| commands::run(&run, &out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
