//! End-to-end wiring: logs to sample to spectrum.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::coread::{build_coread, build_incidence, CoreadMatrices, CoreadOptions, DEFAULT_DENSE_THRESHOLD};
use crate::exec::Exec;
use crate::logstore::{
    dedup_reads, parse_events, AccessEvent, DedupPeriod, JournalFilter, DEFAULT_MAX_MALFORMED_FRACTION,
    CORE_JOURNALS,
};
use crate::population::{draw_sample, filter_population, interval_months, PopulationRule, RateBasis, Sample};
use crate::spectra::{
    eigendecompose, separation_statistic, spectral_density, verify_spectrum, Bins, EigenOptions,
    SpectralChecks, SpectralDensity, SpectralSummary, SpectraError, CHECKED_PAIRS,
};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateBasisChoice {
    ActiveMonths,
    /// Interval length taken from the month span of the whole log.
    FullInterval,
}

/// Everything that determines a sample and its spectrum, apart from the logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisParams {
    pub journals: Vec<String>,
    pub dedup: DedupPeriod,
    pub min_rate: f64,
    pub max_rate: f64,
    pub rate_basis: RateBasisChoice,
    pub max_malformed_fraction: f64,
    pub n_s: usize,
    pub dense_threshold: usize,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams {
            journals: CORE_JOURNALS.iter().map(|s| s.trim_end_matches('.').to_owned()).collect(),
            dedup: DedupPeriod::Month,
            min_rate: 10.0,
            max_rate: 100.0,
            rate_basis: RateBasisChoice::ActiveMonths,
            max_malformed_fraction: DEFAULT_MAX_MALFORMED_FRACTION,
            n_s: 2000,
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            top_k: CHECKED_PAIRS,
            seed: 0,
        }
    }
}

impl AnalysisParams {
    pub fn coread_options(&self, exec: Exec) -> CoreadOptions {
        CoreadOptions {
            dense_threshold: self.dense_threshold,
            exec,
        }
    }

    pub fn eigen_options(&self, exec: Exec) -> EigenOptions {
        EigenOptions {
            dense_threshold: self.dense_threshold,
            top_k: self.top_k,
            vectors: true,
            seed: self.seed,
            exec,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Ingested {
    pub sample: Sample,
    pub events: usize,
    pub malformed: usize,
    pub users_seen: usize,
    pub population: usize,
}

/// Parse every log, dedup, filter by read rate and take the top `n_s` users.
pub fn ingest<R: BufRead>(logs: Vec<R>, params: &AnalysisParams, exec: Exec) -> Result<Ingested, Error> {
    let opts = crate::logstore::ParseOptions {
        max_malformed_fraction: params.max_malformed_fraction,
        exec,
    };
    let mut events: Vec<AccessEvent> = Vec::new();
    let mut malformed = 0;
    for log in logs {
        let parsed = parse_events(log, &opts)?;
        malformed += parsed.malformed_count();
        events.extend(parsed.events);
    }
    let filter = JournalFilter::new(&params.journals)?;
    let profiles = dedup_reads(&events, &filter, params.dedup, exec);
    let basis = match params.rate_basis {
        RateBasisChoice::ActiveMonths => RateBasis::MeanOverActiveMonths,
        RateBasisChoice::FullInterval => RateBasis::MeanOverFullInterval {
            months: interval_months(profiles.values()),
        },
    };
    let rule = PopulationRule::new(params.min_rate, params.max_rate, basis)?;
    let population = filter_population(&profiles, &rule);
    let sample = draw_sample(&population, params.n_s)?;
    log::info!(
        "ingested {} events ({malformed} malformed), {} users, {} in population, sample of {}",
        events.len(),
        profiles.len(),
        population.len(),
        sample.len()
    );
    Ok(Ingested {
        sample,
        events: events.len(),
        malformed,
        users_seen: profiles.len(),
        population: population.len(),
    })
}

#[derive(Debug)]
pub struct Analysis {
    pub matrices: CoreadMatrices,
    pub summary: SpectralSummary,
    pub checks: SpectralChecks,
    /// Only for complete spectra.
    pub density: Option<Result<SpectralDensity, SpectraError>>,
    pub separation: Result<f64, SpectraError>,
}

pub fn analyze(sample: &Sample, params: &AnalysisParams, bins: Bins, exec: Exec) -> Result<Analysis, Error> {
    let matrices = build_coread(&build_incidence(sample), &params.coread_options(exec))?;
    let summary = eigendecompose(&matrices, &params.eigen_options(exec))?;
    let checks = verify_spectrum(&matrices, &summary, exec);
    if !checks.passes() {
        log::warn!("spectral checks failed: {checks:?}");
    }
    let density = summary.is_complete().then(|| spectral_density(&summary, bins));
    let separation = separation_statistic(&summary);
    Ok(Analysis {
        matrices,
        summary,
        checks,
        density,
        separation,
    })
}
