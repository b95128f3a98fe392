//! Population selection by monthly read rate, and the ranked sample.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logstore::{CookieId, ReadProfile, YearMonth};

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("invalid rate bounds: need 0 < min_rate ({min}) < max_rate ({max})")]
    RateBounds { min: f64, max: f64 },
    #[error("full-interval rate basis needs a positive month count")]
    ZeroInterval,
    #[error("sample size must be at least 2, got {0}")]
    SampleTooSmall(usize),
    #[error("population has {0} users; the spectral pipeline needs at least 2")]
    PopulationTooSmall(usize),
    #[error("prefix of {requested} users requested from a sample of {available}")]
    PrefixTooLarge { requested: usize, available: usize },
    #[error("failed to write sample: {0}")]
    Io(#[from] std::io::Error),
}

/// How a user's monthly read rate is averaged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "basis")]
pub enum RateBasis {
    /// Total reads divided by the number of months with at least one read.
    MeanOverActiveMonths,
    /// Total reads divided by a fixed interval length.
    MeanOverFullInterval { months: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationRule {
    min_rate: f64,
    max_rate: f64,
    basis: RateBasis,
}

impl PopulationRule {
    pub fn new(min_rate: f64, max_rate: f64, basis: RateBasis) -> Result<Self, PopulationError> {
        if !(min_rate > 0.0 && min_rate < max_rate) {
            return Err(PopulationError::RateBounds {
                min: min_rate,
                max: max_rate,
            });
        }
        if let RateBasis::MeanOverFullInterval { months: 0 } = basis {
            return Err(PopulationError::ZeroInterval);
        }
        Ok(PopulationRule {
            min_rate,
            max_rate,
            basis,
        })
    }

    pub fn min_rate(&self) -> f64 {
        self.min_rate
    }

    pub fn max_rate(&self) -> f64 {
        self.max_rate
    }

    pub fn basis(&self) -> RateBasis {
        self.basis
    }

    /// Monthly read rate of `profile` under this rule's basis.
    pub fn rate(&self, profile: &ReadProfile) -> f64 {
        let months = match self.basis {
            RateBasis::MeanOverActiveMonths => profile.active_months(),
            RateBasis::MeanOverFullInterval { months } => months as usize,
        };
        if months == 0 {
            return 0.0;
        }
        profile.total_reads as f64 / months as f64
    }

    pub fn admits(&self, profile: &ReadProfile) -> bool {
        let r = self.rate(profile);
        r >= self.min_rate && r <= self.max_rate
    }
}

impl Default for PopulationRule {
    /// 10 to 100 reads per active month.
    fn default() -> Self {
        PopulationRule {
            min_rate: 10.0,
            max_rate: 100.0,
            basis: RateBasis::MeanOverActiveMonths,
        }
    }
}

/// Number of calendar months spanned by all profiles together.
pub fn interval_months<'a>(profiles: impl IntoIterator<Item = &'a ReadProfile>) -> u32 {
    let mut span: Option<(YearMonth, YearMonth)> = None;
    for (a, b) in profiles.into_iter().filter_map(ReadProfile::month_span) {
        span = Some(match span {
            None => (a, b),
            Some((lo, hi)) => (lo.min(a), hi.max(b)),
        });
    }
    span.map_or(0, |(lo, hi)| lo.months_through(hi))
}

pub fn filter_population(
    profiles: &BTreeMap<CookieId, ReadProfile>,
    rule: &PopulationRule,
) -> BTreeMap<CookieId, ReadProfile> {
    let kept: BTreeMap<_, _> = profiles
        .iter()
        .filter(|(_, p)| rule.admits(p))
        .map(|(k, p)| (k.clone(), p.clone()))
        .collect();
    if kept.is_empty() {
        log::warn!(
            "population filter [{}, {}] retained no users out of {}",
            rule.min_rate,
            rule.max_rate,
            profiles.len()
        );
    }
    kept
}

/// The ranked user sample. Index `i` (0-based) in `users` and `profiles`
/// corresponds to the external 1-based user index `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    users: Vec<CookieId>,
    index_of: HashMap<CookieId, usize>,
    profiles: Vec<ReadProfile>,
    requested: usize,
}

impl Sample {
    fn from_ranked(profiles: Vec<ReadProfile>, requested: usize) -> Self {
        let users: Vec<CookieId> = profiles.iter().map(|p| p.cookie_id.clone()).collect();
        let index_of = users.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Sample {
            users,
            index_of,
            profiles,
            requested,
        }
    }

    /// Build a sample from profiles in arbitrary order, ranking them.
    pub fn from_profiles(mut profiles: Vec<ReadProfile>) -> Self {
        rank(&mut profiles);
        let n = profiles.len();
        Sample::from_ranked(profiles, n)
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// The size that was asked for; may exceed `len()` when the population saturated.
    pub fn requested(&self) -> usize {
        self.requested
    }

    pub fn users(&self) -> &[CookieId] {
        &self.users
    }

    pub fn profiles(&self) -> &[ReadProfile] {
        &self.profiles
    }

    pub fn profile(&self, index: usize) -> &ReadProfile {
        &self.profiles[index]
    }

    /// 0-based position of a user in the ranking.
    pub fn index_of(&self, cookie: &CookieId) -> Option<usize> {
        self.index_of.get(cookie).copied()
    }

    /// The top-`n` users, which is what `draw_sample(population, n)` returns.
    pub fn prefix(&self, n: usize) -> Result<Sample, PopulationError> {
        if n > self.len() {
            return Err(PopulationError::PrefixTooLarge {
                requested: n,
                available: self.len(),
            });
        }
        Ok(Sample::from_ranked(self.profiles[..n].to_vec(), n))
    }

    /// `index,cookie_id,total_reads` with 1-based indices.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), PopulationError> {
        writeln!(w, "index,cookie_id,total_reads")?;
        for (i, p) in self.profiles.iter().enumerate() {
            writeln!(w, "{},{},{}", i + 1, p.cookie_id, p.total_reads)?;
        }
        Ok(())
    }
}

fn rank(profiles: &mut [ReadProfile]) {
    profiles.sort_by(|a, b| {
        b.total_reads
            .cmp(&a.total_reads)
            .then_with(|| a.cookie_id.cmp(&b.cookie_id))
    });
}

/// Top-`n_s` users by total reads, ties broken by cookie id.
pub fn draw_sample(
    population: &BTreeMap<CookieId, ReadProfile>,
    n_s: usize,
) -> Result<Sample, PopulationError> {
    if n_s < 2 {
        return Err(PopulationError::SampleTooSmall(n_s));
    }
    if population.len() < 2 {
        return Err(PopulationError::PopulationTooSmall(population.len()));
    }
    let mut ranked: Vec<ReadProfile> = population.values().cloned().collect();
    rank(&mut ranked);
    ranked.truncate(n_s);
    if ranked.len() < n_s {
        log::info!("population of {} is smaller than n_s = {n_s}; using all", ranked.len());
    }
    Ok(Sample::from_ranked(ranked, n_s))
}
