//! Synthetic usage logs from a preferential-attachment readership model.
//!
//! Regular users arrive one after another; each draws a read count and then
//! picks papers without replacement with probability proportional to
//! `(popularity + 1)^attachment_bias`, where popularity is the number of
//! earlier readers. One-shot noise users read one to three uniformly chosen
//! papers and do not feed back into popularity.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::logstore::{
    dedup_reads, parse_events_str, AccessEvent, AccessType, Bibcode, CookieId, DedupPeriod, JournalFilter,
    LogError, ParseOptions, YearMonth, CORE_JOURNALS,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("n_papers ({n_papers}) is smaller than the per-user read cap ({max_reads})")]
    TooFewPapers { n_papers: usize, max_reads: usize },
    #[error(transparent)]
    Log(#[from] LogError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_papers: usize,
    /// Mean of the per-user read count (gamma–Poisson mixture).
    pub mean_reads: f64,
    /// Gamma shape of the read-count mixture; larger is less dispersed.
    pub dispersion: f64,
    /// Read counts are clamped to `1..=max_reads`.
    pub max_reads: usize,
    pub attachment_bias: f64,
    pub noise_users: usize,
    pub months: u32,
    pub start_month: YearMonth,
    /// Chance that a read produces a second access of another type in the same month.
    pub repeat_access_prob: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 2000,
            n_papers: 5000,
            mean_reads: 40.0,
            dispersion: 4.0,
            max_reads: 200,
            attachment_bias: 1.0,
            noise_users: 200,
            months: 1,
            start_month: YearMonth { year: 2005, month: 1 },
            repeat_access_prob: 0.3,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_owned()));
        if self.n_users == 0 {
            return bad("n_users must be positive");
        }
        if self.n_papers == 0 {
            return bad("n_papers must be positive");
        }
        if self.months == 0 {
            return bad("months must be positive");
        }
        if self.max_reads == 0 {
            return bad("max_reads must be positive");
        }
        if !(self.mean_reads > 0.0 && self.mean_reads.is_finite()) {
            return bad("mean_reads must be positive");
        }
        if !(self.dispersion > 0.0 && self.dispersion.is_finite()) {
            return bad("dispersion must be positive");
        }
        if !(self.attachment_bias >= 0.0 && self.attachment_bias.is_finite()) {
            return bad("attachment_bias must be a finite number >= 0");
        }
        if !(0.0..=1.0).contains(&self.repeat_access_prob) {
            return bad("repeat_access_prob must lie in [0, 1]");
        }
        if !(1..=12).contains(&self.start_month.month) {
            return bad("start_month is not a calendar month");
        }
        if self.n_papers < self.max_reads {
            return Err(SynthError::TooFewPapers {
                n_papers: self.n_papers,
                max_reads: self.max_reads,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthUser {
    pub cookie_id: CookieId,
    pub regular: bool,
    pub papers: BTreeSet<Bibcode>,
    pub monthly_counts: BTreeMap<YearMonth, u32>,
}

impl TruthUser {
    pub fn total_reads(&self) -> u64 {
        self.papers.len() as u64
    }
}

/// What the generator intended, before serialization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub users: Vec<TruthUser>,
}

impl SynthTruth {
    /// Number of regular users who read each paper.
    pub fn paper_popularity(&self) -> BTreeMap<Bibcode, usize> {
        let mut pop = BTreeMap::new();
        for u in self.users.iter().filter(|u| u.regular) {
            for p in &u.papers {
                *pop.entry(p.clone()).or_default() += 1;
            }
        }
        pop
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub log: String,
    pub truth: SynthTruth,
}

/// Deterministic bibcode for paper `i`, always in a core journal.
pub fn paper_bibcode(i: usize) -> Bibcode {
    let journal = CORE_JOURNALS[i % CORE_JOURNALS.len()];
    let rest = i / CORE_JOURNALS.len();
    let volume = 1 + rest / 2000;
    let page = 1 + rest % 2000;
    let year = 1990 + rest % 16;
    let initial = (b'A' + ((i * 7) % 26) as u8) as char;
    Bibcode::new(format!("{year}{journal}{volume:.>4}.{page:.>4}{initial}")).expect("generated bibcodes are valid")
}

/// Binary indexed tree over nonnegative sampling weights.
struct Fenwick {
    tree: Vec<f64>,
    weights: Vec<f64>,
}

impl Fenwick {
    fn new(weights: Vec<f64>) -> Self {
        let n = weights.len();
        let mut tree = vec![0.0; n + 1];
        for (i, &w) in weights.iter().enumerate() {
            let mut j = i + 1;
            while j <= n {
                tree[j] += w;
                j += j & j.wrapping_neg();
            }
        }
        Fenwick { tree, weights }
    }

    fn set(&mut self, i: usize, w: f64) {
        let delta = w - self.weights[i];
        self.weights[i] = w;
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        let mut s = 0.0;
        let mut j = self.tree.len() - 1;
        while j > 0 {
            s += self.tree[j];
            j &= j - 1;
        }
        s
    }

    /// Smallest index whose prefix sum exceeds `target`.
    fn find(&self, mut target: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        loop {
            let i = self.find(rng.random::<f64>() * self.total());
            // rounding in the partial sums can land on an excluded slot
            if self.weights[i] > 0.0 {
                return i;
            }
        }
    }
}

const ACCESS_TYPES: [AccessType; 4] = [
    AccessType::Abstract,
    AccessType::Fulltext,
    AccessType::Citations,
    AccessType::References,
];

fn month_start(m: YearMonth) -> DateTime<Utc> {
    NaiveDate::from_ymd_opt(m.year, m.month, 1)
        .expect("valid month")
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
        .and_utc()
}

struct Calendar {
    months: Vec<(YearMonth, DateTime<Utc>, i64)>,
}

impl Calendar {
    fn new(start: YearMonth, n: u32) -> Self {
        let mut months = Vec::with_capacity(n as usize);
        let mut m = start;
        for _ in 0..n {
            let begin = month_start(m);
            let secs = (month_start(m.succ()) - begin).num_seconds();
            months.push((m, begin, secs));
            m = m.succ();
        }
        Calendar { months }
    }
}

fn emit_reads(
    rng: &mut ChaCha8Rng,
    cal: &Calendar,
    cookie: &CookieId,
    papers: &[usize],
    bibcodes: &[Bibcode],
    repeat_prob: f64,
    events: &mut Vec<AccessEvent>,
) -> BTreeMap<YearMonth, u32> {
    let mut monthly = BTreeMap::new();
    for &p in papers {
        let (ym, begin, secs) = cal.months[rng.random_range(0..cal.months.len())];
        let offset = rng.random_range(0..secs);
        let kind = rng.random_range(0..ACCESS_TYPES.len());
        let ts = begin + Duration::seconds(offset);
        events.push(AccessEvent {
            timestamp: ts,
            cookie_id: cookie.clone(),
            bibcode: bibcodes[p].clone(),
            access_type: ACCESS_TYPES[kind].clone(),
        });
        if rng.random_bool(repeat_prob) {
            let room = (secs - 1 - offset).min(600);
            let later = if room > 0 { rng.random_range(0..=room) } else { 0 };
            let other = (kind + rng.random_range(1..ACCESS_TYPES.len())) % ACCESS_TYPES.len();
            events.push(AccessEvent {
                timestamp: ts + Duration::seconds(later),
                cookie_id: cookie.clone(),
                bibcode: bibcodes[p].clone(),
                access_type: ACCESS_TYPES[other].clone(),
            });
        }
        *monthly.entry(ym).or_default() += 1;
    }
    monthly
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bibcodes: Vec<Bibcode> = (0..config.n_papers).map(paper_bibcode).collect();
    let cal = Calendar::new(config.start_month, config.months);

    let gamma = Gamma::new(config.dispersion, config.mean_reads / config.dispersion)
        .map_err(|e| SynthError::Config(e.to_string()))?;
    let weight = |pop: u32| (pop as f64 + 1.0).powf(config.attachment_bias);

    let mut popularity = vec![0u32; config.n_papers];
    let mut tree = Fenwick::new(vec![weight(0); config.n_papers]);
    let mut events = Vec::new();
    let mut users = Vec::with_capacity(config.n_users + config.noise_users);

    for u in 0..config.n_users {
        let lambda: f64 = gamma.sample(&mut rng);
        let count = if lambda > 0.0 {
            Poisson::new(lambda).map(|d| d.sample(&mut rng) as usize).unwrap_or(0)
        } else {
            0
        }
        .clamp(1, config.max_reads);

        let mut chosen = Vec::with_capacity(count);
        for _ in 0..count {
            let p = tree.sample(&mut rng);
            tree.set(p, 0.0);
            chosen.push(p);
        }
        for &p in &chosen {
            popularity[p] += 1;
            tree.set(p, weight(popularity[p]));
        }

        let cookie = CookieId::new(format!("u_{u:06}")).expect("valid cookie");
        let monthly = emit_reads(&mut rng, &cal, &cookie, &chosen, &bibcodes, config.repeat_access_prob, &mut events);
        users.push(TruthUser {
            cookie_id: cookie,
            regular: true,
            papers: chosen.iter().map(|&p| bibcodes[p].clone()).collect(),
            monthly_counts: monthly,
        });
    }

    for g in 0..config.noise_users {
        let count = rng.random_range(1..=3usize).min(config.n_papers);
        let chosen = rand::seq::index::sample(&mut rng, config.n_papers, count).into_vec();
        let cookie = CookieId::new(format!("g_{g:06}")).expect("valid cookie");
        let monthly = emit_reads(&mut rng, &cal, &cookie, &chosen, &bibcodes, config.repeat_access_prob, &mut events);
        users.push(TruthUser {
            cookie_id: cookie,
            regular: false,
            papers: chosen.iter().map(|&p| bibcodes[p].clone()).collect(),
            monthly_counts: monthly,
        });
    }

    events.sort_by(|a, b| {
        (a.timestamp, &a.cookie_id, &a.bibcode, a.access_type.as_str()).cmp(&(
            b.timestamp,
            &b.cookie_id,
            &b.bibcode,
            b.access_type.as_str(),
        ))
    });
    let mut log = format!(
        "# synthetic usage log: users={} noise={} papers={} bias={} months={} seed={}\n",
        config.n_users, config.noise_users, config.n_papers, config.attachment_bias, config.months, config.seed
    );
    for e in &events {
        log.push_str(&e.to_line());
        log.push('\n');
    }
    Ok(SynthOutput {
        log,
        truth: SynthTruth { users },
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundtripReport {
    /// One entry per user whose parsed profile disagrees with the truth.
    pub diffs: Vec<String>,
}

impl RoundtripReport {
    pub fn ok(&self) -> bool {
        self.diffs.is_empty()
    }
}

/// Parse `log` and dedup over the full range, then compare with `truth`.
pub fn compare_with_truth(log: &str, truth: &SynthTruth) -> Result<RoundtripReport, SynthError> {
    let parsed = parse_events_str(log, &ParseOptions::default())?;
    let profiles = dedup_reads(&parsed.events, &JournalFilter::core_journals(), DedupPeriod::FullRange, Exec::default());
    let mut diffs = Vec::new();
    let mut seen = BTreeSet::new();
    for u in &truth.users {
        seen.insert(&u.cookie_id);
        match profiles.get(&u.cookie_id) {
            None => diffs.push(format!("{}: missing from parsed log", u.cookie_id)),
            Some(p) if p.papers != u.papers => {
                let missing = u.papers.difference(&p.papers).count();
                let extra = p.papers.difference(&u.papers).count();
                diffs.push(format!("{}: {missing} papers missing, {extra} unexpected", u.cookie_id));
            }
            Some(p) if p.monthly_counts != u.monthly_counts || p.total_reads != u.total_reads() => {
                diffs.push(format!(
                    "{}: monthly counts {:?} != {:?}",
                    u.cookie_id, p.monthly_counts, u.monthly_counts
                ));
            }
            Some(_) => {}
        }
    }
    for c in profiles.keys().filter(|c| !seen.contains(c)) {
        diffs.push(format!("{c}: present in log but not in truth"));
    }
    Ok(RoundtripReport { diffs })
}

pub fn roundtrip_check(config: &SynthConfig) -> Result<RoundtripReport, SynthError> {
    let out = generate(config)?;
    let report = compare_with_truth(&out.log, &out.truth)?;
    for d in &report.diffs {
        log::warn!("roundtrip: {d}");
    }
    Ok(report)
}
