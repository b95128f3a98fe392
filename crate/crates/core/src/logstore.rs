//! Usage-log ingestion: parsing access events and collapsing them into
//! deduplicated per-user read profiles.
//!
//! The log is line oriented, UTF-8, one record per LF-terminated line with
//! four tab-separated fields:
//!
//! ```text
//! 2005-03-14T09:26:53Z<TAB>u_0042<TAB>2003ApJ...591.1220L<TAB>ABSTRACT
//! ```
//!
//! Lines starting with `#` are comments and blank lines are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;

pub const BIBCODE_LEN: usize = 19;
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";
pub const DEFAULT_MAX_MALFORMED_FRACTION: f64 = 0.10;

/// Journal abbreviations of the core astronomy journals, padded to five columns.
pub const CORE_JOURNALS: [&str; 7] = ["ApJ..", "ApJL.", "ApJS.", "AJ...", "A&A..", "MNRAS", "PASP."];

#[derive(Debug, Error)]
pub enum LogError {
    #[error("failed to read log stream: {0}")]
    Io(#[from] std::io::Error),
    #[error(
        "{malformed} of {records} records are malformed (limit {limit:.1}%); first bad line {first_line}: {reason}"
    )]
    TooManyMalformed {
        malformed: usize,
        records: usize,
        limit: f64,
        first_line: usize,
        reason: String,
    },
    #[error("invalid bibcode {0:?}: {1}")]
    Bibcode(String, &'static str),
    #[error("invalid cookie id {0:?}")]
    CookieId(String),
    #[error("invalid access type {0:?}")]
    AccessType(String),
    #[error("invalid timestamp {0:?}")]
    Timestamp(String),
    #[error("invalid month {0:?}, expected YYYY-MM")]
    Month(String),
    #[error("journal filter is empty")]
    EmptyFilter,
    #[error("journal tag {0:?} is longer than 5 characters")]
    JournalTag(String),
}

/// A 19-character ADS bibcode, e.g. `2003ApJ...591.1220L`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Bibcode(String);

impl Bibcode {
    pub fn new(s: impl Into<String>) -> Result<Self, LogError> {
        let s = s.into();
        if !s.is_ascii() {
            return Err(LogError::Bibcode(s, "non-ASCII characters"));
        }
        if s.len() != BIBCODE_LEN {
            return Err(LogError::Bibcode(s, "length is not 19"));
        }
        if s.bytes().any(|b| b.is_ascii_whitespace() || b.is_ascii_control()) {
            return Err(LogError::Bibcode(s, "contains whitespace"));
        }
        match s[..4].parse::<u16>() {
            Ok(y) if (1800..=2100).contains(&y) && s[..4].bytes().all(|b| b.is_ascii_digit()) => {}
            _ => return Err(LogError::Bibcode(s, "year outside 1800..=2100")),
        }
        Ok(Bibcode(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn year(&self) -> u16 {
        self.0[..4].parse().expect("validated on construction")
    }

    /// Columns 5 to 9: the journal abbreviation, dot padded.
    pub fn journal_tag(&self) -> &str {
        &self.0[4..9]
    }
}

impl TryFrom<String> for Bibcode {
    type Error = LogError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Bibcode::new(s)
    }
}

impl From<Bibcode> for String {
    fn from(b: Bibcode) -> String {
        b.0
    }
}

impl fmt::Display for Bibcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Opaque user identifier. Non-empty, no whitespace.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CookieId(String);

impl CookieId {
    pub fn new(s: impl Into<String>) -> Result<Self, LogError> {
        let s = s.into();
        if s.is_empty() || s.chars().any(char::is_whitespace) {
            return Err(LogError::CookieId(s));
        }
        Ok(CookieId(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for CookieId {
    type Error = LogError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        CookieId::new(s)
    }
}

impl From<CookieId> for String {
    fn from(c: CookieId) -> String {
        c.0
    }
}

impl fmt::Display for CookieId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AccessType {
    Abstract,
    Fulltext,
    Citations,
    References,
    /// Any other upper-case token (`[A-Z0-9_]+`).
    Other(String),
}

impl AccessType {
    pub fn as_str(&self) -> &str {
        match self {
            AccessType::Abstract => "ABSTRACT",
            AccessType::Fulltext => "FULLTEXT",
            AccessType::Citations => "CITATIONS",
            AccessType::References => "REFERENCES",
            AccessType::Other(s) => s,
        }
    }
}

impl FromStr for AccessType {
    type Err = LogError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "ABSTRACT" => AccessType::Abstract,
            "FULLTEXT" => AccessType::Fulltext,
            "CITATIONS" => AccessType::Citations,
            "REFERENCES" => AccessType::References,
            _ if !s.is_empty()
                && s.bytes().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_') =>
            {
                AccessType::Other(s.to_owned())
            }
            _ => return Err(LogError::AccessType(s.to_owned())),
        })
    }
}

impl fmt::Display for AccessType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Calendar month in UTC, rendered `YYYY-MM`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self, LogError> {
        if !(1..=12).contains(&month) {
            return Err(LogError::Month(format!("{year:04}-{month:02}")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn of(ts: &DateTime<Utc>) -> Self {
        YearMonth {
            year: ts.year(),
            month: ts.month(),
        }
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            YearMonth { year: self.year + 1, month: 1 }
        } else {
            YearMonth { year: self.year, month: self.month + 1 }
        }
    }

    /// Number of calendar months from `self` to `other`, inclusive of both.
    pub fn months_through(self, other: YearMonth) -> u32 {
        let a = self.year * 12 + self.month as i32;
        let b = other.year * 12 + other.month as i32;
        (b - a + 1).max(0) as u32
    }
}

impl FromStr for YearMonth {
    type Err = LogError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LogError::Month(s.to_owned());
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        YearMonth::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

impl TryFrom<String> for YearMonth {
    type Error = LogError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<YearMonth> for String {
    fn from(m: YearMonth) -> String {
        m.to_string()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessEvent {
    pub timestamp: DateTime<Utc>,
    pub cookie_id: CookieId,
    pub bibcode: Bibcode,
    pub access_type: AccessType,
}

impl AccessEvent {
    /// Render as one log line, without the trailing newline.
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.timestamp.format(TIMESTAMP_FORMAT),
            self.cookie_id,
            self.bibcode,
            self.access_type
        )
    }

    pub fn month(&self) -> YearMonth {
        YearMonth::of(&self.timestamp)
    }
}

impl FromStr for AccessEvent {
    type Err = LogError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut fields = line.split('\t');
        let (Some(ts), Some(cookie), Some(bib), Some(kind), None) = (
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
        ) else {
            return Err(LogError::Timestamp(format!(
                "expected 4 tab-separated fields in {line:?}"
            )));
        };
        let timestamp = NaiveDateTime::parse_from_str(ts, TIMESTAMP_FORMAT)
            .map_err(|_| LogError::Timestamp(ts.to_owned()))?
            .and_utc();
        Ok(AccessEvent {
            timestamp,
            cookie_id: CookieId::new(cookie)?,
            bibcode: Bibcode::new(bib)?,
            access_type: kind.parse()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseOptions {
    /// Fraction of record lines allowed to be malformed before the parse fails.
    pub max_malformed_fraction: f64,
    pub exec: Exec,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_malformed_fraction: DEFAULT_MAX_MALFORMED_FRACTION,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MalformedLine {
    /// 1-based line number in the input.
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParsedLog {
    pub events: Vec<AccessEvent>,
    pub malformed: Vec<MalformedLine>,
}

impl ParsedLog {
    pub fn malformed_count(&self) -> usize {
        self.malformed.len()
    }
}

/// Parse a log stream. Malformed lines are collected, not fatal, until they
/// exceed `opts.max_malformed_fraction` of all record lines.
pub fn parse_events<R: BufRead>(stream: R, opts: &ParseOptions) -> Result<ParsedLog, LogError> {
    let mut records: Vec<(usize, String)> = Vec::new();
    for (i, line) in stream.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        records.push((i + 1, line));
    }

    let parsed = opts.exec.map(&records, |(no, line)| {
        line.parse::<AccessEvent>().map_err(|e| MalformedLine {
            line: *no,
            reason: e.to_string(),
        })
    });

    let mut out = ParsedLog::default();
    for r in parsed {
        match r {
            Ok(ev) => out.events.push(ev),
            Err(m) => out.malformed.push(m),
        }
    }

    if !records.is_empty() {
        let frac = out.malformed.len() as f64 / records.len() as f64;
        if frac > opts.max_malformed_fraction {
            let first = &out.malformed[0];
            return Err(LogError::TooManyMalformed {
                malformed: out.malformed.len(),
                records: records.len(),
                limit: opts.max_malformed_fraction * 100.0,
                first_line: first.line,
                reason: first.reason.clone(),
            });
        }
    }
    if !out.malformed.is_empty() {
        log::warn!(
            "skipped {} malformed log lines (first at line {})",
            out.malformed.len(),
            out.malformed[0].line
        );
    }
    Ok(out)
}

pub fn parse_events_str(text: &str, opts: &ParseOptions) -> Result<ParsedLog, LogError> {
    parse_events(text.as_bytes(), opts)
}

/// Ordered set of five-column journal tags a bibcode must carry to count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalFilter {
    tags: BTreeSet<String>,
}

impl JournalFilter {
    /// Tags shorter than five characters are right-padded with '.'.
    pub fn new<I, S>(tags: I) -> Result<Self, LogError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for t in tags {
            let t = t.as_ref();
            if t.chars().count() > 5 {
                return Err(LogError::JournalTag(t.to_owned()));
            }
            let mut tag = t.to_owned();
            while tag.chars().count() < 5 {
                tag.push('.');
            }
            set.insert(tag);
        }
        if set.is_empty() {
            return Err(LogError::EmptyFilter);
        }
        Ok(JournalFilter { tags: set })
    }

    pub fn core_journals() -> Self {
        JournalFilter::new(CORE_JOURNALS).expect("static tags are valid")
    }

    pub fn accepts(&self, bibcode: &Bibcode) -> bool {
        self.tags.contains(bibcode.journal_tag())
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.tags.iter().map(String::as_str)
    }
}

impl Default for JournalFilter {
    fn default() -> Self {
        JournalFilter::core_journals()
    }
}

/// What counts as one "log period" when collapsing repeated accesses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DedupPeriod {
    #[default]
    Month,
    FullRange,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadProfile {
    pub cookie_id: CookieId,
    /// Distinct papers read over the whole interval.
    pub papers: BTreeSet<Bibcode>,
    pub monthly_counts: BTreeMap<YearMonth, u32>,
    pub total_reads: u64,
}

impl ReadProfile {
    pub fn active_months(&self) -> usize {
        self.monthly_counts.values().filter(|&&c| c > 0).count()
    }

    /// Earliest and latest months with a count entry.
    pub fn month_span(&self) -> Option<(YearMonth, YearMonth)> {
        let first = *self.monthly_counts.keys().next()?;
        let last = *self.monthly_counts.keys().next_back()?;
        Some((first, last))
    }
}

type Buckets = BTreeMap<CookieId, BTreeMap<Bibcode, BTreeSet<YearMonth>>>;

fn bucket_events(events: &[AccessEvent], filter: &JournalFilter) -> Buckets {
    let mut b: Buckets = BTreeMap::new();
    for ev in events.iter().filter(|e| filter.accepts(&e.bibcode)) {
        b.entry(ev.cookie_id.clone())
            .or_default()
            .entry(ev.bibcode.clone())
            .or_default()
            .insert(ev.month());
    }
    b
}

fn merge_buckets(mut into: Buckets, from: Buckets) -> Buckets {
    for (user, papers) in from {
        let dst = into.entry(user).or_default();
        for (paper, months) in papers {
            dst.entry(paper).or_default().extend(months);
        }
    }
    into
}

const DEDUP_SHARD: usize = 1 << 14;

/// Collapse events into one profile per user.
///
/// Under [`DedupPeriod::Month`] each (paper, month) pair is one read; under
/// [`DedupPeriod::FullRange`] each paper is one read, booked to the first
/// month it was accessed. Events outside `filter` are dropped, and users left
/// with no reads are omitted.
pub fn dedup_reads(
    events: &[AccessEvent],
    filter: &JournalFilter,
    period: DedupPeriod,
    exec: Exec,
) -> BTreeMap<CookieId, ReadProfile> {
    let shards: Vec<&[AccessEvent]> = events.chunks(DEDUP_SHARD).collect();
    let buckets = exec
        .map(&shards, |s| bucket_events(s, filter))
        .into_iter()
        .fold(Buckets::new(), merge_buckets);

    buckets
        .into_iter()
        .map(|(cookie_id, papers)| {
            let mut monthly_counts: BTreeMap<YearMonth, u32> = BTreeMap::new();
            for months in papers.values() {
                match period {
                    DedupPeriod::Month => {
                        for m in months {
                            *monthly_counts.entry(*m).or_default() += 1;
                        }
                    }
                    DedupPeriod::FullRange => {
                        let first = months.iter().next().expect("non-empty by construction");
                        *monthly_counts.entry(*first).or_default() += 1;
                    }
                }
            }
            let total_reads = monthly_counts.values().map(|&c| c as u64).sum();
            let profile = ReadProfile {
                cookie_id: cookie_id.clone(),
                papers: papers.into_keys().collect(),
                monthly_counts,
                total_reads,
            };
            (cookie_id, profile)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(ts: &str, user: &str, bib: &str, kind: &str) -> AccessEvent {
        format!("{ts}\t{user}\t{bib}\t{kind}").parse().unwrap()
    }

    const P: &str = "2003ApJ...591.1220L";
    const Q: &str = "2001MNRAS.321..559K";

    #[test]
    fn parses_single_record() {
        let log = parse_events_str(
            "2005-03-14T09:26:53Z\tu_0042\t2003ApJ...591.1220L\tABSTRACT",
            &ParseOptions::default(),
        )
        .unwrap();
        assert_eq!(log.events.len(), 1);
        assert_eq!(log.malformed_count(), 0);
        let e = &log.events[0];
        assert_eq!(e.bibcode.year(), 2003);
        assert_eq!(e.bibcode.journal_tag(), "ApJ..");
        assert_eq!(e.cookie_id.as_str(), "u_0042");
        assert_eq!(e.access_type, AccessType::Abstract);
        assert_eq!(e.to_line(), "2005-03-14T09:26:53Z\tu_0042\t2003ApJ...591.1220L\tABSTRACT");
    }

    #[test]
    fn empty_input() {
        let log = parse_events_str("", &ParseOptions::default()).unwrap();
        assert!(log.events.is_empty());
        assert_eq!(log.malformed_count(), 0);
    }

    #[test]
    fn counts_malformed_lines() {
        let text = "2005-01-01T00:00:00Z\ta\t2003ApJ...591.1220L\tABSTRACT\n\
                    2005-01-01T00:00:01Z\tb\t2003ApJ...591.1220\tABSTRACT\n\
                    2005-01-01T00:00:02Z\tc\t2001MNRAS.321..559K\tFULLTEXT\n";
        let opts = ParseOptions {
            max_malformed_fraction: 0.5,
            ..Default::default()
        };
        let log = parse_events_str(text, &opts).unwrap();
        assert_eq!(log.events.len(), 2);
        assert_eq!(log.malformed_count(), 1);
        assert_eq!(log.malformed[0].line, 2);
    }

    #[test]
    fn too_many_malformed_names_first_line() {
        let text = "# header\n\
                    2005-01-01T00:00:00Z\ta\t2003ApJ...591.1220L\tABSTRACT\n\
                    garbage\n\
                    2005-01-01\tb\t2003ApJ...591.1220L\tABSTRACT\n";
        let err = parse_events_str(text, &ParseOptions::default()).unwrap_err();
        match err {
            LogError::TooManyMalformed {
                malformed,
                records,
                first_line,
                ..
            } => {
                assert_eq!((malformed, records, first_line), (2, 3, 3));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(Bibcode::new("1700ApJ...591.1220L").is_err());
        assert!(Bibcode::new("2003ApJ...591.1220LX").is_err());
        assert!(Bibcode::new("20x3ApJ...591.1220L").is_err());
        assert!(CookieId::new("").is_err());
        assert!(CookieId::new("a b").is_err());
        assert!("abstract".parse::<AccessType>().is_err());
        assert_eq!("PDF".parse::<AccessType>().unwrap(), AccessType::Other("PDF".into()));
        assert!("2005-03-14 09:26:53\tu\t2003ApJ...591.1220L\tABSTRACT"
            .parse::<AccessEvent>()
            .is_err());
        // CR line endings are not part of the format
        assert!("2005-03-14T09:26:53Z\tu\t2003ApJ...591.1220L\tABSTRACT\r"
            .parse::<AccessEvent>()
            .is_err());
    }

    #[test]
    fn filter_pads_and_validates() {
        let f = JournalFilter::new(["AJ", "MNRAS"]).unwrap();
        assert_eq!(f.tags().collect::<Vec<_>>(), ["AJ...", "MNRAS"]);
        assert!(JournalFilter::new(Vec::<&str>::new()).is_err());
        assert!(JournalFilter::new(["TOOLONG"]).is_err());
    }

    #[test]
    fn same_month_types_collapse() {
        let events = [
            ev("2005-01-03T10:00:00Z", "u1", P, "ABSTRACT"),
            ev("2005-01-20T10:00:00Z", "u1", P, "FULLTEXT"),
        ];
        let p = dedup_reads(&events, &JournalFilter::default(), DedupPeriod::Month, Exec::Sequential);
        assert_eq!(p[&CookieId::new("u1").unwrap()].total_reads, 1);
    }

    #[test]
    fn cross_month_rereads() {
        let events = [
            ev("2005-01-31T23:59:59Z", "u1", P, "ABSTRACT"),
            ev("2005-02-01T00:00:00Z", "u1", P, "ABSTRACT"),
        ];
        let u1 = CookieId::new("u1").unwrap();
        let month = dedup_reads(&events, &JournalFilter::default(), DedupPeriod::Month, Exec::Sequential);
        assert_eq!(month[&u1].total_reads, 2);
        assert_eq!(month[&u1].papers.len(), 1);
        assert_eq!(month[&u1].active_months(), 2);
        let full = dedup_reads(&events, &JournalFilter::default(), DedupPeriod::FullRange, Exec::Sequential);
        assert_eq!(full[&u1].total_reads, 1);
        assert_eq!(full[&u1].papers.len(), 1);
        assert_eq!(
            full[&u1].monthly_counts.keys().copied().collect::<Vec<_>>(),
            [YearMonth::new(2005, 1).unwrap()]
        );
    }

    #[test]
    fn off_filter_journal_dropped() {
        let events = [
            ev("2005-01-03T10:00:00Z", "u1", "2004Natur.427..123X", "ABSTRACT"),
            ev("2005-01-03T10:00:00Z", "u2", Q, "ABSTRACT"),
        ];
        let p = dedup_reads(&events, &JournalFilter::default(), DedupPeriod::Month, Exec::Sequential);
        assert_eq!(p.len(), 1);
        assert!(p.contains_key(&CookieId::new("u2").unwrap()));
    }

    #[test]
    fn year_month_roundtrip() {
        let m: YearMonth = "2005-12".parse().unwrap();
        assert_eq!(m.succ().to_string(), "2006-01");
        assert_eq!(m.months_through(m), 1);
        assert_eq!(YearMonth::new(2005, 1).unwrap().months_through(m), 12);
        assert!("2005-13".parse::<YearMonth>().is_err());
    }

    fn arb_events() -> impl Strategy<Value = Vec<AccessEvent>> {
        let users = ["a", "b", "c", "d"];
        let papers = [P, Q, "1999AJ....117.2308S", "2004Natur.427..123X", "2002A&A...391..195C"];
        proptest::collection::vec((0..4usize, 0..5usize, 1..=3u32, 1..=28u32, 0..2usize), 0..60).prop_map(
            move |v| {
                v.into_iter()
                    .map(|(u, p, m, d, k)| {
                        ev(
                            &format!("2005-{m:02}-{d:02}T12:00:00Z"),
                            users[u],
                            papers[p],
                            ["ABSTRACT", "FULLTEXT"][k],
                        )
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn permutation_and_duplication_invariant(events in arb_events(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let f = JournalFilter::default();
            for period in [DedupPeriod::Month, DedupPeriod::FullRange] {
                let base = dedup_reads(&events, &f, period, Exec::Sequential);

                let mut shuffled = events.clone();
                shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                prop_assert_eq!(&base, &dedup_reads(&shuffled, &f, period, Exec::Parallel));

                let mut doubled = events.clone();
                doubled.extend(events.iter().cloned());
                prop_assert_eq!(&base, &dedup_reads(&doubled, &f, period, Exec::Sequential));

                for p in base.values() {
                    prop_assert!(p.total_reads >= 1);
                    prop_assert_eq!(p.total_reads, p.monthly_counts.values().map(|&c| c as u64).sum::<u64>());
                    prop_assert!(p.papers.iter().all(|b| f.accepts(b)));
                    if period == DedupPeriod::Month {
                        prop_assert!(p.total_reads >= p.papers.len() as u64);
                    } else {
                        prop_assert_eq!(p.total_reads, p.papers.len() as u64);
                    }
                }
            }
        }
    }
}
