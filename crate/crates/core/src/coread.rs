//! The user–paper incidence structure and the co-read matrices built from it.
//!
//! `r_kl` counts papers read by both user `k` and user `l`; its diagonal is
//! each user's distinct-paper count `d_k`. The normalized matrix divides row
//! `k` by `d_k`, so it has a unit diagonal and satisfies
//! `d_k * n_kl == d_l * n_lk`.
//!
//! User indices are 0-based in memory and 1-based in every exported file.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use thiserror::Error;

use crate::exec::Exec;
use crate::logstore::Bibcode;
use crate::matrix::DenseMatrix;
use crate::population::Sample;

pub const DEFAULT_DENSE_THRESHOLD: usize = 5000;
pub const BRUTE_FORCE_LIMIT: usize = 500;

#[derive(Debug, Error)]
pub enum CoreadError {
    #[error("sample is empty")]
    EmptySample,
    #[error("user index {0} has no reads; zero-degree users must be removed upstream")]
    ZeroDegree(usize),
    #[error("brute-force co-read oracle is limited to {limit} users, got {got}")]
    OracleTooLarge { got: usize, limit: usize },
    #[error("failed to write co-read matrix: {0}")]
    Io(#[from] std::io::Error),
}

/// Inverted index from papers to their readers within a sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Incidence {
    n_users: usize,
    papers: Vec<Bibcode>,
    paper_index: HashMap<Bibcode, usize>,
    reader_lists: Vec<Vec<u32>>,
    user_papers: Vec<Vec<u32>>,
    user_degrees: Vec<u32>,
}

impl Incidence {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_papers(&self) -> usize {
        self.papers.len()
    }

    /// Column index of a paper.
    pub fn paper_index(&self, b: &Bibcode) -> Option<usize> {
        self.paper_index.get(b).copied()
    }

    pub fn paper(&self, column: usize) -> &Bibcode {
        &self.papers[column]
    }

    /// Ascending user indices that read paper `column`.
    pub fn readers(&self, column: usize) -> &[u32] {
        &self.reader_lists[column]
    }

    pub fn reader_lists(&self) -> &[Vec<u32>] {
        &self.reader_lists
    }

    /// Ascending paper columns read by `user`.
    pub fn papers_of(&self, user: usize) -> &[u32] {
        &self.user_papers[user]
    }

    pub fn user_degrees(&self) -> &[u32] {
        &self.user_degrees
    }
}

pub fn build_incidence(sample: &Sample) -> Incidence {
    let papers: Vec<Bibcode> = sample
        .profiles()
        .iter()
        .flat_map(|p| p.papers.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let paper_index: HashMap<Bibcode, usize> =
        papers.iter().enumerate().map(|(i, b)| (b.clone(), i)).collect();

    let mut reader_lists = vec![Vec::new(); papers.len()];
    let mut user_papers = Vec::with_capacity(sample.len());
    for (u, profile) in sample.profiles().iter().enumerate() {
        // BTreeSet iteration keeps columns ascending
        let cols: Vec<u32> = profile.papers.iter().map(|b| paper_index[b] as u32).collect();
        for &c in &cols {
            reader_lists[c as usize].push(u as u32);
        }
        user_papers.push(cols);
    }
    let user_degrees = user_papers.iter().map(|c| c.len() as u32).collect();

    Incidence {
        n_users: sample.len(),
        papers,
        paper_index,
        reader_lists,
        user_papers,
        user_degrees,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoreadOptions {
    /// The normalized matrix is materialized densely only up to this many users.
    pub dense_threshold: usize,
    pub exec: Exec,
}

impl Default for CoreadOptions {
    fn default() -> Self {
        CoreadOptions {
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            exec: Exec::default(),
        }
    }
}

/// One stored entry of a sparse co-read row: (column, count).
pub type CoreadEntry = (u32, u32);

/// Co-read counts (sparse, both triangles stored) and the normalized matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreadMatrices {
    rows: Vec<Vec<CoreadEntry>>,
    degrees: Vec<u32>,
    normalized: Option<DenseMatrix>,
}

impl CoreadMatrices {
    fn from_rows(rows: Vec<Vec<CoreadEntry>>, dense_threshold: usize) -> Result<Self, CoreadError> {
        if rows.is_empty() {
            return Err(CoreadError::EmptySample);
        }
        let mut degrees = Vec::with_capacity(rows.len());
        for (k, row) in rows.iter().enumerate() {
            let d = row
                .binary_search_by_key(&(k as u32), |e| e.0)
                .map(|i| row[i].1)
                .unwrap_or(0);
            if d == 0 {
                return Err(CoreadError::ZeroDegree(k));
            }
            degrees.push(d);
        }
        let n = rows.len();
        let normalized = (n <= dense_threshold).then(|| {
            let mut m = DenseMatrix::zeros(n, n);
            for (k, row) in rows.iter().enumerate() {
                let d = degrees[k] as f64;
                for &(l, r) in row {
                    m.set(k, l as usize, r as f64 / d);
                }
            }
            m
        });
        Ok(CoreadMatrices {
            rows,
            degrees,
            normalized,
        })
    }

    /// Number of users.
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    /// Sparse row `k` of the co-read matrix, ascending by column.
    pub fn row(&self, k: usize) -> &[CoreadEntry] {
        &self.rows[k]
    }

    pub fn r(&self, k: usize, l: usize) -> u32 {
        let row = &self.rows[k];
        row.binary_search_by_key(&(l as u32), |e| e.0)
            .map(|i| row[i].1)
            .unwrap_or(0)
    }

    pub fn n_entry(&self, k: usize, l: usize) -> f64 {
        self.r(k, l) as f64 / self.degrees[k] as f64
    }

    /// Dense normalized matrix, when the sample was under the dense threshold.
    pub fn normalized(&self) -> Option<&DenseMatrix> {
        self.normalized.as_ref()
    }

    /// Row `k` of the normalized matrix, as a dense vector.
    pub fn normalized_row(&self, k: usize) -> Vec<f64> {
        if let Some(m) = &self.normalized {
            return m.row(k).to_vec();
        }
        let mut out = vec![0.0; self.n()];
        let d = self.degrees[k] as f64;
        for &(l, r) in &self.rows[k] {
            out[l as usize] = r as f64 / d;
        }
        out
    }

    /// Stored nonzeros, counting both triangles and the diagonal.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Dense copy of the integer co-read matrix.
    pub fn counts_dense(&self) -> Vec<Vec<u32>> {
        let n = self.n();
        self.rows
            .iter()
            .map(|row| {
                let mut v = vec![0; n];
                for &(l, r) in row {
                    v[l as usize] = r;
                }
                v
            })
            .collect()
    }

    /// Write `k l r_kl` lines (1-based, upper triangle with diagonal).
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<(), CoreadError> {
        for (k, row) in self.rows.iter().enumerate() {
            for &(l, r) in row.iter().filter(|e| e.0 as usize >= k) {
                writeln!(w, "{} {} {}", k + 1, l + 1, r)?;
            }
        }
        Ok(())
    }
}

const ROW_BLOCK: usize = 64;

/// Accumulate co-read counts over reader lists, one output row per user.
pub fn build_coread(inc: &Incidence, opts: &CoreadOptions) -> Result<CoreadMatrices, CoreadError> {
    let n = inc.n_users();
    if n == 0 {
        return Err(CoreadError::EmptySample);
    }
    let blocks = n.div_ceil(ROW_BLOCK);
    let rows: Vec<Vec<CoreadEntry>> = opts
        .exec
        .map_range(blocks, |b| {
            let mut acc = vec![0u32; n];
            let mut touched: Vec<u32> = Vec::new();
            let lo = b * ROW_BLOCK;
            let hi = (lo + ROW_BLOCK).min(n);
            (lo..hi)
                .map(|k| {
                    for &p in inc.papers_of(k) {
                        for &l in inc.readers(p as usize) {
                            let slot = &mut acc[l as usize];
                            if *slot == 0 {
                                touched.push(l);
                            }
                            *slot += 1;
                        }
                    }
                    touched.sort_unstable();
                    let row = touched
                        .iter()
                        .map(|&l| (l, std::mem::take(&mut acc[l as usize])))
                        .collect();
                    touched.clear();
                    row
                })
                .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect();
    CoreadMatrices::from_rows(rows, opts.dense_threshold)
}

/// Reference construction by pairwise set intersection. Quadratic in users;
/// refused above [`BRUTE_FORCE_LIMIT`].
pub fn brute_force_coread(sample: &Sample) -> Result<CoreadMatrices, CoreadError> {
    let n = sample.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(CoreadError::OracleTooLarge {
            got: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let sets: Vec<&BTreeSet<Bibcode>> = sample.profiles().iter().map(|p| &p.papers).collect();
    let mut dense = vec![vec![0u32; n]; n];
    for k in 0..n {
        for l in k..n {
            let c = sets[k].intersection(sets[l]).count() as u32;
            dense[k][l] = c;
            dense[l][k] = c;
        }
    }
    let rows = dense
        .into_iter()
        .map(|row| {
            row.into_iter()
                .enumerate()
                .filter(|&(_, c)| c > 0)
                .map(|(l, c)| (l as u32, c))
                .collect()
        })
        .collect();
    CoreadMatrices::from_rows(rows, usize::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logstore::{CookieId, ReadProfile};
    use proptest::prelude::*;

    pub(crate) fn bib(i: usize) -> Bibcode {
        Bibcode::new(format!("2005ApJ...{:03}.{:04}A", i / 1000 + 100, i % 1000)).unwrap()
    }

    pub(crate) fn sample_of(sets: &[&[usize]]) -> Sample {
        let profiles = sets
            .iter()
            .enumerate()
            .map(|(u, ps)| ReadProfile {
                cookie_id: CookieId::new(format!("u{u:04}")).unwrap(),
                papers: ps.iter().map(|&i| bib(i)).collect(),
                monthly_counts: Default::default(),
                // keep index order equal to input order
                total_reads: 1_000_000 - u as u64,
            })
            .collect();
        Sample::from_profiles(profiles)
    }

    fn opts() -> CoreadOptions {
        CoreadOptions::default()
    }

    #[test]
    fn single_user_incidence() {
        let inc = build_incidence(&sample_of(&[&[1, 2, 3]]));
        assert_eq!(inc.n_papers(), 3);
        assert!(inc.reader_lists().iter().all(|r| r == &[0]));
        assert_eq!(inc.user_degrees(), &[3]);
    }

    #[test]
    fn two_user_incidence() {
        // A:{p,q}, B:{q,r}
        let inc = build_incidence(&sample_of(&[&[0, 1], &[1, 2]]));
        let col = |i| inc.paper_index(&bib(i)).unwrap();
        assert_eq!(inc.readers(col(0)), &[0]);
        assert_eq!(inc.readers(col(1)), &[0, 1]);
        assert_eq!(inc.readers(col(2)), &[1]);
        assert_eq!(inc.user_degrees(), &[2, 2]);
    }

    #[test]
    fn duplicate_profiles_incidence() {
        let inc = build_incidence(&sample_of(&[&[1, 2, 3, 4, 5], &[1, 2, 3, 4, 5]]));
        assert_eq!(inc.n_papers(), 5);
        assert!(inc.reader_lists().iter().all(|r| r == &[0, 1]));
    }

    #[test]
    fn overlapping_pair() {
        let m = build_coread(&build_incidence(&sample_of(&[&[1, 2], &[2, 3]])), &opts()).unwrap();
        assert_eq!(m.counts_dense(), vec![vec![2, 1], vec![1, 2]]);
        let n = m.normalized().unwrap();
        assert_eq!(n, &DenseMatrix::from_rows(vec![vec![1.0, 0.5], vec![0.5, 1.0]]));
    }

    #[test]
    fn disjoint_pair() {
        let m = build_coread(&build_incidence(&sample_of(&[&[1, 2, 3], &[4, 5, 6, 7]])), &opts()).unwrap();
        assert_eq!(m.counts_dense(), vec![vec![3, 0], vec![0, 4]]);
        assert_eq!(
            m.normalized().unwrap(),
            &DenseMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]])
        );
    }

    #[test]
    fn oracle_single_user_and_guard() {
        let m = brute_force_coread(&sample_of(&[&[1, 2, 3, 4]])).unwrap();
        assert_eq!(m.counts_dense(), vec![vec![4]]);
        assert_eq!(m.normalized().unwrap().get(0, 0), 1.0);

        let big: Vec<Vec<usize>> = (0..501).map(|i| vec![i]).collect();
        let refs: Vec<&[usize]> = big.iter().map(Vec::as_slice).collect();
        assert!(matches!(
            brute_force_coread(&sample_of(&refs)),
            Err(CoreadError::OracleTooLarge { got: 501, .. })
        ));
    }

    #[test]
    fn zero_degree_rejected() {
        let s = sample_of(&[&[1], &[]]);
        assert!(matches!(
            build_coread(&build_incidence(&s), &opts()),
            Err(CoreadError::ZeroDegree(_))
        ));
    }

    #[test]
    fn sparse_normalized_rows_match_dense() {
        let s = sample_of(&[&[1, 2, 3], &[2, 3], &[3, 9]]);
        let inc = build_incidence(&s);
        let dense = build_coread(&inc, &opts()).unwrap();
        let sparse = build_coread(
            &inc,
            &CoreadOptions {
                dense_threshold: 1,
                ..opts()
            },
        )
        .unwrap();
        assert!(sparse.normalized().is_none());
        for k in 0..3 {
            assert_eq!(sparse.normalized_row(k), dense.normalized().unwrap().row(k));
        }
    }

    #[test]
    fn triplet_export() {
        let m = build_coread(&build_incidence(&sample_of(&[&[1, 2], &[2, 3]])), &opts()).unwrap();
        let mut out = Vec::new();
        m.write_triplets(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "1 1 2\n1 2 1\n2 2 2\n");
    }

    fn arb_sets() -> impl Strategy<Value = Vec<Vec<usize>>> {
        proptest::collection::vec(proptest::collection::btree_set(0usize..40, 1..12), 1..25)
            .prop_map(|v| v.into_iter().map(|s| s.into_iter().collect()).collect())
    }

    proptest! {
        #[test]
        fn matches_oracle_and_invariants(sets in arb_sets()) {
            let refs: Vec<&[usize]> = sets.iter().map(Vec::as_slice).collect();
            let s = sample_of(&refs);
            let fast = build_coread(&build_incidence(&s), &CoreadOptions { exec: Exec::Parallel, ..opts() }).unwrap();
            let seq = build_coread(&build_incidence(&s), &CoreadOptions { exec: Exec::Sequential, ..opts() }).unwrap();
            let slow = brute_force_coread(&s).unwrap();
            prop_assert_eq!(&fast, &seq);
            prop_assert_eq!(fast.counts_dense(), slow.counts_dense());
            prop_assert_eq!(fast.normalized().unwrap().max_abs_diff(slow.normalized().unwrap()), 0.0);

            let n = fast.n();
            let nm = fast.normalized().unwrap();
            for k in 0..n {
                prop_assert_eq!(nm.get(k, k), 1.0);
                prop_assert_eq!(fast.degrees()[k] as usize, s.profile(k).papers.len());
                for l in 0..n {
                    let (rkl, rlk) = (fast.r(k, l), fast.r(l, k));
                    prop_assert_eq!(rkl, rlk);
                    prop_assert!(rkl <= fast.r(k, k).min(fast.r(l, l)));
                    let v = nm.get(k, l);
                    prop_assert!((0.0..=1.0).contains(&v));
                    let dk = fast.degrees()[k] as f64;
                    let dl = fast.degrees()[l] as f64;
                    prop_assert!((dk * v - dl * nm.get(l, k)).abs() <= 1e-12 * dk.max(dl));
                }
            }
            let trace: f64 = (0..n).map(|k| nm.get(k, k)).sum();
            prop_assert_eq!(trace, n as f64);
        }

        #[test]
        fn adding_shared_paper_bumps_one_entry(sets in arb_sets(), a in 0usize..25, b in 0usize..25) {
            let n = sets.len();
            let (k, l) = (a % n, b % n);
            prop_assume!(k != l);
            let refs: Vec<&[usize]> = sets.iter().map(Vec::as_slice).collect();
            let before = build_coread(&build_incidence(&sample_of(&refs)), &opts()).unwrap().counts_dense();
            let mut grown = sets.clone();
            grown[k].push(1000);
            grown[l].push(1000);
            let refs: Vec<&[usize]> = grown.iter().map(Vec::as_slice).collect();
            let after = build_coread(&build_incidence(&sample_of(&refs)), &opts()).unwrap().counts_dense();
            for i in 0..n {
                for j in 0..n {
                    let delta = after[i][j] - before[i][j];
                    let expect = u32::from((i == k || i == l) && (j == k || j == l));
                    prop_assert_eq!(delta, expect);
                }
            }
        }
    }
}
