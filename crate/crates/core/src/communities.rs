//! Eigenspace projection of co-read vectors and sphere probes that map a
//! neighborhood of users back to the papers they read.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coread::CoreadMatrices;
use crate::exec::Exec;
use crate::logstore::{Bibcode, CookieId};
use crate::population::Sample;
use crate::spectra::SpectralSummary;

/// Above this many points sphere queries go through a k-d tree.
pub const LINEAR_SCAN_LIMIT: usize = 100_000;

#[derive(Debug, Error)]
pub enum CommunityError {
    #[error("cannot project onto {k} components: only {available} eigenvectors available (n_s = {n_s})")]
    TooManyComponents { k: usize, available: usize, n_s: usize },
    #[error("projection needs at least one component")]
    ZeroComponents,
    #[error("co-read matrices ({matrices}) and spectrum ({spectrum}) disagree on n_s")]
    SizeMismatch { matrices: usize, spectrum: usize },
    #[error("center has dimension {got}, but the cloud has {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("radius must be a nonnegative number, got {0}")]
    Radius(f64),
    #[error("no users inside the sphere; try a larger radius")]
    EmptyNeighborhood,
    #[error("user index {0} is not in the sample")]
    UnknownUser(usize),
    #[error("user {user} lies at distance {distance} outside radius {radius}")]
    OutsideSphere { user: usize, distance: f64, radius: f64 },
    #[error("citation table line {line}: {reason}")]
    CitationFormat { line: usize, reason: String },
    #[error("failed to read citation table: {0}")]
    Io(#[from] std::io::Error),
}

/// Users as points in the space of the leading eigenvectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionCloud {
    k: usize,
    coords: Vec<f64>,
    users: Vec<CookieId>,
}

impl ProjectionCloud {
    /// Build a cloud from explicit coordinates (row per user).
    pub fn from_points(k: usize, points: Vec<Vec<f64>>, users: Vec<CookieId>) -> Self {
        assert_eq!(points.len(), users.len());
        assert!(points.iter().all(|p| p.len() == k));
        ProjectionCloud {
            k,
            coords: points.into_iter().flatten().collect(),
            users,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn point(&self, user: usize) -> &[f64] {
        &self.coords[user * self.k..(user + 1) * self.k]
    }

    pub fn users(&self) -> &[CookieId] {
        &self.users
    }

    pub fn distance(&self, user: usize, center: &[f64]) -> f64 {
        euclidean(self.point(user), center)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `c_u[i] = <row_u(N), u_i>` for the `k` leading orthonormal eigenvectors.
/// No mean-centering is applied.
pub fn project(
    m: &CoreadMatrices,
    summary: &SpectralSummary,
    sample: &Sample,
    k: usize,
    exec: Exec,
) -> Result<ProjectionCloud, CommunityError> {
    let n = m.n();
    if k == 0 {
        return Err(CommunityError::ZeroComponents);
    }
    if summary.n_s() != n || sample.len() != n {
        return Err(CommunityError::SizeMismatch {
            matrices: n,
            spectrum: summary.n_s(),
        });
    }
    let basis = summary.eigenvectors();
    if k > n || k > basis.len() {
        return Err(CommunityError::TooManyComponents {
            k,
            available: basis.len(),
            n_s: n,
        });
    }
    let basis = &basis[..k];
    let rows: Vec<Vec<f64>> = exec.map_range(n, |u| {
        let d = m.degrees()[u] as f64;
        basis
            .iter()
            .map(|e| m.row(u).iter().map(|&(l, r)| r as f64 / d * e[l as usize]).sum())
            .collect()
    });
    Ok(ProjectionCloud::from_points(k, rows, sample.users().to_vec()))
}

fn check_query(cloud: &ProjectionCloud, center: &[f64], radius: f64) -> Result<(), CommunityError> {
    if center.len() != cloud.k {
        return Err(CommunityError::Dimension {
            got: center.len(),
            expected: cloud.k,
        });
    }
    if radius.is_nan() || radius < 0.0 {
        return Err(CommunityError::Radius(radius));
    }
    Ok(())
}

fn sort_hits(hits: &mut [(f64, usize)]) -> Vec<usize> {
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    hits.iter().map(|h| h.1).collect()
}

/// Users within `radius` of `center` (boundary inclusive), nearest first,
/// ties by user index.
pub fn sphere_query(cloud: &ProjectionCloud, center: &[f64], radius: f64) -> Result<Vec<usize>, CommunityError> {
    if cloud.len() > LINEAR_SCAN_LIMIT {
        KdTree::build(cloud).within(center, radius)
    } else {
        sphere_query_linear(cloud, center, radius)
    }
}

pub fn sphere_query_linear(
    cloud: &ProjectionCloud,
    center: &[f64],
    radius: f64,
) -> Result<Vec<usize>, CommunityError> {
    check_query(cloud, center, radius)?;
    let mut hits: Vec<(f64, usize)> = (0..cloud.len())
        .map(|u| (cloud.distance(u, center), u))
        .filter(|&(d, _)| d <= radius)
        .collect();
    Ok(sort_hits(&mut hits))
}

#[derive(Debug)]
enum Node {
    Leaf(Vec<usize>),
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Static k-d tree over a projection cloud for fixed-radius queries.
#[derive(Debug)]
pub struct KdTree<'a> {
    cloud: &'a ProjectionCloud,
    root: Node,
}

const LEAF_SIZE: usize = 16;

impl<'a> KdTree<'a> {
    pub fn build(cloud: &'a ProjectionCloud) -> Self {
        let idx: Vec<usize> = (0..cloud.len()).collect();
        let root = Self::build_node(cloud, idx, 0);
        KdTree { cloud, root }
    }

    fn build_node(cloud: &ProjectionCloud, mut idx: Vec<usize>, depth: usize) -> Node {
        if idx.len() <= LEAF_SIZE || cloud.k == 0 {
            return Node::Leaf(idx);
        }
        let axis = depth % cloud.k;
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            cloud.point(a)[axis].total_cmp(&cloud.point(b)[axis]).then(a.cmp(&b))
        });
        let value = cloud.point(idx[mid])[axis];
        let right = idx.split_off(mid);
        Node::Split {
            axis,
            value,
            left: Box::new(Self::build_node(cloud, idx, depth + 1)),
            right: Box::new(Self::build_node(cloud, right, depth + 1)),
        }
    }

    pub fn within(&self, center: &[f64], radius: f64) -> Result<Vec<usize>, CommunityError> {
        check_query(self.cloud, center, radius)?;
        let mut hits = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            match node {
                Node::Leaf(ids) => {
                    for &u in ids {
                        let d = self.cloud.distance(u, center);
                        if d <= radius {
                            hits.push((d, u));
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    // left holds coordinates <= value, right holds >= value
                    let delta = center[*axis] - value;
                    if delta <= radius {
                        stack.push(left);
                    }
                    if -delta <= radius {
                        stack.push(right);
                    }
                }
            }
        }
        Ok(sort_hits(&mut hits))
    }
}

/// Citation counts per bibcode; unknown papers count zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationTable {
    counts: HashMap<Bibcode, u64>,
}

impl CitationTable {
    pub fn new(counts: impl IntoIterator<Item = (Bibcode, u64)>) -> Self {
        CitationTable {
            counts: counts.into_iter().collect(),
        }
    }

    pub fn get(&self, b: &Bibcode) -> u64 {
        self.counts.get(b).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Parse `bibcode<TAB>count` lines; `#` comments and blank lines are skipped.
    pub fn read<R: BufRead>(r: R) -> Result<Self, CommunityError> {
        let mut counts = HashMap::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| CommunityError::CitationFormat { line: i + 1, reason };
            let (b, c) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected bibcode<TAB>count".into()))?;
            let bib = Bibcode::new(b).map_err(|e| bad(e.to_string()))?;
            let count = c.parse::<u64>().map_err(|e| bad(format!("count {c:?}: {e}")))?;
            counts.insert(bib, count);
        }
        Ok(CitationTable { counts })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportPaper {
    pub bibcode: Bibcode,
    pub citations: u64,
    /// Neighborhood members who read the paper.
    pub readers: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityReport {
    pub center: Vec<f64>,
    pub radius: f64,
    pub members: Vec<CookieId>,
    pub papers: Vec<ReportPaper>,
    pub min_citations: u64,
}

/// Union of the members' papers, keeping those with at least
/// `min_citations`, most cited first (then most read, then bibcode).
pub fn community_report(
    cloud: &ProjectionCloud,
    center: &[f64],
    radius: f64,
    users: &[usize],
    sample: &Sample,
    citations: &CitationTable,
    min_citations: u64,
) -> Result<CommunityReport, CommunityError> {
    check_query(cloud, center, radius)?;
    if users.is_empty() {
        return Err(CommunityError::EmptyNeighborhood);
    }
    let mut readers: BTreeMap<&Bibcode, u32> = BTreeMap::new();
    let mut members = Vec::with_capacity(users.len());
    for &u in users {
        if u >= sample.len() || u >= cloud.len() {
            return Err(CommunityError::UnknownUser(u));
        }
        let distance = cloud.distance(u, center);
        if distance > radius {
            return Err(CommunityError::OutsideSphere { user: u, distance, radius });
        }
        members.push(sample.users()[u].clone());
        for b in &sample.profile(u).papers {
            *readers.entry(b).or_default() += 1;
        }
    }
    let mut papers: Vec<ReportPaper> = readers
        .into_iter()
        .map(|(b, r)| ReportPaper {
            bibcode: b.clone(),
            citations: citations.get(b),
            readers: r,
        })
        .filter(|p| p.citations >= min_citations)
        .collect();
    papers.sort_by(|a, b| {
        b.citations
            .cmp(&a.citations)
            .then(b.readers.cmp(&a.readers))
            .then_with(|| a.bibcode.cmp(&b.bibcode))
    });
    Ok(CommunityReport {
        center: center.to_vec(),
        radius,
        members,
        papers,
        min_citations,
    })
}
