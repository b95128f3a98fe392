//! Spectrum of the normalized co-read matrix and the metrics derived from it.
//!
//! The normalized matrix `N = D^-1 R` is not symmetric, but it is similar to
//! `S = D^-1/2 R D^-1/2 = D^1/2 N D^-1/2`, which is. All eigenvalues are
//! therefore computed from `S`: they are real, `S` is positive semidefinite
//! (`S = (D^-1/2 A)(D^-1/2 A)^T` for the binary incidence `A`), and its
//! eigenvectors form an orthonormal basis.

use faer::Mat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coread::{build_coread, build_incidence, CoreadError, CoreadMatrices, CoreadOptions};
use crate::exec::Exec;
use crate::lanczos::{dense_symmetric, lanczos_top, EigenError, LanczosOptions};
use crate::matrix::DenseMatrix;
use crate::population::{PopulationError, Sample};

/// Relative tolerance on `sum(eigenvalues) == n_s`.
pub const TRACE_REL_TOL: f64 = 1e-8;
/// Smallest eigenvalue accepted as nonnegative.
pub const PSD_FLOOR: f64 = -1e-10;
/// Eigenpair residual bound, relative to the Frobenius norm of `S`.
pub const RESIDUAL_REL_TOL: f64 = 1e-7;
pub const ORTHONORMALITY_TOL: f64 = 1e-8;
/// Number of leading eigenpairs whose residuals are checked.
pub const CHECKED_PAIRS: usize = 10;
pub const MIN_AUTO_BINS: usize = 10;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Coread(#[from] CoreadError),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error("separation statistic is undefined for n_s < 3 (n_s = {0})")]
    TooFewForSeparation(usize),
    #[error("separation statistic is undefined: epsilon_2 equals epsilon_n (zero-width bulk)")]
    DegenerateBulk,
    #[error("{0} needs the full spectrum, but only the leading eigenvalues were computed")]
    IncompleteSpectrum(&'static str),
    #[error("spectral density needs at least 2 eigenvalues, got {0}")]
    TooFewEigenvalues(usize),
    #[error("bin count must be positive")]
    ZeroBins,
    #[error("scaling fit needs at least 3 points, got {0}")]
    InsufficientPoints(usize),
    #[error("scaling fit needs positive sample sizes and eigenvalues, got ({n_s}, {epsilon1})")]
    NonPositive { n_s: f64, epsilon1: f64 },
    #[error("scaling fit has duplicate sample size {0}")]
    DuplicateSize(f64),
    #[error("sweep sizes must be strictly ascending and at least 3; got {0:?}")]
    BadSweepSizes(Vec<usize>),
    #[error("sweep size {requested} exceeds the sample of {available} users")]
    SweepTooLarge { requested: usize, available: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    /// Above this many users only the leading `top_k` pairs are computed iteratively.
    pub dense_threshold: usize,
    pub top_k: usize,
    /// Compute eigenvectors on the dense path.
    pub vectors: bool,
    /// Start-vector seed for the iterative path.
    pub seed: u64,
    pub exec: Exec,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            dense_threshold: crate::coread::DEFAULT_DENSE_THRESHOLD,
            top_k: CHECKED_PAIRS,
            vectors: true,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSummary {
    n_s: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
    complete: bool,
}

impl SpectralSummary {
    /// A summary holding only a full set of eigenvalues (any order).
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        SpectralSummary {
            n_s: eigenvalues.len(),
            eigenvalues,
            eigenvectors: Vec::new(),
            complete: true,
        }
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    /// Descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn epsilon1(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Rank-ordered orthonormal eigenvectors of `S` that were computed.
    pub fn eigenvectors(&self) -> &[Vec<f64>] {
        &self.eigenvectors
    }

    /// Whether all `n_s` eigenvalues are present.
    pub fn is_complete(&self) -> bool {
        self.complete
    }
}

/// Dense `S = D^-1/2 R D^-1/2`; exactly symmetric with a unit diagonal.
pub fn symmetrized(m: &CoreadMatrices) -> DenseMatrix {
    let n = m.n();
    let d = m.degrees();
    let mut s = DenseMatrix::zeros(n, n);
    for k in 0..n {
        for &(l, r) in m.row(k) {
            let l = l as usize;
            if l < k {
                continue;
            }
            let v = if l == k {
                1.0
            } else {
                r as f64 / (d[k] as f64 * d[l] as f64).sqrt()
            };
            s.set(k, l, v);
            s.set(l, k, v);
        }
    }
    s
}

fn inv_sqrt_degrees(m: &CoreadMatrices) -> Vec<f64> {
    m.degrees().iter().map(|&d| 1.0 / (d as f64).sqrt()).collect()
}

/// `y = S x`, evaluated from the sparse co-read rows.
pub fn apply_symmetrized(m: &CoreadMatrices, x: &[f64], exec: Exec) -> Vec<f64> {
    let inv_sqrt = inv_sqrt_degrees(m);
    let scaled: Vec<f64> = x.iter().zip(&inv_sqrt).map(|(a, b)| a * b).collect();
    exec.map_range(m.n(), |k| {
        let acc: f64 = m.row(k).iter().map(|&(l, r)| r as f64 * scaled[l as usize]).sum();
        acc * inv_sqrt[k]
    })
}

/// Frobenius norm of `S`, from the sparse rows.
pub fn symmetrized_frobenius(m: &CoreadMatrices) -> f64 {
    let d = m.degrees();
    (0..m.n())
        .flat_map(|k| {
            m.row(k)
                .iter()
                .map(move |&(l, r)| (r as f64).powi(2) / (d[k] as f64 * d[l as usize] as f64))
        })
        .sum::<f64>()
        .sqrt()
}

/// Flip `v` so its largest-magnitude component (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn eigendecompose(m: &CoreadMatrices, opts: &EigenOptions) -> Result<SpectralSummary, SpectraError> {
    let n = m.n();
    if n == 0 {
        return Err(CoreadError::EmptySample.into());
    }
    if n <= opts.dense_threshold {
        let s = symmetrized(m);
        let a = Mat::<f64>::from_fn(n, n, |i, j| s.get(i, j));
        let (asc, vecs) = dense_symmetric(&a, opts.vectors, opts.exec.faer_par())?;
        let eigenvalues: Vec<f64> = asc.into_iter().rev().collect();
        let eigenvectors = vecs
            .map(|u| {
                (0..n)
                    .rev()
                    .map(|c| {
                        let mut v: Vec<f64> = u.col(c).iter().copied().collect();
                        fix_sign(&mut v);
                        v
                    })
                    .collect()
            })
            .unwrap_or_default();
        return Ok(SpectralSummary {
            n_s: n,
            eigenvalues,
            eigenvectors,
            complete: true,
        });
    }

    log::warn!(
        "n_s = {n} exceeds the dense threshold {}; computing only the leading {} eigenpairs, \
         so spectral density and the separation statistic are unavailable",
        opts.dense_threshold,
        opts.top_k
    );
    let res = lanczos_top(
        n,
        |x, y| y.copy_from_slice(&apply_symmetrized(m, x, opts.exec)),
        &LanczosOptions {
            k: opts.top_k,
            seed: opts.seed,
            ..Default::default()
        },
    )?;
    let eigenvectors = res
        .vectors
        .into_iter()
        .map(|mut v| {
            fix_sign(&mut v);
            v
        })
        .collect();
    Ok(SpectralSummary {
        n_s: n,
        eigenvalues: res.values,
        eigenvectors,
        complete: n == opts.top_k.min(n),
    })
}

/// Numerical health of a decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralChecks {
    /// `|sum(eigenvalues) - n_s| / n_s`; `None` for partial spectra.
    pub trace_relative_error: Option<f64>,
    pub min_eigenvalue: Option<f64>,
    /// `max |s_kl - s_lk|` of the dense symmetrized matrix.
    pub asymmetry: Option<f64>,
    /// Largest `|S u_i - e_i u_i| / |S|_F` over the leading pairs checked.
    pub max_residual_ratio: Option<f64>,
    /// Largest `|u_i . u_j - delta_ij|` over the leading pairs checked.
    pub orthonormality_error: Option<f64>,
}

impl SpectralChecks {
    pub fn passes(&self) -> bool {
        self.trace_relative_error.is_none_or(|e| e <= TRACE_REL_TOL)
            && self.min_eigenvalue.is_none_or(|e| e >= PSD_FLOOR)
            && self.asymmetry.is_none_or(|a| a == 0.0)
            && self.max_residual_ratio.is_none_or(|r| r <= RESIDUAL_REL_TOL)
            && self.orthonormality_error.is_none_or(|o| o <= ORTHONORMALITY_TOL)
    }
}

/// Check trace conservation, positive semidefiniteness and the leading
/// eigenpair residuals, recomputing `S u` from the sparse co-read rows.
pub fn verify_spectrum(m: &CoreadMatrices, s: &SpectralSummary, exec: Exec) -> SpectralChecks {
    let n = m.n();
    let (trace_relative_error, min_eigenvalue) = if s.complete {
        let trace: f64 = s.eigenvalues.iter().sum();
        (
            Some((trace - n as f64).abs() / n as f64),
            s.eigenvalues.last().copied(),
        )
    } else {
        (None, None)
    };
    let asymmetry = (n <= crate::coread::DEFAULT_DENSE_THRESHOLD).then(|| symmetrized(m).asymmetry());

    let pairs = s.eigenvectors.len().min(CHECKED_PAIRS);
    let (max_residual_ratio, orthonormality_error) = if pairs == 0 {
        (None, None)
    } else {
        let fro = symmetrized_frobenius(m);
        let residual = (0..pairs)
            .map(|i| {
                let u = &s.eigenvectors[i];
                let su = apply_symmetrized(m, u, exec);
                let r: f64 = su
                    .iter()
                    .zip(u)
                    .map(|(a, b)| (a - s.eigenvalues[i] * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                r / fro
            })
            .fold(0.0, f64::max);
        let mut ortho = 0.0f64;
        for i in 0..pairs {
            for j in i..pairs {
                let d: f64 = s.eigenvectors[i].iter().zip(&s.eigenvectors[j]).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                ortho = ortho.max((d - target).abs());
            }
        }
        (Some(residual), Some(ortho))
    };

    SpectralChecks {
        trace_relative_error,
        min_eigenvalue,
        asymmetry,
        max_residual_ratio,
        orthonormality_error,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bins {
    /// Freedman–Diaconis, at least [`MIN_AUTO_BINS`] and at most one bin per eigenvalue.
    Auto,
    Count(usize),
}

/// Normalized eigenvalue histogram: `sum(density_b * width_b) == 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub bin_edges: Vec<f64>,
    pub density: Vec<f64>,
    /// All eigenvalues were equal and a single narrow bin was used.
    pub degenerate: bool,
}

impl SpectralDensity {
    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }
}

/// Linear-interpolated quantile of ascending data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn freedman_diaconis_bins(values: &[f64]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let range = sorted[n - 1] - sorted[0];
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let h = 2.0 * iqr / (n as f64).cbrt();
    let raw = if h > 0.0 { (range / h).ceil() as usize } else { 0 };
    raw.clamp(MIN_AUTO_BINS, MIN_AUTO_BINS.max(n))
}

pub fn spectral_density(summary: &SpectralSummary, bins: Bins) -> Result<SpectralDensity, SpectraError> {
    if !summary.complete {
        return Err(SpectraError::IncompleteSpectrum("spectral density"));
    }
    let ev = &summary.eigenvalues;
    let n = ev.len();
    if n < 2 {
        return Err(SpectraError::TooFewEigenvalues(n));
    }
    let hi = ev[0];
    let lo = ev[n - 1];

    if hi == lo {
        log::warn!("all {n} eigenvalues equal {lo}; using a single degenerate bin");
        let half = hi.abs().max(1.0) * 4.0 * f64::EPSILON;
        let edges = vec![lo - half, hi + half];
        let width = edges[1] - edges[0];
        return Ok(SpectralDensity {
            bin_edges: edges,
            density: vec![1.0 / width],
            degenerate: true,
        });
    }

    let nb = match bins {
        Bins::Count(0) => return Err(SpectraError::ZeroBins),
        Bins::Count(b) => b,
        Bins::Auto => freedman_diaconis_bins(ev),
    };
    let span = hi - lo;
    let mut edges: Vec<f64> = (0..nb).map(|i| lo + span * i as f64 / nb as f64).collect();
    edges.push(hi);

    let mut counts = vec![0usize; nb];
    for &x in ev {
        let b = (((x - lo) / span) * nb as f64).floor() as usize;
        counts[b.min(nb - 1)] += 1;
    }
    let density = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (n as f64 * (w[1] - w[0])))
        .collect();
    Ok(SpectralDensity {
        bin_edges: edges,
        density,
        degenerate: false,
    })
}

/// `(e1 - e2) / (e2 - e_n)`: gap of the leading eigenvalue over the bulk width.
pub fn separation_statistic(summary: &SpectralSummary) -> Result<f64, SpectraError> {
    let n = summary.n_s;
    if n < 3 {
        return Err(SpectraError::TooFewForSeparation(n));
    }
    if !summary.complete {
        return Err(SpectraError::IncompleteSpectrum("separation statistic"));
    }
    let ev = &summary.eigenvalues;
    let (e1, e2, en) = (ev[0], ev[1], ev[n - 1]);
    let bulk = e2 - en;
    let scale = e1.abs().max(e2.abs()).max(en.abs()).max(f64::MIN_POSITIVE);
    if bulk <= 64.0 * f64::EPSILON * scale {
        return Err(SpectraError::DegenerateBulk);
    }
    Ok((e1 - e2) / bulk)
}

/// Power-law fit `epsilon1 = C * n_s^alpha` by least squares in log-log space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub points: Vec<(f64, f64)>,
    pub alpha: f64,
    /// Natural log of `C`.
    pub log_intercept: f64,
    pub r_squared: f64,
}

pub fn fit_alpha(points: &[(f64, f64)]) -> Result<ScalingFit, SpectraError> {
    if points.len() < 3 {
        return Err(SpectraError::InsufficientPoints(points.len()));
    }
    for (i, &(n_s, epsilon1)) in points.iter().enumerate() {
        if !(n_s > 0.0 && epsilon1 > 0.0) {
            return Err(SpectraError::NonPositive { n_s, epsilon1 });
        }
        if points[..i].iter().any(|p| p.0 == n_s) {
            return Err(SpectraError::DuplicateSize(n_s));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let alpha = sxy / sxx;
    let log_intercept = my - alpha * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (log_intercept + alpha * x)).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(ScalingFit {
        points: points.to_vec(),
        alpha,
        log_intercept,
        r_squared,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SweepOptions {
    pub coread: CoreadOptions,
    pub eigen: EigenOptions,
    /// Parallelism across sweep sizes.
    pub exec: Exec,
}

/// Decompose the top-`n` prefix of `sample` for each `n` in `sizes`.
pub fn nested_sweep(
    sample: &Sample,
    sizes: &[usize],
    opts: &SweepOptions,
) -> Result<Vec<SpectralSummary>, SpectraError> {
    if sizes.is_empty() || sizes[0] < 3 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpectraError::BadSweepSizes(sizes.to_vec()));
    }
    let largest = *sizes.last().expect("non-empty");
    if largest > sample.len() {
        return Err(SpectraError::SweepTooLarge {
            requested: largest,
            available: sample.len(),
        });
    }
    opts.exec
        .map(sizes, |&n| {
            let prefix = sample.prefix(n)?;
            let m = build_coread(&build_incidence(&prefix), &opts.coread)?;
            eigendecompose(&m, &opts.eigen)
        })
        .into_iter()
        .collect()
}
