//! Dense symmetric eigensolver glue and a matrix-free Lanczos iteration for
//! the leading eigenpairs of large symmetric operators.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self_adjoint_evd, self_adjoint_evd_scratch, ComputeEigenvectors, EvdError};
use faer::diag::Diag;
use faer::{Mat, Par};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EigenError {
    #[error("dense symmetric eigensolver did not converge ({n}x{n})")]
    DenseNoConvergence { n: usize },
    #[error(
        "Lanczos did not converge: Krylov dimension {krylov_dim}, worst residual {worst_residual:.3e} (tolerance {tol:.1e})"
    )]
    LanczosNoConvergence {
        krylov_dim: usize,
        worst_residual: f64,
        tol: f64,
    },
}

/// Ascending eigenvalues and, optionally, column eigenvectors of the
/// symmetric matrix read from the lower triangle of `a`.
pub(crate) fn dense_symmetric(
    a: &Mat<f64>,
    vectors: bool,
    par: Par,
) -> Result<(Vec<f64>, Option<Mat<f64>>), EigenError> {
    let n = a.nrows();
    let mut s = Diag::<f64>::zeros(n);
    let mut u = vectors.then(|| Mat::<f64>::zeros(n, n));
    let compute = if vectors {
        ComputeEigenvectors::Yes
    } else {
        ComputeEigenvectors::No
    };
    let mut buf = MemBuffer::new(self_adjoint_evd_scratch::<f64>(n, compute, par, Default::default()));
    self_adjoint_evd(
        a.as_ref(),
        s.as_mut(),
        u.as_mut().map(|m| m.as_mut()),
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| match e {
        EvdError::NoConvergence => EigenError::DenseNoConvergence { n },
    })?;
    Ok((s.column_vector().iter().copied().collect(), u))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LanczosOptions {
    /// Number of leading eigenpairs wanted.
    pub k: usize,
    /// Residual tolerance relative to the largest Ritz value.
    pub tol: f64,
    /// Krylov dimension cap.
    pub max_dim: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            k: 10,
            tol: 1e-10,
            max_dim: 600,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosResult {
    /// Descending.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub krylov_dim: usize,
    /// Estimated residual norm of each returned pair.
    pub residuals: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Classical Gram–Schmidt, applied twice.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, basis);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

struct Ritz {
    values: Vec<f64>,
    coeffs: Mat<f64>,
}

fn tridiagonal_ritz(alpha: &[f64], beta: &[f64]) -> Result<Ritz, EigenError> {
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let (values, vecs) = dense_symmetric(&t, true, Par::Seq)?;
    Ok(Ritz {
        values,
        coeffs: vecs.expect("requested"),
    })
}

/// Leading `k` eigenpairs of the symmetric operator `apply` (y = A x) on
/// vectors of length `n`, by Lanczos with full reorthogonalization.
pub fn lanczos_top<F>(n: usize, apply: F, opts: &LanczosOptions) -> Result<LanczosResult, EigenError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let k = opts.k.min(n);
    let max_dim = opts.max_dim.max(2 * k + 1).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut alpha: Vec<f64> = Vec::with_capacity(max_dim);
    // beta[j] couples basis[j] and basis[j + 1]
    let mut beta: Vec<f64> = Vec::with_capacity(max_dim);
    let mut w = vec![0.0; n];

    let Some(q0) = random_unit(n, &mut rng, &[]) else {
        return Ok(LanczosResult {
            values: vec![],
            vectors: vec![],
            krylov_dim: 0,
            residuals: vec![],
        });
    };
    basis.push(q0);

    let mut last_beta;
    let mut worst = f64::INFINITY;
    loop {
        let j = basis.len() - 1;
        apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        axpy(-a, &basis[j], &mut w);
        if j > 0 {
            axpy(-beta[j - 1], &basis[j - 1], &mut w);
        }
        orthogonalize(&mut w, &basis);
        alpha.push(a);
        let b = norm(&w);
        last_beta = b;

        let m = basis.len();
        let breakdown = b <= 1e-12 * alpha.iter().fold(1e-300f64, |s, v| s.max(v.abs()));
        let check = m >= k && (m == max_dim || m.is_multiple_of(10) || breakdown);
        if check {
            let ritz = tridiagonal_ritz(&alpha, &beta)?;
            let scale = ritz.values.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
            worst = (0..k)
                .map(|i| (b * ritz.coeffs[(m - 1, m - 1 - i)]).abs() / scale)
                .fold(0.0, f64::max);
            if worst <= opts.tol || m == max_dim {
                if worst > opts.tol && m < n {
                    return Err(EigenError::LanczosNoConvergence {
                        krylov_dim: m,
                        worst_residual: worst,
                        tol: opts.tol,
                    });
                }
                return Ok(assemble(&basis, &ritz, k, b, n));
            }
        }

        if m == max_dim {
            break;
        }
        let next = if breakdown {
            // invariant subspace found; continue in a fresh direction
            match random_unit(n, &mut rng, &basis) {
                Some(v) => {
                    beta.push(0.0);
                    v
                }
                None => break,
            }
        } else {
            beta.push(b);
            w.iter().map(|x| x / b).collect()
        };
        basis.push(next);
    }

    let ritz = tridiagonal_ritz(&alpha, &beta)?;
    let m = basis.len();
    if m < n && worst > opts.tol {
        return Err(EigenError::LanczosNoConvergence {
            krylov_dim: m,
            worst_residual: worst,
            tol: opts.tol,
        });
    }
    Ok(assemble(&basis, &ritz, k, last_beta, n))
}

fn assemble(basis: &[Vec<f64>], ritz: &Ritz, k: usize, beta_m: f64, n: usize) -> LanczosResult {
    let m = basis.len();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for i in 0..k {
        let col = m - 1 - i;
        values.push(ritz.values[col]);
        let mut x = vec![0.0; n];
        for (j, q) in basis.iter().enumerate() {
            axpy(ritz.coeffs[(j, col)], q, &mut x);
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        vectors.push(x);
        residuals.push((beta_m * ritz.coeffs[(m - 1, col)]).abs());
    }
    LanczosResult {
        values,
        vectors,
        krylov_dim: m,
        residuals,
    }
}
