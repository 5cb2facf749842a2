//! Complex linear-algebra support: conditioned inversion, SVD-based ranks
//! and orthogonal complements, and eigenpairs of general (non-Hermitian)
//! complex matrices via the Schur form.
//!
//! Everything here operates on small dense matrices (antenna counts), so
//! robustness and determinism matter far more than asymptotic speed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{IacError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative conditioning floor below which a matrix is treated as singular.
pub const COND_FLOOR: f64 = 1e-10;

/// Relative singular-value threshold for numerical rank decisions.
pub const RANK_REL_TOL: f64 = 1e-8;

/// sigma_min / sigma_max of a matrix; zero for an all-zero matrix.
pub fn condition_ratio(m: &CMatrix) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    sv.min() / max
}

/// Inverts a square matrix, rejecting anything at or below the conditioning
/// floor so that downstream closed forms never silently amplify noise.
pub fn checked_inverse(m: &CMatrix, context: &str) -> Result<CMatrix> {
    let cond = condition_ratio(m);
    if cond < COND_FLOOR {
        return Err(IacError::SingularChannel {
            context: context.to_string(),
            cond,
        });
    }
    m.clone().try_inverse().ok_or(IacError::SingularChannel {
        context: context.to_string(),
        cond,
    })
}

/// Numerical rank by singular-value thresholding at `rel_tol * sigma_max`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Orthonormal basis of the orthogonal complement of the column span.
///
/// Returns `(basis, rank)` where `basis` is `nrows x (nrows - rank)` with
/// orthonormal columns. An empty input yields the canonical basis.
pub fn orthogonal_complement(m: &CMatrix, rel_tol: f64) -> (CMatrix, usize) {
    let n = m.nrows();
    if m.ncols() == 0 {
        return (CMatrix::identity(n, n), 0);
    }
    // Pad with zero columns so the left factor comes back square.
    let cols = m.ncols().max(n);
    let mut padded = CMatrix::zeros(n, cols);
    padded.view_mut((0, 0), (n, m.ncols())).copy_from(m);
    let svd = padded.svd(true, false);
    let u = svd.u.expect("svd requested u");
    let max = svd.singular_values.max();
    let rank = if max == 0.0 {
        0
    } else {
        svd.singular_values
            .iter()
            .filter(|&&s| s > rel_tol * max)
            .count()
    };
    (u.columns(rank, n - rank).into_owned(), rank)
}

/// A seeded random vector of unit Euclidean norm (complex Gaussian direction).
pub fn random_unit_vector<R: Rng>(rng: &mut R, dim: usize) -> CVector {
    loop {
        let v = CVector::from_fn(dim, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im)
        });
        let norm = v.norm();
        if norm > 1e-6 {
            return v / C64::new(norm, 0.0);
        }
    }
}

/// One eigenpair of a general complex matrix.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C64,
    /// Unit-norm eigenvector.
    pub vector: CVector,
    /// `||F v - lambda v||`, absolute.
    pub residual: f64,
}

/// Deterministic ordering used when one eigenpair has to be picked out of
/// `M`: descending modulus, ties broken by real part, then imaginary part.
fn eigenvalue_order(a: &C64, b: &C64) -> std::cmp::Ordering {
    b.norm()
        .partial_cmp(&a.norm())
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(
            b.re.partial_cmp(&a.re)
                .unwrap_or(std::cmp::Ordering::Equal),
        )
        .then(
            b.im.partial_cmp(&a.im)
                .unwrap_or(std::cmp::Ordering::Equal),
        )
}

/// All eigenpairs of a general square complex matrix, sorted by
/// [`eigenvalue_order`].
///
/// Works through the complex Schur form `F = Q T Q^H`: the eigenvalues sit
/// on the diagonal of the triangular factor and each eigenvector follows
/// from a triangular back-substitution mapped back through `Q`.
pub fn eigenpairs(f: &CMatrix) -> Result<Vec<EigenPair>> {
    let n = f.nrows();
    assert_eq!(n, f.ncols(), "eigenproblem requires a square matrix");
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = f
        .clone()
        .try_schur(f64::EPSILON, 100_000)
        .ok_or(IacError::DegenerateEigenproblem { residual: f64::NAN })?;
    let (q, t) = schur.unpack();

    let t_scale = t.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let floor = f64::EPSILON * t_scale.max(1.0) * n as f64;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eigenvalue_order(&t[(i, i)], &t[(j, j)]));

    let mut pairs = Vec::with_capacity(n);
    for idx in order {
        let lambda = t[(idx, idx)];
        // Solve (T - lambda I) y = 0 with y[idx] = 1 by back-substitution.
        let mut y = CVector::zeros(n);
        y[idx] = C64::new(1.0, 0.0);
        for j in (0..idx).rev() {
            let mut num = C64::new(0.0, 0.0);
            for m in (j + 1)..=idx {
                num += t[(j, m)] * y[m];
            }
            if num.norm() == 0.0 {
                continue;
            }
            let mut den = t[(j, j)] - lambda;
            if den.norm() < floor {
                den = C64::new(floor, 0.0);
            }
            y[j] = -num / den;
        }
        let mut v = &q * y;
        let norm = v.norm();
        if norm > 0.0 {
            v /= C64::new(norm, 0.0);
        }
        let residual = (f * &v - v.scale(1.0) * lambda).norm();
        pairs.push(EigenPair {
            value: lambda,
            vector: v,
            residual,
        });
    }
    Ok(pairs)
}
