//! Polynomial-invariant, median-based dissimilarity between density codes.
//!
//! The reference code `V` is mapped onto the target code `W` by the
//! least-squares optimal polynomial of degree `d` in `(x, y)`. The
//! dissimilarity is 100 times the median per-point residual divided by the
//! median distance of the target points to their centroid. It is
//! asymmetric: `delta(V, W) != delta(W, V)` in general.

use nalgebra::DMatrix;

use crate::encoder::DensityCode;
use crate::error::{Error, Result};

/// Exponent tuples with componentwise sum at most `degree`.
///
/// Tuples are grouped by total degree `k = 0..=d`; within a group the first
/// component ascends, recursively. For two dimensions and `d = 2` this is
/// `(0,0), (0,1), (1,0), (0,2), (1,1), (2,0)`. Component `i` is the power of
/// code coordinate `i`, so for codes `(x, y)` the tuple is `(px, py)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentSet {
    dim: usize,
    degree: u32,
    vectors: Vec<Vec<u32>>,
}

impl ExponentSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn vectors(&self) -> &[Vec<u32>] {
        &self.vectors
    }

    /// Number of monomials, `C(n + d, d)`.
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

pub fn all_powers(n: usize, d: u32) -> ExponentSet {
    assert!(n >= 1, "exponent tuples need at least one dimension");
    fn fixed_sum(n: usize, prefix: &mut Vec<u32>, rest: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n - 1 {
            let mut v = prefix.clone();
            v.push(rest);
            out.push(v);
            return;
        }
        for p in 0..=rest {
            prefix.push(p);
            fixed_sum(n, prefix, rest - p, out);
            prefix.pop();
        }
    }
    let mut vectors = Vec::new();
    for k in 0..=d {
        fixed_sum(n, &mut Vec::with_capacity(n), k, &mut vectors);
    }
    ExponentSet {
        dim: n,
        degree: d,
        vectors,
    }
}

/// Monomial basis: entry `(j, t)` is `prod_i code[j][i] ^ exps[t][i]`.
pub fn basis_matrix(code: &DensityCode, exps: &ExponentSet) -> Result<DMatrix<f64>> {
    if exps.dim() != code.dim() {
        return Err(Error::DimensionMismatch {
            expected: code.dim(),
            found: exps.dim(),
        });
    }
    let points = code.points();
    Ok(DMatrix::from_fn(points.len(), exps.len(), |j, t| {
        exps.vectors[t]
            .iter()
            .zip(points[j])
            .map(|(&e, c)| c.powi(e as i32))
            .product()
    }))
}

/// Minimum-norm least-squares solution of `B X = W` via the pseudo-inverse.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub solution: DMatrix<f64>,
    pub rank: usize,
}

/// Solve `min ||B X - W||_F` with the smallest-norm `X`.
///
/// Singular values below `max(m, q) * eps * sigma_max` are treated as zero.
pub fn least_squares_fit(b: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<LstsqSolution> {
    let (m, q) = b.shape();
    if w.nrows() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: w.nrows(),
        });
    }
    if m < q || q == 0 {
        return Err(Error::Underdetermined { rows: m, cols: q });
    }
    let svd = b.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    let tol = m.max(q) as f64 * f64::EPSILON * sigma_max;

    // X = V diag(1/s) U^T W over the retained singular triplets
    let mut utw = u.transpose() * w;
    let mut rank = 0;
    for (i, &s) in sigma.iter().enumerate() {
        if s > tol {
            utw.row_mut(i).scale_mut(1.0 / s);
            rank += 1;
        } else {
            utw.row_mut(i).fill(0.0);
        }
    }
    let solution = v_t.transpose() * utw;
    Ok(LstsqSolution { solution, rank })
}

/// Optimal degree-`d` polynomial map from one code onto another.
#[derive(Debug, Clone)]
pub struct TransformFit {
    pub degree: u32,
    pub exponents: ExponentSet,
    /// `q x 2` coefficient matrix; column `i` gives output coordinate `i`.
    pub coefficients: DMatrix<f64>,
    pub rank: usize,
}

impl TransformFit {
    /// Apply the fitted map to every point of a code.
    pub fn apply(&self, code: &DensityCode) -> Result<DMatrix<f64>> {
        Ok(basis_matrix(code, &self.exponents)? * &self.coefficients)
    }
}

fn code_matrix(code: &DensityCode) -> DMatrix<f64> {
    let pts = code.points();
    DMatrix::from_fn(pts.len(), 2, |j, i| pts[j][i])
}

/// Fit the polynomial map from `src` to `dst`, both already of equal length.
pub fn fit_polynomial(src: &DensityCode, dst: &DensityCode, degree: u32) -> Result<TransformFit> {
    let exponents = all_powers(2, degree);
    if src.len() < exponents.len() {
        return Err(Error::CodeTooShort {
            degree,
            points: src.len(),
            terms: exponents.len(),
        });
    }
    let b = basis_matrix(src, &exponents)?;
    let w = code_matrix(dst);
    let sol = least_squares_fit(&b, &w)?;
    Ok(TransformFit {
        degree,
        exponents,
        coefficients: sol.solution,
        rank: sol.rank,
    })
}

/// Median with the even-count convention of averaging the two central values.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

/// Median Euclidean distance of the points to their arithmetic mean.
pub fn target_scale(points: &[[f64; 2]]) -> f64 {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let dists: Vec<f64> = points
        .iter()
        .map(|p| (p[0] - cx).hypot(p[1] - cy))
        .collect();
    median(&dists)
}

#[derive(Debug, Clone)]
pub struct DissimilarityReport {
    pub delta: f64,
    /// Unnormalized per-point Euclidean errors.
    pub residuals: Vec<f64>,
    pub target_scale: f64,
    pub m_used: usize,
    pub degree: u32,
    /// Fitted map, absent for direct (`d = 0`) comparison.
    pub fit: Option<TransformFit>,
}

/// Dissimilarity of reference `v` against target `w` under degree-`d`
/// polynomial invariance. Both codes are cut to their common prefix.
/// `d = 0` compares points directly without fitting.
pub fn delta_median(v: &DensityCode, w: &DensityCode, degree: u32) -> Result<DissimilarityReport> {
    let m = v.len().min(w.len());
    if m == 0 {
        return Err(Error::NoPoints);
    }
    let v = v.truncated(m);
    let w = w.truncated(m);
    let target = w.points();

    let (residuals, fit): (Vec<f64>, _) = if degree == 0 {
        let r = v
            .points()
            .iter()
            .zip(target)
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
            .collect();
        (r, None)
    } else {
        let fit = fit_polynomial(&v, &w, degree)?;
        let mapped = fit.apply(&v)?;
        let r = target
            .iter()
            .enumerate()
            .map(|(j, b)| (mapped[(j, 0)] - b[0]).hypot(mapped[(j, 1)] - b[1]))
            .collect();
        (r, Some(fit))
    };

    let scale = target_scale(target);
    if !(scale > 0.0) {
        return Err(Error::DegenerateTargetScale);
    }
    let delta = 100.0 * median(&residuals) / scale;
    Ok(DissimilarityReport {
        delta,
        residuals,
        target_scale: scale,
        m_used: m,
        degree,
        fit,
    })
}
