//! Single-response partial least squares regression (PLS1), fitted by NIPALS.
//!
//! With one response variable the NIPALS weight vectors are closed-form per
//! component, so fitting is a short deflation loop: extract a unit weight
//! vector from the X–y covariance, project to scores, regress loadings, and
//! deflate. The fitted model collapses to a single affine predictor
//! `y_mean + (x - x_mean)·B`, with `B = W (PᵀW)⁻¹ q` recovered by
//! back-substitution on the upper-triangular `PᵀW`.

use ndarray::{Array1, ArrayView1, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Relative score-orthogonality bound expected from a well-posed NIPALS fit.
const ORTHOGONALITY_BOUND: f64 = 1e-8;

/// A fitted PLS1 regressor.
///
/// `weights`, `x_loadings` and `y_loadings` hold one entry per extracted
/// component and are retained for diagnostics and serialization; prediction
/// only needs `x_mean`, `y_mean` and `coefficients`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlsModel<F> {
    pub x_mean: Vec<F>,
    pub y_mean: F,
    /// Unit-norm projection weights, one vector per component.
    pub weights: Vec<Vec<F>>,
    /// X-space loadings, one vector per component.
    pub x_loadings: Vec<Vec<F>>,
    /// y-space loadings, one scalar per component.
    pub y_loadings: Vec<F>,
    /// Coefficients of the equivalent affine predictor.
    pub coefficients: Vec<F>,
    /// Components actually extracted (early stop may leave fewer than asked).
    pub components_used: usize,
    /// Largest |cosine| between distinct score vectors, measured at fit time;
    /// near zero for a numerically healthy fit.
    pub score_orthogonality: F,
}

/// Fit a PLS1 model on `x` (one sample per row) against targets `y`.
///
/// `x` and `y` are mean-centered; no variance scaling is applied. Component
/// extraction stops early when the remaining covariance `‖Xᵀy‖` drops below
/// `tol`; a request for more components than `min(m-1, n)` supports is
/// clamped with a warning. Zero covariance from the start is not an error:
/// the result has `components_used = 0` and predicts the constant `y_mean`.
pub fn pls_fit<F: Real>(
    x: ArrayView2<'_, F>,
    y: ArrayView1<'_, F>,
    components: usize,
    tol: F,
) -> Result<PlsModel<F>> {
    let (m, n) = x.dim();
    if m < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least 2 training samples, got {m}"
        )));
    }
    if y.len() != m {
        return Err(Error::DimMismatch {
            expected: m,
            got: y.len(),
        });
    }
    if components == 0 {
        return Err(Error::InvalidParam("components must be positive".into()));
    }
    if tol.is_nan() || tol < F::zero() {
        return Err(Error::InvalidParam("tol must be non-negative".into()));
    }

    let x_mean = x.mean_axis(Axis(0)).expect("m >= 2");
    let y_mean = y.sum() / real::<F>(m as f64);
    let mut xc = x.to_owned();
    xc -= &x_mean;
    let mut yc = y.to_owned();
    yc.mapv_inplace(|v| v - y_mean);

    // All-identical rows leave nothing to regress on.
    let x_scale = x.iter().fold(F::zero(), |acc, v| acc.max(v.abs()));
    let centered_scale = xc.iter().fold(F::zero(), |acc, v| acc.max(v.abs()));
    let degenerate_bound = F::epsilon() * x_scale.max(F::one()) * real::<F>(m as f64);
    if centered_scale <= degenerate_bound {
        return Err(Error::Degenerate(
            "all training rows are identical (zero variance after centering)".into(),
        ));
    }

    let limit = (m - 1).min(n);
    let components = if components > limit {
        log::warn!(
            "requested {components} components but only {limit} are extractable \
             from a {m}x{n} matrix; clamping"
        );
        limit
    } else {
        components
    };

    let mut weights: Vec<Vec<F>> = Vec::with_capacity(components);
    let mut x_loadings: Vec<Vec<F>> = Vec::with_capacity(components);
    let mut y_loadings: Vec<F> = Vec::with_capacity(components);
    let mut scores: Vec<Array1<F>> = Vec::with_capacity(components);

    for _ in 0..components {
        let mut w = xc.t().dot(&yc);
        let w_norm = w.dot(&w).sqrt();
        if w_norm < tol {
            break;
        }
        w.mapv_inplace(|v| v / w_norm);
        let t = xc.dot(&w);
        let tt = t.dot(&t);
        if tt < tol {
            break;
        }
        let p = xc.t().dot(&t).mapv(|v| v / tt);
        let q = yc.dot(&t) / tt;

        // Deflate both spaces before the next extraction.
        Zip::from(xc.rows_mut()).and(&t).for_each(|mut row, &ti| {
            row.zip_mut_with(&p, |e, &pj| *e -= ti * pj);
        });
        yc.zip_mut_with(&t, |v, &ti| *v -= q * ti);

        weights.push(w.to_vec());
        x_loadings.push(p.to_vec());
        y_loadings.push(q);
        scores.push(t);
    }

    let components_used = weights.len();
    let score_orthogonality = max_score_cosine(&scores);
    if score_orthogonality.to_f64_lossless() > ORTHOGONALITY_BOUND {
        log::warn!(
            "score vectors deviate from orthogonality by {:.3e}; \
             the input is likely ill-conditioned",
            score_orthogonality.to_f64_lossless()
        );
    }

    let coefficients = solve_coefficients(n, &weights, &x_loadings, &y_loadings);

    Ok(PlsModel {
        x_mean: x_mean.to_vec(),
        y_mean,
        weights,
        x_loadings,
        y_loadings,
        coefficients,
        components_used,
        score_orthogonality,
    })
}

/// Predict the scalar response for one feature vector.
pub fn pls_predict<F: Real>(model: &PlsModel<F>, x: &[F]) -> Result<F> {
    if x.len() != model.x_mean.len() {
        return Err(Error::DimMismatch {
            expected: model.x_mean.len(),
            got: x.len(),
        });
    }
    let mut acc = model.y_mean;
    for ((&xi, &mi), &bi) in x.iter().zip(&model.x_mean).zip(&model.coefficients) {
        acc += (xi - mi) * bi;
    }
    Ok(acc)
}

/// `B = W (PᵀW)⁻¹ q`, using back-substitution on the upper-triangular `PᵀW`.
fn solve_coefficients<F: Real>(
    n: usize,
    weights: &[Vec<F>],
    x_loadings: &[Vec<F>],
    y_loadings: &[F],
) -> Vec<F> {
    let c = weights.len();
    if c == 0 {
        return vec![F::zero(); n];
    }
    // ptw[i][j] = p_i · w_j; unit diagonal and zero below it by construction.
    let mut ptw = vec![vec![F::zero(); c]; c];
    for i in 0..c {
        for j in i..c {
            ptw[i][j] = dot(&x_loadings[i], &weights[j]);
        }
    }
    let mut z = vec![F::zero(); c];
    for i in (0..c).rev() {
        let mut acc = y_loadings[i];
        for j in i + 1..c {
            acc -= ptw[i][j] * z[j];
        }
        z[i] = acc / ptw[i][i];
    }
    let mut coefficients = vec![F::zero(); n];
    for (zj, w) in z.iter().zip(weights) {
        for (b, &wf) in coefficients.iter_mut().zip(w) {
            *b += *zj * wf;
        }
    }
    coefficients
}

fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Largest |cos| between distinct score vectors; zero when fewer than two.
fn max_score_cosine<F: Real>(scores: &[Array1<F>]) -> F {
    let mut worst = F::zero();
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            let ni = scores[i].dot(&scores[i]).sqrt();
            let nj = scores[j].dot(&scores[j]).sqrt();
            if ni > F::zero() && nj > F::zero() {
                let cos = (scores[i].dot(&scores[j]) / (ni * nj)).abs();
                worst = worst.max(cos);
            }
        }
    }
    worst
}
