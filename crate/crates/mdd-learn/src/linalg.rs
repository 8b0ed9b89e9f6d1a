//! Dense symmetric positive-definite solves, Gram and kernel matrices, and
//! the elementwise fast inverse-apply shortcut.
//!
//! Everything here is 64-bit and deterministic: reductions run in a fixed
//! order, so repeated calls on identical inputs are bitwise identical.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

/// Relative zero guard for [`fast_inverse_apply`]: entries of `b` with
/// `|b_k| <= FAST_APPLY_GUARD * max|b|` make the elementwise division
/// meaningless and trigger the exact-solve fallback signal.
pub const FAST_APPLY_GUARD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("regularization must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("kernel bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("shard must contain at least one sample")]
    EmptyBlock,
    #[error("fast-apply unavailable: |b[{index}]| under the zero guard, fall back to exact solve")]
    FastApplyUnavailable { index: usize },
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// Once built, solving `A x = rhs` costs one forward and one backward
/// substitution (`O(dim^2)` per right-hand side).
#[derive(Debug, Clone)]
pub struct SpdFactor {
    factor: Array2<f64>,
}

impl SpdFactor {
    pub fn dimension(&self) -> usize {
        self.factor.nrows()
    }

    /// The lower-triangular factor `L` with `L L^T = A`.
    pub fn factor(&self) -> ArrayView2<'_, f64> {
        self.factor.view()
    }

    /// Solve `A x = rhs` for a single right-hand side.
    pub fn solve(&self, rhs: ArrayView1<f64>) -> Result<Array1<f64>, LinalgError> {
        let n = self.dimension();
        if rhs.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        let l = &self.factor;
        // forward: L z = rhs
        let mut x = rhs.to_owned();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= l[[i, k]] * x[k];
            }
            x[i] = s / l[[i, i]];
        }
        // backward: L^T x = z
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= l[[k, i]] * x[k];
            }
            x[i] = s / l[[i, i]];
        }
        Ok(x)
    }

    /// Solve `A X = rhs` column by column.
    pub fn solve_matrix(&self, rhs: ArrayView2<f64>) -> Result<Array2<f64>, LinalgError> {
        let n = self.dimension();
        if rhs.nrows() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: rhs.nrows(),
            });
        }
        let mut out = Array2::zeros(rhs.raw_dim());
        for (j, col) in rhs.columns().into_iter().enumerate() {
            let x = self.solve(col)?;
            out.column_mut(j).assign(&x);
        }
        Ok(out)
    }
}

/// Cholesky-factorize a symmetric positive-definite matrix.
///
/// Only the lower triangle of `a` is read. A non-positive pivot reports the
/// offending index rather than producing NaNs downstream.
pub fn spd_factorize(a: ArrayView2<f64>) -> Result<SpdFactor, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(LinalgError::NotPositiveDefinite { pivot: i });
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(SpdFactor { factor: l })
}

/// Regularized Gram system for one shard of a linear least-squares problem.
///
/// `x` holds the shard's samples as columns (`d x n`). Returns
/// `A = (1/n) X X^T + lambda I_d` and `b = (1/n) X y`. With `lambda > 0` the
/// system is positive definite by construction.
pub fn linear_gram(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
) -> Result<(Array2<f64>, Array1<f64>), LinalgError> {
    if lambda <= 0.0 {
        return Err(LinalgError::NonPositiveLambda(lambda));
    }
    let n = x.ncols();
    if n == 0 {
        return Err(LinalgError::EmptyBlock);
    }
    if y.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let d = x.nrows();
    let inv_n = 1.0 / n as f64;
    let mut a = x.dot(&x.t());
    a.mapv_inplace(|v| v * inv_n);
    for i in 0..d {
        a[[i, i]] += lambda;
    }
    let mut b = x.dot(&y);
    b.mapv_inplace(|v| v * inv_n);
    Ok((a, b))
}

/// Kernel choice for RKHS models.
///
/// The Gaussian kernel is the working kernel; the plain dot product exists
/// only so kernel ridge regression can be cross-checked against its linear
/// counterpart.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelConfig {
    /// `K(x, x') = exp(-||x - x'||^2 / (2 sigma^2))`
    Gaussian { bandwidth: f64 },
    /// `K(x, x') = x^T x'`
    LinearDot,
}

impl KernelConfig {
    pub fn gaussian(bandwidth: f64) -> Result<Self, LinalgError> {
        if bandwidth <= 0.0 || !bandwidth.is_finite() {
            return Err(LinalgError::NonPositiveBandwidth(bandwidth));
        }
        Ok(KernelConfig::Gaussian { bandwidth })
    }

    pub fn bandwidth(&self) -> Option<f64> {
        match self {
            KernelConfig::Gaussian { bandwidth } => Some(*bandwidth),
            KernelConfig::LinearDot => None,
        }
    }
}

/// Kernel matrix between two sample blocks (rows are samples).
///
/// Entry `(p, q)` is `K(a_p, b_q)`. Squared distances are expanded as
/// `||a||^2 + ||b||^2 - 2 a.b` and clamped at zero so round-off can never
/// produce a kernel value above one. When both views alias the same block
/// the result is exactly symmetric with a unit diagonal.
pub fn kernel_matrix(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    cfg: &KernelConfig,
) -> Result<Array2<f64>, LinalgError> {
    if a.ncols() != b.ncols() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    match cfg {
        KernelConfig::Gaussian { bandwidth } => {
            if *bandwidth <= 0.0 {
                return Err(LinalgError::NonPositiveBandwidth(*bandwidth));
            }
            let scale = 1.0 / (2.0 * bandwidth * bandwidth);
            let sq_a: Vec<f64> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
            if same_block(&a, &b) {
                let n = a.nrows();
                let mut k = Array2::<f64>::zeros((n, n));
                for p in 0..n {
                    k[[p, p]] = 1.0;
                    for q in 0..p {
                        let d2 = (sq_a[p] + sq_a[q] - 2.0 * a.row(p).dot(&a.row(q))).max(0.0);
                        let v = (-d2 * scale).exp();
                        k[[p, q]] = v;
                        k[[q, p]] = v;
                    }
                }
                return Ok(k);
            }
            let sq_b: Vec<f64> = b.rows().into_iter().map(|r| r.dot(&r)).collect();
            let mut k = Array2::<f64>::zeros((a.nrows(), b.nrows()));
            for p in 0..a.nrows() {
                let ap = a.row(p);
                for q in 0..b.nrows() {
                    let d2 = (sq_a[p] + sq_b[q] - 2.0 * ap.dot(&b.row(q))).max(0.0);
                    k[[p, q]] = (-d2 * scale).exp();
                }
            }
            Ok(k)
        }
        KernelConfig::LinearDot => Ok(a.dot(&b.t())),
    }
}

fn same_block(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> bool {
    a.as_ptr() == b.as_ptr() && a.shape() == b.shape() && a.strides() == b.strides()
}

/// Elementwise inverse-apply shortcut: given `c = A^{-1} b`, approximate
/// `A^{-1} d` as `(d^T c) ./ b` in `O(l)` instead of a full solve.
///
/// By construction the result `r` satisfies `r^T b = l * (d^T c)` -- and in
/// general nothing stronger. For `l = 1` it coincides with the exact solve;
/// for `l >= 2` it is a heuristic that can be far from `A^{-1} d` (see the
/// divergence tests). Entries of `b` under the relative zero guard make the
/// division meaningless and yield [`LinalgError::FastApplyUnavailable`],
/// instructing the caller to fall back to an exact solve.
pub fn fast_inverse_apply(
    c: ArrayView1<f64>,
    b: ArrayView1<f64>,
    d: ArrayView1<f64>,
) -> Result<Array1<f64>, LinalgError> {
    let l = b.len();
    if c.len() != l {
        return Err(LinalgError::DimensionMismatch {
            expected: l,
            got: c.len(),
        });
    }
    if d.len() != l {
        return Err(LinalgError::DimensionMismatch {
            expected: l,
            got: d.len(),
        });
    }
    let b_max = b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let guard = FAST_APPLY_GUARD * b_max;
    if let Some(index) = b.iter().position(|v| v.abs() <= guard) {
        return Err(LinalgError::FastApplyUnavailable { index });
    }
    let s = d.dot(&c);
    Ok(b.mapv(|bk| s / bk))
}

/// Average of equally long vectors, folded in index order so the result is
/// reproducible bit for bit.
pub(crate) fn mean_vectors(vs: &[Array1<f64>]) -> Array1<f64> {
    assert!(!vs.is_empty());
    let mut acc = Array1::<f64>::zeros(vs[0].len());
    for v in vs {
        acc += v;
    }
    acc / vs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        // M^T M / n + I keeps the spectrum comfortably positive.
        let m = Array2::from_shape_fn((n, n), |_| rng.random::<f64>() * 2.0 - 1.0);
        let mut a = m.t().dot(&m);
        a.mapv_inplace(|v| v / n as f64);
        for i in 0..n {
            a[[i, i]] += 1.0;
        }
        a
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
        Array1::from_shape_fn(n, |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    /// Brute-force Gaussian elimination with partial pivoting; the oracle for
    /// the factored solve.
    fn gauss_solve(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
        let n = a.nrows();
        let mut m = a.clone();
        let mut x = b.clone();
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if m[[r, col]].abs() > m[[piv, col]].abs() {
                    piv = r;
                }
            }
            if piv != col {
                for c in 0..n {
                    m.swap([col, c], [piv, c]);
                }
                x.swap(col, piv);
            }
            for r in col + 1..n {
                let f = m[[r, col]] / m[[col, col]];
                for c in col..n {
                    m[[r, c]] -= f * m[[col, c]];
                }
                x[r] -= f * x[col];
            }
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for c in r + 1..n {
                s -= m[[r, c]] * x[c];
            }
            x[r] = s / m[[r, r]];
        }
        x
    }

    #[test]
    fn factorize_scalar() {
        let f = spd_factorize(array![[4.0]].view()).unwrap();
        assert_eq!(f.factor()[[0, 0]], 2.0);
    }

    #[test]
    fn factorize_identity() {
        let eye = Array2::<f64>::eye(3);
        let f = spd_factorize(eye.view()).unwrap();
        assert_eq!(f.factor(), eye);
    }

    #[test]
    fn factorize_rejects_indefinite() {
        let a = array![[1.0, 0.0], [0.0, -2.0]];
        match spd_factorize(a.view()) {
            Err(LinalgError::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected pivot failure, got {other:?}"),
        }
    }

    #[test]
    fn factor_reconstructs_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_spd(6, &mut rng);
            let f = spd_factorize(a.view()).unwrap();
            let l = f.factor();
            let rebuilt = l.dot(&l.t());
            let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for (x, y) in rebuilt.iter().zip(a.iter()) {
                assert!((x - y).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn solve_diagonal() {
        let f = spd_factorize((Array2::eye(2) * 2.0).view()).unwrap();
        let x = f.solve(array![2.0, 4.0].view()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);
        assert!((x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn solve_zero_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_spd(5, &mut rng);
        let f = spd_factorize(a.view()).unwrap();
        let x = f.solve(Array1::zeros(5).view()).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn solve_matches_gaussian_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_spd(10, &mut rng);
        let b = random_vec(10, &mut rng);
        let x = spd_factorize(a.view()).unwrap().solve(b.view()).unwrap();
        let oracle = gauss_solve(&a, &b);
        for (u, v) in x.iter().zip(oracle.iter()) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn solve_matches_explicit_inverse() {
        // inverse assembled column-by-column by the elimination oracle
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(8, &mut rng);
        let b = random_vec(8, &mut rng);
        let mut inv = Array2::<f64>::zeros((8, 8));
        for j in 0..8 {
            let mut e = Array1::<f64>::zeros(8);
            e[j] = 1.0;
            inv.column_mut(j).assign(&gauss_solve(&a, &e));
        }
        let x = spd_factorize(a.view()).unwrap().solve(b.view()).unwrap();
        let expect = inv.dot(&b);
        for (u, v) in x.iter().zip(expect.iter()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn solve_residual_bound_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..100 {
            let n = 2 + (trial % 12);
            let a = random_spd(n, &mut rng);
            let b = random_vec(n, &mut rng);
            let x = spd_factorize(a.view()).unwrap().solve(b.view()).unwrap();
            let r = a.dot(&x) - &b;
            let rhs_inf = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let res_inf = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!(res_inf <= 1e-8 * (1.0 + rhs_inf));
        }
    }

    #[test]
    fn solve_rejects_wrong_length() {
        let f = spd_factorize(Array2::eye(3).view()).unwrap();
        assert!(matches!(
            f.solve(array![1.0, 2.0].view()),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gram_single_sample() {
        let (a, b) = linear_gram(array![[1.0]].view(), array![1.0].view(), 1.0).unwrap();
        assert_eq!(a, array![[2.0]]);
        assert_eq!(b, array![1.0]);
    }

    #[test]
    fn gram_two_unit_samples() {
        // columns e1, e2: A = (1/2) I + 0.5 I = I
        let x = Array2::<f64>::eye(2);
        let (a, b) = linear_gram(x.view(), array![1.0, 2.0].view(), 0.5).unwrap();
        assert_eq!(a, Array2::<f64>::eye(2));
        assert_eq!(b, array![0.5, 1.0]);
    }

    #[test]
    fn gram_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((3, 5), |_| rng.random::<f64>() * 2.0 - 1.0);
        let y = random_vec(5, &mut rng);
        let lambda = 0.3;
        let (a, b) = linear_gram(x.view(), y.view(), lambda).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..5 {
                    s += x[[i, k]] * x[[j, k]];
                }
                s /= 5.0;
                if i == j {
                    s += lambda;
                }
                assert!((a[[i, j]] - s).abs() < 1e-12);
            }
            let mut s = 0.0;
            for k in 0..5 {
                s += x[[i, k]] * y[k];
            }
            assert!((b[i] - s / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_rejects_nonpositive_lambda() {
        assert!(matches!(
            linear_gram(array![[1.0]].view(), array![1.0].view(), 0.0),
            Err(LinalgError::NonPositiveLambda(_))
        ));
    }

    #[test]
    fn kernel_zero_distance_is_one() {
        let a = array![[0.3, -1.2]];
        let cfg = KernelConfig::gaussian(0.7).unwrap();
        let k = kernel_matrix(a.view(), a.view(), &cfg).unwrap();
        assert_eq!(k[[0, 0]], 1.0);
    }

    #[test]
    fn kernel_at_two_sigma_squared() {
        // ||x - x'||^2 = 2 sigma^2  =>  entry e^{-1}
        let sigma = 1.3_f64;
        let gap = (2.0 * sigma * sigma).sqrt();
        let a = array![[0.0]];
        let b = array![[gap]];
        let cfg = KernelConfig::gaussian(sigma).unwrap();
        let k = kernel_matrix(a.view(), b.view(), &cfg).unwrap();
        assert!((k[[0, 0]] - (-1.0_f64).exp()).abs() < 1e-12);
        assert!((k[[0, 0]] - 0.3678794412).abs() < 1e-9);
    }

    #[test]
    fn kernel_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = Array2::from_shape_fn((4, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
        let b = Array2::from_shape_fn((3, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
        let sigma = 0.9;
        let cfg = KernelConfig::gaussian(sigma).unwrap();
        let k = kernel_matrix(a.view(), b.view(), &cfg).unwrap();
        for p in 0..4 {
            for q in 0..3 {
                let mut d2 = 0.0;
                for c in 0..3 {
                    let diff = a[[p, c]] - b[[q, c]];
                    d2 += diff * diff;
                }
                let expect = (-d2 / (2.0 * sigma * sigma)).exp();
                assert!((k[[p, q]] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn kernel_rejects_bad_bandwidth() {
        assert!(KernelConfig::gaussian(0.0).is_err());
        assert!(KernelConfig::gaussian(-1.0).is_err());
    }

    #[test]
    fn kernel_self_block_is_symmetric_unit_diagonal_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let a = Array2::from_shape_fn((10, 4), |_| rng.random::<f64>() * 2.0 - 1.0);
            let cfg = KernelConfig::gaussian(1.1).unwrap();
            let k = kernel_matrix(a.view(), a.view(), &cfg).unwrap();
            for p in 0..10 {
                assert_eq!(k[[p, p]], 1.0);
                for q in 0..10 {
                    assert_eq!(k[[p, q]], k[[q, p]]);
                    assert!(k[[p, q]] > 0.0 && k[[p, q]] <= 1.0);
                }
            }
            let min_eig = jacobi_min_eigenvalue(&k);
            assert!(min_eig >= -1e-8, "smallest eigenvalue {min_eig}");
        }
    }

    /// Cyclic Jacobi eigenvalue iteration, test-only PSD certificate.
    fn jacobi_min_eigenvalue(a: &Array2<f64>) -> f64 {
        let n = a.nrows();
        let mut m = a.clone();
        for _ in 0..60 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += m[[p, q]] * m[[p, q]];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if m[[p, q]].abs() < 1e-18 {
                        continue;
                    }
                    let theta = 0.5 * (2.0 * m[[p, q]]).atan2(m[[q, q]] - m[[p, p]]);
                    let (s, c) = theta.sin_cos();
                    for k in 0..n {
                        let (mp, mq) = (m[[p, k]], m[[q, k]]);
                        m[[p, k]] = c * mp - s * mq;
                        m[[q, k]] = s * mp + c * mq;
                    }
                    for k in 0..n {
                        let (mp, mq) = (m[[k, p]], m[[k, q]]);
                        m[[k, p]] = c * mp - s * mq;
                        m[[k, q]] = s * mp + c * mq;
                    }
                }
            }
        }
        (0..n).map(|i| m[[i, i]]).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn fast_apply_direct_formula() {
        let r = fast_inverse_apply(
            array![1.0, 2.0].view(),
            array![2.0, 4.0].view(),
            array![1.0, 1.0].view(),
        )
        .unwrap();
        assert_eq!(r, array![1.5, 0.75]);
        // r^T b = l * (d^T c)
        assert_eq!(r.dot(&array![2.0, 4.0]), 6.0);
    }

    #[test]
    fn fast_apply_zero_d() {
        let r = fast_inverse_apply(
            array![1.0, -3.0].view(),
            array![2.0, 4.0].view(),
            array![0.0, 0.0].view(),
        )
        .unwrap();
        assert!(r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fast_apply_identity_holds_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let l = 1 + rng.random_range(0..20);
            let c = random_vec(l, &mut rng);
            let b = Array1::from_shape_fn(l, |_| {
                // keep entries away from the zero guard
                let v: f64 = rng.random::<f64>() * 2.0 - 1.0;
                v + v.signum() * 0.1
            });
            let d = random_vec(l, &mut rng);
            let r = fast_inverse_apply(c.view(), b.view(), d.view()).unwrap();
            let lhs = r.dot(&b);
            let rhs = l as f64 * d.dot(&c);
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn fast_apply_signals_zero_guard() {
        let c = array![1.0, 1.0];
        let b = array![1.0, 1e-15];
        let d = array![1.0, 1.0];
        match fast_inverse_apply(c.view(), b.view(), d.view()) {
            Err(LinalgError::FastApplyUnavailable { index }) => assert_eq!(index, 1),
            other => panic!("expected guard signal, got {other:?}"),
        }
    }

    #[test]
    fn fast_apply_is_not_an_inverse_in_general() {
        // Mandatory divergence check: with c = A^{-1} b the shortcut must
        // disagree with the true A^{-1} d on generic SPD systems.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut far = 0;
        for _ in 0..100 {
            let l = 3 + rng.random_range(0..8);
            let a = random_spd(l, &mut rng);
            let b = random_vec(l, &mut rng);
            let d = random_vec(l, &mut rng);
            let c = gauss_solve(&a, &b);
            let truth = gauss_solve(&a, &d);
            let r = match fast_inverse_apply(c.view(), b.view(), d.view()) {
                Ok(r) => r,
                Err(_) => continue,
            };
            let num = (&r - &truth).mapv(|v| v * v).sum().sqrt();
            let den = truth.mapv(|v| v * v).sum().sqrt();
            if num / den > 0.1 {
                far += 1;
            }
        }
        assert!(far >= 95, "only {far}/100 instances diverged");
    }

    #[test]
    fn fast_apply_exact_in_one_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = rng.random::<f64>() + 0.5;
            let b = rng.random::<f64>() + 0.5;
            let d = rng.random::<f64>() * 2.0 - 1.0;
            let c = b / a;
            let r = fast_inverse_apply(
                array![c].view(),
                array![b].view(),
                array![d].view(),
            )
            .unwrap();
            assert!((r[0] - d / a).abs() <= 1e-12 * (1.0 + (d / a).abs()));
        }
    }
}
