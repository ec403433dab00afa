//! Dense complex linear algebra for the EDMD solve.
//!
//! The SVD comes from nalgebra. The non-Hermitian eigensolver is a plain
//! Householder-Hessenberg reduction followed by implicit single-shift QR and
//! back-substitution on the triangular Schur factor.

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Thin SVD restricted to singular values above `rtol · σ_max`.
#[derive(Debug, Clone)]
pub(crate) struct TruncatedSvd {
    /// N×r left singular vectors.
    pub u: CMatrix,
    /// Retained singular values, descending.
    pub s: Vec<f64>,
    /// D×r right singular vectors.
    pub v: CMatrix,
    /// All singular values, descending.
    pub all: Vec<f64>,
}

impl TruncatedSvd {
    #[cfg(test)]
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Minimum-norm least-squares solution of `A X = B`.
    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        let mut uh_b = self.u.adjoint() * b;
        for (i, s) in self.s.iter().enumerate() {
            let inv = 1.0 / s;
            uh_b.row_mut(i).iter_mut().for_each(|z| *z *= inv);
        }
        &self.v * uh_b
    }
}

pub(crate) fn truncated_svd(a: &CMatrix, rtol: f64) -> Result<TruncatedSvd> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("matrix contains non-finite entries".into()));
    }
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let (u, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested Vᵀ"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    let all: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = all.first().copied().unwrap_or(0.0);
    if !(sigma_max > 0.0) {
        return Err(Error::DegenerateData(
            "all singular values of the dictionary matrix are zero".into(),
        ));
    }
    let keep: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| svd.singular_values[i] > rtol * sigma_max)
        .collect();
    let u_r = CMatrix::from_fn(a.nrows(), keep.len(), |i, j| u[(i, keep[j])]);
    let v_r = CMatrix::from_fn(a.ncols(), keep.len(), |i, j| v_t[(keep[j], i)].conj());
    let s = keep.iter().map(|&i| svd.singular_values[i]).collect();
    Ok(TruncatedSvd { u: u_r, s, v: v_r, all })
}

/// Eigenvalues and (unnormalized, columnwise) eigenvectors of a square matrix.
#[derive(Debug, Clone)]
pub(crate) struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: CMatrix,
}

pub(crate) fn eig(a: &CMatrix) -> Result<Eigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eig needs a square matrix");
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("matrix contains non-finite entries".into()));
    }
    let (mut h, mut z) = hessenberg(a);
    schur_qr(&mut h, &mut z)?;
    let values: Vec<Complex64> = (0..n).map(|i| h[(i, i)]).collect();
    let y = triangular_eigenvectors(&h);
    Ok(Eigen { values, vectors: z * y })
}

/// Householder reduction `A = Q H Qᴴ` with `H` upper Hessenberg.
fn hessenberg(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let mut h = a.clone();
    let mut q = CMatrix::identity(n, n);
    for k in 0..n.saturating_sub(2) {
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let phase = if v[0].norm() == 0.0 { ONE } else { v[0] / v[0].norm() };
        let alpha = -phase * norm;
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vv == 0.0 {
            continue;
        }
        let beta = 2.0 / vv;
        for j in k..n {
            let s: Complex64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * h[(k + 1 + i, j)]).sum();
            let s = s * beta;
            for (i, vi) in v.iter().enumerate() {
                h[(k + 1 + i, j)] -= vi * s;
            }
        }
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let s: Complex64 = v.iter().enumerate().map(|(j, vj)| m[(i, k + 1 + j)] * vj).sum();
                let s = s * beta;
                for (j, vj) in v.iter().enumerate() {
                    m[(i, k + 1 + j)] -= s * vj.conj();
                }
            }
        }
        h[(k + 1, k)] = alpha;
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
    (h, q)
}

/// Rotation `G = [c s; −s̄ c]` with `G (x, y)ᵀ = (r, 0)ᵀ`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let (ax, ay) = (x.norm(), y.norm());
    if ay == 0.0 {
        return (1.0, ZERO);
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let r = ax.hypot(ay);
    (ax / r, (x / ax) * y.conj() / r)
}

/// Reduce upper Hessenberg `h` to upper triangular form in place, accumulating
/// the unitary transformations into `z`.
fn schur_qr(h: &mut CMatrix, z: &mut CMatrix) -> Result<()> {
    let n = h.nrows();
    if n < 2 {
        return Ok(());
    }
    let scale = h.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let max_iter = 100 * n;
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n - 1;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if s == 0.0 {
                s = scale;
            }
            if h[(l, l - 1)].norm() <= f64::EPSILON * s {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > max_iter {
            return Err(Error::Numerical(format!(
                "QR iteration did not converge after {max_iter} sweeps (block {l}..={hi})"
            )));
        }
        let shift = if since_deflation % 10 == 0 {
            h[(hi, hi)] + 0.75 * h[(hi, hi - 1)].norm()
        } else {
            wilkinson(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        let mut x = h[(l, l)] - shift;
        let mut y = h[(l + 1, l)];
        for k in l..hi {
            if k > l {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (c, s) = givens(x, y);
            for j in k.saturating_sub(1)..n {
                let (h1, h2) = (h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = c * h1 + s * h2;
                h[(k + 1, j)] = -s.conj() * h1 + c * h2;
            }
            let last = (k + 2).min(hi);
            for i in 0..=last {
                let (h1, h2) = (h[(i, k)], h[(i, k + 1)]);
                h[(i, k)] = c * h1 + s.conj() * h2;
                h[(i, k + 1)] = -s * h1 + c * h2;
            }
            for i in 0..n {
                let (z1, z2) = (z[(i, k)], z[(i, k + 1)]);
                z[(i, k)] = c * z1 + s.conj() * z2;
                z[(i, k + 1)] = -s * z1 + c * z2;
            }
            if k > l {
                h[(k + 1, k - 1)] = ZERO;
            }
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = ZERO;
        }
    }
    Ok(())
}

/// Eigenvalue of `[a b; c d]` closest to `d`.
fn wilkinson(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mean = (a + d) * 0.5;
    let (m1, m2) = (mean + disc, mean - disc);
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// Columns `y_k` with `T y_k = T_kk y_k`, `y_k[k] = 1`, `y_k[j] = 0` for `j > k`.
fn triangular_eigenvectors(t: &CMatrix) -> CMatrix {
    let n = t.nrows();
    let norm = t.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let smin = (f64::EPSILON * norm).max(f64::MIN_POSITIVE);
    let mut y = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        y[(k, k)] = ONE;
        for i in (0..k).rev() {
            let mut acc = ZERO;
            for j in i + 1..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < smin {
                denom = Complex64::new(smin, 0.0);
            }
            y[(i, k)] = -acc / denom;
        }
    }
    y
}

/// Frobenius norm.
pub(crate) fn fro(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
