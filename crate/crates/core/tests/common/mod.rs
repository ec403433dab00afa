//! Shared fixtures and reference computations for the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use koopman_delay::dynamics::{sample_invariant, MapSystem, SampleMode, INVERSE_GOLDEN_MEAN};
use koopman_delay::edmd::{
    fit_koopman, ApproximationExport, Dictionary, DictionarySpec, KoopmanApproximation, MatrixExport, DEFAULT_SVD_RTOL,
};
use koopman_delay::embedding::{embedded_snapshots, original_snapshots, EmbeddingMap};
use koopman_delay::observables::{Domain, FourierTerm, Observable};
use koopman_delay::{CMatrix, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TAU: f64 = std::f64::consts::TAU;
pub const GOLDEN: f64 = INVERSE_GOLDEN_MEAN;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_matrix(n: usize, m: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(n, m, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_point_in_square(rng: &mut ChaCha8Rng) -> Complex64 {
    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `cos 2πx + ½ cos 4πx`.
pub fn headline_observable() -> Observable {
    Observable::fourier(
        Domain::Original,
        vec![
            FourierTerm::new(vec![1], 0.5),
            FourierTerm::new(vec![-1], 0.5),
            FourierTerm::new(vec![2], 0.25),
            FourierTerm::new(vec![-2], 0.25),
        ],
    )
    .unwrap()
}

/// `cos 2πx + ½ sin 4πx`, whose 3-delay map is injective.
pub fn generic_observable() -> Observable {
    Observable::fourier(
        Domain::Original,
        vec![
            FourierTerm::new(vec![1], 0.5),
            FourierTerm::new(vec![-1], 0.5),
            FourierTerm::new(vec![2], c(0.0, -0.25)),
            FourierTerm::new(vec![-2], c(0.0, 0.25)),
        ],
    )
    .unwrap()
}

/// Three real delay observables valid on a torus of dimension `dim`.
pub fn delay_observables(dim: usize) -> Vec<Observable> {
    let mut k1 = vec![0i64; dim];
    k1[0] = 1;
    let mut k2 = vec![0i64; dim];
    k2[dim - 1] = 2;
    let neg = |k: &[i64]| k.iter().map(|v| -v).collect::<Vec<_>>();
    let cos = Observable::fourier(Domain::Original, vec![FourierTerm::new(k1.clone(), 0.5), FourierTerm::new(neg(&k1), 0.5)]).unwrap();
    let mixed = Observable::fourier(
        Domain::Original,
        vec![
            FourierTerm::new(k1.clone(), 0.5),
            FourierTerm::new(neg(&k1), 0.5),
            FourierTerm::new(k2.clone(), c(0.0, -0.25)),
            FourierTerm::new(neg(&k2), c(0.0, 0.25)),
        ],
    )
    .unwrap();
    let proj = Observable::projection(Domain::Original, 0);
    vec![cos, mixed, proj]
}

/// Random mix of Fourier modes and a monomial on the embedded space.
pub fn random_embedded_observable(seed: u64, d: usize) -> Observable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for _ in 0..3 {
        let k: Vec<i64> = (0..d).map(|_| rng.random_range(-2..=2)).collect();
        terms.push(FourierTerm::new(k, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
    }
    let fourier = Observable::fourier(Domain::Embedded, terms).unwrap();
    let exps: Vec<u32> = (0..d).map(|_| rng.random_range(0..3)).collect();
    let mono = Observable::monomial(Domain::Embedded, exps).unwrap();
    Observable::linear_combination(vec![(c(1.0, 0.0), fourier), (c(rng.random_range(-1.0..1.0), 0.5), mono)]).unwrap()
}

/// A [`KoopmanApproximation`] whose matrix is exactly `k` (identity Gram,
/// full retained subspace), for testing the eigendecomposition on its own.
pub fn approximation_with_matrix(k: &CMatrix) -> KoopmanApproximation {
    let n = k.nrows();
    let dict = Dictionary::monomial(Domain::Original, 1, n as u32 - 1).unwrap();
    let id = CMatrix::identity(n, n);
    KoopmanApproximation::import(ApproximationExport {
        dictionary: dict.descriptor().clone(),
        svd_rtol: DEFAULT_SVD_RTOL,
        svd_rank: n,
        residual: 0.0,
        unitarity_residual: 0.0,
        singular_values: vec![1.0; n],
        k_matrix: MatrixExport::from(k),
        gram: MatrixExport::from(&id),
        retained_subspace: MatrixExport::from(&id),
        eigenvalues: None,
        right_eigenvectors: None,
    })
    .unwrap()
}

/// Roots of `det(λI − A)`: Faddeev–LeVerrier coefficients, then
/// Durand–Kerner iteration.
pub fn charpoly_roots(a: &CMatrix) -> Vec<Complex64> {
    let n = a.nrows();
    let mut coeffs = vec![c(0.0, 0.0); n + 1];
    coeffs[n] = c(1.0, 0.0);
    let id = CMatrix::identity(n, n);
    let mut m = CMatrix::zeros(n, n);
    for k in 1..=n {
        m = a * &m + &id * coeffs[n - k + 1];
        let am = a * &m;
        let trace: Complex64 = (0..n).map(|i| am[(i, i)]).sum();
        coeffs[n - k] = -trace / k as f64;
    }
    let p = |z: Complex64| coeffs.iter().rev().fold(c(0.0, 0.0), |acc, ci| acc * z + ci);
    let mut roots: Vec<Complex64> = (0..n).map(|i| c(0.4, 0.9).powu(i as u32)).collect();
    for _ in 0..2000 {
        for i in 0..n {
            let mut denom = c(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = p(roots[i]) / denom;
            roots[i] -= step;
        }
    }
    roots
}

/// Largest one-to-one matching within `tol`, by exhaustive search.
pub fn brute_force_max_matching(a: &[Complex64], b: &[Complex64], tol: f64) -> usize {
    fn rec(i: usize, a: &[Complex64], b: &[Complex64], used: &mut [bool], tol: f64) -> usize {
        if i == a.len() {
            return 0;
        }
        let mut best = rec(i + 1, a, b, used, tol);
        for j in 0..b.len() {
            if !used[j] && (a[i] - b[j]).norm() <= tol {
                used[j] = true;
                best = best.max(1 + rec(i + 1, a, b, used, tol));
                used[j] = false;
            }
        }
        best
    }
    rec(0, a, b, &mut vec![false; b.len()], tol)
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn invert(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let mut a = m.clone();
    let mut inv = CMatrix::identity(n, n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm())).unwrap();
        a.swap_rows(col, pivot);
        inv.swap_rows(col, pivot);
        let p = a[(col, col)];
        for j in 0..n {
            a[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = a[(i, col)];
                for j in 0..n {
                    let (aj, ij) = (a[(col, j)], inv[(col, j)]);
                    a[(i, j)] -= f * aj;
                    inv[(i, j)] -= f * ij;
                }
            }
        }
    }
    inv
}

pub fn embed_all(phi: &EmbeddingMap, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points.iter().map(|x| phi.embed(x).unwrap()).collect()
}

/// A fitted, decomposed pair of approximations for a rotation.
pub struct Setup {
    pub phi: Arc<EmbeddingMap>,
    pub orig: KoopmanApproximation,
    pub emb: KoopmanApproximation,
    pub points: Vec<Vec<f64>>,
}

/// Rotation by `alpha`, 3-delay map of `f`, Fourier dictionary of the given
/// order on the circle and `emb_spec` on the embedded side, `n` lattice samples.
pub fn rotation_setup(alpha: f64, f: Observable, fourier_order: u32, emb_spec: DictionarySpec, n: usize) -> Setup {
    let rot = MapSystem::circle_rotation(alpha);
    let phi = Arc::new(EmbeddingMap::new(rot.clone(), f, 1).unwrap());
    let points = sample_invariant(&rot, n, 11, SampleMode::Lattice).unwrap().points;
    let op = original_snapshots(&phi, &points).unwrap();
    let ep = embedded_snapshots(&phi, &points).unwrap();
    let od = Dictionary::fourier(Domain::Original, 1, fourier_order).unwrap();
    let cloud: Vec<Vec<f64>> = ep.x().iter().chain(ep.y()).cloned().collect();
    let ed = Dictionary::from_spec(emb_spec, Domain::Embedded, 3, &cloud).unwrap();
    let orig = fit_koopman(&op, &od, DEFAULT_SVD_RTOL).unwrap().eigendecompose().unwrap();
    let emb = fit_koopman(&ep, &ed, DEFAULT_SVD_RTOL).unwrap().eigendecompose().unwrap();
    Setup { phi, orig, emb, points }
}
