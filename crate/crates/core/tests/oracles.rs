//! Cross-checks against independent reference computations: characteristic
//! polynomial roots, factorial brute-force matching, explicit normal
//! equations and an explicit eigenspace projector.

mod common;

use common::*;
use koopman_delay::edmd::{eval_dictionary, fit_koopman, Dictionary, DEFAULT_SVD_RTOL};
use koopman_delay::embedding::SnapshotPairs;
use koopman_delay::equivalence::match_spectra;
use koopman_delay::observables::Domain;
use koopman_delay::{CMatrix, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn eigenvalues_agree_with_characteristic_polynomial_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in 1..=4 {
        for _ in 0..25 {
            let k = random_matrix(n, n, &mut rng);
            let approx = approximation_with_matrix(&k).eigendecompose().unwrap();
            let roots = charpoly_roots(&k);
            let m = match_spectra(approx.eigenvalues(), &roots, 1e-8);
            assert_eq!(m.len(), n, "n={n}: {:?} vs {roots:?}", approx.eigenvalues());
            for j in 0..n {
                let v = approx.right_eigenvectors().column(j);
                let r = &k * v - v * approx.eigenvalues()[j];
                assert!(r.norm() <= 1e-8 * v.norm());
            }
        }
    }
}

#[test]
fn brute_force_matching_cardinality() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..200 {
        let na = rng.random_range(1..=6);
        let nb = rng.random_range(1..=6);
        let a: Vec<Complex64> = (0..na).map(|_| random_point_in_square(&mut rng)).collect();
        let b: Vec<Complex64> = (0..nb).map(|_| random_point_in_square(&mut rng)).collect();
        let tol = rng.random_range(0.2..0.9);
        let m = match_spectra(&a, &b, tol);
        assert_eq!(m.len(), brute_force_max_matching(&a, &b, tol), "trial {trial}");
        assert!(m.pairs.iter().all(|&(_, _, d)| d <= tol));
        assert_eq!(m.len() + m.unmatched_a.len(), na);
        assert_eq!(m.len() + m.unmatched_b.len(), nb);
    }
}

#[test]
fn fit_agrees_with_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dict = Dictionary::fourier(Domain::Original, 1, 1).unwrap();
    for _ in 0..20 {
        let n = rng.random_range(4..12);
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
        let y: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
        let pairs = SnapshotPairs::new(x.clone(), y.clone(), Domain::Original).unwrap();
        let approx = fit_koopman(&pairs, &dict, DEFAULT_SVD_RTOL).unwrap();
        let psi_x = eval_dictionary(&dict, &x).unwrap();
        let psi_y = eval_dictionary(&dict, &y).unwrap();
        let normal = invert(&(psi_x.adjoint() * &psi_x)) * psi_x.adjoint() * psi_y;
        assert!(max_abs(&(approx.k_matrix() - normal)) <= 1e-10);
    }
}

#[test]
fn single_pair_fit_is_the_explicit_pseudoinverse() {
    let dict = Dictionary::fourier(Domain::Original, 1, 1).unwrap();
    let pairs = SnapshotPairs::new(vec![vec![0.17]], vec![vec![0.61]], Domain::Original).unwrap();
    let approx = fit_koopman(&pairs, &dict, DEFAULT_SVD_RTOL).unwrap();
    assert!(approx.svd_rank() <= 1);
    let psi_x = eval_dictionary(&dict, &[vec![0.17]]).unwrap();
    let psi_y = eval_dictionary(&dict, &[vec![0.61]]).unwrap();
    // Ψ⁺ = Ψᴴ (Ψ Ψᴴ)⁻¹ for a single full-rank row
    let pinv = psi_x.adjoint() * invert(&(&psi_x * psi_x.adjoint()));
    let expected = pinv * psi_y;
    assert!(max_abs(&(approx.k_matrix() - &expected)) <= 1e-12);
    // minimum norm among all least-squares solutions
    let null = CMatrix::from_fn(3, 3, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
        - (psi_x.adjoint() * invert(&(&psi_x * psi_x.adjoint())) * &psi_x);
    let perturbed = &expected + &null * CMatrix::from_element(3, 3, Complex64::new(0.01, 0.0));
    assert!(expected.norm() < perturbed.norm());
}

#[test]
fn degenerate_eigenspace_projection_matches_explicit_projector() {
    // α = 1/2: e_{−1}, e_{1} share λ = −1 on the circle with Fourier order 2.
    let setup = rotation_setup(0.5, generic_observable(), 2, koopman_delay::edmd::DictionarySpec::MonomialBox { degree: 1 }, 512);
    let lambda = Complex64::new(-1.0, 0.0);
    let orig: Vec<usize> = (0..setup.orig.eigenvalues().len())
        .filter(|&k| (setup.orig.eigenvalues()[k] - lambda).norm() < 1e-8)
        .collect();
    assert!(orig.len() >= 2, "{:?}", setup.orig.eigenvalues());
    let m = match_spectra(setup.orig.eigenvalues(), setup.emb.eigenvalues(), 1e-6);
    let errors = koopman_delay::equivalence::pullback_eigenfunctions(
        &setup.emb,
        &setup.phi,
        &setup.orig,
        &m,
        &setup.points,
        1e-6,
    )
    .unwrap();
    let mut checked = 0;
    for (&(i, j, _), err) in m.pairs.iter().zip(&errors) {
        if (setup.orig.eigenvalues()[i] - lambda).norm() > 1e-8 {
            continue;
        }
        checked += 1;
        // explicit projector onto span{e_{−1}, e_{1}} in the empirical inner product
        let n = setup.points.len() as f64;
        let g: Vec<Complex64> = setup
            .emb
            .eigenfunction_eval(j, &embed_all(&setup.phi, &setup.points))
            .unwrap();
        let basis: Vec<Vec<Complex64>> = [-1i64, 1]
            .iter()
            .map(|&k| setup.points.iter().map(|x| Complex64::from_polar(1.0, TAU * k as f64 * x[0])).collect())
            .collect();
        let norm_g = (g.iter().map(|z| z.norm_sqr()).sum::<f64>() / n).sqrt();
        let mut residual = g.clone();
        for e in &basis {
            let c: Complex64 = e.iter().zip(&g).map(|(ei, gi)| ei.conj() * gi).sum::<Complex64>() / n;
            for (r, ei) in residual.iter_mut().zip(e) {
                *r -= c * ei;
            }
        }
        let oracle = (residual.iter().map(|z| z.norm_sqr()).sum::<f64>() / n).sqrt() / norm_g;
        assert!(*err <= 1e-6 && oracle <= 1e-6, "err {err}, oracle {oracle}");
        assert!((err - oracle).abs() <= 1e-9);
    }
    assert_eq!(checked, 1);
}
