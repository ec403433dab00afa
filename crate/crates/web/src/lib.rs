//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The demo works with a circle rotation by `alpha` and the delay observable
//! `f(x) = cos 2πx + a cos 4πx + b sin 4πx` with three delays.

use std::sync::Arc;

use koopman_delay::dynamics::{check_measure_preservation, sample_invariant, MapSystem, SampleMode};
use koopman_delay::embedding::{reconstructed_measure_residual, EmbeddingMap};
use koopman_delay::experiment::{parse_config, run_experiment};
use koopman_delay::observables::{Domain, FourierTerm, Observable};
use koopman_delay::report::{render, ReportFormat};
use koopman_delay::{Complex64, Result};
use serde_json::json;
use wasm_bindgen::prelude::*;

const EMBED_DIM: usize = 3;

fn observable_terms(a: f64, b: f64) -> serde_json::Value {
    json!([
        {"k": [1], "re": 0.5}, {"k": [-1], "re": 0.5},
        {"k": [2], "re": 0.5 * a, "im": -0.5 * b}, {"k": [-2], "re": 0.5 * a, "im": 0.5 * b},
    ])
}

fn delay_map(alpha: f64, a: f64, b: f64) -> Result<EmbeddingMap> {
    let f = Observable::fourier(
        Domain::Original,
        vec![
            FourierTerm::new(vec![1], 0.5),
            FourierTerm::new(vec![-1], 0.5),
            FourierTerm::new(vec![2], Complex64::new(0.5 * a, -0.5 * b)),
            FourierTerm::new(vec![-2], Complex64::new(0.5 * a, 0.5 * b)),
        ],
    )?;
    EmbeddingMap::new(MapSystem::circle_rotation(alpha), f, 1)?.with_embed_dim(EMBED_DIM)
}

/// `n` equispaced points of the delay curve, flattened as `y0 y1 y2 y0 y1 y2 ...`.
pub fn curve(alpha: f64, a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    let phi = delay_map(alpha, a, b)?;
    let mut out = Vec::with_capacity(EMBED_DIM * n);
    for i in 0..n {
        out.extend(phi.embed(&[i as f64 / n as f64])?);
    }
    Ok(out)
}

/// Runs the full pipeline and returns the JSON report.
///
/// The original side uses a Fourier dictionary of `fourier_order`; the
/// embedded side uses box-rescaled monomials of `monomial_degree`, fitted on
/// delay data from a rotation by `alpha_embedded`.
#[allow(clippy::too_many_arguments)]
pub fn comparison(
    alpha: f64,
    alpha_embedded: f64,
    a: f64,
    b: f64,
    fourier_order: u32,
    monomial_degree: u32,
    n: usize,
    match_tol: f64,
) -> Result<String> {
    let mut cfg = json!({
        "system": {"type": "circle_rotation", "alpha": alpha},
        "observable": {"type": "fourier", "terms": observable_terms(a, b)},
        "embedding": {"m": 1, "embed_dim": EMBED_DIM},
        "dictionaries": {
            "original": {"type": "fourier", "order": fourier_order},
            "embedded": {"type": "monomial_box", "degree": monomial_degree}
        },
        "sampling": {"n": n, "seed": 1, "mode": "lattice"},
        "tolerances": {"match_tol": match_tol}
    });
    if alpha_embedded != alpha {
        cfg["embedded_system"] = json!({"type": "circle_rotation", "alpha": alpha_embedded});
    }
    let cfg = parse_config(&cfg.to_string())?;
    let outcome = run_experiment(&cfg)?;
    render(&outcome.comparison, ReportFormat::Json)
}

/// `[original, reconstructed]` measure-preservation residuals from `n` iid
/// samples: 16 bins on the circle, 6 per axis on the delay image.
pub fn residuals(alpha: f64, a: f64, b: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let phi = Arc::new(delay_map(alpha, a, b)?);
    let points = sample_invariant(phi.system(), n, seed, SampleMode::Iid)?.points;
    Ok(vec![
        check_measure_preservation(phi.system(), &points, 16)?,
        reconstructed_measure_residual(&phi, &points, 6)?,
    ])
}

fn js(e: koopman_delay::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn delay_curve(alpha: f64, a: f64, b: f64, n: usize) -> std::result::Result<Vec<f64>, JsError> {
    curve(alpha, a, b, n).map_err(js)
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn compare_spectra(
    alpha: f64,
    alpha_embedded: f64,
    a: f64,
    b: f64,
    fourier_order: u32,
    monomial_degree: u32,
    n: usize,
    match_tol: f64,
) -> std::result::Result<String, JsError> {
    comparison(alpha, alpha_embedded, a, b, fourier_order, monomial_degree, n, match_tol).map_err(js)
}

#[wasm_bindgen]
pub fn measure_residuals(alpha: f64, a: f64, b: f64, n: usize, seed: u64) -> std::result::Result<Vec<f64>, JsError> {
    residuals(alpha, a, b, n, seed).map_err(js)
}
