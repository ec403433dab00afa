//! Comparison of the original and delay-embedded Koopman approximations:
//! eigenvalue matching, the operator commutation `C_φ ∘ U_T̃ = U_T ∘ C_φ`, and
//! eigenfunctions pulled back to the state space through `C_φ`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::edmd::{eval_dictionary, BoundingBox, KoopmanApproximation};
use crate::embedding::{diagnose, shift_unchecked, EmbeddingMap};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{truncated_svd, CMatrix};
use crate::observables::{pullback, Domain, FourierTerm, Observable};
use crate::parallel::map_collect;

/// `max(max_a min_b |a−b|, max_b min_a |a−b|)`.
pub fn hausdorff_distance(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("Hausdorff distance of an empty set"));
    }
    let directed = |p: &[Complex64], q: &[Complex64]| {
        p.iter()
            .map(|x| q.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

/// A one-to-one pairing between two eigenvalue lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `(index_a, index_b, distance)`, sorted by `index_a`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Maximum-cardinality matching with every pair within `tol`.
///
/// Pairs are first taken greedily in `(distance, index_a, index_b)` order;
/// augmenting paths then grow the matching to maximum cardinality. A
/// non-positive or NaN `tol` matches only identical values (or nothing).
pub fn match_spectra(a: &[Complex64], b: &[Complex64], tol: f64) -> Matching {
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let d = (x - y).norm();
            if d <= tol {
                edges.push((d, i, j));
            }
        }
    }
    edges.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));

    let mut match_a: Vec<Option<usize>> = vec![None; a.len()];
    let mut match_b: Vec<Option<usize>> = vec![None; b.len()];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); a.len()];
    for &(_, i, j) in &edges {
        adj[i].push(j);
        if match_a[i].is_none() && match_b[j].is_none() {
            match_a[i] = Some(j);
            match_b[j] = Some(i);
        }
    }

    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], ma: &mut [Option<usize>], mb: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            let free = match mb[j] {
                None => true,
                Some(k) => augment(k, adj, seen, ma, mb),
            };
            if free {
                ma[i] = Some(j);
                mb[j] = Some(i);
                return true;
            }
        }
        false
    }
    for i in 0..a.len() {
        if match_a[i].is_none() && !adj[i].is_empty() {
            let mut seen = vec![false; b.len()];
            augment(i, &adj, &mut seen, &mut match_a, &mut match_b);
        }
    }

    let pairs = match_a
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|j| (i, j, (a[i] - b[j]).norm())))
        .collect();
    Matching {
        pairs,
        unmatched_a: (0..a.len()).filter(|&i| match_a[i].is_none()).collect(),
        unmatched_b: (0..b.len()).filter(|&j| match_b[j].is_none()).collect(),
    }
}

/// Both forms of the commutation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutationResidual {
    /// `max |g(T̃ Φ(x)) − (g∘Φ)(T x)|` through exact composition.
    pub exact: f64,
    /// The same comparison through the two fitted matrices after projecting
    /// `g` and `g∘Φ` onto the respective dictionaries.
    pub finite_rank_defect: f64,
}

/// Five embedded test observables: the constant, the first and last delay
/// coordinates, their product, and `cos(2π y_0)`.
pub fn default_test_observables(embed_dim: usize) -> Vec<Observable> {
    let last = embed_dim.saturating_sub(1);
    let mut exps = vec![0u32; embed_dim.max(1)];
    exps[0] += 1;
    exps[last] += 1;
    let mut wave = vec![0i64; embed_dim.max(1)];
    wave[0] = 1;
    vec![
        Observable::constant(Domain::Embedded, 1.0),
        Observable::projection(Domain::Embedded, 0),
        Observable::projection(Domain::Embedded, last),
        Observable::monomial(Domain::Embedded, exps).expect("nonempty exponents"),
        Observable::fourier(
            Domain::Embedded,
            vec![FourierTerm::new(wave.clone(), 0.5), FourierTerm::new(wave.iter().map(|k| -k).collect(), 0.5)],
        )
        .expect("consistent wavevectors"),
    ]
}

/// Checks `C_φ ∘ U_T̃ = U_T ∘ C_φ` on test observables `g` at base points `x`.
///
/// The exact side evaluates `g(T̃(Φ(x)))` with `T̃` the delay-window shift,
/// against `(g∘Φ)(T x)` through the composed observable. The finite-rank
/// defect compares `Ψ_emb(Φ x) K_emb c_emb` with `Ψ_orig(x) K_orig c_orig`,
/// where `c_emb` and `c_orig` are least-squares coefficients of `g` and
/// `g∘Φ` on the two dictionaries.
pub fn operator_commutation_residual(
    approx_orig: &KoopmanApproximation,
    approx_emb: &KoopmanApproximation,
    phi: &Arc<EmbeddingMap>,
    test_observables: &[Observable],
    points: &[Vec<f64>],
) -> Result<CommutationResidual> {
    check_pair(approx_orig, approx_emb, phi)?;
    if points.is_empty() {
        return Err(Error::input("commutation check needs at least one point"));
    }
    for p in points {
        check_dim(phi.system().dim(), p.len())?;
    }
    let mut pulled = Vec::with_capacity(test_observables.len());
    for g in test_observables {
        if g.domain() != Domain::Embedded || !g.accepts(phi.embed_dim()) {
            return Err(Error::input("test observables must be defined on the embedded space"));
        }
        pulled.push(pullback(g, phi)?);
    }

    let embedded: Vec<Vec<f64>> = map_collect(points, |x| phi.embed_unchecked(x));
    let shifted: Vec<Vec<f64>> = points
        .iter()
        .zip(&embedded)
        .map(|(x, y)| shift_unchecked(phi, y, x))
        .collect();
    let advanced: Vec<Vec<f64>> = map_collect(points, |x| phi.advance_unchecked(x));

    let mut exact = 0.0f64;
    for (g, gp) in test_observables.iter().zip(&pulled) {
        for (ty, tx) in shifted.iter().zip(&advanced) {
            exact = exact.max((g.eval_unchecked(ty) - gp.eval_unchecked(tx)).norm());
        }
    }

    let psi_emb = eval_dictionary(approx_emb.dictionary(), &embedded)?;
    let psi_orig = eval_dictionary(approx_orig.dictionary(), points)?;
    let svd_emb = truncated_svd(&psi_emb, approx_emb.svd_rtol())?;
    let svd_orig = truncated_svd(&psi_orig, approx_orig.svd_rtol())?;
    let n = points.len();
    let values = CMatrix::from_fn(n, test_observables.len(), |i, j| test_observables[j].eval_unchecked(&embedded[i]));
    let left = &psi_emb * approx_emb.k_matrix() * svd_emb.solve(&values);
    let right = &psi_orig * approx_orig.k_matrix() * svd_orig.solve(&values);
    let finite_rank_defect = (left - right).iter().map(|z| z.norm()).fold(0.0, f64::max);

    Ok(CommutationResidual {
        exact,
        finite_rank_defect,
    })
}

fn check_pair(orig: &KoopmanApproximation, emb: &KoopmanApproximation, phi: &EmbeddingMap) -> Result<()> {
    if orig.dictionary().domain() != Domain::Original || emb.dictionary().domain() != Domain::Embedded {
        return Err(Error::input("expected an original-space and an embedded-space approximation"));
    }
    check_dim(phi.system().dim(), orig.dictionary().dim())?;
    check_dim(phi.embed_dim(), emb.dictionary().dim())?;
    Ok(())
}

/// Relative empirical `L²` error between each matched original eigenfunction
/// and the pulled-back embedded one, after the optimal unit-modulus phase.
///
/// Both functions are first scaled to unit empirical norm. When the original
/// eigenvalue is repeated within `cluster_tol`, the pulled-back function is
/// compared against its projection onto the whole original eigenspace.
pub fn pullback_eigenfunctions(
    approx_emb: &KoopmanApproximation,
    phi: &EmbeddingMap,
    approx_orig: &KoopmanApproximation,
    matching: &Matching,
    points: &[Vec<f64>],
    cluster_tol: f64,
) -> Result<Vec<f64>> {
    check_pair(approx_orig, approx_emb, phi)?;
    if matching.is_empty() {
        return Err(Error::input("no matched eigenpairs to compare"));
    }
    if !approx_orig.is_decomposed() || !approx_emb.is_decomposed() {
        return Err(Error::input("both approximations must be eigendecomposed"));
    }
    if points.is_empty() {
        return Err(Error::input("pullback comparison needs at least one point"));
    }
    for p in points {
        check_dim(phi.system().dim(), p.len())?;
    }
    let (lo, le) = (approx_orig.eigenvalues(), approx_emb.eigenvalues());
    if matching.pairs.iter().any(|&(i, j, _)| i >= lo.len() || j >= le.len()) {
        return Err(Error::input("matching refers to eigen-indices out of range"));
    }
    let embedded: Vec<Vec<f64>> = map_collect(points, |x| phi.embed_unchecked(x));
    let orig_funcs = eval_dictionary(approx_orig.dictionary(), points)? * approx_orig.right_eigenvectors();
    let emb_funcs = eval_dictionary(approx_emb.dictionary(), &embedded)? * approx_emb.right_eigenvectors();
    let n = points.len() as f64;

    let mut errors = Vec::with_capacity(matching.len());
    for &(i, j, _) in &matching.pairs {
        let b = unit(emb_funcs.column(j).iter().copied().collect(), n)?;
        let cluster: Vec<usize> = (0..lo.len()).filter(|&k| (lo[k] - lo[i]).norm() <= cluster_tol).collect();
        let err = if cluster.len() > 1 {
            let basis = CMatrix::from_fn(points.len(), cluster.len(), |r, c| orig_funcs[(r, cluster[c])]);
            let bv = CMatrix::from_column_slice(b.len(), 1, &b);
            let svd = truncated_svd(&basis, 1e-12)?;
            let proj = &basis * svd.solve(&bv);
            l2(&(bv - proj).iter().copied().collect::<Vec<_>>(), n)
        } else {
            let a = unit(orig_funcs.column(i).iter().copied().collect(), n)?;
            let inner: Complex64 = b.iter().zip(&a).map(|(bi, ai)| bi.conj() * ai).sum();
            let c = if inner.norm() > 0.0 { inner / inner.norm() } else { Complex64::new(1.0, 0.0) };
            let diff: Vec<Complex64> = b.iter().zip(&a).map(|(bi, ai)| c * bi - ai).collect();
            l2(&diff, n)
        };
        errors.push(err);
    }
    Ok(errors)
}

fn l2(v: &[Complex64], n: f64) -> f64 {
    (v.iter().map(|z| z.norm_sqr()).sum::<f64>() / n).sqrt()
}

fn unit(mut v: Vec<Complex64>, n: f64) -> Result<Vec<Complex64>> {
    let norm = l2(&v, n);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Numerical("eigenfunction vanishes on the sample".into()));
    }
    v.iter_mut().for_each(|z| *z /= norm);
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    EquivalentWithinTol,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::EquivalentWithinTol => "equivalent_within_tol",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Thresholds a verdict was decided against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceRecord {
    /// Bound on matched eigenvalue distances, Hausdorff distance, exact
    /// commutation residual and pullback errors.
    pub match_tol: f64,
    pub svd_rtol_original: f64,
    pub svd_rtol_embedded: f64,
    pub criterion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub index_original: usize,
    pub index_embedded: usize,
    pub lambda_original: [f64; 2],
    pub lambda_embedded: [f64; 2],
    pub distance: f64,
}

/// The finite-rank equivalence certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralComparison {
    pub eigenvalues_original: Vec<[f64; 2]>,
    pub eigenvalues_embedded: Vec<[f64; 2]>,
    pub matched_pairs: Vec<MatchedPair>,
    pub hausdorff: f64,
    pub unmatched_original: Vec<usize>,
    pub unmatched_embedded: Vec<usize>,
    pub commutation_residual_ops: f64,
    pub finite_rank_commutation_defect: f64,
    pub eigenfunction_pullback_errors: Vec<f64>,
    pub unitarity_original: f64,
    pub unitarity_embedded: f64,
    pub fit_residual_original: f64,
    pub fit_residual_embedded: f64,
    pub svd_rank_original: usize,
    pub svd_rank_embedded: usize,
    /// Box used to rescale the original-space dictionary, if any.
    pub bounding_box_original: Option<BoundingBox>,
    /// Box used to rescale the embedded-space dictionary, if any.
    pub bounding_box_embedded: Option<BoundingBox>,
    pub verdict: Verdict,
    pub tolerances: ToleranceRecord,
    pub notes: Vec<String>,
}

pub const CERTIFICATE_CRITERION: &str = "every eigenvalue matched one-to-one within match_tol, Hausdorff distance <= match_tol, \
exact commutation residual <= match_tol, every eigenfunction pullback error <= match_tol";

const FINITE_RANK_NOTE: &str = "finite-rank certificate: agreement of two finite sections of the Koopman operators, \
not a proof of unitary equivalence of the full operators";

/// Unitarity residual above which the report flags a non-invariant dictionary.
pub const UNITARITY_FLAG: f64 = 1e-2;

/// Relative fit residual above which the report flags a non-invariant dictionary.
pub const FIT_RESIDUAL_FLAG: f64 = 1e-6;

/// Assembles the certificate. Both approximations must be eigendecomposed
/// and fitted on snapshots generated from `points`.
pub fn certify_equivalence(
    approx_orig: &KoopmanApproximation,
    approx_emb: &KoopmanApproximation,
    phi: &Arc<EmbeddingMap>,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<SpectralComparison> {
    if !(tol > 0.0) {
        return Err(Error::input(format!("match tolerance must be positive, got {tol}")));
    }
    if !approx_orig.is_decomposed() || !approx_emb.is_decomposed() {
        return Err(Error::input("both approximations must be eigendecomposed"));
    }
    let (lo, le) = (approx_orig.eigenvalues(), approx_emb.eigenvalues());
    let matching = match_spectra(lo, le, tol);
    let hausdorff = hausdorff_distance(lo, le)?;
    let tests = default_test_observables(phi.embed_dim());
    let commutation = operator_commutation_residual(approx_orig, approx_emb, phi, &tests, points)?;
    let pullback_errors = if matching.is_empty() {
        Vec::new()
    } else {
        pullback_eigenfunctions(approx_emb, phi, approx_orig, &matching, points, tol)?
    };
    let unitarity_original = approx_orig.unitarity_residual();
    let unitarity_embedded = approx_emb.unitarity_residual();

    let equivalent = matching.unmatched_a.is_empty()
        && matching.unmatched_b.is_empty()
        && hausdorff <= tol
        && commutation.exact <= tol
        && pullback_errors.iter().all(|e| *e <= tol);

    let mut notes = vec![FINITE_RANK_NOTE.to_string()];
    if !phi.embedding_guaranteed() {
        notes.push(format!(
            "embedding not guaranteed: embed_dim {} < 2m+1 = {}",
            phi.embed_dim(),
            2 * phi.manifold_dim() + 1
        ));
    }
    let embedded: Vec<Vec<f64>> = map_collect(points, |x| phi.embed_unchecked(x));
    let diag = diagnose(phi, &embedded);
    if diag.degenerate_observable {
        notes.push(format!(
            "degenerate observable: embedded sample condition number {:e}",
            diag.condition_number
        ));
    }
    for (side, r) in [("original", approx_orig.residual()), ("embedded", approx_emb.residual())] {
        if r > FIT_RESIDUAL_FLAG {
            notes.push(format!("{side} fit residual {r:.3e}: dictionary span is not invariant under the dynamics"));
        }
    }
    for (side, u) in [("original", unitarity_original), ("embedded", unitarity_embedded)] {
        if u > UNITARITY_FLAG {
            notes.push(format!(
                "{side} unitarity residual {u:.3e} exceeds {UNITARITY_FLAG:e}: dictionary span not invariant or sample not invariant"
            ));
        }
    }

    let pair = |z: &Complex64| [z.re, z.im];
    Ok(SpectralComparison {
        eigenvalues_original: lo.iter().map(pair).collect(),
        eigenvalues_embedded: le.iter().map(pair).collect(),
        matched_pairs: matching
            .pairs
            .iter()
            .map(|&(i, j, distance)| MatchedPair {
                index_original: i,
                index_embedded: j,
                lambda_original: pair(&lo[i]),
                lambda_embedded: pair(&le[j]),
                distance,
            })
            .collect(),
        hausdorff,
        unmatched_original: matching.unmatched_a,
        unmatched_embedded: matching.unmatched_b,
        commutation_residual_ops: commutation.exact,
        finite_rank_commutation_defect: commutation.finite_rank_defect,
        eigenfunction_pullback_errors: pullback_errors,
        unitarity_original,
        unitarity_embedded,
        fit_residual_original: approx_orig.residual(),
        fit_residual_embedded: approx_emb.residual(),
        svd_rank_original: approx_orig.svd_rank(),
        svd_rank_embedded: approx_emb.svd_rank(),
        bounding_box_original: approx_orig.dictionary().descriptor().bounding_box.clone(),
        bounding_box_embedded: approx_emb.dictionary().descriptor().bounding_box.clone(),
        verdict: if equivalent {
            Verdict::EquivalentWithinTol
        } else {
            Verdict::Inconclusive
        },
        tolerances: ToleranceRecord {
            match_tol: tol,
            svd_rtol_original: approx_orig.svd_rtol(),
            svd_rtol_embedded: approx_emb.svd_rtol(),
            criterion: CERTIFICATE_CRITERION.to_string(),
        },
        notes,
    })
}

impl SpectralComparison {
    pub fn is_equivalent(&self) -> bool {
        self.verdict == Verdict::EquivalentWithinTol
    }

    /// Largest matched distance (0 for an empty matching).
    pub fn max_matched_distance(&self) -> f64 {
        self.matched_pairs.iter().map(|p| p.distance).fold(0.0, f64::max)
    }
}
