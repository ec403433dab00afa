//! Extended dynamic mode decomposition: a least-squares matrix for the
//! Koopman operator on the span of a finite dictionary, its eigenpairs, and
//! the Gram-weighted unitarity check.

use std::collections::HashSet;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::embedding::SnapshotPairs;
use crate::error::{check_dim, Error, Result};
use crate::histogram::bounding_box;
use crate::linalg::{eig, fro, truncated_svd, CMatrix};
use crate::observables::{Domain, FourierTerm, Observable};
use crate::parallel::map_collect;

/// Default relative singular-value cutoff for the pseudoinverse.
pub const DEFAULT_SVD_RTOL: f64 = 1e-12;

/// Built-in dictionary families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DictionarySpec {
    /// `exp(2πi k·x)` for `|k|₁ ≤ order` (on the circle: `k = −order..order`).
    Fourier { order: u32 },
    /// Fourier modes of the coordinates rescaled from the data bounding box
    /// into `[0, 1]^d`.
    FourierBox { order: u32 },
    /// `Π x_j^{e_j}` for total degree `≤ degree`.
    Monomial { degree: u32 },
    /// Monomials of the coordinates rescaled from the bounding box into `[−1, 1]^d`.
    MonomialBox { degree: u32 },
}

impl DictionarySpec {
    pub fn uses_bounding_box(&self) -> bool {
        matches!(self, DictionarySpec::FourierBox { .. } | DictionarySpec::MonomialBox { .. })
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec<f64>>) -> Result<Self> {
        let (lo, hi) = bounding_box(points).ok_or_else(|| Error::input("bounding box of an empty point set"))?;
        Ok(Self { lo, hi })
    }

    fn widths(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| if h > l { h - l } else { 1.0 })
            .collect()
    }
}

/// Everything needed to rebuild a dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryDescriptor {
    pub domain: Domain,
    pub dim: usize,
    /// `None` for hand-assembled dictionaries, which cannot be rebuilt.
    pub spec: Option<DictionarySpec>,
    pub bounding_box: Option<BoundingBox>,
    pub names: Vec<String>,
}

/// A finite basis `ψ_1..ψ_D` on one domain.
#[derive(Debug, Clone)]
pub struct Dictionary {
    descriptor: DictionaryDescriptor,
    basis: Vec<Observable>,
}

impl Dictionary {
    /// A hand-assembled dictionary. Names must be distinct.
    pub fn new(domain: Domain, dim: usize, basis: Vec<Observable>, names: Vec<String>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::input("a dictionary needs at least one function"));
        }
        if basis.len() != names.len() {
            return Err(Error::input("one name per basis function is required"));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::input(format!("duplicate basis function name {dup:?}")));
        }
        for g in &basis {
            if g.domain() != domain {
                return Err(Error::input(format!("basis function on the {} space in a {domain} dictionary", g.domain())));
            }
            if !g.accepts(dim) {
                return Err(Error::input(format!("basis function is not defined on {dim}-dimensional points")));
            }
        }
        Ok(Self {
            descriptor: DictionaryDescriptor {
                domain,
                dim,
                spec: None,
                bounding_box: None,
                names,
            },
            basis,
        })
    }

    /// Fourier dictionary of the given order on `[0,1)^dim`.
    pub fn fourier(domain: Domain, dim: usize, order: u32) -> Result<Self> {
        Self::build(DictionarySpec::Fourier { order }, domain, dim, None)
    }

    /// Monomials of total degree `≤ degree` in the raw coordinates.
    pub fn monomial(domain: Domain, dim: usize, degree: u32) -> Result<Self> {
        Self::build(DictionarySpec::Monomial { degree }, domain, dim, None)
    }

    /// Builds a dictionary, taking the bounding box from `points` when the
    /// family needs one.
    pub fn from_spec(spec: DictionarySpec, domain: Domain, dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let bbox = if spec.uses_bounding_box() {
            for p in points {
                check_dim(dim, p.len())?;
            }
            Some(BoundingBox::from_points(points)?)
        } else {
            None
        };
        Self::build(spec, domain, dim, bbox)
    }

    pub fn from_descriptor(descriptor: &DictionaryDescriptor) -> Result<Self> {
        let spec = descriptor
            .spec
            .ok_or_else(|| Error::input("dictionary descriptor has no family; it cannot be rebuilt"))?;
        let dict = Self::build(spec, descriptor.domain, descriptor.dim, descriptor.bounding_box.clone())?;
        if dict.names() != descriptor.names.as_slice() {
            return Err(Error::input("dictionary descriptor names do not match its family"));
        }
        Ok(dict)
    }

    fn build(spec: DictionarySpec, domain: Domain, dim: usize, bbox: Option<BoundingBox>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("dictionary dimension must be positive"));
        }
        if spec.uses_bounding_box() != bbox.is_some() {
            return Err(Error::input("bounding box given for the wrong dictionary family"));
        }
        if let Some(b) = &bbox {
            check_dim(dim, b.lo.len())?;
            check_dim(dim, b.hi.len())?;
        }
        let mut basis = Vec::new();
        let mut names = Vec::new();
        match spec {
            DictionarySpec::Fourier { order } | DictionarySpec::FourierBox { order } => {
                let prefix = if bbox.is_some() { "e_box" } else { "e" };
                for k in wavevectors(dim, order) {
                    names.push(format!("{prefix}{k:?}"));
                    basis.push(Observable::fourier(domain, vec![FourierTerm::new(k, 1.0)])?);
                }
                if let Some(b) = &bbox {
                    let scale: Vec<f64> = b.widths().iter().map(|w| 1.0 / w).collect();
                    basis = rescale_all(basis, &b.lo, &scale)?;
                }
            }
            DictionarySpec::Monomial { degree } | DictionarySpec::MonomialBox { degree } => {
                let prefix = if bbox.is_some() { "u" } else { "x" };
                for e in exponents(dim, degree) {
                    names.push(format!("{prefix}^{e:?}"));
                    basis.push(Observable::monomial(domain, e)?);
                }
                if let Some(b) = &bbox {
                    let center: Vec<f64> = b.lo.iter().zip(&b.hi).map(|(l, h)| 0.5 * (l + h)).collect();
                    let scale: Vec<f64> = b.widths().iter().map(|w| 2.0 / w).collect();
                    basis = rescale_all(basis, &center, &scale)?;
                }
            }
        }
        Ok(Self {
            descriptor: DictionaryDescriptor {
                domain,
                dim,
                spec: Some(spec),
                bounding_box: bbox,
                names,
            },
            basis,
        })
    }

    pub fn descriptor(&self) -> &DictionaryDescriptor {
        &self.descriptor
    }

    pub fn domain(&self) -> Domain {
        self.descriptor.domain
    }

    pub fn dim(&self) -> usize {
        self.descriptor.dim
    }

    pub fn basis(&self) -> &[Observable] {
        &self.basis
    }

    pub fn names(&self) -> &[String] {
        &self.descriptor.names
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
}

fn rescale_all(basis: Vec<Observable>, offset: &[f64], scale: &[f64]) -> Result<Vec<Observable>> {
    basis
        .into_iter()
        .map(|g| g.rescaled(offset.to_vec(), scale.to_vec()))
        .collect()
}

/// All `k ∈ ℤ^dim` with `|k|₁ ≤ order`, in lexicographic order.
fn wavevectors(dim: usize, order: u32) -> Vec<Vec<i64>> {
    fn rec(prefix: &mut Vec<i64>, dim: usize, budget: i64, out: &mut Vec<Vec<i64>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for k in -budget..=budget {
            prefix.push(k);
            rec(prefix, dim, budget - k.abs(), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(dim), dim, order as i64, &mut out);
    out
}

/// Exponent vectors of total degree `≤ degree`, graded, then reverse
/// lexicographic within a degree (`x` before `y`).
fn exponents(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, dim: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == dim {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            rec(prefix, dim, remaining - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for total in 0..=degree {
        rec(&mut Vec::with_capacity(dim), dim, total, &mut out);
    }
    out
}

/// `Ψ[i, j] = ψ_j(points[i])`.
pub fn eval_dictionary(dict: &Dictionary, points: &[Vec<f64>]) -> Result<CMatrix> {
    for p in points {
        check_dim(dict.dim(), p.len())?;
    }
    let rows = map_collect(points, |p| {
        dict.basis.iter().map(|g| g.eval_unchecked(p)).collect::<Vec<_>>()
    });
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    Ok(CMatrix::from_row_slice(points.len(), dict.len(), &flat))
}

/// Finite-section Koopman matrix fitted by EDMD.
///
/// Immutable once fitted; [`KoopmanApproximation::eigendecompose`] returns a
/// new value with the spectral fields filled in.
#[derive(Debug, Clone)]
pub struct KoopmanApproximation {
    dictionary: Dictionary,
    k_matrix: CMatrix,
    gram: CMatrix,
    residual: f64,
    svd_rtol: f64,
    singular_values: Vec<f64>,
    /// D×r orthonormal basis of the retained right singular subspace.
    retained: CMatrix,
    eigenvalues: Vec<Complex64>,
    right_eigenvectors: CMatrix,
    decomposed: bool,
}

/// `K = argmin ‖Ψ_Y − Ψ_X K‖_F` (minimum-norm) through a truncated SVD of `Ψ_X`.
pub fn fit_koopman(pairs: &SnapshotPairs, dict: &Dictionary, svd_rtol: f64) -> Result<KoopmanApproximation> {
    if !(svd_rtol > 0.0 && svd_rtol < 1.0) {
        return Err(Error::input(format!("svd_rtol must lie in (0, 1), got {svd_rtol}")));
    }
    if pairs.is_empty() {
        return Err(Error::input("at least one snapshot pair is required"));
    }
    if pairs.domain() != dict.domain() {
        return Err(Error::input(format!(
            "snapshots live on the {} space but the dictionary on the {} space",
            pairs.domain(),
            dict.domain()
        )));
    }
    let psi_x = eval_dictionary(dict, pairs.x())?;
    let psi_y = eval_dictionary(dict, pairs.y())?;
    fit_from_matrices(&psi_x, &psi_y, dict.clone(), svd_rtol)
}

pub(crate) fn fit_from_matrices(
    psi_x: &CMatrix,
    psi_y: &CMatrix,
    dictionary: Dictionary,
    svd_rtol: f64,
) -> Result<KoopmanApproximation> {
    let svd = truncated_svd(psi_x, svd_rtol)?;
    let k_matrix = svd.solve(psi_y);
    let denom = fro(psi_y);
    let misfit = fro(&(psi_y - psi_x * &k_matrix));
    let residual = if denom > 0.0 { misfit / denom } else { misfit };
    if !residual.is_finite() {
        return Err(Error::Numerical("least-squares residual is not finite".into()));
    }
    let gram = psi_x.adjoint() * psi_x / Complex64::from(psi_x.nrows() as f64);
    let d = dictionary.len();
    Ok(KoopmanApproximation {
        dictionary,
        k_matrix,
        gram,
        residual,
        svd_rtol,
        singular_values: svd.all.clone(),
        retained: svd.v,
        eigenvalues: Vec::new(),
        right_eigenvectors: CMatrix::zeros(d, 0),
        decomposed: false,
    })
}

impl KoopmanApproximation {
    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn k_matrix(&self) -> &CMatrix {
        &self.k_matrix
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    /// `‖Ψ_Y − Ψ_X K‖_F / ‖Ψ_Y‖_F`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn svd_rtol(&self) -> f64 {
        self.svd_rtol
    }

    pub fn svd_rank(&self) -> usize {
        self.retained.ncols()
    }

    /// All singular values of `Ψ_X`, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn is_decomposed(&self) -> bool {
        self.decomposed
    }

    /// Eigenvalues in canonical order (empty before decomposition).
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// Unit-norm eigenvectors as columns, aligned with [`Self::eigenvalues`].
    pub fn right_eigenvectors(&self) -> &CMatrix {
        &self.right_eigenvectors
    }

    /// Eigenpairs of `K` on the retained singular subspace `V_r`, where
    /// `K V_r = V_r (V_rᴴ K V_r)`. For full-rank data this is the complete
    /// eigendecomposition of `K`.
    ///
    /// Eigenvalues are sorted by phase in `[0, 2π)`, then modulus. Each
    /// eigenvector has unit norm and its largest-modulus entry real positive.
    pub fn eigendecompose(mut self) -> Result<Self> {
        let v = &self.retained;
        let reduced = v.adjoint() * &self.k_matrix * v;
        let e = eig(&reduced).map_err(|err| {
            let sv = &self.singular_values;
            let cond = sv.first().unwrap_or(&0.0) / sv.last().copied().unwrap_or(0.0);
            Error::Numerical(format!("{err}; snapshot matrix condition number {cond:e}"))
        })?;
        let vectors = v * e.vectors;
        let mut pairs: Vec<(Complex64, Vec<Complex64>)> = e
            .values
            .into_iter()
            .enumerate()
            .map(|(k, lambda)| (lambda, phase_fixed(vectors.column(k).iter().copied().collect())))
            .collect();
        pairs.sort_by(|(a, _), (b, _)| canonical_phase(*a).total_cmp(&canonical_phase(*b)).then(a.norm().total_cmp(&b.norm())));
        let d = self.k_matrix.nrows();
        self.right_eigenvectors = CMatrix::from_fn(d, pairs.len(), |i, j| pairs[j].1[i]);
        self.eigenvalues = pairs.into_iter().map(|(l, _)| l).collect();
        self.decomposed = true;
        Ok(self)
    }

    /// Values of the `j`-th approximate eigenfunction `Σ_d v_j[d] ψ_d` at `points`.
    pub fn eigenfunction_eval(&self, j: usize, points: &[Vec<f64>]) -> Result<Vec<Complex64>> {
        if !self.decomposed {
            return Err(Error::input("eigendecompose the approximation first"));
        }
        if j >= self.eigenvalues.len() {
            return Err(Error::input(format!(
                "eigen-index {j} out of range ({} eigenpairs)",
                self.eigenvalues.len()
            )));
        }
        let psi = eval_dictionary(&self.dictionary, points)?;
        Ok((psi * self.right_eigenvectors.column(j)).iter().copied().collect())
    }

    /// `‖Kᴴ G K − G‖_F / ‖G‖_F`, unitarity in the empirical `L²(μ)` geometry.
    pub fn unitarity_residual(&self) -> f64 {
        let g = &self.gram;
        let gn = fro(g);
        if gn == 0.0 {
            return 0.0;
        }
        fro(&(self.k_matrix.adjoint() * g * &self.k_matrix - g)) / gn
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.export())?)
    }

    pub fn export(&self) -> ApproximationExport {
        ApproximationExport {
            dictionary: self.dictionary.descriptor.clone(),
            svd_rtol: self.svd_rtol,
            svd_rank: self.svd_rank(),
            residual: self.residual,
            unitarity_residual: self.unitarity_residual(),
            singular_values: self.singular_values.clone(),
            k_matrix: MatrixExport::from(&self.k_matrix),
            gram: MatrixExport::from(&self.gram),
            retained_subspace: MatrixExport::from(&self.retained),
            eigenvalues: self
                .decomposed
                .then(|| self.eigenvalues.iter().map(|z| [z.re, z.im]).collect()),
            right_eigenvectors: self.decomposed.then(|| MatrixExport::from(&self.right_eigenvectors)),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let export: ApproximationExport = serde_json::from_str(text)?;
        Self::import(export)
    }

    pub fn import(e: ApproximationExport) -> Result<Self> {
        let dictionary = Dictionary::from_descriptor(&e.dictionary)?;
        let d = dictionary.len();
        let k_matrix = e.k_matrix.to_matrix()?;
        let gram = e.gram.to_matrix()?;
        let retained = e.retained_subspace.to_matrix()?;
        if k_matrix.shape() != (d, d) || gram.shape() != (d, d) || retained.nrows() != d || retained.ncols() != e.svd_rank {
            return Err(Error::input("matrix shapes disagree with the dictionary size"));
        }
        let (eigenvalues, right_eigenvectors, decomposed) = match (e.eigenvalues, e.right_eigenvectors) {
            (Some(vals), Some(vecs)) => {
                let vecs = vecs.to_matrix()?;
                if vecs.nrows() != d || vecs.ncols() != vals.len() {
                    return Err(Error::input("eigenvector matrix shape disagrees with the eigenvalues"));
                }
                (vals.iter().map(|p| Complex64::new(p[0], p[1])).collect(), vecs, true)
            }
            (None, None) => (Vec::new(), CMatrix::zeros(d, 0), false),
            _ => return Err(Error::input("eigenvalues and eigenvectors must be exported together")),
        };
        Ok(Self {
            dictionary,
            k_matrix,
            gram,
            residual: e.residual,
            svd_rtol: e.svd_rtol,
            singular_values: e.singular_values,
            retained,
            eigenvalues,
            right_eigenvectors,
            decomposed,
        })
    }
}

/// Phase in `[0, 2π)`, with values within rounding of `2π` folded to 0 so
/// that `λ = 1 − 0i` sorts first.
fn canonical_phase(z: Complex64) -> f64 {
    let p = z.im.atan2(z.re).rem_euclid(TAU);
    if TAU - p < 1e-12 {
        0.0
    } else {
        p
    }
}

fn phase_fixed(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v;
    }
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() {
            best = i;
        }
    }
    let rot = v[best].conj() / (v[best].norm() * norm);
    for z in v.iter_mut() {
        *z *= rot;
    }
    v[best] = Complex64::new(v[best].re, 0.0);
    v
}

/// Serialized form of a [`KoopmanApproximation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproximationExport {
    pub dictionary: DictionaryDescriptor,
    pub svd_rtol: f64,
    pub svd_rank: usize,
    pub residual: f64,
    pub unitarity_residual: f64,
    pub singular_values: Vec<f64>,
    pub k_matrix: MatrixExport,
    pub gram: MatrixExport,
    pub retained_subspace: MatrixExport,
    pub eigenvalues: Option<Vec<[f64; 2]>>,
    pub right_eigenvectors: Option<MatrixExport>,
}

/// Row-major complex matrix as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixExport {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&CMatrix> for MatrixExport {
    fn from(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl MatrixExport {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::input(format!(
                "matrix of shape {}×{} has {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        let flat: Vec<Complex64> = self.data.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        Ok(CMatrix::from_row_slice(self.rows, self.cols, &flat))
    }
}
