//! Delay-coordinate embedding `Φ(x) = (f(x), f(T x), …, f(T^{d−1} x))`,
//! snapshot pairs in embedded coordinates, and the reconstructed map `T̃`
//! realized as a window shift.
//!
//! `φ⁻¹` is never computed. `T̃(Φ(x))` is obtained from a witness state `x`
//! by shifting the delay window and appending the next observable sample,
//! which is `Φ(T x)` by construction.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::dynamics::MapSystem;
use crate::error::{check_dim, Error, Result};
use crate::histogram::{bounding_box, histogram_l1};
use crate::observables::{Domain, Observable};
use crate::parallel::map_collect;

/// Witness consistency bound for [`reconstructed_step`].
pub const WITNESS_TOLERANCE: f64 = 1e-10;

/// Condition number above which the embedded snapshot matrix is flagged as
/// coming from a degenerate observable.
pub const DEGENERACY_CONDITION: f64 = 1e12;

/// The delay map `Φ_(T,f)` with embedding dimension `d` and lag `τ`.
///
/// Component `j` of `Φ(x)` is `f(T^{jτ}(x))`. With `τ > 1` this is the delay
/// map of `T^τ`, and every dynamical step of the embedding (snapshots,
/// [`reconstructed_step`]) advances by `T^τ`.
#[derive(Debug, Clone)]
pub struct EmbeddingMap {
    system: MapSystem,
    observable: Observable,
    manifold_dim: usize,
    embed_dim: usize,
    lag: usize,
}

impl EmbeddingMap {
    /// Delay map with the generic embedding dimension `2m + 1` and lag 1.
    pub fn new(system: MapSystem, observable: Observable, manifold_dim: usize) -> Result<Self> {
        if manifold_dim == 0 {
            return Err(Error::input("manifold dimension must be positive"));
        }
        if observable.domain() != Domain::Original {
            return Err(Error::input("the delay observable must live on the original space"));
        }
        if !observable.accepts(system.dim()) {
            return Err(Error::input(format!(
                "delay observable is not defined on the {}-dimensional state space",
                system.dim()
            )));
        }
        if !observable.is_real_valued() {
            return Err(Error::input("the delay observable must be real-valued"));
        }
        Ok(Self {
            system,
            observable,
            manifold_dim,
            embed_dim: 2 * manifold_dim + 1,
            lag: 1,
        })
    }

    pub fn with_embed_dim(mut self, embed_dim: usize) -> Result<Self> {
        if embed_dim == 0 {
            return Err(Error::input("embedding dimension must be at least 1"));
        }
        self.embed_dim = embed_dim;
        Ok(self)
    }

    pub fn with_lag(mut self, lag: usize) -> Result<Self> {
        if lag == 0 {
            return Err(Error::input("lag must be at least 1"));
        }
        self.lag = lag;
        Ok(self)
    }

    pub fn system(&self) -> &MapSystem {
        &self.system
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    pub fn manifold_dim(&self) -> usize {
        self.manifold_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// Whether `d ≥ 2m + 1`, the dimension at which delay maps are
    /// generically embeddings.
    pub fn embedding_guaranteed(&self) -> bool {
        self.embed_dim > 2 * self.manifold_dim
    }

    /// `T^τ(x)`, the base dynamics the embedding reconstructs.
    pub fn advance(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.system.dim(), x.len())?;
        Ok(self.system.apply_n(x, self.lag))
    }

    pub(crate) fn advance_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.system.apply_n(x, self.lag)
    }

    /// `Φ(x)`.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.system.dim(), x.len())?;
        Ok(self.embed_unchecked(x))
    }

    pub(crate) fn embed_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.embed_dim);
        let mut state = x.to_vec();
        for j in 0..self.embed_dim {
            out.push(self.observable.eval_unchecked(&state).re);
            if j + 1 < self.embed_dim {
                state = self.system.apply_n(&state, self.lag);
            }
        }
        out
    }
}

/// `Φ(x)` for one state.
pub fn delay_embed_point(phi: &EmbeddingMap, x: &[f64]) -> Result<Vec<f64>> {
    phi.embed(x)
}

/// Paired samples `(X[i], Y[i])` of a map's graph, the EDMD input.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPairs {
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    domain: Domain,
}

impl SnapshotPairs {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, domain: Domain) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::input(format!(
                "snapshot sets differ in size: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if let Some(first) = x.first() {
            let d = first.len();
            if d == 0 {
                return Err(Error::input("snapshots must have positive dimension"));
            }
            for p in x.iter().chain(&y) {
                check_dim(d, p.len())?;
            }
        }
        Ok(Self { x, y, domain })
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[Vec<f64>] {
        &self.y
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Point dimension, or 0 for an empty set.
    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }
}

/// Pairs `(x, T^τ x)` on the original space, the counterpart of
/// [`embedded_snapshots`] on the same base points.
pub fn original_snapshots(phi: &EmbeddingMap, base_points: &[Vec<f64>]) -> Result<SnapshotPairs> {
    check_base(phi, base_points)?;
    let y = map_collect(base_points, |x| phi.advance_unchecked(x));
    SnapshotPairs::new(base_points.to_vec(), y, Domain::Original)
}

/// Pairs `(Φ(x_i), Φ(T x_i))`, computed by exact iteration of the map so the
/// conjugacy `Φ ∘ T = T̃ ∘ Φ` holds on the data to machine precision.
pub fn embedded_snapshots(phi: &EmbeddingMap, base_points: &[Vec<f64>]) -> Result<SnapshotPairs> {
    check_base(phi, base_points)?;
    let pairs = map_collect(base_points, |x| {
        (phi.embed_unchecked(x), phi.embed_unchecked(&phi.advance_unchecked(x)))
    });
    let (x, y) = pairs.into_iter().unzip();
    SnapshotPairs::new(x, y, Domain::Embedded)
}

fn check_base(phi: &EmbeddingMap, base_points: &[Vec<f64>]) -> Result<()> {
    if base_points.is_empty() {
        return Err(Error::input("base points must be nonempty"));
    }
    for p in base_points {
        check_dim(phi.system().dim(), p.len())?;
    }
    Ok(())
}

/// Successive delay windows of a scalar series:
/// `X[i] = (s_i, s_{i+τ}, …, s_{i+(d−1)τ})` and `Y[i]` the same window one
/// sample later.
pub fn hankel_from_series(series: &[f64], embed_dim: usize, lag: usize) -> Result<SnapshotPairs> {
    if embed_dim == 0 || lag == 0 {
        return Err(Error::input("embedding dimension and lag must be positive"));
    }
    let span = (embed_dim - 1) * lag;
    let min_len = span + 2;
    if series.len() < min_len {
        return Err(Error::input(format!(
            "series of length {} is too short: need at least {min_len} samples for d={embed_dim}, lag={lag}",
            series.len()
        )));
    }
    let window = |i: usize| -> Vec<f64> { (0..embed_dim).map(|j| series[i + j * lag]).collect() };
    let count = series.len() - span - 1;
    let x = (0..count).map(window).collect();
    let y = (1..=count).map(window).collect();
    SnapshotPairs::new(x, y, Domain::Embedded)
}

/// `T̃(y)` for `y = Φ(x_witness)`: the window shifted left with
/// `f(T^{dτ}(x_witness))` appended, which equals `Φ(T^τ x_witness)`.
pub fn reconstructed_step(phi: &EmbeddingMap, y: &[f64], x_witness: &[f64]) -> Result<Vec<f64>> {
    check_dim(phi.embed_dim(), y.len())?;
    let expected = phi.embed(x_witness)?;
    let gap = expected
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if !(gap <= WITNESS_TOLERANCE) {
        return Err(Error::ContractViolation(format!(
            "delay vector differs from Φ(witness) by {gap:e} (> {WITNESS_TOLERANCE:e})"
        )));
    }
    Ok(shift_unchecked(phi, y, x_witness))
}

pub(crate) fn shift_unchecked(phi: &EmbeddingMap, y: &[f64], x_witness: &[f64]) -> Vec<f64> {
    let d = phi.embed_dim();
    let far = phi.system().apply_n(x_witness, d * phi.lag());
    let mut out = Vec::with_capacity(d);
    out.extend_from_slice(&y[1..]);
    out.push(phi.observable().eval_unchecked(&far).re);
    out
}

/// `max_x ‖Φ(T x) − T̃(Φ(x))‖_∞` over `points`.
pub fn commutation_residual_maps(phi: &EmbeddingMap, points: &[Vec<f64>]) -> Result<f64> {
    check_base(phi, points)?;
    let gaps = map_collect(points, |x| {
        let direct = phi.embed_unchecked(&phi.advance_unchecked(x));
        let shifted = shift_unchecked(phi, &phi.embed_unchecked(x), x);
        direct
            .iter()
            .zip(&shifted)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// Measure-preservation residual of `T̃` for the pushforward `μ ∘ φ⁻¹`:
/// L1 distance between the binned empirical measures of `{Φ(x_i)}` and
/// `{T̃ Φ(x_i)}` over a `bins^d` partition of their bounding box.
pub fn reconstructed_measure_residual(phi: &EmbeddingMap, base_samples: &[Vec<f64>], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::input("bins must be at least 2"));
    }
    let pairs = embedded_snapshots(phi, base_samples)?;
    let (lo, hi) = bounding_box(pairs.x().iter().chain(pairs.y())).expect("nonempty snapshots");
    Ok(histogram_l1(pairs.x(), pairs.y(), &lo, &hi, bins))
}

/// Numerical health of a delay embedding on a given sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDiagnostics {
    /// `σ_max/σ_min` of the N×d matrix of embedded points (∞ when singular).
    pub condition_number: f64,
    /// Condition number above [`DEGENERACY_CONDITION`], or all points equal.
    pub degenerate_observable: bool,
    /// `d ≥ 2m + 1`.
    pub embedding_guaranteed: bool,
}

pub fn diagnose(phi: &EmbeddingMap, embedded_points: &[Vec<f64>]) -> EmbeddingDiagnostics {
    let condition_number = condition_number(embedded_points);
    let collapsed = match embedded_points.split_first() {
        Some((first, rest)) => rest.iter().all(|p| p == first),
        None => true,
    };
    EmbeddingDiagnostics {
        condition_number,
        degenerate_observable: collapsed || !(condition_number <= DEGENERACY_CONDITION),
        embedding_guaranteed: phi.embedding_guaranteed(),
    }
}

fn condition_number(points: &[Vec<f64>]) -> f64 {
    let d = points.first().map_or(0, Vec::len);
    if points.is_empty() || d == 0 {
        return f64::INFINITY;
    }
    let m = DMatrix::from_fn(points.len(), d, |i, j| points[i][j]);
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if points.len() < d || min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Smallest Euclidean distance between two entries of `points`
/// (`+∞` for fewer than two points).
pub fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            best = best.min(d2);
        }
    }
    best.sqrt()
}

/// Convenience: wraps a delay map for sharing with composed observables.
pub fn shared(phi: EmbeddingMap) -> Arc<EmbeddingMap> {
    Arc::new(phi)
}
