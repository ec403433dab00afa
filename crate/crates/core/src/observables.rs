//! Scalar observables on the torus `M` and on the delay-embedded space, the
//! composition operator `C_φ g = g ∘ φ`, and empirical `L²` inner products.
//!
//! Observables are immutable expression trees, so pulling one back through
//! the delay map is an exact composition rather than an interpolation.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMap;
use crate::error::{Error, Result};

/// Which space an observable (or dictionary, or snapshot set) lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// The state space `M`.
    Original,
    /// The delay-coordinate image `φ(M) ⊂ ℝ^d`.
    Embedded,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::Original => "original",
            Domain::Embedded => "embedded",
        })
    }
}

/// One term `c · exp(2πi k·x)` of a Fourier sum.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTerm {
    pub wavevector: Vec<i64>,
    pub coeff: Complex64,
}

impl FourierTerm {
    pub fn new(wavevector: Vec<i64>, coeff: impl Into<Complex64>) -> Self {
        Self {
            wavevector,
            coeff: coeff.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Expr {
    Constant(Complex64),
    /// `Σ c_k exp(2πi k·x)`; the empty sum is the zero function.
    Fourier(Vec<FourierTerm>),
    /// `x ↦ x[index]`.
    Projection(usize),
    /// `x ↦ Π x_j^{e_j}`.
    Monomial(Vec<u32>),
    /// `x ↦ inner((x − offset) ⊙ scale)`.
    Rescaled {
        inner: Box<Expr>,
        offset: Vec<f64>,
        scale: Vec<f64>,
    },
    /// `Σ a_i g_i`.
    Combination(Vec<(Complex64, Expr)>),
    /// `x ↦ outer(Φ(x))`.
    Composition {
        outer: Box<Expr>,
        map: Arc<EmbeddingMap>,
    },
}

impl Expr {
    fn accepts(&self, dim: usize) -> bool {
        match self {
            Expr::Constant(_) => true,
            Expr::Fourier(terms) => terms.first().map_or(true, |t| t.wavevector.len() == dim),
            Expr::Projection(i) => *i < dim,
            Expr::Monomial(e) => e.len() == dim,
            Expr::Rescaled { inner, offset, .. } => offset.len() == dim && inner.accepts(dim),
            Expr::Combination(terms) => terms.iter().all(|(_, e)| e.accepts(dim)),
            Expr::Composition { map, .. } => map.system().dim() == dim,
        }
    }

    /// The single input dimension this expression accepts, when there is one.
    fn required_dim(&self) -> Option<usize> {
        match self {
            Expr::Constant(_) | Expr::Projection(_) => None,
            Expr::Fourier(terms) => terms.first().map(|t| t.wavevector.len()),
            Expr::Monomial(e) => Some(e.len()),
            Expr::Rescaled { offset, .. } => Some(offset.len()),
            Expr::Combination(terms) => terms.iter().find_map(|(_, e)| e.required_dim()),
            Expr::Composition { map, .. } => Some(map.system().dim()),
        }
    }

    fn is_real_valued(&self) -> bool {
        match self {
            Expr::Constant(c) => c.im == 0.0,
            Expr::Fourier(terms) => terms.iter().all(|t| {
                let negated: Vec<i64> = t.wavevector.iter().map(|k| -k).collect();
                let partner: Complex64 = terms
                    .iter()
                    .filter(|u| u.wavevector == negated)
                    .map(|u| u.coeff)
                    .sum();
                let own: Complex64 = terms
                    .iter()
                    .filter(|u| u.wavevector == t.wavevector)
                    .map(|u| u.coeff)
                    .sum();
                (own - partner.conj()).norm() <= 1e-12 * (1.0 + own.norm())
            }),
            Expr::Projection(_) | Expr::Monomial(_) => true,
            Expr::Rescaled { inner, .. } => inner.is_real_valued(),
            Expr::Combination(terms) => terms.iter().all(|(a, e)| a.im == 0.0 && e.is_real_valued()),
            Expr::Composition { outer, .. } => outer.is_real_valued(),
        }
    }

    /// Evaluates without dimension checks; callers validate once up front.
    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> Complex64 {
        match self {
            Expr::Constant(c) => *c,
            Expr::Fourier(terms) => terms
                .iter()
                .map(|t| {
                    let dot: f64 = t.wavevector.iter().zip(x).map(|(&k, &v)| k as f64 * v).sum();
                    t.coeff * Complex64::from_polar(1.0, TAU * dot)
                })
                .sum(),
            Expr::Projection(i) => Complex64::new(x[*i], 0.0),
            Expr::Monomial(exps) => {
                let v: f64 = exps.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product();
                Complex64::new(v, 0.0)
            }
            Expr::Rescaled {
                inner,
                offset,
                scale,
            } => {
                let u: Vec<f64> = x
                    .iter()
                    .zip(offset.iter().zip(scale))
                    .map(|(&v, (&o, &s))| (v - o) * s)
                    .collect();
                inner.eval_unchecked(&u)
            }
            Expr::Combination(terms) => terms.iter().map(|(a, e)| a * e.eval_unchecked(x)).sum(),
            Expr::Composition { outer, map } => outer.eval_unchecked(&map.embed_unchecked(x)),
        }
    }
}

/// A scalar-valued function on `M` or on the embedded space.
#[derive(Debug, Clone)]
pub struct Observable {
    domain: Domain,
    expr: Expr,
}

impl Observable {
    pub fn constant(domain: Domain, c: impl Into<Complex64>) -> Self {
        Self {
            domain,
            expr: Expr::Constant(c.into()),
        }
    }

    pub fn fourier(domain: Domain, terms: Vec<FourierTerm>) -> Result<Self> {
        if let Some(first) = terms.first() {
            let d = first.wavevector.len();
            if d == 0 || terms.iter().any(|t| t.wavevector.len() != d) {
                return Err(Error::input("Fourier wavevectors must share one positive length"));
            }
        }
        Ok(Self {
            domain,
            expr: Expr::Fourier(terms),
        })
    }

    /// `cos(2π k x)` on the circle, as the conjugate pair `½e_k + ½e_{−k}`.
    pub fn cosine(domain: Domain, k: i64, amplitude: f64) -> Self {
        Self {
            domain,
            expr: Expr::Fourier(vec![
                FourierTerm::new(vec![k], 0.5 * amplitude),
                FourierTerm::new(vec![-k], 0.5 * amplitude),
            ]),
        }
    }

    /// `sin(2π k x)` on the circle.
    pub fn sine(domain: Domain, k: i64, amplitude: f64) -> Self {
        let c = Complex64::new(0.0, -0.5 * amplitude);
        Self {
            domain,
            expr: Expr::Fourier(vec![FourierTerm::new(vec![k], c), FourierTerm::new(vec![-k], c.conj())]),
        }
    }

    pub fn projection(domain: Domain, index: usize) -> Self {
        Self {
            domain,
            expr: Expr::Projection(index),
        }
    }

    pub fn monomial(domain: Domain, exponents: Vec<u32>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::input("monomial needs at least one exponent"));
        }
        Ok(Self {
            domain,
            expr: Expr::Monomial(exponents),
        })
    }

    /// Precomposes with the affine map `x ↦ (x − offset) ⊙ scale`.
    pub fn rescaled(self, offset: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if offset.len() != scale.len() || offset.is_empty() {
            return Err(Error::input("rescaling offset and scale must have one equal, positive length"));
        }
        if !self.expr.accepts(offset.len()) {
            return Err(Error::input(format!(
                "observable does not accept {}-dimensional rescaled input",
                offset.len()
            )));
        }
        Ok(Self {
            domain: self.domain,
            expr: Expr::Rescaled {
                inner: Box::new(self.expr),
                offset,
                scale,
            },
        })
    }

    /// `Σ a_i g_i` over observables on one domain.
    pub fn linear_combination(terms: Vec<(Complex64, Observable)>) -> Result<Self> {
        let domain = match terms.first() {
            Some((_, g)) => g.domain,
            None => return Err(Error::input("linear combination needs at least one term")),
        };
        if terms.iter().any(|(_, g)| g.domain != domain) {
            return Err(Error::input("linear combination mixes domains"));
        }
        Ok(Self {
            domain,
            expr: Expr::Combination(terms.into_iter().map(|(a, g)| (a, g.expr)).collect()),
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn accepts(&self, dim: usize) -> bool {
        self.expr.accepts(dim)
    }

    pub fn is_real_valued(&self) -> bool {
        self.expr.is_real_valued()
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if self.expr.accepts(x.len()) {
            Ok(())
        } else {
            Err(match self.expr.required_dim() {
                Some(expected) => Error::DimensionMismatch {
                    expected,
                    got: x.len(),
                },
                None => Error::input(format!("observable not defined on {}-dimensional points", x.len())),
            })
        }
    }

    /// `obs(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        self.check_point(x)?;
        Ok(self.expr.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> Complex64 {
        self.expr.eval_unchecked(x)
    }
}

/// `C_φ g = g ∘ Φ`: pulls an embedded-space observable back to `M`.
///
/// The result keeps `g` and `φ` symbolically, so evaluating it at `x`
/// computes `g(Φ(x))` exactly.
pub fn pullback(g: &Observable, phi: &Arc<EmbeddingMap>) -> Result<Observable> {
    if g.domain != Domain::Embedded {
        return Err(Error::input("pullback expects an observable on the embedded space"));
    }
    if !g.accepts(phi.embed_dim()) {
        return Err(Error::input(format!(
            "observable is not defined on {}-dimensional delay vectors",
            phi.embed_dim()
        )));
    }
    Ok(Observable {
        domain: Domain::Original,
        expr: Expr::Composition {
            outer: Box::new(g.expr.clone()),
            map: Arc::clone(phi),
        },
    })
}

/// `(1/N) Σ conj(g1(p)) g2(p)`, the `L²` inner product under the empirical
/// measure of `points`.
pub fn empirical_inner_product(g1: &Observable, g2: &Observable, points: &[Vec<f64>]) -> Result<Complex64> {
    if points.is_empty() {
        return Err(Error::input("inner product needs at least one point"));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for p in points {
        g1.check_point(p)?;
        g2.check_point(p)?;
        acc += g1.eval_unchecked(p).conj() * g2.eval_unchecked(p);
    }
    Ok(acc / points.len() as f64)
}

/// Observable literal as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Fourier { terms: Vec<FourierTermSpec> },
    Proj { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTermSpec {
    pub k: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl ObservableSpec {
    pub fn build(&self, domain: Domain) -> Result<Observable> {
        match self {
            ObservableSpec::Fourier { terms } => Observable::fourier(
                domain,
                terms
                    .iter()
                    .map(|t| FourierTerm::new(t.k.clone(), Complex64::new(t.re, t.im)))
                    .collect(),
            ),
            ObservableSpec::Proj { index } => Ok(Observable::projection(domain, *index)),
        }
    }
}
