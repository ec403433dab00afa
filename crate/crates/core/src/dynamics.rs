//! Measure-preserving maps on the torus: orbits, invariant-measure
//! sampling and an empirical check that the sampled measure is invariant.
//!
//! Every built-in map is a diffeomorphism of `[0,1)^d` that preserves
//! Lebesgue measure and has an explicit inverse. States are stored as
//! coordinates in `[0,1)`, reduced mod 1 after every step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::histogram::histogram_l1;
use crate::torus::{torus_distance, wrap};

/// The inverse golden mean `(√5 − 1)/2`, the default rotation number.
pub const INVERSE_GOLDEN_MEAN: f64 = 0.618_033_988_749_894_9;

/// Iterates discarded before recording an ergodic-mode orbit.
pub const ERGODIC_BURN_IN: usize = 100;

/// Declarative description of a built-in map, as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// `x ↦ x + alpha (mod 1)` on the circle.
    CircleRotation { alpha: f64 },
    /// `x ↦ x + alpha (mod 1)` componentwise on `[0,1)^d`.
    TorusTranslation { alpha: Vec<f64> },
    /// Arnold's cat map `(x, y) ↦ (2x + y, x + y) (mod 1)`.
    CatMap,
    /// The circle rotation with `alpha = 0`.
    Identity,
}

/// A measure-preserving diffeomorphism of the torus together with its
/// invariant measure (Lebesgue for all built-ins).
#[derive(Debug, Clone, PartialEq)]
pub struct MapSystem {
    name: String,
    spec: SystemSpec,
}

impl MapSystem {
    pub fn circle_rotation(alpha: f64) -> Self {
        Self {
            name: "circle_rotation".into(),
            spec: SystemSpec::CircleRotation { alpha },
        }
    }

    pub fn identity() -> Self {
        Self {
            name: "identity".into(),
            spec: SystemSpec::Identity,
        }
    }

    pub fn torus_translation(alpha: Vec<f64>) -> Result<Self> {
        Self::from_spec(SystemSpec::TorusTranslation { alpha })
    }

    pub fn cat_map() -> Self {
        Self {
            name: "cat_map".into(),
            spec: SystemSpec::CatMap,
        }
    }

    pub fn from_spec(spec: SystemSpec) -> Result<Self> {
        let name = match &spec {
            SystemSpec::CircleRotation { alpha } => {
                finite("alpha", *alpha)?;
                "circle_rotation"
            }
            SystemSpec::TorusTranslation { alpha } => {
                if alpha.is_empty() {
                    return Err(Error::input("torus_translation needs a nonempty alpha vector"));
                }
                for &a in alpha {
                    finite("alpha", a)?;
                }
                "torus_translation"
            }
            SystemSpec::CatMap => "cat_map",
            SystemSpec::Identity => "identity",
        };
        Ok(Self {
            name: name.into(),
            spec,
        })
    }

    /// The built-in systems used by the property suites, one per kind.
    pub fn builtins() -> Vec<MapSystem> {
        vec![
            MapSystem::circle_rotation(INVERSE_GOLDEN_MEAN),
            MapSystem::torus_translation(vec![INVERSE_GOLDEN_MEAN, std::f64::consts::SQRT_2 - 1.0])
                .expect("finite translation vector"),
            MapSystem::cat_map(),
        ]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    /// State dimension `m`.
    pub fn dim(&self) -> usize {
        match &self.spec {
            SystemSpec::CircleRotation { .. } | SystemSpec::Identity => 1,
            SystemSpec::TorusTranslation { alpha } => alpha.len(),
            SystemSpec::CatMap => 2,
        }
    }

    /// `T(x)`, reduced mod 1.
    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.apply(x))
    }

    /// `T⁻¹(x)`, reduced mod 1.
    pub fn inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(match &self.spec {
            SystemSpec::CircleRotation { alpha } => vec![wrap(x[0] - alpha)],
            SystemSpec::Identity => vec![wrap(x[0])],
            SystemSpec::TorusTranslation { alpha } => {
                x.iter().zip(alpha).map(|(&v, &a)| wrap(v - a)).collect()
            }
            SystemSpec::CatMap => vec![wrap(x[0] - x[1]), wrap(2.0 * x[1] - x[0])],
        })
    }

    /// `Tⁿ(x)`.
    pub fn iterate(&self, x: &[f64], n: usize) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.apply_n(x, n))
    }

    /// Unchecked step; callers guarantee `x.len() == self.dim()`.
    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        match &self.spec {
            SystemSpec::CircleRotation { alpha } => vec![wrap(x[0] + alpha)],
            SystemSpec::Identity => vec![wrap(x[0])],
            SystemSpec::TorusTranslation { alpha } => {
                x.iter().zip(alpha).map(|(&v, &a)| wrap(v + a)).collect()
            }
            SystemSpec::CatMap => vec![wrap(2.0 * x[0] + x[1]), wrap(x[0] + x[1])],
        }
    }

    pub(crate) fn apply_n(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut state = x.to_vec();
        for _ in 0..n {
            state = self.apply(&state);
        }
        state
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("state has non-finite coordinates"));
        }
        Ok(())
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::input(format!("{field} must be finite, got {v}")))
    }
}

/// An orbit `x0, T(x0), …, Tⁿ(x0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub system_name: String,
    /// Seed that produced the initial state, if it was drawn at random.
    pub seed: Option<u64>,
}

impl Trajectory {
    /// Number of steps taken (`states.len() - 1`).
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }
}

/// Orbit of length `n + 1` starting at `x0`.
pub fn trajectory(system: &MapSystem, x0: &[f64], n: usize) -> Result<Trajectory> {
    system.check_point(x0)?;
    let mut states = Vec::with_capacity(n + 1);
    states.push(x0.to_vec());
    for k in 0..n {
        let next = system.apply(&states[k]);
        states.push(next);
    }
    Ok(Trajectory {
        states,
        system_name: system.name().to_string(),
        seed: None,
    })
}

/// Orbit from a seeded uniformly random start.
pub fn seeded_trajectory(system: &MapSystem, n: usize, seed: u64) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = uniform_point(&mut rng, system.dim());
    let mut traj = trajectory(system, &x0, n)?;
    traj.seed = Some(seed);
    Ok(traj)
}

/// How [`sample_invariant`] draws points from the invariant measure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Independent uniform draws.
    #[default]
    Iid,
    /// One orbit from a random start (Birkhoff sampling), after burn-in.
    Ergodic,
    /// Rank-1 lattice `frac(l·z/n + u)` with a seeded offset `u`.
    ///
    /// On the circle this is the equispaced grid, which integrates every
    /// trigonometric polynomial of degree below `n` exactly.
    Lattice,
}

impl std::fmt::Display for SampleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SampleMode::Iid => "iid",
            SampleMode::Ergodic => "ergodic",
            SampleMode::Lattice => "lattice",
        })
    }
}

/// Points drawn from the invariant measure, with an optional warning when
/// the empirical measure is known to be a poor proxy (periodic orbit).
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub points: Vec<Vec<f64>>,
    pub mode: SampleMode,
    pub seed: u64,
    pub warning: Option<String>,
}

/// Draws `n` points from the invariant measure of `system`. Deterministic in
/// `(seed, mode, n)`.
pub fn sample_invariant(system: &MapSystem, n: usize, seed: u64, mode: SampleMode) -> Result<Samples> {
    if n == 0 {
        return Err(Error::input("sample count must be at least 1"));
    }
    let dim = system.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (points, warning) = match mode {
        SampleMode::Iid => ((0..n).map(|_| uniform_point(&mut rng, dim)).collect(), None),
        SampleMode::Ergodic => {
            let x0 = uniform_point(&mut rng, dim);
            orbit_points(system, &x0, n)
        }
        SampleMode::Lattice => {
            let offset = uniform_point(&mut rng, dim);
            (lattice_points(n, &offset), None)
        }
    };
    Ok(Samples {
        points,
        mode,
        seed,
        warning,
    })
}

/// Ergodic sampling from an explicit start: burn in, then record `n`
/// consecutive orbit points.
pub fn orbit_samples(system: &MapSystem, x0: &[f64], n: usize) -> Result<Samples> {
    if n == 0 {
        return Err(Error::input("sample count must be at least 1"));
    }
    system.check_point(x0)?;
    let (points, warning) = orbit_points(system, x0, n);
    Ok(Samples {
        points,
        mode: SampleMode::Ergodic,
        seed: 0,
        warning,
    })
}

fn orbit_points(system: &MapSystem, x0: &[f64], n: usize) -> (Vec<Vec<f64>>, Option<String>) {
    let start = system.apply_n(x0, ERGODIC_BURN_IN);
    let mut points = Vec::with_capacity(n);
    let mut period = None;
    let mut state = start.clone();
    for k in 0..n {
        if k > 0 && period.is_none() && torus_distance(&state, &start) < 1e-12 {
            period = Some(k);
        }
        let next = system.apply(&state);
        points.push(std::mem::replace(&mut state, next));
    }
    let warning = period.map(|p| {
        format!("orbit is periodic with period {p} < {n}; the empirical measure is atomic")
    });
    (points, warning)
}

fn uniform_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

fn lattice_points(n: usize, offset: &[f64]) -> Vec<Vec<f64>> {
    let generator = lattice_generator(n, offset.len());
    (0..n)
        .map(|l| {
            generator
                .iter()
                .zip(offset)
                .map(|(&z, &u)| wrap(((l as u128 * z as u128) % n as u128) as f64 / n as f64 + u))
                .collect()
        })
        .collect()
}

/// Korobov generator `(1, g, g², …) mod n` with `g` the integer closest to
/// `n/φ` that is coprime to `n`.
fn lattice_generator(n: usize, dim: usize) -> Vec<usize> {
    let mut g = ((n as f64) * INVERSE_GOLDEN_MEAN).round().max(1.0) as usize;
    while n > 1 && gcd(g, n) != 1 {
        g += 1;
    }
    let mut z = Vec::with_capacity(dim);
    let mut current = 1usize % n.max(1);
    for _ in 0..dim {
        z.push(current);
        current = ((current as u128 * g as u128) % n as u128) as usize;
    }
    z
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// L1 distance between the binned empirical measure of `samples` and that
/// of their images under the map, over a uniform partition of the torus
/// into `bins^dim` cells. Lies in `[0, 2]`; zero when the map preserves
/// the histogram exactly.
pub fn check_measure_preservation(system: &MapSystem, samples: &[Vec<f64>], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::input("bins must be at least 2"));
    }
    if samples.is_empty() {
        return Err(Error::input("samples must be nonempty"));
    }
    for s in samples {
        system.check_point(s)?;
    }
    let images: Vec<Vec<f64>> = samples.iter().map(|s| system.apply(s)).collect();
    let dim = system.dim();
    Ok(histogram_l1(samples, &images, &vec![0.0; dim], &vec![1.0; dim], bins))
}
