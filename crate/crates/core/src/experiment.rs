//! Config-driven pipeline: sample → embed → fit both EDMD problems →
//! certify → report.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{sample_invariant, MapSystem, SampleMode, SystemSpec};
use crate::edmd::{fit_koopman, Dictionary, DictionarySpec, KoopmanApproximation, DEFAULT_SVD_RTOL};
use crate::embedding::{embedded_snapshots, original_snapshots, EmbeddingMap, SnapshotPairs};
use crate::equivalence::{certify_equivalence, SpectralComparison};
use crate::error::{Error, Result};
use crate::observables::{Domain, ObservableSpec};
use crate::report::{emit_report, ReportFormat};

/// Default matching tolerance.
pub const DEFAULT_MATCH_TOL: f64 = 1e-6;

/// Largest dictionary a config may request.
pub const MAX_DICTIONARY_SIZE: usize = 2000;

/// One experiment. Unknown fields are rejected.
///
/// ```json
/// {
///   "system": {"type": "circle_rotation", "alpha": 0.618},
///   "observable": {"type": "fourier", "terms": [{"k": [1], "re": 0.5}, {"k": [-1], "re": 0.5}]},
///   "embedding": {"m": 1},
///   "dictionaries": {"original": {"type": "fourier", "order": 3},
///                    "embedded": {"type": "fourier_box", "order": 3}},
///   "sampling": {"n": 10000, "seed": 42}
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    /// Generates the delay data instead of `system` (cross-system control).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedded_system: Option<SystemSpec>,
    /// The delay observable `f` on the original space.
    pub observable: ObservableSpec,
    pub embedding: EmbeddingParams,
    pub dictionaries: DictionaryPair,
    pub sampling: SamplingParams,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingParams {
    /// Manifold dimension `m`.
    pub m: usize,
    /// Defaults to `2m + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed_dim: Option<usize>,
    #[serde(default = "one")]
    pub lag: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryPair {
    pub original: DictionarySpec,
    pub embedded: DictionarySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingParams {
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: SampleMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_svd_rtol")]
    pub svd_rtol: f64,
    #[serde(default = "default_match_tol")]
    pub match_tol: f64,
}

fn default_svd_rtol() -> f64 {
    DEFAULT_SVD_RTOL
}

fn default_match_tol() -> f64 {
    DEFAULT_MATCH_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            svd_rtol: DEFAULT_SVD_RTOL,
            match_tol: DEFAULT_MATCH_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputParams {
    /// Report directory; nothing is written when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<ReportFormat>,
    /// File stem, e.g. `report` → `report.json`, `report.txt`, `report.csv`.
    #[serde(default = "default_stem")]
    pub stem: String,
}

fn all_formats() -> Vec<ReportFormat> {
    ReportFormat::ALL.to_vec()
}

fn default_stem() -> String {
    "report".into()
}

impl Default for OutputParams {
    fn default() -> Self {
        Self {
            dir: None,
            formats: all_formats(),
            stem: default_stem(),
        }
    }
}

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Parses and validates a config. Errors name the offending field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(&path, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

impl ExperimentConfig {
    pub fn embed_dim(&self) -> usize {
        self.embedding.embed_dim.unwrap_or(2 * self.embedding.m + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let system = MapSystem::from_spec(self.system.clone()).map_err(|e| config_error("system", e.to_string()))?;
        if let Some(spec) = &self.embedded_system {
            let other = MapSystem::from_spec(spec.clone()).map_err(|e| config_error("embedded_system", e.to_string()))?;
            if other.dim() != system.dim() {
                return Err(config_error("embedded_system", "must have the same state dimension as `system`"));
            }
        }
        if self.embedding.m == 0 {
            return Err(config_error("embedding.m", "must be at least 1"));
        }
        if self.embedding.embed_dim == Some(0) {
            return Err(config_error("embedding.embed_dim", "must be at least 1"));
        }
        if self.embedding.lag == 0 {
            return Err(config_error("embedding.lag", "must be at least 1"));
        }
        if self.sampling.n == 0 {
            return Err(config_error("sampling.n", "must be at least 1"));
        }
        let t = &self.tolerances;
        if !(t.svd_rtol > 0.0 && t.svd_rtol < 1.0) {
            return Err(config_error("tolerances.svd_rtol", "must lie in (0, 1)"));
        }
        if !(t.match_tol > 0.0 && t.match_tol.is_finite()) {
            return Err(config_error("tolerances.match_tol", "must be positive and finite"));
        }
        for (field, spec, dim) in [
            ("dictionaries.original", self.dictionaries.original, system.dim()),
            ("dictionaries.embedded", self.dictionaries.embedded, self.embed_dim()),
        ] {
            let size = dictionary_size(spec, dim);
            if size > MAX_DICTIONARY_SIZE as u128 {
                return Err(config_error(
                    field,
                    format!("{size} basis functions exceeds the limit of {MAX_DICTIONARY_SIZE}"),
                ));
            }
        }
        if self.output.formats.is_empty() {
            return Err(config_error("output.formats", "at least one format is required"));
        }
        self.observable
            .build(Domain::Original)
            .and_then(|f| EmbeddingMap::new(system, f, self.embedding.m))
            .map_err(|e| config_error("observable", e.to_string()))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Number of functions in a built-in dictionary, without building it.
fn dictionary_size(spec: DictionarySpec, dim: usize) -> u128 {
    // lattice points with |k|_1 <= K: sum_i 2^i C(d,i) C(K,i)
    fn choose(n: u128, k: u128) -> u128 {
        if k > n {
            return 0;
        }
        (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
    }
    let d = dim as u128;
    match spec {
        DictionarySpec::Fourier { order } | DictionarySpec::FourierBox { order } => (0..=d.min(order as u128))
            .map(|i| (1u128 << i).saturating_mul(choose(d, i)).saturating_mul(choose(order as u128, i)))
            .fold(0u128, u128::saturating_add),
        DictionarySpec::Monomial { degree } | DictionarySpec::MonomialBox { degree } => choose(d + degree as u128, d),
    }
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub comparison: SpectralComparison,
    pub approx_original: KoopmanApproximation,
    pub approx_embedded: KoopmanApproximation,
    pub base_points: Vec<Vec<f64>>,
    pub original_pairs: SnapshotPairs,
    pub embedded_pairs: SnapshotPairs,
}

impl ExperimentOutcome {
    pub fn is_equivalent(&self) -> bool {
        self.comparison.is_equivalent()
    }
}

/// Builds the delay map of `spec` with the config's observable and delays.
pub fn build_embedding(cfg: &ExperimentConfig, spec: &SystemSpec) -> Result<EmbeddingMap> {
    let system = MapSystem::from_spec(spec.clone())?;
    let f = cfg.observable.build(Domain::Original)?;
    EmbeddingMap::new(system, f, cfg.embedding.m)?
        .with_embed_dim(cfg.embed_dim())?
        .with_lag(cfg.embedding.lag)
}

/// Fits both sides and certifies. Deterministic in the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let system = MapSystem::from_spec(cfg.system.clone()).map_err(Error::in_stage("simulate"))?;
    let samples = sample_invariant(&system, cfg.sampling.n, cfg.sampling.seed, cfg.sampling.mode)
        .map_err(Error::in_stage("simulate"))?;

    let phi_orig = build_embedding(cfg, &cfg.system).map_err(Error::in_stage("embed"))?;
    let phi_emb = match &cfg.embedded_system {
        Some(spec) => build_embedding(cfg, spec).map_err(Error::in_stage("embed"))?,
        None => phi_orig.clone(),
    };
    let phi_emb = Arc::new(phi_emb);
    let original_pairs = original_snapshots(&phi_orig, &samples.points).map_err(Error::in_stage("embed"))?;
    let embedded_pairs = embedded_snapshots(&phi_emb, &samples.points).map_err(Error::in_stage("embed"))?;

    let fit = |pairs: &SnapshotPairs, spec: DictionarySpec, dim: usize| -> Result<KoopmanApproximation> {
        let cloud: Vec<Vec<f64>> = pairs.x().iter().chain(pairs.y()).cloned().collect();
        let dict = Dictionary::from_spec(spec, pairs.domain(), dim, &cloud)?;
        fit_koopman(pairs, &dict, cfg.tolerances.svd_rtol)?.eigendecompose()
    };
    let approx_original = fit(&original_pairs, cfg.dictionaries.original, system.dim()).map_err(Error::in_stage("edmd"))?;
    let approx_embedded =
        fit(&embedded_pairs, cfg.dictionaries.embedded, phi_emb.embed_dim()).map_err(Error::in_stage("edmd"))?;

    let mut comparison = certify_equivalence(
        &approx_original,
        &approx_embedded,
        &phi_emb,
        &samples.points,
        cfg.tolerances.match_tol,
    )
    .map_err(Error::in_stage("certify"))?;
    if let Some(w) = &samples.warning {
        comparison.notes.push(format!("sampling: {w}"));
    }
    if cfg.embedded_system.is_some() {
        let describe = |spec: &SystemSpec| serde_json::to_string(spec).unwrap_or_default();
        comparison.notes.push(format!(
            "cross-check: delay data generated by {}, original data by {}",
            describe(phi_emb.system().spec()),
            describe(system.spec())
        ));
    }
    comparison.notes.push(format!(
        "sampling: {} {} points, seed {}",
        cfg.sampling.n, cfg.sampling.mode, cfg.sampling.seed
    ));

    Ok(ExperimentOutcome {
        comparison,
        approx_original,
        approx_embedded,
        base_points: samples.points,
        original_pairs,
        embedded_pairs,
    })
}

/// Writes `<dir>/<stem>.<ext>` for each requested format; returns the paths.
pub fn write_reports(
    comparison: &SpectralComparison,
    dir: &Path,
    stem: &str,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for &format in formats {
        let path = dir.join(format!("{stem}.{}", format.extension()));
        emit_report(comparison, format, &path).map_err(Error::in_stage("report"))?;
        written.push(path);
    }
    Ok(written)
}
