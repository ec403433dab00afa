//! `koopman-delay`: run and inspect Koopman spectral-equivalence experiments.
//!
//! Exit status: 0 equivalent, 1 inconclusive, 2 usage or config error,
//! 3 numerical failure.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use koopman_delay::csv_io::{samples_table, snapshots_table, table_to_points, table_to_snapshots, CsvTable};
use koopman_delay::dynamics::{sample_invariant, MapSystem};
use koopman_delay::edmd::{fit_koopman, Dictionary, KoopmanApproximation};
use koopman_delay::embedding::{embedded_snapshots, original_snapshots, SnapshotPairs};
use koopman_delay::equivalence::certify_equivalence;
use koopman_delay::experiment::{build_embedding, load_config, run_experiment, write_reports, ExperimentConfig};
use koopman_delay::observables::Domain;
use koopman_delay::report::{render, ReportFormat};
use koopman_delay::Error;

const EXIT_INCONCLUSIVE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

const THREADS_ENV: &str = "KOOPMAN_DELAY_THREADS";

const AFTER_HELP: &str = "\
Config defaults: embedding.embed_dim = 2m+1, embedding.lag = 1,
tolerances.svd_rtol = 1e-12, tolerances.match_tol = 1e-6, sampling.mode = iid.

Exit status: 0 equivalent, 1 inconclusive, 2 usage/config error, 3 numerical failure.
KOOPMAN_DELAY_THREADS caps worker threads (0 = one per core).";

#[derive(Parser, Debug)]
#[command(name = "koopman-delay", version, about = "Koopman spectral equivalence under delay embedding", after_help = AFTER_HELP)]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides `sampling.seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory (default: `output.dir` from the config, else `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Report format written and printed; default writes all and prints text.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Stage progress on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Json,
    Text,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Text => ReportFormat::Text,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Side {
    Original,
    Embedded,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the invariant measure; writes samples.csv.
    Simulate,
    /// Build snapshot pairs on both spaces; writes snapshots_original.csv and snapshots_embedded.csv.
    Embed {
        /// Base points from `simulate` instead of fresh samples.
        #[arg(long, value_name = "PATH")]
        samples: Option<PathBuf>,
    },
    /// Fit and eigendecompose one side; writes koopman_<side>.json.
    Edmd {
        #[arg(long, value_enum, default_value = "original")]
        side: Side,
        /// Snapshot CSV from `embed` instead of fresh snapshots.
        #[arg(long, value_name = "PATH")]
        snapshots: Option<PathBuf>,
    },
    /// Compare two fitted approximations from `edmd`.
    Certify {
        #[arg(long, value_name = "PATH")]
        original: PathBuf,
        #[arg(long, value_name = "PATH")]
        embedded: PathBuf,
        /// Base points the approximations were fitted on (default: resample from the config).
        #[arg(long, value_name = "PATH")]
        samples: Option<PathBuf>,
    },
    /// Full pipeline: simulate, embed, fit both sides, certify, report.
    Run,
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
    format: Option<ReportFormat>,
    verbose: bool,
}

impl Ctx {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[koopman-delay] {}", msg.as_ref());
        }
    }
}

enum Failure {
    Usage(String),
    Pipeline(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Pipeline(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_USAGE })
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("{THREADS_ENV} must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    configure_threads()?;
    let path = cli
        .config
        .ok_or_else(|| Failure::Usage("--config PATH is required".into()))?;
    let mut cfg = load_config(&path)?;
    if let Some(seed) = cli.seed {
        cfg.sampling.seed = seed;
    }
    let out = cli
        .out
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Ctx {
        cfg,
        out,
        format: cli.format.map(Into::into),
        verbose: cli.verbose,
    };
    ctx.log(format!("config {}", path.display()));
    match cli.command {
        Command::Simulate => simulate(&ctx),
        Command::Embed { samples } => embed(&ctx, samples.as_deref()),
        Command::Edmd { side, snapshots } => edmd(&ctx, side, snapshots.as_deref()),
        Command::Certify {
            original,
            embedded,
            samples,
        } => certify(&ctx, &original, &embedded, samples.as_deref()),
        Command::Run => run(&ctx),
    }
}

fn create_out(ctx: &Ctx) -> Result<(), Failure> {
    std::fs::create_dir_all(&ctx.out).map_err(|e| Failure::Pipeline(e.into()))
}

fn write_table(ctx: &Ctx, name: &str, table: &CsvTable) -> Result<PathBuf, Failure> {
    create_out(ctx)?;
    let path = ctx.out.join(name);
    let file = File::create(&path).map_err(|e| Failure::Pipeline(e.into()))?;
    table.write(std::io::BufWriter::new(file))?;
    ctx.log(format!("wrote {}", path.display()));
    Ok(path)
}

fn read_table(path: &Path) -> Result<CsvTable, Failure> {
    let file = File::open(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(CsvTable::read(file)?)
}

fn base_points(ctx: &Ctx, samples: Option<&Path>) -> Result<Vec<Vec<f64>>, Failure> {
    match samples {
        Some(p) => Ok(table_to_points(&read_table(p)?)?),
        None => {
            let system = MapSystem::from_spec(ctx.cfg.system.clone())?;
            let s = &ctx.cfg.sampling;
            let samples = sample_invariant(&system, s.n, s.seed, s.mode)?;
            if let Some(w) = &samples.warning {
                eprintln!("warning: {w}");
            }
            Ok(samples.points)
        }
    }
}

fn simulate(ctx: &Ctx) -> Result<u8, Failure> {
    let system = MapSystem::from_spec(ctx.cfg.system.clone())?;
    let s = &ctx.cfg.sampling;
    let samples = sample_invariant(&system, s.n, s.seed, s.mode)?;
    if let Some(w) = &samples.warning {
        eprintln!("warning: {w}");
    }
    let table = samples_table(
        &samples.points,
        system.name(),
        Some(s.seed),
        vec![("mode".into(), s.mode.to_string())],
    );
    let path = write_table(ctx, "samples.csv", &table)?;
    println!("{} samples of {} -> {}", samples.points.len(), system.name(), path.display());
    Ok(0)
}

fn snapshot_meta(ctx: &Ctx, system: &str) -> Vec<(String, String)> {
    vec![
        ("system".into(), system.to_string()),
        ("f".into(), serde_json::to_string(&ctx.cfg.observable).expect("observable spec serializes")),
        ("embed_dim".into(), ctx.cfg.embed_dim().to_string()),
        ("lag".into(), ctx.cfg.embedding.lag.to_string()),
        ("seed".into(), ctx.cfg.sampling.seed.to_string()),
    ]
}

fn snapshots_both(ctx: &Ctx, points: &[Vec<f64>]) -> Result<(SnapshotPairs, SnapshotPairs, String), Failure> {
    let phi = build_embedding(&ctx.cfg, &ctx.cfg.system)?;
    let emb_spec = ctx.cfg.embedded_system.as_ref().unwrap_or(&ctx.cfg.system);
    let phi_emb = build_embedding(&ctx.cfg, emb_spec)?;
    let orig = original_snapshots(&phi, points)?;
    let emb = embedded_snapshots(&phi_emb, points)?;
    Ok((orig, emb, phi_emb.system().name().to_string()))
}

fn embed(ctx: &Ctx, samples: Option<&Path>) -> Result<u8, Failure> {
    let points = base_points(ctx, samples)?;
    let (orig, emb, emb_name) = snapshots_both(ctx, &points)?;
    let orig_name = MapSystem::from_spec(ctx.cfg.system.clone())?.name().to_string();
    let a = write_table(ctx, "snapshots_original.csv", &snapshots_table(&orig, snapshot_meta(ctx, &orig_name)))?;
    let b = write_table(ctx, "snapshots_embedded.csv", &snapshots_table(&emb, snapshot_meta(ctx, &emb_name)))?;
    println!("{} snapshot pairs -> {}, {}", orig.len(), a.display(), b.display());
    Ok(0)
}

fn fit_side(ctx: &Ctx, pairs: &SnapshotPairs) -> Result<KoopmanApproximation, Failure> {
    let (spec, dim) = match pairs.domain() {
        Domain::Original => (ctx.cfg.dictionaries.original, pairs.dim()),
        Domain::Embedded => (ctx.cfg.dictionaries.embedded, pairs.dim()),
    };
    let cloud: Vec<Vec<f64>> = pairs.x().iter().chain(pairs.y()).cloned().collect();
    let dict = Dictionary::from_spec(spec, pairs.domain(), dim, &cloud)?;
    Ok(fit_koopman(pairs, &dict, ctx.cfg.tolerances.svd_rtol)?.eigendecompose()?)
}

fn edmd(ctx: &Ctx, side: Side, snapshots: Option<&Path>) -> Result<u8, Failure> {
    let pairs = match snapshots {
        Some(p) => table_to_snapshots(&read_table(p)?)?,
        None => {
            let points = base_points(ctx, None)?;
            let (orig, emb, _) = snapshots_both(ctx, &points)?;
            match side {
                Side::Original => orig,
                Side::Embedded => emb,
            }
        }
    };
    let approx = fit_side(ctx, &pairs)?;
    create_out(ctx)?;
    let path = ctx.out.join(format!("koopman_{}.json", pairs.domain()));
    std::fs::write(&path, approx.to_json()? + "\n").map_err(|e| Failure::Pipeline(e.into()))?;
    println!(
        "{} dictionary of {} functions: rank {}, residual {:.3e}, unitarity {:.3e} -> {}",
        pairs.domain(),
        approx.dictionary().len(),
        approx.svd_rank(),
        approx.residual(),
        approx.unitarity_residual(),
        path.display()
    );
    if ctx.verbose {
        for (i, l) in approx.eigenvalues().iter().enumerate() {
            eprintln!("  lambda[{i}] = {:+.12} {:+.12}i  |lambda| = {:.12}", l.re, l.im, l.norm());
        }
    }
    Ok(0)
}

fn load_approx(path: &Path) -> Result<KoopmanApproximation, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let approx = KoopmanApproximation::from_json(&text)?;
    Ok(if approx.is_decomposed() { approx } else { approx.eigendecompose()? })
}

fn certify(ctx: &Ctx, original: &Path, embedded: &Path, samples: Option<&Path>) -> Result<u8, Failure> {
    let approx_orig = load_approx(original)?;
    let approx_emb = load_approx(embedded)?;
    let points = base_points(ctx, samples)?;
    let emb_spec = ctx.cfg.embedded_system.as_ref().unwrap_or(&ctx.cfg.system);
    let phi = Arc::new(build_embedding(&ctx.cfg, emb_spec)?);
    let comparison = certify_equivalence(&approx_orig, &approx_emb, &phi, &points, ctx.cfg.tolerances.match_tol)?;
    emit(ctx, &comparison)
}

fn run(ctx: &Ctx) -> Result<u8, Failure> {
    ctx.log(format!(
        "sampling {} points ({}, seed {})",
        ctx.cfg.sampling.n, ctx.cfg.sampling.mode, ctx.cfg.sampling.seed
    ));
    let outcome = run_experiment(&ctx.cfg)?;
    ctx.log(format!(
        "fitted {} original and {} embedded functions",
        outcome.approx_original.dictionary().len(),
        outcome.approx_embedded.dictionary().len()
    ));
    emit(ctx, &outcome.comparison)
}

fn emit(ctx: &Ctx, comparison: &koopman_delay::equivalence::SpectralComparison) -> Result<u8, Failure> {
    let formats = match ctx.format {
        Some(f) => vec![f],
        None => ctx.cfg.output.formats.clone(),
    };
    let written = write_reports(comparison, &ctx.out, &ctx.cfg.output.stem, &formats)?;
    for p in &written {
        ctx.log(format!("wrote {}", p.display()));
    }
    print!("{}", render(comparison, ctx.format.unwrap_or(ReportFormat::Text))?);
    Ok(if comparison.is_equivalent() { 0 } else { EXIT_INCONCLUSIVE })
}
