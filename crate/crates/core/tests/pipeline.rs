use std::path::PathBuf;
use std::sync::Arc;

use koopman_delay::csv_io::{samples_table, snapshots_table, table_to_points, table_to_snapshots, CsvTable};
use koopman_delay::edmd::KoopmanApproximation;
use koopman_delay::equivalence::certify_equivalence;
use koopman_delay::experiment::{build_embedding, load_config, run_experiment, write_reports, ExperimentConfig};
use koopman_delay::report::ReportFormat;

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    load_config(&path).unwrap()
}

fn csv_round_trip(t: &CsvTable) -> CsvTable {
    let mut buf = Vec::new();
    t.write(&mut buf).unwrap();
    CsvTable::read(buf.as_slice()).unwrap()
}

#[test]
fn bundled_configs_give_expected_verdicts() {
    let generic = run_experiment(&config("rotation_generic.json")).unwrap();
    assert!(generic.is_equivalent(), "{:?}", generic.comparison);

    let mismatched = run_experiment(&config("mismatched.json")).unwrap();
    assert!(!mismatched.is_equivalent());
    assert!(mismatched.comparison.hausdorff > 0.1);
    assert!(mismatched.comparison.notes.iter().any(|n| n.starts_with("cross-check")));

    let golden = run_experiment(&config("rotation_golden.json")).unwrap();
    let c = &golden.comparison;
    assert!(c.matched_pairs.iter().any(|p| (p.lambda_original[0] - 1.0).abs() < 1e-10));
    assert!(c.commutation_residual_ops <= 1e-12);
}

#[test]
fn runs_are_deterministic() {
    let cfg = config("rotation_generic.json");
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    for f in ReportFormat::ALL {
        assert_eq!(
            koopman_delay::report::render(&a.comparison, f).unwrap(),
            koopman_delay::report::render(&b.comparison, f).unwrap()
        );
    }
    assert_eq!(a.approx_embedded.to_json().unwrap(), b.approx_embedded.to_json().unwrap());
}

#[test]
fn staged_files_reproduce_the_single_run() {
    let cfg = config("rotation_generic.json");
    let outcome = run_experiment(&cfg).unwrap();

    let samples = csv_round_trip(&samples_table(&outcome.base_points, "circle_rotation", Some(cfg.sampling.seed), vec![]));
    assert_eq!(samples.meta("seed"), Some("20240601"));
    let points = table_to_points(&samples).unwrap();
    assert_eq!(points, outcome.base_points);

    let orig_pairs = table_to_snapshots(&csv_round_trip(&snapshots_table(&outcome.original_pairs, vec![]))).unwrap();
    let emb_pairs = table_to_snapshots(&csv_round_trip(&snapshots_table(&outcome.embedded_pairs, vec![]))).unwrap();
    assert_eq!(orig_pairs, outcome.original_pairs);
    assert_eq!(emb_pairs, outcome.embedded_pairs);

    let orig = KoopmanApproximation::from_json(&outcome.approx_original.to_json().unwrap()).unwrap();
    let emb = KoopmanApproximation::from_json(&outcome.approx_embedded.to_json().unwrap()).unwrap();
    let phi = Arc::new(build_embedding(&cfg, &cfg.system).unwrap());
    let staged = certify_equivalence(&orig, &emb, &phi, &points, cfg.tolerances.match_tol).unwrap();
    assert_eq!(staged.eigenvalues_embedded, outcome.comparison.eigenvalues_embedded);
    assert_eq!(staged.verdict, outcome.comparison.verdict);
    assert_eq!(staged.hausdorff, outcome.comparison.hausdorff);
}

#[test]
fn reports_land_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&config("rotation_generic.json")).unwrap();
    let written = write_reports(&outcome.comparison, dir.path(), "r", &ReportFormat::ALL).unwrap();
    assert_eq!(written.len(), 3);
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("lambda_orig_re,")));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(json["verdict"], "equivalent_within_tol");
}
