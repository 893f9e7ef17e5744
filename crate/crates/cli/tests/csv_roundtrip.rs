use asyncgl_cli::run::{read_rows, write_rows, HistoryRow};
use asyncgl_cli::{load_config, RunSummary};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), any::<f64>().prop_filter("finite", |x| x.is_finite()), 1e-300..1e300f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summaries_round_trip(
        case in "[a-z0-9-]{1,20}",
        variant in prop::sample::select(vec!["sync-fixed", "sync-aitken", "async-sim", "async-concurrent"]),
        counts in (0usize..100_000, 0usize..100_000, 0usize..100_000),
        floats in (finite(), finite(), finite()),
        converged in any::<bool>(),
    ) {
        let row = RunSummary {
            case,
            variant: variant.to_string(),
            iterations: counts.0,
            loc_solves_min: counts.1.min(counts.2),
            loc_solves_max: counts.1.max(counts.2),
            wall_seconds: floats.0.abs(),
            rel_residual: floats.1,
            err_vs_oracle: floats.2,
            converged,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write_rows(&path, std::slice::from_ref(&row)).unwrap();
        let back: Vec<RunSummary> = read_rows(&path).unwrap();
        prop_assert_eq!(back, vec![row]);
    }

    #[test]
    fn history_round_trips(rows in prop::collection::vec((finite(), finite(), finite()), 0..30)) {
        let rows: Vec<HistoryRow> = rows
            .into_iter()
            .enumerate()
            .map(|(j, (r, w, t))| HistoryRow { j, residual_norm: r.abs(), omega: w, wall_seconds: t.abs() })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        write_rows(&path, &rows).unwrap();
        let back: Vec<HistoryRow> = read_rows(&path).unwrap();
        prop_assert_eq!(back, rows);
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 2);
}
