use std::fs;

use osmc::estimators::SolverConfig;
use osmc::harness::{append_csv, rank_dependence_with, run_sweep, Algorithm, Dataset, RankDepSpec, SweepSpec, CSV_HEADER};

fn small_sweep(threads: usize) -> SweepSpec {
    SweepSpec {
        dataset: Dataset::Gaussian,
        d: 10,
        r: 2,
        ks: vec![2, 3],
        ms: vec![500, 1_000],
        algorithms: vec![Algorithm::Ours, Algorithm::OursConvex, Algorithm::FullMc, Algorithm::Direct, Algorithm::NoDiag],
        repeats: 2,
        base_seed: 99,
        solver: SolverConfig {
            steps: 400,
            ..SolverConfig::default()
        },
        threads: Some(threads),
        ..SweepSpec::default()
    }
}

#[test]
fn sweep_csv_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    append_csv(&a, &run_sweep(&small_sweep(1)).unwrap()).unwrap();
    append_csv(&b, &run_sweep(&small_sweep(4)).unwrap()).unwrap();
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    // Header plus 2 k values x 2 m values x 5 algorithms x 2 repeats.
    assert_eq!(text.lines().count(), 1 + 40);
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').count(), CSV_HEADER.len(), "{line}");
    }
}

#[test]
fn append_writes_header_once_and_rejects_foreign_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let spec = SweepSpec {
        algorithms: vec![Algorithm::Direct],
        ms: vec![300],
        ks: vec![2],
        ..small_sweep(1)
    };
    let recs = run_sweep(&spec).unwrap();
    append_csv(&path, &recs).unwrap();
    append_csv(&path, &recs).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("dataset,")).count(), 1);
    assert_eq!(text.lines().count(), 1 + 2 * recs.len());

    let other = dir.path().join("other.csv");
    fs::write(&other, "a,b,c\n1,2,3\n").unwrap();
    assert!(append_csv(&other, &recs).is_err());
    assert_eq!(fs::read_to_string(&other).unwrap(), "a,b,c\n1,2,3\n");
}

#[test]
fn rank_search_recovers_quadratic_scaling() {
    // err(r, m) = C r² / m puts m* at C r² / target, a slope of 2.
    let spec = RankDepSpec {
        ranks: vec![2, 3, 4, 6, 8],
        ..RankDepSpec::default()
    };
    let res = rank_dependence_with(&spec, |r, m| Ok(3_000.0 * (r * r) as f64 / m as f64)).unwrap();
    assert!(res.points.iter().all(|p| p.accepted));
    let slope = res.slope.unwrap();
    assert!((slope - 2.0).abs() < 0.2, "{slope}");
}
