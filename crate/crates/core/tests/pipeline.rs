use crm_core::bench::{
    bench_polyhedral_prod, bench_soc, export, read_runs_csv, BenchConfig, BenchMethod,
    ExportFormat, SummaryFile,
};
use crm_core::{
    gen_polyhedral_instance, gen_soc_instance, gen_start, read_problem, write_problem, ConvexSet,
    Error, InstanceKind,
};

fn small(mut cfg: BenchConfig) -> BenchConfig {
    cfg.n = 30;
    cfg.instances = 3;
    cfg.starts = 2;
    cfg
}

#[test]
fn problem_files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for inst in [
        gen_soc_instance(25, 3).unwrap(),
        gen_polyhedral_instance(25, 3).unwrap(),
    ] {
        let path = dir.path().join(format!("{:?}.json", inst.kind));
        write_problem(&inst, &path).unwrap();
        assert_eq!(read_problem(&path).unwrap(), inst);
    }
}

#[test]
fn bad_problem_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, r#"{"schema": 7, "kind": "polyhedral"}"#).unwrap();
    assert!(matches!(
        read_problem(&path),
        Err(Error::SchemaVersionMismatch { found: 7, .. })
    ));
    std::fs::write(&path, r#"{"schema": 1, "kind": "polyhedral", "n": 2}"#).unwrap();
    assert!(matches!(read_problem(&path), Err(Error::Parse { .. })));
    assert!(matches!(
        read_problem(dir.path().join("missing.json")),
        Err(Error::Io(_))
    ));
}

#[test]
fn starts_are_infeasible_and_reproducible() {
    for seed in 0..5 {
        let inst = gen_soc_instance(40, seed).unwrap();
        let Ok(a) = gen_start(&inst, 11) else {
            continue;
        };
        assert_eq!(a, gen_start(&inst, 11).unwrap());
        assert!((5.0..=15.0).contains(&a.raw.norm()));
        let u = inst.affine.as_ref().unwrap();
        assert!(crm_core::gap(inst.cone(), u, &a.projected).unwrap() > 1e-6);
    }
    let inst = gen_polyhedral_instance(40, 1).unwrap();
    assert_eq!(inst.kind, InstanceKind::Polyhedral);
    let s = gen_start(&inst, 2).unwrap();
    assert_eq!(s.projected.dim(), 40 * inst.m);
    for k in &inst.sets {
        assert!(k
            .contains(inst.certificate.as_ref().unwrap(), 1e-8)
            .unwrap());
    }
}

#[test]
fn benchmarks_are_deterministic_across_thread_counts() {
    let mut one = small(BenchConfig::soc());
    one.jobs = Some(1);
    let mut four = one.clone();
    four.jobs = Some(4);
    let a = bench_soc(&one).unwrap();
    let b = bench_soc(&four).unwrap();
    assert_eq!(a.runs, b.runs);
    assert_eq!(a.stats, b.stats);
    assert_eq!(a.runs.len(), 3 * 2 * 3);
    assert!(a.runs.iter().all(|r| r.iterations > 0));
}

#[test]
fn product_benchmark_audits_cleanly() {
    let mut cfg = small(BenchConfig::polyhedral());
    cfg.audit = true;
    let report = bench_polyhedral_prod(&cfg).unwrap();
    assert_eq!(report.failures(), 0);
    let audit = report.fejer.unwrap();
    assert!(audit.checks > 0);
    assert_eq!(audit.violations, 0);
    assert_eq!(report.methods, BenchMethod::PROD.to_vec());
}

#[test]
fn exports_round_trip() {
    let mut cfg = small(BenchConfig::soc());
    cfg.keep_first_trace = true;
    let report = bench_soc(&cfg).unwrap();
    assert_eq!(report.traces.len(), 3);
    let dir = tempfile::tempdir().unwrap();

    let csv_path = dir.path().join("runs.csv");
    export(&report, ExportFormat::Csv, &csv_path).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("instance_seed,start_seed,method,iterations,final_gap,status\n"));
    let runs = read_runs_csv(text.as_bytes()).unwrap();
    assert_eq!(runs, report.runs);

    let json_path = dir.path().join("summary.json");
    export(&report, ExportFormat::Json, &json_path).unwrap();
    let summary: SummaryFile =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(summary.stats, report.stats);
    assert_eq!(summary.profile, report.profile);
    for curve in &summary.profile {
        assert!(curve.fraction_solved.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*curve.fraction_solved.last().unwrap(), 1.0);
    }
}
