use std::io::Cursor;

use pinsat::bench::{
    aggregate, duration_constrained, plot_data, read_records, run_suite, sample_suite, validate_records,
    write_records, BenchConfig, PlannerId, RecordsHeader, StatsFilter, Suite,
};

fn config(problems: usize) -> BenchConfig {
    let mut cfg = BenchConfig::default();
    cfg.suite.problems = problems;
    cfg
}

#[test]
fn suite_sampling_is_reproducible_and_roundtrips() {
    let cfg = config(6);
    let a = sample_suite(&cfg).unwrap();
    let b = sample_suite(&cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(Suite::from_json(&a.to_json()).unwrap().to_json(), a.to_json());
    let mut other = cfg.clone();
    other.suite.seed += 1;
    assert_ne!(sample_suite(&other).unwrap().to_json(), a.to_json());
}

#[test]
fn constrained_suite_keeps_problems_and_tightens_duration() {
    let suite = sample_suite(&config(4)).unwrap();
    let tight = duration_constrained(&suite, 1.2).unwrap();
    assert_eq!(tight.problems.len(), suite.problems.len());
    for (a, b) in suite.problems.iter().zip(&tight.problems) {
        assert_eq!(a.start, b.start);
        assert_eq!(a.goal, b.goal);
        let la = suite.limits_for(a).unwrap();
        let lb = tight.limits_for(b).unwrap();
        assert!(lb.t_max <= la.t_max);
    }
}

#[test]
fn small_run_produces_one_record_per_cell_and_roundtrips() {
    let cfg = config(1);
    let suite = sample_suite(&cfg).unwrap();
    let planners = [PlannerId::Pinsat, PlannerId::SearchThenOptimize];
    let records = run_suite(&suite, &cfg, &planners, &[1, 2], |_| {}).unwrap();
    assert_eq!(records.len(), 4);
    let cells: Vec<(&str, usize)> = records.iter().map(|r| (r.planner.as_str(), r.threads)).collect();
    assert_eq!(
        cells,
        [("pinsat", 1), ("pinsat", 2), ("search_then_optimize", 1), ("search_then_optimize", 2)]
    );

    let again = run_suite(&suite, &cfg, &planners, &[1, 2], |_| {}).unwrap();
    let flags = |rs: &[pinsat::bench::BenchmarkRecord]| rs.iter().map(|r| r.success).collect::<Vec<_>>();
    assert_eq!(flags(&records), flags(&again));

    let mut buf = Vec::new();
    write_records(&mut buf, &RecordsHeader::for_suite(&suite), &records).unwrap();
    let (header, back) = read_records(Cursor::new(buf)).unwrap();
    assert_eq!(header.problems, 1);
    assert_eq!(back, records);

    for (_, report) in validate_records(&suite, &records, 320).unwrap() {
        assert!(report.passed(), "{report:?}");
    }

    let summary = aggregate(&records, StatsFilter::CommonSolved).unwrap();
    assert_eq!(summary.rows.len(), 4);
    let plot = plot_data(&suite, &records, &summary, 2).unwrap();
    assert!(plot.trajectories.len() <= 2);
    for t in &plot.trajectories {
        assert_eq!(t.time.len(), t.position.len());
        assert_eq!(t.derivatives.len(), 3);
        assert!(t.derivatives.iter().all(|d| d.len() == t.time.len()));
    }
}

#[test]
fn truncated_records_are_rejected() {
    assert!(read_records(Cursor::new(Vec::new())).is_err());
    assert!(read_records(Cursor::new(b"{\"format\":\"other\",\"version\":1,\"suite_seed\":0,\"problems\":0}\n".to_vec())).is_err());
    let header = "{\"format\":\"pinsat-records\",\"version\":1,\"suite_seed\":0,\"problems\":0}\n";
    assert!(read_records(Cursor::new(format!("{header}not json\n").into_bytes())).is_err());
}
