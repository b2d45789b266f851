use lars_amg::config::{ProblemSource, RunConfig};
use lars_amg::harness::{
    build_problem, coarsen_report, lars_trace, lars_trace_csv, scaling, solve, sweep, sweep_csv,
    SweepParam, SweepSpec,
};

fn small() -> RunConfig {
    let mut cfg = RunConfig {
        problem: ProblemSource::Disc {
            levels: 2,
            sectors: 6,
        },
        ..RunConfig::default()
    };
    cfg.bootstrap.coarsest_cap = 10;
    cfg
}

#[test]
fn config_text_round_trips() {
    let mut cfg = RunConfig::default();
    cfg.set("lars.caliber", "4").unwrap();
    cfg.set("kernel.kind", "nearest_neighbor").unwrap();
    cfg.set("bootstrap.setup_cycles", "3").unwrap();
    cfg.set("problem.alpha", "0.5").unwrap();
    assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    assert!(RunConfig::parse("lars.caliber = zero\n").is_err());
    assert!(cfg.header().lines().all(|l| l.starts_with("# ")));
}

#[test]
fn lars_trace_matches_csv() {
    let cfg = small();
    let problem = build_problem(&cfg).unwrap();
    let path = lars_trace(&cfg, &problem, 3).unwrap();
    let csv = lars_trace_csv(&cfg, &problem, 3).unwrap();
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, path.len());
    assert!(lars_trace(&cfg, &problem, problem.a.nrows()).is_err());
}

#[test]
fn sweep_reports_failures_as_rows() {
    let cfg = small();
    let spec = SweepSpec {
        param: SweepParam::K,
        values: vec!["4".into(), "8".into()],
    };
    let rows = sweep(&cfg, &spec).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows
        .iter()
        .all(|r| r.status == "ok" && r.iterations.is_some()));
    let csv = sweep_csv(&cfg, &spec, &rows);
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
    let bad = SweepSpec {
        param: SweepParam::Caliber,
        values: vec!["0".into()],
    };
    assert!(
        sweep(&cfg, &bad).is_err() || sweep(&cfg, &bad).unwrap()[0].status.starts_with("failed")
    );
    assert!(SweepParam::parse("nope").is_err());
}

#[test]
fn coarsen_report_counts_agree() {
    let cfg = small();
    let out = coarsen_report(&cfg, &build_problem(&cfg).unwrap()).unwrap();
    assert_eq!(out.n, 37);
    assert!((out.ratio - out.n_coarse as f64 / out.n as f64).abs() < 1e-15);
    let coarse_rows = out
        .vertices_csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter(|l| l.split(',').nth(3) == Some("1"))
        .count();
    assert_eq!(coarse_rows, out.n_coarse);
}

#[test]
fn solve_and_scaling_small() {
    let out = solve(&small()).unwrap();
    assert!(out.report.converged);
    let rows = scaling(&small(), &[(2, 0), (3, 1)]).unwrap();
    assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![37, 169]);
    assert!(rows[1].cg_iterations > rows[0].cg_iterations);
    assert!(scaling(&small(), &[(2, 0)]).is_err());
}
