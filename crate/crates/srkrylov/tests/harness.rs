mod common;

use std::io::Cursor;

use common::*;
use srkrylov::harness::*;
use srkrylov::linalg::CsrOperator;
use srkrylov::problems::{gen_tridiag, write_matrix_market};
use srkrylov::solvers::{idr_s_solve, Capture, IdrOptions, Marker};
use srkrylov::sridr::{sridr_solve, SridrOptions};

fn csv_of(out: &ExperimentOutcome) -> String {
    let mut buf = Vec::new();
    out.write_csv(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn config_grammar_and_overrides() {
    let text = "# comment\npreset = poisson\nproblem = poisson m=12   # smaller\nrhs = sequence z=3\ntol = 1e-6\nseed = 9\nout = x.csv\n";
    let cfg = ExperimentConfig::parse(text).unwrap();
    assert_eq!(cfg.problem, ProblemSpec::Poisson { m: 12 });
    assert_eq!(cfg.rhs, RhsSpec::Sequence { z: 3 });
    assert_eq!(cfg.tol, 1e-6);
    assert_eq!(cfg.seed, 9);
    assert!(cfg.pipeline.apost.is_some());
    let again = ExperimentConfig::parse(&cfg.to_text()).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn config_errors_are_reported() {
    for bad in [
        "problem = poisson m=4\nrhs = ones\n",
        "preset = nope\n",
        "preset = poisson\nwhatever = 1\n",
        "preset = poisson\ntol = 2\n",
        "preset = poisson\nproblem = cdr h=0.3\n",
        "preset = poisson\npipeline = sridr\n",
        "preset = poisson\npipeline = idr(s=4); sridr\n",
        "preset = poisson\npipeline = bicg(n=20); blocked(l=2,J=2)\n",
        "preset = poisson\npipeline = bicg(n=20,approach=U); srbicg(J=30)\n",
        "preset = poisson\npipeline = lanczos(n=20); apost\n",
        "preset = poisson\npipeline = bicg(n=20,approach=U); srbicg(J=2,q=1)\n",
        "preset = poisson\nno equals sign\n",
    ] {
        assert!(ExperimentConfig::parse(bad).is_err(), "{bad:?}");
    }
}

#[test]
fn presets_parse() {
    for p in PRESETS {
        let cfg = ExperimentConfig::preset(p).unwrap();
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}

#[test]
fn termination_lab_is_deterministic_and_marked() {
    let cfg = ExperimentConfig::preset("termination-lab").unwrap();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    let (ca, cb) = (csv_of(&a), csv_of(&b));
    assert_eq!(ca, cb);
    assert!(ca.starts_with("method,rhs_index,mv_count,true_resnorm,marker\n"));
    assert!(a.rows.iter().any(|r| r.rhs_index == 0 && r.marker == Marker::Capture));
    assert!(a.all_converged());
    for s in a.stages.iter().filter(|s| s.rhs_index > 0) {
        assert!(s.method.starts_with("sridr"));
        assert!(s.cycles <= 6, "{} took {} cycles", s.method, s.cycles);
    }
}

#[test]
fn rows_are_true_residuals_of_the_history() {
    let mut cfg = ExperimentConfig::preset("termination-lab").unwrap();
    cfg.set("rhs", "ones").unwrap();
    let out = run_experiment(&cfg).unwrap();
    let rows: Vec<&Row> = out.rows.iter().filter(|r| r.rhs_index == 0).collect();
    assert_eq!(rows[0].mv_count, 0);
    assert!((rows[0].true_resnorm - 10.0).abs() < 1e-12);
    assert!(rows.windows(2).all(|w| w[0].mv_count <= w[1].mv_count));
}

#[test]
fn blocked_pipeline_marks_block_boundaries() {
    let mut cfg = ExperimentConfig::preset("poisson").unwrap();
    cfg.set("problem", "poisson m=15").unwrap();
    cfg.set("rhs", "sequence z=2").unwrap();
    cfg.set("pipeline", "bicg(n=24,approach=U); blocked(l=3,J=4); apost(s=1,max_mv=400)").unwrap();
    let out = run_experiment(&cfg).unwrap();
    let marks = out.rows.iter().filter(|r| r.rhs_index == 1 && r.marker == Marker::BlockBoundary).count();
    assert_eq!(marks, 2);
    assert!(out.stages.iter().any(|s| s.role == Role::Payload));
    let rec: Vec<_> = out.stages.iter().filter(|s| s.role == Role::Recycled).collect();
    assert_eq!(rec.len(), 2);
    assert!(rec[0].method.starts_with("srbicg_blocked(l=3;n=24;J=4;U)+apost(s=1;from=24)"));
}

#[test]
fn summarize_empty_and_header_only() {
    assert!(summarize(Cursor::new(""), 1e-8).unwrap().is_empty());
    let header = "method,rhs_index,mv_count,true_resnorm,marker\n";
    assert!(summarize(Cursor::new(header), 1e-8).unwrap().is_empty());
    assert_eq!(format_summary(&[]).lines().count(), 1);
}

#[test]
fn summarize_single_converged_run() {
    let csv = "method,rhs_index,mv_count,true_resnorm,marker\nbicg(V),0,0,1.0,none\nbicg(V),0,2,1e-3,none\nbicg(V),0,4,1e-9,capture\n";
    let s = summarize(Cursor::new(csv), 1e-8).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].mv_to_tol, Some(4));
    assert_eq!(s[0].rd_total, Some(2));
    assert!((s[0].final_resnorm - 1e-9).abs() < 1e-20);
}

#[test]
fn summarize_rejects_malformed_csv() {
    for bad in [
        "method,rhs,mv,res,marker\nx,0,0,1,none\n",
        "method,rhs_index,mv_count,true_resnorm,marker\nx,zero,0,1,none\n",
        "method,rhs_index,mv_count,true_resnorm,marker\nx,0,0,1,star\n",
        "method,rhs_index,mv_count,true_resnorm,marker\nx,0,0\n",
    ] {
        assert!(summarize(Cursor::new(bad), 1e-8).is_err(), "{bad:?}");
    }
}

#[test]
fn summary_roundtrips_experiment_csv() {
    let cfg = ExperimentConfig::preset("termination-lab").unwrap();
    let out = run_experiment(&cfg).unwrap();
    let table = summarize(Cursor::new(csv_of(&out)), cfg.tol).unwrap();
    assert_eq!(table.len(), out.stages.len());
    for (row, st) in table.iter().zip(&out.stages) {
        assert_eq!(row.method, st.method);
        assert_eq!(row.mv_total, st.mv_total);
        assert!(row.mv_to_tol.is_some());
    }
}

#[test]
fn sridr_rd_reconstruction_matches_solver_in_recycling_phase() {
    let a = gen_tridiag(3.0, 2.0, -1.0, 100);
    let op = CsrOperator::new(&a);
    let mut o = IdrOptions::new(20, 1e-8);
    o.capture = Capture::Max;
    let (_, payload) = idr_s_solve(&op, &vec![1.0; 100], &o).unwrap();
    let payload = payload.unwrap();
    let b = rvec(100, 3);
    for j in 1..=payload.jstar {
        let (rep, _) = sridr_solve(&op, &b, &payload, Some(j), &SridrOptions::new(1e-14)).unwrap();
        assert_eq!(rep.mv_total, j, "one product per recycled cycle");
        assert_eq!(rd_at(&rep.method, rep.mv_total), Some(rep.rd_total));
        assert_eq!(rep.rd_total, 20 * rep.mv_total);
    }
}

#[test]
fn short_rep_rd_is_half_k_times_mv() {
    let mut cfg = ExperimentConfig::preset("poisson").unwrap();
    cfg.set("problem", "poisson m=10").unwrap();
    cfg.set("rhs", "sequence z=2").unwrap();
    cfg.set("pipeline", "lanczos(n=30); srcg(J=5)").unwrap();
    let out = run_experiment(&cfg).unwrap();
    let table = summarize(Cursor::new(csv_of(&out)), 1e-8).unwrap();
    let row = table.iter().find(|r| r.method.starts_with("srcg")).unwrap();
    let k = 30 / 5;
    assert_eq!(2 * row.rd_total.unwrap(), k * row.mv_total);
    assert_eq!(row.ratio(), Some((3, 1)));
    let st = out.stages.iter().find(|s| s.method.starts_with("srcg")).unwrap();
    assert_eq!(st.rd_total, row.rd_total.unwrap());
}

#[test]
fn missing_matrix_file_skips() {
    let cfg = ExperimentConfig::parse("preset = ocean\nproblem = mtx path=/nonexistent/stommel.mtx\n").unwrap();
    let out = run_experiment(&cfg).unwrap();
    assert!(out.skipped.is_some());
    assert!(out.rows.is_empty());
    assert!(out.all_converged());
}

#[test]
fn matrix_market_problem_with_rgcr() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mtx");
    write_matrix_market(&random_sparse(50, 4), &path).unwrap();
    let cfg = ExperimentConfig::parse(&format!("problem = mtx path={}\nrhs = sequence z=3\npipeline = rgcr(maxit=200)\n", path.display())).unwrap();
    let out = run_experiment(&cfg).unwrap();
    assert!(out.all_converged());
    assert_eq!(out.stages.len(), 4);
    for st in &out.stages {
        assert_eq!(rd_at(&st.method, st.mv_total), Some(st.rd_total), "{}", st.method);
    }
    // recycled solves need fewer products than the first one
    assert!(out.stages[3].mv_total < out.stages[0].mv_total);
}

#[test]
fn reference_solver_covers_every_rhs() {
    let cfg = ExperimentConfig::parse("problem = tridiag n=60\nrhs = random random random\npipeline = idr(s=4,capture=max); sridr; ref_bicg\n").unwrap();
    let out = run_experiment(&cfg).unwrap();
    let refs: Vec<_> = out.stages.iter().filter(|s| s.role == Role::Reference).collect();
    assert_eq!(refs.len(), 3);
    assert!(refs.iter().all(|s| s.method.starts_with("ref:bicg")));
    assert_eq!(rd_at(&refs[1].method, refs[1].mv_total), Some(refs[1].rd_total));
}

#[test]
fn breakdowns_become_failed_stages() {
    // bicg breaks down on the ones vector for this operator
    let cfg = ExperimentConfig::parse("problem = tridiag n=60\nrhs = ones\npipeline = idr(s=4); ref_bicg\n").unwrap();
    let out = run_experiment(&cfg).unwrap();
    let st = out.stages.iter().find(|s| s.role == Role::Reference).unwrap();
    assert!(!st.converged);
    assert_eq!(st.method, "ref:bicg(V)");
    assert!(st.notes[0].contains("breakdown"));
    assert!(!out.all_converged());
}
