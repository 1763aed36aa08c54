use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_srkrylov"))
}

#[test]
fn solve_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let st = bin().args(["solve", "--preset", "termination-lab", "--out"]).arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("method,rhs_index,mv_count,true_resnorm,marker"));
    assert!(text.contains(",capture"));
}

#[test]
fn solve_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let st = bin().args(["solve", "--preset", "termination-lab", "--seed", "5", "--out"]).arg(p).status().unwrap();
        assert!(st.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn non_converged_stage_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let st = bin()
        .args(["solve", "--problem", "tridiag n=100", "--pipeline", "idr(s=2)", "--max-mv", "10", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
    assert!(fs::read_to_string(&out).unwrap().lines().count() > 1);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "preset = termination-lab\ntol = 1e-6\n").unwrap();
    let out = bin().args(["solve", "--config"]).arg(&cfg).args(["--rhs", "ones", "--tol", "1e-4"]).output().unwrap();
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0")));
}

#[test]
fn bad_config_exits_one() {
    let out = bin().args(["solve", "--preset", "termination-lab", "--pipeline", "sridr"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn summarize_reads_solve_output() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    assert!(bin().args(["solve", "--preset", "termination-lab", "--out"]).arg(&csv).status().unwrap().success());
    let out = bin().arg("summarize").arg(&csv).output().unwrap();
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("method,rhs_index,mv_to_tol"));
    assert_eq!(table.lines().count(), 4);

    let empty = dir.path().join("e.csv");
    fs::write(&empty, "").unwrap();
    let out = bin().arg("summarize").arg(&empty).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);
}

#[test]
fn gen_writes_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.mtx");
    assert!(bin().args(["gen", "--problem", "poisson m=3", "--out"]).arg(&p).status().unwrap().success());
    let a = srkrylov::problems::read_matrix_market::<f64>(&p).unwrap();
    assert_eq!(a.nrows(), 9);
}

#[test]
fn missing_ocean_matrix_is_a_skip() {
    let out = bin().args(["solve", "--preset", "ocean", "--problem", "mtx path=/nonexistent.mtx"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped"));
}

#[test]
fn bench_prints_summary() {
    let out = bin().args(["bench", "--preset", "termination-lab"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("sridr(s=20;jstar="));
}
