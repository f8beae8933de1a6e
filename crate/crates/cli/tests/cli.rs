use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pcp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcp"))
        .current_dir(dir)
        .env("PCP_THREADS", "2")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_discover_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = pcp(
        d,
        &["simulate", "--vertices", "10", "--samples", "2000", "--seed", "4", "--data", "x.csv", "--truth", "t.edges"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(d.join("x.csv")).unwrap().starts_with("X1,X2,"));

    let o = pcp(
        d,
        &[
            "discover", "--data", "x.csv", "--alpha", "0.2", "--lmax", "2", "--variant", "pcp", "--out", "g.edges",
            "--fdr-q", "0.1", "--pruned", "p.edges",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let graph = fs::read_to_string(d.join("g.edges")).unwrap();
    assert!(graph.starts_with("# vertices: X1 X2"));
    let hyps = fs::read_to_string(d.join("g.edges.hypotheses.csv")).unwrap();
    assert!(hyps.starts_with("id,p_value,edges\n"));
    assert!(d.join("p.edges").exists());

    let o = pcp(
        d,
        &["evaluate", "--estimate", "g.edges", "--truth", "t.edges", "--hypotheses", "g.edges.hypotheses.csv"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("shd = "));
    for key in ["alpha_star = ", "uc = ", "oc = ", "ue = ", "oe = "] {
        assert!(text.contains(key), "{key} missing from {text}");
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = pcp(d, &["simulate", "--vertices", "6", "--samples", "500", "--data", "x.csv"]);
    assert_eq!(code(&o), 0);
    fs::write(d.join("run.cfg"), "# discover defaults\ndata = x.csv\nvariant = nonsense\nout = g.edges\n").unwrap();

    let o = pcp(d, &["discover", "--config", "run.cfg"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown variant"));

    let o = pcp(d, &["discover", "--config", "run.cfg", "--variant", "legacy-pc"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("g.edges").exists());
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&pcp(d, &["discover", "--data", "missing.csv"])), 1);

    fs::write(d.join("bad.csv"), "a,b\n1,2\n3,x\n").unwrap();
    assert_eq!(code(&pcp(d, &["discover", "--data", "bad.csv"])), 1);

    fs::write(d.join("const.csv"), "a,b\n1,2\n1,3\n1,5\n1,1\n1,0\n").unwrap();
    assert_eq!(code(&pcp(d, &["discover", "--data", "const.csv"])), 1);

    fs::write(d.join("g.edges"), "A -> B\n").unwrap();
    assert_eq!(code(&pcp(d, &["evaluate", "--estimate", "g.edges", "--truth", "g.edges"])), 1);

    assert_eq!(code(&pcp(d, &["discover", "--bogus-flag"])), 1);
    assert_eq!(code(&pcp(d, &["--help"])), 0);
}

#[test]
fn discover_prints_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&pcp(d, &["simulate", "--vertices", "5", "--samples", "300", "--data", "x.csv"])), 0);
    let o = pcp(d, &["discover", "--data", "x.csv", "--test", "spearman", "--lmax", "none"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("# vertices: X1 X2 X3 X4 X5\n"));
}

#[test]
fn oracle_check_and_small_bench() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = pcp(d, &["oracle-check", "--trials", "40", "--max-vertices", "9"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("40/40"));

    let o = pcp(d, &["bench", "--suite", "lowdim", "--seeds", "1,2", "--out", "b"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = fs::read_to_string(d.join("b/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 13);
    for f in ["curves.csv", "summary.csv", "timing.csv"] {
        assert!(d.join("b").join(f).exists());
    }
}

#[test]
fn invalid_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_pcp"))
        .current_dir(dir.path())
        .env("PCP_THREADS", "zero")
        .args(["oracle-check", "--trials", "1"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}
