use std::path::Path;
use std::process::{Command, Output};

fn adamlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adamlab"))
        .args(args)
        .env_remove("ADAMLAB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn fig1_preset_crosses_at_59() {
    let o = adamlab(&["counterexample", "fig1"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("first crossing t=59 "), "{}", stdout(&o));
}

#[test]
fn analytic_preset_is_31() {
    let o = adamlab(&["counterexample", "analytic"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "T=31");
}

#[test]
fn fig1_profile_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig1.csv");
    let o = adamlab(&["counterexample", "fig1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,s,bound,margin");
    assert_eq!(lines.len(), 201);
    let first_positive = lines[1..]
        .iter()
        .find(|l| !l.rsplit(',').next().unwrap().starts_with('-'))
        .unwrap();
    assert!(first_positive.starts_with("59,"));
}

#[test]
fn trace_fig1_has_200_rows() {
    let o = adamlab(&[
        "trace", "--beta1", "0.1", "--beta2", "0.1", "--lambda-m", "1-1e-8", "--lambda-g", "1-1e-8", "--source",
        "invsqrt", "--T", "200",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,g,m,v,m_hat,v_hat,s,kb_bound,new_bound");
    assert_eq!(lines.len(), 201);
    assert!(lines[200].starts_with("200,"));
}

#[test]
fn trace_single_constant_step() {
    let o = adamlab(&["trace", "--T", "1", "--source", "constant:1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    assert_eq!(row[6], "1");
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn malformed_flag_is_config_error_without_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = adamlab(&["trace", "--beta1", "zero.one", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn invalid_hyperparameter_is_config_error() {
    let o = adamlab(&["trace", "--beta1", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_gradient_file_is_io_error() {
    let o = adamlab(&["trace", "--source", "file:/nonexistent/grads.txt"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unwritable_output_is_io_error() {
    let o = adamlab(&["region", "--resolution", "2", "--out", "/nonexistent/dir/r.csv"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn region_400_has_160000_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("region.csv");
    let o = adamlab(&["region", "--resolution", "400", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 160_001);
    assert_eq!(text.lines().next().unwrap(), "beta1,beta2,bock_scope,result33_scope,lemma31,lemma32");
}

#[test]
fn out_dir_env_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_adamlab"))
        .args(["region", "--resolution", "2"])
        .env("ADAMLAB_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(Path::new(&dir.path().join("region.csv")).exists());
}

#[test]
fn output_is_byte_identical_across_runs() {
    let a = adamlab(&["counterexample", "search", "--budget", "10", "--seeds", "1,2"]);
    let b = adamlab(&["counterexample", "search", "--budget", "10", "--seeds", "1,2"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("beta1,beta2,lambda,seed,crossing_t,margin\n"));
}

#[test]
fn verify_out_of_scope_witness_fails() {
    let o = adamlab(&["verify", "--beta1", "0.5", "--beta2", "0.5", "--lemmas", "L32"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("L32,0.5,0.5,"), "{row}");
}

#[test]
fn verify_empty_cell_list() {
    let o = adamlab(&["verify", "--cells", ""]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "lemma_id,beta1,beta2,seed,T,first_violation_t,max_slack_violation\n");
}

#[test]
fn verify_green_grid_passes() {
    let o = adamlab(&["verify", "--grid", "6", "--seeds", "0..2", "--T", "300"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().count() > 50);
}

#[test]
fn logt_search_finds_nothing() {
    let o = adamlab(&[
        "counterexample", "search", "--bound", "logt", "--beta1", "0.7:0.99", "--beta2", "0.5:0.9999", "--lambda",
        "0.5:1", "--family", "nonnegative", "--budget", "30", "--T", "500",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn oco_runs_all_optimizers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    std::fs::write(&cfg, "dim = 2\nfamily = fixed_quadratic\ncenter = 1\ncurvature = 1\nhorizon = 100\nseed = 0\n").unwrap();
    let out = dir.path().join("regret.csv");
    let o = adamlab(&[
        "oco", "--config", cfg.to_str().unwrap(), "--optimizers", "adam,amsgrad,gd", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for kind in ["adam", "amsgrad", "gd"] {
        let text = std::fs::read_to_string(dir.path().join(format!("regret-{kind}.csv"))).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,loss,cum_regret,avg_regret");
        assert_eq!(text.lines().count(), 101);
    }
    // several optimizers and nowhere to put them
    let o = adamlab(&["oco", "--config", cfg.to_str().unwrap(), "--optimizers", "adam,gd"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oco_bad_config_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "dim = 2\nfamily = cubic\nhorizon = 3\n").unwrap();
    let o = adamlab(&["oco", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
