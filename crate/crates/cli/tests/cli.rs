use std::path::Path;
use std::process::Command;

fn clumb(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_clumb"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

const CONFIG: &str = "users = 8\nclusters = 2\ndim = 3\npool_size = 30\nper_round_arms = 5\n\
                      horizon = 300\ntrials = 2\nseed = 4\neps_star = 0.05\narm_sigma = 0.5\n\
                      policies = rclumb, club, oracle\n";

#[test]
fn run_writes_reproducible_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("exp.conf"), CONFIG).unwrap();
    for dir in ["a", "b"] {
        let out = clumb(&["run", "--config", "exp.conf", "--out", dir, "--workers", "2"], tmp.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("rclumb"));
    }
    for file in ["trials.csv", "summary.csv"] {
        let a = std::fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let c = clumb(&["run", "--config", "exp.conf", "--out", "c", "--seed", "99", "--trials", "1"], tmp.path());
    assert!(c.status.success());
    let summary = std::fs::read_to_string(tmp.path().join("c/summary.csv")).unwrap();
    assert!(summary.starts_with("policy,round,mean_regret,sem_regret,mean_reward,sem_reward\n"));
}

#[test]
fn diag_t0_prints_json() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("exp.conf"), CONFIG).unwrap();
    let out = clumb(&["diag-t0", "--config", "exp.conf"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["users"], 8);
    assert!(v["diagnostics"]["gamma"].as_f64().unwrap() > 0.0);
}

#[test]
fn export_instance_writes_file() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("exp.conf"), CONFIG).unwrap();
    let out = clumb(&["export-instance", "--config", "exp.conf", "--out", "inst.txt"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(tmp.path().join("inst.txt")).unwrap();
    assert!(text.starts_with("clumb-instance 1"));
}

#[test]
fn verify_single_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let out = clumb(&["verify", "--suite", "f1", "--out", "reports"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["suite"], "f1");
    assert_eq!(v["status"], "pass");
    assert!(tmp.path().join("reports/f1.json").exists());
}

#[test]
fn bad_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.conf"), "policies = nope\n").unwrap();
    let out = clumb(&["run", "--config", "bad.conf"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = clumb(&["verify", "--suite", "bogus"], tmp.path());
    assert!(!out.status.success());
}

#[test]
fn bundled_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["quick.conf", "desk_scale.conf", "movielens_case2.conf"] {
        clumb::harness::ExperimentConfig::load(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let quick = clumb(&["diag-t0", "--config", "quick.conf"], &dir);
    assert!(quick.status.success(), "{}", String::from_utf8_lossy(&quick.stderr));
}
