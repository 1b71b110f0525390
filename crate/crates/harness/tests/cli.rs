use std::path::PathBuf;
use std::process::Command;

fn koopact(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_koopact")).args(args).output().unwrap()
}

fn scratch(tag: &str) -> PathBuf {
    std::env::temp_dir().join(format!("koopact-cli-{tag}-{}", std::process::id()))
}

#[test]
fn verify_exit_codes() {
    let ok = koopact(&["verify", "--suite", "recursion"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("[PASS]"));
    assert_eq!(koopact(&["verify", "--suite", "bogus"]).status.code(), Some(1));
}

#[test]
fn run_and_replay_a_preset() {
    let dir = scratch("run");
    let out = koopact(&["run", "--config", "preset:linear_regulation", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("summary.csv").is_file());
    assert!(!dir.join("timing.csv").exists());
    let plot = dir.join("plot.csv");
    let replay = koopact(&["replay", "--from", dir.to_str().unwrap(), "--out", plot.to_str().unwrap()]);
    assert_eq!(replay.status.code(), Some(0));
    assert!(plot.is_file());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn identify_writes_a_loadable_model() {
    let dir = scratch("identify");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("linear.toml");
    std::fs::write(&cfg, koopact::presets::LINEAR_REGULATION).unwrap();
    let model = dir.join("model.txt");
    let out = koopact(&["identify", "--config", cfg.to_str().unwrap(), "--out", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&model).unwrap();
    koopact_core::lifting::NominalModel::from_text(&text).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn missing_config_is_a_run_error() {
    let out = koopact(&["run", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
