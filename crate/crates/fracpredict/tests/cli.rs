use std::path::Path;
use std::process::{Command, Output};

const QUICK: &str = r#"
hurst = 0.7
n_obs = 8
sim_refinement = 2
n_test = 500
hidden = [8]

[train]
n_batches = 10
batch_size = 128
"#;

fn fracpredict(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracpredict")).current_dir(dir).args(args).output().unwrap()
}

fn quick_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("quick.toml"), QUICK).unwrap();
    dir
}

fn data_section(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = quick_dir();
    std::fs::write(dir.path().join("bad.toml"), "hurst = 1.2\n").unwrap();
    std::fs::write(dir.path().join("typo.toml"), "hurts = 0.3\n").unwrap();
    for args in [
        &["--config", "bad.toml", "predict-exact"][..],
        &["--config", "typo.toml", "predict-exact"],
        &["--config", "missing.toml", "predict-exact"],
        &["table", "5"],
        &["--scale", "huge", "train"],
    ] {
        let out = fracpredict(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn numerical_failures_exit_with_3() {
    let dir = quick_dir();
    std::fs::write(dir.path().join("flat.toml"), "[process]\nkind = \"fou\"\nvolatility = 0.0\n").unwrap();
    let out = fracpredict(dir.path(), &["--config", "flat.toml", "predict-continuous"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn outputs_carry_a_config_header() {
    let dir = quick_dir();
    for (cmd, file) in
        [("predict-exact", "weights.csv"), ("predict-continuous", "psi.csv"), ("train", "loss.csv"), ("evaluate", "report.csv")]
    {
        let out = fracpredict(dir.path(), &["--config", "quick.toml", "--out", "o", cmd]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(dir.path().join("o").join(file)).unwrap();
        assert!(text.starts_with("# config: process=fbm h=0.7"), "{file}: {text}");
    }
    let weights = std::fs::read_to_string(dir.path().join("o/weights.csv")).unwrap();
    assert_eq!(data_section(&weights).lines().count(), 9);
}

#[test]
fn saved_network_evaluates_like_the_training_run() {
    let dir = quick_dir();
    let run = |args: &[&str]| {
        let out = fracpredict(dir.path(), args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["--config", "quick.toml", "--out", "a", "evaluate"]);
    run(&["--config", "quick.toml", "--out", "b", "train"]);
    run(&["--config", "quick.toml", "--out", "b", "evaluate", "--network", "b/network.fpnn"]);
    let a = std::fs::read_to_string(dir.path().join("a/report.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b/report.csv")).unwrap();
    assert_eq!(data_section(&a), data_section(&b));
}

#[test]
fn simulate_is_reproducible_and_seed_sensitive() {
    let dir = quick_dir();
    let read = |sub: &str, seed: &str| {
        let out = fracpredict(dir.path(), &["--config", "quick.toml", "--seed", seed, "--out", sub, "simulate", "--paths", "4"]);
        assert!(out.status.success());
        std::fs::read_to_string(dir.path().join(sub).join("paths.csv")).unwrap()
    };
    let a = read("a", "5");
    assert_eq!(a, read("b", "5"));
    assert_ne!(a, read("c", "6"));
    assert_eq!(data_section(&a).lines().count(), 5);

    let out = fracpredict(dir.path(), &["--config", "quick.toml", "--out", "d", "simulate", "--paths", "4", "--format", "binary"]);
    assert!(out.status.success());
    let bytes = std::fs::read(dir.path().join("d/paths.fpb")).unwrap();
    assert_eq!(&bytes[..4], b"FPB1");
}

#[test]
fn parallel_output_does_not_depend_on_thread_count() {
    let dir = quick_dir();
    let run = |threads: &str, sub: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_fracpredict"))
            .current_dir(dir.path())
            .env("FRACPREDICT_THREADS", threads)
            .args(["--config", "quick.toml", "--out", sub, "compare", "--horizons", "6,7,8"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(dir.path().join(sub).join("compare.csv")).unwrap()
    };
    let one = run("1", "one");
    let three = run("3", "three");
    assert_eq!(one, three);
    assert_eq!(data_section(&one).lines().count(), 4);
}
