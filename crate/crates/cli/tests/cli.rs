use std::path::Path;
use std::process::{Command, Output};

use morphofilter_cli::store::RunManifest;

const TINY: &str = r#"{
  "problem": {"nelx": 8, "nely": 4, "bc_preset": "cantilever"},
  "schedule": {"t_hi": 20.0, "t_lo": 0.5, "count": 4},
  "sampling": {"n_equil": 400, "n_samples": 60, "stride": 4},
  "reference": {"sampling": {"n_equil": 400, "n_samples": 100, "stride": 4}},
  "seed": 11
}"#;

fn morphofilter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphofilter"))
        .args(args)
        .env_remove("MORPHOFILTER_JOBS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn run_all(cfg: &str, out: &Path) {
    let out = out.to_str().unwrap();
    for cmd in ["optimize", "sweep", "reference-entropy", "analyze"] {
        let o = morphofilter(&["--config", cfg, "--output", out, cmd]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for target in ["x_star", "mean_density", "entropy@1", "condensation", "importance"] {
        let o = morphofilter(&["--output", out, "render", target]);
        assert_eq!(code(&o), 0, "render {target}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn missing_loads_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"problem": {"nelx": 4, "nely": 2, "supports": [0, 1, 2, 3]}}"#);
    let o = morphofilter(&["--config", &cfg, "--output", tmp.path().join("r").to_str().unwrap(), "optimize"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("loads"));
}

#[test]
fn unknown_key_and_missing_config_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"problem": {"nelx": 4, "nely": 2, "bc_preset": "cantilever"}, "smapling": {}}"#,
    );
    assert_eq!(code(&morphofilter(&["--config", &cfg, "--output", "x", "optimize"])), 2);
    assert_eq!(code(&morphofilter(&["optimize"])), 2);
}

#[test]
fn analyze_without_reference_names_the_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let out = tmp.path().join("run");
    let out = out.to_str().unwrap();
    assert_eq!(code(&morphofilter(&["--config", &cfg, "--output", out, "sweep"])), 0);
    let o = morphofilter(&["--output", out, "analyze"]);
    assert_eq!(code(&o), 4);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("reference/reference.json"), "{err}");
    assert!(err.contains("reference-entropy"), "{err}");
}

#[test]
fn render_importance_needs_optimum() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let out = tmp.path().join("run");
    let out = out.to_str().unwrap();
    for cmd in ["sweep", "reference-entropy", "analyze"] {
        assert_eq!(code(&morphofilter(&["--config", &cfg, "--output", out, cmd])), 0);
    }
    let o = morphofilter(&["--output", out, "render", "importance"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("optimize"));
    assert_eq!(code(&morphofilter(&["--output", out, "render", "condensation"])), 0);
}

#[test]
fn render_on_missing_run_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let out = tmp.path().join("nowhere");
    let o = morphofilter(&["--config", &cfg, "--output", out.to_str().unwrap(), "render", "x_star"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn bad_render_target_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let out = tmp.path().join("run");
    let out = out.to_str().unwrap();
    assert_eq!(code(&morphofilter(&["--config", &cfg, "--output", out, "optimize"])), 0);
    assert_eq!(code(&morphofilter(&["--output", out, "render", "sparkles"])), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_all(&cfg, &a);
    run_all(&cfg, &b);

    let read = |d: &Path| -> RunManifest { serde_json::from_slice(&std::fs::read(d.join("manifest.json")).unwrap()).unwrap() };
    let (ma, mb) = (read(&a), read(&b));
    assert_eq!(ma.stages, mb.stages);
    assert!(ma.files().count() > 20);
    for f in ma.files() {
        let bytes = std::fs::read(a.join(&f.path)).unwrap();
        assert_eq!(bytes, std::fs::read(b.join(&f.path)).unwrap(), "{}", f.path);
        assert_eq!(morphofilter_cli::store::sha256_hex(&bytes), f.sha256, "{}", f.path);
    }
}

#[test]
fn seed_flag_changes_sweep_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (out, seed) in [(&a, "1"), (&b, "2")] {
        let o = morphofilter(&["--config", &cfg, "--output", out.to_str().unwrap(), "--seed", seed, "sweep"]);
        assert_eq!(code(&o), 0);
    }
    let summary = |d: &Path| std::fs::read(d.join("sweep/summary.csv")).unwrap();
    assert_ne!(summary(&a), summary(&b));
}

#[test]
fn jobs_do_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        let o = morphofilter(&["--config", &cfg, "--output", out.to_str().unwrap(), "--jobs", jobs, "sweep"]);
        assert_eq!(code(&o), 0);
    }
    for f in ["sweep/summary.csv", "sweep/series.json", "sweep/t002_density.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}
