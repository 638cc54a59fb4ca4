use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn glorenz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glorenz"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small enough for a test, large enough for every protocol to produce fits.
const SMALL: &str = r#"
n = 128
m = 64
targets = 2
starts = 100
cap = 1e7
occupation_iterates = 100000
occupation_chunks = 3
trajectories = 10000
window = 16
points = 120
sandwich_targets = 2
sandwich_starts = 10
birkhoff_returns = 20000
"#;

fn config(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, format!("{SMALL}{extra}")).unwrap();
    p
}

/// All files of a run directory, by name.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn validate_reference_model_lists_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let out = glorenz(&["validate", "--out", path(dir.path())]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest: toml::Table = fs::read_to_string(dir.path().join("manifest-validate.toml"))
        .unwrap()
        .parse()
        .unwrap();
    let derived = manifest["derived"].as_table().unwrap();
    assert_eq!(derived["alpha"].as_float(), Some(0.6));
    assert_eq!(derived["beta"].as_float(), Some(1.5));
    assert_eq!(manifest["status"].as_str(), Some("ok"));
    assert_eq!(
        manifest["library_version"].as_str(),
        Some(env!("CARGO_PKG_VERSION"))
    );
}

#[test]
fn classical_eigenvalues_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("classical.toml");
    fs::write(&cfg, "experiment = \"validate\"\nlambda1 = 11.83\nlambda2 = -22.83\nlambda3 = -2.6666666666666665\n").unwrap();
    let out = glorenz(&["--config", path(&cfg), "--out", path(dir.path())]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("eigenvalue ordering"), "{err}");
    let manifest = fs::read_to_string(dir.path().join("manifest-validate.toml")).unwrap();
    assert!(manifest.contains("status = \"failed\""));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("experiment = \"density\"\nbogus = 3\n", "bogus"),
        ("experiment = \"hitting-map\"\n", "seed"),
        (
            "experiment = \"hitting-map\"\nseed = 1\nradii = [0.01, 0.02]\n",
            "radii",
        ),
        ("experiment = \"srb\"\nsteps = 0\n", "steps"),
    ];
    for (text, field) in cases {
        let cfg = dir.path().join("bad.toml");
        fs::write(&cfg, text).unwrap();
        let out = glorenz(&["--config", path(&cfg), "--out", path(dir.path())]);
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(
            String::from_utf8_lossy(&out.stderr).contains(&format!("`{field}`")),
            "{text}"
        );
    }
}

#[test]
fn report_on_empty_directory_is_missing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = glorenz(&["report", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no experiment artifacts"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let base = tempfile::tempdir().unwrap();
    let cfg = config(base.path(), "seed = 11\n");
    let mut snaps = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let dir = base.path().join(name);
        for e in ["hitting-map", "hitting-flow", "correlations", "recurrence"] {
            let out = glorenz(&[
                e,
                "--config",
                path(&cfg),
                "--out",
                path(&dir),
                "--threads",
                threads,
            ]);
            assert!(
                out.status.success(),
                "{e}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
        snaps.push(snapshot(&dir));
    }
    assert!(snaps[0].len() >= 8);
    assert_eq!(snaps[0], snaps[1]);
    assert_eq!(snaps[0], snaps[2]);
    // manifests do not record the thread hint; only the output path differs
    let m = |n: &str| {
        let text =
            fs::read_to_string(base.path().join(n).join("manifest-hitting-map.toml")).unwrap();
        text.lines()
            .filter(|l| !l.starts_with("out = "))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(m("a"), m("c"));
}

#[test]
fn seed_flag_changes_samples_and_manifest_reproduces_the_run() {
    let base = tempfile::tempdir().unwrap();
    let cfg = config(base.path(), "seed = 1\n");
    let (a, b, c) = (
        base.path().join("a"),
        base.path().join("b"),
        base.path().join("c"),
    );
    assert!(
        glorenz(&["hitting-map", "--config", path(&cfg), "--out", path(&a)])
            .status
            .success()
    );
    assert!(glorenz(&[
        "hitting-map",
        "--config",
        path(&cfg),
        "--out",
        path(&b),
        "--seed",
        "2"
    ])
    .status
    .success());
    let manifest = a.join("manifest-hitting-map.toml");
    assert!(glorenz(&["--config", path(&manifest), "--out", path(&c)])
        .status
        .success());
    let samples = |d: &Path| fs::read(d.join("hitting-map.samples.csv")).unwrap();
    assert_ne!(samples(&a), samples(&b));
    assert_eq!(samples(&a), samples(&c));
}

#[test]
fn samples_and_fits_have_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "seed = 5\n");
    assert!(glorenz(&[
        "hitting-map",
        "--config",
        path(&cfg),
        "--out",
        path(dir.path())
    ])
    .status
    .success());
    let header = |f: &str| {
        fs::read_to_string(dir.path().join(f))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(
        header("hitting-map.samples.csv"),
        "experiment_id,target_x,target_y,r,sample_id,time,censored"
    );
    assert_eq!(
        header("hitting-map.fits.csv"),
        "experiment_id,slope,ci,n_samples,quality"
    );
}

#[test]
fn report_has_a_section_per_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "seed = 3\n");
    for e in ["hitting-map", "density", "saussol"] {
        let out = glorenz(&[e, "--config", path(&cfg), "--out", path(dir.path())]);
        assert!(
            out.status.success(),
            "{e}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = glorenz(&["report", "--out", path(dir.path())]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for s in ["== hitting-map ==", "== density ==", "== saussol =="] {
        assert!(text.contains(s), "{text}");
    }
    let table = text.lines().find(|l| l.starts_with("target ")).unwrap();
    for col in ["slope", "d_hat", "ratio"] {
        assert!(table.contains(col));
    }
    assert!(text.lines().filter(|l| l.starts_with("target-")).count() == 2);
    assert!(dir.path().join("report.txt").exists());
}

#[test]
fn oracle_systems_run_without_model_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "seed = 4\nsystem = \"baker\"\n");
    let out = glorenz(&[
        "recurrence",
        "--config",
        path(&cfg),
        "--out",
        path(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let metrics = fs::read_to_string(dir.path().join("recurrence.metrics.csv")).unwrap();
    assert!(
        metrics.contains("recurrence,reference_dimension,2.0"),
        "{metrics}"
    );
    // the flow only exists for the model
    let out = glorenz(&[
        "hitting-flow",
        "--config",
        path(&cfg),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(4));
}
