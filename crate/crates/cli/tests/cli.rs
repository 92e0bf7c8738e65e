use std::path::Path;
use std::process::{Command, Output};

fn glavg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glavg"))
        .args(args)
        .current_dir(dir)
        .env_remove("GLAVG_SEED")
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "eps = 0.05\nT = 0.05\nm = 4\ndt = 0.001\ndelta = 0.05\n";

#[test]
fn validate_defaults_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = glavg(&["validate", "--quiet", "--out", "o"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(dir.path().join("o/validate_report.json")).unwrap();
    assert!(report.contains("\"passed\": true"));
    assert!(!report.contains("\"passed\": false"));
    assert!(dir.path().join("o/manifest.json").exists());
}

#[test]
fn dissipativity_violation_exits_one_naming_condition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "bad.toml",
        "eps = 0.01\nT = 1\n[coupling]\nb_g = 50\n",
    );
    let out = glavg(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("condition A4: lambda1 - L_g must be positive"),
        "{err}"
    );
}

#[test]
fn stability_index_out_of_range_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "bad.toml", "eps = 0.01\nT = 1\nalpha = 2.5\n");
    let out = glavg(&["validate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha out of (1,2)"));
}

#[test]
fn converge_with_slow_only_coupling_is_all_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        format!("{SMALL}[coupling]\npreset = \"slow_only\"\n[study]\neps_grid = [0.05, 0.02]\n");
    let cfg = config(dir.path(), "c.toml", &text);
    let out = glavg(
        &[
            "converge", "--quiet", "--paths", "3", "--config", &cfg, "--out", "o",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(dir.path().join("o/converge.csv")).unwrap();
    let rows: Vec<&str> = table
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[1], "3");
        for v in &cells[3..] {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{row}");
        }
    }
}

#[test]
fn simulate_is_byte_identical_and_reproducible_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "c.toml", SMALL);
    for o in ["a", "b"] {
        let out = glavg(
            &[
                "simulate", "--quiet", "--seed", "42", "--config", &cfg, "--out", o,
            ],
            dir.path(),
        );
        assert!(out.status.success());
    }
    let manifest = dir
        .path()
        .join("a/manifest.json")
        .to_string_lossy()
        .into_owned();
    let out = glavg(
        &["simulate", "--quiet", "--config", &manifest, "--out", "c"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in ["x.csv", "y.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("b").join(file)).unwrap());
        assert_eq!(a, std::fs::read(dir.path().join("c").join(file)).unwrap());
        assert!(a.starts_with(b"# manifest=manifest.json\nt,c1,c2,c3,c4,s1,s2,s3,s4\n"));
    }
    let other = glavg(
        &[
            "simulate", "--quiet", "--seed", "43", "--config", &cfg, "--out", "d",
        ],
        dir.path(),
    );
    assert!(other.status.success());
    assert_ne!(
        std::fs::read(dir.path().join("a/x.csv")).unwrap(),
        std::fs::read(dir.path().join("d/x.csv")).unwrap()
    );
}

#[test]
fn flagged_abort_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}[noise]\nslow_c0 = 1e20\n[coupling]\npreset = \"slow_only\"\n[study]\neps_grid = [0.05]\n");
    let cfg = config(dir.path(), "c.toml", &text);
    let out = glavg(&["converge", "--paths", "3", "--config", &cfg], dir.path());
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("study aborted"));
}

#[test]
fn other_subcommands_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}[frozen]\nburn_in = 0.2\naveraging_time = 0.2\n[study]\nm_grid = [2, 4]\ndelta_grid = [0.05, 0.025]\n");
    let cfg = config(dir.path(), "c.toml", &text);
    for (cmd, file) in [
        ("frozen", "y_frozen.csv"),
        ("fbar", "fbar.csv"),
        ("averaged", "x_bar.csv"),
        ("galerkin", "galerkin.csv"),
        ("delta-sweep", "delta_sweep.csv"),
    ] {
        let out = glavg(
            &[
                cmd, "--quiet", "--paths", "2", "--jsonl", "--config", &cfg, "--out", cmd,
            ],
            dir.path(),
        );
        assert!(
            out.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(dir.path().join(cmd).join(file).exists(), "{cmd}");
    }
    assert!(dir.path().join("frozen/y_frozen.jsonl").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "c.toml", "eps = 0.01\nT = 1\nsigma = 2\n");
    let out = glavg(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));
}
