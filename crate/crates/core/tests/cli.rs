use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn geoscatter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoscatter"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// icosphere(2) OFF, its basis and a two-column signal file.
fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    let mesh = dir.path().join("sphere.off");
    assert!(geoscatter(&["mesh", "gen", "--icosphere", "2", "-o", p(&mesh)])
        .status
        .success());
    let basis = dir.path().join("sphere.gsb");
    let o = geoscatter(&["basis", "compute", p(&mesh), "--k", "60", "-o", p(&basis)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut csv = String::from("wave,flat\n");
    for i in 0..162 {
        csv.push_str(&format!("{},{}\n", (i as f64 * 0.21).sin(), 1.0));
    }
    fs::write(dir.path().join("signal.csv"), csv).unwrap();
    dir
}

#[test]
fn mesh_gen_counts() {
    let dir = TempDir::new().unwrap();
    let ico = dir.path().join("ico.off");
    let tor = dir.path().join("torus.off");
    assert!(geoscatter(&["mesh", "gen", "--icosphere", "3", "-o", p(&ico)])
        .status
        .success());
    assert!(
        geoscatter(&["mesh", "gen", "--torus", "16", "8", "2", "0.5", "-o", p(&tor)])
            .status
            .success()
    );

    let o = geoscatter(&["mesh", "validate", p(&ico)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("642 vertices, 1280 faces"));
    assert!(!stdout(&o).contains("FAIL"));
    let o = geoscatter(&["mesh", "validate", p(&tor)]);
    assert!(stdout(&o).contains("128 vertices, 256 faces"));

    let o = geoscatter(&["mesh", "gen", "--tetrahedron"]);
    assert!(stdout(&o).starts_with("OFF"));
}

#[test]
fn open_mesh_fails_validation() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("tri.off");
    fs::write(&path, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n").unwrap();
    let o = geoscatter(&["mesh", "validate", p(&path)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL") && stdout(&o).contains("boundary edge"));
}

#[test]
fn basis_is_clamped_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let mesh = dir.path().join("m.off");
    geoscatter(&["mesh", "gen", "--icosphere", "1", "-o", p(&mesh)]);
    let (a, b) = (dir.path().join("a.gsb"), dir.path().join("b.gsb"));
    let o = geoscatter(&["basis", "compute", p(&mesh), "--k", "1000", "-o", p(&a)]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning") && stderr(&o).contains("K = 42"));
    geoscatter(&["basis", "compute", p(&mesh), "--k", "1000", "-o", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn scatter_writes_coefficients_and_echo() {
    let dir = setup();
    let d = dir.path();
    let basis = d.join("sphere.gsb");
    let signal = d.join("signal.csv");
    let out = d.join("coef.csv");
    let o = geoscatter(&[
        "scatter",
        "--basis",
        p(&basis),
        "--signal",
        p(&signal),
        "-o",
        p(&out),
        "--J",
        "0",
        "--jmin",
        "-4",
        "--L",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let wave = fs::read_to_string(d.join("coef_wave.csv")).unwrap();
    assert_eq!(wave.lines().count(), 32);
    assert!(wave.lines().next().unwrap().starts_with("path,v0"));
    assert_eq!(wave.lines().nth(1).unwrap().split(',').count(), 163);
    let echo: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("coef.json")).unwrap()).unwrap();
    assert_eq!(echo["J"], 0);
    assert_eq!(echo["L"], 2);

    let out0 = d.join("zero.csv");
    geoscatter(&[
        "scatter",
        "--basis",
        p(&basis),
        "--signal",
        p(&signal),
        "-o",
        p(&out0),
        "--L",
        "0",
    ]);
    assert_eq!(fs::read_to_string(d.join("zero_flat.csv")).unwrap().lines().count(), 2);
}

#[test]
fn constant_signal_has_no_wavelet_energy() {
    let dir = setup();
    let d = dir.path();
    let out = d.join("nw.csv");
    let o = geoscatter(&[
        "scatter",
        "--basis",
        p(&d.join("sphere.gsb")),
        "--signal",
        p(&d.join("signal.csv")),
        "-o",
        p(&out),
        "--nonwindowed",
        "--L",
        "2",
        "--jmin",
        "-4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.join("nw_flat.csv")).unwrap();
    let rows: Vec<(String, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (path, v) = l.split_once(',').unwrap();
            (path.to_string(), v.parse().unwrap())
        })
        .collect();
    assert!(rows[0].1 > 1.0);
    for (path, v) in &rows[1..] {
        assert!(v.abs() <= 1e-10, "{path}: {v}");
    }
}

#[test]
fn config_file_and_exit_codes() {
    let dir = setup();
    let d = dir.path();
    let basis = d.join("sphere.gsb");
    let signal = d.join("signal.csv");
    let cfg = d.join("run.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"J": -1, "L": 1, "j_min": -3, "basis": "{}", "signal": "{}"}}"#,
            p(&basis),
            p(&signal)
        ),
    )
    .unwrap();
    let out = d.join("c.csv");
    let o = geoscatter(&["scatter", "--config", p(&cfg), "-o", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(d.join("c_wave.csv")).unwrap().lines().count(),
        1 + 1 + 3
    );

    fs::write(&cfg, r#"{"J": 0, "depht": 2}"#).unwrap();
    assert_eq!(geoscatter(&["scatter", "--config", p(&cfg)]).status.code(), Some(4));

    let missing = d.join("nope.gsb");
    let o = geoscatter(&["scatter", "--basis", p(&missing), "--signal", p(&signal)]);
    assert_eq!(o.status.code(), Some(3));

    let o = geoscatter(&[
        "scatter",
        "--basis",
        p(&basis),
        "--signal",
        p(&signal),
        "--L",
        "3",
        "--path-cap",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(5));

    let o = geoscatter(&["scatter", "--basis", p(&basis), "--signal", p(&signal), "--k", "500"]);
    assert_eq!(o.status.code(), Some(4));

    let o = geoscatter(&["demo", "mnist", "--per-class", "0"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn filters_dump_writes_each_filter() {
    let dir = setup();
    let d = dir.path();
    let out = d.join("filters");
    fs::create_dir(&out).unwrap();
    let o = geoscatter(&[
        "filters",
        "dump",
        "--basis",
        p(&d.join("sphere.gsb")),
        "--J",
        "0",
        "--jmin",
        "-2",
        "-o",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["lowpass.csv", "psi_-2.csv", "psi_-1.csv", "psi_0.csv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert_eq!(text.lines().count(), 61, "{name}");
    }
}

#[test]
fn verify_passes_for_other_seeds() {
    for seed in ["1", "7"] {
        let o = geoscatter(&[
            "verify",
            "--seed",
            seed,
            "--only",
            "filterbank.frame-isometry",
            "--only",
            "scattering.nonexpansive",
            "--only",
            "scattering.sbar-l2-bound",
        ]);
        assert!(o.status.success(), "seed {seed}: {}", stdout(&o));
        assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 3);
    }
    assert_eq!(
        geoscatter(&["verify", "--only", "no.such-check"]).status.code(),
        Some(4)
    );
}
