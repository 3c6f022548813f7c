use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn beamlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beamlab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    beamlab(&args)
}

fn parse_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|t| t.parse().unwrap()).collect())
        .collect()
}

const ELASTIC_FREE: &str = r#"
run = ["spectrum"]
[model]
law = "elastic"
boundary = "free"
[discretization]
n_elements = 8
[spectrum]
classify = false
"#;

#[test]
fn elastic_free_spectrum_is_conjugate_paired() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), ELASTIC_FREE);
    let out = run(&config, &dir.path().join("out"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let text = std::fs::read_to_string(dir.path().join("out/spectrum.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("re,im"));
    let rows = parse_rows(&text);
    assert_eq!(rows.len(), 2 * 8 * 2);
    let scale = rows.iter().map(|r| r[1].abs()).fold(0.0, f64::max);
    for r in &rows {
        assert!(r[0].abs() <= 1e-10 * scale, "conservative spectrum off the axis: {r:?}");
        let partner = rows
            .iter()
            .map(|s| (s[0] - r[0]).abs() + (s[1] + r[1]).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(partner <= 1e-10 * scale, "no conjugate for {r:?}");
    }

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["tool"]["name"], "beamlab");
    assert_eq!(report["parameters"]["model"]["law"], "elastic");
    assert_eq!(report["parameters"]["tip"]["gamma_star"], 0.5);
    assert!(report["spectrum"]["first_frequency"].as_f64().unwrap() > 3.0);
}

#[test]
fn kelvin_voigt_compare_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run = [\"compare\"]\n[model]\nlaw = \"kelvin_voigt\"\n[compare]\nlevels = [8, 16, 32]\n[assert]\nmatch = true\n",
    );
    let out = run(&config, &dir.path().join("out"), &["--assert"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["compare"]["match"], "agree");
    assert_eq!(report["compare"]["hybrid"]["verdict"], "exponentially_stable");
    assert_eq!(report["assertions"][0]["passed"], true);
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[tip]\ngamaa = 1.0\n");
    let out = run(&config, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamaa"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_config_and_bad_arguments_exit_1() {
    assert_eq!(beamlab(&["run", "/nonexistent/scenario.toml"]).status.code(), Some(1));
    assert_eq!(beamlab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(beamlab(&["--version"]).status.code(), Some(0));
}

#[test]
fn resolvent_window_above_ceiling_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run = [\"resolvent\"]\n[discretization]\nn_elements = 4\n[resolvent]\nlambda_min = 1.0\nlambda_max = 1e6\n",
    );
    let out = run(&config, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resolvent"));
}

#[test]
fn failed_assertion_exits_3_only_under_assert() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{ELASTIC_FREE}[assert]\nmax_abscissa = -1.0\n");
    let config = write_config(dir.path(), &text);
    assert_eq!(run(&config, &dir.path().join("a"), &[]).status.code(), Some(0));
    let out = run(&config, &dir.path().join("b"), &["--assert"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_abscissa"));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
run = ["spectrum", "resolvent", "simulate", "decay"]
[model]
law = "thermo_type_i"
[discretization]
n_elements = 8
levels = [4, 8, 16]
[resolvent]
points_per_decade = 10
decades = 1.5
[simulate]
dt = 0.02
t_final = 4.0
output_every = 5
[decay]
model = "exponential"
t0 = 0.5
t1 = 4.0
"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&config, out, &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["spectrum.csv", "resolvent.csv", "energy.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name} differs between runs");
    }
    let energy = std::fs::read_to_string(a.join("energy.csv")).unwrap();
    assert_eq!(energy.lines().next(), Some("t,energy,dissipation_cumulative,balance_residual"));
    let rows = parse_rows(&energy);
    assert_eq!(rows.len(), 41);
    assert!((rows[1][0] - 0.1).abs() < 1e-15);
    for r in &rows {
        assert!((r[1] + r[2] - rows[0][1]).abs() <= 1e-9 * rows[0][1], "ledger broken: {r:?}");
    }
    let resolvent = std::fs::read_to_string(a.join("resolvent.csv")).unwrap();
    assert_eq!(resolvent.lines().next(), Some("lambda,norm"));
}

#[test]
fn export_matrices_writes_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[model]\nlaw = \"kelvin_voigt\"\n[discretization]\nn_elements = 4\n");
    let out_dir = dir.path().join("m");
    let out = beamlab(&["export-matrices", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let read = |name: &str| -> (usize, Vec<(usize, usize, f64)>) {
        let text = std::fs::read_to_string(out_dir.join(name)).unwrap();
        let mut lines = text.lines();
        let header: Vec<usize> = lines.next().unwrap()[2..].split(' ').map(|t| t.parse().unwrap()).collect();
        assert_eq!(header[0], header[1]);
        let entries: Vec<(usize, usize, f64)> = lines
            .map(|l| {
                let t: Vec<&str> = l.split(' ').collect();
                (t[0].parse().unwrap(), t[1].parse().unwrap(), t[2].parse().unwrap())
            })
            .collect();
        assert_eq!(entries.len(), header[2]);
        (header[0], entries)
    };
    let (n, e) = read("E.txt");
    let (m, s) = read("S.txt");
    // Two Hermite dofs on each of the 4 unclamped nodes, doubled by the velocities.
    assert_eq!(n, 16);
    assert_eq!(m, n);
    let lookup = |v: &[(usize, usize, f64)], i: usize, j: usize| {
        v.iter().find(|t| t.0 == i && t.1 == j).map_or(0.0, |t| t.2)
    };
    for &(i, j, x) in &e {
        assert_eq!(lookup(&e, j, i), x, "E not symmetric at ({i}, {j})");
        assert!(x != 0.0);
    }
    // KV: S = J − R with R positive semidefinite, so the diagonal is nonpositive.
    for i in 0..n {
        assert!(lookup(&s, i, i) <= 0.0);
    }
}
