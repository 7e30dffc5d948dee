//! Command-line behaviour: exit codes, warnings and reproducible output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TORUS: &str = r#"
scenario = "torus-bgk"
dim = 1
particles = 4000
t_final = 2.0
seed = 11

[initial]
law = "dirac"
x = [0.5]
v = [1.0]

[snapshots]
count = 6
first = 0.1
"#;

fn workdir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn kh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinetic-harris"))
        .args(args)
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn run_into(cfg: &Path, out: &Path, workers: &str) -> Output {
    kh(&[
        "--workers",
        workers,
        "run",
        cfg.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
    ])
}

#[test]
fn invalid_config_exits_with_code_two() {
    let dir = workdir("invalid");
    let bad = "scenario = \"subgeometric-bgk\"\ndim = 1\nparticles = 100\nt_final = 1.0\nseed = 1\n\
               [potential]\nname = \"subquadratic\"\nc = 1.0\nbeta = 1.5\n\
               [initial]\nlaw = \"pareto\"\nscale = 1.0\nshape = 2.0\n";
    let cfg = write_config(&dir, bad);
    for cmd in ["run", "validate", "certificate"] {
        let out = kh(&[cmd, cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{cmd}: {}", text(&out.stderr));
        assert!(text(&out.stderr).contains("beta"), "{}", text(&out.stderr));
    }
}

#[test]
fn unknown_fields_and_missing_files_are_config_errors() {
    let dir = workdir("unknown");
    let cfg = write_config(&dir, &TORUS.replace("seed = 11", "seed = 11\ncolour = \"red\""));
    let out = kh(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("colour"), "{}", text(&out.stderr));
    let out = kh(&["validate", dir.join("absent.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_workers_is_rejected() {
    let dir = workdir("workers");
    let cfg = write_config(&dir, TORUS);
    let out = kh(&["--workers", "0", "validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let out = kh(&["validate", path.to_str().unwrap()]);
        let stdout = text(&out.stdout);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}: {stdout}{}",
            path.display(),
            text(&out.stderr)
        );
        assert!(!stdout.contains("FAIL"), "{stdout}");
    }
}

#[test]
fn ignored_sections_are_warned_about() {
    let dir = workdir("warn");
    let cfg = write_config(&dir, &format!("{TORUS}\n[kernel]\ngamma = 0.0\n"));
    let out = kh(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let all = text(&out.stdout) + &text(&out.stderr);
    assert!(all.contains("kernel is ignored"), "{all}");
}

#[test]
fn certificate_prints_audit() {
    let dir = workdir("certificate");
    let cfg = write_config(&dir, TORUS);
    let out = kh(&["certificate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("t_star = "), "{}", text(&out.stdout));
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let dir = workdir("reproducible");
    let cfg = write_config(&dir, TORUS);
    let mut csvs = Vec::new();
    for (i, workers) in ["1", "1", "3"].iter().enumerate() {
        let out_dir = dir.join(format!("out{i}"));
        let out = run_into(&cfg, &out_dir, workers);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
        for f in ["distances.csv", "summary.txt", "certificate.txt"] {
            assert!(out_dir.join(f).exists(), "missing {f}");
        }
        csvs.push(std::fs::read(out_dir.join("distances.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0], csvs[2]);
    let csv = String::from_utf8(csvs.swap_remove(0)).unwrap();
    assert!(csv.starts_with("t,"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn certificate_violation_exits_with_code_three() {
    // A subgeometric constant this small makes the curve fall below any
    // resolvable distance.
    let dir = workdir("violation");
    let cfg = r#"
scenario = "subgeometric-boltzmann"
dim = 1
particles = 4000
t_final = 2.0
seed = 5

[potential]
name = "superlinear"
c = 1.0
delta = 0.5

[kernel]
gamma = 0.0

[initial]
law = "pareto"
scale = 1.0
shape = 2.5

[snapshots]
count = 4

[binning]
bins_per_axis = 8

[certificate]
subgeometric_constant = 1e-9
"#;
    let cfg = write_config(&dir, cfg);
    let out = run_into(&cfg, &dir.join("out"), "1");
    assert_eq!(out.status.code(), Some(3), "{}{}", text(&out.stdout), text(&out.stderr));
}
