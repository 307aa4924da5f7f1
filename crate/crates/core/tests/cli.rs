use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use gdlspg::manifest::RunManifest;
use gdlspg::snapshot::SnapshotSet;

fn gdlspg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdlspg")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = gdlspg(args);
    assert!(
        out.status.success(),
        "gdlspg {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn metric(stdout: &str, name: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(name).map(|v| v.trim().parse().unwrap()))
        .unwrap_or_else(|| panic!("no {name} in {stdout:?}"))
}

#[test]
fn euler_pipeline_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (mesh, hier, fom, ae, rom) = (p(d, "m.msh"), p(d, "h.gdhy"), p(d, "f.gdss"), p(d, "a.gdae"), p(d, "r.gdss"));
    let start = Instant::now();
    ok(&["mesh-info", "--generate", "square:2", "--write", &mesh]);
    ok(&["coarsen", "--mesh", &mesh, "--nodes", "1", "--out", &hier]);
    let common = ["--case", "riemann", "--mesh", &mesh, "--final-time", "0.02"];
    let fom_args = [&["fom", "euler"][..], &common, &["--mu=-1.2,-0.3", "--out", &fom]].concat();
    ok(&fom_args);
    ok(&[
        "train", "--snapshots", &fom, "--hierarchy", &hier, "--widths", "4,4", "--latent", "2",
        "--epochs", "1", "--batch", "1", "--lr", "0.03", "--out", &ae,
    ]);
    let rom_args = [
        &["rom", "solve", "--method", "gd-lspg", "--model", &ae, "--hierarchy", &hier][..],
        &common,
        &["--mu=-1.2,-0.3", "--out", &rom],
    ]
    .concat();
    ok(&rom_args);
    let out = ok(&["metrics", "--fom", &fom, "--rom", &rom]);
    assert!(metric(&out, "state-prediction").is_finite());
    for f in ["m.msh", "h.gdhy", "f.gdss", "a.gdae", "r.gdss"] {
        assert!(d.join(format!("{f}.manifest.toml")).exists() || f == "m.msh", "{f} has no manifest");
    }
    assert!(start.elapsed() < Duration::from_secs(60));
}

#[test]
fn burgers_pod_pipeline_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (fom, basis, test, rom) = (p(d, "f.gdss"), p(d, "b.gdpb"), p(d, "t.gdss"), p(d, "r.gdss"));
    let grid = ["--cells", "16", "--dt", "0.07", "--final-time", "0.7"];
    ok(&[&["fom", "burgers", "--mu1", "4.3,5.0", "--mu2", "0.02", "--out", &fom][..], &grid].concat());
    ok(&["pod", "--snapshots", &fom, "--dim", "3", "--out", &basis]);
    ok(&[&["fom", "burgers", "--mu1", "4.6", "--mu2", "0.02", "--out", &test][..], &grid].concat());
    let rom_args = [
        &["rom", "solve", "--method", "pod-lspg", "--basis", &basis, "--case", "burgers", "--mu", "4.6,0.02"][..],
        &["--cells", "16", "--dt", "0.07", "--final-time", "0.7", "--out", &rom],
    ]
    .concat();
    ok(&rom_args);
    let m1 = p(d, "metrics.toml");
    let out = ok(&[
        "metrics", "--fom", &test, "--rom", &rom, "--method", "pod-lspg", "--latent-dim", "3",
        "--out", &m1,
    ]);
    let first = metric(&out, "state-prediction");
    assert!(first.is_finite() && first < 1.0);

    // replay the ROM run from its manifest and compare bit for bit
    let before = std::fs::read(d.join("r.gdss")).unwrap();
    let man = RunManifest::load(d.join("r.gdss.manifest.toml")).unwrap();
    let replay: Vec<&str> = man.args.iter().map(String::as_str).collect();
    ok(&replay);
    assert_eq!(std::fs::read(d.join("r.gdss")).unwrap(), before);
    let again = ok(&["metrics", "--fom", &test, "--rom", &rom]);
    assert_eq!(metric(&again, "state-prediction").to_bits(), first.to_bits());

    let csv = ok(&["export-csv", "--metrics", &m1]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("case,method,M,metric,value"));
    assert!(lines.next().unwrap().starts_with("burgers,pod-lspg,3,state-prediction,"));
}

#[test]
fn identical_files_have_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["fom", "burgers", "--mu1", "4.3", "--mu2", "0.02", "--cells", "8", "--final-time", "0.21", "--out", &p(d, "f.gdss")]);
    let out = ok(&["metrics", "--fom", &p(d, "f.gdss"), "--rom", &p(d, "f.gdss")]);
    assert_eq!(metric(&out, "state-prediction"), 0.0);
}

#[test]
fn exit_codes() {
    assert_eq!(gdlspg(&["mesh-info", "--bogus"]).status.code(), Some(2));
    assert_eq!(gdlspg(&[]).status.code(), Some(2));
    assert_eq!(gdlspg(&["--help"]).status.code(), Some(0));
    let missing = gdlspg(&["metrics", "--fom", "/nonexistent/a.gdss", "--rom", "/nonexistent/b.gdss"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(!missing.stderr.is_empty());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = p(d, "run.toml");
    std::fs::write(&cfg, "[fom.burgers]\ncells = 12\nfinal-time = 0.14\nmu2 = [0.02]\n").unwrap();
    ok(&["fom", "burgers", "--config", &cfg, "--mu1", "4.5", "--out", &p(d, "a.gdss")]);
    let a = SnapshotSet::load(d.join("a.gdss")).unwrap();
    assert_eq!((a.nc, a.runs[0].states.len()), (12, 3));
    assert_eq!(a.runs[0].mu, vec![4.5, 0.02]);

    ok(&["--config", &cfg, "fom", "burgers", "--cells", "20", "--mu1", "4.5", "--out", &p(d, "b.gdss")]);
    let b = SnapshotSet::load(d.join("b.gdss")).unwrap();
    assert_eq!(b.nc, 20);
    let man = RunManifest::load(d.join("b.gdss.manifest.toml")).unwrap();
    assert!(man.args.iter().any(|a| a == "--final-time"));
}
