use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heatflow"))
}

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("spawn")
}

#[test]
fn zeros_twoatoms_writes_120_rows() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec("twoatoms.json");
    let o = run(&["zeros", "--spec", s.to_str().unwrap(), "--t", "2,0", "--n", "60"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("zeros.csv")).unwrap();
    assert_eq!(csv.lines().count(), 121);
    assert!(dir.path().join("zeros.json").exists());
    assert!(dir.path().join("zeros.svg").exists());
}

#[test]
fn monomial_branch_points_are_plus_minus_two() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec("monomial.json");
    let o = run(&["branch-points", "--spec", s.to_str().unwrap(), "--t", "1,0"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("branch_points.json")).unwrap()).unwrap();
    let mut xs: Vec<(f64, f64)> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|b| (b["z"][0].as_f64().unwrap(), b["z"][1].as_f64().unwrap()))
        .collect();
    xs.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert_eq!(xs.len(), 2);
    assert!((xs[0].0 + 2.0).abs() < 1e-10 && xs[0].1.abs() < 1e-10);
    assert!((xs[1].0 - 2.0).abs() < 1e-10 && xs[1].1.abs() < 1e-10);
}

#[test]
fn verify_all_monomial_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec("monomial.json");
    let o = run(&["verify", "--all", "--spec", s.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert!(v.as_array().unwrap().iter().all(|r| r["pass"] == true));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["zeros", "--spec", missing.to_str().unwrap()], dir.path()).status.code(), Some(2));
    let s = spec("monomial.json");
    let s = s.to_str().unwrap();
    assert_eq!(run(&["zeros", "--spec", s, "--t", "x,1"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["zeros", "--spec", s, "--precision", "32"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["zeros", "--spec", s, "--resolution", "8"], dir.path()).status.code(), Some(2));
    // a point on the nodal set has no unique dominant saddle
    assert_eq!(run(&["stieltjes", "--spec", s, "--z", "1,0"], dir.path()).status.code(), Some(3));
}

#[test]
fn polar_and_cartesian_t_agree() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let s = spec("offset_pair.json");
    let s = s.to_str().unwrap();
    assert!(run(&["zeros", "--spec", s, "--n", "10", "--t", "0,2", "--format", "csv"], a.path()).status.success());
    assert!(run(&["zeros", "--spec", s, "--n", "10", "--t", "2@90", "--format", "csv"], b.path()).status.success());
    let read = |d: &Path| -> Vec<f64> {
        let csv = fs::read_to_string(d.join("zeros.csv")).unwrap();
        let mut v: Vec<f64> = csv.lines().skip(1).flat_map(|l| l.split(',').take(2).map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>()).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let (x, y) = (read(a.path()), read(b.path()));
    assert_eq!(x.len(), y.len());
    assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-12));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let s = spec("twoatoms.json");
    let s = s.to_str().unwrap();
    let cases: [(&[&str], &[&str]); 3] = [
        (&["zeros", "--n", "20", "--t", "2,0"], &["zeros.csv", "zeros.json"]),
        (&["support", "--n", "20", "--t", "2,0", "--with-zeros"], &["support.json", "support.csv", "support.svg", "support_zeros.csv"]),
        (&["trajectories", "--n", "4", "--t", "0.5"], &["trajectories.json", "trajectories.csv"]),
    ];
    for (args, files) in cases {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for d in [&a, &b] {
            let mut full: Vec<&str> = args.to_vec();
            full.extend(["--spec", s]);
            let o = run(&full, d.path());
            assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        }
        for f in files {
            let x = fs::read(a.path().join(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
            let y = fs::read(b.path().join(f)).unwrap();
            assert_eq!(x, y, "{f} differs between runs");
        }
    }
}
