use std::path::Path;
use std::process::{Command, Output};

use dipsym::dirichlet::{dp_posterior_params, sample_dp, TruncatedPath};
use dipsym::geometry::HalfOpenBox;
use dipsym::measures::{BaseMeasure, Measure};
use dipsym::posterior::DipPosterior;
use dipsym::{fit, replica_rng, PathSampler};
use rand::Rng;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dipsym"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().unwrap_or(-1)
}

fn read_points(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn write_posterior(dir: &Path, data: &str, base: &str, group: &str, alpha: &str) {
    std::fs::write(dir.join("data.csv"), data).unwrap();
    let args = [
        "fit",
        "--alpha",
        alpha,
        "--base",
        base,
        "--group",
        group,
        "--data",
        "data.csv",
        "--out",
        "post.json",
    ];
    assert_eq!(code(dir, &args), 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["--help"]), 0);
    assert_eq!(
        code(
            d,
            &["gen", "--dist", "gauss2d", "--m", "5", "--seed", "1", "--out", "x.csv"]
        ),
        0
    );
    // usage errors
    assert_eq!(code(d, &["gen", "--dist", "gauss2d", "--m", "5", "--out", "x.csv"]), 2);
    assert_eq!(
        code(
            d,
            &["gen", "--dist", "cauchy", "--m", "5", "--seed", "1", "--out", "x.csv"]
        ),
        2
    );
    assert_eq!(
        code(
            d,
            &[
                "fit",
                "--alpha",
                "-1",
                "--base",
                "gauss2d",
                "--group",
                "cyclic2d:4",
                "--out",
                "p.json"
            ]
        ),
        2
    );
    assert_eq!(code(d, &["frobnicate"]), 2);
    // filesystem errors
    assert_eq!(
        code(
            d,
            &[
                "fit",
                "--alpha",
                "1",
                "--base",
                "gauss2d",
                "--group",
                "cyclic2d:4",
                "--data",
                "missing.csv",
                "--out",
                "p.json"
            ]
        ),
        3
    );
    assert_eq!(
        code(
            d,
            &[
                "gen",
                "--dist",
                "gauss2d",
                "--m",
                "5",
                "--seed",
                "1",
                "--out",
                "no/such/dir/x.csv"
            ]
        ),
        3
    );
}

#[test]
fn zero_points_give_a_header_only_file() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(
            dir.path(),
            &["gen", "--dist", "disk:2", "--m", "0", "--seed", "1", "--out", "e.csv"]
        ),
        0
    );
    let text = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn gen_mean_is_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "gen",
        "--dist",
        "gauss2d:1.5",
        "--m",
        "100000",
        "--seed",
        "8",
        "--out",
        "g.csv",
    ];
    assert_eq!(code(dir.path(), &args), 0);
    let pts = read_points(&dir.path().join("g.csv"));
    assert_eq!(pts.len(), 100_000);
    let m = pts.len() as f64;
    for axis in 0..2 {
        let mean = pts.iter().map(|p| p[axis]).sum::<f64>() / m;
        assert!(mean.abs() <= 4.0 * 1.5 / m.sqrt(), "axis {axis}: {mean}");
    }
}

#[test]
fn one_datum_with_unit_alpha_splits_into_quarters() {
    let dir = tempfile::tempdir().unwrap();
    write_posterior(dir.path(), "x,y\n1.0,0.5\n", "gauss2d", "cyclic2d:4", "1");
    let out = run(
        dir.path(),
        &[
            "fit",
            "--alpha",
            "1",
            "--base",
            "gauss2d",
            "--group",
            "cyclic2d:4",
            "--data",
            "data.csv",
            "--out",
            "post.json",
        ],
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("alpha_star=2.0 p_cont=0.5 atoms=4"), "{stdout}");
    let post = DipPosterior::<f64>::from_json(&std::fs::read_to_string(dir.path().join("post.json")).unwrap()).unwrap();
    let atoms = post.base().discrete().unwrap();
    assert_eq!(atoms.len(), 4);
    assert!(atoms.atoms().iter().all(|a| (a.weight - 0.25).abs() < 1e-15));
}

#[test]
fn empty_data_file_gives_the_prior() {
    let dir = tempfile::tempdir().unwrap();
    write_posterior(dir.path(), "x,y\n", "disk:2", "cyclic2d:3", "2.5");
    let post = DipPosterior::<f64>::from_json(&std::fs::read_to_string(dir.path().join("post.json")).unwrap()).unwrap();
    assert_eq!(post.alpha_star(), 2.5);
    assert_eq!(post.p_cont(), 1.0);
    assert_eq!(post.atom_count(), 0);
}

#[test]
fn fitted_file_matches_library_fit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        code(
            d,
            &["gen", "--dist", "gauss2d", "--m", "12", "--seed", "2", "--out", "data.csv"]
        ),
        0
    );
    let args = [
        "fit",
        "--alpha",
        "0.7",
        "--base",
        "disk:3",
        "--group",
        "cyclic2d:5",
        "--data",
        "data.csv",
        "--out",
        "post.json",
    ];
    assert_eq!(code(d, &args), 0);
    let loaded = DipPosterior::<f64>::from_json(&std::fs::read_to_string(d.join("post.json")).unwrap()).unwrap();
    let data: Vec<_> = read_points(&d.join("data.csv"))
        .iter()
        .map(|p| dipsym::geometry::Point::xy(p[0], p[1]).unwrap())
        .collect();
    let direct = fit(
        0.7,
        BaseMeasure::disk(3.0).unwrap(),
        &data,
        &dipsym::make_cyclic_group_2d(5).unwrap(),
    )
    .unwrap();
    let mut rng = replica_rng(3, 0);
    for _ in 0..100 {
        let (x, y) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let b = HalfOpenBox::rect(x, x + rng.gen_range(0.1..3.0), y, y + rng.gen_range(0.1..3.0)).unwrap();
        assert_eq!(loaded.base().eval_box(&b).unwrap(), direct.base().eval_box(&b).unwrap());
    }
}

#[test]
fn trivial_group_paths_are_plain_dirichlet_draws() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_posterior(d, "x,y\n0.2,0.1\n-1.0,0.4\n", "gauss2d", "cyclic2d:1", "1.5");
    let args = [
        "sample",
        "--posterior",
        "post.json",
        "--reps",
        "4",
        "--seed",
        "17",
        "--out",
        "paths.jsonl",
    ];
    assert_eq!(code(d, &args), 0);
    let post = DipPosterior::<f64>::from_json(&std::fs::read_to_string(d.join("post.json")).unwrap()).unwrap();
    let data = post.data().to_vec();
    let params = dp_posterior_params(1.5, BaseMeasure::gauss2d(1.0).unwrap(), &data).unwrap();
    let text = std::fs::read_to_string(d.join("paths.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 4);
    for (i, line) in text.lines().enumerate() {
        let got: TruncatedPath<f64> = serde_json::from_str(line).unwrap();
        let want = sample_dp(&params, PathSampler::default(), &mut replica_rng(17, i as u64)).unwrap();
        assert_eq!(got.measure, want.measure, "replica {i}");
    }
}

#[test]
fn invariance_check_passes_and_catches_distortion() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_posterior(d, "x,y\n0.5,0.3\n1.2,-0.4\n", "gauss2d", "cyclic2d:6", "1");
    let base = [
        "check",
        "--kind",
        "invariance",
        "--posterior",
        "post.json",
        "--reps",
        "3",
        "--seed",
        "5",
    ];
    assert_eq!(code(d, &base), 0);
    let mut distorted = base.to_vec();
    distorted.extend(["--boxes", "boxes.json", "--distort", "0.5"]);
    std::fs::write(d.join("boxes.json"), r#"[{"low":[0.0,0.0],"high":[1.5,1.5]}]"#).unwrap();
    let out = run(d, &distorted);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn full_space_box_has_zero_z() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_posterior(d, "x,y\n0.5,0.3\n", "gauss2d", "cyclic2d:4", "1");
    let args = [
        "check",
        "--kind",
        "moments",
        "--posterior",
        "post.json",
        "--reps",
        "2000",
        "--seed",
        "5",
        "--out",
        "m.csv",
    ];
    assert_eq!(code(d, &args), 0);
    let text = std::fs::read_to_string(d.join("m.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (bi, bj, z) = (col("box_i"), col("box_j"), col("z"));
    let mut seen = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[bi] == "0" && f[bj] == "0" {
            assert_eq!(f[z].parse::<f64>().unwrap(), 0.0, "{line}");
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn malformed_data_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "x,y\n1.0,2.0\n3.0,oops\n").unwrap();
    let out = run(
        d,
        &[
            "fit",
            "--alpha",
            "1",
            "--base",
            "gauss2d",
            "--group",
            "cyclic2d:2",
            "--data",
            "bad.csv",
            "--out",
            "p.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}
