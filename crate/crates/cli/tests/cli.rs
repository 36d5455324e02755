use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use liekernels::io::{read_rows, write_points};
use liekernels::kernels::{build_kernel, SpectralDensity};
use liekernels::rng::seeded;
use liekernels::spaces::{haar_sample_space, SpaceId};
use nalgebra::DMatrix;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liekernels")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn table(path: &Path) -> Vec<Vec<f64>> {
    read_rows(std::fs::File::open(path).unwrap()).unwrap().into_iter().map(|(_, r)| r).collect()
}

/// Like [`table`] for files with a header row.
fn headed_table(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    read_rows(body.join("\n").as_bytes()).unwrap().into_iter().map(|(_, r)| r).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn points_file(dir: &TempDir, name: &str, space: &SpaceId, n: usize, seed: u64) -> PathBuf {
    let p = dir.path().join(name);
    write_points(std::fs::File::create(&p).unwrap(), &haar_sample_space(space, &mut seeded(seed), n)).unwrap();
    p
}

#[test]
fn reps_lists_so3_levels() {
    let o = ok(&["reps", "--space", "SO(3)", "--budget", "3"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 3);
    let dims: Vec<&str> = rows.iter().map(|r| r.split(',').nth(2).unwrap()).collect();
    assert_eq!(dims, ["1", "3", "5"]);

    let o = ok(&["reps", "--space", "SU(2)", "--budget", "1", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["levels"].as_array().unwrap().len(), 1);
    assert_eq!(v["levels"][0]["dimension"], 1);
}

#[test]
fn invalid_group_is_a_config_error() {
    let o = run(&["reps", "--space", "SO(2)"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("SU(n)") && err.contains("SO(n)"), "{err}");
    let o = run(&["kernel", "--points", "/nonexistent/points.csv"]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["sample", "--points", "/nonexistent/points.csv"]);
    assert_eq!(o.status.code(), Some(2), "missing seed");
}

#[test]
fn kernel_matches_library_bit_exactly() {
    let dir = TempDir::new().unwrap();
    for (space, args) in [("S2", vec![]), ("SO(3)", vec!["--kernel", "matern", "--nu", "1.5"]), ("RP2", vec![])] {
        let sp: SpaceId = space.parse().unwrap();
        let pts = points_file(&dir, "pts.csv", &sp, 6, 1);
        let out = dir.path().join("k.csv");
        let mut a = vec!["kernel", "--space", space, "--points", s(&pts), "--out", s(&out), "--budget", "12", "--kappa", "0.7", "--sigma2", "2.0"];
        a.extend(args.iter());
        ok(&a);
        let density = if args.is_empty() {
            SpectralDensity::heat(0.7, 2.0).unwrap()
        } else {
            SpectralDensity::matern(1.5, 0.7, 2.0).unwrap()
        };
        let k = build_kernel(&sp, &density, 12).unwrap();
        let xs = liekernels::io::read_points(&sp, std::fs::File::open(&pts).unwrap()).unwrap();
        let m = k.kernel_matrix(&xs, &xs).unwrap();
        let got = table(&out);
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(got[i][j].to_bits(), m[(i, j)].to_bits());
            }
        }
        let text = std::fs::read_to_string(&out).unwrap();
        for key in ["# budget: 12", "# normalizer:", "# truncation_residual:"] {
            assert!(text.contains(key), "{text}");
        }
        assert!(dir.path().join("k.csv.config.json").exists());
    }
}

#[test]
fn repeated_points_give_constant_diagonal() {
    let dir = TempDir::new().unwrap();
    let pts = dir.path().join("p.csv");
    std::fs::write(&pts, "0,0,1\n0,0,1\n0,0,1\n").unwrap();
    let o = ok(&["kernel", "--points", s(&pts), "--sigma2", "1.7", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for row in v["matrix"].as_array().unwrap() {
        for x in row.as_array().unwrap() {
            assert!((x.as_f64().unwrap() - 1.7).abs() < 1e-12);
        }
    }
}

#[test]
fn malformed_points_name_the_row() {
    let dir = TempDir::new().unwrap();
    let pts = dir.path().join("p.csv");
    std::fs::write(&pts, "# comment\n0,0,1\n0,abc,1\n").unwrap();
    let o = run(&["kernel", "--points", s(&pts)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 3"));

    let data = dir.path().join("d.csv");
    std::fs::write(&data, "0,0,1,0.5\n1,0,0\n").unwrap();
    let o = run(&["regress", "--data", s(&data), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));
}

#[test]
fn sampling_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let sp = SpaceId::sphere(2);
    let pts = points_file(&dir, "pts.csv", &sp, 5, 2);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (out, seed) in [(&a, "9"), (&b, "9"), (&c, "10")] {
        ok(&["sample", "--points", s(&pts), "--count", "3", "--features", "16", "--seed", seed, "--out", s(out)]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(table(&a).len(), 5);
    assert_eq!(table(&a)[0].len(), 3);
}

#[test]
fn sample_covariance_matches_kernel_output() {
    let dir = TempDir::new().unwrap();
    let sp = SpaceId::sphere(2);
    let pts = points_file(&dir, "pts.csv", &sp, 6, 3);
    let kout = dir.path().join("k.csv");
    let sout = dir.path().join("s.csv");
    ok(&["kernel", "--points", s(&pts), "--budget", "10", "--out", s(&kout)]);
    ok(&["sample", "--points", s(&pts), "--budget", "10", "--features", "32", "--count", "4000", "--seed", "5", "--out", s(&sout)]);
    let k = table(&kout);
    let draws = table(&sout);
    let n = draws[0].len() as f64;
    let d = DMatrix::from_fn(6, draws[0].len(), |i, j| draws[i][j]);
    for i in 0..6 {
        for j in 0..=i {
            let prods: Vec<f64> = (0..d.ncols()).map(|c| d[(i, c)] * d[(j, c)]).collect();
            let mean = prods.iter().sum::<f64>() / n;
            let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!((mean - k[i][j]).abs() < 5.0 * (var / n).sqrt(), "({i},{j}): {mean} vs {}", k[i][j]);
        }
    }
}

#[test]
fn posterior_samples_interpolate_noiseless_data() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "0,0,1,0.5\n1,0,0,-1.0\n0,1,0,2.0\n").unwrap();
    let pts = dir.path().join("p.csv");
    std::fs::write(&pts, "0,0,1\n1,0,0\n0,1,0\n").unwrap();
    let o = ok(&["sample", "--points", s(&pts), "--data", s(&data), "--noise", "0", "--count", "2", "--seed", "4", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["mode"], "posterior");
    for (row, target) in v["samples"].as_array().unwrap().iter().zip([0.5, -1.0, 2.0]) {
        for x in row.as_array().unwrap() {
            assert!((x.as_f64().unwrap() - target).abs() < 1e-8);
        }
    }
}

fn demo_data(dir: &TempDir, space: &SpaceId, n: usize) -> PathBuf {
    let xs = haar_sample_space(space, &mut seeded(11), n);
    let anchors = haar_sample_space(space, &mut seeded(12), 3);
    let mut text = String::new();
    for x in &xs {
        let y: f64 = anchors.iter().map(|a| liekernels::spaces::space_distance(space, x, a).unwrap().cos()).sum();
        let coords: Vec<String> = x.to_flat().iter().map(|v| format!("{v:?}")).collect();
        text.push_str(&format!("{},{y:?}\n", coords.join(",")));
    }
    let p = dir.path().join("data.csv");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn regression_demo_runs_quickly() {
    let dir = TempDir::new().unwrap();
    for space in ["S2", "RP2"] {
        let sp: SpaceId = space.parse().unwrap();
        let data = demo_data(&dir, &sp, 30);
        let out = dir.path().join(format!("{space}.csv"));
        let start = std::time::Instant::now();
        ok(&["regress", "--space", space, "--data", s(&data), "--budget", "20", "--features", "512", "--fit", "--seed", "3", "--out", s(&out)]);
        assert!(start.elapsed().as_secs_f64() < 60.0);
        let rows = headed_table(&out);
        assert_eq!(rows.len(), 200);
        assert_eq!(rows[0].len(), sp.coordinate_len() + 3);
        assert!(rows.iter().all(|r| r[sp.coordinate_len() + 1] >= 0.0));
        let fit: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("{space}.csv.fit.json"))).unwrap()).unwrap();
        assert!(fit["params"]["kappa"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn empty_query_gives_empty_output() {
    let dir = TempDir::new().unwrap();
    let sp = SpaceId::sphere(2);
    let data = demo_data(&dir, &sp, 5);
    let q = dir.path().join("q.csv");
    std::fs::write(&q, "").unwrap();
    let o = ok(&["regress", "--data", s(&data), "--query", s(&q), "--seed", "1", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["mean"].as_array().unwrap().len(), 0);
    assert_eq!(v["sample"].as_array().unwrap().len(), 0);
}

#[test]
fn converge_budget_ladder() {
    let dir = TempDir::new().unwrap();
    let sp = SpaceId::sphere(2);
    let a = haar_sample_space(&sp, &mut seeded(20), 8);
    let b = haar_sample_space(&sp, &mut seeded(21), 8);
    let mut text = String::new();
    for (x, y) in a.iter().zip(&b) {
        let r: Vec<String> = x.to_flat().iter().chain(&y.to_flat()).map(|v| format!("{v:?}")).collect();
        text.push_str(&r.join(","));
        text.push('\n');
    }
    let pairs = dir.path().join("pairs.csv");
    std::fs::write(&pairs, text).unwrap();

    let out = dir.path().join("c.csv");
    ok(&["converge", "--pairs", s(&pairs), "--kappa", "0.3", "--budgets", "5,10,15,20,30,40", "--out", s(&out)]);
    let rows = headed_table(&out);
    assert_eq!(rows[0].len(), 6 + 5);
    // tail bound on the sum over ℓ ≥ B of (2ℓ+1)e^{−ℓ(ℓ+1)κ²/2}
    let kappa2 = 0.09f64;
    let tail = |b: usize| -> f64 {
        let z: f64 = (0..200).map(|l| (2 * l + 1) as f64 * (-((l * (l + 1)) as f64) * kappa2 / 2.0).exp()).sum();
        (b..200).map(|l| (2 * l + 1) as f64 * (-((l * (l + 1)) as f64) * kappa2 / 2.0).exp()).sum::<f64>() / z
    };
    for r in &rows {
        let diffs = &r[6..];
        for w in diffs.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{diffs:?}");
        }
        for (d, b) in diffs.iter().zip([5usize, 10, 15, 20, 30]) {
            assert!(*d <= 2.0 * tail(b) + 1e-15, "{d} vs {}", tail(b));
        }
    }

    let o = ok(&["converge", "--pairs", s(&pairs), "--budgets", "10", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["values"].as_array().unwrap().len(), 1);
    assert_eq!(v["differences"].as_array().unwrap().len(), 0);
}

#[test]
fn converge_feature_ladder_rate() {
    let dir = TempDir::new().unwrap();
    let sp = SpaceId::sphere(2);
    let a = haar_sample_space(&sp, &mut seeded(30), 200);
    let b = haar_sample_space(&sp, &mut seeded(31), 200);
    let mut text = String::new();
    for (x, y) in a.iter().zip(&b) {
        let r: Vec<String> = x.to_flat().iter().chain(&y.to_flat()).map(|v| format!("{v:?}")).collect();
        text.push_str(&r.join(","));
        text.push('\n');
    }
    let pairs = dir.path().join("pairs.csv");
    std::fs::write(&pairs, text).unwrap();
    let ladder = [64usize, 128, 256, 512, 1024, 2048, 4096];
    let o = ok(&[
        "converge", "--pairs", s(&pairs), "--budgets", "10", "--budget", "10", "--kappa", "0.5",
        "--feature-ladder", "64,128,256,512,1024,2048,4096", "--seed", "8", "--format", "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let errs = v["rff_errors"].as_array().unwrap();
    let (xs, ys): (Vec<f64>, Vec<f64>) = ladder
        .iter()
        .zip(errs)
        .map(|(l, e)| {
            let e: Vec<f64> = e.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
            let rms = (e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64).sqrt();
            ((*l as f64).ln(), rms.ln())
        })
        .unzip();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() < 0.15, "slope {slope}");
}

#[test]
fn config_file_and_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"space": "SO(3)", "budget": 2}"#).unwrap();
    let o = ok(&["reps", "--config", s(&cfg)]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().filter(|l| !l.starts_with('#')).count(), 3);
    let o = ok(&["reps", "--config", s(&cfg), "--budget", "4"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().filter(|l| !l.starts_with('#')).count(), 5);
    std::fs::write(&cfg, r#"{"space": "SO(3)", "kernel": "gauss"}"#).unwrap();
    assert_eq!(run(&["reps", "--config", s(&cfg)]).status.code(), Some(2));
}
