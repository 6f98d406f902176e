use std::path::Path;
use std::process::{Command, Output};

fn hodgeloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hodgeloop")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn circle_csv(dir: &Path, n: usize) -> String {
    let text: String = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            // small deterministic wobble keeps distances distinct
            let r = 1.0 + 0.01 * ((i * 7) % 5) as f64;
            format!("{},{}\n", r * t.cos(), r * t.sin())
        })
        .collect();
    let path = dir.join("circle.csv");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = hodgeloop(&["embed", "--complex", "/no/such/complex.json", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/complex.json"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(hodgeloop(&["embed", "--bogus"]).status.code(), Some(1));
    assert_eq!(hodgeloop(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hodgeloop(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let csv = circle_csv(dir.path(), 40);
    let o = hodgeloop(&["build-complex", "--input", &csv, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "delta is required for clouds");
}

#[test]
fn filled_triangle_has_no_loops() {
    let dir = tempfile::tempdir().unwrap();
    let cx = dir.path().join("tri.json");
    std::fs::write(&cx, r#"{"format_version":1,"kind":"simplicial","vertices":3,"edges":[[0,1],[0,2],[1,2]],"cells2":[[0,1,2]]}"#).unwrap();
    std::fs::write(dir.path().join("d.csv"), "1\n1\n1\n").unwrap();
    let out = dir.path().join("out");
    let o = hodgeloop(&["embed", "--complex", cx.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&out.join("embed.json"))["beta"], 0);
    let y = out.join("Y.csv");
    let o = hodgeloop(&["ica", "--y", y.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let z = out.join("Z.csv");
    let d = dir.path().join("d.csv");
    let o = hodgeloop(&[
        "loops", "--z", z.to_str().unwrap(), "--complex", cx.to_str().unwrap(), "--dist", d.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let loops = json(&out.join("loops.json"));
    assert_eq!(loops["format_version"], 1);
    assert!(loops["loops"].as_array().unwrap().is_empty());
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "loops");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 3);
}

#[test]
fn run_all_writes_the_pipeline_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let csv = circle_csv(dir.path(), 60);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = hodgeloop(&["run-all", "--input", &csv, "--knn", "4", "--delta", "1.5", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["complex.json", "distances.csv", "Y.csv", "embed.json", "Z.csv", "ica.json", "loops.json", "manifest.json"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    for f in ["complex.json", "distances.csv", "Y.csv", "embed.json", "Z.csv", "ica.json", "loops.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert_eq!(json(&a.join("embed.json"))["beta"], 1);
    let loops = json(&a.join("loops.json"));
    let l = &loops["loops"][0];
    assert_eq!(l["nontrivial"], true);
    let cycle: Vec<usize> = l["cycle"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
    assert_eq!(cycle.first(), cycle.last());
    // the loop winds once around the circle: index steps sum to ±60
    let turns: i64 = cycle
        .windows(2)
        .map(|w| {
            let d = w[1] as i64 - w[0] as i64;
            (d + 30).rem_euclid(60) - 30
        })
        .sum();
    assert_eq!(turns.abs(), 60);
    let m = json(&a.join("manifest.json"));
    assert_eq!(m["command"], "run-all");
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    // 17 significant digits in CSV output
    let y = std::fs::read_to_string(a.join("Y.csv")).unwrap();
    let first = y.lines().next().unwrap();
    assert_eq!(first.split('e').next().unwrap().trim_start_matches('-').replace('.', "").len(), 17);
}

#[test]
fn exports_and_fps() {
    let dir = tempfile::tempdir().unwrap();
    let cx = dir.path().join("sq.json");
    std::fs::write(&cx, r#"{"format_version":1,"kind":"cubical","vertices":4,"edges":[[0,1],[0,2],[1,3],[2,3]],"cells2":[[0,1,3,2]]}"#).unwrap();
    let out = dir.path().join("out");
    let (c, o) = (cx.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(hodgeloop(&["export-boundary", "--complex", c, "--out", o]).status.code(), Some(0));
    let b2 = std::fs::read_to_string(out.join("B2.mtx")).unwrap();
    assert!(b2.starts_with("%%MatrixMarket matrix coordinate integer general\n4 1 4\n"));
    assert_eq!(hodgeloop(&["export-laplacian", "--complex", c, "--out", o]).status.code(), Some(0));
    assert!(out.join("L1.mtx").exists() && out.join("w0.csv").exists() && out.join("w2.csv").exists());
    assert_eq!(hodgeloop(&["export-laplacian", "--complex", c, "--k", "0", "--out", o]).status.code(), Some(0));
    assert!(out.join("L0.mtx").exists());
    assert_eq!(hodgeloop(&["export-boundary", "--complex", c, "--k", "2", "--out", o]).status.code(), Some(1));

    let csv = circle_csv(dir.path(), 30);
    assert_eq!(hodgeloop(&["fps", "--input", &csv, "--n", "5", "--out", o]).status.code(), Some(0));
    let idx = std::fs::read_to_string(out.join("fps_indices.csv")).unwrap();
    assert_eq!(idx.lines().count(), 5);
    assert_eq!(hodgeloop(&["fps", "--input", &csv, "--n", "31", "--out", o]).status.code(), Some(1));
}

#[test]
fn image_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("ring.pgm");
    // 5x5 foreground ring around a 3x3 hole
    let mut px = vec![255u8; 49];
    for r in 2..5 {
        for c in 2..5 {
            px[r * 7 + c] = 0;
        }
    }
    let mut bytes = b"P5\n7 7\n255\n".to_vec();
    bytes.extend(px);
    std::fs::write(&img, bytes).unwrap();
    let out = dir.path().join("out");
    let o = hodgeloop(&["run-all", "--input", img.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&out.join("embed.json"))["beta"], 1);
    assert_eq!(json(&out.join("complex.json"))["kind"], "cubical");
    let loops = json(&out.join("loops.json"));
    assert_eq!(loops["loops"][0]["nontrivial"], true);
}

#[test]
fn undecided_betti_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cx = dir.path().join("c3.json");
    std::fs::write(&cx, r#"{"format_version":1,"kind":"simplicial","vertices":3,"edges":[[0,1],[0,2],[1,2]],"cells2":[]}"#).unwrap();
    let out = dir.path().join("out");
    let o = hodgeloop(&["embed", "--complex", cx.to_str().unwrap(), "--gap-factor", "1e12", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let o = hodgeloop(&["embed", "--complex", cx.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}
