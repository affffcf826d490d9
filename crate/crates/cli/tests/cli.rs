use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn dualtri(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualtri")).args(args).output().expect("run dualtri")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8")
}

fn gen(dir: &TempDir, fixture: &str, extra: &[&str]) -> PathBuf {
    let path = dir.path().join(format!("{fixture}.mesh"));
    let mut args = vec!["gen", fixture, "--output", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = dualtri(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_reports_structure() {
    let dir = TempDir::new().unwrap();
    let mesh = gen(&dir, "icosahedron_boundary", &[]);
    let o = dualtri(&["validate", p(&mesh)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("status: valid"));
    assert!(text.contains("euler characteristic: 2"));
    assert!(text.contains("regular hinges: 30/30"));
}

#[test]
fn parse_failure_exits_2() {
    let dir = TempDir::new().unwrap();
    let mesh = dir.path().join("bad.mesh");
    fs::write(&mesh, "dualmesh 1\ndim two\n").unwrap();
    let o = dualtri(&["validate", p(&mesh)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(dualtri(&["validate", "/nonexistent/file.mesh"]).status.code(), Some(2));
    assert_eq!(dualtri(&["gen", "no_such_fixture"]).status.code(), Some(2));
}

#[test]
fn validation_failure_exits_1() {
    let dir = TempDir::new().unwrap();
    let mesh = dir.path().join("flat.mesh");
    fs::write(
        &mesh,
        "dualmesh 1\ndim 2\nkind euclidean\nvertices 3\ntop 0 1 2\nedge 0 0 1\nedge 1 0 2\nedge 2 1 2\n\
         len 0 1.0\nlen 1 1.0\nlen 2 2.0\n",
    )
    .unwrap();
    let o = dualtri(&["validate", p(&mesh)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("realizability"));
}

#[test]
fn torus_loop_obstruction_exits_1() {
    let dir = TempDir::new().unwrap();
    let mesh = gen(&dir, "paper_torus", &["--epsilon", "0.1"]);
    let report = stdout(&dualtri(&["validate", p(&mesh)]));
    assert!(report.contains("loop property: fails (residual 8.000000e-1"), "{report}");
    let o = dualtri(&["convert", p(&mesh), "--to", "weighted"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("loop property fails"));
}

#[test]
fn conversions_round_trip() {
    let dir = TempDir::new().unwrap();
    let mesh = gen(&dir, "random_surface", &["--vertices", "15", "--spread", "0.4", "--seed", "2"]);
    let duality = dir.path().join("d.mesh");
    let back = dir.path().join("w.mesh");
    let thurston = dir.path().join("t.mesh");
    assert!(dualtri(&["convert", p(&mesh), "--to", "duality", "-o", p(&duality)]).status.success());
    assert!(dualtri(&["convert", p(&mesh), "--to", "thurston", "-o", p(&thurston)]).status.success());
    let original = fs::read_to_string(&mesh).unwrap();
    let base_weight = original
        .lines()
        .find_map(|l| l.strip_prefix("weight 0 "))
        .expect("weight of vertex 0")
        .to_string();
    let o = dualtri(&["convert", p(&duality), "--to", "weighted", "--base-vertex", "0", "--w0", &base_weight, "-o", p(&back)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let parse_weights = |text: &str| -> Vec<f64> {
        text.lines()
            .filter_map(|l| l.strip_prefix("weight "))
            .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let (w0, w1) = (parse_weights(&original), parse_weights(&fs::read_to_string(&back).unwrap()));
    assert_eq!(w0.len(), w1.len());
    for (a, b) in w0.iter().zip(&w1) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    assert!(fs::read_to_string(&thurston).unwrap().contains("kind thurston"));
}

#[test]
fn regularize_writes_mesh_and_energy_log() {
    let dir = TempDir::new().unwrap();
    let mesh = gen(&dir, "thin_hinge", &[]);
    let out = dir.path().join("out.mesh");
    let log = dir.path().join("energy.csv");
    let o = dualtri(&["regularize", p(&mesh), "--seed", "3", "--energy-log", p(&log), "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&log).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "flip,edge,phi,energy");
    assert_eq!(rows.len(), 3);
    let energies: Vec<f64> = rows[1..].iter().map(|r| r.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(energies[1] <= energies[0]);
    let again = stdout(&dualtri(&["validate", p(&out)]));
    assert!(again.contains("regular hinges: 1/1"), "{again}");
}

#[test]
fn regularize_flip_cap_exits_3() {
    let dir = TempDir::new().unwrap();
    let mesh = gen(&dir, "thin_hinge", &[]);
    let o = dualtri(&["regularize", p(&mesh), "--max-flips", "0"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn laplace_assemble_is_coordinate_text() {
    let dir = TempDir::new().unwrap();
    let mesh = gen(&dir, "tetrahedron_boundary", &[]);
    let text = stdout(&dualtri(&["laplace", "assemble", p(&mesh)]));
    let lines: Vec<Vec<&str>> = text.lines().map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(lines.len(), 16);
    for l in &lines {
        let v: f64 = l[2].parse().unwrap();
        let expected = if l[0] == l[1] { -3f64.sqrt() } else { 1.0 / 3f64.sqrt() };
        assert!((v - expected).abs() < 1e-14, "{l:?}");
    }
}

#[test]
fn laplace_poisson_and_heat() {
    let dir = TempDir::new().unwrap();
    let mesh = gen(&dir, "tetrahedron_boundary", &[]);
    let rhs = dir.path().join("rhs.txt");
    fs::write(&rhs, "f 0 1\nf 1 -1\nf 2 0\nf 3 0\n").unwrap();
    let o = dualtri(&["laplace", "poisson", p(&mesh), "--rhs", p(&rhs)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let u: Vec<f64> = stdout(&o).lines().map(|l| l.split_whitespace().nth(2).unwrap().parse().unwrap()).collect();
    assert!(u.iter().sum::<f64>().abs() < 1e-14);
    assert!(u[0] < 0.0 && u[1] > 0.0);

    let unbalanced = dir.path().join("unbalanced.txt");
    fs::write(&unbalanced, "f 0 1\nf 1 1\nf 2 1\nf 3 1\n").unwrap();
    assert_eq!(dualtri(&["laplace", "poisson", p(&mesh), "--rhs", p(&unbalanced)]).status.code(), Some(3));

    let o = dualtri(&["laplace", "heat", p(&mesh), "--initial", p(&rhs), "--t-end", "0.5", "--dt", "0.1"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    assert!(csv.starts_with("t,u0,u1,u2,u3\n"));
    assert_eq!(csv.lines().count(), 7);
    let o = dualtri(&["laplace", "heat", p(&mesh), "--initial", p(&rhs), "--dt", "10", "--scheme", "explicit-euler"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn laplace_spectrum_and_entropy() {
    let dir = TempDir::new().unwrap();
    let mesh = gen(&dir, "sphere_packing_s3", &[]);
    let text = stdout(&dualtri(&["laplace", "spectrum", p(&mesh)]));
    assert!(text.contains("# hypotheses"));
    assert!(text.contains("sphere-packing-3d"));
    assert!(text.contains("# negative semidefinite yes"));
    let entropy: f64 = stdout(&dualtri(&["laplace", "entropy", p(&mesh)])).trim().parse().unwrap();
    assert!(entropy > 0.0);
}

#[test]
fn dualize_reports_volumes_and_centers() {
    let dir = TempDir::new().unwrap();
    let mesh = gen(&dir, "square_hinge", &[]);
    let text = stdout(&dualtri(&["dualize", p(&mesh)]));
    assert!(text.contains("dim,simplex,vertices,volume,dual_volume"));
    assert!(text.contains("top,face,center"));
    let diagonal = text.lines().find(|l| l.starts_with("1,") && l.split(',').nth(2) == Some("0 1")).expect("diagonal row");
    let dual: f64 = diagonal.rsplit(',').next().unwrap().parse().unwrap();
    assert!(dual.abs() < 1e-14, "{diagonal}");
}

#[test]
fn stdin_input_is_accepted() {
    let dir = TempDir::new().unwrap();
    let mesh = gen(&dir, "tetrahedron_boundary", &[]);
    let o = Command::new(env!("CARGO_BIN_EXE_dualtri"))
        .args(["validate", "-"])
        .stdin(fs::File::open(&mesh).unwrap())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}
