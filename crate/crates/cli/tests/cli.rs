use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cylwig::io::read_wigner;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cylwig")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

struct Scratch(TempDir);

impl Scratch {
    fn new() -> Self {
        Scratch(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> String {
        self.0.path().join(name).to_string_lossy().into_owned()
    }
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn von_mises_at_zero_kappa_is_the_zero_eigenstate() {
    let a = ok(&["state", "--kind", "vonmises", "--kappa", "0", "--window", "-3:3"]);
    let b = ok(&["state", "--kind", "eigen", "--l0", "0", "--window", "-3:3"]);
    assert_eq!(a, b);
}

#[test]
fn coherent_state_reports_unit_norm() {
    let s = json(&ok(&["state", "--kind", "coherent", "--l0", "2", "--phi0", "0.5", "--sigma", "1.5", "--window", "-8:12"]));
    assert!((s["norm"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn transforms_chain() {
    let s = json(&ok(&[
        "state", "--kind", "eigen", "--l0", "1", "--window", "-2:2", "--apply", "displace:2:0.3", "--apply", "lower",
    ]));
    assert_eq!(s["l_min"], -1);
    let c = s["coefficients"].as_array().unwrap();
    let weights: Vec<f64> = c.iter().map(|z| z[0].as_f64().unwrap().hypot(z[1].as_f64().unwrap())).collect();
    assert!((weights[3] - 1.0).abs() < 1e-15, "{weights:?}");
}

#[test]
fn eigenstate_grid_holds_one_over_two_pi() {
    let dir = Scratch::new();
    ok(&["state", "--kind", "eigen", "--l0", "0", "--window", "0:0", "-o", &dir.path("e.json")]);
    let w = read_wigner(&ok(&["wigner", &dir.path("e.json"), "--nphi", "8", "--pad", "2"])).unwrap();
    assert_eq!(w.value(0, 3).unwrap(), 0.15915494309189535);
    assert_eq!(w.value(0, 3).unwrap(), 1.0 / (2.0 * PI));
    assert_eq!(w.value(1, 3).unwrap(), 0.0);
}

#[test]
fn both_methods_agree_and_json_matches_csv() {
    let dir = Scratch::new();
    ok(&["state", "--kind", "random", "--window", "-3:2", "--seed", "11", "-o", &dir.path("s.json")]);
    let oam = read_wigner(&ok(&["wigner", &dir.path("s.json")])).unwrap();
    let angle = read_wigner(&ok(&["wigner", &dir.path("s.json"), "--method", "angle"])).unwrap();
    assert!(oam.max_abs_difference(&angle).unwrap() <= 1e-10);
    let twin = read_wigner(&ok(&["wigner", &dir.path("s.json"), "--format", "json"])).unwrap();
    assert_eq!(twin.values(), oam.values());
}

#[test]
fn angle_method_refuses_density_input() {
    let dir = Scratch::new();
    ok(&["state", "--kind", "eigen", "--l0", "1", "--window", "0:2", "-o", &dir.path("e.json")]);
    ok(&["wigner", &dir.path("e.json"), "-o", &dir.path("w.csv")]);
    ok(&["reconstruct", &dir.path("w.csv"), "-o", &dir.path("rho.json")]);
    assert_eq!(code(&["wigner", &dir.path("rho.json"), "--method", "angle"]), 2);
    assert!(read_wigner(&ok(&["wigner", &dir.path("rho.json")])).is_ok());
}

#[test]
fn reconstruction_recovers_an_eigenstate() {
    let dir = Scratch::new();
    ok(&["state", "--kind", "eigen", "--l0", "1", "--window", "-2:2", "-o", &dir.path("e.json")]);
    ok(&["wigner", &dir.path("e.json"), "-o", &dir.path("w.csv")]);
    let rho = json(&ok(&["reconstruct", &dir.path("w.csv")]));
    assert_eq!(rho["l_min"], -2);
    for (i, row) in rho["elements"].as_array().unwrap().iter().enumerate() {
        for (j, z) in row.as_array().unwrap().iter().enumerate() {
            let expect = if i == 3 && j == 3 { 1.0 } else { 0.0 };
            assert!((z[0].as_f64().unwrap() - expect).abs() < 1e-12);
            assert!(z[1].as_f64().unwrap().abs() < 1e-12);
        }
    }
}

#[test]
fn classifications() {
    let dir = Scratch::new();
    ok(&["state", "--kind", "eigen", "--l0", "2", "--window", "-3:3", "--apply", "phase:0.4:1.3", "-o", &dir.path("e.json")]);
    ok(&["state", "--kind", "coherent", "--sigma", "1", "--window", "-10:10", "-o", &dir.path("c.json")]);
    let e = json(&ok(&["check", &dir.path("e.json")]));
    assert_eq!(e["classification"], "oam_eigenstate");
    assert_eq!(e["nearest_eigenstate"]["l0"], 2);
    let c = json(&ok(&["check", &dir.path("c.json")]));
    assert_eq!(c["classification"], "negative_witnessed");
    assert!(c["min_value"].as_f64().unwrap() < 0.0);
}

#[test]
fn scan_finds_negativity_everywhere() {
    let text = ok(&["scan", "--samples", "200", "--window", "-4:4", "--seed", "7"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 201);
    assert_eq!(json(lines[0])["seed"], 7);
    let summary = json(lines[200]);
    assert_eq!(summary["summary"]["samples"], 200);
    assert_eq!(summary["summary"]["negative_witnessed"], 200);
}

#[test]
fn overlap_of_a_pure_state_with_itself() {
    let dir = Scratch::new();
    ok(&["state", "--kind", "eigen", "--l0", "0", "--window", "-1:1", "-o", &dir.path("e.json")]);
    ok(&["wigner", &dir.path("e.json"), "-o", &dir.path("w.csv")]);
    let v: f64 = ok(&["overlap", &dir.path("w.csv"), &dir.path("w.csv")]).trim().parse().unwrap();
    assert!((v - 1.0).abs() < 1e-12, "{v}");
}

#[test]
fn star_of_a_pure_state_is_idempotent() {
    let dir = Scratch::new();
    ok(&["state", "--kind", "random", "--window", "-2:2", "--seed", "3", "-o", &dir.path("s.json")]);
    ok(&["wigner", &dir.path("s.json"), "-o", &dir.path("w.csv")]);
    let w = read_wigner(&read(dir.path("w.csv"))).unwrap();
    let star = read_wigner(&ok(&["star", &dir.path("w.csv"), &dir.path("w.csv")])).unwrap();
    assert!(star.max_abs_difference(&w).unwrap() <= 1e-10);
}

fn ppm_rows(bytes: &[u8]) -> (usize, Vec<Vec<[u8; 3]>>) {
    let mut fields = Vec::new();
    let mut at = 0;
    while fields.len() < 4 {
        while bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        let start = at;
        while !bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        fields.push(String::from_utf8(bytes[start..at].to_vec()).unwrap());
    }
    assert_eq!(fields[0], "P6");
    let width: usize = fields[1].parse().unwrap();
    let pixels: Vec<[u8; 3]> = bytes[at + 1..].chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    (width, pixels.chunks(width).map(<[_]>::to_vec).collect())
}

#[test]
fn rendering() {
    let dir = Scratch::new();
    ok(&["state", "--kind", "eigen", "--l0", "1", "--window", "-2:2", "-o", &dir.path("e.json")]);
    ok(&["wigner", &dir.path("e.json"), "-o", &dir.path("e.csv")]);
    let (_, rows) = ppm_rows(&run(&["render", &dir.path("e.csv")]).stdout);
    let tinted = rows.iter().filter(|r| r.iter().any(|p| *p != [255, 255, 255])).count();
    assert_eq!(tinted, 1);

    ok(&["state", "--kind", "coherent", "--window", "-10:10", "-o", &dir.path("c.json")]);
    ok(&["wigner", &dir.path("c.json"), "-o", &dir.path("c.csv")]);
    let first = run(&["render", &dir.path("c.csv")]).stdout;
    assert_eq!(first, run(&["render", &dir.path("c.csv")]).stdout);
    let (_, rows) = ppm_rows(&first);
    assert!(rows.iter().flatten().any(|p| p[2] > p[0] && p[2] == 255));

    assert_eq!(code(&["render", &dir.path("c.csv"), "--range", "0.1:0.2"]), 2);
    assert!(run(&["render", &dir.path("c.csv"), "--range", "-0.2:0.2"]).status.success());
}

#[test]
fn exit_codes() {
    let dir = Scratch::new();
    assert_eq!(code(&["state", "--kind", "eigen", "--window", "3:1"]), 2);
    assert_eq!(code(&["state", "--kind", "eigen", "--l0", "9", "--window", "-1:1"]), 2);
    assert_eq!(code(&["state", "--kind", "coherent", "--sigma", "3", "--window", "-2:2"]), 3);
    assert_eq!(code(&["bogus"]), 2);
    assert_eq!(code(&["wigner", &dir.path("missing.json")]), 2);
    std::fs::write(dir.path("junk.json"), "{\"format\":\"nope\"}").unwrap();
    assert_eq!(code(&["wigner", &dir.path("junk.json")]), 2);
    ok(&["state", "--kind", "eigen", "--window", "-1:1", "-o", &dir.path("e.json")]);
    assert_eq!(code(&["wigner", &dir.path("e.json"), "--nphi", "7"]), 2);
    assert_eq!(code(&["check", &dir.path("e.json"), "--tol", "-1"]), 2);
    ok(&["wigner", &dir.path("e.json"), "--nphi", "8", "-o", &dir.path("a.csv")]);
    ok(&["wigner", &dir.path("e.json"), "--nphi", "10", "-o", &dir.path("b.csv")]);
    assert_eq!(code(&["overlap", &dir.path("a.csv"), &dir.path("b.csv")]), 2);
}

#[test]
fn golden_outputs_are_reproduced() {
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let dir = Scratch::new();
    ok(&["state", "--kind", "random", "--window", "-2:2", "--seed", "5", "-o", &dir.path("state.json")]);
    ok(&["wigner", &dir.path("state.json"), "--nphi", "16", "--pad", "4", "-o", &dir.path("wigner.csv")]);
    ok(&["render", &dir.path("wigner.csv"), "-o", &dir.path("wigner.ppm")]);
    for name in ["state.json", "wigner.csv", "wigner.ppm"] {
        assert_eq!(std::fs::read(dir.path(name)).unwrap(), std::fs::read(golden.join(name)).unwrap(), "{name}");
    }
}
