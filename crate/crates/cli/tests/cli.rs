use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

struct Scratch(PathBuf);

impl Scratch {
    fn new(name: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("maslov-cli-{name}-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.0.join(name);
        fs::write(&p, contents).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn run(cmd: &str, input: &PathBuf, output: &PathBuf, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maslov"))
        .arg(cmd)
        .arg("--input")
        .arg(input)
        .arg("--output")
        .arg(output)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn report(path: &PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const DIRICHLET: &str = r#""alpha1": [[1.0]], "alpha2": [[0.0]], "beta1": [[1.0]], "beta2": [[0.0]]"#;

#[test]
fn normalization_path() {
    let s = Scratch::new("normalization");
    let out = s.path("out.json");
    for (interval, expected) in [(r#"["-pi/4", "pi/4"]"#, -1), (r#"["-pi/4", 0]"#, 0), (r#"[0, "pi/4"]"#, -1)] {
        let input = s.file("path.json", &format!(r#"{{"builtin": "arnold_normalization", "interval": {interval}}}"#));
        let o = run("path", &input, &out, &["--trace"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(report(&out)["index"], expected, "interval {interval}");
    }
    let csv = fs::read_to_string(s.path("out.trace.csv")).unwrap();
    assert!(csv.starts_with("t,phase_1\n"));
}

#[test]
fn sampled_path() {
    let s = Scratch::new("sampled");
    let frames: Vec<String> = (0..=20)
        .map(|k| {
            let t = -0.5 + k as f64 * 0.05;
            format!(r#"{{"l1": {{"x": [[1.0]], "y": [[0.0]]}}, "l2": {{"x": [[{}]], "y": [[{}]]}}}}"#, t.cos(), t.sin())
        })
        .collect();
    let grid: Vec<String> = (0..=20).map(|k| format!("{}", -0.5 + k as f64 * 0.05)).collect();
    let input = s.file("path.json", &format!(r#"{{"grid": [{}], "frames": [{}]}}"#, grid.join(","), frames.join(",")));
    let out = s.path("out.json");
    let o = run("path", &input, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&out)["index"], -1);
}

#[test]
fn malformed_input_exits_with_one() {
    let s = Scratch::new("malformed");
    let input = s.file("bad.json", "{\"builtin\": ");
    let o = run("path", &input, &s.path("out.json"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn missing_input_file_exits_with_one() {
    let s = Scratch::new("missing");
    let o = run("interval", &s.path("nope.json"), &s.path("out.json"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn non_positive_tolerance_is_rejected() {
    let s = Scratch::new("tolerance");
    let input = s.file("path.json", r#"{"builtin": "arnold_normalization", "interval": [0, 1]}"#);
    let o = run("path", &input, &s.path("out.json"), &["--tol-phase", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dirichlet_well_with_oracle() {
    let s = Scratch::new("dirichlet");
    let input = s.file(
        "p.json",
        &format!(r#"{{"n": 1, "potential": {{"type": "constant", "value": -20.0}}, {DIRICHLET}}}"#),
    );
    let out = s.path("out.json");
    let o = run("interval", &input, &out, &["--verify", "--trace"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["morse_index"], 1);
    assert_eq!(r["oracle_match"], true);
    assert_eq!(r["box_sum"], 0);
    let traces = fs::read_dir(&s.0)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".trace.csv"))
        .count();
    assert_eq!(traces, 4);
}

#[test]
fn missing_beta_exits_with_one() {
    let s = Scratch::new("beta");
    let input = s.file(
        "p.json",
        r#"{"n": 1, "potential": {"type": "constant", "value": 0.0}, "alpha1": [[1.0]], "alpha2": [[0.0]]}"#,
    );
    let o = run("interval", &input, &s.path("out.json"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn degenerate_problem_is_flagged() {
    let s = Scratch::new("degenerate");
    let input = s.file(
        "p.json",
        r#"{"n": 1, "potential": {"type": "poly", "coefficients": [0.0, 1.0]},
            "alpha1": [[0.0]], "alpha2": [[1.0]], "beta1": [[0.0]], "beta2": [[1.0]]}"#,
    );
    let out = s.path("out.json");
    let o = run("interval", &input, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&out)["nondegenerate"], false);
}

#[test]
fn sech_well_on_the_line() {
    let s = Scratch::new("sech");
    let input = s.file("p.json", r#"{"n": 1, "potential": {"type": "poschl_teller", "m2": 2.0, "a": 6.0}}"#);
    let out = s.path("out.json");
    let o = run("line", &input, &out, &["--verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["morse_index"], 1);
    assert_eq!(r["oracle_match"], true);
}

#[test]
fn constant_line_potential_has_no_bound_states() {
    let s = Scratch::new("constant");
    let input = s.file("p.json", r#"{"n": 1, "potential": {"type": "constant", "value": 1.0}, "L": 8}"#);
    let out = s.path("out.json");
    let o = run("line", &input, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&out)["morse_index"], 0);
}

#[test]
fn negative_asymptotic_limit_exits_with_one() {
    let s = Scratch::new("negative");
    let input = s.file(
        "p.json",
        r#"{"n": 1, "potential": {"type": "table", "x": [-1.0, 1.0], "values": [1.0, -1.0]}}"#,
    );
    let o = run("line", &input, &s.path("out.json"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical() {
    let s = Scratch::new("determinism");
    let input = s.file("path.json", r#"{"builtin": "random", "interval": [0, 1], "n": 3}"#);
    let (a, b) = (s.path("a.json"), s.path("b.json"));
    let threads = |n: &str, out: &PathBuf| {
        let o = Command::new(env!("CARGO_BIN_EXE_maslov"))
            .env("MASLOV_THREADS", n)
            .args(["path", "--seed", "11", "--input"])
            .arg(&input)
            .arg("--output")
            .arg(out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    threads("1", &a);
    threads("4", &b);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let c = s.path("c.json");
    let o = run("path", &input, &c, &["--seed", "12"]);
    assert!(o.status.success());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}
