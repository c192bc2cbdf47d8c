//! End-to-end checks of the command-line interface and its exit-code
//! contract: 0 pass, 1 verification failure, 2 usage error, 3 construction
//! failure.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seclinsep"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn tmpfile(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("seclinsep-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn demo_passes_and_reports_metrics() {
    let out = run(&["demo"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("field=3 seed=42"));
    assert!(text.contains("cost=2 eta=1"));
    assert!(text.contains("decodable=true secure=true"));

    // A different field keeps the structural outcome.
    let out5 = run(&["demo", "--field", "5"]);
    assert!(out5.status.success());
    assert!(stdout(&out5).contains("cost=2 eta=1"));

    // A different seed may change coefficients but not the metrics line.
    let out7 = run(&["demo", "--seed", "7"]);
    assert!(out7.status.success());
    let verdict = |s: &str| {
        s.lines()
            .find(|l| l.starts_with("verdict:"))
            .map(str::to_owned)
    };
    assert_eq!(verdict(&text), verdict(&stdout(&out7)));

    // Identical invocations produce identical bytes.
    let again = run(&["demo"]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn build_then_verify_roundtrip() {
    let path = tmpfile("combined-8-4.json");
    let out = run(&[
        "build",
        "--n",
        "8",
        "--nr",
        "4",
        "--k",
        "8",
        "--scheme",
        "combined",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("lambda=3 eta=2"));

    let verify = run(&["verify", "--in", path.to_str().unwrap()]);
    assert!(verify.status.success(), "{}", stdout(&verify));
    let report: serde_json::Value = serde_json::from_str(&stdout(&verify)).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["randomness_size"], 2);
    assert_eq!(report["decodability"]["exhaustive"], true);
    fs::remove_file(&path).ok();
}

#[test]
fn build_is_deterministic() {
    let a = run(&["build", "--n", "6", "--nr", "4", "--scheme", "combined"]);
    let b = run(&["build", "--n", "6", "--nr", "4", "--scheme", "combined"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn build_summaries_match_theory() {
    // Without --out the JSON goes to stdout and the summary to stderr.
    let frac = run(&["build", "--n", "4", "--nr", "3", "--k", "4", "--scheme", "frac-rep"]);
    assert!(frac.status.success());
    assert!(String::from_utf8_lossy(&frac.stderr).contains("eta=1"));
    let scheme: serde_json::Value = serde_json::from_str(&stdout(&frac)).unwrap();
    assert_eq!(scheme["randomness_count"], 1);

    let cyc = run(&["build", "--n", "5", "--nr", "4", "--k", "5", "--scheme", "cyclic"]);
    assert!(cyc.status.success());
    assert!(String::from_utf8_lossy(&cyc.stderr).contains("eta=3"));
}

#[test]
fn unsupported_and_bad_parameters_exit_2() {
    let out = run(&["build", "--n", "5", "--nr", "3", "--scheme", "frac-rep"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["build", "--n", "5", "--nr", "9", "--scheme", "cyclic"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["build", "--n", "4", "--nr", "2", "--scheme", "cyclic", "--field", "15"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["converse", "--n", "9", "--m", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn retry_exhaustion_exits_3() {
    // Over F_2 the three cyclic coefficient columns cannot be pairwise
    // distinguished, so every draw leaves some two-server set undecodable
    // and the retry budget runs out.
    let out = run(&["build", "--n", "3", "--nr", "2", "--scheme", "cyclic", "--field", "2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn corrupted_scheme_fails_verification_with_exit_1() {
    let path = tmpfile("corrupt.json");
    let built = run(&[
        "build",
        "--n",
        "4",
        "--nr",
        "3",
        "--scheme",
        "frac-rep",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(built.status.success());
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    // Zero the target row's first coefficient: W_1 becomes unreachable.
    let entries = v["coeff_matrix"]["entries"].as_array_mut().unwrap();
    entries[0] = serde_json::json!(0);
    fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let verify = run(&["verify", "--in", path.to_str().unwrap()]);
    assert_eq!(verify.status.code(), Some(1), "{}", stdout(&verify));
    fs::remove_file(&path).ok();
}

#[test]
fn unparseable_scheme_exits_2() {
    let path = tmpfile("garbage.json");
    fs::write(&path, b"{not json").unwrap();
    let out = run(&["verify", "--in", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    fs::remove_file(&path).ok();

    let missing = run(&["verify", "--in", "/nonexistent/scheme.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn sampled_mode_is_labeled() {
    let path = tmpfile("sampled-12-6.json");
    let built = run(&[
        "build",
        "--n",
        "12",
        "--nr",
        "6",
        "--scheme",
        "combined",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(built.status.success());
    let verify = run(&[
        "verify",
        "--in",
        path.to_str().unwrap(),
        "--mode",
        "sampled",
        "--sample-count",
        "100",
    ]);
    assert!(verify.status.success(), "{}", stdout(&verify));
    let report: serde_json::Value = serde_json::from_str(&stdout(&verify)).unwrap();
    assert_eq!(report["decodability"]["exhaustive"], false);
    assert_eq!(report["decodability"]["subsets_checked"], 100);
    fs::remove_file(&path).ok();
}

#[test]
fn sweep_produces_expected_rows() {
    let out = run(&["sweep", "--n-range", "22..22", "--m-range", "1..22"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,m_prime,eta_cyclic,eta_combined,eta_floor,optimal");
    assert_eq!(lines.len(), 1 + 22);
    // M' = 11 divides 22: the combined scheme needs a single pad.
    assert!(lines.iter().any(|l| l.starts_with("22,11,11,1,1,")));
    // M' = 1: no grouping gain; combined matches cyclic at N - 1.
    assert!(lines.contains(&"22,1,21,21,21,1"));
    // Every row obeys floor <= combined <= cyclic.
    for l in &lines[1..] {
        let f: Vec<usize> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(f[4] <= f[3] && f[3] <= f[2], "row {l}");
    }

    // Determinism: identical bytes on identical invocations.
    let again = run(&["sweep", "--n-range", "22..22", "--m-range", "1..22"]);
    assert_eq!(stdout(&out), stdout(&again));

    // The grid shape used by the tradeoff figure.
    let grid = run(&["sweep", "--n-range", "16..30", "--m-range", "5..15"]);
    assert!(grid.status.success());
    assert_eq!(stdout(&grid).lines().count(), 1 + 15 * 11);
}

#[test]
fn converse_reports_min_max_and_h() {
    let out = run(&["converse", "--n", "3", "--m", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("min-max chain length: 2"));
    assert!(text.contains("matches h"));

    let out = run(&["converse", "--n", "5", "--m", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("min-max chain length: 3"));
    assert!(text.contains("matches h"));

    let out = run(&["converse", "--n", "4", "--m", "4"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("min-max chain length: 1"));
}
