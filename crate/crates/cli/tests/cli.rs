use std::path::Path;
use std::process::{Command, Output};

fn isosr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isosr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FRONT_HEADER: &str = "complexity,loss,canonical_form,c1_pass,c2_pass,c3_pass,params";

fn small_config(dir: &Path, engine: &str, runs: usize) -> std::path::PathBuf {
    let text = format!(
        r#"engine = "{engine}"
seed = 11
runs = {runs}
deterministic = true

[dataset]
model = "langmuir"
params = [5.0, 2.0]
noise = 0.01
seed = 3

[ga]
population = 16
islands = 1
generations = 3

[bsr]
steps = 300
thin = 10

[fit]
restarts = 2
max_iter = 200
"#
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn check_langmuir_passes_everything() {
    let o = isosr(&["check", "(c1*p)/(c2+p)", "--params", "5,2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("C1 pass, C2 pass (slope 2.5), C3 pass"), "{}", stdout(&o));
}

#[test]
fn check_offset_line_fails_c1() {
    let o = isosr(&["check", "c1*p + c2", "--params", "1,1"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("C1 fail"), "{}", stdout(&o));
}

#[test]
fn check_sqrt_fails_c2() {
    let o = isosr(&["check", "sqrt(p)"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("C2 fail"), "{}", stdout(&o));
}

#[test]
fn parse_error_exits_2() {
    let o = isosr(&["check", "c1*p/(", "--params", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = isosr(&["canon", "p +* 2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn wrong_param_count_exits_2() {
    let o = isosr(&["check", "c1*p/(c2+p)", "--params", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn canon_drops_zero_and_reports_complexity() {
    let o = isosr(&["canon", "(c1*p+0)/(c2+p)"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("(c1 * p) / (c2 + p)"));
    assert!(out.contains("canonical complexity 7"), "{out}");
}

#[test]
fn canon_makes_denominator_monic() {
    let o = isosr(&["canon", "c1*p/(c2*p^2+c3*p+c4)"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next(), Some("(c1 * p) / ((c2 + (c3 * p)) + (p ^ 2))"));
}

#[test]
fn synth_then_fit_recovers_langmuir() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("l.csv");
    let o = isosr(&["synth", "langmuir", "--params", "5,2", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("pressure,loading"));
    assert_eq!(text.lines().count(), 21);
    let o = isosr(&["fit", "c1*p/(c2+p)", "--data", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let params: Vec<f64> = out
        .lines()
        .find_map(|l| l.strip_prefix("params "))
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((params[0] - 5.0).abs() < 0.05 && (params[1] - 2.0).abs() < 0.02, "{out}");
}

#[test]
fn synth_rejects_bet_past_the_pole() {
    let o = isosr(&["synth", "bet", "--lo", "0.01", "--hi", "1.5"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_dataset_exits_2_and_names_path() {
    let o = isosr(&["search", "--data", "/no/such/file.csv", "--runs", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/file.csv"), "{}", stderr(&o));
}

#[test]
fn search_is_reproducible_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "ga", 2);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = isosr(&["search", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let merged = std::fs::read(a.join("merged_front.csv")).unwrap();
    assert_eq!(merged, std::fs::read(b.join("merged_front.csv")).unwrap());
    assert!(String::from_utf8_lossy(&merged).starts_with(FRONT_HEADER));
    for f in ["run_1_front.csv", "run_2_front.csv", "pass_rates.csv", "manifest.toml"] {
        assert!(a.join(f).exists(), "{f}");
    }
    let manifest = std::fs::read_to_string(a.join("manifest.toml")).unwrap();
    assert!(manifest.contains("config_hash") && manifest.contains("seed = 11"), "{manifest}");

    let c = dir.path().join("c");
    let o = isosr(&["search", "--config", a.join("manifest.toml").to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(merged, std::fs::read(c.join("merged_front.csv")).unwrap());
}

#[test]
fn bsr_search_writes_one_front_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "bsr", 8);
    let out = dir.path().join("out");
    let o = isosr(&["search", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--constraints", "off"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fronts = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("run_"))
        .count();
    assert_eq!(fronts, 8);
    assert!(out.join("merged_front.csv").exists());
    let rates = std::fs::read_to_string(out.join("pass_rates.csv")).unwrap();
    assert!(rates.lines().nth(1).unwrap().contains(",false,bsr,"), "{rates}");

    let o = isosr(&["report", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("dataset,constraints_active,bsr_c1,bsr_c2,bsr_c3,ga_c1,ga_c2,ga_c3"));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "engine = \"ga\"\ngenerashuns = 4\n").unwrap();
    let o = isosr(&["search", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
