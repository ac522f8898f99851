use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evcs-ph"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SHORT: &str = "[model]
kind = averaged
t_end = 0.01
sample_rate = 1e4
[controller]
kind = ph_pi
gamma = 3e6
delta = 1.5
[initial]
v_dc = 20
[outputs]
quantities = v_dc, i_gq
";

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_prints_the_steady_state() {
    let sc = scenarios().join("steady.scenario");
    let o = run(&["validate", "--scenario", sc.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("Q_dc"));
    assert!(out.contains("900"));
    assert!(out.contains("max real part") && out.contains("certificates: ok"));
}

#[test]
fn every_shipped_scenario_validates() {
    for e in fs::read_dir(scenarios()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "scenario") {
            let o = run(&["validate", "--scenario", p.to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0), "{}: {}", p.display(), stderr(&o));
        }
    }
}

#[test]
fn negative_gain_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.scenario", &SHORT.replace("gamma = 3e6", "gamma = -1"));
    let o = run(&["validate", "--scenario", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gamma"), "{}", stderr(&o));
}

#[test]
fn unknown_output_lists_the_aliases() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.scenario", &SHORT.replace("v_dc, i_gq", "v_dc, volts"));
    let o = run(&["simulate", "--scenario", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("volts") && err.contains("i_gq") && err.contains("v_bat"), "{err}");
}

#[test]
fn missing_file_is_an_io_error() {
    let o = run(&["validate", "--scenario", "/nonexistent/x.scenario"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn simulate_record_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "short.scenario", SHORT);
    let out = dir.path().to_str().unwrap();
    let o = run(&["simulate", "--scenario", p.to_str().unwrap(), "--out", out, "--seedless"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("short.csv")).unwrap();
    assert!(csv.starts_with("t [s],v_dc [V],i_gq [A]"));
    assert_eq!(csv.lines().count(), 102);
    let rec = dir.path().join("short.record.json");
    let o = run(&["validate", "--record", rec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    // tampering with the CSV breaks the record
    fs::write(dir.path().join("short.csv"), csv.replacen("9.0", "9.1", 1)).unwrap();
    let o = run(&["validate", "--record", rec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let c = dir.path().join("short.csv");
    fs::write(&c, &csv).unwrap();
    let o = run(&["compare", c.to_str().unwrap(), c.to_str().unwrap(), "--quantity", "v_dc"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains('0'));
    let o = run(&["compare", c.to_str().unwrap(), c.to_str().unwrap(), "--quantity", "m_q"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("i_gq"));
}

#[test]
fn fsw_override_changes_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[model]
kind = switched
t_end = 0.002
f_sw = 1e4
[controller]
kind = cascaded_pi
[outputs]
quantities = v_dc
";
    let p = write(dir.path(), "sw.scenario", text);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (d, f) in [(&a, None), (&b, Some("2e4"))] {
        fs::create_dir(d).unwrap();
        let mut args = vec!["simulate", "--scenario", p.to_str().unwrap(), "--out", d.to_str().unwrap()];
        if let Some(f) = f {
            args.extend(["--fsw", f]);
        }
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(d.join("sw.period_avg.csv").exists());
    }
    let ra = fs::read_to_string(a.join("sw.record.json")).unwrap();
    let rb = fs::read_to_string(b.join("sw.record.json")).unwrap();
    let hash = |s: &str| s.lines().find(|l| l.contains("scenario_hash")).unwrap().to_string();
    assert_ne!(hash(&ra), hash(&rb));
}

#[test]
fn design_on_toy_systems() {
    let osc = scenarios().join("oscillator.system");
    let o = run(&["design", "--system", osc.to_str().unwrap(), "--bass"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("K_hat"));
    let bad = scenarios().join("rank_deficient.system");
    let o = run(&["design", "--system", bad.to_str().unwrap(), "--bass"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn design_on_the_station() {
    let sc = scenarios().join("recovery_ph_pi.scenario");
    let o = run(&["design", "--scenario", sc.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("ph_p") && out.contains("ph_dae") && out.contains("ph_pi"));
}

#[test]
fn malformed_system_file_reports_the_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "x.system", "[A]\n0 1\n-1\n[D]\n1\n0\n");
    let o = run(&["design", "--system", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn batch_runs_each_scenario_once() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "one.scenario", SHORT);
    let b = write(dir.path(), "two.scenario", &SHORT.replace("ph_pi", "ph_p"));
    let out = dir.path().join("out");
    fs::create_dir(&out).unwrap();
    let o = run(&["batch", a.to_str().unwrap(), b.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for s in ["one", "two"] {
        assert!(out.join(format!("{s}.csv")).exists());
        assert!(out.join(format!("{s}.record.json")).exists());
    }
    let o = run(&["batch", a.to_str().unwrap(), a.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
