use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use resonet_cli::scenarios::{
    ATTRACTOR_CSV_HEADER, COMPARISON_CSV_HEADER, EULER_CSV_HEADER, LYAPUNOV_CSV_HEADER,
    OSCILLATION_CSV_HEADER,
};
use resonet_core::des::export::DES_CSV_HEADER;
use resonet_core::fluid::export::FLUID_CSV_HEADER;
use resonet_core::nlmp::{read_lattice, NLMP_CSV_HEADER};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_resonet"));
    c.env_remove("RESONET_THREADS");
    c
}

fn config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn cycle_check_defaults_pass_with_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", "{}");
    let out = tmp.path().join("out");
    let o = run(&["cycle-check", "--config", s(&cfg), "--out", s(&out), "--plot"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(header(&out.join("fluid.csv")), FLUID_CSV_HEADER);
    let r = report(&out);
    assert_eq!(r["pass"], true);
    assert!((r["summary"]["period"].as_f64().unwrap() - 2.0).abs() <= 1e-2);
    for c in r["checks"].as_array().unwrap() {
        assert!(c["value"].as_f64().unwrap() <= 1e-3);
    }
    for name in ["fluid_imbalance.svg", "fluid_dist_to_cycle.svg"] {
        let svg = fs::read_to_string(out.join(name)).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains(r#"width="960" height="540""#));
    }
}

#[test]
fn fixed_point_stays_put() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "c.json",
        r#"{"scenario": "fixed-point", "branch": "symmetric", "init": {"kind": "delta", "state": [1, 0, 0, 0, 0]}}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&["fixed-point", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success());
    let r = report(&out);
    assert!(r["summary"]["sup_deviation"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn negative_rate_exits_2_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", r#"{"network": {"gamma_a": -2.0}}"#);
    let o = run(&["cycle-check", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("network.gamma_a"));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let cases = [
        r#"{"network": {"gamma_z": 1}}"#,
        r#"{"bogus": true}"#,
        r#"{"n": "ten"}"#,
        r#"{"output": {"format": "xml"}}"#,
        "not json",
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = config(tmp.path(), &format!("c{i}.json"), text);
        let o = run(&["cycle-check", "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(2), "{text}");
    }
    // Required fields of the simulator scenario.
    let cfg = config(tmp.path(), "des.json", r#"{"n": 3, "t_end": 1}"#);
    let o = run(&["des-run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`m`"));
    // Unknown scenario and missing config are argument errors.
    assert_eq!(run(&["warp", "--config", s(&cfg)]).status.code(), Some(2));
    assert_eq!(run(&["cycle-check", "--config", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn sweep_argument_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", r#"{"scenario": "euler-convergence", "n": 10}"#);
    let out = tmp.path().join("o");
    let o = run(&["sweep", "--config", s(&cfg), "--axis", "n", "--values", "", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["sweep", "--config", s(&cfg), "--axis", "nope", "--values", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn truncation_alarm_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", r#"{"n": 20, "t_end": 40, "x_max": 22}"#);
    let o = run(&["nlmp-run", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("boundary mass"));
}

#[test]
fn failed_checks_exit_1_after_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", r#"{"n": 10, "replicas": 5}"#);
    let out = tmp.path().join("o");
    let o = run(&["euler-convergence", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(&out)["pass"], false);
    assert_eq!(header(&out.join("euler.csv")), EULER_CSV_HEADER);
}

#[test]
fn documented_headers() {
    let tmp = tempfile::tempdir().unwrap();
    type Case<'a> = (&'a str, &'a str, &'a [(&'a str, &'a str)]);
    let cases: [Case; 6] = [
        (
            "des-run",
            r#"{"m": 20, "n": 4, "t_end": 2, "compare_nlmp": true}"#,
            &[("des.csv", DES_CSV_HEADER), ("nlmp.csv", NLMP_CSV_HEADER), ("comparison.csv", COMPARISON_CSV_HEADER)],
        ),
        ("nlmp-run", r#"{"n": 4, "t_end": 2, "x_max": 40}"#, &[("nlmp.csv", NLMP_CSV_HEADER)]),
        ("attractor", r#"{"replicas": 2, "dt": 1e-3, "t_end": 1, "t_settle": 0.5}"#, &[("attractor.csv", ATTRACTOR_CSV_HEADER)]),
        ("lyapunov", r#"{"replicas": 2}"#, &[("lyapunov.csv", LYAPUNOV_CSV_HEADER)]),
        ("measure-run", r#"{"t_end": 1}"#, &[("fluid.csv", FLUID_CSV_HEADER)]),
        (
            "oscillation",
            r#"{"n": 4, "x_max": 40, "t_end": 1}"#,
            &[("oscillation.csv", OSCILLATION_CSV_HEADER)],
        ),
    ];
    for (i, (scenario, json, files)) in cases.iter().enumerate() {
        let cfg = config(tmp.path(), &format!("c{i}.json"), json);
        let out = tmp.path().join(format!("o{i}"));
        let o = run(&[scenario, "--config", s(&cfg), "--out", s(&out)]);
        assert!(o.status.code().unwrap() <= 1, "{scenario}: {}", String::from_utf8_lossy(&o.stderr));
        for (file, h) in *files {
            assert_eq!(header(&out.join(file)), *h, "{scenario} {file}");
        }
        assert_eq!(report(&out)["scenario"], *scenario);
    }
    let bytes = fs::read(tmp.path().join("o1").join("final_lattice.rsnl")).unwrap();
    let (mu, t) = read_lattice(&bytes[..]).unwrap();
    assert_eq!((mu.x_max(), mu.n(), t), (40, 4, 2.0));
}

#[test]
fn json_format_mirrors_the_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", r#"{"t_end": 0.5, "output": {"format": "json"}}"#);
    let out = tmp.path().join("o");
    assert!(run(&["measure-run", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let rows: Value = serde_json::from_str(&fs::read_to_string(out.join("fluid.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 51);
    let keys: Vec<&str> = FLUID_CSV_HEADER.split(',').collect();
    for k in keys {
        assert!(rows[0].get(k).is_some(), "{k}");
    }
    assert!(!out.join("fluid.csv").exists());
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "c.json",
        r#"{"m": 30, "n": 4, "t_end": 4, "replicas": 3, "compare_nlmp": true, "seed": 8}"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&["des-run", "--config", s(&cfg), "--out", s(&a), "--plot"]).status.success());
    let o = bin()
        .args(["des-run", "--config", s(&cfg), "--out", s(&b), "--plot"])
        .env("RESONET_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    let fa = files_in(&a);
    assert!(fa.iter().any(|(n, _)| n.ends_with(".svg")));
    assert_eq!(fa, files_in(&b));

    // A different seed changes the simulator output.
    let c = tmp.path().join("c");
    assert!(run(&["des-run", "--config", s(&cfg), "--out", s(&c), "--seed", "9"]).status.success());
    assert_ne!(fs::read(a.join("des_r0.csv")).unwrap(), fs::read(c.join("des_r0.csv")).unwrap());
    assert_eq!(report(&c)["seed"], 9);
}

#[test]
fn bad_thread_count_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", "{}");
    let o = bin()
        .args(["fixed-point", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))])
        .env("RESONET_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

fn medians(dir: &Path, column: usize) -> Vec<f64> {
    fs::read_to_string(dir.join("medians.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(column).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn euler_sweep_over_n_decreases() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", r#"{"scenario": "euler-convergence", "replicas": 30, "seed": 2}"#);
    let out = tmp.path().join("o");
    let o = run(&["sweep", "--config", s(&cfg), "--axis", "n", "--values", "10,100,1000", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(header(&out.join("sweep.csv")), "n,replica,status,sup_distance");
    assert_eq!(header(&out.join("medians.csv")), "n,status,replicas,sup_distance");
    let m = medians(&out, 3);
    assert_eq!(m.len(), 3);
    assert!(m[0] > m[1] && m[1] > m[2], "{m:?}");
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 91);
    for k in 0..3 {
        assert!(out.join(format!("cell_{k:03}")).join("euler.csv").exists());
    }
    let rep: Value = serde_json::from_str(&fs::read_to_string(out.join("sweep_report.json")).unwrap()).unwrap();
    let seeds: Vec<u64> = rep["cells"].as_array().unwrap().iter().map(|c| c["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, vec![2, 2 ^ (1 << 32), 2 ^ (2 << 32)]);
}

#[test]
fn population_sweep_against_the_master_equation_decreases() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "c.json",
        r#"{"scenario": "des-run", "n": 5, "t_end": 10, "x_max": 25, "replicas": 9, "compare_nlmp": true, "seed": 1}"#,
    );
    let out = tmp.path().join("o");
    let o = run(&["sweep", "--config", s(&cfg), "--axis", "m", "--values", "50,200,500", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(header(&out.join("medians.csv")), "m,status,replicas,sup_mean_l1,final_marginal_w1");
    for col in [3, 4] {
        let m = medians(&out, col);
        assert!(m[0] > m[1] && m[1] > m[2], "{m:?}");
    }
}

#[test]
fn failed_cells_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", r#"{"scenario": "nlmp-run", "n": 20, "t_end": 40}"#);
    let out = tmp.path().join("o");
    let o = run(&["sweep", "--config", s(&cfg), "--axis", "x_max", "--values", "22,120", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("medians.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(rows[0].starts_with("22,failed,0"));
    assert!(rows[1].starts_with("120,ok,1"));
    let rep: Value = serde_json::from_str(&fs::read_to_string(out.join("sweep_report.json")).unwrap()).unwrap();
    assert!(rep["cells"][0]["error"].as_str().unwrap().contains("truncation"));
}
