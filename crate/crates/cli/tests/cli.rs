use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qet"))
        .args(args)
        .env_remove("QET_CONFIG")
        .output()
        .expect("run qet")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn schema_valid(v: &Value) -> bool {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    for e in validator.iter_errors(v) {
        eprintln!("schema: {e} at {}", e.instance_path);
    }
    validator.is_valid(v)
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--output", "json"]);
    let o = qet(&all);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(schema_valid(&v), "{v}");
    v
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn derive_prints_paper_constants() {
    let o = qet(&["derive"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    let value = |name: &str| -> f64 {
        let line = s.lines().find(|l| l.starts_with(&format!("{name} = "))).unwrap();
        let x: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
        (x * 1000.0).round() / 1000.0
    };
    assert_eq!(value("f_A"), 0.789);
    assert_eq!(value("f_B"), 0.008);
    assert_eq!(value("f_V"), 0.483);
    assert_eq!(value("h_C"), 0.786);
}

#[test]
fn derive_json_has_every_constant() {
    let v = json(&["derive"]);
    let c = &v["constants"];
    for k in ["x_A", "x_B", "s", "theta", "phi", "delta", "f_A", "f_B", "f_V", "h_C"] {
        assert!(c[k].is_f64(), "{k}");
    }
    assert_eq!(c["params"]["kappa"], 0.393);
}

#[test]
fn missing_kappa_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[params]\nh_B = 0.01\n");
    let o = qet(&["--config", &cfg, "derive"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("kappa"));
}

#[test]
fn unreadable_config_and_bad_flags_exit_2() {
    assert_eq!(code(&qet(&["--config", "/nonexistent/qet.toml", "derive"])), 2);
    assert_eq!(code(&qet(&["--mode", "quantum", "table1"])), 2);
    assert_eq!(code(&qet(&["--kappa", "-1", "derive"])), 2);
}

#[test]
fn config_from_environment_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[params]\nh_B = 0.02\nkappa = 0.5\n");
    let run = |extra: &[&str]| {
        let o = Command::new(env!("CARGO_BIN_EXE_qet"))
            .args(extra)
            .args(["derive", "--output", "json"])
            .env("QET_CONFIG", &cfg)
            .output()
            .unwrap();
        serde_json::from_slice::<Value>(&o.stdout).unwrap()
    };
    let v = run(&[]);
    assert_eq!(v["constants"]["params"]["h_B"], 0.02);
    assert_eq!(v["constants"]["params"]["kappa"], 0.5);
    let v = run(&["--kappa", "0.3"]);
    assert_eq!(v["constants"]["params"]["kappa"], 0.3);
    assert_eq!(v["constants"]["params"]["h_B"], 0.02);
}

#[test]
fn table1_exact_reproduces_theory_column() {
    let o = qet(&["table1"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    let rows: Vec<Vec<&str>> = s.lines().map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows[2], ["1", "0.000", "0.000", "0.000"]);
    assert_eq!(rows[3], ["2", "0.789", "0.000", "1.277"]);
    assert_eq!(rows[4], ["3", "0.789", "-0.295", "1.572"]);
    assert!(s.contains("Extracted Δ(E_V+E_B)") && s.contains("-0.295"));
    assert!(rows[6].ends_with(&["0.295"]));
}

#[test]
fn table1_sampled_within_three_sigma() {
    let v = json(&["table1", "--mode", "sampled", "--shots", "100000", "--seed", "1"]);
    let theory = [[0.0, 0.0, 0.0], [0.789184, 0.0, 1.276683], [0.789184, -0.295444, 1.572127]];
    for (k, step) in v["report"]["steps"].as_array().unwrap().iter().enumerate() {
        for (i, (e, se)) in [("e_a", "se_a"), ("e_vb", "se_vb"), ("e_c", "se_c")].iter().enumerate() {
            let (e, se) = (step[e].as_f64().unwrap(), step[se].as_f64().unwrap());
            assert!((e - theory[k][i]).abs() <= 3.0 * se + 1e-6, "step {k} {e} ± {se}");
        }
    }
    let stored = v["report"]["stored"].as_f64().unwrap();
    assert!((0.285..=0.305).contains(&stored));
    assert_eq!(v["shots"], 100000);
}

#[test]
fn table1_sampled_is_deterministic() {
    let args = ["table1", "--mode", "sampled", "--shots", "5000", "--seed", "7", "--output", "csv"];
    let a = qet(&args);
    let b = qet(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = qet(&["table1", "--mode", "sampled", "--shots", "5000", "--seed", "8", "--output", "csv"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn table1_noisy_stays_physical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mode = \"noisy\"\nshots = 20000\n[noise]\np1 = 0.05\np2 = 0.1\nreadout_flip = 0.1\n",
    );
    let v = json(&["--config", &cfg, "table1", "--variant", "deferred"]);
    let h_c = 0.786063610657560;
    for step in v["report"]["steps"].as_array().unwrap() {
        let (e, se) = (step["e_c"].as_f64().unwrap(), step["se_c"].as_f64().unwrap());
        assert!(e >= -5.0 * se && e <= 2.0 * h_c + 5.0 * se);
    }
    assert!(v["report"]["stored"].as_f64().unwrap() < 0.29);
}

#[test]
fn slp_certifies_by_default() {
    let o = qet(&["slp"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.starts_with("min ΔE = 0.000000 (SLP certified)"), "{s}");
    assert!(s.contains("conditional strategy ΔE = -0.295"));
}

#[test]
fn slp_target_a_and_json() {
    let o = qet(&["slp", "--target", "a"]);
    assert_eq!(code(&o), 0);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[slp]\ngrid_n = 8\nrefine_iters = 50\nkraus_starts = 4\n");
    let v = json(&["--config", &cfg, "slp"]);
    assert_eq!(v["certified"], true);
    assert_eq!(v["kraus"]["method"], "random_refine");
    assert_eq!(v["unitary"]["argmin"]["kind"], "unitary");
}

#[test]
fn sweep_csv_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[sweep]\nkappa_min = 0.1\nkappa_max = 1.0\nkappa_steps = 19\nh_B_values = [0.01, 0.1]\n",
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        assert_eq!(code(&qet(&["--config", &cfg, "sweep", "--out", p.to_str().unwrap()])), 0);
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "kappa,h_B,energy");
    assert_eq!(lines.len(), 1 + 19 * 2);
    assert_eq!(lines[1], "0.1,0.01,0.151590717429");
    let v = json(&["--config", &cfg, "sweep"]);
    assert_eq!(v["rows"].as_array().unwrap().len(), 38);
}

#[test]
fn sweep_to_unwritable_path_exits_3() {
    let o = qet(&["sweep", "--out", "/nonexistent/dir/sweep.csv"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn maximize_default() {
    let v = json(&["maximize"]);
    let k = v["optimum"]["kappa_star"].as_f64().unwrap();
    let e = v["optimum"]["e_star"].as_f64().unwrap();
    assert!((k - 0.4015795).abs() < 1e-5, "{k}");
    assert!((0.294..=0.296).contains(&e));
    let o = qet(&["--h-b", "1e-6", "maximize"]);
    assert!(stdout(&o).contains("κ* = 0.393"));
}

#[test]
fn maximize_bad_bracket_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[maximize]\nbracket = [0.5, 0.5001]\n");
    assert_eq!(code(&qet(&["--config", &cfg, "maximize"])), 2);
}

fn ry_angles(text: &str) -> Vec<f64> {
    text.match_indices("ry(")
        .map(|(i, _)| {
            let rest = &text[i + 3..];
            rest[..rest.find(')').unwrap()].parse().unwrap()
        })
        .collect()
}

#[test]
fn export_dynamic_and_deferred() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for variant in ["dynamic", "deferred"] {
        let o = qet(&["export", "--variant", variant, "--out", d]);
        assert_eq!(code(&o), 0);
        assert_eq!(stdout(&o).lines().count(), 3);
    }
    let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();

    let dyn2 = read("qet_dynamic_step2.qasm");
    let m = dyn2.find("measure").unwrap();
    let cond = dyn2.find("if (").unwrap();
    assert!(m < cond);
    assert!(dyn2[cond..].contains("ry("));

    for k in 1..=3 {
        let text = read(&format!("qet_deferred_step{k}.qasm"));
        assert!(!text.split(|c: char| !c.is_alphanumeric()).any(|t| t == "if"));
    }

    let derive = json(&["derive"]);
    let theta = derive["constants"]["theta"].as_f64().unwrap();
    let delta = derive["constants"]["delta"].as_f64().unwrap();
    let angles = ry_angles(&read("qet_deferred_step3.qasm"));
    assert!((angles[0] + 2.0 * theta).abs() < 1e-12);
    assert!(angles[2..].iter().all(|a| (a.abs() - 2.0 * delta).abs() < 1e-12));
}

#[test]
fn export_to_unwritable_dir_exits_3() {
    let file = tempfile::NamedTempFile::new().unwrap();
    let under_file = file.path().join("sub");
    let o = qet(&["export", "--out", under_file.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn export_json_lists_files() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&["export", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(v["files"].as_array().unwrap().len(), 3);
}
