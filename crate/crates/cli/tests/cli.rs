use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_landmark-dyn"));
    c.env_remove("LANDMARK_DYN_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

const SUBCOMMANDS: [&str; 8] = ["classify", "shoot", "twobody", "sde", "length", "figure1", "repro-collision", "run"];

#[test]
fn help_text_matches_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut pages: Vec<(String, Vec<&str>)> = vec![("main".into(), vec!["--help"])];
    for s in SUBCOMMANDS {
        pages.push((s.to_string(), vec![s, "--help"]));
    }
    for (name, args) in pages {
        let out = run(&args);
        assert_eq!(code(&out), 0);
        let text = stdout(&out);
        let path = golden_dir().join(format!("{name}.help"));
        if update {
            std::fs::write(&path, &text).unwrap();
        } else {
            let want = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
            assert_eq!(text, want, "help for `{name}` changed; rerun with UPDATE_GOLDEN=1");
        }
    }
}

#[test]
fn every_flag_is_documented() {
    for s in SUBCOMMANDS {
        let text = stdout(&run(&[s, "--help"]));
        for line in text.lines().filter(|l| l.trim_start().starts_with("--")) {
            let flag = line.split_whitespace().next().unwrap();
            let rest = line.trim_start()[flag.len()..].trim();
            let described = !rest.is_empty() && rest.split_whitespace().any(|w| !w.starts_with('<'));
            assert!(described, "{s}: `{flag}` has no description");
        }
    }
}

#[test]
fn empty_config_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    std::fs::write(&cfg, "").unwrap();
    let out = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("command"));
}

#[test]
fn unknown_key_reports_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "command = \"figure1\"\n\n[figure1]\nsampels = 10\n").unwrap();
    let out = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sampels") && err.contains("line 4"), "{err}");
}

#[test]
fn bad_flags_exit_with_one() {
    assert_eq!(code(&run(&["classify"])), 1);
    assert_eq!(code(&run(&["classify", "--kernel", "cubic"])), 1);
    assert_eq!(code(&run(&["sde", "--kernel", "gaussian", "--dt", "-1"])), 1);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn classify_verdicts_and_exit_codes() {
    let out = run(&["classify", "--kernel", "laplacian", "--json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["result"]["geodesic"], "incomplete");
    assert_eq!(v["result"]["a_used"], 1.0);
    assert!(v["result"]["evidence"].as_array().unwrap().iter().all(|e| e.get("eps").is_some() && e.get("partial").is_some()));
    assert!((v["result"]["exponent"]["gamma"].as_f64().unwrap() - 1.0).abs() < 1e-2);

    let text = stdout(&run(&["classify", "--kernel", "c1_bessel"]));
    assert!(text.contains("geodesically complete"), "{text}");
}

#[test]
fn reruns_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sde.toml");
    std::fs::write(
        &cfg,
        "command = \"sde\"\nseed = 7\n\n[kernel]\nvariant = \"log_modified\"\nc = 1.5\n\n\
         [sde]\nd = 2\nr0 = 0.1\ndt = 1e-3\nhorizon = 1.0\npaths = 200\nce = true\n\n\
         [output]\ndir = \"out\"\nformats = [\"json\", \"csv\"]\n",
    )
    .unwrap();
    let first = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let report = std::fs::read(dir.path().join("out/sde.json")).unwrap();
    let second = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(report, std::fs::read(dir.path().join("out/sde.json")).unwrap());
    assert_eq!(report, first.stdout);
    assert!(!dir.path().join("out/sde.svg").exists());

    let v = json(&first);
    assert_eq!(v["result"]["estimate"]["seed"], 7);
    assert_eq!(v["result"]["ce"]["conclusion"], "hits_zero_positive_prob");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);

    // the same experiment from flags hashes the same
    let flags = run(&[
        "sde", "--kernel", "log_modified:c=1.5", "--d", "2", "--r0", "0.1", "--dt", "1e-3", "--horizon", "1", "--paths",
        "200", "--seed", "7", "--ce",
    ]);
    assert_eq!(json(&flags)["config_hash"], v["config_hash"]);
    assert_eq!(flags.stdout, first.stdout);
}

#[test]
fn worker_count_does_not_change_results() {
    let args = ["sde", "--kernel", "gaussian", "--dt", "1e-3", "--horizon", "1", "--paths", "300"];
    let one = bin().args(args).env("LANDMARK_DYN_THREADS", "1").output().unwrap();
    let three = bin().args(args).env("LANDMARK_DYN_THREADS", "3").output().unwrap();
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, three.stdout);
    let bad = bin().args(args).env("LANDMARK_DYN_THREADS", "zero").output().unwrap();
    assert_eq!(code(&bad), 1);
}

#[test]
fn figure1_preset_writes_both_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["figure1", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.path().join("figure1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("r,laplacian,c1_bessel"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 401);
    assert_eq!(rows[0], vec![0.0, 1.0, 2.0]);
    assert_eq!(rows[400][0], 4.0);
    for r in &rows {
        assert!((r[1] - (-r[0]).exp()).abs() < 1e-15);
        assert!((r[2] - 2.0 * (1.0 + r[0]) * (-r[0]).exp()).abs() < 1e-14);
    }
    assert!(!csv.contains('\r'));
    let svg = std::fs::read_to_string(dir.path().join("figure1.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.contains("version=\"1.1\""));
    assert_eq!(svg.matches("<polyline").count(), 2);
    let v = json(&out);
    assert_eq!(v["result"]["kernels"][0]["geodesic"], "incomplete");
    assert_eq!(v["result"]["kernels"][1]["geodesic"], "complete");
}

#[test]
fn repro_collision_hits_closed_form_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["repro-collision", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("repro_collision.json")).unwrap()).unwrap();
    let t = v["result"]["t_collision"].as_f64().unwrap();
    assert!((t - 1.0).abs() < 1e-3, "{t}");
    assert!(v["result"]["max_position_error"].as_f64().unwrap() < 1e-6);
    let csv = std::fs::read_to_string(dir.path().join("repro_collision.csv")).unwrap();
    assert!(csv.starts_with("t,x_0_0,x_1_0,p_0_0,p_1_0,r,r_exact\n"));
    assert_eq!(csv.lines().count(), 202);
    assert!(dir.path().join("repro_collision.svg").exists());
}

#[test]
fn shoot_writes_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let init = dir.path().join("init.json");
    std::fs::write(&init, r#"{"n": 3, "d": 2, "x": [[0,0],[1,0],[0,1.5]], "p": [[0.3,0.1],[-0.2,0.4],[0,-0.5]]}"#).unwrap();
    let traj = dir.path().join("traj.csv");
    let out = run(&[
        "shoot", "--kernel", "gaussian", "--init", init.to_str().unwrap(), "--t-end", "2", "--out", traj.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&traj).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "t,x_0_0,x_0_1,x_1_0,x_1_1,x_2_0,x_2_1,p_0_0,p_0_1,p_1_0,p_1_1,p_2_0,p_2_1,H,P_0,P_1,L_0");
    let v = json(&out);
    assert_eq!(v["result"]["termination"]["kind"], "reached_t_end");
    assert!(v["result"]["conserved_drift"]["H"].as_f64().unwrap() < 1e-6);

    let missing = run(&["shoot", "--kernel", "gaussian", "--init", "/nonexistent.json", "--t-end", "1"]);
    assert_eq!(code(&missing), 1);
}

#[test]
fn twobody_forecast_and_simulation() {
    let out = run(&["twobody", "--kernel", "laplacian", "--u", "1,0", "--Q", "-1,0", "--P", "0,0"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["result"]["verdict"], "finite_time_collision");
    assert!(v["result"]["predicted_T"].as_f64().unwrap() > 0.0);

    let out = run(&["twobody", "--kernel", "laplacian", "--u", "1,0", "--Q", "-0.5,0.3", "--P", "0.2,0", "--forecast"]);
    assert_eq!(json(&out)["result"]["verdict"], "global_existence");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tb.csv");
    let out = run(&[
        "twobody", "--kernel", "gaussian", "--u", "1,0", "--Q", "0,0.5", "--P", "0,0", "--simulate", "--t-end", "3", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("t,u_0,u_1,Q_0,Q_1,v_0,v_1,P_0,P_1,r,D,omega\n"));
    assert!(json(&out)["result"]["drift"]["D"].as_f64().unwrap() < 1e-8);
}

#[test]
fn length_of_a_sampled_curve() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    let mut text = String::from("t,x_0_0,x_1_0\n");
    for j in 0..=20 {
        let t = j as f64 / 20.0;
        text.push_str(&format!("{t},{},{}\n", -1.0 + 0.5 * t, 1.0 - 0.5 * t));
    }
    std::fs::write(&curve, text).unwrap();
    let c = curve.to_str().unwrap();
    let out = run(&["length", "--kernel", "laplacian", "--curve", c, "--pair", "0", "1", "--escape", "0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = &json(&out)["result"];
    let len = r["length"].as_f64().unwrap();
    // head-on motion makes both bounds tight
    let slack = 1.0 + 1e-12;
    assert!(len * slack >= r["collision_bound"]["bound"].as_f64().unwrap());
    assert!(len * slack >= r["escape_bound"]["bound"].as_f64().unwrap());

    let fine = run(&["length", "--kernel", "laplacian", "--curve", c, "--refine", "4"]);
    let fine_len = json(&fine)["result"]["length"].as_f64().unwrap();
    assert!((fine_len - len).abs() < 1e-3 * len);
}

#[test]
fn config_cannot_carry_tables_for_other_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mixed.toml");
    std::fs::write(&cfg, "command = \"figure1\"\n[repro-collision]\nb = 2.0\n").unwrap();
    let out = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("repro-collision"));
}
