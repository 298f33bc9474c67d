use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dirac_bohm::packets::make_initial_packet;
use dirac_bohm_cli::config::RunConfig;
use dirac_bohm_cli::output::sha256_file;
use serde_json::Value;

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirac-bohm"))
        .current_dir(dir)
        .env_remove("DIRAC_BOHM_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Data rows of a CSV file with its schema line checked.
fn rows(path: &Path, schema: &str) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# schema: dirac-bohm/{schema}/v1"));
    let body: String = lines.collect::<Vec<_>>().join("\n");
    csv::Reader::from_reader(body.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn field_at_time_zero_is_the_initial_data() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(
        tmp.path(),
        &[
            "field",
            "--out",
            "f",
            "--set",
            "field.t={min=0.0, max=0.0, n=1}",
            "--set",
            "field.s={min=0.3, max=0.3, n=1}",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&tmp.path().join("f/field.csv"), "field");
    assert_eq!(r.len(), 1);
    let x: Vec<f64> = r[0][..10].iter().map(|v| v.parse().unwrap()).collect();
    let psi = make_initial_packet(&RunConfig::default().packet)
        .unwrap()
        .value(0.3);
    for (got, want) in x[2..6]
        .iter()
        .zip([psi.minus.re, psi.minus.im, psi.plus.re, psi.plus.im])
    {
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }
    assert_eq!(r[0][10], "ok");
}

#[test]
fn field_norms_and_rerun_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["field", "--out", "f", "--set", "field.t={min=0.5, max=2.0, n=3}"];
    assert!(bin(tmp.path(), &args).status.success());
    let first = fs::read(tmp.path().join("f/field.csv")).unwrap();
    for r in rows(&tmp.path().join("f/field_norms.csv"), "field-norms") {
        let n: f64 = r[1].parse().unwrap();
        assert!((n - 1.0).abs() < 1e-4, "t = {}: {n}", r[0]);
    }
    assert!(bin(tmp.path(), &args).status.success());
    assert_eq!(first, fs::read(tmp.path().join("f/field.csv")).unwrap());
}

#[test]
fn manifest_lists_every_file_with_its_checksum() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(bin(
        tmp.path(),
        &[
            "trajectories",
            "--out",
            "t",
            "--n",
            "5",
            "--set",
            "trajectories.bisection=false"
        ]
    )
    .status
    .success());
    let dir = tmp.path().join("t");
    let m = json(&dir.join("manifest.json"));
    assert_eq!(m["schema"], "dirac-bohm/manifest/v1");
    assert_eq!(m["seed"], 1);
    let listed: Vec<String> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap().to_string())
        .collect();
    for f in m["files"].as_array().unwrap() {
        let p = dir.join(f["path"].as_str().unwrap());
        assert_eq!(sha256_file(&p).unwrap(), f["sha256"].as_str().unwrap());
    }
    let mut on_disk = vec!["summary.json".to_string()];
    for e in fs::read_dir(dir.join("trajectories")).unwrap() {
        on_disk.push(format!(
            "trajectories/{}",
            e.unwrap().file_name().to_string_lossy()
        ));
    }
    on_disk.sort();
    let mut sorted = listed.clone();
    sorted.sort();
    assert_eq!(sorted, on_disk);
    assert!(!dir.join("run.lock").exists());
    let cfg: RunConfig = serde_json::from_value(m["config"].clone()).unwrap();
    assert_eq!(cfg.trajectories.n, 5);
}

#[test]
fn trajectory_csv_columns() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(bin(
        tmp.path(),
        &[
            "trajectories",
            "--out",
            "t",
            "--n",
            "2",
            "--set",
            "trajectories.bisection=false"
        ]
    )
    .status
    .success());
    let r = rows(&tmp.path().join("t/trajectories/traj_0000.csv"), "trajectory");
    assert!(r.len() > 10);
    let header = fs::read_to_string(tmp.path().join("t/trajectories/traj_0000.csv")).unwrap();
    assert_eq!(header.lines().nth(1).unwrap(), "t,q,v,R,Theta,Omega,Phi");
    assert_eq!(r[0][0], "0.0");
}

#[test]
fn pinned_far_right_start_goes_right() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(
        tmp.path(),
        &[
            "trajectories",
            "--out",
            "t",
            "--set",
            "trajectories.positions=[3.0]",
            "--set",
            "trajectories.bisection=false",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&tmp.path().join("t/summary.json"));
    assert_eq!(s["summary"]["n"], 1);
    assert_eq!(s["members"][0]["classification"], "RIGHT");
}

#[test]
fn bifurcation_point_does_not_depend_on_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let mut s0 = Vec::new();
    let mut q0 = Vec::new();
    for seed in ["1", "2"] {
        let out = format!("s{seed}");
        assert!(bin(
            tmp.path(),
            &["trajectories", "--out", &out, "--seed", seed, "--n", "10"]
        )
        .status
        .success());
        let s = json(&tmp.path().join(&out).join("summary.json"));
        s0.push(s["s0_bisection"].as_f64().unwrap());
        q0.push(s["members"][0]["q0"].as_f64().unwrap());
    }
    assert_ne!(q0[0], q0[1]);
    assert!((s0[0] - s0[1]).abs() <= 1e-3);
}

#[test]
fn spa_compare_single_rung_has_no_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(
        tmp.path(),
        &[
            "spa-compare",
            "--out",
            "c",
            "--omegas",
            "50",
            "--set",
            "spa_compare.s={min=-1.0, max=1.0, n=21}",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let j = json(&tmp.path().join("c/spa_compare.json"));
    assert!(j["slope"].is_null());
    assert_eq!(j["underdetermined"], true);
    let r = rows(&tmp.path().join("c/spa_compare.csv"), "spa-compare");
    assert_eq!(r.len(), 1);
    assert!(r[0][1].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn observables_report() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(bin(tmp.path(), &["observables", "--out", "o"]).status.success());
    let j = json(&tmp.path().join("o/observables.json"));
    for p in j["momentum"].as_array().unwrap() {
        assert!((p.as_f64().unwrap() - 10.0).abs() < 1e-4);
    }
    let h0 = j["energy"][0].as_f64().unwrap();
    assert!((h0 - j["energy_initial_closed_form"].as_f64().unwrap()).abs() < 1e-8);
    assert_eq!(
        rows(
            &tmp.path().join("o/observables_trajectory.csv"),
            "observables-trajectory"
        )[0]
        .len(),
        5
    );

    for (sign, e) in [("positive", 1.0), ("negative", -1.0)] {
        let out = format!("e-{sign}");
        let mode = format!("packet.mode={{kind=\"eigen\", sign=\"{sign}\"}}");
        let o = bin(
            tmp.path(),
            &[
                "observables",
                "--out",
                &out,
                "--sigma",
                "30",
                "--k0",
                "2",
                "--mass",
                "1",
                "--set",
                &mode,
                "--set",
                "observables.times=[0.0]",
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let h = json(&tmp.path().join(&out).join("observables.json"))["energy"][0]
            .as_f64()
            .unwrap();
        assert!((h - e * 5.0_f64.sqrt()).abs() < 2e-3, "{sign}: {h}");
    }
}

#[test]
fn bloch_vectors_are_unit() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(bin(tmp.path(), &["bloch", "--out", "b", "--n", "10"])
        .status
        .success());
    for r in rows(&tmp.path().join("b/bloch.csv"), "bloch") {
        let v: Vec<f64> = r[2..5].iter().map(|x| x.parse().unwrap()).collect();
        assert!(((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 1.0).abs() < 1e-9);
    }
    let j = json(&tmp.path().join("b/bloch_clusters.json"));
    assert_eq!(j["schema"], "dirac-bohm/bloch/v1");
    assert_eq!(j["clusters"]["counts"].as_array().unwrap().len(), 2);
}

#[test]
fn barriers_report() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(bin(tmp.path(), &["barriers", "--out", "b"]).status.success());
    let j = json(&tmp.path().join("b/barriers.json"));
    assert_eq!(j["c_plus_quarter_pi"].as_f64().unwrap(), 0.0);
    assert_eq!(rows(&tmp.path().join("b/barriers.csv"), "barriers").len(), 100);
    let o = bin(
        tmp.path(),
        &["barriers", "--out", "bad", "--set", "barriers.theta0=[1.7]"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 6] = [
        (&["field", "--sigma", "0"], "packet.sigma"),
        (&["field", "--theta0", "3.5"], "packet.theta0"),
        (&["field", "--set", "field.s.n=0"], "empty"),
        (&["spa-compare", "--omegas", "50,100,300"], "not geometric"),
        (&["field", "--set", "packet.sgima=1"], "unknown field"),
        (&["field", "--config", "missing.toml"], "cannot read"),
    ];
    for (args, needle) in cases {
        let o = bin(tmp.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).contains(needle), "{args:?}: {}", stderr(&o));
    }
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn numerical_failure_exits_with_code_3_and_keeps_partial_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(
        tmp.path(),
        &[
            "field",
            "--out",
            "f",
            "--set",
            "quad.max_panels=1",
            "--set",
            "field.t={min=1.0, max=1.0, n=1}",
            "--set",
            "field.s={min=-1.0, max=1.0, n=3}",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let r = rows(&tmp.path().join("f/field.csv"), "field");
    assert_eq!(r.len(), 3);
    assert!(r.iter().any(|row| row[6] == "NaN" && row[10] != "ok"));
    assert!(tmp.path().join("f/manifest.json").exists());
}

#[test]
fn lockfile_blocks_a_second_run() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir_all(tmp.path().join("busy")).unwrap();
    fs::write(tmp.path().join("busy/run.lock"), "1\n").unwrap();
    let o = bin(tmp.path(), &["barriers", "--out", "busy"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("in use"));
}

#[test]
fn env_var_sets_the_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dirac-bohm"))
        .current_dir(tmp.path())
        .env("DIRAC_BOHM_OUT", tmp.path().join("root"))
        .arg("barriers")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("root/barriers/barriers.json").exists());
}

#[test]
fn config_file_and_flags_merge_and_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("run.toml"),
        "seed = 7\n[packet]\nk0 = 4\n[trajectories]\nn = 3\nmode = \"exact\"\n",
    )
    .unwrap();
    let o = bin(
        tmp.path(),
        &[
            "trajectories",
            "--config",
            "run.toml",
            "--k0",
            "5",
            "--print-config",
        ],
    );
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let cfg: RunConfig = toml::from_str(&text).unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.packet.k0, 5.0);
    assert_eq!(cfg.packet.mass, 3.0);
    assert_eq!(cfg.trajectories.n, 3);
    assert_eq!(toml::to_string(&cfg).unwrap(), text);
}
