use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const XY: &str = "[model]\nkind = linear\nslope = 1\n";

fn corrosion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrosion")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_cfg(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

#[test]
fn pipeline_on_xy_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), XY);
    let out = tmp.path().join("out");
    let o = corrosion(&["pipeline", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    for f in ["nodes.csv", "tris.csv", "bedges.csv", "field.csv", "cauchy.csv", "gamma1.csv", "report.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    for f in ["gamma1_rec.csv", "fitreport.txt", "frec.csv", "segreport.txt", "comparison.txt", "schema.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let cmp = String::from_utf8(read(&out, "comparison.txt")).unwrap();
    let err: f64 = cmp.lines().find_map(|l| l.strip_prefix("sup_error = ")).unwrap().parse().unwrap();
    assert!(err <= 1e-3);
}

#[test]
fn staged_run_matches_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), XY);
    let staged = tmp.path().join("staged");
    let whole = tmp.path().join("whole");
    let s = staged.to_str().unwrap();
    for cmd in ["forward", "continue", "reconstruct"] {
        let o = corrosion(&[cmd, "--config", &cfg, "--out", s]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(code(&corrosion(&["pipeline", "--config", &cfg, "--out", whole.to_str().unwrap()])), 0);
    for f in ["cauchy.csv", "gamma1_rec.csv", "frec.csv", "segreport.txt"] {
        assert_eq!(read(&staged, f), read(&whole, f), "{f}");
    }
}

#[test]
fn reruns_are_byte_identical_and_seed_matters() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), &format!("{XY}noise.eps = 1e-3\n"));
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        assert_eq!(code(&corrosion(&["pipeline", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed])), 0);
        out
    };
    let (a, b, c) = (run("a", "3"), run("b", "3"), run("c", "4"));
    for f in ["cauchy.csv", "gamma1_rec.csv", "frec.csv", "fitreport.txt", "comparison.txt"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    assert_ne!(read(&a, "cauchy.csv"), read(&c, "cauchy.csv"));
}

#[test]
fn large_noise_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "noise.eps = 0.5\n");
    let o = corrosion(&["pipeline", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!([4, 5].contains(&code(&o)), "exit {}", code(&o));
    assert!(String::from_utf8_lossy(&o.stderr).contains("reconstruction:") || code(&o) == 4);
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    let cfg = write_cfg(tmp.path(), "[model]\na = 1.5\n");
    let o = corrosion(&["forward", "--config", &cfg, "--out", out]);
    assert_eq!(code(&o), 2);
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("line 2") && msg.contains("transfer coefficient must lie in (0,1)"), "{msg}");

    let cfg = write_cfg(tmp.path(), "domain.tags = 2, 1, 2, 1\n");
    let o = corrosion(&["forward", "--config", &cfg, "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gammaD"));

    assert_eq!(code(&corrosion(&["forward"])), 2);
    assert_eq!(code(&corrosion(&["forward", "--out", out, "--config", "/nonexistent/x.cfg"])), 2);
    assert_eq!(code(&corrosion(&["unknown", "--out", out])), 2);
    assert_eq!(code(&corrosion(&["continue", "--out", tmp.path().join("empty").to_str().unwrap()])), 2);
}

#[test]
fn forward_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "[solver]\nmax_iter = 1\n[mesh]\nn = 16\n");
    let o = corrosion(&["forward", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("forward:"));
}

#[test]
fn noise_below_the_data_floor_exits_4() {
    // cauchy.csv from the FEM carries a discretization floor far above the
    // declared 1e-9, which no regularization weight can reach
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    let cfg = write_cfg(tmp.path(), "mesh.n = 16\n");
    assert_eq!(code(&corrosion(&["forward", "--config", &cfg, "--out", o])), 0);
    let cfg = write_cfg(tmp.path(), "mesh.n = 16\nnoise.eps = 1e-9\n");
    let r = corrosion(&["continue", "--config", &cfg, "--out", o]);
    assert_eq!(code(&r), 4, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("fitreport.txt").exists());
}

#[test]
fn flat_profile_exits_5() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("gamma1_rec.csv");
    let mut text = String::from("t,u,dnu,du_dt\n");
    for k in 0..11 {
        text.push_str(&format!("{},0.5,0,0\n", k as f64 / 10.0));
    }
    fs::write(&input, text).unwrap();
    let o = corrosion(&["reconstruct", "--input", input.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 5);
}
