use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const ISING5: &str = "[model]\nfamily = \"dissipative-ising\"\nn = 5\nj = 1.0\nhx = 1.3\nhz = 1.2\ngamma = 0.8\n";
const SEED4: &str = "[model]\nfamily = \"random-local\"\nn = 4\nj = 1.0\ngamma1 = 0.25\ngamma2 = 0.25\nrealization = { source = \"fixture\", value = 4 }\n";

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lindblad-lab"))
        .args(args)
        .env_remove("LINDBLAD_LAB_OUT")
        .env_remove("LINDBLAD_LAB_THREADS")
        .output()
        .expect("binary runs")
}

fn config(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Every file except the manifest, keyed by name.
fn bodies(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut m = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        if p.is_file() && name != "manifest.json" {
            m.insert(name, fs::read(&p).unwrap());
        }
    }
    m
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn list_fixtures_shows_seeds_and_operators() {
    let o = lab(&["list-fixtures"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    for seed in [1, 2, 3, 4, 17, 20] {
        assert!(text.lines().any(|l| l.split_whitespace().take(2).eq(["seed", &seed.to_string()])), "seed {seed} missing:\n{text}");
    }
    assert!(text.contains("figs-init-op") && text.contains("rand-init-op"));
}

#[test]
fn guard_and_config_errors_leave_no_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_string_lossy().into_owned();
    let big = config(&dir, "big.toml", &ISING5.replace("n = 5", "n = 9"));
    let o = lab(&["spectrum", "--config", &big, "--out", &out_s]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let missing = config(&dir, "missing.toml", &SEED4.replace("value = 4", "value = 99"));
    let o = lab(&["spectrum", "--config", &missing, "--out", &out_s]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("99"), "{}", stderr(&o));
    let typo = config(&dir, "typo.toml", &format!("[analysis]\nbinz = 4\n{ISING5}"));
    let o = lab(&["csr", "--config", &typo, "--out", &out_s]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("binz") && stderr(&o).contains("line 2"), "{}", stderr(&o));
    let wrong_kind = config(&dir, "kind.toml", &format!("kind = \"toy\"\n{ISING5}"));
    assert_eq!(code(&lab(&["csr", "--config", &wrong_kind, "--out", &out_s])), 2);
    assert_eq!(code(&lab(&["no-such-kind", "--config", &wrong_kind, "--out", &out_s])), 2);
    assert!(!out.exists());
}

#[test]
fn validate_only_checks() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = config(&dir, "ok.toml", ISING5);
    let o = lab(&["csr", "--config", &cfg, "--out", &out.to_string_lossy(), "--validate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ok"));
    assert!(!out.exists());
}

#[test]
fn csr_writes_spectrum_csr_and_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "csr.toml", &format!("name = \"ising5\"\n{ISING5}"));
    let out = dir.path().join("out");
    let o = lab(&["csr", "--config", &cfg, "--out", &out.to_string_lossy()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let exp = out.join("ising5");
    let files = bodies(&exp);
    for name in ["fig1_spectrum.csv", "fig2_csr.csv", "fig2_csr_hist.csv", "csr_stats.json"] {
        assert!(files.contains_key(name), "{name} missing");
    }
    let spectrum = String::from_utf8(files["fig1_spectrum.csv"].clone()).unwrap();
    let header = spectrum.lines().next().unwrap();
    assert!(header.contains("re") && header.contains("im"), "{header}");
    // d_L for N = 5 in the reflection-even sector
    assert_eq!(spectrum.lines().count() - 1, 544);
    let m = manifest(&exp);
    assert_eq!(m["kind"], "csr");
    let listed: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    let written: Vec<&str> = files.keys().map(String::as_str).collect();
    assert_eq!(listed, written);
    assert_eq!(m["model_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn reruns_with_warm_cache_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "e.toml", SEED4);
    let cache = dir.path().join("cache").to_string_lossy().into_owned();
    let run = |out: &str| {
        let o = lab(&["eigenops", "--config", &cfg, "--out", out, "--cache", &cache]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a.to_string_lossy());
    run(&b.to_string_lossy());
    let (fa, fb) = (bodies(&a.join("eigenops")), bodies(&b.join("eigenops")));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
    assert_eq!(manifest(&a.join("eigenops"))["files"], manifest(&b.join("eigenops"))["files"]);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "p.toml", &format!("{SEED4}[ensemble]\ncount = 6\nseed = 3\n"));
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = lab(&["purity", "--config", &cfg, "--out", &out.to_string_lossy(), "--threads", threads]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert_eq!(manifest(&out.join("purity"))["threads"], threads.parse::<u64>().unwrap());
        runs.push(bodies(&out.join("purity")));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn toy_kind_matches_analytic_profiles() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "toy.toml", SEED4);
    let out = dir.path().join("out");
    let o = lab(&["toy", "--config", &cfg, "--out", &out.to_string_lossy()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stats: serde_json::Value = serde_json::from_slice(&fs::read(out.join("toy/toy_stats.json")).unwrap()).unwrap();
    let dev = stats["max_deviation"].as_f64().unwrap();
    assert!(dev <= 1e-8, "max |Δp| {dev}");
}

#[test]
fn seed_sweep_table() {
    let dir = TempDir::new().unwrap();
    let body = "[model]\nfamily = \"two-site-only\"\nn = 4\ngamma2 = 1.0\nrealization = { source = \"fixture\", value = 4 }\n[sweep]\nsampled = [1, 100]\n";
    let cfg = config(&dir, "s.toml", body);
    let out = dir.path().join("out");
    let o = lab(&["seed-sweep", "--config", &cfg, "--out", &out.to_string_lossy()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(out.join("seed-sweep/fig8_seed_sweep.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header = rows.headers().unwrap().clone();
    for col in ["seed", "lambda_re", "size_left_over_n", "size_right_over_n"] {
        assert!(header.iter().any(|h| h == col), "{col} missing");
    }
    let records: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 100);
    let left = header.iter().position(|h| h == "size_left_over_n").unwrap();
    assert!(records.iter().any(|r| r[left].parse::<f64>().unwrap() >= 0.9));
    let m = manifest(&out.join("seed-sweep"));
    assert_eq!(m["prng"]["seeds"].as_array().unwrap().len(), 100);
}

#[test]
fn out_env_sets_root() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", ISING5);
    let o = Command::new(env!("CARGO_BIN_EXE_lindblad-lab"))
        .args(["spectrum", "--config", &cfg])
        .env("LINDBLAD_LAB_OUT", dir.path().join("env-root"))
        .env("LINDBLAD_LAB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest(&dir.path().join("env-root/spectrum"));
    assert_eq!(m["threads"], 2);
}
