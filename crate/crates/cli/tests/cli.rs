use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sldm::checkpoint::Checkpoint;
use sldm::graph::read_graph;
use sldm::init::{init_params, InitMethod};
use sldm::optim::TrainConfig;
use sldm::viz::LayoutExport;
use tempfile::TempDir;

fn sldm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sldm"))
        .current_dir(dir)
        .args(args)
        .env_remove("SLDM_K")
        .env_remove("SLDM_SEED")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sldm(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Two loosely linked cliques with a few negative bridges.
fn raw_edges() -> String {
    let mut s = String::from("# src dst weight\n");
    for block in 0..2 {
        let base = block * 8;
        for i in 0..8 {
            for j in (i + 1)..8 {
                if (i + j) % 3 != 0 {
                    s += &format!("n{} n{} 1\n", base + i, base + j);
                }
            }
        }
    }
    for (i, j) in [(0, 8), (3, 11), (5, 14), (7, 9)] {
        s += &format!("n{i} n{j} -1\n");
    }
    s
}

fn setup() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("raw.txt"), raw_edges()).unwrap();
    ok(dir.path(), &["ingest", "raw.txt", "--lcc", "-o", "g.graph"]);
    let g = dir.path().join("g.graph");
    (dir, g)
}

fn load_checkpoint(p: &Path) -> Checkpoint {
    Checkpoint::read(fs::File::open(p).unwrap()).unwrap()
}

#[test]
fn help_documents_every_command() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["--help"]);
    for cmd in ["ingest", "fit", "generate", "eval", "export-viz"] {
        assert!(out.contains(cmd), "{cmd} missing from help");
    }
    let fit = ok(dir.path(), &["fit", "--help"]);
    for flag in ["--model", "--k", "--lr", "--iters", "--sample-size", "--rho", "--seed", "--variant", "--config"] {
        assert!(fit.contains(flag), "{flag} missing from fit help");
    }
    assert!(fit.contains("SLDM_LR"));
}

#[test]
fn ingest_writes_stats_and_is_idempotent() {
    let (dir, g) = setup();
    let graph = read_graph(fs::read(&g).unwrap().as_slice()).unwrap();
    assert_eq!(graph.n_nodes(), 16);
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("g.graph.stats.json")).unwrap()).unwrap();
    assert_eq!(stats["n_neg"], 4);
    assert!(dir.path().join("g.graph.manifest.json").exists());

    ok(dir.path(), &["ingest", "g.graph", "--lcc", "-o", "again.graph"]);
    assert_eq!(fs::read(&g).unwrap(), fs::read(dir.path().join("again.graph")).unwrap());
}

#[test]
fn ingest_failures_exit_with_data_code() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("empty.txt"), "").unwrap();
    assert_eq!(code(&sldm(dir.path(), &["ingest", "empty.txt", "-o", "x.graph"])), 2);
    assert_eq!(code(&sldm(dir.path(), &["ingest", "missing.txt", "-o", "x.graph"])), 2);
    fs::write(dir.path().join("bad.txt"), "a b 1\nb c x\n").unwrap();
    let out = sldm(dir.path(), &["ingest", "bad.txt", "-o", "x.graph"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn repeated_pairs_need_aggregate() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("t.txt"), "a b 1 10\na b 2 20\nb a -1 30\nb c -1 40\n").unwrap();
    assert_eq!(
        code(&sldm(dir.path(), &["ingest", "t.txt", "--directed", "-o", "x.graph"])),
        2
    );
    ok(dir.path(), &["ingest", "t.txt", "--directed", "--aggregate", "-o", "d.graph"]);
    let d = read_graph(fs::read(dir.path().join("d.graph")).unwrap().as_slice()).unwrap();
    assert!(d.is_directed());
    assert_eq!(d.weight(0, 1), 3);
    assert_eq!(d.weight(1, 0), -1);
    ok(dir.path(), &["ingest", "t.txt", "--aggregate", "-o", "u.graph"]);
    let u = read_graph(fs::read(dir.path().join("u.graph")).unwrap().as_slice()).unwrap();
    assert!(!u.is_directed());
    assert_eq!(u.weight(0, 1), 2);
}

#[test]
fn zero_iterations_checkpoint_is_the_initialization() {
    let (dir, g) = setup();
    ok(dir.path(), &["fit", "g.graph", "--iters", "0", "--k", "3", "--model", "slim", "--seed", "4", "-o", "c.json"]);
    let cp = load_checkpoint(&dir.path().join("c.json"));
    let graph = read_graph(fs::read(&g).unwrap().as_slice()).unwrap();
    let init = init_params(&graph, &cp.config, InitMethod::Spectral).unwrap();
    assert_eq!(cp.params().unwrap(), init);
    assert_eq!(cp.config.seed, 4);
}

#[test]
fn fit_reruns_are_bit_identical() {
    let (dir, _) = setup();
    for out in ["a.json", "b.json"] {
        ok(dir.path(), &["fit", "g.graph", "--iters", "30", "--k", "2", "--seed", "9", "--deterministic", "-o", out]);
    }
    assert_eq!(
        fs::read(dir.path().join("a.json")).unwrap(),
        fs::read(dir.path().join("b.json")).unwrap()
    );
    let trace = fs::read_to_string(dir.path().join("a.json.trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 31);
}

#[test]
fn flags_and_env_override_config_file() {
    let (dir, _) = setup();
    let mut cfg = TrainConfig {
        k: 3,
        iters: 5,
        lr: 0.01,
        ..TrainConfig::default()
    };
    cfg.seed = 11;
    fs::write(dir.path().join("cfg.json"), serde_json::to_string(&cfg).unwrap()).unwrap();
    ok(dir.path(), &["fit", "g.graph", "--config", "cfg.json", "--k", "2", "-o", "c.json"]);
    let cp = load_checkpoint(&dir.path().join("c.json"));
    assert_eq!((cp.k, cp.config.iters, cp.config.lr, cp.seed), (2, 5, 0.01, 11));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("c.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["train"]["k"], 2);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);

    let out = Command::new(env!("CARGO_BIN_EXE_sldm"))
        .current_dir(dir.path())
        .args(["fit", "g.graph", "--config", "cfg.json", "-o", "e.json"])
        .env("SLDM_K", "4")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(load_checkpoint(&dir.path().join("e.json")).k, 4);
}

#[test]
fn bad_config_and_mismatched_variant_are_usage_errors() {
    let (dir, _) = setup();
    fs::write(dir.path().join("cfg.json"), "{\"k\": \"many\"}").unwrap();
    assert_eq!(code(&sldm(dir.path(), &["fit", "g.graph", "--config", "cfg.json", "-o", "c.json"])), 1);
    assert_eq!(code(&sldm(dir.path(), &["fit", "g.graph", "--variant", "directed", "-o", "c.json"])), 1);
    assert_eq!(code(&sldm(dir.path(), &["fit", "raw.txt", "-o", "c.json"])), 1);
}

#[test]
fn numeric_blowup_exits_with_numeric_code() {
    let (dir, _) = setup();
    let out = sldm(dir.path(), &["fit", "g.graph", "--k", "2", "--lr", "1e300", "--iters", "5", "-o", "c.json"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

fn recipe(n: usize) -> String {
    format!(
        r#"{{"model": {{"n_nodes": {n}, "k_archetypes": 2, "alpha": [1.0, 1.0], "mu_gamma": 0.5,
           "sigma_gamma": 0.5, "mu_delta": 0.0, "sigma_delta": 0.5, "mu_a": [0.0, 0.0],
           "sigma_a": 1.0, "seed": 3}}}}"#
    )
}

#[test]
fn generate_two_nodes_has_at_most_one_edge() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("r.json"), recipe(2)).unwrap();
    let line = ok(dir.path(), &["generate", "--config", "r.json", "-o", "tiny.graph"]);
    assert!(line.trim().starts_with('(') && line.trim().ends_with(')'));
    let g = read_graph(fs::read(dir.path().join("tiny.graph")).unwrap().as_slice()).unwrap();
    assert_eq!(g.n_nodes(), 2);
    assert!(g.n_edges() <= 1);
    assert!(dir.path().join("tiny.graph.truth.json").exists());
}

#[test]
fn generate_is_reproducible_and_seed_overrides_recipe() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("r.json"), recipe(120)).unwrap();
    ok(dir.path(), &["generate", "--config", "r.json", "-o", "a.graph"]);
    ok(dir.path(), &["generate", "--config", "r.json", "-o", "b.graph"]);
    ok(dir.path(), &["generate", "--config", "r.json", "--seed", "77", "-o", "c.graph"]);
    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a.graph"), read("b.graph"));
    assert_ne!(read("a.graph"), read("c.graph"));
    assert_eq!(code(&sldm(dir.path(), &["generate", "-o", "x.graph"])), 1);
}

#[test]
fn generate_from_checkpoint() {
    let (dir, _) = setup();
    ok(dir.path(), &["fit", "g.graph", "--iters", "20", "--k", "2", "-o", "c.json"]);
    ok(dir.path(), &["generate", "--from-checkpoint", "c.json", "--seed", "1", "-o", "re.graph"]);
    let g = read_graph(fs::read(dir.path().join("re.graph")).unwrap().as_slice()).unwrap();
    assert_eq!(g.n_nodes(), 16);
    assert_eq!(g.labels().unwrap()[0], "n0");
}

#[test]
fn eval_writes_reports_and_rejects_empty_holdout() {
    let (dir, _) = setup();
    let out = sldm(dir.path(), &["eval", "g.graph", "--holdout", "0", "-o", "r.json"]);
    assert_eq!(code(&out), 1);

    let args = ["eval", "g.graph", "--k", "2", "--iters", "40", "--folds", "2", "--seed", "5", "-o"];
    let table = ok(dir.path(), &[&args[..], &["r1.json"]].concat());
    assert!(table.contains("AUC-ROC") && table.contains("p@z"));
    ok(dir.path(), &[&args[..], &["r2.json"]].concat());
    let a = fs::read_to_string(dir.path().join("r1.json")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("r2.json")).unwrap());
    let csv = fs::read_to_string(dir.path().join("r1.csv")).unwrap();
    assert!(csv.starts_with("variant,k,task,auc_roc,auc_pr"));
}

#[test]
fn export_viz_modes_and_failures() {
    let (dir, _) = setup();
    ok(dir.path(), &["fit", "g.graph", "--iters", "20", "--k", "3", "--model", "slim", "-o", "slim.json"]);
    ok(dir.path(), &["fit", "g.graph", "--iters", "20", "--k", "3", "-o", "sldm.json"]);

    ok(
        dir.path(),
        &["export-viz", "slim.json", "--mode", "circular", "--graph", "g.graph", "--signs", "negative", "--csv", "-o", "circ.json"],
    );
    let layout: LayoutExport = serde_json::from_str(&fs::read_to_string(dir.path().join("circ.json")).unwrap()).unwrap();
    assert_eq!(layout.archetypes.len(), 3);
    for a in &layout.archetypes {
        assert!((a.x.hypot(a.y) - 1.0).abs() < 1e-12);
    }
    assert_eq!(layout.edges.len(), 4);
    assert!(layout.edges.iter().all(|e| e.sign == -1));
    assert!(dir.path().join("circ.nodes.csv").exists());

    ok(dir.path(), &["export-viz", "sldm.json", "--mode", "pca", "-o", "pca.json"]);
    let pca: LayoutExport = serde_json::from_str(&fs::read_to_string(dir.path().join("pca.json")).unwrap()).unwrap();
    assert_eq!(pca.nodes.len(), 16);

    assert_ne!(code(&sldm(dir.path(), &["export-viz", "sldm.json", "--mode", "circular", "-o", "x.json"])), 0);
    fs::write(dir.path().join("bad.json"), "{\"format\": \"sldm-checkpoint\"}").unwrap();
    assert_eq!(code(&sldm(dir.path(), &["export-viz", "bad.json", "-o", "x.json"])), 2);
}
