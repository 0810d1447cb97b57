use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use sldm::checkpoint::Checkpoint;
use sldm::error::ErrorClass;
use sldm::eval::{score_split, EvalReport, Task};
use sldm::generate::{regenerate_from_params, sample_network_with, GenerationRecipe, SamplingPath};
use sldm::graph::{
    degree_stats, is_graph_file, largest_connected_component, parse_edge_list, read_graph, split_train_test,
    write_graph, Delimiter, EdgeListFormat, NetworkStats,
};
use sldm::init::{init_params, InitMethod};
use sldm::model::DistanceSign;
use sldm::optim::{self, write_trace_csv, TrainConfig};
use sldm::viz::{layout_from_params, LayoutMode, SignFilter};
use sldm::{ModelKind, SignedGraph, Topology};

use crate::manifest::{sidecar, ManifestBuilder};
use crate::{
    DelimiterArg, EvalArgs, ExportVizArgs, FitCommand, GenerateArgs, IngestArgs, InitArg, ModeArg, ModelArg, RunArgs,
    SamplerArg, SignArg, SignsArg, TrainArgs, VariantArg,
};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

/// Bad flag combinations or config files caught by the front end.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<sldm::Error>() {
            return match e.class() {
                ErrorClass::Usage => EXIT_USAGE,
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Numeric => EXIT_NUMERIC,
            };
        }
    }
    EXIT_DATA
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn save_graph(path: &Path, g: &SignedGraph) -> Result<()> {
    let mut w = create(path)?;
    write_graph(g, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_graph(path: &Path) -> Result<SignedGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if !is_graph_file(text.lines().next().unwrap_or("")) {
        return Err(usage(format!(
            "{} is not a graph file; normalize raw edge lists with `sldm ingest`",
            path.display()
        )));
    }
    let g = read_graph(text.as_bytes()).with_context(|| format!("reading {}", path.display()))?;
    Ok(g)
}

fn manifest_path(run: &RunArgs, output: &Path) -> PathBuf {
    run.manifest.clone().unwrap_or_else(|| sidecar(output, "manifest.json"))
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("ingest");
    m.input(&a.input);
    let directed = a.directed;
    let mut first = String::new();
    open(&a.input)?.read_line(&mut first)?;
    let mut graph = if is_graph_file(&first) {
        let g = load_graph(&a.input)?;
        match (g.is_directed(), directed) {
            (true, false) => g.to_undirected()?,
            (false, true) => return Err(usage("cannot recover directions from an undirected graph file")),
            _ => g,
        }
    } else {
        let format = EdgeListFormat {
            delimiter: match a.delimiter {
                DelimiterArg::Auto => Delimiter::Auto,
                DelimiterArg::Whitespace => Delimiter::Whitespace,
                DelimiterArg::Comma => Delimiter::Comma,
            },
            ..EdgeListFormat::default()
        };
        let records = parse_edge_list(open(&a.input)?, &format)
            .with_context(|| format!("parsing {}", a.input.display()))?;
        if !a.aggregate {
            let mut seen = HashSet::new();
            if let Some(r) = records.iter().find(|r| !seen.insert((r.source.as_str(), r.target.as_str()))) {
                return Err(sldm::Error::InvalidGraph(format!(
                    "pair ({}, {}) appears more than once; pass --aggregate to sum repeated records",
                    r.source, r.target
                ))
                .into());
            }
        }
        SignedGraph::from_records(&records, directed)?
    };
    if a.lcc {
        graph = largest_connected_component(&graph)?;
    }
    save_graph(&a.output, &graph)?;
    let stats = degree_stats(&graph);
    let stats_path = sidecar(&a.output, "stats.json");
    write_json(&stats_path, &stats)?;
    print!("{}", stats.to_key_value());
    m.output(&a.output);
    m.output(&stats_path);
    m.config(&serde_json::json!({
        "directed": directed,
        "aggregate": a.aggregate,
        "lcc": a.lcc,
    }))?;
    m.finish(&manifest_path(&a.run, &a.output))?;
    Ok(())
}

fn read_train_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

/// Config file (or defaults) with every explicit flag applied on top.
pub fn resolve_train_config(t: &TrainArgs, run: &RunArgs) -> Result<TrainConfig> {
    let mut c = match &t.config {
        Some(p) => read_train_config(p)?,
        None => TrainConfig::default(),
    };
    if let Some(m) = t.model {
        c.kind = match m {
            ModelArg::Sldm => ModelKind::Sldm,
            ModelArg::Slim => ModelKind::Slim,
        };
    }
    if let Some(v) = t.variant {
        c.topology = match v {
            VariantArg::Undirected => Topology::Undirected,
            VariantArg::Directed => Topology::Directed,
            VariantArg::DirectedExpressive => Topology::DirectedExpressive,
        };
    }
    if let Some(s) = t.expressive_sign {
        c.expressive_negative_sign = match s {
            SignArg::Minus => DistanceSign::Minus,
            SignArg::Plus => DistanceSign::Plus,
        };
    }
    if let Some(k) = t.k {
        c.k = k;
    }
    if let Some(lr) = t.lr {
        c.lr = lr;
    }
    if let Some(i) = t.iters {
        c.iters = i;
    }
    if let Some(s) = t.sample_size {
        c.sample_size = Some(s);
    }
    if let Some(r) = t.rho {
        c.rho = r;
    }
    if let Some(r) = t.rescale_block {
        c.rescale_block = r;
    }
    if let Some(f) = t.full_loss_every {
        c.full_loss_every = f;
    }
    if let Some(s) = run.seed {
        c.seed = s;
    }
    if let Some(d) = run.deterministic {
        c.deterministic = d;
    }
    Ok(c)
}

fn init_method(t: &TrainArgs) -> InitMethod {
    match t.init {
        InitArg::Spectral => InitMethod::Spectral,
        InitArg::Random => InitMethod::Random,
    }
}

fn check_topology(cfg: &TrainConfig, g: &SignedGraph) -> Result<()> {
    if cfg.variant().is_directed() != g.is_directed() {
        return Err(usage(format!(
            "variant `{}` does not match a {} graph",
            cfg.variant().label(),
            if g.is_directed() { "directed" } else { "undirected" }
        )));
    }
    cfg.validate(g.n_nodes())?;
    Ok(())
}

#[derive(Serialize)]
struct FitSettings<'a> {
    train: &'a TrainConfig,
    init: InitMethod,
}

pub fn fit(a: FitCommand) -> Result<()> {
    let mut m = ManifestBuilder::new("fit");
    m.input(&a.graph);
    if let Some(c) = &a.train.config {
        m.input(c);
    }
    let graph = load_graph(&a.graph)?;
    let cfg = resolve_train_config(&a.train, &a.run)?;
    check_topology(&cfg, &graph)?;
    let init = init_method(&a.train);
    let start = init_params(&graph, &cfg, init)?;
    let result = optim::fit(&graph, start, &cfg)?;

    let cp = Checkpoint::new(&result.params, &cfg, graph.labels().map(<[String]>::to_vec));
    let mut w = create(&a.output)?;
    cp.write(&mut w)?;
    w.flush()?;
    let trace = a.trace.clone().unwrap_or_else(|| sidecar(&a.output, "trace.csv"));
    let mut w = create(&trace)?;
    write_trace_csv(&result.trace, &mut w)?;
    w.flush()?;

    let loss = match result.final_full_loss {
        Some(l) => l,
        None => optim::full_loss(&result.params, &graph, &cfg.objective())?,
    };
    println!(
        "final loss {:.6} over {} nodes ({} iterations)",
        loss,
        graph.n_nodes(),
        cfg.iters
    );
    m.output(&a.output);
    m.output(&trace);
    m.config(&FitSettings { train: &cfg, init })?;
    m.seed(cfg.seed, cfg.deterministic);
    m.finish(&manifest_path(&a.run, &a.output))?;
    Ok(())
}

fn print_stats(stats: &NetworkStats) {
    println!("{}", stats.triple());
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("generate");
    let (graph, seed) = if let Some(path) = &a.config {
        m.input(path);
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut recipe: GenerationRecipe =
            serde_json::from_str(&text).map_err(|e| usage(format!("recipe {}: {e}", path.display())))?;
        if let Some(s) = a.run.seed {
            recipe.model.seed = s;
        }
        let resolved = recipe.resolve()?;
        let sampler = match a.sampler {
            SamplerArg::Auto => SamplingPath::Auto,
            SamplerArg::Dyadwise => SamplingPath::Dyadwise,
            SamplerArg::Thinning => SamplingPath::Thinning,
        };
        let (graph, truth) = sample_network_with(&resolved, sampler)?;
        let truth_path = a.truth.clone().unwrap_or_else(|| sidecar(&a.output, "truth.json"));
        let mut w = create(&truth_path)?;
        truth.write_json(&mut w)?;
        w.flush()?;
        m.output(&truth_path);
        m.config(&serde_json::json!({ "recipe": recipe, "resolved": resolved, "sampler": format!("{:?}", a.sampler) }))?;
        (graph, resolved.seed)
    } else {
        let path = a.from_checkpoint.as_ref().expect("clap enforces one source");
        m.input(path);
        let cp = Checkpoint::read(open(path)?)?;
        let params = cp.params()?;
        let seed = a.run.seed.unwrap_or(cp.seed);
        let g = regenerate_from_params(&params, seed)?;
        let graph = SignedGraph::new(g.n_nodes(), g.edges().to_vec(), g.is_directed(), cp.labels.clone())?;
        m.config(&serde_json::json!({ "checkpoint_variant": cp.variant, "seed": seed }))?;
        (graph, seed)
    };
    save_graph(&a.output, &graph)?;
    let stats = degree_stats(&graph);
    let stats_path = sidecar(&a.output, "stats.json");
    write_json(&stats_path, &stats)?;
    print_stats(&stats);
    m.output(&a.output);
    m.output(&stats_path);
    m.seed(seed, true);
    m.finish(&manifest_path(&a.run, &a.output))?;
    Ok(())
}

fn print_report(r: &EvalReport) {
    println!("{} K={}", r.variant, r.k);
    println!("{:<6} {:>8} {:>8}", "task", "AUC-ROC", "AUC-PR");
    for task in Task::ALL {
        match r.task(task) {
            Some(t) => println!("{:<6} {:>8.3} {:>8.3}", task.name(), t.auc_roc, t.auc_pr),
            None => println!("{:<6} {:>8} {:>8}", task.name(), "-", "-"),
        }
    }
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("eval");
    m.input(&a.graph);
    if let Some(c) = &a.train.config {
        m.input(c);
    }
    if !(a.holdout > 0.0 && a.holdout < 1.0) {
        return Err(usage(format!("--holdout must lie in (0, 1), got {}", a.holdout)));
    }
    if a.folds < 2 {
        return Err(usage("--folds must be at least 2"));
    }
    let graph = load_graph(&a.graph)?;
    let cfg = resolve_train_config(&a.train, &a.run)?;
    check_topology(&cfg, &graph)?;
    let split = split_train_test(&graph, a.holdout, cfg.seed)?;
    let init = init_method(&a.train);
    let start = init_params(&split.train, &cfg, init)?;
    let result = optim::fit(&split.train, start, &cfg)?;
    let report = score_split(&result.params, &split, a.folds, cfg.seed)?;

    write_json(&a.output, &report)?;
    let csv = a.output.with_extension("csv");
    let mut w = create(&csv)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    m.output(&a.output);
    m.output(&csv);
    if let Some(p) = &a.checkpoint {
        let cp = Checkpoint::new(&result.params, &cfg, split.train.labels().map(<[String]>::to_vec));
        let mut w = create(p)?;
        cp.write(&mut w)?;
        w.flush()?;
        m.output(p);
    }
    print_report(&report);
    m.config(&serde_json::json!({
        "train": cfg,
        "init": init,
        "holdout": a.holdout,
        "folds": a.folds,
    }))?;
    m.seed(cfg.seed, cfg.deterministic);
    m.finish(&manifest_path(&a.run, &a.output))?;
    Ok(())
}

pub fn export_viz(a: ExportVizArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("export-viz");
    m.input(&a.checkpoint);
    let cp = Checkpoint::read(open(&a.checkpoint)?)?;
    let params = cp.params()?;
    let graph = match &a.graph {
        Some(p) => {
            m.input(p);
            Some(load_graph(p)?)
        }
        None => None,
    };
    let mode = match a.mode {
        ModeArg::Pca => LayoutMode::Pca,
        ModeArg::Circular => LayoutMode::Circular,
    };
    let filter = match a.signs {
        SignsArg::All => SignFilter::All,
        SignsArg::Positive => SignFilter::Positive,
        SignsArg::Negative => SignFilter::Negative,
    };
    let layout = layout_from_params(&params, mode, cp.labels.as_deref(), graph.as_ref(), filter)?;
    let mut w = create(&a.output)?;
    layout.write_json(&mut w)?;
    w.flush()?;
    m.output(&a.output);
    if a.csv {
        let stem = a.output.with_extension("");
        let nodes = sidecar(&stem, "nodes.csv");
        let archetypes = sidecar(&stem, "archetypes.csv");
        let edges = sidecar(&stem, "edges.csv");
        let mut w = create(&nodes)?;
        layout.write_nodes_csv(&mut w)?;
        w.flush()?;
        let mut w = create(&archetypes)?;
        layout.write_archetypes_csv(&mut w)?;
        w.flush()?;
        let mut w = create(&edges)?;
        layout.write_edges_csv(&mut w)?;
        w.flush()?;
        for p in [&nodes, &archetypes, &edges] {
            m.output(p);
        }
    }
    println!(
        "{} nodes, {} archetypes, {} edges",
        layout.nodes.len(),
        layout.archetypes.len(),
        layout.edges.len()
    );
    m.config(&serde_json::json!({ "mode": mode, "signs": filter, "csv": a.csv }))?;
    m.seed(cp.seed, true);
    m.finish(&manifest_path(&a.run, &a.output))?;
    Ok(())
}
