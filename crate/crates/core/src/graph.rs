//! Signed weighted graphs: edge-list parsing, temporal aggregation,
//! symmetrization, largest connected component, hold-out splits and
//! summary statistics.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a raw edge list, identifiers kept as written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeRecord {
    pub source: String,
    pub target: String,
    pub weight: i64,
    pub timestamp: Option<String>,
}

impl EdgeRecord {
    pub fn new(source: impl Into<String>, target: impl Into<String>, weight: i64) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            weight,
            timestamp: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    /// Commas and/or any whitespace.
    #[default]
    Auto,
    Whitespace,
    Comma,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeListFormat {
    pub delimiter: Delimiter,
    pub comment: char,
}

impl Default for EdgeListFormat {
    fn default() -> Self {
        Self {
            delimiter: Delimiter::Auto,
            comment: '#',
        }
    }
}

/// Parse `src dst weight [timestamp]` records. Blank lines and lines starting
/// with the comment character are skipped. Duplicates are preserved.
pub fn parse_edge_list<R: BufRead>(reader: R, format: &EdgeListFormat) -> Result<Vec<EdgeRecord>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(format.comment) {
            continue;
        }
        let fields: Vec<&str> = match format.delimiter {
            Delimiter::Whitespace => trimmed.split_whitespace().collect(),
            Delimiter::Comma => trimmed.split(',').map(str::trim).collect(),
            Delimiter::Auto => trimmed
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect(),
        };
        if fields.len() < 3 || fields.len() > 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 or 4 fields, found {}", fields.len()),
            });
        }
        if fields[..3].iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: line_no,
                message: "empty field".into(),
            });
        }
        let weight = fields[2].parse::<i64>().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("weight {:?} is not an integer", fields[2]),
        })?;
        records.push(EdgeRecord {
            source: fields[0].to_string(),
            target: fields[1].to_string(),
            weight,
            timestamp: fields.get(3).map(|s| s.to_string()),
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(records)
}

/// Serialize records as `src dst weight [timestamp]` lines.
pub fn write_edge_list(records: &[EdgeRecord]) -> String {
    let mut out = String::new();
    for r in records {
        match &r.timestamp {
            Some(ts) => writeln!(out, "{} {} {} {}", r.source, r.target, r.weight, ts),
            None => writeln!(out, "{} {} {}", r.source, r.target, r.weight),
        }
        .expect("writing to a String cannot fail");
    }
    out
}

/// Sum weights of repeated ordered pairs; pairs that cancel to zero are dropped.
/// Output keeps the order of first appearance and discards timestamps.
pub fn aggregate_temporal(records: &[EdgeRecord]) -> Vec<EdgeRecord> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut sums: HashMap<(String, String), i64> = HashMap::new();
    for r in records {
        let key = (r.source.clone(), r.target.clone());
        match sums.get_mut(&key) {
            Some(w) => *w += r.weight,
            None => {
                sums.insert(key.clone(), r.weight);
                order.push(key);
            }
        }
    }
    order
        .into_iter()
        .filter_map(|key| {
            let w = sums[&key];
            (w != 0).then(|| EdgeRecord::new(key.0, key.1, w))
        })
        .collect()
}

/// Identifier order used for undirected pairs: numeric when both parse as
/// integers, lexicographic otherwise.
fn id_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

/// Combine both directions of every pair into one undirected record with
/// `source < target`. Self loops and zero sums are dropped.
pub fn symmetrize(records: &[EdgeRecord]) -> Vec<EdgeRecord> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut sums: HashMap<(String, String), i64> = HashMap::new();
    for r in records {
        let key = match id_cmp(&r.source, &r.target) {
            Ordering::Less => (r.source.clone(), r.target.clone()),
            Ordering::Greater => (r.target.clone(), r.source.clone()),
            Ordering::Equal => continue,
        };
        match sums.get_mut(&key) {
            Some(w) => *w += r.weight,
            None => {
                sums.insert(key.clone(), r.weight);
                order.push(key);
            }
        }
    }
    order
        .into_iter()
        .filter_map(|key| {
            let w = sums[&key];
            (w != 0).then(|| EdgeRecord::new(key.0, key.1, w))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: i32,
}

/// Immutable signed, integer-weighted graph with dense node indices.
///
/// Undirected graphs store each pair once with `source < target`.
#[derive(Debug, Clone)]
pub struct SignedGraph {
    n_nodes: usize,
    edges: Vec<Edge>,
    directed: bool,
    labels: Option<Vec<String>>,
    // Undirected: both directions. Directed: out-edges. Sorted by neighbour.
    out: Vec<Vec<(usize, i32)>>,
}

impl SignedGraph {
    pub fn new(
        n_nodes: usize,
        edges: Vec<Edge>,
        directed: bool,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != n_nodes {
                return Err(Error::InvalidGraph(format!(
                    "{} labels for {} nodes",
                    l.len(),
                    n_nodes
                )));
            }
        }
        let mut out: Vec<Vec<(usize, i32)>> = vec![Vec::new(); n_nodes];
        for e in &edges {
            if e.source >= n_nodes || e.target >= n_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) out of range for {} nodes",
                    e.source, e.target, n_nodes
                )));
            }
            if e.weight == 0 {
                return Err(Error::InvalidGraph(format!(
                    "zero-weight edge ({}, {})",
                    e.source, e.target
                )));
            }
            if e.source == e.target {
                return Err(Error::InvalidGraph(format!("self loop at {}", e.source)));
            }
            if !directed && e.source > e.target {
                return Err(Error::InvalidGraph(format!(
                    "undirected edge ({}, {}) must have source < target",
                    e.source, e.target
                )));
            }
            out[e.source].push((e.target, e.weight));
            if !directed {
                out[e.target].push((e.source, e.weight));
            }
        }
        for (i, row) in out.iter_mut().enumerate() {
            row.sort_unstable_by_key(|&(j, _)| j);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidGraph(format!("duplicate edge at node {i}")));
            }
        }
        Ok(Self {
            n_nodes,
            edges,
            directed,
            labels,
            out,
        })
    }

    /// Build from raw records. Node indices follow first appearance. Directed
    /// input is aggregated per ordered pair, undirected input is symmetrized.
    pub fn from_records(records: &[EdgeRecord], directed: bool) -> Result<Self> {
        let merged = if directed {
            aggregate_temporal(records)
        } else {
            symmetrize(records)
        };
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut labels = Vec::new();
        let mut intern = |id: &str| -> usize {
            if let Some(&i) = index.get(id) {
                return i;
            }
            let i = labels.len();
            labels.push(id.to_string());
            index.insert(id.to_string(), i);
            i
        };
        let mut edges = Vec::with_capacity(merged.len());
        for r in &merged {
            if r.source == r.target {
                continue;
            }
            let weight = i32::try_from(r.weight).map_err(|_| {
                Error::InvalidGraph(format!("weight {} does not fit in 32 bits", r.weight))
            })?;
            let (mut s, mut t) = (intern(&r.source), intern(&r.target));
            if !directed && s > t {
                std::mem::swap(&mut s, &mut t);
            }
            edges.push(Edge {
                source: s,
                target: t,
                weight,
            });
        }
        if labels.is_empty() {
            return Err(Error::EmptyGraph);
        }
        Self::new(labels.len(), edges, directed, Some(labels))
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        }
    }

    /// Neighbours of `i` with weights: out-edges when directed, all incident
    /// edges when undirected. Sorted by neighbour index.
    pub fn neighbors(&self, i: usize) -> &[(usize, i32)] {
        &self.out[i]
    }

    /// Weight of dyad (i, j); 0 when absent. Direction matters only for
    /// directed graphs.
    pub fn weight(&self, i: usize, j: usize) -> i32 {
        let row = &self.out[i];
        match row.binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => row[pos].1,
            Err(_) => 0,
        }
    }

    /// Adjacency ignoring direction and sign, used for connectivity.
    fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for e in &self.edges {
            adj[e.source].push(e.target);
            adj[e.target].push(e.source);
        }
        adj
    }

    /// Component id per node (weak connectivity), numbered in order of each
    /// component's smallest node index.
    pub fn components(&self) -> Vec<usize> {
        let adj = self.undirected_adjacency();
        let mut comp = vec![usize::MAX; self.n_nodes];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.n_nodes {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.n_nodes > 0 && self.components().iter().all(|&c| c == 0)
    }

    /// Subgraph induced on `keep` (must be sorted, unique). Indices are
    /// re-densified in the order given.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Result<Self> {
        let mut map = vec![usize::MAX; self.n_nodes];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| map[e.source] != usize::MAX && map[e.target] != usize::MAX)
            .map(|e| Edge {
                source: map[e.source],
                target: map[e.target],
                weight: e.weight,
            })
            .collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| keep.iter().map(|&i| l[i].clone()).collect());
        Self::new(keep.len(), edges, self.directed, labels)
    }

    /// Copy of this graph with a different edge set over the same nodes.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self> {
        Self::new(self.n_nodes, edges, self.directed, self.labels.clone())
    }

    /// Undirected version: weights of both directions summed, zero sums dropped.
    pub fn to_undirected(&self) -> Result<Self> {
        if !self.directed {
            return Ok(self.clone());
        }
        let mut sums: HashMap<(usize, usize), i64> = HashMap::new();
        let mut order = Vec::new();
        for e in &self.edges {
            let key = (e.source.min(e.target), e.source.max(e.target));
            let w = sums.entry(key).or_insert_with(|| {
                order.push(key);
                0
            });
            *w += i64::from(e.weight);
        }
        let edges = order
            .into_iter()
            .filter(|k| sums[k] != 0)
            .map(|k| Edge {
                source: k.0,
                target: k.1,
                weight: sums[&k] as i32,
            })
            .collect();
        Self::new(self.n_nodes, edges, false, self.labels.clone())
    }

    pub fn to_records(&self) -> Vec<EdgeRecord> {
        self.edges
            .iter()
            .map(|e| EdgeRecord::new(self.label(e.source), self.label(e.target), i64::from(e.weight)))
            .collect()
    }
}

const GRAPH_HEADER: &str = "# sldm-graph";

/// Write the normalized graph format: a header line with directedness and
/// node count, an optional `# labels` line, then `i j weight` lines over
/// dense indices.
pub fn write_graph<W: std::io::Write>(graph: &SignedGraph, mut out: W) -> Result<()> {
    writeln!(
        out,
        "{GRAPH_HEADER} directed={} nodes={}",
        graph.is_directed(),
        graph.n_nodes()
    )?;
    if let Some(labels) = graph.labels() {
        if labels.iter().any(|l| l.is_empty() || l.contains(char::is_whitespace)) {
            return Err(Error::InvalidGraph("node labels must be non-empty and free of whitespace".into()));
        }
        writeln!(out, "# labels {}", labels.join(" "))?;
    }
    for e in graph.edges() {
        writeln!(out, "{} {} {}", e.source, e.target, e.weight)?;
    }
    Ok(())
}

/// True when the first line of `text` is a normalized graph header.
pub fn is_graph_file(first_line: &str) -> bool {
    first_line.trim_start().starts_with(GRAPH_HEADER)
}

/// Read the format produced by [`write_graph`].
pub fn read_graph<R: BufRead>(reader: R) -> Result<SignedGraph> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l?,
        None => return Err(Error::EmptyInput),
    };
    let rest = header
        .trim()
        .strip_prefix(GRAPH_HEADER)
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing `{GRAPH_HEADER}` header"),
        })?;
    let (mut directed, mut nodes) = (None, None);
    for field in rest.split_whitespace() {
        let bad = || Error::Parse {
            line: 1,
            message: format!("bad header field {field:?}"),
        };
        match field.split_once('=') {
            Some(("directed", v)) => directed = Some(v.parse::<bool>().map_err(|_| bad())?),
            Some(("nodes", v)) => nodes = Some(v.parse::<usize>().map_err(|_| bad())?),
            _ => return Err(bad()),
        }
    }
    let (directed, n) = directed.zip(nodes).ok_or_else(|| Error::Parse {
        line: 1,
        message: "header needs directed= and nodes=".into(),
    })?;
    let mut labels = None;
    let mut edges = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let t = line.trim();
        if let Some(l) = t.strip_prefix("# labels") {
            labels = Some(l.split_whitespace().map(str::to_string).collect());
            continue;
        }
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        if f.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", f.len())));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|_| parse_err(format!("bad node index {s:?}")));
        edges.push(Edge {
            source: idx(f[0])?,
            target: idx(f[1])?,
            weight: f[2].parse().map_err(|_| parse_err(format!("bad weight {:?}", f[2])))?,
        });
    }
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    SignedGraph::new(n, edges, directed, labels)
}

/// Subgraph induced on the largest weakly connected component. Ties go to the
/// component holding the smallest node index.
pub fn largest_connected_component(graph: &SignedGraph) -> Result<SignedGraph> {
    if graph.n_nodes() == 0 {
        return Err(Error::EmptyGraph);
    }
    let comp = graph.components();
    let n_comp = comp.iter().max().map_or(0, |&c| c + 1);
    let mut sizes = vec![0usize; n_comp];
    for &c in &comp {
        sizes[c] += 1;
    }
    // Components are numbered by their smallest node, so the first maximum wins ties.
    let best = (0..n_comp)
        .fold(0, |best, c| if sizes[c] > sizes[best] { c } else { best });
    if sizes[best] == graph.n_nodes() {
        return Ok(graph.clone());
    }
    let keep: Vec<usize> = (0..graph.n_nodes()).filter(|&i| comp[i] == best).collect();
    graph.induced_subgraph(&keep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeldOutEdge {
    pub source: usize,
    pub target: usize,
    pub weight: i32,
}

impl HeldOutEdge {
    pub fn is_positive(&self) -> bool {
        self.weight > 0
    }
}

#[derive(Debug, Clone)]
pub struct HoldoutSplit {
    pub train: SignedGraph,
    pub test_edges: Vec<HeldOutEdge>,
    pub test_zeros: Vec<(usize, usize)>,
    pub seed: u64,
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Residual graph bookkeeping for the hold-out sampler.
struct Residual<'a> {
    edges: &'a [Edge],
    incident: Vec<Vec<usize>>,
    removed: Vec<bool>,
    in_tree: Vec<bool>,
}

impl<'a> Residual<'a> {
    fn new(n: usize, edges: &'a [Edge]) -> Self {
        let mut incident = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            incident[e.source].push(id);
            incident[e.target].push(id);
        }
        let mut r = Self {
            edges,
            incident,
            removed: vec![false; edges.len()],
            in_tree: vec![false; edges.len()],
        };
        r.rebuild_tree();
        r
    }

    fn rebuild_tree(&mut self) {
        self.in_tree.iter_mut().for_each(|t| *t = false);
        let mut dsu = Dsu::new(self.incident.len());
        for (id, e) in self.edges.iter().enumerate() {
            if !self.removed[id] && dsu.union(e.source, e.target) {
                self.in_tree[id] = true;
            }
        }
    }

    /// Whether `v` is reachable from `u` once edge `skip` is removed.
    fn reachable_without(&self, u: usize, v: usize, skip: usize) -> bool {
        let mut seen = vec![false; self.incident.len()];
        let mut queue = VecDeque::from([u]);
        seen[u] = true;
        while let Some(x) = queue.pop_front() {
            if x == v {
                return true;
            }
            for &id in &self.incident[x] {
                if id == skip || self.removed[id] {
                    continue;
                }
                let e = self.edges[id];
                let y = if e.source == x { e.target } else { e.source };
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        false
    }

    /// Remove `id` unless it is a bridge of the residual graph.
    fn try_remove(&mut self, id: usize) -> bool {
        if !self.in_tree[id] {
            self.removed[id] = true;
            return true;
        }
        let e = self.edges[id];
        if !self.reachable_without(e.source, e.target, id) {
            return false;
        }
        self.removed[id] = true;
        self.rebuild_tree();
        true
    }
}

/// Hide `round(fraction * |E|)` edges while keeping the residual graph
/// connected, and sample as many non-edges of the original graph.
pub fn split_train_test(graph: &SignedGraph, holdout_fraction: f64, seed: u64) -> Result<HoldoutSplit> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction must lie in (0, 1), got {holdout_fraction}"
        )));
    }
    if !graph.is_connected() {
        return Err(Error::InvalidGraph("hold-out split requires a connected graph".into()));
    }
    let target = (holdout_fraction * graph.n_edges() as f64).round() as usize;
    if target == 0 {
        return Err(Error::InvalidArgument("hold-out set would be empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..graph.n_edges()).collect();
    order.shuffle(&mut rng);

    let mut residual = Residual::new(graph.n_nodes(), graph.edges());
    let mut removed = Vec::with_capacity(target);
    for id in order {
        if removed.len() == target {
            break;
        }
        if residual.try_remove(id) {
            removed.push(id);
        }
    }
    if removed.len() < target {
        return Err(Error::HoldoutUnreachable {
            target,
            achieved: removed.len(),
        });
    }

    let test_edges: Vec<HeldOutEdge> = removed
        .iter()
        .map(|&id| {
            let e = graph.edges()[id];
            HeldOutEdge {
                source: e.source,
                target: e.target,
                weight: e.weight,
            }
        })
        .collect();
    let train_edges: Vec<Edge> = graph
        .edges()
        .iter()
        .enumerate()
        .filter(|(id, _)| !residual.removed[*id])
        .map(|(_, e)| *e)
        .collect();
    let train = graph.with_edges(train_edges)?;

    let n = graph.n_nodes();
    let max_dyads = if graph.is_directed() {
        n * (n - 1)
    } else {
        n * (n - 1) / 2
    };
    if max_dyads - graph.n_edges() < test_edges.len() {
        return Err(Error::InvalidGraph(
            "not enough non-edges to pair with the hidden edges".into(),
        ));
    }
    let mut zeros = Vec::with_capacity(test_edges.len());
    let mut seen = HashSet::new();
    while zeros.len() < test_edges.len() {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let pair = if graph.is_directed() { (i, j) } else { (i.min(j), i.max(j)) };
        if graph.weight(pair.0, pair.1) != 0 || !seen.insert(pair) {
            continue;
        }
        zeros.push(pair);
    }

    Ok(HoldoutSplit {
        train,
        test_edges,
        test_zeros: zeros,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub n_nodes: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub density: f64,
    pub pct_pos: f64,
    pub pct_neg: f64,
}

impl NetworkStats {
    /// `key=value` lines.
    pub fn to_key_value(&self) -> String {
        format!(
            "n_nodes={}\nn_pos={}\nn_neg={}\ndensity={}\npct_pos={}\npct_neg={}\n",
            self.n_nodes, self.n_pos, self.n_neg, self.density, self.pct_pos, self.pct_neg
        )
    }

    /// The `(density, %pos, %neg)` triple used in figure captions.
    pub fn triple(&self) -> String {
        format!(
            "({:.3}, {:.0}%, {:.0}%)",
            self.density, self.pct_pos, self.pct_neg
        )
    }
}

/// Counts of positive/negative links and density over the possible dyads of
/// the graph's directedness mode.
pub fn degree_stats(graph: &SignedGraph) -> NetworkStats {
    let n = graph.n_nodes();
    let n_pos = graph.edges().iter().filter(|e| e.weight > 0).count();
    let n_neg = graph.n_edges() - n_pos;
    let dyads = if graph.is_directed() {
        n as f64 * (n as f64 - 1.0)
    } else {
        n as f64 * (n as f64 - 1.0) / 2.0
    };
    let m = graph.n_edges() as f64;
    let (pct_pos, pct_neg) = if m > 0.0 {
        (100.0 * n_pos as f64 / m, 100.0 * n_neg as f64 / m)
    } else {
        (0.0, 0.0)
    };
    NetworkStats {
        n_nodes: n,
        n_pos,
        n_neg,
        density: if dyads > 0.0 { m / dyads } else { 0.0 },
        pct_pos,
        pct_neg,
    }
}
