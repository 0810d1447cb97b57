//! Plot-ready coordinates for embeddings and sociotopes.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SignedGraph;
use crate::model::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutMode {
    Pca,
    Circular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypePoint {
    pub k: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedEdge {
    pub i: usize,
    pub j: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutExport {
    pub mode: LayoutMode,
    pub nodes: Vec<NodePoint>,
    pub archetypes: Vec<ArchetypePoint>,
    pub edges: Vec<SignedEdge>,
}

/// Principal-component projection of the columns of a K x N embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// dims x N projected coordinates.
    pub coords: DMatrix<f64>,
    /// K x dims principal directions (unit columns).
    pub directions: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl Projection {
    /// Project further K-dimensional points (as columns) with the same
    /// centering and directions.
    pub fn apply(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = points.clone();
        for mut c in centered.column_iter_mut() {
            c -= &self.mean;
        }
        self.directions.transpose() * centered
    }
}

/// Center the columns, then project onto the leading singular directions.
/// Each direction is signed so its largest-magnitude loading is positive.
pub fn pca_project(embedding: &DMatrix<f64>, dims: usize) -> Result<Projection> {
    let (k, n) = embedding.shape();
    if k < 2 || dims == 0 || dims > k {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least 2 input dimensions and 1..={k} outputs, got K = {k}, dims = {dims}"
        )));
    }
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mean = embedding.column_mean();
    let mut centered = embedding.clone();
    for mut c in centered.column_iter_mut() {
        c -= &mean;
    }
    let svd = centered.clone().svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let mut directions = DMatrix::zeros(k, dims);
    let mut ratio = Vec::with_capacity(dims);
    for (d, &c) in order.iter().take(dims).enumerate() {
        let mut col = u.column(c).into_owned();
        let mut best = 0;
        for r in 0..k {
            if col[r].abs() > col[best].abs() {
                best = r;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
        directions.set_column(d, &col);
        let s = svd.singular_values[c];
        ratio.push(if total > 0.0 { s * s / total } else { 0.0 });
    }
    let coords = directions.transpose() * centered;
    Ok(Projection {
        coords,
        directions,
        mean,
        explained_variance_ratio: ratio,
    })
}

/// Anchor `k` of `K` at angle `2 pi k / K` on the unit circle.
pub fn circle_anchor(k: usize, total: usize) -> (f64, f64) {
    let a = 2.0 * PI * k as f64 / total as f64;
    (a.cos(), a.sin())
}

/// Nodes at the convex combination of circle anchors given by their mixtures.
pub fn circular_positions(mixtures: &DMatrix<f64>) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    let (k, _) = mixtures.shape();
    if k == 0 {
        return Err(Error::InvalidArgument("mixtures need at least one row".into()));
    }
    for (i, c) in mixtures.column_iter().enumerate() {
        if c.iter().any(|&v| !(v >= 0.0)) || (c.sum() - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!("mixture column {i} is not on the simplex")));
        }
    }
    let anchors: Vec<(f64, f64)> = (0..k).map(|d| circle_anchor(d, k)).collect();
    let nodes = mixtures
        .column_iter()
        .map(|c| {
            c.iter()
                .zip(&anchors)
                .fold((0.0, 0.0), |(x, y), (w, (ax, ay))| (x + w * ax, y + w * ay))
        })
        .collect();
    Ok((nodes, anchors))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignFilter {
    #[default]
    All,
    Positive,
    Negative,
}

impl SignFilter {
    pub fn accepts(&self, weight: i32) -> bool {
        match self {
            SignFilter::All => weight != 0,
            SignFilter::Positive => weight > 0,
            SignFilter::Negative => weight < 0,
        }
    }
}

/// An edge with the plotting coordinates of both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayEdge {
    pub i: usize,
    pub j: usize,
    pub sign: i8,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

/// Edges passing `filter`, located on `layout`.
pub fn edge_overlay(graph: &SignedGraph, layout: &LayoutExport, filter: SignFilter) -> Result<Vec<OverlayEdge>> {
    if layout.nodes.len() != graph.n_nodes() {
        return Err(Error::Shape(format!(
            "layout has {} nodes but the graph has {}",
            layout.nodes.len(),
            graph.n_nodes()
        )));
    }
    Ok(graph
        .edges()
        .iter()
        .filter(|e| filter.accepts(e.weight))
        .map(|e| {
            let (a, b) = (&layout.nodes[e.source], &layout.nodes[e.target]);
            OverlayEdge {
                i: e.source,
                j: e.target,
                sign: e.weight.signum() as i8,
                x0: a.x,
                y0: a.y,
                x1: b.x,
                y1: b.y,
            }
        })
        .collect())
}

fn node_ids(n: usize, labels: Option<&[String]>) -> Vec<String> {
    match labels {
        Some(l) if l.len() == n => l.to_vec(),
        _ => (0..n).map(|i| i.to_string()).collect(),
    }
}

/// Layout of the source-role embedding of fitted parameters. PCA works for
/// every variant; the circular mode needs archetypal mixtures.
pub fn layout_from_params(
    params: &Params,
    mode: LayoutMode,
    labels: Option<&[String]>,
    graph: Option<&SignedGraph>,
    filter: SignFilter,
) -> Result<LayoutExport> {
    let n = params.n_nodes();
    let ids = node_ids(n, labels);
    let (nodes, archetypes) = match mode {
        LayoutMode::Pca => {
            let emb = params.embed()?;
            let proj = pca_project(&emb.projected[0], 2)?;
            let nodes: Vec<(f64, f64)> = proj.coords.column_iter().map(|c| (c[0], c[1])).collect();
            let archetypes = match emb.archetypes() {
                Some(a) => proj.apply(a).column_iter().map(|c| (c[0], c[1])).collect(),
                None => Vec::new(),
            };
            (nodes, archetypes)
        }
        LayoutMode::Circular => {
            let mixtures = params.mixtures().ok_or_else(|| {
                Error::InvalidArgument("circular layout needs an archetypal (slim) model".into())
            })?;
            circular_positions(&mixtures[0])?
        }
    };
    let edges = match graph {
        Some(g) => {
            if g.n_nodes() != n {
                return Err(Error::Shape(format!("graph has {} nodes, parameters {n}", g.n_nodes())));
            }
            g.edges()
                .iter()
                .filter(|e| filter.accepts(e.weight))
                .map(|e| SignedEdge {
                    i: e.source,
                    j: e.target,
                    sign: e.weight.signum() as i8,
                })
                .collect()
        }
        None => Vec::new(),
    };
    let layout = LayoutExport {
        mode,
        nodes: ids
            .into_iter()
            .zip(nodes)
            .map(|(id, (x, y))| NodePoint { id, x, y })
            .collect(),
        archetypes: archetypes
            .into_iter()
            .enumerate()
            .map(|(k, (x, y))| ArchetypePoint { k, x, y })
            .collect(),
        edges,
    };
    if layout
        .nodes
        .iter()
        .map(|p| (p.x, p.y))
        .chain(layout.archetypes.iter().map(|p| (p.x, p.y)))
        .any(|(x, y)| !x.is_finite() || !y.is_finite())
    {
        return Err(Error::NonFinite("layout has non-finite coordinates".into()));
    }
    Ok(layout)
}

impl LayoutExport {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn write_nodes_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "id,x,y")?;
        for p in &self.nodes {
            writeln!(out, "{},{},{}", p.id, p.x, p.y)?;
        }
        Ok(())
    }

    pub fn write_archetypes_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,x,y")?;
        for p in &self.archetypes {
            writeln!(out, "{},{},{}", p.k, p.x, p.y)?;
        }
        Ok(())
    }

    pub fn write_edges_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,j,sign")?;
        for e in &self.edges {
            writeln!(out, "{},{},{}", e.i, e.j, e.sign)?;
        }
        Ok(())
    }
}
