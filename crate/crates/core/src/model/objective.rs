use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{distance, Embedding, Latent, ModelKind, Params};
use crate::error::{Error, Result};
use crate::graph::SignedGraph;
use crate::skellam::dyad_nll;

/// Settings for the block negative log-posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    /// Prior strength.
    pub rho: f64,
    /// Multiply the data term by (N/|S|)^2 so the block estimates the full loss.
    #[serde(default)]
    pub rescale: bool,
    /// Reduce per-row partial sums in a fixed order.
    #[serde(default = "yes")]
    pub deterministic: bool,
}

fn yes() -> bool {
    true
}

impl Default for Objective {
    fn default() -> Self {
        Self {
            rho: 1.0,
            rescale: false,
            deterministic: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub data_term: f64,
    pub prior_term: f64,
    pub n_dyads: usize,
    /// Dyads whose Bessel series hit the term cap before converging.
    pub unconverged: usize,
    pub gradient: Option<Params>,
}

const ROWS_PER_TASK: usize = 16;

struct Partial {
    loss: f64,
    unconverged: usize,
    n_dyads: usize,
    /// Per-role gradient of projected positions, K x |S| (block-local columns).
    d_proj: Vec<DMatrix<f64>>,
    d_eff: Vec<Vec<f64>>,
}

impl Partial {
    fn new(k: usize, s: usize, roles: usize, effects: usize, with_grad: bool) -> Self {
        let (k, s) = if with_grad { (k, s) } else { (0, 0) };
        Self {
            loss: 0.0,
            unconverged: 0,
            n_dyads: 0,
            d_proj: vec![DMatrix::zeros(k, s); roles],
            d_eff: vec![vec![0.0; s]; effects],
        }
    }

    fn merge(mut self, other: Partial) -> Partial {
        self.loss += other.loss;
        self.unconverged += other.unconverged;
        self.n_dyads += other.n_dyads;
        for (a, b) in self.d_proj.iter_mut().zip(&other.d_proj) {
            *a += b;
        }
        for (a, b) in self.d_eff.iter_mut().zip(&other.d_eff) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }
}

fn pair_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = v.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

fn normalize_block(block: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut b = block.to_vec();
    b.sort_unstable();
    b.dedup();
    if let Some(&last) = b.last() {
        if last >= n {
            return Err(Error::InvalidArgument(format!(
                "block node {last} out of range for {n} nodes"
            )));
        }
    }
    Ok(b)
}

/// Loss, and optionally its gradient, over every dyad inside `block`
/// (unordered pairs for undirected variants, ordered pairs otherwise), plus
/// the prior over all parameters.
pub fn evaluate(
    params: &Params,
    graph: &SignedGraph,
    block: &[usize],
    objective: &Objective,
    with_gradient: bool,
) -> Result<Evaluation> {
    let variant = params.variant();
    let n = params.n_nodes();
    if graph.n_nodes() != n {
        return Err(Error::Shape(format!(
            "parameters cover {n} nodes but the graph has {}",
            graph.n_nodes()
        )));
    }
    if graph.is_directed() != variant.is_directed() {
        return Err(Error::InvalidArgument(format!(
            "variant {} does not match a {} graph",
            variant.label(),
            if graph.is_directed() { "directed" } else { "undirected" }
        )));
    }
    let block = normalize_block(block, n)?;
    let s = block.len();
    let k = params.k();
    let roles = variant.n_roles();
    let n_eff = params.effects.len();
    let emb = params.embed()?;

    let mut local = vec![usize::MAX; n];
    for (p, &i) in block.iter().enumerate() {
        local[i] = p;
    }
    let pos = variant.positive();
    let neg = variant.negative();
    let shared = pos.src_role == neg.src_role && pos.dst_role == neg.dst_role;
    let directed = variant.is_directed();

    let row_work = |rows: std::ops::Range<usize>| -> Result<Partial> {
        let mut part = Partial::new(k, s, roles, n_eff, with_gradient);
        let mut weights: Vec<(usize, i32)> = Vec::new();
        let mut diff = vec![0.0; k];
        for p in rows {
            let i = block[p];
            weights.clear();
            weights.extend(
                graph
                    .neighbors(i)
                    .iter()
                    .filter(|&&(j, _)| local[j] != usize::MAX)
                    .map(|&(j, w)| (local[j], w)),
            );
            weights.sort_unstable();
            let mut cursor = 0;
            let start = if directed { 0 } else { p + 1 };
            for q in start..s {
                if q == p {
                    continue;
                }
                while cursor < weights.len() && weights[cursor].0 < q {
                    cursor += 1;
                }
                let y = if cursor < weights.len() && weights[cursor].0 == q {
                    weights[cursor].1
                } else {
                    0
                };
                let j = block[q];
                let xp = emb.column(pos.src_role, i);
                let yp = emb.column(pos.dst_role, j);
                let d_pos = distance(xp, yp);
                let d_neg = if shared {
                    d_pos
                } else {
                    distance(emb.column(neg.src_role, i), emb.column(neg.dst_role, j))
                };
                let e = &params.effects;
                let a = e[pos.src_effect][i] + e[pos.dst_effect][j] + pos.distance_sign * d_pos;
                let b = e[neg.src_effect][i] + e[neg.dst_effect][j] + neg.distance_sign * d_neg;
                let t = dyad_nll(y, a, b);
                if !t.nll.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "loss at dyad ({i}, {j}) with weight {y} is {} (ln l+ = {a}, ln l- = {b})",
                        t.nll
                    )));
                }
                part.loss += t.nll;
                part.n_dyads += 1;
                if !t.converged {
                    part.unconverged += 1;
                }
                if !with_gradient {
                    continue;
                }
                part.d_eff[pos.src_effect][p] += t.d_log_pos;
                part.d_eff[pos.dst_effect][q] += t.d_log_pos;
                part.d_eff[neg.src_effect][p] += t.d_log_neg;
                part.d_eff[neg.dst_effect][q] += t.d_log_neg;
                let c_pos = pos.distance_sign * t.d_log_pos;
                let c_neg = neg.distance_sign * t.d_log_neg;
                let mut push = |src: usize, dst: usize, coef: f64, d: f64, part: &mut Partial| {
                    if d <= 0.0 || coef == 0.0 {
                        return;
                    }
                    let scale = coef / d;
                    let x = emb.column(src, i);
                    let z = emb.column(dst, j);
                    for r in 0..k {
                        diff[r] = scale * (x[r] - z[r]);
                    }
                    let (ps, qs) = (p * k, q * k);
                    if src == dst {
                        let m = part.d_proj[src].as_mut_slice();
                        for (r, v) in diff.iter().enumerate() {
                            m[ps + r] += v;
                            m[qs + r] -= v;
                        }
                    } else {
                        let (a, b) = pair_mut(&mut part.d_proj, src, dst);
                        let (a, b) = (&mut a.as_mut_slice()[ps..ps + k], &mut b.as_mut_slice()[qs..qs + k]);
                        for ((u, w), v) in a.iter_mut().zip(b.iter_mut()).zip(&diff) {
                            *u += v;
                            *w -= v;
                        }
                    }
                };
                if shared {
                    push(pos.src_role, pos.dst_role, c_pos + c_neg, d_pos, &mut part);
                } else {
                    push(pos.src_role, pos.dst_role, c_pos, d_pos, &mut part);
                    push(neg.src_role, neg.dst_role, c_neg, d_neg, &mut part);
                }
            }
        }
        Ok(part)
    };

    let chunks: Vec<std::ops::Range<usize>> = (0..s)
        .step_by(ROWS_PER_TASK)
        .map(|a| a..(a + ROWS_PER_TASK).min(s))
        .collect();
    let empty = || Partial::new(k, s, roles, n_eff, with_gradient);
    let total = if objective.deterministic {
        let parts: Vec<Partial> = chunks.into_par_iter().map(row_work).collect::<Result<_>>()?;
        parts.into_iter().fold(empty(), Partial::merge)
    } else {
        chunks
            .into_par_iter()
            .map(row_work)
            .try_reduce(empty, |a, b| Ok(a.merge(b)))?
    };

    let scale = if objective.rescale && s > 0 {
        (n as f64 / s as f64).powi(2)
    } else {
        1.0
    };
    let rho = objective.rho;
    let data_term = scale * total.loss;
    let (n_dyads, unconverged) = (total.n_dyads, total.unconverged);

    let mut prior = 0.0;
    for e in &params.effects {
        prior += e.norm_squared();
    }
    match &params.latent {
        Latent::Free { positions } => {
            for p in positions {
                prior += p.norm_squared();
            }
        }
        Latent::Archetypal { .. } => {
            prior += emb.archetypes().expect("archetypal embedding").norm_squared();
        }
    }
    let prior_term = 0.5 * rho * prior;

    let gradient = if with_gradient {
        Some(assemble_gradient(params, &emb, &block, total, scale, rho))
    } else {
        None
    };
    Ok(Evaluation {
        loss: data_term + prior_term,
        data_term,
        prior_term,
        n_dyads,
        unconverged,
        gradient,
    })
}

fn assemble_gradient(
    params: &Params,
    emb: &Embedding,
    block: &[usize],
    total: Partial,
    scale: f64,
    rho: f64,
) -> Params {
    let n = params.n_nodes();
    let k = params.k();
    let mut d_proj = vec![DMatrix::zeros(k, n); total.d_proj.len()];
    for (full, local) in d_proj.iter_mut().zip(&total.d_proj) {
        for (p, &i) in block.iter().enumerate() {
            for r in 0..k {
                full[(r, i)] = scale * local[(r, p)];
            }
        }
    }
    let mut grad = match params.variant().kind {
        ModelKind::Sldm => {
            let mut g = emb.backward(params, d_proj, None);
            if let (Latent::Free { positions: gp }, Latent::Free { positions }) = (&mut g.latent, &params.latent) {
                for (g, x) in gp.iter_mut().zip(positions) {
                    *g += x * rho;
                }
            }
            g
        }
        ModelKind::Slim => {
            let d_a = emb.archetypes().expect("archetypal embedding") * rho;
            emb.backward(params, d_proj, Some(&d_a))
        }
    };
    for (e, (g, x)) in grad.effects.iter_mut().zip(&params.effects).enumerate() {
        for (p, &i) in block.iter().enumerate() {
            g[i] = scale * total.d_eff[e][p];
        }
        *g += x * rho;
    }
    grad
}

/// Block negative log-posterior.
pub fn negative_log_posterior(
    params: &Params,
    graph: &SignedGraph,
    block: &[usize],
    objective: &Objective,
) -> Result<f64> {
    evaluate(params, graph, block, objective, false).map(|e| e.loss)
}

/// Exact gradient of [`negative_log_posterior`], laid out like `params`.
pub fn gradient(
    params: &Params,
    graph: &SignedGraph,
    block: &[usize],
    objective: &Objective,
) -> Result<Params> {
    evaluate(params, graph, block, objective, true).map(|e| e.gradient.expect("gradient requested"))
}
