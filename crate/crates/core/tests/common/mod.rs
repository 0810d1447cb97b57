//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the library's numerics.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use sldm::graph::{Edge, SignedGraph};
use sldm::model::{gradient, negative_log_posterior, Objective};
use sldm::model::{DistanceSign, Latent, ModelKind, Params, Topology, Variant};

// ---------- double-double arithmetic ----------

#[derive(Debug, Clone, Copy)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn from(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div_f(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let (p, e) = two_prod(q1, d);
        let r = ((self.hi - p) - e + self.lo) / d;
        let (hi, lo) = quick_two_sum(q1, r);
        Dd { hi, lo }
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// `I_order(x)` from 200 series terms in double-double precision.
pub fn bessel_i_reference(order: u32, x: f64) -> f64 {
    let h = Dd::from(0.5 * x);
    let mut t = Dd::from(1.0);
    for i in 1..=order {
        t = t.mul(h).div_f(i as f64);
    }
    let q = h.mul(h);
    let mut sum = t;
    let nu = order as f64;
    for k in 1..200 {
        let kf = k as f64;
        t = t.mul(q).div_f(kf * (nu + kf));
        sum = sum.add(t);
    }
    sum.value()
}

// ---------- naive scalar objective ----------

/// `ln I_order(x)` by log-sum-exp over 200 terms with `ln_gamma`.
pub fn ln_bessel_naive(order: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if order == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let nu = order as f64;
    let lh = (0.5 * x).ln();
    let logs: Vec<f64> = (0..200)
        .map(|k| {
            let k = k as f64;
            (nu + 2.0 * k) * lh - ln_gamma(k + 1.0) - ln_gamma(nu + k + 1.0)
        })
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn col(m: &DMatrix<f64>, c: usize) -> Vec<f64> {
    (0..m.nrows()).map(|r| m[(r, c)]).collect()
}

/// Softmax of every column, written out with scalar loops.
pub fn naive_softmax(logits: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..logits.ncols())
        .map(|n| {
            let c = col(logits, n);
            let m = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = c.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Per-role node positions (`[role][node][dim]`) and, for archetypal
/// models, the archetype matrix as `[row][col]`.
pub fn naive_positions(params: &Params) -> (Vec<Vec<Vec<f64>>>, Option<Vec<Vec<f64>>>) {
    match &params.latent {
        Latent::Free { positions } => (
            positions
                .iter()
                .map(|p| (0..p.ncols()).map(|n| col(p, n)).collect())
                .collect(),
            None,
        ),
        Latent::Archetypal { basis, logits, gates } => {
            let k = basis.nrows();
            let z: Vec<Vec<Vec<f64>>> = logits.iter().map(naive_softmax).collect();
            let n = z[0].len();
            let stacked: Vec<&Vec<f64>> = z.iter().flat_map(|zr| zr.iter()).collect();
            let cols = stacked.len();
            let sig = |d: usize, c: usize| 1.0 / (1.0 + (-gates[(d, c)]).exp());
            let mut cmat = vec![vec![0.0; k]; cols];
            for d in 0..k {
                let total: f64 = (0..cols).map(|c| stacked[c][d] * sig(d, c)).sum();
                for c in 0..cols {
                    cmat[c][d] = stacked[c][d] * sig(d, c) / total;
                }
            }
            let mut m = vec![vec![0.0; k]; k];
            for a in 0..k {
                for d in 0..k {
                    m[a][d] = (0..cols).map(|c| stacked[c][a] * cmat[c][d]).sum();
                }
            }
            let mut arch = vec![vec![0.0; k]; k];
            for r in 0..k {
                for d in 0..k {
                    arch[r][d] = (0..k).map(|a| basis[(r, a)] * m[a][d]).sum();
                }
            }
            let pos = z
                .iter()
                .map(|zr| {
                    (0..n)
                        .map(|i| (0..k).map(|r| (0..k).map(|d| arch[r][d] * zr[i][d]).sum()).collect())
                        .collect()
                })
                .collect();
            (pos, Some(arch))
        }
    }
}

/// Log-rates of one ordered dyad, spelled out per topology.
pub fn naive_log_rates(params: &Params, pos: &[Vec<Vec<f64>>], i: usize, j: usize) -> (f64, f64) {
    let v = params.variant();
    let e = &params.effects;
    match v.topology {
        Topology::Undirected => {
            let d = dist(&pos[0][i], &pos[0][j]);
            (e[0][i] + e[0][j] - d, e[1][i] + e[1][j] + d)
        }
        Topology::Directed => {
            let d = dist(&pos[0][i], &pos[1][j]);
            (e[0][i] + e[1][j] - d, e[2][i] + e[3][j] + d)
        }
        Topology::DirectedExpressive => {
            let d = dist(&pos[0][i], &pos[1][j]);
            let d2 = dist(&pos[2][i], &pos[1][j]);
            let s = match v.expressive_negative_sign {
                DistanceSign::Minus => -1.0,
                DistanceSign::Plus => 1.0,
            };
            (e[0][i] + e[1][j] - d, e[2][i] + e[3][j] + s * d2)
        }
    }
}

pub fn naive_dyad_nll(y: i32, a: f64, b: f64) -> f64 {
    let (lp, ln) = (a.exp(), b.exp());
    lp + ln - 0.5 * y as f64 * (a - b) - ln_bessel_naive(y.unsigned_abs(), 2.0 * (lp * ln).sqrt())
}

/// Double loop over the block's dyads plus the Gaussian prior.
pub fn naive_loss(params: &Params, graph: &SignedGraph, block: &[usize], rho: f64, rescale: bool) -> f64 {
    let mut b: Vec<usize> = block.to_vec();
    b.sort_unstable();
    b.dedup();
    let (pos, arch) = naive_positions(params);
    let directed = params.variant().is_directed();
    let mut data = 0.0;
    for (p, &i) in b.iter().enumerate() {
        for (q, &j) in b.iter().enumerate() {
            if p == q || (!directed && q < p) {
                continue;
            }
            let (a, c) = naive_log_rates(params, &pos, i, j);
            data += naive_dyad_nll(graph.weight(i, j), a, c);
        }
    }
    if rescale {
        let f = params.n_nodes() as f64 / b.len() as f64;
        data *= f * f;
    }
    let mut sq = 0.0;
    match (&params.latent, arch) {
        (Latent::Free { positions }, _) => {
            for p in positions {
                sq += p.iter().map(|v| v * v).sum::<f64>();
            }
        }
        (_, Some(a)) => sq += a.iter().flatten().map(|v| v * v).sum::<f64>(),
        _ => unreachable!(),
    }
    for e in &params.effects {
        sq += e.iter().map(|v| v * v).sum::<f64>();
    }
    data + 0.5 * rho * sq
}

// ---------- finite differences ----------

/// Largest per-tensor `max_i |g_i - fd_i| / max(max_i |g_i|, max_i |fd_i|)`
/// between the analytic gradient and central differences.
pub fn fd_relative_error(params: &Params, graph: &SignedGraph, block: &[usize], obj: &Objective, h: f64) -> f64 {
    let g = gradient(params, graph, block, obj).unwrap();
    let analytic: Vec<Vec<f64>> = g.tensors().iter().map(|t| t.data.to_vec()).collect();
    let mut worst: f64 = 0.0;
    for (t, an) in analytic.iter().enumerate() {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (idx, &ga) in an.iter().enumerate() {
            let eval = |delta: f64| {
                let mut p = params.clone();
                p.tensors_mut()[t][idx] += delta;
                negative_log_posterior(&p, graph, block, obj).unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            diff = diff.max((ga - fd).abs());
            scale = scale.max(ga.abs()).max(fd.abs());
        }
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    worst
}

// ---------- random instances ----------

pub fn all_variants() -> Vec<Variant> {
    let mut out = Vec::new();
    for kind in [ModelKind::Sldm, ModelKind::Slim] {
        for topo in [Topology::Undirected, Topology::Directed, Topology::DirectedExpressive] {
            out.push(Variant::new(kind, topo));
        }
        out.push(Variant {
            expressive_negative_sign: DistanceSign::Plus,
            ..Variant::new(kind, Topology::DirectedExpressive)
        });
    }
    out
}

pub fn random_graph(n: usize, directed: bool, p: f64, rng: &mut ChaCha8Rng) -> SignedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || (!directed && j < i) {
                continue;
            }
            if rng.random::<f64>() < p {
                let w = [-2, -1, 1, 1, 2][rng.random_range(0..5)];
                edges.push(Edge {
                    source: i,
                    target: j,
                    weight: w,
                });
            }
        }
    }
    SignedGraph::new(n, edges, directed, None).unwrap()
}

pub fn random_params(variant: Variant, k: usize, n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Params {
    let mut p = Params::zeros(variant, k, n);
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = scale * z;
        }
    }
    p
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------- ranking metrics ----------

/// Probability that a random positive outscores a random negative, ties half.
pub fn auc_roc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Average precision from a sweep over every distinct threshold.
pub fn average_precision_sweep(scores: &[f64], labels: &[bool]) -> f64 {
    let total_pos = labels.iter().filter(|&&l| l).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for t in thresholds {
        let predicted = scores.iter().filter(|&&s| s >= t).count() as f64;
        let tp = scores.iter().zip(labels).filter(|(&s, &l)| s >= t && l).count() as f64;
        let recall = tp / total_pos;
        ap += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    ap
}

/// Random instance with heavy ties: scores drawn from a small grid.
pub fn random_ranking(rng: &mut ChaCha8Rng, max_len: usize) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = rng.random_range(2..=max_len);
        let grid = rng.random_range(2..=10);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..grid) as f64 / 3.0).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return (scores, labels);
        }
    }
}
