//! Deterministic initialization from a signed spectral embedding.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SignedGraph;
use crate::model::{Latent, ModelKind, Params};
use crate::optim::TrainConfig;

/// Largest N solved with the dense eigensolver.
pub const DENSE_LIMIT: usize = 3000;
const RESIDUAL_TOL: f64 = 1e-9;
/// Pre-sigmoid gate value on the selected (archetype, node) entries.
pub const GATE_OPEN: f64 = 3.0;
/// Slope of the initial mixture logits in units of mean spectral distance.
const MIXTURE_SHARPNESS: f64 = 3.0;

/// `I - D^{-1/2} A D^{-1/2}` with `D_ii = sum_j |A_ij|`, stored by row.
#[derive(Debug, Clone)]
pub struct SignedLaplacian {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SignedLaplacian {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Off-diagonal entries of row `i`; the diagonal is 1.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = x[i];
            for &(j, v) in row {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::identity(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Signed normalized Laplacian of `graph` (symmetrized when directed).
pub fn signed_normalized_laplacian(graph: &SignedGraph) -> Result<SignedLaplacian> {
    let g = graph.to_undirected()?;
    let n = g.n_nodes();
    let mut deg = vec![0.0f64; n];
    for e in g.edges() {
        let w = f64::from(e.weight).abs();
        deg[e.source] += w;
        deg[e.target] += w;
    }
    if let Some(i) = deg.iter().position(|&d| d == 0.0) {
        return Err(Error::IsolatedNode(i));
    }
    let s: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in g.edges() {
        let (a, b) = (e.source.min(e.target), e.source.max(e.target));
        let v = -f64::from(e.weight) * s[a] * s[b];
        rows[a].push((b, v));
        rows[b].push((a, v));
    }
    for r in &mut rows {
        r.sort_unstable_by_key(|&(j, _)| j);
    }
    Ok(SignedLaplacian { n, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// K x N, row r is the eigenvector of the r-th smallest eigenvalue.
    pub coords: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

fn dense_smallest(lap: &SignedLaplacian, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let eig = SymmetricEigen::try_new(lap.to_dense(), f64::EPSILON, 0)
        .ok_or_else(|| Error::NoConvergence("dense symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..lap.n()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let vals = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order[..k].iter().map(|&i| eig.eigenvectors.column(i).iter().cloned().collect()).collect();
    Ok((vals, vecs))
}

/// Lanczos with full reorthogonalization on `2I - L`, whose top eigenpairs
/// are the bottom pairs of `L`. The Krylov space grows until every requested
/// Ritz pair has a small residual.
fn lanczos_smallest(lap: &SignedLaplacian, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = lap.n();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut q0);
    let mut basis: Vec<Vec<f64>> = vec![q0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut target = (4 * k + 60).min(n);
    loop {
        while basis.len() <= target && alpha.len() < target {
            let j = alpha.len();
            let q = &basis[j];
            lap.apply(q, &mut w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi = 2.0 * qi - *wi;
            }
            let a: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
            alpha.push(a);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for b in &basis {
                    let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 || basis.len() == n {
                break;
            }
            beta.push(norm);
            basis.push(w.iter().map(|x| x / norm).collect());
        }
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut vals = Vec::with_capacity(k);
        let mut vecs = Vec::with_capacity(k);
        let mut worst: f64 = 0.0;
        let mut lv = vec![0.0; n];
        for &c in order.iter().take(k) {
            let s = eig.eigenvectors.column(c);
            let mut v = vec![0.0; n];
            for (r, b) in basis.iter().take(m).enumerate() {
                v.iter_mut().zip(b).for_each(|(x, y)| *x += s[r] * y);
            }
            normalize(&mut v);
            lap.apply(&v, &mut lv);
            let lambda: f64 = lv.iter().zip(&v).map(|(x, y)| x * y).sum();
            let res = lv.iter().zip(&v).map(|(x, y)| (x - lambda * y).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(res);
            vals.push(lambda);
            vecs.push(v);
        }
        let exhausted = m == n || basis.len() == m;
        if worst <= RESIDUAL_TOL || exhausted {
            if worst > 1e-8 {
                return Err(Error::NoConvergence(format!(
                    "Lanczos residual {worst:.3e} after a {m}-dimensional Krylov space"
                )));
            }
            let mut idx: Vec<usize> = (0..k).collect();
            idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
            return Ok((idx.iter().map(|&i| vals[i]).collect(), idx.iter().map(|&i| vecs[i].clone()).collect()));
        }
        log::debug!("Lanczos: residual {worst:.3e} at m = {m}, growing the space");
        target = (target * 2).min(n);
    }
}

/// The `k` eigenvectors of the smallest Laplacian eigenvalues, unit norm and
/// sign-fixed so each vector's largest-magnitude entry is positive.
pub fn spectral_embedding(graph: &SignedGraph, k: usize) -> Result<SpectralEmbedding> {
    let n = graph.n_nodes();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "spectral dimension {k} must lie in 1..{n}"
        )));
    }
    let lap = signed_normalized_laplacian(graph)?;
    let (vals, mut vecs) = if n <= DENSE_LIMIT {
        dense_smallest(&lap, k)?
    } else {
        lanczos_smallest(&lap, k)?
    };
    let mut coords = DMatrix::zeros(k, n);
    for (r, v) in vecs.iter_mut().enumerate() {
        normalize(v);
        fix_sign(v);
        for (i, x) in v.iter().enumerate() {
            coords[(r, i)] = *x;
        }
    }
    Ok(SpectralEmbedding {
        coords,
        eigenvalues: vals,
    })
}

fn column_distance(points: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    (points.column(a) - points.column(b)).norm()
}

/// Greedy furthest-sum selection of `k` column indices of `points`.
///
/// Starts from a seeded random column, repeatedly adds the column with the
/// largest summed distance to those chosen (ties to the lower index), then
/// drops the starting column and picks its replacement by the same rule.
pub fn furthest_sum(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.ncols();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot select {k} of {n} points")));
    }
    let start = ChaCha8Rng::seed_from_u64(seed).random_range(0..n);
    let mut chosen = vec![start];
    let mut taken = vec![false; n];
    taken[start] = true;
    let mut sums: Vec<f64> = (0..n).map(|i| column_distance(points, i, start)).collect();
    let argmax = |sums: &[f64], taken: &[bool]| -> usize {
        let mut best = usize::MAX;
        for i in 0..n {
            if !taken[i] && (best == usize::MAX || sums[i] > sums[best]) {
                best = i;
            }
        }
        best
    };
    while chosen.len() < k {
        let next = argmax(&sums, &taken);
        taken[next] = true;
        chosen.push(next);
        for (i, s) in sums.iter_mut().enumerate() {
            *s += column_distance(points, i, next);
        }
    }
    if k < n {
        taken[start] = false;
        for (i, s) in sums.iter_mut().enumerate() {
            *s -= column_distance(points, i, start);
        }
        let replacement = argmax(&sums, &taken);
        chosen[0] = replacement;
    }
    Ok(chosen)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    #[default]
    Spectral,
    /// Small Gaussian positions; archetypes still seeded by furthest sum.
    Random,
}

/// Initial parameters for the configured variant. Random effects start at 0.
pub fn init_params(graph: &SignedGraph, config: &TrainConfig, method: InitMethod) -> Result<Params> {
    let n = graph.n_nodes();
    let k = config.k;
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..{n}")));
    }
    let variant = config.variant();
    let roles = variant.n_roles();
    let coords = match method {
        InitMethod::Spectral => spectral_embedding(graph, k)?.coords,
        InitMethod::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let normal = Normal::new(0.0, 0.1).expect("valid normal");
            DMatrix::from_fn(k, n, |_, _| normal.sample(&mut rng))
        }
    };
    let effects = vec![DVector::zeros(n); variant.effect_names().len()];
    let latent = match variant.kind {
        ModelKind::Sldm => Latent::Free {
            positions: vec![coords; roles],
        },
        ModelKind::Slim => {
            let picks = furthest_sum(&coords, k, config.seed)?;
            let mut basis = DMatrix::zeros(k, k);
            for (d, &p) in picks.iter().enumerate() {
                basis.set_column(d, &coords.column(p));
            }
            let dist = DMatrix::from_fn(k, n, |d, i| column_distance(&coords, i, picks[d]));
            let scale = dist.mean();
            let logits = if scale > 0.0 {
                dist.map(|x| -MIXTURE_SHARPNESS * x / scale)
            } else {
                DMatrix::zeros(k, n)
            };
            let closed = -(GATE_OPEN + ((roles * n) as f64).ln());
            let mut gates = DMatrix::from_element(k, roles * n, closed);
            for r in 0..roles {
                for (d, &p) in picks.iter().enumerate() {
                    gates[(d, r * n + p)] = GATE_OPEN;
                }
            }
            Latent::Archetypal {
                basis,
                logits: vec![logits; roles],
                gates,
            }
        }
    };
    let params = Params::from_parts(variant, latent, effects)?;
    if !params.is_finite() {
        return Err(Error::NonFinite("initialization produced non-finite entries".into()));
    }
    Ok(params)
}
