//! Adam and block-sampled MAP fitting.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SignedGraph;
use crate::model::{evaluate, negative_log_posterior, DistanceSign, ModelKind, Objective, Params, Topology, Variant};

pub const DEFAULT_SAMPLE_SIZE: usize = 3000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub topology: Topology,
    pub expressive_negative_sign: DistanceSign,
    pub k: usize,
    pub rho: f64,
    pub lr: f64,
    pub iters: usize,
    /// Nodes drawn per block; `None` means min(3000, N).
    pub sample_size: Option<usize>,
    pub seed: u64,
    pub deterministic: bool,
    pub rescale_block: bool,
    /// Evaluate the full-graph loss every this many iterations (0 disables).
    pub full_loss_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Sldm,
            topology: Topology::Undirected,
            expressive_negative_sign: DistanceSign::Minus,
            k: 8,
            rho: 1.0,
            lr: 0.05,
            iters: 5000,
            sample_size: None,
            seed: 0,
            deterministic: true,
            rescale_block: false,
            full_loss_every: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn variant(&self) -> Variant {
        Variant {
            kind: self.kind,
            topology: self.topology,
            expressive_negative_sign: self.expressive_negative_sign,
        }
    }

    pub fn objective(&self) -> Objective {
        Objective {
            rho: self.rho,
            rescale: self.rescale_block,
            deterministic: self.deterministic,
        }
    }

    pub fn effective_sample_size(&self, n_nodes: usize) -> usize {
        self.sample_size.unwrap_or(DEFAULT_SAMPLE_SIZE).min(n_nodes)
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidArgument(format!("rho must be >= 0, got {}", self.rho)));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidArgument(format!("lr must be > 0, got {}", self.lr)));
        }
        if let Some(s) = self.sample_size {
            if s == 0 || s > n_nodes {
                return Err(Error::InvalidArgument(format!(
                    "sample size {s} must lie in 1..={n_nodes}"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::InvalidArgument("Adam hyperparameters out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub first_moment: Params,
    pub second_moment: Params,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &Params, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step_count: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn with_defaults(params: &Params) -> Self {
        Self::new(params, 0.9, 0.999, 1e-8)
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut Params, grads: &Params, state: &mut AdamState, lr: f64) -> Result<()> {
    let names: Vec<&str> = grads.tensors().iter().map(|t| t.name).collect();
    let g = grads.tensors();
    let shapes_match = |p: &Params| {
        let t = p.tensors();
        t.len() == g.len() && t.iter().zip(&g).all(|(a, b)| a.data.len() == b.data.len())
    };
    if !shapes_match(params) || !shapes_match(&state.first_moment) || !shapes_match(&state.second_moment) {
        return Err(Error::Shape("gradient and optimizer state must mirror the parameters".into()));
    }
    for (t, name) in g.iter().zip(&names) {
        if let Some(pos) = t.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient entry {pos} of tensor {name} is {}",
                t.data[pos]
            )));
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let mut p_t = params.tensors_mut();
    let mut m_t = state.first_moment.tensors_mut();
    let mut v_t = state.second_moment.tensors_mut();
    for (ti, gt) in g.iter().enumerate() {
        let (p, m, v) = (&mut p_t[ti], &mut m_t[ti], &mut v_t[ti]);
        for e in 0..gt.data.len() {
            let ge = gt.data[e];
            m[e] = b1 * m[e] + (1.0 - b1) * ge;
            v[e] = b2 * v[e] + (1.0 - b2) * ge * ge;
            let m_hat = m[e] / c1;
            let v_hat = v[e] / c2;
            p[e] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Draw `sample_size` nodes with replacement, then sort and drop repeats.
pub fn sample_node_block<R: Rng>(n_nodes: usize, sample_size: usize, rng: &mut R) -> Result<Vec<usize>> {
    if sample_size == 0 || sample_size > n_nodes {
        return Err(Error::InvalidArgument(format!(
            "sample size {sample_size} must lie in 1..={n_nodes}"
        )));
    }
    let mut s: Vec<usize> = (0..sample_size).map(|_| rng.random_range(0..n_nodes)).collect();
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub block_loss: f64,
    pub full_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Params,
    pub trace: Vec<TraceRow>,
    /// Full-graph loss after the last step, when full-loss tracking is on.
    pub final_full_loss: Option<f64>,
    pub unconverged_dyads: usize,
}

/// Full-graph negative log-posterior.
pub fn full_loss(params: &Params, graph: &SignedGraph, objective: &Objective) -> Result<f64> {
    let all: Vec<usize> = (0..graph.n_nodes()).collect();
    let obj = Objective {
        rescale: false,
        ..*objective
    };
    negative_log_posterior(params, graph, &all, &obj)
}

/// Run `config.iters` Adam steps, each on a freshly sampled node block.
pub fn fit(graph: &SignedGraph, init: Params, config: &TrainConfig) -> Result<FitResult> {
    let n = graph.n_nodes();
    config.validate(n)?;
    if init.n_nodes() != n {
        return Err(Error::Shape(format!(
            "initial parameters cover {} nodes but the graph has {n}",
            init.n_nodes()
        )));
    }
    let objective = config.objective();
    let sample_size = config.effective_sample_size(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init;
    let mut state = AdamState::new(&params, config.beta1, config.beta2, config.eps);
    let mut trace = Vec::with_capacity(config.iters);
    let mut unconverged = 0;
    for it in 0..config.iters {
        let full = if config.full_loss_every > 0 && it % config.full_loss_every == 0 {
            Some(full_loss(&params, graph, &objective)?)
        } else {
            None
        };
        let block = sample_node_block(n, sample_size, &mut rng)?;
        let eval = evaluate(&params, graph, &block, &objective, true)?;
        unconverged += eval.unconverged;
        let grad = eval.gradient.expect("gradient requested");
        adam_step(&mut params, &grad, &mut state, config.lr)?;
        if !params.is_finite() {
            return Err(Error::NonFinite(format!("parameters became non-finite at iteration {it}")));
        }
        trace.push(TraceRow {
            iteration: it,
            block_loss: eval.loss,
            full_loss: full,
        });
        if (it + 1) % 250 == 0 {
            log::info!("iteration {}/{}: block loss {:.4}", it + 1, config.iters, eval.loss);
        }
    }
    if unconverged > 0 {
        log::warn!("{unconverged} dyad evaluations hit the Bessel series term cap");
    }
    let final_full_loss = if config.full_loss_every > 0 {
        Some(full_loss(&params, graph, &objective)?)
    } else {
        None
    };
    Ok(FitResult {
        params,
        trace,
        final_full_loss,
        unconverged_dyads: unconverged,
    })
}

/// Write the loss trace as `iteration,block_loss,full_loss` CSV.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], mut out: W) -> Result<()> {
    writeln!(out, "iteration,block_loss,full_loss")?;
    for row in trace {
        match row.full_loss {
            Some(f) => writeln!(out, "{},{},{}", row.iteration, row.block_loss, f)?,
            None => writeln!(out, "{},{},", row.iteration, row.block_loss)?,
        }
    }
    Ok(())
}
