//! Link-prediction benchmark on held-out dyads.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{split_train_test, HoldoutSplit, SignedGraph};
use crate::init::{init_params, InitMethod};
use crate::model::Params;
use crate::optim::{fit, FitResult, TrainConfig};
use crate::skellam::RATE_FLOOR;

/// `[l+, l-, ln l+, ln l-]` per dyad, with rates floored before the logs.
pub type DyadFeatures = [f64; 4];

pub fn dyad_features(params: &Params, dyads: &[(usize, usize)]) -> Result<Vec<DyadFeatures>> {
    let floor = RATE_FLOOR.ln();
    Ok(params
        .log_rates(dyads)?
        .into_iter()
        .map(|(a, b)| {
            let (a, b) = (a.max(floor), b.max(floor));
            [a.exp(), b.exp(), a, b]
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    /// Weight of the `0.5 * |w|^2` penalty relative to the summed log-loss.
    pub l2: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            l2: 1.0,
            tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

/// Logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Coefficients on the standardized features.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl LogisticModel {
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Linear score; monotone in the predicted probability.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.standardize(x).iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        crate::model::sigmoid(self.decision(x))
    }
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Penalized log-loss, gradient and Hessian with respect to `[w, b]`.
fn logistic_terms(
    x: &[Vec<f64>],
    y: &[bool],
    theta: &[f64],
    l2: f64,
    with_hessian: bool,
) -> (f64, Vec<f64>, Vec<f64>) {
    let p = theta.len() - 1;
    let dim = p + 1;
    let mut loss = 0.0;
    let mut grad = vec![0.0; dim];
    let mut hess = if with_hessian { vec![0.0; dim * dim] } else { Vec::new() };
    for (xi, &yi) in x.iter().zip(y) {
        let z: f64 = xi.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + theta[p];
        let t = if yi { 1.0 } else { 0.0 };
        loss += log1p_exp(z) - t * z;
        let s = crate::model::sigmoid(z);
        let r = s - t;
        for a in 0..p {
            grad[a] += r * xi[a];
        }
        grad[p] += r;
        if with_hessian {
            let w = s * (1.0 - s);
            for a in 0..dim {
                let xa = if a < p { xi[a] } else { 1.0 };
                for b in a..dim {
                    let xb = if b < p { xi[b] } else { 1.0 };
                    hess[a * dim + b] += w * xa * xb;
                }
            }
        }
    }
    for a in 0..p {
        loss += 0.5 * l2 * theta[a] * theta[a];
        grad[a] += l2 * theta[a];
        if with_hessian {
            hess[a * dim + a] += l2;
        }
    }
    if with_hessian {
        for a in 0..dim {
            for b in 0..a {
                hess[a * dim + b] = hess[b * dim + a];
            }
        }
    }
    (loss, grad, hess)
}

/// Fit an L2-penalized logistic regression (intercept unpenalized) with
/// damped Newton steps.
pub fn logistic_fit(features: &[Vec<f64>], labels: &[bool], config: &LogisticConfig) -> Result<LogisticModel> {
    if features.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::InsufficientClasses(format!(
            "need both classes, got {n_pos} positive of {}",
            labels.len()
        )));
    }
    let p = features[0].len();
    if features.iter().any(|f| f.len() != p || f.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument("feature rows must be finite and equally long".into()));
    }
    let m = features.len() as f64;
    let mut mean = vec![0.0; p];
    for f in features {
        for (a, v) in mean.iter_mut().zip(f) {
            *a += v / m;
        }
    }
    let mut scale = vec![0.0; p];
    for f in features {
        for ((s, v), mu) in scale.iter_mut().zip(f).zip(&mean) {
            *s += (v - mu) * (v - mu) / m;
        }
    }
    for s in &mut scale {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let x: Vec<Vec<f64>> = features
        .iter()
        .map(|f| f.iter().zip(&mean).zip(&scale).map(|((v, mu), s)| (v - mu) / s).collect())
        .collect();

    let dim = p + 1;
    let mut theta = vec![0.0; dim];
    let mut iterations = 0;
    let (mut loss, mut grad, mut hess) = logistic_terms(&x, labels, &theta, config.l2, true);
    let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    while norm(&grad) > config.tol && iterations < config.max_iter {
        iterations += 1;
        let h = nalgebra::DMatrix::from_row_slice(dim, dim, &hess);
        let g = nalgebra::DVector::from_column_slice(&grad);
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&g),
            None => g.clone(),
        };
        let slope = -g.dot(&step);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, d)| a - t * d).collect();
            let (l, _, _) = logistic_terms(&x, labels, &cand, config.l2, false);
            if l <= loss + 1e-4 * t * slope || t < 1e-12 {
                theta = cand;
                break;
            }
            t *= 0.5;
        }
        (loss, grad, hess) = logistic_terms(&x, labels, &theta, config.l2, true);
        if t < 1e-12 {
            // no further decrease is representable
            break;
        }
    }
    let gradient_norm = norm(&grad);
    if gradient_norm > config.tol {
        log::warn!("logistic fit stopped at gradient norm {gradient_norm:.3e}");
    }
    Ok(LogisticModel {
        mean,
        scale,
        weights: theta[..p].to_vec(),
        bias: theta[p],
        iterations,
        gradient_norm,
    })
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("score is NaN".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InsufficientClasses(format!(
            "AUC needs both classes, got {pos} positive and {neg} negative"
        )));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve (Mann-Whitney statistic, ties counted half).
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // midrank of positions i..=j (1-based)
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: `sum_k (R_k - R_{k-1}) P_k` over distinct score
/// thresholds in decreasing order.
pub fn auc_pr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut group_tp = 0;
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                group_tp += 1;
            }
            j += 1;
        }
        tp += group_tp;
        seen += j - i;
        if group_tp > 0 {
            ap += (group_tp as f64 / pos as f64) * (tp as f64 / seen as f64);
        }
        i = j;
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Positive versus negative held-out links.
    #[serde(rename = "p@n")]
    PosNeg,
    /// Positive links versus held-out non-links.
    #[serde(rename = "p@z")]
    PosZero,
    /// Negative links versus held-out non-links.
    #[serde(rename = "n@z")]
    NegZero,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::PosNeg, Task::PosZero, Task::NegZero];

    pub fn name(&self) -> &'static str {
        match self {
            Task::PosNeg => "p@n",
            Task::PosZero => "p@z",
            Task::NegZero => "n@z",
        }
    }

    /// Dyads and labels (true = first class) for this task.
    pub fn dyads(&self, split: &HoldoutSplit) -> (Vec<(usize, usize)>, Vec<bool>) {
        let pos = split.test_edges.iter().filter(|e| e.is_positive()).map(|e| (e.source, e.target));
        let neg = split.test_edges.iter().filter(|e| !e.is_positive()).map(|e| (e.source, e.target));
        let zeros = split.test_zeros.iter().copied();
        let (first, second): (Vec<_>, Vec<_>) = match self {
            Task::PosNeg => (pos.collect(), neg.collect()),
            Task::PosZero => (pos.collect(), zeros.collect()),
            Task::NegZero => (neg.collect(), zeros.collect()),
        };
        let labels = std::iter::repeat_n(true, first.len())
            .chain(std::iter::repeat_n(false, second.len()))
            .collect();
        (first.into_iter().chain(second).collect(), labels)
    }
}

/// Fold index of every example; each class is shuffled and dealt round-robin
/// so every fold gets a near-equal share of both classes.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < folds {
            return Err(Error::InsufficientClasses(format!(
                "class has {} examples, fewer than {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (r, i) in idx.into_iter().enumerate() {
            fold_of[i] = r % folds;
        }
    }
    Ok(fold_of)
}

/// Out-of-fold scores from stratified k-fold cross-validation: example `i`
/// is scored by the model trained on every fold except its own.
pub fn cross_validated_scores(
    features: &[Vec<f64>],
    labels: &[bool],
    folds: usize,
    seed: u64,
    config: &LogisticConfig,
) -> Result<Vec<f64>> {
    let fold_of = stratified_folds(labels, folds, seed)?;
    let mut scores = vec![0.0; labels.len()];
    for f in 0..folds {
        let (train_x, train_y): (Vec<Vec<f64>>, Vec<bool>) = (0..labels.len())
            .filter(|&i| fold_of[i] != f)
            .map(|i| (features[i].clone(), labels[i]))
            .unzip();
        let model = logistic_fit(&train_x, &train_y, config)?;
        for i in (0..labels.len()).filter(|&i| fold_of[i] == f) {
            scores[i] = model.decision(&features[i]);
        }
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: Task,
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub n_positive: usize,
    pub n_negative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub k: usize,
    pub split_seed: u64,
    pub cv_seed: u64,
    pub folds: usize,
    pub tasks: Vec<TaskResult>,
}

impl EvalReport {
    pub fn task(&self, task: Task) -> Option<&TaskResult> {
        self.tasks.iter().find(|t| t.task == task)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "variant,k,task,auc_roc,auc_pr,n_positive,n_negative,split_seed")?;
        for t in &self.tasks {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.variant,
                self.k,
                t.task.name(),
                t.auc_roc,
                t.auc_pr,
                t.n_positive,
                t.n_negative,
                self.split_seed
            )?;
        }
        Ok(())
    }
}

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_HOLDOUT: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub split: HoldoutSplit,
    pub fit: FitResult,
    pub report: EvalReport,
}

/// Hide a fraction of edges, fit on the residual graph and score the
/// held-out dyads. `seed` drives the split and the classifier folds; the
/// fit uses `config.seed`.
pub fn run_benchmark(
    graph: &SignedGraph,
    config: &TrainConfig,
    holdout_fraction: f64,
    seed: u64,
    init: InitMethod,
) -> Result<BenchmarkRun> {
    let split = split_train_test(graph, holdout_fraction, seed)?;
    let start = init_params(&split.train, config, init)?;
    let fit = fit(&split.train, start, config)?;
    let report = score_split(&fit.params, &split, DEFAULT_FOLDS, seed)?;
    Ok(BenchmarkRun { split, fit, report })
}

/// Score every task with rate features from `params` (fitted on
/// `split.train`).
pub fn score_split(params: &Params, split: &HoldoutSplit, folds: usize, cv_seed: u64) -> Result<EvalReport> {
    if params.n_nodes() != split.train.n_nodes() {
        return Err(Error::Shape(format!(
            "parameters cover {} nodes but the split has {}",
            params.n_nodes(),
            split.train.n_nodes()
        )));
    }
    let config = LogisticConfig::default();
    let mut tasks = Vec::new();
    for task in Task::ALL {
        let (dyads, labels) = task.dyads(split);
        let n_pos = labels.iter().filter(|&&l| l).count();
        let n_neg = labels.len() - n_pos;
        if n_pos < folds || n_neg < folds {
            log::warn!("skipping {}: {n_pos} vs {n_neg} examples", task.name());
            continue;
        }
        let feats: Vec<Vec<f64>> = dyad_features(params, &dyads)?.into_iter().map(|f| f.to_vec()).collect();
        let scores = cross_validated_scores(&feats, &labels, folds, cv_seed, &config)?;
        tasks.push(TaskResult {
            task,
            auc_roc: auc_roc(&scores, &labels)?,
            auc_pr: auc_pr(&scores, &labels)?,
            n_positive: n_pos,
            n_negative: n_neg,
        });
    }
    let v = params.variant();
    Ok(EvalReport {
        variant: v.label(),
        k: params.k(),
        split_seed: split.seed,
        cv_seed,
        folds,
        tasks,
    })
}
