//! Model parameterizations and rate functions.
//!
//! Both families measure dyad distances between per-node positions:
//!
//! * **SLDM** keeps free positions in `R^K`.
//! * **SLIM** constrains positions to convex combinations of archetypes:
//!   mixtures `z_i = softmax(z~_i)`, gated selection weights `C`, and archetype
//!   corners `A = R X C` with `X` the stacked mixtures. Distances are measured
//!   between the projected points `A z_i`.
//!
//! Directed variants carry one position per role (source `z`, target `w`, and
//! for the expressive variant a separate negative-source `u`).

mod objective;

pub use objective::{evaluate, gradient, negative_log_posterior, Evaluation, Objective};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skellam::{SkellamRates, RATE_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Sldm,
    Slim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Undirected,
    Directed,
    DirectedExpressive,
}

/// Sign of the distance in the negative rate of the expressive variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceSign {
    #[default]
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub kind: ModelKind,
    pub topology: Topology,
    #[serde(default)]
    pub expressive_negative_sign: DistanceSign,
}

/// Which roles and effect vectors feed one of the two rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RateGeometry {
    pub src_role: usize,
    pub dst_role: usize,
    pub src_effect: usize,
    pub dst_effect: usize,
    /// +1 or -1 multiplying the distance inside the exponent.
    pub distance_sign: f64,
}

impl Variant {
    pub fn new(kind: ModelKind, topology: Topology) -> Self {
        Self {
            kind,
            topology,
            expressive_negative_sign: DistanceSign::Minus,
        }
    }

    pub fn n_roles(&self) -> usize {
        match self.topology {
            Topology::Undirected => 1,
            Topology::Directed => 2,
            Topology::DirectedExpressive => 3,
        }
    }

    pub fn role_names(&self) -> &'static [&'static str] {
        &["z", "w", "u"][..self.n_roles()]
    }

    pub fn effect_names(&self) -> &'static [&'static str] {
        match self.topology {
            Topology::Undirected => &["gamma", "delta"],
            _ => &["beta", "gamma", "delta", "epsilon"],
        }
    }

    pub fn is_directed(&self) -> bool {
        self.topology != Topology::Undirected
    }

    /// Geometry of the positive rate.
    pub(crate) fn positive(&self) -> RateGeometry {
        match self.topology {
            Topology::Undirected => RateGeometry {
                src_role: 0,
                dst_role: 0,
                src_effect: 0,
                dst_effect: 0,
                distance_sign: -1.0,
            },
            _ => RateGeometry {
                src_role: 0,
                dst_role: 1,
                src_effect: 0,
                dst_effect: 1,
                distance_sign: -1.0,
            },
        }
    }

    /// Geometry of the negative rate.
    pub(crate) fn negative(&self) -> RateGeometry {
        match self.topology {
            Topology::Undirected => RateGeometry {
                src_role: 0,
                dst_role: 0,
                src_effect: 1,
                dst_effect: 1,
                distance_sign: 1.0,
            },
            Topology::Directed => RateGeometry {
                src_role: 0,
                dst_role: 1,
                src_effect: 2,
                dst_effect: 3,
                distance_sign: 1.0,
            },
            Topology::DirectedExpressive => RateGeometry {
                src_role: 2,
                dst_role: 1,
                src_effect: 2,
                dst_effect: 3,
                distance_sign: match self.expressive_negative_sign {
                    DistanceSign::Minus => -1.0,
                    DistanceSign::Plus => 1.0,
                },
            },
        }
    }

    pub fn label(&self) -> String {
        let kind = match self.kind {
            ModelKind::Sldm => "sldm",
            ModelKind::Slim => "slim",
        };
        let topo = match self.topology {
            Topology::Undirected => "undirected",
            Topology::Directed => "directed",
            Topology::DirectedExpressive => "directed-expressive",
        };
        format!("{kind}/{topo}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Latent {
    /// Free positions, one K x N matrix per role.
    Free { positions: Vec<DMatrix<f64>> },
    /// Archetypal parameterization: basis `R` (K x K), pre-softmax mixtures
    /// per role (K x N each) and pre-sigmoid gates (K x roles*N).
    Archetypal {
        basis: DMatrix<f64>,
        logits: Vec<DMatrix<f64>>,
        gates: DMatrix<f64>,
    },
}

/// Trainable state of any variant. Also used for gradients and optimizer
/// moments, which share its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    variant: Variant,
    pub latent: Latent,
    /// Random effects in `Variant::effect_names` order.
    pub effects: Vec<DVector<f64>>,
}

/// A named view of one parameter tensor.
#[derive(Debug, Clone, Copy)]
pub struct TensorView<'a> {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

impl Params {
    pub fn zeros(variant: Variant, k: usize, n: usize) -> Self {
        let roles = variant.n_roles();
        let latent = match variant.kind {
            ModelKind::Sldm => Latent::Free {
                positions: vec![DMatrix::zeros(k, n); roles],
            },
            ModelKind::Slim => Latent::Archetypal {
                basis: DMatrix::zeros(k, k),
                logits: vec![DMatrix::zeros(k, n); roles],
                gates: DMatrix::zeros(k, roles * n),
            },
        };
        Self {
            variant,
            latent,
            effects: vec![DVector::zeros(n); variant.effect_names().len()],
        }
    }

    /// Assemble from parts, checking shapes against the variant.
    pub fn from_parts(variant: Variant, latent: Latent, effects: Vec<DVector<f64>>) -> Result<Self> {
        let roles = variant.n_roles();
        let (k, n) = match &latent {
            Latent::Free { positions } => {
                if variant.kind != ModelKind::Sldm {
                    return Err(Error::Shape("free positions require the sldm kind".into()));
                }
                if positions.len() != roles {
                    return Err(Error::Shape(format!(
                        "expected {roles} position matrices, got {}",
                        positions.len()
                    )));
                }
                let (k, n) = positions[0].shape();
                if positions.iter().any(|p| p.shape() != (k, n)) {
                    return Err(Error::Shape("position matrices differ in shape".into()));
                }
                (k, n)
            }
            Latent::Archetypal {
                basis,
                logits,
                gates,
            } => {
                if variant.kind != ModelKind::Slim {
                    return Err(Error::Shape("archetypal latent requires the slim kind".into()));
                }
                if logits.len() != roles {
                    return Err(Error::Shape(format!(
                        "expected {roles} mixture matrices, got {}",
                        logits.len()
                    )));
                }
                let (k, n) = logits[0].shape();
                if logits.iter().any(|p| p.shape() != (k, n)) {
                    return Err(Error::Shape("mixture matrices differ in shape".into()));
                }
                if basis.shape() != (k, k) {
                    return Err(Error::Shape(format!("basis must be {k}x{k}")));
                }
                if gates.shape() != (k, roles * n) {
                    return Err(Error::Shape(format!("gates must be {k}x{}", roles * n)));
                }
                (k, n)
            }
        };
        if k == 0 {
            return Err(Error::Shape("latent dimension must be at least 1".into()));
        }
        if effects.len() != variant.effect_names().len() || effects.iter().any(|e| e.len() != n) {
            return Err(Error::Shape(format!(
                "expected {} effect vectors of length {n}",
                variant.effect_names().len()
            )));
        }
        Ok(Self {
            variant,
            latent,
            effects,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn k(&self) -> usize {
        match &self.latent {
            Latent::Free { positions } => positions[0].nrows(),
            Latent::Archetypal { basis, .. } => basis.nrows(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.effects[0].len()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.variant, self.k(), self.n_nodes())
    }

    /// Tensors in a fixed order, with names used by the checkpoint format.
    pub fn tensors(&self) -> Vec<TensorView<'_>> {
        fn view<'a>(name: &'static str, m: &'a DMatrix<f64>) -> TensorView<'a> {
            TensorView {
                name,
                rows: m.nrows(),
                cols: m.ncols(),
                data: m.as_slice(),
            }
        }
        let mut out = Vec::new();
        let roles = self.variant.role_names();
        match &self.latent {
            Latent::Free { positions } => {
                for (name, p) in roles.iter().zip(positions) {
                    out.push(view(name, p));
                }
            }
            Latent::Archetypal {
                basis,
                logits,
                gates,
            } => {
                const LOGIT_NAMES: [&str; 3] = ["z_logits", "w_logits", "u_logits"];
                out.push(view("basis", basis));
                for (name, p) in LOGIT_NAMES.iter().zip(logits) {
                    out.push(view(name, p));
                }
                out.push(view("gates", gates));
            }
        }
        for (name, e) in self.variant.effect_names().iter().zip(&self.effects) {
            out.push(TensorView {
                name,
                rows: e.len(),
                cols: 1,
                data: e.as_slice(),
            });
        }
        out
    }

    /// Mutable tensor storage in the same order as [`Params::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        match &mut self.latent {
            Latent::Free { positions } => {
                out.extend(positions.iter_mut().map(|p| p.as_mut_slice()));
            }
            Latent::Archetypal {
                basis,
                logits,
                gates,
            } => {
                out.push(basis.as_mut_slice());
                out.extend(logits.iter_mut().map(|p| p.as_mut_slice()));
                out.push(gates.as_mut_slice());
            }
        }
        out.extend(self.effects.iter_mut().map(|e| e.as_mut_slice()));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Positions distances are measured between, one K x N matrix per role.
    pub fn embed(&self) -> Result<Embedding> {
        match &self.latent {
            Latent::Free { positions } => Ok(Embedding {
                projected: positions.clone(),
                archetypal: None,
            }),
            Latent::Archetypal {
                basis,
                logits,
                gates,
            } => {
                let n = self.n_nodes();
                let k = self.k();
                let mixtures: Vec<DMatrix<f64>> = logits.iter().map(mixture_weights).collect();
                let mut stacked = DMatrix::zeros(k, mixtures.len() * n);
                for (r, z) in mixtures.iter().enumerate() {
                    stacked.columns_mut(r * n, n).copy_from(z);
                }
                let gate_sig = gates.map(sigmoid);
                let (c, colsum) = gate_with_sums(&stacked, &gate_sig)?;
                let m = &stacked * &c;
                let a = basis * &m;
                let projected = mixtures.iter().map(|z| &a * z).collect();
                Ok(Embedding {
                    projected,
                    archetypal: Some(ArchetypeState {
                        mixtures,
                        stacked,
                        gate_sig,
                        colsum,
                        c,
                        m,
                        a,
                    }),
                })
            }
        }
    }

    /// Log-rates `(ln l+, ln l-)` for the given dyads; ordered for directed
    /// variants.
    pub fn log_rates(&self, pairs: &[(usize, usize)]) -> Result<Vec<(f64, f64)>> {
        let emb = self.embed()?;
        pairs
            .iter()
            .map(|&(i, j)| {
                let n = self.n_nodes();
                if i >= n || j >= n {
                    return Err(Error::InvalidArgument(format!(
                        "pair ({i}, {j}) out of range for {n} nodes"
                    )));
                }
                let (a, b) = emb.log_rates(self, i, j);
                if !a.is_finite() || !b.is_finite() || b.exp().is_infinite() || a.exp().is_infinite() {
                    return Err(Error::NonFinite(format!(
                        "rates for dyad ({i}, {j}) are not finite: ln l+ = {a}, ln l- = {b}"
                    )));
                }
                Ok((a, b))
            })
            .collect()
    }

    /// Skellam rates for the given dyads, floored at `RATE_FLOOR`.
    pub fn rates(&self, pairs: &[(usize, usize)]) -> Result<Vec<SkellamRates>> {
        self.log_rates(pairs)?
            .into_iter()
            .map(|(a, b)| SkellamRates::new(a.exp().max(RATE_FLOOR), b.exp().max(RATE_FLOOR)))
            .collect()
    }

    /// Simplex mixtures per role for SLIM; `None` for SLDM.
    pub fn mixtures(&self) -> Option<Vec<DMatrix<f64>>> {
        match &self.latent {
            Latent::Archetypal { logits, .. } => Some(logits.iter().map(mixture_weights).collect()),
            Latent::Free { .. } => None,
        }
    }

    /// Archetype corners `A = R X C` for SLIM.
    pub fn archetypes(&self) -> Result<Option<DMatrix<f64>>> {
        Ok(self.embed()?.archetypal.map(|s| s.a))
    }
}

pub(crate) struct ArchetypeState {
    pub mixtures: Vec<DMatrix<f64>>,
    pub stacked: DMatrix<f64>,
    pub gate_sig: DMatrix<f64>,
    pub colsum: DVector<f64>,
    pub c: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

/// Forward pass result: projected positions plus what backprop needs.
pub struct Embedding {
    pub projected: Vec<DMatrix<f64>>,
    pub(crate) archetypal: Option<ArchetypeState>,
}

#[inline]
pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

impl Embedding {
    #[inline]
    pub(crate) fn column(&self, role: usize, i: usize) -> &[f64] {
        let m = &self.projected[role];
        let k = m.nrows();
        &m.as_slice()[i * k..(i + 1) * k]
    }

    pub(crate) fn log_rates(&self, params: &Params, i: usize, j: usize) -> (f64, f64) {
        let v = params.variant;
        let rate = |g: RateGeometry| {
            let d = distance(self.column(g.src_role, i), self.column(g.dst_role, j));
            params.effects[g.src_effect][i] + params.effects[g.dst_effect][j] + g.distance_sign * d
        };
        (rate(v.positive()), rate(v.negative()))
    }

    /// Archetype corners (SLIM only).
    pub fn archetypes(&self) -> Option<&DMatrix<f64>> {
        self.archetypal.as_ref().map(|s| &s.a)
    }

    /// Backpropagate gradients of the projected positions (plus an extra
    /// gradient on the archetype matrix) into parameter space. Effects are
    /// left at zero.
    pub(crate) fn backward(
        &self,
        params: &Params,
        d_projected: Vec<DMatrix<f64>>,
        d_archetypes_extra: Option<&DMatrix<f64>>,
    ) -> Params {
        let mut grad = params.zeros_like();
        match (&params.latent, &self.archetypal, &mut grad.latent) {
            (Latent::Free { .. }, _, Latent::Free { positions }) => {
                *positions = d_projected;
            }
            (
                Latent::Archetypal { basis, .. },
                Some(st),
                Latent::Archetypal {
                    basis: g_basis,
                    logits: g_logits,
                    gates: g_gates,
                },
            ) => {
                let n = params.n_nodes();
                let mut d_a = match d_archetypes_extra {
                    Some(extra) => extra.clone(),
                    None => DMatrix::zeros(st.a.nrows(), st.a.ncols()),
                };
                for (dp, z) in d_projected.iter().zip(&st.mixtures) {
                    d_a += dp * z.transpose();
                }
                *g_basis = &d_a * st.m.transpose();
                let d_m = basis.transpose() * &d_a;
                let mut d_stacked = &d_m * st.c.transpose();
                let d_c = st.stacked.transpose() * &d_m;
                // C = P / colsum with P = X^T o sigma(G)^T
                let (rows, k) = d_c.shape();
                for d in 0..k {
                    let inner: f64 = (0..rows).map(|r| d_c[(r, d)] * st.c[(r, d)]).sum();
                    let s = st.colsum[d];
                    for r in 0..rows {
                        let d_p = (d_c[(r, d)] - inner) / s;
                        let sig = st.gate_sig[(d, r)];
                        d_stacked[(d, r)] += d_p * sig;
                        g_gates[(d, r)] = d_p * st.stacked[(d, r)] * sig * (1.0 - sig);
                    }
                }
                for (r, (z, dp)) in st.mixtures.iter().zip(&d_projected).enumerate() {
                    let mut d_z = d_stacked.columns(r * n, n).into_owned();
                    d_z += st.a.transpose() * dp;
                    g_logits[r] = softmax_backward(z, &d_z);
                }
            }
            _ => unreachable!("gradient layout always mirrors the parameters"),
        }
        grad
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Columnwise softmax with max subtraction.
pub fn mixture_weights(logits: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = logits.clone();
    for mut col in out.column_iter_mut() {
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        col.apply(|v| *v = (*v - max).exp());
        let s = col.sum();
        col /= s;
    }
    out
}

fn softmax_backward(z: &DMatrix<f64>, d_z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(z.nrows(), z.ncols());
    for c in 0..z.ncols() {
        let zc = z.column(c);
        let dc = d_z.column(c);
        let inner = zc.dot(&dc);
        for r in 0..z.nrows() {
            out[(r, c)] = zc[r] * (dc[r] - inner);
        }
    }
    out
}

fn gate_with_sums(z: &DMatrix<f64>, gate_sig: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (k, n) = z.shape();
    let mut c = DMatrix::zeros(n, k);
    let mut sums = DVector::zeros(k);
    for d in 0..k {
        let mut s = 0.0;
        for i in 0..n {
            let p = z[(d, i)] * gate_sig[(d, i)];
            c[(i, d)] = p;
            s += p;
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NonFinite(format!(
                "gated column {d} has zero mass; cannot normalize onto the simplex"
            )));
        }
        for i in 0..n {
            c[(i, d)] /= s;
        }
        sums[d] = s;
    }
    Ok((c, sums))
}

/// Selection weights `c_nd = (Z^T o sigma(G)^T)_nd / sum_n' (...)_n'd`, an
/// N x K matrix whose columns lie on the simplex.
pub fn gate_matrix(z: &DMatrix<f64>, gates: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if z.shape() != gates.shape() {
        return Err(Error::Shape(format!(
            "mixtures are {:?} but gates are {:?}",
            z.shape(),
            gates.shape()
        )));
    }
    gate_with_sums(z, &gates.map(sigmoid)).map(|(c, _)| c)
}

/// Archetype corners `A = R Z C`.
pub fn compose_archetypes(r: &DMatrix<f64>, z: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = r.nrows();
    if r.ncols() != k || z.nrows() != k || c.nrows() != z.ncols() || c.ncols() != k {
        return Err(Error::Shape(format!(
            "expected R {k}x{k}, Z {k}xN, C Nx{k}; got R {:?}, Z {:?}, C {:?}",
            r.shape(),
            z.shape(),
            c.shape()
        )));
    }
    Ok(r * z * c)
}
