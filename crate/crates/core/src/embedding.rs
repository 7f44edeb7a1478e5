//! The joint concept/object embedding space.
//!
//! Every vector `x` in `R^N` stands for the half-space
//! `V(x) = {y : (y - x)^T x > 0}`; its probability is the standard Gaussian
//! measure of that half-space. Two vectors reduce to the bivariate orthant
//! problem with thresholds `|a|`, `|b|` and correlation `cos(a, b)`.
//!
//! The slice-level functions at the bottom are the hot path used by the
//! executor; the `EmbeddingVector` API validates dimensions and finiteness.

use crate::numerics::{
    self, orthant_conditional, orthant_conditional_grad, orthant_upper, orthant_upper_subgrad,
    OrthantInputs,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probabilities fed to `logit`/`ln` are mapped into `[EPS, 1 - EPS]`.
pub const CLAMP_EPS: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding has a non-finite coordinate")]
    NonFinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Concept,
    Object,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub coords: Vec<f64>,
    pub role: Role,
}

impl EmbeddingVector {
    pub fn new(coords: Vec<f64>, role: Role) -> Result<Self, EmbeddingError> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(Self { coords, role })
    }

    pub fn concept(coords: Vec<f64>) -> Result<Self, EmbeddingError> {
        Self::new(coords, Role::Concept)
    }

    pub fn object(coords: Vec<f64>) -> Result<Self, EmbeddingError> {
        Self::new(coords, Role::Object)
    }

    /// Coordinates drawn i.i.d. from `N(0, 1/N)`, so norms start near one.
    pub fn random_concept<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, (1.0 / dim as f64).sqrt()).expect("valid std");
        Self { coords: (0..dim).map(|_| normal.sample(rng)).collect(), role: Role::Concept }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }
}

/// Affine map from perception features (`D`) into the embedding space (`N`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectEncoder {
    /// `D x N`, row-major: `weight[d][j]` multiplies feature `d` into coordinate `j`.
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl ObjectEncoder {
    pub fn zeros(input_dim: usize, dim: usize) -> Self {
        Self { weight: vec![vec![0.0; dim]; input_dim], bias: vec![0.0; dim] }
    }

    /// Weights drawn from `N(0, 1/D)`, zero bias.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, dim: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, (1.0 / input_dim as f64).sqrt()).expect("valid std");
        let weight = (0..input_dim).map(|_| (0..dim).map(|_| normal.sample(rng)).collect()).collect();
        Self { weight, bias: vec![0.0; dim] }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.len()
    }

    pub fn output_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn encode(&self, features: &[f64]) -> Result<EmbeddingVector, EmbeddingError> {
        if features.len() != self.input_dim() {
            return Err(EmbeddingError::DimensionMismatch {
                expected: self.input_dim(),
                found: features.len(),
            });
        }
        let mut out = vec![0.0; self.output_dim()];
        self.encode_into(features, &mut out);
        EmbeddingVector::object(out)
    }

    pub fn encode_into(&self, features: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (f, row) in features.iter().zip(&self.weight) {
            if *f == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += f * w;
            }
        }
    }

    /// Accumulates `dL/dW` and `dL/db` given `dL/do` for one encoded object.
    pub fn backward(&self, features: &[f64], grad_out: &[f64], grad: &mut ObjectEncoder) {
        for (gb, g) in grad.bias.iter_mut().zip(grad_out) {
            *gb += g;
        }
        for (f, row) in features.iter().zip(grad.weight.iter_mut()) {
            if *f == 0.0 {
                continue;
            }
            for (gw, g) in row.iter_mut().zip(grad_out) {
                *gw += f * g;
            }
        }
    }
}

/// The three statistics a metaconcept operator sees for an ordered pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntailmentStats {
    /// logit Pr(a | b)
    pub g1_ab: f64,
    /// logit Pr(b | a)
    pub g1_ba: f64,
    /// ln [Pr(a, b) / (Pr(a) Pr(b))]
    pub g2: f64,
}

impl EntailmentStats {
    pub fn as_array(&self) -> [f64; 3] {
        [self.g1_ab, self.g1_ba, self.g2]
    }
}

fn check_pair(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<(), EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    if a.coords.iter().chain(&b.coords).any(|c| !c.is_finite()) {
        return Err(EmbeddingError::NonFinite);
    }
    Ok(())
}

/// Pr(a): Gaussian measure of `V(a)`.
pub fn denotational_prob(a: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.coords.iter().any(|c| !c.is_finite()) {
        return Err(EmbeddingError::NonFinite);
    }
    Ok(numerics::sf(a.norm()))
}

/// Pr(a, b): Gaussian measure of `V(a) ∩ V(b)`.
pub fn joint_prob(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    check_pair(a, b)?;
    let g = PairGeometry::new(&a.coords, &b.coords);
    Ok(orthant_upper(g.inputs()))
}

/// Pr(b | a) = Pr(a, b) / Pr(a), clamped into `[CLAMP_EPS, 1 - CLAMP_EPS]`.
pub fn conditional_prob(b: &EmbeddingVector, a: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    check_pair(a, b)?;
    Ok(conditional_raw(&b.coords, &a.coords))
}

/// Unclamped Pr(b | a); exposed for containment checks.
pub fn conditional_prob_unclamped(
    b: &EmbeddingVector,
    a: &EmbeddingVector,
) -> Result<f64, EmbeddingError> {
    check_pair(a, b)?;
    let g = PairGeometry::new(&a.coords, &b.coords);
    Ok(orthant_conditional(g.inputs()))
}

pub fn entailment_stats(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<EntailmentStats, EmbeddingError> {
    check_pair(a, b)?;
    Ok(stats_raw(&a.coords, &b.coords))
}

/// Pr(concept | encoded object).
pub fn object_score(
    features: &[f64],
    encoder: &ObjectEncoder,
    concept: &EmbeddingVector,
) -> Result<f64, EmbeddingError> {
    let object = encoder.encode(features)?;
    conditional_prob(concept, &object)
}

/// Which forward quantity [`embedding_grads`] differentiates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradTarget {
    /// Pr(a); `b` is ignored.
    Denotational,
    /// Pr(a, b)
    Joint,
    /// Pr(b | a), clamped as in [`conditional_prob`].
    Conditional,
    /// One component of [`entailment_stats`]`(a, b)`: 0 = g1_ab, 1 = g1_ba, 2 = g2.
    Stat(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairGrad {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// `loss_adjoint * d(quantity)/d(a, b)`.
pub fn embedding_grads(
    loss_adjoint: f64,
    a: &EmbeddingVector,
    b: &EmbeddingVector,
    which: GradTarget,
) -> Result<PairGrad, EmbeddingError> {
    check_pair(a, b)?;
    let (a, b) = (&a.coords, &b.coords);
    let mut out = PairGrad { a: vec![0.0; a.len()], b: vec![0.0; b.len()] };
    match which {
        GradTarget::Denotational => {
            let h = norm(a);
            let d = -numerics::pdf(h) * loss_adjoint;
            if h > 0.0 {
                for (o, x) in out.a.iter_mut().zip(a) {
                    *o = d * x / h;
                }
            }
        }
        GradTarget::Joint => {
            let g = PairGeometry::new(a, b);
            let p = orthant_upper_subgrad(g.inputs());
            let s = loss_adjoint;
            g.accumulate(a, b, s * p.dh, s * p.dk, s * p.drho, &mut out.a, &mut out.b);
        }
        GradTarget::Conditional => {
            conditional_backward(b, a, loss_adjoint, &mut out.b, &mut out.a);
        }
        GradTarget::Stat(i) => {
            let mut adj = [0.0; 3];
            adj[i] = loss_adjoint;
            stats_backward(a, b, adj, &mut out.a, &mut out.b);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// slice-level kernels

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
fn squash(p: f64) -> f64 {
    CLAMP_EPS + (1.0 - 2.0 * CLAMP_EPS) * p
}

const SQUASH_SLOPE: f64 = 1.0 - 2.0 * CLAMP_EPS;

/// Norms and cosine of a pair, with the zero-norm convention `rho = 0`.
#[derive(Clone, Copy, Debug)]
pub struct PairGeometry {
    pub ha: f64,
    pub hb: f64,
    pub rho: f64,
}

impl PairGeometry {
    pub fn new(a: &[f64], b: &[f64]) -> Self {
        let ha = norm(a);
        let hb = norm(b);
        let rho = if ha > 0.0 && hb > 0.0 { (dot(a, b) / (ha * hb)).clamp(-1.0, 1.0) } else { 0.0 };
        Self { ha, hb, rho }
    }

    /// `(h, k, rho) = (|a|, |b|, cos)`.
    pub fn inputs(&self) -> OrthantInputs {
        OrthantInputs::unchecked(self.ha, self.hb, self.rho)
    }

    /// `(h, k, rho) = (|b|, |a|, cos)`.
    pub fn inputs_swapped(&self) -> OrthantInputs {
        OrthantInputs::unchecked(self.hb, self.ha, self.rho)
    }

    /// Chain rule from `(d/d|a|, d/d|b|, d/drho)` into the coordinates of the
    /// vectors this geometry was built from:
    /// `d|a|/da = a/|a|`, `drho/da = b/(|a||b|) - rho a/|a|^2`.
    /// Zero-norm vectors receive the zero subgradient.
    #[allow(clippy::too_many_arguments)]
    pub fn accumulate(
        &self,
        a: &[f64],
        b: &[f64],
        d_ha: f64,
        d_hb: f64,
        d_rho: f64,
        ga: &mut [f64],
        gb: &mut [f64],
    ) {
        let (ha, hb, rho) = (self.ha, self.hb, self.rho);
        let both = ha > 0.0 && hb > 0.0;
        if ha > 0.0 {
            let own = d_ha / ha - if both { d_rho * rho / (ha * ha) } else { 0.0 };
            let cross = if both { d_rho / (ha * hb) } else { 0.0 };
            for ((g, x), y) in ga.iter_mut().zip(a).zip(b) {
                *g += own * x + cross * y;
            }
        }
        if hb > 0.0 {
            let own = d_hb / hb - if both { d_rho * rho / (hb * hb) } else { 0.0 };
            let cross = if both { d_rho / (ha * hb) } else { 0.0 };
            for ((g, x), y) in gb.iter_mut().zip(b).zip(a) {
                *g += own * x + cross * y;
            }
        }
    }
}

/// Clamped Pr(b | a).
pub fn conditional_raw(b: &[f64], a: &[f64]) -> f64 {
    let g = PairGeometry::new(a, b);
    squash(orthant_conditional(g.inputs()))
}

/// Accumulates `adjoint * dPr(b|a)` into `gb` and `ga`; returns the clamped value.
pub fn conditional_backward(b: &[f64], a: &[f64], adjoint: f64, gb: &mut [f64], ga: &mut [f64]) -> f64 {
    let g = PairGeometry::new(a, b);
    let inputs = g.inputs();
    let d = orthant_conditional_grad(inputs);
    let s = adjoint * SQUASH_SLOPE;
    g.accumulate(a, b, s * d.dh, s * d.dk, s * d.drho, ga, gb);
    squash(orthant_conditional(inputs))
}

/// Values and `(|a|, |b|, rho)`-Jacobian of the entailment statistics.
struct StatsTape {
    geom: PairGeometry,
    values: [f64; 3],
    /// jac[stat] = [d/d|a|, d/d|b|, d/drho]
    jac: [[f64; 3]; 3],
}

/// Whether `a` plays the conditioning role in `g2`; depends only on the
/// unordered pair so that `g2(a, b)` and `g2(b, a)` run identical arithmetic.
fn a_is_larger(a: &[f64], b: &[f64], ha: f64, hb: f64) -> bool {
    if ha != hb {
        return ha > hb;
    }
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x > y;
        }
    }
    true
}

fn stats_tape(a: &[f64], b: &[f64], with_grad: bool) -> StatsTape {
    let geom = PairGeometry::new(a, b);
    // Pr(a | b): condition on b
    let c_ab = orthant_conditional(geom.inputs_swapped());
    // Pr(b | a): condition on a
    let c_ba = orthant_conditional(geom.inputs());
    let q_ab = squash(c_ab);
    let q_ba = squash(c_ba);
    let a_large = a_is_larger(a, b, geom.ha, geom.hb);
    // g2 = ln Pr(small | large) - ln Pr(small)
    let (q_sl, h_small) = if a_large { (q_ba, geom.hb) } else { (q_ab, geom.ha) };
    let d_small = squash(numerics::sf(h_small));
    let values = [logit(q_ab), logit(q_ba), q_sl.ln() - d_small.ln()];

    let mut jac = [[0.0; 3]; 3];
    if with_grad {
        let gab = orthant_conditional_grad(geom.inputs_swapped());
        let gba = orthant_conditional_grad(geom.inputs());
        let l_ab = SQUASH_SLOPE / (q_ab * (1.0 - q_ab));
        let l_ba = SQUASH_SLOPE / (q_ba * (1.0 - q_ba));
        // inputs_swapped has h = |b|, k = |a|
        jac[0] = [l_ab * gab.dk, l_ab * gab.dh, l_ab * gab.drho];
        jac[1] = [l_ba * gba.dh, l_ba * gba.dk, l_ba * gba.drho];
        let d_small_dh = SQUASH_SLOPE * numerics::pdf(h_small) / d_small;
        jac[2] = if a_large {
            let l = SQUASH_SLOPE / q_ba;
            [l * gba.dh, l * gba.dk + d_small_dh, l * gba.drho]
        } else {
            let l = SQUASH_SLOPE / q_ab;
            [l * gab.dk + d_small_dh, l * gab.dh, l * gab.drho]
        };
    }
    StatsTape { geom, values, jac }
}

pub fn stats_raw(a: &[f64], b: &[f64]) -> EntailmentStats {
    let t = stats_tape(a, b, false);
    EntailmentStats { g1_ab: t.values[0], g1_ba: t.values[1], g2: t.values[2] }
}

/// Accumulates `sum_i adjoint[i] * d(stat_i)` into `ga`, `gb`; returns the stats.
pub fn stats_backward(a: &[f64], b: &[f64], adjoint: [f64; 3], ga: &mut [f64], gb: &mut [f64]) -> EntailmentStats {
    let t = stats_tape(a, b, true);
    let mut d = [0.0; 3];
    for (adj, row) in adjoint.iter().zip(&t.jac) {
        for (dv, j) in d.iter_mut().zip(row) {
            *dv += adj * j;
        }
    }
    t.geom.accumulate(a, b, d[0], d[1], d[2], ga, gb);
    EntailmentStats { g1_ab: t.values[0], g1_ba: t.values[1], g2: t.values[2] }
}

#[inline]
fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
