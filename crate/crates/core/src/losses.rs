//! Training objectives and their analytic gradients.
//!
//! Pairwise and set-wise ranking losses (BPR, sampled softmax) score raw
//! embeddings. Alignment, uniformity and the stable-rank regularizer act on
//! row-normalized embeddings; their gradients are chained back through the
//! normalization map `x ↦ x/‖x‖`, whose Jacobian is `(I − x̂x̂ᵀ)/‖x‖`. The
//! stored parameters are never normalized in place.
//!
//! Every loss is a mean over the batch, so its scale does not depend on the
//! batch size. Gradients are returned only for rows the batch touches.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{PairBatch, SetBatch, TripletBatch};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, sq_dist, top_singular_default, DenseMatrix, SpectralSummary};
use crate::model::{normalized_rows, EmbeddingModel};

/// Training objective and its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum LossSpec {
    Bpr,
    Ssm { k: usize },
    DirectAu { gamma: f64 },
    AlignOnly,
    /// Alignment minus `gamma_sr` times the stable-rank regularizer of the
    /// batch's user and item rows.
    WarmStart { gamma_sr: f64 },
}

/// Negatives per example for SSM when none is given.
pub const DEFAULT_SSM_K: usize = 20;
/// Weight of the stable-rank regularizer when none is given.
pub const DEFAULT_GAMMA_SR: f64 = 0.1;
/// Uniformity weight for DirectAU when none is given.
pub const DEFAULT_DIRECTAU_GAMMA: f64 = 0.15;

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::Ssm { k } if k == 0 => Err(Error::Config("SSM needs k >= 1".into())),
            LossSpec::DirectAu { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::Config(format!("DirectAU gamma must be > 0, got {gamma}")))
            }
            LossSpec::WarmStart { gamma_sr } if !(gamma_sr > 0.0 && gamma_sr.is_finite()) => {
                Err(Error::Config(format!("gamma_sr must be > 0, got {gamma_sr}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Bpr => "bpr",
            LossSpec::Ssm { .. } => "ssm",
            LossSpec::DirectAu { .. } => "directau",
            LossSpec::AlignOnly => "align",
            LossSpec::WarmStart { .. } => "warmstart",
        }
    }

    /// Whether the loss consumes sampled negatives rather than observed pairs alone.
    pub fn needs_negatives(&self) -> bool {
        matches!(self, LossSpec::Bpr | LossSpec::Ssm { .. })
    }
}

/// Individually logged loss terms; `None` when a term is not part of the
/// objective or was skipped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub align: Option<f64>,
    pub uniform_user: Option<f64>,
    pub uniform_item: Option<f64>,
    pub srank_user: Option<f64>,
    pub srank_item: Option<f64>,
    pub rank_margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub components: LossComponents,
    /// A term was skipped because the batch could not support it (for
    /// example uniformity over a single distinct row), or a zero row was seen.
    pub degenerate: bool,
}

impl LossValue {
    /// Total recomputed from the logged components under `spec`'s weights.
    pub fn recompose(&self, spec: &LossSpec) -> f64 {
        let c = &self.components;
        let z = |x: Option<f64>| x.unwrap_or(0.0);
        match *spec {
            LossSpec::Bpr | LossSpec::Ssm { .. } => z(c.rank_margin),
            LossSpec::AlignOnly => z(c.align),
            LossSpec::DirectAu { gamma } => z(c.align) + gamma * (z(c.uniform_user) + z(c.uniform_item)),
            LossSpec::WarmStart { gamma_sr } => z(c.align) - gamma_sr * (z(c.srank_user) + z(c.srank_item)),
        }
    }
}

/// Gradient rows keyed by table row index, kept in first-touched order so
/// that iteration (and hence every update) is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct RowGrads {
    dim: usize,
    slots: HashMap<usize, usize>,
    rows: Vec<usize>,
    data: Vec<f64>,
}

impl RowGrads {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            slots: HashMap::new(),
            rows: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn slot(&mut self, row: usize) -> &mut [f64] {
        let dim = self.dim;
        let next = self.rows.len();
        let s = *self.slots.entry(row).or_insert_with(|| next);
        if s == next {
            self.rows.push(row);
            self.data.resize(self.data.len() + dim, 0.0);
        }
        &mut self.data[s * dim..(s + 1) * dim]
    }

    /// `grad[row] += alpha * v`
    pub fn add(&mut self, row: usize, alpha: f64, v: &[f64]) {
        axpy(alpha, v, self.slot(row));
    }

    pub fn get(&self, row: usize) -> Option<&[f64]> {
        self.slots
            .get(&row)
            .map(|&s| &self.data[s * self.dim..(s + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows
            .iter()
            .copied()
            .zip(self.data.chunks_exact(self.dim.max(1)))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn merge(&mut self, other: &RowGrads, alpha: f64) {
        for (r, g) in other.iter() {
            self.add(r, alpha, g);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Dense `n × dim` view with untouched rows zero.
    pub fn to_dense(&self, n: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(n, self.dim);
        for (r, g) in self.iter() {
            out.row_mut(r).copy_from_slice(g);
        }
        out
    }

    fn scatter(dim: usize, rows: &[usize], grad: &DenseMatrix, alpha: f64) -> Self {
        let mut out = Self::new(dim);
        for (k, &r) in rows.iter().enumerate() {
            out.add(r, alpha, grad.row(k));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub users: RowGrads,
    pub items: RowGrads,
}

impl Gradients {
    pub fn new(dim: usize) -> Self {
        Self {
            users: RowGrads::new(dim),
            items: RowGrads::new(dim),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.users.is_finite() && self.items.is_finite()
    }
}

/// A batch in whichever shape the objective consumes.
#[derive(Debug, Clone)]
pub enum Batch {
    Triplets(TripletBatch),
    Sets(SetBatch),
    Pairs(PairBatch),
}

/// Dispatches to the matching loss.
pub fn loss_grad(spec: &LossSpec, model: &EmbeddingModel, batch: &Batch) -> Result<(LossValue, Gradients)> {
    match (spec, batch) {
        (LossSpec::Bpr, Batch::Triplets(b)) => bpr_loss_grad(model, b),
        (LossSpec::Ssm { .. }, Batch::Sets(b)) => ssm_loss_grad(model, b),
        (LossSpec::AlignOnly, Batch::Pairs(b)) => align_loss_grad(model, b),
        (LossSpec::DirectAu { gamma }, Batch::Pairs(b)) => directau_loss_grad(model, b, *gamma),
        (LossSpec::WarmStart { gamma_sr }, Batch::Pairs(b)) => warmstart_loss_grad(model, b, *gamma_sr),
        (spec, _) => Err(Error::Config(format!("batch shape does not match loss '{}'", spec.name()))),
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean of `−ln σ(ê_{u,i} − ê_{u,i′})` over the triplets.
pub fn bpr_loss_grad(model: &EmbeddingModel, batch: &TripletBatch) -> Result<(LossValue, Gradients)> {
    if batch.is_empty() {
        return Err(Error::DegenerateBatch("empty triplet batch"));
    }
    let d = model.dim();
    let scale = 1.0 / batch.len() as f64;
    let mut grads = Gradients::new(d);
    let mut total = 0.0;
    let mut diff = vec![0.0; d];
    for ((&u, &i), &j) in batch.users.iter().zip(&batch.pos_items).zip(&batch.neg_items) {
        let (ur, ir, jr) = (model.users.row(u), model.items.row(i), model.items.row(j));
        let margin = dot(ur, ir) - dot(ur, jr);
        total += softplus(-margin);
        // d/dmargin of −ln σ(margin) is −σ(−margin).
        let c = -sigmoid(-margin) * scale;
        for ((dk, a), b) in diff.iter_mut().zip(ir).zip(jr) {
            *dk = a - b;
        }
        grads.users.add(u, c, &diff);
        grads.items.add(i, c, ur);
        grads.items.add(j, -c, ur);
    }
    let total = total * scale;
    Ok((
        LossValue {
            total,
            components: LossComponents {
                rank_margin: Some(total),
                ..Default::default()
            },
            degenerate: false,
        },
        grads,
    ))
}

/// Mean over examples of `−log softmax` of the positive score against its
/// `k` sampled negatives.
pub fn ssm_loss_grad(model: &EmbeddingModel, batch: &SetBatch) -> Result<(LossValue, Gradients)> {
    if batch.is_empty() {
        return Err(Error::DegenerateBatch("empty set batch"));
    }
    let k = batch.k();
    if k == 0 || batch.neg_items.iter().any(|l| l.len() != k) {
        return Err(Error::DegenerateBatch("negative lists must all have the same length k >= 1"));
    }
    let d = model.dim();
    let scale = 1.0 / batch.len() as f64;
    let mut grads = Gradients::new(d);
    let mut total = 0.0;
    let mut scores = vec![0.0; k + 1];
    let mut gu = vec![0.0; d];
    for ((&u, &i), negs) in batch.users.iter().zip(&batch.pos_items).zip(&batch.neg_items) {
        let ur = model.users.row(u);
        scores[0] = dot(ur, model.items.row(i));
        for (s, &j) in scores[1..].iter_mut().zip(negs) {
            *s = dot(ur, model.items.row(j));
        }
        let mx = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - mx).exp()).sum();
        let lse = mx + z.ln();
        total += lse - scores[0];

        gu.iter_mut().for_each(|x| *x = 0.0);
        let p0 = (scores[0] - lse).exp();
        axpy((p0 - 1.0) * scale, model.items.row(i), &mut gu);
        grads.items.add(i, (p0 - 1.0) * scale, ur);
        for (s, &j) in scores[1..].iter().zip(negs) {
            let p = (s - lse).exp();
            axpy(p * scale, model.items.row(j), &mut gu);
            grads.items.add(j, p * scale, ur);
        }
        grads.users.add(u, 1.0, &gu);
    }
    let total = total * scale;
    Ok((
        LossValue {
            total,
            components: LossComponents {
                rank_margin: Some(total),
                ..Default::default()
            },
            degenerate: false,
        },
        grads,
    ))
}

/// Pulls a gradient taken w.r.t. a unit row `x̂ = x/‖x‖` back to `x`.
/// Zero rows receive zero gradient.
fn through_normalization(g: &mut [f64], unit: &[f64], raw_norm: f64) {
    if raw_norm == 0.0 {
        g.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let along = dot(unit, g);
    for (gk, &xk) in g.iter_mut().zip(unit) {
        *gk = (*gk - along * xk) / raw_norm;
    }
}

fn unit(row: &[f64]) -> (Vec<f64>, f64) {
    let n = norm(row);
    if n == 0.0 {
        (vec![0.0; row.len()], 0.0)
    } else {
        (row.iter().map(|x| x / n).collect(), n)
    }
}

/// Mean of `‖û − î‖²` over observed pairs, on row-normalized embeddings.
pub fn align_loss_grad(model: &EmbeddingModel, batch: &PairBatch) -> Result<(LossValue, Gradients)> {
    if batch.is_empty() {
        return Err(Error::DegenerateBatch("empty pair batch"));
    }
    let d = model.dim();
    let scale = 1.0 / batch.len() as f64;
    let mut grads = Gradients::new(d);
    let mut total = 0.0;
    let mut degenerate = false;
    let mut g = vec![0.0; d];
    for (&u, &i) in batch.users.iter().zip(&batch.items) {
        let (uh, un) = unit(model.users.row(u));
        let (ih, inn) = unit(model.items.row(i));
        degenerate |= un == 0.0 || inn == 0.0;
        total += sq_dist(&uh, &ih);

        for ((gk, a), b) in g.iter_mut().zip(&uh).zip(&ih) {
            *gk = 2.0 * (a - b) * scale;
        }
        through_normalization(&mut g, &uh, un);
        grads.users.add(u, 1.0, &g);

        for ((gk, a), b) in g.iter_mut().zip(&uh).zip(&ih) {
            *gk = 2.0 * (b - a) * scale;
        }
        through_normalization(&mut g, &ih, inn);
        grads.items.add(i, 1.0, &g);
    }
    let total = total * scale;
    Ok((
        LossValue {
            total,
            components: LossComponents {
                align: Some(total),
                ..Default::default()
            },
            degenerate,
        },
        grads,
    ))
}

/// Value and gradient (w.r.t. the raw rows) of one table-level term.
#[derive(Debug, Clone)]
pub struct TableTerm {
    pub value: f64,
    pub grad: DenseMatrix,
    /// A zero row was present; it contributes nothing and receives zero gradient.
    pub degenerate: bool,
}

/// `log Σ_{j<j′} exp(−2‖x̂_j − x̂_j′‖²)` over all unordered pairs of distinct
/// rows, on row-normalized rows.
pub fn uniform_loss_grad(table: &DenseMatrix) -> Result<TableTerm> {
    if table.rows() < 2 {
        return Err(Error::DegenerateBatch("uniformity needs at least two rows"));
    }
    let nr = normalized_rows(table);
    let x = &nr.table;
    let n = x.rows();
    let d = x.cols();

    // Each row's partial sum and unnormalized gradient, computed
    // independently so the result does not depend on thread scheduling.
    let per_row: Vec<(f64, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let xj = x.row(j);
            let mut s = 0.0;
            let mut g = vec![0.0; d];
            for jp in 0..n {
                if jp == j {
                    continue;
                }
                let xp = x.row(jp);
                let w = (-2.0 * sq_dist(xj, xp)).exp();
                s += w;
                for ((gk, a), b) in g.iter_mut().zip(xj).zip(xp) {
                    *gk += -4.0 * w * (a - b);
                }
            }
            (s, g)
        })
        .collect();

    let z = 0.5 * per_row.iter().map(|(s, _)| s).sum::<f64>();
    let mut grad = DenseMatrix::zeros(n, d);
    for (j, (_, g)) in per_row.into_iter().enumerate() {
        let out = grad.row_mut(j);
        for (o, gk) in out.iter_mut().zip(&g) {
            *o = gk / z;
        }
        through_normalization(out, x.row(j), nr.norms[j]);
    }
    Ok(TableTerm {
        value: z.ln(),
        grad,
        degenerate: nr.degenerate,
    })
}

/// Gradient of the stable rank `‖A‖_F²/σ₁²` of an unnormalized matrix:
/// `2(A − srank(A)·σ₁ψ₁ω₁ᵀ)/σ₁²`.
pub fn stable_rank_grad_raw(a: &DenseMatrix) -> Result<(SpectralSummary, DenseMatrix)> {
    let s = top_singular_default(a)?;
    let grad = stable_rank_grad_from(a, &s);
    Ok((s, grad))
}

fn stable_rank_grad_from(a: &DenseMatrix, s: &SpectralSummary) -> DenseMatrix {
    let sig2 = s.sigma1 * s.sigma1;
    let mut grad = a.clone();
    for i in 0..a.rows() {
        let c = s.stable_rank * s.sigma1 * s.left_vec[i];
        let r = grad.row_mut(i);
        for (rk, &wk) in r.iter_mut().zip(&s.right_vec) {
            *rk = 2.0 * (*rk - c * wk) / sig2;
        }
    }
    grad
}

/// Stable-rank regularizer `‖Â‖_F² / (‖Â‖₂² · max(rows, cols))` of the
/// row-normalized table. The value lies in (0, 1]. Training maximizes it,
/// so callers weight it by `−γ_sr`.
///
/// When σ₁ is (nearly) tied with σ₂ the power-iteration triple is used as is
/// and the returned gradient is a subgradient.
pub fn srank_reg_loss_grad(table: &DenseMatrix) -> Result<TableTerm> {
    let nr = normalized_rows(table);
    let (s, mut grad) = stable_rank_grad_raw(&nr.table)?;
    let max_dim = table.rows().max(table.cols()) as f64;
    for j in 0..grad.rows() {
        let r = grad.row_mut(j);
        r.iter_mut().for_each(|x| *x /= max_dim);
        through_normalization(r, nr.table.row(j), nr.norms[j]);
    }
    Ok(TableTerm {
        value: s.stable_rank / max_dim,
        grad,
        degenerate: nr.degenerate,
    })
}

/// Distinct indices in first-seen order.
fn distinct(idx: &[usize]) -> Vec<usize> {
    let mut seen = std::collections::HashSet::new();
    idx.iter().copied().filter(|i| seen.insert(*i)).collect()
}

/// Alignment plus `gamma` times the uniformity of the batch's distinct users
/// and distinct items. A side with fewer than two distinct rows has its
/// uniformity term skipped and the result flagged degenerate.
pub fn directau_loss_grad(model: &EmbeddingModel, batch: &PairBatch, gamma: f64) -> Result<(LossValue, Gradients)> {
    let (mut value, mut grads) = align_loss_grad(model, batch)?;
    if gamma == 0.0 {
        return Ok((value, grads));
    }
    let d = model.dim();
    let mut total = value.total;
    for (is_user, rows) in [(true, distinct(&batch.users)), (false, distinct(&batch.items))] {
        if rows.len() < 2 {
            value.degenerate = true;
            continue;
        }
        let table = if is_user { &model.users } else { &model.items };
        let term = uniform_loss_grad(&table.select_rows(&rows))?;
        value.degenerate |= term.degenerate;
        total += gamma * term.value;
        let g = RowGrads::scatter(d, &rows, &term.grad, gamma);
        if is_user {
            value.components.uniform_user = Some(term.value);
            grads.users.merge(&g, 1.0);
        } else {
            value.components.uniform_item = Some(term.value);
            grads.items.merge(&g, 1.0);
        }
    }
    value.total = total;
    Ok((value, grads))
}

/// Alignment minus `gamma_sr` times the stable-rank regularizer of the
/// batch's distinct user rows and distinct item rows.
pub fn warmstart_loss_grad(model: &EmbeddingModel, batch: &PairBatch, gamma_sr: f64) -> Result<(LossValue, Gradients)> {
    let (mut value, mut grads) = align_loss_grad(model, batch)?;
    if gamma_sr == 0.0 {
        return Ok((value, grads));
    }
    let d = model.dim();
    let mut total = value.total;
    for (is_user, rows) in [(true, distinct(&batch.users)), (false, distinct(&batch.items))] {
        let table = if is_user { &model.users } else { &model.items };
        let term = srank_reg_loss_grad(&table.select_rows(&rows))?;
        value.degenerate |= term.degenerate;
        total -= gamma_sr * term.value;
        let g = RowGrads::scatter(d, &rows, &term.grad, -gamma_sr);
        if is_user {
            value.components.srank_user = Some(term.value);
            grads.users.merge(&g, 1.0);
        } else {
            value.components.srank_item = Some(term.value);
            grads.items.merge(&g, 1.0);
        }
    }
    value.total = total;
    Ok((value, grads))
}

/// Per-row gradients of the uniformity and stable-rank objectives and the
/// angle between them.
///
/// Rows are used as given and are expected to be unit length. For row `u`:
///
/// - uniformity: `−4 Σ_{u′} w (u − u′) / Σ_{u′} w`, with `w = exp(−2‖u − u′‖²)`
/// - stable rank: `2(σ₁² u − ‖U‖_F² σ₁ ψ₁[u] ω₁) / σ₁⁴`
///
/// and the angle compares the uniformity gradient with the *negated*
/// stable-rank gradient, since stable rank is maximized.
pub struct GradientGeometry<'a> {
    table: &'a DenseMatrix,
    spectral: SpectralSummary,
}

impl<'a> GradientGeometry<'a> {
    pub fn new(table: &'a DenseMatrix) -> Result<Self> {
        if table.rows() < 2 {
            return Err(Error::DegenerateBatch("gradient geometry needs at least two rows"));
        }
        let spectral = top_singular_default(table)?;
        Ok(Self { table, spectral })
    }

    pub fn spectral(&self) -> &SpectralSummary {
        &self.spectral
    }

    fn check(&self, u: usize) -> Result<()> {
        if u >= self.table.rows() {
            return Err(Error::Index { what: "users", index: u, len: self.table.rows() });
        }
        Ok(())
    }

    pub fn uniformity_grad(&self, u: usize) -> Result<Vec<f64>> {
        self.check(u)?;
        let x = self.table.row(u);
        let mut g = vec![0.0; x.len()];
        let mut s = 0.0;
        for (j, y) in self.table.row_iter().enumerate() {
            if j == u {
                continue;
            }
            let w = (-2.0 * sq_dist(x, y)).exp();
            s += w;
            for ((gk, a), b) in g.iter_mut().zip(x).zip(y) {
                *gk += -4.0 * w * (a - b);
            }
        }
        g.iter_mut().for_each(|v| *v /= s);
        Ok(g)
    }

    pub fn srank_grad(&self, u: usize) -> Result<Vec<f64>> {
        self.check(u)?;
        let sp = &self.spectral;
        let s2 = sp.sigma1 * sp.sigma1;
        let c = sp.frob_sq * sp.sigma1 * sp.left_vec[u];
        Ok(self
            .table
            .row(u)
            .iter()
            .zip(&sp.right_vec)
            .map(|(&x, &w)| 2.0 * (s2 * x - c * w) / (s2 * s2))
            .collect())
    }

    /// Angle ρ in degrees between the uniformity gradient and the negated
    /// stable-rank gradient of row `u`.
    pub fn angle(&self, u: usize) -> Result<f64> {
        let gu = self.uniformity_grad(u)?;
        let gs = self.srank_grad(u)?;
        let row_norm = norm(self.table.row(u));
        let s2 = self.spectral.sigma1 * self.spectral.sigma1;
        // Thresholds sit far below each gradient's natural scale; anything
        // smaller is cancellation noise.
        let (nu, ns) = (norm(&gu), norm(&gs));
        if !(nu > 1e-12 * 4.0 * row_norm) {
            return Err(Error::UndefinedAngle("uniformity"));
        }
        if !(ns > 1e-12 * 2.0 * row_norm / s2) {
            return Err(Error::UndefinedAngle("stable-rank"));
        }
        let cos = -dot(&gu, &gs) / (nu * ns);
        Ok(cos.clamp(-1.0, 1.0).acos().to_degrees())
    }
}

pub fn uniformity_gradient_per_user(table: &DenseMatrix, u: usize) -> Result<Vec<f64>> {
    GradientGeometry::new(table)?.uniformity_grad(u)
}

pub fn srank_gradient_per_user(table: &DenseMatrix, u: usize) -> Result<Vec<f64>> {
    GradientGeometry::new(table)?.srank_grad(u)
}

pub fn gradient_angle(table: &DenseMatrix, u: usize) -> Result<f64> {
    GradientGeometry::new(table)?.angle(u)
}
