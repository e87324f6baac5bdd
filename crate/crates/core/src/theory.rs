//! Numerical experiments on the spectral dynamics of alignment and
//! uniformity: rank collapse under alignment, stable-rank recovery under
//! uniformity, the angle between uniformity and stable-rank gradients, a
//! three-vector toy on the circle, and the Eckart–Young truncation identity.
//!
//! Every experiment is deterministic given its seed and produces a trace
//! that serializes to CSV, one row per step starting at step 0.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, pairwise_dists, sq_dist, svd_oracle, top_singular_default, DenseMatrix};
use crate::losses::{srank_reg_loss_grad, uniform_loss_grad};

/// Per-step records of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsTrace<R> {
    pub records: Vec<R>,
}

impl<R: Serialize> DynamicsTrace<R> {
    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        out.flush().map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn random_normal_vec(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Top two singular values from the dense oracle (second is 0 for rank ≤ 1).
fn top_two(a: &DenseMatrix) -> Result<(f64, f64)> {
    let s = svd_oracle(a)?.singular_values;
    Ok((s.first().copied().unwrap_or(0.0), s.get(1).copied().unwrap_or(0.0)))
}

fn normalize_rows_in_place(t: &mut DenseMatrix) {
    for i in 0..t.rows() {
        let r = t.row_mut(i);
        let n = norm(r);
        if n > 0.0 {
            r.iter_mut().for_each(|x| *x /= n);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentStep {
    pub step: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub stable_rank: f64,
    /// `(σ₁⁽⁰⁾/σ₂⁽⁰⁾) / (σ₁⁽ᵗ⁾/σ₂⁽ᵗ⁾)` measured on the iterate.
    pub delta_ali: f64,
    /// The same ratio as predicted from `σ₁⁽⁰⁾`, `r`, `‖i‖` and `η`.
    pub delta_ali_predicted: f64,
    /// Max-abs gap between the iterate and the closed-form solution.
    pub closed_form_gap: f64,
}

/// Gradient descent of `r` unnormalized user rows toward a single item
/// vector `i` under `Σ_j ‖u_j − i‖²`, i.e. `u ← u − 2η(u − i)`.
///
/// Rows and `i` are standard normal. Alongside the iterate the trace carries
/// the closed form `U⁽ᵗ⁾ = qᵗU⁽⁰⁾ + (1 − qᵗ)·1iᵀ` with `q = 1 − 2η` and the
/// predicted ratio `σ₁⁽⁰⁾qᵗ / ((1 − qᵗ)√r‖i‖ + σ₁⁽⁰⁾qᵗ)`.
///
/// `η = 1/2` is accepted: the rows land on `i` after one step.
pub fn simulate_alignment_collapse(
    r: usize,
    d: usize,
    eta: f64,
    steps: usize,
    seed: u64,
) -> Result<DynamicsTrace<AlignmentStep>> {
    if !(eta > 0.0 && eta <= 0.5) {
        return Err(Error::Config(format!("alignment step size must satisfy 0 < eta <= 0.5, got {eta}")));
    }
    if r < 2 || d < 2 {
        return Err(Error::Config(format!("need at least 2 rows and 2 columns, got {r}x{d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u0 = DenseMatrix::random_normal(r, d, &mut rng);
    let item = random_normal_vec(d, &mut rng);
    let item_norm = norm(&item);
    let q = 1.0 - 2.0 * eta;

    let mut u = u0.clone();
    let (s1_0, s2_0) = top_two(&u0)?;
    let mut records = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        if t > 0 {
            for j in 0..r {
                for (x, &it) in u.row_mut(j).iter_mut().zip(&item) {
                    *x -= 2.0 * eta * (*x - it);
                }
            }
        }
        let qt = q.powi(t as i32);
        let mut closed = u0.scaled(qt);
        for j in 0..r {
            for (x, &it) in closed.row_mut(j).iter_mut().zip(&item) {
                *x += (1.0 - qt) * it;
            }
        }
        let (s1, s2) = top_two(&u)?;
        records.push(AlignmentStep {
            step: t,
            sigma1: s1,
            sigma2: s2,
            stable_rank: u.as_slice().iter().map(|x| x * x).sum::<f64>() / (s1 * s1),
            delta_ali: (s1_0 * s2) / (s2_0 * s1),
            delta_ali_predicted: s1_0 * qt / ((1.0 - qt) * (r as f64).sqrt() * item_norm + s1_0 * qt),
            closed_form_gap: u.max_abs_diff(&closed),
        });
    }
    Ok(DynamicsTrace { records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityStep {
    pub step: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub stable_rank: f64,
    pub loss_uniform: f64,
    /// `σ₁/σ₂` of the embedding matrix.
    pub kappa_u: f64,
    /// Top two singular values of the Euclidean pairwise-distance matrix.
    pub sigma1_du: f64,
    pub sigma2_du: f64,
    pub kappa_du: f64,
    /// `σ₁/σ₂` of the L1 pairwise-distance matrix.
    pub kappa_du_l1: f64,
    /// Measured `(σ₁⁽ᵗ⁾/σ₂⁽ᵗ⁾)/(σ₁⁽ᵗ⁺¹⁾/σ₂⁽ᵗ⁺¹⁾)`; empty on the last step.
    pub delta_uni: Option<f64>,
    /// Predicted ratio with `α = 4ηe⁻⁴√(rd)`.
    pub delta_uni_predicted_rd: f64,
    /// Predicted ratio with `α = 4ηe⁻⁴√(nd)`; `n = r` here, so the two agree.
    pub delta_uni_predicted_nd: f64,
}

/// Step size for uniformity recovery; larger steps overshoot and the stable
/// rank stops increasing monotonically.
pub const DEFAULT_UNIFORM_ETA: f64 = 0.1;

/// Rows `(cos(θ + jε), sin(θ + jε), 0, …)` for `j = 0..r`.
pub fn angular_grid(r: usize, d: usize, theta: f64, epsilon: f64) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(r, d);
    for j in 0..r {
        let a = theta + j as f64 * epsilon;
        m.set(j, 0, a.cos());
        m.set(j, 1, a.sin());
    }
    m
}

fn l1_dists(a: &DenseMatrix) -> DenseMatrix {
    let n = a.rows();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d: f64 = a.row(i).iter().zip(a.row(j)).map(|(x, y)| (x - y).abs()).sum();
            out.set(i, j, d);
        }
    }
    out
}

/// Gradient descent on the uniformity loss from the rank-2 angular grid,
/// renormalizing rows after every step. `θ` is drawn from the seed.
pub fn simulate_uniformity_recovery(
    r: usize,
    d: usize,
    epsilon: f64,
    eta: f64,
    steps: usize,
    seed: u64,
) -> Result<DynamicsTrace<UniformityStep>> {
    if !(0.0..=0.1).contains(&epsilon) {
        return Err(Error::Config(format!("epsilon must lie in [0, 0.1] rad, got {epsilon}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!("step size must be > 0, got {eta}")));
    }
    if r < 2 || d < 2 {
        return Err(Error::Config(format!("need at least 2 rows and 2 columns, got {r}x{d}")));
    }
    let theta = ChaCha8Rng::seed_from_u64(seed).random::<f64>() * 2.0 * PI;
    let mut u = angular_grid(r, d, theta, epsilon);
    let alpha_rd = eta * 4.0 * (-4.0f64).exp() * ((r * d) as f64).sqrt();
    let alpha_nd = alpha_rd;

    let mut records: Vec<UniformityStep> = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        let (s1, s2) = top_two(&u)?;
        let (sd1, sd2) = top_two(&pairwise_dists(&u))?;
        let (sl1, sl2) = top_two(&l1_dists(&u))?;
        let term = uniform_loss_grad(&u)?;
        let predicted = |alpha: f64| s1 * (alpha * sd2 + s1) / (s2 * (alpha * sd1 + s1));
        if let Some(prev) = records.last_mut() {
            prev.delta_uni = Some(prev.kappa_u / (s1 / s2));
        }
        records.push(UniformityStep {
            step: t,
            sigma1: s1,
            sigma2: s2,
            stable_rank: u.as_slice().iter().map(|x| x * x).sum::<f64>() / (s1 * s1),
            loss_uniform: term.value,
            kappa_u: s1 / s2,
            sigma1_du: sd1,
            sigma2_du: sd2,
            kappa_du: sd1 / sd2,
            kappa_du_l1: sl1 / sl2,
            delta_uni: None,
            delta_uni_predicted_rd: predicted(alpha_rd),
            delta_uni_predicted_nd: predicted(alpha_nd),
        });
        if t < steps {
            for (x, g) in u.as_mut_slice().iter_mut().zip(term.grad.as_slice()) {
                *x -= eta * g;
            }
            normalize_rows_in_place(&mut u);
        }
    }
    Ok(DynamicsTrace { records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleStep {
    pub step: usize,
    /// Mean over users of the angle between the uniformity gradient and the
    /// negated stable-rank gradient, in degrees.
    pub mean_rho: f64,
    pub std_rho: f64,
    /// Users whose angle was undefined (a zero gradient) and were skipped.
    pub undefined: usize,
    pub stable_rank: f64,
    pub loss_uniform: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleConfig {
    pub n: usize,
    pub d: usize,
    /// Bound on the pairwise angle of the initial cluster, in degrees.
    pub theta_deg: f64,
    pub steps: usize,
    pub eta: f64,
    pub seed: u64,
}

impl Default for AngleConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            d: 32,
            theta_deg: 1.0,
            steps: 150,
            eta: 0.05,
            seed: 0,
        }
    }
}

/// `n` unit vectors whose pairwise angles are at most `theta_deg`: each is
/// a random center tilted by at most `theta_deg / 2` toward a random
/// orthogonal direction.
pub fn angular_cluster(n: usize, d: usize, theta_deg: f64, rng: &mut impl Rng) -> DenseMatrix {
    let mut center = random_normal_vec(d, rng);
    let cn = norm(&center);
    center.iter_mut().for_each(|x| *x /= cn);
    let half = theta_deg.to_radians() / 2.0;
    let mut out = DenseMatrix::zeros(n, d);
    for i in 0..n {
        let mut t = random_normal_vec(d, rng);
        let along = dot(&t, &center);
        t.iter_mut().zip(&center).for_each(|(x, c)| *x -= along * c);
        let tn = norm(&t);
        t.iter_mut().for_each(|x| *x /= tn);
        let phi = half * rng.random::<f64>();
        for ((o, c), tk) in out.row_mut(i).iter_mut().zip(&center).zip(&t) {
            *o = phi.cos() * c + phi.sin() * tk;
        }
    }
    out
}

/// Per-row uniformity gradients `−4 Σ w (u − u′) / Σ w` and the per-row
/// partial sums `Σ w`.
fn per_user_uniformity(u: &DenseMatrix) -> Vec<(Vec<f64>, f64)> {
    (0..u.rows())
        .into_par_iter()
        .map(|j| {
            let x = u.row(j);
            let mut g = vec![0.0; x.len()];
            let mut s = 0.0;
            for (k, y) in u.row_iter().enumerate() {
                if k == j {
                    continue;
                }
                let w = (-2.0 * sq_dist(x, y)).exp();
                s += w;
                for ((gk, a), b) in g.iter_mut().zip(x).zip(y) {
                    *gk += -4.0 * w * (a - b);
                }
            }
            g.iter_mut().for_each(|v| *v /= s);
            (g, s)
        })
        .collect()
}

/// Starting from a tight angular cluster, descends each user's uniformity
/// gradient (with renormalization) and records the per-user angle between
/// that gradient and the negated stable-rank gradient at every step.
pub fn gradient_angle_experiment(cfg: &AngleConfig) -> Result<DynamicsTrace<AngleStep>> {
    if cfg.n < 2 || cfg.d < 2 {
        return Err(Error::Config(format!("need at least 2 users and 2 dimensions, got {}x{}", cfg.n, cfg.d)));
    }
    if !(cfg.theta_deg > 0.0 && cfg.theta_deg < 180.0) || !(cfg.eta > 0.0 && cfg.eta.is_finite()) {
        return Err(Error::Config("theta must lie in (0, 180) degrees and eta must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut u = angular_cluster(cfg.n, cfg.d, cfg.theta_deg, &mut rng);
    let mut records = Vec::with_capacity(cfg.steps + 1);
    for t in 0..=cfg.steps {
        let uni = per_user_uniformity(&u);
        let sp = top_singular_default(&u)?;
        let s2 = sp.sigma1 * sp.sigma1;
        let rhos: Vec<Option<f64>> = (0..cfg.n)
            .into_par_iter()
            .map(|j| {
                let row = u.row(j);
                let c = sp.frob_sq * sp.sigma1 * sp.left_vec[j];
                let neg_srank: Vec<f64> = row
                    .iter()
                    .zip(&sp.right_vec)
                    .map(|(&x, &w)| -2.0 * (s2 * x - c * w) / (s2 * s2))
                    .collect();
                let gu = &uni[j].0;
                let (nu, ns) = (norm(gu), norm(&neg_srank));
                let rn = norm(row);
                if !(nu > 1e-12 * 4.0 * rn) || !(ns > 1e-12 * 2.0 * rn / s2) {
                    return None;
                }
                Some((dot(gu, &neg_srank) / (nu * ns)).clamp(-1.0, 1.0).acos().to_degrees())
            })
            .collect();
        let defined: Vec<f64> = rhos.iter().flatten().copied().collect();
        let count = defined.len().max(1) as f64;
        let mean = defined.iter().sum::<f64>() / count;
        let var = defined.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / count;
        let z = 0.5 * uni.iter().map(|(_, s)| s).sum::<f64>();
        records.push(AngleStep {
            step: t,
            mean_rho: mean,
            std_rho: var.sqrt(),
            undefined: cfg.n - defined.len(),
            stable_rank: sp.stable_rank,
            loss_uniform: z.ln(),
        });
        if t < cfg.steps {
            for (j, (g, _)) in uni.iter().enumerate() {
                let row = u.row_mut(j);
                for (x, gk) in row.iter_mut().zip(g) {
                    *x -= cfg.eta * gk;
                }
            }
            normalize_rows_in_place(&mut u);
        }
    }
    Ok(DynamicsTrace { records })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyLoss {
    Uniformity,
    StableRank,
}

impl std::str::FromStr for ToyLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniformity" | "uniform" => Ok(ToyLoss::Uniformity),
            "srank" | "stable-rank" => Ok(ToyLoss::StableRank),
            other => Err(Error::Config(format!("unknown toy loss '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleStep {
    pub step: usize,
    /// Pairwise angles between the three vectors, in degrees.
    pub angle_01: f64,
    pub angle_02: f64,
    pub angle_12: f64,
    pub stable_rank: f64,
    pub loss_uniform: f64,
    /// Norm of the gradient of the optimized objective.
    pub grad_norm: f64,
}

/// Spread of the three starting angles on the circle, in degrees.
pub const TOY_ARC_DEG: f64 = 20.0;
pub const DEFAULT_TOY_ETA: f64 = 0.002;
pub const DEFAULT_TOY_STEPS: usize = 1000;

/// Three random unit vectors in the plane within a small arc, optimized by
/// gradient descent with renormalization, either on uniformity or on
/// (negated) stable rank. The step size is `eta` divided by the gradient
/// norm at the start, so both objectives take the same first step.
pub fn toy_circle_experiment(loss: ToyLoss, steps: usize, eta: f64, seed: u64) -> Result<DynamicsTrace<CircleStep>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!("step size must be > 0, got {eta}")));
    }
    let u = toy_start(seed);
    let grad = |u: &DenseMatrix| -> Result<(DenseMatrix, f64)> {
        let uni = uniform_loss_grad(u)?;
        Ok(match loss {
            ToyLoss::Uniformity => (uni.grad, uni.value),
            ToyLoss::StableRank => (srank_reg_loss_grad(u)?.grad.scaled(-1.0), uni.value),
        })
    };
    let g0 = norm(grad(&u)?.0.as_slice());
    let lr = if g0 > 0.0 { eta / g0 } else { 0.0 };
    let mut u = u;
    let mut records = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        let (g, loss_uniform) = grad(&u)?;
        let angle = |a: usize, b: usize| dot(u.row(a), u.row(b)).clamp(-1.0, 1.0).acos().to_degrees();
        records.push(CircleStep {
            step: t,
            angle_01: angle(0, 1),
            angle_02: angle(0, 2),
            angle_12: angle(1, 2),
            stable_rank: top_singular_default(&u)?.stable_rank,
            loss_uniform,
            grad_norm: norm(g.as_slice()),
        });
        if t < steps {
            for (x, gk) in u.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *x -= lr * gk;
            }
            normalize_rows_in_place(&mut u);
        }
    }
    Ok(DynamicsTrace { records })
}

/// The seeded starting configuration of the circle toy.
pub fn toy_start(seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = rng.random::<f64>() * 2.0 * PI;
    let mut u = DenseMatrix::zeros(3, 2);
    for j in 0..3 {
        let a = base + rng.random::<f64>() * TOY_ARC_DEG.to_radians();
        u.set(j, 0, a.cos());
        u.set(j, 1, a.sin());
    }
    u
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EckartYoung {
    /// `‖E − E_d‖_F²` for the best rank-`d` approximation `E_d`.
    pub error_sq: f64,
    /// `Σ_{k>d} σ_k²`.
    pub tail_sq: f64,
    /// Max-abs gap between `U_d V_dᵀ` and `E_d`, with `U_d = Ψ_d Σ_d^{1/2}`
    /// and `V_d = Ω_d Σ_d^{1/2}`.
    pub factor_gap: f64,
}

/// Truncation error of the best rank-`d` approximation against the tail sum
/// of squared singular values.
pub fn eckart_young_check(e: &DenseMatrix, d: usize) -> Result<EckartYoung> {
    let svd = svd_oracle(e)?;
    let rank = svd.numerical_rank(1e-12);
    if d == 0 || d > rank {
        return Err(Error::Config(format!("rank must satisfy 1 <= d <= {rank}, got {d}")));
    }
    let e_d = svd.reconstruct_rank(d);
    let diff = e.sub(&e_d)?;
    let error_sq = diff.as_slice().iter().map(|x| x * x).sum();
    let tail_sq = svd.singular_values[d..].iter().map(|s| s * s).sum();

    let mut ud = DenseMatrix::zeros(e.rows(), d);
    let mut vd = DenseMatrix::zeros(e.cols(), d);
    for k in 0..d {
        let root = svd.singular_values[k].sqrt();
        for i in 0..e.rows() {
            ud.set(i, k, svd.left.get(i, k) * root);
        }
        for j in 0..e.cols() {
            vd.set(j, k, svd.right.get(j, k) * root);
        }
    }
    let factor_gap = ud.matmul(&vd.transpose())?.max_abs_diff(&e_d);
    Ok(EckartYoung {
        error_sq,
        tail_sq,
        factor_gap,
    })
}
