//! Finite-difference references for the angle and circle experiments, and
//! the frozen baselines they produce.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rankcf::linalg::DenseMatrix;
use rankcf::theory::{angular_cluster, toy_start, AngleConfig, ToyLoss};
use serde::{Deserialize, Serialize};

// Resolves from either crate of the workspace.
pub const FIXTURE_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures");
pub const BASELINE_SEEDS: [u64; 3] = [0, 1, 2];
pub const BASELINE_REL_TOL: f64 = 0.05;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleBaseline {
    pub seed: u64,
    pub config: AngleConfig,
    pub step0_mean_rho: f64,
    pub first_quarter_mean_rho: f64,
    pub final_quarter_mean_rho: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircleBaseline {
    pub seed: u64,
    pub steps: usize,
    pub eta: f64,
    /// Largest pairwise-angle gap (degrees) between the two objectives over
    /// the first tenth of the run.
    pub early_max_deviation: f64,
}

pub fn load<T: for<'de> Deserialize<'de>>(name: &str) -> T {
    let path = format!("{FIXTURE_DIR}/{name}");
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    serde_json::from_str(&text).unwrap()
}

pub fn store<T: Serialize>(name: &str, value: &T) {
    let path = format!("{FIXTURE_DIR}/{name}");
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap() + "\n").unwrap();
}

pub fn quarter_means(trace: &[f64]) -> (f64, f64) {
    let q = (trace.len() / 4).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&trace[..q]), mean(&trace[trace.len() - q..]))
}

fn to_na(t: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.rows(), t.cols(), t.as_slice())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
    (dot(a, b) / (dot(a, a) * dot(b, b)).sqrt()).clamp(-1.0, 1.0).acos().to_degrees()
}

/// `‖U‖_F² / λ_max(UᵀU)` from a Gram matrix and its trace.
fn srank_from_gram(g: &DMatrix<f64>) -> f64 {
    let top = SymmetricEigen::new(g.clone()).eigenvalues.max();
    g.trace() / top
}

/// Mean angle (degrees) between each user's uniformity gradient and the
/// negated stable-rank gradient at the initial cluster, both by central
/// differences: `log Σ_{u′≠u} exp(−2‖x − u′‖²)` in `x`, and `srank(U)` in
/// row `u`.
pub fn fd_step0_mean_rho(cfg: &AngleConfig) -> f64 {
    const H: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u = angular_cluster(cfg.n, cfg.d, cfg.theta_deg, &mut rng);
    let gram = to_na(&u).transpose() * to_na(&u);
    let mut total = 0.0;
    for j in 0..u.rows() {
        let row = u.row(j).to_vec();
        let uni = |x: &[f64]| -> f64 {
            let z: f64 = (0..u.rows())
                .filter(|&k| k != j)
                .map(|k| {
                    let d2: f64 = x.iter().zip(u.row(k)).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-2.0 * d2).exp()
                })
                .sum();
            z.ln()
        };
        let srank = |x: &[f64]| -> f64 {
            let old = nalgebra::DVector::from_column_slice(&row);
            let new = nalgebra::DVector::from_column_slice(x);
            srank_from_gram(&(&gram - &old * old.transpose() + &new * new.transpose()))
        };
        let mut g_uni = vec![0.0; row.len()];
        let mut g_neg_srank = vec![0.0; row.len()];
        for k in 0..row.len() {
            let (mut plus, mut minus) = (row.clone(), row.clone());
            plus[k] += H;
            minus[k] -= H;
            g_uni[k] = (uni(&plus) - uni(&minus)) / (2.0 * H);
            g_neg_srank[k] = -(srank(&plus) - srank(&minus)) / (2.0 * H);
        }
        total += angle_deg(&g_uni, &g_neg_srank);
    }
    total / u.rows() as f64
}

fn unit_rows(t: &DenseMatrix) -> Vec<Vec<f64>> {
    t.row_iter()
        .map(|r| {
            let n = dot(r, r).sqrt();
            r.iter().map(|x| x / n).collect()
        })
        .collect()
}

/// Toy objectives on row-normalized input: uniformity, or minus the
/// normalized stable rank `‖Û‖_F² / (σ₁² · 3)`.
pub fn toy_objective(loss: ToyLoss, t: &DenseMatrix) -> f64 {
    let rows = unit_rows(t);
    match loss {
        ToyLoss::Uniformity => {
            let mut z = 0.0;
            for a in 0..rows.len() {
                for b in a + 1..rows.len() {
                    let d2: f64 = rows[a].iter().zip(&rows[b]).map(|(x, y)| (x - y) * (x - y)).sum();
                    z += (-2.0 * d2).exp();
                }
            }
            z.ln()
        }
        ToyLoss::StableRank => {
            let flat: Vec<f64> = rows.concat();
            let m = DMatrix::from_row_slice(rows.len(), t.cols(), &flat);
            let g = m.transpose() * m;
            -srank_from_gram(&g) / rows.len().max(t.cols()) as f64
        }
    }
}

pub fn fd_toy_gradient(loss: ToyLoss, t: &DenseMatrix, h: f64) -> Vec<f64> {
    let mut g = vec![0.0; t.as_slice().len()];
    for k in 0..g.len() {
        let (mut plus, mut minus) = (t.clone(), t.clone());
        plus.as_mut_slice()[k] += h;
        minus.as_mut_slice()[k] -= h;
        g[k] = (toy_objective(loss, &plus) - toy_objective(loss, &minus)) / (2.0 * h);
    }
    g
}

/// The circle toy driven by finite-difference gradients: same start, same
/// first-step matching and renormalization. Returns pairwise angles.
pub fn fd_toy_run(loss: ToyLoss, steps: usize, eta: f64, seed: u64) -> Vec<[f64; 3]> {
    const H: f64 = 1e-6;
    let mut u = toy_start(seed);
    let g0 = fd_toy_gradient(loss, &u, H);
    let lr = eta / dot(&g0, &g0).sqrt();
    let mut out = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        out.push([
            angle_deg(u.row(0), u.row(1)),
            angle_deg(u.row(0), u.row(2)),
            angle_deg(u.row(1), u.row(2)),
        ]);
        if t < steps {
            let g = fd_toy_gradient(loss, &u, H);
            for (x, gk) in u.as_mut_slice().iter_mut().zip(&g) {
                *x -= lr * gk;
            }
            for i in 0..3 {
                let r = u.row_mut(i);
                let n = dot(r, r).sqrt();
                r.iter_mut().for_each(|x| *x /= n);
            }
        }
    }
    out
}

/// Largest angle gap between two runs over the first tenth of the steps.
pub fn early_deviation(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let n = (a.len().min(b.len()) / 10).max(1);
    (0..n)
        .flat_map(|t| (0..3).map(move |k| (a[t][k] - b[t][k]).abs()))
        .fold(0.0, f64::max)
}

/// Three unit vectors at 0°, 60° and 120°: a tight frame, where the stable
/// rank of the 3×2 table attains its cap of 2.
pub fn tight_frame() -> DenseMatrix {
    let mut t = DenseMatrix::zeros(3, 2);
    for j in 0..3 {
        let a = (60.0 * j as f64).to_radians();
        t.set(j, 0, a.cos());
        t.set(j, 1, a.sin());
    }
    t
}
