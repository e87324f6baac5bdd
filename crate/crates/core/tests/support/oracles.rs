//! Reference loss values written directly from their definitions, and a
//! central finite-difference gradient checker built on them. Nothing here
//! calls the library's loss code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankcf::data::{PairBatch, SetBatch, TripletBatch};
use rankcf::linalg::{svd_oracle, DenseMatrix};
use rankcf::losses::{self, Gradients};
use rankcf::model::EmbeddingModel;

pub const FD_STEP: f64 = 1e-6;
pub const GRAD_REL_TOL: f64 = 1e-4;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    v.iter().map(|x| x / n).collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn distinct(idx: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &i in idx {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

pub fn bpr_value(m: &EmbeddingModel, b: &TripletBatch) -> f64 {
    let mut s = 0.0;
    for k in 0..b.len() {
        let u = m.users.row(b.users[k]);
        let x = dot(u, m.items.row(b.pos_items[k])) - dot(u, m.items.row(b.neg_items[k]));
        s += -(1.0 / (1.0 + (-x).exp())).ln();
    }
    s / b.len() as f64
}

pub fn ssm_value(m: &EmbeddingModel, b: &SetBatch) -> f64 {
    let mut s = 0.0;
    for k in 0..b.len() {
        let u = m.users.row(b.users[k]);
        let pos = dot(u, m.items.row(b.pos_items[k])).exp();
        let neg: f64 = b.neg_items[k].iter().map(|&j| dot(u, m.items.row(j)).exp()).sum();
        s += -(pos / (pos + neg)).ln();
    }
    s / b.len() as f64
}

pub fn align_value(m: &EmbeddingModel, b: &PairBatch) -> f64 {
    let mut s = 0.0;
    for k in 0..b.len() {
        s += dist2(&unit(m.users.row(b.users[k])), &unit(m.items.row(b.items[k])));
    }
    s / b.len() as f64
}

pub fn uniform_value(t: &DenseMatrix) -> f64 {
    let rows: Vec<Vec<f64>> = t.row_iter().map(unit).collect();
    let mut z = 0.0;
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            z += (-2.0 * dist2(&rows[a], &rows[b])).exp();
        }
    }
    z.ln()
}

pub fn srank_value(t: &DenseMatrix) -> f64 {
    let mut hat = t.clone();
    for i in 0..hat.rows() {
        let u = unit(hat.row(i));
        hat.row_mut(i).copy_from_slice(&u);
    }
    let sv = svd_oracle(&hat).unwrap().singular_values;
    let frob: f64 = sv.iter().map(|s| s * s).sum();
    frob / (sv[0] * sv[0] * t.rows().max(t.cols()) as f64)
}

pub fn directau_value(m: &EmbeddingModel, b: &PairBatch, gamma: f64) -> f64 {
    let mut v = align_value(m, b);
    let us = distinct(&b.users);
    if us.len() >= 2 {
        v += gamma * uniform_value(&m.users.select_rows(&us));
    }
    let is = distinct(&b.items);
    if is.len() >= 2 {
        v += gamma * uniform_value(&m.items.select_rows(&is));
    }
    v
}

pub fn warmstart_value(m: &EmbeddingModel, b: &PairBatch, gamma_sr: f64) -> f64 {
    align_value(m, b)
        - gamma_sr
            * (srank_value(&m.users.select_rows(&distinct(&b.users)))
                + srank_value(&m.items.select_rows(&distinct(&b.items))))
}

/// Central differences of `f` over every entry of both tables.
pub fn fd_gradient(m: &EmbeddingModel, f: impl Fn(&EmbeddingModel) -> f64) -> (DenseMatrix, DenseMatrix) {
    let mut work = m.clone();
    let mut gu = DenseMatrix::zeros(m.n_users(), m.dim());
    let mut gi = DenseMatrix::zeros(m.n_items(), m.dim());
    for side in 0..2 {
        let len = if side == 0 { m.users.as_slice().len() } else { m.items.as_slice().len() };
        for k in 0..len {
            let orig = if side == 0 { m.users.as_slice()[k] } else { m.items.as_slice()[k] };
            let entry = |w: &mut EmbeddingModel, v: f64| {
                if side == 0 {
                    w.users.as_mut_slice()[k] = v;
                } else {
                    w.items.as_mut_slice()[k] = v;
                }
            };
            entry(&mut work, orig + FD_STEP);
            let plus = f(&work);
            entry(&mut work, orig - FD_STEP);
            let minus = f(&work);
            entry(&mut work, orig);
            let g = (plus - minus) / (2.0 * FD_STEP);
            if side == 0 {
                gu.as_mut_slice()[k] = g;
            } else {
                gi.as_mut_slice()[k] = g;
            }
        }
    }
    (gu, gi)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, 1e-6)` over the concatenated entries.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = dist2(a, b).sqrt();
    let scale = dot(a, a).sqrt().max(dot(b, b).sqrt()).max(1e-6);
    diff / scale
}

fn flatten(g: &Gradients, m: &EmbeddingModel) -> Vec<f64> {
    let mut v = g.users.to_dense(m.n_users()).into_vec();
    v.extend(g.items.to_dense(m.n_items()).into_vec());
    v
}

fn flatten_pair(gu: DenseMatrix, gi: DenseMatrix) -> Vec<f64> {
    let mut v = gu.into_vec();
    v.extend(gi.into_vec());
    v
}

/// A small random model (at most 16 rows per table, d ≤ 8) with matching batches.
pub struct Instance {
    pub model: EmbeddingModel,
    pub triplets: TripletBatch,
    pub sets: SetBatch,
    pub pairs: PairBatch,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=16);
    let m = rng.random_range(2..=16);
    let d = rng.random_range(2..=8);
    let model = EmbeddingModel::from_tables(
        DenseMatrix::random_normal(n, d, &mut rng),
        DenseMatrix::random_normal(m, d, &mut rng),
    )
    .unwrap();
    let b = rng.random_range(1..=12);
    let k = rng.random_range(1..=5);
    let users: Vec<usize> = (0..b).map(|_| rng.random_range(0..n)).collect();
    let pos: Vec<usize> = (0..b).map(|_| rng.random_range(0..m)).collect();
    let neg: Vec<usize> = (0..b).map(|_| rng.random_range(0..m)).collect();
    let sets: Vec<Vec<usize>> = (0..b)
        .map(|_| (0..k).map(|_| rng.random_range(0..m)).collect())
        .collect();
    Instance {
        model,
        triplets: TripletBatch { users: users.clone(), pos_items: pos.clone(), neg_items: neg },
        sets: SetBatch { users: users.clone(), pos_items: pos.clone(), neg_items: sets },
        pairs: PairBatch { users, items: pos },
    }
}

pub const GRADIENT_LOSSES: [&str; 7] = ["bpr", "ssm", "align", "uniform", "srank", "directau", "warmstart"];

/// Relative error between the analytic gradient of `loss` and central
/// differences of its reference value, on instance `seed`.
pub fn gradient_error(loss: &str, seed: u64) -> f64 {
    let inst = random_instance(seed);
    let m = &inst.model;
    match loss {
        "bpr" => {
            let (_, g) = losses::bpr_loss_grad(m, &inst.triplets).unwrap();
            let (fu, fi) = fd_gradient(m, |w| bpr_value(w, &inst.triplets));
            rel_err(&flatten(&g, m), &flatten_pair(fu, fi))
        }
        "ssm" => {
            let (_, g) = losses::ssm_loss_grad(m, &inst.sets).unwrap();
            let (fu, fi) = fd_gradient(m, |w| ssm_value(w, &inst.sets));
            rel_err(&flatten(&g, m), &flatten_pair(fu, fi))
        }
        "align" => {
            let (_, g) = losses::align_loss_grad(m, &inst.pairs).unwrap();
            let (fu, fi) = fd_gradient(m, |w| align_value(w, &inst.pairs));
            rel_err(&flatten(&g, m), &flatten_pair(fu, fi))
        }
        "uniform" => {
            let t = losses::uniform_loss_grad(&m.users).unwrap();
            let (fu, _) = fd_gradient(m, |w| uniform_value(&w.users));
            rel_err(t.grad.as_slice(), fu.as_slice())
        }
        "srank" => {
            let t = losses::srank_reg_loss_grad(&m.users).unwrap();
            let (fu, _) = fd_gradient(m, |w| srank_value(&w.users));
            rel_err(t.grad.as_slice(), fu.as_slice())
        }
        "directau" => {
            let (_, g) = losses::directau_loss_grad(m, &inst.pairs, 2.0).unwrap();
            let (fu, fi) = fd_gradient(m, |w| directau_value(w, &inst.pairs, 2.0));
            rel_err(&flatten(&g, m), &flatten_pair(fu, fi))
        }
        "warmstart" => {
            let (_, g) = losses::warmstart_loss_grad(m, &inst.pairs, 0.1).unwrap();
            let (fu, fi) = fd_gradient(m, |w| warmstart_value(w, &inst.pairs, 0.1));
            rel_err(&flatten(&g, m), &flatten_pair(fu, fi))
        }
        other => panic!("unknown loss {other}"),
    }
}

/// Worst relative error over `instances` seeded instances.
pub fn worst_gradient_error(loss: &str, instances: u64) -> f64 {
    (0..instances)
        .map(|s| gradient_error(loss, 0x6ead_0000 + s))
        .fold(0.0, f64::max)
}
