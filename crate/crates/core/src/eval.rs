//! Top-k ranking metrics and full-table stable rank.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{InteractionDataset, Split};
use crate::error::{Error, Result};
use crate::linalg::stable_rank;
use crate::model::{normalized_rows, EmbeddingModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub recall_at_k: f64,
    pub ndcg_at_k: f64,
    pub k: usize,
    pub users_evaluated: usize,
}

/// Recall@k and NDCG@k of the model on `split`, averaged over users with a
/// nonempty relevant set. Each user's training items are removed from the
/// candidate list.
pub fn evaluate(model: &EmbeddingModel, ds: &InteractionDataset, split: Split, k: usize) -> Result<MetricReport> {
    if model.n_users() != ds.n_users() || model.n_items() != ds.n_items() {
        return Err(Error::ShapeMismatch {
            expected: (ds.n_users(), ds.n_items()),
            got: (model.n_users(), model.n_items()),
        });
    }
    evaluate_with(ds, split, k, |u| model.items.mul_vec(model.users.row(u)))
}

/// As [`evaluate`], with user scores supplied by `scores(u)` (one per item).
pub fn evaluate_with<F>(ds: &InteractionDataset, split: Split, k: usize, scores: F) -> Result<MetricReport>
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    if split == Split::Train {
        return Err(Error::Eval("evaluation runs on the validation or test split".into()));
    }
    if k == 0 {
        return Err(Error::Eval("k must be at least 1".into()));
    }
    if ds.split_len(split) == 0 {
        return Err(Error::Eval(format!("{split:?} split is empty")));
    }

    let per_user: Vec<Option<(f64, f64)>> = (0..ds.n_users())
        .into_par_iter()
        .map(|u| {
            let relevant = ds.items_of(split, u);
            if relevant.is_empty() {
                return None;
            }
            let s = scores(u);
            let top = top_k(&s, ds.items_of(Split::Train, u), k);
            Some(user_metrics(&top, relevant, k))
        })
        .collect();

    let (mut recall, mut ndcg, mut users) = (0.0, 0.0, 0usize);
    for (r, n) in per_user.into_iter().flatten() {
        recall += r;
        ndcg += n;
        users += 1;
    }
    if users == 0 {
        return Err(Error::Eval(format!("no user has {split:?} items")));
    }
    Ok(MetricReport {
        recall_at_k: recall / users as f64,
        ndcg_at_k: ndcg / users as f64,
        k,
        users_evaluated: users,
    })
}

/// Higher score first; equal scores by ascending item index.
fn rank_order(scores: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// The `k` best items not in `excluded` (sorted), best first.
pub fn top_k(scores: &[f64], excluded: &[usize], k: usize) -> Vec<usize> {
    let mut cand: Vec<usize> = (0..scores.len())
        .filter(|i| excluded.binary_search(i).is_err())
        .collect();
    let cmp = rank_order(scores);
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, &cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(&cmp);
    cand
}

/// Recall and NDCG of one ranked list against a sorted relevant set, with
/// `k′ = min(k, |R|)` as the recall denominator and the IDCG length.
pub fn user_metrics(ranked: &[usize], relevant: &[usize], k: usize) -> (f64, f64) {
    let k_prime = k.min(relevant.len());
    let mut hits = 0usize;
    let mut dcg = 0.0;
    for (pos, item) in ranked.iter().take(k).enumerate() {
        if relevant.binary_search(item).is_ok() {
            hits += 1;
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let idcg: f64 = (0..k_prime).map(|p| 1.0 / ((p + 2) as f64).log2()).sum();
    (hits as f64 / k_prime as f64, dcg / idcg)
}

/// Stable rank of the row-normalized user and item tables.
pub fn full_table_srank(model: &EmbeddingModel) -> Result<(f64, f64)> {
    let u = stable_rank(&normalized_rows(&model.users).table)?;
    let i = stable_rank(&normalized_rows(&model.items).table)?;
    Ok((u, i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::model::init_model;

    #[test]
    fn single_user_cases() {
        assert_eq!(user_metrics(&[4, 1, 2], &[4], 20), (1.0, 1.0));
        assert_eq!(user_metrics(&[1, 2, 3], &[9], 3), (0.0, 0.0));
        let (r, n) = user_metrics(&[5, 0, 7, 3], &[5, 7], 20);
        assert_eq!(r, 1.0);
        let expected = (1.0 + 1.0 / 4f64.log2()) / (1.0 + 1.0 / 3f64.log2());
        assert!((n - expected).abs() < 1e-12);
        assert!((n - 0.9197).abs() < 1e-4);
    }

    #[test]
    fn recall_denominator_is_k_prime() {
        // Five relevant items, k = 2: both top slots hit, so recall is 1.
        assert_eq!(user_metrics(&[0, 1], &[0, 1, 2, 3, 4], 2), (1.0, 1.0));
    }

    #[test]
    fn top_k_ties_and_masking() {
        let s = [1.0, 3.0, 3.0, 0.5, 3.0];
        assert_eq!(top_k(&s, &[], 3), vec![1, 2, 4]);
        assert_eq!(top_k(&s, &[2], 3), vec![1, 4, 0]);
        assert_eq!(top_k(&s, &[0, 1, 2, 3, 4], 3), Vec::<usize>::new());
        assert_eq!(top_k(&s, &[], 10).len(), 5);
    }

    #[test]
    fn full_table_srank_values() {
        let m = EmbeddingModel::from_tables(
            DenseMatrix::outer(&[1.0, -2.0, 3.0], &[0.6, 0.8]),
            DenseMatrix::identity(2),
        )
        .unwrap();
        let (u, i) = full_table_srank(&m).unwrap();
        assert!((u - 1.0).abs() < 1e-12);
        assert!((i - 2.0).abs() < 1e-9);

        let zero = EmbeddingModel::from_tables(DenseMatrix::zeros(2, 2), DenseMatrix::identity(2)).unwrap();
        assert!(matches!(full_table_srank(&zero), Err(Error::DegenerateMatrix(_))));
    }

    #[test]
    fn fresh_init_has_high_stable_rank() {
        let m = init_model(10_000, 10_000, 64, 11).unwrap();
        let (u, i) = full_table_srank(&m).unwrap();
        assert!(u > 0.8 * 64.0 && i > 0.8 * 64.0, "{u} {i}");
    }
}
