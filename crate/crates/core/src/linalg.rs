//! Dense real-matrix primitives.
//!
//! Row-major `f64` storage with the handful of spectral quantities the rest of
//! the crate needs: Frobenius norm, the top singular triple by power iteration
//! on the smaller Gram matrix, stable rank, pairwise row distances, and a full
//! SVD for small matrices that serves as a reference in tests and in the
//! theory simulations.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Largest side accepted by [`svd_oracle`].
pub const ORACLE_LIMIT: usize = 256;

pub const DEFAULT_POWER_TOL: f64 = 1e-10;
pub const DEFAULT_POWER_MAX_ITER: usize = 1000;
/// Start-vector seed used when callers do not care which seed is used.
pub const DEFAULT_POWER_SEED: u64 = 0x5eed_0001;

/// A dense matrix stored in row-major order: `data[i * cols + j] = A[i, j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data, rejecting bad lengths and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: (rows, cols),
                got: (data.len(), 1),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateMatrix("non-finite entry"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Panics on ragged input; intended for literals in tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Rank-one matrix `a bᵀ`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        let mut m = Self::zeros(a.len(), b.len());
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                m.set(i, j, x * y);
            }
        }
        m
    }

    /// Entries drawn i.i.d. from the standard normal distribution.
    pub fn random_normal(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                expected: (self.cols, other.cols),
                got: other.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = out.row_mut(i);
            for (k, &aik) in a.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                for (oj, &bkj) in o.iter_mut().zip(other.row(k)) {
                    *oj += aik * bkj;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                got: other.shape(),
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `AᵀA` (cols × cols).
    pub fn gram_cols(&self) -> Self {
        let d = self.cols;
        let mut g = Self::zeros(d, d);
        for r in self.row_iter() {
            for (a, &ra) in r.iter().enumerate() {
                if ra == 0.0 {
                    continue;
                }
                let grow = &mut g.data[a * d..(a + 1) * d];
                for (gb, &rb) in grow[a..].iter_mut().zip(&r[a..]) {
                    *gb += ra * rb;
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                g.data[a * d + b] = g.data[b * d + a];
            }
        }
        g
    }

    /// `AAᵀ` (rows × rows).
    pub fn gram_rows(&self) -> Self {
        let n = self.rows;
        let mut g = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(self.row(i), self.row(j));
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }

    /// `A x` for a vector of length `cols`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.row_iter().map(|r| dot(r, x)).collect()
    }

    /// `Aᵀ y` for a vector of length `rows`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &yi) in self.row_iter().zip(y) {
            axpy(yi, r, &mut out);
        }
        out
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Top singular value and vectors of a matrix at one instant, plus the
/// derived stable rank.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub sigma1: f64,
    pub frob_sq: f64,
    pub stable_rank: f64,
    /// Left singular vector ψ₁ (length `rows`).
    pub left_vec: Vec<f64>,
    /// Right singular vector ω₁ (length `cols`).
    pub right_vec: Vec<f64>,
    pub iterations: usize,
}

pub fn frobenius_sq(a: &DenseMatrix) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::DegenerateMatrix("empty matrix"));
    }
    Ok(a.as_slice().iter().map(|x| x * x).sum())
}

/// Top singular triple by power iteration on the smaller Gram matrix `G`.
///
/// Converges when the eigen-residual `‖Gv − λv‖` drops below `tol·λ`. If the
/// residual is still above that after `max_iter` steps but the Rayleigh
/// quotient has stopped moving (relative change below `tol`), the top two
/// singular values are (nearly) tied and the current iterate is returned as
/// is. Otherwise the result is [`Error::ConvergenceFailure`].
pub fn top_singular(
    a: &DenseMatrix,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SpectralSummary> {
    let frob_sq = frobenius_sq(a)?;
    if frob_sq == 0.0 {
        return Err(Error::DegenerateMatrix("all-zero matrix"));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("power iteration tolerance must be > 0, got {tol}")));
    }

    // Iterate on whichever Gram matrix is smaller.
    let right_side = a.cols() <= a.rows();
    let gram = if right_side { a.gram_cols() } else { a.gram_rows() };
    let k = gram.rows();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize_in_place(&mut v);

    let mut lambda = 0.0;
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let mut w = gram.mul_vec(&v);
        let new_lambda = dot(&v, &w);
        let wn = norm(&w);
        if wn == 0.0 || !wn.is_finite() {
            // Start vector orthogonal to the range; restart from a basis vector.
            v = vec![0.0; k];
            v[it % k] = 1.0;
            continue;
        }
        let resid = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - new_lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        last_change = (new_lambda - lambda).abs() / new_lambda.abs().max(f64::MIN_POSITIVE);
        lambda = new_lambda;
        w.iter_mut().for_each(|x| *x /= wn);
        v = w;
        if resid <= tol * lambda {
            converged = true;
            break;
        }
    }

    let summary = finish_triple(a, v, right_side, frob_sq, iterations);
    if converged || last_change < tol {
        Ok(summary)
    } else {
        Err(Error::ConvergenceFailure {
            iterations,
            last: Box::new(summary),
        })
    }
}

fn finish_triple(
    a: &DenseMatrix,
    v: Vec<f64>,
    right_side: bool,
    frob_sq: f64,
    iterations: usize,
) -> SpectralSummary {
    let (left, right, sigma1) = if right_side {
        let mut left = a.mul_vec(&v);
        let s = normalize_in_place(&mut left);
        (left, v, s)
    } else {
        let mut right = a.tr_mul_vec(&v);
        let s = normalize_in_place(&mut right);
        (v, right, s)
    };
    SpectralSummary {
        sigma1,
        frob_sq,
        stable_rank: frob_sq / (sigma1 * sigma1),
        left_vec: left,
        right_vec: right,
        iterations,
    }
}

fn normalize_in_place(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Top singular triple with the default tolerance, iteration cap, and seed.
///
/// Near-isotropic matrices (the normal state of well-spread embeddings) can
/// have λ₂/λ₁ so close to 1 that power iteration cannot settle within the
/// cap. When that happens and the Gram matrix is within the oracle size, its
/// top eigenpair is taken from a dense symmetric eigensolver instead.
pub fn top_singular_default(a: &DenseMatrix) -> Result<SpectralSummary> {
    match top_singular(a, DEFAULT_POWER_TOL, DEFAULT_POWER_MAX_ITER, DEFAULT_POWER_SEED) {
        Err(Error::ConvergenceFailure { iterations, .. }) if a.rows().min(a.cols()) <= ORACLE_LIMIT => {
            let right_side = a.cols() <= a.rows();
            let gram = if right_side { a.gram_cols() } else { a.gram_rows() };
            let eig = nalgebra::SymmetricEigen::new(gram.to_nalgebra());
            let top = eig.eigenvalues.imax();
            let v: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
            Ok(finish_triple(a, v, right_side, frobenius_sq(a)?, iterations))
        }
        other => other,
    }
}

/// `‖A‖_F² / σ₁²`.
pub fn stable_rank(a: &DenseMatrix) -> Result<f64> {
    Ok(top_singular_default(a)?.stable_rank)
}

/// Thin SVD `A = Ψ Σ Ωᵀ` with singular values sorted in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub singular_values: Vec<f64>,
    /// rows × p, columns are left singular vectors.
    pub left: DenseMatrix,
    /// cols × p, columns are right singular vectors.
    pub right: DenseMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_rank(self.singular_values.len())
    }

    /// `Ψ_k Σ_k Ω_kᵀ`.
    pub fn reconstruct_rank(&self, k: usize) -> DenseMatrix {
        let (m, n) = (self.left.rows(), self.right.rows());
        let mut out = DenseMatrix::zeros(m, n);
        for r in 0..k.min(self.singular_values.len()) {
            let s = self.singular_values[r];
            for i in 0..m {
                let li = self.left.get(i, r) * s;
                if li == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let v = out.get(i, j) + li * self.right.get(j, r);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Number of singular values above `rel_tol · σ₁`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values
            .iter()
            .filter(|&&s| s > rel_tol * top)
            .count()
    }
}

/// Full dense SVD for matrices up to [`ORACLE_LIMIT`] on each side.
pub fn svd_oracle(a: &DenseMatrix) -> Result<Svd> {
    if a.rows() > ORACLE_LIMIT || a.cols() > ORACLE_LIMIT {
        return Err(Error::OracleSizeExceeded {
            rows: a.rows(),
            cols: a.cols(),
            limit: ORACLE_LIMIT,
        });
    }
    if a.is_empty() {
        return Err(Error::DegenerateMatrix("empty matrix"));
    }
    let scale = a.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(svd) = nalgebra_svd(a).filter(|s| svd_is_faithful(a, s, scale)) {
        return Ok(svd);
    }
    if let Some(svd) = nalgebra_svd(&a.transpose())
        .map(|s| Svd {
            singular_values: s.singular_values,
            left: s.right,
            right: s.left,
        })
        .filter(|s| svd_is_faithful(a, s, scale))
    {
        return Ok(svd);
    }
    Ok(gram_svd(a))
}

fn nalgebra_svd(a: &DenseMatrix) -> Option<Svd> {
    let svd = a.to_nalgebra().try_svd(true, true, f64::EPSILON, 0)?;
    let u = svd.u?;
    let vt = svd.v_t?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let p = order.len();
    let mut left = DenseMatrix::zeros(a.rows(), p);
    let mut right = DenseMatrix::zeros(a.cols(), p);
    let mut values = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        values.push(svd.singular_values[src].max(0.0));
        for i in 0..a.rows() {
            left.set(i, dst, u[(i, src)]);
        }
        for j in 0..a.cols() {
            right.set(j, dst, vt[(src, j)]);
        }
    }
    Some(Svd {
        singular_values: values,
        left,
        right,
    })
}

// nalgebra's bidiagonal QR occasionally returns a wrong spectrum for
// numerically rank-deficient inputs, so every result is checked against
// the input before it is trusted.
fn svd_is_faithful(a: &DenseMatrix, svd: &Svd, scale: f64) -> bool {
    let fro: f64 = a.as_slice().iter().map(|x| x * x).sum();
    let spec: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let tol = 1e-10 * (a.rows().max(a.cols()) as f64);
    (spec - fro).abs() <= tol * fro.max(f64::MIN_POSITIVE)
        && svd.reconstruct().max_abs_diff(a) <= tol * scale.max(f64::MIN_POSITIVE)
}

/// SVD through the symmetric eigenproblem of the smaller Gram matrix.
/// Singular values below about `√ε · σ₁` lose their relative accuracy.
fn gram_svd(a: &DenseMatrix) -> Svd {
    let right_side = a.cols() <= a.rows();
    let gram = if right_side { a.gram_cols() } else { a.gram_rows() };
    let eig = nalgebra::SymmetricEigen::new(gram.to_nalgebra());
    let p = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let (mut left, mut right) = (DenseMatrix::zeros(a.rows(), p), DenseMatrix::zeros(a.cols(), p));
    let mut values = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = eig.eigenvalues[src].max(0.0).sqrt();
        values.push(sigma);
        let v: Vec<f64> = eig.eigenvectors.column(src).iter().copied().collect();
        let (known, other) = if right_side { (&mut right, &mut left) } else { (&mut left, &mut right) };
        for (k, &x) in v.iter().enumerate() {
            known.set(k, dst, x);
        }
        let projected = if right_side { a.mul_vec(&v) } else { a.transpose().mul_vec(&v) };
        if sigma > 0.0 {
            for (k, x) in projected.iter().enumerate() {
                other.set(k, dst, x / sigma);
            }
        }
    }
    Svd {
        singular_values: values,
        left,
        right,
    }
}

/// Squared Euclidean distances between all pairs of rows (n × n).
pub fn pairwise_sq_dists(a: &DenseMatrix) -> DenseMatrix {
    let n = a.rows();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(a.row(i), a.row(j));
            out.set(i, j, d);
            out.set(j, i, d);
        }
    }
    out
}

/// Euclidean distances between all pairs of rows (n × n).
pub fn pairwise_dists(a: &DenseMatrix) -> DenseMatrix {
    let mut d = pairwise_sq_dists(a);
    d.as_mut_slice().iter_mut().for_each(|x| *x = x.sqrt());
    d
}
