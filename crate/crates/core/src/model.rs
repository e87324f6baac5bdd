//! Matrix-factorization model: a user table, an item table and the
//! dot-product scorer.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, DenseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub users: DenseMatrix,
    pub items: DenseMatrix,
    pub seed: u64,
}

/// Both tables filled i.i.d. from the standard normal distribution.
pub fn init_model(n_users: usize, n_items: usize, dim: usize, seed: u64) -> Result<EmbeddingModel> {
    if n_users == 0 || n_items == 0 || dim == 0 {
        return Err(Error::Config(format!(
            "model dimensions must be positive, got ({n_users}, {n_items}, {dim})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = DenseMatrix::random_normal(n_users, dim, &mut rng);
    let items = DenseMatrix::random_normal(n_items, dim, &mut rng);
    Ok(EmbeddingModel { users, items, seed })
}

impl EmbeddingModel {
    pub fn from_tables(users: DenseMatrix, items: DenseMatrix) -> Result<Self> {
        if users.cols() != items.cols() {
            return Err(Error::ShapeMismatch {
                expected: (items.rows(), users.cols()),
                got: items.shape(),
            });
        }
        Ok(Self { users, items, seed: 0 })
    }

    pub fn n_users(&self) -> usize {
        self.users.rows()
    }

    pub fn n_items(&self) -> usize {
        self.items.rows()
    }

    pub fn dim(&self) -> usize {
        self.users.cols()
    }

    fn check_user(&self, u: usize) -> Result<()> {
        if u >= self.n_users() {
            return Err(Error::Index { what: "users", index: u, len: self.n_users() });
        }
        Ok(())
    }

    pub fn score(&self, u: usize, i: usize) -> Result<f64> {
        self.check_user(u)?;
        if i >= self.n_items() {
            return Err(Error::Index { what: "items", index: i, len: self.n_items() });
        }
        Ok(dot(self.users.row(u), self.items.row(i)))
    }

    pub fn score_all_items(&self, u: usize) -> Result<Vec<f64>> {
        self.check_user(u)?;
        Ok(self.items.mul_vec(self.users.row(u)))
    }

    pub fn is_finite(&self) -> bool {
        self.users.as_slice().iter().chain(self.items.as_slice()).all(|x| x.is_finite())
    }

    /// Writes the checkpoint: five little-endian `u64` header words
    /// `n, m, d, seed, epoch`, then the user table and the item table as
    /// row-major little-endian `f64`.
    pub fn write_checkpoint(&self, mut w: impl Write, epoch: u64) -> std::io::Result<()> {
        for word in [
            self.n_users() as u64,
            self.n_items() as u64,
            self.dim() as u64,
            self.seed,
            epoch,
        ] {
            w.write_all(&word.to_le_bytes())?;
        }
        for &x in self.users.as_slice().iter().chain(self.items.as_slice()) {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>, epoch: u64) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_checkpoint(std::io::BufWriter::new(f), epoch)
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_checkpoint(mut r: impl Read) -> Result<(Self, u64)> {
        let mut header = [0u8; 40];
        r.read_exact(&mut header)
            .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
        let word = |k: usize| u64::from_le_bytes(header[8 * k..8 * k + 8].try_into().unwrap());
        let (n, m, d, seed, epoch) = (word(0), word(1), word(2), word(3), word(4));
        let count = (n as u128 + m as u128) * d as u128;
        if n == 0 || m == 0 || d == 0 || count > (1u128 << 34) {
            return Err(Error::Checkpoint(format!("implausible shape n={n} m={m} d={d}")));
        }
        let mut body = Vec::new();
        r.read_to_end(&mut body)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        if body.len() as u128 != count * 8 {
            return Err(Error::Checkpoint(format!(
                "expected {} bytes of table data, found {}",
                count * 8,
                body.len()
            )));
        }
        let vals: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (n, m, d) = (n as usize, m as usize, d as usize);
        let users = DenseMatrix::from_vec(n, d, vals[..n * d].to_vec())?;
        let items = DenseMatrix::from_vec(m, d, vals[n * d..].to_vec())?;
        Ok((EmbeddingModel { users, items, seed }, epoch))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, u64)> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(std::io::BufReader::new(f))
    }
}

/// Row-normalized copy of a table.
#[derive(Debug, Clone)]
pub struct NormalizedRows {
    pub table: DenseMatrix,
    /// Original L2 norm of every row.
    pub norms: Vec<f64>,
    /// Set when at least one row was zero and left as zero.
    pub degenerate: bool,
}

/// Scales every nonzero row to unit length; zero rows stay zero and raise
/// the degenerate flag.
pub fn normalized_rows(table: &DenseMatrix) -> NormalizedRows {
    let mut out = table.clone();
    let mut norms = Vec::with_capacity(table.rows());
    let mut degenerate = false;
    for i in 0..out.rows() {
        let r = out.row_mut(i);
        let n = norm(r);
        if n > 0.0 {
            r.iter_mut().for_each(|x| *x /= n);
        } else {
            degenerate = true;
        }
        norms.push(n);
    }
    NormalizedRows {
        table: out,
        norms,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn init_shapes_and_determinism() {
        let m = init_model(2, 3, 4, 1).unwrap();
        assert_eq!(m.users.shape(), (2, 4));
        assert_eq!(m.items.shape(), (3, 4));
        assert_eq!(m, init_model(2, 3, 4, 1).unwrap());
        assert!(matches!(init_model(0, 3, 4, 1), Err(Error::Config(_))));
    }

    #[test]
    fn init_is_standard_normal() {
        let m = init_model(1000, 1000, 50, 3).unwrap();
        let xs: Vec<f64> = m.users.as_slice().iter().chain(m.items.as_slice()).copied().collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn score_examples() {
        let u = DenseMatrix::from_rows(&[&[1.0, 0.0], &[1.0, 2.0]]);
        let i = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[3.0, -1.0]]);
        let m = EmbeddingModel::from_tables(u, i).unwrap();
        assert_eq!(m.score(0, 0).unwrap(), 1.0);
        assert_eq!(m.score(0, 1).unwrap(), 0.0);
        assert_eq!(m.score(1, 2).unwrap(), 1.0);
        assert!(matches!(m.score(2, 0), Err(Error::Index { .. })));
        assert!(matches!(m.score(0, 3), Err(Error::Index { .. })));
    }

    #[test]
    fn score_all_items_examples() {
        let m = init_model(3, 1, 4, 2).unwrap();
        assert_eq!(m.score_all_items(1).unwrap(), vec![m.score(1, 0).unwrap()]);

        let users = DenseMatrix::from_rows(&[&[0.5, -1.5, 2.0]]);
        let m = EmbeddingModel::from_tables(users.clone(), DenseMatrix::identity(3)).unwrap();
        assert_eq!(m.score_all_items(0).unwrap(), users.row(0));

        let m = init_model(2, 5, 3, 4).unwrap();
        let all = m.score_all_items(1).unwrap();
        for (i, s) in all.iter().enumerate() {
            assert!((s - m.score(1, i).unwrap()).abs() < 1e-15);
        }
        assert!(m.score_all_items(2).is_err());
    }

    #[test]
    fn normalization_examples() {
        let t = DenseMatrix::from_rows(&[&[3.0, 4.0], &[0.0, 0.0]]);
        let n = normalized_rows(&t);
        assert!((n.table.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((n.table.get(0, 1) - 0.8).abs() < 1e-15);
        assert_eq!(n.table.row(1), &[0.0, 0.0]);
        assert!(n.degenerate);
        assert_eq!(n.norms, vec![5.0, 0.0]);
    }

    #[test]
    fn checkpoint_round_trip_and_layout() {
        let m = init_model(3, 2, 4, 99).unwrap();
        let mut buf = Vec::new();
        m.write_checkpoint(&mut buf, 17).unwrap();
        assert_eq!(buf.len(), 40 + 8 * (3 + 2) * 4);
        assert_eq!(&buf[..8], &3u64.to_le_bytes());
        assert_eq!(&buf[24..32], &99u64.to_le_bytes());
        assert_eq!(&buf[40..48], &m.users.get(0, 0).to_le_bytes());
        let (back, epoch) = EmbeddingModel::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(epoch, 17);
        assert_eq!(back, m);
        assert!(EmbeddingModel::read_checkpoint(&buf[..buf.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn normalization_idempotent(seed in any::<u64>(), rows in 1usize..10, cols in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = DenseMatrix::random_normal(rows, cols, &mut rng);
            let once = normalized_rows(&t).table;
            let twice = normalized_rows(&once).table;
            prop_assert!(once.max_abs_diff(&twice) < 1e-12);
            for r in once.row_iter() {
                prop_assert!((norm(r) - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn score_is_bilinear(seed in any::<u64>(), c in -10.0..10.0f64) {
            let m = init_model(2, 2, 5, seed).unwrap();
            let mut scaled = m.clone();
            scaled.users.row_mut(0).iter_mut().for_each(|x| *x *= c);
            let a = m.score(0, 1).unwrap() * c;
            let b = scaled.score(0, 1).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}
