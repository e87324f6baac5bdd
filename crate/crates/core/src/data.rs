//! Interaction logs: ingestion, ID remapping, splitting and negative sampling.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Line layout of an interaction file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsvFormat {
    /// `<user>\t<item>`
    TsvPairs,
    /// `<user>\t<item>\t<rating>[\t<timestamp>]`; the rating is ignored.
    TsvRated,
}

impl std::str::FromStr for TsvFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv_pairs" | "pairs" => Ok(TsvFormat::TsvPairs),
            "tsv_rated" | "rated" => Ok(TsvFormat::TsvRated),
            other => Err(Error::Config(format!("unknown interaction format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Bijection between raw string IDs and dense indices, in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn intern(&mut self, raw: &str) -> usize {
        if let Some(&i) = self.index.get(raw) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(raw.to_owned());
        self.index.insert(raw.to_owned(), i);
        i
    }

    pub fn get(&self, raw: &str) -> Option<usize> {
        self.index.get(raw).copied()
    }

    pub fn raw(&self, idx: usize) -> Option<&str> {
        self.ids.get(idx).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn dense(n: usize) -> Self {
        let mut v = Self::default();
        for i in 0..n {
            v.intern(&i.to_string());
        }
        v
    }
}

/// A remapped user–item interaction log, optionally split into train/val/test.
#[derive(Debug, Clone)]
pub struct InteractionDataset {
    n_users: usize,
    n_items: usize,
    interactions: Vec<(usize, usize)>,
    assignment: Option<Vec<Split>>,
    users: Vocabulary,
    items: Vocabulary,
    duplicates_dropped: usize,
    train_pairs: Vec<(usize, usize)>,
    by_user: [Vec<Vec<usize>>; 3],
}

fn split_slot(s: Split) -> usize {
    match s {
        Split::Train => 0,
        Split::Val => 1,
        Split::Test => 2,
    }
}

impl InteractionDataset {
    fn build(
        users: Vocabulary,
        items: Vocabulary,
        interactions: Vec<(usize, usize)>,
        duplicates_dropped: usize,
    ) -> Self {
        Self {
            n_users: users.len(),
            n_items: items.len(),
            interactions,
            assignment: None,
            users,
            items,
            duplicates_dropped,
            train_pairs: Vec::new(),
            by_user: Default::default(),
        }
    }

    /// Builds a dataset from already-indexed interactions with a fixed split
    /// assignment. Duplicate pairs are rejected rather than dropped.
    pub fn from_assigned(
        n_users: usize,
        n_items: usize,
        rows: impl IntoIterator<Item = (usize, usize, Split)>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut interactions = Vec::new();
        let mut assignment = Vec::new();
        for (u, i, s) in rows {
            if u >= n_users {
                return Err(Error::Index { what: "users", index: u, len: n_users });
            }
            if i >= n_items {
                return Err(Error::Index { what: "items", index: i, len: n_items });
            }
            if !seen.insert((u, i)) {
                return Err(Error::Config(format!("duplicate interaction ({u}, {i})")));
            }
            interactions.push((u, i));
            assignment.push(s);
        }
        let mut ds = Self::build(
            Vocabulary::dense(n_users),
            Vocabulary::dense(n_items),
            interactions,
            0,
        );
        ds.assign(assignment);
        Ok(ds)
    }

    pub fn parse(reader: impl BufRead, format: TsvFormat) -> Result<Self> {
        let mut users = Vocabulary::default();
        let mut items = Vocabulary::default();
        let mut seen = HashSet::new();
        let mut interactions = Vec::new();
        let mut dups = 0;
        for (lineno, line) in reader.lines().enumerate() {
            let line_no = lineno + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            let bad = |message: String| Error::Parse { line: line_no, message };
            match format {
                TsvFormat::TsvPairs if fields.len() != 2 => {
                    return Err(bad(format!("expected 2 tab-separated fields, found {}", fields.len())));
                }
                TsvFormat::TsvRated if !(3..=4).contains(&fields.len()) => {
                    return Err(bad(format!("expected 3 or 4 tab-separated fields, found {}", fields.len())));
                }
                TsvFormat::TsvRated => {
                    fields[2]
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| bad(format!("rating '{}' is not a number", fields[2])))?;
                }
                TsvFormat::TsvPairs => {}
            }
            let (u_raw, i_raw) = (fields[0].trim(), fields[1].trim());
            if u_raw.is_empty() || i_raw.is_empty() {
                return Err(bad("empty user or item id".into()));
            }
            let u = users.intern(u_raw);
            let i = items.intern(i_raw);
            if seen.insert((u, i)) {
                interactions.push((u, i));
            } else {
                dups += 1;
            }
        }
        Ok(Self::build(users, items, interactions, dups))
    }

    /// Reads an interaction file; IDs are remapped in first-seen order and
    /// duplicate pairs dropped (see [`duplicates_dropped`](Self::duplicates_dropped)).
    pub fn load(path: impl AsRef<Path>, format: TsvFormat) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(file), format)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn interactions(&self) -> &[(usize, usize)] {
        &self.interactions
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    pub fn user_vocab(&self) -> &Vocabulary {
        &self.users
    }

    pub fn item_vocab(&self) -> &Vocabulary {
        &self.items
    }

    pub fn is_split(&self) -> bool {
        self.assignment.is_some()
    }

    pub fn assignment(&self) -> Option<&[Split]> {
        self.assignment.as_deref()
    }

    /// Training interactions; empty until the dataset is split.
    pub fn train_pairs(&self) -> &[(usize, usize)] {
        &self.train_pairs
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.assignment
            .as_ref()
            .map_or(0, |a| a.iter().filter(|&&s| s == split).count())
    }

    /// Sorted items of `user` in `split`.
    pub fn items_of(&self, split: Split, user: usize) -> &[usize] {
        self.by_user[split_slot(split)]
            .get(user)
            .map_or(&[], Vec::as_slice)
    }

    fn assign(&mut self, assignment: Vec<Split>) {
        let mut by_user: [Vec<Vec<usize>>; 3] = Default::default();
        for slot in by_user.iter_mut() {
            *slot = vec![Vec::new(); self.n_users];
        }
        let mut train_pairs = Vec::new();
        for (&(u, i), &s) in self.interactions.iter().zip(&assignment) {
            by_user[split_slot(s)][u].push(i);
            if s == Split::Train {
                train_pairs.push((u, i));
            }
        }
        for slot in by_user.iter_mut() {
            for items in slot.iter_mut() {
                items.sort_unstable();
            }
        }
        self.by_user = by_user;
        self.train_pairs = train_pairs;
        self.assignment = Some(assignment);
    }

    /// Random split: train gets ⌊r₀·N⌋, validation ⌊r₁·N⌋, test the remainder.
    pub fn split(&self, ratios: (f64, f64, f64), seed: u64) -> Result<Self> {
        let (a, b, c) = ratios;
        if !(a > 0.0 && b > 0.0 && c > 0.0) || (a + b + c - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must be positive and sum to 1, got ({a}, {b}, {c})"
            )));
        }
        let n = self.interactions.len();
        // The epsilon keeps e.g. 0.29 * 100 from flooring to 28.
        let n_train = (a * n as f64 + 1e-9).floor() as usize;
        let n_val = (b * n as f64 + 1e-9).floor() as usize;
        if n_train == 0 || n_val == 0 || n_train + n_val >= n {
            return Err(Error::Split(format!(
                "{n} interactions cannot fill three nonempty splits with ratios ({a}, {b}, {c})"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut assignment = vec![Split::Test; n];
        for (rank, &idx) in order.iter().enumerate() {
            assignment[idx] = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
        let mut out = self.clone();
        out.assign(assignment);
        Ok(out)
    }
}

/// `(u, i, i′)` triplets for pairwise losses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletBatch {
    pub users: Vec<usize>,
    pub pos_items: Vec<usize>,
    pub neg_items: Vec<usize>,
}

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

/// One positive and `k` sampled negatives per example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetBatch {
    pub users: Vec<usize>,
    pub pos_items: Vec<usize>,
    pub neg_items: Vec<Vec<usize>>,
}

impl SetBatch {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn k(&self) -> usize {
        self.neg_items.first().map_or(0, Vec::len)
    }
}

/// Observed `(u, i)` pairs, as consumed by the alignment-based losses.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairBatch {
    pub users: Vec<usize>,
    pub items: Vec<usize>,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

impl From<&TripletBatch> for PairBatch {
    fn from(b: &TripletBatch) -> Self {
        PairBatch {
            users: b.users.clone(),
            items: b.pos_items.clone(),
        }
    }
}

/// Seeded sampler over the training split.
///
/// Positives are drawn uniformly (with replacement) from training
/// interactions; negatives uniformly from all items with no filtering of
/// observed pairs, so false negatives are possible. Not meant to be shared
/// between threads: give each worker its own.
pub struct Sampler<'a> {
    ds: &'a InteractionDataset,
    rng: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    pub fn new(ds: &'a InteractionDataset, seed: u64) -> Result<Self> {
        if ds.train_pairs().is_empty() {
            return Err(Error::Split("training split is empty".into()));
        }
        Ok(Self {
            ds,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn pairs(&mut self, batch_size: usize) -> PairBatch {
        let train = self.ds.train_pairs();
        let mut out = PairBatch::default();
        for _ in 0..batch_size {
            let (u, i) = train[self.rng.random_range(0..train.len())];
            out.users.push(u);
            out.items.push(i);
        }
        out
    }

    pub fn triplets(&mut self, batch_size: usize) -> TripletBatch {
        let n_items = self.ds.n_items();
        let train = self.ds.train_pairs();
        let mut b = TripletBatch {
            users: Vec::with_capacity(batch_size),
            pos_items: Vec::with_capacity(batch_size),
            neg_items: Vec::with_capacity(batch_size),
        };
        for _ in 0..batch_size {
            let (u, i) = train[self.rng.random_range(0..train.len())];
            b.users.push(u);
            b.pos_items.push(i);
            b.neg_items.push(self.rng.random_range(0..n_items));
        }
        b
    }

    pub fn sets(&mut self, batch_size: usize, k: usize) -> SetBatch {
        let n_items = self.ds.n_items();
        let train = self.ds.train_pairs();
        let mut b = SetBatch {
            users: Vec::with_capacity(batch_size),
            pos_items: Vec::with_capacity(batch_size),
            neg_items: Vec::with_capacity(batch_size),
        };
        for _ in 0..batch_size {
            let (u, i) = train[self.rng.random_range(0..train.len())];
            b.users.push(u);
            b.pos_items.push(i);
            b.neg_items
                .push((0..k).map(|_| self.rng.random_range(0..n_items)).collect());
        }
        b
    }
}

pub fn sample_triplets(ds: &InteractionDataset, batch_size: usize, seed: u64) -> Result<TripletBatch> {
    Ok(Sampler::new(ds, seed)?.triplets(batch_size))
}

pub fn sample_set_batch(
    ds: &InteractionDataset,
    batch_size: usize,
    k: usize,
    seed: u64,
) -> Result<SetBatch> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    Ok(Sampler::new(ds, seed)?.sets(batch_size, k))
}

/// Parameters of the block-structured synthetic interaction log.
///
/// Users and items are cut into `n_blocks` contiguous groups. A user
/// interacts with an item of its own group with probability `p_in` scaled by
/// an item popularity weight that decays linearly across the group from 1 to
/// `1 - popularity_skew`, and with any other item with probability `p_out`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub popularity_skew: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_users: 500,
            n_items: 500,
            n_blocks: 25,
            p_in: 0.6,
            p_out: 0.005,
            popularity_skew: 0.8,
            seed: 20240901,
        }
    }
}

impl SyntheticConfig {
    /// Raw `(user, item)` ID pairs in generation order.
    pub fn generate(&self) -> Result<Vec<(String, String)>> {
        if self.n_users == 0 || self.n_items == 0 || self.n_blocks == 0 {
            return Err(Error::Config("synthetic sizes must be positive".into()));
        }
        if self.n_blocks > self.n_users.min(self.n_items) {
            return Err(Error::Config("more blocks than users or items".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let block_of = |idx: usize, n: usize| idx * self.n_blocks / n;
        let block_start = |b: usize, n: usize| (b * n).div_ceil(self.n_blocks);
        let mut out = Vec::new();
        for u in 0..self.n_users {
            let ub = block_of(u, self.n_users);
            let start = block_start(ub, self.n_items);
            let end = block_start(ub + 1, self.n_items);
            let width = (end - start).max(1) as f64;
            for i in 0..self.n_items {
                let p = if block_of(i, self.n_items) == ub {
                    let pos = (i - start) as f64 / width;
                    self.p_in * (1.0 - self.popularity_skew * pos)
                } else {
                    self.p_out
                };
                if rng.random::<f64>() < p {
                    out.push((format!("u{u}"), format!("i{i}")));
                }
            }
        }
        Ok(out)
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<usize> {
        let path = path.as_ref();
        let pairs = self.generate()?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        writeln!(
            f,
            "# synthetic block interactions: {} users, {} items, {} blocks, p_in={}, p_out={}, skew={}, seed={}",
            self.n_users, self.n_items, self.n_blocks, self.p_in, self.p_out, self.popularity_skew, self.seed
        )
        .map_err(io)?;
        for (u, i) in &pairs {
            writeln!(f, "{u}\t{i}").map_err(io)?;
        }
        f.flush().map_err(io)?;
        Ok(pairs.len())
    }

    pub fn dataset(&self) -> Result<InteractionDataset> {
        let mut users = Vocabulary::default();
        let mut items = Vocabulary::default();
        let mut seen = HashMap::new();
        let mut interactions = Vec::new();
        for (u, i) in self.generate()? {
            let key = (users.intern(&u), items.intern(&i));
            if let Entry::Vacant(e) = seen.entry(key) {
                e.insert(());
                interactions.push(key);
            }
        }
        Ok(InteractionDataset::build(users, items, interactions, 0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, f: TsvFormat) -> Result<InteractionDataset> {
        InteractionDataset::parse(s.as_bytes(), f)
    }

    #[test]
    fn remaps_in_first_seen_order() {
        let ds = parse("a\tx\na\ty\nb\tx\n", TsvFormat::TsvPairs).unwrap();
        assert_eq!(ds.n_users(), 2);
        assert_eq!(ds.n_items(), 2);
        assert_eq!(ds.interactions(), &[(0, 0), (0, 1), (1, 0)]);
        assert_eq!(ds.user_vocab().raw(1), Some("b"));
        assert_eq!(ds.item_vocab().get("y"), Some(1));
    }

    #[test]
    fn drops_duplicates() {
        let ds = parse("a\tx\na\tx\n", TsvFormat::TsvPairs).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.duplicates_dropped(), 1);
    }

    #[test]
    fn rated_format_ignores_rating_and_timestamp() {
        let ds = parse("# header\n1\t10\t4\t881250949\n2\t10\t3.5\n\n", TsvFormat::TsvRated).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.n_items(), 1);
    }

    #[test]
    fn malformed_lines_report_line_number() {
        match parse("a\tx\nb\n", TsvFormat::TsvPairs) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse("# c\na\tx\tfive\n", TsvFormat::TsvRated) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            InteractionDataset::load("/nonexistent/file.tsv", TsvFormat::TsvPairs),
            Err(Error::Io { .. })
        ));
    }

    fn chain(n: usize) -> InteractionDataset {
        let text: String = (0..n).map(|k| format!("u{}\ti{}\n", k % 37, k)).collect();
        parse(&text, TsvFormat::TsvPairs).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = chain(10).split((0.8, 0.1, 0.1), 3).unwrap();
        assert_eq!(
            (ds.split_len(Split::Train), ds.split_len(Split::Val), ds.split_len(Split::Test)),
            (8, 1, 1)
        );
        let again = chain(10).split((0.8, 0.1, 0.1), 3).unwrap();
        assert_eq!(ds.assignment(), again.assignment());

        let big = chain(1000).split((0.8, 0.1, 0.1), 9).unwrap();
        assert!(big.split_len(Split::Train).abs_diff(800) <= 1);
        assert!(big.split_len(Split::Val).abs_diff(100) <= 1);
        assert!(big.split_len(Split::Test).abs_diff(100) <= 1);
    }

    #[test]
    fn split_partitions_interactions() {
        let ds = chain(200).split((0.8, 0.1, 0.1), 1).unwrap();
        let mut seen = HashSet::new();
        for s in [Split::Train, Split::Val, Split::Test] {
            for u in 0..ds.n_users() {
                for &i in ds.items_of(s, u) {
                    assert!(seen.insert((u, i)), "overlap");
                }
            }
        }
        assert_eq!(seen.len(), ds.len());
    }

    #[test]
    fn split_errors() {
        assert!(matches!(chain(3).split((0.8, 0.1, 0.1), 0), Err(Error::Split(_))));
        assert!(matches!(chain(30).split((0.8, 0.3, 0.1), 0), Err(Error::Config(_))));
    }

    #[test]
    fn triplets_come_from_train() {
        let ds = chain(100).split((0.8, 0.1, 0.1), 2).unwrap();
        let b = sample_triplets(&ds, 4, 5).unwrap();
        assert_eq!(b.len(), 4);
        for (&u, &i) in b.users.iter().zip(&b.pos_items) {
            assert!(ds.items_of(Split::Train, u).binary_search(&i).is_ok());
        }
        assert_eq!(b, sample_triplets(&ds, 4, 5).unwrap());
    }

    #[test]
    fn single_item_negatives_equal_positive() {
        let ds = InteractionDataset::from_assigned(
            3,
            1,
            [(0, 0, Split::Train), (1, 0, Split::Val), (2, 0, Split::Test)],
        )
        .unwrap();
        let b = sample_triplets(&ds, 16, 1).unwrap();
        assert!(b.neg_items.iter().zip(&b.pos_items).all(|(n, p)| n == p));
    }

    #[test]
    fn set_batch_shapes_and_k1_reduction() {
        let ds = chain(100).split((0.8, 0.1, 0.1), 2).unwrap();
        let s = sample_set_batch(&ds, 8, 20, 4).unwrap();
        assert_eq!(s.neg_items.len(), 8);
        assert!(s.neg_items.iter().all(|l| l.len() == 20));

        // With k = 1 both pathways consume the generator identically.
        let s1 = sample_set_batch(&ds, 6, 1, 4).unwrap();
        let t = sample_triplets(&ds, 6, 4).unwrap();
        assert_eq!(s1.users, t.users);
        assert_eq!(s1.pos_items, t.pos_items);
        assert_eq!(s1.neg_items.iter().map(|l| l[0]).collect::<Vec<_>>(), t.neg_items);
    }

    #[test]
    fn negatives_are_uniform() {
        // 100 items, 1e5 draws: each count is Binomial(1e5, 0.01), sd ≈ 31.5.
        let rows = (0..100).map(|i| (0usize, i, if i < 80 { Split::Train } else if i < 90 { Split::Val } else { Split::Test }));
        let ds = InteractionDataset::from_assigned(1, 100, rows).unwrap();
        let n = 100_000;
        let sd = (n as f64 * 0.01 * 0.99).sqrt();
        let mut counts = [0usize; 100];
        for i in sample_triplets(&ds, n, 77).unwrap().neg_items {
            counts[i] += 1;
        }
        assert!(counts.iter().all(|&c| (c as f64 - 1000.0).abs() < 3.0 * sd));
        let mut counts = [0usize; 100];
        for l in sample_set_batch(&ds, n / 10, 10, 78).unwrap().neg_items {
            for i in l {
                counts[i] += 1;
            }
        }
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0).sum();
        // 99 dof: mean 99, sd ≈ 14; 3σ envelope.
        assert!(chi2 < 99.0 + 3.0 * (2.0f64 * 99.0).sqrt(), "chi2 = {chi2}");
    }

    #[test]
    fn synthetic_is_deterministic_and_blocky() {
        let cfg = SyntheticConfig {
            n_users: 60,
            n_items: 60,
            n_blocks: 3,
            ..Default::default()
        };
        let a = cfg.generate().unwrap();
        assert_eq!(a, cfg.generate().unwrap());
        let in_block = a
            .iter()
            .filter(|(u, i)| {
                let u: usize = u[1..].parse().unwrap();
                let i: usize = i[1..].parse().unwrap();
                u / 20 == i / 20
            })
            .count();
        assert!(in_block as f64 > 0.7 * a.len() as f64);
    }
}
