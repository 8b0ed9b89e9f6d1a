//! Dataset ingestion and slicing: LIBSVM parsing, train/test splits, disjoint
//! shard partitions, optional standardization, and a flat binary cache.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Magic bytes prefixing the binary dataset cache.
pub const CACHE_MAGIC: &[u8; 4] = b"MDD1";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("input contains no samples")]
    EmptyInput,
    #[error("shard count must satisfy 1 <= m <= {n}, got {m}")]
    BadShardCount { m: usize, n: usize },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("training set must be non-empty")]
    EmptyTrain,
    #[error("feature dimension mismatch: {expected} vs {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shards must disjointly cover all sample indices")]
    BadShards,
    #[error("invalid cache file: {0}")]
    BadCache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense regression dataset: an `N x d` feature matrix plus `N` scalar
/// targets. All values are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    targets: Array1<f64>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, targets: Array1<f64>) -> Result<Self, DataError> {
        if features.nrows() != targets.len() {
            return Err(DataError::DimensionMismatch {
                expected: features.nrows(),
                got: targets.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) || targets.iter().any(|v| !v.is_finite()) {
            return Err(DataError::BadCache("non-finite value in dataset".into()));
        }
        Ok(Dataset { features, targets })
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn targets(&self) -> ArrayView1<'_, f64> {
        self.targets.view()
    }

    /// Row-gather a sub-dataset.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let d = self.dim();
        let mut features = Array2::zeros((indices.len(), d));
        let mut targets = Array1::zeros(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            features.row_mut(r).assign(&self.features.row(i));
            targets[r] = self.targets[i];
        }
        Dataset { features, targets }
    }
}

/// Parse the LIBSVM text format: one sample per line,
/// `label index:value index:value ...` with 1-based, strictly increasing
/// indices. Unmentioned columns are zero; the feature dimension is the
/// largest index seen anywhere in the input. Blank lines are skipped.
pub fn parse_libsvm<R: Read>(reader: R) -> Result<Dataset, DataError> {
    let reader = BufReader::new(reader);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        let Some(first) = tokens.next() else {
            continue; // blank line
        };
        let label: f64 = first.parse().map_err(|_| DataError::Parse {
            line: lineno,
            msg: format!("invalid label '{first}'"),
        })?;
        if !label.is_finite() {
            return Err(DataError::Parse {
                line: lineno,
                msg: format!("non-finite label '{first}'"),
            });
        }
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut prev_index = 0usize;
        for tok in tokens {
            let (idx_str, val_str) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line: lineno,
                msg: format!("malformed feature token '{tok}'"),
            })?;
            let index: usize = idx_str.parse().map_err(|_| DataError::Parse {
                line: lineno,
                msg: format!("invalid feature index '{idx_str}'"),
            })?;
            if index == 0 {
                return Err(DataError::Parse {
                    line: lineno,
                    msg: "feature index must be >= 1".into(),
                });
            }
            if index <= prev_index {
                return Err(DataError::Parse {
                    line: lineno,
                    msg: format!("feature indices must be strictly increasing ({index} after {prev_index})"),
                });
            }
            let value: f64 = val_str.parse().map_err(|_| DataError::Parse {
                line: lineno,
                msg: format!("invalid feature value '{val_str}'"),
            })?;
            if !value.is_finite() {
                return Err(DataError::Parse {
                    line: lineno,
                    msg: format!("non-finite feature value '{val_str}'"),
                });
            }
            prev_index = index;
            max_index = max_index.max(index);
            row.push((index - 1, value));
        }
        labels.push(label);
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(DataError::EmptyInput);
    }
    let n = rows.len();
    let mut features = Array2::zeros((n, max_index));
    for (r, row) in rows.iter().enumerate() {
        for &(col, val) in row {
            features[[r, col]] = val;
        }
    }
    Dataset::new(features, Array1::from_vec(labels))
}

pub fn parse_libsvm_str(text: &str) -> Result<Dataset, DataError> {
    parse_libsvm(text.as_bytes())
}

pub fn load_libsvm<P: AsRef<Path>>(path: P) -> Result<Dataset, DataError> {
    parse_libsvm(std::fs::File::open(path)?)
}

/// Serialize densely (every column written, zeros included) so that
/// parse -> serialize -> parse reproduces the dataset exactly, including
/// trailing all-zero columns.
pub fn to_libsvm_string(ds: &Dataset) -> String {
    let mut out = String::new();
    for r in 0..ds.n_samples() {
        out.push_str(&format!("{}", ds.targets[r]));
        for c in 0..ds.dim() {
            out.push_str(&format!(" {}:{}", c + 1, ds.features[[r, c]]));
        }
        out.push('\n');
    }
    out
}

/// Write the flat binary cache: magic `MDD1`, then `N` and `d` as 64-bit
/// little-endian integers, then the row-major features, then the targets.
pub fn write_cache<W: Write>(mut w: W, ds: &Dataset) -> Result<(), DataError> {
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&(ds.n_samples() as u64).to_le_bytes())?;
    w.write_all(&(ds.dim() as u64).to_le_bytes())?;
    for v in ds.features.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in ds.targets.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_cache<R: Read>(mut r: R) -> Result<Dataset, DataError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(DataError::BadCache("bad magic bytes".into()));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let n = u64::from_le_bytes(buf8) as usize;
    r.read_exact(&mut buf8)?;
    let d = u64::from_le_bytes(buf8) as usize;
    let mut read_f64s = |count: usize| -> Result<Vec<f64>, DataError> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut buf8)?;
            out.push(f64::from_le_bytes(buf8));
        }
        Ok(out)
    };
    let features = read_f64s(n * d)?;
    let targets = read_f64s(n)?;
    let features = Array2::from_shape_vec((n, d), features)
        .map_err(|e| DataError::BadCache(e.to_string()))?;
    Dataset::new(features, Array1::from_vec(targets))
}

/// Disjoint assignment of sample indices to `m` shards. Shard sizes differ
/// by at most one; per-shard computations always use the shard's true size,
/// so unequal shards stay correctly normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub shards: Vec<Vec<usize>>,
    pub seed: u64,
}

impl Partition {
    pub fn m(&self) -> usize {
        self.shards.len()
    }

    /// Build a partition from explicit index lists. Validates that the lists
    /// are non-empty, pairwise disjoint, cover `0..N`, and are balanced to
    /// within one sample. The stored seed is zero (no RNG was involved).
    pub fn from_shards(shards: Vec<Vec<usize>>) -> Result<Self, DataError> {
        if shards.is_empty() || shards.iter().any(|s| s.is_empty()) {
            return Err(DataError::BadShards);
        }
        let n: usize = shards.iter().map(|s| s.len()).sum();
        let mut seen = vec![false; n];
        for &i in shards.iter().flatten() {
            if i >= n || seen[i] {
                return Err(DataError::BadShards);
            }
            seen[i] = true;
        }
        let min = shards.iter().map(|s| s.len()).min().unwrap();
        let max = shards.iter().map(|s| s.len()).max().unwrap();
        if max - min > 1 {
            return Err(DataError::BadShards);
        }
        Ok(Partition { shards, seed: 0 })
    }
}

/// Randomly partition the sample indices into `m` disjoint shards: a seeded
/// uniform permutation followed by round-robin assignment, so shard sizes
/// differ by at most one and the result is deterministic per seed.
pub fn partition(ds: &Dataset, m: usize, seed: u64) -> Result<Partition, DataError> {
    let n = ds.n_samples();
    if m == 0 || m > n {
        return Err(DataError::BadShardCount { m, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut shards = vec![Vec::with_capacity(n / m + 1); m];
    for (pos, idx) in order.into_iter().enumerate() {
        shards[pos % m].push(idx);
    }
    Ok(Partition { shards, seed })
}

/// Split into disjoint train/test subsets of sizes
/// `round(train_fraction * N)` and the remainder, deterministically per seed.
pub fn split_train_test(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    if train_fraction <= 0.0 || train_fraction >= 1.0 || train_fraction.is_nan() {
        return Err(DataError::BadFraction(train_fraction));
    }
    let n = ds.n_samples();
    if n < 2 {
        return Err(DataError::TooFewSamples { need: 2, got: n });
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let (train_idx, test_idx) = order.split_at(n_train);
    Ok((ds.select(train_idx), ds.select(test_idx)))
}

/// Per-column statistics produced by [`standardize`]. The standard deviation
/// uses the population convention (divide by N, not N-1).
#[derive(Debug, Clone)]
pub struct StandardizeStats {
    pub mean: Array1<f64>,
    pub std_dev: Array1<f64>,
}

/// Center every training column and scale to unit variance where the column
/// varies; zero-variance columns are centered only. The test set is
/// transformed with the training statistics.
pub fn standardize(
    train: &Dataset,
    test: &Dataset,
) -> Result<(Dataset, Dataset, StandardizeStats), DataError> {
    if train.n_samples() == 0 {
        return Err(DataError::EmptyTrain);
    }
    if train.dim() != test.dim() {
        return Err(DataError::DimensionMismatch {
            expected: train.dim(),
            got: test.dim(),
        });
    }
    let n = train.n_samples() as f64;
    let d = train.dim();
    let mut mean = Array1::zeros(d);
    let mut std_dev = Array1::zeros(d);
    for c in 0..d {
        let col = train.features.column(c);
        let mu = col.sum() / n;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        mean[c] = mu;
        std_dev[c] = var.sqrt();
    }
    let stats = StandardizeStats { mean, std_dev };
    let transform = |ds: &Dataset| {
        let mut features = ds.features.clone();
        for c in 0..d {
            let mu = stats.mean[c];
            let sd = stats.std_dev[c];
            for v in features.column_mut(c).iter_mut() {
                *v -= mu;
                if sd > 0.0 {
                    *v /= sd;
                }
            }
        }
        Dataset {
            features,
            targets: ds.targets.clone(),
        }
    };
    let out = (transform(train), transform(test));
    Ok((out.0, out.1, stats))
}

/// Gather the per-shard sample blocks: for each shard, its `n_i x d` feature
/// rows and `n_i` targets, in shard-index order.
pub fn gather_shards(ds: &Dataset, part: &Partition) -> Vec<(Array2<f64>, Array1<f64>)> {
    part.shards
        .iter()
        .map(|idx| {
            let sub = ds.select(idx);
            (sub.features, sub.targets)
        })
        .collect()
}

/// Configuration for [`synthetic_regression`].
///
/// Latent factors are equicorrelated Gaussians (`correlation` in `[0, 1)`
/// controls collinearity); the stored features are the factors blown up by
/// per-column scales spanning `scale_spread` decades, mimicking raw,
/// unnormalized measurements. Targets are a fixed linear signal on the
/// latent factors plus an optional pairwise interaction term and Gaussian
/// label noise, so the target stays O(1) and exactly realizable as a linear
/// function of the stored features.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    pub noise_std: f64,
    pub correlation: f64,
    pub nonlinearity: f64,
    /// log10 span of per-feature scales; 0 keeps all features at unit scale.
    pub scale_spread: f64,
    /// Heavy-tail strength: each row's latent magnitude is multiplied by a
    /// log-normal factor `exp(tail * g)`, `g ~ N(0,1)`. 0 keeps rows
    /// homogeneous; around 1 a handful of high-leverage rows dominate.
    pub tail: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n: usize, d: usize, noise_std: f64, seed: u64) -> Self {
        SynthConfig {
            n,
            d,
            noise_std,
            correlation: 0.0,
            nonlinearity: 0.0,
            scale_spread: 0.0,
            tail: 0.0,
            seed,
        }
    }
}

/// Deterministic synthetic regression data for demos and tests.
pub fn synthetic_regression(cfg: &SynthConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.d;
    let w: Array1<f64> = Array1::from_shape_fn(d, |_| normal(&mut rng));
    let rho = cfg.correlation.clamp(0.0, 0.999_999);
    let shared_w = rho.sqrt();
    let own_w = (1.0 - rho).sqrt();
    let scales: Vec<f64> = (0..d)
        .map(|c| {
            if d > 1 {
                10f64.powf(cfg.scale_spread * c as f64 / (d - 1) as f64)
            } else {
                1.0
            }
        })
        .collect();
    let mut features = Array2::zeros((cfg.n, d));
    let mut targets = Array1::zeros(cfg.n);
    let mut latent = vec![0.0; d];
    for r in 0..cfg.n {
        let shared = normal(&mut rng);
        let leverage = if cfg.tail != 0.0 {
            (cfg.tail * normal(&mut rng)).exp()
        } else {
            1.0
        };
        for c in 0..d {
            latent[c] = leverage * (own_w * normal(&mut rng) + shared_w * shared);
            features[[r, c]] = scales[c] * latent[c];
        }
        let mut y = latent.iter().zip(w.iter()).map(|(z, wc)| z * wc).sum::<f64>();
        if cfg.nonlinearity != 0.0 && d >= 2 {
            y += cfg.nonlinearity * latent[0] * latent[1];
        }
        y += cfg.noise_std * normal(&mut rng);
        targets[r] = y;
    }
    Dataset { features, targets }
}

/// Standard normal via Box-Muller; two uniforms per draw keeps the stream
/// layout independent of caller interleaving.
fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = loop {
        let u = rng.random::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_single_line() {
        let ds = parse_libsvm_str("1 1:0.5 3:2\n").unwrap();
        assert_eq!(ds.n_samples(), 1);
        assert_eq!(ds.dim(), 3);
        assert_eq!(ds.features().row(0).to_vec(), vec![0.5, 0.0, 2.0]);
        assert_eq!(ds.targets()[0], 1.0);
    }

    #[test]
    fn parse_two_lines_mixed_columns() {
        let ds = parse_libsvm_str("-1 2:1\n0.5 1:1\n").unwrap();
        assert_eq!(ds.n_samples(), 2);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.features().row(0).to_vec(), vec![0.0, 1.0]);
        assert_eq!(ds.features().row(1).to_vec(), vec![1.0, 0.0]);
        assert_eq!(ds.targets().to_vec(), vec![-1.0, 0.5]);
    }

    #[test]
    fn parse_rejects_zero_index() {
        match parse_libsvm_str("1 0:1\n") {
            Err(DataError::Parse { line, msg }) => {
                assert_eq!(line, 1);
                assert!(msg.contains(">= 1"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_nonincreasing_indices() {
        match parse_libsvm_str("1 1:1 1:2\n") {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_libsvm_str("1 3:1 2:2\n").is_err());
    }

    #[test]
    fn parse_reports_line_numbers() {
        match parse_libsvm_str("1 1:1\n2 1:x\n") {
            Err(DataError::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains('x'));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_empty_input() {
        assert!(matches!(parse_libsvm_str(""), Err(DataError::EmptyInput)));
        assert!(matches!(
            parse_libsvm_str("\n  \n"),
            Err(DataError::EmptyInput)
        ));
    }

    #[test]
    fn parse_skips_blank_lines() {
        let ds = parse_libsvm_str("1 1:1\n\n2 1:2\n").unwrap();
        assert_eq!(ds.n_samples(), 2);
    }

    #[test]
    fn roundtrip_through_text() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = 1 + rng.random_range(0..8);
            let d = 1 + rng.random_range(0..6);
            let mut text = String::new();
            for _ in 0..n {
                text.push_str(&format!("{}", normal(&mut rng)));
                for c in 0..d {
                    if rng.random::<f64>() < 0.6 || c == d - 1 {
                        text.push_str(&format!(" {}:{}", c + 1, normal(&mut rng)));
                    }
                }
                text.push('\n');
            }
            let ds = parse_libsvm_str(&text).unwrap();
            let reparsed = parse_libsvm_str(&to_libsvm_string(&ds)).unwrap();
            assert_eq!(ds, reparsed);
        }
    }

    #[test]
    fn cache_roundtrip() {
        let ds = synthetic_regression(&SynthConfig::new(17, 4, 0.3, 5));
        let mut buf = Vec::new();
        write_cache(&mut buf, &ds).unwrap();
        assert_eq!(&buf[..4], CACHE_MAGIC);
        let back = read_cache(buf.as_slice()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn cache_rejects_bad_magic() {
        let err = read_cache(&b"XXXX\0\0\0\0"[..]);
        assert!(matches!(err, Err(DataError::BadCache(_))));
    }

    #[test]
    fn partition_small_cases() {
        let ds = synthetic_regression(&SynthConfig::new(4, 2, 0.0, 0));
        let p = partition(&ds, 2, 9).unwrap();
        assert_eq!(p.shards.len(), 2);
        assert!(p.shards.iter().all(|s| s.len() == 2));
        let mut all: Vec<usize> = p.shards.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);

        let ds5 = synthetic_regression(&SynthConfig::new(5, 2, 0.0, 0));
        let p5 = partition(&ds5, 2, 1).unwrap();
        let mut sizes: Vec<usize> = p5.shards.iter().map(|s| s.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 3]);
    }

    #[test]
    fn partition_single_shard_is_permutation() {
        let ds = synthetic_regression(&SynthConfig::new(6, 2, 0.0, 0));
        let p = partition(&ds, 1, 4).unwrap();
        assert_eq!(p.shards.len(), 1);
        let mut s = p.shards[0].clone();
        s.sort_unstable();
        assert_eq!(s, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn partition_rejects_bad_m() {
        let ds = synthetic_regression(&SynthConfig::new(3, 2, 0.0, 0));
        assert!(partition(&ds, 0, 0).is_err());
        assert!(partition(&ds, 4, 0).is_err());
    }

    #[test]
    fn partition_disjoint_cover_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let n = 1 + rng.random_range(0..40);
            let m = 1 + rng.random_range(0..n);
            let ds = synthetic_regression(&SynthConfig::new(n, 2, 0.0, 7));
            let p = partition(&ds, m, rng.random()).unwrap();
            let mut all: Vec<usize> = p.shards.iter().flatten().copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            let min = p.shards.iter().map(|s| s.len()).min().unwrap();
            let max = p.shards.iter().map(|s| s.len()).max().unwrap();
            assert!(max - min <= 1);
        }
    }

    #[test]
    fn partition_deterministic_per_seed() {
        let ds = synthetic_regression(&SynthConfig::new(20, 3, 0.1, 2));
        assert_eq!(partition(&ds, 4, 11).unwrap(), partition(&ds, 4, 11).unwrap());
        assert_ne!(partition(&ds, 4, 11).unwrap(), partition(&ds, 4, 12).unwrap());
    }

    #[test]
    fn from_shards_validates() {
        assert!(Partition::from_shards(vec![vec![0, 1], vec![2]]).is_ok());
        assert!(Partition::from_shards(vec![vec![0, 1], vec![1]]).is_err());
        assert!(Partition::from_shards(vec![vec![0, 1, 2], vec![3]]).is_err());
        assert!(Partition::from_shards(vec![vec![0], vec![]]).is_err());
    }

    #[test]
    fn split_sizes() {
        let ds = synthetic_regression(&SynthConfig::new(10, 2, 0.0, 0));
        let (tr, te) = split_train_test(&ds, 0.7, 3).unwrap();
        assert_eq!(tr.n_samples(), 7);
        assert_eq!(te.n_samples(), 3);

        let ds2 = synthetic_regression(&SynthConfig::new(2, 2, 0.0, 0));
        let (tr2, te2) = split_train_test(&ds2, 0.5, 3).unwrap();
        assert_eq!((tr2.n_samples(), te2.n_samples()), (1, 1));
    }

    #[test]
    fn split_deterministic_and_disjoint() {
        let ds = synthetic_regression(&SynthConfig::new(23, 3, 0.2, 8));
        let (a_tr, a_te) = split_train_test(&ds, 0.7, 42).unwrap();
        let (b_tr, b_te) = split_train_test(&ds, 0.7, 42).unwrap();
        assert_eq!(a_tr, b_tr);
        assert_eq!(a_te, b_te);
        // disjoint union: every original row appears exactly once
        let mut rows: Vec<Vec<u64>> = Vec::new();
        for src in [&a_tr, &a_te] {
            for r in 0..src.n_samples() {
                let mut key: Vec<u64> = src
                    .features()
                    .row(r)
                    .iter()
                    .map(|v| v.to_bits())
                    .collect();
                key.push(src.targets()[r].to_bits());
                rows.push(key);
            }
        }
        rows.sort();
        let mut orig: Vec<Vec<u64>> = (0..ds.n_samples())
            .map(|r| {
                let mut key: Vec<u64> =
                    ds.features().row(r).iter().map(|v| v.to_bits()).collect();
                key.push(ds.targets()[r].to_bits());
                key
            })
            .collect();
        orig.sort();
        assert_eq!(rows, orig);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let ds = synthetic_regression(&SynthConfig::new(10, 2, 0.0, 0));
        assert!(split_train_test(&ds, 0.0, 0).is_err());
        assert!(split_train_test(&ds, 1.0, 0).is_err());
        assert!(split_train_test(&ds, -0.2, 0).is_err());
    }

    #[test]
    fn standardize_basic_column() {
        let train = Dataset::new(
            Array2::from_shape_vec((2, 1), vec![1.0, 3.0]).unwrap(),
            Array1::from_vec(vec![0.0, 0.0]),
        )
        .unwrap();
        let test = Dataset::new(
            Array2::from_shape_vec((1, 1), vec![2.0]).unwrap(),
            Array1::from_vec(vec![0.0]),
        )
        .unwrap();
        let (tr, te, stats) = standardize(&train, &test).unwrap();
        assert_eq!(stats.mean[0], 2.0);
        assert_eq!(stats.std_dev[0], 1.0);
        assert_eq!(tr.features().column(0).to_vec(), vec![-1.0, 1.0]);
        // test transformed with train statistics, not its own
        assert_eq!(te.features()[[0, 0]], 0.0);
    }

    #[test]
    fn standardize_constant_column_centered_only() {
        let train = Dataset::new(
            Array2::from_shape_vec((2, 1), vec![5.0, 5.0]).unwrap(),
            Array1::from_vec(vec![0.0, 0.0]),
        )
        .unwrap();
        let (tr, _, stats) = standardize(&train, &train).unwrap();
        assert_eq!(stats.std_dev[0], 0.0);
        assert_eq!(tr.features().column(0).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn gather_shards_matches_partition() {
        let ds = synthetic_regression(&SynthConfig::new(9, 3, 0.1, 6));
        let p = partition(&ds, 3, 1).unwrap();
        let shards = gather_shards(&ds, &p);
        assert_eq!(shards.len(), 3);
        for (shard, idx) in shards.iter().zip(&p.shards) {
            assert_eq!(shard.0.nrows(), idx.len());
            for (r, &i) in idx.iter().enumerate() {
                assert_eq!(shard.0.row(r), ds.features().row(i));
                assert_eq!(shard.1[r], ds.targets()[i]);
            }
        }
    }
}
