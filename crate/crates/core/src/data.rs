//! Household power-consumption ingestion, synthetic data, IID partitioning
//! and mini-batch sampling.

use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};

pub const FEATURES: usize = 6;

pub const HEADER: &str = "Date;Time;Global_active_power;Global_reactive_power;Voltage;\
Global_intensity;Sub_metering_1;Sub_metering_2;Sub_metering_3";

/// Fraction of a shard held out for local validation.
pub const VALIDATION_FRACTION: f64 = 0.20;

/// Malformed rows above this fraction abort ingestion.
pub const MALFORMED_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: [f64; FEATURES],
    pub target: f64,
}

impl Sample {
    pub fn new(features: [f64; FEATURES], target: f64) -> Self {
        Self { features, target }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MissingPolicy {
    /// Drop every row containing a `?`.
    #[default]
    DropRow,
}

/// Result of parsing the raw CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub samples: Vec<Sample>,
    pub raw_rows: usize,
    pub dropped_missing: usize,
    /// 1-based line numbers of rows that failed to parse (header is line 1).
    pub malformed: Vec<usize>,
}

impl Ingested {
    pub fn dropped_fraction(&self) -> f64 {
        if self.raw_rows == 0 {
            0.0
        } else {
            self.dropped_missing as f64 / self.raw_rows as f64
        }
    }
}

pub fn ingest_csv(path: &Path, policy: MissingPolicy) -> Result<Ingested> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(file), policy)
}

/// Parses the semicolon-separated format from any reader.
pub fn ingest_reader<R: BufRead>(reader: R, policy: MissingPolicy) -> Result<Ingested> {
    let MissingPolicy::DropRow = policy;
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::Parse(e.to_string()))?,
        None => return Err(Error::Empty("csv file has no header")),
    };
    let header = header.trim_start_matches('\u{feff}').trim_end();
    if header != HEADER {
        return Err(Error::Header {
            expected: HEADER.to_string(),
            found: header.to_string(),
        });
    }

    // column order in the file: 0 active, 1 reactive, 2 voltage, 3 intensity, 4..6 sub-metering
    let mut rows: Vec<[f64; 7]> = Vec::new();
    let mut raw_rows = 0;
    let mut dropped = 0;
    let mut malformed = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        raw_rows += 1;
        let lineno = idx + 2;
        let fields: Vec<&str> = line.split(';').collect();
        if fields.len() != 9 {
            malformed.push(lineno);
            continue;
        }
        if fields[2..].iter().any(|f| f.trim() == "?") {
            dropped += 1;
            continue;
        }
        let mut values = [0.0; 7];
        let mut ok = true;
        for (slot, field) in values.iter_mut().zip(&fields[2..]) {
            match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => *slot = v,
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            rows.push(values);
        } else {
            malformed.push(lineno);
        }
    }

    if raw_rows == 0 {
        return Err(Error::Empty("csv file has no data rows"));
    }
    if malformed.len() as f64 > MALFORMED_LIMIT * raw_rows as f64 {
        return Err(Error::Malformed {
            count: malformed.len(),
            total: raw_rows,
            rows: malformed.iter().take(20).copied().collect(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Empty("every row was dropped"));
    }

    let samples = normalize_rows(&rows);
    Ok(Ingested {
        samples,
        raw_rows,
        dropped_missing: dropped,
        malformed,
    })
}

fn normalize_rows(rows: &[[f64; 7]]) -> Vec<Sample> {
    let mut lo = [f64::INFINITY; 7];
    let mut hi = [f64::NEG_INFINITY; 7];
    for row in rows {
        for c in 0..7 {
            lo[c] = lo[c].min(row[c]);
            hi[c] = hi[c].max(row[c]);
        }
    }
    let scale = |c: usize, v: f64| {
        let range = hi[c] - lo[c];
        if range > 0.0 {
            ((v - lo[c]) / range).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    rows.iter()
        .map(|row| {
            let mut features = [0.0; FEATURES];
            for (j, f) in features.iter_mut().enumerate() {
                *f = scale(j + 1, row[j + 1]);
            }
            Sample::new(features, scale(0, row[0]))
        })
        .collect()
}

/// Cached, already-cleaned copy of an ingested file.
///
/// Cache files live at `<dir>/<sha256 of raw file>.samples.csv`:
///
/// ```text
/// # ldpfl-cache v1 sha256=<hex> raw_rows=<n> dropped=<n> malformed=<n>
/// f0,f1,f2,f3,f4,f5,target
/// 0.123,...
/// ```
///
/// Values are written in shortest round-trip form, so a cache hit is
/// bit-identical to re-parsing.
pub mod cache {
    use super::*;

    pub const VERSION_LINE: &str = "# ldpfl-cache v1";

    pub fn content_hash(path: &Path) -> Result<String> {
        let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        loop {
            let read = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
            if read == 0 {
                break;
            }
            hasher.update(&buf[..read]);
        }
        Ok(hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect())
    }

    pub fn cache_path(dir: &Path, hash: &str) -> PathBuf {
        dir.join(format!("{hash}.samples.csv"))
    }

    pub fn write(path: &Path, hash: &str, data: &Ingested) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!(
            "{VERSION_LINE} sha256={hash} raw_rows={} dropped={} malformed={}\n",
            data.raw_rows,
            data.dropped_missing,
            data.malformed.len()
        ));
        out.push_str("f0,f1,f2,f3,f4,f5,target\n");
        for s in &data.samples {
            for f in s.features {
                out.push_str(&format!("{f},"));
            }
            out.push_str(&format!("{}\n", s.target));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Ingested> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let meta = lines.next().ok_or(Error::Empty("cache file"))?;
        if !meta.starts_with(VERSION_LINE) {
            return Err(Error::Parse(format!("not a v1 cache file: {meta}")));
        }
        let field = |key: &str| -> Result<usize> {
            meta.split_whitespace()
                .find_map(|kv| kv.strip_prefix(key))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse(format!("cache header missing {key}")))
        };
        let raw_rows = field("raw_rows=")?;
        let dropped = field("dropped=")?;
        let malformed = field("malformed=")?;
        lines.next();
        let mut samples = Vec::new();
        for line in lines {
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<_>>()?;
            if vals.len() != FEATURES + 1 {
                return Err(Error::Parse(format!("cache row has {} fields", vals.len())));
            }
            let mut features = [0.0; FEATURES];
            features.copy_from_slice(&vals[..FEATURES]);
            samples.push(Sample::new(features, vals[FEATURES]));
        }
        Ok(Ingested {
            samples,
            raw_rows,
            dropped_missing: dropped,
            // line numbers are not cached, only the count
            malformed: vec![0; malformed],
        })
    }

    /// Ingests `path`, reusing `<dir>/<hash>.samples.csv` when present.
    pub fn ingest_cached(path: &Path, dir: &Path, policy: MissingPolicy) -> Result<Ingested> {
        let hash = content_hash(path)?;
        let cached = cache_path(dir, &hash);
        if cached.exists() {
            return read(&cached);
        }
        let data = ingest_csv(path, policy)?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(&cached, &hash, &data)?;
        Ok(data)
    }
}

/// Ground truth for synthetic regression data: `intercept + weights · x + noise`,
/// clamped to `[0, 1]`, with `x` uniform on `[0, 1]^6`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub weights: [f64; FEATURES],
    pub intercept: f64,
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            weights: [0.30, 0.10, 0.25, 0.10, 0.05, 0.05],
            intercept: 0.05,
            noise: 0.02,
        }
    }
}

impl SyntheticSpec {
    pub fn linear(&self, features: &[f64; FEATURES]) -> f64 {
        self.intercept
            + self
                .weights
                .iter()
                .zip(features)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }
}

pub fn synthesize(n_samples: usize, seed: u64) -> Result<Vec<Sample>> {
    synthesize_with(n_samples, seed, &SyntheticSpec::default())
}

pub fn synthesize_with(n_samples: usize, seed: u64, spec: &SyntheticSpec) -> Result<Vec<Sample>> {
    if n_samples == 0 {
        return Err(Error::param("n_samples", "must be positive"));
    }
    if !(spec.noise >= 0.0) {
        return Err(Error::param("noise", "must be non-negative"));
    }
    let mut rng = substream(seed, Purpose::Synthesize, 0, 0);
    let noise = Normal::new(0.0, spec.noise).expect("noise scale checked above");
    Ok((0..n_samples)
        .map(|_| {
            let mut features = [0.0; FEATURES];
            for f in features.iter_mut() {
                *f = rng.random::<f64>();
            }
            let clean = spec.linear(&features);
            let target = if spec.noise == 0.0 {
                clean
            } else {
                (clean + noise.sample(&mut rng)).clamp(0.0, 1.0)
            };
            Sample::new(features, target)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeShard {
    pub node_id: usize,
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
}

impl NodeShard {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn validation_count(size: usize) -> usize {
    (VALIDATION_FRACTION * size as f64).round() as usize
}

/// Shuffles `data` and deals it into `k` contiguous shards whose sizes differ
/// by at most one; the tail of each shard becomes its validation split.
pub fn partition(data: &[Sample], k: usize, seed: u64) -> Result<Vec<NodeShard>> {
    if k == 0 {
        return Err(Error::param("K", "must be at least 1"));
    }
    if data.len() < k {
        return Err(Error::param(
            "K",
            format!("{} samples cannot fill {k} shards", data.len()),
        ));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut substream(seed, Purpose::Partition, 0, 0));

    let base = data.len() / k;
    let extra = data.len() % k;
    let mut shards = Vec::with_capacity(k);
    let mut cursor = 0;
    for node_id in 0..k {
        let size = base + usize::from(node_id < extra);
        let idx = &order[cursor..cursor + size];
        cursor += size;
        let n_val = validation_count(size);
        let split = size - n_val;
        shards.push(NodeShard {
            node_id,
            train: idx[..split].iter().map(|&i| data[i]).collect(),
            validation: idx[split..].iter().map(|&i| data[i]).collect(),
        });
    }
    Ok(shards)
}

/// Node shards plus the server-side validation split used by accuracy
/// detection.
#[derive(Debug, Clone)]
pub struct FederatedData {
    pub shards: Vec<NodeShard>,
    pub server_validation: Vec<Sample>,
    /// Union of every node's validation split, in node order.
    pub pooled_validation: Vec<Sample>,
}

impl FederatedData {
    /// Holds out `server_fraction` of `data` for the server, then partitions
    /// the rest across `k` nodes.
    pub fn build(data: &[Sample], k: usize, server_fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&server_fraction) {
            return Err(Error::param("server_fraction", "must be in [0, 1)"));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut substream(seed, Purpose::Partition, u64::MAX, 0));
        let n_server = (server_fraction * data.len() as f64).round() as usize;
        let server_validation: Vec<Sample> = order[..n_server].iter().map(|&i| data[i]).collect();
        let rest: Vec<Sample> = order[n_server..].iter().map(|&i| data[i]).collect();
        let shards = partition(&rest, k, seed)?;
        let pooled_validation = shards
            .iter()
            .flat_map(|s| s.validation.iter().copied())
            .collect();
        Ok(Self {
            shards,
            server_validation,
            pooled_validation,
        })
    }
}

/// Epoch-wise shuffled mini-batches over one shard's training split.
#[derive(Debug)]
pub struct BatchSampler<'a> {
    data: &'a [Sample],
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl<'a> BatchSampler<'a> {
    pub fn new(data: &'a [Sample], batch_size: usize, rng: ChaCha8Rng) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("training split"));
        }
        if batch_size == 0 {
            return Err(Error::param("batch_size", "must be positive"));
        }
        let mut sampler = Self {
            data,
            batch_size,
            order: (0..data.len()).collect(),
            cursor: 0,
            rng,
        };
        sampler.order.shuffle(&mut sampler.rng);
        Ok(sampler)
    }

    /// Next batch; the last batch of an epoch may be short.
    pub fn next_batch(&mut self) -> Vec<Sample> {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = self.order[self.cursor..end]
            .iter()
            .map(|&i| self.data[i])
            .collect();
        self.cursor = end;
        batch
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn row(vals: &str) -> String {
        format!("16/12/2006;17:24:00;{vals}")
    }

    fn csv(rows: &[String]) -> String {
        let mut s = String::from(HEADER);
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    #[test]
    fn drops_missing_rows_and_normalizes() {
        let text = csv(&[
            row("4.216;0.418;234.840;18.400;0.000;1.000;17.000"),
            row("?;?;?;?;?;?;"),
            row("5.360;0.436;233.630;23.000;0.000;1.000;16.000"),
            row("3.666;0.528;235.680;15.800;0.000;2.000;17.000"),
        ]);
        let out = ingest_reader(Cursor::new(text), MissingPolicy::DropRow).unwrap();
        assert_eq!(out.raw_rows, 4);
        assert_eq!(out.dropped_missing, 1);
        assert_eq!(out.samples.len(), 3);
        assert!(out.malformed.is_empty());
        // active power 5.360 is the max, 3.666 the min
        assert_eq!(out.samples[1].target, 1.0);
        assert_eq!(out.samples[2].target, 0.0);
        // Sub_metering_1 is constant: degenerate column maps to 0
        assert!(out.samples.iter().all(|s| s.features[3] == 0.0));
        for j in [0, 1, 2, 4, 5] {
            let col: Vec<f64> = out.samples.iter().map(|s| s.features[j]).collect();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!((lo, hi), (0.0, 1.0), "column {j}");
        }
    }

    #[test]
    fn no_missing_rows_keeps_everything() {
        let text = csv(&[
            row("1;2;3;4;5;6;7"),
            row("2;3;4;5;6;7;8"),
            row("3;4;5;6;7;8;9"),
        ]);
        let out = ingest_reader(Cursor::new(text), MissingPolicy::DropRow).unwrap();
        assert_eq!(out.samples.len(), out.raw_rows);
    }

    #[test]
    fn constant_columns_normalize_to_zero() {
        let text = csv(&[row("1;1;1;1;1;1;1"), row("1;1;1;1;1;1;1"), row("1;1;1;1;1;1;1")]);
        let out = ingest_reader(Cursor::new(text), MissingPolicy::DropRow).unwrap();
        for s in &out.samples {
            assert_eq!(s.target, 0.0);
            assert_eq!(s.features, [0.0; FEATURES]);
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(
            ingest_reader(Cursor::new(""), MissingPolicy::DropRow),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            ingest_reader(Cursor::new(csv(&[])), MissingPolicy::DropRow),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let text = "a;b;c\n1;2;3\n";
        assert!(matches!(
            ingest_reader(Cursor::new(text), MissingPolicy::DropRow),
            Err(Error::Header { .. })
        ));
    }

    #[test]
    fn too_many_malformed_rows_report_line_numbers() {
        let mut rows: Vec<String> = (0..18).map(|_| row("1;2;3;4;5;6;7")).collect();
        rows.push(row("x;2;3;4;5;6;7"));
        rows.push("garbage".to_string());
        match ingest_reader(Cursor::new(csv(&rows)), MissingPolicy::DropRow) {
            Err(Error::Malformed { count, total, rows }) => {
                assert_eq!((count, total), (2, 20));
                assert_eq!(rows, vec![20, 21]);
            }
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn few_malformed_rows_are_skipped() {
        let mut rows: Vec<String> = (0..40).map(|i| row(&format!("{i};2;3;4;5;6;7"))).collect();
        rows.push(row("x;2;3;4;5;6;7"));
        let out = ingest_reader(Cursor::new(csv(&rows)), MissingPolicy::DropRow).unwrap();
        assert_eq!(out.samples.len(), 40);
        assert_eq!(out.malformed, vec![42]);
    }

    #[test]
    fn synthesize_is_deterministic_per_seed() {
        let a = synthesize(100, 1).unwrap();
        assert_eq!(a, synthesize(100, 1).unwrap());
        assert_ne!(a, synthesize(100, 2).unwrap());
        assert!(synthesize(0, 1).is_err());
    }

    #[test]
    fn noiseless_synthesis_is_the_linear_function() {
        let spec = SyntheticSpec {
            noise: 0.0,
            ..SyntheticSpec::default()
        };
        for s in synthesize_with(200, 9, &spec).unwrap() {
            assert_eq!(s.target, spec.linear(&s.features));
        }
    }

    #[test]
    fn synthetic_values_are_normalized() {
        for s in synthesize(500, 3).unwrap() {
            assert!((0.0..=1.0).contains(&s.target));
            assert!(s.features.iter().all(|f| (0.0..=1.0).contains(f)));
        }
    }

    #[test]
    fn partition_100_into_10() {
        let data = synthesize(100, 4).unwrap();
        let shards = partition(&data, 10, 4).unwrap();
        assert_eq!(shards.len(), 10);
        for s in &shards {
            assert_eq!(s.train.len(), 8);
            assert_eq!(s.validation.len(), 2);
        }
    }

    #[test]
    fn partition_single_node_takes_everything() {
        let data = synthesize(37, 4).unwrap();
        let shards = partition(&data, 1, 4).unwrap();
        assert_eq!(shards.len(), 1);
        assert_eq!(shards[0].len(), 37);
    }

    #[test]
    fn partition_needs_enough_samples() {
        let data = synthesize(5, 4).unwrap();
        assert!(partition(&data, 6, 4).is_err());
        assert!(partition(&data, 0, 4).is_err());
    }

    #[test]
    fn sampler_emits_full_batches_then_a_short_tail() {
        let data = synthesize(70, 5).unwrap();
        let mut sampler = BatchSampler::new(&data, 32, substream(1, Purpose::Batches, 0, 0)).unwrap();
        let sizes: Vec<usize> = (0..6).map(|_| sampler.next_batch().len()).collect();
        assert_eq!(sizes, vec![32, 32, 6, 32, 32, 6]);
    }

    #[test]
    fn sampler_epoch_covers_every_sample_once() {
        let data = synthesize(70, 5).unwrap();
        let mut sampler = BatchSampler::new(&data, 32, substream(1, Purpose::Batches, 0, 0)).unwrap();
        let mut seen: Vec<Sample> = (0..3).flat_map(|_| sampler.next_batch()).collect();
        let mut expected = data.clone();
        let key = |s: &Sample| (s.target.to_bits(), s.features[0].to_bits());
        seen.sort_by_key(key);
        expected.sort_by_key(key);
        assert_eq!(seen, expected);
    }

    #[test]
    fn federated_data_holds_out_a_disjoint_server_split() {
        let data = synthesize(1000, 6).unwrap();
        let fd = FederatedData::build(&data, 10, 0.02, 6).unwrap();
        assert_eq!(fd.server_validation.len(), 20);
        let node_total: usize = fd.shards.iter().map(NodeShard::len).sum();
        assert_eq!(node_total + 20, 1000);
        assert_eq!(
            fd.pooled_validation.len(),
            fd.shards.iter().map(|s| s.validation.len()).sum::<usize>()
        );
    }

    #[test]
    fn cache_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("power.txt");
        let text = csv(&[
            row("4.216;0.418;234.840;18.400;0.000;1.000;17.000"),
            row("?;?;?;?;?;?;"),
            row("5.360;0.436;233.630;23.000;0.000;1.000;16.000"),
            row("3.666;0.528;235.680;15.800;0.000;2.000;17.000"),
        ]);
        fs::write(&raw, text).unwrap();
        let cache_dir = dir.path().join("cache");
        let first = cache::ingest_cached(&raw, &cache_dir, MissingPolicy::DropRow).unwrap();
        let hash = cache::content_hash(&raw).unwrap();
        assert!(cache::cache_path(&cache_dir, &hash).exists());
        let second = cache::ingest_cached(&raw, &cache_dir, MissingPolicy::DropRow).unwrap();
        assert_eq!(first.samples, second.samples);
        assert_eq!(first.raw_rows, second.raw_rows);
        assert_eq!(first.dropped_missing, second.dropped_missing);
    }
}
