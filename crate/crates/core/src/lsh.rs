//! (K,L) locality-sensitive hash tables over uniform-quantized projections,
//! candidate retrieval, estimator-driven re-ranking, and precision-recall
//! scoring.
//!
//! Each of the L tables keys a point by the digest of its K quantized
//! projections floor(x/w1); a query's candidates are the union of its L
//! matching buckets. Candidates are returned unranked: ordering them is the
//! estimator's job, from stored 2-bit sketches that code the data a second
//! time with their own threshold.
//!
//! # Index file format (version 1, little-endian)
//!
//! Header: magic `b"RP2LSHIX"`, version u32, K u32, L u32, w1 f64, seed u64,
//! n u64, dims u64. Body, per table: bucket count u64, then per bucket
//! (ascending digest order): digest u64, id count u64, ids u32 each (sorted
//! ascending). Projections are regenerated from the seed on load.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::coding::{encode_uniform, gaussian_entry, project_row, TwoBitSketches};
use crate::dataset::DataMatrix;
use crate::estimate::{estimate_pair, EstimatorKind, MleConfig};
use crate::region::ProbabilityTable;

#[derive(Debug, Error)]
pub enum LshError {
    #[error("cannot index an empty dataset")]
    EmptyDataset,
    #[error("query has {got} dims, index expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("candidate {id} has no sketch (store holds {available} points)")]
    MissingSketch { id: u32, available: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad index file: {0}")]
    Format(String),
}

/// Parameters of a (K,L) hash table index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexConfig {
    /// Codes concatenated per table key (K).
    pub hashes_per_table: usize,
    /// Number of tables (L).
    pub tables: usize,
    /// Bin width of the table quantizer (w1).
    pub bin_width: f64,
    pub seed: u64,
}

impl IndexConfig {
    fn validate(&self) {
        assert!(self.hashes_per_table >= 1, "K must be at least 1");
        assert!(self.tables >= 1, "L must be at least 1");
        assert!(self.bin_width > 0.0, "bin width must be positive");
    }

    fn total_projections(&self) -> usize {
        self.hashes_per_table * self.tables
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Digest of one table's K-tuple of quantized codes. Full tuples are not
/// stored; distinct tuples may share a bucket, which standard LSH tolerates.
pub fn key_digest(table: usize, codes: &[i64]) -> u64 {
    let mut h = mix64(0xA076_1D64_78BD_642F ^ table as u64);
    for &code in codes {
        h = mix64(h ^ code as u64);
    }
    h
}

/// L hash tables over uniform-quantized Gaussian projections.
#[derive(Debug, Clone)]
pub struct LshIndex {
    config: IndexConfig,
    dims: usize,
    n: usize,
    /// dims x (K*L) projection matrix, regenerable from the seed.
    proj: Vec<f64>,
    tables: Vec<HashMap<u64, Vec<u32>>>,
}

impl LshIndex {
    /// Build the index over unit-norm data.
    pub fn build(data: &DataMatrix, config: IndexConfig) -> Result<Self, LshError> {
        config.validate();
        if data.n() == 0 {
            return Err(LshError::EmptyDataset);
        }
        let total = config.total_projections();
        let dims = data.dims();
        let mut proj = vec![0.0; dims * total];
        proj.par_chunks_mut(total).enumerate().for_each(|(d, row)| {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = gaussian_entry(config.seed, d as u64, j as u64);
            }
        });

        // Per-point digests in parallel, then sequential insertion in id
        // order so bucket id lists come out sorted and deterministic.
        let digests: Vec<Vec<u64>> = (0..data.n())
            .into_par_iter()
            .map(|i| {
                let mut projections = vec![0.0; total];
                project_row(data.row(i), &proj, total, &mut projections);
                point_digests(&projections, &config)
            })
            .collect();

        let mut tables: Vec<HashMap<u64, Vec<u32>>> = vec![HashMap::new(); config.tables];
        for (i, point_keys) in digests.iter().enumerate() {
            for (table, &key) in point_keys.iter().enumerate() {
                tables[table].entry(key).or_default().push(i as u32);
            }
        }

        Ok(Self { config, dims, n: data.n(), proj, tables })
    }

    pub fn config(&self) -> &IndexConfig {
        self.config_ref()
    }

    fn config_ref(&self) -> &IndexConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Candidate ids whose key matches the query's in at least one table;
    /// sorted ascending, deduplicated, possibly empty.
    pub fn query(&self, q: &[f64]) -> Result<Vec<u32>, LshError> {
        if q.len() != self.dims {
            return Err(LshError::DimensionMismatch { expected: self.dims, got: q.len() });
        }
        let total = self.config.total_projections();
        let mut projections = vec![0.0; total];
        project_row(q, &self.proj, total, &mut projections);
        let keys = point_digests(&projections, &self.config);

        let mut out: Vec<u32> = Vec::new();
        for (table, key) in keys.iter().enumerate() {
            if let Some(bucket) = self.tables[table].get(key) {
                out.extend_from_slice(bucket);
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<(), LshError> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(INDEX_MAGIC)?;
        out.write_all(&INDEX_VERSION.to_le_bytes())?;
        out.write_all(&(self.config.hashes_per_table as u32).to_le_bytes())?;
        out.write_all(&(self.config.tables as u32).to_le_bytes())?;
        out.write_all(&self.config.bin_width.to_le_bytes())?;
        out.write_all(&self.config.seed.to_le_bytes())?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&(self.dims as u64).to_le_bytes())?;
        for table in &self.tables {
            let mut buckets: Vec<(&u64, &Vec<u32>)> = table.iter().collect();
            buckets.sort_by_key(|(digest, _)| **digest);
            out.write_all(&(buckets.len() as u64).to_le_bytes())?;
            for (digest, ids) in buckets {
                out.write_all(&digest.to_le_bytes())?;
                out.write_all(&(ids.len() as u64).to_le_bytes())?;
                for id in ids {
                    out.write_all(&id.to_le_bytes())?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LshError> {
        let mut input = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(LshError::Format("bad magic".into()));
        }
        let version = read_u32(&mut input)?;
        if version != INDEX_VERSION {
            return Err(LshError::Format(format!("unsupported version {version}")));
        }
        let hashes_per_table = read_u32(&mut input)? as usize;
        let tables_count = read_u32(&mut input)? as usize;
        let bin_width = read_f64(&mut input)?;
        let seed = read_u64(&mut input)?;
        let n = read_u64(&mut input)? as usize;
        let dims = read_u64(&mut input)? as usize;
        if hashes_per_table == 0 || tables_count == 0 || !(bin_width > 0.0) || dims == 0 {
            return Err(LshError::Format("invalid header".into()));
        }
        let config = IndexConfig { hashes_per_table, tables: tables_count, bin_width, seed };

        let total = config.total_projections();
        let mut proj = vec![0.0; dims * total];
        proj.par_chunks_mut(total).enumerate().for_each(|(d, row)| {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = gaussian_entry(seed, d as u64, j as u64);
            }
        });

        let mut tables = Vec::with_capacity(tables_count);
        for _ in 0..tables_count {
            let buckets = read_u64(&mut input)? as usize;
            let mut table = HashMap::with_capacity(buckets);
            for _ in 0..buckets {
                let digest = read_u64(&mut input)?;
                let len = read_u64(&mut input)? as usize;
                let mut ids = Vec::with_capacity(len);
                for _ in 0..len {
                    ids.push(read_u32(&mut input)?);
                }
                table.insert(digest, ids);
            }
            tables.push(table);
        }
        Ok(Self { config, dims, n, proj, tables })
    }
}

fn point_digests(projections: &[f64], config: &IndexConfig) -> Vec<u64> {
    let k = config.hashes_per_table;
    let mut codes = vec![0i64; k];
    (0..config.tables)
        .map(|table| {
            for (j, code) in codes.iter_mut().enumerate() {
                *code = encode_uniform(projections[table * k + j], config.bin_width);
            }
            key_digest(table, &codes)
        })
        .collect()
}

const INDEX_MAGIC: &[u8; 8] = b"RP2LSHIX";
const INDEX_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Rank candidates by estimated similarity to the query, descending, with
/// ascending-id tie-breaks. `query_sketch` holds the query's 2-bit codes;
/// `k_used` restricts estimation to a code prefix (the stored sketches may
/// carry more codes than a given experiment wants to spend).
pub fn rerank(
    candidates: &[u32],
    query_sketches: &TwoBitSketches,
    query_row: usize,
    store: &TwoBitSketches,
    k_used: usize,
    estimator: EstimatorKind,
    table: &ProbabilityTable,
    config: &MleConfig,
) -> Result<Vec<u32>, LshError> {
    let mut scored = Vec::with_capacity(candidates.len());
    for &id in candidates {
        if id as usize >= store.n() {
            return Err(LshError::MissingSketch { id, available: store.n() });
        }
        let counts = query_sketches.tally_pair_prefix(query_row, store, id as usize, k_used);
        let rho = estimate_pair(&counts, estimator, table, config);
        scored.push((id, rho));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().map(|(id, _)| id).collect())
}

/// One point of a precision-recall curve: the top-m prefix of a ranking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub m: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Precision and recall of every top-m prefix of `ranked` against the
/// ground-truth top-T set. Recall divides by T even when some truth points
/// were never retrieved.
pub fn precision_recall(ranked: &[u32], truth: &[u32]) -> Vec<PrPoint> {
    assert!(!truth.is_empty(), "empty ground-truth set");
    let truth_set: std::collections::HashSet<u32> = truth.iter().copied().collect();
    let t = truth.len() as f64;
    let mut hits = 0usize;
    ranked
        .iter()
        .enumerate()
        .map(|(idx, id)| {
            if truth_set.contains(id) {
                hits += 1;
            }
            let m = idx + 1;
            PrPoint { m, precision: hits as f64 / m as f64, recall: hits as f64 / t }
        })
        .collect()
}

/// Point-wise average of per-query precision-recall curves on a common
/// 1..=max_m axis. A query whose ranking is shorter than m contributes its
/// final hit count: precision keeps decaying as hits/m, recall stays flat.
pub fn average_pr(curves: &[Vec<PrPoint>], max_m: usize) -> Vec<PrPoint> {
    assert!(!curves.is_empty(), "no curves to average");
    let nq = curves.len() as f64;
    (1..=max_m)
        .map(|m| {
            let mut precision = 0.0;
            let mut recall = 0.0;
            for curve in curves {
                if curve.is_empty() {
                    continue;
                }
                let point = if m <= curve.len() { curve[m - 1] } else { *curve.last().unwrap() };
                // Hits at depth m; beyond the list the count is frozen.
                let hits = point.precision * point.m as f64;
                precision += hits / m as f64;
                recall += point.recall;
            }
            PrPoint { m, precision: precision / nq, recall: recall / nq }
        })
        .collect()
}

/// Area under an averaged precision-recall curve: sum of precision times
/// recall increments, i.e. the average-precision style rectangle rule.
pub fn pr_auc(curve: &[PrPoint]) -> f64 {
    let mut auc = 0.0;
    let mut prev_recall = 0.0;
    for point in curve {
        auc += (point.recall - prev_recall) * point.precision;
        prev_recall = point.recall;
    }
    auc
}
