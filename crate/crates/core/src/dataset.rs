//! Dense row-major datasets with unit-norm rows, file loading, and exact
//! nearest-neighbor ground truth.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dimension mismatch: declared {declared} columns but line {line} has {got}")]
    DimensionMismatch { declared: usize, line: usize, got: usize },
    #[error("row count mismatch: declared {declared} rows but file has {got}")]
    RowCountMismatch { declared: usize, got: usize },
    #[error("raw file size mismatch: declared {declared_n}x{declared_d} f32 needs {expected} bytes, file has {got}")]
    RawSizeMismatch { declared_n: usize, declared_d: usize, expected: u64, got: u64 },
    #[error("row {row} has zero norm and cannot be normalized")]
    ZeroNormRow { row: usize },
    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },
}

/// Dense n x dims matrix, row-major f64.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    data: Vec<f64>,
    n: usize,
    dims: usize,
}

impl DataMatrix {
    pub fn new(data: Vec<f64>, n: usize, dims: usize) -> Self {
        assert_eq!(data.len(), n * dims, "DataMatrix: buffer does not match n x dims");
        Self { data, n, dims }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dims)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Scale every row to unit l2 norm. Zero rows are an error.
    pub fn normalize_rows(&mut self) -> Result<(), DataError> {
        for i in 0..self.n {
            let row = &mut self.data[i * self.dims..(i + 1) * self.dims];
            let norm2: f64 = row.iter().map(|x| x * x).sum();
            if !norm2.is_finite() {
                return Err(DataError::NonFinite { row: i });
            }
            if norm2 < 1e-24 {
                return Err(DataError::ZeroNormRow { row: i });
            }
            let inv = 1.0 / norm2.sqrt();
            for x in row {
                *x *= inv;
            }
        }
        Ok(())
    }
}

/// Inner product of two equal-length rows.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// One row per line, comma-separated decimal values.
    Csv,
    /// Row-major little-endian f32, no header; n and dims come from the spec.
    RawF32,
}

#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: DataFormat,
    pub n: usize,
    pub dims: usize,
    pub normalize: bool,
}

/// Load a dataset per its spec, optionally normalizing rows to unit norm.
pub fn load_dataset(spec: &DatasetSpec) -> Result<DataMatrix, DataError> {
    let mut matrix = match spec.format {
        DataFormat::Csv => load_csv(&spec.path, spec.n, spec.dims)?,
        DataFormat::RawF32 => load_raw_f32(&spec.path, spec.n, spec.dims)?,
    };
    for (i, row) in matrix.rows().enumerate() {
        if row.iter().any(|x| !x.is_finite()) {
            return Err(DataError::NonFinite { row: i });
        }
    }
    if spec.normalize {
        matrix.normalize_rows()?;
    }
    Ok(matrix)
}

fn load_csv(path: &Path, n: usize, dims: usize) -> Result<DataMatrix, DataError> {
    let reader = BufReader::new(File::open(path)?);
    let mut data = Vec::with_capacity(n * dims);
    let mut rows = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut got = 0usize;
        for field in line.split(',') {
            let value: f64 = field.trim().parse().map_err(|e| DataError::Parse {
                line: line_no,
                message: format!("{e}: {field:?}"),
            })?;
            data.push(value);
            got += 1;
        }
        if got != dims {
            return Err(DataError::DimensionMismatch { declared: dims, line: line_no, got });
        }
        rows += 1;
    }
    if rows != n {
        return Err(DataError::RowCountMismatch { declared: n, got: rows });
    }
    Ok(DataMatrix::new(data, n, dims))
}

fn load_raw_f32(path: &Path, n: usize, dims: usize) -> Result<DataMatrix, DataError> {
    let mut file = File::open(path)?;
    let expected = (n as u64) * (dims as u64) * 4;
    let got = file.metadata()?.len();
    if got != expected {
        return Err(DataError::RawSizeMismatch { declared_n: n, declared_d: dims, expected, got });
    }
    let mut bytes = Vec::with_capacity(expected as usize);
    file.read_to_end(&mut bytes)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(DataMatrix::new(data, n, dims))
}

/// Write a matrix as row-major little-endian f32.
pub fn save_raw_f32(matrix: &DataMatrix, path: &Path) -> Result<(), DataError> {
    let mut out = BufWriter::new(File::create(path)?);
    for &x in matrix.as_slice() {
        out.write_all(&(x as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Exact top-T neighbors of `query` by inner product (descending), ties
/// broken by ascending id. With unit-norm data this is the same order as
/// ascending Euclidean distance.
pub fn brute_force_top_t(data: &DataMatrix, query: &[f64], t: usize) -> Vec<(u32, f64)> {
    assert!(t <= data.n(), "top-T with T > n");
    assert_eq!(query.len(), data.dims(), "query dimensionality mismatch");
    let mut scored: Vec<(u32, f64)> = data
        .rows()
        .enumerate()
        .map(|(i, row)| (i as u32, dot(row, query)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(t);
    scored
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn write_temp(content: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn csv_row_normalizes_to_three_four_five() {
        let (_dir, path) = write_temp("3,4\n");
        let spec = DatasetSpec { path, format: DataFormat::Csv, n: 1, dims: 2, normalize: true };
        let m = load_dataset(&spec).unwrap();
        assert!((m.row(0)[0] - 0.6).abs() < 1e-15);
        assert!((m.row(0)[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn csv_dimension_mismatch_names_both() {
        let (_dir, path) = write_temp("1,2,3\n");
        let spec = DatasetSpec { path, format: DataFormat::Csv, n: 1, dims: 2, normalize: false };
        match load_dataset(&spec) {
            Err(DataError::DimensionMismatch { declared: 2, line: 1, got: 3 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn csv_parse_error_carries_line_number() {
        let (_dir, path) = write_temp("1,2\nx,3\n");
        let spec = DatasetSpec { path, format: DataFormat::Csv, n: 2, dims: 2, normalize: false };
        match load_dataset(&spec) {
            Err(DataError::Parse { line: 2, .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn csv_zero_row_rejected_when_normalizing() {
        let (_dir, path) = write_temp("1,1\n0,0\n");
        let spec = DatasetSpec { path, format: DataFormat::Csv, n: 2, dims: 2, normalize: true };
        match load_dataset(&spec) {
            Err(DataError::ZeroNormRow { row: 1 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn raw_f32_roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.f32");
        let m = DataMatrix::new(vec![0.25, -1.5, 3.0, 0.125, 9.0, -2.0], 2, 3);
        save_raw_f32(&m, &path).unwrap();
        let spec = DatasetSpec {
            path: path.clone(),
            format: DataFormat::RawF32,
            n: 2,
            dims: 3,
            normalize: false,
        };
        let loaded = load_dataset(&spec).unwrap();
        assert_eq!(m, loaded);
    }

    #[test]
    fn raw_f32_size_mismatch_names_both() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.f32");
        std::fs::write(&path, [0u8; 10]).unwrap();
        let spec = DatasetSpec { path, format: DataFormat::RawF32, n: 1, dims: 3, normalize: false };
        match load_dataset(&spec) {
            Err(DataError::RawSizeMismatch { expected: 12, got: 10, .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn top_t_with_t_equal_n_returns_everything() {
        let m = DataMatrix::new(vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.0], 3, 2);
        let top = brute_force_top_t(&m, &[1.0, 0.0], 3);
        assert_eq!(top.len(), 3);
        assert_eq!(top[0].0, 0);
        assert!((top[0].1 - 1.0).abs() < 1e-15);
        assert_eq!(top[2].0, 2);
    }

    #[test]
    fn query_equal_to_point_ranks_it_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dims = 8;
        let mut data = Vec::new();
        for _ in 0..50 * dims {
            data.push(rng.random::<f64>() - 0.5);
        }
        let mut m = DataMatrix::new(data, 50, dims);
        m.normalize_rows().unwrap();
        let q: Vec<f64> = m.row(17).to_vec();
        let top = brute_force_top_t(&m, &q, 1);
        assert_eq!(top[0].0, 17);
        assert!((top[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inner_product_order_matches_euclidean_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dims = 16;
        let n = 1000;
        let mut data = Vec::new();
        for _ in 0..n * dims {
            data.push(rng.random::<f64>() - 0.5);
        }
        let mut m = DataMatrix::new(data, n, dims);
        m.normalize_rows().unwrap();
        let mut q: Vec<f64> = (0..dims).map(|_| rng.random::<f64>() - 0.5).collect();
        let norm: f64 = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        q.iter_mut().for_each(|x| *x /= norm);

        let by_sim = brute_force_top_t(&m, &q, n);
        let mut by_dist: Vec<(u32, f64)> = m
            .rows()
            .enumerate()
            .map(|(i, row)| {
                let d2: f64 = row.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                (i as u32, d2)
            })
            .collect();
        by_dist.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for (s, d) in by_sim.iter().zip(&by_dist) {
            assert_eq!(s.0, d.0);
        }
    }
}
