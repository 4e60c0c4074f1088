//! Gaussian random projections and the coding schemes applied to them.
//!
//! Projection entries are generated by a counter-based construction: every
//! matrix cell (d, j) hashes (seed, d, j) and feeds a Box-Muller transform,
//! so any cell can be produced independently, in parallel, without a shared
//! stream. Identical specs always give bit-identical projections.
//!
//! Four coders operate on projected values:
//!
//! * `encode_1bit`   - sign bit, x > 0
//! * `encode_2bit`   - {0,1,2,3} with thresholds -w, 0, w; ties go down
//! * `encode_uniform`- floor(x/w), the quantizer used for hash-table keys
//! * `encode_offset` - floor((x+q)/w) with a random offset q in [0, w)
//!
//! # Sketch file format (version 1, little-endian)
//!
//! | offset | size          | field                           |
//! |--------|---------------|---------------------------------|
//! | 0      | 8             | magic `b"RP2SKECH"`             |
//! | 8      | 4             | format version, u32 = 1         |
//! | 12     | 1             | scheme tag, u8 = 2 (2-bit)      |
//! | 13     | 8             | threshold w, f64                |
//! | 21     | 8             | codes per point k, u64          |
//! | 29     | 8             | point count n, u64              |
//! | 37     | 8             | projection seed, u64            |
//! | 45     | n*ceil(k/4)   | packed codes, 2 bits each, code |
//! |        |               | j of a row at bits 2*(j%4) of   |
//! |        |               | byte floor(j/4); rows padded to |
//! |        |               | whole bytes                     |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::DataMatrix;

#[derive(Debug, Error)]
pub enum CodingError {
    #[error("data has {got} dims but the projection spec expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("code sequences have different lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad sketch file: {0}")]
    Format(String),
}

/// Identifies a deterministic family of k Gaussian projections of
/// D-dimensional data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectionSpec {
    pub k: usize,
    pub dims: usize,
    pub seed: u64,
}

impl ProjectionSpec {
    pub fn new(k: usize, dims: usize, seed: u64) -> Self {
        assert!(k >= 1, "need at least one projection");
        assert!(dims >= 1, "need at least one dimension");
        Self { k, dims, seed }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Map a u64 to the open unit interval (0, 1).
#[inline]
fn to_unit_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0) // 2^-53
}

/// Standard normal variate for projection cell (row, col), keyed by seed.
#[inline]
pub fn gaussian_entry(seed: u64, row: u64, col: u64) -> f64 {
    let h = splitmix64(splitmix64(splitmix64(seed) ^ row) ^ col);
    let u1 = to_unit_open(h);
    let u2 = to_unit_open(splitmix64(h ^ 0xD1B5_4A32_D192_ED03));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Materialize the dims x k projection matrix (row-major by data dimension).
pub fn projection_matrix(spec: &ProjectionSpec) -> Vec<f64> {
    let mut r = vec![0.0; spec.dims * spec.k];
    r.par_chunks_mut(spec.k).enumerate().for_each(|(d, row)| {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = gaussian_entry(spec.seed, d as u64, j as u64);
        }
    });
    r
}

/// Project one data row onto all k columns of a materialized matrix.
pub fn project_row(row: &[f64], matrix: &[f64], k: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), k);
    debug_assert_eq!(row.len() * k, matrix.len());
    out.fill(0.0);
    for (d, &x) in row.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let cols = &matrix[d * k..(d + 1) * k];
        for (o, &r) in out.iter_mut().zip(cols) {
            *o += x * r;
        }
    }
}

/// Project every data row: returns the n x k projection matrix, row-major.
pub fn project(data: &DataMatrix, spec: &ProjectionSpec) -> Result<Vec<f64>, CodingError> {
    if data.dims() != spec.dims {
        return Err(CodingError::DimensionMismatch { expected: spec.dims, got: data.dims() });
    }
    let matrix = projection_matrix(spec);
    let mut out = vec![0.0; data.n() * spec.k];
    out.par_chunks_mut(spec.k)
        .zip(data.as_slice().par_chunks(data.dims()))
        .for_each(|(dst, row)| project_row(row, &matrix, spec.k, dst));
    Ok(out)
}

/// A 2-bit code in {0, 1, 2, 3}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TwoBitCode(u8);

impl TwoBitCode {
    pub fn new(value: u8) -> Self {
        assert!(value < 4, "2-bit code out of range: {value}");
        Self(value)
    }

    #[inline]
    pub fn value(&self) -> u8 {
        self.0
    }
}

/// Threshold coder: 0 for x <= -w, 1 for -w < x <= 0, 2 for 0 < x <= w,
/// 3 for x > w. Boundary values take the lower code.
#[inline]
pub fn encode_2bit(x: f64, w: f64) -> TwoBitCode {
    debug_assert!(w > 0.0, "threshold must be positive");
    TwoBitCode(if x <= -w {
        0
    } else if x <= 0.0 {
        1
    } else if x <= w {
        2
    } else {
        3
    })
}

/// Uniform quantizer floor(x/w).
#[inline]
pub fn encode_uniform(x: f64, w: f64) -> i64 {
    debug_assert!(w > 0.0, "bin width must be positive");
    (x / w).floor() as i64
}

/// Offset quantizer floor((x+q)/w) with q in [0, w).
#[inline]
pub fn encode_offset(x: f64, w: f64, q: f64) -> i64 {
    assert!(w > 0.0, "bin width must be positive");
    assert!((0.0..w).contains(&q), "offset {q} outside [0, {w})");
    ((x + q) / w).floor() as i64
}

/// Sign bit; zero counts as non-positive.
#[inline]
pub fn encode_1bit(x: f64) -> bool {
    x > 0.0
}

/// Likelihood group of a code pair. The six groups collect regions with a
/// shared base probability: 0/1/2 are InnerInner/InnerOuter/OuterOuter at
/// +rho, 3/4/5 the same shapes at -rho.
const GROUP_OF: [[usize; 4]; 4] = [
    // y:  0  1  2  3        x:
    [2, 1, 4, 5], // 0
    [1, 0, 3, 4], // 1
    [4, 3, 0, 1], // 2
    [5, 4, 1, 2], // 3
];

/// Counts of code pairs grouped by likelihood cell.
///
/// Counts are carried as f64 so that exact-expectation (fractional) tables
/// can be fed to the estimators; tallying real codes always produces whole
/// numbers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellCounts {
    /// Regions (2,2) and (1,1): both codes on the same inner diagonal cell.
    pub diag_inner: f64,
    /// Regions (2,3), (3,2), (0,1), (1,0): adjacent cells, same sign.
    pub adj_same: f64,
    /// Regions (3,3) and (0,0): both codes in the same outer cell.
    pub diag_outer: f64,
    /// Regions (1,2) and (2,1): inner cells of opposite sign.
    pub diag_inner_neg: f64,
    /// Regions (0,2), (1,3), (2,0), (3,1): inner/outer cells, opposite signs.
    pub adj_opp: f64,
    /// Regions (0,3) and (3,0): opposite outer cells.
    pub diag_outer_neg: f64,
}

impl CellCounts {
    pub fn from_groups(groups: [f64; 6]) -> Self {
        let counts = Self {
            diag_inner: groups[0],
            adj_same: groups[1],
            diag_outer: groups[2],
            diag_inner_neg: groups[3],
            adj_opp: groups[4],
            diag_outer_neg: groups[5],
        };
        assert!(groups.iter().all(|&c| c >= 0.0 && c.is_finite()), "negative cell count");
        counts
    }

    pub fn as_groups(&self) -> [f64; 6] {
        [
            self.diag_inner,
            self.adj_same,
            self.diag_outer,
            self.diag_inner_neg,
            self.adj_opp,
            self.diag_outer_neg,
        ]
    }

    /// Total number of paired observations k.
    pub fn total(&self) -> f64 {
        self.as_groups().iter().sum()
    }

    /// Exact-diagonal count k00 + k11 + k22 + k33.
    pub fn diagonal(&self) -> f64 {
        self.diag_inner + self.diag_outer
    }

    /// Pairs whose signs agree (2-bit codes {2,3} vs {0,1}).
    pub fn same_sign(&self) -> f64 {
        self.diag_inner + self.adj_same + self.diag_outer
    }

    /// Likelihood group index (0..6) of a code pair.
    #[inline]
    pub fn group_of(x: TwoBitCode, y: TwoBitCode) -> usize {
        GROUP_OF[x.value() as usize][y.value() as usize]
    }
}

/// Group the paired code streams of one pair of points into cell counts.
pub fn tally_cells(xs: &[TwoBitCode], ys: &[TwoBitCode]) -> Result<CellCounts, CodingError> {
    if xs.len() != ys.len() {
        return Err(CodingError::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    let mut groups = [0u64; 6];
    for (x, y) in xs.iter().zip(ys) {
        groups[CellCounts::group_of(*x, *y)] += 1;
    }
    Ok(CellCounts::from_groups(groups.map(|c| c as f64)))
}

const SKETCH_MAGIC: &[u8; 8] = b"RP2SKECH";
const SKETCH_VERSION: u32 = 1;
const SCHEME_TWO_BIT: u8 = 2;

/// Packed 2-bit sketches of n points, k codes each, threshold w.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBitSketches {
    w: f64,
    k: usize,
    n: usize,
    seed: u64,
    row_bytes: usize,
    packed: Vec<u8>,
}

impl TwoBitSketches {
    /// Encode an n x k projection matrix (row-major) into packed sketches.
    /// `seed` records the projection seed for provenance checks.
    pub fn encode(projections: &[f64], n: usize, k: usize, w: f64, seed: u64) -> Self {
        assert!(w > 0.0);
        assert_eq!(projections.len(), n * k, "projection buffer mismatch");
        let row_bytes = k.div_ceil(4);
        let mut packed = vec![0u8; n * row_bytes];
        packed
            .par_chunks_mut(row_bytes)
            .zip(projections.par_chunks(k))
            .for_each(|(row, projs)| {
                for (j, &x) in projs.iter().enumerate() {
                    let code = encode_2bit(x, w).value();
                    row[j / 4] |= code << (2 * (j % 4));
                }
            });
        Self { w, k, n, seed, row_bytes, packed }
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn code(&self, point: usize, j: usize) -> TwoBitCode {
        debug_assert!(point < self.n && j < self.k);
        let byte = self.packed[point * self.row_bytes + j / 4];
        TwoBitCode((byte >> (2 * (j % 4))) & 0b11)
    }

    /// Unpack one point's codes.
    pub fn row_codes(&self, point: usize) -> Vec<TwoBitCode> {
        (0..self.k).map(|j| self.code(point, j)).collect()
    }

    /// Cell counts of a point pair using only the first `k_used` codes.
    pub fn tally_pair_prefix(&self, i: usize, other: &Self, j: usize, k_used: usize) -> CellCounts {
        assert_eq!(self.k, other.k, "sketches have different k");
        assert!(k_used >= 1 && k_used <= self.k, "invalid prefix length {k_used}");
        let mut groups = [0u64; 6];
        let a = &self.packed[i * self.row_bytes..(i + 1) * self.row_bytes];
        let b = &other.packed[j * other.row_bytes..(j + 1) * other.row_bytes];
        for idx in 0..k_used {
            let xa = (a[idx / 4] >> (2 * (idx % 4))) & 0b11;
            let xb = (b[idx / 4] >> (2 * (idx % 4))) & 0b11;
            groups[GROUP_OF[xa as usize][xb as usize]] += 1;
        }
        CellCounts::from_groups(groups.map(|c| c as f64))
    }

    pub fn tally_pair(&self, i: usize, other: &Self, j: usize) -> CellCounts {
        self.tally_pair_prefix(i, other, j, self.k)
    }

    pub fn save(&self, path: &Path) -> Result<(), CodingError> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(SKETCH_MAGIC)?;
        out.write_all(&SKETCH_VERSION.to_le_bytes())?;
        out.write_all(&[SCHEME_TWO_BIT])?;
        out.write_all(&self.w.to_le_bytes())?;
        out.write_all(&(self.k as u64).to_le_bytes())?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&self.packed)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CodingError> {
        let mut input = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != SKETCH_MAGIC {
            return Err(CodingError::Format("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        input.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != SKETCH_VERSION {
            return Err(CodingError::Format(format!("unsupported version {version}")));
        }
        let mut tag = [0u8; 1];
        input.read_exact(&mut tag)?;
        if tag[0] != SCHEME_TWO_BIT {
            return Err(CodingError::Format(format!("unsupported scheme tag {}", tag[0])));
        }
        let mut f64buf = [0u8; 8];
        input.read_exact(&mut f64buf)?;
        let w = f64::from_le_bytes(f64buf);
        input.read_exact(&mut f64buf)?;
        let k = u64::from_le_bytes(f64buf) as usize;
        input.read_exact(&mut f64buf)?;
        let n = u64::from_le_bytes(f64buf) as usize;
        input.read_exact(&mut f64buf)?;
        let seed = u64::from_le_bytes(f64buf);
        if !(w > 0.0) || k == 0 {
            return Err(CodingError::Format("invalid header".into()));
        }
        let row_bytes = k.div_ceil(4);
        let mut packed = vec![0u8; n * row_bytes];
        input.read_exact(&mut packed)?;
        if input.read(&mut [0u8; 1])? != 0 {
            return Err(CodingError::Format("trailing bytes".into()));
        }
        Ok(Self { w, k, n, seed, row_bytes, packed })
    }
}
