//! Probabilities of the sixteen code-pair regions of the 2-bit scheme.
//!
//! A projected pair (x, y) is bivariate normal with unit variances and
//! correlation rho. Each coordinate is coded into {0,1,2,3} by the thresholds
//! -w, 0, w (code 0: x <= -w, code 1: -w < x <= 0, code 2: 0 < x <= w,
//! code 3: x > w), so a pair lands in one of 16 regions. Joint negation and
//! coordinate exchange reduce the 16 regions to three base shapes evaluated
//! at +rho or -rho:
//!
//! * `InnerInner`:  both coordinates in (0, w]
//! * `InnerOuter`:  one in (0, w], the other in (w, inf)
//! * `OuterOuter`:  both in (w, inf)
//!
//! `InnerInner` and `InnerOuter` are single integrals of phi times a normal
//! interval probability; `OuterOuter` follows from the quadrant identity
//! Pr(x > 0, y > 0) = 1/4 + arcsin(rho)/(2*pi). First and second derivatives
//! in rho have closed forms and need no quadrature.
//!
//! # Table file format (version 1, little-endian)
//!
//! | offset | size | field                                     |
//! |--------|------|-------------------------------------------|
//! | 0      | 8    | magic `b"RP2TABLE"`                       |
//! | 8      | 4    | format version, u32 = 1                   |
//! | 12     | 8    | threshold w, f64                          |
//! | 20     | 8    | epsilon (rho clamp), f64                  |
//! | 28     | 8    | requested grid step, f64                  |
//! | 36     | 8    | node count n, u64                         |
//! | 44     | 8n   | rho nodes, ascending f64                  |
//! | ...    | 72n  | entries: per node, 9 f64: (p, d1, d2) for |
//! |        |      | InnerInner, InnerOuter, OuterOuter        |
//!
//! A JSON sidecar `<path>.json` mirrors the header fields.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normal::{
    integrate, std_normal_cdf, std_normal_interval, std_normal_pdf, QuadratureError,
    QuadratureSpec,
};

/// Distance kept from the rho = +-1 singularities.
pub const RHO_EPS: f64 = 1e-8;
/// Largest |rho| ever evaluated; inputs beyond it are clamped.
pub const RHO_MAX: f64 = 1.0 - RHO_EPS;

const FRAC_1_2PI: f64 = 0.15915494309189535; // 1/(2*pi)

/// Clamp a correlation into the evaluable range [-RHO_MAX, RHO_MAX].
#[inline]
pub fn clamp_rho(rho: f64) -> f64 {
    assert!(!rho.is_nan(), "clamp_rho: NaN correlation");
    rho.clamp(-RHO_MAX, RHO_MAX)
}

/// The three base region shapes; everything else is one of these at +-rho.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseRegion {
    /// Both coordinates in (0, w].
    InnerInner,
    /// One coordinate in (0, w], the other above w.
    InnerOuter,
    /// Both coordinates above w.
    OuterOuter,
}

impl BaseRegion {
    pub const ALL: [BaseRegion; 3] = [
        BaseRegion::InnerInner,
        BaseRegion::InnerOuter,
        BaseRegion::OuterOuter,
    ];
}

/// One of the sixteen regions, addressed by the codes of x and y.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionId {
    row: u8,
    col: u8,
}

impl RegionId {
    pub fn new(row: u8, col: u8) -> Self {
        assert!(row < 4 && col < 4, "RegionId out of range: ({row}, {col})");
        Self { row, col }
    }

    pub fn row(&self) -> u8 {
        self.row
    }

    pub fn col(&self) -> u8 {
        self.col
    }

    /// Base shape and whether the region is evaluated at -rho.
    pub fn base(&self) -> (BaseRegion, bool) {
        use BaseRegion::*;
        match (self.row, self.col) {
            (2, 2) | (1, 1) => (InnerInner, false),
            (1, 2) | (2, 1) => (InnerInner, true),
            (2, 3) | (3, 2) | (0, 1) | (1, 0) => (InnerOuter, false),
            (0, 2) | (1, 3) | (2, 0) | (3, 1) => (InnerOuter, true),
            (3, 3) | (0, 0) => (OuterOuter, false),
            (0, 3) | (3, 0) => (OuterOuter, true),
            _ => unreachable!(),
        }
    }

    pub fn all() -> impl Iterator<Item = RegionId> {
        (0..4u8).flat_map(|r| (0..4u8).map(move |c| RegionId::new(r, c)))
    }
}

fn check_w(w: f64) {
    assert!(w.is_finite() && w > 0.0, "threshold w must be positive, got {w}");
}

/// Probability of a base region at correlation rho (clamped to +-RHO_MAX)
/// and threshold w > 0.
pub fn base_region_prob(region: BaseRegion, rho: f64, w: f64) -> Result<f64, QuadratureError> {
    check_w(w);
    let rho = clamp_rho(rho);
    let spec = QuadratureSpec::default();
    let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
    match region {
        BaseRegion::InnerInner => integrate(
            |x| std_normal_pdf(x) * std_normal_interval(-rho * x / s, (w - rho * x) / s),
            0.0,
            w,
            spec,
        )
        .map(|p| p.clamp(0.0, 1.0)),
        BaseRegion::InnerOuter => integrate(
            |x| std_normal_pdf(x) * std_normal_cdf((rho * x - w) / s),
            0.0,
            w,
            spec,
        )
        .map(|p| p.clamp(0.0, 1.0)),
        BaseRegion::OuterOuter => {
            let p_ii = base_region_prob(BaseRegion::InnerInner, rho, w)?;
            let p_io = base_region_prob(BaseRegion::InnerOuter, rho, w)?;
            Ok((0.25 + rho.asin() * FRAC_1_2PI - p_ii - 2.0 * p_io).clamp(0.0, 1.0))
        }
    }
}

/// dP/drho for a base region, in closed form.
pub fn base_region_d1(region: BaseRegion, rho: f64, w: f64) -> f64 {
    check_w(w);
    let rho = clamp_rho(rho);
    let s2 = (1.0 - rho) * (1.0 + rho);
    let inv = FRAC_1_2PI / s2.sqrt();
    let e_half = (-w * w / (2.0 * s2)).exp();
    let e_one = (-w * w / (1.0 + rho)).exp();
    match region {
        BaseRegion::InnerInner => inv * (1.0 - 2.0 * e_half + e_one),
        BaseRegion::InnerOuter => inv * (e_half - e_one),
        BaseRegion::OuterOuter => inv * e_one,
    }
}

/// d2P/drho2 for a base region, in closed form.
pub fn base_region_d2(region: BaseRegion, rho: f64, w: f64) -> f64 {
    check_w(w);
    let rho = clamp_rho(rho);
    let s2 = (1.0 - rho) * (1.0 + rho);
    let sqrt_s2 = s2.sqrt();
    let e_half = (-w * w / (2.0 * s2)).exp();
    let e_one = (-w * w / (1.0 + rho)).exp();
    // Shared building blocks of the closed forms.
    let curve = FRAC_1_2PI * rho / (s2 * sqrt_s2);
    let half_term = curve * e_half * (1.0 - w * w / s2);
    let one_term = FRAC_1_2PI / sqrt_s2
        * e_one
        * (rho / s2 + w * w / ((1.0 + rho) * (1.0 + rho)));
    match region {
        BaseRegion::InnerInner => curve - 2.0 * half_term + one_term,
        BaseRegion::InnerOuter => half_term - one_term,
        BaseRegion::OuterOuter => one_term,
    }
}

/// Probability of any of the sixteen regions.
pub fn region_prob(region: RegionId, rho: f64, w: f64) -> Result<f64, QuadratureError> {
    let (base, negated) = region.base();
    base_region_prob(base, if negated { -rho } else { rho }, w)
}

/// dP/drho of any region; the sign flips for regions evaluated at -rho.
pub fn region_d1(region: RegionId, rho: f64, w: f64) -> f64 {
    let (base, negated) = region.base();
    if negated {
        -base_region_d1(base, -rho, w)
    } else {
        base_region_d1(base, rho, w)
    }
}

/// d2P/drho2 of any region.
pub fn region_d2(region: RegionId, rho: f64, w: f64) -> f64 {
    let (base, negated) = region.base();
    base_region_d2(base, if negated { -rho } else { rho }, w)
}

/// Probability, first and second derivative of one base region at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseRegionEval {
    pub p: f64,
    pub d1: f64,
    pub d2: f64,
}

impl BaseRegionEval {
    fn is_finite(&self) -> bool {
        self.p.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }
}

fn eval_all(rho: f64, w: f64) -> Result<[BaseRegionEval; 3], QuadratureError> {
    let mut out = [BaseRegionEval { p: 0.0, d1: 0.0, d2: 0.0 }; 3];
    for (i, region) in BaseRegion::ALL.iter().enumerate() {
        out[i] = BaseRegionEval {
            p: base_region_prob(*region, rho, w)?,
            d1: base_region_d1(*region, rho, w),
            d2: base_region_d2(*region, rho, w),
        };
    }
    Ok(out)
}

/// Precomputed base region probabilities and derivatives on a rho grid at a
/// fixed threshold, with linear interpolation between nodes.
///
/// The grid starts uniform at the requested step and is bisected wherever a
/// midpoint interpolation check misses its budget, so lookups stay accurate
/// near rho = +-1 where the curvature blows up like (1-rho^2)^(-3/2).
#[derive(Debug, Clone)]
pub struct ProbabilityTable {
    w: f64,
    epsilon: f64,
    grid_step: f64,
    nodes: Vec<f64>,
    entries: Vec<[BaseRegionEval; 3]>,
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad table file: {0}")]
    Format(String),
}

const TABLE_MAGIC: &[u8; 8] = b"RP2TABLE";
const TABLE_VERSION: u32 = 1;

// Midpoint interpolation budgets used while refining the grid.
const P_INTERP_TOL: f64 = 2.5e-7;
const D1_INTERP_RELTOL: f64 = 1e-6;
const D2_INTERP_RELTOL: f64 = 1e-4;
const MAX_REFINE_DEPTH: u32 = 40;

/// Build a table for threshold `w` over rho in [-RHO_MAX, RHO_MAX].
///
/// `grid_step` must be in (0, 0.01]; the default 1e-3 keeps mid-node lookups
/// of the probabilities within 1e-6 of direct evaluation.
pub fn build_table(w: f64, grid_step: f64) -> Result<ProbabilityTable, TableError> {
    check_w(w);
    assert!(
        grid_step > 0.0 && grid_step <= 0.01,
        "grid_step must be in (0, 0.01], got {grid_step}"
    );

    let span = 2.0 * RHO_MAX;
    let n_seg = (span / grid_step).ceil() as usize;
    let base: Vec<f64> = (0..=n_seg)
        .map(|i| {
            if i == n_seg {
                RHO_MAX
            } else {
                -RHO_MAX + span * (i as f64) / (n_seg as f64)
            }
        })
        .collect();

    let mut nodes = Vec::with_capacity(base.len() * 2);
    let mut entries = Vec::with_capacity(base.len() * 2);

    fn close_enough(e0: &[BaseRegionEval; 3], e1: &[BaseRegionEval; 3], em: &[BaseRegionEval; 3]) -> bool {
        for i in 0..3 {
            let lerp_p = 0.5 * (e0[i].p + e1[i].p);
            let lerp_d1 = 0.5 * (e0[i].d1 + e1[i].d1);
            let lerp_d2 = 0.5 * (e0[i].d2 + e1[i].d2);
            if (lerp_p - em[i].p).abs() > P_INTERP_TOL
                || (lerp_d1 - em[i].d1).abs() > D1_INTERP_RELTOL * em[i].d1.abs().max(1.0)
                || (lerp_d2 - em[i].d2).abs() > D2_INTERP_RELTOL * em[i].d2.abs().max(1.0)
            {
                return false;
            }
        }
        true
    }

    // Emits the left endpoint of each accepted segment.
    fn refine(
        x0: f64,
        e0: [BaseRegionEval; 3],
        x1: f64,
        e1: [BaseRegionEval; 3],
        w: f64,
        depth: u32,
        nodes: &mut Vec<f64>,
        entries: &mut Vec<[BaseRegionEval; 3]>,
    ) -> Result<(), TableError> {
        let xm = 0.5 * (x0 + x1);
        if depth >= MAX_REFINE_DEPTH || xm <= x0 || xm >= x1 {
            nodes.push(x0);
            entries.push(e0);
            return Ok(());
        }
        let em = eval_all(xm, w)?;
        if close_enough(&e0, &e1, &em) {
            nodes.push(x0);
            entries.push(e0);
        } else {
            refine(x0, e0, xm, em, w, depth + 1, nodes, entries)?;
            refine(xm, em, x1, e1, w, depth + 1, nodes, entries)?;
        }
        Ok(())
    }

    let mut prev_x = base[0];
    let mut prev_e = eval_all(prev_x, w)?;
    for &x in &base[1..] {
        let e = eval_all(x, w)?;
        refine(prev_x, prev_e, x, e, w, 0, &mut nodes, &mut entries)?;
        prev_x = x;
        prev_e = e;
    }
    nodes.push(prev_x);
    entries.push(prev_e);

    let table = ProbabilityTable {
        w,
        epsilon: RHO_EPS,
        grid_step,
        nodes,
        entries,
    };
    table.validate().map_err(TableError::Format)?;
    Ok(table)
}

impl ProbabilityTable {
    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    fn validate(&self) -> Result<(), String> {
        if self.nodes.len() < 2 || self.nodes.len() != self.entries.len() {
            return Err("node/entry layout invalid".into());
        }
        if !self.nodes.windows(2).all(|p| p[0] < p[1]) {
            return Err("rho grid not strictly ascending".into());
        }
        if (self.nodes[0] + RHO_MAX).abs() > 1e-12 || (self.nodes[self.nodes.len() - 1] - RHO_MAX).abs() > 1e-12 {
            return Err("rho grid does not span [-1+eps, 1-eps]".into());
        }
        for (i, entry) in self.entries.iter().enumerate() {
            for e in entry {
                if !e.is_finite() || e.p < 0.0 || e.p > 1.0 {
                    return Err(format!("non-finite or out-of-range entry at node {i}"));
                }
            }
        }
        Ok(())
    }

    /// Interpolated evaluations of the three base regions at `rho` (clamped).
    pub fn lookup(&self, rho: f64) -> [BaseRegionEval; 3] {
        let rho = clamp_rho(rho);
        let idx = match self.nodes.binary_search_by(|n| n.partial_cmp(&rho).unwrap()) {
            Ok(i) => return self.entries[i],
            Err(i) => i.clamp(1, self.nodes.len() - 1),
        };
        let (x0, x1) = (self.nodes[idx - 1], self.nodes[idx]);
        let t = (rho - x0) / (x1 - x0);
        let (e0, e1) = (&self.entries[idx - 1], &self.entries[idx]);
        std::array::from_fn(|i| BaseRegionEval {
            p: e0[i].p + t * (e1[i].p - e0[i].p),
            d1: e0[i].d1 + t * (e1[i].d1 - e0[i].d1),
            d2: e0[i].d2 + t * (e1[i].d2 - e0[i].d2),
        })
    }

    /// Interpolated evaluation of one base region.
    pub fn lookup_region(&self, region: BaseRegion, rho: f64) -> BaseRegionEval {
        let idx = match region {
            BaseRegion::InnerInner => 0,
            BaseRegion::InnerOuter => 1,
            BaseRegion::OuterOuter => 2,
        };
        self.lookup(rho)[idx]
    }

    pub fn save(&self, path: &Path) -> Result<(), TableError> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(TABLE_MAGIC)?;
        out.write_all(&TABLE_VERSION.to_le_bytes())?;
        out.write_all(&self.w.to_le_bytes())?;
        out.write_all(&self.epsilon.to_le_bytes())?;
        out.write_all(&self.grid_step.to_le_bytes())?;
        out.write_all(&(self.nodes.len() as u64).to_le_bytes())?;
        for x in &self.nodes {
            out.write_all(&x.to_le_bytes())?;
        }
        for entry in &self.entries {
            for e in entry {
                out.write_all(&e.p.to_le_bytes())?;
                out.write_all(&e.d1.to_le_bytes())?;
                out.write_all(&e.d2.to_le_bytes())?;
            }
        }
        out.flush()?;

        let sidecar = TableSidecar {
            format: "rpsketch probability table".into(),
            version: TABLE_VERSION,
            w: self.w,
            epsilon: self.epsilon,
            grid_step: self.grid_step,
            nodes: self.nodes.len(),
        };
        let json_path = sidecar_path(path);
        let mut jf = BufWriter::new(File::create(json_path)?);
        serde_json::to_writer_pretty(&mut jf, &sidecar)
            .map_err(|e| TableError::Format(format!("sidecar: {e}")))?;
        jf.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TableError> {
        let mut input = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != TABLE_MAGIC {
            return Err(TableError::Format("bad magic".into()));
        }
        let version = read_u32(&mut input)?;
        if version != TABLE_VERSION {
            return Err(TableError::Format(format!("unsupported version {version}")));
        }
        let w = read_f64(&mut input)?;
        let epsilon = read_f64(&mut input)?;
        let grid_step = read_f64(&mut input)?;
        let n = read_u64(&mut input)? as usize;
        if n < 2 || n > 100_000_000 {
            return Err(TableError::Format(format!("implausible node count {n}")));
        }
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            nodes.push(read_f64(&mut input)?);
        }
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let mut entry = [BaseRegionEval { p: 0.0, d1: 0.0, d2: 0.0 }; 3];
            for e in &mut entry {
                e.p = read_f64(&mut input)?;
                e.d1 = read_f64(&mut input)?;
                e.d2 = read_f64(&mut input)?;
            }
            entries.push(entry);
        }
        let table = ProbabilityTable { w, epsilon, grid_step, nodes, entries };
        table.validate().map_err(TableError::Format)?;
        Ok(table)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".json");
    os.into()
}

#[derive(Debug, Serialize, Deserialize)]
struct TableSidecar {
    format: String,
    version: u32,
    w: f64,
    epsilon: f64,
    grid_step: f64,
    nodes: usize,
}

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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::std_normal_sf;

    fn p(region: BaseRegion, rho: f64, w: f64) -> f64 {
        base_region_prob(region, rho, w).unwrap()
    }

    #[test]
    fn outer_outer_factorizes_at_rho_zero() {
        for &w in &[0.4, 0.75, 1.5] {
            let sf = std_normal_sf(w);
            assert!((p(BaseRegion::OuterOuter, 0.0, w) - sf * sf).abs() < 1e-12);
        }
    }

    #[test]
    fn inner_outer_vanishes_as_rho_approaches_one() {
        // The discordant region empties in the rho -> 1 limit; at the clamp
        // boundary 1 - 1e-8 its mass scales like sqrt(eps) and sits near 1.7e-5.
        let v = p(BaseRegion::InnerOuter, RHO_MAX, 0.75);
        assert!(v > 0.0 && v < 5e-5, "got {v}");
        let v6 = p(BaseRegion::InnerOuter, 1.0 - 1e-6, 0.75);
        assert!(v < v6, "mass must shrink towards the limit");
    }

    #[test]
    fn inner_inner_matches_reference_quadrature() {
        // Frozen values from an independent high-precision quadrature of the
        // same integrands (and the arcsin identity for OuterOuter).
        assert!((p(BaseRegion::InnerInner, 0.5, 0.75) - 0.08879145703984413).abs() < 1e-9);
        assert!((p(BaseRegion::InnerOuter, 0.5, 0.75) - 0.07009273103168279).abs() < 1e-9);
        assert!((p(BaseRegion::OuterOuter, 0.5, 0.75) - 0.10435641423012365).abs() < 1e-9);
    }

    #[test]
    fn first_derivatives_telescope_to_quadrant_derivative() {
        for &(rho, w) in &[(0.3, 0.75), (-0.62, 1.5), (0.9, 0.4), (0.0, 3.0)] {
            let sum = base_region_d1(BaseRegion::InnerInner, rho, w)
                + 2.0 * base_region_d1(BaseRegion::InnerOuter, rho, w)
                + base_region_d1(BaseRegion::OuterOuter, rho, w);
            let expect = FRAC_1_2PI / (1.0 - rho * rho).sqrt();
            assert!((sum - expect).abs() < 1e-14, "telescope failed at ({rho}, {w})");
        }
    }

    #[test]
    fn outer_outer_d1_at_rho_zero() {
        for &w in &[0.4, 0.75, 1.5] {
            let expect = FRAC_1_2PI * f64::exp(-w * w);
            assert!((base_region_d1(BaseRegion::OuterOuter, 0.0, w) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn d1_matches_finite_difference_of_p() {
        let h = 1e-5;
        for region in BaseRegion::ALL {
            for &(rho, w) in &[(0.3, 0.75), (-0.5, 1.5), (0.85, 0.6)] {
                let fd = (p(region, rho + h, w) - p(region, rho - h, w)) / (2.0 * h);
                let d1 = base_region_d1(region, rho, w);
                assert!(
                    (fd - d1).abs() < 1e-6,
                    "{region:?} at ({rho}, {w}): fd {fd} vs closed {d1}"
                );
            }
        }
    }

    #[test]
    fn d2_matches_finite_difference_of_d1() {
        let h = 1e-5;
        for region in BaseRegion::ALL {
            for &(rho, w) in &[(0.3, 0.75), (-0.5, 1.5), (0.85, 0.6)] {
                let fd = (base_region_d1(region, rho + h, w) - base_region_d1(region, rho - h, w))
                    / (2.0 * h);
                let d2 = base_region_d2(region, rho, w);
                assert!(
                    (fd - d2).abs() < 1e-5,
                    "{region:?} at ({rho}, {w}): fd {fd} vs closed {d2}"
                );
            }
        }
    }

    #[test]
    fn mirrored_regions_reuse_base_shapes() {
        for &rho in &[-0.5, 0.0, 0.5] {
            let p11 = region_prob(RegionId::new(1, 1), rho, 0.75).unwrap();
            let p22 = region_prob(RegionId::new(2, 2), rho, 0.75).unwrap();
            assert!((p11 - p22).abs() < 1e-14);

            let p12 = region_prob(RegionId::new(1, 2), rho, 0.75).unwrap();
            let mirrored = base_region_prob(BaseRegion::InnerInner, -rho, 0.75).unwrap();
            assert!((p12 - mirrored).abs() < 1e-14);
        }
    }

    #[test]
    fn sixteen_regions_sum_to_one() {
        let total: f64 = RegionId::all()
            .map(|r| region_prob(r, 0.37, 0.75).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-8, "sum {total}");
    }

    #[test]
    fn region_d1_sign_flips_for_mirrored_regions() {
        let h = 1e-5;
        for region in [RegionId::new(0, 2), RegionId::new(0, 3), RegionId::new(2, 1)] {
            let fd = (region_prob(region, 0.4 + h, 0.75).unwrap()
                - region_prob(region, 0.4 - h, 0.75).unwrap())
                / (2.0 * h);
            let d1 = region_d1(region, 0.4, 0.75);
            assert!((fd - d1).abs() < 1e-6, "{region:?}: fd {fd} vs {d1}");
        }
    }

    #[test]
    fn diagonal_mass_is_nondecreasing_in_rho() {
        let w = 0.75;
        let mut prev = f64::NEG_INFINITY;
        let mut rho = 0.0;
        while rho < 1.0 {
            let v = p(BaseRegion::InnerInner, rho, w) + p(BaseRegion::OuterOuter, rho, w);
            assert!(v >= prev - 1e-12, "not monotone at rho {rho}");
            prev = v;
            rho += 0.05;
        }
    }

    #[test]
    fn wide_threshold_recovers_quadrant_probability() {
        // With w far in the tail the inner-inner region is the whole positive
        // quadrant: Pr(x > 0, y > 0) = 1/4 + arcsin(rho)/(2*pi).
        for &rho in &[-0.8f64, -0.3, 0.0, 0.6, 0.9] {
            let quadrant = 0.25 + rho.asin() * FRAC_1_2PI;
            assert!(
                (p(BaseRegion::InnerInner, rho, 10.0) - quadrant).abs() < 1e-6,
                "rho {rho}"
            );
        }
    }

    #[test]
    fn table_lookup_at_node_is_exact() {
        let table = build_table(0.75, 0.01).unwrap();
        let idx = table.len() / 3;
        let rho = table.nodes()[idx];
        let got = table.lookup(rho);
        let want = eval_all(rho, 0.75).unwrap();
        for i in 0..3 {
            assert_eq!(got[i].p, want[i].p);
            assert_eq!(got[i].d1, want[i].d1);
            assert_eq!(got[i].d2, want[i].d2);
        }
    }

    #[test]
    fn table_midpoint_interpolation_is_accurate() {
        let table = build_table(0.75, 1e-3).unwrap();
        let got = table.lookup(0.4715);
        let want = eval_all(0.4715, 0.75).unwrap();
        for i in 0..3 {
            assert!((got[i].p - want[i].p).abs() < 1e-6);
        }
    }

    #[test]
    fn table_covers_boundaries_with_finite_entries() {
        let table = build_table(0.75, 0.01).unwrap();
        for &rho in &[-RHO_MAX, -0.999, 0.999, RHO_MAX] {
            for e in table.lookup(rho) {
                assert!(e.p.is_finite() && e.d1.is_finite() && e.d2.is_finite());
            }
        }
    }

    #[test]
    fn table_roundtrips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.bin");
        let table = build_table(0.6, 0.01).unwrap();
        table.save(&path).unwrap();
        let loaded = ProbabilityTable::load(&path).unwrap();
        assert_eq!(table.w(), loaded.w());
        assert_eq!(table.len(), loaded.len());
        assert_eq!(table.nodes(), loaded.nodes());
        for (a, b) in table.entries.iter().zip(&loaded.entries) {
            for i in 0..3 {
                assert_eq!(a[i].p, b[i].p);
                assert_eq!(a[i].d1, b[i].d1);
                assert_eq!(a[i].d2, b[i].d2);
            }
        }
        assert!(path.with_extension("bin.json").exists() || sidecar_path(&path).exists());
    }

    #[test]
    fn table_load_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTATABLE-----------------------").unwrap();
        assert!(matches!(ProbabilityTable::load(&path), Err(TableError::Format(_))));
    }
}
