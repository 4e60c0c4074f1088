//! Collision probabilities of the two quantizers and the LSH gap analysis
//! built on them.
//!
//! For projections of unit-norm points at correlation rho (squared distance
//! d = 2(1-rho)):
//!
//! * uniform quantizer floor(x/w): P_w(rho) is a sum over bins of bivariate
//!   band probabilities, strictly increasing in rho;
//! * offset quantizer floor((x+q)/w), q ~ U[0,w): P_{w,q}(d) depends on the
//!   distance alone and decreases in d.
//!
//! An LSH scheme separating target similarity rho0 from the c-approximate
//! level rho2 = 1 - c^2 (1-rho0) is scored by the gap
//! G = log(1/p1) / log(1/p2); query cost scales like N^G, so smaller is
//! better and G < 1/c beats the classic bound.

use thiserror::Error;

use crate::normal::{
    integrate, std_normal_interval, std_normal_pdf, QuadratureError, QuadratureSpec,
    GAUSS_TAIL_CUTOFF,
};
use crate::region::{clamp_rho, RHO_MAX};

#[derive(Debug, Error)]
pub enum GapError {
    #[error("invalid gap query: {0}")]
    InvalidQuery(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Bands with marginal mass below this are dropped from the bin series; the
/// discarded collision mass is bounded by the discarded marginal mass, since
/// Pr(both in band i) <= Pr(x in band i).
const BAND_MASS_CUTOFF: f64 = 1e-14;

/// Collision probability of the uniform quantizer floor(x/w) for projected
/// pairs at correlation rho:
/// 2 * sum_i Pr(x and y both in [i*w, (i+1)*w)).
pub fn collision_prob_uniform(rho: f64, w: f64) -> Result<f64, QuadratureError> {
    assert!(w > 0.0, "bin width must be positive");
    let rho = clamp_rho(rho);
    let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let spec = QuadratureSpec::default();

    let mut total = 0.0;
    let mut i = 0u32;
    loop {
        let lo = i as f64 * w;
        let hi = lo + w;
        if std_normal_interval(lo, hi) < BAND_MASS_CUTOFF {
            break;
        }
        total += integrate(
            |z| std_normal_pdf(z) * std_normal_interval((lo - rho * z) / s, (hi - rho * z) / s),
            lo,
            hi,
            spec,
        )?;
        i += 1;
    }
    Ok((2.0 * total).min(1.0))
}

/// Collision probability of the offset quantizer floor((x+q)/w) at squared
/// distance d: the integral of 2*phi(t/sqrt(d))/sqrt(d) * (1 - t/w) over
/// [0, w], evaluated after substituting t = sqrt(d) * u. Coincident points
/// (d = 0) always collide.
pub fn collision_prob_offset(d: f64, w: f64) -> Result<f64, QuadratureError> {
    assert!((0.0..=4.0).contains(&d), "squared distance {d} outside [0, 4]");
    assert!(w > 0.0, "bin width must be positive");
    if d == 0.0 {
        return Ok(1.0);
    }
    let sd = d.sqrt();
    let upper = (w / sd).min(GAUSS_TAIL_CUTOFF);
    let spec = QuadratureSpec::default();
    integrate(
        |u| 2.0 * std_normal_pdf(u) * (1.0 - u * sd / w),
        0.0,
        upper,
        spec,
    )
    .map(|p| p.clamp(0.0, 1.0))
}

/// Which quantizer a gap computation scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Uniform,
    Offset,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Uniform => "uniform",
            Scheme::Offset => "offset",
        }
    }
}

/// A c-approximate near neighbor setting: target similarity rho0, approximation
/// factor c, bin width w. Construction enforces c <= sqrt(1/(1-rho0)), the
/// largest factor for which the far similarity level stays at rho >= 0.
#[derive(Debug, Clone, Copy)]
pub struct GapQuery {
    rho0: f64,
    c: f64,
    w: f64,
}

impl GapQuery {
    pub fn new(rho0: f64, c: f64, w: f64) -> Result<Self, GapError> {
        if !(0.0..1.0).contains(&rho0) {
            return Err(GapError::InvalidQuery(format!("rho0 {rho0} outside [0, 1)")));
        }
        if c <= 1.0 {
            return Err(GapError::InvalidQuery(format!("approximation factor c {c} must exceed 1")));
        }
        if !(w > 0.0) {
            return Err(GapError::InvalidQuery(format!("bin width {w} must be positive")));
        }
        let c_max = (1.0 / (1.0 - rho0)).sqrt();
        if c > c_max * (1.0 + 1e-12) {
            return Err(GapError::InvalidQuery(format!(
                "c {c} exceeds the admissible bound {c_max:.6} at rho0 {rho0}"
            )));
        }
        Ok(Self { rho0, c, w })
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    /// Target squared distance d0 = 2(1 - rho0). The distance/similarity
    /// conversion happens only here.
    pub fn d0(&self) -> f64 {
        2.0 * (1.0 - self.rho0)
    }

    /// Similarity at the approximate distance c*sqrt(d0).
    pub fn rho2(&self) -> f64 {
        1.0 - self.c * self.c * self.d0() / 2.0
    }
}

/// Collision probabilities at the near and far levels and their gap.
#[derive(Debug, Clone, Copy)]
pub struct GapProfile {
    pub p1: f64,
    pub p2: f64,
    pub gap: f64,
}

/// Gap G = log(1/p1) / log(1/p2) of a scheme at a query.
pub fn gap(query: &GapQuery, scheme: Scheme) -> Result<GapProfile, GapError> {
    let rho2 = query.rho2();
    if rho2 < -RHO_MAX {
        return Err(GapError::InvalidQuery(format!(
            "far similarity {rho2} below the evaluable range"
        )));
    }
    let (p1, p2) = match scheme {
        Scheme::Uniform => (
            collision_prob_uniform(query.rho0(), query.w())?,
            collision_prob_uniform(rho2, query.w())?,
        ),
        Scheme::Offset => (
            collision_prob_offset(query.d0(), query.w())?,
            collision_prob_offset(query.c() * query.c() * query.d0(), query.w())?,
        ),
    };
    let gap = p1.ln() / p2.ln();
    Ok(GapProfile { p1, p2, gap })
}

/// Geometric grid of 200 widths over [0.25, 5], the sweep range used by the
/// optimal-gap analyses.
pub fn default_w_grid() -> Vec<f64> {
    geometric_grid(0.25, 5.0, 200)
}

pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// Minimize the gap over a width grid; ties keep the first (smallest) width.
pub fn optimal_gap(
    rho0: f64,
    c: f64,
    scheme: Scheme,
    w_grid: &[f64],
) -> Result<(f64, GapProfile), GapError> {
    assert!(!w_grid.is_empty(), "empty width grid");
    let mut best: Option<(f64, GapProfile)> = None;
    for &w in w_grid {
        let profile = gap(&GapQuery::new(rho0, c, w)?, scheme)?;
        if best.as_ref().is_none_or(|(_, b)| profile.gap < b.gap) {
            best = Some((w, profile));
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::std_normal_cdf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn uniform_collision_factorizes_at_rho_zero() {
        for &w in &[0.75, 1.5, 3.0] {
            let mut expect = 0.0;
            let mut i = 0;
            loop {
                let band = std_normal_interval(i as f64 * w, (i + 1) as f64 * w);
                if band < 1e-14 {
                    break;
                }
                expect += band * band;
                i += 1;
            }
            expect *= 2.0;
            let got = collision_prob_uniform(0.0, w).unwrap();
            assert!((got - expect).abs() < 1e-10, "w {w}: {got} vs {expect}");
        }
    }

    #[test]
    fn uniform_collision_approaches_one_at_perfect_correlation() {
        let p = collision_prob_uniform(1.0 - 1e-8, 1.5).unwrap();
        assert!(p > 1.0 - 1e-4, "got {p}");
    }

    #[test]
    fn uniform_collision_matches_reference_values() {
        // Frozen from an independent high-precision quadrature of the series.
        assert!((collision_prob_uniform(0.0, 1.5).unwrap() - 0.383884944988726).abs() < 1e-9);
        assert!((collision_prob_uniform(0.5, 1.5).unwrap() - 0.5066562540323069).abs() < 1e-9);
        assert!((collision_prob_uniform(0.9, 0.75).unwrap() - 0.5472926344662589).abs() < 1e-9);
    }

    #[test]
    fn uniform_collision_truncation_is_tight() {
        // Doubling the band budget must not move the value beyond the bound
        // implied by the discarded marginal mass.
        let w = 0.35;
        let p = collision_prob_uniform(0.6, w).unwrap();
        let s = ((1.0f64 - 0.6) * (1.0 + 0.6)).sqrt();
        let spec = QuadratureSpec::default();
        let mut longer = 0.0;
        let mut i = 0;
        loop {
            let lo = i as f64 * w;
            let hi = lo + w;
            if std_normal_interval(lo, hi) < 1e-20 {
                break;
            }
            longer += integrate(
                |z| {
                    std_normal_pdf(z)
                        * std_normal_interval((lo - 0.6 * z) / s, (hi - 0.6 * z) / s)
                },
                lo,
                hi,
                spec,
            )
            .unwrap();
            i += 1;
        }
        assert!((p - 2.0 * longer).abs() < 2.0 * BAND_MASS_CUTOFF + 1e-12);
    }

    #[test]
    fn uniform_collision_monte_carlo() {
        let rho: f64 = 0.5;
        let w = 1.5;
        let n = 1_000_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let s = (1.0 - rho * rho).sqrt();
        let mut hits = 0usize;
        for _ in 0..n {
            let x: f64 = StandardNormal.sample(&mut rng);
            let e: f64 = StandardNormal.sample(&mut rng);
            let y = rho * x + s * e;
            if (x / w).floor() == (y / w).floor() {
                hits += 1;
            }
        }
        let p = collision_prob_uniform(rho, w).unwrap();
        let freq = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * se, "{freq} vs {p}");
    }

    #[test]
    fn offset_collision_limits() {
        assert_eq!(collision_prob_offset(0.0, 1.5).unwrap(), 1.0);
        // One giant bin: everything collides.
        let p = collision_prob_offset(1.0, 1000.0).unwrap();
        assert!((p - 1.0).abs() < 1e-3, "got {p}");
    }

    #[test]
    fn offset_collision_matches_closed_form() {
        // P = 2 Phi(w/sqrt(d)) - 1 - 2 sqrt(d)/w * (phi(0) - phi(w/sqrt(d))),
        // an independent algebraic route to the same integral.
        for &(d, w) in &[(0.2, 1.5), (1.0, 2.0), (3.5, 0.8)] {
            let sd: f64 = f64::sqrt(d);
            let closed = 2.0 * std_normal_cdf(w / sd) - 1.0
                - 2.0 * sd / w * (std_normal_pdf(0.0) - std_normal_pdf(w / sd));
            let got = collision_prob_offset(d, w).unwrap();
            assert!((got - closed).abs() < 1e-10, "(d {d}, w {w}): {got} vs {closed}");
        }
        assert!((collision_prob_offset(0.2, 1.5).unwrap() - 0.7621784951910255).abs() < 1e-9);
        assert!((collision_prob_offset(1.0, 2.0).unwrap() - 0.609548422215397).abs() < 1e-9);
    }

    #[test]
    fn uniform_collision_is_increasing_in_rho() {
        for &w in &[0.75, 1.5] {
            let mut prev = -1.0;
            let mut rho = 0.0;
            while rho <= 0.96 {
                let p = collision_prob_uniform(rho, w).unwrap();
                assert!(p > prev, "not increasing at rho {rho}, w {w}");
                prev = p;
                rho += 0.05;
            }
        }
    }

    #[test]
    fn offset_collision_is_decreasing_in_distance() {
        for &w in &[0.75, 1.5] {
            let mut prev = 2.0;
            for i in 1..=20 {
                let d = i as f64 * 0.2;
                let p = collision_prob_offset(d, w).unwrap();
                assert!(p < prev, "not decreasing at d {d}, w {w}");
                prev = p;
            }
        }
    }

    #[test]
    fn gap_query_validates_admissible_c() {
        assert!(GapQuery::new(0.5, std::f64::consts::SQRT_2, 1.0).is_ok());
        assert!(GapQuery::new(0.5, 1.43, 1.0).is_err());
        assert!(GapQuery::new(0.5, 1.0, 1.0).is_err());
        assert!(GapQuery::new(1.0, 1.2, 1.0).is_err());
        assert!(GapQuery::new(0.9, 2.0, 0.0).is_err());
    }

    #[test]
    fn gap_tends_to_one_as_c_shrinks() {
        let q = GapQuery::new(0.7, 1.0 + 1e-9, 1.5).unwrap();
        let profile = gap(&q, Scheme::Uniform).unwrap();
        assert!((profile.gap - 1.0).abs() < 1e-6, "gap {}", profile.gap);
    }

    #[test]
    fn gap_profile_is_ordered() {
        for scheme in [Scheme::Uniform, Scheme::Offset] {
            let q = GapQuery::new(0.8, 1.4, 1.2).unwrap();
            let profile = gap(&q, scheme).unwrap();
            assert!(profile.p2 < profile.p1 && profile.p1 < 1.0);
            assert!(profile.gap > 0.0 && profile.gap <= 1.0);
        }
    }

    #[test]
    fn gap_matches_monte_carlo_collision_probabilities() {
        // Recompute the two collision probabilities by simulation and push
        // the sampling error through the gap formula.
        let q = GapQuery::new(0.9, 1.5, 1.5).unwrap();
        let profile = gap(&q, Scheme::Uniform).unwrap();
        let n = 1_000_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut collide = |rho: f64| {
            let s = (1.0f64 - rho * rho).sqrt();
            let mut hits = 0usize;
            for _ in 0..n {
                let x: f64 = StandardNormal.sample(&mut rng);
                let e: f64 = StandardNormal.sample(&mut rng);
                let y = rho * x + s * e;
                if (x / 1.5).floor() == (y / 1.5).floor() {
                    hits += 1;
                }
            }
            hits as f64 / n as f64
        };
        let p1 = collide(q.rho0());
        let p2 = collide(q.rho2());
        let mc_gap = p1.ln() / p2.ln();
        let se1 = (p1 * (1.0 - p1) / n as f64).sqrt();
        let se2 = (p2 * (1.0 - p2) / n as f64).sqrt();
        let d_p1 = 1.0 / (p1 * p2.ln().abs());
        let d_p2 = p1.ln().abs() / (p2.ln() * p2.ln() * p2).abs();
        let band = 4.0 * (d_p1 * se1 + d_p2 * se2);
        assert!(
            (profile.gap - mc_gap).abs() < band,
            "gap {} vs mc {mc_gap} (band {band})",
            profile.gap
        );
    }

    #[test]
    fn small_widths_win_at_high_similarity() {
        let (w_star, _) = optimal_gap(0.9, 1.1, Scheme::Uniform, &default_w_grid()).unwrap();
        assert!(w_star <= 1.5, "optimal width {w_star}");
    }

    #[test]
    fn uniform_scheme_dominates_offset_at_optimum() {
        let grid = default_w_grid();
        for &(rho0, c) in &[(0.5, 1.2), (0.9, 1.2), (0.9, 1.5), (0.9, 2.0)] {
            let (_, gu) = optimal_gap(rho0, c, Scheme::Uniform, &grid).unwrap();
            let (_, go) = optimal_gap(rho0, c, Scheme::Offset, &grid).unwrap();
            assert!(
                gu.gap <= go.gap + 1e-12,
                "({rho0}, {c}): uniform {} vs offset {}",
                gu.gap,
                go.gap
            );
            assert!(gu.gap < 1.0 / c, "({rho0}, {c}): gap {} vs 1/c", gu.gap);
        }
    }

    #[test]
    fn geometric_grid_spans_range() {
        let grid = default_w_grid();
        assert_eq!(grid.len(), 200);
        assert!((grid[0] - 0.25).abs() < 1e-12);
        assert!((grid[199] - 5.0).abs() < 1e-12);
        assert!(grid.windows(2).all(|p| p[0] < p[1]));
    }
}
