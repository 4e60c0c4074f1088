//! Similarity estimators for coded random projections and their asymptotic
//! variance machinery.
//!
//! Three estimators are implemented:
//!
//! * `estimate_1bit` - closed form from sign agreement,
//!   Pr(sgn x = sgn y) = 1 - arccos(rho)/pi.
//! * `estimate_2bit_linear` - inverts the diagonal (code-equality) mass
//!   2*P_ii(rho) + 2*P_oo(rho) by bisection; monotone in rho.
//! * `estimate_2bit_mle` - maximizes the grouped multinomial log likelihood
//!   of the six cells with a bracketed, bisection-safeguarded Newton
//!   iteration on (interpolated) tabulated probabilities and derivatives.
//!
//! Fisher information is reported per observation; the asymptotic variance
//! of an estimate from k projections is 1/(k*I).

use thiserror::Error;

use crate::coding::{CellCounts, TwoBitSketches};
use crate::normal::{std_normal_cdf, std_normal_sf, QuadratureError};
use crate::region::{
    base_region_d1, base_region_d2, base_region_prob, clamp_rho, BaseRegion, BaseRegionEval,
    ProbabilityTable, RHO_MAX,
};

/// Floor applied to probabilities inside logarithms and divisions; keeps
/// degenerate high-|rho| cells from producing infinities.
const MIN_PROB: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("sketch w = {sketch_w} does not match table w = {table_w}")]
    ThresholdMismatch { sketch_w: f64, table_w: f64 },
    #[error("query sketches hold {queries} points but candidates hold {candidates}")]
    PairCountMismatch { queries: usize, candidates: usize },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Which cells the MLE likelihood distinguishes.
///
/// `FiveCell` merges the opposite-sign adjacent group with the opposite
/// outer diagonal group into a single cell of probability
/// 2*P_io(-rho) + P_oo(-rho), trading a little information at moderate rho
/// for a smaller contingency table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellMode {
    #[default]
    SixCell,
    FiveCell,
}

#[derive(Debug, Clone, Copy)]
pub struct MleConfig {
    pub mode: CellMode,
    /// Convergence threshold on |dl/drho|.
    pub tolerance: f64,
    pub max_iterations: u32,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self { mode: CellMode::SixCell, tolerance: 1e-6, max_iterations: 50 }
    }
}

impl MleConfig {
    fn validate(&self) {
        assert!(self.tolerance > 0.0, "tolerance must be positive");
        assert!(self.max_iterations >= 1, "need at least one iteration");
    }
}

/// Result of a maximum-likelihood estimate.
#[derive(Debug, Clone, Copy)]
pub struct MleEstimate {
    pub rho_hat: f64,
    pub iterations: u32,
    /// |dl/drho| reached the tolerance at `rho_hat`.
    pub converged: bool,
    /// The estimate sits on the rho bound rather than at a stationary point.
    pub clamped: bool,
    /// Asymptotic variance 1/(k*I) at the estimate.
    pub predicted_variance: Option<f64>,
}

/// Linear (diagonal-information) estimate.
#[derive(Debug, Clone, Copy)]
pub struct LinearEstimate {
    pub rho_hat: f64,
    /// Observed diagonal fraction fell outside the attainable range.
    pub clamped: bool,
}

/// Closed-form 1-bit estimate from the number of sign agreements.
pub fn estimate_1bit(n_same_sign: f64, k: f64) -> f64 {
    assert!(k >= 1.0, "estimate_1bit: k must be at least 1");
    assert!(
        (0.0..=k).contains(&n_same_sign),
        "estimate_1bit: {n_same_sign} agreements out of {k}"
    );
    let rho = (std::f64::consts::PI * (1.0 - n_same_sign / k)).cos();
    clamp_rho(rho)
}

/// Diagonal mass 2*P_ii(rho) + 2*P_oo(rho) from the table.
fn diagonal_mass(table: &ProbabilityTable, rho: f64) -> f64 {
    let e = table.lookup(rho);
    2.0 * e[0].p + 2.0 * e[2].p
}

/// 2-bit linear estimator: solve the diagonal-mass equation for rho by
/// bisection. The diagonal mass is strictly increasing in rho.
pub fn estimate_2bit_linear(counts: &CellCounts, table: &ProbabilityTable) -> LinearEstimate {
    let k = counts.total();
    assert!(k >= 1.0, "estimate_2bit_linear: empty counts");
    let observed = counts.diagonal() / k;

    let (mut lo, mut hi) = (-RHO_MAX, RHO_MAX);
    if observed <= diagonal_mass(table, lo) {
        return LinearEstimate { rho_hat: lo, clamped: true };
    }
    if observed >= diagonal_mass(table, hi) {
        return LinearEstimate { rho_hat: hi, clamped: true };
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if diagonal_mass(table, mid) < observed {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    LinearEstimate { rho_hat: 0.5 * (lo + hi), clamped: false }
}

/// One likelihood group: observation count and the cell probability with its
/// first two rho derivatives.
struct Group {
    count: f64,
    p: f64,
    d1: f64,
    d2: f64,
}

fn groups_at(
    counts: &CellCounts,
    mode: CellMode,
    pos: &[BaseRegionEval; 3],
    neg: &[BaseRegionEval; 3],
) -> [Option<Group>; 6] {
    // Cells evaluated at -rho pick up a sign flip on the first derivative.
    let mut out = [
        Some(Group { count: counts.diag_inner, p: pos[0].p, d1: pos[0].d1, d2: pos[0].d2 }),
        Some(Group { count: counts.adj_same, p: pos[1].p, d1: pos[1].d1, d2: pos[1].d2 }),
        Some(Group { count: counts.diag_outer, p: pos[2].p, d1: pos[2].d1, d2: pos[2].d2 }),
        Some(Group {
            count: counts.diag_inner_neg,
            p: neg[0].p,
            d1: -neg[0].d1,
            d2: neg[0].d2,
        }),
        None,
        None,
    ];
    match mode {
        CellMode::SixCell => {
            out[4] = Some(Group { count: counts.adj_opp, p: neg[1].p, d1: -neg[1].d1, d2: neg[1].d2 });
            out[5] = Some(Group {
                count: counts.diag_outer_neg,
                p: neg[2].p,
                d1: -neg[2].d1,
                d2: neg[2].d2,
            });
        }
        CellMode::FiveCell => {
            out[4] = Some(Group {
                count: counts.adj_opp + counts.diag_outer_neg,
                p: 2.0 * neg[1].p + neg[2].p,
                d1: -(2.0 * neg[1].d1 + neg[2].d1),
                d2: 2.0 * neg[1].d2 + neg[2].d2,
            });
        }
    }
    out
}

/// Log likelihood of the grouped counts and its first two derivatives in
/// rho, evaluated from the table. Empty groups contribute nothing; cell
/// probabilities are floored at 1e-300 inside the logarithms.
pub fn log_likelihood(
    counts: &CellCounts,
    mode: CellMode,
    table: &ProbabilityTable,
    rho: f64,
) -> (f64, f64, f64) {
    let pos = table.lookup(rho);
    let neg = table.lookup(-rho);
    let mut l = 0.0;
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for group in groups_at(counts, mode, &pos, &neg).iter().flatten() {
        if group.count == 0.0 {
            continue; // 0 * log p := 0
        }
        let p = group.p.max(MIN_PROB);
        l += group.count * p.ln();
        l1 += group.count * group.d1 / p;
        l2 += group.count * (group.d2 * p - group.d1 * group.d1) / (p * p);
    }
    (l, l1, l2)
}

/// Maximum-likelihood estimate of rho from grouped cell counts.
///
/// Starts at the 1-bit estimate recovered from the sign information of the
/// 2-bit codes, maintains a bracket on the sign change of dl/drho, and takes
/// Newton steps whenever the curvature is negative and the step stays inside
/// the bracket, falling back to bisection otherwise. Degenerate counts whose
/// likelihood is monotone over the whole range clamp to the nearer bound.
pub fn estimate_2bit_mle(
    counts: &CellCounts,
    table: &ProbabilityTable,
    config: &MleConfig,
) -> MleEstimate {
    config.validate();
    let k = counts.total();
    assert!(k >= 1.0, "estimate_2bit_mle: empty counts");

    let eval = |rho: f64| log_likelihood(counts, config.mode, table, rho);
    let init = estimate_1bit(counts.same_sign(), k);
    let (l_init, f_init, _) = eval(init);

    let mut iterations = 0u32;
    let mut result = if f_init.abs() <= config.tolerance {
        MleEstimate {
            rho_hat: init,
            iterations,
            converged: true,
            clamped: init.abs() >= RHO_MAX,
            predicted_variance: None,
        }
    } else {
        // Walk uphill from the initializer.
        let (mut a, mut b, f_far) = if f_init > 0.0 {
            let (_, f_hi, _) = eval(RHO_MAX);
            (init, RHO_MAX, f_hi)
        } else {
            let (_, f_lo, _) = eval(-RHO_MAX);
            (-RHO_MAX, init, f_lo)
        };

        let no_sign_change = (f_init > 0.0) == (f_far > 0.0) || f_far == 0.0;
        if no_sign_change {
            // Likelihood monotone towards the bound: boundary maximizer.
            let bound = if f_init > 0.0 { RHO_MAX } else { -RHO_MAX };
            MleEstimate {
                rho_hat: bound,
                iterations,
                converged: f_far.abs() <= config.tolerance,
                clamped: true,
                predicted_variance: None,
            }
        } else {
            // Bracket invariant: l' > 0 at a, l' < 0 at b, with a < b. Both
            // branches above already satisfy it: uphill-right gives
            // (init, RHO_MAX), uphill-left gives (-RHO_MAX, init).
            debug_assert!(a < b);
            let mut x = init;
            let mut state = None;
            while iterations < config.max_iterations {
                iterations += 1;
                let (_, f, d) = eval(x);
                if f.abs() <= config.tolerance {
                    state = Some((x, true));
                    break;
                }
                if f > 0.0 {
                    a = x;
                } else {
                    b = x;
                }
                if b - a < 1e-14 {
                    state = Some((x, f.abs() <= config.tolerance));
                    break;
                }
                let newton = x - f / d;
                x = if d < 0.0 && newton > a && newton < b {
                    newton
                } else {
                    0.5 * (a + b)
                };
            }
            let (rho_hat, converged) = state.unwrap_or((x, false));
            MleEstimate {
                rho_hat,
                iterations,
                converged,
                clamped: rho_hat.abs() >= RHO_MAX,
                predicted_variance: None,
            }
        }
    };

    // The returned point must never score below the initializer.
    let (l_res, _, _) = eval(result.rho_hat);
    if l_res < l_init {
        result = MleEstimate {
            rho_hat: init,
            iterations,
            converged: false,
            clamped: init.abs() >= RHO_MAX,
            predicted_variance: None,
        };
    }
    result.predicted_variance =
        Some(1.0 / (k * fisher_info_from_table(table, result.rho_hat, config.mode)).max(MIN_PROB));
    result
}

fn fisher_terms(evals: &[(f64, f64, f64)]) -> f64 {
    evals
        .iter()
        .map(|&(mult, p, d1)| mult * d1 * d1 / p.max(MIN_PROB))
        .sum()
}

/// Per-observation Fisher information of the grouped cell model, computed
/// from interpolated table entries (fast path used when reporting predicted
/// variances).
pub fn fisher_info_from_table(table: &ProbabilityTable, rho: f64, mode: CellMode) -> f64 {
    let pos = table.lookup(rho);
    let neg = table.lookup(-rho);
    fisher_info_from_evals(&pos, &neg, mode)
}

fn fisher_info_from_evals(
    pos: &[BaseRegionEval; 3],
    neg: &[BaseRegionEval; 3],
    mode: CellMode,
) -> f64 {
    match mode {
        // Sum over the six observable classes of (q')^2 / q with class
        // probabilities q = (2 P_ii, 4 P_io, 2 P_oo) at +-rho; this equals
        // the paper-form information 2*[A] for a single observation.
        CellMode::SixCell => fisher_terms(&[
            (2.0, pos[0].p, pos[0].d1),
            (4.0, pos[1].p, pos[1].d1),
            (2.0, pos[2].p, pos[2].d1),
            (2.0, neg[0].p, neg[0].d1),
            (4.0, neg[1].p, neg[1].d1),
            (2.0, neg[2].p, neg[2].d1),
        ]),
        CellMode::FiveCell => {
            let merged_p = 2.0 * neg[1].p + neg[2].p;
            let merged_d1 = 2.0 * neg[1].d1 + neg[2].d1;
            fisher_terms(&[
                (2.0, pos[0].p, pos[0].d1),
                (4.0, pos[1].p, pos[1].d1),
                (2.0, pos[2].p, pos[2].d1),
                (2.0, neg[0].p, neg[0].d1),
                (2.0, merged_p, merged_d1),
            ])
        }
    }
}

fn base_evals_direct(rho: f64, w: f64) -> Result<[BaseRegionEval; 3], QuadratureError> {
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

/// Per-observation Fisher information of the six-cell 2-bit model, from
/// direct quadrature. Multiply by k for the information of k projections.
pub fn fisher_info_2bit(rho: f64, w: f64) -> Result<f64, QuadratureError> {
    let rho = clamp_rho(rho);
    let pos = base_evals_direct(rho, w)?;
    let neg = base_evals_direct(-rho, w)?;
    Ok(fisher_info_from_evals(&pos, &neg, CellMode::SixCell))
}

/// Per-observation Fisher information of the collapsed five-cell model.
pub fn fisher_info_2bit_five_cell(rho: f64, w: f64) -> Result<f64, QuadratureError> {
    let rho = clamp_rho(rho);
    let pos = base_evals_direct(rho, w)?;
    let neg = base_evals_direct(-rho, w)?;
    Ok(fisher_info_from_evals(&pos, &neg, CellMode::FiveCell))
}

/// Per-observation Fisher information of the 1-bit (sign) estimator:
/// 1/(pi^2 (1-rho^2)) * [1/p + 1/(1-p)] with p = 1/2 + arcsin(rho)/pi.
pub fn fisher_info_1bit(rho: f64) -> f64 {
    let rho = clamp_rho(rho);
    let p = 0.5 + rho.asin() / std::f64::consts::PI;
    let p = p.clamp(MIN_PROB, 1.0 - MIN_PROB);
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    (1.0 / p + 1.0 / (1.0 - p)) / (pi2 * (1.0 - rho * rho))
}

/// Variance-reduction ratio I_2bit / I_1bit at a given rho and threshold.
pub fn variance_ratio(rho: f64, w: f64) -> Result<f64, QuadratureError> {
    Ok(fisher_info_2bit(rho, w)? / fisher_info_1bit(rho))
}

/// The closed-form curve whose square equals the variance ratio at rho = 0:
/// g(w) = [ (1-exp(-w^2/2))^2 / (Phi(w)-1/2) + exp(-w^2) / (1-Phi(w)) ] / 2.
pub fn g_function(w: f64) -> f64 {
    assert!(w > 0.0, "g_function: w must be positive");
    let t = (-0.5 * w * w).exp();
    let first = (1.0 - t) * (1.0 - t) / (std_normal_cdf(w) - 0.5);
    let second = t * t / std_normal_sf(w);
    0.5 * (first + second)
}

/// Delta-method asymptotic variance of the 2-bit linear estimator for a
/// single observation; divide... multiply: variance of a k-projection
/// estimate is this value divided by k.
pub fn linear_asymptotic_variance(rho: f64, w: f64) -> Result<f64, QuadratureError> {
    let rho = clamp_rho(rho);
    let p_diag = 2.0 * base_region_prob(BaseRegion::InnerInner, rho, w)?
        + 2.0 * base_region_prob(BaseRegion::OuterOuter, rho, w)?;
    let slope = 2.0 * base_region_d1(BaseRegion::InnerInner, rho, w)
        + 2.0 * base_region_d1(BaseRegion::OuterOuter, rho, w);
    Ok(p_diag * (1.0 - p_diag) / (slope * slope).max(MIN_PROB))
}

/// Which estimator re-ranking or batch estimation should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    OneBit,
    TwoBitLinear,
    TwoBitMle,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::OneBit => "1bit",
            EstimatorKind::TwoBitLinear => "2bit-linear",
            EstimatorKind::TwoBitMle => "mle",
        }
    }
}

/// Estimate rho for one tallied pair with the chosen estimator.
pub fn estimate_pair(
    counts: &CellCounts,
    estimator: EstimatorKind,
    table: &ProbabilityTable,
    config: &MleConfig,
) -> f64 {
    match estimator {
        EstimatorKind::OneBit => estimate_1bit(counts.same_sign(), counts.total()),
        EstimatorKind::TwoBitLinear => estimate_2bit_linear(counts, table).rho_hat,
        EstimatorKind::TwoBitMle => estimate_2bit_mle(counts, table, config).rho_hat,
    }
}

/// One row of a batch estimation run.
#[derive(Debug, Clone, Copy)]
pub struct BatchEstimate {
    pub pair_id: usize,
    pub rho_hat: f64,
    pub predicted_std: f64,
}

/// Estimate similarities for row-aligned pairs of two sketch sets: pair i is
/// (queries[i], candidates[i]).
pub fn estimate_pairs_batch(
    queries: &TwoBitSketches,
    candidates: &TwoBitSketches,
    estimator: EstimatorKind,
    table: &ProbabilityTable,
    config: &MleConfig,
) -> Result<Vec<BatchEstimate>, EstimateError> {
    if queries.n() != candidates.n() {
        return Err(EstimateError::PairCountMismatch {
            queries: queries.n(),
            candidates: candidates.n(),
        });
    }
    for sketch_w in [queries.w(), candidates.w()] {
        if (sketch_w - table.w()).abs() > 1e-12 {
            return Err(EstimateError::ThresholdMismatch { sketch_w, table_w: table.w() });
        }
    }
    let k = queries.k().min(candidates.k()) as f64;
    let out = (0..queries.n())
        .map(|i| {
            let counts = queries.tally_pair_prefix(i, candidates, i, k as usize);
            let rho_hat = estimate_pair(&counts, estimator, table, config);
            let var = match estimator {
                EstimatorKind::OneBit => 1.0 / (k * fisher_info_1bit(rho_hat)),
                EstimatorKind::TwoBitLinear => {
                    linear_variance_from_table(table, rho_hat) / k
                }
                EstimatorKind::TwoBitMle => {
                    1.0 / (k * fisher_info_from_table(table, rho_hat, config.mode))
                }
            };
            BatchEstimate { pair_id: i, rho_hat, predicted_std: var.max(0.0).sqrt() }
        })
        .collect();
    Ok(out)
}

/// Single-observation delta-method variance of the linear estimator using
/// table entries.
pub fn linear_variance_from_table(table: &ProbabilityTable, rho: f64) -> f64 {
    let e = table.lookup(rho);
    let p_diag = 2.0 * e[0].p + 2.0 * e[2].p;
    let slope = 2.0 * e[0].d1 + 2.0 * e[2].d1;
    p_diag * (1.0 - p_diag) / (slope * slope).max(MIN_PROB)
}
