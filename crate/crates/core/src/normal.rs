//! Scalar Gaussian primitives and adaptive numerical quadrature.
//!
//! Everything downstream (region probabilities, collision probabilities,
//! Fisher information) reduces to evaluations of the standard normal pdf/cdf
//! and one-dimensional integrals of smooth, rapidly decaying integrands.
//! The cdf goes through the complementary error function so that tail values
//! keep full relative precision; absolute error is below 1e-15 everywhere.

use thiserror::Error;

/// 1/sqrt(2*pi)
pub const INV_SQRT_2PI: f64 = 0.3989422804014326779;

/// Integration limit for (semi-)infinite Gaussian integrals. The normal mass
/// beyond |x| = 10 is below 1e-23, far under every tolerance used here.
pub const GAUSS_TAIL_CUTOFF: f64 = 10.0;

/// phi(x) = exp(-x^2/2)/sqrt(2*pi).
///
/// Panics on non-finite input.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    assert!(x.is_finite(), "std_normal_pdf: non-finite input {x}");
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Phi(x) = Pr(Z <= x) for Z ~ N(0,1), via erfc.
///
/// Panics on non-finite input.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    assert!(x.is_finite(), "std_normal_cdf: non-finite input {x}");
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// 1 - Phi(x), with full relative precision in the upper tail.
#[inline]
pub fn std_normal_sf(x: f64) -> f64 {
    assert!(x.is_finite(), "std_normal_sf: non-finite input {x}");
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Pr(lo < Z <= hi). Evaluated through the tail that keeps the subtraction
/// well conditioned when the interval sits far from the origin.
#[inline]
pub fn std_normal_interval(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let p = if lo >= 0.0 {
        std_normal_sf(lo) - std_normal_sf(hi)
    } else {
        std_normal_cdf(hi) - std_normal_cdf(lo)
    };
    p.max(0.0)
}

/// Controls for the adaptive quadrature driver.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    /// Target absolute error for the whole interval. Must be > 0.
    pub absolute_tolerance: f64,
    /// Interval bisection budget. Must be >= 1.
    pub max_subdivisions: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            absolute_tolerance: 1e-12,
            max_subdivisions: 4096,
        }
    }
}

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error(
        "quadrature failed to reach tolerance {tolerance:e} on [{a}, {b}]: \
         residual error estimate {error:e} after {subdivisions} subdivisions"
    )]
    AccuracyNotReached {
        a: f64,
        b: f64,
        tolerance: f64,
        error: f64,
        subdivisions: u32,
    },
}

// 15-point Kronrod / 7-point Gauss pair on [-1, 1]. Positive abscissae only;
// the rule is symmetric. Even-indexed Kronrod nodes coincide with the Gauss
// nodes.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 15(7) evaluation on [a, b]. Returns the Kronrod value
/// and |K15 - G7| as the error estimate.
fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let f_center = f(center);
    let mut kronrod = WGK[7] * f_center;
    let mut gauss = WG[3] * f_center;

    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

/// Adaptive quadrature of `f` over [a, b]: Gauss-Kronrod 15(7) panels with
/// bisection until each panel's error estimate fits its share of the budget.
///
/// Requires a <= b and f finite on [a, b]; returns an error when the
/// subdivision budget runs out before the tolerance is met.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: QuadratureSpec,
) -> Result<f64, QuadratureError> {
    assert!(a.is_finite() && b.is_finite() && a <= b, "integrate: bad interval [{a}, {b}]");
    assert!(
        spec.absolute_tolerance > 0.0 && spec.max_subdivisions >= 1,
        "integrate: invalid QuadratureSpec"
    );
    if a == b {
        return Ok(0.0);
    }

    let (v0, e0) = gauss_kronrod_15(&f, a, b);
    if e0 <= spec.absolute_tolerance {
        return Ok(v0);
    }

    let mut total = 0.0;
    let mut subdivisions = 0u32;
    // Panels still above their local tolerance share.
    let mut stack: Vec<(f64, f64, f64)> = vec![(a, b, spec.absolute_tolerance)];

    while let Some((lo, hi, tol)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        for (pa, pb) in [(lo, mid), (mid, hi)] {
            let (v, e) = gauss_kronrod_15(&f, pa, pb);
            // Width underflow: accept the panel value; the error estimate can
            // no longer improve by splitting.
            if e <= 0.5 * tol || (pb - pa) < 1e-15 * (1.0 + pa.abs()) {
                total += v;
            } else {
                stack.push((pa, pb, 0.5 * tol));
            }
        }
        subdivisions += 1;
        if subdivisions >= spec.max_subdivisions && !stack.is_empty() {
            let residual: f64 = stack
                .iter()
                .map(|&(pa, pb, _)| gauss_kronrod_15(&f, pa, pb).1)
                .sum();
            return Err(QuadratureError::AccuracyNotReached {
                a,
                b,
                tolerance: spec.absolute_tolerance,
                error: residual,
                subdivisions,
            });
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_at_zero_is_inv_sqrt_2pi() {
        assert!((std_normal_pdf(0.0) - 0.3989422804014327).abs() < 1e-15);
    }

    #[test]
    fn pdf_is_symmetric() {
        assert_eq!(std_normal_pdf(-1.3), std_normal_pdf(1.3));
    }

    #[test]
    fn pdf_at_one_matches_reference() {
        // exp(-1/2)/sqrt(2*pi), arbitrary-precision reference value.
        assert!((std_normal_pdf(1.0) - 0.24197072451914337).abs() < 1e-16);
    }

    #[test]
    #[should_panic(expected = "non-finite")]
    fn pdf_rejects_nan() {
        std_normal_pdf(f64::NAN);
    }

    #[test]
    #[should_panic(expected = "non-finite")]
    fn cdf_rejects_infinite() {
        std_normal_cdf(f64::INFINITY);
    }

    #[test]
    fn cdf_at_zero_is_half() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
    }

    #[test]
    fn cdf_tail_values() {
        // 1 - Phi(3) = 1.3e-3 and 1 - Phi(6) = 9.9e-10 to the quoted precision.
        assert!((std_normal_sf(3.0) - 1.3e-3).abs() < 0.05e-3);
        assert!((std_normal_sf(3.0) - 1.3498980316300933e-3).abs() < 1e-12);
        assert!((std_normal_sf(6.0) - 9.9e-10).abs() < 0.05e-10);
        assert!((std_normal_cdf(3.0) - (1.0 - 1.3498980316300933e-3)).abs() < 1e-14);
    }

    #[test]
    fn cdf_reflection_identity_on_grid() {
        let mut x = -8.0;
        while x <= 8.0 {
            assert!(
                (std_normal_cdf(x) + std_normal_cdf(-x) - 1.0).abs() <= 1e-14,
                "reflection identity failed at {x}"
            );
            x += 0.01;
        }
    }

    #[test]
    fn cdf_derivative_matches_pdf() {
        let h = 1e-5;
        let mut x = -8.0;
        while x <= 8.0 {
            let fd = (std_normal_cdf(x + h) - std_normal_cdf(x - h)) / (2.0 * h);
            assert!((fd - std_normal_pdf(x)).abs() <= 1e-8, "dPhi/dx != phi at {x}");
            x += 0.01;
        }
    }

    #[test]
    fn interval_matches_cdf_difference() {
        for &(lo, hi) in &[(-1.0, 2.0), (0.5, 0.6), (-4.0, -3.0), (3.0, 9.0)] {
            let direct = std_normal_cdf(hi) - std_normal_cdf(lo);
            assert!((std_normal_interval(lo, hi) - direct).abs() < 1e-15);
        }
        assert_eq!(std_normal_interval(1.0, 1.0), 0.0);
        assert_eq!(std_normal_interval(2.0, 1.0), 0.0);
    }

    #[test]
    fn integrate_empty_interval_is_zero() {
        let spec = QuadratureSpec::default();
        assert_eq!(integrate(|x| x.exp(), 2.0, 2.0, spec).unwrap(), 0.0);
    }

    #[test]
    fn integrate_polynomial() {
        let spec = QuadratureSpec::default();
        let v = integrate(|x| x * x, 0.0, 1.0, spec).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_pdf_matches_cdf_identity() {
        let spec = QuadratureSpec::default();
        let v = integrate(std_normal_pdf, -3.0, 3.0, spec).unwrap();
        assert!((v - (2.0 * std_normal_cdf(3.0) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn integrate_full_gaussian_mass() {
        let spec = QuadratureSpec::default();
        let v = integrate(std_normal_pdf, -GAUSS_TAIL_CUTOFF, GAUSS_TAIL_CUTOFF, spec).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_reports_budget_exhaustion() {
        let spec = QuadratureSpec {
            absolute_tolerance: 1e-14,
            max_subdivisions: 2,
        };
        // Sharp spike needs far more than two bisections at this tolerance.
        let sharp = |x: f64| 1.0 / ((x - 0.3141).powi(2) + 1e-12);
        match integrate(sharp, 0.0, 1.0, spec) {
            Err(QuadratureError::AccuracyNotReached { subdivisions, .. }) => {
                assert_eq!(subdivisions, 2)
            }
            other => panic!("expected accuracy failure, got {other:?}"),
        }
    }
}
