//! Closed-form bounds on `s_T`, the constants they depend on, and the
//! classification of `(beta1, beta2)` pairs by which hypotheses they meet.
//!
//! Region membership is decided in exact rational arithmetic on the decimal
//! spelling of each beta (see [`crate::numeric::decimal_rational`]), so that
//! boundary pairs such as `beta1 = 0.9, beta2 = 0.99`, which sit exactly on
//! `beta2 = 2*beta1 - beta1^2`, classify the way the decimals say.
//!
//! All logarithms are natural.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::numeric::{decimal_complement, decimal_rational, rational_to_f64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Gamma,
    Rho,
    K,
    RatioBound,
    Tau,
    R,
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Constant::Gamma => "gamma",
            Constant::Rho => "rho",
            Constant::K => "K",
            Constant::RatioBound => "K*x1^2/x2",
            Constant::Tau => "tau",
            Constant::R => "r",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("{name} = {value} is outside [0, 1)")]
    BetaDomain { name: &'static str, value: f64 },
    #[error("{constant} is undefined: {reason}")]
    Undefined {
        constant: Constant,
        reason: &'static str,
    },
    #[error("{bound} bound out of scope: requires {constraint}")]
    OutOfScope {
        bound: &'static str,
        constraint: &'static str,
    },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("gradient norm must be finite and nonnegative, got {0}")]
    Norm(f64),
    #[error("grid resolution must be at least 2, got {0}")]
    Resolution(usize),
}

/// Which hypotheses a `(beta1, beta2)` pair satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RegionClass {
    /// `gamma = beta1^2 / sqrt(beta2) < 1`
    pub in_bock_scope: bool,
    /// `beta2 < 2 beta1^2` and `beta2 >= 2 beta1 - beta1^2`
    pub in_result33_scope: bool,
    /// `rho = beta2 / beta1^2` in `(1, 2)`
    pub lemma31_ok: bool,
    /// `beta2 >= 2 beta1 - beta1^2`
    pub lemma32_ok: bool,
}

/// Constants derived from `(beta1, beta2)`. Constants that do not exist for
/// the pair are `None`; the accessors say why.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedConstants {
    pub beta1: f64,
    pub beta2: f64,
    /// `1 - beta1`
    pub x1: f64,
    /// `1 - beta2`
    pub x2: f64,
    gamma: Option<f64>,
    rho: Option<f64>,
    k: Option<f64>,
    ratio_bound: Option<f64>,
    tau: Option<u32>,
    r: Option<f64>,
    pub region: RegionClass,
}

impl DerivedConstants {
    pub fn gamma(&self) -> Result<f64, BoundsError> {
        self.gamma.ok_or(BoundsError::Undefined {
            constant: Constant::Gamma,
            reason: "beta2 = 0 with beta1 > 0",
        })
    }

    pub fn rho(&self) -> Result<f64, BoundsError> {
        self.rho.ok_or(BoundsError::Undefined {
            constant: Constant::Rho,
            reason: "beta1 = 0",
        })
    }

    /// `K = rho / (rho - 1) = beta2 / (beta2 - beta1^2)`
    pub fn k(&self) -> Result<f64, BoundsError> {
        self.k.ok_or(BoundsError::Undefined {
            constant: Constant::K,
            reason: "needs beta1 > 0 and beta2 > beta1^2",
        })
    }

    /// `K * x1^2 / x2`, the ceiling on `m_t^2 / v_t`.
    pub fn ratio_bound(&self) -> Result<f64, BoundsError> {
        self.ratio_bound.ok_or(BoundsError::Undefined {
            constant: Constant::RatioBound,
            reason: "needs beta1 > 0 and beta2 > beta1^2",
        })
    }

    /// `floor(-ln 2 / ln beta1)`
    pub fn tau(&self) -> Result<u32, BoundsError> {
        self.tau.ok_or(BoundsError::Undefined {
            constant: Constant::Tau,
            reason: "needs beta1 in (0, 1)",
        })
    }

    /// `2 ln beta1 / ln beta2`
    pub fn r(&self) -> Result<f64, BoundsError> {
        self.r.ok_or(BoundsError::Undefined {
            constant: Constant::R,
            reason: "needs beta1, beta2 in (0, 1)",
        })
    }
}

fn check_beta(name: &'static str, value: f64) -> Result<(), BoundsError> {
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(BoundsError::BetaDomain { name, value })
    }
}

pub fn derived_constants(beta1: f64, beta2: f64) -> Result<DerivedConstants, BoundsError> {
    check_beta("beta1", beta1)?;
    check_beta("beta2", beta2)?;
    let b1 = decimal_rational(beta1);
    let b2 = decimal_rational(beta2);
    let b1_sq = &b1 * &b1;
    let one = BigRational::one();
    let x1q = &one - &b1;
    let x2q = &one - &b2;

    let gamma = if beta1 == 0.0 {
        Some(0.0)
    } else if beta2 > 0.0 {
        Some(beta1 * beta1 / beta2.sqrt())
    } else {
        None
    };
    let rho = (beta1 > 0.0).then(|| rational_to_f64(&(&b2 / &b1_sq)));
    let (k, ratio_bound) = if beta1 > 0.0 && b2 > b1_sq {
        let kq = &b2 / (&b2 - &b1_sq);
        let ratio = &kq * &x1q * &x1q / &x2q;
        (Some(rational_to_f64(&kq)), Some(rational_to_f64(&ratio)))
    } else {
        (None, None)
    };
    let tau = (beta1 > 0.0).then(|| (-(2f64.ln()) / beta1.ln()).floor() as u32);
    let r = (beta1 > 0.0 && beta2 > 0.0).then(|| 2.0 * beta1.ln() / beta2.ln());

    Ok(DerivedConstants {
        beta1,
        beta2,
        x1: decimal_complement(beta1),
        x2: decimal_complement(beta2),
        gamma,
        rho,
        k,
        ratio_bound,
        tau,
        r,
        region: classify_rational(&b1, &b2),
    })
}

fn classify_rational(b1: &BigRational, b2: &BigRational) -> RegionClass {
    let two = BigRational::from_integer(2.into());
    let b1_sq = b1 * b1;
    let lower = &two * b1 - &b1_sq;
    let upper = &two * &b1_sq;
    let in_bock_scope = if b1.is_zero() {
        true
    } else {
        b2 > &(&b1_sq * &b1_sq)
    };
    let lemma32_ok = b2 >= &lower;
    let in_result33_scope = lemma32_ok && b2 < &upper;
    let lemma31_ok = !b1.is_zero() && b2 > &b1_sq && b2 < &upper;
    RegionClass {
        in_bock_scope,
        in_result33_scope,
        lemma31_ok,
        lemma32_ok,
    }
}

/// Classifies a pair. Out-of-domain betas classify as all-false.
pub fn classify_region(beta1: f64, beta2: f64) -> RegionClass {
    if check_beta("beta1", beta1).is_err() || check_beta("beta2", beta2).is_err() {
        return RegionClass::default();
    }
    classify_rational(&decimal_rational(beta1), &decimal_rational(beta2))
}

fn check_norm(g_norm: f64) -> Result<(), BoundsError> {
    if g_norm.is_finite() && g_norm >= 0.0 {
        Ok(())
    } else {
        Err(BoundsError::Norm(g_norm))
    }
}

/// Kingma-Ba bound `(2 / (1 - gamma)) * (1 / sqrt(1 - beta2)) * g_norm`.
pub fn kb_bound(constants: &DerivedConstants, g_norm: f64) -> Result<f64, BoundsError> {
    check_norm(g_norm)?;
    if !constants.region.in_bock_scope {
        return Err(BoundsError::OutOfScope {
            bound: "Kingma-Ba",
            constraint: "gamma = beta1^2/sqrt(beta2) < 1",
        });
    }
    let gamma = constants.gamma()?;
    Ok(2.0 / (1.0 - gamma) / constants.x2.sqrt() * g_norm)
}

/// `(2 + sqrt(tau)) * sqrt(1 + K x1^2/x2 * ln T) * g_norm`, valid on the
/// region `2 beta1 - beta1^2 <= beta2 < 2 beta1^2`.
pub fn result33_bound(
    constants: &DerivedConstants,
    horizon: u64,
    g_norm: f64,
) -> Result<f64, BoundsError> {
    check_norm(g_norm)?;
    if horizon == 0 {
        return Err(BoundsError::ZeroHorizon);
    }
    let region = constants.region;
    if !region.lemma32_ok {
        return Err(BoundsError::OutOfScope {
            bound: "log-T",
            constraint: "beta2 >= 2*beta1 - beta1^2",
        });
    }
    if !region.in_result33_scope {
        return Err(BoundsError::OutOfScope {
            bound: "log-T",
            constraint: "beta2 < 2*beta1^2",
        });
    }
    let tau = constants.tau()? as f64;
    let ratio = constants.ratio_bound()?;
    Ok((2.0 + tau.sqrt()) * (1.0 + ratio * (horizon as f64).ln()).sqrt() * g_norm)
}

/// Interval of `beta2` values in the log-T bound region for a given `beta1`,
/// as `[lo, hi)` in floating point. `None` when the region is empty there.
pub fn result33_beta2_interval(beta1: f64) -> Option<(f64, f64)> {
    if !(beta1 > 0.0 && beta1 < 1.0) {
        return None;
    }
    let x1 = 1.0 - beta1;
    let lo = 1.0 - x1 * x1;
    let hi = (2.0 * beta1 * beta1).min(1.0);
    (lo < hi).then_some((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCell {
    pub beta1: f64,
    pub beta2: f64,
    pub class: RegionClass,
}

/// Cell-centre grid over `(0,1)^2`, row-major with `beta1` as the row index.
pub fn region_grid(resolution: usize) -> Result<Vec<RegionCell>, BoundsError> {
    if resolution < 2 {
        return Err(BoundsError::Resolution(resolution));
    }
    let n = resolution as f64;
    let centre = move |i: usize| (i as f64 + 0.5) / n;
    Ok((0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let beta1 = centre(idx / resolution);
            let beta2 = centre(idx % resolution);
            RegionCell {
                beta1,
                beta2,
                class: classify_region(beta1, beta2),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_case_beta1_09() {
        let c = derived_constants(0.9, 0.99).unwrap();
        assert_eq!(c.k().unwrap(), 5.5);
        assert_eq!(c.tau().unwrap(), 6);
        assert_eq!(c.ratio_bound().unwrap(), 5.5);
        assert_eq!(c.x1, 0.1);
        assert_eq!(c.x2, 0.01);
        assert!(c.region.in_result33_scope);
        assert!(c.region.lemma31_ok && c.region.lemma32_ok);
        assert!(classify_region(0.9, 0.995).in_result33_scope);
        assert!(!classify_region(0.9, 0.989_999).lemma32_ok);
    }

    #[test]
    fn gamma_fig1() {
        let c = derived_constants(0.1, 0.1).unwrap();
        let g = c.gamma().unwrap();
        assert!((g - 0.031_622_776_601_683_79).abs() < 1e-15);
        assert!(c.region.in_bock_scope);
    }

    #[test]
    fn degenerate_beta1_zero() {
        let c = derived_constants(0.0, 0.0).unwrap();
        assert_eq!(c.gamma().unwrap(), 0.0);
        assert!(matches!(c.k(), Err(BoundsError::Undefined { constant: Constant::K, .. })));
        assert!(c.tau().is_err());
        assert!(c.r().is_err());
        assert!(c.rho().is_err());
        assert_eq!(kb_bound(&c, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn gamma_undefined_without_beta2() {
        let c = derived_constants(0.5, 0.0).unwrap();
        assert!(c.gamma().is_err());
        assert!(!c.region.in_bock_scope);
        assert!(matches!(kb_bound(&c, 1.0), Err(BoundsError::OutOfScope { .. })));
    }

    #[test]
    fn k_undefined_below_beta1_squared() {
        let c = derived_constants(0.5, 0.25).unwrap();
        assert!(matches!(c.k(), Err(BoundsError::Undefined { constant: Constant::K, .. })));
    }

    #[test]
    fn domain_errors() {
        assert!(derived_constants(1.0, 0.5).is_err());
        assert!(derived_constants(0.5, -0.1).is_err());
        assert_eq!(classify_region(1.2, 0.5), RegionClass::default());
    }

    #[test]
    fn kb_values() {
        let c = derived_constants(0.1, 0.1).unwrap();
        assert_eq!(kb_bound(&c, 0.0).unwrap(), 0.0);
        // 2 / (1 - 0.01/sqrt(0.1)) / sqrt(0.9), evaluated at 50 digits
        let expected = 2.177_028_802_247_834;
        assert!((kb_bound(&c, 1.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn result33_values() {
        let c = derived_constants(0.9, 0.99).unwrap();
        assert_eq!(result33_bound(&c, 1, 1.0).unwrap(), 2.0 + 6f64.sqrt());
        let b = result33_bound(&c, 100, 1.0).unwrap();
        let expected = (2.0 + 6f64.sqrt()) * (1.0 + 5.5 * 100f64.ln()).sqrt();
        assert!((b - expected).abs() < 1e-12);
        assert!((b - 22.830_884_699_374_876).abs() < 1e-12);
        assert!(matches!(result33_bound(&c, 0, 1.0), Err(BoundsError::ZeroHorizon)));
        let out = derived_constants(0.9, 0.98).unwrap();
        assert!(matches!(
            result33_bound(&out, 10, 1.0),
            Err(BoundsError::OutOfScope { constraint: "beta2 >= 2*beta1 - beta1^2", .. })
        ));
        let out = derived_constants(0.7, 0.99).unwrap();
        assert!(matches!(
            result33_bound(&out, 10, 1.0),
            Err(BoundsError::OutOfScope { constraint: "beta2 < 2*beta1^2", .. })
        ));
    }

    #[test]
    fn upper_boundary_is_exclusive() {
        // 2 * 0.7^2 = 0.98
        assert!(!classify_region(0.7, 0.98).in_result33_scope);
        assert!(classify_region(0.7, 0.979).in_result33_scope);
    }

    #[test]
    fn half_never_in_scope() {
        for j in 0..1000 {
            let b2 = j as f64 / 1000.0;
            assert!(!classify_region(0.5, b2).in_result33_scope);
        }
    }

    #[test]
    fn resolution_two_grid() {
        let g = region_grid(2).unwrap();
        let coords: Vec<(f64, f64)> = g.iter().map(|c| (c.beta1, c.beta2)).collect();
        assert_eq!(coords, vec![(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)]);
        // Hand-evaluated: 2b1-b1^2 is 0.4375 / 0.9375; rho is 4, 12, 4/9, 4/3;
        // gamma is 0.125, 0.072, 1.125, 0.65.
        let flags: Vec<(bool, bool, bool, bool)> = g
            .iter()
            .map(|c| (c.class.in_bock_scope, c.class.in_result33_scope, c.class.lemma31_ok, c.class.lemma32_ok))
            .collect();
        assert_eq!(
            flags,
            vec![
                (true, false, false, false),
                (true, false, false, true),
                (false, false, false, false),
                (true, false, true, false),
            ]
        );
        assert!(matches!(region_grid(1), Err(BoundsError::Resolution(1))));
    }

    #[test]
    fn green_fraction_is_small_but_nonzero() {
        let g = region_grid(400).unwrap();
        assert_eq!(g.len(), 160_000);
        let green = g.iter().filter(|c| c.class.in_result33_scope).count() as f64 / g.len() as f64;
        assert!(green > 0.0 && green < 0.2, "{green}");
    }

    #[test]
    fn interval_matches_classification() {
        assert!(result33_beta2_interval(0.6).is_none());
        let (lo, hi) = result33_beta2_interval(0.9).unwrap();
        assert!((lo - 0.99).abs() < 1e-15);
        assert_eq!(hi, 1.0);
    }

    proptest! {
        #[test]
        // f64 evaluation of rho/(rho-1) loses ~eps/(rho-1); rho-1 >= 2*x1/beta1
        // keeps that under 1e-14 for beta1 <= 0.95. The exact forms agree everywhere.
        fn k_forms_agree(b1 in 0.67f64..0.95, u in 0.0f64..1.0) {
            let Some((lo, hi)) = result33_beta2_interval(b1) else { return Ok(()); };
            let b2 = lo + u * (hi - lo);
            prop_assume!(classify_region(b1, b2).in_result33_scope);
            let c = derived_constants(b1, b2).unwrap();
            let rho = b2 / (b1 * b1);
            let via_rho = rho / (rho - 1.0);
            let direct = b2 / (b2 - b1 * b1);
            let k = c.k().unwrap();
            prop_assert!((via_rho - direct).abs() / direct < 1e-14);
            prop_assert!((k - direct).abs() / direct < 1e-14);
            prop_assert!(c.ratio_bound().unwrap() > 0.0);
        }

        #[test]
        fn k_forms_agree_exactly(b1 in 0.67f64..0.9999, u in 0.0f64..1.0) {
            let Some((lo, hi)) = result33_beta2_interval(b1) else { return Ok(()); };
            let b2 = lo + u * (hi - lo);
            prop_assume!(classify_region(b1, b2).in_result33_scope);
            let (q1, q2) = (decimal_rational(b1), decimal_rational(b2));
            let rho = &q2 / (&q1 * &q1);
            let via_rho = &rho / (&rho - BigRational::one());
            let direct = &q2 / (&q2 - &q1 * &q1);
            prop_assert_eq!(&via_rho, &direct);
            prop_assert_eq!(derived_constants(b1, b2).unwrap().k().unwrap(), rational_to_f64(&direct));
        }

        #[test]
        fn result33_implies_lemmas(b1 in 0.0f64..1.0, b2 in 0.0f64..1.0) {
            let c = classify_region(b1, b2);
            if c.in_result33_scope {
                prop_assert!(c.lemma31_ok && c.lemma32_ok);
                prop_assert!(b1 > 2.0 / 3.0);
                let d = derived_constants(b1, b2).unwrap();
                prop_assert!(d.r().unwrap() > 1.0);
                let rho = d.rho().unwrap();
                prop_assert!(rho > 1.0 && rho < 2.0);
            }
        }

        #[test]
        fn bounds_monotone(b1 in 0.7f64..0.99, u in 0.0f64..1.0, n1 in 0.0f64..10.0, dn in 0.0f64..10.0, t1 in 1u64..10_000, dt in 0u64..10_000) {
            let (lo, hi) = result33_beta2_interval(b1).unwrap();
            let b2 = lo + u * (hi - lo);
            let c = derived_constants(b1, b2).unwrap();
            prop_assume!(c.region.in_result33_scope);
            let a = result33_bound(&c, t1, n1).unwrap();
            prop_assert!(result33_bound(&c, t1, n1 + dn).unwrap() >= a);
            prop_assert!(result33_bound(&c, t1 + dt, n1).unwrap() >= a);
            if c.region.in_bock_scope {
                prop_assert!(kb_bound(&c, n1 + dn).unwrap() >= kb_bound(&c, n1).unwrap());
            }
        }
    }
}
