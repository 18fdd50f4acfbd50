//! Element-wise Adam moment recurrences with the two decay knobs `lambda_m`
//! and `lambda_g`, and the running sum
//!
//! ```text
//! s_T = sum_{t=1..T} m_hat_t^2 / sqrt(t * v_hat_t)
//! ```
//!
//! One step of the recurrence is
//!
//! ```text
//! m_t     = beta1 * lambda_m^(t-1) * m_{t-1} + (1 - beta1 * lambda_g^(t-1)) * g_t
//! v_t     = beta2 * v_{t-1} + (1 - beta2) * g_t^2
//! m_hat_t = m_t / (1 - beta1^t)
//! v_hat_t = v_t / (1 - beta2^t)
//! ```
//!
//! `beta = 0` is accepted and gives the limit `m_hat_t = g_t`, `v_hat_t = g_t^2`
//! because the bias-correction divisor becomes `1 - 0^t = 1`.
//!
//! Powers of `beta` and `lambda` are carried as running products in the state,
//! so every step is O(1) and replaying a step from its predecessor reproduces
//! it bit for bit.

use thiserror::Error;

use crate::numeric::{CompensatedSum, Summation};
use crate::source::{GradientSource, SourceError};

#[derive(Debug, Error, PartialEq)]
pub enum HyperError {
    #[error("eta must be positive and finite, got {0}")]
    Eta(f64),
    #[error("{name} must lie in [0, 1), got {value}")]
    Beta { name: &'static str, value: f64 },
    #[error("{name} must lie in (0, 1], got {value}")]
    Lambda { name: &'static str, value: f64 },
}

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error("s_T is undefined: g_1 = 0")]
    ZeroFirstGradient,
    #[error("step {t}: gradient is not finite ({value})")]
    NonFiniteGradient { t: u64, value: f64 },
    #[error("step {t}: v_hat = 0 with m_hat != 0, s_t is undefined")]
    ZeroSecondMoment { t: u64 },
    #[error("duration must be at least 1")]
    EmptyHorizon,
    #[error(transparent)]
    Source(#[from] SourceError),
}

#[derive(Debug, Error, PartialEq)]
pub enum UpdateError {
    #[error("element {index}: sqrt(v_hat) + eps = 0, update divides by zero")]
    DivisionByZero { index: usize },
    #[error("length mismatch: theta {theta}, m_hat {m_hat}, v_hat {v_hat}")]
    LengthMismatch {
        theta: usize,
        m_hat: usize,
        v_hat: usize,
    },
    #[error("step index must be at least 1")]
    ZeroStep,
}

/// Optimizer knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda_m: f64,
    pub lambda_g: f64,
}

impl HyperParams {
    pub fn new(
        eta: f64,
        beta1: f64,
        beta2: f64,
        lambda_m: f64,
        lambda_g: f64,
    ) -> Result<Self, HyperError> {
        let hyper = Self {
            eta,
            beta1,
            beta2,
            lambda_m,
            lambda_g,
        };
        hyper.validate()?;
        Ok(hyper)
    }

    /// `eta = 1`, `lambda_m = lambda_g = 1`.
    pub fn with_betas(beta1: f64, beta2: f64) -> Result<Self, HyperError> {
        Self::new(1.0, beta1, beta2, 1.0, 1.0)
    }

    /// The run that overtakes the Kingma-Ba bound at t = 59:
    /// `beta1 = beta2 = 0.1`, `lambda_m = lambda_g = 1 - 1e-8`.
    pub fn fig1() -> Self {
        Self {
            eta: 1.0,
            beta1: 0.1,
            beta2: 0.1,
            lambda_m: 1.0 - 1e-8,
            lambda_g: 1.0 - 1e-8,
        }
    }

    pub fn with_lambdas(mut self, lambda_m: f64, lambda_g: f64) -> Result<Self, HyperError> {
        self.lambda_m = lambda_m;
        self.lambda_g = lambda_g;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), HyperError> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(HyperError::Eta(self.eta));
        }
        for (name, value) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&value) {
                return Err(HyperError::Beta { name, value });
            }
        }
        for (name, value) in [("lambda_m", self.lambda_m), ("lambda_g", self.lambda_g)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(HyperError::Lambda { name, value });
            }
        }
        Ok(())
    }
}

/// Running powers and accumulators carried from one step to the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carry {
    /// `beta1^t`
    pub beta1_pow: f64,
    /// `beta2^t`
    pub beta2_pow: f64,
    /// `lambda_m^t`, the factor the next step applies to its history term.
    pub lambda_m_pow: f64,
    /// `lambda_g^t`
    pub lambda_g_pow: f64,
    s_acc: CompensatedSum,
    g_sq_acc: CompensatedSum,
}

impl Carry {
    fn initial(summation: Summation) -> Self {
        Self {
            beta1_pow: 1.0,
            beta2_pow: 1.0,
            lambda_m_pow: 1.0,
            lambda_g_pow: 1.0,
            s_acc: CompensatedSum::new(summation),
            g_sq_acc: CompensatedSum::new(summation),
        }
    }
}

/// State after step `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub t: u64,
    pub g: f64,
    pub m: f64,
    pub v: f64,
    pub m_hat: f64,
    pub v_hat: f64,
    /// `s_t`; stays 0 when accumulation is switched off.
    pub s_running: f64,
    /// `sum_{i<=t} g_i^2`
    pub g_norm_sq_running: f64,
    pub carry: Carry,
}

impl TrajectoryState {
    /// `m_hat_t / sqrt(t * v_hat_t)`, the second factor of the dot-product
    /// form of `s_T`. Zero when `m_hat_t = 0`.
    pub fn mu(&self) -> f64 {
        if self.m_hat == 0.0 {
            0.0
        } else {
            self.m_hat / (self.t as f64 * self.v_hat).sqrt()
        }
    }

    /// `m_t^2 / v_t`
    pub fn biased_ratio(&self) -> f64 {
        self.m * self.m / self.v
    }

    /// `m_hat_t^2 / v_hat_t`
    pub fn corrected_ratio(&self) -> f64 {
        self.m_hat * self.m_hat / self.v_hat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOptions {
    pub accumulate_s: bool,
    pub summation: Summation,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            accumulate_s: true,
            summation: Summation::Compensated,
        }
    }
}

/// One step with `s` accumulation and compensated summation.
pub fn step(
    prev: Option<&TrajectoryState>,
    g: f64,
    hyper: &HyperParams,
) -> Result<TrajectoryState, TrajectoryError> {
    step_with(prev, g, hyper, StepOptions::default())
}

/// One step of the recurrence. `prev = None` means `t = 1` with `m_0 = v_0 = 0`.
///
/// When `prev` is given its accumulators keep their original summation mode;
/// `opts.summation` only applies to the first step.
pub fn step_with(
    prev: Option<&TrajectoryState>,
    g: f64,
    hyper: &HyperParams,
    opts: StepOptions,
) -> Result<TrajectoryState, TrajectoryError> {
    hyper.validate()?;
    let (t, m_prev, v_prev, mut carry) = match prev {
        Some(p) => (p.t + 1, p.m, p.v, p.carry),
        None => (1, 0.0, 0.0, Carry::initial(opts.summation)),
    };
    if !g.is_finite() {
        return Err(TrajectoryError::NonFiniteGradient { t, value: g });
    }
    if t == 1 && g == 0.0 && opts.accumulate_s {
        return Err(TrajectoryError::ZeroFirstGradient);
    }

    let m = hyper.beta1 * carry.lambda_m_pow * m_prev + (1.0 - hyper.beta1 * carry.lambda_g_pow) * g;
    let v = hyper.beta2 * v_prev + (1.0 - hyper.beta2) * g * g;

    carry.beta1_pow *= hyper.beta1;
    carry.beta2_pow *= hyper.beta2;
    carry.lambda_m_pow *= hyper.lambda_m;
    carry.lambda_g_pow *= hyper.lambda_g;

    let m_hat = m / (1.0 - carry.beta1_pow);
    let v_hat = v / (1.0 - carry.beta2_pow);

    carry.g_sq_acc.add(g * g);
    if opts.accumulate_s {
        let term = if m_hat == 0.0 {
            0.0
        } else if v_hat == 0.0 {
            return Err(TrajectoryError::ZeroSecondMoment { t });
        } else {
            m_hat * m_hat / (t as f64 * v_hat).sqrt()
        };
        carry.s_acc.add(term);
    }

    Ok(TrajectoryState {
        t,
        g,
        m,
        v,
        m_hat,
        v_hat,
        s_running: carry.s_acc.value(),
        g_norm_sq_running: carry.g_sq_acc.value(),
        carry,
    })
}

/// The full per-step record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub hyper: HyperParams,
    pub steps: Vec<TrajectoryState>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `s_T` at the final step.
    pub fn s_final(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.s_running)
    }

    /// `||g_{1:T}||_2`
    pub fn g_norm(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.g_norm_sq_running.sqrt())
    }

    pub fn gradients(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.g).collect()
    }
}

/// Runs `duration` steps on the gradients produced by `source`.
pub fn run_trace(
    hyper: &HyperParams,
    source: &GradientSource,
    duration: usize,
) -> Result<Trace, TrajectoryError> {
    if duration == 0 {
        return Err(TrajectoryError::EmptyHorizon);
    }
    let gradients = source.values(duration)?;
    run_gradients(hyper, &gradients, StepOptions::default())
}

/// Runs the recurrence over an explicit gradient slice.
pub fn run_gradients(
    hyper: &HyperParams,
    gradients: &[f64],
    opts: StepOptions,
) -> Result<Trace, TrajectoryError> {
    hyper.validate()?;
    if gradients.is_empty() {
        return Err(TrajectoryError::EmptyHorizon);
    }
    let mut steps: Vec<TrajectoryState> = Vec::with_capacity(gradients.len());
    for &g in gradients {
        let next = step_with(steps.last(), g, hyper, opts)?;
        steps.push(next);
    }
    Ok(Trace {
        hyper: *hyper,
        steps,
    })
}

/// `s_T` alone, without keeping the per-step record.
pub fn s_final(hyper: &HyperParams, gradients: &[f64]) -> Result<f64, TrajectoryError> {
    let mut state: Option<TrajectoryState> = None;
    for &g in gradients {
        state = Some(step(state.as_ref(), g, hyper)?);
    }
    state.map(|s| s.s_running).ok_or(TrajectoryError::EmptyHorizon)
}

/// Parameter update `theta_t = theta_{t-1} - (eta/sqrt(t)) * m_hat / (sqrt(v_hat) + eps)`.
///
/// With `epsilon = 0` this is the bare update without a stabiliser; a zero
/// `v_hat` element then reports [`UpdateError::DivisionByZero`] instead of
/// producing a non-finite parameter.
pub fn theta_update(
    theta_prev: &[f64],
    m_hat: &[f64],
    v_hat: &[f64],
    t: u64,
    hyper: &HyperParams,
    epsilon: f64,
) -> Result<Vec<f64>, UpdateError> {
    if t == 0 {
        return Err(UpdateError::ZeroStep);
    }
    apply_update(theta_prev, m_hat, v_hat, hyper.eta / (t as f64).sqrt(), epsilon)
}

pub(crate) fn apply_update(
    theta_prev: &[f64],
    m_hat: &[f64],
    v_hat: &[f64],
    step_size: f64,
    epsilon: f64,
) -> Result<Vec<f64>, UpdateError> {
    if theta_prev.len() != m_hat.len() || m_hat.len() != v_hat.len() {
        return Err(UpdateError::LengthMismatch {
            theta: theta_prev.len(),
            m_hat: m_hat.len(),
            v_hat: v_hat.len(),
        });
    }
    theta_prev
        .iter()
        .zip(m_hat.iter().zip(v_hat))
        .enumerate()
        .map(|(index, (&theta, (&m, &v)))| {
            if m == 0.0 {
                return Ok(theta);
            }
            let denom = v.sqrt() + epsilon;
            if denom == 0.0 {
                return Err(UpdateError::DivisionByZero { index });
            }
            Ok(theta - step_size * m / denom)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hyper(b1: f64, b2: f64) -> HyperParams {
        HyperParams::with_betas(b1, b2).unwrap()
    }

    #[test]
    fn first_step_half_betas() {
        let s = step(None, 1.0, &hyper(0.5, 0.5)).unwrap();
        assert_eq!((s.m, s.v, s.m_hat, s.v_hat, s.s_running), (0.5, 0.5, 1.0, 1.0, 1.0));
    }

    #[test]
    fn first_step_s_is_abs_g() {
        for (b1, b2) in [(0.0, 0.0), (0.3, 0.7), (0.9, 0.999)] {
            let h = HyperParams::new(0.1, b1, b2, 0.5, 0.25).unwrap();
            let s = step(None, -3.0, &h).unwrap();
            assert!((s.s_running - 3.0).abs() < 1e-15, "{b1} {b2}: {}", s.s_running);
        }
    }

    #[test]
    fn zero_first_gradient_is_rejected_only_when_accumulating() {
        let h = hyper(0.9, 0.99);
        assert!(matches!(step(None, 0.0, &h), Err(TrajectoryError::ZeroFirstGradient)));
        let opts = StepOptions {
            accumulate_s: false,
            ..StepOptions::default()
        };
        assert!(step_with(None, 0.0, &h, opts).is_ok());
    }

    #[test]
    fn non_finite_gradient_reports_step() {
        let h = hyper(0.9, 0.99);
        let s1 = step(None, 1.0, &h).unwrap();
        let err = step(Some(&s1), f64::NAN, &h).unwrap_err();
        assert!(matches!(err, TrajectoryError::NonFiniteGradient { t: 2, .. }));
        let err = run_gradients(&h, &[1.0, 2.0, f64::INFINITY], StepOptions::default()).unwrap_err();
        assert!(matches!(err, TrajectoryError::NonFiniteGradient { t: 3, .. }));
    }

    #[test]
    fn beta_zero_limit() {
        let trace = run_trace(&hyper(0.0, 0.0), &GradientSource::Constant(1.0), 4).unwrap();
        let expected = 1.0 + 1.0 / 2f64.sqrt() + 1.0 / 3f64.sqrt() + 0.5;
        assert!((trace.s_final() - expected).abs() < 1e-15);
        for s in &trace.steps {
            assert_eq!(s.m_hat, 1.0);
            assert_eq!(s.v_hat, 1.0);
        }
    }

    #[test]
    fn zero_second_moment_is_detected() {
        // beta2 = 0 forgets g_1 immediately while beta1 > 0 keeps it in m.
        let h = hyper(0.5, 0.0);
        let err = run_gradients(&h, &[1.0, 0.0], StepOptions::default()).unwrap_err();
        assert!(matches!(err, TrajectoryError::ZeroSecondMoment { t: 2 }));
    }

    #[test]
    fn single_step_inv_sqrt() {
        let t = run_trace(&HyperParams::fig1(), &GradientSource::InvSqrt, 1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.s_final(), 1.0);
        assert!(matches!(
            run_trace(&HyperParams::fig1(), &GradientSource::InvSqrt, 0),
            Err(TrajectoryError::EmptyHorizon)
        ));
    }

    #[test]
    fn invalid_hyper_rejected() {
        assert!(HyperParams::new(0.0, 0.5, 0.5, 1.0, 1.0).is_err());
        assert!(HyperParams::new(1.0, 1.0, 0.5, 1.0, 1.0).is_err());
        assert!(HyperParams::new(1.0, 0.5, -0.1, 1.0, 1.0).is_err());
        assert!(HyperParams::new(1.0, 0.5, 0.5, 0.0, 1.0).is_err());
        assert!(HyperParams::new(1.0, 0.5, 0.5, 1.0, 1.5).is_err());
        assert!(HyperParams::new(1.0, 0.0, 0.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn theta_update_examples() {
        let h = HyperParams::new(0.1, 0.9, 0.999, 1.0, 1.0).unwrap();
        assert_eq!(theta_update(&[1.0], &[1.0], &[1.0], 1, &h, 0.0).unwrap(), vec![0.9]);
        assert_eq!(
            theta_update(&[3.0, -2.0], &[0.0, 0.0], &[0.0, 5.0], 7, &h, 0.0).unwrap(),
            vec![3.0, -2.0]
        );
        let h1 = HyperParams::new(1.0, 0.9, 0.999, 1.0, 1.0).unwrap();
        assert_eq!(theta_update(&[0.0], &[2.0], &[4.0], 4, &h1, 0.0).unwrap(), vec![-0.5]);
    }

    #[test]
    fn theta_update_errors() {
        let h = HyperParams::with_betas(0.9, 0.999).unwrap();
        assert_eq!(
            theta_update(&[1.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], 1, &h, 0.0),
            Err(UpdateError::DivisionByZero { index: 1 })
        );
        assert!(theta_update(&[1.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], 1, &h, 1e-8).is_ok());
        assert!(matches!(
            theta_update(&[1.0], &[1.0, 1.0], &[1.0], 1, &h, 0.0),
            Err(UpdateError::LengthMismatch { .. })
        ));
        assert_eq!(theta_update(&[1.0], &[1.0], &[1.0], 0, &h, 0.0), Err(UpdateError::ZeroStep));
    }

    #[test]
    fn replaying_a_step_is_bit_exact() {
        let src = GradientSource::UniformRandom { lo: -1.0, hi: 1.0, seed: 3 };
        let trace = run_trace(&HyperParams::fig1(), &src, 300).unwrap();
        for (i, s) in trace.steps.iter().enumerate() {
            assert_eq!(s.t as usize, i + 1);
        }
        for w in trace.steps.windows(2) {
            let again = step(Some(&w[0]), w[1].g, &trace.hyper).unwrap();
            assert_eq!(again, w[1]);
        }
    }

    fn nonneg_gradients() -> impl Strategy<Value = Vec<f64>> {
        (prop::collection::vec(0.0f64..1.0, 1..200), 0.01f64..1.0).prop_map(|(mut v, first)| {
            v[0] = first;
            v
        })
    }

    proptest! {
        #[test]
        fn ema_contracts_norm(gs in nonneg_gradients(), b1 in 0.0f64..0.999, b2 in 0.0f64..0.999) {
            let trace = run_gradients(&hyper(b1, b2), &gs, StepOptions::default()).unwrap();
            let m_norm = crate::numeric::norm2(&trace.steps.iter().map(|s| s.m).collect::<Vec<_>>());
            prop_assert!(trace.steps.iter().all(|s| s.m >= 0.0));
            prop_assert!(m_norm <= trace.g_norm() * (1.0 + 1e-12));
        }

        #[test]
        fn s_is_nondecreasing_for_nonneg_gradients(gs in nonneg_gradients(), b1 in 0.0f64..0.99, b2 in 0.0f64..0.99) {
            let trace = run_gradients(&hyper(b1, b2), &gs, StepOptions::default()).unwrap();
            prop_assert!(trace.steps.windows(2).all(|w| w[1].s_running >= w[0].s_running));
        }

        #[test]
        fn corrected_first_step_is_gradient(g in -10.0f64..10.0, b1 in 0.0f64..0.999, b2 in 0.0f64..0.999, lm in 0.01f64..=1.0) {
            prop_assume!(g != 0.0);
            let h = HyperParams::new(1.0, b1, b2, lm, 1.0).unwrap();
            let s = step(None, g, &h).unwrap();
            prop_assert!((s.m_hat - g).abs() <= 1e-15 * g.abs() * 4.0);
            prop_assert!((s.v_hat - g * g).abs() <= 1e-15 * g * g * 4.0);
        }

        #[test]
        fn homogeneous_degree_one(gs in nonneg_gradients(), zeta in prop::sample::select(vec![1e-6, 0.5, 2.0, 1e6])) {
            let h = HyperParams::fig1();
            let base = run_gradients(&h, &gs, StepOptions::default()).unwrap();
            let scaled: Vec<f64> = gs.iter().map(|g| g * zeta).collect();
            let other = run_gradients(&h, &scaled, StepOptions::default()).unwrap();
            for (a, b) in base.steps.iter().zip(&other.steps) {
                let rel = (b.s_running - zeta * a.s_running).abs() / (zeta * a.s_running);
                prop_assert!(rel < 1e-10, "rel {}", rel);
            }
        }

        #[test]
        fn lambda_m_only_shrinks_s(gs in nonneg_gradients(), b1 in 0.01f64..0.99, b2 in 0.01f64..0.99,
                                   lm_hi in 0.5f64..=1.0, frac in 0.0f64..1.0) {
            let lm_lo = lm_hi * (0.5 + 0.5 * frac);
            let hi = HyperParams::new(1.0, b1, b2, lm_hi, 1.0).unwrap();
            let lo = HyperParams::new(1.0, b1, b2, lm_lo, 1.0).unwrap();
            let s_hi = s_final(&hi, &gs).unwrap();
            let s_lo = s_final(&lo, &gs).unwrap();
            prop_assert!(s_lo <= s_hi * (1.0 + 1e-12), "{} > {}", s_lo, s_hi);
        }

        #[test]
        fn deterministic(seed in any::<u64>()) {
            let src = GradientSource::UniformRandom { lo: -1.0, hi: 1.0, seed };
            let a = run_trace(&HyperParams::fig1(), &src, 50).unwrap();
            let b = run_trace(&HyperParams::fig1(), &src, 50).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
