//! Numerical checkers for the inequalities that support the log-T bound on
//! `s_T`:
//!
//! * the moment-ratio ceiling `m_t^2 / v_t < K x1^2 / x2` (`L31`),
//! * the bias-correction factor `c_t = (1 - beta2^t) / (1 - beta1^t)^2 <= 1`
//!   and its trace form `m_hat^2 / v_hat <= m^2 / v` (`L32`),
//! * the two norm bounds used with Cauchy-Schwarz (`NormMhat`, `NormMu`),
//! * the auxiliary functions `y(beta1) <= 0` and `P(x1) >= 0`
//!   (`AppendixY`, `AppendixP`).
//!
//! Every checker reports slack normalised by the size of the bound, so one
//! relative tolerance covers all of them. A check fails when the slack drops
//! below `-tolerance`.

use std::fmt;

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{classify_region, derived_constants, result33_beta2_interval, BoundsError};
use crate::numeric::{log_spaced, norm2, CompensatedSum};
use crate::source::GradientSource;
use crate::trajectory::{run_gradients, HyperParams, StepOptions, Trace, TrajectoryError};

/// Relative tolerance for strict inequalities evaluated in floating point.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LemmaId {
    L31,
    L32,
    NormMhat,
    NormMu,
    AppendixY,
    AppendixP,
}

impl LemmaId {
    pub const ALL: [LemmaId; 6] = [
        LemmaId::L31,
        LemmaId::L32,
        LemmaId::NormMhat,
        LemmaId::NormMu,
        LemmaId::AppendixY,
        LemmaId::AppendixP,
    ];
}

impl fmt::Display for LemmaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LemmaId::L31 => "L31",
            LemmaId::L32 => "L32",
            LemmaId::NormMhat => "NormMhat",
            LemmaId::NormMu => "NormMu",
            LemmaId::AppendixY => "AppendixY",
            LemmaId::AppendixP => "AppendixP",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for LemmaId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LemmaId::ALL
            .into_iter()
            .find(|id| id.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown lemma id {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum LemmaError {
    #[error("{lemma} check out of scope: requires {constraint}")]
    OutOfScope {
        lemma: LemmaId,
        constraint: &'static str,
    },
    #[error("norm check needs nonnegative gradients with unit norm (norm {norm}, min {min})")]
    NotNormalized { norm: f64, min: f64 },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Outcome of one checker over one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub lemma_id: LemmaId,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: Option<u64>,
    /// Horizon: trace length, or the largest `t` on a continuous grid.
    pub horizon: f64,
    pub checked_steps: usize,
    /// Most negative normalised slack seen, or 0 when every slack was >= 0.
    pub max_slack_violation: f64,
    /// `t` (or grid time) of the first slack below `-tolerance_used`.
    pub first_violation_t: Option<f64>,
    pub tolerance_used: f64,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.first_violation_t.is_none()
    }
}

struct SlackTracker {
    report: LemmaReport,
}

impl SlackTracker {
    fn new(lemma_id: LemmaId, beta1: f64, beta2: f64, tolerance: f64) -> Self {
        Self {
            report: LemmaReport {
                lemma_id,
                beta1,
                beta2,
                seed: None,
                horizon: 0.0,
                checked_steps: 0,
                max_slack_violation: 0.0,
                first_violation_t: None,
                tolerance_used: tolerance,
            },
        }
    }

    fn record(&mut self, t: f64, slack: f64) {
        let r = &mut self.report;
        r.checked_steps += 1;
        r.horizon = r.horizon.max(t);
        // NaN slack counts as a violation.
        let slack = if slack.is_nan() { f64::NEG_INFINITY } else { slack };
        if slack < r.max_slack_violation {
            r.max_slack_violation = slack;
        }
        if slack < -r.tolerance_used && r.first_violation_t.is_none() {
            r.first_violation_t = Some(t);
        }
    }

    fn finish(self) -> LemmaReport {
        self.report
    }
}

fn require_unit_lambdas(trace: &Trace, lemma: LemmaId) -> Result<(), LemmaError> {
    if trace.hyper.lambda_m != 1.0 || trace.hyper.lambda_g != 1.0 {
        return Err(LemmaError::OutOfScope {
            lemma,
            constraint: "lambda_m = lambda_g = 1",
        });
    }
    Ok(())
}

/// Checks `m_t^2 / v_t < K x1^2 / x2` at every step.
pub fn check_ratio_bound(trace: &Trace, tolerance: f64) -> Result<LemmaReport, LemmaError> {
    require_unit_lambdas(trace, LemmaId::L31)?;
    let h = trace.hyper;
    let constants = derived_constants(h.beta1, h.beta2)?;
    if !constants.region.lemma31_ok {
        return Err(LemmaError::OutOfScope {
            lemma: LemmaId::L31,
            constraint: "rho = beta2/beta1^2 in (1, 2)",
        });
    }
    let bound = constants.ratio_bound()?;
    let mut tracker = SlackTracker::new(LemmaId::L31, h.beta1, h.beta2, tolerance);
    for s in &trace.steps {
        let ratio = if s.m == 0.0 { 0.0 } else { s.biased_ratio() };
        tracker.record(s.t as f64, (bound - ratio) / bound);
    }
    Ok(tracker.finish())
}

/// `c_t = (1 - beta2^t) / (1 - beta1^t)^2` for real `t`.
pub fn correction_factor(beta1: f64, beta2: f64, t: f64) -> f64 {
    let a = one_minus_pow(beta1, t);
    one_minus_pow(beta2, t) / (a * a)
}

/// `h(t) = (1 - beta2^t) - (1 - beta1^t)^2`
pub fn h_function(beta1: f64, beta2: f64, t: f64) -> f64 {
    let a = one_minus_pow(beta1, t);
    one_minus_pow(beta2, t) - a * a
}

/// `1 - beta^t` without cancellation for small `t ln beta`.
fn one_minus_pow(beta: f64, t: f64) -> f64 {
    if beta == 0.0 {
        1.0
    } else {
        -(t * beta.ln()).exp_m1()
    }
}

/// `P(alpha) = (1 - r) alpha^2 + r alpha - 1`, evaluated as
/// `(alpha - 1)((1 - r) alpha + 1)` so that `P(1) = 0` exactly.
pub fn polynomial_p(alpha: f64, r: f64) -> f64 {
    (alpha - 1.0) * ((1.0 - r) * alpha + 1.0)
}

/// `y(beta1) = beta1^(beta1/(beta1 - 2)) + beta1 - 2`, with `y(1) = 0`.
pub fn appendix_y(beta1: f64) -> f64 {
    beta1.powf(beta1 / (beta1 - 2.0)) + beta1 - 2.0
}

/// Closed-form `dy/dbeta1`.
pub fn appendix_y_derivative(beta1: f64) -> f64 {
    let power = beta1.powf(beta1 / (beta1 - 2.0));
    let two_minus = 2.0 - beta1;
    power * ((-2.0 * beta1.ln() + beta1 - 2.0) / (two_minus * two_minus)) + 1.0
}

/// Value the derivative would take at a root of `y`, where the power term
/// equals `2 - beta1`: `-2 ln(beta1) / (2 - beta1)`.
pub fn appendix_y_derivative_at_root(beta1: f64) -> f64 {
    let power = 2.0 - beta1;
    power * ((-2.0 * beta1.ln() + beta1 - 2.0) / (power * power)) + 1.0
}

/// Quantities from the proofs evaluated at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProofScalars {
    pub c_t: f64,
    pub h_t: f64,
    /// `1 - beta1^t`
    pub alpha: f64,
    pub mu_t: f64,
}

impl ProofScalars {
    pub fn at(hyper: &HyperParams, state: &crate::trajectory::TrajectoryState) -> Self {
        let t = state.t as f64;
        Self {
            c_t: correction_factor(hyper.beta1, hyper.beta2, t),
            h_t: h_function(hyper.beta1, hyper.beta2, t),
            alpha: one_minus_pow(hyper.beta1, t),
            mu_t: state.mu(),
        }
    }
}

/// The continuous-time grid used for `c_t` checks: 1000 log-spaced points on `[1, 1e4]`.
pub fn default_time_grid() -> Vec<f64> {
    log_spaced(1.0, 1e4, 1000)
}

/// Checks `c_t <= 1` over `times`. Runs for any pair so that out-of-scope
/// pairs can be shown to fail.
pub fn check_correction_factor(beta1: f64, beta2: f64, times: &[f64], tolerance: f64) -> LemmaReport {
    let mut tracker = SlackTracker::new(LemmaId::L32, beta1, beta2, tolerance);
    for &t in times {
        tracker.record(t, 1.0 - correction_factor(beta1, beta2, t));
    }
    tracker.finish()
}

/// Checks `m_hat_t^2 / v_hat_t <= m_t^2 / v_t` along a trace.
pub fn check_corrected_ratio(trace: &Trace, tolerance: f64) -> Result<LemmaReport, LemmaError> {
    require_unit_lambdas(trace, LemmaId::L32)?;
    let h = trace.hyper;
    if !classify_region(h.beta1, h.beta2).lemma32_ok {
        return Err(LemmaError::OutOfScope {
            lemma: LemmaId::L32,
            constraint: "beta2 >= 2*beta1 - beta1^2",
        });
    }
    let mut tracker = SlackTracker::new(LemmaId::L32, h.beta1, h.beta2, tolerance);
    for s in &trace.steps {
        if s.m == 0.0 {
            tracker.record(s.t as f64, 0.0);
            continue;
        }
        let biased = s.biased_ratio();
        tracker.record(s.t as f64, (biased - s.corrected_ratio()) / biased);
    }
    Ok(tracker.finish())
}

/// Checks `y(beta1) <= 0` on the given points.
pub fn check_appendix_y(points: &[f64], tolerance: f64) -> LemmaReport {
    let mut tracker = SlackTracker::new(LemmaId::AppendixY, f64::NAN, f64::NAN, tolerance);
    for &b in points {
        tracker.record(b, -appendix_y(b));
    }
    tracker.finish()
}

/// Checks `P(x1) >= 0` for one pair. `P` takes values in `[-1, 0]`-scale
/// units so the slack is absolute.
pub fn check_appendix_p(beta1: f64, beta2: f64, tolerance: f64) -> Result<LemmaReport, LemmaError> {
    let c = derived_constants(beta1, beta2)?;
    if !c.region.lemma32_ok {
        return Err(LemmaError::OutOfScope {
            lemma: LemmaId::AppendixP,
            constraint: "beta2 >= 2*beta1 - beta1^2",
        });
    }
    let r = c.r()?;
    let mut tracker = SlackTracker::new(LemmaId::AppendixP, beta1, beta2, tolerance);
    tracker.record(1.0, polynomial_p(1.0 - beta1, r));
    Ok(tracker.finish())
}

/// Result of [`check_norm_bounds`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormBoundsReport {
    pub mhat: LemmaReport,
    pub mu: LemmaReport,
    pub s_final: f64,
    pub mhat_norm: f64,
    pub mu_norm: f64,
    pub mhat_bound: f64,
    pub mu_bound: f64,
    /// `s_T <= ||m_hat|| * ||mu||` to relative rounding.
    pub cauchy_schwarz_ok: bool,
}

/// Checks, at every prefix `1..=t`,
/// `||m_hat_{1:t}|| < 2 + sqrt(tau)` and `||mu_{1:t}|| <= sqrt(1 + K x1^2/x2 ln t)`,
/// and at the end `s_T <= ||m_hat|| ||mu||`.
///
/// The trace must be in the log-T bound region with `lambda_g = 1` and its
/// gradients nonnegative with unit 2-norm.
pub fn check_norm_bounds(trace: &Trace, tolerance: f64) -> Result<NormBoundsReport, LemmaError> {
    let h = trace.hyper;
    if h.lambda_g != 1.0 {
        return Err(LemmaError::OutOfScope {
            lemma: LemmaId::NormMhat,
            constraint: "lambda_g = 1",
        });
    }
    let c = derived_constants(h.beta1, h.beta2)?;
    if !c.region.in_result33_scope {
        return Err(LemmaError::OutOfScope {
            lemma: LemmaId::NormMhat,
            constraint: "2*beta1 - beta1^2 <= beta2 < 2*beta1^2",
        });
    }
    let norm = trace.g_norm();
    let min = trace.steps.iter().map(|s| s.g).fold(f64::INFINITY, f64::min);
    if (norm - 1.0).abs() > 1e-12 || min < 0.0 {
        return Err(LemmaError::NotNormalized { norm, min });
    }
    let mhat_bound = 2.0 + (c.tau()? as f64).sqrt();
    let ratio = c.ratio_bound()?;

    let mut mhat_track = SlackTracker::new(LemmaId::NormMhat, h.beta1, h.beta2, tolerance);
    let mut mu_track = SlackTracker::new(LemmaId::NormMu, h.beta1, h.beta2, tolerance);
    let mut mhat_sq = CompensatedSum::default();
    let mut mu_sq = CompensatedSum::default();
    let mut mu_bound = 1.0;
    for s in &trace.steps {
        let t = s.t as f64;
        mhat_sq.add(s.m_hat * s.m_hat);
        let mu = s.mu();
        mu_sq.add(mu * mu);
        mhat_track.record(t, (mhat_bound - mhat_sq.value().sqrt()) / mhat_bound);
        mu_bound = (1.0 + ratio * t.ln()).sqrt();
        mu_track.record(t, (mu_bound - mu_sq.value().sqrt()) / mu_bound);
    }
    let mhat_norm = mhat_sq.value().sqrt();
    let mu_norm = mu_sq.value().sqrt();
    let s_final = trace.s_final();
    Ok(NormBoundsReport {
        mhat: mhat_track.finish(),
        mu: mu_track.finish(),
        s_final,
        mhat_norm,
        mu_norm,
        mhat_bound,
        mu_bound,
        cauchy_schwarz_ok: s_final <= mhat_norm * mu_norm * (1.0 + 1e-12),
    })
}

/// `|s_T(zeta g) - zeta s_T(g)| / (zeta s_T(g))` over the first `horizon` gradients.
pub fn homogeneity_check(
    source: &GradientSource,
    zeta: f64,
    hyper: &HyperParams,
    horizon: usize,
) -> Result<f64, LemmaError> {
    let g = source.values(horizon).map_err(TrajectoryError::from)?;
    let base = run_gradients(hyper, &g, StepOptions::default())?.s_final();
    let scaled: Vec<f64> = g.iter().map(|x| x * zeta).collect();
    let other = run_gradients(hyper, &scaled, StepOptions::default())?.s_final();
    Ok((other - zeta * base).abs() / (zeta * base))
}

/// Gradient distributions used by fuzz campaigns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuzzFamily {
    /// Uniform on `[0, 1)`.
    Nonnegative,
    /// Uniform on `[-1, 1)`.
    MixedSign,
    /// `1/sqrt(t)`; the seed is unused.
    InvSqrt,
}

impl fmt::Display for FuzzFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FuzzFamily::Nonnegative => "nonnegative",
            FuzzFamily::MixedSign => "mixed",
            FuzzFamily::InvSqrt => "invsqrt",
        })
    }
}

impl std::str::FromStr for FuzzFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nonnegative" => Ok(FuzzFamily::Nonnegative),
            "mixed" => Ok(FuzzFamily::MixedSign),
            "invsqrt" => Ok(FuzzFamily::InvSqrt),
            _ => Err(format!("unknown gradient family {s:?}; expected nonnegative, mixed or invsqrt")),
        }
    }
}

impl FuzzFamily {
    pub fn source(self, seed: u64) -> GradientSource {
        match self {
            FuzzFamily::Nonnegative => GradientSource::UniformRandom { lo: 0.0, hi: 1.0, seed },
            FuzzFamily::MixedSign => GradientSource::UniformRandom { lo: -1.0, hi: 1.0, seed },
            FuzzFamily::InvSqrt => GradientSource::InvSqrt,
        }
    }

    /// Gradients with `g_1 != 0` guaranteed.
    pub fn gradients(self, seed: u64, horizon: usize) -> Vec<f64> {
        let mut g = self.source(seed).values(horizon).expect("built-in sources are infallible");
        if g[0] == 0.0 {
            g[0] = 0.5;
        }
        g
    }
}

/// Rescales to unit 2-norm.
pub fn normalize(g: &[f64]) -> Vec<f64> {
    let n = norm2(g);
    g.iter().map(|x| x / n).collect()
}

/// `n * n` pairs satisfying `beta2 >= 2 beta1 - beta1^2`: `n` beta1 cell
/// centres in `(0, 1)`, each with `n` beta2 values spread over `[2b1 - b1^2, 1)`
/// starting on the boundary.
pub fn lemma32_grid(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let b1 = (i as f64 + 0.5) / n as f64;
        let x1 = 1.0 - b1;
        let mut lo = 1.0 - x1 * x1;
        while !classify_region(b1, lo).lemma32_ok {
            lo = lo.next_up();
        }
        for j in 0..n {
            let b2 = lo + (1.0 - lo) * j as f64 / n as f64;
            if b2 < 1.0 && classify_region(b1, b2).lemma32_ok {
                out.push((b1, b2));
            }
        }
    }
    out
}

/// Up to `n * n` pairs inside the log-T bound region: `n` beta1 cell centres
/// over `(2/3, 1)`, each with `n` beta2 cell centres over its allowed interval.
pub fn result33_grid(n: usize) -> Vec<(f64, f64)> {
    let lo1 = 2.0 / 3.0;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let b1 = lo1 + (1.0 - lo1) * (i as f64 + 0.5) / n as f64;
        let Some((lo, hi)) = result33_beta2_interval(b1) else {
            continue;
        };
        for j in 0..n {
            let b2 = lo + (hi - lo) * (j as f64 + 0.5) / n as f64;
            if classify_region(b1, b2).in_result33_scope {
                out.push((b1, b2));
            }
        }
    }
    out
}

/// Draws a pair uniformly-ish from the log-T bound region.
pub fn sample_result33_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let b1: f64 = rng.random_range((2.0 / 3.0)..1.0);
        let Some((lo, hi)) = result33_beta2_interval(b1) else {
            continue;
        };
        let b2 = rng.random_range(lo..hi);
        if classify_region(b1, b2).in_result33_scope {
            return (b1, b2);
        }
    }
}

/// Draws a pair with `rho = beta2 / beta1^2` in `(1, 2)` and `beta2 < 1`.
pub fn sample_lemma31_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let b1: f64 = rng.random_range(0.01..0.999);
        let rho_hi = (1.0 / (b1 * b1)).min(2.0);
        let rho = rng.random_range(1.0..rho_hi);
        let b2 = rho * b1 * b1;
        if b2 < 1.0 && classify_region(b1, b2).lemma31_ok {
            return (b1, b2);
        }
    }
}

/// One fuzz cell for the trace-based checkers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceCell {
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
    pub horizon: usize,
    pub family: FuzzFamily,
}

/// Runs the requested trace-based checkers on one cell. Checkers whose
/// hypotheses the cell does not meet are skipped.
pub fn verify_cell(cell: &TraceCell, lemmas: &[LemmaId], tolerance: f64) -> Result<Vec<LemmaReport>, LemmaError> {
    let hyper = HyperParams::with_betas(cell.beta1, cell.beta2).map_err(TrajectoryError::from)?;
    let class = classify_region(cell.beta1, cell.beta2);
    let gradients = cell.family.gradients(cell.seed, cell.horizon);
    let trace = run_gradients(&hyper, &gradients, StepOptions::default())?;
    let mut out = Vec::new();
    let tag = |mut r: LemmaReport| {
        r.seed = Some(cell.seed);
        r
    };
    for &lemma in lemmas {
        match lemma {
            LemmaId::L31 if class.lemma31_ok => out.push(tag(check_ratio_bound(&trace, tolerance)?)),
            LemmaId::L32 if class.lemma32_ok => out.push(tag(check_corrected_ratio(&trace, tolerance)?)),
            LemmaId::AppendixP if class.lemma32_ok => out.push(check_appendix_p(cell.beta1, cell.beta2, tolerance)?),
            _ => {}
        }
    }
    let wants_norms = lemmas.iter().any(|l| matches!(l, LemmaId::NormMhat | LemmaId::NormMu));
    if wants_norms && class.in_result33_scope && cell.family != FuzzFamily::MixedSign {
        let normed = run_gradients(&hyper, &normalize(&gradients), StepOptions::default())?;
        let report = check_norm_bounds(&normed, tolerance)?;
        if lemmas.contains(&LemmaId::NormMhat) {
            out.push(tag(report.mhat));
        }
        if lemmas.contains(&LemmaId::NormMu) {
            out.push(tag(report.mu));
        }
    }
    Ok(out)
}

/// Runs [`verify_cell`] over many cells in parallel; reports keep cell order.
pub fn verify_cells(cells: &[TraceCell], lemmas: &[LemmaId], tolerance: f64) -> Result<Vec<LemmaReport>, LemmaError> {
    let per_cell: Vec<Result<Vec<LemmaReport>, LemmaError>> =
        cells.par_iter().map(|c| verify_cell(c, lemmas, tolerance)).collect();
    let mut out = Vec::new();
    for r in per_cell {
        out.extend(r?);
    }
    Ok(out)
}
