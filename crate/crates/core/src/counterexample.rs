//! Searches for steps where `s_t` overtakes a bound evaluated on the gradient
//! prefix `g_{1:t}`.
//!
//! With `beta1 = beta2 = 0` and `g_t = 1/sqrt(t)`, `s_T` is the harmonic number
//! `H_T` while the Kingma-Ba bound is `2 sqrt(H_T)`, so the bound fails as soon
//! as `H_T > 4`. Small positive betas inherit the failure by continuity.

use std::fmt;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{derived_constants, kb_bound, result33_beta2_interval, result33_bound, BoundsError, DerivedConstants};
use crate::lemma::FuzzFamily;
use crate::numeric::{CompensatedSum, Summation};
use crate::source::GradientSource;
use crate::trajectory::{step_with, HyperParams, StepOptions, TrajectoryError, TrajectoryState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// `(2/(1-gamma)) (1/sqrt(1-beta2)) ||g_{1:t}||`
    KingmaBa,
    /// `(2+sqrt(tau)) sqrt(1 + K x1^2/x2 ln t) ||g_{1:t}||`
    LogT,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::KingmaBa => "kb",
            BoundKind::LogT => "logt",
        })
    }
}

impl std::str::FromStr for BoundKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kb" => Ok(BoundKind::KingmaBa),
            "logt" => Ok(BoundKind::LogT),
            _ => Err(format!("unknown bound {s:?}; expected kb or logt")),
        }
    }
}

#[derive(Debug, Error)]
pub enum CounterexampleError {
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("log-T bound requires lambda_g = 1, got {0}")]
    LambdaG(f64),
    #[error("invalid search range for {name}: [{lo}, {hi}] ({reason})")]
    Range {
        name: &'static str,
        lo: f64,
        hi: f64,
        reason: &'static str,
    },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
}

/// First step where `s_t` strictly exceeds the bound, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingResult {
    pub hyper: HyperParams,
    pub source: GradientSource,
    pub bound_kind: BoundKind,
    pub t_max: usize,
    pub first_crossing_t: Option<u64>,
    /// `s_t - bound(t)` at the crossing; without a crossing, the largest
    /// (least negative) value seen.
    pub margin_at_crossing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingPoint {
    pub t: u64,
    pub s: f64,
    pub bound: f64,
}

impl CrossingPoint {
    pub fn margin(&self) -> f64 {
        self.s - self.bound
    }
}

/// Smallest `T <= t_max` with `H_T = 1 + 1/2 + ... + 1/T > 4`.
pub fn analytic_limit_violation(t_max: u64) -> Option<u64> {
    let mut h = CompensatedSum::default();
    for t in 1..=t_max {
        h.add(1.0 / t as f64);
        if h.value() > 4.0 {
            return Some(t);
        }
    }
    None
}

struct Scanner {
    constants: DerivedConstants,
    kind: BoundKind,
}

impl Scanner {
    fn new(hyper: &HyperParams, kind: BoundKind) -> Result<Self, CounterexampleError> {
        hyper.validate().map_err(TrajectoryError::from)?;
        let constants = derived_constants(hyper.beta1, hyper.beta2)?;
        match kind {
            BoundKind::KingmaBa => {
                kb_bound(&constants, 0.0)?;
            }
            BoundKind::LogT => {
                if hyper.lambda_g != 1.0 {
                    return Err(CounterexampleError::LambdaG(hyper.lambda_g));
                }
                result33_bound(&constants, 1, 0.0)?;
            }
        }
        Ok(Self { constants, kind })
    }

    fn bound(&self, state: &TrajectoryState) -> Result<f64, BoundsError> {
        let norm = state.g_norm_sq_running.sqrt();
        match self.kind {
            BoundKind::KingmaBa => kb_bound(&self.constants, norm),
            BoundKind::LogT => result33_bound(&self.constants, state.t, norm),
        }
    }
}

/// Scans `t = 1..=t_max` for the first `s_t > bound(t)`.
pub fn find_first_crossing(
    hyper: &HyperParams,
    source: &GradientSource,
    t_max: usize,
    kind: BoundKind,
) -> Result<CrossingResult, CounterexampleError> {
    find_first_crossing_with(hyper, source, t_max, kind, Summation::Compensated)
}

/// [`find_first_crossing`] with an explicit summation mode for `s_t`.
pub fn find_first_crossing_with(
    hyper: &HyperParams,
    source: &GradientSource,
    t_max: usize,
    kind: BoundKind,
    summation: Summation,
) -> Result<CrossingResult, CounterexampleError> {
    if t_max == 0 {
        return Err(CounterexampleError::ZeroHorizon);
    }
    let scanner = Scanner::new(hyper, kind)?;
    let gradients = source.values(t_max).map_err(TrajectoryError::from)?;
    let opts = StepOptions {
        accumulate_s: true,
        summation,
    };
    let mut state: Option<TrajectoryState> = None;
    let mut best = f64::NEG_INFINITY;
    let mut first = None;
    for &g in &gradients {
        let next = step_with(state.as_ref(), g, hyper, opts)?;
        let margin = next.s_running - scanner.bound(&next)?;
        state = Some(next);
        if margin > 0.0 {
            first = Some(next.t);
            best = margin;
            break;
        }
        best = best.max(margin);
    }
    Ok(CrossingResult {
        hyper: *hyper,
        source: source.clone(),
        bound_kind: kind,
        t_max,
        first_crossing_t: first,
        margin_at_crossing: best,
    })
}

/// `s_t` and the bound at every step up to `horizon`.
pub fn crossing_profile(
    hyper: &HyperParams,
    source: &GradientSource,
    horizon: usize,
    kind: BoundKind,
) -> Result<Vec<CrossingPoint>, CounterexampleError> {
    if horizon == 0 {
        return Err(CounterexampleError::ZeroHorizon);
    }
    let scanner = Scanner::new(hyper, kind)?;
    let gradients = source.values(horizon).map_err(TrajectoryError::from)?;
    let mut state: Option<TrajectoryState> = None;
    let mut out = Vec::with_capacity(horizon);
    for &g in &gradients {
        let next = step_with(state.as_ref(), g, hyper, StepOptions::default())?;
        out.push(CrossingPoint {
            t: next.t,
            s: next.s_running,
            bound: scanner.bound(&next)?,
        });
        state = Some(next);
    }
    Ok(out)
}

/// A randomised search over `(beta1, beta2, lambda)` boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzSearch {
    pub beta1: (f64, f64),
    pub beta2: (f64, f64),
    /// Range for `lambda_m = lambda_g` (Kingma-Ba) or `lambda_m` with
    /// `lambda_g = 1` (log-T).
    pub lambda: (f64, f64),
    pub family: FuzzFamily,
    pub seeds: Vec<u64>,
    /// Cells drawn per seed.
    pub budget: usize,
    pub t_max: usize,
    pub bound_kind: BoundKind,
}

/// A cell of a fuzz search, kept so results can be replayed.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchCell {
    pub seed: u64,
    pub index: usize,
    pub hyper: HyperParams,
    pub source: GradientSource,
}

fn check_range(name: &'static str, (lo, hi): (f64, f64), ok: impl Fn(f64) -> bool, reason: &'static str) -> Result<(), CounterexampleError> {
    if lo <= hi && ok(lo) && ok(hi) {
        Ok(())
    } else {
        Err(CounterexampleError::Range { name, lo, hi, reason })
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn source_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_add(1)
}

impl FuzzSearch {
    fn validate(&self) -> Result<(), CounterexampleError> {
        check_range("beta1", self.beta1, |b| (0.0..1.0).contains(&b), "must lie in [0, 1)")?;
        check_range("beta2", self.beta2, |b| (0.0..1.0).contains(&b), "must lie in [0, 1)")?;
        if self.t_max == 0 {
            return Err(CounterexampleError::ZeroHorizon);
        }
        match self.bound_kind {
            BoundKind::KingmaBa => {
                check_range("lambda", self.lambda, |l| l > 0.0 && l < 1.0, "must lie in (0, 1)")?;
                // gamma is largest at (beta1 max, beta2 min)
                let worst = derived_constants(self.beta1.1, self.beta2.0)?;
                if !worst.region.in_bock_scope {
                    return Err(CounterexampleError::Range {
                        name: "beta1 x beta2",
                        lo: self.beta1.1,
                        hi: self.beta2.0,
                        reason: "gamma >= 1 at (max beta1, min beta2)",
                    });
                }
            }
            BoundKind::LogT => {
                check_range("lambda", self.lambda, |l| l > 0.0 && l <= 1.0, "must lie in (0, 1]")?;
            }
        }
        Ok(())
    }

    /// The cells the search will scan, in deterministic order.
    pub fn cells(&self) -> Result<Vec<SearchCell>, CounterexampleError> {
        self.validate()?;
        let mut out = Vec::new();
        for &seed in &self.seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for index in 0..self.budget {
                let beta1 = draw(&mut rng, self.beta1);
                let lambda = draw(&mut rng, self.lambda);
                let u: f64 = rng.random();
                let beta2 = match self.bound_kind {
                    BoundKind::KingmaBa => self.beta2.0 + u * (self.beta2.1 - self.beta2.0),
                    BoundKind::LogT => {
                        let Some((lo, hi)) = result33_beta2_interval(beta1) else {
                            continue;
                        };
                        let (lo, hi) = (lo.max(self.beta2.0), hi.min(self.beta2.1));
                        if lo > hi {
                            continue;
                        }
                        lo + u * (hi - lo)
                    }
                };
                let (lambda_m, lambda_g) = match self.bound_kind {
                    BoundKind::KingmaBa => (lambda, lambda),
                    BoundKind::LogT => (lambda, 1.0),
                };
                let Ok(hyper) = HyperParams::new(1.0, beta1, beta2, lambda_m, lambda_g) else {
                    continue;
                };
                if self.bound_kind == BoundKind::LogT
                    && !derived_constants(beta1, beta2).is_ok_and(|c| c.region.in_result33_scope)
                {
                    continue;
                }
                out.push(SearchCell {
                    seed,
                    index,
                    hyper,
                    source: self.family.source(source_seed(seed, index)),
                });
            }
        }
        Ok(out)
    }
}

/// A crossing found by [`fuzz_search`] together with the cell that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit {
    pub cell: SearchCell,
    pub result: CrossingResult,
}

/// Every crossing found among the search cells, in cell order.
pub fn fuzz_search(search: &FuzzSearch) -> Result<Vec<SearchHit>, CounterexampleError> {
    let cells = search.cells()?;
    let scanned: Vec<Result<CrossingResult, CounterexampleError>> = cells
        .par_iter()
        .map(|c| find_first_crossing(&c.hyper, &c.source, search.t_max, search.bound_kind))
        .collect();
    let mut out = Vec::new();
    for (cell, r) in cells.into_iter().zip(scanned) {
        let result = r?;
        if result.first_crossing_t.is_some() {
            out.push(SearchHit { cell, result });
        }
    }
    Ok(out)
}
