//! Online convex optimization harness.
//!
//! At each step `t` the learner plays `theta_{t-1}`, the loss `f_t` is
//! revealed, the learner pays `f_t(theta_{t-1})` and updates on
//! `g_t = grad f_t(theta_{t-1})`. Regret at horizon `t` is
//!
//! ```text
//! R(t) = sum_{s<=t} f_s(theta_{s-1}) - min_theta sum_{s<=t} f_s(theta)
//! ```
//!
//! with the minimum taken in closed form for every supported loss family.
//! Optimizers act element-wise, one scalar moment recurrence per coordinate.
//!
//! Adam and AMSGrad add `epsilon` (default `1e-8`) to `sqrt(v_hat)` because a
//! coordinate may see only zero gradients; set it to 0 for the bare update.
//! AMSGrad keeps the running maximum of the bias-corrected `v_hat` (or of `v`
//! when bias correction is off).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numeric::{CompensatedSum, Summation};
use crate::trajectory::{
    apply_update, step_with, HyperParams, StepOptions, TrajectoryError, TrajectoryState, UpdateError,
};

pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum OcoError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("{field} has {got} entries, dimension is {dim}")]
    Shape {
        field: &'static str,
        got: usize,
        dim: usize,
    },
    #[error("curvature must be positive and finite, got {0}")]
    Curvature(f64),
    #[error("linear losses need a bounding box for the comparator")]
    Unbounded,
    #[error("invalid box [{0}, {1}]")]
    BadBox(f64, f64),
    #[error("invalid range [{0}, {1}]")]
    BadRange(f64, f64),
    #[error("period must be at least 1")]
    ZeroPeriod,
    #[error("step {t}: non-finite {what}")]
    NonFinite { t: u64, what: &'static str },
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("step {t}: {source}")]
    Update {
        t: u64,
        #[source]
        source: UpdateError,
    },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

/// How the sequence of losses is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum LossFamily {
    /// `f_t(theta) = sum_i curvature_i/2 (theta_i - center_i)^2` for every t.
    FixedQuadratic { center: Vec<f64>, curvature: Vec<f64> },
    /// `f_t(theta) = sign_t * <slopes, theta>`, where `sign_t` flips every
    /// `period` steps starting at `+1`.
    AlternatingLinear { slopes: Vec<f64>, period: usize },
    /// Quadratics with per-step, per-coordinate centres and curvatures drawn
    /// uniformly from the given ranges.
    RandomQuadratic {
        seed: u64,
        center: (f64, f64),
        curvature: (f64, f64),
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossScenario {
    pub dimension: usize,
    pub family: LossFamily,
    pub horizon: usize,
    /// Box `[lo, hi]^d` for the comparator. Learners are never projected.
    pub bbox: Option<(f64, f64)>,
}

/// The loss revealed at one step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepLoss {
    Quadratic { center: Vec<f64>, curvature: Vec<f64> },
    Linear { slope: Vec<f64> },
}

impl StepLoss {
    pub fn value(&self, theta: &[f64]) -> f64 {
        match self {
            StepLoss::Quadratic { center, curvature } => theta
                .iter()
                .zip(center.iter().zip(curvature))
                .map(|(x, (c, k))| 0.5 * k * (x - c) * (x - c))
                .collect::<CompensatedSum>()
                .value(),
            StepLoss::Linear { slope } => theta
                .iter()
                .zip(slope)
                .map(|(x, a)| a * x)
                .collect::<CompensatedSum>()
                .value(),
        }
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            StepLoss::Quadratic { center, curvature } => theta
                .iter()
                .zip(center.iter().zip(curvature))
                .map(|(x, (c, k))| k * (x - c))
                .collect(),
            StepLoss::Linear { slope } => slope.clone(),
        }
    }
}

impl LossScenario {
    pub fn validate(&self) -> Result<(), OcoError> {
        let dim = self.dimension;
        if dim == 0 {
            return Err(OcoError::ZeroDimension);
        }
        if self.horizon == 0 {
            return Err(OcoError::ZeroHorizon);
        }
        if let Some((lo, hi)) = self.bbox {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(OcoError::BadBox(lo, hi));
            }
        }
        let shape = |field, v: &Vec<f64>| {
            if v.len() == dim {
                Ok(())
            } else {
                Err(OcoError::Shape { field, got: v.len(), dim })
            }
        };
        match &self.family {
            LossFamily::FixedQuadratic { center, curvature } => {
                shape("center", center)?;
                shape("curvature", curvature)?;
                if let Some(&k) = curvature.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
                    return Err(OcoError::Curvature(k));
                }
            }
            LossFamily::AlternatingLinear { slopes, period } => {
                shape("slopes", slopes)?;
                if *period == 0 {
                    return Err(OcoError::ZeroPeriod);
                }
                if self.bbox.is_none() {
                    return Err(OcoError::Unbounded);
                }
            }
            LossFamily::RandomQuadratic { center, curvature, .. } => {
                if !(center.0.is_finite() && center.1.is_finite() && center.0 <= center.1) {
                    return Err(OcoError::BadRange(center.0, center.1));
                }
                if !(curvature.0 > 0.0 && curvature.1.is_finite() && curvature.0 <= curvature.1) {
                    return Err(OcoError::BadRange(curvature.0, curvature.1));
                }
            }
        }
        Ok(())
    }

    /// The `horizon` losses in order.
    pub fn losses(&self) -> Result<Vec<StepLoss>, OcoError> {
        self.validate()?;
        let d = self.dimension;
        Ok(match &self.family {
            LossFamily::FixedQuadratic { center, curvature } => vec![
                StepLoss::Quadratic {
                    center: center.clone(),
                    curvature: curvature.clone(),
                };
                self.horizon
            ],
            LossFamily::AlternatingLinear { slopes, period } => (0..self.horizon)
                .map(|i| {
                    let sign = if (i / period) % 2 == 0 { 1.0 } else { -1.0 };
                    StepLoss::Linear {
                        slope: slopes.iter().map(|a| sign * a).collect(),
                    }
                })
                .collect(),
            LossFamily::RandomQuadratic { seed, center, curvature } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut draw = |(lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..hi) };
                (0..self.horizon)
                    .map(|_| {
                        let c: Vec<f64> = (0..d).map(|_| draw(*center)).collect();
                        let k: Vec<f64> = (0..d).map(|_| draw(*curvature)).collect();
                        StepLoss::Quadratic { center: c, curvature: k }
                    })
                    .collect()
            }
        })
    }

    /// Parses the flat `key = value` scenario format.
    ///
    /// Keys: `dim`, `family` (`fixed_quadratic`, `alternating_linear`,
    /// `random_quadratic`), `center`, `curvature`, `horizon`, `seed`, and
    /// optionally `slopes`, `period`, `box`. Lists are comma separated; a
    /// single value is broadcast to every coordinate. For `random_quadratic`,
    /// `center` and `curvature` are `lo,hi` ranges. `#` starts a comment line.
    pub fn from_config(text: &str) -> Result<Self, OcoError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(OcoError::Config {
                    line: i + 1,
                    message: format!("expected key = value, got {line:?}"),
                });
            };
            let key = k.trim().to_ascii_lowercase();
            const KNOWN: [&str; 9] = ["dim", "family", "center", "curvature", "horizon", "seed", "slopes", "period", "box"];
            if !KNOWN.contains(&key.as_str()) {
                return Err(OcoError::Config {
                    line: i + 1,
                    message: format!("unknown key {key:?}"),
                });
            }
            entries.insert(key, (i + 1, v.trim().to_string()));
        }
        let get = |key: &str| entries.get(key);
        let need = |key: &'static str| {
            get(key).ok_or(OcoError::Config {
                line: 0,
                message: format!("missing key {key:?}"),
            })
        };
        let parse_num = |key: &'static str| -> Result<f64, OcoError> {
            let (line, v) = need(key)?;
            v.parse().map_err(|_| OcoError::Config {
                line: *line,
                message: format!("{key}: not a number: {v:?}"),
            })
        };
        let parse_list = |key: &'static str| -> Result<Vec<f64>, OcoError> {
            let (line, v) = need(key)?;
            v.split(',')
                .map(|p| {
                    p.trim().parse::<f64>().map_err(|_| OcoError::Config {
                        line: *line,
                        message: format!("{key}: not a number list: {v:?}"),
                    })
                })
                .collect()
        };
        let parse_uint = |key: &'static str| -> Result<usize, OcoError> {
            let (line, v) = need(key)?;
            v.parse().map_err(|_| OcoError::Config {
                line: *line,
                message: format!("{key}: not a nonnegative integer: {v:?}"),
            })
        };
        let dimension = parse_uint("dim")?;
        let horizon = parse_uint("horizon")?;
        let broadcast = |key: &'static str| -> Result<Vec<f64>, OcoError> {
            let v = parse_list(key)?;
            Ok(if v.len() == 1 { vec![v[0]; dimension] } else { v })
        };
        let range = |key: &'static str| -> Result<(f64, f64), OcoError> {
            let v = parse_list(key)?;
            match v.as_slice() {
                [x] => Ok((*x, *x)),
                [lo, hi] => Ok((*lo, *hi)),
                _ => Err(OcoError::Config {
                    line: need(key)?.0,
                    message: format!("{key}: expected lo,hi"),
                }),
            }
        };
        let bbox = if get("box").is_some() { Some(range("box")?) } else { None };
        let (family_line, family) = need("family")?;
        let family = match family.as_str() {
            "fixed_quadratic" => LossFamily::FixedQuadratic {
                center: broadcast("center")?,
                curvature: if get("curvature").is_some() { broadcast("curvature")? } else { vec![1.0; dimension] },
            },
            "alternating_linear" => LossFamily::AlternatingLinear {
                slopes: broadcast("slopes")?,
                period: if get("period").is_some() { parse_uint("period")? } else { 1 },
            },
            "random_quadratic" => LossFamily::RandomQuadratic {
                seed: parse_num("seed")? as u64,
                center: range("center")?,
                curvature: if get("curvature").is_some() { range("curvature")? } else { (1.0, 1.0) },
            },
            other => {
                return Err(OcoError::Config {
                    line: *family_line,
                    message: format!("unknown family {other:?}"),
                })
            }
        };
        let scenario = LossScenario {
            dimension,
            family,
            horizon,
            bbox,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Running `min_theta sum_{s<=t} f_s(theta)`, one coordinate at a time.
#[derive(Debug, Clone)]
struct Comparator {
    bbox: Option<(f64, f64)>,
    coords: Vec<CoordComparator>,
}

#[derive(Debug, Clone, Default)]
struct CoordComparator {
    // Weighted Welford state for sum_s k_s/2 (x - c_s)^2.
    weight: f64,
    mean: f64,
    m2: CompensatedSum,
    // Sum of linear slopes.
    slope: CompensatedSum,
}

impl CoordComparator {
    fn add_quadratic(&mut self, c: f64, k: f64) {
        self.weight += k;
        let delta = c - self.mean;
        self.mean += delta * k / self.weight;
        self.m2.add(k * delta * (c - self.mean));
    }

    fn argmin(&self, bbox: Option<(f64, f64)>) -> f64 {
        let slope = self.slope.value();
        match bbox {
            Some((lo, hi)) if self.weight == 0.0 => {
                if slope > 0.0 {
                    lo
                } else if slope < 0.0 {
                    hi
                } else {
                    0.5 * (lo + hi)
                }
            }
            Some((lo, hi)) => {
                // Quadratic plus linear term: shift the mean by -slope/weight.
                (self.mean - slope / self.weight).clamp(lo, hi)
            }
            None if self.weight == 0.0 => 0.0,
            None => self.mean - slope / self.weight,
        }
    }

    fn min_value(&self, bbox: Option<(f64, f64)>) -> f64 {
        let x = self.argmin(bbox);
        let quad = if self.weight == 0.0 {
            0.0
        } else {
            0.5 * self.m2.value() + 0.5 * self.weight * (x - self.mean) * (x - self.mean)
        };
        quad + self.slope.value() * x
    }
}

impl Comparator {
    fn new(dim: usize, bbox: Option<(f64, f64)>) -> Self {
        Self {
            bbox,
            coords: vec![CoordComparator::default(); dim],
        }
    }

    fn add(&mut self, loss: &StepLoss) {
        match loss {
            StepLoss::Quadratic { center, curvature } => {
                for (cc, (&c, &k)) in self.coords.iter_mut().zip(center.iter().zip(curvature)) {
                    cc.add_quadratic(c, k);
                }
            }
            StepLoss::Linear { slope } => {
                for (cc, &a) in self.coords.iter_mut().zip(slope) {
                    cc.slope.add(a);
                }
            }
        }
    }

    fn argmin(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.argmin(self.bbox)).collect()
    }

    fn min_value(&self) -> f64 {
        self.coords.iter().map(|c| c.min_value(self.bbox)).collect::<CompensatedSum>().value()
    }
}

/// Minimiser of `sum_t f_t` over the whole horizon (inside the box when one
/// is given). A flat linear coordinate resolves to the box centre.
pub fn batch_minimizer(scenario: &LossScenario) -> Result<Vec<f64>, OcoError> {
    let mut cmp = Comparator::new(scenario.dimension, scenario.bbox);
    for loss in scenario.losses()? {
        cmp.add(&loss);
    }
    Ok(cmp.argmin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    AdamAlgorithm1,
    AmsGrad,
    GradientDescent,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::AdamAlgorithm1 => "adam",
            OptimizerKind::AmsGrad => "amsgrad",
            OptimizerKind::GradientDescent => "gd",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adam" => Ok(OptimizerKind::AdamAlgorithm1),
            "amsgrad" => Ok(OptimizerKind::AmsGrad),
            "gd" => Ok(OptimizerKind::GradientDescent),
            _ => Err(format!("unknown optimizer {s:?}; expected adam, amsgrad or gd")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub hyper: HyperParams,
    pub epsilon: f64,
    pub bias_correction: bool,
    /// Use `eta` instead of `eta / sqrt(t)`. Off by default.
    pub constant_rate: bool,
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind, hyper: HyperParams) -> Self {
        Self {
            kind,
            hyper,
            epsilon: DEFAULT_EPSILON,
            bias_correction: true,
            constant_rate: false,
        }
    }

    /// Which `v` AMSGrad takes the running maximum of.
    pub fn amsgrad_convention(&self) -> &'static str {
        if self.bias_correction {
            "max(v_hat)"
        } else {
            "max(v)"
        }
    }
}

/// Scalar AMSGrad state: Adam moments plus the running maximum of `v_hat`
/// and the `s_t` sum taken with that maximum in the denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmsGradState {
    pub moments: TrajectoryState,
    pub v_hat_max: f64,
    pub s_running: f64,
    s_acc: CompensatedSum,
}

/// One scalar AMSGrad step.
pub fn amsgrad_step(prev: Option<&AmsGradState>, g: f64, hyper: &HyperParams) -> Result<AmsGradState, TrajectoryError> {
    let opts = StepOptions {
        accumulate_s: false,
        summation: Summation::Compensated,
    };
    let moments = step_with(prev.map(|p| &p.moments), g, hyper, opts)?;
    let (v_prev, mut s_acc) = match prev {
        Some(p) => (p.v_hat_max, p.s_acc),
        None => {
            if g == 0.0 {
                return Err(TrajectoryError::ZeroFirstGradient);
            }
            (0.0, CompensatedSum::default())
        }
    };
    let v_hat_max = v_prev.max(moments.v_hat);
    if moments.m_hat != 0.0 {
        s_acc.add(moments.m_hat * moments.m_hat / (moments.t as f64 * v_hat_max).sqrt());
    }
    Ok(AmsGradState {
        moments,
        v_hat_max,
        s_running: s_acc.value(),
        s_acc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretStep {
    pub t: u64,
    /// `f_t(theta_{t-1})`
    pub loss: f64,
    pub cum_regret: f64,
    pub avg_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub optimizer: OptimizerKind,
    /// AMSGrad max convention, recorded so runs are unambiguous.
    pub amsgrad_convention: Option<&'static str>,
    pub steps: Vec<RegretStep>,
    pub final_theta: Vec<f64>,
    /// `theta_0 .. theta_T` when requested.
    pub thetas: Option<Vec<Vec<f64>>>,
}

impl RegretTrace {
    pub fn final_avg_regret(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.avg_regret)
    }
}

enum Learner {
    Adam { moments: Vec<Option<TrajectoryState>> },
    AmsGrad { moments: Vec<Option<TrajectoryState>>, v_max: Vec<f64> },
    Gd,
}

impl Learner {
    fn new(kind: OptimizerKind, dim: usize) -> Self {
        match kind {
            OptimizerKind::AdamAlgorithm1 => Learner::Adam { moments: vec![None; dim] },
            OptimizerKind::AmsGrad => Learner::AmsGrad {
                moments: vec![None; dim],
                v_max: vec![0.0; dim],
            },
            OptimizerKind::GradientDescent => Learner::Gd,
        }
    }

    fn update(&mut self, spec: &OptimizerSpec, t: u64, theta: &[f64], g: &[f64]) -> Result<Vec<f64>, OcoError> {
        let step_size = if spec.constant_rate {
            spec.hyper.eta
        } else {
            spec.hyper.eta / (t as f64).sqrt()
        };
        let opts = StepOptions {
            accumulate_s: false,
            summation: Summation::Compensated,
        };
        let advance = |moments: &mut [Option<TrajectoryState>]| -> Result<(Vec<f64>, Vec<f64>), OcoError> {
            let mut m = Vec::with_capacity(g.len());
            let mut v = Vec::with_capacity(g.len());
            for (slot, &gi) in moments.iter_mut().zip(g) {
                let next = step_with(slot.as_ref(), gi, &spec.hyper, opts)?;
                if spec.bias_correction {
                    m.push(next.m_hat);
                    v.push(next.v_hat);
                } else {
                    m.push(next.m);
                    v.push(next.v);
                }
                *slot = Some(next);
            }
            Ok((m, v))
        };
        let updated = match self {
            Learner::Adam { moments } => {
                let (m, v) = advance(moments)?;
                apply_update(theta, &m, &v, step_size, spec.epsilon)
            }
            Learner::AmsGrad { moments, v_max } => {
                let (m, v) = advance(moments)?;
                for (vm, vi) in v_max.iter_mut().zip(&v) {
                    *vm = vm.max(*vi);
                }
                apply_update(theta, &m, v_max, step_size, spec.epsilon)
            }
            Learner::Gd => Ok(theta.iter().zip(g).map(|(x, gi)| x - step_size * gi).collect()),
        };
        updated.map_err(|source| OcoError::Update { t, source })
    }
}

/// Runs one optimizer over a scenario from `theta0`.
pub fn run_oco(scenario: &LossScenario, optimizer: &OptimizerSpec, theta0: &[f64]) -> Result<RegretTrace, OcoError> {
    run_oco_with(scenario, optimizer, theta0, false)
}

/// [`run_oco`], optionally keeping every iterate.
pub fn run_oco_with(
    scenario: &LossScenario,
    optimizer: &OptimizerSpec,
    theta0: &[f64],
    keep_thetas: bool,
) -> Result<RegretTrace, OcoError> {
    optimizer.hyper.validate().map_err(TrajectoryError::from)?;
    let losses = scenario.losses()?;
    if theta0.len() != scenario.dimension {
        return Err(OcoError::Shape {
            field: "theta0",
            got: theta0.len(),
            dim: scenario.dimension,
        });
    }
    let mut learner = Learner::new(optimizer.kind, scenario.dimension);
    let mut comparator = Comparator::new(scenario.dimension, scenario.bbox);
    let mut theta = theta0.to_vec();
    let mut thetas = keep_thetas.then(|| vec![theta.clone()]);
    let mut cum_loss = CompensatedSum::default();
    let mut steps = Vec::with_capacity(losses.len());
    for (i, loss) in losses.iter().enumerate() {
        let t = i as u64 + 1;
        let value = loss.value(&theta);
        if !value.is_finite() {
            return Err(OcoError::NonFinite { t, what: "loss" });
        }
        let g = loss.gradient(&theta);
        if g.iter().any(|x| !x.is_finite()) {
            return Err(OcoError::NonFinite { t, what: "gradient" });
        }
        theta = learner.update(optimizer, t, &theta, &g)?;
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(OcoError::NonFinite { t, what: "parameter" });
        }
        if let Some(ts) = thetas.as_mut() {
            ts.push(theta.clone());
        }
        cum_loss.add(value);
        comparator.add(loss);
        let cum_regret = cum_loss.value() - comparator.min_value();
        steps.push(RegretStep {
            t,
            loss: value,
            cum_regret,
            avg_regret: cum_regret / t as f64,
        });
    }
    Ok(RegretTrace {
        optimizer: optimizer.kind,
        amsgrad_convention: (optimizer.kind == OptimizerKind::AmsGrad).then(|| optimizer.amsgrad_convention()),
        steps,
        final_theta: theta,
        thetas,
    })
}
