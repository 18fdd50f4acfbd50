//! Numerical toolkit for the Adam moment recurrences: trajectories, the
//! Kingma-Ba and log-T bounds on `s_T`, lemma checkers, counterexample search
//! and an online convex optimization regret harness.

pub mod bounds;
pub mod counterexample;
pub mod export;
pub mod lemma;
pub mod numeric;
pub mod oco;
pub mod source;
pub mod trajectory;

pub use bounds::{
    classify_region, derived_constants, kb_bound, region_grid, result33_bound, BoundsError, DerivedConstants,
    RegionCell, RegionClass,
};
pub use counterexample::{
    analytic_limit_violation, crossing_profile, find_first_crossing, fuzz_search, BoundKind, CounterexampleError,
    CrossingPoint, CrossingResult, FuzzSearch, SearchHit,
};
pub use export::ExportError;
pub use lemma::{FuzzFamily, LemmaError, LemmaId, LemmaReport, DEFAULT_TOLERANCE};
pub use numeric::Summation;
pub use oco::{run_oco, LossFamily, LossScenario, OcoError, OptimizerKind, OptimizerSpec, RegretTrace};
pub use source::{GradientSource, SourceError};
pub use trajectory::{
    run_trace, step, step_with, theta_update, HyperError, HyperParams, StepOptions, Trace, TrajectoryError,
    TrajectoryState,
};
