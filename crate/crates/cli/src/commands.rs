use std::path::{Path, PathBuf};

use adamlab::counterexample::crossing_profile;
use adamlab::export::{
    write_crossing_csv, write_fuzz_csv, write_lemma_csv, write_regret_csv, write_region_csv, write_trace_csv,
};
use adamlab::lemma::{check_appendix_y, check_correction_factor, default_time_grid, result33_grid, verify_cells, TraceCell};
use adamlab::oco::run_oco;
use adamlab::{
    analytic_limit_violation, classify_region, fuzz_search, region_grid, run_trace, BoundKind, FuzzSearch,
    GradientSource, HyperParams, LemmaId, LossScenario, OptimizerSpec, TrajectoryError,
};

use crate::error::CliError;
use crate::output::{emit, resolve, suffixed};
use crate::{HyperArgs, OcoArgs, RegionArgs, SearchArgs, TraceArgs, VerifyArgs};

fn hyper(h: &HyperArgs) -> Result<HyperParams, CliError> {
    HyperParams::new(h.eta, h.beta1, h.beta2, h.lambda_m, h.lambda_g)
        .map_err(|e| CliError::from(TrajectoryError::from(e)))
}

pub fn trace(a: TraceArgs) -> Result<(), CliError> {
    let hp = hyper(&a.hyper)?;
    let trace = run_trace(&hp, &a.source, a.horizon)?;
    let dest = resolve(a.out.as_deref(), "trace.csv");
    emit(dest.as_deref(), |buf| write_trace_csv(buf, &trace))
}

/// The 999 interior points `k/1000` of `(0, 1)`.
fn unit_grid() -> Vec<f64> {
    (1..1000).map(|k| k as f64 / 1000.0).collect()
}

fn trace_lemma(l: LemmaId) -> bool {
    !matches!(l, LemmaId::AppendixY)
}

pub fn verify(a: VerifyArgs) -> Result<(), CliError> {
    let (cells, explicit) = match (a.cells, a.beta1, a.beta2) {
        (Some(c), _, _) => (c, true),
        (None, Some(b1), Some(b2)) => (vec![(b1, b2)], true),
        _ => (result33_grid(a.grid), false),
    };
    for &(b1, b2) in &cells {
        HyperParams::with_betas(b1, b2).map_err(|e| CliError::config(format!("cell {b1}:{b2}: {e}")))?;
    }
    let tol = a.tolerance;
    let mut reports = Vec::new();
    if a.lemmas.contains(&LemmaId::AppendixY) && !cells.is_empty() {
        reports.push(check_appendix_y(&unit_grid(), tol));
    }
    if a.lemmas.iter().any(|&l| trace_lemma(l)) {
        let trace_cells: Vec<TraceCell> = cells
            .iter()
            .flat_map(|&(beta1, beta2)| {
                a.seeds.iter().map(move |&seed| TraceCell {
                    beta1,
                    beta2,
                    seed,
                    horizon: a.horizon,
                    family: a.family,
                })
            })
            .collect();
        reports.extend(verify_cells(&trace_cells, &a.lemmas, tol)?);
    }
    if a.lemmas.contains(&LemmaId::L32) {
        let times = default_time_grid();
        for &(b1, b2) in &cells {
            // Named cells are checked as requested; grid cells only in scope.
            if explicit || classify_region(b1, b2).lemma32_ok {
                reports.push(check_correction_factor(b1, b2, &times, tol));
            }
        }
    }
    for &(b1, b2) in &cells {
        let class = classify_region(b1, b2);
        let skipped: Vec<&str> = a
            .lemmas
            .iter()
            .filter_map(|l| match l {
                LemmaId::L31 if !class.lemma31_ok => Some("L31"),
                LemmaId::AppendixP if !class.lemma32_ok => Some("AppendixP"),
                LemmaId::NormMhat if !class.in_result33_scope => Some("NormMhat"),
                LemmaId::NormMu if !class.in_result33_scope => Some("NormMu"),
                LemmaId::L32 if !class.lemma32_ok => Some("L32 (trace form)"),
                _ => None,
            })
            .collect();
        if !skipped.is_empty() {
            eprintln!("cell {b1}:{b2} out of scope for {}", skipped.join(", "));
        }
    }
    let dest = resolve(a.out.as_deref(), "verify.csv");
    emit(dest.as_deref(), |buf| write_lemma_csv(buf, &reports))?;
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| format!("{} at {}:{}", r.lemma_id, r.beta1, r.beta2))
        .collect();
    if failed.is_empty() {
        eprintln!("{} checks, 0 violations", reports.len());
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{} of {} checks violated: {}",
            failed.len(),
            reports.len(),
            failed.join("; ")
        )))
    }
}

pub fn fig1(h: HyperArgs, horizon: usize, source: GradientSource, out: Option<PathBuf>) -> Result<(), CliError> {
    let hp = hyper(&h)?;
    let points = crossing_profile(&hp, &source, horizon, BoundKind::KingmaBa)?;
    match points.iter().find(|p| p.margin() > 0.0) {
        Some(p) => println!("first crossing t={} (s={}, bound={})", p.t, p.s, p.bound),
        None => println!("no crossing up to T={horizon}"),
    }
    if let Some(dest) = resolve(out.as_deref(), "fig1.csv") {
        emit(Some(&dest), |buf| write_crossing_csv(buf, &points))?;
    }
    Ok(())
}

pub fn analytic(t_max: u64) -> Result<(), CliError> {
    match analytic_limit_violation(t_max) {
        Some(t) => println!("T={t}"),
        None => println!("no violation up to T={t_max}"),
    }
    Ok(())
}

pub fn search(a: SearchArgs) -> Result<(), CliError> {
    let s = FuzzSearch {
        beta1: a.beta1,
        beta2: a.beta2,
        lambda: a.lambda,
        family: a.family,
        seeds: a.seeds,
        budget: a.budget,
        t_max: a.horizon,
        bound_kind: a.bound,
    };
    let hits = fuzz_search(&s)?;
    let dest = resolve(a.out.as_deref(), "search.csv");
    emit(dest.as_deref(), |buf| write_fuzz_csv(buf, &hits))?;
    eprintln!("{} crossings of the {} bound", hits.len(), a.bound);
    if a.bound == BoundKind::LogT && !hits.is_empty() {
        return Err(CliError::Verification(format!("{} log-T bound crossings", hits.len())));
    }
    Ok(())
}

pub fn region(a: RegionArgs) -> Result<(), CliError> {
    let cells = region_grid(a.resolution)?;
    let dest = resolve(a.out.as_deref(), "region.csv");
    emit(dest.as_deref(), |buf| write_region_csv(buf, &cells))
}

fn oco_dest(out: Option<&Path>, kind: &str, several: bool) -> Result<Option<PathBuf>, CliError> {
    let name = format!("regret-{kind}.csv");
    match (out, several) {
        (Some(p), true) => Ok(Some(suffixed(p, kind))),
        (Some(p), false) => Ok(Some(p.to_path_buf())),
        (None, _) => match resolve(None, &name) {
            Some(p) => Ok(Some(p)),
            None if several => Err(CliError::config("several optimizers need --out or ADAMLAB_OUT_DIR")),
            None => Ok(None),
        },
    }
}

pub fn oco(a: OcoArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", a.config.display())))?;
    let scenario = LossScenario::from_config(&text)?;
    let hp = HyperParams::new(a.eta, a.beta1, a.beta2, a.lambda_m, a.lambda_g)
        .map_err(|e| CliError::from(TrajectoryError::from(e)))?;
    let theta0 = vec![a.theta0; scenario.dimension];
    let several = a.optimizers.len() > 1;
    for &kind in &a.optimizers {
        let spec = OptimizerSpec {
            kind,
            hyper: hp,
            epsilon: a.epsilon,
            bias_correction: !a.no_bias_correction,
            constant_rate: a.constant_rate,
        };
        let trace = run_oco(&scenario, &spec, &theta0)?;
        let dest = oco_dest(a.out.as_deref(), &kind.to_string(), several)?;
        emit(dest.as_deref(), |buf| write_regret_csv(buf, &trace))?;
        let note = trace.amsgrad_convention.map(|c| format!(" ({c})")).unwrap_or_default();
        eprintln!("{kind}{note}: final average regret {}", trace.final_avg_regret());
    }
    Ok(())
}
