//! CSV writers. Floats are written with `Display`, the shortest decimal that
//! round-trips; absent values are empty fields.

use std::io::Write;

use thiserror::Error;

use crate::bounds::{derived_constants, kb_bound, result33_bound, RegionCell};
use crate::counterexample::{CrossingPoint, SearchHit};
use crate::lemma::LemmaReport;
use crate::oco::RegretTrace;
use crate::trajectory::Trace;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const TRACE_HEADER: [&str; 9] = ["t", "g", "m", "v", "m_hat", "v_hat", "s", "kb_bound", "new_bound"];
pub const REGION_HEADER: [&str; 6] = ["beta1", "beta2", "bock_scope", "result33_scope", "lemma31", "lemma32"];
pub const LEMMA_HEADER: [&str; 7] = ["lemma_id", "beta1", "beta2", "seed", "T", "first_violation_t", "max_slack_violation"];
pub const CROSSING_HEADER: [&str; 4] = ["t", "s", "bound", "margin"];
pub const FUZZ_HEADER: [&str; 6] = ["beta1", "beta2", "lambda", "seed", "crossing_t", "margin"];
pub const REGRET_HEADER: [&str; 4] = ["t", "loss", "cum_regret", "avg_regret"];

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Empty for NaN, used where a column does not apply to a row.
fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<(), ExportError> {
    w.flush()?;
    Ok(())
}

/// One row per step. Bound columns hold the bound evaluated on the gradient
/// prefix `g_{1:t}`, and are empty when the pair is outside that bound's scope.
pub fn write_trace_csv<W: Write>(out: W, trace: &Trace) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    let constants = derived_constants(trace.hyper.beta1, trace.hyper.beta2).ok();
    for st in &trace.steps {
        let g_norm = st.g_norm_sq_running.sqrt();
        let kb = constants.as_ref().and_then(|c| kb_bound(c, g_norm).ok());
        let new = constants.as_ref().and_then(|c| result33_bound(c, st.t, g_norm).ok());
        w.write_record([
            st.t.to_string(),
            st.g.to_string(),
            st.m.to_string(),
            st.v.to_string(),
            st.m_hat.to_string(),
            st.v_hat.to_string(),
            st.s_running.to_string(),
            opt(kb),
            opt(new),
        ])?;
    }
    finish(w)
}

pub fn write_region_csv<W: Write>(out: W, cells: &[RegionCell]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REGION_HEADER)?;
    for c in cells {
        w.write_record([
            c.beta1.to_string().as_str(),
            c.beta2.to_string().as_str(),
            flag(c.class.in_bock_scope),
            flag(c.class.in_result33_scope),
            flag(c.class.lemma31_ok),
            flag(c.class.lemma32_ok),
        ])?;
    }
    finish(w)
}

pub fn write_lemma_csv<W: Write>(out: W, reports: &[LemmaReport]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LEMMA_HEADER)?;
    for r in reports {
        w.write_record([
            r.lemma_id.to_string(),
            num(r.beta1),
            num(r.beta2),
            opt(r.seed),
            r.horizon.to_string(),
            opt(r.first_violation_t),
            r.max_slack_violation.to_string(),
        ])?;
    }
    finish(w)
}

pub fn write_crossing_csv<W: Write>(out: W, points: &[CrossingPoint]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CROSSING_HEADER)?;
    for p in points {
        w.write_record([p.t.to_string(), p.s.to_string(), p.bound.to_string(), p.margin().to_string()])?;
    }
    finish(w)
}

/// `lambda` is `lambda_m` (equal to `lambda_g` for Kingma-Ba searches).
pub fn write_fuzz_csv<W: Write>(out: W, hits: &[SearchHit]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FUZZ_HEADER)?;
    for h in hits {
        let hp = &h.cell.hyper;
        w.write_record([
            hp.beta1.to_string(),
            hp.beta2.to_string(),
            hp.lambda_m.to_string(),
            h.cell.seed.to_string(),
            opt(h.result.first_crossing_t),
            h.result.margin_at_crossing.to_string(),
        ])?;
    }
    finish(w)
}

pub fn write_regret_csv<W: Write>(out: W, trace: &RegretTrace) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REGRET_HEADER)?;
    for s in &trace.steps {
        w.write_record([
            s.t.to_string(),
            s.loss.to_string(),
            s.cum_regret.to_string(),
            s.avg_regret.to_string(),
        ])?;
    }
    finish(w)
}
