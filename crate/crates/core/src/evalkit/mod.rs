//! Evaluation kit: point-label metrics, ground-truth propagation onto
//! partial views, synthetic tool generators, and harnesses for the
//! rotation-sensitivity and cross-class transfer studies.

pub mod harness;
pub mod synthetic;

pub use harness::{
    render_summary, run_crossclass, run_rotation_ablation, write_csv, AblationSpec, HarnessRow,
};
pub use synthetic::{
    db_entry_from_synthetic, make_synthetic, synthetic_database, SyntheticObject, SyntheticShape,
};

use crate::affordance::AffordanceField;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::real::Real;

/// Point-label classification metrics with explicit confusion counts.
/// Empty-denominator precision/recall are defined as 0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fneg: usize,
    pub precision_defined: bool,
    pub recall_defined: bool,
}

/// Confusion counts and rates by direct comparison.
pub fn compute_metrics(pred: &[bool], truth: &[bool]) -> Result<EvalReport> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fneg += 1,
        }
    }
    let total = pred.len().max(1);
    let precision_defined = tp + fp > 0;
    let recall_defined = tp + fneg > 0;
    Ok(EvalReport {
        accuracy: (tp + tn) as f64 / total as f64,
        precision: if precision_defined {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        },
        recall: if recall_defined {
            tp as f64 / (tp + fneg) as f64
        } else {
            0.0
        },
        tp,
        fp,
        tn,
        fneg,
        precision_defined,
        recall_defined,
    })
}

/// Mean of per-trial rates; counts are pooled, defined flags conjoined.
pub fn mean_report(reports: &[EvalReport]) -> EvalReport {
    assert!(!reports.is_empty());
    let n = reports.len() as f64;
    EvalReport {
        accuracy: reports.iter().map(|r| r.accuracy).sum::<f64>() / n,
        precision: reports.iter().map(|r| r.precision).sum::<f64>() / n,
        recall: reports.iter().map(|r| r.recall).sum::<f64>() / n,
        tp: reports.iter().map(|r| r.tp).sum(),
        fp: reports.iter().map(|r| r.fp).sum(),
        tn: reports.iter().map(|r| r.tn).sum(),
        fneg: reports.iter().map(|r| r.fneg).sum(),
        precision_defined: reports.iter().all(|r| r.precision_defined),
        recall_defined: reports.iter().all(|r| r.recall_defined),
    }
}

/// Ground truth for a partial view: every partial point takes the heat of
/// its nearest reference point, then labels are re-derived with the
/// reference threshold.
pub fn propagate_ground_truth<T: Real>(
    partial: &PointCloud<T>,
    reference: &PointCloud<T>,
    ref_field: &AffordanceField<T>,
) -> Result<AffordanceField<T>> {
    if ref_field.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            got: ref_field.len(),
        });
    }
    let heat: Vec<T> = partial
        .points
        .iter()
        .map(|&p| ref_field.heat[reference.nearest(p)])
        .collect();
    crate::affordance::binarize(&heat, ref_field.threshold)
}
