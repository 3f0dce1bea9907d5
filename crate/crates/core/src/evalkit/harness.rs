//! Rotation-sensitivity and cross-class transfer harnesses over synthetic
//! fixtures, with CSV output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::synthetic::{make_synthetic, SyntheticShape};
use super::{compute_metrics, mean_report, propagate_ground_truth, EvalReport};
use crate::affordance::Database;
use crate::error::{Error, Result};
use crate::geometry::{partial_view, random_rotation, PointCloud};
use crate::pipeline::{run_transfer, PipelineConfig};
use crate::real::{real, Real};
use crate::reasoner::{RuleBackend, TaskRequest};
use crate::spectral::DescriptorKind;

#[derive(Debug, Clone)]
pub struct AblationSpec {
    /// Random rotation angles are drawn from [0, rotation_max] radians.
    pub rotation_max: f64,
    /// Trials (seeds) per cell.
    pub trials: usize,
    pub seed: u64,
    pub descriptors: Vec<DescriptorKind>,
    pub classes: Vec<SyntheticShape>,
    pub n_points: usize,
    /// Evaluate on partial views instead of full instances.
    pub partial: bool,
}

impl AblationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::Config("need at least one class".into()));
        }
        if !(0.0..=std::f64::consts::TAU).contains(&self.rotation_max) {
            return Err(Error::Config("rotation_max must be in [0, 2*pi]".into()));
        }
        Ok(())
    }
}

/// One harness cell: a (source, target, descriptor, variant) aggregate.
#[derive(Debug, Clone)]
pub struct HarnessRow {
    pub source_class: String,
    pub target_class: String,
    pub descriptor: DescriptorKind,
    pub aligned: bool,
    pub rotation_max: f64,
    pub report: EvalReport,
}

fn instance_seed(base: u64, class_idx: usize, trial: usize) -> u64 {
    base.wrapping_mul(1_000_003)
        .wrapping_add(class_idx as u64 * 131)
        .wrapping_add(trial as u64)
}

/// Build the query for one trial: a fresh instance of `shape`, optionally
/// reduced to a partial view, rotated by a random rotation up to
/// `rotation_max`; returns it with its propagated ground truth.
fn trial_query<T: Real>(
    shape: SyntheticShape,
    n_points: usize,
    seed: u64,
    partial: bool,
    rotation_max: f64,
) -> Result<(PointCloud<T>, crate::affordance::AffordanceField<T>)> {
    let obj = make_synthetic::<T>(shape, n_points, seed);
    let (cloud, truth) = if partial {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
        let dir: [f64; 3] = loop {
            let g: [f64; 3] = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            if n > 1e-6 {
                break [g[0] / n, g[1] / n, g[2] / n];
            }
        };
        let (center, radius) = obj.cloud.bounding_sphere();
        let viewpoint = [
            center[0] + real::<T>(dir[0] * 4.0) * radius,
            center[1] + real::<T>(dir[1] * 4.0) * radius,
            center[2] + real::<T>(dir[2] * 4.0) * radius,
        ];
        let part = partial_view(&obj.cloud, viewpoint)?;
        let truth = propagate_ground_truth(&part, &obj.cloud, &obj.field)?;
        (part, truth)
    } else {
        (obj.cloud.clone(), obj.field.clone())
    };
    let rot = random_rotation::<T>(seed ^ 0x51ab_c0de, rotation_max);
    Ok((cloud.transformed(&rot), truth))
}

/// Rotation-sensitivity study: for every descriptor and class, run the
/// pipeline on randomly rotated instances with the alignment stage on and
/// off, against the class-matched database entry.
pub fn run_rotation_ablation<T: Real>(
    spec: &AblationSpec,
    db: &Database<T>,
    base_cfg: &PipelineConfig,
) -> Result<Vec<HarnessRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &descriptor in &spec.descriptors {
        for aligned in [true, false] {
            for (class_idx, &shape) in spec.classes.iter().enumerate() {
                let mut reports = Vec::with_capacity(spec.trials);
                for trial in 0..spec.trials {
                    let seed = instance_seed(spec.seed, class_idx, trial);
                    let (query, truth) =
                        trial_query::<T>(shape, spec.n_points, seed, spec.partial, spec.rotation_max)?;
                    let mut cfg = base_cfg.clone();
                    cfg.descriptor = descriptor;
                    cfg.align = aligned;
                    cfg.grasp_enabled = false;
                    cfg.seed = seed;
                    let request = TaskRequest::new(shape.object_class(), shape.task())?;
                    let out = run_transfer(&query, &request, db, &cfg, &RuleBackend, None)?;
                    reports.push(compute_metrics(&out.field.labels, &truth.labels)?);
                }
                rows.push(HarnessRow {
                    source_class: shape.object_class().to_string(),
                    target_class: shape.object_class().to_string(),
                    descriptor,
                    aligned,
                    rotation_max: spec.rotation_max,
                    report: mean_report(&reports),
                });
            }
        }
    }
    Ok(rows)
}

/// Cross-class study: transfer from each source entry onto fresh target
/// instances (aligned dataset: no rotation), including the class-matched
/// diagonal.
pub fn run_crossclass<T: Real>(
    spec: &AblationSpec,
    db: &Database<T>,
    base_cfg: &PipelineConfig,
) -> Result<Vec<HarnessRow>> {
    spec.validate()?;
    let descriptor = spec
        .descriptors
        .first()
        .copied()
        .unwrap_or(DescriptorKind::Wks);
    let mut rows = Vec::new();
    for &source in &spec.classes {
        let Some(source_idx) = db.lookup_index(source.object_class(), source.task()) else {
            return Err(Error::Config(format!(
                "database lacks the ({}, {}) entry",
                source.object_class(),
                source.task()
            )));
        };
        for (target_idx_in_spec, &target) in spec.classes.iter().enumerate() {
            let mut reports = Vec::with_capacity(spec.trials);
            for trial in 0..spec.trials {
                let seed = instance_seed(spec.seed ^ 0xc1a55, target_idx_in_spec, trial);
                let (query, truth) = trial_query::<T>(target, spec.n_points, seed, spec.partial, 0.0)?;
                let mut cfg = base_cfg.clone();
                cfg.descriptor = descriptor;
                cfg.grasp_enabled = false;
                cfg.seed = seed;
                let request = TaskRequest::new(target.object_class(), target.task())?;
                let out = run_transfer(&query, &request, db, &cfg, &RuleBackend, Some(source_idx))?;
                reports.push(compute_metrics(&out.field.labels, &truth.labels)?);
            }
            rows.push(HarnessRow {
                source_class: source.object_class().to_string(),
                target_class: target.object_class().to_string(),
                descriptor,
                aligned: base_cfg.align,
                rotation_max: 0.0,
                report: mean_report(&reports),
            });
        }
    }
    Ok(rows)
}

/// CSV: one row per cell. The descriptor column carries a `-noalign`
/// suffix for runs with the alignment stage disabled.
pub fn write_csv(rows: &[HarnessRow]) -> String {
    let mut out = String::from(
        "source,target,descriptor,rotation_range,accuracy,precision,recall,tp,fp,tn,fn\n",
    );
    for r in rows {
        let desc = format!(
            "{}{}",
            descriptor_name(r.descriptor),
            if r.aligned { "" } else { "-noalign" }
        );
        out.push_str(&format!(
            "{},{},{},0-{:.0},{},{},{},{},{},{},{}\n",
            r.source_class,
            r.target_class,
            desc,
            r.rotation_max.to_degrees(),
            r.report.accuracy,
            r.report.precision,
            r.report.recall,
            r.report.tp,
            r.report.fp,
            r.report.tn,
            r.report.fneg,
        ));
    }
    out
}

pub fn descriptor_name(kind: DescriptorKind) -> &'static str {
    match kind {
        DescriptorKind::Xyz => "xyz",
        DescriptorKind::Hks => "hks",
        DescriptorKind::Wks => "wks",
        DescriptorKind::External => "external",
    }
}

/// Plain-text summary table.
pub fn render_summary(rows: &[HarnessRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:<12} {:<14} {:<10} {:>9} {:>10} {:>8}\n",
        "source", "target", "descriptor", "rotation", "accuracy", "precision", "recall"
    ));
    for r in rows {
        let desc = format!(
            "{}{}",
            descriptor_name(r.descriptor),
            if r.aligned { "" } else { "-noalign" }
        );
        out.push_str(&format!(
            "{:<12} {:<12} {:<14} {:<10} {:>9.4} {:>10.4} {:>8.4}\n",
            r.source_class,
            r.target_class,
            desc,
            format!("0-{:.0}", r.rotation_max.to_degrees()),
            r.report.accuracy,
            r.report.precision,
            r.report.recall,
        ));
    }
    out
}

#[cfg(test)]
pub(super) fn instance_seed_for_tests(base: u64, class_idx: usize, trial: usize) -> u64 {
    instance_seed(base, class_idx, trial)
}
