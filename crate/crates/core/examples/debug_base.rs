use aft_core::evalkit::*;
use aft_core::pipeline::{run_transfer, PipelineConfig};
use aft_core::reasoner::{RuleBackend, TaskRequest};

fn main() {
    let classes = vec![SyntheticShape::ScrewdriverLike];
    let db = synthetic_database::<f64>(&classes, 700, 9000).unwrap();
    let obj = make_synthetic::<f64>(SyntheticShape::ScrewdriverLike, 700, 101);
    let mut cfg = PipelineConfig::default();
    cfg.grasp_enabled = false;
    let request = TaskRequest::new("screwdriver", "screw").unwrap();
    let out = run_transfer(&obj.cloud, &request, &db, &cfg, &RuleBackend, Some(0)).unwrap();
    let r = compute_metrics(&out.field.labels, &obj.field.labels).unwrap();
    println!("acc {:.4} prec {:.4} rec {:.4} tp {} fp {} tn {} fn {}", r.accuracy, r.precision, r.recall, r.tp, r.fp, r.tn, r.fneg);
    // where do the errors sit along the axis (original frame)?
    let a = out.alignment.as_ref().unwrap();
    println!("residual {:.4} angle {:.4} t {:?}", a.residual, aft_core::linalg::mat3::rotation_angle(&a.transform.rotation), a.transform.translation);
    let mut fp_x = vec![]; let mut fn_x = vec![];
    for i in 0..700 {
        let (p, t) = (out.field.labels[i], obj.field.labels[i]);
        if p && !t { fp_x.push(obj.cloud.points[i][0]); }
        if !p && t { fn_x.push(obj.cloud.points[i][0]); }
    }
    fp_x.sort_by(f64::total_cmp); fn_x.sort_by(f64::total_cmp);
    println!("FP x-range: {:?} .. {:?} (n={})", fp_x.first(), fp_x.last(), fp_x.len());
    println!("FN x-range: {:?} .. {:?} (n={})", fn_x.first(), fn_x.last(), fn_x.len());
    // also check several seeds for the mean
    let mut accs = vec![];
    for s in 100..108u64 {
        let o = make_synthetic::<f64>(SyntheticShape::ScrewdriverLike, 700, s);
        let out = run_transfer(&o.cloud, &request, &db, &cfg, &RuleBackend, Some(0)).unwrap();
        accs.push(compute_metrics(&out.field.labels, &o.field.labels).unwrap().accuracy);
    }
    println!("accs: {:?}", accs);
}
