use aft_core::evalkit::*;
use aft_core::pipeline::{run_transfer, PipelineConfig};
use aft_core::reasoner::{RuleBackend, TaskRequest};

fn run_case(db: &aft_core::affordance::Database<f64>, target: SyntheticShape, source: &str, stask: &str,
            sinkhorn: bool, seeds: &[u64]) -> f64 {
    let src_idx = db.lookup_index(source, stask).unwrap();
    let mut acc = 0.0;
    for &s in seeds {
        let obj = make_synthetic::<f64>(target, 700, s);
        let mut cfg = PipelineConfig::default();
        cfg.grasp_enabled = false;
        cfg.sinkhorn_enabled = sinkhorn;
        let request = TaskRequest::new(obj.object_class.clone(), obj.task.clone()).unwrap();
        let out = run_transfer(&obj.cloud, &request, db, &cfg, &RuleBackend, Some(src_idx)).unwrap();
        acc += compute_metrics(&out.field.labels, &obj.field.labels).unwrap().accuracy;
    }
    acc / seeds.len() as f64
}

fn main() {
    let classes = vec![SyntheticShape::HammerLike, SyntheticShape::ScrewdriverLike, SyntheticShape::MugLike];
    let db = synthetic_database::<f64>(&classes, 700, 9000).unwrap();
    let seeds: Vec<u64> = (100..108).collect();
    for sink in [true, false] {
        println!("sinkhorn={sink}");
        println!("  screw->screw:  {:.4}", run_case(&db, SyntheticShape::ScrewdriverLike, "screwdriver", "screw", sink, &seeds));
        println!("  hammer->screw: {:.4}", run_case(&db, SyntheticShape::ScrewdriverLike, "hammer", "hammer", sink, &seeds));
        println!("  mug->screw:    {:.4}", run_case(&db, SyntheticShape::MugLike, "mug", "drink", sink, &seeds));
    }
}
