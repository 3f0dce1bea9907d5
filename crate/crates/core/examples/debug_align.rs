use aft_core::evalkit::*;
use aft_core::pipeline::{run_transfer, PipelineConfig};
use aft_core::reasoner::{RuleBackend, TaskRequest};

fn main() {
    let classes = vec![SyntheticShape::HammerLike, SyntheticShape::ScrewdriverLike, SyntheticShape::MugLike];
    let db = synthetic_database::<f64>(&classes, 700, 9000).unwrap();
    let hammer_idx = db.lookup_index("hammer", "hammer").unwrap();
    println!("hammer subparts: {:?}", db.entries[hammer_idx].subparts.iter().map(|s| (s.name.clone(), s.center)).collect::<Vec<_>>());

    let obj = make_synthetic::<f64>(SyntheticShape::ScrewdriverLike, 700, 777);
    let mut cfg = PipelineConfig::default();
    cfg.grasp_enabled = false;
    let request = TaskRequest::new("screwdriver", "screw").unwrap();
    let out = run_transfer(&obj.cloud, &request, &db, &cfg, &RuleBackend, Some(hammer_idx)).unwrap();
    let a = out.alignment.as_ref().unwrap();
    println!("pairs: {:?}", out.mapping.pairs);
    println!("query centers: {:?}", out.mapping.query_part_centers);
    println!("align rotation angle {:.4}, translation {:?}, residual {:.4}",
        aft_core::linalg::mat3::rotation_angle(&a.transform.rotation),
        a.transform.translation, a.residual);
    let r = compute_metrics(&out.field.labels, &obj.field.labels).unwrap();
    println!("accuracy {:.4} precision {:.4} recall {:.4}", r.accuracy, r.precision, r.recall);
}
