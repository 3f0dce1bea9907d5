use aft_core::evalkit::{db_entry_from_synthetic, make_synthetic, SyntheticShape};
use aft_core::pipeline::{run_transfer, PipelineConfig};
use aft_core::reasoner::{RuleBackend, TaskRequest};
use aft_core::affordance::Database;
use aft_core::linalg::vec3;

fn main() {
    let seed = 7u64.wrapping_mul(1_000_003);
    let obj = make_synthetic::<f64>(SyntheticShape::HammerLike, 420, seed);
    let mut db = Database::new();
    db.insert(db_entry_from_synthetic(&obj).unwrap()).unwrap();

    let mut cfg = PipelineConfig::default();
    cfg.spectral.num_eigenpairs = 30;
    cfg.wks_energies = 40;
    cfg.grasp_enabled = false;

    let request = TaskRequest::new("hammer", "hammer").unwrap();
    let out = run_transfer(&obj.cloud, &request, &db, &cfg, &RuleBackend, None).unwrap();

    let align = out.alignment.as_ref().unwrap();
    println!("alignment method {:?} residual {:.4e}", align.method, align.residual);
    println!("alignment rotation angle: {:.6} rad", aft_core::linalg::mat3::rotation_angle(&align.transform.rotation));

    let mut mismatched = 0;
    let mut label_flips = 0;
    let entry = &db.entries[0];
    for (i, &t) in out.point_map.target_index.iter().enumerate() {
        if t != i {
            mismatched += 1;
            if entry.affordance.labels[t] != entry.affordance.labels[i] {
                label_flips += 1;
                if label_flips <= 8 {
                    let d = vec3::dist(entry.reference.points[i], entry.reference.points[t]);
                    println!("point {i} -> {t}, geo dist {d:.4}, conf {:.4}, labels {} -> {}",
                        out.point_map.confidence[i],
                        entry.affordance.labels[i], entry.affordance.labels[t]);
                }
            }
        }
    }
    println!("mismapped: {mismatched}/{}, label flips: {label_flips}", obj.cloud.len());
    let acc = out.field.labels.iter().zip(&obj.field.labels).filter(|(a,b)| a==b).count() as f64 / 420.0;
    println!("accuracy {acc}");
}
