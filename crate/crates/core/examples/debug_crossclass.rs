use aft_core::evalkit::*;
use aft_core::pipeline::PipelineConfig;
use aft_core::spectral::DescriptorKind;

fn main() {
    let classes = vec![
        SyntheticShape::HammerLike,
        SyntheticShape::ScrewdriverLike,
        SyntheticShape::MugLike,
    ];
    let db = synthetic_database::<f64>(&classes, 700, 9000).unwrap();
    let spec = AblationSpec {
        rotation_max: 0.0,
        trials: 8,
        seed: 42,
        descriptors: vec![DescriptorKind::Xyz],
        classes: classes.clone(),
        n_points: 700,
        partial: false,
    };
    let mut cfg = PipelineConfig::default();
    cfg.spectral.num_eigenpairs = 60;
    cfg.wks_energies = 60;
    cfg.grasp_enabled = false;
    let t0 = std::time::Instant::now();
    let rows = run_crossclass(&spec, &db, &cfg).unwrap();
    println!("crossclass (xyz) took {:?}", t0.elapsed());
    println!("{}", render_summary(&rows));

    // rotation sweep: unrotated vs fully rotated, xyz and wks
    for rot in [0.0, std::f64::consts::TAU] {
        let spec = AblationSpec {
            rotation_max: rot,
            trials: 8,
            seed: 42,
            descriptors: vec![DescriptorKind::Xyz, DescriptorKind::Wks],
            classes: classes.clone(),
            n_points: 700,
            partial: false,
        };
        let t0 = std::time::Instant::now();
        let rows = run_rotation_ablation(&spec, &db, &cfg).unwrap();
        println!("rotation {:.0} deg took {:?}", rot.to_degrees(), t0.elapsed());
        println!("{}", render_summary(&rows));
    }
}
