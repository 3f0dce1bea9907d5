//! Parametric synthetic tools: surface-sampled point clouds with analytic
//! human-grasp labels and parametric subpart centers. Stand-ins for scanned
//! reference assets in tests and evaluations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::affordance::{binarize, AffordanceField, Database, DatabaseEntry, Subpart, SubpartRole};
use crate::error::Result;
use crate::geometry::{normalize_cloud, PointCloud};
use crate::real::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticShape {
    HammerLike,
    ScrewdriverLike,
    MugLike,
    Rod,
}

impl SyntheticShape {
    pub fn object_class(self) -> &'static str {
        match self {
            SyntheticShape::HammerLike => "hammer",
            SyntheticShape::ScrewdriverLike => "screwdriver",
            SyntheticShape::MugLike => "mug",
            SyntheticShape::Rod => "rod",
        }
    }

    pub fn task(self) -> &'static str {
        match self {
            SyntheticShape::HammerLike => "hammer",
            SyntheticShape::ScrewdriverLike => "screw",
            SyntheticShape::MugLike => "drink",
            SyntheticShape::Rod => "hold",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.to_lowercase().as_str() {
            "hammer" | "hammer_like" => Some(SyntheticShape::HammerLike),
            "screwdriver" | "screwdriver_like" => Some(SyntheticShape::ScrewdriverLike),
            "mug" | "mug_like" => Some(SyntheticShape::MugLike),
            "rod" => Some(SyntheticShape::Rod),
            _ => None,
        }
    }
}

pub struct SyntheticObject<T> {
    pub cloud: PointCloud<T>,
    pub field: AffordanceField<T>,
    pub subparts: Vec<Subpart<T>>,
    pub object_class: String,
    pub task: String,
    /// Analytic label-1 surface-area fraction of the instance.
    pub label_area_fraction: f64,
}

/// One sampleable surface patch: area, label, and a point/normal sampler.
struct Patch {
    area: f64,
    label: bool,
    sample: Box<dyn Fn(&mut ChaCha8Rng) -> ([f64; 3], [f64; 3])>,
}

fn lateral_cylinder_x(x0: f64, x1: f64, r: f64, label: bool) -> Patch {
    Patch {
        area: std::f64::consts::TAU * r * (x1 - x0),
        label,
        sample: Box::new(move |rng| {
            let x = rng.random_range(x0..x1);
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            ([x, r * a.cos(), r * a.sin()], [0.0, a.cos(), a.sin()])
        }),
    }
}

fn disk_x(x: f64, r: f64, normal_sign: f64, label: bool) -> Patch {
    Patch {
        area: std::f64::consts::PI * r * r,
        label,
        sample: Box::new(move |rng| {
            let rho = r * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            (
                [x, rho * a.cos(), rho * a.sin()],
                [normal_sign, 0.0, 0.0],
            )
        }),
    }
}

/// Cylinder with axis along z (mug body).
fn lateral_cylinder_z(z0: f64, z1: f64, r: f64, label: bool) -> Patch {
    Patch {
        area: std::f64::consts::TAU * r * (z1 - z0),
        label,
        sample: Box::new(move |rng| {
            let z = rng.random_range(z0..z1);
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            (
                [r * a.cos(), r * a.sin(), z],
                [a.cos(), a.sin(), 0.0],
            )
        }),
    }
}

fn disk_z(z: f64, r: f64, normal_sign: f64, label: bool) -> Patch {
    Patch {
        area: std::f64::consts::PI * r * r,
        label,
        sample: Box::new(move |rng| {
            let rho = r * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            (
                [rho * a.cos(), rho * a.sin(), z],
                [0.0, 0.0, normal_sign],
            )
        }),
    }
}

/// Tube along a circular arc in the x-z plane (mug handle): arc center
/// (cx, 0, 0), arc radius `a`, tube radius `rt`, arc angle in [-phi, phi]
/// measured from +x.
fn handle_arc(cx: f64, a: f64, rt: f64, phi: f64, label: bool) -> Patch {
    Patch {
        area: std::f64::consts::TAU * rt * (a * 2.0 * phi),
        label,
        sample: Box::new(move |rng| {
            let t = rng.random_range(-phi..phi);
            let radial = [t.cos(), 0.0, t.sin()];
            let psi = rng.random_range(0.0..std::f64::consts::TAU);
            // tube frame: radial direction of the arc and the y axis
            let normal = [
                psi.cos() * radial[0],
                psi.sin(),
                psi.cos() * radial[2],
            ];
            let center = [cx + a * radial[0], 0.0, a * radial[2]];
            (
                [
                    center[0] + rt * normal[0],
                    center[1] + rt * normal[1],
                    center[2] + rt * normal[2],
                ],
                normal,
            )
        }),
    }
}

struct Blueprint {
    patches: Vec<Patch>,
    subparts: Vec<(String, [f64; 3], SubpartRole)>,
}

/// +-3% per-seed parameter jitter.
fn jitter(rng: &mut ChaCha8Rng) -> f64 {
    1.0 + 0.03 * (2.0 * rng.random::<f64>() - 1.0)
}

fn blueprint(shape: SyntheticShape, rng: &mut ChaCha8Rng) -> Blueprint {
    match shape {
        SyntheticShape::HammerLike => {
            // mallet: slender handle along +x, fat coaxial head on the far
            // half; the human grasps the handle. The handle spans half the
            // axis, like the screwdriver's, which is what makes the two
            // classes functionally similar for transfer.
            let handle_len = 0.10 * jitter(rng);
            let handle_r = 0.012 * jitter(rng);
            let head_len = 0.10 * jitter(rng);
            let head_r = 0.030 * jitter(rng);
            Blueprint {
                patches: vec![
                    lateral_cylinder_x(0.0, handle_len, handle_r, true),
                    disk_x(0.0, handle_r, -1.0, true),
                    lateral_cylinder_x(handle_len, handle_len + head_len, head_r, false),
                    disk_x(handle_len + head_len, head_r, 1.0, false),
                ],
                subparts: vec![
                    ("handle".into(), [handle_len / 2.0, 0.0, 0.0], SubpartRole::GraspSide),
                    ("head".into(), [handle_len + head_len / 2.0, 0.0, 0.0], SubpartRole::FunctionSide),
                ],
            }
        }
        SyntheticShape::ScrewdriverLike => {
            // bulky handle, thin shaft; the human grasps the handle
            let handle_len = 0.10 * jitter(rng);
            let handle_r = 0.016 * jitter(rng);
            let shaft_len = 0.10 * jitter(rng);
            let shaft_r = 0.004 * jitter(rng);
            Blueprint {
                patches: vec![
                    lateral_cylinder_x(0.0, handle_len, handle_r, true),
                    disk_x(0.0, handle_r, -1.0, true),
                    disk_x(handle_len, handle_r, 1.0, true),
                    lateral_cylinder_x(handle_len, handle_len + shaft_len, shaft_r, false),
                    disk_x(handle_len + shaft_len, shaft_r, 1.0, false),
                ],
                subparts: vec![
                    ("handle".into(), [handle_len / 2.0, 0.0, 0.0], SubpartRole::GraspSide),
                    (
                        "shaft".into(),
                        [handle_len + shaft_len / 2.0, 0.0, 0.0],
                        SubpartRole::FunctionSide,
                    ),
                ],
            }
        }
        SyntheticShape::MugLike => {
            // squat body cylinder (axis z) with an arc handle bulging +x;
            // the human grasps the handle
            let body_r = 0.04 * jitter(rng);
            let half_h = 0.035 * jitter(rng);
            let arc_center = body_r * 0.8;
            let arc_r = 0.03 * jitter(rng);
            let tube_r = 0.0045 * jitter(rng);
            let phi = 70f64.to_radians();
            // mean x of the arc path
            let handle_cx = arc_center + arc_r * (phi.sin() - (-phi).sin()) / (2.0 * phi);
            Blueprint {
                patches: vec![
                    lateral_cylinder_z(-half_h, half_h, body_r, false),
                    disk_z(-half_h, body_r, -1.0, false),
                    handle_arc(arc_center, arc_r, tube_r, phi, true),
                ],
                subparts: vec![
                    ("handle".into(), [handle_cx, 0.0, 0.0], SubpartRole::GraspSide),
                    ("body".into(), [0.0, 0.0, 0.0], SubpartRole::FunctionSide),
                ],
            }
        }
        SyntheticShape::Rod => {
            // symmetric cylinder; one marked half is the grasp side
            let half_len = 0.10 * jitter(rng);
            let r = 0.009 * jitter(rng);
            Blueprint {
                patches: vec![
                    lateral_cylinder_x(-half_len, 0.0, r, true),
                    disk_x(-half_len, r, -1.0, true),
                    lateral_cylinder_x(0.0, half_len, r, false),
                    disk_x(half_len, r, 1.0, false),
                ],
                subparts: vec![
                    ("handle".into(), [-half_len / 2.0, 0.0, 0.0], SubpartRole::GraspSide),
                    ("head".into(), [half_len / 2.0, 0.0, 0.0], SubpartRole::FunctionSide),
                ],
            }
        }
    }
}

/// Surface noise applied to sampled points (meters).
const SURFACE_NOISE: f64 = 0.0005;

/// Sample a synthetic tool instance: `n_points` area-weighted surface
/// points with analytic normals, binary human-grasp labels, and parametric
/// subpart centers. Deterministic per (shape, n_points, seed).
pub fn make_synthetic<T: Real>(
    shape: SyntheticShape,
    n_points: usize,
    seed: u64,
) -> SyntheticObject<T> {
    assert!(n_points >= 100, "need at least 100 points");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bp = blueprint(shape, &mut rng);

    let total_area: f64 = bp.patches.iter().map(|p| p.area).sum();
    let label_area: f64 = bp
        .patches
        .iter()
        .filter(|p| p.label)
        .map(|p| p.area)
        .sum();
    let cumulative: Vec<f64> = bp
        .patches
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p.area / total_area;
            Some(*acc)
        })
        .collect();

    let mut points = Vec::with_capacity(n_points);
    let mut normals = Vec::with_capacity(n_points);
    let mut heat = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let u = rng.random::<f64>();
        let patch_idx = cumulative
            .iter()
            .position(|&c| u <= c)
            .unwrap_or(bp.patches.len() - 1);
        let patch = &bp.patches[patch_idx];
        let (mut p, n) = (patch.sample)(&mut rng);
        for c in p.iter_mut() {
            let noise: f64 = StandardNormal.sample(&mut rng);
            *c += SURFACE_NOISE * noise;
        }
        points.push([real::<T>(p[0]), real(p[1]), real(p[2])]);
        normals.push([real::<T>(n[0]), real(n[1]), real(n[2])]);
        heat.push(if patch.label { T::one() } else { T::zero() });
    }

    let cloud = PointCloud::new(points, format!("{}-{seed}", shape.object_class()))
        .with_normals(normals)
        .expect("analytic normals are unit");
    let field = binarize(&heat, real(0.5)).expect("binary heat");
    SyntheticObject {
        cloud,
        field,
        subparts: bp
            .subparts
            .into_iter()
            .map(|(name, c, role)| Subpart {
                name,
                center: [real(c[0]), real(c[1]), real(c[2])],
                role,
            })
            .collect(),
        object_class: shape.object_class().to_string(),
        task: shape.task().to_string(),
        label_area_fraction: label_area / total_area,
    }
}

/// Canonicalize a synthetic instance into a database entry: normalize the
/// reference cloud and annotate subpart centers with the same coarse-slab
/// localization the pipeline applies to queries, so annotated and derived
/// part centers share one convention (parametric centers transformed into
/// the canonical frame serve as the fallback for unlabeled parts).
pub fn db_entry_from_synthetic<T: Real>(obj: &SyntheticObject<T>) -> Result<DatabaseEntry<T>> {
    let normalized = normalize_cloud(&obj.cloud)?;
    let request = crate::reasoner::TaskRequest::new(&obj.object_class, &obj.task)?;
    let labeling = crate::reasoner::localize_parts(
        &normalized.cloud,
        &request,
        &crate::reasoner::RuleBackend,
        3,
    )?;
    // End-anchored annotation, matching the query-side convention: the
    // grasp-side subpart sits at the end region carrying its label, the
    // function-side subpart at the opposite end region.
    let first = labeling.regions.first().expect("regions non-empty");
    let last = labeling.regions.last().expect("regions non-empty");
    let grasp_name = obj
        .subparts
        .iter()
        .find(|s| s.role == SubpartRole::GraspSide)
        .map(|s| s.name.clone());
    let ends = grasp_name.and_then(|name| {
        if first.label == name {
            Some((first.center, last.center))
        } else if last.label == name {
            Some((last.center, first.center))
        } else {
            None
        }
    });
    let entry = DatabaseEntry {
        object_class: obj.object_class.clone(),
        task: obj.task.clone(),
        reference: normalized.cloud,
        subparts: obj
            .subparts
            .iter()
            .map(|s| {
                let center = match (s.role, ends) {
                    (SubpartRole::GraspSide, Some((grasp_end, _))) => grasp_end,
                    (SubpartRole::FunctionSide, Some((_, function_end))) => function_end,
                    _ => labeling
                        .center_of(&s.name)
                        .unwrap_or_else(|| normalized.transform.apply(s.center)),
                };
                Subpart {
                    name: s.name.clone(),
                    center,
                    role: s.role,
                }
            })
            .collect(),
        affordance: obj.field.clone(),
    };
    for w in entry.validate()? {
        log::warn!("{w}");
    }
    Ok(entry)
}

/// Build an exemplar database from synthetic instances, one entry per
/// shape, seeded from `seed_base`.
pub fn synthetic_database<T: Real>(
    shapes: &[SyntheticShape],
    n_points: usize,
    seed_base: u64,
) -> Result<Database<T>> {
    let mut db = Database::new();
    for (i, &shape) in shapes.iter().enumerate() {
        let obj = make_synthetic(shape, n_points, seed_base + i as u64);
        db.insert(db_entry_from_synthetic(&obj)?)?;
    }
    Ok(db)
}
