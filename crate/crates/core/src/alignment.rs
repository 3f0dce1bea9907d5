//! Query point cloud alignment: rotate the normalized query into the proxy
//! entry's frame by aligning part-center axes.

use crate::affordance::DatabaseEntry;
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RigidTransform};
use crate::linalg::{mat3, vec3};
use crate::real::{real, Real};
use crate::reasoner::PartMapping;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignmentMethod {
    /// Part-center axis alignment (two or more mapped pairs).
    PartAxis,
    /// PCA axes assumed aligned; a half-turn flip resolved from a single
    /// mapped pair.
    PcaFallback,
}

#[derive(Debug, Clone)]
pub struct AlignmentResult<T> {
    /// Maps the (normalized) query into the proxy frame: a rotation plus
    /// the least-squares translation between mapped centers, scale 1.
    pub transform: RigidTransform<T>,
    pub aligned_query: PointCloud<T>,
    pub method: AlignmentMethod,
    /// RMS distance between mapped query centers and their proxy
    /// counterparts after the transform.
    pub residual: T,
}

/// Minimum separation of the two axis-defining centers, as a fraction of
/// the cloud extent.
pub const MIN_CENTER_SEPARATION: f64 = 0.05;

/// Align the normalized query with the proxy reference frame.
///
/// With two or more mapped pairs the rotation takes the query part-center
/// axis (first -> second mapped center) onto the proxy subpart axis; the
/// roll about that axis comes from the remaining mapped centers in closed
/// form (zero when only two pairs exist). A single pair falls back to
/// PCA-aligned frames with the half-turn flip chosen so the mapped centers
/// land on matching half-spaces.
pub fn align_query<T: Real>(
    query: &PointCloud<T>,
    mapping: &PartMapping<T>,
    proxy: &DatabaseEntry<T>,
) -> Result<AlignmentResult<T>> {
    // gather (query center, proxy center) in pair order (function side first)
    let mut pairs: Vec<([T; 3], [T; 3])> = Vec::new();
    for (q_name, p_name) in &mapping.pairs {
        let (Some(q), Some(p)) = (
            mapping.query_part_centers.get(q_name).copied(),
            proxy.subparts.iter().find(|s| &s.name == p_name).map(|s| s.center),
        ) else {
            continue;
        };
        pairs.push((q, p));
    }
    if pairs.is_empty() {
        return Err(Error::NoMappedCenters);
    }

    let extent = query.max_extent();
    let min_sep = real::<T>(MIN_CENTER_SEPARATION) * extent;

    let (rotation, method) = if pairs.len() >= 2 {
        let axis_q_raw = vec3::sub(pairs[1].0, pairs[0].0);
        let axis_p_raw = vec3::sub(pairs[1].1, pairs[0].1);
        let sep = vec3::norm(axis_q_raw).min(vec3::norm(axis_p_raw));
        if sep < min_sep {
            return Err(Error::CoincidentPartCenters {
                separation: sep.to_f64().unwrap_or(0.0),
                minimum: min_sep.to_f64().unwrap_or(0.0),
            });
        }
        let axis_q = vec3::normalized(axis_q_raw, T::epsilon()).unwrap();
        let axis_p = vec3::normalized(axis_p_raw, T::epsilon()).unwrap();
        let base = mat3::rotation_between(axis_q, axis_p);

        // roll about the proxy axis from the remaining mapped centers
        let mut sin_acc = T::zero();
        let mut cos_acc = T::zero();
        for (q, p) in pairs.iter().skip(2) {
            let a = perp_component(mat3::matvec(&base, *q), axis_p);
            let b = perp_component(*p, axis_p);
            sin_acc += vec3::dot(vec3::cross(a, b), axis_p);
            cos_acc += vec3::dot(a, b);
        }
        let rotation = if sin_acc.abs() > T::epsilon() || cos_acc.abs() > T::epsilon() {
            let theta = sin_acc.atan2(cos_acc);
            mat3::matmul(&mat3::axis_angle(axis_p, theta), &base)
        } else {
            base
        };
        (rotation, AlignmentMethod::PartAxis)
    } else {
        // PCA frames already coincide up to half-turn flips; pick the flip
        // that puts the single mapped center on the proxy's half-space.
        let (q, p) = pairs[0];
        if vec3::norm(q) < min_sep {
            log::warn!(
                "pca_fallback with a near-origin mapped center; flip is weakly determined"
            );
        }
        let one = T::one();
        let flips: [[T; 3]; 4] = [
            [one, one, one],
            [one, -one, -one],
            [-one, one, -one],
            [-one, -one, one],
        ];
        let mut best = flips[0];
        let mut best_d = T::infinity();
        for f in flips {
            let fq = [q[0] * f[0], q[1] * f[1], q[2] * f[2]];
            let d = vec3::dist_sq(fq, p);
            if d < best_d {
                best_d = d;
                best = f;
            }
        }
        let mut rotation = mat3::identity();
        for a in 0..3 {
            rotation[a][a] = best[a];
        }
        (rotation, AlignmentMethod::PcaFallback)
    };

    // least-squares translation bringing the mapped query centers onto
    // their proxy counterparts: aligning the part-center axes as lines,
    // not just directions (scale is never re-fit; both clouds are already
    // unit extent)
    let inv_m = T::one() / T::from(pairs.len()).unwrap();
    let mut mean_q = [T::zero(); 3];
    let mut mean_p = [T::zero(); 3];
    for (q, p) in &pairs {
        mean_q = vec3::add(mean_q, *q);
        mean_p = vec3::add(mean_p, *p);
    }
    mean_q = vec3::scale(mean_q, inv_m);
    mean_p = vec3::scale(mean_p, inv_m);
    let translation = vec3::sub(mean_p, mat3::matvec(&rotation, mean_q));

    let transform = RigidTransform {
        rotation,
        translation,
        scale: T::one(),
    };
    let aligned_query = query.transformed(&transform);

    let mut res_sq = T::zero();
    for (q, p) in &pairs {
        res_sq += vec3::dist_sq(transform.apply(*q), *p);
    }
    let residual = (res_sq / T::from(pairs.len()).unwrap()).sqrt();

    Ok(AlignmentResult {
        transform,
        aligned_query,
        method,
        residual,
    })
}

fn perp_component<T: Real>(v: [T; 3], axis: [T; 3]) -> [T; 3] {
    vec3::sub(v, vec3::scale(axis, vec3::dot(v, axis)))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::affordance::{binarize, Subpart, SubpartRole};
    use crate::geometry::random_rotation;

    /// Rod-like canonical cloud, sampled in antipodal (y,z) pairs so any
    /// half-turn about the symmetry axis maps the sample set onto itself.
    fn rod_entry() -> DatabaseEntry<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut points = Vec::new();
        for i in 0..200 {
            let x = -0.5 + i as f64 / 199.0;
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let (y, z) = (0.05 * a.cos(), 0.05 * a.sin());
            points.push([x, y, z]);
            points.push([x, -y, -z]);
        }
        let cloud = crate::geometry::normalize_cloud(&PointCloud::new(points, "rod"))
            .unwrap()
            .cloud;
        let heat: Vec<f64> = cloud
            .points
            .iter()
            .map(|p| if p[0] < 0.0 { 1.0 } else { 0.0 })
            .collect();
        DatabaseEntry {
            object_class: "rod".into(),
            task: "hold".into(),
            reference: cloud,
            subparts: vec![
                Subpart {
                    name: "handle".into(),
                    center: [-0.4, 0.0, 0.0],
                    role: SubpartRole::GraspSide,
                },
                Subpart {
                    name: "head".into(),
                    center: [0.4, 0.0, 0.0],
                    role: SubpartRole::FunctionSide,
                },
            ],
            affordance: binarize(&heat, 0.5).unwrap(),
        }
    }

    fn mapping_for(
        pairs: &[(&str, &str)],
        centers: &[(&str, [f64; 3])],
    ) -> PartMapping<f64> {
        PartMapping {
            proxy_index: 0,
            pairs: pairs
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            query_part_centers: centers
                .iter()
                .map(|(n, c)| (n.to_string(), *c))
                .collect::<BTreeMap<_, _>>(),
        }
    }

    #[test]
    fn self_alignment_is_identity() {
        let entry = rod_entry();
        let mapping = mapping_for(
            &[("head", "head"), ("handle", "handle")],
            &[("head", [0.4, 0.0, 0.0]), ("handle", [-0.4, 0.0, 0.0])],
        );
        let out = align_query(&entry.reference, &mapping, &entry).unwrap();
        assert_eq!(out.method, AlignmentMethod::PartAxis);
        assert!(mat3::rotation_angle(&out.transform.rotation) < 1e-9);
        assert!(out.residual < 1e-12);
    }

    #[test]
    fn recovers_quarter_turn_about_z() {
        let entry = rod_entry();
        let quarter = mat3::axis_angle([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2);
        let rot = RigidTransform {
            rotation: quarter,
            translation: [0.0; 3],
            scale: 1.0,
        };
        let query = entry.reference.transformed(&rot);
        // mapped centers move with the query
        let c_head = mat3::matvec(&quarter, [0.4, 0.0, 0.0]);
        let c_handle = mat3::matvec(&quarter, [-0.4, 0.0, 0.0]);
        let mapping = mapping_for(
            &[("head", "head"), ("handle", "handle")],
            &[("head", c_head), ("handle", c_handle)],
        );
        let out = align_query(&query, &mapping, &entry).unwrap();
        // the inverse quarter turn, exactly (rotation axis perpendicular to
        // the part axis)
        let recovered = mat3::matmul(&out.transform.rotation, &quarter);
        assert!(
            mat3::rotation_angle(&recovered) < 1e-6,
            "angle {}",
            mat3::rotation_angle(&recovered)
        );
        assert!(out.residual <= 1e-6);
        // aligned cloud coincides with the reference
        for (p, q) in entry.reference.points.iter().zip(&out.aligned_query.points) {
            assert!(vec3::dist(*p, *q) < 1e-9);
        }
    }

    #[test]
    fn three_pairs_recover_roll_exactly() {
        let entry = rod_entry();
        // arbitrary rotation: axis alignment plus roll must reproduce it
        let rot = random_rotation::<f64>(11, std::f64::consts::TAU);
        let query = entry.reference.transformed(&rot);
        let centers_p = [
            [0.4, 0.0, 0.0],
            [-0.4, 0.0, 0.0],
            [0.1, 0.2, 0.05], // off-axis third center fixes the roll
        ];
        let names = ["head", "handle", "mid"];
        let mut proxy = entry.clone();
        proxy.subparts.push(Subpart {
            name: "mid".into(),
            center: centers_p[2],
            role: SubpartRole::Neutral,
        });
        let centers_q: Vec<(&str, [f64; 3])> = names
            .iter()
            .zip(centers_p)
            .map(|(n, c)| (*n, mat3::matvec(&rot.rotation, c)))
            .collect();
        let mapping = mapping_for(
            &[("head", "head"), ("handle", "handle"), ("mid", "mid")],
            &centers_q,
        );
        let out = align_query(&query, &mapping, &proxy).unwrap();
        let recovered = mat3::matmul(&out.transform.rotation, &rot.rotation);
        assert!(
            mat3::rotation_angle(&recovered) < 1e-9,
            "residual rotation {}",
            mat3::rotation_angle(&recovered)
        );
        assert!(out.residual < 1e-9);
    }

    #[test]
    fn single_pair_fallback_resolves_half_turn_flip() {
        let entry = rod_entry();
        // flipped copy: half turn about z negates x and y
        let flip = mat3::axis_angle([0.0, 0.0, 1.0], std::f64::consts::PI);
        let rot = RigidTransform {
            rotation: flip,
            translation: [0.0; 3],
            scale: 1.0,
        };
        let query = entry.reference.transformed(&rot);
        let mapping = mapping_for(
            &[("handle", "handle")],
            &[("handle", mat3::matvec(&flip, [-0.4, 0.0, 0.0]))],
        );
        let out = align_query(&query, &mapping, &entry).unwrap();
        assert_eq!(out.method, AlignmentMethod::PcaFallback);
        // handle ends coincide again
        let max_nn: f64 = out
            .aligned_query
            .points
            .iter()
            .map(|p| {
                entry
                    .reference
                    .points
                    .iter()
                    .map(|q| vec3::dist(*p, *q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        assert!(max_nn < 1e-9, "flip not resolved, max NN dist {max_nn}");
        assert!((mat3::det(&out.transform.rotation) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_centers_are_rejected() {
        let entry = rod_entry();
        let mapping = mapping_for(
            &[("head", "head"), ("handle", "handle")],
            &[("head", [0.01, 0.0, 0.0]), ("handle", [0.0, 0.0, 0.0])],
        );
        // proxy centers are fine, but query centers nearly coincide
        assert!(matches!(
            align_query(&entry.reference, &mapping, &entry),
            Err(Error::CoincidentPartCenters { .. })
        ));
    }

    #[test]
    fn no_mapped_centers_is_an_error() {
        let entry = rod_entry();
        let mapping = mapping_for(&[("head", "head")], &[("other", [0.0; 3])]);
        assert!(matches!(
            align_query(&entry.reference, &mapping, &entry),
            Err(Error::NoMappedCenters)
        ));
    }

    #[test]
    fn all_branches_produce_proper_rotations() {
        let entry = rod_entry();
        for seed in 0..6u64 {
            let rot = random_rotation::<f64>(seed, std::f64::consts::TAU);
            let query = entry.reference.transformed(&rot);
            let mapping = mapping_for(
                &[("head", "head"), ("handle", "handle")],
                &[
                    ("head", mat3::matvec(&rot.rotation, [0.4, 0.0, 0.0])),
                    ("handle", mat3::matvec(&rot.rotation, [-0.4, 0.0, 0.0])),
                ],
            );
            let out = align_query(&query, &mapping, &entry).unwrap();
            assert!((mat3::det(&out.transform.rotation) - 1.0).abs() < 1e-9);
            assert!(mat3::orthonormality_defect(&out.transform.rotation) < 1e-9);
        }
    }
}
