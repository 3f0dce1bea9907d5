//! Parallel-jaw grasp sampling on a point cloud, weighted scoring
//! (human-region overlap, distance to the human region, robot
//! feasibility), selection of the best candidate, and the handover
//! orientation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affordance::AffordanceField;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::linalg::{mat3, mat3::Mat3, vec3};
use crate::real::{real, Real};

/// SE(3) grasp pose: local +x is the closing axis (through both jaw
/// contacts), local +z the approach axis. `jaws` are the two defining
/// contact indices; `contacts` every cloud point inside the closing region.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspCandidate<T> {
    /// Rotation with columns = grasp frame axes in world coordinates.
    pub rotation: Mat3<T>,
    /// Grasp center (midpoint between the jaw contacts), meters.
    pub translation: [T; 3],
    /// Jaw opening, meters.
    pub width: T,
    pub jaws: [usize; 2],
    pub contacts: Vec<usize>,
}

impl<T: Real> GraspCandidate<T> {
    pub fn closing_axis(&self) -> [T; 3] {
        [self.rotation[0][0], self.rotation[1][0], self.rotation[2][0]]
    }

    pub fn approach_axis(&self) -> [T; 3] {
        [self.rotation[0][2], self.rotation[1][2], self.rotation[2][2]]
    }

    /// Row-major 4x4 homogeneous matrix of the pose.
    pub fn homogeneous(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0f64; 4]; 4];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = self.rotation[r][c].to_f64().unwrap();
            }
            m[r][3] = self.translation[r].to_f64().unwrap();
        }
        m[3][3] = 1.0;
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub w_heat: f64,
    pub w_dist: f64,
    pub w_feas: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            w_heat: 1.0,
            w_dist: 0.05,
            w_feas: 1.0,
        }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<()> {
        if self.w_heat < 0.0 || self.w_dist < 0.0 || self.w_feas < 0.0 {
            return Err(Error::Config("score weights must be nonnegative".into()));
        }
        if self.w_heat == 0.0 && self.w_dist == 0.0 && self.w_feas == 0.0 {
            return Err(Error::Config("score weights must not all be zero".into()));
        }
        Ok(())
    }
}

/// Component scores of one candidate; lower total is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreBreakdown {
    /// Fraction of human-grasp points touched by the closing region.
    pub s_heat: f64,
    /// Distance to the human-region center over the object extent, [0,1].
    pub d_human: f64,
    /// Robot feasibility cost, [0,1].
    pub s_feas: f64,
    pub total: f64,
}

/// Geometric contact radius: max(5 mm, 2% of the object extent).
pub fn contact_radius<T: Real>(extent: T) -> T {
    real::<T>(0.005).max(real::<T>(0.02) * extent)
}

/// Sampling knobs. Defaults: 8 cm jaws, 150 degree normal opposition,
/// closing axis within 60 degrees of both contact normals, deduplication
/// at 5 mm / 10 degrees.
#[derive(Debug, Clone)]
pub struct SamplerParams {
    pub max_width: f64,
    pub min_opposition_deg: f64,
    pub axis_cone_deg: f64,
    pub dedup_translation: f64,
    pub dedup_angle_deg: f64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            max_width: 0.08,
            min_opposition_deg: 150.0,
            axis_cone_deg: 60.0,
            dedup_translation: 0.005,
            dedup_angle_deg: 10.0,
        }
    }
}

/// Normals via PCA over the `k` nearest neighbors, oriented outward from
/// the cloud centroid.
pub fn estimate_normals<T: Real>(cloud: &PointCloud<T>, k: usize) -> Vec<[T; 3]> {
    let n = cloud.len();
    let k = k.min(n - 1).max(2);
    let centroid = cloud.centroid();
    let mut normals = Vec::with_capacity(n);
    let mut scratch: Vec<(T, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        scratch.clear();
        for j in 0..n {
            if j != i {
                scratch.push((vec3::dist_sq(cloud.points[i], cloud.points[j]), j));
            }
        }
        scratch.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let neighbors: Vec<[T; 3]> = scratch.iter().take(k).map(|&(_, j)| cloud.points[j]).collect();
        let mut mean = cloud.points[i];
        for p in &neighbors {
            mean = vec3::add(mean, *p);
        }
        mean = vec3::scale(mean, T::one() / T::from(k + 1).unwrap());
        let mut cov = ndarray::Array2::<T>::zeros((3, 3));
        let mut accumulate = |p: [T; 3]| {
            let d = vec3::sub(p, mean);
            for r in 0..3 {
                for c in 0..3 {
                    cov[[r, c]] += d[r] * d[c];
                }
            }
        };
        accumulate(cloud.points[i]);
        for p in &neighbors {
            accumulate(*p);
        }
        let eig = crate::linalg::dense::symmetric_eigen(&cov).expect("3x3 eigen");
        let mut normal = [eig.vectors[[0, 0]], eig.vectors[[1, 0]], eig.vectors[[2, 0]]];
        let outward = vec3::sub(cloud.points[i], centroid);
        if vec3::dot(normal, outward) < T::zero() {
            normal = vec3::scale(normal, -T::one());
        }
        normals.push(normal);
    }
    normals
}

/// Antipodal sampling: point pairs with near-opposed normals within the jaw
/// width, the closing line inside both normal cones. Deterministic per
/// seed; candidates deduplicated at the params' pose resolution.
pub fn sample_grasps<T: Real>(
    cloud: &PointCloud<T>,
    n: usize,
    seed: u64,
    params: &SamplerParams,
) -> Result<Vec<GraspCandidate<T>>> {
    assert!(n >= 1, "need at least one candidate");
    if cloud.len() < 2 {
        return Err(Error::NoCandidates);
    }
    let normals = match &cloud.normals {
        Some(ns) => ns.clone(),
        None => estimate_normals(cloud, 10),
    };

    let max_width = real::<T>(params.max_width);
    let min_sep = max_width * real(1e-3);
    let opp_cos = real::<T>(params.min_opposition_deg.to_radians().cos());
    let cone_cos = real::<T>(params.axis_cone_deg.to_radians().cos());
    let dedup_t = real::<T>(params.dedup_translation);
    let dedup_a = real::<T>(params.dedup_angle_deg.to_radians());
    let r_contact = contact_radius(cloud.max_extent());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<GraspCandidate<T>> = Vec::new();
    let attempts = 600 * n.max(8);
    for _ in 0..attempts {
        if out.len() >= n {
            break;
        }
        let i = rng.random_range(0..cloud.len());
        let j = rng.random_range(0..cloud.len());
        let roll = rng.random::<f64>() * std::f64::consts::TAU;
        if i == j {
            continue;
        }
        let d = vec3::dist(cloud.points[i], cloud.points[j]);
        if d > max_width || d < min_sep {
            continue;
        }
        // near-opposed normals
        if vec3::dot(normals[i], normals[j]) > opp_cos {
            continue;
        }
        let u = vec3::scale(vec3::sub(cloud.points[j], cloud.points[i]), T::one() / d);
        // closing line within both normal cones
        if vec3::dot(u, normals[i]).abs() < cone_cos || vec3::dot(u, normals[j]).abs() < cone_cos {
            continue;
        }

        // grasp frame: x = closing axis, approach = perpendicular at a
        // seeded roll angle around it
        let perp = mat3::any_perpendicular(u);
        let approach = mat3::matvec(&mat3::axis_angle(u, real(roll)), perp);
        let y = vec3::cross(approach, u);
        let rotation: Mat3<T> = [
            [u[0], y[0], approach[0]],
            [u[1], y[1], approach[1]],
            [u[2], y[2], approach[2]],
        ];
        let center = vec3::scale(vec3::add(cloud.points[i], cloud.points[j]), real(0.5));

        // dedup at 5 mm / 10 degrees
        let dup = out.iter().any(|g| {
            vec3::dist(g.translation, center) < dedup_t
                && mat3::rotation_angle(&mat3::matmul(&mat3::transpose(&g.rotation), &rotation))
                    < dedup_a
        });
        if dup {
            continue;
        }

        let contacts: Vec<usize> = (0..cloud.len())
            .filter(|&p| {
                vec3::dist_to_segment(cloud.points[p], cloud.points[i], cloud.points[j])
                    <= r_contact
            })
            .collect();
        out.push(GraspCandidate {
            rotation,
            translation: center,
            width: d,
            jaws: [i, j],
            contacts,
        });
    }
    if out.is_empty() {
        return Err(Error::NoCandidates);
    }
    Ok(out)
}

/// Angular deviation between the candidate approach and a reference
/// approach direction, normalized by pi into [0,1].
pub fn feasibility_angular<T: Real>(g: &GraspCandidate<T>, reference_approach: [T; 3]) -> f64 {
    let cosine = vec3::dot(g.approach_axis(), reference_approach)
        .max(-T::one())
        .min(T::one());
    cosine.to_f64().unwrap().acos() / std::f64::consts::PI
}

/// Scoring options beyond the weights.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScoreOptions {
    /// Negate the distance term (the objective as written prefers grasps
    /// close to the human region center; this flips that preference).
    pub invert_distance_term: bool,
}

/// Score one candidate: s_heat = touched fraction of the human-grasp
/// points, d_human = normalized distance to their centroid, s_feas from
/// the provided feasibility function. A field without label-1 points
/// scores s_heat = 0, d_human = 1.
pub fn score_grasp<T: Real>(
    g: &GraspCandidate<T>,
    field: &AffordanceField<T>,
    cloud: &PointCloud<T>,
    weights: &ScoreWeights,
    feas: &dyn Fn(&GraspCandidate<T>) -> f64,
    opts: &ScoreOptions,
) -> ScoreBreakdown {
    let extent = cloud.max_extent();
    let r = contact_radius(extent);
    let label1 = field.label1_indices();

    let (s_heat, d_human) = if label1.is_empty() {
        (0.0, 1.0)
    } else {
        let a = cloud.points[g.jaws[0]];
        let b = cloud.points[g.jaws[1]];
        let touched = label1
            .iter()
            .filter(|&&i| vec3::dist_to_segment(cloud.points[i], a, b) <= r)
            .count();
        let centroid = field.label1_centroid(cloud).expect("non-empty label set");
        let d = vec3::dist(g.translation, centroid) / extent;
        (
            touched as f64 / label1.len() as f64,
            d.to_f64().unwrap().clamp(0.0, 1.0),
        )
    };
    let s_feas = feas(g).clamp(0.0, 1.0);
    let dist_term = if opts.invert_distance_term {
        -d_human
    } else {
        d_human
    };
    ScoreBreakdown {
        s_heat,
        d_human,
        s_feas,
        total: weights.w_heat * s_heat + weights.w_dist * dist_term + weights.w_feas * s_feas,
    }
}

/// The selected candidate with its breakdown and index into the input list.
#[derive(Debug, Clone)]
pub struct Selection<T> {
    pub index: usize,
    pub candidate: GraspCandidate<T>,
    pub breakdown: ScoreBreakdown,
}

/// Argmin of the total score; ties break on lower s_heat, then lower index.
pub fn select_grasp<T: Real>(
    candidates: &[GraspCandidate<T>],
    field: &AffordanceField<T>,
    cloud: &PointCloud<T>,
    weights: &ScoreWeights,
    feas: &dyn Fn(&GraspCandidate<T>) -> f64,
    opts: &ScoreOptions,
) -> Result<Selection<T>> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    weights.validate()?;
    let mut best: Option<(usize, ScoreBreakdown)> = None;
    for (i, g) in candidates.iter().enumerate() {
        let b = score_grasp(g, field, cloud, weights, feas, opts);
        let better = match &best {
            None => true,
            Some((_, cur)) => {
                b.total < cur.total || (b.total == cur.total && b.s_heat < cur.s_heat)
            }
        };
        if better {
            best = Some((i, b));
        }
    }
    let (index, breakdown) = best.unwrap();
    Ok(Selection {
        index,
        candidate: candidates[index].clone(),
        breakdown,
    })
}

/// Minimal rotation taking the axis from the selected grasp toward the
/// predicted human-grasp region onto `human_direction`; returns the
/// identity when the axis degenerates.
pub fn handover_orientation<T: Real>(
    selected: &GraspCandidate<T>,
    field: &AffordanceField<T>,
    cloud: &PointCloud<T>,
    human_direction: [T; 3],
) -> Result<Mat3<T>> {
    let centroid = field
        .label1_centroid(cloud)
        .ok_or(Error::NoHumanRegion)?;
    let axis = vec3::sub(centroid, selected.translation);
    match vec3::normalized(axis, real(1e-9)) {
        None => Ok(mat3::identity()),
        Some(v) => Ok(mat3::rotation_between(v, human_direction)),
    }
}

#[cfg(test)]
mod tests;
