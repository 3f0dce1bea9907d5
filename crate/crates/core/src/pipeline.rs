//! End-to-end affordance transfer: normalize, reason, align, match
//! descriptors, transfer the field, and select a task-compliant grasp.

use serde::{Deserialize, Serialize};

use crate::affordance::{AffordanceField, Database};
use crate::alignment::{align_query, AlignmentResult};
use crate::correspondence::{
    fit_functional_map, point_map_from_similarity, point_map_functional, similarity_matrix,
    sinkhorn_normalize, transfer_affordance, PointMap, SinkhornConfig,
};
use crate::error::{Error, Result};
use crate::geometry::{normalize_cloud, PointCloud, RigidTransform};
use crate::grasp::{
    feasibility_angular, handover_orientation, sample_grasps, select_grasp, SamplerParams,
    ScoreOptions, ScoreWeights, Selection,
};
use crate::linalg::{mat3::Mat3, vec3};
use crate::real::{real, Real};
use crate::reasoner::{
    localize_parts, match_parts, plan_task, PartMapping, ReasonerBackend, RegionLabeling,
    RuleBackend, TaskPlan, TaskRequest,
};
use crate::spectral::{
    basis_for_cloud, compute_hks, compute_wks, default_hks_times, default_wks_energies,
    xyz_descriptor, DescriptorKind, SpectralConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonerKind {
    Rule,
    Llm,
}

/// Full pipeline configuration; the defaults reproduce the reference
/// settings (200 eigenpairs, Sinkhorn 10 iterations at lambda 0.2, weights
/// 1.0 / 0.05 / 1.0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub descriptor: DescriptorKind,
    pub spectral: SpectralConfig,
    pub sinkhorn_enabled: bool,
    pub sinkhorn: SinkhornConfig,
    pub weights: ScoreWeights,
    pub invert_distance_term: bool,
    pub reasoner: ReasonerKind,
    /// Coarse regions along the principal axis.
    pub regions: usize,
    pub seed: u64,
    /// Run the canonical-alignment stage (normalization + part-axis).
    pub align: bool,
    /// Extract the point map through a functional map instead of direct
    /// descriptor nearest neighbors.
    pub use_functional_map: bool,
    /// Laplacian-commutativity regularizer weight for the functional map.
    pub functional_map_mu: f64,
    pub grasp_enabled: bool,
    pub num_candidates: usize,
    pub max_jaw_width: f64,
    /// Descriptor grid sizes.
    pub hks_times: usize,
    pub wks_energies: usize,
    /// Reference approach direction of the end effector (feasibility).
    pub ee_approach: [f64; 3],
    /// Direction from the robot base toward the human (handover).
    pub human_direction: [f64; 3],
    /// Clouds larger than this are voxel-downsampled before matching.
    pub downsample_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            descriptor: DescriptorKind::Xyz,
            spectral: SpectralConfig::default(),
            sinkhorn_enabled: false,
            sinkhorn: SinkhornConfig::default(),
            weights: ScoreWeights::default(),
            invert_distance_term: false,
            reasoner: ReasonerKind::Rule,
            regions: 3,
            seed: 0,
            align: true,
            use_functional_map: false,
            functional_map_mu: 1e-3,
            grasp_enabled: true,
            num_candidates: 64,
            max_jaw_width: 0.08,
            hks_times: 16,
            wks_energies: 100,
            ee_approach: [0.0, 0.0, 1.0],
            human_direction: [1.0, 0.0, 0.0],
            downsample_cap: 5000,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.spectral.validate()?;
        self.sinkhorn.validate()?;
        self.weights.validate()?;
        if self.regions == 0 {
            return Err(Error::Config("regions must be >= 1".into()));
        }
        if self.num_candidates == 0 {
            return Err(Error::Config("num_candidates must be >= 1".into()));
        }
        if !(self.max_jaw_width > 0.0) {
            return Err(Error::Config("max_jaw_width must be positive".into()));
        }
        Ok(())
    }
}

/// Everything the transfer produced, in the original query frame.
pub struct TransferOutput<T> {
    /// Per-point field on the full input query cloud.
    pub field: AffordanceField<T>,
    pub plan: TaskPlan,
    pub labeling: RegionLabeling<T>,
    pub mapping: PartMapping<T>,
    pub proxy_class: String,
    pub proxy_task: String,
    /// Normalization applied to the query before alignment.
    pub normalize_transform: RigidTransform<T>,
    pub alignment: Option<AlignmentResult<T>>,
    pub point_map: PointMap<T>,
    /// Selected grasp (in the original query frame) plus its breakdown and
    /// the handover rotation, when grasping is enabled.
    pub selection: Option<Selection<T>>,
    pub handover_rotation: Option<Mat3<T>>,
    pub warnings: Vec<String>,
}

/// Run the transfer pipeline. `proxy_override` forces a specific database
/// entry (used for cross-class evaluation); part mapping is then built
/// against that entry alone.
pub fn run_transfer<T: Real>(
    query: &PointCloud<T>,
    request: &TaskRequest,
    db: &Database<T>,
    cfg: &PipelineConfig,
    backend: &dyn ReasonerBackend,
    proxy_override: Option<usize>,
) -> Result<TransferOutput<T>> {
    cfg.validate()?;
    if query.len() < 4 {
        return Err(Error::DegenerateCloud(
            "query needs at least 4 points".into(),
        ));
    }
    if db.entries.is_empty() {
        return Err(Error::NoViableProxy);
    }
    let mut warnings = Vec::new();

    // 1. bring the query into a canonical frame; without the alignment
    // stage only center and scale (leaving the rotation untouched).
    let (canonical, norm_transform, near_isotropic) = if cfg.align {
        let n = normalize_cloud(query)?;
        (n.cloud, n.transform, n.near_isotropic)
    } else {
        let c = query.centroid();
        let centered: Vec<[T; 3]> = query.points.iter().map(|p| vec3::sub(*p, c)).collect();
        let extent = PointCloud::new(centered, "tmp").max_extent();
        let scale = T::one() / extent;
        let transform = RigidTransform {
            rotation: crate::linalg::mat3::identity(),
            translation: vec3::scale(c, -scale),
            scale,
        };
        (query.transformed(&transform), transform, false)
    };
    if near_isotropic {
        warnings.push("query is nearly isotropic; principal axis is unreliable".into());
    }

    // 2. reasoning: plan, coarse part labels, proxy choice + part mapping
    let plan = plan_task(request, backend)?;
    let labeling = localize_parts(&canonical, request, backend, cfg.regions)?;
    let mapping = match proxy_override {
        None => match_parts(request, &labeling, db, backend)?,
        Some(idx) => {
            if idx >= db.entries.len() {
                return Err(Error::Config(format!("proxy override {idx} out of range")));
            }
            let mut sub = Database::new();
            sub.entries.push(db.entries[idx].clone());
            let mut m = match_parts(request, &labeling, &sub, backend)?;
            m.proxy_index = idx;
            m
        }
    };
    let proxy = &db.entries[mapping.proxy_index];

    // 3. alignment into the proxy frame
    let (aligned_cloud, alignment) = if cfg.align {
        let a = align_query(&canonical, &mapping, proxy)?;
        (a.aligned_query.clone(), Some(a))
    } else {
        (canonical.clone(), None)
    };

    // 4. descriptors on (possibly downsampled) clouds
    let (query_reps, query_rep_of) = downsample(&aligned_cloud, cfg.downsample_cap);
    let (ref_reps, ref_rep_of) = downsample(&proxy.reference, cfg.downsample_cap);
    let ref_field_reps = restrict_field(&proxy.affordance, &ref_rep_indices(&ref_rep_of));

    let matched = match_descriptors(&query_reps, &ref_reps, cfg, &mut warnings)?;

    // 5. point map + transfer on the representative clouds
    let map = matched.point_map;
    let field_reps = transfer_affordance(&map, &restrict_field(&ref_field_reps, &matched.ref_kept))?;

    // 6. expand back to every input point
    let field = expand_field(
        &field_reps,
        &matched.query_kept,
        &query_reps,
        &query_rep_of,
        &aligned_cloud,
    )?;

    // 7. grasp selection in the original metric frame
    let (selection, handover_rotation) = if cfg.grasp_enabled {
        let params = SamplerParams {
            max_width: cfg.max_jaw_width,
            ..SamplerParams::default()
        };
        let candidates = sample_grasps(query, cfg.num_candidates, cfg.seed, &params)?;
        let ee = [
            real::<T>(cfg.ee_approach[0]),
            real(cfg.ee_approach[1]),
            real(cfg.ee_approach[2]),
        ];
        let ee = vec3::normalized(ee, T::epsilon())
            .ok_or_else(|| Error::Config("ee_approach must be nonzero".into()))?;
        let feas = move |g: &crate::grasp::GraspCandidate<T>| feasibility_angular(g, ee);
        let opts = ScoreOptions {
            invert_distance_term: cfg.invert_distance_term,
        };
        let sel = select_grasp(&candidates, &field, query, &cfg.weights, &feas, &opts)?;
        let human = [
            real::<T>(cfg.human_direction[0]),
            real(cfg.human_direction[1]),
            real(cfg.human_direction[2]),
        ];
        let human = vec3::normalized(human, T::epsilon())
            .ok_or_else(|| Error::Config("human_direction must be nonzero".into()))?;
        let rot = match handover_orientation(&sel.candidate, &field, query, human) {
            Ok(r) => Some(r),
            Err(Error::NoHumanRegion) => {
                warnings.push("no human-grasp region; handover orientation skipped".into());
                None
            }
            Err(e) => return Err(e),
        };
        (Some(sel), rot)
    } else {
        (None, None)
    };

    Ok(TransferOutput {
        field,
        plan,
        labeling,
        mapping,
        proxy_class: proxy.object_class.clone(),
        proxy_task: proxy.task.clone(),
        normalize_transform: norm_transform,
        alignment,
        point_map: map,
        selection,
        handover_rotation,
        warnings,
    })
}

/// Outcome of descriptor matching on representative clouds.
struct Matched<T> {
    point_map: PointMap<T>,
    /// Representative-cloud indices kept by the spectral stage (identity
    /// when the graph was connected).
    query_kept: Vec<usize>,
    ref_kept: Vec<usize>,
}

/// Standardize a descriptor matrix per dimension by its own statistics
/// (z-score per band). Raw spectral signatures scale with the cloud's size
/// and total mass, so the two clouds of a matching problem live on
/// different scales; per-cloud standardization puts corresponding
/// structures on comparable quantiles, keeps dissimilarities O(1) against
/// the Sinkhorn temperature, and is invariant to rigid motion.
fn standardize_descriptor<T: Real>(desc: &mut crate::spectral::Descriptor<T>) {
    let (n, d) = desc.values.dim();
    if n == 0 || d == 0 {
        return;
    }
    let inv_n = T::one() / T::from(n).unwrap();
    for col in 0..d {
        let mut mean = T::zero();
        for i in 0..n {
            mean += desc.values[[i, col]] * inv_n;
        }
        let mut var = T::zero();
        for i in 0..n {
            let dev = desc.values[[i, col]] - mean;
            var += dev * dev;
        }
        let std = (var * inv_n).sqrt();
        if !(std > T::zero()) {
            continue; // constant band carries no signal; leave it
        }
        let inv_std = T::one() / std;
        for i in 0..n {
            desc.values[[i, col]] = (desc.values[[i, col]] - mean) * inv_std;
        }
    }
}

fn match_descriptors<T: Real>(
    query: &PointCloud<T>,
    reference: &PointCloud<T>,
    cfg: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> Result<Matched<T>> {
    let identity = |n: usize| (0..n).collect::<Vec<usize>>();
    let (desc_q, desc_r, bases, query_kept, ref_kept) = match cfg.descriptor {
        DescriptorKind::Xyz => (
            xyz_descriptor(query),
            xyz_descriptor(reference),
            None,
            identity(query.len()),
            identity(reference.len()),
        ),
        DescriptorKind::Hks | DescriptorKind::Wks => {
            let (basis_r, kept_r) = basis_for_cloud(reference, &cfg.spectral)?;
            let (basis_q, kept_q) = basis_for_cloud(query, &cfg.spectral)?;
            if kept_q.is_some() || kept_r.is_some() {
                warnings.push("disconnected k-NN graph; dropped points take nearest labels".into());
            }
            let (dq, dr) = if cfg.descriptor == DescriptorKind::Hks {
                // shared time grid from the reference spectrum
                let times = default_hks_times(&basis_r, cfg.hks_times);
                (compute_hks(&basis_q, &times), compute_hks(&basis_r, &times))
            } else {
                let (energies, sigma) = default_wks_energies(&basis_r, cfg.wks_energies)?;
                (
                    compute_wks(&basis_q, &energies, sigma)?,
                    compute_wks(&basis_r, &energies, sigma)?,
                )
            };
            let q_kept = kept_q.unwrap_or_else(|| identity(query.len()));
            let r_kept = kept_r.unwrap_or_else(|| identity(reference.len()));
            (dq, dr, Some((basis_q, basis_r)), q_kept, r_kept)
        }
        DescriptorKind::External => {
            return Err(Error::Config(
                "external descriptors must be matched by the caller".into(),
            ));
        }
    };

    // Spectral signatures need per-cloud standardization; xyz coordinates
    // already live in the shared aligned frame and must not be re-centered.
    let (mut desc_q, mut desc_r) = (desc_q, desc_r);
    if matches!(cfg.descriptor, DescriptorKind::Hks | DescriptorKind::Wks) {
        standardize_descriptor(&mut desc_q);
        standardize_descriptor(&mut desc_r);
    }

    let point_map = if cfg.use_functional_map {
        let (basis_q, basis_r) = bases.ok_or_else(|| {
            Error::Config("functional-map matching needs spectral descriptors".into())
        })?;
        let fit = fit_functional_map(&basis_q, &basis_r, &desc_q, &desc_r, real(cfg.functional_map_mu))?;
        if fit.rank_deficient {
            warnings.push("functional map fitted with rank-deficient coefficients".into());
        }
        point_map_functional(&basis_q, &basis_r, &fit.map)?
    } else {
        let mut s = similarity_matrix(&desc_q, &desc_r)?;
        if cfg.sinkhorn_enabled {
            sharpen_similarity(&mut s, real(cfg.sinkhorn.lambda));
            point_map_from_similarity(&sinkhorn_normalize(&s, &cfg.sinkhorn)?)
        } else {
            point_map_from_similarity(&s)
        }
    };
    Ok(Matched {
        point_map,
        query_kept,
        ref_kept,
    })
}

/// Target log-odds between each row's best and second-best entry after
/// the temperature is applied.
const GAP_SHARPNESS: f64 = 7.0;

/// Rescale the similarity so the mean per-row gap between the best and
/// second-best entry is `GAP_SHARPNESS * lambda`. Entropic normalization
/// at a fixed temperature needs the matcher's decision gaps at the
/// temperature's scale; a uniform positive rescaling changes no row
/// argmax.
fn sharpen_similarity<T: Real>(s: &mut ndarray::Array2<T>, lambda: T) {
    let (n, m) = s.dim();
    if n == 0 || m < 2 {
        return;
    }
    let mut gap_sum = T::zero();
    let mut gap_count = 0usize;
    for row in s.rows() {
        let mut best = T::neg_infinity();
        let mut second = T::neg_infinity();
        for &v in row {
            if v > best {
                second = best;
                best = v;
            } else if v > second {
                second = v;
            }
        }
        let gap = best - second;
        if gap.is_finite() && gap > T::zero() {
            gap_sum += gap;
            gap_count += 1;
        }
    }
    if gap_count == 0 {
        return; // all rows tied; nothing to sharpen
    }
    let mean_gap = gap_sum / T::from(gap_count).unwrap();
    let scale = real::<T>(GAP_SHARPNESS) * lambda / mean_gap;
    s.mapv_inplace(|v| v * scale);
}

/// Voxel-grid downsampling to at most `cap` representatives; returns the
/// representative cloud and, per input point, its representative slot.
fn downsample<T: Real>(cloud: &PointCloud<T>, cap: usize) -> (PointCloud<T>, Vec<usize>) {
    let n = cloud.len();
    if n <= cap {
        return (cloud.clone(), (0..n).collect());
    }
    let (lo, hi) = cloud.bbox();
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(hi[2] - lo[2]);
    let mut h = extent.to_f64().unwrap() / (cap as f64).cbrt();
    loop {
        let mut cells: std::collections::BTreeMap<(i64, i64, i64), usize> =
            std::collections::BTreeMap::new();
        let mut rep_indices: Vec<usize> = Vec::new();
        let mut rep_of: Vec<usize> = Vec::with_capacity(n);
        for (i, p) in cloud.points.iter().enumerate() {
            let key = (
                ((p[0] - lo[0]).to_f64().unwrap() / h).floor() as i64,
                ((p[1] - lo[1]).to_f64().unwrap() / h).floor() as i64,
                ((p[2] - lo[2]).to_f64().unwrap() / h).floor() as i64,
            );
            let slot = *cells.entry(key).or_insert_with(|| {
                rep_indices.push(i);
                rep_indices.len() - 1
            });
            rep_of.push(slot);
        }
        if rep_indices.len() <= cap {
            log::info!(
                "downsampled {} points to {} representatives (cell {h:.4})",
                n,
                rep_indices.len()
            );
            return (cloud.select(&rep_indices), rep_of);
        }
        h *= 1.3;
    }
}

fn ref_rep_indices(rep_of: &[usize]) -> Vec<usize> {
    // slots are assigned in first-point order, so the representative field
    // restriction is by first occurrence
    let n_reps = rep_of.iter().copied().max().map_or(0, |m| m + 1);
    let mut firsts = vec![usize::MAX; n_reps];
    for (i, &slot) in rep_of.iter().enumerate() {
        if firsts[slot] == usize::MAX {
            firsts[slot] = i;
        }
    }
    firsts
}

/// Field restricted to a subset of point indices.
fn restrict_field<T: Real>(field: &AffordanceField<T>, indices: &[usize]) -> AffordanceField<T> {
    AffordanceField {
        heat: indices.iter().map(|&i| field.heat[i]).collect(),
        threshold: field.threshold,
        labels: indices.iter().map(|&i| field.labels[i]).collect(),
    }
}

/// Expand a field on kept representatives back onto every input point:
/// each point takes its representative's value; dropped representatives
/// (disconnected components) take their nearest kept representative.
fn expand_field<T: Real>(
    field_kept: &AffordanceField<T>,
    kept: &[usize],
    reps: &PointCloud<T>,
    rep_of: &[usize],
    _full_cloud: &PointCloud<T>,
) -> Result<AffordanceField<T>> {
    let n_reps = reps.len();
    // per representative: heat (direct or from nearest kept rep)
    let mut rep_heat = vec![T::zero(); n_reps];
    let mut covered = vec![false; n_reps];
    for (slot_in_kept, &rep) in kept.iter().enumerate() {
        rep_heat[rep] = field_kept.heat[slot_in_kept];
        covered[rep] = true;
    }
    if kept.len() < n_reps {
        let kept_cloud = reps.select(kept);
        for rep in 0..n_reps {
            if !covered[rep] {
                let nn = kept_cloud.nearest(reps.points[rep]);
                rep_heat[rep] = field_kept.heat[nn];
            }
        }
    }
    let heat: Vec<T> = rep_of.iter().map(|&slot| rep_heat[slot]).collect();
    crate::affordance::binarize(&heat, field_kept.threshold)
}

/// Convenience: backend instance for a configured reasoner kind.
pub fn make_backend(kind: ReasonerKind) -> Result<Box<dyn ReasonerBackend>> {
    match kind {
        ReasonerKind::Rule => Ok(Box::new(RuleBackend)),
        ReasonerKind::Llm => Ok(Box::new(crate::reasoner::LlmBackend::from_env()?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.spectral.num_eigenpairs, 200);
        assert_eq!(cfg.sinkhorn.iterations, 10);
        assert_eq!(cfg.sinkhorn.lambda, 0.2);
        assert_eq!(cfg.weights.w_heat, 1.0);
        assert_eq!(cfg.weights.w_dist, 0.05);
        assert_eq!(cfg.weights.w_feas, 1.0);
        assert!(!cfg.sinkhorn_enabled);
        assert!(cfg.align);
        assert!(!cfg.invert_distance_term);
        assert_eq!(cfg.descriptor, DescriptorKind::Xyz);
    }

    #[test]
    fn config_json_roundtrip_is_exact() {
        let mut cfg = PipelineConfig::default();
        cfg.seed = 1234;
        cfg.weights.w_dist = 0.125;
        let text = serde_json::to_string(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"regions": 5}"#).unwrap();
        assert_eq!(cfg.regions, 5);
        assert_eq!(cfg.spectral.num_eigenpairs, 200);
    }

    #[test]
    fn downsample_respects_cap_and_covers_all_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let points: Vec<[f64; 3]> = (0..500)
            .map(|_| {
                [
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                ]
            })
            .collect();
        let cloud = PointCloud::new(points, "x");
        let (reps, rep_of) = downsample(&cloud, 100);
        assert!(reps.len() <= 100);
        assert_eq!(rep_of.len(), 500);
        for (i, &slot) in rep_of.iter().enumerate() {
            assert!(slot < reps.len());
            // the representative is close to the point (same voxel)
            assert!(vec3::dist(cloud.points[i], reps.points[slot]) < 0.6);
        }
    }
}
