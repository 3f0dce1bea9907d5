//! High-level reasoning: task planning (which part to grasp, which to keep
//! free), coarse region labeling along the principal axis, and proxy
//! selection with part-level mapping — behind one backend interface with a
//! deterministic rule-table implementation and an LLM-service client.

pub mod llm;
pub mod rule;

use std::collections::BTreeMap;

use crate::affordance::{Database, SubpartRole};
use crate::error::{Error, Result};
use crate::geometry::{pca_axes, PointCloud};
use crate::linalg::vec3;
use crate::real::{real, Real};
pub use llm::{llm_query, FieldKind, FieldSpec, LlmBackend, LlmTransport, MockTransport, ResponseSchema};
pub use rule::RuleBackend;

/// The object/task request driving a transfer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskRequest {
    pub object_name: String,
    pub task: String,
    /// Optional free-form description of the intended use.
    pub free_text: Option<String>,
}

impl TaskRequest {
    pub fn new(object_name: impl Into<String>, task: impl Into<String>) -> Result<Self> {
        let object_name = object_name.into();
        let task = task.into();
        if object_name.trim().is_empty() || task.trim().is_empty() {
            return Err(Error::Config("object_name and task must be non-empty".into()));
        }
        Ok(Self {
            object_name,
            task,
            free_text: None,
        })
    }

    pub fn with_free_text(mut self, text: impl Into<String>) -> Self {
        self.free_text = Some(text.into());
        self
    }
}

/// Which part the robot grasps and which stays free for the human.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskPlan {
    pub grasp_part: String,
    pub free_part: String,
    pub rationale: String,
}

/// One coarse region along the principal axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Region<T> {
    pub index: usize,
    pub center: [T; 3],
    pub label: String,
    pub point_count: usize,
}

/// Ordered regions along the principal axis with semantic labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionLabeling<T> {
    pub regions: Vec<Region<T>>,
}

impl<T: Real> RegionLabeling<T> {
    pub fn labels(&self) -> Vec<String> {
        self.regions.iter().map(|r| r.label.clone()).collect()
    }

    pub fn center_of(&self, label: &str) -> Option<[T; 3]> {
        self.regions
            .iter()
            .find(|r| r.label == label)
            .map(|r| r.center)
    }
}

/// Proxy entry selection plus query-part to proxy-subpart pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PartMapping<T> {
    /// Index into the database entries.
    pub proxy_index: usize,
    /// (query part name, proxy subpart name), function side first.
    pub pairs: Vec<(String, String)>,
    pub query_part_centers: BTreeMap<String, [T; 3]>,
}

/// Scalar-free slab summary handed to reasoner backends.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabSummary {
    pub index: usize,
    pub center: [f64; 3],
    pub point_count: usize,
    pub total_points: usize,
    /// Span along the principal axis, relative to the full extent.
    pub span: [f64; 2],
}

/// Scalar-free database entry summary handed to reasoner backends.
#[derive(Debug, Clone, PartialEq)]
pub struct EntrySummary {
    pub object_class: String,
    pub task: String,
    pub subparts: Vec<(String, SubpartRole)>,
}

/// Backend decision: chosen entry plus part pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyChoice {
    pub entry_index: usize,
    pub pairs: Vec<(String, String)>,
}

/// A reasoning backend answers the three semantic questions of the
/// pipeline. Implementations must be deterministic given their inputs
/// (the rule table) or external (the LLM client).
pub trait ReasonerBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn plan_task(&self, request: &TaskRequest) -> Result<TaskPlan>;

    /// One label per slab, drawn from the object's part vocabulary.
    fn label_regions(&self, request: &TaskRequest, slabs: &[SlabSummary]) -> Result<Vec<String>>;

    fn choose_proxy(
        &self,
        request: &TaskRequest,
        labels: &[String],
        entries: &[EntrySummary],
    ) -> Result<ProxyChoice>;
}

/// Run a backend call with rule-table fallback on LLM unavailability or
/// schema failure.
fn with_fallback<R>(
    backend: &dyn ReasonerBackend,
    call: impl Fn(&dyn ReasonerBackend) -> Result<R>,
) -> Result<R> {
    match call(backend) {
        Err(Error::BackendUnavailable(msg)) => {
            log::warn!(
                "reasoner backend '{}' unavailable ({msg}); falling back to rule table",
                backend.name()
            );
            call(&RuleBackend)
        }
        Err(Error::SchemaViolation(msg)) => {
            log::warn!(
                "reasoner backend '{}' returned malformed output ({msg}); \
                 falling back to rule table",
                backend.name()
            );
            call(&RuleBackend)
        }
        other => other,
    }
}

/// Decide which part to grasp and which to leave free.
pub fn plan_task(request: &TaskRequest, backend: &dyn ReasonerBackend) -> Result<TaskPlan> {
    let plan = with_fallback(backend, |b| b.plan_task(request))?;
    if plan.grasp_part == plan.free_part {
        return Err(Error::SchemaViolation(
            "plan has identical grasp and free parts".into(),
        ));
    }
    Ok(plan)
}

/// Split the cloud into `regions` contiguous equal-length slabs along its
/// first PCA axis and label each slab semantically.
pub fn localize_parts<T: Real>(
    cloud: &PointCloud<T>,
    request: &TaskRequest,
    backend: &dyn ReasonerBackend,
    regions: usize,
) -> Result<RegionLabeling<T>> {
    if regions == 0 {
        return Err(Error::Config("region count must be >= 1".into()));
    }
    let pca = pca_axes(cloud)?;
    let axis = pca.axes[0];

    let coords: Vec<T> = cloud
        .points
        .iter()
        .map(|p| vec3::dot(vec3::sub(*p, pca.centroid), axis))
        .collect();
    let t_min = coords.iter().copied().fold(T::infinity(), T::min);
    let t_max = coords.iter().copied().fold(T::neg_infinity(), T::max);
    let span = (t_max - t_min).max(T::min_positive_value());
    let r_t = T::from(regions).unwrap();

    let mut slab_of = vec![0usize; cloud.len()];
    let mut counts = vec![0usize; regions];
    let mut sums = vec![[T::zero(); 3]; regions];
    for (i, &t) in coords.iter().enumerate() {
        let f = ((t - t_min) / span * r_t).to_f64().unwrap();
        let s = (f.floor() as usize).min(regions - 1);
        slab_of[i] = s;
        counts[s] += 1;
        sums[s] = vec3::add(sums[s], cloud.points[i]);
    }

    let mut centers = Vec::with_capacity(regions);
    for s in 0..regions {
        if counts[s] > 0 {
            centers.push(vec3::scale(sums[s], T::one() / T::from(counts[s]).unwrap()));
        } else {
            // geometric slab midpoint for empty slabs
            let mid = t_min + span * (real::<T>(s as f64) + real(0.5)) / r_t;
            centers.push(vec3::add(pca.centroid, vec3::scale(axis, mid)));
        }
    }

    let total = cloud.len();
    let summaries: Vec<SlabSummary> = (0..regions)
        .map(|s| SlabSummary {
            index: s,
            center: [
                centers[s][0].to_f64().unwrap(),
                centers[s][1].to_f64().unwrap(),
                centers[s][2].to_f64().unwrap(),
            ],
            point_count: counts[s],
            total_points: total,
            span: [s as f64 / regions as f64, (s + 1) as f64 / regions as f64],
        })
        .collect();

    let labels = with_fallback(backend, |b| b.label_regions(request, &summaries))?;
    if labels.len() != regions || labels.iter().any(|l| l.trim().is_empty()) {
        return Err(Error::SchemaViolation(format!(
            "expected {regions} non-empty region labels, got {:?}",
            labels
        )));
    }

    Ok(RegionLabeling {
        regions: (0..regions)
            .map(|s| Region {
                index: s,
                center: centers[s],
                label: labels[s].clone(),
                point_count: counts[s],
            })
            .collect(),
    })
}

/// Choose the proxy database entry and map query parts onto its subparts.
pub fn match_parts<T: Real>(
    request: &TaskRequest,
    labeling: &RegionLabeling<T>,
    db: &Database<T>,
    backend: &dyn ReasonerBackend,
) -> Result<PartMapping<T>> {
    if db.entries.is_empty() {
        return Err(Error::NoViableProxy);
    }
    let entries: Vec<EntrySummary> = db
        .entries
        .iter()
        .map(|e| EntrySummary {
            object_class: e.object_class.clone(),
            task: e.task.clone(),
            subparts: e.subparts.iter().map(|s| (s.name.clone(), s.role)).collect(),
        })
        .collect();
    let labels = labeling.labels();

    let choice = with_fallback(backend, |b| b.choose_proxy(request, &labels, &entries))?;
    if choice.entry_index >= db.entries.len() {
        return Err(Error::SchemaViolation(format!(
            "proxy index {} out of range",
            choice.entry_index
        )));
    }
    let proxy = &db.entries[choice.entry_index];

    // schema guarantee: proxy subpart names must exist; query parts must be
    // labeled regions with centers
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut centers = BTreeMap::new();
    for (q, p) in &choice.pairs {
        let Some(sub) = proxy.subparts.iter().find(|s| &s.name == p) else {
            return Err(Error::SchemaViolation(format!(
                "pair references unknown proxy subpart '{p}'"
            )));
        };
        let Some(center) = labeling.center_of(q) else {
            continue; // query label without a region; drop the pair
        };
        if pairs.iter().any(|(a, b)| a == q || b == &sub.name) {
            continue; // one pair per part on either side
        }
        pairs.push((q.clone(), sub.name.clone()));
        centers.insert(q.clone(), center);
    }
    if pairs.is_empty() {
        return Err(Error::NoMappedCenters);
    }
    // the grasp-relevant pair (proxy grasp side) must be present
    let grasp_ok = pairs.iter().any(|(_, p)| {
        proxy
            .subparts
            .iter()
            .any(|s| &s.name == p && s.role == SubpartRole::GraspSide)
    });
    if !grasp_ok {
        return Err(Error::SchemaViolation(
            "part mapping lacks the grasp-side pair".into(),
        ));
    }

    // function side first, then grasp side, then neutral; stable by name
    let role_of = |name: &str| {
        proxy
            .subparts
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.role)
    };
    let role_rank = |name: &str| match role_of(name) {
        Some(SubpartRole::FunctionSide) => 0,
        Some(SubpartRole::GraspSide) => 1,
        Some(SubpartRole::Neutral) => 2,
        None => 3,
    };
    pairs.sort_by(|a, b| role_rank(&a.1).cmp(&role_rank(&b.1)).then(a.1.cmp(&b.1)));

    // Anchor the grasp-side and function-side pairs at the outermost
    // regions along the axis: end slabs subtend comparable spans on both
    // shapes, which is what makes the part-center axes alignable. The
    // semantic pair names are unchanged.
    if labeling.regions.len() >= 2 {
        let first = &labeling.regions[0];
        let last = &labeling.regions[labeling.regions.len() - 1];
        let grasp_pair = pairs
            .iter()
            .find(|(_, p)| role_of(p) == Some(SubpartRole::GraspSide))
            .cloned();
        if let Some((q_grasp, _)) = grasp_pair {
            let grasp_is_first = first.label == q_grasp;
            let grasp_is_last = last.label == q_grasp;
            if grasp_is_first || grasp_is_last {
                let (grasp_region, functional_region) =
                    if grasp_is_first { (first, last) } else { (last, first) };
                centers.insert(q_grasp.clone(), grasp_region.center);
                if let Some((q_fn, _)) = pairs
                    .iter()
                    .find(|(_, p)| role_of(p) == Some(SubpartRole::FunctionSide))
                {
                    centers.insert(q_fn.clone(), functional_region.center);
                }
            }
        }
    }

    Ok(PartMapping {
        proxy_index: choice.entry_index,
        pairs,
        query_part_centers: centers,
    })
}
