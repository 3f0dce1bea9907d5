//! Exemplar database of object-task pairs: per-point affordance heatmaps
//! with binary grasp/free labels, annotated subparts, and JSON-manifest
//! persistence with PLY assets.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_cloud, PointCloud};
use crate::io::ply;
use crate::linalg::vec3;
use crate::real::{real, Real};

/// Per-point scalar heatmap in [0,1] plus labels derived as `heat >= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffordanceField<T> {
    pub heat: Vec<T>,
    pub threshold: T,
    pub labels: Vec<bool>,
}

impl<T: Real> AffordanceField<T> {
    pub fn len(&self) -> usize {
        self.heat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heat.is_empty()
    }

    pub fn label1_indices(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i]).collect()
    }

    pub fn label1_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Centroid of the label-1 points of `cloud`, if any.
    pub fn label1_centroid(&self, cloud: &PointCloud<T>) -> Option<[T; 3]> {
        let idx = self.label1_indices();
        if idx.is_empty() {
            return None;
        }
        let mut c = [T::zero(); 3];
        for &i in &idx {
            c = vec3::add(c, cloud.points[i]);
        }
        Some(vec3::scale(c, T::one() / T::from(idx.len()).unwrap()))
    }
}

/// Derive binary labels from a heat field: label = heat >= threshold.
pub fn binarize<T: Real>(heat: &[T], threshold: T) -> Result<AffordanceField<T>> {
    if !(threshold > T::zero() && threshold < T::one()) {
        return Err(Error::Config("binarization threshold must be in (0,1)".into()));
    }
    let labels = heat.iter().map(|&h| h >= threshold).collect();
    Ok(AffordanceField {
        heat: heat.to_vec(),
        threshold,
        labels,
    })
}

/// Pointwise mean of per-user contact fields, clamped to [0,1].
///
/// Addends are summed in sorted order so the result is exactly invariant
/// to the user ordering.
pub fn average_contacts<T: Real>(per_user: &[Vec<T>]) -> Result<Vec<T>> {
    let Some(first) = per_user.first() else {
        return Err(Error::Config("need at least one contact field".into()));
    };
    let n = first.len();
    for f in per_user {
        if f.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: f.len(),
            });
        }
    }
    let inv = T::one() / T::from(per_user.len()).unwrap();
    let mut out = Vec::with_capacity(n);
    let mut column: Vec<T> = Vec::with_capacity(per_user.len());
    for i in 0..n {
        column.clear();
        column.extend(per_user.iter().map(|f| f[i]));
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite heat"));
        let sum = column.iter().fold(T::zero(), |acc, &v| acc + v);
        out.push((sum * inv).max(T::zero()).min(T::one()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubpartRole {
    /// Where the human grasps (the affordance region lives here).
    GraspSide,
    /// The working end that must stay free.
    FunctionSide,
    Neutral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subpart<T> {
    pub name: String,
    pub center: [T; 3],
    pub role: SubpartRole,
}

/// One exemplar: a reference cloud in canonical orientation, named
/// subparts, and its affordance field.
#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseEntry<T> {
    pub object_class: String,
    pub task: String,
    pub reference: PointCloud<T>,
    pub subparts: Vec<Subpart<T>>,
    pub affordance: AffordanceField<T>,
}

impl<T: Real> DatabaseEntry<T> {
    /// Structural validation; returns non-fatal warnings (e.g. the label-1
    /// region splitting into multiple connected components).
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.object_class.is_empty() || self.task.is_empty() {
            return Err(Error::Manifest("object_class and task must be non-empty".into()));
        }
        if self.subparts.is_empty() {
            return Err(Error::Manifest(format!(
                "entry ({}, {}): needs at least one subpart",
                self.object_class, self.task
            )));
        }
        if self.affordance.len() != self.reference.len() {
            return Err(Error::LengthMismatch {
                expected: self.reference.len(),
                got: self.affordance.len(),
            });
        }
        for h in &self.affordance.heat {
            if !(*h >= T::zero() && *h <= T::one()) {
                return Err(Error::Manifest("heat values must lie in [0,1]".into()));
            }
        }

        // canonical orientation: normalization is a fixed point within 1e-6
        let normalized = normalize_cloud(&self.reference)?;
        let tol = real::<T>(1e-6);
        let drift = self
            .reference
            .points
            .iter()
            .zip(&normalized.cloud.points)
            .map(|(p, q)| vec3::dist(*p, *q))
            .fold(T::zero(), T::max);
        if drift > tol {
            return Err(Error::Manifest(format!(
                "entry ({}, {}): reference cloud is not in canonical orientation \
                 (normalization moves points by up to {:.3e})",
                self.object_class,
                self.task,
                drift.to_f64().unwrap_or(f64::NAN)
            )));
        }

        // subpart centers within 1.5x the reference bounding box
        let (lo, hi) = self.reference.bbox();
        let center = vec3::scale(vec3::add(lo, hi), real(0.5));
        let half = vec3::scale(vec3::sub(hi, lo), real(0.75)); // 1.5x half-extent
        for sp in &self.subparts {
            for a in 0..3 {
                if (sp.center[a] - center[a]).abs() > half[a].max(real(1e-9)) {
                    return Err(Error::Manifest(format!(
                        "subpart '{}' center outside 1.5x bounding box",
                        sp.name
                    )));
                }
            }
        }

        if self.label1_component_count(8) > 1 {
            warnings.push(format!(
                "entry ({}, {}): label-1 region is not contiguous",
                self.object_class, self.task
            ));
        }
        Ok(warnings)
    }

    /// Connected components of the label-1 region, on the subgraph of the
    /// full cloud's k-NN graph induced by the label-1 points.
    fn label1_component_count(&self, knn: usize) -> usize {
        let idx = self.affordance.label1_indices();
        if idx.is_empty() {
            return 0;
        }
        let n = self.reference.len();
        let k = knn.min(n - 1).max(1);
        let mut slot = vec![usize::MAX; n];
        for (s, &i) in idx.iter().enumerate() {
            slot[i] = s;
        }
        let m = idx.len();
        let mut adj = vec![Vec::new(); m];
        let mut scratch: Vec<(T, usize)> = Vec::new();
        for &i in &idx {
            scratch.clear();
            for j in 0..n {
                if i != j {
                    scratch.push((vec3::dist_sq(self.reference.points[i], self.reference.points[j]), j));
                }
            }
            scratch.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for &(_, j) in scratch.iter().take(k) {
                if slot[j] != usize::MAX {
                    adj[slot[i]].push(slot[j]);
                    adj[slot[j]].push(slot[i]);
                }
            }
        }
        let mut seen = vec![false; m];
        let mut components = 0;
        let mut stack = Vec::new();
        for s in 0..m {
            if seen[s] {
                continue;
            }
            components += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        components
    }
}

pub const DB_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default)]
pub struct Database<T> {
    pub entries: Vec<DatabaseEntry<T>>,
    pub version: u32,
}

impl<T: Real> Database<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            version: DB_FORMAT_VERSION,
        }
    }

    /// Insert an entry, rejecting duplicate (object_class, task) pairs.
    pub fn insert(&mut self, entry: DatabaseEntry<T>) -> Result<()> {
        if self.lookup(&entry.object_class, &entry.task).is_some() {
            return Err(Error::DuplicateEntry {
                object_class: entry.object_class.clone(),
                task: entry.task.clone(),
            });
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn lookup(&self, object_class: &str, task: &str) -> Option<&DatabaseEntry<T>> {
        self.entries
            .iter()
            .find(|e| e.object_class == object_class && e.task == task)
    }

    pub fn lookup_index(&self, object_class: &str, task: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.object_class == object_class && e.task == task)
    }

    /// Union of subpart names across entries.
    pub fn part_vocabulary(&self) -> BTreeSet<String> {
        self.entries
            .iter()
            .flat_map(|e| e.subparts.iter().map(|s| s.name.clone()))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// persistence: JSON manifest + PLY assets
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ManifestSubpart {
    name: String,
    center: [f64; 3],
    role: SubpartRole,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    object_class: String,
    task: String,
    cloud: String,
    heat: String,
    threshold: f64,
    subparts: Vec<ManifestSubpart>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    entries: Vec<ManifestEntry>,
}

fn asset_stem(entry: &DatabaseEntry<impl Real>) -> String {
    let sanitize = |s: &str| {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect::<String>()
    };
    format!("{}__{}", sanitize(&entry.object_class), sanitize(&entry.task))
}

/// Write the database: `manifest.json` plus one geometry PLY and one heat
/// PLY (heat quantized into the red channel) per entry, in `dir`.
pub fn save_database<T: Real>(db: &Database<T>, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest = Manifest {
        version: db.version,
        entries: Vec::new(),
    };
    for entry in &db.entries {
        let stem = asset_stem(entry);
        let cloud_file = format!("{stem}.ply");
        let heat_file = format!("{stem}.heat.ply");
        ply::write_ply(
            dir.join(&cloud_file),
            &entry.reference,
            None,
            ply::PlyEncoding::BinaryLittleEndian,
        )?;
        let colors: Vec<[u8; 3]> = entry
            .affordance
            .heat
            .iter()
            .map(|&h| [ply::heat_to_red(h.to_f64().unwrap()), 0, 0])
            .collect();
        ply::write_ply(
            dir.join(&heat_file),
            &entry.reference,
            Some(&colors),
            ply::PlyEncoding::BinaryLittleEndian,
        )?;
        manifest.entries.push(ManifestEntry {
            object_class: entry.object_class.clone(),
            task: entry.task.clone(),
            cloud: cloud_file,
            heat: heat_file,
            threshold: entry.affordance.threshold.to_f64().unwrap(),
            subparts: entry
                .subparts
                .iter()
                .map(|s| ManifestSubpart {
                    name: s.name.clone(),
                    center: [
                        s.center[0].to_f64().unwrap(),
                        s.center[1].to_f64().unwrap(),
                        s.center[2].to_f64().unwrap(),
                    ],
                    role: s.role,
                })
                .collect(),
        });
    }
    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Manifest(e.to_string()))?;
    fs::write(&manifest_path, json)?;
    Ok(manifest_path)
}

/// Load a database from its manifest path (or a directory containing
/// `manifest.json`).
pub fn load_database<T: Real>(path: impl AsRef<Path>) -> Result<Database<T>> {
    let path = path.as_ref();
    let manifest_path = if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&manifest_path)
        .map_err(|_| Error::MissingAsset(manifest_path.clone()))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
        Error::Manifest(format!(
            "{}:{}:{}: {}",
            manifest_path.display(),
            e.line(),
            e.column(),
            e
        ))
    })?;
    if manifest.version != DB_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: manifest.version,
            supported: DB_FORMAT_VERSION,
        });
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut db = Database::new();
    for (idx, me) in manifest.entries.iter().enumerate() {
        let cloud = ply::read_ply::<T>(base.join(&me.cloud))?.cloud;
        let heat_ply = ply::read_ply::<T>(base.join(&me.heat))?;
        let colors = heat_ply.colors.ok_or_else(|| {
            Error::Manifest(format!(
                "entry {idx}: heat file {} lacks a red channel",
                me.heat
            ))
        })?;
        if colors.len() != cloud.len() {
            return Err(Error::LengthMismatch {
                expected: cloud.len(),
                got: colors.len(),
            });
        }
        let heat: Vec<T> = colors
            .iter()
            .map(|c| real::<T>(ply::red_to_heat(c[0])))
            .collect();
        let affordance = binarize(&heat, real(me.threshold))?;
        let entry = DatabaseEntry {
            object_class: me.object_class.clone(),
            task: me.task.clone(),
            reference: cloud,
            subparts: me
                .subparts
                .iter()
                .map(|s| Subpart {
                    name: s.name.clone(),
                    center: [real(s.center[0]), real(s.center[1]), real(s.center[2])],
                    role: s.role,
                })
                .collect(),
            affordance,
        };
        for w in entry.validate()? {
            log::warn!("{w}");
        }
        db.insert(entry)?;
    }
    Ok(db)
}
