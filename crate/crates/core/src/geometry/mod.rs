//! Point-cloud representation, rigid transforms, canonical normalization,
//! PCA axis extraction, and partial-view / random-rotation generation.

mod hull;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dense, mat3, mat3::Mat3, vec3};
use crate::real::{real, Real};

/// Ordered set of 3D points (meters) with optional unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    pub points: Vec<[T; 3]>,
    pub normals: Option<Vec<[T; 3]>>,
    pub source_id: String,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<[T; 3]>, source_id: impl Into<String>) -> Self {
        Self {
            points,
            normals: None,
            source_id: source_id.into(),
        }
    }

    /// Attach normals, validating cardinality and unit norm (1e-6).
    pub fn with_normals(mut self, normals: Vec<[T; 3]>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                expected: self.points.len(),
                got: normals.len(),
            });
        }
        let tol = real::<T>(1e-6);
        for (i, n) in normals.iter().enumerate() {
            if (vec3::norm(*n) - T::one()).abs() > tol {
                return Err(Error::DegenerateCloud(format!(
                    "normal {i} is not unit length"
                )));
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> [T; 3] {
        let mut c = [T::zero(); 3];
        for p in &self.points {
            c = vec3::add(c, *p);
        }
        vec3::scale(c, T::one() / T::from(self.points.len()).unwrap())
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bbox(&self) -> ([T; 3], [T; 3]) {
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        for p in &self.points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Largest bounding-box side in the current frame.
    pub fn max_extent(&self) -> T {
        let (lo, hi) = self.bbox();
        (hi[0] - lo[0]).max(hi[1] - lo[1]).max(hi[2] - lo[2])
    }

    /// Bounding sphere centered at the bbox center.
    pub fn bounding_sphere(&self) -> ([T; 3], T) {
        let (lo, hi) = self.bbox();
        let center = vec3::scale(vec3::add(lo, hi), real(0.5));
        let radius = self
            .points
            .iter()
            .map(|p| vec3::dist(*p, center))
            .fold(T::zero(), T::max);
        (center, radius)
    }

    /// Apply a rigid transform to points (and rotate normals, if present).
    pub fn transformed(&self, t: &RigidTransform<T>) -> PointCloud<T> {
        let points = self.points.iter().map(|p| t.apply(*p)).collect();
        let normals = self
            .normals
            .as_ref()
            .map(|ns| ns.iter().map(|n| mat3::matvec(&t.rotation, *n)).collect());
        PointCloud {
            points,
            normals,
            source_id: self.source_id.clone(),
        }
    }

    /// Subset by point indices, keeping normals aligned.
    pub fn select(&self, indices: &[usize]) -> PointCloud<T> {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| indices.iter().map(|&i| ns[i]).collect()),
            source_id: self.source_id.clone(),
        }
    }

    /// Index of the nearest point to `q` (brute force; desk-scale clouds).
    pub fn nearest(&self, q: [T; 3]) -> usize {
        let mut best = 0;
        let mut best_d = T::infinity();
        for (i, p) in self.points.iter().enumerate() {
            let d = vec3::dist_sq(*p, q);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Similarity transform p -> scale * R p + t with right-handed rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform<T> {
    pub rotation: Mat3<T>,
    pub translation: [T; 3],
    pub scale: T,
}

impl<T: Real> RigidTransform<T> {
    pub fn identity() -> Self {
        Self {
            rotation: mat3::identity(),
            translation: [T::zero(); 3],
            scale: T::one(),
        }
    }

    /// Validated constructor: rotation orthonormal with det +1 (1e-9),
    /// positive scale.
    pub fn new(rotation: Mat3<T>, translation: [T; 3], scale: T) -> Result<Self> {
        let tol = real::<T>(1e-9);
        if mat3::orthonormality_defect(&rotation) > tol {
            return Err(Error::Config("rotation is not orthonormal".into()));
        }
        if (mat3::det(&rotation) - T::one()).abs() > tol {
            return Err(Error::Config("rotation determinant is not +1".into()));
        }
        if scale <= T::zero() {
            return Err(Error::Config("scale must be positive".into()));
        }
        Ok(Self {
            rotation,
            translation,
            scale,
        })
    }

    #[inline]
    pub fn apply(&self, p: [T; 3]) -> [T; 3] {
        vec3::add(
            vec3::scale(mat3::matvec(&self.rotation, p), self.scale),
            self.translation,
        )
    }

    /// self ∘ other (apply `other` first).
    pub fn compose(&self, other: &RigidTransform<T>) -> RigidTransform<T> {
        RigidTransform {
            rotation: mat3::matmul(&self.rotation, &other.rotation),
            translation: vec3::add(
                vec3::scale(mat3::matvec(&self.rotation, other.translation), self.scale),
                self.translation,
            ),
            scale: self.scale * other.scale,
        }
    }

    pub fn inverse(&self) -> RigidTransform<T> {
        let rot_t = mat3::transpose(&self.rotation);
        let inv_s = T::one() / self.scale;
        RigidTransform {
            rotation: rot_t,
            translation: vec3::scale(mat3::matvec(&rot_t, self.translation), -inv_s),
            scale: inv_s,
        }
    }
}

/// PCA frame: centroid, orthonormal axes by descending variance.
#[derive(Debug, Clone)]
pub struct PrincipalAxes<T> {
    pub centroid: [T; 3],
    pub axes: [[T; 3]; 3],
    pub variances: [T; 3],
}

/// Canonical normalization output; `near_isotropic` flags a first/second
/// variance ratio below 1.05, where the principal axis is unreliable.
#[derive(Debug, Clone)]
pub struct NormalizedCloud<T> {
    pub cloud: PointCloud<T>,
    pub transform: RigidTransform<T>,
    pub near_isotropic: bool,
}

/// Principal axes of the point covariance (population, divisor N).
///
/// Sign convention: each axis's largest-magnitude component is positive;
/// component ties resolve toward +x, then +y.
pub fn pca_axes<T: Real>(cloud: &PointCloud<T>) -> Result<PrincipalAxes<T>> {
    if cloud.len() < 4 {
        return Err(Error::DegenerateCloud(format!(
            "PCA needs at least 4 points, got {}",
            cloud.len()
        )));
    }
    let c = cloud.centroid();
    let mut cov = ndarray::Array2::<T>::zeros((3, 3));
    for p in &cloud.points {
        let d = vec3::sub(*p, c);
        for i in 0..3 {
            for j in 0..3 {
                cov[[i, j]] += d[i] * d[j];
            }
        }
    }
    let inv_n = T::one() / T::from(cloud.len()).unwrap();
    cov.mapv_inplace(|x| x * inv_n);

    let eig = dense::symmetric_eigen(&cov)?;
    if eig.values[2] <= T::zero() || !eig.values[2].is_finite() {
        return Err(Error::DegenerateCloud(
            "covariance has rank 0 (all points coincident)".into(),
        ));
    }

    // descending variance
    let mut axes = [[T::zero(); 3]; 3];
    let mut variances = [T::zero(); 3];
    for k in 0..3 {
        let col = 2 - k;
        variances[k] = eig.values[col].max(T::zero());
        axes[k] = [
            eig.vectors[[0, col]],
            eig.vectors[[1, col]],
            eig.vectors[[2, col]],
        ];
        axes[k] = fix_axis_sign(axes[k]);
    }
    Ok(PrincipalAxes {
        centroid: c,
        axes,
        variances,
    })
}

/// Largest-magnitude component positive; earlier axes win exact-magnitude ties.
fn fix_axis_sign<T: Real>(axis: [T; 3]) -> [T; 3] {
    let mut arg = 0;
    for i in 1..3 {
        if axis[i].abs() > axis[arg].abs() {
            arg = i;
        }
    }
    if axis[arg] < T::zero() {
        vec3::scale(axis, -T::one())
    } else {
        axis
    }
}

/// Variance ratio below which the principal direction is considered ambiguous.
pub const ISOTROPY_RATIO: f64 = 1.05;

/// Center at the origin, rotate PCA axes onto the coordinate axes
/// (first axis -> x), and scale so the largest PCA-aligned bounding-box
/// side is 1. The returned transform maps input to output exactly.
pub fn normalize_cloud<T: Real>(cloud: &PointCloud<T>) -> Result<NormalizedCloud<T>> {
    let pca = pca_axes(cloud)?;
    let rank2_tol = real::<T>(1e-10);
    if pca.variances[1] <= rank2_tol * pca.variances[0] {
        return Err(Error::DegenerateCloud(
            "PCA rank < 2 (points collinear or coincident)".into(),
        ));
    }

    // rows of R are the PCA axes, so R maps axis k onto coordinate axis k
    let mut rot = [pca.axes[0], pca.axes[1], pca.axes[2]];
    if mat3::det(&rot) < T::zero() {
        rot[2] = vec3::scale(rot[2], -T::one());
    }

    // extent in the PCA frame
    let mut lo = [T::infinity(); 3];
    let mut hi = [T::neg_infinity(); 3];
    for p in &cloud.points {
        let q = mat3::matvec(&rot, vec3::sub(*p, pca.centroid));
        for a in 0..3 {
            lo[a] = lo[a].min(q[a]);
            hi[a] = hi[a].max(q[a]);
        }
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(hi[2] - lo[2]);
    if extent <= T::zero() {
        return Err(Error::DegenerateCloud("cloud has zero extent".into()));
    }
    let scale = T::one() / extent;

    let translation = vec3::scale(mat3::matvec(&rot, pca.centroid), -scale);
    let transform = RigidTransform {
        rotation: rot,
        translation,
        scale,
    };

    // recenter exactly: the transform above puts the centroid at the origin
    // up to roundoff; recompute the translation from the transformed centroid
    // so the output centroid is zero within 1e-9.
    let mut out = cloud.transformed(&transform);
    let residual_centroid = out.centroid();
    let transform = RigidTransform {
        rotation: transform.rotation,
        translation: vec3::sub(transform.translation, residual_centroid),
        scale: transform.scale,
    };
    out = cloud.transformed(&transform);

    let ratio = pca.variances[0] / pca.variances[1].max(T::min_positive_value());
    Ok(NormalizedCloud {
        cloud: out,
        transform,
        near_isotropic: ratio < real(ISOTROPY_RATIO),
    })
}

/// Uniformly random rotation: axis from a normalized Gaussian triple,
/// angle uniform in `[0, max_angle]`. Deterministic per seed.
pub fn random_rotation<T: Real>(seed: u64, max_angle: f64) -> RigidTransform<T> {
    assert!(
        (0.0..=std::f64::consts::TAU).contains(&max_angle),
        "max_angle must be in [0, 2*pi]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = loop {
        let g: [f64; 3] = [
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        ];
        let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if n > 1e-9 {
            break [g[0] / n, g[1] / n, g[2] / n];
        }
    };
    let angle = rng.random::<f64>() * max_angle;
    let axis_t = [real::<T>(axis[0]), real(axis[1]), real(axis[2])];
    RigidTransform {
        rotation: mat3::axis_angle(axis_t, real(angle)),
        translation: [T::zero(); 3],
        scale: T::one(),
    }
}

/// Default spherical-flip radius multiplier for hidden-point removal.
pub const HPR_GAMMA: f64 = 3.0;

/// Subset of points visible from `viewpoint` under hidden-point removal
/// (spherical flip + convex hull). `gamma` scales the flip radius relative
/// to the largest point distance from the viewpoint.
pub fn partial_view_with_gamma<T: Real>(
    cloud: &PointCloud<T>,
    viewpoint: [T; 3],
    gamma: f64,
) -> Result<PointCloud<T>> {
    if cloud.is_empty() {
        return Err(Error::EmptyView);
    }
    let (center, radius) = cloud.bounding_sphere();
    if vec3::dist(viewpoint, center) <= radius {
        return Err(Error::ViewpointInsideCloud);
    }

    let shifted: Vec<[T; 3]> = cloud
        .points
        .iter()
        .map(|p| vec3::sub(*p, viewpoint))
        .collect();
    let max_norm = shifted
        .iter()
        .map(|p| vec3::norm(*p))
        .fold(T::zero(), T::max);
    let flip_radius = real::<T>(gamma) * max_norm;

    // spherical flip: radial reflection about the sphere of radius flip_radius
    let mut flipped: Vec<[T; 3]> = shifted
        .iter()
        .map(|p| {
            let n = vec3::norm(*p);
            vec3::scale(*p, (real::<T>(2.0) * flip_radius - n) / n)
        })
        .collect();
    flipped.push([T::zero(); 3]); // the viewpoint itself

    let hull_vertices = hull::hull_vertices(&flipped);
    let visible: Vec<usize> = (0..cloud.len())
        .filter(|i| hull_vertices.contains(i))
        .collect();
    if visible.is_empty() {
        return Err(Error::EmptyView);
    }
    Ok(cloud.select(&visible))
}

/// [`partial_view_with_gamma`] at the default gamma of 3.
pub fn partial_view<T: Real>(cloud: &PointCloud<T>, viewpoint: [T; 3]) -> Result<PointCloud<T>> {
    partial_view_with_gamma(cloud, viewpoint, HPR_GAMMA)
}
