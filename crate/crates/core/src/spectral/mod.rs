//! Graph Laplacian over a point cloud, truncated generalized
//! eigendecomposition, and the rotation-invariant heat / wave kernel
//! signature descriptors derived from it.

pub mod cache;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::linalg::lanczos::{smallest_eigenpairs, EigenOptions};
use crate::linalg::sparse::Csr;
use crate::linalg::vec3;
use crate::real::{real, Real};

/// Edge weighting of the k-NN graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeighting {
    /// Gaussian weights exp(-d^2 / sigma^2).
    Gaussian,
    /// Unit weights (combinatorial Laplacian).
    Unit,
}

/// Vertex mass matrix choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassMode {
    /// M_ii = weighted vertex degree.
    Degree,
    /// M = I.
    Unit,
}

/// Graph bandwidth: automatic (mean k-NN distance) or fixed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectralConfig {
    /// Number of eigenpairs to compute (clamped to what the cloud supports).
    pub num_eigenpairs: usize,
    /// Neighborhood size of the k-NN graph, counting the point itself.
    pub knn: usize,
    pub bandwidth: Bandwidth,
    pub weighting: EdgeWeighting,
    pub mass: MassMode,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            num_eigenpairs: 200,
            knn: 8,
            bandwidth: Bandwidth::Auto,
            weighting: EdgeWeighting::Gaussian,
            mass: MassMode::Degree,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_eigenpairs < 2 {
            return Err(Error::Config("num_eigenpairs must be >= 2".into()));
        }
        if self.knn < 2 {
            return Err(Error::Config("knn must be >= 2".into()));
        }
        if let Bandwidth::Fixed(s) = self.bandwidth {
            if !(s > 0.0) {
                return Err(Error::Config("bandwidth must be positive".into()));
            }
        }
        Ok(())
    }

    /// Canonical string used in the basis cache key.
    pub fn cache_tag(&self) -> String {
        format!(
            "k={};knn={};bw={:?};w={:?};m={:?}",
            self.num_eigenpairs, self.knn, self.bandwidth, self.weighting, self.mass
        )
    }
}

/// Output of [`build_laplacian`]: operator, mass, and the component map when
/// the graph was disconnected (largest component retained).
#[derive(Debug, Clone)]
pub struct LaplacianBuild<T> {
    pub laplacian: Csr<T>,
    pub mass: Vec<T>,
    /// Original indices of the retained vertices, when points were dropped.
    pub kept: Option<Vec<usize>>,
    /// Gaussian bandwidth actually used.
    pub sigma: T,
}

/// Symmetrized k-NN graph Laplacian L = D - W with Gaussian or unit weights.
///
/// `L 1 = 0` by construction. A disconnected graph is reported by retaining
/// the largest component and exposing the index map in `kept`.
pub fn build_laplacian<T: Real>(
    cloud: &PointCloud<T>,
    cfg: &SpectralConfig,
) -> Result<LaplacianBuild<T>> {
    cfg.validate()?;
    let n = cloud.len();
    if n < 2 {
        return Err(Error::DegenerateCloud(
            "need at least 2 points for a graph Laplacian".into(),
        ));
    }
    // neighbors per point, not counting the point itself
    let neighbors = cfg.knn.min(n) - 1;

    // brute-force directed k-NN (desk-scale clouds)
    let mut edges: Vec<(usize, usize, T)> = Vec::with_capacity(n * neighbors);
    let mut dist_sum = T::zero();
    let mut dist_count = 0usize;
    let mut scratch: Vec<(T, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        scratch.clear();
        for j in 0..n {
            if j != i {
                scratch.push((vec3::dist_sq(cloud.points[i], cloud.points[j]), j));
            }
        }
        scratch.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        for &(d2, j) in scratch.iter().take(neighbors) {
            let d = d2.sqrt();
            edges.push((i, j, d));
            dist_sum += d;
            dist_count += 1;
        }
    }

    let sigma = match cfg.bandwidth {
        Bandwidth::Fixed(s) => real::<T>(s),
        Bandwidth::Auto => dist_sum / T::from(dist_count.max(1)).unwrap(),
    };
    if !(sigma > T::zero()) {
        return Err(Error::DegenerateCloud(
            "zero k-NN bandwidth (coincident points)".into(),
        ));
    }

    // symmetrize: union of directed edges; the weight is a function of the
    // distance, so both directions agree.
    let mut sym: std::collections::BTreeMap<(usize, usize), T> = std::collections::BTreeMap::new();
    for &(i, j, d) in &edges {
        let key = (i.min(j), i.max(j));
        let w = match cfg.weighting {
            EdgeWeighting::Unit => T::one(),
            EdgeWeighting::Gaussian => (-(d * d) / (sigma * sigma)).exp(),
        };
        sym.entry(key).or_insert(w);
    }

    // connectivity via BFS over the symmetric adjacency
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j) in sym.keys() {
        adj[i].push(j);
        adj[j].push(i);
    }
    let component = label_components(&adj);
    let n_components = component.iter().copied().max().map_or(0, |m| m + 1);

    let (kept, remap): (Option<Vec<usize>>, Vec<Option<usize>>) = if n_components > 1 {
        let mut sizes = vec![0usize; n_components];
        for &c in &component {
            sizes[c] += 1;
        }
        let largest = sizes
            .iter()
            .enumerate()
            .max_by_key(|&(i, &s)| (s, std::cmp::Reverse(i)))
            .unwrap()
            .0;
        let kept: Vec<usize> = (0..n).filter(|&i| component[i] == largest).collect();
        log::warn!(
            "disconnected k-NN graph: {} components, keeping largest with {} of {} points",
            n_components,
            kept.len(),
            n
        );
        let mut remap = vec![None; n];
        for (new, &old) in kept.iter().enumerate() {
            remap[old] = Some(new);
        }
        (Some(kept), remap)
    } else {
        (None, (0..n).map(Some).collect())
    };

    let m = remap.iter().filter(|r| r.is_some()).count();
    let mut triplets: Vec<(usize, usize, T)> = Vec::with_capacity(sym.len() * 4);
    let mut degree = vec![T::zero(); m];
    for (&(i, j), &w) in &sym {
        let (Some(a), Some(b)) = (remap[i], remap[j]) else {
            continue;
        };
        triplets.push((a, b, -w));
        triplets.push((b, a, -w));
        degree[a] += w;
        degree[b] += w;
    }
    for (i, &d) in degree.iter().enumerate() {
        triplets.push((i, i, d));
    }

    let mass = match cfg.mass {
        MassMode::Degree => degree,
        MassMode::Unit => vec![T::one(); m],
    };
    Ok(LaplacianBuild {
        laplacian: Csr::from_triplets(m, triplets),
        mass,
        kept,
        sigma,
    })
}

fn label_components(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut component = vec![usize::MAX; n];
    let mut next = 0usize;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        component[start] = next;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if component[v] == usize::MAX {
                    component[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    component
}

/// Truncated generalized eigendecomposition of (L, M): eigenvalues
/// nondecreasing and nonnegative, eigenfunctions M-orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis<T> {
    pub eigenvalues: Vec<T>,
    /// N x k, column i paired with eigenvalues[i].
    pub eigenfunctions: Array2<T>,
    pub mass: Vec<T>,
}

impl<T: Real> SpectralBasis<T> {
    pub fn len(&self) -> usize {
        self.eigenfunctions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_pairs(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest deviation of phi^T M phi from the identity.
    pub fn orthonormality_defect(&self) -> T {
        let k = self.num_pairs();
        let n = self.len();
        let mut worst = T::zero();
        for a in 0..k {
            for b in a..k {
                let mut acc = T::zero();
                for i in 0..n {
                    acc += self.eigenfunctions[[i, a]] * self.mass[i] * self.eigenfunctions[[i, b]];
                }
                let target = if a == b { T::one() } else { T::zero() };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }
}

/// Residual bound enforced on every returned eigenpair:
/// ||L phi - lambda M phi|| <= RESIDUAL_TOL * max(1, lambda).
pub const RESIDUAL_TOL: f64 = 1e-6;

/// Smallest-k generalized eigenpairs of `L phi = lambda M phi` with positive
/// diagonal mass `M`, via the symmetric reduction B = M^-1/2 L M^-1/2.
pub fn eigendecompose<T: Real>(
    laplacian: &Csr<T>,
    mass: &[T],
    k: usize,
) -> Result<SpectralBasis<T>> {
    let n = laplacian.n();
    if mass.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: mass.len(),
        });
    }
    if mass.iter().any(|&m| !(m > T::zero())) {
        return Err(Error::Config("mass matrix must be positive".into()));
    }
    // The iterative solver needs k <= n-2; small clouds take the dense path
    // and may return the full spectrum.
    let k_eff = if n <= 320 { k.min(n) } else { k.min(n.saturating_sub(2)) };
    if k_eff == 0 {
        return Err(Error::Config("no eigenpairs requested".into()));
    }

    let inv_sqrt_m: Vec<T> = mass.iter().map(|&m| T::one() / m.sqrt()).collect();
    let b = laplacian.diag_scale(&inv_sqrt_m);
    let opts = EigenOptions {
        tol: real(1e-10),
        ..EigenOptions::default()
    };
    let (theta, psi) = smallest_eigenpairs(&b, k_eff, &opts)?;

    let eigenvalues: Vec<T> = theta.iter().map(|&t| t.max(T::zero())).collect();
    let mut eigenfunctions = psi;
    for i in 0..n {
        for j in 0..k_eff {
            eigenfunctions[[i, j]] *= inv_sqrt_m[i];
        }
    }

    // enforce the residual contract on the generalized problem
    let tol = real::<T>(RESIDUAL_TOL);
    let mut worst = T::zero();
    let mut worst_pair = 0usize;
    let mut phi_col = vec![T::zero(); n];
    let mut l_phi = vec![T::zero(); n];
    for j in 0..k_eff {
        for i in 0..n {
            phi_col[i] = eigenfunctions[[i, j]];
        }
        laplacian.matvec(&phi_col, &mut l_phi);
        let mut res_sq = T::zero();
        for i in 0..n {
            let r = l_phi[i] - eigenvalues[j] * mass[i] * phi_col[i];
            res_sq += r * r;
        }
        let rel = res_sq.sqrt() / T::one().max(eigenvalues[j]);
        if rel > worst {
            worst = rel;
            worst_pair = j;
        }
    }
    if worst > tol {
        return Err(Error::ConvergenceFailure {
            iterations: 0,
            converged: worst_pair,
            requested: k_eff,
            worst_residual: worst.to_f64().unwrap_or(f64::NAN),
        });
    }

    Ok(SpectralBasis {
        eigenvalues,
        eigenfunctions,
        mass: mass.to_vec(),
    })
}

/// Convenience: build the Laplacian and eigendecompose in one step,
/// returning the basis together with the component index map.
pub fn basis_for_cloud<T: Real>(
    cloud: &PointCloud<T>,
    cfg: &SpectralConfig,
) -> Result<(SpectralBasis<T>, Option<Vec<usize>>)> {
    let build = build_laplacian(cloud, cfg)?;
    let basis = eigendecompose(&build.laplacian, &build.mass, cfg.num_eigenpairs)?;
    Ok((basis, build.kept))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorKind {
    Xyz,
    Hks,
    Wks,
    External,
}

/// Per-point feature matrix plus the grid it was evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor<T> {
    /// N x d.
    pub values: Array2<T>,
    pub kind: DescriptorKind,
    /// Time grid (HKS) or energy grid (WKS); empty for xyz/external.
    pub params: Vec<f64>,
    /// WKS band width.
    pub sigma: Option<f64>,
}

impl<T: Real> Descriptor<T> {
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Raw point coordinates as a (rotation-sensitive) baseline descriptor.
pub fn xyz_descriptor<T: Real>(cloud: &PointCloud<T>) -> Descriptor<T> {
    let n = cloud.len();
    let mut values = Array2::zeros((n, 3));
    for (i, p) in cloud.points.iter().enumerate() {
        for a in 0..3 {
            values[[i, a]] = p[a];
        }
    }
    Descriptor {
        values,
        kind: DescriptorKind::Xyz,
        params: vec![],
        sigma: None,
    }
}

/// Eigenvalues at or below this fraction of the largest are treated as zero
/// modes when building descriptor grids.
fn positive_floor<T: Real>(basis: &SpectralBasis<T>) -> T {
    let lam_max = basis
        .eigenvalues
        .last()
        .copied()
        .unwrap_or_else(T::zero)
        .max(T::zero());
    lam_max * real(1e-8)
}

/// First eigenvalue above the positive floor, if any.
fn first_positive<T: Real>(basis: &SpectralBasis<T>) -> Option<T> {
    let floor = positive_floor(basis);
    basis.eigenvalues.iter().copied().find(|&l| l > floor)
}

/// Default heat-kernel time grid: `count` values log-spaced in
/// [4 ln 10 / lambda_k, 4 ln 10 / lambda_1].
pub fn default_hks_times<T: Real>(basis: &SpectralBasis<T>, count: usize) -> Vec<T> {
    let four_ln10 = real::<T>(4.0 * std::f64::consts::LN_10);
    let (Some(lam1), Some(&lam_k)) = (first_positive(basis), basis.eigenvalues.last()) else {
        return vec![T::one()];
    };
    if !(lam_k > T::zero()) {
        return vec![T::one()];
    }
    let t_min = four_ln10 / lam_k;
    let t_max = four_ln10 / lam1;
    log_spaced(t_min, t_max, count)
}

fn log_spaced<T: Real>(lo: T, hi: T, count: usize) -> Vec<T> {
    if count <= 1 || (hi - lo).abs() <= T::epsilon() {
        return vec![lo];
    }
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    let step = (ln_hi - ln_lo) / T::from(count - 1).unwrap();
    (0..count)
        .map(|i| (ln_lo + step * T::from(i).unwrap()).exp())
        .collect()
}

/// Heat kernel signature, L1-normalized per time column.
pub fn compute_hks<T: Real>(basis: &SpectralBasis<T>, times: &[T]) -> Descriptor<T> {
    let mut d = compute_hks_raw(basis, times);
    for mut col in d.values.columns_mut() {
        let total = col.iter().fold(T::zero(), |acc, &v| acc + v.abs());
        if total > T::zero() {
            col.mapv_inplace(|v| v / total);
        }
    }
    d
}

/// Heat kernel signature without column normalization:
/// hks_t(x) = sum_i exp(-lambda_i t) phi_i(x)^2.
pub fn compute_hks_raw<T: Real>(basis: &SpectralBasis<T>, times: &[T]) -> Descriptor<T> {
    assert!(!times.is_empty(), "times must be non-empty");
    assert!(
        times.iter().all(|&t| t > T::zero()),
        "times must be strictly positive"
    );
    let n = basis.len();
    let k = basis.num_pairs();
    let mut values = Array2::zeros((n, times.len()));
    for (ti, &t) in times.iter().enumerate() {
        let weights: Vec<T> = basis.eigenvalues.iter().map(|&l| (-l * t).exp()).collect();
        for x in 0..n {
            let mut acc = T::zero();
            for i in 0..k {
                let phi = basis.eigenfunctions[[x, i]];
                acc += weights[i] * phi * phi;
            }
            values[[x, ti]] = acc;
        }
    }
    Descriptor {
        values,
        kind: DescriptorKind::Hks,
        params: times.iter().map(|t| t.to_f64().unwrap()).collect(),
        sigma: None,
    }
}

/// Default wave-kernel energy grid: `count` energies spanning
/// [ln lambda_1, ln lambda_k], sigma = 7 x grid step.
pub fn default_wks_energies<T: Real>(
    basis: &SpectralBasis<T>,
    count: usize,
) -> Result<(Vec<T>, T)> {
    let lam1 = first_positive(basis).ok_or(Error::NoPositiveEigenvalues)?;
    let lam_k = *basis.eigenvalues.last().unwrap();
    let (e_lo, e_hi) = (lam1.ln(), lam_k.ln());
    if (e_hi - e_lo).abs() <= T::epsilon() || count <= 1 {
        return Ok((vec![e_lo], T::one()));
    }
    let step = (e_hi - e_lo) / T::from(count - 1).unwrap();
    let energies = (0..count)
        .map(|i| e_lo + step * T::from(i).unwrap())
        .collect();
    Ok((energies, step * real(7.0)))
}

/// Wave kernel signature:
/// wks_e(x) = C_e sum_i phi_i(x)^2 exp(-(e - ln lambda_i)^2 / (2 sigma^2)),
/// with C_e normalizing the band weights to sum to 1; zero modes skipped.
pub fn compute_wks<T: Real>(
    basis: &SpectralBasis<T>,
    energies: &[T],
    sigma: T,
) -> Result<Descriptor<T>> {
    assert!(!energies.is_empty(), "energies must be non-empty");
    assert!(sigma > T::zero(), "sigma must be positive");
    let floor = positive_floor(basis);
    let active: Vec<usize> = (0..basis.num_pairs())
        .filter(|&i| basis.eigenvalues[i] > floor)
        .collect();
    if active.is_empty() {
        return Err(Error::NoPositiveEigenvalues);
    }
    let log_lambda: Vec<T> = active.iter().map(|&i| basis.eigenvalues[i].ln()).collect();

    let n = basis.len();
    let two_sigma_sq = real::<T>(2.0) * sigma * sigma;
    let mut values = Array2::zeros((n, energies.len()));
    for (ei, &e) in energies.iter().enumerate() {
        let bands: Vec<T> = log_lambda
            .iter()
            .map(|&ll| (-(e - ll) * (e - ll) / two_sigma_sq).exp())
            .collect();
        let total: T = bands.iter().copied().sum();
        let c_e = if total > T::zero() {
            T::one() / total
        } else {
            T::zero()
        };
        for x in 0..n {
            let mut acc = T::zero();
            for (bi, &i) in active.iter().enumerate() {
                let phi = basis.eigenfunctions[[x, i]];
                acc += bands[bi] * phi * phi;
            }
            values[[x, ei]] = c_e * acc;
        }
    }
    Ok(Descriptor {
        values,
        kind: DescriptorKind::Wks,
        params: energies.iter().map(|e| e.to_f64().unwrap()).collect(),
        sigma: Some(sigma.to_f64().unwrap()),
    })
}
