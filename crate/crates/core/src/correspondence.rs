//! Descriptor matching between an aligned query cloud and a database
//! reference: dense similarity, optional Sinkhorn sharpening, a
//! least-squares functional map, point-to-point extraction and affordance
//! transfer.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affordance::AffordanceField;
use crate::error::{Error, Result};
use crate::linalg::dense::{symmetric_eigen, Cholesky};
use crate::real::{real, Real};
use crate::spectral::{Descriptor, SpectralBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    pub iterations: usize,
    /// Temperature: the similarity is divided by this before exponentiation.
    pub lambda: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            lambda: 0.2,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::Config("sinkhorn iterations must be >= 1".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config("sinkhorn lambda must be positive".into()));
        }
        Ok(())
    }
}

/// Pairwise negative squared descriptor distance:
/// S[i][j] = -||q_i - r_j||^2.
pub fn similarity_matrix<T: Real>(
    desc_q: &Descriptor<T>,
    desc_r: &Descriptor<T>,
) -> Result<Array2<T>> {
    if desc_q.dim() != desc_r.dim() {
        return Err(Error::DimensionMismatch {
            context: "descriptor dimensions differ",
            left: desc_q.dim(),
            right: desc_r.dim(),
        });
    }
    Ok(neg_sq_distances(&desc_q.values, &desc_r.values))
}

/// -||a_i - b_j||^2 for row sets, via the Gram expansion.
fn neg_sq_distances<T: Real>(a: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    let a_sq: Vec<T> = a
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|&x| x * x).sum())
        .collect();
    let b_sq: Vec<T> = b
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|&x| x * x).sum())
        .collect();
    let cross = a.dot(&b.t());
    let mut s = Array2::zeros((a.nrows(), b.nrows()));
    for i in 0..a.nrows() {
        for j in 0..b.nrows() {
            // clamp tiny negative squared distances from cancellation
            let d2 = (a_sq[i] + b_sq[j] - real::<T>(2.0) * cross[[i, j]]).max(T::zero());
            s[[i, j]] = -d2;
        }
    }
    s
}

/// Entropic normalization: P = exp(S/lambda) followed by alternating
/// row/column L1 passes, ending on a row pass, so every row sums to 1.
/// Overflow is prevented by row-wise max subtraction before exponentiation.
pub fn sinkhorn_normalize<T: Real>(s: &Array2<T>, cfg: &SinkhornConfig) -> Result<Array2<T>> {
    cfg.validate()?;
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("similarity matrix must be finite".into()));
    }
    let lambda = real::<T>(cfg.lambda);
    let mut p = Array2::zeros(s.raw_dim());
    for (i, row) in s.rows().into_iter().enumerate() {
        let row_max = row.iter().copied().fold(T::neg_infinity(), T::max);
        for (j, &v) in row.iter().enumerate() {
            p[[i, j]] = ((v - row_max) / lambda).exp();
        }
    }
    for _ in 0..cfg.iterations {
        normalize_rows(&mut p);
        normalize_cols(&mut p);
    }
    normalize_rows(&mut p);
    Ok(p)
}

fn normalize_rows<T: Real>(p: &mut Array2<T>) {
    for mut row in p.rows_mut() {
        let sum: T = row.iter().copied().sum();
        if sum > T::zero() {
            row.mapv_inplace(|v| v / sum);
        }
    }
}

fn normalize_cols<T: Real>(p: &mut Array2<T>) {
    let (n, m) = p.dim();
    for j in 0..m {
        let mut sum = T::zero();
        for i in 0..n {
            sum += p[[i, j]];
        }
        if sum > T::zero() {
            for i in 0..n {
                p[[i, j]] /= sum;
            }
        }
    }
}

/// Similarity matrix of a noisy bijection: each query row has exactly one
/// boosted match entry; non-match entries are uniform in [-1, -0.3] and the
/// match entry in [-0.1, 0]. This is the random model the Sinkhorn
/// contracts are stated over (the matcher's operating regime); the returned
/// permutation maps query row -> matched reference column.
pub fn noisy_bijection_similarity<T: Real>(n: usize, seed: u64) -> (Array2<T>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            s[[i, j]] = real::<T>(rng.random_range(-1.0..-0.3));
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    for (i, &j) in perm.iter().enumerate() {
        s[[i, j]] = real::<T>(rng.random_range(-0.1..0.0));
    }
    (s, perm)
}

/// k_ref x k_query matrix mapping query spectral coefficients into the
/// reference basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalMap<T> {
    pub c: Array2<T>,
}

#[derive(Debug, Clone)]
pub struct FunctionalMapFit<T> {
    pub map: FunctionalMap<T>,
    /// Set when the descriptor coefficient matrix A had numerical rank
    /// below min(k_query, d); the solution is still returned via a ridge.
    pub rank_deficient: bool,
}

/// Spectral coefficients of the descriptors: phi^T M D, shape k x d.
fn spectral_coefficients<T: Real>(basis: &SpectralBasis<T>, desc: &Descriptor<T>) -> Array2<T> {
    let n = basis.len();
    let k = basis.num_pairs();
    let d = desc.dim();
    assert_eq!(desc.len(), n, "descriptor rows must match basis size");
    let mut weighted = desc.values.clone();
    for i in 0..n {
        for j in 0..d {
            weighted[[i, j]] *= basis.mass[i];
        }
    }
    let mut coeff = Array2::zeros((k, d));
    let phi_t = basis.eigenfunctions.t();
    coeff.assign(&phi_t.dot(&weighted));
    coeff
}

/// Least-squares functional map C minimizing
/// ||C A - B||^2 + mu ||C o (lambda_r 1^T - 1 lambda_q^T)||^2,
/// solved row by row via normal equations.
pub fn fit_functional_map<T: Real>(
    basis_q: &SpectralBasis<T>,
    basis_r: &SpectralBasis<T>,
    desc_q: &Descriptor<T>,
    desc_r: &Descriptor<T>,
    mu: T,
) -> Result<FunctionalMapFit<T>> {
    if desc_q.dim() != desc_r.dim() {
        return Err(Error::DimensionMismatch {
            context: "descriptor dimensions differ",
            left: desc_q.dim(),
            right: desc_r.dim(),
        });
    }
    let a = spectral_coefficients(basis_q, desc_q); // k_q x d
    let b = spectral_coefficients(basis_r, desc_r); // k_r x d
    let k_q = a.nrows();
    let k_r = b.nrows();
    let d = a.ncols();

    let gram = a.dot(&a.t()); // k_q x k_q
    // numerical rank of A via the Gram spectrum
    let gram_eig = symmetric_eigen(&gram)?;
    let lam_max = gram_eig.values.last().copied().unwrap_or_else(T::zero);
    let rank = gram_eig
        .values
        .iter()
        .filter(|&&v| v > lam_max * real(1e-10))
        .count();
    let rank_deficient = rank < k_q.min(d);
    if rank_deficient {
        log::warn!(
            "functional map: descriptor coefficients rank {rank} < min({k_q}, {d}); \
             solving with a ridge term"
        );
    }

    let mut c = Array2::zeros((k_r, k_q));
    let ab_t = a.dot(&b.t()); // k_q x k_r, column i is A b_i^T
    let base_ridge = (lam_max * real(1e-12)).max(T::min_positive_value());
    for i in 0..k_r {
        let mut lhs = gram.clone();
        for j in 0..k_q {
            let diff = basis_r.eigenvalues[i] - basis_q.eigenvalues[j];
            lhs[[j, j]] += mu * diff * diff;
        }
        let rhs: Vec<T> = (0..k_q).map(|j| ab_t[[j, i]]).collect();
        let mut ridge = if rank_deficient { base_ridge } else { T::zero() };
        let solution = loop {
            let mut attempt = lhs.clone();
            if ridge > T::zero() {
                for j in 0..k_q {
                    attempt[[j, j]] += ridge;
                }
            }
            if let Some(chol) = Cholesky::new(&attempt) {
                break chol.solve(&rhs);
            }
            ridge = (ridge * real(10.0)).max(base_ridge.max(real(1e-12)));
        };
        for j in 0..k_q {
            c[[i, j]] = solution[j];
        }
    }
    Ok(FunctionalMapFit {
        map: FunctionalMap { c },
        rank_deficient,
    })
}

/// For each query point, the matched reference index plus a diagnostic
/// confidence in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap<T> {
    pub target_index: Vec<usize>,
    pub confidence: Vec<T>,
}

impl<T: Real> PointMap<T> {
    pub fn len(&self) -> usize {
        self.target_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target_index.is_empty()
    }
}

/// Row-argmax extraction; ties resolve to the lowest reference index.
///
/// Confidence is the winning share of the row turned into a distribution
/// (rows of a Sinkhorn-normalized matrix are already distributions; raw
/// similarity rows go through a stable softmax first).
pub fn point_map_from_similarity<T: Real>(s: &Array2<T>) -> PointMap<T> {
    let (n, m) = s.dim();
    assert!(m > 0, "similarity matrix needs at least one column");
    let nonnegative = s.iter().all(|&v| v >= T::zero());
    let mut target_index = Vec::with_capacity(n);
    let mut confidence = Vec::with_capacity(n);
    for row in s.rows() {
        let mut best = 0usize;
        for j in 1..m {
            if row[j] > row[best] {
                best = j;
            }
        }
        let share = if nonnegative {
            let sum: T = row.iter().copied().sum();
            if sum > T::zero() {
                row[best] / sum
            } else {
                T::one() / T::from(m).unwrap()
            }
        } else {
            let mx = row[best];
            let sum: T = row.iter().map(|&v| (v - mx).exp()).sum();
            T::one() / sum
        };
        target_index.push(best);
        confidence.push(share);
    }
    PointMap {
        target_index,
        confidence,
    }
}

/// Functional-map extraction: transport query spectral embeddings through C
/// and match to reference embeddings by nearest neighbor.
pub fn point_map_functional<T: Real>(
    basis_q: &SpectralBasis<T>,
    basis_r: &SpectralBasis<T>,
    fmap: &FunctionalMap<T>,
) -> Result<PointMap<T>> {
    let (k_r, k_q) = fmap.c.dim();
    if basis_q.num_pairs() != k_q {
        return Err(Error::DimensionMismatch {
            context: "functional map columns vs query basis",
            left: k_q,
            right: basis_q.num_pairs(),
        });
    }
    if basis_r.num_pairs() != k_r {
        return Err(Error::DimensionMismatch {
            context: "functional map rows vs reference basis",
            left: k_r,
            right: basis_r.num_pairs(),
        });
    }
    let transported = basis_q.eigenfunctions.dot(&fmap.c.t()); // n_q x k_r
    let s = neg_sq_distances(&transported, &basis_r.eigenfunctions);
    Ok(point_map_from_similarity(&s))
}

/// Pull the reference field through the point map: query point i receives
/// the heat of its matched reference point; labels are recomputed with the
/// reference threshold.
pub fn transfer_affordance<T: Real>(
    map: &PointMap<T>,
    field_r: &AffordanceField<T>,
) -> Result<AffordanceField<T>> {
    let n_r = field_r.len();
    let mut heat = Vec::with_capacity(map.len());
    for &t in &map.target_index {
        if t >= n_r {
            return Err(Error::DimensionMismatch {
                context: "point map target outside reference field",
                left: t,
                right: n_r,
            });
        }
        heat.push(field_r.heat[t]);
    }
    crate::affordance::binarize(&heat, field_r.threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::DescriptorKind;

    fn desc_from_rows<T: Real>(rows: Vec<Vec<T>>) -> Descriptor<T> {
        let n = rows.len();
        let d = rows[0].len();
        let flat: Vec<T> = rows.into_iter().flatten().collect();
        Descriptor {
            values: Array2::from_shape_vec((n, d), flat).unwrap(),
            kind: DescriptorKind::External,
            params: vec![],
            sigma: None,
        }
    }

    #[test]
    fn similarity_self_diagonal_is_row_maximum() {
        let d = desc_from_rows(vec![
            vec![1.0f64, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let s = similarity_matrix(&d, &d).unwrap();
        for i in 0..3 {
            assert_eq!(s[[i, i]], 0.0);
            for j in 0..3 {
                if j != i {
                    assert!(s[[i, j]] < s[[i, i]]);
                }
            }
        }
    }

    #[test]
    fn similarity_scalar_example() {
        let q = desc_from_rows(vec![vec![0.0f64], vec![1.0]]);
        let r = desc_from_rows(vec![vec![0.0f64], vec![1.0]]);
        let s = similarity_matrix(&q, &r).unwrap();
        assert_eq!(s[[0, 0]], 0.0);
        assert_eq!(s[[0, 1]], -1.0);
        assert_eq!(s[[1, 0]], -1.0);
        assert_eq!(s[[1, 1]], 0.0);
    }

    #[test]
    fn similarity_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q: Descriptor<f64> = desc_from_rows(
            (0..5)
                .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect(),
        );
        let r = desc_from_rows(
            (0..5)
                .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect(),
        );
        let s = similarity_matrix(&q, &r).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let mut d2 = 0.0f64;
                for k in 0..3 {
                    d2 += (q.values[[i, k]] - r.values[[j, k]]).powi(2);
                }
                assert!((s[[i, j]] + d2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn similarity_rejects_dimension_mismatch() {
        let q = desc_from_rows(vec![vec![0.0f64, 1.0]]);
        let r = desc_from_rows(vec![vec![0.0f64]]);
        assert!(matches!(
            similarity_matrix(&q, &r),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sinkhorn_single_entry_is_one() {
        let s = Array2::from_shape_vec((1, 1), vec![-3.7f64]).unwrap();
        let p = sinkhorn_normalize(&s, &SinkhornConfig::default()).unwrap();
        assert_eq!(p[[0, 0]], 1.0);
    }

    #[test]
    fn sinkhorn_uniform_matrix_stays_uniform() {
        let s = Array2::from_elem((4, 4), -0.5f64);
        let p = sinkhorn_normalize(&s, &SinkhornConfig::default()).unwrap();
        for v in p.iter() {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    /// Independent fixed-point oracle: explicit diagonal scaling vectors
    /// u, v instead of in-place matrix passes.
    fn sinkhorn_oracle_2x2(s: [[f64; 2]; 2], lambda: f64, iterations: usize) -> [[f64; 2]; 2] {
        let mut k = [[0.0f64; 2]; 2];
        for i in 0..2 {
            let row_max = s[i][0].max(s[i][1]);
            for j in 0..2 {
                k[i][j] = ((s[i][j] - row_max) / lambda).exp();
            }
        }
        let mut u = [1.0f64; 2];
        let mut v = [1.0f64; 2];
        for _ in 0..iterations {
            for i in 0..2 {
                u[i] = 1.0 / (k[i][0] * v[0] + k[i][1] * v[1]);
            }
            for j in 0..2 {
                v[j] = 1.0 / (k[0][j] * u[0] + k[1][j] * u[1]);
            }
        }
        // final row pass
        for i in 0..2 {
            u[i] = 1.0 / (k[i][0] * v[0] + k[i][1] * v[1]);
        }
        let mut out = [[0.0f64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = u[i] * k[i][j] * v[j];
            }
        }
        out
    }

    #[test]
    fn sinkhorn_2x2_matches_scaling_oracle() {
        let s_arr = [[0.0f64, -1.0], [-1.0, 0.0]];
        let s = Array2::from_shape_vec((2, 2), s_arr.concat()).unwrap();
        let cfg = SinkhornConfig::default();
        let p = sinkhorn_normalize(&s, &cfg).unwrap();
        let oracle = sinkhorn_oracle_2x2(s_arr, cfg.lambda, cfg.iterations);
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (p[[i, j]] - oracle[i][j]).abs() < 1e-12,
                    "P[{i}][{j}] = {} vs oracle {}",
                    p[[i, j]],
                    oracle[i][j]
                );
            }
        }
        // frozen value computed independently
        assert!((p[[0, 0]] - 0.9933071490757153).abs() < 1e-9);
    }

    #[test]
    fn sinkhorn_row_and_column_sums() {
        for seed in 0..20u64 {
            let (s, _) = noisy_bijection_similarity::<f64>(100, seed);
            let p = sinkhorn_normalize(&s, &SinkhornConfig::default()).unwrap();
            for row in p.rows() {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "row sum {sum}");
            }
            for j in 0..100 {
                let sum: f64 = (0..100).map(|i| p[[i, j]]).sum();
                assert!((sum - 1.0).abs() < 1e-3, "col {j} sum {sum}");
            }
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn sinkhorn_preserves_row_argmax() {
        for seed in 0..20u64 {
            let (s, perm) = noisy_bijection_similarity::<f64>(100, seed);
            let p = sinkhorn_normalize(&s, &SinkhornConfig::default()).unwrap();
            for i in 0..100 {
                let raw = (0..100).max_by(|&a, &b| s[[i, a]].partial_cmp(&s[[i, b]]).unwrap());
                let post = (0..100).max_by(|&a, &b| p[[i, a]].partial_cmp(&p[[i, b]]).unwrap());
                assert_eq!(raw, post, "seed {seed} row {i} argmax flipped");
                assert_eq!(raw, Some(perm[i]));
            }
        }
    }

    fn toy_basis(eigenvalues: Vec<f64>, phi: Vec<Vec<f64>>) -> SpectralBasis<f64> {
        let n = phi.len();
        let k = eigenvalues.len();
        let flat: Vec<f64> = phi.into_iter().flatten().collect();
        SpectralBasis {
            eigenvalues,
            eigenfunctions: Array2::from_shape_vec((n, k), flat).unwrap(),
            mass: vec![1.0; n],
        }
    }

    #[test]
    fn functional_map_self_is_identity() {
        // orthonormal 3-column basis on 4 points
        let basis = toy_basis(
            vec![0.0, 1.0, 2.5],
            vec![
                vec![0.5, 0.5, 0.5],
                vec![0.5, 0.5, -0.5],
                vec![0.5, -0.5, 0.5],
                vec![0.5, -0.5, -0.5],
            ],
        );
        let desc = desc_from_rows(vec![
            vec![1.0, 0.2, 0.0, -1.0],
            vec![0.0, 1.5, 0.3, 0.2],
            vec![-0.7, 0.1, 2.0, 0.5],
            vec![0.4, -0.6, 0.8, 1.0],
        ]);
        let fit = fit_functional_map(&basis, &basis, &desc, &desc, 0.0).unwrap();
        assert!(!fit.rank_deficient);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (fit.map.c[[i, j]] - target).abs() < 1e-6,
                    "C[{i}][{j}] = {}",
                    fit.map.c[[i, j]]
                );
            }
        }
    }

    #[test]
    fn functional_map_1d_is_ratio() {
        let basis_q = toy_basis(vec![1.0], vec![vec![1.0]]);
        let basis_r = toy_basis(vec![1.0], vec![vec![1.0]]);
        let a = desc_from_rows(vec![vec![2.0f64]]);
        let b = desc_from_rows(vec![vec![-3.0f64]]);
        let fit = fit_functional_map(&basis_q, &basis_r, &a, &b, 0.0).unwrap();
        assert!((fit.map.c[[0, 0]] - (-1.5)).abs() < 1e-12);
    }

    #[test]
    fn functional_map_matches_normal_equations_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // independent random orthonormal-ish small bases with distinct spectra
        let basis_q = toy_basis(
            vec![0.0, 0.8, 2.2],
            vec![
                vec![0.5, 0.5, 0.5],
                vec![0.5, 0.5, -0.5],
                vec![0.5, -0.5, 0.5],
                vec![0.5, -0.5, -0.5],
            ],
        );
        let basis_r = basis_q.clone();
        let dq = desc_from_rows(
            (0..4)
                .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        );
        let dr = desc_from_rows(
            (0..4)
                .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        );
        let mu = 1e-3;
        let fit = fit_functional_map(&basis_q, &basis_r, &dq, &dr, mu).unwrap();

        // oracle: explicit 3x3 inverse of (A A^T + mu D_i^2) per row
        let a = spectral_coefficients(&basis_q, &dq);
        let b = spectral_coefficients(&basis_r, &dr);
        let gram = a.dot(&a.t());
        for i in 0..3 {
            let mut m = [[0.0f64; 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    m[r][c] = gram[[r, c]];
                }
                let diff = basis_r.eigenvalues[i] - basis_q.eigenvalues[r];
                m[r][r] += mu * diff * diff;
            }
            let rhs: Vec<f64> = (0..3)
                .map(|r| (0..5).map(|d| a[[r, d]] * b[[i, d]]).sum())
                .collect();
            let inv = invert3(&m);
            for j in 0..3 {
                let oracle: f64 = (0..3).map(|k| inv[j][k] * rhs[k]).sum();
                assert!(
                    (fit.map.c[[i, j]] - oracle).abs() < 1e-8,
                    "C[{i}][{j}] {} vs oracle {oracle}",
                    fit.map.c[[i, j]]
                );
            }
        }
    }

    fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        let mut inv = [[0.0f64; 3]; 3];
        let cof = |r1: usize, c1: usize, r2: usize, c2: usize| {
            m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
        };
        inv[0][0] = cof(1, 1, 2, 2) / det;
        inv[0][1] = -cof(0, 1, 2, 2) / det;
        inv[0][2] = cof(0, 1, 1, 2) / det;
        inv[1][0] = -cof(1, 0, 2, 2) / det;
        inv[1][1] = cof(0, 0, 2, 2) / det;
        inv[1][2] = -cof(0, 0, 1, 2) / det;
        inv[2][0] = cof(1, 0, 2, 1) / det;
        inv[2][1] = -cof(0, 0, 2, 1) / det;
        inv[2][2] = cof(0, 0, 1, 1) / det;
        inv
    }

    #[test]
    fn point_map_identity_on_identical_descriptors() {
        let d = desc_from_rows(vec![
            vec![0.0f64, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ]);
        let s = similarity_matrix(&d, &d).unwrap();
        let p = sinkhorn_normalize(&s, &SinkhornConfig::default()).unwrap();
        let map = point_map_from_similarity(&p);
        assert_eq!(map.target_index, vec![0, 1, 2, 3]);
        for &c in &map.confidence {
            assert!(c > 0.9, "self-match confidence {c} not maximal");
        }
    }

    #[test]
    fn point_map_hand_set_rows() {
        let s = Array2::from_shape_vec(
            (2, 3),
            vec![-0.2f64, -0.5, -0.1, -0.9, -0.05, -0.4],
        )
        .unwrap();
        let map = point_map_from_similarity(&s);
        assert_eq!(map.target_index, vec![2, 1]);
    }

    #[test]
    fn point_map_tie_breaks_to_lowest_index() {
        let s = Array2::from_shape_vec((1, 3), vec![-0.5f64, -0.5, -0.5]).unwrap();
        let map = point_map_from_similarity(&s);
        assert_eq!(map.target_index, vec![0]);
    }

    #[test]
    fn point_map_recovers_permutation() {
        let rows = vec![
            vec![0.0f64, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![2.0, 2.0],
            vec![-1.0, 0.5],
        ];
        let perm = [3usize, 0, 4, 1, 2];
        let query_rows: Vec<Vec<f64>> = perm.iter().map(|&j| rows[j].clone()).collect();
        let r = desc_from_rows(rows);
        let q = desc_from_rows(query_rows);
        let s = similarity_matrix(&q, &r).unwrap();
        let map = point_map_from_similarity(&s);
        assert_eq!(map.target_index, perm.to_vec());
    }

    #[test]
    fn functional_map_point_extraction_identity() {
        let basis = toy_basis(
            vec![0.0, 1.0, 2.0],
            vec![
                vec![0.5, 0.5, 0.5],
                vec![0.5, 0.5, -0.5],
                vec![0.5, -0.5, 0.5],
                vec![0.5, -0.5, -0.5],
            ],
        );
        let identity = FunctionalMap {
            c: Array2::from_shape_vec(
                (3, 3),
                vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            )
            .unwrap(),
        };
        let map = point_map_functional(&basis, &basis, &identity).unwrap();
        assert_eq!(map.target_index, vec![0, 1, 2, 3]);
    }

    #[test]
    fn transfer_identity_copies_field() {
        let field = AffordanceField {
            heat: vec![0.9f64, 0.1, 0.8, 0.3],
            threshold: 0.5,
            labels: vec![true, false, true, false],
        };
        let map = PointMap {
            target_index: vec![0, 1, 2, 3],
            confidence: vec![1.0; 4],
        };
        let out = transfer_affordance(&map, &field).unwrap();
        assert_eq!(out, field);
    }

    #[test]
    fn transfer_constant_field_stays_constant() {
        let field = AffordanceField {
            heat: vec![0.7f64; 3],
            threshold: 0.5,
            labels: vec![true; 3],
        };
        let map = PointMap {
            target_index: vec![2, 2, 0, 1, 1],
            confidence: vec![1.0; 5],
        };
        let out = transfer_affordance(&map, &field).unwrap();
        assert_eq!(out.heat, vec![0.7; 5]);
        assert!(out.labels.iter().all(|&l| l));
    }

    #[test]
    fn transfer_two_cluster_oracle() {
        // reference: first 5 points heat 1 (cluster A), last 5 heat 0 (B);
        // query points map into their own cluster -> labels follow exactly.
        let field = AffordanceField {
            heat: [vec![1.0f64; 5], vec![0.0f64; 5]].concat(),
            threshold: 0.5,
            labels: [vec![true; 5], vec![false; 5]].concat(),
        };
        let map = PointMap {
            target_index: vec![0, 3, 4, 1, 7, 9, 5, 6],
            confidence: vec![1.0; 8],
        };
        let out = transfer_affordance(&map, &field).unwrap();
        let expect = [true, true, true, true, false, false, false, false];
        assert_eq!(out.labels, expect.to_vec());
    }

    #[test]
    fn transfer_rejects_out_of_bounds() {
        let field = AffordanceField {
            heat: vec![0.5f64],
            threshold: 0.5,
            labels: vec![true],
        };
        let map = PointMap {
            target_index: vec![1],
            confidence: vec![1.0],
        };
        assert!(transfer_affordance(&map, &field).is_err());
    }

    #[test]
    fn sinkhorn_is_generic_over_f32() {
        let (s, _) = noisy_bijection_similarity::<f32>(20, 1);
        let p = sinkhorn_normalize(&s, &SinkhornConfig::default()).unwrap();
        for row in p.rows() {
            let sum: f32 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-5);
        }
    }
}
