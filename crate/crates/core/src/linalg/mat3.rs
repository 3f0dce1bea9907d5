//! Row-major `[[T; 3]; 3]` matrix helpers and rotation constructions.

use crate::linalg::vec3;
use crate::real::{real, Real};

pub type Mat3<T> = [[T; 3]; 3];

#[inline]
pub fn identity<T: Real>() -> Mat3<T> {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

#[inline]
pub fn matvec<T: Real>(m: &Mat3<T>, v: [T; 3]) -> [T; 3] {
    [
        vec3::dot(m[0], v),
        vec3::dot(m[1], v),
        vec3::dot(m[2], v),
    ]
}

#[inline]
pub fn transpose<T: Real>(m: &Mat3<T>) -> Mat3<T> {
    [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ]
}

pub fn matmul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let bt = transpose(b);
    let mut out = [[T::zero(); 3]; 3];
    for (i, row) in a.iter().enumerate() {
        for (j, col) in bt.iter().enumerate() {
            out[i][j] = vec3::dot(*row, *col);
        }
    }
    out
}

pub fn det<T: Real>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Largest absolute deviation of `mᵀm` from the identity.
pub fn orthonormality_defect<T: Real>(m: &Mat3<T>) -> T {
    let g = matmul(&transpose(m), m);
    let mut worst = T::zero();
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((g[i][j] - target).abs());
        }
    }
    worst
}

/// Rodrigues rotation about `axis` (unit) by `angle` radians.
pub fn axis_angle<T: Real>(axis: [T; 3], angle: T) -> Mat3<T> {
    let (s, c) = (angle.sin(), angle.cos());
    let t = T::one() - c;
    let [x, y, z] = axis;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

/// Angle of a rotation matrix, in radians.
pub fn rotation_angle<T: Real>(m: &Mat3<T>) -> T {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let c = ((tr - T::one()) * real(0.5)).max(-T::one()).min(T::one());
    c.acos()
}

/// A coordinate axis least aligned with `v`, for building stable perpendiculars.
fn least_aligned_axis<T: Real>(v: [T; 3]) -> [T; 3] {
    let abs = [v[0].abs(), v[1].abs(), v[2].abs()];
    let mut best = 0;
    if abs[1] < abs[best] {
        best = 1;
    }
    if abs[2] < abs[best] {
        best = 2;
    }
    let mut e = [T::zero(); 3];
    e[best] = T::one();
    e
}

/// Unit vector perpendicular to `v` (deterministic choice).
pub fn any_perpendicular<T: Real>(v: [T; 3]) -> [T; 3] {
    let e = least_aligned_axis(v);
    vec3::normalized(vec3::cross(v, e), T::epsilon()).expect("v must be nonzero")
}

/// Minimal rotation taking unit vector `a` onto unit vector `b`.
///
/// The antipodal case rotates by pi about a deterministic perpendicular
/// (cross of `a` with the coordinate axis least aligned with it).
pub fn rotation_between<T: Real>(a: [T; 3], b: [T; 3]) -> Mat3<T> {
    let c = vec3::dot(a, b).max(-T::one()).min(T::one());
    let one_m = T::one() - c;
    if one_m.abs() <= real::<T>(1e-14) {
        return identity();
    }
    let axis = vec3::cross(a, b);
    let n = vec3::norm(axis);
    if n <= real::<T>(1e-12) {
        // antipodal (c ~ -1): half-turn about a perpendicular
        return axis_angle(any_perpendicular(a), T::from(std::f64::consts::PI).unwrap());
    }
    axis_angle(vec3::scale(axis, T::one() / n), n.atan2(c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_between_maps_a_to_b() {
        let a = vec3::normalized([1.0f64, 2.0, -0.5], 0.0).unwrap();
        let b = vec3::normalized([-0.3, 0.4, 1.0], 0.0).unwrap();
        let r = rotation_between(a, b);
        let ra = matvec(&r, a);
        assert!(vec3::dist(ra, b) < 1e-12);
        assert!((det(&r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_between_antipodal() {
        let a = [0.0f64, 0.0, 1.0];
        let r = rotation_between(a, [0.0, 0.0, -1.0]);
        let ra = matvec(&r, a);
        assert!(vec3::dist(ra, [0.0, 0.0, -1.0]) < 1e-12);
        assert!((det(&r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_angle_preserves_axis() {
        let axis = vec3::normalized([1.0f64, 1.0, 1.0], 0.0).unwrap();
        let r = axis_angle(axis, 1.234);
        assert!(vec3::dist(matvec(&r, axis), axis) < 1e-12);
        assert!((rotation_angle(&r) - 1.234).abs() < 1e-12);
    }
}
