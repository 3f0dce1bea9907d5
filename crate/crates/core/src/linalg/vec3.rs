//! Free functions over `[T; 3]` vectors.

use crate::real::Real;

#[inline]
pub fn add<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Real>(a: [T; 3], s: T) -> [T; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm_sq<T: Real>(a: [T; 3]) -> T {
    dot(a, a)
}

#[inline]
pub fn norm<T: Real>(a: [T; 3]) -> T {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist_sq<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    norm_sq(sub(a, b))
}

#[inline]
pub fn dist<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    dist_sq(a, b).sqrt()
}

/// Unit vector along `a`, or `None` when `a` is shorter than `eps`.
#[inline]
pub fn normalized<T: Real>(a: [T; 3], eps: T) -> Option<[T; 3]> {
    let n = norm(a);
    if n <= eps {
        None
    } else {
        Some(scale(a, T::one() / n))
    }
}

/// Distance from `p` to the segment `a..b`.
pub fn dist_to_segment<T: Real>(p: [T; 3], a: [T; 3], b: [T; 3]) -> T {
    let ab = sub(b, a);
    let len_sq = norm_sq(ab);
    if len_sq <= T::epsilon() {
        return dist(p, a);
    }
    let t = (dot(sub(p, a), ab) / len_sq).max(T::zero()).min(T::one());
    dist(p, add(a, scale(ab, t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_is_right_handed() {
        let c = cross([1.0f64, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert_eq!(c, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn segment_distance_clamps_to_endpoints() {
        let a = [0.0f64, 0.0, 0.0];
        let b = [1.0, 0.0, 0.0];
        assert!((dist_to_segment([2.0, 0.0, 0.0], a, b) - 1.0).abs() < 1e-12);
        assert!((dist_to_segment([0.5, 2.0, 0.0], a, b) - 2.0).abs() < 1e-12);
    }
}
