//! Quickhull in 3D, reduced to what hidden-point removal needs: the set of
//! input indices that are vertices of the convex hull.
//!
//! Degenerate inputs (coincident, collinear, coplanar) fall back to marking
//! every point as a vertex, which is the conservative answer for visibility.

use std::collections::HashSet;

use crate::linalg::vec3;
use crate::real::{real, Real};

struct Face<T> {
    verts: [usize; 3],
    normal: [T; 3],
    offset: T,
    outside: Vec<usize>,
    alive: bool,
}

impl<T: Real> Face<T> {
    fn new(a: usize, b: usize, c: usize, pts: &[[T; 3]]) -> Option<Self> {
        let n = vec3::cross(vec3::sub(pts[b], pts[a]), vec3::sub(pts[c], pts[a]));
        let len = vec3::norm(n);
        if len <= T::epsilon() {
            return None;
        }
        let normal = vec3::scale(n, T::one() / len);
        Some(Self {
            verts: [a, b, c],
            normal,
            offset: vec3::dot(normal, pts[a]),
            outside: Vec::new(),
            alive: true,
        })
    }

    #[inline]
    fn dist(&self, p: [T; 3]) -> T {
        vec3::dot(self.normal, p) - self.offset
    }
}

/// Indices of points on the convex hull of `points`.
pub fn hull_vertices<T: Real>(points: &[[T; 3]]) -> HashSet<usize> {
    let n = points.len();
    let all = || (0..n).collect::<HashSet<usize>>();
    if n <= 4 {
        return all();
    }

    let scale = points
        .iter()
        .flat_map(|p| p.iter())
        .fold(T::zero(), |acc, &x| acc.max(x.abs()));
    let eps = scale.max(T::one()) * T::epsilon() * real::<T>(64.0);

    let Some([i0, i1, i2, i3]) = initial_tetrahedron(points, eps) else {
        return all();
    };

    // interior reference point for outward orientation
    let mut interior = [T::zero(); 3];
    for &i in &[i0, i1, i2, i3] {
        interior = vec3::add(interior, points[i]);
    }
    interior = vec3::scale(interior, real(0.25));

    let mut faces: Vec<Face<T>> = Vec::new();
    for tri in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        let mut f = match Face::new(tri[0], tri[1], tri[2], points) {
            Some(f) => f,
            None => return all(),
        };
        if f.dist(interior) > T::zero() {
            f.verts.swap(1, 2);
            f.normal = vec3::scale(f.normal, -T::one());
            f.offset = -f.offset;
        }
        faces.push(f);
    }

    // initial outside sets
    let corners = [i0, i1, i2, i3];
    for p in 0..n {
        if corners.contains(&p) {
            continue;
        }
        for f in faces.iter_mut() {
            if f.dist(points[p]) > eps {
                f.outside.push(p);
                break;
            }
        }
    }

    let max_rounds = 16 * n + 64;
    for _ in 0..max_rounds {
        let Some(fi) = faces.iter().position(|f| f.alive && !f.outside.is_empty()) else {
            break; // done
        };
        // farthest outside point of that face
        let apex = *faces[fi]
            .outside
            .iter()
            .max_by(|&&a, &&b| {
                faces[fi]
                    .dist(points[a])
                    .partial_cmp(&faces[fi].dist(points[b]))
                    .unwrap()
            })
            .unwrap();
        let apex_pt = points[apex];

        // all faces visible from the apex
        let visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive && f.dist(apex_pt) > eps)
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            // apex no longer outside anything (roundoff); drop it
            faces[fi].outside.retain(|&p| p != apex);
            continue;
        }

        // horizon = directed edges of visible faces whose twin is not visible
        let mut edge_count: std::collections::HashMap<(usize, usize), i32> =
            std::collections::HashMap::new();
        for &vf in &visible {
            let [a, b, c] = faces[vf].verts;
            for (u, v) in [(a, b), (b, c), (c, a)] {
                let key = (u.min(v), u.max(v));
                *edge_count.entry(key).or_insert(0) += 1;
            }
        }
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        for &vf in &visible {
            let [a, b, c] = faces[vf].verts;
            for (u, v) in [(a, b), (b, c), (c, a)] {
                if edge_count[&(u.min(v), u.max(v))] == 1 {
                    horizon.push((u, v));
                }
            }
        }

        // orphaned points from the faces we are about to remove
        let mut orphans: Vec<usize> = Vec::new();
        for &vf in &visible {
            orphans.extend(faces[vf].outside.iter().copied().filter(|&p| p != apex));
            faces[vf].alive = false;
            faces[vf].outside.clear();
        }

        // fan of new faces over the horizon
        let mut new_faces: Vec<usize> = Vec::new();
        for (u, v) in horizon {
            let mut f = match Face::new(u, v, apex, points) {
                Some(f) => f,
                None => continue, // degenerate sliver; neighbors cover it
            };
            if f.dist(interior) > T::zero() {
                f.verts.swap(1, 2);
                f.normal = vec3::scale(f.normal, -T::one());
                f.offset = -f.offset;
            }
            faces.push(f);
            new_faces.push(faces.len() - 1);
        }
        for p in orphans {
            for &nf in &new_faces {
                if faces[nf].dist(points[p]) > eps {
                    faces[nf].outside.push(p);
                    break;
                }
            }
        }
    }

    let mut verts = HashSet::new();
    for f in faces.iter().filter(|f| f.alive) {
        verts.extend(f.verts);
    }
    verts
}

/// Four affinely independent seed points, or `None` when the input is
/// degenerate at tolerance `eps`.
fn initial_tetrahedron<T: Real>(points: &[[T; 3]], eps: T) -> Option<[usize; 4]> {
    let mut i0 = 0;
    let mut i1 = 0;
    for axis in 0..3 {
        let lo = (0..points.len())
            .min_by(|&a, &b| points[a][axis].partial_cmp(&points[b][axis]).unwrap())?;
        let hi = (0..points.len())
            .max_by(|&a, &b| points[a][axis].partial_cmp(&points[b][axis]).unwrap())?;
        if points[hi][axis] - points[lo][axis] > eps {
            i0 = lo;
            i1 = hi;
            break;
        }
        if axis == 2 {
            return None; // all points coincident
        }
    }

    let dir = vec3::normalized(vec3::sub(points[i1], points[i0]), eps)?;
    let line_dist = |p: [T; 3]| {
        let d = vec3::sub(p, points[i0]);
        vec3::norm(vec3::sub(d, vec3::scale(dir, vec3::dot(d, dir))))
    };
    let i2 = (0..points.len()).max_by(|&a, &b| {
        line_dist(points[a]).partial_cmp(&line_dist(points[b])).unwrap()
    })?;
    if line_dist(points[i2]) <= eps {
        return None; // collinear
    }

    let nrm = vec3::normalized(
        vec3::cross(
            vec3::sub(points[i1], points[i0]),
            vec3::sub(points[i2], points[i0]),
        ),
        eps,
    )?;
    let plane_dist = |p: [T; 3]| vec3::dot(nrm, vec3::sub(p, points[i0])).abs();
    let i3 = (0..points.len()).max_by(|&a, &b| {
        plane_dist(points[a]).partial_cmp(&plane_dist(points[b])).unwrap()
    })?;
    if plane_dist(points[i3]) <= eps {
        return None; // coplanar
    }
    Some([i0, i1, i2, i3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cube_corners_are_the_hull() {
        let mut pts: Vec<[f64; 3]> = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push([x, y, z]);
                }
            }
        }
        // interior points must not appear
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            pts.push([
                rng.random_range(0.2..0.8),
                rng.random_range(0.2..0.8),
                rng.random_range(0.2..0.8),
            ]);
        }
        let verts = hull_vertices(&pts);
        for i in 0..8 {
            assert!(verts.contains(&i), "cube corner {i} missing from hull");
        }
        for i in 8..pts.len() {
            assert!(!verts.contains(&i), "interior point {i} on hull");
        }
    }

    #[test]
    fn sphere_points_are_all_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pts = Vec::new();
        for _ in 0..300 {
            let g = [
                rng.random_range(-1.0..1.0f64),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            if n > 1e-6 {
                pts.push([g[0] / n, g[1] / n, g[2] / n]);
            }
        }
        let verts = hull_vertices(&pts);
        assert_eq!(verts.len(), pts.len(), "every sphere point is extremal");
    }

    #[test]
    fn degenerate_plane_falls_back_to_all() {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push([i as f64, j as f64, 0.0]);
            }
        }
        let verts = hull_vertices(&pts);
        assert_eq!(verts.len(), pts.len());
    }
}
