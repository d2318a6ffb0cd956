//! Exact polytope meshes from half-space sets, without iso-surfacing.
//!
//! Pipeline per element: find a strictly interior point, move it to the
//! origin, map every plane `n . x = -d` (with `d < 0`) to the dual point
//! `n / -d`, take the convex hull of the dual points, map every dual facet
//! `u . y = e` back to the primal vertex `u / e`, and hull those vertices.
//! Dual points strictly inside the dual hull are redundant planes. The
//! polytope is bounded exactly when the dual hull contains the origin
//! strictly, i.e. every dual facet has `e > 0`.

use rayon::prelude::*;

use crate::geometry::{ConvexElement, Decomposition, Hyperplane, Point};
use crate::hull::{convex_hull, HullResult};
use crate::losses::center_offsets_closed_form;
use crate::mesh::{Polygon, TriMesh};
use crate::{Error, Result};

const INTERIOR_ITERS: usize = 4000;
const INTERIOR_MARGIN: f64 = 1e-6;
const MERGE_RADIUS: f64 = 1e-7;

fn max_violation<const D: usize>(planes: &[Hyperplane<D>], normals: &[Point<D>], x: &Point<D>) -> (usize, f64) {
    normals
        .iter()
        .zip(planes)
        .map(|(n, p)| n.dot(x) + p.offset)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

/// A point strictly inside all half-spaces, as deep as damped subgradient
/// descent on `max_h H_h` can reach from the least-squares center.
///
/// Fails with [`Error::InfeasibleInterior`] when the best point found is not
/// at least `1e-6 * scale` inside, where `scale` is the largest plane offset
/// or plane distance from the starting point.
pub fn interior_point<const D: usize>(planes: &[Hyperplane<D>]) -> Result<Point<D>> {
    if planes.is_empty() {
        return Err(Error::InfeasibleInterior);
    }
    let normals: Vec<Point<D>> = planes.iter().map(|p| p.normal()).collect();
    let start = center_offsets_closed_form(planes);
    // the start may sit on a vertex where every plane is tight
    let scale = normals
        .iter()
        .zip(planes)
        .map(|(n, p)| (n.dot(&start) + p.offset).abs().max(p.offset.abs()))
        .fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InfeasibleInterior);
    }
    let margin = INTERIOR_MARGIN * scale;
    let step0 = 0.1 * scale;
    let mut x = start;
    let (mut best_x, mut best) = (x, max_violation(planes, &normals, &x).1);
    for t in 0..INTERIOR_ITERS {
        let (j, _) = max_violation(planes, &normals, &x);
        x -= normals[j] * (step0 / ((t + 1) as f64).sqrt());
        let v = max_violation(planes, &normals, &x).1;
        if v < best {
            best = v;
            best_x = x;
        }
    }
    if best < -margin {
        Ok(best_x)
    } else {
        Err(Error::InfeasibleInterior)
    }
}

/// Dual points `n_h / -d'_h` with `d'_h = d_h + n_h . p`.
pub fn dualize<const D: usize>(planes: &[Hyperplane<D>], p: &Point<D>) -> Result<Vec<Point<D>>> {
    planes
        .iter()
        .map(|plane| {
            let q = plane.recentered(p);
            if !(q.offset < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "point is not strictly inside plane (shifted offset {})",
                    q.offset
                )));
            }
            Ok(q.normal_raw / -q.offset)
        })
        .collect()
}

/// Vertices of the hard polytope of `planes` in the frame they are expressed
/// in, before the final hull.
pub fn polytope_vertices<const D: usize>(planes: &[Hyperplane<D>]) -> Result<Vec<Point<D>>> {
    if planes.len() < D + 1 {
        return Err(Error::Unbounded);
    }
    let p = interior_point(planes)?;
    let duals = dualize(planes, &p)?;
    let dual_hull = match convex_hull(&duals) {
        Ok(h) => h,
        // dual points spanning a lower-dimensional set leave directions unbounded
        Err(Error::DegenerateHull(_)) => return Err(Error::Unbounded),
        Err(e) => return Err(e),
    };
    let mut vertices = Vec::with_capacity(dual_hull.facets.len());
    for f in &dual_hull.facets {
        if f.offset <= dual_hull.tolerance {
            return Err(Error::Unbounded);
        }
        vertices.push(f.normal / f.offset + p);
    }
    Ok(merge_close(vertices))
}

fn merge_close<const D: usize>(points: Vec<Point<D>>) -> Vec<Point<D>> {
    let Some(bbox) = crate::sampling::Aabb::from_points(&points) else {
        return points;
    };
    let r = MERGE_RADIUS * bbox.diagonal();
    let mut out: Vec<Point<D>> = Vec::with_capacity(points.len());
    for p in points {
        if !out.iter().any(|q| (q - p).norm() <= r) {
            out.push(p);
        }
    }
    out
}

fn primal_hull<const D: usize>(e: &ConvexElement<D>) -> Result<HullResult<D>> {
    let mut vertices = polytope_vertices(&e.planes)?;
    for v in &mut vertices {
        *v += e.translation;
    }
    convex_hull(&vertices)
}

/// Exact triangle mesh of a 3D element's hard polytope, in world coordinates.
pub fn planes_to_mesh(e: &ConvexElement<3>) -> Result<TriMesh> {
    Ok(primal_hull(e)?.to_mesh())
}

/// Exact counter-clockwise polygon of a 2D element's hard polytope.
pub fn planes_to_polygon(e: &ConvexElement<2>) -> Result<Polygon> {
    Ok(primal_hull(e)?.to_polygon())
}

/// Why an element produced no mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneWarning {
    pub element: usize,
    pub reason: String,
}

impl std::fmt::Display for PruneWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "convex {} skipped: {}", self.element, self.reason)
    }
}

#[derive(Debug, Clone)]
pub struct Extracted<T> {
    /// `(element index, shape)` for every kept element, in element order.
    pub shapes: Vec<(usize, T)>,
    pub warnings: Vec<PruneWarning>,
}

impl<T> Extracted<T> {
    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }
}

fn extract_all<const D: usize, T: Send>(
    dec: &Decomposition<D>,
    prune_epsilon: f64,
    one: impl Fn(&ConvexElement<D>) -> Result<T> + Sync,
    measure: impl Fn(&T) -> f64 + Sync,
) -> Extracted<T> {
    let results: Vec<Result<T>> = dec.elements.par_iter().map(|e| one(e)).collect();
    let mut out = Extracted {
        shapes: Vec::new(),
        warnings: Vec::new(),
    };
    for (k, r) in results.into_iter().enumerate() {
        let reason = match r {
            Ok(shape) => {
                let size = measure(&shape);
                if size >= prune_epsilon {
                    out.shapes.push((k, shape));
                    continue;
                }
                format!("volume {size:.3e} below {prune_epsilon:.3e}")
            }
            Err(e) => e.to_string(),
        };
        let w = PruneWarning { element: k, reason };
        log::warn!("{w}");
        out.warnings.push(w);
    }
    out
}

/// Meshes of every usable element. Unbounded, infeasible or degenerate
/// elements, and those with volume below `prune_epsilon`, are skipped with a
/// warning.
pub fn decomposition_to_meshes(dec: &Decomposition<3>, prune_epsilon: f64) -> Extracted<TriMesh> {
    extract_all(dec, prune_epsilon, planes_to_mesh, |m| m.signed_volume())
}

/// 2D counterpart of [`decomposition_to_meshes`]; the size measure is area.
pub fn decomposition_to_polygons(dec: &Decomposition<2>, prune_epsilon: f64) -> Extracted<Polygon> {
    extract_all(dec, prune_epsilon, planes_to_polygon, |p| p.signed_area())
}

/// Concatenation of meshes into one vertex/triangle list.
pub fn union_mesh<'a>(meshes: impl IntoIterator<Item = &'a TriMesh>) -> TriMesh {
    let mut out = TriMesh::default();
    for m in meshes {
        out.append(m);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn unit_cube() -> ConvexElement<3> {
        ConvexElement::axis_box(Point::zeros(), Point::repeat(0.5), 10.0)
    }

    #[test]
    fn interior_point_examples() {
        let p = interior_point(&unit_cube().planes).unwrap();
        assert!(unit_cube().hard_sdf(&p) <= -0.4);
        let slab = [
            Hyperplane::new(Point::<3>::x(), -0.3),
            Hyperplane::new(-Point::<3>::x(), -0.7),
        ];
        let q = interior_point(&slab).unwrap();
        assert!(slab.iter().all(|h| h.signed_distance(&q) < 0.0));
        let empty = [
            Hyperplane::new(Point::<3>::x(), 1.0),
            Hyperplane::new(-Point::<3>::x(), 1.0),
        ];
        assert!(matches!(interior_point(&empty), Err(Error::InfeasibleInterior)));
    }

    #[test]
    fn interior_point_from_outside_start() {
        // least-squares center is far from this thin wedge's interior
        let planes = [
            Hyperplane::new(Point::<3>::new(1.0, 0.0, 0.0), -5.0),
            Hyperplane::new(Point::<3>::new(-1.0, 0.0, 0.0), 4.9),
            Hyperplane::new(Point::<3>::new(0.0, 1.0, 0.0), -1.0),
            Hyperplane::new(Point::<3>::new(0.0, -1.0, 0.0), -1.0),
            Hyperplane::new(Point::<3>::new(0.0, 0.0, 1.0), -1.0),
            Hyperplane::new(Point::<3>::new(0.0, 0.0, -1.0), -1.0),
        ];
        let p = interior_point(&planes).unwrap();
        assert!(planes.iter().all(|h| h.signed_distance(&p) < 0.0), "{p:?}");
    }

    #[test]
    fn dualize_examples() {
        let q = dualize(&[Hyperplane::new(Point::<3>::x(), -0.5)], &Point::zeros()).unwrap();
        assert_eq!(q[0], Point::<3>::new(2.0, 0.0, 0.0));
        let q = dualize(&[Hyperplane::new(Point::<3>::y(), -1.0)], &Point::zeros()).unwrap();
        assert_eq!(q[0], Point::<3>::new(0.0, 1.0, 0.0));
        let q = dualize(&unit_cube().planes, &Point::zeros()).unwrap();
        for (a, p) in q.iter().enumerate() {
            assert_eq!(p.norm(), 2.0, "{a}");
            assert_eq!(p.iter().filter(|v| **v == 0.0).count(), 2);
        }
        assert!(dualize(&[Hyperplane::new(Point::<3>::x(), 0.5)], &Point::zeros()).is_err());
    }

    #[test]
    fn cube_mesh_is_exact() {
        let m = planes_to_mesh(&unit_cube()).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.triangles.len(), 12);
        for v in &m.vertices {
            for a in 0..3 {
                assert!((v[a].abs() - 0.5).abs() < 1e-9);
            }
        }
        assert!((m.signed_volume() - 1.0).abs() < 1e-12);
        assert!(m.is_watertight());
    }

    #[test]
    fn translated_cube_lands_at_translation() {
        let c = Point::<3>::new(1.0, -2.0, 0.5);
        let e = ConvexElement::axis_box(c, Point::repeat(0.5), 10.0);
        let m = planes_to_mesh(&e).unwrap();
        let centroid = m.vertices.iter().sum::<Point<3>>() / m.vertices.len() as f64;
        assert!((centroid - c).norm() < 1e-9);
        for v in &m.vertices {
            assert!(e.hard_sdf(v).abs() < 1e-9);
        }
    }

    /// Brute-force vertex enumeration: every plane triple whose intersection
    /// satisfies all constraints.
    fn brute_vertices(planes: &[Hyperplane<3>]) -> Vec<Point<3>> {
        let mut out: Vec<Point<3>> = Vec::new();
        let h = planes.len();
        for i in 0..h {
            for j in i + 1..h {
                for k in j + 1..h {
                    let rows = [planes[i].normal(), planes[j].normal(), planes[k].normal()];
                    let m = nalgebra::Matrix3::from_rows(&rows.map(|r| r.transpose()));
                    let b = nalgebra::Vector3::new(-planes[i].offset, -planes[j].offset, -planes[k].offset);
                    let Some(x) = m.lu().solve(&b) else { continue };
                    if planes.iter().all(|p| p.signed_distance(&x) <= 1e-9)
                        && !out.iter().any(|q| (q - x).norm() < 1e-7)
                    {
                        out.push(x);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn tetrahedron_matches_brute_force() {
        let normals = [
            Point::<3>::new(1.0, 1.0, 1.0),
            Point::<3>::new(1.0, -1.0, -1.0),
            Point::<3>::new(-1.0, 1.0, -1.0),
            Point::<3>::new(-1.0, -1.0, 1.0),
        ];
        let planes: Vec<_> = normals.iter().map(|n| Hyperplane::new(*n, -0.5)).collect();
        let m = planes_to_mesh(&ConvexElement::new(planes.clone(), 10.0, Point::zeros())).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.triangles.len(), 4);
        let brute = brute_vertices(&planes);
        assert_eq!(brute.len(), 4);
        for v in &m.vertices {
            assert!(brute.iter().any(|b| (b - v).norm() < 1e-9));
        }
    }

    fn random_bounded(rng: &mut impl Rng, h: usize) -> ConvexElement<3> {
        loop {
            let planes: Vec<_> = (0..h)
                .map(|_| {
                    let n = Point::<3>::from_fn(|_, _| StandardNormal.sample(rng));
                    Hyperplane::new(n, -rng.random_range(0.2..1.0))
                })
                .collect();
            let e = ConvexElement::new(planes, 10.0, Point::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            if planes_to_mesh(&e).is_ok() {
                return e;
            }
        }
    }

    #[test]
    fn random_polytopes_agree_with_brute_force() {
        let mut rng = crate::sampling::rng_from_seed(21);
        for _ in 0..30 {
            let h = rng.random_range(6..16);
            let e = random_bounded(&mut rng, h);
            let m = planes_to_mesh(&e).unwrap();
            assert!(m.is_watertight());
            assert!(m.signed_volume() > 0.0);
            let local: Vec<_> = e.world_planes();
            let brute = brute_vertices(&local);
            assert_eq!(m.vertices.len(), brute.len());
            for v in &m.vertices {
                assert!(e.hard_sdf(v) <= 1e-9);
                assert!(brute.iter().any(|b| (b - v).norm() < 1e-7));
            }
        }
    }

    #[test]
    fn redundant_plane_does_not_change_vertices() {
        let mut e = unit_cube();
        let before = planes_to_mesh(&e).unwrap();
        e.planes.push(Hyperplane::new(Point::<3>::new(1.0, 1.0, 1.0), -2.0));
        let after = planes_to_mesh(&e).unwrap();
        assert_eq!(before.vertices.len(), after.vertices.len());
        for v in &after.vertices {
            assert!(before.vertices.iter().any(|b| (b - v).norm() < 1e-9));
        }
    }

    #[test]
    fn unbounded_cases() {
        let three = ConvexElement::new(unit_cube().planes[..3].to_vec(), 10.0, Point::zeros());
        assert!(matches!(planes_to_mesh(&three), Err(Error::Unbounded)));
        // open in +z: five faces of a cube
        let five = ConvexElement::new(
            unit_cube().planes.into_iter().filter(|p| p.normal_raw.z <= 0.0).collect(),
            10.0,
            Point::zeros(),
        );
        assert!(matches!(planes_to_mesh(&five), Err(Error::Unbounded)));
        // four planes, all normals in a half-space
        let cone = ConvexElement::new(
            vec![
                Hyperplane::new(Point::<3>::new(1.0, 0.0, 1.0), -1.0),
                Hyperplane::new(Point::<3>::new(-1.0, 0.0, 1.0), -1.0),
                Hyperplane::new(Point::<3>::new(0.0, 1.0, 1.0), -1.0),
                Hyperplane::new(Point::<3>::new(0.0, -1.0, 1.0), -1.0),
            ],
            10.0,
            Point::zeros(),
        );
        assert!(matches!(planes_to_mesh(&cone), Err(Error::Unbounded)));
    }

    #[test]
    fn decomposition_prunes_collapsed_element() {
        let mut collapsed = unit_cube();
        for p in &mut collapsed.planes {
            p.offset = 0.0;
        }
        let dec = Decomposition::new(vec![unit_cube(), collapsed], 75.0);
        let out = decomposition_to_meshes(&dec, 1e-9);
        assert_eq!(out.shapes.len(), 1);
        assert_eq!(out.shapes[0].0, 0);
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.warnings[0].element, 1);
        let tiny = Decomposition::new(vec![ConvexElement::axis_box(Point::zeros(), Point::repeat(1e-3), 10.0)], 75.0);
        assert_eq!(decomposition_to_meshes(&tiny, 1e-6).warnings.len(), 1);
    }

    #[test]
    fn square_polygon() {
        let e = ConvexElement::axis_box(Point::<2>::new(0.25, 0.0), Point::<2>::new(0.5, 0.25), 10.0);
        let poly = planes_to_polygon(&e).unwrap();
        assert_eq!(poly.vertices.len(), 4);
        assert!((poly.signed_area() - 0.5).abs() < 1e-12);
        for v in &poly.vertices {
            assert!(e.hard_sdf(v).abs() < 1e-12);
        }
        let open = ConvexElement::new(e.planes[..2].to_vec(), 10.0, Point::zeros());
        assert!(matches!(planes_to_polygon(&open), Err(Error::Unbounded)));
    }
}
