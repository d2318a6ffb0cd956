//! Triangle meshes and 2D polygons with the I/O the tools need.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::geometry::Point;
use crate::sampling::rng_from_seed;
use crate::{Error, Result};

/// Indexed triangle mesh with counter-clockwise (outward) winding.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point<3>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point<3>>, triangles: Vec<[usize; 3]>) -> Self {
        Self { vertices, triangles }
    }

    pub fn corners(&self, t: usize) -> [Point<3>; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Enclosed volume via the divergence theorem; positive for outward winding.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])) / 6.0
            })
            .sum()
    }

    /// Undirected edges that are not shared by exactly two triangles.
    pub fn open_edges(&self) -> Vec<[usize; 2]> {
        let mut count: HashMap<[usize; 2], usize> = HashMap::new();
        for &[a, b, c] in &self.triangles {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                *count.entry([u.min(v), u.max(v)]).or_default() += 1;
            }
        }
        let mut open: Vec<_> = count.into_iter().filter(|(_, n)| *n != 2).map(|(e, _)| e).collect();
        open.sort_unstable();
        open
    }

    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.open_edges().is_empty()
    }

    pub fn flip(&mut self) {
        for t in &mut self.triangles {
            t.swap(1, 2);
        }
    }

    /// Appends `other`, offsetting its indices.
    pub fn append(&mut self, other: &TriMesh) {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|i| i + base)));
    }

    pub fn translate(&mut self, by: &Point<3>) {
        for v in &mut self.vertices {
            *v += by;
        }
    }

    /// `n` area-weighted uniform surface samples, deterministic per seed.
    pub fn surface_samples(&self, n: usize, seed: u64) -> Result<Vec<Point<3>>> {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = (0..self.triangles.len())
            .map(|t| {
                acc += self.triangle_area(t);
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::ZeroArea);
        }
        let mut rng = rng_from_seed(seed);
        Ok((0..n)
            .map(|_| {
                let pick = rng.random::<f64>() * acc;
                let t = cumulative.partition_point(|&c| c <= pick).min(cumulative.len() - 1);
                let [a, b, c] = self.corners(t);
                let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                a + (b - a) * u + (c - a) * v
            })
            .collect())
    }

    /// Ray-parity inside test. The ray direction is a fixed irrational mix;
    /// hits too close to an edge or vertex trigger a retry with a perturbed
    /// direction, and coincident hits are counted once.
    pub fn contains(&self, p: &Point<3>) -> bool {
        const DIRECTIONS: [[f64; 3]; 4] = [
            [0.577_350_269, 0.707_106_781, 0.408_248_290],
            [-0.267_261_242, 0.534_522_484, 0.801_783_726],
            [0.801_783_726, -0.267_261_242, 0.534_522_484],
            [0.408_248_290, 0.408_248_290, -0.816_496_581],
        ];
        let mut last = false;
        for dir in DIRECTIONS {
            match self.parity_along(p, &Point::from(dir).normalize()) {
                Some(inside) => return inside,
                None => last = self.parity_along_unchecked(p, &Point::from(dir).normalize()),
            }
        }
        last
    }

    fn parity_along(&self, origin: &Point<3>, dir: &Point<3>) -> Option<bool> {
        let mut hits: Vec<f64> = Vec::new();
        for t in 0..self.triangles.len() {
            match ray_triangle(origin, dir, &self.corners(t)) {
                RayHit::Miss => {}
                RayHit::Hit(s) => hits.push(s),
                RayHit::Degenerate => return None,
            }
        }
        Some(count_unique(&mut hits) % 2 == 1)
    }

    fn parity_along_unchecked(&self, origin: &Point<3>, dir: &Point<3>) -> bool {
        let mut hits: Vec<f64> = (0..self.triangles.len())
            .filter_map(|t| match ray_triangle(origin, dir, &self.corners(t)) {
                RayHit::Hit(s) => Some(s),
                _ => None,
            })
            .collect();
        count_unique(&mut hits) % 2 == 1
    }

    /// Parses the `v` and `f` records of an ASCII OBJ, fan-triangulating polygons.
    pub fn parse_obj(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let err = |m: String| Error::parse("OBJ", format!("line {}: {m}", lineno + 1));
            let mut tok = line.split_whitespace();
            match tok.next() {
                Some("v") => {
                    let c: Vec<f64> = tok
                        .take(3)
                        .map(|t| t.parse().map_err(|_| err(format!("bad coordinate {t:?}"))))
                        .collect::<Result<_>>()?;
                    if c.len() != 3 {
                        return Err(err("vertex needs 3 coordinates".into()));
                    }
                    vertices.push(Point::<3>::new(c[0], c[1], c[2]));
                }
                Some("f") => {
                    let idx: Vec<usize> = tok
                        .map(|t| {
                            let first = t.split('/').next().unwrap_or("");
                            let i: i64 = first.parse().map_err(|_| err(format!("bad index {t:?}")))?;
                            let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                            if resolved < 0 || resolved >= vertices.len() as i64 {
                                return Err(err(format!("index {i} out of range")));
                            }
                            Ok(resolved as usize)
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() < 3 {
                        return Err(err("face needs at least 3 vertices".into()));
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Ok(Self::new(vertices, triangles))
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }

    pub fn read_obj(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_obj(&text)
    }

    pub fn write_obj(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_obj()).map_err(|e| Error::io(path, e))
    }

    /// Axis-aligned box, 12 outward triangles.
    pub fn cuboid(min: Point<3>, max: Point<3>) -> Self {
        let v = (0..8)
            .map(|i| {
                Point::<3>::new(
                    if i & 1 == 0 { min.x } else { max.x },
                    if i & 2 == 0 { min.y } else { max.y },
                    if i & 4 == 0 { min.z } else { max.z },
                )
            })
            .collect();
        let t = vec![
            [0, 2, 1], [1, 2, 3], // z min
            [4, 5, 6], [5, 7, 6], // z max
            [0, 1, 4], [1, 5, 4], // y min
            [2, 6, 3], [3, 6, 7], // y max
            [0, 4, 2], [2, 4, 6], // x min
            [1, 3, 5], [3, 7, 5], // x max
        ];
        Self::new(v, t)
    }
}

enum RayHit {
    Miss,
    Hit(f64),
    Degenerate,
}

fn ray_triangle(origin: &Point<3>, dir: &Point<3>, tri: &[Point<3>; 3]) -> RayHit {
    const EPS: f64 = 1e-10;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let scale = e1.norm().max(e2.norm()).max(1e-300);
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    let s = origin - tri[0];
    if det.abs() < EPS * scale * scale {
        // ray parallel to the plane; only a problem if it lies in it
        let n = e1.cross(&e2);
        return if n.norm() > 0.0 && (s.dot(&n) / n.norm()).abs() < EPS * scale {
            RayHit::Degenerate
        } else {
            RayHit::Miss
        };
    }
    let inv = 1.0 / det;
    let u = s.dot(&pvec) * inv;
    let qvec = s.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    let t = e2.dot(&qvec) * inv;
    let w = 1.0 - u - v;
    if u < -EPS || v < -EPS || w < -EPS || t < -EPS * scale {
        return RayHit::Miss;
    }
    if u < EPS || v < EPS || w < EPS || t.abs() <= EPS * scale {
        return RayHit::Degenerate;
    }
    RayHit::Hit(t)
}

fn count_unique(hits: &mut [f64]) -> usize {
    hits.sort_by(f64::total_cmp);
    let mut n = 0;
    let mut last = f64::NEG_INFINITY;
    for &h in hits.iter() {
        if h - last > 1e-12 * h.abs().max(1.0) {
            n += 1;
            last = h;
        }
    }
    n
}

/// Closed polygon with counter-clockwise vertices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Point<2>>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point<2>>) -> Self {
        Self { vertices }
    }

    fn edges(&self) -> impl Iterator<Item = (Point<2>, Point<2>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area; positive for counter-clockwise order.
    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.x * b.y - b.x * a.y).sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: &Point<2>) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn translate(&mut self, by: &Point<2>) {
        for v in &mut self.vertices {
            *v += by;
        }
    }

    /// `n` length-weighted uniform samples on the boundary.
    pub fn boundary_samples(&self, n: usize, seed: u64) -> Result<Vec<Point<2>>> {
        segment_samples(&self.edges().collect::<Vec<_>>(), n, seed)
    }

    pub fn svg_path(&self) -> String {
        let mut d = String::new();
        for (i, v) in self.vertices.iter().enumerate() {
            // SVG's y axis points down
            let _ = write!(d, "{}{} {} ", if i == 0 { "M" } else { "L" }, v.x, -v.y);
        }
        d.push('Z');
        d
    }
}

/// Length-weighted boundary samples over several polygons at once.
pub fn polygons_boundary_samples(polygons: &[Polygon], n: usize, seed: u64) -> Result<Vec<Point<2>>> {
    let edges: Vec<_> = polygons.iter().flat_map(|p| p.edges()).collect();
    segment_samples(&edges, n, seed)
}

fn segment_samples(edges: &[(Point<2>, Point<2>)], n: usize, seed: u64) -> Result<Vec<Point<2>>> {
    let mut acc = 0.0;
    let cumulative: Vec<f64> = edges
        .iter()
        .map(|(a, b)| {
            acc += (b - a).norm();
            acc
        })
        .collect();
    if !(acc > 0.0) {
        return Err(Error::ZeroArea);
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..n)
        .map(|_| {
            let pick = rng.random::<f64>() * acc;
            let i = cumulative.partition_point(|&c| c <= pick).min(edges.len() - 1);
            let (a, b) = edges[i];
            a + (b - a) * rng.random::<f64>()
        })
        .collect())
}

/// An SVG document with one filled path per polygon.
pub fn polygons_to_svg(polygons: &[Polygon], view_min: Point<2>, view_max: Point<2>) -> String {
    let size = view_max - view_min;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">\n",
        view_min.x, -view_max.y, size.x, size.y
    );
    for p in polygons {
        let _ = writeln!(
            out,
            "  <path d=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"{}\"/>",
            p.svg_path(),
            size.max() * 2e-3
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_cube() -> TriMesh {
        TriMesh::cuboid(Point::repeat(-0.5), Point::repeat(0.5))
    }

    #[test]
    fn cube_properties() {
        let m = unit_cube();
        assert!(m.is_watertight());
        assert_abs_diff_eq!(m.signed_volume(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.area(), 6.0, epsilon = 1e-15);
    }

    #[test]
    fn obj_round_trip_and_quads() {
        let m = unit_cube();
        assert_eq!(TriMesh::parse_obj(&m.to_obj()).unwrap(), m);
        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 -1\n";
        let q = TriMesh::parse_obj(quad).unwrap();
        assert_eq!(q.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(!q.is_watertight());
        assert!(TriMesh::parse_obj("v 0 0\n").is_err());
        assert!(TriMesh::parse_obj("v 0 0 0\nf 1 2 3\n").is_err());
    }

    #[test]
    fn parity_matches_box() {
        let m = unit_cube();
        let mut rng = rng_from_seed(4);
        for _ in 0..2000 {
            let p = Point::<3>::from_fn(|_, _| rng.random::<f64>() * 2.0 - 1.0);
            let truth = p.iter().all(|c| c.abs() < 0.5);
            assert_eq!(m.contains(&p), truth, "{p:?}");
        }
        // a point whose default ray would graze an edge still resolves
        assert!(m.contains(&Point::<3>::new(0.0, 0.0, 0.0)));
    }

    #[test]
    fn surface_samples_per_face() {
        let m = unit_cube();
        let n = 200_000;
        let pts = m.surface_samples(n, 1).unwrap();
        let mut counts = [0usize; 6];
        for p in &pts {
            let axis = (0..3).max_by(|&a, &b| p[a].abs().total_cmp(&p[b].abs())).unwrap();
            counts[2 * axis + usize::from(p[axis] < 0.0)] += 1;
        }
        for c in counts {
            let frac = c as f64 / n as f64;
            assert!((frac * 6.0 - 1.0).abs() < 0.02, "{frac}");
        }
        assert_eq!(m.surface_samples(1, 0).unwrap().len(), 1);
        let flat = TriMesh::new(vec![Point::zeros(); 3], vec![[0, 1, 2]]);
        assert!(matches!(flat.surface_samples(5, 0), Err(Error::ZeroArea)));
    }

    #[test]
    fn polygon_basics() {
        let sq = Polygon::new(vec![
            Point::<2>::new(-0.5, -0.5),
            Point::<2>::new(0.5, -0.5),
            Point::<2>::new(0.5, 0.5),
            Point::<2>::new(-0.5, 0.5),
        ]);
        assert_abs_diff_eq!(sq.signed_area(), 1.0);
        assert_abs_diff_eq!(sq.perimeter(), 4.0);
        assert!(sq.contains(&Point::<2>::new(0.1, 0.2)));
        assert!(!sq.contains(&Point::<2>::new(0.6, 0.2)));
        assert!(sq.svg_path().starts_with("M-0.5 0.5 L"));
        let b = sq.boundary_samples(100, 0).unwrap();
        assert!(b.iter().all(|p| (p.x.abs().max(p.y.abs()) - 0.5).abs() < 1e-12));
    }
}
