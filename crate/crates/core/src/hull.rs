//! Convex hulls: quickhull in 3D (triangulated facets) and Andrew's monotone
//! chain in 2D.
//!
//! Both use an absolute tolerance of `1e-9` times the point-cloud diameter
//! (estimated by the bounding-box diagonal). Points within tolerance of a
//! facet are treated as inside.

use std::collections::{HashMap, VecDeque};

use crate::geometry::Point;
use crate::mesh::{Polygon, TriMesh};
use crate::sampling::Aabb;
use crate::{Error, Result};

pub const HULL_TOLERANCE: f64 = 1e-9;

/// A facet of a hull: a triangle in 3D, an edge in 2D.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet<const D: usize> {
    /// Indices into [`HullResult::points`], counter-clockwise seen from outside.
    pub vertices: [usize; D],
    /// Unit outward normal.
    pub normal: Point<D>,
    /// Plane is `normal . x = offset`.
    pub offset: f64,
    /// In 3D, `neighbors[i]` shares the edge `(v_i, v_{i+1})`. In 2D it shares
    /// vertex `v_i`.
    pub neighbors: [usize; D],
}

impl<const D: usize> Facet<D> {
    pub fn distance(&self, x: &Point<D>) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

#[derive(Debug, Clone)]
pub struct HullResult<const D: usize> {
    /// The input points, unmodified.
    pub points: Vec<Point<D>>,
    /// Sorted indices of points that are hull vertices.
    pub vertices: Vec<usize>,
    pub facets: Vec<Facet<D>>,
    pub tolerance: f64,
}

impl<const D: usize> HullResult<D> {
    /// Largest signed distance of any input point above any facet.
    pub fn max_violation(&self) -> f64 {
        self.facets
            .iter()
            .flat_map(|f| self.points.iter().map(move |p| f.distance(p)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &Point<D>) -> bool {
        self.facets.iter().all(|f| f.distance(x) <= self.tolerance)
    }
}

impl HullResult<3> {
    /// The hull as a mesh over its own vertices only.
    pub fn to_mesh(&self) -> TriMesh {
        let remap: HashMap<usize, usize> = self.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        TriMesh::new(
            self.vertices.iter().map(|&v| self.points[v]).collect(),
            self.facets.iter().map(|f| f.vertices.map(|v| remap[&v])).collect(),
        )
    }
}

impl HullResult<2> {
    /// The hull boundary as a counter-clockwise polygon.
    pub fn to_polygon(&self) -> Polygon {
        // facets are stored in boundary order
        Polygon::new(self.facets.iter().map(|f| self.points[f.vertices[0]]).collect())
    }
}

fn tolerance_for<const D: usize>(points: &[Point<D>]) -> Result<f64> {
    let bbox = Aabb::from_points(points).ok_or_else(|| Error::DegenerateHull("no points".into()))?;
    let diam = bbox.diagonal();
    if !diam.is_finite() {
        return Err(Error::NonFinite("hull input".into()));
    }
    if diam == 0.0 {
        return Err(Error::DegenerateHull("all points coincide".into()));
    }
    Ok(HULL_TOLERANCE * diam)
}

/// Convex hull of `points` for `D` of 2 or 3.
pub fn convex_hull<const D: usize>(points: &[Point<D>]) -> Result<HullResult<D>> {
    fn cast<const A: usize, const B: usize>(p: &Point<A>) -> Point<B> {
        Point::from_fn(|i, _| p[i])
    }
    match D {
        2 => {
            let pts: Vec<Point<2>> = points.iter().map(cast).collect();
            let h = convex_hull_2d(&pts)?;
            Ok(recast(h, points))
        }
        3 => {
            let pts: Vec<Point<3>> = points.iter().map(cast).collect();
            let h = convex_hull_3d(&pts)?;
            Ok(recast(h, points))
        }
        _ => Err(Error::InvalidArgument(format!("convex hulls are implemented for 2D and 3D, not {D}D"))),
    }
}

fn recast<const A: usize, const B: usize>(h: HullResult<A>, points: &[Point<B>]) -> HullResult<B> {
    HullResult {
        points: points.to_vec(),
        vertices: h.vertices,
        facets: h
            .facets
            .into_iter()
            .map(|f| Facet {
                vertices: std::array::from_fn(|i| f.vertices[i]),
                normal: Point::from_fn(|i, _| f.normal[i]),
                offset: f.offset,
                neighbors: std::array::from_fn(|i| f.neighbors[i]),
            })
            .collect(),
        tolerance: h.tolerance,
    }
}

fn cross2(o: &Point<2>, a: &Point<2>, b: &Point<2>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Monotone chain. Collinear boundary points are dropped.
pub fn convex_hull_2d(points: &[Point<2>]) -> Result<HullResult<2>> {
    let tol = tolerance_for(points)?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
    });
    // a point is kept only if it lies more than tol left of the chord
    let keeps = |chain: &[usize], p: usize| {
        let (o, a) = (chain[chain.len() - 2], chain[chain.len() - 1]);
        let len = (points[p] - points[o]).norm();
        cross2(&points[o], &points[a], &points[p]) > tol * len
    };
    let mut lower: Vec<usize> = Vec::new();
    for &p in &order {
        while lower.len() >= 2 && !keeps(&lower, p) {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &p in order.iter().rev() {
        while upper.len() >= 2 && !keeps(&upper, p) {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    let ring = lower;
    if ring.len() < 3 {
        return Err(Error::DegenerateHull("points are collinear".into()));
    }
    let n = ring.len();
    let facets = (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            let e = points[b] - points[a];
            let normal = Point::<2>::new(e.y, -e.x).normalize();
            Facet {
                vertices: [a, b],
                normal,
                offset: normal.dot(&points[a]),
                neighbors: [(i + n - 1) % n, (i + 1) % n],
            }
        })
        .collect();
    let mut vertices = ring;
    vertices.sort_unstable();
    Ok(HullResult {
        points: points.to_vec(),
        vertices,
        facets,
        tolerance: tol,
    })
}

struct Face {
    v: [usize; 3],
    normal: Point<3>,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Point<3>], v: [usize; 3]) -> Self {
        let [a, b, c] = v.map(|i| points[i]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { n };
        Self {
            v,
            normal,
            offset: normal.dot(&a),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn distance(&self, x: &Point<3>) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

fn farthest_by(indices: impl Iterator<Item = usize>, key: impl Fn(usize) -> f64) -> Option<(usize, f64)> {
    indices
        .map(|i| (i, key(i)))
        .fold(None, |best, (i, d)| match best {
            Some((_, bd)) if bd >= d => best,
            _ => Some((i, d)),
        })
}

/// Quickhull with triangulated facets.
pub fn convex_hull_3d(points: &[Point<3>]) -> Result<HullResult<3>> {
    let tol = tolerance_for(points)?;
    let n = points.len();
    if n < 4 {
        return Err(Error::DegenerateHull(format!("{n} points cannot span 3D")));
    }

    // initial simplex from axis extremes
    let mut extremes = Vec::with_capacity(6);
    for a in 0..3 {
        let lo = (0..n).min_by(|&i, &j| points[i][a].total_cmp(&points[j][a])).unwrap();
        let hi = (0..n).max_by(|&i, &j| points[i][a].total_cmp(&points[j][a])).unwrap();
        extremes.push(lo);
        extremes.push(hi);
    }
    let mut best = (extremes[0], extremes[1], -1.0);
    for &i in &extremes {
        for &j in &extremes {
            let d = (points[i] - points[j]).norm();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (i0, i1, _) = best;
    let dir = (points[i1] - points[i0]).normalize();
    let line_dist = |k: usize| {
        let v = points[k] - points[i0];
        (v - dir * v.dot(&dir)).norm()
    };
    let (i2, d2) = farthest_by(0..n, line_dist).unwrap();
    if d2 <= tol {
        return Err(Error::DegenerateHull("points are collinear".into()));
    }
    let plane_n = (points[i1] - points[i0]).cross(&(points[i2] - points[i0])).normalize();
    let (i3, d3) = farthest_by(0..n, |k| (points[k] - points[i0]).dot(&plane_n).abs()).unwrap();
    if d3 <= tol {
        return Err(Error::DegenerateHull("points are coplanar".into()));
    }

    let mut faces: Vec<Face> = Vec::new();
    let centroid = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
    for tri in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        let mut f = Face::new(points, tri);
        if f.distance(&centroid) > 0.0 {
            f = Face::new(points, [tri[0], tri[2], tri[1]]);
        }
        faces.push(f);
    }
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for e in 0..3 {
            edges.insert((f.v[e], f.v[(e + 1) % 3]), fi);
        }
    }
    let simplex = [i0, i1, i2, i3];
    assign_outside(points, &mut faces, &[0, 1, 2, 3], (0..n).filter(|i| !simplex.contains(i)), tol);

    let mut stack: Vec<usize> = (0..4).collect();
    let mut visible = Vec::new();
    let mut seen: HashMap<usize, bool> = HashMap::new();
    while let Some(fi) = stack.pop() {
        if !faces[fi].alive || faces[fi].outside.is_empty() {
            continue;
        }
        let eye = {
            let f = &faces[fi];
            farthest_by(f.outside.iter().copied(), |p| f.distance(&points[p])).unwrap().0
        };
        // visible region: faces connected to fi that see the eye point
        visible.clear();
        seen.clear();
        let mut queue = VecDeque::from([fi]);
        seen.insert(fi, true);
        while let Some(f) = queue.pop_front() {
            visible.push(f);
            for e in 0..3 {
                let (a, b) = (faces[f].v[e], faces[f].v[(e + 1) % 3]);
                let g = edges[&(b, a)];
                if seen.contains_key(&g) {
                    continue;
                }
                let vis = faces[g].distance(&points[eye]) > tol;
                seen.insert(g, vis);
                if vis {
                    queue.push_back(g);
                }
            }
        }
        let mut horizon = Vec::new();
        for &f in &visible {
            for e in 0..3 {
                let (a, b) = (faces[f].v[e], faces[f].v[(e + 1) % 3]);
                if !seen[&edges[&(b, a)]] {
                    horizon.push((a, b));
                }
            }
        }
        let mut orphans = Vec::new();
        for &f in &visible {
            faces[f].alive = false;
            orphans.append(&mut faces[f].outside);
            for e in 0..3 {
                edges.remove(&(faces[f].v[e], faces[f].v[(e + 1) % 3]));
            }
        }
        let mut created = Vec::with_capacity(horizon.len());
        for (a, b) in horizon {
            let id = faces.len();
            faces.push(Face::new(points, [a, b, eye]));
            edges.insert((a, b), id);
            edges.insert((b, eye), id);
            edges.insert((eye, a), id);
            created.push(id);
        }
        assign_outside(points, &mut faces, &created, orphans.into_iter().filter(|&p| p != eye), tol);
        stack.extend(created);
    }

    let alive: Vec<usize> = (0..faces.len()).filter(|&f| faces[f].alive).collect();
    let new_id: HashMap<usize, usize> = alive.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let facets: Vec<Facet<3>> = alive
        .iter()
        .map(|&f| {
            let face = &faces[f];
            Facet {
                vertices: face.v,
                normal: face.normal,
                offset: face.offset,
                neighbors: std::array::from_fn(|e| new_id[&edges[&(face.v[(e + 1) % 3], face.v[e])]]),
            }
        })
        .collect();
    let mut vertices: Vec<usize> = facets.iter().flat_map(|f| f.vertices).collect();
    vertices.sort_unstable();
    vertices.dedup();
    Ok(HullResult {
        points: points.to_vec(),
        vertices,
        facets,
        tolerance: tol,
    })
}

fn assign_outside(
    points: &[Point<3>],
    faces: &mut [Face],
    candidates: &[usize],
    pts: impl Iterator<Item = usize>,
    tol: f64,
) {
    for p in pts {
        let best = farthest_by(candidates.iter().copied(), |f| faces[f].distance(&points[p]));
        if let Some((f, d)) = best {
            if d > tol {
                faces[f].outside.push(p);
            }
        }
    }
}
