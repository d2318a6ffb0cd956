//! Analytic CSG targets and their text format.
//!
//! One primitive or operator per line, evaluated as a postfix program:
//!
//! ```text
//! # an L-shape
//! cube 0 0 0  1.0 0.4 0.4
//! cube -0.3 0.3 0  0.4 0.6 0.4
//! union
//! ```
//!
//! Primitives are `cube cx cy cz sx sy sz` and `sphere cx cy cz r` in 3D, and
//! `rect cx cy sx sy` and `circle cx cy r` in 2D (sizes are full edge
//! lengths). Operators `union`, `intersection` and `difference` pop two
//! operands. The program must leave exactly one shape on the stack.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::{Aabb, TargetOracle};
use crate::geometry::Point;
use crate::{Error, Result};

/// Tolerance (relative to the bbox diagonal) for accepting a primitive surface
/// point as lying on the composite boundary.
const ON_SURFACE_TOL: f64 = 1e-9;
const MAX_SURFACE_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Csg<const D: usize> {
    Cuboid { center: Point<D>, half: Point<D> },
    Ball { center: Point<D>, radius: f64 },
    Union(Box<Csg<D>>, Box<Csg<D>>),
    Intersection(Box<Csg<D>>, Box<Csg<D>>),
    Difference(Box<Csg<D>>, Box<Csg<D>>),
}

impl<const D: usize> Csg<D> {
    /// Axis-aligned box from its center and full edge lengths.
    pub fn cuboid(center: Point<D>, size: Point<D>) -> Self {
        Csg::Cuboid {
            center,
            half: size * 0.5,
        }
    }

    pub fn ball(center: Point<D>, radius: f64) -> Self {
        Csg::Ball { center, radius }
    }

    pub fn union(self, other: Self) -> Self {
        Csg::Union(Box::new(self), Box::new(other))
    }

    pub fn intersection(self, other: Self) -> Self {
        Csg::Intersection(Box::new(self), Box::new(other))
    }

    pub fn difference(self, other: Self) -> Self {
        Csg::Difference(Box::new(self), Box::new(other))
    }

    /// Signed distance (exact for primitives, a bound for composites).
    pub fn sdf(&self, x: &Point<D>) -> f64 {
        match self {
            Csg::Cuboid { center, half } => {
                let q = (x - center).abs() - half;
                let outside = q.map(|v| v.max(0.0)).norm();
                outside + q.max().min(0.0)
            }
            Csg::Ball { center, radius } => (x - center).norm() - radius,
            Csg::Union(a, b) => a.sdf(x).min(b.sdf(x)),
            Csg::Intersection(a, b) => a.sdf(x).max(b.sdf(x)),
            Csg::Difference(a, b) => a.sdf(x).max(-b.sdf(x)),
        }
    }

    pub fn bounds(&self) -> Aabb<D> {
        match self {
            Csg::Cuboid { center, half } => Aabb::new(center - half, center + half),
            Csg::Ball { center, radius } => Aabb::new(center.add_scalar(-radius), center.add_scalar(*radius)),
            Csg::Union(a, b) => a.bounds().union(&b.bounds()),
            Csg::Intersection(a, b) => a.bounds().intersection(&b.bounds()),
            Csg::Difference(a, _) => a.bounds(),
        }
    }

    fn leaves<'a>(&'a self, out: &mut Vec<&'a Csg<D>>) {
        match self {
            Csg::Cuboid { .. } | Csg::Ball { .. } => out.push(self),
            Csg::Union(a, b) | Csg::Intersection(a, b) | Csg::Difference(a, b) => {
                a.leaves(out);
                b.leaves(out);
            }
        }
    }

    fn surface_measure(&self) -> f64 {
        match self {
            Csg::Cuboid { half, .. } => (0..D)
                .map(|i| {
                    2.0 * (0..D)
                        .filter(|&j| j != i)
                        .map(|j| 2.0 * half[j])
                        .product::<f64>()
                })
                .sum(),
            Csg::Ball { radius, .. } => match D {
                2 => 2.0 * std::f64::consts::PI * radius,
                3 => 4.0 * std::f64::consts::PI * radius * radius,
                _ => unimplemented!("ball surface measure only defined for D = 2, 3"),
            },
            _ => 0.0,
        }
    }

    fn sample_leaf_surface(&self, rng: &mut dyn RngCore) -> Point<D> {
        match self {
            Csg::Cuboid { center, half } => {
                let faces: Vec<f64> = (0..D)
                    .map(|i| (0..D).filter(|&j| j != i).map(|j| 2.0 * half[j]).product::<f64>())
                    .collect();
                let total: f64 = faces.iter().sum::<f64>() * 2.0;
                let mut pick = rng.random::<f64>() * total;
                let mut axis = D - 1;
                let mut positive = true;
                'outer: for (i, a) in faces.iter().enumerate() {
                    for sign in [true, false] {
                        if pick < *a {
                            axis = i;
                            positive = sign;
                            break 'outer;
                        }
                        pick -= a;
                    }
                }
                let mut p = Point::from_fn(|j, _| center[j] + (2.0 * rng.random::<f64>() - 1.0) * half[j]);
                p[axis] = if positive { center[axis] + half[axis] } else { center[axis] - half[axis] };
                p
            }
            Csg::Ball { center, radius } => {
                let dir = loop {
                    let v = Point::<D>::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                    let n = v.norm();
                    if n > 1e-12 {
                        break v / n;
                    }
                };
                center + dir * *radius
            }
            _ => unreachable!("leaves are primitives"),
        }
    }
}

/// A CSG tree with a padded bounding box.
#[derive(Debug, Clone)]
pub struct CsgTarget<const D: usize> {
    pub tree: Csg<D>,
    bbox: Aabb<D>,
    leaves: Vec<Csg<D>>,
    cumulative: Vec<f64>,
}

impl<const D: usize> CsgTarget<D> {
    /// Wraps `tree` with its bounds padded by 10% of the largest extent.
    pub fn new(tree: Csg<D>) -> Self {
        let bbox = tree.bounds().padded(0.1);
        let mut leaves = Vec::new();
        tree.leaves(&mut leaves);
        let leaves: Vec<Csg<D>> = leaves.into_iter().cloned().collect();
        let mut acc = 0.0;
        let cumulative = leaves
            .iter()
            .map(|l| {
                acc += l.surface_measure();
                acc
            })
            .collect();
        Self {
            tree,
            bbox,
            leaves,
            cumulative,
        }
    }

    pub fn with_bbox(mut self, bbox: Aabb<D>) -> Self {
        self.bbox = bbox;
        self
    }

    pub fn sdf(&self, x: &Point<D>) -> f64 {
        self.tree.sdf(x)
    }
}

impl<const D: usize> TargetOracle<D> for CsgTarget<D> {
    fn bbox(&self) -> Aabb<D> {
        self.bbox
    }

    fn contains(&self, x: &Point<D>) -> bool {
        self.tree.sdf(x) <= 0.0
    }

    fn kind(&self) -> &'static str {
        "csg"
    }

    fn has_surface(&self) -> bool {
        true
    }

    fn surface_point(&self, rng: &mut dyn RngCore) -> Result<Point<D>> {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        let tol = ON_SURFACE_TOL * self.bbox.diagonal().max(1.0);
        for _ in 0..MAX_SURFACE_ATTEMPTS {
            let pick = rng.random::<f64>() * total;
            let i = self.cumulative.partition_point(|&c| c <= pick).min(self.leaves.len() - 1);
            let p = self.leaves[i].sample_leaf_surface(rng);
            if self.tree.sdf(&p).abs() <= tol {
                return Ok(p);
            }
        }
        Err(Error::InvalidArgument("CSG boundary is empty or vanishingly small".into()))
    }
}

/// A parsed CSG program of either dimension.
#[derive(Debug, Clone)]
pub enum ParsedCsg {
    D2(CsgTarget<2>),
    D3(CsgTarget<3>),
}

impl ParsedCsg {
    pub fn dim(&self) -> usize {
        match self {
            ParsedCsg::D2(_) => 2,
            ParsedCsg::D3(_) => 3,
        }
    }
}

enum Node {
    Two(Csg<2>),
    Three(Csg<3>),
}

pub fn parse_csg(text: &str) -> Result<ParsedCsg> {
    let mut stack: Vec<Node> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::parse("csg", format!("line {}: {msg}", lineno + 1));
        let mut tokens = line.split_whitespace();
        let op = tokens.next().unwrap_or_default();
        let nums: Vec<f64> = tokens
            .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad number {t:?}"))))
            .collect::<Result<_>>()?;
        let expect = |n: usize| {
            if nums.len() == n {
                Ok(())
            } else {
                Err(err(format!("{op} takes {n} numbers, got {}", nums.len())))
            }
        };
        let positive = |v: &[f64]| {
            if v.iter().all(|x| *x > 0.0 && x.is_finite()) {
                Ok(())
            } else {
                Err(err(format!("{op} sizes must be positive")))
            }
        };
        match op {
            "cube" => {
                expect(6)?;
                positive(&nums[3..])?;
                stack.push(Node::Three(Csg::cuboid(
                    Point::<3>::new(nums[0], nums[1], nums[2]),
                    Point::<3>::new(nums[3], nums[4], nums[5]),
                )));
            }
            "sphere" => {
                expect(4)?;
                positive(&nums[3..])?;
                stack.push(Node::Three(Csg::ball(Point::<3>::new(nums[0], nums[1], nums[2]), nums[3])));
            }
            "rect" => {
                expect(4)?;
                positive(&nums[2..])?;
                stack.push(Node::Two(Csg::cuboid(
                    Point::<2>::new(nums[0], nums[1]),
                    Point::<2>::new(nums[2], nums[3]),
                )));
            }
            "circle" => {
                expect(3)?;
                positive(&nums[2..])?;
                stack.push(Node::Two(Csg::ball(Point::<2>::new(nums[0], nums[1]), nums[2])));
            }
            "union" | "intersection" | "difference" => {
                expect(0)?;
                let b = stack.pop().ok_or_else(|| err(format!("{op} needs two operands")))?;
                let a = stack.pop().ok_or_else(|| err(format!("{op} needs two operands")))?;
                let combined = match (a, b) {
                    (Node::Two(a), Node::Two(b)) => Node::Two(combine(op, a, b)),
                    (Node::Three(a), Node::Three(b)) => Node::Three(combine(op, a, b)),
                    _ => return Err(err("cannot combine 2D and 3D shapes".into())),
                };
                stack.push(combined);
            }
            other => return Err(err(format!("unknown token {other:?}"))),
        }
    }
    match (stack.pop(), stack.is_empty()) {
        (Some(Node::Two(t)), true) => Ok(ParsedCsg::D2(CsgTarget::new(t))),
        (Some(Node::Three(t)), true) => Ok(ParsedCsg::D3(CsgTarget::new(t))),
        (None, _) => Err(Error::parse("csg", "program defines no shape")),
        (Some(_), false) => Err(Error::parse(
            "csg",
            "program leaves more than one shape on the stack; combine them with an operator",
        )),
    }
}

fn combine<const D: usize>(op: &str, a: Csg<D>, b: Csg<D>) -> Csg<D> {
    match op {
        "union" => a.union(b),
        "intersection" => a.intersection(b),
        _ => a.difference(b),
    }
}
