//! Half-space polytopes with a smooth signed distance and indicator.
//!
//! A convex element is the intersection of `H` half-spaces `n_h . x + d_h <= 0`
//! expressed in the element's local frame. The local frame is related to world
//! coordinates by `x_local = x_world - c`, so `c` is the world position of the
//! local origin.
//!
//! The smooth signed distance replaces the hard `max_h` over plane distances by
//! a LogSumExp with sharpness `delta`; a sigmoid with global sharpness `sigma`
//! turns it into an occupancy value in `(0, 1)`.

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

/// A point or direction in `D`-dimensional space.
pub type Point<const D: usize> = SVector<f64, D>;

/// Raw normals whose norm falls below this are re-seeded by the optimizer.
pub const MIN_NORMAL_NORM: f64 = 1e-12;

/// Lower clamp applied to every element's smoothness after an optimizer step.
pub const MIN_DELTA: f64 = 1e-3;

/// Numerically stable logistic function.
///
/// The single-branch form `1 / (1 + exp(-z))` is monotone non-decreasing in
/// floating point, which is what makes `max_k C_k == sigmoid(-sigma * min_k phi_k)`
/// hold bit-for-bit.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// How the LogSumExp smooth maximum is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SdfMode {
    /// `(1/delta) * log sum exp(delta * H_h)`: approximates `max_h H_h` in world units.
    #[default]
    Normalized,
    /// `log sum exp(delta * H_h)` without the `1/delta` factor.
    Literal,
}

impl SdfMode {
    pub fn is_normalized(self) -> bool {
        matches!(self, SdfMode::Normalized)
    }

    pub fn from_normalized(flag: bool) -> Self {
        if flag {
            SdfMode::Normalized
        } else {
            SdfMode::Literal
        }
    }
}

/// One half-space constraint `n . x + d <= 0` with an unconstrained raw normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperplane<const D: usize> {
    pub normal_raw: Point<D>,
    pub offset: f64,
}

impl<const D: usize> Hyperplane<D> {
    pub fn new(normal_raw: Point<D>, offset: f64) -> Self {
        Self { normal_raw, offset }
    }

    /// Unit normal `normal_raw / |normal_raw|`.
    #[inline]
    pub fn normal(&self) -> Point<D> {
        self.normal_raw / self.normal_raw.norm()
    }

    /// Signed distance of `x` (local frame) to the plane; negative inside.
    #[inline]
    pub fn signed_distance(&self, x: &Point<D>) -> f64 {
        self.normal().dot(x) + self.offset
    }

    /// The same plane after moving the origin to `p`: `H'(y) = H(y + p)`.
    pub fn recentered(&self, p: &Point<D>) -> Self {
        let n = self.normal();
        Self {
            normal_raw: n,
            offset: self.offset + n.dot(p),
        }
    }
}

/// `H` half-spaces plus a smoothness and a translation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexElement<const D: usize> {
    pub planes: Vec<Hyperplane<D>>,
    pub delta: f64,
    pub translation: Point<D>,
}

impl<const D: usize> ConvexElement<D> {
    pub fn new(planes: Vec<Hyperplane<D>>, delta: f64, translation: Point<D>) -> Self {
        Self {
            planes,
            delta,
            translation,
        }
    }

    /// Axis-aligned box with half extents `half`, centered at `center`.
    pub fn axis_box(center: Point<D>, half: Point<D>, delta: f64) -> Self {
        let mut planes = Vec::with_capacity(2 * D);
        for i in 0..D {
            let mut n = Point::<D>::zeros();
            n[i] = 1.0;
            planes.push(Hyperplane::new(n, -half[i]));
            planes.push(Hyperplane::new(-n, -half[i]));
        }
        Self::new(planes, delta, center)
    }

    #[inline]
    pub fn to_local(&self, x_world: &Point<D>) -> Point<D> {
        x_world - self.translation
    }

    /// Smooth signed distance at a world-space point.
    pub fn smooth_sdf(&self, x_world: &Point<D>, mode: SdfMode) -> f64 {
        self.prepare().smooth_sdf(x_world, mode)
    }

    /// Exact `max_h H_h` at a world-space point.
    pub fn hard_sdf(&self, x_world: &Point<D>) -> f64 {
        let x = self.to_local(x_world);
        self.planes
            .iter()
            .map(|p| p.signed_distance(&x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn indicator(&self, x_world: &Point<D>, sigma: f64, mode: SdfMode) -> f64 {
        sigmoid(-sigma * self.smooth_sdf(x_world, mode))
    }

    /// Unit normals and offsets resolved once for repeated evaluation.
    pub fn prepare(&self) -> PreparedElement<D> {
        PreparedElement {
            normals: self.planes.iter().map(Hyperplane::normal).collect(),
            raw_norms: self.planes.iter().map(|p| p.normal_raw.norm()).collect(),
            offsets: self.planes.iter().map(|p| p.offset).collect(),
            delta: self.delta,
            translation: self.translation,
        }
    }

    /// Planes expressed in world coordinates (translation folded into offsets).
    pub fn world_planes(&self) -> Vec<Hyperplane<D>> {
        let shift = -self.translation;
        self.planes.iter().map(|p| p.recentered(&shift)).collect()
    }
}

/// An element with normalized normals, ready for batched evaluation.
#[derive(Debug, Clone)]
pub struct PreparedElement<const D: usize> {
    pub normals: Vec<Point<D>>,
    pub raw_norms: Vec<f64>,
    pub offsets: Vec<f64>,
    pub delta: f64,
    pub translation: Point<D>,
}

impl<const D: usize> PreparedElement<D> {
    /// Fills `out` with the plane distances at `x_world` and returns their maximum.
    #[inline]
    pub fn plane_distances(&self, x_world: &Point<D>, out: &mut Vec<f64>) -> f64 {
        let x = x_world - self.translation;
        out.clear();
        let mut max = f64::NEG_INFINITY;
        for (n, d) in self.normals.iter().zip(&self.offsets) {
            let h = n.dot(&x) + d;
            max = max.max(h);
            out.push(h);
        }
        max
    }

    pub fn smooth_sdf(&self, x_world: &Point<D>, mode: SdfMode) -> f64 {
        let mut buf = Vec::with_capacity(self.normals.len());
        let max = self.plane_distances(x_world, &mut buf);
        smooth_max(&buf, max, self.delta, mode)
    }

    pub fn hard_sdf(&self, x_world: &Point<D>) -> f64 {
        let mut buf = Vec::with_capacity(self.normals.len());
        self.plane_distances(x_world, &mut buf)
    }
}

/// LogSumExp of `delta * values` using the max-subtraction trick.
#[inline]
pub fn smooth_max(values: &[f64], max: f64, delta: f64, mode: SdfMode) -> f64 {
    let sum: f64 = values.iter().map(|h| (delta * (h - max)).exp()).sum();
    match mode {
        SdfMode::Normalized => max + sum.ln() / delta,
        SdfMode::Literal => delta * max + sum.ln(),
    }
}

/// A union of convex elements sharing one plane count and one sigmoid sharpness.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<const D: usize> {
    pub elements: Vec<ConvexElement<D>>,
    pub sigma: f64,
    pub mode: SdfMode,
}

impl<const D: usize> Decomposition<D> {
    pub fn new(elements: Vec<ConvexElement<D>>, sigma: f64) -> Self {
        Self {
            elements,
            sigma,
            mode: SdfMode::Normalized,
        }
    }

    pub fn with_mode(mut self, mode: SdfMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn dim(&self) -> usize {
        D
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Planes per element (taken from the first element).
    pub fn planes_per_element(&self) -> usize {
        self.elements.first().map_or(0, |e| e.planes.len())
    }

    /// Checks the structural invariants: K >= 1, shared H >= D + 1, positive
    /// sigma and deltas, finite parameters.
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if self.elements.is_empty() {
            return Err(Error::InvalidArgument("decomposition needs at least one element".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", self.sigma)));
        }
        let h = self.planes_per_element();
        if h < D + 1 {
            return Err(Error::InvalidArgument(format!(
                "each element needs at least {} planes, got {h}",
                D + 1
            )));
        }
        for (k, e) in self.elements.iter().enumerate() {
            if e.planes.len() != h {
                return Err(Error::InvalidArgument(format!(
                    "element {k} has {} planes, expected {h}",
                    e.planes.len()
                )));
            }
            if !(e.delta > 0.0 && e.delta.is_finite()) {
                return Err(Error::InvalidArgument(format!("element {k} has delta {}", e.delta)));
            }
            let finite = e.translation.iter().all(|v| v.is_finite())
                && e.planes.iter().all(|p| {
                    p.offset.is_finite()
                        && p.normal_raw.iter().all(|v| v.is_finite())
                        && p.normal_raw.norm() > MIN_NORMAL_NORM
                });
            if !finite {
                return Err(Error::NonFinite(format!("element {k} parameters")));
            }
        }
        Ok(())
    }

    pub fn prepare(&self) -> Vec<PreparedElement<D>> {
        self.elements.iter().map(ConvexElement::prepare).collect()
    }

    /// `max_k C_k(x)`.
    pub fn union_indicator(&self, x_world: &Point<D>) -> f64 {
        self.elements
            .iter()
            .map(|e| e.indicator(x_world, self.sigma, self.mode))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min_k phi_k(x)`, the smooth signed distance of the union.
    pub fn union_sdf(&self, x_world: &Point<D>) -> f64 {
        self.elements
            .iter()
            .map(|e| e.smooth_sdf(x_world, self.mode))
            .fold(f64::INFINITY, f64::min)
    }

    /// `min_k max_h H_h`, the hard union used for extraction-side inside tests.
    pub fn union_hard_sdf(&self, x_world: &Point<D>) -> f64 {
        self.elements
            .iter()
            .map(|e| e.hard_sdf(x_world))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Batched union evaluator that avoids re-normalizing normals per query.
pub struct UnionEvaluator<const D: usize> {
    prepared: Vec<PreparedElement<D>>,
    sigma: f64,
    mode: SdfMode,
}

impl<const D: usize> UnionEvaluator<D> {
    pub fn new(dec: &Decomposition<D>) -> Self {
        Self {
            prepared: dec.prepare(),
            sigma: dec.sigma,
            mode: dec.mode,
        }
    }

    pub fn union_sdf(&self, x: &Point<D>, buf: &mut Vec<f64>) -> f64 {
        self.prepared
            .iter()
            .map(|e| {
                let max = e.plane_distances(x, buf);
                smooth_max(buf, max, e.delta, self.mode)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn union_indicator(&self, x: &Point<D>, buf: &mut Vec<f64>) -> f64 {
        sigmoid(-self.sigma * self.union_sdf(x, buf))
    }

    pub fn union_hard_sdf(&self, x: &Point<D>, buf: &mut Vec<f64>) -> f64 {
        self.prepared
            .iter()
            .map(|e| e.plane_distances(x, buf))
            .fold(f64::INFINITY, f64::min)
    }
}
