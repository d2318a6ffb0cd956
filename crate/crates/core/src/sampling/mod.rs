//! Target occupancy oracles and offline sample banks.
//!
//! Training draws from two banks built once per target: uniform samples over
//! the bounding box, and "near-surface" samples jittered around the boundary.
//! Each optimizer step sub-samples a fixed-size batch from both.

mod csg;
mod grid;
mod mesh_target;
mod silhouette;

pub use csg::{parse_csg, Csg, CsgTarget, ParsedCsg};
pub use grid::{OccupancyGrid, INSIDE_THRESHOLD};
pub use mesh_target::MeshTarget;
pub use silhouette::Silhouette;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::{Error, Result};

/// Near-surface jitter as a fraction of the bounding-box diagonal.
pub const DEFAULT_JITTER_FRACTION: f64 = 0.005;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<const D: usize> {
    pub min: Point<D>,
    pub max: Point<D>,
}

impl<const D: usize> Aabb<D> {
    pub fn new(min: Point<D>, max: Point<D>) -> Self {
        Self { min, max }
    }

    pub fn cube(half: f64) -> Self {
        Self::new(Point::repeat(-half), Point::repeat(half))
    }

    pub fn extent(&self) -> Point<D> {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn volume(&self) -> f64 {
        self.extent().iter().product()
    }

    pub fn center(&self) -> Point<D> {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, x: &Point<D>) -> bool {
        (0..D).all(|i| x[i] >= self.min[i] && x[i] <= self.max[i])
    }

    /// Grows every side by `fraction` of the largest extent.
    pub fn padded(&self, fraction: f64) -> Self {
        let pad = fraction * self.extent().max();
        Self::new(self.min.add_scalar(-pad), self.max.add_scalar(pad))
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::new(self.min.inf(&other.min), self.max.sup(&other.max))
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self::new(self.min.sup(&other.min), self.max.inf(&other.max))
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point<D>>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        Some(it.fold(Self::new(first, first), |b, p| Self::new(b.min.inf(p), b.max.sup(p))))
    }

    pub fn sample_uniform<R: RngCore + ?Sized>(&self, rng: &mut R) -> Point<D> {
        Point::from_fn(|i, _| self.min[i] + rng.random::<f64>() * (self.max[i] - self.min[i]))
    }
}

/// Ground-truth inside/outside oracle for a target solid.
pub trait TargetOracle<const D: usize>: Send + Sync {
    fn bbox(&self) -> Aabb<D>;

    fn contains(&self, x: &Point<D>) -> bool;

    /// Short name of the oracle variant.
    fn kind(&self) -> &'static str;

    fn has_surface(&self) -> bool {
        false
    }

    /// A point drawn uniformly (by area) on the target boundary.
    fn surface_point(&self, _rng: &mut dyn RngCore) -> Result<Point<D>> {
        Err(Error::NoSurface(self.kind()))
    }
}

/// Occupancy label `O(x)` in `{0, 1}`.
pub fn oracle_eval<const D: usize>(oracle: &(impl TargetOracle<D> + ?Sized), x: &Point<D>) -> f64 {
    if oracle.contains(x) {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleSource {
    Volume,
    NearSurface,
}

/// Labeled points from one source.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<const D: usize> {
    pub points: Vec<Point<D>>,
    pub labels: Vec<f64>,
    pub source: SampleSource,
    pub seed: u64,
}

impl<const D: usize> SampleSet<D> {
    pub fn new(points: Vec<Point<D>>, labels: Vec<f64>, source: SampleSource, seed: u64) -> Self {
        debug_assert_eq!(points.len(), labels.len());
        Self {
            points,
            labels,
            source,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn inside_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&l| l >= 0.5).count() as f64 / self.len() as f64
    }

    /// Samples labeled inside; used as the interior bank for the guidance terms.
    pub fn interior(&self) -> SampleSet<D> {
        let (points, labels) = self
            .points
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l >= 0.5)
            .map(|(p, &l)| (*p, l))
            .unzip();
        SampleSet::new(points, labels, self.source, self.seed)
    }

    /// Rejects empty sets and labels outside `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptySamples);
        }
        if let Some(l) = self.labels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::InvalidArgument(format!("label {l} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Deterministic combination of two seeds (splitmix64 finalizer).
pub fn mix_seeds(a: u64, b: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(a ^ splitmix(b))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` uniform points in the oracle's bounding box with their labels.
pub fn sample_volume<const D: usize>(
    oracle: &(impl TargetOracle<D> + ?Sized),
    n: usize,
    seed: u64,
) -> SampleSet<D> {
    let bbox = oracle.bbox();
    let mut rng = rng_from_seed(seed);
    let points: Vec<Point<D>> = (0..n).map(|_| bbox.sample_uniform(&mut rng)).collect();
    let labels = points.par_iter().map(|p| oracle_eval(oracle, p)).collect();
    SampleSet::new(points, labels, SampleSource::Volume, seed)
}

/// Default near-surface jitter for a bounding box.
pub fn default_jitter<const D: usize>(bbox: &Aabb<D>) -> f64 {
    DEFAULT_JITTER_FRACTION * bbox.diagonal()
}

/// `n` boundary points perturbed by isotropic Gaussian noise of std `jitter_sigma`.
///
/// Jittered points that would leave the bounding box are re-drawn.
pub fn sample_near_surface<const D: usize>(
    oracle: &(impl TargetOracle<D> + ?Sized),
    n: usize,
    jitter_sigma: f64,
    seed: u64,
) -> Result<SampleSet<D>> {
    if !oracle.has_surface() {
        return Err(Error::NoSurface(oracle.kind()));
    }
    if !(jitter_sigma >= 0.0 && jitter_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("jitter sigma {jitter_sigma}")));
    }
    let bbox = oracle.bbox();
    let mut rng = rng_from_seed(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let base = oracle.surface_point(&mut rng)?;
        let mut p = base;
        for _attempt in 0..64 {
            p = base + Point::from_fn(|_, _| jitter_sigma * rng.sample::<f64, _>(StandardNormal));
            if bbox.contains(&p) {
                break;
            }
        }
        if !bbox.contains(&p) {
            p = base;
        }
        points.push(p);
    }
    let labels = points.par_iter().map(|p| oracle_eval(oracle, p)).collect();
    Ok(SampleSet::new(points, labels, SampleSource::NearSurface, seed))
}

/// `n` rows of `bank` drawn without replacement, deterministic per
/// `(bank.seed, step_seed)`.
pub fn subsample<const D: usize>(bank: &SampleSet<D>, n: usize, step_seed: u64) -> Result<SampleSet<D>> {
    if n > bank.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {n} samples from a bank of {}",
            bank.len()
        )));
    }
    let mut rng = rng_from_seed(mix_seeds(bank.seed, step_seed));
    let idx = rand::seq::index::sample(&mut rng, bank.len(), n);
    let points = idx.iter().map(|i| bank.points[i]).collect();
    let labels = idx.iter().map(|i| bank.labels[i]).collect();
    Ok(SampleSet::new(points, labels, bank.source, bank.seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube_csg() -> CsgTarget<3> {
        CsgTarget::new(Csg::cuboid(Point::zeros(), Point::repeat(1.0)))
    }

    #[test]
    fn volume_fraction_matches_cube_ratio() {
        let target = unit_cube_csg().with_bbox(Aabb::cube(1.0));
        let s = sample_volume(&target, 100_000, 7);
        assert!((s.inside_fraction() - 0.125).abs() < 0.005, "{}", s.inside_fraction());
        assert!(s.points.iter().all(|p| target.bbox().contains(p)));
    }

    #[test]
    fn single_sample_and_determinism() {
        let target = unit_cube_csg();
        let one = sample_volume(&target, 1, 3);
        assert_eq!(one.len(), 1);
        assert_eq!(one.labels[0], oracle_eval(&target, &one.points[0]));
        assert_eq!(sample_volume(&target, 500, 11), sample_volume(&target, 500, 11));
        let a = sample_near_surface(&target, 300, 0.01, 5).unwrap();
        assert_eq!(a, sample_near_surface(&target, 300, 0.01, 5).unwrap());
    }

    #[test]
    fn labels_match_oracle() {
        let target = unit_cube_csg();
        let s = sample_near_surface(&target, 2000, 0.02, 1).unwrap();
        for (p, l) in s.points.iter().zip(&s.labels) {
            assert_eq!(*l, oracle_eval(&target, p));
        }
    }

    #[test]
    fn zero_jitter_lands_on_sphere() {
        let target = CsgTarget::new(Csg::ball(Point::<3>::zeros(), 1.0));
        let s = sample_near_surface(&target, 1000, 0.0, 2).unwrap();
        for p in &s.points {
            assert!((p.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_without_surface_is_rejected() {
        let grid = OccupancyGrid::from_fn([4, 4, 4], Aabb::cube(1.0), |_| 255);
        assert!(matches!(
            sample_near_surface(&grid, 10, 0.01, 0),
            Err(Error::NoSurface(_))
        ));
    }

    #[test]
    fn subsample_contracts() {
        let target = unit_cube_csg();
        let bank = sample_volume(&target, 5000, 9);
        let all = subsample(&bank, bank.len(), 1).unwrap();
        let mut a: Vec<_> = all.points.iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
        let mut b: Vec<_> = bank.points.iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert!(subsample(&bank, bank.len() + 1, 0).is_err());
        assert_eq!(subsample(&bank, 100, 4).unwrap(), subsample(&bank, 100, 4).unwrap());
    }

    #[test]
    fn disjoint_step_seeds_overlap_like_hypergeometric() {
        // Two independent 1024-draws from 100k overlap by ~10.5 rows on average.
        let target = unit_cube_csg();
        let bank = sample_volume(&target, 100_000, 1);
        let a = subsample(&bank, 1024, 1).unwrap();
        let b = subsample(&bank, 1024, 2).unwrap();
        let set: std::collections::HashSet<_> = a.points.iter().map(|p| p.x.to_bits()).collect();
        let overlap = b.points.iter().filter(|p| set.contains(&p.x.to_bits())).count();
        assert!(overlap < 40, "overlap {overlap}");
        assert_ne!(a.points, b.points);
        let present: std::collections::HashSet<_> = bank.points.iter().map(|p| p.x.to_bits()).collect();
        assert!(a.points.iter().all(|p| present.contains(&p.x.to_bits())));
    }
}
