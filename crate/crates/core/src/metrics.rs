//! Reconstruction metrics: volumetric IoU, Chamfer-L1 and F-score.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Decomposition, Point};
use crate::sampling::{mix_seeds, rng_from_seed, Aabb};
use crate::{Error, Result};

pub const DEFAULT_IOU_SAMPLES: usize = 100_000;
pub const DEFAULT_SURFACE_SAMPLES: usize = 100_000;
/// Default F-score threshold as a fraction of the bbox diagonal.
pub const DEFAULT_F_THRESHOLD_FRACTION: f64 = 0.01;

/// Monte-Carlo IoU of two solids given as indicator functions, thresholded at
/// 0.5. Both are evaluated on the same `n` uniform samples of `bbox`.
pub fn volumetric_iou<const D: usize>(
    a: impl Fn(&Point<D>) -> f64 + Sync,
    b: impl Fn(&Point<D>) -> f64 + Sync,
    bbox: &Aabb<D>,
    n: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let points: Vec<Point<D>> = (0..n).map(|_| bbox.sample_uniform(&mut rng)).collect();
    let (inter, union) = points
        .par_iter()
        .map(|p| {
            let (ia, ib) = (a(p) >= 0.5, b(p) >= 0.5);
            (usize::from(ia && ib), usize::from(ia || ib))
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    if union == 0 {
        return Err(Error::EmptyUnion);
    }
    Ok(inter as f64 / union as f64)
}

/// Exact nearest-neighbor index over a fixed point set.
#[derive(Debug, Clone)]
pub struct KdTree<const D: usize> {
    points: Vec<Point<D>>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

const LEAF_SIZE: usize = 12;

impl<const D: usize> KdTree<D> {
    pub fn new(points: &[Point<D>]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &mut self.points[start..end];
        let bbox = Aabb::from_points(slice.iter()).expect("non-empty");
        let ext = bbox.extent();
        let axis = (0..D).max_by(|&a, &b| ext[a].total_cmp(&ext[b])).unwrap();
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |p, q| p[axis].total_cmp(&q[axis]));
        let value = slice[mid][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Squared distance from `q` to the nearest indexed point.
    pub fn nearest_squared(&self, q: &Point<D>) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &Point<D>, best: &mut f64) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for p in &self.points[start..end] {
                    let d = (p - q).norm_squared();
                    if d < *best {
                        *best = d;
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff < *best {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Nearest-neighbor distances between a reconstruction and a target surface
/// sample set, in both directions.
#[derive(Debug, Clone)]
pub struct SurfaceDistances {
    /// For each reconstruction point, distance to the target set.
    pub recon_to_target: Vec<f64>,
    /// For each target point, distance to the reconstruction set.
    pub target_to_recon: Vec<f64>,
}

fn nn_distances<const D: usize>(from: &[Point<D>], tree: &KdTree<D>) -> Vec<f64> {
    from.par_iter()
        .map(|p| tree.nearest_squared(p).expect("non-empty tree").sqrt())
        .collect()
}

impl SurfaceDistances {
    pub fn new<const D: usize>(recon: &[Point<D>], target: &[Point<D>]) -> Result<Self> {
        if recon.is_empty() || target.is_empty() {
            return Err(Error::EmptySamples);
        }
        let (to_target, to_recon) = rayon::join(
            || nn_distances(recon, &KdTree::new(target)),
            || nn_distances(target, &KdTree::new(recon)),
        );
        Ok(Self {
            recon_to_target: to_target,
            target_to_recon: to_recon,
        })
    }

    /// Mean of the two directed mean distances.
    pub fn chamfer_l1(&self) -> f64 {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        0.5 * (mean(&self.recon_to_target) + mean(&self.target_to_recon))
    }

    /// F-score in percent at threshold `t`.
    pub fn f_score(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("F-score threshold must be positive, got {t}")));
        }
        let frac = |v: &[f64]| v.iter().filter(|d| **d <= t).count() as f64 / v.len() as f64;
        let precision = frac(&self.recon_to_target);
        let recall = frac(&self.target_to_recon);
        if precision + recall == 0.0 {
            return Ok(0.0);
        }
        Ok(100.0 * 2.0 * precision * recall / (precision + recall))
    }
}

pub fn chamfer_l1<const D: usize>(a: &[Point<D>], b: &[Point<D>]) -> Result<f64> {
    Ok(SurfaceDistances::new(a, b)?.chamfer_l1())
}

/// `recon` is the reconstruction, `target` the reference surface.
pub fn f_score<const D: usize>(recon: &[Point<D>], target: &[Point<D>], t: f64) -> Result<f64> {
    SurfaceDistances::new(recon, target)?.f_score(t)
}

/// Evaluation summary, printable as `key=value` lines or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub iou: f64,
    /// World units.
    pub chamfer_l1: Option<f64>,
    /// Percent.
    pub f_score: Option<f64>,
    /// World units.
    pub f_threshold: f64,
    pub iou_samples: usize,
    pub surface_samples: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl MetricsReport {
    pub fn to_key_value(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"));
        let mut s = format!(
            "iou={:.6}\nchamfer_l1={}\nf_score={}\nf_threshold={:.6}\niou_samples={}\nsurface_samples={}\nseed={}\n",
            self.iou,
            opt(self.chamfer_l1),
            opt(self.f_score),
            self.f_threshold,
            self.iou_samples,
            self.surface_samples,
            self.seed
        );
        for n in &self.notes {
            s.push_str(&format!("note={n}\n"));
        }
        s
    }
}

/// Samples on the boundary of a union of convexes. `draw(seed)` samples the
/// surfaces of the individual convexes; points that fall strictly inside the
/// union (on faces buried in another convex) are rejected and redrawn.
pub fn union_boundary_samples<const D: usize>(
    dec: &Decomposition<D>,
    draw: impl Fn(u64) -> Result<Vec<Point<D>>>,
    n: usize,
    seed: u64,
) -> Result<Vec<Point<D>>> {
    const MAX_ROUNDS: u64 = 64;
    let mut out = Vec::with_capacity(n);
    for round in 0..MAX_ROUNDS {
        let batch = draw(mix_seeds(seed, round))?;
        let Some(bbox) = Aabb::from_points(&batch) else {
            return Err(Error::EmptySamples);
        };
        let tol = 1e-9 * bbox.diagonal().max(1e-300);
        let kept: Vec<Point<D>> = batch.into_par_iter().filter(|x| dec.union_hard_sdf(x) >= -tol).collect();
        out.extend(kept.into_iter().take(n - out.len()));
        if out.len() == n {
            return Ok(out);
        }
    }
    Err(Error::InvalidArgument(format!(
        "union boundary too small to sample: {} of {n} points after {MAX_ROUNDS} rounds",
        out.len()
    )))
}

/// Uniform samples on a sphere, used by tests and benchmarks.
pub fn sphere_samples(center: Point<3>, radius: f64, n: usize, seed: u64) -> Vec<Point<3>> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            let v = Point::<3>::from_fn(|_, _| StandardNormal.sample(&mut rng));
            center + v.normalize() * radius
        })
        .collect()
}

/// Brute-force nearest squared distance; the reference for [`KdTree`].
pub fn brute_nearest_squared<const D: usize>(points: &[Point<D>], q: &Point<D>) -> f64 {
    points.iter().map(|p| (p - q).norm_squared()).fold(f64::INFINITY, f64::min)
}
