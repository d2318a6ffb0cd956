//! Training losses and their analytic gradients.
//!
//! All expectations are empirical means over the current batch:
//!
//! - `approx`: `w(x) (max_k C_k(x) - O(x))^2` over volume and near-surface
//!   samples, with near-surface samples down-weighted.
//! - `decomp`: `relu(sum_k C_k(x) - tau)^2`, penalizing overlap.
//! - `unique`: mean squared plane offset, removing the translation null-space.
//! - `guide`: each element must cover its `N` interior samples of smallest `phi_k`.
//! - `loc`: pulls each translation towards its single nearest interior sample.
//! - `merged`: `relu(phi_k)^2` over the same `N` samples, replacing guide + loc.
//!
//! Nearest-sample sets are chosen once per evaluation and treated as constants
//! for differentiation. The ReLU derivative at exactly zero is zero.
//!
//! Per-sample work is split into fixed-size chunks that may run in parallel;
//! chunk results are reduced in chunk order, so values are independent of the
//! thread count.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{sigmoid, ConvexElement, Decomposition, Hyperplane, Point, PreparedElement, SdfMode};
use crate::params::ParamLayout;
use crate::sampling::{SampleSet, SampleSource};
use crate::{Error, Result};

const CHUNK: usize = 256;

/// Loss weights and related hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub approx: f64,
    pub decomp: f64,
    pub unique: f64,
    pub guide: f64,
    pub loc: f64,
    /// Weight of the merged guidance term; only used when `use_merged` is set.
    pub merged: f64,
    /// Overlap threshold of the decomposition loss.
    pub tau: f64,
    /// Down-weighting of near-surface samples in the approximation loss.
    pub near_surface_scale: f64,
    /// Number of nearest interior samples per element for guide / merged.
    pub n_guide: usize,
    pub use_merged: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            approx: 1.0,
            decomp: 0.1,
            unique: 0.001,
            guide: 0.01,
            loc: 1.0,
            merged: 1.0,
            tau: 2.0,
            near_surface_scale: 0.1,
            n_guide: 32,
            use_merged: false,
        }
    }
}

impl LossWeights {
    /// All weights zero; handy for isolating one term.
    pub fn zero() -> Self {
        Self {
            approx: 0.0,
            decomp: 0.0,
            unique: 0.0,
            guide: 0.0,
            loc: 0.0,
            merged: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.approx, self.decomp, self.unique, self.guide, self.loc, self.merged];
        if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("loss weights must be finite and non-negative".into()));
        }
        if self.n_guide == 0 {
            return Err(Error::InvalidArgument("n_guide must be at least 1".into()));
        }
        if !(self.near_surface_scale >= 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidArgument("bad tau or near-surface scale".into()));
        }
        Ok(())
    }
}

/// Value of every loss term plus the weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub approx: f64,
    pub decomp: f64,
    pub unique: f64,
    pub guide: f64,
    pub loc: f64,
    pub merged: f64,
    pub total: f64,
}

impl LossTerms {
    fn check_finite(&self) -> Result<()> {
        for (name, v) in [
            ("approx", self.approx),
            ("decomp", self.decomp),
            ("unique", self.unique),
            ("guide", self.guide),
            ("loc", self.loc),
            ("merged", self.merged),
            ("total", self.total),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("loss term {name}")));
            }
        }
        Ok(())
    }
}

/// Samples used for one loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LossBatch<'a, const D: usize> {
    pub volume: &'a SampleSet<D>,
    pub surface: &'a SampleSet<D>,
    /// Samples inside the target, for guide / loc / merged.
    pub interior: &'a SampleSet<D>,
}

fn sample_weight(source: SampleSource, near_surface_scale: f64) -> f64 {
    match source {
        SampleSource::Volume => 1.0,
        SampleSource::NearSurface => near_surface_scale,
    }
}

/// Orders by distance value, then coordinates, so the chosen set does not
/// depend on sample order.
fn canonical_cmp<const D: usize>(a: (f64, &Point<D>), b: (f64, &Point<D>)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| {
        a.1.iter()
            .zip(b.1.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// For each element, the indices of the `n` interior samples with the smallest
/// smooth distance, sorted ascending (so entry 0 is the nearest).
pub fn select_nearest<const D: usize>(
    dec: &Decomposition<D>,
    interior: &SampleSet<D>,
    n: usize,
) -> Result<Vec<Vec<usize>>> {
    if interior.len() < n || interior.is_empty() {
        return Err(Error::TooFewInterior {
            needed: n.max(1),
            got: interior.len(),
        });
    }
    Ok(dec
        .elements
        .iter()
        .map(|e| {
            let pe = e.prepare();
            let phi: Vec<f64> = interior.points.iter().map(|x| pe.smooth_sdf(x, dec.mode)).collect();
            nearest_indices(&phi, &interior.points, n)
        })
        .collect())
}

fn nearest_indices<const D: usize>(phi: &[f64], points: &[Point<D>], n: usize) -> Vec<usize> {
    let cmp = |&a: &usize, &b: &usize| canonical_cmp((phi[a], &points[a]), (phi[b], &points[b]));
    let mut idx: Vec<usize> = (0..phi.len()).collect();
    if n < idx.len() {
        idx.select_nth_unstable_by(n, cmp);
        idx.truncate(n);
    }
    idx.sort_unstable_by(cmp);
    idx
}

fn check_sets<const D: usize>(sets: &[&SampleSet<D>]) -> Result<()> {
    if sets.iter().all(|s| s.is_empty()) {
        return Err(Error::EmptySamples);
    }
    for s in sets.iter().filter(|s| !s.is_empty()) {
        s.validate()?;
    }
    Ok(())
}

/// Mean of `w(x) (O_hat(x) - O(x))^2` over all given sets.
pub fn loss_approx<const D: usize>(
    dec: &Decomposition<D>,
    sets: &[&SampleSet<D>],
    near_surface_scale: f64,
) -> Result<f64> {
    check_sets(sets)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in sets {
        let w = sample_weight(s.source, near_surface_scale);
        for (x, o) in s.points.iter().zip(&s.labels) {
            let r = dec.union_indicator(x) - o;
            sum += w * r * r;
            n += 1;
        }
    }
    Ok(sum / n as f64)
}

/// Mean of `relu(sum_k C_k(x) - tau)^2` over all given sets.
pub fn loss_decomp<const D: usize>(dec: &Decomposition<D>, sets: &[&SampleSet<D>], tau: f64) -> Result<f64> {
    check_sets(sets)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in sets {
        for x in &s.points {
            let total: f64 = dec.elements.iter().map(|e| e.indicator(x, dec.sigma, dec.mode)).sum();
            let r = (total - tau).max(0.0);
            sum += r * r;
            n += 1;
        }
    }
    Ok(sum / n as f64)
}

/// `(1/K) sum_k (1/H) sum_h d_h^2`.
pub fn loss_unique<const D: usize>(dec: &Decomposition<D>) -> f64 {
    let k = dec.elements.len() as f64;
    dec.elements
        .iter()
        .map(|e| e.planes.iter().map(|p| p.offset * p.offset).sum::<f64>() / e.planes.len() as f64)
        .sum::<f64>()
        / k
}

/// `(1/K) sum_k (1/N) sum_{x in N_k} (C_k(x) - O(x))^2`.
pub fn loss_guide<const D: usize>(dec: &Decomposition<D>, interior: &SampleSet<D>, n: usize) -> Result<f64> {
    let sel = select_nearest(dec, interior, n)?;
    let per_k = dec.elements.iter().zip(&sel).map(|(e, idx)| {
        idx.iter()
            .map(|&i| {
                let r = e.indicator(&interior.points[i], dec.sigma, dec.mode) - interior.labels[i];
                r * r
            })
            .sum::<f64>()
            / n as f64
    });
    Ok(per_k.sum::<f64>() / dec.elements.len() as f64)
}

/// `(1/K) sum_k |c_k - x*_k|^2` with `x*_k` the interior sample of smallest `phi_k`.
pub fn loss_loc<const D: usize>(dec: &Decomposition<D>, interior: &SampleSet<D>) -> Result<f64> {
    let sel = select_nearest(dec, interior, 1)?;
    let sum: f64 = dec
        .elements
        .iter()
        .zip(&sel)
        .map(|(e, idx)| (e.translation - interior.points[idx[0]]).norm_squared())
        .sum();
    Ok(sum / dec.elements.len() as f64)
}

/// `(1/K) sum_k (1/N) sum_{x in N_k} relu(phi_k(x))^2`.
pub fn loss_merged<const D: usize>(dec: &Decomposition<D>, interior: &SampleSet<D>, n: usize) -> Result<f64> {
    let sel = select_nearest(dec, interior, n)?;
    let per_k = dec.elements.iter().zip(&sel).map(|(e, idx)| {
        idx.iter()
            .map(|&i| e.smooth_sdf(&interior.points[i], dec.mode).max(0.0).powi(2))
            .sum::<f64>()
            / n as f64
    });
    Ok(per_k.sum::<f64>() / dec.elements.len() as f64)
}

/// Translation `x0` minimizing `sum_h (d_h + n_h . x0)^2`, i.e. the point the
/// unique-parameterization loss centers the planes on. Solved with the
/// Moore-Penrose pseudo-inverse, so rank-deficient normals give the
/// minimum-norm solution.
pub fn center_offsets_closed_form<const D: usize>(planes: &[Hyperplane<D>]) -> Point<D> {
    let n = DMatrix::from_fn(planes.len(), D, |r, c| planes[r].normal()[c]);
    let rhs = DVector::from_iterator(planes.len(), planes.iter().map(|p| -p.offset));
    let svd = n.svd(true, true);
    let x = svd
        .solve(&rhs, 1e-12)
        .expect("SVD computed with both U and V");
    Point::from_fn(|i, _| x[i])
}

/// Per-sample scratch for the fused forward/backward pass.
struct Scratch {
    /// `K * H` plane distances, then overwritten by softmax weights.
    h: Vec<f64>,
    w: Vec<f64>,
    phi: Vec<f64>,
    c: Vec<f64>,
}

impl Scratch {
    fn new(k: usize, h: usize) -> Self {
        Self {
            h: vec![0.0; k * h],
            w: vec![0.0; k * h],
            phi: vec![0.0; k],
            c: vec![0.0; k],
        }
    }
}

/// Forward pass of element `k` at `x`: fills plane distances, softmax weights
/// and returns `phi`.
#[inline]
fn element_forward<const D: usize>(
    pe: &PreparedElement<D>,
    x: &Point<D>,
    mode: SdfMode,
    h_out: &mut [f64],
    w_out: &mut [f64],
) -> f64 {
    let xl = x - pe.translation;
    let mut max = f64::NEG_INFINITY;
    for (j, (n, d)) in pe.normals.iter().zip(&pe.offsets).enumerate() {
        let v = n.dot(&xl) + d;
        h_out[j] = v;
        max = max.max(v);
    }
    let mut sum = 0.0;
    for j in 0..h_out.len() {
        let e = (pe.delta * (h_out[j] - max)).exp();
        w_out[j] = e;
        sum += e;
    }
    for w in w_out.iter_mut() {
        *w /= sum;
    }
    match mode {
        SdfMode::Normalized => max + sum.ln() / pe.delta,
        SdfMode::Literal => pe.delta * max + sum.ln(),
    }
}

/// Adds `dphi * d(phi_k(x))/d(params of k)` into `grad`.
#[allow(clippy::too_many_arguments)]
#[inline]
fn element_backward<const D: usize>(
    pe: &PreparedElement<D>,
    k: usize,
    x: &Point<D>,
    phi: f64,
    h: &[f64],
    w: &[f64],
    dphi: f64,
    mode: SdfMode,
    layout: &ParamLayout,
    grad: &mut [f64],
) {
    if dphi == 0.0 {
        return;
    }
    let xl = x - pe.translation;
    let scale = match mode {
        SdfMode::Normalized => 1.0,
        SdfMode::Literal => pe.delta,
    };
    let weighted_h: f64 = w.iter().zip(h).map(|(a, b)| a * b).sum();
    grad[layout.delta(k)] += dphi
        * match mode {
            SdfMode::Normalized => (weighted_h - phi) / pe.delta,
            SdfMode::Literal => weighted_h,
        };
    let t0 = layout.translation(k);
    for (j, n) in pe.normals.iter().enumerate() {
        let gh = dphi * scale * w[j];
        if gh == 0.0 {
            continue;
        }
        grad[layout.offset(k, j)] += gh;
        // x_local = x - c  =>  dH/dc = -n
        for a in 0..D {
            grad[t0 + a] -= gh * n[a];
        }
        // d(n_hat . x)/d(raw) = (x - n_hat (n_hat . x)) / |raw|
        let proj = n.dot(&xl);
        let g0 = layout.normal(k, j);
        let inv = gh / pe.raw_norms[j];
        for a in 0..D {
            grad[g0 + a] += inv * (xl[a] - n[a] * proj);
        }
    }
}

/// Weighted total loss and, optionally, its gradient over the packed parameters.
///
/// Individual term values are always reported. In merged mode the total uses
/// `merged` in place of `guide + loc`.
pub fn evaluate<const D: usize>(
    dec: &Decomposition<D>,
    batch: &LossBatch<'_, D>,
    weights: &LossWeights,
    with_grad: bool,
) -> Result<(LossTerms, Option<Vec<f64>>)> {
    weights.validate()?;
    check_sets(&[batch.volume, batch.surface])?;
    let layout = ParamLayout::of(dec);
    let k_count = dec.elements.len();
    let h_count = layout.planes;
    let prepared = dec.prepare();
    let sigma = dec.sigma;
    let mode = dec.mode;

    // approx + decomp over volume and surface samples
    let rows: Vec<(&Point<D>, f64, f64)> = [batch.volume, batch.surface]
        .iter()
        .flat_map(|s| {
            let w = sample_weight(s.source, weights.near_surface_scale);
            s.points.iter().zip(&s.labels).map(move |(x, &o)| (x, o, w))
        })
        .collect();
    let n_rows = rows.len() as f64;
    let glen = if with_grad { layout.len() } else { 0 };

    let chunk_results: Vec<(f64, f64, Vec<f64>)> = rows
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut s = Scratch::new(k_count, h_count);
            let mut grad = vec![0.0; glen];
            let (mut approx, mut decomp) = (0.0, 0.0);
            for &(x, o, w) in chunk {
                let mut best = 0;
                let mut c_sum = 0.0;
                for (k, pe) in prepared.iter().enumerate() {
                    let r = k * h_count..(k + 1) * h_count;
                    let phi = element_forward(pe, x, mode, &mut s.h[r.clone()], &mut s.w[r]);
                    s.phi[k] = phi;
                    s.c[k] = sigmoid(-sigma * phi);
                    c_sum += s.c[k];
                    if s.c[k] > s.c[best] {
                        best = k;
                    }
                }
                let resid = s.c[best] - o;
                approx += w * resid * resid;
                let over = (c_sum - weights.tau).max(0.0);
                decomp += over * over;
                if !with_grad {
                    continue;
                }
                for k in 0..k_count {
                    let mut dc = weights.decomp * 2.0 * over / n_rows;
                    if k == best {
                        dc += weights.approx * 2.0 * w * resid / n_rows;
                    }
                    if dc == 0.0 {
                        continue;
                    }
                    let dphi = dc * (-sigma * s.c[k] * (1.0 - s.c[k]));
                    let r = k * h_count..(k + 1) * h_count;
                    element_backward(
                        &prepared[k], k, x, s.phi[k], &s.h[r.clone()], &s.w[r], dphi, mode, &layout, &mut grad,
                    );
                }
            }
            (approx, decomp, grad)
        })
        .collect();

    let mut terms = LossTerms::default();
    let mut grad = vec![0.0; glen];
    for (a, d, g) in &chunk_results {
        terms.approx += a;
        terms.decomp += d;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    terms.approx /= n_rows;
    terms.decomp /= n_rows;

    // unique
    terms.unique = loss_unique(dec);
    if with_grad && weights.unique != 0.0 {
        let scale = weights.unique * 2.0 / (k_count * h_count) as f64;
        for (k, e) in dec.elements.iter().enumerate() {
            for (j, p) in e.planes.iter().enumerate() {
                grad[layout.offset(k, j)] += scale * p.offset;
            }
        }
    }

    // guide / loc / merged share the nearest-sample selection
    let need_guide = weights.use_merged || weights.guide != 0.0 || weights.loc != 0.0;
    if need_guide || !batch.interior.is_empty() {
        let interior = batch.interior;
        let n = weights.n_guide;
        if interior.len() < n {
            if need_guide {
                return Err(Error::TooFewInterior {
                    needed: n,
                    got: interior.len(),
                });
            }
        } else {
            guidance_terms(dec, &prepared, interior, weights, with_grad, &layout, &mut terms, &mut grad);
        }
    }

    terms.total = weights.approx * terms.approx + weights.decomp * terms.decomp + weights.unique * terms.unique;
    terms.total += if weights.use_merged {
        weights.merged * terms.merged
    } else {
        weights.guide * terms.guide + weights.loc * terms.loc
    };
    terms.check_finite()?;
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient entry {i} ({:?})", layout.role(i))));
    }
    Ok((terms, with_grad.then_some(grad)))
}

#[allow(clippy::too_many_arguments)]
fn guidance_terms<const D: usize>(
    dec: &Decomposition<D>,
    prepared: &[PreparedElement<D>],
    interior: &SampleSet<D>,
    weights: &LossWeights,
    with_grad: bool,
    layout: &ParamLayout,
    terms: &mut LossTerms,
    grad: &mut [f64],
) {
    let k_count = prepared.len();
    let h_count = layout.planes;
    let n = weights.n_guide;
    let kf = k_count as f64;
    let nf = n as f64;
    let mut h = vec![0.0; h_count];
    let mut w = vec![0.0; h_count];

    let per_element: Vec<(f64, f64, f64, Vec<f64>)> = prepared
        .par_iter()
        .map(|pe| {
            let mut h = vec![0.0; h_count];
            let mut w = vec![0.0; h_count];
            let phi: Vec<f64> = interior
                .points
                .iter()
                .map(|x| element_forward(pe, x, dec.mode, &mut h, &mut w))
                .collect();
            let idx = nearest_indices(&phi, &interior.points, n);
            let mut guide = 0.0;
            let mut merged = 0.0;
            let mut dphis = Vec::with_capacity(n);
            for &i in &idx {
                let c = sigmoid(-dec.sigma * phi[i]);
                let r = c - interior.labels[i];
                guide += r * r;
                let relu = phi[i].max(0.0);
                merged += relu * relu;
                let mut dphi = 0.0;
                if weights.use_merged {
                    dphi += weights.merged * 2.0 * relu / (kf * nf);
                } else {
                    dphi += weights.guide * 2.0 * r / (kf * nf) * (-dec.sigma * c * (1.0 - c));
                }
                dphis.push(dphi);
            }
            let nearest = idx[0];
            let loc = (pe.translation - interior.points[nearest]).norm_squared();
            let mut packed = Vec::with_capacity(2 * n + 1);
            packed.extend(idx.iter().map(|&i| i as f64));
            packed.extend(dphis);
            (guide / nf, loc, merged / nf, packed)
        })
        .collect();

    for (k, (guide, loc, merged, packed)) in per_element.iter().enumerate() {
        terms.guide += guide / kf;
        terms.loc += loc / kf;
        terms.merged += merged / kf;
        if !with_grad {
            continue;
        }
        let pe = &prepared[k];
        let (idx, dphis) = packed.split_at(n);
        for (&i, &dphi) in idx.iter().zip(dphis) {
            if dphi == 0.0 {
                continue;
            }
            let x = &interior.points[i as usize];
            let phi = element_forward(pe, x, dec.mode, &mut h, &mut w);
            element_backward(pe, k, x, phi, &h, &w, dphi, dec.mode, layout, grad);
        }
        if !weights.use_merged && weights.loc != 0.0 {
            let nearest = idx[0] as usize;
            let t0 = layout.translation(k);
            let diff = pe.translation - interior.points[nearest];
            for a in 0..D {
                grad[t0 + a] += weights.loc * 2.0 * diff[a] / kf;
            }
        }
    }
}

/// Convenience wrapper returning the weighted total and its gradient.
pub fn total_loss_and_grad<const D: usize>(
    dec: &Decomposition<D>,
    batch: &LossBatch<'_, D>,
    weights: &LossWeights,
) -> Result<(LossTerms, Vec<f64>)> {
    let (terms, grad) = evaluate(dec, batch, weights, true)?;
    Ok((terms, grad.expect("gradient requested")))
}

/// The unique-parameterization loss of a single plane set after moving its
/// origin to `x`, and the gradient with respect to `x`.
pub fn unique_loss_at<const D: usize>(planes: &[Hyperplane<D>], x: &Point<D>) -> (f64, Point<D>) {
    let element = ConvexElement::new(planes.iter().map(|p| p.recentered(x)).collect(), 1.0, Point::zeros());
    let dec = Decomposition::new(vec![element], 1.0);
    let value = loss_unique(&dec);
    // d/dx of (1/H) sum (d_h + n_h . x)^2 through the offset gradient
    let h = planes.len() as f64;
    let mut g = Point::zeros();
    for (p, q) in planes.iter().zip(&dec.elements[0].planes) {
        g += p.normal() * (2.0 * q.offset / h);
    }
    (value, g)
}
