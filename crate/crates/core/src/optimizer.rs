//! Adam fitting of a decomposition to a target solid.

use std::fmt;

use rayon::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::extraction::polytope_vertices;
use crate::geometry::{
    ConvexElement, Decomposition, Hyperplane, Point, SdfMode, UnionEvaluator, MIN_DELTA, MIN_NORMAL_NORM,
};
use crate::losses::{evaluate, LossBatch, LossTerms, LossWeights};
use crate::metrics::volumetric_iou;
use crate::params::{pack, unpack_into, ParamLayout, ParamRole};
use crate::sampling::{
    default_jitter, mix_seeds, oracle_eval, rng_from_seed, sample_near_surface, sample_volume, subsample, SampleSet,
    TargetOracle,
};
use crate::{Error, Result};

/// Loss magnitude treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e8;
const INIT_ATTEMPTS: usize = 10_000;

// salts separating the random streams derived from the fit seed
const SALT_VOLUME: u64 = 1;
const SALT_SURFACE: u64 = 2;
const SALT_INIT: u64 = 3;
const SALT_EVAL: u64 = 4;
const SALT_BATCH_VOLUME: u64 = 5;
const SALT_BATCH_SURFACE: u64 = 6;
const SALT_BATCH_INTERIOR: u64 = 7;
const SALT_RESEED: u64 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub k: usize,
    pub h: usize,
    pub iters: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub sigma: f64,
    pub weights: LossWeights,
    pub batch_volume: usize,
    pub batch_surface: usize,
    /// Size of the volume and near-surface sample banks.
    pub bank_volume: usize,
    pub bank_surface: usize,
    /// Near-surface jitter std; `None` uses 0.5% of the bbox diagonal.
    pub jitter: Option<f64>,
    /// Initial element radius as a fraction of the bbox diagonal.
    pub init_radius: f64,
    pub learn_delta: bool,
    pub sdf_mode: SdfMode,
    /// Steps between logged loss records.
    pub log_every: usize,
    /// Steps between IoU evaluations; 0 evaluates only at the end.
    pub eval_every: usize,
    pub eval_samples: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            k: 4,
            h: 8,
            iters: 10_000,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            sigma: 75.0,
            weights: LossWeights::default(),
            batch_volume: 1024,
            batch_surface: 1024,
            bank_volume: 100_000,
            bank_surface: 100_000,
            jitter: None,
            init_radius: 0.05,
            learn_delta: true,
            sdf_mode: SdfMode::Normalized,
            log_every: 100,
            eval_every: 1000,
            eval_samples: 100_000,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.h < dim + 1 {
            return bad(format!("h must be at least {} to bound a {dim}D polytope, got {}", dim + 1, self.h));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps_adam > 0.0) {
            return bad("Adam betas must lie in [0, 1) and eps must be positive".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.batch_volume == 0 || self.batch_surface == 0 {
            return bad("batch sizes must be positive".into());
        }
        if self.batch_volume > self.bank_volume || self.batch_surface > self.bank_surface {
            return bad("batch sizes cannot exceed bank sizes".into());
        }
        if !(self.init_radius > 0.0) {
            return bad("init radius must be positive".into());
        }
        if self.eval_samples == 0 {
            return bad("eval samples must be positive".into());
        }
        self.weights.validate()
    }

    /// Names of top-level fields that differ from the defaults.
    pub fn overrides(&self) -> Vec<String> {
        let ours = serde_json::to_value(self).expect("config serializes");
        let base = serde_json::to_value(Self::default()).expect("config serializes");
        let mut out = Vec::new();
        if let (Some(a), Some(b)) = (ours.as_object(), base.as_object()) {
            for (key, value) in a {
                if b.get(key) != Some(value) {
                    out.push(key.clone());
                }
            }
        }
        out
    }
}

/// Adam moments; one per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], cfg: &FitConfig) -> Result<()> {
    if params.len() != grad.len() || state.m.len() != grad.len() {
        return Err(Error::InvalidArgument(format!(
            "parameter / gradient / state lengths differ: {} / {} / {}",
            params.len(),
            grad.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient entry {i}")));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps_adam);
    }
    Ok(())
}

/// Keeps `delta >= MIN_DELTA` and replaces near-zero raw normals with random
/// unit vectors.
pub fn project_constraints(params: &mut [f64], layout: &ParamLayout, seed: u64) {
    for k in 0..layout.elements {
        let d = layout.delta(k);
        if !(params[d] >= MIN_DELTA) {
            params[d] = MIN_DELTA;
        }
        for h in 0..layout.planes {
            let s = layout.normal(k, h);
            let raw = &mut params[s..s + layout.dim];
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < MIN_NORMAL_NORM {
                let mut rng = rng_from_seed(mix_seeds(seed, (k * layout.planes + h) as u64));
                let fresh: Vec<f64> = (0..layout.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let fnorm = fresh.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (r, f) in raw.iter_mut().zip(fresh) {
                    *r = f / fnorm;
                }
            }
        }
    }
}

/// Sample banks drawn from the target.
#[derive(Debug, Clone)]
pub struct SampleBanks<const D: usize> {
    pub volume: SampleSet<D>,
    pub surface: SampleSet<D>,
    pub interior: SampleSet<D>,
}

impl<const D: usize> SampleBanks<D> {
    pub fn draw(oracle: &(impl TargetOracle<D> + ?Sized), cfg: &FitConfig) -> Result<Self> {
        let volume = sample_volume(oracle, cfg.bank_volume, mix_seeds(cfg.seed, SALT_VOLUME));
        let jitter = cfg.jitter.unwrap_or_else(|| default_jitter(&oracle.bbox()));
        let surface = sample_near_surface(oracle, cfg.bank_surface, jitter, mix_seeds(cfg.seed, SALT_SURFACE))?;
        let interior = volume.interior();
        let needed = cfg.k.max(cfg.weights.n_guide);
        if interior.len() < needed {
            return Err(Error::TooFewInterior {
                needed,
                got: interior.len(),
            });
        }
        Ok(Self { volume, surface, interior })
    }
}

fn farthest_point_subsample<const D: usize>(points: &[Point<D>], k: usize) -> Vec<Point<D>> {
    let centroid = points.iter().sum::<Point<D>>() / points.len() as f64;
    let first = (0..points.len())
        .min_by(|&a, &b| {
            (points[a] - centroid)
                .norm_squared()
                .total_cmp(&(points[b] - centroid).norm_squared())
        })
        .expect("non-empty");
    let mut chosen = vec![points[first]];
    let mut dist: Vec<f64> = points.iter().map(|p| (p - points[first]).norm_squared()).collect();
    while chosen.len() < k {
        let next = (0..points.len()).max_by(|&a, &b| dist[a].total_cmp(&dist[b])).unwrap();
        let p = points[next];
        chosen.push(p);
        for (d, q) in dist.iter_mut().zip(points) {
            *d = d.min((q - p).norm_squared());
        }
    }
    chosen
}

/// Small random polytopes centered at well-spread interior samples.
///
/// Each element's normals are uniform on the sphere with offsets `-r0`
/// (`r0 = init_radius * bbox diagonal`) and `delta = 10 / r0`; normal sets
/// that leave the polytope unbounded are redrawn.
pub fn init_decomposition<const D: usize>(
    oracle: &(impl TargetOracle<D> + ?Sized),
    interior: &SampleSet<D>,
    cfg: &FitConfig,
) -> Result<Decomposition<D>> {
    cfg.validate(D)?;
    if interior.len() < cfg.k {
        return Err(Error::TooFewInterior {
            needed: cfg.k,
            got: interior.len(),
        });
    }
    let r0 = cfg.init_radius * oracle.bbox().diagonal();
    let centers = farthest_point_subsample(&interior.points, cfg.k);
    let mut rng = rng_from_seed(mix_seeds(cfg.seed, SALT_INIT));
    let mut elements = Vec::with_capacity(cfg.k);
    for c in centers {
        let mut planes = None;
        for _ in 0..INIT_ATTEMPTS {
            let candidate: Vec<Hyperplane<D>> = (0..cfg.h)
                .map(|_| {
                    let n = Point::<D>::from_fn(|_, _| StandardNormal.sample(&mut rng));
                    Hyperplane::new(n.normalize(), -r0)
                })
                .collect();
            if polytope_vertices(&candidate).is_ok() {
                planes = Some(candidate);
                break;
            }
        }
        let planes = planes.ok_or_else(|| {
            Error::InvalidArgument(format!("could not draw {} bounded random planes", cfg.h))
        })?;
        elements.push(ConvexElement::new(planes, 10.0 / r0, c));
    }
    Ok(Decomposition::new(elements, cfg.sigma).with_mode(cfg.sdf_mode))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitHeader {
    pub dim: usize,
    pub target: String,
    pub config: FitConfig,
    /// Config fields that differ from the defaults.
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub step: usize,
    #[serde(flatten)]
    pub terms: LossTerms,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iou: Option<f64>,
}

/// Loss trajectory of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub header: FitHeader,
    pub records: Vec<FitRecord>,
}

impl FitReport {
    pub fn final_iou(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.iou)
    }

    pub fn last(&self) -> Option<&FitRecord> {
        self.records.last()
    }

    /// One JSON object per line: the header, then one per record.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = serde_json::from_str(lines.next().ok_or_else(|| Error::parse("fit report", "empty"))?)?;
        let records = lines.map(serde_json::from_str).collect::<std::result::Result<_, _>>()?;
        Ok(Self { header, records })
    }
}

/// A fit that stopped early. Carries the last parameters with a finite loss
/// when the failure happened after initialization.
#[derive(Debug)]
pub struct FitFailure<const D: usize> {
    pub error: Error,
    pub last_state: Option<Decomposition<D>>,
    pub report: FitReport,
}

impl<const D: usize> fmt::Display for FitFailure<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fit failed after {} logged steps: {}", self.report.records.len(), self.error)
    }
}

impl<const D: usize> std::error::Error for FitFailure<D> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// IoU of a decomposition against a fixed set of labeled uniform samples,
/// drawn once so periodic evaluations are comparable.
pub struct IouProbe<const D: usize> {
    points: SampleSet<D>,
}

impl<const D: usize> IouProbe<D> {
    pub fn new(oracle: &(impl TargetOracle<D> + ?Sized), n: usize, seed: u64) -> Self {
        Self {
            points: sample_volume(oracle, n, seed),
        }
    }

    pub fn iou(&self, dec: &Decomposition<D>) -> Result<f64> {
        let ev = UnionEvaluator::new(dec);
        let (inter, union) = self
            .points
            .points
            .par_iter()
            .zip(&self.points.labels)
            .map_init(Vec::new, |buf, (p, &o)| {
                let (a, b) = (ev.union_indicator(p, buf) >= 0.5, o >= 0.5);
                (usize::from(a && b), usize::from(a || b))
            })
            .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
        if union == 0 {
            return Err(Error::EmptyUnion);
        }
        Ok(inter as f64 / union as f64)
    }
}

/// IoU of `dec` against `oracle` on `n` fresh uniform samples.
pub fn iou_against<const D: usize>(
    dec: &Decomposition<D>,
    oracle: &(impl TargetOracle<D> + ?Sized),
    n: usize,
    seed: u64,
) -> Result<f64> {
    volumetric_iou(|p| dec.union_indicator(p), |p| oracle_eval(oracle, p), &oracle.bbox(), n, seed)
}

/// Fits a decomposition to `oracle`, drawing sample banks from it.
pub fn fit<const D: usize>(
    oracle: &(impl TargetOracle<D> + ?Sized),
    cfg: &FitConfig,
) -> std::result::Result<(Decomposition<D>, FitReport), FitFailure<D>> {
    let report = FitReport {
        header: FitHeader {
            dim: D,
            target: oracle.kind().to_string(),
            config: cfg.clone(),
            overrides: cfg.overrides(),
        },
        records: Vec::new(),
    };
    let early = |error: Error, report: &FitReport| FitFailure {
        error,
        last_state: None,
        report: report.clone(),
    };
    if let Err(e) = cfg.validate(D) {
        return Err(early(e, &report));
    }
    let banks = SampleBanks::draw(oracle, cfg).map_err(|e| early(e, &report))?;
    let dec = init_decomposition(oracle, &banks.interior, cfg).map_err(|e| early(e, &report))?;
    let probe = IouProbe::new(oracle, cfg.eval_samples, mix_seeds(cfg.seed, SALT_EVAL));
    fit_from(dec, &banks, &probe, cfg, report)
}

/// Runs the optimization loop from a given starting decomposition.
pub fn fit_from<const D: usize>(
    mut dec: Decomposition<D>,
    banks: &SampleBanks<D>,
    probe: &IouProbe<D>,
    cfg: &FitConfig,
    mut report: FitReport,
) -> std::result::Result<(Decomposition<D>, FitReport), FitFailure<D>> {
    let layout = ParamLayout::of(&dec);
    let mut params = pack(&dec);
    let mut state = AdamState::new(params.len());
    let mut last_good = dec.clone();
    let batch_interior = cfg.batch_volume.min(banks.interior.len());

    for step in 0..cfg.iters {
        let fail = |error: Error, report: &FitReport, last: &Decomposition<D>| FitFailure {
            error,
            last_state: Some(last.clone()),
            report: report.clone(),
        };
        let s = step as u64;
        let batch = (|| -> Result<_> {
            Ok((
                subsample(&banks.volume, cfg.batch_volume, mix_seeds(SALT_BATCH_VOLUME, s))?,
                subsample(&banks.surface, cfg.batch_surface, mix_seeds(SALT_BATCH_SURFACE, s))?,
                subsample(&banks.interior, batch_interior, mix_seeds(SALT_BATCH_INTERIOR, s))?,
            ))
        })()
        .map_err(|e| fail(e, &report, &last_good))?;
        let lb = LossBatch {
            volume: &batch.0,
            surface: &batch.1,
            interior: &batch.2,
        };
        let (terms, grad) = match evaluate(&dec, &lb, &cfg.weights, true) {
            Ok((t, g)) => (t, g.expect("gradient requested")),
            Err(e) => return Err(fail(e, &report, &last_good)),
        };
        if terms.total.abs() > DIVERGENCE_LIMIT {
            return Err(fail(
                Error::NonFinite(format!("loss diverged to {:e} at step {step}", terms.total)),
                &report,
                &last_good,
            ));
        }
        last_good.clone_from(&dec);

        let eval_now = cfg.eval_every > 0 && step % cfg.eval_every == 0;
        if step % cfg.log_every.max(1) == 0 || eval_now {
            let iou = if eval_now { Some(probe.iou(&dec).map_err(|e| fail(e, &report, &last_good))?) } else { None };
            report.records.push(FitRecord { step, terms, iou });
        }

        let mut grad = grad;
        if !cfg.learn_delta {
            for (i, g) in grad.iter_mut().enumerate() {
                if matches!(layout.role(i), ParamRole::Delta { .. }) {
                    *g = 0.0;
                }
            }
        }
        adam_step(&mut state, &mut params, &grad, cfg).map_err(|e| fail(e, &report, &last_good))?;
        project_constraints(&mut params, &layout, mix_seeds(cfg.seed ^ SALT_RESEED, s));
        unpack_into(&mut dec, &params).map_err(|e| fail(e, &report, &last_good))?;
    }

    // final record on the full banks
    let fail_end = |error: Error, report: &FitReport| FitFailure {
        error,
        last_state: Some(dec.clone()),
        report: report.clone(),
    };
    let lb = LossBatch {
        volume: &banks.volume,
        surface: &banks.surface,
        interior: &banks.interior,
    };
    let (terms, _) = evaluate(&dec, &lb, &cfg.weights, false).map_err(|e| fail_end(e, &report))?;
    let iou = probe.iou(&dec).map_err(|e| fail_end(e, &report))?;
    report.records.push(FitRecord {
        step: cfg.iters,
        terms,
        iou: Some(iou),
    });
    Ok((dec, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{Csg, CsgTarget};

    fn cube_target() -> CsgTarget<3> {
        CsgTarget::new(Csg::cuboid(Point::<3>::zeros(), Point::repeat(1.0)))
    }

    fn small_cfg() -> FitConfig {
        FitConfig {
            k: 2,
            h: 6,
            iters: 30,
            bank_volume: 4000,
            bank_surface: 4000,
            batch_volume: 256,
            batch_surface: 256,
            eval_samples: 2000,
            eval_every: 10,
            log_every: 5,
            seed: 3,
            ..FitConfig::default()
        }
    }

    #[test]
    fn adam_examples() {
        let cfg = FitConfig::default();
        let mut s = AdamState::new(2);
        let mut p = vec![1.0, -2.0];
        adam_step(&mut s, &mut p, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert!(s.m.iter().chain(&s.v).all(|v| *v == 0.0));
        assert_eq!(s.t, 1);

        let mut s = AdamState::new(2);
        let mut p = vec![0.0, 0.0];
        adam_step(&mut s, &mut p, &[3.0, -0.25], &cfg).unwrap();
        assert!((p[0] + 1e-4).abs() < 1e-11 && (p[1] - 1e-4).abs() < 1e-11, "{p:?}");
        let before = p.clone();
        adam_step(&mut s, &mut p, &[3.0, -0.25], &cfg).unwrap();
        assert!(p[0] < before[0] && p[1] > before[1]);
        assert!(adam_step(&mut s, &mut p, &[f64::NAN, 0.0], &cfg).is_err());
        assert!(adam_step(&mut s, &mut p, &[0.0], &cfg).is_err());
    }

    #[test]
    fn constraints_are_projected() {
        let dec = Decomposition::new(vec![ConvexElement::axis_box(Point::<3>::zeros(), Point::repeat(0.5), 10.0)], 75.0);
        let layout = ParamLayout::of(&dec);
        let mut p = pack(&dec);
        p[layout.delta(0)] = -4.0;
        let n = layout.normal(0, 2);
        p[n..n + 3].copy_from_slice(&[0.0, 1e-13, 0.0]);
        project_constraints(&mut p, &layout, 1);
        assert_eq!(p[layout.delta(0)], MIN_DELTA);
        let norm = p[n..n + 3].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn init_examples() {
        let target = cube_target();
        let cfg = FitConfig { k: 1, h: 6, ..small_cfg() };
        let banks = SampleBanks::draw(&target, &cfg).unwrap();
        let dec = init_decomposition(&target, &banks.interior, &cfg).unwrap();
        assert!(target.sdf(&dec.elements[0].translation) < 0.0);
        let cfg4 = FitConfig { k: 4, h: 6, ..small_cfg() };
        let a = init_decomposition(&target, &banks.interior, &cfg4).unwrap();
        let b = init_decomposition(&target, &banks.interior, &cfg4).unwrap();
        assert_eq!(a, b);
        for e in &a.elements {
            assert!(crate::extraction::planes_to_mesh(e).is_ok());
        }
        let none = SampleSet::<3>::new(vec![], vec![], crate::sampling::SampleSource::Volume, 0);
        assert!(matches!(init_decomposition(&target, &none, &cfg), Err(Error::TooFewInterior { .. })));
    }

    #[test]
    fn fit_is_deterministic_and_reports() {
        let target = cube_target();
        let (d1, r1) = fit(&target, &small_cfg()).unwrap();
        let (d2, r2) = fit(&target, &small_cfg()).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(r1, r2);
        assert_eq!(r1.records.first().unwrap().step, 0);
        assert_eq!(r1.records.last().unwrap().step, 30);
        assert!(r1.final_iou().is_some());
        assert!(r1.header.overrides.contains(&"k".to_string()));
        let back = FitReport::from_jsonl(&r1.to_jsonl()).unwrap();
        assert_eq!(back, r1);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let target = cube_target();
        let err = fit(&target, &FitConfig { k: 0, ..small_cfg() }).unwrap_err();
        assert!(matches!(err.error, Error::InvalidArgument(_)));
        assert!(err.last_state.is_none());
        assert!(fit(&target, &FitConfig { h: 3, ..small_cfg() }).is_err());
        let grid = crate::sampling::OccupancyGrid::from_fn([4, 4, 4], crate::sampling::Aabb::cube(1.0), |_| 255);
        assert!(matches!(fit(&grid, &small_cfg()).unwrap_err().error, Error::NoSurface(_)));
    }

    #[test]
    fn divergence_keeps_last_finite_state() {
        let target = cube_target();
        let cfg = FitConfig {
            lr: 1e6,
            iters: 200,
            weights: LossWeights { unique: 1e3, ..LossWeights::default() },
            ..small_cfg()
        };
        let err = fit(&target, &cfg).unwrap_err();
        assert!(matches!(err.error, Error::NonFinite(_)), "{}", err.error);
        let last = err.last_state.expect("state kept");
        assert!(last.elements.iter().all(|e| e.planes.iter().all(|p| p.offset.is_finite())));
    }
}
