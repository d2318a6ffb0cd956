use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use convexfit::extraction::{decomposition_to_meshes, decomposition_to_polygons, union_mesh};
use convexfit::marching_cubes::marching_cubes;
use convexfit::mesh::{polygons_boundary_samples, polygons_to_svg};
use convexfit::metrics::{union_boundary_samples, volumetric_iou, SurfaceDistances, DEFAULT_F_THRESHOLD_FRACTION};
use convexfit::persist::{load_any, save};
use convexfit::sampling::{
    default_jitter, mix_seeds, oracle_eval, rng_from_seed, sample_near_surface, sample_volume, OccupancyGrid,
    Silhouette,
};
use convexfit::{
    fit as run_fit, Aabb, AnyDecomposition, Decomposition, FitConfig, MetricsReport, Point, SdfMode, TargetOracle,
};

use crate::target::{expect_dim, Target};
use crate::{EvalArgs, ExtractArgs, FitArgs, McArgs, SampleArgs, UsageError};

const SALT_RECON: u64 = 1;
const SALT_TARGET: u64 = 2;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load_decomposition(path: &Path) -> Result<AnyDecomposition> {
    if !path.exists() {
        return Err(usage(format!("decomposition file {} does not exist", path.display())));
    }
    load_any(path).with_context(|| format!("loading {}", path.display()))
}

fn build_config(a: &FitArgs) -> Result<FitConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("bad config {}: {e}", p.display())))?
        }
        None => FitConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = a.$flag { cfg.$($field).+ = v; })*
        };
    }
    set!(
        k => k, h => h, iters => iters, lr => lr, sigma => sigma, seed => seed,
        batch_volume => batch_volume, batch_surface => batch_surface,
        bank_volume => bank_volume, bank_surface => bank_surface,
        w_approx => weights.approx, w_decomp => weights.decomp, w_unique => weights.unique,
        w_guide => weights.guide, w_loc => weights.loc, w_merged => weights.merged,
        log_every => log_every, eval_every => eval_every, eval_samples => eval_samples,
    );
    if a.merged {
        cfg.weights.use_merged = true;
    }
    if a.freeze_delta {
        cfg.learn_delta = false;
    }
    if a.literal_lse {
        cfg.sdf_mode = SdfMode::Literal;
    }
    Ok(cfg)
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let target = Target::load(&a.target)?;
    let cfg = build_config(a)?;
    cfg.validate(target.dim()).map_err(|e| usage(e.to_string()))?;
    let report_path = a.report.clone().unwrap_or_else(|| a.out.with_extension("report.jsonl"));
    let start = Instant::now();
    match target.dim() {
        2 => fit_dim(target.as_2d().expect("2D target"), &cfg, &a.out, &report_path)?,
        _ => fit_dim(target.as_3d().expect("3D target"), &cfg, &a.out, &report_path)?,
    }
    println!("fit_seconds={:.3}", start.elapsed().as_secs_f64());
    Ok(())
}

fn fit_dim<const D: usize>(oracle: &dyn TargetOracle<D>, cfg: &FitConfig, out: &Path, report_path: &Path) -> Result<()> {
    match run_fit(oracle, cfg) {
        Ok((dec, report)) => {
            save(&dec, out)?;
            write_file(report_path, report.to_jsonl())?;
            if let Some(last) = report.last() {
                let t = &last.terms;
                println!(
                    "step={} total={:.6} approx={:.6} decomp={:.6} unique={:.6} guide={:.6} loc={:.6} merged={:.6}",
                    last.step, t.total, t.approx, t.decomp, t.unique, t.guide, t.loc, t.merged
                );
            }
            if let Some(iou) = report.final_iou() {
                println!("iou={iou:.6}");
            }
            Ok(())
        }
        Err(failure) => {
            write_file(report_path, failure.report.to_jsonl())?;
            if let Some(last) = &failure.last_state {
                let partial = out.with_extension("partial.json");
                save(last, &partial)?;
                eprintln!("last finite state written to {}", partial.display());
            }
            eprintln!("partial report written to {}", report_path.display());
            match failure.error {
                e @ (convexfit::Error::NoSurface(_) | convexfit::Error::TooFewInterior { .. }) => Err(usage(e.to_string())),
                e => Err(e).context("fit failed"),
            }
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn extract(a: &ExtractArgs) -> Result<()> {
    if a.out.is_none() && a.per_convex.is_none() {
        return Err(usage("nothing to write; pass --out and/or --per-convex"));
    }
    if a.repeat == 0 {
        return Err(usage("--repeat must be at least 1"));
    }
    let dec = load_decomposition(&a.input)?;
    let mut times = Vec::with_capacity(a.repeat);
    match dec {
        AnyDecomposition::D3(dec) => {
            let mut ex = None;
            for _ in 0..a.repeat {
                let t = Instant::now();
                ex = Some(decomposition_to_meshes(&dec, a.prune_eps));
                times.push(t.elapsed().as_secs_f64());
            }
            let ex = ex.expect("at least one run");
            for w in &ex.warnings {
                eprintln!("warning: {w}");
            }
            if ex.is_empty() {
                bail!("all {} convexes are degenerate; nothing to extract", dec.elements.len());
            }
            let union = union_mesh(ex.shapes.iter().map(|(_, m)| m));
            if let Some(out) = &a.out {
                write_file(out, union.to_obj())?;
            }
            if let Some(dir) = &a.per_convex {
                for (k, m) in &ex.shapes {
                    write_file(&dir.join(format!("convex_{k:03}.obj")), m.to_obj())?;
                }
            }
            println!(
                "convexes={} kept={} vertices={} triangles={}",
                dec.elements.len(),
                ex.shapes.len(),
                union.vertices.len(),
                union.triangles.len()
            );
        }
        AnyDecomposition::D2(dec) => {
            let mut ex = None;
            for _ in 0..a.repeat {
                let t = Instant::now();
                ex = Some(decomposition_to_polygons(&dec, a.prune_eps));
                times.push(t.elapsed().as_secs_f64());
            }
            let ex = ex.expect("at least one run");
            for w in &ex.warnings {
                eprintln!("warning: {w}");
            }
            if ex.is_empty() {
                bail!("all {} convexes are degenerate; nothing to extract", dec.elements.len());
            }
            let polys: Vec<_> = ex.shapes.iter().map(|(_, p)| p.clone()).collect();
            let svg = |ps: &[convexfit::Polygon]| {
                let bb = Aabb::from_points(ps.iter().flat_map(|p| &p.vertices))
                    .expect("kept polygons have vertices")
                    .padded(0.05);
                polygons_to_svg(ps, bb.min, bb.max)
            };
            if let Some(out) = &a.out {
                write_file(out, svg(&polys))?;
            }
            if let Some(dir) = &a.per_convex {
                for (k, p) in &ex.shapes {
                    write_file(&dir.join(format!("convex_{k:03}.svg")), svg(std::slice::from_ref(p)))?;
                }
            }
            println!(
                "convexes={} kept={} vertices={}",
                dec.elements.len(),
                ex.shapes.len(),
                polys.iter().map(|p| p.vertices.len()).sum::<usize>()
            );
        }
    }
    println!("extract_seconds={:.6} repeats={}", median(times), a.repeat);
    Ok(())
}

fn target_surface<const D: usize>(oracle: &dyn TargetOracle<D>, n: usize, seed: u64) -> Result<Vec<Point<D>>> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| Ok(oracle.surface_point(&mut rng)?)).collect()
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    if a.iou_samples == 0 || a.surface_samples == 0 {
        return Err(usage("sample counts must be positive"));
    }
    if let Some(t) = a.f_threshold {
        if !(t > 0.0) {
            return Err(usage("--f-threshold must be positive"));
        }
    }
    let dec = load_decomposition(&a.input)?;
    let target = Target::load(&a.target)?;
    let report = match &dec {
        AnyDecomposition::D3(dec) => {
            expect_dim(&target, 3)?;
            let oracle = target.as_3d().expect("3D target");
            let ex = decomposition_to_meshes(dec, a.prune_eps);
            let union = union_mesh(ex.shapes.iter().map(|(_, m)| m));
            let recon = (!ex.is_empty()).then_some(
                move |s: u64| union.surface_samples(a.surface_samples, s),
            );
            let mut notes = ex.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>();
            if let Target::Grid(g) = &target {
                if g.surface_mesh().is_some() {
                    notes.push("target surface taken from a marching-cubes mesh of the occupancy grid".into());
                }
            }
            evaluate(dec, oracle, recon, notes, a)?
        }
        AnyDecomposition::D2(dec) => {
            expect_dim(&target, 2)?;
            let oracle = target.as_2d().expect("2D target");
            let ex = decomposition_to_polygons(dec, a.prune_eps);
            let polys: Vec<_> = ex.shapes.iter().map(|(_, p)| p.clone()).collect();
            let recon = (!ex.is_empty()).then_some(
                move |s: u64| polygons_boundary_samples(&polys, a.surface_samples, s),
            );
            let notes = ex.warnings.iter().map(|w| w.to_string()).collect();
            evaluate(dec, oracle, recon, notes, a)?
        }
    };
    print!("{}", report.to_key_value());
    if let Some(out) = &a.out {
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        write_file(out, text)?;
    }
    Ok(())
}

fn evaluate<const D: usize>(
    dec: &Decomposition<D>,
    oracle: &dyn TargetOracle<D>,
    recon: Option<impl Fn(u64) -> convexfit::Result<Vec<Point<D>>>>,
    mut notes: Vec<String>,
    a: &EvalArgs,
) -> Result<MetricsReport> {
    let bbox = oracle.bbox();
    let iou = volumetric_iou(|p| dec.union_indicator(p), |p| oracle_eval(oracle, p), &bbox, a.iou_samples, a.seed)?;
    let f_threshold = a.f_threshold.unwrap_or(DEFAULT_F_THRESHOLD_FRACTION * bbox.diagonal());
    let (mut chamfer_l1, mut f_score) = (None, None);
    match (recon, oracle.has_surface()) {
        (None, _) => notes.push("no convex could be extracted; surface metrics skipped".into()),
        (Some(_), false) => notes.push(format!("target ({}) has no surface; surface metrics skipped", oracle.kind())),
        (Some(draw), true) => {
            let ours = union_boundary_samples(dec, draw, a.surface_samples, mix_seeds(a.seed, SALT_RECON))?;
            let theirs = target_surface(oracle, a.surface_samples, mix_seeds(a.seed, SALT_TARGET))?;
            let d = SurfaceDistances::new(&ours, &theirs)?;
            chamfer_l1 = Some(d.chamfer_l1());
            f_score = Some(d.f_score(f_threshold)?);
        }
    }
    Ok(MetricsReport {
        iou,
        chamfer_l1,
        f_score,
        f_threshold,
        iou_samples: a.iou_samples,
        surface_samples: a.surface_samples,
        seed: a.seed,
        notes,
    })
}

fn parse_bbox(v: &[f64]) -> Result<Aabb<3>> {
    let b = Aabb::new(Point::<3>::new(v[0], v[1], v[2]), Point::<3>::new(v[3], v[4], v[5]));
    if !(0..3).all(|i| b.max[i] > b.min[i]) {
        return Err(usage("--bbox max must exceed min on every axis"));
    }
    Ok(b)
}

pub fn mc(a: &McArgs) -> Result<()> {
    if a.res < convexfit::marching_cubes::MIN_RESOLUTION {
        return Err(usage(format!(
            "--res must be at least {}, got {}",
            convexfit::marching_cubes::MIN_RESOLUTION,
            a.res
        )));
    }
    let given_bbox = a.bbox.as_deref().map(parse_bbox).transpose()?;
    let (mesh, seconds) = if let Some(input) = &a.input {
        let dec = match load_decomposition(input)? {
            AnyDecomposition::D3(d) => d,
            AnyDecomposition::D2(_) => return Err(usage("marching cubes needs a 3D decomposition")),
        };
        let bbox = match given_bbox {
            Some(b) => b,
            None => {
                // grid bounds only; not part of the timed meshing
                let ex = decomposition_to_meshes(&dec, 0.0);
                Aabb::from_points(ex.shapes.iter().flat_map(|(_, m)| &m.vertices))
                    .ok_or_else(|| anyhow::anyhow!("no bounded convex to size the grid; pass --bbox"))?
                    .padded(0.1)
            }
        };
        let t = Instant::now();
        let mesh = if a.hard {
            marching_cubes(|p| dec.union_hard_sdf(p), &bbox, a.res, 0.0)
        } else {
            marching_cubes(|p| dec.union_indicator(p), &bbox, a.res, 0.5)
        }?;
        (mesh, t.elapsed().as_secs_f64())
    } else {
        let path = a.target.as_ref().expect("clap requires input or target");
        let target = Target::load(path)?;
        let (field, level) = target.mc_field().ok_or_else(|| usage("marching cubes needs a 3D target"))?;
        let bbox = given_bbox.unwrap_or_else(|| target.as_3d().expect("3D target").bbox());
        let t = Instant::now();
        let mesh = marching_cubes(field, &bbox, a.res, level)?;
        (mesh, t.elapsed().as_secs_f64())
    };
    if let Some(out) = &a.out {
        write_file(out, mesh.to_obj())?;
    }
    println!("res={} vertices={} triangles={}", a.res, mesh.vertices.len(), mesh.triangles.len());
    println!("mc_seconds={seconds:.6}");
    Ok(())
}

pub fn sample(a: &SampleArgs) -> Result<()> {
    let target = Target::load(&a.target)?;
    if let Some(res) = a.grid {
        if res == 0 {
            return Err(usage("--grid must be positive"));
        }
        let ext = extension(&a.out);
        match (target.dim(), ext.as_str()) {
            (2, "pgm") => {
                // images always cover [-0.5, 0.5]^2
                let o = target.as_2d().expect("2D target");
                Silhouette::from_fn(res, res, |p| o.contains(p)).write(&a.out)?;
            }
            (3, "cvxg") => {
                let o = target.as_3d().expect("3D target");
                OccupancyGrid::from_fn([res; 3], o.bbox(), |p| if o.contains(p) { 255 } else { 0 }).write(&a.out)?;
            }
            (d, _) => return Err(usage(format!("a {d}D target rasterizes to .{}", if d == 2 { "pgm" } else { "cvxg" }))),
        }
        println!("wrote {}", a.out.display());
        return Ok(());
    }
    let text = match target.dim() {
        2 => sample_text(target.as_2d().expect("2D target"), a)?,
        _ => sample_text(target.as_3d().expect("3D target"), a)?,
    };
    write_file(&a.out, text)?;
    println!("wrote {} volume and {} near-surface samples to {}", a.n_volume, a.n_surface, a.out.display());
    Ok(())
}

fn sample_text<const D: usize>(oracle: &dyn TargetOracle<D>, a: &SampleArgs) -> Result<String> {
    let volume = sample_volume(oracle, a.n_volume, mix_seeds(a.seed, 1));
    let jitter = a.jitter.unwrap_or_else(|| default_jitter(&oracle.bbox()));
    let surface = if a.n_surface > 0 {
        Some(sample_near_surface(oracle, a.n_surface, jitter, mix_seeds(a.seed, 2))?)
    } else {
        None
    };
    let mut out = String::from("# coordinates, label, source\n");
    for (set, name) in [(Some(&volume), "volume"), (surface.as_ref(), "near-surface")] {
        let Some(set) = set else { continue };
        for (p, l) in set.points.iter().zip(&set.labels) {
            for v in p.iter() {
                let _ = write!(out, "{v} ");
            }
            let _ = writeln!(out, "{l} {name}");
        }
    }
    Ok(out)
}

fn extension(p: &Path) -> String {
    p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).unwrap_or_default()
}
