//! Acceptance criteria, one line each: `AC<n> PASS|FAIL <name>: <detail>`.
//!
//! Runs without the libtest harness so the lines reach stdout directly.
//! Pass criterion ids (e.g. `AC4 AC10`) as arguments to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use convexfit::extraction::planes_to_mesh;
use convexfit::geometry::{ConvexElement, Decomposition, Hyperplane, Point, SdfMode};
use convexfit::losses::{
    center_offsets_closed_form, loss_approx, loss_decomp, loss_guide, loss_loc, loss_merged, loss_unique,
    total_loss_and_grad, unique_loss_at, LossBatch, LossWeights,
};
use convexfit::marching_cubes::marching_cubes;
use convexfit::metrics::{sphere_samples, volumetric_iou, SurfaceDistances};
use convexfit::params::{pack, unpack};
use convexfit::sampling::rng_from_seed;
use convexfit::{sigmoid, Aabb, SampleSet, SampleSource};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

#[derive(Default)]
struct Ctx {
    dir: PathBuf,
    l_shape_iou: Option<f64>,
}

type Criterion = (&'static str, &'static str, fn(&mut Ctx) -> Outcome);

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 10] = [
        ("AC1", "gradient suite", ac1),
        ("AC2", "union identity", ac2),
        ("AC3", "smooth-max bound", ac3),
        ("AC4", "extraction soundness", ac4),
        ("AC5", "extraction vs marching cubes", ac5),
        ("AC6", "resolution independence", ac6),
        ("AC7", "unique-loss centering", ac7),
        ("AC8", "fit benchmarks", ac8),
        ("AC9", "ablation ordering", ac9),
        ("AC10", "metric estimators", ac10),
    ];
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut ctx = Ctx {
        dir: tmp.path().to_path_buf(),
        ..Ctx::default()
    };
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| f.eq_ignore_ascii_case(id)) {
            continue;
        }
        let t = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(|| run(&mut ctx))).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!(
            "{id} {} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn unit<const D: usize>(rng: &mut ChaCha8Rng) -> Point<D> {
    loop {
        let v = Point::<D>::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

// ---- AC1 ------------------------------------------------------------------

struct Problem<const D: usize> {
    dec: Decomposition<D>,
    volume: SampleSet<D>,
    surface: SampleSet<D>,
    interior: SampleSet<D>,
}

fn random_problem<const D: usize>(k: usize, h: usize, seed: u64) -> Problem<D> {
    let mut rng = rng_from_seed(seed);
    let elements = (0..k)
        .map(|_| {
            let planes = (0..h)
                .map(|_| Hyperplane::new(unit::<D>(&mut rng) * rng.random_range(0.7..1.3), -rng.random_range(0.2..0.5)))
                .collect();
            let c = Point::<D>::from_fn(|_, _| rng.random_range(-0.3..0.3));
            ConvexElement::new(planes, rng.random_range(4.0..10.0), c)
        })
        .collect();
    let sigma = [6.0, 20.0, 75.0][(seed % 3) as usize];
    let mode = if seed % 2 == 0 { SdfMode::Normalized } else { SdfMode::Literal };
    let dec = Decomposition::new(elements, sigma).with_mode(mode);
    let mut pts = |n: usize, scale: f64| -> Vec<Point<D>> {
        (0..n).map(|_| Point::from_fn(|_, _| scale * rng.random_range(-0.8..0.8))).collect()
    };
    let vol = pts(300, 1.0);
    let vol_labels = vol.iter().map(|p| f64::from(u8::from(p.norm() < 0.5))).collect();
    let surf = pts(200, 1.0);
    let surf_labels = surf.iter().map(|p| f64::from(u8::from(p[0] < 0.1))).collect();
    let int = pts(80, 0.6);
    let n_int = int.len();
    Problem {
        dec,
        volume: SampleSet::new(vol, vol_labels, SampleSource::Volume, 1),
        surface: SampleSet::new(surf, surf_labels, SampleSource::NearSurface, 2),
        interior: SampleSet::new(int, vec![1.0; n_int], SampleSource::Volume, 3),
    }
}

/// Weighted total from the standalone per-term functions.
fn reference_total<const D: usize>(dec: &Decomposition<D>, p: &Problem<D>, w: &LossWeights) -> f64 {
    let sets = [&p.volume, &p.surface];
    let mut v = 0.0;
    if w.approx != 0.0 {
        v += w.approx * loss_approx(dec, &sets, w.near_surface_scale).unwrap();
    }
    if w.decomp != 0.0 {
        v += w.decomp * loss_decomp(dec, &sets, w.tau).unwrap();
    }
    v += w.unique * loss_unique(dec);
    if w.use_merged {
        v += w.merged * loss_merged(dec, &p.interior, w.n_guide).unwrap();
    } else {
        if w.guide != 0.0 {
            v += w.guide * loss_guide(dec, &p.interior, w.n_guide).unwrap();
        }
        if w.loc != 0.0 {
            v += w.loc * loss_loc(dec, &p.interior).unwrap();
        }
    }
    v
}

/// Worst relative error over coordinates whose absolute error exceeds 1e-8,
/// the largest value mismatch, and the gradient's largest entry.
fn gradient_check<const D: usize>(p: &Problem<D>, w: &LossWeights) -> (f64, f64, f64) {
    let batch = LossBatch {
        volume: &p.volume,
        surface: &p.surface,
        interior: &p.interior,
    };
    let (terms, grad) = total_loss_and_grad(&p.dec, &batch, w).unwrap();
    let value_err = (terms.total - reference_total(&p.dec, p, w)).abs();
    let params = pack(&p.dec);
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let mut q = params.clone();
        q[i] += eps;
        let plus = reference_total(&unpack(&p.dec, &q).unwrap(), p, w);
        q[i] -= 2.0 * eps;
        let minus = reference_total(&unpack(&p.dec, &q).unwrap(), p, w);
        let fd = (plus - minus) / (2.0 * eps);
        let abs = (fd - grad[i]).abs();
        if abs > 1e-8 {
            worst = worst.max(abs / fd.abs().max(grad[i].abs()));
        }
    }
    (worst, value_err, grad.iter().fold(0.0f64, |m, g| m.max(g.abs())))
}

fn ac1(_: &mut Ctx) -> Outcome {
    let one_hot = |f: fn(&mut LossWeights)| {
        let mut w = LossWeights {
            tau: 1.0,
            n_guide: 16,
            ..LossWeights::zero()
        };
        f(&mut w);
        w
    };
    let cases = [
        ("approx", one_hot(|w| w.approx = 1.0)),
        ("decomp", one_hot(|w| w.decomp = 1.0)),
        ("unique", one_hot(|w| w.unique = 1.0)),
        ("guide", one_hot(|w| w.guide = 1.0)),
        ("loc", one_hot(|w| w.loc = 1.0)),
        (
            "merged",
            one_hot(|w| {
                w.merged = 1.0;
                w.use_merged = true;
            }),
        ),
        (
            "total",
            LossWeights {
                tau: 1.0,
                n_guide: 16,
                ..LossWeights::default()
            },
        ),
    ];
    let combos: Vec<(usize, usize, usize)> = [1, 2, 4]
        .into_iter()
        .flat_map(|k| [4, 8].into_iter().flat_map(move |h| [2, 3].into_iter().map(move |d| (k, h, d))))
        .collect();
    let mut worst = (0.0f64, String::new());
    let mut worst_value = 0.0f64;
    let mut active = [0usize; 7];
    for cfg in 0..20u64 {
        let (k, h, d) = combos[cfg as usize % combos.len()];
        for (c, (name, w)) in cases.iter().enumerate() {
            let (err, verr, gmax) = if d == 2 {
                gradient_check(&random_problem::<2>(k, h, 1000 + cfg), w)
            } else {
                gradient_check(&random_problem::<3>(k, h, 1000 + cfg), w)
            };
            if err > worst.0 {
                worst = (err, format!("{name} K={k} H={h} d={d}"));
            }
            worst_value = worst_value.max(verr);
            active[c] += usize::from(gmax > 1e-6);
        }
    }
    // a term with a zero gradient everywhere would pass vacuously
    let idle: Vec<&str> = cases.iter().zip(active).filter(|(_, n)| *n == 0).map(|((name, _), _)| *name).collect();
    outcome(
        worst.0 < 1e-4 && worst_value < 1e-10 && idle.is_empty(),
        format!(
            "20 configs x 7 losses, worst relative error {:.2e} ({}), value mismatch {:.1e}, active configs per loss {:?}",
            worst.0,
            if worst.1.is_empty() { "-" } else { &worst.1 },
            worst_value,
            active
        ),
    )
}

// ---- AC2 / AC3 --------------------------------------------------------------

fn ac2(_: &mut Ctx) -> Outcome {
    let p = random_problem::<3>(4, 8, 7);
    let dec = Decomposition {
        sigma: 75.0,
        ..p.dec
    };
    let prepared = dec.prepare();
    let mut rng = rng_from_seed(8);
    let mut mismatches = 0;
    let mut inside = 0;
    for _ in 0..100_000 {
        let x = Point::<3>::from_fn(|_, _| rng.random_range(-0.8..0.8));
        let phis: Vec<f64> = prepared.iter().map(|e| e.smooth_sdf(&x, dec.mode)).collect();
        let max_c = phis.iter().map(|&f| sigmoid(-dec.sigma * f)).fold(f64::NEG_INFINITY, f64::max);
        let min_phi = phis.iter().copied().fold(f64::INFINITY, f64::min);
        let via_min = sigmoid(-dec.sigma * min_phi);
        let lib = dec.union_indicator(&x);
        if max_c.to_bits() != via_min.to_bits() || lib.to_bits() != via_min.to_bits() {
            mismatches += 1;
        }
        inside += usize::from(via_min > 0.5);
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} bit mismatches on 100000 probes ({inside} inside)"),
    )
}

fn ac3(_: &mut Ctx) -> Outcome {
    let mut rng = rng_from_seed(9);
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..100 {
        let h = rng.random_range(4..=30);
        let planes = (0..h)
            .map(|_| Hyperplane::new(unit::<3>(&mut rng), -rng.random_range(0.1..0.6)))
            .collect();
        let delta = rng.random_range(1.0..200.0);
        let e = ConvexElement::new(planes, delta, Point::<3>::from_fn(|_, _| rng.random_range(-0.5..0.5)));
        let pe = e.prepare();
        let slack = (h as f64).ln() / delta;
        for _ in 0..1000 {
            let x = Point::<3>::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let hard = pe.hard_sdf(&x);
            let phi = pe.smooth_sdf(&x, SdfMode::Normalized);
            if !(hard <= phi && phi <= hard + slack) {
                violations += 1;
            }
            tightest = tightest.min((hard + slack - phi) / slack);
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations on 100000 probes over 100 elements; closest approach to the upper bound {tightest:.2e} of ln(H)/delta"),
    )
}

// ---- AC4 / AC5 --------------------------------------------------------------

/// A bounded convex: a randomly rotated regular tetrahedron's face normals
/// (which alone bound the polytope) plus `h - 4` random planes.
fn random_bounded(rng: &mut ChaCha8Rng, h: usize) -> ConvexElement<3> {
    let a = unit::<3>(rng);
    let b = {
        let v = unit::<3>(rng);
        let v = v - a * a.dot(&v);
        v / v.norm()
    };
    let c = a.cross(&b);
    let tet = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
    let mut normals: Vec<Point<3>> = tet.iter().map(|t| (a * t[0] + b * t[1] + c * t[2]) / 3f64.sqrt()).collect();
    normals.extend((4..h).map(|_| unit::<3>(rng)));
    let planes = normals
        .into_iter()
        .map(|n| Hyperplane::new(n * rng.random_range(0.5..2.0), -rng.random_range(0.2..0.6)))
        .collect();
    ConvexElement::new(planes, 20.0, Point::<3>::from_fn(|_, _| rng.random_range(-0.5..0.5)))
}

fn corpus() -> Vec<ConvexElement<3>> {
    let mut rng = rng_from_seed(4);
    (0..100)
        .map(|_| {
            let h = rng.random_range(6..=30);
            random_bounded(&mut rng, h)
        })
        .collect()
}

/// Stratified Monte-Carlo volume: one uniform sample in each of 50x50x40 cells.
fn stratified_volume(e: &ConvexElement<3>, bbox: &Aabb<3>, seed: u64) -> f64 {
    let dims = [50usize, 50, 40];
    let mut rng = rng_from_seed(seed);
    let cell = Point::<3>::from_fn(|i, _| bbox.extent()[i] / dims[i] as f64);
    let pe = e.prepare();
    let mut hits = 0usize;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let x = Point::<3>::new(
                    bbox.min.x + (i as f64 + rng.random::<f64>()) * cell.x,
                    bbox.min.y + (j as f64 + rng.random::<f64>()) * cell.y,
                    bbox.min.z + (k as f64 + rng.random::<f64>()) * cell.z,
                );
                hits += usize::from(pe.hard_sdf(&x) <= 0.0);
            }
        }
    }
    hits as f64 / (dims[0] * dims[1] * dims[2]) as f64 * bbox.volume()
}

fn ac4(_: &mut Ctx) -> Outcome {
    let mut worst_sdf = f64::NEG_INFINITY;
    let mut worst_vol = 0.0f64;
    let mut failures = Vec::new();
    for (i, e) in corpus().iter().enumerate() {
        let m = match planes_to_mesh(e) {
            Ok(m) => m,
            Err(err) => {
                failures.push(format!("#{i}: {err}"));
                continue;
            }
        };
        let max_sdf = m.vertices.iter().map(|v| e.hard_sdf(v)).fold(f64::NEG_INFINITY, f64::max);
        worst_sdf = worst_sdf.max(max_sdf);
        let bbox = Aabb::from_points(&m.vertices).unwrap().padded(0.02);
        let mc = stratified_volume(e, &bbox, i as u64);
        let rel = (m.signed_volume() - mc).abs() / mc;
        worst_vol = worst_vol.max(rel);
        if !m.is_watertight() {
            failures.push(format!("#{i}: not watertight"));
        }
    }
    let cube = ConvexElement::axis_box(Point::<3>::zeros(), Point::repeat(0.5), 20.0);
    let cm = planes_to_mesh(&cube).unwrap();
    let cube_err = cm
        .vertices
        .iter()
        .flat_map(|v| v.iter().map(|c| (c.abs() - 0.5).abs()).collect::<Vec<_>>())
        .fold(0.0f64, f64::max);
    let cube_ok = cm.vertices.len() == 8 && cube_err <= 1e-9;
    let pass = failures.is_empty() && worst_sdf <= 1e-6 && worst_vol < 0.01 && cube_ok;
    outcome(
        pass,
        format!(
            "100 convexes: max vertex hard_sdf {worst_sdf:.1e}, worst volume error {:.3}%, cube {} vertices off by {cube_err:.1e}{}",
            100.0 * worst_vol,
            cm.vertices.len(),
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(", ")) }
        ),
    )
}

fn ac5(_: &mut Ctx) -> Outcome {
    let mut worst = (0.0f64, 0);
    for (i, e) in corpus().iter().enumerate() {
        let m = planes_to_mesh(e).unwrap();
        let tight = Aabb::from_points(&m.vertices).unwrap();
        let half = 0.55 * tight.extent().max();
        let bbox = Aabb::new(tight.center().add_scalar(-half), tight.center().add_scalar(half));
        let spacing = 2.0 * half / 128.0;
        let pe = e.prepare();
        let iso = marching_cubes(|p| pe.hard_sdf(p), &bbox, 128, 0.0).unwrap();
        let a = m.surface_samples(50_000, 2 * i as u64).unwrap();
        let b = iso.surface_samples(50_000, 2 * i as u64 + 1).unwrap();
        let ratio = SurfaceDistances::new(&a, &b).unwrap().chamfer_l1() / spacing;
        if ratio > worst.0 {
            worst = (ratio, i);
        }
    }
    outcome(
        worst.0 <= 2.0,
        format!("worst Chamfer-L1 = {:.3} grid spacings (convex #{}) at res 128", worst.0, worst.1),
    )
}

// ---- CLI helpers ------------------------------------------------------------

fn cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convexfit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn convexfit")
}

fn value(out: &Output, key: &str) -> Option<f64> {
    String::from_utf8_lossy(&out.stdout)
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix(key)?.strip_prefix('=')?.parse().ok())
}

fn ok(out: &Output) -> Result<(), String> {
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

// ---- AC6 --------------------------------------------------------------------

fn ac6(ctx: &mut Ctx) -> Outcome {
    let mut rng = rng_from_seed(6);
    let elements = (0..8)
        .map(|_| {
            let mut e = random_bounded(&mut rng, 12);
            e.translation *= 0.8;
            e
        })
        .collect();
    let dec = Decomposition::new(elements, 75.0);
    let dir = ctx.dir.join("ac6");
    std::fs::create_dir_all(&dir).unwrap();
    convexfit::persist::save(&dec, dir.join("d.json")).unwrap();
    // median of five processes, each reporting a median over 201 repeats
    let extract = || -> Result<f64, String> {
        let mut t = Vec::new();
        for _ in 0..5 {
            let o = cli(&["extract", "--input", "d.json", "--out", "x.obj", "--repeat", "201"], &dir);
            ok(&o)?;
            t.push(value(&o, "extract_seconds").ok_or("no extract timing")?);
        }
        t.sort_by(f64::total_cmp);
        Ok(t[2])
    };
    let mc = |res: &str| -> Result<f64, String> {
        let mut t = Vec::new();
        for _ in 0..3 {
            let o = cli(&["mc", "--input", "d.json", "--res", res], &dir);
            ok(&o)?;
            t.push(value(&o, "mc_seconds").ok_or("no mc timing")?);
        }
        t.sort_by(f64::total_cmp);
        Ok(t[1])
    };
    let run = || -> Result<(f64, f64, Vec<f64>), String> {
        let e0 = extract()?;
        let m64 = mc("64")?;
        let e1 = extract()?;
        let m128 = mc("128")?;
        let e2 = extract()?;
        Ok((m64, m128, vec![e0, e1, e2]))
    };
    match run() {
        Err(e) => outcome(false, e),
        Ok((m64, m128, ex)) => {
            let mean = ex.iter().sum::<f64>() / 3.0;
            let spread = ex.iter().map(|t| (t - mean).abs() / mean).fold(0.0, f64::max);
            let ratio = m128 / m64;
            outcome(
                ratio >= 6.0 && spread < 0.10,
                format!(
                    "mc {m64:.3}s -> {m128:.3}s (x{ratio:.2}) for res 64 -> 128; extract medians {:.3}/{:.3}/{:.3} ms, max deviation {:.1}%",
                    ex[0] * 1e3,
                    ex[1] * 1e3,
                    ex[2] * 1e3,
                    100.0 * spread
                ),
            )
        }
    }
}

// ---- AC7 --------------------------------------------------------------------

fn ac7(_: &mut Ctx) -> Outcome {
    let mut rng = rng_from_seed(77);
    let mut worst = 0.0f64;
    let mut max_iters = 0;
    for _ in 0..20 {
        let h = rng.random_range(4..=16);
        let planes: Vec<Hyperplane<3>> = (0..h)
            .map(|_| Hyperplane::new(unit::<3>(&mut rng) * rng.random_range(0.5..2.0), rng.random_range(-1.0..0.5)))
            .collect();
        let target = center_offsets_closed_form(&planes);
        let mut x = Point::<3>::zeros();
        let mut iters = 0;
        while iters < 200_000 {
            let (_, g) = unique_loss_at(&planes, &x);
            if g.norm() < 1e-14 {
                break;
            }
            x -= g * 0.25;
            iters += 1;
        }
        max_iters = max_iters.max(iters);
        worst = worst.max((x - target).norm());
    }
    outcome(
        worst <= 1e-6,
        format!("20 plane sets: worst distance to closed form {worst:.1e} (max {max_iters} iterations)"),
    )
}

// ---- AC8 / AC9 --------------------------------------------------------------

const L_SHAPE: &str = "# L-shape\ncube 0 -0.25 0  1 0.5 0.5\ncube -0.25 0.25 0  0.5 1 0.5\nunion\n";
const PLUS: &str = "# plus sign\nrect 0 0  0.8 0.25\nrect 0 0  0.25 0.8\nunion\n";
const BENCH_LR: &str = "1e-3";

struct FitRun {
    iou: f64,
    seconds: f64,
    bytes: Vec<u8>,
}

/// Two concurrent runs with identical arguments; returns the first and
/// whether both wrote identical decompositions and reports.
fn fit_twice(dir: &Path, target: &str, extra: &[&str]) -> Result<(FitRun, bool), String> {
    let spawn = |tag: &str| {
        let out = format!("{tag}.json");
        let mut args: Vec<String> = ["fit", "--target", target, "--out", &out, "--lr", BENCH_LR, "--seed", "0"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        args.extend(extra.iter().map(|s| s.to_string()));
        Command::new(env!("CARGO_BIN_EXE_convexfit"))
            .args(&args)
            .current_dir(dir)
            .stdout(std::process::Stdio::piped())
            .stderr(std::process::Stdio::piped())
            .spawn()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (spawn("a")?, spawn("b")?);
    let (oa, ob) = (a.wait_with_output().map_err(|e| e.to_string())?, b.wait_with_output().map_err(|e| e.to_string())?);
    ok(&oa)?;
    ok(&ob)?;
    let read = |p: &str| std::fs::read(dir.join(p)).map_err(|e| e.to_string());
    let same = read("a.json")? == read("b.json")? && read("a.report.jsonl")? == read("b.report.jsonl")?;
    let run = FitRun {
        iou: value(&oa, "iou").ok_or("no iou")?,
        seconds: value(&oa, "fit_seconds").ok_or("no timing")?,
        bytes: read("a.json")?,
    };
    Ok((run, same))
}

fn bench_dir(ctx: &Ctx, name: &str, files: &[(&str, &str)]) -> PathBuf {
    let dir = ctx.dir.join(name);
    std::fs::create_dir_all(&dir).unwrap();
    for (f, text) in files {
        std::fs::write(dir.join(f), text).unwrap();
    }
    dir
}

fn ac8(ctx: &mut Ctx) -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut check = |label: &str, r: Result<(FitRun, bool), String>, min_iou: f64| match r {
        Ok((run, same)) => {
            let good = run.iou >= min_iou && same && run.seconds <= 600.0 && !run.bytes.is_empty();
            pass &= good;
            lines.push(format!(
                "{label} IoU {:.4} (need {min_iou}) in {:.0}s{}",
                run.iou,
                run.seconds,
                if same { "" } else { ", NOT deterministic" }
            ));
            Some(run.iou)
        }
        Err(e) => {
            pass = false;
            lines.push(format!("{label} failed: {e}"));
            None
        }
    };
    let cube = bench_dir(ctx, "cube", &[("cube.csg", "cube 0 0 0  1 1 1\n")]);
    check(
        "cube K1H6",
        fit_twice(&cube, "cube.csg", &["--k", "1", "--h", "6", "--iters", "10000"]),
        0.98,
    );
    let l = bench_dir(ctx, "lshape", &[("l.csg", L_SHAPE)]);
    let l_iou = check("L-shape K4H8", fit_twice(&l, "l.csg", &["--k", "4", "--h", "8", "--iters", "20000"]), 0.90);
    let plus = bench_dir(ctx, "plus", &[("plus.csg", PLUS)]);
    let raster = cli(&["sample", "--target", "plus.csg", "--grid", "256", "--out", "plus.pgm"], &plus);
    let r = ok(&raster).and_then(|_| fit_twice(&plus, "plus.pgm", &["--k", "5", "--h", "8", "--iters", "20000"]));
    check("2D plus PGM K5H8", r, 0.92);
    ctx.l_shape_iou = l_iou;
    outcome(pass, format!("{} (lr {BENCH_LR}, seed 0, each run twice)", lines.join("; ")))
}

fn ac9(ctx: &mut Ctx) -> Outcome {
    let dir = bench_dir(ctx, "ablation", &[("l.csg", L_SHAPE)]);
    let base = ["fit", "--target", "l.csg", "--k", "4", "--h", "8", "--iters", "20000", "--lr", BENCH_LR, "--seed", "0"];
    let full = match ctx.l_shape_iou {
        Some(v) => v,
        None => {
            let mut args = base.to_vec();
            args.extend(["--out", "full.json"]);
            match value(&cli(&args, &dir), "iou") {
                Some(v) => v,
                None => return outcome(false, "full-loss run failed"),
            }
        }
    };
    let variants: [(&str, &[&str]); 3] = [
        ("no-guide", &["--w-guide", "0"]),
        ("no-loc", &["--w-loc", "0"]),
        ("merged", &["--merged"]),
    ];
    let children: Vec<_> = variants
        .iter()
        .map(|(name, extra)| {
            let out = format!("{name}.json");
            let mut args = base.to_vec();
            args.extend(["--out", out.as_str()]);
            args.extend(extra.iter());
            Command::new(env!("CARGO_BIN_EXE_convexfit"))
                .args(&args)
                .current_dir(&dir)
                .stdout(std::process::Stdio::piped())
                .stderr(std::process::Stdio::piped())
                .spawn()
                .expect("spawn convexfit")
        })
        .collect();
    let ious: Vec<Option<f64>> = children
        .into_iter()
        .map(|c| c.wait_with_output().ok().and_then(|o| value(&o, "iou")))
        .collect();
    let (Some(no_guide), Some(no_loc), Some(merged)) = (ious[0], ious[1], ious[2]) else {
        return outcome(false, format!("an ablation run failed: {ious:?}"));
    };
    let pass = no_guide <= full && no_loc <= full && (merged - full).abs() <= 0.05;
    outcome(
        pass,
        format!("full {full:.4}, no-guide {no_guide:.4}, no-loc {no_loc:.4}, merged {merged:.4} (need ablations <= full, |merged - full| <= 0.05)"),
    )
}

// ---- AC10 -------------------------------------------------------------------

fn ac10(_: &mut Ctx) -> Outcome {
    let cube_at = |x: f64| move |p: &Point<3>| f64::from(u8::from((p - Point::<3>::new(x, 0.0, 0.0)).amax() <= 0.5));
    let bbox = Aabb::new(Point::<3>::new(-0.5, -0.5, -0.5), Point::<3>::new(1.0, 0.5, 0.5));
    let iou = volumetric_iou(cube_at(0.0), cube_at(0.5), &bbox, 100_000, 0).unwrap();
    let outer = sphere_samples(Point::<3>::zeros(), 1.0, 100_000, 1);
    let inner = sphere_samples(Point::<3>::zeros(), 0.9, 100_000, 2);
    let d = SurfaceDistances::new(&inner, &outer).unwrap();
    let chamfer = d.chamfer_l1();
    let (f_lo, f_hi) = (d.f_score(0.05).unwrap(), d.f_score(0.15).unwrap());
    let pass = (iou - 1.0 / 3.0).abs() <= 0.01 && (chamfer - 0.1).abs() <= 0.005 && f_lo == 0.0 && f_hi == 100.0;
    outcome(
        pass,
        format!("cube-pair IoU {iou:.4}, sphere Chamfer {chamfer:.4}, F-score {f_lo}% at t=0.05 and {f_hi}% at t=0.15"),
    )
}
