//! Deterministic fixtures shared by the benchmarks.

use convexfit::geometry::{ConvexElement, Decomposition, Hyperplane, Point};
use convexfit::sampling::{rng_from_seed, SampleSet, SampleSource};
use rand::Rng;

fn unit(rng: &mut impl Rng) -> Point<3> {
    loop {
        let v = Point::<3>::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// `k` bounded convexes with `h` planes each. Every element contains the
/// axis directions among its normals, so it is bounded regardless of the
/// random remainder.
pub fn decomposition(k: usize, h: usize, seed: u64) -> Decomposition<3> {
    assert!(h >= 6, "need the six axis planes");
    let mut rng = rng_from_seed(seed);
    let elements = (0..k)
        .map(|_| {
            let mut normals: Vec<Point<3>> = (0..3)
                .flat_map(|i| {
                    let mut e = Point::<3>::zeros();
                    e[i] = 1.0;
                    [e, -e]
                })
                .collect();
            normals.extend((6..h).map(|_| unit(&mut rng)));
            let planes = normals
                .into_iter()
                .map(|n| Hyperplane::new(n, -rng.random_range(0.1..0.3)))
                .collect();
            let c = Point::<3>::from_fn(|_, _| rng.random_range(-0.4..0.4));
            ConvexElement::new(planes, 40.0, c)
        })
        .collect();
    Decomposition::new(elements, 75.0)
}

/// Volume, near-surface and interior sets of the given sizes, labeled by a
/// ball of radius 0.5.
pub fn samples(n: usize, interior: usize, seed: u64) -> [SampleSet<3>; 3] {
    let mut rng = rng_from_seed(seed);
    let mut draw = |n: usize, scale: f64| -> Vec<Point<3>> {
        (0..n).map(|_| Point::from_fn(|_, _| scale * rng.random_range(-1.0..1.0))).collect()
    };
    let label = |pts: &[Point<3>]| pts.iter().map(|p| f64::from(u8::from(p.norm() < 0.5))).collect();
    let vol = draw(n, 1.0);
    let surf = draw(n, 0.55);
    let int = draw(interior, 0.28);
    [
        SampleSet::new(vol.clone(), label(&vol), SampleSource::Volume, 1),
        SampleSet::new(surf.clone(), label(&surf), SampleSource::NearSurface, 2),
        SampleSet::new(int.clone(), label(&int), SampleSource::Volume, 3),
    ]
}
