//! Marching cubes over a regular grid, the iso-surfacing baseline that
//! extraction by duality avoids. Cost grows with the cube of the resolution.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::geometry::Point;
use crate::mc_table::{CORNERS, EDGES, TRI_TABLE};
use crate::mesh::TriMesh;
use crate::sampling::Aabb;
use crate::{Error, Result};

pub const MIN_RESOLUTION: usize = 8;

/// Iso-surface of `field` at `level` on a `res^3` cell grid spanning `bbox`.
///
/// Vertices are linearly interpolated along cell edges and shared between
/// neighboring cells. The mesh is oriented so that its signed volume is
/// non-negative.
pub fn marching_cubes(
    field: impl Fn(&Point<3>) -> f64 + Sync,
    bbox: &Aabb<3>,
    res: usize,
    level: f64,
) -> Result<TriMesh> {
    if res < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "marching-cubes resolution must be at least {MIN_RESOLUTION}, got {res}"
        )));
    }
    let n = res + 1;
    let step = bbox.extent() / res as f64;
    let node = |i: usize, j: usize, k: usize| {
        Point::<3>::new(
            bbox.min.x + i as f64 * step.x,
            bbox.min.y + j as f64 * step.y,
            bbox.min.z + k as f64 * step.z,
        )
    };
    let mut values = vec![0.0; n * n * n];
    values.par_chunks_mut(n * n).enumerate().for_each(|(k, slab)| {
        for j in 0..n {
            for i in 0..n {
                slab[i + n * j] = field(&node(i, j, k));
            }
        }
    });
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("field value at grid node {i}")));
    }
    let id = |i: usize, j: usize, k: usize| i + n * (j + n * k);

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut edge_vertex: HashMap<(usize, usize), usize> = HashMap::new();
    let mut corner_ids = [0usize; 8];
    let mut corner_vals = [0.0; 8];
    for k in 0..res {
        for j in 0..res {
            for i in 0..res {
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    corner_ids[c] = id(i + off[0], j + off[1], k + off[2]);
                    corner_vals[c] = values[corner_ids[c]];
                    if corner_vals[c] < level {
                        case |= 1 << c;
                    }
                }
                let row = &TRI_TABLE[case];
                for tri in row.chunks(3).take_while(|t| t[0] >= 0) {
                    let mut out = [0usize; 3];
                    for (slot, &e) in out.iter_mut().zip(tri) {
                        let [a, b] = EDGES[e as usize];
                        let (ga, gb) = (corner_ids[a], corner_ids[b]);
                        let key = (ga.min(gb), ga.max(gb));
                        *slot = *edge_vertex.entry(key).or_insert_with(|| {
                            let (va, vb) = (values[key.0], values[key.1]);
                            let t = if va == vb { 0.5 } else { ((level - va) / (vb - va)).clamp(0.0, 1.0) };
                            let pa = node(key.0 % n, (key.0 / n) % n, key.0 / (n * n));
                            let pb = node(key.1 % n, (key.1 / n) % n, key.1 / (n * n));
                            vertices.push(pa + (pb - pa) * t);
                            vertices.len() - 1
                        });
                    }
                    triangles.push(out);
                }
            }
        }
    }
    if triangles.is_empty() {
        return Err(Error::EmptyLevelSet { level });
    }
    let mut mesh = TriMesh::new(vertices, triangles);
    if mesh.signed_volume() < 0.0 {
        mesh.flip();
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(p: &Point<3>) -> f64 {
        p.norm() - 0.5
    }

    #[test]
    fn sphere_area_and_volume() {
        let m = marching_cubes(sphere, &Aabb::cube(1.0), 64, 0.0).unwrap();
        let area = 4.0 * std::f64::consts::PI * 0.25;
        assert!((m.area() / area - 1.0).abs() < 0.02, "{}", m.area());
        assert!(m.is_watertight());
        let vol = 4.0 / 3.0 * std::f64::consts::PI * 0.125;
        assert!((m.signed_volume() / vol - 1.0).abs() < 0.02);
    }

    #[test]
    fn triangle_count_scales_quadratically() {
        let a = marching_cubes(sphere, &Aabb::cube(1.0), 32, 0.0).unwrap();
        let b = marching_cubes(sphere, &Aabb::cube(1.0), 64, 0.0).unwrap();
        let ratio = b.triangles.len() as f64 / a.triangles.len() as f64;
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn inverted_field_still_outward() {
        // an indicator-like field, inside where it is large
        let m = marching_cubes(|p| 1.0 - p.norm(), &Aabb::cube(1.0), 32, 0.5).unwrap();
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            marching_cubes(|_| 1.0, &Aabb::cube(1.0), 16, 0.0),
            Err(Error::EmptyLevelSet { .. })
        ));
        assert!(matches!(
            marching_cubes(sphere, &Aabb::cube(1.0), 4, 0.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn every_case_is_closed_per_cell() {
        // each configuration triangulates a surface whose boundary lies on cube faces
        for (case, row) in TRI_TABLE.iter().enumerate() {
            let used: usize = row.iter().take_while(|&&e| e >= 0).count();
            assert_eq!(used % 3, 0, "case {case}");
            for &e in row.iter().take_while(|&&e| e >= 0) {
                let [a, b] = EDGES[e as usize];
                let inside_a = case >> a & 1;
                let inside_b = case >> b & 1;
                assert_ne!(inside_a, inside_b, "case {case} uses an uncut edge");
            }
        }
    }
}
