use std::path::Path;

use rand::{Rng, RngCore};

use super::{Aabb, TargetOracle};
use crate::geometry::Point;
use crate::mesh::TriMesh;
use crate::{Error, Result};

/// A watertight triangle mesh used as the target solid.
#[derive(Debug, Clone)]
pub struct MeshTarget {
    pub mesh: TriMesh,
    bbox: Aabb<3>,
    cumulative: Vec<f64>,
}

impl MeshTarget {
    /// Fails when the mesh has open or non-manifold edges.
    pub fn new(mesh: TriMesh) -> Result<Self> {
        if mesh.triangles.is_empty() {
            return Err(Error::NotWatertight("mesh has no triangles".into()));
        }
        let open = mesh.open_edges();
        if !open.is_empty() {
            return Err(Error::NotWatertight(format!(
                "{} edges are not shared by exactly two triangles (first: {:?})",
                open.len(),
                open[0]
            )));
        }
        let bbox = Aabb::from_points(&mesh.vertices)
            .expect("non-empty mesh")
            .padded(0.1);
        let mut acc = 0.0;
        let cumulative = (0..mesh.triangles.len())
            .map(|t| {
                acc += mesh.triangle_area(t);
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::ZeroArea);
        }
        Ok(Self {
            mesh,
            bbox,
            cumulative,
        })
    }

    pub fn read_obj(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(TriMesh::read_obj(path)?)
    }

    pub fn with_bbox(mut self, bbox: Aabb<3>) -> Self {
        self.bbox = bbox;
        self
    }
}

impl TargetOracle<3> for MeshTarget {
    fn bbox(&self) -> Aabb<3> {
        self.bbox
    }

    fn contains(&self, x: &Point<3>) -> bool {
        self.mesh.contains(x)
    }

    fn kind(&self) -> &'static str {
        "triangle-mesh"
    }

    fn has_surface(&self) -> bool {
        true
    }

    fn surface_point(&self, rng: &mut dyn RngCore) -> Result<Point<3>> {
        let total = *self.cumulative.last().expect("validated non-empty");
        let pick = rng.random::<f64>() * total;
        let t = self.cumulative.partition_point(|&c| c <= pick).min(self.cumulative.len() - 1);
        let [a, b, c] = self.mesh.corners(t);
        let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        Ok(a + (b - a) * u + (c - a) * v)
    }
}
