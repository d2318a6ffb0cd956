//! Loading target solids by file extension.

use std::path::Path;

use anyhow::{bail, Context, Result};
use convexfit::marching_cubes::marching_cubes;
use convexfit::sampling::{
    parse_csg, CsgTarget, MeshTarget, OccupancyGrid, ParsedCsg, Silhouette, INSIDE_THRESHOLD,
};
use convexfit::{Aabb, Point, TargetOracle, TriMesh};
use rand::RngCore;

use crate::UsageError;

pub enum Target {
    Csg2(CsgTarget<2>),
    Csg3(CsgTarget<3>),
    Mesh(MeshTarget),
    Grid(GridTarget),
    Image(Silhouette),
}

impl Target {
    pub fn load(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        if !path.exists() {
            return Err(UsageError(format!("target file {} does not exist", path.display())).into());
        }
        let ctx = || format!("reading target {}", path.display());
        Ok(match ext.as_str() {
            "csg" => {
                let text = std::fs::read_to_string(path).with_context(ctx)?;
                match parse_csg(&text).with_context(ctx)? {
                    ParsedCsg::D2(t) => Target::Csg2(t),
                    ParsedCsg::D3(t) => Target::Csg3(t),
                }
            }
            "obj" => Target::Mesh(MeshTarget::read_obj(path).with_context(ctx)?),
            "pgm" => Target::Image(Silhouette::read(path).with_context(ctx)?),
            "cvxg" => Target::Grid(GridTarget::new(OccupancyGrid::read(path).with_context(ctx)?)),
            other => {
                return Err(UsageError(format!(
                    "unsupported target format {other:?} for {}; expected .csg, .obj, .pgm or .cvxg",
                    path.display()
                ))
                .into())
            }
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Target::Csg2(_) | Target::Image(_) => 2,
            _ => 3,
        }
    }

    pub fn as_2d(&self) -> Option<&dyn TargetOracle<2>> {
        match self {
            Target::Csg2(t) => Some(t),
            Target::Image(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_3d(&self) -> Option<&dyn TargetOracle<3>> {
        match self {
            Target::Csg3(t) => Some(t),
            Target::Mesh(t) => Some(t),
            Target::Grid(t) => Some(t),
            _ => None,
        }
    }

    /// Scalar field and iso-level for marching cubes (3D only).
    pub fn mc_field(&self) -> Option<(Box<dyn Fn(&Point<3>) -> f64 + Sync + '_>, f64)> {
        match self {
            Target::Csg3(t) => Some((Box::new(|p| t.sdf(p)), 0.0)),
            Target::Mesh(t) => Some((Box::new(|p| if t.contains(p) { 1.0 } else { 0.0 }), 0.5)),
            Target::Grid(t) => Some((Box::new(|p| t.grid.trilinear(p)), grid_level())),
            _ => None,
        }
    }
}

fn grid_level() -> f64 {
    f64::from(INSIDE_THRESHOLD) - 0.5
}

/// An occupancy grid with a boundary recovered by marching cubes, so that
/// near-surface samples can be drawn from it.
pub struct GridTarget {
    pub grid: OccupancyGrid,
    surface: Option<MeshTarget>,
}

impl GridTarget {
    pub fn new(grid: OccupancyGrid) -> Self {
        let res = grid.dims.iter().copied().max().unwrap_or(0).max(convexfit::marching_cubes::MIN_RESOLUTION);
        let surface = marching_cubes(|p| grid.trilinear(p), &grid.bbox, res, grid_level())
            .ok()
            .filter(|m| m.area() > 0.0)
            .and_then(|m| MeshTarget::new(m).ok());
        if surface.is_none() {
            log::warn!("could not recover a closed surface from the occupancy grid");
        }
        Self { grid, surface }
    }

    pub fn surface_mesh(&self) -> Option<&TriMesh> {
        self.surface.as_ref().map(|s| &s.mesh)
    }
}

impl TargetOracle<3> for GridTarget {
    fn bbox(&self) -> Aabb<3> {
        self.grid.bbox
    }

    fn contains(&self, x: &Point<3>) -> bool {
        self.grid.contains(x)
    }

    fn kind(&self) -> &'static str {
        "occupancy-grid"
    }

    fn has_surface(&self) -> bool {
        self.surface.is_some()
    }

    fn surface_point(&self, rng: &mut dyn RngCore) -> convexfit::Result<Point<3>> {
        match &self.surface {
            Some(s) => s.surface_point(rng),
            None => Err(convexfit::Error::NoSurface(self.kind())),
        }
    }
}

/// Fails with a usage error unless the target has dimension `dim`.
pub fn expect_dim(target: &Target, dim: usize) -> Result<()> {
    if target.dim() != dim {
        bail!(UsageError(format!(
            "dimension mismatch: decomposition is {dim}D but the target is {}D",
            target.dim()
        )));
    }
    Ok(())
}
