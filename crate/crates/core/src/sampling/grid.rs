//! Byte occupancy grids stored in the `CVXG` binary format.
//!
//! Layout (little-endian): magic `CVXG`, `u32` version (1), three `u32`
//! dimensions, six `f32` bounds (min xyz then max xyz), then one byte per
//! voxel in x-fastest order. Bytes `>= 128` are inside.

use std::path::Path;

use super::{Aabb, TargetOracle};
use crate::geometry::Point;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"CVXG";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 12 + 24;
pub const INSIDE_THRESHOLD: u8 = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub dims: [usize; 3],
    pub bbox: Aabb<3>,
    pub data: Vec<u8>,
}

impl OccupancyGrid {
    /// Builds a grid by evaluating `f` at every voxel center.
    pub fn from_fn(dims: [usize; 3], bbox: Aabb<3>, f: impl Fn(&Point<3>) -> u8) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        let ext = bbox.extent();
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = Point::<3>::new(
                        bbox.min.x + (i as f64 + 0.5) / dims[0] as f64 * ext.x,
                        bbox.min.y + (j as f64 + 0.5) / dims[1] as f64 * ext.y,
                        bbox.min.z + (k as f64 + 0.5) / dims[2] as f64 * ext.z,
                    );
                    data.push(f(&p));
                }
            }
        }
        Self { dims, bbox, data }
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> u8 {
        self.data[self.index(i, j, k)]
    }

    /// Voxel containing `x` (the nearest voxel center), if `x` is in the box.
    pub fn voxel_of(&self, x: &Point<3>) -> Option<[usize; 3]> {
        if !self.bbox.contains(x) {
            return None;
        }
        let ext = self.bbox.extent();
        let mut out = [0; 3];
        for a in 0..3 {
            let t = (x[a] - self.bbox.min[a]) / ext[a] * self.dims[a] as f64;
            out[a] = (t.floor().max(0.0) as usize).min(self.dims[a] - 1);
        }
        Some(out)
    }

    /// Trilinear interpolation of the byte values (as `0..=255` floats) with
    /// voxel centers as nodes; used as the marching-cubes field.
    pub fn trilinear(&self, x: &Point<3>) -> f64 {
        let ext = self.bbox.extent();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let t = (x[a] - self.bbox.min[a]) / ext[a] * self.dims[a] as f64 - 0.5;
            let t = t.clamp(0.0, (self.dims[a] - 1) as f64);
            let b = (t.floor() as usize).min(self.dims[a].saturating_sub(2));
            base[a] = b;
            frac[a] = t - b as f64;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..3 {
                let hi = (corner >> a) & 1 == 1;
                let i = (base[a] + usize::from(hi)).min(self.dims[a] - 1);
                idx[a] = i;
                w *= if hi { frac[a] } else { 1.0 - frac[a] };
            }
            acc += w * f64::from(self.value(idx[0], idx[1], idx[2]));
        }
        acc
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for d in self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in self.bbox.min.iter().chain(self.bbox.max.iter()) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |m: &str| Error::parse("CVXG grid", m);
        if bytes.len() < HEADER_LEN {
            return Err(err("file shorter than header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(err("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(err(&format!("unsupported version {version}")));
        }
        let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
        if dims.iter().any(|&d| d == 0) {
            return Err(err("zero dimension"));
        }
        let min = Point::<3>::new(f32_at(20) as f64, f32_at(24) as f64, f32_at(28) as f64);
        let max = Point::<3>::new(f32_at(32) as f64, f32_at(36) as f64, f32_at(40) as f64);
        if (0..3).any(|a| !(max[a] > min[a])) {
            return Err(err("empty bounding box"));
        }
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| err("dimensions overflow"))?;
        if bytes.len() != HEADER_LEN + n {
            return Err(err(&format!(
                "expected {} voxel bytes, found {}",
                n,
                bytes.len() - HEADER_LEN
            )));
        }
        Ok(Self {
            dims,
            bbox: Aabb::new(min, max),
            data: bytes[HEADER_LEN..].to_vec(),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

impl TargetOracle<3> for OccupancyGrid {
    fn bbox(&self) -> Aabb<3> {
        self.bbox
    }

    fn contains(&self, x: &Point<3>) -> bool {
        self.voxel_of(x)
            .is_some_and(|[i, j, k]| self.value(i, j, k) >= INSIDE_THRESHOLD)
    }

    fn kind(&self) -> &'static str {
        "occupancy-grid"
    }
}
