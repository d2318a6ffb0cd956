//! JSON storage for fitted decompositions.
//!
//! ```json
//! {"version": 1, "dim": 3, "sigma": 75.0, "logsumexp_normalized": true,
//!  "convexes": [{"c": [0, 0, 0], "delta": 20.0,
//!                "planes": [{"n": [1, 0, 0], "d": -0.5}, ...]}]}
//! ```
//!
//! Normals are written unit-length. On load they keep their stored length;
//! every evaluation divides by it anyway.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{ConvexElement, Decomposition, Hyperplane, Point, SdfMode};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneRecord {
    pub n: Vec<f64>,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexRecord {
    pub c: Vec<f64>,
    pub delta: f64,
    pub planes: Vec<PlaneRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionFile {
    pub version: u32,
    pub dim: usize,
    pub sigma: f64,
    pub logsumexp_normalized: bool,
    pub convexes: Vec<ConvexRecord>,
}

/// A decomposition of either supported dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyDecomposition {
    D2(Decomposition<2>),
    D3(Decomposition<3>),
}

impl AnyDecomposition {
    pub fn dim(&self) -> usize {
        match self {
            Self::D2(_) => 2,
            Self::D3(_) => 3,
        }
    }
}

fn vector<const D: usize>(v: &[f64], what: &str) -> Result<Point<D>> {
    if v.len() != D {
        return Err(Error::parse(
            "decomposition file",
            format!("{what} has {} components, expected {D}", v.len()),
        ));
    }
    Ok(Point::from_column_slice(v))
}

// Renormalizing an already unit vector can move it by an ulp, which would
// make load/save cycles drift. Near-unit normals are written untouched.
fn unit_for_storage<const D: usize>(n: &Point<D>) -> Point<D> {
    if (n.norm() - 1.0).abs() <= 1e-12 {
        *n
    } else {
        n.normalize()
    }
}

impl DecompositionFile {
    pub fn from_decomposition<const D: usize>(dec: &Decomposition<D>) -> Self {
        Self {
            version: FORMAT_VERSION,
            dim: D,
            sigma: dec.sigma,
            logsumexp_normalized: dec.mode.is_normalized(),
            convexes: dec
                .elements
                .iter()
                .map(|e| ConvexRecord {
                    c: e.translation.iter().copied().collect(),
                    delta: e.delta,
                    planes: e
                        .planes
                        .iter()
                        .map(|p| PlaneRecord {
                            n: unit_for_storage(&p.normal_raw).iter().copied().collect(),
                            d: p.offset,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_decomposition<const D: usize>(&self) -> Result<Decomposition<D>> {
        if self.version != FORMAT_VERSION {
            return Err(Error::parse(
                "decomposition file",
                format!("unsupported version {}", self.version),
            ));
        }
        if self.dim != D {
            return Err(Error::DimensionMismatch {
                expected: D,
                found: self.dim,
            });
        }
        let elements = self
            .convexes
            .iter()
            .map(|c| {
                let planes = c
                    .planes
                    .iter()
                    .map(|p| {
                        let n = vector::<D>(&p.n, "plane normal")?;
                        let norm = n.norm();
                        if !(norm > 0.0) {
                            return Err(Error::parse("decomposition file", "zero plane normal"));
                        }
                        Ok(Hyperplane::new(n, p.d))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ConvexElement::new(planes, c.delta, vector::<D>(&c.c, "translation")?))
            })
            .collect::<Result<Vec<_>>>()?;
        let dec = Decomposition::new(elements, self.sigma).with_mode(SdfMode::from_normalized(self.logsumexp_normalized));
        dec.validate()?;
        Ok(dec)
    }

    pub fn to_any(&self) -> Result<AnyDecomposition> {
        match self.dim {
            2 => Ok(AnyDecomposition::D2(self.to_decomposition()?)),
            3 => Ok(AnyDecomposition::D3(self.to_decomposition()?)),
            d => Err(Error::parse("decomposition file", format!("unsupported dimension {d}"))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn save<const D: usize>(dec: &Decomposition<D>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = DecompositionFile::from_decomposition(dec).to_json();
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_file(path: impl AsRef<Path>) -> Result<DecompositionFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DecompositionFile::from_json(&text)
}

pub fn load<const D: usize>(path: impl AsRef<Path>) -> Result<Decomposition<D>> {
    load_file(path)?.to_decomposition()
}

pub fn load_any(path: impl AsRef<Path>) -> Result<AnyDecomposition> {
    load_file(path)?.to_any()
}
