//! 2D silhouettes loaded from binary PGM (`P5`) images.
//!
//! The image covers `[-0.5, 0.5]^2` with row 0 at the top. Pixels with value
//! `>= 128` (after scaling to 8 bits) are inside. The boundary used for
//! near-surface sampling is the set of pixel edges separating inside from
//! outside, which matches the pixel-lookup oracle exactly.

use std::path::Path;

use rand::{Rng, RngCore};

use super::{Aabb, TargetOracle};
use crate::geometry::Point;
use crate::{Error, Result};

const THRESHOLD: u8 = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    edges: Vec<[Point<2>; 2]>,
}

impl Silhouette {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "silhouette needs {}x{} pixels, got {}",
                width,
                height,
                pixels.len()
            )));
        }
        let mut s = Self {
            width,
            height,
            pixels,
            edges: Vec::new(),
        };
        s.edges = s.boundary_edges();
        Ok(s)
    }

    /// Rasterizes `inside` at pixel centers.
    pub fn from_fn(width: usize, height: usize, inside: impl Fn(&Point<2>) -> bool) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                let p = Point::<2>::new(
                    -0.5 + (col as f64 + 0.5) / width as f64,
                    0.5 - (row as f64 + 0.5) / height as f64,
                );
                pixels.push(if inside(&p) { 255 } else { 0 });
            }
        }
        Self::new(width, height, pixels).expect("dimensions match by construction")
    }

    fn inside_px(&self, col: isize, row: isize) -> bool {
        if col < 0 || row < 0 || col >= self.width as isize || row >= self.height as isize {
            return false;
        }
        self.pixels[row as usize * self.width + col as usize] >= THRESHOLD
    }

    fn corner(&self, col: usize, row: usize) -> Point<2> {
        Point::<2>::new(
            -0.5 + col as f64 / self.width as f64,
            0.5 - row as f64 / self.height as f64,
        )
    }

    fn boundary_edges(&self) -> Vec<[Point<2>; 2]> {
        let mut edges = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                if !self.inside_px(col as isize, row as isize) {
                    continue;
                }
                let (c, r) = (col as isize, row as isize);
                if !self.inside_px(c - 1, r) {
                    edges.push([self.corner(col, row), self.corner(col, row + 1)]);
                }
                if !self.inside_px(c + 1, r) {
                    edges.push([self.corner(col + 1, row), self.corner(col + 1, row + 1)]);
                }
                if !self.inside_px(c, r - 1) {
                    edges.push([self.corner(col, row), self.corner(col + 1, row)]);
                }
                if !self.inside_px(c, r + 1) {
                    edges.push([self.corner(col, row + 1), self.corner(col + 1, row + 1)]);
                }
            }
        }
        edges
    }

    pub fn boundary(&self) -> &[[Point<2>; 2]] {
        &self.edges
    }

    pub fn parse_pgm(bytes: &[u8]) -> Result<Self> {
        let err = |m: &str| Error::parse("PGM", m);
        let mut pos = 0;
        let mut fields = Vec::new();
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
                pos += 1;
            }
            if start == pos {
                return Err(err("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| err("non-ascii header"))?);
        }
        if fields[0] != "P5" {
            return Err(err("only binary P5 images are supported"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| err("bad header number"));
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(err("maxval must be in 1..=255"));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let n = width * height;
        if bytes.len() < pos + n {
            return Err(err("truncated raster"));
        }
        let pixels = bytes[pos..pos + n]
            .iter()
            .map(|&v| ((v as usize * 255 + maxval / 2) / maxval) as u8)
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse_pgm(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

impl TargetOracle<2> for Silhouette {
    fn bbox(&self) -> Aabb<2> {
        Aabb::cube(0.5)
    }

    fn contains(&self, x: &Point<2>) -> bool {
        if !self.bbox().contains(x) {
            return false;
        }
        let col = (((x.x + 0.5) * self.width as f64).floor() as isize).min(self.width as isize - 1);
        let row = (((0.5 - x.y) * self.height as f64).floor() as isize).min(self.height as isize - 1);
        self.inside_px(col, row)
    }

    fn kind(&self) -> &'static str {
        "binary-image-2d"
    }

    fn has_surface(&self) -> bool {
        !self.edges.is_empty()
    }

    fn surface_point(&self, rng: &mut dyn RngCore) -> Result<Point<2>> {
        if self.edges.is_empty() {
            return Err(Error::NoSurface(self.kind()));
        }
        // all horizontal edges share one length and all vertical edges another
        let hlen = 1.0 / self.width as f64;
        let vlen = 1.0 / self.height as f64;
        let len = |e: &[Point<2>; 2]| if e[0].y == e[1].y { hlen } else { vlen };
        let total: f64 = self.edges.iter().map(len).sum();
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = &self.edges[self.edges.len() - 1];
        for e in &self.edges {
            let l = len(e);
            if pick < l {
                chosen = e;
                break;
            }
            pick -= l;
        }
        let t = rng.random::<f64>();
        Ok(chosen[0] + (chosen[1] - chosen[0]) * t)
    }
}
