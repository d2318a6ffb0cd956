//! Flat parameter vector used by the optimizer.
//!
//! Layout, for each element `k` in order:
//! `[translation (D), delta (1), for each plane h: [normal_raw (D), offset (1)]]`.

use crate::geometry::{ConvexElement, Decomposition, Hyperplane, Point};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub elements: usize,
    pub planes: usize,
    pub dim: usize,
}

impl ParamLayout {
    pub fn new(elements: usize, planes: usize, dim: usize) -> Self {
        Self {
            elements,
            planes,
            dim,
        }
    }

    pub fn of<const D: usize>(dec: &Decomposition<D>) -> Self {
        Self::new(dec.num_elements(), dec.planes_per_element(), D)
    }

    #[inline]
    pub fn per_element(&self) -> usize {
        self.dim + 1 + self.planes * (self.dim + 1)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.elements * self.per_element()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn element_start(&self, k: usize) -> usize {
        k * self.per_element()
    }

    #[inline]
    pub fn translation(&self, k: usize) -> usize {
        self.element_start(k)
    }

    #[inline]
    pub fn delta(&self, k: usize) -> usize {
        self.element_start(k) + self.dim
    }

    #[inline]
    pub fn normal(&self, k: usize, h: usize) -> usize {
        self.element_start(k) + self.dim + 1 + h * (self.dim + 1)
    }

    #[inline]
    pub fn offset(&self, k: usize, h: usize) -> usize {
        self.normal(k, h) + self.dim
    }

    /// What a flat index refers to.
    pub fn role(&self, index: usize) -> ParamRole {
        let k = index / self.per_element();
        let local = index % self.per_element();
        if local < self.dim {
            ParamRole::Translation { element: k, axis: local }
        } else if local == self.dim {
            ParamRole::Delta { element: k }
        } else {
            let rest = local - self.dim - 1;
            let h = rest / (self.dim + 1);
            let j = rest % (self.dim + 1);
            if j < self.dim {
                ParamRole::Normal { element: k, plane: h, axis: j }
            } else {
                ParamRole::Offset { element: k, plane: h }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Translation { element: usize, axis: usize },
    Delta { element: usize },
    Normal { element: usize, plane: usize, axis: usize },
    Offset { element: usize, plane: usize },
}

/// Flattens every trainable scalar of `dec`.
pub fn pack<const D: usize>(dec: &Decomposition<D>) -> Vec<f64> {
    let layout = ParamLayout::of(dec);
    let mut out = Vec::with_capacity(layout.len());
    for e in &dec.elements {
        out.extend(e.translation.iter());
        out.push(e.delta);
        for p in &e.planes {
            out.extend(p.normal_raw.iter());
            out.push(p.offset);
        }
    }
    out
}

/// Writes `params` back into a decomposition with the same shape.
pub fn unpack_into<const D: usize>(dec: &mut Decomposition<D>, params: &[f64]) -> Result<()> {
    let layout = ParamLayout::of(dec);
    if params.len() != layout.len() {
        return Err(Error::InvalidArgument(format!(
            "parameter vector has length {}, layout expects {}",
            params.len(),
            layout.len()
        )));
    }
    for (k, e) in dec.elements.iter_mut().enumerate() {
        let t = layout.translation(k);
        e.translation = Point::from_column_slice(&params[t..t + D]);
        e.delta = params[layout.delta(k)];
        for (h, p) in e.planes.iter_mut().enumerate() {
            let n = layout.normal(k, h);
            *p = Hyperplane::new(Point::from_column_slice(&params[n..n + D]), params[n + D]);
        }
    }
    Ok(())
}

/// Builds a fresh decomposition from a template's shape, sigma and mode.
pub fn unpack<const D: usize>(template: &Decomposition<D>, params: &[f64]) -> Result<Decomposition<D>> {
    let mut dec = template.clone();
    unpack_into(&mut dec, params)?;
    Ok(dec)
}

/// A zero-parameter element with the given plane count, used to shape templates.
pub fn blank_element<const D: usize>(planes: usize) -> ConvexElement<D> {
    ConvexElement::new(
        vec![Hyperplane::new(Point::<D>::repeat(1.0), 0.0); planes],
        1.0,
        Point::zeros(),
    )
}
