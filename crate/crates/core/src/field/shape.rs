use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Index layout of a periodic grid on the flat torus `[0, 2π)^dim`.
///
/// Cell `j` along an axis is centred at `j·h` with `h = 2π / n`. Two-dimensional
/// data is stored row-major with the first axis slowest: `idx = i0 * n1 + i1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    dim: usize,
    sizes: [usize; 2],
}

impl Shape {
    pub const MIN_SIZE: usize = 8;

    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.len() > 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {}",
                sizes.len()
            )));
        }
        for &n in sizes {
            if n < Self::MIN_SIZE {
                return Err(Error::InvalidGrid(format!(
                    "size {n} below minimum {}",
                    Self::MIN_SIZE
                )));
            }
            if !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "size {n} is not a power of two"
                )));
            }
        }
        let mut s = [1, 1];
        s[..sizes.len()].copy_from_slice(sizes);
        Ok(Self {
            dim: sizes.len(),
            sizes: s,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes[..self.dim]
    }

    pub fn size(&self, axis: usize) -> usize {
        self.sizes[axis]
    }

    pub fn len(&self) -> usize {
        self.sizes[0] * self.sizes[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * PI / self.sizes[axis] as f64
    }

    /// Smallest grid spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim)
            .map(|d| self.spacing(d))
            .fold(f64::INFINITY, f64::min)
    }

    /// `(2π)^dim / Π sizes`.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim as i32)
    }

    /// Multi-index of a flat cell index.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        [idx / self.sizes[1], idx % self.sizes[1]]
    }

    /// Coordinates of the centre of cell `idx`; unused axes are zero.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let [i0, i1] = self.multi_index(idx);
        let mut x = [i0 as f64 * self.spacing(0), 0.0];
        if self.dim == 2 {
            x[1] = i1 as f64 * self.spacing(1);
        }
        x
    }

    /// The same layout refined by an integer power-of-two factor per axis.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let sizes: Vec<usize> = self.sizes().iter().map(|n| n * factor).collect();
        Shape::new(&sizes)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.sizes().iter().map(|n| n.to_string()).collect();
        write!(f, "{}", s.join("x"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Shape::new(&[4]).is_err());
        assert!(Shape::new(&[24]).is_err());
        assert!(Shape::new(&[8, 8, 8]).is_err());
        assert!(Shape::new(&[]).is_err());
        assert!(Shape::new(&[8, 16]).is_ok());
    }

    #[test]
    fn cell_volume_matches_torus_measure() {
        let s = Shape::new(&[16, 32]).unwrap();
        assert!((s.cell_volume() * s.len() as f64 - 4.0 * PI * PI).abs() < 1e-12);
        assert_eq!(s.multi_index(33), [1, 1]);
        assert!((s.coords(33)[1] - 2.0 * PI / 32.0).abs() < 1e-15);
    }
}
