use crate::error::{Error, Result};
use crate::field::Shape;
use crate::scalar::Real;

fn check_finite<T: Real>(what: &str, data: &[T]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            what: what.to_string(),
            index,
        }),
        None => Ok(()),
    }
}

fn check_len(shape: &Shape, len: usize) -> Result<()> {
    if len != shape.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} values ({shape})", shape.len()),
            found: format!("{len} values"),
        });
    }
    Ok(())
}

/// Real samples of a scalar quantity at cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    /// Validated constructor: value count must match the grid and entries must be finite.
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        check_len(&shape, data.len())?;
        check_finite("scalar field", &data)?;
        Ok(Self { shape, data })
    }

    pub(crate) fn from_raw(shape: Shape, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        Self { shape, data }
    }

    pub fn constant(shape: Shape, value: T) -> Self {
        Self::from_raw(shape, vec![value; shape.len()])
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::constant(shape, T::zero())
    }

    /// Samples `f(x)` at every cell centre; `x` has one entry per axis.
    pub fn from_fn(shape: Shape, f: impl Fn(&[f64]) -> f64) -> Self {
        let data = (0..shape.len())
            .map(|i| {
                let x = shape.coords(i);
                T::lit(f(&x[..shape.dim()]))
            })
            .collect();
        Self::from_raw(shape, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<T> {
        self.data
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("scalar field", &self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(self.shape, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        Self::from_raw(
            self.shape,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: T, other: &Self) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> T {
        self.data.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max(&self) -> T {
        self.data.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    /// Cell-volume weighted sum, i.e. the torus integral.
    pub fn integral(&self) -> T {
        let s: T = self.data.iter().copied().sum();
        s * T::lit(self.shape.cell_volume())
    }

    pub fn mean(&self) -> T {
        let s: T = self.data.iter().copied().sum();
        s / T::from_usize_lossy(self.data.len())
    }
}

/// `dim` scalar components sampled at cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    shape: Shape,
    comps: Vec<Vec<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn new(shape: Shape, comps: Vec<Vec<T>>) -> Result<Self> {
        if comps.len() != shape.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} components", shape.dim()),
                found: format!("{} components", comps.len()),
            });
        }
        for c in &comps {
            check_len(&shape, c.len())?;
            check_finite("vector field", c)?;
        }
        Ok(Self { shape, comps })
    }

    pub(crate) fn from_raw(shape: Shape, comps: Vec<Vec<T>>) -> Self {
        debug_assert_eq!(comps.len(), shape.dim());
        Self { shape, comps }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::from_raw(shape, vec![vec![T::zero(); shape.len()]; shape.dim()])
    }

    /// Same value in every cell.
    pub fn constant(shape: Shape, value: &[T]) -> Self {
        assert_eq!(value.len(), shape.dim(), "constant vector length");
        Self::from_raw(shape, value.iter().map(|&v| vec![v; shape.len()]).collect())
    }

    pub fn from_components(comps: Vec<ScalarField<T>>) -> Result<Self> {
        let shape = comps
            .first()
            .map(|c| c.shape())
            .ok_or_else(|| Error::InvalidParameter("no components".into()))?;
        Self::new(shape, comps.into_iter().map(|c| c.into_values()).collect())
    }

    /// Samples a vector-valued function; `f` writes `dim` components.
    pub fn from_fn(shape: Shape, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let dim = shape.dim();
        let mut comps = vec![vec![T::zero(); shape.len()]; dim];
        let mut out = [0.0; 2];
        for i in 0..shape.len() {
            let x = shape.coords(i);
            f(&x[..dim], &mut out[..dim]);
            for d in 0..dim {
                comps[d][i] = T::lit(out[d]);
            }
        }
        Self::from_raw(shape, comps)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, d: usize) -> &[T] {
        &self.comps[d]
    }

    pub fn component_mut(&mut self, d: usize) -> &mut [T] {
        &mut self.comps[d]
    }

    pub fn component_field(&self, d: usize) -> ScalarField<T> {
        ScalarField::from_raw(self.shape, self.comps[d].clone())
    }

    pub fn components(&self) -> &[Vec<T>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Vec<T>> {
        self.comps
    }

    /// Vector value at one cell.
    pub fn at(&self, idx: usize) -> [T; 2] {
        let mut v = [T::zero(); 2];
        for (d, c) in self.comps.iter().enumerate() {
            v[d] = c[idx];
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        self.comps
            .iter()
            .try_for_each(|c| check_finite("vector field", c))
    }

    pub fn add_scaled(&mut self, alpha: T, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += alpha * y;
            }
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for c in &mut self.comps {
            for x in c.iter_mut() {
                *x *= alpha;
            }
        }
    }

    pub fn max_abs(&self) -> T {
        self.comps
            .iter()
            .flatten()
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Pointwise Euclidean norm squared.
    pub fn norm_sq(&self) -> ScalarField<T> {
        let mut out = vec![T::zero(); self.shape.len()];
        for c in &self.comps {
            for (o, &v) in out.iter_mut().zip(c) {
                *o += v * v;
            }
        }
        ScalarField::from_raw(self.shape, out)
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &Self) -> ScalarField<T> {
        let mut out = vec![T::zero(); self.shape.len()];
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                *o += x * y;
            }
        }
        ScalarField::from_raw(self.shape, out)
    }

    /// Divides every component pointwise by `rho`.
    pub fn div_by(&self, rho: &ScalarField<T>) -> Self {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().zip(rho.values()).map(|(&m, &r)| m / r).collect())
            .collect();
        Self::from_raw(self.shape, comps)
    }

    /// Multiplies every component pointwise by `rho`.
    pub fn mul_by(&self, rho: &ScalarField<T>) -> Self {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().zip(rho.values()).map(|(&m, &r)| m * r).collect())
            .collect();
        Self::from_raw(self.shape, comps)
    }
}

/// `dim × dim` components, `(i, j)` stored at `i * dim + j`.
///
/// For a velocity gradient the convention is `(∇u)_{ij} = ∂_j u_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField<T> {
    shape: Shape,
    comps: Vec<Vec<T>>,
}

impl<T: Real> TensorField<T> {
    pub fn new(shape: Shape, comps: Vec<Vec<T>>) -> Result<Self> {
        let n = shape.dim() * shape.dim();
        if comps.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} components"),
                found: format!("{} components", comps.len()),
            });
        }
        for c in &comps {
            check_len(&shape, c.len())?;
            check_finite("tensor field", c)?;
        }
        Ok(Self { shape, comps })
    }

    pub(crate) fn from_raw(shape: Shape, comps: Vec<Vec<T>>) -> Self {
        debug_assert_eq!(comps.len(), shape.dim() * shape.dim());
        Self { shape, comps }
    }

    pub fn zeros(shape: Shape) -> Self {
        let n = shape.dim() * shape.dim();
        Self::from_raw(shape, vec![vec![T::zero(); shape.len()]; n])
    }

    /// Same matrix in every cell; `value` is row-major `dim × dim`.
    pub fn constant(shape: Shape, value: &[T]) -> Self {
        assert_eq!(value.len(), shape.dim() * shape.dim());
        Self::from_raw(shape, value.iter().map(|&v| vec![v; shape.len()]).collect())
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> &[T] {
        &self.comps[i * self.dim() + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut [T] {
        let d = self.dim();
        &mut self.comps[i * d + j]
    }

    pub fn components(&self) -> &[Vec<T>] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [Vec<T>] {
        &mut self.comps
    }

    /// Matrix at one cell, row-major.
    pub fn at(&self, idx: usize) -> [[T; 2]; 2] {
        let d = self.dim();
        let mut m = [[T::zero(); 2]; 2];
        for i in 0..d {
            for j in 0..d {
                m[i][j] = self.comps[i * d + j][idx];
            }
        }
        m
    }

    pub fn trace(&self) -> ScalarField<T> {
        let mut out = vec![T::zero(); self.shape.len()];
        for i in 0..self.dim() {
            for (o, &v) in out.iter_mut().zip(self.get(i, i)) {
                *o += v;
            }
        }
        ScalarField::from_raw(self.shape, out)
    }

    /// Pointwise Frobenius product `A : B`.
    pub fn contract(&self, other: &Self) -> ScalarField<T> {
        let mut out = vec![T::zero(); self.shape.len()];
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                *o += x * y;
            }
        }
        ScalarField::from_raw(self.shape, out)
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim();
        let mut comps = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                comps.push(self.comps[j * d + i].clone());
            }
        }
        Self::from_raw(self.shape, comps)
    }

    pub fn add_scaled(&mut self, alpha: T, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += alpha * y;
            }
        }
    }

    pub fn max_abs(&self) -> T {
        self.comps
            .iter()
            .flatten()
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }
}
