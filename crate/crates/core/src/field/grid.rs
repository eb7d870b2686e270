use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{ScalarField, Shape, TensorField, VectorField};
use crate::scalar::Real;

type Spectrum<T> = Vec<Complex<T>>;

struct Axis<T: Real> {
    n: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

/// Per-cell wavenumber tables in the flat spectral layout.
struct Tables<T> {
    /// Wavenumbers for odd (first) derivatives; the Nyquist entry is zero.
    k_odd: [Vec<T>; 2],
    /// `|k|²` including Nyquist modes.
    k_sq: Vec<T>,
    /// 2/3-rule retention mask.
    keep: Vec<bool>,
    /// Flat index of the mode `-k`.
    neg: Vec<usize>,
    /// Signed integer wavenumbers per axis.
    k_int: [Vec<i64>; 2],
}

struct Plans<T: Real> {
    axes: Vec<Axis<T>>,
    tables: Tables<T>,
}

/// Pseudo-spectral operator set for one periodic grid.
///
/// Cloning is cheap; FFT plans and wavenumber tables are shared. Scratch
/// buffers are allocated per call so a `Grid` can be used from many threads.
#[derive(Clone)]
pub struct Grid<T: Real> {
    shape: Shape,
    plans: Arc<Plans<T>>,
}

impl<T: Real> std::fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("shape", &self.shape).finish()
    }
}

fn signed_wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

impl<T: Real> Grid<T> {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        Self::from_shape(Shape::new(sizes)?)
    }

    pub fn from_shape(shape: Shape) -> Result<Self> {
        let mut planner = FftPlanner::new();
        let axes = (0..shape.dim())
            .map(|d| {
                let n = shape.size(d);
                Axis {
                    n,
                    fwd: planner.plan_fft_forward(n),
                    inv: planner.plan_fft_inverse(n),
                }
            })
            .collect();

        let len = shape.len();
        let mut k_odd = [vec![T::zero(); len], vec![T::zero(); len]];
        let mut k_int = [vec![0i64; len], vec![0i64; len]];
        let mut k_sq = vec![T::zero(); len];
        let mut keep = vec![true; len];
        let mut neg = vec![0usize; len];
        let (n0, n1) = (shape.size(0), shape.size(1));
        for idx in 0..len {
            let [i0, i1] = shape.multi_index(idx);
            let mut ksq = 0i64;
            for (d, &(i, n)) in [(i0, n0), (i1, n1)].iter().enumerate().take(shape.dim()) {
                let k = signed_wavenumber(i, n);
                k_int[d][idx] = k;
                ksq += k * k;
                if 2 * i != n {
                    k_odd[d][idx] = T::lit(k as f64);
                }
                if 3 * k.unsigned_abs() as usize > n {
                    keep[idx] = false;
                }
            }
            k_sq[idx] = T::lit(ksq as f64);
            neg[idx] = ((n0 - i0) % n0) * n1 + (n1 - i1) % n1;
        }

        Ok(Self {
            shape,
            plans: Arc::new(Plans {
                axes,
                tables: Tables {
                    k_odd,
                    k_sq,
                    keep,
                    neg,
                    k_int,
                },
            }),
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn len(&self) -> usize {
        self.shape.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self, shape: Shape) -> Result<()> {
        if shape != self.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.to_string(),
                found: shape.to_string(),
            });
        }
        Ok(())
    }

    // ---- transforms -------------------------------------------------------

    fn transform(&self, buf: &mut [Complex<T>], inverse: bool) {
        let axes = &self.plans.axes;
        let pick = |a: &Axis<T>| {
            if inverse {
                a.inv.clone()
            } else {
                a.fwd.clone()
            }
        };
        if self.dim() == 1 {
            let fft = pick(&axes[0]);
            let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(buf, &mut scratch);
            return;
        }
        let (n0, n1) = (axes[0].n, axes[1].n);
        let fft1 = pick(&axes[1]);
        let fft0 = pick(&axes[0]);
        let mut scratch = vec![
            Complex::default();
            fft1.get_inplace_scratch_len()
                .max(fft0.get_inplace_scratch_len())
        ];
        fft1.process_with_scratch(buf, &mut scratch);
        let mut tmp = vec![Complex::default(); buf.len()];
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                tmp[i1 * n0 + i0] = buf[i0 * n1 + i1];
            }
        }
        fft0.process_with_scratch(&mut tmp, &mut scratch);
        for i1 in 0..n1 {
            for i0 in 0..n0 {
                buf[i0 * n1 + i1] = tmp[i1 * n0 + i0];
            }
        }
    }

    fn forward(&self, data: &[T]) -> Spectrum<T> {
        let mut buf: Spectrum<T> = data.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut buf, false);
        buf
    }

    fn inverse(&self, mut spec: Spectrum<T>) -> Vec<T> {
        self.transform(&mut spec, true);
        let scale = T::one() / T::from_usize_lossy(self.len());
        spec.into_iter().map(|c| c.re * scale).collect()
    }

    /// Two real fields through one complex transform.
    fn forward_pair(&self, a: &[T], b: &[T]) -> (Spectrum<T>, Spectrum<T>) {
        let mut buf: Spectrum<T> = a.iter().zip(b).map(|(&x, &y)| Complex::new(x, y)).collect();
        self.transform(&mut buf, false);
        let half = T::lit(0.5);
        let neg = &self.plans.tables.neg;
        let mut fa = Vec::with_capacity(buf.len());
        let mut fb = Vec::with_capacity(buf.len());
        for (idx, &z) in buf.iter().enumerate() {
            let zc = buf[neg[idx]].conj();
            fa.push((z + zc) * half);
            // (z - zc) / (2i)
            let d = (z - zc) * half;
            fb.push(Complex::new(d.im, -d.re));
        }
        (fa, fb)
    }

    /// Inverse of two Hermitian spectra through one complex transform.
    fn inverse_pair(&self, fa: Spectrum<T>, fb: Spectrum<T>) -> (Vec<T>, Vec<T>) {
        let mut buf: Spectrum<T> = fa
            .into_iter()
            .zip(fb)
            .map(|(a, b)| a + Complex::new(-b.im, b.re))
            .collect();
        self.transform(&mut buf, true);
        let scale = T::one() / T::from_usize_lossy(self.len());
        buf.into_iter()
            .map(|c| (c.re * scale, c.im * scale))
            .unzip()
    }

    fn forward_many(&self, fields: &[&[T]]) -> Vec<Spectrum<T>> {
        let mut out = Vec::with_capacity(fields.len());
        let mut it = fields.chunks(2);
        for chunk in &mut it {
            if chunk.len() == 2 {
                let (a, b) = self.forward_pair(chunk[0], chunk[1]);
                out.push(a);
                out.push(b);
            } else {
                out.push(self.forward(chunk[0]));
            }
        }
        out
    }

    fn inverse_many(&self, specs: Vec<Spectrum<T>>) -> Vec<Vec<T>> {
        let mut out = Vec::with_capacity(specs.len());
        let mut it = specs.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => {
                    let (x, y) = self.inverse_pair(a, b);
                    out.push(x);
                    out.push(y);
                }
                None => out.push(self.inverse(a)),
            }
        }
        out
    }

    #[inline]
    fn retained(&self, idx: usize, dealias: bool) -> bool {
        !dealias || self.plans.tables.keep[idx]
    }

    // ---- differential operators -------------------------------------------

    fn gradient_impl(&self, f: &[T], dealias: bool) -> Vec<Vec<T>> {
        let spec = self.forward(f);
        let t = &self.plans.tables;
        let derivs: Vec<Spectrum<T>> = (0..self.dim())
            .map(|d| {
                spec.iter()
                    .enumerate()
                    .map(|(idx, &c)| {
                        if self.retained(idx, dealias) {
                            c * Complex::new(T::zero(), t.k_odd[d][idx])
                        } else {
                            Complex::default()
                        }
                    })
                    .collect()
            })
            .collect();
        self.inverse_many(derivs)
    }

    fn divergence_spec(&self, specs: &[Spectrum<T>], dealias: bool) -> Spectrum<T> {
        let t = &self.plans.tables;
        (0..self.len())
            .map(|idx| {
                if !self.retained(idx, dealias) {
                    return Complex::default();
                }
                let mut acc = Complex::default();
                for (d, s) in specs.iter().enumerate() {
                    acc = acc + s[idx] * Complex::new(T::zero(), t.k_odd[d][idx]);
                }
                acc
            })
            .collect()
    }

    /// Spectral gradient; exact for resolved modes, zero-mean components.
    pub fn gradient(&self, f: &ScalarField<T>) -> Result<VectorField<T>> {
        self.check(f.shape())?;
        f.validate()?;
        Ok(VectorField::from_raw(
            self.shape,
            self.gradient_impl(f.values(), false),
        ))
    }

    /// Gradient restricted to the 2/3-rule retained modes.
    pub fn gradient_dealiased(&self, f: &ScalarField<T>) -> Result<VectorField<T>> {
        self.check(f.shape())?;
        f.validate()?;
        Ok(VectorField::from_raw(
            self.shape,
            self.gradient_impl(f.values(), true),
        ))
    }

    fn divergence_impl(&self, v: &VectorField<T>, dealias: bool) -> Result<ScalarField<T>> {
        self.check(v.shape())?;
        v.validate()?;
        let refs: Vec<&[T]> = v.components().iter().map(|c| c.as_slice()).collect();
        let specs = self.forward_many(&refs);
        let div = self.divergence_spec(&specs, dealias);
        Ok(ScalarField::from_raw(self.shape, self.inverse(div)))
    }

    /// Spectral divergence; its integral over the torus vanishes identically.
    pub fn divergence(&self, v: &VectorField<T>) -> Result<ScalarField<T>> {
        self.divergence_impl(v, false)
    }

    pub fn divergence_dealiased(&self, v: &VectorField<T>) -> Result<ScalarField<T>> {
        self.divergence_impl(v, true)
    }

    fn vector_gradient_impl(&self, v: &VectorField<T>, dealias: bool) -> Result<TensorField<T>> {
        self.check(v.shape())?;
        v.validate()?;
        let dim = self.dim();
        let refs: Vec<&[T]> = v.components().iter().map(|c| c.as_slice()).collect();
        let specs = self.forward_many(&refs);
        let t = &self.plans.tables;
        let mut derivs = Vec::with_capacity(dim * dim);
        for s in &specs {
            for d in 0..dim {
                derivs.push(
                    s.iter()
                        .enumerate()
                        .map(|(idx, &c)| {
                            if self.retained(idx, dealias) {
                                c * Complex::new(T::zero(), t.k_odd[d][idx])
                            } else {
                                Complex::default()
                            }
                        })
                        .collect(),
                );
            }
        }
        Ok(TensorField::from_raw(self.shape, self.inverse_many(derivs)))
    }

    /// `(∇v)_{ij} = ∂_j v_i`.
    pub fn vector_gradient(&self, v: &VectorField<T>) -> Result<TensorField<T>> {
        self.vector_gradient_impl(v, false)
    }

    pub fn vector_gradient_dealiased(&self, v: &VectorField<T>) -> Result<TensorField<T>> {
        self.vector_gradient_impl(v, true)
    }

    fn tensor_divergence_impl(&self, s: &TensorField<T>, dealias: bool) -> Result<VectorField<T>> {
        self.check(s.shape())?;
        let dim = self.dim();
        let refs: Vec<&[T]> = s.components().iter().map(|c| c.as_slice()).collect();
        for r in &refs {
            if let Some(index) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "tensor field".into(),
                    index,
                });
            }
        }
        let specs = self.forward_many(&refs);
        let rows: Vec<Spectrum<T>> = specs
            .chunks(dim)
            .map(|row| self.divergence_spec(row, dealias))
            .collect();
        Ok(VectorField::from_raw(self.shape, self.inverse_many(rows)))
    }

    /// Row-wise divergence `(div S)_i = Σ_j ∂_j S_{ij}`.
    pub fn tensor_divergence(&self, s: &TensorField<T>) -> Result<VectorField<T>> {
        self.tensor_divergence_impl(s, false)
    }

    pub fn tensor_divergence_dealiased(&self, s: &TensorField<T>) -> Result<VectorField<T>> {
        self.tensor_divergence_impl(s, true)
    }

    fn mean_tolerance(&self, scale: T) -> T {
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        tol * scale.max(T::one())
    }

    /// Solves `Δu = f` for zero-mean `u`.
    ///
    /// `f` must have zero mean up to `1e-12` (relative to `max|f|` when that
    /// exceeds one); the residual mean is then removed.
    pub fn inverse_laplacian(&self, f: &ScalarField<T>) -> Result<ScalarField<T>> {
        self.check(f.shape())?;
        f.validate()?;
        let mean = f.mean();
        let tol = self.mean_tolerance(f.max_abs());
        if mean.abs() > tol {
            return Err(Error::NonZeroMean {
                mean: mean.as_f64(),
                tol: tol.as_f64(),
            });
        }
        let t = &self.plans.tables;
        let spec: Spectrum<T> = self
            .forward(f.values())
            .into_iter()
            .enumerate()
            .map(|(idx, c)| {
                if t.k_sq[idx] == T::zero() {
                    Complex::default()
                } else {
                    c * (-T::one() / t.k_sq[idx])
                }
            })
            .collect();
        Ok(ScalarField::from_raw(self.shape, self.inverse(spec)))
    }

    fn project_spec(&self, specs: &mut [Spectrum<T>]) {
        let t = &self.plans.tables;
        for idx in 0..self.len() {
            let mut kk = T::zero();
            let mut kv = Complex::default();
            for (d, s) in specs.iter().enumerate() {
                let k = t.k_odd[d][idx];
                kk += k * k;
                kv = kv + s[idx] * k;
            }
            if kk > T::zero() {
                let coef = kv / kk;
                for (d, s) in specs.iter_mut().enumerate() {
                    s[idx] = s[idx] - coef * t.k_odd[d][idx];
                }
            }
        }
    }

    /// Helmholtz projection `Id − ∇Δ⁻¹div` onto divergence-free fields.
    pub fn helmholtz_project(&self, v: &VectorField<T>) -> Result<VectorField<T>> {
        self.check(v.shape())?;
        v.validate()?;
        let refs: Vec<&[T]> = v.components().iter().map(|c| c.as_slice()).collect();
        let mut specs = self.forward_many(&refs);
        self.project_spec(&mut specs);
        Ok(VectorField::from_raw(self.shape, self.inverse_many(specs)))
    }

    /// Helmholtz projection followed by 2/3-rule truncation.
    pub fn helmholtz_project_dealiased(&self, v: &VectorField<T>) -> Result<VectorField<T>> {
        self.check(v.shape())?;
        v.validate()?;
        let refs: Vec<&[T]> = v.components().iter().map(|c| c.as_slice()).collect();
        let mut specs = self.forward_many(&refs);
        self.project_spec(&mut specs);
        for s in specs.iter_mut() {
            for (idx, c) in s.iter_mut().enumerate() {
                if !self.retained(idx, true) {
                    *c = Complex::default();
                }
            }
        }
        Ok(VectorField::from_raw(self.shape, self.inverse_many(specs)))
    }

    /// Cell-volume weighted sum.
    pub fn integrate(&self, f: &ScalarField<T>) -> T {
        f.integral()
    }

    /// `(2π)^N / n² Σ|f̂_k|²`, equal to `∫|f|² dx` by Parseval.
    pub fn modal_norm_sq(&self, f: &ScalarField<T>) -> Result<T> {
        self.check(f.shape())?;
        let spec = self.forward(f.values());
        let s: T = spec.iter().map(|c| c.norm_sqr()).sum();
        let n = T::from_usize_lossy(self.len());
        Ok(s * T::lit(self.shape.volume()) / (n * n))
    }

    /// Zeroes every mode outside the 2/3-rule band.
    pub fn dealias(&self, f: &ScalarField<T>) -> Result<ScalarField<T>> {
        self.check(f.shape())?;
        let spec: Spectrum<T> = self
            .forward(f.values())
            .into_iter()
            .enumerate()
            .map(|(idx, c)| {
                if self.retained(idx, true) {
                    c
                } else {
                    Complex::default()
                }
            })
            .collect();
        Ok(ScalarField::from_raw(self.shape, self.inverse(spec)))
    }

    /// Spectral interpolation onto another grid of the same dimension.
    ///
    /// Modes resolved by both grids are copied; everything else, including the
    /// Nyquist modes of the smaller grid, is dropped.
    pub fn resample(&self, f: &ScalarField<T>, target: &Grid<T>) -> Result<ScalarField<T>> {
        self.check(f.shape())?;
        if target.dim() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}-dimensional target", self.dim()),
                found: format!("{}-dimensional target", target.dim()),
            });
        }
        let src = self.forward(f.values());
        let ts = target.shape();
        let scale = T::from_usize_lossy(target.len()) / T::from_usize_lossy(self.len());
        let tt = &target.plans.tables;
        let out: Spectrum<T> = (0..target.len())
            .map(|idx| {
                let mut src_idx = 0usize;
                for d in 0..self.dim() {
                    let k = tt.k_int[d][idx];
                    let lim = self.shape.size(d).min(ts.size(d)) as i64;
                    if 2 * k.abs() >= lim {
                        return Complex::default();
                    }
                    let n = self.shape.size(d) as i64;
                    let j = k.rem_euclid(n) as usize;
                    src_idx = src_idx * self.shape.size(d) + j;
                }
                src[src_idx] * scale
            })
            .collect();
        Ok(ScalarField::from_raw(ts, target.inverse(out)))
    }

    pub fn resample_vector(&self, v: &VectorField<T>, target: &Grid<T>) -> Result<VectorField<T>> {
        let comps = (0..v.dim())
            .map(|d| {
                self.resample(&v.component_field(d), target)
                    .map(|f| f.into_values())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField::from_raw(target.shape(), comps))
    }
}
