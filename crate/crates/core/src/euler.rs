//! Spectral solver for the stochastic incompressible Euler system driven by
//! affine noise, used as the strong reference of the low Mach experiment.

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, TensorField, VectorField};
use crate::noise::{NoiseModel, WienerPath};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct EulerState<T> {
    pub v: VectorField<T>,
    pub pi: ScalarField<T>,
    pub time: T,
}

/// `(v·∇)v` with a dealiased gradient.
fn convective<T: Real>(grid: &Grid<T>, v: &VectorField<T>) -> Result<VectorField<T>> {
    let g = grid.vector_gradient_dealiased(v)?;
    Ok(advect(v, &g))
}

fn advect<T: Real>(v: &VectorField<T>, g: &TensorField<T>) -> VectorField<T> {
    let dim = v.dim();
    let mut w = VectorField::zeros(v.shape());
    for i in 0..dim {
        let out = w.component_mut(i);
        for j in 0..dim {
            let gij = g.get(i, j);
            let vj = v.component(j);
            for c in 0..out.len() {
                out[c] += vj[c] * gij[c];
            }
        }
    }
    w
}

/// Zero-mean pressure with `∇Π = P_H[(v·∇)v] − (v·∇)v`, i.e.
/// `Π = −Δ⁻¹ div[(v·∇)v]`.
pub fn pressure_from_projection<T: Real>(
    grid: &Grid<T>,
    v: &VectorField<T>,
) -> Result<ScalarField<T>> {
    let w = convective(grid, v)?;
    let div = grid.divergence(&w)?;
    let centred = div.map(|x| x - div.mean());
    Ok(grid.inverse_laplacian(&centred)?.map(|x| -x))
}

/// Max-entry norm `max_{x,i,j} |∂_j v_i|`.
pub fn gradient_norm<T: Real>(grid: &Grid<T>, v: &VectorField<T>) -> Result<f64> {
    Ok(grid.vector_gradient(v)?.max_abs().as_f64())
}

/// First sample time with `‖∇v‖_∞ > m`, or `t_end` when there is none.
pub fn stopping_time_tau_m(series: &[(f64, f64)], m: f64, t_end: f64) -> f64 {
    series
        .iter()
        .find(|&&(_, g)| g > m)
        .map(|&(t, _)| t)
        .unwrap_or(t_end)
}

#[derive(Clone, Debug)]
pub struct EulerSolver<T: Real> {
    pub grid: Grid<T>,
    pub noise: NoiseModel<T>,
    pub cfl: T,
}

const DIVERGENCE_LIMIT: f64 = 1e-8;

impl<T: Real> EulerSolver<T> {
    /// Affine noise keeps `G(1, v)` solenoidal, so no per-mode projection
    /// is needed; other noise kinds are rejected.
    pub fn new(grid: Grid<T>, noise: NoiseModel<T>) -> Result<Self> {
        if !noise.is_affine() {
            return Err(Error::InvalidParameter(
                "incompressible reference needs affine noise".into(),
            ));
        }
        if grid.dim() < 2 {
            return Err(Error::InvalidParameter(
                "incompressible reference needs a 2D grid".into(),
            ));
        }
        Ok(Self {
            grid,
            noise,
            cfl: T::lit(0.4),
        })
    }

    pub fn initial(&self, v0: VectorField<T>) -> Result<EulerState<T>> {
        let div = self.grid.divergence(&v0)?.max_abs().as_f64();
        if div > 1e-10 * (1.0 + v0.max_abs().as_f64()) {
            return Err(Error::DivergenceGrowth {
                value: div,
                limit: 1e-10,
            });
        }
        let pi = pressure_from_projection(&self.grid, &v0)?;
        Ok(EulerState {
            v: v0,
            pi,
            time: T::zero(),
        })
    }

    pub fn cfl_dt(&self, s: &EulerState<T>) -> T {
        let vmax = s.v.max_abs();
        if vmax > T::zero() {
            self.cfl * T::lit(self.grid.shape().min_spacing()) / vmax
        } else {
            T::infinity()
        }
    }

    /// `v ← P_H[v − Δt P_H((v·∇)v) + Σ_k G_k(1, v)ΔW_k]`.
    pub fn step_with_increments(
        &self,
        s: &EulerState<T>,
        dw: &[f64],
        dt: T,
    ) -> Result<EulerState<T>> {
        let limit = self.cfl_dt(s) / self.cfl;
        if dt > limit {
            return Err(Error::CflViolation {
                dt: dt.as_f64(),
                limit: limit.as_f64(),
            });
        }
        let w = convective(&self.grid, &s.v)?;
        let drift = self.grid.helmholtz_project_dealiased(&w)?;
        let mut v = s.v.clone();
        v.add_scaled(-dt, &drift);
        let dim = self.grid.dim();
        let one = ScalarField::constant(self.grid.shape(), T::one());
        for (k, &dwk) in dw.iter().enumerate().take(self.noise.modes()) {
            let g = self.noise.apply_g(&one, &s.v, k)?;
            v.add_scaled(T::lit(dwk), &g);
        }
        let div = self.grid.divergence(&v)?.max_abs().as_f64();
        if !(div <= DIVERGENCE_LIMIT) {
            return Err(Error::DivergenceGrowth {
                value: div,
                limit: DIVERGENCE_LIMIT,
            });
        }
        let v = self.grid.helmholtz_project(&v)?;
        debug_assert_eq!(v.dim(), dim);
        let pi = pressure_from_projection(&self.grid, &v)?;
        Ok(EulerState {
            v,
            pi,
            time: s.time + dt,
        })
    }

    pub fn step_em(
        &self,
        s: &EulerState<T>,
        path: &WienerPath,
        step: u64,
        dt: T,
    ) -> Result<EulerState<T>> {
        let dw = path.sample_increments(step, dt.as_f64(), self.noise.modes())?;
        self.step_with_increments(s, &dw, dt)
    }

    /// `v − P_H v` drift residual `∇Π + P_H[(v·∇)v] − (v·∇)v`, max-norm; zero
    /// for the exact pressure.
    pub fn pressure_identity_residual(&self, s: &EulerState<T>) -> Result<f64> {
        let w = convective(&self.grid, &s.v)?;
        let pw = self.grid.helmholtz_project(&w)?;
        let gp = self.grid.gradient(&s.pi)?;
        let mut r = gp;
        r.add_scaled(-T::one(), &pw);
        r.add_scaled(T::one(), &w);
        Ok(r.max_abs().as_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::taylor_green;

    #[test]
    fn constant_velocity_has_zero_pressure() {
        let grid = Grid::<f64>::new(&[16, 16]).unwrap();
        let v = VectorField::constant(grid.shape(), &[0.3, -0.2]);
        assert!(pressure_from_projection(&grid, &v).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn taylor_green_pressure_closed_form() {
        let grid = Grid::<f64>::new(&[32, 32]).unwrap();
        let v = taylor_green(&grid, 1.0).unwrap();
        let pi = pressure_from_projection(&grid, &v).unwrap();
        let exact = ScalarField::from_fn(grid.shape(), |x| {
            ((2.0 * x[0]).cos() + (2.0 * x[1]).cos()) / 4.0
        });
        let err = pi.zip_map(&exact, |a, b| a - b).max_abs();
        assert!(err < 1e-12, "{err}");
        assert!((gradient_norm(&grid, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stopping_time_examples() {
        let series = [(0.0, 1.0), (0.5, 1.0), (1.0, 1.0)];
        assert_eq!(stopping_time_tau_m(&series, 1e9, 1.0), 1.0);
        assert_eq!(stopping_time_tau_m(&series, 0.0, 1.0), 0.0);
        assert_eq!(stopping_time_tau_m(&series, 0.5, 1.0), 0.0);
        assert_eq!(stopping_time_tau_m(&series, 2.0, 1.0), 1.0);
    }

    #[test]
    fn non_affine_noise_is_rejected() {
        let grid = Grid::<f64>::new(&[16, 16]).unwrap();
        let g = NoiseModel::general(grid.shape(), vec![0.1], vec![0.1]).unwrap();
        assert!(EulerSolver::new(grid, g).is_err());
    }
}
