//! Pseudo-spectral semi-discretisation of the (Mach-rescaled) stochastic
//! compressible Navier–Stokes system and its Euler–Maruyama stepper.

use crate::constitutive::{stress, PressureLaw, Viscosity};
use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, TensorField, VectorField};
use crate::noise::{NoiseModel, WienerPath};
use crate::scalar::Real;

/// Density and momentum of one realisation.
#[derive(Clone, Debug, PartialEq)]
pub struct State<T> {
    pub rho: ScalarField<T>,
    pub mom: VectorField<T>,
    pub time: T,
}

impl<T: Real> State<T> {
    pub fn new(rho: ScalarField<T>, mom: VectorField<T>, time: T) -> Result<Self> {
        if rho.shape() != mom.shape() {
            return Err(Error::ShapeMismatch {
                expected: rho.shape().to_string(),
                found: mom.shape().to_string(),
            });
        }
        rho.validate()?;
        mom.validate()?;
        if let Some(c) = rho.values().iter().position(|&r| !(r > T::zero())) {
            return Err(Error::Domain {
                what: "initial density",
                value: rho.values()[c].as_f64(),
                domain: "ρ > 0",
            });
        }
        Ok(Self { rho, mom, time })
    }

    /// `ρ ≡ rho0`, `m ≡ 0`.
    pub fn rest(grid: &Grid<T>, rho0: T) -> Self {
        Self {
            rho: ScalarField::constant(grid.shape(), rho0),
            mom: VectorField::zeros(grid.shape()),
            time: T::zero(),
        }
    }

    pub fn velocity(&self) -> VectorField<T> {
        self.mom.div_by(&self.rho)
    }

    pub fn mass(&self) -> T {
        self.rho.integral()
    }
}

/// Physical parameters of one run.
#[derive(Clone, Debug)]
pub struct Model<T> {
    pub law: PressureLaw<T>,
    pub visc: Viscosity<T>,
    pub noise: NoiseModel<T>,
    /// Mach parameter; pressure enters as `p_δ/ε²`. `ε = 1` is the unscaled system.
    pub eps: T,
}

impl<T: Real> Model<T> {
    pub fn new(
        law: PressureLaw<T>,
        visc: Viscosity<T>,
        noise: NoiseModel<T>,
        eps: T,
    ) -> Result<Self> {
        if !(eps > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "eps = {eps} must be positive"
            )));
        }
        Ok(Self {
            law,
            visc,
            noise,
            eps,
        })
    }

    /// The pressure law actually felt by the momentum equation, `p_δ/ε²`.
    pub fn effective_law(&self) -> PressureLaw<T> {
        self.law.scaled(T::one() / (self.eps * self.eps))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepperConfig<T> {
    /// Fixed step; `None` picks `cfl_dt` of the initial state.
    pub dt: Option<T>,
    pub cfl: T,
    pub rho_floor: T,
    /// Also bound `dt` by the explicit-Euler stability limit of damped
    /// acoustic and advective modes.
    pub damping_bound: bool,
}

impl<T: Real> Default for StepperConfig<T> {
    fn default() -> Self {
        Self {
            dt: None,
            cfl: T::lit(0.4),
            rho_floor: T::lit(1e-8),
            damping_bound: false,
        }
    }
}

impl<T: Real> StepperConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "dt = {dt} must be positive"
                )));
            }
        }
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "cfl = {} must lie in (0, 1]",
                self.cfl
            )));
        }
        if !(self.rho_floor > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "rho_floor = {} must be positive",
                self.rho_floor
            )));
        }
        Ok(())
    }
}

/// Deterministic tendencies plus the velocity gradient they were built from.
#[derive(Clone, Debug)]
pub struct Rhs<T> {
    pub drho: ScalarField<T>,
    pub dmom: VectorField<T>,
    pub grad_u: TensorField<T>,
}

/// Density floor activity during one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FloorEvent {
    pub cells: usize,
    pub mass_added: f64,
}

/// By-products of one stochastic step, evaluated at the pre-step state.
#[derive(Clone, Debug)]
pub struct StepOutput<T> {
    pub grad_u: TensorField<T>,
    /// `∫ Σ_k |G_k|²/ρ dx`.
    pub ito: T,
    /// `∫ u·G_k dx` per mode.
    pub u_dot_g: Vec<T>,
    /// `∫ G_k dx` per mode, component-wise.
    pub g_mean: Vec<[T; 2]>,
    pub dw: Vec<f64>,
    pub floor: FloorEvent,
}

/// Safety factor applied to the damping bound when choosing a step.
const DAMPING_SAFETY: f64 = 0.8;

#[derive(Clone, Debug)]
pub struct Dynamics<T: Real> {
    pub grid: Grid<T>,
    pub model: Model<T>,
    pub stepper: StepperConfig<T>,
}

impl<T: Real> Dynamics<T> {
    pub fn new(grid: Grid<T>, model: Model<T>, stepper: StepperConfig<T>) -> Result<Self> {
        stepper.validate()?;
        Ok(Self {
            grid,
            model,
            stepper,
        })
    }

    fn check_finite(what: &str, v: &[T]) -> Result<()> {
        if let Some(index) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: what.to_string(),
                index,
            });
        }
        Ok(())
    }

    /// `dρ = −div m`, `dm = −div(m⊗m/ρ) − ε⁻²∇p_δ(ρ) + div S(∇u)`,
    /// every divergence truncated to the 2/3-rule band.
    pub fn rhs(&self, s: &State<T>) -> Result<Rhs<T>> {
        let grid = &self.grid;
        let shape = grid.shape();
        let dim = shape.dim();
        let n = shape.len();
        let u = s.velocity();
        let grad_u = grid.vector_gradient_dealiased(&u)?;
        let law = self.model.effective_law();

        let mut flux = stress(&self.model.visc, &grad_u);
        for i in 0..dim {
            for j in 0..dim {
                let ui = s.mom.component(i);
                let uj = u.component(j);
                let f = flux.get_mut(i, j);
                for c in 0..n {
                    f[c] = ui[c] * uj[c] - f[c];
                }
            }
            let f = flux.get_mut(i, i);
            for (fc, &r) in f.iter_mut().zip(s.rho.values()) {
                *fc += law.p_delta(r);
            }
        }
        for c in flux.components() {
            Self::check_finite("momentum flux", c)?;
        }
        let mut dmom = grid.tensor_divergence_dealiased(&flux)?;
        dmom.scale(-T::one());
        let drho = grid.divergence_dealiased(&s.mom)?.map(|v| -v);
        Ok(Rhs { drho, dmom, grad_u })
    }

    /// Largest stable step for `s`.
    ///
    /// Advective-acoustic bound `cfl·h/max(|u| + c/ε)` and explicit
    /// diffusion bound `cfl·h²/(4(ν+λ))`. With `damping_bound` the diffusion
    /// bound is replaced by the explicit-Euler limits of the retained
    /// spectrum: `ν_L/s²` for damped acoustic modes, `2ν/(ν²k² + |u|²)` for
    /// advected shear modes and `2/(ν_max k²)` for pure diffusion.
    pub fn cfl_dt(&self, s: &State<T>) -> T {
        self.dt_limit(s, self.stepper.cfl, T::lit(DAMPING_SAFETY))
    }

    fn dt_limit(&self, s: &State<T>, cfl: T, damping_safety: T) -> T {
        let shape = self.grid.shape();
        let dim = shape.dim();
        let h = T::lit(shape.min_spacing());
        let law = &self.model.law;
        let eps = self.model.eps;
        let mut smax = T::zero();
        let mut umax = T::zero();
        for c in 0..shape.len() {
            let r = s.rho.values()[c];
            let q = s.mom.at(c);
            let speed = (0..dim).map(|d| q[d] * q[d]).sum::<T>().sqrt() / r;
            umax = umax.max(speed);
            smax = smax.max(speed + law.sound_speed(r) / eps);
        }
        let mut dt = if smax > T::zero() {
            cfl * h / smax
        } else {
            T::infinity()
        };
        let visc = &self.model.visc;
        if !self.stepper.damping_bound {
            if visc.is_viscous() {
                dt = dt.min(cfl * h * h / (T::lit(4.0) * (visc.nu() + visc.lambda())));
            }
            return dt;
        }
        let n = T::from_usize_lossy(dim);
        let nu_l = T::lit(2.0) * visc.nu() * (T::one() - T::one() / n) + visc.lambda();
        if !(nu_l > T::zero()) {
            return T::zero();
        }
        let kmax_sq: T = (0..dim)
            .map(|d| {
                let k = T::from_usize_lossy(shape.size(d) / 3);
                k * k
            })
            .sum();
        let two = T::lit(2.0);
        let mut bound = if smax > T::zero() {
            nu_l / (smax * smax)
        } else {
            T::infinity()
        };
        let mut nu_max = nu_l;
        if dim > 1 {
            let nu = visc.nu();
            nu_max = nu_max.max(nu);
            bound = bound.min(two * nu / (nu * nu * kmax_sq + umax * umax));
        }
        bound = bound.min(two / (nu_max * kmax_sq));
        dt.min(damping_safety * bound)
    }

    /// The hard limit (`cfl = 1`, no damping safety) used to reject steps.
    pub fn stability_limit(&self, s: &State<T>) -> T {
        self.dt_limit(s, T::one(), T::one())
    }

    /// Fixed step size for a run starting at `s`, rounded down to a
    /// power-of-two multiple of `base_dt` when one is given.
    pub fn choose_dt(&self, s: &State<T>, base_dt: Option<f64>) -> Result<T> {
        let raw = match self.stepper.dt {
            Some(dt) => dt,
            None => self.cfl_dt(s),
        };
        if !(raw > T::zero()) || !raw.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "no admissible time step (limit {raw})"
            )));
        }
        match base_dt {
            None => Ok(raw),
            Some(base) => {
                let mut dt = base;
                if dt > raw.as_f64() {
                    return Err(Error::CflViolation {
                        dt,
                        limit: raw.as_f64(),
                    });
                }
                while 2.0 * dt <= raw.as_f64() {
                    dt *= 2.0;
                }
                Ok(T::lit(dt))
            }
        }
    }

    /// One Euler–Maruyama step with the given Wiener increments. With
    /// `freeze_drift` only the noise acts.
    pub fn step_with_increments(
        &self,
        s: &State<T>,
        dw: &[f64],
        dt: T,
        freeze_drift: bool,
    ) -> Result<(State<T>, StepOutput<T>)> {
        if !freeze_drift {
            let limit = self.stability_limit(s);
            if dt > limit {
                return Err(Error::CflViolation {
                    dt: dt.as_f64(),
                    limit: limit.as_f64(),
                });
            }
        }
        let shape = self.grid.shape();
        let dim = shape.dim();
        let n = shape.len();
        let noise = &self.model.noise;
        let modes = noise.modes();
        if dw.len() != modes {
            return Err(Error::ShapeMismatch {
                expected: format!("{modes} Wiener increments"),
                found: dw.len().to_string(),
            });
        }

        let (mut rho, mut mom, grad_u) = if freeze_drift {
            (s.rho.clone(), s.mom.clone(), TensorField::zeros(shape))
        } else {
            let r = self.rhs(s)?;
            let mut rho = s.rho.clone();
            rho.add_scaled(dt, &r.drho);
            let mut mom = s.mom.clone();
            mom.add_scaled(dt, &r.dmom);
            (rho, mom, r.grad_u)
        };

        let floor = self.stepper.rho_floor;
        let cell_vol = T::lit(shape.cell_volume());
        let mut ito = T::zero();
        let mut u_dot_g = vec![T::zero(); modes];
        let mut g_mean = vec![[T::zero(); 2]; modes];
        if modes > 0 {
            let dws: Vec<T> = dw.iter().map(|&w| T::lit(w)).collect();
            for c in 0..n {
                let r = s.rho.values()[c];
                let q = s.mom.at(c);
                ito += noise.ito_point(c, dim, r, q, floor);
                for k in 0..modes {
                    let g = noise.g_point(k, c, dim, r, q);
                    let mut ug = T::zero();
                    for d in 0..dim {
                        mom.component_mut(d)[c] += g[d] * dws[k];
                        ug += q[d] / r * g[d];
                        g_mean[k][d] += g[d];
                    }
                    u_dot_g[k] += ug;
                }
            }
            ito *= cell_vol;
            for k in 0..modes {
                u_dot_g[k] *= cell_vol;
                for d in 0..dim {
                    g_mean[k][d] *= cell_vol;
                }
            }
        }

        let mut event = FloorEvent::default();
        for r in rho.values_mut() {
            if *r < floor {
                event.cells += 1;
                event.mass_added += (floor - *r).as_f64() * shape.cell_volume();
                *r = floor;
            }
        }
        if event.cells > 0 {
            log::warn!(
                "t = {}: density floor active in {} cells, mass added {:e}",
                s.time,
                event.cells,
                event.mass_added
            );
        }
        Self::check_finite("density", rho.values())?;
        for d in 0..dim {
            Self::check_finite("momentum", mom.component(d))?;
        }
        let next = State {
            rho,
            mom,
            time: s.time + dt,
        };
        Ok((
            next,
            StepOutput {
                grad_u,
                ito,
                u_dot_g,
                g_mean,
                dw: dw.to_vec(),
                floor: event,
            },
        ))
    }

    /// Step `step` of size `dt` driven by `path`.
    pub fn step_em(
        &self,
        s: &State<T>,
        path: &WienerPath,
        step: u64,
        dt: T,
    ) -> Result<(State<T>, StepOutput<T>)> {
        let dw = path.sample_increments(step, dt.as_f64(), self.model.noise.modes())?;
        self.step_with_increments(s, &dw, dt, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dynamics(sizes: &[usize], nu: f64, lambda: f64, eps: f64) -> Dynamics<f64> {
        let grid = Grid::new(sizes).unwrap();
        let model = Model::new(
            PressureLaw::new(1.0, 2.0).unwrap(),
            if nu > 0.0 {
                Viscosity::new(nu, lambda).unwrap()
            } else {
                Viscosity::inviscid()
            },
            NoiseModel::none(),
            eps,
        )
        .unwrap();
        Dynamics::new(grid, model, StepperConfig::default()).unwrap()
    }

    #[test]
    fn equilibrium_has_zero_tendency() {
        let dy = dynamics(&[16, 16], 0.1, 0.1, 1.0);
        let s = State::rest(&dy.grid, 1.0);
        let r = dy.rhs(&s).unwrap();
        assert_eq!(r.drho.max_abs(), 0.0);
        assert!(r.dmom.max_abs() < 1e-14);
    }

    #[test]
    fn density_bump_gives_pure_acoustic_forcing() {
        let dy = dynamics(&[64], 0.0, 0.0, 0.5);
        let rho = ScalarField::from_fn(dy.grid.shape(), |x| 1.0 + 0.1 * x[0].sin());
        let s = State::new(rho.clone(), VectorField::zeros(dy.grid.shape()), 0.0).unwrap();
        let r = dy.rhs(&s).unwrap();
        assert_eq!(r.drho.max_abs(), 0.0);
        let p = rho.map(|v| 4.0 * v * v);
        let expect = dy.grid.gradient_dealiased(&p).unwrap();
        for c in 0..64 {
            assert!((r.dmom.component(0)[c] + expect.component(0)[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn cfl_examples() {
        let dy = dynamics(&[64], 0.0, 0.0, 1.0);
        let s = State::rest(&dy.grid, 1.0);
        let h = 2.0 * std::f64::consts::PI / 64.0;
        assert!((dy.cfl_dt(&s) - 0.4 * h / 2f64.sqrt()).abs() < 1e-15);
        let half = dynamics(&[64], 0.0, 0.0, 0.5);
        assert!((half.cfl_dt(&s) - 0.5 * dy.cfl_dt(&s)).abs() < 1e-15);
        let thick = dynamics(&[64], 10.0, 0.0, 1.0);
        assert!((thick.cfl_dt(&s) - 0.4 * h * h / 40.0).abs() < 1e-15);
    }

    #[test]
    fn damping_bound_example() {
        let mut dy = dynamics(&[64, 64], 1.0 / 64.0, 1.0 / 64.0, 0.125);
        dy.stepper.damping_bound = true;
        let s = State::rest(&dy.grid, 1.0);
        let acoustic = (1.0 / 32.0) / 128.0;
        assert!((dy.cfl_dt(&s) - 0.8 * acoustic).abs() < 1e-15);
        assert!((dy.stability_limit(&s) - acoustic).abs() < 1e-15);
    }

    #[test]
    fn choose_dt_rounds_to_base_multiples() {
        let dy = dynamics(&[64], 0.0, 0.0, 1.0);
        let s = State::rest(&dy.grid, 1.0);
        let dt = dy.choose_dt(&s, Some(1e-4)).unwrap();
        let ratio = dt / 1e-4;
        assert!((ratio - ratio.round()).abs() < 1e-9 && (ratio.round() as u64).is_power_of_two());
        assert!(dt <= dy.cfl_dt(&s) && 2.0 * dt > dy.cfl_dt(&s));
    }

    #[test]
    fn oversized_step_is_rejected() {
        let dy = dynamics(&[32], 0.0, 0.0, 1.0);
        let s = State::rest(&dy.grid, 1.0);
        assert!(matches!(
            dy.step_with_increments(&s, &[], 1.0, false),
            Err(Error::CflViolation { .. })
        ));
    }
}
