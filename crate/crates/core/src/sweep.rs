//! Low Mach, vanishing viscosity sweep: compressible ensembles at a
//! sequence of Mach numbers against a shared incompressible reference.

use rayon::prelude::*;

use crate::constitutive::{PressureLaw, Viscosity};
use crate::dynamics::{Dynamics, Model, State, StepperConfig};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::euler::{gradient_norm, stopping_time_tau_m, EulerSolver};
use crate::field::{Grid, ScalarField, VectorField};
use crate::ledger::{run_ensemble, RunObserver, RunPlan};
use crate::noise::{NoiseModel, WienerPath};
use crate::relative::relative_energy;
use crate::scalar::Real;
use crate::stats::{linear_fit, mean_se};

/// `coef·ε^power`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaling {
    pub coef: f64,
    pub power: f64,
}

impl Scaling {
    pub const fn new(coef: f64, power: f64) -> Self {
        Self { coef, power }
    }

    pub fn eval(&self, eps: f64) -> f64 {
        self.coef * eps.powf(self.power)
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig<T> {
    pub eps: Vec<f64>,
    pub nu: Scaling,
    pub lambda: Scaling,
    pub delta_data: Scaling,
    pub law: PressureLaw<T>,
    pub noise: NoiseModel<T>,
    pub sizes: Vec<usize>,
    pub t_end: f64,
    /// Number of sampling intervals on `[0, t_end]`.
    pub samples: usize,
    pub grad_threshold: f64,
    pub paths: usize,
    pub replicas: usize,
    pub seed: u64,
    pub cfl: f64,
    pub rho_floor: f64,
    /// Taylor–Green amplitude of the reference data.
    pub v0_amp: f64,
}

impl<T: Real> SweepConfig<T> {
    pub fn new(law: PressureLaw<T>, noise: NoiseModel<T>) -> Self {
        Self {
            eps: (0..6).map(|j| 0.5f64.powi(j)).collect(),
            nu: Scaling::new(1.0, 2.0),
            lambda: Scaling::new(1.0, 2.0),
            delta_data: Scaling::new(1.0, 1.0),
            law,
            noise,
            sizes: vec![64, 64],
            t_end: 0.5,
            samples: 8,
            grad_threshold: 2.0,
            paths: 16,
            replicas: 4,
            seed: 0,
            cfl: 0.4,
            rho_floor: 1e-8,
            v0_amp: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() || self.eps.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::InvalidParameter(
                "eps schedule must be nonempty and positive".into(),
            ));
        }
        for &e in &self.eps {
            if !(self.nu.eval(e) > 0.0) || !(self.lambda.eval(e) >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "viscosities at eps = {e} must satisfy nu > 0, lambda >= 0"
                )));
            }
        }
        if self.nu.power <= 0.0 || self.lambda.power < 0.0 || self.delta_data.power <= 0.0 {
            return Err(Error::InvalidParameter(
                "nu, lambda and delta_data must vanish as eps -> 0".into(),
            ));
        }
        if self.sizes.len() != 2 {
            return Err(Error::InvalidParameter(
                "the sweep runs on a 2D grid".into(),
            ));
        }
        if self.samples == 0 || !(self.t_end > 0.0) {
            return Err(Error::InvalidParameter(
                "t_end and samples must be positive".into(),
            ));
        }
        if self.paths == 0 || self.replicas == 0 {
            return Err(Error::InvalidParameter(
                "paths and replicas must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Default perturbation shapes: a single low Fourier mode each, phase
/// shifted per replica. `η` has amplitude ½ so that `ε = δ = 1` keeps
/// `ρ₀ ≥ ½`.
pub fn low_mode_shapes<T: Real>(grid: &Grid<T>, phase: f64) -> (ScalarField<T>, VectorField<T>) {
    let last = grid.dim() - 1;
    let eta = ScalarField::from_fn(grid.shape(), |x| 0.5 * (x[0] + phase).sin());
    let zeta = VectorField::from_fn(grid.shape(), |x, out| {
        out.iter_mut().for_each(|o| *o = 0.0);
        out[0] = (x[last] + phase).cos();
    });
    (eta, zeta)
}

/// `ρ₀ = 1 + ε δ η`, `m₀ = v₀ + δ ζ`.
pub fn well_prepared_data<T: Real>(
    grid: &Grid<T>,
    eps: f64,
    v0: &VectorField<T>,
    delta: f64,
    eta: &ScalarField<T>,
    zeta: &VectorField<T>,
) -> Result<State<T>> {
    let div = grid.divergence(v0)?.max_abs().as_f64();
    if div > 1e-10 * (1.0 + v0.max_abs().as_f64()) {
        return Err(Error::InvalidParameter(format!(
            "initial velocity is not solenoidal (max |div v0| = {div:e})"
        )));
    }
    if eta.max_abs().as_f64() > 1.0 || zeta.max_abs().as_f64() > 1.0 {
        return Err(Error::InvalidParameter(
            "perturbation shapes must satisfy |.| <= 1".into(),
        ));
    }
    let rho = eta.map(|e| T::one() + T::lit(eps * delta) * e);
    let mut mom = v0.clone();
    if delta != 0.0 {
        mom.add_scaled(T::lit(delta), zeta);
    }
    State::new(rho, mom, T::zero())
}

#[derive(Clone, Debug, Default)]
pub struct RateReport {
    pub eps: Vec<f64>,
    pub times: Vec<f64>,
    /// `E[E^ε_mv(t ∧ τ_M)]` indexed `[ε][t]`.
    pub emv_mean: Vec<Vec<f64>>,
    pub emv_se: Vec<Vec<f64>>,
    /// Path mean of `sup_t D^ε(t)` and its standard error.
    pub d_sup: Vec<f64>,
    pub d_sup_se: Vec<f64>,
    /// Earliest `τ_M` over the paths.
    pub tau_m: f64,
    pub dt: Vec<f64>,
    pub gamma: f64,
}

impl RateReport {
    /// `E[E^ε_mv(T ∧ τ_M)]` per ε.
    pub fn final_values(&self) -> Vec<f64> {
        self.emv_mean
            .iter()
            .map(|v| *v.last().unwrap_or(&f64::NAN))
            .collect()
    }

    pub fn fit(&self) -> Result<RateFit> {
        fit_rate(&self.eps, &self.final_values(), self.gamma)
    }

    /// `sup_t D^ε` non-increasing along decreasing ε, within `k` combined
    /// standard errors.
    pub fn defect_non_increasing(&self, k: f64) -> bool {
        let order = descending(&self.eps);
        order.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            let tol = k * (self.d_sup_se[a].powi(2) + self.d_sup_se[b].powi(2)).sqrt();
            self.d_sup[b] <= self.d_sup[a] + tol
        })
    }

    /// Columns `eps, t, Emv_mean, Emv_se, D_sup, tau_M`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,t,Emv_mean,Emv_se,D_sup,tau_M\n");
        for (i, &e) in self.eps.iter().enumerate() {
            for (j, &t) in self.times.iter().enumerate() {
                s.push_str(&format!(
                    "{e:e},{t:e},{:e},{:e},{:e},{:e}\n",
                    self.emv_mean[i][j], self.emv_se[i][j], self.d_sup[i], self.tau_m
                ));
            }
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub envelope: f64,
    pub monotone: bool,
    pub pass: bool,
}

fn descending(eps: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..eps.len()).collect();
    order.sort_by(|&a, &b| eps[b].total_cmp(&eps[a]));
    order
}

/// Log-log slope of `values` against `eps`, compared with the envelope
/// exponent `min(2/γ_*, 1)`, `γ_* = min(γ, 2)`.
pub fn fit_rate(eps: &[f64], values: &[f64], gamma: f64) -> Result<RateFit> {
    if eps.len() < 3 || eps.len() != values.len() {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least 3 eps points, got {}",
            eps.len().min(values.len())
        )));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter(
            "rate fit needs positive values".into(),
        ));
    }
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (slope, _) = linear_fit(&lx, &ly)?;
    let gamma_star = gamma.min(2.0);
    let envelope = (2.0 / gamma_star).min(1.0);
    let order = descending(eps);
    let monotone = order.windows(2).all(|w| values[w[1]] < values[w[0]]);
    Ok(RateFit {
        slope,
        envelope,
        monotone,
        pass: monotone && slope >= 0.5 * envelope,
    })
}

/// Sampling intervals are split into a multiple of this many base steps, so
/// every ε can coarsen its step by up to this factor.
const STEP_LEVELS: u64 = 16;

/// Steps per sampling interval and step size: the coarsest `base_dt·2^j`
/// within `limit` that divides the interval.
fn coarsest_step(n_base: u64, base_dt: f64, limit: f64) -> (u64, f64) {
    let mut per = n_base;
    let mut dt = base_dt;
    while per % 2 == 0 && 2.0 * dt <= limit {
        per /= 2;
        dt *= 2.0;
    }
    (per, dt)
}

struct Reference<T> {
    v: Vec<VectorField<T>>,
    tau: f64,
}

fn euler_reference<T: Real>(
    grid: &Grid<T>,
    noise: &NoiseModel<T>,
    v0: &VectorField<T>,
    path: &WienerPath,
    n_base: u64,
    base_dt: f64,
    samples: usize,
    threshold: f64,
    t_end: f64,
) -> Result<Reference<T>> {
    let solver = EulerSolver::new(grid.clone(), noise.clone())?;
    let mut s = solver.initial(v0.clone())?;
    let (per, dt) = coarsest_step(n_base, base_dt, solver.cfl_dt(&s).as_f64());
    let mut v = vec![s.v.clone()];
    let mut series = vec![(0.0, gradient_norm(grid, &s.v)?)];
    let mut step = 0u64;
    for i in 1..=samples {
        for _ in 0..per {
            s = solver.step_em(&s, path, step, T::lit(dt))?;
            step += 1;
        }
        series.push((i as f64 * per as f64 * dt, gradient_norm(grid, &s.v)?));
        v.push(s.v.clone());
    }
    Ok(Reference {
        v,
        tau: stopping_time_tau_m(&series, threshold, t_end),
    })
}

struct SweepObserver<'a, T> {
    refs: &'a [Reference<T>],
    law: PressureLaw<T>,
    ones: ScalarField<T>,
    emv: Vec<Vec<f64>>,
    defect: Vec<Vec<f64>>,
}

impl<T: Real> RunObserver<T> for SweepObserver<'_, T> {
    fn sample(&mut self, _index: usize, _t: f64, ens: &Ensemble<T>) -> Result<()> {
        let index = self.emv[0].len();
        let rows: Vec<(f64, f64)> = (0..ens.paths)
            .into_par_iter()
            .map(|p| {
                let ym = ens.young_measure(p);
                let (_, d) = ym.dissipation_defect(&self.law)?;
                let e = relative_energy(&ym, d, &self.ones, &self.refs[p].v[index], &self.law)?;
                Ok((e.as_f64(), d.as_f64()))
            })
            .collect::<Result<_>>()?;
        for (p, (e, d)) in rows.into_iter().enumerate() {
            self.emv[p].push(e);
            self.defect[p].push(d);
        }
        Ok(())
    }
}

/// Runs the compressible ensemble for every ε on Wiener paths shared with
/// each other and with the incompressible reference.
pub fn run_sweep<T: Real>(cfg: &SweepConfig<T>) -> Result<RateReport> {
    cfg.validate()?;
    let grid = Grid::<T>::new(&cfg.sizes)?;
    let v0 = crate::init::taylor_green(&grid, cfg.v0_amp)?;
    let interval = cfg.t_end / cfg.samples as f64;
    let times: Vec<f64> = (0..=cfg.samples).map(|i| i as f64 * interval).collect();

    let build = |eps: f64| -> Result<(Dynamics<T>, Vec<State<T>>)> {
        let visc = Viscosity::new(T::lit(cfg.nu.eval(eps)), T::lit(cfg.lambda.eval(eps)))?;
        let model = Model::new(cfg.law, visc, cfg.noise.clone(), T::lit(eps))?;
        let stepper = StepperConfig {
            dt: None,
            cfl: T::lit(cfg.cfl),
            rho_floor: T::lit(cfg.rho_floor),
            damping_bound: true,
        };
        let dy = Dynamics::new(grid.clone(), model, stepper)?;
        let delta = cfg.delta_data.eval(eps);
        let mut members = Vec::with_capacity(cfg.paths * cfg.replicas);
        for _ in 0..cfg.paths {
            for j in 0..cfg.replicas {
                let phase = std::f64::consts::TAU * j as f64 / cfg.replicas as f64;
                let (eta, zeta) = low_mode_shapes(&grid, phase);
                members.push(well_prepared_data(&grid, eps, &v0, delta, &eta, &zeta)?);
            }
        }
        Ok((dy, members))
    };

    let mut setups = Vec::with_capacity(cfg.eps.len());
    let mut min_limit = interval;
    for &eps in &cfg.eps {
        let (dy, members) = build(eps)?;
        let limit = members
            .iter()
            .map(|m| dy.cfl_dt(m).as_f64())
            .fold(f64::INFINITY, f64::min);
        if !(limit > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "no admissible time step at eps = {eps}"
            )));
        }
        min_limit = min_limit.min(limit);
        setups.push((eps, dy, members, limit));
    }
    let n_base = ((interval / min_limit).ceil() as u64).div_ceil(STEP_LEVELS) * STEP_LEVELS;
    let base_dt = interval / n_base as f64;
    let refs: Vec<Reference<T>> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let path = WienerPath::new(cfg.seed, p as u64, base_dt)?;
            euler_reference(
                &grid,
                &cfg.noise,
                &v0,
                &path,
                n_base,
                base_dt,
                cfg.samples,
                cfg.grad_threshold,
                cfg.t_end,
            )
        })
        .collect::<Result<_>>()?;
    let tau_idx: Vec<usize> = refs
        .iter()
        .map(|r| times.iter().rposition(|&t| t <= r.tau + 1e-12).unwrap_or(0))
        .collect();

    let mut report = RateReport {
        eps: cfg.eps.clone(),
        times: times.clone(),
        tau_m: refs.iter().map(|r| r.tau).fold(f64::INFINITY, f64::min),
        gamma: cfg.law.gamma().as_f64(),
        ..Default::default()
    };
    for (eps, dy, members, limit) in setups {
        let (per, dt) = coarsest_step(n_base, base_dt, limit);
        let plan = RunPlan {
            dt,
            base_dt,
            steps: per * cfg.samples as u64,
            sample_every: per,
        };
        log::info!("sweep eps = {eps}: dt = {dt:e}, {} steps", plan.steps);
        let ens = Ensemble::new(members, cfg.paths, cfg.replicas, cfg.seed)?;
        let mut obs = SweepObserver {
            refs: &refs,
            law: dy.model.effective_law(),
            ones: ScalarField::constant(grid.shape(), T::one()),
            emv: vec![Vec::new(); cfg.paths],
            defect: vec![Vec::new(); cfg.paths],
        };
        run_ensemble(&dy, ens, &plan, &mut obs).map_err(|e| match e {
            Error::BlowUp { time, reason } => Error::BlowUp {
                time,
                reason: format!(
                    "{reason}; eps = {eps} ran with dt = {dt:e}, a smaller step is required"
                ),
            },
            other => other,
        })?;

        let mut mean = Vec::with_capacity(times.len());
        let mut se = Vec::with_capacity(times.len());
        for i in 0..times.len() {
            let col: Vec<f64> = (0..cfg.paths)
                .map(|p| obs.emv[p][i.min(tau_idx[p])])
                .collect();
            let (m, s) = mean_se(&col);
            mean.push(m);
            se.push(s);
        }
        let sups: Vec<f64> = (0..cfg.paths)
            .map(|p| {
                obs.defect[p][..=tau_idx[p]]
                    .iter()
                    .copied()
                    .fold(0.0, f64::max)
            })
            .collect();
        let (dm, ds) = mean_se(&sups);
        report.emv_mean.push(mean);
        report.emv_se.push(se);
        report.d_sup.push(dm);
        report.d_sup_se.push(ds);
        report.dt.push(dt);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_rates() {
        let eps = [1.0, 0.5, 0.25, 0.125];
        let lin: Vec<f64> = eps.to_vec();
        let quad: Vec<f64> = eps.iter().map(|e| e * e).collect();
        let f = fit_rate(&eps, &lin, 2.0).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && f.monotone && f.pass);
        assert_eq!(f.envelope, 1.0);
        let f = fit_rate(&eps, &quad, 2.0).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!(fit_rate(&eps[..2], &lin[..2], 2.0).is_err());
        let flat = [1.0, 1.0, 1.0, 1.0];
        assert!(!fit_rate(&eps, &flat, 2.0).unwrap().pass);
        assert_eq!(fit_rate(&eps, &lin, 3.0).unwrap().envelope, 1.0);
    }

    #[test]
    fn data_bounds() {
        let grid = Grid::<f64>::new(&[16, 16]).unwrap();
        let v0 = crate::init::taylor_green(&grid, 1.0).unwrap();
        let (eta, zeta) = low_mode_shapes(&grid, 0.0);
        let s = well_prepared_data(&grid, 0.25, &v0, 0.0, &eta, &zeta).unwrap();
        assert!(s.rho.values().iter().all(|&r| r == 1.0));
        assert_eq!(s.mom.components(), v0.components());
        let s = well_prepared_data(&grid, 0.25, &v0, 0.25, &eta, &zeta).unwrap();
        assert!(s.rho.min() >= 1.0 - 1.0 / 16.0 && s.rho.max() <= 1.0 + 1.0 / 16.0);
        let eta1 = ScalarField::from_fn(grid.shape(), |x| x[0].sin());
        let s1 = well_prepared_data(&grid, 0.25, &v0, 0.25, &eta1, &zeta).unwrap();
        assert!((s1.rho.max() - 1.0 - 1.0 / 16.0).abs() < 1e-3);
        let mut d = s.mom.clone();
        d.add_scaled(-1.0, &v0);
        assert!(d.max_abs() <= 0.25 + 1e-15);
        assert!(s.rho.map(|r| (r - 1.0).abs() / 0.25).max() <= 0.25 + 1e-15);
    }

    #[test]
    fn compressible_initial_velocity_rejected() {
        let grid = Grid::<f64>::new(&[16, 16]).unwrap();
        let v = VectorField::from_fn(grid.shape(), |x, o| {
            o[0] = x[0].sin();
            o[1] = 0.0;
        });
        let (eta, zeta) = low_mode_shapes(&grid, 0.0);
        assert!(well_prepared_data(&grid, 1.0, &v, 0.1, &eta, &zeta).is_err());
    }
}
