//! Relative energy between a Young measure and a smooth reference pair
//! `(r, U)`, its remainder, and the weak–strong comparison experiment.

use rayon::prelude::*;

use crate::constitutive::{stress, PressureLaw, Viscosity};
use crate::dynamics::{Dynamics, Model, State, StepperConfig};
use crate::ensemble::YoungMeasure;
use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, VectorField};
use crate::init::InitSpec;
use crate::noise::{NoiseModel, WienerPath};
use crate::scalar::Real;
use crate::stats;

/// Drift and diffusion parts of `dr = D^d r dt + D^s r dW` and likewise for
/// `U`. Diffusion parts are per noise mode.
#[derive(Clone, Debug, Default)]
pub struct Decomposition<T> {
    pub drift_r: Option<ScalarField<T>>,
    pub drift_u: Option<VectorField<T>>,
    pub diff_r: Option<Vec<ScalarField<T>>>,
    pub diff_u: Option<Vec<VectorField<T>>>,
}

#[derive(Clone, Debug)]
pub struct ReferencePair<T> {
    pub r: ScalarField<T>,
    pub u: VectorField<T>,
    pub dec: Decomposition<T>,
}

impl<T: Real> ReferencePair<T> {
    pub fn new(r: ScalarField<T>, u: VectorField<T>) -> Result<Self> {
        if r.shape() != u.shape() {
            return Err(Error::ShapeMismatch {
                expected: r.shape().to_string(),
                found: u.shape().to_string(),
            });
        }
        check_reference_density(&r)?;
        Ok(Self {
            r,
            u,
            dec: Decomposition::default(),
        })
    }

    pub fn with_decomposition(mut self, dec: Decomposition<T>) -> Self {
        self.dec = dec;
        self
    }

    /// `(min r, max r)`.
    pub fn bounds(&self) -> (T, T) {
        (self.r.min(), self.r.max())
    }

    /// Reference built from a realisation of the compressible system:
    /// `r = ρ`, `U = m/ρ`, `D^d r = −div m`, `D^s r = 0`,
    /// `D^d U = (D^d m − U D^d r)/ρ`, `D^s U(e_k) = G_k(ρ, m)/ρ`.
    pub fn from_compressible(dy: &Dynamics<T>, s: &State<T>) -> Result<Self> {
        let rhs = dy.rhs(s)?;
        let mut pair = Self::diffusion_only(&dy.model.noise, s)?;
        let u = &pair.u;
        let mut du = rhs.dmom.clone();
        for d in 0..u.dim() {
            let c = du.component_mut(d);
            for i in 0..c.len() {
                c[i] = (c[i] - u.component(d)[i] * rhs.drho.values()[i]) / s.rho.values()[i];
            }
        }
        pair.dec.drift_r = Some(rhs.drho);
        pair.dec.drift_u = Some(du);
        Ok(pair)
    }

    /// As [`ReferencePair::from_compressible`] without the drift parts.
    pub fn diffusion_only(noise: &NoiseModel<T>, s: &State<T>) -> Result<Self> {
        let mut pair = Self::new(s.rho.clone(), s.velocity())?;
        let shape = s.rho.shape();
        let diff_u = (0..noise.modes())
            .map(|k| {
                let g = noise.apply_g(&s.rho, &s.mom, k)?;
                Ok(g.div_by(&s.rho))
            })
            .collect::<Result<Vec<_>>>()?;
        pair.dec.diff_r = Some(vec![ScalarField::zeros(shape); noise.modes()]);
        pair.dec.diff_u = Some(diff_u);
        Ok(pair)
    }
}

fn check_reference_density<T: Real>(r: &ScalarField<T>) -> Result<()> {
    if let Some(c) = r.values().iter().position(|&v| !(v > T::zero())) {
        return Err(Error::Domain {
            what: "reference density",
            value: r.values()[c].as_f64(),
            domain: "r > 0",
        });
    }
    Ok(())
}

/// Five-term form
/// `∫⟨ν; ½|m|²/ρ + P(ρ)⟩ + D − ∫⟨ν;m⟩·U + ½∫⟨ν;ρ⟩|U|² − ∫⟨ν;ρ⟩P′(r) + ∫P′(r)r − P(r)`.
pub fn relative_energy<T: Real>(
    ym: &YoungMeasure<'_, T>,
    defect: T,
    r: &ScalarField<T>,
    u: &VectorField<T>,
    law: &PressureLaw<T>,
) -> Result<T> {
    check_reference_density(r)?;
    let shape = ym.shape();
    let dim = shape.dim();
    let w = T::one() / T::from_usize_lossy(ym.n_atoms());
    let mut acc = T::zero();
    for cell in 0..shape.len() {
        let rc = r.values()[cell];
        let uc = u.at(cell);
        let uu: T = (0..dim).map(|d| uc[d] * uc[d]).sum();
        let mut mean = T::zero();
        for a in ym.atoms() {
            let rho = a.rho.values()[cell];
            let m = a.mom.at(cell);
            let mm: T = (0..dim).map(|d| m[d] * m[d]).sum();
            let kin = if mm == T::zero() {
                T::zero()
            } else {
                T::lit(0.5) * mm / rho
            };
            let mu: T = (0..dim).map(|d| m[d] * uc[d]).sum();
            mean += kin + law.pot(rho) - mu + T::lit(0.5) * rho * uu - rho * law.dpot(rc);
        }
        acc += mean * w + law.dpot(rc) * rc - law.pot(rc);
    }
    Ok(acc * T::lit(shape.cell_volume()) + defect)
}

/// `∫⟨ν; ½ρ|u − U|² + H(ρ, r)⟩ dx + D`.
pub fn relative_energy_regrouped<T: Real>(
    ym: &YoungMeasure<'_, T>,
    defect: T,
    r: &ScalarField<T>,
    u: &VectorField<T>,
    law: &PressureLaw<T>,
) -> Result<T> {
    check_reference_density(r)?;
    let shape = ym.shape();
    let dim = shape.dim();
    let w = T::one() / T::from_usize_lossy(ym.n_atoms());
    let mut acc = T::zero();
    for cell in 0..shape.len() {
        let rc = r.values()[cell];
        let uc = u.at(cell);
        for a in ym.atoms() {
            let rho = a.rho.values()[cell];
            let m = a.mom.at(cell);
            let kin = if rho > T::zero() {
                let s: T = (0..dim).map(|d| (m[d] / rho - uc[d]).powi(2)).sum();
                T::lit(0.5) * rho * s
            } else {
                T::zero()
            };
            acc += (kin + law.h(rho, rc)) * w;
        }
    }
    Ok(acc * T::lit(shape.cell_volume()) + defect)
}

pub const REMAINDER_TERMS: usize = 9;

/// The nine remainder contributions, in display order:
/// viscous, velocity drift, convective, pressure potential, pressure
/// divergence, noise mismatch, momentum defect, energy defect, and the
/// second-order density noise correction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Remainder {
    pub terms: [f64; REMAINDER_TERMS],
}

impl Remainder {
    pub fn total(&self) -> f64 {
        self.terms.iter().sum()
    }
}

fn missing(term: &'static str, field: &'static str) -> Error {
    Error::MissingDecomposition { term, field }
}

/// Evaluates every remainder term at one time.
pub fn remainder<T: Real>(
    grid: &Grid<T>,
    ym: &YoungMeasure<'_, T>,
    pair: &ReferencePair<T>,
    law: &PressureLaw<T>,
    visc: &Viscosity<T>,
    noise: &NoiseModel<T>,
) -> Result<Remainder> {
    let drift_u = pair
        .dec
        .drift_u
        .as_ref()
        .ok_or_else(|| missing("velocity drift", "D^d U"))?;
    let drift_r = pair
        .dec
        .drift_r
        .as_ref()
        .ok_or_else(|| missing("pressure potential", "D^d r"))?;
    let diff_u = pair
        .dec
        .diff_u
        .as_ref()
        .ok_or_else(|| missing("noise mismatch", "D^s U"))?;
    let diff_r = pair
        .dec
        .diff_r
        .as_ref()
        .ok_or_else(|| missing("density noise correction", "D^s r"))?;
    if diff_u.len() != noise.modes() || diff_r.len() != noise.modes() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} diffusion modes", noise.modes()),
            found: format!("{} / {}", diff_u.len(), diff_r.len()),
        });
    }
    let shape = ym.shape();
    let dim = shape.dim();
    let n = shape.len();
    let vol = shape.cell_volume();
    let w = T::one() / T::from_usize_lossy(ym.n_atoms());
    let r = &pair.r;
    let u = &pair.u;

    let grad_u_ref = grid.vector_gradient(u)?;
    let s_ref = stress(visc, &grad_u_ref);
    let grad_mean_u = grid.vector_gradient(&ym.mean_velocity())?;
    let div_u = grad_u_ref.trace();
    let grad_dp = grid.gradient(&r.map(|v| law.dpot(v)))?;
    let (rho_bar, m_bar) = ym.barycentre();
    let mdef = ym.momentum_defect(law).total();

    let mut t = [0.0f64; REMAINDER_TERMS];
    for c in 0..n {
        let rc = r.values()[c];
        let uc = u.at(c);
        let gu = grad_u_ref.at(c);
        let sr = s_ref.at(c);
        let gm = grad_mean_u.at(c);
        let rb = rho_bar.values()[c];
        let mb = m_bar.at(c);

        let mut t1 = T::zero();
        for i in 0..dim {
            for j in 0..dim {
                t1 += sr[i][j] * (gu[i][j] - gm[i][j]);
            }
        }

        let mut t2 = T::zero();
        for i in 0..dim {
            let adv: T = (0..dim).map(|j| uc[j] * gu[i][j]).sum();
            t2 += (rb * uc[i] - mb[i]) * (drift_u.component(i)[c] + adv);
        }

        let mut t3 = T::zero();
        let mut p_mean = T::zero();
        let mut t6 = T::zero();
        for a in ym.atoms() {
            let rho = a.rho.values()[c];
            let m = a.mom.at(c);
            p_mean += law.p(rho) * w;
            if rho > T::zero() {
                let mut dev = [T::zero(); 2];
                for i in 0..dim {
                    dev[i] = m[i] / rho - uc[i];
                }
                for i in 0..dim {
                    for j in 0..dim {
                        t3 -= rho * dev[i] * dev[j] * gu[i][j] * w;
                    }
                }
                for k in 0..noise.modes() {
                    let g = noise.g_point(k, c, dim, rho, m);
                    let mut s = T::zero();
                    for i in 0..dim {
                        let x = g[i] / rho - diff_u[k].component(i)[c];
                        s += x * x;
                    }
                    t6 += T::lit(0.5) * rho * s * w;
                }
            }
        }

        let mut t4 = (rc - rb) * law.d2pot(rc) * drift_r.values()[c];
        for i in 0..dim {
            t4 += grad_dp.component(i)[c] * (rc * uc[i] - mb[i]);
        }

        let t5 = (law.p(rc) - p_mean) * div_u.values()[c];

        let mut t7 = T::zero();
        for i in 0..dim {
            for j in 0..dim {
                t7 -= gu[i][j] * mdef.get(i, j)[c];
            }
        }

        let mut t9 = T::zero();
        for dr in diff_r {
            let x = dr.values()[c];
            t9 += T::lit(0.5) * (law.d2p(rc) - rb * law.d3pot(rc)) * x * x;
        }

        for (acc, v) in t
            .iter_mut()
            .zip([t1, t2, t3, t4, t5, t6, t7, T::zero(), t9])
        {
            *acc += v.as_f64() * vol;
        }
    }
    Ok(Remainder { terms: t })
}

/// Realised increment of the relative-energy martingale over one step.
pub fn martingale_increment<T: Real>(
    ym: &YoungMeasure<'_, T>,
    pair: &ReferencePair<T>,
    law: &PressureLaw<T>,
    noise: &NoiseModel<T>,
    dw: &[f64],
) -> Result<f64> {
    let diff_u = pair
        .dec
        .diff_u
        .as_ref()
        .ok_or_else(|| missing("martingale", "D^s U"))?;
    let diff_r = pair
        .dec
        .diff_r
        .as_ref()
        .ok_or_else(|| missing("martingale", "D^s r"))?;
    let shape = ym.shape();
    let dim = shape.dim();
    let w = T::one() / T::from_usize_lossy(ym.n_atoms());
    let (rho_bar, m_bar) = ym.barycentre();
    let mut total = 0.0;
    for k in 0..noise.modes() {
        let mut acc = T::zero();
        for c in 0..shape.len() {
            let uc = pair.u.at(c);
            let rc = pair.r.values()[c];
            let rb = rho_bar.values()[c];
            let mb = m_bar.at(c);
            let mut ug = T::zero();
            let mut gbar = [T::zero(); 2];
            for a in ym.atoms() {
                let rho = a.rho.values()[c];
                let m = a.mom.at(c);
                let g = noise.g_point(k, c, dim, rho, m);
                for i in 0..dim {
                    if rho > T::zero() {
                        ug += m[i] / rho * g[i] * w;
                    }
                    gbar[i] += g[i] * w;
                }
            }
            let mut v = ug;
            for i in 0..dim {
                let dsu = diff_u[k].component(i)[c];
                v += -gbar[i] * uc[i] - mb[i] * dsu + rb * uc[i] * dsu;
            }
            v += (rc - rb) * law.d2pot(rc) * diff_r[k].values()[c];
            acc += v;
        }
        total += (acc * T::lit(shape.cell_volume())).as_f64() * dw[k];
    }
    Ok(total)
}

/// `max_t [E(t) − (E(0) + bias)e^{ct}]`.
pub fn gronwall_check(times: &[f64], e: &[f64], c: f64, bias: f64) -> f64 {
    if e.is_empty() {
        return 0.0;
    }
    let e0 = e[0];
    times
        .iter()
        .zip(e)
        .map(|(&t, &v)| v - (e0 + bias) * (c * t).exp())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest `c` with `E(t) ≤ (E(0) + bias)e^{ct}` at every sample `t > 0`.
pub fn fit_gronwall(times: &[f64], e: &[f64], bias: f64) -> Result<f64> {
    let base = e.first().copied().unwrap_or(0.0) + bias;
    if !(base > 0.0) {
        return Err(Error::InsufficientData(
            "Grönwall fit needs E(0) + bias > 0".into(),
        ));
    }
    let mut c = f64::NEG_INFINITY;
    for (&t, &v) in times.iter().zip(e) {
        if t > 0.0 {
            c = c.max((v.max(1e-300) / base).ln() / t);
        }
    }
    if !c.is_finite() {
        return Err(Error::InsufficientData(
            "Grönwall fit needs samples with t > 0".into(),
        ));
    }
    Ok(c)
}

#[derive(Clone, Debug)]
pub struct WeakStrongConfig<T> {
    pub model: Model<T>,
    /// Coarse grid; the reference runs on `refine ×` this.
    pub sizes: Vec<usize>,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: u64,
    pub rho_floor: T,
    pub paths: usize,
    pub replicas: usize,
    pub seed: u64,
    /// Reference initial data; its `perturb` is applied to the members only.
    pub init: InitSpec,
    pub refine: usize,
    pub grad_threshold: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RelativeEnergyReport {
    pub times: Vec<f64>,
    /// `E_mv(t ∧ τ)` per path and sample.
    pub per_path: Vec<Vec<f64>>,
    pub emv_mean: Vec<f64>,
    pub emv_se: Vec<f64>,
    pub remainder_mean: Vec<Remainder>,
    /// Realised relative-energy martingale, ensemble mean.
    pub martingale_mean: Vec<f64>,
    /// Earliest stopping time over the paths.
    pub tau: f64,
    pub gronwall_c: f64,
    pub gronwall_bias: f64,
}

impl RelativeEnergyReport {
    pub fn gronwall_residuals(&self) -> Vec<f64> {
        let e0 = self.emv_mean.first().copied().unwrap_or(0.0);
        self.times
            .iter()
            .zip(&self.emv_mean)
            .map(|(&t, &v)| v - (e0 + self.gronwall_bias) * (self.gronwall_c * t).exp())
            .collect()
    }

    /// Columns `t, Emv_mean, Emv_se, remainder_term_1..9, gronwall_residual`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,Emv_mean,Emv_se");
        for i in 1..=REMAINDER_TERMS {
            s.push_str(&format!(",remainder_term_{i}"));
        }
        s.push_str(",gronwall_residual\n");
        let g = self.gronwall_residuals();
        for i in 0..self.times.len() {
            s.push_str(&format!(
                "{:e},{:e},{:e}",
                self.times[i], self.emv_mean[i], self.emv_se[i]
            ));
            for v in self.remainder_mean[i].terms {
                s.push_str(&format!(",{v:e}"));
            }
            s.push_str(&format!(",{:e}\n", g[i]));
        }
        s
    }

    /// Fits `c` against `bias` and stores both.
    pub fn fit(&mut self, bias: f64) -> Result<f64> {
        self.gronwall_bias = bias;
        self.gronwall_c = fit_gronwall(&self.times, &self.emv_mean, bias)?;
        Ok(self.gronwall_c)
    }
}

struct PathResult {
    emv: Vec<f64>,
    remainder: Vec<Remainder>,
    martingale: Vec<f64>,
    tau: f64,
}

fn max_entry<T: Real>(g: &crate::field::TensorField<T>) -> f64 {
    g.max_abs().as_f64()
}

/// Runs coarse ensemble members against a reference computed at `refine ×`
/// the resolution and half the step, on the same Wiener paths.
pub fn weak_strong_experiment<T: Real>(cfg: &WeakStrongConfig<T>) -> Result<RelativeEnergyReport> {
    if cfg.refine != 1 && cfg.refine != 2 {
        return Err(Error::InvalidParameter(format!(
            "refine = {} must be 1 or 2",
            cfg.refine
        )));
    }
    let coarse = Grid::<T>::new(&cfg.sizes)?;
    let fine = Grid::<T>::from_shape(coarse.shape().refined(cfg.refine)?)?;
    let stepper = |dt: f64| StepperConfig {
        dt: Some(T::lit(dt)),
        rho_floor: cfg.rho_floor,
        ..StepperConfig::default()
    };
    let dt_f = cfg.dt / cfg.refine as f64;
    let dy_c = Dynamics::new(coarse.clone(), cfg.model.clone(), stepper(cfg.dt))?;
    let dy_f = Dynamics::new(fine.clone(), cfg.model.clone(), stepper(dt_f))?;
    let steps = (cfg.t_end / cfg.dt).round() as u64;
    let plan = crate::ledger::RunPlan {
        dt: cfg.dt,
        base_dt: dt_f,
        steps,
        sample_every: cfg.sample_every,
    };
    let samples = plan.sample_steps();
    let ref_init = InitSpec {
        perturb: 0.0,
        ..cfg.init
    };
    let ref0 = ref_init.build(&fine, 0, 1)?;
    let restrict = |s: &State<T>| -> Result<State<T>> {
        if cfg.refine == 1 {
            return Ok(s.clone());
        }
        let rho = fine.resample(&s.rho, &coarse)?;
        let mom = fine.resample_vector(&s.mom, &coarse)?;
        State::new(rho, mom, s.time)
    };
    let coarse_ref0 = restrict(&ref0)?;
    let members0: Vec<State<T>> = (0..cfg.replicas)
        .map(|j| {
            if cfg.init.perturb == 0.0 {
                return Ok(coarse_ref0.clone());
            }
            let p = InitSpec {
                kind: crate::init::InitKind::Rest,
                perturb: cfg.init.perturb,
                ..cfg.init
            }
            .build(&coarse, j, cfg.replicas)?;
            let rho = coarse_ref0.rho.zip_map(&p.rho, |a, b| a * b);
            let mut mom = coarse_ref0.mom.clone();
            mom.add_scaled(T::one(), &p.mom);
            State::new(rho, mom, T::zero())
        })
        .collect::<Result<_>>()?;
    let law = cfg.model.law;
    let noise = &cfg.model.noise;
    let modes = noise.modes();

    let run_path = |p: usize| -> Result<PathResult> {
        let path = WienerPath::new(cfg.seed, p as u64, dt_f)?;
        let mut reference = ref0.clone();
        let mut members = members0.clone();
        let mut out = PathResult {
            emv: Vec::new(),
            remainder: Vec::new(),
            martingale: Vec::new(),
            tau: cfg.t_end,
        };
        let mut mart = 0.0;
        let mut stopped = false;
        let mut next = 0;
        for step in 0..=steps {
            let t = step as f64 * cfg.dt;
            let coarse_ref = restrict(&reference)?;
            if samples.get(next) == Some(&step) {
                next += 1;
                if !stopped {
                    let pair = ReferencePair::from_compressible(&dy_c, &coarse_ref)?;
                    let grad = coarse.vector_gradient(&pair.u)?;
                    if max_entry(&grad) > cfg.grad_threshold {
                        stopped = true;
                        out.tau = t;
                    }
                    let ym = YoungMeasure::build(members.iter().collect())?;
                    let (_, defect) = ym.dissipation_defect(&law)?;
                    let e = relative_energy(&ym, defect, &pair.r, &pair.u, &law)?;
                    out.emv.push(e.as_f64());
                    out.remainder.push(remainder(
                        &coarse,
                        &ym,
                        &pair,
                        &law,
                        &cfg.model.visc,
                        noise,
                    )?);
                    out.martingale.push(mart);
                } else {
                    let last = out.emv.len() - 1;
                    out.emv.push(out.emv[last]);
                    out.remainder.push(out.remainder[last]);
                    out.martingale.push(out.martingale[last]);
                }
            }
            if step == steps || stopped {
                if step == steps {
                    break;
                }
                // keep filling frozen samples without stepping
                continue;
            }
            let dw = path.sample_increments(step, cfg.dt, modes)?;
            if modes > 0 {
                let pair = ReferencePair::diffusion_only(noise, &coarse_ref)?;
                let ym = YoungMeasure::build(members.iter().collect())?;
                mart += martingale_increment(&ym, &pair, &law, noise, &dw)?;
            }
            for m in members.iter_mut() {
                *m = dy_c.step_with_increments(m, &dw, T::lit(cfg.dt), false)?.0;
            }
            for sub in 0..cfg.refine as u64 {
                let fstep = step * cfg.refine as u64 + sub;
                reference = dy_f.step_em(&reference, &path, fstep, T::lit(dt_f))?.0;
            }
        }
        Ok(out)
    };

    let results: Vec<PathResult> = (0..cfg.paths)
        .into_par_iter()
        .map(run_path)
        .collect::<Result<_>>()?;

    let n_samples = samples.len();
    let mut report = RelativeEnergyReport {
        times: samples.iter().map(|&s| s as f64 * cfg.dt).collect(),
        tau: results.iter().map(|r| r.tau).fold(cfg.t_end, f64::min),
        ..Default::default()
    };
    for i in 0..n_samples {
        let col: Vec<f64> = results.iter().map(|r| r.emv[i]).collect();
        let (m, se) = stats::mean_se(&col);
        report.emv_mean.push(m);
        report.emv_se.push(se);
        let mut rem = Remainder::default();
        for r in &results {
            for (a, b) in rem.terms.iter_mut().zip(r.remainder[i].terms) {
                *a += b / results.len() as f64;
            }
        }
        report.remainder_mean.push(rem);
        report
            .martingale_mean
            .push(results.iter().map(|r| r.martingale[i]).sum::<f64>() / results.len() as f64);
    }
    report.per_path = results.into_iter().map(|r| r.emv).collect();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Shape;

    fn law() -> PressureLaw<f64> {
        PressureLaw::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn perfect_match_is_zero() {
        let s = Shape::new(&[16]).unwrap();
        let r = ScalarField::from_fn(s, |x| 1.0 + 0.3 * x[0].sin());
        let u = VectorField::from_fn(s, |x, o| o[0] = x[0].cos());
        let st = State {
            rho: r.clone(),
            mom: u.mul_by(&r),
            time: 0.0,
        };
        let ym = YoungMeasure::build(vec![&st]).unwrap();
        assert!(relative_energy(&ym, 0.0, &r, &u, &law()).unwrap().abs() < 1e-13);
    }

    #[test]
    fn hand_evaluated_example() {
        let s = Shape::new(&[16]).unwrap();
        let st = State {
            rho: ScalarField::constant(s, 2.0),
            mom: VectorField::constant(s, &[2.0]),
            time: 0.0,
        };
        let ym = YoungMeasure::build(vec![&st]).unwrap();
        let e = relative_energy(
            &ym,
            0.0,
            &ScalarField::constant(s, 1.0),
            &VectorField::zeros(s),
            &law(),
        )
        .unwrap();
        assert!((e - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!(relative_energy(
            &ym,
            0.0,
            &ScalarField::constant(s, 0.0),
            &VectorField::zeros(s),
            &law()
        )
        .is_err());
    }

    #[test]
    fn gronwall_examples() {
        let t = [0.0, 0.5, 1.0];
        assert!(gronwall_check(&t, &[0.0; 3], 1.0, 0.0) <= 0.0);
        let e: Vec<f64> = t.iter().map(|&t| 2.0 * (0.7 * t).exp()).collect();
        assert!(gronwall_check(&t, &e, 0.7, 0.0).abs() < 1e-12);
        assert!((fit_gronwall(&t, &e, 0.0).unwrap() - 0.7).abs() < 1e-12);
        assert!(gronwall_check(&t, &[1.0, 3.0, 1.0], 0.1, 0.0) > 0.0);
    }

    #[test]
    fn missing_decomposition_is_named() {
        let grid = Grid::<f64>::new(&[16]).unwrap();
        let st = State::rest(&grid, 1.0);
        let ym = YoungMeasure::build(vec![&st]).unwrap();
        let pair = ReferencePair::new(st.rho.clone(), VectorField::zeros(grid.shape())).unwrap();
        let err = remainder(
            &grid,
            &ym,
            &pair,
            &law(),
            &Viscosity::new(0.1, 0.0).unwrap(),
            &NoiseModel::none(),
        );
        assert!(matches!(
            err,
            Err(Error::MissingDecomposition { field: "D^d U", .. })
        ));
    }
}
