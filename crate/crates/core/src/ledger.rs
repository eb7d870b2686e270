//! Energy accounting for ensemble runs: the per-path ledger, the ensemble
//! driver that fills it, the Poincaré ratio and the cross-variation audit.

use rayon::prelude::*;

use crate::constitutive::{viscous_dissipation, PressureLaw};
use crate::dynamics::{Dynamics, State, StepOutput};
use crate::ensemble::{Ensemble, Observable, YoungMeasure};
use crate::error::{Error, Result};
use crate::field::TensorField;
use crate::noise::WienerPath;
use crate::scalar::Real;
use crate::stats;

/// One sample of a path's energy balance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    /// `∫⟨ν; ½|m|²/ρ + P_δ(ρ)⟩ dx + D`.
    pub energy: f64,
    pub defect: f64,
    pub dissipation_cum: f64,
    pub ito_cum: f64,
    pub martingale: f64,
    /// Residual of the energy inequality over `[0, t]`.
    pub residual: f64,
}

/// Running sums along one Wiener path, including the pieces needed for the
/// cross-variation audit.
#[derive(Clone, Debug, Default)]
pub struct PathLedger {
    pub rows: Vec<LedgerRow>,
    /// `W_k(t)`.
    pub w: Vec<f64>,
    /// `Σ_n ∫⟨G_k⟩·e₁ dx ΔW_k`, per mode.
    pub cross_x: Vec<f64>,
    /// `Σ_n ∫⟨G_k⟩·e₁ dx Δt`, per mode.
    pub cross_y: Vec<f64>,
    pub floor_cells: usize,
    dissipation: f64,
    ito: f64,
    martingale: f64,
}

impl PathLedger {
    fn new(modes: usize) -> Self {
        Self {
            w: vec![0.0; modes],
            cross_x: vec![0.0; modes],
            cross_y: vec![0.0; modes],
            ..Default::default()
        }
    }

    /// `[E(t) + diss(τ,t)] − [E(τ) + ito(τ,t) + martingale(τ,t)]` between
    /// sample indices `i < j`.
    pub fn residual(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.rows[i], &self.rows[j]);
        (b.energy + (b.dissipation_cum - a.dissipation_cum))
            - (a.energy + (b.ito_cum - a.ito_cum) + (b.martingale - a.martingale))
    }
}

/// Ledgers of every path of an ensemble run on a common time axis.
#[derive(Clone, Debug, Default)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    pub paths: Vec<PathLedger>,
}

impl EnergyLedger {
    pub fn column(&self, sample: usize, f: impl Fn(&LedgerRow) -> f64) -> Vec<f64> {
        self.paths.iter().map(|p| f(&p.rows[sample])).collect()
    }

    /// Ensemble mean of every column at every sample time.
    pub fn mean_rows(&self) -> Vec<LedgerRow> {
        let n = self.paths.len() as f64;
        (0..self.times.len())
            .map(|i| {
                let mut acc = LedgerRow {
                    t: self.times[i],
                    ..Default::default()
                };
                for p in &self.paths {
                    let r = &p.rows[i];
                    acc.energy += r.energy / n;
                    acc.defect += r.defect / n;
                    acc.dissipation_cum += r.dissipation_cum / n;
                    acc.ito_cum += r.ito_cum / n;
                    acc.martingale += r.martingale / n;
                    acc.residual += r.residual / n;
                }
                acc
            })
            .collect()
    }

    /// Mean and standard error across paths of the residual between samples.
    pub fn energy_residual(&self, i: usize, j: usize) -> (f64, f64) {
        let r: Vec<f64> = self.paths.iter().map(|p| p.residual(i, j)).collect();
        stats::mean_se(&r)
    }

    /// Rows in the `t, E, D, dissipation_cum, ito_cum, martingale, residual`
    /// schema.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,E,D,dissipation_cum,ito_cum,martingale,residual\n");
        for r in self.mean_rows() {
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                r.t, r.energy, r.defect, r.dissipation_cum, r.ito_cum, r.martingale, r.residual
            ));
        }
        s
    }
}

/// Step size, Wiener base step, and sampling of one run.
#[derive(Clone, Copy, Debug)]
pub struct RunPlan {
    pub dt: f64,
    pub base_dt: f64,
    pub steps: u64,
    pub sample_every: u64,
}

impl RunPlan {
    pub fn sample_steps(&self) -> Vec<u64> {
        let every = self.sample_every.max(1);
        let mut v: Vec<u64> = (0..=self.steps).step_by(every as usize).collect();
        if *v.last().unwrap() != self.steps {
            v.push(self.steps);
        }
        v
    }
}

/// Hooks called by [`run_ensemble`].
pub trait RunObserver<T> {
    fn sample(&mut self, _index: usize, _t: f64, _ensemble: &Ensemble<T>) -> Result<()> {
        Ok(())
    }

    fn failure(&mut self, _ensemble: &Ensemble<T>, _error: &Error) {}
}

pub struct NoObserver;

impl<T> RunObserver<T> for NoObserver {}

/// `∫ ½|m|²/ρ + P_δ(ρ) dx` of a single realisation.
pub fn state_energy<T: Real>(s: &State<T>, law: &PressureLaw<T>) -> T {
    let dim = s.rho.shape().dim();
    let obs = Observable::energy(*law);
    let mut acc = T::zero();
    for c in 0..s.rho.values().len() {
        let m = s.mom.at(c);
        acc += obs.eval(s.rho.values()[c], &m[..dim]);
    }
    acc * T::lit(s.rho.shape().cell_volume())
}

/// `∫⟨ν; ½|m|²/ρ + P_δ(ρ)⟩ dx + D`.
pub fn total_energy<T: Real>(
    ym: &YoungMeasure<'_, T>,
    defect: T,
    law: &PressureLaw<T>,
) -> Result<T> {
    Ok(ym.expect(&Observable::energy(*law))?.integral() + defect)
}

/// `∫⟨ν; |u − ⟨ν;u⟩|²⟩ dx / D`; `0/0` is reported as `0`.
pub fn poincare_ratio<T: Real>(ym: &YoungMeasure<'_, T>, defect: T) -> f64 {
    let ubar = ym.mean_velocity();
    let dim = ym.shape().dim();
    let w = 1.0 / ym.n_atoms() as f64;
    let mut osc = 0.0;
    for a in ym.atoms() {
        let u = a.velocity();
        for d in 0..dim {
            for (x, y) in u.component(d).iter().zip(ubar.component(d)) {
                osc += (*x - *y).as_f64().powi(2) * w;
            }
        }
    }
    osc *= ym.shape().cell_volume();
    let d = defect.as_f64();
    if osc <= 1e-300 {
        0.0
    } else if d <= 0.0 {
        f64::INFINITY
    } else {
        osc / d
    }
}

fn sample_path<T: Real>(members: &[State<T>], law: &PressureLaw<T>) -> Result<(f64, f64)> {
    let ym = YoungMeasure::build(members.iter().collect())?;
    let (_, defect) = ym.dissipation_defect(law)?;
    let e = total_energy(&ym, defect, law)?;
    Ok((e.as_f64(), defect.as_f64()))
}

/// Advances every member over `plan.steps` Euler–Maruyama steps on its
/// path's Wiener realisation and fills the energy ledger.
///
/// Members are stepped in parallel; all reductions run in member order, so
/// the output does not depend on the number of worker threads.
pub fn run_ensemble<T: Real, O: RunObserver<T>>(
    dy: &Dynamics<T>,
    mut ens: Ensemble<T>,
    plan: &RunPlan,
    observer: &mut O,
) -> Result<(Ensemble<T>, EnergyLedger)> {
    let modes = dy.model.noise.modes();
    let paths: Vec<WienerPath> = (0..ens.paths)
        .map(|p| WienerPath::new(ens.seed, p as u64, plan.base_dt))
        .collect::<Result<_>>()?;
    let law = dy.model.effective_law();
    let visc = dy.model.visc;
    let dt = T::lit(plan.dt);
    let r = ens.replicas;
    let samples = plan.sample_steps();
    let mut ledger = EnergyLedger {
        times: Vec::with_capacity(samples.len()),
        paths: vec![PathLedger::new(modes); ens.paths],
    };
    let mut next_sample = 0;
    let t0 = ens.members[0].time.as_f64();

    for step in 0..=plan.steps {
        if samples.get(next_sample) == Some(&step) {
            let t = t0 + step as f64 * plan.dt;
            ledger.times.push(t);
            let energies: Vec<(f64, f64)> = (0..ens.paths)
                .into_par_iter()
                .map(|p| sample_path(ens.path_members(p), &law))
                .collect::<Result<_>>()?;
            for (pl, (e, d)) in ledger.paths.iter_mut().zip(energies) {
                let mut row = LedgerRow {
                    t,
                    energy: e,
                    defect: d,
                    dissipation_cum: pl.dissipation,
                    ito_cum: pl.ito,
                    martingale: pl.martingale,
                    residual: 0.0,
                };
                if let Some(first) = pl.rows.first() {
                    row.residual = (row.energy + row.dissipation_cum)
                        - (first.energy + row.ito_cum + row.martingale);
                }
                pl.rows.push(row);
            }
            observer.sample(next_sample, t, &ens)?;
            next_sample += 1;
        }
        if step == plan.steps {
            break;
        }

        let stepped: Result<Vec<(State<T>, StepOutput<T>)>> = ens
            .members
            .par_iter()
            .enumerate()
            .map(|(i, s)| dy.step_em(s, &paths[i / r], step, dt))
            .collect();
        let stepped = match stepped {
            Ok(v) => v,
            Err(e) => {
                let e = match e {
                    Error::NonFinite { what, index } => Error::BlowUp {
                        time: t0 + step as f64 * plan.dt,
                        reason: format!("non-finite {what} at cell {index}"),
                    },
                    other => other,
                };
                observer.failure(&ens, &e);
                return Err(e);
            }
        };

        let inv_r = T::one() / T::from_usize_lossy(r);
        let mut outputs = Vec::with_capacity(stepped.len());
        for (i, (s, out)) in stepped.into_iter().enumerate() {
            ens.members[i] = s;
            outputs.push(out);
        }
        for (p, pl) in ledger.paths.iter_mut().enumerate() {
            let outs = &outputs[p * r..(p + 1) * r];
            let mut grad = TensorField::zeros(dy.grid.shape());
            let mut ito = T::zero();
            let mut ug = vec![T::zero(); modes];
            let mut g1 = vec![T::zero(); modes];
            for o in outs {
                grad.add_scaled(inv_r, &o.grad_u);
                ito += o.ito * inv_r;
                for k in 0..modes {
                    ug[k] += o.u_dot_g[k] * inv_r;
                    g1[k] += o.g_mean[k][0] * inv_r;
                }
                pl.floor_cells += o.floor.cells;
            }
            let diss = viscous_dissipation(&visc, &grad).integral();
            pl.dissipation += (diss * dt).as_f64();
            pl.ito += 0.5 * (ito * dt).as_f64();
            let dw = &outs[0].dw;
            for k in 0..modes {
                pl.martingale += ug[k].as_f64() * dw[k];
                pl.w[k] += dw[k];
                pl.cross_x[k] += g1[k].as_f64() * dw[k];
                pl.cross_y[k] += g1[k].as_f64() * plan.dt;
            }
        }
    }
    Ok((ens, ledger))
}

/// Energy inequality checked at `Δt/2`, with the first-order bias fitted
/// from the companion run at `Δt` on the same Wiener paths.
#[derive(Clone, Debug)]
pub struct EnergyInequalityReport {
    pub times: Vec<f64>,
    /// Mean and standard error of the residual over `[0, t]`.
    pub residual: Vec<(f64, f64)>,
    /// `max(0, r_Δt − r_{Δt/2})`.
    pub bias: Vec<f64>,
    pub martingale: Vec<(f64, f64)>,
    pub pass_inequality: bool,
    pub pass_martingale: bool,
    pub fine: EnergyLedger,
}

pub fn energy_inequality_audit<T: Real>(
    dy: &Dynamics<T>,
    ens: Ensemble<T>,
    dt: f64,
    steps: u64,
    sample_every: u64,
) -> Result<EnergyInequalityReport> {
    let coarse_plan = RunPlan {
        dt,
        base_dt: 0.5 * dt,
        steps,
        sample_every,
    };
    let fine_plan = RunPlan {
        dt: 0.5 * dt,
        base_dt: 0.5 * dt,
        steps: 2 * steps,
        sample_every: 2 * sample_every,
    };
    let (_, coarse) = run_ensemble(dy, ens.clone(), &coarse_plan, &mut NoObserver)?;
    let (_, fine) = run_ensemble(dy, ens, &fine_plan, &mut NoObserver)?;
    let n = fine.times.len().min(coarse.times.len());
    let mut residual = Vec::with_capacity(n);
    let mut bias = Vec::with_capacity(n);
    let mut martingale = Vec::with_capacity(n);
    let mut pass_inequality = true;
    let mut pass_martingale = true;
    for i in 0..n {
        let (rf, sf) = fine.energy_residual(0, i);
        let (rc, _) = coarse.energy_residual(0, i);
        let b = (rc - rf).max(0.0);
        pass_inequality &= rf <= 5.0 * sf + b;
        let (m, s) = stats::mean_se(&fine.column(i, |r| r.martingale));
        pass_martingale &= m.abs() <= 5.0 * s;
        residual.push((rf, sf));
        bias.push(b);
        martingale.push((m, s));
    }
    Ok(EnergyInequalityReport {
        times: fine.times[..n].to_vec(),
        residual,
        bias,
        martingale,
        pass_inequality,
        pass_martingale,
        fine,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct CrossVariationReport {
    /// Mean of `f(T)·⟨M¹_E(T), e₁⟩ − Σ_k c_k ∫∫⟨G_k⟩·e₁ dx dt`.
    pub mean: f64,
    pub se: f64,
    /// Mean of the predicted cross variation `Σ_k c_k ∫∫⟨G_k⟩·e₁ dx dt`.
    pub predicted: f64,
    pub pass: bool,
}

/// Cross variation of `f = Σ_k c_k W_k` with the momentum martingale tested
/// against `e₁`. With `independent`, `f` is driven by a Wiener path
/// independent of the run, and its predicted cross variation is zero.
pub fn cross_variation_audit(
    ledger: &EnergyLedger,
    coeffs: &[f64],
    independent: Option<(u64, f64, u64, f64)>,
) -> Result<CrossVariationReport> {
    if ledger.paths.len() < 2 {
        return Err(Error::InsufficientData(
            "cross-variation audit needs two or more paths".into(),
        ));
    }
    let mut z = Vec::with_capacity(ledger.paths.len());
    let mut pred = Vec::with_capacity(ledger.paths.len());
    for (p, pl) in ledger.paths.iter().enumerate() {
        let x: f64 = pl.cross_x.iter().sum();
        let (f, y) = match independent {
            None => {
                let f: f64 = coeffs.iter().zip(&pl.w).map(|(c, w)| c * w).sum();
                let y: f64 = coeffs.iter().zip(&pl.cross_y).map(|(c, y)| c * y).sum();
                (f, y)
            }
            Some((seed, base_dt, steps, dt)) => {
                let w = WienerPath::new(seed, p as u64, base_dt)?;
                let mut f = 0.0;
                for n in 0..steps {
                    let dw = w.sample_increments(n, dt, coeffs.len())?;
                    f += coeffs.iter().zip(&dw).map(|(c, d)| c * d).sum::<f64>();
                }
                (f, 0.0)
            }
        };
        z.push(f * x - y);
        pred.push(y);
    }
    let (mean, se) = stats::mean_se(&z);
    let (predicted, _) = stats::mean_se(&pred);
    Ok(CrossVariationReport {
        mean,
        se,
        predicted,
        pass: mean.abs() <= 5.0 * se,
    })
}
