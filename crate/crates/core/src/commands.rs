//! The four run modes behind the command line: simulate, verify,
//! weak-strong and limit-sweep. Each writes its artifacts into the
//! configured output directory and reports a pass flag.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::{RunConfig, FORMAT_VERSION};
use crate::constitutive::{fit_h_lower_bound, PressureLaw, Viscosity};
use crate::dynamics::{Dynamics, Model, State, StepperConfig};
use crate::ensemble::{Ensemble, Observable, YoungMeasure};
use crate::error::{Error, Result};
use crate::euler::{pressure_from_projection, EulerSolver};
use crate::field::snapshot::{read_snapshot, write_snapshot};
use crate::field::{Grid, ScalarField, VectorField};
use crate::init::{taylor_green, InitSpec};
use crate::ledger::{
    cross_variation_audit, energy_inequality_audit, poincare_ratio, run_ensemble, RunObserver,
    RunPlan,
};
use crate::noise::{ito_isometry_audit, CounterNormals, NoiseModel};
use crate::relative::{relative_energy, relative_energy_regrouped, weak_strong_experiment};
use crate::sweep::run_sweep;

#[derive(Clone, Debug)]
pub struct CommandOutcome {
    pub pass: bool,
    pub summary: Value,
    /// Human-readable lines, one per check or artifact.
    pub lines: Vec<String>,
    pub dir: PathBuf,
}

fn prepare_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("resolved_config.toml"), cfg.to_toml_string())?;
    fs::write(dir.join("FORMAT_VERSION"), format!("{FORMAT_VERSION}\n"))?;
    Ok(dir)
}

fn write_summary(dir: &Path, summary: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).expect("json values serialise");
    fs::write(dir.join("summary.json"), text + "\n")?;
    Ok(())
}

/// Finite JSON number, `null` otherwise.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn build_members(cfg: &RunConfig, grid: &Grid<f64>, init: &InitSpec) -> Result<Vec<State<f64>>> {
    let mut members = Vec::with_capacity(cfg.paths * cfg.replicas);
    for _ in 0..cfg.paths {
        for j in 0..cfg.replicas {
            members.push(init.build(grid, j, cfg.replicas)?);
        }
    }
    Ok(members)
}

fn state_snapshot(path: &Path, s: &State<f64>) -> Result<()> {
    let mut comps: Vec<&[f64]> = vec![s.rho.values()];
    comps.extend(s.mom.components().iter().map(|c| c.as_slice()));
    write_snapshot(
        BufWriter::new(fs::File::create(path)?),
        s.rho.shape(),
        s.time,
        &comps,
    )
}

struct SimObserver<'a> {
    dir: &'a Path,
    every: u64,
    law: PressureLaw<f64>,
    rows: Vec<String>,
}

impl RunObserver<f64> for SimObserver<'_> {
    fn sample(&mut self, index: usize, t: f64, ens: &Ensemble<f64>) -> Result<()> {
        let n = ens.paths as f64;
        let (mut mass, mut kinetic, mut defect, mut ratio) = (0.0, 0.0, 0.0, 0.0);
        for p in 0..ens.paths {
            let ym = ens.young_measure(p);
            let (_, d) = ym.dissipation_defect(&self.law)?;
            mass += ym.expect(&Observable::density())?.integral() / n;
            kinetic += 0.5 * ym.expect(&Observable::kinetic_twice())?.integral() / n;
            defect += d / n;
            ratio += poincare_ratio(&ym, d) / n;
        }
        self.rows
            .push(format!("{t:e},{mass:e},{kinetic:e},{defect:e},{ratio:e}"));
        if self.every > 0 && index as u64 % self.every == 0 {
            let dir = self.dir.join("snapshots");
            fs::create_dir_all(&dir)?;
            state_snapshot(
                &dir.join(format!("snapshot_{index:05}.bin")),
                &ens.members[0],
            )?;
        }
        Ok(())
    }

    fn failure(&mut self, ens: &Ensemble<f64>, _error: &Error) {
        let _ = state_snapshot(&self.dir.join("failure_snapshot.bin"), &ens.members[0]);
    }
}

/// Step size and step count covering `[0, t_end]` exactly.
fn plan_steps(dy: &Dynamics<f64>, members: &[State<f64>], t_end: f64) -> Result<(f64, u64)> {
    let mut dt = f64::INFINITY;
    for m in members {
        dt = dt.min(dy.choose_dt(m, None)?);
    }
    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as u64;
    Ok((t_end / steps as f64, steps))
}

pub fn simulate(cfg: &RunConfig) -> Result<CommandOutcome> {
    let dir = prepare_dir(cfg)?;
    let grid = Grid::<f64>::new(&cfg.sizes)?;
    let dy = Dynamics::new(grid.clone(), cfg.model()?, cfg.stepper_config())?;
    let members = build_members(cfg, &grid, &cfg.init)?;
    let (dt, steps) = plan_steps(&dy, &members, cfg.stepper.t_end)?;
    let plan = RunPlan {
        dt,
        base_dt: dt,
        steps,
        sample_every: cfg.stepper.sample_every,
    };
    let ens = Ensemble::new(members, cfg.paths, cfg.replicas, cfg.seed)?;
    let mut obs = SimObserver {
        dir: &dir,
        every: cfg.snapshot_every,
        law: dy.model.effective_law(),
        rows: Vec::new(),
    };
    let (ens, ledger) = run_ensemble(&dy, ens, &plan, &mut obs)?;

    fs::write(dir.join("ledger.csv"), ledger.to_csv())?;
    let mut observables = String::from("t,mass,kinetic,defect,poincare_ratio\n");
    for r in &obs.rows {
        observables.push_str(r);
        observables.push('\n');
    }
    fs::write(dir.join("observables.csv"), observables)?;

    let atoms = ens.path_members(0);
    let mut comps: Vec<&[f64]> = Vec::new();
    for a in atoms {
        comps.push(a.rho.values());
        comps.extend(a.mom.components().iter().map(|c| c.as_slice()));
    }
    write_snapshot(
        BufWriter::new(fs::File::create(dir.join("young_measure.bin"))?),
        grid.shape(),
        atoms[0].time,
        &comps,
    )?;

    let last = ledger.times.len() - 1;
    let (res, res_se) = ledger.energy_residual(0, last);
    let summary = json!({
        "command": "simulate",
        "dt": dt,
        "steps": steps,
        "samples": ledger.times.len(),
        "energy_residual_mean": num(res),
        "energy_residual_se": num(res_se),
        "pass": true,
    });
    write_summary(&dir, &summary)?;
    Ok(CommandOutcome {
        pass: true,
        lines: vec![format!(
            "dt = {dt:e}, {steps} steps, {} samples",
            ledger.times.len()
        )],
        summary,
        dir,
    })
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: e.to_string(),
        },
    }
}

/// Pseudo-random two-atom measures on a small 1D grid.
fn two_atom_states(cells: usize, count: usize, seed: u64) -> Result<Vec<(State<f64>, State<f64>)>> {
    let grid = Grid::<f64>::new(&[cells])?;
    let mut gen = CounterNormals::new(seed, 0x5a);
    let mut draws = vec![0.0; 4 * cells * count];
    gen.fill(0, &mut draws);
    let mut out = Vec::with_capacity(count);
    for chunk in draws.chunks(4 * cells) {
        let rho = |o: usize| {
            ScalarField::new(
                grid.shape(),
                (0..cells).map(|c| (0.5 * chunk[o + c]).exp()).collect(),
            )
        };
        let mom = |o: usize| VectorField::new(grid.shape(), vec![chunk[o..o + cells].to_vec()]);
        out.push((
            State::new(rho(0)?, mom(cells)?, 0.0)?,
            State::new(rho(2 * cells)?, mom(3 * cells)?, 0.0)?,
        ));
    }
    Ok(out)
}

pub fn verify(cfg: &RunConfig) -> Result<CommandOutcome> {
    let dir = prepare_dir(cfg)?;
    let m = &cfg.model;
    let mut checks = Vec::new();

    checks.push(check("pressure identities", || {
        let law = PressureLaw::new(m.a, m.gamma)?;
        let mut worst: f64 = 0.0;
        for i in 0..=200 {
            let rho = 0.1 * (100f64).powf(i as f64 / 200.0);
            let p = law.p(rho);
            worst = worst.max((rho * law.dpot(rho) - law.pot(rho) - p).abs() / p.abs());
            worst = worst.max(((m.gamma - 1.0) * law.pot(rho) + m.a * rho - p).abs() / p.abs());
        }
        Ok((worst <= 1e-8, format!("max relative error {worst:.2e}")))
    }));

    checks.push(check("relative pressure lower bound", || {
        let law = PressureLaw::new(m.a, m.gamma)?;
        let b = fit_h_lower_bound(&law, 0.5, 120);
        Ok((
            b.c_near > 0.0 && b.c_far > 0.0,
            format!("c_near = {:.3e}, c_far = {:.3e}", b.c_near, b.c_far),
        ))
    }));

    checks.push(check("helmholtz projection", || {
        let grid = Grid::<f64>::new(&[32, 32])?;
        let phi = ScalarField::from_fn(grid.shape(), |x| (x[0] + 2.0 * x[1]).sin() + x[1].cos());
        let g = grid.gradient(&phi)?;
        let tg = taylor_green(&grid, 1.0)?;
        let a = grid.helmholtz_project(&g)?.max_abs();
        let mut b = grid.helmholtz_project(&tg)?;
        b.add_scaled(-1.0, &tg);
        let mut mixed = tg.clone();
        mixed.add_scaled(1.0, &g);
        let once = grid.helmholtz_project(&mixed)?;
        let mut c = grid.helmholtz_project(&once)?;
        c.add_scaled(-1.0, &once);
        let worst = a.max(b.max_abs()).max(c.max_abs());
        Ok((worst <= 1e-10, format!("max error {worst:.2e}")))
    }));

    checks.push(check("mass conservation", || {
        let grid = Grid::<f64>::new(&cfg.sizes)?;
        let model = Model::new(
            cfg.law()?,
            Viscosity::new(m.nu, m.lambda)?,
            NoiseModel::none(),
            m.eps,
        )?;
        let dy = Dynamics::new(grid.clone(), model, cfg.stepper_config())?;
        let mut s = cfg.init.build(&grid, 0, 1)?;
        let m0 = s.mass();
        let dt = dy.choose_dt(&s, None)?;
        for _ in 0..50 {
            s = dy.step_with_increments(&s, &[], dt, false)?.0;
        }
        let err = (s.mass() - m0).abs() / m0;
        Ok((
            err <= 1e-12,
            format!("relative drift {err:.2e} over 50 steps"),
        ))
    }));

    checks.push(check("jensen nonnegativity", || {
        let law = PressureLaw::new(m.a, m.gamma)?;
        let pairs = two_atom_states(4, 1000, cfg.seed)?;
        let mut violations = 0;
        for (a, b) in &pairs {
            let ym = YoungMeasure::build(vec![a, b])?;
            if ym.dissipation_defect(&law).is_err() {
                violations += 1;
            }
            if cfg.verify.inject_concave {
                let concave =
                    Observable::new("concave", 0.5, 0.0, |rho: f64, _m: &[f64]| -rho * rho);
                if ym.jensen_gap(&concave).is_err() {
                    violations += 1;
                }
            }
        }
        let what = if cfg.verify.inject_concave {
            "measures (with injected concave observable)"
        } else {
            "measures"
        };
        Ok((
            violations == 0,
            format!("{violations} violations on {} {what}", pairs.len()),
        ))
    }));

    checks.push(check("momentum defect trace", || {
        let law = PressureLaw::new(m.a, m.gamma)?;
        let mut worst: f64 = 0.0;
        for (a, b) in two_atom_states(4, 100, cfg.seed ^ 1)? {
            let ym = YoungMeasure::build(vec![&a, &b])?;
            let md = ym.momentum_defect(&law);
            let trace = md.trace();
            let (rho, mom) = ym.barycentre();
            let kin = ym.expect(&Observable::kinetic_twice())?;
            let pot = ym.expect(&Observable::new(
                "P",
                law.gamma(),
                0.0,
                |r: f64, _m: &[f64]| law.pot(r),
            ))?;
            for c in 0..4 {
                let q = mom.component(0)[c];
                let dk = kin.values()[c] - q * q / rho.values()[c];
                let dp = pot.values()[c] - law.pot(rho.values()[c]);
                let expect = dk + (m.gamma - 1.0) * dp;
                worst = worst.max((trace.values()[c] - expect).abs());
            }
        }
        Ok((worst <= 1e-12, format!("max error {worst:.2e}")))
    }));

    checks.push(check("defect domination", || {
        let law = PressureLaw::new(m.a, m.gamma)?;
        let mut worst: f64 = 0.0;
        let mut bound = 0.0;
        for (a, b) in two_atom_states(4, 200, cfg.seed ^ 2)? {
            let r = YoungMeasure::build(vec![&a, &b])?.defect_domination_audit(&law)?;
            worst = worst.max(r.max_ratio);
            bound = r.bound;
        }
        Ok((
            worst <= bound + 1e-9,
            format!("max ratio {worst:.4} against {bound}"),
        ))
    }));

    checks.push(check("ito isometry", || {
        let r = ito_isometry_audit(
            |k, t| 0.3 + 0.1 * k as f64 + t,
            2,
            0.01,
            1.0,
            2000,
            cfg.seed,
        )?;
        Ok((
            r.pass,
            format!(
                "variance {:.4} vs {:.4} (tol {:.4})",
                r.variance, r.expected, r.tolerance
            ),
        ))
    }));

    checks.push(check("noise lipschitz bounds", || {
        let noise = cfg.noise_model()?;
        let shape = crate::field::Shape::new(&cfg.sizes)?;
        let v = noise.lipschitz_audit(shape, 2000, cfg.seed);
        Ok((v == 0, format!("{v} violations on 2000 pairs")))
    }));

    let energy = energy_inequality_audit_for(cfg);
    match energy {
        Ok((ineq, mart, cross)) => {
            checks.push(ineq);
            checks.push(mart);
            checks.push(cross);
        }
        Err(e) => checks.push(Check {
            name: "energy inequality",
            pass: false,
            detail: e.to_string(),
        }),
    }

    checks.push(check("relative energy regrouping", || {
        let law = PressureLaw::new(m.a, m.gamma)?;
        let grid = Grid::<f64>::new(&[8])?;
        let r = ScalarField::from_fn(grid.shape(), |x| 1.0 + 0.3 * x[0].sin());
        let u = VectorField::from_fn(grid.shape(), |x, o| o[0] = x[0].cos());
        let mut worst: f64 = 0.0;
        for (a, b) in two_atom_states(4, 100, cfg.seed ^ 3)? {
            let ym = YoungMeasure::build(vec![&a, &b])?;
            let (_, d) = ym.dissipation_defect(&law)?;
            let x = relative_energy(&ym, d, &r, &u, &law)?;
            let y = relative_energy_regrouped(&ym, d, &r, &u, &law)?;
            worst = worst.max((x - y).abs() / x.abs().max(1.0));
        }
        Ok((
            worst <= 1e-10,
            format!("max relative difference {worst:.2e}"),
        ))
    }));

    checks.push(check("euler pressure identity", || {
        let grid = Grid::<f64>::new(&[32, 32])?;
        let solver = EulerSolver::new(grid.clone(), NoiseModel::none())?;
        let s = solver.initial(taylor_green(&grid, 1.0)?)?;
        let exact = ScalarField::from_fn(grid.shape(), |x| {
            ((2.0 * x[0]).cos() + (2.0 * x[1]).cos()) / 4.0
        });
        let pi = pressure_from_projection(&grid, &s.v)?;
        let e1 = pi.zip_map(&exact, |a, b| a - b).max_abs();
        let e2 = solver.pressure_identity_residual(&s)?;
        Ok((
            e1.max(e2) <= 1e-10,
            format!("closed form {e1:.2e}, identity {e2:.2e}"),
        ))
    }));

    checks.push(check("snapshot round trip", || {
        let grid = Grid::<f64>::new(&cfg.sizes)?;
        let s = cfg.init.build(&grid, 0, 1)?;
        let mut buf = Vec::new();
        let mut comps: Vec<&[f64]> = vec![s.rho.values()];
        comps.extend(s.mom.components().iter().map(|c| c.as_slice()));
        write_snapshot(&mut buf, grid.shape(), 0.5, &comps)?;
        let back = read_snapshot(buf.as_slice())?;
        let same = back
            .components
            .iter()
            .zip(&comps)
            .all(|(a, b)| a.as_slice() == *b);
        Ok((same && back.time == 0.5, "bit-exact".into()))
    }));

    if let Some(path) = &cfg.verify.snapshot {
        checks.push(check("snapshot load", || {
            let snap = read_snapshot(fs::File::open(path)?)?;
            Ok((
                true,
                format!("{} components at t = {}", snap.components.len(), snap.time),
            ))
        }));
    }

    let pass = checks.iter().all(|c| c.pass);
    let lines: Vec<String> = checks
        .iter()
        .map(|c| {
            format!(
                "{:<4} {:<32} {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )
        })
        .collect();
    let table: Vec<Value> = checks
        .iter()
        .map(|c| json!({"check": c.name, "pass": c.pass, "detail": c.detail}))
        .collect();
    let summary = json!({"command": "verify", "pass": pass, "checks": table});
    write_summary(&dir, &summary)?;
    fs::write(dir.join("verify.txt"), lines.join("\n") + "\n")?;
    Ok(CommandOutcome {
        pass,
        summary,
        lines,
        dir,
    })
}

/// Short stochastic run of the configured model: energy inequality,
/// martingale mean and cross variation.
fn energy_inequality_audit_for(cfg: &RunConfig) -> Result<(Check, Check, Check)> {
    let grid = Grid::<f64>::new(&cfg.sizes)?;
    let stepper = StepperConfig {
        dt: None,
        ..cfg.stepper_config()
    };
    let dy = Dynamics::new(grid.clone(), cfg.model()?, stepper)?;
    let paths = cfg.paths.clamp(16, 64);
    let members: Vec<State<f64>> = (0..paths)
        .map(|_| cfg.init.build(&grid, 0, 1))
        .collect::<Result<_>>()?;
    let dt = dy.choose_dt(&members[0], None)?;
    let ens = Ensemble::new(members, paths, 1, cfg.seed)?;
    let r = energy_inequality_audit(&dy, ens, dt, 40, 10)?;
    let last = r.times.len() - 1;
    let (res, se) = r.residual[last];
    let ineq = Check {
        name: "energy inequality",
        pass: r.pass_inequality,
        detail: format!(
            "final residual {res:.3e} (se {se:.1e}, bias {:.1e})",
            r.bias[last]
        ),
    };
    let (mm, ms) = r.martingale[last];
    let mart = Check {
        name: "martingale mean",
        pass: r.pass_martingale,
        detail: format!("final mean {mm:.3e} (se {ms:.1e})"),
    };
    let modes = dy.model.noise.modes();
    let cross = if modes == 0 {
        Check {
            name: "cross variation",
            pass: true,
            detail: "no noise modes".into(),
        }
    } else {
        let mut coeffs = vec![0.0; modes];
        coeffs[0] = 1.0;
        let c = cross_variation_audit(&r.fine, &coeffs, None)?;
        Check {
            name: "cross variation",
            pass: c.pass,
            detail: format!("mean {:.3e} (se {:.1e})", c.mean, c.se),
        }
    };
    Ok((ineq, mart, cross))
}

pub fn weak_strong(cfg: &RunConfig) -> Result<CommandOutcome> {
    let dir = prepare_dir(cfg)?;
    let mut report = weak_strong_experiment(&cfg.weak_strong_config()?)?;
    let fit = report.fit(cfg.weak_strong.bias);
    fs::write(dir.join("relative_energy.csv"), report.to_csv())?;
    let emv_max = report.emv_mean.iter().copied().fold(0.0, f64::max);
    let emv_final = *report.emv_mean.last().unwrap_or(&f64::NAN);
    let nonneg = report
        .per_path
        .iter()
        .flatten()
        .all(|&e| e >= -1e-12 && e.is_finite());
    let gronwall = fit.as_ref().ok().copied().unwrap_or(f64::NAN);
    let summary = json!({
        "command": "weak-strong",
        "emv_max": num(emv_max),
        "emv_final": num(emv_final),
        "gronwall_c": num(gronwall),
        "gronwall_bias": report.gronwall_bias,
        "tau": num(report.tau),
        "nonnegative": nonneg,
        "pass": nonneg,
    });
    write_summary(&dir, &summary)?;
    Ok(CommandOutcome {
        pass: nonneg,
        lines: vec![
            format!("max E_mv = {emv_max:e}, final E_mv = {emv_final:e}"),
            format!("gronwall c = {gronwall}, tau = {}", report.tau),
        ],
        summary,
        dir,
    })
}

pub fn limit_sweep(cfg: &RunConfig) -> Result<CommandOutcome> {
    let dir = prepare_dir(cfg)?;
    let report = run_sweep(&cfg.sweep_config()?)?;
    fs::write(dir.join("sweep.csv"), report.to_csv())?;
    let fit = report.fit();
    let defect_ok = report.defect_non_increasing(2.0);
    let (slope, envelope, monotone, pass) = match &fit {
        Ok(f) => (f.slope, f.envelope, f.monotone, f.pass && defect_ok),
        Err(_) => (f64::NAN, f64::NAN, false, false),
    };
    let summary = json!({
        "command": "limit-sweep",
        "eps": report.eps,
        "final_emv": report.final_values().into_iter().map(num).collect::<Vec<_>>(),
        "d_sup": report.d_sup.iter().copied().map(num).collect::<Vec<_>>(),
        "slope": num(slope),
        "envelope": num(envelope),
        "monotone": monotone,
        "defect_non_increasing": defect_ok,
        "tau_M": report.tau_m,
        "pass": pass,
    });
    write_summary(&dir, &summary)?;
    let mut lines = vec![format!(
        "slope {slope:.3} (envelope {envelope}), monotone {monotone}"
    )];
    if let Err(e) = fit {
        lines.push(format!("rate fit unavailable: {e}"));
    }
    Ok(CommandOutcome {
        pass,
        summary,
        lines,
        dir,
    })
}
