//! Acceptance suite. Each criterion prints one PASS/FAIL line straight to
//! stdout and then asserts. Criteria run one at a time so that the timing
//! limits measure a single workload.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use stochflow::commands;
use stochflow::config::RunConfig;
use stochflow::constitutive::{fit_h_lower_bound, PressureLaw, Viscosity};
use stochflow::dynamics::{Dynamics, Model, State, StepperConfig};
use stochflow::ensemble::{Ensemble, Observable, YoungMeasure};
use stochflow::field::{Grid, ScalarField, VectorField};
use stochflow::init::{taylor_green, InitKind, InitSpec};
use stochflow::ledger::{
    cross_variation_audit, energy_inequality_audit, run_ensemble, NoObserver, RunPlan,
};
use stochflow::noise::{CounterNormals, NoiseModel};
use stochflow::relative::{weak_strong_experiment, WeakStrongConfig};
use stochflow::sweep::{run_sweep, SweepConfig};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let line = format!(
        "criterion {n} [{}] {name}: {detail} ({:.2} s)\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

/// Random two-atom measures on `cells` cells of a `dim`-dimensional grid.
fn two_atom_pairs(dim: usize, count: usize, seed: u64) -> Vec<(State<f64>, State<f64>)> {
    let sizes = if dim == 1 { vec![8] } else { vec![8, 8] };
    let grid = Grid::<f64>::new(&sizes).unwrap();
    let n = grid.len();
    let per = 2 * (1 + dim) * n;
    let mut z = vec![0.0; per * count];
    CounterNormals::new(seed, 99).fill(0, &mut z);
    let atom = |c: &[f64]| {
        let rho = ScalarField::new(grid.shape(), c[..n].iter().map(|x| x.exp()).collect()).unwrap();
        let comps = (0..dim)
            .map(|d| c[(1 + d) * n..(2 + d) * n].to_vec())
            .collect();
        State::new(rho, VectorField::new(grid.shape(), comps).unwrap(), 0.0).unwrap()
    };
    z.chunks(per)
        .map(|c| (atom(&c[..per / 2]), atom(&c[per / 2..])))
        .collect()
}

#[test]
fn criterion_1_structural_identities() {
    let _g = serial();
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut h_negative = 0;
    let mut bound_ok = true;
    for gamma in [1.4, 2.0, 3.0] {
        let a = 1.0;
        let law = PressureLaw::new(a, gamma).unwrap();
        for i in 0..=1000 {
            let rho = 0.1 * 100f64.powf(i as f64 / 1000.0);
            let p = law.p(rho);
            worst = worst.max((rho * law.dpot(rho) - law.pot(rho) - p).abs() / p);
            worst = worst.max(((gamma - 1.0) * law.pot(rho) + a * rho - p).abs() / p);
        }
        let alpha = 0.5;
        let fit = fit_h_lower_bound(&law, alpha, 200);
        // ½ min P'' over [α, 1/α]; P'' = aγρ^(γ−2) is monotone
        let d2 = |r: f64| a * gamma * r.powf(gamma - 2.0);
        let half_min = 0.5 * d2(alpha).min(d2(1.0 / alpha));
        bound_ok &= fit.c_near >= half_min * (1.0 - 1e-9) && fit.c_far > 0.0;
        for i in 0..200 {
            for j in 0..200 {
                let rho = 12.0 * i as f64 / 199.0;
                let r = alpha + (1.0 / alpha - alpha) * j as f64 / 199.0;
                let h = law.h(rho, r);
                if h < -1e-12 {
                    h_negative += 1;
                }
                let near = rho >= alpha && rho <= 1.0 / alpha;
                let far = rho < alpha / 2.0 || rho > 2.0 / alpha;
                if near && h < fit.c_near * (rho - r).powi(2) * (1.0 - 1e-9) - 1e-14 {
                    bound_ok = false;
                }
                if far && h < fit.c_far * (1.0 + rho.powf(gamma)) * (1.0 - 1e-9) {
                    bound_ok = false;
                }
            }
        }
    }
    let el = t.elapsed();
    let pass = worst <= 1e-8 && h_negative == 0 && bound_ok && el < Duration::from_secs(1);
    report(
        1,
        "structural identities",
        pass,
        el,
        &format!("max rel err {worst:.1e}, H<0 at {h_negative} points, bounds hold {bound_ok}"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_field_calculus() {
    let _g = serial();
    let t = Instant::now();
    let grid = Grid::<f64>::new(&[64, 64]).unwrap();
    let phi = ScalarField::from_fn(grid.shape(), |x| {
        (x[0] + 2.0 * x[1]).sin() + (3.0 * x[0]).cos() * x[1].sin()
    });
    let grad = grid.gradient(&phi).unwrap();
    let sol = taylor_green(&grid, 1.0).unwrap();
    let e1 = grid.helmholtz_project(&grad).unwrap().max_abs();
    let mut d = grid.helmholtz_project(&sol).unwrap();
    d.add_scaled(-1.0, &sol);
    let e2 = d.max_abs();
    let mut mixed = sol.clone();
    mixed.add_scaled(0.7, &grad);
    let once = grid.helmholtz_project(&mixed).unwrap();
    let mut twice = grid.helmholtz_project(&once).unwrap();
    twice.add_scaled(-1.0, &once);
    let e3 = twice.max_abs();
    let el = t.elapsed();
    let pass = e1.max(e2).max(e3) <= 1e-10 && el < Duration::from_secs(1);
    report(
        2,
        "field calculus",
        pass,
        el,
        &format!("P_H grad {e1:.1e}, P_H sol - sol {e2:.1e}, idempotence {e3:.1e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_conservation_and_energy() {
    let _g = serial();
    let t = Instant::now();
    let grid = Grid::<f64>::new(&[256]).unwrap();
    let model = Model::new(
        PressureLaw::new(1.0, 2.0).unwrap(),
        Viscosity::new(1e-2, 1e-2).unwrap(),
        NoiseModel::none(),
        1.0,
    )
    .unwrap();
    let dy = Dynamics::new(grid.clone(), model, StepperConfig::default()).unwrap();
    let s0 = State::new(
        ScalarField::from_fn(grid.shape(), |x| 1.0 + 0.1 * x[0].sin()),
        VectorField::from_fn(grid.shape(), |x, o| o[0] = 0.1 * x[0].cos()),
        0.0,
    )
    .unwrap();
    let run = |dt: f64| {
        let plan = RunPlan {
            dt,
            base_dt: dt,
            steps: (1.0 / dt).round() as u64,
            sample_every: 1,
        };
        let ens = Ensemble::new(vec![s0.clone()], 1, 1, 0).unwrap();
        let (end, ledger) = run_ensemble(&dy, ens, &plan, &mut NoObserver).unwrap();
        let rows = &ledger.paths[0].rows;
        let e0 = rows[0].energy;
        // non-increasing up to 5·Δt·E(0) per unit time
        let tm = &ledger.times;
        let monotone = (1..rows.len())
            .all(|j| rows[j].energy - rows[j - 1].energy <= 5.0 * dt * e0 * (tm[j] - tm[j - 1]));
        let mass = ((end.members[0].mass() - s0.mass()) / s0.mass()).abs();
        (rows.last().unwrap().residual.abs(), monotone, mass)
    };
    let dt = 1.0 / (1.0 / dy.cfl_dt(&s0)).ceil();
    let (d1, m1, mass1) = run(dt);
    let (d2, m2, mass2) = run(dt / 2.0);
    let ratio = d1 / d2;
    let el = t.elapsed();
    let pass = mass1.max(mass2) <= 1e-12
        && m1
        && m2
        && (1.7..=2.3).contains(&ratio)
        && el < Duration::from_secs(10);
    report(
        3,
        "conservation and energy",
        pass,
        el,
        &format!(
            "mass err {:.1e}, monotone {}, drift {d1:.3e}/{d2:.3e} = {ratio:.3}",
            mass1.max(mass2),
            m1 && m2
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_stochastic_energy_inequality() {
    let _g = serial();
    let t = Instant::now();
    let grid = Grid::<f64>::new(&[64]).unwrap();
    let model = Model::new(
        PressureLaw::new(1.0, 2.0).unwrap(),
        Viscosity::new(0.05, 0.05).unwrap(),
        NoiseModel::affine(vec![0.1], vec![0.05]).unwrap(),
        1.0,
    )
    .unwrap();
    let dy = Dynamics::new(grid.clone(), model, StepperConfig::default()).unwrap();
    let init = InitSpec::default();
    let members: Vec<State<f64>> = (0..256).map(|_| init.build(&grid, 0, 1).unwrap()).collect();
    let dt = 1.0 / (1.0 / dy.cfl_dt(&members[0])).ceil();
    let steps = (0.5 / dt).round() as u64;
    let ens = Ensemble::new(members, 256, 1, 2024).unwrap();
    let r = energy_inequality_audit(&dy, ens, dt, steps, (steps / 10).max(1)).unwrap();
    let last = r.times.len() - 1;
    let el = t.elapsed();
    let pass = r.pass_inequality && r.pass_martingale && el < Duration::from_secs(120);
    let worst_z = r
        .martingale
        .iter()
        .filter(|(_, s)| *s > 0.0)
        .map(|(m, s)| (m / s).abs())
        .fold(0.0, f64::max);
    report(
        4,
        "stochastic energy inequality",
        pass,
        el,
        &format!(
            "final residual {:.3e} (se {:.1e}, bias {:.1e}), max |martingale|/se {worst_z:.2}",
            r.residual[last].0, r.residual[last].1, r.bias[last]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_young_measure_layer() {
    let _g = serial();
    let t = Instant::now();
    let mut weight_err: f64 = 0.0;
    let mut jensen_violations = 0;
    let mut trace_err: f64 = 0.0;
    let mut dom_excess: f64 = f64::NEG_INFINITY;
    let mut checked = 0;
    for (dim, gamma, seed) in [(1usize, 1.4, 1u64), (1, 2.0, 2), (2, 3.0, 3), (2, 2.0, 4)] {
        let law = PressureLaw::new(1.0, gamma).unwrap();
        let pot = Observable::new("P", gamma, 0.0, move |r: f64, _m: &[f64]| law.pot(r));
        let c = 2f64.max(dim as f64 * (gamma - 1.0));
        for (a, b) in two_atom_pairs(dim, 250, seed) {
            checked += 1;
            let ym = YoungMeasure::build(vec![&a, &b]).unwrap();
            weight_err = weight_err.max(ym.total_weight().map(|w| (w - 1.0).abs()).max());
            if ym.dissipation_defect(&law).is_err() {
                jensen_violations += 1;
            }
            let md = ym.momentum_defect(&law);
            let trace = md.trace();
            let (rho, mom) = ym.barycentre();
            let kin = ym.expect(&Observable::kinetic_twice()).unwrap();
            let p = ym.expect(&pot).unwrap();
            for cell in 0..rho.values().len() {
                let q = mom.at(cell);
                let q2: f64 = q[..dim].iter().map(|x| x * x).sum();
                let r = rho.values()[cell];
                let kinetic = 0.5 * (kin.values()[cell] - q2 / r);
                let potential = p.values()[cell] - law.pot(r);
                let expect = 2.0 * kinetic + dim as f64 * (gamma - 1.0) * potential;
                let scale =
                    1f64.max(2.0 * kinetic.abs() + dim as f64 * (gamma - 1.0) * potential.abs());
                trace_err = trace_err.max((trace.values()[cell] - expect).abs() / scale);
            }
            let audit = ym.defect_domination_audit(&law).unwrap();
            assert_eq!(audit.bound, c);
            dom_excess = dom_excess.max(audit.max_ratio - c);
        }
    }
    let el = t.elapsed();
    let pass = weight_err <= 1e-15
        && jensen_violations == 0
        && trace_err <= 1e-12
        && dom_excess <= 1e-9
        && checked == 1000
        && el < Duration::from_secs(5);
    report(
        5,
        "young measure layer",
        pass,
        el,
        &format!(
            "{checked} measures: weight err {weight_err:.1e}, jensen violations {jensen_violations}, trace err {trace_err:.1e}, domination excess {dom_excess:.2e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_cross_variation() {
    let _g = serial();
    let t = Instant::now();
    let grid = Grid::<f64>::new(&[16]).unwrap();
    let model = Model::new(
        PressureLaw::new(1.0, 2.0).unwrap(),
        Viscosity::new(0.05, 0.05).unwrap(),
        NoiseModel::affine(vec![0.1], vec![0.05]).unwrap(),
        1.0,
    )
    .unwrap();
    let dy = Dynamics::new(grid.clone(), model, StepperConfig::default()).unwrap();
    let init = InitSpec::default();
    let paths = 10_000;
    let members: Vec<State<f64>> = (0..paths)
        .map(|_| init.build(&grid, 0, 1).unwrap())
        .collect();
    let dt = 0.01;
    let plan = RunPlan {
        dt,
        base_dt: dt,
        steps: 50,
        sample_every: 50,
    };
    let ens = Ensemble::new(members, paths, 1, 606).unwrap();
    let (_, ledger) = run_ensemble(&dy, ens, &plan, &mut NoObserver).unwrap();
    let r = cross_variation_audit(&ledger, &[1.0], None).unwrap();
    let el = t.elapsed();
    let pass = r.pass && el < Duration::from_secs(60);
    report(
        6,
        "cross variation",
        pass,
        el,
        &format!(
            "empirical - predicted = {:.3e} (se {:.1e}), predicted {:.4e}",
            r.mean, r.se, r.predicted
        ),
    );
    assert!(pass);
}

fn weak_strong_cfg(
    n: usize,
    dt: f64,
    paths: usize,
    perturb: f64,
    refine: usize,
) -> WeakStrongConfig<f64> {
    WeakStrongConfig {
        model: Model::new(
            PressureLaw::new(1.0, 2.0).unwrap(),
            Viscosity::new(0.05, 0.05).unwrap(),
            NoiseModel::affine(vec![0.1], vec![0.05]).unwrap(),
            1.0,
        )
        .unwrap(),
        sizes: vec![n],
        dt,
        t_end: 0.5,
        sample_every: 5,
        rho_floor: 1e-8,
        paths,
        replicas: 1,
        seed: 7,
        init: InitSpec {
            kind: InitKind::Wave,
            rho_amp: 0.2,
            mom_amp: 0.2,
            mode: 1,
            perturb,
        },
        refine,
        grad_threshold: 1e3,
    }
}

#[test]
fn criterion_7_weak_strong_stability() {
    let _g = serial();
    let t = Instant::now();
    let selfc = weak_strong_experiment(&weak_strong_cfg(32, 0.01, 8, 0.0, 1)).unwrap();
    let self_max = selfc.per_path.iter().flatten().copied().fold(0.0, f64::max);

    let coarse = weak_strong_experiment(&weak_strong_cfg(32, 0.01, 32, 0.0, 2)).unwrap();
    let fine = weak_strong_experiment(&weak_strong_cfg(64, 0.005, 32, 0.0, 2)).unwrap();
    let e0 = coarse.emv_mean[0].max(fine.emv_mean[0]);
    let shrink = coarse.emv_mean.last().unwrap() / fine.emv_mean.last().unwrap();

    let bias = coarse.emv_mean.iter().copied().fold(0.0, f64::max);
    let mut c = Vec::new();
    for paths in [16, 32] {
        let mut r = weak_strong_experiment(&weak_strong_cfg(32, 0.01, paths, 0.02, 2)).unwrap();
        c.push(r.fit(bias).unwrap());
    }
    let stable = (c[1] - c[0]).abs() <= 0.3 * c[0].abs();
    let el = t.elapsed();
    let pass =
        self_max < 1e-12 && e0 == 0.0 && shrink >= 1.5 && stable && el < Duration::from_secs(300);
    report(
        7,
        "weak-strong stability",
        pass,
        el,
        &format!(
            "self max {self_max:.1e}, E(0) {e0:.1e}, shrink {shrink:.2}, gronwall c {:.4} -> {:.4}",
            c[0], c[1]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_incompressible_inviscid_limit() {
    let _g = serial();
    let t = Instant::now();
    let law = PressureLaw::new(1.0, 2.0).unwrap();
    let noise = NoiseModel::affine(vec![0.05, 0.05], vec![0.05, 0.05]).unwrap();
    let mut cfg = SweepConfig::new(law, noise);
    cfg.eps = vec![1.0, 0.5, 0.25, 0.125];
    cfg.sizes = vec![64, 64];
    cfg.grad_threshold = 2.0;
    cfg.paths = 16;
    cfg.replicas = 4;
    cfg.seed = 3;
    let r = run_sweep(&cfg).unwrap();
    let fit = r.fit().unwrap();
    let defect_ok = r.defect_non_increasing(2.0);
    let nonneg = r.emv_mean.iter().flatten().all(|&e| e >= 0.0);
    let el = t.elapsed();
    let pass =
        fit.monotone && fit.slope >= 0.5 && defect_ok && nonneg && el < Duration::from_secs(900);
    report(
        8,
        "incompressible-inviscid limit",
        pass,
        el,
        &format!(
            "E(T) {:?}, slope {:.3}, monotone {}, D_sup {:?} non-increasing {defect_ok}",
            r.final_values()
                .iter()
                .map(|v| format!("{v:.3e}"))
                .collect::<Vec<_>>(),
            fit.slope,
            fit.monotone,
            r.d_sup
                .iter()
                .map(|v| format!("{v:.3e}"))
                .collect::<Vec<_>>(),
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_determinism() {
    let _g = serial();
    let t = Instant::now();
    let base = tempfile::tempdir().unwrap();
    let text = "seed = 41\n[grid]\nsizes = [16, 16]\n[ensemble]\npaths = 6\nreplicas = 3\n\
                [init]\nperturb = 0.05\n[noise]\nK = [0.1, 0.05]\nL = [0.05, 0.02]\n\
                [stepper]\nt_end = 0.05\nsample_every = 2\n";
    let mut outputs = Vec::new();
    for threads in [1, 2, 8] {
        let mut cfg = RunConfig::from_toml_str(text).unwrap();
        cfg.output = base.path().join(format!("t{threads}"));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| commands::simulate(&cfg)).unwrap();
        let read = |f: &str| std::fs::read(cfg.output.join(f)).unwrap();
        outputs.push((
            read("ledger.csv"),
            read("observables.csv"),
            read("young_measure.bin"),
        ));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    let el = t.elapsed();
    let pass = same && el < Duration::from_secs(60);
    report(
        9,
        "determinism",
        pass,
        el,
        &format!("1/2/8 workers byte-identical: {same}"),
    );
    assert!(pass);
}
