use stochflow::euler::{
    gradient_norm, pressure_from_projection, stopping_time_tau_m, EulerSolver, EulerState,
};
use stochflow::field::{Grid, ScalarField, VectorField};
use stochflow::init::taylor_green;
use stochflow::noise::{NoiseModel, WienerPath};
use stochflow::stats::mean_se;

fn unsteady_field(grid: &Grid<f64>) -> VectorField<f64> {
    let raw = VectorField::from_fn(grid.shape(), |x, out| {
        out[0] = x[1].sin() + 0.5 * (x[0] + 2.0 * x[1]).cos();
        out[1] = 0.4 * (2.0 * x[0] - x[1]).sin() + 0.3 * x[0].cos();
    });
    grid.helmholtz_project(&raw).unwrap()
}

fn kinetic(grid: &Grid<f64>, v: &VectorField<f64>) -> f64 {
    0.5 * grid.integrate(&v.norm_sq())
}

fn run(
    solver: &EulerSolver<f64>,
    mut s: EulerState<f64>,
    dt: f64,
    steps: u64,
    path: Option<&WienerPath>,
) -> EulerState<f64> {
    for n in 0..steps {
        s = match path {
            Some(p) => solver.step_em(&s, p, n, dt).unwrap(),
            None => solver.step_with_increments(&s, &[], dt).unwrap(),
        };
    }
    s
}

#[test]
fn pressure_identity_on_random_solenoidal_field() {
    let grid = Grid::<f64>::new(&[32, 32]).unwrap();
    let solver = EulerSolver::new(grid.clone(), NoiseModel::none()).unwrap();
    let s = solver.initial(unsteady_field(&grid)).unwrap();
    assert!(s.pi.mean().abs() < 1e-14);
    let r = solver.pressure_identity_residual(&s).unwrap();
    assert!(r < 1e-10, "{r}");
}

#[test]
fn taylor_green_is_stationary_without_noise() {
    let grid = Grid::<f64>::new(&[128, 128]).unwrap();
    let solver = EulerSolver::new(grid.clone(), NoiseModel::none()).unwrap();
    let v0 = taylor_green(&grid, 1.0).unwrap();
    let s0 = solver.initial(v0.clone()).unwrap();
    let dt = 1.0 / (1.0 / solver.cfl_dt(&s0)).ceil();
    let steps = (1.0 / dt).round() as u64;
    let mut s = s0;
    let mut worst: f64 = 0.0;
    for n in 0..steps {
        s = solver.step_with_increments(&s, &[], dt).unwrap();
        let mut d = s.v.clone();
        d.add_scaled(-1.0, &v0);
        worst = worst.max(d.max_abs());
        assert!(grid.divergence(&s.v).unwrap().max_abs() < 1e-10, "step {n}");
    }
    assert!((s.time - 1.0).abs() < 1e-12);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn zero_velocity_stays_zero() {
    let grid = Grid::<f64>::new(&[16, 16]).unwrap();
    let solver = EulerSolver::new(grid.clone(), NoiseModel::none()).unwrap();
    let s = solver.initial(VectorField::zeros(grid.shape())).unwrap();
    let s = run(&solver, s, 0.01, 50, None);
    assert_eq!(s.v.max_abs(), 0.0);
    assert_eq!(s.pi.max_abs(), 0.0);
}

#[test]
fn constant_forcing_gives_brownian_drift() {
    let grid = Grid::<f64>::new(&[8, 8]).unwrap();
    let k = vec![0.3, 0.2];
    let noise = NoiseModel::affine(k.clone(), vec![0.0, 0.0]).unwrap();
    let solver = EulerSolver::new(grid.clone(), noise).unwrap();
    let (dt, steps, paths) = (0.05, 20u64, 400u64);
    let mut sq = Vec::new();
    for p in 0..paths {
        let path = WienerPath::new(11, p, dt).unwrap();
        let s = solver.initial(VectorField::zeros(grid.shape())).unwrap();
        let s = run(&solver, s, dt, steps, Some(&path));
        let a = s.v.at(0);
        for c in 1..grid.len() {
            let b = s.v.at(c);
            assert!((a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13);
        }
        sq.push(a[0] * a[0] + a[1] * a[1]);
    }
    let (m, se) = mean_se(&sq);
    let expected: f64 = k.iter().map(|x| x * x).sum::<f64>() * dt * steps as f64;
    assert!(
        (m - expected).abs() <= 5.0 * se,
        "{m} vs {expected} (se {se})"
    );
}

#[test]
fn energy_drift_halves_with_dt() {
    let grid = Grid::<f64>::new(&[32, 32]).unwrap();
    let solver = EulerSolver::new(grid.clone(), NoiseModel::none()).unwrap();
    let v0 = unsteady_field(&grid);
    let e0 = kinetic(&grid, &v0);
    let drift = |dt: f64| {
        let s = solver.initial(v0.clone()).unwrap();
        let s = run(&solver, s, dt, (0.5 / dt).round() as u64, None);
        (kinetic(&grid, &s.v) - e0).abs()
    };
    let (d1, d2) = (drift(0.01), drift(0.005));
    let ratio = d1 / d2;
    assert!((1.7..=2.3).contains(&ratio), "{d1} {d2} {ratio}");
}

#[test]
fn projection_order_is_irrelevant() {
    let grid = Grid::<f64>::new(&[32, 32]).unwrap();
    let noise = NoiseModel::affine(vec![0.2, 0.1], vec![0.3, -0.1]).unwrap();
    let solver = EulerSolver::new(grid.clone(), noise.clone()).unwrap();
    let s = solver.initial(unsteady_field(&grid)).unwrap();
    let (dt, dw) = (0.01, [0.05, -0.02]);
    let a = solver.step_with_increments(&s, &dw, dt).unwrap();

    let g = grid.vector_gradient_dealiased(&s.v).unwrap();
    let mut w = VectorField::zeros(grid.shape());
    for i in 0..2 {
        let out = w.component_mut(i);
        for j in 0..2 {
            for c in 0..out.len() {
                out[c] += s.v.component(j)[c] * g.get(i, j)[c];
            }
        }
    }
    let w = VectorField::from_components(
        (0..2)
            .map(|d| grid.dealias(&w.component_field(d)).unwrap())
            .collect(),
    )
    .unwrap();
    let mut b = s.v.clone();
    b.add_scaled(-dt, &w);
    let one = ScalarField::constant(grid.shape(), 1.0);
    for (k, &x) in dw.iter().enumerate() {
        b.add_scaled(x, &noise.apply_g(&one, &s.v, k).unwrap());
    }
    let b = grid.helmholtz_project(&b).unwrap();
    let mut d = a.v.clone();
    d.add_scaled(-1.0, &b);
    assert!(d.max_abs() < 1e-12, "{}", d.max_abs());
}

#[test]
fn taylor_green_stopping_times() {
    let grid = Grid::<f64>::new(&[32, 32]).unwrap();
    let v = taylor_green(&grid, 1.0).unwrap();
    let pi = pressure_from_projection(&grid, &v).unwrap();
    assert!(pi.mean().abs() < 1e-15);
    let g = gradient_norm(&grid, &v).unwrap();
    let series: Vec<(f64, f64)> = (0..=10).map(|i| (0.1 * i as f64, g)).collect();
    assert_eq!(stopping_time_tau_m(&series, 0.5, 1.0), 0.0);
    assert_eq!(stopping_time_tau_m(&series, 2.0, 1.0), 1.0);
}
