use std::f64::consts::PI;

use proptest::prelude::*;
use stochflow::field::{Grid, ScalarField, Shape, VectorField};
use stochflow::Error;

fn grid(sizes: &[usize]) -> Grid<f64> {
    Grid::new(sizes).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Smooth random field built from a handful of low modes with given coefficients.
fn smooth_field(shape: Shape, coef: &[f64]) -> ScalarField<f64> {
    let dim = shape.dim();
    ScalarField::from_fn(shape, |x| {
        let y = if dim == 2 { x[1] } else { 0.0 };
        coef.iter()
            .enumerate()
            .map(|(i, c)| {
                let kx = (i % 3) as f64 + 1.0;
                let ky = (i / 3) as f64;
                c * (kx * x[0] + ky * y + 0.3 * i as f64).sin()
            })
            .sum()
    })
}

#[test]
fn gradient_of_sine_is_cosine() {
    let g = grid(&[32]);
    let f = ScalarField::from_fn(g.shape(), |x| x[0].sin());
    let expect = ScalarField::<f64>::from_fn(g.shape(), |x| x[0].cos());
    let grad = g.gradient(&f).unwrap();
    assert!(max_diff(grad.component(0), expect.values()) < 1e-13);
}

#[test]
fn gradient_of_constant_is_zero() {
    let g = grid(&[16, 16]);
    let f = ScalarField::constant(g.shape(), 3.5);
    assert!(g.gradient(&f).unwrap().max_abs() < 1e-14);
}

#[test]
fn gradient_2d_matches_closed_form() {
    let g = grid(&[64, 64]);
    let f = ScalarField::from_fn(g.shape(), |x| (2.0 * x[0]).sin() * (3.0 * x[1]).cos());
    let grad = g.gradient(&f).unwrap();
    let dx =
        ScalarField::<f64>::from_fn(g.shape(), |x| 2.0 * (2.0 * x[0]).cos() * (3.0 * x[1]).cos());
    let dy = ScalarField::<f64>::from_fn(g.shape(), |x| {
        -3.0 * (2.0 * x[0]).sin() * (3.0 * x[1]).sin()
    });
    assert!(max_diff(grad.component(0), dx.values()) < 1e-10);
    assert!(max_diff(grad.component(1), dy.values()) < 1e-10);
    for d in 0..2 {
        let mean: f64 = grad.component(d).iter().sum::<f64>() / 4096.0;
        assert!(mean.abs() < 1e-14);
    }
}

#[test]
fn gradient_rejects_non_finite_input() {
    let g = grid(&[8]);
    let mut f = ScalarField::<f64>::zeros(g.shape());
    f.values_mut()[2] = f64::INFINITY;
    assert!(matches!(
        g.gradient(&f),
        Err(Error::NonFinite { index: 2, .. })
    ));
}

#[test]
fn gradient_works_in_single_precision() {
    let g = Grid::<f32>::new(&[32]).unwrap();
    let f = ScalarField::<f32>::from_fn(g.shape(), |x| (2.0 * x[0]).sin());
    let grad = g.gradient(&f).unwrap();
    let expect = ScalarField::<f32>::from_fn(g.shape(), |x| 2.0 * (2.0 * x[0]).cos());
    let err = grad
        .component(0)
        .iter()
        .zip(expect.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    assert!(err < 1e-5, "{err}");
}

#[test]
fn divergence_examples() {
    let g = grid(&[32, 32]);
    let v = VectorField::from_fn(g.shape(), |x, out| {
        out[0] = x[0].sin();
        out[1] = 0.0;
    });
    let div = g.divergence(&v).unwrap();
    let expect = ScalarField::<f64>::from_fn(g.shape(), |x| x[0].cos());
    assert!(max_diff(div.values(), expect.values()) < 1e-12);

    // curl of a stream function psi = sin(2x) cos(y)
    let curl = VectorField::from_fn(g.shape(), |x, out| {
        out[0] = -(2.0 * x[0]).sin() * x[1].sin();
        out[1] = -2.0 * (2.0 * x[0]).cos() * x[1].cos();
    });
    assert!(g.divergence(&curl).unwrap().max_abs() < 1e-12);

    let c = VectorField::constant(g.shape(), &[0.7, -1.2]);
    assert!(g.divergence(&c).unwrap().max_abs() < 1e-14);
}

#[test]
fn inverse_laplacian_eigenfunctions() {
    let g = grid(&[32]);
    let f = ScalarField::from_fn(g.shape(), |x| x[0].sin());
    let u = g.inverse_laplacian(&f).unwrap();
    assert!(max_diff(u.values(), &f.map(|v| -v).into_values()) < 1e-14);

    let f = ScalarField::from_fn(g.shape(), |x| (2.0 * x[0]).cos());
    let u = g.inverse_laplacian(&f).unwrap();
    let expect: Vec<f64> = f.values().iter().map(|v| -v / 4.0).collect();
    assert!(max_diff(u.values(), &expect) < 1e-14);

    let zero = ScalarField::<f64>::zeros(g.shape());
    assert_eq!(g.inverse_laplacian(&zero).unwrap().max_abs(), 0.0);
}

#[test]
fn inverse_laplacian_rejects_nonzero_mean() {
    let g = grid(&[16]);
    let f = ScalarField::from_fn(g.shape(), |x| 1.0 + x[0].sin());
    assert!(matches!(
        g.inverse_laplacian(&f),
        Err(Error::NonZeroMean { .. })
    ));
}

#[test]
fn helmholtz_examples() {
    let g = grid(&[64, 64]);
    let phi = ScalarField::from_fn(g.shape(), |x| {
        (x[0] + 2.0 * x[1]).sin() + (3.0 * x[0]).cos()
    });
    let grad = g.gradient(&phi).unwrap();
    assert!(g.helmholtz_project(&grad).unwrap().max_abs() < 1e-12);

    let c = VectorField::constant(g.shape(), &[0.1, -0.4]);
    let pc = g.helmholtz_project(&c).unwrap();
    assert!(max_diff(pc.component(0), c.component(0)) < 1e-15);
    assert!(max_diff(pc.component(1), c.component(1)) < 1e-15);
}

#[test]
fn integrate_examples() {
    let g2 = grid(&[16, 16]);
    let one = ScalarField::constant(g2.shape(), 1.0);
    assert!((g2.integrate(&one) - 4.0 * PI * PI).abs() < 1e-12);
    let g1 = grid(&[32]);
    let s = ScalarField::from_fn(g1.shape(), |x| x[0].sin());
    assert!(g1.integrate(&s).abs() < 1e-14);
    let s2 = ScalarField::from_fn(g1.shape(), |x| x[0].sin().powi(2));
    assert!((g1.integrate(&s2) - PI).abs() < 1e-13);
}

#[test]
fn resample_is_exact_for_resolved_modes() {
    let fine = grid(&[64, 32]);
    let coarse = grid(&[32, 16]);
    let f = ScalarField::from_fn(fine.shape(), |x| (3.0 * x[0]).sin() * x[1].cos() + 0.5);
    let r = fine.resample(&f, &coarse).unwrap();
    let expect =
        ScalarField::<f64>::from_fn(coarse.shape(), |x| (3.0 * x[0]).sin() * x[1].cos() + 0.5);
    assert!(max_diff(r.values(), expect.values()) < 1e-13);
    let back = coarse.resample(&r, &fine).unwrap();
    assert!(max_diff(back.values(), f.values()) < 1e-13);
}

#[test]
fn dealias_removes_high_modes() {
    let g = grid(&[32]);
    let f = ScalarField::from_fn(g.shape(), |x| x[0].sin() + (12.0 * x[0]).cos());
    let d = g.dealias(&f).unwrap();
    let expect = ScalarField::<f64>::from_fn(g.shape(), |x| x[0].sin());
    assert!(max_diff(d.values(), expect.values()) < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_is_idempotent_and_solenoidal(seed in proptest::collection::vec(-1.0f64..1.0, 2 * 64 * 64)) {
        let g = grid(&[64, 64]);
        let v = VectorField::new(g.shape(), vec![seed[..4096].to_vec(), seed[4096..].to_vec()]).unwrap();
        let p = g.helmholtz_project(&v).unwrap();
        let pp = g.helmholtz_project(&p).unwrap();
        for d in 0..2 {
            prop_assert!(max_diff(p.component(d), pp.component(d)) < 1e-12);
        }
        prop_assert!(g.divergence(&p).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn parseval_holds(coef in proptest::collection::vec(-1.0f64..1.0, 6), noise in proptest::collection::vec(-1.0f64..1.0, 32 * 16)) {
        let g = grid(&[32, 16]);
        let mut f = smooth_field(g.shape(), &coef);
        for (v, n) in f.values_mut().iter_mut().zip(&noise) { *v += n; }
        let direct = g.integrate(&f.map(|v| v * v));
        let modal = g.modal_norm_sq(&f).unwrap();
        prop_assert!((direct - modal).abs() <= 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn gradient_divergence_adjoint(cf in proptest::collection::vec(-1.0f64..1.0, 6), cu in proptest::collection::vec(-1.0f64..1.0, 6), cv in proptest::collection::vec(-1.0f64..1.0, 6)) {
        let g = grid(&[32, 32]);
        let f = smooth_field(g.shape(), &cf);
        let v = VectorField::from_components(vec![smooth_field(g.shape(), &cu), smooth_field(g.shape(), &cv)]).unwrap();
        let lhs = g.integrate(&f.zip_map(&g.divergence(&v).unwrap(), |a, b| a * b));
        let rhs = -g.integrate(&g.gradient(&f).unwrap().dot(&v));
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }
}
