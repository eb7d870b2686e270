//! Barotropic pressure law, its potential, the artificial-pressure
//! regularisation, the relative pressure `H(ρ, r)` and Newtonian stress.

use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField};
use crate::scalar::Real;

/// `p(ρ) = aρ^γ`, optionally augmented by `δ(ρ + ρ^Γ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PressureLaw<T> {
    a: T,
    gamma: T,
    delta: T,
    gamma_art: T,
}

fn check_density<T: Real>(rho: T) -> Result<()> {
    if rho < T::zero() || !rho.is_finite() {
        return Err(Error::Domain {
            what: "density",
            value: rho.as_f64(),
            domain: "ρ ≥ 0",
        });
    }
    Ok(())
}

/// `x log x` extended continuously by zero at the origin.
fn xlogx<T: Real>(x: T) -> T {
    if x > T::zero() {
        x * x.ln()
    } else {
        T::zero()
    }
}

/// `x^e`, through `powi` when `e` is a small integer.
#[inline]
fn pw<T: Real>(x: T, e: T) -> T {
    if e.fract() == T::zero() && e.abs() <= T::lit(16.0) {
        x.powi(e.to_i32().unwrap_or(0))
    } else {
        x.powf(e)
    }
}

impl<T: Real> PressureLaw<T> {
    /// Plain power law without artificial pressure.
    pub fn new(a: T, gamma: T) -> Result<Self> {
        Self::with_artificial(a, gamma, T::zero(), T::lit(6.0).max(gamma))
    }

    pub fn with_artificial(a: T, gamma: T, delta: T, gamma_art: T) -> Result<Self> {
        if !(a > T::zero()) {
            return Err(Error::InvalidParameter(format!("a = {a} must be positive")));
        }
        if !(gamma > T::one()) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} must exceed 1"
            )));
        }
        if !(delta >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "delta = {delta} must be nonnegative"
            )));
        }
        if delta > T::zero() && gamma_art < T::lit(6.0).max(gamma) {
            return Err(Error::InvalidParameter(format!(
                "artificial exponent {gamma_art} must be at least max(6, gamma)"
            )));
        }
        Ok(Self {
            a,
            gamma,
            delta,
            gamma_art,
        })
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn gamma_art(&self) -> T {
        self.gamma_art
    }

    /// The law with every coefficient multiplied by `s`; used for the `1/ε²`
    /// low-Mach rescaling, under which `P` and `H` scale linearly.
    pub fn scaled(&self, s: T) -> Self {
        Self {
            a: self.a * s,
            delta: self.delta * s,
            ..*self
        }
    }

    pub fn pressure(&self, rho: T) -> Result<T> {
        check_density(rho)?;
        Ok(self.p(rho))
    }

    /// Closed form `P(ρ) = a(ρ^γ − ρ)/(γ − 1)`.
    pub fn potential(&self, rho: T) -> Result<T> {
        check_density(rho)?;
        Ok(self.pot(rho))
    }

    pub fn pressure_delta(&self, rho: T) -> Result<T> {
        check_density(rho)?;
        Ok(self.p_delta(rho))
    }

    pub fn potential_delta(&self, rho: T) -> Result<T> {
        check_density(rho)?;
        Ok(self.pot_delta(rho))
    }

    // Unchecked evaluations for inner loops; callers guarantee ρ ≥ 0.

    #[inline]
    pub fn p(&self, rho: T) -> T {
        self.a * pw(rho, self.gamma)
    }

    #[inline]
    pub fn dp(&self, rho: T) -> T {
        self.a * self.gamma * pw(rho, self.gamma - T::one())
    }

    #[inline]
    pub fn d2p(&self, rho: T) -> T {
        self.a * self.gamma * (self.gamma - T::one()) * pw(rho, self.gamma - T::lit(2.0))
    }

    #[inline]
    pub fn pot(&self, rho: T) -> T {
        self.a * (pw(rho, self.gamma) - rho) / (self.gamma - T::one())
    }

    #[inline]
    pub fn dpot(&self, rho: T) -> T {
        self.a * (self.gamma * pw(rho, self.gamma - T::one()) - T::one()) / (self.gamma - T::one())
    }

    #[inline]
    pub fn d2pot(&self, rho: T) -> T {
        self.a * self.gamma * pw(rho, self.gamma - T::lit(2.0))
    }

    #[inline]
    pub fn d3pot(&self, rho: T) -> T {
        self.a * self.gamma * (self.gamma - T::lit(2.0)) * pw(rho, self.gamma - T::lit(3.0))
    }

    #[inline]
    pub fn p_delta(&self, rho: T) -> T {
        if self.delta == T::zero() {
            return self.p(rho);
        }
        self.p(rho) + self.delta * (rho + pw(rho, self.gamma_art))
    }

    #[inline]
    pub fn dp_delta(&self, rho: T) -> T {
        if self.delta == T::zero() {
            return self.dp(rho);
        }
        self.dp(rho) + self.delta * (T::one() + self.gamma_art * pw(rho, self.gamma_art - T::one()))
    }

    #[inline]
    pub fn pot_delta(&self, rho: T) -> T {
        if self.delta == T::zero() {
            return self.pot(rho);
        }
        self.pot(rho)
            + self.delta * (xlogx(rho) + pw(rho, self.gamma_art) / (self.gamma_art - T::one()))
    }

    /// `H(ρ, r) = P(ρ) − P′(r)(ρ − r) − P(r)` for the plain power law.
    ///
    /// Uses the second-order Taylor form around `r` when `|ρ − r| < 1e−6·r`.
    pub fn relative_h(&self, rho: T, r: T) -> Result<T> {
        check_density(rho)?;
        if !(r > T::zero()) {
            return Err(Error::Domain {
                what: "reference density",
                value: r.as_f64(),
                domain: "r > 0",
            });
        }
        Ok(self.h(rho, r))
    }

    #[inline]
    pub fn h(&self, rho: T, r: T) -> T {
        let d = rho - r;
        if d.abs() < T::lit(1e-6) * r {
            let half = T::lit(0.5);
            let sixth = T::one() / T::lit(6.0);
            return d * d * (half * self.d2pot(r) + sixth * self.d3pot(r) * d);
        }
        (self.pot(rho) - self.dpot(r) * d - self.pot(r)).max(T::zero())
    }

    /// Isentropic sound speed `√p_δ′(ρ)`.
    #[inline]
    pub fn sound_speed(&self, rho: T) -> T {
        self.dp_delta(rho).sqrt()
    }
}

/// Brute-force fit of the two constants in the lower bound
/// `H(ρ,r) ≥ c_near|ρ−r|²` on `[α, 1/α]²` and
/// `H(ρ,r) ≥ c_far(1 + ρ^γ)` for `r ∈ [α, 1/α]`, `ρ ∉ [α/2, 2/α]`.
#[derive(Clone, Copy, Debug)]
pub struct HLowerBound {
    pub c_near: f64,
    pub c_far: f64,
    pub samples: usize,
}

pub fn fit_h_lower_bound<T: Real>(law: &PressureLaw<T>, alpha: f64, n: usize) -> HLowerBound {
    assert!(alpha > 0.0 && alpha < 1.0 && n >= 2);
    let lo = alpha;
    let hi = 1.0 / alpha;
    let at = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let mut c_near = f64::INFINITY;
    let mut samples = 0;
    for i in 0..n {
        let rho = at(i, lo, hi);
        for j in 0..n {
            let r = at(j, lo, hi);
            if i == j {
                continue;
            }
            let h = law.h(T::lit(rho), T::lit(r)).as_f64();
            c_near = c_near.min(h / (rho - r).powi(2));
            samples += 1;
        }
    }
    // far regime: ρ on both sides of the excluded band, up to 10/α
    let mut c_far = f64::INFINITY;
    let gamma = law.gamma().as_f64();
    let below: Vec<f64> = (0..n).map(|i| at(i, 0.0, alpha / 2.0)).collect();
    let above: Vec<f64> = (0..n).map(|i| at(i, 2.0 / alpha, 10.0 / alpha)).collect();
    for &rho in below.iter().chain(&above) {
        for j in 0..n {
            let r = at(j, lo, hi);
            let h = law.h(T::lit(rho), T::lit(r)).as_f64();
            c_far = c_far.min(h / (1.0 + rho.powf(gamma)));
            samples += 1;
        }
    }
    HLowerBound {
        c_near,
        c_far,
        samples,
    }
}

/// Shear and bulk viscosity of Newton's rheological law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viscosity<T> {
    nu: T,
    lambda: T,
}

impl<T: Real> Viscosity<T> {
    pub fn new(nu: T, lambda: T) -> Result<Self> {
        if !(nu > T::zero()) || !(lambda >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "viscosity needs nu > 0 and lambda >= 0, got nu = {nu}, lambda = {lambda}"
            )));
        }
        Ok(Self { nu, lambda })
    }

    /// Inviscid placeholder; only used by reference solvers that never form `S`.
    pub fn inviscid() -> Self {
        Self {
            nu: T::zero(),
            lambda: T::zero(),
        }
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// `η = λ + (N − 2)ν/N`.
    pub fn eta(&self, dim: usize) -> T {
        let n = T::from_usize_lossy(dim);
        self.lambda + (n - T::lit(2.0)) * self.nu / n
    }

    pub fn is_viscous(&self) -> bool {
        self.nu > T::zero() || self.lambda > T::zero()
    }
}

/// `S(∇u) = ν(∇u + ∇ᵗu − (2/N) div u I) + λ div u I`.
pub fn stress<T: Real>(visc: &Viscosity<T>, grad_u: &TensorField<T>) -> TensorField<T> {
    let shape = grad_u.shape();
    let dim = shape.dim();
    let div = grad_u.trace();
    let two_over_n = T::lit(2.0) / T::from_usize_lossy(dim);
    let mut out = TensorField::zeros(shape);
    for i in 0..dim {
        for j in 0..dim {
            let gij = grad_u.get(i, j);
            let gji = grad_u.get(j, i);
            let dst = out.get_mut(i, j);
            for c in 0..shape.len() {
                let mut s = visc.nu * (gij[c] + gji[c]);
                if i == j {
                    s += (visc.lambda - visc.nu * two_over_n) * div.values()[c];
                }
                dst[c] = s;
            }
        }
    }
    out
}

/// Pointwise `S(∇u) : ∇u`, nonnegative for admissible viscosities.
pub fn viscous_dissipation<T: Real>(
    visc: &Viscosity<T>,
    grad_u: &TensorField<T>,
) -> ScalarField<T> {
    stress(visc, grad_u).contract(grad_u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Shape;

    fn law(a: f64, gamma: f64) -> PressureLaw<f64> {
        PressureLaw::new(a, gamma).unwrap()
    }

    /// Central finite difference of the potential.
    fn fd_dpot(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5 * x.max(1.0);
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn pressure_examples() {
        assert_eq!(law(1.0, 2.0).pressure(2.0).unwrap(), 4.0);
        assert_eq!(law(3.0, 1.7).pressure(0.0).unwrap(), 0.0);
        assert_eq!(law(1.0, 1.4).pressure(1.0).unwrap(), 1.0);
        assert!(law(1.0, 2.0).pressure(-1.0).is_err());
    }

    #[test]
    fn potential_examples() {
        assert_eq!(law(1.0, 2.0).potential(2.0).unwrap(), 2.0);
        assert_eq!(law(2.5, 1.4).potential(1.0).unwrap(), 0.0);
        assert!(PressureLaw::new(1.0, 1.0).is_err());
    }

    #[test]
    fn potential_identity_by_finite_differences() {
        for &gamma in &[1.4, 2.0, 3.0] {
            let l = law(1.3, gamma);
            for &rho in &[0.5, 1.0, 3.0] {
                let lhs = rho * fd_dpot(|x| l.pot(x), rho) - l.pot(rho);
                let p = l.p(rho);
                assert!(((lhs - p) / p).abs() < 1e-8, "gamma {gamma} rho {rho}");
            }
        }
    }

    #[test]
    fn artificial_pressure_examples() {
        let plain = law(1.0, 2.0);
        let zero = PressureLaw::with_artificial(1.0, 2.0, 0.0, 6.0).unwrap();
        assert_eq!(
            zero.pressure_delta(1.7).unwrap(),
            plain.pressure(1.7).unwrap()
        );
        assert_eq!(
            zero.potential_delta(1.7).unwrap(),
            plain.potential(1.7).unwrap()
        );

        let l = PressureLaw::<f64>::with_artificial(1.0, 2.0, 0.1, 6.0).unwrap();
        assert!((l.pressure_delta(1.0).unwrap() - 1.2).abs() < 1e-15);
        for &rho in &[0.3, 1.0, 2.2] {
            let lhs = rho * fd_dpot(|x| l.pot_delta(x), rho) - l.pot_delta(rho);
            let p = l.p_delta(rho);
            assert!(((lhs - p) / p).abs() < 1e-8);
        }
        assert_eq!(l.potential_delta(0.0).unwrap(), 0.0);
        assert!(PressureLaw::with_artificial(1.0, 2.0, 0.1, 4.0).is_err());
    }

    #[test]
    fn relative_h_examples() {
        let l = law(1.0, 2.0);
        assert_eq!(l.relative_h(3.0, 1.0).unwrap(), 4.0);
        for &r in &[0.1, 1.0, 7.0] {
            assert_eq!(l.relative_h(r, r).unwrap(), 0.0);
        }
        assert!(l.relative_h(1.0, 0.0).is_err());
        // Taylor branch agrees with the exact quadratic for γ = 2
        let rho = 1.0 + 1e-8;
        let d = rho - 1.0;
        assert!((l.relative_h(rho, 1.0).unwrap() - d * d).abs() < 1e-12 * d * d);
    }

    #[test]
    fn relative_h_lower_bound_by_grid_search() {
        for &gamma in &[1.4, 2.0, 3.0] {
            let l = law(1.0, gamma);
            let fit = fit_h_lower_bound(&l, 0.5, 81);
            // independent bound: H = ½P″(ξ)(ρ−r)² for ξ in the box
            let p2_min = [0.5f64, 2.0]
                .iter()
                .map(|&x| l.d2pot(x))
                .fold(f64::INFINITY, f64::min);
            assert!(fit.c_near >= 0.5 * p2_min - 1e-9, "gamma {gamma}: {fit:?}");
            assert!(fit.c_far > 0.0);
        }
    }

    #[test]
    fn stress_examples() {
        let s = Shape::new(&[8, 8]).unwrap();
        let visc = Viscosity::new(0.3, 0.7).unwrap();
        let zero = TensorField::<f64>::zeros(s);
        assert_eq!(stress(&visc, &zero).max_abs(), 0.0);

        let shear = TensorField::constant(s, &[0.0, 1.0, 0.0, 0.0]);
        let out = stress(&visc, &shear);
        assert_eq!(out.at(3), [[0.0, 0.3], [0.3, 0.0]]);
        assert!((visc.eta(2) - 0.7).abs() < 1e-15);
        assert!(Viscosity::new(0.0, 1.0).is_err());
    }

    #[test]
    fn gamma_law_identity_and_convexity() {
        for &gamma in &[1.4, 2.0, 3.0] {
            let l = law(0.7, gamma);
            for i in 0..200 {
                let rho = 0.1 + 9.9 * i as f64 / 199.0;
                let lhs = l.p(rho);
                let rhs = (gamma - 1.0) * l.pot(rho) + 0.7 * rho;
                assert!(((lhs - rhs) / lhs).abs() < 1e-12);
                let h = 1e-3;
                assert!(l.pot(rho + h) - 2.0 * l.pot(rho) + l.pot(rho - h) >= 0.0);
            }
        }
    }

    #[test]
    fn stress_trace_and_dissipation_sign() {
        let s = Shape::new(&[8, 8]).unwrap();
        let mut gen = crate::noise::CounterNormals::new(3, 0);
        let visc = Viscosity::new(0.4, 0.1).unwrap();
        for trial in 0..20 {
            let mut g = TensorField::<f64>::zeros(s);
            for (i, c) in g.components_mut().iter_mut().enumerate() {
                gen.fill((trial * 4 + i) as u64 * 64, c);
            }
            let st = stress(&visc, &g);
            let tr = st.trace();
            let div = g.trace();
            for c in 0..s.len() {
                assert!((tr.values()[c] - 2.0 * 0.1 * div.values()[c]).abs() < 1e-12);
            }
            assert!(viscous_dissipation(&visc, &g).min() >= -1e-14);
        }
    }
}
