//! Monte Carlo ensembles, empirical Young measures and the oscillation
//! defect estimators.
//!
//! An ensemble is `paths × replicas` members. Replicas of one path share the
//! Wiener realisation and differ only in their initial data, so the replicas
//! of a path form the empirical Young measure of that realisation.

use crate::constitutive::PressureLaw;
use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::field::{ScalarField, Shape, TensorField, VectorField};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct Ensemble<T> {
    pub members: Vec<State<T>>,
    pub paths: usize,
    pub replicas: usize,
    pub seed: u64,
}

impl<T: Real> Ensemble<T> {
    pub fn new(members: Vec<State<T>>, paths: usize, replicas: usize, seed: u64) -> Result<Self> {
        if paths == 0 || replicas == 0 || members.len() != paths * replicas {
            return Err(Error::InvalidParameter(format!(
                "ensemble of {} members cannot be split into {paths} paths × {replicas} replicas",
                members.len()
            )));
        }
        let shape = members[0].rho.shape();
        if let Some(bad) = members.iter().find(|m| m.rho.shape() != shape) {
            return Err(Error::ShapeMismatch {
                expected: shape.to_string(),
                found: bad.rho.shape().to_string(),
            });
        }
        Ok(Self {
            members,
            paths,
            replicas,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn path_members(&self, path: usize) -> &[State<T>] {
        &self.members[path * self.replicas..(path + 1) * self.replicas]
    }

    /// Young measure of one Wiener realisation.
    pub fn young_measure(&self, path: usize) -> YoungMeasure<'_, T> {
        YoungMeasure::build(self.path_members(path).iter().collect())
            .expect("ensemble members share one grid")
    }
}

/// Scalar observable `F(ρ, m)` with declared growth exponents.
pub struct Observable<'f, T> {
    pub name: &'static str,
    pub growth_rho: f64,
    pub growth_m: f64,
    eval: Box<dyn Fn(T, &[T]) -> T + Sync + 'f>,
}

impl<'f, T: Real> Observable<'f, T> {
    pub fn new(
        name: &'static str,
        growth_rho: f64,
        growth_m: f64,
        eval: impl Fn(T, &[T]) -> T + Sync + 'f,
    ) -> Self {
        Self {
            name,
            growth_rho,
            growth_m,
            eval: Box::new(eval),
        }
    }

    #[inline]
    pub fn eval(&self, rho: T, m: &[T]) -> T {
        (self.eval)(rho, m)
    }

    /// Growth within `ρ^γ` and `|m|^{2γ/(γ+1)}`.
    pub fn limit_consistent(&self, gamma: f64) -> bool {
        self.growth_rho <= gamma && self.growth_m <= 2.0 * gamma / (gamma + 1.0)
    }

    pub fn density() -> Self {
        Self::new("rho", 1.0, 0.0, |r, _| r)
    }

    pub fn momentum(d: usize) -> Self {
        Self::new("m", 0.0, 1.0, move |_, m| m[d])
    }

    /// `|m|²/ρ`, extended by `0` at `(0, 0)`.
    pub fn kinetic_twice() -> Self {
        Self::new("|m|^2/rho", 0.0, 2.0, |r, m| kinetic(r, m) * T::lit(2.0))
    }

    /// `½|m|²/ρ + P_δ(ρ)`.
    pub fn energy(law: PressureLaw<T>) -> Self {
        Self::new("energy", law.gamma().as_f64(), 2.0, move |r, m| {
            kinetic(r, m) + law.pot_delta(r)
        })
    }
}

#[inline]
fn kinetic<T: Real>(rho: T, m: &[T]) -> T {
    let mm: T = m.iter().map(|&x| x * x).sum();
    if mm == T::zero() {
        T::zero()
    } else {
        T::lit(0.5) * mm / rho
    }
}

/// Uniformly weighted atoms `(ρ_i, m_i)` per cell.
#[derive(Clone, Debug)]
pub struct YoungMeasure<'a, T> {
    shape: Shape,
    atoms: Vec<&'a State<T>>,
}

impl<'a, T: Real> YoungMeasure<'a, T> {
    pub fn build(atoms: Vec<&'a State<T>>) -> Result<Self> {
        let first = atoms.first().ok_or_else(|| {
            Error::InsufficientData("Young measure needs at least one atom".into())
        })?;
        let shape = first.rho.shape();
        for a in &atoms {
            if a.rho.shape() != shape {
                return Err(Error::ShapeMismatch {
                    expected: shape.to_string(),
                    found: a.rho.shape().to_string(),
                });
            }
            if let Some(c) = a.rho.values().iter().position(|&r| r < T::zero()) {
                return Err(Error::Domain {
                    what: "atom density",
                    value: a.rho.values()[c].as_f64(),
                    domain: "ρ ≥ 0",
                });
            }
        }
        Ok(Self { shape, atoms })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[&'a State<T>] {
        &self.atoms
    }

    fn weight(&self) -> T {
        T::one() / T::from_usize_lossy(self.atoms.len())
    }

    #[inline]
    fn atom(&self, i: usize, cell: usize) -> (T, [T; 2]) {
        let a = self.atoms[i];
        (a.rho.values()[cell], a.mom.at(cell))
    }

    /// `⟨ν; 1⟩` per cell.
    pub fn total_weight(&self) -> ScalarField<T> {
        let w = self.weight();
        let mut out = ScalarField::zeros(self.shape);
        for v in out.values_mut() {
            for _ in 0..self.atoms.len() {
                *v += w;
            }
        }
        out
    }

    /// `⟨ν; F⟩` per cell.
    pub fn expect(&self, f: &Observable<'_, T>) -> Result<ScalarField<T>> {
        let dim = self.shape.dim();
        let w = self.weight();
        let mut out = ScalarField::zeros(self.shape);
        for (cell, o) in out.values_mut().iter_mut().enumerate() {
            let mut acc = T::zero();
            for i in 0..self.atoms.len() {
                let (r, m) = self.atom(i, cell);
                let v = f.eval(r, &m[..dim]);
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        what: format!("observable {} on atom {i}", f.name),
                        index: cell,
                    });
                }
                acc += v;
            }
            *o = acc * w;
        }
        Ok(out)
    }

    /// Barycentre `(⟨ν; ρ⟩, ⟨ν; m⟩)`.
    pub fn barycentre(&self) -> (ScalarField<T>, VectorField<T>) {
        let w = self.weight();
        let mut rho = ScalarField::zeros(self.shape);
        let mut mom = VectorField::zeros(self.shape);
        for a in &self.atoms {
            rho.add_scaled(w, &a.rho);
            mom.add_scaled(w, &a.mom);
        }
        (rho, mom)
    }

    /// `⟨ν; m/ρ⟩`.
    pub fn mean_velocity(&self) -> VectorField<T> {
        let w = self.weight();
        let mut u = VectorField::zeros(self.shape);
        for a in &self.atoms {
            u.add_scaled(w, &a.velocity());
        }
        u
    }

    /// `⟨ν; F⟩ − F(⟨ν; ρ⟩, ⟨ν; m⟩)`; a negative value below `−1e−12`
    /// (relative to the magnitude of `⟨ν; F⟩`) is a convexity violation.
    pub fn jensen_gap(&self, f: &Observable<'_, T>) -> Result<ScalarField<T>> {
        let dim = self.shape.dim();
        let mean = self.expect(f)?;
        let (rb, mb) = self.barycentre();
        let mut out = ScalarField::zeros(self.shape);
        for cell in 0..self.shape.len() {
            let q = mb.at(cell);
            let gap = mean.values()[cell] - f.eval(rb.values()[cell], &q[..dim]);
            let tol = T::lit(1e-12) * T::one().max(mean.values()[cell].abs());
            if gap < -tol {
                return Err(Error::Convexity {
                    what: f.name,
                    cell,
                    value: gap.as_f64(),
                });
            }
            out.values_mut()[cell] = gap.max(T::zero());
        }
        Ok(out)
    }

    /// Oscillation part of the energy defect, pointwise and integrated.
    pub fn dissipation_defect(&self, law: &PressureLaw<T>) -> Result<(ScalarField<T>, T)> {
        if self.atoms.len() == 1 {
            return Ok((ScalarField::zeros(self.shape), T::zero()));
        }
        let field = self.jensen_gap(&Observable::energy(*law))?;
        let total = field.integral();
        Ok((field, total))
    }

    /// `⟨ν; m⊗m/ρ + p(ρ)I⟩ − (m̄⊗m̄/ρ̄ + p(ρ̄)I)`.
    pub fn momentum_defect(&self, law: &PressureLaw<T>) -> MomentumDefect<T> {
        let dim = self.shape.dim();
        let w = self.weight();
        let (rb, mb) = self.barycentre();
        let mut kinetic_t = TensorField::zeros(self.shape);
        let mut pressure = ScalarField::zeros(self.shape);
        for cell in 0..self.shape.len() {
            let mut acc = [[T::zero(); 2]; 2];
            let mut p = T::zero();
            for i in 0..self.atoms.len() {
                let (r, m) = self.atom(i, cell);
                if r > T::zero() {
                    for a in 0..dim {
                        for b in 0..dim {
                            acc[a][b] += m[a] * m[b] / r;
                        }
                    }
                }
                p += law.p_delta(r);
            }
            let r0 = rb.values()[cell];
            let m0 = mb.at(cell);
            for a in 0..dim {
                for b in 0..dim {
                    let bary = if r0 > T::zero() {
                        m0[a] * m0[b] / r0
                    } else {
                        T::zero()
                    };
                    kinetic_t.get_mut(a, b)[cell] = acc[a][b] * w - bary;
                }
            }
            pressure.values_mut()[cell] = p * w - law.p_delta(r0);
        }
        MomentumDefect {
            kinetic: kinetic_t,
            pressure,
        }
    }

    /// Pointwise `‖μ_m‖ ≤ c·(energy defect)` with the nuclear norm and
    /// `c = max(2, N(γ−1))`; `0/0` passes.
    pub fn defect_domination_audit(&self, law: &PressureLaw<T>) -> Result<DominationReport> {
        let n = self.shape.dim() as f64;
        let bound = 2f64.max(n * (law.gamma().as_f64() - 1.0));
        let md = self.momentum_defect(law);
        let energy = if self.atoms.len() == 1 {
            ScalarField::zeros(self.shape)
        } else {
            self.jensen_gap(&Observable::energy(*law))?
        };
        let mut max_ratio = 0f64;
        let mut violations = 0;
        for cell in 0..self.shape.len() {
            let norm = md.nuclear_norm(cell);
            let e = energy.values()[cell].as_f64();
            let excess = norm - bound * e;
            if excess > 1e-9 {
                violations += 1;
            }
            if e > 0.0 {
                max_ratio = max_ratio.max(norm / e);
            } else if norm > 1e-9 {
                max_ratio = f64::INFINITY;
            }
        }
        Ok(DominationReport {
            max_ratio,
            bound,
            violations,
        })
    }
}

#[derive(Clone, Debug)]
pub struct MomentumDefect<T> {
    /// Convective part, positive semidefinite.
    pub kinetic: TensorField<T>,
    /// Isotropic pressure part.
    pub pressure: ScalarField<T>,
}

impl<T: Real> MomentumDefect<T> {
    pub fn total(&self) -> TensorField<T> {
        let mut t = self.kinetic.clone();
        for d in 0..t.dim() {
            for (v, &p) in t.get_mut(d, d).iter_mut().zip(self.pressure.values()) {
                *v += p;
            }
        }
        t
    }

    pub fn trace(&self) -> ScalarField<T> {
        self.total().trace()
    }

    /// Sum of absolute eigenvalues of the symmetric total defect at one cell.
    pub fn nuclear_norm(&self, cell: usize) -> f64 {
        let dim = self.kinetic.dim();
        let p = self.pressure.values()[cell].as_f64();
        let m = self.kinetic.at(cell);
        if dim == 1 {
            return (m[0][0].as_f64() + p).abs();
        }
        let a = m[0][0].as_f64() + p;
        let d = m[1][1].as_f64() + p;
        let b = 0.5 * (m[0][1].as_f64() + m[1][0].as_f64());
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d).powi(2) + b * b).sqrt();
        (mid + rad).abs() + (mid - rad).abs()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DominationReport {
    pub max_ratio: f64,
    pub bound: f64,
    pub violations: usize,
}

impl DominationReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}
