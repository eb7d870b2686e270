//! Smooth initial data families.

use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, VectorField};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    /// `ρ ≡ 1`, `m ≡ 0`.
    Rest,
    /// One Fourier mode in density and momentum.
    Wave,
    /// Taylor–Green momentum on a uniform density (2D only).
    TaylorGreen,
}

impl InitKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rest" => Some(Self::Rest),
            "wave" => Some(Self::Wave),
            "taylor_green" => Some(Self::TaylorGreen),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rest => "rest",
            Self::Wave => "wave",
            Self::TaylorGreen => "taylor_green",
        }
    }
}

/// Initial data plus the replica perturbation that seeds the Young measure.
///
/// Replica `j` of `R` adds `perturb·sin(x₀ + 2πj/R)` to the relative density
/// and `perturb·cos(x₀ + 2πj/R)` to the first momentum component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitSpec {
    pub kind: InitKind,
    pub rho_amp: f64,
    pub mom_amp: f64,
    pub mode: usize,
    pub perturb: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            kind: InitKind::Wave,
            rho_amp: 0.1,
            mom_amp: 0.1,
            mode: 1,
            perturb: 0.0,
        }
    }
}

/// `(sin x cos y, −cos x sin y)`, `‖∇v‖_∞ = 1`.
pub fn taylor_green<T: Real>(grid: &Grid<T>, amp: f64) -> Result<VectorField<T>> {
    if grid.dim() != 2 {
        return Err(Error::InvalidParameter(
            "Taylor–Green data needs a 2D grid".into(),
        ));
    }
    Ok(VectorField::from_fn(grid.shape(), |x, o| {
        o[0] = amp * x[0].sin() * x[1].cos();
        o[1] = -amp * x[0].cos() * x[1].sin();
    }))
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.mode == 0 && self.kind == InitKind::Wave {
            return Err(Error::InvalidParameter(
                "wave mode must be at least 1".into(),
            ));
        }
        if self.rho_amp.abs() + self.perturb.abs() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "density amplitude {} plus perturbation {} would allow vacuum",
                self.rho_amp, self.perturb
            )));
        }
        Ok(())
    }

    pub fn build<T: Real>(
        &self,
        grid: &Grid<T>,
        replica: usize,
        replicas: usize,
    ) -> Result<State<T>> {
        self.validate()?;
        let shape = grid.shape();
        let dim = shape.dim();
        let k = self.mode as f64;
        let (ra, ma) = (self.rho_amp, self.mom_amp);
        let phase = std::f64::consts::TAU * replica as f64 / replicas.max(1) as f64;
        let pert = self.perturb;
        let base_rho = |x: &[f64]| match self.kind {
            InitKind::Rest => 1.0,
            InitKind::Wave => {
                let y = if dim == 2 { (k * x[1]).cos() } else { 1.0 };
                1.0 + ra * (k * x[0]).sin() * y
            }
            InitKind::TaylorGreen => 1.0 + ra * (x[0].cos() + x[1].cos()) * 0.5,
        };
        let rho =
            ScalarField::from_fn(shape, |x| base_rho(x) * (1.0 + pert * (x[0] + phase).sin()));
        let mut mom = match self.kind {
            InitKind::Rest => VectorField::zeros(shape),
            InitKind::Wave => VectorField::from_fn(shape, |x, o| {
                o[0] = ma * (k * x[0]).cos();
                if dim == 2 {
                    o[1] = ma * (k * x[1]).sin();
                }
            }),
            InitKind::TaylorGreen => taylor_green(grid, ma)?,
        };
        if pert != 0.0 {
            let p = VectorField::from_fn(shape, |x, o| o[0] = pert * (x[0] + phase).cos());
            mom.add_scaled(T::one(), &p);
        }
        State::new(rho, mom, T::zero())
    }
}
