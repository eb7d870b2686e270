//! Truncated cylindrical Wiener process and the diffusion coefficients `G_k`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::field::{ScalarField, Shape, VectorField};
use crate::scalar::Real;
use crate::stats;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard normal draws addressed by `(seed, stream, index)`.
///
/// Draw `i` of a stream depends only on the key, never on how many other
/// draws were taken before it.
#[derive(Clone, Debug)]
pub struct CounterNormals {
    rng: ChaCha8Rng,
}

impl CounterNormals {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed));
        rng.set_stream(splitmix(stream ^ 0x5851_f42d_4c95_7f2d));
        Self { rng }
    }

    /// Stream id for a pair of indices.
    pub fn stream_id(a: u64, b: u64) -> u64 {
        splitmix(splitmix(a).wrapping_add(b))
    }

    fn uniform(&mut self) -> f64 {
        // 53 random bits in (0, 1]
        ((self.rng.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64
    }

    /// Fills `out` with draws `start, start + 1, ...` of this stream.
    pub fn fill(&mut self, start: u64, out: &mut [f64]) {
        self.rng.set_word_pos(start as u128 * 4);
        for o in out.iter_mut() {
            let u1 = self.uniform();
            let u2 = self.uniform();
            *o = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }

    pub fn draw(&mut self, index: u64) -> f64 {
        let mut x = [0.0];
        self.fill(index, &mut x);
        x[0]
    }
}

/// One realisation of the truncated Wiener process.
///
/// Increments live on a base step `base_dt`; an increment over `2^j` base
/// steps is the exact sum of the base increments it covers, so runs at
/// different step sizes see the same Brownian path.
#[derive(Clone, Debug)]
pub struct WienerPath {
    seed: u64,
    member: u64,
    base_dt: f64,
}

impl WienerPath {
    pub fn new(seed: u64, member: u64, base_dt: f64) -> Result<Self> {
        if !(base_dt > 0.0) || !base_dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Wiener base step must be positive, got {base_dt}"
            )));
        }
        Ok(Self {
            seed,
            member,
            base_dt,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn member(&self) -> u64 {
        self.member
    }

    pub fn base_dt(&self) -> f64 {
        self.base_dt
    }

    /// Number of base steps in one step of size `dt`.
    pub fn level_factor(&self, dt: f64) -> Result<u64> {
        let ratio = dt / self.base_dt;
        let r = ratio.round();
        if r < 1.0 || (ratio - r).abs() > 1e-9 * r || !(r as u64).is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "step {dt} is not a power-of-two multiple of the Wiener base step {}",
                self.base_dt
            )));
        }
        Ok(r as u64)
    }

    /// `ΔW_k` for modes `0..modes` over step `step` of size `dt`.
    pub fn sample_increments(&self, step: u64, dt: f64, modes: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; modes];
        if dt == 0.0 || modes == 0 {
            return Ok(out);
        }
        let factor = self.level_factor(dt)?;
        let mut buf = vec![0.0; factor as usize];
        let scale = self.base_dt.sqrt();
        for (k, o) in out.iter_mut().enumerate() {
            let mut g =
                CounterNormals::new(self.seed, CounterNormals::stream_id(self.member, k as u64));
            g.fill(step * factor, &mut buf);
            *o = scale * buf.iter().sum::<f64>();
        }
        Ok(out)
    }

    /// `W_k(t_n)` at every step boundary `n = 0..=steps`.
    pub fn cumulative(&self, steps: u64, dt: f64, mode: usize) -> Result<Vec<f64>> {
        let mut w = Vec::with_capacity(steps as usize + 1);
        let mut acc = 0.0;
        w.push(acc);
        for n in 0..steps {
            acc += self.sample_increments(n, dt, mode + 1)?[mode];
            w.push(acc);
        }
        Ok(w)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseKind<T> {
    /// `G_k(ρ, m) = ρK_k e_{k mod N} + m L_k`.
    Affine,
    /// `G_k(x, ρ, q) = a_k(x) ρ/(1+ρ) e_{k mod N} + b_k(x) q/√(1+|q|²)`.
    General {
        a: Vec<ScalarField<T>>,
        b: Vec<ScalarField<T>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel<T> {
    kind: NoiseKind<T>,
    k: Vec<T>,
    l: Vec<T>,
    tail_mass: f64,
}

impl<T: Real> NoiseModel<T> {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::Affine,
            k: Vec::new(),
            l: Vec::new(),
            tail_mass: 0.0,
        }
    }

    pub fn affine(k: Vec<T>, l: Vec<T>) -> Result<Self> {
        if k.len() != l.len() {
            return Err(Error::InvalidParameter(format!(
                "affine noise needs as many K as L coefficients ({} vs {})",
                k.len(),
                l.len()
            )));
        }
        if let Some(v) = k.iter().chain(&l).find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite noise coefficient {v}"
            )));
        }
        Ok(Self {
            kind: NoiseKind::Affine,
            k,
            l,
            tail_mass: 0.0,
        })
    }

    /// Tabulated, x-dependent saturating coefficients with
    /// `a_k(x) = K_k(1 + ½ sin(x₀ + k))` and `b_k ≡ L_k`.
    pub fn general(shape: Shape, k: Vec<T>, l: Vec<T>) -> Result<Self> {
        let base = Self::affine(k, l)?;
        let a = base
            .k
            .iter()
            .enumerate()
            .map(|(i, &kk)| {
                let kk = kk.as_f64();
                ScalarField::from_fn(shape, move |x| kk * (1.0 + 0.5 * (x[0] + i as f64).sin()))
            })
            .collect();
        let b = base
            .l
            .iter()
            .map(|&ll| ScalarField::constant(shape, ll))
            .collect();
        Ok(Self {
            kind: NoiseKind::General { a, b },
            ..base
        })
    }

    /// Keeps the first `modes` modes and records `Σ_{k>K} α_k` of the rest.
    pub fn truncated(mut self, modes: usize) -> Self {
        if modes < self.modes() {
            let alphas = self.lipschitz_constants();
            self.tail_mass += alphas[modes..].iter().map(|a| a.as_f64()).sum::<f64>();
            self.k.truncate(modes);
            self.l.truncate(modes);
            if let NoiseKind::General { a, b } = &mut self.kind {
                a.truncate(modes);
                b.truncate(modes);
            }
        }
        self
    }

    pub fn kind(&self) -> &NoiseKind<T> {
        &self.kind
    }

    pub fn is_affine(&self) -> bool {
        matches!(self.kind, NoiseKind::Affine)
    }

    pub fn modes(&self) -> usize {
        self.k.len()
    }

    pub fn k_coeffs(&self) -> &[T] {
        &self.k
    }

    pub fn l_coeffs(&self) -> &[T] {
        &self.l
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Declared Lipschitz constants `α_k` in `(ρ, q)`.
    pub fn lipschitz_constants(&self) -> Vec<T> {
        match &self.kind {
            NoiseKind::Affine => self
                .k
                .iter()
                .zip(&self.l)
                .map(|(k, l)| k.abs() + l.abs())
                .collect(),
            NoiseKind::General { a, b } => a
                .iter()
                .zip(b)
                .map(|(a, b)| a.max_abs() + b.max_abs())
                .collect(),
        }
    }

    pub fn alpha_sum(&self) -> T {
        self.lipschitz_constants().into_iter().sum()
    }

    fn check_mode(&self, k: usize) -> Result<()> {
        if k >= self.modes() {
            return Err(Error::ModeOutOfRange {
                mode: k,
                modes: self.modes(),
            });
        }
        Ok(())
    }

    /// `G_k` at one cell.
    #[inline]
    pub fn g_point(&self, k: usize, cell: usize, dim: usize, rho: T, q: [T; 2]) -> [T; 2] {
        let dir = k % dim;
        let mut out = [T::zero(); 2];
        match &self.kind {
            NoiseKind::Affine => {
                for d in 0..dim {
                    out[d] = q[d] * self.l[k];
                }
                out[dir] += rho * self.k[k];
            }
            NoiseKind::General { a, b } => {
                let qq = (0..dim).map(|d| q[d] * q[d]).sum::<T>();
                let sat = b[k].values()[cell] / (T::one() + qq).sqrt();
                for d in 0..dim {
                    out[d] = q[d] * sat;
                }
                out[dir] += a[k].values()[cell] * rho / (T::one() + rho);
            }
        }
        out
    }

    /// The field `G_k(ρ, m)`.
    pub fn apply_g(
        &self,
        rho: &ScalarField<T>,
        m: &VectorField<T>,
        k: usize,
    ) -> Result<VectorField<T>> {
        self.check_mode(k)?;
        check_states(rho, m)?;
        let shape = rho.shape();
        let dim = shape.dim();
        let mut out = VectorField::zeros(shape);
        for c in 0..shape.len() {
            let g = self.g_point(k, c, dim, rho.values()[c], m.at(c));
            for d in 0..dim {
                out.component_mut(d)[c] = g[d];
            }
        }
        Ok(out)
    }

    /// `Σ_k |G_k|²/ρ` at one cell, with `u = m/max(ρ, floor)` for the affine
    /// kind.
    #[inline]
    pub fn ito_point(&self, cell: usize, dim: usize, rho: T, q: [T; 2], floor: T) -> T {
        let mut acc = T::zero();
        match &self.kind {
            NoiseKind::Affine => {
                let rr = rho.max(floor);
                for k in 0..self.modes() {
                    let dir = k % dim;
                    let mut s = T::zero();
                    for d in 0..dim {
                        let mut w = q[d] / rr * self.l[k];
                        if d == dir {
                            w += self.k[k];
                        }
                        s += w * w;
                    }
                    acc += rho * s;
                }
            }
            NoiseKind::General { .. } => {
                if rho == T::zero() {
                    return T::zero();
                }
                for k in 0..self.modes() {
                    let g = self.g_point(k, cell, dim, rho, q);
                    acc += (g[0] * g[0] + g[1] * g[1]) / rho.max(floor);
                }
            }
        }
        acc
    }

    /// Pointwise Itô correction density `Σ_k |G_k(ρ, m)|²/ρ`.
    pub fn ito_correction_density(
        &self,
        rho: &ScalarField<T>,
        m: &VectorField<T>,
        floor: T,
    ) -> Result<ScalarField<T>> {
        check_states(rho, m)?;
        let shape = rho.shape();
        let dim = shape.dim();
        let mut out = ScalarField::zeros(shape);
        for c in 0..shape.len() {
            let r = rho.values()[c];
            let q = m.at(c);
            if r < floor && (q[0] != T::zero() || q[1] != T::zero()) {
                return Err(Error::VacuumMomentum {
                    cell: c,
                    momentum: (q[0] * q[0] + q[1] * q[1]).sqrt().as_f64(),
                });
            }
            out.values_mut()[c] = self.ito_point(c, dim, r, q, floor);
        }
        Ok(out)
    }

    /// Counts violations of `|G_k(ρ,q) − G_k(ρ′,q′)| ≤ α_k(|ρ−ρ′| + |q−q′|)`
    /// on random pairs drawn from `ρ ∈ [0, 10]`, `|q_i| ≤ 10`.
    pub fn lipschitz_audit(&self, shape: Shape, pairs: usize, seed: u64) -> usize {
        let dim = shape.dim();
        let alphas = self.lipschitz_constants();
        let mut gen = CounterNormals::new(seed, 0x11b);
        let mut draws = vec![0.0; 7 * pairs];
        gen.fill(0, &mut draws);
        let squash = |z: f64| 0.5 * (1.0 + (z / 2f64.sqrt()).tanh());
        let mut violations = 0;
        for p in 0..pairs {
            let z = &draws[7 * p..7 * p + 7];
            let cell = (squash(z[6]) * shape.len() as f64) as usize % shape.len();
            let r1 = T::lit(10.0 * squash(z[0]));
            let r2 = T::lit(10.0 * squash(z[1]));
            let q1 = [T::lit(10.0 * z[2].tanh()), T::lit(10.0 * z[3].tanh())];
            let q2 = [T::lit(10.0 * z[4].tanh()), T::lit(10.0 * z[5].tanh())];
            let dq = (0..dim).map(|d| (q1[d] - q2[d]).powi(2)).sum::<T>().sqrt();
            for k in 0..self.modes() {
                let g1 = self.g_point(k, cell, dim, r1, q1);
                let g2 = self.g_point(k, cell, dim, r2, q2);
                let dg = (0..dim).map(|d| (g1[d] - g2[d]).powi(2)).sum::<T>().sqrt();
                let bound = alphas[k] * ((r1 - r2).abs() + dq);
                if dg > bound * (T::one() + T::lit(1e-12)) + T::lit(1e-14) {
                    violations += 1;
                }
            }
        }
        violations
    }
}

fn check_states<T: Real>(rho: &ScalarField<T>, m: &VectorField<T>) -> Result<()> {
    if rho.shape() != m.shape() {
        return Err(Error::ShapeMismatch {
            expected: rho.shape().to_string(),
            found: m.shape().to_string(),
        });
    }
    if let Some(c) = rho.values().iter().position(|&r| r < T::zero()) {
        return Err(Error::Domain {
            what: "density",
            value: rho.values()[c].as_f64(),
            domain: "ρ ≥ 0",
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub struct IsometryReport {
    pub variance: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares the sample variance of `Σ_k ∫ g_k dW_k` over `paths`
/// realisations with `Σ_k ∫ g_k² dt`, allowing five standard errors.
pub fn ito_isometry_audit(
    g: impl Fn(usize, f64) -> f64,
    modes: usize,
    dt: f64,
    t_end: f64,
    paths: usize,
    seed: u64,
) -> Result<IsometryReport> {
    if paths < 2 {
        return Err(Error::InsufficientData(
            "isometry audit needs at least two paths".into(),
        ));
    }
    let steps = (t_end / dt).round() as u64;
    let mut expected = 0.0;
    for n in 0..steps {
        let t = n as f64 * dt;
        for k in 0..modes {
            expected += g(k, t).powi(2) * dt;
        }
    }
    let mut samples = Vec::with_capacity(paths);
    for p in 0..paths {
        let w = WienerPath::new(seed, p as u64, dt)?;
        let mut acc = 0.0;
        for n in 0..steps {
            let t = n as f64 * dt;
            let dw = w.sample_increments(n, dt, modes)?;
            for (k, dwk) in dw.iter().enumerate() {
                acc += g(k, t) * dwk;
            }
        }
        samples.push(acc);
    }
    let variance = stats::variance(&samples);
    let tolerance = 5.0 * (2.0 / (paths - 1) as f64).sqrt() * expected;
    Ok(IsometryReport {
        variance,
        expected,
        tolerance,
        pass: (variance - expected).abs() <= tolerance,
    })
}
