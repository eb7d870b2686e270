//! Run configuration: a TOML document with dotted sections, validated by
//! hand so that every error names the offending key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::constitutive::{PressureLaw, Viscosity};
use crate::dynamics::{Model, StepperConfig};
use crate::error::{Error, Result};
use crate::init::{InitKind, InitSpec};
use crate::noise::NoiseModel;
use crate::relative::WeakStrongConfig;
use crate::sweep::{Scaling, SweepConfig};

pub const FORMAT_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSection {
    pub a: f64,
    pub gamma: f64,
    pub delta: f64,
    pub gamma_art: f64,
    pub nu: f64,
    pub lambda: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepperSection {
    pub dt: Option<f64>,
    pub cfl: f64,
    pub rho_floor: f64,
    pub t_end: f64,
    pub sample_every: u64,
    pub damping_bound: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKindName {
    None,
    Affine,
    General,
}

impl NoiseKindName {
    fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Affine => "affine",
            Self::General => "general",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSection {
    pub kind: NoiseKindName,
    pub modes: usize,
    pub k: Vec<f64>,
    pub l: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakStrongSection {
    pub refine: usize,
    pub grad_threshold: f64,
    /// Replica perturbation applied to the members only.
    pub perturb: f64,
    pub bias: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSection {
    pub eps: Vec<f64>,
    pub nu: Scaling,
    pub lambda: Scaling,
    pub delta_data: Scaling,
    pub samples: usize,
    pub grad_threshold: f64,
    pub v0_amp: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifySection {
    /// Adds a concave observable to the Jensen check.
    pub inject_concave: bool,
    /// Snapshot file to load as part of the suite.
    pub snapshot: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub sizes: Vec<usize>,
    pub model: ModelSection,
    pub stepper: StepperSection,
    pub noise: NoiseSection,
    pub paths: usize,
    pub replicas: usize,
    pub init: InitSpec,
    /// Snapshot every this many samples; 0 disables.
    pub snapshot_every: u64,
    pub weak_strong: WeakStrongSection,
    pub sweep: SweepSection,
    pub verify: VerifySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output: PathBuf::from("out"),
            sizes: vec![64],
            model: ModelSection {
                a: 1.0,
                gamma: 2.0,
                delta: 0.0,
                gamma_art: 6.0,
                nu: 0.05,
                lambda: 0.05,
                eps: 1.0,
            },
            stepper: StepperSection {
                dt: None,
                cfl: 0.4,
                rho_floor: 1e-8,
                t_end: 0.1,
                sample_every: 10,
                damping_bound: false,
            },
            noise: NoiseSection {
                kind: NoiseKindName::Affine,
                modes: 1,
                k: vec![0.1],
                l: vec![0.05],
            },
            paths: 8,
            replicas: 2,
            init: InitSpec::default(),
            snapshot_every: 0,
            weak_strong: WeakStrongSection {
                refine: 2,
                grad_threshold: 1e3,
                perturb: 0.0,
                bias: 0.0,
            },
            sweep: SweepSection {
                eps: vec![1.0, 0.5, 0.25],
                nu: Scaling::new(1.0, 2.0),
                lambda: Scaling::new(1.0, 2.0),
                delta_data: Scaling::new(1.0, 1.0),
                samples: 8,
                grad_threshold: 2.0,
                v0_amp: 1.0,
            },
            verify: VerifySection {
                inject_concave: false,
                snapshot: None,
            },
        }
    }
}

/// Flattened `dotted.key -> value` view that records which keys were read.
struct Keys {
    map: BTreeMap<String, Value>,
}

fn flatten(prefix: &str, table: &Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&path, t, out),
            other => {
                out.insert(path, other.clone());
            }
        }
    }
}

fn as_f64(path: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(
            path,
            format!("expected a number, found {}", v.type_str()),
        )),
    }
}

fn as_u64(path: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(Error::config(
            path,
            format!("expected a nonnegative integer, found {v}"),
        )),
    }
}

impl Keys {
    fn take(&mut self, path: &str) -> Option<Value> {
        self.map.remove(path)
    }

    fn f64(&mut self, path: &str, default: f64) -> Result<f64> {
        match self.take(path) {
            Some(v) => as_f64(path, &v),
            None => Ok(default),
        }
    }

    fn opt_f64(&mut self, path: &str) -> Result<Option<f64>> {
        self.take(path).map(|v| as_f64(path, &v)).transpose()
    }

    fn u64(&mut self, path: &str, default: u64) -> Result<u64> {
        match self.take(path) {
            Some(v) => as_u64(path, &v),
            None => Ok(default),
        }
    }

    fn usize(&mut self, path: &str, default: usize) -> Result<usize> {
        Ok(self.u64(path, default as u64)? as usize)
    }

    fn bool(&mut self, path: &str, default: bool) -> Result<bool> {
        match self.take(path) {
            Some(Value::Boolean(b)) => Ok(b),
            Some(v) => Err(Error::config(
                path,
                format!("expected a boolean, found {v}"),
            )),
            None => Ok(default),
        }
    }

    fn string(&mut self, path: &str) -> Result<Option<String>> {
        match self.take(path) {
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(Error::config(path, format!("expected a string, found {v}"))),
            None => Ok(None),
        }
    }

    fn f64_list(&mut self, path: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.take(path) {
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(i, v)| as_f64(&format!("{path}[{i}]"), v))
                .collect(),
            Some(v) => Err(Error::config(path, format!("expected an array, found {v}"))),
            None => Ok(default.to_vec()),
        }
    }

    fn usize_list(&mut self, path: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.take(path) {
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(i, v)| as_u64(&format!("{path}[{i}]"), v).map(|x| x as usize))
                .collect(),
            Some(v) => Err(Error::config(path, format!("expected an array, found {v}"))),
            None => Ok(default.to_vec()),
        }
    }

    fn scaling(&mut self, prefix: &str, default: Scaling) -> Result<Scaling> {
        Ok(Scaling::new(
            self.f64(&format!("{prefix}_coef"), default.coef)?,
            self.f64(&format!("{prefix}_power"), default.power)?,
        ))
    }
}

fn check(cond: bool, path: &str, message: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::config(path, message))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
        let mut map = BTreeMap::new();
        flatten("", &table, &mut map);
        let mut k = Keys { map };
        let d = Self::default();

        let seed = k.u64("seed", d.seed)?;
        let output = k.string("output")?.map(PathBuf::from).unwrap_or(d.output);
        let sizes = k.usize_list("grid.sizes", &d.sizes)?;
        let model = ModelSection {
            a: k.f64("model.a", d.model.a)?,
            gamma: k.f64("model.gamma", d.model.gamma)?,
            delta: k.f64("model.delta", d.model.delta)?,
            gamma_art: k.f64("model.Gamma", d.model.gamma_art)?,
            nu: k.f64("model.nu", d.model.nu)?,
            lambda: k.f64("model.lambda", d.model.lambda)?,
            eps: k.f64("model.eps", d.model.eps)?,
        };
        let dt = k.opt_f64("stepper.dt")?;
        let cfl = k.opt_f64("stepper.cfl")?;
        if dt.is_some() && cfl.is_some() {
            return Err(Error::config(
                "stepper.cfl",
                "give either stepper.dt or stepper.cfl, not both",
            ));
        }
        let stepper = StepperSection {
            dt,
            cfl: cfl.unwrap_or(d.stepper.cfl),
            rho_floor: k.f64("stepper.rho_floor", d.stepper.rho_floor)?,
            t_end: k.f64("stepper.t_end", d.stepper.t_end)?,
            sample_every: k.u64("stepper.sample_every", d.stepper.sample_every)?,
            damping_bound: k.bool("stepper.damping_bound", d.stepper.damping_bound)?,
        };
        let kind = match k.string("noise.kind")?.as_deref() {
            None => d.noise.kind,
            Some("none") => NoiseKindName::None,
            Some("affine") => NoiseKindName::Affine,
            Some("general") => NoiseKindName::General,
            Some(other) => {
                return Err(Error::config(
                    "noise.kind",
                    format!("unknown noise kind `{other}` (expected none, affine or general)"),
                ))
            }
        };
        let kk = k.f64_list("noise.K", &d.noise.k)?;
        let ll = k.f64_list("noise.L", &d.noise.l)?;
        let modes = k.usize("noise.modes", kk.len())?;
        let noise = NoiseSection {
            kind,
            modes,
            k: kk,
            l: ll,
        };

        let paths = k.usize("ensemble.paths", d.paths)?;
        let replicas = k.usize("ensemble.replicas", d.replicas)?;
        let init_kind = match k.string("init.kind")? {
            None => d.init.kind,
            Some(s) => InitKind::parse(&s).ok_or_else(|| {
                Error::config(
                    "init.kind",
                    format!("unknown init kind `{s}` (expected rest, wave or taylor_green)"),
                )
            })?,
        };
        let init = InitSpec {
            kind: init_kind,
            rho_amp: k.f64("init.rho_amp", d.init.rho_amp)?,
            mom_amp: k.f64("init.mom_amp", d.init.mom_amp)?,
            mode: k.usize("init.mode", d.init.mode)?,
            perturb: k.f64("init.perturb", d.init.perturb)?,
        };
        let snapshot_every = k.u64("snapshot.every", d.snapshot_every)?;
        let weak_strong = WeakStrongSection {
            refine: k.usize("weak_strong.refine", d.weak_strong.refine)?,
            grad_threshold: k.f64("weak_strong.grad_threshold", d.weak_strong.grad_threshold)?,
            perturb: k.f64("weak_strong.perturb", d.weak_strong.perturb)?,
            bias: k.f64("weak_strong.bias", d.weak_strong.bias)?,
        };
        let sweep = SweepSection {
            eps: k.f64_list("sweep.eps", &d.sweep.eps)?,
            nu: k.scaling("sweep.nu", d.sweep.nu)?,
            lambda: k.scaling("sweep.lambda", d.sweep.lambda)?,
            delta_data: k.scaling("sweep.delta", d.sweep.delta_data)?,
            samples: k.usize("sweep.samples", d.sweep.samples)?,
            grad_threshold: k.f64("sweep.grad_threshold", d.sweep.grad_threshold)?,
            v0_amp: k.f64("sweep.v0_amp", d.sweep.v0_amp)?,
        };
        let verify = VerifySection {
            inject_concave: k.bool("verify.inject_concave", d.verify.inject_concave)?,
            snapshot: k.string("verify.snapshot")?.map(PathBuf::from),
        };
        if let Some(key) = k.map.keys().next() {
            return Err(Error::config(key.clone(), "unknown key"));
        }
        let cfg = Self {
            seed,
            output,
            sizes,
            model,
            stepper,
            noise,
            paths,
            replicas,
            init,
            snapshot_every,
            weak_strong,
            sweep,
            verify,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        check(
            !self.sizes.is_empty() && self.sizes.len() <= 2,
            "grid.sizes",
            "need one or two grid sizes",
        )?;
        check(
            self.sizes.iter().all(|&n| n >= 4 && n.is_power_of_two()),
            "grid.sizes",
            "sizes must be powers of two, at least 4",
        )?;
        let m = &self.model;
        check(m.a > 0.0, "model.a", "must be positive")?;
        check(m.gamma > 1.0, "model.gamma", "must exceed 1")?;
        check(m.delta >= 0.0, "model.delta", "must be nonnegative")?;
        check(
            m.delta == 0.0 || m.gamma_art >= m.gamma.max(6.0),
            "model.Gamma",
            "must be at least max(6, gamma) when delta > 0",
        )?;
        check(m.nu > 0.0, "model.nu", "must be positive")?;
        check(m.lambda >= 0.0, "model.lambda", "must be nonnegative")?;
        check(m.eps > 0.0, "model.eps", "must be positive")?;
        let s = &self.stepper;
        if let Some(dt) = s.dt {
            check(dt > 0.0, "stepper.dt", "must be positive")?;
        }
        check(
            s.cfl > 0.0 && s.cfl <= 1.0,
            "stepper.cfl",
            "must lie in (0, 1]",
        )?;
        check(s.rho_floor > 0.0, "stepper.rho_floor", "must be positive")?;
        check(s.t_end > 0.0, "stepper.t_end", "must be positive")?;
        check(
            s.sample_every >= 1,
            "stepper.sample_every",
            "must be at least 1",
        )?;
        let n = &self.noise;
        if n.kind != NoiseKindName::None {
            check(
                n.k.len() == n.l.len(),
                "noise.L",
                "must have as many entries as noise.K",
            )?;
            check(
                n.modes <= n.k.len(),
                "noise.modes",
                "cannot exceed the number of coefficients",
            )?;
        }
        check(self.paths >= 1, "ensemble.paths", "must be at least 1")?;
        check(
            self.replicas >= 1,
            "ensemble.replicas",
            "must be at least 1",
        )?;
        check(self.init.mode >= 1, "init.mode", "must be at least 1")?;
        check(
            self.init.rho_amp.abs() + self.init.perturb.abs() < 1.0,
            "init.rho_amp",
            "|rho_amp| + |perturb| must stay below 1",
        )?;
        check(
            self.init.kind != InitKind::TaylorGreen || self.sizes.len() == 2,
            "init.kind",
            "taylor_green needs a 2D grid",
        )?;
        let w = &self.weak_strong;
        check(
            w.refine == 1 || w.refine == 2,
            "weak_strong.refine",
            "must be 1 or 2",
        )?;
        check(
            w.grad_threshold > 0.0,
            "weak_strong.grad_threshold",
            "must be positive",
        )?;
        check(
            self.init.rho_amp.abs() + w.perturb.abs() < 1.0,
            "weak_strong.perturb",
            "|rho_amp| + |perturb| must stay below 1",
        )?;
        check(w.bias >= 0.0, "weak_strong.bias", "must be nonnegative")?;
        let sw = &self.sweep;
        check(
            !sw.eps.is_empty() && sw.eps.iter().all(|&e| e > 0.0),
            "sweep.eps",
            "must be a nonempty list of positive values",
        )?;
        check(
            sw.nu.coef > 0.0 && sw.nu.power > 0.0,
            "sweep.nu_power",
            "nu must be positive and vanish with eps",
        )?;
        check(
            sw.lambda.coef >= 0.0 && sw.lambda.power >= 0.0,
            "sweep.lambda_power",
            "lambda must be nonnegative and bounded as eps -> 0",
        )?;
        check(
            sw.delta_data.power > 0.0,
            "sweep.delta_power",
            "delta must vanish with eps",
        )?;
        check(sw.samples >= 1, "sweep.samples", "must be at least 1")?;
        check(
            sw.grad_threshold > 0.0,
            "sweep.grad_threshold",
            "must be positive",
        )?;
        Ok(())
    }

    pub fn law(&self) -> Result<PressureLaw<f64>> {
        let m = &self.model;
        PressureLaw::with_artificial(m.a, m.gamma, m.delta, m.gamma_art)
    }

    pub fn noise_model(&self) -> Result<NoiseModel<f64>> {
        let n = &self.noise;
        let model = match n.kind {
            NoiseKindName::None => return Ok(NoiseModel::none()),
            NoiseKindName::Affine => NoiseModel::affine(n.k.clone(), n.l.clone())?,
            NoiseKindName::General => {
                let shape = crate::field::Shape::new(&self.sizes)?;
                NoiseModel::general(shape, n.k.clone(), n.l.clone())?
            }
        };
        Ok(model.truncated(n.modes))
    }

    pub fn model(&self) -> Result<Model<f64>> {
        let m = &self.model;
        Model::new(
            self.law()?,
            Viscosity::new(m.nu, m.lambda)?,
            self.noise_model()?,
            m.eps,
        )
    }

    pub fn stepper_config(&self) -> StepperConfig<f64> {
        let s = &self.stepper;
        StepperConfig {
            dt: s.dt,
            cfl: s.cfl,
            rho_floor: s.rho_floor,
            damping_bound: s.damping_bound,
        }
    }

    pub fn weak_strong_config(&self) -> Result<WeakStrongConfig<f64>> {
        let s = &self.stepper;
        let dt =
            s.dt.ok_or_else(|| Error::config("stepper.dt", "weak-strong runs need a fixed step"))?;
        let mut init = self.init;
        init.perturb = self.weak_strong.perturb;
        Ok(WeakStrongConfig {
            model: self.model()?,
            sizes: self.sizes.clone(),
            dt,
            t_end: s.t_end,
            sample_every: s.sample_every,
            rho_floor: s.rho_floor,
            paths: self.paths,
            replicas: self.replicas,
            seed: self.seed,
            init,
            refine: self.weak_strong.refine,
            grad_threshold: self.weak_strong.grad_threshold,
        })
    }

    pub fn sweep_config(&self) -> Result<SweepConfig<f64>> {
        let mut c = SweepConfig::new(self.law()?, self.noise_model()?);
        let sw = &self.sweep;
        c.eps = sw.eps.clone();
        c.nu = sw.nu;
        c.lambda = sw.lambda;
        c.delta_data = sw.delta_data;
        c.sizes = self.sizes.clone();
        c.t_end = self.stepper.t_end;
        c.samples = sw.samples;
        c.grad_threshold = sw.grad_threshold;
        c.paths = self.paths;
        c.replicas = self.replicas;
        c.seed = self.seed;
        c.cfl = self.stepper.cfl;
        c.rho_floor = self.stepper.rho_floor;
        c.v0_amp = sw.v0_amp;
        c.validate()
            .map_err(|e| Error::config("sweep", e.to_string()))?;
        Ok(c)
    }

    /// Every key with its resolved value.
    pub fn to_toml_string(&self) -> String {
        fn num(x: f64) -> Value {
            Value::Float(x)
        }
        fn floats(v: &[f64]) -> Value {
            Value::Array(v.iter().map(|&x| Value::Float(x)).collect())
        }
        let mut root = Table::new();
        root.insert("seed".into(), Value::Integer(self.seed as i64));
        root.insert(
            "output".into(),
            Value::String(self.output.display().to_string()),
        );

        let mut grid = Table::new();
        grid.insert(
            "sizes".into(),
            Value::Array(
                self.sizes
                    .iter()
                    .map(|&n| Value::Integer(n as i64))
                    .collect(),
            ),
        );
        root.insert("grid".into(), Value::Table(grid));

        let m = &self.model;
        let mut model = Table::new();
        for (k, v) in [
            ("a", m.a),
            ("gamma", m.gamma),
            ("delta", m.delta),
            ("Gamma", m.gamma_art),
            ("nu", m.nu),
            ("lambda", m.lambda),
            ("eps", m.eps),
        ] {
            model.insert(k.into(), num(v));
        }
        root.insert("model".into(), Value::Table(model));

        let s = &self.stepper;
        let mut stepper = Table::new();
        match s.dt {
            Some(dt) => stepper.insert("dt".into(), num(dt)),
            None => stepper.insert("cfl".into(), num(s.cfl)),
        };
        stepper.insert("rho_floor".into(), num(s.rho_floor));
        stepper.insert("t_end".into(), num(s.t_end));
        stepper.insert("sample_every".into(), Value::Integer(s.sample_every as i64));
        stepper.insert("damping_bound".into(), Value::Boolean(s.damping_bound));
        root.insert("stepper".into(), Value::Table(stepper));

        let n = &self.noise;
        let mut noise = Table::new();
        noise.insert("kind".into(), Value::String(n.kind.name().into()));
        noise.insert("modes".into(), Value::Integer(n.modes as i64));
        noise.insert("K".into(), floats(&n.k));
        noise.insert("L".into(), floats(&n.l));
        root.insert("noise".into(), Value::Table(noise));

        let mut ens = Table::new();
        ens.insert("paths".into(), Value::Integer(self.paths as i64));
        ens.insert("replicas".into(), Value::Integer(self.replicas as i64));
        root.insert("ensemble".into(), Value::Table(ens));

        let i = &self.init;
        let mut init = Table::new();
        init.insert("kind".into(), Value::String(i.kind.name().into()));
        init.insert("rho_amp".into(), num(i.rho_amp));
        init.insert("mom_amp".into(), num(i.mom_amp));
        init.insert("mode".into(), Value::Integer(i.mode as i64));
        init.insert("perturb".into(), num(i.perturb));
        root.insert("init".into(), Value::Table(init));

        let mut snap = Table::new();
        snap.insert("every".into(), Value::Integer(self.snapshot_every as i64));
        root.insert("snapshot".into(), Value::Table(snap));

        let w = &self.weak_strong;
        let mut ws = Table::new();
        ws.insert("refine".into(), Value::Integer(w.refine as i64));
        ws.insert("grad_threshold".into(), num(w.grad_threshold));
        ws.insert("perturb".into(), num(w.perturb));
        ws.insert("bias".into(), num(w.bias));
        root.insert("weak_strong".into(), Value::Table(ws));

        let sw = &self.sweep;
        let mut sweep = Table::new();
        sweep.insert("eps".into(), floats(&sw.eps));
        for (name, sc) in [
            ("nu", sw.nu),
            ("lambda", sw.lambda),
            ("delta", sw.delta_data),
        ] {
            sweep.insert(format!("{name}_coef"), num(sc.coef));
            sweep.insert(format!("{name}_power"), num(sc.power));
        }
        sweep.insert("samples".into(), Value::Integer(sw.samples as i64));
        sweep.insert("grad_threshold".into(), num(sw.grad_threshold));
        sweep.insert("v0_amp".into(), num(sw.v0_amp));
        root.insert("sweep".into(), Value::Table(sweep));

        let mut verify = Table::new();
        verify.insert(
            "inject_concave".into(),
            Value::Boolean(self.verify.inject_concave),
        );
        if let Some(p) = &self.verify.snapshot {
            verify.insert("snapshot".into(), Value::String(p.display().to_string()));
        }
        root.insert("verify".into(), Value::Table(verify));

        toml::to_string(&root).expect("a toml table always serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::from_toml_str("[model]\nnu = 0.1\nmu = 2.0\n").unwrap_err();
        match e {
            Error::Config { path, .. } => assert_eq!(path, "model.mu"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn type_and_range_errors_are_named() {
        let e = RunConfig::from_toml_str("[model]\ngamma = \"two\"\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "model.gamma"));
        let e = RunConfig::from_toml_str("[grid]\nsizes = [48]\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "grid.sizes"));
        let e = RunConfig::from_toml_str("[stepper]\ndt = 0.1\ncfl = 0.3\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "stepper.cfl"));
        let e = RunConfig::from_toml_str("[noise]\nK = [0.1, 0.2]\nL = [0.1]\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "noise.L"));
    }

    #[test]
    fn resolved_copy_round_trips() {
        let text = "seed = 9\n[grid]\nsizes = [32, 32]\n[init]\nkind = \"taylor_green\"\n[stepper]\ndt = 0.01\n";
        let cfg = RunConfig::from_toml_str(text).unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }
}
