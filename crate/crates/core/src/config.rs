//! Run configuration: flat `key = value` text with presets and overrides.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::basis::Discretization;
use crate::cache::CacheKey;
use crate::diagnostics::MixtureInit;
use crate::error::{Error, Result};
use crate::integrator::{Scheme, TimeGrid};
use crate::kernel::{KernelFamily, KernelSpec, DEFAULT_C_LAMBDA};
use crate::quadrature::LEBEDEV_ORDERS;
use crate::Velocity;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialCondition {
    Mixture(MixtureInit),
    Bkw,
    Maxwellian { rho: f64, v: Velocity, t: f64 },
}

impl InitialCondition {
    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::Mixture(_) => "mixture",
            InitialCondition::Bkw => "bkw",
            InitialCondition::Maxwellian { .. } => "maxwellian",
        }
    }

    pub fn density(&self, v: &Velocity) -> f64 {
        match self {
            InitialCondition::Mixture(m) => m.density(v),
            InitialCondition::Bkw => crate::diagnostics::bkw_density(0.0, v),
            InitialCondition::Maxwellian { rho, v: mean, t } => crate::diagnostics::maxwellian(*rho, mean, *t, v),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub k: usize,
    pub l: usize,
    pub n_gl: usize,
    pub n_l: usize,
    pub kernel: KernelFamily,
    pub c_lambda: f64,
    pub lambda: f64,
    pub init: InitialCondition,
    pub tau: f64,
    pub steps: usize,
    pub scheme: Scheme,
    pub stride: usize,
    pub csv: Option<PathBuf>,
    pub grid_times: Vec<f64>,
    pub grid_extent: f64,
    pub grid_points: usize,
    pub grid_prefix: Option<PathBuf>,
    pub cache_dir: PathBuf,
    /// Accept `N_GL < K + 2`.
    pub allow_small_rule: bool,
    pub seed: u64,
    pub particles: usize,
    pub trajectories: usize,
}

/// Names of all accepted keys.
pub const KEYS: &[&str] = &[
    "K",
    "L",
    "N_GL",
    "N_L",
    "kernel",
    "C_lambda",
    "lambda",
    "init",
    "alpha",
    "V1",
    "V2",
    "T1",
    "T2",
    "rho",
    "V",
    "T",
    "N_t",
    "tau",
    "T_final",
    "scheme",
    "stride",
    "csv",
    "grid_times",
    "grid_extent",
    "grid_points",
    "grid_prefix",
    "cache_dir",
    "allow_small_rule",
    "seed",
    "particles",
    "trajectories",
];

pub const PRESETS: &[&str] = &["mixture", "bkw", "hardspheres"];

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset("mixture").expect("built-in preset")
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse {value:?}")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse_num(key, value)?;
    if !v.is_finite() {
        return Err(Error::config(key, format!("{value:?} is not finite")));
    }
    Ok(v)
}

fn parse_vec3(key: &str, value: &str) -> Result<Velocity> {
    let parts: Vec<&str> = value.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::config(key, format!("expected three comma-separated numbers, got {value:?}")));
    }
    Ok(Velocity::new(
        parse_f64(key, parts[0])?,
        parse_f64(key, parts[1])?,
        parse_f64(key, parts[2])?,
    ))
}

fn fmt_vec3(v: &Velocity) -> String {
    format!("{},{},{}", v[0], v[1], v[2])
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::config(key, format!("expected true/false, got {other:?}"))),
    }
}

impl RunConfig {
    /// Built-in configurations for the three standard experiments.
    pub fn preset(name: &str) -> Result<Self> {
        let base = RunConfig {
            k: 4,
            l: 4,
            n_gl: 8,
            n_l: 50,
            kernel: KernelFamily::Maxwell,
            c_lambda: DEFAULT_C_LAMBDA,
            lambda: 0.0,
            init: InitialCondition::Mixture(MixtureInit::standard()),
            tau: 0.125,
            steps: 128,
            scheme: Scheme::Rk4,
            stride: 1,
            csv: None,
            grid_times: Vec::new(),
            grid_extent: 4.0,
            grid_points: 32,
            grid_prefix: None,
            cache_dir: PathBuf::from("gpbe-cache"),
            allow_small_rule: false,
            seed: 1,
            particles: 4096,
            trajectories: 256,
        };
        match name {
            "mixture" => Ok(base),
            "bkw" => Ok(RunConfig {
                k: 11,
                l: 0,
                n_gl: 16,
                n_l: 38,
                init: InitialCondition::Bkw,
                ..base
            }),
            "hardspheres" => Ok(RunConfig {
                kernel: KernelFamily::HardSpheres,
                lambda: 1.0,
                tau: 4.0 / 128.0,
                ..base
            }),
            other => Err(Error::config("preset", format!("unknown preset {other:?}; known: {PRESETS:?}"))),
        }
    }

    pub fn final_time(&self) -> f64 {
        self.tau * self.steps as f64
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "K" => self.k = parse_num(key, value)?,
            "L" => self.l = parse_num(key, value)?,
            "N_GL" => self.n_gl = parse_num(key, value)?,
            "N_L" => self.n_l = parse_num(key, value)?,
            "kernel" => {
                self.kernel = value.parse().map_err(|_| Error::config(key, format!("unknown kernel {value:?}")))?;
                match self.kernel {
                    KernelFamily::Maxwell => self.lambda = 0.0,
                    KernelFamily::HardSpheres => self.lambda = 1.0,
                    KernelFamily::Vhs => {}
                }
            }
            "C_lambda" => self.c_lambda = parse_f64(key, value)?,
            "lambda" => self.lambda = parse_f64(key, value)?,
            "init" => {
                self.init = match value {
                    "mixture" => InitialCondition::Mixture(match self.init {
                        InitialCondition::Mixture(m) => m,
                        _ => MixtureInit::standard(),
                    }),
                    "bkw" => InitialCondition::Bkw,
                    "maxwellian" => match self.init {
                        m @ InitialCondition::Maxwellian { .. } => m,
                        _ => InitialCondition::Maxwellian {
                            rho: 1.0,
                            v: Velocity::zeros(),
                            t: 1.0,
                        },
                    },
                    other => return Err(Error::config(key, format!("unknown initial condition {other:?}"))),
                }
            }
            "alpha" | "V1" | "V2" | "T1" | "T2" => {
                let InitialCondition::Mixture(m) = &mut self.init else {
                    return Err(Error::config(key, "only valid with init = mixture"));
                };
                match key {
                    "alpha" => m.alpha = parse_f64(key, value)?,
                    "V1" => m.v1 = parse_vec3(key, value)?,
                    "V2" => m.v2 = parse_vec3(key, value)?,
                    "T1" => m.t1 = parse_f64(key, value)?,
                    _ => m.t2 = parse_f64(key, value)?,
                }
            }
            "rho" | "V" | "T" => {
                let InitialCondition::Maxwellian { rho, v, t } = &mut self.init else {
                    return Err(Error::config(key, "only valid with init = maxwellian"));
                };
                match key {
                    "rho" => *rho = parse_f64(key, value)?,
                    "V" => *v = parse_vec3(key, value)?,
                    _ => *t = parse_f64(key, value)?,
                }
            }
            "tau" => self.tau = parse_f64(key, value)?,
            "N_t" => {
                let t_final = self.final_time();
                self.steps = parse_num(key, value)?;
                // keep the final time when only the step count changes
                if self.steps > 0 {
                    self.tau = t_final / self.steps as f64;
                }
            }
            "T_final" => {
                let t: f64 = parse_f64(key, value)?;
                if self.steps == 0 {
                    return Err(Error::config("N_t", "must be positive"));
                }
                self.tau = t / self.steps as f64;
            }
            "scheme" => self.scheme = value.parse()?,
            "stride" => self.stride = parse_num(key, value)?,
            "csv" => self.csv = (!value.is_empty()).then(|| PathBuf::from(value)),
            "grid_times" => {
                self.grid_times = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|s| parse_f64(key, s)).collect::<Result<_>>()?
                }
            }
            "grid_extent" => self.grid_extent = parse_f64(key, value)?,
            "grid_points" => self.grid_points = parse_num(key, value)?,
            "grid_prefix" => self.grid_prefix = (!value.is_empty()).then(|| PathBuf::from(value)),
            "cache_dir" => self.cache_dir = PathBuf::from(value),
            "allow_small_rule" => self.allow_small_rule = parse_bool(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "particles" => self.particles = parse_num(key, value)?,
            "trajectories" => self.trajectories = parse_num(key, value)?,
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of `self`. `#` starts a comment.
    /// A leading `preset = name` line replaces the base configuration.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(format!("line {}", lineno + 1), format!("expected key = value, got {line:?}")));
            };
            let key = key.trim();
            if key == "preset" {
                *self = Self::preset(value.trim())?;
            } else {
                self.set(key, value)?;
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Normalized text form; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("K", self.k.to_string());
        put("L", self.l.to_string());
        put("N_GL", self.n_gl.to_string());
        put("N_L", self.n_l.to_string());
        put("kernel", self.kernel.to_string());
        put("C_lambda", format!("{:?}", self.c_lambda));
        put("lambda", format!("{:?}", self.lambda));
        put("init", self.init.name().to_string());
        match &self.init {
            InitialCondition::Mixture(m) => {
                put("alpha", format!("{:?}", m.alpha));
                put("V1", fmt_vec3(&m.v1));
                put("V2", fmt_vec3(&m.v2));
                put("T1", format!("{:?}", m.t1));
                put("T2", format!("{:?}", m.t2));
            }
            InitialCondition::Bkw => {}
            InitialCondition::Maxwellian { rho, v, t } => {
                put("rho", format!("{rho:?}"));
                put("V", fmt_vec3(v));
                put("T", format!("{t:?}"));
            }
        }
        put("N_t", self.steps.to_string());
        put("tau", format!("{:?}", self.tau));
        put("scheme", self.scheme.to_string());
        put("stride", self.stride.to_string());
        put("csv", self.csv.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        put(
            "grid_times",
            self.grid_times.iter().map(|t| format!("{t:?}")).collect::<Vec<_>>().join(","),
        );
        put("grid_extent", format!("{:?}", self.grid_extent));
        put("grid_points", self.grid_points.to_string());
        put(
            "grid_prefix",
            self.grid_prefix.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        put("cache_dir", self.cache_dir.display().to_string());
        put("allow_small_rule", self.allow_small_rule.to_string());
        put("seed", self.seed.to_string());
        put("particles", self.particles.to_string());
        put("trajectories", self.trajectories.to_string());
        s
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.kernel, self.c_lambda, self.lambda).map_err(|e| {
            let key = if self.c_lambda > 0.0 { "lambda" } else { "C_lambda" };
            Error::config(key, e.to_string())
        })
    }

    pub fn disc(&self) -> Result<Discretization> {
        Discretization::new(self.k, self.l).map_err(|e| Error::config("K/L", e.to_string()))
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.tau, self.steps).map_err(|e| Error::config("tau/N_t", e.to_string()))
    }

    pub fn cache_key(&self) -> Result<CacheKey> {
        Ok(CacheKey {
            k_max: self.k,
            l_max: self.l,
            n_gl: self.n_gl,
            n_l: self.n_l,
            kernel: self.kernel_spec()?,
        })
    }

    /// Checks every field before any expensive work.
    pub fn validate(&self) -> Result<()> {
        self.disc()?;
        if self.n_gl == 0 {
            return Err(Error::config("N_GL", "must be positive"));
        }
        if self.n_gl < self.k + 2 && !self.allow_small_rule {
            return Err(Error::config(
                "N_GL",
                format!("N_GL = {} < K + 2 = {}; set allow_small_rule = true to override", self.n_gl, self.k + 2),
            ));
        }
        if !LEBEDEV_ORDERS.contains(&self.n_l) {
            return Err(Error::config("N_L", format!("{} is not one of {LEBEDEV_ORDERS:?}", self.n_l)));
        }
        self.kernel_spec()?;
        if matches!(self.init, InitialCondition::Bkw) && self.kernel != KernelFamily::Maxwell {
            return Err(Error::config("init", "the BKW solution requires kernel = maxwell"));
        }
        match &self.init {
            InitialCondition::Mixture(m) => {
                MixtureInit::new(m.alpha, m.v1, m.v2, m.t1, m.t2)?;
            }
            InitialCondition::Maxwellian { rho, t, .. } => {
                if *rho <= 0.0 {
                    return Err(Error::config("rho", "must be positive"));
                }
                if *t <= 0.0 {
                    return Err(Error::config("T", "must be positive"));
                }
            }
            InitialCondition::Bkw => {}
        }
        self.grid()?;
        if self.stride == 0 {
            return Err(Error::config("stride", "must be at least 1"));
        }
        if self.grid_points < 2 {
            return Err(Error::config("grid_points", "must be at least 2"));
        }
        if self.grid_extent <= 0.0 {
            return Err(Error::config("grid_extent", "must be positive"));
        }
        if let Some(t) = self.grid_times.iter().find(|t| **t < 0.0 || **t > self.final_time() + 1e-12) {
            return Err(Error::config("grid_times", format!("{t} outside [0, {}]", self.final_time())));
        }
        if self.particles < 2 {
            return Err(Error::config("particles", "need at least 2"));
        }
        if self.trajectories == 0 {
            return Err(Error::config("trajectories", "need at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn text_round_trip(
            k in 0usize..12,
            l in 0usize..8,
            extra in 2usize..10,
            alpha in 0.0f64..=1.0,
            t1 in 0.1f64..3.0,
            v in proptest::array::uniform3(-2.0f64..2.0),
            steps in 1usize..5000,
            t_final in 0.5f64..32.0,
            scheme in 0usize..3,
            seed in any::<u64>(),
        ) {
            let mut cfg = RunConfig::preset("mixture").unwrap();
            cfg.k = k;
            cfg.l = l;
            cfg.n_gl = k + extra;
            cfg.init = InitialCondition::Mixture(MixtureInit { alpha, t1, v1: Velocity::from(v), ..MixtureInit::standard() });
            cfg.steps = steps;
            cfg.tau = t_final / steps as f64;
            cfg.scheme = [Scheme::Euler, Scheme::Rk2, Scheme::Rk4][scheme];
            cfg.seed = seed;
            cfg.validate().unwrap();
            let back = RunConfig::parse(&cfg.to_text()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let cfg = RunConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            let text = cfg.to_text();
            let back = RunConfig::parse(&text).unwrap();
            assert_eq!(back, cfg, "{name}");
            assert_eq!(back.to_text(), text);
        }
        assert!(RunConfig::preset("plasma").is_err());
    }

    #[test]
    fn overrides_and_comments() {
        let cfg = RunConfig::parse(
            "preset = bkw   # isotropic case\nK = 12\nN_t = 64\nT_final = 8\n\ngrid_times = 0,0.25,1\ncsv = out.csv\n",
        )
        .unwrap();
        assert_eq!(cfg.k, 12);
        assert_eq!(cfg.init, InitialCondition::Bkw);
        assert_eq!(cfg.tau, 0.125);
        assert_eq!(cfg.grid_times, vec![0.0, 0.25, 1.0]);
        assert_eq!(cfg.csv, Some(PathBuf::from("out.csv")));
        let round = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn errors_name_the_offending_key() {
        let key_of = |text: &str| match RunConfig::parse(text).and_then(|c| c.validate()) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(key_of("N_L = 51"), "N_L");
        assert_eq!(key_of("N_GL = 4"), "N_GL");
        assert_eq!(key_of("flux = 3"), "flux");
        assert_eq!(key_of("K = two"), "K");
        assert_eq!(key_of("kernel = vhs\nlambda = 2"), "lambda");
        assert_eq!(key_of("init = bkw\nkernel = hard-spheres"), "init");
        assert_eq!(key_of("init = bkw\nalpha = 0.3"), "alpha");
        assert_eq!(key_of("V1 = 1,2"), "V1");
        assert_eq!(key_of("stride = 0"), "stride");
        assert_eq!(key_of("grid_times = 40"), "grid_times");
        assert_eq!(key_of("just text"), "line 1");
        let ok = RunConfig::parse("N_GL = 4\nallow_small_rule = true").unwrap();
        ok.validate().unwrap();
    }

    #[test]
    fn maxwellian_initial_condition() {
        let cfg = RunConfig::parse("init = maxwellian\nrho = 2\nV = 0.5,0,0\nT = 1.5").unwrap();
        cfg.validate().unwrap();
        let v = Velocity::new(0.5, 0.0, 0.0);
        assert!((cfg.init.density(&v) - 2.0 * (3.0 * std::f64::consts::PI).powf(-1.5)).abs() < 1e-15);
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
