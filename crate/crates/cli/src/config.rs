//! Flat `key = value` experiment configuration files.
//!
//! Blank lines are ignored and `#` starts a comment that runs to the end of
//! the line. Every key may appear at most once. See the README for the list
//! of keys.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use mcpa_core::simulation::GaussianSpread;
use mcpa_core::{Algorithm, ExperimentConfig, MidpointRule, PowerModelParams, ProfileKind, SolverOptions, Variant};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError::Line {
            line,
            message: message.into(),
        }
    }
}

/// Model constants given explicitly in the file. Each one overrides the
/// corresponding preset value, or is required when no preset is named.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParamOverrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub p_th: Option<f64>,
    pub p_max: Option<f64>,
    pub p_sta: Option<f64>,
    pub p_slp: Option<f64>,
    pub variant: Option<Variant>,
}

impl ParamOverrides {
    /// Applies the overrides on top of `preset`, or builds the parameters
    /// from scratch when there is none.
    pub fn resolve(&self, preset: Option<&str>) -> Result<PowerModelParams, ConfigError> {
        let base = match preset {
            Some(name) => Some(
                PowerModelParams::preset(name).ok_or_else(|| ConfigError::Invalid(format!("unknown preset `{name}`")))?,
            ),
            None => None,
        };
        let pick = |value: Option<f64>, from_base: Option<f64>, key: &str| {
            value
                .or(from_base)
                .ok_or_else(|| ConfigError::Invalid(format!("`{key}` is required when no preset is given")))
        };
        let params = PowerModelParams {
            alpha: pick(self.alpha, base.map(|b| b.alpha), "alpha")?,
            beta: pick(self.beta, base.map(|b| b.beta), "beta")?,
            gamma: pick(self.gamma, base.map(|b| b.gamma), "gamma")?,
            p_th: pick(self.p_th, base.map(|b| b.p_th), "p_th")?,
            p_max: pick(self.p_max, base.map(|b| b.p_max), "p_max")?,
            p_sta: pick(self.p_sta, base.map(|b| b.p_sta), "p_sta")?,
            p_slp: pick(self.p_slp, base.map(|b| b.p_slp), "p_slp")?,
            variant: self.variant.or(base.map(|b| b.variant)).unwrap_or(Variant::Doherty),
        };
        params.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub preset: Option<String>,
    pub params: ParamOverrides,
    pub n_c: usize,
    pub n_pa: usize,
    pub capacity: usize,
    pub slots: usize,
    pub p_grid: Vec<f64>,
    pub profiles: Vec<ProfileKind>,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    pub gaussian_spread: GaussianSpread,
    pub midpoint: MidpointRule,
    pub tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub solver_seed: u64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Resolves the model parameters and checks the experiment geometry.
    pub fn to_experiment(&self) -> Result<ExperimentConfig, ConfigError> {
        let params = self.params.resolve(self.preset.as_deref())?;
        let config = ExperimentConfig {
            name: self.name.clone(),
            params,
            n_c: self.n_c,
            n_pa: self.n_pa,
            capacity: self.capacity,
            slots: self.slots,
            p_grid: self.p_grid.clone(),
            profiles: self.profiles.clone(),
            algorithms: self.algorithms.clone(),
            seed: self.seed,
            spread: self.gaussian_spread,
            solver: SolverOptions {
                tol: self.tol,
                max_iters: self.max_iters,
                restarts: self.restarts,
                seed: self.solver_seed,
                midpoint: self.midpoint,
            },
        };
        config.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if config.algorithms.contains(&Algorithm::Dynamic) {
            params
                .taylor_coeffs_with(self.midpoint)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) || self.max_iters == 0 || self.restarts == 0 {
            return Err(ConfigError::Invalid(
                "tol must be positive and max_iters, restarts at least 1".into(),
            ));
        }
        Ok(config)
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut seen: Vec<&str> = Vec::new();
        let mut name = None;
        let mut preset = None;
        let mut params = ParamOverrides::default();
        let (mut n_c, mut n_pa, mut capacity) = (None, None, None);
        let solver = SolverOptions::default();
        let reference = ExperimentConfig::reference("", PowerModelParams::preset("exp1").expect("preset"), 0, 1, 1);
        let mut cfg = RunConfig {
            name: String::new(),
            preset: None,
            params: ParamOverrides::default(),
            n_c: 0,
            n_pa: 0,
            capacity: 0,
            slots: reference.slots,
            p_grid: reference.p_grid,
            profiles: reference.profiles,
            algorithms: reference.algorithms,
            seed: reference.seed,
            gaussian_spread: reference.spread,
            midpoint: solver.midpoint,
            tol: solver.tol,
            max_iters: solver.max_iters,
            restarts: solver.restarts,
            solver_seed: solver.seed,
            out: None,
        };

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, found `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(ConfigError::at(line, format!("duplicate key `{key}`")));
            }
            seen.push(key);
            let err = |e: String| ConfigError::at(line, format!("{key}: {e}"));

            match key {
                "name" => name = Some(value.to_string()),
                "preset" => {
                    if PowerModelParams::preset(value).is_none() {
                        return Err(err(format!("unknown preset `{value}`")));
                    }
                    preset = Some(value.to_string());
                }
                "alpha" => params.alpha = Some(parse(value).map_err(err)?),
                "beta" => params.beta = Some(parse(value).map_err(err)?),
                "gamma" => params.gamma = Some(parse(value).map_err(err)?),
                "p_th" => params.p_th = Some(parse(value).map_err(err)?),
                "p_max" => params.p_max = Some(parse(value).map_err(err)?),
                "p_sta" => params.p_sta = Some(parse(value).map_err(err)?),
                "p_slp" => params.p_slp = Some(parse(value).map_err(err)?),
                "variant" => params.variant = Some(parse(value).map_err(err)?),
                "n_c" => n_c = Some(parse(value).map_err(err)?),
                "n_pa" => n_pa = Some(parse(value).map_err(err)?),
                "capacity" => capacity = Some(parse(value).map_err(err)?),
                "slots" => cfg.slots = parse(value).map_err(err)?,
                "p_grid" => cfg.p_grid = parse_list(value).map_err(err)?,
                "profiles" => cfg.profiles = parse_list(value).map_err(err)?,
                "algorithms" => cfg.algorithms = parse_list(value).map_err(err)?,
                "seed" => cfg.seed = parse(value).map_err(err)?,
                "gaussian_spread" => cfg.gaussian_spread = parse(value).map_err(err)?,
                "midpoint" => cfg.midpoint = parse(value).map_err(err)?,
                "tol" => cfg.tol = parse(value).map_err(err)?,
                "max_iters" => cfg.max_iters = parse(value).map_err(err)?,
                "restarts" => cfg.restarts = parse(value).map_err(err)?,
                "solver_seed" => cfg.solver_seed = parse(value).map_err(err)?,
                "out" => cfg.out = (!value.is_empty()).then(|| PathBuf::from(value)),
                other => return Err(ConfigError::at(line, format!("unknown key `{other}`"))),
            }
        }

        let missing = |key: &str| ConfigError::Invalid(format!("missing required key `{key}`"));
        cfg.name = name.ok_or_else(|| missing("name"))?;
        cfg.n_c = n_c.ok_or_else(|| missing("n_c"))?;
        cfg.n_pa = n_pa.ok_or_else(|| missing("n_pa"))?;
        cfg.capacity = capacity.ok_or_else(|| missing("capacity"))?;
        cfg.preset = preset;
        cfg.params = params;
        Ok(cfg)
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("cannot parse `{value}`: {e}"))
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    value.split(',').map(|item| parse(item.trim())).collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Writes every key, so parsing the output reproduces the same value.
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        writeln!(s, "name = {}", self.name)?;
        if let Some(preset) = &self.preset {
            writeln!(s, "preset = {preset}")?;
        }
        let p = &self.params;
        for (key, value) in [
            ("alpha", p.alpha),
            ("beta", p.beta),
            ("gamma", p.gamma),
            ("p_th", p.p_th),
            ("p_max", p.p_max),
            ("p_sta", p.p_sta),
            ("p_slp", p.p_slp),
        ] {
            if let Some(v) = value {
                writeln!(s, "{key} = {v}")?;
            }
        }
        if let Some(variant) = p.variant {
            writeln!(s, "variant = {variant}")?;
        }
        writeln!(s, "n_c = {}", self.n_c)?;
        writeln!(s, "n_pa = {}", self.n_pa)?;
        writeln!(s, "capacity = {}", self.capacity)?;
        writeln!(s, "slots = {}", self.slots)?;
        writeln!(s, "p_grid = {}", join(&self.p_grid))?;
        writeln!(s, "profiles = {}", join(&self.profiles))?;
        writeln!(s, "algorithms = {}", join(&self.algorithms))?;
        writeln!(s, "seed = {}", self.seed)?;
        writeln!(s, "gaussian_spread = {}", self.gaussian_spread)?;
        writeln!(s, "midpoint = {}", self.midpoint)?;
        writeln!(s, "tol = {}", self.tol)?;
        writeln!(s, "max_iters = {}", self.max_iters)?;
        writeln!(s, "restarts = {}", self.restarts)?;
        writeln!(s, "solver_seed = {}", self.solver_seed)?;
        if let Some(out) = &self.out {
            writeln!(s, "out = {}", out.display())?;
        }
        f.write_str(&s)
    }
}
