//! Seeded Monte Carlo harness.
//!
//! Every slot draws fresh carrier powers from its own RNG stream, derived only
//! from `(seed, slot)`, and every requested algorithm is run on the same draw.
//! Slots are independent, so they are evaluated in parallel when the
//! `parallel` feature is on; per-slot results are always reduced in slot
//! order, which keeps the output bit-identical across execution modes.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::oracle::exhaustive_search;
use crate::power::PowerModelParams;
use crate::problem::{static_mapping, total_input_power, MappingInstance};
use crate::relax::{dynamic_map, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    /// Every active carrier transmits `p_max / 2K`.
    Fixed,
    /// Uniform on `(0, p_max / K]`.
    Uniform,
    /// Normal with mean `p_max / 2K`, truncated to `(0, p_max / K]`.
    TruncGaussian,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 3] = [ProfileKind::Fixed, ProfileKind::Uniform, ProfileKind::TruncGaussian];

    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::Fixed => "fixed",
            ProfileKind::Uniform => "uniform",
            ProfileKind::TruncGaussian => "gaussian",
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(ProfileKind::Fixed),
            "uniform" => Ok(ProfileKind::Uniform),
            "gaussian" | "truncgaussian" => Ok(ProfileKind::TruncGaussian),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}

/// How the Gaussian profile's `p_max / 4K` spread parameter is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaussianSpread {
    /// `sigma^2 = p_max / 4K`.
    #[default]
    Variance,
    /// `sigma = p_max / 4K`.
    Stddev,
}

impl fmt::Display for GaussianSpread {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GaussianSpread::Variance => "variance",
            GaussianSpread::Stddev => "stddev",
        })
    }
}

impl FromStr for GaussianSpread {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variance" => Ok(GaussianSpread::Variance),
            "stddev" => Ok(GaussianSpread::Stddev),
            other => Err(Error::Config(format!("unknown gaussian spread `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    pub p_nonactive: f64,
    pub p_max: f64,
    pub capacity: usize,
    pub spread: GaussianSpread,
}

impl ProfileSpec {
    /// Upper end of the per-carrier power support, `p_max / K`.
    pub fn upper(&self) -> f64 {
        self.p_max / self.capacity as f64
    }

    pub fn mean(&self) -> f64 {
        self.upper() / 2.0
    }

    /// Standard deviation of the Gaussian before truncation.
    pub fn sigma(&self) -> f64 {
        let spread = self.p_max / (4.0 * self.capacity as f64);
        match self.spread {
            GaussianSpread::Variance => spread.sqrt(),
            GaussianSpread::Stddev => spread,
        }
    }
}

/// Draws one slot's carrier powers. Each carrier is silent with probability
/// `p_nonactive`; otherwise its power comes from the profile and lies in
/// `(0, p_max / K]`.
pub fn sample_slot_powers(spec: &ProfileSpec, n_c: usize, rng: &mut impl Rng) -> Vec<f64> {
    let hi = spec.upper();
    let normal = Normal::new(spec.mean(), spec.sigma()).expect("sigma is finite and positive");
    (0..n_c)
        .map(|_| {
            if rng.random::<f64>() < spec.p_nonactive {
                return 0.0;
            }
            match spec.kind {
                ProfileKind::Fixed => spec.mean(),
                // 1 - U[0, 1) lies in (0, 1], so zero is never drawn.
                ProfileKind::Uniform => hi * (1.0 - rng.random::<f64>()),
                ProfileKind::TruncGaussian => loop {
                    let v = normal.sample(rng);
                    if v > 0.0 && v <= hi {
                        break v;
                    }
                },
            }
        })
        .collect()
}

/// RNG stream for one slot.
pub fn slot_rng(seed: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(slot);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Static,
    Dynamic,
    Exhaustive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Static, Algorithm::Dynamic, Algorithm::Exhaustive];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Static => "static",
            Algorithm::Dynamic => "dynamic",
            Algorithm::Exhaustive => "exhaustive",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(Algorithm::Static),
            "dynamic" => Ok(Algorithm::Dynamic),
            "exhaustive" => Ok(Algorithm::Exhaustive),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Total input power of one mapping algorithm on one instance.
pub fn solve_cost(
    algorithm: Algorithm,
    instance: &MappingInstance,
    params: &PowerModelParams,
    solver: &SolverOptions,
) -> Result<f64> {
    match algorithm {
        Algorithm::Static => total_input_power(instance, &static_mapping(instance), params),
        Algorithm::Dynamic => total_input_power(instance, &dynamic_map(instance, params, solver)?, params),
        Algorithm::Exhaustive => Ok(exhaustive_search(instance, params, true)?.best_cost),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub params: PowerModelParams,
    pub n_c: usize,
    pub n_pa: usize,
    pub capacity: usize,
    pub slots: usize,
    pub p_grid: Vec<f64>,
    pub profiles: Vec<ProfileKind>,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    pub spread: GaussianSpread,
    pub solver: SolverOptions,
}

impl ExperimentConfig {
    /// Six carriers on three PAs with two carriers each, p = 0.1 .. 0.9.
    pub fn reference(name: &str, params: PowerModelParams, n_c: usize, n_pa: usize, capacity: usize) -> Self {
        Self {
            name: name.to_string(),
            params,
            n_c,
            n_pa,
            capacity,
            slots: 10_000,
            p_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            profiles: ProfileKind::ALL.to_vec(),
            algorithms: Algorithm::ALL.to_vec(),
            seed: 1,
            spread: GaussianSpread::Variance,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.slots == 0 {
            return Err(Error::Config("slots must be >= 1".into()));
        }
        if self.n_pa == 0 || self.capacity == 0 {
            return Err(Error::Config("n_pa and capacity must be >= 1".into()));
        }
        if self.n_c > self.n_pa * self.capacity {
            return Err(Error::Config(format!(
                "n_c={} exceeds n_pa * capacity = {}",
                self.n_c,
                self.n_pa * self.capacity
            )));
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("p_grid value {p} outside [0, 1]")));
        }
        if self.p_grid.is_empty() || self.profiles.is_empty() || self.algorithms.is_empty() {
            return Err(Error::Config("p_grid, profiles and algorithms must be non-empty".into()));
        }
        Ok(())
    }

    pub fn profile(&self, kind: ProfileKind, p_nonactive: f64) -> ProfileSpec {
        ProfileSpec {
            kind,
            p_nonactive,
            p_max: self.params.p_max,
            capacity: self.capacity,
            spread: self.spread,
        }
    }
}

/// Costs of every requested algorithm on one slot, indexed by [`Algorithm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotCosts {
    pub powers_active: usize,
    costs: [Option<f64>; 3],
}

impl SlotCosts {
    pub fn get(&self, algorithm: Algorithm) -> Option<f64> {
        self.costs[algorithm.index()]
    }
}

/// Samples slot `slot` of one cell and runs every configured algorithm on it.
pub fn evaluate_slot(config: &ExperimentConfig, spec: &ProfileSpec, slot: u64) -> Result<SlotCosts> {
    let mut rng = slot_rng(config.seed, slot);
    let powers = sample_slot_powers(spec, config.n_c, &mut rng);
    let powers_active = powers.iter().filter(|&&p| p > 0.0).count();
    let instance = MappingInstance::new(powers, config.n_pa, config.capacity)?;
    let mut costs = [None; 3];
    for &alg in &config.algorithms {
        costs[alg.index()] = Some(solve_cost(alg, &instance, &config.params, &config.solver)?);
    }
    Ok(SlotCosts { powers_active, costs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon over slots. Falls back to sequential without the `parallel` feature.
    #[default]
    Parallel,
}

/// Per-slot costs of one `(profile, p)` cell, in slot order.
pub fn evaluate_cell(config: &ExperimentConfig, spec: &ProfileSpec, execution: Execution) -> Result<Vec<SlotCosts>> {
    let slots = config.slots as u64;
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..slots).into_par_iter().map(|s| evaluate_slot(config, spec, s)).collect()
        }
        _ => (0..slots).map(|s| evaluate_slot(config, spec, s)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub profile: ProfileKind,
    pub p_nonactive: f64,
    pub algorithm: Algorithm,
    pub mean_power: f64,
    pub stderr: f64,
    /// `(static - alg) / static`; `None` without a static run.
    pub saving_vs_static: Option<f64>,
    /// `(static - alg) / (static - exhaustive)`; `None` unless that gap is positive.
    pub fraction_of_optimal_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMetrics {
    pub experiment: String,
    pub slots: usize,
    pub seed: u64,
    pub cells: Vec<CellResult>,
}

pub const CSV_HEADER: &str =
    "experiment,profile,p_nonactive,algorithm,mean_power_w,stderr_w,saving_vs_static,fraction_of_optimal_gain,slots,seed";

impl AggregateMetrics {
    pub fn cell(&self, profile: ProfileKind, p_nonactive: f64, algorithm: Algorithm) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.profile == profile && c.p_nonactive == p_nonactive && c.algorithm == algorithm)
    }

    pub fn cells_for(&self, algorithm: Algorithm) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(move |c| c.algorithm == algorithm)
    }

    /// Mean of `saving_vs_static` over every cell of `algorithm`.
    pub fn average_saving(&self, algorithm: Algorithm) -> Option<f64> {
        let savings: Vec<f64> = self.cells_for(algorithm).filter_map(|c| c.saving_vs_static).collect();
        (!savings.is_empty()).then(|| savings.iter().sum::<f64>() / savings.len() as f64)
    }

    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), format_g6);
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                self.experiment,
                c.profile,
                format_g6(c.p_nonactive),
                c.algorithm,
                format_g6(c.mean_power),
                format_g6(c.stderr),
                opt(c.saving_vs_static),
                opt(c.fraction_of_optimal_gain),
                self.slots,
                self.seed
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateMetrics> {
    run_experiment_with(config, Execution::default())
}

pub fn run_experiment_with(config: &ExperimentConfig, execution: Execution) -> Result<AggregateMetrics> {
    config.validate()?;
    let mut cells = Vec::new();
    for &kind in &config.profiles {
        for &p in &config.p_grid {
            let spec = config.profile(kind, p);
            let per_slot = evaluate_cell(config, &spec, execution)?;
            let stats: Vec<Option<(f64, f64)>> = Algorithm::ALL
                .iter()
                .map(|&alg| {
                    let xs: Option<Vec<f64>> = per_slot.iter().map(|s| s.get(alg)).collect();
                    xs.map(|xs| mean_and_stderr(&xs))
                })
                .collect();
            let mean_of = |alg: Algorithm| stats[alg.index()].map(|(m, _)| m);
            for &alg in &config.algorithms {
                let (mean, stderr) = stats[alg.index()].expect("requested algorithms were evaluated");
                let static_mean = mean_of(Algorithm::Static);
                let saving_vs_static = static_mean.map(|s| (s - mean) / s);
                let fraction_of_optimal_gain = match (static_mean, mean_of(Algorithm::Exhaustive)) {
                    (Some(s), Some(e)) if s - e > 0.0 => Some((s - mean) / (s - e)),
                    _ => None,
                };
                cells.push(CellResult {
                    profile: kind,
                    p_nonactive: p,
                    algorithm: alg,
                    mean_power: mean,
                    stderr,
                    saving_vs_static,
                    fraction_of_optimal_gain,
                });
            }
        }
    }
    Ok(AggregateMetrics {
        experiment: config.name.clone(),
        slots: config.slots,
        seed: config.seed,
        cells,
    })
}

/// Sample mean and its standard error, summed in slice order.
fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Formats like C's `%.6g`.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
