//! Dynamic mapping of radio carriers onto multi-carrier power amplifiers.
//!
//! Given each carrier's output power for a slot, pick which MCPA serves it so
//! that the total input power of the amplifier bank is minimal. Three mappers
//! are provided: a fixed block [`static_mapping`], the relax-and-round
//! [`dynamic_map`], and the exact [`exhaustive_search`]. The [`simulation`]
//! module compares them over seeded Monte Carlo sweeps.
//!
//! ```
//! use mcpa_core::{dynamic_map, total_input_power, MappingInstance, PowerModelParams, SolverOptions};
//!
//! let params = PowerModelParams::preset("exp1").unwrap();
//! let instance: MappingInstance = "n_pa=2 k=2 powers=20,0,20,0".parse().unwrap();
//! let mapping = dynamic_map(&instance, &params, &SolverOptions::default()).unwrap();
//! let watts = total_input_power(&instance, &mapping, &params).unwrap();
//! assert!((watts - 108.1).abs() < 0.1);
//! ```

pub mod assignment;
pub mod error;
pub mod oracle;
pub mod power;
pub mod problem;
pub mod relax;
pub mod simulation;

pub use error::{Error, Result};
pub use oracle::{exhaustive_search, OracleResult};
pub use power::{MidpointRule, PowerModelParams, QuadraticCoeffs, Variant};
pub use problem::{
    is_feasible, partition_active, static_mapping, total_input_power, ActivePartition, FeasibilityReport,
    MappingInstance, MappingMatrix, Violation,
};
pub use relax::{
    build_reduced, dynamic_map, round_by_sorting, solve_relaxed, surrogate_objective, ReducedProblem,
    RelaxedSolution, SolverOptions,
};
pub use simulation::{run_experiment, AggregateMetrics, Algorithm, ExperimentConfig, ProfileKind};
