use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Output power outside the model's domain `[0, p_max]` (or outside the
    /// open Doherty interval for derivative queries).
    #[error("output power {p_out} W outside model domain [{lo}, {hi}]")]
    Domain { p_out: f64, lo: f64, hi: f64 },

    #[error("invalid power model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("mapping is infeasible: {0}")]
    InfeasibleMapping(String),

    #[error("PA {pa} overloaded: load {load} W exceeds p_max {p_max} W")]
    PaOverload { pa: usize, load: f64, p_max: f64 },

    #[error("no feasible mapping exists: {0}")]
    NoFeasibleMapping(String),

    #[error("search space of {space:e} mappings exceeds the limit of {limit:e}")]
    ResourceLimit { space: f64, limit: f64 },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("invalid experiment configuration: {0}")]
    Config(String),
}
