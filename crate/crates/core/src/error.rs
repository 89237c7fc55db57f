use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("copy index {index} out of range for {copies} copies")]
    CopyIndex { index: usize, copies: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator `{name}` is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { name: &'static str, deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("time {t} does not belong to the {copies}-copy window for tau = {tau}")]
    WindowMismatch { copies: usize, t: f64, tau: f64 },

    #[error(
        "memory budget exceeded: {copies} copies of a d = {local_dim} system need about \
         {required_mb} MiB (budget {budget_mb} MiB); reachable up to t = {max_reachable_t}"
    )]
    BudgetExceeded {
        copies: usize,
        local_dim: usize,
        required_mb: u64,
        budget_mb: u64,
        max_reachable_t: f64,
    },

    #[error(
        "collision window of dimension {dim:.4e} needs about {required_mb:.4e} MiB (budget {budget_mb} MiB)"
    )]
    OracleBudget { dim: f64, required_mb: f64, budget_mb: u64 },

    #[error("integration step underflow (h = {step:.3e})")]
    StepUnderflow { step: f64 },

    #[error("non-finite entries encountered in {0}")]
    NonFinite(&'static str),

    #[error("the single-excitation delay equation only applies to undriven systems")]
    DrivenSystem,
}
