//! Memory ceilings for the dense objects the engines allocate.

use crate::error::{Error, Result};

pub const ENV_VAR: &str = "DELAYLOOP_MEM_BUDGET_MB";

const BYTES_PER_ENTRY: u64 = 16;
/// Block-sized buffers held at once while advancing a window (state, Taylor
/// accumulator, term and scratch).
const BLOCK_BUFFERS: u64 = 4;
/// Reduced-flow matrices cached per window chunk.
pub(crate) const REDUCED_FLOW_SLOTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryBudget {
    bytes: u64,
    /// Largest Liouville dimension `d^(2k)` for which a full propagator matrix
    /// is materialized.
    max_propagator_dim: usize,
}

impl Default for MemoryBudget {
    fn default() -> Self {
        Self {
            bytes: 4 << 30,
            max_propagator_dim: 4096,
        }
    }
}

impl MemoryBudget {
    pub fn from_megabytes(mb: u64) -> Self {
        Self {
            bytes: mb << 20,
            ..Self::default()
        }
    }

    /// Default budget, overridden by `DELAYLOOP_MEM_BUDGET_MB` when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(ENV_VAR) {
            Ok(v) => {
                let mb: u64 = v.trim().parse().map_err(|_| {
                    Error::InvalidParameter(format!("{ENV_VAR} must be an integer number of MiB, got `{v}`"))
                })?;
                Ok(Self::from_megabytes(mb))
            }
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn with_max_propagator_dim(mut self, dim: usize) -> Self {
        self.max_propagator_dim = dim;
        self
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    pub fn megabytes(&self) -> u64 {
        self.bytes >> 20
    }

    pub fn max_propagator_dim(&self) -> usize {
        self.max_propagator_dim
    }

    /// Working set of one simulation window with `copies` copies: the
    /// column-restricted propagator block plus cached reduced flows.
    pub fn window_bytes(local_dim: usize, copies: usize) -> u64 {
        let full = liouville_dim(local_dim, copies) as u64;
        let reduced = liouville_dim(local_dim, copies - 1) as u64;
        BYTES_PER_ENTRY
            .saturating_mul(BLOCK_BUFFERS.saturating_mul(full.saturating_mul(reduced)))
            .saturating_add(
                BYTES_PER_ENTRY.saturating_mul((REDUCED_FLOW_SLOTS as u64).saturating_mul(reduced.saturating_mul(reduced))),
            )
    }

    pub fn allows_window(&self, local_dim: usize, copies: usize) -> bool {
        Self::window_bytes(local_dim, copies) <= self.bytes
    }

    /// Largest copy count whose window fits the budget.
    pub fn max_copies(&self, local_dim: usize) -> usize {
        let mut k = 1;
        while k < 64 && self.allows_window(local_dim, k + 1) {
            k += 1;
        }
        k
    }

    /// Bytes needed to evolve a full `d^(2k) x d^(2k)` propagator.
    pub fn propagator_bytes(local_dim: usize, copies: usize) -> u64 {
        let n = liouville_dim(local_dim, copies) as u64;
        BYTES_PER_ENTRY.saturating_mul(BLOCK_BUFFERS.saturating_mul(n.saturating_mul(n)))
    }

    pub fn check_propagator(&self, local_dim: usize, copies: usize) -> Result<()> {
        let n = liouville_dim(local_dim, copies);
        let bytes = Self::propagator_bytes(local_dim, copies);
        if n > self.max_propagator_dim || bytes > self.bytes {
            return Err(Error::BudgetExceeded {
                copies,
                local_dim,
                required_mb: bytes >> 20,
                budget_mb: self.megabytes(),
                max_reachable_t: f64::NAN,
            });
        }
        Ok(())
    }
}

/// `d^(2k)`, saturating.
pub fn liouville_dim(local_dim: usize, copies: usize) -> usize {
    local_dim.saturating_pow(2 * copies as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ceilings_match_desk_scale() {
        let b = MemoryBudget::default();
        assert_eq!(b.max_copies(2), 6);
        assert_eq!(b.max_copies(5), 3);
        assert!(b.check_propagator(2, 6).is_ok());
        assert!(b.check_propagator(2, 7).is_err());
        assert!(b.check_propagator(5, 3).is_err());
    }

    #[test]
    fn small_budget_lowers_ceiling() {
        let b = MemoryBudget::from_megabytes(8);
        assert!(b.max_copies(2) < 6);
    }
}
