//! Element-operation budget shared by the search and enumeration routines.
//!
//! One unit is one group multiplication or one field multiplication. Routines
//! whose cost is known up front reserve it before starting; long scans charge
//! in blocks as they go.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::Error;

pub const DEFAULT_BUDGET: u64 = 5_000_000_000;

/// Shared operation counter with a hard cap.
#[derive(Clone, Debug)]
pub struct Budget {
    cap: u64,
    used: Arc<AtomicU64>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget::new(DEFAULT_BUDGET)
    }
}

impl Budget {
    pub fn new(cap: u64) -> Self {
        Budget { cap, used: Arc::new(AtomicU64::new(0)) }
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::Relaxed)
    }

    /// Charge `n` operations, failing once the cap is crossed.
    pub fn charge(&self, n: u64) -> Result<(), Error> {
        let prev = self.used.fetch_add(n, Ordering::Relaxed);
        if prev.saturating_add(n) > self.cap {
            Err(Error::BudgetExceeded { needed: n, used: prev, cap: self.cap })
        } else {
            Ok(())
        }
    }

    /// Check that `n` further operations would fit without charging them.
    pub fn ensure(&self, n: u64) -> Result<(), Error> {
        let used = self.used();
        if used.saturating_add(n) > self.cap {
            Err(Error::BudgetExceeded { needed: n, used, cap: self.cap })
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charges_accumulate_and_cap() {
        let b = Budget::new(100);
        assert!(b.charge(60).is_ok());
        assert!(b.ensure(40).is_ok());
        assert!(b.ensure(41).is_err());
        assert!(b.charge(40).is_ok());
        assert!(b.charge(1).is_err());
        assert_eq!(b.used(), 101);
    }
}
