//! Upper bounds on secret-key rates of entanglement-based QKD protocols in
//! which the honest parties announce their inputs and a fraction of their
//! classical outcomes leaks to the adversary.
//!
//! The adversary runs a convex-combination attack: the shared isotropic state
//! is sourced as a flagged mixture of a fully separable isotropic state and
//! the GHZ projector, and leaked separable-round outcomes are partially
//! reassigned to the "unknown" flag so that the flag-conditional statistics
//! carry as little correlation as possible.
//!
//! Module map:
//!
//! - [`linalg`]: dense complex matrices and isotropic states.
//! - [`measurement`]: rank-1 projective measurements per party.
//! - [`distribution`]: Born-rule outcome tables, entropies, total correlation.
//! - [`attack`]: the flagged attack, mixing parameters, zero-key thresholds.
//! - [`optimize`]: the min over mixing parameters and max over settings.
//! - [`repeater`]: visibility degradation along repeater chains.
//! - [`montecarlo`]: round-by-round sampling of the attack.

pub mod attack;
pub mod distribution;
mod error;
pub mod linalg;
pub mod measurement;
pub mod montecarlo;
pub mod optimize;
pub mod repeater;

pub use error::{Error, Result};

/// Validates a `(d, N)` scenario: local dimension and party count both at least 2.
pub(crate) fn check_scenario(d: usize, parties: usize) -> Result<()> {
    if d < 2 || parties < 2 {
        return Err(Error::InvalidScenario { d, parties });
    }
    Ok(())
}

/// `d^N` as a `usize`.
pub(crate) fn outcome_count(d: usize, parties: usize) -> usize {
    d.pow(parties as u32)
}
