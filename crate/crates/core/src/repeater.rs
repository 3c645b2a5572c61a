//! Visibility loss along entanglement-swapping chains and the resulting
//! limit on the number of repeater nodes.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::attack::{zero_key_threshold, LeakageModel, ThresholdConvention};
use crate::optimize::{rate_curve, KeyRateBound, SettingsSpace};
use crate::{Error, Result};

/// Reported as `n_max` when `v = 1`.
pub const UNBOUNDED_SENTINEL: u64 = u64::MAX;

/// How the number of nodes maps to the exponent of `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentConvention {
    /// `v^(2n)`.
    #[default]
    Paper,
    /// `v^(n+1)`: one factor per elementary link.
    Links,
}

impl fmt::Display for ExponentConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExponentConvention::Paper => "paper",
            ExponentConvention::Links => "links",
        })
    }
}

impl FromStr for ExponentConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(ExponentConvention::Paper),
            "links" => Ok(ExponentConvention::Links),
            _ => Err(Error::Parse(format!("unknown exponent convention '{s}'"))),
        }
    }
}

/// A chain of `n` nodes over links of visibility `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepeaterChain {
    pub v: f64,
    pub n: u64,
    pub model: LeakageModel,
}

impl RepeaterChain {
    pub fn new(v: f64, n: u64, model: LeakageModel) -> Result<Self> {
        check_visibility(v)?;
        Ok(Self { v, n, model })
    }

    pub fn end_to_end_visibility(&self, exponent: ExponentConvention) -> f64 {
        swapped_visibility_with(self.v, self.n, exponent)
    }
}

fn check_visibility(v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::VisibilityOutOfRange(v));
    }
    Ok(())
}

/// End-to-end visibility after `n` nodes: `v` for a bare link, `v^(2n)` otherwise.
pub fn swapped_visibility(v: f64, n: u64) -> f64 {
    swapped_visibility_with(v, n, ExponentConvention::Paper)
}

pub fn swapped_visibility_with(v: f64, n: u64, exponent: ExponentConvention) -> f64 {
    match exponent {
        ExponentConvention::Paper if n == 0 => v,
        ExponentConvention::Paper => v.powf(2.0 * n as f64),
        ExponentConvention::Links => v.powf(n as f64 + 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RepeaterStatus {
    Bounded,
    /// `v = 1`: no finite limit.
    Unbounded,
    /// No chain length yields key.
    NoKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RepeaterLimit {
    pub n_max: u64,
    pub status: RepeaterStatus,
}

/// Largest `n` whose end-to-end visibility stays strictly above the two-qubit
/// zero-key threshold for uniform leakage `L`.
pub fn max_repeaters(
    v: f64,
    leakage: f64,
    convention: ThresholdConvention,
) -> Result<RepeaterLimit> {
    max_repeaters_with(v, leakage, convention, ExponentConvention::Paper)
}

pub fn max_repeaters_with(
    v: f64,
    leakage: f64,
    convention: ThresholdConvention,
    exponent: ExponentConvention,
) -> Result<RepeaterLimit> {
    check_visibility(v)?;
    let threshold = zero_key_threshold(2, 2, LeakageModel::uniform(leakage)?, convention)?;
    if v == 1.0 {
        return Ok(RepeaterLimit {
            n_max: UNBOUNDED_SENTINEL,
            status: RepeaterStatus::Unbounded,
        });
    }
    let secure = |n: u64| swapped_visibility_with(v, n, exponent) > threshold;
    let no_key = RepeaterLimit {
        n_max: 0,
        status: RepeaterStatus::NoKey,
    };
    if v == 0.0 || !secure(0) {
        return Ok(no_key);
    }
    let ratio = match exponent {
        ExponentConvention::Paper => threshold.log2() / (2.0 * v.log2()),
        ExponentConvention::Links => threshold.log2() / v.log2() - 1.0,
    };
    let mut n = ratio.max(0.0).floor() as u64;
    // settle rounding at exact ties by direct comparison
    while n > 0 && !secure(n) {
        n -= 1;
    }
    while secure(n + 1) {
        n += 1;
    }
    Ok(RepeaterLimit {
        n_max: n,
        status: RepeaterStatus::Bounded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeaterPoint {
    pub n: u64,
    pub visibility: f64,
    pub bound: KeyRateBound,
}

/// Two-qubit key-rate bound for each chain length in `nodes`.
pub fn repeater_rate_curve(
    v: f64,
    leakage: f64,
    nodes: &[u64],
    space: &SettingsSpace,
    exponent: ExponentConvention,
) -> Result<Vec<RepeaterPoint>> {
    check_visibility(v)?;
    let model = LeakageModel::uniform(leakage)?;
    let grid: Vec<f64> = nodes
        .iter()
        .map(|&n| swapped_visibility_with(v, n, exponent))
        .collect();
    let bounds = rate_curve(2, 2, model, &grid, space)?;
    Ok(nodes
        .iter()
        .zip(grid)
        .zip(bounds)
        .map(|((&n, visibility), bound)| RepeaterPoint {
            n,
            visibility,
            bound,
        })
        .collect())
}
