//! Outcome-tuple probability tables and classical information measures.
//!
//! All logarithms are base 2. Probabilities below [`ENTROPY_FLOOR`] are treated
//! as exact zeros inside entropy terms.

use serde::Serialize;

use crate::linalg::{tensor_product, QuantumState};
use crate::measurement::ProjectiveMeasurement;
use crate::{check_scenario, outcome_count, Error, Result};

pub const ENTROPY_FLOOR: f64 = 1e-14;
/// Tolerance on the total probability mass of a table.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Entries above `-NEGATIVE_SLACK` are clamped to zero; anything lower is an error.
pub const NEGATIVE_SLACK: f64 = 1e-12;
/// Largest tolerated imaginary part of a Born-rule trace.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// `p(a⃗)` over `{0..d-1}^N` for one fixed input tuple, row-major in the outcome digits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution {
    local_dim: usize,
    parties: usize,
    probabilities: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inputs: Option<Vec<usize>>,
}

impl JointDistribution {
    pub fn new(local_dim: usize, parties: usize, mut probabilities: Vec<f64>) -> Result<Self> {
        check_scenario(local_dim, parties)?;
        let expected = outcome_count(local_dim, parties);
        if probabilities.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: probabilities.len(),
            });
        }
        for p in probabilities.iter_mut() {
            if !p.is_finite() || *p < -NEGATIVE_SLACK {
                return Err(Error::InvalidDistribution(format!(
                    "entry {p} is not a probability"
                )));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}"
            )));
        }
        Ok(Self {
            local_dim,
            parties,
            probabilities,
            inputs: None,
        })
    }

    /// Normalizes a non-negative table by its sum.
    pub fn from_weights(local_dim: usize, parties: usize, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::InvalidDistribution("weights have no mass".into()));
        }
        Self::new(
            local_dim,
            parties,
            weights.iter().map(|w| w / total).collect(),
        )
    }

    pub fn with_inputs(mut self, inputs: Vec<usize>) -> Self {
        self.inputs = Some(inputs);
        self
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn inputs(&self) -> Option<&[usize]> {
        self.inputs.as_deref()
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Outcome digits `(a_1, ..., a_N)` of a composite index.
    pub fn outcome_digits(&self, index: usize) -> Vec<usize> {
        outcome_digits(self.local_dim, self.parties, index)
    }

    /// Marginal of a single party.
    pub fn marginal(&self, party: usize) -> Vec<f64> {
        marginal_of(self.local_dim, self.parties, &self.probabilities, party)
    }

    /// Marginal over a subset of parties, indexed row-major in the subset's digits.
    pub fn subset_marginal(&self, subset: &[usize]) -> Vec<f64> {
        let d = self.local_dim;
        let mut out = vec![0.0; d.pow(subset.len() as u32)];
        for (idx, p) in self.probabilities.iter().enumerate() {
            let digits = self.outcome_digits(idx);
            let key = subset.iter().fold(0, |acc, &party| acc * d + digits[party]);
            out[key] += p;
        }
        out
    }
}

pub fn outcome_digits(d: usize, parties: usize, index: usize) -> Vec<usize> {
    let mut digits = vec![0; parties];
    let mut rest = index;
    for slot in digits.iter_mut().rev() {
        *slot = rest % d;
        rest /= d;
    }
    digits
}

/// Single-party marginal of a (possibly unnormalized) row-major table.
pub(crate) fn marginal_of(d: usize, parties: usize, table: &[f64], party: usize) -> Vec<f64> {
    let stride = d.pow((parties - 1 - party) as u32);
    let mut out = vec![0.0; d];
    for (idx, p) in table.iter().enumerate() {
        out[(idx / stride) % d] += p;
    }
    out
}

/// `p(a⃗) = Tr((P_{a_1} ⊗ ... ⊗ P_{a_N}) ρ)`.
pub fn born_distribution(
    state: &QuantumState,
    measurements: &[&ProjectiveMeasurement],
) -> Result<JointDistribution> {
    let d = state.local_dim();
    let parties = state.parties();
    if measurements.len() != parties {
        return Err(Error::DimensionMismatch {
            expected: parties,
            found: measurements.len(),
        });
    }
    if let Some(m) = measurements.iter().find(|m| m.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.dim(),
        });
    }
    let n = outcome_count(d, parties);
    let mut probs = Vec::with_capacity(n);
    for idx in 0..n {
        let digits = outcome_digits(d, parties, idx);
        let mut op = measurements[0].outcomes()[digits[0]].clone();
        for (m, &a) in measurements.iter().zip(&digits).skip(1) {
            op = tensor_product(&op, &m.outcomes()[a]);
        }
        let p = op.trace_product(state.matrix());
        if p.im.abs() > IMAGINARY_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "Born probability has imaginary part {:e}",
                p.im
            )));
        }
        probs.push(p.re);
    }
    JointDistribution::new(d, parties, probs)
}

/// `-Σ p log2 p` with `0 log 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > ENTROPY_FLOOR)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}

/// `Σ_i H(A_i) - H(A_1 ... A_N)`; the mutual information when `N = 2`.
pub fn total_correlation(p: &JointDistribution) -> f64 {
    let marginals: f64 = (0..p.parties)
        .map(|party| shannon_entropy(&p.marginal(party)))
        .sum();
    marginals - shannon_entropy(&p.probabilities)
}

/// Checks that every subset marginal agrees across distributions whose input
/// tuples coincide on that subset.
pub fn check_no_signalling(dists: &[JointDistribution], tol: f64) -> Result<()> {
    for (i, a) in dists.iter().enumerate() {
        for b in &dists[i + 1..] {
            let (Some(xa), Some(xb)) = (a.inputs(), b.inputs()) else {
                return Err(Error::InvalidDistribution(
                    "no-signalling check needs input metadata".into(),
                ));
            };
            if a.parties != b.parties || a.local_dim != b.local_dim {
                return Err(Error::DimensionMismatch {
                    expected: a.len(),
                    found: b.len(),
                });
            }
            let shared: Vec<usize> = (0..a.parties).filter(|&k| xa[k] == xb[k]).collect();
            // every non-empty subset of the parties whose inputs agree
            for mask in 1u32..(1 << shared.len()) {
                let subset: Vec<usize> = shared
                    .iter()
                    .enumerate()
                    .filter(|(bit, _)| mask & (1 << bit) != 0)
                    .map(|(_, &k)| k)
                    .collect();
                let ma = a.subset_marginal(&subset);
                let mb = b.subset_marginal(&subset);
                let gap = ma
                    .iter()
                    .zip(&mb)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                if gap > tol {
                    return Err(Error::InvalidDistribution(format!(
                        "signalling detected on parties {subset:?} between inputs {xa:?} and {xb:?} (gap {gap:e})"
                    )));
                }
            }
        }
    }
    Ok(())
}
