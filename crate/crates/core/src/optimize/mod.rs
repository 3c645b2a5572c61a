//! Key-rate upper bound `R ≤ (1/(N−1)) max_settings min_γ p(?) TC(p(·|?))`.

mod gamma;
mod settings;

use serde::Serialize;

pub use gamma::{minimize_over_gamma, GammaMinimum, DEFAULT_TOLERANCE, MAX_SWEEPS};
pub use settings::{maximize_over_settings, rate_curve, SettingsSpace, PHI_STEP, THETA_STEP};

use crate::attack::{eve_joint_distribution, question_conditional, LeakageModel, MixingParameters};
use crate::distribution::{total_correlation, JointDistribution};
use crate::measurement::{describe_settings, MeasurementSpec};
use crate::Result;

/// Name of the multipartite correlation measure recorded in outputs.
pub const INFORMATION_MEASURE: &str = "total_correlation";

/// `J(γ) = p(?) · TC(p(·|?))`, zero when the `?` class is empty.
pub fn weighted_objective(
    gamma: &MixingParameters,
    p_ent: &JointDistribution,
    p_sep: &JointDistribution,
    q_v: f64,
    model: LeakageModel,
) -> Result<f64> {
    let ejd = eve_joint_distribution(p_ent, p_sep, q_v, model, gamma)?;
    if ejd.question_mass() <= 0.0 {
        return Ok(0.0);
    }
    let (p_question, conditional) = question_conditional(&ejd)?;
    Ok(p_question * total_correlation(&conditional))
}

/// An upper bound on the key rate together with the optimizing settings and attack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateBound {
    /// Bits per round.
    pub rate: f64,
    pub v: f64,
    pub local_dim: usize,
    pub parties: usize,
    pub model: LeakageModel,
    /// Maximizing per-party settings; empty when the state is separable.
    pub settings: Vec<MeasurementSpec>,
    pub gamma_star: MixingParameters,
    /// `J*` at the maximizing settings, before the `1/(N−1)` factor.
    pub objective: f64,
    pub p_question: f64,
    /// Whether the closed-form γ is feasible at the maximizing settings.
    pub gamma_feasible: bool,
    pub converged: bool,
    /// True when `v` is at or below the separability threshold (rate 0 by definition).
    pub separable: bool,
    pub information_measure: &'static str,
}

impl KeyRateBound {
    pub fn settings_descriptor(&self) -> String {
        if self.separable {
            "separable".to_string()
        } else {
            describe_settings(&self.settings)
        }
    }
}
