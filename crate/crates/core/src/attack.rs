//! The flagged convex-combination attack.
//!
//! The isotropic state `ρ_v` is rewritten as `q_v ρ_sep + (1 - q_v) |φ><φ|`.
//! Eve tags separable rounds with product flags (aggregated here into a single
//! [`EveClass::SepFlag`]), learns every party's outcome in leaked rounds, and
//! labels unleaked entangled rounds `?`. A fraction `γ_a⃗` of leaked separable
//! rounds with outcome `a⃗` is moved into `?` to flatten the `?`-conditional
//! statistics.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::distribution::{born_distribution, JointDistribution};
use crate::linalg::{ghz_projector, sep_isotropic};
use crate::measurement::ProjectiveMeasurement;
use crate::{check_scenario, Error, Result};

/// Slack allowed on `γ ≤ 1` when deciding closed-form feasibility.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakageKind {
    /// Outcomes leak with the same probability in every round.
    Uniform,
    /// Outcomes leak only from rounds in which the separable state was sent.
    #[serde(rename = "junk")]
    JunkOnly,
}

impl fmt::Display for LeakageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LeakageKind::Uniform => "uniform",
            LeakageKind::JunkOnly => "junk",
        })
    }
}

impl FromStr for LeakageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(LeakageKind::Uniform),
            "junk" | "junk-only" => Ok(LeakageKind::JunkOnly),
            _ => Err(Error::Parse(format!("unknown leakage model '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakageModel {
    pub kind: LeakageKind,
    pub leakage: f64,
}

impl LeakageModel {
    pub fn new(kind: LeakageKind, leakage: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&leakage) {
            return Err(Error::LeakageOutOfRange(leakage));
        }
        Ok(Self { kind, leakage })
    }

    pub fn uniform(leakage: f64) -> Result<Self> {
        Self::new(LeakageKind::Uniform, leakage)
    }

    pub fn junk_only(leakage: f64) -> Result<Self> {
        Self::new(LeakageKind::JunkOnly, leakage)
    }
}

/// Which form of the uniform-leakage zero-key threshold to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdConvention {
    /// `1/(1+K) + K L / ((1+K)(1-L) + L)`, the closed form as typeset.
    #[serde(rename = "stated")]
    AsStated,
    /// `1 / ((1+K)(1-L) + L)`, from propagating the `q_v` feasibility bound.
    #[serde(rename = "derived")]
    AsDerived,
}

impl fmt::Display for ThresholdConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdConvention::AsStated => "stated",
            ThresholdConvention::AsDerived => "derived",
        })
    }
}

impl FromStr for ThresholdConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stated" | "as-stated" => Ok(ThresholdConvention::AsStated),
            "derived" | "as-derived" => Ok(ThresholdConvention::AsDerived),
            _ => Err(Error::Parse(format!("unknown threshold convention '{s}'"))),
        }
    }
}

/// Eve's label for a round.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EveClass {
    /// Any product-state flag; these rounds carry no key.
    SepFlag,
    /// Eve learned the full outcome tuple (composite index).
    Leaked(usize),
    /// Unknown: the only class that can carry key.
    Question,
}

/// `γ_a⃗ ∈ [0, 1]` per outcome tuple, for one input tuple.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MixingParameters {
    gamma: Vec<f64>,
}

impl MixingParameters {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if let Some(g) = gamma.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::InvalidGamma(format!("entry {g} outside [0, 1]")));
        }
        Ok(Self { gamma })
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.gamma
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }
}

/// `K = d^(N-1)`.
fn k_factor(d: usize, parties: usize) -> f64 {
    (d as f64).powi(parties as i32 - 1)
}

/// `1 / (1 + d^(N-1))`: at or below this visibility the state is fully separable.
pub fn separability_threshold(d: usize, parties: usize) -> Result<f64> {
    check_scenario(d, parties)?;
    Ok(1.0 / (1.0 + k_factor(d, parties)))
}

/// Weight of `ρ_sep` in `ρ_v = q_v ρ_sep + (1 - q_v) |φ><φ|`: `(1+K)(1-v)/K`.
pub fn mixing_weight_qv(d: usize, parties: usize, v: f64) -> Result<f64> {
    let threshold = separability_threshold(d, parties)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::VisibilityOutOfRange(v));
    }
    if v < threshold {
        return Err(Error::Separable { v, threshold });
    }
    let k = k_factor(d, parties);
    Ok(((1.0 + k) * (1.0 - v) / k).clamp(0.0, 1.0))
}

/// Largest visibility at which the closed-form γ makes the `?`-conditional flat.
pub fn zero_key_threshold(
    d: usize,
    parties: usize,
    model: LeakageModel,
    convention: ThresholdConvention,
) -> Result<f64> {
    check_scenario(d, parties)?;
    let k = k_factor(d, parties);
    let l = model.leakage;
    Ok(match (model.kind, convention) {
        (LeakageKind::JunkOnly, _) => (1.0 + l) / (1.0 + k + l),
        (LeakageKind::Uniform, ThresholdConvention::AsDerived) => 1.0 / ((1.0 + k) * (1.0 - l) + l),
        (LeakageKind::Uniform, ThresholdConvention::AsStated) => {
            1.0 / (1.0 + k) + k * l / ((1.0 + k) * (1.0 - l) + l)
        }
    })
}

/// The two branch distributions and the mixing weight for one input tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackInputs {
    pub p_ent: JointDistribution,
    pub p_sep: JointDistribution,
    pub q_v: f64,
}

/// Born statistics of the GHZ and separable branches under the given measurements.
pub fn prepare_attack(v: f64, measurements: &[&ProjectiveMeasurement]) -> Result<AttackInputs> {
    let d = measurements
        .first()
        .map(|m| m.dim())
        .ok_or(Error::EmptySettings)?;
    let parties = measurements.len();
    let q_v = mixing_weight_qv(d, parties, v)?;
    let p_ent = born_distribution(&ghz_projector(d, parties)?, measurements)?;
    let p_sep = born_distribution(&sep_isotropic(d, parties)?, measurements)?;
    Ok(AttackInputs { p_ent, p_sep, q_v })
}

/// Eve's joint table `p(a⃗, e)` for a fixed input tuple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EveJointDistribution {
    local_dim: usize,
    parties: usize,
    /// `p(a⃗, SepFlag)`.
    sep_flag: Vec<f64>,
    /// `p(a⃗, Leaked(a⃗))`; other leaked labels have zero mass.
    leaked: Vec<f64>,
    /// `p(a⃗, ?)`.
    question: Vec<f64>,
    q_v: f64,
    model: LeakageModel,
}

impl EveJointDistribution {
    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn q_v(&self) -> f64 {
        self.q_v
    }

    pub fn model(&self) -> LeakageModel {
        self.model
    }

    pub fn outcome_count(&self) -> usize {
        self.question.len()
    }

    pub fn sep_flag_row(&self) -> &[f64] {
        &self.sep_flag
    }

    pub fn leaked_row(&self) -> &[f64] {
        &self.leaked
    }

    pub fn question_row(&self) -> &[f64] {
        &self.question
    }

    /// `p(a⃗, e)`.
    pub fn probability(&self, outcome: usize, class: &EveClass) -> f64 {
        match class {
            EveClass::SepFlag => self.sep_flag[outcome],
            EveClass::Leaked(a) if *a == outcome => self.leaked[outcome],
            EveClass::Leaked(_) => 0.0,
            EveClass::Question => self.question[outcome],
        }
    }

    pub fn sep_flag_mass(&self) -> f64 {
        self.sep_flag.iter().sum()
    }

    pub fn leaked_mass(&self) -> f64 {
        self.leaked.iter().sum()
    }

    pub fn question_mass(&self) -> f64 {
        self.question.iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.sep_flag_mass() + self.leaked_mass() + self.question_mass()
    }

    /// `Σ_e p(a⃗, e)`.
    pub fn outcome_marginal(&self) -> Vec<f64> {
        (0..self.outcome_count())
            .map(|a| self.sep_flag[a] + self.leaked[a] + self.question[a])
            .collect()
    }
}

fn check_pair(p_ent: &JointDistribution, p_sep: &JointDistribution) -> Result<()> {
    if p_ent.local_dim() != p_sep.local_dim() || p_ent.parties() != p_sep.parties() {
        return Err(Error::DimensionMismatch {
            expected: p_ent.len(),
            found: p_sep.len(),
        });
    }
    Ok(())
}

fn check_weight(q_v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q_v) {
        return Err(Error::InvalidParameter(format!(
            "mixing weight {q_v} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Unnormalized `p(a⃗, ?)` for a raw γ table; shared with the optimizer.
pub(crate) fn question_weights(
    p_ent: &[f64],
    p_sep: &[f64],
    q_v: f64,
    model: LeakageModel,
    gamma: &[f64],
    out: &mut [f64],
) {
    let l = model.leakage;
    let ent_share = match model.kind {
        LeakageKind::Uniform => (1.0 - q_v) * (1.0 - l),
        LeakageKind::JunkOnly => 1.0 - q_v,
    };
    for (((o, &pe), &ps), &g) in out.iter_mut().zip(p_ent).zip(p_sep).zip(gamma) {
        *o = q_v * l * g * ps + ent_share * pe;
    }
}

/// Builds `p(a⃗, e)` for both leakage models.
pub fn eve_joint_distribution(
    p_ent: &JointDistribution,
    p_sep: &JointDistribution,
    q_v: f64,
    model: LeakageModel,
    gamma: &MixingParameters,
) -> Result<EveJointDistribution> {
    check_pair(p_ent, p_sep)?;
    check_weight(q_v)?;
    if gamma.len() != p_ent.len() {
        return Err(Error::DimensionMismatch {
            expected: p_ent.len(),
            found: gamma.len(),
        });
    }
    let l = model.leakage;
    let pe = p_ent.probabilities();
    let ps = p_sep.probabilities();
    let g = gamma.values();
    let sep_flag = ps.iter().map(|s| q_v * (1.0 - l) * s).collect();
    let leaked = (0..pe.len())
        .map(|a| {
            let from_sep = q_v * l * (1.0 - g[a]) * ps[a];
            match model.kind {
                LeakageKind::Uniform => from_sep + (1.0 - q_v) * l * pe[a],
                LeakageKind::JunkOnly => from_sep,
            }
        })
        .collect();
    let mut question = vec![0.0; pe.len()];
    question_weights(pe, ps, q_v, model, g, &mut question);
    Ok(EveJointDistribution {
        local_dim: p_ent.local_dim(),
        parties: p_ent.parties(),
        sep_flag,
        leaked,
        question,
        q_v,
        model,
    })
}

/// `p(?)` and `p(a⃗ | ?)` by Bayes' rule.
pub fn question_conditional(ejd: &EveJointDistribution) -> Result<(f64, JointDistribution)> {
    let mass = ejd.question_mass();
    if mass.is_nan() || mass <= 0.0 {
        return Err(Error::DegenerateClass);
    }
    let conditional = JointDistribution::new(
        ejd.local_dim,
        ejd.parties,
        ejd.question.iter().map(|w| w / mass).collect(),
    )?;
    Ok((mass, conditional))
}

/// The γ that equalizes `p(a⃗ | ?)`; entries may exceed 1 (or be infinite when `q_v L = 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormGamma {
    pub gamma: Vec<f64>,
    pub feasible: bool,
}

impl ClosedFormGamma {
    /// Entries clipped into `[0, 1]`.
    pub fn clamped(&self) -> MixingParameters {
        MixingParameters {
            gamma: self.gamma.iter().map(|g| g.clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn max_entry(&self) -> f64 {
        self.gamma.iter().copied().fold(0.0, f64::max)
    }
}

/// `γ_a⃗ = c (1 - q_v)(p_max - p_ent(a⃗)) / (q_v L p_sep(a⃗))` with `c = 1 - L` for
/// uniform leakage and `c = 1` for junk-only leakage.
pub fn closed_form_gamma(
    p_ent: &JointDistribution,
    p_sep: &JointDistribution,
    q_v: f64,
    model: LeakageModel,
) -> Result<ClosedFormGamma> {
    check_pair(p_ent, p_sep)?;
    check_weight(q_v)?;
    let pe = p_ent.probabilities();
    let ps = p_sep.probabilities();
    if ps.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidDistribution(
            "separable branch must give every outcome positive probability".into(),
        ));
    }
    let p_max = pe.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let l = model.leakage;
    let denom_scale = q_v * l;
    let gamma: Vec<f64> = if denom_scale == 0.0 {
        pe.iter()
            .map(|&p| {
                if p_max - p <= FEASIBILITY_SLACK {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    } else {
        let ent_factor = match model.kind {
            LeakageKind::Uniform => 1.0 - l,
            LeakageKind::JunkOnly => 1.0,
        };
        pe.iter()
            .zip(ps)
            .map(|(&p, &s)| ent_factor * (1.0 - q_v) * (p_max - p) / (denom_scale * s))
            .collect()
    };
    let feasible = gamma.iter().all(|&g| g <= 1.0 + FEASIBILITY_SLACK);
    Ok(ClosedFormGamma { gamma, feasible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::total_correlation;
    use crate::linalg::isotropic_state;
    use crate::measurement::{computational_basis, qubit_bloch_measurement, ProjectiveMeasurement};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zz(d: usize, n: usize) -> Vec<ProjectiveMeasurement> {
        (0..n).map(|_| computational_basis(d).unwrap()).collect()
    }

    fn inputs(v: f64, d: usize, n: usize) -> AttackInputs {
        let ms = zz(d, n);
        let refs: Vec<_> = ms.iter().collect();
        prepare_attack(v, &refs).unwrap()
    }

    #[test]
    fn separability_anchors() {
        assert!((separability_threshold(2, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((separability_threshold(3, 2).unwrap() - 0.25).abs() < 1e-15);
        assert!((separability_threshold(2, 3).unwrap() - 0.2).abs() < 1e-15);
        assert!(separability_threshold(1, 3).is_err());
    }

    #[test]
    fn mixing_weight_anchors() {
        assert_eq!(mixing_weight_qv(2, 2, 1.0).unwrap(), 0.0);
        assert!((mixing_weight_qv(2, 2, 1.0 / 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((mixing_weight_qv(2, 2, 0.5).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(
            mixing_weight_qv(2, 2, 0.3),
            Err(Error::Separable { .. })
        ));
        assert!(mixing_weight_qv(2, 2, 1.1).is_err());
    }

    #[test]
    fn mixing_weight_reconstructs_state() {
        for (d, n) in [(2, 2), (3, 2), (2, 3)] {
            let sep = sep_isotropic(d, n).unwrap();
            let ghz = ghz_projector(d, n).unwrap();
            for v in [0.5, 0.62, 0.9] {
                let q = mixing_weight_qv(d, n, v).unwrap();
                let rebuilt = &sep.matrix().scale(q) + &ghz.matrix().scale(1.0 - q);
                let rho = isotropic_state(d, n, v).unwrap();
                assert!(rebuilt.max_abs_diff(rho.matrix()) < 1e-12);
            }
        }
    }

    #[test]
    fn thresholds_without_leakage_equal_separability() {
        for (d, n) in [(2, 2), (3, 2), (2, 3)] {
            let sep = separability_threshold(d, n).unwrap();
            for conv in [
                ThresholdConvention::AsStated,
                ThresholdConvention::AsDerived,
            ] {
                for model in [
                    LeakageModel::uniform(0.0).unwrap(),
                    LeakageModel::junk_only(0.0).unwrap(),
                ] {
                    assert!((zero_key_threshold(d, n, model, conv).unwrap() - sep).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn threshold_values() {
        let junk = LeakageModel::junk_only(0.1).unwrap();
        let l = 0.1;
        // two-qubit junk form as typeset: 1/3 + 2L/(3(L+3))
        let typeset = 1.0 / 3.0 + 2.0 * l / (3.0 * (l + 3.0));
        for conv in [
            ThresholdConvention::AsStated,
            ThresholdConvention::AsDerived,
        ] {
            let t = zero_key_threshold(2, 2, junk, conv).unwrap();
            assert!((t - 0.3548387).abs() < 1e-7);
            assert!((t - typeset).abs() < 1e-12);
        }
        let uni = LeakageModel::uniform(0.1).unwrap();
        let derived = zero_key_threshold(2, 2, uni, ThresholdConvention::AsDerived).unwrap();
        let stated = zero_key_threshold(2, 2, uni, ThresholdConvention::AsStated).unwrap();
        assert!((derived - 0.3571429).abs() < 1e-7);
        assert!((stated - 0.4047619).abs() < 1e-7);
        // two-qubit uniform form as typeset: 1/3 + 2L/(3 - 2L)
        assert!((stated - (1.0 / 3.0 + 2.0 * l / (3.0 - 2.0 * l))).abs() < 1e-12);
    }

    #[test]
    fn junk_threshold_matches_general_typeset_form() {
        for (d, n) in [(2, 2), (3, 2), (2, 3), (4, 2)] {
            let k = (d as f64).powi(n as i32 - 1);
            for l in [0.05, 0.1, 0.3, 0.7] {
                let typeset = 1.0 / (1.0 + k) + k * l / ((1.0 + k) * (l + 1.0 + k));
                let t = zero_key_threshold(
                    d,
                    n,
                    LeakageModel::junk_only(l).unwrap(),
                    ThresholdConvention::AsDerived,
                )
                .unwrap();
                assert!((t - typeset).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_gamma_uniform_question_mass() {
        let a = inputs(0.6, 2, 2);
        let model = LeakageModel::uniform(0.2).unwrap();
        let ejd = eve_joint_distribution(
            &a.p_ent,
            &a.p_sep,
            a.q_v,
            model,
            &MixingParameters::constant(4, 0.0).unwrap(),
        )
        .unwrap();
        assert!((ejd.question_mass() - (1.0 - a.q_v) * 0.8).abs() < 1e-12);
    }

    #[test]
    fn ideal_state_class_masses() {
        let a = inputs(1.0, 2, 2);
        let model = LeakageModel::uniform(0.15).unwrap();
        let ejd = eve_joint_distribution(
            &a.p_ent,
            &a.p_sep,
            a.q_v,
            model,
            &MixingParameters::constant(4, 0.4).unwrap(),
        )
        .unwrap();
        assert_eq!(ejd.sep_flag_mass(), 0.0);
        assert!((ejd.leaked_mass() - 0.15).abs() < 1e-12);
        assert!((ejd.question_mass() - 0.85).abs() < 1e-12);
        assert_eq!(ejd.probability(0, &EveClass::Leaked(3)), 0.0);
    }

    #[test]
    fn marginal_consistency_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cases = [(2usize, 2usize), (3, 2), (2, 3)];
        for i in 0..1000 {
            let (d, n) = cases[i % 3];
            let sep = separability_threshold(d, n).unwrap();
            let v = rng.random_range(sep..=1.0);
            let l = rng.random_range(0.0..=1.0);
            let kind = if rng.random_bool(0.5) {
                LeakageKind::Uniform
            } else {
                LeakageKind::JunkOnly
            };
            let m1 =
                qubit_bloch_measurement(rng.random_range(0.0..3.2), rng.random_range(0.0..6.3));
            let ms: Vec<ProjectiveMeasurement> = if d == 2 {
                (0..n)
                    .map(|k| {
                        if k == 0 {
                            m1.clone()
                        } else {
                            computational_basis(2).unwrap()
                        }
                    })
                    .collect()
            } else {
                zz(d, n)
            };
            let refs: Vec<_> = ms.iter().collect();
            let a = prepare_attack(v, &refs).unwrap();
            let gamma = MixingParameters::new(
                (0..a.p_ent.len())
                    .map(|_| rng.random_range(0.0..=1.0))
                    .collect(),
            )
            .unwrap();
            let ejd = eve_joint_distribution(
                &a.p_ent,
                &a.p_sep,
                a.q_v,
                LeakageModel::new(kind, l).unwrap(),
                &gamma,
            )
            .unwrap();
            assert!((ejd.total_mass() - 1.0).abs() < 1e-9);
            let observed = born_distribution(&isotropic_state(d, n, v).unwrap(), &refs).unwrap();
            for (idx, m) in ejd.outcome_marginal().iter().enumerate() {
                let mix = a.q_v * a.p_sep.probabilities()[idx]
                    + (1.0 - a.q_v) * a.p_ent.probabilities()[idx];
                assert!((m - mix).abs() < 1e-12);
                assert!((m - observed.probabilities()[idx]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn conditional_anchors() {
        let a = inputs(1.0, 2, 2);
        let model = LeakageModel::uniform(0.0).unwrap();
        let ejd = eve_joint_distribution(
            &a.p_ent,
            &a.p_sep,
            a.q_v,
            model,
            &MixingParameters::constant(4, 0.3).unwrap(),
        )
        .unwrap();
        let (pq, cond) = question_conditional(&ejd).unwrap();
        assert!((pq - 1.0).abs() < 1e-12);
        assert_eq!(cond.probabilities(), a.p_ent.probabilities());

        let a = inputs(1.0 / 3.0, 2, 2);
        assert!((a.q_v - 1.0).abs() < 1e-12);
        let model = LeakageModel::uniform(0.2).unwrap();
        let ejd = eve_joint_distribution(
            &a.p_ent,
            &a.p_sep,
            a.q_v,
            model,
            &MixingParameters::constant(4, 1.0).unwrap(),
        )
        .unwrap();
        let (_, cond) = question_conditional(&ejd).unwrap();
        for (x, y) in cond.probabilities().iter().zip(a.p_sep.probabilities()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_question_class() {
        let a = inputs(1.0, 2, 2);
        let model = LeakageModel::uniform(1.0).unwrap();
        let ejd = eve_joint_distribution(
            &a.p_ent,
            &a.p_sep,
            a.q_v,
            model,
            &MixingParameters::constant(4, 0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(question_conditional(&ejd), Err(Error::DegenerateClass));
    }

    #[test]
    fn closed_form_flat_input() {
        let rho0 = isotropic_state(2, 2, 0.0).unwrap();
        let ms = zz(2, 2);
        let refs: Vec<_> = ms.iter().collect();
        let flat = born_distribution(&rho0, &refs).unwrap();
        let a = inputs(0.5, 2, 2);
        let cf =
            closed_form_gamma(&flat, &a.p_sep, a.q_v, LeakageModel::uniform(0.1).unwrap()).unwrap();
        assert!(cf.feasible);
        assert!(cf.gamma.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn closed_form_worked_values() {
        let model = LeakageModel::uniform(0.1).unwrap();
        let a = inputs(0.34, 2, 2);
        assert!((a.q_v - 0.99).abs() < 1e-12);
        let cf = closed_form_gamma(&a.p_ent, &a.p_sep, a.q_v, model).unwrap();
        let expected = 0.9 * 0.01 * 0.5 / (0.99 * 0.1 / 6.0);
        assert!((cf.gamma[1] - expected).abs() < 1e-9);
        assert!((cf.gamma[1] - 0.272727).abs() < 1e-6);
        assert!((cf.gamma[2] - expected).abs() < 1e-9);
        assert_eq!(cf.gamma[0], 0.0);
        assert_eq!(cf.gamma[3], 0.0);
        assert!(cf.feasible);

        let a = inputs(0.38, 2, 2);
        assert!((a.q_v - 0.93).abs() < 1e-12);
        let cf = closed_form_gamma(&a.p_ent, &a.p_sep, a.q_v, model).unwrap();
        let expected = 0.9 * 0.07 * 0.5 / (0.093 / 6.0);
        assert!((cf.gamma[1] - expected).abs() < 1e-9);
        assert!((cf.gamma[1] - 2.032).abs() < 1e-3);
        assert!(!cf.feasible);
    }

    #[test]
    fn closed_form_without_leakage() {
        let a = inputs(0.6, 2, 2);
        let cf = closed_form_gamma(
            &a.p_ent,
            &a.p_sep,
            a.q_v,
            LeakageModel::uniform(0.0).unwrap(),
        )
        .unwrap();
        assert!(!cf.feasible);
        assert!(cf.gamma[1].is_infinite());
        assert_eq!(cf.gamma[0], 0.0);
        assert_eq!(cf.clamped().values(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn feasible_gamma_flattens_conditional() {
        for kind in [LeakageKind::Uniform, LeakageKind::JunkOnly] {
            for (d, n) in [(2, 2), (3, 2), (2, 3)] {
                let model = LeakageModel::new(kind, 0.2).unwrap();
                let t = zero_key_threshold(d, n, model, ThresholdConvention::AsDerived).unwrap();
                let sep = separability_threshold(d, n).unwrap();
                let v = sep + 0.7 * (t - sep);
                let a = inputs(v, d, n);
                let cf = closed_form_gamma(&a.p_ent, &a.p_sep, a.q_v, model).unwrap();
                assert!(cf.feasible);
                let ejd = eve_joint_distribution(&a.p_ent, &a.p_sep, a.q_v, model, &cf.clamped())
                    .unwrap();
                let (_, cond) = question_conditional(&ejd).unwrap();
                let first = cond.probabilities()[0];
                assert!(cond
                    .probabilities()
                    .iter()
                    .all(|p| (p - first).abs() < 1e-9));
                assert!(total_correlation(&cond).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn feasibility_flips_at_derived_threshold() {
        for kind in [LeakageKind::Uniform, LeakageKind::JunkOnly] {
            for (d, n) in [(2, 2), (3, 2), (2, 3)] {
                for step in 1..=6 {
                    let l = 0.05 * step as f64;
                    let model = LeakageModel::new(kind, l).unwrap();
                    let t =
                        zero_key_threshold(d, n, model, ThresholdConvention::AsDerived).unwrap();
                    for (v, expect) in [(t - 1e-4, true), (t + 1e-4, false)] {
                        let a = inputs(v, d, n);
                        let cf = closed_form_gamma(&a.p_ent, &a.p_sep, a.q_v, model).unwrap();
                        assert_eq!(cf.feasible, expect, "{kind:?} ({d},{n}) L={l} v={v}");
                    }
                }
            }
        }
    }

    #[test]
    fn junk_leaked_mass_with_zero_gamma() {
        for v in [0.4, 0.55, 0.8, 1.0] {
            let a = inputs(v, 2, 2);
            let l = 0.25;
            let ejd = eve_joint_distribution(
                &a.p_ent,
                &a.p_sep,
                a.q_v,
                LeakageModel::junk_only(l).unwrap(),
                &MixingParameters::constant(4, 0.0).unwrap(),
            )
            .unwrap();
            assert!((ejd.leaked_mass() - a.q_v * l).abs() < 1e-12);
            assert!((ejd.leaked_mass() - 1.5 * l * (1.0 - v)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(LeakageModel::uniform(1.2).is_err());
        assert!(MixingParameters::new(vec![0.5, 1.5]).is_err());
        let a = inputs(0.6, 2, 2);
        let b = inputs(0.6, 3, 2);
        let g = MixingParameters::constant(4, 0.0).unwrap();
        let m = LeakageModel::uniform(0.1).unwrap();
        assert!(eve_joint_distribution(&a.p_ent, &b.p_sep, a.q_v, m, &g).is_err());
        assert!(eve_joint_distribution(&a.p_ent, &a.p_sep, 1.5, m, &g).is_err());
        let short = MixingParameters::constant(3, 0.0).unwrap();
        assert!(eve_joint_distribution(&a.p_ent, &a.p_sep, a.q_v, m, &short).is_err());
    }
}
