//! Round-by-round sampling of the flagged convex-combination attack.
//!
//! Round `r` reads a fixed window of the ChaCha8 keystream starting at word
//! `r * WORDS_PER_ROUND`, so the aggregate counts do not depend on how rounds
//! are split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::attack::{
    eve_joint_distribution, mixing_weight_qv, prepare_attack, LeakageKind, LeakageModel,
    MixingParameters,
};
use crate::distribution::{total_correlation, JointDistribution};
use crate::measurement::MeasurementSet;
use crate::{Error, Result};

const DRAWS_PER_ROUND: usize = 8;
/// Each `f64` draw consumes two 32-bit words.
const WORDS_PER_ROUND: u128 = 2 * DRAWS_PER_ROUND as u128;
const CHUNK_ROUNDS: u64 = 1 << 15;

/// One value per outcome tuple for each of Eve's classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassTable<T> {
    pub sep_flag: Vec<T>,
    pub leaked: Vec<T>,
    pub question: Vec<T>,
}

impl<T: Copy> ClassTable<T> {
    fn cells(&self) -> impl Iterator<Item = T> + '_ {
        self.sep_flag
            .iter()
            .chain(&self.leaked)
            .chain(&self.question)
            .copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMasses {
    pub sep_flag: f64,
    pub leaked: f64,
    pub question: f64,
}

/// Empirical versus analytic statistics for one input tuple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputReport {
    pub inputs: Vec<usize>,
    pub rounds: u64,
    pub counts: ClassTable<u64>,
    pub empirical: ClassTable<f64>,
    pub analytic: ClassTable<f64>,
    /// `p̂(a⃗ | ?)`; empty when no round landed in `?`.
    pub empirical_question_conditional: Vec<f64>,
    pub analytic_question_conditional: Vec<f64>,
    pub max_joint_deviation: f64,
    pub max_conditional_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquaredTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub rounds: u64,
    pub seed: u64,
    pub v: f64,
    pub q_v: f64,
    pub model: LeakageModel,
    pub class_masses: ClassMasses,
    /// Fraction of rounds in which Eve obtained the outcomes, before γ reassignment.
    pub leaked_fraction: f64,
    pub analytic_leaked_fraction: f64,
    /// Binomial standard error of `leaked_fraction` around the analytic value.
    pub leaked_sigma: f64,
    pub per_input: Vec<InputReport>,
    pub max_joint_deviation: f64,
    pub max_conditional_deviation: f64,
    pub chi_squared: ChiSquaredTest,
}

struct Sampler {
    outcomes: usize,
    /// Per input tuple: cumulative tables for the separable and GHZ branches.
    cdf_sep: Vec<Vec<f64>>,
    cdf_ent: Vec<Vec<f64>>,
    gamma: Vec<Vec<f64>>,
    q_v: f64,
    model: LeakageModel,
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    let scaled = u * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= scaled).min(cdf.len() - 1)
}

impl Sampler {
    fn slots(&self) -> usize {
        self.cdf_sep.len() * 3 * self.outcomes
    }

    /// Counts laid out as `[input][class][outcome]`, followed by the leak-event count.
    fn run(&self, seed: u64, start: u64, end: u64) -> Vec<u64> {
        let mut counts = vec![0u64; self.slots() + 1];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(start as u128 * WORDS_PER_ROUND);
        let n_inputs = self.cdf_sep.len();
        let l = self.model.leakage;
        for _ in start..end {
            let u: [f64; DRAWS_PER_ROUND] = std::array::from_fn(|_| rng.random());
            let x = ((u[0] * n_inputs as f64) as usize).min(n_inputs - 1);
            let separable = u[1] < self.q_v;
            let a = if separable {
                inverse_cdf(&self.cdf_sep[x], u[2])
            } else {
                inverse_cdf(&self.cdf_ent[x], u[2])
            };
            let leaks = match self.model.kind {
                LeakageKind::Uniform => u[3] < l,
                LeakageKind::JunkOnly => separable && u[3] < l,
            };
            let class = match (separable, leaks) {
                (true, false) => 0,
                (true, true) if u[4] < self.gamma[x][a] => 2,
                (_, true) => 1,
                (false, false) => 2,
            };
            counts[(x * 3 + class) * self.outcomes + a] += 1;
            if leaks {
                counts[self.slots()] += 1;
            }
        }
        counts
    }
}

fn table_from(slice: &[u64], outcomes: usize) -> ClassTable<u64> {
    ClassTable {
        sep_flag: slice[..outcomes].to_vec(),
        leaked: slice[outcomes..2 * outcomes].to_vec(),
        question: slice[2 * outcomes..].to_vec(),
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Samples `rounds` rounds of the attack and compares them with the analytic tables.
///
/// `gamma` holds either one table shared by all input tuples or one per tuple
/// in [`MeasurementSet::input_tuples`] order.
pub fn simulate_rounds(
    settings: &MeasurementSet,
    v: f64,
    model: LeakageModel,
    gamma: &[MixingParameters],
    rounds: u64,
    seed: u64,
) -> Result<SimulationReport> {
    if rounds == 0 {
        return Err(Error::InvalidParameter("rounds must be at least 1".into()));
    }
    let d = settings.local_dim();
    let parties = settings.party_count();
    let q_v = mixing_weight_qv(d, parties, v)?;
    let tuples = settings.input_tuples();
    if gamma.len() != 1 && gamma.len() != tuples.len() {
        return Err(Error::InvalidGamma(format!(
            "expected 1 or {} γ tables, got {}",
            tuples.len(),
            gamma.len()
        )));
    }
    let gamma_for = |x: usize| {
        if gamma.len() == 1 {
            &gamma[0]
        } else {
            &gamma[x]
        }
    };

    let mut attacks = Vec::with_capacity(tuples.len());
    let mut analytic = Vec::with_capacity(tuples.len());
    for (x, inputs) in tuples.iter().enumerate() {
        let attack = prepare_attack(v, &settings.select(inputs)?)?;
        analytic.push(eve_joint_distribution(
            &attack.p_ent,
            &attack.p_sep,
            q_v,
            model,
            gamma_for(x),
        )?);
        attacks.push(attack);
    }
    let outcomes = attacks[0].p_ent.len();
    let sampler = Sampler {
        outcomes,
        cdf_sep: attacks
            .iter()
            .map(|a| cumulative(a.p_sep.probabilities()))
            .collect(),
        cdf_ent: attacks
            .iter()
            .map(|a| cumulative(a.p_ent.probabilities()))
            .collect(),
        gamma: (0..tuples.len())
            .map(|x| gamma_for(x).values().to_vec())
            .collect(),
        q_v,
        model,
    };

    let chunks = rounds.div_ceil(CHUNK_ROUNDS);
    let totals = (0..chunks)
        .into_par_iter()
        .map(|c| sampler.run(seed, c * CHUNK_ROUNDS, ((c + 1) * CHUNK_ROUNDS).min(rounds)))
        .reduce(
            || vec![0u64; sampler.slots() + 1],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let block = 3 * outcomes;
    let mut per_input = Vec::with_capacity(tuples.len());
    let mut chi_stat = 0.0;
    let mut chi_dof = 0usize;
    let mut chi_impossible = false;
    let (mut sep_total, mut leaked_total) = (0u64, 0u64);
    for (x, inputs) in tuples.iter().enumerate() {
        let counts = table_from(&totals[x * block..(x + 1) * block], outcomes);
        let n_x: u64 = counts.cells().sum();
        sep_total += counts.sep_flag.iter().sum::<u64>();
        leaked_total += counts.leaked.iter().sum::<u64>();
        let ejd = &analytic[x];
        let analytic_table = ClassTable {
            sep_flag: ejd.sep_flag_row().to_vec(),
            leaked: ejd.leaked_row().to_vec(),
            question: ejd.question_row().to_vec(),
        };
        let norm = |c: &[u64]| -> Vec<f64> {
            c.iter()
                .map(|&k| if n_x == 0 { 0.0 } else { k as f64 / n_x as f64 })
                .collect()
        };
        let empirical = ClassTable {
            sep_flag: norm(&counts.sep_flag),
            leaked: norm(&counts.leaked),
            question: norm(&counts.question),
        };
        let q_count: u64 = counts.question.iter().sum();
        let emp_cond: Vec<f64> = if q_count == 0 {
            Vec::new()
        } else {
            counts
                .question
                .iter()
                .map(|&k| k as f64 / q_count as f64)
                .collect()
        };
        let q_mass = ejd.question_mass();
        let ana_cond: Vec<f64> = if q_mass > 0.0 {
            ejd.question_row().iter().map(|w| w / q_mass).collect()
        } else {
            Vec::new()
        };
        let max_joint = max_diff(
            &empirical.cells().collect::<Vec<_>>(),
            &analytic_table.cells().collect::<Vec<_>>(),
        );
        let max_cond = if emp_cond.is_empty() || ana_cond.is_empty() {
            if emp_cond.len() == ana_cond.len() {
                0.0
            } else {
                1.0
            }
        } else {
            max_diff(&emp_cond, &ana_cond)
        };

        if n_x > 0 {
            let mut cells = 0usize;
            for (obs, exp) in counts.cells().zip(analytic_table.cells()) {
                let expected = exp * n_x as f64;
                if expected > 0.0 {
                    chi_stat += (obs as f64 - expected).powi(2) / expected;
                    cells += 1;
                } else if obs > 0 {
                    chi_impossible = true;
                }
            }
            chi_dof += cells.saturating_sub(1);
        }

        per_input.push(InputReport {
            inputs: inputs.clone(),
            rounds: n_x,
            counts,
            empirical,
            analytic: analytic_table,
            empirical_question_conditional: emp_cond,
            analytic_question_conditional: ana_cond,
            max_joint_deviation: max_joint,
            max_conditional_deviation: max_cond,
        });
    }

    let p_value = if chi_impossible {
        0.0
    } else if chi_dof == 0 {
        1.0
    } else {
        ChiSquared::new(chi_dof as f64)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sf(chi_stat)
    };
    let sep_flag = sep_total as f64 / rounds as f64;
    let leaked = leaked_total as f64 / rounds as f64;
    let analytic_leaked_fraction = match model.kind {
        LeakageKind::Uniform => model.leakage,
        LeakageKind::JunkOnly => q_v * model.leakage,
    };
    Ok(SimulationReport {
        rounds,
        seed,
        v,
        q_v,
        model,
        class_masses: ClassMasses {
            sep_flag,
            leaked,
            question: 1.0 - sep_flag - leaked,
        },
        leaked_fraction: totals[sampler.slots()] as f64 / rounds as f64,
        analytic_leaked_fraction,
        leaked_sigma: (analytic_leaked_fraction * (1.0 - analytic_leaked_fraction) / rounds as f64)
            .sqrt(),
        max_joint_deviation: per_input
            .iter()
            .map(|r| r.max_joint_deviation)
            .fold(0.0, f64::max),
        max_conditional_deviation: per_input
            .iter()
            .map(|r| r.max_conditional_deviation)
            .fold(0.0, f64::max),
        per_input,
        chi_squared: ChiSquaredTest {
            statistic: chi_stat,
            dof: chi_dof,
            p_value,
        },
    })
}

/// Plug-in estimate `Σ_x p̂(x) p̂(? | x) TC(p̂(·|?, x))`; the single-input case
/// is `p̂(?) TC(p̂(·|?))`.
pub fn empirical_objective(report: &SimulationReport) -> Result<f64> {
    let mut total = 0.0;
    let mut any = false;
    for input in &report.per_input {
        let q_count: u64 = input.counts.question.iter().sum();
        if q_count == 0 {
            continue;
        }
        any = true;
        let d = local_dim_of(input.counts.question.len(), input.inputs.len())?;
        let cond = JointDistribution::new(
            d,
            input.inputs.len(),
            input.empirical_question_conditional.clone(),
        )?;
        total += q_count as f64 / report.rounds as f64 * total_correlation(&cond);
    }
    if !any {
        return Err(Error::DegenerateClass);
    }
    Ok(total)
}

fn local_dim_of(outcomes: usize, parties: usize) -> Result<usize> {
    let d = (outcomes as f64).powf(1.0 / parties as f64).round() as usize;
    if d.checked_pow(parties as u32) == Some(outcomes) {
        Ok(d)
    } else {
        Err(Error::DimensionMismatch {
            expected: outcomes,
            found: d.pow(parties as u32),
        })
    }
}
