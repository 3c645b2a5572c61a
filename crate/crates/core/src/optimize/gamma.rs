//! Eve's side of the max-min: minimize `p(?) · TC(p(·|?))` over `γ ∈ [0,1]^{d^N}`.
//!
//! Multi-start projected coordinate descent. Each coordinate step is a
//! bounded 1-D search (coarse scan, then golden section on the best cell),
//! so iterates never leave the box. Outcomes with identical `(p_ent, p_sep)`
//! share one variable during the main search; the best tied solution is then
//! polished with every outcome free.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attack::{closed_form_gamma, question_weights, LeakageModel, MixingParameters};
use crate::distribution::{marginal_of, JointDistribution};
use crate::{Error, Result};

/// Default stopping threshold on per-sweep objective improvement (bits).
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 10_000;
const RANDOM_STARTS: usize = 5;
const START_SEED: u64 = 0x6a09_e667_f3bc_c908;
/// Outcomes whose branch probabilities agree this closely share a γ variable.
const TIE_TOLERANCE: f64 = 1e-12;
const SCAN_POINTS: usize = 9;
const GOLDEN_ITERATIONS: usize = 48;

/// Result of the γ minimization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaMinimum {
    pub gamma: MixingParameters,
    /// `J* = p(?) · TC(p(·|?))` in bits.
    pub objective: f64,
    pub p_question: f64,
    /// False if any descent hit the sweep cap before meeting the tolerance.
    pub converged: bool,
}

/// Evaluates the objective on raw γ tables without re-validating inputs.
pub(crate) struct Objective<'a> {
    p_ent: &'a [f64],
    p_sep: &'a [f64],
    q_v: f64,
    model: LeakageModel,
    local_dim: usize,
    parties: usize,
}

fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

impl<'a> Objective<'a> {
    pub(crate) fn new(
        p_ent: &'a JointDistribution,
        p_sep: &'a JointDistribution,
        q_v: f64,
        model: LeakageModel,
    ) -> Self {
        Self {
            p_ent: p_ent.probabilities(),
            p_sep: p_sep.probabilities(),
            q_v,
            model,
            local_dim: p_ent.local_dim(),
            parties: p_ent.parties(),
        }
    }

    /// Returns `(J, p(?))`. Uses `s · TC(m/s) = Σ m log m − Σ_i Σ m_i log m_i + (N−1) s log s`
    /// on the unnormalized `?` weights `m`.
    pub(crate) fn eval(&self, gamma: &[f64], scratch: &mut [f64]) -> (f64, f64) {
        question_weights(self.p_ent, self.p_sep, self.q_v, self.model, gamma, scratch);
        let s: f64 = scratch.iter().sum();
        if s.is_nan() || s <= 0.0 {
            return (0.0, 0.0);
        }
        let joint: f64 = scratch.iter().map(|&m| xlog2x(m)).sum();
        let marginals: f64 = (0..self.parties)
            .map(|party| {
                marginal_of(self.local_dim, self.parties, scratch, party)
                    .into_iter()
                    .map(xlog2x)
                    .sum::<f64>()
            })
            .sum();
        let j = joint - marginals + (self.parties as f64 - 1.0) * xlog2x(s);
        (j.max(0.0), s)
    }
}

/// Groups of outcome indices with equal `(p_ent, p_sep)`.
pub(crate) fn tie_groups(p_ent: &[f64], p_sep: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for a in 0..p_ent.len() {
        let found = groups.iter_mut().find(|g| {
            let r = g[0];
            (p_ent[r] - p_ent[a]).abs() <= TIE_TOLERANCE
                && (p_sep[r] - p_sep[a]).abs() <= TIE_TOLERANCE
        });
        match found {
            Some(g) => g.push(a),
            None => groups.push(vec![a]),
        }
    }
    groups
}

/// Bounded 1-D minimization on `[0, 1]` starting from a known point.
fn line_search(f: &mut impl FnMut(f64) -> f64, current: f64, current_value: f64) -> (f64, f64) {
    let (mut best_t, mut best_f) = (current, current_value);
    let h = 1.0 / (SCAN_POINTS - 1) as f64;
    for k in 0..SCAN_POINTS {
        let t = k as f64 * h;
        let v = f(t);
        if v < best_f {
            best_t = t;
            best_f = v;
        }
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = ((best_t - h).max(0.0), (best_t + h).min(1.0));
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    for (t, v) in [(x1, f1), (x2, f2)] {
        if v < best_f {
            best_t = t;
            best_f = v;
        }
    }
    (best_t, best_f)
}

fn expand(groups: &[Vec<usize>], x: &[f64], out: &mut [f64]) {
    for (g, &val) in groups.iter().zip(x) {
        for &a in g {
            out[a] = val;
        }
    }
}

struct Descent {
    x: Vec<f64>,
    value: f64,
    converged: bool,
}

fn coordinate_descent(
    objective: &Objective,
    groups: &[Vec<usize>],
    start: Vec<f64>,
    tolerance: f64,
) -> Descent {
    let n = objective.p_ent.len();
    let mut gamma = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut x = start;
    expand(groups, &x, &mut gamma);
    let mut value = objective.eval(&gamma, &mut scratch).0;
    for _ in 0..MAX_SWEEPS {
        let before = value;
        for k in 0..groups.len() {
            let mut f = |t: f64| {
                for &a in &groups[k] {
                    gamma[a] = t;
                }
                objective.eval(&gamma, &mut scratch).0
            };
            let (t, v) = line_search(&mut f, x[k], value);
            x[k] = t;
            value = v;
            for &a in &groups[k] {
                gamma[a] = t;
            }
        }
        if before - value < tolerance {
            return Descent {
                x,
                value,
                converged: true,
            };
        }
    }
    Descent {
        x,
        value,
        converged: false,
    }
}

/// Minimizes the weighted `?`-class total correlation over γ.
pub fn minimize_over_gamma(
    p_ent: &JointDistribution,
    p_sep: &JointDistribution,
    q_v: f64,
    model: LeakageModel,
    tolerance: f64,
) -> Result<GammaMinimum> {
    if p_ent.local_dim() != p_sep.local_dim() || p_ent.parties() != p_sep.parties() {
        return Err(Error::DimensionMismatch {
            expected: p_ent.len(),
            found: p_sep.len(),
        });
    }
    if !(0.0..=1.0).contains(&q_v) {
        return Err(Error::InvalidParameter(format!(
            "mixing weight {q_v} outside [0, 1]"
        )));
    }
    let n = p_ent.len();
    let objective = Objective::new(p_ent, p_sep, q_v, model);
    let mut scratch = vec![0.0; n];

    if q_v == 0.0 || model.leakage == 0.0 {
        // γ only enters through q_v L γ
        let gamma = vec![0.0; n];
        let (j, s) = objective.eval(&gamma, &mut scratch);
        return Ok(GammaMinimum {
            gamma: MixingParameters::new(gamma)?,
            objective: j,
            p_question: s,
            converged: true,
        });
    }

    let groups = tie_groups(objective.p_ent, objective.p_sep);
    let closed = closed_form_gamma(p_ent, p_sep, q_v, model)?.clamped();
    let mut starts: Vec<Vec<f64>> = vec![
        vec![0.0; groups.len()],
        vec![1.0; groups.len()],
        groups.iter().map(|g| closed.values()[g[0]]).collect(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    for _ in 0..RANDOM_STARTS {
        starts.push((0..groups.len()).map(|_| rng.random::<f64>()).collect());
    }

    let mut converged = true;
    let mut best: Option<Descent> = None;
    for start in starts {
        let run = coordinate_descent(&objective, &groups, start, tolerance);
        converged &= run.converged;
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let mut gamma = vec![0.0; n];
    expand(&groups, &best.x, &mut gamma);

    if groups.len() < n {
        let singletons: Vec<Vec<usize>> = (0..n).map(|a| vec![a]).collect();
        let polish = coordinate_descent(&objective, &singletons, gamma.clone(), tolerance);
        converged &= polish.converged;
        if polish.value < best.value {
            gamma = polish.x;
        }
    }

    let (j, s) = objective.eval(&gamma, &mut scratch);
    Ok(GammaMinimum {
        gamma: MixingParameters::new(gamma)?,
        objective: j,
        p_question: s,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{prepare_attack, zero_key_threshold, LeakageKind, ThresholdConvention};
    use crate::measurement::{
        computational_basis, qubit_bloch_measurement, xz_plane_measurement, ProjectiveMeasurement,
    };
    use crate::optimize::weighted_objective;

    fn zz(d: usize, n: usize) -> Vec<ProjectiveMeasurement> {
        (0..n).map(|_| computational_basis(d).unwrap()).collect()
    }

    fn attack(v: f64, ms: &[ProjectiveMeasurement]) -> crate::attack::AttackInputs {
        let refs: Vec<_> = ms.iter().collect();
        prepare_attack(v, &refs).unwrap()
    }

    /// Exhaustive search over the tied variables, step 0.02.
    fn grid_oracle(a: &crate::attack::AttackInputs, model: LeakageModel) -> f64 {
        let groups = tie_groups(a.p_ent.probabilities(), a.p_sep.probabilities());
        let steps = 51usize;
        let mut best = f64::INFINITY;
        let total = steps.pow(groups.len() as u32);
        for code in 0..total {
            let mut gamma = vec![0.0; a.p_ent.len()];
            let mut rest = code;
            for g in &groups {
                let t = (rest % steps) as f64 * 0.02;
                rest /= steps;
                for &o in g {
                    gamma[o] = t;
                }
            }
            let j = weighted_objective(
                &MixingParameters::new(gamma).unwrap(),
                &a.p_ent,
                &a.p_sep,
                a.q_v,
                model,
            )
            .unwrap();
            best = best.min(j);
        }
        best
    }

    #[test]
    fn fast_objective_matches_reference() {
        let ms = [qubit_bloch_measurement(0.3, 0.2), xz_plane_measurement(1.2)];
        let a = attack(0.55, &ms);
        for kind in [LeakageKind::Uniform, LeakageKind::JunkOnly] {
            let model = LeakageModel::new(kind, 0.3).unwrap();
            let obj = Objective::new(&a.p_ent, &a.p_sep, a.q_v, model);
            let mut scratch = vec![0.0; 4];
            for g in [[0.0, 0.2, 0.9, 1.0], [0.5; 4], [1.0, 0.0, 0.3, 0.7]] {
                let fast = obj.eval(&g, &mut scratch).0;
                let slow = weighted_objective(
                    &MixingParameters::new(g.to_vec()).unwrap(),
                    &a.p_ent,
                    &a.p_sep,
                    a.q_v,
                    model,
                )
                .unwrap();
                assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
            }
        }
    }

    #[test]
    fn below_threshold_reaches_zero() {
        for (d, n) in [(2, 2), (3, 2), (2, 3)] {
            let model = LeakageModel::uniform(0.15).unwrap();
            let t = zero_key_threshold(d, n, model, ThresholdConvention::AsDerived).unwrap();
            let ms = zz(d, n);
            let a = attack(t - 1e-3, &ms);
            let m =
                minimize_over_gamma(&a.p_ent, &a.p_sep, a.q_v, model, DEFAULT_TOLERANCE).unwrap();
            assert!(m.objective <= 1e-6, "({d},{n}) {}", m.objective);
        }
    }

    #[test]
    fn ideal_state_ignores_gamma() {
        let ms = zz(2, 2);
        let a = attack(1.0, &ms);
        let model = LeakageModel::uniform(0.1).unwrap();
        let m = minimize_over_gamma(&a.p_ent, &a.p_sep, a.q_v, model, DEFAULT_TOLERANCE).unwrap();
        assert!((m.objective - 0.9).abs() < 1e-12);
        assert!((m.p_question - 0.9).abs() < 1e-12);
    }

    #[test]
    fn matches_grid_at_worked_point() {
        let ms = zz(2, 2);
        let a = attack(0.38, &ms);
        let model = LeakageModel::uniform(0.1).unwrap();
        let m = minimize_over_gamma(&a.p_ent, &a.p_sep, a.q_v, model, DEFAULT_TOLERANCE).unwrap();
        let oracle = grid_oracle(&a, model);
        assert!(
            (m.objective - oracle).abs() < 1e-3,
            "{} vs {oracle}",
            m.objective
        );
        assert!(m.objective <= oracle + 1e-12);
        assert!(m.objective > 1e-3);
    }

    #[test]
    fn never_worse_than_reference_points() {
        let ms = [
            qubit_bloch_measurement(0.2, 0.0),
            qubit_bloch_measurement(0.9, 1.0),
        ];
        for v in [0.36, 0.45, 0.7, 0.95] {
            for kind in [LeakageKind::Uniform, LeakageKind::JunkOnly] {
                let model = LeakageModel::new(kind, 0.2).unwrap();
                let a = attack(v, &ms);
                let m = minimize_over_gamma(&a.p_ent, &a.p_sep, a.q_v, model, DEFAULT_TOLERANCE)
                    .unwrap();
                let closed = closed_form_gamma(&a.p_ent, &a.p_sep, a.q_v, model)
                    .unwrap()
                    .clamped();
                for g in [
                    closed,
                    MixingParameters::constant(4, 0.0).unwrap(),
                    MixingParameters::constant(4, 1.0).unwrap(),
                ] {
                    let j = weighted_objective(&g, &a.p_ent, &a.p_sep, a.q_v, model).unwrap();
                    assert!(m.objective <= j + 1e-10);
                }
                assert!(m.gamma.values().iter().all(|g| (0.0..=1.0).contains(g)));
            }
        }
    }

    #[test]
    fn invariant_under_outcome_relabeling() {
        let ms = [xz_plane_measurement(0.4), xz_plane_measurement(1.0)];
        let a = attack(0.5, &ms);
        let model = LeakageModel::uniform(0.2).unwrap();
        let base =
            minimize_over_gamma(&a.p_ent, &a.p_sep, a.q_v, model, DEFAULT_TOLERANCE).unwrap();
        // flip party 0's outcome label: index (a0, a1) -> (1 - a0, a1)
        let perm = [2, 3, 0, 1];
        let permute = |p: &JointDistribution| {
            JointDistribution::new(2, 2, perm.iter().map(|&i| p.probabilities()[i]).collect())
                .unwrap()
        };
        let relabeled = minimize_over_gamma(
            &permute(&a.p_ent),
            &permute(&a.p_sep),
            a.q_v,
            model,
            DEFAULT_TOLERANCE,
        )
        .unwrap();
        assert!((base.objective - relabeled.objective).abs() < 1e-9);
    }

    #[test]
    fn tie_groups_for_bell_statistics() {
        let ms = zz(2, 2);
        let a = attack(0.6, &ms);
        let groups = tie_groups(a.p_ent.probabilities(), a.p_sep.probabilities());
        assert_eq!(groups, vec![vec![0, 3], vec![1, 2]]);
    }
}
