//! Honest parties' side of the max-min: search over measurement settings.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::gamma::{minimize_over_gamma, GammaMinimum, DEFAULT_TOLERANCE};
use super::{KeyRateBound, INFORMATION_MEASURE};
use crate::attack::{
    closed_form_gamma, mixing_weight_qv, separability_threshold, LeakageModel, MixingParameters,
};
use crate::distribution::{born_distribution, JointDistribution};
use crate::linalg::{ghz_projector, sep_isotropic, QuantumState};
use crate::measurement::{describe_settings, parse_settings, MeasurementSpec};
use crate::{check_scenario, Error, Result};

/// Polar-angle grid step; the grid covers `[0, π]` inclusive.
pub const THETA_STEP: f64 = PI / 60.0;
/// Azimuth grid step; the grid covers `[0, 2π)`.
pub const PHI_STEP: f64 = PI / 30.0;
const REFINE_ITERATIONS: usize = 30;
/// Probability tables are keyed at this resolution for the evaluation cache.
const CACHE_RESOLUTION: f64 = 1e12;
/// A candidate replaces the incumbent only if it gains more than this (bits).
const REFINE_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum SettingsSpace {
    /// Every party measures the computational basis.
    Computational,
    /// Qubits: parties `1..N−1` measure Z, the last party scans the Bloch sphere.
    BlochGrid,
    /// Qubits: parties `1..N−1` measure Z (party 2 optionally `xz:θ1`), the
    /// last party scans `xz:θ` over `[0, π]`.
    XzFamily { theta1: Option<f64> },
    /// Explicit per-party setting tuples.
    List(Vec<Vec<MeasurementSpec>>),
}

impl fmt::Display for SettingsSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SettingsSpace::Computational => write!(f, "computational"),
            SettingsSpace::BlochGrid => write!(f, "bloch-grid"),
            SettingsSpace::XzFamily { theta1: None } => write!(f, "xz-family"),
            SettingsSpace::XzFamily { theta1: Some(t) } => write!(f, "xz-family:{t}"),
            SettingsSpace::List(list) => {
                let parts: Vec<String> = list.iter().map(|s| describe_settings(s)).collect();
                write!(f, "{}", parts.join("|"))
            }
        }
    }
}

impl FromStr for SettingsSpace {
    type Err = Error;

    /// `computational`, `bloch-grid`, `xz-family[:θ1]`, or `|`-separated tuples
    /// of `;`-separated per-party descriptors.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "computational" => Ok(SettingsSpace::Computational),
            "bloch-grid" => Ok(SettingsSpace::BlochGrid),
            "xz-family" => Ok(SettingsSpace::XzFamily { theta1: None }),
            other => {
                if let Some(t) = other.strip_prefix("xz-family:") {
                    let theta1 = t
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("invalid theta1 '{t}'")))?;
                    return Ok(SettingsSpace::XzFamily {
                        theta1: Some(theta1),
                    });
                }
                let list = other
                    .split('|')
                    .map(parse_settings)
                    .collect::<Result<Vec<_>>>()?;
                Ok(SettingsSpace::List(list))
            }
        }
    }
}

fn theta_grid() -> Vec<f64> {
    (0..=60).map(|i| i as f64 * THETA_STEP).collect()
}

fn phi_grid() -> Vec<f64> {
    (0..60).map(|j| j as f64 * PHI_STEP).collect()
}

/// How a candidate sits on a scanned grid, for refinement.
#[derive(Debug, Clone, Copy)]
enum GridPoint {
    None,
    Xz { theta: f64 },
    Bloch { theta: f64, phi: f64 },
}

struct Scenario<'a> {
    d: usize,
    parties: usize,
    q_v: f64,
    model: LeakageModel,
    ghz: &'a QuantumState,
    sep: &'a QuantumState,
}

struct Evaluation {
    objective: f64,
    minimum: GammaMinimum,
    p_ent: JointDistribution,
    p_sep: JointDistribution,
}

impl Scenario<'_> {
    fn tables(&self, specs: &[MeasurementSpec]) -> Result<(JointDistribution, JointDistribution)> {
        if specs.len() != self.parties {
            return Err(Error::DimensionMismatch {
                expected: self.parties,
                found: specs.len(),
            });
        }
        let ms = specs
            .iter()
            .map(|s| s.build(self.d))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<_> = ms.iter().collect();
        Ok((
            born_distribution(self.ghz, &refs)?,
            born_distribution(self.sep, &refs)?,
        ))
    }

    fn solve(&self, p_ent: JointDistribution, p_sep: JointDistribution) -> Result<Evaluation> {
        let minimum = minimize_over_gamma(&p_ent, &p_sep, self.q_v, self.model, DEFAULT_TOLERANCE)?;
        Ok(Evaluation {
            objective: minimum.objective,
            minimum,
            p_ent,
            p_sep,
        })
    }

    fn evaluate(&self, specs: &[MeasurementSpec]) -> Result<Evaluation> {
        let (p_ent, p_sep) = self.tables(specs)?;
        self.solve(p_ent, p_sep)
    }
}

fn cache_key(p_ent: &JointDistribution, p_sep: &JointDistribution) -> Vec<i64> {
    p_ent
        .probabilities()
        .iter()
        .chain(p_sep.probabilities())
        .map(|p| (p * CACHE_RESOLUTION).round() as i64)
        .collect()
}

fn require_qubits(d: usize, space: &SettingsSpace) -> Result<()> {
    if d != 2 {
        return Err(Error::InvalidParameter(format!(
            "settings space '{space}' is defined for qubits only"
        )));
    }
    Ok(())
}

fn fixed_prefix(parties: usize, theta1: Option<f64>) -> Result<Vec<MeasurementSpec>> {
    let mut prefix = vec![MeasurementSpec::ZBasis; parties - 1];
    if let Some(t) = theta1 {
        if parties < 3 {
            return Err(Error::InvalidParameter(
                "theta1 override needs at least three parties".into(),
            ));
        }
        prefix[1] = MeasurementSpec::Xz { theta: t };
    }
    Ok(prefix)
}

fn with_last(prefix: &[MeasurementSpec], last: MeasurementSpec) -> Vec<MeasurementSpec> {
    let mut specs = prefix.to_vec();
    specs.push(last);
    specs
}

fn candidates(
    d: usize,
    parties: usize,
    space: &SettingsSpace,
) -> Result<Vec<(Vec<MeasurementSpec>, GridPoint)>> {
    let out = match space {
        SettingsSpace::Computational => {
            vec![(vec![MeasurementSpec::ZBasis; parties], GridPoint::None)]
        }
        SettingsSpace::List(list) => list.iter().map(|s| (s.clone(), GridPoint::None)).collect(),
        SettingsSpace::XzFamily { theta1 } => {
            require_qubits(d, space)?;
            let prefix = fixed_prefix(parties, *theta1)?;
            theta_grid()
                .into_iter()
                .map(|theta| {
                    (
                        with_last(&prefix, MeasurementSpec::Xz { theta }),
                        GridPoint::Xz { theta },
                    )
                })
                .collect()
        }
        SettingsSpace::BlochGrid => {
            require_qubits(d, space)?;
            let prefix = fixed_prefix(parties, None)?;
            let phis = phi_grid();
            theta_grid()
                .into_iter()
                .flat_map(|theta| phis.iter().map(move |&phi| (theta, phi)))
                .map(|(theta, phi)| {
                    (
                        with_last(&prefix, MeasurementSpec::Bloch { theta, phi }),
                        GridPoint::Bloch { theta, phi },
                    )
                })
                .collect()
        }
    };
    if out.is_empty() {
        return Err(Error::EmptySettings);
    }
    Ok(out)
}

/// Golden-section maximization of `f` on `[lo, hi]`; returns the best point seen.
fn golden_max(
    f: &mut impl FnMut(f64) -> Result<(f64, Evaluation)>,
    lo: f64,
    hi: f64,
) -> Result<Option<(f64, Evaluation)>> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (lo, hi);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut e1 = f(x1)?;
    let mut e2 = f(x2)?;
    let mut best: Option<(f64, Evaluation)> = None;
    let keep = |x: f64, e: &(f64, Evaluation), best: &mut Option<(f64, Evaluation)>| {
        if best.as_ref().is_none_or(|b| e.1.objective > b.1.objective) {
            *best = Some((
                x,
                Evaluation {
                    objective: e.1.objective,
                    minimum: e.1.minimum.clone(),
                    p_ent: e.1.p_ent.clone(),
                    p_sep: e.1.p_sep.clone(),
                },
            ));
        }
    };
    keep(x1, &e1, &mut best);
    keep(x2, &e2, &mut best);
    for _ in 0..REFINE_ITERATIONS {
        if e1.0 >= e2.0 {
            hi = x2;
            x2 = x1;
            e2 = e1;
            x1 = hi - inv_phi * (hi - lo);
            e1 = f(x1)?;
            keep(x1, &e1, &mut best);
        } else {
            lo = x1;
            x1 = x2;
            e1 = e2;
            x2 = lo + inv_phi * (hi - lo);
            e2 = f(x2)?;
            keep(x2, &e2, &mut best);
        }
    }
    Ok(best)
}

fn separable_bound(d: usize, parties: usize, v: f64, model: LeakageModel) -> KeyRateBound {
    KeyRateBound {
        rate: 0.0,
        v,
        local_dim: d,
        parties,
        model,
        settings: Vec::new(),
        gamma_star: MixingParameters::new(Vec::new()).expect("empty table is valid"),
        objective: 0.0,
        p_question: 0.0,
        gamma_feasible: true,
        converged: true,
        separable: true,
        information_measure: INFORMATION_MEASURE,
    }
}

/// `(1/(N−1)) · max_settings min_γ J`, with the maximizing settings and γ.
pub fn maximize_over_settings(
    d: usize,
    parties: usize,
    v: f64,
    model: LeakageModel,
    space: &SettingsSpace,
) -> Result<KeyRateBound> {
    check_scenario(d, parties)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::VisibilityOutOfRange(v));
    }
    let cands = candidates(d, parties, space)?;
    if v <= separability_threshold(d, parties)? {
        return Ok(separable_bound(d, parties, v, model));
    }
    let ghz = ghz_projector(d, parties)?;
    let sep = sep_isotropic(d, parties)?;
    let scenario = Scenario {
        d,
        parties,
        q_v: mixing_weight_qv(d, parties, v)?,
        model,
        ghz: &ghz,
        sep: &sep,
    };

    let tables = cands
        .par_iter()
        .map(|(specs, _)| scenario.tables(specs))
        .collect::<Result<Vec<_>>>()?;
    let mut slot_of: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut unique: Vec<usize> = Vec::new();
    let slots: Vec<usize> = tables
        .iter()
        .enumerate()
        .map(|(i, (pe, ps))| {
            *slot_of.entry(cache_key(pe, ps)).or_insert_with(|| {
                unique.push(i);
                unique.len() - 1
            })
        })
        .collect();
    let solved = unique
        .par_iter()
        .map(|&i| scenario.solve(tables[i].0.clone(), tables[i].1.clone()))
        .collect::<Result<Vec<_>>>()?;

    let mut best_idx = 0;
    for (i, &slot) in slots.iter().enumerate() {
        if solved[slot].objective > solved[slots[best_idx]].objective + REFINE_GAIN {
            best_idx = i;
        }
    }
    let mut converged = solved.iter().all(|e| e.minimum.converged);
    let (mut best_specs, point) = cands[best_idx].clone();
    let mut best = {
        let e = &solved[slots[best_idx]];
        Evaluation {
            objective: e.objective,
            minimum: e.minimum.clone(),
            p_ent: e.p_ent.clone(),
            p_sep: e.p_sep.clone(),
        }
    };

    // refine around the best grid cell, one angle at a time
    let prefix = &best_specs[..parties - 1].to_vec();
    match point {
        GridPoint::None => {}
        GridPoint::Xz { theta } => {
            let mut f = |t: f64| {
                let e = scenario.evaluate(&with_last(prefix, MeasurementSpec::Xz { theta: t }))?;
                Ok((e.objective, e))
            };
            let lo = (theta - THETA_STEP).max(0.0);
            let hi = (theta + THETA_STEP).min(PI);
            if let Some((t, e)) = golden_max(&mut f, lo, hi)? {
                if e.objective > best.objective + REFINE_GAIN {
                    converged &= e.minimum.converged;
                    best_specs = with_last(prefix, MeasurementSpec::Xz { theta: t });
                    best = e;
                }
            }
        }
        GridPoint::Bloch { theta, phi } => {
            let mut theta_best = theta;
            let mut f = |t: f64| {
                let e = scenario
                    .evaluate(&with_last(prefix, MeasurementSpec::Bloch { theta: t, phi }))?;
                Ok((e.objective, e))
            };
            let lo = (theta - THETA_STEP).max(0.0);
            let hi = (theta + THETA_STEP).min(PI);
            if let Some((t, e)) = golden_max(&mut f, lo, hi)? {
                if e.objective > best.objective + REFINE_GAIN {
                    converged &= e.minimum.converged;
                    theta_best = t;
                    best_specs = with_last(prefix, MeasurementSpec::Bloch { theta: t, phi });
                    best = e;
                }
            }
            let mut g = |p: f64| {
                let e = scenario.evaluate(&with_last(
                    prefix,
                    MeasurementSpec::Bloch {
                        theta: theta_best,
                        phi: p,
                    },
                ))?;
                Ok((e.objective, e))
            };
            if let Some((p, e)) = golden_max(&mut g, phi - PHI_STEP, phi + PHI_STEP)? {
                if e.objective > best.objective + REFINE_GAIN {
                    converged &= e.minimum.converged;
                    best_specs = with_last(
                        prefix,
                        MeasurementSpec::Bloch {
                            theta: theta_best,
                            phi: p.rem_euclid(2.0 * PI),
                        },
                    );
                    best = e;
                }
            }
        }
    }

    let gamma_feasible = closed_form_gamma(&best.p_ent, &best.p_sep, scenario.q_v, model)?.feasible;
    Ok(KeyRateBound {
        rate: (best.objective / (parties as f64 - 1.0)).max(0.0),
        v,
        local_dim: d,
        parties,
        model,
        settings: best_specs,
        gamma_star: best.minimum.gamma,
        objective: best.objective,
        p_question: best.minimum.p_question,
        gamma_feasible,
        converged,
        separable: false,
        information_measure: INFORMATION_MEASURE,
    })
}

/// One bound per visibility; grid points are evaluated independently.
pub fn rate_curve(
    d: usize,
    parties: usize,
    model: LeakageModel,
    v_grid: &[f64],
    space: &SettingsSpace,
) -> Result<Vec<KeyRateBound>> {
    if let Some(&v) = v_grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::VisibilityOutOfRange(v));
    }
    v_grid
        .par_iter()
        .map(|&v| maximize_over_settings(d, parties, v, model, space))
        .collect()
}
