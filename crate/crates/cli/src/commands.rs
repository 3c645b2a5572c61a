use std::path::Path;

use serde::Serialize;

use qkdbound_core::attack::{
    closed_form_gamma, eve_joint_distribution, mixing_weight_qv, prepare_attack,
    separability_threshold, zero_key_threshold, LeakageKind, LeakageModel, MixingParameters,
    ThresholdConvention,
};
use qkdbound_core::measurement::{
    describe_settings, parse_settings, MeasurementSet, MeasurementSpec,
};
use qkdbound_core::montecarlo::{empirical_objective, simulate_rounds, SimulationReport};
use qkdbound_core::optimize::{
    minimize_over_gamma, rate_curve, weighted_objective, KeyRateBound, SettingsSpace,
    DEFAULT_TOLERANCE,
};
use qkdbound_core::repeater::{
    max_repeaters_with, repeater_rate_curve, RepeaterLimit, RepeaterStatus,
};

use crate::args::{
    GammaCheckArgs, RateCurveArgs, RepeaterArgs, ScenarioArgs, SimulateArgs, ThresholdArgs,
};
use crate::output::{csv_table, emit, format_number, nums, to_json, Num};
use crate::svg::{render_svg, Series};
use crate::CliError;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_scenario(s: &ScenarioArgs) -> Result<(), CliError> {
    if s.d < 2 || s.parties < 2 {
        return Err(usage(format!(
            "--d and --N must be at least 2 (got {} and {})",
            s.d, s.parties
        )));
    }
    if (s.d as f64).powi(s.parties as i32) > 4096.0 {
        return Err(usage(format!("d^N = {}^{} is too large", s.d, s.parties)));
    }
    Ok(())
}

fn check_unit(name: &str, x: f64) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(usage(format!("{name} must lie in [0, 1] (got {x})")));
    }
    Ok(())
}

fn model(kind: LeakageKind, leakage: f64) -> Result<LeakageModel, CliError> {
    check_unit("--L", leakage)?;
    Ok(LeakageModel::new(kind, leakage)?)
}

fn check_visibility(d: usize, parties: usize, v: f64) -> Result<(), CliError> {
    check_unit("--v", v)?;
    let t = separability_threshold(d, parties)?;
    if v < t {
        return Err(usage(format!(
            "--v {v} is below the separability threshold {t}"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct ThresholdReport {
    d: usize,
    #[serde(rename = "N")]
    parties: usize,
    #[serde(rename = "L")]
    leakage: Num,
    model: LeakageKind,
    convention: ThresholdConvention,
    separability_threshold: Num,
    zero_key_threshold: Num,
    zero_key_threshold_derived: Num,
    zero_key_threshold_stated: Num,
    conventions_agree: bool,
}

pub fn threshold(a: &ThresholdArgs) -> Result<(), CliError> {
    check_scenario(&a.scenario)?;
    let m = model(a.model.model, a.leakage)?;
    let (d, n) = (a.scenario.d, a.scenario.parties);
    let derived = zero_key_threshold(d, n, m, ThresholdConvention::AsDerived)?;
    let stated = zero_key_threshold(d, n, m, ThresholdConvention::AsStated)?;
    let chosen = match a.convention.convention {
        ThresholdConvention::AsDerived => derived,
        ThresholdConvention::AsStated => stated,
    };
    let report = ThresholdReport {
        d,
        parties: n,
        leakage: Num(a.leakage),
        model: m.kind,
        convention: a.convention.convention,
        separability_threshold: Num(separability_threshold(d, n)?),
        zero_key_threshold: Num(chosen),
        zero_key_threshold_derived: Num(derived),
        zero_key_threshold_stated: Num(stated),
        conventions_agree: (derived - stated).abs() <= 1e-12,
    };
    emit(a.out.as_deref(), &to_json(&report)?)
}

fn default_space(d: usize, parties: usize) -> SettingsSpace {
    match (d, parties) {
        (2, 2) => SettingsSpace::BlochGrid,
        (2, _) => SettingsSpace::XzFamily { theta1: None },
        _ => SettingsSpace::Computational,
    }
}

fn parse_space(s: &str) -> Result<SettingsSpace, CliError> {
    s.parse().map_err(|e| usage(format!("--settings: {e}")))
}

/// Evenly spaced points with both endpoints included.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|i| {
            if i + 1 == steps {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (steps - 1) as f64
            }
        })
        .collect()
}

const CURVE_HEADER: [&str; 10] = [
    "L",
    "v",
    "rate_bits",
    "objective_bits",
    "p_question",
    "gamma_feasible",
    "separable",
    "above_zero_key_threshold",
    "convention",
    "settings",
];

fn curve_row(
    leakage: f64,
    b: &KeyRateBound,
    threshold: f64,
    convention: ThresholdConvention,
) -> Vec<String> {
    vec![
        format_number(leakage),
        format_number(b.v),
        format_number(b.rate),
        format_number(b.objective),
        format_number(b.p_question),
        b.gamma_feasible.to_string(),
        b.separable.to_string(),
        (b.v > threshold).to_string(),
        convention.to_string(),
        b.settings_descriptor(),
    ]
}

fn write_svg(path: &Path, series: &[Series], x: &str, y: &str) -> Result<(), CliError> {
    emit(Some(path), &render_svg(series, x, y)?)
}

pub fn rate_curve_cmd(a: &RateCurveArgs) -> Result<(), CliError> {
    check_scenario(&a.scenario)?;
    let (d, n) = (a.scenario.d, a.scenario.parties);
    let v_min = a.v_min.unwrap_or(separability_threshold(d, n)?);
    check_unit("--v-min", v_min)?;
    check_unit("--v-max", a.v_max)?;
    if v_min > a.v_max {
        return Err(usage(format!(
            "--v-min {v_min} exceeds --v-max {}",
            a.v_max
        )));
    }
    if a.steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    let mut space = match &a.settings {
        Some(s) => parse_space(s)?,
        None => default_space(d, n),
    };
    if let Some(t) = a.theta1 {
        match &mut space {
            SettingsSpace::XzFamily { theta1 } => *theta1 = Some(t),
            _ => {
                return Err(usage(
                    "--theta1 only applies to the xz-family settings space",
                ))
            }
        }
    }
    let models = a
        .leakage
        .iter()
        .map(|&l| model(a.model.model, l))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = linspace(v_min, a.v_max, a.steps);
    let convention = a.convention.convention;

    let mut rows = Vec::new();
    let mut series = Vec::new();
    for m in models {
        let curve = rate_curve(d, n, m, &grid, &space)?;
        let threshold = zero_key_threshold(d, n, m, convention)?;
        rows.extend(
            curve
                .iter()
                .map(|b| curve_row(m.leakage, b, threshold, convention)),
        );
        series.push(Series {
            label: format!("L={}", m.leakage),
            points: curve.iter().map(|b| (b.v, b.rate)).collect(),
        });
    }
    emit(a.out.as_deref(), &csv_table(&CURVE_HEADER, &rows)?)?;
    if let Some(p) = &a.svg {
        write_svg(p, &series, "visibility v", "key rate bound (bits)")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LimitReport {
    n_max: u64,
    status: RepeaterStatus,
    zero_key_threshold: Num,
}

#[derive(Serialize)]
struct RepeaterReport {
    v: Num,
    #[serde(rename = "L")]
    leakage: Num,
    exponent: qkdbound_core::repeater::ExponentConvention,
    convention: ThresholdConvention,
    n_max: u64,
    n_max_derived: u64,
    n_max_stated: u64,
    conventions_diverge: bool,
    derived: LimitReport,
    stated: LimitReport,
}

pub fn repeater(a: &RepeaterArgs) -> Result<(), CliError> {
    check_unit("--v", a.v)?;
    let m = model(LeakageKind::Uniform, a.leakage)?;
    let limit = |c| -> Result<(RepeaterLimit, f64), CliError> {
        Ok((
            max_repeaters_with(a.v, a.leakage, c, a.exponent)?,
            zero_key_threshold(2, 2, m, c)?,
        ))
    };
    let (derived, t_derived) = limit(ThresholdConvention::AsDerived)?;
    let (stated, t_stated) = limit(ThresholdConvention::AsStated)?;
    let report = RepeaterReport {
        v: Num(a.v),
        leakage: Num(a.leakage),
        exponent: a.exponent,
        convention: a.convention.convention,
        n_max: match a.convention.convention {
            ThresholdConvention::AsDerived => derived.n_max,
            ThresholdConvention::AsStated => stated.n_max,
        },
        n_max_derived: derived.n_max,
        n_max_stated: stated.n_max,
        conventions_diverge: derived != stated,
        derived: LimitReport {
            n_max: derived.n_max,
            status: derived.status,
            zero_key_threshold: Num(t_derived),
        },
        stated: LimitReport {
            n_max: stated.n_max,
            status: stated.status,
            zero_key_threshold: Num(t_stated),
        },
    };
    if a.out.is_some() || a.svg.is_some() {
        let space = parse_space(&a.settings)?;
        let nodes: Vec<u64> = (0..=a.n_max).collect();
        let points = repeater_rate_curve(a.v, a.leakage, &nodes, &space, a.exponent)?;
        if let Some(p) = &a.out {
            let rows: Vec<Vec<String>> = points
                .iter()
                .map(|p| {
                    vec![
                        p.n.to_string(),
                        format_number(p.visibility),
                        format_number(p.bound.rate),
                        p.bound.settings_descriptor(),
                    ]
                })
                .collect();
            emit(
                Some(p),
                &csv_table(&["n", "v_eff", "rate_bits", "settings"], &rows)?,
            )?;
        }
        if let Some(p) = &a.svg {
            let series = [Series {
                label: format!("v={}", a.v),
                points: points.iter().map(|p| (p.n as f64, p.bound.rate)).collect(),
            }];
            write_svg(p, &series, "repeater nodes n", "key rate bound (bits)")?;
        }
    }
    emit(None, &to_json(&report)?)
}

fn measurement_set(
    d: usize,
    parties: usize,
    settings: Option<&str>,
) -> Result<MeasurementSet, CliError> {
    let Some(text) = settings else {
        return Ok(MeasurementSet::from_specs(
            d,
            &vec![MeasurementSpec::ZBasis; parties],
        )?);
    };
    let per_party: Vec<&str> = text.split(';').collect();
    if per_party.len() != parties {
        return Err(usage(format!(
            "--settings lists {} parties but --N is {parties}",
            per_party.len()
        )));
    }
    let mut built = Vec::with_capacity(parties);
    for party in per_party {
        let inputs = party
            .split('/')
            .map(|s| {
                s.parse::<MeasurementSpec>()
                    .map_err(|e| usage(format!("--settings: {e}")))?
                    .build(d)
                    .map_err(|e| usage(format!("--settings: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        built.push(inputs);
    }
    Ok(MeasurementSet::new(d, built)?)
}

#[derive(Serialize)]
struct SimulateOutput {
    settings: String,
    gamma_rule: String,
    gamma: Vec<Vec<Num>>,
    empirical_objective: Option<Num>,
    analytic_objective: Num,
    report: SimulationReport,
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    check_scenario(&a.scenario)?;
    let (d, n) = (a.scenario.d, a.scenario.parties);
    check_visibility(d, n, a.v)?;
    let m = model(a.model.model, a.leakage)?;
    if a.rounds == 0 {
        return Err(usage("--rounds must be at least 1"));
    }
    let set = measurement_set(d, n, a.settings.as_deref())?;
    let tuples = set.input_tuples();
    let attacks = tuples
        .iter()
        .map(|t| prepare_attack(a.v, &set.select(t)?))
        .collect::<Result<Vec<_>, _>>()?;
    let outcomes = attacks[0].p_ent.len();
    let gamma: Vec<MixingParameters> = match a.gamma.as_str() {
        "closed" => attacks
            .iter()
            .map(|x| Ok(closed_form_gamma(&x.p_ent, &x.p_sep, x.q_v, m)?.clamped()))
            .collect::<Result<_, CliError>>()?,
        "optimal" => attacks
            .iter()
            .map(|x| {
                Ok(minimize_over_gamma(&x.p_ent, &x.p_sep, x.q_v, m, DEFAULT_TOLERANCE)?.gamma)
            })
            .collect::<Result<_, CliError>>()?,
        "zero" => vec![MixingParameters::constant(outcomes, 0.0)?],
        "one" => vec![MixingParameters::constant(outcomes, 1.0)?],
        list => {
            let values = list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| usage(format!("--gamma: cannot parse '{s}'")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != outcomes {
                return Err(usage(format!(
                    "--gamma needs {outcomes} entries, got {}",
                    values.len()
                )));
            }
            vec![MixingParameters::new(values).map_err(|e| usage(format!("--gamma: {e}")))?]
        }
    };
    let report = simulate_rounds(&set, a.v, m, &gamma, a.rounds, a.seed)?;
    let mut analytic = 0.0;
    for (x, attack) in attacks.iter().enumerate() {
        let g = if gamma.len() == 1 {
            &gamma[0]
        } else {
            &gamma[x]
        };
        analytic += weighted_objective(g, &attack.p_ent, &attack.p_sep, attack.q_v, m)?
            / tuples.len() as f64;
    }
    let described: Vec<String> = (0..n)
        .map(|p| {
            set.inputs(p)
                .iter()
                .map(|pm| pm.label().to_string())
                .collect::<Vec<_>>()
                .join("/")
        })
        .collect();
    let out = SimulateOutput {
        settings: described.join(";"),
        gamma_rule: a.gamma.clone(),
        gamma: gamma.iter().map(|g| nums(g.values())).collect(),
        empirical_objective: empirical_objective(&report).ok().map(Num),
        analytic_objective: Num(analytic),
        report,
    };
    emit(a.out.as_deref(), &to_json(&out)?)
}

#[derive(Serialize)]
struct OptimumReport {
    gamma: Vec<Num>,
    objective: Num,
    p_question: Num,
    converged: bool,
}

#[derive(Serialize)]
struct GammaReport {
    d: usize,
    #[serde(rename = "N")]
    parties: usize,
    v: Num,
    #[serde(rename = "L")]
    leakage: Num,
    model: LeakageKind,
    settings: String,
    q_v: Num,
    p_ent: Vec<Num>,
    p_sep: Vec<Num>,
    /// Entries above one (or null for unbounded) mark infeasibility.
    gamma: Vec<Num>,
    gamma_feasible: bool,
    gamma_max: Num,
    objective_at_clamped_gamma: Num,
    p_question_at_clamped_gamma: Num,
    convention: ThresholdConvention,
    zero_key_threshold: Num,
    zero_key_threshold_derived: Num,
    zero_key_threshold_stated: Num,
    at_or_below_threshold: bool,
    optimum: OptimumReport,
}

pub fn gamma_check(a: &GammaCheckArgs) -> Result<(), CliError> {
    check_scenario(&a.scenario)?;
    let (d, n) = (a.scenario.d, a.scenario.parties);
    check_visibility(d, n, a.v)?;
    let m = model(a.model.model, a.leakage)?;
    let specs = match &a.settings {
        Some(s) => parse_settings(s).map_err(|e| usage(format!("--settings: {e}")))?,
        None => vec![MeasurementSpec::ZBasis; n],
    };
    if specs.len() != n {
        return Err(usage(format!(
            "--settings lists {} parties but --N is {n}",
            specs.len()
        )));
    }
    let ms = specs
        .iter()
        .map(|s| s.build(d).map_err(|e| usage(format!("--settings: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<_> = ms.iter().collect();
    let attack = prepare_attack(a.v, &refs)?;
    let q_v = mixing_weight_qv(d, n, a.v)?;
    let cf = closed_form_gamma(&attack.p_ent, &attack.p_sep, q_v, m)?;
    let clamped = cf.clamped();
    let ejd = eve_joint_distribution(&attack.p_ent, &attack.p_sep, q_v, m, &clamped)?;
    let optimum = minimize_over_gamma(&attack.p_ent, &attack.p_sep, q_v, m, DEFAULT_TOLERANCE)?;
    let derived = zero_key_threshold(d, n, m, ThresholdConvention::AsDerived)?;
    let stated = zero_key_threshold(d, n, m, ThresholdConvention::AsStated)?;
    let chosen = match a.convention.convention {
        ThresholdConvention::AsDerived => derived,
        ThresholdConvention::AsStated => stated,
    };
    let report = GammaReport {
        d,
        parties: n,
        v: Num(a.v),
        leakage: Num(a.leakage),
        model: m.kind,
        settings: describe_settings(&specs),
        q_v: Num(q_v),
        p_ent: nums(attack.p_ent.probabilities()),
        p_sep: nums(attack.p_sep.probabilities()),
        gamma: nums(&cf.gamma),
        gamma_feasible: cf.feasible,
        gamma_max: Num(cf.max_entry()),
        objective_at_clamped_gamma: Num(weighted_objective(
            &clamped,
            &attack.p_ent,
            &attack.p_sep,
            q_v,
            m,
        )?),
        p_question_at_clamped_gamma: Num(ejd.question_mass()),
        convention: a.convention.convention,
        zero_key_threshold: Num(chosen),
        zero_key_threshold_derived: Num(derived),
        zero_key_threshold_stated: Num(stated),
        at_or_below_threshold: a.v <= chosen,
        optimum: OptimumReport {
            gamma: nums(optimum.gamma.values()),
            objective: Num(optimum.objective),
            p_question: Num(optimum.p_question),
            converged: optimum.converged,
        },
    };
    emit(a.out.as_deref(), &to_json(&report)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.99, 1.0, 2), vec![0.99, 1.0]);
        assert_eq!(linspace(0.5, 0.7, 1), vec![0.5]);
        let g = linspace(0.0, 1.0, 11);
        assert_eq!(g.len(), 11);
        assert_eq!(g[10], 1.0);
        assert!((g[3] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn default_spaces() {
        assert_eq!(default_space(2, 2), SettingsSpace::BlochGrid);
        assert_eq!(
            default_space(2, 3),
            SettingsSpace::XzFamily { theta1: None }
        );
        assert_eq!(default_space(3, 2), SettingsSpace::Computational);
    }

    #[test]
    fn multi_input_settings() {
        let set = measurement_set(2, 2, Some("zbasis/xz:1.5;zbasis")).unwrap();
        assert_eq!(set.inputs(0).len(), 2);
        assert_eq!(set.input_tuples().len(), 2);
        assert!(measurement_set(2, 3, Some("zbasis;zbasis")).is_err());
    }
}
