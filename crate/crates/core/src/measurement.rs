//! Rank-1 projective measurements and their textual descriptors.
//!
//! A descriptor is one of `zbasis`, `bloch:<theta>,<phi>`, `xz:<theta>` or
//! `unitary:<d*d entries>`; unitary entries are row-major `re+imj` complex
//! numbers separated by commas, and the columns of the matrix are the
//! measurement basis vectors.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::linalg::ComplexMatrix;
use crate::{Error, Result};

/// Tolerance for projector, orthogonality and completeness checks.
pub const MEASUREMENT_TOLERANCE: f64 = 1e-9;

/// How a local measurement was parametrized.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementSpec {
    /// Computational basis `{|i><i|}` in any local dimension.
    ZBasis,
    /// Qubit basis `cos(θ/2)|0> + e^{iφ} sin(θ/2)|1>` and its complement.
    Bloch { theta: f64, phi: f64 },
    /// Qubit basis in the X-Z plane; same as `Bloch { theta, phi: 0 }`.
    Xz { theta: f64 },
    /// Columns of a `d x d` unitary, row-major entries.
    Unitary { d: usize, entries: Vec<Complex64> },
}

impl MeasurementSpec {
    /// Instantiates the measurement on local dimension `d`.
    pub fn build(&self, d: usize) -> Result<ProjectiveMeasurement> {
        match self {
            MeasurementSpec::ZBasis => computational_basis(d),
            MeasurementSpec::Bloch { theta, phi } => {
                require_qubit(d, "bloch")?;
                Ok(qubit_bloch_measurement(*theta, *phi))
            }
            MeasurementSpec::Xz { theta } => {
                require_qubit(d, "xz")?;
                Ok(xz_plane_measurement(*theta))
            }
            MeasurementSpec::Unitary { d: ud, entries } => {
                if *ud != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: *ud,
                    });
                }
                unitary_basis(d, entries)
            }
        }
    }
}

fn require_qubit(d: usize, what: &str) -> Result<()> {
    if d != 2 {
        return Err(Error::InvalidMeasurement(format!(
            "{what} measurements are defined for qubits only (local dimension {d})"
        )));
    }
    Ok(())
}

fn format_complex(z: &Complex64) -> String {
    format!("{}{:+}j", z.re, z.im)
}

impl fmt::Display for MeasurementSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasurementSpec::ZBasis => write!(f, "zbasis"),
            MeasurementSpec::Bloch { theta, phi } => write!(f, "bloch:{theta},{phi}"),
            MeasurementSpec::Xz { theta } => write!(f, "xz:{theta}"),
            MeasurementSpec::Unitary { entries, .. } => {
                let body: Vec<String> = entries.iter().map(format_complex).collect();
                write!(f, "unitary:{}", body.join(","))
            }
        }
    }
}

impl Serialize for MeasurementSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("invalid {what} '{s}'")))
}

impl FromStr for MeasurementSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zbasis" {
            return Ok(MeasurementSpec::ZBasis);
        }
        let (kind, body) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("unknown measurement descriptor '{s}'")))?;
        match kind {
            "bloch" => {
                let (theta, phi) = body.split_once(',').ok_or_else(|| {
                    Error::Parse(format!("expected bloch:<theta>,<phi>, got '{s}'"))
                })?;
                Ok(MeasurementSpec::Bloch {
                    theta: parse_f64(theta, "theta")?,
                    phi: parse_f64(phi, "phi")?,
                })
            }
            "xz" => Ok(MeasurementSpec::Xz {
                theta: parse_f64(body, "theta")?,
            }),
            "unitary" => {
                let entries = body
                    .split(',')
                    .map(|tok| {
                        Complex64::from_str(tok.trim())
                            .map_err(|_| Error::Parse(format!("invalid complex entry '{tok}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let d = (entries.len() as f64).sqrt().round() as usize;
                if d < 2 || d * d != entries.len() {
                    return Err(Error::Parse(format!(
                        "unitary needs d*d entries with d >= 2, got {}",
                        entries.len()
                    )));
                }
                Ok(MeasurementSpec::Unitary { d, entries })
            }
            _ => Err(Error::Parse(format!("unknown measurement kind '{kind}'"))),
        }
    }
}

/// A complete set of `d` orthogonal rank-1 projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveMeasurement {
    outcomes: Vec<ComplexMatrix>,
    label: MeasurementSpec,
}

impl ProjectiveMeasurement {
    /// Projectors onto the given orthonormal vectors; checks the projective-measurement invariants.
    pub fn from_vectors(vectors: &[Vec<Complex64>], label: MeasurementSpec) -> Result<Self> {
        let outcomes = vectors.iter().map(|v| ComplexMatrix::outer(v)).collect();
        let m = Self { outcomes, label };
        m.validate()?;
        Ok(m)
    }

    pub fn outcomes(&self) -> &[ComplexMatrix] {
        &self.outcomes
    }

    pub fn label(&self) -> &MeasurementSpec {
        &self.label
    }

    /// Local dimension (= number of outcomes).
    pub fn dim(&self) -> usize {
        self.outcomes.len()
    }

    fn validate(&self) -> Result<()> {
        let d = self.outcomes.len();
        if d < 2 {
            return Err(Error::InvalidMeasurement("fewer than two outcomes".into()));
        }
        let mut total = ComplexMatrix::zeros(d);
        for (i, p) in self.outcomes.iter().enumerate() {
            if p.dim() != d {
                return Err(Error::InvalidMeasurement(format!(
                    "projector {i} acts on dimension {} instead of {d}",
                    p.dim()
                )));
            }
            if !p.is_hermitian(MEASUREMENT_TOLERANCE)
                || (p * p).max_abs_diff(p) > MEASUREMENT_TOLERANCE
            {
                return Err(Error::InvalidMeasurement(format!(
                    "outcome {i} is not a projector"
                )));
            }
            if (p.trace().re - 1.0).abs() > MEASUREMENT_TOLERANCE {
                return Err(Error::InvalidMeasurement(format!(
                    "outcome {i} is not rank one"
                )));
            }
            for (j, q) in self.outcomes.iter().enumerate().skip(i + 1) {
                if (p * q).max_abs_diff(&ComplexMatrix::zeros(d)) > MEASUREMENT_TOLERANCE {
                    return Err(Error::InvalidMeasurement(format!(
                        "outcomes {i} and {j} are not orthogonal"
                    )));
                }
            }
            total = &total + p;
        }
        if total.max_abs_diff(&ComplexMatrix::identity(d)) > MEASUREMENT_TOLERANCE {
            return Err(Error::InvalidMeasurement(
                "outcomes do not sum to the identity".into(),
            ));
        }
        Ok(())
    }
}

/// Qubit basis along the Bloch direction `(θ, φ)`; outcome 0 is the `+` direction.
pub fn qubit_bloch_measurement(theta: f64, phi: f64) -> ProjectiveMeasurement {
    let (s, c) = (theta / 2.0).sin_cos();
    let phase = Complex64::from_polar(1.0, phi);
    let plus = vec![Complex64::new(c, 0.0), phase * s];
    let minus = vec![Complex64::new(-s, 0.0), phase * c];
    ProjectiveMeasurement::from_vectors(&[plus, minus], MeasurementSpec::Bloch { theta, phi })
        .expect("Bloch parametrization always yields an orthonormal basis")
}

pub fn xz_plane_measurement(theta: f64) -> ProjectiveMeasurement {
    let mut m = qubit_bloch_measurement(theta, 0.0);
    m.label = MeasurementSpec::Xz { theta };
    m
}

pub fn computational_basis(d: usize) -> Result<ProjectiveMeasurement> {
    if d < 2 {
        return Err(Error::InvalidMeasurement(format!(
            "computational basis needs d >= 2, got {d}"
        )));
    }
    let vectors: Vec<Vec<Complex64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                .collect()
        })
        .collect();
    ProjectiveMeasurement::from_vectors(&vectors, MeasurementSpec::ZBasis)
}

/// Basis given by the columns of a row-major `d x d` unitary.
pub fn unitary_basis(d: usize, entries: &[Complex64]) -> Result<ProjectiveMeasurement> {
    let u = ComplexMatrix::from_row_major(d, entries.to_vec())?;
    if (&u.adjoint() * &u).max_abs_diff(&ComplexMatrix::identity(d)) > MEASUREMENT_TOLERANCE {
        return Err(Error::InvalidMeasurement("matrix is not unitary".into()));
    }
    let columns: Vec<Vec<Complex64>> = (0..d)
        .map(|c| (0..d).map(|r| u[(r, c)]).collect())
        .collect();
    ProjectiveMeasurement::from_vectors(
        &columns,
        MeasurementSpec::Unitary {
            d,
            entries: entries.to_vec(),
        },
    )
}

/// Per-party lists of measurements, indexed by input.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    local_dim: usize,
    parties: Vec<Vec<ProjectiveMeasurement>>,
}

impl MeasurementSet {
    pub fn new(local_dim: usize, parties: Vec<Vec<ProjectiveMeasurement>>) -> Result<Self> {
        crate::check_scenario(local_dim, parties.len())?;
        for (i, inputs) in parties.iter().enumerate() {
            if inputs.is_empty() {
                return Err(Error::InvalidMeasurement(format!(
                    "party {i} has no inputs"
                )));
            }
            if let Some(m) = inputs.iter().find(|m| m.dim() != local_dim) {
                return Err(Error::DimensionMismatch {
                    expected: local_dim,
                    found: m.dim(),
                });
            }
        }
        Ok(Self { local_dim, parties })
    }

    /// One input per party.
    pub fn single_input(
        local_dim: usize,
        measurements: Vec<ProjectiveMeasurement>,
    ) -> Result<Self> {
        Self::new(
            local_dim,
            measurements.into_iter().map(|m| vec![m]).collect(),
        )
    }

    /// Builds a single-input set from descriptors, one per party.
    pub fn from_specs(local_dim: usize, specs: &[MeasurementSpec]) -> Result<Self> {
        let ms = specs
            .iter()
            .map(|s| s.build(local_dim))
            .collect::<Result<Vec<_>>>()?;
        Self::single_input(local_dim, ms)
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn party_count(&self) -> usize {
        self.parties.len()
    }

    pub fn inputs(&self, party: usize) -> &[ProjectiveMeasurement] {
        &self.parties[party]
    }

    /// All input tuples in row-major order (last party fastest).
    pub fn input_tuples(&self) -> Vec<Vec<usize>> {
        let mut tuples = vec![Vec::new()];
        for inputs in &self.parties {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    (0..inputs.len()).map(move |x| {
                        let mut next = t.clone();
                        next.push(x);
                        next
                    })
                })
                .collect();
        }
        tuples
    }

    /// The measurements selected by an input tuple.
    pub fn select(&self, inputs: &[usize]) -> Result<Vec<&ProjectiveMeasurement>> {
        if inputs.len() != self.parties.len() {
            return Err(Error::DimensionMismatch {
                expected: self.parties.len(),
                found: inputs.len(),
            });
        }
        inputs
            .iter()
            .zip(&self.parties)
            .map(|(&x, list)| {
                list.get(x)
                    .ok_or_else(|| Error::InvalidParameter(format!("input {x} out of range")))
            })
            .collect()
    }
}

/// `;`-joined per-party descriptors, e.g. `zbasis;xz:0.5`.
pub fn describe_settings(specs: &[MeasurementSpec]) -> String {
    specs
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Parses a `;`-separated list of per-party descriptors.
pub fn parse_settings(s: &str) -> Result<Vec<MeasurementSpec>> {
    s.split(';').map(MeasurementSpec::from_str).collect()
}
