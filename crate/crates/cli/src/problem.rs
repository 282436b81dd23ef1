//! Problem files: JSON inputs shared by every subcommand.

use std::collections::BTreeMap;

use bosonic_core::clifford::{QubitCircuit, QubitProductObservable, QubitProductState};
use bosonic_core::estimators::VarianceMode;
use bosonic_core::linalg::haar_random_unitary;
use bosonic_core::observables::{ProductObservable, SingleModeOperator};
use bosonic_core::states::{ModeState, ProductState};
use bosonic_core::{ComplexMatrix, C64};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Phase operators are truncated at this photon number unless the file says otherwise.
pub const DEFAULT_PHASE_CUTOFF: usize = 10;
pub const DEFAULT_ORACLE_CUTOFF: usize = 10;

/// A complex number written as `[re, im]`, or a bare real.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Complex {
    Pair([f64; 2]),
    Real(f64),
}

impl From<Complex> for C64 {
    fn from(c: Complex) -> Self {
        match c {
            Complex::Pair([re, im]) => C64::new(re, im),
            Complex::Real(re) => C64::new(re, 0.0),
        }
    }
}

pub fn matrix(rows: &[Vec<Complex>]) -> Result<ComplexMatrix, CliError> {
    let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|&c| c.into()).collect()).collect();
    Ok(ComplexMatrix::from_rows(&rows)?)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Circuit {
    Matrix(Vec<Vec<Complex>>),
    Haar { modes: usize, seed: u64 },
    /// Near-Clifford gate list, one gate per entry.
    Gates(Vec<String>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Fock { n: usize },
    Coherent { alpha: Complex },
    Squeezed { r: f64, #[serde(default)] phi: f64 },
    Superposition { coefficients: Vec<Complex> },
}

impl StateSpec {
    fn build(&self) -> ModeState {
        match self {
            StateSpec::Fock { n } => ModeState::Fock(*n),
            StateSpec::Coherent { alpha } => ModeState::Coherent((*alpha).into()),
            StateSpec::Squeezed { r, phi } => ModeState::SqueezedVacuum { r: *r, phi: *phi },
            StateSpec::Superposition { coefficients } => {
                ModeState::Superposition(coefficients.iter().map(|&c| c.into()).collect())
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Projector { m: usize },
    Phase { theta: f64, cutoff: Option<usize> },
    Matrix { entries: Vec<Vec<Complex>> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub mode: usize,
    pub op: OperatorSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum QubitOperatorSpec {
    Pauli { p: String },
    Projector { bit: u8 },
    Matrix { entries: [[Complex; 2]; 2] },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitFactorSpec {
    pub qubit: usize,
    pub op: QubitOperatorSpec,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VarianceSpec {
    #[default]
    Bound,
    Override(f64),
    Pilot(usize),
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub k_observables: Option<usize>,
    #[serde(default)]
    pub variance: VarianceSpec,
}

impl ConfigSpec {
    pub fn variance_mode(&self) -> VarianceMode {
        match self.variance {
            VarianceSpec::Bound => VarianceMode::Bound,
            VarianceSpec::Override(v) => VarianceMode::Override(v),
            VarianceSpec::Pilot(n) => VarianceMode::Pilot(n),
        }
    }
}

/// Everything a subcommand may read. Which fields are required depends on the subcommand.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub circuit: Option<Circuit>,
    /// Bosonic inputs are a list of mode states; qubit inputs a list of `[a, b]` pairs.
    pub input: Option<serde_json::Value>,
    pub output: Option<Vec<StateSpec>>,
    pub observables: Option<serde_json::Value>,
    pub matrix: Option<Vec<Vec<Complex>>>,
    pub omega: Option<Vec<u64>>,
    pub theta: Option<f64>,
    pub omega_max: Option<usize>,
    pub support: Option<Vec<Vec<usize>>>,
    pub n_samples: Option<usize>,
    pub cutoff: Option<usize>,
    #[serde(default)]
    pub config: ConfigSpec,
}

fn missing(field: &str) -> CliError {
    CliError::Validation(format!("problem file is missing `{field}`"))
}

fn typed<T: serde::de::DeserializeOwned>(value: &serde_json::Value, field: &str) -> Result<T, CliError> {
    serde_json::from_value(value.clone()).map_err(|e| CliError::Validation(format!("`{field}`: {e}")))
}

impl Problem {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("malformed problem JSON: {e}")))
    }

    pub fn unitary(&self) -> Result<ComplexMatrix, CliError> {
        match self.circuit.as_ref().ok_or_else(|| missing("circuit"))? {
            Circuit::Matrix(rows) => matrix(rows),
            Circuit::Haar { modes, seed } => Ok(haar_random_unitary(*modes, *seed)?),
            Circuit::Gates(_) => Err(CliError::Validation("expected a matrix or haar circuit, got a gate list".into())),
        }
    }

    pub fn qubit_circuit(&self) -> Result<QubitCircuit, CliError> {
        match self.circuit.as_ref().ok_or_else(|| missing("circuit"))? {
            Circuit::Gates(lines) => {
                let qubits = self.input.as_ref().and_then(|v| v.as_array()).map(Vec::len);
                Ok(QubitCircuit::parse(&lines.join("\n"), qubits)?)
            }
            _ => Err(CliError::Validation("expected a gate-list circuit".into())),
        }
    }

    pub fn input_state(&self) -> Result<ProductState, CliError> {
        let specs: Vec<StateSpec> = typed(self.input.as_ref().ok_or_else(|| missing("input"))?, "input")?;
        Ok(ProductState::new(specs.iter().map(StateSpec::build).collect())?)
    }

    pub fn output_state(&self) -> Result<ProductState, CliError> {
        let specs = self.output.as_ref().ok_or_else(|| missing("output"))?;
        Ok(ProductState::new(specs.iter().map(StateSpec::build).collect())?)
    }

    pub fn qubit_input(&self) -> Result<QubitProductState, CliError> {
        let pairs: Vec<[Complex; 2]> = typed(self.input.as_ref().ok_or_else(|| missing("input"))?, "input")?;
        Ok(QubitProductState::new(pairs.iter().map(|[a, b]| [(*a).into(), (*b).into()]).collect())?)
    }

    pub fn observables(&self, modes: usize) -> Result<Vec<ProductObservable>, CliError> {
        let lists: Vec<Vec<FactorSpec>> =
            typed(self.observables.as_ref().ok_or_else(|| missing("observables"))?, "observables")?;
        lists
            .iter()
            .map(|factors| {
                let pairs = factors
                    .iter()
                    .map(|f| {
                        let op = match &f.op {
                            OperatorSpec::Projector { m } => SingleModeOperator::projector(*m),
                            OperatorSpec::Phase { theta, cutoff } => {
                                SingleModeOperator::phase(*theta, cutoff.unwrap_or(DEFAULT_PHASE_CUTOFF))?
                            }
                            OperatorSpec::Matrix { entries } => SingleModeOperator::from_matrix(&matrix(entries)?)?,
                        };
                        Ok((f.mode, op))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                Ok(ProductObservable::from_pairs(modes, pairs)?)
            })
            .collect()
    }

    pub fn qubit_observables(&self, qubits: usize) -> Result<Vec<QubitProductObservable>, CliError> {
        let lists: Vec<Vec<QubitFactorSpec>> =
            typed(self.observables.as_ref().ok_or_else(|| missing("observables"))?, "observables")?;
        lists
            .iter()
            .map(|factors| {
                let pairs = factors
                    .iter()
                    .map(|f| {
                        let m = match &f.op {
                            QubitOperatorSpec::Pauli { p } => {
                                let idx = match p.to_ascii_uppercase().as_str() {
                                    "I" => 0,
                                    "X" => 1,
                                    "Y" => 2,
                                    "Z" => 3,
                                    other => return Err(CliError::Validation(format!("unknown Pauli `{other}`"))),
                                };
                                QubitProductObservable::pauli(idx)
                            }
                            QubitOperatorSpec::Projector { bit } if *bit < 2 => QubitProductObservable::projector(*bit),
                            QubitOperatorSpec::Projector { bit } => {
                                return Err(CliError::Validation(format!("projector bit {bit} is not 0 or 1")))
                            }
                            QubitOperatorSpec::Matrix { entries } => entries.map(|row| row.map(C64::from)),
                        };
                        Ok((f.qubit, m))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                Ok(QubitProductObservable::from_pairs(qubits, pairs)?)
            })
            .collect()
    }

    pub fn square_matrix(&self) -> Result<ComplexMatrix, CliError> {
        matrix(self.matrix.as_ref().ok_or_else(|| missing("matrix"))?)
    }

    pub fn omega(&self) -> Result<&[u64], CliError> {
        self.omega.as_deref().ok_or_else(|| missing("omega"))
    }

    pub fn theta(&self) -> Result<f64, CliError> {
        self.theta.ok_or_else(|| missing("theta"))
    }

    pub fn omega_max(&self) -> Result<usize, CliError> {
        self.omega_max.ok_or_else(|| missing("omega_max"))
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff.unwrap_or(DEFAULT_ORACLE_CUTOFF)
    }
}

/// Labels each observable by its factors, e.g. `projector(m=1)@0`.
pub fn observable_labels(value: &serde_json::Value) -> Vec<String> {
    value
        .as_array()
        .map(|lists| {
            lists
                .iter()
                .map(|factors| {
                    factors
                        .as_array()
                        .map(|fs| fs.iter().map(factor_label).collect::<Vec<_>>().join(" * "))
                        .unwrap_or_default()
                })
                .collect()
        })
        .unwrap_or_default()
}

fn factor_label(f: &serde_json::Value) -> String {
    let site = f.get("mode").or_else(|| f.get("qubit")).map(|v| v.to_string()).unwrap_or_default();
    let op = f.get("op");
    let kind = op.and_then(|o| o.get("type")).and_then(|t| t.as_str()).unwrap_or("?");
    let params: BTreeMap<&str, String> = op
        .and_then(|o| o.as_object())
        .map(|o| o.iter().filter(|(k, _)| *k != "type" && *k != "entries").map(|(k, v)| (k.as_str(), v.to_string())).collect())
        .unwrap_or_default();
    let params: Vec<String> = params.iter().map(|(k, v)| format!("{k}={}", v.trim_matches('"'))).collect();
    if params.is_empty() {
        format!("{kind}@{site}")
    } else {
        format!("{kind}({})@{site}", params.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_states_and_observables() {
        let p = Problem::parse(
            r#"{"circuit": {"haar": {"modes": 2, "seed": 1}},
                "input": [{"type": "fock", "n": 1}, {"type": "coherent", "alpha": [0.3, -0.1]}],
                "observables": [[{"mode": 0, "op": {"type": "projector", "m": 1}},
                                 {"mode": 1, "op": {"type": "phase", "theta": 0.5}}]]}"#,
        )
        .unwrap();
        assert_eq!(p.unitary().unwrap().rows(), 2);
        assert_eq!(p.input_state().unwrap().len(), 2);
        let obs = p.observables(2).unwrap();
        assert_eq!(obs[0].support().len(), 2);
        let labels = observable_labels(p.observables.as_ref().unwrap());
        assert_eq!(labels, vec!["projector(m=1)@0 * phase(theta=0.5)@1"]);
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = Problem::parse("{\n  \"circuit\": ,\n}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(matches!(Problem::parse(r#"{"bogus": 1}"#), Err(CliError::Validation(_))));
    }

    #[test]
    fn qubit_inputs() {
        let p = Problem::parse(
            r#"{"circuit": {"gates": ["H 0", "T 0"]}, "input": [[1, 0], [[0.6, 0], [0, 0.8]]],
                "observables": [[{"qubit": 0, "op": {"type": "pauli", "p": "x"}}]]}"#,
        )
        .unwrap();
        let c = p.qubit_circuit().unwrap();
        assert_eq!(c.qubits(), 2);
        assert_eq!(p.qubit_input().unwrap().len(), 2);
        assert_eq!(p.qubit_observables(2).unwrap().len(), 1);
    }
}
