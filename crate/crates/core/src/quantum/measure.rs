use std::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::gate::{GateKind, GateSpec};
use super::state::QuantumState;
use crate::error::{Error, Result};

/// Branches below this probability cannot be postselected.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-14;

/// Eigenvalue of a measured involution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn sign(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn from_sign(sign: i8) -> Self {
        if sign >= 0 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    pub fn both() -> [Outcome; 2] {
        [Outcome::Plus, Outcome::Minus]
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Plus => "+1",
            Outcome::Minus => "-1",
        })
    }
}

impl Serialize for Outcome {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.sign())
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(serde::de::Error::custom(format!(
                "outcome must be +1 or -1, got {other}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// A Hermitian involution (eigenvalues +-1) that can be measured.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    /// Product of single-qubit Pauli factors, e.g. `Z_a Z_b`.
    Pauli(Vec<(Pauli, String)>),
    /// C-NOT with `control`, `target`.
    Cnot(String, String),
    /// C-PHASE (symmetric).
    Cphase(String, String),
}

impl Observable {
    pub fn z(qubits: &[&str]) -> Self {
        Observable::Pauli(qubits.iter().map(|q| (Pauli::Z, q.to_string())).collect())
    }

    pub fn x(qubits: &[&str]) -> Self {
        Observable::Pauli(qubits.iter().map(|q| (Pauli::X, q.to_string())).collect())
    }

    pub fn cnot(control: &str, target: &str) -> Self {
        Observable::Cnot(control.into(), target.into())
    }

    pub fn cphase(a: &str, b: &str) -> Self {
        Observable::Cphase(a.into(), b.into())
    }

    pub fn gates(&self) -> Vec<GateSpec> {
        match self {
            Observable::Pauli(factors) => factors
                .iter()
                .map(|(p, q)| GateSpec {
                    kind: match p {
                        Pauli::X => GateKind::X,
                        Pauli::Y => GateKind::Y,
                        Pauli::Z => GateKind::Z,
                    },
                    targets: vec![q.clone()],
                })
                .collect(),
            Observable::Cnot(c, t) => vec![GateSpec::cnot(c, t)],
            Observable::Cphase(a, b) => vec![GateSpec::cphase(a, b)],
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Pauli(factors) => {
                let parts: Vec<String> =
                    factors.iter().map(|(p, q)| format!("{p:?}_{q}")).collect();
                f.write_str(&parts.join(" "))
            }
            Observable::Cnot(c, t) => write!(f, "CNOT_{c}{t}"),
            Observable::Cphase(a, b) => write!(f, "CPHASE_{a}{b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub operator: String,
    pub outcome: Outcome,
    /// Born probability of `outcome` given the pre-measurement state.
    pub probability: f64,
}

/// How a measurement picks its branch.
pub enum MeasureMode<'a> {
    /// Draw the outcome with its Born probability; the projected state is
    /// rescaled back to the input trace.
    Sample(&'a mut dyn RngCore),
    /// Keep the requested branch without renormalizing.
    Postselect(Outcome),
}

fn apply_observable(
    state: &QuantumState,
    obs: &Observable,
    left: bool,
    right: bool,
) -> Result<QuantumState> {
    let mut s = state.clone();
    for g in obs.gates() {
        g.check_arity()?;
        let names: Vec<&str> = g.targets.iter().map(|t| t.as_str()).collect();
        let qubits: Vec<usize> = names
            .iter()
            .map(|n| {
                state
                    .label_names()
                    .iter()
                    .position(|l| l == n)
                    .ok_or_else(|| Error::UnknownLabel(n.to_string()))
            })
            .collect::<Result<_>>()?;
        let m = g.kind.matrix();
        if left {
            s.left_apply(&qubits, &m);
        }
        if right {
            s.right_apply_adjoint(&qubits, &m);
        }
    }
    Ok(s)
}

impl QuantumState {
    /// Unnormalized projection `P rho P` with `P = (1 +- O)/2`.
    pub fn project(&self, obs: &Observable, outcome: Outcome) -> Result<QuantumState> {
        let sign = f64::from(outcome.sign());
        if self.is_pure() {
            let o = apply_observable(self, obs, true, false)?;
            let mut out = self.scaled(0.25);
            out.add_scaled(&o, sign * 0.5);
            return Ok(out);
        }
        let l = apply_observable(self, obs, true, false)?;
        let r = apply_observable(self, obs, false, true)?;
        let lr = apply_observable(&l, obs, false, true)?;
        let mut out = self.scaled(0.25);
        out.add_scaled(&l, sign * 0.25);
        out.add_scaled(&r, sign * 0.25);
        out.add_scaled(&lr, 0.25);
        Ok(out)
    }

    /// Born probability of `outcome`.
    pub fn branch_probability(&self, obs: &Observable, outcome: Outcome) -> Result<f64> {
        let tr = self.trace();
        if tr.abs() <= f64::MIN_POSITIVE {
            return Err(Error::ZeroNorm);
        }
        Ok(self.project(obs, outcome)?.trace() / tr)
    }

    /// `tr(rho O) / tr(rho)`.
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        Ok(self.branch_probability(obs, Outcome::Plus)?
            - self.branch_probability(obs, Outcome::Minus)?)
    }

    pub fn measure(
        &self,
        obs: &Observable,
        mode: MeasureMode<'_>,
    ) -> Result<(MeasurementRecord, QuantumState)> {
        let tr = self.trace();
        if tr.abs() <= f64::MIN_POSITIVE {
            return Err(Error::ZeroNorm);
        }
        let plus = self.project(obs, Outcome::Plus)?;
        let p_plus = plus.trace() / tr;
        let (outcome, projected, probability) = match mode {
            MeasureMode::Postselect(outcome) => {
                let (proj, p) = match outcome {
                    Outcome::Plus => (plus, p_plus),
                    Outcome::Minus => {
                        let minus = self.project(obs, Outcome::Minus)?;
                        let p = minus.trace() / tr;
                        (minus, p)
                    }
                };
                if p < MIN_BRANCH_PROBABILITY {
                    return Err(Error::ImpossibleBranch {
                        outcome: outcome.sign(),
                        probability: p,
                    });
                }
                (outcome, proj, p)
            }
            MeasureMode::Sample(rng) => {
                let u: f64 = rng.random();
                let (outcome, proj, p) = if u < p_plus {
                    (Outcome::Plus, plus, p_plus)
                } else {
                    let minus = self.project(obs, Outcome::Minus)?;
                    let p = minus.trace() / tr;
                    (Outcome::Minus, minus, p)
                };
                let renorm = proj.scaled(tr / proj.trace());
                (outcome, renorm, p)
            }
        };
        Ok((
            MeasurementRecord {
                operator: obs.to_string(),
                outcome,
                probability,
            },
            projected,
        ))
    }
}
