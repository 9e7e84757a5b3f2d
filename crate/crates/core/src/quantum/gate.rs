use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Gate kinds understood by the dense simulator.
///
/// `Cnot` and `Cphase` take `[control, target]`; `Toffoli` and `UFig2` take
/// `[a, b, c]` with `c` the target. `Custom` carries an arbitrary single-qubit
/// matrix in row-major order and is used for coherent error injection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    X,
    Y,
    Z,
    /// Hadamard rotation.
    H,
    /// pi/2 phase shift `diag(1, i)`.
    S,
    Cnot,
    Cphase,
    Toffoli,
    /// `H_b . Toffoli(a, b -> c) . H_b`: flips `c` iff `(a, b)` is in the -1
    /// eigenstate `|10> - |11>` of C-NOT.
    UFig2,
    Custom([Complex64; 4]),
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::X
            | GateKind::Y
            | GateKind::Z
            | GateKind::H
            | GateKind::S
            | GateKind::Custom(_) => 1,
            GateKind::Cnot | GateKind::Cphase => 2,
            GateKind::Toffoli | GateKind::UFig2 => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::H => "H",
            GateKind::S => "S",
            GateKind::Cnot => "CNOT",
            GateKind::Cphase => "CPHASE",
            GateKind::Toffoli => "TOFFOLI",
            GateKind::UFig2 => "U",
            GateKind::Custom(_) => "CUSTOM",
        }
    }

    /// Row-major unitary on `arity()` qubits; the first target is the most
    /// significant bit of the matrix index.
    pub fn matrix(&self) -> Vec<Complex64> {
        let z = c(0.0);
        let o = c(1.0);
        let i = Complex64::i();
        let h = c(FRAC_1_SQRT_2);
        match self {
            GateKind::X => vec![z, o, o, z],
            GateKind::Y => vec![z, -i, i, z],
            GateKind::Z => vec![o, z, z, -o],
            GateKind::H => vec![h, h, h, -h],
            GateKind::S => vec![o, z, z, i],
            GateKind::Custom(m) => m.to_vec(),
            GateKind::Cnot => permutation(2, |x| if x & 0b10 != 0 { x ^ 0b01 } else { x }),
            GateKind::Cphase => {
                let mut m = identity(4);
                m[15] = -o;
                m
            }
            GateKind::Toffoli => permutation(3, |x| if x & 0b110 == 0b110 { x ^ 1 } else { x }),
            GateKind::UFig2 => {
                // H on the middle qubit, Toffoli, H on the middle qubit.
                let hb = kron(&kron(&identity(2), &GateKind::H.matrix()), &identity(2));
                let t = GateKind::Toffoli.matrix();
                matmul(&hb, &matmul(&t, &hb, 8), 8)
            }
        }
    }
}

fn identity(d: usize) -> Vec<Complex64> {
    let mut m = vec![c(0.0); d * d];
    for k in 0..d {
        m[k * d + k] = c(1.0);
    }
    m
}

fn permutation(bits: usize, f: impl Fn(usize) -> usize) -> Vec<Complex64> {
    let d = 1 << bits;
    let mut m = vec![c(0.0); d * d];
    for x in 0..d {
        m[f(x) * d + x] = c(1.0);
    }
    m
}

pub(crate) fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let da = (a.len() as f64).sqrt().round() as usize;
    let db = (b.len() as f64).sqrt().round() as usize;
    let d = da * db;
    let mut m = vec![c(0.0); d * d];
    for i in 0..da {
        for j in 0..da {
            for k in 0..db {
                for l in 0..db {
                    m[(i * db + k) * d + j * db + l] = a[i * da + j] * b[k * db + l];
                }
            }
        }
    }
    m
}

pub(crate) fn matmul(a: &[Complex64], b: &[Complex64], d: usize) -> Vec<Complex64> {
    let mut m = vec![c(0.0); d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == c(0.0) {
                continue;
            }
            for j in 0..d {
                m[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    m
}

/// A gate bound to concrete qubit labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub kind: GateKind,
    pub targets: Vec<String>,
}

impl GateSpec {
    pub fn new(kind: GateKind, targets: &[&str]) -> Result<Self> {
        let gate = Self {
            kind,
            targets: targets.iter().map(|t| t.to_string()).collect(),
        };
        gate.check_arity()?;
        Ok(gate)
    }

    pub(crate) fn check_arity(&self) -> Result<()> {
        if self.targets.len() != self.kind.arity() {
            return Err(Error::ArityMismatch {
                kind: self.kind.name(),
                expected: self.kind.arity(),
                got: self.targets.len(),
            });
        }
        Ok(())
    }

    pub fn x(q: &str) -> Self {
        Self::unchecked(GateKind::X, &[q])
    }
    pub fn z(q: &str) -> Self {
        Self::unchecked(GateKind::Z, &[q])
    }
    pub fn h(q: &str) -> Self {
        Self::unchecked(GateKind::H, &[q])
    }
    pub fn s(q: &str) -> Self {
        Self::unchecked(GateKind::S, &[q])
    }
    pub fn cnot(control: &str, target: &str) -> Self {
        Self::unchecked(GateKind::Cnot, &[control, target])
    }
    pub fn cphase(a: &str, b: &str) -> Self {
        Self::unchecked(GateKind::Cphase, &[a, b])
    }
    pub fn toffoli(a: &str, b: &str, target: &str) -> Self {
        Self::unchecked(GateKind::Toffoli, &[a, b, target])
    }
    pub fn u_fig2(a: &str, b: &str, c: &str) -> Self {
        Self::unchecked(GateKind::UFig2, &[a, b, c])
    }
    pub fn custom(q: &str, m: [Complex64; 4]) -> Self {
        Self::unchecked(GateKind::Custom(m), &[q])
    }

    fn unchecked(kind: GateKind, targets: &[&str]) -> Self {
        Self {
            kind,
            targets: targets.iter().map(|t| t.to_string()).collect(),
        }
    }
}

impl fmt::Display for GateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.kind.name(), self.targets.join(""))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adjoint(m: &[Complex64], d: usize) -> Vec<Complex64> {
        let mut a = vec![c(0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                a[j * d + i] = m[i * d + j].conj();
            }
        }
        a
    }

    #[test]
    fn every_gate_is_unitary() {
        let kinds = [
            GateKind::X,
            GateKind::Y,
            GateKind::Z,
            GateKind::H,
            GateKind::S,
            GateKind::Cnot,
            GateKind::Cphase,
            GateKind::Toffoli,
            GateKind::UFig2,
        ];
        for kind in kinds {
            let d = 1 << kind.arity();
            let m = kind.matrix();
            let p = matmul(&adjoint(&m, d), &m, d);
            let id = identity(d);
            let err = p
                .iter()
                .zip(&id)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err <= 1e-12, "{} not unitary: {err}", kind.name());
        }
    }

    #[test]
    fn cphase_is_hadamard_conjugated_cnot() {
        let hb = kron(&identity(2), &GateKind::H.matrix());
        let conj = matmul(&hb, &matmul(&GateKind::Cnot.matrix(), &hb, 4), 4);
        let cz = GateKind::Cphase.matrix();
        for (a, b) in conj.iter().zip(&cz) {
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn arity_is_checked() {
        let err = GateSpec::new(GateKind::Cnot, &["a"]).unwrap_err();
        assert!(matches!(
            err,
            Error::ArityMismatch {
                expected: 2,
                got: 1,
                ..
            }
        ));
    }
}
