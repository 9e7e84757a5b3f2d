use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gate::GateSpec;
use crate::error::{Error, Result};

/// Largest pure state (amplitude vector of length 2^14).
pub const MAX_PURE_QUBITS: usize = 14;
/// Largest density matrix (2^10 x 2^10).
pub const MAX_MIXED_QUBITS: usize = 10;
/// Relative magnitude below which an amplitude or trace counts as zero.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    LogicalData,
    Ancilla,
    CatBit,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitLabel {
    name: String,
    role: Role,
}

impl QubitLabel {
    pub fn new(name: impl Into<String>, role: Role) -> Self {
        Self {
            name: name.into(),
            role,
        }
    }
    pub fn data(name: impl Into<String>) -> Self {
        Self::new(name, Role::LogicalData)
    }
    pub fn ancilla(name: impl Into<String>) -> Self {
        Self::new(name, Role::Ancilla)
    }
    pub fn cat(name: impl Into<String>) -> Self {
        Self::new(name, Role::CatBit)
    }
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn role(&self) -> Role {
        self.role
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Pure(Vec<Complex64>),
    /// Row-major `2^n x 2^n`.
    Mixed(Vec<Complex64>),
}

/// Dense state over an ordered list of labelled qubits.
///
/// The first label is the most significant bit of a basis index, so
/// `|01>` on labels `[a, b]` means `a = 0, b = 1`. States are allowed to be
/// unnormalized; every probability and fidelity divides by the trace.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    labels: Vec<QubitLabel>,
    repr: Repr,
}

fn check_labels(labels: &[QubitLabel]) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.name()) {
            return Err(Error::DuplicateLabel(l.name().to_string()));
        }
    }
    Ok(())
}

fn check_cap(n: usize, pure: bool) -> Result<()> {
    let (kind, cap) = if pure {
        ("pure", MAX_PURE_QUBITS)
    } else {
        ("mixed", MAX_MIXED_QUBITS)
    };
    if n > cap {
        return Err(Error::CapExceeded {
            kind,
            qubits: n,
            cap,
        });
    }
    Ok(())
}

/// Applies a `2^k x 2^k` matrix to the index bits `positions` of `data`.
/// `positions[0]` addresses the most significant bit of the matrix index.
pub(crate) fn apply_kernel(data: &mut [Complex64], positions: &[usize], m: &[Complex64]) {
    let k = positions.len();
    let d = 1usize << k;
    let mask: usize = positions.iter().map(|p| 1usize << p).sum();
    let offsets: Vec<usize> = (0..d)
        .map(|j| {
            positions
                .iter()
                .enumerate()
                .filter(|(t, _)| (j >> (k - 1 - t)) & 1 == 1)
                .map(|(_, p)| 1usize << p)
                .sum()
        })
        .collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); d];
    for base in 0..data.len() {
        if base & mask != 0 {
            continue;
        }
        for j in 0..d {
            buf[j] = data[base | offsets[j]];
        }
        for i in 0..d {
            let row = &m[i * d..(i + 1) * d];
            data[base | offsets[i]] = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
        }
    }
}

impl QuantumState {
    /// Pure state from an amplitude vector of length `2^n`.
    pub fn pure(labels: Vec<QubitLabel>, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_labels(&labels)?;
        check_cap(labels.len(), true)?;
        let dim = 1usize << labels.len();
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: amplitudes.len(),
            });
        }
        let s = Self {
            labels,
            repr: Repr::Pure(amplitudes),
        };
        if s.trace() <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(s)
    }

    /// Density matrix (row-major). Hermiticity is not enforced here: the
    /// distillation oracles push signed quasi-states through the same linear
    /// maps. Use [`QuantumState::is_physical`] to check.
    pub fn mixed(labels: Vec<QubitLabel>, matrix: Vec<Complex64>) -> Result<Self> {
        check_labels(&labels)?;
        check_cap(labels.len(), false)?;
        let dim = 1usize << labels.len();
        if matrix.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: matrix.len(),
            });
        }
        let s = Self {
            labels,
            repr: Repr::Mixed(matrix),
        };
        if s.trace().abs() <= f64::MIN_POSITIVE {
            return Err(Error::ZeroNorm);
        }
        Ok(s)
    }

    /// Computational basis state, e.g. `basis(labels, "010")`.
    pub fn basis(labels: Vec<QubitLabel>, bits: &str) -> Result<Self> {
        Self::from_terms(labels, &[(bits, Complex64::new(1.0, 0.0))])
    }

    /// Unnormalized sum of basis kets, e.g. `|00> + |01> + |10>`.
    pub fn from_terms(labels: Vec<QubitLabel>, terms: &[(&str, Complex64)]) -> Result<Self> {
        check_cap(labels.len(), true)?;
        let n = labels.len();
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        for (bits, coeff) in terms {
            amps[parse_bits(bits, n)?] += coeff;
        }
        Self::pure(labels, amps)
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[QubitLabel] {
        &self.labels
    }

    pub fn label_names(&self) -> Vec<&str> {
        self.labels.iter().map(|l| l.name()).collect()
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, Repr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            Repr::Mixed(_) => None,
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.labels.len()
    }

    /// `tr(rho)`, or `<v|v>` for a pure state.
    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Pure(v) => v.iter().map(|a| a.norm_sqr()).sum(),
            Repr::Mixed(m) => {
                let d = self.dim();
                (0..d).map(|i| m[i * d + i].re).sum()
            }
        }
    }

    /// Full density matrix (`|v><v|` for pure states).
    pub fn density_matrix(&self) -> Vec<Complex64> {
        match &self.repr {
            Repr::Mixed(m) => m.clone(),
            Repr::Pure(v) => {
                let d = v.len();
                let mut m = vec![Complex64::new(0.0, 0.0); d * d];
                for i in 0..d {
                    if v[i] == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for j in 0..d {
                        m[i * d + j] = v[i] * v[j].conj();
                    }
                }
                m
            }
        }
    }

    pub fn to_mixed(&self) -> Result<Self> {
        check_cap(self.num_qubits(), false)?;
        Ok(Self {
            labels: self.labels.clone(),
            repr: Repr::Mixed(self.density_matrix()),
        })
    }

    /// Hermitian and positive semidefinite, eigenvalues >= -1e-12 * trace.
    /// Checked by attempting an LDL^T factorisation of `rho + tol * I`.
    pub fn is_physical(&self) -> bool {
        let m = match &self.repr {
            Repr::Pure(_) => return true,
            Repr::Mixed(m) => m,
        };
        let d = self.dim();
        let tr = self.trace();
        if tr <= 0.0 {
            return false;
        }
        let herm = (0..d)
            .all(|i| (0..d).all(|j| (m[i * d + j] - m[j * d + i].conj()).norm() <= 1e-10 * tr));
        herm && is_psd(m, d, 1e-12 * tr)
    }

    fn position(&self, name: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l.name() == name)
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    fn positions(&self, names: &[String]) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        names
            .iter()
            .map(|n| {
                if !seen.insert(n.as_str()) {
                    return Err(Error::DuplicateLabel(n.clone()));
                }
                self.position(n)
            })
            .collect()
    }

    /// Applies `m` on the left (`m . rho` or `m |v>`).
    pub(crate) fn left_apply(&mut self, qubits: &[usize], m: &[Complex64]) {
        let n = self.num_qubits();
        match &mut self.repr {
            Repr::Pure(v) => {
                let bits: Vec<usize> = qubits.iter().map(|q| n - 1 - q).collect();
                apply_kernel(v, &bits, m);
            }
            Repr::Mixed(rho) => {
                let bits: Vec<usize> = qubits.iter().map(|q| 2 * n - 1 - q).collect();
                apply_kernel(rho, &bits, m);
            }
        }
    }

    /// Applies `rho . m^dagger` on a density matrix.
    pub(crate) fn right_apply_adjoint(&mut self, qubits: &[usize], m: &[Complex64]) {
        let n = self.num_qubits();
        if let Repr::Mixed(rho) = &mut self.repr {
            let conj: Vec<Complex64> = m.iter().map(|z| z.conj()).collect();
            let bits: Vec<usize> = qubits.iter().map(|q| n - 1 - q).collect();
            apply_kernel(rho, &bits, &conj);
        }
    }

    pub(crate) fn gate_in_place(&mut self, gate: &GateSpec) -> Result<()> {
        gate.check_arity()?;
        let qubits = self.positions(&gate.targets)?;
        let m = gate.kind.matrix();
        self.left_apply(&qubits, &m);
        self.right_apply_adjoint(&qubits, &m);
        Ok(())
    }

    pub fn apply_gate(mut self, gate: &GateSpec) -> Result<Self> {
        self.gate_in_place(gate)?;
        Ok(self)
    }

    pub fn apply_gates<'g>(
        mut self,
        gates: impl IntoIterator<Item = &'g GateSpec>,
    ) -> Result<Self> {
        for g in gates {
            self.gate_in_place(g)?;
        }
        Ok(self)
    }

    /// Joint state `self (x) other`; labels of `self` come first.
    pub fn tensor(&self, other: &QuantumState) -> Result<Self> {
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        check_labels(&labels)?;
        match (&self.repr, &other.repr) {
            (Repr::Pure(a), Repr::Pure(b)) => {
                check_cap(labels.len(), true)?;
                let amps = a
                    .iter()
                    .flat_map(|x| b.iter().map(move |y| x * y))
                    .collect();
                Ok(Self {
                    labels,
                    repr: Repr::Pure(amps),
                })
            }
            _ => {
                check_cap(labels.len(), false)?;
                let m = super::gate::kron(&self.density_matrix(), &other.density_matrix());
                Ok(Self {
                    labels,
                    repr: Repr::Mixed(m),
                })
            }
        }
    }

    /// Partial trace over `names`. The result is always a density matrix.
    pub fn discard(&self, names: &[&str]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let gone = self.positions(&names)?;
        if gone.len() == self.num_qubits() {
            return Err(Error::DiscardAll);
        }
        let n = self.num_qubits();
        let keep: Vec<usize> = (0..n).filter(|q| !gone.contains(q)).collect();
        check_cap(keep.len(), false)?;
        let kd = 1usize << keep.len();
        let gd = 1usize << gone.len();
        let index = |kept: usize, traced: usize| -> usize {
            let mut idx = 0usize;
            for (t, &q) in keep.iter().enumerate() {
                if (kept >> (keep.len() - 1 - t)) & 1 == 1 {
                    idx |= 1 << (n - 1 - q);
                }
            }
            for (t, &q) in gone.iter().enumerate() {
                if (traced >> (gone.len() - 1 - t)) & 1 == 1 {
                    idx |= 1 << (n - 1 - q);
                }
            }
            idx
        };
        let mut out = vec![Complex64::new(0.0, 0.0); kd * kd];
        match &self.repr {
            Repr::Pure(v) => {
                for g in 0..gd {
                    let col: Vec<Complex64> = (0..kd).map(|k| v[index(k, g)]).collect();
                    for i in 0..kd {
                        if col[i] == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for j in 0..kd {
                            out[i * kd + j] += col[i] * col[j].conj();
                        }
                    }
                }
            }
            Repr::Mixed(m) => {
                let d = self.dim();
                for g in 0..gd {
                    for i in 0..kd {
                        let r = index(i, g);
                        for j in 0..kd {
                            out[i * kd + j] += m[r * d + index(j, g)];
                        }
                    }
                }
            }
        }
        Ok(Self {
            labels: keep.iter().map(|&q| self.labels[q].clone()).collect(),
            repr: Repr::Mixed(out),
        })
    }

    /// Reorders qubits to match `names` (which must be a permutation of the
    /// current labels).
    pub fn permuted(&self, names: &[&str]) -> Result<Self> {
        let names_owned: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let order = self.positions(&names_owned)?;
        if order.len() != self.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits(),
                got: order.len(),
            });
        }
        let n = self.num_qubits();
        // new index bit for position t corresponds to old qubit order[t]
        let map = |new_idx: usize| -> usize {
            let mut old = 0usize;
            for (t, &q) in order.iter().enumerate() {
                if (new_idx >> (n - 1 - t)) & 1 == 1 {
                    old |= 1 << (n - 1 - q);
                }
            }
            old
        };
        let d = self.dim();
        let labels = order.iter().map(|&q| self.labels[q].clone()).collect();
        let repr = match &self.repr {
            Repr::Pure(v) => Repr::Pure((0..d).map(|i| v[map(i)]).collect()),
            Repr::Mixed(m) => {
                let idx: Vec<usize> = (0..d).map(map).collect();
                let mut out = vec![Complex64::new(0.0, 0.0); d * d];
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = m[idx[i] * d + idx[j]];
                    }
                }
                Repr::Mixed(out)
            }
        };
        Ok(Self { labels, repr })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let repr = match &self.repr {
            Repr::Pure(v) => Repr::Pure(v.iter().map(|a| a * factor.sqrt()).collect()),
            Repr::Mixed(m) => Repr::Mixed(m.iter().map(|a| a * factor).collect()),
        };
        Self {
            labels: self.labels.clone(),
            repr,
        }
    }

    /// Rescaled to unit trace.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t.abs() <= f64::MIN_POSITIVE {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scaled(1.0 / t))
    }

    /// `tr(rho |t><t|) / (tr(rho) <t|t>)`. The target must be pure and carry
    /// the same labels (in any order).
    pub fn fidelity(&self, target: &QuantumState) -> Result<f64> {
        let t = match &target.repr {
            Repr::Pure(_) => target.permuted(&self.label_names())?,
            Repr::Mixed(_) => {
                return Err(Error::InvalidArgument(
                    "fidelity target must be a pure state".into(),
                ))
            }
        };
        let tv = t.amplitudes().expect("pure");
        let tn = t.trace();
        let tr = self.trace();
        if tn <= 0.0 || tr.abs() <= f64::MIN_POSITIVE {
            return Err(Error::ZeroNorm);
        }
        let overlap = match &self.repr {
            Repr::Pure(v) => {
                let ip: Complex64 = tv.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
                ip.norm_sqr()
            }
            Repr::Mixed(m) => {
                let d = self.dim();
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..d {
                    if tv[i] == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for j in 0..d {
                        s += tv[i].conj() * m[i * d + j] * tv[j];
                    }
                }
                s.re
            }
        };
        Ok(overlap / (tr * tn))
    }

    /// Largest entrywise difference between the density matrices of two
    /// states over the same labels (any order).
    pub fn max_abs_diff(&self, other: &QuantumState) -> Result<f64> {
        let o = other.permuted(&self.label_names())?;
        let a = self.density_matrix();
        let b = o.density_matrix();
        Ok(a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max))
    }

    /// `<bits| rho |bits>`, unnormalized.
    pub fn population(&self, bits: &str) -> Result<f64> {
        let idx = parse_bits(bits, self.num_qubits())?;
        Ok(match &self.repr {
            Repr::Pure(v) => v[idx].norm_sqr(),
            Repr::Mixed(m) => m[idx * self.dim() + idx].re,
        })
    }

    /// Matrix element `<row| rho |col>` between basis kets, for density
    /// matrices and pure states alike.
    pub fn element(&self, row: usize, col: usize) -> Complex64 {
        match &self.repr {
            Repr::Pure(v) => v[row] * v[col].conj(),
            Repr::Mixed(m) => m[row * self.dim() + col],
        }
    }

    /// Conditions a pure state on `name` holding `bit` and drops that qubit.
    pub fn fix_qubit(&self, name: &str, bit: u8) -> Result<Self> {
        let q = self.position(name)?;
        let v = self
            .amplitudes()
            .ok_or_else(|| Error::InvalidArgument("fix_qubit needs a pure state".into()))?;
        let n = self.num_qubits();
        if n == 1 {
            return Err(Error::DiscardAll);
        }
        let shift = n - 1 - q;
        let amps: Vec<Complex64> = (0..(1usize << (n - 1)))
            .map(|k| {
                let high = (k >> shift) << (shift + 1);
                let low = k & ((1 << shift) - 1);
                v[high | (usize::from(bit) << shift) | low]
            })
            .collect();
        let mut labels = self.labels.clone();
        labels.remove(q);
        Self::pure(labels, amps)
    }

    /// Unitary matrix (row-major, over this state's labels) of a gate
    /// sequence, built column by column.
    pub fn unitary_of(labels: &[QubitLabel], gates: &[GateSpec]) -> Result<Vec<Complex64>> {
        let n = labels.len();
        check_cap(n, true)?;
        let d = 1usize << n;
        let mut u = vec![Complex64::new(0.0, 0.0); d * d];
        for j in 0..d {
            let mut col = vec![Complex64::new(0.0, 0.0); d];
            col[j] = Complex64::new(1.0, 0.0);
            let s = Self::pure(labels.to_vec(), col)?.apply_gates(gates)?;
            for (i, a) in s.amplitudes().expect("pure").iter().enumerate() {
                u[i * d + j] = *a;
            }
        }
        Ok(u)
    }

    /// Haar-like random unit vector (complex Gaussian amplitudes).
    pub fn random_pure(labels: Vec<QubitLabel>, rng: &mut dyn rand::RngCore) -> Result<Self> {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let d = 1usize << labels.len();
        let amps: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::pure(labels, amps)?.normalized()
    }

    pub(crate) fn add_scaled(&mut self, other: &QuantumState, factor: f64) {
        match (&mut self.repr, &other.repr) {
            (Repr::Pure(a), Repr::Pure(b)) | (Repr::Mixed(a), Repr::Mixed(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y * factor;
                }
            }
            _ => unreachable!("representations must match"),
        }
    }
}

pub(crate) fn parse_bits(bits: &str, n: usize) -> Result<usize> {
    if bits.len() != n || !bits.chars().all(|c| c == '0' || c == '1') {
        return Err(Error::InvalidBasisString(bits.to_string()));
    }
    Ok(bits
        .chars()
        .fold(0usize, |acc, c| (acc << 1) | usize::from(c == '1')))
}

fn is_psd(m: &[Complex64], d: usize, tol: f64) -> bool {
    // Cholesky of m + tol * I
    let mut l = vec![Complex64::new(0.0, 0.0); d * d];
    for j in 0..d {
        let mut diag = m[j * d + j].re + tol;
        for k in 0..j {
            diag -= l[j * d + k].norm_sqr();
        }
        if diag < 0.0 {
            return false;
        }
        let ljj = diag.sqrt();
        l[j * d + j] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..d {
            let mut s = m[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k].conj();
            }
            l[i * d + j] = if ljj > 0.0 {
                s / ljj
            } else if s.norm() <= tol {
                Complex64::new(0.0, 0.0)
            } else {
                return false;
            };
        }
    }
    true
}

impl fmt::Display for QuantumState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.num_qubits();
        write!(f, "[{}] ", self.label_names().join(","))?;
        match &self.repr {
            Repr::Pure(v) => {
                let mut first = true;
                for (i, a) in v.iter().enumerate() {
                    if a.norm() <= ZERO_TOL {
                        continue;
                    }
                    if !first {
                        write!(f, " + ")?;
                    }
                    first = false;
                    write!(f, "({:.4}{:+.4}i)|{:0width$b}>", a.re, a.im, i, width = n)?;
                }
                Ok(())
            }
            Repr::Mixed(_) => write!(f, "density matrix, trace {:.6}", self.trace()),
        }
    }
}

/// Labels with the given role, in order.
pub fn labels(names: &[&str], role: Role) -> Vec<QubitLabel> {
    names.iter().map(|n| QubitLabel::new(*n, role)).collect()
}
