//! Distillation of `|psi2>` from noisy `rho(alpha)` states.
//!
//! `rho(a1, a2, a3)` is the unnormalized operator
//! `|psi2><psi2| + a1 |psi2><11| + a2 |11><psi2| + a3 |11><11|` with the
//! unnormalized `|psi2> = |00> + |01> + |10>`. Two copies are combined by
//! measuring `Z_a Z_c`, `Z_b Z_d`, keeping `(+1, +1)` and undoing the
//! correlation with C-NOTs; the surviving pair is `rho(a * a')`.

use num_complex::Complex64;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gadgets::psi2_on;
use crate::quantum::{labels, GateSpec, MeasureMode, Observable, Outcome, QuantumState, Role};

const TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoAlpha {
    pub a1: Complex64,
    pub a2: Complex64,
    pub a3: Complex64,
}

impl RhoAlpha {
    pub fn new(a1: Complex64, a2: Complex64, a3: Complex64) -> Self {
        Self { a1, a2, a3 }
    }

    /// `rho(0, 0, a3)`: the decoherent family.
    pub fn diagonal(a3: f64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self::new(z, z, Complex64::new(a3, 0.0))
    }

    /// Exactly `|psi2><psi2|`.
    pub fn psi2() -> Self {
        Self::diagonal(0.0)
    }

    /// Projector onto `|psi2> + i t |11>`.
    pub fn coherent(t: f64) -> Self {
        Self::new(
            Complex64::new(0.0, -t),
            Complex64::new(0.0, t),
            Complex64::new(t * t, 0.0),
        )
    }

    pub fn distillable(&self) -> bool {
        self.a3.norm() < 1.0
    }

    /// Hermitian and positive semidefinite once embedded on two qubits.
    pub fn is_physical(&self) -> bool {
        let scale = 1.0 + self.a3.norm();
        (self.a2 - self.a1.conj()).norm() <= TOL * scale
            && self.a3.im.abs() <= TOL * scale
            && self.a3.re >= self.a1.norm_sqr() - TOL * scale
    }

    fn check_physical(&self) -> Result<()> {
        if self.is_physical() {
            Ok(())
        } else {
            Err(Error::Unphysical(format!("rho{self}")))
        }
    }

    /// Trace of the embedded operator.
    pub fn trace(&self) -> f64 {
        3.0 + self.a3.re
    }

    /// Entry-wise product, the result of a successful combine.
    pub fn times(&self, other: &RhoAlpha) -> RhoAlpha {
        RhoAlpha::new(self.a1 * other.a1, self.a2 * other.a2, self.a3 * other.a3)
    }

    pub fn max_abs_diff(&self, other: &RhoAlpha) -> f64 {
        [self.a1 - other.a1, self.a2 - other.a2, self.a3 - other.a3]
            .iter()
            .map(|d| d.norm())
            .fold(0.0, f64::max)
    }

    /// The two-qubit density matrix on the given labels.
    pub fn to_state_on(&self, a: &str, b: &str) -> QuantumState {
        let psi = [1.0, 1.0, 1.0, 0.0].map(|x| Complex64::new(x, 0.0));
        let eleven = [0.0, 0.0, 0.0, 1.0].map(|x| Complex64::new(x, 0.0));
        let one = Complex64::new(1.0, 0.0);
        let mut m = vec![Complex64::new(0.0, 0.0); 16];
        for (coef, u, v) in [
            (one, &psi, &psi),
            (self.a1, &psi, &eleven),
            (self.a2, &eleven, &psi),
            (self.a3, &eleven, &eleven),
        ] {
            for i in 0..4 {
                for j in 0..4 {
                    m[i * 4 + j] += coef * u[i] * v[j];
                }
            }
        }
        QuantumState::mixed(labels(&[a, b], Role::Ancilla), m).expect("4x4 matrix")
    }

    pub fn to_state(&self) -> QuantumState {
        self.to_state_on("a", "b")
    }

    /// Reads `(alpha, scale)` back from a two-qubit state, failing if it
    /// has weight outside `span{|psi2>, |11>}`.
    pub fn from_state(state: &QuantumState) -> Result<(RhoAlpha, f64)> {
        if state.num_qubits() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: state.num_qubits(),
            });
        }
        let m = state.density_matrix();
        let at = |i: usize, j: usize| m[i * 4 + j];
        let psi_psi: Complex64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| at(i, j))
            .sum();
        let psi_11: Complex64 = (0..3).map(|i| at(i, 3)).sum();
        let e11_psi: Complex64 = (0..3).map(|j| at(3, j)).sum();
        let s = psi_psi.re / 9.0;
        if s.abs() <= f64::MIN_POSITIVE {
            return Err(Error::ZeroNorm);
        }
        let alpha = RhoAlpha::new(psi_11 / (3.0 * s), e11_psi / (3.0 * s), at(3, 3) / s);
        let rebuilt = alpha.to_state_on("a", "b").density_matrix();
        let residual = m
            .iter()
            .zip(&rebuilt)
            .map(|(x, y)| (x - s * y).norm())
            .fold(0.0, f64::max);
        let scale = m.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if residual > 1e-9 * scale.max(1e-300) {
            return Err(Error::OutsideSpan(residual));
        }
        Ok((alpha, s))
    }
}

impl std::fmt::Display for RhoAlpha {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.a1, self.a2, self.a3)
    }
}

/// Born probability of `(+1, +1)` for two copies.
pub fn success_probability(r: &RhoAlpha, s: &RhoAlpha) -> f64 {
    let joint = r.a3 * s.a3;
    (3.0 + joint.re) / (r.trace() * s.trace())
}

/// Combines two embedded two-qubit states on the full four-qubit register:
/// returns the unnormalized `a b` state and the branch probability.
pub fn combine_states(left: &QuantumState, right: &QuantumState) -> Result<(QuantumState, f64)> {
    let left = left.permuted(&["a", "b"])?;
    let right = right.permuted(&["a", "b"])?;
    let right = relabel(&right, &["c", "d"])?;
    let joint = left.tensor(&right)?;
    let (r1, s) = joint.measure(
        &Observable::z(&["a", "c"]),
        MeasureMode::Postselect(Outcome::Plus),
    )?;
    let (r2, s) = s.measure(
        &Observable::z(&["b", "d"]),
        MeasureMode::Postselect(Outcome::Plus),
    )?;
    let s = s.apply_gates(&[GateSpec::cnot("a", "c"), GateSpec::cnot("b", "d")])?;
    Ok((s.discard(&["c", "d"])?, r1.probability * r2.probability))
}

fn relabel(state: &QuantumState, names: &[&str]) -> Result<QuantumState> {
    let roles: Vec<Role> = state.labels().iter().map(|l| l.role()).collect();
    let new: Vec<_> = names
        .iter()
        .zip(roles)
        .map(|(n, r)| crate::quantum::QubitLabel::new(*n, r))
        .collect();
    match state.amplitudes() {
        Some(v) => QuantumState::pure(new, v.to_vec()),
        None => QuantumState::mixed(new, state.density_matrix()),
    }
}

/// Exact combine through the four-qubit density-matrix simulation.
pub fn combine_exact_check(r: &RhoAlpha, s: &RhoAlpha) -> Result<RhoAlpha> {
    let (out, _) = combine_states(&r.to_state(), &s.to_state())?;
    Ok(RhoAlpha::from_state(&out)?.0)
}

pub enum CombineMode<'a> {
    Postselect,
    Sample(&'a mut dyn RngCore),
}

/// One combine step. Postselection always succeeds and accepts
/// quasi-states; sampling requires physical inputs.
pub fn combine(r: &RhoAlpha, s: &RhoAlpha, mode: CombineMode<'_>) -> Result<(bool, RhoAlpha)> {
    match mode {
        CombineMode::Postselect => Ok((true, r.times(s))),
        CombineMode::Sample(rng) => {
            r.check_physical()?;
            s.check_physical()?;
            let p = success_probability(r, s);
            let ok = rng.random::<f64>() < p;
            Ok((ok, r.times(s)))
        }
    }
}

/// `3 / (3 + a3^(2^n))`.
pub fn fidelity_after(a3: f64, n: u32) -> f64 {
    3.0 / (3.0 + power_of_two(Complex64::new(a3, 0.0), n).re)
}

/// Complex form of [`fidelity_after`]: the ratio is real only when
/// `a3^(2^n)` is.
pub fn fidelity_after_complex(a3: Complex64, n: u32) -> Complex64 {
    3.0 / (3.0 + power_of_two(a3, n))
}

fn power_of_two(mut z: Complex64, n: u32) -> Complex64 {
    for _ in 0..n {
        z = z * z;
    }
    z
}

/// Fidelity of a state with `|psi2>`.
pub fn fidelity_with_psi2(state: &QuantumState) -> Result<f64> {
    state.fidelity(&psi2_on("a", "b"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistillOutcome {
    pub result: RhoAlpha,
    pub level: u32,
    pub attempts: u64,
    pub ops_used: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeMode {
    /// Entry-wise algebra.
    Algebraic,
    /// Four-qubit density-matrix simulation at every node.
    Oracle,
}

fn level_of(len: usize) -> Result<u32> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "tree needs a power-of-two number of inputs, got {len}"
        )));
    }
    Ok(len.trailing_zeros())
}

/// Postselected tree over `2^N` inputs, combined pairwise level by level.
pub fn distill_tree(inputs: &[RhoAlpha], mode: TreeMode) -> Result<DistillOutcome> {
    let level = level_of(inputs.len())?;
    let mut layer = inputs.to_vec();
    let mut attempts = 0;
    while layer.len() > 1 {
        layer = layer
            .chunks(2)
            .map(|p| match mode {
                TreeMode::Algebraic => Ok(p[0].times(&p[1])),
                TreeMode::Oracle => combine_exact_check(&p[0], &p[1]),
            })
            .collect::<Result<_>>()?;
        attempts += layer.len() as u64;
    }
    Ok(DistillOutcome {
        result: layer[0],
        level,
        attempts,
        ops_used: inputs.len() as f64,
    })
}

/// State-level postselected tree, returning the unnormalized root state.
pub fn distill_tree_states(inputs: &[RhoAlpha]) -> Result<QuantumState> {
    level_of(inputs.len())?;
    let mut layer: Vec<QuantumState> = inputs.iter().map(|r| r.to_state()).collect();
    while layer.len() > 1 {
        layer = layer
            .chunks(2)
            .map(|p| combine_states(&p[0], &p[1]).map(|(s, _)| s))
            .collect::<Result<_>>()?;
    }
    Ok(layer.pop().expect("non-empty"))
}

struct Sampler<'a, F> {
    source: F,
    rng: &'a mut dyn RngCore,
    draws: u64,
    attempts: u64,
    ops: f64,
    combine_cost: f64,
}

impl<F: FnMut() -> Option<RhoAlpha>> Sampler<'_, F> {
    fn node(&mut self, level: u32) -> Result<RhoAlpha> {
        if level == 0 {
            self.draws += 1;
            self.ops += 1.0;
            return (self.source)().ok_or(Error::InputsExhausted(self.draws - 1));
        }
        loop {
            let l = self.node(level - 1)?;
            let r = self.node(level - 1)?;
            self.attempts += 1;
            let (ok, out) = combine(&l, &r, CombineMode::Sample(&mut *self.rng))?;
            if ok {
                self.ops += self.combine_cost;
                return Ok(out);
            }
        }
    }
}

/// Sampled tree of depth `level`. A failed combine discards both inputs and
/// rebuilds them from fresh draws. Each draw costs one op and each
/// successful combine costs `combine_cost` ops.
pub fn distill_tree_sampled<F>(
    level: u32,
    source: F,
    rng: &mut dyn RngCore,
    combine_cost: f64,
) -> Result<DistillOutcome>
where
    F: FnMut() -> Option<RhoAlpha>,
{
    let mut s = Sampler {
        source,
        rng,
        draws: 0,
        attempts: 0,
        ops: 0.0,
        combine_cost,
    };
    let result = s.node(level)?;
    Ok(DistillOutcome {
        result,
        level,
        attempts: s.attempts,
        ops_used: s.ops,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub eps: f64,
    pub eps_m: f64,
    pub p_floor: f64,
}

impl CostParams {
    pub fn new(eps: f64, eps_m: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < eps_m && eps_m < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < eps < eps_m < 1, got eps={eps}, eps_m={eps_m}"
            )));
        }
        Ok(Self {
            eps,
            eps_m,
            p_floor: 0.25,
        })
    }

    /// `log eps / log eps_m`: measurement repetitions per combine.
    pub fn ratio(&self) -> f64 {
        self.eps.ln() / self.eps_m.ln()
    }
}

/// Iterates `G(L) = (2 / P(L)) G(L - 1) + ratio` from `G(0) = 1`.
pub fn expected_ops(levels: u32, p_schedule: impl Fn(u32) -> f64, ratio: f64) -> f64 {
    (1..=levels).fold(1.0, |g, l| 2.0 / p_schedule(l) * g + ratio)
}

/// Closed form of [`expected_ops`] for constant `P`.
pub fn expected_ops_closed(levels: u32, p: f64, ratio: f64) -> f64 {
    let q = 2.0 / p;
    let qn = q.powi(levels as i32);
    if (q - 1.0).abs() < 1e-15 {
        return qn + f64::from(levels) * ratio;
    }
    qn + (qn - 1.0) / (q - 1.0) * ratio
}

/// Exact per-level success probabilities for a homogeneous tree.
pub fn success_schedule(alpha: &RhoAlpha, levels: u32) -> Vec<f64> {
    let mut a = *alpha;
    (0..levels)
        .map(|_| {
            let p = success_probability(&a, &a);
            a = a.times(&a);
            p
        })
        .collect()
}

/// Smallest odd repetition count of at least `log eps / log eps_m`.
pub fn measurement_majority_repeats(eps: f64, eps_m: f64) -> Result<u64> {
    if !(eps > 0.0 && eps_m > 0.0 && eps_m < 0.5 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < eps and 0 < eps_m < 1/2, got eps={eps}, eps_m={eps_m}"
        )));
    }
    let ratio = eps.ln() / eps_m.ln();
    if ratio <= 1.0 + 1e-9 {
        return Ok(1);
    }
    let r = (ratio - 1e-9).ceil() as u64;
    Ok(if r.is_multiple_of(2) { r + 1 } else { r })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelTrace {
    pub level: u32,
    pub alpha: RhoAlpha,
    pub fidelity: f64,
    /// Probability of the combine that produced this level.
    pub success_probability: Option<f64>,
}

/// Per-level trajectory of a homogeneous postselected tree.
pub fn trace_levels(alpha: &RhoAlpha, levels: u32) -> Vec<LevelTrace> {
    let mut a = *alpha;
    let mut out = vec![LevelTrace {
        level: 0,
        alpha: a,
        fidelity: 3.0 / a.trace(),
        success_probability: None,
    }];
    for level in 1..=levels {
        let p = success_probability(&a, &a);
        a = a.times(&a);
        out.push(LevelTrace {
            level,
            alpha: a,
            fidelity: 3.0 / a.trace(),
            success_probability: Some(p),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn squaring_example() {
        let r = RhoAlpha::new(c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0));
        let (_, out) = combine(&r, &r, CombineMode::Postselect).unwrap();
        assert_eq!(out, RhoAlpha::new(c(0.25, 0.0), c(0.25, 0.0), c(0.25, 0.0)));
        let exact = combine_exact_check(&r, &r).unwrap();
        assert!(exact.max_abs_diff(&out) < 1e-12);
    }

    #[test]
    fn oracle_examples() {
        let out = combine_exact_check(&RhoAlpha::diagonal(0.9), &RhoAlpha::diagonal(0.9)).unwrap();
        assert!(out.max_abs_diff(&RhoAlpha::diagonal(0.81)) < 1e-12);
        let r = RhoAlpha::new(c(0.0, 0.3), c(0.0, -0.3), c(-0.09, 0.0));
        let out = combine_exact_check(&r, &r).unwrap();
        let want = RhoAlpha::new(c(-0.09, 0.0), c(-0.09, 0.0), c(0.0081, 0.0));
        assert!(out.max_abs_diff(&want) < 1e-12);
        let psi = combine_exact_check(&RhoAlpha::psi2(), &RhoAlpha::psi2()).unwrap();
        assert!(psi.max_abs_diff(&RhoAlpha::psi2()) < 1e-15);
    }

    #[test]
    fn pure_eleven_is_fixed_point() {
        let e = QuantumState::basis(labels(&["a", "b"], Role::Ancilla), "11").unwrap();
        let (out, p) = combine_states(&e, &e).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(out.max_abs_diff(&e.to_mixed().unwrap()).unwrap() < 1e-15);
    }

    #[test]
    fn success_probability_closed_form_matches_oracle() {
        for a3 in [0.0, 0.3, 1.0, 2.5] {
            for b3 in [0.0, 0.7] {
                let (r, s) = (RhoAlpha::diagonal(a3), RhoAlpha::diagonal(b3));
                let (_, p) = combine_states(&r.to_state(), &s.to_state()).unwrap();
                assert!((p - success_probability(&r, &s)).abs() < 1e-13);
            }
        }
        assert!(
            (success_probability(&RhoAlpha::psi2(), &RhoAlpha::psi2()) - 1.0 / 3.0).abs() < 1e-15
        );
        assert!(
            (success_probability(&RhoAlpha::diagonal(1.0), &RhoAlpha::diagonal(1.0)) - 0.25).abs()
                < 1e-15
        );
    }

    #[test]
    fn readback_rejects_outside_span() {
        let s = QuantumState::basis(labels(&["a", "b"], Role::Ancilla), "01").unwrap();
        assert!(matches!(
            RhoAlpha::from_state(&s.to_mixed().unwrap()),
            Err(Error::OutsideSpan(_))
        ));
    }

    #[test]
    fn physicality() {
        assert!(RhoAlpha::coherent(0.4).is_physical());
        assert!(RhoAlpha::diagonal(0.4).is_physical());
        assert!(!RhoAlpha::diagonal(-0.1).is_physical());
        assert!(!RhoAlpha::new(c(0.0, 0.3), c(0.0, 0.3), c(-0.09, 0.0)).is_physical());
        assert!(RhoAlpha::coherent(0.4).to_state().is_physical());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = RhoAlpha::diagonal(-0.5);
        assert!(matches!(
            combine(&bad, &bad, CombineMode::Sample(&mut rng)),
            Err(Error::Unphysical(_))
        ));
    }

    #[test]
    fn fidelity_examples() {
        assert_eq!(fidelity_after(0.0, 5), 1.0);
        assert!((fidelity_after(1.0, 0) - 0.75).abs() < 1e-15);
        let want = 3.0 / (3.0 + 0.5f64.powi(8));
        assert!((fidelity_after(0.5, 3) - want).abs() < 1e-15);
        let root = distill_tree_states(&[RhoAlpha::diagonal(0.5); 8]).unwrap();
        assert!((fidelity_with_psi2(&root).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn tree_examples() {
        let out = distill_tree(&[RhoAlpha::diagonal(0.9); 4], TreeMode::Algebraic).unwrap();
        assert!((out.result.a3.re - 0.9f64.powi(4)).abs() < 1e-15);
        let inputs = [0.9, 0.8, 0.7, 0.6].map(RhoAlpha::diagonal);
        let alg = distill_tree(&inputs, TreeMode::Algebraic).unwrap();
        let ora = distill_tree(&inputs, TreeMode::Oracle).unwrap();
        assert!((alg.result.a3.re - 0.3024).abs() < 1e-12);
        assert!(alg.result.max_abs_diff(&ora.result) < 1e-12);
        let single = distill_tree(&[RhoAlpha::diagonal(0.3)], TreeMode::Algebraic).unwrap();
        assert_eq!(single.level, 0);
        assert_eq!(single.result, RhoAlpha::diagonal(0.3));
        assert!(distill_tree(&inputs[..3], TreeMode::Algebraic).is_err());
    }

    #[test]
    fn sampled_tree_exhausts_bounded_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pool = vec![RhoAlpha::psi2(); 3];
        let err = distill_tree_sampled(2, || pool.pop(), &mut rng, 1.0).unwrap_err();
        assert_eq!(err, Error::InputsExhausted(3));
    }

    #[test]
    fn sampled_tree_counts_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = distill_tree_sampled(3, || Some(RhoAlpha::diagonal(0.5)), &mut rng, 2.0).unwrap();
        assert!((out.result.a3.re - 0.5f64.powi(8)).abs() < 1e-15);
        assert!(out.attempts >= 7);
        // every attempt consumed two subtrees; 7 successes each add 2 ops
        assert!(out.ops_used >= 8.0 + 14.0);
    }

    #[test]
    fn cost_examples() {
        assert_eq!(expected_ops(0, |_| 0.25, 1.0), 1.0);
        let g: Vec<f64> = (1..=3)
            .map(|l| expected_ops(l, |_| 1.0 / 3.0, 2.0))
            .collect();
        assert_eq!(g, vec![8.0, 50.0, 302.0]);
        assert!((expected_ops_closed(3, 1.0 / 3.0, 2.0) - 302.0).abs() < 1e-9);
        let r = expected_ops(20, |_| 0.25, 1.0) / expected_ops(19, |_| 0.25, 1.0);
        assert!((r - 8.0).abs() < 1e-12);
    }

    #[test]
    fn majority_examples() {
        assert_eq!(measurement_majority_repeats(1e-9, 1e-3).unwrap(), 3);
        assert_eq!(measurement_majority_repeats(1e-8, 1e-2).unwrap(), 5);
        assert_eq!(measurement_majority_repeats(0.01, 0.01).unwrap(), 1);
        // a shade below eps_m already pushes the ratio past 1
        assert_eq!(measurement_majority_repeats(0.0099, 0.01).unwrap(), 3);
        assert!(measurement_majority_repeats(1e-3, 0.6).is_err());
    }

    #[test]
    fn trace_has_each_level() {
        let t = trace_levels(&RhoAlpha::diagonal(0.5), 3);
        assert_eq!(t.len(), 4);
        assert!((t[3].fidelity - fidelity_after(0.5, 3)).abs() < 1e-15);
        assert!(serde_json::to_string(&t).unwrap().contains("\"level\":3"));
    }
}
