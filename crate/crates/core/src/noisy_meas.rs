//! Noisy transversal measurement of C-NOT and C-PHASE with a cat-state
//! ancilla, and raw `rho(alpha)` preparation.
//!
//! Two modes are provided. The exact mode simulates physical blocks
//! `a1..an`, `b1..bn` and the cat `c1..cn` densely (small `n`). The
//! effective mode treats `a`, `b` as single logical qubits and keeps only
//! what the readout depends on: the parity of cat bit flips (decoherent
//! errors) or the even/odd amplitudes of the cat (unitary errors).

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::Serialize;

use crate::distill::RhoAlpha;
use crate::error::{Error, Result};
use crate::error_models::{cat_amplitudes_recursion, ErrorModel, UnitaryErrorSet};
use crate::quantum::{
    labels, matmul, GateSpec, MeasureMode, Observable, Outcome, Pauli, QuantumState, QubitLabel,
    Role, MAX_PURE_QUBITS,
};
use crate::rng::trial_rng;

/// Default number of preparation attempts before giving up on a reported
/// `+1`.
pub const DEFAULT_RAW_RETRIES: u64 = 10_000;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Per-pair eigenstates of `CNOT_{a_i b_i}`: `1 = |00>`, `2 = |01>`,
/// `3 = |10> + |11>`, `4 = |10> - |11>` (eigenvalue -1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EigenString(Vec<u8>);

impl FromStr for EigenString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|ch| match ch {
                '1'..='4' => Ok(ch as u8 - b'0'),
                other => Err(Error::InvalidSymbol(other)),
            })
            .collect::<Result<Vec<_>>>()
            .map(EigenString)
    }
}

impl fmt::Display for EigenString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl EigenString {
    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parity of the number of `4`s.
    pub fn weight(&self) -> u8 {
        (self.0.iter().filter(|&&s| s == 4).count() % 2) as u8
    }

    /// All `4^n` strings in lexicographic order.
    pub fn all(n: usize) -> Vec<EigenString> {
        let mut out = vec![EigenString(Vec::new())];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|s| {
                    (1..=4).map(move |k| {
                        let mut v = s.0.clone();
                        v.push(k);
                        EigenString(v)
                    })
                })
                .collect();
        }
        out
    }
}

pub fn weight(x: &str) -> Result<u8> {
    Ok(x.parse::<EigenString>()?.weight())
}

fn pair_vector(symbol: u8) -> [Complex64; 4] {
    let r = |x: f64| Complex64::new(x, 0.0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match symbol {
        1 => [r(1.0), C0, C0, C0],
        2 => [C0, r(1.0), C0, C0],
        3 => [C0, C0, r(h), r(h)],
        _ => [C0, C0, r(h), r(-h)],
    }
}

pub fn block_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn as_strs(v: &[String]) -> Vec<&str> {
    v.iter().map(|s| s.as_str()).collect()
}

/// `|x>` on `a1 b1 a2 b2 ...`.
pub fn eigenstring_state(x: &EigenString) -> Result<QuantumState> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty eigenstring".into()));
    }
    let mut names = Vec::with_capacity(2 * n);
    for i in 1..=n {
        names.push(format!("a{i}"));
        names.push(format!("b{i}"));
    }
    let mut state: Option<QuantumState> = None;
    for (i, &s) in x.symbols().iter().enumerate() {
        let pair = QuantumState::pure(
            labels(&[&names[2 * i], &names[2 * i + 1]], Role::LogicalData),
            pair_vector(s).to_vec(),
        )?;
        state = Some(match state {
            None => pair,
            Some(acc) => acc.tensor(&pair)?,
        });
    }
    Ok(state.expect("n >= 1"))
}

#[derive(Clone, Debug)]
pub enum CatBlock {
    /// Dense state on `c1..cn`.
    Exact(QuantumState),
    /// Only the parity is tracked.
    Effective { n: usize, odd: bool },
}

impl CatBlock {
    pub fn n(&self) -> usize {
        match self {
            CatBlock::Exact(s) => s.num_qubits(),
            CatBlock::Effective { n, .. } => *n,
        }
    }
}

/// `(prod_i H_{c_i}) (|0..0> + |1..1>)`, normalized.
pub fn prepare_even_cat(n: usize, exact: bool) -> Result<CatBlock> {
    if n == 0 {
        return Err(Error::InvalidArgument("cat block needs n >= 1".into()));
    }
    if !exact {
        return Ok(CatBlock::Effective { n, odd: false });
    }
    if n > MAX_PURE_QUBITS {
        return Err(Error::CapExceeded {
            kind: "pure",
            qubits: n,
            cap: MAX_PURE_QUBITS,
        });
    }
    let names = block_names("c", n);
    let one = Complex64::new(1.0, 0.0);
    let zeros = "0".repeat(n);
    let ones = "1".repeat(n);
    let ghz = QuantumState::from_terms(
        labels(&as_strs(&names), Role::CatBit),
        &[(&zeros, one), (&ones, one)],
    )?;
    let hs: Vec<GateSpec> = names.iter().map(|c| GateSpec::h(c)).collect();
    Ok(CatBlock::Exact(ghz.apply_gates(&hs)?.normalized()?))
}

fn exact_cat(n: usize) -> Result<QuantumState> {
    match prepare_even_cat(n, true)? {
        CatBlock::Exact(s) => Ok(s),
        CatBlock::Effective { .. } => unreachable!("exact requested"),
    }
}

/// `|odd> = X_{c1} |even>`.
pub fn odd_cat(n: usize) -> Result<QuantumState> {
    exact_cat(n)?.apply_gate(&GateSpec::x("c1"))
}

fn u_gates(n: usize) -> Vec<GateSpec> {
    (1..=n)
        .map(|i| GateSpec::u_fig2(&format!("a{i}"), &format!("b{i}"), &format!("c{i}")))
        .collect()
}

/// Applies `U_{a_i b_i c_i}` for every `i` to `ab (x) cat`.
pub fn bitwise_u(ab: &QuantumState, cat: &QuantumState) -> Result<QuantumState> {
    let n = cat.num_qubits();
    if ab.num_qubits() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: ab.num_qubits(),
        });
    }
    ab.tensor(cat)?.apply_gates(&u_gates(n))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Eq5Report {
    pub n: usize,
    pub strings: usize,
    pub passed: usize,
    pub max_error: f64,
}

/// Checks `U |x>|even> = |x>|even>` for `w(x) = 0` and `|x>|odd>` for
/// `w(x) = 1` over every eigenstring of length `n`.
pub fn verify_eq5(n: usize) -> Result<Eq5Report> {
    let even = exact_cat(n)?;
    let odd = odd_cat(n)?;
    let mut passed = 0;
    let mut max_error: f64 = 0.0;
    let strings = EigenString::all(n);
    for x in &strings {
        let ab = eigenstring_state(x)?;
        let out = bitwise_u(&ab, &even)?;
        let want = ab.tensor(if x.weight() == 0 { &even } else { &odd })?;
        let err = out.max_abs_diff(&want)?;
        max_error = max_error.max(err);
        if err <= 1e-12 {
            passed += 1;
        }
    }
    Ok(Eq5Report {
        n,
        strings: strings.len(),
        passed,
        max_error,
    })
}

#[derive(Clone, Debug)]
pub struct ExactMeasurement {
    pub reported: Outcome,
    pub probability: f64,
    /// Post-measurement state of the `a`, `b` blocks.
    pub state: QuantumState,
}

fn exact_readout_state(
    ab: &QuantumState,
    n: usize,
    cat_errors: &[GateSpec],
    readout_errors: &[GateSpec],
) -> Result<QuantumState> {
    let cat = exact_cat(n)?.apply_gates(cat_errors)?;
    bitwise_u(ab, &cat)?.apply_gates(readout_errors)
}

/// Dense transversal measurement of `CNOT_ab = prod_i CNOT_{a_i b_i}`.
///
/// `cat_errors` act on the cat before `U`, `readout_errors` after it. The
/// reported outcome is `prod_i Z_{c_i}`.
pub fn measure_cnot_exact(
    ab: &QuantumState,
    n: usize,
    cat_errors: &[GateSpec],
    readout_errors: &[GateSpec],
    mode: MeasureMode<'_>,
) -> Result<ExactMeasurement> {
    let joint = exact_readout_state(ab, n, cat_errors, readout_errors)?;
    let cs = block_names("c", n);
    let (rec, post) = joint.measure(&Observable::z(&as_strs(&cs)), mode)?;
    Ok(ExactMeasurement {
        reported: rec.outcome,
        probability: rec.probability,
        state: post.discard(&as_strs(&cs))?,
    })
}

/// Probability of reporting `+1` in the exact mode.
pub fn reported_plus_probability(
    ab: &QuantumState,
    n: usize,
    cat_errors: &[GateSpec],
    readout_errors: &[GateSpec],
) -> Result<f64> {
    let joint = exact_readout_state(ab, n, cat_errors, readout_errors)?;
    let cs = block_names("c", n);
    joint.branch_probability(&Observable::z(&as_strs(&cs)), Outcome::Plus)
}

/// `+1` or `-1` if `state` is an eigenstate of the transversal C-NOT on
/// blocks of size `n`, otherwise `None`.
pub fn transversal_cnot_eigenvalue(state: &QuantumState, n: usize) -> Result<Option<f64>> {
    let gates: Vec<GateSpec> = (1..=n)
        .map(|i| GateSpec::cnot(&format!("a{i}"), &format!("b{i}")))
        .collect();
    let mapped = state.clone().apply_gates(&gates)?;
    for sign in [1.0, -1.0] {
        let mut diff = mapped.clone();
        diff.add_scaled(state, -sign);
        let scale = state.trace().abs().max(1e-300);
        let err = match diff.amplitudes() {
            Some(v) => v.iter().map(|x| x.norm_sqr()).sum::<f64>(),
            None => diff
                .density_matrix()
                .iter()
                .map(|x| x.norm())
                .fold(0.0, f64::max),
        };
        if err <= 1e-20 * scale.max(1.0) || err.sqrt() <= 1e-10 * scale {
            return Ok(Some(sign));
        }
    }
    Ok(None)
}

/// Qubits on which `U P_q U^dagger` acts non-trivially, where `U` is the
/// bitwise measurement circuit on blocks of size `n`.
pub fn propagated_support(n: usize, qubit: &str, pauli: Pauli) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for p in ["a", "b", "c"] {
        names.extend(block_names(p, n));
    }
    let labs: Vec<QubitLabel> = labels(&as_strs(&names), Role::LogicalData);
    let d = 1usize << labs.len();
    let single = |q: &str, p: Pauli| -> Result<Vec<Complex64>> {
        let g = match p {
            Pauli::X => GateSpec::x(q),
            Pauli::Z => GateSpec::z(q),
            Pauli::Y => GateSpec::new(crate::quantum::GateKind::Y, &[q])?,
        };
        QuantumState::unitary_of(&labs, &[g])
    };
    let u = QuantumState::unitary_of(&labs, &u_gates(n))?;
    let mut u_dag = vec![C0; d * d];
    for i in 0..d {
        for j in 0..d {
            u_dag[j * d + i] = u[i * d + j].conj();
        }
    }
    let op = matmul(&u, &matmul(&single(qubit, pauli)?, &u_dag, d), d);
    let mut support = Vec::new();
    for q in &names {
        let touches = [Pauli::X, Pauli::Z].iter().any(|&p| {
            let m = single(q, p).expect("valid label");
            let ab = matmul(&op, &m, d);
            let ba = matmul(&m, &op, d);
            ab.iter().zip(&ba).any(|(x, y)| (x - y).norm() > 1e-12)
        });
        if touches {
            support.push(q.clone());
        }
    }
    Ok(support)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CatAmplitudes {
    pub even: Complex64,
    pub odd: Complex64,
    /// Weight outside `span{|even>, |odd>}`.
    pub leakage: f64,
}

/// Dense `prod_i E_i |even>` projected onto `|even>`, `|odd>`.
pub fn cat_error_amplitudes(errs: &UnitaryErrorSet) -> Result<CatAmplitudes> {
    let n = errs.n();
    let even = exact_cat(n)?;
    let odd = odd_cat(n)?;
    let gates: Vec<GateSpec> = errs
        .errors
        .iter()
        .enumerate()
        .map(|(i, e)| GateSpec::custom(&format!("c{}", i + 1), e.matrix()))
        .collect();
    let out = even.clone().apply_gates(&gates)?;
    let inner = |a: &QuantumState, b: &QuantumState| -> Complex64 {
        let (x, y) = (a.amplitudes().expect("pure"), b.amplitudes().expect("pure"));
        x.iter().zip(y).map(|(p, q)| p.conj() * q).sum()
    };
    let e = inner(&even, &out);
    let o = inner(&odd, &out);
    Ok(CatAmplitudes {
        even: e,
        odd: o,
        leakage: (out.trace() - e.norm_sqr() - o.norm_sqr()).max(0.0),
    })
}

/// Reported-`+1` probabilities for a `+1` eigenstring input with a clean
/// cat, a `Z` error on every cat qubit, and one `X` error on `c1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CatErrorDemo {
    pub n: usize,
    pub input: String,
    pub clean: f64,
    pub phase_errors: f64,
    pub single_flip: f64,
}

pub fn cat_error_demo(n: usize) -> Result<CatErrorDemo> {
    let x: EigenString = "13".repeat(n).chars().take(n).collect::<String>().parse()?;
    let ab = eigenstring_state(&x)?;
    let zs: Vec<GateSpec> = block_names("c", n).iter().map(|c| GateSpec::z(c)).collect();
    Ok(CatErrorDemo {
        n,
        input: x.to_string(),
        clean: reported_plus_probability(&ab, n, &[], &[])?,
        phase_errors: reported_plus_probability(&ab, n, &zs, &[])?,
        single_flip: reported_plus_probability(&ab, n, &[], &[GateSpec::x("c1")])?,
    })
}

/// Result of one noisy measurement on the logical pair `a b`.
#[derive(Clone, Debug, Serialize)]
pub struct RawPrepResult {
    #[serde(skip)]
    pub logical_state: QuantumState,
    pub reported: Outcome,
    /// The eigenvalue the pair was projected onto, when it is definite.
    pub true_eigenvalue: Option<Outcome>,
    /// Probability of the reported outcome.
    pub probability: f64,
    /// `None` when the state has no `|psi2>` weight (pure `|11>`).
    pub alpha: Option<RhoAlpha>,
    pub attempts: u64,
}

pub enum NoisyMode<'a> {
    Sample(&'a mut dyn RngCore),
    /// Keep the given reported outcome, averaging over hidden errors.
    Postselect(Outcome),
}

fn combine_pure(
    x: &QuantumState,
    cx: Complex64,
    y: &QuantumState,
    cy: Complex64,
) -> Result<Vec<Complex64>> {
    let (u, v) = (x.amplitudes().expect("pure"), y.amplitudes().expect("pure"));
    Ok(u.iter().zip(v).map(|(a, b)| cx * a + cy * b).collect())
}

fn alpha_of(state: &QuantumState) -> Option<RhoAlpha> {
    RhoAlpha::from_state(state).ok().map(|(a, _)| a)
}

fn noisy_measure(
    state: &QuantumState,
    obs: &Observable,
    model: &ErrorModel,
    mode: NoisyMode<'_>,
) -> Result<RawPrepResult> {
    let tr = state.trace();
    match model {
        ErrorModel::Decoherent(ch) => match mode {
            NoisyMode::Sample(rng) => {
                let (rec, post) = state.measure(obs, MeasureMode::Sample(&mut *rng))?;
                let flipped = ch.sample_flip_parity(&mut *rng);
                let reported = if flipped {
                    rec.outcome.flipped()
                } else {
                    rec.outcome
                };
                let bias = crate::error_models::parity_bias(ch);
                let p_keep = (1.0 + bias) / 2.0;
                let p_true = state.branch_probability(obs, reported)?;
                let probability = p_keep * p_true + (1.0 - p_keep) * (1.0 - p_true);
                Ok(RawPrepResult {
                    alpha: alpha_of(&post),
                    logical_state: post,
                    reported,
                    true_eigenvalue: Some(rec.outcome),
                    probability,
                    attempts: 1,
                })
            }
            NoisyMode::Postselect(reported) => {
                let bias = crate::error_models::parity_bias(ch);
                let (p_even, p_odd) = ((1.0 + bias) / 2.0, (1.0 - bias) / 2.0);
                let same = state.to_mixed()?.project(obs, reported)?;
                let other = state.to_mixed()?.project(obs, reported.flipped())?;
                let mut out = same.scaled(p_even);
                out.add_scaled(&other.scaled(p_odd), 1.0);
                let probability = out.trace() / tr;
                if probability < crate::quantum::MIN_BRANCH_PROBABILITY {
                    return Err(Error::ImpossibleBranch {
                        outcome: reported.sign(),
                        probability,
                    });
                }
                Ok(RawPrepResult {
                    alpha: alpha_of(&out),
                    logical_state: out,
                    reported,
                    true_eigenvalue: None,
                    probability,
                    attempts: 1,
                })
            }
        },
        ErrorModel::Unitary(errs) => {
            if !state.is_pure() {
                return Err(Error::InvalidArgument(
                    "unitary cat errors need a pure input".into(),
                ));
            }
            let (e, o) = cat_amplitudes_recursion(errs)?;
            let plus = state.project(obs, Outcome::Plus)?;
            let minus = state.project(obs, Outcome::Minus)?;
            let branch = |r: Outcome| -> Result<QuantumState> {
                let amps = match r {
                    Outcome::Plus => combine_pure(&plus, e, &minus, o)?,
                    Outcome::Minus => combine_pure(&minus, e, &plus, o)?,
                };
                QuantumState::pure(state.labels().to_vec(), amps)
            };
            let norm = |r: Outcome| -> f64 {
                let amps = match r {
                    Outcome::Plus => combine_pure(&plus, e, &minus, o),
                    Outcome::Minus => combine_pure(&minus, e, &plus, o),
                };
                amps.map(|v| v.iter().map(|x| x.norm_sqr()).sum::<f64>())
                    .unwrap_or(0.0)
                    / tr
            };
            let (reported, scale) = match mode {
                NoisyMode::Sample(rng) => {
                    let r = if rng.random::<f64>() < norm(Outcome::Plus) {
                        Outcome::Plus
                    } else {
                        Outcome::Minus
                    };
                    (r, true)
                }
                NoisyMode::Postselect(r) => (r, false),
            };
            let probability = norm(reported);
            if probability < crate::quantum::MIN_BRANCH_PROBABILITY {
                return Err(Error::ImpossibleBranch {
                    outcome: reported.sign(),
                    probability,
                });
            }
            let mut post = branch(reported)?;
            if scale {
                post = post.scaled(1.0 / probability);
            }
            // definite only when one of the two components vanishes
            let true_eigenvalue = if o.norm() < 1e-15 {
                Some(reported)
            } else if e.norm() < 1e-15 {
                Some(reported.flipped())
            } else {
                None
            };
            Ok(RawPrepResult {
                alpha: alpha_of(&post),
                logical_state: post,
                reported,
                true_eigenvalue,
                probability,
                attempts: 1,
            })
        }
    }
}

fn check_pair(state: &QuantumState) -> Result<QuantumState> {
    state.permuted(&["a", "b"])
}

/// Noisy transversal measurement of `CNOT_ab` on logical qubits `a`, `b`.
/// The reported outcome is the true eigenvalue flipped by the parity of
/// cat bit flips; phase errors on the cat do not enter.
pub fn measure_cnot_noisy(
    state: &QuantumState,
    model: &ErrorModel,
    mode: NoisyMode<'_>,
) -> Result<RawPrepResult> {
    noisy_measure(
        &check_pair(state)?,
        &Observable::cnot("a", "b"),
        model,
        mode,
    )
}

/// Noisy `CPHASE_ab`: `H_b`, noisy `CNOT_ab`, `H_b`.
pub fn measure_cphase_noisy(
    state: &QuantumState,
    model: &ErrorModel,
    mode: NoisyMode<'_>,
) -> Result<RawPrepResult> {
    let s = check_pair(state)?.apply_gate(&GateSpec::h("b"))?;
    let mut r = noisy_measure(&s, &Observable::cnot("a", "b"), model, mode)?;
    r.logical_state = r.logical_state.apply_gate(&GateSpec::h("b"))?;
    r.alpha = alpha_of(&r.logical_state);
    Ok(r)
}

/// `(|0> + |1>)(|0> + |1>) / 2` on `a b`.
pub fn plus_plus() -> QuantumState {
    let h = Complex64::new(0.5, 0.0);
    QuantumState::pure(labels(&["a", "b"], Role::LogicalData), vec![h; 4]).expect("4 amplitudes")
}

/// Raw state preparation: noisy `CPHASE_ab` on `|+>|+>`, kept when `+1` is
/// reported. Sampling retries up to `max_attempts` times.
pub fn prepare_rho_raw(
    model: &ErrorModel,
    mode: NoisyMode<'_>,
    max_attempts: u64,
) -> Result<RawPrepResult> {
    match mode {
        NoisyMode::Postselect(_) => {
            measure_cphase_noisy(&plus_plus(), model, NoisyMode::Postselect(Outcome::Plus))
        }
        NoisyMode::Sample(rng) => {
            for attempt in 1..=max_attempts {
                let mut r =
                    measure_cphase_noisy(&plus_plus(), model, NoisyMode::Sample(&mut *rng))?;
                if r.reported == Outcome::Plus {
                    r.attempts = attempt;
                    return Ok(r);
                }
            }
            Err(Error::RetryLimit(max_attempts))
        }
    }
}

/// One CSV row per sampled raw preparation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: u64,
    pub n: usize,
    pub model: String,
    pub reported: i8,
    #[serde(rename = "true")]
    pub true_eigenvalue: Option<i8>,
    /// Running estimate of `alpha3` over trials `0..=trial`.
    pub alpha3_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Alpha3Estimate {
    pub trials: u64,
    pub psi2: u64,
    pub eleven: u64,
    pub attempts: u64,
    /// `3 n_11 / n_psi2`.
    pub estimate: f64,
    pub stderr: f64,
}

/// `3 n11 / npsi2` with a delta-method standard error.
pub fn alpha3_from_counts(psi2: u64, eleven: u64) -> (f64, f64) {
    let total = (psi2 + eleven) as f64;
    if psi2 == 0 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let f = eleven as f64 / total;
    let est = 3.0 * f / (1.0 - f);
    let se = 3.0 / (1.0 - f).powi(2) * (f * (1.0 - f) / total).sqrt();
    (est, se)
}

/// Samples `trials` raw preparations in parallel, one stream per trial, and
/// estimates `alpha3` from how often `|11>` was delivered instead of
/// `|psi2>`. Decoherent models only.
pub fn estimate_alpha3(
    model: &ErrorModel,
    trials: u64,
    seed: u64,
    max_attempts: u64,
) -> Result<(Alpha3Estimate, Vec<TrialRow>)> {
    if !matches!(model, ErrorModel::Decoherent(_)) {
        return Err(Error::InvalidArgument(
            "alpha3 counting needs a decoherent model".into(),
        ));
    }
    let results: Vec<RawPrepResult> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            prepare_rho_raw(model, NoisyMode::Sample(&mut rng), max_attempts)
        })
        .collect::<Result<_>>()?;
    let (mut psi2, mut eleven, mut attempts) = (0u64, 0u64, 0u64);
    let mut rows = Vec::with_capacity(results.len());
    for (t, r) in results.iter().enumerate() {
        attempts += r.attempts;
        // |11> is the only raw outcome in the -1 eigenspace
        if r.true_eigenvalue == Some(Outcome::Minus) {
            eleven += 1;
        } else {
            psi2 += 1;
        }
        rows.push(TrialRow {
            trial: t as u64,
            n: model.n(),
            model: model.name().to_string(),
            reported: r.reported.sign(),
            true_eigenvalue: r.true_eigenvalue.map(|o| o.sign()),
            alpha3_estimate: alpha3_from_counts(psi2, eleven).0,
        });
    }
    let (estimate, stderr) = alpha3_from_counts(psi2, eleven);
    Ok((
        Alpha3Estimate {
            trials,
            psi2,
            eleven,
            attempts,
            estimate,
            stderr,
        },
        rows,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_models::PauliChannel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight("1234").unwrap(), 1);
        assert_eq!(weight("44").unwrap(), 0);
        assert_eq!(weight("15"), Err(Error::InvalidSymbol('5')));
    }

    #[test]
    fn eigenstrings_have_weight_eigenvalue() {
        for x in EigenString::all(2) {
            let s = eigenstring_state(&x).unwrap();
            let want = if x.weight() == 0 { 1.0 } else { -1.0 };
            assert_eq!(
                transversal_cnot_eigenvalue(&s, 2).unwrap(),
                Some(want),
                "{x}"
            );
        }
    }

    #[test]
    fn cat_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c1 = exact_cat(1).unwrap();
        assert!((c1.amplitudes().unwrap()[0] - r(1.0)).norm() < 1e-15);
        let c2 = exact_cat(2).unwrap();
        let want = [h, 0.0, 0.0, h];
        for (a, w) in c2.amplitudes().unwrap().iter().zip(want) {
            assert!((a - r(w)).norm() < 1e-15);
        }
        let c3 = exact_cat(3).unwrap();
        for (k, a) in c3.amplitudes().unwrap().iter().enumerate() {
            let w = if (k as u32).count_ones().is_multiple_of(2) {
                0.5
            } else {
                0.0
            };
            assert!((a - r(w)).norm() < 1e-15);
        }
        assert!(prepare_even_cat(20, true).is_err());
        assert!(matches!(
            prepare_even_cat(1000, false).unwrap(),
            CatBlock::Effective {
                n: 1000,
                odd: false
            }
        ));
    }

    #[test]
    fn u_single_pair_examples() {
        let cat0 = QuantumState::basis(labels(&["c1"], Role::CatBit), "0").unwrap();
        let ab = eigenstring_state(&"1".parse().unwrap()).unwrap();
        let out = bitwise_u(&ab, &cat0).unwrap();
        assert!((out.population("000").unwrap() - 1.0).abs() < 1e-12);
        let minus = eigenstring_state(&"4".parse().unwrap()).unwrap();
        let out = bitwise_u(&minus, &cat0).unwrap();
        let want = minus
            .tensor(&QuantumState::basis(labels(&["c1"], Role::CatBit), "1").unwrap())
            .unwrap();
        assert!(out.max_abs_diff(&want).unwrap() < 1e-12);
        let two = eigenstring_state(&"44".parse().unwrap()).unwrap();
        let out = bitwise_u(&two, &exact_cat(2).unwrap()).unwrap();
        let p = out
            .branch_probability(&Observable::z(&["c1", "c2"]), Outcome::Plus)
            .unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eq5_small() {
        for n in 1..=2 {
            let rep = verify_eq5(n).unwrap();
            assert_eq!(rep.passed, rep.strings);
        }
    }

    #[test]
    fn cat_errors_exact() {
        let d = cat_error_demo(3).unwrap();
        assert_eq!(d.input, "131");
        assert!((d.clean - 1.0).abs() < 1e-12);
        assert!((d.phase_errors - 1.0).abs() < 1e-12);
        assert!(d.single_flip.abs() < 1e-12);
    }

    #[test]
    fn support_stays_in_one_triple() {
        for q in ["a1", "b2", "c1", "c2"] {
            for p in [Pauli::X, Pauli::Z] {
                let sup = propagated_support(2, q, p).unwrap();
                let idx = &q[1..];
                assert!(!sup.is_empty());
                assert!(sup.iter().all(|s| &s[1..] == idx), "{q} {p:?} -> {sup:?}");
            }
        }
    }

    #[test]
    fn zero_error_cnot_on_psi2_like_eigenstate() {
        let model = ErrorModel::none(5);
        let s = QuantumState::from_terms(
            labels(&["a", "b"], Role::LogicalData),
            &[("00", r(1.0)), ("01", r(1.0))],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = measure_cnot_noisy(&s, &model, NoisyMode::Sample(&mut rng)).unwrap();
        assert_eq!(out.reported, Outcome::Plus);
        assert_eq!(out.true_eigenvalue, Some(Outcome::Plus));
        assert!((out.probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cphase_zero_errors() {
        let model = ErrorModel::none(4);
        let plus = measure_cphase_noisy(&plus_plus(), &model, NoisyMode::Postselect(Outcome::Plus))
            .unwrap();
        let a = plus.alpha.unwrap();
        assert!(a.max_abs_diff(&RhoAlpha::psi2()) < 1e-12);
        assert!((plus.probability - 0.75).abs() < 1e-12);
        let minus =
            measure_cphase_noisy(&plus_plus(), &model, NoisyMode::Postselect(Outcome::Minus))
                .unwrap();
        assert!(
            (minus.logical_state.population("11").unwrap() / minus.logical_state.trace() - 1.0)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn cphase_decoherent_alpha3() {
        let ch = PauliChannel::uniform(6, 0.03).unwrap();
        let bias = crate::error_models::parity_bias(&ch);
        let out = prepare_rho_raw(
            &ErrorModel::Decoherent(ch),
            NoisyMode::Postselect(Outcome::Plus),
            1,
        )
        .unwrap();
        let a = out.alpha.unwrap();
        assert!((a.a3.re - (1.0 - bias) / (1.0 + bias)).abs() < 1e-12);
        assert!(a.a1.norm() < 1e-12);
    }

    #[test]
    fn cphase_unitary_gives_coherent_state() {
        let errs = UnitaryErrorSet::from_ratios(&[0.05, 0.02, -0.01]);
        let t = crate::error_models::sigma_c(&errs).unwrap().tan();
        let out = prepare_rho_raw(
            &ErrorModel::Unitary(errs),
            NoisyMode::Postselect(Outcome::Plus),
            1,
        )
        .unwrap();
        assert!(out.alpha.unwrap().max_abs_diff(&RhoAlpha::coherent(t)) < 1e-12);
    }

    #[test]
    fn sampling_retries_for_plus() {
        let ch = PauliChannel::uniform(3, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = prepare_rho_raw(
            &ErrorModel::Decoherent(ch.clone()),
            NoisyMode::Sample(&mut rng),
            100,
        )
        .unwrap();
        assert_eq!(out.reported, Outcome::Plus);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let never = ErrorModel::Decoherent(PauliChannel::uniform(1, 1.0).unwrap());
        // |++> has CPHASE +1 with prob 3/4; every report is flipped
        let mut hits = 0;
        for _ in 0..50 {
            if let Ok(r) = prepare_rho_raw(&never, NoisyMode::Sample(&mut rng), 1) {
                assert_eq!(r.true_eigenvalue, Some(Outcome::Minus));
                hits += 1;
            }
        }
        assert!(hits > 0 && hits < 50);
        let _ = ch;
    }

    #[test]
    fn counts_estimator() {
        let (e, _) = alpha3_from_counts(300, 100);
        assert!((e - 1.0).abs() < 1e-15);
        assert!(alpha3_from_counts(0, 3).0.is_infinite());
    }
}
