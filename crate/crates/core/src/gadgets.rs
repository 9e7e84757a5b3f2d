//! Measurement-based Toffoli gadget and ancilla synthesis.
//!
//! The gadget consumes three ancillas `a b c` in `|psi3> = |000> + |001> +
//! |010> + |100>` and acts on data qubits `A B C`:
//!
//! 1. C-NOT `A -> a`, `B -> b`.
//! 2. Measure `Z_a Z_b` and `Z_b Z_c`, then flip the odd bit out.
//! 3. C-NOT `c -> C` and apply the branch correction on `A B C`.
//! 4. C-NOT `a -> b`, `a -> c`, measure `X_a`, apply the phase fix.
//! 5. Discard `a b c`.
//!
//! The corrections are not hard-coded: [`derive_correction_table`] finds
//! them by searching a small gate vocabulary until every branch reproduces
//! the ideal Toffoli.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{
    labels, GateSpec, MeasureMode, MeasurementRecord, Observable, Outcome, QuantumState, Role,
};
use crate::rng::trial_rng;

pub const DATA: [&str; 3] = ["A", "B", "C"];
pub const ANCILLA: [&str; 3] = ["a", "b", "c"];

/// Default budget of `Z_b Z_c` attempts in [`psi3_from_psi2`].
pub const DEFAULT_PSI3_RETRIES: u64 = 1000;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `|00> + |01> + |10>` on the given qubits (norm squared 3).
pub fn psi2_on(a: &str, b: &str) -> QuantumState {
    QuantumState::from_terms(
        labels(&[a, b], Role::Ancilla),
        &[("00", ONE), ("01", ONE), ("10", ONE)],
    )
    .expect("two-qubit state")
}

/// `|000> + |001> + |010> + |100>` on the given qubits.
pub fn psi3_on(a: &str, b: &str, c: &str) -> QuantumState {
    QuantumState::from_terms(
        labels(&[a, b, c], Role::Ancilla),
        &[("000", ONE), ("001", ONE), ("010", ONE), ("100", ONE)],
    )
    .expect("three-qubit state")
}

/// Ideal `|psi2>` on qubits `a b`.
pub fn prepare_psi2_ideal() -> QuantumState {
    psi2_on("a", "b")
}

/// Ideal `|psi3>` on qubits `a b c`.
pub fn ideal_psi3() -> QuantumState {
    psi3_on("a", "b", "c")
}

/// The C-NOT sequence turning the `Z_b Z_c = -1` branch into
/// `|psi3>|1>_d`: control-target pairs, applied in order.
pub const PSI3_CNOTS: [(&str, &str); 5] =
    [("a", "c"), ("d", "b"), ("a", "d"), ("b", "d"), ("c", "d")];

#[derive(Clone, Debug, PartialEq)]
pub struct Psi3Preparation {
    /// Pure `|psi3>` on `a b c` (unnormalized, as produced by the branch).
    pub state: QuantumState,
    pub record: MeasurementRecord,
    /// Number of `Z_b Z_c` measurements performed.
    pub attempts: u64,
}

pub enum Psi3Mode<'a> {
    /// Keep the `-1` branch; the `+1` branch has no known correction.
    PostselectMinus,
    /// Measure with Born statistics and retry on `+1` with fresh copies.
    Sample {
        rng: &'a mut dyn RngCore,
        max_attempts: u64,
    },
}

/// `|psi2>_ab |psi2>_cd` after the `Z_b Z_c = -1` outcome, before the
/// C-NOT sequence. Exposed for inspection.
pub fn psi3_intermediate() -> Result<(MeasurementRecord, QuantumState)> {
    let pair = psi2_on("a", "b").tensor(&psi2_on("c", "d"))?;
    pair.measure(
        &Observable::z(&["b", "c"]),
        MeasureMode::Postselect(Outcome::Minus),
    )
}

fn finish_psi3(branch: QuantumState) -> Result<QuantumState> {
    let gates: Vec<GateSpec> = PSI3_CNOTS
        .iter()
        .map(|(c, t)| GateSpec::cnot(c, t))
        .collect();
    let out = branch.apply_gates(&gates)?;
    let d_zero = out.clone().fix_qubit("d", 0);
    if let Ok(rest) = d_zero {
        if rest.trace() > 1e-12 * out.trace() {
            return Err(Error::InvalidArgument(
                "ancilla d not disentangled in |1>".into(),
            ));
        }
    }
    out.fix_qubit("d", 1)
}

/// Synthesises `|psi3>` from two ideal `|psi2>` copies by measuring
/// `Z_b Z_c` and applying [`PSI3_CNOTS`].
pub fn psi3_from_psi2(mode: Psi3Mode<'_>) -> Result<Psi3Preparation> {
    let obs = Observable::z(&["b", "c"]);
    match mode {
        Psi3Mode::PostselectMinus => {
            let (record, branch) = psi3_intermediate()?;
            Ok(Psi3Preparation {
                state: finish_psi3(branch)?,
                record,
                attempts: 1,
            })
        }
        Psi3Mode::Sample { rng, max_attempts } => {
            for attempt in 1..=max_attempts {
                let pair = psi2_on("a", "b").tensor(&psi2_on("c", "d"))?;
                let (record, branch) = pair.measure(&obs, MeasureMode::Sample(&mut *rng))?;
                if record.outcome == Outcome::Minus {
                    return Ok(Psi3Preparation {
                        state: finish_psi3(branch)?,
                        record,
                        attempts: attempt,
                    });
                }
            }
            Err(Error::RetryLimit(max_attempts))
        }
    }
}

/// Outcomes `(Z_a Z_b, Z_b Z_c)` of the majority-vote measurements.
pub type Syndrome = (Outcome, Outcome);

/// Full branch label `(Z_a Z_b, Z_b Z_c, X_a)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Branch {
    pub zab: Outcome,
    pub zbc: Outcome,
    pub xa: Outcome,
}

impl Branch {
    pub fn all() -> Vec<Branch> {
        let mut v = Vec::with_capacity(8);
        for zab in Outcome::both() {
            for zbc in Outcome::both() {
                for xa in Outcome::both() {
                    v.push(Branch { zab, zbc, xa });
                }
            }
        }
        v
    }

    pub fn syndrome(&self) -> Syndrome {
        (self.zab, self.zbc)
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.zab, self.zbc, self.xa)
    }
}

/// Which ancilla the majority vote flips, if any.
pub fn odd_one_out(syndrome: Syndrome) -> Option<&'static str> {
    match syndrome {
        (Outcome::Plus, Outcome::Plus) => None,
        (Outcome::Minus, Outcome::Plus) => Some("a"),
        (Outcome::Minus, Outcome::Minus) => Some("b"),
        (Outcome::Plus, Outcome::Minus) => Some("c"),
    }
}

/// Gate sequences on `A B C` for each branch.
///
/// `main` is applied right after C-NOT `c -> C`; `phase_fix` after the `X_a`
/// measurement. [`CorrectionTable::entry`] concatenates the two.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrectionTable {
    pub main: BTreeMap<String, Vec<GateSpec>>,
    pub phase_fix: BTreeMap<String, Vec<GateSpec>>,
}

fn syndrome_key(s: Syndrome) -> String {
    format!("({},{})", s.0, s.1)
}

impl CorrectionTable {
    pub fn main_for(&self, s: Syndrome) -> &[GateSpec] {
        self.main
            .get(&syndrome_key(s))
            .map_or(&[], |v| v.as_slice())
    }

    pub fn phase_fix_for(&self, b: Branch) -> &[GateSpec] {
        self.phase_fix
            .get(&b.to_string())
            .map_or(&[], |v| v.as_slice())
    }

    pub fn set_main(&mut self, s: Syndrome, gates: Vec<GateSpec>) {
        self.main.insert(syndrome_key(s), gates);
    }

    pub fn set_phase_fix(&mut self, b: Branch, gates: Vec<GateSpec>) {
        self.phase_fix.insert(b.to_string(), gates);
    }

    /// Complete correction for a branch: main correction, then phase fix.
    pub fn entry(&self, b: Branch) -> Vec<GateSpec> {
        let mut v = self.main_for(b.syndrome()).to_vec();
        v.extend_from_slice(self.phase_fix_for(b));
        v
    }

    /// One line per branch, e.g. `(-1,+1,-1)  CNOT_BC X_A CPHASE_AB X_A`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("branch (ZaZb,ZbZc,Xa)  correction\n");
        for b in Branch::all() {
            let gates = self.entry(b);
            let desc = if gates.is_empty() {
                "identity".to_string()
            } else {
                gates
                    .iter()
                    .map(|g| g.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            out.push_str(&format!("{b:<22}  {desc}\n"));
        }
        out
    }
}

/// Ideal Toffoli `A, B -> C` applied to `input`.
pub fn ideal_toffoli(input: &QuantumState) -> Result<QuantumState> {
    input.clone().apply_gate(&GateSpec::toffoli("A", "B", "C"))
}

pub enum GadgetMode<'a> {
    Postselect(Branch),
    Sample(&'a mut dyn RngCore),
}

#[derive(Clone, Debug)]
pub struct GadgetResult {
    /// State of `A B C` after the ancillas are discarded.
    pub output: QuantumState,
    pub transcript: Vec<MeasurementRecord>,
    pub branch: Branch,
    /// Probability of the branch given the (normalized) inputs.
    pub branch_probability: f64,
}

/// Runs the gadget and returns the joint `A B C a b c` state before the
/// ancillas are discarded. Pure inputs stay pure.
pub fn gadget_joint_state(
    input: &QuantumState,
    ancilla: &QuantumState,
    table: &CorrectionTable,
    mode: GadgetMode<'_>,
) -> Result<(QuantumState, Vec<MeasurementRecord>, Branch)> {
    let input = input.permuted(&DATA)?;
    let ancilla = ancilla.permuted(&ANCILLA)?;
    let mut joint = input.tensor(&ancilla)?;
    joint = joint.apply_gates(&[GateSpec::cnot("A", "a"), GateSpec::cnot("B", "b")])?;

    let (postselect, mut rng) = match mode {
        GadgetMode::Postselect(b) => (Some(b), None),
        GadgetMode::Sample(r) => (None, Some(r)),
    };
    let mut transcript = Vec::with_capacity(3);
    let mut measure = |state: &QuantumState, obs: Observable, wanted: Option<Outcome>| {
        let mode = match (wanted, rng.as_mut()) {
            (Some(o), _) => MeasureMode::Postselect(o),
            (None, Some(r)) => MeasureMode::Sample(&mut **r),
            (None, None) => unreachable!("either postselect or sample"),
        };
        state.measure(&obs, mode)
    };

    let (r1, s) = measure(
        &joint,
        Observable::z(&["a", "b"]),
        postselect.map(|b| b.zab),
    )?;
    let (r2, s) = measure(&s, Observable::z(&["b", "c"]), postselect.map(|b| b.zbc))?;
    let syndrome = (r1.outcome, r2.outcome);
    transcript.push(r1);
    transcript.push(r2);

    let mut s = s;
    if let Some(q) = odd_one_out(syndrome) {
        s = s.apply_gate(&GateSpec::x(q))?;
    }
    s = s.apply_gate(&GateSpec::cnot("c", "C"))?;
    s = s.apply_gates(table.main_for(syndrome))?;
    s = s.apply_gates(&[GateSpec::cnot("a", "b"), GateSpec::cnot("a", "c")])?;

    let (r3, s) = measure(&s, Observable::x(&["a"]), postselect.map(|b| b.xa))?;
    let branch = Branch {
        zab: syndrome.0,
        zbc: syndrome.1,
        xa: r3.outcome,
    };
    transcript.push(r3);
    let s = s.apply_gates(table.phase_fix_for(branch))?;
    Ok((s, transcript, branch))
}

/// Executes the Toffoli gadget on `A B C` with ancilla `a b c`.
pub fn toffoli_gadget(
    input: &QuantumState,
    ancilla: &QuantumState,
    table: &CorrectionTable,
    mode: GadgetMode<'_>,
) -> Result<GadgetResult> {
    let (joint, transcript, branch) = gadget_joint_state(input, ancilla, table, mode)?;
    let branch_probability = transcript.iter().map(|r| r.probability).product();
    Ok(GadgetResult {
        output: joint.discard(&ANCILLA)?,
        transcript,
        branch,
        branch_probability,
    })
}

/// One row of the collapsed-term table: `A B` bits, ancilla bits initially,
/// after step (I), and after the majority vote (II).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CollapsedTerm {
    pub ab: [u8; 2],
    pub initial: [u8; 3],
    pub after_cnot: [u8; 3],
    pub after_vote: [u8; 3],
}

impl fmt::Display for CollapsedTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx = self.ab[0] * 2 + self.ab[1];
        let bits = |x: &[u8; 3]| format!("{}{}{}", x[0], x[1], x[2]);
        let prefix = format!("{}{}C{}", self.ab[0], self.ab[1], idx);
        write!(
            f,
            "{prefix} {} -> {prefix} {} -> {prefix} {}",
            bits(&self.initial),
            bits(&self.after_cnot),
            bits(&self.after_vote)
        )
    }
}

/// Classical enumeration of the basis terms surviving a syndrome: for each
/// `A B` the unique `|psi3>` term consistent with the measured parities.
pub fn collapsed_terms(syndrome: Syndrome) -> Vec<CollapsedTerm> {
    const PSI3_TERMS: [[u8; 3]; 4] = [[0, 0, 0], [0, 0, 1], [0, 1, 0], [1, 0, 0]];
    let parity_ok = |x: u8, y: u8, o: Outcome| (x == y) == (o == Outcome::Plus);
    let flip = odd_one_out(syndrome).map(|q| ANCILLA.iter().position(|a| *a == q).unwrap());
    let mut rows = Vec::new();
    for ab in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
        for t in PSI3_TERMS {
            let after = [ab[0] ^ t[0], ab[1] ^ t[1], t[2]];
            if parity_ok(after[0], after[1], syndrome.0)
                && parity_ok(after[1], after[2], syndrome.1)
            {
                let mut voted = after;
                if let Some(i) = flip {
                    voted[i] ^= 1;
                }
                rows.push(CollapsedTerm {
                    ab,
                    initial: t,
                    after_cnot: after,
                    after_vote: voted,
                });
            }
        }
    }
    rows
}

/// A named vocabulary item used by the correction search.
#[derive(Clone, Debug)]
struct Word {
    gates: Vec<GateSpec>,
}

fn conj(x: &[&str], inner: GateSpec) -> Word {
    let mut gates: Vec<GateSpec> = x.iter().map(|q| GateSpec::x(q)).collect();
    gates.push(inner);
    gates.extend(x.iter().map(|q| GateSpec::x(q)));
    Word { gates }
}

fn word(g: GateSpec) -> Word {
    Word { gates: vec![g] }
}

fn main_vocabulary() -> Vec<Word> {
    vec![
        word(GateSpec::cnot("B", "C")),
        word(GateSpec::cnot("A", "C")),
        word(GateSpec::cnot("A", "B")),
        word(GateSpec::x("A")),
        word(GateSpec::x("B")),
        word(GateSpec::x("C")),
        word(GateSpec::cphase("A", "B")),
        conj(&["A"], GateSpec::cphase("A", "B")),
        conj(&["B"], GateSpec::cphase("A", "B")),
        conj(&["A", "B"], GateSpec::cphase("A", "B")),
    ]
}

fn phase_vocabulary() -> Vec<Word> {
    vec![
        word(GateSpec::cphase("A", "B")),
        conj(&["A"], GateSpec::cphase("A", "B")),
        conj(&["B"], GateSpec::cphase("A", "B")),
        conj(&["A", "B"], GateSpec::cphase("A", "B")),
        word(GateSpec::z("A")),
        word(GateSpec::z("B")),
        word(GateSpec::z("C")),
        word(GateSpec::cphase("A", "C")),
        word(GateSpec::cphase("B", "C")),
    ]
}

/// Longest correction sequence considered, in vocabulary words.
pub const MAX_CORRECTION_WORDS: usize = 4;

/// Fidelity required of a candidate correction on every test input.
const SEARCH_FIDELITY: f64 = 1.0 - 1e-9;

/// Test inputs for the search and verification: the 8 basis states plus
/// `random` seeded random states.
pub fn test_inputs(random: usize, seed: u64) -> Vec<QuantumState> {
    let data = labels(&DATA, Role::LogicalData);
    let mut v: Vec<QuantumState> = (0..8)
        .map(|k| QuantumState::basis(data.clone(), &format!("{k:03b}")).expect("basis"))
        .collect();
    for i in 0..random {
        let mut rng = trial_rng(seed, i as u64);
        v.push(QuantumState::random_pure(data.clone(), &mut rng).expect("random state"));
    }
    v
}

struct BranchSamples {
    outputs: Vec<QuantumState>,
    targets: Vec<QuantumState>,
}

impl BranchSamples {
    fn accepts(&self, prefix: &[GateSpec], words: &[&Word]) -> Result<bool> {
        for (out, target) in self.outputs.iter().zip(&self.targets) {
            let mut s = out.clone().apply_gates(prefix)?;
            for w in words {
                s = s.apply_gates(&w.gates)?;
            }
            if s.fidelity(target)? < SEARCH_FIDELITY {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn sample_branch(
    inputs: &[QuantumState],
    partial: &CorrectionTable,
    b: Branch,
) -> Result<BranchSamples> {
    let anc = ideal_psi3();
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut targets = Vec::with_capacity(inputs.len());
    for input in inputs {
        let r = toffoli_gadget(input, &anc, partial, GadgetMode::Postselect(b))?;
        outputs.push(r.output);
        targets.push(ideal_toffoli(input)?);
    }
    Ok(BranchSamples { outputs, targets })
}

/// Breadth-first search over words; sequences of equal length are tried in
/// vocabulary order.
fn search(
    vocab: &[Word],
    samples: &BranchSamples,
    prefix: &[GateSpec],
) -> Result<Option<Vec<GateSpec>>> {
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..=MAX_CORRECTION_WORDS {
        for seq in &frontier {
            let words: Vec<&Word> = seq.iter().map(|&i| &vocab[i]).collect();
            if samples.accepts(prefix, &words)? {
                return Ok(Some(words.iter().flat_map(|w| w.gates.clone()).collect()));
            }
        }
        frontier = frontier
            .iter()
            .flat_map(|seq| {
                (0..vocab.len()).map(move |i| {
                    let mut s = seq.clone();
                    s.push(i);
                    s
                })
            })
            .collect();
    }
    Ok(None)
}

/// Derives the branch corrections by brute-force search.
///
/// For each syndrome the main correction is the shortest word sequence that
/// makes the `X_a = +1` branch equal the ideal Toffoli on the 8 basis states
/// and 20 random states; the `X_a = -1` phase fix is then searched on top of
/// it from a diagonal vocabulary.
pub fn derive_correction_table() -> Result<CorrectionTable> {
    let inputs = test_inputs(20, 0x070f_f011);
    let main_vocab = main_vocabulary();
    let phase_vocab = phase_vocabulary();
    let mut table = CorrectionTable::default();
    for zab in Outcome::both() {
        for zbc in Outcome::both() {
            let syndrome = (zab, zbc);
            let plus = Branch {
                zab,
                zbc,
                xa: Outcome::Plus,
            };
            let samples = sample_branch(&inputs, &table, plus)?;
            let main = search(&main_vocab, &samples, &[])?
                .ok_or_else(|| Error::NoCorrection(plus.to_string()))?;
            table.set_main(syndrome, main.clone());
            for xa in Outcome::both() {
                let b = Branch { zab, zbc, xa };
                let samples = sample_branch(&inputs, &table, b)?;
                let fix = search(&phase_vocab, &samples, &[])?
                    .ok_or_else(|| Error::NoCorrection(b.to_string()))?;
                if !fix.is_empty() {
                    table.set_phase_fix(b, fix);
                }
            }
        }
    }
    Ok(table)
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchReport {
    pub branch: Branch,
    pub min_fidelity: f64,
    pub min_probability: f64,
    pub max_probability: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GadgetVerification {
    pub inputs: usize,
    pub min_fidelity: f64,
    /// Largest deviation of the summed branch probabilities from 1.
    pub max_probability_defect: f64,
    pub branches: Vec<BranchReport>,
}

impl GadgetVerification {
    pub fn failing_branches(&self) -> Vec<Branch> {
        self.branches
            .iter()
            .filter(|b| !b.passed)
            .map(|b| b.branch)
            .collect()
    }
}

/// Runs every branch on every input with an ideal `|psi3>` and compares
/// against the directly applied Toffoli.
pub fn verify_gadget(
    table: &CorrectionTable,
    inputs: &[QuantumState],
    threshold: f64,
) -> Result<GadgetVerification> {
    let anc = ideal_psi3();
    let mut branches = Vec::new();
    let mut prob_sums = vec![0.0; inputs.len()];
    for b in Branch::all() {
        let mut min_f = f64::INFINITY;
        let mut pmin = f64::INFINITY;
        let mut pmax: f64 = 0.0;
        for (k, input) in inputs.iter().enumerate() {
            let r = toffoli_gadget(input, &anc, table, GadgetMode::Postselect(b))?;
            let f = r.output.fidelity(&ideal_toffoli(input)?)?;
            min_f = min_f.min(f);
            pmin = pmin.min(r.branch_probability);
            pmax = pmax.max(r.branch_probability);
            prob_sums[k] += r.branch_probability;
        }
        branches.push(BranchReport {
            branch: b,
            min_fidelity: min_f,
            min_probability: pmin,
            max_probability: pmax,
            passed: min_f >= threshold,
        });
    }
    Ok(GadgetVerification {
        inputs: inputs.len(),
        min_fidelity: branches
            .iter()
            .map(|b| b.min_fidelity)
            .fold(f64::INFINITY, f64::min),
        max_probability_defect: prob_sums
            .iter()
            .map(|p| (p - 1.0).abs())
            .fold(0.0, f64::max),
        branches,
    })
}
