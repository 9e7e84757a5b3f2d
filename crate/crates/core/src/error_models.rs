//! Error classes acting on the cat-state ancilla and their consequences for
//! raw `rho(alpha)` preparation.
//!
//! Bit flips on the data blocks are folded into the cat bits, so every model
//! here targets the ancilla block `c` only.

use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::rng::trial_rng;

/// Independent per-qubit bit flips (`p`) and phase flips (`q`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliChannel {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

fn check_prob(x: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} probability {x} outside [0, 1]"
        )))
    }
}

impl PauliChannel {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                got: q.len(),
            });
        }
        for &x in &p {
            check_prob(x, "bit-flip")?;
        }
        for &x in &q {
            check_prob(x, "phase-flip")?;
        }
        Ok(Self { p, q })
    }

    /// `n` qubits with bit-flip rate `p` and no phase flips.
    pub fn uniform(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n], vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn mean_p(&self) -> f64 {
        if self.p.is_empty() {
            0.0
        } else {
            self.p.iter().sum::<f64>() / self.p.len() as f64
        }
    }

    /// Draws the parity of the number of bit flips.
    pub fn sample_flip_parity(&self, rng: &mut dyn RngCore) -> bool {
        self.p
            .iter()
            .fold(false, |acc, &p| acc ^ (rng.random::<f64>() < p))
    }
}

/// `prod_i (1 - 2 p_i)`: P(even flips) - P(odd flips).
pub fn parity_bias(ch: &PauliChannel) -> f64 {
    ch.p.iter().map(|p| 1.0 - 2.0 * p).product()
}

/// Even-minus-odd probability by summing over all `2^n` flip patterns.
pub fn parity_bias_enumerated(ch: &PauliChannel) -> Result<f64> {
    let n = ch.n();
    if n > 24 {
        return Err(Error::CapExceeded {
            kind: "enumerated",
            qubits: n,
            cap: 24,
        });
    }
    let mut total = 0.0;
    for pattern in 0u64..(1 << n) {
        let mut prob = 1.0;
        for (i, &p) in ch.p.iter().enumerate() {
            prob *= if pattern >> i & 1 == 1 { p } else { 1.0 - p };
        }
        total += if pattern.count_ones() % 2 == 0 {
            prob
        } else {
            -prob
        };
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Alpha3 {
    pub exact: f64,
    /// `1 - 2 prod(1 - 2 p_i)`, the large-`n` form.
    pub large_n: f64,
}

/// `alpha3 = (1 - P) / (1 + P)` with `P = parity_bias(ch)`.
pub fn alpha3_decoherent(ch: &PauliChannel) -> Alpha3 {
    alpha3_from_bias(parity_bias(ch))
}

pub fn alpha3_from_bias(bias: f64) -> Alpha3 {
    Alpha3 {
        exact: (1.0 - bias) / (1.0 + bias),
        large_n: 1.0 - 2.0 * bias,
    }
}

/// Order-of-magnitude bound `(1/p) ln(1/p)` on the usable block size.
pub fn max_block_size(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("rate {p} outside (0, 1)")));
    }
    Ok((1.0 / p) * (1.0 / p).ln())
}

/// `E = (A + iB Z) + i X (C + iD Z)` on one cat qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryError {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl UnitaryError {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let norm = a * a + b * b + c * c + d * d;
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "A^2 + B^2 + C^2 + D^2 = {norm}, expected 1"
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// Pure bit-flip rotation with `C / A = ratio`, `B = D = 0`.
    pub fn from_ratio(ratio: f64) -> Self {
        let a = 1.0 / (1.0 + ratio * ratio).sqrt();
        Self {
            a,
            b: 0.0,
            c: ratio * a,
            d: 0.0,
        }
    }

    /// Row-major 2x2 matrix.
    pub fn matrix(&self) -> [Complex64; 4] {
        let Self { a, b, c, d } = *self;
        [
            Complex64::new(a, b),
            Complex64::new(d, c),
            Complex64::new(-d, c),
            Complex64::new(a, -b),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryErrorSet {
    pub errors: Vec<UnitaryError>,
}

impl UnitaryErrorSet {
    pub fn from_ratios(ratios: &[f64]) -> Self {
        Self {
            errors: ratios
                .iter()
                .map(|&r| UnitaryError::from_ratio(r))
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.errors.len()
    }

    /// `prod |A_i|` dominates `prod |B_i|`, and likewise for `C`, `D`.
    pub fn low_error(&self) -> bool {
        let prod =
            |f: fn(&UnitaryError) -> f64| self.errors.iter().map(|e| f(e).abs()).product::<f64>();
        let a = prod(|e| e.a);
        a > 10.0 * prod(|e| e.b) && a > 10.0 * prod(|e| e.d)
    }
}

/// `Sigma_C = sum_i atan(C_i / A_i)`.
pub fn sigma_c(errs: &UnitaryErrorSet) -> Result<f64> {
    errs.errors
        .iter()
        .map(|e| {
            if e.a == 0.0 {
                Err(Error::InvalidArgument(
                    "A_i = 0: error outside the low-error regime".into(),
                ))
            } else {
                Ok((e.c / e.a).atan())
            }
        })
        .sum()
}

/// Companion `(tan Sigma_C, rho(alpha))` values for the post-measurement
/// state `|psi2> + i tan(Sigma_C) |11>`.
pub fn coherent_alpha(errs: &UnitaryErrorSet) -> Result<crate::distill::RhoAlpha> {
    Ok(crate::distill::RhoAlpha::coherent(sigma_c(errs)?.tan()))
}

/// Amplitudes `(even, odd)` of `prod_i E_i |even>` from the two-term
/// recursion `e' = A e + iC o`, `o' = A o + iC e`. Exact when every
/// `B_i = D_i = 0`.
pub fn cat_amplitudes_recursion(errs: &UnitaryErrorSet) -> Result<(Complex64, Complex64)> {
    let mut e = Complex64::new(1.0, 0.0);
    let mut o = Complex64::new(0.0, 0.0);
    for err in &errs.errors {
        if err.b != 0.0 || err.d != 0.0 {
            return Err(Error::InvalidArgument(
                "recursion needs B = D = 0; use the dense cat simulation".into(),
            ));
        }
        let ic = Complex64::new(0.0, err.c);
        (e, o) = (err.a * e + ic * o, err.a * o + ic * e);
    }
    Ok((e, o))
}

/// Accumulated angle `atan2(|o|, |e|)` with the sign of `Im(o / e)`.
pub fn accumulated_sigma(errs: &UnitaryErrorSet) -> Result<f64> {
    let (e, o) = cat_amplitudes_recursion(errs)?;
    Ok((o / e).im.atan())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ErrorModel {
    Decoherent(PauliChannel),
    Unitary(UnitaryErrorSet),
}

impl ErrorModel {
    pub fn none(n: usize) -> Self {
        ErrorModel::Decoherent(PauliChannel::uniform(n, 0.0).expect("zero rates"))
    }

    pub fn n(&self) -> usize {
        match self {
            ErrorModel::Decoherent(c) => c.n(),
            ErrorModel::Unitary(u) => u.n(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ErrorModel::Decoherent(_) => "decoherent",
            ErrorModel::Unitary(_) => "unitary",
        }
    }
}

/// Per-block generator of decoherent channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoherentEnsemble {
    pub n: usize,
    pub p: f64,
    /// Relative spread: `p_i` uniform in `p (1 +- jitter)`.
    #[serde(default)]
    pub jitter: f64,
    /// Chance that a qubit is defective, drawn independently per block.
    #[serde(default)]
    pub defect_fraction: f64,
    #[serde(default = "default_defect_p")]
    pub defect_p: f64,
}

fn default_defect_p() -> f64 {
    0.9
}

impl DecoherentEnsemble {
    pub fn uniform(n: usize, p: f64) -> Self {
        Self {
            n,
            p,
            jitter: 0.0,
            defect_fraction: 0.0,
            defect_p: default_defect_p(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_prob(self.p * (1.0 + self.jitter), "bit-flip")?;
        check_prob(self.p * (1.0 - self.jitter), "bit-flip")?;
        check_prob(self.defect_fraction, "defect")?;
        check_prob(self.defect_p, "defective bit-flip")
    }

    pub fn sample_block(&self, rng: &mut dyn RngCore) -> PauliChannel {
        let p = (0..self.n)
            .map(|_| {
                if self.defect_fraction > 0.0 && rng.random::<f64>() < self.defect_fraction {
                    self.defect_p
                } else if self.jitter > 0.0 {
                    self.p * (1.0 + self.jitter * rng.random_range(-1.0..=1.0))
                } else {
                    self.p
                }
            })
            .collect();
        PauliChannel {
            p,
            q: vec![0.0; self.n],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleFidelity {
    pub levels: u32,
    pub blocks_per_tree: u64,
    pub realizations: usize,
    /// Sample means of `p_i` over every drawn block.
    pub mean_p: f64,
    /// `-2^(N+1) prod_i (1 - 2 <p_i>)`.
    pub analytic_log_product: f64,
    pub analytic_fidelity: f64,
    /// Mean over realizations of `sum_m ln alpha3^(m)`.
    pub empirical_log_product: f64,
    pub empirical_log_product_stderr: f64,
    pub empirical_fidelity: f64,
}

/// Compares the averaged closed form against sampled trees of `2^N` blocks,
/// each contributing its own `alpha3^(m)`. Logs are natural.
pub fn ensemble_distill_fidelity(
    ens: &DecoherentEnsemble,
    levels: u32,
    realizations: usize,
    seed: u64,
) -> Result<EnsembleFidelity> {
    ens.validate()?;
    if realizations == 0 {
        return Err(Error::InvalidArgument(
            "need at least one realization".into(),
        ));
    }
    let blocks = 1u64 << levels;
    let per: Vec<(f64, Vec<f64>)> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let mut rng = trial_rng(seed, r as u64);
            let mut log_prod = 0.0;
            let mut sums = vec![0.0; ens.n];
            for _ in 0..blocks {
                let ch = ens.sample_block(&mut rng);
                for (s, p) in sums.iter_mut().zip(&ch.p) {
                    *s += p;
                }
                log_prod += alpha3_decoherent(&ch).exact.ln();
            }
            (log_prod, sums)
        })
        .collect();
    let total = (realizations as u64 * blocks) as f64;
    let mut mean_pi = vec![0.0; ens.n];
    for (_, sums) in &per {
        for (m, s) in mean_pi.iter_mut().zip(sums) {
            *m += s / total;
        }
    }
    let bias: f64 = mean_pi.iter().map(|p| 1.0 - 2.0 * p).product();
    let analytic = -(2.0f64).powi(levels as i32 + 1) * bias;
    let logs: Vec<f64> = per.iter().map(|(l, _)| *l).collect();
    let (mean, stderr) = mean_stderr(&logs);
    Ok(EnsembleFidelity {
        levels,
        blocks_per_tree: blocks,
        realizations,
        mean_p: mean_pi.iter().sum::<f64>() / ens.n.max(1) as f64,
        analytic_log_product: analytic,
        analytic_fidelity: 1.0 - analytic.exp() / 3.0,
        empirical_log_product: mean,
        empirical_log_product_stderr: stderr,
        empirical_fidelity: 3.0 / (3.0 + mean.exp()),
    })
}

pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 || !mean.is_finite() {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Distribution of the per-qubit ratio `r = C_i / A_i` (with `B = D = 0`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatioDistribution {
    Gaussian {
        mean: f64,
        variance: f64,
    },
    /// `+t` or `-t` with equal odds.
    TwoPoint {
        t: f64,
    },
    /// Same ratios in every block: a degenerate ensemble.
    Fixed {
        ratios: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryEnsemble {
    pub n: usize,
    pub dist: RatioDistribution,
    /// Use the `{|0>, -|1>}` basis in every other block, mirroring `r`.
    #[serde(default)]
    pub basis_flip: bool,
}

impl UnitaryEnsemble {
    pub fn gaussian(n: usize, variance: f64) -> Self {
        Self {
            n,
            dist: RatioDistribution::Gaussian {
                mean: 0.0,
                variance,
            },
            basis_flip: false,
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.dist {
            RatioDistribution::Gaussian { mean, variance } => {
                if *variance < 0.0 {
                    return Err(Error::InvalidArgument("negative variance".into()));
                }
                if *mean != 0.0 && !self.basis_flip {
                    return Err(Error::InvalidArgument(
                        "asymmetric ratio distribution needs basis_flip".into(),
                    ));
                }
            }
            RatioDistribution::Fixed { ratios } if ratios.len() != self.n => {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    got: ratios.len(),
                })
            }
            _ => {}
        }
        Ok(())
    }

    /// `<p_i> = <C_i^2 / A_i^2>` averaged over qubits.
    pub fn mean_p(&self) -> f64 {
        match &self.dist {
            RatioDistribution::Gaussian { mean, variance } => mean * mean + variance,
            RatioDistribution::TwoPoint { t } => t * t,
            RatioDistribution::Fixed { ratios } => {
                ratios.iter().map(|r| r * r).sum::<f64>() / ratios.len().max(1) as f64
            }
        }
    }

    /// One block's `Sigma_C = sum atan(r_i)`.
    pub fn sample_sigma(&self, block: u64, rng: &mut dyn RngCore) -> f64 {
        let sign = if self.basis_flip && block % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        let s: f64 = match &self.dist {
            RatioDistribution::Gaussian { mean, variance } => {
                let normal = Normal::new(*mean, variance.sqrt()).expect("finite parameters");
                (0..self.n).map(|_| normal.sample(&mut *rng).atan()).sum()
            }
            RatioDistribution::TwoPoint { t } => (0..self.n)
                .map(|_| {
                    if rng.random::<bool>() {
                        t.atan()
                    } else {
                        -t.atan()
                    }
                })
                .sum(),
            RatioDistribution::Fixed { ratios } => ratios.iter().map(|r| r.atan()).sum(),
        };
        sign * s
    }

    /// `prod_i <exp(-i 2 m atan r_i)>`, symmetrised over the basis flip.
    pub fn characteristic(&self, m: u64) -> Complex64 {
        let k = 2.0 * m as f64;
        let prod = match &self.dist {
            RatioDistribution::Gaussian { mean, variance } => {
                per_qubit_gaussian(*mean, *variance, k).powu(self.n as u32)
            }
            RatioDistribution::TwoPoint { t } => {
                Complex64::new((k * t.atan()).cos(), 0.0).powu(self.n as u32)
            }
            RatioDistribution::Fixed { ratios } => ratios
                .iter()
                .map(|r| Complex64::from_polar(1.0, -k * r.atan()))
                .product(),
        };
        if self.basis_flip {
            Complex64::new(prod.re, 0.0)
        } else {
            prod
        }
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Composite Simpson rule on `[a, b]` with an even number of intervals.
fn simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, intervals: usize) -> Complex64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `<exp(-i k atan r)>` for `r ~ N(mean, variance)`.
fn per_qubit_gaussian(mean: f64, variance: f64, k: f64) -> Complex64 {
    if variance == 0.0 {
        return Complex64::from_polar(1.0, -k * mean.atan());
    }
    let sd = variance.sqrt();
    let intervals = 4000 + (k * 12.0 * sd * 50.0) as usize;
    simpson(
        |r| normal_pdf((r - mean) / sd) / sd * Complex64::from_polar(1.0, -k * r.atan()),
        mean - 12.0 * sd,
        mean + 12.0 * sd,
        intervals,
    )
}

/// Odd moments `<theta^j>` (`j = 1, 3, 5, 7`) of `theta = atan r`: the odd
/// terms of the power series in the exponent.
pub fn odd_moments(ens: &UnitaryEnsemble) -> Vec<f64> {
    [1, 3, 5, 7]
        .iter()
        .map(|&j| match &ens.dist {
            RatioDistribution::Gaussian { mean, variance } => {
                if *variance == 0.0 {
                    return mean.atan().powi(j);
                }
                let sd = variance.sqrt();
                simpson(
                    |r| Complex64::new(normal_pdf((r - mean) / sd) / sd * r.atan().powi(j), 0.0),
                    mean - 12.0 * sd,
                    mean + 12.0 * sd,
                    4000,
                )
                .re
            }
            RatioDistribution::TwoPoint { t } => 0.5 * (t.atan().powi(j) + (-t.atan()).powi(j)),
            RatioDistribution::Fixed { ratios } => {
                ratios.iter().map(|r| r.atan().powi(j)).sum::<f64>() / ratios.len().max(1) as f64
            }
        })
        .collect()
}

/// Truncation threshold for the series.
const SERIES_EPS: f64 = 1e-15;
const SERIES_MAX_TERMS: u64 = 1_000_000;

/// `-sum_k 2/(2k+1) Re prod_i <exp(-i 2(2k+1) theta_i)>`.
pub fn log_tan_series(ens: &UnitaryEnsemble) -> (f64, u64) {
    let mut sum = 0.0;
    for k in 0..SERIES_MAX_TERMS {
        let m = 2 * k + 1;
        let term = 2.0 / m as f64 * ens.characteristic(m).re;
        sum -= term;
        if term.abs() < SERIES_EPS && k > 0 {
            return (sum, k + 1);
        }
    }
    (sum, SERIES_MAX_TERMS)
}

/// `-sum_k 2/(2k+1) exp(-2 (2k+1)^2 sum_i <p_i>)`.
pub fn log_tan_approx(total_p: f64) -> f64 {
    let mut sum = 0.0;
    for k in 0..SERIES_MAX_TERMS {
        let m = (2 * k + 1) as f64;
        let term = 2.0 / m * (-2.0 * m * m * total_p).exp();
        sum -= term;
        if term < SERIES_EPS {
            break;
        }
    }
    sum
}

/// Number of cells on `[0, pi)` used by [`log_tan_quadrature`].
pub const QUADRATURE_CELLS: usize = 4096;

fn circular_convolve(x: &[f64], y: &[f64]) -> Vec<f64> {
    let g = x.len();
    let mut out = vec![0.0; g];
    let ys: Vec<(usize, f64)> = y
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, v)| *v > 1e-300)
        .collect();
    for (i, &xi) in x.iter().enumerate() {
        if xi <= 1e-300 {
            continue;
        }
        for &(j, yj) in &ys {
            let k = (i + j) % g;
            out[k] += xi * yj;
        }
    }
    out
}

/// Mass of `theta mod pi` on the lattice `k h` for one qubit. Lattice
/// points add exactly under convolution.
fn per_qubit_masses(dist: &RatioDistribution, qubit: usize, cells: usize) -> Vec<f64> {
    let h = PI / cells as f64;
    let mut w = vec![0.0; cells];
    let bin = |theta: f64| (theta.rem_euclid(PI) / h).round() as usize % cells;
    match dist {
        RatioDistribution::Gaussian { mean, variance } if *variance > 0.0 => {
            let sd = variance.sqrt();
            const SUB: usize = 8;
            let hs = h / SUB as f64;
            for j in 0..cells * SUB {
                // theta over (-pi/2, pi/2)
                let theta = -FRAC_PI_2 + (j as f64 + 0.5) * hs;
                let t = theta.tan();
                let dens = normal_pdf((t - mean) / sd) / sd * (1.0 + t * t);
                w[bin(theta)] += dens * hs;
            }
        }
        RatioDistribution::Gaussian { mean, .. } => w[bin(mean.atan())] = 1.0,
        RatioDistribution::TwoPoint { t } => {
            w[bin(t.atan())] += 0.5;
            w[bin(-t.atan())] += 0.5;
        }
        RatioDistribution::Fixed { ratios } => w[bin(ratios[qubit].atan())] = 1.0,
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Exact cell average of `ln|x - x0|` over `[a, b]`.
fn log_abs_avg(a: f64, b: f64, x0: f64) -> f64 {
    let f = |u: f64| if u == 0.0 { 0.0 } else { u * u.abs().ln() - u };
    (f(b - x0) - f(a - x0)) / (b - a)
}

/// Averages of `ln|tan x|` over `[(k - 1/2) h, (k + 1/2) h]`. The
/// logarithmic singularities are integrated exactly; the smooth remainder
/// uses a midpoint rule.
fn log_tan_cells(cells: usize) -> Vec<f64> {
    let h = PI / cells as f64;
    let smooth = |x: f64| {
        let s = x.sin().abs().ln() - x.abs().ln() - (PI - x).abs().ln();
        let c = x.cos().abs().ln() - (FRAC_PI_2 - x).abs().ln();
        s - c
    };
    (0..cells)
        .map(|j| {
            let (a, b) = ((j as f64 - 0.5) * h, (j as f64 + 0.5) * h);
            let singular =
                log_abs_avg(a, b, 0.0) + log_abs_avg(a, b, PI) - log_abs_avg(a, b, FRAC_PI_2);
            const SUB: usize = 16;
            let mid: f64 = (0..SUB)
                .map(|s| smooth(a + (s as f64 + 0.5) * h / SUB as f64))
                .sum::<f64>()
                / SUB as f64;
            singular + mid
        })
        .collect()
}

/// `<ln|tan Sigma_C|>` by building the distribution of `Sigma_C mod pi` on
/// a grid (repeated circular convolution of the per-qubit distribution)
/// and integrating `ln|tan|` against it.
pub fn log_tan_quadrature(ens: &UnitaryEnsemble) -> Result<f64> {
    ens.validate()?;
    let g = QUADRATURE_CELLS;
    let dist = match &ens.dist {
        RatioDistribution::Fixed { ratios } => {
            let mut acc = per_qubit_masses(&ens.dist, 0, g);
            for q in 1..ratios.len() {
                acc = circular_convolve(&acc, &per_qubit_masses(&ens.dist, q, g));
            }
            acc
        }
        _ => {
            // binary exponentiation of the per-qubit distribution
            let mut base = per_qubit_masses(&ens.dist, 0, g);
            let mut acc: Option<Vec<f64>> = None;
            let mut k = ens.n;
            while k > 0 {
                if k & 1 == 1 {
                    acc = Some(match acc {
                        None => base.clone(),
                        Some(a) => circular_convolve(&a, &base),
                    });
                }
                k >>= 1;
                if k > 0 {
                    base = circular_convolve(&base, &base);
                }
            }
            acc.unwrap_or_else(|| {
                let mut d = vec![0.0; g];
                d[0] = 1.0;
                d
            })
        }
    };
    // ln|tan| is even about 0 mod pi, so the basis flip does not change it
    let logs = log_tan_cells(g);
    let uniform = 1.0 / g as f64;
    Ok(dist.iter().zip(&logs).map(|(w, l)| (w - uniform) * l).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogTanReport {
    pub n: usize,
    pub mean_p: f64,
    pub pn: f64,
    pub monte_carlo: f64,
    pub monte_carlo_stderr: f64,
    pub samples: usize,
    pub quadrature: f64,
    pub series: f64,
    pub series_terms: u64,
    pub approx: f64,
    /// `-2 exp(-2 p n)`.
    pub bound: f64,
    pub odd_moments: Vec<f64>,
}

/// `<ln|tan Sigma_C|>` over block ensembles, evaluated by Monte Carlo, by
/// quadrature over the exact distribution, by the characteristic-function
/// series and by its Gaussian-damped approximation.
pub fn ensemble_log_tan(ens: &UnitaryEnsemble, samples: usize, seed: u64) -> Result<LogTanReport> {
    ens.validate()?;
    let logs: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            ens.sample_sigma(i as u64, &mut rng).tan().abs().ln()
        })
        .collect();
    let (mc, se) = if samples > 0 {
        mean_stderr(&logs)
    } else {
        (f64::NAN, f64::NAN)
    };
    let (series, terms) = log_tan_series(ens);
    let p = ens.mean_p();
    let total_p = p * ens.n as f64;
    Ok(LogTanReport {
        n: ens.n,
        mean_p: p,
        pn: total_p,
        monte_carlo: mc,
        monte_carlo_stderr: se,
        samples,
        quadrature: log_tan_quadrature(ens)?,
        series,
        series_terms: terms,
        approx: log_tan_approx(total_p),
        bound: -2.0 * (-2.0 * total_p).exp(),
        odd_moments: odd_moments(ens),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CosineReplacement {
    pub k: u64,
    /// `<cos(2(2k+1) atan r)>`.
    pub expectation: f64,
    /// `exp(-2 (2k+1)^2 <p>)`.
    pub damped: f64,
    /// `cos(2(2k+1) sqrt(<p>))`, the alternative definition.
    pub cosine_of_root: f64,
}

/// Per-qubit comparison of the cosine expectation with its replacements.
pub fn cosine_replacement(mean: f64, variance: f64, k: u64) -> CosineReplacement {
    let m = (2 * k + 1) as f64;
    let p = mean * mean + variance;
    CosineReplacement {
        k,
        expectation: per_qubit_gaussian(mean, variance, 2.0 * m).re,
        damped: (-2.0 * m * m * p).exp(),
        cosine_of_root: (2.0 * m * p.sqrt()).cos(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_bias_examples() {
        assert_eq!(parity_bias(&PauliChannel::uniform(5, 0.0).unwrap()), 1.0);
        let half = PauliChannel::new(vec![0.1, 0.5, 0.3], vec![0.0; 3]).unwrap();
        assert_eq!(parity_bias(&half), 0.0);
        let ch = PauliChannel::uniform(8, 0.05).unwrap();
        assert!((parity_bias(&ch) - 0.43046721).abs() < 1e-12);
        assert!((parity_bias_enumerated(&ch).unwrap() - 0.43046721).abs() < 1e-12);
    }

    #[test]
    fn alpha3_examples() {
        assert_eq!(
            alpha3_decoherent(&PauliChannel::uniform(3, 0.0).unwrap()).exact,
            0.0
        );
        assert_eq!(alpha3_from_bias(0.0).exact, 1.0);
        let a = alpha3_decoherent(&PauliChannel::uniform(8, 0.05).unwrap());
        assert!((a.exact - 0.398145).abs() < 1e-6);
        assert!((a.large_n - (1.0 - 2.0 * 0.43046721)).abs() < 1e-12);
    }

    #[test]
    fn block_size_examples() {
        assert!((max_block_size(1e-3).unwrap() - 6907.755).abs() < 1e-3);
        assert!((max_block_size(0.1).unwrap() - 23.026).abs() < 1e-3);
        assert!(max_block_size(1.0 - 1e-9).unwrap() < 1e-8);
        assert!(max_block_size(0.0).is_err());
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(
            sigma_c(&UnitaryErrorSet::from_ratios(&[0.0; 3])).unwrap(),
            0.0
        );
        let one = sigma_c(&UnitaryErrorSet::from_ratios(&[1.0])).unwrap();
        assert!((one - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        let a = coherent_alpha(&UnitaryErrorSet::from_ratios(&[1.0])).unwrap();
        // sits on the distillability boundary |alpha3| = 1
        assert!((a.a3.norm() - 1.0).abs() < 1e-12);
        let four = UnitaryErrorSet::from_ratios(&[0.05; 4]);
        let s = sigma_c(&four).unwrap();
        assert!((s - 0.199834).abs() < 1e-6);
        assert!((s.tan().powi(2) - 0.041021).abs() < 1e-6);
        let zero_a = UnitaryErrorSet {
            errors: vec![UnitaryError::new(0.0, 0.0, 1.0, 0.0).unwrap()],
        };
        assert!(sigma_c(&zero_a).is_err());
    }

    #[test]
    fn recursion_matches_closed_form() {
        let set = UnitaryErrorSet::from_ratios(&[0.05, -0.02, 0.1, 0.03]);
        let (e, o) = cat_amplitudes_recursion(&set).unwrap();
        let s = sigma_c(&set).unwrap();
        assert!((e - Complex64::new(s.cos(), 0.0)).norm() < 1e-14);
        assert!((o - Complex64::new(0.0, s.sin())).norm() < 1e-14);
        assert!((accumulated_sigma(&set).unwrap() - s).abs() < 1e-14);
    }

    #[test]
    fn error_matrix_is_unitary() {
        let e = UnitaryError::new(0.8, 0.36, 0.48, 0.0).unwrap();
        let m = e.matrix();
        let col0 = m[0].norm_sqr() + m[2].norm_sqr();
        let dot = m[0].conj() * m[1] + m[2].conj() * m[3];
        assert!((col0 - 1.0).abs() < 1e-12 && dot.norm() < 1e-12);
        assert!(UnitaryError::new(0.5, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn quadrature_degenerate_block_is_exact() {
        let ratios = vec![0.3, -0.1, 0.25];
        let ens = UnitaryEnsemble {
            n: 3,
            dist: RatioDistribution::Fixed {
                ratios: ratios.clone(),
            },
            basis_flip: false,
        };
        let r = ensemble_log_tan(&ens, 10, 0).unwrap();
        let exact = sigma_c(&UnitaryErrorSet::from_ratios(&ratios))
            .unwrap()
            .tan()
            .abs()
            .ln();
        assert!((r.monte_carlo - exact).abs() < 1e-14);
        assert!(r.monte_carlo_stderr < 1e-15);
    }

    #[test]
    fn two_point_has_no_odd_terms() {
        let ens = UnitaryEnsemble {
            n: 10,
            dist: RatioDistribution::TwoPoint { t: 0.1 },
            basis_flip: false,
        };
        assert!(odd_moments(&ens).iter().all(|m| m.abs() < 1e-18));
        for m in [1, 3, 5] {
            assert!(ens.characteristic(m).im.abs() < 1e-15);
        }
    }

    #[test]
    fn asymmetric_needs_basis_flip() {
        let mut ens = UnitaryEnsemble {
            n: 10,
            dist: RatioDistribution::Gaussian {
                mean: 0.02,
                variance: 0.001,
            },
            basis_flip: false,
        };
        assert!(ensemble_log_tan(&ens, 10, 0).is_err());
        ens.basis_flip = true;
        assert!(ensemble_log_tan(&ens, 10, 0).is_ok());
    }

    #[test]
    fn cosine_replacement_quality() {
        for p in [0.001, 0.005, 0.01] {
            for k in 0..=3 {
                let c = cosine_replacement(0.0, p, k);
                assert!((c.expectation - c.damped).abs() <= 0.1, "p={p} k={k} {c:?}");
            }
        }
    }

    #[test]
    fn ensemble_fidelity_defect_free() {
        let ens = DecoherentEnsemble::uniform(100, 0.01);
        let f = ensemble_distill_fidelity(&ens, 4, 4, 1).unwrap();
        let rel =
            (f.empirical_log_product - f.analytic_log_product).abs() / f.analytic_log_product.abs();
        assert!(rel < 0.2, "{f:?}");
        let perfect = DecoherentEnsemble::uniform(5, 0.0);
        let f = ensemble_distill_fidelity(&perfect, 0, 1, 1).unwrap();
        assert_eq!(f.empirical_fidelity, 1.0);
    }
}
