//! Progressive concatenation estimates in log10 space.
//!
//! A level with block size `n` maps an input failure rate `eps_in` to
//! `(eps_in / p_c)^(K n^beta)`. Rates like `1e-830` underflow `f64`, so every
//! rate here is carried as its base-10 exponent ([`LogEps`]) and block sizes
//! as `log10 n`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base-10 exponent of a failure rate.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogEps(f64);

impl LogEps {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value > 0.0 {
            return Err(Error::InvalidArgument(format!(
                "log10 rate {value} must be <= 0"
            )));
        }
        Ok(Self(value))
    }

    pub fn from_rate(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rate {rate} outside (0, 1]"
            )));
        }
        Ok(Self(rate.log10()))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The linear rate; `0.0` once it underflows.
    pub fn rate(self) -> f64 {
        10f64.powf(self.0)
    }

    /// Multiplies the linear rate by `factor`, capped at 1.
    pub fn times(self, factor: f64) -> Self {
        Self((self.0 + factor.log10()).min(0.0))
    }
}

impl fmt::Display for LogEps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1e{:.2}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    pub p_c: f64,
    pub k: f64,
    pub beta: f64,
}

impl CodeParams {
    /// `p_c = 1e-2`, `K = 1`, `beta = log_9 2`.
    pub fn reference() -> Self {
        Self {
            p_c: 1e-2,
            k: 1.0,
            beta: 2f64.ln() / 9f64.ln(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_c > 0.0 && self.p_c < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "p_c = {} outside (0, 1)",
                self.p_c
            )));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "K = {} must be positive",
                self.k
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "beta = {} outside (0, 1]",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn log_pc(&self) -> f64 {
        self.p_c.log10()
    }
}

impl Default for CodeParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// `log10 eps_out = K n^beta (log10 eps_in - log10 p_c)` with `n = 10^log10_n`.
pub fn block_failure_log_n(eps_in: LogEps, log10_n: f64, params: &CodeParams) -> Result<LogEps> {
    params.validate()?;
    if eps_in.0 >= params.log_pc() {
        return Err(Error::AboveThreshold {
            log10: eps_in.0,
            threshold: params.log_pc(),
        });
    }
    if log10_n.is_nan() || log10_n < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "block size 10^{log10_n} below 1"
        )));
    }
    let out = params.k * 10f64.powf(params.beta * log10_n) * (eps_in.0 - params.log_pc());
    if !out.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "exponent overflow at block size 10^{log10_n}"
        )));
    }
    Ok(LogEps(out))
}

pub fn block_failure(eps_in: LogEps, n: f64, params: &CodeParams) -> Result<LogEps> {
    if n.is_nan() || n < 1.0 {
        return Err(Error::InvalidArgument(format!("block size {n} below 1")));
    }
    block_failure_log_n(eps_in, n.log10(), params)
}

/// `log10` of `(1/p) ln(1/p)`; valid for rates far below `f64` range.
pub fn log10_max_block_size(eps: LogEps) -> Result<f64> {
    if eps.0 >= 0.0 {
        return Err(Error::InvalidArgument(
            "rate 1 has no block-size bound".into(),
        ));
    }
    let ln_inv = -eps.0 * std::f64::consts::LN_10;
    Ok(-eps.0 + ln_inv.log10())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOptions {
    /// Linear factor between the Toffoli rate and the bare rate at level 0.
    pub gate_penalty: f64,
    /// Decades of slack allowed when comparing against the target.
    pub tilde_slack: f64,
    /// Block sizes fixed by hand for the first levels.
    pub pinned_sizes: Vec<f64>,
    pub max_levels: usize,
}

impl ScheduleOptions {
    /// `n1 = 1000`, `n2 = 2e7`.
    pub fn reference() -> Self {
        Self {
            pinned_sizes: vec![1000.0, 2e7],
            ..Self::default()
        }
    }
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        Self {
            gate_penalty: 2.0,
            tilde_slack: 0.5,
            pinned_sizes: Vec::new(),
            max_levels: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub level: usize,
    pub log10_n: f64,
    /// `log10` of the block-size bound at the previous level's rate.
    pub log10_n_bound: f64,
    pub eps: LogEps,
    pub eps_star: LogEps,
}

impl LevelEntry {
    /// Block size; infinite beyond `f64` range.
    pub fn n(&self) -> f64 {
        10f64.powf(self.log10_n)
    }

    /// `n_L <= 2 * bound`.
    pub fn consistent(&self) -> bool {
        self.log10_n <= self.log10_n_bound + 2f64.log10() + 1e-12
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSchedule {
    pub target: LogEps,
    pub eps0: LogEps,
    pub eps0_star: LogEps,
    pub levels: Vec<LevelEntry>,
}

impl LevelSchedule {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn final_eps(&self) -> LogEps {
        self.levels.last().map_or(self.eps0, |l| l.eps)
    }
}

/// Builds levels until `eps_N <= target` (within `tilde_slack` decades).
///
/// Level 1 acts on the bare physical rate `eps0 = eps0_star / gate_penalty`
/// for `eps_1` and on `eps0_star` for `eps_1*`. Later levels are built from
/// encoded gates of the level below, whose worst rate is `eps*`. Unpinned
/// block sizes are `(1/eps*) ln(1/eps*)` at the previous level.
pub fn progressive_schedule(
    target: LogEps,
    params: &CodeParams,
    eps0_star: LogEps,
    opts: &ScheduleOptions,
) -> Result<LevelSchedule> {
    params.validate()?;
    if opts.gate_penalty.is_nan() || opts.gate_penalty < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "gate_penalty {} must be >= 1",
            opts.gate_penalty
        )));
    }
    if eps0_star.0 >= params.log_pc() {
        return Err(Error::AboveThreshold {
            log10: eps0_star.0,
            threshold: params.log_pc(),
        });
    }
    let eps0 = LogEps(eps0_star.0 - opts.gate_penalty.log10());
    let mut levels: Vec<LevelEntry> = Vec::new();
    let (mut bare, mut star) = (eps0, eps0_star);
    for level in 1..=opts.max_levels {
        let bound = log10_max_block_size(star)?;
        let log10_n = match opts.pinned_sizes.get(level - 1) {
            Some(&n) if n >= 1.0 => n.log10(),
            Some(&n) => {
                return Err(Error::InvalidArgument(format!(
                    "pinned block size {n} below 1"
                )))
            }
            None => bound,
        };
        let eps = block_failure_log_n(bare, log10_n, params)?;
        let eps_star = block_failure_log_n(star, log10_n, params)?;
        levels.push(LevelEntry {
            level,
            log10_n,
            log10_n_bound: bound,
            eps,
            eps_star,
        });
        if eps.0 <= target.0 + opts.tilde_slack {
            return Ok(LevelSchedule {
                target,
                eps0,
                eps0_star,
                levels,
            });
        }
        bare = eps_star;
        star = eps_star;
    }
    Err(Error::Unreachable(opts.max_levels))
}

/// Self-similar fixed-`n` map `p_c (eps_in / p_c)^(K n^beta)`.
pub fn standard_level(eps_in: LogEps, n_fixed: f64, params: &CodeParams) -> Result<LogEps> {
    let d = block_failure(eps_in, n_fixed, params)?;
    Ok(LogEps((d.0 + params.log_pc()).min(0.0)))
}

/// Exponents `eps_0, eps_1, ...` for fixed-`n` concatenation, stopping at
/// the first level with `eps_L <= target`.
pub fn standard_concat_trajectory(
    target: LogEps,
    params: &CodeParams,
    eps0: LogEps,
    n_fixed: f64,
    max_levels: usize,
) -> Result<Vec<LogEps>> {
    let mut traj = vec![eps0];
    let mut eps = eps0;
    for _ in 0..max_levels {
        if eps.0 <= target.0 + 1e-9 {
            return Ok(traj);
        }
        eps = standard_level(eps, n_fixed, params)?;
        traj.push(eps);
    }
    if eps.0 <= target.0 + 1e-9 {
        return Ok(traj);
    }
    Err(Error::Unreachable(max_levels))
}

/// Number of fixed-`n` levels needed to reach `target` from `eps0`.
pub fn compare_standard_concat(
    target: LogEps,
    params: &CodeParams,
    eps0: LogEps,
    n_fixed: f64,
) -> Result<usize> {
    Ok(standard_concat_trajectory(target, params, eps0, n_fixed, 64)?.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn le(x: f64) -> LogEps {
        LogEps::new(x).unwrap()
    }

    #[test]
    fn single_level() {
        let p = CodeParams::reference();
        let e = block_failure(le(-3.0), 1000.0, &p).unwrap();
        assert!((e.value() + 8.8388).abs() < 1e-3);
        // K n^beta = 1
        let id = block_failure(le(-5.0), 1.0, &p).unwrap();
        assert!((id.value() + 3.0).abs() < 1e-12);
        assert!(block_failure(le(-2.0), 10.0, &p).is_err());
        assert!(block_failure(le(-1.0), 10.0, &p).is_err());
    }

    #[test]
    fn two_level_golden() {
        let p = CodeParams::reference();
        let e1s = block_failure(LogEps::from_rate(2e-3).unwrap(), 1000.0, &p).unwrap();
        assert!((e1s.value() + 6.178).abs() < 1e-3);
        let e2 = block_failure(e1s, 2e7, &p).unwrap();
        assert!(e2.value() > -850.0 && e2.value() < -810.0, "{e2}");
    }

    #[test]
    fn deep_exponents_do_not_underflow() {
        let p = CodeParams::reference();
        let e = block_failure_log_n(le(-1e5), 3.0, &p).unwrap();
        assert!(e.value().is_finite() && e.value() < -1e5);
        assert_eq!(le(-900.0).rate(), 0.0);
    }

    #[test]
    fn schedules() {
        let p = CodeParams::reference();
        let e0s = LogEps::from_rate(2e-3).unwrap();
        let one = progressive_schedule(le(-9.0), &p, e0s, &ScheduleOptions::reference()).unwrap();
        assert_eq!(one.n_levels(), 1);
        let two = progressive_schedule(le(-100.0), &p, e0s, &ScheduleOptions::reference()).unwrap();
        assert_eq!(two.n_levels(), 2);
        assert!((two.levels[1].n() - 2e7).abs() < 1.0);
        assert!(two.levels.iter().all(LevelEntry::consistent));
        let free = progressive_schedule(le(-100.0), &p, e0s, &ScheduleOptions::default()).unwrap();
        assert_eq!(free.n_levels(), 2);
        assert!(free.levels.iter().all(LevelEntry::consistent));
        let exact =
            progressive_schedule(one.levels[0].eps, &p, e0s, &ScheduleOptions::reference()).unwrap();
        assert_eq!(exact.n_levels(), 1);
        assert!(progressive_schedule(le(-9.0), &p, le(-1.5), &ScheduleOptions::default()).is_err());
    }

    #[test]
    fn standard_concat() {
        let p = CodeParams::reference();
        let n = compare_standard_concat(le(-9.0), &p, le(-3.0), 7.0).unwrap();
        assert_eq!(n, 4);
        let e1 = standard_level(le(-3.0), 7.0, &p).unwrap();
        assert_eq!(compare_standard_concat(e1, &p, le(-3.0), 7.0).unwrap(), 1);
        assert!(compare_standard_concat(le(-9.0), &p, le(-2.0), 7.0).is_err());
        assert!(compare_standard_concat(le(-9.0), &p, le(-3.0), 1.0).is_err());
    }

    #[test]
    fn progressive_never_needs_more_levels() {
        let p = CodeParams::reference();
        let e0s = LogEps::from_rate(2e-3).unwrap();
        for t in [-9.0, -12.0, -20.0, -50.0, -100.0, -830.0, -1e4] {
            let prog = progressive_schedule(le(t), &p, e0s, &ScheduleOptions::default()).unwrap();
            for n in [7.0, 25.0, 49.0, 125.0, 343.0, 1000.0] {
                let std = compare_standard_concat(le(t), &p, e0s, n).unwrap();
                assert!(
                    prog.n_levels() <= std,
                    "target {t} n {n}: {} > {std}",
                    prog.n_levels()
                );
            }
        }
    }
}
