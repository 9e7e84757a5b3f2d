//! Per-command experiment configs, read from JSON. Missing keys take the
//! defaults below; unknown keys are rejected.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::concat::CodeParams;
use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 20_050_707;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToffoliConfig {
    pub seed: u64,
    pub random_inputs: usize,
    /// Only the 8 computational basis inputs; reports truth-table matches.
    pub basis_only: bool,
    /// Replace one main correction with the identity (negative control).
    pub corrupt_table: bool,
    pub tolerance: f64,
}

impl Default for ToffoliConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            random_inputs: 100,
            basis_only: false,
            corrupt_table: false,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistillMode {
    Postselect,
    Sampled,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillConfig {
    pub seed: u64,
    pub alpha3: f64,
    /// Use the coherent input `alpha = (-i t, i t, t^2)` instead of `alpha3`.
    pub coherent_t: Option<f64>,
    pub levels: u32,
    pub mode: DistillMode,
    pub trials: u64,
    /// Ops charged per successful combine.
    pub combine_cost: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            alpha3: 0.5,
            coherent_t: None,
            levels: 3,
            mode: DistillMode::Both,
            trials: 10_000,
            combine_cost: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Decoherent,
    Unitary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoisyMeasConfig {
    pub seed: u64,
    pub n: usize,
    pub model: ModelKind,
    /// Bit-flip probability per cat qubit (decoherent).
    pub p: f64,
    /// `C/A` per cat qubit (unitary).
    pub ratio: f64,
    /// Dense simulation of the physical blocks; small `n` only.
    pub exact: bool,
    pub trials: u64,
    pub max_attempts: u64,
}

impl Default for NoisyMeasConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            n: 8,
            model: ModelKind::Decoherent,
            p: 0.05,
            ratio: 0.05,
            exact: false,
            trials: 100_000,
            max_attempts: crate::noisy_meas::DEFAULT_RAW_RETRIES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub seed: u64,
    pub model: ModelKind,
    pub n: usize,
    /// Mean error rate per qubit.
    pub p: f64,
    pub jitter: f64,
    pub defect_fraction: f64,
    pub levels: u32,
    /// Sampled trees (decoherent).
    pub realizations: usize,
    /// Monte Carlo samples per `pn` point (unitary).
    pub samples: usize,
    /// `p n` values for the unitary sweep; `p` is derived as `pn / n`.
    pub pn_grid: Vec<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            model: ModelKind::Decoherent,
            n: 1000,
            p: 0.002,
            jitter: 0.5,
            defect_fraction: 0.0,
            levels: 3,
            realizations: 2000,
            samples: 20_000,
            pn_grid: vec![0.5, 1.0, 2.0, 3.0, 5.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub seed: u64,
    pub params: CodeParams,
    /// `log10` of the level-0 Toffoli failure rate.
    pub log10_eps0_star: f64,
    /// `log10` failure targets.
    pub targets: Vec<f64>,
    pub gate_penalty: f64,
    pub tilde_slack: f64,
    pub pinned_sizes: Vec<f64>,
    pub max_levels: usize,
    /// Block size of the fixed-`n` baseline.
    pub n_fixed: f64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        let opts = crate::concat::ScheduleOptions::reference();
        Self {
            seed: DEFAULT_SEED,
            params: CodeParams::reference(),
            log10_eps0_star: (2e-3f64).log10(),
            targets: vec![-9.0, -100.0],
            gate_penalty: opts.gate_penalty,
            tilde_slack: opts.tilde_slack,
            pinned_sizes: opts.pinned_sizes,
            max_levels: opts.max_levels,
            n_fixed: 7.0,
        }
    }
}

/// Reads `path` as JSON, or the defaults when no path is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_configs_fill_defaults() {
        let c: DistillConfig =
            serde_json::from_str(r#"{"alpha3": 0.0, "mode": "sampled"}"#).unwrap();
        assert_eq!(c.alpha3, 0.0);
        assert_eq!(c.mode, DistillMode::Sampled);
        assert_eq!(c.levels, 3);
        assert!(serde_json::from_str::<DistillConfig>(r#"{"alpha": 1}"#).is_err());
        let e: EstimateConfig =
            serde_json::from_str(r#"{"params": {"p_c": 0.01, "k": 1, "beta": 0.3}}"#).unwrap();
        assert_eq!(e.params.beta, 0.3);
    }
}
