//! Subcommand bodies. Each one calls into the library and assembles a
//! [`RunReport`]; no numbers are computed here that a test cannot reach.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{
    DistillConfig, DistillMode, EnsembleConfig, EstimateConfig, ModelKind, NoisyMeasConfig,
    ToffoliConfig,
};
use super::report::RunReport;
use crate::concat::{compare_standard_concat, progressive_schedule, LogEps, ScheduleOptions};
use crate::distill::{
    distill_tree_sampled, distill_tree_states, expected_ops, fidelity_after, fidelity_with_psi2,
    success_probability, success_schedule, trace_levels, RhoAlpha,
};
use crate::error::{Error, Result};
use crate::error_models::{
    alpha3_decoherent, coherent_alpha, ensemble_distill_fidelity, ensemble_log_tan, mean_stderr,
    DecoherentEnsemble, ErrorModel, PauliChannel, UnitaryEnsemble, UnitaryErrorSet,
};
use crate::gadgets::{derive_correction_table, test_inputs, verify_gadget, Branch};
use crate::noisy_meas::{cat_error_demo, estimate_alpha3, prepare_rho_raw, verify_eq5, NoisyMode};
use crate::quantum::Outcome;
use crate::rng::trial_rng;

/// Largest `n` accepted by the dense noisy-meas mode (`3n` qubits).
pub const MAX_EXACT_N: usize = 4;

pub fn toffoli_verify(cfg: &ToffoliConfig) -> Result<RunReport> {
    let mut rep = RunReport::new("toffoli-verify", cfg);
    let mut table = derive_correction_table()?;
    if cfg.corrupt_table {
        table.set_main((Outcome::Minus, Outcome::Plus), Vec::new());
    }
    let threshold = 1.0 - cfg.tolerance;
    let random = if cfg.basis_only { 0 } else { cfg.random_inputs };
    let inputs = test_inputs(random, cfg.seed);
    let v = verify_gadget(&table, &inputs, threshold)?;
    rep.metric("inputs", v.inputs as f64);
    rep.metric("min_fidelity", v.min_fidelity).expected = Some(1.0);
    rep.metric("max_probability_defect", v.max_probability_defect)
        .expected = Some(0.0);
    let failing = v.failing_branches();
    rep.metric("failing_branches", failing.len() as f64)
        .expected = Some(0.0);
    let truth = inputs[..8]
        .iter()
        .map(|s| {
            verify_gadget(&table, std::slice::from_ref(s), threshold)
                .map(|r| r.failing_branches().is_empty())
        })
        .collect::<Result<Vec<bool>>>()?;
    let matches = truth.iter().filter(|&&ok| ok).count();
    rep.metric("truth_table_matches", matches as f64).expected = Some(8.0);
    rep.check(
        "gadget_fidelity",
        failing.is_empty(),
        if failing.is_empty() {
            format!(
                "min fidelity {:.3e} below 1 over all 8 branches",
                1.0 - v.min_fidelity
            )
        } else {
            let names: Vec<String> = failing.iter().map(Branch::to_string).collect();
            format!("failing branches: {}", names.join(" "))
        },
    );
    rep.check("truth_table", matches == 8, format!("{matches}/8"));
    rep.rows(v.branches.iter().map(|b| BranchRow {
        branch: b.branch.to_string(),
        min_fidelity: b.min_fidelity,
        min_probability: b.min_probability,
        max_probability: b.max_probability,
        passed: b.passed,
    }));
    Ok(rep)
}

#[derive(Serialize)]
struct BranchRow {
    branch: String,
    min_fidelity: f64,
    min_probability: f64,
    max_probability: f64,
    passed: bool,
}

#[derive(Serialize)]
struct DistillRow {
    level: u32,
    alpha1_im: f64,
    alpha3: f64,
    fidelity: f64,
    closed_form_fidelity: f64,
    success_probability: Option<f64>,
}

/// Per-trial tallies of a sampled tree.
struct TreeTally {
    attempts: f64,
    ops: f64,
    fidelity: f64,
}

pub fn distill(cfg: &DistillConfig) -> Result<RunReport> {
    let mut rep = RunReport::new("distill", cfg);
    let alpha = match cfg.coherent_t {
        Some(t) => RhoAlpha::coherent(t),
        None => RhoAlpha::diagonal(cfg.alpha3),
    };
    let n = cfg.levels;
    if n > 20 {
        return Err(Error::InvalidArgument(format!("levels {n} > 20")));
    }
    let trace = trace_levels(&alpha, n);
    rep.rows(trace.iter().map(|t| DistillRow {
        level: t.level,
        alpha1_im: t.alpha.a1.im,
        alpha3: t.alpha.a3.re,
        fidelity: t.fidelity,
        closed_form_fidelity: fidelity_after(alpha.a3.re, t.level),
        success_probability: t.success_probability,
    }));
    let closed = fidelity_after(alpha.a3.re, n);
    rep.metric("closed_form_fidelity", closed);
    if n == 0 {
        rep.metric("fidelity", trace[0].fidelity).expected = Some(closed);
        rep.check("passthrough", true, "N = 0: no combines");
        return Ok(rep);
    }

    if matches!(cfg.mode, DistillMode::Postselect | DistillMode::Both) {
        if n > 4 {
            return Err(Error::InvalidArgument(
                "state-level postselected tree limited to N <= 4".into(),
            ));
        }
        let inputs = vec![alpha; 1 << n];
        let root = distill_tree_states(&inputs)?;
        let f = fidelity_with_psi2(&root)?;
        rep.metric("postselected_fidelity", f).expected = Some(closed);
        rep.check(
            "postselected_fidelity",
            (f - closed).abs() <= 1e-10,
            format!("state simulation {f:.12} vs closed form {closed:.12}"),
        );
    }

    if matches!(cfg.mode, DistillMode::Sampled | DistillMode::Both) {
        if !alpha.is_physical() {
            return Err(Error::Unphysical(format!(
                "sampled trees need a physical input, got {alpha}"
            )));
        }
        if cfg.trials == 0 {
            return Err(Error::InvalidArgument(
                "sampled mode needs trials > 0".into(),
            ));
        }
        let tallies: Vec<TreeTally> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(cfg.seed, t);
                let out = distill_tree_sampled(n, || Some(alpha), &mut rng, cfg.combine_cost)?;
                Ok(TreeTally {
                    attempts: out.attempts as f64,
                    ops: out.ops_used,
                    fidelity: 3.0 / out.result.trace(),
                })
            })
            .collect::<Result<_>>()?;
        let attempts: Vec<f64> = tallies.iter().map(|t| t.attempts).collect();
        let ops: Vec<f64> = tallies.iter().map(|t| t.ops).collect();
        let (mean_att, se_att) = mean_stderr(&attempts);
        let (mean_ops, se_ops) = mean_stderr(&ops);
        let sched = success_schedule(&alpha, n);
        // A(L) = (1 + 2 A(L-1)) / P_L
        let expected_attempts = sched.iter().fold(0.0, |a, p| (1.0 + 2.0 * a) / p);
        let successes = f64::from((1u32 << n) - 1);
        let freq = successes / mean_att;
        let freq_se = freq * se_att / mean_att;
        let freq_expected = successes / expected_attempts;
        let m = rep.metric("success_frequency", freq);
        m.stderr = Some(freq_se);
        m.expected = Some(freq_expected);
        rep.metric(
            "first_level_success_probability",
            success_probability(&alpha, &alpha),
        );
        let predicted_ops = expected_ops(n, |l| sched[l as usize - 1], cfg.combine_cost);
        let m = rep.metric("mean_ops", mean_ops);
        m.stderr = Some(se_ops);
        m.expected = Some(predicted_ops);
        let f = tallies.iter().map(|t| t.fidelity).sum::<f64>() / tallies.len() as f64;
        rep.metric("sampled_fidelity", f).expected = Some(closed);
        let within = |x: f64, se: f64, want: f64| (x - want).abs() <= 4.0 * se.max(1e-12);
        rep.check(
            "success_frequency",
            within(freq, freq_se, freq_expected),
            format!("{freq:.5} +- {freq_se:.5} vs {freq_expected:.5}"),
        );
        rep.check(
            "mean_ops",
            within(mean_ops, se_ops, predicted_ops),
            format!("{mean_ops:.3} +- {se_ops:.3} vs {predicted_ops:.3}"),
        );
    }
    Ok(rep)
}

fn model_for(cfg: &NoisyMeasConfig) -> Result<ErrorModel> {
    Ok(match cfg.model {
        ModelKind::Decoherent => ErrorModel::Decoherent(PauliChannel::uniform(cfg.n, cfg.p)?),
        ModelKind::Unitary => {
            ErrorModel::Unitary(UnitaryErrorSet::from_ratios(&vec![cfg.ratio; cfg.n]))
        }
    })
}

pub fn noisy_meas(cfg: &NoisyMeasConfig) -> Result<RunReport> {
    let mut rep = RunReport::new("noisy-meas", cfg);
    if cfg.n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if cfg.exact {
        if cfg.n > MAX_EXACT_N {
            return Err(Error::CapExceeded {
                kind: "exact noisy-meas",
                qubits: 3 * cfg.n,
                cap: 3 * MAX_EXACT_N,
            });
        }
        let eq5 = verify_eq5(cfg.n)?;
        rep.metric("eigenstrings", eq5.strings as f64);
        rep.metric("eigenstrings_passed", eq5.passed as f64)
            .expected = Some(eq5.strings as f64);
        rep.metric("max_error", eq5.max_error);
        rep.check(
            "eq5",
            eq5.passed == eq5.strings,
            format!("{}/{}", eq5.passed, eq5.strings),
        );
        let demo = cat_error_demo(cfg.n)?;
        rep.check(
            "cat_phase_immunity",
            (demo.phase_errors - demo.clean).abs() < 1e-12,
            format!("P(+1) {:.12} with Z on every cat qubit", demo.phase_errors),
        );
        rep.check(
            "single_flip_reverses",
            (demo.single_flip - (1.0 - demo.clean)).abs() < 1e-12,
            format!("P(+1) {:.12} after X on c1", demo.single_flip),
        );
        rep.rows([demo]);
        return Ok(rep);
    }
    let model = model_for(cfg)?;
    match (&model, cfg.model) {
        (ErrorModel::Decoherent(ch), _) => {
            let want = alpha3_decoherent(ch).exact;
            let (est, rows) = estimate_alpha3(&model, cfg.trials, cfg.seed, cfg.max_attempts)?;
            let m = rep.metric("alpha3", est.estimate);
            m.stderr = Some(est.stderr);
            m.expected = Some(want);
            rep.metric("mean_attempts", est.attempts as f64 / est.trials as f64);
            rep.check(
                "alpha3",
                (est.estimate - want).abs() <= 4.0 * est.stderr,
                format!("{:.5} +- {:.5} vs {want:.6}", est.estimate, est.stderr),
            );
            rep.rows(rows);
        }
        (ErrorModel::Unitary(errs), _) => {
            let want = coherent_alpha(errs)?;
            let got = prepare_rho_raw(&model, NoisyMode::Postselect(Outcome::Plus), 1)?;
            let alpha = got
                .alpha
                .ok_or_else(|| Error::InvalidArgument("raw state has no |psi2> weight".into()))?;
            rep.metric("alpha1_im", alpha.a1.im).expected = Some(want.a1.im);
            rep.metric("alpha3", alpha.a3.re).expected = Some(want.a3.re);
            rep.metric("plus_probability", got.probability);
            let diff = alpha.max_abs_diff(&want);
            rep.check(
                "coherent_alpha",
                diff < 1e-10,
                format!("max entry difference {diff:.3e}"),
            );
            rep.rows([got]);
        }
    }
    Ok(rep)
}

#[derive(Serialize)]
struct LogTanRow {
    pn: f64,
    monte_carlo: f64,
    monte_carlo_stderr: f64,
    quadrature: f64,
    series: f64,
    approx: f64,
    bound: f64,
}

pub fn ensemble(cfg: &EnsembleConfig) -> Result<RunReport> {
    let mut rep = RunReport::new("ensemble", cfg);
    match cfg.model {
        ModelKind::Decoherent => {
            let ens = DecoherentEnsemble {
                jitter: cfg.jitter,
                defect_fraction: cfg.defect_fraction,
                ..DecoherentEnsemble::uniform(cfg.n, cfg.p)
            };
            let f = ensemble_distill_fidelity(&ens, cfg.levels, cfg.realizations, cfg.seed)?;
            let m = rep.metric("log_product", f.empirical_log_product);
            m.stderr = Some(f.empirical_log_product_stderr);
            m.expected = Some(f.analytic_log_product);
            rep.metric("empirical_fidelity", f.empirical_fidelity)
                .expected = Some(f.analytic_fidelity);
            rep.metric("mean_p", f.mean_p);
            let gap = (f.empirical_log_product - f.analytic_log_product).abs();
            rep.check(
                "analytic_vs_empirical",
                gap <= 4.0 * f.empirical_log_product_stderr,
                format!(
                    "gap {gap:.4e}, 4 sigma {:.4e}",
                    4.0 * f.empirical_log_product_stderr
                ),
            );
            rep.rows([f]);
        }
        ModelKind::Unitary => {
            let mut rows = Vec::new();
            for (k, &pn) in cfg.pn_grid.iter().enumerate() {
                let ens = UnitaryEnsemble::gaussian(cfg.n, pn / cfg.n as f64);
                let r = ensemble_log_tan(&ens, cfg.samples, cfg.seed.wrapping_add(k as u64))?;
                let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
                let consistent =
                    rel(r.quadrature, r.series) <= 0.2 && rel(r.approx, r.series) <= 0.2;
                let mc_ok = (r.monte_carlo - r.series).abs() <= 4.0 * r.monte_carlo_stderr;
                rep.check(
                    &format!("log_tan_pn_{pn}"),
                    consistent && mc_ok && r.quadrature <= r.bound,
                    format!(
                        "quadrature {:.4e}, series {:.4e}, approx {:.4e}, mc {:.4e} +- {:.1e}, bound {:.4e}",
                        r.quadrature, r.series, r.approx, r.monte_carlo, r.monte_carlo_stderr, r.bound
                    ),
                );
                rows.push(LogTanRow {
                    pn: r.pn,
                    monte_carlo: r.monte_carlo,
                    monte_carlo_stderr: r.monte_carlo_stderr,
                    quadrature: r.quadrature,
                    series: r.series,
                    approx: r.approx,
                    bound: r.bound,
                });
            }
            rep.rows(rows);
        }
    }
    Ok(rep)
}

#[derive(Serialize)]
struct ScheduleRow {
    log10_target: f64,
    level: usize,
    log10_n: f64,
    log10_n_bound: f64,
    log10_eps: f64,
    log10_eps_star: f64,
}

pub fn estimate(cfg: &EstimateConfig) -> Result<RunReport> {
    let mut rep = RunReport::new("estimate", cfg);
    let opts = ScheduleOptions {
        gate_penalty: cfg.gate_penalty,
        tilde_slack: cfg.tilde_slack,
        pinned_sizes: cfg.pinned_sizes.clone(),
        max_levels: cfg.max_levels,
    };
    let eps0_star = LogEps::new(cfg.log10_eps0_star)?;
    let mut rows = Vec::new();
    for &t in &cfg.targets {
        let target = LogEps::new(t)?;
        let s = progressive_schedule(target, &cfg.params, eps0_star, &opts)?;
        let std = compare_standard_concat(target, &cfg.params, eps0_star, cfg.n_fixed)?;
        rep.metric(&format!("levels_progressive_{t}"), s.n_levels() as f64);
        rep.metric(&format!("levels_standard_{t}"), std as f64);
        rep.check(
            &format!("schedule_consistent_{t}"),
            s.levels.iter().all(|l| l.consistent()),
            "n_L <= 2 max_block_size at every level",
        );
        rows.extend(s.levels.iter().map(|l| ScheduleRow {
            log10_target: t,
            level: l.level,
            log10_n: l.log10_n,
            log10_n_bound: l.log10_n_bound,
            log10_eps: l.eps.value(),
            log10_eps_star: l.eps_star.value(),
        }));
    }
    let has = |lo: f64, hi: f64| {
        rows.iter()
            .any(|r: &ScheduleRow| r.log10_eps >= lo && r.log10_eps <= hi)
    };
    let (single, double) = (has(-10.0, -8.0), has(-850.0, -810.0));
    rep.check(
        "single_level_exponent",
        single,
        "some level exponent in [-10, -8]",
    );
    rep.check(
        "two_level_exponent",
        double,
        "some level exponent in [-850, -810]",
    );
    rep.rows(rows);
    Ok(rep)
}
