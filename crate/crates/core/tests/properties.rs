use num_complex::Complex64 as C;
use proptest::prelude::*;

use toffoli_distill::concat::{
    block_failure, progressive_schedule, CodeParams, LogEps, ScheduleOptions,
};
use toffoli_distill::distill::{
    combine_exact_check, expected_ops, expected_ops_closed, measurement_majority_repeats,
    success_probability, RhoAlpha,
};
use toffoli_distill::error_models::{
    parity_bias, parity_bias_enumerated, PauliChannel, UnitaryError,
};
use toffoli_distill::quantum::GateKind;

fn physical_alpha() -> impl Strategy<Value = RhoAlpha> {
    (0.0..1.0f64, 0.0..std::f64::consts::TAU, 0.0..1.0f64).prop_map(|(m, phase, t)| {
        let a1 = C::from_polar(m, phase);
        let a3 = m * m + t * (1.0 - m * m);
        RhoAlpha::new(a1, a1.conj(), C::new(a3, 0.0))
    })
}

fn unitarity_defect(m: &[C]) -> f64 {
    let d = (m.len() as f64).sqrt().round() as usize;
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let s: C = (0..d).map(|k| m[i * d + k] * m[j * d + k].conj()).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - want).norm());
        }
    }
    worst
}

#[test]
fn fixed_gates_are_unitary() {
    for g in [
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::H,
        GateKind::S,
        GateKind::Cnot,
        GateKind::Cphase,
        GateKind::Toffoli,
        GateKind::UFig2,
    ] {
        let m = g.matrix();
        assert_eq!(m.len(), 1 << (2 * g.arity()), "{}", g.name());
        assert!(unitarity_defect(&m) < 1e-12, "{}", g.name());
    }
}

proptest! {
    #[test]
    fn error_operators_are_unitary(a in -1.0..1.0f64, b in -1.0..1.0f64, c in -1.0..1.0f64, d in -1.0..1.0f64) {
        let n = (a * a + b * b + c * c + d * d).sqrt();
        prop_assume!(n > 1e-3);
        let e = UnitaryError::new(a / n, b / n, c / n, d / n).unwrap();
        prop_assert!(unitarity_defect(&GateKind::Custom(e.matrix()).matrix()) < 1e-12);
    }

    #[test]
    fn combine_is_entrywise_product(r in physical_alpha(), s in physical_alpha()) {
        let exact = combine_exact_check(&r, &s).unwrap();
        prop_assert!(exact.max_abs_diff(&r.times(&s)) < 1e-10);
        prop_assert!(r.times(&s).max_abs_diff(&s.times(&r)) == 0.0);
        prop_assert!(r.times(&s).is_physical());
    }

    #[test]
    fn combine_is_linear(r in physical_alpha(), s in physical_alpha(), t in physical_alpha(), w in 0.0..1.0f64) {
        // rho(w r + (1-w) t) = w rho(r) + (1-w) rho(t) as unnormalized operators
        let mix = |x: &RhoAlpha, y: &RhoAlpha| {
            let f = |p: C, q: C| p * w + q * (1.0 - w);
            RhoAlpha::new(f(x.a1, y.a1), f(x.a2, y.a2), f(x.a3, y.a3))
        };
        let lhs = combine_exact_check(&mix(&r, &t), &s).unwrap();
        let rhs = mix(&r.times(&s), &t.times(&s));
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn success_probability_at_least_quarter(a in -1.0..=1.0f64, b in -1.0..=1.0f64) {
        let p = success_probability(&RhoAlpha::diagonal(a), &RhoAlpha::diagonal(b));
        prop_assert!((0.25 - 1e-15..=1.0 + 1e-15).contains(&p));
    }

    #[test]
    fn block_failure_monotone(e in -50.0..-2.01f64, de in 0.0..10.0f64, n in 1.0..1e6f64, f in 1.0..100.0f64) {
        let p = CodeParams::reference();
        let at = |e: f64, n: f64| block_failure(LogEps::new(e).unwrap(), n, &p).unwrap().value();
        prop_assert!(at(e, n * f) <= at(e, n));
        prop_assert!(at(e - de, n) <= at(e, n));
    }

    #[test]
    fn block_failure_never_underflows(e in -1e6..-2.01f64, log_n in 0.0..300.0f64) {
        let out = block_failure(LogEps::new(e).unwrap(), 10f64.powf(log_n), &CodeParams::reference()).unwrap();
        prop_assert!(out.value().is_finite());
        prop_assert!(out.value() <= e);
    }

    #[test]
    fn schedules_are_consistent(target in -2000.0..-3.0f64, e0 in -6.0..-2.5f64) {
        let p = CodeParams::reference();
        let opts = ScheduleOptions::default();
        let s = progressive_schedule(LogEps::new(target).unwrap(), &p, LogEps::new(e0).unwrap(), &opts).unwrap();
        prop_assert!(s.n_levels() >= 1);
        prop_assert!(s.final_eps().value() <= target + opts.tilde_slack);
        let mut prev = s.eps0_star.value();
        for l in &s.levels {
            prop_assert!(l.consistent());
            prop_assert!(l.eps.value() <= l.eps_star.value());
            prop_assert!(l.eps_star.value() < prev);
            prev = l.eps_star.value();
        }
    }

    #[test]
    fn parity_bias_matches_enumeration(p in prop::collection::vec(0.0..=1.0f64, 1..=10)) {
        let n = p.len();
        let ch = PauliChannel::new(p, vec![0.0; n]).unwrap();
        prop_assert!((parity_bias(&ch) - parity_bias_enumerated(&ch).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn majority_repeats_odd_and_sufficient(le in -30.0..-0.1f64, lm in -10.0..-0.31f64) {
        let (eps, eps_m) = (10f64.powf(le), 10f64.powf(lm));
        let r = measurement_majority_repeats(eps, eps_m).unwrap();
        prop_assert_eq!(r % 2, 1);
        prop_assert!(r as f64 >= eps.ln() / eps_m.ln() - 1e-9);
    }

    #[test]
    fn expected_ops_recursion_matches_closed_form(p in 0.05..=1.0f64, ratio in 0.0..10.0f64, l in 0u32..15) {
        let it = expected_ops(l, |_| p, ratio);
        let cf = expected_ops_closed(l, p, ratio);
        prop_assert!((it - cf).abs() <= 1e-10 * cf);
    }

    #[test]
    fn log_eps_rejects_positive(x in 1e-9..1e3f64) {
        prop_assert!(LogEps::new(x).is_err());
    }
}
