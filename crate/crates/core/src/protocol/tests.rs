use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::model::{dressed_basis, derive_constants, theory_ledger, QetParams};

fn paper() -> DerivedConstants {
    derive_constants(&QetParams::paper()).unwrap()
}

fn assert_reports_close(a: &RunReport, b: &RunReport, tol: f64) {
    for (sa, sb) in a.steps.iter().zip(&b.steps) {
        for (x, y) in sa.energies().iter().zip(sb.energies()) {
            assert_abs_diff_eq!(*x, y, epsilon = tol);
        }
    }
    assert_abs_diff_eq!(a.extracted, b.extracted, epsilon = tol);
    assert_abs_diff_eq!(a.stored, b.stored, epsilon = tol);
}

fn run_pure(plan: &CircuitPlan) -> Vec<exec::Branch<PureState>> {
    exec::run_plan(PureState::new_zero(N_QUBITS).unwrap(), plan, None).unwrap()
}

fn reduced(state: &PureState, q: usize) -> DensityOperator {
    state.to_density().partial_trace(&[q]).unwrap()
}

#[test]
fn step1_prepares_analytic_ground() {
    let c = paper();
    let branches = run_pure(&build_step1(&c));
    assert_eq!(branches.len(), 1);
    let f = branches[0].reg.overlap(&ground_state_analytic(&c)).unwrap();
    assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
}

#[test]
fn step1_with_zero_angle_is_identity() {
    let mut c = paper();
    c.theta = 0.0;
    let branches = run_pure(&build_step1(&c));
    assert_abs_diff_eq!(branches[0].reg.probabilities()[0], 1.0, epsilon = 1e-15);
}

#[test]
fn exact_ledger_matches_theory() {
    let c = paper();
    let theory = theory_ledger(&c);
    for variant in [Variant::Dynamic, Variant::Deferred] {
        let r = execute(&c, &ProtocolPlans::new(&c, variant), &ExecutionMode::Exact).unwrap();
        assert_reports_close(&r, &theory, 1e-10);
    }
}

#[test]
fn table_values_to_three_decimals() {
    let c = paper();
    let r = execute(&c, &ProtocolPlans::new(&c, Variant::Dynamic), &ExecutionMode::Exact).unwrap();
    let r3 = |x: f64| (x * 1000.0).round() / 1000.0;
    assert_eq!(r.steps[0].energies().map(r3), [0.0, 0.0, 0.0]);
    assert_eq!(r.steps[1].energies().map(r3), [0.789, 0.0, 1.277]);
    assert_eq!(r.steps[2].energies().map(r3), [0.789, -0.295, 1.572]);
    assert_eq!(r3(r.extracted), -0.295);
    assert_eq!(r3(r.stored), 0.295);
}

#[test]
fn variants_agree_exactly() {
    let c = paper();
    let d = execute(&c, &ProtocolPlans::new(&c, Variant::Dynamic), &ExecutionMode::Exact).unwrap();
    let f = execute(&c, &ProtocolPlans::new(&c, Variant::Deferred), &ExecutionMode::Exact).unwrap();
    assert_reports_close(&d, &f, 1e-12);
}

#[test]
fn plus_branch_leaves_c_in_c_plus() {
    let c = paper();
    let d = dressed_basis(&c);
    let plan = CircuitPlan::concat([&build_step1(&c), &build_step2(&c, Variant::Dynamic)]);
    let branches = run_pure(&plan);
    assert_eq!(branches.len(), 2);
    for b in &branches {
        assert_abs_diff_eq!(b.weight, 0.5, epsilon = 1e-12);
        let target = if b.bits[ALICE_BIT] { &d.c_minus } else { &d.c_plus };
        let expected = target.to_density();
        assert!(reduced(&b.reg, QUBIT_C).trace_distance(&expected).unwrap() < 1e-12);
    }
}

#[test]
fn step3_leaves_c_excited_and_b_in_dressed_ground() {
    let c = paper();
    let d = dressed_basis(&c);
    let plans = ProtocolPlans::new(&c, Variant::Dynamic);
    for b in run_pure(&plans.cumulative(3)) {
        assert_abs_diff_eq!(b.reg.prob_one(QUBIT_C), 1.0, epsilon = 1e-12);
        let g = if b.bits[ALICE_BIT] { &d.g_minus } else { &d.g_plus };
        assert!(reduced(&b.reg, QUBIT_B).trace_distance(&g.to_density()).unwrap() < 1e-12);
    }
}

#[test]
fn mismatched_constants_rejected() {
    let c = paper();
    let other = derive_constants(&QetParams::new(1.0, 0.02, 0.393).unwrap()).unwrap();
    let plans = ProtocolPlans::new(&other, Variant::Dynamic);
    assert!(matches!(
        execute(&c, &plans, &ExecutionMode::Exact),
        Err(QetError::Argument(_))
    ));
}

#[test]
fn zero_shots_rejected() {
    let c = paper();
    let plans = ProtocolPlans::new(&c, Variant::Dynamic);
    let mode = ExecutionMode::Sampled { shots: 0, seed: 1 };
    assert!(matches!(execute(&c, &plans, &mode), Err(QetError::Argument(_))));
}

#[test]
fn read_before_write_rejected() {
    let c = paper();
    let steps = [build_step1(&c), build_step3(&c, Variant::Dynamic), build_step2(&c, Variant::Dynamic)];
    assert!(ProtocolPlans::from_parts(&c, Variant::Dynamic, steps).is_err());
}

#[test]
fn deferred_plans_may_not_measure() {
    let c = paper();
    let steps = [build_step1(&c), build_step2(&c, Variant::Dynamic), build_step3(&c, Variant::Deferred)];
    assert!(ProtocolPlans::from_parts(&c, Variant::Deferred, steps).is_err());
    let ok = [build_step1(&c), build_step2(&c, Variant::Deferred), build_step3(&c, Variant::Deferred)];
    assert!(ProtocolPlans::from_parts(&c, Variant::Deferred, ok).is_ok());
}

#[test]
fn bad_arity_rejected() {
    let plan = CircuitPlan::new(vec![PlanItem::Gate {
        gate: PlanGate::Cx,
        targets: vec![0],
    }]);
    assert!(plan.validate(N_QUBITS).is_err());
}

#[test]
fn sampled_within_three_standard_errors() {
    let c = paper();
    let theory = theory_ledger(&c);
    let mode = ExecutionMode::Sampled { shots: 100_000, seed: 1 };
    let r = execute(&c, &ProtocolPlans::new(&c, Variant::Dynamic), &mode).unwrap();
    for (s, t) in r.steps.iter().zip(&theory.steps) {
        for ((e, se), want) in s.energies().iter().zip(s.standard_errors()).zip(t.energies()) {
            assert!((e - want).abs() <= 3.0 * se + 1e-12, "{e} vs {want} (se {se})");
        }
    }
    assert!((0.285..=0.305).contains(&r.stored));
}

#[test]
fn sampled_runs_are_deterministic() {
    let c = paper();
    let plans = ProtocolPlans::new(&c, Variant::Deferred);
    let mode = ExecutionMode::Sampled { shots: 2_000, seed: 42 };
    assert_eq!(execute(&c, &plans, &mode).unwrap(), execute(&c, &plans, &mode).unwrap());
    let other = ExecutionMode::Sampled { shots: 2_000, seed: 43 };
    assert_ne!(execute(&c, &plans, &mode).unwrap(), execute(&c, &plans, &other).unwrap());
}

#[test]
fn null_noise_matches_exact_within_sampling_error() {
    let c = paper();
    let plans = ProtocolPlans::new(&c, Variant::Dynamic);
    let exact = execute(&c, &plans, &ExecutionMode::Exact).unwrap();
    let mode = ExecutionMode::Noisy {
        noise: crate::noise::NoiseSpec::none(N_QUBITS),
        shots: 20_000,
        seed: 3,
    };
    let r = execute(&c, &plans, &mode).unwrap();
    for (s, t) in r.steps.iter().zip(&exact.steps) {
        for ((e, se), want) in s.energies().iter().zip(s.standard_errors()).zip(t.energies()) {
            assert!((e - want).abs() <= 4.0 * se + 1e-12);
        }
    }
    let dens = noisy_expectations(&c, &plans, &crate::noise::NoiseSpec::none(N_QUBITS)).unwrap();
    assert_reports_close(&dens, &exact, 1e-12);
}

#[test]
fn noise_reduces_stored_energy() {
    let c = paper();
    let plans = ProtocolPlans::new(&c, Variant::Deferred);
    let r = noisy_expectations(&c, &plans, &crate::noise::NoiseSpec::illustrative()).unwrap();
    assert!(r.stored < c.transfer_energy());
    assert!(r.stored > 0.0);
}

#[test]
fn alice_outcomes_are_fair() {
    let c = paper();
    let shots = 100_000u64;
    let sigma = (shots as f64 * 0.25).sqrt();
    for variant in [Variant::Dynamic, Variant::Deferred] {
        let [zeros, ones] = alice_outcome_counts(&c, variant, shots, 11).unwrap();
        assert_eq!(zeros + ones, shots);
        assert!((zeros as f64 - shots as f64 / 2.0).abs() <= 3.0 * sigma);
    }
}

#[test]
fn quasi_vacuum_check_paper_parameters() {
    let check = quasi_vacuum_check(&paper(), Basis::X).unwrap();
    assert!(check.passed);
    assert!(reduced_b_unchanged_check(&paper()));
}

#[test]
fn z_measurement_breaks_quasi_vacuum() {
    let check = quasi_vacuum_check(&paper(), Basis::Z).unwrap();
    assert!(!check.passed);
    assert!(check.bob_energy.abs() > 1e-3);
}

#[test]
fn qasm_dynamic_measures_before_conditioning() {
    let c = paper();
    let text = export_qasm(&ProtocolPlans::new(&c, Variant::Dynamic), 2).unwrap();
    assert!(text.starts_with("OPENQASM 3.0;"));
    let measure = text.find("measure").unwrap();
    let cond = text.find("if (").unwrap();
    assert!(measure < cond);
    assert!(text.contains(&format!("ry({}) q[2]", std::f64::consts::PI + 2.0 * c.delta)));
}

#[test]
fn qasm_deferred_has_no_classical_control() {
    let c = paper();
    let plans = ProtocolPlans::new(&c, Variant::Deferred);
    let step2 = export_qasm(&plans, 2).unwrap();
    assert!(!step2.contains("if ("));
    assert!(step2.contains("negctrl @ ry("));
    // the single measurement is the terminal readout
    assert_eq!(step2.matches("measure").count(), 1);
    assert!(step2.rfind("measure").unwrap() > step2.rfind("ctrl @").unwrap());
    let step1 = export_qasm(&plans, 1).unwrap();
    assert!(!step1.contains("measure") && !step1.contains("\nbit["));
    assert!(export_qasm(&plans, 4).is_err());
}

#[test]
fn qasm_angles_round_trip() {
    let c = paper();
    let text = export_qasm(&ProtocolPlans::new(&c, Variant::Deferred), 3).unwrap();
    let angles: Vec<f64> = text
        .match_indices("ry(")
        .map(|(i, _)| {
            let rest = &text[i + 3..];
            rest[..rest.find(')').unwrap()].parse().unwrap()
        })
        .collect();
    assert_abs_diff_eq!(angles[0], -2.0 * c.theta, epsilon = 1e-12);
    for a in &angles[1..] {
        let d = a.abs();
        assert!(
            (d - 2.0 * c.delta).abs() < 1e-12 || (d - std::f64::consts::PI).abs() < 1e-12,
            "{a}"
        );
    }
}

fn log_uniform() -> impl Strategy<Value = f64> {
    (-2.0f64..2.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bookkeeping_and_step2_bob_energy(h_a in log_uniform(), h_b in log_uniform(), k in log_uniform()) {
        let c = derive_constants(&QetParams::new(h_a, h_b, k).unwrap()).unwrap();
        for variant in [Variant::Dynamic, Variant::Deferred] {
            let r = execute(&c, &ProtocolPlans::new(&c, variant), &ExecutionMode::Exact).unwrap();
            prop_assert!((r.extracted + r.stored).abs() < 1e-10);
            prop_assert!(r.steps[1].e_vb.abs() < 1e-10);
            prop_assert!((r.stored - c.transfer_energy()).abs() < 1e-10);
        }
    }

    #[test]
    fn quasi_vacuum_for_random_parameters(h_a in log_uniform(), h_b in log_uniform(), k in log_uniform()) {
        let c = derive_constants(&QetParams::new(h_a, h_b, k).unwrap()).unwrap();
        prop_assert!(reduced_b_unchanged_check(&c));
    }

    #[test]
    fn noisy_energies_stay_in_spectral_bounds(p1 in 0.0f64..0.2, p2 in 0.0f64..0.3, flip in 0.0f64..0.2) {
        let c = paper();
        let noise = crate::noise::NoiseSpec {
            p1,
            p2,
            readout: vec![crate::noise::symmetric_confusion(flip); 3],
        };
        let r = noisy_expectations(&c, &ProtocolPlans::new(&c, Variant::Dynamic), &noise).unwrap();
        for s in &r.steps {
            prop_assert!(s.e_c >= -1e-9 && s.e_c <= 2.0 * c.h_c + 1e-9);
        }
    }
}
