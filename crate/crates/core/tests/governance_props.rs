use proptest::prelude::*;
use stackgov_core::governance::{
    capability, compliance_cost, firm_return, regulator_loss, select_setting, solve_governance, CapabilityProfile,
    Domain, FirmModel, GovernanceScenario, GovernanceSolverConfig, Rationale, RegulatorModel, Role, ScoreRule,
    CAPABILITY_DIMS,
};

fn unit6() -> impl Strategy<Value = [f64; CAPABILITY_DIMS]> {
    prop::array::uniform6(0.0f64..=1.0)
}

fn firm(dim: usize) -> impl Strategy<Value = FirmModel> {
    (
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), CAPABILITY_DIMS),
        prop::array::uniform6(-1.0f64..2.0),
        prop::array::uniform6(0.0f64..2.0),
        0.0f64..2.0,
    )
        .prop_map(|(capability_matrix, capability_offset, revenue_weights, effort_cost)| FirmModel {
            capability_matrix,
            capability_offset,
            revenue_weights,
            effort_cost,
        })
}

fn regulator() -> impl Strategy<Value = RegulatorModel> {
    (
        prop::array::uniform6(0.0f64..2.0),
        prop::array::uniform6(1.0f64..3.0),
        prop::array::uniform6(0.0f64..2.0),
        0.0f64..1.0,
    )
        .prop_map(|(risk_weights, risk_exponents, compliance_costs, innovation_drag)| RegulatorModel {
            risk_weights,
            risk_exponents,
            compliance_costs,
            innovation_drag,
        })
}

fn scenario(firm: FirmModel, regulator: RegulatorModel, domain: Domain, threshold: f64) -> GovernanceScenario {
    GovernanceScenario {
        firm,
        regulator,
        domain,
        threshold,
        score_rule: ScoreRule::Max,
        reference_strategy: None,
        stringency_box: vec![(0.0, 1.0); CAPABILITY_DIMS],
        solver: GovernanceSolverConfig::default(),
    }
}

fn domain() -> impl Strategy<Value = Domain> {
    prop_oneof![Just(Domain::Civil), Just(Domain::SafetyCritical), Just(Domain::Military)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn capability_stays_in_unit_box(f in firm(3), pi in prop::collection::vec(0.0f64..=1.0, 3)) {
        let mu = capability(&f, &pi).unwrap();
        prop_assert!(mu.0.iter().all(|m| (0.0..=1.0).contains(m)));
    }

    #[test]
    fn compliance_cost_monotone(
        reg in regulator(),
        mu in unit6(),
        omega in unit6(),
        k in 0usize..CAPABILITY_DIMS,
        step in 0.0f64..0.5,
    ) {
        let base = compliance_cost(&reg, &CapabilityProfile(mu), &omega).unwrap();
        prop_assert!(base >= 0.0);
        let mut w = omega;
        w[k] = (w[k] + step).min(1.0);
        prop_assert!(compliance_cost(&reg, &CapabilityProfile(mu), &w).unwrap() >= base);
        let mut m = mu;
        m[k] = (m[k] + step).min(1.0);
        prop_assert!(compliance_cost(&reg, &CapabilityProfile(m), &omega).unwrap() >= base);
    }

    #[test]
    fn firm_return_non_increasing_in_stringency(
        f in firm(2),
        reg in regulator(),
        pi in prop::collection::vec(0.0f64..=1.0, 2),
        omega in unit6(),
        k in 0usize..CAPABILITY_DIMS,
        step in 0.0f64..0.5,
    ) {
        let s = scenario(f, reg, Domain::Civil, 0.5);
        let mut w = omega;
        w[k] = (w[k] + step).min(1.0);
        prop_assert!(firm_return(&s, &pi, &w).unwrap() <= firm_return(&s, &pi, &omega).unwrap() + 1e-12);
    }

    #[test]
    fn setting_rule_is_total(
        f in firm(2),
        reg in regulator(),
        d in domain(),
        threshold in 0.0f64..=1.0,
        rule in prop_oneof![Just(ScoreRule::Max), Just(ScoreRule::Mean)],
    ) {
        let mut s = scenario(f, reg, d, threshold);
        s.score_rule = rule;
        let a = select_setting(&s, None).unwrap();
        let below = a.capability_score < threshold;
        let expected = match (d, below) {
            (Domain::Civil, true) => (Role::Firm, Rationale::CivilBelowThreshold),
            (Domain::Civil, false) => (Role::Regulator, Rationale::CivilAboveThreshold),
            (_, true) => (Role::Regulator, Rationale::RestrictedBelowThreshold),
            (_, false) => (Role::Regulator, Rationale::RestrictedAboveThreshold),
        };
        prop_assert_eq!((a.leader, a.rationale), expected);
    }
}

fn scalar_firm() -> FirmModel {
    let mut matrix = vec![vec![0.0]; CAPABILITY_DIMS];
    matrix[0][0] = 1.0;
    FirmModel {
        capability_matrix: matrix,
        capability_offset: [0.0, 0.3, 0.3, 0.3, 0.3, 0.3],
        revenue_weights: [0.8, 0.0, 0.0, 0.0, 0.0, 0.0],
        effort_cost: 1.0,
    }
}

fn active_first(mut s: GovernanceScenario) -> GovernanceScenario {
    s.stringency_box = (0..CAPABILITY_DIMS).map(|i| if i == 0 { (0.0, 1.0) } else { (0.0, 0.0) }).collect();
    s
}

#[test]
fn harmless_capabilities_go_unregulated() {
    let reg = RegulatorModel {
        risk_weights: [0.0; CAPABILITY_DIMS],
        risk_exponents: [2.0; CAPABILITY_DIMS],
        compliance_costs: [1.0; CAPABILITY_DIMS],
        innovation_drag: 0.3,
    };
    for domain in [Domain::Civil, Domain::Military] {
        let s = active_first(scenario(scalar_firm(), reg.clone(), domain, 0.7));
        let a = select_setting(&s, None).unwrap();
        let r = solve_governance(&s, &a).unwrap();
        assert!(r.omega.iter().all(|&w| w.abs() < 1e-9), "{domain:?}: {:?}", r.omega);
        assert!(r.diagnostics.converged);
    }
}

#[test]
fn follower_regulator_uses_sign_rule() {
    // With the firm leading, L is affine in each omega_i, so the regulator
    // sets omega_i to 1 exactly when gamma_i mu_i^p_i exceeds eta. The
    // parameters keep the firm's optimum away from the indifference point.
    for (gamma, eta, kappa) in [(1.0, 0.3, 1.0), (0.5, 0.4, 1.0), (5.0, 0.05, 0.2), (4.0, 0.1, 0.3)] {
        let reg = RegulatorModel {
            risk_weights: [gamma, 0.0, 0.0, 0.0, 0.0, 0.0],
            risk_exponents: [2.0; CAPABILITY_DIMS],
            compliance_costs: [kappa, 0.0, 0.0, 0.0, 0.0, 0.0],
            innovation_drag: eta,
        };
        let s = active_first(scenario(scalar_firm(), reg, Domain::Civil, 0.7));
        let a = select_setting(&s, None).unwrap();
        assert_eq!(a.leader, Role::Firm);
        let r = solve_governance(&s, &a).unwrap();
        let mu = r.capability.0[0];
        assert!((gamma * mu * mu - eta).abs() > 0.02);
        let expected = if gamma * mu * mu > eta { 1.0 } else { 0.0 };
        assert!((r.omega[0] - expected).abs() < 1e-9, "gamma {gamma}, eta {eta}: mu {mu}, omega {:?}", r.omega);
        let flipped: Vec<f64> = r.omega.iter().enumerate().map(|(i, &w)| if i == 0 { 1.0 - w } else { w }).collect();
        assert!(regulator_loss(&s, &r.pi, &r.omega).unwrap() <= regulator_loss(&s, &r.pi, &flipped).unwrap() + 1e-12);
    }
}
