//! Empirical Tonelli constants: fiber-Hessian bounds (m̂, M̂) from
//! finite-difference Rayleigh quotients and the quadratic-growth defect
//! b̂ such that m̂/4·‖v‖² − b̂ ≤ L(e,v) ≤ M̂/4·‖v‖² + b̂ on sampled speeds.

use tonelli_flows::lagrangian::{check_growth, check_tonelli};
use tonelli_flows::{AlgebraVector, InertiaOperator, LagrangianSpec};

fn main() {
    let specs: Vec<(&str, LagrangianSpec)> = vec![
        ("u1 kinetic", LagrangianSpec::kinetic(InertiaOperator::u1(1.0))),
        ("so3 kinetic diag(1,2,3)", LagrangianSpec::kinetic(InertiaOperator::so3([1.0, 2.0, 3.0]))),
        ("diff_s1 H¹ (N = 32)", LagrangianSpec::kinetic(InertiaOperator::diff_s1(32, 1.0))),
        (
            "u1 electromagnetic θ = 0.7, V0 = 2",
            LagrangianSpec::electromagnetic(InertiaOperator::u1(1.0), AlgebraVector::U1(0.7), 2.0),
        ),
        (
            "u1 quartic ε = 0.1",
            LagrangianSpec::kinetic(InertiaOperator::u1(1.0)).with_quartic(0.1),
        ),
    ];

    for (name, spec) in &specs {
        let (m_hat, big_m) = check_tonelli(spec, 100, 0).expect("Tonelli bounds");
        let b_hat = check_growth(spec, m_hat, big_m, 100, 1);
        println!("{name}");
        println!("  m_hat = {m_hat:.6},  M_hat = {big_m:.6},  b_hat = {b_hat:.6}");
        assert!(m_hat > 0.0, "fiberwise convexity should hold");
    }
}
