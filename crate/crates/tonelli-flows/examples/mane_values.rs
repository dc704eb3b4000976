//! Mañé critical values for a magnetic Lagrangian on U(1):
//! L = ½u² − s₀u. Loops with positive winding extract work from the
//! magnetic term, so c = s₀²/2 > 0, while contractible loops cannot:
//! c_u = 0. The ordering chain min E ≤ e₀ ≤ c_u ≤ c₀ ≤ c is verified.

use tonelli_flows::mane::{default_mane_options, e0, estimate_c, verify_chain, TopoClass};
use tonelli_flows::{AlgebraVector, InertiaOperator, LagrangianSpec};

fn main() {
    let s0 = 0.7;
    let spec =
        LagrangianSpec::electromagnetic(InertiaOperator::u1(1.0), AlgebraVector::U1(s0), 0.0);
    let opts = default_mane_options();

    let c_u = estimate_c(&spec, TopoClass::Contractible, &opts).expect("c_u");
    let c_0 = estimate_c(&spec, TopoClass::NullHomologous, &opts).expect("c_0");
    let c = estimate_c(&spec, TopoClass::Any, &opts).expect("c");

    println!("U(1), θ = {s0}:");
    println!("  e0  = {:.6}", e0(&spec));
    println!("  c_u = {:.6}", c_u.value);
    println!("  c0  = {:.6}", c_0.value);
    println!("  c   = {:.6}   (closed form s0²/2 = {:.6})", c.value, s0 * s0 / 2.0);
    println!(
        "  best loop: winding {}, period {:.4}, mean action {:.6}",
        c.winding, c.loop_path.period, c.mean_action
    );

    let chain = verify_chain(&spec, &c_u, &c_0, &c, 1e-3).expect("chain");
    println!("  chain min E ≤ e₀ ≤ c_u ≤ c₀ ≤ c : {:?}  ok = {}", chain.values, chain.ok);
    assert!((c.value - s0 * s0 / 2.0).abs() < 1e-3);
}
