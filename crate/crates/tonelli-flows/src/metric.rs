//! Strong right-invariant metric data: the inertia operator A_s, the L²
//! pairing it induces, and the adjoint operators ad / ad* of the three
//! algebra instances.

use crate::group::{AlgebraVector, Variant};
use crate::spectral::{self, coeff_len};

/// Element of T*_eG identified with T_eG through the L² pairing; payload
/// shape matches [`AlgebraVector`].
pub type MomentumVector = AlgebraVector;

/// Inertia operator defining the metric at the identity: a positive mass
/// (U1), a positive-definite diagonal inertia tensor (SO3), or the spectral
/// symbol (1+k²)^s (DiffS1).
#[derive(Debug, Clone)]
pub enum InertiaOperator {
    U1 { mass: f64 },
    So3 { diag: [f64; 3] },
    DiffS1 { n_modes: usize, order: f64, symbol: Vec<f64> },
}

impl InertiaOperator {
    pub fn u1(mass: f64) -> InertiaOperator {
        assert!(mass > 0.0, "mass must be positive");
        InertiaOperator::U1 { mass }
    }

    pub fn so3(diag: [f64; 3]) -> InertiaOperator {
        assert!(diag.iter().all(|&d| d > 0.0), "inertia tensor entries must be positive");
        InertiaOperator::So3 { diag }
    }

    pub fn diff_s1(n_modes: usize, order: f64) -> InertiaOperator {
        assert!(n_modes >= 2);
        assert!(order >= 0.0, "Sobolev order must be nonnegative");
        // per-coefficient symbol table, built once
        let mut symbol = vec![1.0; coeff_len(n_modes)];
        for k in 1..n_modes {
            let s = (1.0 + (k * k) as f64).powf(order);
            symbol[2 * k - 1] = s;
            symbol[2 * k] = s;
        }
        InertiaOperator::DiffS1 { n_modes, order, symbol }
    }

    pub fn variant(&self) -> Variant {
        match self {
            InertiaOperator::U1 { .. } => Variant::U1,
            InertiaOperator::So3 { .. } => Variant::So3,
            InertiaOperator::DiffS1 { .. } => Variant::DiffS1,
        }
    }

    /// Smallest eigenvalue of the symbol (L² Rayleigh bound m).
    pub fn symbol_min(&self) -> f64 {
        match self {
            InertiaOperator::U1 { mass } => *mass,
            InertiaOperator::So3 { diag } => diag.iter().cloned().fold(f64::INFINITY, f64::min),
            InertiaOperator::DiffS1 { symbol, .. } => {
                symbol.iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Largest eigenvalue of the symbol (L² Rayleigh bound M).
    pub fn symbol_max(&self) -> f64 {
        match self {
            InertiaOperator::U1 { mass } => *mass,
            InertiaOperator::So3 { diag } => diag.iter().cloned().fold(0.0, f64::max),
            InertiaOperator::DiffS1 { symbol, .. } => symbol.iter().cloned().fold(0.0, f64::max),
        }
    }

    pub fn zero_vector(&self) -> AlgebraVector {
        match self {
            InertiaOperator::U1 { .. } => AlgebraVector::U1(0.0),
            InertiaOperator::So3 { .. } => AlgebraVector::So3([0.0; 3]),
            InertiaOperator::DiffS1 { n_modes, .. } => AlgebraVector::zero_diff_s1(*n_modes),
        }
    }
}

/// m = A_s v.
pub fn inertia_apply(op: &InertiaOperator, v: &AlgebraVector) -> MomentumVector {
    match (op, v) {
        (InertiaOperator::U1 { mass }, AlgebraVector::U1(x)) => AlgebraVector::U1(mass * x),
        (InertiaOperator::So3 { diag }, AlgebraVector::So3(w)) => {
            AlgebraVector::So3([diag[0] * w[0], diag[1] * w[1], diag[2] * w[2]])
        }
        (InertiaOperator::DiffS1 { n_modes, symbol, .. }, AlgebraVector::DiffS1 { n_modes: nm, coeffs }) => {
            assert_eq!(n_modes, nm);
            AlgebraVector::DiffS1 {
                n_modes: *n_modes,
                coeffs: coeffs.iter().zip(symbol).map(|(c, s)| c * s).collect(),
            }
        }
        _ => panic!("variant mismatch in inertia_apply"),
    }
}

/// v = A_s⁻¹ m (diagonal spectral inversion).
pub fn inertia_solve(op: &InertiaOperator, m: &MomentumVector) -> AlgebraVector {
    match (op, m) {
        (InertiaOperator::U1 { mass }, AlgebraVector::U1(x)) => AlgebraVector::U1(x / mass),
        (InertiaOperator::So3 { diag }, AlgebraVector::So3(w)) => {
            AlgebraVector::So3([w[0] / diag[0], w[1] / diag[1], w[2] / diag[2]])
        }
        (InertiaOperator::DiffS1 { n_modes, symbol, .. }, AlgebraVector::DiffS1 { n_modes: nm, coeffs }) => {
            assert_eq!(n_modes, nm);
            AlgebraVector::DiffS1 {
                n_modes: *n_modes,
                coeffs: coeffs.iter().zip(symbol).map(|(c, s)| c / s).collect(),
            }
        }
        _ => panic!("variant mismatch in inertia_solve"),
    }
}

/// ⟨A_s v, w⟩ in the L² pairing; symmetric and bilinear.
pub fn inner(op: &InertiaOperator, v: &AlgebraVector, w: &AlgebraVector) -> f64 {
    inertia_apply(op, v).l2_pairing(w)
}

/// ‖v‖ in the metric induced by the inertia operator.
pub fn metric_norm(op: &InertiaOperator, v: &AlgebraVector) -> f64 {
    inner(op, v, v).max(0.0).sqrt()
}

/// Lie-algebra adjoint: 0 (U1), cross product (SO3), or the vector-field
/// bracket ad_u v = u v' − v u' computed with dealiased products (DiffS1).
pub fn ad(u: &AlgebraVector, v: &AlgebraVector) -> AlgebraVector {
    match (u, v) {
        (AlgebraVector::U1(_), AlgebraVector::U1(_)) => AlgebraVector::U1(0.0),
        (AlgebraVector::So3(a), AlgebraVector::So3(b)) => AlgebraVector::So3(cross(*a, *b)),
        (
            AlgebraVector::DiffS1 { n_modes, coeffs: uc },
            AlgebraVector::DiffS1 { n_modes: nm, coeffs: vc },
        ) => {
            assert_eq!(n_modes, nm);
            let ctx = spectral::ctx(*n_modes);
            let du = spectral::derivative(uc);
            let dv = spectral::derivative(vc);
            let t1 = ctx.product(uc, &dv);
            let t2 = ctx.product(vc, &du);
            AlgebraVector::DiffS1 {
                n_modes: *n_modes,
                coeffs: t1.iter().zip(&t2).map(|(a, b)| a - b).collect(),
            }
        }
        _ => panic!("variant mismatch in ad"),
    }
}

/// Coadjoint operator fixed by the pairing identity
/// ⟨ad*_u m, v⟩_{L²} = ⟨m, ad_u v⟩_{L²}; closed forms are m × u (SO3) and
/// −(u m' + 2 u' m) (DiffS1).
pub fn ad_star(u: &AlgebraVector, m: &MomentumVector) -> MomentumVector {
    match (u, m) {
        (AlgebraVector::U1(_), AlgebraVector::U1(_)) => AlgebraVector::U1(0.0),
        (AlgebraVector::So3(w), AlgebraVector::So3(mm)) => AlgebraVector::So3(cross(*mm, *w)),
        (
            AlgebraVector::DiffS1 { n_modes, coeffs: uc },
            AlgebraVector::DiffS1 { n_modes: nm, coeffs: mc },
        ) => {
            assert_eq!(n_modes, nm);
            let ctx = spectral::ctx(*n_modes);
            let dm = spectral::derivative(mc);
            let du = spectral::derivative(uc);
            let t1 = ctx.product(uc, &dm);
            let t2 = ctx.product(&du, mc);
            AlgebraVector::DiffS1 {
                n_modes: *n_modes,
                coeffs: t1.iter().zip(&t2).map(|(a, b)| -(a + 2.0 * b)).collect(),
            }
        }
        _ => panic!("variant mismatch in ad_star"),
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
