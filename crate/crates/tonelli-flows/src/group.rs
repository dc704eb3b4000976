//! Concrete group instances: U(1), SO(3) as unit quaternions, and a
//! Fourier-truncated model of Diff(S¹) stored as periodic displacement
//! fields. Provides composition, inversion, right-trivialization of
//! velocities and the evolution map from algebra-valued velocity paths to
//! group paths.

use crate::spectral::{self, coeff_len};
use std::f64::consts::PI;
use thiserror::Error;

pub const ORIENTATION_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    U1,
    So3,
    DiffS1,
}

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("variant mismatch: {0:?} vs {1:?}")]
    VariantMismatch(Variant, Variant),
    #[error("orientation invariant violated: min(1 + f') = {0:.3e}")]
    OrientationLost(f64),
    #[error("truncation mismatch: {0} vs {1} modes")]
    TruncationMismatch(usize, usize),
}

/// Unit quaternion (w, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn mul(self, o: Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn conj(self) -> Quat {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Quat {
        let n = self.norm();
        Quat { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    /// exp(θ/2) for rotation vector θ; the quaternion representing that rotation.
    pub fn from_rotation_vector(v: [f64; 3]) -> Quat {
        let angle = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if angle < 1e-300 {
            return Quat::IDENTITY;
        }
        let (s, c) = ((angle / 2.0).sin(), (angle / 2.0).cos());
        let k = s / angle;
        Quat { w: c, x: k * v[0], y: k * v[1], z: k * v[2] }
    }

    /// Rotation vector with angle in [0, 2π); does not identify q with -q,
    /// so the quaternion lift (homotopy class marker) is preserved.
    pub fn rotation_vector_lifted(self) -> [f64; 3] {
        let vn = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        let angle = 2.0 * vn.atan2(self.w);
        if vn < 1e-300 {
            return [0.0, 0.0, 0.0];
        }
        let k = angle / vn;
        [k * self.x, k * self.y, k * self.z]
    }

    /// Apply the rotation to a 3-vector.
    pub fn rotate(self, v: [f64; 3]) -> [f64; 3] {
        let p = Quat { w: 0.0, x: v[0], y: v[1], z: v[2] };
        let r = self.mul(p).mul(self.conj());
        [r.x, r.y, r.z]
    }
}

/// A configuration point in one of the three instances.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    /// Angle in [0, 2π).
    U1(f64),
    /// Unit quaternion.
    So3(Quat),
    /// Periodic displacement field φ(x) − x as real Fourier coefficients.
    DiffS1 { n_modes: usize, coeffs: Vec<f64> },
}

/// A right-trivialized velocity ξ ∈ T_eG.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgebraVector {
    U1(f64),
    So3([f64; 3]),
    DiffS1 { n_modes: usize, coeffs: Vec<f64> },
}

/// A raw tangent vector at a group element, expressed in the instance's
/// coordinate chart: angle rate, quaternion derivative, or the time
/// derivative of the displacement field.
#[derive(Debug, Clone)]
pub enum TangentVector {
    U1(f64),
    So3Quat([f64; 4]),
    DiffS1 { n_modes: usize, coeffs: Vec<f64> },
}

fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r == 2.0 * PI {
        0.0
    } else {
        r
    }
}

/// Wrap to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

impl GroupElement {
    pub fn u1(angle: f64) -> GroupElement {
        GroupElement::U1(reduce_angle(angle))
    }

    pub fn identity_like(&self) -> GroupElement {
        match self {
            GroupElement::U1(_) => GroupElement::U1(0.0),
            GroupElement::So3(_) => GroupElement::So3(Quat::IDENTITY),
            GroupElement::DiffS1 { n_modes, .. } => GroupElement::identity_diff_s1(*n_modes),
        }
    }

    pub fn identity_diff_s1(n_modes: usize) -> GroupElement {
        GroupElement::DiffS1 { n_modes, coeffs: vec![0.0; coeff_len(n_modes)] }
    }

    pub fn variant(&self) -> Variant {
        match self {
            GroupElement::U1(_) => Variant::U1,
            GroupElement::So3(_) => Variant::So3,
            GroupElement::DiffS1 { .. } => Variant::DiffS1,
        }
    }
}

impl AlgebraVector {
    pub fn zero_like(&self) -> AlgebraVector {
        match self {
            AlgebraVector::U1(_) => AlgebraVector::U1(0.0),
            AlgebraVector::So3(_) => AlgebraVector::So3([0.0; 3]),
            AlgebraVector::DiffS1 { n_modes, .. } => AlgebraVector::zero_diff_s1(*n_modes),
        }
    }

    pub fn zero_diff_s1(n_modes: usize) -> AlgebraVector {
        AlgebraVector::DiffS1 { n_modes, coeffs: vec![0.0; coeff_len(n_modes)] }
    }

    pub fn variant(&self) -> Variant {
        match self {
            AlgebraVector::U1(_) => Variant::U1,
            AlgebraVector::So3(_) => Variant::So3,
            AlgebraVector::DiffS1 { .. } => Variant::DiffS1,
        }
    }

    pub fn scale(&self, s: f64) -> AlgebraVector {
        match self {
            AlgebraVector::U1(v) => AlgebraVector::U1(v * s),
            AlgebraVector::So3(v) => AlgebraVector::So3([v[0] * s, v[1] * s, v[2] * s]),
            AlgebraVector::DiffS1 { n_modes, coeffs } => AlgebraVector::DiffS1 {
                n_modes: *n_modes,
                coeffs: coeffs.iter().map(|c| c * s).collect(),
            },
        }
    }

    pub fn add(&self, other: &AlgebraVector) -> AlgebraVector {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &AlgebraVector) -> AlgebraVector {
        self.axpy(-1.0, other)
    }

    /// self + a * other
    pub fn axpy(&self, a: f64, other: &AlgebraVector) -> AlgebraVector {
        match (self, other) {
            (AlgebraVector::U1(v), AlgebraVector::U1(w)) => AlgebraVector::U1(v + a * w),
            (AlgebraVector::So3(v), AlgebraVector::So3(w)) => {
                AlgebraVector::So3([v[0] + a * w[0], v[1] + a * w[1], v[2] + a * w[2]])
            }
            (
                AlgebraVector::DiffS1 { n_modes, coeffs },
                AlgebraVector::DiffS1 { n_modes: nm2, coeffs: c2 },
            ) => {
                assert_eq!(n_modes, nm2);
                AlgebraVector::DiffS1 {
                    n_modes: *n_modes,
                    coeffs: coeffs.iter().zip(c2).map(|(x, y)| x + a * y).collect(),
                }
            }
            _ => panic!("variant mismatch in axpy"),
        }
    }

    /// L²(S¹) pairing (Euclidean pairing on U1/SO3).
    pub fn l2_pairing(&self, other: &AlgebraVector) -> f64 {
        match (self, other) {
            (AlgebraVector::U1(v), AlgebraVector::U1(w)) => v * w,
            (AlgebraVector::So3(v), AlgebraVector::So3(w)) => {
                v[0] * w[0] + v[1] * w[1] + v[2] * w[2]
            }
            (
                AlgebraVector::DiffS1 { coeffs, .. },
                AlgebraVector::DiffS1 { coeffs: c2, .. },
            ) => spectral::l2_inner(coeffs, c2),
            _ => panic!("variant mismatch in l2_pairing"),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_pairing(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        match self {
            AlgebraVector::U1(v) => v.is_finite(),
            AlgebraVector::So3(v) => v.iter().all(|x| x.is_finite()),
            AlgebraVector::DiffS1 { coeffs, .. } => coeffs.iter().all(|x| x.is_finite()),
        }
    }
}

/// Group law μ(a, b); for DiffS1 the composition φ_a ∘ φ_b is evaluated by
/// trigonometric interpolation of a at the warped nodes of b and
/// re-projected onto the retained modes.
pub fn compose(a: &GroupElement, b: &GroupElement) -> Result<GroupElement, GroupError> {
    match (a, b) {
        (GroupElement::U1(x), GroupElement::U1(y)) => Ok(GroupElement::u1(x + y)),
        (GroupElement::So3(p), GroupElement::So3(q)) => {
            Ok(GroupElement::So3(p.mul(*q).normalized()))
        }
        (
            GroupElement::DiffS1 { n_modes, coeffs: fa },
            GroupElement::DiffS1 { n_modes: nm2, coeffs: fb },
        ) => {
            if n_modes != nm2 {
                return Err(GroupError::TruncationMismatch(*n_modes, *nm2));
            }
            let ctx = spectral::ctx(*n_modes);
            let fb_grid = ctx.to_grid(fb);
            let nodes = ctx.nodes();
            // (φ_a ∘ φ_b)(x) - x = f_b(x) + f_a(x + f_b(x))
            let grid: Vec<f64> = nodes
                .iter()
                .zip(&fb_grid)
                .map(|(&x, &fbx)| fbx + spectral::eval_at(fa, x + fbx))
                .collect();
            let coeffs = ctx.from_grid(&grid);
            let jac = spectral::min_jacobian(&ctx, &coeffs);
            if jac <= ORIENTATION_THRESHOLD {
                return Err(GroupError::OrientationLost(jac));
            }
            Ok(GroupElement::DiffS1 { n_modes: *n_modes, coeffs })
        }
        _ => Err(GroupError::VariantMismatch(a.variant(), b.variant())),
    }
}

pub fn inverse(a: &GroupElement) -> Result<GroupElement, GroupError> {
    match a {
        GroupElement::U1(x) => Ok(GroupElement::u1(-x)),
        GroupElement::So3(q) => Ok(GroupElement::So3(q.conj())),
        GroupElement::DiffS1 { n_modes, coeffs } => {
            let ctx = spectral::ctx(*n_modes);
            let inv = spectral::invert_diffeo(&ctx, coeffs, ORIENTATION_THRESHOLD)
                .ok_or_else(|| GroupError::OrientationLost(spectral::min_jacobian(&ctx, coeffs)))?;
            Ok(GroupElement::DiffS1 { n_modes: *n_modes, coeffs: inv })
        }
    }
}

/// ξ = (dμ^{x⁻¹}) ẋ: map a raw tangent at x to the right-trivialized
/// velocity at the identity.
pub fn right_trivialize(
    x: &GroupElement,
    xdot: &TangentVector,
) -> Result<AlgebraVector, GroupError> {
    match (x, xdot) {
        (GroupElement::U1(_), TangentVector::U1(v)) => Ok(AlgebraVector::U1(*v)),
        (GroupElement::So3(q), TangentVector::So3Quat(dq)) => {
            // q̇ = ½ ω ⊗ q  ⇒  ω = 2 q̇ ⊗ q⁻¹
            let dq = Quat { w: dq[0], x: dq[1], y: dq[2], z: dq[3] };
            let w = dq.mul(q.conj());
            Ok(AlgebraVector::So3([2.0 * w.x, 2.0 * w.y, 2.0 * w.z]))
        }
        (
            GroupElement::DiffS1 { n_modes, coeffs },
            TangentVector::DiffS1 { n_modes: nm2, coeffs: fdot },
        ) => {
            if n_modes != nm2 {
                return Err(GroupError::TruncationMismatch(*n_modes, *nm2));
            }
            // ẋ = u ∘ φ, so u = ẋ ∘ φ⁻¹.
            let ctx = spectral::ctx(*n_modes);
            let inv = spectral::invert_diffeo(&ctx, coeffs, ORIENTATION_THRESHOLD)
                .ok_or_else(|| GroupError::OrientationLost(spectral::min_jacobian(&ctx, coeffs)))?;
            let nodes = ctx.nodes();
            let grid: Vec<f64> = nodes
                .iter()
                .map(|&y| {
                    let x_pre = y + spectral::eval_at(&inv, y);
                    spectral::eval_at(fdot, x_pre)
                })
                .collect();
            Ok(AlgebraVector::DiffS1 { n_modes: *n_modes, coeffs: ctx.from_grid(&grid) })
        }
        _ => Err(GroupError::VariantMismatch(x.variant(), Variant::U1)),
    }
}

/// Path of group elements produced by the evolution map.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    /// Group path at the integration nodes, starting at the identity.
    pub path: Vec<GroupElement>,
    /// Terminal element.
    pub terminal: GroupElement,
    /// Max per-step defect from step-doubling comparison (0 when disabled).
    pub defect: f64,
}

/// Chart-level state used inside the evolution integrator. For U1 the angle
/// is kept unreduced so winding information survives; DiffS1 keeps its mean
/// displacement unreduced for the same reason.
#[derive(Clone)]
pub(crate) enum ChartState {
    U1(f64),
    So3(Quat),
    DiffS1(Vec<f64>),
}

impl ChartState {
    pub(crate) fn from_element(x: &GroupElement) -> ChartState {
        match x {
            GroupElement::U1(a) => ChartState::U1(*a),
            GroupElement::So3(q) => ChartState::So3(*q),
            GroupElement::DiffS1 { coeffs, .. } => ChartState::DiffS1(coeffs.clone()),
        }
    }

    pub(crate) fn from_identity(v: &AlgebraVector) -> ChartState {
        match v {
            AlgebraVector::U1(_) => ChartState::U1(0.0),
            AlgebraVector::So3(_) => ChartState::So3(Quat::IDENTITY),
            AlgebraVector::DiffS1 { n_modes, .. } => {
                ChartState::DiffS1(vec![0.0; coeff_len(*n_modes)])
            }
        }
    }

    pub(crate) fn to_element(&self, n_modes: usize) -> GroupElement {
        match self {
            ChartState::U1(a) => GroupElement::u1(*a),
            ChartState::So3(q) => GroupElement::So3(*q),
            ChartState::DiffS1(c) => GroupElement::DiffS1 { n_modes, coeffs: c.clone() },
        }
    }

    /// Unreduced-chart element (U1 angle and DiffS1 mean mode kept as lifts).
    pub(crate) fn to_lifted_element(&self, n_modes: usize) -> GroupElement {
        match self {
            ChartState::U1(a) => GroupElement::U1(*a),
            _ => self.to_element(n_modes),
        }
    }
}

/// d(chart)/dt for ġ = (dμ_g at e) ξ.
pub(crate) fn chart_derivative(state: &ChartState, xi: &AlgebraVector) -> Result<ChartState, GroupError> {
    match (state, xi) {
        (ChartState::U1(_), AlgebraVector::U1(v)) => Ok(ChartState::U1(*v)),
        (ChartState::So3(q), AlgebraVector::So3(w)) => {
            let wq = Quat { w: 0.0, x: w[0], y: w[1], z: w[2] };
            let dq = wq.mul(*q);
            Ok(ChartState::So3(Quat { w: 0.5 * dq.w, x: 0.5 * dq.x, y: 0.5 * dq.y, z: 0.5 * dq.z }))
        }
        (ChartState::DiffS1(f), AlgebraVector::DiffS1 { n_modes, coeffs: u }) => {
            let ctx = spectral::ctx(*n_modes);
            let jac = spectral::min_jacobian(&ctx, f);
            if jac <= ORIENTATION_THRESHOLD {
                return Err(GroupError::OrientationLost(jac));
            }
            // φ̇(x) = u(x + f(x))
            let f_grid = ctx.to_grid(f);
            let grid: Vec<f64> = ctx
                .nodes()
                .iter()
                .zip(&f_grid)
                .map(|(&x, &fx)| spectral::eval_at(u, x + fx))
                .collect();
            Ok(ChartState::DiffS1(ctx.from_grid(&grid)))
        }
        _ => panic!("variant mismatch in chart_derivative"),
    }
}

pub(crate) fn chart_axpy(a: &ChartState, s: f64, b: &ChartState) -> ChartState {
    match (a, b) {
        (ChartState::U1(x), ChartState::U1(y)) => ChartState::U1(x + s * y),
        (ChartState::So3(p), ChartState::So3(q)) => ChartState::So3(Quat {
            w: p.w + s * q.w,
            x: p.x + s * q.x,
            y: p.y + s * q.y,
            z: p.z + s * q.z,
        }),
        (ChartState::DiffS1(f), ChartState::DiffS1(g)) => {
            ChartState::DiffS1(f.iter().zip(g).map(|(x, y)| x + s * y).collect())
        }
        _ => panic!("variant mismatch in chart_axpy"),
    }
}

pub(crate) fn chart_renorm(s: ChartState) -> ChartState {
    match s {
        ChartState::So3(q) => ChartState::So3(q.normalized()),
        other => other,
    }
}

fn chart_dist(a: &ChartState, b: &ChartState) -> f64 {
    match (a, b) {
        (ChartState::U1(x), ChartState::U1(y)) => (x - y).abs(),
        (ChartState::So3(p), ChartState::So3(q)) => Quat {
            w: p.w - q.w,
            x: p.x - q.x,
            y: p.y - q.y,
            z: p.z - q.z,
        }
        .norm(),
        (ChartState::DiffS1(f), ChartState::DiffS1(g)) => f
            .iter()
            .zip(g)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        _ => panic!("variant mismatch in chart_dist"),
    }
}

/// 4-point Lagrange interpolation of a uniformly sampled algebra path on
/// [0, 1]; s outside node range is clamped.
pub fn interp_path(samples: &[AlgebraVector], s: f64) -> AlgebraVector {
    let n = samples.len();
    assert!(n >= 1);
    if n == 1 {
        return samples[0].clone();
    }
    if n < 4 {
        // linear fallback
        let t = s.clamp(0.0, 1.0) * (n - 1) as f64;
        let i = (t.floor() as usize).min(n - 2);
        let f = t - i as f64;
        return samples[i].scale(1.0 - f).axpy(f, &samples[i + 1]);
    }
    let t = s.clamp(0.0, 1.0) * (n - 1) as f64;
    let i0 = (t.floor() as usize).min(n - 2).saturating_sub(1).min(n - 4);
    let mut out = samples[i0].zero_like();
    for j in 0..4 {
        let xj = (i0 + j) as f64;
        let mut w = 1.0;
        for l in 0..4 {
            if l != j {
                let xl = (i0 + l) as f64;
                w *= (t - xl) / (xj - xl);
            }
        }
        out = out.axpy(w, &samples[i0 + j]);
    }
    out
}

/// Piecewise-linear interpolation of a uniformly sampled algebra path on
/// [0, 1]; s outside node range is clamped.
pub fn interp_path_linear(samples: &[AlgebraVector], s: f64) -> AlgebraVector {
    let n = samples.len();
    assert!(n >= 1);
    if n == 1 {
        return samples[0].clone();
    }
    let t = s.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (t.floor() as usize).min(n - 2);
    let f = t - i as f64;
    samples[i].scale(1.0 - f).axpy(f, &samples[i + 1])
}

/// Solve ġ = (dμ_g at e) ξ(t) from the identity over [0, horizon] with a
/// classical 4th-order one-step method. `xi_path` holds uniform samples of
/// ξ over the horizon (endpoints included); `steps` is the number of RK4
/// steps. When `estimate_defect` is set, each step is re-done with two half
/// steps and the max discrepancy is reported.
pub fn evolve(
    xi_path: &[AlgebraVector],
    horizon: f64,
    steps: usize,
    estimate_defect: bool,
) -> Result<EvolutionResult, GroupError> {
    evolve_with(xi_path, horizon, steps, estimate_defect, false)
}

/// Like [`evolve`], but over the piecewise-linear interpolant of the node
/// values, with steps rounded up to align with the node intervals. The
/// direct-method solver uses this: its per-node sensitivities then match
/// trapezoidal quadrature weights exactly, which higher-order interpolation
/// does not guarantee.
pub fn evolve_linear(
    xi_path: &[AlgebraVector],
    horizon: f64,
    steps: usize,
    estimate_defect: bool,
) -> Result<EvolutionResult, GroupError> {
    let intervals = xi_path.len().saturating_sub(1).max(1);
    let per = (steps.max(1) + intervals - 1) / intervals;
    evolve_with(xi_path, horizon, per * intervals, estimate_defect, true)
}

fn evolve_with(
    xi_path: &[AlgebraVector],
    horizon: f64,
    steps: usize,
    estimate_defect: bool,
    linear: bool,
) -> Result<EvolutionResult, GroupError> {
    assert!(horizon > 0.0, "horizon must be positive");
    assert!(!xi_path.is_empty());
    assert!(xi_path.iter().all(|v| v.is_finite()), "xi path must be finite");
    let n_modes = match &xi_path[0] {
        AlgebraVector::DiffS1 { n_modes, .. } => *n_modes,
        _ => 0,
    };
    let steps = steps.max(1);
    let h = horizon / steps as f64;
    let xi_at = |t: f64| {
        if linear {
            interp_path_linear(xi_path, t / horizon)
        } else {
            interp_path(xi_path, t / horizon)
        }
    };

    let rk4_step = |state: &ChartState, t: f64, h: f64| -> Result<ChartState, GroupError> {
        let k1 = chart_derivative(state, &xi_at(t))?;
        let k2 = chart_derivative(&chart_axpy(state, h / 2.0, &k1), &xi_at(t + h / 2.0))?;
        let k3 = chart_derivative(&chart_axpy(state, h / 2.0, &k2), &xi_at(t + h / 2.0))?;
        let k4 = chart_derivative(&chart_axpy(state, h, &k3), &xi_at(t + h))?;
        let mut next = chart_axpy(state, h / 6.0, &k1);
        next = chart_axpy(&next, h / 3.0, &k2);
        next = chart_axpy(&next, h / 3.0, &k3);
        next = chart_axpy(&next, h / 6.0, &k4);
        Ok(chart_renorm(next))
    };

    let mut state = ChartState::from_identity(&xi_path[0]);
    let mut path = Vec::with_capacity(steps + 1);
    path.push(state.to_element(n_modes));
    let mut defect = 0.0_f64;
    for i in 0..steps {
        let t = i as f64 * h;
        let next = rk4_step(&state, t, h)?;
        if estimate_defect {
            let half = rk4_step(&state, t, h / 2.0)?;
            let half2 = rk4_step(&half, t + h / 2.0, h / 2.0)?;
            defect = defect.max(chart_dist(&next, &half2));
        }
        state = next;
        path.push(state.to_element(n_modes));
    }
    let terminal = state.to_lifted_element(n_modes);
    Ok(EvolutionResult { path, terminal, defect })
}

/// Algebra-valued chart defect between `a` and `target`: wrapped angle
/// difference, lifted rotation vector of the relative quaternion, or the
/// displacement-coefficient difference (mean mode wrapped to (-π, π]).
pub fn chart_defect(a: &GroupElement, target: &GroupElement) -> Result<AlgebraVector, GroupError> {
    match (a, target) {
        (GroupElement::U1(x), GroupElement::U1(y)) => Ok(AlgebraVector::U1(wrap_angle(x - y))),
        (GroupElement::So3(p), GroupElement::So3(q)) => {
            let rel = p.mul(q.conj());
            let rel = if rel.w < 0.0 { Quat { w: -rel.w, x: -rel.x, y: -rel.y, z: -rel.z } } else { rel };
            Ok(AlgebraVector::So3(rel.rotation_vector_lifted()))
        }
        (
            GroupElement::DiffS1 { n_modes, coeffs },
            GroupElement::DiffS1 { n_modes: nm2, coeffs: c2 },
        ) => {
            if n_modes != nm2 {
                return Err(GroupError::TruncationMismatch(*n_modes, *nm2));
            }
            let mut d: Vec<f64> = coeffs.iter().zip(c2).map(|(x, y)| x - y).collect();
            d[0] = wrap_angle(d[0]);
            Ok(AlgebraVector::DiffS1 { n_modes: *n_modes, coeffs: d })
        }
        _ => Err(GroupError::VariantMismatch(a.variant(), target.variant())),
    }
}

/// Group distance used for constraint defects: L² norm of the chart defect.
pub fn distance(a: &GroupElement, b: &GroupElement) -> Result<f64, GroupError> {
    Ok(chart_defect(a, b)?.l2_norm())
}
