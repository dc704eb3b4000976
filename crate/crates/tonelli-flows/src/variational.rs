//! Time-free action functional on trivialized velocity paths, its analytic
//! differential, and a direct-method solver for two-point connecting
//! trajectories: augmented-Lagrangian outer loop on the terminal defect,
//! L-BFGS inner loop over the node values and the free period.

use crate::group::{self, AlgebraVector, GroupElement, Variant};
use crate::lagrangian::{self, LagrangianSpec};
use crate::metric::{self, MomentumVector};
use crate::spectral;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

/// Trivialized velocity path ξ: [0,1] → T_eG on uniform nodes, with a free
/// period T > 0.
#[derive(Debug, Clone)]
pub struct DiscretizedPath {
    pub xi: Vec<AlgebraVector>,
    pub period: f64,
}

impl DiscretizedPath {
    pub fn new(xi: Vec<AlgebraVector>, period: f64) -> DiscretizedPath {
        assert!(period > 0.0, "period must be positive");
        assert!(xi.len() >= 8, "need at least 8 path nodes");
        assert!(xi.iter().all(|v| v.is_finite()));
        DiscretizedPath { xi, period }
    }

    pub fn constant(value: &AlgebraVector, n_nodes: usize, period: f64) -> DiscretizedPath {
        DiscretizedPath::new(vec![value.clone(); n_nodes], period)
    }

    pub fn n_nodes(&self) -> usize {
        self.xi.len()
    }

    /// Trapezoidal weight of node j on the unit interval.
    pub fn weight(&self, j: usize) -> f64 {
        let d = 1.0 / (self.n_nodes() - 1) as f64;
        if j == 0 || j == self.n_nodes() - 1 {
            d / 2.0
        } else {
            d
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("endpoints coincide: the free-period infimum may not be attained")]
    DegenerateEndpoints,
    #[error("minimization did not converge (best defect {defect:.3e})")]
    NotConverged { defect: f64, best: Box<MinimizerReport> },
    #[error(transparent)]
    Group(#[from] group::GroupError),
}

/// Outcome of a constrained minimization run.
#[derive(Debug, Clone)]
pub struct MinimizerReport {
    pub path: DiscretizedPath,
    pub action: f64,
    pub constraint_defect: f64,
    pub el_residual: f64,
    pub energy_defect: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// S_{L+κ}(ξ, T) = T Σ_j w_j ( L(e, ξ_j / T) + κ ), trapezoidal in s.
pub fn action(spec: &LagrangianSpec, path: &DiscretizedPath, kappa: f64) -> f64 {
    assert!(path.period > 0.0);
    let t = path.period;
    let mut sum = 0.0;
    for (j, xi) in path.xi.iter().enumerate() {
        sum += path.weight(j) * (lagrangian::eval_l(spec, &xi.scale(1.0 / t)) + kappa);
    }
    t * sum
}

/// Analytic differential of the action: per-node L² Riesz representatives
/// g_j (so that dS(η, 0) = Σ_j w_j ⟨g_j, η_j⟩_{L²}) and dS/dT.
pub fn action_gradient(
    spec: &LagrangianSpec,
    path: &DiscretizedPath,
    kappa: f64,
) -> (Vec<MomentumVector>, f64) {
    let t = path.period;
    let s = action(spec, path, kappa);
    let mut node_grads = Vec::with_capacity(path.n_nodes());
    let mut pairing_sum = 0.0;
    for (j, xi) in path.xi.iter().enumerate() {
        let p = lagrangian::fiber_derivative(spec, &xi.scale(1.0 / t));
        pairing_sum += path.weight(j) * p.l2_pairing(xi);
        node_grads.push(p);
    }
    let ds_dt = s / t - pairing_sum / t;
    (node_grads, ds_dt)
}

/// Max-over-nodes L² norm of the reduced Euler–Lagrange defect
/// (1/T) d/ds (δℓ/δu) − ad*_u (δℓ/δu) along the path, with 4th-order
/// finite differences in s.
pub fn el_residual(spec: &LagrangianSpec, path: &DiscretizedPath) -> f64 {
    let t = path.period;
    let n = path.n_nodes();
    let ds = 1.0 / (n - 1) as f64;
    let p: Vec<MomentumVector> = path
        .xi
        .iter()
        .map(|xi| lagrangian::fiber_derivative(spec, &xi.scale(1.0 / t)))
        .collect();
    let mut worst = 0.0_f64;
    for j in 0..n {
        let dp_ds = fd4(&p, j, ds);
        let u = path.xi[j].scale(1.0 / t);
        let defect = dp_ds.scale(1.0 / t).sub(&metric::ad_star(&u, &p[j]));
        worst = worst.max(defect.l2_norm());
    }
    worst
}

/// 4th-order finite difference of a node series at index j (one-sided
/// 5-point stencils near the ends).
fn fd4(series: &[MomentumVector], j: usize, h: f64) -> MomentumVector {
    let n = series.len();
    let combine = |idx: [usize; 5], w: [f64; 5]| -> MomentumVector {
        let mut out = series[0].zero_like();
        for k in 0..5 {
            out = out.axpy(w[k] / h, &series[idx[k]]);
        }
        out
    };
    if j >= 2 && j + 2 < n {
        combine(
            [j - 2, j - 1, j, j + 1, j + 2],
            [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0],
        )
    } else if j < 2 {
        let w = if j == 0 {
            [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25]
        } else {
            [-0.25, -5.0 / 6.0, 1.5, -0.5, 1.0 / 12.0]
        };
        combine([0, 1, 2, 3, 4], w)
    } else {
        // mirrored one-sided stencils at the right end
        let w = if j == n - 1 {
            [0.25, -4.0 / 3.0, 3.0, -4.0, 25.0 / 12.0]
        } else {
            [-1.0 / 12.0, 0.5, -1.5, 5.0 / 6.0, 0.25]
        };
        combine([n - 5, n - 4, n - 3, n - 2, n - 1], w)
    }
}

/// Mean |E(e, ξ_j/T) − κ| along the path.
pub fn energy_defect(spec: &LagrangianSpec, path: &DiscretizedPath, kappa: f64) -> f64 {
    let t = path.period;
    let sum: f64 = path
        .xi
        .iter()
        .map(|xi| (lagrangian::energy(spec, &xi.scale(1.0 / t)) - kappa).abs())
        .sum();
    sum / path.n_nodes() as f64
}

// ---------------------------------------------------------------------------
// Constrained minimization machinery
// ---------------------------------------------------------------------------

/// What the solver minimizes.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Objective {
    /// S_{L+κ}(ξ, T)
    FreePeriodAction { kappa: f64 },
    /// (1/T) S_{L}(ξ, T)
    MeanAction,
}

/// Terminal constraint evol(ξ) = target; `wrapped` compares modulo deck
/// transformations (connect), otherwise the lift is matched exactly
/// (loop-class closure).
#[derive(Debug, Clone)]
pub(crate) struct TerminalConstraint {
    pub target: GroupElement,
    pub wrapped: bool,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub n_nodes: usize,
    pub multistarts: usize,
    pub seed: u64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub constraint_tol: f64,
    pub el_residual_tol: f64,
    pub energy_tol: f64,
    pub t_bracket: (f64, f64),
    pub evolve_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> SolverOptions {
        SolverOptions {
            n_nodes: 33,
            multistarts: 4,
            seed: 0,
            max_outer: 20,
            max_inner: 300,
            constraint_tol: 1e-8,
            el_residual_tol: 1e-6,
            energy_tol: 1e-4,
            t_bracket: (1e-3, 1e3),
            evolve_steps: 128,
        }
    }
}

fn algebra_dim(like: &AlgebraVector) -> usize {
    match like {
        AlgebraVector::U1(_) => 1,
        AlgebraVector::So3(_) => 3,
        AlgebraVector::DiffS1 { coeffs, .. } => coeffs.len(),
    }
}

/// Parseval weight of each coordinate in the L² pairing.
fn parseval_weights(like: &AlgebraVector) -> Vec<f64> {
    match like {
        AlgebraVector::U1(_) => vec![1.0],
        AlgebraVector::So3(_) => vec![1.0; 3],
        AlgebraVector::DiffS1 { coeffs, .. } => {
            let mut w = vec![std::f64::consts::PI; coeffs.len()];
            w[0] = 2.0 * std::f64::consts::PI;
            w
        }
    }
}

fn coords_of(v: &AlgebraVector) -> Vec<f64> {
    match v {
        AlgebraVector::U1(x) => vec![*x],
        AlgebraVector::So3(w) => w.to_vec(),
        AlgebraVector::DiffS1 { coeffs, .. } => coeffs.clone(),
    }
}

fn from_coords(like: &AlgebraVector, c: &[f64]) -> AlgebraVector {
    match like {
        AlgebraVector::U1(_) => AlgebraVector::U1(c[0]),
        AlgebraVector::So3(_) => AlgebraVector::So3([c[0], c[1], c[2]]),
        AlgebraVector::DiffS1 { n_modes, .. } => {
            AlgebraVector::DiffS1 { n_modes: *n_modes, coeffs: c.to_vec() }
        }
    }
}

struct FlatMap {
    like: AlgebraVector,
    dim: usize,
    n_nodes: usize,
    weights: Vec<f64>,
    t_bounds: (f64, f64),
}

impl FlatMap {
    fn new(like: &AlgebraVector, n_nodes: usize, t_bounds: (f64, f64)) -> FlatMap {
        FlatMap {
            like: like.clone(),
            dim: algebra_dim(like),
            n_nodes,
            weights: parseval_weights(like),
            t_bounds,
        }
    }

    fn len(&self) -> usize {
        self.dim * self.n_nodes + 1
    }

    fn pack(&self, path: &DiscretizedPath) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.len());
        for xi in &path.xi {
            z.extend(coords_of(xi));
        }
        z.push(path.period.ln());
        z
    }

    fn unpack(&self, z: &[f64]) -> DiscretizedPath {
        let mut xi = Vec::with_capacity(self.n_nodes);
        for j in 0..self.n_nodes {
            xi.push(from_coords(&self.like, &z[j * self.dim..(j + 1) * self.dim]));
        }
        let t = z[self.len() - 1].exp().clamp(self.t_bounds.0, self.t_bounds.1);
        DiscretizedPath { xi, period: t }
    }

    fn clamp_t(&self, z: &mut [f64]) {
        let last = self.len() - 1;
        z[last] = z[last].clamp(self.t_bounds.0.ln(), self.t_bounds.1.ln());
    }
}

/// Lift-preserving terminal defect (no wrapping): used for loop-class
/// closure constraints.
fn raw_defect(a: &GroupElement, target: &GroupElement) -> AlgebraVector {
    match (a, target) {
        (GroupElement::U1(x), GroupElement::U1(y)) => AlgebraVector::U1(x - y),
        (GroupElement::So3(p), GroupElement::So3(q)) => {
            AlgebraVector::So3(p.mul(q.conj()).rotation_vector_lifted())
        }
        (
            GroupElement::DiffS1 { n_modes, coeffs },
            GroupElement::DiffS1 { coeffs: c2, .. },
        ) => AlgebraVector::DiffS1 {
            n_modes: *n_modes,
            coeffs: coeffs.iter().zip(c2).map(|(x, y)| x - y).collect(),
        },
        _ => panic!("variant mismatch in raw_defect"),
    }
}

fn terminal_defect(term: &GroupElement, c: &TerminalConstraint) -> AlgebraVector {
    if c.wrapped {
        group::chart_defect(term, &c.target).expect("variant-checked")
    } else {
        raw_defect(term, &c.target)
    }
}

fn evolve_terminal(path: &DiscretizedPath, steps: usize) -> Result<GroupElement, group::GroupError> {
    Ok(group::evolve_linear(&path.xi, 1.0, steps, false)?.terminal)
}

/// Objective value alone (used during line search: one evolution, no
/// constraint-gradient work).
fn al_value(
    spec: &LagrangianSpec,
    map: &FlatMap,
    objective: Objective,
    constraint: &TerminalConstraint,
    lambda: &AlgebraVector,
    rho: f64,
    steps: usize,
    z: &[f64],
) -> Result<f64, group::GroupError> {
    let path = map.unpack(z);
    let obj = match objective {
        Objective::FreePeriodAction { kappa } => action(spec, &path, kappa),
        Objective::MeanAction => action(spec, &path, 0.0) / path.period,
    };
    let term = evolve_terminal(&path, steps)?;
    let c = terminal_defect(&term, constraint);
    Ok(obj + lambda.l2_pairing(&c) + 0.5 * rho * c.l2_pairing(&c))
}

/// Value and Euclidean-coordinate gradient of the augmented-Lagrangian
/// objective at z.
struct AlEval {
    value: f64,
    grad: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn al_eval(
    spec: &LagrangianSpec,
    map: &FlatMap,
    objective: Objective,
    constraint: &TerminalConstraint,
    lambda: &AlgebraVector,
    rho: f64,
    steps: usize,
    z: &[f64],
) -> Result<AlEval, group::GroupError> {
    let path = map.unpack(z);
    let t = path.period;
    let (obj, node_grads, dobj_dt) = match objective {
        Objective::FreePeriodAction { kappa } => {
            let (g, dt) = action_gradient(spec, &path, kappa);
            (action(spec, &path, kappa), g, dt)
        }
        Objective::MeanAction => {
            // G = Σ w_j L(ξ_j/T): node reps p_j/T, dG/dT = −(1/T²) Σ w_j ⟨p_j, ξ_j⟩
            let mut grads = Vec::with_capacity(path.n_nodes());
            let mut val = 0.0;
            let mut pairing = 0.0;
            for (j, xi) in path.xi.iter().enumerate() {
                let v = xi.scale(1.0 / t);
                val += path.weight(j) * lagrangian::eval_l(spec, &v);
                let p = lagrangian::fiber_derivative(spec, &v);
                pairing += path.weight(j) * p.l2_pairing(xi);
                grads.push(p.scale(1.0 / t));
            }
            (val, grads, -pairing / (t * t))
        }
    };

    let term = evolve_terminal(&path, steps)?;
    let c = terminal_defect(&term, constraint);
    let penalty = lambda.l2_pairing(&c) + 0.5 * rho * c.l2_pairing(&c);
    let value = obj + penalty;

    // objective part of the gradient (Euclidean coordinates)
    let mut grad = vec![0.0; map.len()];
    for (j, g) in node_grads.iter().enumerate() {
        let gw = path.weight(j);
        let coords = coords_of(g);
        for (i, gc) in coords.iter().enumerate() {
            grad[j * map.dim + i] += gw * map.weights[i] * gc;
        }
    }
    // d/d(ln T) = T * d/dT
    let last = map.len() - 1;
    grad[last] += t * dobj_dt;

    // constraint part: seed w = λ + ρ c, pulled back through the evolution
    let w = lambda.axpy(rho, &c);
    add_constraint_gradient(map, &path, constraint, &w, steps, &mut grad)?;

    Ok(AlEval { value, grad })
}

/// Gradient of z ↦ ⟨w, c(z)⟩ added into `grad`. Finite differences for the
/// low-dimensional instances, adjoint ODE for DiffS1.
fn add_constraint_gradient(
    map: &FlatMap,
    path: &DiscretizedPath,
    constraint: &TerminalConstraint,
    w: &AlgebraVector,
    steps: usize,
    grad: &mut [f64],
) -> Result<(), group::GroupError> {
    match map.like.variant() {
        Variant::U1 | Variant::So3 => {
            let h = 1e-6;
            let mut xi = path.xi.clone();
            for j in 0..map.n_nodes {
                for i in 0..map.dim {
                    let mut probe = |sgn: f64| -> Result<f64, group::GroupError> {
                        let mut c = coords_of(&xi[j]);
                        c[i] += sgn * h;
                        let saved = xi[j].clone();
                        xi[j] = from_coords(&map.like, &c);
                        let term = group::evolve_linear(&xi, 1.0, steps, false)?.terminal;
                        xi[j] = saved;
                        Ok(w.l2_pairing(&terminal_defect(&term, constraint)))
                    };
                    let fp = probe(1.0)?;
                    let fm = probe(-1.0)?;
                    grad[j * map.dim + i] += (fp - fm) / (2.0 * h);
                }
            }
            Ok(())
        }
        Variant::DiffS1 => {
            add_constraint_gradient_adjoint(map, path, constraint, w, steps, grad)
        }
    }
}

/// Adjoint of the right-trivialized evolution: the variation η = δφ∘φ⁻¹
/// obeys η' = δξ − ad_ξ η, so the costate μ with μ' = ad*_ξ μ transports
/// the terminal seed back as ⟨w, δc⟩ = ∫ ⟨μ(s), δξ(s)⟩ ds.
fn add_constraint_gradient_adjoint(
    map: &FlatMap,
    path: &DiscretizedPath,
    constraint: &TerminalConstraint,
    w: &AlgebraVector,
    steps: usize,
    grad: &mut [f64],
) -> Result<(), group::GroupError> {
    let res = group::evolve_linear(&path.xi, 1.0, steps, false)?;
    let terminal = &res.terminal;
    // terminal seed: δc = η(1)∘φ viewed through the displacement chart,
    // so μ(1)(y) = w(φ⁻¹(y)) · (φ⁻¹)'(y)
    let mu1 = match (terminal, w) {
        (GroupElement::DiffS1 { n_modes, coeffs }, AlgebraVector::DiffS1 { coeffs: wc, .. }) => {
            let ctx = spectral::ctx(*n_modes);
            let inv = spectral::invert_diffeo(&ctx, coeffs, group::ORIENTATION_THRESHOLD)
                .ok_or(group::GroupError::OrientationLost(0.0))?;
            let dinv = spectral::derivative(&inv);
            let grid: Vec<f64> = ctx
                .nodes()
                .iter()
                .map(|&y| {
                    let x_pre = y + spectral::eval_at(&inv, y);
                    spectral::eval_at(wc, x_pre) * (1.0 + spectral::eval_at(&dinv, y))
                })
                .collect();
            AlgebraVector::DiffS1 { n_modes: *n_modes, coeffs: ctx.from_grid(&grid) }
        }
        _ => unreachable!(),
    };
    let _ = constraint;

    // integrate μ backwards with RK4, sampling at the path nodes
    let n = map.n_nodes;
    let h = 1.0 / ((n - 1) * 4) as f64;
    let total = (n - 1) * 4;
    let xi_at = |s: f64| group::interp_path_linear(&path.xi, s);
    let mut mu = mu1;
    let mut mu_nodes = vec![mu.clone()];
    for k in 0..total {
        let s = 1.0 - k as f64 * h;
        let f = |m: &AlgebraVector, s: f64| metric::ad_star(&xi_at(s), m);
        let k1 = f(&mu, s);
        let k2 = f(&mu.axpy(-h / 2.0, &k1), s - h / 2.0);
        let k3 = f(&mu.axpy(-h / 2.0, &k2), s - h / 2.0);
        let k4 = f(&mu.axpy(-h, &k3), s - h);
        let mut next = mu.axpy(-h / 6.0, &k1);
        next = next.axpy(-h / 3.0, &k2);
        next = next.axpy(-h / 3.0, &k3);
        next = next.axpy(-h / 6.0, &k4);
        mu = next;
        if (k + 1) % 4 == 0 {
            mu_nodes.push(mu.clone());
        }
    }
    mu_nodes.reverse(); // node order 0..n

    for (j, mu_j) in mu_nodes.iter().enumerate() {
        let wq = path.weight(j);
        let coords = coords_of(mu_j);
        for (i, mc) in coords.iter().enumerate() {
            grad[j * map.dim + i] += wq * map.weights[i] * mc;
        }
    }
    Ok(())
}

/// Bounded-memory quasi-Newton minimization with Armijo backtracking.
/// `value` is evaluated on every line-search trial; `eval` (value +
/// gradient) only at accepted points.
fn lbfgs<F, V>(
    z0: Vec<f64>,
    map: &FlatMap,
    max_iter: usize,
    grad_tol: f64,
    mut value: V,
    mut eval: F,
) -> (Vec<f64>, usize)
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    V: FnMut(&[f64]) -> Option<f64>,
{
    const MEM: usize = 10;
    let mut z = z0;
    map_clamp(map, &mut z);
    let (mut fz, mut g) = match eval(&z) {
        Some(v) => v,
        None => return (z, 0),
    };
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut iters = 0;
    for _ in 0..max_iter {
        iters += 1;
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gnorm < grad_tol {
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &q);
            axpy_vec(&mut q, -a, y);
            alphas.push((a, rho));
        }
        let gamma = if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            dot(s, y) / dot(y, y)
        } else {
            1.0 / (1.0 + gnorm)
        };
        for x in q.iter_mut() {
            *x *= gamma;
        }
        for ((s, y), (a, rho)) in s_hist.iter().zip(&y_hist).zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            axpy_vec(&mut q, a - b, s);
        }
        let dir: Vec<f64> = q.iter().map(|x| -x).collect();
        let slope = dot(&g, &dir);
        let (dir, slope) = if slope < 0.0 {
            (dir, slope)
        } else {
            (g.iter().map(|x| -x).collect::<Vec<_>>(), -gnorm * gnorm)
        };
        // Armijo backtracking on the cheap value functional
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut zt: Vec<f64> = z.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            map_clamp(map, &mut zt);
            if let Some(ft) = value(&zt) {
                if ft <= fz + 1e-4 * step * slope {
                    let (ft, gt) = match eval(&zt) {
                        Some(v) => v,
                        None => break,
                    };
                    let s_vec: Vec<f64> = zt.iter().zip(&z).map(|(a, b)| a - b).collect();
                    let y_vec: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
                    if dot(&s_vec, &y_vec) > 1e-14 {
                        s_hist.push(s_vec);
                        y_hist.push(y_vec);
                        if s_hist.len() > MEM {
                            s_hist.remove(0);
                            y_hist.remove(0);
                        }
                    }
                    let progress = (fz - ft).abs();
                    z = zt;
                    fz = ft;
                    g = gt;
                    accepted = true;
                    if progress <= 1e-15 * (1.0 + fz.abs()) {
                        return (z, iters);
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (z, iters)
}

fn map_clamp(map: &FlatMap, z: &mut [f64]) {
    map.clamp_t(z);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy_vec(a: &mut [f64], s: f64, b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * y;
    }
}

/// Objective value and its Euclidean-coordinate gradient (no constraint
/// terms).
fn objective_grad(spec: &LagrangianSpec, map: &FlatMap, objective: Objective, z: &[f64]) -> Vec<f64> {
    let path = map.unpack(z);
    let t = path.period;
    let (node_grads, dobj_dt) = match objective {
        Objective::FreePeriodAction { kappa } => action_gradient(spec, &path, kappa),
        Objective::MeanAction => {
            let mut grads = Vec::with_capacity(path.n_nodes());
            let mut pairing = 0.0;
            for (j, xi) in path.xi.iter().enumerate() {
                let p = lagrangian::fiber_derivative(spec, &xi.scale(1.0 / t));
                pairing += path.weight(j) * p.l2_pairing(xi);
                grads.push(p.scale(1.0 / t));
            }
            (grads, -pairing / (t * t))
        }
    };
    let mut grad = vec![0.0; map.len()];
    for (j, g) in node_grads.iter().enumerate() {
        let gw = path.weight(j);
        for (i, gc) in coords_of(g).iter().enumerate() {
            grad[j * map.dim + i] += gw * map.weights[i] * gc;
        }
    }
    let last = map.len() - 1;
    grad[last] += t * dobj_dt;
    grad
}

/// Rows of the terminal-constraint Jacobian in flat coordinates, one per
/// constraint component (only sensible for the low-dimensional instances).
fn constraint_jacobian(
    map: &FlatMap,
    path: &DiscretizedPath,
    constraint: &TerminalConstraint,
    steps: usize,
) -> Result<Vec<Vec<f64>>, group::GroupError> {
    let n_c = map.dim;
    let mut rows = Vec::with_capacity(n_c);
    for k in 0..n_c {
        let mut basis = vec![0.0; n_c];
        basis[k] = 1.0;
        let seed = from_coords(&map.like, &basis);
        let mut row = vec![0.0; map.len()];
        add_constraint_gradient(map, path, constraint, &seed, steps, &mut row)?;
        rows.push(row);
    }
    Ok(rows)
}

/// Solve the small symmetric system (J Jᵀ) x = b by Gaussian elimination.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for c2 in col..n {
                    a[row][c2] -= f * a[col][c2];
                }
                b[row] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Gradient-only refinement on the constraint manifold. The line-search
/// phase cannot resolve action decreases near machine precision, so node
/// noise of order 1e-6 survives it; here the analytic objective gradient is
/// projected onto the null space of the terminal-constraint Jacobian and
/// followed with curvature-matched steps, which needs no value comparisons.
fn polish_nullspace(
    spec: &LagrangianSpec,
    map: &FlatMap,
    objective: Objective,
    constraint: &TerminalConstraint,
    opts: &SolverOptions,
    z: &mut Vec<f64>,
) -> Result<(), group::GroupError> {
    let steps = opts.evolve_steps;
    let mut jac: Vec<Vec<f64>> = Vec::new();
    for it in 0..300 {
        if it % 25 == 0 {
            let path = map.unpack(z);
            jac = constraint_jacobian(map, &path, constraint, steps)?;
        }
        let g = objective_grad(spec, map, objective, z);
        // project g onto the null space of J
        let n_c = jac.len();
        let gram: Vec<Vec<f64>> = (0..n_c)
            .map(|i| (0..n_c).map(|j| dot(&jac[i], &jac[j])).collect())
            .collect();
        let rhs: Vec<f64> = (0..n_c).map(|i| dot(&jac[i], &g)).collect();
        let coef = match solve_small(gram.clone(), rhs) {
            Some(c) => c,
            None => break,
        };
        let mut d: Vec<f64> = g.clone();
        for (i, ci) in coef.iter().enumerate() {
            axpy_vec(&mut d, -ci, &jac[i]);
        }
        for x in d.iter_mut() {
            *x = -*x;
        }
        let dnorm = dot(&d, &d).sqrt();
        if dnorm < 1e-13 {
            break;
        }
        // curvature along d from a gradient difference
        let eps = 1e-6 / dnorm.max(1e-12);
        let zp: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
        let gp = objective_grad(spec, map, objective, &zp);
        let hd_d: f64 = gp.iter().zip(&g).zip(&d).map(|((a, b), di)| (a - b) * di).sum::<f64>() / eps;
        if hd_d <= 1e-12 * dnorm * dnorm {
            break; // flat or indefinite curvature: nothing reliable to gain
        }
        let step = (dnorm * dnorm / hd_d).min(1.0 / dnorm.max(1.0));
        for (x, di) in z.iter_mut().zip(&d) {
            *x += step * di;
        }
        map.clamp_t(z);
        // range-space correction to hold the defect at tolerance
        let path = map.unpack(z);
        let term = evolve_terminal(&path, steps)?;
        let c = terminal_defect(&term, constraint);
        if c.l2_norm() > 0.1 * opts.constraint_tol {
            let cw: Vec<f64> = coords_of(&c)
                .iter()
                .zip(&map.weights)
                .map(|(x, w)| x * w)
                .collect();
            if let Some(coef) = solve_small(gram, cw) {
                for (i, ci) in coef.iter().enumerate() {
                    axpy_vec(z, -ci, &jac[i]);
                }
                map.clamp_t(z);
            }
        }
    }
    Ok(())
}

pub(crate) struct AlOutcome {
    pub path: DiscretizedPath,
    pub objective: f64,
    pub defect: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Augmented-Lagrangian minimization of `objective` subject to the terminal
/// constraint, from a given start path.
pub(crate) fn minimize_constrained(
    spec: &LagrangianSpec,
    objective: Objective,
    constraint: &TerminalConstraint,
    start: &DiscretizedPath,
    opts: &SolverOptions,
) -> Result<AlOutcome, group::GroupError> {
    let map = FlatMap::new(&start.xi[0], start.n_nodes(), opts.t_bracket);
    let mut z = map.pack(start);
    let mut lambda = start.xi[0].zero_like();
    let mut rho = 10.0;
    let mut total_iters = 0;
    let mut last_defect = f64::INFINITY;
    for outer in 0..opts.max_outer {
        let lam = lambda.clone();
        let (znew, it) = lbfgs(
            z.clone(),
            &map,
            opts.max_inner,
            1e-10,
            |zz| al_value(spec, &map, objective, constraint, &lam, rho, opts.evolve_steps, zz).ok(),
            |zz| {
                al_eval(spec, &map, objective, constraint, &lam, rho, opts.evolve_steps, zz)
                    .ok()
                    .map(|e| (e.value, e.grad))
            },
        );
        z = znew;
        total_iters += it;
        let path = map.unpack(&z);
        let term = evolve_terminal(&path, opts.evolve_steps)?;
        let c = terminal_defect(&term, constraint);
        let defect = c.l2_norm();
        lambda = lambda.axpy(rho, &c);
        if defect <= opts.constraint_tol && outer > 0 {
            break;
        }
        if defect > 0.25 * last_defect {
            rho *= 10.0;
        }
        last_defect = defect;
    }
    if !matches!(map.like.variant(), Variant::DiffS1) {
        polish_nullspace(spec, &map, objective, constraint, opts, &mut z)?;
    }
    let path = map.unpack(&z);
    let term = evolve_terminal(&path, opts.evolve_steps)?;
    let defect = terminal_defect(&term, constraint).l2_norm();
    let objective_value = match objective {
        Objective::FreePeriodAction { kappa } => action(spec, &path, kappa),
        Objective::MeanAction => action(spec, &path, 0.0) / path.period,
    };
    Ok(AlOutcome {
        path,
        objective: objective_value,
        defect,
        iterations: total_iters,
        converged: defect <= opts.constraint_tol,
    })
}

/// Find a trajectory from p to q whose trivialized velocity path minimizes
/// the free-period action at level κ. Multistart over perturbed
/// constant-speed interpolants (including neighbouring deck windings),
/// merged by minimum action among feasible runs.
pub fn connect(
    spec: &LagrangianSpec,
    p: &GroupElement,
    q: &GroupElement,
    kappa: f64,
    opts: &SolverOptions,
) -> Result<MinimizerReport, SolveError> {
    let target = group::compose(q, &group::inverse(p).map_err(SolveError::Group)?)
        .map_err(SolveError::Group)?;
    let base_defect = group::chart_defect(&target, &target.identity_like()).map_err(SolveError::Group)?;
    let dist = base_defect.l2_norm();
    if dist < 1e-9 {
        return Err(SolveError::DegenerateEndpoints);
    }

    let t0 = if kappa > 0.0 { dist / (2.0 * kappa).sqrt() } else { 1.0 };
    let t_bracket = (1e-3 * t0, 1e3 * t0);
    let mut local = opts.clone();
    local.t_bracket = t_bracket;

    let constraint = TerminalConstraint { target: target.clone(), wrapped: true };
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let mut starts: Vec<DiscretizedPath> = Vec::new();
    starts.push(DiscretizedPath::constant(&base_defect, opts.n_nodes, t0));
    if let AlgebraVector::U1(a) = &base_defect {
        for n in [-1.0, 1.0] {
            let shifted = a + n * 2.0 * std::f64::consts::PI;
            let tn = if kappa > 0.0 { shifted.abs() / (2.0 * kappa).sqrt() } else { 1.0 };
            starts.push(DiscretizedPath::constant(
                &AlgebraVector::U1(shifted),
                opts.n_nodes,
                tn.clamp(t_bracket.0, t_bracket.1),
            ));
        }
    }
    while starts.len() < opts.multistarts.max(1) {
        let mut xi = Vec::with_capacity(opts.n_nodes);
        for _ in 0..opts.n_nodes {
            let noise = random_like(&mut rng, &base_defect, 0.2 * (dist + 1.0));
            xi.push(base_defect.add(&noise));
        }
        starts.push(DiscretizedPath::new(xi, t0));
    }

    let mut best: Option<MinimizerReport> = None;
    for start in &starts {
        let outcome = match minimize_constrained(
            spec,
            Objective::FreePeriodAction { kappa },
            &constraint,
            start,
            &local,
        ) {
            Ok(o) => o,
            Err(_) => continue,
        };
        let report = MinimizerReport {
            el_residual: el_residual(spec, &outcome.path),
            energy_defect: energy_defect(spec, &outcome.path, kappa),
            action: outcome.objective,
            constraint_defect: outcome.defect,
            iterations: outcome.iterations,
            converged: false,
            path: outcome.path,
        };
        let ok = report.constraint_defect <= opts.constraint_tol
            && report.el_residual <= opts.el_residual_tol
            && report.energy_defect <= opts.energy_tol;
        let report = MinimizerReport { converged: ok, ..report };
        best = Some(match best {
            None => report,
            Some(b) => pick_better(b, report),
        });
    }
    match best {
        Some(b) if b.converged => Ok(b),
        Some(b) => Err(SolveError::NotConverged { defect: b.constraint_defect, best: Box::new(b) }),
        None => Err(SolveError::NotConverged {
            defect: f64::INFINITY,
            best: Box::new(MinimizerReport {
                path: DiscretizedPath::constant(&base_defect, opts.n_nodes, t0),
                action: f64::INFINITY,
                constraint_defect: f64::INFINITY,
                el_residual: f64::INFINITY,
                energy_defect: f64::INFINITY,
                iterations: 0,
                converged: false,
            }),
        }),
    }
}

fn pick_better(a: MinimizerReport, b: MinimizerReport) -> MinimizerReport {
    match (a.converged, b.converged) {
        (true, false) => a,
        (false, true) => b,
        _ => {
            if b.action < a.action {
                b
            } else {
                a
            }
        }
    }
}

fn random_like(rng: &mut StdRng, like: &AlgebraVector, scale: f64) -> AlgebraVector {
    match like {
        AlgebraVector::U1(_) => AlgebraVector::U1(scale * rng.gen_range(-1.0..1.0)),
        AlgebraVector::So3(_) => AlgebraVector::So3([
            scale * rng.gen_range(-1.0..1.0),
            scale * rng.gen_range(-1.0..1.0),
            scale * rng.gen_range(-1.0..1.0),
        ]),
        AlgebraVector::DiffS1 { n_modes, .. } => {
            // band-limited noise keeps starts inside the representable group
            let mut coeffs = vec![0.0; spectral::coeff_len(*n_modes)];
            for k in 1..=(4.min(*n_modes - 1)) {
                coeffs[2 * k - 1] = scale * rng.gen_range(-1.0..1.0) / k as f64;
                coeffs[2 * k] = scale * rng.gen_range(-1.0..1.0) / k as f64;
            }
            coeffs[0] = scale * rng.gen_range(-1.0..1.0);
            AlgebraVector::DiffS1 { n_modes: *n_modes, coeffs }
        }
    }
}
