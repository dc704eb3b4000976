//! Real trigonometric spectral tools on the periodic domain [0, 2π).
//!
//! A field with `n_modes = N` is stored as `2N - 1` real coefficients
//! `[a0, a1, b1, ..., a_{N-1}, b_{N-1}]` representing
//! `f(x) = a0 + sum_k a_k cos(kx) + b_k sin(kx)`.
//!
//! Products are evaluated on a padded collocation grid of `4N` points and
//! projected back to the retained modes, which is alias-free for quadratic
//! nonlinearities of band-limited factors.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Number of real coefficients for a given mode truncation.
pub fn coeff_len(n_modes: usize) -> usize {
    2 * n_modes - 1
}

/// Highest retained wavenumber.
pub fn k_max(n_modes: usize) -> usize {
    n_modes - 1
}

/// FFT plans and scratch sizes for one truncation level.
pub struct SpectralCtx {
    pub n_modes: usize,
    pub grid_size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

static CTX_CACHE: OnceLock<Mutex<HashMap<usize, Arc<SpectralCtx>>>> = OnceLock::new();

pub fn ctx(n_modes: usize) -> Arc<SpectralCtx> {
    assert!(n_modes >= 1);
    let cache = CTX_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap();
    cache
        .entry(n_modes)
        .or_insert_with(|| {
            let grid_size = 4 * n_modes;
            let mut planner = FftPlanner::new();
            Arc::new(SpectralCtx {
                n_modes,
                grid_size,
                fwd: planner.plan_fft_forward(grid_size),
                inv: planner.plan_fft_inverse(grid_size),
            })
        })
        .clone()
}

impl SpectralCtx {
    /// Collocation nodes x_j = 2π j / grid_size.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.grid_size)
            .map(|j| 2.0 * PI * j as f64 / self.grid_size as f64)
            .collect()
    }

    /// Evaluate the coefficient vector on the uniform collocation grid.
    pub fn to_grid(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), coeff_len(self.n_modes));
        let m = self.grid_size;
        let mut spec = vec![Complex64::new(0.0, 0.0); m];
        spec[0] = Complex64::new(coeffs[0], 0.0);
        for k in 1..self.n_modes {
            let c = Complex64::new(coeffs[2 * k - 1] / 2.0, -coeffs[2 * k] / 2.0);
            spec[k] = c;
            spec[m - k] = c.conj();
        }
        self.inv.process(&mut spec);
        spec.iter().map(|z| z.re).collect()
    }

    /// Project grid values back onto the retained modes.
    pub fn from_grid(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.grid_size);
        let m = self.grid_size;
        let mut spec: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut spec);
        let mut coeffs = vec![0.0; coeff_len(self.n_modes)];
        coeffs[0] = spec[0].re / m as f64;
        for k in 1..self.n_modes {
            coeffs[2 * k - 1] = 2.0 * spec[k].re / m as f64;
            coeffs[2 * k] = -2.0 * spec[k].im / m as f64;
        }
        coeffs
    }

    /// Dealiased pointwise product of two coefficient vectors.
    pub fn product(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let fg: Vec<f64> = self
            .to_grid(f)
            .iter()
            .zip(self.to_grid(g))
            .map(|(a, b)| a * b)
            .collect();
        self.from_grid(&fg)
    }
}

/// Spectral derivative: (a_k, b_k) -> (k b_k, -k a_k).
pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    let n_modes = (coeffs.len() + 1) / 2;
    let mut out = vec![0.0; coeffs.len()];
    for k in 1..n_modes {
        out[2 * k - 1] = k as f64 * coeffs[2 * k];
        out[2 * k] = -(k as f64) * coeffs[2 * k - 1];
    }
    out
}

/// Evaluate the series at an arbitrary point.
pub fn eval_at(coeffs: &[f64], x: f64) -> f64 {
    let n_modes = (coeffs.len() + 1) / 2;
    let rot = Complex64::new(x.cos(), x.sin());
    let mut z = Complex64::new(1.0, 0.0);
    let mut sum = coeffs[0];
    for k in 1..n_modes {
        z *= rot;
        sum += coeffs[2 * k - 1] * z.re + coeffs[2 * k] * z.im;
    }
    sum
}

/// L²(S¹) inner product via Parseval: ⟨f,g⟩ = 2π a0 a0' + π Σ (a_k a_k' + b_k b_k').
pub fn l2_inner(f: &[f64], g: &[f64]) -> f64 {
    assert_eq!(f.len(), g.len());
    let mut sum = 2.0 * PI * f[0] * g[0];
    for i in 1..f.len() {
        sum += PI * f[i] * g[i];
    }
    sum
}

/// Squared Sobolev norm ‖f‖²_{H^r} = 2π a0² + π Σ (1+k²)^r (a_k² + b_k²).
pub fn sobolev_norm_sq(coeffs: &[f64], order: f64) -> f64 {
    let n_modes = (coeffs.len() + 1) / 2;
    let mut sum = 2.0 * PI * coeffs[0] * coeffs[0];
    for k in 1..n_modes {
        let w = (1.0 + (k * k) as f64).powf(order);
        sum += PI * w * (coeffs[2 * k - 1].powi(2) + coeffs[2 * k].powi(2));
    }
    sum
}

/// Minimum of 1 + f'(x) over the collocation grid; positivity means the
/// displacement field f generates an orientation-preserving map x + f(x).
pub fn min_jacobian(ctx: &SpectralCtx, displacement: &[f64]) -> f64 {
    let df = derivative(displacement);
    ctx.to_grid(&df)
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(1.0 + v))
}

/// Invert the circle map φ(x) = x + f(x) by Newton iteration at the grid
/// nodes, returning the displacement coefficients of φ⁻¹.
///
/// Fails (returns None) if the map is not invertible at the configured
/// orientation threshold.
pub fn invert_diffeo(ctx: &SpectralCtx, displacement: &[f64], threshold: f64) -> Option<Vec<f64>> {
    if min_jacobian(ctx, displacement) <= threshold {
        return None;
    }
    let df = derivative(displacement);
    let mut inv_disp_grid = vec![0.0; ctx.grid_size];
    for (j, &x) in ctx.nodes().iter().enumerate() {
        // solve y + f(y) = x
        let mut y = x - eval_at(displacement, x);
        for _ in 0..50 {
            let r = y + eval_at(displacement, y) - x;
            if r.abs() < 1e-14 {
                break;
            }
            let slope = 1.0 + eval_at(&df, y);
            y -= r / slope;
        }
        inv_disp_grid[j] = y - x;
    }
    Some(ctx.from_grid(&inv_disp_grid))
}
