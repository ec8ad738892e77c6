//! Approximate identities, discrete convolution, and the shifted-difference
//! kernel kappa_{z,delta}(y) = J_delta(y+z) - J_delta(y).

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::numeric::{adaptive_simpson, kahan_sum, KahanSum};

/// Unnormalized Friedrichs bump exp(-1/(1-x^2)) on (-1, 1).
#[inline]
fn bump_raw(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

fn bump_norm_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let mass = adaptive_simpson(&bump_raw, -1.0, 1.0, 1e-14)
            .expect("bump normalization quadrature");
        1.0 / mass
    })
}

/// Base kernel J with unit mass and support radius 1.
#[derive(Debug, Clone, Copy)]
pub struct BaseKernel {
    norm: f64,
}

/// The standard Friedrichs mollifier, normalized to unit mass numerically.
pub fn friedrichs_kernel() -> BaseKernel {
    BaseKernel { norm: bump_norm_constant() }
}

impl BaseKernel {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.norm * bump_raw(x)
    }

    /// Support radius of the base kernel.
    pub fn support_radius(&self) -> f64 {
        1.0
    }

    pub fn normalization(&self) -> f64 {
        self.norm
    }

    /// The rescaled family member J_delta(x) = J(x/delta)/delta.
    pub fn rescaled(&self, delta: f64) -> Result<ApproximateIdentity> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput("kernel scale delta must be positive".into()));
        }
        Ok(ApproximateIdentity { base: *self, delta })
    }
}

/// A rescaled kernel J_delta with support in [-delta, delta].
#[derive(Debug, Clone, Copy)]
pub struct ApproximateIdentity {
    base: BaseKernel,
    pub delta: f64,
}

impl ApproximateIdentity {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.base.eval(x / self.delta) / self.delta
    }

    pub fn support_radius(&self) -> f64 {
        self.delta * self.base.support_radius()
    }

    /// max |J_delta'|, measured on a fine grid (used by the kappa bound check).
    pub fn max_grad(&self) -> f64 {
        let n = 4096;
        let h = 2.0 * self.support_radius() / n as f64;
        let mut best: f64 = 0.0;
        for j in 0..n {
            let x = -self.support_radius() + (j as f64 + 0.5) * h;
            let d = (self.eval(x + 0.5 * h) - self.eval(x - 0.5 * h)) / h;
            best = best.max(d.abs());
        }
        best
    }
}

/// Discrete convolution (J_delta * u)_j = sum_i J_delta(x_j - x_i) u_i dx.
/// Boundary handling follows the grid: periodic wraparound or zero extension.
pub fn convolve(k: &ApproximateIdentity, u: &[f64], grid: &GridSpec) -> Result<Vec<f64>> {
    if k.delta < grid.dx {
        return Err(Error::InvalidInput(format!(
            "kernel scale delta = {} is unresolved by the grid (dx = {})",
            k.delta, grid.dx
        )));
    }
    if u.len() != grid.n_cells {
        return Err(Error::InvalidInput("grid function length mismatch".into()));
    }
    let reach = (k.support_radius() / grid.dx).ceil() as isize + 1;
    // Normalize the sampled stencil so the discrete operator has exact unit
    // mass; otherwise constants pick up the lattice-sampling error of J_delta.
    let stencil: Vec<f64> = (-reach..=reach).map(|m| k.eval(m as f64 * grid.dx)).collect();
    let wsum = kahan_sum(stencil.iter().map(|w| w * grid.dx));
    if !(wsum > 0.0) {
        return Err(Error::Numerical("degenerate convolution stencil".into()));
    }
    let mut out = Vec::with_capacity(grid.n_cells);
    for j in 0..grid.n_cells as isize {
        let mut acc = KahanSum::new();
        for (idx, m) in (-reach..=reach).enumerate() {
            let w = stencil[idx];
            if w > 0.0 {
                acc.add(w * grid.sample(u, j - m) * grid.dx);
            }
        }
        out.push(acc.value() / wsum);
    }
    Ok(out)
}

/// The difference kernel kappa_{z,delta}(y) = J_delta(y+z) - J_delta(y),
/// evaluated at the cell centers. Its quadrature vanishes and its support
/// lies within |y| <= |z| + delta.
pub fn kappa_kernel(k: &ApproximateIdentity, z: f64, grid: &GridSpec) -> Result<Vec<f64>> {
    if z.abs() >= 1.0 {
        return Err(Error::InvalidInput("translation |z| must be < 1".into()));
    }
    Ok((0..grid.n_cells)
        .map(|j| {
            let y = grid.x(j);
            k.eval(y + z) - k.eval(y)
        })
        .collect())
}
