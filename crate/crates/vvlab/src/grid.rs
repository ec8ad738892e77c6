//! Uniform 1-D grids on the truncated domain [-L, L].

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    DirichletZero,
}

impl Boundary {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "dirichlet_zero" => Ok(Boundary::DirichletZero),
            other => Err(Error::Config(format!("unknown boundary `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::DirichletZero => "dirichlet_zero",
        }
    }
}

/// Cell-centered discretization of [-L, L] with `n_cells` cells.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub half_width: f64,
    pub n_cells: usize,
    pub dx: f64,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn new(half_width: f64, n_cells: usize, boundary: Boundary) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config("half_width must be positive".into()));
        }
        if n_cells < 16 {
            return Err(Error::Config("n_cells must be at least 16".into()));
        }
        let dx = 2.0 * half_width / n_cells as f64;
        Ok(Self { half_width, n_cells, dx, boundary })
    }

    /// Center of cell `j`.
    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + (j as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|j| self.x(j)).collect()
    }

    /// Sample a grid function at a possibly out-of-range index,
    /// applying the grid's boundary rule.
    #[inline]
    pub fn sample(&self, u: &[f64], j: isize) -> f64 {
        let n = self.n_cells as isize;
        match self.boundary {
            Boundary::Periodic => u[j.rem_euclid(n) as usize],
            Boundary::DirichletZero => {
                if j < 0 || j >= n {
                    0.0
                } else {
                    u[j as usize]
                }
            }
        }
    }

    /// Default interior-window margin used to suppress truncation artifacts.
    pub fn default_margin(&self) -> f64 {
        self.half_width / 8.0
    }

    /// Index range of cells whose centers lie in [-L + margin, L - margin].
    pub fn interior_range(&self, margin: f64) -> std::ops::Range<usize> {
        let lo = (0..self.n_cells).find(|&j| self.x(j) >= -self.half_width + margin);
        let hi = (0..self.n_cells).rev().find(|&j| self.x(j) <= self.half_width - margin);
        match (lo, hi) {
            (Some(a), Some(b)) if a <= b => a..b + 1,
            _ => 0..0,
        }
    }

    /// Check that `z` is an integer multiple of dx; returns the cell count.
    pub fn aligned_cells(&self, z: f64) -> Result<isize> {
        let m = z / self.dx;
        let rounded = m.round();
        if (m - rounded).abs() > 1e-9 * (1.0 + m.abs()) {
            return Err(Error::InvalidInput(format!(
                "shift {z} is not an integer multiple of dx = {}",
                self.dx
            )));
        }
        Ok(rounded as isize)
    }
}
