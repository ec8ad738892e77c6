//! Weight functions chi with |chi'| <= C_chi * chi, and weighted L^p norms
//! on discrete grids.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::numeric::{adaptive_simpson, refine_max, KahanSum};

/// Half-width of the reference domain used for constant measurements.
const REF_HALF_WIDTH: f64 = 100.0;
/// Points of the fine reference grid (2^14).
const REF_POINTS: usize = 1 << 14;

#[derive(Debug, Clone, Copy)]
enum WeightKind {
    /// chi_N(x) = (1 + x^2)^{-N}
    Power { n: f64 },
    /// chi == 1 on the truncated reference domain (test weight, not in W on all of R).
    Flat,
}

/// A positive weight with analytically coded derivatives. The gradient-bound
/// constant `c_chi` is measured, not declared, so the defining inequality
/// stays machine-checkable.
#[derive(Debug, Clone, Copy)]
pub struct WeightFunction {
    kind: WeightKind,
    pub c_chi: f64,
    pub l1_mass: f64,
}

impl WeightFunction {
    /// chi_N(x) = (1 + x^2)^{-N}. Requires N > 1/2 for integrability on R.
    pub fn power(n: f64) -> Result<Self> {
        if !(n > 0.5) {
            return Err(Error::InvalidInput(format!(
                "power weight requires N > 1/2 for integrability, got N = {n}"
            )));
        }
        let kind = WeightKind::Power { n };
        let c_chi = measure_c_chi(kind);
        let l1_mass = power_l1_mass(n)?;
        Ok(Self { kind, c_chi, l1_mass })
    }

    /// Constant weight truncated to the reference domain. K1 = 0 by construction.
    pub fn flat() -> Self {
        Self {
            kind: WeightKind::Flat,
            c_chi: 0.0,
            l1_mass: 2.0 * REF_HALF_WIDTH,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            WeightKind::Power { n } => (1.0 + x * x).powf(-n),
            WeightKind::Flat => 1.0,
        }
    }

    #[inline]
    pub fn grad(&self, x: f64) -> f64 {
        match self.kind {
            WeightKind::Power { n } => -2.0 * n * x * (1.0 + x * x).powf(-n - 1.0),
            WeightKind::Flat => 0.0,
        }
    }

    #[inline]
    pub fn second(&self, x: f64) -> f64 {
        match self.kind {
            WeightKind::Power { n } => {
                let s = 1.0 + x * x;
                -2.0 * n * s.powf(-n - 1.0) + 4.0 * n * (n + 1.0) * x * x * s.powf(-n - 2.0)
            }
            WeightKind::Flat => 0.0,
        }
    }

    /// max |chi''| / chi over the reference grid; finite for the power weights,
    /// which is what lets them double as W^{2,inf} weights.
    pub fn second_derivative_ratio(&self) -> f64 {
        ref_grid()
            .map(|x| (self.second(x) / self.eval(x)).abs())
            .fold(0.0, f64::max)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            WeightKind::Power { .. } => "power",
            WeightKind::Flat => "flat",
        }
    }

    pub fn parameter(&self) -> f64 {
        match self.kind {
            WeightKind::Power { n } => n,
            WeightKind::Flat => 0.0,
        }
    }
}

fn ref_grid() -> impl Iterator<Item = f64> {
    let dx = 2.0 * REF_HALF_WIDTH / REF_POINTS as f64;
    (0..=REF_POINTS).map(move |j| -REF_HALF_WIDTH + j as f64 * dx)
}

/// Grid scan plus local golden-section refinement of max |chi'|/chi.
fn measure_c_chi(kind: WeightKind) -> f64 {
    let w = WeightFunction { kind, c_chi: 0.0, l1_mass: 1.0 };
    let ratio = |x: f64| (w.grad(x) / w.eval(x)).abs();
    let dx = 2.0 * REF_HALF_WIDTH / REF_POINTS as f64;
    let mut best_x = 0.0;
    let mut best = 0.0;
    for x in ref_grid() {
        let r = ratio(x);
        if r > best {
            best = r;
            best_x = x;
        }
    }
    if best == 0.0 {
        return 0.0;
    }
    let (_, refined) = refine_max(&ratio, best_x - 2.0 * dx, best_x + 2.0 * dx, 1e-12);
    refined.max(best)
}

/// Exact mass of chi_N via the substitution x = tan(theta) for N >= 1;
/// truncated quadrature plus a two-term asymptotic tail for 1/2 < N < 1.
fn power_l1_mass(n: f64) -> Result<f64> {
    if n >= 1.0 {
        let f = move |theta: f64| theta.cos().powf(2.0 * n - 2.0);
        adaptive_simpson(&f, -std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, 1e-13)
    } else {
        let x_max = 1e4;
        let f = move |x: f64| (1.0 + x * x).powf(-n);
        let core = adaptive_simpson(&f, -x_max, x_max, 1e-13)?;
        // int_X^inf (1+x^2)^{-N} dx ~ X^{1-2N}/(2N-1) - N X^{-1-2N}/(2N+1)
        let tail = x_max.powf(1.0 - 2.0 * n) / (2.0 * n - 1.0)
            - n * x_max.powf(-1.0 - 2.0 * n) / (2.0 * n + 1.0);
        Ok(core + 2.0 * tail)
    }
}

/// The two translation/comparability constants of the weight class.
#[derive(Debug, Clone, Copy)]
pub struct WeightPropertyReport {
    /// max over grid x, |z| <= z_max of |chi(x+z) - chi(x)| / (chi(x) |z|)
    pub k1: f64,
    /// max over |x - y| <= R of chi(x) / chi(y)
    pub k2: f64,
}

/// Brute-force verification of the translation inequality and the bounded
/// comparability ratio on a grid.
pub fn verify_weight_properties(
    chi: &WeightFunction,
    grid: &GridSpec,
    z_max: f64,
    r: f64,
) -> Result<WeightPropertyReport> {
    if !(z_max > 0.0 && z_max <= 1.0) {
        return Err(Error::InvalidInput("z_max must lie in (0, 1]".into()));
    }
    if r < z_max {
        return Err(Error::InvalidInput("R must be at least z_max".into()));
    }
    let n_z = 64;
    let mut k1: f64 = 0.0;
    for j in 0..grid.n_cells {
        let x = grid.x(j);
        let cx = chi.eval(x);
        for i in 1..=n_z {
            let z = z_max * i as f64 / n_z as f64;
            for z in [z, -z] {
                let ratio = (chi.eval(x + z) - cx).abs() / (cx * z.abs());
                k1 = k1.max(ratio);
            }
        }
    }
    let reach = (r / grid.dx).floor() as isize;
    let mut k2: f64 = 0.0;
    for j in 0..grid.n_cells as isize {
        let cx = chi.eval(grid.x(j as usize));
        for i in (j - reach).max(0)..=(j + reach).min(grid.n_cells as isize - 1) {
            let cy = chi.eval(grid.x(i as usize));
            k2 = k2.max(cx / cy);
        }
    }
    if !(k1.is_finite() && k2.is_finite()) {
        return Err(Error::PropertyViolation(
            "weight properties produced non-finite constants; weight not in the admissible class"
                .into(),
        ));
    }
    Ok(WeightPropertyReport { k1, k2 })
}

/// (sum_j |u_j|^p chi(x_j) dx)^{1/p} by midpoint quadrature over the full grid.
pub fn weighted_lp_norm(u: &[f64], chi: &WeightFunction, p: f64, grid: &GridSpec) -> Result<f64> {
    weighted_lp_norm_windowed(u, chi, p, grid, 0.0)
}

/// Same norm restricted to the interior window [-L + margin, L - margin].
pub fn weighted_lp_norm_windowed(
    u: &[f64],
    chi: &WeightFunction,
    p: f64,
    grid: &GridSpec,
    margin: f64,
) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::InvalidInput("p must be >= 1".into()));
    }
    if u.len() != grid.n_cells {
        return Err(Error::InvalidInput("grid function length mismatch".into()));
    }
    let mut acc = KahanSum::new();
    for j in grid.interior_range(margin) {
        let v = u[j];
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite entry at cell {j}")));
        }
        acc.add(v.abs().powf(p) * chi.eval(grid.x(j)) * grid.dx);
    }
    Ok(acc.value().powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    fn fine_grid(l: f64, n: usize) -> GridSpec {
        GridSpec::new(l, n, Boundary::Periodic).unwrap()
    }

    #[test]
    fn power_weight_point_values() {
        let w = WeightFunction::power(1.0).unwrap();
        assert_eq!(w.eval(0.0), 1.0);
        assert_eq!(w.eval(1.0), 0.5);
    }

    #[test]
    fn rejects_non_integrable() {
        assert!(WeightFunction::power(0.5).is_err());
        assert!(WeightFunction::power(0.2).is_err());
    }

    #[test]
    fn measured_c_chi_equals_n() {
        // Oracle: |chi_N'|/chi_N = 2N|x|/(1+x^2), maximized at |x| = 1 with value N.
        for n in [1.0, 2.0, 4.0] {
            let w = WeightFunction::power(n).unwrap();
            assert!((w.c_chi - n).abs() < 1e-6, "N = {n}: c_chi = {}", w.c_chi);
        }
    }

    #[test]
    fn l1_mass_matches_truncated_quadrature_plus_tail() {
        // Invariant: l1_mass agrees with midpoint quadrature over [-L, L]
        // plus the analytic tail bound, to 1e-6 relative.
        let w = WeightFunction::power(1.0).unwrap();
        assert!((w.l1_mass - std::f64::consts::PI).abs() < 1e-10);
        let l = 1000.0;
        let n_pts = 400_000;
        let dx = 2.0 * l / n_pts as f64;
        let mut acc = KahanSum::new();
        for j in 0..n_pts {
            let x = -l + (j as f64 + 0.5) * dx;
            acc.add(w.eval(x) * dx);
        }
        let tail = 2.0 * (1.0 / l); // int_L^inf dx/(1+x^2) ~ 1/L
        let approx = acc.value() + tail;
        assert!((approx - w.l1_mass).abs() / w.l1_mass < 1e-6);
    }

    #[test]
    fn weight_properties_chi1() {
        let grid = fine_grid(20.0, 4096);
        let w = WeightFunction::power(1.0).unwrap();
        let rep = verify_weight_properties(&w, &grid, 1.0, 1.0).unwrap();
        // Oracle: chi(x)/chi(y) = (1+y^2)/(1+x^2) <= (1+(|x|+1)^2)/(1+x^2) <= 4 for |x-y| <= 1.
        assert!(rep.k1.is_finite());
        assert!(rep.k1 <= (w.c_chi * 1.0f64).exp() * 1.05, "k1 = {}", rep.k1);
        assert!(rep.k2 <= 4.0 + 1e-9, "k2 = {}", rep.k2);
        // brute-force oracle: max of (1+(x+1)^2)/(1+x^2) is (3+sqrt(5))/2 ~ 2.618
        assert!((rep.k2 - 2.618).abs() < 2e-2, "k2 = {}", rep.k2);
    }

    #[test]
    fn weight_properties_flat_k1_zero() {
        let grid = fine_grid(20.0, 1024);
        let rep = verify_weight_properties(&WeightFunction::flat(), &grid, 1.0, 1.0).unwrap();
        assert_eq!(rep.k1, 0.0);
        assert_eq!(rep.k2, 1.0);
    }

    #[test]
    fn weight_properties_chi2_k2() {
        // Oracle: grid maximization of ((1+y^2)/(1+x^2))^2 over |x-y| <= 1.
        let grid = fine_grid(20.0, 4096);
        let w = WeightFunction::power(2.0).unwrap();
        let rep = verify_weight_properties(&w, &grid, 1.0, 1.0).unwrap();
        let mut oracle: f64 = 0.0;
        let reach = (1.0 / grid.dx).floor() as isize;
        for j in 0..grid.n_cells as isize {
            let x = grid.x(j as usize);
            for i in (j - reach).max(0)..=(j + reach).min(grid.n_cells as isize - 1) {
                let y = grid.x(i as usize);
                oracle = oracle.max(((1.0 + y * y) / (1.0 + x * x)).powi(2));
            }
        }
        assert!((rep.k2 - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn lp_norm_zero_function() {
        let grid = fine_grid(10.0, 256);
        let w = WeightFunction::power(1.0).unwrap();
        let u = vec![0.0; 256];
        assert_eq!(weighted_lp_norm(&u, &w, 2.0, &grid).unwrap(), 0.0);
    }

    #[test]
    fn lp_norm_constant_one_approximates_pi() {
        let grid = fine_grid(200.0, 1 << 15);
        let w = WeightFunction::power(1.0).unwrap();
        let u = vec![1.0; grid.n_cells];
        let v = weighted_lp_norm(&u, &w, 1.0, &grid).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-2);
    }

    #[test]
    fn lp_norm_linear_matches_quadrature_oracle() {
        // Independent high-order quadrature oracle for (int x^2 chi_1 dx)^{1/2}.
        let grid = fine_grid(5.0, 1 << 14);
        let w = WeightFunction::power(1.0).unwrap();
        let u: Vec<f64> = grid.centers();
        let v = weighted_lp_norm(&u, &w, 2.0, &grid).unwrap();
        let oracle_sq =
            adaptive_simpson(&|x: f64| x * x / (1.0 + x * x), -5.0, 5.0, 1e-13).unwrap();
        let oracle = oracle_sq.sqrt();
        assert!(
            (v - oracle).abs() / oracle < 1e-6,
            "midpoint {v} vs oracle {oracle}"
        );
    }

    #[test]
    fn lp_norm_rejects_non_finite() {
        let grid = fine_grid(10.0, 256);
        let w = WeightFunction::power(1.0).unwrap();
        let mut u = vec![0.0; 256];
        u[10] = f64::NAN;
        assert!(weighted_lp_norm(&u, &w, 2.0, &grid).is_err());
    }

    #[test]
    fn norm_monotone_in_weight() {
        // chi_1 >= chi_2 pointwise, so the chi_1 norm dominates.
        let grid = fine_grid(10.0, 512);
        let w1 = WeightFunction::power(1.0).unwrap();
        let w2 = WeightFunction::power(2.0).unwrap();
        let u: Vec<f64> = grid.centers().iter().map(|x| x.sin() + 0.3).collect();
        let n1 = weighted_lp_norm(&u, &w1, 2.0, &grid).unwrap();
        let n2 = weighted_lp_norm(&u, &w2, 2.0, &grid).unwrap();
        assert!(n1 >= n2);
    }
}
