//! Flux/entropy pairs, the entropy flux q with q' = eta' f', and the
//! fourth-power lower bound on the interaction defect
//! (w - v)(q(w) - q(v)) - (eta(w) - eta(v))(f(w) - f(v)).

use crate::error::{Error, Result};
use crate::numeric::adaptive_simpson;

/// Validation lattice half-width; must dominate realized solution ranges.
pub const DEFAULT_LATTICE_HALF_WIDTH: f64 = 8.0;
const Q_TABLE_NODES: usize = 1025;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxKind {
    /// f(u) = u^2 / 2
    Burgers,
    /// f(u) = u^4 / 4
    Quartic,
    /// f = 0; degenerate flux for heat / pure-noise sanity runs only.
    /// Not admissible for the nonlinearity machinery (c_f = 0).
    Zero,
}

/// A convex flux with its genuine-nonlinearity constants
/// f'(v) - f'(w) >= c_f (v - w)^{p_f} for w < v.
#[derive(Debug, Clone, Copy)]
pub struct FluxSpec {
    pub kind: FluxKind,
    pub c_f: f64,
    pub p_f: f64,
    /// Argmin of the convex flux; used by the Engquist-Osher splitting.
    pub argmin: f64,
}

impl FluxSpec {
    pub fn burgers() -> Self {
        // f'(v) - f'(w) = v - w, so c_f = 1 and p_f = 1 exactly.
        Self { kind: FluxKind::Burgers, c_f: 1.0, p_f: 1.0, argmin: 0.0 }
    }

    pub fn zero() -> Self {
        Self { kind: FluxKind::Zero, c_f: 0.0, p_f: 1.0, argmin: 0.0 }
    }

    pub fn quartic() -> Self {
        // f'(v) - f'(w) = v^3 - w^3 >= (v - w)^3 / 4, attained as v + w -> 0.
        let mut flux = Self { kind: FluxKind::Quartic, c_f: 0.25, p_f: 3.0, argmin: 0.0 };
        // keep the declared constant honest: measure on the default lattice
        let lattice = default_lattice();
        flux.c_f = measure_increment_constant(|u| flux.f_prime(u), flux.p_f, &lattice)
            .unwrap_or(0.25)
            .min(0.25);
        flux
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        match self.kind {
            FluxKind::Burgers => 0.5 * u * u,
            FluxKind::Quartic => 0.25 * u * u * u * u,
            FluxKind::Zero => 0.0,
        }
    }

    #[inline]
    pub fn f_prime(&self, u: f64) -> f64 {
        match self.kind {
            FluxKind::Burgers => u,
            FluxKind::Quartic => u * u * u,
            FluxKind::Zero => 0.0,
        }
    }

    /// Engquist-Osher numerical flux for a convex f with minimizer `argmin`:
    /// F(a, b) = f(max(a, u*)) + f(min(b, u*)) - f(u*).
    #[inline]
    pub fn eo_flux(&self, a: f64, b: f64) -> f64 {
        let m = self.argmin;
        self.f(a.max(m)) + self.f(b.min(m)) - self.f(m)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FluxKind::Burgers => "burgers",
            FluxKind::Quartic => "quartic",
            FluxKind::Zero => "zero",
        }
    }
}

pub fn default_lattice() -> Vec<f64> {
    lattice(DEFAULT_LATTICE_HALF_WIDTH, 161)
}

pub fn lattice(half_width: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64)
        .collect()
}

/// inf over lattice pairs w < v of (g(v) - g(w)) / (v - w)^p; errors when the
/// infimum is not strictly positive (degenerate nonlinearity declaration).
pub fn measure_increment_constant(
    g: impl Fn(f64) -> f64,
    p: f64,
    lattice: &[f64],
) -> Result<f64> {
    if lattice.len() < 2 {
        return Err(Error::InvalidInput("lattice needs at least 2 points".into()));
    }
    let mut inf = f64::INFINITY;
    for (i, &w) in lattice.iter().enumerate() {
        let gw = g(w);
        for &v in &lattice[i + 1..] {
            if v <= w {
                continue;
            }
            let ratio = (g(v) - gw) / (v - w).powf(p);
            inf = inf.min(ratio);
        }
    }
    if !(inf > 0.0) {
        return Err(Error::PropertyViolation(format!(
            "increment constant is not positive (inf = {inf}); nonlinearity assumption fails"
        )));
    }
    Ok(inf)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyKind {
    /// eta = f
    SameAsFlux,
    /// eta(u) = |u|^{p0}, p0 >= 2
    Power { p0: f64 },
    /// eta(u) = u; degenerate, construction is rejected.
    Linear,
}

/// Entropy lattice cache for q(u) = int_0^u eta'(s) f'(s) ds, anchored at
/// q(0) = 0, with cubic Hermite evaluation between nodes (slopes are the
/// exact q' = eta' f').
#[derive(Debug, Clone)]
struct QTable {
    half_width: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl QTable {
    fn build(
        flux: &FluxSpec,
        eta_prime: &dyn Fn(f64) -> f64,
        half_width: f64,
        nodes: usize,
    ) -> Result<Self> {
        assert!(nodes % 2 == 1, "node count must be odd so 0 is a node");
        let step = 2.0 * half_width / (nodes - 1) as f64;
        let xs: Vec<f64> = (0..nodes).map(|i| -half_width + i as f64 * step).collect();
        let g = |u: f64| eta_prime(u) * flux.f_prime(u);
        let zero = nodes / 2;
        let mut values = vec![0.0; nodes];
        for i in zero..nodes - 1 {
            let inc = adaptive_simpson(&g, xs[i], xs[i + 1], 1e-13).map_err(|e| {
                Error::Numerical(format!(
                    "entropy-flux quadrature failed on [{}, {}]: {e}",
                    xs[i],
                    xs[i + 1]
                ))
            })?;
            values[i + 1] = values[i] + inc;
        }
        for i in (0..zero).rev() {
            let inc = adaptive_simpson(&g, xs[i], xs[i + 1], 1e-13).map_err(|e| {
                Error::Numerical(format!(
                    "entropy-flux quadrature failed on [{}, {}]: {e}",
                    xs[i],
                    xs[i + 1]
                ))
            })?;
            values[i] = values[i + 1] - inc;
        }
        let slopes = xs.iter().map(|&x| g(x)).collect();
        Ok(Self { half_width, step, values, slopes })
    }

    fn eval(&self, u: f64) -> Result<f64> {
        if !u.is_finite() || u.abs() > self.half_width {
            return Err(Error::InvalidInput(format!(
                "entropy-flux evaluation at {u} is outside the cached lattice [-{l}, {l}]",
                l = self.half_width
            )));
        }
        let pos = (u + self.half_width) / self.step;
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let t = pos - i as f64;
        let (q0, q1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * q0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * q1
            + (t3 - t2) * m1)
    }
}

/// An entropy eta with its nonlinearity and growth parameters, and the
/// cached entropy flux q.
#[derive(Debug, Clone)]
pub struct EntropyPair {
    pub kind: EntropyKind,
    flux_kind: FluxKind,
    pub c_eta: f64,
    pub p_eta: f64,
    pub p0: f64,
    /// Measured polynomial-growth constant: max of |eta|/(1+|u|^{p0}),
    /// |eta'|/(1+|u|^{p0-1}), |eta''|/(1+|u|^{p0-2}) over the lattice.
    pub growth_k: f64,
    q_table: QTable,
}

impl EntropyPair {
    pub fn same_as_flux(flux: &FluxSpec) -> Result<Self> {
        let (p_eta, p0) = match flux.kind {
            FluxKind::Burgers => (1.0, 2.0),
            FluxKind::Quartic => (3.0, 4.0),
            FluxKind::Zero => (1.0, 2.0),
        };
        Self::build(EntropyKind::SameAsFlux, flux, p_eta, p0)
    }

    pub fn power(p0: f64, flux: &FluxSpec) -> Result<Self> {
        if p0 < 2.0 {
            return Err(Error::InvalidInput("power entropy requires p0 >= 2".into()));
        }
        Self::build(EntropyKind::Power { p0 }, flux, p0 - 1.0, p0)
    }

    /// eta(u) = u. eta' is constant, so the nonlinearity assumption fails for
    /// every c_eta > 0 and construction is rejected.
    pub fn linear(flux: &FluxSpec) -> Result<Self> {
        Self::build(EntropyKind::Linear, flux, 1.0, 2.0)
    }

    fn build(kind: EntropyKind, flux: &FluxSpec, p_eta: f64, p0: f64) -> Result<Self> {
        let lattice = default_lattice();
        let eta_prime = |u: f64| Self::eta_prime_of(kind, flux, u);
        let c_eta = measure_increment_constant(eta_prime, p_eta, &lattice)?;
        let growth_k = {
            let mut k: f64 = 0.0;
            for &u in &lattice {
                k = k.max(Self::eta_of(kind, flux, u).abs() / (1.0 + u.abs().powf(p0)));
                k = k.max(eta_prime(u).abs() / (1.0 + u.abs().powf(p0 - 1.0)));
                k = k.max(
                    Self::eta_second_of(kind, flux, u).abs() / (1.0 + u.abs().powf(p0 - 2.0)),
                );
            }
            if !k.is_finite() {
                return Err(Error::PropertyViolation(
                    "entropy growth constant is not finite".into(),
                ));
            }
            k
        };
        let q_table =
            QTable::build(flux, &eta_prime, DEFAULT_LATTICE_HALF_WIDTH, Q_TABLE_NODES)?;
        Ok(Self { kind, flux_kind: flux.kind, c_eta, p_eta, p0, growth_k, q_table })
    }

    fn eta_of(kind: EntropyKind, flux: &FluxSpec, u: f64) -> f64 {
        match kind {
            EntropyKind::SameAsFlux => flux.f(u),
            EntropyKind::Power { p0 } => u.abs().powf(p0),
            EntropyKind::Linear => u,
        }
    }

    fn eta_prime_of(kind: EntropyKind, flux: &FluxSpec, u: f64) -> f64 {
        match kind {
            EntropyKind::SameAsFlux => flux.f_prime(u),
            EntropyKind::Power { p0 } => p0 * u.abs().powf(p0 - 1.0) * u.signum(),
            EntropyKind::Linear => 1.0,
        }
    }

    fn eta_second_of(kind: EntropyKind, flux: &FluxSpec, u: f64) -> f64 {
        match kind {
            EntropyKind::SameAsFlux => match flux.kind {
                FluxKind::Burgers => 1.0,
                FluxKind::Quartic => 3.0 * u * u,
                FluxKind::Zero => 0.0,
            },
            EntropyKind::Power { p0 } => p0 * (p0 - 1.0) * u.abs().powf(p0 - 2.0),
            EntropyKind::Linear => 0.0,
        }
    }

    #[inline]
    pub fn eta(&self, u: f64) -> f64 {
        Self::eta_of(self.kind, &self.flux(), u)
    }

    #[inline]
    pub fn eta_prime(&self, u: f64) -> f64 {
        Self::eta_prime_of(self.kind, &self.flux(), u)
    }

    #[inline]
    pub fn eta_second(&self, u: f64) -> f64 {
        Self::eta_second_of(self.kind, &self.flux(), u)
    }

    fn flux(&self) -> FluxSpec {
        match self.flux_kind {
            FluxKind::Burgers => FluxSpec::burgers(),
            FluxKind::Quartic => FluxSpec::quartic(),
            FluxKind::Zero => FluxSpec::zero(),
        }
    }

    /// Entropy flux q(u) = int_0^u eta'(s) f'(s) ds, anchored at q(0) = 0.
    pub fn q(&self, u: f64) -> Result<f64> {
        self.q_table.eval(u)
    }

    pub fn name(&self) -> String {
        match self.kind {
            EntropyKind::SameAsFlux => "same-as-flux".into(),
            EntropyKind::Power { p0 } => format!("power:{p0}"),
            EntropyKind::Linear => "linear".into(),
        }
    }
}

/// Lemma constant C_{f,eta} = C_f C_eta / ((1 + p_f + p_eta)(2 + p_f + p_eta)).
pub fn lemma_constant(flux: &FluxSpec, pair: &EntropyPair) -> f64 {
    let s = flux.p_f + pair.p_eta;
    flux.c_f * pair.c_eta / ((1.0 + s) * (2.0 + s))
}

/// (w - v)(q(w) - q(v)) - (eta(w) - eta(v))(f(w) - f(v))
pub fn interaction_defect(flux: &FluxSpec, pair: &EntropyPair, v: f64, w: f64) -> Result<f64> {
    let qv = pair.q(v)?;
    let qw = pair.q(w)?;
    Ok((w - v) * (qw - qv) - (pair.eta(w) - pair.eta(v)) * (flux.f(w) - flux.f(v)))
}

/// min over lattice pairs w < v of defect / (v - w)^{p_f + p_eta + 2};
/// must not fall below the lemma constant (up to 1e-9).
pub fn verify_lemma_bound(flux: &FluxSpec, pair: &EntropyPair, lattice: &[f64]) -> Result<f64> {
    if lattice.len() < 2 {
        return Err(Error::InvalidInput("lattice needs at least 2 distinct points".into()));
    }
    let power = flux.p_f + pair.p_eta + 2.0;
    let c = lemma_constant(flux, pair);
    let mut min_ratio = f64::INFINITY;
    for (i, &w) in lattice.iter().enumerate() {
        for &v in &lattice[i + 1..] {
            if v <= w {
                continue;
            }
            let ratio = interaction_defect(flux, pair, v, w)? / (v - w).powf(power);
            min_ratio = min_ratio.min(ratio);
        }
    }
    if min_ratio < c - 1e-9 {
        return Err(Error::PropertyViolation(format!(
            "interaction-defect ratio {min_ratio} falls below the lemma constant {c}; \
             the declared (C_f, p_f, C_eta, p_eta) are invalid"
        )));
    }
    Ok(min_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burgers_closed_forms() {
        let f = FluxSpec::burgers();
        assert_eq!(f.f(2.0), 2.0);
        assert_eq!(f.c_f, 1.0);
        assert_eq!(f.p_f, 1.0);
        // |f''| = 1 everywhere
        for u in [-3.0, 0.0, 5.0] {
            let h = 1e-4;
            let second = (f.f_prime(u + h) - f.f_prime(u - h)) / (2.0 * h);
            assert!((second - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn entropy_flux_burgers_cubic() {
        // eta = f gives q(u) = u^3/3; quadrature vs closed-form antiderivative.
        let f = FluxSpec::burgers();
        let pair = EntropyPair::same_as_flux(&f).unwrap();
        assert!((pair.q(1.0).unwrap() - 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(pair.q(0.0).unwrap(), 0.0);
        for u in [-5.0, -1.3, 0.7, 2.5, 4.999] {
            assert!(
                (pair.q(u).unwrap() - u * u * u / 3.0).abs() < 1e-10,
                "q({u})"
            );
        }
    }

    #[test]
    fn linear_entropy_gives_flux_back() {
        // eta(u) = u would give q = f; checked through the quadrature path by
        // integrating f' directly.
        let f = FluxSpec::burgers();
        let table = QTable::build(&f, &|_| 1.0, 8.0, 1025).unwrap();
        for u in [-2.0, 0.0, 1.5, 3.0] {
            assert!((table.eval(u).unwrap() - f.f(u)).abs() < 1e-10);
        }
    }

    #[test]
    fn q_eval_outside_lattice_rejected() {
        let f = FluxSpec::burgers();
        let pair = EntropyPair::same_as_flux(&f).unwrap();
        assert!(pair.q(8.5).is_err());
    }

    #[test]
    fn q_derivative_consistency() {
        // finite difference of q matches eta' f' within 1e-6
        let f = FluxSpec::burgers();
        let pair = EntropyPair::same_as_flux(&f).unwrap();
        let h = 1e-5;
        for &u in &lattice(6.0, 41) {
            let fd = (pair.q(u + h).unwrap() - pair.q(u - h).unwrap()) / (2.0 * h);
            let exact = pair.eta_prime(u) * f.f_prime(u);
            assert!((fd - exact).abs() < 1e-6, "at u = {u}: {fd} vs {exact}");
        }
    }

    #[test]
    fn defect_diagonal_zero() {
        let f = FluxSpec::burgers();
        let pair = EntropyPair::same_as_flux(&f).unwrap();
        assert_eq!(interaction_defect(&f, &pair, 1.3, 1.3).unwrap(), 0.0);
    }

    #[test]
    fn defect_burgers_exact_quartic() {
        // Symbolic oracle: with f = eta = u^2/2 and q = u^3/3,
        // defect(v, w) = (w - v)^4 / 12 identically.
        let f = FluxSpec::burgers();
        let pair = EntropyPair::same_as_flux(&f).unwrap();
        let d1 = interaction_defect(&f, &pair, 0.0, 1.0).unwrap();
        assert!((d1 - 1.0 / 12.0).abs() < 1e-12);
        let d2 = interaction_defect(&f, &pair, -3.0, 2.0).unwrap();
        assert!((d2 - 625.0 / 12.0).abs() < 1e-9);
    }

    #[test]
    fn defect_symmetry() {
        let f = FluxSpec::burgers();
        let pair = EntropyPair::same_as_flux(&f).unwrap();
        for (v, w) in [(0.3, -1.2), (2.0, 4.0), (-3.5, -0.1)] {
            let a = interaction_defect(&f, &pair, v, w).unwrap();
            let b = interaction_defect(&f, &pair, w, v).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn defect_anchor_invariance() {
        // Only differences of q enter the defect, so shifting the anchor
        // q -> q + c changes nothing.
        let f = FluxSpec::burgers();
        let pair = EntropyPair::same_as_flux(&f).unwrap();
        let shift = 17.5;
        for (v, w) in [(0.5, -2.0), (1.0, 3.0)] {
            let plain = interaction_defect(&f, &pair, v, w).unwrap();
            let shifted = (w - v) * ((pair.q(w).unwrap() + shift) - (pair.q(v).unwrap() + shift))
                - (pair.eta(w) - pair.eta(v)) * (f.f(w) - f.f(v));
            assert!((plain - shifted).abs() < 1e-12);
        }
    }

    #[test]
    fn lemma_bound_burgers_constant_ratio() {
        let f = FluxSpec::burgers();
        let pair = EntropyPair::same_as_flux(&f).unwrap();
        assert!((lemma_constant(&f, &pair) - 1.0 / 12.0).abs() < 1e-15);
        let lat = lattice(5.0, 101);
        let min_ratio = verify_lemma_bound(&f, &pair, &lat).unwrap();
        assert!((min_ratio - 1.0 / 12.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_linear_entropy_rejected() {
        let f = FluxSpec::burgers();
        let err = EntropyPair::linear(&f).unwrap_err();
        assert!(matches!(err, Error::PropertyViolation(_)));
    }

    #[test]
    fn quartic_lemma_bound() {
        // Brute-force lattice check with measured constants; C_f = C_eta = 1/4,
        // p_f = p_eta = 3, so the lemma constant is C_f C_eta / 56.
        let f = FluxSpec::quartic();
        let pair = EntropyPair::same_as_flux(&f).unwrap();
        assert!((f.c_f - 0.25).abs() < 1e-6);
        assert!((pair.c_eta - 0.25).abs() < 1e-6);
        let lat = lattice(3.0, 61);
        let min_ratio = verify_lemma_bound(&f, &pair, &lat).unwrap();
        assert!(min_ratio >= f.c_f * pair.c_eta / 56.0 - 1e-9);
    }

    #[test]
    fn power_entropy_p2() {
        let f = FluxSpec::burgers();
        let pair = EntropyPair::power(2.0, &f).unwrap();
        assert!((pair.c_eta - 2.0).abs() < 1e-12);
        assert_eq!(pair.p_eta, 1.0);
        // q' = 2u * u = 2u^2, q(u) = 2u^3/3
        assert!((pair.q(1.5).unwrap() - 2.0 * 1.5f64.powi(3) / 3.0).abs() < 1e-9);
    }

    #[test]
    fn eo_flux_burgers() {
        let f = FluxSpec::burgers();
        // upwind for positive data, downwind for negative
        assert_eq!(f.eo_flux(2.0, 3.0), f.f(2.0));
        assert_eq!(f.eo_flux(-2.0, -3.0), f.f(-3.0));
        // transonic rarefaction: both arguments clamp to the sonic point
        assert_eq!(f.eo_flux(-1.0, 2.0), f.f(0.0));
        // transonic shock: both sides contribute
        assert_eq!(f.eo_flux(1.0, -1.0), f.f(1.0) + f.f(-1.0));
    }
}
