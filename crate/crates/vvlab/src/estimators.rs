//! Translation-modulus functionals in space and time, Monte Carlo curves
//! with rate fits, and the Kruzkov-type interpolation optimizer
//! rho^t(delta) = inf_nu (C1 rho^x(nu) + C2 delta/nu^mF + C3 sqrt(delta)/nu^mG).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mollifiers::BaseKernel;
use crate::numeric::{golden_section_min, mean_stderr, KahanSum};
use crate::solver::PathResult;
use crate::weights::WeightFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulusKind {
    SpatialSup,
    SpatialMollified,
    TemporalSup,
    PowerP,
}

impl ModulusKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SpatialSup => "spatial_sup",
            Self::SpatialMollified => "spatial_mollified",
            Self::TemporalSup => "temporal_sup",
            Self::PowerP => "power_p",
        }
    }

    fn is_sup(&self) -> bool {
        matches!(self, Self::SpatialSup | Self::TemporalSup)
    }
}

/// Monte Carlo means of a modulus functional over a delta grid.
#[derive(Debug, Clone)]
pub struct ModulusCurve {
    pub kind: ModulusKind,
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errs: Vec<f64>,
    pub n_paths: usize,
}

/// Combine per-path sample vectors (one value per delta) into a curve.
pub fn curve_from_samples(
    kind: ModulusKind,
    deltas: &[f64],
    samples: &[Vec<f64>],
) -> Result<ModulusCurve> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no sample paths".into()));
    }
    if deltas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("deltas must be strictly increasing".into()));
    }
    for s in samples {
        if s.len() != deltas.len() {
            return Err(Error::InvalidInput("sample length mismatch".into()));
        }
    }
    let mut values = Vec::with_capacity(deltas.len());
    let mut std_errs = Vec::with_capacity(deltas.len());
    for i in 0..deltas.len() {
        let col: Vec<f64> = samples.iter().map(|s| s[i]).collect();
        let (m, se) = mean_stderr(&col);
        values.push(m);
        std_errs.push(se);
    }
    if kind.is_sup() {
        for w in values.windows(2) {
            if w[1] < w[0] - 1e-12 * w[0].abs().max(1.0) {
                return Err(Error::PropertyViolation(format!(
                    "{} curve is not nondecreasing: {} then {}",
                    kind.name(),
                    w[0],
                    w[1]
                )));
            }
        }
    }
    Ok(ModulusCurve { kind, deltas: deltas.to_vec(), values, std_errs, n_paths: samples.len() })
}

/// Weighted spatial L1 distance between a path state and its z-shift,
/// time-integrated with left-point quadrature.
fn shift_l1(path: &PathResult, chi: &WeightFunction, m: isize) -> f64 {
    let grid = &path.grid;
    let mut acc = KahanSum::new();
    for k in 0..path.n_steps() {
        let u = path.u.row(k);
        let mut space = KahanSum::new();
        for j in 0..grid.n_cells {
            let diff = grid.sample(u, j as isize + m) - u[j];
            space.add(diff.abs() * chi.eval(grid.x(j)) * grid.dx);
        }
        acc.add(space.value() * path.dt);
    }
    acc.value()
}

/// Evenly subsampled shift magnitudes 1..=m_max, at most `cap` of them,
/// always including m_max.
fn subsample_shifts(m_max: isize, cap: usize) -> Vec<isize> {
    if m_max <= cap as isize {
        return (1..=m_max).collect();
    }
    let mut out: Vec<isize> = (1..=cap as isize)
        .map(|i| ((i as f64 / cap as f64) * m_max as f64).round() as isize)
        .collect();
    out.dedup();
    out
}

/// Per-path sup_{|z| <= delta, z grid-aligned} of the shifted L1 distance,
/// for each delta. Shift values are cached across deltas, so the sup runs
/// over a nested family and the result is nondecreasing by construction.
pub fn spatial_sup_sample(
    path: &PathResult,
    chi: &WeightFunction,
    deltas: &[f64],
    z_per_delta: usize,
) -> Result<Vec<f64>> {
    if z_per_delta == 0 {
        return Err(Error::InvalidInput("z_per_delta must be positive".into()));
    }
    let dx = path.grid.dx;
    let mut cache: BTreeMap<isize, f64> = BTreeMap::new();
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let m_max = (delta / dx + 1e-9).floor() as isize;
        if m_max < 1 {
            return Err(Error::InvalidInput(format!(
                "delta = {delta} admits no grid-aligned shift (dx = {dx})"
            )));
        }
        for m in subsample_shifts(m_max, z_per_delta) {
            for signed in [m, -m] {
                cache.entry(signed).or_insert_with(|| shift_l1(path, chi, signed));
            }
        }
        let sup = cache
            .iter()
            .filter(|(m, _)| m.unsigned_abs() as isize <= m_max)
            .fold(0.0f64, |s, (_, &v)| s.max(v));
        out.push(sup);
    }
    Ok(out)
}

/// Per-path mollified symmetric-difference functional
/// int int int J_delta(z) |u(t, x+z) - u(t, x-z)| chi(x) dz dx dt
/// with the z-quadrature over grid-aligned shifts.
pub fn mollified_sample(
    path: &PathResult,
    chi: &WeightFunction,
    kernel: &BaseKernel,
    deltas: &[f64],
) -> Result<Vec<f64>> {
    let grid = &path.grid;
    let dx = grid.dx;
    let chi_v: Vec<f64> = grid.centers().iter().map(|&x| chi.eval(x)).collect();
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if delta < dx {
            return Err(Error::InvalidInput(format!(
                "kernel scale delta = {delta} is unresolved by the grid (dx = {dx})"
            )));
        }
        let k = kernel.rescaled(delta)?;
        let m_max = (k.support_radius() / dx).ceil() as isize;
        let mut acc = KahanSum::new();
        for m in -m_max..=m_max {
            let w = k.eval(m as f64 * dx) * dx;
            if w <= 0.0 || m == 0 {
                continue;
            }
            let mut field = KahanSum::new();
            for step in 0..path.n_steps() {
                let u = path.u.row(step);
                for j in 0..grid.n_cells {
                    let diff =
                        grid.sample(u, j as isize + m) - grid.sample(u, j as isize - m);
                    field.add(diff.abs() * chi_v[j] * dx);
                }
            }
            acc.add(w * field.value() * path.dt);
        }
        out.push(acc.value());
    }
    Ok(out)
}

/// Per-path sup_{tau <= delta, tau dt-aligned} of
/// int_0^{T - delta_max} int |u(t + tau, x) - u(t, x)| chi dx dt.
/// The time window is fixed at the largest delta so the sup family is
/// nested and the curve exactly nondecreasing.
pub fn temporal_sup_sample(
    path: &PathResult,
    chi: &WeightFunction,
    deltas: &[f64],
    lags_per_delta: usize,
) -> Result<Vec<f64>> {
    let t_final = path.n_steps() as f64 * path.dt;
    let delta_max = *deltas.last().ok_or_else(|| Error::InvalidInput("empty deltas".into()))?;
    if delta_max >= t_final {
        return Err(Error::InvalidInput(format!(
            "temporal delta {delta_max} must be below T = {t_final}"
        )));
    }
    let grid = &path.grid;
    let chi_v: Vec<f64> = grid.centers().iter().map(|&x| chi.eval(x)).collect();
    let k_window = path.n_steps() - (delta_max / path.dt + 1e-9).floor() as usize;
    let lag_l1 = |lag: usize| {
        let mut acc = KahanSum::new();
        for k in 0..k_window {
            let u = path.u.row(k);
            let v = path.u.row(k + lag);
            let mut space = KahanSum::new();
            for j in 0..grid.n_cells {
                space.add((v[j] - u[j]).abs() * chi_v[j] * grid.dx);
            }
            acc.add(space.value() * path.dt);
        }
        acc.value()
    };
    let mut cache: BTreeMap<usize, f64> = BTreeMap::new();
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let lag_max = (delta / path.dt + 1e-9).floor() as isize;
        if lag_max < 1 {
            return Err(Error::InvalidInput(format!(
                "delta = {delta} admits no dt-aligned lag (dt = {})",
                path.dt
            )));
        }
        for lag in subsample_shifts(lag_max, lags_per_delta) {
            cache.entry(lag as usize).or_insert_with(|| lag_l1(lag as usize));
        }
        let sup = cache
            .iter()
            .filter(|(&lag, _)| lag as isize <= lag_max)
            .fold(0.0f64, |s, (_, &v)| s.max(v));
        out.push(sup);
    }
    Ok(out)
}

/// Per-path single-shift power functional
/// int_0^T int |u(t, x+z) - u(t, x)|^p chi(x + z/2) dx dt, returned for both
/// the chi and chi^2 weights. The midpoint weight makes the +-z symmetry
/// exact on periodic grids.
pub fn power_sample(
    path: &PathResult,
    chi: &WeightFunction,
    power: f64,
    z_list: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if power < 1.0 {
        return Err(Error::InvalidInput("power must be >= 1".into()));
    }
    let grid = &path.grid;
    // on periodic grids the midpoint coordinate wraps with the data, which
    // keeps the +-z symmetry exact
    let wrap = |x: f64| match grid.boundary {
        crate::grid::Boundary::Periodic => {
            let l = grid.half_width;
            (x + l).rem_euclid(2.0 * l) - l
        }
        crate::grid::Boundary::DirichletZero => x,
    };
    let mut first = Vec::with_capacity(z_list.len());
    let mut second = Vec::with_capacity(z_list.len());
    for &z in z_list {
        let m = grid.aligned_cells(z)?;
        let w1: Vec<f64> =
            grid.centers().iter().map(|&x| chi.eval(wrap(x + 0.5 * z))).collect();
        let mut acc1 = KahanSum::new();
        let mut acc2 = KahanSum::new();
        for k in 0..path.n_steps() {
            let u = path.u.row(k);
            let mut s1 = KahanSum::new();
            let mut s2 = KahanSum::new();
            for j in 0..grid.n_cells {
                let diff = (grid.sample(u, j as isize + m) - u[j]).abs().powf(power);
                s1.add(diff * w1[j] * grid.dx);
                s2.add(diff * w1[j] * w1[j] * grid.dx);
            }
            acc1.add(s1.value() * path.dt);
            acc2.add(s2.value() * path.dt);
        }
        first.push(acc1.value());
        second.push(acc2.value());
    }
    Ok((first, second))
}

/// Ensemble wrappers: plain Monte Carlo means of the per-path samples.
pub fn spatial_sup_modulus(
    ensemble: &[PathResult],
    chi: &WeightFunction,
    deltas: &[f64],
    z_per_delta: usize,
) -> Result<ModulusCurve> {
    let samples: Vec<Vec<f64>> = ensemble
        .iter()
        .map(|p| spatial_sup_sample(p, chi, deltas, z_per_delta))
        .collect::<Result<_>>()?;
    curve_from_samples(ModulusKind::SpatialSup, deltas, &samples)
}

pub fn mollified_modulus(
    ensemble: &[PathResult],
    chi: &WeightFunction,
    kernel: &BaseKernel,
    deltas: &[f64],
) -> Result<ModulusCurve> {
    let samples: Vec<Vec<f64>> = ensemble
        .iter()
        .map(|p| mollified_sample(p, chi, kernel, deltas))
        .collect::<Result<_>>()?;
    curve_from_samples(ModulusKind::SpatialMollified, deltas, &samples)
}

pub fn temporal_sup_modulus(
    ensemble: &[PathResult],
    chi: &WeightFunction,
    deltas: &[f64],
    lags_per_delta: usize,
) -> Result<ModulusCurve> {
    let samples: Vec<Vec<f64>> = ensemble
        .iter()
        .map(|p| temporal_sup_sample(p, chi, deltas, lags_per_delta))
        .collect::<Result<_>>()?;
    curve_from_samples(ModulusKind::TemporalSup, deltas, &samples)
}

/// Power modulus for both the chi and chi^2 weights.
pub fn power_modulus(
    ensemble: &[PathResult],
    chi: &WeightFunction,
    power: f64,
    z_list: &[f64],
) -> Result<(ModulusCurve, ModulusCurve)> {
    let mut s1 = Vec::with_capacity(ensemble.len());
    let mut s2 = Vec::with_capacity(ensemble.len());
    for p in ensemble {
        let (a, b) = power_sample(p, chi, power, z_list)?;
        s1.push(a);
        s2.push(b);
    }
    Ok((
        curve_from_samples(ModulusKind::PowerP, z_list, &s1)?,
        curve_from_samples(ModulusKind::PowerP, z_list, &s2)?,
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
}

/// Least-squares slope of log(value) against log(delta) over `window`.
pub fn fit_rate(curve: &ModulusCurve, window: std::ops::Range<usize>) -> Result<RateFit> {
    if window.end > curve.deltas.len() || window.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "fit window {window:?} needs at least 3 in-range points"
        )));
    }
    let pts: Vec<(f64, f64)> = window
        .clone()
        .map(|i| (curve.deltas[i], curve.values[i]))
        .collect();
    if pts.iter().any(|&(_, v)| v <= 0.0) {
        return Err(Error::InvalidInput("fit window contains nonpositive values".into()));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(d, v)| (d.ln(), v.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = logs
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    let dof = (n - 2.0).max(1.0);
    let slope_stderr = (ssr / dof / sxx).sqrt();
    Ok(RateFit { slope, intercept, r_squared, slope_stderr })
}

/// Window excluding deltas within a factor 4 of the resolution floor and of
/// the saturation scale.
pub fn default_fit_window(deltas: &[f64], floor: f64, ceiling: f64) -> std::ops::Range<usize> {
    let lo = deltas.iter().position(|&d| d >= 4.0 * floor).unwrap_or(deltas.len());
    let hi = deltas
        .iter()
        .rposition(|&d| d <= ceiling / 4.0)
        .map(|i| i + 1)
        .unwrap_or(0);
    lo..hi.max(lo)
}

/// Monotone sampled modulus with log-linear interpolation; below the first
/// sample the value scales linearly to honor rho(0+) = 0.
#[derive(Debug, Clone)]
pub struct SampledModulus {
    deltas: Vec<f64>,
    values: Vec<f64>,
}

impl SampledModulus {
    pub fn new(deltas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if deltas.len() != values.len() || deltas.len() < 2 {
            return Err(Error::InvalidInput("need at least 2 modulus samples".into()));
        }
        if deltas.windows(2).any(|w| w[1] <= w[0]) || deltas[0] <= 0.0 {
            return Err(Error::InvalidInput("deltas must be positive increasing".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0] - 1e-12) || values[0] < 0.0 {
            return Err(Error::InvalidInput(
                "modulus samples must be nonnegative and nondecreasing".into(),
            ));
        }
        Ok(Self { deltas, values })
    }

    pub fn eval(&self, nu: f64) -> f64 {
        let (d, v) = (&self.deltas, &self.values);
        if nu <= d[0] {
            return v[0] * nu / d[0];
        }
        if nu >= *d.last().unwrap() {
            return *v.last().unwrap();
        }
        let i = d.partition_point(|&x| x < nu) - 1;
        let (d0, d1, v0, v1) = (d[i], d[i + 1], v[i], v[i + 1]);
        if v0 > 0.0 && v1 > 0.0 {
            let t = (nu / d0).ln() / (d1 / d0).ln();
            (v0.ln() * (1.0 - t) + v1.ln() * t).exp()
        } else {
            v0 + (v1 - v0) * (nu - d0) / (d1 - d0)
        }
    }
}

/// rho^t(delta) = inf_{nu > 0} (C1 rho^x(nu) + C2 delta / nu^mF
/// + C3 sqrt(delta) / nu^mG), minimized over log nu in [1e-8, 1e2] by a
/// coarse scan plus golden-section refinement.
pub fn kruzkov_rho_t(
    rho_x: &dyn Fn(f64) -> f64,
    c1: f64,
    c2: f64,
    c3: f64,
    m_f: u32,
    m_g: u32,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput("delta must be positive".into()));
    }
    if c1 < 0.0 || c2 < 0.0 || c3 < 0.0 {
        return Err(Error::InvalidInput("constants must be nonnegative".into()));
    }
    let objective = |t: f64| {
        let nu = t.exp();
        c1 * rho_x(nu) + c2 * delta / nu.powi(m_f as i32) + c3 * delta.sqrt() / nu.powi(m_g as i32)
    };
    let (t_lo, t_hi) = ((1e-8f64).ln(), (1e2f64).ln());
    let n_scan = 256;
    let mut best = (t_lo, objective(t_lo));
    for i in 1..=n_scan {
        let t = t_lo + (t_hi - t_lo) * i as f64 / n_scan as f64;
        let v = objective(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    let span = (t_hi - t_lo) / n_scan as f64;
    let a = (best.0 - span).max(t_lo);
    let b = (best.0 + span).min(t_hi);
    let (_, v) = golden_section_min(&objective, a, b, 1e-12);
    Ok(v.min(best.1))
}

/// Pointwise ratios sup-modulus / mollified-modulus; entries with a zero
/// denominator are skipped.
pub fn sup_vs_mollified_consistency(
    sup: &ModulusCurve,
    mollified: &ModulusCurve,
) -> Result<Vec<(f64, f64)>> {
    if sup.deltas != mollified.deltas {
        return Err(Error::InvalidInput("curves live on different delta grids".into()));
    }
    Ok(sup
        .deltas
        .iter()
        .zip(sup.values.iter().zip(&mollified.values))
        .filter(|(_, (_, &m))| m != 0.0)
        .map(|(&d, (&s, &m))| (d, s / m))
        .collect())
}

/// The exponents mu = 1 - 1/p and mu_x = mu / (p_f + p_eta + 2).
pub fn mu_exponents(p: f64, p_f: f64, p_eta: f64) -> (f64, f64) {
    let mu = 1.0 - 1.0 / p;
    (mu, mu / (p_f + p_eta + 2.0))
}
