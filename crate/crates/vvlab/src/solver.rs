//! Explicit Euler-Maruyama / Engquist-Osher discretization of
//! du + d_x f(u) dt = eps d2_xx u dt + sigma(x,u) dW with entropy-production
//! tracking, seeded Brownian paths with bridge refinement, and ensemble
//! drivers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::entropy::{lattice, EntropyPair, FluxSpec};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::numeric::{mean_stderr, KahanSum};
use crate::weights::{weighted_lp_norm, WeightFunction};

/// Hard cap standing in for an unbounded certified range (zero flux).
const RANGE_CAP: f64 = 1e12;
const CFL_SAFETY: f64 = 0.4;

/// Dense (time step, cell) array; row k is the state after k steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2 {
    pub n_steps: usize,
    pub n_cells: usize,
    data: Vec<f64>,
}

impl Field2 {
    pub fn zeros(n_steps: usize, n_cells: usize) -> Self {
        Self { n_steps, n_cells, data: vec![0.0; (n_steps + 1) * n_cells] }
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_cells..(k + 1) * self.n_cells]
    }

    #[inline]
    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.n_cells..(k + 1) * self.n_cells]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// -sin(pi x / L)
    MinusSin,
    /// sin(2 pi x / L): two full periods, the discrete heat eigenmode check
    Sine,
    /// smoothed step tanh(4x)/2 + 1/2
    SmoothedStep,
    /// seeded random trigonometric polynomial, 4 modes, decaying amplitudes
    RandomTrig,
    /// smooth bump supported in |x| < L/2, peak 1
    Bump,
    Zero,
}

impl InitialCondition {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "minus_sin" => Ok(Self::MinusSin),
            "sine" => Ok(Self::Sine),
            "smoothed_step" => Ok(Self::SmoothedStep),
            "random_trig" => Ok(Self::RandomTrig),
            "bump" => Ok(Self::Bump),
            "zero" => Ok(Self::Zero),
            other => Err(Error::Config(format!("unknown initial condition `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::MinusSin => "minus_sin",
            Self::Sine => "sine",
            Self::SmoothedStep => "smoothed_step",
            Self::RandomTrig => "random_trig",
            Self::Bump => "bump",
            Self::Zero => "zero",
        }
    }

    /// Sample the profile at the cell centers. RandomTrig draws its
    /// coefficients from a generator derived from `seed` only, so the profile
    /// is grid-independent and refinement-stable.
    pub fn evaluate(&self, grid: &GridSpec, seed: u64) -> Vec<f64> {
        let l = grid.half_width;
        match self {
            Self::MinusSin => {
                grid.centers().iter().map(|&x| -(std::f64::consts::PI * x / l).sin()).collect()
            }
            Self::Sine => grid
                .centers()
                .iter()
                .map(|&x| (2.0 * std::f64::consts::PI * x / l).sin())
                .collect(),
            Self::SmoothedStep => {
                grid.centers().iter().map(|&x| 0.5 * (4.0 * x).tanh() + 0.5).collect()
            }
            Self::RandomTrig => {
                let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
                let modes = 4;
                let coeffs: Vec<(f64, f64)> = (1..=modes)
                    .map(|m| {
                        let a: f64 = rng.sample(StandardNormal);
                        let b: f64 = rng.sample(StandardNormal);
                        (a / (m * m) as f64, b / (m * m) as f64)
                    })
                    .collect();
                grid.centers()
                    .iter()
                    .map(|&x| {
                        coeffs
                            .iter()
                            .enumerate()
                            .map(|(i, &(a, b))| {
                                let k = (i + 1) as f64 * std::f64::consts::PI / l;
                                a * (k * x).sin() + b * (k * x).cos()
                            })
                            .sum()
                    })
                    .collect()
            }
            Self::Bump => grid
                .centers()
                .iter()
                .map(|&x| {
                    let s = x / (0.5 * l);
                    if s.abs() < 1.0 {
                        (1.0 - 1.0 / (1.0 - s * s)).exp()
                    } else {
                        0.0
                    }
                })
                .collect(),
            Self::Zero => vec![0.0; grid.n_cells],
        }
    }
}

/// Noise amplitude sigma(x, u) with its linear-growth constant K_sigma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    None,
    /// sigma = amp (independent of x and u)
    Additive { amp: f64 },
    /// sigma = amp * u (multiplicative; preserves u = 0 regions)
    Linear { amp: f64 },
}

impl NoiseSpec {
    pub fn parse(name: &str, amp: f64) -> Result<Self> {
        let spec = match name {
            "none" => Self::None,
            "additive" => Self::Additive { amp },
            "linear" => Self::Linear { amp },
            other => return Err(Error::Config(format!("unknown noise `{other}`"))),
        };
        spec.validate_growth()?;
        Ok(spec)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Additive { .. } => "additive",
            Self::Linear { .. } => "linear",
        }
    }

    #[inline]
    pub fn sigma(&self, _x: f64, u: f64) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Additive { amp } => *amp,
            Self::Linear { amp } => amp * u,
        }
    }

    pub fn growth_const(&self) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Additive { amp } | Self::Linear { amp } => amp.abs(),
        }
    }

    /// |sigma(x,u)| <= K_sigma (1 + |u|) on a sampled (x, u) lattice.
    pub fn validate_growth(&self) -> Result<()> {
        let k = self.growth_const();
        for &x in &lattice(10.0, 41) {
            for &u in &lattice(10.0, 81) {
                if self.sigma(x, u).abs() > k * (1.0 + u.abs()) + 1e-12 {
                    return Err(Error::PropertyViolation(format!(
                        "noise growth bound violated at (x, u) = ({x}, {u})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Self::None)
    }
}

/// A Brownian increment sequence at time step `dt`; each entry ~ N(0, dt).
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub dt: f64,
    pub increments: Vec<f64>,
}

impl BrownianPath {
    pub fn generate(rng: &mut ChaCha12Rng, n_steps: usize, dt: f64) -> Self {
        let scale = dt.sqrt();
        let increments =
            (0..n_steps).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        Self { dt, increments }
    }

    /// Conditional midpoint (Brownian bridge) split: each increment dW over
    /// [t, t+dt] becomes (dW/2 + xi sqrt(dt)/2, dW/2 - xi sqrt(dt)/2) with
    /// xi ~ N(0,1), preserving the coarse path exactly.
    pub fn refine(&self, rng: &mut ChaCha12Rng) -> Self {
        let half = 0.5 * self.dt;
        let spread = 0.5 * self.dt.sqrt();
        let mut increments = Vec::with_capacity(2 * self.increments.len());
        for &dw in &self.increments {
            let xi: f64 = rng.sample(StandardNormal);
            let first = 0.5 * dw + spread * xi;
            increments.push(first);
            increments.push(dw - first);
        }
        Self { dt: half, increments }
    }

    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = KahanSum::new();
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        out.push(0.0);
        for &dw in &self.increments {
            acc.add(dw);
            out.push(acc.value());
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveConfig {
    pub epsilon: f64,
    pub t_final: f64,
    pub n_steps: usize,
    pub dt: f64,
    pub grid: GridSpec,
    pub seed: u64,
    pub ic: InitialCondition,
}

impl SolveConfig {
    pub fn new(
        epsilon: f64,
        t_final: f64,
        n_steps: usize,
        grid: GridSpec,
        seed: u64,
        ic: InitialCondition,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::Config("t_final must be positive".into()));
        }
        if n_steps == 0 {
            return Err(Error::Config("n_steps must be positive".into()));
        }
        let dt = t_final / n_steps as f64;
        let viscous_cap = CFL_SAFETY * grid.dx * grid.dx / (2.0 * epsilon);
        if dt > viscous_cap {
            return Err(Error::Config(format!(
                "viscous CFL violated: dt = {dt:.3e} exceeds {viscous_cap:.3e} \
                 (= {CFL_SAFETY} dx^2 / 2 eps); increase n_steps"
            )));
        }
        Ok(Self { epsilon, t_final, n_steps, dt, grid, seed, ic })
    }

    /// Number of steps meeting the viscous CFL bound with margin, rounded up.
    pub fn steps_for(epsilon: f64, t_final: f64, grid: &GridSpec, margin: f64) -> usize {
        let cap = CFL_SAFETY * grid.dx * grid.dx / (2.0 * epsilon) * margin;
        (t_final / cap).ceil().max(1.0) as usize
    }

    /// Largest R with dt * max_{|u| <= R} |f'(u)| <= CFL_SAFETY * dx, by
    /// bisection. The solver aborts if a path leaves [-R, R].
    pub fn certified_range(&self, flux: &FluxSpec) -> f64 {
        let budget = CFL_SAFETY * self.grid.dx / self.dt;
        let speed = |r: f64| flux.f_prime(r).abs().max(flux.f_prime(-r).abs());
        if speed(RANGE_CAP) <= budget {
            return RANGE_CAP;
        }
        let (mut lo, mut hi) = (0.0, RANGE_CAP);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if speed(mid) <= budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

#[derive(Debug, Clone)]
pub struct PathResult {
    pub u: Field2,
    pub dw: Vec<f64>,
    pub eps_grad_sq: Field2,
    pub mu_eps: Field2,
    pub grid: GridSpec,
    pub dt: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl PathResult {
    pub fn n_steps(&self) -> usize {
        self.u.n_steps
    }

    /// A time-constant path around a fixed profile; the estimator tests use
    /// this to compare modulus functionals against quadrature oracles.
    pub fn frozen(profile: &[f64], grid: GridSpec, dt: f64, n_steps: usize) -> Self {
        assert_eq!(profile.len(), grid.n_cells);
        let mut u = Field2::zeros(n_steps, grid.n_cells);
        for k in 0..=n_steps {
            u.row_mut(k).copy_from_slice(profile);
        }
        Self {
            u,
            dw: vec![0.0; n_steps],
            eps_grad_sq: Field2::zeros(n_steps, grid.n_cells),
            mu_eps: Field2::zeros(n_steps, grid.n_cells),
            grid,
            dt,
            epsilon: 0.0,
            seed: 0,
        }
    }
}

/// One explicit step; writes u^{k+1} into `next`.
#[allow(clippy::too_many_arguments)]
fn step(
    flux: &FluxSpec,
    noise: &NoiseSpec,
    grid: &GridSpec,
    epsilon: f64,
    dt: f64,
    u: &[f64],
    dw: f64,
    next: &mut [f64],
) {
    let dx = grid.dx;
    let lam = dt / dx;
    let nu = epsilon * dt / (dx * dx);
    let n = grid.n_cells as isize;
    for j in 0..n {
        let um = grid.sample(u, j - 1);
        let uj = u[j as usize];
        let up = grid.sample(u, j + 1);
        let f_right = flux.eo_flux(uj, up);
        let f_left = flux.eo_flux(um, uj);
        let x = grid.x(j as usize);
        next[j as usize] =
            uj - lam * (f_right - f_left) + nu * (up - 2.0 * uj + um) + noise.sigma(x, uj) * dw;
    }
}

fn fill_dissipation(
    path_u: &Field2,
    grid: &GridSpec,
    epsilon: f64,
    pair: &EntropyPair,
    eps_grad_sq: &mut Field2,
    mu_eps: &mut Field2,
) {
    for k in 0..=path_u.n_steps {
        let u = path_u.row(k);
        for j in 0..grid.n_cells {
            let up = grid.sample(u, j as isize + 1);
            let g = (up - u[j]) / grid.dx;
            let e = epsilon * g * g;
            eps_grad_sq.row_mut(k)[j] = e;
            mu_eps.row_mut(k)[j] = pair.eta_second(u[j]) * e;
        }
    }
}

/// Run one path with externally supplied Brownian increments (refinement
/// studies pass bridged paths here).
pub fn solve_path_with_increments(
    flux: &FluxSpec,
    noise: &NoiseSpec,
    pair: &EntropyPair,
    cfg: &SolveConfig,
    brownian: &BrownianPath,
) -> Result<PathResult> {
    if brownian.increments.len() != cfg.n_steps {
        return Err(Error::InvalidInput(format!(
            "Brownian path has {} increments, config expects {}",
            brownian.increments.len(),
            cfg.n_steps
        )));
    }
    let grid = cfg.grid;
    let range = cfg.certified_range(flux);
    let mut u = Field2::zeros(cfg.n_steps, grid.n_cells);
    u.row_mut(0).copy_from_slice(&cfg.ic.evaluate(&grid, cfg.seed));

    for k in 0..=cfg.n_steps {
        let row = u.row(k);
        let max_abs = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !max_abs.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite state at step {k} (t = {:.6})",
                k as f64 * cfg.dt
            )));
        }
        if max_abs > range {
            return Err(Error::Numerical(format!(
                "state range {max_abs:.6} exceeds the CFL-certified range {range:.6} \
                 at step {k} (t = {:.6}); re-run with smaller dt",
                k as f64 * cfg.dt
            )));
        }
        if k == cfg.n_steps {
            break;
        }
        let (head, tail) = u.data.split_at_mut((k + 1) * grid.n_cells);
        let prev = &head[k * grid.n_cells..];
        let next = &mut tail[..grid.n_cells];
        step(flux, noise, &grid, cfg.epsilon, cfg.dt, prev, brownian.increments[k], next);
    }

    let mut eps_grad_sq = Field2::zeros(cfg.n_steps, grid.n_cells);
    let mut mu_eps = Field2::zeros(cfg.n_steps, grid.n_cells);
    fill_dissipation(&u, &grid, cfg.epsilon, pair, &mut eps_grad_sq, &mut mu_eps);
    Ok(PathResult {
        u,
        dw: brownian.increments.clone(),
        eps_grad_sq,
        mu_eps,
        grid,
        dt: cfg.dt,
        epsilon: cfg.epsilon,
        seed: cfg.seed,
    })
}

pub fn solve_path(
    flux: &FluxSpec,
    noise: &NoiseSpec,
    pair: &EntropyPair,
    cfg: &SolveConfig,
) -> Result<PathResult> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let brownian = BrownianPath::generate(&mut rng, cfg.n_steps, cfg.dt);
    solve_path_with_increments(flux, noise, pair, cfg, &brownian)
}

/// Evaluate `f` on each of `n_paths` independent paths (path m is seeded
/// seed_base ^ m) without retaining the paths. Results come back in path
/// order, so downstream reductions are reproducible.
pub fn ensemble_map<T: Send>(
    flux: &FluxSpec,
    noise: &NoiseSpec,
    pair: &EntropyPair,
    cfg: &SolveConfig,
    n_paths: usize,
    seed_base: u64,
    f: impl Fn(&PathResult) -> T + Sync,
) -> Result<Vec<T>> {
    if n_paths == 0 {
        return Err(Error::InvalidInput("n_paths must be >= 1".into()));
    }
    (0..n_paths as u64)
        .into_par_iter()
        .map(|m| {
            let mut path_cfg = *cfg;
            path_cfg.seed = seed_base ^ m;
            solve_path(flux, noise, pair, &path_cfg)
                .map(|p| f(&p))
                .map_err(|e| Error::Numerical(format!("path {m}: {e}")))
        })
        .collect()
}

pub fn solve_ensemble(
    flux: &FluxSpec,
    noise: &NoiseSpec,
    pair: &EntropyPair,
    cfg: &SolveConfig,
    n_paths: usize,
    seed_base: u64,
) -> Result<Vec<PathResult>> {
    ensemble_map(flux, noise, pair, cfg, n_paths, seed_base, |p| p.clone())
}

/// The three per-path a priori functionals:
/// sup_k ||u^k||_{L^p(chi dx)}^r, |int int eps|D_x u|^2 chi|^r,
/// |int int chi d|mu_eps||^r (left-point time quadrature).
pub fn apriori_moment_sample(
    path: &PathResult,
    chi: &WeightFunction,
    p: f64,
    r: f64,
    _pair: &EntropyPair,
) -> Result<(f64, f64, f64)> {
    if p < 2.0 || r < 2.0 {
        return Err(Error::InvalidInput("a priori moments need p >= 2, r >= 2".into()));
    }
    let grid = &path.grid;
    let mut sup_norm = 0.0f64;
    for k in 0..=path.n_steps() {
        sup_norm = sup_norm.max(weighted_lp_norm(path.u.row(k), chi, p, grid)?);
    }
    let mut diss = KahanSum::new();
    let mut muq = KahanSum::new();
    for k in 0..path.n_steps() {
        let e = path.eps_grad_sq.row(k);
        let m = path.mu_eps.row(k);
        for j in 0..grid.n_cells {
            let w = chi.eval(grid.x(j)) * grid.dx * path.dt;
            diss.add(e[j] * w);
            muq.add(m[j].abs() * w);
        }
    }
    Ok((sup_norm.powf(r), diss.value().abs().powf(r), muq.value().abs().powf(r)))
}

/// Monte Carlo means (with standard errors) of the three a priori
/// functionals over an ensemble.
pub fn apriori_moments(
    ensemble: &[PathResult],
    chi: &WeightFunction,
    p: f64,
    r: f64,
    pair: &EntropyPair,
) -> Result<[(f64, f64); 3]> {
    if ensemble.is_empty() {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    let mut samples = [Vec::new(), Vec::new(), Vec::new()];
    for path in ensemble {
        let (a, b, c) = apriori_moment_sample(path, chi, p, r, pair)?;
        samples[0].push(a);
        samples[1].push(b);
        samples[2].push(c);
    }
    Ok([
        mean_stderr(&samples[0]),
        mean_stderr(&samples[1]),
        mean_stderr(&samples[2]),
    ])
}

/// Time- and space-integrated residual of the discrete entropy balance for
/// the pair (eta, q) against a test profile phi: the eta-increment minus the
/// modeled flux, viscous, dissipation, noise, and Ito-correction terms.
pub fn entropy_balance_residual(
    path: &PathResult,
    _flux: &FluxSpec,
    pair: &EntropyPair,
    noise: &NoiseSpec,
    phi: &[f64],
) -> Result<f64> {
    let grid = &path.grid;
    if phi.len() != grid.n_cells {
        return Err(Error::InvalidInput("test profile length mismatch".into()));
    }
    let dx = grid.dx;
    let dt = path.dt;
    let mut acc = KahanSum::new();
    for k in 0..path.n_steps() {
        let u = path.u.row(k);
        let u_next = path.u.row(k + 1);
        let dw = path.dw[k];
        let mu = path.mu_eps.row(k);
        for j in 0..grid.n_cells as isize {
            let uj = u[j as usize];
            let um = grid.sample(u, j - 1);
            let up = grid.sample(u, j + 1);
            let x = grid.x(j as usize);
            // EO-consistent entropy flux difference: central q-gradient would
            // lose the upwind bias; use q at the cell pair midpoints.
            let q_right = 0.5 * (pair.q(uj)? + pair.q(up)?);
            let q_left = 0.5 * (pair.q(um)? + pair.q(uj)?);
            let visc = path.epsilon * (pair.eta(up) - 2.0 * pair.eta(uj) + pair.eta(um))
                / (dx * dx);
            let s = noise.sigma(x, uj);
            let modeled = -dt * (q_right - q_left) / dx + dt * visc - dt * mu[j as usize]
                + pair.eta_prime(uj) * s * dw
                + 0.5 * pair.eta_second(uj) * s * s * dt;
            let increment = pair.eta(u_next[j as usize]) - pair.eta(uj);
            acc.add(phi[j as usize] * (increment - modeled) * dx);
        }
    }
    Ok(acc.value().abs())
}
