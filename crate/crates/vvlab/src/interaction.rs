//! The stochastic interaction identity for paired transport systems
//! dA + d_x B dt = C_A dt + sigma_A dW, dD + d_x E dt = C_D dt + sigma_D dW:
//! I(t) = int int_{x<y} A(x) D(y) dx dy and its Ito balance, plus the
//! construction of the eight substitution fields from a solved path.

use crate::entropy::{EntropyPair, FluxSpec};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::numeric::KahanSum;
use crate::solver::{Field2, NoiseSpec, PathResult};
use crate::weights::WeightFunction;

/// The eight coupled fields over (time step, cell), the shared Brownian
/// increments, and the grid. The discrete system reads, with forward
/// differences and zero extension,
/// A^{k+1}_j - A^k_j = dt(-(B_{j+1} - B_j)/dx + C_{A,j}) + sigma_{A,j} dW_k,
/// and likewise for (D, E, C_D, sigma_D).
#[derive(Debug, Clone)]
pub struct InteractionData {
    pub a: Field2,
    pub b: Field2,
    pub c_a: Field2,
    pub sigma_a: Field2,
    pub d: Field2,
    pub e: Field2,
    pub c_d: Field2,
    pub sigma_d: Field2,
    pub dw: Vec<f64>,
    pub grid: GridSpec,
    pub dt: f64,
}

impl InteractionData {
    pub fn zeros(n_steps: usize, grid: GridSpec, dt: f64) -> Self {
        let z = || Field2::zeros(n_steps, grid.n_cells);
        Self {
            a: z(),
            b: z(),
            c_a: z(),
            sigma_a: z(),
            d: z(),
            e: z(),
            c_d: z(),
            sigma_d: z(),
            dw: vec![0.0; n_steps],
            grid,
            dt,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.a.n_steps
    }

    fn check_shapes(&self) -> Result<()> {
        let fields = [
            &self.a, &self.b, &self.c_a, &self.sigma_a, &self.d, &self.e, &self.c_d,
            &self.sigma_d,
        ];
        for f in fields {
            if f.n_steps != self.a.n_steps || f.n_cells != self.grid.n_cells {
                return Err(Error::InvalidInput("interaction field shape mismatch".into()));
            }
        }
        if self.dw.len() != self.a.n_steps {
            return Err(Error::InvalidInput("increment count mismatch".into()));
        }
        Ok(())
    }

    /// Decay hypothesis surrogate: |A|, |D| at the two boundary cells stay
    /// below 1e-8 of the field maximum, at every step.
    pub fn check_decay(&self) -> Result<()> {
        let n = self.grid.n_cells;
        for (name, f) in [("A", &self.a), ("D", &self.d)] {
            for k in 0..=self.n_steps() {
                let row = f.row(k);
                let max = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let edge = row[0].abs().max(row[n - 1].abs());
                if edge > 1e-8 * max {
                    return Err(Error::PropertyViolation(format!(
                        "decay hypothesis fails for {name} at step {k}: \
                         boundary magnitude {edge:.3e} vs max {max:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Prefix sum P_j = sum_{i <= j} f_i dx.
fn prefix(f: &[f64], dx: f64) -> Vec<f64> {
    let mut acc = KahanSum::new();
    f.iter()
        .map(|&v| {
            acc.add(v * dx);
            acc.value()
        })
        .collect()
}

/// Suffix sum S_j = sum_{i >= j} f_i dx.
fn suffix(f: &[f64], dx: f64) -> Vec<f64> {
    let mut acc = KahanSum::new();
    let mut out: Vec<f64> = f
        .iter()
        .rev()
        .map(|&v| {
            acc.add(v * dx);
            acc.value()
        })
        .collect();
    out.reverse();
    out
}

/// Spatial antiderivatives at step k: the prefix integral of A, the suffix
/// integral of D, and the matching integrals of the noise amplitudes.
pub fn antiderivatives(
    data: &InteractionData,
    k: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    if k > data.n_steps() {
        return Err(Error::InvalidInput(format!("step {k} out of range")));
    }
    let dx = data.grid.dx;
    Ok((
        prefix(data.a.row(k), dx),
        suffix(data.d.row(k), dx),
        prefix(data.sigma_a.row(k), dx),
        suffix(data.sigma_d.row(k), dx),
    ))
}

/// Suffix-weighted pairing sum_{j < i} f_j g_i dx^2, evaluated in O(n) as
/// sum_j f_j G_{j+1} dx with G the suffix integral of g.
fn strict_pairing(f: &[f64], g_suffix: &[f64], dx: f64) -> f64 {
    let n = f.len();
    let mut acc = KahanSum::new();
    for j in 0..n - 1 {
        acc.add(f[j] * g_suffix[j + 1] * dx);
    }
    acc.value()
}

/// I(t_k) = int int_{x < y} A(x) D(y) dx dy, ties on the diagonal excluded.
pub fn interaction_functional(data: &InteractionData, k: usize) -> Result<f64> {
    if k > data.n_steps() {
        return Err(Error::InvalidInput(format!("step {k} out of range")));
    }
    let d_suffix = suffix(data.d.row(k), data.grid.dx);
    Ok(strict_pairing(data.a.row(k), &d_suffix, data.grid.dx))
}

/// The two discrete expressions for I_sigma(t_k) =
/// int sigma_A Sigma_D dx = int Sigma_A sigma_D dy; they agree up to
/// summation rounding.
pub fn noise_interaction(data: &InteractionData, k: usize) -> Result<(f64, f64)> {
    if k > data.n_steps() {
        return Err(Error::InvalidInput(format!("step {k} out of range")));
    }
    let dx = data.grid.dx;
    let sa = data.sigma_a.row(k);
    let sd = data.sigma_d.row(k);
    let form1 = strict_pairing(sa, &suffix(sd, dx), dx);
    let sa_prefix = prefix(sa, dx);
    let mut acc = KahanSum::new();
    for i in 1..sd.len() {
        acc.add(sa_prefix[i - 1] * sd[i] * dx);
    }
    let form2 = acc.value();
    let scale = form1.abs().max(form2.abs()).max(1e-300);
    if (form1 - form2).abs() > 1e-10 * scale.max(1.0) {
        return Err(Error::PropertyViolation(format!(
            "noise interaction forms disagree at step {k}: {form1} vs {form2}"
        )));
    }
    Ok((form1, form2))
}

/// Assemble every term of the interaction identity with left-point (Ito)
/// time quadrature and return |I(T) - I(0) - (accumulated right side)|.
pub fn identity_residual(data: &InteractionData) -> Result<f64> {
    data.check_shapes()?;
    data.check_decay()?;
    let dx = data.grid.dx;
    let dt = data.dt;
    let n = data.grid.n_cells;
    let mut rhs = KahanSum::new();
    for k in 0..data.n_steps() {
        let a = data.a.row(k);
        let b = data.b.row(k);
        let d = data.d.row(k);
        let e = data.e.row(k);
        let (a_prefix, d_suffix, _, _) = antiderivatives(data, k)?;
        // flux pairing: sum_j (A_{j-1} E_j - B_j D_j) dx
        let mut flux_pair = KahanSum::new();
        flux_pair.add(-b[0] * d[0] * dx);
        for j in 1..n {
            flux_pair.add((a[j - 1] * e[j] - b[j] * d[j]) * dx);
        }
        // drift terms against the antiderivatives
        let c_term_a = strict_pairing(data.c_a.row(k), &d_suffix, dx);
        let mut c_term_d = KahanSum::new();
        for j in 1..n {
            c_term_d.add(a_prefix[j - 1] * data.c_d.row(k)[j] * dx);
        }
        // noise terms and the Ito cross term
        let (i_sigma, _) = noise_interaction(data, k)?;
        let sa = data.sigma_a.row(k);
        let stoch_a = strict_pairing(sa, &d_suffix, dx);
        let mut stoch_d = KahanSum::new();
        for j in 1..n {
            stoch_d.add(a_prefix[j - 1] * data.sigma_d.row(k)[j] * dx);
        }
        rhs.add(dt * (flux_pair.value() + c_term_a + c_term_d.value() + i_sigma));
        rhs.add(data.dw[k] * (stoch_a + stoch_d.value()));
    }
    let i_final = interaction_functional(data, data.n_steps())?;
    let i_init = interaction_functional(data, 0)?;
    Ok((i_final - i_init - rhs.value()).abs())
}

/// Difference operator Delta_h F(x) = F(x + h) - F(x) for h = shift * dx,
/// sampled with the grid's boundary rule.
fn shift_diff(grid: &GridSpec, f: &[f64], shift: isize) -> Vec<f64> {
    (0..grid.n_cells as isize).map(|j| grid.sample(f, j + shift) - f[j as usize]).collect()
}

/// Discrete second derivative with the solver's stencil.
fn second_diff(grid: &GridSpec, f: &[f64]) -> Vec<f64> {
    let dx2 = grid.dx * grid.dx;
    (0..grid.n_cells as isize)
        .map(|j| (grid.sample(f, j + 1) - 2.0 * f[j as usize] + grid.sample(f, j - 1)) / dx2)
        .collect()
}

/// Build the substitution fields from a solved path:
/// A = chi Delta_h u, B = chi Delta_h f(u),
/// C_A = chi' Delta_h f(u) + chi eps d2_xx Delta_h u, sigma_A = chi Delta_h sigma,
/// D = chi Delta_h eta(u), E = chi Delta_h q(u),
/// C_D = chi' Delta_h q + chi(eps d2_xx Delta_h eta - Delta_h mu_eps
///       + (1/2) Delta_h(eta'' sigma^2)), sigma_D = chi Delta_h(eta' sigma).
pub fn build_from_solution(
    path: &PathResult,
    chi: &WeightFunction,
    h: f64,
    flux: &FluxSpec,
    pair: &EntropyPair,
    noise: &NoiseSpec,
) -> Result<InteractionData> {
    if h.abs() >= 1.0 {
        return Err(Error::InvalidInput("shift |h| must be < 1".into()));
    }
    let grid = path.grid;
    let shift = grid.aligned_cells(h)?;
    let n_steps = path.n_steps();
    let mut data = InteractionData::zeros(n_steps, grid, path.dt);
    data.dw.copy_from_slice(&path.dw);

    let centers = grid.centers();
    let chi_v: Vec<f64> = centers.iter().map(|&x| chi.eval(x)).collect();
    let chi_g: Vec<f64> = centers.iter().map(|&x| chi.grad(x)).collect();

    for k in 0..=n_steps {
        let u = path.u.row(k);
        let f_u: Vec<f64> = u.iter().map(|&v| flux.f(v)).collect();
        let eta_u: Vec<f64> = u.iter().map(|&v| pair.eta(v)).collect();
        let q_u: Vec<f64> = u.iter().map(|&v| pair.q(v)).collect::<Result<_>>()?;
        let sig: Vec<f64> =
            centers.iter().zip(u).map(|(&x, &v)| noise.sigma(x, v)).collect();
        let eta_p_sig: Vec<f64> =
            u.iter().zip(&sig).map(|(&v, &s)| pair.eta_prime(v) * s).collect();
        let ito: Vec<f64> =
            u.iter().zip(&sig).map(|(&v, &s)| pair.eta_second(v) * s * s).collect();

        let du = shift_diff(&grid, u, shift);
        let dfu = shift_diff(&grid, &f_u, shift);
        let deta = shift_diff(&grid, &eta_u, shift);
        let dq = shift_diff(&grid, &q_u, shift);
        let dsig = shift_diff(&grid, &sig, shift);
        let detasig = shift_diff(&grid, &eta_p_sig, shift);
        let dmu = shift_diff(&grid, path.mu_eps.row(k), shift);
        let dito = shift_diff(&grid, &ito, shift);
        let lap_du = second_diff(&grid, &du);
        let lap_deta = second_diff(&grid, &deta);

        for j in 0..grid.n_cells {
            data.a.row_mut(k)[j] = chi_v[j] * du[j];
            data.b.row_mut(k)[j] = chi_v[j] * dfu[j];
            data.c_a.row_mut(k)[j] = chi_g[j] * dfu[j] + chi_v[j] * path.epsilon * lap_du[j];
            data.sigma_a.row_mut(k)[j] = chi_v[j] * dsig[j];
            data.d.row_mut(k)[j] = chi_v[j] * deta[j];
            data.e.row_mut(k)[j] = chi_v[j] * dq[j];
            data.c_d.row_mut(k)[j] = chi_g[j] * dq[j]
                + chi_v[j] * (path.epsilon * lap_deta[j] - dmu[j] + 0.5 * dito[j]);
            data.sigma_d.row_mut(k)[j] = chi_v[j] * detasig[j];
        }
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use crate::solver::{
        solve_path_with_increments, BrownianPath, InitialCondition, SolveConfig,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(4.0, n, Boundary::DirichletZero).unwrap()
    }

    /// Interior-supported smooth profile with a margin of `m` cells.
    fn interior_profile(g: &GridSpec, m: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..g.n_cells)
            .map(|j| {
                if j < m || j >= g.n_cells - m {
                    0.0
                } else {
                    f(g.x(j))
                }
            })
            .collect()
    }

    #[test]
    fn antiderivatives_prefix_suffix() {
        let g = grid(64);
        let mut data = InteractionData::zeros(0, g, 0.01);
        // zero field: zero antiderivative
        let (a0, ..) = antiderivatives(&data, 0).unwrap();
        assert!(a0.iter().all(|&v| v == 0.0));
        // single-cell indicator: dx-scaled step
        data.a.row_mut(0)[20] = 2.0;
        let (a, ..) = antiderivatives(&data, 0).unwrap();
        for j in 0..20 {
            assert_eq!(a[j], 0.0);
        }
        for j in 20..64 {
            assert!((a[j] - 2.0 * g.dx).abs() < 1e-15);
        }
        // random field: last prefix entry is the total integral
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut total = 0.0;
        for j in 0..64 {
            let v: f64 = rng.gen_range(-1.0..1.0);
            data.a.row_mut(0)[j] = v;
            data.d.row_mut(0)[j] = rng.gen_range(-1.0..1.0);
            total += v * g.dx;
        }
        let (a, d, ..) = antiderivatives(&data, 0).unwrap();
        assert!((a[63] - total).abs() < 1e-14);
        let total_d: f64 = data.d.row(0).iter().map(|v| v * g.dx).sum();
        assert!((d[0] - total_d).abs() < 1e-14);
    }

    #[test]
    fn interaction_functional_brute_force() {
        let g = grid(64);
        let mut data = InteractionData::zeros(0, g, 0.01);
        // delta-cell pair
        data.a.row_mut(0)[10] = 3.0;
        data.d.row_mut(0)[30] = -2.0;
        let i = interaction_functional(&data, 0).unwrap();
        assert!((i - 3.0 * (-2.0) * g.dx * g.dx).abs() < 1e-15);
        // reversed order contributes nothing
        let mut rev = InteractionData::zeros(0, g, 0.01);
        rev.a.row_mut(0)[30] = 3.0;
        rev.d.row_mut(0)[10] = -2.0;
        assert_eq!(interaction_functional(&rev, 0).unwrap(), 0.0);
        // random fields vs O(n^2) double loop
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for j in 0..64 {
            data.a.row_mut(0)[j] = rng.gen_range(-1.0..1.0);
            data.d.row_mut(0)[j] = rng.gen_range(-1.0..1.0);
        }
        let fast = interaction_functional(&data, 0).unwrap();
        let mut brute = 0.0;
        for j in 0..64 {
            for i in j + 1..64 {
                brute += data.a.row(0)[j] * data.d.row(0)[i] * g.dx * g.dx;
            }
        }
        assert!((fast - brute).abs() < 1e-12, "{fast} vs {brute}");
    }

    #[test]
    fn noise_interaction_forms_agree() {
        let g = grid(64);
        let mut data = InteractionData::zeros(0, g, 0.01);
        assert_eq!(noise_interaction(&data, 0).unwrap(), (0.0, 0.0));
        // single-cell pair
        data.sigma_a.row_mut(0)[5] = 1.5;
        data.sigma_d.row_mut(0)[40] = 0.5;
        let (f1, f2) = noise_interaction(&data, 0).unwrap();
        let exact = 1.5 * 0.5 * g.dx * g.dx;
        assert!((f1 - exact).abs() < 1e-15);
        assert!((f2 - exact).abs() < 1e-15);
        // random fields: summation-by-parts equality and brute force
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for j in 0..64 {
            data.sigma_a.row_mut(0)[j] = rng.gen_range(-1.0..1.0);
            data.sigma_d.row_mut(0)[j] = rng.gen_range(-1.0..1.0);
        }
        let (f1, f2) = noise_interaction(&data, 0).unwrap();
        assert!((f1 - f2).abs() < 1e-12 * f1.abs().max(1.0));
        let mut brute = 0.0;
        for j in 0..64 {
            for i in j + 1..64 {
                brute += data.sigma_a.row(0)[j] * data.sigma_d.row(0)[i] * g.dx * g.dx;
            }
        }
        assert!((f1 - brute).abs() < 1e-12);
    }

    #[test]
    fn residual_zero_for_zero_fields() {
        let data = InteractionData::zeros(16, grid(64), 0.01);
        assert_eq!(identity_residual(&data).unwrap(), 0.0);
    }

    /// Deterministic manufactured data satisfying the discrete system
    /// exactly: D stationary (C_D matches the forward difference of E), A
    /// stepped forward explicitly. The assembled identity is then exact.
    #[test]
    fn residual_exact_on_manufactured_data() {
        let g = grid(64);
        let n_steps = 50;
        let dt = 1e-3;
        let mut data = InteractionData::zeros(n_steps, g, dt);
        let m = 12;
        let d0 = interior_profile(&g, m, |x| (-x * x).exp());
        let e0 = interior_profile(&g, m, |x| x * (-0.5 * x * x).exp());
        let a0 = interior_profile(&g, m, |x| (0.7 * x).sin() * (-x * x / 3.0).exp());
        for k in 0..=n_steps {
            data.d.row_mut(k).copy_from_slice(&d0);
            let phase = 1.0 + 0.5 * (0.3 * k as f64).sin();
            let e: Vec<f64> = e0.iter().map(|v| v * phase).collect();
            // C_D chosen so D is stationary under the discrete system
            for j in 0..g.n_cells {
                let e_next = g.sample(&e, j as isize + 1);
                data.c_d.row_mut(k)[j] = (e_next - e[j]) / g.dx;
            }
            data.e.row_mut(k).copy_from_slice(&e);
            let bk: Vec<f64> =
                interior_profile(&g, m, |x| (-x * x).exp() * (0.2 * k as f64).cos());
            let ck: Vec<f64> =
                interior_profile(&g, m, |x| x.cos() * (-x * x / 2.0).exp() * 0.5);
            data.b.row_mut(k).copy_from_slice(&bk);
            data.c_a.row_mut(k).copy_from_slice(&ck);
        }
        data.a.row_mut(0).copy_from_slice(&a0);
        for k in 0..n_steps {
            let mut next = vec![0.0; g.n_cells];
            for j in 0..g.n_cells {
                let b = data.b.row(k);
                let b_next = g.sample(b, j as isize + 1);
                next[j] = data.a.row(k)[j]
                    + dt * (-(b_next - b[j]) / g.dx + data.c_a.row(k)[j]);
            }
            data.a.row_mut(k + 1).copy_from_slice(&next);
        }
        let r = identity_residual(&data).unwrap();
        assert!(r <= 1e-10, "manufactured residual {r}");
    }

    #[test]
    fn decay_violation_detected() {
        let g = grid(64);
        let mut data = InteractionData::zeros(4, g, 0.01);
        data.a.row_mut(0)[0] = 1.0;
        data.a.row_mut(0)[30] = 1.0;
        let err = identity_residual(&data).unwrap_err();
        assert!(matches!(err, Error::PropertyViolation(_)));
    }

    fn burgers_interaction_setup() -> (FluxSpec, EntropyPair, NoiseSpec, WeightFunction) {
        let flux = FluxSpec::burgers();
        let pair = EntropyPair::same_as_flux(&flux).unwrap();
        let noise = NoiseSpec::Linear { amp: 0.2 };
        let chi = WeightFunction::power(4.0).unwrap();
        (flux, pair, noise, chi)
    }

    fn solve_bump(
        n: usize,
        brownian: &BrownianPath,
        seed: u64,
        flux: &FluxSpec,
        pair: &EntropyPair,
        noise: &NoiseSpec,
    ) -> PathResult {
        let g = grid(n);
        let t_final = brownian.dt * brownian.increments.len() as f64;
        let cfg = SolveConfig::new(
            0.02,
            t_final,
            brownian.increments.len(),
            g,
            seed,
            InitialCondition::Bump,
        )
        .unwrap();
        solve_path_with_increments(flux, noise, pair, &cfg, brownian).unwrap()
    }

    #[test]
    fn build_from_solution_field_structure() {
        let (flux, pair, noise, chi) = burgers_interaction_setup();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let brownian = BrownianPath::generate(&mut rng, 80, 2e-3);
        let path = solve_bump(128, &brownian, 17, &flux, &pair, &noise);
        // h = 0: all fields vanish
        let zero = build_from_solution(&path, &chi, 0.0, &flux, &pair, &noise).unwrap();
        assert_eq!(interaction_functional(&zero, 40).unwrap(), 0.0);
        assert!(zero.a.row(40).iter().all(|&v| v == 0.0));
        // eta = f: D coincides with B
        let h = 4.0 * path.grid.dx;
        let data = build_from_solution(&path, &chi, h, &flux, &pair, &noise).unwrap();
        for k in [0, 40, 80] {
            for j in 0..path.grid.n_cells {
                assert!((data.d.row(k)[j] - data.b.row(k)[j]).abs() < 1e-12);
            }
        }
        // misaligned h rejected
        assert!(
            build_from_solution(&path, &chi, 1.5 * path.grid.dx, &flux, &pair, &noise).is_err()
        );
        // sigma = 0 path: noise fields vanish
        let det = solve_bump(128, &brownian, 17, &flux, &pair, &NoiseSpec::None);
        let det_data =
            build_from_solution(&det, &chi, h, &flux, &pair, &NoiseSpec::None).unwrap();
        assert!(det_data.sigma_a.row(40).iter().all(|&v| v == 0.0));
        assert!(det_data.sigma_d.row(40).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residual_refines_on_solver_data() {
        let (flux, pair, noise, chi) = burgers_interaction_setup();
        let n_paths = 4;
        let levels = 3;
        let mut means = vec![0.0; levels];
        for m in 0..n_paths as u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(900 + m);
            // coarse dt a factor 4 below the coarse viscous cap (eps = 0.02,
            // dx = 8/128) so joint halving stays CFL-admissible
            let mut brownian = BrownianPath::generate(&mut rng, 128, 0.12 / 128.0);
            for (lvl, mean) in means.iter_mut().enumerate() {
                let n = 128usize << lvl;
                let path = solve_bump(n, &brownian, 900 + m, &flux, &pair, &noise);
                let h = 8.0 * path.grid.dx / (1 << lvl) as f64; // fixed physical shift
                let data = build_from_solution(&path, &chi, h, &flux, &pair, &noise).unwrap();
                *mean += identity_residual(&data).unwrap() / n_paths as f64;
                if lvl + 1 < levels {
                    brownian = brownian.refine(&mut rng);
                }
            }
        }
        for lvl in 1..levels {
            assert!(means[lvl] < means[lvl - 1], "residuals {means:?} not decreasing");
        }
        let slope =
            (means[0] / means[levels - 1]).ln() / (2.0f64.powi(levels as i32 - 1)).ln();
        assert!(slope >= 0.4, "residual slope {slope} < 0.4 ({means:?})");
    }
}
