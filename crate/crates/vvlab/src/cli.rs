//! Subcommand drivers. Every run writes `manifest.cfg` (a loadable config)
//! next to its CSV artifacts, so any output reproduces from the manifest
//! alone.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::entropy::{lattice, verify_lemma_bound};
use crate::error::{Error, Result};
use crate::estimators::{
    curve_from_samples, default_fit_window, fit_rate, kruzkov_rho_t, mollified_sample,
    power_sample, spatial_sup_sample, sup_vs_mollified_consistency, temporal_sup_sample,
    ModulusCurve, ModulusKind, SampledModulus,
};
use crate::interaction::{build_from_solution, identity_residual};
use crate::mollifiers::friedrichs_kernel;
use crate::numeric::{kahan_sum, mean_stderr};
use crate::output;
use crate::solver::{
    apriori_moment_sample, ensemble_map, solve_path_with_increments, BrownianPath, SolveConfig,
};
use crate::weights::verify_weight_properties;

pub const SUBCOMMANDS: &[&str] = &[
    "solve",
    "rates-space",
    "rates-time",
    "interaction-check",
    "lemma-check",
    "verify-weights",
];

pub fn run_subcommand(name: &str, cfg: &ExperimentConfig, dump: bool) -> Result<()> {
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    output::write_file(&dir, "manifest.cfg", &cfg.to_manifest())?;
    match name {
        "solve" => solve(cfg, &dir, dump),
        "rates-space" => rates_space(cfg, &dir),
        "rates-time" => rates_time(cfg, &dir),
        "interaction-check" => interaction_check(cfg, &dir),
        "lemma-check" => lemma_check(cfg, &dir),
        "verify-weights" => verify_weights(cfg, &dir),
        other => Err(Error::Config(format!("unknown subcommand `{other}`"))),
    }
}

/// Per-epsilon seed stream; the mix keeps streams disjoint across the list.
fn seed_for(base: u64, index: usize) -> u64 {
    base ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn solve(cfg: &ExperimentConfig, dir: &Path, dump: bool) -> Result<()> {
    let flux = cfg.flux()?;
    let pair = cfg.entropy_pair()?;
    let noise = cfg.noise()?;
    let chi = cfg.weight()?;
    let scfg = cfg.solve_config(cfg.epsilon)?;
    let per_path = ensemble_map(&flux, &noise, &pair, &scfg, cfg.n_paths, cfg.seed, |p| {
        let mass = kahan_sum(p.u.row(p.n_steps()).iter().map(|&v| v * p.grid.dx));
        let moments = apriori_moment_sample(p, &chi, 2.0, 2.0, &pair);
        let dumped = dump.then(|| output::path_csv(p));
        (mass, moments, dumped)
    })?;
    let mut rows = Vec::new();
    for (m, (mass, moments, dumped)) in per_path.into_iter().enumerate() {
        let (sup, diss, mu) = moments?;
        rows.push((m, "final_mass", mass));
        rows.push((m, "sup_l2_weighted_sq", sup));
        rows.push((m, "dissipation_sq", diss));
        rows.push((m, "mu_mass_sq", mu));
        if let Some(text) = dumped {
            output::write_file(dir, &format!("path_{m}.csv"), &text)?;
        }
    }
    let rows: Vec<(usize, &str, f64)> = rows.iter().map(|&(m, n, v)| (m, n, v)).collect();
    output::write_file(dir, "summary.csv", &output::summary_csv(&rows))
}

/// Default one-decade shift family in cell units.
fn default_cell_multiples() -> &'static [usize] {
    &[4, 6, 8, 12, 16, 24, 32, 40]
}

fn resolved_z_list(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    if !cfg.z_list.is_empty() {
        return Ok(cfg.z_list.clone());
    }
    let dx = cfg.grid()?.dx;
    Ok(default_cell_multiples().iter().map(|&m| m as f64 * dx).collect())
}

fn resolved_delta_list(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    if !cfg.delta_list.is_empty() {
        return Ok(cfg.delta_list.clone());
    }
    let dx = cfg.grid()?.dx;
    Ok(default_cell_multiples().iter().map(|&m| m as f64 * dx).collect())
}

fn resolved_tau_list(cfg: &ExperimentConfig, scfg: &SolveConfig) -> Vec<f64> {
    if !cfg.tau_list.is_empty() {
        return cfg.tau_list.clone();
    }
    let max_mult = (0.5 * scfg.n_steps as f64) as usize;
    [8usize, 16, 32, 64, 128]
        .iter()
        .filter(|&&m| m <= max_mult.max(2))
        .map(|&m| m as f64 * scfg.dt)
        .collect()
}

struct SpaceSamples {
    power_chi: Vec<f64>,
    power_chi2: Vec<f64>,
    sup: Vec<f64>,
    mollified: Vec<f64>,
}

fn rates_space(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let flux = cfg.flux()?;
    let pair = cfg.entropy_pair()?;
    let noise = cfg.noise()?;
    let chi = cfg.weight()?;
    let kernel = friedrichs_kernel();
    let z_list = resolved_z_list(cfg)?;
    let delta_list = resolved_delta_list(cfg)?;
    let grid = cfg.grid()?;
    let (mu, mu_x) = crate::estimators::mu_exponents(8.0, flux.p_f, pair.p_eta);

    let mut curves: Vec<(String, ModulusCurve)> = Vec::new();
    let mut fits: Vec<(String, f64, f64, crate::estimators::RateFit)> = Vec::new();
    let mut mu_rows = String::from(
        "eps,power,mu,mu_x,fit_slope_chi,fit_stderr_chi,fit_slope_chi2,fit_stderr_chi2\n",
    );
    let mut consistency = String::from("eps,delta,ratio\n");

    for (idx, eps) in cfg.epsilons().into_iter().enumerate() {
        let mut scfg = cfg.solve_config(eps)?;
        scfg.seed = seed_for(cfg.seed, idx);
        let samples = ensemble_map(
            &flux,
            &noise,
            &pair,
            &scfg,
            cfg.n_paths,
            scfg.seed,
            |p| -> Result<SpaceSamples> {
                let (power_chi, power_chi2) = power_sample(p, &chi, cfg.power, &z_list)?;
                let sup = spatial_sup_sample(p, &chi, &delta_list, cfg.z_per_delta)?;
                let mollified = mollified_sample(p, &chi, &kernel, &delta_list)?;
                Ok(SpaceSamples { power_chi, power_chi2, sup, mollified })
            },
        )?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let collect = |f: &dyn Fn(&SpaceSamples) -> Vec<f64>| -> Vec<Vec<f64>> {
            samples.iter().map(|s| f(s)).collect()
        };
        let p_chi = curve_from_samples(
            ModulusKind::PowerP,
            &z_list,
            &collect(&|s| s.power_chi.clone()),
        )?;
        let p_chi2 = curve_from_samples(
            ModulusKind::PowerP,
            &z_list,
            &collect(&|s| s.power_chi2.clone()),
        )?;
        let sup = curve_from_samples(
            ModulusKind::SpatialSup,
            &delta_list,
            &collect(&|s| s.sup.clone()),
        )?;
        let moll = curve_from_samples(
            ModulusKind::SpatialMollified,
            &delta_list,
            &collect(&|s| s.mollified.clone()),
        )?;

        let zw = default_fit_window(&z_list, grid.dx, 2.0 * grid.half_width);
        let fit_chi = fit_rate(&p_chi, zw.clone())?;
        let fit_chi2 = fit_rate(&p_chi2, zw.clone())?;
        mu_rows.push_str(&format!(
            "{eps},{},{mu},{mu_x},{},{},{},{}\n",
            cfg.power, fit_chi.slope, fit_chi.slope_stderr, fit_chi2.slope, fit_chi2.slope_stderr
        ));
        fits.push((
            format!("power{}_chi_eps{eps}", cfg.power),
            z_list[zw.start],
            z_list[zw.end - 1],
            fit_chi,
        ));
        fits.push((
            format!("power{}_chi2_eps{eps}", cfg.power),
            z_list[zw.start],
            z_list[zw.end - 1],
            fit_chi2,
        ));
        for (d, r) in sup_vs_mollified_consistency(&sup, &moll)? {
            consistency.push_str(&format!("{eps},{d},{r}\n"));
        }
        curves.push((format!("power{}_chi_eps{eps}", cfg.power), p_chi));
        curves.push((format!("power{}_chi2_eps{eps}", cfg.power), p_chi2));
        curves.push((format!("spatial_sup_eps{eps}"), sup));
        curves.push((format!("spatial_mollified_eps{eps}"), moll));
    }

    let labeled: Vec<(&str, &ModulusCurve)> =
        curves.iter().map(|(l, c)| (l.as_str(), c)).collect();
    output::write_file(dir, "curves.csv", &output::curves_csv(&labeled))?;
    let fit_rows: Vec<(&str, f64, f64, crate::estimators::RateFit)> =
        fits.iter().map(|(l, a, b, f)| (l.as_str(), *a, *b, *f)).collect();
    output::write_file(dir, "fits.csv", &output::fits_csv(&fit_rows))?;
    output::write_file(dir, "mu_table.csv", &mu_rows)?;
    output::write_file(dir, "consistency.csv", &consistency)?;
    if cfg.emit_plots {
        output::write_file(dir, "curves.svg", &output::loglog_svg(&labeled, Some(mu)))?;
    }
    Ok(())
}

fn rates_time(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let flux = cfg.flux()?;
    let pair = cfg.entropy_pair()?;
    let noise = cfg.noise()?;
    let chi = cfg.weight()?;
    let scfg = cfg.solve_config(cfg.epsilon)?;
    let tau_list = resolved_tau_list(cfg, &scfg);
    let delta_list = resolved_delta_list(cfg)?;

    let samples = ensemble_map(
        &flux,
        &noise,
        &pair,
        &scfg,
        cfg.n_paths,
        cfg.seed,
        |p| -> Result<(Vec<f64>, Vec<f64>)> {
            Ok((
                temporal_sup_sample(p, &chi, &tau_list, cfg.lags_per_delta)?,
                spatial_sup_sample(p, &chi, &delta_list, cfg.z_per_delta)?,
            ))
        },
    )?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let temporal: Vec<Vec<f64>> = samples.iter().map(|s| s.0.clone()).collect();
    let spatial: Vec<Vec<f64>> = samples.iter().map(|s| s.1.clone()).collect();
    let temporal = curve_from_samples(ModulusKind::TemporalSup, &tau_list, &temporal)?;
    let spatial = curve_from_samples(ModulusKind::SpatialSup, &delta_list, &spatial)?;

    let mut fits = Vec::new();
    if let Ok(fit) = fit_rate(&temporal, 0..tau_list.len()) {
        fits.push(("temporal_sup", tau_list[0], *tau_list.last().unwrap(), fit));
    }
    let labeled =
        vec![("temporal_sup", &temporal), ("spatial_sup", &spatial)];
    output::write_file(dir, "curves.csv", &output::curves_csv(&labeled))?;
    output::write_file(dir, "fits.csv", &output::fits_csv(&fits))?;

    // interpolation table: the measured spatial modulus feeds the optimizer
    let mut rho_rows = String::from("delta,rho_t\n");
    if spatial.values.iter().all(|&v| v > 0.0) {
        let rho_x = SampledModulus::new(spatial.deltas.clone(), spatial.values.clone())?;
        for &d in &tau_list {
            let v = kruzkov_rho_t(&|nu| rho_x.eval(nu), 1.0, 1.0, 1.0, 2, 0, d)?;
            rho_rows.push_str(&format!("{d},{v}\n"));
        }
    }
    output::write_file(dir, "rho_t.csv", &rho_rows)?;
    if cfg.emit_plots {
        output::write_file(dir, "curves.svg", &output::loglog_svg(&labeled, Some(0.5)))?;
    }
    Ok(())
}

/// Joint (dt, dx) refinement of the identity residual on solver-built data
/// with bridged Brownian increments.
fn interaction_check(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let flux = cfg.flux()?;
    let pair = cfg.entropy_pair()?;
    let noise = cfg.noise()?;
    let chi = cfg.weight()?;
    let levels = cfg.refine_levels.max(2);
    let base_grid = cfg.grid()?;
    // base step count sits 2^(levels-1) below the *finest* viscous cap
    let margin = 0.5 / (1 << (levels - 1)) as f64;
    let base_steps = SolveConfig::steps_for(cfg.epsilon, cfg.t_final, &base_grid, margin);
    let h_base = cfg.h_cells as f64 * base_grid.dx;

    let per_path: Vec<Vec<f64>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|m| -> Result<Vec<f64>> {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ m);
            let mut brownian =
                BrownianPath::generate(&mut rng, base_steps, cfg.t_final / base_steps as f64);
            let mut residuals = Vec::with_capacity(levels);
            for lvl in 0..levels {
                let grid = crate::grid::GridSpec::new(
                    cfg.half_width,
                    cfg.n_cells << lvl,
                    cfg.boundary,
                )?;
                let scfg = SolveConfig::new(
                    cfg.epsilon,
                    cfg.t_final,
                    brownian.increments.len(),
                    grid,
                    cfg.seed ^ m,
                    cfg.ic,
                )?;
                let path = solve_path_with_increments(&flux, &noise, &pair, &scfg, &brownian)
                    .map_err(|e| Error::Numerical(format!("path {m}, level {lvl}: {e}")))?;
                let data = build_from_solution(&path, &chi, h_base, &flux, &pair, &noise)?;
                residuals.push(identity_residual(&data)?);
                if lvl + 1 < levels {
                    brownian = brownian.refine(&mut rng);
                }
            }
            Ok(residuals)
        })
        .collect::<Result<_>>()?;

    let mut rows = String::from("level,n_cells,dt,mean_residual,std_err\n");
    let mut means = Vec::with_capacity(levels);
    for lvl in 0..levels {
        let col: Vec<f64> = per_path.iter().map(|r| r[lvl]).collect();
        let (mean, se) = mean_stderr(&col);
        means.push(mean);
        let dt = cfg.t_final / (base_steps << lvl) as f64;
        rows.push_str(&format!("{lvl},{},{dt},{mean},{se}\n", cfg.n_cells << lvl));
    }
    let slope = (means[0] / means[levels - 1]).ln() / (2.0f64.powi(levels as i32 - 1)).ln();
    rows.push_str(&format!("slope,,,{slope},\n"));
    output::write_file(dir, "residuals.csv", &rows)?;
    if means.windows(2).any(|w| w[1] >= w[0]) || slope < 0.4 {
        return Err(Error::PropertyViolation(format!(
            "identity residual does not refine: means {means:?}, slope {slope:.3}"
        )));
    }
    Ok(())
}

fn lemma_check(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let flux = cfg.flux()?;
    let pair = cfg.entropy_pair()?;
    let grid_points = lattice(5.0, 101);
    let min_ratio = verify_lemma_bound(&flux, &pair, &grid_points)?;
    let c = crate::entropy::lemma_constant(&flux, &pair);
    let rows = format!(
        "flux,entropy,c_f,p_f,c_eta,p_eta,lemma_constant,min_ratio\n\
         {},{},{},{},{},{},{c},{min_ratio}\n",
        flux.name(),
        pair.name(),
        flux.c_f,
        flux.p_f,
        pair.c_eta,
        pair.p_eta,
    );
    output::write_file(dir, "lemma.csv", &rows)
}

fn verify_weights(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let chi = cfg.weight()?;
    let grid = cfg.grid()?;
    let z_max = (0.5 * grid.half_width).min(1.0);
    let report = verify_weight_properties(&chi, &grid, z_max, 2.0)?;
    let rows = format!(
        "weight,parameter,c_chi,l1_mass,k1,k2\n{},{},{},{},{},{}\n",
        chi.name(),
        chi.parameter(),
        chi.c_chi,
        chi.l1_mass,
        report.k1,
        report.k2,
    );
    output::write_file(dir, "weights.csv", &rows)
}
