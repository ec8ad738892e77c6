//! Binary-level tests: exit codes, artifact schemas, and manifest round
//! trips for every subcommand.

use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vvlab"))
}

fn write_cfg(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("exp.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

fn run_ok(args: &[&str], config: &Path, out: &Path) {
    let status = bin().args(args).arg("--config").arg(config).arg("--out").arg(out).status().unwrap();
    assert!(status.success(), "{args:?} failed");
}

#[test]
fn bad_config_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), "epsilon = 0.02\nno_such_key = 1\n");
    let out = bin().arg("solve").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("no_such_key"), "stderr: {msg}");
}

#[test]
fn missing_config_file_exits_2() {
    let out = bin().args(["solve", "--config", "/nonexistent/x.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cfl_violation_exits_2() {
    let tmp = TempDir::new().unwrap();
    // explicit n_steps far below the viscous requirement
    let cfg = write_cfg(tmp.path(), "epsilon = 0.1\nt_final = 1.0\nn_cells = 256\nn_steps = 10\n");
    let out = bin()
        .arg("solve")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_writes_summary_and_dumps() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "epsilon = 0.05\nt_final = 0.05\nn_cells = 64\nn_paths = 2\nnoise = additive\nnoise_amp = 0.1\n",
    );
    let out = tmp.path().join("out");
    let status = bin()
        .args(["solve", "--dump", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("path_id,functional,value\n"));
    assert!(summary.contains("0,final_mass,"));
    assert!(summary.contains("1,mu_mass_sq,"));
    for m in 0..2 {
        let dump = std::fs::read_to_string(out.join(format!("path_{m}.csv"))).unwrap();
        assert!(dump.starts_with("k,j,u\n"));
    }
    assert!(out.join("manifest.cfg").exists());
}

#[test]
fn seed_override_changes_output_and_repeats() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "epsilon = 0.05\nt_final = 0.05\nn_cells = 64\nn_paths = 2\nnoise = additive\nnoise_amp = 0.3\n",
    );
    let run_with = |seed: &str, out: &Path| {
        let status = bin()
            .args(["solve", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("summary.csv")).unwrap()
    };
    let a = run_with("5", &tmp.path().join("a"));
    let b = run_with("5", &tmp.path().join("b"));
    let c = run_with("6", &tmp.path().join("c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn rates_space_schema_and_manifest_rerun() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "epsilon_list = 0.08, 0.04\nt_final = 0.05\nn_cells = 64\nn_paths = 2\n\
         noise = additive\nnoise_amp = 0.1\nz_per_delta = 4\nemit_plots = true\n",
    );
    let first = tmp.path().join("first");
    run_ok(&["rates-space"], &cfg, &first);
    let curves = std::fs::read_to_string(first.join("curves.csv")).unwrap();
    assert!(curves.starts_with("kind,delta,value,std_err,n_paths\n"));
    assert!(curves.contains("power4_chi_eps0.08,"));
    assert!(curves.contains("spatial_sup_eps0.04,"));
    let fits = std::fs::read_to_string(first.join("fits.csv")).unwrap();
    assert!(fits.starts_with("kind,window_lo,window_hi,slope,slope_stderr,r_squared\n"));
    assert!(first.join("mu_table.csv").exists());
    assert!(first.join("curves.svg").exists());

    // rerun from the emitted manifest: byte-identical artifacts
    let second = tmp.path().join("second");
    run_ok(&["rates-space"], &first.join("manifest.cfg"), &second);
    for name in ["curves.csv", "fits.csv", "mu_table.csv", "consistency.csv", "curves.svg"] {
        assert_eq!(
            std::fs::read(first.join(name)).unwrap(),
            std::fs::read(second.join(name)).unwrap(),
            "{name} differs across manifest rerun"
        );
    }
}

#[test]
fn rates_time_writes_rho_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "epsilon = 0.05\nt_final = 0.1\nn_cells = 64\nn_paths = 2\n\
         noise = additive\nnoise_amp = 0.5\nz_per_delta = 4\nlags_per_delta = 8\n",
    );
    let out = tmp.path().join("out");
    run_ok(&["rates-time"], &cfg, &out);
    let curves = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    assert!(curves.contains("temporal_sup,"));
    let rho = std::fs::read_to_string(out.join("rho_t.csv")).unwrap();
    assert!(rho.starts_with("delta,rho_t\n"));
    assert!(rho.lines().count() > 1);
}

#[test]
fn interaction_check_passes_and_reruns() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "epsilon = 0.02\nt_final = 0.12\nn_cells = 128\nhalf_width = 4.0\n\
         boundary = dirichlet_zero\nic = bump\nnoise = linear\nnoise_amp = 0.2\n\
         weight_n = 4.0\nn_paths = 2\nh_cells = 8\nrefine_levels = 3\n",
    );
    let first = tmp.path().join("first");
    run_ok(&["interaction-check"], &cfg, &first);
    let rows = std::fs::read_to_string(first.join("residuals.csv")).unwrap();
    assert!(rows.starts_with("level,n_cells,dt,mean_residual,std_err\n"));
    assert!(rows.contains("slope,"));
    let second = tmp.path().join("second");
    run_ok(&["interaction-check"], &first.join("manifest.cfg"), &second);
    assert_eq!(
        std::fs::read(first.join("residuals.csv")).unwrap(),
        std::fs::read(second.join("residuals.csv")).unwrap()
    );
}

#[test]
fn lemma_check_reports_twelfth() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), "flux = burgers\nentropy = same_as_flux\n");
    let out = tmp.path().join("out");
    run_ok(&["lemma-check"], &cfg, &out);
    let rows = std::fs::read_to_string(out.join("lemma.csv")).unwrap();
    let min_ratio: f64 =
        rows.lines().nth(1).unwrap().split(',').last().unwrap().parse().unwrap();
    assert!((min_ratio - 1.0 / 12.0).abs() < 1e-9, "min ratio {min_ratio}");
}

#[test]
fn verify_weights_reports_c_chi() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), "weight = power\nweight_n = 2.0\n");
    let out = tmp.path().join("out");
    run_ok(&["verify-weights"], &cfg, &out);
    let rows = std::fs::read_to_string(out.join("weights.csv")).unwrap();
    let fields: Vec<&str> = rows.lines().nth(1).unwrap().split(',').collect();
    let c_chi: f64 = fields[2].parse().unwrap();
    assert!((c_chi - 2.0).abs() < 1e-6);
}
