//! Flat key-value experiment configuration. Section headers in brackets are
//! cosmetic; arrays are comma-separated. Every run writes a `manifest.cfg`
//! that is itself a loadable config, so artifacts reproduce from the
//! manifest alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::entropy::{EntropyPair, FluxSpec};
use crate::error::{Error, Result};
use crate::grid::{Boundary, GridSpec};
use crate::solver::{InitialCondition, NoiseSpec, SolveConfig};
use crate::weights::WeightFunction;

const KNOWN_KEYS: &[&str] = &[
    "epsilon",
    "epsilon_list",
    "t_final",
    "n_steps",
    "n_cells",
    "half_width",
    "boundary",
    "seed",
    "n_paths",
    "ic",
    "flux",
    "entropy",
    "entropy_p0",
    "weight",
    "weight_n",
    "noise",
    "noise_amp",
    "power",
    "delta_list",
    "z_list",
    "tau_list",
    "z_per_delta",
    "lags_per_delta",
    "h_cells",
    "refine_levels",
    "output_dir",
    "emit_plots",
];

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub epsilon: f64,
    pub epsilon_list: Vec<f64>,
    pub t_final: f64,
    /// 0 requests the automatic viscous-CFL step count.
    pub n_steps: usize,
    pub n_cells: usize,
    pub half_width: f64,
    pub boundary: Boundary,
    pub seed: u64,
    pub n_paths: usize,
    pub ic: InitialCondition,
    pub flux_name: String,
    pub entropy_name: String,
    pub entropy_p0: f64,
    pub weight_name: String,
    pub weight_n: f64,
    pub noise_name: String,
    pub noise_amp: f64,
    pub power: f64,
    /// Spatial modulus scales (space units, grid-aligned where required).
    pub delta_list: Vec<f64>,
    /// Power-modulus shifts (space units, grid-aligned).
    pub z_list: Vec<f64>,
    /// Temporal modulus scales (time units).
    pub tau_list: Vec<f64>,
    pub z_per_delta: usize,
    pub lags_per_delta: usize,
    /// Interaction shift h as a cell count.
    pub h_cells: isize,
    pub refine_levels: usize,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.02,
            epsilon_list: vec![],
            t_final: 0.25,
            n_steps: 0,
            n_cells: 256,
            half_width: 1.0,
            boundary: Boundary::Periodic,
            seed: 1,
            n_paths: 8,
            ic: InitialCondition::MinusSin,
            flux_name: "burgers".into(),
            entropy_name: "same_as_flux".into(),
            entropy_p0: 2.0,
            weight_name: "power".into(),
            weight_n: 1.0,
            noise_name: "none".into(),
            noise_amp: 0.0,
            power: 4.0,
            delta_list: vec![],
            z_list: vec![],
            tau_list: vec![],
            z_per_delta: 8,
            lags_per_delta: 16,
            h_cells: 4,
            refine_levels: 3,
            output_dir: PathBuf::from("out"),
            emit_plots: false,
        }
    }
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key = value, got `{line}`", lineno + 1))
        })?;
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, out: &mut T) -> Result<()> {
    if let Some(v) = map.get(key) {
        *out = v
            .parse()
            .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{v}`")))?;
    }
    Ok(())
}

fn get_list(map: &BTreeMap<String, String>, key: &str, out: &mut Vec<f64>) -> Result<()> {
    if let Some(v) = map.get(key) {
        *out = v
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("key `{key}`: bad entry `{s}`")))
            })
            .collect::<Result<_>>()?;
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let map = parse_pairs(text)?;
        let mut cfg = Self::default();
        get(&map, "epsilon", &mut cfg.epsilon)?;
        get_list(&map, "epsilon_list", &mut cfg.epsilon_list)?;
        get(&map, "t_final", &mut cfg.t_final)?;
        get(&map, "n_steps", &mut cfg.n_steps)?;
        get(&map, "n_cells", &mut cfg.n_cells)?;
        get(&map, "half_width", &mut cfg.half_width)?;
        if let Some(b) = map.get("boundary") {
            cfg.boundary = Boundary::parse(b)?;
        }
        get(&map, "seed", &mut cfg.seed)?;
        get(&map, "n_paths", &mut cfg.n_paths)?;
        if let Some(ic) = map.get("ic") {
            cfg.ic = InitialCondition::parse(ic)?;
        }
        get(&map, "flux", &mut cfg.flux_name)?;
        get(&map, "entropy", &mut cfg.entropy_name)?;
        get(&map, "entropy_p0", &mut cfg.entropy_p0)?;
        get(&map, "weight", &mut cfg.weight_name)?;
        get(&map, "weight_n", &mut cfg.weight_n)?;
        get(&map, "noise", &mut cfg.noise_name)?;
        get(&map, "noise_amp", &mut cfg.noise_amp)?;
        get(&map, "power", &mut cfg.power)?;
        get_list(&map, "delta_list", &mut cfg.delta_list)?;
        get_list(&map, "z_list", &mut cfg.z_list)?;
        get_list(&map, "tau_list", &mut cfg.tau_list)?;
        get(&map, "z_per_delta", &mut cfg.z_per_delta)?;
        get(&map, "lags_per_delta", &mut cfg.lags_per_delta)?;
        get(&map, "h_cells", &mut cfg.h_cells)?;
        get(&map, "refine_levels", &mut cfg.refine_levels)?;
        if let Some(d) = map.get("output_dir") {
            cfg.output_dir = PathBuf::from(d);
        }
        if let Some(b) = map.get("emit_plots") {
            cfg.emit_plots = b
                .parse()
                .map_err(|_| Error::Config(format!("key `emit_plots`: bad boolean `{b}`")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        if self
            .epsilon_list
            .windows(2)
            .any(|w| w[1] >= w[0])
        {
            return Err(Error::Config("epsilon_list must be strictly decreasing".into()));
        }
        if self.epsilon_list.iter().chain([&self.epsilon]).any(|&e| e <= 0.0) {
            return Err(Error::Config("viscosities must be positive".into()));
        }
        for &z in &self.z_list {
            grid.aligned_cells(z)
                .map_err(|_| Error::Config(format!("z_list entry {z} is not grid-aligned")))?;
        }
        for &d in &self.delta_list {
            if d < grid.dx {
                return Err(Error::Config(format!(
                    "delta_list entry {d} is below the grid resolution {}",
                    grid.dx
                )));
            }
        }
        if self.delta_list.windows(2).any(|w| w[1] <= w[0])
            || self.z_list.windows(2).any(|w| w[1] <= w[0])
            || self.tau_list.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config(
                "delta_list, z_list, tau_list must be strictly increasing".into(),
            ));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be positive".into()));
        }
        self.flux()?;
        self.weight()?;
        self.noise()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.half_width, self.n_cells, self.boundary)
    }

    pub fn flux(&self) -> Result<FluxSpec> {
        match self.flux_name.as_str() {
            "burgers" => Ok(FluxSpec::burgers()),
            "quartic" => Ok(FluxSpec::quartic()),
            "zero" => Ok(FluxSpec::zero()),
            other => Err(Error::Config(format!("unknown flux `{other}`"))),
        }
    }

    pub fn entropy_pair(&self) -> Result<EntropyPair> {
        let flux = self.flux()?;
        match self.entropy_name.as_str() {
            "same_as_flux" => EntropyPair::same_as_flux(&flux),
            "power" => EntropyPair::power(self.entropy_p0, &flux),
            "linear" => EntropyPair::linear(&flux),
            other => Err(Error::Config(format!("unknown entropy `{other}`"))),
        }
    }

    pub fn weight(&self) -> Result<WeightFunction> {
        match self.weight_name.as_str() {
            "power" => WeightFunction::power(self.weight_n),
            "flat" => Ok(WeightFunction::flat()),
            other => Err(Error::Config(format!("unknown weight `{other}`"))),
        }
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        NoiseSpec::parse(&self.noise_name, self.noise_amp)
    }

    /// Resolve the solver configuration for a given viscosity; n_steps = 0
    /// selects the step count from the viscous CFL bound with a 0.5 margin.
    pub fn solve_config(&self, epsilon: f64) -> Result<SolveConfig> {
        let grid = self.grid()?;
        let n_steps = if self.n_steps == 0 {
            SolveConfig::steps_for(epsilon, self.t_final, &grid, 0.5)
        } else {
            self.n_steps
        };
        SolveConfig::new(epsilon, self.t_final, n_steps, grid, self.seed, self.ic)
    }

    pub fn epsilons(&self) -> Vec<f64> {
        if self.epsilon_list.is_empty() {
            vec![self.epsilon]
        } else {
            self.epsilon_list.clone()
        }
    }

    /// Serialize to the flat config format; parsing the output reproduces
    /// the configuration exactly.
    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        let join = |xs: &[f64]| {
            xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        };
        let _ = writeln!(s, "[solver]");
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "epsilon_list = {}", join(&self.epsilon_list));
        let _ = writeln!(s, "t_final = {}", self.t_final);
        let _ = writeln!(s, "n_steps = {}", self.n_steps);
        let _ = writeln!(s, "n_cells = {}", self.n_cells);
        let _ = writeln!(s, "half_width = {}", self.half_width);
        let _ = writeln!(s, "boundary = {}", self.boundary.name());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "n_paths = {}", self.n_paths);
        let _ = writeln!(s, "ic = {}", self.ic.name());
        let _ = writeln!(s, "[model]");
        let _ = writeln!(s, "flux = {}", self.flux_name);
        let _ = writeln!(s, "entropy = {}", self.entropy_name);
        let _ = writeln!(s, "entropy_p0 = {}", self.entropy_p0);
        let _ = writeln!(s, "weight = {}", self.weight_name);
        let _ = writeln!(s, "weight_n = {}", self.weight_n);
        let _ = writeln!(s, "noise = {}", self.noise_name);
        let _ = writeln!(s, "noise_amp = {}", self.noise_amp);
        let _ = writeln!(s, "[estimators]");
        let _ = writeln!(s, "power = {}", self.power);
        let _ = writeln!(s, "delta_list = {}", join(&self.delta_list));
        let _ = writeln!(s, "z_list = {}", join(&self.z_list));
        let _ = writeln!(s, "tau_list = {}", join(&self.tau_list));
        let _ = writeln!(s, "z_per_delta = {}", self.z_per_delta);
        let _ = writeln!(s, "lags_per_delta = {}", self.lags_per_delta);
        let _ = writeln!(s, "h_cells = {}", self.h_cells);
        let _ = writeln!(s, "refine_levels = {}", self.refine_levels);
        let _ = writeln!(s, "[output]");
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "emit_plots = {}", self.emit_plots);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_manifest() {
        let cfg = ExperimentConfig::default();
        let manifest = cfg.to_manifest();
        let back = ExperimentConfig::from_str(&manifest).unwrap();
        assert_eq!(back.to_manifest(), manifest);
    }

    #[test]
    fn parses_sections_comments_and_lists() {
        let text = "\
[solver]
epsilon = 0.04  # viscosity
n_cells = 512
epsilon_list = 0.04, 0.02, 0.01
z_list = 0.015625, 0.03125
half_width = 2.0
";
        let cfg = ExperimentConfig::from_str(text).unwrap();
        assert_eq!(cfg.epsilon, 0.04);
        assert_eq!(cfg.n_cells, 512);
        assert_eq!(cfg.epsilon_list, vec![0.04, 0.02, 0.01]);
        assert_eq!(cfg.z_list.len(), 2);
        let back = ExperimentConfig::from_str(&cfg.to_manifest()).unwrap();
        assert_eq!(back.to_manifest(), cfg.to_manifest());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let err = ExperimentConfig::from_str("no_such_key = 1\n").unwrap_err();
        assert!(err.to_string().contains("no_such_key"));
        let err = ExperimentConfig::from_str("epsilon = banana\n").unwrap_err();
        assert!(err.to_string().contains("epsilon"));
        assert!(ExperimentConfig::from_str("epsilon_list = 0.01, 0.02\n").is_err());
        assert!(ExperimentConfig::from_str("boundary = open\n").is_err());
    }

    #[test]
    fn rejects_misaligned_shifts() {
        // dx = 2/256; 0.005 is not a multiple
        let err = ExperimentConfig::from_str("z_list = 0.005\n").unwrap_err();
        assert!(err.to_string().contains("grid-aligned"));
    }
}
