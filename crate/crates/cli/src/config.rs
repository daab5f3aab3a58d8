use std::path::{Path, PathBuf};

use dmp_avoid::dmp::DmpGains;
use dmp_avoid::learning::{DatasetConfig, Grid, GridAxis, TrainConfig};
use dmp_avoid::sim::{EpisodeOptions, GuidanceConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, PathContext};

/// Experiment manifest. Every field has a default, so an empty file is a
/// valid config.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Root of every random stream.
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub episode: EpisodeSection,
    pub guidance: GuidanceSection,
    pub dataset: DatasetSection,
    pub train: TrainSection,
    pub suite: SuiteSection,
    pub paths: PathsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSection {
    pub dt: f64,
    pub tau: f64,
    pub settle: f64,
    pub alpha_x: f64,
    pub beta_x: f64,
    pub alpha_k: f64,
    pub resection_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceSection {
    pub alpha: f64,
    pub kappa: f64,
    pub blend: f64,
    pub directions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub scenarios: usize,
    /// Points per grid axis.
    pub grid: usize,
    pub baseline: f64,
    pub alpha: [f64; 2],
    pub psi: [f64; 2],
    pub kappa: [f64; 2],
    pub max_convergence: f64,
    /// Training fraction of the split.
    pub split: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    pub rel_tol: f64,
    pub patience: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSection {
    pub familiar_n: usize,
    pub novel_n: usize,
    pub novel_clearance: f64,
}

/// Defaults for file arguments not given on the command line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub dataset: Option<PathBuf>,
    pub models: Vec<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        let o = EpisodeOptions::default();
        Self {
            dt: o.dt,
            tau: o.tau,
            settle: o.settle,
            alpha_x: o.gains.alpha_x,
            beta_x: o.gains.beta_x,
            alpha_k: o.gains.alpha_k,
            resection_deg: o.resection_deg,
        }
    }
}

impl Default for GuidanceSection {
    fn default() -> Self {
        let g = GuidanceConfig::default();
        Self {
            alpha: g.alpha,
            kappa: g.kappa,
            blend: g.blend,
            directions: g.n_dirs,
        }
    }
}

impl Default for DatasetSection {
    fn default() -> Self {
        let d = DatasetConfig::default();
        Self {
            scenarios: d.n_scenarios,
            grid: d.grid.alpha.n,
            baseline: d.baseline,
            alpha: [d.grid.alpha.min, d.grid.alpha.max],
            psi: [d.grid.psi.min, d.grid.psi.max],
            kappa: [d.grid.kappa.min, d.grid.kappa.max],
            max_convergence: d.max_convergence,
            split: 0.7,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden: t.hidden,
            max_epochs: t.max_epochs,
            rel_tol: t.rel_tol,
            patience: t.patience,
        }
    }
}

impl Default for SuiteSection {
    fn default() -> Self {
        Self {
            familiar_n: 30,
            novel_n: 100,
            novel_clearance: 0.15,
        }
    }
}

/// Named sub-streams of the root seed.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Dataset = 1,
    Split = 2,
    Init = 3,
    Suite = 4,
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        let cfg: Self = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seed_for(&self, s: Stream) -> u64 {
        dmp_avoid::learning::derive_seed(self.seed, s as u64)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Usage(format!("config: {m}")));
        let range_ok = |r: [f64; 2]| r[0] > 0.0 && r[1] >= r[0] && r[1].is_finite();
        let d = &self.dataset;
        if !(range_ok(d.alpha) && range_ok(d.psi) && range_ok(d.kappa)) {
            return bad("dataset alpha, psi and kappa ranges need 0 < min <= max");
        }
        if d.scenarios == 0 || d.grid == 0 {
            return bad("dataset scenarios and grid must be positive");
        }
        if !(d.split > 0.0 && d.split < 1.0) {
            return bad("dataset split must lie in (0, 1)");
        }
        if !(d.max_convergence > 0.0) {
            return bad("dataset max_convergence must be positive");
        }
        if self.train.hidden.is_empty() || self.train.hidden.contains(&0) || self.train.max_epochs == 0 {
            return bad("train hidden widths and max_epochs must be positive");
        }
        if !(self.train.rel_tol >= 0.0) {
            return bad("train rel_tol must be non-negative");
        }
        let s = &self.suite;
        if s.familiar_n == 0 || s.novel_n == 0 || !(s.novel_clearance >= 0.0) {
            return bad("suite sizes must be positive and novel_clearance non-negative");
        }
        self.episode_options().validate()?;
        self.dataset_config().validate()?;
        Ok(())
    }

    pub fn episode_options(&self) -> EpisodeOptions {
        let e = &self.episode;
        let g = &self.guidance;
        EpisodeOptions {
            dt: e.dt,
            tau: e.tau,
            settle: e.settle,
            gains: DmpGains {
                alpha_x: e.alpha_x,
                beta_x: e.beta_x,
                alpha_k: e.alpha_k,
            },
            resection_deg: e.resection_deg,
            guidance: GuidanceConfig {
                alpha: g.alpha,
                kappa: g.kappa,
                blend: g.blend,
                n_dirs: g.directions,
            },
            ..EpisodeOptions::default()
        }
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        let d = &self.dataset;
        let axis = |r: [f64; 2], log: bool| GridAxis { min: r[0], max: r[1], n: d.grid, log };
        DatasetConfig {
            n_scenarios: d.scenarios,
            grid: Grid {
                alpha: axis(d.alpha, true),
                psi: axis(d.psi, false),
                kappa: axis(d.kappa, true),
            },
            baseline: d.baseline,
            seed: self.seed_for(Stream::Dataset),
            episode: self.episode_options(),
            max_convergence: d.max_convergence,
            ..DatasetConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            hidden: t.hidden.clone(),
            max_epochs: t.max_epochs,
            rel_tol: t.rel_tol,
            patience: t.patience,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_library() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!(c.episode_options(), EpisodeOptions::default());
        let d = c.dataset_config();
        assert_eq!(d.grid, Grid::default());
        assert_eq!(c.train_config(), TrainConfig::default());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c: Config = toml::from_str("seed = 4\n[dataset]\nscenarios = 10\ngrid = 20\n").unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.dataset.scenarios, 10);
        assert_eq!(c.dataset.baseline, 1.0);
        assert!(toml::from_str::<Config>("sed = 4\n").is_err());
    }

    #[test]
    fn streams_differ() {
        let c = Config::default();
        assert_ne!(c.seed_for(Stream::Dataset), c.seed_for(Stream::Split));
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = Config::default();
        c.dataset.split = 1.0;
        assert!(c.validate().is_err());
        let mut c = Config::default();
        c.episode.dt = 0.0;
        assert!(c.validate().is_err());
    }
}
