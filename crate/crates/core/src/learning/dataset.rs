use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::AvoidanceParams;
use crate::dmp::Vec3;
use crate::error::{invalid, Error, Result};
use crate::geometry::Ellipsoid;
use crate::sim::{run_episode, EpisodeOptions, FixedParams, Obstacle, Scenario};

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const DATASET_HEADER: [&str; 6] = ["lp1", "lp2", "clearance", "alpha", "psi", "kappa"];

/// One collision-free rollout: the obstacle section, the clearance it
/// achieved and the parameters that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub lp1: f64,
    pub lp2: f64,
    pub clearance: f64,
    pub alpha: f64,
    pub psi: f64,
    pub kappa: f64,
}

impl Sample {
    pub fn params(&self) -> Result<AvoidanceParams> {
        AvoidanceParams::new(self.alpha, self.psi, self.kappa)
    }

    fn validate(&self) -> Result<()> {
        let v = [self.lp1, self.lp2, self.clearance, self.alpha, self.psi, self.kappa];
        if v.iter().all(|x| x.is_finite() && *x > 0.0) {
            Ok(())
        } else {
            Err(Error::Format(format!("sample fields must be positive and finite: {v:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    pub log: bool,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.min];
        }
        (0..self.n)
            .map(|i| {
                let u = i as f64 / (self.n - 1) as f64;
                if self.log {
                    (self.min.ln() + u * (self.max.ln() - self.min.ln())).exp()
                } else {
                    self.min + u * (self.max - self.min)
                }
            })
            .collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.n == 0 || !(self.min > 0.0) || !(self.max >= self.min) || !self.max.is_finite() {
            return invalid(format!("grid axis {name} needs n >= 1 and 0 < min <= max"));
        }
        Ok(())
    }
}

/// Parameter grid explored per scenario. The kappa floor keeps the
/// influence region from reaching the goal; lower floors let the chain
/// pair large clearances with wide envelopes that never settle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub alpha: GridAxis,
    pub psi: GridAxis,
    pub kappa: GridAxis,
}

impl Grid {
    pub fn with_points(n: usize) -> Self {
        Self {
            alpha: GridAxis { min: 1.0, max: 1000.0, n, log: true },
            psi: GridAxis { min: 0.05, max: std::f64::consts::FRAC_PI_2, n, log: false },
            kappa: GridAxis { min: 10.0, max: 500.0, n, log: true },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate("alpha")?;
        self.psi.validate("psi")?;
        self.kappa.validate("kappa")
    }

    /// Every cell, alpha slowest and kappa fastest.
    pub fn cells(&self) -> Vec<AvoidanceParams> {
        let (a, p, k) = (self.alpha.values(), self.psi.values(), self.kappa.values());
        let mut out = Vec::with_capacity(a.len() * p.len() * k.len());
        for &alpha in &a {
            for &psi in &p {
                for &kappa in &k {
                    out.push(AvoidanceParams { alpha, psi, kappa });
                }
            }
        }
        out
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self::with_points(50)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_scenarios: usize,
    pub grid: Grid,
    /// Start-goal distance, m.
    pub baseline: f64,
    pub semi_axis_range: (f64, f64),
    pub seed: u64,
    pub episode: EpisodeOptions,
    /// Rollouts ending farther than this from the goal are dropped, m.
    pub max_convergence: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_scenarios: 100,
            grid: Grid::default(),
            baseline: 1.0,
            semi_axis_range: crate::sim::SEMI_AXIS_RANGE,
            seed: 0,
            episode: EpisodeOptions::default(),
            max_convergence: 1e-3,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.episode.validate()?;
        let (lo, hi) = self.semi_axis_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return invalid("semi-axis range must satisfy 0 < lo <= hi");
        }
        if !(self.baseline > 2.0 * hi) {
            return invalid("baseline must exceed the largest obstacle diameter");
        }
        if !(self.max_convergence > 0.0) {
            return invalid("max_convergence must be positive");
        }
        Ok(())
    }
}

/// Chord along x with a planar ellipse `(lp1, lp2)` centred on it; the
/// third semi-axis equals `lp2` so the section through the chord matches.
pub fn training_scenario(baseline: f64, lp1: f64, lp2: f64) -> Result<Scenario> {
    let e = Ellipsoid::axis_aligned(Vec3::new(0.5 * baseline, 0.0, 0.0), Vec3::new(lp1, lp2, lp2))?;
    Scenario::new(Vec3::zeros(), Vec3::new(baseline, 0.0, 0.0), vec![Obstacle::point_system(e)], None)
}

/// `n` semi-axis pairs, uniform on each axis and stratified so every
/// `1/n` slice of the range holds exactly one draw per axis.
pub fn latin_hypercube_shapes(n: usize, range: (f64, f64), seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = range;
    let mut axis = || {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        strata
            .into_iter()
            .map(|k| lo + (hi - lo) * (k as f64 + rng.gen::<f64>()) / n as f64)
            .collect::<Vec<f64>>()
    };
    let a = axis();
    let b = axis();
    a.into_iter().zip(b).collect()
}

/// Roll out every grid cell on every sampled scenario and keep the
/// collision-free, converged rollouts. Rows keep scenario then cell order
/// regardless of scheduling.
pub fn gen_dataset(cfg: &DatasetConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let shapes = latin_hypercube_shapes(cfg.n_scenarios, cfg.semi_axis_range, cfg.seed);
    let cells = cfg.grid.cells();
    let opts = EpisodeOptions {
        record: false,
        guided: false,
        ..cfg.episode
    };
    let mut out = Vec::new();
    for (i, &(lp1, lp2)) in shapes.iter().enumerate() {
        let sc = training_scenario(cfg.baseline, lp1, lp2)?;
        let rows = cells
            .par_iter()
            .map(|p| {
                let (_, m) = run_episode(&sc, &FixedParams(*p), &opts)?;
                let keep = !m.collided && m.convergence < cfg.max_convergence && m.clearance > 0.0;
                Ok(keep.then_some(Sample {
                    lp1,
                    lp2,
                    clearance: m.clearance,
                    alpha: p.alpha,
                    psi: p.psi,
                    kappa: p.kappa,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        let kept: Vec<Sample> = rows.into_iter().flatten().collect();
        if kept.is_empty() {
            log::warn!("scenario {i} ({lp1:.4}, {lp2:.4}) kept no rollouts; skipped");
        } else {
            log::info!("scenario {i} ({lp1:.4}, {lp2:.4}) kept {} of {}", kept.len(), cells.len());
        }
        out.extend(kept);
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// CSV with a `#format_version=N` line ahead of the header.
pub fn write_dataset<W: Write>(data: &[Sample], mut w: W) -> Result<()> {
    writeln!(w, "#format_version={DATASET_FORMAT_VERSION}")?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(DATASET_HEADER).map_err(csv_err)?;
    for s in data {
        out.write_record(
            [s.lp1, s.lp2, s.clearance, s.alpha, s.psi, s.kappa].map(|v| v.to_string()),
        )
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<Vec<Sample>> {
    let mut r = BufReader::new(r);
    let mut first = String::new();
    r.read_line(&mut first)?;
    let version = first
        .trim()
        .strip_prefix("#format_version=")
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| Error::Format("dataset must start with #format_version=N".into()))?;
    if version != DATASET_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "dataset format {version} is not supported (expected {DATASET_FORMAT_VERSION})"
        )));
    }
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(csv_err)?;
    if header.iter().collect::<Vec<_>>() != DATASET_HEADER {
        return Err(Error::Format(format!("unexpected dataset header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in rd.deserialize::<Sample>() {
        let s = rec.map_err(csv_err)?;
        s.validate()?;
        out.push(s);
    }
    Ok(out)
}

/// Seeded shuffle, then the first `round(fraction n)` rows train.
pub fn split_dataset<T: Clone>(data: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return invalid(format!("split fraction must lie in (0, 1), got {fraction}"));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (fraction * data.len() as f64).round() as usize;
    let pick = |ix: &[usize]| ix.iter().map(|&i| data[i].clone()).collect::<Vec<T>>();
    Ok((pick(&idx[..n_train]), pick(&idx[n_train..])))
}

/// Mean squared error over the variance of `truth`.
pub fn nmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || truth.len() < 2 {
        return invalid("nmse needs equal lengths of at least 2");
    }
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let var = truth.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return invalid("nmse is undefined for constant truth");
    }
    let mse = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    Ok(mse / var)
}
