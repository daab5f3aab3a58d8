use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{run_episode, CouplingPolicy, EpisodeOptions, Metrics};
use super::scenario::{Obstacle, Scenario};
use crate::dmp::Vec3;
use crate::error::{invalid, Result};
use crate::geometry::Ellipsoid;

pub const FAMILIAR_CLEARANCES: [f64; 5] = [0.05, 0.10, 0.15, 0.20, 0.25];
pub const NOVEL_BASELINES: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
pub const SEMI_AXIS_RANGE: (f64, f64) = (0.025, 0.25);
pub const REPORT_FORMAT_VERSION: u32 = 1;

/// One episode of a suite: a scenario and the setting it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteCase {
    pub id: usize,
    pub setting: String,
    pub scenario: Scenario,
    pub scale_tau: bool,
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn clearance_label(c: Option<f64>) -> String {
    match c {
        None => "rc".to_string(),
        Some(d) => format!("rc-delta-{d:.2}"),
    }
}

/// Planar ellipses centred on a 1 m chord, one per draw, each run with the
/// unconstrained model and every clearance level, with and without tau
/// scaling: `12 n` cases.
pub fn gen_familiar_suite(n: usize, seed: u64) -> Vec<SuiteCase> {
    let mut rng = stream(seed, 0);
    let (lo, hi) = SEMI_AXIS_RANGE;
    let shapes: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(lo..=hi), rng.gen_range(lo..=hi))).collect();
    let levels: Vec<Option<f64>> = std::iter::once(None).chain(FAMILIAR_CLEARANCES.iter().map(|&d| Some(d))).collect();
    let mut cases = Vec::with_capacity(12 * n);
    for scale_tau in [true, false] {
        for level in &levels {
            let setting = format!("{}{}", clearance_label(*level), if scale_tau { "+scale" } else { "" });
            for (i, &(a, b)) in shapes.iter().enumerate() {
                let e = Ellipsoid::axis_aligned(Vec3::new(0.5, 0.0, 0.0), Vec3::new(a, b, b))
                    .expect("semi-axes drawn from a positive range");
                let scenario = Scenario {
                    start: Vec3::zeros(),
                    goal: Vec3::x(),
                    obstacles: vec![Obstacle::point_system(e)],
                    clearance: *level,
                    workspace: None,
                    seed: i as u64,
                };
                cases.push(SuiteCase {
                    id: cases.len(),
                    setting: setting.clone(),
                    scenario,
                    scale_tau,
                });
            }
        }
    }
    cases
}

/// True when the straight start-goal segment touches a dilated obstacle.
pub fn baseline_collides(sc: &Scenario) -> bool {
    sc.obstacles.iter().any(|o| o.dilated.segment_distance(&sc.start, &sc.goal) == 0.0)
}

/// Random ellipsoids around chords of each baseline length. Centres keep a
/// 5 cm margin to start and goal along x and lie within 0.4 m of the chord
/// in y and z. Draws whose straight chord already keeps `clearance` from
/// the body are rejected, so every case needs avoidance.
pub fn gen_novel_suite(n_per_baseline: usize, seed: u64, clearance: f64) -> Result<Vec<SuiteCase>> {
    if !(clearance >= 0.0) {
        return invalid(format!("clearance must be non-negative, got {clearance}"));
    }
    let (lo, hi) = SEMI_AXIS_RANGE;
    let margin = 0.05;
    let mut cases = Vec::with_capacity(n_per_baseline * NOVEL_BASELINES.len());
    for (bi, &length) in NOVEL_BASELINES.iter().enumerate() {
        let mut rng = stream(seed, bi as u64 + 1);
        let l1_max = hi.min(0.5 * length - margin);
        let goal = Vec3::new(length, 0.0, 0.0);
        let mut made = 0;
        while made < n_per_baseline {
            let axes = Vec3::new(rng.gen_range(lo..=l1_max), rng.gen_range(lo..=hi), rng.gen_range(lo..=hi));
            let center = Vec3::new(
                rng.gen_range(margin + axes.x..=length - margin - axes.x),
                rng.gen_range(-0.4..=0.4),
                rng.gen_range(-0.4..=0.4),
            );
            let e = Ellipsoid::axis_aligned(center, axes)?;
            if e.segment_distance(&Vec3::zeros(), &goal) >= clearance {
                continue;
            }
            let scenario = Scenario {
                start: Vec3::zeros(),
                goal,
                obstacles: vec![Obstacle::point_system(e)],
                clearance: Some(clearance),
                workspace: None,
                seed: made as u64,
            };
            cases.push(SuiteCase {
                id: cases.len(),
                setting: format!("goal-{length:.1}m"),
                scenario,
                scale_tau: true,
            });
            made += 1;
        }
    }
    Ok(cases)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scenario_id: usize,
    pub setting: String,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub setting: String,
    pub episodes: usize,
    pub collisions: usize,
    pub clearance_mean: f64,
    pub clearance_min: f64,
    pub convergence_mean: f64,
    pub convergence_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub format_version: u32,
    pub episodes: usize,
    pub collisions: usize,
    pub success_rate: f64,
    pub settings: Vec<SettingSummary>,
}

/// Per-setting summaries in order of first appearance.
pub fn aggregate(records: &[EpisodeRecord]) -> SuiteReport {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.setting.as_str()) {
            order.push(&r.setting);
        }
    }
    let settings = order
        .iter()
        .map(|s| {
            let rs: Vec<&Metrics> = records.iter().filter(|r| r.setting == *s).map(|r| &r.metrics).collect();
            let n = rs.len() as f64;
            SettingSummary {
                setting: s.to_string(),
                episodes: rs.len(),
                collisions: rs.iter().filter(|m| m.collided).count(),
                clearance_mean: rs.iter().map(|m| m.clearance).sum::<f64>() / n,
                clearance_min: rs.iter().map(|m| m.clearance).fold(f64::INFINITY, f64::min),
                convergence_mean: rs.iter().map(|m| m.convergence).sum::<f64>() / n,
                convergence_max: rs.iter().map(|m| m.convergence).fold(0.0, f64::max),
            }
        })
        .collect();
    let collisions = records.iter().filter(|r| r.metrics.collided).count();
    SuiteReport {
        format_version: REPORT_FORMAT_VERSION,
        episodes: records.len(),
        collisions,
        success_rate: if records.is_empty() {
            1.0
        } else {
            1.0 - collisions as f64 / records.len() as f64
        },
        settings,
    }
}

/// Run every case in parallel; records keep the case order.
pub fn evaluate_suite(
    cases: &[SuiteCase],
    policy: &dyn CouplingPolicy,
    opts: &EpisodeOptions,
) -> Result<(Vec<EpisodeRecord>, SuiteReport)> {
    if cases.is_empty() {
        return invalid("suite is empty");
    }
    let records = cases
        .par_iter()
        .map(|c| {
            let o = EpisodeOptions {
                scale_tau: c.scale_tau,
                record: false,
                ..*opts
            };
            let (_, metrics) = run_episode(&c.scenario, policy, &o)?;
            Ok(EpisodeRecord {
                scenario_id: c.id,
                setting: c.setting.clone(),
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = aggregate(&records);
    Ok((records, report))
}

/// `scenario_id,collided,clearance,convergence,tau` per episode.
pub fn write_episode_csv<W: Write>(records: &[EpisodeRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["scenario_id", "collided", "clearance", "convergence", "tau"])
        .map_err(csv_err)?;
    for r in records {
        let m = &r.metrics;
        out.write_record([
            r.scenario_id.to_string(),
            m.collided.to_string(),
            m.clearance.to_string(),
            m.convergence.to_string(),
            m.tau.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Format(e.to_string())
}
