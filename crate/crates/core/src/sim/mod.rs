//! Closed-loop episodes, experiment suites and metrics.

mod deadzone;
mod episode;
mod scenario;
mod suite;

pub use deadzone::{compare_dead_zone, steering_profile, DeadZoneComparison, DeadZoneSetup, PointRollout};
pub use episode::{
    run_episode, CouplingPolicy, EpisodeOptions, FixedParams, GuidanceConfig, Metrics, StepDescriptor, Trajectory,
};
pub use scenario::{dilate_ellipsoid, Obstacle, ObstacleSpec, Scenario, ScenarioFile};
pub use suite::{
    aggregate, baseline_collides, evaluate_suite, gen_familiar_suite, gen_novel_suite, write_episode_csv, EpisodeRecord,
    SettingSummary, SuiteCase, SuiteReport, FAMILIAR_CLEARANCES, NOVEL_BASELINES, REPORT_FORMAT_VERSION, SEMI_AXIS_RANGE,
};
