//! `dmp-avoid`: dataset generation, chain training, suite evaluation,
//! superquadric fitting and single-episode simulation.

// `!(x > 0.0)` also rejects NaN, which is the point of those checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use dmp_avoid::coupling::AvoidanceParams;
use dmp_avoid::dmp::Vec3;
use dmp_avoid::geometry::{dilate_cloud, fit_superquadric, FitOptions, PointCloud};
use dmp_avoid::learning::{
    chain_nmse, read_dataset, split_dataset, train_chain, write_dataset, gen_dataset, ChainScores, ChainSet,
    ChainVariant, RegressorChain, CHAIN_FORMAT_VERSION, DATASET_FORMAT_VERSION,
};
use dmp_avoid::sim::{
    evaluate_suite, gen_familiar_suite, gen_novel_suite, run_episode, write_episode_csv, CouplingPolicy, EpisodeOptions,
    FixedParams, Scenario, REPORT_FORMAT_VERSION,
};
use serde::Serialize;

use config::{Config, Stream};
use error::{CliError, CliResult, PathContext};

#[derive(Parser, Debug)]
#[command(name = "dmp-avoid", about = "Obstacle avoidance for DMP-encoded policies")]
struct Cli {
    /// TOML experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed of every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 uses every core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample scenarios, sweep the parameter grid and write the kept rollouts.
    GenDataset(GenDatasetArgs),
    /// Train a regressor chain on a dataset and report NMSE per target.
    Train(TrainArgs),
    /// Run an evaluation suite with trained chains.
    Eval(EvalArgs),
    /// Fit a superquadric to a point cloud.
    Fit(FitArgs),
    /// Run one episode of a scenario file.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct GenDatasetArgs {
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    scenarios: Option<usize>,
    /// Points per grid axis.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset CSV.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    variant: Variant,
    /// Output chain JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also write the NMSE report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Variant {
    Rc,
    RcDelta,
}

impl From<Variant> for ChainVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Rc => ChainVariant::Section,
            Variant::RcDelta => ChainVariant::SectionClearance,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Suite {
    Familiar,
    Novel,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Chain JSON files; give one per variant the suite needs.
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    #[arg(long, value_enum)]
    suite: Suite,
    /// Draws per suite (ellipses for familiar, scenes per baseline for novel).
    #[arg(long)]
    n: Option<usize>,
    /// Directory for `episodes.csv` and `aggregate.json`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Exit with code 3 if any episode collides.
    #[arg(long)]
    assert_safe: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// `.ply` (ASCII) or `x y z` text.
    cloud: PathBuf,
    /// Dilate by the system half-extents before fitting.
    #[arg(long, value_name = "HX,HY,HZ", value_parser = parse_triple)]
    dilate: Option<Vec3>,
    /// Hold both shape exponents at 1.
    #[arg(long)]
    ellipsoid: bool,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario JSON.
    #[arg(long)]
    scenario: PathBuf,
    /// Chain JSON files; the scenario's clearance target picks the variant.
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    /// Fixed coupling parameters instead of a chain.
    #[arg(long, value_name = "ALPHA,PSI,KAPPA", value_parser = parse_triple, conflicts_with = "models")]
    params: Option<Vec3>,
    /// Select a route and add heading guidance.
    #[arg(long)]
    guided: bool,
    /// Stretch the duration by the estimated path length.
    #[arg(long)]
    scale_tau: bool,
    /// Write `t x y z` per step to this file.
    #[arg(long)]
    dump_traj: Option<PathBuf>,
    /// Exit with code 3 if the episode collides.
    #[arg(long)]
    assert_safe: bool,
}

fn parse_triple(s: &str) -> Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [a, b, c] => Ok(Vec3::new(a, b, c)),
        _ => Err(format!("expected three comma-separated numbers, got {}", v.len())),
    }
}

fn version_text() -> String {
    format!(
        "{} (dataset format {DATASET_FORMAT_VERSION}, chain format {CHAIN_FORMAT_VERSION}, report format {REPORT_FORMAT_VERSION})",
        env!("CARGO_PKG_VERSION")
    )
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).at(dir)?;
    }
    Ok(BufWriter::new(File::create(path).at(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e))?;
    writeln!(w).at(path)?;
    w.flush().at(path)
}

fn load_chains(paths: &[PathBuf]) -> CliResult<ChainSet> {
    let mut set = ChainSet::default();
    for p in paths {
        let text = std::fs::read_to_string(p).at(p)?;
        let chain = RegressorChain::from_json(&text).at(p)?;
        let slot = match chain.variant {
            ChainVariant::Section => &mut set.section,
            ChainVariant::SectionClearance => &mut set.section_clearance,
        };
        if slot.is_some() {
            return Err(CliError::Usage(format!("two {} chains given", chain.variant.name())));
        }
        *slot = Some(chain);
    }
    Ok(set)
}

fn gen_dataset_cmd(cfg: &Config, a: &GenDatasetArgs) -> CliResult<()> {
    let mut cfg = cfg.clone();
    if let Some(n) = a.scenarios {
        cfg.dataset.scenarios = n;
    }
    if let Some(g) = a.grid {
        cfg.dataset.grid = g;
    }
    cfg.validate()?;
    let data = gen_dataset(&cfg.dataset_config())?;
    let mut w = create(&a.out)?;
    write_dataset(&data, &mut w).at(&a.out)?;
    w.flush().at(&a.out)?;
    println!("wrote {} rows to {}", data.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct TrainReport {
    variant: &'static str,
    train_rows: usize,
    test_rows: usize,
    train: ChainScores,
    test: ChainScores,
}

fn train_cmd(cfg: &Config, a: &TrainArgs) -> CliResult<()> {
    let path = a
        .dataset
        .as_ref()
        .or(cfg.paths.dataset.as_ref())
        .ok_or_else(|| CliError::Usage("no dataset given (--dataset or paths.dataset)".into()))?;
    let data = read_dataset(File::open(path).at(path)?).at(path)?;
    let (train, test) = split_dataset(&data, cfg.dataset.split, cfg.seed_for(Stream::Split))?;
    let variant = ChainVariant::from(a.variant);
    let t = train_chain(&train, variant, &cfg.train_config(), cfg.seed_for(Stream::Init))?;
    t.chain.save(&a.out).at(&a.out)?;
    let report = TrainReport {
        variant: variant.name(),
        train_rows: train.len(),
        test_rows: test.len(),
        train: chain_nmse(&t.chain, &train)?,
        test: chain_nmse(&t.chain, &test)?,
    };
    println!("{} chain, {} train / {} test rows", report.variant, report.train_rows, report.test_rows);
    println!("{:6} {:>12} {:>12} {:>12}", "NMSE", "Y1 kappa", "Y2 psi", "Y3 alpha");
    for (name, s) in [("train", &report.train), ("test", &report.test)] {
        println!("{name:6} {:>12.4e} {:>12.4e} {:>12.4e}", s.y1, s.y2, s.y3);
    }
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    Ok(())
}

fn eval_cmd(cfg: &Config, a: &EvalArgs) -> CliResult<()> {
    let models = if a.models.is_empty() { &cfg.paths.models } else { &a.models };
    if models.is_empty() {
        return Err(CliError::Usage("no model given (--model or paths.models)".into()));
    }
    let chains = load_chains(models)?;
    let seed = cfg.seed_for(Stream::Suite);
    let cases = match a.suite {
        Suite::Familiar => gen_familiar_suite(a.n.unwrap_or(cfg.suite.familiar_n), seed),
        Suite::Novel => gen_novel_suite(a.n.unwrap_or(cfg.suite.novel_n), seed, cfg.suite.novel_clearance)?,
    };
    let (records, report) = evaluate_suite(&cases, &chains, &cfg.episode_options())?;
    println!(
        "{:24} {:>8} {:>10} {:>12} {:>12} {:>12}",
        "setting", "episodes", "collisions", "clear mean", "conv mean", "conv max"
    );
    for s in &report.settings {
        println!(
            "{:24} {:>8} {:>10} {:>12.4} {:>12.4e} {:>12.4e}",
            s.setting, s.episodes, s.collisions, s.clearance_mean, s.convergence_mean, s.convergence_max
        );
    }
    println!("success rate {:.4}", report.success_rate);
    if let Some(dir) = a.out_dir.as_ref().or(cfg.paths.out_dir.as_ref()) {
        let csv = dir.join("episodes.csv");
        let mut w = create(&csv)?;
        write_episode_csv(&records, &mut w).at(&csv)?;
        w.flush().at(&csv)?;
        write_json(&dir.join("aggregate.json"), &report)?;
    }
    if a.assert_safe && report.collisions > 0 {
        return Err(CliError::Assertion(format!("{} of {} episodes collided", report.collisions, report.episodes)));
    }
    Ok(())
}

#[derive(Serialize)]
struct FitOutput {
    center: Vec3,
    semi_axes: Vec3,
    exponents: [f64; 2],
    orientation: nalgebra::Matrix3<f64>,
    residual: f64,
    dilated: bool,
}

fn fit_cmd(a: &FitArgs) -> CliResult<()> {
    let cloud = PointCloud::load(&a.cloud).at(&a.cloud)?;
    let extents = a.dilate.unwrap_or_else(Vec3::zeros);
    let dilated = extents != Vec3::zeros();
    let cloud = if dilated { dilate_cloud(&cloud, extents)? } else { cloud };
    let opts = FitOptions {
        fix_ellipsoid: a.ellipsoid,
        enclose: if dilated { FitOptions::dilated().enclose } else { None },
        ..FitOptions::default()
    };
    let fit = fit_superquadric(&cloud, &opts)?;
    if fit.warning {
        log::warn!("fit stopped on its iteration budget");
    }
    let sq = fit.superquadric;
    let out = FitOutput {
        center: sq.center,
        semi_axes: sq.semi_axes(),
        exponents: [sq.lambda[3], sq.lambda[4]],
        orientation: sq.orientation,
        residual: fit.residual,
        dilated,
    };
    match &a.out {
        Some(p) => write_json(p, &out),
        None => {
            println!("{}", serde_json::to_string_pretty(&out).map_err(|e| CliError::Io(e.to_string()))?);
            Ok(())
        }
    }
}

fn simulate_cmd(cfg: &Config, a: &SimulateArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.scenario).at(&a.scenario)?;
    let sc = Scenario::from_json(&text).at(&a.scenario)?;
    let policy: Box<dyn CouplingPolicy> = match a.params {
        Some(p) => Box::new(FixedParams(AvoidanceParams::new(p.x, p.y, p.z)?)),
        None => {
            let models = if a.models.is_empty() { &cfg.paths.models } else { &a.models };
            if models.is_empty() {
                return Err(CliError::Usage("no model given (--model, --params or paths.models)".into()));
            }
            Box::new(load_chains(models)?)
        }
    };
    let opts = EpisodeOptions {
        guided: a.guided,
        scale_tau: a.scale_tau,
        record: a.dump_traj.is_some(),
        ..cfg.episode_options()
    };
    let (traj, m) = run_episode(&sc, policy.as_ref(), &opts)?;
    if let Some(p) = &a.dump_traj {
        let mut w = create(p)?;
        traj.write_text(&mut w).at(p)?;
        w.flush().at(p)?;
    }
    #[derive(Serialize)]
    struct Out {
        collided: bool,
        clearance: f64,
        convergence: f64,
        tau: f64,
        omega_d: Option<f64>,
    }
    let out = Out {
        collided: m.collided,
        clearance: m.clearance,
        convergence: m.convergence,
        tau: m.tau,
        omega_d: traj.omega_d,
    };
    println!("{}", serde_json::to_string(&out).map_err(|e| CliError::Io(e.to_string()))?);
    if a.assert_safe && m.collided {
        return Err(CliError::Assertion("episode collided".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::GenDataset(a) => gen_dataset_cmd(&cfg, a),
        Command::Train(a) => train_cmd(&cfg, a),
        Command::Eval(a) => eval_cmd(&cfg, a),
        Command::Fit(a) => fit_cmd(a),
        Command::Simulate(a) => simulate_cmd(&cfg, a),
    }
}

fn main() {
    let matches = match Cli::command().version(version_text()).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| {
        let _ = e.print();
        std::process::exit(1);
    });
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
