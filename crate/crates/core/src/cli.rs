//! The `skill-guidance` command line.
//!
//! ```text
//! train-ref    -> <out>/checkpoint/, <out>/metrics.csv
//! collect      -> dataset file (binary)
//! fit-encoder  -> projection text file, accuracy row in encoder_accuracy.csv
//! train-skills -> <out>/checkpoint/, <out>/metrics.csv, <out>/eval_returns.csv
//! eval         -> displacement, summary, visitation, importance and separation CSVs
//! summarize    -> summary table across seeds and variants
//! curves       -> return curves aggregated across seeds
//! serve-maze   -> the built-in maze behind the external protocol on stdin/stdout
//! ```
//!
//! Every output file gets a `<file>.manifest` beside it (checkpoints carry
//! their own). Settings are layered: defaults, then `--config`, then
//! `--set key=value`, then the named flags. Outputs default to paths under
//! `$SKILL_GUIDANCE_OUT` (or `runs/`).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::approx::{ActionMode, LinearProjection};
use crate::checkpoint::{self, MANIFEST_FILE};
use crate::dataset::LabeledStateDataset;
use crate::env::{optimal_return, serve, Environment, ExternalEnv, PointMaze, PointMazeState};
use crate::error::{Error, Result};
use crate::eval::{self, EvalRecord, FiveNumber};
use crate::project::{collect_labeled_states, export_projection, import_projection, pretrain_encoder};
use crate::sac::train_reference_policy;
use crate::seeding::derive_indexed_seed;
use crate::skill::{SkillTrainer, METRICS_HEADER};
use crate::Config;

pub const OUT_ROOT_VAR: &str = "SKILL_GUIDANCE_OUT";
pub const REF_METRICS_HEADER: &str = "epoch,env_steps,q1_loss,q2_loss,policy_loss,eval_return,optimal_return";
pub const ACCURACY_HEADER: &str = "seed,embedding_dim,steps,train_accuracy,held_out_accuracy";

#[derive(Debug, Parser)]
#[command(name = "skill-guidance", version, about = "Skill discovery guided by a learned state projection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Config file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path; defaults to a location under $SKILL_GUIDANCE_OUT.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override any config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Run against an external environment speaking the adapter protocol
    /// on stdin/stdout of this shell command, instead of the built-in maze.
    #[arg(long, value_name = "COMMAND")]
    pub env_cmd: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the reference policy on the extrinsic reward.
    TrainRef {
        #[command(flatten)]
        common: Common,
        /// Environment-step budget.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Roll out the reference policy and a uniform-random policy.
    Collect {
        #[command(flatten)]
        common: Common,
        /// Reference run directory or checkpoint directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        n_traj: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Fit the linear projection on a labeled dataset.
    FitEncoder {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        embedding_dim: Option<usize>,
    },
    /// Skill discovery, guided by a projection or on raw states.
    TrainSkills {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "baseline")]
        projection: Option<PathBuf>,
        /// Discriminate on unprojected, unstandardized states.
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        skills: Option<usize>,
        /// Environment-step budget.
        #[arg(long)]
        steps: Option<usize>,
        /// Continue from `<out>/checkpoint` when it exists.
        #[arg(long)]
        resume: bool,
    },
    /// Roll out every skill and write the report tables.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Skill run directory or checkpoint directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Act with the top component's mean (the default).
        #[arg(long, conflicts_with = "stochastic")]
        deterministic: bool,
        #[arg(long)]
        stochastic: bool,
        /// State coordinate used for displacement.
        #[arg(long, default_value_t = 0)]
        axis: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Rollouts per skill.
        #[arg(long)]
        rollouts: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Labeled dataset whose expert states define the projected range
        /// for the span fraction.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Table of displacement statistics, mean and std across seeds.
    Summarize {
        /// `NAME=EVAL_DIR[,EVAL_DIR...]`, one per variant.
        #[arg(long = "variant", required = true)]
        variants: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Max/mean/min return across skills per epoch, aggregated over runs.
    Curves {
        /// Skill run directories holding eval_returns.csv.
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the built-in maze over stdin/stdout.
    ServeMaze {
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        shared_start_noise: bool,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::TrainRef { common, steps } => train_ref(&common, steps),
        Command::Collect {
            common,
            checkpoint,
            n_traj,
            horizon,
        } => collect(&common, checkpoint, n_traj, horizon),
        Command::FitEncoder {
            common,
            dataset,
            embedding_dim,
        } => fit_encoder(&common, dataset, embedding_dim),
        Command::TrainSkills {
            common,
            projection,
            baseline,
            skills,
            steps,
            resume,
        } => train_skills(&common, projection, baseline, skills, steps, resume),
        Command::Eval {
            common,
            checkpoint,
            stochastic,
            axis,
            workers,
            rollouts,
            horizon,
            dataset,
            ..
        } => {
            let mode = if stochastic {
                ActionMode::Stochastic
            } else {
                ActionMode::Deterministic
            };
            evaluate(&common, checkpoint, mode, axis, workers, rollouts, horizon, dataset)
        }
        Command::Summarize { variants, out } => summarize(&variants, out),
        Command::Curves { runs, out } => curves(&runs, out),
        Command::ServeMaze {
            horizon,
            shared_start_noise,
        } => {
            let mut env = PointMaze::new(horizon.unwrap_or(Config::default().horizon), shared_start_noise, 0);
            serve(&mut env, &mut Stdio)
        }
    }
}

pub fn out_root() -> PathBuf {
    std::env::var_os(OUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

fn out_or(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| out_root().join(default))
}

/// `base`, then the config file, then `--set`, then `--seed`.
fn layered(common: &Common, base: Config) -> Result<Config> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            Config::from_text(&text)?
        }
        None => base,
    };
    for kv in &common.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

/// The environment behind a command.
#[derive(Debug, Clone)]
pub enum EnvSource {
    Maze { horizon: usize, shared_noise: bool },
    External(String),
}

impl EnvSource {
    pub fn new(config: &Config, env_cmd: Option<&str>) -> Self {
        match env_cmd {
            Some(cmd) => EnvSource::External(cmd.to_string()),
            None => EnvSource::Maze {
                horizon: config.horizon,
                shared_noise: config.shared_start_noise,
            },
        }
    }

    pub fn open(&self, config: &Config) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvSource::Maze { horizon, shared_noise } => Box::new(PointMaze::new(*horizon, *shared_noise, 0)),
            EnvSource::External(cmd) => {
                let mut process = Process::new("sh");
                process.arg("-c").arg(cmd);
                Box::new(ExternalEnv::spawn(process, Some((config.state_dim, config.action_dim)))?)
            }
        })
    }

    fn is_maze(&self) -> bool {
        matches!(self, EnvSource::Maze { .. })
    }
}

fn maze_optimum(horizon: usize) -> impl Fn(&[f64]) -> f64 {
    move |s: &[f64]| optimal_return(PointMazeState { x: s[0], y: s[1] }, horizon)
}

fn content_version(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `<path>.manifest` describing the file at `path` and the run it
/// came from.
pub fn write_file_manifest(path: &Path, config: &Config, command: &str) -> Result<()> {
    write_manifest(
        path,
        &[
            ("command", command.to_string()),
            ("config_hash", config.hash()),
            ("seed", config.seed.to_string()),
        ],
    )
}

fn write_manifest(path: &Path, fields: &[(&str, String)]) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut text = format!("file={}\n", path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default());
    for (k, v) in fields {
        let _ = writeln!(text, "{k}={v}");
    }
    let _ = writeln!(text, "crate_version={}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(text, "content={}", content_version(&bytes));
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest");
    let manifest = PathBuf::from(name);
    fs::write(&manifest, text).map_err(|e| Error::io(&manifest, e))
}

fn write_output(path: &Path, text: &str, config: &Config, command: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    write_file_manifest(path, config, command)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

/// Accepts a run directory (holding `checkpoint/`) or a checkpoint itself.
fn checkpoint_dir(path: &Path) -> PathBuf {
    let nested = path.join("checkpoint");
    if nested.join(MANIFEST_FILE).is_file() {
        nested
    } else {
        path.to_path_buf()
    }
}

fn train_ref(common: &Common, steps: Option<usize>) -> Result<()> {
    let mut config = layered(common, Config::default())?;
    if let Some(steps) = steps {
        config.ref_epochs = config.epochs_for_steps(steps);
    }
    config.validate()?;
    let out = out_or(common, "ref");
    create_dir(&out)?;
    let source = EnvSource::new(&config, common.env_cmd.as_deref());
    let mut env = source.open(&config)?;
    let mut eval_env = source.open(&config)?;
    let optimum = maze_optimum(config.horizon);
    let optimum: Option<crate::sac::OptimalReturn<'_>> = if source.is_maze() { Some(&optimum) } else { None };

    let metrics_path = out.join("metrics.csv");
    let mut metrics = format!("{REF_METRICS_HEADER}\n");
    let run = train_reference_policy(&mut env, &mut eval_env, &config, optimum, |m| {
        let _ = writeln!(
            metrics,
            "{},{},{},{},{},{},{}",
            m.epoch, m.env_steps, m.q1_loss, m.q2_loss, m.policy_loss, m.eval_return, m.optimal_return
        );
        eprintln!(
            "epoch {:3}  steps {:6}  eval return {:8.3} / {:8.3}",
            m.epoch, m.env_steps, m.eval_return, m.optimal_return
        );
    })?;
    write_output(&metrics_path, &metrics, &config, "train-ref")?;
    let manifest = checkpoint::save_reference(out.join("checkpoint"), &config, &run.trainer, run.metrics.len(), run.env_steps)?;
    println!(
        "reference policy: {} env steps{}, checkpoint {}",
        manifest.env_steps,
        if run.stopped_early { " (early stop)" } else { "" },
        out.join("checkpoint").display()
    );
    Ok(())
}

fn collect(common: &Common, checkpoint: Option<PathBuf>, n_traj: Option<usize>, horizon: Option<usize>) -> Result<()> {
    let ckpt_path = checkpoint_dir(&checkpoint.unwrap_or_else(|| out_root().join("ref")));
    let reference = checkpoint::load_reference(&ckpt_path)?;
    let mut config = layered(common, reference.config.clone())?;
    if let Some(n) = n_traj {
        config.n_traj = n;
    }
    if let Some(h) = horizon {
        config.horizon = h;
    }
    config.validate()?;
    let policy = &reference.trainer.policy;
    if (policy.state_dim(), policy.action_dim()) != (config.state_dim, config.action_dim) {
        return Err(Error::Config(format!(
            "checkpoint policy is |S|={}, |A|={}; config asks for |S|={}, |A|={}",
            policy.state_dim(),
            policy.action_dim(),
            config.state_dim,
            config.action_dim
        )));
    }
    let out = out_or(common, "dataset.bin");
    create_parent(&out)?;
    let mut env = EnvSource::new(&config, common.env_cmd.as_deref()).open(&config)?;
    let dataset = collect_labeled_states(
        &mut env,
        &reference.trainer.policy,
        config.n_traj,
        config.horizon,
        config.seed,
        config.standardize,
    )?;
    dataset.write_binary(&out)?;
    write_file_manifest(&out, &config, "collect")?;
    println!(
        "dataset: {} samples ({} expert) -> {}",
        dataset.len(),
        dataset.expert_count(),
        out.display()
    );
    Ok(())
}

fn fit_encoder(common: &Common, dataset: Option<PathBuf>, embedding_dim: Option<usize>) -> Result<()> {
    let mut config = layered(common, Config::default())?;
    if let Some(e) = embedding_dim {
        config.embedding_dim = e;
    }
    let dataset_path = dataset.unwrap_or_else(|| out_root().join("dataset.bin"));
    let mut data = LabeledStateDataset::read_binary(&dataset_path)?;
    if !config.standardize {
        data = data.without_standardization();
    }
    config.state_dim = data.state_dim();
    config.validate()?;
    let fit = pretrain_encoder(&data, config.embedding_dim, &config)?;
    let out = out_or(common, "projection.txt");
    create_parent(&out)?;
    export_projection(&fit.projection, &out)?;
    write_file_manifest(&out, &config, "fit-encoder")?;

    let log = out.with_file_name("encoder_accuracy.csv");
    let mut text = match fs::read_to_string(&log) {
        Ok(existing) if existing.starts_with(ACCURACY_HEADER) => existing,
        _ => format!("{ACCURACY_HEADER}\n"),
    };
    let _ = writeln!(
        text,
        "{},{},{},{:.3},{:.3}",
        config.seed,
        config.embedding_dim,
        fit.steps(),
        fit.train_accuracy,
        fit.held_out_accuracy
    );
    write_output(&log, &text, &config, "fit-encoder")?;
    println!("held-out accuracy: {:.3}", fit.held_out_accuracy);
    println!("train accuracy: {:.3} after {} steps", fit.train_accuracy, fit.steps());
    Ok(())
}

fn train_skills(
    common: &Common,
    projection: Option<PathBuf>,
    baseline: bool,
    skills: Option<usize>,
    steps: Option<usize>,
    resume: bool,
) -> Result<()> {
    let out = out_or(common, "skills");
    let ckpt = out.join("checkpoint");
    let metrics_path = out.join("metrics.csv");
    let returns_path = out.join("eval_returns.csv");

    let resumed = resume && ckpt.join(MANIFEST_FILE).is_file();
    let mut trainer = if resumed {
        let (manifest, mut trainer) = checkpoint::load_skills(&ckpt)?;
        if let Some(steps) = steps {
            trainer.config.epochs = trainer.config.epochs_for_steps(steps);
        }
        eprintln!("resuming at epoch {} ({} env steps)", manifest.epoch, manifest.env_steps);
        trainer
    } else {
        let mut config = layered(common, Config::default())?;
        if let Some(k) = skills {
            config.num_skills = k;
        }
        if let Some(steps) = steps {
            config.epochs = config.epochs_for_steps(steps);
        }
        let proj = if baseline {
            config.use_projection = false;
            config.standardize = false;
            LinearProjection::identity(config.state_dim)
        } else {
            let path = projection.unwrap_or_else(|| out_root().join("projection.txt"));
            let proj = import_projection(&path)?;
            if proj.state_dim() != config.state_dim {
                return Err(Error::Config(format!(
                    "projection {} maps |S|={}, but state_dim is {}",
                    path.display(),
                    proj.state_dim(),
                    config.state_dim
                )));
            }
            config.use_projection = true;
            config.embedding_dim = proj.embedding_dim();
            proj
        };
        config.validate()?;
        SkillTrainer::new(&config, proj)?
    };
    create_dir(&out)?;

    let keep_rows = |path: &Path, header: &str, keep: &dyn Fn(usize) -> bool| -> Result<String> {
        let mut text = format!("{header}\n");
        if resumed {
            if let Ok(existing) = fs::read_to_string(path) {
                for line in existing.lines().skip(1) {
                    let epoch = line.split(',').next().and_then(|f| f.parse::<usize>().ok());
                    if epoch.is_some_and(keep) {
                        text.push_str(line);
                        text.push('\n');
                    }
                }
            }
        }
        Ok(text)
    };
    let start = trainer.epoch;
    let mut metrics = keep_rows(&metrics_path, METRICS_HEADER, &|e| e < start)?;
    let mut returns = keep_rows(&returns_path, "epoch,skill,return", &|e| e < start)?;

    let config = trainer.config.clone();
    let source = EnvSource::new(&config, common.env_cmd.as_deref());
    let mut env = source.open(&config)?;
    let mut eval_env = source.open(&config)?;
    while trainer.epoch < config.epochs {
        let m = trainer.run_skill_epoch(&mut env)?;
        metrics.push_str(&m.csv_row());
        metrics.push('\n');
        if config.eval_every > 0 && (m.epoch + 1) % config.eval_every == 0 {
            let record = skill_returns(&trainer, &mut eval_env, m.epoch)?;
            returns.push_str(eval::csv::eval_returns(std::slice::from_ref(&record)).split_once('\n').unwrap().1);
        }
        eprintln!(
            "epoch {:3}  steps {:7}  disc acc {:.3}  reward {:.3}  q {:.3}",
            m.epoch, m.env_steps, m.disc_acc, m.mean_intrinsic_reward, m.q1_loss
        );
        checkpoint::save_skills(&ckpt, &trainer)?;
        write_output(&metrics_path, &metrics, &config, "train-skills")?;
        write_output(&returns_path, &returns, &config, "train-skills")?;
    }
    if trainer.epoch == start {
        checkpoint::save_skills(&ckpt, &trainer)?;
        write_output(&metrics_path, &metrics, &config, "train-skills")?;
        write_output(&returns_path, &returns, &config, "train-skills")?;
    }
    println!(
        "skills: {} epochs, {} env steps, checkpoint {}",
        trainer.epoch,
        trainer.env_steps,
        ckpt.display()
    );
    Ok(())
}

/// Extrinsic return of one deterministic episode per skill.
fn skill_returns(trainer: &SkillTrainer, env: &mut Box<dyn Environment>, epoch: usize) -> Result<EvalRecord> {
    let config = &trainer.config;
    env.seed(derive_indexed_seed(config.seed, "curve-env", epoch as u64))?;
    let mut rng = crate::seeding::indexed_rng(config.seed, "curve-act", epoch as u64);
    let returns = (0..config.num_skills)
        .map(|z| {
            eval::rollout(&trainer.sac.policy, env, z, config.horizon, ActionMode::Deterministic, &mut rng)
                .map(|t| t.extrinsic_return)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalRecord { epoch, returns })
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    common: &Common,
    checkpoint: Option<PathBuf>,
    mode: ActionMode,
    axis: usize,
    workers: usize,
    rollouts: Option<usize>,
    horizon: Option<usize>,
    dataset: Option<PathBuf>,
) -> Result<()> {
    let ckpt_path = checkpoint_dir(&checkpoint.unwrap_or_else(|| out_root().join("skills")));
    if !ckpt_path.exists() {
        return Err(Error::artifact(&ckpt_path, "checkpoint not found"));
    }
    let (_, trainer) = checkpoint::load_skills(&ckpt_path)?;
    let mut config = layered(common, trainer.config.clone())?;
    if let Some(r) = rollouts {
        config.eval_rollouts = r;
    }
    if let Some(h) = horizon {
        config.horizon = h;
    }
    if axis >= config.state_dim {
        return Err(Error::Config(format!("--axis {axis} outside |S|={}", config.state_dim)));
    }
    let out = out_or(common, "eval");
    create_dir(&out)?;
    let source = EnvSource::new(&config, common.env_cmd.as_deref());
    let results = eval::skill_rollouts(
        &trainer.sac.policy,
        || source.open(&config),
        config.eval_rollouts,
        config.horizon,
        mode,
        config.seed,
        workers,
    )?;

    let rows = results
        .iter()
        .map(|(job, traj)| eval::displacement(traj, axis).map(|d| (job.skill, config.seed, d)))
        .collect::<Result<Vec<_>>>()?;
    let displacements: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let stats = eval::displacement_stats(&displacements)?;
    let proj = &trainer.projection;

    let range = match dataset {
        Some(path) => {
            let data = LabeledStateDataset::read_binary(&path)?;
            projected_range(proj, data.samples.iter().filter(|s| s.expert).map(|s| s.state.as_slice()))?
        }
        None => projected_range(proj, results.iter().flat_map(|(_, t)| t.states.iter().map(Vec::as_slice)))?,
    };
    let sep = eval::skill_separation(&results, &trainer.discriminator, proj, range)?;
    let mut separation = String::from("held_out_accuracy,span_fraction,range_low,range_high\n");
    let _ = writeln!(separation, "{},{},{},{}", sep.held_out_accuracy, sep.span_fraction, range.0, range.1);
    separation.push_str("skill_means");
    for m in &sep.skill_means {
        let _ = write!(separation, ",{m}");
    }
    separation.push('\n');

    let name = config.name.clone();
    let files = [
        ("displacement.csv", eval::csv::displacements(&rows)),
        ("summary.csv", eval::csv::summary(&[(name, vec![stats])])?),
        ("visitation.csv", eval::csv::visitation(&results, proj)?),
        ("importance.csv", eval::csv::importance(&eval::feature_importance(proj))),
        ("separation.csv", separation),
    ];
    for (file, text) in &files {
        write_output(&out.join(file), text, &config, "eval")?;
    }
    println!(
        "displacement along s{axis}: min {:.4} 25% {:.4} median {:.4} 75% {:.4} max {:.4}",
        stats.min, stats.q25, stats.median, stats.q75, stats.max
    );
    println!(
        "skill held-out accuracy: {:.3}, span fraction: {:.3}",
        sep.held_out_accuracy, sep.span_fraction
    );
    Ok(())
}

fn projected_range<'a>(proj: &LinearProjection, states: impl Iterator<Item = &'a [f64]>) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in states {
        let e = proj.embed(s)?[0];
        lo = lo.min(e);
        hi = hi.max(e);
    }
    if lo > hi {
        return Err(Error::Validation("no states to span".into()));
    }
    Ok((lo, hi))
}

fn read_displacements(dir: &Path) -> Result<Vec<f64>> {
    let path = dir.join("displacement.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.rsplit(',')
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::artifact(&path, format!("bad row {l:?}")))
        })
        .collect()
}

fn summarize(variants: &[String], out: Option<PathBuf>) -> Result<()> {
    let mut table: Vec<(String, Vec<FiveNumber>)> = Vec::new();
    for spec in variants {
        let (name, dirs) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--variant expects NAME=DIR[,DIR...], got {spec:?}")))?;
        let stats = dirs
            .split(',')
            .map(|d| eval::displacement_stats(&read_displacements(Path::new(d))?))
            .collect::<Result<Vec<_>>>()?;
        table.push((name.to_string(), stats));
    }
    let text = eval::csv::summary(&table)?;
    let out = out.unwrap_or_else(|| out_root().join("summary.csv"));
    create_parent(&out)?;
    fs::write(&out, &text).map_err(|e| Error::io(&out, e))?;
    write_manifest(&out, &[("command", "summarize".into()), ("sources", variants.join(" "))])?;
    print!("{text}");
    Ok(())
}

fn curves(runs: &[PathBuf], out: Option<PathBuf>) -> Result<()> {
    let per_run = runs
        .iter()
        .map(|dir| {
            let path = dir.join("eval_returns.csv");
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            eval::return_curves(&eval::csv::parse_eval_returns(&text)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let text = eval::csv::aggregated_curves(&eval::aggregate_curves(&per_run)?);
    let out = out.unwrap_or_else(|| out_root().join("curves.csv"));
    create_parent(&out)?;
    fs::write(&out, &text).map_err(|e| Error::io(&out, e))?;
    let sources = runs.iter().map(|r| r.display().to_string()).collect::<Vec<_>>().join(" ");
    write_manifest(&out, &[("command", "curves".into()), ("sources", sources)])?;
    print!("{text}");
    Ok(())
}

/// Standard input and output as one stream.
struct Stdio;

impl Read for Stdio {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        std::io::stdin().read(buf)
    }
}

impl Write for Stdio {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        std::io::stdout().write(buf)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        std::io::stdout().flush()
    }
}
