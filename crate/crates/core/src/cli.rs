//! The `regulargpt` command line: train, eval, analyze and lemma
//! subcommands. Every command writes a run manifest listing its outputs
//! with checksums.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    attention_cost, cluster_purity, collect_outputs, receptive_field, routing_coverage, svg, vanilla_cost,
    Representation,
};
use crate::automata::{make_task, sample, TaskSpec};
use crate::error::{Error, Result};
use crate::lemma::{print_weights, verify_lemma, VerifyMode, MAX_EXHAUSTIVE_N};
use crate::model::{adaptive_depth, load_checkpoint, save_checkpoint, Arch, Checkpoint, CheckpointMeta};
use crate::training::{evaluate, train_with, EvalConfig, LengthRange, StopReason, TrainConfig};

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "REGULARGPT_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "regulargpt", version, about = "RegularGPT on regular-language tasks")]
pub struct Cli {
    /// Output directory (defaults to $REGULARGPT_OUT, then ./runs).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Accepted for compatibility; every command already runs on one thread.
    #[arg(long, global = true)]
    pub single_thread: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write a checkpoint plus the loss curve.
    Train(TrainArgs),
    /// Measure length extrapolation of a checkpoint.
    Eval(EvalArgs),
    /// Inspect trained models and the attention pattern.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Verify or print the binary matrix-product construction.
    #[command(subcommand)]
    Lemma(LemmaCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Regular,
    Vanilla,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON file with `TrainConfig` fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long = "C")]
    pub chunk_size: Option<usize>,
    #[arg(long = "K")]
    pub thickness: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Global gradient-norm clip (0 disables).
    #[arg(long)]
    pub grad_clip: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Longest training string (T_tr).
    #[arg(long)]
    pub train_max_len: Option<usize>,
    #[arg(long)]
    pub p1: Option<f64>,
    #[arg(long)]
    pub early_stop: Option<f64>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub d_ffn: Option<usize>,
    #[arg(long)]
    pub max_groups: Option<usize>,
    #[arg(long, value_enum)]
    pub arch: Option<ArchArg>,
    /// Prepend a start token to every input.
    #[arg(long)]
    pub bos: bool,
    /// Depth of the vanilla baseline.
    #[arg(long)]
    pub layers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Defaults to the task recorded in the checkpoint.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, default_value = "41:500:9")]
    pub lengths: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub p1: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Cluster per-group hidden vectors and score purity against span labels.
    Cluster(ClusterArgs),
    /// Gradient-norm receptive field of the readout.
    Receptive(ReceptiveArgs),
    /// Positions reachable from the last one through the dilated pattern.
    Routing {
        #[arg(long = "C")]
        chunk_size: usize,
        #[arg(long = "T")]
        len: usize,
    },
    /// Finite attention entries of the dilated model and a vanilla stack.
    Cost {
        #[arg(long = "C")]
        chunk_size: usize,
        #[arg(long = "T")]
        len: usize,
        #[arg(long = "K", default_value_t = 1)]
        thickness: usize,
        #[arg(long = "vanilla-L", default_value_t = 1)]
        vanilla_layers: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReprArg {
    Ffn,
    Residual,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long = "T", default_value_t = 500)]
    pub len: usize,
    /// Number of clusters; defaults to the number of distinct span labels.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ReprArg::Ffn)]
    pub repr: ReprArg,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct ReceptiveArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long = "T", default_value_t = 500)]
    pub len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exhaustive,
    Random,
}

#[derive(Debug, Subcommand)]
pub enum LemmaCommand {
    /// Check the network against the direct product.
    Verify {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Exhaustive)]
        mode: ModeArg,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Allow exhaustive checks above n = 3.
        #[arg(long)]
        force: bool,
    },
    /// Print W1(n) and W2(n).
    Print {
        #[arg(long)]
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub artifacts: Vec<Artifact>,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
}

impl RunManifest {
    /// Every listed artifact exists and matches its checksum.
    pub fn verify(&self) -> Result<()> {
        for a in &self.artifacts {
            let digest = sha256_file(&a.path)?;
            if digest != a.sha256 {
                return Err(Error::invalid("manifest", format!("{} changed since the run", a.path.display())));
            }
        }
        Ok(())
    }
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Collects outputs of one command and writes its manifest.
struct Run {
    dir: PathBuf,
    command: String,
    started: f64,
    artifacts: Vec<PathBuf>,
}

impl Run {
    fn new(dir: PathBuf, command: &str) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Run {
            dir,
            command: command.to_string(),
            started: now(),
            artifacts: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, contents)?;
        self.artifacts.push(p.clone());
        Ok(p)
    }

    fn record(&mut self, path: PathBuf) {
        self.artifacts.push(path);
    }

    fn finish(self, config: serde_json::Value, seed: Option<u64>) -> Result<PathBuf> {
        let artifacts = self
            .artifacts
            .iter()
            .map(|p| {
                Ok(Artifact {
                    path: p.clone(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            command: self.command.clone(),
            config,
            seed,
            artifacts,
            started: self.started,
            finished: now(),
        };
        let path = self.dir.join(format!("{}.manifest.json", self.command.replace(' ', "_")));
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(&manifest)? + "\n")?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

fn out_dir(cli_out: &Option<PathBuf>) -> PathBuf {
    cli_out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Parses `args` (including the program name) and runs the command,
/// writing human-readable output to `out`. Returns the process exit code.
pub fn run_from<I, T>(args: I, out: &mut impl std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Diverged { .. } => EXIT_DIVERGED,
                _ => EXIT_ERROR,
            }
        }
    }
}

pub fn execute(cli: &Cli, out: &mut impl std::io::Write) -> Result<i32> {
    let dir = out_dir(&cli.out);
    match &cli.command {
        Command::Train(args) => cmd_train(args, dir, out),
        Command::Eval(args) => cmd_eval(args, dir, out),
        Command::Analyze(cmd) => cmd_analyze(cmd, dir, out),
        Command::Lemma(cmd) => cmd_lemma(cmd, dir, out),
    }
}

/// Loads `--config` (if any) and applies flag overrides.
pub fn resolve_train_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::config("config", format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)?
        }
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($flag:expr => $($field:tt)+) => {
            if let Some(v) = $flag.clone() {
                cfg.$($field)+ = v;
            }
        };
    }
    set!(args.task => task);
    set!(args.chunk_size => model.chunk_size);
    set!(args.thickness => model.thickness);
    set!(args.seed => seed);
    set!(args.lr => lr);
    set!(args.grad_clip => grad_clip);
    set!(args.batch_size => batch_size);
    set!(args.max_steps => max_steps);
    set!(args.train_max_len => train_max_len);
    set!(args.p1 => p1);
    set!(args.early_stop => early_stop);
    set!(args.d_model => model.d_model);
    set!(args.heads => model.n_heads);
    set!(args.d_ffn => model.d_ffn);
    set!(args.max_groups => model.max_groups);
    if args.bos {
        cfg.model.bos = true;
    }
    match (args.arch, args.layers) {
        (Some(ArchArg::Regular), _) => cfg.model.arch = Arch::Regular,
        (Some(ArchArg::Vanilla), layers) => {
            cfg.model.arch = Arch::Vanilla {
                layers: layers.unwrap_or(4),
                distance_buckets: 13,
            }
        }
        (None, Some(l)) => {
            if let Arch::Vanilla { layers, .. } = &mut cfg.model.arch {
                *layers = l;
            } else {
                return Err(Error::config("layers", "only applies with --arch vanilla"));
            }
        }
        (None, None) => {}
    }
    cfg.resolve()?;
    Ok(cfg)
}

fn cmd_train(args: &TrainArgs, dir: PathBuf, out: &mut impl std::io::Write) -> Result<i32> {
    let cfg = resolve_train_config(args)?;
    let mut run = Run::new(dir, "train")?;
    let outcome = train_with(&cfg, |log| {
        let _ = writeln!(out, "step {} loss {:.5} train_acc {:.4}", log.step, log.loss, log.train_acc);
    })?;
    let ck = run.path("checkpoint.json");
    let meta = CheckpointMeta {
        task: cfg.task.clone(),
        seed: cfg.seed,
        step: outcome.steps as u64,
    };
    save_checkpoint(&outcome.model, &meta, &ck)?;
    run.record(ck.clone());
    run.record(crate::model::checkpoint::payload_path(&ck));
    let mut csv = Vec::new();
    outcome.write_curve_csv(&mut csv)?;
    run.write("curve.csv", &csv)?;
    run.finish(serde_json::to_value(&cfg)?, Some(cfg.seed))?;
    writeln!(
        out,
        "steps={} stop={:?} final_train_acc={:.4} checkpoint={}",
        outcome.steps,
        outcome.stop,
        outcome.final_train_acc(),
        ck.display()
    )?;
    Ok(match outcome.stop {
        StopReason::Diverged { step } => {
            eprintln!("error: training diverged at step {step}; last finite checkpoint kept");
            EXIT_DIVERGED
        }
        _ => EXIT_OK,
    })
}

fn load_with_task(checkpoint: &Path, task: &Option<String>) -> Result<(Checkpoint, TaskSpec)> {
    let ck = load_checkpoint(checkpoint)?;
    let name = task.clone().unwrap_or_else(|| ck.meta.task.clone());
    let spec = make_task(&name)?;
    if !ck.meta.task.is_empty() && make_task(&ck.meta.task)?.kind != spec.kind {
        return Err(Error::config(
            "task",
            format!("checkpoint was trained on {}, not {}", ck.meta.task, spec.name()),
        ));
    }
    if !ck.model.config().fits(&spec) {
        return Err(Error::config("task", format!("checkpoint vocabulary does not fit {}", spec.name())));
    }
    Ok((ck, spec))
}

fn cmd_eval(args: &EvalArgs, dir: PathBuf, out: &mut impl std::io::Write) -> Result<i32> {
    let lengths: LengthRange = args.lengths.parse()?;
    let (ck, task) = load_with_task(&args.checkpoint, &args.task)?;
    let cfg = EvalConfig {
        lengths,
        samples: args.n,
        p1: args.p1,
        seed: args.seed,
    };
    let mut run = Run::new(dir, "eval")?;
    let report = evaluate(&ck.model, &task, &cfg)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let name = format!("eval_{}_p{}.csv", task.name(), args.p1);
    run.write(&name, &csv)?;
    run.finish(
        serde_json::json!({ "checkpoint": args.checkpoint, "task": task.name(), "eval": cfg }),
        Some(args.seed),
    )?;
    for (len, acc) in &report.per_length {
        writeln!(out, "length={len} accuracy={acc:.4}")?;
    }
    writeln!(out, "task={} p1={} lengths={}", task.name(), args.p1, lengths)?;
    writeln!(out, "avg_accuracy={:.6}", report.average)?;
    Ok(EXIT_OK)
}

/// A string of length `len` from the task sampler, seeded.
fn probe_string(task: &TaskSpec, len: usize, seed: u64) -> Result<Vec<usize>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    Ok(sample(task, len, &mut rng, 0.5)?.tokens)
}

fn require_checkpoint(p: &Option<PathBuf>) -> Result<&PathBuf> {
    p.as_ref()
        .ok_or_else(|| Error::config("checkpoint", "this analysis needs --checkpoint"))
}

fn cmd_analyze(cmd: &AnalyzeCommand, dir: PathBuf, out: &mut impl std::io::Write) -> Result<i32> {
    match cmd {
        AnalyzeCommand::Routing { chunk_size, len } => {
            if *chunk_size < 2 || *len == 0 {
                return Err(Error::config("C", "need C >= 2 and T >= 1"));
            }
            writeln!(out, "reachable={}", routing_coverage(*chunk_size, *len))?;
        }
        AnalyzeCommand::Cost {
            chunk_size,
            len,
            thickness,
            vanilla_layers,
        } => {
            if *chunk_size < 2 || *len == 0 {
                return Err(Error::config("C", "need C >= 2 and T >= 1"));
            }
            let depth = adaptive_depth(*len, *chunk_size);
            let model = attention_cost(*chunk_size, *thickness, *len, depth);
            let vanilla = vanilla_cost(*len, *vanilla_layers);
            writeln!(out, "depth={depth}")?;
            writeln!(out, "regular_cost={model}")?;
            writeln!(out, "vanilla_cost={vanilla}")?;
            writeln!(out, "ratio={:.6}", model as f64 / vanilla as f64)?;
        }
        AnalyzeCommand::Cluster(a) => {
            let (ck, task) = load_with_task(require_checkpoint(&a.checkpoint)?, &a.task)?;
            let tokens = probe_string(&task, a.len, a.seed)?;
            let repr = match a.repr {
                ReprArg::Ffn => Representation::FfnOutput,
                ReprArg::Residual => Representation::Residual,
            };
            let dump = collect_outputs(&ck.model, &task, &tokens, repr)?;
            let k = a.k.unwrap_or(dump.num_labels());
            let report = cluster_purity(&dump, k, a.seed)?;
            let mut run = Run::new(dir, "analyze cluster")?;
            let mut csv = Vec::new();
            report.write_csv(&dump, &mut csv)?;
            run.write("cluster.csv", &csv)?;
            if a.svg {
                let labels: Vec<usize> = dump.records.iter().map(|r| r.label).collect();
                let title = format!("{} hidden vectors, T = {}", task.name(), a.len);
                run.write("cluster.svg", svg::scatter(&report.pca.projections, &labels, &title).as_bytes())?;
            }
            run.finish(
                serde_json::json!({ "checkpoint": a.checkpoint, "task": task.name(), "T": a.len, "k": k }),
                Some(a.seed),
            )?;
            if dump.chunk != 2 {
                writeln!(out, "note: span labels use width C^(l+1), derived for C = 2")?;
            }
            writeln!(out, "labels={} records={}", dump.num_labels(), dump.records.len())?;
            writeln!(out, "purity={:.6}", report.purity)?;
        }
        AnalyzeCommand::Receptive(a) => {
            let (ck, task) = load_with_task(require_checkpoint(&a.checkpoint)?, &a.task)?;
            let tokens = probe_string(&task, a.len, a.seed)?;
            let target = task.answer_token(task.oracle(&tokens)?);
            let profile = receptive_field(&ck.model, &tokens, target)?;
            let mut run = Run::new(dir, "analyze receptive")?;
            let mut csv = Vec::new();
            profile.write_csv(&mut csv)?;
            run.write("receptive.csv", &csv)?;
            if a.svg {
                let title = format!("{} cumulative gradient norm, T = {}", task.name(), tokens.len());
                run.write("receptive.svg", svg::line(&profile.cumulative, &title).as_bytes())?;
            }
            run.finish(
                serde_json::json!({ "checkpoint": a.checkpoint, "task": task.name(), "T": a.len }),
                Some(a.seed),
            )?;
            writeln!(out, "earliest_share={:.6}", profile.earliest_share())?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_lemma(cmd: &LemmaCommand, _dir: PathBuf, out: &mut impl std::io::Write) -> Result<i32> {
    match cmd {
        LemmaCommand::Verify {
            n,
            mode,
            trials,
            seed,
            force,
        } => {
            let mode = match mode {
                ModeArg::Exhaustive => {
                    if *n > MAX_EXHAUSTIVE_N && !force {
                        return Err(Error::config(
                            "n",
                            format!("exhaustive check at n = {n} is too large; pass --force to run it"),
                        ));
                    }
                    VerifyMode::Exhaustive
                }
                ModeArg::Random => VerifyMode::Random {
                    trials: *trials,
                    seed: *seed,
                },
            };
            let report = if *force && *n > MAX_EXHAUSTIVE_N {
                crate::lemma::verify_lemma_unbounded(*n, mode)?
            } else {
                verify_lemma(*n, mode)?
            };
            writeln!(out, "{report}")?;
            if let Some((a, b)) = &report.counterexample {
                writeln!(out, "counterexample: A = {:?}, B = {:?}", a.flat(), b.flat())?;
                return Ok(EXIT_ERROR);
            }
        }
        LemmaCommand::Print { n } => {
            write!(out, "{}", print_weights(*n)?)?;
        }
    }
    Ok(EXIT_OK)
}
