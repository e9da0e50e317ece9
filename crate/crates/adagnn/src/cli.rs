//! `adagnn` subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use adagnn_core::graph::build_graph_without_angles;
use adagnn_core::{build_graph, featurize_graph, PropertyRecord};
use clap::{Args, Parser, Subcommand};

use crate::bench::{emit_report, run_sweep, BenchScenario};
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::dataset::parse_dataset_jsonl;
use crate::error::{Error, Result};
use crate::export::GraphDocument;
use crate::poscar::read_poscar;
use crate::report::{write_report_csv, write_report_json};
use crate::{write_atomic, WallClock};

pub const LOG_ENV: &str = "ADAGNN_LOG";

#[derive(Debug, Parser)]
#[command(name = "adagnn", version, about = "Crystal property prediction with dual-scale angle cutoffs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the crystal graph of a POSCAR file and write graph and features as JSON.
    Featurize {
        /// POSCAR file.
        #[arg(long)]
        input: PathBuf,
        /// JSON output file; without it only the statistics are printed.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Train on a JSON-lines dataset and write a checkpoint and report into --out.
    Train {
        /// Training set (JSON lines).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Validation set; without it a seeded holdout is split off the training set.
        #[arg(long)]
        valid: Option<PathBuf>,
        /// Test set, evaluated once with the best parameters.
        #[arg(long)]
        test: Option<PathBuf>,
        /// Output directory for model.ckpt, report.json, report.csv and config.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from this checkpoint up to the configured epoch total.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        optim: OptimArgs,
    },
    /// Print `<id>\t<prediction>` for each POSCAR input.
    Predict {
        /// Checkpoint file, or a training output directory containing model.ckpt.
        #[arg(long)]
        model: PathBuf,
        /// POSCAR files; predictions are printed in this order.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[command(flatten)]
        arch: ModelArgs,
    },
    /// Compare dual-scale and single-scale cutoffs; writes records.csv and summary.json.
    Bench {
        /// JSON scenario; the built-in default is used without it.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// JSON run configuration; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Edge cutoff in Å (default 8).
    #[arg(long)]
    pub edge_cutoff: Option<f64>,
    /// Angle cutoff in Å (default √edge_cutoff).
    #[arg(long)]
    pub angle_cutoff: Option<f64>,
    /// Require angle_cutoff² = edge_cutoff.
    #[arg(long)]
    pub paper_mode: bool,
    /// Drop angle information.
    #[arg(long)]
    pub no_angles: bool,
    /// Seed for initialization, shuffling and the validation split.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Width of every MLP (default 128).
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Number of interaction blocks (default 4).
    #[arg(long)]
    pub blocks: Option<usize>,
}

impl ModelArgs {
    fn is_empty(&self) -> bool {
        self.config.is_none()
            && self.edge_cutoff.is_none()
            && self.angle_cutoff.is_none()
            && !self.paper_mode
            && !self.no_angles
            && self.seed.is_none()
            && self.hidden_dim.is_none()
            && self.blocks.is_none()
    }

    fn apply(&self, base: RunConfig) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => base.merge_file(path)?,
            None => base,
        };
        if let Some(e) = self.edge_cutoff {
            c.edge_cutoff = e;
            if self.angle_cutoff.is_none() {
                c.angle_cutoff = None;
            }
        }
        if let Some(a) = self.angle_cutoff {
            c.angle_cutoff = Some(a);
        }
        c.paper_mode |= self.paper_mode;
        if self.no_angles {
            c.use_angles = false;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(h) = self.hidden_dim {
            c.hidden_dim = h;
        }
        if let Some(b) = self.blocks {
            c.num_blocks = b;
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct OptimArgs {
    /// Total number of epochs (a resumed run continues up to this count).
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Base learning rate; the one-cycle peak is 10× this.
    #[arg(long)]
    pub lr: Option<f64>,
}

impl OptimArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(e) = self.epochs {
            c.epochs = e;
        }
        if let Some(b) = self.batch_size {
            c.batch_size = b;
        }
        if let Some(lr) = self.lr {
            c.learning_rate = lr;
        }
    }
}

/// Parse arguments, run, and return the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Featurize { input, out: path, model } => featurize(&input, path.as_deref(), &model, out),
        Command::Train { data, valid, test, out: dir, resume, model, optim } => {
            train(TrainPaths { data, valid, test, out: dir, resume }, &model, &optim, out)
        }
        Command::Predict { model, input, arch } => predict(&model, &input, &arch, out),
        Command::Bench { scenario, out: dir } => bench(scenario.as_deref(), &dir, out),
    }
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn featurize(input: &Path, path: Option<&Path>, args: &ModelArgs, out: &mut dyn Write) -> Result<()> {
    let config = args.apply(RunConfig::default())?;
    let cutoffs = config.cutoffs()?;
    let basis = config.basis();
    basis.validate()?;
    let crystal = read_poscar(input)?;
    let graph = if config.use_angles {
        build_graph(&crystal, &cutoffs)?
    } else {
        build_graph_without_angles(&crystal, &cutoffs)?
    };
    let features = featurize_graph(&graph, &basis)?;
    let doc = GraphDocument::new(&graph, basis, features);
    if let Some(path) = path {
        write_atomic(path, serde_json::to_string(&doc)?.as_bytes())?;
    }
    let s = doc.stats;
    writeln!(
        out,
        "atoms={} edges={} angles={} m_avg={} k_avg={}",
        s.num_atoms, s.num_edges, s.num_angles, s.m_avg, s.k_avg
    )
    .map_err(stdout_err)
}

struct TrainPaths {
    data: Option<PathBuf>,
    valid: Option<PathBuf>,
    test: Option<PathBuf>,
    out: Option<PathBuf>,
    resume: Option<PathBuf>,
}

fn load_split(path: &Option<PathBuf>) -> Result<Option<Vec<PropertyRecord>>> {
    path.as_deref().map(parse_dataset_jsonl).transpose()
}

fn train(paths: TrainPaths, model_args: &ModelArgs, optim_args: &OptimArgs, out: &mut dyn Write) -> Result<()> {
    let resumed = paths.resume.as_deref().map(Checkpoint::load).transpose()?;
    let base = match &resumed {
        Some(ck) => RunConfig::from_parts(ck.state.config(), &ck.optim),
        None => RunConfig::default(),
    };
    let mut config = model_args.apply(base)?;
    optim_args.apply(&mut config);
    config.data = paths.data.or(config.data);
    config.valid = paths.valid.or(config.valid);
    config.test = paths.test.or(config.test);
    config.out = paths.out.or(config.out);
    let model = config.model()?;
    let optim = config.optim()?;
    let data_path = config.data.clone().ok_or_else(|| Error::Usage("train needs --data".into()))?;
    let out_dir = config.out.clone().ok_or_else(|| Error::Usage("train needs --out".into()))?;

    let mut trainer = match resumed {
        Some(ck) => {
            ck.ensure_compatible(&model)?;
            log::info!("resuming after epoch {} of {}", ck.epochs_completed, optim.epochs);
            ck.into_trainer(optim)?
        }
        None => adagnn_core::Trainer::new(model, optim)?,
    };

    let train_set = parse_dataset_jsonl(&data_path)?;
    let valid_set = load_split(&config.valid)?;
    let test_set = load_split(&config.test)?;
    let data =
        adagnn_core::train::TrainData { train: &train_set, valid: valid_set.as_deref(), test: test_set.as_deref() };
    let total = optim.epochs;
    let report = trainer.run(data, &mut WallClock::default(), &mut |m| {
        let valid = m.valid_mae.map(|v| format!(" valid_mae={v:.6}")).unwrap_or_default();
        log::info!(
            "epoch {}/{total} lr={:.3e} train_mse={:.6} train_mae={:.6}{valid} ({:.2}s)",
            m.epoch,
            m.learning_rate,
            m.train_mse,
            m.train_mae,
            m.seconds
        );
    })?;

    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    Checkpoint::from_trainer(&trainer, optim).save(&out_dir.join("model.ckpt"))?;
    write_report_json(&out_dir.join("report.json"), &report)?;
    write_report_csv(&out_dir.join("report.csv"), &report)?;
    write_atomic(&out_dir.join("config.json"), serde_json::to_string_pretty(&config)?.as_bytes())?;

    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
    writeln!(
        out,
        "epochs={} final_train_mae={} best_valid_mae={} test_mae={} parameters={}",
        trainer.epochs_completed(),
        fmt(report.final_train_mae()),
        fmt(report.best_valid_mae),
        fmt(report.test_mae),
        report.num_parameters
    )
    .map_err(stdout_err)
}

fn checkpoint_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("model.ckpt")
    } else {
        path.to_path_buf()
    }
}

fn predict(model: &Path, inputs: &[PathBuf], arch: &ModelArgs, out: &mut dyn Write) -> Result<()> {
    let ck = Checkpoint::load(&checkpoint_path(model))?;
    if !arch.is_empty() {
        let requested = arch.apply(RunConfig::from_parts(ck.state.config(), &ck.optim))?.model()?;
        ck.ensure_compatible(&requested)?;
    }
    let state = ck.predictor();
    let crystals = inputs.iter().map(|p| read_poscar(p)).collect::<Result<Vec<_>>>()?;
    let mut lines = Vec::with_capacity(crystals.len());
    for (path, crystal) in inputs.iter().zip(&crystals) {
        let id = match crystal.id() {
            Some(id) => id.to_string(),
            None => path.display().to_string(),
        };
        lines.push(format!("{id}\t{}", state.predict(crystal)?));
    }
    for line in lines {
        writeln!(out, "{line}").map_err(stdout_err)?;
    }
    Ok(())
}

fn bench(scenario: Option<&Path>, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let scenario = match scenario {
        Some(p) => BenchScenario::from_file(p)?,
        None => BenchScenario::default(),
    };
    scenario.validate()?;
    let records = run_sweep(&scenario)?;
    let summary = emit_report(&records, dir)?;
    write_atomic(&dir.join("scenario.json"), serde_json::to_string_pretty(&scenario)?.as_bytes())?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
    writeln!(
        out,
        "C_e={}: angles dual={} single={} ratio={}; inference ms dual={:.3} single={:.3}; \
         exponent dual={} single={} gap={}",
        summary.edge_cutoff,
        summary.dual.num_angles,
        summary.single.num_angles,
        fmt(summary.angle_ratio),
        summary.dual.inference_ms_median,
        summary.single.inference_ms_median,
        fmt(summary.dual_exponent.mean),
        fmt(summary.single_exponent.mean),
        fmt(summary.exponent_gap),
    )
    .map_err(stdout_err)
}
