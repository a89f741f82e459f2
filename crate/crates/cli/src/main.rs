//! `fedfps`: generate, preprocess, train, evaluate and analyse.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fedfps::checkpoint;
use fedfps::dataset::read_pairs;
use fedfps::insights::{build_report, floors_from_pairs, InsightsConfig};
use fedfps::lkk::{check_lkk_gradients, Path as KernelPath};
use fedfps::pipeline::{prep, read_schema, write_prepared, SCHEMA_FILE};
use fedfps::run::{
    ablation, ablation_csv, evaluate_checkpoint, predict_one, run_training, select_samples, RunConfig, SplitSelect,
    TrainMode,
};
use fedfps::synthgen::{generate, write_dataset};
use fedfps::telemetry::io::{read_countries, read_games, read_players, read_sessions, write_csv};

#[derive(Parser)]
#[command(name = "fedfps", version, about = "FPS-distribution prediction with knowledge kernels and simulated federated training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Centralized,
    Federated,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Wo,
    Wp,
    Wg,
    Wb,
}

impl From<PathArg> for KernelPath {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Wo => KernelPath::Wo,
            PathArg::Wp => KernelPath::Wp,
            PathArg::Wg => KernelPath::Wg,
            PathArg::Wb => KernelPath::Wb,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    All,
}

impl From<SplitArg> for SplitSelect {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => SplitSelect::Train,
            SplitArg::Val => SplitSelect::Val,
            SplitArg::All => SplitSelect::All,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic dataset with planted truth.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter, merge, split and encode raw telemetry.
    Prep {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        players: PathBuf,
        #[arg(long)]
        games: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run config supplying the seed and `prep.train_ratio`.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a model and write a checkpoint and log.
    Train {
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        config: PathBuf,
        /// Overrides `pairs` in the config.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Overrides `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metrics report of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_enum)]
        force_path: Option<PathArg>,
        #[arg(long, value_enum, default_value = "val")]
        split: SplitArg,
        /// Report file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Confusion matrix CSV.
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Metrics with each kernel path forced.
    Ablate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_enum, default_value = "val")]
        split: SplitArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// ANOVA, Tukey, hardware OLS and country-level fit tables.
    Insights {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        players: PathBuf,
        #[arg(long)]
        countries: PathBuf,
        #[arg(long)]
        games: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Class distribution for one player and game.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        player: String,
        #[arg(long)]
        game: String,
        #[arg(long)]
        players: Option<PathBuf>,
        #[arg(long)]
        games: Option<PathBuf>,
    },
    /// Finite-difference check of the model gradients.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Output directory that is removed again unless the command succeeds.
struct OutDir {
    path: PathBuf,
    created: bool,
    keep: bool,
}

impl OutDir {
    fn create(path: &Path) -> Result<Self> {
        let created = !path.exists();
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self { path: path.to_path_buf(), created, keep: false })
    }

    fn commit(mut self) {
        self.keep = true;
    }
}

impl Drop for OutDir {
    fn drop(&mut self) {
        if self.created && !self.keep {
            let _ = fs::remove_dir_all(&self.path);
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn json_line<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn schema_beside(pairs: &Path) -> Result<Option<fedfps::features::EncodingSchema>> {
    let p = pairs.with_file_name(SCHEMA_FILE);
    if p.exists() {
        Ok(Some(read_schema(&p)?))
    } else {
        Ok(None)
    }
}

fn load_checkpoint(dir: &Path, pairs: &Path) -> Result<checkpoint::Loaded<f64>> {
    let loaded = checkpoint::load::<f64>(dir)?;
    if let (Some(h), Some(s)) = (&loaded.manifest.schema_hash, schema_beside(pairs)?) {
        if &s.hash() != h {
            bail!(fedfps::Error::InvalidInput(format!(
                "{} was encoded with a different schema than the checkpoint",
                pairs.display()
            )));
        }
    }
    Ok(loaded)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let dir = OutDir::create(&out)?;
            let data = generate(&cfg.generator)?;
            write_dataset(&out, &data)?;
            dir.commit();
        }
        Command::Prep { sessions, players, games, out, config } => {
            let cfg = load_config(config.as_deref())?;
            let sessions = read_sessions(&sessions)?;
            let players = read_players(&players)?;
            let games = read_games(&games)?;
            let prepared = prep(sessions, &players, &games, &cfg.prep)?;
            let dir = OutDir::create(&out)?;
            write_prepared(&out, &prepared)?;
            dir.commit();
        }
        Command::Train { mode, config, pairs, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(m) = mode {
                cfg.mode = match m {
                    ModeArg::Centralized => TrainMode::Centralized,
                    ModeArg::Federated => TrainMode::Federated,
                };
            }
            let pairs_path = pairs.or(cfg.pairs.clone()).ok_or_else(|| anyhow!(fedfps::Error::Config("no pairs file: set `pairs` or pass --pairs".into())))?;
            let out = out.or(cfg.out.clone()).ok_or_else(|| anyhow!(fedfps::Error::Config("no output directory: set `out` or pass --out".into())))?;
            let records = read_pairs(&pairs_path)?;
            let schema = schema_beside(&pairs_path)?;
            let dir = OutDir::create(&out)?;
            let report = run_training(&cfg, &records, schema.as_ref(), &out)?;
            log::info!("validation WD {:.5}, CE {:.5}", report.wd, report.ce);
            dir.commit();
        }
        Command::Eval { checkpoint, pairs, force_path, split, out, confusion } => {
            let loaded = load_checkpoint(&checkpoint, &pairs)?;
            let samples = select_samples(&loaded, &read_pairs(&pairs)?, split.into())?;
            let report = evaluate_checkpoint(&loaded, &samples, force_path.map(Into::into))?;
            if let Some(c) = confusion {
                fs::write(&c, report.confusion_csv()).with_context(|| format!("writing {}", c.display()))?;
            }
            emit(out.as_deref(), &json_line(&report)?)?;
        }
        Command::Ablate { checkpoint, pairs, split, out } => {
            let loaded = load_checkpoint(&checkpoint, &pairs)?;
            let samples = select_samples(&loaded, &read_pairs(&pairs)?, split.into())?;
            emit(out.as_deref(), &ablation_csv(&ablation(&loaded, &samples)?))?;
        }
        Command::Insights { pairs, players, countries, games, out, alpha } => {
            let obs = floors_from_pairs(&read_pairs(&pairs)?)?;
            let players = read_players(&players)?;
            let countries = read_countries(&countries)?;
            let games = match games {
                Some(g) => read_games(&g)?,
                None => Vec::new(),
            };
            let cfg = InsightsConfig { alpha, ..InsightsConfig::default() };
            let report = build_report(&obs, &players, &games, &countries, &cfg)?;
            let dir = OutDir::create(&out)?;
            write_csv(&out.join("anova.csv"), &report.anova)?;
            write_csv(&out.join("tukey.csv"), &report.tukey)?;
            write_csv(&out.join("ols_hardware.csv"), &report.hardware_ols)?;
            write_csv(&out.join("macro_fit.csv"), &report.macro_ols)?;
            dir.commit();
        }
        Command::Predict { checkpoint, player, game, players, games } => {
            let loaded = checkpoint::load::<f64>(&checkpoint)?;
            let players = players.map(|p| read_players(&p)).transpose()?.unwrap_or_default();
            let games = games.map(|g| read_games(&g)).transpose()?.unwrap_or_default();
            let pr = players.iter().find(|p| p.guid == player);
            let gr = games.iter().find(|g| g.id == game);
            let pred = predict_one(&loaded, &player, &game, pr, gr)?;
            println!("{}", serde_json::to_string(&pred)?);
        }
        Command::Gradcheck { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let report = check_lkk_gradients(&cfg.gradcheck)?;
            emit(out.as_deref(), &json_line(&report)?)?;
            if !report.passed {
                bail!(fedfps::Error::Degenerate(format!(
                    "gradient check failed: max relative error {:e} exceeds {:e}",
                    report.max_rel_error, report.tolerance
                )));
            }
        }
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("FEDFPS_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow!(fedfps::Error::Config(format!("FEDFPS_THREADS must be a positive integer, got {v:?}"))))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn error_json(err: &anyhow::Error) -> String {
    let kind = err.chain().find_map(|e| e.downcast_ref::<fedfps::Error>()).map_or("error", |e| e.kind());
    let mut parts: Vec<String> = Vec::new();
    for e in err.chain() {
        let s = e.to_string();
        if !parts.last().is_some_and(|p| p.contains(&s)) {
            parts.push(s);
        }
    }
    let message = parts.join(": ");
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
