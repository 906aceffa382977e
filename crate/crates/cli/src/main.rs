use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use touchauth::attacks::{AttackManifest, ScenarioKind};
use touchauth::classifiers::{Architecture, AuthModel, ClassifierKind};
use touchauth::data::{
    filter_short_swipes, load_gender_csv, parse_swipe_csv, save_swipe_csv, synth_generate_corpus, write_gender_csv,
    SynthParams,
};
use touchauth::evaluation::{write_heatmap_csv, HeatmapTables, ReportFile};
use touchauth::pipeline::{
    analyse, build_reports, run_attacks, run_experiment_on, train_all, ExperimentConfig, FailureRecord, ModelRecord,
    PreparedData,
};
use touchauth::Error;

#[derive(Parser)]
#[command(
    name = "touchauth",
    version,
    about = "Touch-stroke continuous authentication toolkit"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replaces the configured seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Restrict to these scenarios (repeatable).
    #[arg(long, global = true)]
    scenario: Vec<ScenarioKind>,
    /// Restrict to these architectures, V or G (repeatable).
    #[arg(long, global = true)]
    arch: Vec<Architecture>,
    /// Restrict to these classifiers, mlp or rf (repeatable).
    #[arg(long, global = true)]
    classifier: Vec<ClassifierKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a swipe CSV and store the filtered corpus.
    Ingest {
        input: PathBuf,
        /// user_id,gender CSV.
        #[arg(long)]
        genders: Option<PathBuf>,
    },
    /// Generate a synthetic swipe corpus.
    Synth {
        #[arg(long, default_value_t = 20)]
        users: usize,
        #[arg(long, default_value_t = 40)]
        swipes: usize,
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        #[arg(long, default_value = "synth")]
        dataset_id: String,
    },
    /// Train every configured model.
    Train,
    /// Run the configured scenarios against stored models.
    Attack,
    /// Turn stored attack results into reports, heatmaps and fairness tables.
    Evaluate,
    /// Train, attack and evaluate in one go.
    Run,
}

enum Failure {
    Config(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) => Failure::Config(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Data(e.to_string()))?;
    fs::write(path, text).map_err(|e| io_err(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn ensure_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn load_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_path(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => return Err(Failure::Config("--config is required for this command".into())),
    };
    if let Some(s) = common.seed {
        cfg.seeds = vec![s];
    }
    if !common.scenario.is_empty() {
        cfg.scenarios = common.scenario.clone();
    }
    if !common.arch.is_empty() {
        cfg.architectures = common.arch.clone();
    }
    if !common.classifier.is_empty() {
        cfg.classifiers = common.classifier.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn model_file(dir: &Path, model_id: &str) -> PathBuf {
    dir.join(format!("{}.json", model_id.replace([':', '/', '\\'], "_")))
}

fn save_models(out: &Path, models: &[AuthModel]) -> CliResult<()> {
    let dir = out.join("models");
    ensure_dir(&dir)?;
    for m in models {
        let path = model_file(&dir, &m.model_id);
        fs::write(&path, m.to_json_bytes()?).map_err(|e| io_err(&path, e))?;
    }
    log::info!("wrote {} models to {}", models.len(), dir.display());
    Ok(())
}

/// Stored models matching the config's classifier, architecture and seed
/// filters, in the order a full run would produce them.
fn load_models(out: &Path, cfg: &ExperimentConfig) -> CliResult<Vec<AuthModel>> {
    let dir = out.join("models");
    let entries = fs::read_dir(&dir).map_err(|e| io_err(&dir, e))?;
    let mut models = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_err(&dir, e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
            let m =
                AuthModel::from_json_bytes(&bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            let kind = touchauth::pipeline::model_kind(&m);
            if cfg.classifiers.contains(&kind)
                && cfg.architectures.contains(&m.architecture)
                && cfg.seeds.contains(&m.seed)
            {
                models.push(m);
            }
        }
    }
    if models.is_empty() {
        return Err(Failure::Data(format!("no matching models in {}", dir.display())));
    }
    models.sort_by_key(|m| {
        (
            cfg.seeds.iter().position(|&s| s == m.seed),
            m.user_id.clone(),
            cfg.classifiers
                .iter()
                .position(|&k| k == touchauth::pipeline::model_kind(m)),
            cfg.architectures.iter().position(|&a| a == m.architecture),
        )
    });
    Ok(models)
}

fn write_tables(
    out: &Path,
    reports: &ReportFile,
    heatmaps: &Option<HeatmapTables>,
    fairness: &impl Serialize,
) -> CliResult<()> {
    let path = out.join("reports.json");
    fs::write(&path, reports.to_json()?).map_err(|e| io_err(&path, e))?;
    if let Some(h) = heatmaps {
        for (name, cells) in [("far", &h.far), ("frr", &h.frr), ("hter", &h.hter)] {
            let path = out.join(format!("heatmap_{name}.csv"));
            let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
            write_heatmap_csv(cells, file)?;
        }
    }
    write_json(&out.join("fairness.json"), fairness)
}

#[derive(Serialize)]
struct IngestSummary {
    dataset_id: String,
    users: usize,
    swipes_read: usize,
    swipes_kept: usize,
    rows: u64,
    non_monotone_dropped: usize,
    missing_axes: bool,
}

fn ingest(common: &Common, input: &Path, genders: Option<&Path>) -> CliResult<u8> {
    let (mut corpus, report) = parse_swipe_csv(input)?;
    if let Some(g) = genders {
        corpus.user_metadata = load_gender_csv(g)?;
    }
    let read = corpus.swipes.len();
    let corpus = filter_short_swipes(corpus);
    ensure_dir(&common.out_dir)?;
    save_swipe_csv(&corpus, common.out_dir.join(format!("{}.csv", corpus.dataset_id)))?;
    if !corpus.user_metadata.is_empty() {
        let path = common.out_dir.join(format!("{}_genders.csv", corpus.dataset_id));
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        write_gender_csv(&corpus.user_metadata, file)?;
    }
    write_json(
        &common.out_dir.join("ingest.json"),
        &IngestSummary {
            dataset_id: corpus.dataset_id.clone(),
            users: corpus.user_ids().len(),
            swipes_read: read,
            swipes_kept: corpus.swipes.len(),
            rows: report.rows,
            non_monotone_dropped: report.non_monotone_dropped,
            missing_axes: report.missing_axes,
        },
    )?;
    Ok(0)
}

fn synth(common: &Common, users: usize, swipes: usize, spread: f64, dataset_id: &str) -> CliResult<u8> {
    let params = SynthParams::new(users, swipes, spread, common.seed.unwrap_or(0)).with_dataset_id(dataset_id);
    let corpus = synth_generate_corpus(&params)?;
    ensure_dir(&common.out_dir)?;
    save_swipe_csv(&corpus, common.out_dir.join(format!("{dataset_id}.csv")))?;
    let path = common.out_dir.join(format!("{dataset_id}_genders.csv"));
    let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    write_gender_csv(&corpus.user_metadata, file)?;
    Ok(0)
}

#[derive(Serialize)]
struct TrainingSummary<'a> {
    config: &'a ExperimentConfig,
    models: &'a [ModelRecord],
    failures: &'a [FailureRecord],
}

fn status(failures: &[FailureRecord]) -> u8 {
    if failures.is_empty() {
        0
    } else {
        log::warn!("{} recorded failures", failures.len());
        3
    }
}

fn train(common: &Common) -> CliResult<u8> {
    let cfg = load_config(common)?;
    let data = PreparedData::load(&cfg)?;
    let run = train_all(&data, &cfg)?;
    ensure_dir(&common.out_dir)?;
    save_models(&common.out_dir, &run.models)?;
    write_json(
        &common.out_dir.join("training.json"),
        &TrainingSummary {
            config: &cfg,
            models: &run.records,
            failures: &run.failures,
        },
    )?;
    if run.models.is_empty() {
        return Err(Failure::Data("no model could be trained".into()));
    }
    Ok(status(&run.failures))
}

#[derive(Serialize)]
struct AttackFile<'a> {
    #[serde(flatten)]
    attacks: &'a AttackManifest,
    failures: &'a [FailureRecord],
}

fn attack(common: &Common) -> CliResult<u8> {
    let cfg = load_config(common)?;
    let data = PreparedData::load(&cfg)?;
    let models = load_models(&common.out_dir, &cfg)?;
    let (attacks, failures) = run_attacks(&models, &data, &cfg);
    write_json(
        &common.out_dir.join("attacks.json"),
        &AttackFile {
            attacks: &attacks,
            failures: &failures,
        },
    )?;
    Ok(status(&failures))
}

fn evaluate(common: &Common) -> CliResult<u8> {
    let cfg = load_config(common)?;
    let data = PreparedData::load(&cfg)?;
    let models = load_models(&common.out_dir, &cfg)?;
    let attacks = AttackManifest::from_json(&read_to_string(&common.out_dir.join("attacks.json"))?)?;
    let reports = build_reports(&models, &attacks, &data.genders());
    let (heatmaps, fairness, notes) = analyse(&reports);
    for n in &notes {
        log::warn!("{n}");
    }
    write_tables(&common.out_dir, &ReportFile::new(reports), &heatmaps, &fairness)?;
    Ok(0)
}

fn run(common: &Common) -> CliResult<u8> {
    let cfg = load_config(common)?;
    let data = PreparedData::load(&cfg)?;
    let out = run_experiment_on(&data, &cfg)?;
    ensure_dir(&common.out_dir)?;
    save_models(&common.out_dir, &out.models)?;
    write_json(&common.out_dir.join("attacks.json"), &out.attacks)?;
    let m = &out.manifest;
    write_tables(&common.out_dir, &m.report_file(), &m.heatmaps, &m.fairness)?;
    write_json(&common.out_dir.join("manifest.json"), m)?;
    Ok(status(&m.failures))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let c = &cli.common;
    let result = match &cli.command {
        Command::Ingest { input, genders } => ingest(c, input, genders.as_deref()),
        Command::Synth {
            users,
            swipes,
            spread,
            dataset_id,
        } => synth(c, *users, *swipes, *spread, dataset_id),
        Command::Train => train(c),
        Command::Attack => attack(c),
        Command::Evaluate => evaluate(c),
        Command::Run => run(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("data error: {msg}");
            ExitCode::from(2)
        }
    }
}
