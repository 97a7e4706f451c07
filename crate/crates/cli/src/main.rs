//! `semg`: synth → extract → augment → train → eval.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use semg_core::dataset::{load_dataset_dir, save_dataset};
use semg_core::dnn::TrainConfig;
use semg_core::experiment::{
    augment, evaluate_cells, stratified_split, train_cells, AugmentConfig, Split,
    SplitConfig, TrainedCell,
};
use semg_core::features::{extract_all, FeatureConfig};
use semg_core::hierarchy::Architecture;
use semg_core::lstm::{LstmConfig, Sampling};
use semg_core::report::{render_summary, write_evaluation_table, write_training_report, RunManifest};
use semg_core::signal::DEFAULT_SAMPLE_RATE_HZ;
use semg_core::table::{read_feature_table, read_json, write_feature_table, write_json, write_quantizer};
use semg_core::{generate_synthetic_recordings, Error, Result};

#[derive(Parser)]
#[command(name = "semg", version, about = "sEMG hand-gesture classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic recordings directory.
    Synth(SynthArgs),
    /// Compute the feature table from a recordings directory.
    Extract(ExtractArgs),
    /// Append LSTM-generated synthetic subjects to a feature table.
    Augment(AugmentArgs),
    /// Train per-subject classifiers and write learning curves.
    Train(TrainArgs),
    /// Evaluate trained models on the held-out split.
    Eval(EvalArgs),
}

#[derive(Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 4, value_parser = positive)]
    subjects: usize,
    #[arg(long, default_value_t = 20, value_parser = positive)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ExtractArgs {
    #[arg(long, default_value = "data")]
    data: PathBuf,
    #[arg(long, default_value = "features.csv")]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    ar_order: usize,
}

#[derive(Args, Serialize, Clone, Copy)]
struct SplitArgs {
    /// Share of each (subject, gesture) group's repetitions used for training.
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

impl SplitArgs {
    fn config(self) -> SplitConfig {
        SplitConfig {
            train_fraction: self.train_fraction,
            seed: self.split_seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SamplingArg {
    Softmax,
    Argmax,
}

#[derive(Args, Serialize)]
struct AugmentArgs {
    #[arg(long, default_value = "features.csv")]
    features: PathBuf,
    #[arg(long, default_value = "augmented.csv")]
    out: PathBuf,
    /// Receives quantizer.json, generator.json and split.json.
    #[arg(long, default_value = "models")]
    model_dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    synthetic_subjects: usize,
    /// Synthetic repetitions per gesture and subject.
    #[arg(long, default_value_t = 20)]
    length: usize,
    #[arg(long, default_value_t = 20)]
    levels: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lstm_lr: f64,
    #[arg(long, default_value_t = 0.08)]
    init_range: f64,
    #[arg(long, value_enum, default_value_t = SamplingArg::Softmax)]
    sampling: SamplingArg,
    /// Seeds both generator training and sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ArchArg {
    MasterSlave,
    Conventional,
    Both,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long, default_value = "augmented.csv")]
    features: PathBuf,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Where `augment` left split.json; checked against the split flags.
    #[arg(long, default_value = "models")]
    model_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = ArchArg::Both)]
    arch: ArchArg,
    #[arg(long, default_value_t = 150)]
    iterations: usize,
    #[arg(long, default_value_t = 0.3)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long, default_value = "augmented.csv")]
    features: PathBuf,
    #[arg(long, default_value = "runs")]
    runs: PathBuf,
    #[arg(long, default_value = "eval.csv")]
    out: PathBuf,
    #[arg(long, default_value = "eval_summary.txt")]
    summary: PathBuf,
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// `features.csv` → `features.run.json`.
fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("run.json")
}

fn write_manifest(path: &Path, command: &str, config: &impl Serialize) -> Result<()> {
    write_json(path, &RunManifest::new(command, config))
}

fn synth(args: &SynthArgs) -> Result<()> {
    let segments = generate_synthetic_recordings(args.subjects, args.reps, args.seed)?;
    save_dataset(&args.out, &segments, DEFAULT_SAMPLE_RATE_HZ)?;
    write_manifest(&args.out.join("synth.run.json"), "synth", args)?;
    println!("wrote {} recordings to {}", segments.len(), args.out.display());
    Ok(())
}

fn extract(args: &ExtractArgs) -> Result<()> {
    let config = FeatureConfig::new(args.ar_order)?;
    let segments = load_dataset_dir(&args.data)?;
    let rows = extract_all(&segments, &config)?;
    write_feature_table(&args.out, &rows)?;
    write_manifest(&sidecar(&args.out), "extract", args)?;
    println!("wrote {} rows x {} features to {}", rows.len(), config.dimension(), args.out.display());
    Ok(())
}

fn cmd_augment(args: &AugmentArgs) -> Result<()> {
    let rows = read_feature_table(&args.features)?;
    if rows.iter().any(|r| r.synthetic) {
        return Err(Error::Data(format!("{} is already augmented", args.features.display())));
    }
    let split = stratified_split(&rows, &args.split.config())?;
    write_json(&args.model_dir.join("split.json"), &split)?;
    let train: Vec<_> = split.train_rows(&rows).into_iter().cloned().collect();
    let config = AugmentConfig {
        synthetic_subjects: args.synthetic_subjects,
        length: args.length,
        levels: args.levels,
        lstm: LstmConfig {
            hidden_dim: args.hidden,
            epochs: args.epochs,
            learning_rate: args.lstm_lr,
            seed: args.seed,
            init_range: args.init_range,
            sampling: match args.sampling {
                SamplingArg::Softmax => Sampling::Softmax,
                SamplingArg::Argmax => Sampling::Argmax,
            },
        },
        seed: args.seed,
    };
    let mut out = rows;
    let mut added = 0;
    if let Some(a) = augment(&train, &config)? {
        write_quantizer(&args.model_dir.join("quantizer.json"), &a.quantizer)?;
        write_json(&args.model_dir.join("generator.json"), &a.generator)?;
        added = a.synthetic.len();
        out.extend(a.synthetic);
    }
    write_feature_table(&args.out, &out)?;
    write_manifest(&sidecar(&args.out), "augment", &(args, &config))?;
    println!("added {added} synthetic rows; wrote {}", args.out.display());
    Ok(())
}

fn cell_stem(cell: &TrainedCell) -> String {
    let data = if cell.with_synthetic { "synthetic" } else { "real" };
    format!("s{}_{}_{}", cell.subject_id, cell.arch(), data)
}

fn train(args: &TrainArgs) -> Result<()> {
    let rows = read_feature_table(&args.features)?;
    let split = stratified_split(&rows, &args.split.config())?;
    let recorded = args.model_dir.join("split.json");
    if recorded.exists() {
        let prior: Split = read_json(&recorded)?;
        if prior != split {
            return Err(Error::Argument(format!(
                "split flags do not reproduce the split in {}; pass the same --train-fraction and --split-seed used for augment",
                recorded.display()
            )));
        }
    }
    let archs = match args.arch {
        ArchArg::MasterSlave => vec![Architecture::MasterSlave],
        ArchArg::Conventional => vec![Architecture::Conventional],
        ArchArg::Both => vec![Architecture::MasterSlave, Architecture::Conventional],
    };
    let config = TrainConfig {
        iterations: args.iterations,
        learning_rate: args.lr,
        l2_lambda: args.lambda,
        seed: args.seed,
        tolerance: None,
    };
    let cells = train_cells(&rows, &split, &archs, &config)?;
    let models = args.out.join("models");
    if models.exists() {
        // stale cells from an earlier run would otherwise be evaluated too
        fs::remove_dir_all(&models).map_err(|e| Error::Ingestion { path: models.clone(), source: e })?;
    }
    for cell in &cells {
        let stem = cell_stem(cell);
        write_json(&models.join(format!("{stem}.json")), cell)?;
        for report in &cell.reports {
            let path = args.out.join("reports").join(format!("{stem}_{}.csv", report.network));
            write_training_report(&path, report)?;
        }
    }
    write_json(&args.out.join("split.json"), &split)?;
    write_manifest(&args.out.join("train.run.json"), "train", &(args, &config))?;
    println!("trained {} cells into {}", cells.len(), args.out.display());
    Ok(())
}

fn load_cells(dir: &Path) -> Result<Vec<TrainedCell>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Ingestion { path: dir.to_path_buf(), source: e })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!("no trained models in {}", dir.display())));
    }
    let mut cells: Vec<TrainedCell> = paths.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    cells.sort_by_key(|c| (c.subject_id, c.arch(), c.with_synthetic));
    Ok(cells)
}

fn eval(args: &EvalArgs) -> Result<()> {
    let rows = read_feature_table(&args.features)?;
    let split: Split = read_json(&args.runs.join("split.json"))?;
    let cells = load_cells(&args.runs.join("models"))?;
    let results = evaluate_cells(&cells, &rows, &split)?;
    let table: Vec<_> = results.into_iter().map(|(row, _)| row).collect();
    write_evaluation_table(&args.out, &table)?;
    let summary = render_summary(&table);
    fs::write(&args.summary, &summary).map_err(|e| Error::Ingestion { path: args.summary.clone(), source: e })?;
    write_manifest(&sidecar(&args.out), "eval", args)?;
    print!("{summary}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Extract(a) => extract(&a),
        Command::Augment(a) => cmd_augment(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() && !e.to_string().contains("Usage:") {
                // value validation errors omit the usage line
                let mut cmd = Cli::command();
                cmd.build();
                let sub = std::env::args().nth(1).unwrap_or_default();
                let usage = match cmd.find_subcommand_mut(&sub) {
                    Some(s) => s.render_usage(),
                    None => cmd.render_usage(),
                };
                eprintln!("\n{usage}");
            }
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_replaces_extension() {
        assert_eq!(sidecar(Path::new("out/features.csv")), PathBuf::from("out/features.run.json"));
    }

    #[test]
    fn defaults_parse() {
        let cli = Cli::try_parse_from(["semg", "train"]).unwrap();
        let Command::Train(t) = cli.command else { panic!() };
        assert_eq!(t.iterations, 150);
        assert_eq!(t.lr, 0.3);
        assert!(matches!(t.arch, ArchArg::Both));
        assert!(Cli::try_parse_from(["semg", "synth", "--subjects", "0"]).is_err());
    }
}
