use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use imbalance::bench::{
    all_techniques, catalogue, emit_report, evaluate, run_suite, train_technique, Folds, RunConfig,
    SuiteConfig, TechniqueSpec,
};
use imbalance::dataset::{
    generate_synthetic, load_csv_inferred, write_csv, Dataset, GeneratorConfig, LoadOptions,
    SplitSpec,
};
use imbalance::forest::FitConfig;
use imbalance::model::SavedModel;
use imbalance::{bench, Error, Result};

#[derive(Parser)]
#[command(
    name = "bench",
    version,
    about = "Benchmark class-imbalance techniques on failure telemetry"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every technique over repeated splits and write the report files.
    Run(RunArgs),
    /// Print the technique catalogue.
    ListTechniques,
    /// Write a synthetic dataset as CSV.
    Generate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one technique on the train/validation folds and save the model.
    Train(TrainArgs),
    /// Score a saved model on a labelled CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        include_categorical: bool,
    },
}

#[derive(Args)]
struct DataArgs {
    /// CSV path, or `synthetic` for the built-in generator.
    #[arg(long, default_value = "synthetic")]
    data: String,
    /// JSON generator settings; individual flags below override it.
    #[arg(long)]
    gen_config: Option<PathBuf>,
    #[arg(long)]
    n_normal: Option<usize>,
    #[arg(long)]
    n_failure: Option<usize>,
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    gen_seed: Option<u64>,
    /// Keep integer-encoded device columns as features.
    #[arg(long)]
    include_categorical: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated technique strings, or `all`.
    #[arg(long, default_value = "all")]
    techniques: String,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.6,0.2,0.2")]
    split: String,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    fixed_split: bool,
    /// Skip timing and write zeros, making outputs byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    #[arg(long, default_value_t = 100)]
    trees: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "baseline")]
    technique: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "0.6,0.2,0.2")]
    split: String,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long)]
    model: PathBuf,
}

fn load_data(a: &DataArgs) -> Result<Dataset> {
    let opts = LoadOptions {
        include_categorical: a.include_categorical,
    };
    if a.data != "synthetic" {
        let loaded = load_csv_inferred(&a.data, opts)?;
        if loaded.dropped > 0 {
            log::warn!("dropped {} rows with missing values", loaded.dropped);
        }
        return Ok(loaded.dataset);
    }
    let mut cfg = match &a.gen_config {
        Some(p) => {
            if !p.exists() {
                return Err(Error::MissingFile(p.clone()));
            }
            serde_json::from_reader(File::open(p)?)?
        }
        None => GeneratorConfig::default(),
    };
    cfg.n_normal = a.n_normal.unwrap_or(cfg.n_normal);
    cfg.n_failure = a.n_failure.unwrap_or(cfg.n_failure);
    cfg.overlap = a.overlap.unwrap_or(cfg.overlap);
    cfg.noise_scale = a.noise.unwrap_or(cfg.noise_scale);
    cfg.seed = a.gen_seed.unwrap_or(cfg.seed);
    generate_synthetic(&cfg)
}

fn parse_split(s: &str) -> Result<(f64, f64, f64)> {
    let parts = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Config(format!("bad split '{s}'")))?;
    match parts[..] {
        [a, b, c] => {
            SplitSpec::new(a, b, c, 0)?;
            Ok((a, b, c))
        }
        _ => Err(Error::Config(format!("split '{s}' needs three fractions"))),
    }
}

fn parse_techniques(s: &str) -> Result<Vec<TechniqueSpec>> {
    if s.trim() == "all" {
        return Ok(all_techniques());
    }
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(TechniqueSpec::parse)
        .collect()
}

fn forest(trees: usize) -> FitConfig {
    FitConfig {
        n_trees: trees,
        ..FitConfig::default()
    }
}

fn run(a: &RunArgs) -> Result<()> {
    let techniques = parse_techniques(&a.techniques)?;
    let split = parse_split(&a.split)?;
    let data = load_data(&a.data)?;
    let cfg = SuiteConfig {
        runs: a.runs,
        base_seed: a.seed,
        split,
        fixed_split: a.fixed_split,
        run: RunConfig {
            forest: forest(a.trees),
            timing: !a.no_timing,
            ..RunConfig::default()
        },
    };
    let report = run_suite(&techniques, &data, &cfg)?;
    for path in emit_report(&report, &a.out)? {
        println!("wrote {}", path.display());
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    Ok(())
}

#[derive(Serialize)]
struct Scores {
    technique: String,
    rows: usize,
    f1: f64,
    precision: f64,
    recall: f64,
    accuracy: f64,
}

fn train(a: &TrainArgs) -> Result<()> {
    let spec = TechniqueSpec::parse(&a.technique)?;
    let (tr, va, te) = parse_split(&a.split)?;
    let data = load_data(&a.data)?;
    let folds = Folds::split(&data, &SplitSpec::new(tr, va, te, a.seed)?)?;
    let forest_cfg = FitConfig {
        seed: a.seed,
        ..forest(a.trees)
    };
    let trained = train_technique(&spec, &folds, &forest_cfg, None)?;
    let saved = SavedModel::new(
        spec.id(),
        data.schema().names().to_vec(),
        trained.model.clone(),
        trained.rule.clone(),
    );
    saved.save(&a.model)?;
    let cfg = RunConfig {
        timing: false,
        ..RunConfig::default()
    };
    let r = evaluate(&spec, trained, &folds.test, 0, a.seed, &cfg)?;
    print_json(&Scores {
        technique: r.technique,
        rows: folds.test.len(),
        f1: r.f1,
        precision: r.precision,
        recall: r.recall,
        accuracy: r.accuracy,
    })
}

fn eval(model: &Path, data: &Path, include_categorical: bool) -> Result<()> {
    let saved = SavedModel::load(model)?;
    let d = load_csv_inferred(
        data,
        LoadOptions {
            include_categorical,
        },
    )?
    .dataset;
    if d.schema().names() != saved.feature_names.as_slice() {
        return Err(Error::HeaderMismatch {
            expected: saved.feature_names.clone(),
            found: d.schema().names().to_vec(),
        });
    }
    let c = bench::confusion(d.labels(), &saved.predict(d.features())?)?;
    print_json(&Scores {
        technique: saved.technique,
        rows: d.len(),
        f1: c.f1(),
        precision: c.precision(),
        recall: c.recall(),
        accuracy: c.accuracy(),
    })
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn generate(data: &DataArgs, out: &Path) -> Result<()> {
    let d = load_data(data)?;
    write_csv(&d, BufWriter::new(File::create(out)?))?;
    println!(
        "wrote {} rows ({} failures) to {}",
        d.len(),
        d.n_failure(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => run(a),
        Command::ListTechniques => {
            for (id, keys, summary) in catalogue() {
                let keys = if keys.is_empty() {
                    String::new()
                } else {
                    format!(" [{}]", keys.join(", "))
                };
                println!("{id:<24} {summary}{keys}");
            }
            Ok(())
        }
        Command::Generate { data, out } => generate(data, out),
        Command::Train(a) => train(a),
        Command::Eval {
            model,
            data,
            include_categorical,
        } => eval(model, data, *include_categorical),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
