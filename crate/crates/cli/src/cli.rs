//! The `afford` command-line interface.
//!
//! Subcommands mirror the experimental flow: `synth` generates a seeded
//! dataset, `train` writes a model directory, `infer` reasons about a single
//! object (optionally with its grasp ellipse), and `eval` produces JSON
//! reports (confusion, environment ablation, zero-shot holdout, or the grasp
//! point metric).
//!
//! Exit codes: 0 success, 1 usage, 2 data/parse errors, 3 model/numeric
//! errors. Failures print a single `error: ...` line on standard error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use afford_core::GraspError;

use crate::config::RunConfig;
use crate::datasets::{
    import_rectangles, load_manifest, split, synth_generate, DatasetError, Manifest, SynthConfig,
};
use crate::eval::{
    ablate_environment, evaluate, point_metric, zero_shot_eval, EvalError, PointMetricObject,
};
use crate::model_io::{load_model, save_model, ModelIoError};
use crate::pipeline::{grasp_record, infer_record, train_pipeline, PipelineError, TrainedModel};

/// Environment variable consulted when `--seed` is absent.
pub const SEED_ENV_VAR: &str = "AFFORD_SEED";

#[derive(Parser)]
#[command(
    name = "afford",
    version,
    about = "Grasp-affordance reasoning over visual-semantic attribute evidence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset (manifest, clouds, candidates).
    Synth(SynthArgs),
    /// Fit the classifiers, build the knowledge base, and train the tree.
    Train(TrainArgs),
    /// Reason about one object; optionally compute its grasp ellipse.
    Infer(InferArgs),
    /// Evaluate a model or run the ablation / zero-shot / point-metric
    /// experiments, writing a JSON report.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for manifest.json, clouds/, and candidates/.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Objects per affordance class.
    #[arg(long, default_value_t = 20)]
    per_class: usize,
    /// Feature dimension shared by the four attributes.
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Distance between neighbouring entity means in feature space.
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    /// Probability that the environment label matches the class's canonical
    /// environment (1/7 = pure noise).
    #[arg(long, default_value_t = 0.95)]
    env_informativeness: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Model output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Variance floor for the Gaussian classifiers.
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Leaf-purity floor below which the linear scorer overrides the tree.
    #[arg(long, default_value_t = 0.6)]
    tau: f64,
    /// Number of z-bins for grasp discretisation.
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Density threshold as a fraction of the densest bin.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    /// Point-metric threshold as a fraction of the bounding-box diagonal.
    #[arg(long, default_value_t = 0.1)]
    threshold_frac: f64,
    /// End-effector ellipse semi-axes in meters.
    #[arg(long, num_args = 2, value_names = ["A", "B"], default_values_t = [0.03, 0.02])]
    semi_axes: Vec<f64>,
    /// Drop the environment layer (three-layer pipeline).
    #[arg(long)]
    no_environment: bool,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Record id inside the manifest.
    #[arg(long)]
    id: String,
    /// Also compute the affordance-constrained grasp ellipse.
    #[arg(long)]
    grasp: bool,
    /// External rectangle labels (4 corner lines per rectangle) to measure
    /// the ellipse against; implies --grasp.
    #[arg(long, requires = "grasp")]
    rectangles: Option<PathBuf>,
    /// Write the inference result as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Trained model directory (required unless --ablate or
    /// --zero-shot-holdout retrain internally).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    manifest: PathBuf,
    /// JSON report output path.
    #[arg(long)]
    report: PathBuf,
    /// Additionally export the confusion matrix as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Compare the four-layer pipeline against the environment-ablated one.
    #[arg(long)]
    ablate: bool,
    /// Hold out these object categories, retrain without them, and evaluate
    /// affordance accuracy on them.
    #[arg(long, value_delimiter = ',')]
    zero_shot_holdout: Option<Vec<String>>,
    /// Run the grasp point metric over all labelled objects.
    #[arg(long)]
    point_metric: bool,
    /// Override the point-metric threshold fraction.
    #[arg(long)]
    threshold_frac: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Use the three-layer pipeline for internally trained models.
    #[arg(long)]
    no_environment: bool,
}

/// Error categories mapped to exit codes 1..3.
enum CliError {
    Usage(String),
    Data(String),
    Model(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Model(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Model(m) => m,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelIoError> for CliError {
    fn from(e: ModelIoError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Dataset(inner) => CliError::Data(inner.to_string()),
            PipelineError::Eval(inner) => CliError::Data(inner.to_string()),
            other => CliError::Model(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => run_train(args),
        Command::Infer(args) => run_infer(args),
        Command::Eval(args) => run_eval(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            // One machine-greppable line on stderr.
            let message: String = e
                .message()
                .chars()
                .map(|c| if c == '\n' { ' ' } else { c })
                .collect();
            eprintln!("error: {message}");
            e.exit_code()
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(value) => value.parse::<u64>().map_err(|_| {
            CliError::Usage(format!("{SEED_ENV_VAR} must be an unsigned integer, got `{value}`"))
        }),
        Err(_) => Ok(0),
    }
}

fn write_report<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn run_synth(args: SynthArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed)?;
    let config = SynthConfig {
        per_class: args.per_class,
        dimension: args.dim,
        separation: args.separation,
        env_informativeness: args.env_informativeness,
        seed,
    };
    let manifest = synth_generate(&config, &args.out)?;
    println!(
        "synth: wrote {} objects to {} (seed {seed})",
        manifest.records.len(),
        args.out.display()
    );
    Ok(())
}

fn train_config(args: &TrainArgs, seed: u64) -> RunConfig {
    RunConfig {
        seed,
        bins: args.bins,
        theta: args.theta,
        tau: args.tau,
        epsilon: args.epsilon,
        train_fraction: args.train_fraction,
        threshold_frac: args.threshold_frac,
        semi_axes: [args.semi_axes[0], args.semi_axes[1]],
        environment: !args.no_environment,
    }
}

fn run_train(args: TrainArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed)?;
    let manifest = load_manifest(&args.manifest)?;
    let config = train_config(&args, seed);
    let model = train_pipeline(&manifest, &config)?;
    save_model(&args.out, &model)?;
    println!(
        "train: {} objects -> model at {} ({} layers, tree depth {})",
        manifest.records.len(),
        args.out.display(),
        model.kb.layers().len() + 1,
        model.tree.depth()
    );
    Ok(())
}

/// Grasp block of the inference output, matching the ellipse file format.
#[derive(Serialize)]
struct GraspDoc {
    center: [f64; 3],
    semi_axes: [f64; 2],
    rule: String,
    bins: Vec<usize>,
}

#[derive(Serialize)]
struct PathDoc {
    entities: Vec<String>,
    affordance: String,
    log_score: f64,
}

#[derive(Serialize)]
struct ScoresDoc {
    raw: Vec<f64>,
    normalized: Vec<f64>,
    argmax: String,
}

#[derive(Serialize)]
struct InferDoc {
    id: String,
    affordance: String,
    tree_prediction: String,
    leaf_purity: f64,
    kb_path: PathDoc,
    scores: ScoresDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    grasp: Option<GraspDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rectangle_distance: Option<f64>,
}

fn run_infer(args: InferArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let manifest = load_manifest(&args.manifest)?;
    let record = manifest
        .record(&args.id)
        .ok_or_else(|| CliError::Data(format!("no record with id `{}` in the manifest", args.id)))?;
    let base = args.manifest.parent().unwrap_or_else(|| Path::new("."));

    let (result, grasp) = if args.grasp {
        let outcome = grasp_record(&model, record, base)?;
        let grasp = GraspDoc {
            center: outcome.ellipse.center,
            semi_axes: outcome.ellipse.semi_axes,
            rule: outcome.region.rule.name().to_string(),
            bins: outcome.region.bins.clone(),
        };
        (outcome.result, Some(grasp))
    } else {
        (infer_record(&model, record)?, None)
    };

    let rectangle_distance = match &args.rectangles {
        Some(path) => {
            let rects = import_rectangles(path)?;
            if rects.is_empty() {
                return Err(CliError::Data(format!(
                    "{}: no rectangles to compare against",
                    path.display()
                )));
            }
            let center = grasp.as_ref().expect("--rectangles implies --grasp").center;
            let nearest = rects
                .iter()
                .map(|r| {
                    let rc = r.center();
                    let mut sq = 0.0;
                    for axis in 0..3 {
                        let d = rc[axis] - center[axis];
                        sq += d * d;
                    }
                    sq.sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            Some(nearest)
        }
        None => None,
    };

    let doc = InferDoc {
        id: record.id.clone(),
        affordance: result.final_affordance.name().to_string(),
        tree_prediction: result.tree_prediction.name().to_string(),
        leaf_purity: result.leaf_purity,
        kb_path: PathDoc {
            entities: result.path.entities.iter().map(|e| e.name().to_string()).collect(),
            affordance: result.path.affordance.name().to_string(),
            log_score: result.path.log_score,
        },
        scores: ScoresDoc {
            raw: result.scores.raw.clone(),
            normalized: result.scores.normalized.clone(),
            argmax: result.scores.argmax.name().to_string(),
        },
        grasp,
        rectangle_distance,
    };
    if let Some(out) = &args.out {
        write_report(out, &doc)?;
    }

    let mut summary = format!(
        "infer {}: {} (tree {} @ purity {:.3}, kb path -> {})",
        doc.id, doc.affordance, doc.tree_prediction, doc.leaf_purity, doc.kb_path.affordance
    );
    if let Some(g) = &doc.grasp {
        summary.push_str(&format!(
            ", grasp {} at [{:.4}, {:.4}, {:.4}]",
            g.rule, g.center[0], g.center[1], g.center[2]
        ));
    }
    if let Some(d) = doc.rectangle_distance {
        summary.push_str(&format!(", rectangle distance {d:.4} m"));
    }
    println!("{summary}");
    Ok(())
}

fn eval_config(args: &EvalArgs, seed: u64) -> RunConfig {
    RunConfig {
        seed,
        train_fraction: args.train_fraction.unwrap_or(0.7),
        environment: !args.no_environment,
        ..RunConfig::default()
    }
}

fn run_eval(args: EvalArgs) -> Result<(), CliError> {
    let modes = [args.ablate, args.zero_shot_holdout.is_some(), args.point_metric]
        .iter()
        .filter(|m| **m)
        .count();
    if modes > 1 {
        return Err(CliError::Usage(
            "--ablate, --zero-shot-holdout, and --point-metric are mutually exclusive".to_string(),
        ));
    }
    let manifest = load_manifest(&args.manifest)?;

    if args.ablate {
        let seed = resolve_seed(args.seed)?;
        let config = eval_config(&args, seed);
        let (train, test) = split(&manifest, config.train_fraction, seed)?;
        let report = ablate_environment(&train, &test, &config)?;
        write_report(&args.report, &report)?;
        println!(
            "ablate: with={:.4} without={:.4} delta={:+.4} ({} test objects) -> {}",
            report.with_environment.diagonal_average_accuracy,
            report.without_environment.diagonal_average_accuracy,
            report.delta,
            test.records.len(),
            args.report.display()
        );
        return Ok(());
    }

    if let Some(holdout) = &args.zero_shot_holdout {
        let seed = resolve_seed(args.seed)?;
        let config = eval_config(&args, seed);
        let training = manifest.filter_categories(|c| !holdout.iter().any(|h| h == c));
        if training.records.is_empty() {
            return Err(CliError::Data(
                "holding out those categories leaves no training data".to_string(),
            ));
        }
        if training.records.len() == manifest.records.len() {
            return Err(EvalError::EmptyHoldout.into());
        }
        let model = train_pipeline(&training, &config)?;
        let report = zero_shot_eval(&model, &manifest, holdout)?;
        write_report(&args.report, &report)?;
        println!(
            "zero-shot: accuracy {:.4} over {} holdout objects -> {}",
            report.accuracy,
            report.objects,
            args.report.display()
        );
        return Ok(());
    }

    let model_dir = args.model.as_ref().ok_or_else(|| {
        CliError::Usage("--model is required unless --ablate or --zero-shot-holdout".to_string())
    })?;
    let model = load_model(model_dir)?;
    let base = args.manifest.parent().unwrap_or_else(|| Path::new("."));

    if args.point_metric {
        let threshold_frac = args.threshold_frac.unwrap_or(model.config.threshold_frac);
        let objects = collect_point_metric_inputs(&model, &manifest, base)?;
        let report = point_metric(&objects, threshold_frac)?;
        write_report(&args.report, &report)?;
        println!(
            "point-metric: {:.1}% matched ({}/{}) at threshold_frac {} -> {}",
            report.match_percentage,
            report.matched,
            report.labelled,
            threshold_frac,
            args.report.display()
        );
        return Ok(());
    }

    let (report, matrix) = evaluate(&model, &manifest)?;
    write_report(&args.report, &report)?;
    if let Some(csv_path) = &args.csv {
        if let Some(parent) = csv_path.parent() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
        }
        fs::write(csv_path, matrix.to_csv())
            .map_err(|e| CliError::Data(format!("{}: {e}", csv_path.display())))?;
    }
    println!(
        "eval: diagonal accuracy {:.4} over {} objects -> {}",
        report.confusion.diagonal_average_accuracy,
        report.objects,
        args.report.display()
    );
    Ok(())
}

fn collect_point_metric_inputs(
    model: &TrainedModel,
    manifest: &Manifest,
    base: &Path,
) -> Result<Vec<PointMetricObject>, CliError> {
    let mut objects = Vec::new();
    for record in &manifest.records {
        if record.rectangles.is_empty() {
            continue;
        }
        let (ellipse_center, bbox_diagonal) = match grasp_record(model, record, base) {
            Ok(outcome) => (Some(outcome.ellipse.center), outcome.bbox_diagonal),
            Err(PipelineError::Grasp(GraspError::NoFeasibleRegion)) => {
                // The rule rejected every candidate; score the object as a
                // negative-effect grasp instead of failing the whole report.
                let cloud = afford_core::PointCloud::new(crate::datasets::read_xyz(
                    &base.join(&record.point_cloud),
                )?)
                .map_err(|e| CliError::Model(e.to_string()))?;
                (None, cloud.bbox_diagonal())
            }
            Err(other) => return Err(other.into()),
        };
        objects.push(PointMetricObject {
            id: record.id.clone(),
            ellipse_center,
            rectangle_centers: record.rectangles.iter().map(|r| r.center()).collect(),
            bbox_diagonal,
        });
    }
    Ok(objects)
}
