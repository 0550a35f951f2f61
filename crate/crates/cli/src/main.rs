use std::collections::{BTreeSet, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use kgrefine_core::embedding::{build_vocab, load_model, save_model, train_skipgram, TrainHyperparams};
use kgrefine_core::eval::{run_ablation, run_pipeline, AblationAxis, RunConfig};
use kgrefine_core::graph::{graph_stats, load_graph, save_graph, validate};
use kgrefine_core::ingest::{augment_graph, generate_synthetic_cohort, read_patient_tables, SynthConfig};
use kgrefine_core::linkpred::{
    featurize, featurize_all, fit, load_classifier, positive_pairs, predict, read_pairs, save_classifier,
    write_pairs, write_predictions, ClassifierKind, ClassifierSpec, NegativeStrategy, SamplingUniverse,
};
use kgrefine_core::walks::{extract_corpus, Corpus, WalkConfig, WalkStrategy};
use kgrefine_review::{generate_candidates, CandidateOptions, ServeConfig, DEFAULT_MIN_EVALUATIONS};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "kgrefine", version, about = "Refine a medical knowledge graph with patient data and link prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a graph file
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Merge patient tables into a knowledge graph
    Ingest(IngestArgs),
    /// Generate a synthetic graph and cohort with planted relations
    Synth(SynthArgs),
    /// Extract a random-walk corpus
    Walk(WalkArgs),
    /// Train skip-gram embeddings on a walk corpus
    Embed(EmbedArgs),
    /// Build a labeled rule/factor pair dataset
    Sample(SampleArgs),
    /// Train a link classifier
    Fit(FitArgs),
    /// Score rule/factor pairs
    Predict(PredictArgs),
    /// List predicted relations for expert review
    Candidates(CandidatesArgs),
    /// Run the full holdout evaluation
    Eval(EvalArgs),
    /// Run one ablation axis on a shared split
    Ablate(AblateArgs),
    /// Serve the review API
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Node, edge and kind counts
    Stats { file: PathBuf },
    /// Integrity check; exits non-zero on any issue
    Validate { file: PathBuf },
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    kg: PathBuf,
    #[arg(long)]
    patients: PathBuf,
    #[arg(long)]
    diagnoses: PathBuf,
    #[arg(long)]
    labs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the augmentation report as JSON
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator settings as JSON; omitted fields take their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct WalkArgs {
    #[arg(long)]
    kg: PathBuf,
    #[arg(long, default_value = "classic")]
    strategy: WalkStrategy,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    /// Walks per node
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Single worker with a fixed update order
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    /// Noise samples per positive
    #[arg(long)]
    negatives: Option<usize>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    kg: PathBuf,
    /// random, per-rule or opposite
    #[arg(long, default_value = "opposite")]
    strategy: String,
    /// Negatives per positive for per-rule sampling
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// rf, svm or logreg
    #[arg(long, default_value = "rf")]
    classifier: ClassifierKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Standardize features before fitting
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    clf: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CandidatesArgs {
    /// Augmented graph the model was trained on
    #[arg(long)]
    kg: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    clf: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_EVALUATIONS)]
    min_evaluations: usize,
    /// Keep only rules of this disease (id or label); repeatable
    #[arg(long)]
    disease: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    axis: AblationAxis,
    #[arg(long)]
    config: PathBuf,
    /// CSV table of per-cell metrics
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long)]
    candidates: PathBuf,
    /// Curated graph that accepted relations are written back to
    #[arg(long)]
    kg: PathBuf,
    /// Append-only rating log; created when missing
    #[arg(long)]
    ratings: PathBuf,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn graph_command(cmd: GraphCommand) -> Result<()> {
    match cmd {
        GraphCommand::Stats { file } => {
            let g = load_graph(&file).with_context(|| format!("loading {}", file.display()))?;
            print_json(&graph_stats(&g))
        }
        GraphCommand::Validate { file } => {
            let g = load_graph(&file).with_context(|| format!("loading {}", file.display()))?;
            let report = validate(&g);
            for issue in &report.issues {
                println!("{issue}");
            }
            if !report.is_ok() {
                bail!("{} issues in {}", report.issues.len(), file.display());
            }
            println!("ok: {} nodes, {} edges", g.node_count(), g.edge_count());
            Ok(())
        }
    }
}

fn ingest(args: IngestArgs) -> Result<()> {
    let kg = load_graph(&args.kg).with_context(|| format!("loading {}", args.kg.display()))?;
    let records = read_patient_tables(&args.patients, &args.diagnoses, &args.labs)?;
    let augmented = augment_graph(&kg.freeze(), &records);
    save_graph(&augmented.graph, &args.out)?;
    if let Some(path) = &args.report {
        write_json(path, &augmented.report)?;
    }
    let r = &augmented.report;
    eprintln!(
        "added {} of {} patients, {} nodes, {} edges",
        r.patients_added, r.patients_total, r.nodes_added, r.edges_added
    );
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let config: SynthConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => SynthConfig::default(),
    };
    let output = generate_synthetic_cohort(&config, args.seed)?;
    output.write_to_dir(&args.out_dir)?;
    eprintln!(
        "{} planted relations ({} withheld) written to {}",
        output.ledger.planted.len(),
        output.ledger.withheld().count(),
        args.out_dir.display()
    );
    Ok(())
}

fn walk(args: WalkArgs) -> Result<()> {
    let graph = load_graph(&args.kg)?.freeze();
    let config = WalkConfig { depth: args.depth, walks_per_node: args.count, strategy: args.strategy, seed: args.seed };
    let corpus = extract_corpus(&graph, &config)?;
    corpus.save(&args.out)?;
    eprintln!("{} walks, digest {}", corpus.len(), corpus.digest());
    Ok(())
}

fn embed(args: EmbedArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let defaults = TrainHyperparams::default();
    let hp = TrainHyperparams {
        deterministic: args.deterministic,
        epochs: args.epochs.unwrap_or(defaults.epochs),
        window: args.window.unwrap_or(defaults.window),
        negatives: args.negatives.unwrap_or(defaults.negatives),
        ..defaults
    };
    let vocab = build_vocab(corpus.lines.iter().map(String::as_str))?;
    let model = train_skipgram(&corpus.lines, &vocab, args.dim, &hp, args.seed)?;
    save_model(&model, &args.out)?;
    eprintln!("{} vectors of dimension {}, final loss {:?}", model.len(), model.dim(), model.epoch_losses().last());
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    let graph = load_graph(&args.kg)?;
    let strategy = match args.strategy.as_str() {
        "per-rule" => NegativeStrategy::PerRule { k: args.k },
        other => other.parse::<NegativeStrategy>().map_err(anyhow::Error::msg)?,
    };
    let positives = positive_pairs(&graph);
    let exclude: HashSet<(String, String)> = positives.iter().map(|p| p.key()).collect();
    let universe = SamplingUniverse::from_graph(&graph);
    let negatives = strategy.sample(&universe, &graph, &positives, &exclude, args.seed)?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    let pairs: Vec<_> = positives.iter().chain(&negatives).cloned().collect();
    write_pairs(&pairs, &mut out)?;
    out.flush()?;
    eprintln!("{} positives, {} {strategy} negatives", positives.len(), negatives.len());
    Ok(())
}

fn fit_classifier(args: FitArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let pairs = read_pairs(File::open(&args.dataset)?)?;
    let (x, y) = featurize_all(&model, &pairs)?;
    let spec = ClassifierSpec {
        kind: args.classifier,
        grid: Vec::new(),
        folds: args.folds,
        seed: args.seed,
        standardize: args.standardize,
    };
    let clf = fit(&spec, &x, &y)?;
    save_classifier(&clf, &args.out)?;
    match &clf.cv {
        Some(cv) => eprintln!("selected {:?} (cv f1 {:.4})", clf.params, cv.candidates[cv.best].1),
        None => eprintln!("fitted {:?}", clf.params),
    }
    Ok(())
}

fn predict_pairs(args: PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let clf = load_classifier(&args.clf)?;
    let pairs = read_pairs(File::open(&args.pairs)?)?;
    let predictions = pairs
        .iter()
        .map(|p| Ok(predict(&clf, &p.rule, &p.factor, &featurize(&model, &p.rule, &p.factor)?)?))
        .collect::<Result<Vec<_>>>()?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    write_predictions(&predictions, &mut out)?;
    out.flush()?;
    let positive = predictions.iter().filter(|p| p.label).count();
    eprintln!("{} pairs scored, {positive} predicted positive", predictions.len());
    Ok(())
}

fn candidates(args: CandidatesArgs) -> Result<()> {
    let graph = load_graph(&args.kg)?;
    let model = load_model(&args.model)?;
    let clf = load_classifier(&args.clf)?;
    let options = CandidateOptions {
        min_evaluations: args.min_evaluations,
        diseases: (!args.disease.is_empty()).then(|| args.disease.into_iter().collect::<BTreeSet<_>>()),
    };
    let set = generate_candidates(&graph, &model, &clf, &options)?;
    set.save(&args.out)?;
    eprintln!("{} candidates written to {}", set.candidates.len(), args.out.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let config: RunConfig = read_json(&args.config)?;
    let outcome = run_pipeline(&config)?;
    write_json(&args.out, &outcome.report)?;
    let m = &outcome.report.metrics;
    println!(
        "{} {}: precision {:.4} recall {:.4} f1 {:.4} macro-f1 {:.4}",
        config.variant, config.classifier, m.precision, m.recall, m.f1, m.macro_f1
    );
    println!("fingerprint {}", outcome.report.fingerprint);
    Ok(())
}

fn ablate(args: AblateArgs) -> Result<()> {
    let config: RunConfig = read_json(&args.config)?;
    let report = run_ablation(args.axis, &config)?;
    fs::write(&args.out, report.to_csv()?)?;
    print!("{}", report.to_text());
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let config = ServeConfig {
        addr: SocketAddr::new(args.host, args.port),
        candidates: args.candidates,
        kg: args.kg,
        ratings: args.ratings,
    };
    let runtime = tokio::runtime::Runtime::new()?;
    eprintln!("serving review API on http://{}", config.addr);
    runtime.block_on(kgrefine_review::serve(config))?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Graph(cmd) => graph_command(cmd),
        Command::Ingest(args) => ingest(args),
        Command::Synth(args) => synth(args),
        Command::Walk(args) => walk(args),
        Command::Embed(args) => embed(args),
        Command::Sample(args) => sample(args),
        Command::Fit(args) => fit_classifier(args),
        Command::Predict(args) => predict_pairs(args),
        Command::Candidates(args) => candidates(args),
        Command::Eval(args) => eval(args),
        Command::Ablate(args) => ablate(args),
        Command::Serve(args) => serve(args),
    }
}
