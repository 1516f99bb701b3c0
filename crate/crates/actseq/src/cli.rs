//! Command-line surface: encode, decode, train, predict, evaluate, analyze
//! and gradcheck subcommands over the JSON-lines formats. The binary is a
//! thin shell around the library; see the crate examples for programmatic
//! use.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::codec::{delinearize, linearize, ActionSequence};
use crate::corpus::jsonl::Record;
use crate::corpus::{read_jsonl, AnnotatedDocument};
use crate::decoder::{predict_corpus, DecodeOptions};
use crate::document::{Document, Span, TaskStructure};
use crate::metrics::{
    coref_scores_corpus, entity_prf_corpus, mention_analysis, relation_prf_corpus,
};
use crate::model::{fit, gradient_check, Alphabet, Precision, ScorerConfig, ScorerModel};
use crate::schema::{TaskKind, TaskSchema};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "ACTSEQ_THREADS";

#[derive(Parser)]
#[command(
    name = "actseq",
    about = "Span-structure prediction as constrained action sequences",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert gold structures to action sequences (JSON lines)
    Encode(EncodeArgs),
    /// Convert action sequences back to structures
    Decode(DecodeArgs),
    /// Train a scorer on a corpus
    Train(TrainArgs),
    /// Greedy-decode structures for a corpus with a trained model
    Predict(PredictArgs),
    /// Score predictions against gold annotations
    Evaluate(EvaluateArgs),
    /// Mention-budget analysis of coreference predictions
    Analyze(AnalyzeArgs),
    /// Finite-difference validation of the scorer gradients
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct EncodeArgs {
    /// Expected task kind; rejected if the schema disagrees
    #[arg(long, value_parser = parse_task)]
    task: Option<TaskKind>,
    #[arg(long)]
    schema: PathBuf,
    /// Corpus JSON lines with gold annotations
    #[arg(long)]
    input: PathBuf,
    /// Output action-sequence JSON lines
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    /// Expected task kind; rejected if the schema disagrees
    #[arg(long, value_parser = parse_task)]
    task: Option<TaskKind>,
    #[arg(long)]
    schema: PathBuf,
    /// Action-sequence JSON lines
    #[arg(long)]
    input: PathBuf,
    /// Corpus JSON lines supplying the documents (annotations ignored)
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Reproducible run settings. A JSON config file provides defaults; command
/// line flags win over the file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Option<TaskKind>,
    pub schema: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// "small" or "large".
    pub profile: Option<String>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub prune_sentences: Option<bool>,
    pub max_steps: Option<usize>,
    pub model_dim: Option<usize>,
    pub encoder_layers: Option<usize>,
    pub decoder_layers: Option<usize>,
    pub feedforward_dim: Option<usize>,
    pub head_hidden: Option<usize>,
    pub precision: Option<Precision>,
}

impl RunConfig {
    fn overlay(base: RunConfig, over: RunConfig) -> RunConfig {
        RunConfig {
            task: over.task.or(base.task),
            schema: over.schema.or(base.schema),
            train: over.train.or(base.train),
            dev: over.dev.or(base.dev),
            test: over.test.or(base.test),
            out: over.out.or(base.out),
            seed: over.seed.or(base.seed),
            profile: over.profile.or(base.profile),
            epochs: over.epochs.or(base.epochs),
            batch_size: over.batch_size.or(base.batch_size),
            learning_rate: over.learning_rate.or(base.learning_rate),
            prune_sentences: over.prune_sentences.or(base.prune_sentences),
            max_steps: over.max_steps.or(base.max_steps),
            model_dim: over.model_dim.or(base.model_dim),
            encoder_layers: over.encoder_layers.or(base.encoder_layers),
            decoder_layers: over.decoder_layers.or(base.decoder_layers),
            feedforward_dim: over.feedforward_dim.or(base.feedforward_dim),
            head_hidden: over.head_hidden.or(base.head_hidden),
            precision: over.precision.or(base.precision),
        }
    }

    fn scorer_config(&self) -> Result<ScorerConfig, CliError> {
        let mut cfg = match self.profile.as_deref() {
            None | Some("small") => ScorerConfig::small(),
            Some("large") => ScorerConfig::large(),
            Some(other) => {
                return Err(CliError::usage(format!(
                    "unknown profile {other:?}; expected small or large"
                )))
            }
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.model_dim {
            cfg.model_dim = v;
        }
        if let Some(v) = self.encoder_layers {
            cfg.encoder_layers = v;
        }
        if let Some(v) = self.decoder_layers {
            cfg.decoder_layers = v;
        }
        if let Some(v) = self.feedforward_dim {
            cfg.feedforward_dim = v;
        }
        if let Some(v) = self.head_hidden {
            cfg.head_hidden = v;
        }
        if let Some(v) = self.precision {
            cfg.precision = v;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// JSON run configuration; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Expected task kind; rejected if the schema disagrees
    #[arg(long, value_parser = parse_task)]
    task: Option<TaskKind>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Held-out split scored after training
    #[arg(long)]
    test: Option<PathBuf>,
    /// Output directory for model.json, loss_trace.csv and reports
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model size profile: small or large
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long = "lr")]
    learning_rate: Option<f64>,
    #[arg(long)]
    prune_sentences: Option<bool>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct PredictArgs {
    /// Expected task kind; rejected if the checkpoint disagrees
    #[arg(long, value_parser = parse_task)]
    task: Option<TaskKind>,
    /// Trained checkpoint (model.json)
    #[arg(long)]
    model: PathBuf,
    /// Corpus JSON lines; annotations, if present, are ignored
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Attach the per-step chosen-probability trace to each record
    #[arg(long)]
    probs: bool,
    #[arg(long)]
    prune_sentences: Option<bool>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Expected task kind; rejected if the schema disagrees
    #[arg(long, value_parser = parse_task)]
    task: Option<TaskKind>,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Metrics report JSON; a plain-text table goes to stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Expected task kind; rejected if the schema disagrees
    #[arg(long, value_parser = parse_task)]
    task: Option<TaskKind>,
    /// Coreference schema
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Parameters to sample
    #[arg(long, default_value_t = 150)]
    samples: usize,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub usage: bool,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            usage: true,
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            usage: false,
        }
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::runtime(e.to_string())
    }
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    match s {
        "ner" => Ok(TaskKind::Ner),
        "ere" => Ok(TaskKind::Ere),
        "coref" => Ok(TaskKind::Coref),
        other => Err(format!(
            "unknown task {other:?}; expected ner, ere or coref"
        )),
    }
}

fn check_task(expected: Option<TaskKind>, actual: TaskKind) -> Result<(), CliError> {
    match expected {
        Some(t) if t != actual => Err(CliError::usage(format!(
            "--task {} does not match the schema task {}",
            t.as_str(),
            actual.as_str()
        ))),
        _ => Ok(()),
    }
}

fn load_schema(path: &Path) -> Result<TaskSchema, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read schema {}: {e}", path.display())))?;
    TaskSchema::from_json_str(&text)
        .map_err(|e| CliError::usage(format!("invalid schema {}: {e}", path.display())))
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let mut buf = String::new();
    for it in items {
        buf.push_str(&serde_json::to_string(it).expect("serializable"));
        buf.push('\n');
    }
    fs::write(path, buf).map_err(|e| CliError::runtime(e.to_string()))
}

fn cmd_encode(args: &EncodeArgs) -> Result<(), CliError> {
    let schema = load_schema(&args.schema)?;
    check_task(args.task, schema.kind)?;
    let docs = read_jsonl(&args.input, &schema)?;
    let mut sequences = Vec::with_capacity(docs.len());
    let mut warning_count = 0usize;
    for d in &docs {
        let (seq, warnings) = linearize(&d.structure, &d.doc, &schema)?;
        warning_count += warnings.len();
        sequences.push(seq);
    }
    write_lines(&args.out, &sequences)?;
    if warning_count > 0 {
        eprintln!("{warning_count} annotations could not be encoded exactly (lossy links)");
    }
    println!(
        "encoded {} documents -> {}",
        sequences.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_decode(args: &DecodeArgs) -> Result<(), CliError> {
    let schema = load_schema(&args.schema)?;
    check_task(args.task, schema.kind)?;
    let docs = read_jsonl(&args.corpus, &schema)?;
    let text = fs::read_to_string(&args.input)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let seq: ActionSequence = serde_json::from_str(line)
            .map_err(|e| CliError::runtime(format!("line {}: {e}", i + 1)))?;
        let doc = docs
            .iter()
            .map(|d| &d.doc)
            .find(|d| d.doc_id == seq.doc_id)
            .ok_or_else(|| {
                CliError::runtime(format!("line {}: unknown doc_id {:?}", i + 1, seq.doc_id))
            })?;
        let structure = delinearize(&seq, doc, &schema)?;
        out.push(Record::from_annotated(
            &AnnotatedDocument {
                doc: doc.clone(),
                structure,
                provenance: None,
            },
            &schema,
        ));
    }
    write_lines(&args.out, &out)?;
    println!("decoded {} sequences -> {}", out.len(), args.out.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let file_cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config: {e}")))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| CliError::usage(format!("invalid config: {e}")))?
        }
        None => RunConfig::default(),
    };
    let flag_cfg = RunConfig {
        task: args.task,
        schema: args.schema.clone(),
        train: args.train.clone(),
        dev: args.dev.clone(),
        test: args.test.clone(),
        out: args.out.clone(),
        seed: args.seed,
        profile: args.profile.clone(),
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        prune_sentences: args.prune_sentences,
        max_steps: args.max_steps,
        ..RunConfig::default()
    };
    let cfg = RunConfig::overlay(file_cfg, flag_cfg);

    let schema_path = cfg
        .schema
        .clone()
        .ok_or_else(|| CliError::usage("train requires --schema"))?;
    let train_path = cfg
        .train
        .clone()
        .ok_or_else(|| CliError::usage("train requires --train"))?;
    let out_dir = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::usage("train requires --out"))?;
    let schema = load_schema(&schema_path)?;
    check_task(cfg.task, schema.kind)?;
    let scfg = cfg.scorer_config()?;
    let prune = cfg
        .prune_sentences
        .unwrap_or(!matches!(schema.kind, TaskKind::Coref));

    let corpus = read_jsonl(&train_path, &schema)?;
    if corpus.is_empty() {
        return Err(CliError::usage("training corpus is empty"));
    }
    fs::create_dir_all(&out_dir)?;

    let mut pairs = Vec::with_capacity(corpus.len());
    let mut lossy = 0usize;
    for d in &corpus {
        let (seq, warnings) = linearize(&d.structure, &d.doc, &schema)?;
        lossy += warnings.len();
        pairs.push((d.doc.clone(), seq));
    }
    if lossy > 0 {
        eprintln!("{lossy} gold annotations reduced during encoding (lossy links)");
    }

    let alphabet = Alphabet::build(pairs.iter().map(|(d, _)| d));
    let mut model = ScorerModel::init(scfg, schema.clone(), alphabet)?;
    let report = fit(&mut model, &pairs, prune)?;

    let model_path = out_dir.join("model.json");
    model.save(&model_path)?;
    let mut trace = String::from("epoch,loss\n");
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        trace.push_str(&format!("{},{}\n", i + 1, loss));
    }
    fs::write(out_dir.join("loss_trace.csv"), trace)?;
    // The effective run settings, for reproducibility.
    let run_record = json!({
        "schema": schema_path,
        "train": train_path,
        "prune_sentences": prune,
        "config": model.config,
    });
    fs::write(
        out_dir.join("run.json"),
        serde_json::to_string_pretty(&run_record).unwrap(),
    )?;
    println!(
        "trained {} epochs on {} documents; final loss {:.6}; model -> {}",
        model.config.epochs,
        pairs.len(),
        report.epoch_losses.last().copied().unwrap_or(f64::NAN),
        model_path.display()
    );

    for (split, path) in [("dev", &cfg.dev), ("test", &cfg.test)] {
        let Some(split_path) = path else { continue };
        let gold = read_jsonl(split_path, &schema)?;
        let options = DecodeOptions {
            prune_sentences: prune,
            max_steps: cfg.max_steps,
        };
        let docs: Vec<Document> = gold.iter().map(|d| d.doc.clone()).collect();
        let outcomes = predict_corpus(&model, &docs, &options)?;
        let preds: Vec<AnnotatedDocument> = gold
            .iter()
            .zip(&outcomes)
            .map(|(d, o)| {
                Ok(AnnotatedDocument {
                    doc: d.doc.clone(),
                    structure: delinearize(&o.sequence, &d.doc, &schema)?,
                    provenance: None,
                })
            })
            .collect::<Result<_, CliError>>()?;
        let report = metrics_report(&schema, &gold, &preds)?;
        fs::write(
            out_dir.join(format!("{split}_metrics.json")),
            serde_json::to_string_pretty(&report).unwrap(),
        )?;
        println!("{split}:");
        println!("{}", metrics_table(&report));
    }
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let model = ScorerModel::load(&args.model, None)?;
    check_task(args.task, model.schema.kind)?;
    let docs_in = read_jsonl(&args.input, &model.schema)?;
    let mut options = DecodeOptions::for_task(model.schema.kind);
    if let Some(p) = args.prune_sentences {
        options.prune_sentences = p;
    }
    if args.max_steps.is_some() {
        options.max_steps = args.max_steps;
    }
    let docs: Vec<Document> = docs_in.iter().map(|d| d.doc.clone()).collect();
    let outcomes = predict_corpus(&model, &docs, &options)?;
    let mut records = Vec::with_capacity(docs.len());
    for (doc, outcome) in docs.iter().zip(&outcomes) {
        let structure = delinearize(&outcome.sequence, doc, &model.schema)?;
        let mut rec = Record::from_annotated(
            &AnnotatedDocument {
                doc: doc.clone(),
                structure,
                provenance: None,
            },
            &model.schema,
        );
        if args.probs {
            rec.probs = Some(outcome.step_probs.clone());
        }
        records.push(rec);
    }
    write_lines(&args.out, &records)?;
    println!(
        "predicted {} documents -> {}",
        records.len(),
        args.out.display()
    );
    Ok(())
}

/// Pairs gold and predicted documents by id, in gold order.
fn paired<'a>(
    gold: &'a [AnnotatedDocument],
    pred: &'a [AnnotatedDocument],
) -> Result<Vec<(&'a AnnotatedDocument, &'a AnnotatedDocument)>, CliError> {
    gold.iter()
        .map(|g| {
            pred.iter()
                .find(|p| p.doc.doc_id == g.doc.doc_id)
                .map(|p| (g, p))
                .ok_or_else(|| {
                    CliError::runtime(format!("prediction missing for doc {:?}", g.doc.doc_id))
                })
        })
        .collect()
}

fn metrics_report(
    schema: &TaskSchema,
    gold: &[AnnotatedDocument],
    pred: &[AnnotatedDocument],
) -> Result<serde_json::Value, CliError> {
    let pairs = paired(gold, pred)?;
    Ok(match schema.kind {
        TaskKind::Ner => {
            let sets: Vec<_> = pairs
                .iter()
                .map(|(g, p)| match (&g.structure, &p.structure) {
                    (TaskStructure::Ner { mentions: gm }, TaskStructure::Ner { mentions: pm }) => {
                        (gm.clone(), pm.clone())
                    }
                    _ => Default::default(),
                })
                .collect();
            let entity = entity_prf_corpus(&sets);
            json!({"task": "ner", "documents": pairs.len(), "entity": entity})
        }
        TaskKind::Ere => {
            let mut ment = Vec::new();
            let mut rel = Vec::new();
            for (g, p) in &pairs {
                if let (
                    TaskStructure::Ere {
                        mentions: gm,
                        relations: gr,
                    },
                    TaskStructure::Ere {
                        mentions: pm,
                        relations: pr,
                    },
                ) = (&g.structure, &p.structure)
                {
                    ment.push((gm.clone(), pm.clone()));
                    rel.push((gr.clone(), pr.clone()));
                }
            }
            json!({
                "task": "ere",
                "documents": pairs.len(),
                "entity": entity_prf_corpus(&ment),
                "relation": relation_prf_corpus(&rel, schema, false),
                "relation_strict": relation_prf_corpus(&rel, schema, true),
            })
        }
        TaskKind::Coref => {
            let chains: Vec<_> = pairs
                .iter()
                .map(|(g, p)| match (&g.structure, &p.structure) {
                    (
                        TaskStructure::Coref { partition: gp },
                        TaskStructure::Coref { partition: pp },
                    ) => (gp.chains().to_vec(), pp.chains().to_vec()),
                    _ => Default::default(),
                })
                .collect();
            let scores = coref_scores_corpus(&chains)?;
            json!({
                "task": "coref",
                "documents": pairs.len(),
                "muc": scores.muc,
                "b3": scores.b3,
                "ceaf_phi4": scores.ceaf_phi4,
                "avg_f1": scores.avg_f1,
            })
        }
    })
}

fn prf_line(name: &str, v: &serde_json::Value) -> String {
    let p = v["precision"].as_f64().unwrap_or(0.0);
    let r = v["recall"].as_f64().unwrap_or(0.0);
    let f = v["f1"].as_f64().unwrap_or(0.0);
    format!(
        "{name:<16} P {:>7.2}  R {:>7.2}  F1 {:>7.2}",
        p * 100.0,
        r * 100.0,
        f * 100.0
    )
}

fn metrics_table(report: &serde_json::Value) -> String {
    let mut lines = vec![format!(
        "task {}  ({} documents)",
        report["task"].as_str().unwrap_or("?"),
        report["documents"]
    )];
    for key in [
        "entity",
        "relation",
        "relation_strict",
        "muc",
        "b3",
        "ceaf_phi4",
    ] {
        if report.get(key).is_some() {
            lines.push(prf_line(key, &report[key]));
        }
    }
    if let Some(avg) = report.get("avg_f1").and_then(|v| v.as_f64()) {
        lines.push(format!("{:<16} {:>23.2}", "avg_f1", avg * 100.0));
    }
    lines.join("\n")
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let schema = load_schema(&args.schema)?;
    check_task(args.task, schema.kind)?;
    let gold = read_jsonl(&args.gold, &schema)?;
    let pred = read_jsonl(&args.pred, &schema)?;
    let report = metrics_report(&schema, &gold, &pred)?;
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&report).unwrap())?;
    }
    println!("{}", metrics_table(&report));
    Ok(())
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let schema = load_schema(&args.schema)?;
    check_task(args.task, schema.kind)?;
    if !matches!(schema.kind, TaskKind::Coref) {
        return Err(CliError::usage("analyze expects a coreference schema"));
    }
    let gold = read_jsonl(&args.gold, &schema)?;
    let pred = read_jsonl(&args.pred, &schema)?;
    let pairs = paired(&gold, &pred)?;
    let mut predicted = 0usize;
    let mut gold_total = 0usize;
    let mut matched = 0usize;
    let mut tokens = 0usize;
    for (g, p) in &pairs {
        let (TaskStructure::Coref { partition: gp }, TaskStructure::Coref { partition: pp }) =
            (&g.structure, &p.structure)
        else {
            continue;
        };
        let pred_mentions: BTreeSet<Span> = pp.mentions();
        let a = mention_analysis(gp, &pred_mentions, &g.doc)?;
        predicted += a.predicted;
        gold_total += a.gold;
        matched += a.matched;
        tokens += g.doc.len();
    }
    if tokens == 0 {
        return Err(CliError::runtime("no tokens in the gold corpus"));
    }
    let report = json!({
        "documents": pairs.len(),
        "tokens": tokens,
        "predicted_mentions": predicted,
        "gold_mentions": gold_total,
        "matched_mentions": matched,
        "mention_ratio": predicted as f64 / tokens as f64,
        "gold_mention_recall": if gold_total > 0 { matched as f64 / gold_total as f64 } else { 0.0 },
    });
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&report).unwrap())?;
    }
    println!(
        "mention ratio {:.4} ({} mentions / {} tokens); gold recall {:.4}",
        report["mention_ratio"].as_f64().unwrap(),
        predicted,
        tokens,
        report["gold_mention_recall"].as_f64().unwrap()
    );
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    // A self-contained check: tiny coreference model over a fixed document,
    // exercising every head including the link scorer.
    let doc = Document::new(
        "gradcheck",
        vec!["a".into(), "b".into(), "c".into(), "a".into(), "e".into()],
        vec![(0, 3), (3, 5)],
    )
    .expect("static document");
    let schema = TaskSchema::coref();
    let s = TaskStructure::Coref {
        partition: crate::document::CorefPartition::new(vec![
            [Span::new(0, 0), Span::new(3, 3)].into(),
            [Span::new(1, 2), Span::new(4, 4)].into(),
        ]),
    };
    let (seq, _) = linearize(&s, &doc, &schema)?;
    let alphabet = Alphabet::build([&doc]);
    let mut config = ScorerConfig::tiny();
    config.seed = args.seed;
    let model = ScorerModel::init(config, schema, alphabet)?;
    let report = gradient_check(
        &model,
        &doc,
        &seq,
        false,
        args.samples,
        args.tolerance,
        args.seed,
    )?;
    let out = serde_json::to_string_pretty(&report).unwrap();
    if let Some(path) = &args.out {
        fs::write(path, &out)?;
    }
    println!("{out}");
    if !report.pass {
        return Err(CliError::runtime(format!(
            "gradient check failed: max relative error {}",
            report.max_relative_error
        )));
    }
    Ok(())
}

fn configure_threads() {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

/// Parses arguments and runs; returns the process exit code. Usage problems
/// exit 2, runtime failures exit 1, and both leave a machine-readable error
/// record on stderr.
pub fn main_entry() -> i32 {
    configure_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let kind = if e.usage { "usage" } else { "runtime" };
            eprintln!("{}", json!({"error": e.message, "kind": kind}));
            if e.usage {
                2
            } else {
                1
            }
        }
    }
}
