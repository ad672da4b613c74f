use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use narrative_core::corpus::{BowDataset, EmbeddingSet, QaDataset};
use narrative_core::eval::{self, Recovery};
use narrative_core::icl::{self, IclContext, IclTargets};
use narrative_core::rng::RNG_NAME;
use narrative_core::synth;
use narrative_core::trainer::{self, FittedModel, TrainingData};
use serde::Serialize;

use crate::cli::{EvalArgs, FitArgs, IclArgs, SynthArgs};
use crate::config::RunConfig;
use crate::error::{CliError, Context, Result};
use crate::io::{self, Truth};
use crate::provider::{QaProvider, ReplayProvider};
use crate::table::Table;

/// Provenance written next to every command's outputs.
#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'static str,
    tool_version: &'static str,
    rng: &'static str,
    config: &'a RunConfig,
    inputs: BTreeMap<&'static str, String>,
    outputs: Vec<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<u128>,
}

impl<'a> Manifest<'a> {
    fn new(command: &'static str, config: &'a RunConfig) -> Self {
        Self {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            rng: RNG_NAME,
            config,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            elapsed_ms: None,
        }
    }

    fn input(&mut self, name: &'static str, path: Option<&Path>) {
        if let Some(p) = path {
            self.inputs.insert(name, p.display().to_string());
        }
    }

    fn write(mut self, dir: &Path, started: Instant) -> Result<()> {
        if !self.config.deterministic {
            self.elapsed_ms = Some(started.elapsed().as_millis());
        }
        io::write_json(&dir.join("manifest.json"), &self)
    }
}

pub fn synth(cfg: &RunConfig, args: &SynthArgs) -> Result<()> {
    let started = Instant::now();
    io::create_dir(&args.out)?;
    let s = &cfg.synth;
    let truth = synth::generate(s).context("synthetic generation")?;
    let mut manifest = Manifest::new("synth", cfg);
    io::write_qa(&args.out.join("qa.jsonl"), &truth.answers)?;
    io::write_truth(
        &args.out.join("truth.jsonl"),
        &Truth::from_synth(&truth, s.alpha, s.beta, s.seed),
    )?;
    manifest.outputs = vec!["qa.jsonl", "truth.jsonl"];
    if cfg.embedding.dim > 0 {
        let emb = synth::embed_mixtures(&truth, cfg.embedding.dim, cfg.embedding.noise, s.seed)
            .context("synthetic embeddings")?;
        io::write_embeddings(&args.out.join("embeddings.jsonl"), &emb)?;
        manifest.outputs.push("embeddings.jsonl");
    }
    info!("wrote {} documents to {}", s.docs, args.out.display());
    manifest.write(&args.out, started)
}

fn load_optional<T>(
    path: Option<&PathBuf>,
    read: impl Fn(&Path) -> Result<T>,
) -> Result<Option<T>> {
    path.map(|p| read(p)).transpose()
}

pub fn fit(cfg: &RunConfig, args: &FitArgs) -> Result<()> {
    let started = Instant::now();
    let bow: Option<BowDataset> = load_optional(args.bow.as_ref(), io::read_bow)?;
    let qa: Option<QaDataset> = load_optional(args.qa.as_ref(), io::read_qa)?;
    let emb: Option<EmbeddingSet> = load_optional(args.embeddings.as_ref(), io::read_embeddings)?;
    if bow.is_none() && qa.is_none() {
        return Err(CliError::Config("fit needs --qa, --bow, or both".into()));
    }
    let truth = load_optional(args.truth.as_ref(), io::read_truth)?;
    let (data, report) =
        TrainingData::align(bow.as_ref(), qa.as_ref(), emb.as_ref()).context("aligning inputs")?;
    for (source, dropped) in [
        ("bag-of-words", &report.dropped_bow),
        ("Q&A", &report.dropped_qa),
        ("embeddings", &report.dropped_embeddings),
    ] {
        if !dropped.is_empty() {
            warn!(
                "{} {source} documents are missing from another input and were dropped",
                dropped.len()
            );
        }
    }
    info!(
        "fitting {} documents for {} rounds",
        data.len(),
        cfg.train.steps
    );
    let model = trainer::fit_joint(&data, &cfg.train).context("fitting")?;

    io::create_dir(&args.out)?;
    io::write_json(&args.out.join("model.json"), &model)?;
    trace_table(&model).write(&args.out.join("trace.csv"))?;
    let mut outputs = vec!["model.json", "trace.csv", "metrics.csv"];
    match &truth {
        Some(t) => {
            let rec = recovery(&model, t)?;
            recovery_table(&model, Some(t), Some(&rec)).write(&args.out.join("metrics.csv"))?;
            alignment_table(&model, t, &rec)?.write(&args.out.join("alignment.csv"))?;
            outputs.push("alignment.csv");
        }
        None => recovery_table(&model, None, None).write(&args.out.join("metrics.csv"))?,
    }
    let mut manifest = Manifest::new("fit", cfg);
    manifest.input("bow", args.bow.as_deref());
    manifest.input("qa", args.qa.as_deref());
    manifest.input("embeddings", args.embeddings.as_deref());
    manifest.input("truth", args.truth.as_deref());
    manifest.outputs = outputs;
    manifest.write(&args.out, started)
}

fn trace_table(model: &FittedModel) -> Table {
    let mut t = Table::new(&[
        "round",
        "bow_log_likelihood_nats",
        "qa_log_likelihood_nats",
        "bow_floored",
        "qa_floored",
    ]);
    for r in &model.manifest.rounds {
        t.row(vec![
            r.round.to_string(),
            opt(r.bow_log_likelihood),
            opt(r.qa_log_likelihood),
            r.bow_floored.to_string(),
            r.qa_floored.to_string(),
        ]);
    }
    t
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn recovery(model: &FittedModel, truth: &Truth) -> Result<Recovery> {
    let omega = model
        .narrative_matrix()
        .ok_or_else(|| CliError::Data("the model has no narrative component".into()))?;
    let mix = model
        .narrative_mixtures
        .as_ref()
        .expect("narratives imply mixtures");
    let mix_true = truth.mixtures_for(model.index.ids())?;
    eval::recovery(&truth.omega, &mix_true, &omega, mix).context("recovery metrics")
}

pub const RECOVERY_COLUMNS: [&str; 11] = [
    "seed",
    "data_seed",
    "alpha",
    "beta",
    "k_true",
    "k_est",
    "bow_log_likelihood_nats",
    "qa_log_likelihood_nats",
    "mean_cosine",
    "rand_index",
    "alignment_cost",
];

fn recovery_table(model: &FittedModel, truth: Option<&Truth>, rec: Option<&Recovery>) -> Table {
    let mut t = Table::new(&RECOVERY_COLUMNS);
    let h = truth.map(|t| &t.header);
    t.row(vec![
        model.config.seed.to_string(),
        h.map(|h| h.seed.to_string()).unwrap_or_default(),
        h.map(|h| h.alpha.to_string()).unwrap_or_default(),
        h.map(|h| h.beta.to_string()).unwrap_or_default(),
        h.map(|h| h.narratives.to_string()).unwrap_or_default(),
        model
            .narratives
            .as_ref()
            .map(|n| n.num_narratives().to_string())
            .unwrap_or_default(),
        opt(model.manifest.final_bow_log_likelihood),
        opt(model.manifest.final_qa_log_likelihood),
        opt(rec.map(|r| r.mean_cosine)),
        opt(rec.map(|r| r.rand_index)),
        opt(rec.map(|r| r.alignment.cost)),
    ]);
    t
}

fn alignment_table(model: &FittedModel, truth: &Truth, rec: &Recovery) -> Result<Table> {
    let est = model.narrative_matrix().expect("checked by recovery");
    let mut t = Table::new(&["true_narrative", "estimated_narrative", "cost"]);
    for (j, &k) in rec.alignment.assignment.iter().enumerate() {
        let mut cost = 0.0;
        for q in 0..est.questions() {
            cost += 1.0
                - eval::cosine_similarity(&truth.omega.column(q, j), &est.column(q, k))
                    .context("alignment cost")?;
        }
        t.row(vec![j.to_string(), k.to_string(), cost.to_string()]);
    }
    for &k in &rec.alignment.unmatched {
        t.row(vec![String::new(), k.to_string(), String::new()]);
    }
    Ok(t)
}

pub fn icl(cfg: &RunConfig, args: &IclArgs) -> Result<()> {
    let started = Instant::now();
    let emb = io::read_embeddings(&args.embeddings)?;
    let qa = io::read_qa(&args.qa)?;
    let context_ids: Vec<String> = match cfg.few_shot.context_size {
        Some(size) => {
            let answered: Vec<String> = qa
                .ids()
                .filter(|id| emb.get(id).is_some())
                .map(String::from)
                .collect();
            synth::context_split(&answered, size, cfg.icl.seed)
                .context("context split")?
                .0
        }
        None => qa.ids().map(String::from).collect(),
    };
    let context_qa = qa.select_ids(&context_ids).context("context answers")?;
    let context = IclContext::new(&emb, &context_qa).context("context")?;
    let targets = IclTargets::complement(&emb, &context).context("targets")?;
    info!(
        "fitting on {} context documents, predicting {}",
        context.len(),
        targets.len()
    );
    let model = icl::fit_icl(context, &cfg.icl).context("in-context fitting")?;

    let preds = if targets.is_empty() {
        warn!("no targets: every embedded document is in the context");
        icl::PredictedAnswers::default()
    } else {
        icl::icl_forward(&model, &targets).context("prediction")?
    };
    let (selected, clamped) = icl::select_low_confidence(&preds, cfg.few_shot.select);
    if clamped {
        warn!(
            "asked for {} documents but only {} targets exist",
            cfg.few_shot.select,
            preds.len()
        );
    }

    io::create_dir(&args.out)?;
    io::write_json(&args.out.join("icl_model.json"), &model)?;
    io::write_predictions(&args.out.join("predictions.jsonl"), &preds)?;
    io::write_lines(&args.out.join("selection.txt"), &selected)?;
    let mut training = Table::new(&["step", "context_cross_entropy_nats"]);
    for (i, ce) in model.training_ce.iter().enumerate() {
        training.row(vec![i.to_string(), ce.to_string()]);
    }
    training.write(&args.out.join("training.csv"))?;
    let mut manifest = Manifest::new("icl", cfg);
    manifest.input("embeddings", Some(&args.embeddings));
    manifest.input("qa", Some(&args.qa));
    manifest.outputs = vec![
        "icl_model.json",
        "predictions.jsonl",
        "selection.txt",
        "training.csv",
    ];
    if let Some(source) = &args.replay {
        manifest.input("replay", Some(source));
        let acquired = ReplayProvider::open(source)?.answers(&selected)?;
        io::write_qa(&args.out.join("acquired_qa.jsonl"), &acquired)?;
        manifest.outputs.push("acquired_qa.jsonl");
    }
    manifest.write(&args.out, started)
}

pub fn eval(cfg: &RunConfig, args: &EvalArgs) -> Result<()> {
    let started = Instant::now();
    let mut manifest = Manifest::new("eval", cfg);
    io::create_dir(&args.out)?;
    match (&args.model, &args.truth, &args.predictions, &args.qa) {
        (Some(model_path), Some(truth_path), None, None) => {
            let model: FittedModel = io::read_json(model_path)?;
            let truth = io::read_truth(truth_path)?;
            let rec = recovery(&model, &truth)?;
            recovery_table(&model, Some(&truth), Some(&rec))
                .write(&args.out.join("metrics.csv"))?;
            alignment_table(&model, &truth, &rec)?.write(&args.out.join("alignment.csv"))?;
            manifest.input("model", Some(model_path));
            manifest.input("truth", Some(truth_path));
            manifest.outputs = vec!["metrics.csv", "alignment.csv"];
        }
        (None, _, Some(pred_path), Some(qa_path)) => {
            let preds = io::read_predictions(pred_path)?;
            let qa = io::read_qa(qa_path)?;
            if preds.is_empty() {
                return Err(CliError::Data(format!(
                    "{} holds no predictions",
                    pred_path.display()
                )));
            }
            let ce = eval::cross_entropy(&preds, &qa).context("cross-entropy")?;
            let mut metrics = Table::new(&["documents", "questions", "cross_entropy_nats"]);
            metrics.row(vec![
                preds.len().to_string(),
                qa.num_questions().to_string(),
                ce.to_string(),
            ]);
            metrics.write(&args.out.join("metrics.csv"))?;
            let curve = eval::calibration(&preds, &qa, cfg.eval.bins).context("calibration")?;
            let mut cal = Table::new(&[
                "bin_lower",
                "bin_upper",
                "count",
                "mean_confidence",
                "accuracy",
            ]);
            for b in &curve.bins {
                cal.row(vec![
                    b.lower.to_string(),
                    b.upper.to_string(),
                    b.count.to_string(),
                    b.mean_confidence.to_string(),
                    b.accuracy.to_string(),
                ]);
            }
            cal.write(&args.out.join("calibration.csv"))?;
            manifest.input("predictions", Some(pred_path));
            manifest.input("qa", Some(qa_path));
            manifest.outputs = vec!["metrics.csv", "calibration.csv"];
        }
        _ => {
            return Err(CliError::Config(
                "eval needs either --model with --truth, or --predictions with --qa".into(),
            ))
        }
    }
    manifest.write(&args.out, started)
}
