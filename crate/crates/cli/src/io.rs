//! Line-delimited JSON readers and writers.
//!
//! Bag-of-words files start with `{"vocab":[...]}` and continue with
//! `{"doc_id":..,"counts":{"<word index>":n,..}}`. Q&A files start with
//! `{"Q":q,"A":a}` and continue with `{"doc_id":..,"answers":[..]}` using
//! 1-based answers. Embedding files hold `{"doc_id":..,"vec":[..]}` rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use narrative_core::corpus::{BowDataset, EmbeddingSet, QaDataset};
use narrative_core::icl::{DocPrediction, PredictedAnswers};
use narrative_core::simplex::{NarrativeMatrix, Pmf};
use narrative_core::synth::SynthTruth;
use narrative_core::Matrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Context, Result};

struct Lines {
    path: PathBuf,
    lines: Vec<(usize, String)>,
}

impl Lines {
    fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.to_owned()))
            .collect();
        Ok(Self {
            path: path.to_owned(),
            lines,
        })
    }

    fn error(&self, line: usize, message: impl Into<String>) -> CliError {
        CliError::Format {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn parse<T: DeserializeOwned>(&self, line: usize, text: &str) -> Result<T> {
        serde_json::from_str(text).map_err(|e| self.error(line, e.to_string()))
    }

    /// Splits off the header line, which must be present.
    fn header<T: DeserializeOwned>(&self) -> Result<(T, &[(usize, String)])> {
        let ((line, text), rest) = self
            .lines
            .split_first()
            .ok_or_else(|| self.error(1, "missing header line"))?;
        Ok((self.parse(*line, text)?, rest))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable value")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BowHeader {
    vocab: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BowLine {
    doc_id: String,
    counts: BTreeMap<String, u64>,
}

pub fn read_bow(path: &Path) -> Result<BowDataset> {
    let lines = Lines::read(path)?;
    let (header, rest): (BowHeader, _) = lines.header()?;
    let mut docs = Vec::with_capacity(rest.len());
    for (line, text) in rest {
        let rec: BowLine = lines.parse(*line, text)?;
        let mut counts = Vec::with_capacity(rec.counts.len());
        for (key, n) in rec.counts {
            let w: usize = key.parse().map_err(|_| {
                lines.error(
                    *line,
                    format!("word index `{key}` is not a nonnegative integer"),
                )
            })?;
            counts.push((w, n));
        }
        counts.sort_unstable();
        docs.push((rec.doc_id, counts));
    }
    BowDataset::new(header.vocab, docs).context(format!("{}", path.display()))
}

pub fn write_bow(path: &Path, bow: &BowDataset) -> Result<()> {
    let mut out = format!("{{\"vocab\":{}}}\n", json(bow.vocab()));
    for doc in bow.docs() {
        let counts: Vec<String> = doc
            .counts
            .iter()
            .map(|(w, n)| format!("\"{w}\":{n}"))
            .collect();
        writeln!(
            out,
            "{{\"doc_id\":{},\"counts\":{{{}}}}}",
            json(&doc.doc_id),
            counts.join(",")
        )
        .unwrap();
    }
    write_file(path, &out)
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct QaHeader {
    #[serde(rename = "Q")]
    questions: usize,
    #[serde(rename = "A")]
    answers: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QaLine {
    doc_id: String,
    answers: Vec<i64>,
}

pub fn read_qa(path: &Path) -> Result<QaDataset> {
    let lines = Lines::read(path)?;
    let (header, rest): (QaHeader, _) = lines.header()?;
    let mut records = Vec::with_capacity(rest.len());
    for (line, text) in rest {
        let rec: QaLine = lines.parse(*line, text)?;
        records.push((rec.doc_id, rec.answers));
    }
    QaDataset::from_one_based(header.questions, header.answers, records)
        .context(format!("{}", path.display()))
}

pub fn write_qa(path: &Path, qa: &QaDataset) -> Result<()> {
    let header = QaHeader {
        questions: qa.num_questions(),
        answers: qa.num_answers(),
    };
    let mut out = json(&header) + "\n";
    for rec in qa.records() {
        let one_based: Vec<usize> = rec.answers.iter().map(|a| a + 1).collect();
        writeln!(
            out,
            "{{\"doc_id\":{},\"answers\":{}}}",
            json(&rec.doc_id),
            json(&one_based)
        )
        .unwrap();
    }
    write_file(path, &out)
}

/// Numbers, or the strings `NaN`/`inf`/`-inf`, which parse and are then
/// rejected as non-finite.
#[derive(Deserialize)]
#[serde(untagged)]
enum Number {
    Num(f64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingLine {
    doc_id: String,
    vec: Vec<Number>,
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let lines = Lines::read(path)?;
    let mut entries = Vec::with_capacity(lines.lines.len());
    for (line, text) in &lines.lines {
        let rec: EmbeddingLine = lines.parse(*line, text)?;
        let mut v = Vec::with_capacity(rec.vec.len());
        for x in rec.vec {
            v.push(match x {
                Number::Num(x) => x,
                Number::Text(s) => s
                    .parse::<f64>()
                    .map_err(|_| lines.error(*line, format!("`{s}` is not a number")))?,
            });
        }
        entries.push((rec.doc_id, v));
    }
    EmbeddingSet::new(entries).context(format!("{}", path.display()))
}

pub fn write_embeddings(path: &Path, emb: &EmbeddingSet) -> Result<()> {
    let mut out = String::new();
    for (id, v) in emb.iter() {
        writeln!(out, "{{\"doc_id\":{},\"vec\":{}}}", json(id), json(v)).unwrap();
    }
    write_file(path, &out)
}

/// Generating parameters and planted narratives, stored as the truth header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthHeader {
    #[serde(rename = "Q")]
    pub questions: usize,
    #[serde(rename = "A")]
    pub answers: usize,
    #[serde(rename = "K")]
    pub narratives: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    /// Stacked (Q·A)×K narrative matrix, one row per (question, answer).
    pub omega: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthLine {
    doc_id: String,
    g: Vec<f64>,
}

/// Planted narratives and per-document mixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub header: TruthHeader,
    pub omega: NarrativeMatrix,
    pub ids: Vec<String>,
    /// One true mixture per row, in the order of `ids`.
    pub mixtures: Matrix,
}

impl Truth {
    pub fn from_synth(truth: &SynthTruth, alpha: f64, beta: f64, seed: u64) -> Self {
        let omega = truth.omega.clone();
        let stacked = omega.stacked();
        Self {
            header: TruthHeader {
                questions: omega.questions(),
                answers: omega.answers(),
                narratives: omega.num_narratives(),
                alpha,
                beta,
                seed,
                omega: (0..stacked.rows())
                    .map(|r| stacked.row(r).to_vec())
                    .collect(),
            },
            ids: truth.answers.ids().map(String::from).collect(),
            mixtures: truth.mixtures.clone(),
            omega,
        }
    }

    /// True mixtures for `ids`, in that order.
    pub fn mixtures_for(&self, ids: &[String]) -> Result<Matrix> {
        let pos: BTreeMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut out = Matrix::zeros(ids.len(), self.mixtures.cols());
        for (r, id) in ids.iter().enumerate() {
            let i = *pos
                .get(id.as_str())
                .ok_or_else(|| CliError::Data(format!("document `{id}` has no true mixture")))?;
            out.row_mut(r).copy_from_slice(self.mixtures.row(i));
        }
        Ok(out)
    }
}

pub fn write_truth(path: &Path, truth: &Truth) -> Result<()> {
    let mut out = json(&truth.header) + "\n";
    for (i, id) in truth.ids.iter().enumerate() {
        let line = TruthLine {
            doc_id: id.clone(),
            g: truth.mixtures.row(i).to_vec(),
        };
        out += &json(&line);
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_truth(path: &Path) -> Result<Truth> {
    let lines = Lines::read(path)?;
    let (header, rest): (TruthHeader, _) = lines.header()?;
    let (q, a, k) = (header.questions, header.answers, header.narratives);
    if header.omega.len() != q * a || header.omega.iter().any(|r| r.len() != k) {
        return Err(lines.error(1, format!("omega must be {}x{k}", q * a)));
    }
    let stacked = Matrix::from_rows(&header.omega).context("truth omega")?;
    let omega =
        NarrativeMatrix::from_probs(q, a, stacked).context(format!("{}", path.display()))?;
    let mut ids = Vec::with_capacity(rest.len());
    let mut mixtures = Matrix::zeros(rest.len(), k);
    for (r, (line, text)) in rest.iter().enumerate() {
        let rec: TruthLine = lines.parse(*line, text)?;
        Pmf::new(rec.g.clone()).map_err(|e| lines.error(*line, e.to_string()))?;
        if rec.g.len() != k {
            return Err(lines.error(
                *line,
                format!("expected {k} mixture weights, got {}", rec.g.len()),
            ));
        }
        mixtures.row_mut(r).copy_from_slice(&rec.g);
        ids.push(rec.doc_id);
    }
    Ok(Truth {
        header,
        omega,
        ids,
        mixtures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionLine {
    doc_id: String,
    g: Vec<f64>,
    answers: Vec<Vec<f64>>,
    confidences: Vec<f64>,
}

pub fn write_predictions(path: &Path, preds: &PredictedAnswers) -> Result<()> {
    let mut out = String::new();
    for d in &preds.docs {
        let line = PredictionLine {
            doc_id: d.doc_id.clone(),
            g: d.narrative.probs().to_vec(),
            answers: d.answers.iter().map(|p| p.probs().to_vec()).collect(),
            confidences: d.confidences.clone(),
        };
        out += &json(&line);
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_predictions(path: &Path) -> Result<PredictedAnswers> {
    let lines = Lines::read(path)?;
    let mut docs = Vec::with_capacity(lines.lines.len());
    for (line, text) in &lines.lines {
        let rec: PredictionLine = lines.parse(*line, text)?;
        let pmf = |v: Vec<f64>| Pmf::new(v).map_err(|e| lines.error(*line, e.to_string()));
        let answers = rec
            .answers
            .into_iter()
            .map(pmf)
            .collect::<Result<Vec<_>>>()?;
        docs.push(DocPrediction {
            doc_id: rec.doc_id,
            narrative: pmf(rec.g)?,
            answers,
            confidences: rec.confidences,
        });
    }
    Ok(PredictedAnswers { docs })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_file(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format {
        path: path.to_owned(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out += l;
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
