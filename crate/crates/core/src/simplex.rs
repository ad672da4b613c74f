//! Softmax primitives, the double-softmax parameterizations of the topic
//! matrix Φ (V×K) and the stacked narrative matrix Ω (QA×K), and the two data
//! log-likelihoods.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{BowDataset, QaDataset};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::rng::{self, ModelRng};

/// Tolerance on the total mass of a [`Pmf`].
pub const PMF_TOLERANCE: f64 = 1e-9;

/// Probability mass function over a finite set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pmf(Vec<f64>);

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("pmf"));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Value(
                "pmf entries must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if libm::fabs(total - 1.0) > PMF_TOLERANCE {
            return Err(Error::Value(alloc::format!("pmf sums to {total}")));
        }
        Ok(Self(probs))
    }

    pub(crate) fn new_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn uniform(k: usize) -> Self {
        Self(alloc::vec![1.0 / k as f64; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest probability.
    pub fn confidence(&self) -> f64 {
        math::max(&self.0)
    }

    pub fn argmax(&self) -> usize {
        math::argmax(&self.0)
    }
}

impl AsRef<[f64]> for Pmf {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Numerically stable softmax.
pub fn softmax(v: &[f64]) -> Result<Pmf> {
    if v.is_empty() {
        return Err(Error::Empty("softmax input"));
    }
    if !math::all_finite(v) {
        return Err(Error::Value("softmax input must be finite".into()));
    }
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    Ok(Pmf(out))
}

/// Softmax over a nonempty finite slice, in place.
pub fn softmax_in_place(v: &mut [f64]) {
    let m = math::max(v);
    let mut z = 0.0;
    for x in v.iter_mut() {
        *x = math::exp(*x - m);
        z += *x;
    }
    for x in v.iter_mut() {
        *x /= z;
    }
}

/// Row-wise softmax of a matrix of logits.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        softmax_in_place(out.row_mut(i));
    }
    out
}

/// Column-wise softmax of a matrix of logits.
pub fn softmax_cols(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    softmax_cols_block(&mut out, 0, logits.rows());
    out
}

fn softmax_cols_block(m: &mut Matrix, start: usize, len: usize) {
    let mut col = Vec::with_capacity(len);
    for k in 0..m.cols() {
        col.clear();
        col.extend((start..start + len).map(|r| m[(r, k)]));
        softmax_in_place(&mut col);
        for (off, &p) in col.iter().enumerate() {
            m[(start + off, k)] = p;
        }
    }
}

/// Topic logits: column `k` holds φ_k ∈ R^V.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicParams {
    pub logits: Matrix,
}

impl TopicParams {
    pub fn new(logits: Matrix) -> Result<Self> {
        if logits.cols() == 0 || logits.rows() == 0 {
            return Err(Error::Empty("topic logits"));
        }
        if !logits.is_finite() {
            return Err(Error::Value("topic logits must be finite".into()));
        }
        Ok(Self { logits })
    }

    pub fn random(vocab: usize, topics: usize, std_dev: f64, rng: &mut ModelRng) -> Self {
        let data = rng::normal_vec(rng, vocab * topics, std_dev);
        Self {
            logits: Matrix::from_vec(vocab, topics, data).expect("sized"),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.logits.rows()
    }

    pub fn num_topics(&self) -> usize {
        self.logits.cols()
    }
}

/// Narrative logits ω_k^(q) stacked question-major into a (Q·A)×K matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrativeParams {
    pub questions: usize,
    pub answers: usize,
    pub logits: Matrix,
}

impl NarrativeParams {
    pub fn new(questions: usize, answers: usize, logits: Matrix) -> Result<Self> {
        if questions == 0 || answers == 0 || logits.cols() == 0 {
            return Err(Error::Empty("narrative logits"));
        }
        if logits.rows() != questions * answers {
            return Err(Error::dim(
                "narrative logits rows",
                questions * answers,
                logits.rows(),
            ));
        }
        if !logits.is_finite() {
            return Err(Error::Value("narrative logits must be finite".into()));
        }
        Ok(Self {
            questions,
            answers,
            logits,
        })
    }

    pub fn random(
        questions: usize,
        answers: usize,
        narratives: usize,
        std_dev: f64,
        rng: &mut ModelRng,
    ) -> Self {
        let data = rng::normal_vec(rng, questions * answers * narratives, std_dev);
        Self {
            questions,
            answers,
            logits: Matrix::from_vec(questions * answers, narratives, data).expect("sized"),
        }
    }

    pub fn num_narratives(&self) -> usize {
        self.logits.cols()
    }
}

/// Φ: column-stochastic V×K matrix.
pub fn topic_matrix(p: &TopicParams) -> Matrix {
    softmax_cols(&p.logits)
}

/// Ω with each question's A×K block column-stochastic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrativeMatrix {
    questions: usize,
    answers: usize,
    probs: Matrix,
}

impl NarrativeMatrix {
    /// Wraps already-normalized probabilities, checking every column.
    pub fn from_probs(questions: usize, answers: usize, probs: Matrix) -> Result<Self> {
        if probs.rows() != questions * answers {
            return Err(Error::dim(
                "narrative rows",
                questions * answers,
                probs.rows(),
            ));
        }
        for q in 0..questions {
            for k in 0..probs.cols() {
                let col: Vec<f64> = (0..answers).map(|a| probs[(q * answers + a, k)]).collect();
                Pmf::new(col)?;
            }
        }
        Ok(Self {
            questions,
            answers,
            probs,
        })
    }

    pub fn questions(&self) -> usize {
        self.questions
    }

    pub fn answers(&self) -> usize {
        self.answers
    }

    pub fn num_narratives(&self) -> usize {
        self.probs.cols()
    }

    /// Stacked (Q·A)×K matrix.
    pub fn stacked(&self) -> &Matrix {
        &self.probs
    }

    /// Row Ω^(q)_{a,:}.
    #[inline]
    pub fn row(&self, q: usize, a: usize) -> &[f64] {
        self.probs.row(q * self.answers + a)
    }

    /// Column k of Ω^(q), a PMF over answers.
    pub fn column(&self, q: usize, k: usize) -> Vec<f64> {
        (0..self.answers).map(|a| self.row(q, a)[k]).collect()
    }

    /// The A×K block of one question.
    pub fn question(&self, q: usize) -> Matrix {
        Matrix::from_fn(self.answers, self.num_narratives(), |a, k| {
            self.row(q, a)[k]
        })
    }

    /// Answer distribution Ω^(q)·g for every question.
    pub fn answer_pmfs(&self, g: &[f64]) -> Vec<Pmf> {
        (0..self.questions)
            .map(|q| {
                let probs = (0..self.answers)
                    .map(|a| math::dot(self.row(q, a), g))
                    .collect();
                Pmf(probs)
            })
            .collect()
    }

    /// Keeps only the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let probs = Matrix::from_fn(self.probs.rows(), cols.len(), |r, j| {
            self.probs[(r, cols[j])]
        });
        Self {
            questions: self.questions,
            answers: self.answers,
            probs,
        }
    }
}

pub fn narrative_matrix(p: &NarrativeParams) -> NarrativeMatrix {
    let mut probs = p.logits.clone();
    for q in 0..p.questions {
        softmax_cols_block(&mut probs, q * p.answers, p.answers);
    }
    NarrativeMatrix {
        questions: p.questions,
        answers: p.answers,
        probs,
    }
}

/// Log-likelihood value plus the number of terms that hit the probability floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLikelihood {
    pub value: f64,
    pub floored: usize,
}

/// Per-document bag-of-words term Σ_v (n_v/M) log(Φ_{v,:}·f).
pub fn bow_doc_log_likelihood(
    counts: &[(usize, u64)],
    total: u64,
    phi: &Matrix,
    f: &[f64],
) -> (f64, usize) {
    let m = total as f64;
    let mut acc = 0.0;
    let mut floored = 0;
    for &(v, n) in counts {
        let (l, hit) = math::floored_ln(math::dot(phi.row(v), f));
        floored += hit as usize;
        acc += (n as f64 / m) * l;
    }
    (acc, floored)
}

/// Per-document Q&A term (1/Q) Σ_q log(Ω^(q)_{y_q,:}·g).
pub fn qa_doc_log_likelihood(
    answers: &[usize],
    omega: &NarrativeMatrix,
    g: &[f64],
) -> (f64, usize) {
    let mut acc = 0.0;
    let mut floored = 0;
    for (q, &y) in answers.iter().enumerate() {
        let (l, hit) = math::floored_ln(math::dot(omega.row(q, y), g));
        floored += hit as usize;
        acc += l;
    }
    (acc / answers.len() as f64, floored)
}

/// Average bag-of-words log-likelihood; `mix` holds one PMF f_i per row.
pub fn bow_log_likelihood(bow: &BowDataset, phi: &Matrix, mix: &Matrix) -> Result<LogLikelihood> {
    if phi.rows() != bow.vocab_size() {
        return Err(Error::dim(
            "topic matrix rows",
            bow.vocab_size(),
            phi.rows(),
        ));
    }
    if mix.rows() != bow.len() {
        return Err(Error::dim("topic mixtures", bow.len(), mix.rows()));
    }
    if mix.cols() != phi.cols() {
        return Err(Error::dim("topic count", phi.cols(), mix.cols()));
    }
    let mut value = 0.0;
    let mut floored = 0;
    for (i, doc) in bow.docs().iter().enumerate() {
        let (l, hits) = bow_doc_log_likelihood(&doc.counts, doc.total, phi, mix.row(i));
        value += l;
        floored += hits;
    }
    Ok(LogLikelihood {
        value: value / bow.len() as f64,
        floored,
    })
}

/// Average Q&A log-likelihood; `mix` holds one PMF g_i per row.
pub fn qa_log_likelihood(
    qa: &QaDataset,
    omega: &NarrativeMatrix,
    mix: &Matrix,
) -> Result<LogLikelihood> {
    if omega.questions() != qa.num_questions() || omega.answers() != qa.num_answers() {
        return Err(Error::dim(
            "narrative matrix rows",
            qa.num_questions() * qa.num_answers(),
            omega.questions() * omega.answers(),
        ));
    }
    if mix.rows() != qa.len() {
        return Err(Error::dim("narrative mixtures", qa.len(), mix.rows()));
    }
    if mix.cols() != omega.num_narratives() {
        return Err(Error::dim(
            "narrative count",
            omega.num_narratives(),
            mix.cols(),
        ));
    }
    let mut value = 0.0;
    let mut floored = 0;
    for (i, rec) in qa.records().iter().enumerate() {
        let (l, hits) = qa_doc_log_likelihood(&rec.answers, omega, mix.row(i));
        value += l;
        floored += hits;
    }
    Ok(LogLikelihood {
        value: value / qa.len() as f64,
        floored,
    })
}
