//! Synthetic Q&A data with planted narratives.
//!
//! For every question, each true narrative boosts one answer (distinct across
//! narratives, drawn without replacement) by a factor `α` over an otherwise
//! flat column. Documents draw a narrative mixture from a symmetric
//! Dirichlet(β) and answer each question from the mixed answer distribution.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingSet, QaDataset, QaRecord};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{self, ModelRng};
use crate::simplex::NarrativeMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub narratives: usize,
    pub answers: usize,
    pub questions: usize,
    pub docs: usize,
    /// Boost of the favoured answer, `> 1`.
    pub alpha: f64,
    /// Dirichlet concentration of the per-document mixtures, `> 0`.
    pub beta: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            narratives: 3,
            answers: 4,
            questions: 25,
            docs: 1000,
            alpha: 10.0,
            beta: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!(
                "alpha must exceed 1, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if self.narratives == 0 || self.questions == 0 || self.docs == 0 {
            return Err(Error::Config(
                "narratives, questions and docs must be positive".into(),
            ));
        }
        if self.narratives > self.answers {
            return Err(Error::Config(format!(
                "cannot plant {} narratives with distinct boosted answers among {} answers",
                self.narratives, self.answers
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub omega: NarrativeMatrix,
    /// N×K, row i = g_i.
    pub mixtures: Matrix,
    pub answers: QaDataset,
}

/// Formats the synthetic document id for index `i`, zero padded so that
/// lexicographic order matches generation order.
pub fn doc_id(i: usize, total: usize) -> String {
    let width = format!("{}", total.saturating_sub(1)).len().max(1);
    format!("doc{:0width$}", i, width = width)
}

/// Column `[1, …, α, …, 1] / (A − 1 + α)` with the boost at `boosted`.
pub fn boosted_column(answers: usize, alpha: f64, boosted: usize) -> Vec<f64> {
    let z = answers as f64 - 1.0 + alpha;
    (0..answers)
        .map(|a| if a == boosted { alpha / z } else { 1.0 / z })
        .collect()
}

/// Ground-truth narrative matrix.
pub fn gen_omega(cfg: &SynthConfig, rng: &mut ModelRng) -> Result<NarrativeMatrix> {
    cfg.validate()?;
    let (q_count, a, k) = (cfg.questions, cfg.answers, cfg.narratives);
    let mut probs = Matrix::zeros(q_count * a, k);
    for q in 0..q_count {
        let boosted = rng::sample_without_replacement(rng, a, k);
        for (col, &b) in boosted.iter().enumerate() {
            for (r, p) in boosted_column(a, cfg.alpha, b).into_iter().enumerate() {
                probs[(q * a + r, col)] = p;
            }
        }
    }
    NarrativeMatrix::from_probs(q_count, a, probs)
}

/// Samples mixtures and answers. `forced_mixture`, when given, replaces the
/// Dirichlet draw for every document.
pub fn gen_docs(
    omega: &NarrativeMatrix,
    cfg: &SynthConfig,
    forced_mixture: Option<&[f64]>,
    rng: &mut ModelRng,
) -> Result<SynthTruth> {
    cfg.validate()?;
    let k = omega.num_narratives();
    if let Some(g) = forced_mixture {
        crate::simplex::Pmf::new(g.to_vec())?;
        if g.len() != k {
            return Err(Error::dim("forced mixture", k, g.len()));
        }
    }
    let mut mixtures = Matrix::zeros(cfg.docs, k);
    let mut records = Vec::with_capacity(cfg.docs);
    for i in 0..cfg.docs {
        let g = match forced_mixture {
            Some(g) => g.to_vec(),
            None => rng::dirichlet(rng, cfg.beta, k),
        };
        let answers = omega
            .answer_pmfs(&g)
            .iter()
            .map(|p| rng::categorical(rng, p.probs()))
            .collect();
        mixtures.row_mut(i).copy_from_slice(&g);
        records.push(QaRecord {
            doc_id: doc_id(i, cfg.docs),
            answers,
        });
    }
    Ok(SynthTruth {
        omega: omega.clone(),
        mixtures,
        answers: QaDataset::new(omega.questions(), omega.answers(), records)?,
    })
}

/// Narratives then documents, from one seeded stream.
pub fn generate(cfg: &SynthConfig) -> Result<SynthTruth> {
    let mut rng = rng::seeded(cfg.seed);
    let omega = gen_omega(cfg, &mut rng)?;
    gen_docs(&omega, cfg, None, &mut rng)
}

/// Stream index of the embedding draws, disjoint from [`generate`]'s stream.
pub const EMBEDDING_STREAM: u64 = 1;

/// Noisy linear images of the true mixtures: `x̃_i = Pᵀ g_i + noise·ε_i`
/// with `P` a K×`dim` standard normal matrix and `ε_i` standard normal.
pub fn embed_mixtures(
    truth: &SynthTruth,
    dim: usize,
    noise: f64,
    seed: u64,
) -> Result<EmbeddingSet> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::Config(format!(
            "embedding noise must be finite and nonnegative, got {noise}"
        )));
    }
    let mut rng = rng::derived(seed, EMBEDDING_STREAM);
    let k = truth.mixtures.cols();
    let proj = Matrix::from_vec(k, dim, rng::normal_vec(&mut rng, k * dim, 1.0))?;
    let clean = truth.mixtures.matmul(&proj)?;
    let entries = truth
        .answers
        .records()
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let x = clean
                .row(i)
                .iter()
                .map(|&c| rng::normal(&mut rng, c, noise))
                .collect();
            (rec.doc_id.clone(), x)
        })
        .collect();
    EmbeddingSet::new(entries)
}

/// Stream index of the context/target split.
pub const SPLIT_STREAM: u64 = 2;

/// Splits `ids` into `size` context documents, drawn uniformly without
/// replacement, and the remaining targets. Both lists keep the input order.
pub fn context_split(ids: &[String], size: usize, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    if size > ids.len() {
        return Err(Error::Config(format!(
            "context size {size} exceeds {} documents",
            ids.len()
        )));
    }
    let mut rng = rng::derived(seed, SPLIT_STREAM);
    let mut chosen = alloc::vec![false; ids.len()];
    for i in rng::sample_without_replacement(&mut rng, ids.len(), size) {
        chosen[i] = true;
    }
    let (mut context, mut targets) = (
        Vec::with_capacity(size),
        Vec::with_capacity(ids.len() - size),
    );
    for (id, &c) in ids.iter().zip(&chosen) {
        if c {
            context.push(id.clone())
        } else {
            targets.push(id.clone())
        }
    }
    Ok((context, targets))
}
