//! In-context extrapolation of Q&A answers.
//!
//! The functional update of g̃ is run as an L-layer network over a set of
//! answered *context* documents and unanswered *target* documents. In every
//! layer the context documents produce posterior-minus-prior residuals from
//! their observed answers (the local step), and every document, context or
//! target, moves by an attention-weighted average of those residuals with
//! weights `κ(W_Q x̃_j, W_K x̃_i)` (the attention step). Targets never produce
//! residuals of their own.
//!
//! [`fit_icl`] learns `W_Q`, `W_K`, the step size `α_G` and the narrative
//! logits by plain gradient descent on the context cross-entropy, with
//! gradients obtained by reverse-mode differentiation through all layers.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingSet, QaDataset};
use crate::error::{Error, Result};
use crate::kernel::{self, KernelSpec};
use crate::linalg::Matrix;
use crate::math;
use crate::rng;
use crate::simplex::{self, NarrativeMatrix, NarrativeParams, Pmf};
use crate::trainer::{residual_g, BandwidthRule};

pub const ICL_MODEL_VERSION: &str = "narrative-icl/1";

/// Normalization of the attention-weighted residual sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualNorm {
    /// Divide by the number of context documents.
    #[default]
    Context,
    /// Divide by the number of documents in the forward pass.
    AllDocs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IclConfig {
    pub layers: usize,
    /// Initial `α_G`.
    pub alpha: f64,
    pub latent_dim: usize,
    pub narratives: usize,
    pub tie_w: bool,
    pub seed: u64,
    pub outer_steps: usize,
    pub lr_w: f64,
    pub lr_omega: f64,
    /// Step on `ln α_G`; zero keeps `α_G` fixed.
    pub lr_alpha: f64,
    pub bandwidth: BandwidthRule,
    pub normalization: ResidualNorm,
    /// Standard deviation of the initial narrative logits.
    pub init_std: f64,
}

impl Default for IclConfig {
    fn default() -> Self {
        Self {
            layers: 8,
            alpha: 4.0,
            latent_dim: 8,
            narratives: 3,
            tie_w: true,
            seed: 0,
            outer_steps: 200,
            lr_w: 0.5,
            lr_omega: 20.0,
            lr_alpha: 0.1,
            bandwidth: BandwidthRule::Median { scale: 1.0 },
            normalization: ResidualNorm::Context,
            init_std: 0.5,
        }
    }
}

impl IclConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("layers must be at least 1".into()));
        }
        if self.latent_dim == 0 || self.narratives == 0 {
            return Err(Error::Config(
                "latent_dim and narratives must be positive".into(),
            ));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("lr_w", self.lr_w),
            ("lr_omega", self.lr_omega),
            ("lr_alpha", self.lr_alpha),
            ("init_std", self.init_std),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.lr_alpha > 0.0 && self.alpha == 0.0 {
            return Err(Error::Config("a learned alpha must start positive".into()));
        }
        Ok(())
    }
}

/// Answered documents used as context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclContext {
    pub ids: Vec<String>,
    /// S×d_e.
    pub embeddings: Matrix,
    /// Records in the order of `ids`.
    pub answers: QaDataset,
}

impl IclContext {
    /// Context over every answered document; each must have an embedding.
    pub fn new(emb: &EmbeddingSet, qa: &QaDataset) -> Result<Self> {
        let ids: Vec<String> = qa.ids().map(String::from).collect();
        if ids.is_empty() {
            return Err(Error::Empty("context"));
        }
        if let Some(missing) = ids.iter().find(|id| emb.get(id).is_none()) {
            return Err(Error::Alignment(format!(
                "context document `{missing}` has no embedding"
            )));
        }
        Ok(Self {
            embeddings: emb.matrix(&ids)?,
            answers: qa.select_ids(&ids)?,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Documents to extrapolate to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclTargets {
    pub ids: Vec<String>,
    /// T×d_e.
    pub embeddings: Matrix,
}

impl IclTargets {
    /// Every embedded document that is not in `context`, in id order.
    pub fn complement(emb: &EmbeddingSet, context: &IclContext) -> Result<Self> {
        let ctx: BTreeSet<&str> = context.ids.iter().map(String::as_str).collect();
        let ids: Vec<String> = emb
            .ids()
            .filter(|id| !ctx.contains(id))
            .map(String::from)
            .collect();
        Ok(Self {
            embeddings: emb.matrix(&ids)?,
            ids,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            ids: Vec::new(),
            embeddings: Matrix::zeros(0, dim),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclModel {
    pub version: String,
    /// d×d_e query projection.
    pub w_query: Matrix,
    /// d×d_e key projection.
    pub w_key: Matrix,
    pub narratives: NarrativeParams,
    pub alpha: f64,
    pub layers: usize,
    pub kernel: KernelSpec,
    pub normalization: ResidualNorm,
    pub context: IclContext,
    pub config: IclConfig,
    /// Context cross-entropy before each outer step, then after the last.
    pub training_ce: Vec<f64>,
}

/// Per-document output of a forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocPrediction {
    pub doc_id: String,
    /// Narrative mixture g_j.
    pub narrative: Pmf,
    /// Answer distribution Ω^(q) g_j per question.
    pub answers: Vec<Pmf>,
    /// Largest answer probability per question.
    pub confidences: Vec<f64>,
}

impl DocPrediction {
    pub fn mean_confidence(&self) -> f64 {
        self.confidences.iter().sum::<f64>() / self.confidences.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictedAnswers {
    pub docs: Vec<DocPrediction>,
}

impl PredictedAnswers {
    pub fn from_mixtures(ids: &[String], mix: &Matrix, omega: &NarrativeMatrix) -> Self {
        let docs = ids
            .iter()
            .enumerate()
            .map(|(j, id)| {
                let answers = omega.answer_pmfs(mix.row(j));
                DocPrediction {
                    doc_id: id.clone(),
                    narrative: Pmf::new_unchecked(mix.row(j).to_vec()),
                    confidences: answers.iter().map(Pmf::confidence).collect(),
                    answers,
                }
            })
            .collect();
        Self { docs }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// Everything the layer recursion needs, with context rows first.
struct Pass<'a> {
    /// (S+T)×S attention weights.
    attention: Matrix,
    omega: NarrativeMatrix,
    answers: &'a QaDataset,
    alpha: f64,
    norm: f64,
    layers: usize,
    k: usize,
}

impl Pass<'_> {
    fn context_residuals(&self, state: &Matrix) -> Result<Matrix> {
        let s = self.answers.len();
        let mut r = Matrix::zeros(s, self.k);
        let mut g = vec![0.0; self.k];
        for (i, rec) in self.answers.records().iter().enumerate() {
            g.copy_from_slice(state.row(i));
            simplex::softmax_in_place(&mut g);
            r.row_mut(i)
                .copy_from_slice(&residual_g(&rec.answers, &self.omega, &g)?);
        }
        Ok(r)
    }

    /// g̃ after every layer, layer 0 included.
    fn run(&self) -> Result<Vec<Matrix>> {
        let rows = self.attention.rows();
        let mut state = Matrix::zeros(rows, self.k);
        let mut trace = Vec::with_capacity(self.layers + 1);
        trace.push(state.clone());
        for layer in 0..self.layers {
            let r = self.context_residuals(&state)?;
            let delta = self.attention.matmul(&r)?;
            state.add_scaled(self.alpha / self.norm, &delta)?;
            if !state.is_finite() {
                return Err(Error::Divergence {
                    round: layer,
                    block: "icl layer",
                });
            }
            trace.push(state.clone());
        }
        Ok(trace)
    }
}

fn project(x: &Matrix, w: &Matrix) -> Result<Matrix> {
    x.matmul(&w.transpose())
}

fn stack(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::dim("embedding dimension", a.cols(), b.cols()));
    }
    let mut data = a.as_slice().to_vec();
    data.extend_from_slice(b.as_slice());
    Matrix::from_vec(a.rows() + b.rows(), a.cols(), data)
}

impl IclModel {
    pub fn narrative_matrix(&self) -> NarrativeMatrix {
        simplex::narrative_matrix(&self.narratives)
    }

    fn pass(&self, targets: &IclTargets) -> Result<Pass<'_>> {
        let ctx = &self.context;
        if ctx.is_empty() {
            return Err(Error::Empty("context"));
        }
        let de = self.w_query.cols();
        if ctx.embeddings.cols() != de || (!targets.is_empty() && targets.embeddings.cols() != de) {
            return Err(Error::dim(
                "embedding dimension",
                de,
                targets.embeddings.cols(),
            ));
        }
        let ctx_ids: BTreeSet<&str> = ctx.ids.iter().map(String::as_str).collect();
        if let Some(dup) = targets.ids.iter().find(|id| ctx_ids.contains(id.as_str())) {
            return Err(Error::Alignment(format!(
                "target `{dup}` is also a context document"
            )));
        }
        let all = stack(&ctx.embeddings, &targets.embeddings)?;
        let queries = project(&all, &self.w_query)?;
        let keys = project(&ctx.embeddings, &self.w_key)?;
        let norm = match self.normalization {
            ResidualNorm::Context => ctx.len(),
            ResidualNorm::AllDocs => all.rows(),
        };
        Ok(Pass {
            attention: kernel::cross_gram(&queries, &keys, &self.kernel),
            omega: self.narrative_matrix(),
            answers: &ctx.answers,
            alpha: self.alpha,
            norm: norm as f64,
            layers: self.layers,
            k: self.narratives.num_narratives(),
        })
    }

    /// g̃ for context rows then target rows, after each of the layers.
    pub fn forward_trace(&self, targets: &IclTargets) -> Result<Vec<Matrix>> {
        self.pass(targets)?.run()
    }
}

/// Predicted narrative mixtures and answer distributions for `targets`.
pub fn icl_forward(model: &IclModel, targets: &IclTargets) -> Result<PredictedAnswers> {
    let trace = model.forward_trace(targets)?;
    let last = trace.last().expect("at least one layer");
    let s = model.context.len();
    let mix = Matrix::from_fn(targets.len(), last.cols(), |j, k| last[(s + j, k)]);
    let mix = simplex::softmax_rows(&mix);
    Ok(PredictedAnswers::from_mixtures(
        &targets.ids,
        &mix,
        &model.narrative_matrix(),
    ))
}

/// In-sample predictions for the context documents themselves.
pub fn icl_context_predictions(model: &IclModel) -> Result<PredictedAnswers> {
    let trace = model.forward_trace(&IclTargets::empty(model.w_query.cols()))?;
    let mix = simplex::softmax_rows(trace.last().expect("at least one layer"));
    Ok(PredictedAnswers::from_mixtures(
        &model.context.ids,
        &mix,
        &model.narrative_matrix(),
    ))
}

/// Gradient of the context cross-entropy w.r.t. every trainable block.
#[derive(Debug, Clone, PartialEq)]
pub struct IclGradient {
    pub ce: f64,
    pub w_query: Matrix,
    pub w_key: Matrix,
    /// Derivative w.r.t. `ln α_G`.
    pub log_alpha: f64,
    pub omega_logits: Matrix,
}

/// Context cross-entropy `−(1/SQ) Σ_i Σ_q ln(Ω^(q)_{y_iq,:}·g_{i,L})`.
pub fn context_cross_entropy(model: &IclModel) -> Result<f64> {
    let trace = model.forward_trace(&IclTargets::empty(model.w_query.cols()))?;
    let omega = model.narrative_matrix();
    let g = simplex::softmax_rows(trace.last().expect("at least one layer"));
    let (mut total, mut count) = (0.0, 0usize);
    for (i, rec) in model.context.answers.records().iter().enumerate() {
        for (q, &y) in rec.answers.iter().enumerate() {
            total -= math::ln(math::dot(omega.row(q, y), g.row(i)));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Reverse-mode gradient of [`context_cross_entropy`].
pub fn context_gradient(model: &IclModel) -> Result<IclGradient> {
    let ctx = &model.context;
    let pass = model.pass(&IclTargets::empty(model.w_query.cols()))?;
    let trace = pass.run()?;
    let (s, k) = (ctx.len(), pass.k);
    let q_count = ctx.answers.num_questions();
    let a_count = ctx.answers.num_answers();
    let omega = &pass.omega;
    let inv_q = 1.0 / q_count as f64;

    // seed: ∂CE/∂g̃_{i,L} = −(1/S) r_i, and ∂CE/∂ln ω_iq = −(1/SQ) p_iq
    let last = trace.last().expect("at least one layer");
    let mut log_omega_bar = Matrix::zeros(q_count * a_count, k);
    let mut g_bar = Matrix::zeros(s, k);
    let mut ce = 0.0;
    let mut g = vec![0.0; k];
    let mut p = vec![0.0; k];
    for (i, rec) in ctx.answers.records().iter().enumerate() {
        g.copy_from_slice(last.row(i));
        simplex::softmax_in_place(&mut g);
        for (q, &y) in rec.answers.iter().enumerate() {
            let row = omega.row(q, y);
            let z = math::dot(row, &g);
            ce -= math::ln(z);
            for c in 0..k {
                p[c] = row[c] * g[c] / z;
                g_bar[(i, c)] -= (p[c] - g[c]) * inv_q / s as f64;
                log_omega_bar[(q * a_count + y, c)] -= p[c] * inv_q / s as f64;
            }
        }
    }
    ce /= (s * q_count) as f64;

    let scale = pass.alpha / pass.norm;
    let mut attention_bar = Matrix::zeros(s, s);
    let mut alpha_bar = 0.0;
    let mut u = vec![0.0; k];
    let attention_t = pass.attention.transpose();
    for layer in (0..pass.layers).rev() {
        let state = &trace[layer];
        let r = pass.context_residuals(state)?;
        let delta = pass.attention.matmul(&r)?;
        alpha_bar += math::dot(g_bar.as_slice(), delta.as_slice()) / pass.norm;
        // Ā += scale · Ḡ Rᵀ ; R̄ = scale · Aᵀ Ḡ
        let gr = g_bar.matmul(&r.transpose())?;
        attention_bar.add_scaled(scale, &gr)?;
        let mut r_bar = attention_t.matmul(&g_bar)?;
        r_bar.scale(scale);
        for (i, rec) in ctx.answers.records().iter().enumerate() {
            g.copy_from_slice(state.row(i));
            simplex::softmax_in_place(&mut g);
            u.copy_from_slice(r_bar.row(i));
            let gu = math::dot(&g, &u);
            for c in 0..k {
                g_bar[(i, c)] -= g[c] * (u[c] - gu);
            }
            for (q, &y) in rec.answers.iter().enumerate() {
                let row = omega.row(q, y);
                let z = math::dot(row, &g);
                for c in 0..k {
                    p[c] = row[c] * g[c] / z;
                }
                let pu = math::dot(&p, &u);
                for c in 0..k {
                    let v = inv_q * p[c] * (u[c] - pu);
                    g_bar[(i, c)] += v;
                    log_omega_bar[(q * a_count + y, c)] += v;
                }
            }
        }
    }

    // ln Ω_{y,k} = logit_{y,k} − logsumexp_a logit_{a,k}
    let mut omega_logits = Matrix::zeros(q_count * a_count, k);
    for q in 0..q_count {
        for c in 0..k {
            let total: f64 = (0..a_count)
                .map(|a| log_omega_bar[(q * a_count + a, c)])
                .sum();
            for a in 0..a_count {
                let r = q * a_count + a;
                omega_logits[(r, c)] = log_omega_bar[(r, c)] - omega.row(q, a)[c] * total;
            }
        }
    }

    // attention A_ji = κ(W_Q x̃_j, W_K x̃_i)
    let queries = project(&ctx.embeddings, &model.w_query)?;
    let keys = project(&ctx.embeddings, &model.w_key)?;
    let d = queries.cols();
    let mut q_bar = Matrix::zeros(s, d);
    let mut k_bar = Matrix::zeros(s, d);
    for j in 0..s {
        for i in 0..s {
            let w = attention_bar[(j, i)] * model.kernel.grad_factor(pass.attention[(j, i)]);
            if w == 0.0 {
                continue;
            }
            for c in 0..d {
                let diff = keys[(i, c)] - queries[(j, c)];
                q_bar[(j, c)] += w * diff;
                k_bar[(i, c)] -= w * diff;
            }
        }
    }
    Ok(IclGradient {
        ce,
        w_query: q_bar.transpose().matmul(&ctx.embeddings)?,
        w_key: k_bar.transpose().matmul(&ctx.embeddings)?,
        log_alpha: alpha_bar * pass.alpha,
        omega_logits,
    })
}

fn center_blocks(logits: &mut Matrix, block: usize) {
    for start in (0..logits.rows()).step_by(block) {
        for c in 0..logits.cols() {
            let mean = (start..start + block).map(|r| logits[(r, c)]).sum::<f64>() / block as f64;
            for r in start..start + block {
                logits[(r, c)] -= mean;
            }
        }
    }
}

/// Untrained model with seeded initial parameters.
pub fn init_icl(context: IclContext, cfg: &IclConfig) -> Result<IclModel> {
    cfg.validate()?;
    if context.is_empty() {
        return Err(Error::Empty("context"));
    }
    let mut rng = rng::seeded(cfg.seed);
    let (d, de) = (cfg.latent_dim, context.embeddings.cols());
    let w_std = 1.0 / math::sqrt(de as f64);
    let w_query = Matrix::from_vec(d, de, rng::normal_vec(&mut rng, d * de, w_std))?;
    let w_key = if cfg.tie_w {
        w_query.clone()
    } else {
        Matrix::from_vec(d, de, rng::normal_vec(&mut rng, d * de, w_std))?
    };
    let qa = &context.answers;
    let mut narratives = NarrativeParams::random(
        qa.num_questions(),
        qa.num_answers(),
        cfg.narratives,
        cfg.init_std,
        &mut rng,
    );
    center_blocks(&mut narratives.logits, qa.num_answers());
    let kernel = cfg
        .bandwidth
        .resolve(&project(&context.embeddings, &w_key)?)?;
    Ok(IclModel {
        version: ICL_MODEL_VERSION.into(),
        w_query,
        w_key,
        narratives,
        alpha: cfg.alpha,
        layers: cfg.layers,
        kernel,
        normalization: cfg.normalization,
        context,
        config: cfg.clone(),
        training_ce: Vec::new(),
    })
}

/// Applies one descent step with the configured rates.
pub fn descend(model: &mut IclModel, grad: &IclGradient) -> Result<()> {
    let cfg = &model.config;
    if cfg.tie_w {
        let mut tied = grad.w_query.clone();
        tied.add_scaled(1.0, &grad.w_key)?;
        model.w_query.add_scaled(-cfg.lr_w, &tied)?;
        model.w_key = model.w_query.clone();
    } else {
        model.w_query.add_scaled(-cfg.lr_w, &grad.w_query)?;
        model.w_key.add_scaled(-cfg.lr_w, &grad.w_key)?;
    }
    if cfg.lr_alpha > 0.0 {
        model.alpha = math::exp(math::ln(model.alpha) - cfg.lr_alpha * grad.log_alpha);
    }
    model
        .narratives
        .logits
        .add_scaled(-cfg.lr_omega, &grad.omega_logits)?;
    let a = model.narratives.answers;
    center_blocks(&mut model.narratives.logits, a);
    Ok(())
}

/// Learns `W_Q`, `W_K`, `α_G` and the narrative logits on the context.
pub fn fit_icl(context: IclContext, cfg: &IclConfig) -> Result<IclModel> {
    if context.len() < 2 {
        return Err(Error::Config(
            "in-context fitting needs at least two context documents".into(),
        ));
    }
    let mut model = init_icl(context, cfg)?;
    let mut trace = Vec::with_capacity(cfg.outer_steps + 1);
    for step in 0..cfg.outer_steps {
        let grad = context_gradient(&model)?;
        trace.push(grad.ce);
        descend(&mut model, &grad)?;
        let finite = model.w_query.is_finite()
            && model.w_key.is_finite()
            && model.narratives.logits.is_finite()
            && model.alpha.is_finite();
        if !finite || !grad.ce.is_finite() {
            return Err(Error::Divergence {
                round: step,
                block: "icl parameters",
            });
        }
    }
    trace.push(context_cross_entropy(&model)?);
    model.training_ce = trace;
    Ok(model)
}

/// The `k` targets with the lowest mean confidence, ties by ascending id.
/// Returns the ids and whether `k` had to be clamped.
pub fn select_low_confidence(preds: &PredictedAnswers, k: usize) -> (Vec<String>, bool) {
    let mut ranked: Vec<(f64, &str)> = preds
        .docs
        .iter()
        .map(|d| (d.mean_confidence(), d.doc_id.as_str()))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let clamped = k > ranked.len();
    (
        ranked
            .into_iter()
            .take(k)
            .map(|(_, id)| String::from(id))
            .collect(),
        clamped,
    )
}
