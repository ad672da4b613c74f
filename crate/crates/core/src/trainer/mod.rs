//! Joint fitting of the topic and narrative models.
//!
//! One round runs, in order: residuals and a functional gradient step for
//! f̃ and g̃, a gradient-ascent step on the topic and narrative logits, and
//! (optionally) a gradient-ascent step on the latent anchors or on the
//! projection that produces them.

mod updates;

pub use updates::{
    functional_step, narrative_posterior, omega_gradient, phi_gradient, residual_f, residual_g,
    residuals_f, residuals_g, topic_posterior, update_omega, update_phi,
};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{align, AlignReport, BowDataset, DocIndex, EmbeddingSet, QaDataset};
use crate::error::{Error, Result};
use crate::kernel::{self, KernelExpansion, KernelSpec};
use crate::linalg::Matrix;
use crate::rng::{self, ModelRng};
use crate::simplex::{self, NarrativeMatrix, NarrativeParams, TopicParams};

pub const MODEL_VERSION: &str = "narrative-model/1";

/// Order of the blocks inside a round, recorded in every manifest.
pub const UPDATE_ORDER: [&str; 5] = ["functional_f", "functional_g", "phi", "omega", "latents"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentMode {
    /// One free latent vector per document.
    FreeLatents,
    /// Latents are `W x̃_i` for fixed document embeddings `x̃_i`.
    Projected,
}

/// How the RBF bandwidth is chosen. The median rule is evaluated once on the
/// initial anchors and then held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BandwidthRule {
    Fixed(f64),
    Median { scale: f64 },
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::Median { scale: 1.0 }
    }
}

impl BandwidthRule {
    pub fn resolve(&self, anchors: &Matrix) -> Result<KernelSpec> {
        match *self {
            BandwidthRule::Fixed(h) => KernelSpec::rbf(h),
            BandwidthRule::Median { scale } => {
                // a single anchor (or coincident anchors) has no scale; fall back to 1
                let med = kernel::median_heuristic(anchors).unwrap_or(1.0);
                KernelSpec::rbf(scale * med)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr_f: f64,
    pub lr_g: f64,
    pub lr_phi: f64,
    pub lr_omega: f64,
    pub lr_x: f64,
    pub topics: usize,
    pub narratives: usize,
    pub kernel: BandwidthRule,
    /// Separate bandwidth rule for g̃; `None` shares `kernel`.
    pub kernel_g: Option<BandwidthRule>,
    pub seed: u64,
    pub mode: LatentMode,
    pub latent_dim: usize,
    pub update_x: bool,
    /// Weights of the two log-likelihoods in the latent objective.
    pub bow_weight: f64,
    pub qa_weight: f64,
    /// Standard deviation of the Gaussian initialization of all logits.
    pub init_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            lr_f: 1000.0,
            lr_g: 1000.0,
            lr_phi: 5.0,
            lr_omega: 50.0,
            lr_x: 0.0,
            topics: 10,
            narratives: 3,
            kernel: BandwidthRule::Median { scale: 0.1 },
            kernel_g: None,
            seed: 0,
            mode: LatentMode::FreeLatents,
            latent_dim: 8,
            update_x: false,
            bow_weight: 1.0,
            qa_weight: 1.0,
            init_std: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        let rates = [
            ("lr_f", self.lr_f),
            ("lr_g", self.lr_g),
            ("lr_phi", self.lr_phi),
            ("lr_omega", self.lr_omega),
            ("lr_x", self.lr_x),
            ("bow_weight", self.bow_weight),
            ("qa_weight", self.qa_weight),
            ("init_std", self.init_std),
        ];
        for (name, v) in rates {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.topics == 0 || self.narratives == 0 {
            return Err(Error::Config(
                "topic and narrative counts must be positive".into(),
            ));
        }
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be positive".into()));
        }
        for rule in core::iter::once(&self.kernel).chain(self.kernel_g.as_ref()) {
            let bad = match *rule {
                BandwidthRule::Fixed(h) => !(h > 0.0 && h.is_finite()),
                BandwidthRule::Median { scale } => !(scale > 0.0 && scale.is_finite()),
            };
            if bad {
                return Err(Error::Config(
                    "bandwidth must be positive and finite".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Datasets restricted and ordered to a common [`DocIndex`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub index: DocIndex,
    pub bow: Option<BowDataset>,
    pub qa: Option<QaDataset>,
    /// Documents whose answers take part in training; `None` means all.
    pub qa_mask: Option<Vec<bool>>,
    /// N×d_e document embeddings, required in projected mode.
    pub embeddings: Option<Matrix>,
}

impl TrainingData {
    pub fn align(
        bow: Option<&BowDataset>,
        qa: Option<&QaDataset>,
        emb: Option<&EmbeddingSet>,
    ) -> Result<(Self, AlignReport)> {
        if bow.is_none() && qa.is_none() {
            return Err(Error::Config(
                "at least one of bag-of-words or Q&A data is required".into(),
            ));
        }
        let (index, report) = align(bow, qa, emb)?;
        let data = Self {
            bow: bow.map(|b| b.select(&index)).transpose()?,
            qa: qa.map(|q| q.select(&index)).transpose()?,
            embeddings: emb.map(|e| e.matrix(index.ids())).transpose()?,
            qa_mask: None,
            index,
        };
        Ok((data, report))
    }

    pub fn with_qa_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.index.len() {
            return Err(Error::dim("qa mask", self.index.len(), mask.len()));
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::Empty("qa mask selects no documents"));
        }
        self.qa_mask = Some(mask);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    fn mask(&self) -> Option<&[bool]> {
        self.qa_mask.as_deref()
    }

    fn observed_qa(&self) -> usize {
        self.mask()
            .map_or(self.len(), |m| m.iter().filter(|&&b| b).count())
    }
}

/// Latent positions and the kernel expansions of f̃ and g̃.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    /// N×d anchors.
    pub anchors: Matrix,
    /// d×d_e projection (projected mode only).
    pub projection: Option<Matrix>,
    pub f_exp: Option<KernelExpansion>,
    pub g_exp: Option<KernelExpansion>,
}

impl LatentState {
    fn set_anchors(&mut self, anchors: Matrix) {
        for e in [self.f_exp.as_mut(), self.g_exp.as_mut()]
            .into_iter()
            .flatten()
        {
            e.anchors = anchors.clone();
        }
        self.anchors = anchors;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub bow_log_likelihood: Option<f64>,
    pub qa_log_likelihood: Option<f64>,
    pub bow_floored: usize,
    pub qa_floored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub rng: String,
    pub update_order: Vec<String>,
    pub bandwidth_f: Option<f64>,
    pub bandwidth_g: Option<f64>,
    /// Likelihoods at the start of each round.
    pub rounds: Vec<RoundRecord>,
    /// Likelihoods after the last round.
    pub final_bow_log_likelihood: Option<f64>,
    pub final_qa_log_likelihood: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub version: String,
    pub config: TrainConfig,
    pub index: DocIndex,
    pub topics: Option<TopicParams>,
    pub narratives: Option<NarrativeParams>,
    pub latents: LatentState,
    /// N×K_BoW, row i = f_i.
    pub topic_mixtures: Option<Matrix>,
    /// N×K_QA, row i = g_i.
    pub narrative_mixtures: Option<Matrix>,
    pub manifest: RunManifest,
}

impl FittedModel {
    pub fn narrative_matrix(&self) -> Option<NarrativeMatrix> {
        self.narratives.as_ref().map(simplex::narrative_matrix)
    }

    pub fn topic_matrix(&self) -> Option<Matrix> {
        self.topics.as_ref().map(simplex::topic_matrix)
    }
}

/// Cached Gram matrices for the current anchors.
struct Grams {
    f: Option<Matrix>,
    g: Option<Matrix>,
}

impl Grams {
    fn compute(state: &LatentState) -> Self {
        Self {
            f: state
                .f_exp
                .as_ref()
                .map(|e| kernel::gram(&e.anchors, &e.spec)),
            g: state
                .g_exp
                .as_ref()
                .map(|e| kernel::gram(&e.anchors, &e.spec)),
        }
    }
}

/// Values of f̃ and g̃ at the anchors (N×K logits each).
struct Values {
    f: Option<Matrix>,
    g: Option<Matrix>,
}

impl Values {
    fn compute(state: &LatentState, grams: &Grams) -> Result<Self> {
        Ok(Self {
            f: match (&state.f_exp, &grams.f) {
                (Some(e), Some(k)) => Some(e.eval_at_anchors(k)?),
                _ => None,
            },
            g: match (&state.g_exp, &grams.g) {
                (Some(e), Some(k)) => Some(e.eval_at_anchors(k)?),
                _ => None,
            },
        })
    }
}

fn check(m: &Matrix, round: usize, block: &'static str) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence { round, block })
    }
}

fn initial_state(
    data: &TrainingData,
    cfg: &TrainConfig,
    rng: &mut ModelRng,
) -> Result<LatentState> {
    let n = data.len();
    let d = cfg.latent_dim;
    let (anchors, projection) = match cfg.mode {
        LatentMode::FreeLatents => {
            let x = Matrix::from_vec(n, d, rng::normal_vec(rng, n * d, 1.0))?;
            (x, None)
        }
        LatentMode::Projected => {
            let emb = data.embeddings.as_ref().ok_or_else(|| {
                Error::Config("projected mode requires document embeddings".into())
            })?;
            let de = emb.cols();
            let w = Matrix::from_vec(
                d,
                de,
                rng::normal_vec(rng, d * de, 1.0 / crate::math::sqrt(de as f64)),
            )?;
            (emb.matmul(&w.transpose())?, Some(w))
        }
    };
    let spec_f = cfg.kernel.resolve(&anchors)?;
    let spec_g = match cfg.kernel_g {
        Some(rule) => rule.resolve(&anchors)?,
        None => spec_f,
    };
    Ok(LatentState {
        f_exp: data
            .bow
            .as_ref()
            .map(|_| KernelExpansion::zeros(anchors.clone(), cfg.topics, spec_f)),
        g_exp: data
            .qa
            .as_ref()
            .map(|_| KernelExpansion::zeros(anchors.clone(), cfg.narratives, spec_g)),
        anchors,
        projection,
    })
}

/// Both log-likelihoods for the given mixtures.
fn likelihoods(
    data: &TrainingData,
    phi: Option<&Matrix>,
    omega: Option<&NarrativeMatrix>,
    f: Option<&Matrix>,
    g: Option<&Matrix>,
) -> Result<(
    Option<simplex::LogLikelihood>,
    Option<simplex::LogLikelihood>,
)> {
    let bow_ll = match (&data.bow, phi, f) {
        (Some(b), Some(p), Some(f)) => Some(simplex::bow_log_likelihood(b, p, f)?),
        _ => None,
    };
    let qa_ll = match (&data.qa, omega, g) {
        (Some(q), Some(o), Some(g)) => Some(qa_log_likelihood_masked(q, data.mask(), o, g)?),
        _ => None,
    };
    Ok((bow_ll, qa_ll))
}

fn qa_log_likelihood_masked(
    qa: &QaDataset,
    mask: Option<&[bool]>,
    omega: &NarrativeMatrix,
    g: &Matrix,
) -> Result<simplex::LogLikelihood> {
    let Some(mask) = mask else {
        return simplex::qa_log_likelihood(qa, omega, g);
    };
    let mut value = 0.0;
    let mut floored = 0;
    let mut count = 0usize;
    for (i, rec) in qa.records().iter().enumerate() {
        if mask[i] {
            let (l, hits) = simplex::qa_doc_log_likelihood(&rec.answers, omega, g.row(i));
            value += l;
            floored += hits;
            count += 1;
        }
    }
    Ok(simplex::LogLikelihood {
        value: value / count as f64,
        floored,
    })
}

/// Latent objective `w_bow · L_BoW + w_qa · L_QA` with the expansion
/// coefficients of `state` held fixed.
pub fn latent_objective(
    data: &TrainingData,
    cfg: &TrainConfig,
    topics: Option<&TopicParams>,
    narratives: Option<&NarrativeParams>,
    state: &LatentState,
) -> Result<f64> {
    let grams = Grams::compute(state);
    let values = Values::compute(state, &grams)?;
    let phi = topics.map(simplex::topic_matrix);
    let omega = narratives.map(simplex::narrative_matrix);
    let f = values.f.as_ref().map(simplex::softmax_rows);
    let g = values.g.as_ref().map(simplex::softmax_rows);
    let (b, q) = likelihoods(data, phi.as_ref(), omega.as_ref(), f.as_ref(), g.as_ref())?;
    Ok(cfg.bow_weight * b.map_or(0.0, |l| l.value) + cfg.qa_weight * q.map_or(0.0, |l| l.value))
}

/// Gradient of [`latent_objective`] w.r.t. the anchors (free mode, N×d) or
/// the projection (projected mode, d×d_e).
pub fn latent_gradient(
    data: &TrainingData,
    cfg: &TrainConfig,
    topics: Option<&TopicParams>,
    narratives: Option<&NarrativeParams>,
    state: &LatentState,
) -> Result<Matrix> {
    let grams = Grams::compute(state);
    let values = Values::compute(state, &grams)?;
    latent_gradient_with(data, cfg, topics, narratives, state, &grams, &values)
}

fn latent_gradient_with(
    data: &TrainingData,
    cfg: &TrainConfig,
    topics: Option<&TopicParams>,
    narratives: Option<&NarrativeParams>,
    state: &LatentState,
    grams: &Grams,
    values: &Values,
) -> Result<Matrix> {
    let mut grad = Matrix::zeros(state.anchors.rows(), state.anchors.cols());
    if let (Some(bow), Some(t), Some(e), Some(k), Some(v)) =
        (&data.bow, topics, &state.f_exp, &grams.f, &values.f)
    {
        let f = simplex::softmax_rows(v);
        let mut up = updates::residuals_f(bow, &simplex::topic_matrix(t), &f)?;
        up.scale(cfg.bow_weight / data.len() as f64);
        updates::accumulate_anchor_gradient(e, k, &up, &mut grad);
    }
    if let (Some(qa), Some(p), Some(e), Some(k), Some(v)) =
        (&data.qa, narratives, &state.g_exp, &grams.g, &values.g)
    {
        let g = simplex::softmax_rows(v);
        let mut up = updates::residuals_g(qa, data.mask(), &simplex::narrative_matrix(p), &g)?;
        up.scale(cfg.qa_weight / data.observed_qa() as f64);
        updates::accumulate_anchor_gradient(e, k, &up, &mut grad);
    }
    match (cfg.mode, &data.embeddings) {
        (LatentMode::FreeLatents, _) => Ok(grad),
        (LatentMode::Projected, Some(emb)) => Ok(updates::projection_gradient(&grad, emb)),
        (LatentMode::Projected, None) => Err(Error::Config(
            "projected mode requires document embeddings".into(),
        )),
    }
}

/// One gradient-ascent step on the latents (or projection).
pub fn update_latents(
    data: &TrainingData,
    cfg: &TrainConfig,
    topics: Option<&TopicParams>,
    narratives: Option<&NarrativeParams>,
    state: &LatentState,
    lr: f64,
) -> Result<LatentState> {
    if lr == 0.0 {
        return Ok(state.clone());
    }
    let grad = latent_gradient(data, cfg, topics, narratives, state)?;
    step_latents(data, state, &grad, lr)
}

fn step_latents(
    data: &TrainingData,
    state: &LatentState,
    grad: &Matrix,
    lr: f64,
) -> Result<LatentState> {
    let mut next = state.clone();
    match (&mut next.projection, &data.embeddings) {
        (Some(w), Some(emb)) => {
            w.add_scaled(lr, grad)?;
            let anchors = emb.matmul(&w.transpose())?;
            next.set_anchors(anchors);
        }
        _ => {
            let mut anchors = state.anchors.clone();
            anchors.add_scaled(lr, grad)?;
            next.set_anchors(anchors);
        }
    }
    Ok(next)
}

/// Fits the joint model for `cfg.steps` rounds.
pub fn fit_joint(data: &TrainingData, cfg: &TrainConfig) -> Result<FittedModel> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training documents"));
    }
    if data.bow.is_none() && data.qa.is_none() {
        return Err(Error::Config(
            "at least one of bag-of-words or Q&A data is required".into(),
        ));
    }
    let n = data.len();
    let mut rng = rng::seeded(cfg.seed);
    let mut topics = data
        .bow
        .as_ref()
        .map(|b| TopicParams::random(b.vocab_size(), cfg.topics, cfg.init_std, &mut rng));
    let mut narratives = data.qa.as_ref().map(|q| {
        NarrativeParams::random(
            q.num_questions(),
            q.num_answers(),
            cfg.narratives,
            cfg.init_std,
            &mut rng,
        )
    });
    let mut state = initial_state(data, cfg, &mut rng)?;
    let mut grams = Grams::compute(&state);
    let mut values = Values::compute(&state, &grams)?;
    let n_qa = data.observed_qa();
    let mut rounds = Vec::with_capacity(cfg.steps);

    for round in 0..cfg.steps {
        let phi = topics.as_ref().map(simplex::topic_matrix);
        let omega = narratives.as_ref().map(simplex::narrative_matrix);
        let f = values.f.as_ref().map(simplex::softmax_rows);
        let g = values.g.as_ref().map(simplex::softmax_rows);
        let (bow_ll, qa_ll) =
            likelihoods(data, phi.as_ref(), omega.as_ref(), f.as_ref(), g.as_ref())?;
        rounds.push(RoundRecord {
            round,
            bow_log_likelihood: bow_ll.map(|l| l.value),
            qa_log_likelihood: qa_ll.map(|l| l.value),
            bow_floored: bow_ll.map_or(0, |l| l.floored),
            qa_floored: qa_ll.map_or(0, |l| l.floored),
        });

        // functional steps on f̃ and g̃
        if let (Some(bow), Some(phi), Some(f), Some(e), Some(k)) =
            (&data.bow, &phi, &f, &state.f_exp, &grams.f)
        {
            let r = updates::residuals_f(bow, phi, f)?;
            let next = functional_step(e, &r, cfg.lr_f, n)?;
            let v = next.eval_at_anchors(k)?;
            check(&v, round, "f")?;
            values.f = Some(v);
            state.f_exp = Some(next);
        }
        if let (Some(qa), Some(omega), Some(g), Some(e), Some(k)) =
            (&data.qa, &omega, &g, &state.g_exp, &grams.g)
        {
            let r = updates::residuals_g(qa, data.mask(), omega, g)?;
            let next = functional_step(e, &r, cfg.lr_g, n_qa)?;
            let v = next.eval_at_anchors(k)?;
            check(&v, round, "g")?;
            values.g = Some(v);
            state.g_exp = Some(next);
        }

        // global factor updates with the refreshed mixtures
        if let (Some(bow), Some(t), Some(v)) = (&data.bow, &topics, &values.f) {
            let next = update_phi(bow, t, &simplex::softmax_rows(v), cfg.lr_phi)?;
            check(&next.logits, round, "phi")?;
            topics = Some(next);
        }
        if let (Some(qa), Some(p), Some(v)) = (&data.qa, &narratives, &values.g) {
            let next = update_omega(qa, data.mask(), p, &simplex::softmax_rows(v), cfg.lr_omega)?;
            check(&next.logits, round, "omega")?;
            narratives = Some(next);
        }

        if cfg.update_x && cfg.lr_x > 0.0 {
            let grad = latent_gradient_with(
                data,
                cfg,
                topics.as_ref(),
                narratives.as_ref(),
                &state,
                &grams,
                &values,
            )?;
            state = step_latents(data, &state, &grad, cfg.lr_x)?;
            check(&state.anchors, round, "latents")?;
            grams = Grams::compute(&state);
            values = Values::compute(&state, &grams)?;
        }
    }

    let f = values.f.as_ref().map(simplex::softmax_rows);
    let g = values.g.as_ref().map(simplex::softmax_rows);
    let phi = topics.as_ref().map(simplex::topic_matrix);
    let omega = narratives.as_ref().map(simplex::narrative_matrix);
    let (bow_ll, qa_ll) = likelihoods(data, phi.as_ref(), omega.as_ref(), f.as_ref(), g.as_ref())?;
    let manifest = RunManifest {
        rng: rng::RNG_NAME.into(),
        update_order: UPDATE_ORDER.iter().map(|s| String::from(*s)).collect(),
        bandwidth_f: state.f_exp.as_ref().map(|e| e.spec.bandwidth),
        bandwidth_g: state.g_exp.as_ref().map(|e| e.spec.bandwidth),
        rounds,
        final_bow_log_likelihood: bow_ll.map(|l| l.value),
        final_qa_log_likelihood: qa_ll.map(|l| l.value),
    };
    Ok(FittedModel {
        version: MODEL_VERSION.into(),
        config: cfg.clone(),
        index: data.index.clone(),
        topics,
        narratives,
        latents: state,
        topic_mixtures: f,
        narrative_mixtures: g,
        manifest,
    })
}

/// Uniform mixtures for `n` documents over `k` components.
pub fn uniform_mixtures(n: usize, k: usize) -> Matrix {
    Matrix::filled(n, k, 1.0 / k as f64)
}
