//! Worst-case error measurements shared by the unit tests and the acceptance
//! run. Each function sweeps a fixed set of seeded instances and returns the
//! largest deviation it saw.

#![allow(dead_code, clippy::needless_range_loop)]

use narrative_core::corpus::{EmbeddingSet, QaDataset};
use narrative_core::eval::{self, hungarian_align};
use narrative_core::icl::{
    context_cross_entropy, context_gradient, init_icl, DocPrediction, IclConfig, IclContext,
    IclModel, IclTargets, PredictedAnswers,
};
use narrative_core::kernel::{self, KernelExpansion, KernelSpec};
use narrative_core::rng;
use narrative_core::simplex::{self, NarrativeParams, Pmf, TopicParams};
use narrative_core::synth::{embed_mixtures, generate, SynthConfig};
use narrative_core::trainer::{
    functional_step, latent_gradient, latent_objective, narrative_posterior, omega_gradient,
    phi_gradient, residual_f, residual_g, residuals_g, topic_posterior, LatentMode, LatentState,
    TrainConfig, TrainingData,
};
use narrative_core::Matrix;
use rand::Rng;

use crate::common::*;

pub const H: f64 = 1e-6;
pub const INSTANCES: u64 = 20;

fn softmaxed(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    simplex::softmax_in_place(&mut v);
    v
}

/// Largest relative error of `residual_f` against the logit derivative of the
/// document log-likelihood.
pub fn residual_f_fd() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let mut r = rng::seeded(seed);
        let bow = random_bow(&mut r, 1, 6);
        let phi = simplex::topic_matrix(&random_topics(&mut r, 6, 3));
        let logits = rng::normal_vec(&mut r, 3, 1.0);
        let doc = &bow.docs()[0];
        let res = residual_f(&doc.counts, doc.total, &phi, &softmaxed(&logits)).unwrap();
        for k in 0..3 {
            let fd = central_diff(&logits, k, H, |x| {
                simplex::bow_doc_log_likelihood(&doc.counts, doc.total, &phi, &softmaxed(x)).0
            });
            worst = worst.max(rel_err(res[k], fd));
        }
    }
    worst
}

pub fn residual_g_fd() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let mut r = rng::seeded(seed);
        let qa = random_qa(&mut r, 1, 4, 3);
        let (_, omega) = random_narratives(&mut r, 4, 3, 2);
        let logits = rng::normal_vec(&mut r, 2, 1.0);
        let answers = &qa.records()[0].answers;
        let res = residual_g(answers, &omega, &softmaxed(&logits)).unwrap();
        for k in 0..2 {
            let fd = central_diff(&logits, k, H, |x| {
                simplex::qa_doc_log_likelihood(answers, &omega, &softmaxed(x)).0
            });
            worst = worst.max(rel_err(res[k], fd));
        }
    }
    worst
}

pub fn phi_fd() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let mut r = rng::seeded(seed);
        let bow = random_bow(&mut r, 5, 4);
        let topics = random_topics(&mut r, 4, 3);
        let f = random_mixtures(&mut r, 5, 3);
        let grad = phi_gradient(&bow, &simplex::topic_matrix(&topics), &f).unwrap();
        let flat = topics.logits.as_slice().to_vec();
        for idx in 0..flat.len() {
            let fd = central_diff(&flat, idx, H, |x| {
                let t = TopicParams::new(Matrix::from_vec(4, 3, x.to_vec()).unwrap()).unwrap();
                simplex::bow_log_likelihood(&bow, &simplex::topic_matrix(&t), &f)
                    .unwrap()
                    .value
            });
            worst = worst.max(rel_err(grad.as_slice()[idx], fd));
        }
    }
    worst
}

pub fn omega_fd() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let mut r = rng::seeded(seed);
        let qa = random_qa(&mut r, 6, 3, 4);
        let (params, omega) = random_narratives(&mut r, 3, 4, 2);
        let g = random_mixtures(&mut r, 6, 2);
        let grad = omega_gradient(&qa, None, &omega, &g).unwrap();
        let flat = params.logits.as_slice().to_vec();
        for idx in 0..flat.len() {
            let fd = central_diff(&flat, idx, H, |x| {
                let p = NarrativeParams::new(3, 4, Matrix::from_vec(12, 2, x.to_vec()).unwrap())
                    .unwrap();
                simplex::qa_log_likelihood(&qa, &simplex::narrative_matrix(&p), &g)
                    .unwrap()
                    .value
            });
            worst = worst.max(rel_err(grad.as_slice()[idx], fd));
        }
    }
    worst
}

struct LatentCase {
    data: TrainingData,
    cfg: TrainConfig,
    topics: TopicParams,
    narratives: NarrativeParams,
    state: LatentState,
}

fn latent_case(seed: u64, mode: LatentMode) -> LatentCase {
    let mut r = rng::seeded(seed);
    let (n, d, de) = (6, 2, 3);
    let bow = random_bow(&mut r, n, 5);
    let qa = random_qa(&mut r, n, 3, 3);
    let emb = EmbeddingSet::new(
        (0..n)
            .map(|i| (id(i), rng::normal_vec(&mut r, de, 1.0)))
            .collect(),
    )
    .unwrap();
    let (data, _) = TrainingData::align(Some(&bow), Some(&qa), Some(&emb)).unwrap();
    let cfg = TrainConfig {
        topics: 2,
        narratives: 2,
        latent_dim: d,
        mode,
        bow_weight: 0.7,
        qa_weight: 1.3,
        ..TrainConfig::default()
    };
    let topics = random_topics(&mut r, 5, 2);
    let narratives = NarrativeParams::random(3, 3, 2, 1.0, &mut r);
    let (anchors, projection) = match mode {
        LatentMode::FreeLatents => (
            Matrix::from_vec(n, d, rng::normal_vec(&mut r, n * d, 1.0)).unwrap(),
            None,
        ),
        LatentMode::Projected => {
            let w = Matrix::from_vec(d, de, rng::normal_vec(&mut r, d * de, 0.6)).unwrap();
            (
                data.embeddings
                    .as_ref()
                    .unwrap()
                    .matmul(&w.transpose())
                    .unwrap(),
                Some(w),
            )
        }
    };
    let spec = KernelSpec::rbf(1.3).unwrap();
    let mut f_exp = KernelExpansion::zeros(anchors.clone(), 2, spec);
    let mut g_exp = KernelExpansion::zeros(anchors.clone(), 2, spec);
    f_exp.coeffs = Matrix::from_vec(n, 2, rng::normal_vec(&mut r, n * 2, 1.0)).unwrap();
    g_exp.coeffs = Matrix::from_vec(n, 2, rng::normal_vec(&mut r, n * 2, 1.0)).unwrap();
    LatentCase {
        data,
        cfg,
        topics,
        narratives,
        state: LatentState {
            anchors,
            projection,
            f_exp: Some(f_exp),
            g_exp: Some(g_exp),
        },
    }
}

fn with_parameters(case: &LatentCase, x: &[f64]) -> LatentState {
    let mut s = case.state.clone();
    let anchors = match &case.state.projection {
        Some(w) => {
            let w = Matrix::from_vec(w.rows(), w.cols(), x.to_vec()).unwrap();
            let a = case
                .data
                .embeddings
                .as_ref()
                .unwrap()
                .matmul(&w.transpose())
                .unwrap();
            s.projection = Some(w);
            a
        }
        None => Matrix::from_vec(s.anchors.rows(), s.anchors.cols(), x.to_vec()).unwrap(),
    };
    for e in [s.f_exp.as_mut(), s.g_exp.as_mut()].into_iter().flatten() {
        e.anchors = anchors.clone();
    }
    s.anchors = anchors;
    s
}

/// Latent (or projection) gradient of the joint objective.
pub fn latent_fd(mode: LatentMode) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let case = latent_case(seed, mode);
        let grad = latent_gradient(
            &case.data,
            &case.cfg,
            Some(&case.topics),
            Some(&case.narratives),
            &case.state,
        )
        .unwrap();
        let flat = match &case.state.projection {
            Some(w) => w.as_slice().to_vec(),
            None => case.state.anchors.as_slice().to_vec(),
        };
        assert_eq!(grad.as_slice().len(), flat.len());
        for idx in 0..flat.len() {
            let fd = central_diff(&flat, idx, H, |x| {
                let s = with_parameters(&case, x);
                latent_objective(
                    &case.data,
                    &case.cfg,
                    Some(&case.topics),
                    Some(&case.narratives),
                    &s,
                )
                .unwrap()
            });
            worst = worst.max(rel_err(grad.as_slice()[idx], fd));
        }
    }
    worst
}

fn icl_case(seed: u64, tie_w: bool) -> IclModel {
    let truth = generate(&SynthConfig {
        docs: 10,
        questions: 3,
        answers: 3,
        narratives: 2,
        seed,
        ..SynthConfig::default()
    })
    .unwrap();
    let emb = embed_mixtures(&truth, 4, 0.2, seed).unwrap();
    let ctx_ids: Vec<String> = emb.ids().take(7).map(String::from).collect();
    let ctx = IclContext::new(&emb, &truth.answers.select_ids(&ctx_ids).unwrap()).unwrap();
    let cfg = IclConfig {
        layers: 3,
        latent_dim: 3,
        narratives: 2,
        alpha: 1.5,
        tie_w,
        seed,
        ..IclConfig::default()
    };
    init_icl(ctx, &cfg).unwrap()
}

/// Outer gradient of the context cross-entropy with respect to W_Q, W_K,
/// ln α and the narrative logits, tied and untied.
pub fn icl_outer_fd() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        for tie_w in [false, true] {
            let model = icl_case(seed, tie_w);
            let grad = context_gradient(&model).unwrap();
            assert_eq!(grad.ce, context_cross_entropy(&model).unwrap());

            let wq = model.w_query.as_slice().to_vec();
            for idx in 0..wq.len() {
                let fd = central_diff(&wq, idx, H, |x| {
                    let mut m = model.clone();
                    m.w_query =
                        Matrix::from_vec(m.w_query.rows(), m.w_query.cols(), x.to_vec()).unwrap();
                    if tie_w {
                        m.w_key = m.w_query.clone();
                    }
                    context_cross_entropy(&m).unwrap()
                });
                let an = grad.w_query.as_slice()[idx]
                    + if tie_w {
                        grad.w_key.as_slice()[idx]
                    } else {
                        0.0
                    };
                worst = worst.max(rel_err(an, fd));
            }
            if !tie_w {
                let wk = model.w_key.as_slice().to_vec();
                for idx in 0..wk.len() {
                    let fd = central_diff(&wk, idx, H, |x| {
                        let mut m = model.clone();
                        m.w_key =
                            Matrix::from_vec(m.w_key.rows(), m.w_key.cols(), x.to_vec()).unwrap();
                        context_cross_entropy(&m).unwrap()
                    });
                    worst = worst.max(rel_err(grad.w_key.as_slice()[idx], fd));
                }
            }
            let logits = model.narratives.logits.as_slice().to_vec();
            for idx in 0..logits.len() {
                let fd = central_diff(&logits, idx, H, |x| {
                    let mut m = model.clone();
                    m.narratives.logits.as_mut_slice().copy_from_slice(x);
                    context_cross_entropy(&m).unwrap()
                });
                worst = worst.max(rel_err(grad.omega_logits.as_slice()[idx], fd));
            }
            let fd = central_diff(&[model.alpha.ln()], 0, H, |x| {
                let mut m = model.clone();
                m.alpha = x[0].exp();
                context_cross_entropy(&m).unwrap()
            });
            worst = worst.max(rel_err(grad.log_alpha, fd));
        }
    }
    worst
}

/// Largest gap between a residual summand and posterior minus prior.
pub fn residual_identity() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let mut r = rng::seeded(seed);
        let (_, omega) = random_narratives(&mut r, 1, 4, 3);
        let g = random_pmf(&mut r, 3);
        for y in 0..4 {
            let res = residual_g(&[y], &omega, &g).unwrap();
            let post = narrative_posterior(omega.row(0, y), &g).unwrap();
            for k in 0..3 {
                worst = worst.max((res[k] - (post.probs()[k] - g[k])).abs());
            }
        }
        let phi = simplex::topic_matrix(&random_topics(&mut r, 5, 3));
        let f = random_pmf(&mut r, 3);
        let w = r.random_range(0..5);
        let res = residual_f(&[(w, 3)], 3, &phi, &f).unwrap();
        let post = topic_posterior(phi.row(w), &f).unwrap();
        for k in 0..3 {
            worst = worst.max((res[k] - (post.probs()[k] - f[k])).abs());
        }
    }
    worst
}

/// Largest absolute component sum of a document residual.
pub fn residual_sums() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let mut r = rng::seeded(seed);
        let bow = random_bow(&mut r, 4, 8);
        let phi = simplex::topic_matrix(&random_topics(&mut r, 8, 5));
        let f = random_pmf(&mut r, 5);
        for doc in bow.docs() {
            let s: f64 = residual_f(&doc.counts, doc.total, &phi, &f)
                .unwrap()
                .iter()
                .sum();
            worst = worst.max(s.abs());
        }
        let qa = random_qa(&mut r, 4, 6, 3);
        let (_, omega) = random_narratives(&mut r, 6, 3, 5);
        for rec in qa.records() {
            let s: f64 = residual_g(&rec.answers, &omega, &f).unwrap().iter().sum();
            worst = worst.max(s.abs());
        }
    }
    worst
}

/// With a near-Dirac kernel, changing one document's answers moves the other
/// documents' functions by at most the returned amount; infinite when the
/// Gram matrix is not near-diagonal.
pub fn dirac_leakage() -> f64 {
    let mut r = rng::seeded(3);
    let (n, q, a, k) = (5, 4, 3, 2);
    let x = Matrix::from_vec(n, 2, rng::normal_vec(&mut r, n * 2, 10.0)).unwrap();
    let spec = KernelSpec::rbf(0.05).unwrap();
    let gram = kernel::gram(&x, &spec);
    let coupled = (0..n).any(|i| (0..n).any(|j| i != j && gram[(i, j)] > 1e-6));
    if coupled {
        return f64::INFINITY;
    }
    let (_, omega) = random_narratives(&mut r, q, a, k);
    let qa = random_qa(&mut r, n, q, a);
    let mut changed = qa.records().to_vec();
    changed[0].answers = changed[0].answers.iter().map(|y| (y + 1) % a).collect();
    let qa2 = QaDataset::new(q, a, changed).unwrap();
    let e = KernelExpansion::zeros(x, k, spec);
    let g = simplex::softmax_rows(&e.eval_at_anchors(&gram).unwrap());
    let step = |data: &QaDataset| {
        let res = residuals_g(data, None, &omega, &g).unwrap();
        functional_step(&e, &res, 1.0, n)
            .unwrap()
            .eval_at_anchors(&gram)
            .unwrap()
    };
    let (v1, v2) = (step(&qa), step(&qa2));
    let mut worst = 0.0f64;
    for i in 1..n {
        for c in 0..k {
            worst = worst.max((v1[(i, c)] - v2[(i, c)]).abs());
        }
    }
    worst
}

/// With a flat kernel, every document receives the same update; returns the
/// largest spread across documents, or infinity when the Gram matrix is not
/// near-constant.
pub fn flat_spread() -> f64 {
    let mut r = rng::seeded(4);
    let (n, q, a, k) = (5, 4, 3, 2);
    let x = Matrix::from_vec(n, 2, rng::normal_vec(&mut r, n * 2, 1e-3)).unwrap();
    let spec = KernelSpec::rbf(100.0).unwrap();
    let gram = kernel::gram(&x, &spec);
    if gram.as_slice().iter().any(|&v| v < 1.0 - 1e-6) {
        return f64::INFINITY;
    }
    let (_, omega) = random_narratives(&mut r, q, a, k);
    let qa = random_qa(&mut r, n, q, a);
    let e = KernelExpansion::zeros(x, k, spec);
    let g = simplex::softmax_rows(&e.eval_at_anchors(&gram).unwrap());
    let res = residuals_g(&qa, None, &omega, &g).unwrap();
    let v = functional_step(&e, &res, 1.0, n)
        .unwrap()
        .eval_at_anchors(&gram)
        .unwrap();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for c in 0..k {
                worst = worst.max((v[(i, c)] - v[(j, c)]).abs());
            }
        }
    }
    worst
}

/// Both likelihoods against explicit triple loops.
pub fn likelihood_naive() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let mut r = rng::seeded(seed);
        let (n, v, k) = (7, 9, 4);
        let bow = random_bow(&mut r, n, v);
        let phi = simplex::topic_matrix(&random_topics(&mut r, v, k));
        let f = random_mixtures(&mut r, n, k);
        let mut naive = 0.0;
        for (i, doc) in bow.docs().iter().enumerate() {
            let m: u64 = doc.counts.iter().map(|c| c.1).sum();
            for &(w, c) in &doc.counts {
                let mut p = 0.0;
                for t in 0..k {
                    p += phi[(w, t)] * f[(i, t)];
                }
                naive += c as f64 / m as f64 * p.ln();
            }
        }
        naive /= n as f64;
        let got = simplex::bow_log_likelihood(&bow, &phi, &f).unwrap();
        worst = worst.max((got.value - naive).abs());

        let (q, a) = (5, 4);
        let qa = random_qa(&mut r, n, q, a);
        let (_, omega) = random_narratives(&mut r, q, a, k);
        let g = random_mixtures(&mut r, n, k);
        let mut naive = 0.0;
        for (i, rec) in qa.records().iter().enumerate() {
            for (qi, &y) in rec.answers.iter().enumerate() {
                let mut p = 0.0;
                for t in 0..k {
                    p += omega.stacked()[(qi * a + y, t)] * g[(i, t)];
                }
                naive += p.ln();
            }
        }
        naive /= (n * q) as f64;
        let got = simplex::qa_log_likelihood(&qa, &omega, &g).unwrap();
        worst = worst.max((got.value - naive).abs());
    }
    worst
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum over injective maps rows → columns, by exhaustive search.
pub fn brute_force(cost: &Matrix) -> f64 {
    let (m, n) = (cost.rows(), cost.cols());
    permutations(n)
        .into_iter()
        .map(|p| (0..m).map(|i| cost[(i, p[i])]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Hungarian against brute force over every shape `m ≤ n ≤ 6`; a
/// non-injective assignment or a cost that is not the sum of its pairs
/// counts as an infinite error.
pub fn hungarian_gap() -> f64 {
    let mut r = rng::seeded(21);
    let mut worst = 0.0f64;
    for m in 1..=6 {
        for n in m..=6 {
            for _ in 0..5 {
                let cost = Matrix::from_fn(m, n, |_, _| {
                    if r.random_bool(0.2) {
                        r.random_range(0..3) as f64
                    } else {
                        r.random_range(-5.0..5.0)
                    }
                });
                let got = hungarian_align(&cost).unwrap();
                let mut used = got.assignment.clone();
                used.sort_unstable();
                used.dedup();
                let total: f64 = got
                    .assignment
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| cost[(i, j)])
                    .sum();
                if used.len() != m || (total - got.cost).abs() > 1e-12 {
                    return f64::INFINITY;
                }
                worst = worst.max((got.cost - brute_force(&cost)).abs());
            }
        }
    }
    worst
}

pub struct IclCase {
    pub model: IclModel,
    pub targets: IclTargets,
}

pub fn small_icl(seed: u64, alpha: f64) -> IclCase {
    let mut r = rng::seeded(seed);
    let (s, t, de) = (4, 2, 3);
    let mut entries: Vec<(String, Vec<f64>)> = (0..s + t)
        .map(|i| (id(i), rng::normal_vec(&mut r, de, 1.0)))
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let emb = EmbeddingSet::new(entries.clone()).unwrap();
    let qa = random_qa(&mut r, s, 2, 2);
    let ctx = IclContext::new(&emb, &qa).unwrap();
    let targets = IclTargets::complement(&emb, &ctx).unwrap();
    let lr_alpha = if alpha > 0.0 { 0.1 } else { 0.0 };
    let cfg = IclConfig {
        layers: 4,
        latent_dim: 2,
        narratives: 2,
        alpha,
        lr_alpha,
        seed,
        tie_w: false,
        ..IclConfig::default()
    };
    IclCase {
        model: init_icl(ctx, &cfg).unwrap(),
        targets,
    }
}

/// Direct transcription of the layer recursion with explicit loops.
pub fn naive_trace(model: &IclModel, targets: &IclTargets) -> Vec<Vec<Vec<f64>>> {
    let ctx = &model.context;
    let omega = simplex::narrative_matrix(&model.narratives);
    let k = omega.num_narratives();
    let h = model.kernel.bandwidth;
    let proj = |w: &Matrix, x: &[f64]| -> Vec<f64> {
        (0..w.rows())
            .map(|r| (0..w.cols()).map(|c| w[(r, c)] * x[c]).sum())
            .collect()
    };
    let all: Vec<Vec<f64>> = (0..ctx.len())
        .map(|i| ctx.embeddings.row(i).to_vec())
        .chain((0..targets.len()).map(|j| targets.embeddings.row(j).to_vec()))
        .collect();
    let s = ctx.len();
    let mut gt = vec![vec![0.0f64; k]; all.len()];
    let mut trace = vec![gt.clone()];
    for _ in 0..model.layers {
        let mut res = vec![vec![0.0; k]; s];
        for i in 0..s {
            let z: f64 = gt[i].iter().map(|v| v.exp()).sum();
            let g: Vec<f64> = gt[i].iter().map(|v| v.exp() / z).collect();
            let answers = &ctx.answers.records()[i].answers;
            for (q, &y) in answers.iter().enumerate() {
                let row = omega.row(q, y);
                let ev: f64 = (0..k).map(|c| row[c] * g[c]).sum();
                for c in 0..k {
                    res[i][c] += (row[c] * g[c] / ev - g[c]) / answers.len() as f64;
                }
            }
        }
        let mut next = gt.clone();
        for (j, xj) in all.iter().enumerate() {
            let qj = proj(&model.w_query, xj);
            for i in 0..s {
                let ki = proj(&model.w_key, &all[i]);
                let d2: f64 = qj.iter().zip(&ki).map(|(a, b)| (a - b) * (a - b)).sum();
                let kap = (-d2 / (2.0 * h * h)).exp();
                for c in 0..k {
                    next[j][c] += model.alpha / s as f64 * kap * res[i][c];
                }
            }
        }
        gt = next;
        trace.push(gt.clone());
    }
    trace
}

/// Layer-by-layer gap between the vectorized forward pass and the naive
/// recursion.
pub fn icl_naive_gap() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let case = small_icl(seed, 3.0);
        let trace = case.model.forward_trace(&case.targets).unwrap();
        let naive = naive_trace(&case.model, &case.targets);
        if trace.len() != naive.len() {
            return f64::INFINITY;
        }
        for (m, n) in trace.iter().zip(&naive) {
            for (j, row) in n.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    worst = worst.max((m[(j, c)] - v).abs());
                }
            }
        }
    }
    worst
}

/// Predictions putting `mass` on each true answer and spreading the rest
/// evenly; `mass = 1/A` is the uniform prediction.
pub fn one_hot_predictions(qa: &QaDataset, mass: f64) -> PredictedAnswers {
    let a = qa.num_answers();
    let rest = (1.0 - mass) / (a - 1) as f64;
    let docs = qa
        .records()
        .iter()
        .map(|rec| {
            let answers: Vec<Pmf> = rec
                .answers
                .iter()
                .map(|&y| {
                    Pmf::new((0..a).map(|c| if c == y { mass } else { rest }).collect()).unwrap()
                })
                .collect();
            DocPrediction {
                doc_id: rec.doc_id.clone(),
                narrative: Pmf::uniform(1),
                confidences: answers.iter().map(Pmf::confidence).collect(),
                answers,
            }
        })
        .collect();
    PredictedAnswers { docs }
}

/// Hand-enumerated Rand index and Jensen-Shannon cases; returns the largest
/// deviation from the expected values.
pub fn eval_hand_cases() -> f64 {
    let qa = random_qa(&mut rng::seeded(2), 5, 3, 4);
    let cases = [
        (eval::rand_index(&[0, 1, 2, 0], &[0, 1, 2, 0]).unwrap(), 1.0),
        (eval::rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0),
        (
            eval::rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(),
            1.0 / 3.0,
        ),
        (eval::js_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0),
        (eval::js_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0),
        (
            eval::js_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap(),
            0.5 * (0.5 * (2.0f64 / 3.0).log2() + 0.5) + 0.5 * (4.0f64 / 3.0).log2(),
        ),
        (
            eval::cross_entropy(&one_hot_predictions(&qa, 1.0), &qa).unwrap(),
            0.0,
        ),
        (
            eval::cross_entropy(&one_hot_predictions(&qa, 0.25), &qa).unwrap(),
            4.0f64.ln(),
        ),
    ];
    cases
        .iter()
        .map(|(got, want)| (got - want).abs())
        .fold(0.0, f64::max)
}
