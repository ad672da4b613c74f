//! Local posterior computations, residuals, and the individual gradient steps
//! that make up one training round.

use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{BowDataset, QaDataset};
use crate::error::{Error, Result};
use crate::kernel::KernelExpansion;
use crate::linalg::Matrix;
use crate::math;
use crate::simplex::{NarrativeMatrix, NarrativeParams, Pmf, TopicParams};

/// Bayes update of a prior over components given one observation whose
/// per-component likelihoods are `likelihood`.
fn bayes(likelihood: &[f64], prior: &[f64]) -> Result<Pmf> {
    if likelihood.len() != prior.len() {
        return Err(Error::dim("posterior", prior.len(), likelihood.len()));
    }
    let evidence = math::dot(likelihood, prior);
    if !(evidence > 0.0) {
        return Err(Error::DegenerateEvidence);
    }
    Ok(Pmf::new_unchecked(
        likelihood
            .iter()
            .zip(prior)
            .map(|(l, p)| l * p / evidence)
            .collect(),
    ))
}

/// Posterior over topics after observing one word with topic row `phi_row`.
pub fn topic_posterior(phi_row: &[f64], prior: &[f64]) -> Result<Pmf> {
    bayes(phi_row, prior)
}

/// Posterior over narratives after observing one answer with row `omega_row`.
pub fn narrative_posterior(omega_row: &[f64], prior: &[f64]) -> Result<Pmf> {
    bayes(omega_row, prior)
}

/// `Σ_v (n_v/M)[posterior(v) − f]` for one document.
pub fn residual_f(
    counts: &[(usize, u64)],
    total: u64,
    phi: &Matrix,
    f: &[f64],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; f.len()];
    let m = total as f64;
    for &(v, n) in counts {
        let w = n as f64 / m;
        let post = topic_posterior(phi.row(v), f)?;
        for ((o, &p), &pr) in out.iter_mut().zip(post.probs()).zip(f) {
            *o += w * (p - pr);
        }
    }
    Ok(out)
}

/// `(1/Q) Σ_q [posterior(y_q) − g]` for one document.
pub fn residual_g(answers: &[usize], omega: &NarrativeMatrix, g: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; g.len()];
    let w = 1.0 / answers.len() as f64;
    for (q, &y) in answers.iter().enumerate() {
        let post = narrative_posterior(omega.row(q, y), g)?;
        for ((o, &p), &pr) in out.iter_mut().zip(post.probs()).zip(g) {
            *o += w * (p - pr);
        }
    }
    Ok(out)
}

/// Residual rows for every document; rows of unobserved documents stay zero.
pub fn residuals_f(bow: &BowDataset, phi: &Matrix, f: &Matrix) -> Result<Matrix> {
    let mut r = Matrix::zeros(f.rows(), f.cols());
    for (i, doc) in bow.docs().iter().enumerate() {
        let row = residual_f(&doc.counts, doc.total, phi, f.row(i))?;
        r.row_mut(i).copy_from_slice(&row);
    }
    Ok(r)
}

pub fn residuals_g(
    qa: &QaDataset,
    mask: Option<&[bool]>,
    omega: &NarrativeMatrix,
    g: &Matrix,
) -> Result<Matrix> {
    let mut r = Matrix::zeros(g.rows(), g.cols());
    for (i, rec) in qa.records().iter().enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        let row = residual_g(&rec.answers, omega, g.row(i))?;
        r.row_mut(i).copy_from_slice(&row);
    }
    Ok(r)
}

/// One functional gradient step: every anchor coefficient moves by
/// `(lr / n) · r_i`, so the function at any `x` moves by
/// `(lr / n) Σ_i r_i κ(x, x_i)`.
pub fn functional_step(
    expansion: &KernelExpansion,
    residuals: &Matrix,
    lr: f64,
    n: usize,
) -> Result<KernelExpansion> {
    let mut next = expansion.clone();
    if lr == 0.0 {
        return Ok(next);
    }
    next.coeffs.add_scaled(lr / n as f64, residuals)?;
    Ok(next)
}

/// Gradient of the average bag-of-words log-likelihood w.r.t. the topic logits.
pub fn phi_gradient(bow: &BowDataset, phi: &Matrix, f: &Matrix) -> Result<Matrix> {
    let (v, k) = (phi.rows(), phi.cols());
    // expected topic-assignment mass per (word, topic)
    let mut mass = Matrix::zeros(v, k);
    let n = bow.len() as f64;
    for (i, doc) in bow.docs().iter().enumerate() {
        let m = doc.total as f64;
        for &(w, c) in &doc.counts {
            let post = topic_posterior(phi.row(w), f.row(i))?;
            let scale = c as f64 / (m * n);
            for (t, &p) in mass.row_mut(w).iter_mut().zip(post.probs()) {
                *t += scale * p;
            }
        }
    }
    Ok(softmax_column_gradient(&mass, phi, 0, v))
}

/// Gradient of the average Q&A log-likelihood w.r.t. the narrative logits.
pub fn omega_gradient(
    qa: &QaDataset,
    mask: Option<&[bool]>,
    omega: &NarrativeMatrix,
    g: &Matrix,
) -> Result<Matrix> {
    let a = qa.num_answers();
    let q_count = qa.num_questions();
    let observed = mask.map_or(qa.len(), |m| m.iter().filter(|&&b| b).count());
    let stacked = omega.stacked();
    let mut mass = Matrix::zeros(stacked.rows(), stacked.cols());
    let scale = 1.0 / (observed as f64 * q_count as f64);
    for (i, rec) in qa.records().iter().enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        for (q, &y) in rec.answers.iter().enumerate() {
            let post = narrative_posterior(omega.row(q, y), g.row(i))?;
            for (t, &p) in mass.row_mut(q * a + y).iter_mut().zip(post.probs()) {
                *t += scale * p;
            }
        }
    }
    let mut grad = Matrix::zeros(stacked.rows(), stacked.cols());
    for q in 0..q_count {
        let block = softmax_column_gradient(&mass, stacked, q * a, a);
        for r in 0..a {
            grad.row_mut(q * a + r).copy_from_slice(block.row(r));
        }
    }
    Ok(grad)
}

/// For column-softmax parameters, `∂/∂logit_{u,k} = T_{u,k} − P_{u,k} Σ_v T_{v,k}`
/// where `T_{v,k} = P_{v,k} ∂L/∂P_{v,k}` is the posterior mass. Operates on
/// the row block `start..start+len`.
fn softmax_column_gradient(mass: &Matrix, probs: &Matrix, start: usize, len: usize) -> Matrix {
    let k = probs.cols();
    let mut totals = vec![0.0; k];
    for r in start..start + len {
        for (t, &m) in totals.iter_mut().zip(mass.row(r)) {
            *t += m;
        }
    }
    Matrix::from_fn(len, k, |r, c| {
        mass[(start + r, c)] - probs[(start + r, c)] * totals[c]
    })
}

fn ascend_and_center(logits: &Matrix, grad: &Matrix, lr: f64, block: usize) -> Result<Matrix> {
    let mut next = logits.clone();
    if lr == 0.0 {
        return Ok(next);
    }
    next.add_scaled(lr, grad)?;
    // softmax is shift invariant per column block; pin each block to zero mean
    for start in (0..next.rows()).step_by(block) {
        for c in 0..next.cols() {
            let mean = (start..start + block).map(|r| next[(r, c)]).sum::<f64>() / block as f64;
            for r in start..start + block {
                next[(r, c)] -= mean;
            }
        }
    }
    Ok(next)
}

/// One gradient-ascent step on the topic logits, followed by per-column
/// mean-centering.
pub fn update_phi(
    bow: &BowDataset,
    params: &TopicParams,
    f: &Matrix,
    lr: f64,
) -> Result<TopicParams> {
    if lr == 0.0 {
        return Ok(params.clone());
    }
    let phi = crate::simplex::topic_matrix(params);
    let grad = phi_gradient(bow, &phi, f)?;
    Ok(TopicParams {
        logits: ascend_and_center(&params.logits, &grad, lr, params.vocab_size())?,
    })
}

/// One gradient-ascent step on the narrative logits, centered per question.
pub fn update_omega(
    qa: &QaDataset,
    mask: Option<&[bool]>,
    params: &NarrativeParams,
    g: &Matrix,
    lr: f64,
) -> Result<NarrativeParams> {
    if lr == 0.0 {
        return Ok(params.clone());
    }
    let omega = crate::simplex::narrative_matrix(params);
    let grad = omega_gradient(qa, mask, &omega, g)?;
    Ok(NarrativeParams {
        questions: params.questions,
        answers: params.answers,
        logits: ascend_and_center(&params.logits, &grad, lr, params.answers)?,
    })
}

/// Adds to `out` (N×d) the gradient w.r.t. the anchors of `Σ_j u_j · f̃(x_j)`,
/// where `f̃(x_j) = base + Σ_i c_i κ(x_j, x_i)` with coefficients held fixed
/// and `upstream` holds `u_j` row-wise.
pub(crate) fn accumulate_anchor_gradient(
    expansion: &KernelExpansion,
    gram: &Matrix,
    upstream: &Matrix,
    out: &mut Matrix,
) {
    let x = &expansion.anchors;
    let c = &expansion.coeffs;
    let n = x.rows();
    // s[m][i] = u_m · c_i
    let s = upstream.matmul(&c.transpose()).expect("conformable");
    for m in 0..n {
        for i in 0..n {
            if i == m {
                continue;
            }
            let w = (s[(m, i)] + s[(i, m)]) * expansion.spec.grad_factor(gram[(m, i)]);
            if w == 0.0 {
                continue;
            }
            for d in 0..x.cols() {
                out[(m, d)] += w * (x[(i, d)] - x[(m, d)]);
            }
        }
    }
}

/// Chain rule from anchor gradients to a projection `W` with anchors `X̃ Wᵀ`.
pub(crate) fn projection_gradient(anchor_grad: &Matrix, embeddings: &Matrix) -> Matrix {
    anchor_grad
        .transpose()
        .matmul(embeddings)
        .expect("conformable")
}
