//! Evaluation metrics: column alignment, recovery scores, clustering
//! agreement, divergences, predictive cross-entropy and calibration curves.
//!
//! Units: cross-entropy uses natural logarithms (nats); Jensen-Shannon
//! divergence uses base 2 and lies in `[0, 1]`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::QaDataset;
use crate::error::{Error, Result};
use crate::icl::PredictedAnswers;
use crate::linalg::Matrix;
use crate::math;
use crate::simplex::NarrativeMatrix;

/// Injective assignment of rows (true components) to columns (estimated
/// components).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// `assignment[r]` is the column matched to row `r`.
    pub assignment: Vec<usize>,
    pub cost: f64,
    /// Columns left unmatched, ascending.
    pub unmatched: Vec<usize>,
}

/// Minimum-cost injective assignment for an m×n cost matrix with `m ≤ n`
/// (Hungarian method with row/column potentials).
pub fn hungarian_align(cost: &Matrix) -> Result<Alignment> {
    let (m, n) = (cost.rows(), cost.cols());
    if m > n {
        return Err(Error::Dimension {
            context: "assignment needs rows <= cols",
            expected: n,
            got: m,
        });
    }
    if !cost.is_finite() {
        return Err(Error::Value("assignment costs must be finite".into()));
    }
    if m == 0 {
        return Ok(Alignment {
            assignment: Vec::new(),
            cost: 0.0,
            unmatched: (0..n).collect(),
        });
    }
    // 1-based potentials; column 0 is a virtual start column
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=m {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; m];
    let mut unmatched = Vec::new();
    for j in 1..=n {
        if owner[j] == 0 {
            unmatched.push(j - 1);
        } else {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| cost[(r, c)])
        .sum();
    Ok(Alignment {
        assignment,
        cost: total,
        unmatched,
    })
}

pub fn cosine_similarity(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::dim("cosine similarity", p.len(), q.len()));
    }
    let np = math::sqrt(math::dot(p, p));
    let nq = math::sqrt(math::dot(q, q));
    if np == 0.0 || nq == 0.0 {
        return Err(Error::Value("cosine similarity of a zero vector".into()));
    }
    Ok((math::dot(p, q) / (np * nq)).clamp(-1.0, 1.0))
}

/// Aligns true narratives to estimated ones using
/// `cost(j, k) = Σ_q (1 − cos(Ω_true^(q)[:, j], Ω_est^(q)[:, k]))`.
pub fn align_narratives(truth: &NarrativeMatrix, est: &NarrativeMatrix) -> Result<Alignment> {
    if truth.questions() != est.questions() || truth.answers() != est.answers() {
        return Err(Error::dim(
            "narrative matrix rows",
            truth.questions() * truth.answers(),
            est.questions() * est.answers(),
        ));
    }
    let (kt, ke) = (truth.num_narratives(), est.num_narratives());
    if ke < kt {
        return Err(Error::Dimension {
            context: "estimated narratives must be at least the true count",
            expected: kt,
            got: ke,
        });
    }
    let mut cost = Matrix::zeros(kt, ke);
    for q in 0..truth.questions() {
        let tcols: Vec<Vec<f64>> = (0..kt).map(|j| truth.column(q, j)).collect();
        let ecols: Vec<Vec<f64>> = (0..ke).map(|k| est.column(q, k)).collect();
        for j in 0..kt {
            for k in 0..ke {
                cost[(j, k)] += 1.0 - cosine_similarity(&tcols[j], &ecols[k])?;
            }
        }
    }
    hungarian_align(&cost)
}

/// Fraction of document pairs on which two labelings agree.
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim("rand index labels", a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Value("rand index needs at least two items".into()));
    }
    // pair counts from the contingency table
    let mut joint: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut ca: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cb: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0) += 1;
        *ca.entry(x).or_insert(0) += 1;
        *cb.entry(y).or_insert(0) += 1;
    }
    let pairs = |c: u64| c * c.saturating_sub(1) / 2;
    let both: u64 = joint.values().map(|&c| pairs(c)).sum();
    let same_a: u64 = ca.values().map(|&c| pairs(c)).sum();
    let same_b: u64 = cb.values().map(|&c| pairs(c)).sum();
    let total = pairs(n as u64);
    let agree = total + 2 * both - same_a - same_b;
    Ok(agree as f64 / total as f64)
}

/// Row-wise argmax labels (ties to the lowest index).
pub fn argmax_labels(mix: &Matrix) -> Vec<usize> {
    (0..mix.rows()).map(|i| math::argmax(mix.row(i))).collect()
}

/// Base-2 Jensen-Shannon divergence.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::dim("js divergence", p.len(), q.len()));
    }
    let kl_to_mid = |x: &[f64]| -> f64 {
        x.iter()
            .zip(p.iter().zip(q))
            .filter(|(&xi, _)| xi > 0.0)
            .map(|(&xi, (&pi, &qi))| xi * math::log2(xi / (0.5 * (pi + qi))))
            .sum()
    };
    Ok((0.5 * kl_to_mid(p) + 0.5 * kl_to_mid(q)).clamp(0.0, 1.0))
}

/// Mean over documents and questions of `−ln p(true answer)`, floored.
pub fn cross_entropy(preds: &PredictedAnswers, truth: &QaDataset) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for doc in &preds.docs {
        let rec = truth.get(&doc.doc_id).ok_or_else(|| {
            Error::Alignment(format!("`{}` has no ground-truth answers", doc.doc_id))
        })?;
        if rec.answers.len() != doc.answers.len() {
            return Err(Error::dim(
                "predicted questions",
                rec.answers.len(),
                doc.answers.len(),
            ));
        }
        for (pmf, &y) in doc.answers.iter().zip(&rec.answers) {
            let p = *pmf
                .probs()
                .get(y)
                .ok_or_else(|| Error::dim("predicted answers", y + 1, pmf.len()))?;
            total -= math::floored_ln(p).0;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("predictions"));
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_confidence: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationCurve {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }
}

/// Reliability curve over `bins` equal-width confidence bins on `(0, 1]`;
/// empty bins are omitted.
pub fn calibration(
    preds: &PredictedAnswers,
    truth: &QaDataset,
    bins: usize,
) -> Result<CalibrationCurve> {
    if bins == 0 {
        return Err(Error::Config("calibration needs at least one bin".into()));
    }
    let mut count = vec![0usize; bins];
    let mut conf = vec![0.0; bins];
    let mut hits = vec![0usize; bins];
    for doc in &preds.docs {
        let rec = truth.get(&doc.doc_id).ok_or_else(|| {
            Error::Alignment(format!("`{}` has no ground-truth answers", doc.doc_id))
        })?;
        for (pmf, &y) in doc.answers.iter().zip(&rec.answers) {
            let pi = pmf.confidence();
            let b = confidence_bin(pi, bins);
            count[b] += 1;
            conf[b] += pi;
            hits[b] += (pmf.argmax() == y) as usize;
        }
    }
    let bins = (0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| CalibrationBin {
            lower: b as f64 / bins as f64,
            upper: (b + 1) as f64 / bins as f64,
            count: count[b],
            mean_confidence: conf[b] / count[b] as f64,
            accuracy: hits[b] as f64 / count[b] as f64,
        })
        .collect();
    Ok(CalibrationCurve { bins })
}

/// Index of the bin `(b/B, (b+1)/B]` containing `pi`.
fn confidence_bin(pi: f64, bins: usize) -> usize {
    let b = libm::ceil(pi * bins as f64) as isize - 1;
    b.clamp(0, bins as isize - 1) as usize
}

/// Quality of recovered narratives against planted ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub alignment: Alignment,
    /// Mean over documents of the cosine between true and aligned mixtures.
    pub mean_cosine: f64,
    pub rand_index: f64,
}

/// Aligns estimated narratives to the truth, then compares per-document
/// mixtures restricted to the matched components.
pub fn recovery(
    omega_true: &NarrativeMatrix,
    mix_true: &Matrix,
    omega_est: &NarrativeMatrix,
    mix_est: &Matrix,
) -> Result<Recovery> {
    if mix_true.rows() != mix_est.rows() {
        return Err(Error::dim("mixture rows", mix_true.rows(), mix_est.rows()));
    }
    let alignment = align_narratives(omega_true, omega_est)?;
    let aligned = Matrix::from_fn(mix_est.rows(), alignment.assignment.len(), |i, j| {
        mix_est[(i, alignment.assignment[j])]
    });
    let mut cos = 0.0;
    for i in 0..mix_true.rows() {
        // a document with no mass on any matched column scores 0
        cos += cosine_similarity(mix_true.row(i), aligned.row(i)).unwrap_or(0.0);
    }
    let n = mix_true.rows();
    let rand = if n >= 2 {
        rand_index(&argmax_labels(mix_true), &argmax_labels(&aligned))?
    } else {
        1.0
    };
    Ok(Recovery {
        alignment,
        mean_cosine: cos / n as f64,
        rand_index: rand,
    })
}
