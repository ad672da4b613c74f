#![allow(dead_code)]

use narrative_core::corpus::{BowDataset, QaDataset, QaRecord};
use narrative_core::rng::{self, ModelRng};
use narrative_core::simplex::{self, NarrativeMatrix, NarrativeParams, TopicParams};
use narrative_core::Matrix;
use rand::Rng;

pub fn id(i: usize) -> String {
    format!("d{i:03}")
}

pub fn random_pmf(rng: &mut ModelRng, k: usize) -> Vec<f64> {
    let mut v = rng::normal_vec(rng, k, 1.0);
    simplex::softmax_in_place(&mut v);
    v
}

pub fn random_mixtures(rng: &mut ModelRng, n: usize, k: usize) -> Matrix {
    let mut m = Matrix::zeros(n, k);
    for i in 0..n {
        m.row_mut(i).copy_from_slice(&random_pmf(rng, k));
    }
    m
}

pub fn random_bow(rng: &mut ModelRng, n: usize, v: usize) -> BowDataset {
    let docs = (0..n)
        .map(|i| {
            let counts = (0..v)
                .filter_map(|w| {
                    let c = rng.random_range(0..4u64);
                    (c > 0).then_some((w, c))
                })
                .collect::<Vec<_>>();
            let counts = if counts.is_empty() {
                vec![(i % v, 1)]
            } else {
                counts
            };
            (id(i), counts)
        })
        .collect();
    BowDataset::new((0..v).map(|w| format!("w{w}")).collect(), docs).unwrap()
}

pub fn random_qa(rng: &mut ModelRng, n: usize, q: usize, a: usize) -> QaDataset {
    let records = (0..n)
        .map(|i| QaRecord {
            doc_id: id(i),
            answers: (0..q).map(|_| rng.random_range(0..a)).collect(),
        })
        .collect();
    QaDataset::new(q, a, records).unwrap()
}

pub fn random_topics(rng: &mut ModelRng, v: usize, k: usize) -> TopicParams {
    TopicParams::random(v, k, 1.0, rng)
}

pub fn random_narratives(
    rng: &mut ModelRng,
    q: usize,
    a: usize,
    k: usize,
) -> (NarrativeParams, NarrativeMatrix) {
    let p = NarrativeParams::random(q, a, k, 1.0, rng);
    let m = simplex::narrative_matrix(&p);
    (p, m)
}

/// Relative error with a floor on the denominator for near-zero components.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_diff(x: &[f64], i: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut p = x.to_vec();
    p[i] += h;
    let up = f(&p);
    p[i] = x[i] - h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}
