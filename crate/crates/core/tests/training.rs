mod common;

use common::*;
use narrative_core::corpus::{BowDataset, QaDataset, QaRecord};
use narrative_core::eval::recovery;
use narrative_core::rng;
use narrative_core::simplex::{self, NarrativeParams, TopicParams};
use narrative_core::synth::{generate, SynthConfig};
use narrative_core::trainer::{
    fit_joint, update_omega, update_phi, BandwidthRule, LatentMode, TrainConfig, TrainingData,
};
use narrative_core::{Error, Matrix};

#[test]
fn single_topic_converges_to_empirical_word_frequencies() {
    let mut r = rng::seeded(1);
    let v = 6;
    // equal document lengths make the document-averaged and pooled frequencies coincide
    let docs: Vec<(String, Vec<(usize, u64)>)> = (0..8)
        .map(|i| {
            let mut counts = vec![0u64; v];
            for _ in 0..20 {
                counts[rng::categorical(&mut r, &[0.3, 0.1, 0.2, 0.05, 0.25, 0.1])] += 1;
            }
            (
                id(i),
                counts.into_iter().enumerate().filter(|c| c.1 > 0).collect(),
            )
        })
        .collect();
    let bow = BowDataset::new((0..v).map(|w| format!("w{w}")).collect(), docs).unwrap();
    let mut freq = vec![0.0; v];
    for doc in bow.docs() {
        for &(w, c) in &doc.counts {
            freq[w] += c as f64 / (20.0 * bow.len() as f64);
        }
    }
    let f = Matrix::filled(bow.len(), 1, 1.0);
    let mut params = TopicParams::random(v, 1, 0.01, &mut r);
    for _ in 0..3000 {
        params = update_phi(&bow, &params, &f, 2.0).unwrap();
    }
    let phi = simplex::topic_matrix(&params);
    for w in 0..v {
        assert!(
            (phi[(w, 0)] - freq[w]).abs() <= 1e-4,
            "{w}: {} vs {}",
            phi[(w, 0)],
            freq[w]
        );
    }
    assert!(params.logits.col(0).iter().sum::<f64>().abs() < 1e-9);
}

#[test]
fn single_narrative_converges_to_empirical_answer_frequencies() {
    let mut r = rng::seeded(2);
    let records: Vec<QaRecord> = (0..50)
        .map(|i| QaRecord {
            doc_id: id(i),
            answers: vec![rng::categorical(&mut r, &[0.5, 0.3, 0.2])],
        })
        .collect();
    let mut freq = [0.0; 3];
    for rec in &records {
        freq[rec.answers[0]] += 1.0 / 50.0;
    }
    let qa = QaDataset::new(1, 3, records).unwrap();
    let g = Matrix::filled(50, 1, 1.0);
    let mut params = NarrativeParams::random(1, 3, 1, 0.01, &mut r);
    for _ in 0..3000 {
        params = update_omega(&qa, None, &params, &g, 2.0).unwrap();
    }
    let omega = simplex::narrative_matrix(&params);
    for (a, f) in freq.iter().enumerate() {
        assert!((omega.row(0, a)[0] - f).abs() <= 1e-4);
    }
}

#[test]
fn zero_rates_leave_parameters_unchanged() {
    let mut r = rng::seeded(3);
    let bow = random_bow(&mut r, 4, 5);
    let topics = random_topics(&mut r, 5, 2);
    let f = random_mixtures(&mut r, 4, 2);
    assert_eq!(update_phi(&bow, &topics, &f, 0.0).unwrap(), topics);
    let qa = random_qa(&mut r, 4, 2, 3);
    let (params, _) = random_narratives(&mut r, 2, 3, 2);
    assert_eq!(update_omega(&qa, None, &params, &f, 0.0).unwrap(), params);
}

fn small_joint() -> TrainingData {
    let mut r = rng::seeded(4);
    let bow = random_bow(&mut r, 8, 5);
    let qa = random_qa(&mut r, 8, 3, 3);
    TrainingData::align(Some(&bow), Some(&qa), None).unwrap().0
}

#[test]
fn joint_objective_is_non_decreasing() {
    let data = small_joint();
    let cfg = TrainConfig {
        steps: 150,
        lr_f: 0.5,
        lr_g: 0.5,
        lr_phi: 0.5,
        lr_omega: 0.5,
        topics: 2,
        narratives: 2,
        latent_dim: 2,
        init_std: 0.5,
        ..TrainConfig::default()
    };
    let model = fit_joint(&data, &cfg).unwrap();
    let m = &model.manifest;
    assert_eq!(m.rounds.len(), cfg.steps);
    let mut trace: Vec<f64> = m
        .rounds
        .iter()
        .map(|r| r.bow_log_likelihood.unwrap() + r.qa_log_likelihood.unwrap())
        .collect();
    trace.push(m.final_bow_log_likelihood.unwrap() + m.final_qa_log_likelihood.unwrap());
    for w in trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
    }
    assert!(trace.last().unwrap() > &trace[0]);
}

#[test]
fn zero_rates_keep_mixtures_uniform() {
    let data = small_joint();
    let cfg = TrainConfig {
        steps: 5,
        lr_f: 0.0,
        lr_g: 0.0,
        lr_phi: 0.0,
        lr_omega: 0.0,
        topics: 3,
        narratives: 2,
        ..TrainConfig::default()
    };
    let model = fit_joint(&data, &cfg).unwrap();
    assert!(model
        .topic_mixtures
        .unwrap()
        .as_slice()
        .iter()
        .all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    assert!(model
        .narrative_mixtures
        .unwrap()
        .as_slice()
        .iter()
        .all(|&v| v == 0.5));
}

#[test]
fn fitting_is_deterministic() {
    let data = small_joint();
    let cfg = TrainConfig {
        steps: 20,
        topics: 2,
        narratives: 2,
        update_x: true,
        lr_x: 0.1,
        seed: 9,
        ..TrainConfig::default()
    };
    let a = fit_joint(&data, &cfg).unwrap();
    let b = fit_joint(&data, &cfg).unwrap();
    assert_eq!(a, b);
    let c = fit_joint(&data, &TrainConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn projected_mode_recomputes_anchors_from_the_projection() {
    let mut r = rng::seeded(6);
    let qa = random_qa(&mut r, 8, 3, 3);
    let emb = narrative_core::corpus::EmbeddingSet::new(
        (0..8)
            .map(|i| (id(i), rng::normal_vec(&mut r, 4, 1.0)))
            .collect(),
    )
    .unwrap();
    let (data, _) = TrainingData::align(None, Some(&qa), Some(&emb)).unwrap();
    let cfg = TrainConfig {
        steps: 10,
        narratives: 2,
        latent_dim: 2,
        mode: LatentMode::Projected,
        update_x: true,
        lr_x: 0.5,
        ..TrainConfig::default()
    };
    let model = fit_joint(&data, &cfg).unwrap();
    let w = model.latents.projection.as_ref().unwrap();
    let expect = data
        .embeddings
        .as_ref()
        .unwrap()
        .matmul(&w.transpose())
        .unwrap();
    assert_eq!(model.latents.anchors, expect);
    assert_eq!(model.latents.g_exp.as_ref().unwrap().anchors, expect);
}

#[test]
fn projected_mode_without_embeddings_is_a_config_error() {
    let data = small_joint();
    let cfg = TrainConfig {
        mode: LatentMode::Projected,
        ..TrainConfig::default()
    };
    assert!(matches!(fit_joint(&data, &cfg), Err(Error::Config(_))));
}

#[test]
fn masked_documents_do_not_affect_narratives() {
    let data = small_joint();
    let mask = vec![true, true, true, true, true, false, false, false];
    let masked = data.clone().with_qa_mask(mask).unwrap();
    let mut changed = data.qa.clone().unwrap().records().to_vec();
    for rec in &mut changed[5..] {
        rec.answers = rec.answers.iter().map(|y| (y + 1) % 3).collect();
    }
    let mut other = masked.clone();
    other.qa = Some(QaDataset::new(3, 3, changed).unwrap());
    let cfg = TrainConfig {
        steps: 10,
        topics: 2,
        narratives: 2,
        ..TrainConfig::default()
    };
    let a = fit_joint(&masked, &cfg).unwrap();
    let b = fit_joint(&other, &cfg).unwrap();
    assert_eq!(a.narratives, b.narratives);
    assert_eq!(a.narrative_mixtures, b.narrative_mixtures);
}

#[test]
fn planted_narratives_are_recovered() {
    let truth = generate(&SynthConfig {
        alpha: 10.0,
        beta: 0.1,
        seed: 0,
        ..SynthConfig::default()
    })
    .unwrap();
    let (data, _) = TrainingData::align(None, Some(&truth.answers), None).unwrap();
    let cfg = TrainConfig {
        kernel: BandwidthRule::Median { scale: 0.1 },
        narratives: 3,
        ..TrainConfig::default()
    };
    let model = fit_joint(&data, &cfg).unwrap();
    let rec = recovery(
        &truth.omega,
        &truth.mixtures,
        &model.narrative_matrix().unwrap(),
        model.narrative_mixtures.as_ref().unwrap(),
    )
    .unwrap();
    assert!(rec.rand_index >= 0.7, "rand index {}", rec.rand_index);
    assert!(rec.mean_cosine >= 0.9, "cosine {}", rec.mean_cosine);
}
