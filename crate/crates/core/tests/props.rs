use narrative_core::eval::{hungarian_align, js_divergence, rand_index};
use narrative_core::simplex::{softmax, NarrativeMatrix};
use narrative_core::trainer::residual_g;
use narrative_core::Matrix;
use proptest::prelude::*;

fn pmf(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-6.0f64..6.0, k).prop_map(|v| softmax(&v).unwrap().into_vec())
}

proptest! {
    #[test]
    fn softmax_is_a_valid_pmf(v in prop::collection::vec(-700.0f64..700.0, 1..12)) {
        let p = softmax(&v).unwrap();
        prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.probs().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn residuals_sum_to_zero(g in pmf(4), cols in prop::collection::vec(pmf(3), 4), answers in prop::collection::vec(0usize..3, 1)) {
        let probs = Matrix::from_fn(3, 4, |a, k| cols[k][a]);
        let omega = NarrativeMatrix::from_probs(1, 3, probs).unwrap();
        let r = residual_g(&answers, &omega, &g).unwrap();
        prop_assert!(r.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn rand_index_properties(a in prop::collection::vec(0usize..4, 2..40), shift in 1usize..4) {
        let b: Vec<usize> = a.iter().rev().cloned().collect();
        let ab = rand_index(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, rand_index(&b, &a).unwrap());
        let relabeled: Vec<usize> = a.iter().map(|x| (x + shift) % 4).collect();
        prop_assert_eq!(rand_index(&a, &relabeled).unwrap(), 1.0);
    }

    #[test]
    fn jsd_properties(p in pmf(5), q in pmf(5)) {
        let d = js_divergence(&p, &q).unwrap();
        prop_assert!((-1e-15..=1.0 + 1e-12).contains(&d));
        prop_assert!((d - js_divergence(&q, &p).unwrap()).abs() < 1e-15);
        prop_assert!(js_divergence(&p, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn hungarian_is_injective(m in 1usize..6, extra in 0usize..4, seed in prop::collection::vec(-10.0f64..10.0, 100)) {
        let n = m + extra;
        let cost = Matrix::from_fn(m, n, |i, j| seed[i * 10 + j]);
        let al = hungarian_align(&cost).unwrap();
        let mut cols = al.assignment.clone();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(cols.len(), m);
        prop_assert_eq!(al.unmatched.len(), extra);
    }
}
