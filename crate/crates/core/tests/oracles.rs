//! Checks against independently computed expected values.

use activelabel_core::classifier::{loss_and_grad, LinearHead, Matrix};
use activelabel_core::embed::hash_embed;
use activelabel_core::metrics::Metrics;
use activelabel_core::rng;
use activelabel_core::strategies::{select_query_batch, QueryStrategy, ScoreRecord};
use rand::Rng;

/// Mean cross-entropy plus the weight penalty, written without sharing any
/// code with the library.
fn naive_loss(w: &[f64], b: &[f64], k: usize, d: usize, x: &[Vec<f64>], y: &[usize], l2: f64) -> f64 {
    let mut total = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let z: Vec<f64> = (0..k)
            .map(|c| (0..d).map(|j| w[c * d + j] * xi[j]).sum::<f64>() + b[c])
            .collect();
        let denom: f64 = z.iter().map(|v| v.exp()).sum();
        total += -(z[yi].exp() / denom).ln();
    }
    total / y.len() as f64 + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = rng::stream(42, 77);
    let h = 1e-5;
    for case in 0..25 {
        let (n, d, k) = if case == 0 { (5, 4, 3) } else { (rng.random_range(1..8), rng.random_range(1..6), rng.random_range(2..5)) };
        let l2 = if case % 2 == 0 { 0.0 } else { rng.random_range(0.0..0.1) };
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let labels: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
        let mut head = LinearHead::zeros(labels, d).unwrap();
        head.weights.as_mut_slice().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        head.bias.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));

        let xm = Matrix::from_rows(d, x.iter().map(|r| r.as_slice())).unwrap();
        let lg = loss_and_grad(&head, &xm, &y, l2).unwrap();
        let w = head.weights.as_slice().to_vec();
        let b = head.bias.clone();
        assert!((lg.loss - naive_loss(&w, &b, k, d, &x, &y, l2)).abs() < 1e-12);

        let mut fd_w = vec![0.0; w.len()];
        for i in 0..w.len() {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[i] += h;
            wm[i] -= h;
            fd_w[i] = (naive_loss(&wp, &b, k, d, &x, &y, l2) - naive_loss(&wm, &b, k, d, &x, &y, l2)) / (2.0 * h);
        }
        let mut fd_b = vec![0.0; k];
        for i in 0..k {
            let (mut bp, mut bm) = (b.clone(), b.clone());
            bp[i] += h;
            bm[i] -= h;
            fd_b[i] = (naive_loss(&w, &bp, k, d, &x, &y, l2) - naive_loss(&w, &bm, k, d, &x, &y, l2)) / (2.0 * h);
        }
        let analytic: Vec<f64> = lg.grad_weights.as_slice().iter().chain(&lg.grad_bias).copied().collect();
        let numeric: Vec<f64> = fd_w.iter().chain(&fd_b).copied().collect();
        let err = rel_err(&analytic, &numeric);
        assert!(err <= 1e-6, "case {case}: relative error {err:e}");
    }
}

fn brute_force(scores: &[ScoreRecord], k: usize, strategy: QueryStrategy) -> Vec<String> {
    let mut keyed: Vec<(f64, &str)> = scores
        .iter()
        .map(|s| {
            let key = match strategy {
                QueryStrategy::Margin => s.margin,
                QueryStrategy::LeastConfidence => -s.least_confidence,
                QueryStrategy::Entropy => -s.entropy,
                QueryStrategy::Random => unreachable!(),
            };
            (key, s.doc_id.as_str())
        })
        .collect();
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
    keyed.into_iter().take(k).map(|(_, id)| id.to_owned()).collect()
}

#[test]
fn thousand_doc_margin_batch_matches_full_sort() {
    let mut rng = rng::stream(3, 3);
    let scores: Vec<ScoreRecord> = (0..1000)
        .map(|i| {
            // coarse logits so some margins tie
            let logits = (0..3).map(|_| f64::from(rng.random_range(0..20)) / 4.0).collect();
            ScoreRecord::from_logits(format!("doc{i:04}"), logits)
        })
        .collect();
    let got = select_query_batch(&scores, 40, QueryStrategy::Margin, &mut rng::stream(0, 0)).unwrap();
    assert_eq!(got, brute_force(&scores, 40, QueryStrategy::Margin));
}

#[test]
fn hash_embed_golden_vectors() {
    let fixtures: serde_json::Value =
        serde_json::from_str(include_str!("fixtures/hash_embed.json")).unwrap();
    for case in fixtures["cases"].as_array().unwrap() {
        let text = case["text"].as_str().unwrap();
        let dim = case["dim"].as_u64().unwrap() as usize;
        let salt = case["salt"].as_u64().unwrap();
        let expected: Vec<f64> = case["embedding"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        let got = hash_embed(text, dim, salt);
        assert_eq!(got, expected, "{text:?} salt {salt}");
        let norm = got.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm == 0.0 || (norm - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn macro_f1_from_hand_counts() {
    // gold [A,A,B,B], predicted [A,B,B,B]
    let labels = vec!["A".to_string(), "B".to_string()];
    let m = Metrics::from_predictions(&labels, &[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap();
    assert!((m.macro_f1 - 11.0 / 15.0).abs() < 1e-15);
}
