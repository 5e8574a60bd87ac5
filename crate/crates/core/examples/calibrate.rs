//! Sweeps the synthetic class separation and reports, per value, the
//! full-pool macro-F1 and the labels margin and random sampling need to come
//! within 0.02 of it.
//!
//! cargo run --release -p activelabel-core --example calibrate -- 2.0 2.5 3.0

use std::sync::Arc;

use activelabel_core::session::{full_pool_reference, labels_to_reach, simulate_session, SessionConfig};
use activelabel_core::synthetic::{generate, SyntheticConfig};
use activelabel_core::QueryStrategy;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 }
}

fn main() {
    let separations: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("separation")).collect();
    for sep in separations {
        let mut refs = Vec::new();
        let (mut margin, mut random, mut minority) = (Vec::new(), Vec::new(), Vec::new());
        for seed in 0..5u64 {
            let corpus = Arc::new(generate(&SyntheticConfig { separation: sep, seed, ..SyntheticConfig::default() }).unwrap());
            let config = SessionConfig { rng_seed: seed, ..SessionConfig::for_corpus(&corpus) };
            let reference = full_pool_reference(&corpus, &config).unwrap().macro_f1;
            let target = reference - 0.02;
            let never = (config.n_seed + config.max_rounds as usize * config.batch_size + config.batch_size) as f64;
            let m = simulate_session(corpus.clone(), config.clone()).unwrap();
            let r = simulate_session(corpus.clone(), SessionConfig { strategy: QueryStrategy::Random, ..config }).unwrap();
            let lm = labels_to_reach(m.history(), target).map_or(never, |n| n as f64);
            let lr = labels_to_reach(r.history(), target).map_or(never, |n| n as f64);
            let mf: Vec<f64> = m.history()[1..].iter().filter_map(|h| h.minority_fraction).collect();
            println!(
                "sep {sep} seed {seed}: full {reference:.4} margin {lm} random {lr} minority median {:.3} final m {:.4} r {:.4}",
                median(mf.clone()),
                m.history().last().unwrap().macro_f1.unwrap(),
                r.history().last().unwrap().macro_f1.unwrap()
            );
            refs.push(reference);
            margin.push(lm);
            random.push(lr);
            minority.extend(mf);
        }
        println!(
            "sep {sep}: full-pool median {:.4} [{:.4}, {:.4}], labels margin {} random {} ratio {:.3}, minority median {:.3}",
            median(refs.clone()),
            refs.iter().copied().fold(f64::INFINITY, f64::min),
            refs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            median(margin.clone()),
            median(random.clone()),
            median(margin) / median(random),
            median(minority)
        );
    }
}
