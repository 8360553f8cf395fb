use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wugkit::cluster::{brute_force, correlation_loss, solve, SolverParams};
use wugkit::model::{validate_label, Judgment, PairKey, Span, Use, UseId};
use wugkit::stats::{adjusted_rand_index, graded_change, spearman, SenseFrequencyDistribution};
use wugkit::wug::{build_wug, Wug};

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Wug {
    let uses: Vec<Use> = (0..n)
        .map(|i| Use::new(format!("u{i:02}"), "w", "w", Span::new(0, 1).unwrap()).unwrap())
        .collect();
    let mut js = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let pair = PairKey::new(uses[i].id.clone(), uses[j].id.clone()).unwrap();
            let label = validate_label(rng.random_range(1..=4)).unwrap();
            js.push(Judgment::new(pair, "a", label, DateTime::<Utc>::UNIX_EPOCH));
        }
    }
    build_wug(&uses, &js).unwrap()
}

/// Pair-counting form of the Hubert–Arabie index.
fn ari_pair_counting(p: &[usize], q: &[usize]) -> f64 {
    let n = p.len();
    let (mut a, mut b, mut c, mut d) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            match (p[i] == p[j], q[i] == q[j]) {
                (true, true) => a += 1.0,
                (true, false) => b += 1.0,
                (false, true) => c += 1.0,
                (false, false) => d += 1.0,
            }
        }
    }
    let denom = (a + b) * (b + d) + (a + c) * (c + d);
    if denom == 0.0 {
        return 1.0;
    }
    2.0 * (a * d - b * c) / denom
}

#[test]
fn ari_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(2..=12);
        let kp = rng.random_range(1..=n);
        let kq = rng.random_range(1..=n);
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..kp)).collect();
        let q: Vec<usize> = (0..n).map(|_| rng.random_range(0..kq)).collect();
        let got = adjusted_rand_index(&p, &q).unwrap();
        let want = ari_pair_counting(&p, &q);
        assert!((got - want).abs() < 1e-12, "{p:?} {q:?}: {got} vs {want}");
    }
}

/// Spearman as Pearson over ranks computed by counting.
fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&a| {
                let less = v.iter().filter(|&&b| b < a).count() as f64;
                let equal = v.iter().filter(|&&b| b == a).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[test]
fn spearman_matches_counting_ranks() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(3..30);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(1..=4) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(1..=4) as f64).collect();
        match spearman(&x, &y) {
            Ok(r) => assert!((r - spearman_oracle(&x, &y)).abs() < 1e-12),
            Err(_) => assert!(spearman_oracle(&x, &y).is_nan()),
        }
    }
}

fn dist(counts: &[(i64, u64)]) -> SenseFrequencyDistribution {
    SenseFrequencyDistribution {
        grouping: None,
        counts: counts.iter().copied().collect(),
        probabilities: None,
    }
}

#[test]
fn jsd_matches_natural_log_formula() {
    // arm: t1 = (2, 0, 1), t2 = (1, 2, 0)
    let p = [2.0 / 3.0, 0.0, 1.0 / 3.0];
    let q = [1.0 / 3.0, 2.0 / 3.0, 0.0];
    let kl = |a: &[f64], m: &[f64]| -> f64 {
        a.iter().zip(m).filter(|(x, _)| **x > 0.0).map(|(x, y)| x * (x / y).ln()).sum()
    };
    let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (a + b) / 2.0).collect();
    let want = ((0.5 * kl(&p, &m) + 0.5 * kl(&q, &m)) / std::f64::consts::LN_2).sqrt();
    let got = graded_change(&dist(&[(0, 2), (1, 0), (2, 1)]), &dist(&[(0, 1), (1, 2), (2, 0)])).unwrap();
    assert!((got - want).abs() < 1e-12);
    assert!((got - 0.7354).abs() < 1e-4);
}

#[test]
fn annealing_reaches_exhaustive_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let n = rng.random_range(2..=9);
        let g = random_graph(&mut rng, n);
        let exact = brute_force(&g).unwrap();
        let found = solve(&g, &SolverParams::seeded(case).with_restarts(20));
        assert_eq!(found.loss, exact.loss, "case {case}, n = {n}");
        assert_eq!(correlation_loss(&g, &found.assignment).unwrap(), found.loss);
    }
}

#[test]
fn uniform_graphs() {
    let ids: Vec<UseId> = (0..7).map(|i| UseId::new(format!("u{i}"))).collect();
    for (label, clusters) in [(4, 1), (1, 7)] {
        let uses: Vec<Use> = ids.iter().map(|id| Use::new(id.clone(), "w", "w", Span::new(0, 1).unwrap()).unwrap()).collect();
        let mut js = Vec::new();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                let pair = PairKey::new(ids[i].clone(), ids[j].clone()).unwrap();
                js.push(Judgment::new(pair, "a", validate_label(label).unwrap(), DateTime::<Utc>::UNIX_EPOCH));
            }
        }
        let c = solve(&build_wug(&uses, &js).unwrap(), &SolverParams::seeded(1));
        assert_eq!(c.num_clusters(), clusters);
        assert_eq!(c.loss, 0.0);
        let sizes: BTreeMap<i64, usize> = c.assignment.values().fold(BTreeMap::new(), |mut m, &k| {
            *m.entry(k).or_default() += 1;
            m
        });
        assert_eq!(sizes.len(), clusters);
    }
}
