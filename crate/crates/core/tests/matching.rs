mod common;

use mst_core::matching::grid_pairs;
use mst_core::{
    brute_force_labeling, build_data_cost, cosine_distance, gather_groups, solve_labeling,
    total_energy, DataCost, EnergyParams, FeatureMatrix, LabelField, Metric,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn params(lambda: f64) -> EnergyParams {
    EnergyParams::new(lambda, Metric::Cosine).unwrap()
}

fn literal_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    1.0 - dot / (na * nb).sqrt()
}

#[test]
fn cosine_matches_literal_formula() {
    let mut rng = common::rng(20);
    for _ in 0..500 {
        let c = rng.gen_range(1..64);
        let a: Vec<f64> = (0..c).map(|_| common::gaussian(&mut rng)).collect();
        let b: Vec<f64> = (0..c).map(|_| common::gaussian(&mut rng)).collect();
        assert!((cosine_distance(&a, &b) - literal_cosine(&a, &b)).abs() < 1e-6);
    }
}

#[test]
fn data_cost_matches_double_loop() {
    let mut rng = common::rng(21);
    let (c, n, k) = (5, 30, 4);
    let content = DMatrix::from_fn(c, n, |_, _| rng.gen_range(-1.0..1.0));
    let centers = DMatrix::from_fn(c, k, |_, _| rng.gen_range(-1.0..1.0));
    let features = FeatureMatrix::new(content.clone());
    for metric in [Metric::Cosine, Metric::Euclidean] {
        let costs = build_data_cost(&features, &centers, &EnergyParams::new(0.1, metric).unwrap()).unwrap();
        for j in 0..k {
            for p in 0..n {
                let x: Vec<f64> = content.column(p).iter().copied().collect();
                let y: Vec<f64> = centers.column(j).iter().copied().collect();
                let expected = match metric {
                    Metric::Cosine => literal_cosine(&x, &y),
                    Metric::Euclidean => x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
                };
                assert!((costs.get(j, p) - expected).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn grid_pairs_cover_each_neighbor_once() {
    let (h, w) = (4, 5);
    let pairs: Vec<_> = grid_pairs(h, w).collect();
    assert_eq!(pairs.len(), h * (w - 1) + (h - 1) * w);
    let mut seen = std::collections::HashSet::new();
    for (p, q) in pairs {
        assert!(p < q);
        assert!(q == p + 1 && q % w != 0 || q == p + w);
        assert!(seen.insert((p, q)));
    }
}

#[test]
fn zero_lambda_is_per_position_argmin() {
    let mut rng = common::rng(22);
    for _ in 0..50 {
        let k = rng.gen_range(1..6);
        let (h, w) = (rng.gen_range(1..8), rng.gen_range(1..8));
        let costs = common::random_costs(&mut rng, k, h * w, 2.0);
        let labels = solve_labeling(&costs, h, w, &params(0.0), None).unwrap();
        assert_eq!(labels.labels(), &costs.argmin_labels()[..]);
    }
}

#[test]
fn huge_lambda_gives_a_uniform_labeling() {
    let mut rng = common::rng(23);
    for _ in 0..30 {
        let k = rng.gen_range(2..5);
        let (h, w) = (rng.gen_range(2..7), rng.gen_range(2..7));
        let costs = common::random_costs(&mut rng, k, h * w, 2.0);
        let lambda = 2.0 * (h * w) as f64 + 1.0;
        let labels = solve_labeling(&costs, h, w, &params(lambda), None).unwrap();
        assert_eq!(labels.discordant_pairs(), 0);
        if k == 2 {
            let best = (0..k)
                .min_by(|&a, &b| {
                    let ea: f64 = (0..h * w).map(|p| costs.get(a, p)).sum();
                    let eb: f64 = (0..h * w).map(|p| costs.get(b, p)).sum();
                    ea.partial_cmp(&eb).unwrap()
                })
                .unwrap();
            assert_eq!(labels.get(0), best);
        }
    }
}

#[test]
fn brute_force_agrees_with_independent_enumeration() {
    let mut rng = common::rng(24);
    for _ in 0..30 {
        let k = rng.gen_range(1..4);
        let (h, w) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let costs = common::random_costs(&mut rng, k, h * w, 1.0);
        let lambda = rng.gen_range(0.0..0.5);
        let found = brute_force_labeling(&costs, h, w, &params(lambda)).unwrap();
        let (oracle, _) = common::exhaustive_min(&costs, h, w, lambda);
        assert!((total_energy(&found, &costs, &params(lambda)) - oracle).abs() < 1e-12);
    }
}

#[test]
fn init_is_respected_and_never_worsened() {
    let mut rng = common::rng(25);
    for _ in 0..30 {
        let (h, w) = (4, 4);
        let costs = common::random_costs(&mut rng, 3, h * w, 1.0);
        let init = LabelField::new(h, w, (0..h * w).map(|_| rng.gen_range(0..3)).collect()).unwrap();
        let p = params(0.3);
        let out = solve_labeling(&costs, h, w, &p, Some(&init)).unwrap();
        assert!(total_energy(&out, &costs, &p) <= total_energy(&init, &costs, &p));
    }
}

#[test]
fn gather_groups_partitions_positions() {
    let mut rng = common::rng(26);
    for _ in 0..30 {
        let (h, w) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let k = rng.gen_range(1..5);
        let labels = LabelField::new(h, w, (0..h * w).map(|_| rng.gen_range(0..k)).collect()).unwrap();
        let content = FeatureMatrix::new(DMatrix::zeros(2, h * w));
        let groups = gather_groups(&content, &labels).unwrap();
        let mut all: Vec<usize> = groups.iter().flat_map(|(_, g)| g.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..h * w).collect::<Vec<_>>());
        for pair in groups.windows(2) {
            assert!(pair[0].0 < pair[1].0);
        }
        for (label, positions) in &groups {
            assert!(!positions.is_empty());
            assert!(positions.windows(2).all(|p| p[0] < p[1]));
            assert!(positions.iter().all(|&p| labels.get(p) == *label));
        }
    }
}

#[test]
fn mismatched_shapes_are_errors() {
    let costs = DataCost::from_rows(&[vec![0.0; 6], vec![1.0; 6]]).unwrap();
    assert!(solve_labeling(&costs, 2, 2, &params(0.1), None).is_err());
    let bad_init = LabelField::uniform(2, 3, 5);
    assert!(solve_labeling(&costs, 2, 3, &params(0.1), Some(&bad_init)).is_err());
    assert!(EnergyParams::new(f64::NAN, Metric::Cosine).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn energy_matches_literal_oracle(seed in any::<u64>(), lambda in 0.0f64..2.0) {
        let mut rng = common::rng(seed);
        let k = rng.gen_range(1..5);
        let (h, w) = (rng.gen_range(1..7), rng.gen_range(1..7));
        let costs = common::random_costs(&mut rng, k, h * w, 2.0);
        let raw: Vec<usize> = (0..h * w).map(|_| rng.gen_range(0..k)).collect();
        let labels = LabelField::new(h, w, raw.clone()).unwrap();
        let got = total_energy(&labels, &costs, &params(lambda));
        let want = common::literal_energy(&raw, &costs, h, w, lambda);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn binary_labeling_is_exact(seed in any::<u64>(), lambda in 0.0f64..1.5) {
        let mut rng = common::rng(seed);
        let (h, w) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let costs = common::random_costs(&mut rng, 2, h * w, 1.0);
        let labels = solve_labeling(&costs, h, w, &params(lambda), None).unwrap();
        let (oracle, _) = common::exhaustive_min(&costs, h, w, lambda);
        prop_assert!((total_energy(&labels, &costs, &params(lambda)) - oracle).abs() <= 1e-9);
    }

    #[test]
    fn expansion_is_within_twice_the_optimum(seed in any::<u64>(), lambda in 0.0f64..0.5) {
        let mut rng = common::rng(seed);
        let k = rng.gen_range(3..5);
        let (h, w) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let costs = common::random_costs(&mut rng, k, h * w, 1.0);
        let p = params(lambda);
        let labels = solve_labeling(&costs, h, w, &p, None).unwrap();
        let (oracle, _) = common::exhaustive_min(&costs, h, w, lambda);
        let got = total_energy(&labels, &costs, &p);
        prop_assert!(got <= 2.0 * oracle + 1e-9);
        let init = LabelField::new(h, w, costs.argmin_labels()).unwrap();
        prop_assert!(got <= total_energy(&init, &costs, &p) + 1e-12);
    }

    #[test]
    fn discordance_shrinks_as_lambda_grows(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (h, w) = (rng.gen_range(2..6), rng.gen_range(2..6));
        let costs = common::random_costs(&mut rng, 2, h * w, 1.0);
        let mut last = usize::MAX;
        for lambda in [0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0] {
            let d = solve_labeling(&costs, h, w, &params(lambda), None).unwrap().discordant_pairs();
            prop_assert!(d <= last);
            last = d;
        }
    }

    #[test]
    fn relabeling_costs_permutes_the_binary_solution(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (h, w) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let costs = common::random_costs(&mut rng, 2, h * w, 1.0);
        let swapped = DataCost::from_rows(&[
            (0..h * w).map(|p| costs.get(1, p)).collect(),
            (0..h * w).map(|p| costs.get(0, p)).collect(),
        ]).unwrap();
        let p = params(0.2);
        let a = solve_labeling(&costs, h, w, &p, None).unwrap();
        let b = solve_labeling(&swapped, h, w, &p, None).unwrap();
        prop_assert!((total_energy(&a, &costs, &p) - total_energy(&b, &swapped, &p)).abs() < 1e-9);
    }
}
