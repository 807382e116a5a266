//! Randomized invariants: the statements that must hold on every space,
//! not just the worked examples.

use std::collections::BTreeSet;

use caplab_core::capacity::{solve_capacity_with, CapacityProblem, SolveOptions};
use caplab_core::gen::snowflake;
use caplab_core::potentials::{
    canonical_gradient, maximal_function, poincare_check, riesz_potential,
    verify_hajlasz_gradient,
};
use caplab_core::stats::estimate_doubling;
use caplab_core::{BallKind, Edge, FieldVector, FiniteMetricMeasureSpace, PointSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Distinct lattice points with random weights: always a valid metric,
/// never a duplicate-point degeneracy.
fn lattice_space() -> impl Strategy<Value = FiniteMetricMeasureSpace> {
    prop::collection::btree_set((0u8..12, 0u8..12), 2..=8).prop_flat_map(|pts| {
        let pts: Vec<(u8, u8)> = pts.into_iter().collect();
        let n = pts.len();
        (Just(pts), prop::collection::vec(0.2f64..2.0, n)).prop_map(|(pts, weights)| {
            let coords =
                pts.iter().map(|&(a, b)| vec![a as f64 / 11.0, b as f64 / 11.0]).collect();
            FiniteMetricMeasureSpace::from_coords(coords, weights, None).unwrap()
        })
    })
}

/// Path graph with random gaps and near-uniform weights; the edge graph
/// realizes the metric, so variational problems are admissible. Weights stay
/// within a factor 2 of each other: the 4^p comparison is a comparable-mass
/// statement, and a host boundary whose inside weight exceeds the outside
/// weight by more than 2^p defeats it (the relative Hajlasz gradient may
/// live outside the host where the upper gradient must vanish).
fn path_space() -> impl Strategy<Value = FiniteMetricMeasureSpace> {
    (2usize..=6).prop_flat_map(|n| {
        (
            prop::collection::vec(0.3f64..1.5, n - 1),
            prop::collection::vec(0.8f64..1.6, n),
        )
            .prop_map(|(gaps, weights)| {
                let mut pos = vec![0.0];
                for g in &gaps {
                    pos.push(pos.last().unwrap() + g);
                }
                let n = pos.len();
                let mut dist = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        dist[i * n + j] = (pos[i] - pos[j]).abs();
                    }
                }
                let edges =
                    (0..n - 1).map(|i| Edge { a: i, b: i + 1, len: gaps[i] }).collect();
                FiniteMetricMeasureSpace::from_dist(dist, weights, Some(edges)).unwrap()
            })
    })
}

fn random_field(space: &FiniteMetricMeasureSpace, seed: u64, lo: f64, hi: f64) -> FieldVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FieldVector::new((0..space.len()).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn scale_weights(space: &FiniteMetricMeasureSpace, lambda: f64) -> FiniteMetricMeasureSpace {
    let weights = space.weights().iter().map(|w| w * lambda).collect();
    match space.coords() {
        Some(coords) => FiniteMetricMeasureSpace::from_coords(
            coords.to_vec(),
            weights,
            space.edges().map(|e| e.to_vec()),
        )
        .unwrap(),
        None => {
            let n = space.len();
            let mut dist = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    dist[i * n + j] = space.dist(i, j);
                }
            }
            FiniteMetricMeasureSpace::from_dist(dist, weights, space.edges().map(|e| e.to_vec()))
                .unwrap()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn balls_are_monotone_in_radius(space in lattice_space(), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rng.gen_range(0..space.len());
        let mut last_open = 0.0;
        for &r in space.thresholds() {
            let open = space.mu_ball(x, r, BallKind::Open);
            let closed = space.mu_ball(x, r, BallKind::Closed);
            prop_assert!(open >= last_open - 1e-15);
            prop_assert!(open <= closed + 1e-15);
            prop_assert!(space.ball_count(x, r, BallKind::Open) <= space.ball_count(x, r, BallKind::Closed));
            last_open = open;
        }
    }

    #[test]
    fn doubling_ignores_weight_scale(space in lattice_space(), lambda in 0.1f64..50.0) {
        let base = estimate_doubling(&space);
        let scaled = estimate_doubling(&scale_weights(&space, lambda));
        prop_assert!((base - scaled).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn snowflake_composes(space in lattice_space(), a in 0.3f64..1.0, b in 0.3f64..1.0) {
        let twice = snowflake(&snowflake(&space, a).unwrap(), b).unwrap();
        let once = snowflake(&space, a * b).unwrap();
        for i in 0..space.len() {
            for j in 0..space.len() {
                prop_assert!((twice.dist(i, j) - once.dist(i, j)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn riesz_is_linear_and_monotone(space in lattice_space(), seed in 0u64..1000, beta in 0.3f64..1.0) {
        let f1 = random_field(&space, seed, 0.0, 2.0);
        let f2 = random_field(&space, seed.wrapping_add(1), 0.0, 2.0);
        let sum = FieldVector::new(
            f1.values.iter().zip(&f2.values).map(|(a, b)| a + b).collect(),
        ).unwrap();
        let i1 = riesz_potential(&space, &f1, beta, 0.0).unwrap();
        let i2 = riesz_potential(&space, &f2, beta, 0.0).unwrap();
        let isum = riesz_potential(&space, &sum, beta, 0.0).unwrap();
        for x in 0..space.len() {
            let lin = i1.values[x] + i2.values[x];
            prop_assert!((isum.values[x] - lin).abs() <= 1e-9 * lin.max(1.0));
            // monotone: sum dominates f1 pointwise
            prop_assert!(isum.values[x] >= i1.values[x] - 1e-12);
            prop_assert!(i1.values[x] >= 0.0);
        }
    }

    #[test]
    fn potentials_ignore_weight_scale(space in lattice_space(), seed in 0u64..1000, lambda in 0.1f64..50.0) {
        let f = random_field(&space, seed, 0.0, 2.0);
        let scaled_space = scale_weights(&space, lambda);
        let base_i = riesz_potential(&space, &f, 0.7, 0.0).unwrap();
        let scaled_i = riesz_potential(&scaled_space, &f, 0.7, 0.0).unwrap();
        let base_m = maximal_function(&space, &f).unwrap();
        let scaled_m = maximal_function(&scaled_space, &f).unwrap();
        for x in 0..space.len() {
            prop_assert!((base_i.values[x] - scaled_i.values[x]).abs() <= 1e-9 * base_i.values[x].max(1.0));
            prop_assert!((base_m.values[x] - scaled_m.values[x]).abs() <= 1e-9 * base_m.values[x].max(1.0));
        }
    }

    #[test]
    fn riesz_transports_through_snowflake(space in lattice_space(), seed in 0u64..1000, beta in 0.3f64..1.0) {
        // lattice symmetry can realize one distance twice, an ulp apart;
        // powf may then merge the pair and flip a strict ball membership,
        // which is a float artifact rather than a transport failure
        for w in space.thresholds().windows(2) {
            prop_assume!(w[1] - w[0] > 1e-12 * w[1]);
        }
        let f = random_field(&space, seed, 0.0, 2.0);
        let direct = riesz_potential(&space, &f, beta, 0.0).unwrap();
        let flaked = riesz_potential(&snowflake(&space, beta).unwrap(), &f, 1.0, 0.0).unwrap();
        for x in 0..space.len() {
            // exact per point: numerator and ball membership both transport
            prop_assert!((direct.values[x] - flaked.values[x]).abs() <= 1e-12 * direct.values[x].max(1.0));
        }
    }

    #[test]
    fn maximal_function_is_sublinear(space in lattice_space(), seed in 0u64..1000) {
        let f1 = random_field(&space, seed, 0.0, 2.0);
        let f2 = random_field(&space, seed.wrapping_add(1), 0.0, 2.0);
        let sum = FieldVector::new(
            f1.values.iter().zip(&f2.values).map(|(a, b)| a + b).collect(),
        ).unwrap();
        let m1 = maximal_function(&space, &f1).unwrap();
        let m2 = maximal_function(&space, &f2).unwrap();
        let msum = maximal_function(&space, &sum).unwrap();
        for x in 0..space.len() {
            prop_assert!(msum.values[x] <= m1.values[x] + m2.values[x] + 1e-12);
        }
    }

    #[test]
    fn canonical_gradient_always_verifies(space in lattice_space(), seed in 0u64..1000, beta in 0.3f64..1.0) {
        let u = random_field(&space, seed, -1.0, 1.0);
        let g = canonical_gradient(&space, &u, beta).unwrap();
        let check = verify_hajlasz_gradient(&space, &u, &g, beta).unwrap();
        prop_assert!(check.ok, "pair {:?} slack {}", check.worst_pair, check.worst_slack);
    }

    #[test]
    fn poincare_never_fails_on_canonical_pairs(space in lattice_space(), seed in 0u64..1000, p in 1.0f64..3.0) {
        let u = random_field(&space, seed, -1.0, 1.0);
        let g = canonical_gradient(&space, &u, 0.5).unwrap();
        let report = poincare_check(&space, &u, &g, 0.5, p).unwrap();
        prop_assert!(report.ok, "ball {:?} ratio {}", report.worst_ball, report.worst_ratio);
    }
}

proptest! {
    // capacity solves are the expensive cases; keep the count low
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn capacity_monotone_in_f(space in lattice_space(), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = space.len();
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let f1 = PointSet::new(vec![a]);
        let f2 = PointSet::new(vec![a, b]);
        // host = everything except one point outside both targets, so the
        // boundary constraint bites; n = 2 degenerates to the full space
        let excluded = (0..n).find(|&i| i != a && i != b);
        let omega = PointSet::new((0..n).filter(|&i| Some(i) != excluded).collect());
        let opts = SolveOptions::tight();
        let small = solve_capacity_with(&space, &CapacityProblem::hajlasz(f1, omega.clone(), 0.5, 2.0), &opts)
            .unwrap().value.as_f64();
        let large = solve_capacity_with(&space, &CapacityProblem::hajlasz(f2, omega, 0.5, 2.0), &opts)
            .unwrap().value.as_f64();
        prop_assert!(small <= large * (1.0 + 1e-5) + 1e-9, "{small} > {large}");
    }

    #[test]
    fn capacity_anti_monotone_in_omega(space in lattice_space(), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = space.len();
        let a = rng.gen_range(0..n);
        let f = PointSet::new(vec![a]);
        let r = space.diam() / 3.0;
        let omega1 = PointSet::new(space.ball_member_ids(a, r, BallKind::Open));
        let omega2 = PointSet::new(space.ball_member_ids(a, 2.0 * r, BallKind::Open));
        let opts = SolveOptions::tight();
        let tight_host = solve_capacity_with(&space, &CapacityProblem::hajlasz(f.clone(), omega1, 0.5, 2.0), &opts)
            .unwrap().value.as_f64();
        let wide_host = solve_capacity_with(&space, &CapacityProblem::hajlasz(f, omega2, 0.5, 2.0), &opts)
            .unwrap().value.as_f64();
        prop_assert!(wide_host <= tight_host * (1.0 + 1e-5) + 1e-9, "{wide_host} > {tight_host}");
    }

    #[test]
    fn capacity_scales_with_measure(space in lattice_space(), seed in 0u64..1000, lambda in 0.2f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = space.len();
        let a = rng.gen_range(0..n);
        let f = PointSet::new(vec![a]);
        let omega = PointSet::new(space.ball_member_ids(a, space.diam() / 2.0, BallKind::Open));
        let opts = SolveOptions::tight();
        let scaled_space = scale_weights(&space, lambda);
        for problem in [
            CapacityProblem::riesz(f.clone(), 0.5, 2.0),
            CapacityProblem::hajlasz(f.clone(), omega.clone(), 0.5, 2.0),
            CapacityProblem::content(f.clone(), 1.0, space.diam()),
        ] {
            let base = solve_capacity_with(&space, &problem, &opts).unwrap().value.as_f64();
            let scaled = solve_capacity_with(&scaled_space, &problem, &opts).unwrap().value.as_f64();
            prop_assert!(
                (scaled - lambda * base).abs() <= 1e-4 * (lambda * base).max(1e-9) + 1e-9,
                "{:?}: {scaled} vs lambda*{base}", problem.kind
            );
        }
    }

    #[test]
    fn variational_within_4p_of_hajlasz(space in path_space(), p in 1.2f64..3.0) {
        let n = space.len();
        let f = PointSet::new(vec![0]);
        let omega = PointSet::new((0..n - 1).collect());
        let opts = SolveOptions::tight();
        let var = solve_capacity_with(&space, &CapacityProblem::variational(f.clone(), omega.clone(), p), &opts)
            .unwrap().value.as_f64();
        let haj = solve_capacity_with(&space, &CapacityProblem::hajlasz(f, omega, 1.0, p), &opts)
            .unwrap().value.as_f64();
        prop_assert!(var <= 4.0f64.powf(p) * haj + 1e-6, "{var} vs 4^p * {haj}");
    }

    #[test]
    fn ball_pair_bounds_hajlasz_capacity(space in lattice_space(), seed in 0u64..1000, beta in 0.3f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rng.gen_range(0..space.len());
        let r = space.diam() * rng.gen_range(0.1..0.45);
        prop_assume!(r > 0.0);
        let f = PointSet::new(space.ball_member_ids(x, r, BallKind::Closed));
        let omega = PointSet::new(space.ball_member_ids(x, 2.0 * r, BallKind::Open));
        let p = 2.0;
        let value = solve_capacity_with(&space, &CapacityProblem::hajlasz(f, omega, beta, p), &SolveOptions::tight())
            .unwrap().value.as_f64();
        let bound = r.powf(-beta * p) * space.mu_ball(x, 2.0 * r, BallKind::Open);
        prop_assert!(value <= bound * (1.0 + 1e-5) + 1e-9, "{value} > {bound}");
    }
}
