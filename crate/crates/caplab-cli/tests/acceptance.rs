//! Acceptance gate: one test per criterion, each printing a single
//! PASS line with its measured figures (visible under --nocapture).

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use caplab_core::capacity::{
    solve_capacity, solve_capacity_with, CapacityKind, CapacityProblem, SolveOptions,
};
use caplab_core::chain::{build_ball_chain, validate_ball_chain};
use caplab_core::density::{comparability_scan, content_restriction_check, ComparabilityPair};
use caplab_core::gen::{gen_grid, gen_weighted_line, path3, snowflake, two_point_space};
use caplab_core::potentials::{
    canonical_gradient, check_gradient_of_potential, kernel_estimate_measure, maximal_function,
    poincare_check, riesz_potential, verify_hajlasz_gradient,
};
use caplab_core::{
    brute_force_capacity, BallKind, Edge, FieldVector, FiniteMetricMeasureSpace, PointSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

fn random_space(rng: &mut ChaCha8Rng, n: usize) -> FiniteMetricMeasureSpace {
    loop {
        let coords: Vec<Vec<f64>> =
            (0..n).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
        if let Ok(s) = FiniteMetricMeasureSpace::from_coords(coords, weights, None) {
            return s;
        }
    }
}

/// Path graph with random gaps: gives variational problems an edge graph
/// whose path metric matches the stated distances exactly.
fn random_path_space(rng: &mut ChaCha8Rng, n: usize) -> FiniteMetricMeasureSpace {
    let gaps: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.3..1.5)).collect();
    let mut pos = vec![0.0];
    for g in &gaps {
        pos.push(pos.last().unwrap() + g);
    }
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            dist[i * n + j] = (pos[i] - pos[j]).abs();
        }
    }
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
    let edges = (0..n - 1).map(|i| Edge { a: i, b: i + 1, len: gaps[i] }).collect();
    FiniteMetricMeasureSpace::from_dist(dist, weights, Some(edges)).unwrap()
}

fn shuffled(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        ids.swap(i, j);
    }
    ids
}

/// Runs one pinned `reproduce` case through the binary and returns the
/// emitted report text; the case itself enforces its assertions (exit 1
/// plus a non-pass verdict on failure).
fn run_reproduce_case(case: &str, dir: &Path) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_caplab"))
        .args(["reproduce", "--case", case, "--out"])
        .arg(dir.join(case))
        .env_remove("CAPLAB_SEED")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "case {case} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(dir.join(case).join("report.txt")).unwrap();
    assert!(report.contains("verdict = pass"), "{report}");
    report
}

fn left_half(space: &FiniteMetricMeasureSpace) -> PointSet {
    let coords = space.coords().unwrap();
    PointSet::new((0..space.len()).filter(|&i| coords[i][0] <= 0.5).collect())
}

#[test]
fn criterion_01_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20260822);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let kind = match trial % 4 {
            0 => CapacityKind::Riesz,
            1 => CapacityKind::Hajlasz,
            2 => CapacityKind::Variational,
            _ => CapacityKind::Content,
        };
        let n = if kind == CapacityKind::Content {
            rng.gen_range(4..=8)
        } else {
            rng.gen_range(2..=5)
        };
        let space = if kind == CapacityKind::Variational {
            random_path_space(&mut rng, n)
        } else {
            random_space(&mut rng, n)
        };
        let ids = shuffled(&mut rng, n);
        let f_size = rng.gen_range(1..=n.min(3));
        let f = PointSet::new(ids[..f_size].to_vec());
        let omega = PointSet::new(ids[..rng.gen_range(f_size..=n)].to_vec());
        let beta = [0.5, 1.0][rng.gen_range(0..2)];
        let p = [1.5, 2.0, 3.0][rng.gen_range(0..3)];
        let problem = match kind {
            CapacityKind::Riesz => CapacityProblem::riesz(f, beta, p),
            CapacityKind::Hajlasz => CapacityProblem::hajlasz(f, omega, beta, p),
            CapacityKind::Variational => CapacityProblem::variational(f, omega, p),
            CapacityKind::Content => {
                CapacityProblem::content(f, rng.gen_range(0.5..2.0), rng.gen_range(0.2..1.0))
            }
        };
        let oracle = brute_force_capacity(&space, &problem).unwrap();
        let solved = solve_capacity_with(&space, &problem, &SolveOptions::tight()).unwrap();
        let gap = rel_gap(solved.value.as_f64(), oracle.value.as_f64());
        assert!(gap <= 1e-6, "trial {trial} ({kind:?}, n={n}): gap {gap:.3e}");
        worst = worst.max(gap);
    }
    assert!(start.elapsed() < Duration::from_secs(120));
    println!(
        "PASS criterion 1: 100 random instances, worst solver-vs-oracle gap {worst:.2e}, {:.1}s",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_02_pinned_small_values() {
    let two = two_point_space(1.0);
    let three = path3();
    let f0 = || PointSet::new(vec![0]);
    let cases: [(&str, &FiniteMetricMeasureSpace, CapacityProblem, f64); 6] = [
        ("two-point hajlasz", &two, CapacityProblem::hajlasz(f0(), f0(), 1.0, 2.0), 0.5),
        ("two-point riesz", &two, CapacityProblem::riesz(f0(), 1.0, 2.0), 1.0),
        ("two-point variational", &two, CapacityProblem::variational(f0(), f0(), 2.0), 4.0),
        (
            "path3 hajlasz",
            &three,
            CapacityProblem::hajlasz(f0(), PointSet::new(vec![0, 1]), 1.0, 2.0),
            0.1875,
        ),
        ("path3 riesz", &three, CapacityProblem::riesz(f0(), 1.0, 2.0), 0.5),
        (
            "path3 variational",
            &three,
            CapacityProblem::variational(f0(), PointSet::new(vec![0, 1]), 2.0),
            0.8,
        ),
    ];
    for (name, space, problem, pinned) in cases {
        let oracle = brute_force_capacity(space, &problem).unwrap();
        let gap = rel_gap(oracle.value.as_f64(), pinned);
        assert!(gap <= 1e-6, "{name}: oracle {} vs pinned {pinned}", oracle.value.as_f64());
    }
    println!("PASS criterion 2: six pinned values reproduced by the oracle to 1e-6");
}

#[test]
fn criterion_03_weighted_line_degeneracy() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let report = run_reproduce_case("weighted-line-degenerate", dir.path());
    assert!(start.elapsed() < Duration::from_secs(180));
    let certs: Vec<f64> = report
        .lines()
        .filter_map(|l| l.trim().strip_prefix("energy = "))
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(certs.len(), 3);
    println!(
        "PASS criterion 3: certificates {certs:?} under (2/3) rho + 10 mesh, final below 0.5, {:.1}s",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_04_ball_comparability() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let report = run_reproduce_case("ball-comparability", dir.path());
    assert!(start.elapsed() < Duration::from_secs(300));
    let spread: f64 = report
        .lines()
        .find_map(|l| l.trim().strip_prefix("ratio_spread = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(spread <= 20.0);
    println!(
        "PASS criterion 4: ball capacities under the measured-c_mu bound, ratio spread {spread:.2} across three scales, {:.1}s",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_05_one_sided_comparability() {
    let start = Instant::now();
    let space = gen_grid(17, 2).unwrap();
    let e = left_half(&space);
    let radii = [0.25, 0.125, 0.0625];
    let mut min_ratio = f64::INFINITY;
    let mut samples = 0usize;
    for beta in [0.5, 1.0] {
        let report =
            comparability_scan(&space, &e, ComparabilityPair::RieszHajlasz, beta, 2.0, &radii)
                .unwrap();
        for s in &report.samples {
            if s.ratio.is_finite() && s.rhs > 0.0 {
                assert!(s.ratio > 0.0, "beta {beta}, cell ({}, {})", s.x, s.r);
                min_ratio = min_ratio.min(s.ratio);
                samples += 1;
            }
        }
    }
    assert!(samples >= 6, "only {samples} usable samples");
    assert!(min_ratio > 0.01, "min ratio {min_ratio}");
    assert!(start.elapsed() < Duration::from_secs(600));
    println!(
        "PASS criterion 5: {samples} hajlasz/riesz ratios all positive, min {min_ratio:.3}, {:.1}s",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_06_two_sided_band() {
    let space = gen_grid(17, 2).unwrap();
    let e = left_half(&space);
    let report = comparability_scan(
        &space,
        &e,
        ComparabilityPair::RieszHajlasz,
        0.5,
        2.0,
        &[0.25, 0.125, 0.0625],
    )
    .unwrap();
    assert!(report.two_sided, "warnings: {:?}", report.warnings);
    assert!(report.band_spread <= 20.0, "band spread {}", report.band_spread);
    println!(
        "PASS criterion 6: two-sided band [{:.3}, {:.3}], spread {:.2} <= 20",
        report.band.0, report.band.1, report.band_spread
    );
}

#[test]
fn criterion_07_kernel_estimate_stability() {
    let coarse = kernel_estimate_measure(&gen_grid(9, 2).unwrap(), 0.5, 1.0).unwrap();
    let fine = kernel_estimate_measure(&gen_grid(17, 2).unwrap(), 0.5, 1.0).unwrap();
    for report in [&coarse, &fine] {
        assert!(!report.vacuous && report.c_k_observed.is_finite() && report.c_k_observed > 0.0);
    }
    let ratio = (coarse.c_k_observed / fine.c_k_observed).max(fine.c_k_observed / coarse.c_k_observed);
    assert!(ratio <= 2.0, "c_K {} vs {}", coarse.c_k_observed, fine.c_k_observed);
    println!(
        "PASS criterion 7: c_K {:.3} (9x9) vs {:.3} (17x17), within factor {ratio:.2}",
        coarse.c_k_observed, fine.c_k_observed
    );
}

#[test]
fn criterion_08_gradient_of_potential() {
    let space = gen_grid(17, 1).unwrap();
    let (beta, eta) = (0.5, 1.0);
    let kernel = kernel_estimate_measure(&space, beta, eta).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut constants = Vec::new();
    for _ in 0..20 {
        let f = FieldVector::new((0..space.len()).map(|_| rng.gen_range(0.0..2.0)).collect())
            .unwrap();
        let report = check_gradient_of_potential(&space, &f, beta, eta, &kernel).unwrap();
        let u = riesz_potential(&space, &f, beta, 0.0).unwrap();
        let mf = maximal_function(&space, &f).unwrap();
        let g = FieldVector::new(mf.values.iter().map(|m| report.c1_observed * m).collect())
            .unwrap();
        let check = verify_hajlasz_gradient(&space, &u, &g, beta).unwrap();
        assert!(check.ok, "pair {:?} slack {}", check.worst_pair, check.worst_slack);
        constants.push(report.c1_observed);
    }
    let max = constants.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = constants.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    assert!(max / min <= 10.0, "C1 range [{min}, {max}]");
    println!("PASS criterion 8: C1_observed in [{min:.3}, {max:.3}], spread {:.2} <= 10", max / min);
}

#[test]
fn criterion_09_poincare_suite() {
    let space = gen_grid(17, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let combos: Vec<(f64, f64)> =
        [0.5, 1.0].iter().flat_map(|&b| [1.5, 2.0, 3.0].map(|p| (b, p))).collect();
    let mut checked = 0usize;
    for trial in 0..100 {
        let (beta, p) = combos[trial % combos.len()];
        let u = FieldVector::new(
            (0..space.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let g = canonical_gradient(&space, &u, beta).unwrap();
        let report = poincare_check(&space, &u, &g, beta, p).unwrap();
        assert!(
            report.ok,
            "trial {trial} (beta {beta}, p {p}): ball {:?} ratio {}",
            report.worst_ball, report.worst_ratio
        );
        checked += report.balls_checked;
    }
    println!("PASS criterion 9: zero Poincare violations over 100 pairs, {checked} balls checked");
}

#[test]
fn criterion_10_content_identities() {
    let space = gen_grid(17, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for trial in 0..20 {
        let x = rng.gen_range(0..space.len());
        let (_, dists) = space.sorted_row(x);
        // keep the target small enough for a certified exact cover; radii
        // alternate between realized distances and values strictly between
        let k = rng.gen_range(3..30);
        let r = if trial % 2 == 0 { dists[k] } else { 0.5 * (dists[k] + dists[k + 1]) };
        let q = [0.5, 1.0, 2.0][trial % 3];
        let members = PointSet::new(space.ball_member_ids(x, r, BallKind::Open));
        let mu = space.mu_ball(x, r, BallKind::Open);
        let solved =
            solve_capacity(&space, &CapacityProblem::content(members.clone(), q, r)).unwrap();
        assert!(solved.certified, "trial {trial}: cover not certified optimal");
        let identity = r.powf(-q) * mu;
        assert!(
            rel_gap(solved.value.as_f64(), identity) <= 1e-9,
            "trial {trial}: content {} vs r^-q mu(B) {identity}",
            solved.value.as_f64()
        );
        let restriction = content_restriction_check(&space, &members, q, r).unwrap();
        assert!(
            restriction.unrestricted <= restriction.restricted * (1.0 + 1e-12),
            "trial {trial}: unrestricted above restricted"
        );
    }
    println!("PASS criterion 10: 20 ball content identities exact to 1e-9, unrestricted <= restricted throughout");
}

#[test]
fn criterion_11_four_p_comparison() {
    let corpus: Vec<(&str, FiniteMetricMeasureSpace)> = vec![
        ("two-point", two_point_space(1.0)),
        ("path3", path3()),
        ("grid 5x5", gen_grid(5, 2).unwrap()),
        ("grid 9 line", gen_grid(9, 1).unwrap()),
        ("weighted line", gen_weighted_line(41, 2.0, 1.5).unwrap()),
    ];
    let mut worst_reverse = 0.0f64;
    let mut pairs = 0usize;
    for (name, space) in &corpus {
        let n = space.len();
        let center = n / 2;
        let f = PointSet::new(space.ball_member_ids(center, space.diam() / 8.0, BallKind::Closed));
        // the farthest point from the center sits at distance >= diam/2, so
        // dropping it always leaves a proper host containing F
        let far = (0..n)
            .max_by(|&a, &b| space.dist(center, a).partial_cmp(&space.dist(center, b)).unwrap())
            .unwrap();
        let hosts = [
            PointSet::new(space.ball_member_ids(center, space.diam() / 3.0, BallKind::Open))
                .union(&f),
            PointSet::new((0..n).filter(|&i| i != far).collect()),
        ];
        for omega in hosts {
            for p in [1.5, 2.0, 3.0] {
                let var = solve_capacity_with(
                    space,
                    &CapacityProblem::variational(f.clone(), omega.clone(), p),
                    &SolveOptions::tight(),
                )
                .unwrap()
                .value
                .as_f64();
                let haj = solve_capacity_with(
                    space,
                    &CapacityProblem::hajlasz(f.clone(), omega.clone(), 1.0, p),
                    &SolveOptions::tight(),
                )
                .unwrap()
                .value
                .as_f64();
                let slack = 4.0f64.powf(p) * haj - var;
                assert!(slack >= -1e-6, "{name}, p={p}: cp_p {var} vs 4^p cp_1p {}", 4.0f64.powf(p) * haj);
                if var > 1e-12 {
                    worst_reverse = worst_reverse.max(haj / var);
                }
                pairs += 1;
            }
        }
    }
    assert!(worst_reverse <= 100.0, "reverse ratio {worst_reverse}");
    println!(
        "PASS criterion 11: cp_p <= 4^p cp_1p on {pairs} corpus pairs, reverse ratio <= {worst_reverse:.2}"
    );
}

#[test]
fn criterion_12_snowflake_identities() {
    let space = gen_grid(9, 2).unwrap();
    let flaked = snowflake(&space, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let ids = shuffled(&mut rng, space.len());
        let f = PointSet::new(ids[..rng.gen_range(1..=3)].to_vec());
        let omega = PointSet::new(
            space.ball_member_ids(ids[0], space.diam() / 3.0, BallKind::Open),
        )
        .union(&f);
        let haj_direct = solve_capacity(
            &space,
            &CapacityProblem::hajlasz(f.clone(), omega.clone(), 0.5, 2.0),
        )
        .unwrap()
        .value
        .as_f64();
        let haj_flaked =
            solve_capacity(&flaked, &CapacityProblem::hajlasz(f.clone(), omega, 1.0, 2.0))
                .unwrap()
                .value
                .as_f64();
        worst = worst.max(rel_gap(haj_direct, haj_flaked));
        let riesz_direct = solve_capacity(&space, &CapacityProblem::riesz(f.clone(), 0.5, 2.0))
            .unwrap()
            .value
            .as_f64();
        let riesz_flaked = solve_capacity(&flaked, &CapacityProblem::riesz(f, 1.0, 2.0))
            .unwrap()
            .value
            .as_f64();
        worst = worst.max(rel_gap(riesz_direct, riesz_flaked));
        assert!(worst <= 1e-6, "transport gap {worst}");
    }
    println!("PASS criterion 12: both capacity transport identities hold, worst gap {worst:.2e}");
}

#[test]
fn criterion_13_four_way_density_scan() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_reproduce_case("four-way-equivalence", dir.path());
    let decay: f64 = report
        .lines()
        .find_map(|l| l.trim().strip_prefix("single_atom_decay = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(decay >= 4.0);
    let scans = report.matches("c0_estimate = ").count();
    assert_eq!(scans, 4);
    println!(
        "PASS criterion 13: four scans report c0 > 0.01 on the quadrant, single-atom content decays x{decay:.2}"
    );
}

#[test]
fn criterion_14_chain_validity() {
    let mut built = 0usize;
    let mut max_m = 0.0f64;
    for dim in [1usize, 2] {
        let space = gen_grid(33, dim).unwrap();
        let diam = space.diam();
        let mut rng = ChaCha8Rng::seed_from_u64(14 + dim as u64);
        for trial in 0..5 {
            let y = rng.gen_range(0..space.len());
            let big_r = diam * rng.gen_range(0.15..0.36);
            // chains need a path vertex inside (4/5) rho; floor above the mesh
            let rho = (big_r * rng.gen_range(0.05..0.4)).max(2.0 * space.mesh());
            let chain = build_ball_chain(&space, y, rho, big_r).unwrap();
            let validation = validate_ball_chain(&space, &chain).unwrap();
            assert!(
                validation.valid,
                "dim {dim} trial {trial} (rho {rho:.3}, R {big_r:.3}): {:?}",
                validation.violations
            );
            assert!(chain.m_observed <= 64.0, "M {}", chain.m_observed);
            max_m = max_m.max(chain.m_observed);
            built += 1;
        }
    }
    println!("PASS criterion 14: {built} chains valid on both grids, max overlap M {max_m} <= 64");
}
