//! `caplab verify`: every module's invariants exercised on one space.

use std::path::PathBuf;
use std::time::Instant;

use caplab_core::capacity::{CapacityProblem, SolveOptions};
use caplab_core::chain::{build_ball_chain, validate_ball_chain};
use caplab_core::density::{density_scan, DensityScanConfig};
use caplab_core::io;
use caplab_core::potentials::{
    canonical_gradient, maximal_function, poincare_check, riesz_potential,
    verify_hajlasz_gradient,
};
use caplab_core::stats::check_geodesic_graph;
use caplab_core::{
    solve_capacity, solve_capacity_with, BallKind, Error, FieldVector, PointSet,
};
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle::Bundle;

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

struct Check {
    name: &'static str,
    ok: bool,
    detail: String,
    ms: u128,
}

/// Runs one named check; an `Err` from the body that is a refusal counts as
/// skipped (the invariant is vacuous on this space), anything else fails it.
fn run_check(
    checks: &mut Vec<Check>,
    name: &'static str,
    body: impl FnOnce() -> Result<String, Error>,
) {
    let start = Instant::now();
    let (ok, detail) = match body() {
        Ok(detail) => (true, detail),
        Err(e) if e.is_refusal() => (true, format!("skipped: {e}")),
        Err(e) => (false, e.to_string()),
    };
    checks.push(Check { name, ok, detail, ms: start.elapsed().as_millis() });
}

fn fail(name: &str, detail: impl std::fmt::Display) -> Error {
    Error::Internal(format!("{name}: {detail}"))
}

/// Deterministic nonnegative test field.
fn random_field(n: usize, rng: &mut ChaCha8Rng) -> FieldVector {
    FieldVector::new((0..n).map(|_| rng.gen_range(0.0..2.0)).collect()).unwrap()
}

pub fn run_verify(args: &VerifyArgs, seed: u64) -> anyhow::Result<()> {
    let (space, digest) = io::read_space(&args.space)?;
    let n = space.len();
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    run_check(&mut checks, "metric-valid", || {
        Ok(format!("{} points, diam {}, mesh {}", n, space.diam(), space.mesh()))
    });

    run_check(&mut checks, "ball-monotone", || {
        let step = (n / 30).max(1);
        for c in (0..n).step_by(step) {
            let mut last_mu = 0.0;
            let mut last_count = 0;
            for &r in space.thresholds() {
                let mu = space.mu_ball(c, r, BallKind::Open);
                let count = space.ball_count(c, r, BallKind::Open);
                if mu + 1e-12 < last_mu || count < last_count {
                    return Err(fail("ball-monotone", format!("shrinking ball at ({c}, {r})")));
                }
                last_mu = mu;
                last_count = count;
            }
            let total = space.mu_ball(c, space.diam() * 2.0 + 1.0, BallKind::Open);
            if (total - space.total_mass()).abs() > 1e-9 * space.total_mass() {
                return Err(fail("ball-monotone", format!("big ball misses mass at {c}")));
            }
        }
        Ok("mu and count nondecreasing in r".into())
    });

    run_check(&mut checks, "geodesic-graph", || {
        let report = check_geodesic_graph(&space)?;
        Ok(format!("max path/metric discrepancy {}", report.max_rel_discrepancy))
    });

    run_check(&mut checks, "canonical-gradient", || {
        for beta in [0.5, 1.0] {
            let u = random_field(n, &mut rng);
            let g = canonical_gradient(&space, &u, beta)?;
            let check = verify_hajlasz_gradient(&space, &u, &g, beta)?;
            if !check.ok {
                return Err(fail(
                    "canonical-gradient",
                    format!("beta {beta}: pair {:?} slack {}", check.worst_pair, check.worst_slack),
                ));
            }
        }
        Ok("canonical gradient admissible at beta 0.5 and 1".into())
    });

    run_check(&mut checks, "poincare", || {
        let u = random_field(n, &mut rng);
        let beta = 0.5;
        let g = canonical_gradient(&space, &u, beta)?;
        let report = poincare_check(&space, &u, &g, beta, 2.0)?;
        if !report.ok {
            return Err(fail("poincare", format!("worst ball {:?}", report.worst_ball)));
        }
        Ok(format!("worst ratio {} over {} balls", report.worst_ratio, report.balls_checked))
    });

    run_check(&mut checks, "maximal-bounds", || {
        let f = random_field(n, &mut rng);
        let mf = maximal_function(&space, &f)?;
        let step = (n / 10).max(1);
        for c in (0..n).step_by(step) {
            for &r in space.thresholds().iter().take(8) {
                let members = space.ball_member_ids(c, r, BallKind::Open);
                if members.is_empty() {
                    continue;
                }
                let mass: f64 = members.iter().map(|&i| space.weights()[i]).sum();
                let avg: f64 =
                    members.iter().map(|&i| space.weights()[i] * f.values[i]).sum::<f64>() / mass;
                if mf.values[c] + 1e-10 < avg {
                    return Err(fail("maximal-bounds", format!("Mf below ball average at ({c}, {r})")));
                }
            }
        }
        Ok("Mf dominates sampled ball averages".into())
    });

    run_check(&mut checks, "riesz-additive", || {
        let f = random_field(n, &mut rng);
        let g = random_field(n, &mut rng);
        let sum = FieldVector::new(
            f.values.iter().zip(&g.values).map(|(a, b)| a + b).collect(),
        )?;
        let pf = riesz_potential(&space, &f, 0.7, 0.0)?;
        let pg = riesz_potential(&space, &g, 0.7, 0.0)?;
        let ps = riesz_potential(&space, &sum, 0.7, 0.0)?;
        for i in 0..n {
            let lhs = ps.values[i];
            let rhs = pf.values[i] + pg.values[i];
            if (lhs - rhs).abs() > 1e-9 * rhs.max(1.0) {
                return Err(fail("riesz-additive", format!("at point {i}: {lhs} vs {rhs}")));
            }
        }
        Ok("I_beta(f+g) = I_beta f + I_beta g".into())
    });

    run_check(&mut checks, "capacity-oracle-small", || {
        for (label, s) in [
            ("two-point", caplab_core::gen::two_point_space(1.0)),
            ("path3", caplab_core::gen::path3()),
        ] {
            let full = PointSet::new((0..s.len()).collect());
            let head = PointSet::new(vec![0]);
            let problems = [
                CapacityProblem::riesz(head.clone(), 1.0, 2.0),
                CapacityProblem::hajlasz(head.clone(), head.clone(), 1.0, 2.0),
                CapacityProblem::variational(head.clone(), full.clone(), 2.0),
                CapacityProblem::content(full.clone(), 1.0, s.diam()),
            ];
            for problem in &problems {
                let reference = caplab_core::brute_force_capacity(&s, problem)?;
                let solved = solve_capacity(&s, problem)?;
                let want = reference.value.as_f64();
                let got = solved.value.as_f64();
                if (want - got).abs() > 1e-6 * want.max(1.0) {
                    return Err(fail(
                        "capacity-oracle-small",
                        format!("{label} {}: solver {got} vs reference {want}", problem.kind),
                    ));
                }
            }
        }
        Ok("all four solvers match the reference on two-point and path3".into())
    });

    run_check(&mut checks, "capacity-monotone", || {
        if n < 3 {
            return Err(Error::NotApplicable("needs at least three points".into()));
        }
        let c = 0;
        let (ids, _) = space.sorted_row(c);
        let f1 = PointSet::new(vec![c]);
        let f2 = PointSet::new(vec![c, ids[1] as usize]);
        let host = PointSet::new(space.ball_member_ids(c, space.diam() / 2.0, BallKind::Open))
            .union(&f2);
        let opts = SolveOptions::scan();
        let small = solve_capacity_with(
            &space,
            &CapacityProblem::hajlasz(f1, host.clone(), 1.0, 2.0),
            &opts,
        )?;
        let big = solve_capacity_with(
            &space,
            &CapacityProblem::hajlasz(f2, host, 1.0, 2.0),
            &opts,
        )?;
        let (a, b) = (small.value.as_f64(), big.value.as_f64());
        if a > b * (1.0 + 1e-3) + 1e-9 {
            return Err(fail("capacity-monotone", format!("cap grew from {a} to {b} as F shrank")));
        }
        Ok(format!("cap {a} <= {b} for nested targets"))
    });

    run_check(&mut checks, "content-ball-identity", || {
        if n < 2 {
            return Err(Error::NotApplicable("needs at least two points".into()));
        }
        let c = 0;
        let (_, dists) = space.sorted_row(c);
        // largest realized ball at c with at most 8 members keeps the exact
        // cover solver in play
        let mut r = dists[1];
        for t in (1..n.min(9)).rev() {
            if dists[t] > dists[t - 1] {
                r = dists[t];
                break;
            }
        }
        let members = PointSet::new(space.ball_member_ids(c, r, BallKind::Open));
        let res = solve_capacity(&space, &CapacityProblem::content(members, 1.0, r))?;
        let identity = space.mu_ball(c, r, BallKind::Open) / r;
        let got = res.value.as_f64();
        if (got - identity).abs() > 1e-9 * identity.max(1.0) {
            return Err(fail(
                "content-ball-identity",
                format!("content {got} vs r^-q mu(B) = {identity} at ({c}, {r})"),
            ));
        }
        Ok(format!("content of B({c}, {r}) members equals r^-q mu(B)"))
    });

    run_check(&mut checks, "density-deterministic", || {
        if n < 2 {
            return Err(Error::NotApplicable("needs at least two points".into()));
        }
        let e = PointSet::new((0..n).collect());
        let mut config = DensityScanConfig::content(1.0, vec![3.5 * space.mesh()]);
        config.max_centers = 5;
        let a = density_scan(&space, &e, &config)?;
        let b = density_scan(&space, &e, &config)?;
        let ja = serde_json::to_string(&a).map_err(|e| Error::Internal(e.to_string()))?;
        let jb = serde_json::to_string(&b).map_err(|e| Error::Internal(e.to_string()))?;
        if ja != jb {
            return Err(fail("density-deterministic", "two identical scans disagree"));
        }
        Ok(format!("repeated scan byte-identical, c0 {}", a.c0_estimate))
    });

    run_check(&mut checks, "chain-valid", || {
        let rho = (space.diam() / 16.0).max(2.0 * space.mesh());
        let big_r = space.diam() / 4.0;
        if rho >= big_r {
            return Err(Error::NotApplicable("space too small for a chain".into()));
        }
        let chain = build_ball_chain(&space, 0, rho, big_r)?;
        let validation = validate_ball_chain(&space, &chain)?;
        if !validation.valid {
            return Err(fail("chain-valid", validation.violations.join("; ")));
        }
        Ok(format!("{} balls, M_observed {}", chain.balls.len(), validation.m_observed))
    });

    let failed = checks.iter().filter(|c| !c.ok).count();
    let mut rec = io::Record::new("verify-report");
    rec.set("command", "verify")
        .set("space.path", args.space.display())
        .set("space.digest", &digest)
        .set("seed", seed)
        .set("checks", checks.len())
        .set("failed", failed);
    for c in &checks {
        let mut block = io::Record::new("check");
        block.set("name", c.name).set("ok", c.ok).set("ms", c.ms).set("detail", &c.detail);
        rec.push_block(block);
    }
    let mut bundle = Bundle::new(rec, &["check", "ok", "ms", "detail"]);
    for c in &checks {
        bundle.csv_rows.push(vec![
            c.name.to_string(),
            c.ok.to_string(),
            c.ms.to_string(),
            c.detail.clone(),
        ]);
    }
    bundle.write(&args.out)?;

    if let Some(first) = checks.iter().find(|c| !c.ok) {
        println!("{failed} of {} checks failed", checks.len());
        return Err(Error::Internal(format!("invariant {} failed: {}", first.name, first.detail))
            .into());
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}
