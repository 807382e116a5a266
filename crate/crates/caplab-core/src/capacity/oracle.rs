//! Slow exact reference solver for small capacity instances.
//!
//! Deliberately shares no machinery with the production solvers: the p-norm
//! programs are solved by log-barrier path following with damped Newton
//! steps (the programs are convex, so the central path certifies the
//! optimum), the outer minimization over the potential `u` uses nested grid
//! refinement (the inner value is convex in `u`), and content covers are
//! found by exhaustive branch enumeration over per-center realized radii
//! with direct membership tests. Instances beyond the hard size limits are
//! refused rather than approximated.

use super::{
    empty_target, CapacityKind, CapacityProblem, CapacityResult, CapacityValue, Cover, CoverBall,
    Optimizer,
};
use crate::error::{Error, Result};
use crate::field::FieldVector;
use crate::space::FiniteMetricMeasureSpace;

/// Largest point count for the p-norm capacities.
const PNORM_LIMIT: usize = 5;
/// Largest target for content enumeration.
const CONTENT_TARGET_LIMIT: usize = 8;
/// Largest space for content enumeration.
const CONTENT_SPACE_LIMIT: usize = 200;

/// Exact reference value for a small capacity problem; refuses instances
/// above the size limits with a not-applicable error.
pub fn brute_force_capacity(
    space: &FiniteMetricMeasureSpace,
    problem: &CapacityProblem,
) -> Result<CapacityResult> {
    problem.validate(space)?;
    let n = space.len();
    match problem.kind {
        CapacityKind::Riesz | CapacityKind::Hajlasz | CapacityKind::Variational => {
            if n > PNORM_LIMIT {
                return Err(Error::NotApplicable(format!(
                    "reference solver handles at most {PNORM_LIMIT} points, got {n}"
                )));
            }
        }
        CapacityKind::Content => {
            if problem.f.len() > CONTENT_TARGET_LIMIT {
                return Err(Error::NotApplicable(format!(
                    "reference cover enumeration handles at most {CONTENT_TARGET_LIMIT} target points, got {}",
                    problem.f.len()
                )));
            }
            if n > CONTENT_SPACE_LIMIT {
                return Err(Error::NotApplicable(format!(
                    "reference cover enumeration handles at most {CONTENT_SPACE_LIMIT} points, got {n}"
                )));
            }
        }
    }
    match problem.kind {
        CapacityKind::Riesz => oracle_riesz(space, problem),
        CapacityKind::Hajlasz | CapacityKind::Variational => oracle_pair(space, problem),
        CapacityKind::Content => oracle_content(space, problem),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting; `None` on a singular system.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for col in 0..k {
        let pivot = (col..k).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..k {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for j in col..k {
                a[row][j] -= f * a[col][j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for col in (0..k).rev() {
        let mut v = b[col];
        for j in (col + 1)..k {
            v -= a[col][j] * x[j];
        }
        x[col] = v / a[col][col];
    }
    Some(x)
}

/// Exact minimizer of `sum_i w_i x_i^p` over `{x >= 0, a_j . x >= b_j}` by
/// log-barrier path following. Every row must have a positive coefficient
/// (all our programs do), which also makes the program feasible.
fn barrier_pnorm(w: &[f64], p: f64, rows: &[(Vec<f64>, f64)]) -> Result<(Vec<f64>, f64)> {
    let k = w.len();
    let active: Vec<&(Vec<f64>, f64)> = rows.iter().filter(|(_, b)| *b > 0.0).collect();
    if k == 0 || active.is_empty() {
        return Ok((vec![0.0; k], 0.0));
    }
    for (a, _) in &active {
        if !a.iter().any(|&c| c > 0.0) {
            return Err(Error::Internal("constraint row with no variable support".into()));
        }
    }
    let mut start = 1.0f64;
    for (a, b) in &active {
        let asum: f64 = a.iter().sum();
        start = start.max((b + 1.0) / asum);
    }
    let mut x = vec![start; k];

    let mut t = 1.0f64;
    while t < 1e13 {
        let phi = |x: &[f64]| -> f64 {
            let mut v = 0.0;
            for i in 0..k {
                if x[i] <= 0.0 {
                    return f64::INFINITY;
                }
                v += t * w[i] * x[i].powf(p) - x[i].ln();
            }
            for (a, b) in &active {
                let slack = dot(a, x) - b;
                if slack <= 0.0 {
                    return f64::INFINITY;
                }
                v -= slack.ln();
            }
            v
        };
        for _ in 0..80 {
            let mut grad = vec![0.0; k];
            let mut hess = vec![vec![0.0; k]; k];
            for i in 0..k {
                grad[i] = t * w[i] * p * x[i].powf(p - 1.0) - 1.0 / x[i];
                hess[i][i] = t * w[i] * p * (p - 1.0) * x[i].powf(p - 2.0) + 1.0 / (x[i] * x[i]);
            }
            for (a, b) in &active {
                let slack = dot(a, &x) - b;
                let s2 = slack * slack;
                for i in 0..k {
                    if a[i] == 0.0 {
                        continue;
                    }
                    grad[i] -= a[i] / slack;
                    for j in 0..k {
                        if a[j] != 0.0 {
                            hess[i][j] += a[i] * a[j] / s2;
                        }
                    }
                }
            }
            let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            let Some(dir) = solve_linear(hess, rhs) else { break };
            let decrement = -dot(&grad, &dir);
            if decrement <= 1e-13 * (1.0 + phi(&x).abs()) {
                break;
            }
            let phi_x = phi(&x);
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
                if phi(&trial) < phi_x {
                    x = trial;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        t *= 10.0;
    }
    let value = (0..k).map(|i| w[i] * x[i].powf(p)).sum();
    Ok((x, value))
}

fn oracle_riesz(space: &FiniteMetricMeasureSpace, problem: &CapacityProblem) -> Result<CapacityResult> {
    if problem.f.is_empty() {
        return Ok(empty_target("oracle-barrier"));
    }
    let n = space.len();
    if n == 1 {
        return Ok(CapacityResult {
            value: CapacityValue::Infinite,
            optimizer: Optimizer::None,
            feasibility_residual: 0.0,
            iterations: 0,
            method: "oracle-barrier".into(),
            certified: true,
            warnings: Vec::new(),
        });
    }
    let beta = problem.beta.expect("validated");
    let p = problem.p.expect("validated");
    // kernel rows by direct loops, no shared ball caches
    let mut rows = Vec::new();
    for j in problem.f.iter() {
        let mut a = vec![0.0; n];
        for i in 0..n {
            if i == j {
                continue;
            }
            let d = space.dist(j, i);
            let mut mu = 0.0;
            for m in 0..n {
                if space.dist(j, m) < d {
                    mu += space.weight(m);
                }
            }
            a[i] = space.weight(i) * d.powf(beta) / mu;
        }
        rows.push((a, 1.0));
    }
    let w: Vec<f64> = (0..n).map(|i| space.weight(i)).collect();
    let (f, value) = barrier_pnorm(&w, p, &rows)?;
    let residual = rows
        .iter()
        .map(|(a, b)| (b - dot(a, &f)).max(0.0))
        .fold(0.0f64, f64::max);
    Ok(CapacityResult {
        value: CapacityValue::Finite(value),
        optimizer: Optimizer::Field { f: FieldVector::new(f)? },
        feasibility_residual: residual,
        iterations: 0,
        method: "oracle-barrier".into(),
        certified: true,
        warnings: Vec::new(),
    })
}

fn oracle_pair(space: &FiniteMetricMeasureSpace, problem: &CapacityProblem) -> Result<CapacityResult> {
    let method = "oracle-grid-barrier";
    if problem.f.is_empty() {
        return Ok(empty_target(method));
    }
    let n = space.len();
    let omega = problem.omega.as_ref().expect("validated");
    let p = problem.p.expect("validated");
    let is_hajlasz = matches!(problem.kind, CapacityKind::Hajlasz);

    // (x, y, c) families as in the problem statements
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    if is_hajlasz {
        let beta = problem.beta.expect("validated");
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j, space.dist(i, j).powf(beta)));
            }
        }
    } else {
        for e in space.edges().expect("validated") {
            pairs.push((e.a, e.b, e.len / 2.0));
        }
    }

    let u_fixed: Vec<Option<f64>> = (0..n)
        .map(|i| {
            if problem.f.contains(i) {
                Some(1.0)
            } else if !omega.contains(i) {
                Some(0.0)
            } else {
                None
            }
        })
        .collect();
    let free: Vec<usize> = (0..n).filter(|&i| u_fixed[i].is_none()).collect();
    let g_vars: Vec<usize> = (0..n).filter(|&i| is_hajlasz || omega.contains(i)).collect();
    let g_pos: Vec<Option<usize>> = {
        let mut pos = vec![None; n];
        for (k, &i) in g_vars.iter().enumerate() {
            pos[i] = Some(k);
        }
        pos
    };
    let w: Vec<f64> = g_vars.iter().map(|&i| space.weight(i)).collect();

    // inner exact solve at a fixed u
    let inner = |u: &[f64]| -> Result<(Vec<f64>, f64)> {
        let mut rows = Vec::new();
        for &(x, y, c) in &pairs {
            let du = (u[x] - u[y]).abs();
            if du <= 1e-15 {
                continue;
            }
            let mut a = vec![0.0; g_vars.len()];
            if let Some(k) = g_pos[x] {
                a[k] = 1.0;
            }
            if let Some(k) = g_pos[y] {
                a[k] = 1.0;
            }
            rows.push((a, du / c));
        }
        barrier_pnorm(&w, p, &rows)
    };

    let assemble = |free_vals: &[f64]| -> Vec<f64> {
        let mut u = vec![0.0; n];
        for i in 0..n {
            u[i] = u_fixed[i].unwrap_or(0.0);
        }
        for (k, &i) in free.iter().enumerate() {
            u[i] = free_vals[k];
        }
        u
    };

    // nested grid refinement over the free u block; the inner value is
    // convex in u, so shrinking to one grid step around the best sample
    // keeps the minimizer bracketed
    let kf = free.len();
    let levels = 5usize;
    let mut lo = vec![0.0f64; kf];
    let mut hi = vec![1.0f64; kf];
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let rounds = if kf == 0 { 1 } else { 44 };
    for _ in 0..rounds {
        let mut idx = vec![0usize; kf];
        loop {
            let vals: Vec<f64> = (0..kf)
                .map(|i| lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (levels - 1) as f64)
                .collect();
            let u = assemble(&vals);
            let (g, value) = inner(&u)?;
            if best.as_ref().map_or(true, |(bv, _, _)| value < *bv) {
                best = Some((value, vals.clone(), g));
            }
            // odometer over the tensor grid
            let mut carry = 0;
            while carry < kf {
                idx[carry] += 1;
                if idx[carry] < levels {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == kf {
                break;
            }
        }
        if kf == 0 {
            break;
        }
        let (_, center, _) = best.as_ref().expect("grid evaluated");
        for i in 0..kf {
            let step = (hi[i] - lo[i]) / (levels - 1) as f64;
            lo[i] = (center[i] - step).max(0.0);
            hi[i] = (center[i] + step).min(1.0);
        }
        if (0..kf).all(|i| hi[i] - lo[i] < 1e-12) {
            break;
        }
    }

    let (value, free_vals, g_vals) = best.expect("at least one grid point");
    let u = assemble(&free_vals);
    let mut g = vec![0.0; n];
    for (k, &i) in g_vars.iter().enumerate() {
        g[i] = g_vals[k];
    }
    let residual = pairs
        .iter()
        .map(|&(x, y, c)| ((u[x] - u[y]).abs() - c * (g[x] + g[y])).max(0.0))
        .fold(0.0f64, f64::max);
    Ok(CapacityResult {
        value: CapacityValue::Finite(value),
        optimizer: Optimizer::Pair { u: FieldVector::new(u)?, g: FieldVector::new(g)? },
        feasibility_residual: residual,
        iterations: 0,
        method: method.into(),
        certified: true,
        warnings: Vec::new(),
    })
}

fn oracle_content(space: &FiniteMetricMeasureSpace, problem: &CapacityProblem) -> Result<CapacityResult> {
    let method = "oracle-enumerate";
    if problem.f.is_empty() {
        return Ok(empty_target(method));
    }
    let q = problem.q.expect("validated");
    let rho = problem.rho.expect("validated");
    let n = space.len();
    let f_ids: Vec<usize> = problem.f.iter().collect();
    let m = f_ids.len();
    let full: u16 = ((1u32 << m) - 1) as u16;

    // all (center, realized radius <= rho) balls plus the rho balls, with
    // membership and mass recomputed by direct scans
    struct Cand {
        center: usize,
        radius: f64,
        cost: f64,
        mask: u16,
    }
    let mut cands: Vec<Cand> = Vec::new();
    for c in 0..n {
        let mut radii: Vec<f64> = (0..n)
            .map(|k| space.dist(c, k))
            .filter(|&d| d > 0.0 && d <= rho)
            .collect();
        radii.push(rho);
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.dedup();
        for r in radii {
            let mut mu = 0.0;
            let mut mask = 0u16;
            for k in 0..n {
                if space.dist(c, k) < r {
                    mu += space.weight(k);
                }
            }
            for (fi, &id) in f_ids.iter().enumerate() {
                if space.dist(c, id) < r {
                    mask |= 1 << fi;
                }
            }
            if mask != 0 {
                cands.push(Cand { center: c, radius: r, cost: mu * r.powf(-q), mask });
            }
        }
    }
    let mut by_point: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (ci, cand) in cands.iter().enumerate() {
        for (fi, list) in by_point.iter_mut().enumerate() {
            if cand.mask & (1 << fi) != 0 {
                list.push(ci);
            }
        }
    }
    for list in &mut by_point {
        if list.is_empty() {
            return Err(Error::Internal("target point with no covering ball".into()));
        }
        list.sort_by(|&a, &b| cands[a].cost.partial_cmp(&cands[b].cost).unwrap());
    }

    fn dfs(
        cands: &[Cand],
        by_point: &[Vec<usize>],
        uncovered: u16,
        cost: f64,
        stack: &mut Vec<usize>,
        best_cost: &mut f64,
        best: &mut Vec<usize>,
    ) {
        if uncovered == 0 {
            if cost < *best_cost {
                *best_cost = cost;
                *best = stack.clone();
            }
            return;
        }
        let fi = uncovered.trailing_zeros() as usize;
        for &ci in &by_point[fi] {
            if cost + cands[ci].cost >= *best_cost {
                break;
            }
            stack.push(ci);
            dfs(cands, by_point, uncovered & !cands[ci].mask, cost + cands[ci].cost, stack, best_cost, best);
            stack.pop();
        }
    }

    let mut best_cost = f64::INFINITY;
    let mut best = Vec::new();
    let mut stack = Vec::new();
    dfs(&cands, &by_point, full, 0.0, &mut stack, &mut best_cost, &mut best);
    if !best_cost.is_finite() {
        return Err(Error::Internal("no admissible cover found".into()));
    }
    let mut balls: Vec<CoverBall> = best
        .iter()
        .map(|&ci| CoverBall { center: cands[ci].center, radius: cands[ci].radius })
        .collect();
    balls.sort_by(|a, b| a.center.cmp(&b.center).then(a.radius.partial_cmp(&b.radius).unwrap()));
    Ok(CapacityResult {
        value: CapacityValue::Finite(best_cost),
        optimizer: Optimizer::Cover { cover: Cover { balls, value: best_cost } },
        feasibility_residual: 0.0,
        iterations: 0,
        method: method.into(),
        certified: true,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::brute_force_capacity;
    use crate::error::Error;
    use crate::gen::{gen_grid, path3};
    use crate::space::PointSet;
    use super::super::CapacityProblem;

    #[test]
    fn refuses_large_pnorm_instances() {
        let s = gen_grid(6, 1).unwrap();
        let pr = CapacityProblem::riesz(PointSet::new(vec![0]), 1.0, 2.0);
        assert!(matches!(brute_force_capacity(&s, &pr), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn refuses_large_content_targets() {
        let s = gen_grid(3, 2).unwrap();
        let pr = CapacityProblem::content(PointSet::new((0..9).collect()), 1.0, 1.0);
        assert!(matches!(brute_force_capacity(&s, &pr), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn path_values_from_first_principles() {
        let s = path3();
        let riesz = CapacityProblem::riesz(PointSet::new(vec![0]), 1.0, 2.0);
        assert!((brute_force_capacity(&s, &riesz).unwrap().value.as_f64() - 0.5).abs() < 1e-6);
        let haj = CapacityProblem::hajlasz(PointSet::new(vec![0]), PointSet::new(vec![0, 1]), 1.0, 2.0);
        assert!((brute_force_capacity(&s, &haj).unwrap().value.as_f64() - 0.1875).abs() < 1e-6);
        let var = CapacityProblem::variational(PointSet::new(vec![0]), PointSet::new(vec![0, 1]), 2.0);
        assert!((brute_force_capacity(&s, &var).unwrap().value.as_f64() - 0.8).abs() < 1e-6);
    }
}
