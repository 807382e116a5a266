//! Shared solver for the two pair-constrained capacities.
//!
//! Hajlasz capacity constrains every point pair through the metric,
//! variational capacity constrains every edge of the geodesic graph; both
//! minimize a weighted p-norm of the gradient variable subject to
//! `|u(x) - u(y)| <= c_xy (g(x) + g(y))` with `u` pinned to 1 on the target
//! and 0 off the host set.
//!
//! The engine runs FISTA on a quadratic penalty with increasing penalty
//! weight, then restores exact feasibility by scaling `g` onto the worst
//! constraint. The reported pair is the best of: the restored iterate, the
//! canonical gradient of the final `u`, the canonical start, and any caller
//! hint, so the value never regresses below what the caller already knew to
//! be achievable. Above 400 points the active pair set starts local and
//! grows by most-violated pairs; feasibility is always judged against the
//! full pair family.

use super::{empty_target, CapacityProblem, CapacityResult, CapacityValue, Optimizer, SolveOptions};
use crate::error::{Error, Result};
use crate::field::FieldVector;
use crate::space::{FiniteMetricMeasureSpace, PointSet};

/// Point count above which pair constraints are generated lazily.
const LAZY_THRESHOLD: usize = 400;
/// Rounds of most-violated pair additions in the lazy regime.
const MAX_ROUNDS: usize = 8;

/// Where the full constraint family comes from.
#[derive(Clone, Copy)]
enum PairSource {
    /// All point pairs with coefficient `d(x,y)^beta`.
    AllPairs { beta: f64 },
    /// Edge pairs with coefficient `len/2` (trapezoid quadrature).
    Edges,
}

struct Program<'a> {
    space: &'a FiniteMetricMeasureSpace,
    source: PairSource,
    /// `Some(v)`: u is pinned to v; `None`: u is free in [0, 1].
    u_fixed: Vec<Option<f64>>,
    /// Whether g is a variable at this point (false pins it to 0).
    g_var: Vec<bool>,
    /// Objective weight per point.
    obj_w: Vec<f64>,
    p: f64,
}

impl Program<'_> {
    fn for_each_pair(&self, mut f: impl FnMut(usize, usize, f64)) {
        let n = self.space.len();
        match self.source {
            PairSource::AllPairs { beta } => {
                for i in 0..n {
                    for j in (i + 1)..n {
                        f(i, j, self.space.dist(i, j).powf(beta));
                    }
                }
            }
            PairSource::Edges => {
                for e in self.space.edges().expect("validated") {
                    f(e.a, e.b, e.len / 2.0);
                }
            }
        }
    }

    fn objective(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.obj_w).map(|(gi, w)| w * gi.powf(self.p)).sum()
    }

    /// Smallest pointwise g that satisfies every constraint for this `u`.
    /// Pairs between two pinned-to-zero g entries must have equal `u`.
    fn canonical(&self, u: &[f64]) -> Result<Vec<f64>> {
        let n = self.space.len();
        let mut g: Vec<f64> = vec![0.0; n];
        let mut impossible: Option<(usize, usize)> = None;
        self.for_each_pair(|x, y, c| {
            let du = (u[x] - u[y]).abs();
            if du == 0.0 {
                return;
            }
            match (self.g_var[x], self.g_var[y]) {
                (true, true) => {
                    g[x] = g[x].max(du / (2.0 * c));
                    g[y] = g[y].max(du / (2.0 * c));
                }
                (true, false) => g[x] = g[x].max(du / c),
                (false, true) => g[y] = g[y].max(du / c),
                (false, false) => impossible = Some((x, y)),
            }
        });
        if let Some((x, y)) = impossible {
            return Err(Error::Internal(format!(
                "constraint between points {x} and {y} has no gradient variable on either side"
            )));
        }
        Ok(g)
    }

    /// Scale that puts `g` on the feasible side of every constraint, or
    /// `None` when some violated constraint has zero gradient mass.
    fn restore_scale(&self, u: &[f64], g: &[f64]) -> Option<f64> {
        let mut s = 1.0f64;
        let mut dead = false;
        self.for_each_pair(|x, y, c| {
            let du = (u[x] - u[y]).abs();
            if du <= 1e-15 {
                return;
            }
            let den = c * (g[x] + g[y]);
            if den <= 0.0 {
                dead = true;
            } else {
                s = s.max(du / den);
            }
        });
        if dead {
            None
        } else {
            Some(s)
        }
    }

    /// Worst violation `|u(x)-u(y)| - c (g(x)+g(y))` over the full family.
    fn residual(&self, u: &[f64], g: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        self.for_each_pair(|x, y, c| {
            let v = (u[x] - u[y]).abs() - c * (g[x] + g[y]);
            if v > worst {
                worst = v;
            }
        });
        worst
    }
}

/// Distance-ramp start: u falls off from the target at the rate that first
/// reaches zero on the complement of the host set.
fn ramp_start(space: &FiniteMetricMeasureSpace, prog: &Program, f: &PointSet, beta: f64) -> Vec<f64> {
    let n = space.len();
    let f_ids: Vec<usize> = f.iter().collect();
    let mut scale = f64::INFINITY;
    for i in 0..n {
        if prog.u_fixed[i] == Some(0.0) {
            let d = f_ids.iter().map(|&j| space.dist(i, j)).fold(f64::INFINITY, f64::min);
            scale = scale.min(d);
        }
    }
    let mut u = vec![0.0; n];
    for i in 0..n {
        u[i] = match prog.u_fixed[i] {
            Some(v) => v,
            None => {
                let d = f_ids.iter().map(|&j| space.dist(i, j)).fold(f64::INFINITY, f64::min);
                (1.0 - d.powf(beta) / scale.powf(beta)).clamp(0.0, 1.0)
            }
        };
    }
    u
}

struct Candidate {
    u: Vec<f64>,
    g: Vec<f64>,
    value: f64,
}

pub(super) fn solve_hajlasz(
    space: &FiniteMetricMeasureSpace,
    problem: &CapacityProblem,
    options: &SolveOptions,
) -> Result<CapacityResult> {
    solve_pair_capacity(space, problem, options, None)
}

pub(super) fn solve_variational(
    space: &FiniteMetricMeasureSpace,
    problem: &CapacityProblem,
    options: &SolveOptions,
) -> Result<CapacityResult> {
    solve_pair_capacity(space, problem, options, None)
}

/// Entry point shared by both kinds; `hint` is an extra candidate pair.
pub(super) fn solve_pair_capacity(
    space: &FiniteMetricMeasureSpace,
    problem: &CapacityProblem,
    options: &SolveOptions,
    hint: Option<(&FieldVector, &FieldVector)>,
) -> Result<CapacityResult> {
    let is_hajlasz = matches!(problem.kind, super::CapacityKind::Hajlasz);
    let method = if is_hajlasz { "hajlasz-penalty-fista" } else { "variational-penalty-fista" };
    if problem.f.is_empty() {
        return Ok(empty_target(method));
    }
    let n = space.len();
    let omega = problem.omega.as_ref().expect("validated");
    let p = problem.p.expect("validated");
    let beta = problem.beta.unwrap_or(1.0);

    let mut u_fixed: Vec<Option<f64>> = vec![None; n];
    for i in 0..n {
        if problem.f.contains(i) {
            u_fixed[i] = Some(1.0);
        } else if !omega.contains(i) {
            u_fixed[i] = Some(0.0);
        }
    }
    let g_var: Vec<bool> =
        (0..n).map(|i| if is_hajlasz { true } else { omega.contains(i) }).collect();
    let obj_w: Vec<f64> = (0..n)
        .map(|i| if is_hajlasz || omega.contains(i) { space.weight(i) } else { 0.0 })
        .collect();
    let source = if is_hajlasz { PairSource::AllPairs { beta } } else { PairSource::Edges };
    let prog = Program { space, source, u_fixed, g_var, obj_w, p };

    let mut warnings = Vec::new();
    if !is_hajlasz && !space.is_connected() {
        warnings.push(
            "edge graph is disconnected; the curve-family reading of the program is partial".into(),
        );
    }

    // Host covers everything: u = 1 with g = 0 is admissible.
    if (0..n).all(|i| omega.contains(i)) {
        return Ok(CapacityResult {
            value: CapacityValue::Finite(0.0),
            optimizer: Optimizer::Pair {
                u: FieldVector::constant(n, 1.0),
                g: FieldVector::zeros(n),
            },
            feasibility_residual: 0.0,
            iterations: 0,
            method: method.into(),
            certified: true,
            warnings,
        });
    }

    let u0 = ramp_start(space, &prog, &problem.f, beta);
    let g0 = prog.canonical(&u0)?;
    let mut candidates = vec![Candidate { value: prog.objective(&g0), u: u0.clone(), g: g0.clone() }];
    if let Some((hu, hg)) = hint {
        hu.check_len(space, "hint u")?;
        hg.check_len(space, "hint g")?;
        let mut u = hu.values.clone();
        for (i, ui) in u.iter_mut().enumerate() {
            if let Some(v) = prog.u_fixed[i] {
                *ui = v;
            } else {
                *ui = ui.clamp(0.0, 1.0);
            }
        }
        let mut g = hg.values.clone();
        for (i, gi) in g.iter_mut().enumerate() {
            if !prog.g_var[i] {
                *gi = 0.0;
            } else {
                *gi = gi.max(0.0);
            }
        }
        match prog.restore_scale(&u, &g) {
            Some(s) => {
                let s = s * (1.0 + 1e-12);
                let g: Vec<f64> = g.iter().map(|gi| gi * s).collect();
                candidates.push(Candidate { value: prog.objective(&g), u, g });
            }
            None => {
                let g = prog.canonical(&u)?;
                candidates.push(Candidate { value: prog.objective(&g), u, g });
            }
        }
    }

    // Seed the iteration from the best candidate known so far.
    let start = candidates
        .iter()
        .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
        .expect("nonempty");
    let mut u = start.u.clone();
    let mut g = start.g.clone();

    let lazy = matches!(prog.source, PairSource::AllPairs { .. }) && n > LAZY_THRESHOLD;
    let mut active = initial_pairs(&prog, lazy);
    let mut iterations = 0usize;

    let rounds = if lazy { MAX_ROUNDS } else { 1 };
    for round in 0..rounds {
        // Later rounds resume at a mid-strength penalty so freshly added
        // pairs are not hit with the stiffest weight at once.
        let first_stage = if round == 0 { 0 } else { options.max_outer / 2 };
        let mut mu = 1e2 * 10f64.powi(first_stage as i32);
        let mut stage = first_stage;
        let mut last_restored = f64::INFINITY;
        while stage < options.max_outer && mu <= options.penalty_max {
            iterations += fista(&prog, &active, mu, options, &mut u, &mut g);
            // Between stages, check whether the restored value has settled.
            if let Some(s) = prog.restore_scale(&u, &g) {
                let val = prog.objective(&g) * s.powf(p);
                if (last_restored - val).abs() <= options.value_tol * val.max(1e-30) && s < 1.0 + 1e-6
                {
                    break;
                }
                last_restored = val;
            }
            mu *= 10.0;
            stage += 1;
        }
        if !lazy {
            break;
        }
        let added = add_most_violated(&prog, &mut active, &u, &g);
        if added == 0 {
            break;
        }
    }

    // Exact restoration of the final iterate, plus fallback candidates.
    match prog.restore_scale(&u, &g) {
        Some(s) => {
            let s = s * (1.0 + 1e-12);
            let gr: Vec<f64> = g.iter().map(|gi| gi * s).collect();
            candidates.push(Candidate { value: prog.objective(&gr), u: u.clone(), g: gr });
        }
        None => {}
    }
    let gc = prog.canonical(&u)?;
    candidates.push(Candidate { value: prog.objective(&gc), u: u.clone(), g: gc });

    let best = candidates
        .into_iter()
        .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
        .expect("nonempty");
    let residual = prog.residual(&best.u, &best.g).max(0.0);
    Ok(CapacityResult {
        value: CapacityValue::Finite(best.value),
        optimizer: Optimizer::Pair { u: FieldVector::new(best.u)?, g: FieldVector::new(best.g)? },
        feasibility_residual: residual,
        iterations,
        method: method.into(),
        certified: false,
        warnings,
    })
}

/// Active pair set: everything for small instances and edge programs, a
/// local neighborhood graph otherwise.
fn initial_pairs(prog: &Program, lazy: bool) -> Vec<(u32, u32, f64)> {
    let mut pairs = Vec::new();
    if !lazy {
        prog.for_each_pair(|x, y, c| pairs.push((x as u32, y as u32, c)));
        return pairs;
    }
    let space = prog.space;
    let cutoff = 2.2 * space.mesh();
    let beta = match prog.source {
        PairSource::AllPairs { beta } => beta,
        PairSource::Edges => unreachable!("edge programs are never lazy"),
    };
    let n = space.len();
    for i in 0..n {
        let (ids, dists) = space.sorted_row(i);
        for (pos, &d) in dists.iter().enumerate() {
            if d > cutoff {
                break;
            }
            let j = ids[pos] as usize;
            if j > i {
                pairs.push((i as u32, j as u32, d.powf(beta)));
            }
        }
    }
    pairs
}

/// Adds the most violated missing pairs; returns how many were added.
fn add_most_violated(
    prog: &Program,
    active: &mut Vec<(u32, u32, f64)>,
    u: &[f64],
    g: &[f64],
) -> usize {
    use std::collections::HashSet;
    let have: HashSet<(u32, u32)> = active.iter().map(|&(x, y, _)| (x, y)).collect();
    let mut violated: Vec<(f64, u32, u32, f64)> = Vec::new();
    let tol = 1e-10;
    prog.for_each_pair(|x, y, c| {
        let v = (u[x] - u[y]).abs() - c * (g[x] + g[y]);
        if v > tol && !have.contains(&(x as u32, y as u32)) {
            violated.push((v, x as u32, y as u32, c));
        }
    });
    if violated.is_empty() {
        return 0;
    }
    violated.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let take = violated.len().min((prog.space.len() / 2).max(64));
    for &(_, x, y, c) in violated.iter().take(take) {
        active.push((x, y, c));
    }
    take
}

/// Penalty objective and gradient at `(u, g)` for the active pairs.
fn phi(
    prog: &Program,
    pairs: &[(u32, u32, f64)],
    mu: f64,
    u: &[f64],
    g: &[f64],
    grad_u: &mut [f64],
    grad_g: &mut [f64],
) -> f64 {
    let p = prog.p;
    let mut val = 0.0;
    for i in 0..u.len() {
        let w = prog.obj_w[i];
        val += w * g[i].powf(p);
        grad_g[i] = p * w * g[i].powf(p - 1.0);
        grad_u[i] = 0.0;
    }
    for &(x, y, c) in pairs {
        let (x, y) = (x as usize, y as usize);
        let diff = u[x] - u[y];
        let v = diff.abs() - c * (g[x] + g[y]);
        if v > 0.0 {
            val += 0.5 * mu * v * v;
            let s = mu * v;
            let sign = if diff >= 0.0 { 1.0 } else { -1.0 };
            grad_u[x] += s * sign;
            grad_u[y] -= s * sign;
            grad_g[x] -= s * c;
            grad_g[y] -= s * c;
        }
    }
    val
}

fn phi_value(prog: &Program, pairs: &[(u32, u32, f64)], mu: f64, u: &[f64], g: &[f64]) -> f64 {
    let p = prog.p;
    let mut val = 0.0;
    for i in 0..u.len() {
        val += prog.obj_w[i] * g[i].powf(p);
    }
    for &(x, y, c) in pairs {
        let (x, y) = (x as usize, y as usize);
        let v = (u[x] - u[y]).abs() - c * (g[x] + g[y]);
        if v > 0.0 {
            val += 0.5 * mu * v * v;
        }
    }
    val
}

fn project(prog: &Program, u: &mut [f64], g: &mut [f64]) {
    for i in 0..u.len() {
        u[i] = match prog.u_fixed[i] {
            Some(v) => v,
            None => u[i].clamp(0.0, 1.0),
        };
        g[i] = if prog.g_var[i] { g[i].max(0.0) } else { 0.0 };
    }
}

/// Accelerated projected gradient descent on the penalty, with backtracking
/// Lipschitz estimation and monotone restarts. Returns iterations used.
fn fista(
    prog: &Program,
    pairs: &[(u32, u32, f64)],
    mu: f64,
    options: &SolveOptions,
    u: &mut Vec<f64>,
    g: &mut Vec<f64>,
) -> usize {
    let n = u.len();
    let mut yu = u.clone();
    let mut yg = g.clone();
    let mut u_prev = u.clone();
    let mut g_prev = g.clone();
    let mut grad_u = vec![0.0; n];
    let mut grad_g = vec![0.0; n];
    let mut tu = vec![0.0; n];
    let mut tg = vec![0.0; n];
    let mut lip = mu.max(1.0);
    let mut t_k = 1.0f64;
    let mut best = phi_value(prog, pairs, mu, u, g);
    let mut since_best = 0usize;
    let stall_tol = options.value_tol * 1e-2;
    let mut iters = 0usize;
    for _ in 0..options.max_inner {
        iters += 1;
        let phi_y = phi(prog, pairs, mu, &yu, &yg, &mut grad_u, &mut grad_g);
        let mut accepted = false;
        for _ in 0..50 {
            let inv = 1.0 / lip;
            for i in 0..n {
                tu[i] = yu[i] - inv * grad_u[i];
                tg[i] = yg[i] - inv * grad_g[i];
            }
            project(prog, &mut tu, &mut tg);
            // majorization check for the step
            let mut quad = phi_y;
            for i in 0..n {
                let du = tu[i] - yu[i];
                let dg = tg[i] - yg[i];
                quad += grad_u[i] * du + grad_g[i] * dg + 0.5 * lip * (du * du + dg * dg);
            }
            let phi_t = phi_value(prog, pairs, mu, &tu, &tg);
            if phi_t <= quad + 1e-12 * quad.abs().max(1.0) {
                accepted = true;
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
                let mom = (t_k - 1.0) / t_next;
                for i in 0..n {
                    yu[i] = tu[i] + mom * (tu[i] - u_prev[i]);
                    yg[i] = tg[i] + mom * (tg[i] - g_prev[i]);
                }
                project(prog, &mut yu, &mut yg);
                u_prev.copy_from_slice(&tu);
                g_prev.copy_from_slice(&tg);
                u.copy_from_slice(&tu);
                g.copy_from_slice(&tg);
                t_k = t_next;
                if phi_t < best - stall_tol * best.abs().max(1e-30) {
                    best = phi_t;
                    since_best = 0;
                } else {
                    since_best += 1;
                    if phi_t > best {
                        // lost monotonicity: drop momentum
                        yu.copy_from_slice(u);
                        yg.copy_from_slice(g);
                        t_k = 1.0;
                    }
                }
                break;
            }
            lip *= 2.0;
        }
        if !accepted {
            break;
        }
        lip = (lip * 0.9).max(1e-6);
        if since_best > 30 {
            break;
        }
    }
    iters
}

#[cfg(test)]
mod tests {
    use super::super::{
        brute_force_capacity, solve_capacity, solve_capacity_with_hint, CapacityProblem,
        SolveOptions,
    };
    use crate::field::FieldVector;
    use crate::gen::{gen_grid, path3, two_point_space};
    use crate::space::PointSet;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn hajlasz_two_point() {
        // the one constraint g_a + g_b >= 1 splits evenly
        let s = two_point_space(1.0);
        let pr = CapacityProblem::hajlasz(PointSet::new(vec![0]), PointSet::new(vec![0]), 1.0, 2.0);
        let r = solve_capacity(&s, &pr).unwrap();
        assert!(close(r.value.as_f64(), 0.5, 1e-3), "{:?}", r.value);
        assert!(r.feasibility_residual <= 1e-9);
    }

    #[test]
    fn hajlasz_path() {
        // u = (1, 1/2, 0) with g = 1/4 everywhere: 3/16
        let s = path3();
        let pr =
            CapacityProblem::hajlasz(PointSet::new(vec![0]), PointSet::new(vec![0, 1]), 1.0, 2.0);
        let r = solve_capacity(&s, &pr).unwrap();
        assert!(close(r.value.as_f64(), 0.1875, 1e-3), "{:?}", r.value);
        assert!(r.feasibility_residual <= 1e-9);
    }

    #[test]
    fn variational_two_point() {
        // the crossing edge leaves only g_a, forced up to 2
        let s = two_point_space(1.0);
        let pr = CapacityProblem::variational(PointSet::new(vec![0]), PointSet::new(vec![0]), 2.0);
        let r = solve_capacity(&s, &pr).unwrap();
        assert!(close(r.value.as_f64(), 4.0, 1e-3), "{:?}", r.value);
    }

    #[test]
    fn variational_path() {
        // minimize (2 - 4t)^2 + (2t)^2 over the interior level t: t = 2/5
        let s = path3();
        let pr =
            CapacityProblem::variational(PointSet::new(vec![0]), PointSet::new(vec![0, 1]), 2.0);
        let r = solve_capacity(&s, &pr).unwrap();
        assert!(close(r.value.as_f64(), 0.8, 1e-3), "{:?}", r.value);
        assert!(r.feasibility_residual <= 1e-9);
    }

    #[test]
    fn full_host_is_free() {
        let s = path3();
        let pr = CapacityProblem::hajlasz(
            PointSet::new(vec![0]),
            PointSet::new(vec![0, 1, 2]),
            1.0,
            2.0,
        );
        let r = solve_capacity(&s, &pr).unwrap();
        assert_eq!(r.value.as_f64(), 0.0);
        assert!(r.certified);
    }

    #[test]
    fn hint_caps_the_value() {
        // handing the solver the exact optimum pins the reported value to it
        let s = path3();
        let pr =
            CapacityProblem::variational(PointSet::new(vec![0]), PointSet::new(vec![0, 1]), 2.0);
        let u = FieldVector::new(vec![1.0, 0.4, 0.0]).unwrap();
        let g = FieldVector::new(vec![0.4, 0.8, 0.0]).unwrap();
        let r = solve_capacity_with_hint(&s, &pr, &SolveOptions::tight(), &u, &g).unwrap();
        assert!(close(r.value.as_f64(), 0.8, 1e-6), "{:?}", r.value);
    }

    #[test]
    fn hajlasz_agrees_with_reference() {
        let s = gen_grid(2, 2).unwrap();
        let pr =
            CapacityProblem::hajlasz(PointSet::new(vec![0]), PointSet::new(vec![0, 1, 2]), 0.8, 2.0);
        let solved = solve_capacity(&s, &pr).unwrap().value.as_f64();
        let reference = brute_force_capacity(&s, &pr).unwrap().value.as_f64();
        assert!(close(solved, reference, 1e-3), "{solved} vs {reference}");
        assert!(solved >= reference - 1e-9 * reference.max(1.0));
    }

    #[test]
    fn variational_agrees_with_reference() {
        let s = gen_grid(2, 2).unwrap();
        let pr = CapacityProblem::variational(
            PointSet::new(vec![0]),
            PointSet::new(vec![0, 1, 2]),
            2.0,
        );
        let solved = solve_capacity(&s, &pr).unwrap().value.as_f64();
        let reference = brute_force_capacity(&s, &pr).unwrap().value.as_f64();
        assert!(close(solved, reference, 1e-3), "{solved} vs {reference}");
        assert!(solved >= reference - 1e-9 * reference.max(1.0));
    }
}
