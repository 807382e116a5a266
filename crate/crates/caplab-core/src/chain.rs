//! Chains of balls marching from the boundary sphere toward a center point.
//!
//! The construction walks a shortest graph path from a far point toward `y`,
//! keeping a vertex as a ball center whenever its distance to `y` has dropped
//! by the fixed descent factor, with radius a quarter of that distance. A
//! floor at the connectivity scale keeps mid-chain balls from degenerating to
//! singletons before the final ball lands inside `B(y, rho)`. Link balls sit
//! on a shared member of each consecutive pair. Every property is then
//! checked on realized member sets and the observed overlap constant is
//! recorded.

use crate::error::{Error, Result};
use crate::space::{Ball, BallKind, FiniteMetricMeasureSpace};
use crate::stats::dijkstra;

/// Distance-to-`y` descent factor between consecutive kept centers.
const DESCENT: f64 = 7.0 / 8.0;
/// A vertex closer to `y` than this fraction of `rho` becomes the final center.
const FINAL_TRIGGER: f64 = 4.0 / 5.0;

/// A validated chain of closed balls from outside `B(y, R)` into `B(y, rho)`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BallChain {
    pub y: usize,
    pub rho: f64,
    pub big_r: f64,
    pub balls: Vec<Ball>,
    pub links: Vec<Ball>,
    pub m_observed: f64,
}

/// Outcome of checking the four chain properties.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ChainValidation {
    pub valid: bool,
    pub m_observed: f64,
    pub violations: Vec<String>,
}

/// Builds and validates a ball chain for `(y, rho, R)`.
pub fn build_ball_chain(
    space: &FiniteMetricMeasureSpace,
    y: usize,
    rho: f64,
    big_r: f64,
) -> Result<BallChain> {
    let n = space.len();
    if y >= n {
        return Err(Error::InvalidParameter(format!("point {y} out of range")));
    }
    if !rho.is_finite() || !big_r.is_finite() || rho <= 0.0 {
        return Err(Error::InvalidParameter(format!("radii must be finite and positive, got rho={rho}, R={big_r}")));
    }
    if rho >= big_r {
        return Err(Error::InvalidParameter(format!("need rho < R, got rho={rho}, R={big_r}")));
    }
    if big_r >= 3.0 / 8.0 * space.diam() {
        return Err(Error::InvalidParameter(format!(
            "need R < (3/8) diam = {}, got R={big_r}",
            3.0 / 8.0 * space.diam()
        )));
    }
    let edges = space
        .edges()
        .ok_or_else(|| Error::Precondition("ball chains need an edge graph".into()))?;

    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in edges {
        adj[e.a].push((e.b, e.len));
        adj[e.b].push((e.a, e.len));
    }
    // Shortest-path tree toward y; parents point one hop closer to y.
    let (sp, parent) = dijkstra_with_parents(&adj, y);

    let start = (0..n)
        .max_by(|&a, &b| {
            space.dist(y, a).partial_cmp(&space.dist(y, b)).unwrap().then(b.cmp(&a))
        })
        .unwrap();
    let d_start = space.dist(y, start);
    if d_start <= big_r {
        return Err(Error::NotApplicable(format!("no point outside B(y, R): farthest is {d_start} <= {big_r}")));
    }
    if d_start < 4.0 / 3.0 * big_r {
        return Err(Error::NotApplicable(format!(
            "farthest point at {d_start} leaves no margin outside B(y, R={big_r})"
        )));
    }
    if !sp[start].is_finite() {
        return Err(Error::Precondition("edge graph does not connect the start point to y".into()));
    }

    let mut path = vec![start];
    let mut v = start;
    while v != y {
        v = parent[v].expect("finite shortest-path distance implies a parent");
        path.push(v);
    }

    let mesh = space.mesh();
    let mut centers: Vec<usize> = vec![start];
    let mut final_center: Option<usize> = None;
    let mut last_d = d_start;
    for (i, &v) in path.iter().enumerate().skip(1) {
        let d = space.dist(y, v);
        if v != y && d < FINAL_TRIGGER * rho {
            final_center = Some(v);
            break;
        }
        // the walk may travel far at nearly constant d(y, .) before the
        // descent fires; keep v before the next step exits the last kept
        // ball so consecutive balls always share a realized point
        let c_last = *centers.last().unwrap();
        let r_last = (last_d / 4.0).max(mesh);
        let exiting = path.get(i + 1).is_some_and(|&u| space.dist(c_last, u) > r_last);
        if d <= DESCENT * last_d || exiting {
            centers.push(v);
            last_d = d;
        }
    }
    let final_center = final_center.ok_or_else(|| {
        Error::NotApplicable(format!("rho={rho} is below the graph resolution near point {y}"))
    })?;

    let mut balls: Vec<Ball> = centers
        .iter()
        .map(|&c| Ball::closed(c, (space.dist(y, c) / 4.0).max(mesh)))
        .collect();
    balls.push(Ball::closed(final_center, space.dist(y, final_center) / 4.0));

    let mut links = Vec::with_capacity(balls.len() - 1);
    for w in balls.windows(2) {
        links.push(link_ball(space, &w[0], &w[1])?);
    }

    let chain = BallChain { y, rho, big_r, balls, links, m_observed: 0.0 };
    let check = validate_ball_chain(space, &chain)?;
    if !check.valid {
        return Err(Error::Internal(format!(
            "chain construction violated its own invariants: {}",
            check.violations.join("; ")
        )));
    }
    Ok(BallChain { m_observed: check.m_observed, ..chain })
}

/// Largest ball around a shared member that nominally fits inside both, or a
/// singleton at the connectivity scale when the overlap is only boundary-deep.
fn link_ball(space: &FiniteMetricMeasureSpace, a: &Ball, b: &Ball) -> Result<Ball> {
    let ma = crate::space::ball_members(space, a)?;
    let mb = crate::space::ball_members(space, b)?;
    let shared = ma.intersect(&mb);
    if shared.is_empty() {
        return Err(Error::Internal(format!(
            "adjacent chain balls at centers {} and {} do not overlap",
            a.center, b.center
        )));
    }
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for m in shared.iter() {
        let slack = (a.radius - space.dist(m, a.center)).min(b.radius - space.dist(m, b.center));
        if slack > best.0 {
            best = (slack, m);
        }
    }
    let center = best.1;
    let radius = best.0.max(space.nn_dist(center) / 2.0);
    Ok(Ball::closed(center, radius))
}

/// Checks the four chain properties on realized member sets and returns the
/// observed overlap constant:
///
/// 1. the first ball misses `B(y, R)` and the last sits inside `B(y, rho)`;
/// 2. every ball's distance to `y` is comparable with its nominal diameter;
/// 3. each link lies in both neighbors, and both neighbors lie in the link
///    scaled by the constant;
/// 4. no point belongs to too many balls.
pub fn validate_ball_chain(space: &FiniteMetricMeasureSpace, chain: &BallChain) -> Result<ChainValidation> {
    let mut violations = Vec::new();
    let mut m = 1.0f64;
    if chain.balls.is_empty() {
        return Ok(ChainValidation { valid: false, m_observed: f64::INFINITY, violations: vec!["empty chain".into()] });
    }
    let members: Vec<Vec<usize>> = chain
        .balls
        .iter()
        .map(|b| space.ball_member_ids(b.center, b.radius, b.kind))
        .collect();

    let first = &members[0];
    if let Some(&bad) = first.iter().find(|&&p| space.dist(chain.y, p) < chain.big_r) {
        violations.push(format!("first ball reaches into B(y, R) at point {bad}"));
    }
    let last = members.last().unwrap();
    if let Some(&bad) = last.iter().find(|&&p| space.dist(chain.y, p) >= chain.rho) {
        violations.push(format!("last ball leaves B(y, rho) at point {bad}"));
    }

    for (i, (ball, mem)) in chain.balls.iter().zip(&members).enumerate() {
        if mem.is_empty() {
            violations.push(format!("ball {i} has no members"));
            continue;
        }
        let dist_y = mem.iter().map(|&p| space.dist(chain.y, p)).fold(f64::INFINITY, f64::min);
        let dnom = 2.0 * ball.radius;
        if dist_y <= 0.0 || dnom <= 0.0 {
            violations.push(format!("ball {i} touches y or has zero diameter"));
            continue;
        }
        m = m.max(dnom / dist_y).max(dist_y / dnom);
    }

    for (i, link) in chain.links.iter().enumerate() {
        let lm = space.ball_member_ids(link.center, link.radius, link.kind);
        let (a, b) = (&members[i], &members[i + 1]);
        for &p in &lm {
            if !a.contains(&p) || !b.contains(&p) {
                violations.push(format!("link {i} member {p} escapes the neighboring balls"));
            }
        }
        if link.radius <= 0.0 {
            violations.push(format!("link {i} has nonpositive radius"));
            continue;
        }
        let mut needed = 1.0f64;
        for &p in a.iter().chain(b.iter()) {
            needed = needed.max(space.dist(p, link.center) / link.radius);
        }
        m = m.max(needed);
    }

    let mut mult = vec![0u32; space.len()];
    for mem in members.iter() {
        for &p in mem {
            mult[p] += 1;
        }
    }
    for link in &chain.links {
        for p in space.ball_member_ids(link.center, link.radius, link.kind) {
            mult[p] += 1;
        }
    }
    let max_mult = mult.iter().copied().max().unwrap_or(0);
    m = m.max(max_mult as f64);

    // The ball list must be closed balls for member checks to mean inclusion.
    for (i, b) in chain.balls.iter().chain(chain.links.iter()).enumerate() {
        if b.kind != BallKind::Closed {
            violations.push(format!("ball or link {i} is not closed"));
        }
    }

    Ok(ChainValidation { valid: violations.is_empty(), m_observed: m, violations })
}

fn dijkstra_with_parents(adj: &[Vec<(usize, f64)>], src: usize) -> (Vec<f64>, Vec<Option<usize>>) {
    let sp = dijkstra(adj, src);
    let mut parent = vec![None; adj.len()];
    for (v, nbrs) in adj.iter().enumerate() {
        if v == src || !sp[v].is_finite() {
            continue;
        }
        // parent = neighbor on some shortest path toward src, lowest id on ties
        let mut best: Option<(f64, usize)> = None;
        for &(u, len) in nbrs {
            if (sp[u] + len - sp[v]).abs() <= 1e-9 * (1.0 + sp[v]) {
                let cand = (sp[u], u);
                if best.map_or(true, |b| cand < b) {
                    best = Some(cand);
                }
            }
        }
        parent[v] = best.map(|(_, u)| u);
    }
    (sp, parent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_grid, path3, snowflake};

    #[test]
    fn rejects_rho_not_below_big_r() {
        let s = gen_grid(33, 1).unwrap();
        assert!(matches!(build_ball_chain(&s, 16, 0.25, 0.25), Err(Error::InvalidParameter(_))));
        assert!(matches!(build_ball_chain(&s, 16, 0.3, 0.25), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn rejects_big_r_beyond_diam_fraction() {
        let s = gen_grid(33, 1).unwrap();
        assert!(matches!(build_ball_chain(&s, 16, 0.01, 0.4), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn requires_edges() {
        let s = snowflake(&path3(), 0.5).unwrap();
        assert!(matches!(build_ball_chain(&s, 0, 0.1, 0.2), Err(Error::Precondition(_))));
    }

    #[test]
    fn line_chain_validates() {
        let s = gen_grid(33, 1).unwrap();
        let mesh = s.mesh();
        let chain = build_ball_chain(&s, 16, 2.0 * mesh, 0.25).unwrap();
        assert!(chain.balls.len() >= 2);
        assert_eq!(chain.links.len(), chain.balls.len() - 1);
        assert!(chain.m_observed <= 64.0, "M = {}", chain.m_observed);
        let check = validate_ball_chain(&s, &chain).unwrap();
        assert!(check.valid, "{:?}", check.violations);
    }

    #[test]
    fn grid_chain_validates() {
        let s = gen_grid(33, 2).unwrap();
        let mesh = s.mesh();
        let center = 16 * 33 + 16;
        let chain = build_ball_chain(&s, center, 3.0 * mesh, 0.25).unwrap();
        assert!(chain.m_observed <= 64.0, "M = {}", chain.m_observed);
        let check = validate_ball_chain(&s, &chain).unwrap();
        assert!(check.valid, "{:?}", check.violations);
    }

    #[test]
    fn chain_balls_shrink_toward_target() {
        let s = gen_grid(33, 1).unwrap();
        let chain = build_ball_chain(&s, 16, 2.0 * s.mesh(), 0.25).unwrap();
        let first = chain.balls.first().unwrap();
        let last = chain.balls.last().unwrap();
        assert!(space_dist(&s, 16, first.center) > space_dist(&s, 16, last.center));
        assert!(last.radius < first.radius);
    }

    fn space_dist(s: &FiniteMetricMeasureSpace, a: usize, b: usize) -> f64 {
        s.dist(a, b)
    }
}
