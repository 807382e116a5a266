//! Measured space statistics.
//!
//! Ball membership changes only at realized pairwise distances, so every
//! statistic samples radii from that sorted multiset rather than scanning a
//! continuum. The doubling constant is the exact maximum over those radii;
//! the reverse-doubling and Ahlfors exponents are log-log least-squares fits
//! over subsampled (center, radius) pairs and are reported together with the
//! worst violation of the fitted inequality.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::space::{farthest_point_sample, BallKind, FiniteMetricMeasureSpace};

/// Summary statistics of a space.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SpaceStats {
    pub points: usize,
    pub diam: f64,
    pub mesh: f64,
    pub c_mu: f64,
    pub connected: bool,
    pub reverse_doubling: Option<ReverseDoublingFit>,
    pub ahlfors: Option<AhlforsFit>,
}

/// Least-squares fit of `mu(B(x,r))/mu(B(x,R)) <= c (r/R)^sigma`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ReverseDoublingFit {
    pub sigma: f64,
    pub c_sigma: f64,
    /// Largest multiplicative violation of the fitted inequality (>= 1).
    pub max_violation_factor: f64,
    pub samples: usize,
}

/// Least-squares fit of `log mu(B(x,r)) = log c + q log r`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AhlforsFit {
    pub exponent: f64,
    /// Smallest `c` with `c^-1 r^q <= mu(B(x,r)) <= c r^q` over the samples.
    pub constant: f64,
    pub samples: usize,
}

/// Geodesic-graph discrepancy: shortest-path length vs metric distance.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GeodesicReport {
    pub max_rel_discrepancy: f64,
    pub worst_pair: (usize, usize),
}

/// Measured doubling constant: the maximum of
/// `mu(B(x, 2r)) / mu(B(x, r))` over all centers and realized radii.
/// A one-point space has no realized radius and reports 1.
pub fn estimate_doubling(space: &FiniteMetricMeasureSpace) -> f64 {
    let n = space.len();
    let thresholds = space.thresholds();
    if n < 2 || thresholds.is_empty() {
        return 1.0;
    }
    (0..n)
        .into_par_iter()
        .map(|c| {
            let mut worst = 1.0f64;
            for &r in thresholds {
                let inner = space.mu_ball(c, r, BallKind::Open);
                if inner > 0.0 {
                    worst = worst.max(space.mu_ball(c, 2.0 * r, BallKind::Open) / inner);
                }
            }
            worst
        })
        .reduce(|| 1.0, f64::max)
}

/// Reverse-doubling fit over sampled radius pairs `r < R <= 2 diam`.
///
/// Requires at least two points and a connected space (through edges, or
/// through mesh-scale chains when no graph is present).
pub fn estimate_reverse_doubling(space: &FiniteMetricMeasureSpace) -> Result<ReverseDoublingFit> {
    if space.len() < 2 {
        return Err(Error::NotApplicable("reverse doubling is vacuous on a one-point space".into()));
    }
    if !space.is_connected() {
        return Err(Error::Precondition("reverse doubling requires a connected space".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for_each_fit_sample(space, 2.0 * space.diam(), |_, r, big_r, mu_r, mu_big| {
        if r < big_r {
            xs.push((r / big_r).ln());
            ys.push((mu_r / mu_big).ln());
        }
    });
    let (slope, intercept) = least_squares(&xs, &ys)?;
    let mut max_log_violation = 0.0f64;
    for (x, y) in xs.iter().zip(&ys) {
        max_log_violation = max_log_violation.max(y - (intercept + slope * x));
    }
    Ok(ReverseDoublingFit {
        sigma: slope,
        c_sigma: intercept.exp(),
        max_violation_factor: max_log_violation.exp(),
        samples: xs.len(),
    })
}

/// Ahlfors-regularity fit `mu(B(x,r)) ~ c r^q` over sampled radii up to diam.
pub fn estimate_ahlfors(space: &FiniteMetricMeasureSpace) -> Result<AhlforsFit> {
    if space.len() < 2 {
        return Err(Error::NotApplicable("Ahlfors fit is vacuous on a one-point space".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for_each_fit_sample(space, space.diam(), |_, r, _, mu_r, _| {
        xs.push(r.ln());
        ys.push(mu_r.ln());
    });
    let (slope, _) = least_squares(&xs, &ys)?;
    let mut worst = 0.0f64;
    for (x, y) in xs.iter().zip(&ys) {
        worst = worst.max((y - slope * x).abs());
    }
    Ok(AhlforsFit { exponent: slope, constant: worst.exp(), samples: xs.len() })
}

/// All fitted statistics in one record.
pub fn space_stats(space: &FiniteMetricMeasureSpace) -> SpaceStats {
    let connected = space.is_connected();
    SpaceStats {
        points: space.len(),
        diam: space.diam(),
        mesh: space.mesh(),
        c_mu: estimate_doubling(space),
        connected,
        reverse_doubling: if connected { estimate_reverse_doubling(space).ok() } else { None },
        ahlfors: estimate_ahlfors(space).ok(),
    }
}

/// Compare graph shortest-path distances against the metric for all pairs.
///
/// Reports the largest relative discrepancy; it does not assert, because 2D
/// grids legitimately disagree along diagonals. A disconnected graph yields
/// an infinite discrepancy.
pub fn check_geodesic_graph(space: &FiniteMetricMeasureSpace) -> Result<GeodesicReport> {
    let edges = space
        .edges()
        .ok_or_else(|| Error::NotApplicable("space has no edge graph".into()))?;
    let n = space.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in edges {
        adj[e.a].push((e.b, e.len));
        adj[e.b].push((e.a, e.len));
    }
    let per_source: Vec<(f64, (usize, usize))> = (0..n)
        .into_par_iter()
        .map(|src| {
            let sp = dijkstra(&adj, src);
            let mut worst = (0.0f64, (src, src));
            for (j, &s) in sp.iter().enumerate() {
                if j == src {
                    continue;
                }
                let d = space.dist(src, j);
                let rel = if s.is_finite() { (s - d).abs() / d } else { f64::INFINITY };
                if rel > worst.0 {
                    worst = (rel, (src, j));
                }
            }
            worst
        })
        .collect();
    let mut best = (0.0f64, (0usize, 0usize));
    for w in per_source {
        if w.0 > best.0 {
            best = w;
        }
    }
    Ok(GeodesicReport { max_rel_discrepancy: best.0, worst_pair: best.1 })
}

/// Shortest-path distances from `src` over an adjacency list.
pub(crate) fn dijkstra(adj: &[Vec<(usize, f64)>], src: usize) -> Vec<f64> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Entry(f64, usize);
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.partial_cmp(&other.0).unwrap().then(self.1.cmp(&other.1))
        }
    }

    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[src] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(Entry(0.0, src)));
    while let Some(Reverse(Entry(d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, len) in &adj[u] {
            let nd = d + len;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse(Entry(nd, v)));
            }
        }
    }
    dist
}

/// Shared sampling scheme for the two fits: up to 24 farthest-point centers,
/// up to 16 log-spaced realized radii per center plus the cap radius.
fn for_each_fit_sample(
    space: &FiniteMetricMeasureSpace,
    cap: f64,
    mut f: impl FnMut(usize, f64, f64, f64, f64),
) {
    let n = space.len();
    let all: Vec<usize> = (0..n).collect();
    let centers = farthest_point_sample(space, &all, 24.min(n), 0);
    for c in centers {
        let (_, dists) = space.sorted_row(c);
        let mut radii: Vec<f64> = Vec::new();
        let mut distinct: Vec<f64> = dists.iter().cloned().filter(|&d| d > 0.0).collect();
        distinct.dedup();
        if distinct.is_empty() {
            continue;
        }
        let lo = distinct[0];
        let hi = *distinct.last().unwrap();
        let steps = 15usize;
        for k in 0..=steps {
            let target = lo * (hi / lo).powf(k as f64 / steps as f64);
            let pos = distinct.partition_point(|&d| d < target * (1.0 - 1e-12));
            let chosen = distinct[pos.min(distinct.len() - 1)];
            radii.push(chosen);
        }
        radii.push(cap);
        radii.retain(|&r| r <= cap);
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.dedup();
        let mus: Vec<f64> = radii.iter().map(|&r| space.mu_ball(c, r, BallKind::Open)).collect();
        let big_r = *radii.last().unwrap();
        let mu_big = *mus.last().unwrap();
        for (i, &r) in radii.iter().enumerate() {
            if mus[i] > 0.0 && mu_big > 0.0 {
                f(c, r, big_r, mus[i], mu_big);
            }
        }
    }
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let m = xs.len() as f64;
    if xs.len() < 2 {
        return Err(Error::NotApplicable("not enough samples for a least-squares fit".into()));
    }
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = m * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return Err(Error::NotApplicable("degenerate radius samples for the fit".into()));
    }
    let slope = (m * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / m;
    Ok((slope, intercept))
}
