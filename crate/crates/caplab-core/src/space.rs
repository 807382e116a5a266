//! Finite metric measure spaces.
//!
//! A space is a finite point set with a full distance matrix, a strictly
//! positive weight (atomic measure) per point, and an optional edge graph
//! whose edge lengths agree with the metric. Balls follow the open
//! convention `B(x, r) = {y : d(x, y) < r}` unless a closed ball is asked
//! for explicitly; every measure-of-ball quantity in this crate is computed
//! through [`FiniteMetricMeasureSpace::mu_ball`] so the convention is applied
//! in exactly one place.
//!
//! Distance matrices are validated on construction: symmetry, zero diagonal,
//! positivity off the diagonal, and the triangle inequality (exhaustively up
//! to 300 points, on a fixed sample of triples above that). Edge lengths must
//! equal the metric distance of their endpoints; whether the graph is
//! geodesic is measured separately by `check_geodesic_graph`, not assumed.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Ball membership convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BallKind {
    /// `d(center, y) < radius`
    Open,
    /// `d(center, y) <= radius`
    Closed,
}

/// A metric ball described by center point id, radius, and convention.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
    pub kind: BallKind,
}

impl Ball {
    pub fn open(center: usize, radius: f64) -> Self {
        Ball { center, radius, kind: BallKind::Open }
    }

    pub fn closed(center: usize, radius: f64) -> Self {
        Ball { center, radius, kind: BallKind::Closed }
    }

    /// Same center and convention, radius scaled by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Ball { center: self.center, radius: self.radius * t, kind: self.kind }
    }
}

/// An undirected edge of the optional graph; `len` equals the metric distance.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub len: f64,
}

/// A subset of point ids, kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    ids: Vec<usize>,
}

impl PointSet {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        PointSet { ids }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        let mut ids = self.ids.clone();
        ids.extend_from_slice(&other.ids);
        PointSet::new(ids)
    }

    pub fn intersect(&self, other: &PointSet) -> PointSet {
        let ids = self.ids.iter().copied().filter(|i| other.contains(*i)).collect();
        PointSet { ids }
    }

    /// Complement within a space of `n` points.
    pub fn complement(&self, n: usize) -> PointSet {
        let ids = (0..n).filter(|i| !self.contains(*i)).collect();
        PointSet { ids }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.ids.iter().copied()
    }
}

// Serialized as a plain id list; construction restores the sorted-dedup
// invariant on the way back in.
impl serde::Serialize for PointSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.ids.serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for PointSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(PointSet::new(Vec::<usize>::deserialize(d)?))
    }
}

/// Per-space derived data, built once on first use.
#[derive(Debug)]
struct SpaceCache {
    /// Per-center permutation of point ids, ascending by distance, ties by id.
    sorted_idx: Vec<u32>,
    /// Distances in the same order as `sorted_idx`.
    sorted_dist: Vec<f64>,
    /// Per-center prefix sums of weights in sorted order; row length n + 1.
    prefix_w: Vec<f64>,
    /// Sorted distinct positive distances over all pairs.
    thresholds: Vec<f64>,
    diam: f64,
    /// Nearest-neighbor distance per point (0.0 for a one-point space).
    nn: Vec<f64>,
    /// Connectivity scale: the largest nearest-neighbor distance.
    mesh: f64,
    total_mass: f64,
}

/// A finite metric measure space with optional coordinates and edge graph.
#[derive(Debug)]
pub struct FiniteMetricMeasureSpace {
    coords: Option<Vec<Vec<f64>>>,
    dist: Vec<f64>,
    weights: Vec<f64>,
    edges: Option<Vec<Edge>>,
    cache: OnceLock<SpaceCache>,
}

const SYMMETRY_TOL: f64 = 1e-12;
const TRIANGLE_TOL: f64 = 1e-9;
const EDGE_LEN_TOL: f64 = 1e-9;

impl FiniteMetricMeasureSpace {
    /// Build a space from an explicit distance matrix (row-major `n * n`).
    pub fn from_dist(dist: Vec<f64>, weights: Vec<f64>, edges: Option<Vec<Edge>>) -> Result<Self> {
        let space = FiniteMetricMeasureSpace {
            coords: None,
            dist,
            weights,
            edges,
            cache: OnceLock::new(),
        };
        space.validate()?;
        Ok(space)
    }

    /// Build a space from coordinates; distances are Euclidean.
    pub fn from_coords(
        coords: Vec<Vec<f64>>,
        weights: Vec<f64>,
        edges: Option<Vec<Edge>>,
    ) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty point list".into()));
        }
        let dim = coords[0].len();
        if dim == 0 || coords.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidInput("coordinate rows must share a positive dimension".into()));
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclid(&coords[i], &coords[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        let space = FiniteMetricMeasureSpace {
            coords: Some(coords),
            dist,
            weights,
            edges,
            cache: OnceLock::new(),
        };
        space.validate()?;
        Ok(space)
    }

    fn validate(&self) -> Result<()> {
        let n2 = self.dist.len();
        let n = self.weights.len();
        if n == 0 {
            return Err(Error::InvalidInput("space must contain at least one point".into()));
        }
        if n2 != n * n {
            return Err(Error::InvalidInput(format!(
                "distance matrix has {} entries, expected {} for {} points",
                n2,
                n * n,
                n
            )));
        }
        for (i, w) in self.weights.iter().enumerate() {
            if !w.is_finite() || *w <= 0.0 {
                return Err(Error::InvalidInput(format!("weight of point {i} must be finite and positive, got {w}")));
            }
        }
        let mut scale: f64 = 0.0;
        for i in 0..n {
            if self.dist[i * n + i] != 0.0 {
                return Err(Error::InvalidInput(format!("distance matrix diagonal entry {i} is nonzero")));
            }
            for j in (i + 1)..n {
                let d = self.dist[i * n + j];
                let dt = self.dist[j * n + i];
                if !d.is_finite() || d <= 0.0 {
                    return Err(Error::InvalidInput(format!("distance between distinct points {i},{j} must be finite and positive, got {d}")));
                }
                if (d - dt).abs() > SYMMETRY_TOL * d.max(1.0) {
                    return Err(Error::InvalidInput(format!("distance matrix is asymmetric at ({i},{j}): {d} vs {dt}")));
                }
                scale = scale.max(d);
            }
        }
        self.validate_triangle(scale)?;
        if let Some(edges) = &self.edges {
            for e in edges {
                if e.a >= n || e.b >= n || e.a == e.b {
                    return Err(Error::InvalidInput(format!("edge ({}, {}) out of range or degenerate", e.a, e.b)));
                }
                let d = self.dist[e.a * n + e.b];
                if (e.len - d).abs() > EDGE_LEN_TOL * d.max(1.0) {
                    return Err(Error::InvalidInput(format!(
                        "edge ({}, {}) has length {} but the metric distance is {}",
                        e.a, e.b, e.len, d
                    )));
                }
            }
        }
        Ok(())
    }

    /// Triangle inequality: exhaustive up to 300 points, fixed sample beyond.
    fn validate_triangle(&self, scale: f64) -> Result<()> {
        let n = self.weights.len();
        let tol = TRIANGLE_TOL * scale.max(1.0);
        let check = |i: usize, j: usize, k: usize| -> Result<()> {
            let dij = self.dist[i * n + j];
            let djk = self.dist[j * n + k];
            let dik = self.dist[i * n + k];
            if dik > dij + djk + tol {
                return Err(Error::InvalidInput(format!(
                    "triangle inequality fails for ({i},{j},{k}): d({i},{k}) = {dik} > {dij} + {djk}"
                )));
            }
            Ok(())
        };
        if n <= 300 {
            for i in 0..n {
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    for k in 0..n {
                        if k == i || k == j {
                            continue;
                        }
                        check(i, j, k)?;
                    }
                }
            }
        } else {
            // Deterministic LCG over triples; coverage, not proof, at this size.
            let mut state = 0x9e3779b97f4a7c15u64;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 33) as usize
            };
            for _ in 0..200_000 {
                let i = next() % n;
                let j = next() % n;
                let k = next() % n;
                if i != j && j != k && i != k {
                    check(i, j, k)?;
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.weights.len() + j]
    }

    pub fn dist_matrix(&self) -> &[f64] {
        &self.dist
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn edges(&self) -> Option<&[Edge]> {
        self.edges.as_deref()
    }

    fn cache(&self) -> &SpaceCache {
        self.cache.get_or_init(|| {
            let n = self.weights.len();
            let mut sorted_idx = vec![0u32; n * n];
            let mut sorted_dist = vec![0.0; n * n];
            let mut prefix_w = vec![0.0; n * (n + 1)];
            let mut diam: f64 = 0.0;
            let mut nn = vec![0.0; n];
            let mut order: Vec<u32> = Vec::with_capacity(n);
            for c in 0..n {
                order.clear();
                order.extend(0..n as u32);
                let row = &self.dist[c * n..(c + 1) * n];
                order.sort_by(|&a, &b| {
                    row[a as usize]
                        .partial_cmp(&row[b as usize])
                        .unwrap()
                        .then(a.cmp(&b))
                });
                let mut acc = 0.0;
                for (k, &id) in order.iter().enumerate() {
                    sorted_idx[c * n + k] = id;
                    sorted_dist[c * n + k] = row[id as usize];
                    prefix_w[c * (n + 1) + k] = acc;
                    acc += self.weights[id as usize];
                }
                prefix_w[c * (n + 1) + n] = acc;
                if n >= 2 {
                    nn[c] = sorted_dist[c * n + 1];
                    diam = diam.max(sorted_dist[c * n + n - 1]);
                }
            }
            let mut thresholds: Vec<f64> = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    thresholds.push(self.dist[i * n + j]);
                }
            }
            thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            thresholds.dedup();
            let mesh = nn.iter().cloned().fold(0.0, f64::max);
            SpaceCache {
                sorted_idx,
                sorted_dist,
                prefix_w,
                thresholds,
                diam,
                nn,
                mesh,
                total_mass: self.weights.iter().sum(),
            }
        })
    }

    /// Largest pairwise distance (0 for a one-point space).
    pub fn diam(&self) -> f64 {
        self.cache().diam
    }

    /// Connectivity scale: the largest nearest-neighbor distance.
    pub fn mesh(&self) -> f64 {
        self.cache().mesh
    }

    /// Nearest-neighbor distance of point `i`.
    pub fn nn_dist(&self, i: usize) -> f64 {
        self.cache().nn[i]
    }

    /// Sorted distinct positive realized distances.
    pub fn thresholds(&self) -> &[f64] {
        &self.cache().thresholds
    }

    pub fn total_mass(&self) -> f64 {
        self.cache().total_mass
    }

    /// Point ids of `i`'s row sorted by ascending distance (self first).
    pub fn sorted_row(&self, i: usize) -> (&[u32], &[f64]) {
        let n = self.weights.len();
        let c = self.cache();
        (&c.sorted_idx[i * n..(i + 1) * n], &c.sorted_dist[i * n..(i + 1) * n])
    }

    /// Prefix weights matching `sorted_row(i)`: entry `k` is the mass of the
    /// `k` nearest points (self included), entry `n` the total mass.
    pub fn sorted_prefix_weights(&self, i: usize) -> &[f64] {
        let n = self.weights.len();
        &self.cache().prefix_w[i * (n + 1)..(i + 1) * (n + 1)]
    }

    /// Number of points with `d(center, y) < r` (open) or `<= r` (closed).
    pub fn ball_count(&self, center: usize, radius: f64, kind: BallKind) -> usize {
        let n = self.weights.len();
        let c = self.cache();
        let row = &c.sorted_dist[center * n..(center + 1) * n];
        match kind {
            BallKind::Open => row.partition_point(|&d| d < radius),
            BallKind::Closed => row.partition_point(|&d| d <= radius),
        }
    }

    /// Measure of a ball under the stated convention.
    pub fn mu_ball(&self, center: usize, radius: f64, kind: BallKind) -> f64 {
        let n = self.weights.len();
        let k = self.ball_count(center, radius, kind);
        self.cache().prefix_w[center * (n + 1) + k]
    }

    /// Member ids of a ball, in ascending-distance order.
    pub fn ball_member_ids(&self, center: usize, radius: f64, kind: BallKind) -> Vec<usize> {
        let n = self.weights.len();
        let k = self.ball_count(center, radius, kind);
        self.cache().sorted_idx[center * n..center * n + k]
            .iter()
            .map(|&i| i as usize)
            .collect()
    }

    /// Metric distance from a point to a nonempty set of point ids.
    pub fn dist_to_set(&self, x: usize, set: &[usize]) -> f64 {
        set.iter().map(|&m| self.dist(x, m)).fold(f64::INFINITY, f64::min)
    }

    /// Whether the space is connected: through its edge graph when present,
    /// otherwise through chains of steps no longer than the mesh scale.
    pub fn is_connected(&self) -> bool {
        let n = self.weights.len();
        if n == 1 {
            return true;
        }
        let mut dsu = Dsu::new(n);
        match &self.edges {
            Some(edges) => {
                for e in edges {
                    dsu.union(e.a, e.b);
                }
            }
            None => {
                let eps = self.mesh() * (1.0 + 1e-9);
                for i in 0..n {
                    for j in (i + 1)..n {
                        if self.dist(i, j) <= eps {
                            dsu.union(i, j);
                        }
                    }
                }
            }
        }
        let root = dsu.find(0);
        (1..n).all(|i| dsu.find(i) == root)
    }
}

/// Membership of a ball per its convention. Radius must be positive.
pub fn ball_members(space: &FiniteMetricMeasureSpace, ball: &Ball) -> Result<PointSet> {
    if ball.center >= space.len() {
        return Err(Error::InvalidParameter(format!("ball center {} out of range", ball.center)));
    }
    if !ball.radius.is_finite() || ball.radius <= 0.0 {
        return Err(Error::InvalidParameter(format!("ball radius must be positive, got {}", ball.radius)));
    }
    Ok(PointSet::new(space.ball_member_ids(ball.center, ball.radius, ball.kind)))
}

/// Greedy farthest-point subsample of `candidates`, `k` points, deterministic
/// given the start index. Ties break toward the lower point id.
pub fn farthest_point_sample(
    space: &FiniteMetricMeasureSpace,
    candidates: &[usize],
    k: usize,
    start: usize,
) -> Vec<usize> {
    if candidates.is_empty() || k == 0 {
        return Vec::new();
    }
    let start = candidates[start % candidates.len()];
    let mut chosen = vec![start];
    let mut min_dist: Vec<f64> = candidates.iter().map(|&c| space.dist(c, start)).collect();
    while chosen.len() < k.min(candidates.len()) {
        let mut best = None;
        for (pos, &c) in candidates.iter().enumerate() {
            if chosen.contains(&c) {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bc)) => min_dist[pos] > bd || (min_dist[pos] == bd && c < bc),
            };
            if better {
                best = Some((min_dist[pos], c));
            }
        }
        let (_, next) = best.expect("candidates not exhausted");
        chosen.push(next);
        for (pos, &c) in candidates.iter().enumerate() {
            min_dist[pos] = min_dist[pos].min(space.dist(c, next));
        }
    }
    chosen
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_grid, two_point_space};

    #[test]
    fn rejects_nonpositive_weights() {
        let err = FiniteMetricMeasureSpace::from_dist(
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0, 0.0],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn rejects_broken_triangle() {
        // d(0,2) = 5 > 1 + 1
        let dist = vec![
            0.0, 1.0, 5.0, //
            1.0, 0.0, 1.0, //
            5.0, 1.0, 0.0,
        ];
        let err = FiniteMetricMeasureSpace::from_dist(dist, vec![1.0; 3], None).unwrap_err();
        assert!(err.to_string().contains("triangle"));
    }

    #[test]
    fn rejects_edge_length_mismatch() {
        let err = FiniteMetricMeasureSpace::from_dist(
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0, 1.0],
            Some(vec![Edge { a: 0, b: 1, len: 2.0 }]),
        )
        .unwrap_err();
        assert!(err.to_string().contains("edge"));
    }

    #[test]
    fn two_point_ball_membership() {
        let s = two_point_space(1.0);
        let open = ball_members(&s, &Ball::open(0, 1.0)).unwrap();
        assert_eq!(open.ids(), &[0]);
        let closed = ball_members(&s, &Ball::closed(0, 1.0)).unwrap();
        assert_eq!(closed.ids(), &[0, 1]);
    }

    #[test]
    fn path3_open_ball_at_two() {
        let s = crate::gen::path3();
        let b = ball_members(&s, &Ball::open(0, 2.0)).unwrap();
        assert_eq!(b.ids(), &[0, 1]);
    }

    #[test]
    fn ball_members_rejects_zero_radius() {
        let s = two_point_space(1.0);
        assert!(ball_members(&s, &Ball::open(0, 0.0)).is_err());
    }

    #[test]
    fn open_ball_contained_in_closed() {
        let s = gen_grid(5, 2).unwrap();
        for c in 0..s.len() {
            for &r in &[0.1, 0.25, 0.3, 0.5, 1.0] {
                let open = ball_members(&s, &Ball::open(c, r)).unwrap();
                let closed = ball_members(&s, &Ball::closed(c, r)).unwrap();
                assert!(open.ids().iter().all(|i| closed.contains(*i)));
            }
        }
    }

    #[test]
    fn ball_measure_matches_member_sum() {
        let s = gen_grid(4, 2).unwrap();
        for c in 0..s.len() {
            for &r in &[0.2, 0.4, 0.8] {
                let members = s.ball_member_ids(c, r, BallKind::Open);
                let direct: f64 = members.iter().map(|&i| s.weight(i)).sum();
                assert!((s.mu_ball(c, r, BallKind::Open) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn point_set_ops() {
        let a = PointSet::new(vec![3, 1, 1, 2]);
        let b = PointSet::new(vec![2, 4]);
        assert_eq!(a.ids(), &[1, 2, 3]);
        assert_eq!(a.intersect(&b).ids(), &[2]);
        assert_eq!(a.union(&b).ids(), &[1, 2, 3, 4]);
        assert_eq!(b.complement(5).ids(), &[0, 1, 3]);
    }

    #[test]
    fn grid_is_connected_weighted_line_too() {
        assert!(gen_grid(5, 2).unwrap().is_connected());
        assert!(crate::gen::gen_weighted_line(11, 2.0, 2.0).unwrap().is_connected());
    }

    #[test]
    fn farthest_point_sample_spreads() {
        let s = gen_grid(5, 1).unwrap();
        let all: Vec<usize> = (0..5).collect();
        let picked = farthest_point_sample(&s, &all, 2, 0);
        assert_eq!(picked.len(), 2);
        // Starting from an endpoint, the farthest point is the other endpoint.
        assert_eq!(s.dist(picked[0], picked[1]), 1.0);
    }
}
