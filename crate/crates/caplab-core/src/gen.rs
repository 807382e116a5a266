//! Space generators.
//!
//! Grids live on the unit cube with Euclidean distances, uniform weights
//! `mesh^dim`, and axis-neighbor edges. The weighted line carries the weight
//! `h * d(x, {1, -1})^(q-1)`; a point that lands exactly on an endpoint of
//! the interval `[-1, 1]` would get weight zero, which the atomic-measure
//! invariant forbids, so its weight is replaced by `(h/2)^(q-1) * h` (the
//! value half a mesh step away).

use crate::error::{Error, Result};
use crate::space::{Edge, FiniteMetricMeasureSpace};

/// Uniform grid on `[0,1]^dim` with `n` points per axis.
///
/// Mesh is `1/(n-1)`, every weight `mesh^dim`, edges join axis neighbors. The
/// metric is Euclidean, so on 2D grids the edge graph is not geodesic along
/// diagonals; `check_geodesic_graph` reports the discrepancy.
pub fn gen_grid(n: usize, dim: usize) -> Result<FiniteMetricMeasureSpace> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("grid needs n >= 2 points per axis, got {n}")));
    }
    if !(1..=2).contains(&dim) {
        return Err(Error::InvalidParameter(format!("grid dimension must be 1 or 2, got {dim}")));
    }
    let h = 1.0 / (n - 1) as f64;
    let w = h.powi(dim as i32);
    let mut coords = Vec::new();
    let mut edges = Vec::new();
    match dim {
        1 => {
            for i in 0..n {
                coords.push(vec![i as f64 * h]);
                if i + 1 < n {
                    edges.push(Edge { a: i, b: i + 1, len: h });
                }
            }
        }
        _ => {
            for i in 0..n {
                for j in 0..n {
                    coords.push(vec![i as f64 * h, j as f64 * h]);
                    let id = i * n + j;
                    if j + 1 < n {
                        edges.push(Edge { a: id, b: id + 1, len: h });
                    }
                    if i + 1 < n {
                        edges.push(Edge { a: id, b: id + n, len: h });
                    }
                }
            }
        }
    }
    let weights = vec![w; coords.len()];
    FiniteMetricMeasureSpace::from_coords(coords, weights, Some(edges))
}

/// Uniform grid of `n` points on `[-halfwidth, halfwidth]` with weight
/// `h * d(x, {1, -1})^(q-1)` and consecutive edges.
pub fn gen_weighted_line(n: usize, halfwidth: f64, q: f64) -> Result<FiniteMetricMeasureSpace> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("weighted line needs n >= 2 points, got {n}")));
    }
    if !halfwidth.is_finite() || halfwidth <= 0.0 {
        return Err(Error::InvalidParameter(format!("halfwidth must be positive, got {halfwidth}")));
    }
    if !q.is_finite() || q < 1.0 {
        return Err(Error::InvalidParameter(format!("weight exponent q must be at least 1, got {q}")));
    }
    let h = 2.0 * halfwidth / (n - 1) as f64;
    let zero_replacement = (h / 2.0).powf(q - 1.0) * h;
    let mut coords = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut edges = Vec::with_capacity(n - 1);
    for i in 0..n {
        let x = -halfwidth + i as f64 * h;
        coords.push(vec![x]);
        let d = (x - 1.0).abs().min((x + 1.0).abs());
        let w = if d == 0.0 { zero_replacement } else { h * d.powf(q - 1.0) };
        weights.push(w);
        if i + 1 < n {
            edges.push(Edge { a: i, b: i + 1, len: h });
        }
    }
    FiniteMetricMeasureSpace::from_coords(coords, weights, Some(edges))
}

/// Snowflake transform: distances raised to the power `beta`, weights kept,
/// coordinates and edges dropped (edge lengths would no longer be distances).
pub fn snowflake(space: &FiniteMetricMeasureSpace, beta: f64) -> Result<FiniteMetricMeasureSpace> {
    if !beta.is_finite() || beta <= 0.0 || beta > 1.0 {
        return Err(Error::InvalidParameter(format!("snowflake exponent must lie in (0, 1], got {beta}")));
    }
    let n = space.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                dist[i * n + j] = space.dist(i, j).powf(beta);
            }
        }
    }
    // t -> t^beta is subadditive and monotone for beta <= 1, so the result
    // is a metric; construction re-checks anyway.
    FiniteMetricMeasureSpace::from_dist(dist, space.weights().to_vec(), None)
}

/// Two points at distance `d`, unit weights, joined by an edge.
pub fn two_point_space(d: f64) -> FiniteMetricMeasureSpace {
    FiniteMetricMeasureSpace::from_dist(
        vec![0.0, d, d, 0.0],
        vec![1.0, 1.0],
        Some(vec![Edge { a: 0, b: 1, len: d }]),
    )
    .expect("two-point space is valid")
}

/// Three points at coordinates 0, 1, 2 with unit weights and unit edges.
pub fn path3() -> FiniteMetricMeasureSpace {
    FiniteMetricMeasureSpace::from_coords(
        vec![vec![0.0], vec![1.0], vec![2.0]],
        vec![1.0; 3],
        Some(vec![Edge { a: 0, b: 1, len: 1.0 }, Edge { a: 1, b: 2, len: 1.0 }]),
    )
    .expect("path space is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_two_points() {
        let s = gen_grid(2, 1).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dist(0, 1), 1.0);
        assert_eq!(s.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn grid_three_points_half_mesh() {
        let s = gen_grid(3, 1).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.dist(0, 2), 1.0);
        assert_eq!(s.weights(), &[0.5, 0.5, 0.5]);
        assert_eq!(s.mesh(), 0.5);
    }

    #[test]
    fn grid_2d_counts_and_mass() {
        let s = gen_grid(17, 2).unwrap();
        assert_eq!(s.len(), 289);
        let h = 1.0 / 16.0;
        assert!((s.total_mass() - 289.0 * h * h).abs() < 1e-12);
        assert_eq!(s.edges().unwrap().len(), 2 * 16 * 17);
    }

    #[test]
    fn grid_rejects_bad_params() {
        assert!(gen_grid(1, 1).is_err());
        assert!(gen_grid(4, 3).is_err());
    }

    #[test]
    fn weighted_line_example_weights() {
        // n=5 on [-2,2], q=2: mesh 1, weights 1, eps, 1, eps, 1 with eps = 0.5.
        let s = gen_weighted_line(5, 2.0, 2.0).unwrap();
        let w: Vec<f64> = s.weights().to_vec();
        assert_eq!(w, vec![1.0, 0.5, 1.0, 0.5, 1.0]);
    }

    #[test]
    fn weighted_line_q1_uniform() {
        let s = gen_weighted_line(9, 4.0, 1.0).unwrap();
        let h = 1.0;
        assert!(s.weights().iter().all(|&w| (w - h).abs() < 1e-15));
    }

    #[test]
    fn weighted_line_2001_has_no_exact_endpoint_hits() {
        let s = gen_weighted_line(2001, 3.0, 3.0).unwrap();
        assert_eq!(s.len(), 2001);
        // 1.0 is not on the mesh (k = 4000/3), so no replacement fires and
        // every weight is the plain formula value.
        let h: f64 = 6.0 / 2000.0;
        let min_w = s.weights().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min_w > 0.0 && min_w < h * h.powi(2));
    }

    #[test]
    fn snowflake_two_point() {
        let s = two_point_space(4.0);
        let t = snowflake(&s, 0.5).unwrap();
        assert_eq!(t.dist(0, 1), 2.0);
        assert!(t.edges().is_none());
    }

    #[test]
    fn snowflake_identity_at_beta_one() {
        let s = path3();
        let t = snowflake(&s, 1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s.dist(i, j), t.dist(i, j));
            }
        }
    }

    #[test]
    fn snowflake_rejects_bad_beta() {
        let s = path3();
        assert!(snowflake(&s, 0.0).is_err());
        assert!(snowflake(&s, 1.5).is_err());
    }
}
