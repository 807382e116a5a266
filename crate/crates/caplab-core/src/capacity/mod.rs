//! The four capacities as optimization problems.
//!
//! Each solver takes the space separately from the [`CapacityProblem`]
//! parameters so one space instance can serve many solves concurrently.
//! Values are tagged ([`CapacityValue`]) so that +infinity is an explicit
//! outcome, never a float artifact. Every result carries its optimizer, the
//! worst remaining constraint violation, and a `certified` flag that is set
//! only for exactly solved instances (trivial cases, exact covers, and
//! duality-gap-certified Riesz solves).

mod content;
mod oracle;
mod pnorm;
mod riesz;

pub use oracle::brute_force_capacity;

use crate::error::{Error, Result};
use crate::field::FieldVector;
use crate::space::{FiniteMetricMeasureSpace, PointSet};

/// Which capacity a problem asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityKind {
    Riesz,
    Hajlasz,
    Variational,
    Content,
}

impl std::fmt::Display for CapacityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CapacityKind::Riesz => "riesz",
            CapacityKind::Hajlasz => "hajlasz",
            CapacityKind::Variational => "variational",
            CapacityKind::Content => "content",
        };
        f.write_str(s)
    }
}

/// Parameters of one capacity computation. The space is passed alongside.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CapacityProblem {
    pub kind: CapacityKind,
    /// Target set (finite sets are closed, so any subset qualifies).
    pub f: PointSet,
    /// Host set for the relative capacities; `None` for riesz and content.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<PointSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

impl CapacityProblem {
    pub fn riesz(f: PointSet, beta: f64, p: f64) -> Self {
        CapacityProblem {
            kind: CapacityKind::Riesz,
            f,
            omega: None,
            beta: Some(beta),
            p: Some(p),
            q: None,
            rho: None,
        }
    }

    pub fn hajlasz(f: PointSet, omega: PointSet, beta: f64, p: f64) -> Self {
        CapacityProblem {
            kind: CapacityKind::Hajlasz,
            f,
            omega: Some(omega),
            beta: Some(beta),
            p: Some(p),
            q: None,
            rho: None,
        }
    }

    pub fn variational(f: PointSet, omega: PointSet, p: f64) -> Self {
        CapacityProblem {
            kind: CapacityKind::Variational,
            f,
            omega: Some(omega),
            beta: None,
            p: Some(p),
            q: None,
            rho: None,
        }
    }

    pub fn content(f: PointSet, q: f64, rho: f64) -> Self {
        CapacityProblem {
            kind: CapacityKind::Content,
            f,
            omega: None,
            beta: None,
            p: None,
            q: Some(q),
            rho: Some(rho),
        }
    }

    /// Checks parameter ranges and set inclusions against a space.
    pub fn validate(&self, space: &FiniteMetricMeasureSpace) -> Result<()> {
        let n = space.len();
        if let Some(&bad) = self.f.ids().iter().find(|&&i| i >= n) {
            return Err(Error::InvalidInput(format!("target point {bad} out of range for {n} points")));
        }
        if let Some(omega) = &self.omega {
            if let Some(&bad) = omega.ids().iter().find(|&&i| i >= n) {
                return Err(Error::InvalidInput(format!("host point {bad} out of range for {n} points")));
            }
        }
        match self.kind {
            CapacityKind::Riesz => {
                let beta = self.require("beta", self.beta)?;
                if beta <= 0.0 {
                    return Err(Error::InvalidParameter(format!("riesz needs beta > 0, got {beta}")));
                }
                self.require_p()?;
                if self.omega.is_some() {
                    return Err(Error::InvalidParameter("riesz capacity takes no host set".into()));
                }
            }
            CapacityKind::Hajlasz => {
                let beta = self.require("beta", self.beta)?;
                if beta <= 0.0 || beta > 1.0 {
                    return Err(Error::InvalidParameter(format!("hajlasz needs 0 < beta <= 1, got {beta}")));
                }
                self.require_p()?;
                self.require_f_in_omega()?;
            }
            CapacityKind::Variational => {
                self.require_p()?;
                self.require_f_in_omega()?;
                if space.edges().is_none() {
                    return Err(Error::NotApplicable("variational capacity needs an edge graph".into()));
                }
            }
            CapacityKind::Content => {
                let q = self.require("q", self.q)?;
                if q < 0.0 {
                    return Err(Error::InvalidParameter(format!("content needs q >= 0, got {q}")));
                }
                let rho = self.require("rho", self.rho)?;
                if rho <= 0.0 {
                    return Err(Error::InvalidParameter(format!("content needs rho > 0, got {rho}")));
                }
                if self.omega.is_some() {
                    return Err(Error::InvalidParameter("content takes no host set".into()));
                }
            }
        }
        Ok(())
    }

    fn require(&self, name: &str, v: Option<f64>) -> Result<f64> {
        match v {
            Some(x) if x.is_finite() => Ok(x),
            Some(x) => Err(Error::InvalidParameter(format!("{name} must be finite, got {x}"))),
            None => Err(Error::InvalidParameter(format!("{} capacity needs {name}", self.kind))),
        }
    }

    fn require_p(&self) -> Result<f64> {
        let p = self.require("p", self.p)?;
        if p <= 1.0 {
            return Err(Error::InvalidParameter(format!("need p > 1, got {p}")));
        }
        Ok(p)
    }

    fn require_f_in_omega(&self) -> Result<&PointSet> {
        let omega = self
            .omega
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter(format!("{} capacity needs a host set", self.kind)))?;
        if let Some(bad) = self.f.iter().find(|&i| !omega.contains(i)) {
            return Err(Error::InvalidInput(format!("target point {bad} is outside the host set")));
        }
        Ok(omega)
    }
}

/// A capacity value with infinity as an explicit tag.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum CapacityValue {
    Finite(f64),
    Infinite,
}

impl CapacityValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            CapacityValue::Finite(v) => *v,
            CapacityValue::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, CapacityValue::Finite(_))
    }
}

/// One ball of a content cover.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoverBall {
    pub center: usize,
    pub radius: f64,
}

/// An open-ball cover of the target set with its content value.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Cover {
    pub balls: Vec<CoverBall>,
    pub value: f64,
}

/// The minimizer a solver found, per capacity kind.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum Optimizer {
    /// Riesz: the density f.
    Field { f: FieldVector },
    /// Hajlasz and variational: the test pair (u, g).
    Pair { u: FieldVector, g: FieldVector },
    /// Content: the chosen cover.
    Cover { cover: Cover },
    /// Degenerate outcomes (empty target, infinite value).
    None,
}

/// Outcome of one capacity computation.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CapacityResult {
    pub value: CapacityValue,
    pub optimizer: Optimizer,
    /// Worst remaining constraint violation of the reported optimizer.
    pub feasibility_residual: f64,
    pub iterations: usize,
    pub method: String,
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Iteration budgets and value tolerances for the iterative solvers.
/// Feasibility of the reported optimizer is exact by construction in either
/// profile; the scan profile only relaxes how close the value must be to
/// optimal, which density scans tolerate.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SolveOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    pub penalty_max: f64,
    pub value_tol: f64,
}

impl SolveOptions {
    /// Full-accuracy profile for single solves and oracle comparisons.
    pub fn tight() -> Self {
        SolveOptions { max_outer: 9, max_inner: 4000, penalty_max: 1e9, value_tol: 1e-9 }
    }

    /// Faster profile for wide scans where ratios, not digits, matter.
    pub fn scan() -> Self {
        SolveOptions { max_outer: 6, max_inner: 1200, penalty_max: 1e7, value_tol: 1e-5 }
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions::tight()
    }
}

/// Solves any capacity problem with the default (tight) options.
pub fn solve_capacity(
    space: &FiniteMetricMeasureSpace,
    problem: &CapacityProblem,
) -> Result<CapacityResult> {
    solve_capacity_with(space, problem, &SolveOptions::default())
}

/// Solves any capacity problem with explicit options.
pub fn solve_capacity_with(
    space: &FiniteMetricMeasureSpace,
    problem: &CapacityProblem,
    options: &SolveOptions,
) -> Result<CapacityResult> {
    problem.validate(space)?;
    match problem.kind {
        CapacityKind::Riesz => riesz::solve(space, problem, options),
        CapacityKind::Hajlasz => pnorm::solve_hajlasz(space, problem, options),
        CapacityKind::Variational => pnorm::solve_variational(space, problem, options),
        CapacityKind::Content => content::solve(space, problem),
    }
}

/// Like [`solve_capacity_with`], but seeds the Hajlasz and variational
/// solvers with a candidate pair (clamped and rescaled into admissibility).
/// The reported value never exceeds what the hint achieves, which makes
/// sweeps over nested targets monotone in practice. Other kinds ignore the
/// hint.
pub fn solve_capacity_with_hint(
    space: &FiniteMetricMeasureSpace,
    problem: &CapacityProblem,
    options: &SolveOptions,
    hint_u: &FieldVector,
    hint_g: &FieldVector,
) -> Result<CapacityResult> {
    problem.validate(space)?;
    match problem.kind {
        CapacityKind::Hajlasz | CapacityKind::Variational => {
            pnorm::solve_pair_capacity(space, problem, options, Some((hint_u, hint_g)))
        }
        _ => solve_capacity_with(space, problem, options),
    }
}

/// Shared trivial outcome for an empty target set.
fn empty_target(method: &str) -> CapacityResult {
    CapacityResult {
        value: CapacityValue::Finite(0.0),
        optimizer: Optimizer::None,
        feasibility_residual: 0.0,
        iterations: 0,
        method: method.to_string(),
        certified: true,
        warnings: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::two_point_space;

    #[test]
    fn validates_f_inside_omega() {
        let s = two_point_space(1.0);
        let p = CapacityProblem::hajlasz(PointSet::new(vec![0]), PointSet::new(vec![1]), 1.0, 2.0);
        assert!(matches!(p.validate(&s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn validates_parameter_ranges() {
        let s = two_point_space(1.0);
        let f = PointSet::new(vec![0]);
        assert!(CapacityProblem::riesz(f.clone(), 0.0, 2.0).validate(&s).is_err());
        assert!(CapacityProblem::riesz(f.clone(), 1.0, 1.0).validate(&s).is_err());
        assert!(CapacityProblem::hajlasz(f.clone(), PointSet::new(vec![0, 1]), 1.5, 2.0)
            .validate(&s)
            .is_err());
        assert!(CapacityProblem::content(f.clone(), -1.0, 1.0).validate(&s).is_err());
        assert!(CapacityProblem::content(f, 1.0, 0.0).validate(&s).is_err());
    }

    #[test]
    fn variational_needs_edges() {
        let s = crate::gen::snowflake(&two_point_space(1.0), 0.5).unwrap();
        let p = CapacityProblem::variational(PointSet::new(vec![0]), PointSet::new(vec![0]), 2.0);
        assert!(matches!(p.validate(&s), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn capacity_value_serde() {
        let v = CapacityValue::Infinite;
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.contains("infinite"));
        let f = CapacityValue::Finite(0.5);
        let s2 = serde_json::to_string(&f).unwrap();
        let back: CapacityValue = serde_json::from_str(&s2).unwrap();
        assert_eq!(back, f);
    }
}
