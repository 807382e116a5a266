//! Capacities, potentials, and density conditions on finite metric measure
//! spaces.
//!
//! The library works on explicit point sets with a distance matrix and a
//! weight per point. On top of that it provides Riesz potentials and maximal
//! functions, four capacity solvers (Riesz, Hajlasz, variational, Hausdorff
//! content), diagnostic checks for the inequalities tying them together, and
//! capacity-density scans over realized balls.
//!
//! Conventions used throughout:
//!
//! * balls are open unless stated otherwise, `B(x, r) = {y : d(x, y) < r}`;
//! * ball measures, memberships, and radii sweeps all go through
//!   [`FiniteMetricMeasureSpace::mu_ball`] and friends, so every module sees
//!   the same convention;
//! * errors that reject an input or report a failed precondition are
//!   distinguished from internal failures by [`Error::is_refusal`].

pub mod capacity;
pub mod chain;
pub mod density;
pub mod error;
pub mod field;
pub mod gen;
pub mod io;
pub mod potentials;
pub mod space;
pub mod stats;

pub use capacity::{
    brute_force_capacity, solve_capacity, solve_capacity_with, solve_capacity_with_hint,
    CapacityKind, CapacityProblem, CapacityResult, CapacityValue, Cover, CoverBall, Optimizer,
    SolveOptions,
};
pub use density::{
    comparability_scan, content_restriction_check, density_scan, self_improvement_probe,
    ComparabilityPair, ComparabilityReport, ComparabilitySample, ContentRestrictionReport,
    DensityReport, DensitySample, DensityScanConfig, ProbeRow, ProbeTable, MAX_SCAN_CENTERS,
};
pub use error::{Error, Result};
pub use field::FieldVector;
pub use io::{ProblemFile, Record, ResultFile, SpaceFile};
pub use space::{Ball, BallKind, Edge, FiniteMetricMeasureSpace, PointSet};
