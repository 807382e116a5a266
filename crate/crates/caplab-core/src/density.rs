//! Capacity-density scans, comparability sweeps, and the self-improvement
//! probe.
//!
//! A density scan measures, over a deterministic subsample of centers in a
//! set E and a list of radii, how much of each ball's natural capacity the
//! set E picks up: numerator = capacity (or content) of `E` intersected with
//! the closed ball, denominator = the normalized ball form
//! `r^(-beta p) mu(B(x,r))` (or `r^(-q) mu(B(x,r))` for content). The
//! smallest sampled ratio estimates the density constant c_0.
//!
//! The classical statements restrict radii to `[3 mesh, diam(E)/8]`. The
//! scan computes every positive radius it is given and instead marks each
//! sample as inside or outside that window, because the interesting
//! diagnostics (single-atom decay, cross-scale trends) live on both sides of
//! it; the report's warnings say which radii fell outside.

use rayon::prelude::*;

use crate::capacity::{
    solve_capacity_with, CapacityKind, CapacityProblem, CapacityResult, SolveOptions,
};
use crate::error::{Error, Result};
use crate::space::{farthest_point_sample, BallKind, FiniteMetricMeasureSpace, PointSet};
use crate::stats::estimate_reverse_doubling;

/// Base density estimate below which the self-improvement probe refuses.
const PROBE_C0_FLOOR: f64 = 1e-3;
/// Most centers a scan will visit.
pub const MAX_SCAN_CENTERS: usize = 20;

/// What to scan and at which exponents.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DensityScanConfig {
    pub kind: CapacityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub radii: Vec<f64>,
    /// Picks the farthest-point start center, making subsampling
    /// reproducible.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_centers")]
    pub max_centers: usize,
    /// Re-solve the ball capacity for the denominator instead of using the
    /// normalized form; cross-checking only.
    #[serde(default)]
    pub raw_denominator: bool,
    #[serde(default = "SolveOptions::scan")]
    pub options: SolveOptions,
}

fn default_max_centers() -> usize {
    MAX_SCAN_CENTERS
}

impl DensityScanConfig {
    fn new(kind: CapacityKind, radii: Vec<f64>) -> Self {
        DensityScanConfig {
            kind,
            beta: None,
            p: None,
            q: None,
            radii,
            seed: 0,
            max_centers: MAX_SCAN_CENTERS,
            raw_denominator: false,
            options: SolveOptions::scan(),
        }
    }

    pub fn riesz(beta: f64, p: f64, radii: Vec<f64>) -> Self {
        DensityScanConfig { beta: Some(beta), p: Some(p), ..Self::new(CapacityKind::Riesz, radii) }
    }

    pub fn hajlasz(beta: f64, p: f64, radii: Vec<f64>) -> Self {
        DensityScanConfig { beta: Some(beta), p: Some(p), ..Self::new(CapacityKind::Hajlasz, radii) }
    }

    pub fn variational(p: f64, radii: Vec<f64>) -> Self {
        DensityScanConfig { p: Some(p), ..Self::new(CapacityKind::Variational, radii) }
    }

    pub fn content(q: f64, radii: Vec<f64>) -> Self {
        DensityScanConfig { q: Some(q), ..Self::new(CapacityKind::Content, radii) }
    }

    /// Exponent of `r` in the normalized denominator.
    fn denominator_exponent(&self) -> f64 {
        match self.kind {
            CapacityKind::Riesz | CapacityKind::Hajlasz => {
                self.beta.unwrap_or(1.0) * self.p.unwrap_or(1.0)
            }
            CapacityKind::Variational => self.p.unwrap_or(1.0),
            CapacityKind::Content => self.q.unwrap_or(0.0),
        }
    }

    fn validate(&self, space: &FiniteMetricMeasureSpace) -> Result<()> {
        if self.radii.is_empty() {
            return Err(Error::InvalidParameter("no radii to scan".into()));
        }
        if let Some(&bad) = self.radii.iter().find(|r| !r.is_finite() || **r <= 0.0) {
            return Err(Error::InvalidParameter(format!("scan radius must be positive, got {bad}")));
        }
        if self.max_centers == 0 {
            return Err(Error::InvalidParameter("max_centers must be positive".into()));
        }
        // reuse the capacity-side parameter checks on a dummy target
        self.problem_for(PointSet::new(vec![0]), None, self.radii[0]).validate(space)
    }

    /// The capacity problem of one scan cell.
    fn problem_for(&self, f: PointSet, omega: Option<PointSet>, r: f64) -> CapacityProblem {
        let relative = matches!(self.kind, CapacityKind::Hajlasz | CapacityKind::Variational);
        let content = matches!(self.kind, CapacityKind::Content);
        CapacityProblem {
            kind: self.kind,
            omega: if relative { Some(omega.unwrap_or_else(|| f.clone())) } else { None },
            f,
            beta: match self.kind {
                CapacityKind::Riesz | CapacityKind::Hajlasz => self.beta,
                _ => None,
            },
            p: if content { None } else { self.p },
            q: if content { self.q } else { None },
            rho: if content { Some(r) } else { None },
        }
    }
}

/// One (center, radius) cell of a density scan.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DensitySample {
    pub x: usize,
    pub r: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
    /// Whether `r` lies in the classical window `[3 mesh, diam(E)/8]`.
    pub within_standard_range: bool,
}

/// Result of [`density_scan`].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DensityReport {
    pub kind: CapacityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub samples: Vec<DensitySample>,
    /// Smallest sampled ratio.
    pub c0_estimate: f64,
    /// Radii used, ascending.
    pub scales: Vec<f64>,
    /// The classical radius window for this E.
    pub standard_range: (f64, f64),
    pub centers: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn check_set(space: &FiniteMetricMeasureSpace, e: &PointSet, name: &str) -> Result<()> {
    if e.is_empty() {
        return Err(Error::InvalidInput(format!("{name} must be nonempty")));
    }
    if let Some(&bad) = e.ids().iter().find(|&&i| i >= space.len()) {
        return Err(Error::InvalidInput(format!(
            "{name} point {bad} out of range for {} points",
            space.len()
        )));
    }
    Ok(())
}

fn diam_of_set(space: &FiniteMetricMeasureSpace, e: &PointSet) -> f64 {
    let ids = e.ids();
    let mut d = 0.0f64;
    for (k, &i) in ids.iter().enumerate() {
        for &j in &ids[k + 1..] {
            d = d.max(space.dist(i, j));
        }
    }
    d
}

/// Deterministic well-spread centers: all of E when small, farthest-point
/// subsample keyed by the seed otherwise.
fn scan_centers(
    space: &FiniteMetricMeasureSpace,
    e: &PointSet,
    max_centers: usize,
    seed: u64,
) -> Vec<usize> {
    let ids: Vec<usize> = e.iter().collect();
    if ids.len() <= max_centers {
        return ids;
    }
    let start = (seed % ids.len() as u64) as usize;
    let mut chosen = farthest_point_sample(space, &ids, max_centers, start);
    chosen.sort_unstable();
    chosen
}

/// Capacity (or content) of `E` inside the ball at `(x, r)`, as the density
/// numerator: the target is `E` intersected with the closed ball, hosted in
/// the open double ball for the relative kinds.
fn cell_numerator(
    space: &FiniteMetricMeasureSpace,
    config: &DensityScanConfig,
    e: &PointSet,
    x: usize,
    r: f64,
) -> Result<CapacityResult> {
    let ball = PointSet::new(space.ball_member_ids(x, r, BallKind::Closed));
    let f = e.intersect(&ball);
    let omega = match config.kind {
        CapacityKind::Hajlasz | CapacityKind::Variational => {
            let double = PointSet::new(space.ball_member_ids(x, 2.0 * r, BallKind::Open));
            // the host must contain the target even if E leaks past 2r
            Some(double.union(&f))
        }
        _ => None,
    };
    solve_capacity_with(space, &config.problem_for(f, omega, r), &config.options)
}

/// Density scan of `E`: ratios of set capacity to ball capacity across
/// centers and radii, with `c0_estimate` the smallest ratio seen.
pub fn density_scan(
    space: &FiniteMetricMeasureSpace,
    e: &PointSet,
    config: &DensityScanConfig,
) -> Result<DensityReport> {
    check_set(space, e, "E")?;
    config.validate(space)?;
    if space.len() < 2 {
        return Err(Error::NotApplicable("density scan needs at least two points".into()));
    }

    let mut scales = config.radii.clone();
    scales.sort_by(|a, b| a.partial_cmp(b).unwrap());
    scales.dedup();
    let diam_e = diam_of_set(space, e);
    let standard_range = (3.0 * space.mesh(), diam_e / 8.0);
    let centers = scan_centers(space, e, config.max_centers, config.seed);

    let mut warnings = Vec::new();
    let outside: Vec<f64> = scales
        .iter()
        .copied()
        .filter(|&r| r < standard_range.0 || r > standard_range.1)
        .collect();
    if !outside.is_empty() {
        warnings.push(format!(
            "radii {outside:?} fall outside the classical window [{:.6}, {:.6}]; their samples are flagged",
            standard_range.0, standard_range.1
        ));
    }

    let cells: Vec<(usize, f64)> = centers
        .iter()
        .flat_map(|&x| scales.iter().map(move |&r| (x, r)))
        .collect();
    let exponent = config.denominator_exponent();
    let solved: Vec<Result<(DensitySample, Vec<String>)>> = cells
        .par_iter()
        .map(|&(x, r)| {
            let res = cell_numerator(space, config, e, x, r)?;
            let numerator = res.value.as_f64();
            if !numerator.is_finite() {
                return Err(Error::Internal(format!(
                    "infinite numerator at center {x}, radius {r}"
                )));
            }
            let normalized = r.powf(-exponent) * space.mu_ball(x, r, BallKind::Open);
            let mut notes = res.warnings;
            let denominator = if config.raw_denominator {
                let ball = PointSet::new(space.ball_member_ids(x, r, BallKind::Closed));
                let raw = cell_numerator(space, config, &ball, x, r)?;
                let v = raw.value.as_f64();
                if v > 0.0 && v.is_finite() {
                    v
                } else {
                    notes.push(format!(
                        "raw ball capacity degenerate at center {x}, radius {r}; using normalized form"
                    ));
                    normalized
                }
            } else {
                normalized
            };
            let sample = DensitySample {
                x,
                r,
                numerator,
                denominator,
                ratio: numerator / denominator,
                within_standard_range: r >= standard_range.0 && r <= standard_range.1,
            };
            Ok((sample, notes))
        })
        .collect();

    let mut samples = Vec::with_capacity(solved.len());
    for cell in solved {
        let (sample, notes) = cell?;
        for n in notes {
            if !warnings.contains(&n) {
                warnings.push(n);
            }
        }
        samples.push(sample);
    }
    let c0_estimate = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    Ok(DensityReport {
        kind: config.kind,
        beta: config.beta,
        p: config.p,
        q: config.q,
        samples,
        c0_estimate,
        scales,
        standard_range,
        centers,
        warnings,
    })
}

/// Which two quantities a comparability sweep divides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ComparabilityPair {
    #[serde(rename = "riesz-hajlasz")]
    RieszHajlasz,
    #[serde(rename = "variational-hajlasz")]
    VariationalHajlasz,
    #[serde(rename = "content-restricted")]
    ContentRestricted,
}

/// One sweep cell: the two compared values and their ratio.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ComparabilitySample {
    pub x: usize,
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Result of [`comparability_scan`].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ComparabilityReport {
    pub pair: ComparabilityPair,
    pub samples: Vec<ComparabilitySample>,
    /// (min, max) over sampled ratios.
    pub band: (f64, f64),
    /// max/min of the band.
    pub band_spread: f64,
    /// Whether the sweep's hypotheses support bounds in both directions.
    pub two_sided: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_fit: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Sweeps the ratio of two capacities of `E` in balls across centers and
/// radii. The riesz-hajlasz pair checks the reverse-doubling exponent
/// against `beta * p` and downgrades to a one-sided claim with a warning
/// when the fit does not clear it; for the content pair the codimension is
/// taken as `beta * p`.
pub fn comparability_scan(
    space: &FiniteMetricMeasureSpace,
    e: &PointSet,
    pair: ComparabilityPair,
    beta: f64,
    p: f64,
    radii: &[f64],
) -> Result<ComparabilityReport> {
    check_set(space, e, "E")?;
    if radii.is_empty() {
        return Err(Error::InvalidParameter("no radii to scan".into()));
    }
    if let Some(&bad) = radii.iter().find(|r| !r.is_finite() || **r <= 0.0) {
        return Err(Error::InvalidParameter(format!("scan radius must be positive, got {bad}")));
    }
    if space.len() < 2 {
        return Err(Error::NotApplicable("comparability scan needs at least two points".into()));
    }
    if matches!(pair, ComparabilityPair::VariationalHajlasz) && space.edges().is_none() {
        return Err(Error::NotApplicable("variational comparison needs an edge graph".into()));
    }

    let mut warnings = Vec::new();
    let mut two_sided = true;
    let sigma_fit = match estimate_reverse_doubling(space) {
        Ok(fit) => Some(fit.sigma),
        Err(err) if err.is_refusal() => {
            warnings.push(format!("reverse-doubling fit unavailable ({err}); one-sided claim only"));
            two_sided = false;
            None
        }
        Err(err) => return Err(err),
    };
    if matches!(pair, ComparabilityPair::RieszHajlasz) {
        if let Some(sigma) = sigma_fit {
            if sigma <= beta * p {
                warnings.push(format!(
                    "reverse-doubling exponent {sigma:.3} does not exceed beta*p = {:.3}; \
                     the upper comparability bound is not certified, reporting one-sided",
                    beta * p
                ));
                two_sided = false;
            }
        }
    }

    let options = SolveOptions::scan();
    let mut scales = radii.to_vec();
    scales.sort_by(|a, b| a.partial_cmp(b).unwrap());
    scales.dedup();
    let centers = scan_centers(space, e, MAX_SCAN_CENTERS, 0);
    let cells: Vec<(usize, f64)> = centers
        .iter()
        .flat_map(|&x| scales.iter().map(move |&r| (x, r)))
        .collect();

    let solved: Vec<Result<(ComparabilitySample, Vec<String>)>> = cells
        .par_iter()
        .map(|&(x, r)| {
            let ball = PointSet::new(space.ball_member_ids(x, r, BallKind::Closed));
            let f = e.intersect(&ball);
            let double = PointSet::new(space.ball_member_ids(x, 2.0 * r, BallKind::Open)).union(&f);
            let mut notes = Vec::new();
            let mut solve = |problem: &CapacityProblem| -> Result<f64> {
                let res = solve_capacity_with(space, problem, &options)?;
                notes.extend(res.warnings);
                Ok(res.value.as_f64())
            };
            let (lhs, rhs) = match pair {
                ComparabilityPair::RieszHajlasz => {
                    let h = solve(&CapacityProblem::hajlasz(f.clone(), double, beta, p))?;
                    let z = solve(&CapacityProblem::riesz(f, beta, p))?;
                    (h, z)
                }
                ComparabilityPair::VariationalHajlasz => {
                    let v = solve(&CapacityProblem::variational(f.clone(), double.clone(), p))?;
                    let h = solve(&CapacityProblem::hajlasz(f, double, beta, p))?;
                    (v, h)
                }
                ComparabilityPair::ContentRestricted => {
                    let q = beta * p;
                    let restricted = solve(&CapacityProblem::content(f.clone(), q, r))?;
                    let unrestricted =
                        solve(&CapacityProblem::content(f, q, 2.0 * space.diam()))?;
                    (restricted, unrestricted)
                }
            };
            let ratio = if rhs > 0.0 { lhs / rhs } else { f64::NAN };
            Ok((ComparabilitySample { x, r, lhs, rhs, ratio }, notes))
        })
        .collect();

    let mut samples = Vec::with_capacity(solved.len());
    for cell in solved {
        let (sample, notes) = cell?;
        for n in notes {
            if !warnings.contains(&n) {
                warnings.push(n);
            }
        }
        samples.push(sample);
    }

    // degenerate cells (host swallowing the space, zero denominators) stay
    // in the sample list but are excluded from the band
    let banded: Vec<f64> =
        samples.iter().map(|s| s.ratio).filter(|r| r.is_finite() && *r > 0.0).collect();
    if banded.is_empty() {
        return Err(Error::NotApplicable(
            "every sampled cell was degenerate; no band to report".into(),
        ));
    }
    if banded.len() < samples.len() {
        warnings.push(format!(
            "{} of {} cells were degenerate and left out of the band",
            samples.len() - banded.len(),
            samples.len()
        ));
    }
    let band = (
        banded.iter().copied().fold(f64::INFINITY, f64::min),
        banded.iter().copied().fold(0.0f64, f64::max),
    );
    Ok(ComparabilityReport {
        pair,
        samples,
        band,
        band_spread: band.1 / band.0,
        two_sided,
        sigma_fit,
        warnings,
    })
}

/// Result of [`content_restriction_check`].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ContentRestrictionReport {
    /// Content with cover radii capped at `r`.
    pub restricted: f64,
    /// Content with the cap relaxed to twice the space diameter.
    pub unrestricted: f64,
    /// `restricted / unrestricted`, reported when the reverse-doubling fit
    /// reaches the codimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_fit: Option<f64>,
}

/// Compares the content of `F` under the `r` radius cap against the
/// unrestricted cap. The relaxed cap can only do better, which is also
/// verified directly.
pub fn content_restriction_check(
    space: &FiniteMetricMeasureSpace,
    f: &PointSet,
    q: f64,
    r: f64,
) -> Result<ContentRestrictionReport> {
    check_set(space, f, "F")?;
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("need q > 0, got {q}")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("need r > 0, got {r}")));
    }
    let fits_some_ball = (0..space.len())
        .any(|x| f.iter().all(|i| space.dist(x, i) <= r));
    if !fits_some_ball {
        return Err(Error::Precondition(format!(
            "F does not fit inside any closed ball of radius {r}"
        )));
    }
    let options = SolveOptions::tight();
    let restricted =
        solve_capacity_with(space, &CapacityProblem::content(f.clone(), q, r), &options)?
            .value
            .as_f64();
    let cap = (2.0 * space.diam()).max(r);
    let unrestricted =
        solve_capacity_with(space, &CapacityProblem::content(f.clone(), q, cap), &options)?
            .value
            .as_f64();
    if unrestricted > restricted * (1.0 + 1e-9) {
        return Err(Error::Internal(format!(
            "relaxing the radius cap raised the content: {unrestricted} > {restricted}"
        )));
    }
    let sigma_fit = estimate_reverse_doubling(space).ok().map(|fit| fit.sigma);
    let ratio = match sigma_fit {
        Some(sigma) if sigma >= q && unrestricted > 0.0 => Some(restricted / unrestricted),
        _ => None,
    };
    Ok(ContentRestrictionReport { restricted, unrestricted, ratio, sigma_fit })
}

/// One row of the self-improvement table.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ProbeRow {
    pub gamma: f64,
    pub s: f64,
    pub c0_estimate: f64,
}

/// Result of [`self_improvement_probe`].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ProbeTable {
    /// Density estimate at the base exponents.
    pub base_c0: f64,
    pub sigma_fit: f64,
    pub rows: Vec<ProbeRow>,
    /// Excluded (gamma, s) pairs with the reason.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<(f64, f64, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Reruns the Riesz density scan of `E` across a grid of exponent pairs to
/// probe whether a positive density estimate survives nearby exponents.
/// Empirical evidence only, not a proof.
pub fn self_improvement_probe(
    space: &FiniteMetricMeasureSpace,
    e: &PointSet,
    beta: f64,
    p: f64,
    grid: &[(f64, f64)],
    radii: &[f64],
) -> Result<ProbeTable> {
    let base = density_scan(space, e, &DensityScanConfig::riesz(beta, p, radii.to_vec()))?;
    if !(base.c0_estimate > PROBE_C0_FLOOR) {
        return Err(Error::Precondition(format!(
            "base density estimate {:.3e} is not above {PROBE_C0_FLOOR:.0e}; nothing to probe",
            base.c0_estimate
        )));
    }
    let sigma = estimate_reverse_doubling(space)?.sigma;
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for &(gamma, s) in grid {
        if !(gamma > 0.0 && gamma <= 1.0) {
            excluded.push((gamma, s, "needs 0 < gamma <= 1".to_string()));
            continue;
        }
        if !(s > 1.0) {
            excluded.push((gamma, s, "needs s > 1".to_string()));
            continue;
        }
        if sigma <= gamma * s {
            excluded.push((gamma, s, format!("sigma fit {sigma:.3} <= gamma*s = {:.3}", gamma * s)));
            continue;
        }
        let scan = density_scan(space, e, &DensityScanConfig::riesz(gamma, s, radii.to_vec()))?;
        rows.push(ProbeRow { gamma, s, c0_estimate: scan.c0_estimate });
    }
    let diagnostic = if rows.is_empty() {
        Some("no (gamma, s) pair admissible under the sigma fit".to_string())
    } else {
        None
    };
    Ok(ProbeTable { base_c0: base.c0_estimate, sigma_fit: sigma, rows, excluded, diagnostic })
}
