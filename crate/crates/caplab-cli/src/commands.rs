//! The per-subcommand implementations except verify and reproduce.

use std::path::{Path, PathBuf};

use anyhow::Context;
use caplab_core::capacity::{
    solve_capacity_with, CapacityKind, CapacityProblem, CapacityResult, Optimizer, SolveOptions,
};
use caplab_core::density::{
    comparability_scan, density_scan, self_improvement_probe, ComparabilityPair, DensityReport,
    DensityScanConfig,
};
use caplab_core::io::{self, ProblemFile, Record, ResultFile};
use caplab_core::potentials::{maximal_function, riesz_potential};
use caplab_core::{brute_force_capacity, Error, FieldVector, PointSet};
use clap::Args;

use crate::bundle::{Bundle, Series};
use crate::setspec;

pub fn parse_kind(s: &str) -> Result<CapacityKind, Error> {
    match s {
        "riesz" => Ok(CapacityKind::Riesz),
        "hajlasz" => Ok(CapacityKind::Hajlasz),
        "variational" => Ok(CapacityKind::Variational),
        "content" => Ok(CapacityKind::Content),
        other => Err(Error::InvalidParameter(format!(
            "unknown capacity kind {other:?}; expected riesz, hajlasz, variational, or content"
        ))),
    }
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number {tok:?} in list")))
        })
        .collect()
}

fn parse_profile(name: &str) -> Result<SolveOptions, Error> {
    match name {
        "tight" => Ok(SolveOptions::tight()),
        "scan" => Ok(SolveOptions::scan()),
        other => Err(Error::InvalidParameter(format!(
            "unknown solver profile {other:?}; expected tight or scan"
        ))),
    }
}

/// Shared provenance header: command name, space path + digest, seed.
fn base_record(name: &str, command: &str, space: &Path, digest: &str, seed: u64) -> Record {
    let mut rec = Record::new(name);
    rec.set("command", command)
        .set("space.path", space.display())
        .set("space.digest", digest)
        .set("seed", seed);
    rec
}

#[derive(Args)]
pub struct GenArgs {
    /// Unit-cube grid: points per side and dimension.
    #[arg(long, num_args = 2, value_names = ["N", "DIM"])]
    pub grid: Option<Vec<usize>>,
    /// Weighted line: point count, halfwidth, weight exponent.
    #[arg(long, num_args = 3, value_names = ["N", "HALFWIDTH", "Q"], allow_hyphen_values = true)]
    pub weighted_line: Option<Vec<f64>>,
    /// Two points at the given distance.
    #[arg(long, value_name = "D")]
    pub two_point: Option<f64>,
    /// Three collinear points at unit spacing.
    #[arg(long)]
    pub path3: bool,
    /// Snowflake the space given by --space: distances raised to BETA.
    #[arg(long, value_name = "BETA")]
    pub snowflake: Option<f64>,
    /// Input space for --snowflake.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// Output directory; the space lands in <out>/space.json.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_gen(args: &GenArgs, seed: u64) -> anyhow::Result<()> {
    let chosen = [
        args.grid.is_some(),
        args.weighted_line.is_some(),
        args.two_point.is_some(),
        args.path3,
        args.snowflake.is_some(),
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    if chosen != 1 {
        return Err(Error::InvalidParameter(
            "pick exactly one generator: --grid, --weighted-line, --two-point, --path3, or --snowflake"
                .into(),
        )
        .into());
    }
    let (space, label) = if let Some(g) = &args.grid {
        (caplab_core::gen::gen_grid(g[0], g[1])?, format!("grid {} {}", g[0], g[1]))
    } else if let Some(w) = &args.weighted_line {
        let n = w[0] as usize;
        if w[0].fract() != 0.0 || w[0] < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "weighted line point count must be a nonnegative integer, got {}",
                w[0]
            ))
            .into());
        }
        (
            caplab_core::gen::gen_weighted_line(n, w[1], w[2])?,
            format!("weighted-line {n} {} {}", w[1], w[2]),
        )
    } else if let Some(d) = args.two_point {
        (caplab_core::gen::two_point_space(d), format!("two-point {d}"))
    } else if args.path3 {
        (caplab_core::gen::path3(), "path3".to_string())
    } else {
        let beta = args.snowflake.unwrap();
        let input = args
            .space
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("--snowflake needs --space".into()))?;
        let (base, _) = io::read_space(input)?;
        (caplab_core::gen::snowflake(&base, beta)?, format!("snowflake {beta}"))
    };

    std::fs::create_dir_all(&args.out)?;
    let space_path = args.out.join("space.json");
    let digest = io::write_space(&space_path, &space)?;

    let mut rec = base_record("gen-report", "gen", &space_path, &digest, seed);
    rec.set("generator", &label)
        .set("points", space.len())
        .set("diam", space.diam())
        .set("mesh", space.mesh())
        .set("total_mass", space.total_mass())
        .set("edges", space.edges().map_or(0, <[caplab_core::Edge]>::len))
        .set("connected", space.is_connected());

    let mut bundle = Bundle::new(rec, &["id", "weight"]);
    for i in 0..space.len() {
        bundle.csv_rows.push(vec![i.to_string(), space.weights()[i].to_string()]);
    }
    bundle.series.push(Series {
        label: "weight".into(),
        x_label: "id".into(),
        y_label: "weight".into(),
        points: (0..space.len()).map(|i| (i as f64, space.weights()[i])).collect(),
    });
    bundle.write(&args.out)?;
    println!("wrote {} ({} points, digest {})", space_path.display(), space.len(), &digest[..12]);
    Ok(())
}

#[derive(Args)]
pub struct CapArgs {
    /// Problem file; flags below override its fields.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Space file (overrides the problem file's space path).
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// riesz | hajlasz | variational | content
    #[arg(long)]
    pub kind: Option<String>,
    /// Target set F (index list or predicate).
    #[arg(long)]
    pub f: Option<String>,
    /// Host set Omega (index list or predicate).
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Solver profile: tight (default) or scan.
    #[arg(long, default_value = "tight")]
    pub profile: String,
    /// Use the exhaustive small-instance reference solver instead.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_cap(args: &CapArgs, seed: u64) -> anyhow::Result<()> {
    let file: Option<ProblemFile> = match &args.problem {
        Some(path) => Some(io::read_json(path).with_context(|| format!("reading {}", path.display()))?),
        None => None,
    };
    let space_path: PathBuf = match (&args.space, &file) {
        (Some(p), _) => p.clone(),
        (None, Some(f)) => PathBuf::from(&f.space),
        (None, None) => {
            return Err(Error::InvalidParameter("cap needs --problem or --space".into()).into())
        }
    };
    let (space, digest) = io::read_space(&space_path)?;

    let kind = match (&args.kind, &file) {
        (Some(k), _) => parse_kind(k)?,
        (None, Some(f)) => f.kind,
        (None, None) => return Err(Error::InvalidParameter("cap needs --kind".into()).into()),
    };
    let f_set = match (&args.f, &file) {
        (Some(spec), _) => setspec::parse_set(&space, spec)?,
        (None, Some(f)) => PointSet::new(f.f.clone()),
        (None, None) => return Err(Error::InvalidParameter("cap needs --f".into()).into()),
    };
    let omega = match (&args.omega, &file) {
        (Some(spec), _) => Some(setspec::parse_set(&space, spec)?),
        (None, Some(f)) => f.omega.clone().map(PointSet::new),
        (None, None) => None,
    };
    let from_file = |flag: Option<f64>, field: fn(&ProblemFile) -> Option<f64>| {
        flag.or(file.as_ref().and_then(field))
    };
    let problem = CapacityProblem {
        kind,
        f: f_set,
        omega,
        beta: from_file(args.beta, |f| f.beta),
        p: from_file(args.p, |f| f.p),
        q: from_file(args.q, |f| f.q),
        rho: from_file(args.rho, |f| f.rho),
    };

    let options = parse_profile(&args.profile)?;
    let res = if args.oracle {
        brute_force_capacity(&space, &problem)?
    } else {
        solve_capacity_with(&space, &problem, &options)?
    };

    std::fs::create_dir_all(&args.out)?;
    io::write_optimizer(&args.out.join("optimizer.json"), &res.optimizer)?;
    io::write_json(
        &args.out.join("result.json"),
        &ResultFile::from_result(&res, Some("optimizer.json".into())),
    )?;

    let mut rec = base_record("cap-report", "cap", &space_path, &digest, seed);
    rec.set("params.kind", problem.kind)
        .set("params.F", join_ids(problem.f.ids()))
        .set("params.profile", &args.profile)
        .set("params.oracle", args.oracle);
    if let Some(o) = &problem.omega {
        rec.set("params.Omega", join_ids(o.ids()));
    }
    for (name, v) in [
        ("params.beta", problem.beta),
        ("params.p", problem.p),
        ("params.q", problem.q),
        ("params.rho", problem.rho),
    ] {
        if let Some(v) = v {
            rec.set(name, v);
        }
    }
    rec.set("value", res.value.as_f64())
        .set("feasibility_residual", res.feasibility_residual)
        .set("iterations", res.iterations)
        .set("method", &res.method)
        .set("certified", res.certified)
        .set("optimizer", "optimizer.json");
    push_warnings(&mut rec, &res.warnings);

    let mut bundle =
        Bundle::new(rec, &["value", "feasibility_residual", "iterations", "method", "certified"]);
    bundle.csv_rows.push(vec![
        res.value.as_f64().to_string(),
        res.feasibility_residual.to_string(),
        res.iterations.to_string(),
        res.method.clone(),
        res.certified.to_string(),
    ]);
    bundle.series.extend(optimizer_series(&res));
    bundle.write(&args.out)?;
    println!("value = {} ({}, certified = {})", res.value.as_f64(), res.method, res.certified);
    Ok(())
}

fn join_ids(ids: &[usize]) -> String {
    ids.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn push_warnings(rec: &mut Record, warnings: &[String]) {
    if warnings.is_empty() {
        return;
    }
    let mut block = Record::new("warnings");
    for w in warnings {
        block.set("warning", w);
    }
    rec.push_block(block);
}

fn field_series(label: &str, f: &FieldVector) -> Series {
    Series {
        label: label.into(),
        x_label: "id".into(),
        y_label: label.into(),
        points: f.values.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect(),
    }
}

fn optimizer_series(res: &CapacityResult) -> Vec<Series> {
    match &res.optimizer {
        Optimizer::Field { f } => vec![field_series("f", f)],
        Optimizer::Pair { u, g } => vec![field_series("u", u), field_series("g", g)],
        Optimizer::Cover { cover } => vec![Series {
            label: "cover".into(),
            x_label: "center".into(),
            y_label: "radius".into(),
            points: cover.balls.iter().map(|b| (b.center as f64, b.radius)).collect(),
        }],
        Optimizer::None => Vec::new(),
    }
}

#[derive(Args)]
pub struct PotentialArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// Input field file; or use --indicator.
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Indicator of a point set as input field.
    #[arg(long)]
    pub indicator: Option<String>,
    /// riesz (default) or maximal
    #[arg(long, default_value = "riesz")]
    pub operator: String,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub exclude_radius: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_potential(args: &PotentialArgs, seed: u64) -> anyhow::Result<()> {
    let (space, digest) = io::read_space(&args.space)?;
    let input: FieldVector = match (&args.field, &args.indicator) {
        (Some(path), None) => io::read_json(path)?,
        (None, Some(spec)) => {
            FieldVector::indicator(&setspec::parse_set(&space, spec)?, space.len())
        }
        _ => {
            return Err(Error::InvalidParameter(
                "potential needs exactly one of --field and --indicator".into(),
            )
            .into())
        }
    };
    let output = match args.operator.as_str() {
        "riesz" => {
            let beta = args.beta.ok_or_else(|| {
                Error::InvalidParameter("riesz potential needs --beta".into())
            })?;
            riesz_potential(&space, &input, beta, args.exclude_radius)?
        }
        "maximal" => maximal_function(&space, &input)?,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown operator {other:?}; expected riesz or maximal"
            ))
            .into())
        }
    };

    std::fs::create_dir_all(&args.out)?;
    io::write_json(&args.out.join("field.json"), &output)?;

    let mut rec = base_record("potential-report", "potential", &args.space, &digest, seed);
    rec.set("params.operator", &args.operator);
    if let Some(beta) = args.beta {
        rec.set("params.beta", beta);
    }
    rec.set("params.exclude_radius", args.exclude_radius)
        .set("output", "field.json")
        .set("sup", output.sup_abs())
        .set("min", output.min());

    let mut bundle = Bundle::new(rec, &["id", "input", "output"]);
    for i in 0..space.len() {
        bundle.csv_rows.push(vec![
            i.to_string(),
            input.values[i].to_string(),
            output.values[i].to_string(),
        ]);
    }
    bundle.series.push(field_series("output", &output));
    bundle.write(&args.out)?;
    println!("sup = {}, wrote {}", output.sup_abs(), args.out.join("field.json").display());
    Ok(())
}

/// On-disk scan config, wrapping the library config with a space path and a
/// set spec.
#[derive(serde::Serialize, serde::Deserialize)]
pub struct ScanConfigFile {
    pub space: String,
    #[serde(rename = "E")]
    pub e: serde_json::Value,
    pub kind: String,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
    pub radii: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub max_centers: Option<usize>,
    #[serde(default)]
    pub raw_denominator: Option<bool>,
    #[serde(default)]
    pub profile: Option<String>,
}

#[derive(Args)]
pub struct DensityArgs {
    /// Scan config file.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_density(args: &DensityArgs, seed_override: Option<u64>) -> anyhow::Result<()> {
    let file: ScanConfigFile = io::read_json(&args.config)?;
    let space_path = PathBuf::from(&file.space);
    let (space, digest) = io::read_space(&space_path)?;
    let e = setspec::parse_set_value(&space, &file.e)?;

    let kind = parse_kind(&file.kind)?;
    let seed = seed_override.or(file.seed).unwrap_or(0);
    let mut config = match kind {
        CapacityKind::Riesz => DensityScanConfig::riesz(
            file.beta.unwrap_or(f64::NAN),
            file.p.unwrap_or(f64::NAN),
            file.radii.clone(),
        ),
        CapacityKind::Hajlasz => DensityScanConfig::hajlasz(
            file.beta.unwrap_or(f64::NAN),
            file.p.unwrap_or(f64::NAN),
            file.radii.clone(),
        ),
        CapacityKind::Variational => {
            DensityScanConfig::variational(file.p.unwrap_or(f64::NAN), file.radii.clone())
        }
        CapacityKind::Content => {
            DensityScanConfig::content(file.q.unwrap_or(f64::NAN), file.radii.clone())
        }
    };
    config.seed = seed;
    if let Some(mc) = file.max_centers {
        config.max_centers = mc;
    }
    config.raw_denominator = file.raw_denominator.unwrap_or(false);
    config.options = parse_profile(file.profile.as_deref().unwrap_or("scan"))?;

    let report = density_scan(&space, &e, &config)?;

    let mut rec = base_record("density-report", "density", &space_path, &digest, seed);
    rec.set("params.kind", report.kind).set("params.E", join_ids(e.ids()));
    for (name, v) in
        [("params.beta", report.beta), ("params.p", report.p), ("params.q", report.q)]
    {
        if let Some(v) = v {
            rec.set(name, v);
        }
    }
    rec.set("params.radii", join_f64(&report.scales))
        .set("params.max_centers", config.max_centers)
        .set("params.raw_denominator", config.raw_denominator);
    push_density_blocks(&mut rec, &report);
    push_warnings(&mut rec, &report.warnings);

    let mut bundle = Bundle::new(
        rec,
        &["x", "r", "numerator", "denominator", "ratio", "within_standard_range"],
    );
    for s in &report.samples {
        bundle.csv_rows.push(vec![
            s.x.to_string(),
            s.r.to_string(),
            s.numerator.to_string(),
            s.denominator.to_string(),
            s.ratio.to_string(),
            s.within_standard_range.to_string(),
        ]);
    }
    bundle.series.extend(density_series(&report));
    bundle.write(&args.out)?;
    println!("c0_estimate = {} over {} samples", report.c0_estimate, report.samples.len());
    Ok(())
}

pub fn join_f64(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

pub fn push_density_blocks(rec: &mut Record, report: &DensityReport) {
    for s in &report.samples {
        let mut block = Record::new("sample");
        block
            .set("x", s.x)
            .set("r", s.r)
            .set("numerator", s.numerator)
            .set("denominator", s.denominator)
            .set("ratio", s.ratio)
            .set("within_standard_range", s.within_standard_range);
        rec.push_block(block);
    }
    let mut summary = Record::new("summary");
    summary
        .set("c0_estimate", report.c0_estimate)
        .set("samples", report.samples.len())
        .set("centers", join_ids(&report.centers))
        .set("scales", join_f64(&report.scales))
        .set(
            "standard_range",
            format!("{} {}", report.standard_range.0, report.standard_range.1),
        )
        // a finite sweep can only support the condition on the scales it saw
        .set("scope", "supported on sampled scales only");
    rec.push_block(summary);
}

pub fn density_series(report: &DensityReport) -> Vec<Series> {
    let mut min_by_scale = Vec::new();
    let mut mean_by_scale = Vec::new();
    for &r in &report.scales {
        let at: Vec<f64> =
            report.samples.iter().filter(|s| s.r == r).map(|s| s.ratio).collect();
        if at.is_empty() {
            continue;
        }
        min_by_scale.push((r, at.iter().copied().fold(f64::INFINITY, f64::min)));
        mean_by_scale.push((r, at.iter().sum::<f64>() / at.len() as f64));
    }
    vec![
        Series {
            label: "min-ratio".into(),
            x_label: "r".into(),
            y_label: "ratio".into(),
            points: min_by_scale,
        },
        Series {
            label: "mean-ratio".into(),
            x_label: "r".into(),
            y_label: "ratio".into(),
            points: mean_by_scale,
        },
    ]
}

#[derive(Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// Set E (index list or predicate).
    #[arg(long)]
    pub e: String,
    /// riesz-hajlasz | variational-hajlasz | content-restricted
    #[arg(long)]
    pub pair: String,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub p: f64,
    /// Comma-separated radii.
    #[arg(long)]
    pub radii: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_compare(args: &CompareArgs, seed: u64) -> anyhow::Result<()> {
    let (space, digest) = io::read_space(&args.space)?;
    let e = setspec::parse_set(&space, &args.e)?;
    let pair = match args.pair.as_str() {
        "riesz-hajlasz" => ComparabilityPair::RieszHajlasz,
        "variational-hajlasz" => ComparabilityPair::VariationalHajlasz,
        "content-restricted" => ComparabilityPair::ContentRestricted,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown pair {other:?}; expected riesz-hajlasz, variational-hajlasz, or content-restricted"
            ))
            .into())
        }
    };
    let radii = parse_f64_list(&args.radii)?;
    let report = comparability_scan(&space, &e, pair, args.beta, args.p, &radii)?;

    let mut rec = base_record("compare-report", "compare", &args.space, &digest, seed);
    rec.set("params.pair", &args.pair)
        .set("params.E", join_ids(e.ids()))
        .set("params.beta", args.beta)
        .set("params.p", args.p)
        .set("params.radii", join_f64(&radii))
        .set("band.min", report.band.0)
        .set("band.max", report.band.1)
        .set("band_spread", report.band_spread)
        .set("two_sided", report.two_sided);
    if let Some(sigma) = report.sigma_fit {
        rec.set("sigma_fit", sigma);
    }
    for s in &report.samples {
        let mut block = Record::new("sample");
        block.set("x", s.x).set("r", s.r).set("lhs", s.lhs).set("rhs", s.rhs).set("ratio", s.ratio);
        rec.push_block(block);
    }
    push_warnings(&mut rec, &report.warnings);

    let mut bundle = Bundle::new(rec, &["x", "r", "lhs", "rhs", "ratio"]);
    for s in &report.samples {
        bundle.csv_rows.push(vec![
            s.x.to_string(),
            s.r.to_string(),
            s.lhs.to_string(),
            s.rhs.to_string(),
            s.ratio.to_string(),
        ]);
    }
    bundle.series.push(Series {
        label: "ratio".into(),
        x_label: "r".into(),
        y_label: "ratio".into(),
        points: report.samples.iter().map(|s| (s.r, s.ratio)).collect(),
    });
    bundle.write(&args.out)?;
    println!(
        "band = [{}, {}], spread = {}, two_sided = {}",
        report.band.0, report.band.1, report.band_spread, report.two_sided
    );
    Ok(())
}

#[derive(Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub e: String,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub p: f64,
    /// Probe grid as gamma,s pairs: "0.9,1.9;0.8,2.2".
    #[arg(long)]
    pub grid: String,
    /// Comma-separated radii.
    #[arg(long)]
    pub radii: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_probe(args: &ProbeArgs, seed: u64) -> anyhow::Result<()> {
    let (space, digest) = io::read_space(&args.space)?;
    let e = setspec::parse_set(&space, &args.e)?;
    let radii = parse_f64_list(&args.radii)?;
    let mut grid = Vec::new();
    for pair in args.grid.split(';') {
        let nums = parse_f64_list(pair)?;
        if nums.len() != 2 {
            return Err(Error::InvalidParameter(format!(
                "probe grid entry {pair:?} must be gamma,s"
            ))
            .into());
        }
        grid.push((nums[0], nums[1]));
    }
    let table = self_improvement_probe(&space, &e, args.beta, args.p, &grid, &radii)?;

    let mut rec = base_record("probe-report", "probe", &args.space, &digest, seed);
    rec.set("params.E", join_ids(e.ids()))
        .set("params.beta", args.beta)
        .set("params.p", args.p)
        .set("params.radii", join_f64(&radii))
        .set("base_c0", table.base_c0)
        .set("sigma_fit", table.sigma_fit);
    if let Some(d) = &table.diagnostic {
        rec.set("diagnostic", d);
    }
    for row in &table.rows {
        let mut block = Record::new("row");
        block.set("gamma", row.gamma).set("s", row.s).set("c0_estimate", row.c0_estimate);
        rec.push_block(block);
    }
    for (gamma, s, reason) in &table.excluded {
        let mut block = Record::new("excluded");
        block.set("gamma", *gamma).set("s", *s).set("reason", reason);
        rec.push_block(block);
    }

    let mut bundle = Bundle::new(rec, &["gamma", "s", "c0_estimate"]);
    for row in &table.rows {
        bundle.csv_rows.push(vec![
            row.gamma.to_string(),
            row.s.to_string(),
            row.c0_estimate.to_string(),
        ]);
    }
    bundle.series.push(Series {
        label: "c0-by-gs".into(),
        x_label: "gamma*s".into(),
        y_label: "c0_estimate".into(),
        points: table.rows.iter().map(|r| (r.gamma * r.s, r.c0_estimate)).collect(),
    });
    bundle.write(&args.out)?;
    println!(
        "base_c0 = {}, {} admissible rows, {} excluded",
        table.base_c0,
        table.rows.len(),
        table.excluded.len()
    );
    Ok(())
}
