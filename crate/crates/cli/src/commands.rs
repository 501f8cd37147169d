use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use setinv::certify::{
    certify_problem, score_finite, score_infinite, score_infinite_analytic, CertificationReport,
    ScoreField, Verdict,
};
use setinv::eigen::{
    analytic_eigenpair_disk, analytic_eigenpair_rect, analytic_eigenpair_weyl, principal_eigenpair,
    AnalyticEigenpair, EigenPair,
};
use setinv::io::{self, EigenDoc};
use setinv::pde::{
    discretize_generator, feynman_kac_field_at, graded_times, uniform_times, AnnulusSeries, Grid,
    RectSeries, SpaceTimeField,
};
use setinv::problem::{validate_spec, CheckStatus, Domain, ProblemSpec};
use setinv::simulate::{
    exit_statistics, simulate_conditioned_infinite, simulate_uncontrolled, simulate_with_score,
    PathEnsemble, PsiSource, SimOptions, SimStats,
};

use crate::config::{RunConfig, Solver, Spacing};
use crate::CliError;

const VALIDATION_SAMPLES: usize = 1000;
const VALIDATION_TOLERANCE: f64 = 1e-9;
const VALIDATION_SEED: u64 = 0;

fn out(cfg: &RunConfig, file: &str) -> PathBuf {
    cfg.output_dir.join(file)
}

fn missing(path: &Path) -> CliError {
    CliError::Usage(format!(
        "{} not found; run the previous stage first",
        path.display()
    ))
}

pub fn validate(cfg: &RunConfig, allow_warn: bool) -> Result<(), CliError> {
    let report = validate_spec(
        &cfg.problem,
        VALIDATION_SAMPLES,
        VALIDATION_TOLERANCE,
        VALIDATION_SEED,
    );
    io::write_json(&out(cfg, "validation.json"), "validation", &report)?;
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| c.status == CheckStatus::Fail || (c.status == CheckStatus::Warn && !allow_warn))
        .map(|c| c.name.as_str())
        .collect();
    for c in &report.checks {
        println!("{:?} {}: {}", c.status, c.name, c.detail);
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failed.join(", ")))
    }
}

fn horizon(spec: &ProblemSpec) -> f64 {
    spec.horizon.finite_end().expect("checked with the solver")
}

fn time_grid(cfg: &RunConfig) -> Vec<f64> {
    let t = horizon(&cfg.problem);
    match cfg.time.spacing {
        Spacing::Uniform => uniform_times(t, cfg.time.slices),
        Spacing::Graded => graded_times(t, cfg.time.slices),
    }
}

fn is_brownian(spec: &ProblemSpec) -> bool {
    spec.dynamics.is_drift_free() && spec.dynamics.noise_is_identity()
}

/// Closed-form series for the two shapes that have one.
fn series_field(cfg: &RunConfig, grid: &Grid) -> Result<SpaceTimeField, CliError> {
    let spec = &cfg.problem;
    let t = horizon(spec);
    let times = time_grid(cfg);
    if !is_brownian(spec) {
        return Err(CliError::Usage(
            "the series solver needs zero drift and unit noise".into(),
        ));
    }
    match (&spec.domain, &spec.target) {
        (Domain::HyperRectangle { lower, upper }, target) if lower.iter().all(|&v| v == 0.0) => {
            let b = match target {
                None => upper.clone(),
                Some(Domain::HyperRectangle { lower: tl, upper: tu }) if tl.iter().all(|&v| v == 0.0) => tu.clone(),
                Some(_) => return Err(CliError::Usage("rectangle series needs a target Rect(0, b)".into())),
            };
            Ok(RectSeries::new(upper.clone(), b)?.field(grid, t, times)?)
        }
        (Domain::Disk { center, radius }, Some(Domain::Annulus { inner, outer }))
            if *center == [0.0, 0.0] && (outer - radius).abs() <= 1e-12 * radius =>
        {
            let min_tau = times.iter().map(|&s| t - s).filter(|&tau| tau > 0.0).fold(f64::INFINITY, f64::min);
            let k = cfg
                .series
                .annulus_modes
                .unwrap_or_else(|| AnnulusSeries::modes_needed(*radius, min_tau));
            Ok(AnnulusSeries::new(*inner, *radius, k)?.field(grid, t, times)?)
        }
        _ => Err(CliError::Usage(
            "series solutions exist for Rect(0, l) with target Rect(0, b) and for a centred disk with an annulus target".into(),
        )),
    }
}

fn analytic_pair(spec: &ProblemSpec) -> Result<AnalyticEigenpair, CliError> {
    if !is_brownian(spec) {
        return Err(CliError::Usage(
            "closed-form eigenpairs need zero drift and unit noise".into(),
        ));
    }
    match &spec.domain {
        Domain::HyperRectangle { lower, upper } if lower.iter().all(|&v| v == 0.0) => {
            Ok(analytic_eigenpair_rect(upper)?)
        }
        Domain::Disk { center, radius } if *center == [0.0, 0.0] => {
            Ok(analytic_eigenpair_disk(*radius)?)
        }
        Domain::WeylChamber { dim, .. } => Ok(analytic_eigenpair_weyl(*dim)?),
        _ => Err(CliError::Usage(
            "closed-form eigenpairs exist for Rect(0, l), a centred disk and the Weyl chamber"
                .into(),
        )),
    }
}

fn grid(cfg: &RunConfig) -> Result<Grid, CliError> {
    Ok(Grid::for_domain(&cfg.problem.domain, &cfg.cells)?)
}

fn on_nodes(grid: &Grid, interior: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..grid.node_count())
        .map(|p| {
            if grid.is_interior(p) {
                interior(p)
            } else {
                0.0
            }
        })
        .collect()
}

pub fn solve(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = &cfg.problem;
    let grid = grid(cfg)?;
    match cfg.solver {
        Solver::Series | Solver::FeynmanKac => {
            let field = if cfg.solver == Solver::Series {
                series_field(cfg, &grid)?
            } else {
                let mc = cfg.feynman_kac.as_ref().expect("checked on load");
                feynman_kac_field_at(spec, &grid, time_grid(cfg), mc.n_paths, mc.dt, mc.seed)?
            };
            io::write_field(&out(cfg, "field.csv"), &field, &grid)?;
            println!(
                "field: {} slices x {} nodes ({})",
                field.times().len(),
                grid.node_count(),
                field.meta.solver
            );
        }
        Solver::EigenNumeric => {
            let gen = discretize_generator(&grid, &spec.dynamics, 0.0)?;
            let e = &cfg.eigen;
            let pair = principal_eigenpair(&gen, e.tolerance, e.max_iter, e.seed)?;
            let psi = on_nodes(&grid, |p| {
                pair.psi[grid.interior_slot(p).expect("interior")]
            });
            let doc = EigenDoc {
                source: "numeric".into(),
                lambda: pair.lambda,
                residual: Some(pair.residual),
                iterations: Some(pair.iterations),
                tolerance: Some(e.tolerance),
                seed: Some(e.seed),
                grid: grid.meta(),
            };
            io::write_eigen(&out(cfg, "eigen.csv"), &grid, &psi, &doc)?;
            println!(
                "lambda_0 = {} ({} iterations)",
                pair.lambda, pair.iterations
            );
        }
        Solver::EigenAnalytic => {
            let pair = analytic_pair(spec)?;
            let psi = on_nodes(&grid, |p| pair.psi(&grid.coords(p)));
            let doc = EigenDoc {
                source: "analytic".into(),
                lambda: pair.lambda(),
                residual: None,
                iterations: None,
                tolerance: None,
                seed: None,
                grid: grid.meta(),
            };
            io::write_eigen(&out(cfg, "eigen.csv"), &grid, &psi, &doc)?;
            println!("lambda_0 = {} (closed form)", pair.lambda());
        }
    }
    Ok(())
}

fn read_field(cfg: &RunConfig) -> Result<(SpaceTimeField, Grid), CliError> {
    let path = out(cfg, "field.csv");
    if !path.exists() {
        return Err(missing(&path));
    }
    Ok(io::read_field(&path)?)
}

fn read_eigen(cfg: &RunConfig) -> Result<(EigenDoc, Grid, EigenPair), CliError> {
    let path = out(cfg, "eigen.csv");
    if !path.exists() {
        return Err(missing(&path));
    }
    let (doc, grid, psi) = io::read_eigen(&path)?;
    let pair = EigenPair {
        lambda: doc.lambda,
        psi: grid.interior_nodes().iter().map(|&p| psi[p]).collect(),
        residual: doc.residual.unwrap_or(0.0),
        iterations: doc.iterations.unwrap_or(0),
    };
    Ok((doc, grid, pair))
}

/// Score of the solved artifact on its grid.
fn load_score(cfg: &RunConfig) -> Result<ScoreField, CliError> {
    let spec = &cfg.problem;
    let c = &cfg.certify;
    Ok(match cfg.solver {
        Solver::Series | Solver::FeynmanKac => {
            let (field, grid) = read_field(cfg)?;
            score_finite(&field, &grid, &spec.dynamics, c.eps, c.s_max)?
        }
        Solver::EigenNumeric => {
            let (_, grid, pair) = read_eigen(cfg)?;
            score_infinite(&pair, &grid, &spec.dynamics, c.eps, c.s_max)?
        }
        Solver::EigenAnalytic => {
            let (_, grid, _) = read_eigen(cfg)?;
            score_infinite_analytic(&analytic_pair(spec)?, &grid, &spec.dynamics, c.s_max)?
        }
    })
}

#[derive(Serialize)]
struct CertificateDoc<'a> {
    name: &'a str,
    solver: Solver,
    #[serde(flatten)]
    report: &'a CertificationReport,
}

pub fn certify(cfg: &RunConfig) -> Result<(), CliError> {
    let score = load_score(cfg)?;
    let (report, law) = certify_problem(&cfg.problem, &score, cfg.certify.tolerance)?;
    let doc = CertificateDoc {
        name: &cfg.name,
        solver: cfg.solver,
        report: &report,
    };
    io::write_json(&out(cfg, "certificate.json"), "certificate", &doc)?;
    io::write_control_law(&out(cfg, "control.csv"), &law, score.grid())?;
    println!(
        "{:?}: max residual {:e} over {} nodes (input rank {})",
        report.verdict, report.max_residual, report.nodes_checked, report.input_rank
    );
    match (report.verdict, &report.witness) {
        (Verdict::Certified, _) => Ok(()),
        (Verdict::Falsified, Some(w)) => Err(CliError::Falsified(format!(
            "residual {} at t = {}, x = {:?}",
            w.residual, w.t, w.x
        ))),
        (Verdict::Falsified, None) => Err(CliError::Falsified("no witness recorded".into())),
    }
}

#[derive(Serialize)]
struct StatsDoc<'a> {
    name: &'a str,
    controlled: bool,
    t_end: f64,
    n_steps: usize,
    stride: usize,
    /// Fraction of paths whose coordinates lost their order (Weyl chamber only).
    #[serde(skip_serializing_if = "Option::is_none")]
    ordering_violation_fraction: Option<f64>,
    #[serde(flatten)]
    stats: &'a SimStats,
}

fn write_ensemble(
    cfg: &RunConfig,
    prefix: &str,
    controlled: bool,
    ensemble: &PathEnsemble,
) -> Result<SimStats, CliError> {
    let spec = &cfg.problem;
    let stats = exit_statistics(ensemble, &spec.domain, spec.target.as_ref())?;
    let doc = StatsDoc {
        name: &cfg.name,
        controlled,
        t_end: ensemble.t_end,
        n_steps: ensemble.n_steps,
        stride: ensemble.stride,
        ordering_violation_fraction: matches!(spec.domain, Domain::WeylChamber { .. })
            .then_some(stats.exit_fraction),
        stats: &stats,
    };
    io::write_paths(&out(cfg, &format!("{prefix}paths.csv")), ensemble)?;
    io::write_json(&out(cfg, &format!("{prefix}stats.json")), "stats", &doc)?;
    Ok(stats)
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = &cfg.problem;
    let s = &cfg.simulation;
    let opts = SimOptions {
        n_paths: s.n_paths,
        dt: s.dt,
        seed: s.seed,
        stride: s.stride,
    };
    let t_end = spec
        .horizon
        .finite_end()
        .or(s.t_end)
        .expect("checked on load");
    let ensemble = match cfg.solver {
        Solver::EigenAnalytic => {
            // Differentiate the closed form along the path rather than interpolate.
            let pair = analytic_pair(spec)?;
            simulate_conditioned_infinite(
                spec,
                PsiSource::Analytic(&pair),
                cfg.certify.s_max,
                t_end,
                &opts,
            )?
        }
        _ => {
            let score = load_score(cfg)?;
            simulate_with_score(spec, &score, 0.0, t_end, &opts)?
        }
    };
    let stats = write_ensemble(cfg, "", true, &ensemble)?;
    println!(
        "controlled: exit fraction {} (+- {}), terminal hit {:?}",
        stats.exit_fraction, stats.exit_standard_error, stats.terminal_hit_fraction
    );
    if s.baseline {
        let prior = simulate_uncontrolled(spec, t_end, &opts)?;
        let stats = write_ensemble(cfg, "baseline_", false, &prior)?;
        println!("uncontrolled: exit fraction {}", stats.exit_fraction);
    }
    Ok(())
}

fn optional(path: &Path, kind: &str) -> Result<Value, CliError> {
    if path.exists() {
        Ok(io::read_json::<Value>(path, kind)?)
    } else {
        Ok(Value::Null)
    }
}

/// Drops per-path rows, keeping the summary numbers.
fn summarize_stats(mut v: Value) -> Value {
    if let Value::Object(m) = &mut v {
        m.remove("paths");
    }
    v
}

fn strip_version(mut v: Value) -> Value {
    if let Value::Object(m) = &mut v {
        m.remove("schema_version");
        m.remove("kind");
    }
    v
}

pub fn report(cfg: &RunConfig) -> Result<(), CliError> {
    let validation = optional(&out(cfg, "validation.json"), "validation")?;
    let solve = match cfg.solver {
        Solver::Series | Solver::FeynmanKac => optional(&out(cfg, "field.json"), "field")?,
        _ => optional(&out(cfg, "eigen.json"), "eigen")?,
    };
    // The grid mask is bulky and already in the solve sidecar.
    let solve = match solve {
        Value::Object(mut m) => {
            if let Some(Value::Object(g)) = m.get_mut("grid") {
                g.remove("interior");
            }
            m.remove("times");
            Value::Object(m)
        }
        other => other,
    };
    let certificate = optional(&out(cfg, "certificate.json"), "certificate")?;
    let stats = summarize_stats(optional(&out(cfg, "stats.json"), "stats")?);
    let baseline = summarize_stats(optional(&out(cfg, "baseline_stats.json"), "stats")?);
    let summary = serde_json::json!({
        "name": cfg.name,
        "solver": cfg.solver,
        "config": cfg,
        "validation": strip_version(validation),
        "solve": strip_version(solve),
        "certificate": strip_version(certificate),
        "simulation": strip_version(stats),
        "baseline": strip_version(baseline),
    });
    io::write_json(&out(cfg, "summary.json"), "summary", &summary)?;
    println!("wrote {}", out(cfg, "summary.json").display());
    Ok(())
}
