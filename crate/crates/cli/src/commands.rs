use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use torsionlab_core::adiabatic::{run_experiment, ExperimentReport};
use torsionlab_core::charforms::integrate_samples;
use torsionlab_core::cplx;
use torsionlab_core::exterior::degree;
use torsionlab_core::superconn::{check_identities, IdentityResiduals};
use torsionlab_core::torsion::{check_variant_identity, compare_with_bl, degree0_closed_form, torsion_report, TorsionReport};
use torsionlab_core::{c64, FlatComplexSpec, Form};

use crate::config::RunConfig;
use crate::{write_json, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Validate,
    Identities,
    Torsion,
    Adiabatic,
}

/// What a finished command produced. `passed = false` maps to exit code 2.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

pub fn run(command: Command, spec_path: &Path, config: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let spec = FlatComplexSpec::from_file(spec_path)?;
    let name = spec_path.display().to_string();
    match command {
        Command::Validate => validate(&spec, &name, config, out),
        Command::Identities => identities(&spec, &name, config, out),
        Command::Torsion => torsion(&spec, &name, config, out),
        Command::Adiabatic => adiabatic(&spec, &name, config, out),
    }
}

#[derive(Debug, Serialize)]
struct ValidateReport {
    spec: String,
    passed: bool,
    failures: Vec<String>,
    min_metric_eigenvalue: f64,
    worst_point: Vec<f64>,
    curvature_residual: Option<f64>,
    commutator_residual: Option<f64>,
    acyclicity_min_eigenvalue: Option<f64>,
}

fn validate(spec: &FlatComplexSpec, name: &str, config: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let c = &config.validate;
    let (min_eig, worst) = spec.min_metric_eigenvalue(c.positivity_grid)?;
    let mut report = ValidateReport {
        spec: name.to_string(),
        passed: false,
        failures: Vec::new(),
        min_metric_eigenvalue: min_eig,
        worst_point: worst.clone(),
        curvature_residual: None,
        commutator_residual: None,
        acyclicity_min_eigenvalue: None,
    };
    if min_eig <= 0.0 {
        report
            .failures
            .push(format!("metric is not positive definite: eigenvalue {min_eig:.3e} at x = {worst:?}"));
    } else {
        let flat = spec.validate_flatness(c.positivity_grid, c.residual_grid)?;
        report.curvature_residual = Some(flat.curvature_residual);
        report.commutator_residual = Some(flat.commutator_residual);
        if flat.curvature_residual > c.tolerance {
            report.failures.push(format!("curvature residual {:.3e}", flat.curvature_residual));
        }
        if flat.commutator_residual > c.tolerance {
            report.failures.push(format!("commutator residual {:.3e}", flat.commutator_residual));
        }
        let lambda = spec.acyclicity_check(c.acyclicity_grid)?;
        report.acyclicity_min_eigenvalue = Some(lambda);
        if lambda <= c.acyclicity_floor {
            report.failures.push(format!("not acyclic: min eigenvalue of (v + v*)² is {lambda:.3e}"));
        }
    }
    report.passed = report.failures.is_empty();
    let path = out.join("validation.json");
    write_json(&path, &report)?;
    let summary = if report.passed {
        format!("valid; min metric eigenvalue {min_eig:.3e}")
    } else {
        report.failures.join("; ")
    };
    Ok(Outcome {
        passed: report.passed,
        summary,
        files: vec![path],
    })
}

#[derive(Debug, Serialize)]
struct IdentityRow {
    x: Vec<f64>,
    u: f64,
    r: f64,
    residuals: IdentityResiduals,
    max: f64,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct VariantRow {
    x: Vec<f64>,
    t: f64,
    r: f64,
    residual: f64,
    scale: f64,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct IdentitiesReport {
    spec: String,
    seed: u64,
    tolerance: f64,
    variant_tolerance: f64,
    rows: Vec<IdentityRow>,
    variant_rows: Vec<VariantRow>,
    max_residual: f64,
    max_variant_residual: f64,
    failures: usize,
    passed: bool,
}

fn sample_points(spec: &FlatComplexSpec, seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| spec.periods().iter().map(|&l| rng.random_range(0.0..l)).collect())
        .collect()
}

fn identities(spec: &FlatComplexSpec, name: &str, config: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let c = &config.identities;
    let points = sample_points(spec, config.seed, c.points);
    let per_point = points
        .par_iter()
        .map(|x| {
            let mut rows = Vec::new();
            for &u in &c.u {
                for &r in &c.r {
                    let residuals = check_identities(spec, x, u, r)?;
                    let max = residuals.max();
                    rows.push(IdentityRow {
                        x: x.clone(),
                        u,
                        r,
                        residuals,
                        max,
                        passed: max <= c.tolerance,
                    });
                }
            }
            let mut variant = Vec::new();
            for &t in &c.variant_times {
                for &r in &c.r {
                    let res = check_variant_identity(spec, x, t, r)?;
                    variant.push(VariantRow {
                        x: x.clone(),
                        t,
                        r,
                        residual: res.residual,
                        scale: res.scale,
                        passed: res.residual <= c.variant_tolerance,
                    });
                }
            }
            Ok((rows, variant))
        })
        .collect::<torsionlab_core::Result<Vec<_>>>()?;
    let (mut rows, mut variant_rows) = (Vec::new(), Vec::new());
    for (r, v) in per_point {
        rows.extend(r);
        variant_rows.extend(v);
    }
    let failures = rows.iter().filter(|r| !r.passed).count() + variant_rows.iter().filter(|r| !r.passed).count();
    let report = IdentitiesReport {
        spec: name.to_string(),
        seed: config.seed,
        tolerance: c.tolerance,
        variant_tolerance: c.variant_tolerance,
        max_residual: rows.iter().map(|r| r.max).fold(0.0, f64::max),
        max_variant_residual: variant_rows.iter().map(|r| r.residual).fold(0.0, f64::max),
        failures,
        passed: failures == 0,
        rows,
        variant_rows,
    };
    let path = out.join("identities.json");
    write_json(&path, &report)?;
    Ok(Outcome {
        passed: report.passed,
        summary: format!(
            "{} identity rows, {} variant rows, {} failures; max residuals {:.2e} / {:.2e}",
            report.rows.len(),
            report.variant_rows.len(),
            failures,
            report.max_residual,
            report.max_variant_residual
        ),
        files: vec![path],
    })
}

#[derive(Debug, Serialize)]
struct BlComparison {
    degree: usize,
    factor: f64,
    lhs: Form,
    rhs: Form,
    residual: f64,
    /// `T^{[2]}/T_BL^{[2]}` on the largest degree-2 coefficient.
    ratio: Option<f64>,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct TorsionPoint {
    #[serde(flatten)]
    report: TorsionReport,
    degree0_expected: f64,
    degree0_error: f64,
    bl_comparison: Option<BlComparison>,
}

#[derive(Debug, Serialize)]
struct TorsionIntegrals {
    r: f64,
    #[serde(with = "cplx::scalar")]
    torsion: c64,
    #[serde(with = "cplx::scalar")]
    torsion_tilde: c64,
    #[serde(with = "cplx::scalar")]
    bl: c64,
}

#[derive(Debug, Serialize)]
struct TorsionFile {
    spec: String,
    grid: usize,
    points: Vec<TorsionPoint>,
    integrals: Vec<TorsionIntegrals>,
    failures: Vec<String>,
    passed: bool,
}

fn ratio(lhs: &Form, bl: &Form) -> Option<f64> {
    let mask = (0..bl.ctx().dim())
        .filter(|&m| degree(m) == 2)
        .max_by(|&a, &b| bl.coeff(a).norm().total_cmp(&bl.coeff(b).norm()))?;
    let denom = bl.coeff(mask);
    (denom.norm() > 1e-12).then(|| (lhs.coeff(mask) / denom).re)
}

fn torsion(spec: &FlatComplexSpec, name: &str, config: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let c = &config.torsion;
    let opts = config.integration.options()?;
    let grid = spec.grid(c.grid);
    let mut points = Vec::new();
    let mut integrals = Vec::new();
    let mut failures = Vec::new();
    for &r in &c.r {
        let level = grid
            .par_iter()
            .map(|x| {
                let pd = spec.point_data(x)?;
                let report = torsion_report(&pd, r, &opts)?;
                let expected = degree0_closed_form(&pd.space, r);
                let error = (report.torsion.coeff(0) - c64::new(expected, 0.0)).norm();
                let bl_comparison = if c.bl_comparison && spec.p() >= 2 {
                    let cmp = compare_with_bl(&report.torsion, &report.bl, r, 2)?;
                    Some(BlComparison {
                        degree: 2,
                        factor: cmp.factor,
                        ratio: ratio(&cmp.lhs, &report.bl),
                        passed: cmp.residual <= c.ratio_tolerance,
                        residual: cmp.residual,
                        lhs: cmp.lhs,
                        rhs: cmp.rhs,
                    })
                } else {
                    None
                };
                Ok(TorsionPoint {
                    report,
                    degree0_expected: expected,
                    degree0_error: error,
                    bl_comparison,
                })
            })
            .collect::<torsionlab_core::Result<Vec<_>>>()?;
        for p in &level {
            if p.degree0_error > c.degree0_tolerance {
                failures.push(format!("degree-0 law off by {:.3e} at x = {:?}, r = {r}", p.degree0_error, p.report.x));
            }
            if let Some(b) = p.bl_comparison.as_ref().filter(|b| !b.passed) {
                failures.push(format!("BL comparison residual {:.3e} at x = {:?}, r = {r}", b.residual, p.report.x));
            }
        }
        let top = |f: fn(&TorsionPoint) -> &Form| {
            let samples: Vec<c64> = level.iter().map(|p| f(p).top()).collect();
            integrate_samples(&samples, spec.periods())
        };
        integrals.push(TorsionIntegrals {
            r,
            torsion: top(|p| &p.report.torsion),
            torsion_tilde: top(|p| &p.report.torsion_tilde),
            bl: top(|p| &p.report.bl),
        });
        points.extend(level);
    }
    let file = TorsionFile {
        spec: name.to_string(),
        grid: c.grid,
        passed: failures.is_empty(),
        points,
        integrals,
        failures,
    };
    let path = out.join("torsion.json");
    write_json(&path, &file)?;
    let summary = file
        .integrals
        .iter()
        .map(|i| format!("r = {}: integral of T {:.6e}", i.r, i.torsion.re))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome {
        passed: file.passed,
        summary: format!("{summary}; {} failures", file.failures.len()),
        files: vec![path],
    })
}

fn adiabatic(spec: &FlatComplexSpec, name: &str, config: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let opts = config.integration.options()?;
    let report: ExperimentReport = run_experiment(spec, &config.adiabatic, &opts)?;
    let path = out.join("adiabatic.json");
    #[derive(Serialize)]
    struct File<'a> {
        spec: &'a str,
        passed: bool,
        #[serde(flatten)]
        report: &'a ExperimentReport,
    }
    let passed = report.within_tolerance && report.grid_monotone;
    write_json(&path, &File { spec: name, passed, report: &report })?;
    let mut files = vec![path];
    if !config.adiabatic.trace_times.is_empty() {
        let dir = out.join("traces");
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        for (l, level) in report.levels.iter().enumerate() {
            for (k, point) in level.points.iter().enumerate().filter(|(_, p)| !p.trace.is_empty()) {
                let file = dir.join(format!("trace_n{}_u{}.csv", level.n, point.u));
                std::fs::write(&file, report.trace_csv(l, k)).map_err(|e| CliError::Io(format!("{}: {e}", file.display())))?;
                files.push(file);
            }
        }
    }
    let level = &report.levels[0];
    Ok(Outcome {
        passed,
        summary: format!(
            "half extrapolated {:.6e}, integral {:.6e}, relative error {:.3e} at N = {}{}{}",
            level.half_extrapolated.re,
            report.rhs.re,
            report.relative_error,
            level.n,
            if report.within_tolerance { "" } else { "; above tolerance" },
            if report.grid_monotone { "" } else { "; refinement not monotone" },
        ),
        files,
    })
}
