//! Scenario execution: truth, data, pilot covariance, λ path, error rows.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use wsp::covariance::{
    gemini_covariances, huber_covariance, rank_correlation_matrix, sample_covariance, DataMatrix, RankMethod,
};
use wsp::scio::{scio_estimate, scio_path, PrecisionEstimate};
use wsp::simulate::{
    rng_for, sample_gaussian_with, sample_matrix_normal_with, sample_mvt_with, sample_nonparanormal_with, Truth,
    TruthConstructor, TruthSpec, RNG_ALGORITHM,
};
use wsp::theory::{check_bounds_for, error_report, kronecker_error_report, BoundCheck, ErrorReport};
use wsp::{Matrix, NormKind, SymMatrix};

use crate::config::{EstimatorKind, Sampler, Scenario, ScenarioConfig};
use crate::csvio::{format_f64, write_text};
use crate::error::{numerical, CliError, Result};
use crate::svg::{Chart, Series};

/// One `(estimator, ρ, replication, λ, q)` outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario: Scenario,
    pub estimator: EstimatorKind,
    pub rho: f64,
    pub replication: usize,
    pub lambda: f64,
    pub q: f64,
    pub errors: ErrorReport,
    /// For matrix data the bound check refers to the column factor.
    pub bound: BoundCheck,
    pub converged: bool,
    pub max_kkt_residual: f64,
    pub sweeps: usize,
}

/// Wall time of one pilot-plus-path solve. Kept apart from [`ResultRow`] so
/// result files do not depend on machine load.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub estimator: EstimatorKind,
    pub rho: f64,
    pub replication: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<Timing>,
}

/// Oracle-tuned error of one `(estimator, ρ, replication)` path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub estimator: EstimatorKind,
    pub rho: f64,
    pub replication: usize,
    pub lambda: f64,
    pub error: f64,
    /// `‖Σ̂ − Σ‖_∞` of the pilot.
    pub sigma_error: f64,
}

enum Sample {
    Vectors(DataMatrix),
    Matrices(Vec<Matrix>),
}

struct MatrixTruth {
    a: Truth,
    b: Truth,
}

fn build_truth(cfg: &ScenarioConfig, rho: f64) -> Result<Truth> {
    TruthSpec {
        constructor: cfg.truth,
        rho,
        p: if cfg.scenario == Scenario::MatrixData {
            cfg.m
        } else {
            cfg.p
        },
    }
    .build()
    .map_err(numerical("simulate", "build_truth"))
}

fn draw(cfg: &ScenarioConfig, truth: &Truth, matrix: Option<&MatrixTruth>, replication: usize) -> Result<Sample> {
    let mut rng = rng_for(cfg.seed, replication as u64);
    Ok(match cfg.sampler {
        Sampler::Gaussian => Sample::Vectors(
            sample_gaussian_with(cfg.n, &truth.sigma, &mut rng).map_err(numerical("simulate", "sample_gaussian"))?,
        ),
        Sampler::T => Sample::Vectors(
            sample_mvt_with(cfg.n, &truth.sigma, cfg.nu, &mut rng).map_err(numerical("simulate", "sample_mvt"))?,
        ),
        Sampler::Nonparanormal => Sample::Vectors(
            sample_nonparanormal_with(cfg.n, &truth.sigma, cfg.mu_g0, cfg.sigma_g0, &mut rng)
                .map_err(numerical("simulate", "sample_nonparanormal"))?
                .0,
        ),
        Sampler::MatrixNormal => {
            let mt = matrix.expect("matrix truth present for matrix data");
            Sample::Matrices(
                sample_matrix_normal_with(cfg.n, &mt.a.sigma, &mt.b.sigma, &mut rng)
                    .map_err(numerical("simulate", "sample_matrix_normal"))?,
            )
        }
    })
}

fn pilot(cfg: &ScenarioConfig, kind: EstimatorKind, truth: &Truth, sample: Option<&Sample>) -> Result<SymMatrix> {
    let data = || match sample {
        Some(Sample::Vectors(d)) => d,
        _ => unreachable!("vector estimators run on vector samples"),
    };
    Ok(match kind {
        EstimatorKind::Population => truth.sigma.clone(),
        EstimatorKind::Sample => {
            sample_covariance(data())
                .map_err(numerical("covariance", "sample_covariance"))?
                .matrix
        }
        EstimatorKind::Huber => {
            huber_covariance(data(), cfg.k_const, cfg.epsilon)
                .map_err(numerical("covariance", "huber_covariance"))?
                .matrix
        }
        EstimatorKind::Spearman | EstimatorKind::Kendall => {
            let method = if kind == EstimatorKind::Spearman {
                RankMethod::Spearman
            } else {
                RankMethod::Kendall
            };
            rank_correlation_matrix(data(), method, cfg.epsilon)
                .map_err(numerical("covariance", "rank_correlation_matrix"))?
                .matrix
        }
        EstimatorKind::Gemini => unreachable!("handled by the matrix-data path"),
    })
}

#[allow(clippy::too_many_arguments)]
fn rows_for_path(
    cfg: &ScenarioConfig,
    kind: EstimatorKind,
    rho: f64,
    replication: usize,
    truth: &Truth,
    sigma_hat: &SymMatrix,
    estimates: &[PrecisionEstimate],
    errors: impl Fn(&PrecisionEstimate) -> Result<ErrorReport>,
    extra: Option<&PrecisionEstimate>,
) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::with_capacity(estimates.len() * cfg.q.len());
    for est in estimates {
        let report = errors(est)?;
        let converged = est.converged() && extra.is_none_or(|e| e.converged());
        let max_kkt = extra.map_or(est.max_kkt_residual(), |e| {
            est.max_kkt_residual().max(e.max_kkt_residual())
        });
        let sweeps = est.total_sweeps() + extra.map_or(0, |e| e.total_sweeps());
        for &q in &cfg.q {
            let bound = check_bounds_for(&truth.omega, sigma_hat, &truth.sigma, est, q)
                .map_err(numerical("theory", "check_bounds"))?;
            rows.push(ResultRow {
                scenario: cfg.scenario,
                estimator: kind,
                rho,
                replication,
                lambda: est.lambda,
                q,
                errors: report,
                bound,
                converged,
                max_kkt_residual: max_kkt,
                sweeps,
            });
        }
    }
    Ok(rows)
}

fn run_replication(
    cfg: &ScenarioConfig,
    rho: f64,
    truth: &Truth,
    matrix: Option<&MatrixTruth>,
    grid: &[f64],
    replication: usize,
) -> Result<(Vec<ResultRow>, Vec<Timing>)> {
    let needs_data = cfg.estimators.iter().any(|&e| e != EstimatorKind::Population);
    let sample = if needs_data {
        Some(draw(cfg, truth, matrix, replication)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &kind in &cfg.estimators {
        let start = Instant::now();
        let new_rows = if kind == EstimatorKind::Gemini {
            let mt = matrix.expect("matrix truth present for matrix data");
            let Some(Sample::Matrices(samples)) = &sample else {
                unreachable!("gemini runs on matrix samples")
            };
            let (sa, sb) = gemini_covariances(samples).map_err(numerical("covariance", "gemini_covariances"))?;
            let path = scio_path(&sa.matrix, grid).map_err(numerical("scio", "scio_path"))?;
            let omega_b = scio_estimate(&sb.matrix, cfg.lambda_b, None).map_err(numerical("scio", "scio_estimate"))?;
            rows_for_path(
                cfg,
                kind,
                rho,
                replication,
                &mt.a,
                &sa.matrix,
                &path.estimates,
                |est| {
                    kronecker_error_report(&est.omega_tilde, &omega_b.omega_tilde, &mt.a.omega, &mt.b.omega)
                        .map_err(numerical("theory", "kronecker_error_report"))
                },
                Some(&omega_b),
            )?
        } else {
            let sigma_hat = pilot(cfg, kind, truth, sample.as_ref())?;
            let path = scio_path(&sigma_hat, grid).map_err(numerical("scio", "scio_path"))?;
            rows_for_path(
                cfg,
                kind,
                rho,
                replication,
                truth,
                &sigma_hat,
                &path.estimates,
                |est| error_report(&est.omega_tilde, &truth.omega).map_err(numerical("theory", "error_report")),
                None,
            )?
        };
        rows.extend(new_rows);
        timings.push(Timing {
            estimator: kind,
            rho,
            replication,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok((rows, timings))
}

/// Runs every `(ρ, replication, estimator)` combination of `cfg`.
///
/// Replications run on the ambient rayon pool; each draws from its own stream
/// `(seed, replication)`, and rows are sorted before returning, so the result
/// does not depend on the thread count.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ExperimentOutput> {
    cfg.validate()
        .map_err(|(key, message)| CliError::config(format!("{key}: {message}")))?;
    let grid = cfg.grid.values();
    let mut out = ExperimentOutput::default();
    for &rho in &cfg.rho {
        let truth = build_truth(cfg, rho)?;
        let matrix = if cfg.scenario == Scenario::MatrixData {
            let b = TruthSpec {
                constructor: TruthConstructor::CorrelationOfInverse,
                rho: cfg.rho_b,
                p: cfg.f,
            }
            .build()
            .map_err(numerical("simulate", "build_truth"))?;
            Some(MatrixTruth { a: truth.clone(), b })
        } else {
            None
        };
        let per_rep: Vec<(Vec<ResultRow>, Vec<Timing>)> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| run_replication(cfg, rho, &truth, matrix.as_ref(), &grid, r))
            .collect::<Result<_>>()?;
        for (rows, timings) in per_rep {
            out.rows.extend(rows);
            out.timings.extend(timings);
        }
    }
    let est_rank = |e: EstimatorKind| cfg.estimators.iter().position(|&x| x == e).unwrap_or(usize::MAX);
    out.rows.sort_by(|a, b| {
        est_rank(a.estimator)
            .cmp(&est_rank(b.estimator))
            .then(a.rho.total_cmp(&b.rho))
            .then(a.replication.cmp(&b.replication))
            .then(b.lambda.total_cmp(&a.lambda))
            .then(a.q.total_cmp(&b.q))
    });
    out.timings.sort_by(|a, b| {
        est_rank(a.estimator)
            .cmp(&est_rank(b.estimator))
            .then(a.rho.total_cmp(&b.rho))
            .then(a.replication.cmp(&b.replication))
    });
    Ok(out)
}

/// Per-path oracle: the grid point minimizing `kind`, ties to the larger λ.
/// Rows must be sorted as returned by [`run_scenario`].
pub fn oracle_rows(rows: &[ResultRow], kind: NormKind) -> Vec<OracleRow> {
    let mut out: Vec<OracleRow> = Vec::new();
    let Some(first_q) = rows.first().map(|r| r.q) else {
        return out;
    };
    for row in rows.iter().filter(|r| r.q == first_q) {
        let error = row.errors.get(kind);
        match out.last_mut() {
            Some(last)
                if last.estimator == row.estimator && last.rho == row.rho && last.replication == row.replication =>
            {
                // λ decreases along a path, so strict improvement keeps ties at the larger λ
                if error < last.error {
                    last.lambda = row.lambda;
                    last.error = error;
                }
            }
            _ => out.push(OracleRow {
                estimator: row.estimator,
                rho: row.rho,
                replication: row.replication,
                lambda: row.lambda,
                error,
                sigma_error: row.bound.sigma_error,
            }),
        }
    }
    out
}

const RESULT_HEADER: [&str; 17] = [
    "scenario",
    "estimator",
    "rho",
    "replication",
    "lambda",
    "q",
    "elementwise_inf",
    "spectral",
    "l1",
    "frobenius",
    "scaled_frobenius",
    "sigma_error",
    "hypotheses_hold",
    "bounds_satisfied",
    "converged",
    "max_kkt_residual",
    "sweeps",
];

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = RESULT_HEADER.join(",");
    s.push('\n');
    for r in rows {
        let fields = [
            r.scenario.name().to_string(),
            r.estimator.name().to_string(),
            format_f64(r.rho),
            r.replication.to_string(),
            format_f64(r.lambda),
            format_f64(r.q),
            format_f64(r.errors.elementwise_inf),
            format_f64(r.errors.spectral),
            format_f64(r.errors.l1),
            format_f64(r.errors.frobenius),
            format_f64(r.errors.scaled_frobenius),
            format_f64(r.bound.sigma_error),
            r.bound.hypotheses_hold.to_string(),
            r.bound.all_satisfied().to_string(),
            r.converged.to_string(),
            format_f64(r.max_kkt_residual),
            r.sweeps.to_string(),
        ];
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

fn timings_csv(timings: &[Timing]) -> String {
    let mut s = String::from("estimator,rho,replication,seconds\n");
    for t in timings {
        s.push_str(&format!(
            "{},{},{},{}\n",
            t.estimator.name(),
            format_f64(t.rho),
            t.replication,
            format_f64(t.seconds)
        ));
    }
    s
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    sum / count as f64
}

fn distinct_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Mean oracle error per `(estimator, ρ)` for every norm, plus the λ that
/// minimizes the mean error curve.
fn summary_csv(cfg: &ScenarioConfig, rows: &[ResultRow]) -> String {
    let mut s = String::from("estimator,rho,norm,mean_oracle_error,curve_argmin_lambda,curve_min_error\n");
    let first_q = cfg.q[0];
    for kind in NormKind::ALL {
        let oracle = oracle_rows(rows, kind);
        for &est in &cfg.estimators {
            for &rho in &cfg.rho {
                let m = mean(
                    oracle
                        .iter()
                        .filter(|o| o.estimator == est && o.rho == rho)
                        .map(|o| o.error),
                );
                let series: Vec<&ResultRow> = rows
                    .iter()
                    .filter(|r| r.estimator == est && r.rho == rho && r.q == first_q)
                    .collect();
                let lambdas = distinct_sorted(series.iter().map(|r| r.lambda));
                let (best_l, best_e) = lambdas
                    .iter()
                    .rev()
                    .map(|&l| {
                        (
                            l,
                            mean(series.iter().filter(|r| r.lambda == l).map(|r| r.errors.get(kind))),
                        )
                    })
                    .fold(
                        (f64::NAN, f64::INFINITY),
                        |acc, (l, e)| if e < acc.1 { (l, e) } else { acc },
                    );
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    est.name(),
                    format_f64(rho),
                    kind.name(),
                    format_f64(m),
                    format_f64(best_l),
                    format_f64(best_e)
                ));
            }
        }
    }
    s
}

/// One chart per norm. The diamond sweep plots oracle error against ρ; the
/// other scenarios plot the mean error path against λ.
pub fn charts(cfg: &ScenarioConfig, rows: &[ResultRow]) -> Vec<(NormKind, Chart)> {
    let first_q = cfg.q[0];
    NormKind::ALL
        .into_iter()
        .map(|kind| {
            let chart = if cfg.scenario == Scenario::DiamondSweep {
                let oracle = oracle_rows(rows, kind);
                Chart {
                    title: format!("{}: oracle-tuned {} error", cfg.scenario.name(), kind.name()),
                    x_label: "rho".into(),
                    y_label: format!("mean {} error", kind.name()),
                    log_x: false,
                    series: cfg
                        .estimators
                        .iter()
                        .map(|&est| Series {
                            label: est.name().into(),
                            points: cfg
                                .rho
                                .iter()
                                .map(|&rho| {
                                    (
                                        rho,
                                        mean(
                                            oracle
                                                .iter()
                                                .filter(|o| o.estimator == est && o.rho == rho)
                                                .map(|o| o.error),
                                        ),
                                    )
                                })
                                .collect(),
                        })
                        .collect(),
                }
            } else {
                let mut series = Vec::new();
                for &est in &cfg.estimators {
                    for &rho in &cfg.rho {
                        let sel: Vec<&ResultRow> = rows
                            .iter()
                            .filter(|r| r.estimator == est && r.rho == rho && r.q == first_q)
                            .collect();
                        let points = distinct_sorted(sel.iter().map(|r| r.lambda))
                            .into_iter()
                            .map(|l| {
                                (
                                    l,
                                    mean(sel.iter().filter(|r| r.lambda == l).map(|r| r.errors.get(kind))),
                                )
                            })
                            .collect();
                        series.push(Series {
                            label: format!("{} rho={rho}", est.name()),
                            points,
                        });
                    }
                }
                Chart {
                    title: format!("{}: {} error", cfg.scenario.name(), kind.name()),
                    x_label: "lambda".into(),
                    y_label: format!("mean {} error", kind.name()),
                    log_x: true,
                    series,
                }
            };
            (kind, chart)
        })
        .collect()
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    rng: &'static str,
    threads: usize,
    config: &'a ScenarioConfig,
    rows: usize,
    non_converged_rows: usize,
    notes: Vec<&'static str>,
    files: Vec<String>,
}

/// Writes `results.csv`, `summary.csv`, `timings.csv`, one SVG per norm and
/// `metadata.json` into `cfg.out`.
pub fn write_outputs(cfg: &ScenarioConfig, output: &ExperimentOutput, threads: usize) -> Result<Vec<String>> {
    let dir = cfg.out.as_path();
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = vec!["results.csv".to_string(), "summary.csv".into(), "timings.csv".into()];
    write_text(&dir.join("results.csv"), &results_csv(&output.rows))?;
    write_text(&dir.join("summary.csv"), &summary_csv(cfg, &output.rows))?;
    write_text(&dir.join("timings.csv"), &timings_csv(&output.timings))?;
    for (kind, chart) in charts(cfg, &output.rows) {
        let name = format!("error_{}.svg", kind.name());
        write_text(&dir.join(&name), &chart.render())?;
        files.push(name);
    }
    let mut notes = Vec::new();
    if cfg.sampler == crate::config::Sampler::T {
        notes.push("t data use scale matrix (nu-2)/nu * Sigma so the population covariance equals Sigma");
    }
    if cfg.scenario == Scenario::MatrixData {
        notes.push("errors refer to the Kronecker product; bound columns refer to the column factor");
    }
    files.push("metadata.json".into());
    let meta = Metadata {
        tool: "wsp",
        version: env!("CARGO_PKG_VERSION"),
        rng: RNG_ALGORITHM,
        threads,
        config: cfg,
        rows: output.rows.len(),
        non_converged_rows: output.rows.iter().filter(|r| !r.converged).count(),
        notes,
        files: files.clone(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| CliError::config(e.to_string()))?;
    write_text(&dir.join("metadata.json"), &(json + "\n"))?;
    Ok(files)
}

/// Convenience for tests and the CLI: run and write in one step.
pub fn run_and_write(cfg: &ScenarioConfig, threads: usize) -> Result<ExperimentOutput> {
    let out = run_scenario(cfg)?;
    write_outputs(cfg, &out, threads)?;
    Ok(out)
}
