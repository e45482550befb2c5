use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use wsp::covariance::{
    huber_covariance, rank_correlation_matrix, sample_covariance, CovarianceEstimate, RankMethod, DEFAULT_EPSILON,
    DEFAULT_HUBER_K,
};
use wsp::scio::{kkt_report, log_grid, scio_estimate, scio_path, PrecisionEstimate};
use wsp::simulate::{
    rng_for, sample_gaussian_with, sample_matrix_normal_with, sample_mvt_with, sample_nonparanormal_with,
    TruthConstructor, TruthSpec, RNG_ALGORITHM,
};
use wsp::Matrix;

use crate::config::{EstimatorKind, Overrides, Sampler, Scenario, ScenarioConfig};
use crate::csvio::{format_f64, read_data_matrix, write_matrix, write_text};
use crate::error::{numerical, CliError, Result};
use crate::experiment::{run_scenario, write_outputs, ResultRow};

#[derive(Debug, Parser)]
#[command(name = "wsp", version, about = "Sparse precision matrix estimation and simulation")]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Shared {
    /// JSON scenario configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "WSP_THREADS")]
    pub threads: Option<usize>,
    /// Full-size dimensions (p = 100; m = 80, f = 40) instead of desk scale.
    #[arg(long, global = true)]
    pub paper_scale: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a precision matrix from a CSV data file.
    Estimate(EstimateArgs),
    /// Write the truth and sampled data of a scenario.
    Simulate(ScenarioArgs),
    /// Run a scenario and write results, summaries and plots.
    Experiment(ScenarioArgs),
    /// Evaluate the deterministic error bounds along a scenario's λ grid.
    CheckBounds(ScenarioArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Data file, one observation per row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "sample")]
    pub estimator: EstimatorKind,
    #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
    pub lambda: Option<f64>,
    /// Log grid from 1 as `count,decades`.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, f64)>,
    #[arg(long, default_value_t = DEFAULT_HUBER_K)]
    pub k_const: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// The data file has a header row; output matrices get one too.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Run a scenario with its defaults when no configuration file is given.
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Option<Scenario>,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, f64), String> {
    let (count, decades) = s.split_once(',').ok_or("expected count,decades")?;
    let count: usize = count.trim().parse().map_err(|e| format!("count: {e}"))?;
    let decades: f64 = decades.trim().parse().map_err(|e| format!("decades: {e}"))?;
    if count == 0 || !(decades >= 0.0) || (count > 1 && decades == 0.0) {
        return Err("need count >= 1 and positive decades".into());
    }
    Ok((count, decades))
}

fn parse_scenario(s: &str) -> std::result::Result<Scenario, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown scenario {s:?}"))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cli.shared.threads {
        if k == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| CliError::config(e.to_string()))?;
    let threads = pool.current_num_threads();
    pool.install(|| match &cli.command {
        Command::Estimate(args) => estimate(&cli.shared, args),
        Command::Simulate(args) => simulate(&resolve(&cli.shared, args)?),
        Command::Experiment(args) => {
            let cfg = resolve(&cli.shared, args)?;
            let out = run_scenario(&cfg)?;
            let files = write_outputs(&cfg, &out, threads)?;
            println!(
                "{}: {} rows written to {} ({})",
                cfg.scenario.name(),
                out.rows.len(),
                cfg.out.display(),
                files.join(", ")
            );
            Ok(())
        }
        Command::CheckBounds(args) => check_bounds(&resolve(&cli.shared, args)?),
    })
}

fn resolve(shared: &Shared, args: &ScenarioArgs) -> Result<ScenarioConfig> {
    let overrides = Overrides {
        seed: shared.seed,
        out: shared.out.clone(),
        paper_scale: shared.paper_scale,
    };
    match (&shared.config, args.scenario) {
        (Some(path), None) => ScenarioConfig::load(path, &overrides),
        (None, Some(s)) => {
            let text = serde_json::json!({ "scenario": s }).to_string();
            ScenarioConfig::from_json(&text, None, &overrides)
        }
        (Some(_), Some(_)) => Err(CliError::config("give either --config or --scenario, not both")),
        (None, None) => Err(CliError::config("--config <path> or --scenario <name> is required")),
    }
}

#[derive(Serialize)]
struct EstimateEntry {
    file: String,
    lambda: f64,
    converged: bool,
    max_kkt_residual: f64,
    max_dual_violation: f64,
    max_stationarity_violation: f64,
    kkt_certified: bool,
    sweeps: usize,
}

#[derive(Serialize)]
struct EstimateMetadata {
    data: PathBuf,
    n: usize,
    p: usize,
    estimator: &'static str,
    huber_h: Option<f64>,
    projected: bool,
    epsilon: Option<f64>,
    estimates: Vec<EstimateEntry>,
}

fn estimate(shared: &Shared, args: &EstimateArgs) -> Result<()> {
    let data = read_data_matrix(&args.data, args.header)?;
    if data.n() < 2 {
        return Err(CliError::Data {
            path: args.data.clone(),
            row: 1,
            column: 1,
            message: format!("need at least 2 observations, found {}", data.n()),
        });
    }
    if !(args.epsilon > 0.0) || !(args.k_const > 0.0) {
        return Err(CliError::config("--epsilon and --k-const must be positive"));
    }
    let pilot: CovarianceEstimate = match args.estimator {
        EstimatorKind::Sample => sample_covariance(&data).map_err(numerical("covariance", "sample_covariance"))?,
        EstimatorKind::Huber => {
            huber_covariance(&data, args.k_const, args.epsilon).map_err(numerical("covariance", "huber_covariance"))?
        }
        EstimatorKind::Spearman => rank_correlation_matrix(&data, RankMethod::Spearman, args.epsilon)
            .map_err(numerical("covariance", "rank_correlation_matrix"))?,
        EstimatorKind::Kendall => rank_correlation_matrix(&data, RankMethod::Kendall, args.epsilon)
            .map_err(numerical("covariance", "rank_correlation_matrix"))?,
        other => {
            return Err(CliError::config(format!(
                "estimator {} needs simulated data; use the experiment command",
                other.name()
            )))
        }
    };
    let estimates: Vec<PrecisionEstimate> = match (args.lambda, args.grid) {
        (Some(lambda), _) => {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(CliError::config(format!("--lambda must be positive, got {lambda}")));
            }
            vec![scio_estimate(&pilot.matrix, lambda, None).map_err(numerical("scio", "scio_estimate"))?]
        }
        (None, Some((count, decades))) => {
            scio_path(&pilot.matrix, &log_grid(1.0, count, decades))
                .map_err(numerical("scio", "scio_path"))?
                .estimates
        }
        (None, None) => return Err(CliError::config("--lambda or --grid is required")),
    };
    let out = shared.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let names = column_names(&args.data, args.header, data.p())?;
    let mut entries = Vec::new();
    for (k, est) in estimates.iter().enumerate() {
        let file = if estimates.len() == 1 {
            "precision.csv".to_string()
        } else {
            format!("precision_{k:03}.csv")
        };
        write_matrix(&out.join(&file), est.omega_tilde.as_matrix(), names.as_deref())?;
        let kkt = kkt_report(&pilot.matrix, est).map_err(numerical("scio", "kkt_report"))?;
        entries.push(EstimateEntry {
            file,
            lambda: est.lambda,
            converged: est.converged(),
            max_kkt_residual: est.max_kkt_residual(),
            max_dual_violation: kkt.max_dual_violation,
            max_stationarity_violation: kkt.max_stationarity_violation,
            kkt_certified: kkt.certified(),
            sweeps: est.total_sweeps(),
        });
    }
    let meta = EstimateMetadata {
        data: args.data.clone(),
        n: data.n(),
        p: data.p(),
        estimator: args.estimator.name(),
        huber_h: pilot.huber_h,
        projected: pilot.projected,
        epsilon: pilot.epsilon,
        estimates: entries,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| CliError::config(e.to_string()))?;
    write_text(&out.join("precision.json"), &(json + "\n"))?;
    println!("{} estimate(s) written to {}", estimates.len(), out.display());
    Ok(())
}

fn column_names(path: &Path, header: bool, p: usize) -> Result<Option<Vec<String>>> {
    if !header {
        return Ok(None);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::io(path, e.into()))?;
    let names = reader.headers().map_err(|e| CliError::io(path, e.into()))?;
    if names.len() == p {
        Ok(Some(names.iter().map(str::to_string).collect()))
    } else {
        Ok(Some((1..=p).map(|j| format!("v{j}")).collect()))
    }
}

fn simulate(cfg: &ScenarioConfig) -> Result<()> {
    let dir = &cfg.out;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for (k, &rho) in cfg.rho.iter().enumerate() {
        let dim = if cfg.scenario == Scenario::MatrixData {
            cfg.m
        } else {
            cfg.p
        };
        let truth = TruthSpec {
            constructor: cfg.truth,
            rho,
            p: dim,
        }
        .build()
        .map_err(numerical("simulate", "build_truth"))?;
        let mut write = |name: String, m: &Matrix| -> Result<()> {
            write_matrix(&dir.join(&name), m, None)?;
            files.push(name);
            Ok(())
        };
        write(format!("omega_rho{k}.csv"), truth.omega.as_matrix())?;
        write(format!("sigma_rho{k}.csv"), truth.sigma.as_matrix())?;
        let b = if cfg.scenario == Scenario::MatrixData {
            let b = TruthSpec {
                constructor: TruthConstructor::CorrelationOfInverse,
                rho: cfg.rho_b,
                p: cfg.f,
            }
            .build()
            .map_err(numerical("simulate", "build_truth"))?;
            write(format!("omega_b_rho{k}.csv"), b.omega.as_matrix())?;
            write(format!("sigma_b_rho{k}.csv"), b.sigma.as_matrix())?;
            Some(b)
        } else {
            None
        };
        for r in 0..cfg.replications {
            let mut rng = rng_for(cfg.seed, r as u64);
            let data = match cfg.sampler {
                Sampler::Gaussian => sample_gaussian_with(cfg.n, &truth.sigma, &mut rng)
                    .map_err(numerical("simulate", "sample_gaussian"))?
                    .values()
                    .clone(),
                Sampler::T => sample_mvt_with(cfg.n, &truth.sigma, cfg.nu, &mut rng)
                    .map_err(numerical("simulate", "sample_mvt"))?
                    .values()
                    .clone(),
                Sampler::Nonparanormal => {
                    sample_nonparanormal_with(cfg.n, &truth.sigma, cfg.mu_g0, cfg.sigma_g0, &mut rng)
                        .map_err(numerical("simulate", "sample_nonparanormal"))?
                        .0
                        .values()
                        .clone()
                }
                Sampler::MatrixNormal => {
                    let b = b.as_ref().expect("row factor built for matrix data");
                    let samples = sample_matrix_normal_with(cfg.n, &truth.sigma, &b.sigma, &mut rng)
                        .map_err(numerical("simulate", "sample_matrix_normal"))?;
                    // one row per sample: vec(X) stacking columns
                    let (f, m) = (cfg.f, cfg.m);
                    Matrix::from_fn(cfg.n, m * f, |t, idx| samples[t][(idx % f, idx / f)])
                }
            };
            write(format!("data_rho{k}_rep{r}.csv"), &data)?;
        }
    }
    #[derive(Serialize)]
    struct SimMetadata<'a> {
        rng: &'static str,
        config: &'a ScenarioConfig,
        files: &'a [String],
    }
    let json = serde_json::to_string_pretty(&SimMetadata {
        rng: RNG_ALGORITHM,
        config: cfg,
        files: &files,
    })
    .map_err(|e| CliError::config(e.to_string()))?;
    write_text(&dir.join("simulate.json"), &(json + "\n"))?;
    println!("{} files written to {}", files.len() + 1, dir.display());
    Ok(())
}

const BOUND_HEADER: [&str; 21] = [
    "estimator",
    "rho",
    "replication",
    "lambda",
    "q",
    "s_p",
    "m_p",
    "sigma_error",
    "lambda_condition",
    "sparsity_statistic",
    "hypotheses_hold",
    "column_l1_lhs",
    "column_l1_rhs",
    "column_inf_lhs",
    "column_inf_rhs",
    "matrix_inf_lhs",
    "matrix_inf_rhs",
    "matrix_l1_lhs",
    "matrix_l1_rhs",
    "all_satisfied",
    "converged",
];

fn bound_fields(r: &ResultRow) -> Vec<String> {
    let b = &r.bound;
    vec![
        r.estimator.name().into(),
        format_f64(r.rho),
        r.replication.to_string(),
        format_f64(r.lambda),
        format_f64(r.q),
        format_f64(b.s_p),
        format_f64(b.m_p),
        format_f64(b.sigma_error),
        b.lambda_condition.to_string(),
        format_f64(b.sparsity_statistic),
        b.hypotheses_hold.to_string(),
        format_f64(b.column_l1.lhs),
        format_f64(b.column_l1.rhs),
        format_f64(b.column_inf.lhs),
        format_f64(b.column_inf.rhs),
        format_f64(b.matrix_inf.lhs),
        format_f64(b.matrix_inf.rhs),
        format_f64(b.matrix_l1.lhs),
        format_f64(b.matrix_l1.rhs),
        b.all_satisfied().to_string(),
        r.converged.to_string(),
    ]
}

/// Rows whose hypotheses hold but whose bounds fail on a converged solve.
pub fn bound_violations(rows: &[ResultRow]) -> Vec<&ResultRow> {
    rows.iter()
        .filter(|r| r.converged && r.bound.hypotheses_hold && !r.bound.all_satisfied())
        .collect()
}

pub fn render_bound_table(rows: &[ResultRow]) -> String {
    let mut s =
        format!(
        "{:<10} {:>6} {:>4} {:>10} {:>4} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>4}\n",
        "estimator", "rho", "rep", "lambda", "q", "hyp", "col_l1", "bound", "col_inf", "bound", "mat_inf", "bound",
        "mat_l1", "bound", "sigma_err", "ok"
    );
    for r in rows {
        let b = &r.bound;
        s.push_str(&format!(
            "{:<10} {:>6.3} {:>4} {:>10.3e} {:>4.2} {:>6} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>4}\n",
            r.estimator.name(),
            r.rho,
            r.replication,
            r.lambda,
            r.q,
            b.hypotheses_hold,
            b.column_l1.lhs,
            b.column_l1.rhs,
            b.column_inf.lhs,
            b.column_inf.rhs,
            b.matrix_inf.lhs,
            b.matrix_inf.rhs,
            b.matrix_l1.lhs,
            b.matrix_l1.rhs,
            b.sigma_error,
            if b.all_satisfied() { "yes" } else { "no" },
        ));
    }
    s
}

fn check_bounds(cfg: &ScenarioConfig) -> Result<()> {
    let out = run_scenario(cfg)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let mut csv = BOUND_HEADER.join(",");
    csv.push('\n');
    for r in &out.rows {
        csv.push_str(&bound_fields(r).join(","));
        csv.push('\n');
    }
    write_text(&cfg.out.join("bounds.csv"), &csv)?;
    print!("{}", render_bound_table(&out.rows));
    let holding = out.rows.iter().filter(|r| r.bound.hypotheses_hold).count();
    println!(
        "{} rows, hypotheses hold on {}, bounds.csv written to {}",
        out.rows.len(),
        holding,
        cfg.out.display()
    );
    let violations = bound_violations(&out.rows);
    if let Some(first) = violations.first() {
        return Err(CliError::Numerical {
            module: "theory",
            operation: "check_bounds",
            message: format!(
                "{} bound violation(s) under valid hypotheses, first at lambda = {}",
                violations.len(),
                first.lambda
            ),
        });
    }
    Ok(())
}
