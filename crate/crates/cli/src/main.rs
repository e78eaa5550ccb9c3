use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clot_core::experiments::{
    run_study, Generator, MethodSpec, ScalingFixture, ScenarioConfig, StudyReport, Tuning,
};
use clot_core::matrices::{
    devore_matrix, devore_min_prime, parse_matrix, test_matrix, to_csv, to_triplets, DeVoreParams, PrimeChoice,
    TestMatrix,
};
use clot_core::rip::{certificate, error_bounds, exact_rip_with_limit, MAX_SUPPORTS};
use clot_core::solvers::{solve_constrained, solve_lagrangian};
use clot_core::{LambdaSide, Partition, Problem, RegularizerKind, RegularizerSpec, SolverOptions};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

const TOOL: &str = "clot";

#[derive(Parser, Debug, Serialize)]
#[command(name = "clot", version, about = "Sparse recovery with combined ℓ1/ℓ2 penalties")]
struct Cli {
    /// Worker thread cap for parallel sections.
    #[arg(long, global = true, env = "CLOT_THREADS")]
    threads: Option<usize>,
    /// Write the JSON envelope here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
enum Command {
    /// Solve a Lagrangian or constrained recovery problem.
    Solve(SolveArgs),
    /// Robust null space certificate from a restricted isometry constant.
    Certificate(CertificateArgs),
    /// Generate a measurement matrix.
    Matrix(MatrixArgs),
    /// Run a study from a scenario config.
    Experiment(ExperimentArgs),
    /// Exact restricted isometry constant by support enumeration.
    Riporacle(RipArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FormArg {
    Lagrangian,
    Constrained,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SideArg {
    Loss,
    Penalty,
}

#[derive(Args, Debug, Serialize)]
struct SolveArgs {
    /// Measurement matrix (CSV or triplets).
    #[arg(short = 'A', long = "matrix")]
    a: PathBuf,
    /// Observations, one value per line.
    #[arg(short = 'y', long = "obs")]
    y: PathBuf,
    #[arg(long, value_enum, default_value = "lagrangian")]
    form: FormArg,
    /// Regularizer: l1|lasso, ridge, en, clot, gl, sgl.
    #[arg(long = "reg", default_value = "clot")]
    reg: String,
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    /// Comma-separated contiguous group sizes, for gl and sgl.
    #[arg(long, value_delimiter = ',')]
    groups: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Which term the multiplier weights.
    #[arg(long, value_enum, default_value = "penalty")]
    side: SideArg,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[command(flatten)]
    solver: SolverFlags,
    /// Write x̂ as a single-column CSV.
    #[arg(long)]
    x_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SolverFlags {
    #[arg(long, default_value_t = SolverOptions::default().kkt_tol)]
    kkt_tol: f64,
    #[arg(long, default_value_t = SolverOptions::default().feas_tol)]
    feas_tol: f64,
    #[arg(long, default_value_t = SolverOptions::default().obj_tol)]
    obj_tol: f64,
    #[arg(long, default_value_t = SolverOptions::default().max_iters)]
    max_iters: usize,
}

impl SolverFlags {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            kkt_tol: self.kkt_tol,
            feas_tol: self.feas_tol,
            obj_tol: self.obj_tol,
            max_iters: self.max_iters,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct CertificateArgs {
    #[arg(long)]
    t: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    g: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    mu: f64,
    /// Best k-term approximation error; adds error bounds when given.
    #[arg(long)]
    sigma_k: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Args, Debug, Serialize)]
struct MatrixArgs {
    #[command(subcommand)]
    kind: MatrixKind,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FormatArg {
    Csv,
    Triplets,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum MatrixKind {
    /// Binary polynomial matrix; give --p, or --t/--k/--delta to choose it.
    Devore {
        #[arg(long)]
        p: Option<u64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        r: u32,
        /// Skip a prime threshold.
        #[arg(long)]
        strict: bool,
        /// Keep 0/1 entries instead of scaling columns to unit norm.
        #[arg(long)]
        raw: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Identity, Gaussian or duplicated-column fixture.
    Fixture {
        #[arg(long, value_enum)]
        which: FixtureArg,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FixtureArg {
    Identity,
    Gaussian,
    Duplicated,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum StudyArg {
    Comparison,
    Grouping,
    Paths,
    Scaling,
}

#[derive(Args, Debug, Serialize)]
struct ExperimentArgs {
    #[arg(value_enum)]
    study: StudyArg,
    /// Scenario config (JSON); optional for scaling.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the 121 × 1000 scaling fixture.
    #[arg(long)]
    small: bool,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replication count.
    #[arg(long)]
    replications: Option<usize>,
    /// Directory for CSV tables.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct RipArgs {
    #[arg(short = 'A', long = "matrix")]
    a: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = MAX_SUPPORTS)]
    max_supports: u128,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Input(String),
    NotConverged(Value),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<Value, Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>, Failure> {
    parse_matrix(&read_text(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_vector(path: &Path) -> Result<DVector<f64>, Failure> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(Failure::Input(format!(
            "{}: expected a single column, found {}",
            path.display(),
            m.ncols()
        )));
    }
    Ok(DVector::from_column_slice(m.as_slice()))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn cmd_solve(args: &SolveArgs) -> Outcome {
    let a = read_matrix(&args.a)?;
    let y = read_vector(&args.y)?;
    let kind: RegularizerKind = args.reg.parse()?;
    let spec = match kind {
        RegularizerKind::L1 => RegularizerSpec::l1(),
        RegularizerKind::L2Sq => RegularizerSpec::ridge(),
        RegularizerKind::ElasticNet => RegularizerSpec::elastic_net(args.mu),
        RegularizerKind::Clot => RegularizerSpec::clot(args.mu),
        RegularizerKind::GroupLasso | RegularizerKind::SparseGroupLasso => {
            let partition = match &args.groups {
                Some(sizes) => Partition::contiguous(sizes)?,
                None => Partition::single(a.ncols())?,
            };
            if kind == RegularizerKind::GroupLasso {
                RegularizerSpec::group_lasso(partition)
            } else {
                RegularizerSpec::sparse_group_lasso(args.mu, partition)
            }
        }
    };
    let opts = args.solver.options();
    let result = match args.form {
        FormArg::Lagrangian => {
            let side = match args.side {
                SideArg::Loss => LambdaSide::OnLoss,
                SideArg::Penalty => LambdaSide::OnPenalty,
            };
            solve_lagrangian(&Problem::lagrangian(a, y, args.lambda, side)?, &spec, &opts)?
        }
        FormArg::Constrained => solve_constrained(&Problem::constrained(a, y, args.eps)?, &spec, &opts)?,
    };
    if let Some(path) = &args.x_out {
        write_text(path, &to_csv(&DMatrix::from_column_slice(result.x_hat.len(), 1, &result.x_hat)))?;
    }
    let out = json!({ "regularizer": spec, "solver_options": opts, "result": result });
    if result.converged {
        Ok(out)
    } else {
        Err(Failure::NotConverged(out))
    }
}

fn cmd_certificate(args: &CertificateArgs) -> Outcome {
    let cert = certificate(args.t, args.k, args.delta, args.g, args.mu)?;
    let mut out = json!({ "certificate": cert });
    if let Some(sigma_k) = args.sigma_k {
        out["error_bounds"] = serde_json::to_value(error_bounds(&cert, sigma_k, args.epsilon, args.p)?)?;
    }
    Ok(out)
}

fn emit_matrix(a: &DMatrix<f64>, out: &Option<PathBuf>, format: FormatArg) -> Result<Value, Failure> {
    if let Some(path) = out {
        let text = match format {
            FormatArg::Csv => to_csv(a),
            FormatArg::Triplets => to_triplets(a),
        };
        write_text(path, &text)?;
    }
    Ok(json!({ "rows": a.nrows(), "cols": a.ncols(), "path": out }))
}

fn cmd_matrix(args: &MatrixArgs) -> Outcome {
    match &args.kind {
        MatrixKind::Devore {
            p,
            t,
            k,
            delta,
            n,
            r,
            strict,
            raw,
            out,
            format,
        } => {
            let choice: Option<PrimeChoice> = match (p, t, k, delta) {
                (Some(_), _, _, _) => None,
                (None, Some(t), Some(k), Some(delta)) => Some(devore_min_prime(*t, *k, *delta, *n, *r, *strict)?),
                _ => return Err(Failure::Input("give --p, or all of --t, --k and --delta".into())),
            };
            let p = p.unwrap_or_else(|| choice.map_or(0, |c| c.p));
            let params = DeVoreParams {
                p,
                r: *r,
                n_truncate: Some(*n),
            };
            let a = devore_matrix(&params, !raw)?;
            let mut v = emit_matrix(&a, out, *format)?;
            v["params"] = serde_json::to_value(params)?;
            v["prime_choice"] = serde_json::to_value(choice)?;
            Ok(v)
        }
        MatrixKind::Fixture {
            which,
            m,
            n,
            seed,
            out,
            format,
        } => {
            let kind = match which {
                FixtureArg::Identity => TestMatrix::Identity,
                FixtureArg::Gaussian => TestMatrix::Gaussian { seed: *seed },
                FixtureArg::Duplicated => TestMatrix::DuplicatedColumn,
            };
            let a = test_matrix(kind, *m, *n)?;
            let mut v = emit_matrix(&a, out, *format)?;
            v["fixture"] = serde_json::to_value(kind)?;
            Ok(v)
        }
    }
}

fn resolve_scenario(args: &ExperimentArgs) -> Result<ScenarioConfig, Failure> {
    let mut cfg: ScenarioConfig = match &args.config {
        Some(path) => {
            serde_json::from_str(&read_text(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?
        }
        None if args.study == StudyArg::Scaling => ScenarioConfig {
            name: "scaling".into(),
            generator: Generator::ScalingFixture(ScalingFixture::full()),
            replications: 1,
            seed: 0,
            methods: vec![
                MethodSpec::new("clot", RegularizerKind::Clot, Some(0.2)),
                MethodSpec::new("en", RegularizerKind::ElasticNet, Some(0.8)),
            ],
            tuning: Tuning::default(),
        },
        None => return Err(Failure::Input("--config is required for this study".into())),
    };
    if args.small {
        match &mut cfg.generator {
            Generator::ScalingFixture(f) => *f = ScalingFixture::small(),
            _ => return Err(Failure::Input("--small applies to the scaling study only".into())),
        }
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    let expected = match cfg.generator {
        Generator::LinearModel(_) => StudyArg::Comparison,
        Generator::GroupingFixture(_) => StudyArg::Grouping,
        Generator::PathFixture(_) => StudyArg::Paths,
        Generator::ScalingFixture(_) => StudyArg::Scaling,
    };
    if expected != args.study {
        return Err(Failure::Input(format!(
            "config generator runs the {expected:?} study, not {:?}",
            args.study
        )));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_tables(dir: &Path, report: &StudyReport) -> Result<Vec<PathBuf>, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    let mut tables: Vec<(String, String)> = Vec::new();
    match report {
        StudyReport::Comparison(r) => tables.push(("records.csv".into(), r.records_csv())),
        StudyReport::GroupingPaths(r) => {
            for s in &r.series {
                tables.push((format!("path_{}.csv", s.method), s.to_csv()));
            }
        }
        StudyReport::PathNonequivalence(r) => tables.push(("matched.csv".into(), r.to_csv())),
        StudyReport::Scaling(r) => {
            let mut s = String::from("c,method,relative_error,converged,iterations,residual_l2\n");
            for row in &r.rows {
                s.push_str(&format!(
                    "{},{},{:e},{},{},{:e}\n",
                    row.c, row.method, row.relative_error, row.converged, row.iterations, row.residual_l2
                ));
            }
            tables.push(("scaling.csv".into(), s));
        }
    }
    let mut paths = Vec::new();
    for (name, text) in tables {
        let path = dir.join(name);
        write_text(&path, &text)?;
        paths.push(path);
    }
    Ok(paths)
}

fn cmd_experiment(args: &ExperimentArgs, cfg: &ScenarioConfig) -> Outcome {
    let report = run_study(cfg)?;
    let mut out = json!({ "report": report });
    if let Some(dir) = &args.csv_dir {
        out["tables"] = serde_json::to_value(write_tables(dir, &report)?)?;
    }
    Ok(out)
}

fn cmd_riporacle(args: &RipArgs) -> Outcome {
    let a = read_matrix(&args.a)?;
    let est = exact_rip_with_limit(&a, args.k, args.max_supports)?;
    Ok(json!({ "rows": a.nrows(), "cols": a.ncols(), "estimate": est }))
}

fn run(cli: &Cli, config: &mut Value) -> Outcome {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Certificate(a) => cmd_certificate(a),
        Command::Matrix(a) => cmd_matrix(a),
        Command::Experiment(a) => {
            let cfg = resolve_scenario(a)?;
            config["scenario"] = serde_json::to_value(&cfg)?;
            cmd_experiment(a, &cfg)
        }
        Command::Riporacle(a) => cmd_riporacle(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let mut config = serde_json::to_value(&cli).unwrap_or(Value::Null);
    let outcome = run(&cli, &mut config);
    let (status, code, outputs, error) = match outcome {
        Ok(v) => ("ok", 0, v, None),
        Err(Failure::NotConverged(v)) => ("not_converged", 2, v, Some("solver did not converge".to_string())),
        Err(Failure::Input(msg)) => ("error", 1, Value::Null, Some(msg)),
    };
    let mut envelope = json!({
        "tool": TOOL,
        "version": env!("CARGO_PKG_VERSION"),
        "command": config["command"]["name"],
        "config": config,
        "wall_clock_seconds": start.elapsed().as_secs_f64(),
        "status": status,
        "outputs": outputs,
    });
    if let Some(msg) = &error {
        eprintln!("error: {msg}");
        envelope["error"] = Value::String(msg.clone());
    }
    let text = serde_json::to_string_pretty(&envelope).expect("envelope serializes");
    match &cli.report {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text + "\n") {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => {
            let _ = writeln!(std::io::stdout().lock(), "{text}");
        }
    }
    ExitCode::from(code)
}
