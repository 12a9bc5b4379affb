//! Command implementations behind the `prederr` binary.
//!
//! Each command returns its machine-readable output, a one-line human
//! summary and an exit code; `main` does the printing. Exit codes: 0 ok,
//! 1 usage, 2 no error found, 3 not realizable, 4 environment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use prederr::diagnosis::{classify_prediction_error, classify_training_error, Setting};
use prederr::domain::{featurize, featurize_training_set, FeatureSet};
use prederr::invalidation::{InvalidationError, InvalidationSearch, SearchMode, DEFAULT_BUDGET};
use prederr::learners::{fit, predict, training_errors, Hypothesis, LearnerKind, LearnerSpec};
use prederr::protocol::{run_with_oracle_teacher, Outcome, Phase};
use prederr::scenarios::{self, Scenario, ScenarioError};
use prederr_service::boundary::{linear_segment, Bounds};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NO_ERROR: u8 = 2;
pub const EXIT_NOT_REALIZABLE: u8 = 3;
pub const EXIT_ENVIRONMENT: u8 = 4;

/// λ values reproduced by `figure1`.
pub const FIGURE1_LAMBDAS: [f64; 3] = [0.0, 0.5, 1.0];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Environment(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Internal(_) => EXIT_USAGE,
            CliError::Environment(_) => EXIT_ENVIRONMENT,
        }
    }
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "prederr", version, about = "Diagnose prediction errors and run error-driven teaching")]
pub struct Cli {
    /// Suppress the human summary on stderr.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a prediction error as mislabeling, representation, learner or boundary.
    Diagnose(DiagnoseArgs),
    /// Run the teaching protocol with an automated teacher; prints the event log.
    Teach(TeachArgs),
    /// Find a minimum (or greedy) invalidation set of the scenario's training set.
    Invalidate(InvalidateArgs),
    /// Fit the Figure-1 fixture at λ = 0, 0.5 and 1.0 and emit CSV.
    Figure1(Figure1Args),
    /// Serve teaching sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnerName {
    #[value(name = "logreg-ml")]
    LogregMl,
    #[value(name = "logreg-reg")]
    LogregReg,
    #[value(name = "1nn")]
    OneNn,
    #[value(name = "knn")]
    Knn,
}

#[derive(Debug, Clone, Args)]
pub struct LearnerArgs {
    #[arg(long, value_enum, default_value = "logreg-ml")]
    pub learner: LearnerName,
    /// Regularization weight; required by logreg-reg.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Neighbor count; required by knn.
    #[arg(long)]
    pub k: Option<usize>,
}

impl LearnerArgs {
    pub fn spec(&self) -> Result<LearnerSpec, CliError> {
        let usage = |m: &str| CliError::Usage(m.to_owned());
        if self.lambda.is_some() && self.learner != LearnerName::LogregReg {
            return Err(usage("--lambda only applies to --learner logreg-reg"));
        }
        if self.k.is_some() && self.learner != LearnerName::Knn {
            return Err(usage("--k only applies to --learner knn"));
        }
        let kind = match self.learner {
            LearnerName::LogregMl => LearnerKind::LogregMl,
            LearnerName::OneNn => LearnerKind::OneNn,
            LearnerName::LogregReg => {
                LearnerKind::LogregReg { lambda: self.lambda.ok_or_else(|| usage("logreg-reg needs --lambda"))? }
            }
            LearnerName::Knn => LearnerKind::Knn { k: self.k.ok_or_else(|| usage("knn needs --k"))? },
        };
        LearnerSpec::new(kind).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    /// Scenario file, or the name of a built-in scenario.
    pub scenario: String,
    #[command(flatten)]
    pub learner: LearnerArgs,
    /// Object whose prediction to diagnose. Defaults to the first training
    /// error, then the first mispredicted object.
    #[arg(long = "object")]
    pub object: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TeacherName {
    Oracle,
}

#[derive(Debug, Clone, Args)]
pub struct TeachArgs {
    pub scenario: String,
    #[command(flatten)]
    pub learner: LearnerArgs,
    #[arg(long, value_enum, default_value = "oracle")]
    pub teacher: TeacherName,
    /// Defaults to 10 times the number of objects, plus one.
    #[arg(long)]
    pub max_rounds: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeName {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Args)]
pub struct InvalidateArgs {
    pub scenario: String,
    #[command(flatten)]
    pub learner: LearnerArgs,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeName,
    /// Maximum number of subsets the exact search may check.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Figure1Args {
    /// Directory for points.csv, hypotheses.csv and boundary_<λ>.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdOutput {
    pub stdout: String,
    pub summary: String,
    pub code: u8,
}

/// Loads a scenario from a file, falling back to the built-in of that name.
pub fn resolve_scenario(arg: &str) -> Result<Scenario, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        return scenarios::load_scenario(path).map_err(|e| match e {
            ScenarioError::Io { .. } => CliError::Environment(e.to_string()),
            other => CliError::Usage(format!("{arg}: {other}")),
        });
    }
    scenarios::builtin(arg).map_err(|_| {
        CliError::Environment(format!(
            "{arg}: no such file, and not a built-in scenario ({})",
            scenarios::BUILTIN_NAMES.join(", ")
        ))
    })
}

fn write_or_return(out: &Option<PathBuf>, body: String) -> Result<String, CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, &body).map_err(|e| CliError::Environment(format!("{}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(body),
    }
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<CmdOutput, CliError> {
    let spec = args.learner.spec()?;
    let sc = resolve_scenario(&args.scenario)?;
    let fs = sc.initial_feature_set().map_err(internal)?;
    let setting = Setting { universe: &sc.universe, training: &sc.initial_training, features: &fs, spec: &spec };

    let diagnosis = match &args.object {
        Some(id) => {
            let id = id.as_str().into();
            if !sc.universe.contains(&id) {
                return Err(CliError::Usage(format!("object {id} is not in the scenario")));
            }
            classify_prediction_error(&id, setting, &sc.oracle).map_err(internal)?
        }
        None => match classify_training_error(setting, &sc.oracle).map_err(internal)? {
            Some(d) => Some(d),
            None => {
                let mut found = None;
                for id in sc.universe.ids() {
                    if let Some(d) = classify_prediction_error(id, setting, &sc.oracle).map_err(internal)? {
                        found = Some(d);
                        break;
                    }
                }
                found
            }
        },
    };
    let Some(d) = diagnosis else {
        return Ok(CmdOutput { stdout: String::new(), summary: "no prediction error found".into(), code: EXIT_NO_ERROR });
    };
    let body = serde_json::to_string_pretty(&d).map_err(internal)? + "\n";
    Ok(CmdOutput {
        summary: format!("{}: {}", d.object_id, d.label()),
        stdout: write_or_return(&args.out, body)?,
        code: EXIT_OK,
    })
}

pub fn cmd_teach(args: &TeachArgs) -> Result<CmdOutput, CliError> {
    let spec = args.learner.spec()?;
    if !spec.kind.is_consistent() {
        return Err(CliError::Usage(format!("teaching requires a consistent learner (logreg-ml or 1nn), not {}", spec.kind)));
    }
    let sc = resolve_scenario(&args.scenario)?;
    // One extra round for the final terminate.
    let max_rounds = args.max_rounds.unwrap_or(10 * sc.universe.len() as u64 + 1);
    let run = run_with_oracle_teacher(sc, spec, max_rounds).map_err(internal)?;
    let errors = run.universe_errors().map_err(internal)?;
    let s = &run.session;
    let features: Vec<String> = s.features().ids().map(|f| f.to_string()).collect();
    let (code, what) = match s.phase() {
        Phase::Done { outcome: Outcome::NotRealizable } => (EXIT_NOT_REALIZABLE, "not realizable: feature pool exhausted".to_owned()),
        _ if !run.done => (EXIT_NOT_REALIZABLE, format!("stopped after {max_rounds} rounds")),
        _ if !errors.is_empty() => (EXIT_NOT_REALIZABLE, format!("{} objects still mispredicted", errors.len())),
        _ => (EXIT_OK, "done, zero errors".to_owned()),
    };
    Ok(CmdOutput {
        summary: format!("{what}; {} rounds, |T| = {}, F = [{}]", s.round(), s.training().len(), features.join(", ")),
        stdout: write_or_return(&args.out, s.event_log_jsonl())?,
        code,
    })
}

pub fn cmd_invalidate(args: &InvalidateArgs) -> Result<CmdOutput, CliError> {
    let spec = args.learner.spec()?;
    let sc = resolve_scenario(&args.scenario)?;
    let fs = sc.initial_feature_set().map_err(internal)?;
    let mode = match args.mode {
        ModeName::Exact => SearchMode::Exact,
        ModeName::Greedy => SearchMode::Greedy,
    };
    let found = InvalidationSearch::new(&sc.universe, &fs, &spec).mode(mode).budget(args.budget).find(&sc.initial_training);
    let set = match found {
        Ok(Some(set)) => set,
        Ok(None) => {
            return Ok(CmdOutput { stdout: String::new(), summary: "training set is fit without error".into(), code: EXIT_NO_ERROR })
        }
        Err(e @ InvalidationError::BudgetExceeded { .. }) => return Err(CliError::Usage(e.to_string())),
        Err(e) => return Err(internal(e)),
    };
    let within_bound = set.bound.map(|b| set.cardinality <= b);
    let report = serde_json::json!({
        "mode": mode,
        "members": set.members.iter().map(|(id, y)| (id.clone(), y)).collect::<Vec<_>>(),
        "cardinality": set.cardinality,
        "minimum": set.minimum,
        "bound": set.bound,
        "within_bound": within_bound,
    });
    let body = serde_json::to_string_pretty(&report).map_err(internal)? + "\n";
    let bound = set.bound.map_or("no bound".to_owned(), |b| format!("bound {b}"));
    Ok(CmdOutput {
        summary: format!("invalidation set of {} examples ({bound})", set.cardinality),
        stdout: write_or_return(&args.out, body)?,
        code: EXIT_OK,
    })
}

/// One fitted λ of the Figure-1 reproduction.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Fit {
    pub lambda: f64,
    pub w: Vec<f64>,
    pub b: f64,
    pub training_errors: usize,
    /// Sampled points along the 0.5-probability boundary, inside the plot box.
    pub boundary: Vec<[f64; 2]>,
}

const BOUNDARY_SAMPLES: usize = 21;

pub fn figure1_fits() -> Result<(Scenario, Vec<Figure1Fit>), CliError> {
    let sc = scenarios::gen_figure1();
    let fs = sc.initial_feature_set().map_err(internal)?;
    let data = featurize_training_set(&fs, &sc.initial_training, &sc.universe).map_err(internal)?;
    let pts: Vec<[f64; 2]> = data.rows.iter().map(|r| [r.x[0], r.x[1]]).collect();
    let bounds = Bounds::around(&pts, 0.1).ok_or_else(|| internal("figure-1 fixture is empty"))?;
    let mut fits = Vec::new();
    for lambda in FIGURE1_LAMBDAS {
        let spec = if lambda == 0.0 { LearnerSpec::logreg_ml() } else { LearnerSpec::logreg_reg(lambda).map_err(internal)? };
        let h = fit(&spec, &data).map_err(internal)?;
        let errors = training_errors(&h, &data).map_err(internal)?.len();
        let Hypothesis::Linear(l) = h else { return Err(internal("logistic regression returned a non-linear hypothesis")) };
        let boundary = linear_segment(&l, &bounds)
            .map(|[p, q]| {
                (0..BOUNDARY_SAMPLES)
                    .map(|i| {
                        let t = i as f64 / (BOUNDARY_SAMPLES - 1) as f64;
                        [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
                    })
                    .collect()
            })
            .unwrap_or_default();
        fits.push(Figure1Fit { lambda, w: l.w, b: l.b, training_errors: errors, boundary });
    }
    Ok((sc, fits))
}

pub fn cmd_figure1(args: &Figure1Args) -> Result<CmdOutput, CliError> {
    let (sc, fits) = figure1_fits()?;
    let mut table = String::from("lambda,w1,w2,b,training_errors\n");
    for f in &fits {
        let _ = writeln!(table, "{},{},{},{},{}", f.lambda, f.w[0], f.w[1], f.b, f.training_errors);
    }
    if let Some(dir) = &args.out {
        let env = |e: std::io::Error| CliError::Environment(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(env)?;
        std::fs::write(dir.join("hypotheses.csv"), &table).map_err(env)?;

        let fs: FeatureSet = sc.initial_feature_set().map_err(internal)?;
        let mut points = String::from("x1,x2,label");
        for f in &fits {
            let _ = write!(points, ",pred_lambda_{}", f.lambda);
        }
        points.push('\n');
        for (id, y) in sc.initial_training.iter() {
            let x = featurize(&fs, sc.universe.get(id).map_err(internal)?).map_err(internal)?;
            let _ = write!(points, "{},{},{}", x[0], x[1], y);
            for f in &fits {
                let h = Hypothesis::Linear(prederr::learners::LinearHypothesis { w: f.w.clone(), b: f.b });
                let _ = write!(points, ",{}", predict(&h, &x).map_err(internal)?);
            }
            points.push('\n');
        }
        std::fs::write(dir.join("points.csv"), points).map_err(env)?;

        for f in &fits {
            let mut poly = String::from("x1,x2\n");
            for p in &f.boundary {
                let _ = writeln!(poly, "{},{}", p[0], p[1]);
            }
            std::fs::write(dir.join(format!("boundary_{}.csv", f.lambda)), poly).map_err(env)?;
        }
    }
    let summary = fits
        .iter()
        .map(|f| format!("λ={}: {} training errors", f.lambda, f.training_errors))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(CmdOutput { stdout: table, summary, code: EXIT_OK })
}

/// Binds, prints a readiness line with the bound address, and serves until
/// interrupted.
pub fn cmd_serve(args: &ServeArgs) -> Result<CmdOutput, CliError> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| CliError::Environment(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
            .await
            .map_err(|e| CliError::Environment(format!("cannot bind {}:{}: {e}", args.host, args.port)))?;
        let addr = listener.local_addr().map_err(|e| CliError::Environment(e.to_string()))?;
        println!("listening on http://{addr}");
        use std::io::Write;
        let _ = std::io::stdout().flush();
        prederr_service::serve(listener).await.map_err(|e| CliError::Environment(e.to_string()))?;
        Ok(CmdOutput { stdout: String::new(), summary: "server stopped".into(), code: EXIT_OK })
    })
}

pub fn run(cli: &Cli) -> Result<CmdOutput, CliError> {
    match &cli.command {
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Teach(a) => cmd_teach(a),
        Command::Invalidate(a) => cmd_invalidate(a),
        Command::Figure1(a) => cmd_figure1(a),
        Command::Serve(a) => cmd_serve(a),
    }
}
