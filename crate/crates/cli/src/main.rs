use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use gazepass::auth::{Algorithm, AuthConfig, AuthEngine, PasswordTriple};
use gazepass::catalog::{validate_catalog, Catalog, ShapeId, DEFAULT_SEPARATION};
use gazepass::dtree::{classify_tree, cross_validate, path_features, LabeledDataset, TreeConfig};
use gazepass::geometry::{normalize_trace, RawTrace};
use gazepass::service::{self, DEFAULT_PORT};
use gazepass::sim::{self, AlgorithmChoice, NoiseModel, Recognizers};
use gazepass::store::StoreRoot;
use gazepass::template::{classify_template, TemplateMatch};
use gazepass::trace_io;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "gazepass", version, about = "Authenticate by following moving shapes with your eyes")]
struct Cli {
    /// Directory holding enrollments, trained models and traces.
    #[arg(long, global = true, env = "GAZEPASS_STORE", default_value = "gazepass-store")]
    store: PathBuf,

    /// Catalog file. Defaults to the store's catalog.json, then the built-in catalog.
    #[arg(long, global = true, env = "GAZEPASS_CATALOG")]
    catalog: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enroll a user with a password of three shape ids, e.g. `a,f,k`.
    Enroll {
        #[arg(long)]
        user: String,
        #[arg(long)]
        password: String,
        #[arg(long, value_enum, default_value_t = AlgoArg::Template)]
        algo: AlgoArg,
    },
    /// Train per-user recognizers from DIR/<shape>/*.jsonl.
    Train {
        #[arg(long)]
        user: String,
        #[arg(long)]
        traces: PathBuf,
        /// Keep the user's existing templates and add the new ones.
        #[arg(long)]
        append: bool,
    },
    /// Classify one trace.
    Classify {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = AlgoArg::Template)]
        algo: AlgoArg,
        /// Use this user's trained recognizers.
        #[arg(long)]
        user: Option<String>,
        /// Template rejection threshold.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Run a full three-frame session from recorded traces.
    Authenticate {
        #[arg(long)]
        user: String,
        #[arg(long, num_args = 3, required = true)]
        traces: Vec<PathBuf>,
        /// Defaults to the algorithm chosen at enrollment.
        #[arg(long, value_enum)]
        algo: Option<AlgoArg>,
    },
    /// Simulated recognition benchmark.
    Bench {
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = ChoiceArg::Both)]
        algo: ChoiceArg,
        /// Benchmark this user's trained recognizers.
        #[arg(long)]
        user: Option<String>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation of the decision tree.
    CrossValidate {
        /// Feature CSV. Without it a synthetic dataset is generated.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Simulated viewers in the synthetic dataset.
        #[arg(long, default_value_t = 6)]
        users: usize,
    },
    /// Check that every pair of catalog shapes is far enough apart.
    ValidateCatalog {
        #[arg(long, default_value_t = DEFAULT_SEPARATION)]
        threshold: f64,
    },
    /// Simulate gaze traces.
    #[command(group(ArgGroup::new("mode").required(true).args(["shape", "dataset", "train_dir"])))]
    Simulate {
        /// Write one JSONL trace following this shape.
        #[arg(long)]
        shape: Option<ShapeId>,
        /// Write a labeled feature CSV of synthetic viewers.
        #[arg(long)]
        dataset: bool,
        /// Write DIR/<shape>/<n>.jsonl for every shape, ready for `train`.
        #[arg(long)]
        train_dir: Option<PathBuf>,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Disable jitter, lag and dropout.
        #[arg(long)]
        noiseless: bool,
        #[arg(long, default_value_t = 6)]
        users: usize,
        #[arg(long, default_value_t = 5)]
        trials: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the authentication service.
    Serve {
        #[arg(long, env = "GAZEPASS_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long, default_value_t = 15.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 100.0)]
    lag_ms: f64,
    #[arg(long, default_value_t = 0.02)]
    dropout: f64,
    #[arg(long, default_value_t = 30.0)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl NoiseArgs {
    fn model(&self) -> NoiseModel {
        NoiseModel {
            jitter_sigma: self.noise_sigma,
            lag_ms: self.lag_ms,
            dropout_prob: self.dropout,
            sample_rate_hz: self.rate,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Template,
    Dtree,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Template => Algorithm::Template,
            AlgoArg::Dtree => Algorithm::Dtree,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ChoiceArg {
    Template,
    Dtree,
    Both,
}

impl From<ChoiceArg> for AlgorithmChoice {
    fn from(a: ChoiceArg) -> Self {
        match a {
            ChoiceArg::Template => AlgorithmChoice::Template,
            ChoiceArg::Dtree => AlgorithmChoice::Dtree,
            ChoiceArg::Both => AlgorithmChoice::Both,
        }
    }
}

struct Failure {
    code: String,
    message: String,
}

impl Failure {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_owned(),
            message: message.into(),
        }
    }
}

impl From<gazepass::Error> for Failure {
    fn from(e: gazepass::Error) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new("io", format!("{}: {e}", path.display()))
}

type Outcome = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", json!({"error": f.code, "message": f.message}));
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let store = StoreRoot::new(&cli.store);
    let catalog = load_catalog(cli.catalog.as_deref(), &store)?;
    match cli.command {
        Command::Enroll { user, password, algo } => {
            let triple: PasswordTriple = password.parse()?;
            let engine = engine(catalog, store)?;
            let e = engine.enroll(&user, &triple, algo.into())?;
            print_json(&json!({"user": user, "algorithm": e.algorithm, "enrolled": true}));
            Ok(ExitCode::SUCCESS)
        }
        Command::Train { user, traces, append } => {
            let sets = read_training_dir(&traces)?;
            let engine = engine(catalog, store)?;
            let (templates, tree) = engine.train_user(&user, &sets, !append)?;
            print_json(&json!({
                "user": user,
                "traces": sets.values().map(Vec::len).sum::<usize>(),
                "templates": templates.len(),
                "tree_depth": tree.depth(),
                "tree_leaves": tree.leaf_count(),
            }));
            Ok(ExitCode::SUCCESS)
        }
        Command::Classify { trace, algo, user, tau } => {
            let trace = trace_io::read_trace_file(&trace)?;
            let engine = engine(catalog, store)?;
            let (templates, tree) = match &user {
                Some(u) => engine.recognizers_for(u),
                None => (
                    Arc::new(engine.default_templates().clone()),
                    Arc::new(engine.default_tree().clone()),
                ),
            };
            let out = match algo {
                AlgoArg::Template => {
                    let candidate = normalize_trace(&trace, &engine.config().normalize)?;
                    match classify_template(&candidate, &templates, tau.unwrap_or(engine.config().tau))? {
                        TemplateMatch::Matched { shape, distance } => {
                            json!({"algorithm": "template", "shape": shape, "distance": distance})
                        }
                        TemplateMatch::Rejected { nearest, distance } => {
                            json!({"algorithm": "template", "shape": null, "nearest": nearest, "distance": distance})
                        }
                    }
                }
                AlgoArg::Dtree => {
                    let shape = classify_tree(&tree, &path_features(&trace.to_path())?);
                    json!({"algorithm": "dtree", "shape": shape, "distance": null})
                }
            };
            print_json(&out);
            Ok(ExitCode::SUCCESS)
        }
        Command::Authenticate { user, traces, algo } => {
            let frames = traces
                .iter()
                .map(|p| trace_io::read_trace_file(p))
                .collect::<Result<Vec<_>, _>>()?;
            let engine = engine(catalog, store)?;
            let (mut session, _) = engine.begin_session(&user, algo.map(Algorithm::from))?;
            let mut decision = None;
            for f in &frames {
                decision = engine.submit_frame(&mut session, f)?.decision;
            }
            let granted = decision.is_some_and(|d| d.is_granted());
            println!("{}", if granted { "granted" } else { "denied" });
            Ok(if granted { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Bench {
            noise,
            trials,
            algo,
            user,
            out,
        } => {
            let engine = engine(catalog.clone(), store)?;
            let (templates, tree) = match &user {
                Some(u) => engine.recognizers_for(u),
                None => (
                    Arc::new(engine.default_templates().clone()),
                    Arc::new(engine.default_tree().clone()),
                ),
            };
            let rec = Recognizers {
                templates: &templates,
                tree: &tree,
                normalize: engine.config().normalize,
            };
            let report = sim::run_benchmark(&catalog, &noise.model(), trials, algo.into(), &rec)?.to_json();
            match out {
                Some(path) => {
                    write_file(&path, &pretty(&report))?;
                    print_json(&json!({"report": path, "accuracy": report["accuracy"]}));
                }
                None => print_json(&report),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CrossValidate {
            dataset,
            folds,
            seed,
            users,
        } => {
            let (data, source) = match &dataset {
                Some(path) => {
                    let f = fs::File::open(path).map_err(|e| io_failure(path, e))?;
                    (LabeledDataset::read_csv(f)?, json!(path))
                }
                None => (sim::synthetic_dataset(&catalog, users, seed)?, json!("simulated")),
            };
            let report = cross_validate(&data, folds, seed, &TreeConfig::default())?;
            let mut doc = serde_json::to_value(&report).expect("report serializes");
            doc["source"] = source;
            doc["samples"] = json!(data.len());
            print_json(&doc);
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateCatalog { threshold } => {
            let engine_cfg = AuthConfig::default();
            let report = validate_catalog(&catalog, threshold, &engine_cfg.normalize)?;
            let doc = serde_json::to_value(&report).expect("report serializes");
            print_json(&doc);
            if report.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                Err(Failure::new(
                    "catalog_separation",
                    format!("{} shape pairs closer than {threshold}", report.below_threshold.len()),
                ))
            }
        }
        Command::Simulate {
            shape,
            dataset,
            train_dir,
            noise,
            noiseless,
            users,
            trials,
            out,
        } => {
            let mut model = noise.model();
            if noiseless {
                model = NoiseModel::noiseless().with_seed(noise.seed);
            }
            if let Some(id) = shape {
                let trace = sim::simulate_pursuit(catalog.shape(id), catalog.plan(), &model)?;
                emit(out.as_deref(), &trace_io::to_jsonl(&trace))?;
            } else if dataset {
                let data = sim::synthetic_dataset(&catalog, users, noise.seed)?;
                let mut buf = Vec::new();
                data.write_csv(&mut buf)?;
                emit(out.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))?;
            } else if let Some(dir) = train_dir {
                for s in catalog.shapes() {
                    let shape_dir = dir.join(s.id.as_str());
                    fs::create_dir_all(&shape_dir).map_err(|e| io_failure(&shape_dir, e))?;
                    for n in 0..trials {
                        let m = model.with_seed(sim::trial_seed(noise.seed, s.id, n));
                        let trace = sim::simulate_pursuit(s, catalog.plan(), &m)?;
                        write_file(&shape_dir.join(format!("{n}.jsonl")), &trace_io::to_jsonl(&trace))?;
                    }
                }
                print_json(&json!({"dir": dir, "shapes": catalog.shapes().len(), "trials": trials}));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { port, host } => {
            let engine = Arc::new(engine(catalog, store)?);
            let handle = service::spawn(&format!("{host}:{port}"), engine)?;
            print_json(&json!({"listening": handle.addr().to_string()}));
            handle.wait();
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_catalog(path: Option<&Path>, store: &StoreRoot) -> Result<Arc<Catalog>, Failure> {
    let catalog = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_failure(p, e))?;
            Catalog::from_json(&text)?
        }
        None if store.catalog_path().exists() => store.load_catalog()?,
        None => Catalog::shipped(),
    };
    Ok(Arc::new(catalog))
}

fn engine(catalog: Arc<Catalog>, store: StoreRoot) -> Result<AuthEngine, Failure> {
    Ok(AuthEngine::new(catalog, AuthConfig::default())?.with_store(store)?)
}

fn read_training_dir(dir: &Path) -> Result<BTreeMap<ShapeId, Vec<RawTrace>>, Failure> {
    let mut sets = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| io_failure(dir, e))? {
        let entry = entry.map_err(|e| io_failure(dir, e))?;
        let name = entry.file_name();
        let Some(id) = name.to_str().and_then(|n| n.parse::<ShapeId>().ok()) else {
            continue;
        };
        let mut files: Vec<PathBuf> = fs::read_dir(entry.path())
            .map_err(|e| io_failure(&entry.path(), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        let traces = files
            .iter()
            .map(|p| trace_io::read_trace_file(p))
            .collect::<Result<Vec<_>, _>>()?;
        sets.insert(id, traces);
    }
    Ok(sets)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string(v).expect("json serializes"));
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write_file(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_failure(Path::new("<stdout>"), e)),
    }
}
