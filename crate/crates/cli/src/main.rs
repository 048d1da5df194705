//! `sdmlab`: task analysis and solving from the command line.
//!
//! Every command prints one JSON report on stdout. Diagnostics go to stderr.
//! Exit codes: 0 clean, 1 domain error (invalid model, no proper policy,
//! enumeration cap, ...), 2 input error (unreadable or malformed files, bad
//! flags).

mod spec;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sdmlab_core::bundle::{LoadedBundle, TaskBundle};
use sdmlab_core::exact::{exact_set_distance, exact_task_difficulty, normalize_quality_scale};
use sdmlab_core::mc::{
    estimate_prior_difficulty, estimate_q_score, estimate_q_sim, estimate_task_difficulty, evaluate_final_policy,
    ActionSource, ConstantSimilarity, ElementOverlap, EvalSet, KnowledgeConfig, KnowledgeReport, McConfig,
    OracleSimilarity, Similarity, TaskMdp,
};
use sdmlab_core::mdp::{encode_classical, parse_mdp, ClassicalTask, EncodingMode, MdpDocument, Violation};
use sdmlab_core::policy::{
    DeterministicPolicy, FactorizedDistribution, FactorizedDocument, KeySpace, PolicyEntry,
    PolicySampler, UniformSampler, DEFAULT_ENUMERATION_CAP,
};
use sdmlab_core::report::{canonical_json, file_digest, InputDigest, Method, RunReport, Runtime};
use sdmlab_core::rng::{SeedStream, Stream};
use sdmlab_core::sdm::{run_general_sdm, ScorerSpec, SolverConfig};
use sdmlab_core::{Error, VERSION};

use spec::{parse_scorer, parse_sim, SimSpec};

#[derive(Parser)]
#[command(name = "sdmlab", version, about = "Probabilistic analysis of sequential decision making tasks")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true, env = "SDMLAB_THREADS")]
    threads: Option<usize>,

    /// Print the report without runtime fields, as compared across runs.
    #[arg(long, global = true)]
    canonical: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an MDP file or a task bundle and list every violation.
    Validate { path: PathBuf },
    /// Task difficulty of a bundle.
    Difficulty(DifficultyArgs),
    /// Distance between the training sets of two bundles.
    Distance(DistanceArgs),
    /// Run the general solver on the training set and score its output on the test set.
    Solve(SolveArgs),
    /// Knowledge in a prior, a scorer or a similarity function.
    Knowledge(KnowledgeArgs),
    /// Encode a classical planning task as an MDP file.
    Encode(EncodeArgs),
    /// Quality of a policy file on a bundle's test (or training) set.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum MethodArg {
    Exact,
    Mc,
}

#[derive(Args, Clone, Serialize)]
struct SampleArgs {
    /// Sampled policies (or policy pairs).
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Trajectories per policy and MDP.
    #[arg(long, default_value_t = 10)]
    rollouts: usize,
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use separate rollout streams for the train and test qualities.
    #[arg(long)]
    unpaired: bool,
    /// Largest policy space that is enumerated.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP as u64)]
    cap: u64,
}

impl SampleArgs {
    fn mc(&self, rescale: bool) -> McConfig {
        McConfig {
            samples: self.n,
            rollouts: self.rollouts,
            max_steps: self.max_steps,
            seed: self.seed,
            rescale,
            pair_seeds: !self.unpaired,
            enumeration_cap: self.cap as u128,
        }
    }
}

#[derive(Args)]
struct DifficultyArgs {
    bundle: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    #[command(flatten)]
    sample: SampleArgs,
}

#[derive(Args)]
struct DistanceArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    #[command(flatten)]
    sample: SampleArgs,
}

#[derive(Args)]
struct SolveArgs {
    bundle: PathBuf,
    /// Solver configuration file; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    /// Steps of the online timing probe.
    #[arg(long)]
    probe: Option<usize>,
    /// Trajectories per test MDP for the final evaluation.
    #[arg(long, default_value_t = 100)]
    eval_rollouts: usize,
    #[arg(long, default_value_t = 1000)]
    eval_max_steps: usize,
    /// Also write the per-iteration trace as CSV.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
}

#[derive(Args)]
struct KnowledgeArgs {
    bundle: PathBuf,
    /// `uniform` or a factorized distribution file.
    #[arg(long)]
    prior: Option<String>,
    /// `exact`, `mc:n=5`, `bootstrap:alpha=0.5,sweeps=2`, `...,noise=0.1`, or a JSON file.
    #[arg(long)]
    scorer: Option<String>,
    /// `overlap`, `oracle` or `constant:<value>`.
    #[arg(long)]
    simfn: Option<String>,
    /// Sampled policies for the prior, policy pairs otherwise.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Trajectories per policy for the prior estimate.
    #[arg(long, default_value_t = 10)]
    rollouts: usize,
    /// Trajectories per reference quality when the policy space is too large to enumerate.
    #[arg(long, default_value_t = 1000)]
    reference_rollouts: usize,
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP as u64)]
    cap: u64,
}

#[derive(Args)]
struct EncodeArgs {
    task: PathBuf,
    #[arg(long, value_parser = parse_mode)]
    mode: EncodingMode,
    #[arg(long)]
    out: PathBuf,
    /// Bound for the optimal mode instead of the computed optimal plan cost.
    #[arg(long)]
    optimal_length: Option<f64>,
}

fn parse_mode(s: &str) -> Result<EncodingMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SetArg {
    Train,
    Test,
}

#[derive(Args)]
struct EvaluateArgs {
    bundle: PathBuf,
    /// Policy entries (`[{"key": ..., "action": ...}]`) or a factorized distribution.
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, value_enum, default_value = "mc")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "test")]
    on: SetArg,
    #[arg(long, default_value_t = 100)]
    rollouts: usize,
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP as u64)]
    cap: u64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PolicyFile {
    Deterministic(Vec<PolicyEntry>),
    Factorized(FactorizedDocument),
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Parse { .. } | Error::Config(_) => 2,
            _ => 1,
        };
        let mut message = e.to_string();
        if matches!(e, Error::EnumerationCap { .. }) {
            message.push_str("; use --method mc");
        }
        Self { code, message }
    }
}

type CmdResult = Result<Done, Failure>;

/// A finished command: its payload and its exit code.
struct Done {
    command: &'static str,
    seed: Option<u64>,
    config: Value,
    inputs: Vec<InputDigest>,
    result: Value,
    code: u8,
}

impl Done {
    fn ok(command: &'static str, seed: Option<u64>, config: Value, inputs: Vec<InputDigest>, result: impl Serialize) -> Self {
        Self {
            command,
            seed,
            config,
            inputs,
            result: serde_json::to_value(result).expect("results serialize"),
            code: 0,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Validate { path } => validate(path),
        Command::Difficulty(a) => difficulty(a),
        Command::Distance(a) => distance(a),
        Command::Solve(a) => solve(a),
        Command::Knowledge(a) => knowledge(a),
        Command::Encode(a) => encode(a),
        Command::Evaluate(a) => evaluate(a),
    };
    match outcome {
        Ok(done) => {
            let report = RunReport {
                command: done.command.to_string(),
                version: VERSION.to_string(),
                seed: done.seed,
                config: done.config,
                inputs: done.inputs,
                result: done.result,
                runtime: Runtime {
                    wall_clock_seconds: start.elapsed().as_secs_f64(),
                    threads: rayon::current_num_threads(),
                },
            };
            let value = serde_json::to_value(&report).expect("reports serialize");
            let text = if cli.canonical {
                canonical_json(&value)
            } else {
                serde_json::to_string_pretty(&value).expect("reports serialize")
            };
            println!("{text}");
            ExitCode::from(done.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn digest(path: &Path) -> Result<InputDigest, Failure> {
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: file_digest(path)?,
    })
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("failed to read {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| {
        Failure::usage(format!("malformed document {} at line {}, column {}: {e}", path.display(), e.line(), e.column()))
    })
}

#[derive(Serialize)]
struct FileViolations {
    path: String,
    violations: Vec<Violation>,
}

#[derive(Serialize)]
struct ValidateResult {
    kind: &'static str,
    valid: bool,
    files: Vec<FileViolations>,
}

fn validate(path: &Path) -> CmdResult {
    let text = read(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| {
        Failure::usage(format!("malformed document {} at line {}, column {}: {e}", path.display(), e.line(), e.column()))
    })?;
    let check = |text: &str, origin: &Path| -> Result<Vec<Violation>, Failure> {
        match parse_mdp(text, origin) {
            Ok(_) => Ok(Vec::new()),
            Err(Error::InvalidMdp(v)) => Ok(v),
            Err(e) => Err(e.into()),
        }
    };
    let mut inputs = vec![digest(path)?];
    let mut files = Vec::new();
    let kind = if value.get("train").is_some() {
        let bundle = TaskBundle::parse(&text, path)?;
        let mut seen = Vec::new();
        for p in bundle.resolved_paths(path) {
            if seen.contains(&p) {
                continue;
            }
            let violations = check(&read(&p)?, &p)?;
            inputs.push(digest(&p)?);
            files.push(FileViolations { path: p.display().to_string(), violations });
            seen.push(p);
        }
        if files.iter().all(|f| f.violations.is_empty()) {
            // Potentials are checked against valid MDPs only.
            bundle.resolve(path)?;
        }
        "bundle"
    } else {
        files.push(FileViolations { path: path.display().to_string(), violations: check(&text, path)? });
        "mdp"
    };
    let valid = files.iter().all(|f| f.violations.is_empty());
    for f in &files {
        for v in &f.violations {
            eprintln!("{}: {v}", f.path);
        }
    }
    let mut done = Done::ok("validate", None, json!({ "path": path }), inputs, ValidateResult { kind, valid, files });
    done.code = if valid { 0 } else { 1 };
    Ok(done)
}

fn difficulty(a: &DifficultyArgs) -> CmdResult {
    let b = TaskBundle::load(&a.bundle)?;
    let (report, config, seed) = match a.method {
        MethodArg::Exact => {
            let r = exact_task_difficulty(&b.train_mdps(), &b.test_mdps(), &b.context, a.sample.cap as u128)?;
            (r, json!({ "bundle": a.bundle, "method": "exact", "cap": a.sample.cap }), None)
        }
        MethodArg::Mc => {
            let cfg = a.sample.mc(b.rescale);
            let r = estimate_task_difficulty(&b.train, &b.test, &b.context, &cfg)?;
            (r, json!({ "bundle": a.bundle, "method": "mc", "mc": cfg }), Some(cfg.seed))
        }
    };
    if report.degenerate {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(Done::ok("difficulty", seed, config, b.inputs, report))
}

#[derive(Serialize)]
struct DistanceReport {
    method: Method,
    distance: f64,
    sample_count: Option<u64>,
    smoothed: bool,
}

fn distance(a: &DistanceArgs) -> CmdResult {
    let (x, y) = (TaskBundle::load(&a.a)?, TaskBundle::load(&a.b)?);
    check_comparable(&x, &y)?;
    let mut inputs = x.inputs.clone();
    inputs.extend(y.inputs.iter().filter(|d| !x.inputs.contains(d)).cloned());
    let smoothed = x.smoothed();
    let (report, config, seed) = match a.method {
        MethodArg::Exact => {
            let d = exact_set_distance(&x.train_mdps(), &y.train_mdps(), &x.context, a.sample.cap as u128)?;
            let r = DistanceReport { method: Method::Exact, distance: d, sample_count: None, smoothed };
            (r, json!({ "a": a.a, "b": a.b, "method": "exact", "cap": a.sample.cap }), None)
        }
        MethodArg::Mc => {
            let cfg = a.sample.mc(x.rescale);
            let r = estimate_task_difficulty(&x.train, &y.train, &x.context, &cfg)?;
            let r = DistanceReport {
                method: Method::MonteCarlo,
                distance: r.distance_term,
                sample_count: Some(r.sample_count),
                smoothed,
            };
            (r, json!({ "a": a.a, "b": a.b, "method": "mc", "mc": cfg }), Some(cfg.seed))
        }
    };
    Ok(Done::ok("distance", seed, config, inputs, report))
}

/// Compared sets must share their context and quality transformation.
fn check_comparable(x: &LoadedBundle, y: &LoadedBundle) -> Result<(), Failure> {
    if x.context != y.context {
        return Err(Failure::usage("the bundles use different context tags"));
    }
    if x.rescale != y.rescale {
        return Err(Failure::usage("the bundles disagree on quality rescaling"));
    }
    if x.smoothed() != y.smoothed() {
        return Err(Failure::usage("one bundle carries potentials and the other does not"));
    }
    Ok(())
}

#[derive(Serialize)]
struct FinalEvaluation {
    /// Set quality of the greedy policy on the test MDPs.
    test_quality: f64,
    /// Product of the test MDPs' optimal qualities.
    test_optimum: f64,
    fraction_of_optimum: f64,
    rollouts: usize,
    max_steps: usize,
    per_mdp: Value,
}

fn solve(a: &SolveArgs) -> CmdResult {
    let b = TaskBundle::load(&a.bundle)?;
    let mut inputs = b.inputs.clone();
    let mut cfg: SolverConfig = match &a.config {
        Some(p) => {
            inputs.push(digest(p)?);
            read_json(p)?
        }
        None => SolverConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.budget {
        cfg.budget = n;
    }
    if let Some(n) = a.probe {
        cfg.probe_steps = n;
    }
    if a.eval_rollouts == 0 || a.eval_max_steps == 0 {
        return Err(Failure::usage("--eval-rollouts and --eval-max-steps must be at least 1"));
    }
    let trace = run_general_sdm(&b.train, &b.context, &cfg)?;
    if let Some(p) = &a.trace_csv {
        std::fs::write(p, trace.to_csv()).map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display())))?;
    }
    let greedy = &trace.greedy_policy;
    let q = evaluate_final_policy(&b.test, greedy.space(), greedy, a.eval_rollouts, a.eval_max_steps, cfg.seed)?;
    let mut optimum = 1.0;
    for t in &b.test {
        optimum *= normalize_quality_scale(&t.mdp, cfg.scorer.enumeration_cap)?.value;
    }
    let evaluation = FinalEvaluation {
        test_quality: q.set_quality,
        test_optimum: optimum,
        fraction_of_optimum: q.set_quality / optimum,
        rollouts: a.eval_rollouts,
        max_steps: a.eval_max_steps,
        per_mdp: serde_json::to_value(&q.per_mdp).expect("estimates serialize"),
    };
    let config = json!({
        "bundle": a.bundle,
        "solver": cfg,
        "eval_rollouts": a.eval_rollouts,
        "eval_max_steps": a.eval_max_steps,
    });
    let result = json!({ "trace": trace, "final": evaluation });
    Ok(Done::ok("solve", Some(cfg.seed), config, inputs, result))
}

fn knowledge(a: &KnowledgeArgs) -> CmdResult {
    if a.prior.is_none() && a.scorer.is_none() && a.simfn.is_none() {
        return Err(Failure::usage("select at least one of --prior, --scorer and --simfn"));
    }
    let b = TaskBundle::load(&a.bundle)?;
    let mut inputs = b.inputs.clone();
    let space = KeySpace::build(&b.train_mdps(), &b.context)?;
    let kcfg = KnowledgeConfig {
        pairs: a.n,
        reference_rollouts: a.reference_rollouts,
        max_steps: a.max_steps,
        seed: a.seed,
        rescale: b.rescale,
        enumeration_cap: a.cap as u128,
    };
    let mut config = json!({ "bundle": a.bundle, "knowledge": kcfg });
    let mut report = KnowledgeReport::default();

    if let Some(prior) = &a.prior {
        let sampler: Box<dyn PolicySampler + Sync> = if prior == "uniform" {
            Box::new(UniformSampler::new(space.clone()))
        } else {
            let path = Path::new(prior);
            inputs.push(digest(path)?);
            let doc: FactorizedDocument = read_json(path)?;
            Box::new(FactorizedDistribution::from_document(space.clone(), &doc)?)
        };
        let mc = McConfig {
            samples: a.n,
            rollouts: a.rollouts,
            max_steps: a.max_steps,
            seed: a.seed,
            rescale: b.rescale,
            pair_seeds: true,
            enumeration_cap: a.cap as u128,
        };
        report.prior = Some(estimate_prior_difficulty(&b.train, sampler.as_ref(), &mc)?);
        config["prior"] = json!({ "source": prior, "mc": mc });
    }
    if let Some(s) = &a.scorer {
        let base = ScorerSpec {
            max_steps: a.max_steps,
            rescale: b.rescale,
            enumeration_cap: a.cap as u128,
            ..Default::default()
        };
        let spec = parse_scorer(s, &base).map_err(Failure::usage)?;
        let mut scorer = spec.build(&b.train, &space)?;
        report.score = Some(estimate_q_score(&b.train, scorer.as_mut(), &b.context, &kcfg)?);
        config["scorer"] = serde_json::to_value(&spec).expect("specs serialize");
    }
    if let Some(s) = &a.simfn {
        let sim_spec = parse_sim(s).map_err(Failure::usage)?;
        let sim: Box<dyn Similarity> = match sim_spec {
            SimSpec::Overlap => Box::new(ElementOverlap),
            SimSpec::Constant(c) => Box::new(ConstantSimilarity(c)),
            SimSpec::Oracle => Box::new(OracleSimilarity::new(&b.train, &space, b.rescale, a.cap as u128)?),
        };
        report.sim = Some(estimate_q_sim(&b.train, sim.as_ref(), &b.context, &kcfg)?);
        config["simfn"] = serde_json::to_value(&sim_spec).expect("specs serialize");
    }
    Ok(Done::ok("knowledge", Some(a.seed), config, inputs, report))
}

fn encode(a: &EncodeArgs) -> CmdResult {
    let task = ClassicalTask::load(&a.task)?;
    let mdp = encode_classical(&task, a.mode, a.optimal_length)?;
    let text = serde_json::to_string_pretty(&MdpDocument::from(&mdp)).expect("documents serialize");
    std::fs::write(&a.out, text + "\n").map_err(|e| Failure::usage(format!("cannot write {}: {e}", a.out.display())))?;
    let result = json!({
        "out": digest(&a.out)?,
        "mode": a.mode,
        "states": mdp.num_states(),
        "actions": mdp.num_actions(),
        "constraints": mdp.num_constraints(),
    });
    let config = json!({ "task": a.task, "mode": a.mode, "out": a.out, "optimal_length": a.optimal_length });
    Ok(Done::ok("encode", None, config, vec![digest(&a.task)?], result))
}

fn evaluate(a: &EvaluateArgs) -> CmdResult {
    let b = TaskBundle::load(&a.bundle)?;
    let mut inputs = b.inputs.clone();
    inputs.push(digest(&a.policy)?);
    let space = KeySpace::build(&b.train_mdps(), &b.context)?;
    let target: &[TaskMdp] = match a.on {
        SetArg::Train => &b.train,
        SetArg::Test => &b.test,
    };
    let set = EvalSet::new(target, &space, b.rescale, a.cap as u128)?;
    let quality = match (a.method, read_json::<PolicyFile>(&a.policy)?) {
        (MethodArg::Exact, PolicyFile::Deterministic(entries)) => {
            set.exact_quality(&DeterministicPolicy::from_document(space.clone(), &entries)?)?
        }
        (MethodArg::Exact, PolicyFile::Factorized(_)) => {
            return Err(Failure::usage("exact evaluation needs a deterministic policy; use --method mc"));
        }
        (MethodArg::Mc, file) => {
            if a.rollouts == 0 || a.max_steps == 0 {
                return Err(Failure::usage("--rollouts and --max-steps must be at least 1"));
            }
            let source: Box<dyn ActionSource> = match file {
                PolicyFile::Deterministic(e) => Box::new(DeterministicPolicy::from_document(space.clone(), &e)?),
                PolicyFile::Factorized(doc) => Box::new(FactorizedDistribution::from_document(space.clone(), &doc)?),
            };
            let seeds = SeedStream::new(a.seed).child(Stream::Reference, 0);
            set.mc_quality(source.as_ref(), a.rollouts, a.max_steps, seeds)
        }
    };
    let config = json!({
        "bundle": a.bundle,
        "policy": a.policy,
        "method": a.method,
        "on": a.on,
        "rollouts": a.rollouts,
        "max_steps": a.max_steps,
        "cap": a.cap,
    });
    let seed = matches!(a.method, MethodArg::Mc).then_some(a.seed);
    Ok(Done::ok("evaluate", seed, config, inputs, quality))
}
