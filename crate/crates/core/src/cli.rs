//! Command-line front end. Every subcommand prints one JSON document on
//! stdout; diagnostics go to stderr through `log` (filter: `LASER_LOG`).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::checker::{align, AlignConfig, CheckError, Mode};
use crate::fact_db::{DbError, FactDatabase, Schema};
use crate::losses::SpanScore;
use crate::oracle::{exact_align, fd_grad, OracleError};
use crate::spec_lang::{parse_spec, SpecError, Specification};
use crate::synthgen::{self, GenConfig, Regime, SynthError};
use crate::trainer::{self, Optimizer, PredictorParams, TrainConfig, TrainError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_GENERIC: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_EVAL: i32 = 3;
pub const EXIT_ORACLE_CAP: i32 = 4;

/// Largest relative gradient error `gradcheck` accepts.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        CliError::new(EXIT_PARSE, e.to_string())
    }
}

impl From<CheckError> for CliError {
    fn from(e: CheckError) -> Self {
        CliError::new(EXIT_EVAL, e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        let code = match e {
            OracleError::TooManyFacts { .. } => EXIT_ORACLE_CAP,
            OracleError::Check(_) => EXIT_EVAL,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        let code = match e {
            SynthError::Spec(_) | SynthError::Json { .. } => EXIT_PARSE,
            _ => EXIT_GENERIC,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let code = match e {
            TrainError::Check(_) | TrainError::Loss(_) | TrainError::NonFiniteLoss(_) => EXIT_EVAL,
            TrainError::Json { .. } => EXIT_PARSE,
            _ => EXIT_GENERIC,
        };
        CliError::new(code, e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "stalign", version, about = "Probabilistic temporal-logic alignment of scene-graph traces")]
pub struct Cli {
    /// Proof retention bound: an integer or `inf`. Defaults to 5, or 3 for
    /// 20BN-like datasets.
    #[arg(long, global = true, value_parser = parse_k)]
    pub k: Option<KArg>,
    /// Temporal semantics. Defaults to suffix, or interval for MUGEN-like datasets.
    #[arg(long, global = true)]
    pub mode: Option<ModeArg>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file (check, oracle, gradcheck, eval) or directory (gen, train).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KArg(pub Option<usize>);

fn parse_k(s: &str) -> Result<KArg, String> {
    match s {
        "inf" | "none" => Ok(KArg(None)),
        _ => match s.parse::<usize>() {
            Ok(0) => Err("k must be >= 1".into()),
            Ok(k) => Ok(KArg(Some(k))),
            Err(e) => Err(e.to_string()),
        },
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Suffix,
    Interval,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Suffix => Mode::Suffix,
            ModeArg::Interval => Mode::Interval,
        }
    }
}

#[derive(Args, Debug)]
pub struct Inputs {
    /// Fact database (JSON).
    #[arg(long)]
    pub db: PathBuf,
    /// File holding one specification.
    #[arg(long)]
    pub spec: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Task {
    F1,
    Retrieval,
    Violation,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Alignment score, witness scores and retained proofs.
    Check(Inputs),
    /// Exact score by world enumeration, compared with the engine.
    Oracle(Inputs),
    /// Analytic gradients against central finite differences.
    Gradcheck {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
    },
    /// Generate a synthetic dataset from a JSON generator config.
    Gen {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train a predictor; writes checkpoint.json and train_log.csv.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// JSON training config; every field is optional.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Lines of `w=<float> <spec>`; replaces the built-in constraints.
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a checkpoint, or the ground truth when none is given.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long, default_value_t = 3)]
        group_size: usize,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        constraints: Option<PathBuf>,
    },
}

/// Optional overrides of [`TrainConfig`].
#[derive(Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub optimizer: Option<Optimizer>,
    pub init_scale: Option<f64>,
    pub init_bias: Option<f64>,
    pub bce_epsilon: Option<f64>,
    pub d_tau_fraction: Option<f64>,
    pub span_score: Option<SpanScoreArg>,
    pub weights: Option<WeightsFile>,
    pub temporal_labels: Option<(String, String)>,
}

#[derive(Deserialize, Debug, Clone, Copy)]
#[serde(rename_all = "lowercase")]
pub enum SpanScoreArg {
    Joint,
    Conditional,
}

#[derive(Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsFile {
    pub align: Option<f64>,
    pub contrastive: Option<f64>,
    pub temporal: Option<f64>,
    pub semantic: Option<f64>,
}

impl TrainFile {
    fn apply(self, cfg: &mut TrainConfig) {
        macro_rules! set {
            ($src:expr, $dst:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        set!(self.learning_rate, cfg.learning_rate);
        set!(self.epochs, cfg.epochs);
        set!(self.batch_size, cfg.batch_size);
        set!(self.optimizer, cfg.optimizer);
        set!(self.init_scale, cfg.init_scale);
        set!(self.init_bias, cfg.init_bias);
        set!(self.bce_epsilon, cfg.loss.bce_epsilon);
        set!(self.d_tau_fraction, cfg.loss.d_tau_fraction);
        set!(self.temporal_labels, cfg.temporal_labels);
        if let Some(s) = self.span_score {
            cfg.loss.span_score = match s {
                SpanScoreArg::Joint => SpanScore::Joint,
                SpanScoreArg::Conditional => SpanScore::Conditional,
            };
        }
        if let Some(w) = self.weights {
            set!(w.align, cfg.loss.weights.align);
            set!(w.contrastive, cfg.loss.weights.contrastive);
            set!(w.temporal, cfg.loss.weights.temporal);
            set!(w.semantic, cfg.loss.weights.semantic);
        }
    }
}

/// Parses `w=<float> <spec>` lines; blank lines and `#` comments are
/// skipped and a missing weight means 1.
pub fn parse_constraints(text: &str, schema: &Schema) -> Result<Vec<(Specification, f64)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (w, body) = match line.strip_prefix("w=") {
            Some(rest) => {
                let (w, body) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
                let w: f64 = w
                    .parse()
                    .map_err(|e| CliError::new(EXIT_PARSE, format!("line {}: bad weight: {e}", n + 1)))?;
                (w, body.trim())
            }
            None => (1.0, line),
        };
        let spec = parse_spec(body, schema)
            .map_err(|e| CliError::new(EXIT_PARSE, format!("line {}: {e}", n + 1)))?;
        out.push((spec, w));
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::new(EXIT_GENERIC, format!("{}: {e}", path.display())))
}

fn load_db(path: &Path) -> Result<FactDatabase, CliError> {
    FactDatabase::from_json(&read(path)?)
        .map_err(|e: DbError| CliError::new(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn load_inputs(inputs: &Inputs) -> Result<(FactDatabase, Specification), CliError> {
    let db = load_db(&inputs.db)?;
    let text = read(&inputs.spec)?;
    let spec = parse_spec(text.trim(), db.schema())
        .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", inputs.spec.display())))?;
    Ok((db, spec))
}

fn fact_name(db: &FactDatabase, id: usize) -> String {
    db.facts()[id].key.to_string()
}

struct Ctx {
    k: Option<KArg>,
    mode: Option<Mode>,
    seed: Option<u64>,
    output: Option<PathBuf>,
}

impl Ctx {
    fn align_config(&self, regime: Option<Regime>) -> AlignConfig {
        let mut cfg = match regime {
            Some(r) => TrainConfig::for_regime(r).loss.align,
            None => AlignConfig::default(),
        };
        if let Some(KArg(k)) = self.k {
            cfg.k = k;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        cfg
    }

    fn output_dir(&self, cmd: &str) -> Result<&Path, CliError> {
        self.output
            .as_deref()
            .ok_or_else(|| CliError::new(EXIT_GENERIC, format!("{cmd} needs --output <dir>")))
    }
}

fn cmd_check(ctx: &Ctx, inputs: &Inputs) -> Result<Value, CliError> {
    let (db, spec) = load_inputs(inputs)?;
    let cfg = ctx.align_config(None);
    let r = align(&db, &spec, &cfg)?;
    let witness: BTreeMap<&str, BTreeMap<String, f64>> = r
        .witness_scores
        .iter()
        .map(|(l, m)| (l.as_str(), m.iter().map(|(w, s)| (w.to_string(), *s)).collect()))
        .collect();
    let grad: BTreeMap<String, f64> = r.grad.iter().map(|(&f, &g)| (fact_name(&db, f), g)).collect();
    Ok(json!({
        "score": r.score,
        "k": cfg.k,
        "mode": cfg.mode.to_string(),
        "witness_scores": witness,
        "proofs": r.proofs.dump(),
        "grad": grad,
    }))
}

fn cmd_oracle(ctx: &Ctx, inputs: &Inputs) -> Result<Value, CliError> {
    let (db, spec) = load_inputs(inputs)?;
    let cfg = ctx.align_config(None);
    let exact = exact_align(&db, &spec, cfg.mode)?;
    let engine = align(&db, &spec, &AlignConfig { gradients: false, witness_scores: false, ..cfg.clone() })?;
    Ok(json!({
        "oracle_score": exact,
        "engine_score": engine.score,
        "delta": (engine.score - exact).abs(),
        "k": cfg.k,
        "mode": cfg.mode.to_string(),
        "num_facts": db.len(),
    }))
}

fn cmd_gradcheck(ctx: &Ctx, inputs: &Inputs, eps: f64) -> Result<(Value, bool), CliError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(CliError::new(EXIT_GENERIC, "--eps must be in (0, 0.5)"));
    }
    let (db, spec) = load_inputs(inputs)?;
    // finite differences see the exact objective, so compare against it
    let cfg = AlignConfig { k: None, ..ctx.align_config(None) };
    exact_align(&db, &spec, cfg.mode)?;
    let r = align(&db, &spec, &cfg)?;
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for f in 0..db.len() {
        let analytic = r.grad.get(&f).copied().unwrap_or(0.0);
        let numeric = fd_grad(&db, &spec, cfg.mode, f, eps)?;
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
        rows.push(json!({ "fact": fact_name(&db, f), "analytic": analytic, "numeric": numeric, "rel_error": rel }));
    }
    let ok = worst <= GRADCHECK_TOLERANCE;
    Ok((
        json!({
            "max_rel_error": worst,
            "tolerance": GRADCHECK_TOLERANCE,
            "ok": ok,
            "mode": cfg.mode.to_string(),
            "eps": eps,
            "gradients": rows,
        }),
        ok,
    ))
}

fn cmd_gen(ctx: &Ctx, config: &Path) -> Result<Value, CliError> {
    let mut cfg: GenConfig = serde_json::from_str(&read(config)?)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", config.display())))?;
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    let dir = ctx.output_dir("gen")?;
    let episodes = synthgen::generate(&cfg)?;
    synthgen::write_dataset(dir, &cfg, &episodes)?;
    Ok(json!({
        "dataset": dir.display().to_string(),
        "regime": cfg.regime,
        "seed": cfg.seed,
        "num_episodes": episodes.len(),
    }))
}

fn constraints_for(
    path: Option<&Path>,
    regime: Regime,
    schema: &Schema,
) -> Result<Vec<(Specification, f64)>, CliError> {
    match path {
        Some(p) => parse_constraints(&read(p)?, schema),
        None => Ok(TrainConfig::for_regime(regime).constraints),
    }
}

fn cmd_train(
    ctx: &Ctx,
    data: &Path,
    config: Option<&Path>,
    constraints: Option<&Path>,
    epochs: Option<usize>,
) -> Result<Value, CliError> {
    let (gen, episodes) = synthgen::read_dataset(data)?;
    let layout = synthgen::layout(&gen);
    let mut cfg = TrainConfig::for_regime(gen.regime);
    if let Some(p) = config {
        let file: TrainFile = serde_json::from_str(&read(p)?)
            .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", p.display())))?;
        file.apply(&mut cfg);
    }
    cfg.loss.align = ctx.align_config(Some(gen.regime));
    cfg.constraints = constraints_for(constraints, gen.regime, &layout.schema)?;
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    let dir = ctx.output_dir("train")?;
    fs::create_dir_all(dir).map_err(|e| CliError::new(EXIT_GENERIC, format!("{}: {e}", dir.display())))?;

    let f = episodes.first().ok_or(TrainError::EmptyDataset)?.features[0].len();
    let init = PredictorParams::random(&layout, f, cfg.seed, cfg.init_scale).with_sigmoid_bias(cfg.init_bias);
    let initial = trainer::batch_loss(&init, &episodes.iter().collect::<Vec<_>>(), &cfg)?.0;
    let (t, log) = trainer::train_from(init, &episodes, &cfg)?;
    let last = trainer::batch_loss(&t.params, &episodes.iter().collect::<Vec<_>>(), &cfg)?.0;

    let ckpt = dir.join("checkpoint.json");
    let csv = dir.join("train_log.csv");
    trainer::save_checkpoint(&ckpt, &t.params, Some((cfg.optimizer, &t.state)))?;
    fs::write(&csv, log.to_csv()).map_err(|e| CliError::new(EXIT_GENERIC, format!("{}: {e}", csv.display())))?;
    Ok(json!({
        "checkpoint": ckpt.display().to_string(),
        "log": csv.display().to_string(),
        "epochs": cfg.epochs,
        "initial_loss": initial,
        "final_loss": last,
    }))
}

fn cmd_eval(
    ctx: &Ctx,
    data: &Path,
    checkpoint: Option<&Path>,
    task: Task,
    group_size: usize,
    threshold: f64,
    constraints: Option<&Path>,
) -> Result<Value, CliError> {
    let (gen, episodes) = synthgen::read_dataset(data)?;
    let acfg = ctx.align_config(Some(gen.regime));
    let params = checkpoint.map(trainer::load_checkpoint).transpose()?.map(|(p, _)| p);
    let dbs: Vec<FactDatabase> = match &params {
        Some(p) => episodes.iter().map(|e| trainer::predict(p, e)).collect::<Result<_, _>>()?,
        None => episodes.iter().map(|e| e.ground_truth.clone()).collect(),
    };
    let source = if params.is_some() { "checkpoint" } else { "ground_truth" };
    let mut out = match task {
        Task::F1 => {
            let pairs: Vec<(FactDatabase, &FactDatabase)> =
                dbs.into_iter().zip(episodes.iter().map(|e| &e.ground_truth)).collect();
            let r = trainer::f1_from_dbs(&pairs, threshold);
            let per: BTreeMap<&str, Value> = r
                .per_predicate
                .iter()
                .map(|(p, s)| {
                    (p.as_str(), json!({ "precision": s.precision, "recall": s.recall, "f1": s.f1 }))
                })
                .collect();
            json!({ "f1": per, "mean_f1": r.mean_f1, "threshold": threshold })
        }
        Task::Retrieval => {
            let refs: Vec<&FactDatabase> = dbs.iter().collect();
            let specs: Vec<&Specification> = episodes.iter().map(|e| &e.spec).collect();
            let r = trainer::retrieval_from_dbs(&refs, &specs, group_size, ctx.seed.unwrap_or(0), &acfg)?;
            json!({
                "spec_retrieval_acc": r.spec_retrieval_acc,
                "video_retrieval_acc": r.video_retrieval_acc,
                "groups": r.groups,
                "group_size": group_size,
            })
        }
        Task::Violation => {
            let schema = &synthgen::layout(&gen).schema;
            let cs = constraints_for(constraints, gen.regime, schema)?;
            let vcfg = AlignConfig { gradients: false, witness_scores: false, ..acfg.clone() };
            let mut per = vec![0.0; cs.len()];
            for db in &dbs {
                for (i, (c, _)) in cs.iter().enumerate() {
                    per[i] += crate::checker::violation_score(db, c, &vcfg)?.score;
                }
            }
            let n = episodes.len().max(1) as f64;
            let rows: Vec<Value> = cs
                .iter()
                .zip(&per)
                .map(|((c, w), s)| json!({ "constraint": constraint_text(c), "weight": w, "violation": s / n }))
                .collect();
            let mean = if cs.is_empty() { 0.0 } else { per.iter().sum::<f64>() / (n * cs.len() as f64) };
            json!({ "mean_violation": mean, "constraints": rows })
        }
    };
    out["source"] = json!(source);
    out["k"] = json!(acfg.k);
    out["mode"] = json!(acfg.mode.to_string());
    Ok(out)
}

/// Constraints quantify universally over their variables.
fn constraint_text(c: &Specification) -> String {
    if c.vars.is_empty() {
        c.body.to_string()
    } else {
        format!("forall {}. {}", c.vars.join(", "), c.body)
    }
}

fn emit(ctx: &Ctx, value: &Value, to_file: bool) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("JSON value serializes");
    if to_file {
        if let Some(p) = &ctx.output {
            fs::write(p, format!("{text}\n"))
                .map_err(|e| CliError::new(EXIT_GENERIC, format!("{}: {e}", p.display())))?;
        }
    }
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(CliError::new(EXIT_GENERIC, format!("stdout: {e}")))
        }
        _ => Ok(()),
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new(EXIT_GENERIC, e.to_string()))?;
    }
    let ctx = Ctx { k: cli.k, mode: cli.mode.map(Mode::from), seed: cli.seed, output: cli.output };
    match &cli.command {
        Command::Check(i) => emit(&ctx, &cmd_check(&ctx, i)?, true)?,
        Command::Oracle(i) => emit(&ctx, &cmd_oracle(&ctx, i)?, true)?,
        Command::Gradcheck { inputs, eps } => {
            let (v, ok) = cmd_gradcheck(&ctx, inputs, *eps)?;
            emit(&ctx, &v, true)?;
            if !ok {
                log::error!("gradient check failed: max relative error above {GRADCHECK_TOLERANCE}");
                return Ok(EXIT_GENERIC);
            }
        }
        Command::Gen { config } => emit(&ctx, &cmd_gen(&ctx, config)?, false)?,
        Command::Train { data, config, constraints, epochs } => {
            let v = cmd_train(&ctx, data, config.as_deref(), constraints.as_deref(), *epochs)?;
            emit(&ctx, &v, false)?
        }
        Command::Eval { data, checkpoint, task, group_size, threshold, constraints } => {
            let v = cmd_eval(
                &ctx,
                data,
                checkpoint.as_deref(),
                *task,
                *group_size,
                *threshold,
                constraints.as_deref(),
            )?;
            emit(&ctx, &v, true)?
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (program name first), runs the subcommand and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("LASER_LOG", "warn"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_GENERIC } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
