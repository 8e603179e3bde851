use crate::ingest::{ingest, Format, IngestSpec};
use crate::tree_format::{number, parse_document, tree_value, Annotations, TreeDocument};
use bct_core::alphabet::{Alphabet, Series, Symbol};
use bct_core::count_tree::{CountTree, TreeOptions};
use bct_core::error::BctError;
use bct_core::exact::{bct_map, ctw, kbct_with_cap, DEFAULT_WORK_CAP};
use bct_core::likelihood::{DirichletHyper, ParamSet};
use bct_core::mcmc::{run_chain, run_chains, McmcConfig, Trace};
use bct_core::model::{count_models, Context, TreeModel};
use bct_core::posterior::{
    bayes_factor, point_estimates, rao_blackwell_weighted, PosteriorReport, ReportEntry,
};
use bct_core::predict::evaluate_log_loss;
use bct_core::prior::default_beta;
use bct_core::simulate::{fixture, sample_chain, seeded_rng, spike_train, FIXTURES};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Environment variable overriding the count-tree node budget.
pub const NODE_CAP_VAR: &str = "BCT_NODE_CAP";
/// Environment variable overriding the top-k work cap.
pub const WORK_CAP_VAR: &str = "BCT_KBCT_WORK_CAP";

/// Largest `count-models` result printed, in bits.
const MAX_COUNT_BITS: f64 = 1e7;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Resource(String),
    #[error(transparent)]
    Core(#[from] BctError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Resource(_) => 4,
            CliError::Core(e) if e.is_resource_cap() => 4,
            CliError::Core(e) => match e {
                BctError::InvalidBeta(_)
                | BctError::BetaBelowHalf(_)
                | BctError::ZeroK
                | BctError::InvalidJumpProbability(_)
                | BctError::InvalidBurnIn(_)
                | BctError::InvalidHyperparameter(_)
                | BctError::HyperLength { .. }
                | BctError::DepthTooLarge(_)
                | BctError::UnknownFixture(_) => 2,
                _ => 3,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser, Debug)]
#[command(
    name = "bct",
    version,
    about = "Bayesian context tree inference for discrete time series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the prior-predictive likelihood log P*_D(x).
    Ctw(DataArgs),
    /// Print the MAP model with its posterior.
    Map(DataArgs),
    /// Print the k a posteriori most likely models.
    Topk {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Print the posterior of a given model.
    Posterior {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Print the Bayes factor and posterior odds of two models.
    Bf {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
    },
    /// Sample models from the posterior.
    Mcmc(McmcArgs),
    /// Sequential prediction on the tail of the series.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        /// Fraction of the series used for training.
        #[arg(long)]
        train_frac: f64,
        /// Write the cumulative loss curve as a table.
        #[arg(long)]
        curve_out: Option<PathBuf>,
    },
    /// Simulate a series from a fixture chain or a model document.
    Sample(SampleArgs),
    /// Print the number of models of depth at most D.
    CountModels {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        depth: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ContextMode {
    /// The first D symbols of the input form the initial context.
    Consume,
    /// The initial context is given by --context.
    Explicit,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Input file.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "symbols-text")]
    pub format: Format,
    /// Comma-separated symbol labels, in index order.
    #[arg(long, conflicts_with = "m")]
    pub alphabet: Option<String>,
    /// Alphabet size, with labels 0..m-1.
    #[arg(long)]
    pub m: Option<usize>,
    /// Comma-separated ascending cut points for quantized-numeric input.
    #[arg(long, allow_hyphen_values = true)]
    pub thresholds: Option<String>,
    /// Quantize percentage changes between successive values.
    #[arg(long)]
    pub percent_change: bool,
    #[arg(long, value_enum, default_value = "consume")]
    pub context_mode: ContextMode,
    /// Initial context labels in time order, for --context-mode explicit.
    #[arg(long, allow_hyphen_values = true)]
    pub context: Option<String>,
    /// Maximum model depth D.
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    /// Prior hyperparameter; defaults to 1 - 2^-(m-1).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Dirichlet hyperparameter: a number, or a JSON file with
    /// `{"default": [..], "contexts": [{"context": [..], "gamma": [..]}]}`.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SamplerKind {
    Rw,
    Jump,
}

#[derive(Args, Debug)]
pub struct McmcArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "rw")]
    pub sampler: SamplerKind,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of iterations discarded.
    #[arg(long, default_value_t = 0.1)]
    pub burn_in: f64,
    /// Jump probability of the jump sampler.
    #[arg(long, default_value_t = 0.5)]
    pub jump_p: f64,
    /// Size of the top-k set the jump sampler jumps to.
    #[arg(long, default_value_t = 3)]
    pub topk: usize,
    /// Independent chains run concurrently.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Number of most visited models listed per chain.
    #[arg(long, default_value_t = 10)]
    pub report: usize,
    /// Write each chain's trace as a table; chains after the first get a `.N` suffix.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Context labels, most recent first, whose leaf parameters are sampled.
    #[arg(long)]
    pub probe: Option<String>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["fixture", "model"]))]
pub struct SampleArgs {
    /// One of ternary5, renewal, lag3, spikes.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Tree document with `theta` at every leaf.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Extra leading symbols to serve as initial context.
    #[arg(long, default_value_t = 0)]
    pub depth: usize,
    /// Spike probability per bin for the spikes fixture.
    #[arg(long, default_value_t = 0.05)]
    pub rate: f64,
    /// Silent bins after each spike for the spikes fixture.
    #[arg(long, default_value_t = 2)]
    pub refractory: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one command, writing its output document to `out`.
pub fn execute<W: Write>(command: Command, out: &mut W) -> CliResult<()> {
    match command {
        Command::Ctw(data) => cmd_ctw(&data, out),
        Command::Map(data) => cmd_map(&data, out),
        Command::Topk { data, k } => cmd_topk(&data, k, out),
        Command::Posterior { data, model } => cmd_posterior(&data, &model, out),
        Command::Bf {
            data,
            model_a,
            model_b,
        } => cmd_bf(&data, &model_a, &model_b, out),
        Command::Mcmc(args) => cmd_mcmc(&args, out),
        Command::Predict {
            data,
            train_frac,
            curve_out,
        } => cmd_predict(&data, train_frac, curve_out.as_deref(), out),
        Command::Sample(args) => cmd_sample(&args, out),
        Command::CountModels { m, depth } => cmd_count_models(m, depth, out),
    }
}

fn emit<W: Write>(out: &mut W, v: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    writeln!(out, "{text}").map_err(BctError::from)?;
    Ok(())
}

fn env_cap(var: &str) -> CliResult<Option<u64>> {
    match std::env::var(var) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{var} must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect()
}

fn symbols_of(labels: &str, alphabet: &Alphabet, what: &str) -> CliResult<Vec<Symbol>> {
    split_list(labels)
        .into_iter()
        .map(|t| {
            alphabet
                .index_of(t)
                .ok_or_else(|| usage(format!("unknown symbol {t:?} in {what}")))
        })
        .collect()
}

/// Data ready for inference.
struct Loaded {
    series: Series,
    tree: CountTree,
    beta: f64,
}

impl Loaded {
    fn alphabet(&self) -> &Alphabet {
        self.series.alphabet()
    }

    fn summary(&self) -> Map<String, Value> {
        let mut s = Map::new();
        s.insert("n".into(), json!(self.series.len()));
        s.insert("m".into(), json!(self.series.m()));
        s.insert("depth".into(), json!(self.tree.max_depth()));
        s.insert("beta".into(), json!(self.beta));
        s
    }
}

fn read_series(args: &DataArgs) -> CliResult<Series> {
    let mut spec = IngestSpec::new(args.format);
    spec.percent_change = args.percent_change;
    let fixed_alphabet = matches!(args.format, Format::DnaFasta | Format::QuantizedNumeric);
    if fixed_alphabet && (args.alphabet.is_some() || args.m.is_some()) {
        return Err(usage(
            "--alphabet and --m do not apply to dna-fasta or quantized-numeric input",
        ));
    }
    if let Some(labels) = &args.alphabet {
        let labels = split_list(labels).into_iter().map(str::to_string).collect();
        spec.alphabet = Some(Alphabet::new(labels).map_err(|e| usage(format!("--alphabet: {e}")))?);
    }
    if let Some(m) = args.m {
        spec.alphabet = Some(Alphabet::numeric(m).map_err(|e| usage(format!("--m: {e}")))?);
    }
    match (&args.thresholds, args.format) {
        (Some(t), Format::QuantizedNumeric) => {
            spec.thresholds = split_list(t)
                .into_iter()
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|_| usage(format!("invalid threshold {x:?}")))
                })
                .collect::<CliResult<_>>()?;
        }
        (None, Format::QuantizedNumeric) => {
            return Err(usage("quantized-numeric input needs --thresholds"))
        }
        (Some(_), _) => {
            return Err(usage(
                "--thresholds only applies to quantized-numeric input",
            ))
        }
        (None, _) => {}
    }
    if args.percent_change && args.format != Format::QuantizedNumeric {
        return Err(usage(
            "--percent-change only applies to quantized-numeric input",
        ));
    }
    let (alphabet, symbols) = ingest(&args.input, &spec)?;
    let series = match (args.context_mode, &args.context) {
        (ContextMode::Consume, None) => Series::consume_prefix(alphabet, symbols, args.depth)?,
        (ContextMode::Consume, Some(_)) => {
            return Err(usage("--context requires --context-mode explicit"))
        }
        (ContextMode::Explicit, None) => {
            return Err(usage("--context-mode explicit requires --context"))
        }
        (ContextMode::Explicit, Some(c)) => {
            let context = symbols_of(c, &alphabet, "--context")?;
            if context.len() < args.depth {
                return Err(BctError::InsufficientContext {
                    needed: args.depth,
                    available: context.len(),
                }
                .into());
            }
            Series::new(alphabet, context, symbols)?
        }
    };
    Ok(series)
}

fn parse_gamma(spec: &str, alphabet: &Alphabet) -> CliResult<DirichletHyper> {
    let m = alphabet.size();
    if let Ok(g) = spec.parse::<f64>() {
        return Ok(DirichletHyper::symmetric(m, g)?);
    }
    let text =
        std::fs::read_to_string(spec).map_err(|e| usage(format!("--gamma {spec:?}: {e}")))?;
    let v: Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("--gamma {spec:?}: {e}")))?;
    let vector = |v: &Value, loc: &str| -> CliResult<Vec<f64>> {
        match v {
            Value::Number(n) => Ok(vec![n.as_f64().unwrap_or(f64::NAN); m]),
            Value::Array(a) => a
                .iter()
                .map(|x| {
                    x.as_f64()
                        .ok_or_else(|| usage(format!("--gamma: {loc} must contain numbers")))
                })
                .collect(),
            _ => Err(usage(format!(
                "--gamma: {loc} must be a number or an array"
            ))),
        }
    };
    let default = match v.get("default") {
        Some(d) => vector(d, "default")?,
        None => DirichletHyper::jeffreys(m).default_vector().to_vec(),
    };
    let mut hyper = DirichletHyper::new(default)?;
    if let Some(list) = v.get("contexts") {
        let list = list
            .as_array()
            .ok_or_else(|| usage("--gamma: contexts must be an array"))?;
        for (i, entry) in list.iter().enumerate() {
            let loc = format!("contexts[{i}]");
            let ctx = entry
                .get("context")
                .and_then(Value::as_array)
                .ok_or_else(|| {
                    usage(format!("--gamma: {loc}.context must be an array of labels"))
                })?;
            let ctx: Context = ctx
                .iter()
                .map(|l| {
                    let label = match l {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    alphabet
                        .index_of(&label)
                        .ok_or_else(|| usage(format!("--gamma: unknown symbol {label:?} in {loc}")))
                })
                .collect::<CliResult<_>>()?;
            let gamma = vector(
                entry.get("gamma").unwrap_or(&Value::Null),
                &format!("{loc}.gamma"),
            )?;
            hyper = hyper.with_context(ctx, gamma)?;
        }
    }
    Ok(hyper)
}

fn load(args: &DataArgs) -> CliResult<Loaded> {
    let series = read_series(args)?;
    let m = series.m();
    let hyper = args
        .gamma
        .as_deref()
        .map(|g| parse_gamma(g, series.alphabet()))
        .transpose()?;
    let node_cap = env_cap(NODE_CAP_VAR)?.map(|c| c as usize);
    let tree = CountTree::build_with(&series, args.depth, &TreeOptions { hyper, node_cap })?;
    let beta = args.beta.unwrap_or_else(|| default_beta(m));
    if !(beta > 0.0 && beta < 1.0) {
        return Err(BctError::InvalidBeta(beta).into());
    }
    Ok(Loaded { series, tree, beta })
}

fn load_model(path: &Path, data: &Loaded) -> CliResult<TreeDocument> {
    let text =
        std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let doc = parse_document(&text)?;
    if doc.model.m() != data.series.m() {
        return Err(BctError::TreeFormat {
            location: "$.m".into(),
            message: format!(
                "model has m = {}, data has m = {}",
                doc.model.m(),
                data.series.m()
            ),
        }
        .into());
    }
    Ok(doc)
}

/// Posterior means `E(θ_s | x, T)` at the leaves of `model`.
fn posterior_means(model: &TreeModel, tree: &CountTree) -> CliResult<ParamSet> {
    let hyper = tree.hyper();
    let pairs = model
        .leaves()
        .iter()
        .map(|s| {
            let a = tree.counts_at(s);
            let theta = (0..tree.m())
                .map(|j| point_estimates(&a.0, j as Symbol, hyper.at(s)).map(|p| p.post_mean))
                .collect::<Result<Vec<f64>, _>>()?;
            Ok((s.clone(), theta))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ParamSet::from_pairs(tree.m(), pairs)?)
}

fn entry_fields(e: &ReportEntry, log_evidence: f64) -> Map<String, Value> {
    let mut s = Map::new();
    s.insert("log_prior".into(), number(e.log_prior));
    s.insert("log_joint".into(), number(e.log_joint));
    s.insert("log_posterior".into(), number(e.log_posterior));
    s.insert("posterior".into(), number(e.posterior()));
    s.insert("log_evidence".into(), number(log_evidence));
    s.insert("leaves".into(), json!(e.model.num_leaves()));
    s.insert("model_depth".into(), json!(e.model.depth()));
    s
}

fn annotated_tree(e: &ReportEntry, report: &PosteriorReport, data: &Loaded) -> CliResult<Value> {
    let theta = posterior_means(&e.model, &data.tree)?;
    let notes = Annotations {
        counts: Some(&data.tree),
        theta: Some(&theta),
        summary: entry_fields(e, report.log_evidence),
    };
    Ok(tree_value(&e.model, data.alphabet(), &notes))
}

fn cmd_ctw<W: Write>(args: &DataArgs, out: &mut W) -> CliResult<()> {
    let data = load(args)?;
    let lp = ctw(&data.tree, data.beta)?;
    let mut doc = data.summary();
    doc.insert("schema".into(), json!("bct-ctw/1"));
    doc.insert("log_evidence".into(), number(lp.ln()));
    doc.insert("log2_evidence".into(), number(lp.log2()));
    doc.insert("nodes".into(), json!(data.tree.num_nodes()));
    emit(out, &Value::Object(doc))
}

fn cmd_map<W: Write>(args: &DataArgs, out: &mut W) -> CliResult<()> {
    let data = load(args)?;
    let (model, _) = bct_map(&data.tree, data.beta)?;
    let report = PosteriorReport::new(&data.tree, &[model], data.beta)?;
    let mut doc = annotated_tree(&report.entries[0], &report, &data)?;
    if let Value::Object(a) = &mut doc["annotations"] {
        a.extend(data.summary());
    }
    emit(out, &doc)
}

fn top_models(data: &Loaded, k: usize) -> CliResult<Vec<TreeModel>> {
    let cap = env_cap(WORK_CAP_VAR)?.unwrap_or(DEFAULT_WORK_CAP);
    Ok(kbct_with_cap(&data.tree, data.beta, k, cap)?
        .into_iter()
        .map(|(t, _)| t)
        .collect())
}

fn cmd_topk<W: Write>(args: &DataArgs, k: usize, out: &mut W) -> CliResult<()> {
    let data = load(args)?;
    let models = top_models(&data, k)?;
    let report = PosteriorReport::new(&data.tree, &models, data.beta)?;
    let entries = report
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            Ok(json!({
                "rank": i + 1,
                "log_joint": number(e.log_joint),
                "log_posterior": number(e.log_posterior),
                "posterior": number(e.posterior()),
                "odds_first_to_this": number(report.odds(0, i)),
                "tree": annotated_tree(e, &report, &data)?,
            }))
        })
        .collect::<CliResult<Vec<Value>>>()?;
    let mut doc = data.summary();
    doc.insert("schema".into(), json!("bct-topk/1"));
    doc.insert("log_evidence".into(), number(report.log_evidence));
    doc.insert("models".into(), Value::Array(entries));
    emit(out, &Value::Object(doc))
}

fn cmd_posterior<W: Write>(args: &DataArgs, model: &Path, out: &mut W) -> CliResult<()> {
    let data = load(args)?;
    let doc = load_model(model, &data)?;
    let report = PosteriorReport::new(&data.tree, &[doc.model], data.beta)?;
    let mut fields = entry_fields(&report.entries[0], report.log_evidence);
    fields.extend(data.summary());
    fields.insert("schema".into(), json!("bct-posterior/1"));
    emit(out, &Value::Object(fields))
}

fn cmd_bf<W: Write>(args: &DataArgs, a: &Path, b: &Path, out: &mut W) -> CliResult<()> {
    let data = load(args)?;
    let (a, b) = (load_model(a, &data)?.model, load_model(b, &data)?.model);
    let log_bf = bayes_factor(&data.tree, &a, &b)?;
    let report = PosteriorReport::new(&data.tree, &[a, b], data.beta)?;
    let mut doc = data.summary();
    doc.insert("schema".into(), json!("bct-bf/1"));
    doc.insert("log_bayes_factor".into(), number(log_bf));
    doc.insert("log_posterior_odds".into(), number(report.log_odds[0][1]));
    doc.insert("posterior_odds".into(), number(report.odds(0, 1)));
    doc.insert(
        "log_posterior_a".into(),
        number(report.entries[0].log_posterior),
    );
    doc.insert(
        "log_posterior_b".into(),
        number(report.entries[1].log_posterior),
    );
    emit(out, &Value::Object(doc))
}

fn chain_summary(
    trace: &Trace,
    args: &McmcArgs,
    data: &Loaded,
    probe: Option<&Context>,
) -> CliResult<Value> {
    let visits = trace.visit_counts();
    let models: Vec<Value> = visits
        .iter()
        .take(args.report)
        .map(|(t, c)| {
            json!({
                "visits": c,
                "frequency": trace.frequency(t),
                "tree": tree_value(t, data.alphabet(), &Annotations::default()),
            })
        })
        .collect();
    let mut s = Map::new();
    s.insert("recorded".into(), json!(trace.len()));
    s.insert(
        "acceptance_rate".into(),
        trace.acceptance_rate().map_or(Value::Null, number),
    );
    s.insert("distinct_models".into(), json!(visits.len()));
    s.insert("depth_histogram".into(), json!(trace.depth_histogram()));
    s.insert("models".into(), Value::Array(models));
    if let Some(ctx) = probe {
        let rb = (0..data.series.m())
            .map(|j| {
                rao_blackwell_weighted(
                    visits.iter().copied(),
                    &data.tree,
                    ctx,
                    j as Symbol,
                    data.tree.hyper(),
                )
                .map(number)
            })
            .collect::<Result<Vec<Value>, _>>()?;
        s.insert("theta_rao_blackwell".into(), Value::Array(rb));
        s.insert("theta_samples".into(), json!(trace.theta_samples()));
    }
    Ok(Value::Object(s))
}

fn trace_path(base: &Path, chain: usize) -> PathBuf {
    if chain == 0 {
        base.to_path_buf()
    } else {
        let mut p = base.as_os_str().to_owned();
        p.push(format!(".{chain}"));
        PathBuf::from(p)
    }
}

fn cmd_mcmc<W: Write>(args: &McmcArgs, out: &mut W) -> CliResult<()> {
    if args.chains == 0 {
        return Err(usage("--chains must be at least 1"));
    }
    let data = load(&args.data)?;
    let mut cfg = McmcConfig::new(args.iters, args.seed, data.beta);
    cfg.burn_in = args.burn_in;
    let probe = args
        .probe
        .as_deref()
        .map(|p| symbols_of(p, data.alphabet(), "--probe"))
        .transpose()?;
    if probe.as_ref().is_some_and(|p| p.len() < args.data.depth) {
        return Err(usage(format!(
            "--probe needs at least D = {} symbols",
            args.data.depth
        )));
    }
    cfg.theta_probe = probe.clone();
    if args.sampler == SamplerKind::Jump {
        cfg = cfg.with_jump(args.jump_p, top_models(&data, args.topk)?);
    }
    let traces = if args.chains == 1 {
        vec![run_chain(&cfg, &data.tree)?]
    } else {
        run_chains(&cfg, &data.tree, args.chains)?
    };
    if let Some(base) = &args.trace_out {
        for (c, t) in traces.iter().enumerate() {
            let f = std::fs::File::create(trace_path(base, c)).map_err(BctError::from)?;
            t.write_table(std::io::BufWriter::new(f))
                .map_err(BctError::from)?;
        }
    }
    let chains = traces
        .iter()
        .map(|t| chain_summary(t, args, &data, probe.as_ref()))
        .collect::<CliResult<Vec<Value>>>()?;
    let mut doc = data.summary();
    doc.insert("schema".into(), json!("bct-mcmc/1"));
    doc.insert(
        "sampler".into(),
        json!(if args.sampler == SamplerKind::Jump {
            "jump"
        } else {
            "rw"
        }),
    );
    doc.insert("iterations".into(), json!(args.iters));
    doc.insert("burn_in".into(), json!(args.burn_in));
    doc.insert("seed".into(), json!(args.seed));
    doc.insert("chains".into(), Value::Array(chains));
    emit(out, &Value::Object(doc))
}

fn cmd_predict<W: Write>(
    args: &DataArgs,
    train_frac: f64,
    curve_out: Option<&Path>,
    out: &mut W,
) -> CliResult<()> {
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(usage(format!(
            "--train-frac must lie in [0, 1], got {train_frac}"
        )));
    }
    let data = load(args)?;
    let train_len = (train_frac * data.series.len() as f64).floor() as usize;
    let curve = evaluate_log_loss(
        &data.series,
        train_len,
        args.depth,
        data.beta,
        &tree_options(&data)?,
    )?;
    if let Some(path) = curve_out {
        let f = std::fs::File::create(path).map_err(BctError::from)?;
        curve
            .write_table(std::io::BufWriter::new(f))
            .map_err(BctError::from)?;
    }
    let mut doc = data.summary();
    doc.insert("schema".into(), json!("bct-predict/1"));
    doc.insert("train_len".into(), json!(train_len));
    doc.insert("test_len".into(), json!(curve.len()));
    doc.insert("cumulative_loss_bits".into(), number(curve.total_bits()));
    doc.insert("cumulative_loss_nats".into(), number(curve.total_nats()));
    doc.insert("bits_per_symbol".into(), number(curve.bits_per_symbol()));
    doc.insert(
        "log_evidence".into(),
        number(ctw(&data.tree, data.beta)?.ln()),
    );
    emit(out, &Value::Object(doc))
}

fn tree_options(data: &Loaded) -> CliResult<TreeOptions> {
    let hyper = data.tree.hyper();
    Ok(TreeOptions {
        hyper: (!hyper.is_jeffreys()).then(|| hyper.clone()),
        node_cap: env_cap(NODE_CAP_VAR)?.map(|c| c as usize),
    })
}

fn cmd_sample<W: Write>(args: &SampleArgs, out: &mut W) -> CliResult<()> {
    let mut rng = seeded_rng(args.seed);
    let (labels, symbols): (Vec<String>, Vec<Symbol>) = if let Some(name) = &args.fixture {
        if name == "spikes" {
            let s = spike_train(args.n, args.rate, args.refractory, args.depth, &mut rng)
                .map_err(|e| usage(format!("--rate: {e}")))?;
            (s.alphabet().labels().to_vec(), s.full())
        } else {
            let f = fixture(name).map_err(|_| {
                usage(format!(
                    "unknown fixture {name:?}; expected one of {}, spikes",
                    FIXTURES.join(", ")
                ))
            })?;
            let s = f.sample(args.n, args.depth, &mut rng)?;
            (s.alphabet().labels().to_vec(), s.full())
        }
    } else {
        let path = args.model.as_ref().expect("clap requires a source");
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let doc = parse_document(&text)?;
        let theta = doc.theta.ok_or_else(|| BctError::TreeFormat {
            location: "$.root".into(),
            message: "every leaf needs a theta vector for sampling".into(),
        })?;
        let start = vec![0; doc.model.depth()];
        let s = sample_chain(&doc.model, &theta, args.n + args.depth, &start, &mut rng)?;
        (doc.labels, s.data().to_vec())
    };
    let mut text = String::with_capacity(symbols.len() * 2);
    for (i, &x) in symbols.iter().enumerate() {
        if i > 0 {
            text.push(if i % 60 == 0 { '\n' } else { ' ' });
        }
        text.push_str(&labels[x as usize]);
    }
    text.push('\n');
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(BctError::from)?,
        None => out.write_all(text.as_bytes()).map_err(BctError::from)?,
    }
    Ok(())
}

fn cmd_count_models<W: Write>(m: usize, depth: usize, out: &mut W) -> CliResult<()> {
    if m < 2 {
        return Err(usage(format!("--m must be at least 2, got {m}")));
    }
    let mut bits = 1.0f64;
    for _ in 0..depth {
        bits = bits * m as f64 + 1.0;
        if bits > MAX_COUNT_BITS {
            return Err(CliError::Resource(format!(
                "the number of models for m = {m}, D = {depth} has more than {MAX_COUNT_BITS} bits"
            )));
        }
    }
    writeln!(out, "{}", count_models(m, depth)).map_err(BctError::from)?;
    Ok(())
}
