use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use etuk::inference::{alpha_grid, linear_gain_weights, topk_infer};
use etuk::matrix::save_predictions;
use etuk::metrics::{load_label_weights, load_weights, save_weights, weight_compute, WeightKind, WeightScheme};
use etuk::plt::load_node_scores;
use etuk::synth::SyntheticSpec;
use etuk::*;

#[derive(Parser)]
#[command(name = "etuk", version, about = "Budgeted at-k multi-label prediction")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict exactly k labels per instance.
    Infer(InferArgs),
    /// Compute the @k report of predictions against labels.
    Eval(EvalArgs),
    /// Exhaustively optimize a small instance.
    Oracle(OracleArgs),
    /// Derive per-label weights from label priors.
    Weights(WeightsArgs),
    /// Top-k search over a probabilistic label tree.
    Plt(PltArgs),
    /// Generate a synthetic long-tailed dataset.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Topk,
    WeightedTopk,
    PsTopk,
    PowerTopk,
    LogTopk,
    Bca,
    BcaCov,
    Greedy,
    GreedyCov,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Topk,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long, value_enum)]
    strategy: Strategy,
    #[arg(long)]
    k: usize,
    /// Probability matrix.
    #[arg(long)]
    probs: PathBuf,
    /// Prediction file; with --alpha-sweep, the prefix of all outputs.
    #[arg(long)]
    out: PathBuf,
    /// Metric for bca/greedy/weighted-topk, or the macro side of a sweep.
    #[arg(long)]
    metric: Option<String>,
    /// Shortlist size (0 disables).
    #[arg(long, default_value_t = 0)]
    k_prime: usize,
    #[arg(long, default_value_t = InferenceConfig::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    init: InitArg,
    #[arg(long, default_value_t = InferenceConfig::DEFAULT_MAX_PASSES)]
    max_passes: usize,
    /// Per-label weight file for weighted-topk.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Label priors for ps-topk, power-topk and log-topk.
    #[arg(long)]
    priors: Option<PathBuf>,
    /// Training-set size behind the priors (default: number of rows).
    #[arg(long)]
    n_train: Option<usize>,
    /// Weight scheme parameters, e.g. `propensity:0.55:1.5` or `power:0.5`.
    #[arg(long)]
    scheme: Option<String>,
    /// `start:end:step`; runs bca on the instance-p / metric mixture per alpha.
    #[arg(long)]
    alpha_sweep: Option<String>,
    /// Ground truth; prints (or, in a sweep, writes) the @k report.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    preds: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    ps_weights: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    metric: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    probs: PathBuf,
    /// Best prediction matrix; the value goes to `<out>.value`.
    #[arg(long)]
    out: PathBuf,
    /// Maximize the exact expectation instead of the semi-empirical one.
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct WeightsArgs {
    /// `propensity[:a:b]`, `power[:beta]` or `log`.
    #[arg(long)]
    scheme: String,
    #[arg(long)]
    priors: PathBuf,
    #[arg(long)]
    n_train: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PltArgs {
    #[arg(long)]
    tree: PathBuf,
    /// Per-node scores, one full row per instance.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    k: usize,
    /// Per-label gain weights (default: all ones).
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    power: f64,
    #[arg(long, default_value_t = 3.0)]
    avg_labels: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving probs.txt, labels.txt and priors.txt.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Infer(a) => infer(a),
        Command::Eval(a) => eval(a),
        Command::Oracle(a) => oracle(a),
        Command::Weights(a) => weights(a),
        Command::Plt(a) => plt(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io { .. } => 1,
                Error::Capability(_) => 3,
                _ => 2,
            })
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn required<'a, T>(value: &'a Option<T>, flag: &str, strategy: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::Config(format!("--{flag} is required for {strategy}")))
}

fn infer(a: InferArgs) -> Result<()> {
    let probs = SparseRowMatrix::load(&a.probs, MatrixKind::Probabilities)?;
    let cfg = InferenceConfig {
        k: a.k,
        k_prime: a.k_prime,
        epsilon: a.epsilon,
        seed: a.seed,
        init: match a.init {
            InitArg::Random => Init::RandomK,
            InitArg::Topk => Init::TopK,
        },
        max_passes: a.max_passes,
    };
    cfg.validate(probs.n_cols())?;
    let labels = a
        .labels
        .as_ref()
        .map(|p| SparseRowMatrix::load(p, MatrixKind::Binary))
        .transpose()?;
    if let Some(grid) = &a.alpha_sweep {
        return sweep(&a, &probs, &cfg, grid, labels.as_ref());
    }
    let metric = a.metric.as_deref().map(MetricSpec::parse).transpose()?;
    let name = a.strategy.to_possible_value().unwrap().get_name().to_string();
    let report = match a.strategy {
        Strategy::Topk => topk_infer(&probs, &cfg)?,
        Strategy::WeightedTopk => {
            let metric = match (&a.weights, metric) {
                (Some(path), _) => MetricSpec::weighted(load_label_weights(path)?),
                (None, Some(metric)) => metric,
                (None, None) => {
                    return Err(Error::Config("weighted-topk needs --weights or a linear --metric".into()))
                }
            };
            let (w11, w01) = linear_gain_weights(&metric, &RunningStats::q_hat_of(&probs), a.k)?;
            weighted_topk_infer(&probs, &w11, &w01, &cfg)?
        }
        Strategy::PsTopk | Strategy::PowerTopk | Strategy::LogTopk => {
            let priors = load_weights(required(&a.priors, "priors", &name)?)?;
            let kind = prior_scheme(a.strategy, a.scheme.as_deref())?;
            let scheme = WeightScheme {
                kind,
                priors,
                n_train: a.n_train.unwrap_or(probs.n_rows()),
            };
            let w11 = weight_compute(&scheme, a.k)?;
            let w01 = vec![0.0; w11.len()];
            weighted_topk_infer(&probs, &w11, &w01, &cfg)?
        }
        Strategy::Bca => bca_infer(&probs, required(&metric, "metric", &name)?, &cfg)?,
        Strategy::Greedy => greedy_infer(&probs, required(&metric, "metric", &name)?, &cfg)?,
        Strategy::BcaCov => bca_coverage_infer(&probs, &cfg)?,
        Strategy::GreedyCov => greedy_coverage_infer(&probs, &cfg)?,
    };
    save_predictions(&a.out, &report.predictions, probs.n_cols())?;
    write(&with_suffix(&a.out, ".trace.tsv"), &report.trace_tsv())?;
    println!(
        "strategy={name} passes={} objective={} wall_time={:.3}s",
        report.passes,
        report.final_objective(),
        report.wall_time
    );
    if let Some(labels) = &labels {
        print!("{}", evaluate(&report.predictions, labels, a.k, None)?.to_key_values());
    }
    Ok(())
}

fn prior_scheme(strategy: Strategy, scheme: Option<&str>) -> Result<WeightKind> {
    let kind = match scheme {
        Some(text) => WeightKind::parse(text)?,
        None => match strategy {
            Strategy::PsTopk => WeightKind::parse("propensity")?,
            Strategy::PowerTopk => WeightKind::parse("power")?,
            _ => WeightKind::Log,
        },
    };
    let matches = matches!(
        (strategy, kind),
        (Strategy::PsTopk, WeightKind::Propensity { .. })
            | (Strategy::PowerTopk, WeightKind::PowerLaw { .. })
            | (Strategy::LogTopk, WeightKind::Log)
    );
    if !matches {
        return Err(Error::Config("--scheme does not match the strategy".into()));
    }
    Ok(kind)
}

fn sweep(
    a: &InferArgs,
    probs: &SparseRowMatrix,
    cfg: &InferenceConfig,
    grid: &str,
    labels: Option<&SparseRowMatrix>,
) -> Result<()> {
    if !matches!(a.strategy, Strategy::Bca) {
        return Err(Error::Config("--alpha-sweep runs with --strategy bca".into()));
    }
    let labels = labels.ok_or_else(|| Error::Config("--alpha-sweep needs --labels".into()))?;
    let metric = MetricSpec::parse(a.metric.as_deref().unwrap_or("macro-f:1"))?;
    let points = alpha_sweep(probs, &metric, &alpha_grid(grid)?, cfg)?;
    let mut tsv = String::from("alpha\tpasses\tobjective");
    let mut header_done = false;
    for p in &points {
        let tag = format!(".alpha-{:.2}", p.alpha);
        save_predictions(with_suffix(&a.out, &format!("{tag}.txt")), &p.report.predictions, probs.n_cols())?;
        let report = evaluate(&p.report.predictions, labels, cfg.k, None)?;
        write(&with_suffix(&a.out, &format!("{tag}.eval")), &report.to_key_values())?;
        if !header_done {
            for (key, _) in report.entries() {
                tsv.push('\t');
                tsv.push_str(&key);
            }
            tsv.push('\n');
            header_done = true;
        }
        tsv.push_str(&format!("{}\t{}\t{}", p.alpha, p.report.passes, p.report.final_objective()));
        for (_, v) in report.entries() {
            tsv.push_str(&format!("\t{v}"));
        }
        tsv.push('\n');
    }
    write(&with_suffix(&a.out, ".sweep.tsv"), &tsv)?;
    print!("{tsv}");
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let labels = SparseRowMatrix::load(&a.labels, MatrixKind::Binary)?;
    let preds = SparseRowMatrix::load(&a.preds, MatrixKind::Binary)?.to_predictions(a.k)?;
    let ps = a.ps_weights.as_ref().map(load_weights).transpose()?;
    let report = evaluate(&preds, &labels, a.k, ps.as_deref())?;
    if a.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_key_values());
    }
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<()> {
    let probs = SparseRowMatrix::load(&a.probs, MatrixKind::Probabilities)?;
    let metric = MetricSpec::parse(&a.metric)?;
    let result = if a.exact {
        brute_force_etu(&probs, &metric, a.k)?
    } else {
        brute_force_semi_etu(&probs, &metric, a.k)?
    };
    save_predictions(&a.out, &result.best_preds, probs.n_cols())?;
    write(&with_suffix(&a.out, ".value"), &format!("{}\n", result.best_value))?;
    println!(
        "value={} candidates={}",
        result.best_value, result.candidates_evaluated
    );
    Ok(())
}

fn weights(a: WeightsArgs) -> Result<()> {
    let scheme = WeightScheme {
        kind: WeightKind::parse(&a.scheme)?,
        priors: load_weights(&a.priors)?,
        n_train: a.n_train,
    };
    save_weights(&a.out, &weight_compute(&scheme, a.k)?)
}

fn plt(a: PltArgs) -> Result<()> {
    let tree = LabelTree::load(&a.tree)?;
    let scores = load_node_scores(&a.scores, &tree)?;
    let gain = GainSpec::Weighted(match &a.weights {
        Some(path) => load_weights(path)?,
        None => vec![1.0; tree.n_labels()],
    });
    let mut preds = Vec::with_capacity(scores.len());
    let mut expansions = 0;
    for row in &scores {
        let (pred, e) = astar_top_k(&tree, row, &gain, a.k)?;
        preds.push(pred);
        expansions += e;
    }
    save_predictions(&a.out, &preds, tree.n_labels())?;
    println!(
        "instances={} expansions={expansions} nodes={}",
        preds.len(),
        tree.n_nodes()
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let data = generate_synthetic(&SyntheticSpec {
        n: a.n,
        m: a.m,
        power_exponent: a.power,
        avg_labels_per_instance: a.avg_labels,
        seed: a.seed,
    })?;
    fs::create_dir_all(&a.out_dir).map_err(|source| Error::Io {
        path: a.out_dir.clone(),
        source,
    })?;
    data.probs.save(a.out_dir.join("probs.txt"), false)?;
    data.labels.save(a.out_dir.join("labels.txt"), true)?;
    save_weights(a.out_dir.join("priors.txt"), &data.priors)?;
    println!(
        "n={} m={} probability entries={} label entries={}",
        a.n,
        a.m,
        data.probs.nnz(),
        data.labels.nnz()
    );
    Ok(())
}
