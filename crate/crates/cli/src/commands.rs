use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use spdalign::bench::{run_bench, BenchOptions};
use spdalign::gradcheck::{run_gradcheck, GradCheckOptions};
use spdalign::invariance::{run_invariance, InvarianceOptions};
use spdalign::io::{parse_cases, read_features, read_model, write_features, write_model, RunConfig};
use spdalign::metrics::{factor_breakdown, Metric, RankedCase, DEFAULT_K_MAX};
use spdalign::trainer::{accuracy_csv, evaluate, history_csv, run_experiment, Accuracy};
use spdalign::{DistanceKind, Error};

#[derive(Debug, Parser)]
#[command(name = "spdalign", version, about = "SPD scatter alignment toolkit")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare analytic gradients with central differences.
    Gradcheck(CheckArgs),
    /// Distance invariances, reduced-space isometry and Nyström exactness.
    Invariance(InvarianceArgs),
    /// Time the scatter distance in ambient and in reduced space.
    Bench(BenchArgs),
    /// Train on synthetic shifted data and write model, loss and report.
    Train(TrainArgs),
    /// Top-1 accuracy of a model dump on a feature container.
    Eval(EvalArgs),
    /// Top-k, top-k-n and averaged top-k-k from a case file.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Repeat to select several; all kinds when omitted.
    #[arg(long = "kind", value_parser = parse_kind)]
    kinds: Vec<DistanceKind>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct InvarianceArgs {
    #[command(flatten)]
    common: CheckArgs,
    /// Skip the d = 512 ambient-vs-reduced suite.
    #[arg(long)]
    no_isometry: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 4096)]
    d: usize,
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    nstar: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, value_parser = parse_kind, default_value = "jbld")]
    kind: DistanceKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write bench.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Also write report.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    cases: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    kmax: usize,
    /// Add rows per factor tag.
    #[arg(long)]
    breakdown: bool,
    /// With --breakdown, also rows per co-occurring tag pair.
    #[arg(long, requires = "breakdown")]
    pairs: bool,
    /// Also write metrics.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<DistanceKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub enum Failure {
    Checks(usize),
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(Error::Io(e))
    }
}

/// 2 for numerical breakdowns, 1 for everything else.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Singular { .. } | Error::NoConvergence { .. } | Error::NonFinite(_) | Error::Divergence { .. } => 2,
        _ => 1,
    }
}

fn kinds_or_all(kinds: &[DistanceKind]) -> Vec<DistanceKind> {
    if kinds.is_empty() {
        DistanceKind::ALL.to_vec()
    } else {
        let mut out = Vec::new();
        for k in DistanceKind::ALL {
            if kinds.contains(&k) {
                out.push(k);
            }
        }
        out
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Error(Error::Format(format!("{}: {e}", path.display()))))
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(dir.join(name), bytes)?;
    Ok(())
}

fn emit(text: &str) -> Result<(), Failure> {
    std::io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gradcheck(a) => gradcheck(a),
        Command::Invariance(a) => invariance(a),
        Command::Bench(a) => bench(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Metrics(a) => metrics(a),
    }
}

fn gradcheck(a: CheckArgs) -> Result<(), Failure> {
    let report = run_gradcheck(&GradCheckOptions {
        kinds: kinds_or_all(&a.kinds),
        trials: a.trials,
        seed: a.seed,
        corrupt: None,
    })?;
    let mut out = String::from("component,trials,max_rel_error,status\n");
    for r in &report.results {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        out.push_str(&format!("{},{},{:.6e},{status}\n", r.label(), r.trials, r.max_rel_error));
        if let Some(msg) = &r.failure {
            eprintln!("{}: {msg}", r.label());
        }
    }
    emit(&out)?;
    match report.failures().len() {
        0 => Ok(()),
        n => Err(Failure::Checks(n)),
    }
}

fn invariance(a: InvarianceArgs) -> Result<(), Failure> {
    let defaults = InvarianceOptions::default();
    let checks = run_invariance(&InvarianceOptions {
        kinds: kinds_or_all(&a.common.kinds),
        trials: a.common.trials,
        triangle_trials: 10 * a.common.trials,
        seed: a.common.seed,
        isometry: if a.no_isometry { None } else { defaults.isometry },
    })?;
    let mut out = String::from("check,trials,worst,tolerance,status\n");
    for c in &checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        out.push_str(&format!("{},{},{:.6e},{:.0e},{status}\n", c.name, c.trials, c.worst, c.tolerance));
        if let Some(msg) = &c.failure {
            eprintln!("{}: {msg}", c.name);
        }
    }
    emit(&out)?;
    match checks.iter().filter(|c| !c.passed()).count() {
        0 => Ok(()),
        n => Err(Failure::Checks(n)),
    }
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    let report = run_bench(&BenchOptions {
        dim: a.d,
        source: a.n,
        target: a.nstar,
        reps: a.reps,
        kind: a.kind,
        seed: a.seed,
        ..BenchOptions::default()
    })?;
    let csv = report.to_csv();
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        write(dir, "bench.csv", csv.as_bytes())?;
    }
    emit(&csv)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let bytes = read(p)?;
            let text = String::from_utf8(bytes).map_err(|_| Error::Format(format!("{}: not UTF-8", p.display())))?;
            Ok(RunConfig::parse(&text)?)
        }
    }
}

fn summary_row(name: &str, acc: &Accuracy) -> String {
    format!("{name},{},{},{:.6}\n", acc.correct, acc.total, acc.top1())
}

fn train(a: TrainArgs) -> Result<(), Failure> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.experiment.train.seed = seed;
        cfg.experiment.synth.seed = seed;
    }
    let result = run_experiment(&cfg.experiment)?;
    fs::create_dir_all(&a.out)?;
    write(&a.out, "model.bin", &write_model(&result.model)?)?;
    write(&a.out, "loss.csv", history_csv(&result.history).as_bytes())?;
    write(&a.out, "report.csv", accuracy_csv(&result.aligned).as_bytes())?;
    write(&a.out, "target_test.feat", &write_features(&result.data.target_test)?)?;
    write(&a.out, "config.txt", cfg.to_text().as_bytes())?;
    let mut summary = String::from("model,correct,total,accuracy\n");
    summary.push_str(&summary_row(cfg.experiment.align.kind.name(), &result.aligned));
    for (b, acc) in &result.baselines {
        summary.push_str(&summary_row(b.name(), acc));
    }
    write(&a.out, "summary.csv", summary.as_bytes())?;
    emit(&summary)
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let model = read_model(&read(&a.model)?)?;
    let data = read_features(&read(&a.data)?)?;
    let csv = accuracy_csv(&evaluate(&model, &data)?);
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        write(dir, "report.csv", csv.as_bytes())?;
    }
    emit(&csv)
}

/// Every top-k, top-k-n and the averaged measure for `k, n ≤ k_max`.
fn metric_list(k_max: usize) -> Vec<Metric> {
    let mut out: Vec<Metric> = (1..=k_max).map(Metric::TopK).collect();
    for k in 1..=k_max {
        out.extend((1..=k_max).map(|n| Metric::TopKN(k, n)));
    }
    out.push(Metric::AvgTopKK(k_max));
    out
}

fn metric_fields(m: Metric) -> (&'static str, usize, String) {
    match m {
        Metric::TopK(k) => ("top_k", k, String::new()),
        Metric::TopKN(k, n) => ("top_k_n", k, n.to_string()),
        Metric::AvgTopKK(k) => ("avg_top_kk", k, String::new()),
    }
}

/// Long-format table `group,count,metric,k,n,value`, groups in breakdown order.
pub fn metrics_csv(cases: &[RankedCase], k_max: usize, breakdown: bool, pairs: bool) -> spdalign::Result<String> {
    let metrics = metric_list(k_max);
    let mut tables = Vec::with_capacity(metrics.len());
    for &m in &metrics {
        let mut rows = factor_breakdown(cases, m, pairs)?;
        if !breakdown {
            rows.truncate(1);
        }
        tables.push(rows);
    }
    let mut out = String::from("group,count,metric,k,n,value\n");
    for g in 0..tables[0].len() {
        for (m, rows) in metrics.iter().zip(&tables) {
            let row = &rows[g];
            let (name, k, n) = metric_fields(*m);
            out.push_str(&format!("{},{},{name},{k},{n},{:.6}\n", row.group, row.count, row.value));
        }
    }
    Ok(out)
}

fn metrics(a: MetricsArgs) -> Result<(), Failure> {
    let bytes = read(&a.cases)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Format(format!("{}: not UTF-8", a.cases.display())))?;
    let cases = parse_cases(&text)?;
    let csv = metrics_csv(&cases, a.kmax, a.breakdown, a.pairs)?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        write(dir, "metrics.csv", csv.as_bytes())?;
    }
    emit(&csv)
}
