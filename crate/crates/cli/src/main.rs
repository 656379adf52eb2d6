use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value as Json};

use qbs::inference::{systematic_resample, InferenceError};
use qbs::laws;
use qbs::ppl::{self, Algorithm, RunResult};
use qbs::RandomSource;

const EXIT_FAILURE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_INFERENCE: u8 = 3;

#[derive(Parser)]
#[command(name = "qbs", version, about = "Run probabilistic programs and check the measure laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a .qppl program under an inference algorithm.
    Run(RunArgs),
    /// Run the generated law suites and report the largest deviations.
    Laws {
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample regression lines (slope s, intercept b) from the built-in linear model.
    Regress {
        #[arg(long, default_value_t = 1000)]
        n_lines: usize,
        #[arg(long, value_enum, default_value_t = Mode::Prior)]
        mode: Mode,
        /// Weighted samples drawn before resampling in posterior mode.
        #[arg(long, default_value_t = 200_000)]
        pool: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value_t = Inference::Lw)]
    inference: Inference,
    /// Samples for lw, total chain steps for lmh.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    burnin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Inference {
    Lw,
    Lmh,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Prior,
    Posterior,
}

/// A failure with its exit code; the message goes to standard error.
struct Failure(u8, String);

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure(EXIT_FAILURE, e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure(EXIT_FAILURE, e.to_string())
    }
}

fn inference_failure(e: ppl::RunError) -> Failure {
    let code = match e {
        InferenceError::Config(_) => EXIT_FAILURE,
        _ => EXIT_INFERENCE,
    };
    Failure(code, format!("inference error: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("QBS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // results never depend on the worker count, only the speed does
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Laws { cases, seed } => cmd_laws(cases, seed),
        Command::Regress { n_lines, mode, pool, seed, output } => cmd_regress(n_lines, mode, pool, seed, output.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, message)) => {
            if !message.is_empty() {
                eprintln!("qbs: {message}");
            }
            ExitCode::from(code)
        }
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.file)
        .map_err(|e| Failure(EXIT_FAILURE, format!("{}: {e}", args.file.display())))?;
    let query = ppl::parse(&text).map_err(|e| Failure(EXIT_PARSE, format!("{}:{}:{}: {}", args.file.display(), e.line(), e.col(), e.message)))?;
    for label in query.duplicate_labels() {
        eprintln!("qbs: warning: predict label :{label} appears more than once; the last value wins");
    }
    let algorithm = match args.inference {
        Inference::Lw => Algorithm::Lw { samples: args.samples },
        Inference::Lmh => Algorithm::Lmh { steps: args.samples, burnin: args.burnin },
    };
    let result = ppl::run(&query, algorithm, args.seed).map_err(inference_failure)?;
    let mut out = open_output(args.output.as_deref())?;
    match args.format {
        Format::Json => write_json(&result, &mut out)?,
        Format::Csv => write_csv(&result, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn number(x: f64) -> Json {
    serde_json::Number::from_f64(x).map_or(Json::Null, Json::Number)
}

fn write_json(result: &RunResult, out: &mut dyn Write) -> Result<(), Failure> {
    let samples: Vec<Json> = result
        .samples
        .iter()
        .map(|s| {
            let predicts: Map<String, Json> =
                s.columns().into_iter().map(|(k, v)| (k, v.map_or(Json::Null, number))).collect();
            json!({ "predicts": predicts, "log_weight": s.log_weight.map_or(Json::Null, number) })
        })
        .collect();
    let doc = json!({
        "query": result.query,
        "inference": result.algorithm.name(),
        "seed": result.seed,
        "ess": result.ess.map_or(Json::Null, number),
        "samples": samples,
    });
    serde_json::to_writer(&mut *out, &doc).map_err(|e| Failure(EXIT_FAILURE, e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn write_csv(result: &RunResult, out: &mut dyn Write) -> Result<(), Failure> {
    let rows: Vec<Vec<(String, Option<f64>)>> = result.samples.iter().map(|s| s.columns()).collect();
    let labels: BTreeSet<&str> = rows.iter().flatten().map(|(k, _)| k.as_str()).collect();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(labels.iter().copied().chain(["log_weight"]))?;
    let cell = |x: Option<f64>| x.map_or(String::new(), |x| x.to_string());
    for (row, sample) in rows.iter().zip(&result.samples) {
        let mut record: Vec<String> = labels
            .iter()
            .map(|l| cell(row.iter().find(|(k, _)| k == l).and_then(|c| c.1)))
            .collect();
        record.push(cell(sample.log_weight));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_laws(cases: usize, seed: u64) -> Result<(), Failure> {
    let reports = laws::run_all(cases, seed);
    for r in &reports {
        println!("{r}");
    }
    if reports.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(Failure(EXIT_FAILURE, "law suite failed".into()))
    }
}

fn cmd_regress(n_lines: usize, mode: Mode, pool: usize, seed: u64, output: Option<&Path>) -> Result<(), Failure> {
    if n_lines == 0 {
        return Err(Failure(EXIT_FAILURE, "--n-lines must be at least 1".into()));
    }
    let query = ppl::parse(ppl::LINEAR_REGRESSION).expect("bundled program parses");
    // likelihood-weighting draws are prior draws; their weights carry the data
    let samples = if mode == Mode::Prior { n_lines } else { pool.max(1) };
    let result = ppl::run(&query, Algorithm::Lw { samples }, seed).map_err(inference_failure)?;
    let s = result.column("f.s");
    let b = result.column("f.b");
    let picks: Vec<usize> = match mode {
        Mode::Prior => (0..n_lines).collect(),
        Mode::Posterior => {
            let lws: Vec<f64> = s.iter().map(|c| c.1).collect();
            let src = RandomSource::for_index(seed, u64::MAX);
            systematic_resample(&lws, n_lines, &src).map_err(|e| Failure(EXIT_INFERENCE, format!("inference error: {e}")))?
        }
    };
    let mut w = csv::Writer::from_writer(open_output(output)?);
    w.write_record(["line_id", "s", "b"])?;
    for (id, &i) in picks.iter().enumerate() {
        w.write_record([id.to_string(), s[i].0.to_string(), b[i].0.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
