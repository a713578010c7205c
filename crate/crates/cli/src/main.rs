//! `birkhoff` command-line front end.
//!
//! Every subcommand writes its outputs plus a `<command>.manifest.json` into
//! `--output-dir`. Exit codes: 0 success, 1 I/O failure, 2 invalid input,
//! 3 insufficient data, 4 feasibility or overflow.

mod input;
mod manifest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use birkhoff::bowen::{self, CycleParams, Variant};
use birkhoff::classify::{self, ClassifierConfig};
use birkhoff::entropy::{self, ConstraintSchedule};
use birkhoff::means::{self, AnalysisConfig, Family};
use birkhoff::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::input::{sha256_hex, Input, Source};
use crate::manifest::Run;

const MAX_ORDER: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "birkhoff", version, about = "Higher-order averages of non-convergent Birkhoff sums")]
struct Cli {
    /// Directory receiving all output files.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,

    /// Seed for random inputs (`bernoulli:p`).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Ratio of the geometric index grid on which histories are recorded [default: 1.001].
    #[arg(long, global = true)]
    grid_gamma: Option<f64>,

    /// Command-specific JSON configuration (classifier config, cycle parameters or constraint schedule).
    #[arg(long, global = true, value_name = "FILE")]
    json_config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

impl Cli {
    fn gamma(&self) -> f64 {
        self.grid_gamma.unwrap_or(means::DEFAULT_GRID_GAMMA)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write `index,symbol,phi` rows of a symbolic input.
    Generate {
        input: String,
        #[arg(short, long)]
        n: usize,
        /// File name inside the output directory.
        #[arg(long, default_value = "sequence.csv")]
        output: String,
    },
    /// Record Hölder and Cesàro histories and the limit-set tower.
    Analyze {
        input: String,
        #[arg(long, default_value_t = 1 << 24)]
        n_max: u64,
        #[arg(short = 'k', long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = means::DEFAULT_TAIL_WINDOW)]
        window: f64,
    },
    /// Classify an input as Convergent, B1, B2 or Inconclusive.
    Classify {
        input: String,
        #[arg(long, default_value_t = 1 << 24)]
        n_max: u64,
    },
    /// Simulate a heteroclinic cycle and classify its flow averages.
    Bowen {
        #[arg(long, value_enum, default_value_t = VariantArg::Hyperbolic)]
        variant: VariantArg,
        /// Number of residences `J` (defaults: 40 hyperbolic, 6 non-hyperbolic).
        #[arg(short = 'j', long)]
        residences: Option<usize>,
        #[arg(long, default_value_t = 1_000_000)]
        samples_per_segment: u64,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
    },
    /// Count admissible cylinders and report growth rates.
    Entropy {
        #[arg(long)]
        n_max: u64,
        #[arg(long, default_value_t = 10)]
        n1: u64,
        #[arg(long, default_value_t = 0.4)]
        alpha1: f64,
        #[arg(long, default_value_t = 0.6)]
        alpha2: f64,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Ignore targets and allow every word.
        #[arg(long)]
        unconstrained: bool,
        /// Cross-check the counts for n ≤ N against exhaustive enumeration.
        #[arg(long, value_name = "N")]
        verify_brute: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Hyperbolic,
    Nonhyperbolic,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Hyperbolic => Variant::Hyperbolic,
            VariantArg::Nonhyperbolic => Variant::Nonhyperbolic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Sampled stream when every duration is representable, event averages otherwise.
    Auto,
    Sampled,
    Events,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 1,
        Error::InvalidInput(_) | Error::InvalidEpsilon { .. } | Error::UnmappedSymbol(_) | Error::Json(_) => 2,
        Error::InsufficientData(_) => 3,
        Error::Infeasible(_) | Error::Overflow(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn read_config(path: &Option<PathBuf>) -> Result<Option<(String, String)>> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            let hash = sha256_hex(text.as_bytes());
            Ok(Some((text, hash)))
        }
        None => Ok(None),
    }
}

fn run(cli: &Cli) -> Result<()> {
    if !(cli.gamma() > 1.0) {
        return Err(Error::InvalidInput(format!("--grid-gamma must exceed 1, got {}", cli.gamma())));
    }
    let dir = cli.output_dir.as_path();
    match &cli.command {
        Command::Generate { input, n, output } => cmd_generate(cli, dir, input, *n, output),
        Command::Analyze { input, n_max, order, window } => cmd_analyze(cli, dir, input, *n_max, *order, *window),
        Command::Classify { input, n_max } => cmd_classify(cli, dir, input, *n_max),
        Command::Bowen { variant, residences, samples_per_segment, mode } => {
            cmd_bowen(cli, dir, (*variant).into(), *residences, *samples_per_segment, *mode)
        }
        Command::Entropy { n_max, n1, alpha1, alpha2, epsilon, unconstrained, verify_brute } => {
            let schedule = match read_config(&cli.json_config)? {
                Some((text, _)) => ConstraintSchedule::from_json(&text)?,
                None if *unconstrained => ConstraintSchedule::unconstrained(*n1),
                None => ConstraintSchedule::new(*n1, *alpha1, *alpha2, *epsilon)?,
            };
            cmd_entropy(dir, schedule, *n_max, *verify_brute)
        }
    }
}

fn cmd_generate(cli: &Cli, dir: &Path, input: &str, n: usize, output: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let input = Input::resolve(input)?;
    let rows = input.symbols(n, cli.seed)?;
    let mut run = Run::start("generate", dir)?;
    run.write(output, |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "symbol", "phi"]).map_err(csv_err)?;
        for (i, (s, phi)) in rows.iter().enumerate() {
            w.write_record(&[(i + 1).to_string(), s.to_string(), phi.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    })?;
    if let Source::Spec(spec) = &input.source {
        let text = spec.to_json()?;
        run.write("spec.json", |out| Ok(writeln!(out, "{text}")?))?;
    }
    let config = json!({ "input": input.name, "n": n, "output": output, "seed": cli.seed });
    run.finish(config, Some(input.hash))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}

fn cmd_analyze(cli: &Cli, dir: &Path, input: &str, n_max: u64, order: usize, window: f64) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::InvalidInput(format!("K must be at most {MAX_ORDER}, got {order}")));
    }
    let input = Input::resolve(input)?;
    let stream = input.stream(cli.seed)?;
    let bound = stream.bound();
    let config = AnalysisConfig { order, grid_gamma: cli.gamma(), cesaro: true };
    let analysis = means::analyze::<f64, _>(stream, n_max, bound, &config)?;
    let holder = analysis.tower_of(Family::Holder, window)?;
    let cesaro = analysis.tower_of(Family::Cesaro, window)?;

    let mut run = Run::start("analyze", dir)?;
    run.write("holder_history.csv", |out| analysis.write_history_csv(Family::Holder, out))?;
    run.write("cesaro_history.csv", |out| analysis.write_history_csv(Family::Cesaro, out))?;
    run.write_json("tower.json", &holder.summary(analysis.n))?;
    run.write_json("cesaro_tower.json", &cesaro.summary(analysis.n))?;
    println!("n = {}", analysis.n);
    for e in &holder.intervals {
        println!("level {:>2}: [{:.6}, {:.6}]", e.k, e.lo, e.hi);
    }
    let config = json!({
        "input": input.name, "n_max": n_max, "order": order, "window": window,
        "grid_gamma": cli.gamma(), "seed": cli.seed, "bound": bound,
    });
    run.finish(config, Some(input.hash))
}

fn classifier_config(cli: &Cli) -> Result<(ClassifierConfig<f64>, Option<String>)> {
    let (mut config, hash) = match read_config(&cli.json_config)? {
        Some((text, hash)) => (serde_json::from_str::<ClassifierConfig<f64>>(&text)?, Some(hash)),
        None => (ClassifierConfig::default(), None),
    };
    if let Some(g) = cli.grid_gamma {
        config.grid_gamma = g;
    }
    config.validate()?;
    Ok((config, hash))
}

fn cmd_classify(cli: &Cli, dir: &Path, input: &str, n_max: u64) -> Result<()> {
    let input = Input::resolve(input)?;
    let (config, config_hash) = classifier_config(cli)?;
    let verdict = classify::classify(input.stream(cli.seed)?, n_max, &config)?;
    let mut run = Run::start("classify", dir)?;
    run.write_json("verdict.json", &verdict)?;
    println!("{:?}", verdict.label);
    let resolved = json!({
        "input": input.name, "n_max": n_max, "seed": cli.seed,
        "classifier": config, "config_hash": config_hash,
    });
    run.finish(resolved, Some(input.hash))
}

fn cmd_bowen(cli: &Cli, dir: &Path, variant: Variant, residences: Option<usize>, samples: u64, mode: Mode) -> Result<()> {
    let (params, hash) = match read_config(&cli.json_config)? {
        Some((text, hash)) => (CycleParams::from_json(variant, &text)?, Some(hash)),
        None => (CycleParams::defaults(variant), None),
    };
    let j = residences.unwrap_or(match variant {
        Variant::Hyperbolic => 40,
        Variant::Nonhyperbolic => 6,
    });
    let series = bowen::simulate(variant, &params, j)?;
    let events = bowen::flow_average_at_events(&series)?;
    let has_log = series.segments.iter().any(|s| s.duration.is_log());
    let use_sampled = match mode {
        Mode::Auto => !has_log,
        Mode::Sampled => true,
        Mode::Events => false,
    };
    let config = ClassifierConfig { grid_gamma: cli.gamma(), ..ClassifierConfig::default() };
    let verdict = if use_sampled {
        let stream = bowen::sample_flow(&series, samples)?;
        classify::classify(stream, u64::MAX, &config)?
    } else {
        bowen::classify_segments(&series, &config)?
    };

    let mut run = Run::start("bowen", dir)?;
    run.write("segments.csv", |out| series.write_csv(out))?;
    run.write("events.csv", |out| {
        writeln!(out, "segment,j,tag,log_time,average")?;
        for e in &events {
            writeln!(out, "{},{},{},{},{}", e.segment, e.j, e.tag.as_str(), e.log_time, e.average)?;
        }
        Ok(())
    })?;
    run.write_json("verdict.json", &verdict)?;
    if series.truncated {
        eprintln!("note: recursion truncated after {} residences (log-duration beyond representable range)", series.residence_count());
    }
    println!("{:?}", verdict.label);
    let resolved = json!({
        "variant": variant, "params": params, "residences": j, "truncated": series.truncated,
        "mode": if use_sampled { "sampled" } else { "events" }, "samples_per_segment": samples,
        "grid_gamma": cli.gamma(),
    });
    run.finish(resolved, hash)
}

fn cmd_entropy(dir: &Path, schedule: ConstraintSchedule, n_max: u64, verify_brute: Option<usize>) -> Result<()> {
    let report = entropy::growth_rate_report(&schedule, n_max)?;
    let brute = match verify_brute {
        Some(limit) => {
            if limit > 16 {
                return Err(Error::InvalidInput(format!("--verify-brute is limited to n <= 16, got {limit}")));
            }
            let upto = limit.min(n_max as usize);
            for n in 1..=upto {
                let expected = entropy::enumerate_cylinders(&schedule, n)?;
                let got = &report.counts[n - 1].count;
                if *got != expected {
                    return Err(Error::InvalidInput(format!("DP count {got} differs from enumeration {expected} at n = {n}")));
                }
            }
            Some(upto)
        }
        None => None,
    };
    let mut run = Run::start("entropy", dir)?;
    run.write("rates.csv", |out| report.write_csv(out))?;
    let summary = json!({
        "schedule": schedule,
        "separated": schedule.is_separated(),
        "log_m": report.log_m,
        "target_entropies": report.target_entropies,
        "final_rate": report.final_rate(),
        "brute_force_verified_up_to": brute,
    });
    run.write_json("entropy.json", &summary)?;
    println!("final rate {:.6} (log m = {:.6})", report.final_rate(), report.log_m);
    let resolved = json!({ "schedule": schedule, "n_max": n_max, "verify_brute": verify_brute });
    let hash = sha256_hex(serde_json::to_string(&schedule)?.as_bytes());
    run.finish(resolved, Some(hash))
}
