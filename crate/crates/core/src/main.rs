use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sobolev_lip::approximation::{approximate, ApproximationData};
use sobolev_lip::experiments::{
    run_converge, run_counterexample, run_lemma_suite, run_poincare, write_converge,
    write_counterexample, write_lemma_suite, write_poincare, ExperimentConfig,
};
use sobolev_lip::io::{load_matrix_csv, load_space_json, write_field_csv, OutputMeta};
use sobolev_lip::{Result, SetRole};

#[derive(Parser)]
#[command(name = "sobolev-lip", version, about = "Discrete-path Lipschitz approximation on finite metric measure spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Compute f̃ for named fields and a named start set of a space file.
    Approximate {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long)]
        gradient: String,
        /// Set name in the space file, or `all`.
        #[arg(long, default_value = "all")]
        set: String,
        #[arg(long = "M")]
        cap: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// δ sweep: errors and energy gaps of f̃_δ against f.
    Converge(ExperimentArgs),
    /// Energy versus norm convergence on the ℓ¹ square.
    Counterexample(ExperimentArgs),
    /// Property suite of f̃ on seeded random instances.
    LemmaSuite {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Negative control: flip the sign of step costs.
        #[arg(long)]
        negate_cost: bool,
    },
    /// Minimal Poincaré constants per gradient notion.
    Poincare(ExperimentArgs),
    /// Load a space and print its validation report.
    ValidateSpace {
        #[arg(long, conflicts_with = "matrix_csv")]
        space: Option<PathBuf>,
        #[arg(long)]
        matrix_csv: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_json(&std::fs::read_to_string(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn verdict(name: &str, passed: bool) -> bool {
    println!("{name}: {}", if passed { "pass" } else { "FAIL" });
    passed
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Approximate {
            space,
            field,
            gradient,
            set,
            cap,
            delta,
            out,
        } => {
            let loaded = load_space_json(&space)?;
            let data = ApproximationData {
                f: loaded.field(&field)?.clone(),
                g: loaded.field(&gradient)?.clone(),
                start_set: loaded.set(&set, SetRole::A)?,
                cap,
                delta,
            };
            let ft = approximate(&loaded.space, &data)?;
            let args = serde_json::json!({
                "space": std::fs::read_to_string(&space)?,
                "field": field, "gradient": gradient, "set": set, "M": cap, "delta": delta,
            });
            let meta = OutputMeta::for_config(&args, None)?;
            write_field_csv(BufWriter::new(File::create(&out)?), &meta, &ft)?;
            Ok(true)
        }
        Command::Converge(args) => {
            let cfg = load_config(args.config.as_deref())?;
            let res = run_converge(&cfg)?;
            write_converge(create(&args.out_dir, "converge.csv")?, &cfg.meta()?, &res)?;
            Ok(verdict("converge", res.passed))
        }
        Command::Counterexample(args) => {
            let cfg = load_config(args.config.as_deref())?;
            let res = run_counterexample(&cfg)?;
            write_counterexample(create(&args.out_dir, "counterexample.csv")?, &cfg.meta()?, &res)?;
            Ok(verdict("counterexample", res.passed))
        }
        Command::LemmaSuite { args, negate_cost } => {
            let mut cfg = load_config(args.config.as_deref())?;
            if negate_cost {
                cfg.lemma_suite.get_or_insert_with(Default::default).negate_cost = true;
            }
            let res = run_lemma_suite(&cfg)?;
            write_lemma_suite(create(&args.out_dir, "lemma_suite.csv")?, &cfg.meta()?, &res)?;
            for (name, checked, violations) in res.lines() {
                println!("{name}: {checked} checked, {violations} violations");
            }
            Ok(verdict("lemma-suite", res.passed()))
        }
        Command::Poincare(args) => {
            let cfg = load_config(args.config.as_deref())?;
            let res = run_poincare(&cfg)?;
            let meta = cfg.meta()?;
            write_poincare(create(&args.out_dir, "poincare.csv")?, &meta, &res)?;
            let summary = serde_json::to_string_pretty(&res.summary_json(&meta))?;
            std::fs::write(args.out_dir.join("poincare_summary.json"), summary + "\n")?;
            Ok(verdict("poincare ordering", res.ordering_holds()))
        }
        Command::ValidateSpace { space, matrix_csv } => {
            let loaded = match (space, matrix_csv) {
                (Some(p), _) => load_space_json(&p)?.space,
                (None, Some(p)) => load_matrix_csv(&p, None)?,
                (None, None) => {
                    return Err(sobolev_lip::Error::InvalidParameter(
                        "pass --space or --matrix-csv".into(),
                    ))
                }
            };
            println!("{}", serde_json::to_string_pretty(loaded.validation_report())?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
