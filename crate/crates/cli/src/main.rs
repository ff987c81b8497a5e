mod commands;
mod config;
mod examples;
mod inputs;
mod report;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pisupport::Recipe;
use serde_json::json;

use config::{FieldList, Format, Overrides, RSpec, RunConfig, Verify};
use examples::ExampleName;
use report::{CliError, Outcome, Table};

/// Exact support varieties for infinitesimal group schemes.
#[derive(Parser)]
#[command(name = "pisupport", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Characteristic (default 3).
    #[arg(long, global = true)]
    p: Option<u32>,
    /// Field tower, comma separated: prime, ext<d>, ratfun or names like F_9
    /// (default F_p, F_{p^2}, F_{p^3}).
    #[arg(long, global = true)]
    field: Option<String>,
    /// Frobenius kernel depth or inclusive range such as 1..3 (default 1).
    #[arg(long, global = true)]
    r: Option<String>,
    /// Sampling seed (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Samples per run (default 64).
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true, value_enum)]
    verify: Option<Verify>,
    /// TOML file with any of the keys above plus `corpus`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Module corpus directory (default: the shipped corpus).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum RecipeArg {
    Ur,
    Sum,
}

#[derive(Subcommand)]
enum Command {
    /// Jordan type of the π-operator of a module at one tuple.
    Jordan {
        #[arg(long)]
        module: String,
        #[arg(long)]
        tuple: String,
        #[arg(long, value_enum, default_value = "ur")]
        recipe: RecipeArg,
    },
    /// Support verdicts at one tuple, or at sampled tuples.
    Support {
        #[arg(long)]
        module: String,
        #[arg(long)]
        tuple: Option<String>,
    },
    /// Sampled support fingerprint with recipe and orbit cross-checks.
    Fingerprint {
        #[arg(long)]
        module: String,
    },
    /// Pointwise support axioms over the corpus.
    Axioms,
    /// Support of a bounded complex at one tuple, or at sampled tuples.
    Complex {
        #[arg(long)]
        complex: String,
        #[arg(long)]
        tuple: Option<String>,
    },
    /// Worked examples as exact assertions; exit 3 if any fails.
    Examples {
        #[arg(value_enum, ignore_case = true)]
        name: ExampleName,
        /// Index set S for ga-ls (default 1).
        #[arg(long, value_delimiter = ',')]
        set: Option<Vec<usize>>,
        /// Truncation degree (ga-ls default p^3 - 1, u3 default p^2).
        #[arg(long)]
        degree: Option<usize>,
    },
    /// Parse and smoke-test every corpus module.
    CorpusValidate,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Jordan { .. } => "jordan",
        Command::Support { .. } => "support",
        Command::Fingerprint { .. } => "fingerprint",
        Command::Axioms => "axioms",
        Command::Complex { .. } => "complex",
        Command::Examples { .. } => "examples",
        Command::CorpusValidate => "corpus-validate",
    }
}

fn run_examples(
    cfg: &RunConfig,
    name: ExampleName,
    set: Option<Vec<usize>>,
    degree: Option<usize>,
) -> commands::Run {
    let mut results = Vec::new();
    let wanted = |n: ExampleName| name == n || name == ExampleName::All;
    if wanted(ExampleName::GaLs) {
        results.push(examples::ga_ls(cfg, set.as_deref().unwrap_or(&[1]), degree)?);
    }
    for r in cfg.rs() {
        if wanted(ExampleName::Sl2Steinberg) {
            results.push(examples::sl2_steinberg(cfg, r)?);
        }
        if wanted(ExampleName::U3) {
            results.push(examples::u3(cfg, r, degree)?);
        }
    }
    let mut table = Table::new(&["example", "p", "r", "parameters", "checked", "failures", "status"]);
    for e in &results {
        table.push(vec![
            e.example.clone(),
            e.p.to_string(),
            e.r.to_string(),
            e.parameters.clone(),
            e.checked.to_string(),
            e.failures.to_string(),
            if e.pass { "PASS" } else { "FAIL" }.into(),
        ]);
    }
    let failing: Vec<String> = results.iter().filter(|e| !e.pass).map(|e| format!("{} r={}", e.example, e.r)).collect();
    let failed = (!failing.is_empty()).then(|| format!("failed: {}", failing.join(", ")));
    let result = serde_json::to_value(&results).expect("example results serialize");
    Ok((cfg.clone(), Vec::new(), Outcome { result: json!({ "examples": result }), table, failed }))
}

fn run(cli: Cli) -> Result<(String, i32), CliError> {
    let g = cli.global;
    let flags = Overrides {
        p: g.p,
        field: g.field.map(FieldList::One),
        r: g.r.map(RSpec::Text),
        seed: g.seed,
        samples: g.samples,
        format: g.format,
        verify: g.verify,
        corpus: g.corpus,
    };
    let cfg = RunConfig::resolve(flags, g.config.as_deref())?;
    let name = command_name(&cli.command);
    let (cfg, inputs, outcome) = match cli.command {
        Command::Jordan { module, tuple, recipe } => {
            let recipe = match recipe {
                RecipeArg::Ur => Recipe::Ur,
                RecipeArg::Sum => Recipe::Sum,
            };
            commands::jordan(&cfg, &module, &tuple, recipe)?
        }
        Command::Support { module, tuple } => commands::support(&cfg, &module, tuple.as_deref())?,
        Command::Fingerprint { module } => commands::fingerprint_cmd(&cfg, &module)?,
        Command::Axioms => commands::axioms(&cfg)?,
        Command::Complex { complex, tuple } => commands::complex(&cfg, &complex, tuple.as_deref())?,
        Command::Examples { name, set, degree } => run_examples(&cfg, name, set, degree)?,
        Command::CorpusValidate => commands::corpus_validate(&cfg)?,
    };
    let text = report::render(name, &cfg, &inputs, &outcome)?;
    let code = if outcome.failed.is_some() { report::EXIT_ASSERTION } else { 0 };
    Ok((text, code))
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let err = CliError::invalid("usage", e.render().to_string().trim_end());
            eprintln!("{}", err.to_json());
            std::process::exit(err.exit_code());
        }
    };
    match run(cli) {
        Ok((text, code)) => {
            let mut out = std::io::stdout().lock();
            // A closed pipe is not worth a panic.
            let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
            std::process::exit(code);
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.exit_code());
        }
    }
}
