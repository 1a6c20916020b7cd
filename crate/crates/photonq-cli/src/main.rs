//! `photonq` experiment runner.

mod experiments;
mod params;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use serde_json::{json, Value};

use experiments::{registry, Experiment, Series};
use params::Params;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown experiment `{0}`; try `photonq list`")]
    UnknownExperiment(String),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },
    #[error("infeasible configuration: {reason}")]
    Infeasible { reason: Value },
    #[error("cannot read parameter file: {0}")]
    ParamFile(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Library(photonq::Error),
}

impl From<photonq::Error> for CliError {
    fn from(e: photonq::Error) -> Self {
        match e {
            photonq::Error::InvalidParam { name, reason } => CliError::InvalidParam { field: name.to_string(), reason },
            photonq::Error::Infeasible(reason) => CliError::Infeasible { reason: json!({ "detail": reason }) },
            other => CliError::Library(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::UnknownExperiment(_) => 2,
            CliError::InvalidParam { .. } | CliError::ParamFile(_) => 3,
            CliError::Infeasible { .. } => 4,
            CliError::Io(_) | CliError::Library(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "photonq", version = photonq::VERSION, about = "Runs canned photonic quantum experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Experiment ids with their parameter schemas.
    List {
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run one experiment and write `<out>/<id>.json`.
    Run {
        id: String,
        /// TOML parameter file; omitted keys take their defaults.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write `<out>/<id>.csv`.
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Serialize)]
struct Provenance<'a> {
    id: &'a str,
    parameters: &'a Params,
    seed: u64,
    version: &'static str,
}

#[derive(Serialize)]
struct Document<'a> {
    id: &'a str,
    status: &'static str,
    summary: &'a std::collections::BTreeMap<String, Value>,
    series: &'a Series,
    provenance: Provenance<'a>,
}

fn list(as_json: bool) -> std::io::Result<()> {
    let reg = registry();
    let mut w = std::io::stdout().lock();
    if as_json {
        let v: Vec<Value> = reg.iter().map(|e| json!({ "id": e.id, "doc": e.doc, "parameters": (e.schema)() })).collect();
        return writeln!(w, "{}", serde_json::to_string_pretty(&v).unwrap_or_default());
    }
    for e in &reg {
        writeln!(w, "{}  {}", e.id, e.doc)?;
        for p in (e.schema)() {
            let kind = match p.kind {
                params::Kind::Float => "float",
                params::Kind::Int => "int",
                params::Kind::Choice(_) => "choice",
            };
            writeln!(w, "    {:<18} {:<7} default={:<10} range={:<22} {}", p.name, kind, p.default.to_string(), p.range_text(), p.doc)?;
        }
    }
    Ok(())
}

fn load_params(path: Option<&Path>) -> Result<toml::Table, CliError> {
    let Some(path) = path else { return Ok(toml::Table::new()) };
    let text = fs::read_to_string(path).map_err(|e| CliError::ParamFile(format!("{}: {e}", path.display())))?;
    text.parse::<toml::Table>().map_err(|e| CliError::ParamFile(format!("{}: {e}", path.display())))
}

fn run(id: &str, params: Option<&Path>, seed: u64, out: &Path, csv: bool) -> Result<PathBuf, CliError> {
    let reg = registry();
    let exp: &Experiment = reg.iter().find(|e| e.id == id).ok_or_else(|| CliError::UnknownExperiment(id.to_string()))?;
    let given = load_params(params)?;
    let params = Params::resolve(&(exp.schema)(), &given)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let outcome = (exp.run)(&params, &mut rng)?;
    let doc = Document {
        id,
        status: "ok",
        summary: &outcome.summary,
        series: &outcome.series,
        provenance: Provenance { id, parameters: &params, seed, version: photonq::VERSION },
    };
    fs::create_dir_all(out)?;
    let path = out.join(format!("{id}.json"));
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.into()))?;
    text.push('\n');
    fs::write(&path, text)?;
    if csv {
        let body = outcome.csv.unwrap_or_else(|| outcome.series.csv());
        fs::write(out.join(format!("{id}.csv")), body)?;
    }
    Ok(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { json } => {
            // a closed pipe is not a failure
            let _ = list(json);
            ExitCode::SUCCESS
        }
        Command::Run { id, params, seed, out, csv } => match run(&id, params.as_deref(), seed, &out, csv) {
            Ok(path) => {
                println!("{}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                match &e {
                    CliError::Infeasible { reason } => {
                        eprintln!("{}", json!({ "id": id, "status": "infeasible", "reason": reason }));
                    }
                    _ => eprintln!("photonq: {e}"),
                }
                ExitCode::from(e.exit_code())
            }
        },
    }
}
