//! Scenario-driven front end: parse a scenario file, run one command, write
//! CSV tables and a JSON document.

pub mod commands;
pub mod scenario;
pub mod table;

use std::path::{Path, PathBuf};

use hybridq::ErrorClass;
use sha2::{Digest, Sha256};

pub use scenario::{parse_for, parse_scenario, Command, ParseError, Scenario};
pub use table::{Cell, Column, Document, ResultTable};

pub const TOOL: &str = "hybridq";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("scenario errors:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Parse(Vec<ParseError>),
    #[error("{0}")]
    Model(#[from] hybridq::Error),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    /// 2 parse, 3 precondition, 4 numerical, 5 calibration, 1 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Model(e) => match e.class() {
                ErrorClass::Precondition => 3,
                ErrorClass::Numerical => 4,
                ErrorClass::Calibration => 5,
            },
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Clone, Debug)]
pub struct Request {
    pub command: Command,
    pub scenario: PathBuf,
    pub out: PathBuf,
    pub format: Format,
    pub seed: Option<u64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs a command on scenario text. `dir` resolves relative fixture paths.
pub fn execute(command: Command, text: &str, seed: Option<u64>, dir: Option<&Path>) -> Result<Document, CliError> {
    let mut sc = parse_scenario(text).map_err(CliError::Parse)?;
    if let Some(s) = seed {
        sc.set_int("system", "seed", s as i64);
    }
    let missing = sc.check_for(command);
    if !missing.is_empty() {
        return Err(CliError::Parse(missing));
    }
    let seed = sc.int("system", "seed").map(|s| s as u64);
    let out = commands::run(command, &sc, dir)?;
    Ok(Document {
        tool: TOOL.into(),
        version: VERSION.into(),
        command: command.name().into(),
        scenario_sha256: sha256_hex(text.as_bytes()),
        seed,
        tables: out.tables,
        warnings: out.warnings,
    })
}

/// Writes `<command>.json` and `<command>_<table>.csv` files; returns their paths.
pub fn write_outputs(doc: &Document, out: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let mut written = Vec::new();
    if matches!(format, Format::Csv | Format::Both) {
        for t in &doc.tables {
            let p = out.join(format!("{}_{}.csv", doc.command, t.name));
            std::fs::write(&p, t.to_csv()).map_err(|e| io(&p, e))?;
            written.push(p);
        }
    }
    if matches!(format, Format::Json | Format::Both) {
        let p = out.join(format!("{}.json", doc.command));
        std::fs::write(&p, doc.to_json()).map_err(|e| io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}

pub fn run(req: &Request) -> Result<(Document, Vec<PathBuf>), CliError> {
    let text = std::fs::read_to_string(&req.scenario).map_err(|e| CliError::Io(format!("{}: {e}", req.scenario.display())))?;
    let doc = execute(req.command, &text, req.seed, req.scenario.parent())?;
    let files = write_outputs(&doc, &req.out, req.format)?;
    Ok((doc, files))
}
