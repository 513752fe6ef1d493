//! `sacode`: ingest advice datasets, code them against the tree, and report.

mod commands;
mod terminal;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sacode_core::ReportFormat;

#[derive(Parser, Debug)]
#[command(name = "sacode", version, about = "Code security advice with the actionability coding tree")]
pub struct Cli {
    /// Data directory for uploaded datasets and session logs.
    #[arg(long, global = true, env = "SACODE_DATA_DIR", default_value = "sacode-data")]
    pub data_dir: PathBuf,

    /// Output format for reports.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
    #[value(alias = "chart-data")]
    Chart,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => ReportFormat::Table,
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
            Format::Chart => ReportFormat::Chart,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Inferred,
    Recorded,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a dataset file (JSON or CSV) and store it in the data directory.
    Ingest { file: PathBuf },
    /// Check a tree definition file against the structural invariants.
    ValidateTree { file: PathBuf },
    /// Code a dataset interactively on the terminal (y / n / u / t TAG / q).
    Code {
        dataset: String,
        #[arg(long)]
        coder: String,
        /// Session name; defaults to `<dataset>-<coder>`. Resumes if it exists.
        #[arg(long)]
        session: Option<String>,
    },
    /// Import final codes (an `item_id,code` CSV or a bundled code file name).
    Replay {
        dataset: String,
        codes: String,
        /// Session name; defaults to the dataset id.
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value = "appendix")]
        coder: String,
        /// Replace an existing session of the same name.
        #[arg(long)]
        force: bool,
    },
    /// Frequency table for one session.
    Report { session: String },
    /// Code proportions across sessions, one column each.
    Compare {
        #[arg(required = true)]
        sessions: Vec<String>,
    },
    /// Per-question answer tallies.
    Flow {
        session: String,
        #[arg(long, value_enum, default_value = "inferred")]
        mode: Mode,
    },
    /// Percent agreement and Cohen's kappa between two sessions.
    Agree { first: String, second: String },
    /// Export a session: table or csv of decisions, json checkpoint, or chart data.
    Export { session: String },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value = sacode_service::DEFAULT_HOST)]
        host: String,
        #[arg(long, default_value_t = sacode_service::DEFAULT_PORT)]
        port: u16,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
