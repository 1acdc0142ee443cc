//! Experiment runner for `anosov-core`: JSON configs in, byte-stable JSON and CSV reports out.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use run::{run, Command, Outcome, Report};

use std::path::Path;

/// Environment variable fixing the worker thread count.
pub const THREADS_ENV: &str = "ANOSOV_LAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Writes the report (`report.json`) or its tables (`<name>.csv`) into `dir`.
pub fn emit(outcome: &Outcome, format: Format, dir: &Path) -> CliResult<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let files: Vec<(String, String)> = match format {
        Format::Json => vec![("report.json".into(), outcome.to_json())],
        Format::Csv => outcome.tables.iter().map(|t| (t.file_name(), t.to_csv())).collect(),
    };
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

/// The same content as [`emit`], as one string for standard output.
pub fn render(outcome: &Outcome, format: Format) -> String {
    match format {
        Format::Json => outcome.to_json(),
        Format::Csv => outcome
            .tables
            .iter()
            .map(|t| format!("# {}\n{}", t.file_name(), t.to_csv()))
            .collect::<Vec<_>>()
            .join("\n"),
    }
}
