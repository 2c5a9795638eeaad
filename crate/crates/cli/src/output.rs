use std::io::Write;

use serde::Serialize;

use crate::config::{Format, Options};
use crate::CliError;

/// Writes `rows` as CSV, preceded by a `# config:` comment line, or as a
/// single JSON object `{command, config, rows, version}`.
pub fn emit<R: Serialize>(
    out: &mut dyn Write,
    command: &str,
    config: &Options,
    rows: &[R],
) -> Result<(), CliError> {
    match config.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let line =
                serde_json::to_string(config).map_err(|e| CliError::Output(e.to_string()))?;
            writeln!(out, "# config: {line}")?;
            let mut writer = csv::Writer::from_writer(out);
            for row in rows {
                writer
                    .serialize(row)
                    .map_err(|e| CliError::Output(e.to_string()))?;
            }
            writer.flush()?;
        }
        Format::Json => {
            let doc = serde_json::json!({
                "command": command,
                "config": config,
                "rows": rows,
                "version": env!("CARGO_PKG_VERSION"),
            });
            serde_json::to_writer_pretty(&mut *out, &doc)
                .map_err(|e| CliError::Output(e.to_string()))?;
            writeln!(out)?;
        }
    }
    Ok(())
}
