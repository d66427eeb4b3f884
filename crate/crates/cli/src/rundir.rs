//! Run directories and artifact writers.
//!
//! Every command that produces files puts all of them under one directory
//! inside `--out`, named by a UTC timestamp plus the command (or by
//! `--run-id` when the caller needs a predictable path), and echoes the
//! fully resolved configuration into `config.json` for provenance.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn create_run_dir(out: &Path, command: &str, run_id: Option<&str>) -> CliResult<PathBuf> {
    let name = match run_id {
        Some(id) => id.to_string(),
        None => format!(
            "{}-{command}",
            chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ")
        ),
    };
    let dir = out.join(name);
    std::fs::create_dir_all(&dir).map_err(|e| {
        CliError::Runtime(anyhow::anyhow!(
            "cannot create run directory '{}': {e}",
            dir.display()
        ))
    })?;
    Ok(dir)
}

/// Pretty-printed JSON with a trailing newline; pretty so diffs of two runs
/// line up row by row.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("serialize '{}': {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("write '{}': {e}", path.display())))?;
    Ok(())
}

/// Loss history as `epoch,loss` rows (shortest round-trip float formatting).
pub fn write_loss_csv(path: &Path, history: &[f64]) -> CliResult<()> {
    let mut text = String::from("epoch,loss\n");
    for (epoch, loss) in history.iter().enumerate() {
        let _ = writeln!(text, "{},{}", epoch + 1, loss);
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("write '{}': {e}", path.display())))?;
    Ok(())
}
