use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(arthromap::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Writes the report to `path`, or to stdout without one.
pub fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let text = to_json(value);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_error(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
