use serde::de::DeserializeOwned;
use std::io::{self, BufRead};

#[derive(Debug, thiserror::Error)]
pub(crate) enum JsonlError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Parses every non-blank line of `reader` as a `T`, pairing each record with
/// its 1-based line number.
pub(crate) fn read_records<T: DeserializeOwned>(
    reader: impl BufRead,
) -> Result<Vec<(usize, T)>, JsonlError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let record = serde_json::from_str(trimmed).map_err(|source| JsonlError::Parse {
            line: idx + 1,
            source,
        })?;
        out.push((idx + 1, record));
    }
    Ok(out)
}
