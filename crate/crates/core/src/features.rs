//! Dense feature matrices and the `FMX1` interchange format.
//!
//! Layout: the four bytes `FMX1`, row count and column count as little-endian
//! `u64`, then `rows * cols` little-endian `f32` values in row-major order.
//! Row identifiers live in a sidecar text file next to the matrix
//! (`<file>.ids`), one per line, in row order.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

pub const FMX_MAGIC: &[u8; 4] = b"FMX1";

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("not an FMX1 file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("truncated matrix: expected {expected} bytes of values, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("matrix has trailing bytes after {rows}x{cols} values")]
    TrailingBytes { rows: u64, cols: u64 },
    #[error("matrix shape {rows}x{cols} must be at least 1x1")]
    EmptyShape { rows: u64, cols: u64 },
    #[error("data length {len} does not match {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("{found} row ids for {expected} rows")]
    IdCount { expected: usize, found: usize },
    #[error("duplicate row id {0:?}")]
    DuplicateId(String),
}

impl FeatureError {
    fn io(path: &Path, source: io::Error) -> Self {
        FeatureError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Row-major `rows x cols` matrix with one identifier per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, ids: Vec<String>) -> Result<Self, FeatureError> {
        if rows == 0 || cols == 0 {
            return Err(FeatureError::EmptyShape {
                rows: rows as u64,
                cols: cols as u64,
            });
        }
        if data.len() != rows * cols {
            return Err(FeatureError::ShapeMismatch { rows, cols, len: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        if ids.len() != rows {
            return Err(FeatureError::IdCount {
                expected: rows,
                found: ids.len(),
            });
        }
        let mut seen = HashSet::with_capacity(rows);
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(FeatureError::DuplicateId(id.clone()));
            }
        }
        Ok(FeatureMatrix { rows, cols, data, ids })
    }

    /// Matrix whose row ids are the row indices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, FeatureError> {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(rows.len(), cols, data, ids)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    /// Sidecar path holding the row ids of the matrix at `path`.
    pub fn ids_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".ids");
        PathBuf::from(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| FeatureError::io(path, e))?;
        let (rows, cols, data) = read_fmx(BufReader::new(file))?;
        let ids_path = Self::ids_path(path);
        let ids_file = File::open(&ids_path).map_err(|e| FeatureError::io(&ids_path, e))?;
        let ids = read_ids(BufReader::new(ids_file)).map_err(|e| FeatureError::io(&ids_path, e))?;
        Self::new(rows, cols, data, ids)
    }

    /// Writes the matrix and its id sidecar. Values are narrowed to `f32`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        let path = path.as_ref();
        let mut out = BufWriter::new(File::create(path).map_err(|e| FeatureError::io(path, e))?);
        write_fmx(&mut out, self.rows, self.cols, &self.data)
            .and_then(|_| out.flush())
            .map_err(|e| FeatureError::io(path, e))?;
        let ids_path = Self::ids_path(path);
        let mut ids = BufWriter::new(File::create(&ids_path).map_err(|e| FeatureError::io(&ids_path, e))?);
        self.ids
            .iter()
            .try_for_each(|id| writeln!(ids, "{id}"))
            .and_then(|_| ids.flush())
            .map_err(|e| FeatureError::io(&ids_path, e))
    }
}

pub fn write_fmx(mut w: impl Write, rows: usize, cols: usize, data: &[f64]) -> io::Result<()> {
    w.write_all(FMX_MAGIC)?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    for &v in data {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Reads an `FMX1` stream into `(rows, cols, values)`.
pub fn read_fmx(mut r: impl Read) -> Result<(usize, usize, Vec<f64>), FeatureError> {
    let io_err = |e| FeatureError::io(Path::new("<fmx stream>"), e);
    let mut header = [0u8; 20];
    let mut got = 0;
    while got < header.len() {
        let n = r.read(&mut header[got..]).map_err(io_err)?;
        if n == 0 {
            break;
        }
        got += n;
    }
    let magic: [u8; 4] = header[..4].try_into().expect("4 bytes");
    if got < 4 || &magic != FMX_MAGIC {
        return Err(FeatureError::BadMagic(magic));
    }
    if got < header.len() {
        return Err(FeatureError::Truncated {
            expected: 16,
            found: (got - 4) as u64,
        });
    }
    let rows = u64::from_le_bytes(header[4..12].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(header[12..20].try_into().expect("8 bytes"));
    if rows == 0 || cols == 0 {
        return Err(FeatureError::EmptyShape { rows, cols });
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or(FeatureError::Truncated { expected: u64::MAX, found: 0 })?;

    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err)?;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(FeatureError::Truncated { expected, found });
    }
    if found > expected {
        return Err(FeatureError::TrailingBytes { rows, cols });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok((rows as usize, cols as usize, data))
}

fn read_ids(r: impl BufRead) -> io::Result<Vec<String>> {
    r.lines()
        .map(|l| l.map(|s| s.trim_end_matches('\r').to_string()))
        .filter(|l| !matches!(l, Ok(s) if s.is_empty()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_fmx(&mut buf, 2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.5]).unwrap();
        assert_eq!(&buf[..4], b"FMX1");
        assert_eq!(&buf[4..12], &2u64.to_le_bytes());
        assert_eq!(&buf[12..20], &3u64.to_le_bytes());
        assert_eq!(&buf[40..44], &6.5f32.to_le_bytes());
        assert_eq!(buf.len(), 20 + 6 * 4);
        let (r, c, data) = read_fmx(buf.as_slice()).unwrap();
        assert_eq!((r, c), (2, 3));
        assert_eq!(data[5], 6.5);
    }

    #[test]
    fn malformed_streams() {
        assert!(matches!(read_fmx(&b"FMX2aaaaaaaaaaaaaaaa"[..]), Err(FeatureError::BadMagic(_))));
        let mut buf = Vec::new();
        write_fmx(&mut buf, 2, 2, &[1.0; 4]).unwrap();
        assert!(matches!(read_fmx(&buf[..buf.len() - 1]), Err(FeatureError::Truncated { .. })));
        buf.push(0);
        buf.push(0);
        assert!(matches!(read_fmx(buf.as_slice()), Err(FeatureError::TrailingBytes { .. })));
        let mut empty = Vec::new();
        write_fmx(&mut empty, 0, 3, &[]).unwrap();
        assert!(matches!(read_fmx(empty.as_slice()), Err(FeatureError::EmptyShape { .. })));
    }

    #[test]
    fn validation() {
        assert!(matches!(
            FeatureMatrix::new(1, 2, vec![1.0, f64::NAN], vec!["a".into()]),
            Err(FeatureError::NonFinite { row: 0, col: 1 })
        ));
        assert!(matches!(
            FeatureMatrix::new(2, 1, vec![1.0, 2.0], vec!["a".into(), "a".into()]),
            Err(FeatureError::DuplicateId(_))
        ));
        assert!(matches!(
            FeatureMatrix::new(2, 1, vec![1.0, 2.0], vec!["a".into()]),
            Err(FeatureError::IdCount { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn save_and_load_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.fmx");
        let m = FeatureMatrix::new(
            2,
            2,
            vec![0.25, -1.5, 3.0, 1e-3],
            vec!["10_0".into(), "10_1".into()],
        )
        .unwrap();
        m.save(&path).unwrap();
        assert!(FeatureMatrix::ids_path(&path).exists());
        let back = FeatureMatrix::load(&path).unwrap();
        assert_eq!(back.ids(), m.ids());
        assert_eq!(back.row(1)[1], 1e-3f32 as f64);
    }
}
