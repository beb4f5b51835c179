//! Atomic file output and the fixed CSV layouts.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::CliError;

/// Bumped whenever a CSV layout changes.
pub const CSV_VERSION: u32 = 1;

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::validation(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    write_atomic(path, text.as_bytes())
}

/// In-memory CSV table with a version comment line ahead of the header.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = Vec::new();
        writeln!(buf, "# autobid-eq csv v{CSV_VERSION}").expect("vec write");
        let mut writer = csv::Writer::from_writer(buf);
        writer.write_record(header).expect("vec write");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(cells).expect("vec write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("vec flush")
    }

    pub fn save(self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, &self.into_bytes())
    }
}

/// Shortest round-trip text for a float, so output is byte-stable.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_atomic(&path, b"old").unwrap();
        write_atomic(&path, b"new").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"new");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["r", "label"]);
        t.row([num(0.5), "a,b".to_string()]);
        let text = String::from_utf8(t.into_bytes()).unwrap();
        assert_eq!(text, "# autobid-eq csv v1\nr,label\n0.5,\"a,b\"\n");
    }
}
