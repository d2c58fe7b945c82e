use std::io::Write;
use std::path::Path;

use super::{io_err, CliResult};

/// Writes to a temporary file beside `path`, then renames it into place, so a
/// crash never leaves a partial file behind.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Minimal CSV builder; fields never contain separators.
pub(crate) struct Csv {
    text: String,
}

impl Csv {
    pub(crate) fn new(header: impl IntoIterator<Item = String>) -> Self {
        let mut c = Csv { text: String::new() };
        c.row(header);
        c
    }

    pub(crate) fn row(&mut self, fields: impl IntoIterator<Item = String>) {
        let line: Vec<String> = fields.into_iter().collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub(crate) fn as_bytes(&self) -> &[u8] {
        self.text.as_bytes()
    }
}
