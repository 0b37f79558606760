//! CSV tables with a `#`-prefixed metadata header.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Ordered `key: value` lines written ahead of a table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        let value = value.to_string().replace('\n', " ");
        self.entries.push((key.into(), value));
    }

    pub fn extend(&mut self, other: &Metadata) {
        self.entries.extend(other.entries.iter().cloned());
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write_header<W: Write>(&self, w: &mut W) -> Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }
}

/// Fixed-width scientific formatting used for every float in output files.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Header lines, then a CSV table.
pub fn write_table<W, I>(w: &mut W, meta: &Metadata, headers: &[String], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = Vec<String>>,
{
    meta.write_header(w)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(headers)?;
    for row in rows {
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

/// Writes the output of `body` to `path`, creating parent directories.
pub fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut buf = Vec::new();
    body(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_precedes_table() {
        let meta = Metadata::new().with("model", "mm").with("n", 3);
        let mut out = Vec::new();
        write_table(
            &mut out,
            &meta,
            &["x".into(), "y".into()],
            vec![vec![fmt_f64(0.5), fmt_opt(None)]],
        )
        .unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "# model: mm\n# n: 3\nx,y\n5.0000000000000000e-1,\n"
        );
    }

    #[test]
    fn lookup_and_newlines() {
        let meta = Metadata::new().with("note", "a\nb");
        assert_eq!(meta.get("note"), Some("a b"));
        assert_eq!(meta.get("missing"), None);
    }
}
