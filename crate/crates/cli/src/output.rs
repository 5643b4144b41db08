//! CSV tables with a `#` manifest header, written atomically.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::Command;

/// Keys that never change results and so stay out of the manifest.
pub const NON_MANIFEST_KEYS: [&str; 3] = ["out", "seed", "workers"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Set when any row carries a convergence flag.
    pub flagged: bool,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new(), flagged: false }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

pub fn render(cmd: Command, seed: u64, resolved: &BTreeMap<String, String>, table: &Table) -> String {
    let mut out = String::new();
    out.push_str(&format!("# ibound {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("# command = {}\n", cmd.name()));
    out.push_str(&format!("# seed = {seed}\n"));
    for (k, v) in resolved {
        if !NON_MANIFEST_KEYS.contains(&k.as_str()) {
            out.push_str(&format!("# {k} = {v}\n"));
        }
    }
    out.push_str(&table.header.join(","));
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_sorted_keys_without_runtime_ones() {
        let mut resolved = BTreeMap::new();
        resolved.insert("t".to_string(), "1".to_string());
        resolved.insert("h".to_string(), "0,-1;-1,0".to_string());
        resolved.insert("out".to_string(), "x.csv".to_string());
        let mut table = Table::new(&["a", "b"]);
        table.push(vec!["1".into(), "2".into()]);
        let text = render(Command::Vnte, 5, &resolved, &table);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# ibound "));
        assert_eq!(&lines[1..], &["# command = vnte", "# seed = 5", "# h = 0,-1;-1,0", "# t = 1", "a,b", "1,2"]);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, "first\n").unwrap();
        write_atomic(&path, "second\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
