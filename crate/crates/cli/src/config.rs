//! Flat `key = value` run configuration.
//!
//! ```text
//! # applies to every command
//! seed = 7
//! t = 0.1, 1, 10
//!
//! [magnet]
//! n_spins = 12
//! ```
//!
//! A key inside `[cmd]`, or written `cmd.key`, applies only when `cmd` runs
//! and beats the unscoped key. Command-line `key=value` overrides beat both.
//! Unscoped file keys may be meant for other commands, so a command skips
//! the ones it does not use; scoped keys and overrides must be recognised.

use std::collections::BTreeMap;

use crate::Command;

/// One resolved value and whether an unknown key should be an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub value: String,
    pub strict: bool,
}

/// Raw entries keyed by `(scope, key)`; scope `None` is global.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<(Option<Command>, String), Entry>,
}

fn split_scope(key: &str) -> Result<(Option<Command>, String), String> {
    match key.split_once('.') {
        Some((scope, rest)) => {
            let cmd = Command::from_name(scope).ok_or_else(|| format!("unknown command scope {scope:?} in key {key:?}"))?;
            Ok((Some(cmd), rest.to_string()))
        }
        None => Ok((None, key.to_string())),
    }
}

fn valid_key(key: &str) -> bool {
    !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = ConfigFile::default();
        let mut section: Option<Command> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| format!("line {}: {msg}", lineno + 1);
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                section = Some(Command::from_name(name).ok_or_else(|| at(format!("unknown section [{name}]")))?);
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| at(format!("expected key = value, got {line:?}")))?;
            let key = key.trim();
            if !valid_key(key) {
                return Err(at(format!("invalid key {key:?}")));
            }
            let (scope, name) = match section {
                Some(cmd) if !key.contains('.') => (Some(cmd), key.to_string()),
                Some(_) => return Err(at(format!("dotted key {key:?} inside a section"))),
                None => split_scope(key).map_err(at)?,
            };
            let entry = Entry { value: value.trim().to_string(), strict: scope.is_some() };
            if cfg.entries.insert((scope, name), entry).is_some() {
                return Err(at(format!("duplicate key {key:?}")));
            }
        }
        Ok(cfg)
    }

    /// Applies `key=value` command-line overrides on top of the file.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), String> {
        for item in overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| format!("override must be key=value, got {item:?}"))?;
            let key = key.trim();
            if !valid_key(key) {
                return Err(format!("invalid key {key:?}"));
            }
            let (scope, name) = split_scope(key)?;
            // An unscoped override must also win over a scoped file entry.
            if scope.is_none() {
                self.entries.retain(|(s, k), _| !(s.is_some() && *k == name));
            }
            self.entries.insert((scope, name), Entry { value: value.trim().to_string(), strict: true });
        }
        Ok(())
    }

    /// Effective key/value pairs for `cmd`: global entries overlaid by
    /// entries scoped to `cmd`. Entries scoped to other commands are dropped.
    pub fn resolve(&self, cmd: Command) -> BTreeMap<String, Entry> {
        let mut out = BTreeMap::new();
        for ((scope, key), entry) in &self.entries {
            if scope.is_none() {
                out.insert(key.clone(), entry.clone());
            }
        }
        for ((scope, key), entry) in &self.entries {
            if *scope == Some(cmd) {
                out.insert(key.clone(), entry.clone());
            }
        }
        out
    }
}
