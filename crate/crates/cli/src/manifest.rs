//! `key=value` run manifests written next to every command's outputs.

use std::fmt::Display;
use std::fs;
use std::path::Path;

pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("SEEK_GIT_HASH"));

/// Keys that describe a run rather than configure it.
pub fn is_info_key(key: &str) -> bool {
    matches!(key, "command" | "build" | "manifest" | "deterministic")
        || key.starts_with("time.")
        || key.starts_with("result.")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.set("command", command);
        m.set("build", BUILD_ID);
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string().replace(['\n', '\r'], " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn set_path(&mut self, key: &str, path: &Path) {
        let resolved = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        self.set(key, resolved.display());
    }

    pub fn time(&mut self, phase: &str, seconds: f64) {
        self.set(&format!("time.{phase}_seconds"), format!("{seconds:.6}"));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn to_text(&self) -> String {
        let mut text = String::from("# seek run manifest\n");
        for (k, v) in &self.entries {
            text.push_str(k);
            text.push('=');
            text.push_str(v);
            text.push('\n');
        }
        text
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut m = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value, got `{line}`", i + 1))?;
            m.set(key.trim(), value.trim());
        }
        if m.get("command").is_none() {
            return Err("manifest has no `command` entry".into());
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<(), String> {
        fs::write(path, self.to_text()).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
