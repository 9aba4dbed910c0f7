//! Run artifacts: CSV tables, the run manifest, and the consolidated report that
//! aggregates verdicts from several manifests.
//!
//! Nothing time-dependent is written, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// RFC 4180 text.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Formats a float with the shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// One named check with its measured value and the bound it is compared against.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub measured: String,
    pub bound: String,
}

impl Verdict {
    pub fn new(name: &str, pass: bool, measured: impl Into<String>, bound: impl Into<String>) -> Self {
        Verdict { name: name.to_string(), pass, measured: measured.into(), bound: bound.into() }
    }

    pub fn status(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// Inputs, outputs, verdicts and the final status of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub exit_code: i32,
    pub error: Option<String>,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<String>,
    pub verdicts: Vec<Verdict>,
}

fn clean(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

impl Manifest {
    /// Structured `key = value` text with `[run]`, `[inputs]`, `[outputs]` and `[verdicts]` sections.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let status = if self.error.is_some() { "error" } else { "ok" };
        let _ = writeln!(s, "[run]\ncommand = {}\nversion = {}\nstatus = {status}\nexit_code = {}", self.command, self.version, self.exit_code);
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error = {}", clean(e));
        }
        s.push_str("\n[inputs]\n");
        for (k, v) in &self.inputs {
            let _ = writeln!(s, "{k} = {}", clean(v));
        }
        s.push_str("\n[outputs]\n");
        for (i, o) in self.outputs.iter().enumerate() {
            let _ = writeln!(s, "file{i} = {o}");
        }
        s.push_str("\n[verdicts]\n");
        for v in &self.verdicts {
            let _ = writeln!(s, "{} = {} | {} | {}", v.name, v.status(), clean(&v.measured), clean(&v.bound));
        }
        s
    }

    /// Parses the text written by [`to_text`](Self::to_text).
    pub fn from_text(text: &str) -> Result<Self> {
        let mut m = Manifest::default();
        let mut section = String::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("malformed manifest line `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            match section.as_str() {
                "run" => match k {
                    "command" => m.command = v.to_string(),
                    "version" => m.version = v.to_string(),
                    "exit_code" => m.exit_code = v.parse().map_err(|_| Error::Config(format!("bad exit code `{v}`")))?,
                    "error" => m.error = Some(v.to_string()),
                    _ => {}
                },
                "inputs" => m.inputs.push((k.to_string(), v.to_string())),
                "outputs" => m.outputs.push(v.to_string()),
                "verdicts" => {
                    let parts: Vec<&str> = v.splitn(3, " | ").collect();
                    if parts.len() != 3 {
                        return Err(Error::Config(format!("malformed verdict `{line}`")));
                    }
                    m.verdicts.push(Verdict::new(k, parts[0] == "PASS", parts[1], parts[2]));
                }
                _ => {}
            }
        }
        Ok(m)
    }
}

/// Writes the tables, the extra `(file name, contents)` files and the manifest into
/// `dir`; every file name is recorded in the manifest.
pub fn write_artifacts(dir: &Path, tables: &[Table], files: &[(String, String)], manifest: &mut Manifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let record = |file: String, manifest: &mut Manifest| {
        if !manifest.outputs.contains(&file) {
            manifest.outputs.push(file);
        }
    };
    for t in tables {
        let file = format!("{}.csv", t.name);
        std::fs::write(dir.join(&file), t.to_csv()?)?;
        record(file, manifest);
    }
    for (name, text) in files {
        std::fs::write(dir.join(name), text)?;
        record(name.clone(), manifest);
    }
    std::fs::write(dir.join("manifest.txt"), manifest.to_text())?;
    Ok(())
}

/// Consolidated verdict table over several manifests, in the order given.
///
/// Each path is a manifest file or a directory holding `manifest.txt`. Missing or
/// unreadable artifacts appear as `SKIPPED` rows and make the exit code 2; a run
/// that ended with an error contributes an `ERROR` row.
pub fn consolidate(paths: &[PathBuf]) -> (Table, i32) {
    let mut t = Table::new("report", &["source", "command", "check", "status", "measured", "bound"]);
    let mut code = 0;
    for p in paths {
        let file = if p.is_dir() { p.join("manifest.txt") } else { p.clone() };
        let src = p.display().to_string();
        let parsed = std::fs::read_to_string(&file).map_err(Error::from).and_then(|s| Manifest::from_text(&s));
        match parsed {
            Err(e) => {
                t.push(vec![src, String::new(), String::new(), "SKIPPED".into(), clean(&e.to_string()), String::new()]);
                code = 2;
            }
            Ok(m) => {
                if let Some(e) = &m.error {
                    t.push(vec![src.clone(), m.command.clone(), "run".into(), "ERROR".into(), e.clone(), format!("exit {}", m.exit_code)]);
                }
                for v in &m.verdicts {
                    t.push(vec![src.clone(), m.command.clone(), v.name.clone(), v.status().into(), v.measured.clone(), v.bound.clone()]);
                }
            }
        }
    }
    (t, code)
}
