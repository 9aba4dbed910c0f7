//! Experiment configuration: flat `key = value` text with optional `[section]`
//! headers, or the equivalent JSON object, validated against a per-command schema.
//!
//! A section named after a command (or `common`) applies to that command; other
//! sections are skipped, so one file can hold several experiments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One schema entry: key, default (empty means required or unset) and help text.
pub type KeySpec = (&'static str, &'static str, &'static str);

const COMMON: &[KeySpec] = &[("out", "", "output directory (default out/<command>)"), ("seed", "0", "recorded seed; every experiment is deterministic")];

const FAMILY: &[KeySpec] = &[
    ("family", "gevrey", "weight family: analytic | gevrey | gevreylog | explog | expsqrt"),
    ("alpha", "2", "family exponent alpha"),
    ("beta", "1", "family exponent beta (gevreylog)"),
];

const WEIGHTS: &[KeySpec] = &[
    ("sigma_grid", "1e-3:0.5", "range a:b of sigma for the C table (log spaced)"),
    ("sigma_points", "50", "points of the sigma grid"),
    ("y_grid", "1e2:1e6", "range a:b of y for the Omega and C^-1 table (log spaced)"),
    ("y_points", "41", "points of the y grid"),
    ("scan_l", "300", "largest l of the product-constant scans"),
    ("mg_l", "150", "largest l of the moderate-growth scan"),
    ("seq_l", "60", "largest l of the sequence table"),
];

const DIOPH: &[KeySpec] = &[
    ("omega", "golden", "frequency: golden | sqrt2 | comma-separated vector"),
    ("q_max", "200", "largest Q of the Psi table"),
    ("brute", "true", "cross-check two-frequency profiles against brute force"),
];

const BRTEST: &[KeySpec] = &[
    ("omega", "golden", "frequency: golden | sqrt2 | comma-separated vector"),
    ("s", "1", "width s"),
    ("n", "2", "number of degrees of freedom"),
    ("eta", "0", "eta in the schedule scale"),
    ("i_max", "64", "number of dyadic terms"),
    ("c2", "1", "constant c2"),
    ("q0_cap", "1e12", "largest Q0 tried"),
];

const NF: &[KeySpec] = &[
    ("hamiltonian", "", "FTSeries file of H; its zero Fourier mode is the integrable part (default: built-in toy)"),
    ("u", "1,0", "integer vector of the periodic vector v = u/T"),
    ("period", "1", "period T of v"),
    ("eps", "1e-4", "size of the perturbation"),
    ("eta", "1e-4", "size of the non-resonant integrable drift"),
    ("s", "0.5", "initial width"),
    ("kmax", "16", "Fourier truncation"),
    ("xi", "2", "width loss factor"),
    ("a_const", "1", "schedule constant A"),
];

const KAM: &[KeySpec] = &[
    ("hamiltonian", "", "FTSeries file of H with n = 2 (default: built-in kinetic plus cosines)"),
    ("eps", "1e-4", "size of the perturbation"),
    ("kmax", "32", "Fourier truncation"),
    ("iterations", "6", "maximal number of iterations"),
    ("tol", "1e-9", "target invariance defect"),
    ("orbit_time", "100", "horizon of the orbit cross-check (0 disables it)"),
];

const DIFFUSE: &[KeySpec] = &[
    ("omega", "golden", "nonzero frequency block: golden | sqrt2 | 1,x"),
    ("n", "3", "total number of degrees of freedom"),
    ("j", "3:8", "convergent indices: a:b or a list"),
    ("s", "0.01", "width s"),
    ("t_end", "1000", "integration horizon"),
    ("samples", "100", "samples along each orbit"),
    ("tol", "1e-8", "integrator tolerance"),
];

const MS: &[KeySpec] = &[
    ("n", "3", "degrees of freedom of the coupled map"),
    ("j", "2", "index j"),
    ("s", "0.01", "width s"),
    ("mode", "exact", "second block: exact (rotation by 1/A) | pendulum"),
    ("b", "1", "pendulum mode: period B of the pendulum orbit (q = A B)"),
    ("tol", "1e-10", "pendulum integrator tolerance"),
    ("exponent", "proof", "B_j exponent: proof | statement"),
    ("verify_drift", "false", "iterate the coupled map and record I1"),
];

const BESSI: &[KeySpec] = &[
    ("source", "constructed", "constructed | golden | sqrt2 | 1,x"),
    ("terms", "6", "modes of the constructed frequency"),
    ("s0", "0.05", "width s0 of the small-divisor condition"),
    ("s", "", "certificate width (default s0/2)"),
    ("eps", "1", "epsilon"),
    ("mu", "0.5", "mu"),
];

/// The subcommands that run experiments.
pub const COMMANDS: &[&str] = &["weights", "dioph", "brtest", "nf", "kam", "diffuse", "ms", "bessi"];

/// All keys accepted by `command`, common keys first.
pub fn schema(command: &str) -> Result<Vec<KeySpec>> {
    let (family, own): (bool, &[KeySpec]) = match command {
        "weights" => (true, WEIGHTS),
        "dioph" => (false, DIOPH),
        "brtest" => (true, BRTEST),
        "nf" => (true, NF),
        "kam" => (true, KAM),
        "diffuse" => (true, DIFFUSE),
        "ms" => (true, MS),
        "bessi" => (true, BESSI),
        other => return Err(Error::Config(format!("unknown command `{other}`"))),
    };
    let mut out = COMMON.to_vec();
    if family {
        out.extend_from_slice(FAMILY);
    }
    out.extend_from_slice(own);
    Ok(out)
}

/// Schema as a commented `key = value` template.
pub fn schema_text(command: &str) -> Result<String> {
    let mut s = format!("[{command}]\n");
    for (k, d, h) in schema(command)? {
        s.push_str(&format!("# {h}\n{k} = {d}\n"));
    }
    Ok(s)
}

/// A validated experiment configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: String,
    values: BTreeMap<String, String>,
}

fn normalize_key(k: &str) -> String {
    k.trim().trim_start_matches("--").replace('-', "_")
}

/// Raw `(key, value)` pairs of a text config that apply to `command`.
pub fn parse_text(text: &str, command: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut active = true;
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            active = name == command || name == "common";
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
        if active {
            out.push((normalize_key(k), v.trim().trim_matches('"').to_string()));
        }
    }
    Ok(out)
}

fn json_scalar(v: &serde_json::Value) -> Result<String> {
    Ok(match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Number(n) => n.to_string(),
        serde_json::Value::Bool(b) => b.to_string(),
        serde_json::Value::Array(a) => a.iter().map(json_scalar).collect::<Result<Vec<_>>>()?.join(","),
        other => return Err(Error::Config(format!("unsupported JSON value {other}"))),
    })
}

/// Raw `(key, value)` pairs of a JSON config: scalars at the top level, and objects
/// named after a command (or `common`) as sections.
pub fn parse_json(text: &str, command: &str) -> Result<Vec<(String, String)>> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    let obj = v.as_object().ok_or_else(|| Error::Config("JSON config must be an object".into()))?;
    let mut out = Vec::new();
    for (k, v) in obj {
        match v {
            serde_json::Value::Object(sec) => {
                if k == command || k == "common" {
                    for (k2, v2) in sec {
                        out.push((normalize_key(k2), json_scalar(v2)?));
                    }
                }
            }
            _ => out.push((normalize_key(k), json_scalar(v)?)),
        }
    }
    Ok(out)
}

/// Reads a config file; `.json` files (or text starting with `{`) are parsed as JSON.
pub fn read_config_file(path: &Path, command: &str) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if json {
        parse_json(&text, command)
    } else {
        parse_text(&text, command)
    }
}

/// Turns command-line words into pairs: `--key value`, `--key=value`, `key=value`,
/// and a bare `--flag` meaning `true`.
pub fn parse_args(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        if let Some(body) = a.strip_prefix("--") {
            if let Some((k, v)) = body.split_once('=') {
                out.push((normalize_key(k), v.to_string()));
            } else if i + 1 < args.len() && !args[i + 1].starts_with("--") {
                out.push((normalize_key(body), args[i + 1].clone()));
                i += 1;
            } else {
                out.push((normalize_key(body), "true".into()));
            }
        } else if let Some((k, v)) = a.split_once('=') {
            out.push((normalize_key(k), v.to_string()));
        } else {
            return Err(Error::Config(format!("unexpected argument `{a}`")));
        }
        i += 1;
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Applies `pairs` in order over the schema defaults; unknown keys are errors.
    pub fn new(command: &str, pairs: &[(String, String)]) -> Result<Self> {
        let sch = schema(command)?;
        let mut values: BTreeMap<String, String> = sch.iter().map(|(k, d, _)| (k.to_string(), d.to_string())).collect();
        for (k, v) in pairs {
            if !values.contains_key(k) {
                let known: Vec<&str> = sch.iter().map(|x| x.0).collect();
                return Err(Error::Config(format!("unknown key `{k}` for `{command}` (known: {})", known.join(", "))));
            }
            values.insert(k.clone(), v.clone());
        }
        Ok(ExperimentConfig { command: command.to_string(), values })
    }

    /// Config file (if any) first, then command-line pairs. A `--config FILE` among
    /// the arguments is treated like `file`.
    pub fn load(command: &str, file: Option<&Path>, args: &[String]) -> Result<Self> {
        let (files, args): (Vec<_>, Vec<_>) = parse_args(args)?.into_iter().partition(|(k, _)| k == "config");
        let mut pairs = Vec::new();
        for p in file.map(Path::to_path_buf).into_iter().chain(files.into_iter().map(|(_, v)| PathBuf::from(v))) {
            pairs.extend(read_config_file(&p, command)?);
        }
        pairs.extend(args);
        Self::new(command, &pairs)
    }

    /// Every resolved `(key, value)`, sorted by key.
    pub fn entries(&self) -> impl Iterator<Item = (&String, &String)> {
        self.values.iter()
    }

    pub fn get_str(&self, key: &str) -> Result<&str> {
        self.values.get(key).map(|s| s.as_str()).ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.get(key).is_some_and(|v| !v.is_empty())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<T> {
        let s = self.get_str(key)?;
        s.trim().parse().map_err(|_| Error::Config(format!("`{key}` = `{s}` is not {what}")))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        self.parse(key, "a number")
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        self.parse(key, "a nonnegative integer")
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        self.parse(key, "a nonnegative integer")
    }

    pub fn get_bool(&self, key: &str) -> Result<bool> {
        match self.get_str(key)?.trim() {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" => Ok(false),
            s => Err(Error::Config(format!("`{key}` = `{s}` is not a boolean"))),
        }
    }

    /// `a:b` as a pair.
    pub fn get_range(&self, key: &str) -> Result<(f64, f64)> {
        let s = self.get_str(key)?;
        let (a, b) = s.split_once(':').ok_or_else(|| Error::Config(format!("`{key}` = `{s}` is not a range a:b")))?;
        let p = |x: &str| x.trim().parse::<f64>().map_err(|_| Error::Config(format!("`{key}` = `{s}` is not a range a:b")));
        Ok((p(a)?, p(b)?))
    }

    /// `a:b` (inclusive integer range) or a comma-separated list.
    pub fn get_index_list(&self, key: &str) -> Result<Vec<usize>> {
        let s = self.get_str(key)?;
        let bad = || Error::Config(format!("`{key}` = `{s}` is not an index range or list"));
        if let Some((a, b)) = s.split_once(':') {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            if b < a {
                return Err(bad());
            }
            Ok((a..=b).collect())
        } else {
            s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
        }
    }

    /// Output directory: the `out` key or `out/<command>`.
    pub fn out_dir(&self) -> PathBuf {
        if self.is_set("out") {
            PathBuf::from(self.get_str("out").unwrap())
        } else {
            PathBuf::from("out").join(&self.command)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_json_agree() {
        let text = "# comment\nalpha = 1.5\n[ms]\nn = 4\n[weights]\nfamily = expsqrt\n";
        let json = r#"{"alpha": 1.5, "ms": {"n": 4}, "weights": {"family": "expsqrt"}}"#;
        let a = ExperimentConfig::new("weights", &parse_text(text, "weights").unwrap()).unwrap();
        let b = ExperimentConfig::new("weights", &parse_json(json, "weights").unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get_str("family").unwrap(), "expsqrt");
        assert_eq!(a.get_f64("alpha").unwrap(), 1.5);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let args: Vec<String> = ["--bogus", "1"].iter().map(|s| s.to_string()).collect();
        assert!(matches!(ExperimentConfig::load("ms", None, &args), Err(Error::Config(_))));
        let args: Vec<String> = ["--n", "x"].iter().map(|s| s.to_string()).collect();
        let c = ExperimentConfig::load("ms", None, &args).unwrap();
        assert!(matches!(c.get_usize("n"), Err(Error::Config(_))));
        assert!(matches!(schema("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn flags_and_ranges() {
        let args: Vec<String> = ["--verify-drift", "--mode", "pendulum", "j=3"].iter().map(|s| s.to_string()).collect();
        let c = ExperimentConfig::load("ms", None, &args).unwrap();
        assert!(c.get_bool("verify_drift").unwrap());
        assert_eq!(c.get_str("mode").unwrap(), "pendulum");
        assert_eq!(c.get_usize("j").unwrap(), 3);
        let d = ExperimentConfig::new("diffuse", &[]).unwrap();
        assert_eq!(d.get_index_list("j").unwrap(), vec![3, 4, 5, 6, 7, 8]);
        assert_eq!(d.out_dir(), PathBuf::from("out/diffuse"));
    }
}
