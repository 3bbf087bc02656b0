//! Run bookkeeping: configuration resolution, input and output tracking,
//! and the manifest that lets a run be repeated.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use sha2::{Digest, Sha256};

/// Errors that map to a specific process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Mismatch(String),
}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    CliError::Validation(msg.into()).into()
}

/// Parsed `key = value` file.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> anyhow::Result<ConfigFile> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("config line {}: expected `key = value`", i + 1)))?;
            values.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
        Ok(ConfigFile { values })
    }
}

/// Picks each setting from flag, then config file, then built-in default,
/// and records the result.
#[derive(Debug, Default)]
pub struct Resolver {
    file: ConfigFile,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(file: ConfigFile) -> Resolver {
        Resolver { file, resolved: BTreeMap::new() }
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> anyhow::Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.values.get(key) {
                Some(s) => s.parse::<T>().map_err(|e| invalid(format!("config key `{key}`: {e}")))?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Like [`Resolver::get`] for settings without a default.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> anyhow::Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.values.get(key) {
                Some(s) => Some(s.parse::<T>().map_err(|e| invalid(format!("config key `{key}`: {e}")))?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    pub fn flag(&mut self, key: &str, flag: bool) -> anyhow::Result<bool> {
        self.get(key, flag.then_some(true), false)
    }

    pub fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.insert(key.to_string(), value.to_string());
    }
}

/// State of one command invocation.
pub struct Run {
    pub argv: Vec<String>,
    pub cfg: Resolver,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(argv: Vec<String>, cfg: Resolver) -> Run {
        Run { argv, cfg, inputs: Vec::new(), outputs: Vec::new() }
    }

    /// Read an input file and remember it for the manifest.
    pub fn read(&mut self, path: &Path) -> anyhow::Result<String> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
        Ok(text)
    }

    pub fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        if self.inputs.iter().any(|p| same_file(p, path)) {
            bail!(invalid(format!("refusing to overwrite input file {}", path.display())));
        }
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    pub fn note_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn manifest(&self) -> anyhow::Result<Manifest> {
        let digest_all = |paths: &[PathBuf]| -> anyhow::Result<Vec<(PathBuf, String)>> {
            paths.iter().map(|p| Ok((p.clone(), file_digest(p)?))).collect()
        };
        Ok(Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            cwd: std::env::current_dir().context("reading working directory")?,
            argv: self.argv.clone(),
            config: self.cfg.resolved.clone(),
            inputs: digest_all(&self.inputs)?,
            outputs: digest_all(&self.outputs)?,
        })
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

pub fn file_digest(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Everything needed to repeat a run: arguments, resolved settings and
/// content digests of what went in and came out.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub version: String,
    pub cwd: PathBuf,
    pub argv: Vec<String>,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<(PathBuf, String)>,
    pub outputs: Vec<(PathBuf, String)>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut out = String::from("manifest v1\n");
        out.push_str(&format!("version {}\n", self.version));
        out.push_str(&format!("cwd {}\n", self.cwd.display()));
        if let Some(cmd) = self.argv.first() {
            out.push_str(&format!("command {cmd}\n"));
        }
        for a in &self.argv {
            out.push_str(&format!("arg {a}\n"));
        }
        for (k, v) in &self.config {
            out.push_str(&format!("config {k} = {v}\n"));
        }
        for (p, d) in &self.inputs {
            out.push_str(&format!("input {d} {}\n", p.display()));
        }
        for (p, d) in &self.outputs {
            out.push_str(&format!("output {d} {}\n", p.display()));
        }
        out
    }

    pub fn parse(text: &str) -> anyhow::Result<Manifest> {
        let mut lines = text.lines();
        if lines.next() != Some("manifest v1") {
            bail!(invalid("not a v1 run manifest"));
        }
        let mut m = Manifest {
            version: String::new(),
            cwd: PathBuf::new(),
            argv: Vec::new(),
            config: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        };
        for (i, line) in lines.enumerate() {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let bad = || invalid(format!("manifest line {}: malformed `{line}`", i + 2));
            match key {
                "version" => m.version = rest.to_string(),
                "cwd" => m.cwd = PathBuf::from(rest),
                "command" => {}
                "arg" => m.argv.push(rest.to_string()),
                "config" => {
                    let (k, v) = rest.split_once(" = ").ok_or_else(bad)?;
                    m.config.insert(k.to_string(), v.to_string());
                }
                "input" | "output" => {
                    let (d, p) = rest.split_once(' ').ok_or_else(bad)?;
                    let entry = (PathBuf::from(p), d.to_string());
                    if key == "input" {
                        m.inputs.push(entry);
                    } else {
                        m.outputs.push(entry);
                    }
                }
                "" => {}
                _ => return Err(bad()),
            }
        }
        if m.argv.is_empty() {
            return Err(anyhow!(invalid("manifest records no arguments")));
        }
        Ok(m)
    }
}
