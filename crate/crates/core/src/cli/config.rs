use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};

use super::Common;
use crate::qcore::{parse_real, precision_bits, ModelContext};

const KEYS: &[&str] = &[
    "q",
    "alpha",
    "c",
    "digits",
    "n",
    "tol",
    "max_iter",
    "output",
    "exploratory",
    "method",
    "methods",
    "check",
    "parity",
    "epsilon",
    "kappa",
    "a",
    "u",
    "v",
    "index",
    "gap",
];

/// `key = value` lines; `#` starts a comment. Keys may use `-` or `_`.
pub fn parse_config(text: &str) -> anyhow::Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key=value", lineno + 1))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            bail!("config line {}: unknown key `{}`", lineno + 1, k.trim());
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> anyhow::Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text)
}

/// Validated settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub q: String,
    pub alpha: String,
    pub c: String,
    pub digits: u32,
    pub n: usize,
    pub tol: String,
    pub max_iter: usize,
    pub output: Option<PathBuf>,
    pub exploratory: bool,
    file: HashMap<String, String>,
}

/// Flag value, else config-file value, else the default.
pub fn pick<T: FromStr>(flag: Option<T>, file: &HashMap<String, String>, key: &str, default: T) -> anyhow::Result<T>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    match file.get(key) {
        Some(text) => text.parse().map_err(|e| anyhow!("config `{key}`: {e}")),
        None => Ok(default),
    }
}

impl RunConfig {
    pub fn resolve(common: &Common) -> anyhow::Result<RunConfig> {
        let file = match &common.config {
            Some(p) => load_config(p)?,
            None => HashMap::new(),
        };
        let digits = pick(common.digits, &file, "digits", 100u32)?;
        let tol = pick(common.tol.clone(), &file, "tol", format!("1e-{}", 3 * digits / 10))?;
        let output = match (&common.output, file.get("output")) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(p)) => Some(PathBuf::from(p)),
            _ => None,
        };
        let exploratory = common.exploratory || pick(None, &file, "exploratory", false)?;
        let cfg = RunConfig {
            q: pick(common.q.clone(), &file, "q", "0.9".to_string())?,
            alpha: pick(common.alpha.clone(), &file, "alpha", "5".to_string())?,
            c: pick(common.c.clone(), &file, "c", "-1".to_string())?,
            digits,
            n: pick(common.n, &file, "n", 30usize)?,
            tol,
            max_iter: pick(common.max_iter, &file, "max_iter", 500usize)?,
            output,
            exploratory,
            file,
        };
        cfg.context()?;
        cfg.tol_value(cfg.digits)?;
        Ok(cfg)
    }

    /// A subcommand-specific setting: flag, then file, then default.
    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> anyhow::Result<T>
    where
        T::Err: std::fmt::Display,
    {
        pick(flag, &self.file, key, default)
    }

    pub fn context(&self) -> anyhow::Result<ModelContext> {
        self.context_at(self.digits)
    }

    pub fn context_at(&self, digits: u32) -> anyhow::Result<ModelContext> {
        Ok(ModelContext::builder()
            .q(self.q.as_str())
            .alpha(self.alpha.as_str())
            .c(self.c.as_str())
            .digits(digits)
            .exploratory(self.exploratory)
            .allow_low_precision(digits < crate::qcore::MIN_DIGITS)
            .build()?)
    }

    pub fn tol_value(&self, digits: u32) -> anyhow::Result<rug::Float> {
        let v = parse_real(&self.tol, precision_bits(digits))?;
        if !(v > 0) {
            bail!("tol must be positive");
        }
        Ok(v)
    }
}
