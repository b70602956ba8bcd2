//! `key=value` report files: emit identification results, re-ingest
//! estimate sets.

use anyhow::{anyhow, bail, Context, Result};
use furuta_core::uas::N_PARAMS;
use std::fmt::Write as _;
use std::path::Path;

/// Serialize one method's identification outcome.
///
/// Deterministic fields come first; the two wall-clock keys at the end are
/// the only lines that vary between reruns of the same seed.
pub struct ReportBuilder {
    out: String,
}

impl ReportBuilder {
    pub fn new(method: &str) -> Self {
        let mut out = String::new();
        let _ = writeln!(out, "method={method}");
        Self { out }
    }

    pub fn flag(mut self, key: &str, value: bool) -> Self {
        let _ = writeln!(self.out, "{key}={value}");
        self
    }

    pub fn int(mut self, key: &str, value: usize) -> Self {
        let _ = writeln!(self.out, "{key}={value}");
        self
    }

    pub fn num(mut self, key: &str, value: f64) -> Self {
        let _ = writeln!(self.out, "{key}={value:.16e}");
        self
    }

    pub fn maybe_num(self, key: &str, value: Option<f64>) -> Self {
        match value {
            Some(v) => self.num(key, v),
            None => self,
        }
    }

    pub fn estimates(mut self, z: &[f64; N_PARAMS]) -> Self {
        for (n, v) in z.iter().enumerate() {
            let _ = writeln!(self.out, "z{}={v:.16e}", n + 1);
        }
        self
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// Read `z1..z10` from a `key=value` report or estimates file. Exactly ten
/// values must be present.
pub fn read_estimates(path: &Path) -> Result<[f64; N_PARAMS]> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read estimates {}", path.display()))?;
    let mut z: [Option<f64>; N_PARAMS] = [None; N_PARAMS];
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let key = key.trim();
        if let Some(num) = key.strip_prefix('z') {
            if let Ok(n) = num.parse::<usize>() {
                if (1..=N_PARAMS).contains(&n) {
                    let v: f64 = value
                        .trim()
                        .parse()
                        .map_err(|e| anyhow!("line {}: key `{key}`: {e}", idx + 1))?;
                    z[n - 1] = Some(v);
                }
            }
        }
    }
    let found = z.iter().flatten().count();
    if found != N_PARAMS {
        bail!(
            "{}: expected {N_PARAMS} estimates z1..z{N_PARAMS}, found {found}",
            path.display()
        );
    }
    let mut out = [0.0; N_PARAMS];
    for (slot, v) in out.iter_mut().zip(z) {
        *slot = v.unwrap();
    }
    Ok(out)
}
