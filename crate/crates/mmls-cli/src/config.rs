//! Flat key/value run configuration: `key = value` lines with `#` comments,
//! merged with command-line flags (flags win). The effective configuration
//! is echoed into every run's output location.

use mmls::approximator::{ApproxConfig, Bandwidth};
use mmls::error::MmlsError;
use mmls::frame::InitMode;
use mmls::kernel::WeightFamily;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

/// Ordered key/value store; later inserts override earlier ones.
#[derive(Debug, Default, Clone)]
pub struct KeyValues {
    map: BTreeMap<String, String>,
}

pub const KNOWN_KEYS: &[&str] = &[
    "d",
    "m",
    "weight",
    "k",
    "h",
    "eps-reg-factor",
    "interpolatory",
    "support-factor",
    "support-margin",
    "init",
    "tol-q",
    "max-iter",
    "mu",
    "seed",
    "out",
    "samples",
    "queries",
    "query-count",
    "resolutions",
    "trials",
    "test-count",
    "n",
    "g",
    "snrdb",
    "sigma-r",
    "sigma-domain",
    "sigma-target",
    "t-min",
    "t-max",
    "n-list",
    "n-samples",
    "dump-frames",
];

impl KeyValues {
    pub fn set(&mut self, key: &str, value: &str) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    /// Parse a config file; unknown keys are rejected with their line number.
    pub fn load_file(&mut self, path: &str) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config '{path}': {e}")))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{path}:{}: expected 'key = value'", idx + 1))
            })?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Usage(format!(
                    "{path}:{}: unknown config key '{key}'",
                    idx + 1
                )));
            }
            self.set(key, value.trim());
        }
        Ok(())
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::Usage(format!("missing required option --{key}")))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("option --{key}: '{v}' is not a number"))),
        }
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("option --{key}: '{v}' is not an integer"))),
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("option --{key}: '{v}' is not an integer"))),
        }
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some("true" | "1" | "yes") => Ok(Some(true)),
            Some("false" | "0" | "no") => Ok(Some(false)),
            Some(v) => Err(CliError::Usage(format!(
                "option --{key}: '{v}' is not a boolean"
            ))),
        }
    }

    pub fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let mut out = Vec::new();
                for part in v.split(',') {
                    out.push(part.trim().parse::<usize>().map_err(|_| {
                        CliError::Usage(format!("option --{key}: '{part}' is not an integer"))
                    })?);
                }
                Ok(Some(out))
            }
        }
    }

    /// Build the approximation configuration from the generic keys.
    pub fn approx_config(&self) -> Result<ApproxConfig, CliError> {
        let d = self.usize("d")?.unwrap_or(1).max(1);
        let m = self.usize("m")?.unwrap_or(1);
        let mut cfg = ApproxConfig::new(d, m);
        if let Some(fam) = self.get("weight") {
            cfg.family = WeightFamily::parse(fam).map_err(cli_usage)?;
        }
        let h = match self.get("h") {
            None | Some("auto") => None,
            Some(v) => Some(v.parse::<f64>().map_err(|_| {
                CliError::Usage(format!("option --h: '{v}' is not a number or 'auto'"))
            })?),
        };
        if let Some(h) = h {
            let k = self.f64("k")?.unwrap_or(3.0);
            cfg.bandwidth = Bandwidth::Fixed { h, k };
        }
        if let Some(f) = self.f64("eps-reg-factor")? {
            cfg.eps_reg_factor = f;
        }
        if let Some(b) = self.bool("interpolatory")? {
            cfg.interpolatory = b;
        }
        if let Some(f) = self.f64("support-factor")? {
            cfg.support_factor = f;
        }
        if let Some(f) = self.f64("support-margin")? {
            cfg.support_margin = f;
        }
        match self.get("init") {
            None | Some("random") => {}
            Some("pca") => cfg.frame.init = InitMode::WeightedPca,
            Some(v) => {
                return Err(CliError::Usage(format!(
                    "option --init: '{v}' is neither 'random' nor 'pca'"
                )))
            }
        }
        if let Some(f) = self.f64("tol-q")? {
            cfg.frame.tol_q = f;
        }
        if let Some(n) = self.usize("max-iter")? {
            cfg.frame.max_iter = n;
        }
        if let Some(f) = self.f64("mu")? {
            cfg.frame.mu = f;
        }
        let seed = self.u64("seed")?.unwrap_or(0);
        cfg = cfg.with_seed(seed);
        cfg.validate().map_err(cli_usage)?;
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        Ok(self.u64("seed")?.unwrap_or(0))
    }

    /// Render the effective configuration for the echo file.
    pub fn render(&self, command: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# effective configuration");
        let _ = writeln!(out, "command = {command}");
        for (k, v) in &self.map {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn write_echo(&self, command: &str, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Numerical(format!("cannot create '{}': {e}", dir.display())))?;
        std::fs::write(dir.join("config.echo"), self.render(command))
            .map_err(|e| CliError::Numerical(format!("cannot write config echo: {e}")))?;
        Ok(())
    }
}

fn cli_usage(e: MmlsError) -> CliError {
    CliError::Usage(e.to_string())
}
