//! Flattened key/value settings: config file first, command-line flags on top.

use std::collections::BTreeMap;
use std::path::Path;

use quadham::coefficients::{ModelId, ModelSpec};
use quadham::{Error, Result};

const SECTIONS: [&str; 3] = ["model", "numeric", "output"];

#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn norm_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}

impl Settings {
    /// Read an INI file with `[model]`, `[numeric]` and `[output]` sections.
    pub fn from_ini(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_ini_str(&text)
    }

    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = ini::Ini::load_from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        let mut s = Settings::default();
        for (section, props) in ini.iter() {
            match section {
                Some(name) if SECTIONS.contains(&name.trim()) => {}
                Some(name) => return Err(Error::InvalidInput(format!("config: unknown section [{name}]"))),
                None if props.is_empty() => continue,
                None => return Err(Error::InvalidInput("config: keys must live in a section".into())),
            }
            for (k, v) in props.iter() {
                s.values.insert(norm_key(k), v.trim().to_string());
            }
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(norm_key(key), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_f64(key, v),
        }
    }

    pub fn f64_req(&self, key: &str) -> Result<f64> {
        let v = self.get(key).ok_or_else(|| Error::InvalidInput(format!("--{} is required", key.replace('_', "-"))))?;
        parse_f64(key, v)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("{key}: cannot parse '{v}' as a count"))),
        }
    }

    pub fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.f64_or(key, default)?;
        if !(v > 0.0) {
            return Err(Error::InvalidInput(format!("{key} must be > 0, got {v}")));
        }
        Ok(v)
    }

    fn list(&self, key: &str, default: f64) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(vec![default]),
            Some(v) => v.split(',').map(|x| parse_f64(key, x)).collect(),
        }
    }

    pub fn model(&self) -> Result<ModelId> {
        self.get("model")
            .ok_or_else(|| Error::InvalidInput("--model is required".into()))?
            .parse()
    }

    /// Every combination of the comma-separated model parameters, in input order.
    pub fn model_sweep(&self) -> Result<Vec<ModelSpec>> {
        let model = self.model()?;
        let base = ModelSpec::new(model);
        let mut out = Vec::new();
        for &w in &self.list("omega0", base.omega0)? {
            for &l in &self.list("lambda", base.lambda)? {
                for &m in &self.list("mu", base.mu_param)? {
                    for &d in &self.list("delta", base.delta)? {
                        let spec = ModelSpec::new(model).omega0(w).lambda(l).mu(m).delta(d);
                        spec.validate()?;
                        out.push(spec);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("{key}: cannot parse '{v}' as a number")))?;
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("{key}: value must be finite")));
    }
    Ok(x)
}
