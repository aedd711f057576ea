//! Typed access to the configuration that remembers every effective value,
//! defaults included, for the manifest echo.

use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::path::PathBuf;
use std::str::FromStr;

use cmnoise_core::model::TabulatedDecay;
use cmnoise_core::{Config, CorrelationKernel, Error, ModelParams, Result};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct Settings {
    cfg: Config,
    echo: BTreeMap<String, String>,
}

impl Settings {
    pub fn new(cfg: Config) -> Self {
        Self { cfg, echo: BTreeMap::new() }
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.echo
    }

    pub fn record(&mut self, key: &str, value: impl Display) {
        self.echo.insert(key.to_string(), value.to_string());
    }

    pub fn get_or<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.cfg.get_or(key, default)?;
        self.record(key, &v);
        Ok(v)
    }

    pub fn get<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.cfg.get::<T>(key)?;
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }

    pub fn require<T>(&mut self, key: &str) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.cfg.require::<T>(key)?;
        self.record(key, &v);
        Ok(v)
    }

    /// Comma-separated list of numbers.
    pub fn list_or(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let out = match self.cfg.raw(key) {
            None => default.to_vec(),
            Some(e) => e
                .value
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|err| Error::Config {
                        path: e.path.clone(),
                        line: e.line,
                        msg: format!("key `{key}`: cannot parse `{s}`: {err}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let text: Vec<String> = out.iter().map(|v| v.to_string()).collect();
        self.record(key, text.join(","));
        Ok(out)
    }

    pub fn path(&mut self, key: &str) -> Result<PathBuf> {
        let p = self.cfg.path(key).ok_or_else(|| Error::MissingKey(key.to_string()))?;
        self.record(key, p.display());
        Ok(p)
    }

    /// Model parameters from `gamma, epsilon, tau, d_f`, or from
    /// `delta, gamma_tau` together with `tau` (default 1) and `d_f`.
    pub fn params(&mut self) -> Result<ModelParams> {
        let dimensionless = self.cfg.contains("delta") || self.cfg.contains("gamma_tau");
        let p = if dimensionless {
            if self.cfg.contains("gamma") || self.cfg.contains("epsilon") {
                return Err(Error::Config {
                    path: self.cfg.raw("delta").or(self.cfg.raw("gamma_tau")).map(|e| e.path.clone()).unwrap_or_default(),
                    line: 0,
                    msg: "give either gamma/epsilon or delta/gamma_tau, not both".into(),
                });
            }
            let delta = self.require("delta")?;
            let gamma_tau = self.require("gamma_tau")?;
            let tau = self.get_or("tau", 1.0)?;
            let d_f = self.require("d_f")?;
            ModelParams::from_dimensionless(delta, gamma_tau, tau, d_f)?
        } else {
            ModelParams::new(self.require("gamma")?, self.require("epsilon")?, self.require("tau")?, self.require("d_f")?)?
        };
        self.record("gamma", p.gamma);
        self.record("epsilon", p.epsilon);
        self.record("tau", p.tau);
        self.record("d_f", p.d_f);
        Ok(p)
    }

    /// `kernel = ou` (default) or `kernel = tabulated` with `kernel_file`.
    pub fn kernel(&mut self, tau: f64) -> Result<CorrelationKernel> {
        let kind: String = self.get_or("kernel", "ou".to_string())?;
        match kind.as_str() {
            "ou" => Ok(CorrelationKernel::ou(tau)),
            "tabulated" => {
                let path = self.path("kernel_file")?;
                Ok(CorrelationKernel::Tabulated(TabulatedDecay::from_csv(&path)?))
            }
            other => {
                let e = self.cfg.raw("kernel").expect("present");
                Err(Error::Config {
                    path: e.path.clone(),
                    line: e.line,
                    msg: format!("unknown kernel `{other}` (expected `ou` or `tabulated`)"),
                })
            }
        }
    }

    /// SHA-256 of the canonical `key=value` echo, one pair per line.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.echo {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex(&h.finalize())
    }
}

impl fmt::Display for Settings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.echo {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
