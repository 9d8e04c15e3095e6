//! Flat `key = value` configuration files.
//!
//! Recognised keys (case-insensitive): gamma, chi, delta, mu, eta, N, n_bad,
//! scheme, detuning_sign. Blank lines and `#` comments are skipped; later
//! assignments override earlier ones. Unknown keys are rejected so typos do
//! not silently fall back to defaults.

use crate::error::{Error, Result};
use crate::params::{DetuningSign, RotatingFrameParams, Scheme};

/// Values read from a config file. `None` means the key was absent; callers
/// layer these between built-in defaults and explicit command-line flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigValues {
    pub gamma: Option<f64>,
    pub chi: Option<f64>,
    pub delta: Option<f64>,
    pub mu: Option<f64>,
    pub eta: Option<f64>,
    pub n_th: Option<f64>,
    pub n_bad: Option<f64>,
    pub scheme: Option<Scheme>,
    pub detuning_sign: Option<DetuningSign>,
}

impl ConfigValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ConfigValues::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.split_once('#') {
                Some((head, _comment)) => head,
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>().map_err(|_| {
                    Error::Config(format!("line {}: {v:?} is not a number", lineno + 1))
                })
            };
            match key.as_str() {
                "gamma" => cfg.gamma = Some(num(value)?),
                "chi" => cfg.chi = Some(num(value)?),
                "delta" => cfg.delta = Some(num(value)?),
                "mu" => cfg.mu = Some(num(value)?),
                "eta" => cfg.eta = Some(num(value)?),
                "n" => cfg.n_th = Some(num(value)?),
                "n_bad" => cfg.n_bad = Some(num(value)?),
                "scheme" => cfg.scheme = Some(value.parse()?),
                "detuning_sign" => cfg.detuning_sign = Some(value.parse()?),
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(cfg)
    }

    /// Resolve into parameters. Explicit `delta` wins over `detuning_sign`;
    /// with neither, delta falls on the amplification line with negative sign.
    pub fn resolve(&self) -> (RotatingFrameParams, Scheme) {
        let gamma = self.gamma.unwrap_or(1.0);
        let chi = self.chi.unwrap_or(0.0);
        let sign = self.detuning_sign.unwrap_or(DetuningSign::Minus);
        let params = RotatingFrameParams {
            gamma,
            chi,
            delta: self.delta.unwrap_or_else(|| sign.apply(chi)),
            mu: self.mu.unwrap_or(0.0),
            eta: self.eta.unwrap_or(1.0),
            n_th: self.n_th.unwrap_or(0.0),
            n_bad: self.n_bad.unwrap_or(0.0),
        };
        (params, self.scheme.unwrap_or(Scheme::Dmpa))
    }

    /// Overlay `other` on top of `self`, field by field.
    pub fn merged(&self, other: &ConfigValues) -> ConfigValues {
        ConfigValues {
            gamma: other.gamma.or(self.gamma),
            chi: other.chi.or(self.chi),
            delta: other.delta.or(self.delta),
            mu: other.mu.or(self.mu),
            eta: other.eta.or(self.eta),
            n_th: other.n_th.or(self.n_th),
            n_bad: other.n_bad.or(self.n_bad),
            scheme: other.scheme.or(self.scheme),
            detuning_sign: other.detuning_sign.or(self.detuning_sign),
        }
    }
}
