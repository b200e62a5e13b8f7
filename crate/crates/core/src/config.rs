//! Run configuration: thick-thin thresholds, combinatorial bound, sampling
//! controls. Stored on disk as a flat `key=value` text file.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Two-dimensional Margulis bound used to cap the thickness constants.
pub const MARGULIS: f64 = 1.762_747_174_039_086; // 2·asinh(1)

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub eps_thick: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub k_bc: u64,
    pub denominator_bound: i64,
    pub grid_step: f64,
    pub rng_seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            eps_thick: 0.5,
            eps0: 0.3,
            eps1: 0.1,
            k_bc: 4,
            denominator_bound: 64,
            grid_step: 0.05,
            rng_seed: 7,
        }
    }
}

const KEYS: [&str; 7] = [
    "eps_thick",
    "eps0",
    "eps1",
    "k_bc",
    "denominator_bound",
    "grid_step",
    "rng_seed",
];

impl Config {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.eps1 > 0.0 && self.eps1 < self.eps0 && self.eps0 < self.eps_thick) {
            return bad(format!(
                "need 0 < eps1 < eps0 < eps_thick, got {} {} {}",
                self.eps1, self.eps0, self.eps_thick
            ));
        }
        if self.eps_thick >= MARGULIS {
            return bad(format!("eps_thick {} exceeds 2·asinh(1)", self.eps_thick));
        }
        if self.k_bc == 0 {
            return bad("k_bc must be positive".into());
        }
        if self.denominator_bound < 1 {
            return bad("denominator_bound must be at least 1".into());
        }
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return bad(format!(
                "grid_step must be positive, got {}",
                self.grid_step
            ));
        }
        Ok(())
    }

    /// Smallest flat systole (extremal length) accepted by the bridge.
    pub fn ext_floor(&self) -> f64 {
        self.eps_thick * self.eps_thick
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Config {
            rng_seed: seed,
            ..self.clone()
        }
    }

    pub fn with_grid(&self, grid_step: f64) -> Self {
        Config {
            grid_step,
            ..self.clone()
        }
    }

    /// Canonical text form; floats use the shortest round-trip repr.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "eps_thick={:?}", self.eps_thick);
        let _ = writeln!(s, "eps0={:?}", self.eps0);
        let _ = writeln!(s, "eps1={:?}", self.eps1);
        let _ = writeln!(s, "k_bc={}", self.k_bc);
        let _ = writeln!(s, "denominator_bound={}", self.denominator_bound);
        let _ = writeln!(s, "grid_step={:?}", self.grid_step);
        let _ = writeln!(s, "rng_seed={}", self.rng_seed);
        s
    }

    /// Parses `key=value` lines over the defaults. Blank lines and `#`
    /// comments are ignored; errors carry 1-based line numbers.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line, msg };
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {body:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let float = || {
                value
                    .parse::<f64>()
                    .map_err(|_| err(format!("{key}: not a number: {value:?}")))
            };
            let int = || {
                value
                    .parse::<i64>()
                    .map_err(|_| err(format!("{key}: not an integer: {value:?}")))
            };
            let uint = || {
                value
                    .parse::<u64>()
                    .map_err(|_| err(format!("{key}: not a non-negative integer: {value:?}")))
            };
            match key {
                "eps_thick" => cfg.eps_thick = float()?,
                "eps0" => cfg.eps0 = float()?,
                "eps1" => cfg.eps1 = float()?,
                "k_bc" => cfg.k_bc = uint()?,
                "denominator_bound" => cfg.denominator_bound = int()?,
                "grid_step" => cfg.grid_step = float()?,
                "rng_seed" => cfg.rng_seed = uint()?,
                other => {
                    return Err(err(format!(
                        "unknown key {other:?} (expected one of {})",
                        KEYS.join(", ")
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_kv(&text)
    }

    /// First 16 hex digits of SHA-256 over the canonical text form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_kv().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_roundtrip_and_hash() {
        let cfg = Config {
            grid_step: 0.025,
            rng_seed: 99,
            ..Config::default()
        };
        let back = Config::from_kv(&cfg.to_kv()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_ne!(cfg.hash(), Config::default().hash());
        assert_eq!(cfg.hash().len(), 16);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let text = "# comment\neps_thick=0.5\n\ngrid_step=abc\n";
        match Config::from_kv(text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        match Config::from_kv("eps0=0.2\nwhat=1\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match Config::from_kv("eps0 0.2\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn threshold_ordering_enforced() {
        assert!(Config::from_kv("eps1=0.4\n").is_err());
        assert!(Config::from_kv("eps_thick=1.8\n").is_err());
        assert!(Config::default().validate().is_ok());
    }
}
