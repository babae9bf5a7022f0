//! Numerical tolerances and thresholds shared by every module.
//!
//! The defaults are compiled in. A process may install an override once at
//! start-up (the CLI does this from its JSON config file); afterwards the
//! record is read-only.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Allowed deviation of a statevector's L2 norm from one.
    pub norm: f64,
    /// Allowed deviation of a dense generator from its adjoint.
    pub hermitian: f64,
    /// Allowed residual imaginary part of real-valued eigen-sums.
    pub imaginary: f64,
    /// Minimum fraction of sampled inputs with full weight-Jacobian rank.
    pub complete_threshold: f64,
    /// Minimum fraction of sampled weights with full data-Jacobian rank.
    pub selective_threshold: f64,
    /// A validation loss counts as improved only if it beats the best by more than this.
    pub improvement: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            norm: 1e-12,
            hermitian: 1e-12,
            imaginary: 1e-10,
            complete_threshold: 0.99,
            selective_threshold: 0.5,
            improvement: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let tol: Tolerances = serde_json::from_str(&text)?;
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.norm, self.hermitian, self.imaginary, self.improvement];
        if positive.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("tolerances must be finite and non-negative".into()));
        }
        for t in [self.complete_threshold, self.selective_threshold] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("threshold {t} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

static INSTALLED: OnceLock<Tolerances> = OnceLock::new();

/// Installs a process-wide override. Fails if tolerances were already read or installed.
pub fn install(tol: Tolerances) -> Result<()> {
    tol.validate()?;
    INSTALLED
        .set(tol)
        .map_err(|_| Error::Config("tolerances already installed".into()))
}

pub fn tolerances() -> &'static Tolerances {
    INSTALLED.get_or_init(Tolerances::default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let tol: Tolerances = serde_json::from_str(r#"{"selective_threshold": 0.7}"#).unwrap();
        assert_eq!(tol.selective_threshold, 0.7);
        assert_eq!(tol.norm, 1e-12);
        assert_eq!(tol.complete_threshold, 0.99);
    }

    #[test]
    fn rejects_out_of_range_threshold() {
        let tol = Tolerances {
            complete_threshold: 1.5,
            ..Tolerances::default()
        };
        assert!(tol.validate().is_err());
    }
}
