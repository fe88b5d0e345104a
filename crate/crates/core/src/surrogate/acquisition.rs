//! Acquisition scores for loss minimization; larger is always better.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcquisitionKind {
    #[serde(rename = "EI")]
    Ei,
    #[serde(rename = "PI")]
    Pi,
    #[serde(rename = "LCB")]
    Lcb,
}

impl AcquisitionKind {
    pub fn name(self) -> &'static str {
        match self {
            AcquisitionKind::Ei => "EI",
            AcquisitionKind::Pi => "PI",
            AcquisitionKind::Lcb => "LCB",
        }
    }
}

impl std::str::FromStr for AcquisitionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "EI" => Ok(AcquisitionKind::Ei),
            "PI" => Ok(AcquisitionKind::Pi),
            "LCB" => Ok(AcquisitionKind::Lcb),
            _ => Err(format!("unknown acquisition `{s}` (expected EI, PI or LCB)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    pub xi: f64,
    pub kappa: f64,
    pub best_so_far: f64,
}

impl AcquisitionSpec {
    pub fn new(kind: AcquisitionKind, best_so_far: f64) -> Self {
        AcquisitionSpec {
            kind,
            xi: 0.01,
            kappa: 1.96,
            best_so_far,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(Error::domain(format!("xi must be >= 0, got {}", self.xi)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::domain(format!("kappa must be > 0, got {}", self.kappa)));
        }
        Ok(())
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn acquisition(spec: &AcquisitionSpec, mean: f64, std: f64) -> f64 {
    let gap = spec.best_so_far - spec.xi - mean;
    match spec.kind {
        AcquisitionKind::Lcb => -(mean - spec.kappa * std),
        _ if std <= 0.0 => match spec.kind {
            AcquisitionKind::Ei => gap.max(0.0),
            _ => {
                if gap > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        },
        AcquisitionKind::Ei => {
            let z = gap / std;
            (gap * normal_cdf(z) + std * normal_pdf(z)).max(0.0)
        }
        AcquisitionKind::Pi => normal_cdf(gap / std),
    }
}
