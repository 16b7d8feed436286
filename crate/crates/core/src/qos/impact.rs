use serde::{Deserialize, Serialize};

use super::QosError;

/// Lower clamp on an impact factor so latency predictions stay finite.
pub const FACTOR_FLOOR: f64 = 1e-9;

/// Parameters of one resource's impact factor.
///
/// Below the profiled allocation the factor grows linearly with slope `alpha` from zero at
/// `r_min`; above it the factor saturates exponentially towards one. The two branches meet
/// with equal value and slope at `r_prof`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawImpactParams")]
pub struct ImpactFactorParams {
    alpha: f64,
    r_min: f64,
    r_prof: f64,
}

#[derive(Deserialize)]
struct RawImpactParams {
    alpha: f64,
    r_min: f64,
    r_prof: f64,
}

impl TryFrom<RawImpactParams> for ImpactFactorParams {
    type Error = QosError;

    fn try_from(raw: RawImpactParams) -> Result<Self, Self::Error> {
        ImpactFactorParams::new(raw.alpha, raw.r_min, raw.r_prof)
    }
}

impl ImpactFactorParams {
    pub fn new(alpha: f64, r_min: f64, r_prof: f64) -> Result<Self, QosError> {
        if !(alpha.is_finite() && r_min.is_finite() && r_prof.is_finite()) {
            return Err(QosError::InvalidParams("impact parameters must be finite".into()));
        }
        if r_min >= r_prof {
            return Err(QosError::InvalidParams(format!(
                "r_min ({r_min}) must be below r_prof ({r_prof})"
            )));
        }
        let max = 1.0 / (r_prof - r_min);
        if !(alpha > 0.0 && alpha < max) {
            return Err(QosError::InvalidParams(format!(
                "alpha {alpha} outside (0, {max})"
            )));
        }
        Ok(Self { alpha, r_min, r_prof })
    }

    /// Midpoint of the valid slope range, used when no calibration data exists.
    pub fn with_default_alpha(r_min: f64, r_prof: f64) -> Result<Self, QosError> {
        if r_min >= r_prof {
            return Err(QosError::InvalidParams(format!(
                "r_min ({r_min}) must be below r_prof ({r_prof})"
            )));
        }
        Self::new(0.5 / (r_prof - r_min), r_min, r_prof)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_prof(&self) -> f64 {
        self.r_prof
    }

    /// Exclusive upper bound on alpha for these bounds.
    pub fn alpha_limit(&self) -> f64 {
        1.0 / (self.r_prof - self.r_min)
    }

    pub fn c(&self) -> f64 {
        1.0 - self.alpha * (self.r_prof - self.r_min)
    }

    pub fn d(&self) -> f64 {
        -self.alpha / self.c()
    }

    pub fn linear_branch(&self, r: f64) -> f64 {
        self.alpha * (r - self.r_min)
    }

    pub fn saturating_branch(&self, r: f64) -> f64 {
        1.0 - self.c() * (self.d() * (r - self.r_prof)).exp()
    }

    /// Factor in `(0, 1]`; allocations at or below `r_min` cannot run the workload.
    pub fn eval(&self, r: f64) -> Result<f64, QosError> {
        if r <= self.r_min {
            return Err(QosError::BelowMinimum {
                resource: None,
                amount: r,
                r_min: self.r_min,
            });
        }
        let f = if r < self.r_prof {
            self.linear_branch(r)
        } else {
            self.saturating_branch(r)
        };
        Ok(f.clamp(FACTOR_FLOOR, 1.0))
    }
}

/// Evaluates the impact factor of `params` at allocation `r`.
pub fn impact_factor(params: &ImpactFactorParams, r: f64) -> Result<f64, QosError> {
    params.eval(r)
}
