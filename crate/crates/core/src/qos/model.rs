use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::impact::ImpactFactorParams;
use super::QosError;
use crate::board::Quanta;
use crate::profiling::ProfileVector;
use crate::types::{AllocationVector, ResourceKind};

/// Whether higher or lower values of a QoS metric are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QosKind {
    Throughput,
    Latency,
}

/// Multiplicative per-resource QoS response model anchored at a profiled measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQosModel")]
pub struct QosModel {
    pub kind: QosKind,
    /// QoS measured at the profiled allocation, in the metric's own unit.
    pub anchor: f64,
    pub renormalize: bool,
    pub factors: BTreeMap<ResourceKind, ImpactFactorParams>,
}

#[derive(Deserialize)]
struct RawQosModel {
    kind: QosKind,
    anchor: f64,
    #[serde(default = "default_renormalize")]
    renormalize: bool,
    factors: BTreeMap<ResourceKind, ImpactFactorParams>,
}

fn default_renormalize() -> bool {
    true
}

impl TryFrom<RawQosModel> for QosModel {
    type Error = QosError;

    fn try_from(raw: RawQosModel) -> Result<Self, Self::Error> {
        QosModel::new(raw.kind, raw.anchor, raw.factors, raw.renormalize)
    }
}

impl QosModel {
    pub fn new(
        kind: QosKind,
        anchor: f64,
        factors: BTreeMap<ResourceKind, ImpactFactorParams>,
        renormalize: bool,
    ) -> Result<Self, QosError> {
        if !(anchor.is_finite() && anchor > 0.0) {
            return Err(QosError::InvalidModel(format!("anchor must be positive, got {anchor}")));
        }
        if factors.is_empty() {
            return Err(QosError::InvalidModel("model needs at least one factor".into()));
        }
        Ok(Self {
            kind,
            anchor,
            renormalize,
            factors,
        })
    }

    /// Builds a model with one factor per resource the profile actually uses.
    ///
    /// Each factor takes its bounds from [`factor_bounds`] and the slope from `alphas`
    /// when given, else the midpoint of the valid range.
    pub fn from_profile(
        kind: QosKind,
        anchor: f64,
        profile: &ProfileVector,
        quanta: &Quanta,
        alphas: &BTreeMap<ResourceKind, f64>,
    ) -> Result<Self, QosError> {
        let mut factors = BTreeMap::new();
        for kind_r in ResourceKind::ALL {
            let Some((r_min, r_prof)) = factor_bounds(profile, quanta, kind_r) else {
                continue;
            };
            let params = match alphas.get(&kind_r) {
                Some(&a) => ImpactFactorParams::new(a, r_min, r_prof)?,
                None => ImpactFactorParams::with_default_alpha(r_min, r_prof)?,
            };
            factors.insert(kind_r, params);
        }
        QosModel::new(kind, anchor, factors, true)
    }

    fn raw_product(&self, r: &AllocationVector) -> Result<f64, QosError> {
        let mut f = 1.0;
        for (&kind, params) in &self.factors {
            let v = params.eval(r.get(kind) as f64).map_err(|e| e.with_resource(kind))?;
            f *= v;
        }
        Ok(f)
    }

    /// Product of the factors at the profiled allocation of every resource.
    pub fn anchor_factor(&self) -> f64 {
        self.factors
            .values()
            .map(|p| p.linear_branch(p.r_prof()))
            .product()
    }

    /// Overall factor F(r) = product of per-resource factors, divided by F(r_prof) when
    /// renormalizing.
    pub fn compose_factors(&self, r: &AllocationVector) -> Result<f64, QosError> {
        let f = self.raw_product(r)?;
        if self.renormalize {
            Ok(f / self.anchor_factor())
        } else {
            Ok(f)
        }
    }

    /// Predicted QoS at allocation `r` in metric units.
    pub fn predict_qos(&self, r: &AllocationVector) -> Result<f64, QosError> {
        let f = self.compose_factors(r)?;
        Ok(match self.kind {
            QosKind::Throughput => self.anchor * f,
            QosKind::Latency => self.anchor / f,
        })
    }

    /// Profiled allocation implied by the factors; resources without factor read as zero.
    pub fn r_prof(&self) -> AllocationVector {
        let mut a = AllocationVector::ZERO;
        for (&k, p) in &self.factors {
            a.set(k, p.r_prof().round() as u64);
        }
        a
    }
}

/// Bounds `(r_min, r_prof)` of the impact factor for one resource of a profile.
///
/// Resources the workload never used get no factor. When the profiled floor reaches the
/// profiled demand (a flat trace, or a single busy core) the floor is moved one quantum
/// below demand so the factor keeps a non-empty linear range.
pub fn factor_bounds(profile: &ProfileVector, quanta: &Quanta, kind: ResourceKind) -> Option<(f64, f64)> {
    let r_prof = profile.r_prof.get(kind);
    if r_prof == 0 {
        return None;
    }
    let step = quanta.step(kind)?;
    let mut r_min = profile.r_min.get(kind);
    if r_min >= r_prof {
        r_min = r_prof.saturating_sub(step);
    }
    Some((r_min as f64, r_prof as f64))
}

/// Composes factors of `model` at `r`.
pub fn compose_factors(model: &QosModel, r: &AllocationVector) -> Result<f64, QosError> {
    model.compose_factors(r)
}

/// Predicts QoS of `model` at `r`.
pub fn predict_qos(model: &QosModel, r: &AllocationVector) -> Result<f64, QosError> {
    model.predict_qos(r)
}
