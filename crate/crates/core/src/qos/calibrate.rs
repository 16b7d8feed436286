//! Slope calibration: single-point inversion and least-squares fits.

use std::collections::BTreeMap;

use super::impact::ImpactFactorParams;
use super::model::{QosKind, QosModel};
use super::QosError;
use crate::types::{AllocationVector, ResourceKind};

/// Inverts the linear branch through one under-provisioned measurement.
///
/// `anchor_qos` is the QoS measured at `r_prof`; `low` is `(r_low, q_low)` with
/// `r_min < r_low < r_prof`.
pub fn calibrate_alpha(
    anchor_qos: f64,
    r_prof: f64,
    r_min: f64,
    low: (f64, f64),
    kind: QosKind,
) -> Result<f64, QosError> {
    let (r_low, q_low) = low;
    if !(r_min < r_low && r_low < r_prof) {
        return Err(QosError::InvalidSample(format!(
            "calibration point r={r_low} must lie strictly between r_min={r_min} and r_prof={r_prof}"
        )));
    }
    if !(anchor_qos > 0.0 && q_low > 0.0) {
        return Err(QosError::InvalidSample("QoS values must be positive".into()));
    }
    let wrong_side = match kind {
        QosKind::Throughput => q_low >= anchor_qos,
        QosKind::Latency => q_low <= anchor_qos,
    };
    if wrong_side {
        return Err(QosError::InvalidSample(format!(
            "under-provisioned QoS {q_low} is not worse than the anchor {anchor_qos}"
        )));
    }
    let ratio = match kind {
        QosKind::Throughput => q_low / anchor_qos,
        QosKind::Latency => anchor_qos / q_low,
    };
    let alpha = ratio / (r_low - r_min);
    let max = 1.0 / (r_prof - r_min);
    if !(alpha > 0.0 && alpha < max) {
        return Err(QosError::CalibrationOutOfRange { alpha, max });
    }
    Ok(alpha)
}

/// Minimizes `f` on `[lo, hi]`: a uniform grid scan followed by golden-section refinement
/// around the best grid cell.
pub fn minimize_scalar(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize) -> (f64, f64) {
    let grid = grid.max(2);
    let h = (hi - lo) / grid as f64;
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..=grid {
        let v = f(lo + h * i as f64);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut a = lo + h * best_i.saturating_sub(1) as f64;
    let mut b = (lo + h * (best_i + 1) as f64).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    let (x, v) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if v <= best_v {
        (x, v)
    } else {
        (lo + h * best_i as f64, best_v)
    }
}

const FIT_GRID: usize = 400;
const ALPHA_MARGIN: f64 = 1e-9;

#[cfg(test)]
fn single_resource_model(alpha: f64, anchor: f64, r_min: f64, r_prof: f64, kind: QosKind) -> Option<QosModel> {
    let params = ImpactFactorParams::new(alpha, r_min, r_prof).ok()?;
    let mut factors = BTreeMap::new();
    factors.insert(ResourceKind::PCore, params);
    QosModel::new(kind, anchor, factors, false).ok()
}

/// Least-squares slope for one resource with the anchor held fixed.
///
/// Predictions use the unnormalized factor. Samples at or below `r_min` are ignored.
pub fn fit_alpha_least_squares(
    samples: &[(f64, f64)],
    anchor: f64,
    r_min: f64,
    r_prof: f64,
    kind: QosKind,
) -> Result<f64, QosError> {
    if r_min >= r_prof {
        return Err(QosError::InvalidParams(format!(
            "r_min ({r_min}) must be below r_prof ({r_prof})"
        )));
    }
    let usable: Vec<(f64, f64)> = samples.iter().copied().filter(|&(r, _)| r > r_min).collect();
    if usable.len() < 2 || usable.iter().all(|&(r, _)| r == usable[0].0) {
        return Err(QosError::DegenerateSamples);
    }
    let limit = 1.0 / (r_prof - r_min);
    let sse = |alpha: f64| -> f64 {
        let Ok(params) = ImpactFactorParams::new(alpha, r_min, r_prof) else {
            return f64::INFINITY;
        };
        usable
            .iter()
            .map(|&(r, q)| {
                let f = params.eval(r).unwrap_or(f64::MIN_POSITIVE);
                let pred = match kind {
                    QosKind::Throughput => anchor * f,
                    QosKind::Latency => anchor / f,
                };
                (q - pred).powi(2)
            })
            .sum()
    };
    let (alpha, _) = minimize_scalar(sse, limit * ALPHA_MARGIN, limit * (1.0 - ALPHA_MARGIN), FIT_GRID);
    Ok(alpha)
}

/// Sample for a multi-resource fit: allocation and measured QoS.
pub type QosSample = (AllocationVector, f64);

/// Closed-form least-squares anchor for fixed unnormalized factors.
fn best_anchor(kind: QosKind, pairs: &[(f64, f64)]) -> f64 {
    // pairs: (F(r), q)
    match kind {
        QosKind::Throughput => {
            let num: f64 = pairs.iter().map(|&(f, q)| q * f).sum();
            let den: f64 = pairs.iter().map(|&(f, _)| f * f).sum();
            num / den
        }
        QosKind::Latency => {
            let num: f64 = pairs.iter().map(|&(f, q)| q / f).sum();
            let den: f64 = pairs.iter().map(|&(f, _)| 1.0 / (f * f)).sum();
            num / den
        }
    }
}

fn model_sse(kind: QosKind, factors: &BTreeMap<ResourceKind, ImpactFactorParams>, samples: &[QosSample]) -> (f64, f64) {
    let pairs: Vec<(f64, f64)> = samples
        .iter()
        .map(|(r, q)| {
            let f: f64 = factors
                .iter()
                .map(|(&k, p)| p.eval(r.get(k) as f64).unwrap_or(f64::MIN_POSITIVE))
                .product();
            (f, *q)
        })
        .collect();
    let anchor = best_anchor(kind, &pairs);
    let sse = pairs
        .iter()
        .map(|&(f, q)| {
            let pred = match kind {
                QosKind::Throughput => anchor * f,
                QosKind::Latency => anchor / f,
            };
            (q - pred).powi(2)
        })
        .sum();
    (sse, anchor)
}

/// Fits anchor and every slope of a multi-resource model by coordinate descent.
///
/// `bounds` gives `(r_min, r_prof)` per modelled resource. The anchor is solved in closed
/// form inside every slope evaluation. The returned model is renormalized, so its anchor
/// reads as the QoS predicted at the profiled allocation.
pub fn fit_model(
    kind: QosKind,
    bounds: &BTreeMap<ResourceKind, (f64, f64)>,
    samples: &[QosSample],
    sweeps: usize,
) -> Result<QosModel, QosError> {
    if bounds.is_empty() {
        return Err(QosError::InvalidModel("no resources to fit".into()));
    }
    let usable: Vec<QosSample> = samples
        .iter()
        .copied()
        .filter(|(r, q)| *q > 0.0 && bounds.iter().all(|(&k, &(r_min, _))| r.get(k) as f64 > r_min))
        .collect();
    if usable.len() < 2 {
        return Err(QosError::DegenerateSamples);
    }
    let mut factors = BTreeMap::new();
    for (&k, &(r_min, r_prof)) in bounds {
        factors.insert(k, ImpactFactorParams::with_default_alpha(r_min, r_prof)?);
    }
    for _ in 0..sweeps.max(1) {
        for (&k, &(r_min, r_prof)) in bounds {
            let varies = usable.iter().any(|(r, _)| r.get(k) != usable[0].0.get(k));
            if !varies {
                continue;
            }
            let limit = 1.0 / (r_prof - r_min);
            let objective = |alpha: f64| {
                let mut trial = factors.clone();
                match ImpactFactorParams::new(alpha, r_min, r_prof) {
                    Ok(p) => {
                        trial.insert(k, p);
                        model_sse(kind, &trial, &usable).0
                    }
                    Err(_) => f64::INFINITY,
                }
            };
            let (alpha, _) = minimize_scalar(objective, limit * 1e-6, limit * (1.0 - 1e-6), 120);
            factors.insert(k, ImpactFactorParams::new(alpha, r_min, r_prof)?);
        }
    }
    let (_, raw_anchor) = model_sse(kind, &factors, &usable);
    let anchor_factor: f64 = factors.values().map(|p| p.linear_branch(p.r_prof())).product();
    let anchor = match kind {
        QosKind::Throughput => raw_anchor * anchor_factor,
        QosKind::Latency => raw_anchor / anchor_factor,
    };
    QosModel::new(kind, anchor, factors, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn throughput_inversion() {
        let a = calibrate_alpha(100.0, 8.0, 0.0, (4.0, 40.0), QosKind::Throughput).unwrap();
        assert!((a - 0.1).abs() < 1e-15);
    }

    #[test]
    fn latency_inversion_matches_forward_model() {
        let a = calibrate_alpha(100.0, 8.0, 0.0, (4.0, 250.0), QosKind::Latency).unwrap();
        assert!((a - 0.1).abs() < 1e-15);
        let model = single_resource_model(a, 100.0, 0.0, 8.0, QosKind::Latency).unwrap();
        let q = model.predict_qos(&AllocationVector::new(4, 0, 0, 0)).unwrap();
        assert!((q - 250.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_alpha() {
        // implies alpha = 0.2 > 1/8
        let err = calibrate_alpha(100.0, 8.0, 0.0, (4.0, 80.0), QosKind::Throughput).unwrap_err();
        assert!(matches!(err, QosError::CalibrationOutOfRange { .. }));
    }

    #[test]
    fn wrong_side_point_rejected() {
        assert!(calibrate_alpha(100.0, 8.0, 0.0, (4.0, 120.0), QosKind::Throughput).is_err());
        assert!(calibrate_alpha(100.0, 8.0, 0.0, (4.0, 90.0), QosKind::Latency).is_err());
        assert!(calibrate_alpha(100.0, 8.0, 0.0, (9.0, 10.0), QosKind::Throughput).is_err());
    }

    fn forward(alpha: f64, anchor: f64, r_min: f64, r_prof: f64, kind: QosKind, r: f64) -> f64 {
        let f = ImpactFactorParams::new(alpha, r_min, r_prof).unwrap().eval(r).unwrap();
        match kind {
            QosKind::Throughput => anchor * f,
            QosKind::Latency => anchor / f,
        }
    }

    #[test]
    fn least_squares_recovers_noiseless_alpha() {
        for kind in [QosKind::Throughput, QosKind::Latency] {
            let samples: Vec<(f64, f64)> = [2.0, 5.0, 9.0, 12.0, 15.0, 24.0]
                .iter()
                .map(|&r| (r, forward(0.05, 60.0, 1.0, 16.0, kind, r)))
                .collect();
            let a = fit_alpha_least_squares(&samples, 60.0, 1.0, 16.0, kind).unwrap();
            assert!((a - 0.05).abs() < 1e-4, "{kind:?}: {a}");
        }
    }

    #[test]
    fn two_linear_points_match_inversion() {
        let samples = [(3.0, 30.0), (6.0, 60.0)];
        let ls = fit_alpha_least_squares(&samples, 100.0, 0.0, 8.0, QosKind::Throughput).unwrap();
        let exact = calibrate_alpha(100.0, 8.0, 0.0, (3.0, 30.0), QosKind::Throughput).unwrap();
        assert!((ls - exact).abs() < 1e-9, "{ls} vs {exact}");
    }

    #[test]
    fn identical_r_is_degenerate() {
        let err = fit_alpha_least_squares(&[(4.0, 1.0), (4.0, 2.0)], 10.0, 0.0, 8.0, QosKind::Throughput);
        assert_eq!(err.unwrap_err(), QosError::DegenerateSamples);
    }

    #[test]
    fn minimize_scalar_finds_parabola_vertex() {
        let (x, v) = minimize_scalar(|x| (x - 0.3).powi(2) + 1.0, 0.0, 1.0, 10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multi_resource_fit_recovers_generating_model() {
        let mut bounds = BTreeMap::new();
        bounds.insert(ResourceKind::PCore, (1.0, 4.0));
        bounds.insert(ResourceKind::MemoryMib, (2048.0, 6144.0));
        let mut truth = BTreeMap::new();
        truth.insert(ResourceKind::PCore, ImpactFactorParams::new(0.2, 1.0, 4.0).unwrap());
        truth.insert(ResourceKind::MemoryMib, ImpactFactorParams::new(1.0 / 8192.0, 2048.0, 6144.0).unwrap());
        let truth = QosModel::new(QosKind::Latency, 250.0, truth, true).unwrap();
        let mut samples = Vec::new();
        for c in 2..=8 {
            for m in (2176..=12288).step_by(1024) {
                let r = AllocationVector::new(c, 0, m, 0);
                samples.push((r, truth.predict_qos(&r).unwrap()));
            }
        }
        let fitted = fit_model(QosKind::Latency, &bounds, &samples, 6).unwrap();
        for (r, q) in &samples {
            let p = fitted.predict_qos(r).unwrap();
            assert!((p - q).abs() / q < 1e-3, "{r}: {p} vs {q}");
        }
        assert!((fitted.anchor - 250.0).abs() < 0.5, "{}", fitted.anchor);
    }
}
