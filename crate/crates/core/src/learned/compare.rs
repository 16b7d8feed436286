//! Train/eval error of the parametric model against the MLP on identical random splits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::mlp::{train_mlp, MlpConfig, MlpModel, TrainHistory};
use super::LearnedError;
use crate::board::{default_quanta, Quanta};
use crate::profiling::{class_of_workload, reference_board, DatasetRecord, ProfileVector};
use crate::qos::{factor_bounds, fit_model, QosKind, QosModel};
use crate::types::{AllocationVector, ResourceKind, WorkloadClass};

pub const MIN_RECORDS: usize = 30;

/// Model inputs of one observation: allocation, profile features, one-hot class.
pub fn record_features(r: &AllocationVector, p: &ProfileVector, class: Option<WorkloadClass>) -> Vec<f64> {
    let mut v: Vec<f64> = r.to_array().iter().map(|&x| x as f64).collect();
    v.extend(p.features());
    v.extend(WorkloadClass::ALL.iter().map(|&c| if Some(c) == class { 1.0 } else { 0.0 }));
    v
}

pub fn features_of(rec: &DatasetRecord) -> Vec<f64> {
    record_features(&rec.r, &rec.p, class_of_workload(&rec.workload_id))
}

/// Shuffled 70/15/15 train/validation/test index split.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (n as f64 * 0.7).round() as usize;
    let n_val = (n as f64 * 0.15).round() as usize;
    let test = idx.split_off((n_train + n_val).min(n));
    let val = idx.split_off(n_train.min(idx.len()));
    (idx, val, test)
}

fn xy<'a>(records: impl Iterator<Item = &'a DatasetRecord>) -> (Vec<Vec<f64>>, Vec<f64>) {
    records.map(|r| (features_of(r), r.qos_value)).unzip()
}

/// Fits an MLP on the train part of a seeded split, early-stopping on the validation part.
pub fn mlp_fit(
    records: &[DatasetRecord],
    split_seed: u64,
    config: &MlpConfig,
) -> Result<(MlpModel, TrainHistory), LearnedError> {
    if records.len() < MIN_RECORDS {
        return Err(LearnedError::TooFewRecords {
            have: records.len(),
            need: MIN_RECORDS,
        });
    }
    let (train, val, _) = split_indices(records.len(), split_seed);
    let (xt, yt) = xy(train.iter().map(|&i| &records[i]));
    let (xv, yv) = xy(val.iter().map(|&i| &records[i]));
    train_mlp(&xt, &yt, &xv, &yv, config)
}

/// Prediction for one allocation and profile.
pub fn mlp_predict(
    model: &MlpModel,
    r: &AllocationVector,
    p: &ProfileVector,
    class: Option<WorkloadClass>,
) -> Result<f64, LearnedError> {
    model.predict(&record_features(r, p, class))
}

/// Per-workload parametric models fitted on `train`.
pub fn fit_parametric(
    train: &[&DatasetRecord],
    quanta: &Quanta,
    sweeps: usize,
) -> Result<BTreeMap<String, QosModel>, LearnedError> {
    let mut groups: BTreeMap<&str, Vec<&DatasetRecord>> = BTreeMap::new();
    for r in train {
        groups.entry(r.workload_id.as_str()).or_default().push(r);
    }
    let mut out = BTreeMap::new();
    for (id, recs) in groups {
        let kind = recs[0].qos_kind;
        let profile = &recs[0].p;
        let bounds: BTreeMap<ResourceKind, (f64, f64)> = ResourceKind::ALL
            .into_iter()
            .filter_map(|k| factor_bounds(profile, quanta, k).map(|b| (k, b)))
            .collect();
        let samples: Vec<(AllocationVector, f64)> = recs.iter().map(|r| (r.r, r.qos_value)).collect();
        let model = match fit_model(kind, &bounds, &samples, sweeps) {
            Ok(m) => m,
            Err(_) => {
                // too little spread to fit slopes: keep default slopes, anchor at the mean
                let mean = samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64;
                QosModel::from_profile(kind, mean, profile, quanta, &BTreeMap::new())
                    .map_err(|e| LearnedError::Fit(e.to_string()))?
            }
        };
        out.insert(id.to_string(), model);
    }
    Ok(out)
}

fn parametric_mse(models: &BTreeMap<String, QosModel>, recs: &[&DatasetRecord]) -> f64 {
    let n = recs.len().max(1) as f64;
    recs.iter()
        .map(|r| {
            let q = models
                .get(&r.workload_id)
                .and_then(|m| m.predict_qos(&r.r).ok().or(Some(m.anchor)))
                .unwrap_or(0.0);
            (q - r.qos_value).powi(2)
        })
        .sum::<f64>()
        / n
}

fn mlp_mse(model: &MlpModel, recs: &[&DatasetRecord]) -> Result<f64, LearnedError> {
    let n = recs.len().max(1) as f64;
    let mut s = 0.0;
    for r in recs {
        s += (model.predict(&features_of(r))? - r.qos_value).powi(2);
    }
    Ok(s / n)
}

/// Mean, sample standard deviation and 95 % t-interval half-width of repeated measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseStat {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub ci95: f64,
}

impl MseStat {
    pub fn of(values: Vec<f64>) -> MseStat {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let ci95 = if n > 1 {
            let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
                .map(|d| d.inverse_cdf(0.975))
                .unwrap_or(f64::NAN);
            t * std / (n as f64).sqrt()
        } else {
            0.0
        };
        MseStat { values, mean, std, ci95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub train: MseStat,
    pub eval: MseStat,
}

impl TargetReport {
    /// Relative growth of error from train to eval.
    pub fn gap_ratio(&self) -> f64 {
        (self.eval.mean - self.train.mean) / self.train.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub latency: TargetReport,
    pub throughput: TargetReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub splits: usize,
    pub parametric: ModelReport,
    pub mlp: ModelReport,
}

impl ComparisonReport {
    /// One row per model, train/eval columns for latency then throughput (split means).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,latency_train,latency_eval,throughput_train,throughput_eval\n");
        for (name, m) in [("parametric", &self.parametric), ("mlp", &self.mlp)] {
            s.push_str(&format!(
                "{name},{:.4},{:.4},{:.4},{:.4}\n",
                m.latency.train.mean, m.latency.eval.mean, m.throughput.train.mean, m.throughput.eval.mean
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub splits: usize,
    pub seed: u64,
    pub mlp: MlpConfig,
    /// Coordinate-descent sweeps of the parametric fit.
    pub sweeps: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            splits: 5,
            seed: 0,
            mlp: MlpConfig::default(),
            sweeps: 3,
        }
    }
}

/// Runs both model families on `splits` seeded 70/15/15 splits. Each target kind gets its
/// own MLP; the parametric side fits one model per workload. Eval error is measured on the
/// test part; the validation part only drives early stopping.
pub fn compare_models(records: &[DatasetRecord], opts: &CompareOptions) -> Result<ComparisonReport, LearnedError> {
    if records.len() < MIN_RECORDS {
        return Err(LearnedError::TooFewRecords {
            have: records.len(),
            need: MIN_RECORDS,
        });
    }
    let quanta = default_quanta(&reference_board());
    // [model][target][train/eval] -> per split values
    let mut cells = vec![vec![vec![Vec::new(); 2]; 2]; 2];
    for s in 0..opts.splits.max(1) {
        let split_seed = opts.seed.wrapping_add(s as u64);
        let (train, val, test) = split_indices(records.len(), split_seed);
        let pick = |idx: &[usize], kind: QosKind| -> Vec<&DatasetRecord> {
            idx.iter().map(|&i| &records[i]).filter(|r| r.qos_kind == kind).collect()
        };
        for (t, kind) in [QosKind::Latency, QosKind::Throughput].into_iter().enumerate() {
            let (tr, va, te) = (pick(&train, kind), pick(&val, kind), pick(&test, kind));
            if tr.is_empty() || te.is_empty() {
                return Err(LearnedError::TooFewRecords { have: tr.len(), need: 1 });
            }
            let models = fit_parametric(&tr, &quanta, opts.sweeps)?;
            cells[0][t][0].push(parametric_mse(&models, &tr));
            cells[0][t][1].push(parametric_mse(&models, &te));

            let (xt, yt) = xy(tr.iter().copied());
            let (xv, yv) = xy(va.iter().copied());
            let cfg = MlpConfig {
                seed: opts.mlp.seed.wrapping_add(split_seed),
                ..opts.mlp.clone()
            };
            let (mlp, _) = train_mlp(&xt, &yt, &xv, &yv, &cfg)?;
            cells[1][t][0].push(mlp_mse(&mlp, &tr)?);
            cells[1][t][1].push(mlp_mse(&mlp, &te)?);
        }
    }
    let report = |m: usize| {
        let target = |t: usize| TargetReport {
            train: MseStat::of(cells[m][t][0].clone()),
            eval: MseStat::of(cells[m][t][1].clone()),
        };
        ModelReport {
            latency: target(0),
            throughput: target(1),
        }
    };
    Ok(ComparisonReport {
        splits: opts.splits.max(1),
        parametric: report(0),
        mlp: report(1),
    })
}
