//! Monte Carlo cross-validation, accuracy scoring, the cross-condition
//! generalization harness and the feature-ablation study.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{self, Normalization};
use crate::flow::TrafficClass;
use crate::ml::{self, ConfusionCounts, Dataset, MlError, ModelSpec};
use crate::traffic::mix_seed;

/// Monte Carlo CV parameters: `repeats` random splits at
/// `train_ratio : validation_ratio`, unstratified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSpec {
    pub repeats: usize,
    pub train_ratio: u32,
    pub validation_ratio: u32,
    pub seed: u64,
}

impl Default for CvSpec {
    fn default() -> Self {
        CvSpec {
            repeats: 200,
            train_ratio: 5,
            validation_ratio: 1,
            seed: 0,
        }
    }
}

impl CvSpec {
    pub fn with_repeats(mut self, repeats: usize) -> CvSpec {
        self.repeats = repeats;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> CvSpec {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.repeats == 0 || self.train_ratio == 0 || self.validation_ratio == 0 {
            return Err(EvalError::BadCvSpec);
        }
        Ok(())
    }
}

/// Box-plot statistics of an accuracy sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyDistribution {
    /// One accuracy value per repeat, in repeat order.
    pub samples: Vec<f64>,
    pub summary: FiveNumber,
}

impl AccuracyDistribution {
    pub fn from_samples(samples: Vec<f64>) -> AccuracyDistribution {
        let pct = |p: f64| features::percentile(&samples, p).expect("non-empty samples");
        let summary = FiveNumber {
            min: pct(0.0),
            q1: pct(25.0),
            median: pct(50.0),
            q3: pct(75.0),
            max: pct(100.0),
        };
        AccuracyDistribution { samples, summary }
    }

    pub fn median(&self) -> f64 {
        self.summary.median
    }
}

/// Which feature sets to delete in the ablation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub feature_subsets_to_delete: Vec<Vec<String>>,
}

impl AblationSpec {
    /// The stock ablation: every non-empty subset of the four essential
    /// features (15 subsets).
    pub fn essential() -> AblationSpec {
        AblationSpec {
            feature_subsets_to_delete: essential_ablation_subsets(),
        }
    }
}

/// The essential feature subset: the two length percentiles plus the two
/// directional packet counts.
pub const ESSENTIAL_FEATURES: [&str; 4] = ["ln_p25", "ln_p50", "n_c2s", "n_s2c"];

/// All 15 non-empty subsets of the essential features, ordered by bitmask.
pub fn essential_ablation_subsets() -> Vec<Vec<String>> {
    let mut subsets = Vec::with_capacity(15);
    for mask in 1u32..16 {
        subsets.push(
            (0..4)
                .filter(|j| mask & (1 << j) != 0)
                .map(|j| ESSENTIAL_FEATURES[j].to_string())
                .collect(),
        );
    }
    subsets
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub deleted: Vec<String>,
    /// Median CV accuracy per model after deletion.
    pub medians: Vec<f64>,
    /// 100 * (baseline - ablated) / baseline, per model.
    pub delta_pct: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub models: Vec<String>,
    pub baseline_medians: Vec<f64>,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, deleted: &[&str]) -> Option<&AblationRow> {
        self.rows.iter().find(|r| {
            r.deleted.len() == deleted.len()
                && r.deleted.iter().all(|d| deleted.contains(&d.as_str()))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossConditionOutcome {
    pub model: String,
    pub normalization: Normalization,
    pub accuracy: f64,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation set is empty")]
    EmptyEvaluation,
    #[error("dataset of {0} samples is too small for a {1}:{2} split")]
    DatasetTooSmall(usize, u32, u32),
    #[error("cv spec fields must be positive")]
    BadCvSpec,
    #[error("train and test datasets disagree: {0}")]
    DatasetMismatch(String),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error("normalization failed: {0}")]
    Feature(#[from] features::FeatureError),
}

/// Accuracy from confusion counts: (tp + tn) / total.
pub fn accuracy(c: &ConfusionCounts) -> Result<f64, EvalError> {
    let total = c.total();
    if total == 0 {
        return Err(EvalError::EmptyEvaluation);
    }
    Ok((c.tp + c.tn) as f64 / total as f64)
}

/// Validation-set size under the ratio: floor of the proportional share, at
/// least 1, leaving at least one training sample.
pub fn validation_count(n: usize, train_ratio: u32, validation_ratio: u32) -> usize {
    let share = n * validation_ratio as usize / (train_ratio + validation_ratio) as usize;
    share.clamp(1, n - 1)
}

/// The deterministic index split for one CV repeat. `(seed, n, ratio,
/// repeat)` fully determine the result.
pub fn cv_split_indices(n: usize, cv: &CvSpec, repeat: usize) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng =
        rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(cv.seed, repeat as u64), 0));
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let n_val = validation_count(n, cv.train_ratio, cv.validation_ratio);
    let validation = indices[..n_val].to_vec();
    let train = indices[n_val..].to_vec();
    (train, validation)
}

/// Repeated random-split evaluation of one model spec. Repeats run in
/// parallel; the sample vector is ordered by repeat index, so results are
/// independent of scheduling.
pub fn monte_carlo_cv(
    data: &Dataset,
    spec: &ModelSpec,
    cv: &CvSpec,
) -> Result<AccuracyDistribution, EvalError> {
    cv.validate()?;
    data.validate().map_err(EvalError::Ml)?;
    let n = data.n_samples();
    let min = (cv.train_ratio + cv.validation_ratio).max(6) as usize;
    if n < min {
        return Err(EvalError::DatasetTooSmall(
            n,
            cv.train_ratio,
            cv.validation_ratio,
        ));
    }

    let samples: Result<Vec<f64>, EvalError> = (0..cv.repeats)
        .into_par_iter()
        .map(|repeat| {
            let (train_idx, val_idx) = cv_split_indices(n, cv, repeat);
            let train_data = data.select_rows(&train_idx);
            let val_data = data.select_rows(&val_idx);
            let model = ml::train(
                spec,
                &train_data,
                mix_seed(mix_seed(cv.seed, repeat as u64), 1),
            )?;
            let counts = ml::confusion(&model, &val_data, TrafficClass::VideoConference)?;
            accuracy(&counts)
        })
        .collect();
    Ok(AccuracyDistribution::from_samples(samples?))
}

/// Trains on the full train-scenario dataset and scores once on the full
/// test-scenario dataset, for every (normalization, model) pair. Rows are
/// normalized per sequence, so no statistics leak between datasets.
pub fn cross_condition_eval(
    train: &Dataset,
    test: &Dataset,
    norms: &[Normalization],
    grid: &[ModelSpec],
    seed: u64,
) -> Result<Vec<CrossConditionOutcome>, EvalError> {
    if train.n_features() != test.n_features() {
        return Err(EvalError::DatasetMismatch(format!(
            "feature counts differ: {} vs {}",
            train.n_features(),
            test.n_features()
        )));
    }
    let mut out = Vec::with_capacity(norms.len() * grid.len());
    for &norm in norms {
        let norm_rows = |ds: &Dataset| -> Result<Dataset, EvalError> {
            let rows: Result<Vec<Vec<f64>>, _> = ds
                .rows
                .iter()
                .map(|r| features::normalize(r, norm))
                .collect();
            let mut normalized = Dataset::new(
                rows?,
                ds.labels.clone(),
                ds.representation,
                ds.feature_names.clone(),
            )
            .map_err(EvalError::Ml)?;
            normalized = normalized.with_normalization(norm);
            Ok(normalized)
        };
        let train_n = norm_rows(train)?;
        let test_n = norm_rows(test)?;
        for (g, spec) in grid.iter().enumerate() {
            let model = ml::train(spec, &train_n, mix_seed(seed, g as u64))?;
            let counts = ml::confusion(&model, &test_n, TrafficClass::VideoConference)?;
            out.push(CrossConditionOutcome {
                model: spec.to_string(),
                normalization: norm,
                accuracy: accuracy(&counts)?,
            });
        }
    }
    Ok(out)
}

/// Relative accuracy loss per (deleted subset, model):
/// 100 * (median_full - median_ablated) / median_full.
pub fn ablation(
    data: &Dataset,
    spec: &AblationSpec,
    models: &[ModelSpec],
    cv: &CvSpec,
) -> Result<AblationTable, EvalError> {
    let baseline: Vec<AccuracyDistribution> = models
        .iter()
        .map(|m| monte_carlo_cv(data, m, cv))
        .collect::<Result<_, _>>()?;
    let baseline_medians: Vec<f64> = baseline.iter().map(|d| d.median()).collect();

    let mut rows = Vec::with_capacity(spec.feature_subsets_to_delete.len());
    for deleted in &spec.feature_subsets_to_delete {
        let reduced = data.drop_features(deleted)?;
        let medians: Vec<f64> = models
            .iter()
            .map(|m| monte_carlo_cv(&reduced, m, cv).map(|d| d.median()))
            .collect::<Result<_, _>>()?;
        let delta_pct: Vec<f64> = medians
            .iter()
            .zip(&baseline_medians)
            .map(|(m, b)| if *b > 0.0 { 100.0 * (b - m) / b } else { 0.0 })
            .collect();
        rows.push(AblationRow {
            deleted: deleted.clone(),
            medians,
            delta_pct,
        });
    }

    Ok(AblationTable {
        models: models.iter().map(|m| m.to_string()).collect(),
        baseline_medians,
        rows,
    })
}
