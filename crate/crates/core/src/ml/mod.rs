//! From-scratch classifiers: K-nearest neighbours, random forest,
//! feed-forward neural network and a support vector classifier.
//!
//! None of the models scale features internally; normalization is an explicit
//! pipeline stage so its effect can be studied in isolation.

pub mod knn;
pub mod neural;
pub mod svc;
pub mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Normalization;
use crate::flow::TrafficClass;

/// Which input representation a dataset holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    #[serde(rename = "raw_series")]
    RawSeries,
    #[serde(rename = "table_features")]
    TableFeatures,
}

/// A labeled sample matrix. Rows and labels always have the same length and
/// contain no NaN or infinite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<TrafficClass>,
    pub representation: Representation,
    pub feature_names: Vec<String>,
    /// Per-sequence normalization already applied to `rows`, if any.
    pub normalization: Option<Normalization>,
}

impl Dataset {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<TrafficClass>,
        representation: Representation,
        feature_names: Vec<String>,
    ) -> Result<Dataset, MlError> {
        let ds = Dataset {
            rows,
            labels,
            representation,
            feature_names,
            normalization: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_normalization(mut self, norm: Normalization) -> Dataset {
        self.normalization = Some(norm);
        self
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self) -> Result<(), MlError> {
        if self.rows.len() != self.labels.len() {
            return Err(MlError::LengthMismatch {
                rows: self.rows.len(),
                labels: self.labels.len(),
            });
        }
        let d = self.n_features();
        for row in &self.rows {
            if row.len() != d {
                return Err(MlError::RaggedRows);
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(MlError::NonFinite);
            }
        }
        if !self.feature_names.is_empty() && self.feature_names.len() != d {
            return Err(MlError::RaggedRows);
        }
        Ok(())
    }

    /// Row subset in the given index order.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            representation: self.representation,
            feature_names: self.feature_names.clone(),
            normalization: self.normalization,
        }
    }

    /// Drops the named feature columns; unknown names are an error.
    pub fn drop_features(&self, names: &[String]) -> Result<Dataset, MlError> {
        for n in names {
            if !self.feature_names.iter().any(|f| f == n) {
                return Err(MlError::UnknownFeature(n.clone()));
            }
        }
        let keep: Vec<usize> = (0..self.n_features())
            .filter(|&j| !names.iter().any(|n| n == &self.feature_names[j]))
            .collect();
        Ok(Dataset {
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
            representation: self.representation,
            feature_names: keep
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            normalization: self.normalization,
        })
    }

    /// Keeps only the named feature columns, in their original order.
    pub fn keep_features(&self, names: &[String]) -> Result<Dataset, MlError> {
        for n in names {
            if !self.feature_names.iter().any(|f| f == n) {
                return Err(MlError::UnknownFeature(n.clone()));
            }
        }
        let keep: Vec<usize> = (0..self.n_features())
            .filter(|&j| names.iter().any(|n| n == &self.feature_names[j]))
            .collect();
        Ok(Dataset {
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
            representation: self.representation,
            feature_names: keep
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            normalization: self.normalization,
        })
    }

    fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// Most frequent label; ties go to the smallest class index.
    pub fn majority_label(&self) -> TrafficClass {
        let counts = self.class_counts();
        if counts[1] > counts[0] {
            TrafficClass::VideoConference
        } else {
            TrafficClass::ProgressiveStreaming
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MlError {
    #[error("dataset has {rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("dataset rows have inconsistent widths")]
    RaggedRows,
    #[error("dataset contains NaN or infinite values")]
    NonFinite,
    #[error("dataset has a single class; at least two are required")]
    DegenerateDataset,
    #[error("dataset has {0} samples; at least {1} are required")]
    DatasetTooSmall(usize, usize),
    #[error("sample has {found} features, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("bad model spec `{0}`: {1}")]
    BadSpec(String, String),
    #[error("model serialization: {0}")]
    Serialization(String),
}

/// RBF kernel width: a fixed value or sklearn-style `scale`
/// (`1 / (n_features * variance_of_all_entries)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gamma {
    #[serde(rename = "scale")]
    Scale,
    #[serde(untagged)]
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "rbf")]
    Rbf { gamma: Gamma },
}

/// Classifier family plus hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Knn {
        k: usize,
    },
    RandomForest {
        n_trees: usize,
        max_depth: usize,
        max_leaves: usize,
        /// Features considered per split; None means floor(sqrt(d)).
        features_per_split: Option<usize>,
        bootstrap: bool,
    },
    NeuralNet {
        hidden_layers: Vec<usize>,
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
    },
    Svc {
        kernel: Kernel,
        c: f64,
        max_iter: usize,
        tol: f64,
    },
}

impl ModelSpec {
    pub fn knn(k: usize) -> ModelSpec {
        ModelSpec::Knn { k }
    }

    pub fn random_forest(n_trees: usize, max_depth: usize, max_leaves: usize) -> ModelSpec {
        ModelSpec::RandomForest {
            n_trees,
            max_depth,
            max_leaves,
            features_per_split: None,
            bootstrap: true,
        }
    }

    pub fn neural_net(
        hidden_layers: Vec<usize>,
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
    ) -> ModelSpec {
        ModelSpec::NeuralNet {
            hidden_layers,
            epochs,
            learning_rate,
            batch_size,
        }
    }

    pub fn svc_rbf(c: f64) -> ModelSpec {
        ModelSpec::Svc {
            kernel: Kernel::Rbf {
                gamma: Gamma::Scale,
            },
            c,
            max_iter: 1000,
            tol: 1e-3,
        }
    }

    pub fn svc_linear(c: f64) -> ModelSpec {
        ModelSpec::Svc {
            kernel: Kernel::Linear,
            c,
            max_iter: 1000,
            tol: 1e-3,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Knn { .. } => "knn",
            ModelSpec::RandomForest { .. } => "rf",
            ModelSpec::NeuralNet { .. } => "nn",
            ModelSpec::Svc { .. } => "svc",
        }
    }

    pub fn validate(&self) -> Result<(), MlError> {
        let bad = |m: &str| Err(MlError::BadSpec(self.to_string(), m.to_string()));
        match self {
            ModelSpec::Knn { k } => {
                if *k == 0 {
                    return bad("k must be >= 1");
                }
            }
            ModelSpec::RandomForest {
                n_trees,
                max_depth,
                max_leaves,
                features_per_split,
                ..
            } => {
                if *n_trees == 0 || *max_depth == 0 || *max_leaves < 2 {
                    return bad("n_trees and max_depth must be >= 1, max_leaves >= 2");
                }
                if features_per_split == &Some(0) {
                    return bad("features_per_split must be >= 1");
                }
            }
            ModelSpec::NeuralNet {
                hidden_layers,
                epochs,
                learning_rate,
                batch_size,
            } => {
                if hidden_layers.iter().any(|&h| h == 0) || *epochs == 0 || *batch_size == 0 {
                    return bad("layer sizes, epochs and batch_size must be >= 1");
                }
                if !(*learning_rate > 0.0) {
                    return bad("learning_rate must be > 0");
                }
            }
            ModelSpec::Svc {
                c,
                max_iter,
                tol,
                kernel,
            } => {
                if !(*c > 0.0) || !(*tol > 0.0) || *max_iter == 0 {
                    return bad("c, tol must be > 0 and max_iter >= 1");
                }
                if let Kernel::Rbf {
                    gamma: Gamma::Fixed(g),
                } = kernel
                {
                    if !(*g > 0.0) {
                        return bad("gamma must be > 0");
                    }
                }
            }
        }
        Ok(())
    }

    /// Parses the compact CLI syntax, e.g. `knn:k=3`,
    /// `rf:trees=50,depth=12,leaves=256`, `nn:layers=32-16,epochs=200,lr=0.05,batch=16`,
    /// `svc:kernel=rbf,c=10,gamma=scale`.
    pub fn parse(text: &str) -> Result<ModelSpec, MlError> {
        let err = |m: String| MlError::BadSpec(text.to_string(), m);
        let (family, rest) = match text.split_once(':') {
            Some((f, r)) => (f.trim(), r.trim()),
            None => (text.trim(), ""),
        };
        let mut kv = std::collections::BTreeMap::new();
        if !rest.is_empty() {
            for part in rest.split(',') {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected key=value, got `{part}`")))?;
                kv.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let take = |kv: &mut std::collections::BTreeMap<String, String>, key: &str| kv.remove(key);
        let parse_usize = |v: &str, key: &str| {
            v.parse::<usize>()
                .map_err(|_| err(format!("bad {key} `{v}`")))
        };
        let parse_f64 = |v: &str, key: &str| {
            v.parse::<f64>()
                .map_err(|_| err(format!("bad {key} `{v}`")))
        };

        let spec = match family {
            "knn" => {
                let k = match take(&mut kv, "k") {
                    Some(v) => parse_usize(&v, "k")?,
                    None => 5,
                };
                ModelSpec::Knn { k }
            }
            "rf" => {
                let n_trees = match take(&mut kv, "trees") {
                    Some(v) => parse_usize(&v, "trees")?,
                    None => 50,
                };
                let max_depth = match take(&mut kv, "depth") {
                    Some(v) => parse_usize(&v, "depth")?,
                    None => 16,
                };
                let max_leaves = match take(&mut kv, "leaves") {
                    Some(v) => parse_usize(&v, "leaves")?,
                    None => 256,
                };
                let features_per_split = match take(&mut kv, "features") {
                    Some(v) => Some(parse_usize(&v, "features")?),
                    None => None,
                };
                let bootstrap = match take(&mut kv, "bootstrap") {
                    Some(v) => v
                        .parse::<bool>()
                        .map_err(|_| err(format!("bad bootstrap `{v}`")))?,
                    None => true,
                };
                ModelSpec::RandomForest {
                    n_trees,
                    max_depth,
                    max_leaves,
                    features_per_split,
                    bootstrap,
                }
            }
            "nn" => {
                let hidden_layers = match take(&mut kv, "layers") {
                    Some(v) => v
                        .split('-')
                        .map(|s| parse_usize(s, "layers"))
                        .collect::<Result<Vec<_>, _>>()?,
                    None => vec![32, 16],
                };
                let epochs = match take(&mut kv, "epochs") {
                    Some(v) => parse_usize(&v, "epochs")?,
                    None => 200,
                };
                let learning_rate = match take(&mut kv, "lr") {
                    Some(v) => parse_f64(&v, "lr")?,
                    None => 0.05,
                };
                let batch_size = match take(&mut kv, "batch") {
                    Some(v) => parse_usize(&v, "batch")?,
                    None => 16,
                };
                ModelSpec::NeuralNet {
                    hidden_layers,
                    epochs,
                    learning_rate,
                    batch_size,
                }
            }
            "svc" => {
                let c = match take(&mut kv, "c") {
                    Some(v) => parse_f64(&v, "c")?,
                    None => 1.0,
                };
                let tol = match take(&mut kv, "tol") {
                    Some(v) => parse_f64(&v, "tol")?,
                    None => 1e-3,
                };
                let max_iter = match take(&mut kv, "iters") {
                    Some(v) => parse_usize(&v, "iters")?,
                    None => 1000,
                };
                let kernel_name = take(&mut kv, "kernel").unwrap_or_else(|| "rbf".to_string());
                let kernel = match kernel_name.as_str() {
                    "linear" => Kernel::Linear,
                    "rbf" => {
                        let gamma = match take(&mut kv, "gamma") {
                            None => Gamma::Scale,
                            Some(v) if v == "scale" => Gamma::Scale,
                            Some(v) => Gamma::Fixed(parse_f64(&v, "gamma")?),
                        };
                        Kernel::Rbf { gamma }
                    }
                    other => return Err(err(format!("unknown kernel `{other}`"))),
                };
                ModelSpec::Svc {
                    kernel,
                    c,
                    max_iter,
                    tol,
                }
            }
            other => return Err(err(format!("unknown model family `{other}`"))),
        };
        if let Some(key) = kv.keys().next() {
            return Err(err(format!("unknown parameter `{key}` for {family}")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelSpec::Knn { k } => write!(f, "knn:k={k}"),
            ModelSpec::RandomForest {
                n_trees,
                max_depth,
                max_leaves,
                features_per_split,
                bootstrap,
            } => {
                write!(
                    f,
                    "rf:trees={n_trees},depth={max_depth},leaves={max_leaves}"
                )?;
                if let Some(m) = features_per_split {
                    write!(f, ",features={m}")?;
                }
                if !bootstrap {
                    write!(f, ",bootstrap=false")?;
                }
                Ok(())
            }
            ModelSpec::NeuralNet {
                hidden_layers,
                epochs,
                learning_rate,
                batch_size,
            } => {
                let layers: Vec<String> = hidden_layers.iter().map(|h| h.to_string()).collect();
                write!(
                    f,
                    "nn:layers={},epochs={epochs},lr={learning_rate},batch={batch_size}",
                    layers.join("-")
                )
            }
            ModelSpec::Svc {
                kernel,
                c,
                max_iter,
                tol,
            } => {
                match kernel {
                    Kernel::Linear => write!(f, "svc:kernel=linear,c={c}")?,
                    Kernel::Rbf { gamma } => {
                        write!(f, "svc:kernel=rbf,c={c}")?;
                        match gamma {
                            Gamma::Scale => write!(f, ",gamma=scale")?,
                            Gamma::Fixed(g) => write!(f, ",gamma={g}")?,
                        }
                    }
                }
                write!(f, ",tol={tol},iters={max_iter}")
            }
        }
    }
}

/// Training provenance kept with every fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub input_dim: usize,
    pub representation: Representation,
    pub normalization: Option<Normalization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) enum ModelParams {
    /// Degenerate zero-feature case: always predict the training majority.
    Majority {
        label: TrafficClass,
    },
    Knn(knn::KnnModel),
    Forest(tree::ForestModel),
    Neural(neural::NeuralModel),
    Svc(svc::SvcModel),
}

/// A fitted predictor. Prediction is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub meta: TrainMeta,
    pub(crate) params: ModelParams,
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: TrainedModel,
}

impl TrainedModel {
    pub fn predict(&self, sample: &[f64]) -> Result<TrafficClass, MlError> {
        if sample.len() != self.meta.input_dim {
            return Err(MlError::DimensionMismatch {
                expected: self.meta.input_dim,
                found: sample.len(),
            });
        }
        let idx = match &self.params {
            ModelParams::Majority { label } => return Ok(*label),
            ModelParams::Knn(m) => m.predict(sample),
            ModelParams::Forest(m) => m.predict(sample),
            ModelParams::Neural(m) => m.predict(sample),
            ModelParams::Svc(m) => m.predict(sample),
        };
        Ok(TrafficClass::from_index(idx).expect("binary class index"))
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<TrafficClass>, MlError> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    /// Version-tagged JSON serialization.
    pub fn to_json(&self) -> Result<String, MlError> {
        serde_json::to_string_pretty(&ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })
        .map_err(|e| MlError::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<TrainedModel, MlError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| MlError::Serialization(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(MlError::Serialization(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        Ok(file.model)
    }
}

/// Fits a model. All stochastic choices derive from `seed`; identical
/// (spec, data, seed) produce identical models.
pub fn train(spec: &ModelSpec, data: &Dataset, seed: u64) -> Result<TrainedModel, MlError> {
    spec.validate()?;
    data.validate()?;
    if data.n_samples() < 4 {
        return Err(MlError::DatasetTooSmall(data.n_samples(), 4));
    }
    let counts = data.class_counts();
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(MlError::DegenerateDataset);
    }

    let meta = TrainMeta {
        seed,
        epochs_run: 0,
        input_dim: data.n_features(),
        representation: data.representation,
        normalization: data.normalization,
    };

    if data.n_features() == 0 {
        return Ok(TrainedModel {
            spec: spec.clone(),
            meta,
            params: ModelParams::Majority {
                label: data.majority_label(),
            },
        });
    }

    let labels_idx: Vec<u8> = data.labels.iter().map(|l| l.index() as u8).collect();
    let (params, epochs_run) = match spec {
        ModelSpec::Knn { k } => (
            ModelParams::Knn(knn::KnnModel::fit(*k, data.rows.clone(), labels_idx)),
            0,
        ),
        ModelSpec::RandomForest {
            n_trees,
            max_depth,
            max_leaves,
            features_per_split,
            bootstrap,
        } => (
            ModelParams::Forest(tree::ForestModel::fit(
                &data.rows,
                &labels_idx,
                tree::ForestParams {
                    n_trees: *n_trees,
                    max_depth: *max_depth,
                    max_leaves: *max_leaves,
                    features_per_split: *features_per_split,
                    bootstrap: *bootstrap,
                },
                seed,
            )),
            0,
        ),
        ModelSpec::NeuralNet {
            hidden_layers,
            epochs,
            learning_rate,
            batch_size,
        } => {
            let model = neural::NeuralModel::fit(
                &data.rows,
                &labels_idx,
                hidden_layers,
                *epochs,
                *learning_rate,
                *batch_size,
                seed,
            );
            (ModelParams::Neural(model), *epochs)
        }
        ModelSpec::Svc {
            kernel,
            c,
            max_iter,
            tol,
        } => (
            ModelParams::Svc(svc::SvcModel::fit(
                &data.rows,
                &labels_idx,
                *kernel,
                *c,
                *max_iter,
                *tol,
            )),
            0,
        ),
    };

    Ok(TrainedModel {
        spec: spec.clone(),
        meta: TrainMeta { epochs_run, ..meta },
        params,
    })
}

/// Confusion counts with a designated positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub positive: TrafficClass,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Tallies predictions on a labeled dataset against its labels.
pub fn confusion(
    model: &TrainedModel,
    eval_data: &Dataset,
    positive: TrafficClass,
) -> Result<ConfusionCounts, MlError> {
    eval_data.validate()?;
    let mut counts = ConfusionCounts {
        tp: 0,
        tn: 0,
        fp: 0,
        fn_: 0,
        positive,
    };
    for (row, label) in eval_data.rows.iter().zip(&eval_data.labels) {
        let predicted = model.predict(row)?;
        match (predicted == positive, *label == positive) {
            (true, true) => counts.tp += 1,
            (true, false) => counts.fp += 1,
            (false, true) => counts.fn_ += 1,
            (false, false) => counts.tn += 1,
        }
    }
    Ok(counts)
}
