//! Empirical (plug-in) information measures over discretized features:
//! Shannon entropy, mutual information, conditional entropy, greedy mRMR
//! feature ranking and exhaustive subset analysis.
//!
//! All estimators are plain plug-in frequencies with no bias correction, so
//! algebraic identities such as I(X,Y) + H(X|Y) = H(X) hold exactly on the
//! empirical distributions.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ml::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinStrategy {
    #[serde(rename = "equal_frequency")]
    EqualFrequency,
    #[serde(rename = "equal_width")]
    EqualWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub strategy: BinStrategy,
    pub bins: usize,
}

impl Default for Binning {
    fn default() -> Self {
        Binning {
            strategy: BinStrategy::EqualFrequency,
            bins: 10,
        }
    }
}

/// Feature columns as bin indices plus (already discrete) class labels.
#[derive(Debug, Clone)]
pub struct DiscretizedDataset {
    pub columns: Vec<Vec<u16>>,
    pub labels: Vec<u16>,
    pub feature_names: Vec<String>,
    pub binning: Binning,
    /// Features whose column was constant (single bin, flagged not fatal).
    pub degenerate_features: Vec<String>,
}

impl DiscretizedDataset {
    /// Discretizes every feature column of a dataset.
    pub fn from_dataset(data: &Dataset, binning: Binning) -> Result<DiscretizedDataset, InfoError> {
        if binning.bins < 1 || binning.bins > u16::MAX as usize {
            return Err(InfoError::BadBinning(binning.bins));
        }
        let n = data.n_samples();
        let d = data.n_features();
        let mut columns = Vec::with_capacity(d);
        let mut degenerate_features = Vec::new();
        for j in 0..d {
            let col: Vec<f64> = data.rows.iter().map(|r| r[j]).collect();
            let out = discretize(&col, binning)?;
            if out.degenerate {
                degenerate_features.push(
                    data.feature_names
                        .get(j)
                        .cloned()
                        .unwrap_or_else(|| format!("f{j}")),
                );
            }
            columns.push(out.bins);
        }
        let labels: Vec<u16> = data.labels.iter().map(|l| l.index() as u16).collect();
        let feature_names = if data.feature_names.is_empty() {
            (0..d).map(|j| format!("f{j}")).collect()
        } else {
            data.feature_names.clone()
        };
        let _ = n;
        Ok(DiscretizedDataset {
            columns,
            labels,
            feature_names,
            binning,
            degenerate_features,
        })
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

/// Mutual information and conditional entropy for one feature subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiResult {
    pub features: Vec<String>,
    pub i_bits: f64,
    pub h_cond_bits: f64,
}

/// mRMR output: features sorted by normalized weight, descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrmrRanking {
    pub entries: Vec<MrmrEntry>,
    /// Greedy selection order (not necessarily the weight order).
    pub selection_order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrmrEntry {
    pub feature: String,
    pub weight: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum InfoError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("bin count {0} is out of range")]
    BadBinning(usize),
    #[error("column contains non-finite values")]
    NonFinite,
    #[error("{0} features exceed the subset-enumeration guard ({1})")]
    TooManyFeatures(usize, usize),
    #[error("requested top {0} features but only {1} exist")]
    NotEnoughFeatures(usize, usize),
}

/// Shannon entropy of an empirical distribution, in bits. `0 log 0 := 0`.
pub fn entropy(symbols: &[u16]) -> Result<f64, InfoError> {
    if symbols.is_empty() {
        return Err(InfoError::EmptyInput);
    }
    // ordered map: summation order must not depend on hash seeds, so results
    // are bit-identical across runs
    let mut counts: BTreeMap<u16, usize> = BTreeMap::new();
    for &s in symbols {
        *counts.entry(s).or_insert(0) += 1;
    }
    let n = symbols.len() as f64;
    Ok(counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum())
}

fn joint_symbols(columns: &[&[u16]]) -> Result<Vec<u64>, InfoError> {
    let n = columns.first().map_or(0, |c| c.len());
    for c in columns {
        if c.len() != n {
            return Err(InfoError::LengthMismatch(c.len(), n));
        }
    }
    if columns.len() == 1 {
        return Ok(columns[0].iter().map(|&v| v as u64).collect());
    }
    // intern tuples into dense ids; ids stay < n so later pairings with a
    // 16-bit shift cannot overflow
    let mut intern: HashMap<Vec<u16>, u64> = HashMap::new();
    Ok((0..n)
        .map(|i| {
            let tuple: Vec<u16> = columns.iter().map(|c| c[i]).collect();
            let next = intern.len() as u64;
            *intern.entry(tuple).or_insert(next)
        })
        .collect())
}

fn entropy_u64(symbols: &[u64]) -> f64 {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for &s in symbols {
        *counts.entry(s).or_insert(0) += 1;
    }
    let n = symbols.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// I(X;Y) over the empirical joint of one discrete column and the labels.
pub fn mutual_information(x: &[u16], y: &[u16]) -> Result<f64, InfoError> {
    mutual_information_joint(&[x], y)
}

/// I(S;Y) where S is the joint (tuple) of several columns.
pub fn mutual_information_joint(columns: &[&[u16]], y: &[u16]) -> Result<f64, InfoError> {
    if columns.is_empty() || y.is_empty() {
        return Err(InfoError::EmptyInput);
    }
    if columns[0].len() != y.len() {
        return Err(InfoError::LengthMismatch(columns[0].len(), y.len()));
    }
    let xs = joint_symbols(columns)?;
    let n = y.len() as f64;

    let mut joint: BTreeMap<(u64, u16), usize> = BTreeMap::new();
    let mut px: BTreeMap<u64, usize> = BTreeMap::new();
    let mut py: BTreeMap<u16, usize> = BTreeMap::new();
    for (&xv, &yv) in xs.iter().zip(y) {
        *joint.entry((xv, yv)).or_insert(0) += 1;
        *px.entry(xv).or_insert(0) += 1;
        *py.entry(yv).or_insert(0) += 1;
    }
    let mut i = 0.0;
    for (&(xv, yv), &c) in &joint {
        let pxy = c as f64 / n;
        let p_x = px[&xv] as f64 / n;
        let p_y = py[&yv] as f64 / n;
        i += pxy * (pxy / (p_x * p_y)).log2();
    }
    Ok(i)
}

/// H(X|Y) computed as H(X,Y) - H(Y) on empirical distributions.
pub fn conditional_entropy(x: &[u16], y_columns: &[&[u16]]) -> Result<f64, InfoError> {
    if x.is_empty() || y_columns.is_empty() {
        return Err(InfoError::EmptyInput);
    }
    if y_columns[0].len() != x.len() {
        return Err(InfoError::LengthMismatch(y_columns[0].len(), x.len()));
    }
    let ys = joint_symbols(y_columns)?;
    let xy: Vec<u64> = x
        .iter()
        .zip(&ys)
        .map(|(&xv, &yv)| (yv << 16) | xv as u64)
        .collect();
    Ok(entropy_u64(&xy) - entropy_u64(&ys))
}

/// Result of discretizing one column.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizeOutcome {
    pub bins: Vec<u16>,
    /// All input values were equal: everything landed in bin 0.
    pub degenerate: bool,
}

/// Bins a feature column. Equal-frequency boundaries sit at empirical
/// quantiles with ties assigned to the lower bin; equal-width bins span
/// [min, max].
pub fn discretize(column: &[f64], binning: Binning) -> Result<DiscretizeOutcome, InfoError> {
    if column.is_empty() {
        return Err(InfoError::EmptyInput);
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(InfoError::NonFinite);
    }
    if binning.bins < 1 || binning.bins > u16::MAX as usize {
        return Err(InfoError::BadBinning(binning.bins));
    }
    let min = column.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(DiscretizeOutcome {
            bins: vec![0; column.len()],
            degenerate: true,
        });
    }
    let bins = match binning.strategy {
        BinStrategy::EqualFrequency => {
            let mut sorted = column.to_vec();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let boundaries: Vec<f64> = (1..binning.bins)
                .map(|j| {
                    crate::features::percentile_sorted(
                        &sorted,
                        100.0 * j as f64 / binning.bins as f64,
                    )
                })
                .collect();
            column
                .iter()
                .map(|&v| boundaries.iter().filter(|&&b| b < v).count() as u16)
                .collect()
        }
        BinStrategy::EqualWidth => {
            let width = (max - min) / binning.bins as f64;
            column
                .iter()
                .map(|&v| {
                    let idx = ((v - min) / width) as usize;
                    idx.min(binning.bins - 1) as u16
                })
                .collect()
        }
    };
    Ok(DiscretizeOutcome {
        bins,
        degenerate: false,
    })
}

/// Greedy mRMR ranking with the MID (difference) criterion: the first pick
/// maximizes I(f; Cl); later picks maximize
/// I(f; Cl) - mean over selected s of I(f; s). Raw selection scores are
/// shifted by the minimum (when negative) and normalized to sum to one.
/// Ties break toward the lower feature index.
pub fn mrmr_rank(data: &DiscretizedDataset, top_i: usize) -> Result<MrmrRanking, InfoError> {
    let d = data.n_features();
    if top_i > d {
        return Err(InfoError::NotEnoughFeatures(top_i, d));
    }
    if top_i == 0 {
        return Ok(MrmrRanking {
            entries: Vec::new(),
            selection_order: Vec::new(),
        });
    }

    let relevance: Vec<f64> = data
        .columns
        .iter()
        .map(|col| mutual_information(col, &data.labels))
        .collect::<Result<_, _>>()?;

    let mut selected: Vec<usize> = Vec::with_capacity(top_i);
    let mut scores: Vec<f64> = Vec::with_capacity(top_i);
    let mut redundancy_sum = vec![0.0f64; d];
    let mut remaining: Vec<usize> = (0..d).collect();

    while selected.len() < top_i {
        let mut best: Option<(f64, usize)> = None;
        for &f in &remaining {
            let score = if selected.is_empty() {
                relevance[f]
            } else {
                relevance[f] - redundancy_sum[f] / selected.len() as f64
            };
            let better = match best {
                None => true,
                Some((bs, bf)) => score > bs || (score == bs && f < bf),
            };
            if better {
                best = Some((score, f));
            }
        }
        let (score, pick) = best.expect("remaining non-empty");
        selected.push(pick);
        scores.push(score);
        remaining.retain(|&f| f != pick);
        for &f in &remaining {
            redundancy_sum[f] += mutual_information(&data.columns[f], &data.columns[pick])?;
        }
    }

    // shift negative scores to zero, then normalize to sum 1
    let min_score = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = if min_score < 0.0 { -min_score } else { 0.0 };
    let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
    let total: f64 = shifted.iter().sum();
    let weights: Vec<f64> = if total > 0.0 {
        shifted.iter().map(|s| s / total).collect()
    } else {
        vec![1.0 / shifted.len() as f64; shifted.len()]
    };

    let selection_order: Vec<String> = selected
        .iter()
        .map(|&f| data.feature_names[f].clone())
        .collect();
    let mut entries: Vec<(usize, MrmrEntry)> = selected
        .iter()
        .zip(&weights)
        .map(|(&f, &w)| {
            (
                f,
                MrmrEntry {
                    feature: data.feature_names[f].clone(),
                    weight: w,
                },
            )
        })
        .collect();
    entries.sort_by(|(fa, a), (fb, b)| b.weight.total_cmp(&a.weight).then(fa.cmp(fb)));

    Ok(MrmrRanking {
        entries: entries.into_iter().map(|(_, e)| e).collect(),
        selection_order,
    })
}

pub const SUBSET_GUARD_DEFAULT: usize = 15;

/// I(Cl, S) and H(Cl|S) for every non-empty feature subset S, sorted by
/// mutual information descending. Guarded by `max_features` (2^d subsets).
pub fn subset_analysis(
    data: &DiscretizedDataset,
    max_features: usize,
) -> Result<Vec<MiResult>, InfoError> {
    let d = data.n_features();
    if d > max_features {
        return Err(InfoError::TooManyFeatures(d, max_features));
    }
    if d == 0 {
        return Ok(Vec::new());
    }
    let n_subsets: u32 = (1u32 << d) - 1;
    let mut results: Vec<MiResult> = (1..=n_subsets)
        .into_par_iter()
        .map(|mask| {
            let cols: Vec<&[u16]> = (0..d)
                .filter(|j| mask & (1 << j) != 0)
                .map(|j| data.columns[j].as_slice())
                .collect();
            let i_bits = mutual_information_joint(&cols, &data.labels).expect("validated inputs");
            let h_cond_bits = conditional_entropy(&data.labels, &cols).expect("validated inputs");
            let features: Vec<String> = (0..d)
                .filter(|j| mask & (1 << j) != 0)
                .map(|j| data.feature_names[j].clone())
                .collect();
            MiResult {
                features,
                i_bits,
                h_cond_bits,
            }
        })
        .collect();
    results.sort_by(|a, b| {
        b.i_bits
            .total_cmp(&a.i_bits)
            .then_with(|| a.features.len().cmp(&b.features.len()))
            .then_with(|| a.features.cmp(&b.features))
    });
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_of_balanced_binary_is_one_bit() {
        let labels: Vec<u16> = (0..50).map(|i| (i % 2) as u16).collect();
        assert!((entropy(&labels).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn entropy_of_single_class_is_zero() {
        assert_eq!(entropy(&[3; 40]).unwrap(), 0.0);
        assert_eq!(entropy(&[]), Err(InfoError::EmptyInput));
    }

    #[test]
    fn entropy_quarter_split() {
        // 25/75 split: -(0.25 log2 0.25 + 0.75 log2 0.75) = 0.811278...
        let labels: Vec<u16> = (0..100).map(|i| u16::from(i % 4 != 0)).collect();
        let direct = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
        assert!((entropy(&labels).unwrap() - direct).abs() < 1e-12);
        assert!((entropy(&labels).unwrap() - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn mi_of_identical_balanced_columns_is_one_bit() {
        let x: Vec<u16> = (0..60).map(|i| (i % 2) as u16).collect();
        assert!((mutual_information(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mi_of_product_design_is_zero() {
        // all four (x, y) cells equally frequent -> exact independence
        let x: Vec<u16> = (0..40).map(|i| (i % 2) as u16).collect();
        let y: Vec<u16> = (0..40).map(|i| ((i / 2) % 2) as u16).collect();
        assert!(mutual_information(&x, &y).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mi_matches_brute_force_over_cells() {
        // joint counts {(0,0):4,(0,1):1,(1,0):1,(1,1):4}
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (xv, yv, c) in [(0u16, 0u16, 4), (0, 1, 1), (1, 0, 1), (1, 1, 4)] {
            for _ in 0..c {
                x.push(xv);
                y.push(yv);
            }
        }
        // direct summation over the four cells
        let n = 10.0;
        let p = |c: f64| c / n;
        let mut expected = 0.0;
        for (pxy, px, py) in [
            (p(4.0), p(5.0), p(5.0)),
            (p(1.0), p(5.0), p(5.0)),
            (p(1.0), p(5.0), p(5.0)),
            (p(4.0), p(5.0), p(5.0)),
        ] {
            expected += pxy * (pxy / (px * py)).log2();
        }
        assert!((mutual_information(&x, &y).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn conditional_entropy_limits() {
        let x: Vec<u16> = (0..30).map(|i| (i % 2) as u16).collect();
        assert!(conditional_entropy(&x, &[&x]).unwrap().abs() < 1e-12);
        let indep: Vec<u16> = (0..30).map(|i| ((i / 15) % 2) as u16).collect();
        // this pairing is not a clean product design, so check the identity
        // H(X|Y) = H(X) - I(X;Y) instead of an exact value
        let h_x = entropy(&x).unwrap();
        let i = mutual_information(&indep, &x).unwrap();
        let h_cond = conditional_entropy(&x, &[&indep]).unwrap();
        assert!((h_cond - (h_x - i)).abs() < 1e-12);
    }

    #[test]
    fn conditional_entropy_two_path_identity() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x: Vec<u16> = (0..100).map(|_| rng.gen_range(0..4)).collect();
        let y: Vec<u16> = (0..100).map(|_| rng.gen_range(0..5)).collect();
        // H(X|Y) = H(X,Y) - H(Y) recomputed with an independent pairing path
        let paired: Vec<u16> = x.iter().zip(&y).map(|(&a, &b)| a * 5 + b).collect();
        let expected = entropy(&paired).unwrap() - entropy(&y).unwrap();
        assert!((conditional_entropy(&x, &[&y]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn equal_frequency_median_split() {
        let col: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let out = discretize(
            &col,
            Binning {
                strategy: BinStrategy::EqualFrequency,
                bins: 2,
            },
        )
        .unwrap();
        assert_eq!(out.bins, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert!(!out.degenerate);
    }

    #[test]
    fn constant_column_is_degenerate_not_fatal() {
        let out = discretize(&[5.0; 8], Binning::default()).unwrap();
        assert_eq!(out.bins, vec![0; 8]);
        assert!(out.degenerate);
    }

    #[test]
    fn equal_frequency_bins_are_balanced() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let col: Vec<f64> = (0..1000).map(|_| rng.gen_range(0.0..1.0)).collect();
        let out = discretize(&col, Binning::default()).unwrap();
        let mut counts = [0usize; 10];
        for &b in &out.bins {
            counts[b as usize] += 1;
        }
        for (bin, &c) in counts.iter().enumerate() {
            assert!((95..=105).contains(&c), "bin {bin} count {c}");
        }
    }

    #[test]
    fn equal_width_binning() {
        let col = [0.0, 0.31, 0.6, 0.99, 1.0];
        let out = discretize(
            &col,
            Binning {
                strategy: BinStrategy::EqualWidth,
                bins: 3,
            },
        )
        .unwrap();
        assert_eq!(out.bins, vec![0, 0, 1, 2, 2]);
    }

    fn dataset_from_columns(
        columns: Vec<Vec<u16>>,
        labels: Vec<u16>,
        names: &[&str],
    ) -> DiscretizedDataset {
        DiscretizedDataset {
            columns,
            labels,
            feature_names: names.iter().map(|s| s.to_string()).collect(),
            binning: Binning::default(),
            degenerate_features: Vec::new(),
        }
    }

    #[test]
    fn single_feature_gets_weight_one() {
        let x: Vec<u16> = (0..20).map(|i| (i % 2) as u16).collect();
        let data = dataset_from_columns(vec![x.clone()], x, &["only"]);
        let ranking = mrmr_rank(&data, 1).unwrap();
        assert_eq!(ranking.entries.len(), 1);
        assert!((ranking.entries[0].weight - 1.0).abs() < 1e-9);
    }

    // Hand-evaluated MID criterion oracle for the duplicate-feature fixture.
    fn mid_oracle_order(columns: &[Vec<u16>], labels: &[u16]) -> Vec<usize> {
        let d = columns.len();
        let rel: Vec<f64> = columns
            .iter()
            .map(|c| mutual_information(c, labels).unwrap())
            .collect();
        let mut selected: Vec<usize> = Vec::new();
        let mut remaining: Vec<usize> = (0..d).collect();
        while !remaining.is_empty() {
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for &f in &remaining {
                let red: f64 = selected
                    .iter()
                    .map(|&s| mutual_information(&columns[f], &columns[s]).unwrap())
                    .sum();
                let score = if selected.is_empty() {
                    rel[f]
                } else {
                    rel[f] - red / selected.len() as f64
                };
                if score > best.0 || (score == best.0 && f < best.1) {
                    best = (score, f);
                }
            }
            selected.push(best.1);
            remaining.retain(|&f| f != best.1);
        }
        selected
    }

    /// f1 nearly copies the label, f2 copies f1, f3 is independent noise by
    /// product design. The redundancy penalty must demote the duplicate below
    /// the noise feature.
    ///
    /// Hand evaluation: rel(f1) = rel(f2) = 1 - h(4/20) = 0.2781 bits,
    /// rel(f3) = 0 and I(f3; f1) = 0 exactly (the flips keep every (f3, f1)
    /// cell balanced). Step 2: score(f2) = 0.2781 - 1 < 0 = score(f3), so the
    /// noise feature is selected second. Step 3: score(f2)
    /// = 0.2781 - (1 + 0)/2 = -0.2219, which the shift maps to weight zero.
    fn duplicate_feature_fixture() -> DiscretizedDataset {
        let n = 40;
        let labels: Vec<u16> = (0..n).map(|i| u16::from(i >= 20)).collect();
        let mut f1 = labels.clone();
        // four flips per class keep f1 balanced overall and split evenly
        // across even/odd indices so f3 stays a perfect product design
        for i in [0, 1, 2, 3, 20, 21, 22, 23] {
            f1[i] ^= 1;
        }
        let f2 = f1.clone();
        let f3: Vec<u16> = (0..n).map(|i| (i % 2) as u16).collect();
        dataset_from_columns(vec![f1, f2, f3], labels, &["f1", "f2", "f3"])
    }

    #[test]
    fn redundancy_penalty_demotes_duplicate() {
        let data = duplicate_feature_fixture();
        let oracle = mid_oracle_order(&data.columns, &data.labels);
        assert_eq!(
            oracle,
            vec![0, 2, 1],
            "fixture must order (f1, f3, f2) by hand evaluation"
        );

        let ranking = mrmr_rank(&data, 3).unwrap();
        assert_eq!(ranking.selection_order, vec!["f1", "f3", "f2"]);
        let ordered: Vec<&str> = ranking.entries.iter().map(|e| e.feature.as_str()).collect();
        assert_eq!(ordered, vec!["f1", "f3", "f2"]);
        let sum: f64 = ranking.entries.iter().map(|e| e.weight).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(ranking.entries.iter().all(|e| e.weight >= 0.0));
    }

    #[test]
    fn mrmr_weights_are_permutation_equivariant() {
        // tie-free fixture: `strong` is not an exact label copy, so no
        // selection score cancels exactly and the ranking is unambiguous
        let labels: Vec<u16> = (0..36).map(|i| u16::from(i >= 18)).collect();
        let mut strong = labels.clone();
        strong[0] ^= 1;
        strong[18] ^= 1;
        let medium: Vec<u16> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| if i % 6 == 0 { l ^ 1 } else { l })
            .collect();
        let noise: Vec<u16> = (0..36).map(|i| (i % 2) as u16).collect();

        let a = dataset_from_columns(
            vec![strong.clone(), medium.clone(), noise.clone()],
            labels.clone(),
            &["strong", "medium", "noise"],
        );
        let b = dataset_from_columns(
            vec![noise, strong, medium],
            labels,
            &["noise", "strong", "medium"],
        );
        let rank_a = mrmr_rank(&a, 3).unwrap();
        let rank_b = mrmr_rank(&b, 3).unwrap();
        for (ea, eb) in rank_a.entries.iter().zip(&rank_b.entries) {
            assert_eq!(ea.feature, eb.feature);
            // summation order differs under permutation; only the 1e-9
            // weight tolerance is promised
            assert!((ea.weight - eb.weight).abs() < 1e-9);
        }
    }

    #[test]
    fn subset_analysis_enumerates_all_nonempty_subsets() {
        let x: Vec<u16> = (0..24).map(|i| (i % 2) as u16).collect();
        let y: Vec<u16> = (0..24).map(|i| ((i / 2) % 3) as u16).collect();
        let labels: Vec<u16> = (0..24).map(|i| ((i / 4) % 2) as u16).collect();
        let data = dataset_from_columns(vec![x, y], labels, &["a", "b"]);
        let results = subset_analysis(&data, SUBSET_GUARD_DEFAULT).unwrap();
        assert_eq!(results.len(), 3); // 2^2 - 1

        let h_cl = entropy(&data.labels).unwrap();
        for r in &results {
            assert!(r.i_bits >= -1e-12);
            assert!(r.h_cond_bits >= -1e-12);
            assert!(
                (r.i_bits + r.h_cond_bits - h_cl).abs() < 1e-9,
                "identity violated"
            );
        }
        // adding a variable never reduces empirical MI
        let single_a = results.iter().find(|r| r.features == vec!["a"]).unwrap();
        let both = results.iter().find(|r| r.features.len() == 2).unwrap();
        assert!(both.i_bits >= single_a.i_bits - 1e-9);
    }

    #[test]
    fn twelve_features_enumerate_4095_subsets() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 50;
        let columns: Vec<Vec<u16>> = (0..12)
            .map(|_| (0..n).map(|_| rng.gen_range(0..3)).collect())
            .collect();
        let labels: Vec<u16> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let names: Vec<String> = (0..12).map(|j| format!("f{j}")).collect();
        let data = DiscretizedDataset {
            columns,
            labels,
            feature_names: names,
            binning: Binning::default(),
            degenerate_features: Vec::new(),
        };
        let results = subset_analysis(&data, SUBSET_GUARD_DEFAULT).unwrap();
        assert_eq!(results.len(), 4095);
        // sorted by MI descending
        for pair in results.windows(2) {
            assert!(pair[0].i_bits >= pair[1].i_bits - 1e-12);
        }
    }

    #[test]
    fn subset_guard_rejects_oversized_inputs() {
        let data = dataset_from_columns(
            (0..16).map(|_| vec![0u16, 1]).collect(),
            vec![0, 1],
            &["a"; 16],
        );
        assert!(matches!(
            subset_analysis(&data, SUBSET_GUARD_DEFAULT),
            Err(InfoError::TooManyFeatures(16, 15))
        ));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        // symmetry of mutual information
        #[test]
        fn mi_is_symmetric(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            use rand_chacha::ChaCha8Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(10..200);
            let x: Vec<u16> = (0..n).map(|_| rng.gen_range(0..5)).collect();
            let y: Vec<u16> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let ixy = mutual_information(&x, &y).unwrap();
            let iyx = mutual_information(&y, &x).unwrap();
            proptest::prop_assert!((ixy - iyx).abs() < 1e-12);
            proptest::prop_assert!(ixy >= -1e-12);
        }

        // I(Cl,S) + H(Cl|S) = H(Cl) on random fixtures
        #[test]
        fn information_identity_holds(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            use rand_chacha::ChaCha8Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(10..150);
            let cols: Vec<Vec<u16>> = (0..3).map(|_| (0..n).map(|_| rng.gen_range(0..4)).collect()).collect();
            let labels: Vec<u16> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let refs: Vec<&[u16]> = cols.iter().map(|c| c.as_slice()).collect();
            let i = mutual_information_joint(&refs, &labels).unwrap();
            let h_cond = conditional_entropy(&labels, &refs).unwrap();
            let h = entropy(&labels).unwrap();
            proptest::prop_assert!((i + h_cond - h).abs() < 1e-9);
        }

        // coarsening a binning never increases MI with the labels
        #[test]
        fn coarsening_cannot_increase_mi(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            use rand_chacha::ChaCha8Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(20..200);
            let fine: Vec<u16> = (0..n).map(|_| rng.gen_range(0..10)).collect();
            let coarse: Vec<u16> = fine.iter().map(|&b| b / 2).collect();
            let labels: Vec<u16> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let i_fine = mutual_information(&fine, &labels).unwrap();
            let i_coarse = mutual_information(&coarse, &labels).unwrap();
            proptest::prop_assert!(i_coarse <= i_fine + 1e-9);
        }

        // mRMR weights always sum to one
        #[test]
        fn mrmr_weights_sum_to_one(seed in 0u64..300) {
            use rand::{Rng, SeedableRng};
            use rand_chacha::ChaCha8Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(20..100);
            let d = rng.gen_range(2..6);
            let columns: Vec<Vec<u16>> = (0..d).map(|_| (0..n).map(|_| rng.gen_range(0..4)).collect()).collect();
            let labels: Vec<u16> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
            let data = DiscretizedDataset {
                columns, labels, feature_names: names,
                binning: Binning::default(), degenerate_features: Vec::new(),
            };
            let top = rng.gen_range(1..=d);
            let ranking = mrmr_rank(&data, top).unwrap();
            let sum: f64 = ranking.entries.iter().map(|e| e.weight).sum();
            proptest::prop_assert!((sum - 1.0).abs() < 1e-9);
            // sorted by weight descending
            for pair in ranking.entries.windows(2) {
                proptest::prop_assert!(pair[0].weight >= pair[1].weight - 1e-12);
            }
        }
    }
}
