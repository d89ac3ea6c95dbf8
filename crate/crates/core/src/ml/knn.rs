//! K-nearest neighbours: the lazy learner memorizes the training set and
//! votes among the k nearest points by Euclidean distance.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl KnnModel {
    pub fn fit(k: usize, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> KnnModel {
        KnnModel { k, rows, labels }
    }

    /// Majority vote among the k nearest training points. Distance ties are
    /// broken by the lower row index, vote ties by the smaller class index.
    pub fn predict(&self, sample: &[f64]) -> usize {
        let mut dists: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| (squared_distance(row, sample), i))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = self.k.min(dists.len());
        let mut votes = [0usize; 2];
        for &(_, idx) in dists.iter().take(k) {
            votes[self.labels[idx] as usize] += 1;
        }
        if votes[1] > votes[0] {
            1
        } else {
            0
        }
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
