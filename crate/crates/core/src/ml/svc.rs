//! Soft-margin support vector classifier solved in the dual with a
//! simplified SMO loop (pairwise working set, KKT-violation selection).

use serde::{Deserialize, Serialize};

use super::knn::squared_distance;
use super::{Gamma, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ResolvedKernel {
    Linear,
    Rbf { gamma: f64 },
}

impl ResolvedKernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            ResolvedKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            ResolvedKernel::Rbf { gamma } => (-gamma * squared_distance(a, b)).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcModel {
    pub kernel: ResolvedKernel,
    /// Support vectors (training rows with non-zero alpha).
    pub support: Vec<Vec<f64>>,
    /// alpha_i * y_i for each support vector.
    pub coeffs: Vec<f64>,
    pub bias: f64,
}

impl SvcModel {
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[u8],
        kernel: Kernel,
        c: f64,
        max_iter: usize,
        tol: f64,
    ) -> SvcModel {
        let n = rows.len();
        let d = rows[0].len();
        let kernel = match kernel {
            Kernel::Linear => ResolvedKernel::Linear,
            Kernel::Rbf { gamma } => ResolvedKernel::Rbf {
                gamma: match gamma {
                    Gamma::Fixed(g) => g,
                    Gamma::Scale => {
                        // 1 / (d * variance of all matrix entries); 1.0 when flat
                        let total = (n * d) as f64;
                        let mean: f64 = rows.iter().flat_map(|r| r.iter()).sum::<f64>() / total;
                        let var: f64 = rows
                            .iter()
                            .flat_map(|r| r.iter())
                            .map(|v| (v - mean) * (v - mean))
                            .sum::<f64>()
                            / total;
                        if var > 0.0 {
                            1.0 / (d as f64 * var)
                        } else {
                            1.0
                        }
                    }
                },
            },
        };

        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == 1 { 1.0 } else { -1.0 })
            .collect();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = kernel.eval(&rows[i], &rows[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }

        let mut alpha = vec![0.0f64; n];
        let mut bias = 0.0f64;
        // error cache: err[m] = f(x_m) - y_m, maintained incrementally
        let mut err: Vec<f64> = y.iter().map(|v| -v).collect();

        // one pairwise step; returns true if (alpha_i, alpha_j, b) changed
        let step = |i: usize,
                    j: usize,
                    alpha: &mut Vec<f64>,
                    bias: &mut f64,
                    err: &mut Vec<f64>|
         -> bool {
            let (e_i, e_j) = (err[i], err[j]);
            let (a_i_old, a_j_old) = (alpha[i], alpha[j]);
            let (lo, hi) = if y[i] != y[j] {
                ((a_j_old - a_i_old).max(0.0), (c + a_j_old - a_i_old).min(c))
            } else {
                ((a_i_old + a_j_old - c).max(0.0), (a_i_old + a_j_old).min(c))
            };
            if lo >= hi {
                return false;
            }
            let eta = 2.0 * k[i * n + j] - k[i * n + i] - k[j * n + j];
            if eta >= 0.0 {
                return false;
            }
            let a_j = (a_j_old - y[j] * (e_i - e_j) / eta).clamp(lo, hi);
            if (a_j - a_j_old).abs() < 1e-7 {
                return false;
            }
            let a_i = a_i_old + y[i] * y[j] * (a_j_old - a_j);
            let (d_i, d_j) = (a_i - a_i_old, a_j - a_j_old);

            let b1 = *bias - e_i - y[i] * d_i * k[i * n + i] - y[j] * d_j * k[i * n + j];
            let b2 = *bias - e_j - y[i] * d_i * k[i * n + j] - y[j] * d_j * k[j * n + j];
            let new_bias = if a_i > 0.0 && a_i < c {
                b1
            } else if a_j > 0.0 && a_j < c {
                b2
            } else {
                (b1 + b2) / 2.0
            };
            let d_b = new_bias - *bias;
            alpha[i] = a_i;
            alpha[j] = a_j;
            *bias = new_bias;
            for m in 0..n {
                err[m] += y[i] * d_i * k[i * n + m] + y[j] * d_j * k[j * n + m] + d_b;
            }
            true
        };

        for _sweep in 0..max_iter {
            let mut changed = 0usize;
            for i in 0..n {
                let r = y[i] * err[i];
                if !((r < -tol && alpha[i] < c) || (r > tol && alpha[i] > 0.0)) {
                    continue;
                }
                // preferred second index: largest |E_i - E_j|, lower index on ties
                let mut preferred = usize::MAX;
                let mut best_gap = -1.0;
                for (cand, &e_j) in err.iter().enumerate() {
                    if cand == i {
                        continue;
                    }
                    let gap = (err[i] - e_j).abs();
                    if gap > best_gap {
                        best_gap = gap;
                        preferred = cand;
                    }
                }
                let mut advanced = false;
                if preferred != usize::MAX {
                    advanced = step(i, preferred, &mut alpha, &mut bias, &mut err);
                }
                if !advanced {
                    // fall back to any pair that makes progress
                    for j in 0..n {
                        if j == i || j == preferred {
                            continue;
                        }
                        if step(i, j, &mut alpha, &mut bias, &mut err) {
                            advanced = true;
                            break;
                        }
                    }
                }
                if advanced {
                    changed += 1;
                }
            }
            if changed == 0 {
                break;
            }
        }

        let mut support = Vec::new();
        let mut coeffs = Vec::new();
        for i in 0..n {
            if alpha[i] > 1e-12 {
                support.push(rows[i].clone());
                coeffs.push(alpha[i] * y[i]);
            }
        }
        SvcModel {
            kernel,
            support,
            coeffs,
            bias,
        }
    }

    pub fn decision(&self, sample: &[f64]) -> f64 {
        let mut f = self.bias;
        for (sv, coeff) in self.support.iter().zip(&self.coeffs) {
            f += coeff * self.kernel.eval(sv, sample);
        }
        f
    }

    /// Positive decision values map to class 1; zero and below to class 0.
    pub fn predict(&self, sample: &[f64]) -> usize {
        usize::from(self.decision(sample) > 0.0)
    }
}
