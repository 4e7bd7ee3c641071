//! Linear support vector machine trained by sequential minimal optimization.
//!
//! Each step picks the maximal violating pair of the dual, takes the
//! analytic two-variable step and clips it to the box `[0, C]`. Training
//! stops when the violation gap falls below `tol`. One "pass" is counted as
//! `n` pair updates, so `max_passes` bounds the work relative to data size.

use serde::{Deserialize, Serialize};

use super::{softmax_in_place, Dataset};
use crate::error::{Error, Result};
use crate::textprep::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_passes: 10_000,
        }
    }
}

/// Sparse real-valued input: `(index, value)` with strictly increasing indices.
pub type SparseInput = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub w: Vec<f64>,
    pub b: f64,
    /// Dual coefficients, one per training example.
    #[serde(skip)]
    pub alphas: Vec<f64>,
    #[serde(skip)]
    pub iterations: usize,
}

fn dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

impl LinearSvm {
    /// Trains on labels `ys ∈ {-1, +1}` over inputs of dimension `dim`.
    pub fn train(xs: &[SparseInput], ys: &[f64], dim: usize, params: &SmoParams) -> Result<Self> {
        let n = xs.len();
        assert_eq!(n, ys.len());
        let c = params.c;
        let mut alpha = vec![0.0; n];
        let mut w = vec![0.0; dim];
        // v_t = y_t - w·x_t  (= -y_t ∇_t of the dual objective)
        let mut v: Vec<f64> = ys.to_vec();
        let diag: Vec<f64> = xs.iter().map(|x| dot(x, x)).collect();
        let max_iter = params.max_passes.saturating_mul(n.max(1));

        let mut iter = 0;
        loop {
            let mut up: Option<(usize, f64)> = None;
            let mut low: Option<(usize, f64)> = None;
            for t in 0..n {
                let in_up = (ys[t] > 0.0 && alpha[t] < c) || (ys[t] < 0.0 && alpha[t] > 0.0);
                let in_low = (ys[t] > 0.0 && alpha[t] > 0.0) || (ys[t] < 0.0 && alpha[t] < c);
                if in_up && up.is_none_or(|(_, m)| v[t] > m) {
                    up = Some((t, v[t]));
                }
                if in_low && low.is_none_or(|(_, m)| v[t] < m) {
                    low = Some((t, v[t]));
                }
            }
            let (Some((i, m)), Some((j, big_m))) = (up, low) else {
                break;
            };
            let gap = m - big_m;
            if gap < params.tol {
                break;
            }
            if iter >= max_iter {
                return Err(Error::NoConvergence {
                    passes: params.max_passes,
                    gap,
                    tol: params.tol,
                });
            }
            iter += 1;

            let kij = dot(&xs[i], &xs[j]);
            let eta = (diag[i] + diag[j] - 2.0 * kij).max(1e-12);
            let bound_i = if ys[i] > 0.0 { c - alpha[i] } else { alpha[i] };
            let bound_j = if ys[j] > 0.0 { alpha[j] } else { c - alpha[j] };
            let lambda = (gap / eta).min(bound_i).min(bound_j);

            alpha[i] += ys[i] * lambda;
            alpha[j] -= ys[j] * lambda;
            // snap to the box to avoid drift
            for t in [i, j] {
                if alpha[t] < 1e-15 {
                    alpha[t] = 0.0;
                } else if alpha[t] > c - 1e-15 {
                    alpha[t] = c;
                }
            }
            for &(f, val) in &xs[i] {
                w[f] += lambda * val;
            }
            for &(f, val) in &xs[j] {
                w[f] -= lambda * val;
            }
            for t in 0..n {
                let kti = if t == i { diag[i] } else { dot(&xs[t], &xs[i]) };
                let ktj = if t == j { diag[j] } else { dot(&xs[t], &xs[j]) };
                v[t] -= lambda * (kti - ktj);
            }
        }

        let eps = 1e-9 * c;
        let free: Vec<f64> = (0..n)
            .filter(|&t| alpha[t] > eps && alpha[t] < c - eps)
            .map(|t| v[t])
            .collect();
        let b = if free.is_empty() {
            // midpoint of the feasible interval for b
            let mut hi = f64::INFINITY;
            let mut lo = f64::NEG_INFINITY;
            for t in 0..n {
                let in_up = (ys[t] > 0.0 && alpha[t] < c) || (ys[t] < 0.0 && alpha[t] > 0.0);
                let in_low = (ys[t] > 0.0 && alpha[t] > 0.0) || (ys[t] < 0.0 && alpha[t] < c);
                if in_up {
                    lo = lo.max(v[t]);
                }
                if in_low {
                    hi = hi.min(v[t]);
                }
            }
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo,
                (false, true) => hi,
                _ => 0.0,
            }
        } else {
            free.iter().sum::<f64>() / free.len() as f64
        };

        Ok(Self {
            w,
            b,
            alphas: alpha,
            iterations: iter,
        })
    }

    pub fn decision(&self, x: &[(usize, f64)]) -> f64 {
        x.iter()
            .filter(|(i, _)| *i < self.w.len())
            .map(|&(i, v)| self.w[i] * v)
            .sum::<f64>()
            + self.b
    }
}

pub(crate) fn to_input(x: &FeatureVector) -> SparseInput {
    x.entries.iter().map(|&(i, c)| (i, f64::from(c))).collect()
}

/// One machine for two classes (class 1 positive); one per class otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsRestSvm {
    pub machines: Vec<LinearSvm>,
    pub n_classes: usize,
}

impl OneVsRestSvm {
    pub fn fit(data: &Dataset, params: &SmoParams) -> Result<Self> {
        let xs: Vec<SparseInput> = data.vectors().iter().map(to_input).collect();
        let k = data.n_classes();
        let positives: Vec<usize> = if k == 2 { vec![1] } else { (0..k).collect() };
        let machines = positives
            .into_iter()
            .map(|pos| {
                let ys: Vec<f64> = data
                    .labels()
                    .iter()
                    .map(|&l| if l == pos { 1.0 } else { -1.0 })
                    .collect();
                LinearSvm::train(&xs, &ys, data.vocab_size(), params)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            machines,
            n_classes: k,
        })
    }

    pub fn margins(&self, x: &FeatureVector) -> Vec<f64> {
        let input = to_input(x);
        if self.n_classes == 2 {
            let f = self.machines[0].decision(&input);
            vec![-f, f]
        } else {
            self.machines.iter().map(|m| m.decision(&input)).collect()
        }
    }

    /// Softmax of the margins; for two classes this is the logistic of `2f`.
    pub fn scores(&self, x: &FeatureVector) -> Vec<f64> {
        let mut s = self.margins(x);
        softmax_in_place(&mut s);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_max_margin() {
        let xs = vec![vec![(0, -2.0)], vec![(0, 2.0)]];
        let ys = vec![-1.0, 1.0];
        let svm = LinearSvm::train(&xs, &ys, 1, &SmoParams::default()).unwrap();
        assert!((svm.w[0] - 0.5).abs() < 1e-9);
        assert!(svm.b.abs() < 1e-9);
        assert!((svm.alphas[0] - 0.125).abs() < 1e-9);
        assert!(svm.decision(&[(0, 2.0)]) > 0.0);
    }

    #[test]
    fn dot_of_sparse_vectors() {
        assert_eq!(dot(&[(0, 1.0), (3, 2.0)], &[(1, 5.0), (3, 4.0)]), 8.0);
        assert_eq!(dot(&[], &[(1, 5.0)]), 0.0);
    }

    #[test]
    fn soft_margin_respects_box() {
        // overlapping points force bounded alphas
        let xs = vec![vec![(0, 1.0)], vec![(0, 1.1)], vec![(0, 0.9)], vec![(0, 1.05)]];
        let ys = vec![1.0, -1.0, -1.0, 1.0];
        let p = SmoParams {
            c: 0.5,
            ..SmoParams::default()
        };
        let svm = LinearSvm::train(&xs, &ys, 1, &p).unwrap();
        assert!(svm.alphas.iter().all(|&a| (0.0..=0.5).contains(&a)));
        let balance: f64 = svm.alphas.iter().zip(&ys).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-9);
    }

    #[test]
    fn non_convergence_is_reported() {
        let xs = vec![vec![(0, 1.0)], vec![(0, 3.0)], vec![(1, 1.0)], vec![(1, 2.0)]];
        let ys = vec![1.0, 1.0, -1.0, -1.0];
        let p = SmoParams {
            c: 100.0,
            tol: 1e-14,
            max_passes: 0,
        };
        assert!(matches!(
            LinearSvm::train(&xs, &ys, 2, &p),
            Err(Error::NoConvergence { .. })
        ));
    }
}
