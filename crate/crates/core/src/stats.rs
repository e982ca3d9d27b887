use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

/// Variances below this are treated as zero by [`RunningStats::normalize`].
pub const VAR_FLOOR: f64 = 1e-8;

/// Running per-component mean and population variance of every state seen
/// since the start of training (the diagonal of the state covariance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    #[serde(rename = "mu")]
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: u64,
}

impl RunningStats {
    /// Zero mean, unit variance, no samples.
    pub fn new(dim: usize) -> Self {
        RunningStats {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(s_j - mu_j) / sqrt(var_j)`, with divisor 1 when `var_j < 1e-8` or
    /// fewer than two samples have been accumulated.
    pub fn normalize(&self, state: &[f64]) -> Result<Vec<f64>> {
        check_dim("normalize input", self.dim(), state.len())?;
        let guard = self.count < 2;
        Ok(state
            .iter()
            .zip(&self.mean)
            .zip(&self.var)
            .map(|((&s, &mu), &var)| {
                if guard || var < VAR_FLOOR {
                    s - mu
                } else {
                    (s - mu) / var.sqrt()
                }
            })
            .collect())
    }

    /// Merge a batch of states into the statistics. Within the batch a
    /// Welford pass builds the batch moments, which are then combined with
    /// the accumulated moments by the pairwise (Chan) update. States are
    /// consumed in iteration order.
    pub fn update<'a, I>(&self, batch: I) -> Result<RunningStats>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let dim = self.dim();
        let mut batch_count = 0u64;
        let mut batch_mean = vec![0.0; dim];
        let mut batch_m2 = vec![0.0; dim];
        for state in batch {
            check_dim("update_stats state", dim, state.len())?;
            batch_count += 1;
            let k = batch_count as f64;
            for j in 0..dim {
                let delta = state[j] - batch_mean[j];
                batch_mean[j] += delta / k;
                batch_m2[j] += delta * (state[j] - batch_mean[j]);
            }
        }
        if batch_count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(RunningStats {
                mean: batch_mean,
                var: batch_m2.iter().map(|m2| m2 / batch_count as f64).collect(),
                count: batch_count,
            });
        }

        let na = self.count as f64;
        let nb = batch_count as f64;
        let total = na + nb;
        let mut mean = Vec::with_capacity(dim);
        let mut var = Vec::with_capacity(dim);
        for j in 0..dim {
            let delta = batch_mean[j] - self.mean[j];
            let m2 = self.var[j] * na + batch_m2[j] + delta * delta * na * nb / total;
            mean.push(self.mean[j] + delta * nb / total);
            var.push((m2 / total).max(0.0));
        }
        Ok(RunningStats {
            mean,
            var,
            count: self.count + batch_count,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Two-pass batch mean and population variance.
    fn batch_oracle(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let n = rows.len() as f64;
        let dim = rows[0].len();
        let mean: Vec<f64> = (0..dim)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        let var = (0..dim)
            .map(|j| rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n)
            .collect();
        (mean, var)
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn identity_normalization() {
        let stats = RunningStats::new(3);
        let s = [1.5, -2.0, 0.25];
        assert_eq!(stats.normalize(&s).unwrap(), s.to_vec());
    }

    #[test]
    fn hand_evaluated_normalization() {
        let stats = RunningStats {
            mean: vec![1.0],
            var: vec![4.0],
            count: 10,
        };
        assert_eq!(stats.normalize(&[3.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn single_sample_uses_unit_divisor() {
        let stats = RunningStats {
            mean: vec![1.0],
            var: vec![4.0],
            count: 1,
        };
        assert_eq!(stats.normalize(&[3.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn tiny_variance_uses_unit_divisor() {
        let stats = RunningStats {
            mean: vec![0.0],
            var: vec![1e-9],
            count: 10,
        };
        assert_eq!(stats.normalize(&[0.5]).unwrap(), vec![0.5]);
    }

    #[test]
    fn normalize_rejects_wrong_dim() {
        assert!(RunningStats::new(2).normalize(&[1.0]).is_err());
    }

    #[test]
    fn two_point_stream() {
        let stats = RunningStats::new(1);
        let batch = [[0.0], [2.0]];
        let out = stats.update(batch.iter().map(|r| &r[..])).unwrap();
        assert_eq!(out.mean, vec![1.0]);
        assert_eq!(out.var, vec![1.0]);
        assert_eq!(out.count, 2);
    }

    #[test]
    fn empty_batch_is_identity() {
        let stats = RunningStats {
            mean: vec![0.3],
            var: vec![2.0],
            count: 5,
        };
        let out = stats.update(std::iter::empty::<&[f64]>()).unwrap();
        assert_eq!(out, stats);
    }

    proptest! {
        #[test]
        fn sequential_batches_match_concatenation(
            rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 2..60),
            split in 0usize..60,
        ) {
            let split = split.min(rows.len());
            let start = RunningStats::new(3);
            let two_step = start
                .update(rows[..split].iter().map(|r| &r[..]))
                .unwrap()
                .update(rows[split..].iter().map(|r| &r[..]))
                .unwrap();
            let (mean, var) = batch_oracle(&rows);
            prop_assert_eq!(two_step.count, rows.len() as u64);
            for j in 0..3 {
                prop_assert!(rel_close(two_step.mean[j], mean[j], 1e-10) || (two_step.mean[j] - mean[j]).abs() < 1e-12);
                prop_assert!(rel_close(two_step.var[j], var[j], 1e-10) || (two_step.var[j] - var[j]).abs() < 1e-12);
            }
        }

        #[test]
        fn normalized_stream_is_standardized(
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 3..40),
        ) {
            let stats = RunningStats::new(2).update(rows.iter().map(|r| &r[..])).unwrap();
            let normed: Vec<Vec<f64>> = rows.iter().map(|r| stats.normalize(r).unwrap()).collect();
            let (mean, var) = batch_oracle(&normed);
            for j in 0..2 {
                if stats.var[j] >= VAR_FLOOR {
                    prop_assert!(mean[j].abs() < 1e-8);
                    prop_assert!((var[j] - 1.0).abs() < 1e-8);
                }
            }
        }
    }
}
