//! The linear supervisor policy: logits are a linear map of the normalized
//! state, and the decision is their argmax.

use serde::{Deserialize, Serialize};

use crate::decision::Decision;
use crate::error::{check_dim, Error, Result};
use crate::stats::RunningStats;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("matrix data", rows * cols, data.len())?;
        Ok(Matrix { rows, cols, data })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn same_shape(&self, other: &Matrix, what: &str) -> Result<()> {
        check_dim(what, self.rows, other.rows)?;
        check_dim(what, self.cols, other.cols)
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, other: &Matrix, scale: f64) -> Result<Matrix> {
        self.same_shape(other, "matrix add")?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + scale * b)
                .collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Policy weights `theta` of shape `p x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub theta: Matrix,
}

impl PolicyParams {
    pub fn zeros(action_dim: usize, state_dim: usize) -> Self {
        PolicyParams {
            theta: Matrix::zeros(action_dim, state_dim),
        }
    }

    pub fn action_dim(&self) -> usize {
        self.theta.rows
    }

    pub fn state_dim(&self) -> usize {
        self.theta.cols
    }

    /// Logits `theta * normalize(stats, s)` and their argmax decision.
    pub fn act(&self, stats: &RunningStats, state: &[f64]) -> Result<(Vec<f64>, Decision)> {
        if state.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("non-finite policy input".into()));
        }
        check_dim("policy state", self.state_dim(), state.len())?;
        check_dim("running stats", self.state_dim(), stats.dim())?;
        check_dim(
            "policy actions",
            crate::decision::ACTION_DIM,
            self.action_dim(),
        )?;
        let logits = self.theta.mul_vec(&stats.normalize(state)?);
        let decision = Decision::from_logits(&logits);
        Ok((logits, decision))
    }

    /// `theta + nu * delta` or `theta - nu * delta`; `self` is not modified.
    pub fn perturb(&self, pert: &Perturbation, sign: Sign) -> Result<PolicyParams> {
        let scale = match sign {
            Sign::Plus => pert.nu,
            Sign::Minus => -pert.nu,
        };
        Ok(PolicyParams {
            theta: self.theta.add_scaled(&pert.delta, scale)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// A search direction and the exploration scale applied to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub delta: Matrix,
    pub nu: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_theta_keeps() {
        let params = PolicyParams::zeros(3, 5);
        let (logits, d) = params
            .act(&RunningStats::new(5), &[1.0, 2.0, 3.0, 4.0, 5.0])
            .unwrap();
        assert_eq!(logits, vec![0.0; 3]);
        assert_eq!(d, Decision::Keep);
    }

    #[test]
    fn selector_theta_returns_components() {
        let mut theta = Matrix::zeros(3, 5);
        for r in 0..3 {
            theta.set(r, r, 1.0);
        }
        let params = PolicyParams { theta };
        let s = [0.5, -1.0, 2.0, 9.0, 9.0];
        let (logits, d) = params.act(&RunningStats::new(5), &s).unwrap();
        assert_eq!(logits, vec![0.5, -1.0, 2.0]);
        assert_eq!(d, Decision::ChangeRight);
    }

    #[test]
    fn act_rejects_bad_input() {
        let params = PolicyParams::zeros(3, 2);
        assert!(matches!(
            params.act(&RunningStats::new(2), &[f64::NAN, 0.0]),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            params.act(&RunningStats::new(2), &[0.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn zero_nu_is_identity() {
        let params = PolicyParams {
            theta: Matrix::from_rows(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
        };
        let pert = Perturbation {
            delta: Matrix::from_rows(3, 2, vec![9.0; 6]).unwrap(),
            nu: 0.0,
        };
        assert_eq!(params.perturb(&pert, Sign::Plus).unwrap(), params);
        assert_eq!(params.perturb(&pert, Sign::Minus).unwrap(), params);
    }

    #[test]
    fn single_entry_perturbation() {
        let params = PolicyParams::zeros(3, 4);
        let mut delta = Matrix::zeros(3, 4);
        delta.set(1, 2, 1.0);
        let pert = Perturbation { delta, nu: 0.03 };
        let plus = params.perturb(&pert, Sign::Plus).unwrap();
        let minus = params.perturb(&pert, Sign::Minus).unwrap();
        let nonzero: Vec<f64> = plus
            .theta
            .data
            .iter()
            .copied()
            .filter(|&x| x != 0.0)
            .collect();
        assert_eq!(nonzero, vec![0.03]);
        assert_eq!(minus.theta.get(1, 2), -0.03);
        assert_eq!(minus.theta.data.iter().filter(|&&x| x != 0.0).count(), 1);
    }

    #[test]
    fn perturb_shape_mismatch() {
        let params = PolicyParams::zeros(3, 4);
        let pert = Perturbation {
            delta: Matrix::zeros(3, 5),
            nu: 0.1,
        };
        assert!(params.perturb(&pert, Sign::Plus).is_err());
    }

    #[test]
    fn perturb_does_not_alias() {
        let params = PolicyParams::zeros(3, 2);
        let pert = Perturbation {
            delta: Matrix::from_rows(3, 2, vec![1.0; 6]).unwrap(),
            nu: 0.5,
        };
        let mut out = params.perturb(&pert, Sign::Plus).unwrap();
        out.theta.data[0] = 42.0;
        assert_eq!(params, PolicyParams::zeros(3, 2));
    }

    proptest! {
        #[test]
        fn perturbation_pair_is_symmetric(
            theta in prop::collection::vec(-2.0f64..2.0, 6),
            delta in prop::collection::vec(-2.0f64..2.0, 6),
            nu in 1e-3f64..1.0,
        ) {
            let params = PolicyParams { theta: Matrix::from_rows(3, 2, theta).unwrap() };
            let pert = Perturbation { delta: Matrix::from_rows(3, 2, delta).unwrap(), nu };
            let plus = params.perturb(&pert, Sign::Plus).unwrap();
            let minus = params.perturb(&pert, Sign::Minus).unwrap();
            for k in 0..6 {
                let mid = 0.5 * (plus.theta.data[k] + minus.theta.data[k]);
                prop_assert!((mid - params.theta.data[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn decision_invariant_to_positive_scaling(
            theta in prop::collection::vec(-2.0f64..2.0, 9),
            s in prop::collection::vec(-5.0f64..5.0, 3),
            c in 0.01f64..100.0,
        ) {
            let params = PolicyParams { theta: Matrix::from_rows(3, 3, theta).unwrap() };
            let stats = RunningStats::new(3);
            let (l1, d1) = params.act(&stats, &s).unwrap();
            let scaled: Vec<f64> = s.iter().map(|x| x * c).collect();
            let (l2, d2) = params.act(&stats, &scaled).unwrap();
            for (a, b) in l1.iter().zip(&l2) {
                prop_assert!((a * c - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
            // Near-ties can flip under rounding; only assert on clear margins.
            let mut sorted = l1.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if sorted[0] - sorted[1] > 1e-9 {
                prop_assert_eq!(d1, d2);
            }
        }

        #[test]
        fn decision_invariant_to_logit_shift(
            logits in prop::collection::vec(-40i32..40, 3),
            shift in -80i32..80,
        ) {
            // Eighths are exact in binary, so shifting cannot reorder logits.
            let logits: Vec<f64> = logits.iter().map(|&x| x as f64 / 8.0).collect();
            let shifted: Vec<f64> = logits.iter().map(|x| x + shift as f64 / 8.0).collect();
            prop_assert_eq!(Decision::from_logits(&logits), Decision::from_logits(&shifted));
        }
    }
}
