//! Behavior cloning baseline: ridge regression of one-hot expert decisions
//! onto normalized states.

use nalgebra::{DMatrix, DVector};

use crate::decision::ACTION_DIM;
use crate::discriminator::Pair;
use crate::error::{check_dim, Error, Result};
use crate::policy::{Matrix, PolicyParams};
use crate::stats::RunningStats;

pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Fit `theta` minimizing `sum ||theta * s_hat - a||^2 + ridge * ||theta||^2`,
/// where `s_hat` is normalized with statistics of the same states. Returns
/// the policy together with those statistics.
pub fn bc_fit(pairs: &[Pair<'_>], ridge: f64) -> Result<(PolicyParams, RunningStats)> {
    let Some(&(first, _)) = pairs.first() else {
        return Err(Error::Usage(
            "behavior cloning needs at least one pair".into(),
        ));
    };
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Config(format!(
            "ridge must be finite and >= 0, got {ridge}"
        )));
    }
    let n = first.len();
    for (s, a) in pairs {
        check_dim("bc state", n, s.len())?;
        check_dim("bc action", ACTION_DIM, a.len())?;
        if s.iter().chain(a.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Data("non-finite value in demonstrations".into()));
        }
    }
    let stats = RunningStats::new(n).update(pairs.iter().map(|(s, _)| *s))?;

    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut cross = DMatrix::<f64>::zeros(n, ACTION_DIM);
    for (s, a) in pairs {
        let x = DVector::from_vec(stats.normalize(s)?);
        gram.ger(1.0, &x, &x, 1.0);
        for j in 0..ACTION_DIM {
            if a[j] != 0.0 {
                cross.column_mut(j).axpy(a[j], &x, 1.0);
            }
        }
    }
    for i in 0..n {
        gram[(i, i)] += ridge;
    }
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Conditioning(format!(
            "normal equations are not positive definite (ridge {ridge}); increase the ridge"
        ))
    })?;
    let solution = chol.solve(&cross); // n x p
    let mut theta = Matrix::zeros(ACTION_DIM, n);
    for r in 0..ACTION_DIM {
        for c in 0..n {
            theta.set(r, c, solution[(c, r)]);
        }
    }
    if !theta.is_finite() {
        return Err(Error::Conditioning(
            "behavior cloning produced non-finite weights".into(),
        ));
    }
    Ok((PolicyParams { theta }, stats))
}

/// Fraction of pairs whose argmax decision matches the demonstrated one.
pub fn agreement(params: &PolicyParams, stats: &RunningStats, pairs: &[Pair<'_>]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Usage("agreement needs at least one pair".into()));
    }
    let mut hits = 0usize;
    for (s, a) in pairs {
        let (_, d) = params.act(stats, s)?;
        if a[d.index()] == 1.0 {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}
