//! Independent reference solutions used to cross-check the level-by-level solver.

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix, Vector};
use crate::model::QueueModel;

/// Largest boundary probability accepted by [`birth_death_solve`].
pub const BIRTH_DEATH_TAIL: f64 = 1e-16;

/// Stationary distribution of the scalar birth–death level process on `-K..=K`.
#[derive(Clone, Debug)]
pub struct BirthDeathSolution {
    pub k: usize,
    /// `p_{-K}, …, p_K`.
    pub probs: Vec<f64>,
    /// `Σ_k p_k / p_0` before normalization.
    pub normalizer: f64,
}

impl BirthDeathSolution {
    pub fn p(&self, level: i64) -> f64 {
        let idx = level + self.k as i64;
        if idx < 0 {
            return 0.0;
        }
        self.probs.get(idx as usize).copied().unwrap_or(0.0)
    }

    pub fn mean_level(&self) -> f64 {
        let k = self.k as i64;
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i as i64 - k) as f64 * p)
            .sum()
    }
}

/// Product-form solution for Poisson inputs: up-rate `λ1` and down-rate
/// `λ2 + kθ1` above 0, up-rate `λ1 + |k|θ2` and down-rate `λ2` below.
/// Ratios are accumulated in log space.
pub fn birth_death_solve(
    lambda1: f64,
    lambda2: f64,
    theta1: f64,
    theta2: f64,
    k: usize,
) -> Result<BirthDeathSolution> {
    if !(lambda1 > 0.0 && lambda2 > 0.0 && theta1 > 0.0 && theta2 > 0.0) {
        return Err(Error::InvalidArgument(
            "birth–death oracle needs positive rates and abandonment rates".into(),
        ));
    }
    let mut log_pos = vec![0.0; k + 1];
    let mut log_neg = vec![0.0; k + 1];
    for j in 1..=k {
        let jf = j as f64;
        log_pos[j] = log_pos[j - 1] + (lambda1 / (lambda2 + jf * theta1)).ln();
        log_neg[j] = log_neg[j - 1] + (lambda2 / (lambda1 + jf * theta2)).ln();
    }
    let logs: Vec<f64> = log_neg[1..].iter().rev().chain(log_pos.iter()).copied().collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    let probs: Vec<f64> = logs.iter().map(|l| (l - top).exp() / scaled).collect();
    let edge = probs[0].max(*probs.last().expect("nonempty"));
    if edge >= BIRTH_DEATH_TAIL {
        return Err(Error::InvalidArgument(format!(
            "K = {k} too small: boundary probability {edge:e}"
        )));
    }
    Ok(BirthDeathSolution {
        k,
        probs,
        normalizer: scaled * top.exp(),
    })
}

/// Stationary vectors of the generator truncated to levels `-K..=K`.
#[derive(Clone, Debug)]
pub struct DirectSolution {
    pub k: usize,
    /// `π_{-K}, …, π_K`.
    pub pi: Vec<Vector>,
}

impl DirectSolution {
    pub fn pi_at(&self, level: i64) -> Option<&Vector> {
        let idx = level + self.k as i64;
        if idx < 0 {
            return None;
        }
        self.pi.get(idx as usize)
    }
}

/// The generator on levels `-K..=K` with the flows out of the two outermost
/// levels folded back onto their diagonals.
pub fn truncated_generator(model: &QueueModel, k: usize) -> Matrix {
    let m = model.block_order();
    let levels = 2 * k + 1;
    let mut q = Matrix::zeros(levels * m, levels * m);
    let ki = k as i64;
    for (idx, level) in (-ki..=ki).enumerate() {
        let b = model.blocks_at(level);
        let mut local = b.local.clone();
        let row = idx * m;
        if level > -ki {
            q.set_block(row, row - m, &b.down);
        } else {
            for (i, s) in b.down.row_sums().into_iter().enumerate() {
                local[(i, i)] += s;
            }
        }
        if level < ki {
            q.set_block(row, row + m, &b.up);
        } else {
            for (i, s) in b.up.row_sums().into_iter().enumerate() {
                local[(i, i)] += s;
            }
        }
        q.set_block(row, row, &local);
    }
    q
}

/// Dense global-balance solve of [`truncated_generator`] with one balance
/// equation replaced by normalization.
pub fn direct_truncated_solve(model: &QueueModel, k: usize) -> Result<DirectSolution> {
    let q = truncated_generator(model, k);
    let n = q.rows();
    let mut a = q.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let x = Lu::factor(&a)?.solve_vec(&rhs);
    let m = model.block_order();
    Ok(DirectSolution {
        k,
        pi: x.chunks(m).map(|c| Vector(c.to_vec())).collect(),
    })
}
