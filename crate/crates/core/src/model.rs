//! The double-ended queue and its level-dependent generator blocks.
//!
//! Level `k > 0` means `k` A-customers wait, `k < 0` means `-k` B-customers
//! wait. Phases are ordered with the B-process phase as the major index:
//! state `(i2, j1)` sits at position `i2 * m1 + j1`.

use crate::error::{Error, Result};
use crate::linalg::{kron_product, kron_sum, Matrix, Vector};
use crate::map::{MapSummary, MarkovianArrivalProcess};

#[derive(Clone, Debug, PartialEq)]
pub struct QueueModel {
    pub map_a: MarkovianArrivalProcess,
    pub map_b: MarkovianArrivalProcess,
    /// Per-customer abandonment rate of waiting A-customers.
    pub theta1: f64,
    /// Per-customer abandonment rate of waiting B-customers.
    pub theta2: f64,
}

/// The three blocks of one level row: transitions to `k-1`, within `k`, to `k+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelBlocks {
    pub level: i64,
    pub down: Matrix,
    pub local: Matrix,
    pub up: Matrix,
}

impl QueueModel {
    pub fn new(
        map_a: MarkovianArrivalProcess,
        map_b: MarkovianArrivalProcess,
        theta1: f64,
        theta2: f64,
    ) -> Result<Self> {
        for (name, v) in [("theta1", theta1), ("theta2", theta2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Self {
            map_a,
            map_b,
            theta1,
            theta2,
        })
    }

    pub fn m1(&self) -> usize {
        self.map_a.order()
    }

    pub fn m2(&self) -> usize {
        self.map_b.order()
    }

    pub fn block_order(&self) -> usize {
        self.m1() * self.m2()
    }

    /// Same model seen from the B side: MAPs and abandonment rates swapped.
    /// Level `k` of the mirror is level `-k` here, with phases transposed.
    pub fn mirrored(&self) -> Self {
        Self {
            map_a: self.map_b.clone(),
            map_b: self.map_a.clone(),
            theta1: self.theta2,
            theta2: self.theta1,
        }
    }

    pub fn summaries(&self) -> Result<(MapSummary, MapSummary)> {
        Ok((self.map_a.summarize()?, self.map_b.summarize()?))
    }

    /// `α2 ⊗ α1`, the stationary phase vector of the joint background process.
    pub fn joint_alpha(&self) -> Result<Vector> {
        Ok(self.map_b.alpha()?.kron(&self.map_a.alpha()?))
    }

    fn i1(&self) -> Matrix {
        Matrix::identity(self.m1())
    }

    fn i2(&self) -> Matrix {
        Matrix::identity(self.m2())
    }

    /// A-arrival transitions, `I ⊗ D1`.
    pub fn a_arrivals(&self) -> Matrix {
        kron_product(&self.i2(), self.map_a.d())
    }

    /// B-arrival transitions, `D2 ⊗ I`.
    pub fn b_arrivals(&self) -> Matrix {
        kron_product(self.map_b.d(), &self.i1())
    }

    /// Hidden transitions of both MAPs, `C2 ⊕ C1`.
    pub fn hidden(&self) -> Matrix {
        kron_sum(self.map_b.c(), self.map_a.c()).expect("MAP matrices are square")
    }

    /// Local block of level 0 on the A side only, `I ⊗ C1`.
    pub fn a_boundary_local(&self) -> Matrix {
        kron_product(&self.i2(), self.map_a.c())
    }

    /// Local block of level 0 on the B side only, `C2 ⊗ I`.
    pub fn b_boundary_local(&self) -> Matrix {
        kron_product(self.map_b.c(), &self.i1())
    }

    pub fn blocks_at(&self, k: i64) -> LevelBlocks {
        let kf = k as f64;
        match k.signum() {
            1 => LevelBlocks {
                level: k,
                up: self.a_arrivals(),
                local: self.hidden().shift_diagonal(-kf * self.theta1),
                down: self.b_arrivals().shift_diagonal(kf * self.theta1),
            },
            -1 => LevelBlocks {
                level: k,
                up: self.a_arrivals().shift_diagonal(-kf * self.theta2),
                local: self.hidden().shift_diagonal(kf * self.theta2),
                down: self.b_arrivals(),
            },
            _ => LevelBlocks {
                level: 0,
                up: self.a_arrivals(),
                local: &self.b_boundary_local() + &self.a_boundary_local(),
                down: self.b_arrivals(),
            },
        }
    }

    /// Mean upward and downward drift rates at level `k != 0`.
    pub fn drift_rates(&self, k: i64) -> Result<(f64, f64)> {
        if k == 0 {
            return Err(Error::InvalidArgument("level 0 has no single drift pair".into()));
        }
        let l1 = self.map_a.rate()?;
        let l2 = self.map_b.rate()?;
        let n = k.unsigned_abs() as f64;
        Ok(if k > 0 {
            (l1, l2 + n * self.theta1)
        } else {
            (l1 + n * self.theta2, l2)
        })
    }

    /// Permutation taking phase index `i2 * m1 + j1` here to the mirrored
    /// model's index `j1 * m2 + i2`.
    pub fn mirror_phase(&self, idx: usize) -> usize {
        let (m1, m2) = (self.m1(), self.m2());
        let (i2, j1) = (idx / m1, idx % m1);
        j1 * m2 + i2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_model(l1: f64, l2: f64, t1: f64, t2: f64) -> QueueModel {
        QueueModel::new(
            MarkovianArrivalProcess::poisson(l1).unwrap(),
            MarkovianArrivalProcess::poisson(l2).unwrap(),
            t1,
            t2,
        )
        .unwrap()
    }

    pub(crate) fn order2(t1: f64, t2: f64) -> QueueModel {
        let a = MarkovianArrivalProcess::validate(
            Matrix::from_rows(&[[-10.0, 0.0], [1.0, -1.0]]).unwrap(),
            Matrix::from_rows(&[[9.0, 1.0], [0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let b = MarkovianArrivalProcess::validate(
            Matrix::from_rows(&[[-5.0, 1.0], [2.0, -7.0]]).unwrap(),
            Matrix::from_rows(&[[0.0, 4.0], [2.0, 3.0]]).unwrap(),
        )
        .unwrap();
        QueueModel::new(a, b, t1, t2).unwrap()
    }

    #[test]
    fn scalar_blocks() {
        let m = poisson_model(5.0, 4.0, 0.5, 2.0);
        let b = m.blocks_at(3);
        assert_eq!(b.up[(0, 0)], 5.0);
        assert_eq!(b.local[(0, 0)], -5.0 - 4.0 - 1.5);
        assert_eq!(b.down[(0, 0)], 4.0 + 1.5);
        let b = m.blocks_at(-2);
        assert_eq!(b.up[(0, 0)], 5.0 + 4.0);
        assert_eq!(b.local[(0, 0)], -5.0 - 4.0 - 4.0);
        assert_eq!(b.down[(0, 0)], 4.0);
        let b = m.blocks_at(0);
        assert_eq!((b.up[(0, 0)], b.local[(0, 0)], b.down[(0, 0)]), (5.0, -9.0, 4.0));
    }

    #[test]
    fn level_one_down_block_by_hand() {
        // D2 ⊗ I2 + θ1 I4 with D2 = [[0,4],[2,3]] and θ1 = 0.25.
        let m = order2(0.25, 1.0);
        let expect = Matrix::from_rows(&[
            [0.25, 0.0, 4.0, 0.0],
            [0.0, 0.25, 0.0, 4.0],
            [2.0, 0.0, 3.25, 0.0],
            [0.0, 2.0, 0.0, 3.25],
        ])
        .unwrap();
        assert_eq!(m.blocks_at(1).down, expect);
    }

    #[test]
    fn every_level_row_is_conservative() {
        let m = order2(0.7, 1.3);
        for k in -20..=20 {
            let b = m.blocks_at(k);
            let total = &(&b.down + &b.local) + &b.up;
            for s in total.row_sums() {
                assert!(s.abs() < 1e-12, "level {k}: row sum {s}");
            }
            assert!(b.up.min_entry() >= 0.0 && b.down.min_entry() >= 0.0);
            assert!(b.local.diagonal().iter().all(|&d| d < 0.0));
        }
    }

    #[test]
    fn drift_rate_examples() {
        let m = order2(1.0, 0.5);
        let (up, down) = m.drift_rates(2).unwrap();
        assert!((up - 5.0).abs() < 1e-12);
        assert!((down - (6.0 + 5.0 / 9.0)).abs() < 1e-12);
        let m = poisson_model(1.0, 2.0, 0.3, 2.0);
        assert_eq!(m.drift_rates(-3).unwrap(), (7.0, 2.0));
        let m = poisson_model(1.0, 2.0, 0.0, 0.0);
        for k in [-5, -1, 1, 9] {
            assert_eq!(m.drift_rates(k).unwrap(), (1.0, 2.0));
        }
        assert!(m.drift_rates(0).is_err());
    }

    #[test]
    fn negative_theta_rejected() {
        let a = MarkovianArrivalProcess::poisson(1.0).unwrap();
        assert!(QueueModel::new(a.clone(), a, -0.1, 1.0).is_err());
    }

    #[test]
    fn mirror_maps_blocks() {
        let m = order2(0.4, 1.7);
        let mm = m.mirrored();
        let n = m.block_order();
        for k in [-3i64, -1, 0, 1, 4] {
            let b = m.blocks_at(k);
            let r = mm.blocks_at(-k);
            for i in 0..n {
                for j in 0..n {
                    let (pi, pj) = (m.mirror_phase(i), m.mirror_phase(j));
                    assert_eq!(b.local[(i, j)], r.local[(pi, pj)]);
                    assert_eq!(b.up[(i, j)], r.down[(pi, pj)]);
                    assert_eq!(b.down[(i, j)], r.up[(pi, pj)]);
                }
            }
        }
    }

    #[test]
    fn local_diagonal_negative_far_out() {
        let m = order2(0.25, 1.0);
        for k in [1_000_000i64, -1_000_000, 12345, -54321] {
            assert!(m.blocks_at(k).local.diagonal().iter().all(|&d| d < 0.0));
        }
    }
}
