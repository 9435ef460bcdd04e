//! Stationary performance measures read off a truncated solution.

use serde::Serialize;

use crate::solver::TruncatedStationarySolution;

/// Entries of `π` above this negative threshold are treated as rounding noise.
pub const CLAMP_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerformanceReport {
    /// `P{no A-customer waits}` = `Σ_{k≤0} π_k e`.
    pub p_no_a: f64,
    /// `P{no B-customer waits}` = `Σ_{k≥0} π_k e`.
    pub p_no_b: f64,
    /// `P{both queues empty}` = `π_0 e`.
    pub p_empty: f64,
    /// Mean number of waiting A-customers.
    pub mean_q_a: f64,
    /// Mean number of waiting B-customers.
    pub mean_q_b: f64,
    /// `E[Q_A]·P{Q_A>0} + E[Q_B]·P{Q_B>0}`, the composite queue length of the tables.
    pub mean_q_paper: f64,
    /// `Σ_k k π_k e`.
    pub mean_level_diff: f64,
    /// `Σ_k |k| π_k e`, the plain total queue length (not a table column).
    pub mean_q_total_abs: f64,
    pub k_star: usize,
    pub tail_mass: f64,
    /// `tail_mass · (K*+1)`, a bound on the mass the truncated sums miss.
    pub truncation_error_bound: f64,
}

fn level_mass(p: &crate::linalg::Vector) -> f64 {
    p.iter()
        .map(|&v| if (-CLAMP_TOL..0.0).contains(&v) { 0.0 } else { v })
        .sum()
}

pub fn report(sol: &TruncatedStationarySolution) -> PerformanceReport {
    let mut r = PerformanceReport {
        p_no_a: 0.0,
        p_no_b: 0.0,
        p_empty: 0.0,
        mean_q_a: 0.0,
        mean_q_b: 0.0,
        mean_q_paper: 0.0,
        mean_level_diff: 0.0,
        mean_q_total_abs: 0.0,
        k_star: sol.k_star,
        tail_mass: sol.tail_mass,
        truncation_error_bound: sol.tail_mass * (sol.k_star as f64 + 1.0),
    };
    for (k, p) in sol.levels() {
        let mass = level_mass(p);
        let kf = k as f64;
        if k <= 0 {
            r.p_no_a += mass;
        }
        if k >= 0 {
            r.p_no_b += mass;
        }
        if k == 0 {
            r.p_empty = mass;
        }
        if k > 0 {
            r.mean_q_a += kf * mass;
        } else {
            r.mean_q_b += -kf * mass;
        }
        r.mean_level_diff += kf * mass;
    }
    r.mean_q_total_abs = r.mean_q_a + r.mean_q_b;
    r.mean_q_paper = r.mean_q_a * (1.0 - r.p_no_a) + r.mean_q_b * (1.0 - r.p_no_b);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::map::MarkovianArrivalProcess;
    use crate::model::QueueModel;
    use crate::solver::{solve, SolverConfig};

    fn scalar(l1: f64, l2: f64, t1: f64, t2: f64) -> QueueModel {
        QueueModel::new(
            MarkovianArrivalProcess::poisson(l1).unwrap(),
            MarkovianArrivalProcess::poisson(l2).unwrap(),
            t1,
            t2,
        )
        .unwrap()
    }

    #[test]
    fn poisson_table_row() {
        let sol = solve(&scalar(5.0, 41.0 / 9.0, 0.25, 1.0), &SolverConfig::default()).unwrap();
        let r = report(&sol);
        assert!((r.p_no_a - 0.2850).abs() < 5e-5);
        assert!((r.p_no_b - 0.8174).abs() < 5e-5);
        assert!((r.p_empty - 0.1024).abs() < 5e-5);
        assert!((r.mean_q_a - 3.3181).abs() < 5e-5);
        assert!((r.mean_q_b - 0.3851).abs() < 5e-5);
        assert!((r.mean_q_paper - 2.4429).abs() < 5e-4);
    }

    #[test]
    fn small_impatience_exponential_pair() {
        let sol = solve(&scalar(1.0, 2.0, 0.01, 0.02), &SolverConfig::default()).unwrap();
        assert!((report(&sol).mean_level_diff + 50.0).abs() < 5e-4);
    }

    #[test]
    fn symmetric_model_is_balanced() {
        let sol = solve(&scalar(2.0, 2.0, 0.5, 0.5), &SolverConfig::default()).unwrap();
        let r = report(&sol);
        assert!(r.mean_level_diff.abs() < 1e-12);
        assert!((r.p_no_a - r.p_no_b).abs() < 1e-12);
    }

    #[test]
    fn partition_and_composite_bounds() {
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
        for (t1, t2) in [(0.25, 1.0), (0.75, 1.0), (3.0, 0.1)] {
            let m = QueueModel::new(a.clone(), b.clone(), t1, t2).unwrap();
            let r = report(&solve(&m, &SolverConfig::default()).unwrap());
            assert!((r.p_no_a + r.p_no_b - r.p_empty - 1.0).abs() < 1e-10);
            assert!(r.p_empty <= r.p_no_a.min(r.p_no_b));
            assert!(r.mean_q_a >= 0.0 && r.mean_q_b >= 0.0);
            assert!(r.mean_q_paper <= r.mean_q_a + r.mean_q_b);
        }
    }
}
