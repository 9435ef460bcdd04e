//! Markovian arrival processes.

use serde::Serialize;

use crate::error::{MapError, Result};
use crate::linalg::{is_irreducible, stationary_vector, Matrix, Vector};

/// Tolerance on `|(C+D)·e|` per row, scaled by the row's magnitude when that exceeds one.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A validated MAP `(C, D)` of order `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovianArrivalProcess {
    c: Matrix,
    d: Matrix,
}

/// Stationary phase distribution and arrival rate of a MAP.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapSummary {
    pub alpha: Vec<f64>,
    pub rate: f64,
}

impl MarkovianArrivalProcess {
    /// Checks every MAP condition and returns the process unchanged. Nothing is repaired.
    pub fn validate(c: Matrix, d: Matrix) -> std::result::Result<Self, MapError> {
        if !c.is_square() || !d.is_square() || c.rows() != d.rows() {
            return Err(MapError::Shape(format!(
                "C is {}x{}, D is {}x{}",
                c.rows(),
                c.cols(),
                d.rows(),
                d.cols()
            )));
        }
        if c.rows() == 0 {
            return Err(MapError::Shape("order 0".into()));
        }
        if !c.is_finite() {
            return Err(MapError::NonFinite("C"));
        }
        if !d.is_finite() {
            return Err(MapError::NonFinite("D"));
        }
        let m = c.rows();
        for i in 0..m {
            for j in 0..m {
                if d[(i, j)] < 0.0 {
                    return Err(MapError::NegativeEntry {
                        matrix: "D",
                        row: i,
                        col: j,
                        value: d[(i, j)],
                    });
                }
                if i != j && c[(i, j)] < 0.0 {
                    return Err(MapError::NegativeEntry {
                        matrix: "C",
                        row: i,
                        col: j,
                        value: c[(i, j)],
                    });
                }
            }
        }
        let generator = &c + &d;
        let mut worst: Option<(usize, f64, f64)> = None;
        for i in 0..m {
            let sum: f64 = generator.row(i).iter().sum();
            let scale = c.row(i).iter().chain(d.row(i)).map(|v| v.abs()).sum::<f64>();
            let excess = sum.abs() / scale.max(1.0);
            if excess > ROW_SUM_TOL && worst.is_none_or(|w| excess > w.2) {
                worst = Some((i, sum, excess));
            }
        }
        if let Some((row, sum, _)) = worst {
            return Err(MapError::RowSumViolation { row, sum });
        }
        for i in 0..m {
            if c[(i, i)] >= 0.0 {
                return Err(MapError::NonNegativeDiagonal {
                    row: i,
                    value: c[(i, i)],
                });
            }
        }
        if d.max_abs() == 0.0 {
            return Err(MapError::ZeroArrivalMatrix);
        }
        if !is_irreducible(&generator) {
            return Err(MapError::Reducible);
        }
        Ok(Self { c, d })
    }

    /// Poisson process: `C = [-rate]`, `D = [rate]`.
    pub fn poisson(rate: f64) -> std::result::Result<Self, MapError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(MapError::Parameter(format!(
                "Poisson rate must be positive and finite, got {rate}"
            )));
        }
        Self::validate(Matrix::from_diagonal(&[-rate]), Matrix::from_diagonal(&[rate]))
    }

    /// Erlang renewal process with `stages` phases, each left at `stage_rate`.
    pub fn erlang(stages: usize, stage_rate: f64) -> std::result::Result<Self, MapError> {
        if stages == 0 {
            return Err(MapError::Parameter("Erlang needs at least one stage".into()));
        }
        if !(stage_rate > 0.0) || !stage_rate.is_finite() {
            return Err(MapError::Parameter(format!(
                "Erlang stage rate must be positive and finite, got {stage_rate}"
            )));
        }
        let mut c = Matrix::zeros(stages, stages);
        let mut d = Matrix::zeros(stages, stages);
        for i in 0..stages {
            c[(i, i)] = -stage_rate;
            if i + 1 < stages {
                c[(i, i + 1)] = stage_rate;
            }
        }
        d[(stages - 1, 0)] = stage_rate;
        Self::validate(c, d)
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn d(&self) -> &Matrix {
        &self.d
    }

    pub fn order(&self) -> usize {
        self.c.rows()
    }

    /// The phase generator `C + D`.
    pub fn generator(&self) -> Matrix {
        &self.c + &self.d
    }

    pub fn summarize(&self) -> Result<MapSummary> {
        let alpha = stationary_vector(&self.generator())?;
        let rate = alpha.mul_mat(&self.d).sum();
        Ok(MapSummary { alpha: alpha.0, rate })
    }

    /// Stationary phase distribution as a [`Vector`].
    pub fn alpha(&self) -> Result<Vector> {
        Ok(Vector(self.summarize()?.alpha))
    }

    pub fn rate(&self) -> Result<f64> {
        Ok(self.summarize()?.rate)
    }
}
