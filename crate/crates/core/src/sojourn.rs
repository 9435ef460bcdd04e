//! Phase-type upper bound `ξ_A` on the sojourn time of an A-customer.
//!
//! `ξ_A` is the time the level process, started from the stationary
//! distribution restricted to levels `k ≥ 1`, needs to reach level 0. Its
//! generator `T` is the A side of the level process at levels `1..=K`, with
//! the last diagonal block censored through `R_K`. The mean comes from a
//! UL-type factorization `T = (I - R_U) U_D (I - G_L)` applied by two block
//! sweeps and one block-diagonal solve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{exp_action_op, right_divide, BlockTridiagonal, Lu, Matrix, RowOperator, Vector};
use crate::model::QueueModel;
use crate::solver::{solve, SolverConfig, TruncatedStationarySolution};

#[derive(Clone, Debug)]
pub struct SojournBound {
    pub k: usize,
    /// `P{ξ_A = 0} = Σ_{k≤0} π_k e`.
    pub alpha0: f64,
    /// Initial vectors `π_1, …, π_K`.
    pub alpha_vec: Vec<Vector>,
    /// `U_1, …, U_K`.
    pub u_family: Vec<Matrix>,
    /// `R_1, …, R_{K-1}` of the factorization.
    pub r_family: Vec<Matrix>,
    /// `G_2, …, G_K`.
    pub g_family: Vec<Matrix>,
    /// The truncated generator `T` on levels `1..=K`.
    pub t: BlockTridiagonal,
    pub mean_xi: f64,
    /// Initial mass beyond level `K` that the truncation drops.
    pub neglected_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SojournSummary {
    pub prob_immediate: f64,
    pub mean_xi: f64,
    pub k: usize,
    pub neglected_mass: f64,
}

/// Absorbing generator on levels `1..=k`; the last diagonal block is
/// `A_1^(k) + r_k A_2^(k+1)`.
pub fn absorbing_generator(model: &QueueModel, k: usize, r_k: &Matrix) -> BlockTridiagonal {
    let blocks: Vec<_> = (1..=k as i64 + 1).map(|l| model.blocks_at(l)).collect();
    let mut diag: Vec<Matrix> = blocks[..k].iter().map(|b| b.local.clone()).collect();
    diag[k - 1] += &r_k.matmul(&blocks[k].down);
    BlockTridiagonal {
        upper: blocks[..k - 1].iter().map(|b| b.up.clone()).collect(),
        lower: blocks[1..k].iter().map(|b| b.down.clone()).collect(),
        diag,
    }
}

/// Builds the bound at the solution's own truncation level.
pub fn build_bound(model: &QueueModel, sol: &TruncatedStationarySolution) -> Result<SojournBound> {
    build_bound_at(model, sol, sol.k_star)
}

/// Builds the bound truncated at level `k ≤ K*`.
pub fn build_bound_at(
    model: &QueueModel,
    sol: &TruncatedStationarySolution,
    k: usize,
) -> Result<SojournBound> {
    if k < 1 || k > sol.k_star {
        return Err(Error::InvalidArgument(format!(
            "sojourn truncation level must lie in 1..={}, got {k}",
            sol.k_star
        )));
    }
    let r_k = sol.r_at(k).expect("k within range");
    let t = absorbing_generator(model, k, r_k);

    // U_K = A_1^(K) + R_K A_2^(K+1) is the censored last diagonal block.
    let mut u_rev = vec![t.diag[k - 1].clone()];
    let mut r_rev = Vec::with_capacity(k.saturating_sub(1));
    for l in (1..k).rev() {
        let u_next = u_rev.last().expect("nonempty");
        let r_l = right_divide(&t.upper[l - 1], &u_next.scale(-1.0))?;
        let u_l = &t.diag[l - 1] + &r_l.matmul(&t.lower[l - 1]);
        r_rev.push(r_l);
        u_rev.push(u_l);
    }
    u_rev.reverse();
    r_rev.reverse();
    let u_family = u_rev;
    let r_family = r_rev;
    let u_lu: Vec<Lu> = u_family.iter().map(Lu::factor).collect::<Result<_>>()?;
    // G_l = (-U_l)^{-1} A_2^(l) for l = 2..=K.
    let g_family: Vec<Matrix> = (2..=k)
        .map(|l| u_lu[l - 1].solve_mat(&t.lower[l - 2]).scale(-1.0))
        .collect();

    let alpha_vec: Vec<Vector> = (1..=k as i64)
        .map(|l| sol.pi_at(l).expect("within range").clone())
        .collect();
    let alpha0: f64 = sol.levels().filter(|(l, _)| *l <= 0).map(|(_, p)| p.sum()).sum();
    let neglected_mass: f64 = sol
        .levels()
        .filter(|(l, _)| *l > k as i64)
        .map(|(_, p)| p.sum())
        .sum();

    let mut bound = SojournBound {
        k,
        alpha0,
        alpha_vec,
        u_family,
        r_family,
        g_family,
        t,
        mean_xi: 0.0,
        neglected_mass,
    };
    bound.mean_xi = bound.mean_from_factors(&u_lu);
    if !bound.mean_xi.is_finite() {
        return Err(Error::NonFinite("mean sojourn bound".into()));
    }
    Ok(bound)
}

/// `ξ_B` from the mirrored model, where B-customers play the A role.
pub fn build_bound_b(model: &QueueModel, config: &SolverConfig) -> Result<SojournBound> {
    let mirror = model.mirrored();
    let sol = solve(&mirror, config)?;
    build_bound(&mirror, &sol)
}

impl SojournBound {
    // -α (I - G_L)^{-1} U_D^{-1} (I - R_U)^{-1} e by substitution.
    fn mean_from_factors(&self, u_lu: &[Lu]) -> f64 {
        let k = self.k;
        let m = self.u_family[0].rows();
        let e = Vector::ones(m);
        let mut y = vec![e.clone(); k];
        for l in (0..k - 1).rev() {
            y[l] = e.add(&self.r_family[l].mul_vec(&y[l + 1]));
        }
        let z: Vec<Vector> = y
            .iter()
            .zip(u_lu)
            .map(|(y, lu)| Vector(lu.solve_vec(&y.0)))
            .collect();
        let mut v = Vec::with_capacity(k);
        v.push(z[0].clone());
        for l in 1..k {
            let next = z[l].add(&self.g_family[l - 1].mul_vec(&v[l - 1]));
            v.push(next);
        }
        -self.alpha_vec.iter().zip(&v).map(|(a, v)| a.dot(v)).sum::<f64>()
    }

    pub fn prob_immediate(&self) -> f64 {
        self.alpha0
    }

    /// Total initial mass on levels `1..=K`.
    pub fn initial_mass(&self) -> f64 {
        self.alpha_vec.iter().flat_map(|v| v.iter()).sum()
    }

    /// `F(t) = 1 - α_0 - α exp(Tt) e`, with `1 - α_0` taken as the truncated
    /// initial mass so that `F(0) = 0` exactly.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time must be nonnegative, got {t}"
            )));
        }
        let alpha = Vector(self.alpha_vec.iter().flat_map(|v| v.iter().copied()).collect());
        let evolved = exp_action_op(&self.t, &alpha, t)?;
        let start: f64 = alpha.iter().sum();
        let remaining: f64 = evolved.iter().sum();
        Ok(start - remaining)
    }

    /// `(I - R_U) U_D (I - G_L)` multiplied back out.
    pub fn reassemble(&self) -> BlockTridiagonal {
        let k = self.k;
        let diag = (0..k)
            .map(|l| {
                if l + 1 < k {
                    &self.u_family[l]
                        + &self.r_family[l]
                            .matmul(&self.u_family[l + 1])
                            .matmul(&self.g_family[l])
                } else {
                    self.u_family[l].clone()
                }
            })
            .collect();
        let upper = (0..k - 1)
            .map(|l| self.r_family[l].matmul(&self.u_family[l + 1]).scale(-1.0))
            .collect();
        let lower = (1..k)
            .map(|l| self.u_family[l].matmul(&self.g_family[l - 1]).scale(-1.0))
            .collect();
        BlockTridiagonal { lower, diag, upper }
    }

    pub fn summary(&self) -> SojournSummary {
        SojournSummary {
            prob_immediate: self.alpha0,
            mean_xi: self.mean_xi,
            k: self.k,
            neglected_mass: self.neglected_mass,
        }
    }

    /// Uniformization rate of `T`, exposed for callers sizing time grids.
    pub fn max_rate(&self) -> f64 {
        self.t.max_abs_diagonal()
    }
}
