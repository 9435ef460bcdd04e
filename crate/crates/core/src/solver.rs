//! Truncated stationary distribution of the level process.
//!
//! Each side of level 0 is a level-dependent QBD. Its rate matrices are
//! obtained at a deep level `K` by the Bright–Taylor doubling series and then
//! swept back to level 1. The three boundary vectors solve a small linear
//! system, and the rest of the distribution follows as matrix-geometric
//! products. `K` grows along a schedule until the mass on levels `±(K+1)`
//! drops below `epsilon`.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{right_divide, Lu, Matrix, Vector};
use crate::model::QueueModel;
use crate::stability::classify_model;

/// Hard cap on Bright–Taylor doublings.
pub const MAX_DOUBLINGS: u32 = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Stop once `‖π_{-K-1}‖₁ + ‖π_{K+1}‖₁ < epsilon`.
    pub epsilon: f64,
    /// Candidate truncation levels, strictly increasing, first entry ≥ 2.
    pub level_schedule: Vec<usize>,
    /// Bright–Taylor terms with ∞-norm below this end the series.
    pub series_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::linear(1e-20, 10, 50, 1e-14)
    }
}

impl SolverConfig {
    /// Schedule `ζ_n = step·(n+1)` for `n < steps`.
    pub fn linear(epsilon: f64, step: usize, steps: usize, series_tol: f64) -> Self {
        Self {
            epsilon,
            level_schedule: (1..=steps).map(|n| n * step).collect(),
            series_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.series_tol > 0.0) || !self.series_tol.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "series_tol must be positive, got {}",
                self.series_tol
            )));
        }
        match self.level_schedule.first() {
            None => return Err(Error::InvalidArgument("level schedule is empty".into())),
            Some(&first) if first < 2 => {
                return Err(Error::InvalidArgument(format!(
                    "first scheduled level must be at least 2, got {first}"
                )))
            }
            _ => {}
        }
        if self.level_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "level schedule must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Stationary vectors on levels `-K-1 ..= K+1` together with the rate matrices.
#[derive(Clone, Debug)]
pub struct TruncatedStationarySolution {
    pub k_star: usize,
    /// `R_1, …, R_K`: `π_{k+1} = π_k R_k` for `k ≥ 1`.
    pub r_plus: Vec<Matrix>,
    /// `ℝ_{-1}, …, ℝ_{-K}`: `π_{k-1} = π_k ℝ_k` for `k ≤ -1`.
    pub r_minus: Vec<Matrix>,
    /// `π_{-K-1}, …, π_{K+1}`.
    pub pi: Vec<Vector>,
    /// The unnormalized boundary vectors `(π̃_{-1}, π̃_0, π̃_1)`.
    pub boundary: [Vector; 3],
    pub c: f64,
    pub tail_mass: f64,
}

impl TruncatedStationarySolution {
    pub fn min_level(&self) -> i64 {
        -(self.k_star as i64) - 1
    }

    pub fn max_level(&self) -> i64 {
        self.k_star as i64 + 1
    }

    /// `π_k`, or `None` outside the stored range.
    pub fn pi_at(&self, k: i64) -> Option<&Vector> {
        if k < self.min_level() || k > self.max_level() {
            return None;
        }
        self.pi.get((k - self.min_level()) as usize)
    }

    /// Iterator over `(k, π_k)`.
    pub fn levels(&self) -> impl Iterator<Item = (i64, &Vector)> {
        let lo = self.min_level();
        self.pi.iter().enumerate().map(move |(i, p)| (lo + i as i64, p))
    }

    /// `R_k` for `k ≥ 1`.
    pub fn r_at(&self, k: usize) -> Option<&Matrix> {
        k.checked_sub(1).and_then(|i| self.r_plus.get(i))
    }

    /// `ℝ_k` for `k ≤ -1`.
    pub fn r_neg_at(&self, k: i64) -> Option<&Matrix> {
        if k >= 0 {
            return None;
        }
        self.r_minus.get((-k - 1) as usize)
    }

    pub fn total_mass(&self) -> f64 {
        self.pi.iter().map(Vector::sum).sum()
    }
}

/// One side of level 0 seen as a unilateral QBD indexed by depth `n ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Side {
    A,
    B,
}

pub(crate) struct SideBlocks<'a> {
    model: &'a QueueModel,
    side: Side,
}

impl<'a> SideBlocks<'a> {
    pub(crate) fn new(model: &'a QueueModel, side: Side) -> Self {
        Self { model, side }
    }

    fn level(&self, depth: i64) -> i64 {
        match self.side {
            Side::A => depth,
            Side::B => -depth,
        }
    }

    /// Transitions from depth `n` to `n+1`.
    pub(crate) fn away(&self, n: i64) -> Matrix {
        let b = self.model.blocks_at(self.level(n));
        match self.side {
            Side::A => b.up,
            Side::B => b.down,
        }
    }

    /// Transitions within depth `n`. Depth 0 gives this side's share of the boundary.
    pub(crate) fn local(&self, n: i64) -> Matrix {
        if n == 0 {
            return match self.side {
                Side::A => self.model.a_boundary_local(),
                Side::B => self.model.b_boundary_local(),
            };
        }
        self.model.blocks_at(self.level(n)).local
    }

    /// Transitions from depth `n` to `n-1`.
    pub(crate) fn toward(&self, n: i64) -> Matrix {
        let b = self.model.blocks_at(self.level(n));
        match self.side {
            Side::A => b.down,
            Side::B => b.up,
        }
    }
}

/// Memoized `U_n^l` and `D_n^l` of the Bright–Taylor doubling scheme.
struct Doubling<'a> {
    blocks: SideBlocks<'a>,
    up: HashMap<(u32, i64), Matrix>,
    down: HashMap<(u32, i64), Matrix>,
}

fn depth_offset(n: i64, mult: i64, l: u32) -> Result<i64> {
    1i64.checked_shl(l)
        .filter(|_| l < 63)
        .and_then(|p| p.checked_mul(mult))
        .and_then(|d| n.checked_add(d))
        .filter(|&v| v >= 0)
        .ok_or_else(|| {
            Error::NonConvergent(format!(
                "Bright–Taylor recursion ran past representable levels at doubling {l}"
            ))
        })
}

impl<'a> Doubling<'a> {
    fn new(blocks: SideBlocks<'a>) -> Self {
        Self {
            blocks,
            up: HashMap::new(),
            down: HashMap::new(),
        }
    }

    // Return-excursion correction at depth t: [I - U_t D_{t+2^l} - D_t U_{t-2^l}]^{-1}
    // expressed through a right division.
    fn bracket(&mut self, l: u32, t: i64) -> Result<Matrix> {
        let u_t = self.u(l, t)?;
        let d_above = self.d(l, depth_offset(t, 1, l)?)?;
        let d_t = self.d(l, t)?;
        let u_below = self.u(l, depth_offset(t, -1, l)?)?;
        let n = u_t.rows();
        let inner = &(&Matrix::identity(n) - &u_t.matmul(&d_above)) - &d_t.matmul(&u_below);
        Ok(inner)
    }

    fn u(&mut self, l: u32, n: i64) -> Result<Matrix> {
        if let Some(m) = self.up.get(&(l, n)) {
            return Ok(m.clone());
        }
        let value = if l == 0 {
            let away = self.blocks.away(n);
            let local = self.blocks.local(n + 1);
            right_divide(&away, &local.scale(-1.0))?
        } else {
            let p = l - 1;
            let first = self.u(p, n)?;
            let second = self.u(p, depth_offset(n, 1, p)?)?;
            let inner = self.bracket(p, depth_offset(n, 2, p)?)?;
            right_divide(&first.matmul(&second), &inner)?
        };
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("U at doubling {l}, depth {n}")));
        }
        self.up.insert((l, n), value.clone());
        Ok(value)
    }

    fn d(&mut self, l: u32, n: i64) -> Result<Matrix> {
        if let Some(m) = self.down.get(&(l, n)) {
            return Ok(m.clone());
        }
        let value = if l == 0 {
            let toward = self.blocks.toward(n);
            let local = self.blocks.local(n - 1);
            right_divide(&toward, &local.scale(-1.0))?
        } else {
            let p = l - 1;
            let first = self.d(p, n)?;
            let second = self.d(p, depth_offset(n, -1, p)?)?;
            let inner = self.bracket(p, depth_offset(n, -2, p)?)?;
            right_divide(&first.matmul(&second), &inner)?
        };
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("D at doubling {l}, depth {n}")));
        }
        self.down.insert((l, n), value.clone());
        Ok(value)
    }

    /// `R_n = Σ_l U_n^l D_{n+2^l}^{l-1} ⋯ D_{n+2}^0`.
    fn r(&mut self, n: i64, tol: f64) -> Result<Matrix> {
        let mut total = self.u(0, n)?;
        // tail = D_{n+2^l}^{l-1} ⋯ D_{n+2}^0, built up one factor per doubling.
        let mut tail: Option<Matrix> = None;
        for l in 1..=MAX_DOUBLINGS {
            let factor = self.d(l - 1, depth_offset(n, 1, l)?)?;
            let next_tail = match &tail {
                None => factor,
                Some(t) => factor.matmul(t),
            };
            let term = self.u(l, n)?.matmul(&next_tail);
            total += &term;
            if term.norm_inf() < tol {
                return Ok(total);
            }
            tail = Some(next_tail);
        }
        Err(Error::NonConvergent(format!(
            "Bright–Taylor series at depth {n} still above {tol:e} after {MAX_DOUBLINGS} doublings"
        )))
    }
}

fn check_depth(k: i64) -> Result<()> {
    if k < 1 {
        return Err(Error::InvalidArgument(format!(
            "rate matrices start at depth 1, got {k}"
        )));
    }
    Ok(())
}

pub(crate) fn bright_taylor_side(model: &QueueModel, side: Side, depth: i64, tol: f64) -> Result<Matrix> {
    check_depth(depth)?;
    Doubling::new(SideBlocks::new(model, side)).r(depth, tol)
}

/// `R_k` for `k ≥ 1` by the Bright–Taylor doubling series.
pub fn bright_taylor_r(model: &QueueModel, k: i64, tol: f64) -> Result<Matrix> {
    bright_taylor_side(model, Side::A, k, tol)
}

/// `ℝ_k` for `k ≤ -1` by the Bright–Taylor doubling series.
pub fn bright_taylor_r_neg(model: &QueueModel, k: i64, tol: f64) -> Result<Matrix> {
    bright_taylor_side(model, Side::B, -k, tol)
}

/// `R_{n-1} = away(n-1)·(-local(n) - R_n·toward(n+1))⁻¹`, swept from depth
/// `n = terminal_depth` down to 1. Returns `R_1, …, R_terminal`.
pub(crate) fn backward_sweep_side(
    model: &QueueModel,
    side: Side,
    terminal_depth: usize,
    r_terminal: Matrix,
) -> Result<Vec<Matrix>> {
    check_depth(terminal_depth as i64)?;
    let blocks = SideBlocks::new(model, side);
    let mut out = vec![r_terminal];
    for n in (1..terminal_depth as i64).rev() {
        let next = out.last().expect("nonempty");
        let denom = &(-&blocks.local(n + 1)) - &next.matmul(&blocks.toward(n + 2));
        let r = right_divide(&blocks.away(n), &denom)?;
        if !r.is_finite() {
            return Err(Error::NonFinite(format!("rate matrix at depth {n}")));
        }
        out.push(r);
    }
    out.reverse();
    Ok(out)
}

/// `R_1, …, R_K` from a terminal `R_K`.
pub fn backward_sweep(model: &QueueModel, k: usize, r_terminal: Matrix) -> Result<Vec<Matrix>> {
    backward_sweep_side(model, Side::A, k, r_terminal)
}

/// `ℝ_{-1}, …, ℝ_{-K}` from a terminal `ℝ_{-K}`.
pub fn backward_sweep_neg(model: &QueueModel, k: usize, r_terminal: Matrix) -> Result<Vec<Matrix>> {
    backward_sweep_side(model, Side::B, k, r_terminal)
}

/// The boundary system `x·M = 0` for `x = (π̃_{-1}, π̃_0, π̃_1)`.
pub fn boundary_matrix(model: &QueueModel, r1: &Matrix, r_neg1: &Matrix) -> Matrix {
    let m = model.block_order();
    let b_neg2 = model.blocks_at(-2);
    let b_neg1 = model.blocks_at(-1);
    let b0 = model.blocks_at(0);
    let b1 = model.blocks_at(1);
    let b2 = model.blocks_at(2);
    let mut mat = Matrix::zeros(3 * m, 3 * m);
    mat.set_block(0, 0, &(&b_neg1.local + &r_neg1.matmul(&b_neg2.up)));
    mat.set_block(0, m, &b_neg1.up);
    mat.set_block(m, 0, &b0.down);
    mat.set_block(m, m, &b0.local);
    mat.set_block(m, 2 * m, &b0.up);
    mat.set_block(2 * m, m, &b1.down);
    mat.set_block(2 * m, 2 * m, &(&b1.local + &r1.matmul(&b2.down)));
    mat
}

/// Solves the boundary system with its last equation replaced by
/// `π̃_{-1}e + π̃_0 e + π̃_1 e = 1`.
pub fn solve_boundary(model: &QueueModel, r1: &Matrix, r_neg1: &Matrix) -> Result<[Vector; 3]> {
    let m = model.block_order();
    let n = 3 * m;
    let mut a = boundary_matrix(model, r1, r_neg1).transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let x = Lu::factor(&a)?.solve_vec(&rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("boundary vectors".into()));
    }
    Ok([
        Vector(x[..m].to_vec()),
        Vector(x[m..2 * m].to_vec()),
        Vector(x[2 * m..].to_vec()),
    ])
}

/// `π̃ R_1 ⋯ R_{j}` for `j = 0 ..= rs.len()`.
fn geometric_chain(start: &Vector, rs: &[Matrix]) -> Vec<Vector> {
    let mut out = Vec::with_capacity(rs.len() + 1);
    out.push(start.clone());
    for r in rs {
        let next = out.last().expect("nonempty").mul_mat(r);
        out.push(next);
    }
    out
}

/// Normalizing constant over levels `-K-1 ..= K+1`.
pub fn normalize(boundary: &[Vector; 3], r_plus: &[Matrix], r_minus: &[Matrix]) -> f64 {
    let neg: f64 = geometric_chain(&boundary[0], r_minus)
        .iter()
        .skip(1)
        .map(Vector::sum)
        .sum();
    let pos: f64 = geometric_chain(&boundary[2], r_plus)
        .iter()
        .skip(1)
        .map(Vector::sum)
        .sum();
    let centre: f64 = boundary.iter().map(Vector::sum).sum();
    1.0 / (neg + centre + pos)
}

fn side_rates(model: &QueueModel, side: Side, k: usize, tol: f64) -> Result<Vec<Matrix>> {
    let terminal = bright_taylor_side(model, side, k as i64, tol)?;
    backward_sweep_side(model, side, k, terminal)
}

/// Assembles the truncated solution at a fixed level `k`. Does not check
/// the stop condition; [`solve`] does.
pub fn solve_at(model: &QueueModel, k: usize, config: &SolverConfig) -> Result<TruncatedStationarySolution> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "truncation level must be at least 2, got {k}"
        )));
    }
    let tol = config.series_tol;
    let (r_plus, r_minus) = std::thread::scope(|s| {
        let minus = s.spawn(|| side_rates(model, Side::B, k, tol));
        let plus = side_rates(model, Side::A, k, tol);
        let minus = minus.join().expect("B-side rate computation panicked");
        (plus, minus)
    });
    let (r_plus, r_minus) = (r_plus?, r_minus?);
    let boundary = solve_boundary(model, &r_plus[0], &r_minus[0])?;
    let c = normalize(&boundary, &r_plus, &r_minus);
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::NonFinite(format!("normalizing constant {c}")));
    }
    // Scale first so that every stored π_k is exactly π_{±1} times the R products.
    let mut neg = geometric_chain(&boundary[0].scale(c), &r_minus);
    neg.reverse();
    let pos = geometric_chain(&boundary[2].scale(c), &r_plus);
    let pi: Vec<Vector> = neg
        .into_iter()
        .chain(std::iter::once(boundary[1].scale(c)))
        .chain(pos)
        .collect();
    let tail_mass = pi.first().map_or(0.0, Vector::norm1) + pi.last().map_or(0.0, Vector::norm1);
    Ok(TruncatedStationarySolution {
        k_star: k,
        r_plus,
        r_minus,
        pi,
        boundary,
        c,
        tail_mass,
    })
}

/// Walks the level schedule and returns the first truncation whose tail
/// mass is below `config.epsilon`.
pub fn solve(model: &QueueModel, config: &SolverConfig) -> Result<TruncatedStationarySolution> {
    config.validate()?;
    let class = classify_model(model)?;
    if !class.is_positive_recurrent() {
        return Err(Error::NotStable(class.to_string()));
    }
    let mut tails = Vec::new();
    for &k in &config.level_schedule {
        let sol = solve_at(model, k, config)?;
        if sol.tail_mass < config.epsilon {
            return Ok(sol);
        }
        tails.push(sol.tail_mass);
    }
    Err(Error::ScheduleExhausted {
        last_level: *config.level_schedule.last().expect("validated nonempty"),
        tail_masses: tails,
    })
}
