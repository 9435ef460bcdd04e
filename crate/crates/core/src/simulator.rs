//! Discrete-event simulation of the double-ended queue.
//!
//! Each MAP keeps its own exponential clock for the next phase transition.
//! Waiting customers of the nonempty side share one abandonment clock of
//! rate `n·θ`, and the victim is drawn uniformly. Arrivals are matched first
//! come, first matched. Every source of randomness has its own ChaCha stream
//! derived from the seed, so runs are reproducible.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::map::MarkovianArrivalProcess;
use crate::model::QueueModel;

const STREAM_A: u64 = 0;
const STREAM_B: u64 = 1;
const STREAM_ABANDON: u64 = 2;
const STREAM_VICTIM: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub batches: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 1e6,
            warmup: 1e4,
            seed: 1,
            batches: 20,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if !(self.warmup >= 0.0) || self.warmup >= self.horizon {
            return Err(Error::InvalidArgument(format!(
                "warmup must lie in [0, horizon), got {} with horizon {}",
                self.warmup, self.horizon
            )));
        }
        if self.batches < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 batches, got {}",
                self.batches
            )));
        }
        Ok(())
    }
}

/// A point estimate with the half-width of its 95% confidence interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn covers(&self, value: f64, widen: f64) -> bool {
        (value - self.estimate).abs() <= widen * self.half_width
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub p_no_a: Estimate,
    pub p_no_b: Estimate,
    pub p_empty: Estimate,
    pub mean_q_a: Estimate,
    pub mean_q_b: Estimate,
    pub mean_q_paper: Estimate,
    pub mean_level_diff: Estimate,
    pub mean_q_total_abs: Estimate,
    /// Mean time from arrival to match or abandonment of an A-customer.
    pub mean_wait_a: Estimate,
    pub mean_wait_b: Estimate,
    /// Fraction of A-customers leaving by abandonment.
    pub abandon_frac_a: f64,
    pub abandon_frac_b: f64,
    pub events: u64,
    pub batches: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    /// A phase change of the A-process, with or without an arrival.
    PhaseA {
        arrival: bool,
    },
    PhaseB {
        arrival: bool,
    },
    AbandonA,
    AbandonB,
}

/// Exit of one customer, reported by [`Simulation::step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Departure {
    pub side_a: bool,
    pub wait: f64,
    pub abandoned: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub queue_a: usize,
    pub queue_b: usize,
    pub phase_a: usize,
    pub phase_b: usize,
}

impl SimState {
    pub fn level(&self) -> i64 {
        self.queue_a as i64 - self.queue_b as i64
    }
}

// Outgoing transitions of one phase: (cumulative rate, target, arrival?).
struct PhaseTable {
    total: Vec<f64>,
    rows: Vec<Vec<(f64, usize, bool)>>,
}

impl PhaseTable {
    fn new(map: &MarkovianArrivalProcess) -> Self {
        let m = map.order();
        let mut rows = Vec::with_capacity(m);
        let mut total = Vec::with_capacity(m);
        for i in 0..m {
            let mut acc = 0.0;
            let mut row = Vec::new();
            for j in 0..m {
                if j != i && map.c()[(i, j)] > 0.0 {
                    acc += map.c()[(i, j)];
                    row.push((acc, j, false));
                }
                if map.d()[(i, j)] > 0.0 {
                    acc += map.d()[(i, j)];
                    row.push((acc, j, true));
                }
            }
            total.push(-map.c()[(i, i)]);
            rows.push(row);
        }
        Self { total, rows }
    }

    fn pick(&self, phase: usize, u: f64) -> (usize, bool) {
        let row = &self.rows[phase];
        let target = u * row.last().expect("phase has outgoing transitions").0;
        let idx = row.partition_point(|(c, _, _)| *c <= target).min(row.len() - 1);
        (row[idx].1, row[idx].2)
    }
}

/// The event loop. Exposed so callers can step it and inspect the state.
pub struct Simulation {
    table_a: PhaseTable,
    table_b: PhaseTable,
    theta1: f64,
    theta2: f64,
    rng_a: ChaCha8Rng,
    rng_b: ChaCha8Rng,
    rng_abandon: ChaCha8Rng,
    rng_victim: ChaCha8Rng,
    time: f64,
    phase_a: usize,
    phase_b: usize,
    queue_a: VecDeque<f64>,
    queue_b: VecDeque<f64>,
    next_a: f64,
    next_b: f64,
    next_abandon: f64,
    departures: Vec<Departure>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn draw_exp(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    let e: f64 = rng.sample(Exp1);
    e / rate
}

fn draw_phase(rng: &mut ChaCha8Rng, model_alpha: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, a) in model_alpha.iter().enumerate() {
        acc += a;
        if u < acc {
            return i;
        }
    }
    model_alpha.len() - 1
}

impl Simulation {
    /// Starts empty at time 0 with phases drawn from the stationary phase distributions.
    pub fn new(model: &QueueModel, seed: u64) -> Result<Self> {
        let mut rng_a = stream(seed, STREAM_A);
        let mut rng_b = stream(seed, STREAM_B);
        let phase_a = draw_phase(&mut rng_a, &model.map_a.summarize()?.alpha);
        let phase_b = draw_phase(&mut rng_b, &model.map_b.summarize()?.alpha);
        let mut sim = Self {
            table_a: PhaseTable::new(&model.map_a),
            table_b: PhaseTable::new(&model.map_b),
            theta1: model.theta1,
            theta2: model.theta2,
            rng_a,
            rng_b,
            rng_abandon: stream(seed, STREAM_ABANDON),
            rng_victim: stream(seed, STREAM_VICTIM),
            time: 0.0,
            phase_a,
            phase_b,
            queue_a: VecDeque::new(),
            queue_b: VecDeque::new(),
            next_a: 0.0,
            next_b: 0.0,
            next_abandon: f64::INFINITY,
            departures: Vec::new(),
        };
        sim.next_a = draw_exp(&mut sim.rng_a, sim.table_a.total[phase_a]);
        sim.next_b = draw_exp(&mut sim.rng_b, sim.table_b.total[phase_b]);
        Ok(sim)
    }

    pub fn state(&self) -> SimState {
        SimState {
            time: self.time,
            queue_a: self.queue_a.len(),
            queue_b: self.queue_b.len(),
            phase_a: self.phase_a,
            phase_b: self.phase_b,
        }
    }

    /// Time of the next event.
    pub fn next_event_time(&self) -> f64 {
        self.next_a.min(self.next_b).min(self.next_abandon)
    }

    /// Customers that left during the last [`step`](Self::step).
    pub fn departures(&self) -> &[Departure] {
        &self.departures
    }

    fn reset_abandon_clock(&mut self) {
        let rate = self.queue_a.len() as f64 * self.theta1 + self.queue_b.len() as f64 * self.theta2;
        self.next_abandon = self.time + draw_exp(&mut self.rng_abandon, rate);
    }

    fn arrive(&mut self, side_a: bool) {
        let now = self.time;
        let (own, other) = if side_a {
            (&mut self.queue_a, &mut self.queue_b)
        } else {
            (&mut self.queue_b, &mut self.queue_a)
        };
        if let Some(t) = other.pop_front() {
            self.departures.push(Departure {
                side_a,
                wait: 0.0,
                abandoned: false,
            });
            self.departures.push(Departure {
                side_a: !side_a,
                wait: now - t,
                abandoned: false,
            });
        } else {
            own.push_back(now);
        }
        self.reset_abandon_clock();
    }

    /// Advances to the next event and applies it.
    pub fn step(&mut self) -> Event {
        self.departures.clear();
        let t = self.next_event_time();
        self.time = t;
        if t == self.next_a {
            let u: f64 = self.rng_a.gen();
            let (target, arrival) = self.table_a.pick(self.phase_a, u);
            self.phase_a = target;
            self.next_a = t + draw_exp(&mut self.rng_a, self.table_a.total[target]);
            if arrival {
                self.arrive(true);
            }
            Event::PhaseA { arrival }
        } else if t == self.next_b {
            let u: f64 = self.rng_b.gen();
            let (target, arrival) = self.table_b.pick(self.phase_b, u);
            self.phase_b = target;
            self.next_b = t + draw_exp(&mut self.rng_b, self.table_b.total[target]);
            if arrival {
                self.arrive(false);
            }
            Event::PhaseB { arrival }
        } else {
            let side_a = !self.queue_a.is_empty();
            let queue = if side_a {
                &mut self.queue_a
            } else {
                &mut self.queue_b
            };
            let idx = self.rng_victim.gen_range(0..queue.len());
            let arrived = queue.remove(idx).expect("victim index in range");
            self.departures.push(Departure {
                side_a,
                wait: t - arrived,
                abandoned: true,
            });
            self.reset_abandon_clock();
            if side_a {
                Event::AbandonA
            } else {
                Event::AbandonB
            }
        }
    }
}

#[derive(Clone, Default)]
struct Batch {
    span: f64,
    no_a: f64,
    no_b: f64,
    empty: f64,
    q_a: f64,
    q_b: f64,
    wait_a: f64,
    exits_a: u64,
    wait_b: f64,
    exits_b: u64,
}

impl Batch {
    fn add_time(&mut self, dt: f64, qa: usize, qb: usize) {
        self.span += dt;
        if qa == 0 {
            self.no_a += dt;
        }
        if qb == 0 {
            self.no_b += dt;
        }
        if qa == 0 && qb == 0 {
            self.empty += dt;
        }
        self.q_a += dt * qa as f64;
        self.q_b += dt * qb as f64;
    }
}

/// Batch-means interval. When every batch gives the same value the sample
/// variance carries no information, so the half-width falls back to the
/// rule-of-three bound `3 / observations`.
fn confidence(samples: &[f64], observations: u64) -> Estimate {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Estimate {
            estimate: mean,
            half_width: f64::INFINITY,
        };
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let half_width = t * (var / n as f64).sqrt();
    Estimate {
        estimate: mean,
        half_width: if half_width > 0.0 {
            half_width
        } else {
            3.0 / observations.max(1) as f64
        },
    }
}

/// Runs one replication and forms batch-means confidence intervals over `(warmup, horizon]`.
pub fn simulate(model: &QueueModel, config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let mut sim = Simulation::new(model, config.seed)?;
    let nb = config.batches;
    let width = (config.horizon - config.warmup) / nb as f64;
    let batch_of = |t: f64| (((t - config.warmup) / width) as usize).min(nb - 1);
    let mut batches = vec![Batch::default(); nb];
    let (mut arrivals_a, mut arrivals_b, mut quit_a, mut quit_b) = (0u64, 0u64, 0u64, 0u64);
    let mut events = 0u64;
    let mut observed = 0u64;
    let mut last = 0.0f64;
    loop {
        let next = sim.next_event_time().min(config.horizon);
        let (qa, qb) = (sim.queue_a.len(), sim.queue_b.len());
        // Spread the holding interval [last, next) over the batches it touches.
        let mut from = last.max(config.warmup);
        while from < next {
            let b = batch_of(from);
            let edge = if b + 1 == nb {
                config.horizon
            } else {
                config.warmup + (b + 1) as f64 * width
            };
            let to = next.min(edge);
            if to <= from {
                break;
            }
            batches[b].add_time(to - from, qa, qb);
            from = to;
        }
        if sim.next_event_time() > config.horizon {
            break;
        }
        let event = sim.step();
        events += 1;
        last = sim.time;
        if sim.time < config.warmup {
            continue;
        }
        observed += 1;
        match event {
            Event::PhaseA { arrival: true } => arrivals_a += 1,
            Event::PhaseB { arrival: true } => arrivals_b += 1,
            _ => {}
        }
        let b = batch_of(sim.time);
        for d in sim.departures() {
            if d.side_a {
                batches[b].wait_a += d.wait;
                batches[b].exits_a += 1;
                quit_a += d.abandoned as u64;
            } else {
                batches[b].wait_b += d.wait;
                batches[b].exits_b += 1;
                quit_b += d.abandoned as u64;
            }
        }
    }

    let series = |f: &dyn Fn(&Batch) -> f64| -> Vec<f64> { batches.iter().map(f).collect() };
    let p_no_a = series(&|b| b.no_a / b.span);
    let p_no_b = series(&|b| b.no_b / b.span);
    let q_a = series(&|b| b.q_a / b.span);
    let q_b = series(&|b| b.q_b / b.span);
    let paper: Vec<f64> = (0..nb)
        .map(|i| q_a[i] * (1.0 - p_no_a[i]) + q_b[i] * (1.0 - p_no_b[i]))
        .collect();
    let diff: Vec<f64> = (0..nb).map(|i| q_a[i] - q_b[i]).collect();
    let total: Vec<f64> = (0..nb).map(|i| q_a[i] + q_b[i]).collect();
    let waits = |sel: &dyn Fn(&Batch) -> (f64, u64)| -> Vec<f64> {
        batches
            .iter()
            .map(sel)
            .filter(|(_, n)| *n > 0)
            .map(|(w, n)| w / n as f64)
            .collect()
    };
    let wait_a = waits(&|b| (b.wait_a, b.exits_a));
    let wait_b = waits(&|b| (b.wait_b, b.exits_b));
    let frac = |quit: u64, arrivals: u64| {
        if arrivals == 0 {
            0.0
        } else {
            quit as f64 / arrivals as f64
        }
    };
    let exits_a: u64 = batches.iter().map(|b| b.exits_a).sum();
    let exits_b: u64 = batches.iter().map(|b| b.exits_b).sum();
    let empty_ci = |v: Vec<f64>, exits: u64| {
        if v.is_empty() {
            Estimate {
                estimate: f64::NAN,
                half_width: f64::INFINITY,
            }
        } else {
            confidence(&v, exits)
        }
    };
    Ok(SimReport {
        p_no_a: confidence(&p_no_a, observed),
        p_no_b: confidence(&p_no_b, observed),
        p_empty: confidence(&series(&|b| b.empty / b.span), observed),
        mean_q_a: confidence(&q_a, observed),
        mean_q_b: confidence(&q_b, observed),
        mean_q_paper: confidence(&paper, observed),
        mean_level_diff: confidence(&diff, observed),
        mean_q_total_abs: confidence(&total, observed),
        mean_wait_a: empty_ci(wait_a, exits_a),
        mean_wait_b: empty_ci(wait_b, exits_b),
        abandon_frac_a: frac(quit_a, arrivals_a),
        abandon_frac_b: frac(quit_b, arrivals_b),
        events,
        batches: nb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn scalar(l1: f64, l2: f64, t1: f64, t2: f64) -> QueueModel {
        QueueModel::new(
            MarkovianArrivalProcess::poisson(l1).unwrap(),
            MarkovianArrivalProcess::poisson(l2).unwrap(),
            t1,
            t2,
        )
        .unwrap()
    }

    fn order2(t1: f64, t2: f64) -> QueueModel {
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
    fn constant_batches_fall_back_to_rule_of_three() {
        let e = confidence(&[1.0; 20], 1000);
        assert_eq!(e.estimate, 1.0);
        assert!((e.half_width - 3e-3).abs() < 1e-15);
        let e = confidence(&[1.0, 2.0, 3.0], 1000);
        assert!(e.half_width > 1.0);
    }

    #[test]
    fn never_both_queues_nonempty() {
        let mut sim = Simulation::new(&order2(0.25, 1.0), 3).unwrap();
        for _ in 0..200_000 {
            sim.step();
            let s = sim.state();
            assert!(s.queue_a == 0 || s.queue_b == 0);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = SimConfig {
            horizon: 2_000.0,
            warmup: 100.0,
            seed: 42,
            batches: 10,
        };
        let m = order2(0.75, 1.0);
        assert_eq!(simulate(&m, &cfg).unwrap(), simulate(&m, &cfg).unwrap());
        let other = SimConfig {
            seed: 43,
            ..cfg.clone()
        };
        assert_ne!(simulate(&m, &cfg).unwrap(), simulate(&m, &other).unwrap());
    }

    #[test]
    fn huge_impatience_empties_the_system() {
        let cfg = SimConfig {
            horizon: 20_000.0,
            warmup: 100.0,
            seed: 7,
            batches: 10,
        };
        let r = simulate(&scalar(1.0, 1.0, 1e4, 1e4), &cfg).unwrap();
        assert!(r.p_empty.estimate > 0.99);
    }

    #[test]
    fn short_runs_match_birth_death_means() {
        let cfg = SimConfig {
            horizon: 100_000.0,
            warmup: 1_000.0,
            seed: 11,
            batches: 20,
        };
        let r = simulate(&scalar(1.0, 2.0, 1.0, 2.0), &cfg).unwrap();
        let exact = crate::oracle::birth_death_solve(1.0, 2.0, 1.0, 2.0, 60)
            .unwrap()
            .mean_level();
        assert!(
            r.mean_level_diff.covers(exact, 4.0),
            "{:?} vs {exact}",
            r.mean_level_diff
        );
        assert!((0.0..=1.0).contains(&r.p_no_a.estimate));
        assert!(r.abandon_frac_a > 0.0 && r.abandon_frac_a < 1.0);
        assert!(r.mean_wait_a.half_width >= 0.0);
    }

    #[test]
    fn config_errors() {
        let bad = SimConfig {
            horizon: 10.0,
            warmup: 20.0,
            seed: 1,
            batches: 20,
        };
        assert!(simulate(&scalar(1.0, 1.0, 1.0, 1.0), &bad).is_err());
        let bad = SimConfig {
            batches: 1,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn phase_transitions_follow_rates() {
        // Erlang(2, 4): phase 0 always moves to 1 silently, phase 1 always arrives back to 0.
        let e = MarkovianArrivalProcess::erlang(2, 4.0).unwrap();
        let t = PhaseTable::new(&e);
        assert_eq!(t.total, vec![4.0, 4.0]);
        for u in [0.0, 0.3, 0.999] {
            assert_eq!(t.pick(0, u), (1, false));
            assert_eq!(t.pick(1, u), (0, true));
        }
    }
}
