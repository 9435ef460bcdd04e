// Mean level difference for Erlang(2) and exponential interarrival times.

use std::error::Error;

use matchq::{report, solve, MarkovianArrivalProcess, QueueModel, SolverConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let inputs = [
        (
            "Erlang(2)",
            MarkovianArrivalProcess::erlang(2, 2.0)?,
            MarkovianArrivalProcess::erlang(2, 4.0)?,
        ),
        (
            "Exponential",
            MarkovianArrivalProcess::poisson(1.0)?,
            MarkovianArrivalProcess::poisson(2.0)?,
        ),
    ];
    for (name, a, b) in &inputs {
        for (t1, t2) in [(1.0, 2.0), (0.1, 0.2), (0.01, 0.02)] {
            let model = QueueModel::new(a.clone(), b.clone(), t1, t2)?;
            let sol = solve(&model, &SolverConfig::default())?;
            let r = report(&sol);
            let theta = format!("({t1}, {t2})");
            println!(
                "{name:<12} {theta:<13} E[N] = {:>9.4}  K* = {}",
                r.mean_level_diff, r.k_star
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
