// Discrete-event simulation next to the matrix-analytic solution.

use std::error::Error;

use matchq::{report, simulate, solve, ModelFile, SimConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/models/table2_exponential.json");
    let file = ModelFile::load(path.as_ref())?;
    let exact = report(&solve(&file.model, &file.solver)?);
    let cfg = SimConfig {
        horizon: 2e5,
        warmup: 1e4,
        seed: 7,
        batches: 20,
    };
    let sim = simulate(&file.model, &cfg)?;

    let rows = [
        ("p_no_a", sim.p_no_a, exact.p_no_a),
        ("p_no_b", sim.p_no_b, exact.p_no_b),
        ("p_empty", sim.p_empty, exact.p_empty),
        ("mean_level_diff", sim.mean_level_diff, exact.mean_level_diff),
    ];
    for (name, est, value) in rows {
        println!(
            "{name:<16} sim {:>8.4} +/- {:.4}   solver {:>8.4}   {}",
            est.estimate,
            est.half_width,
            value,
            if est.covers(value, 3.0) {
                "agree"
            } else {
                "disagree"
            }
        );
    }
    println!("mean wait of A-customers {:.4}", sim.mean_wait_a.estimate);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
