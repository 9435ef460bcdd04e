// The first-passage bound on an A-customer's sojourn time.

use std::error::Error;

use matchq::{build_bound, solve, ModelFile};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/models/table1_poisson.json");
    let file = ModelFile::load(path.as_ref())?;
    let sol = solve(&file.model, &file.solver)?;
    let bound = build_bound(&file.model, &sol)?;

    println!("E[xi_A] = {:.4}", bound.mean_xi);
    println!("P(xi_A = 0) = {:.4}", bound.prob_immediate());
    for t in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
        println!("P(0 < xi_A <= {t:>4}) = {:.4}", bound.cdf(t)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
