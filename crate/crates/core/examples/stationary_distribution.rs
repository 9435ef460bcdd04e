// Solving the truncated chain and checking it against a dense direct solve.

use std::error::Error;

use matchq::oracle::direct_truncated_solve;
use matchq::{solve, ModelFile};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/models/table1_map2.json");
    let file = ModelFile::load(path.as_ref())?;
    let sol = solve(&file.model, &file.solver)?;
    println!(
        "K* = {}, tail mass {:.3e}, total {:.15}",
        sol.k_star,
        sol.tail_mass,
        sol.total_mass()
    );

    for k in -3..=5 {
        let p = sol.pi_at(k).ok_or("level out of range")?;
        println!("P(level = {k:>2}) = {:.6}", p.sum());
    }

    let direct = direct_truncated_solve(&file.model, sol.k_star + 10)?;
    let worst = sol
        .levels()
        .map(|(k, p)| {
            let q = direct.pi_at(k).expect("direct solve is wider");
            p.sub(q).norm_inf()
        })
        .fold(0.0, f64::max);
    println!("max deviation from the dense solve: {worst:.2e}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
