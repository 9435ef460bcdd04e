// How P(no A-customer waiting) and E[xi_A] move with the abandonment rates.

use std::error::Error;

use matchq::{build_bound, report, solve, ModelFile, QueueModel};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/models/table1_map2.json");
    let file = ModelFile::load(path.as_ref())?;
    let (a, b) = (&file.model.map_a, &file.model.map_b);
    for t2 in [0.1, 1.0, 10.0] {
        for t1 in [0.05, 0.2, 0.55] {
            let model = QueueModel::new(a.clone(), b.clone(), t1, t2)?;
            let sol = solve(&model, &file.solver)?;
            let xi = build_bound(&model, &sol)?.mean_xi;
            println!(
                "theta = ({t1:<4}, {t2:<4})  P(QA=0) {:.4}  E[xi_A] {xi:.4}",
                report(&sol).p_no_a
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
