// Stationary measures for the Poisson, order-2 and order-4 inputs at two abandonment settings.

use std::error::Error;

use matchq::{build_bound, report, solve, ModelFile, QueueModel};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    println!(
        "{:<8} {:>11} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "input", "theta", "P(QA=0)", "P(QB=0)", "P(0)", "E[QA]", "E[QB]", "E[Q]", "E[xi]"
    );
    for name in ["poisson", "map2", "map4"] {
        let path = format!("{}/models/table1_{name}.json", env!("CARGO_MANIFEST_DIR"));
        let file = ModelFile::load(path.as_ref())?;
        for (t1, t2) in [(0.25, 1.0), (0.75, 1.0)] {
            let model = QueueModel::new(file.model.map_a.clone(), file.model.map_b.clone(), t1, t2)?;
            let sol = solve(&model, &file.solver)?;
            let r = report(&sol);
            let xi = build_bound(&model, &sol)?.mean_xi;
            println!(
                "{name:<8} {:>11} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
                format!("({t1}, {t2})"),
                r.p_no_a,
                r.p_no_b,
                r.p_empty,
                r.mean_q_a,
                r.mean_q_b,
                r.mean_q_paper,
                xi
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
