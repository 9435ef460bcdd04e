// The sojourn bound checked against a sample path: under stationarity the
// time to the next visit of level 0 averages to Σ L_i² / (2T) over the
// excursions L_i of the level above 0.

use matchq::simulator::Simulation;
use matchq::{build_bound, solve, ModelFile, QueueModel, SolverConfig};

fn path_mean_xi(model: &QueueModel, horizon: f64, warmup: f64, seed: u64) -> f64 {
    let mut sim = Simulation::new(model, seed).unwrap();
    while sim.next_event_time() < warmup {
        sim.step();
    }
    // Start the clock at a visit to level ≤ 0 so no excursion is cut in half.
    while sim.state().level() > 0 {
        sim.step();
    }
    let start = sim.state().time;
    let mut squares = 0.0;
    let mut excursion_start = None;
    while sim.state().time - start < horizon || excursion_start.is_some() {
        sim.step();
        match (sim.state().level() > 0, excursion_start) {
            (true, None) => excursion_start = Some(sim.state().time),
            (false, Some(t0)) => {
                squares += (sim.state().time - t0).powi(2);
                excursion_start = None;
            }
            _ => {}
        }
    }
    squares / (2.0 * (sim.state().time - start))
}

#[test]
fn mean_bound_matches_sample_path() {
    for (name, t1) in [
        ("table1_poisson.json", 0.25),
        ("table1_map2.json", 0.75),
        ("table1_map4.json", 0.25),
    ] {
        let file = ModelFile::load(format!("{}/models/{name}", env!("CARGO_MANIFEST_DIR")).as_ref()).unwrap();
        let model = QueueModel::new(file.model.map_a.clone(), file.model.map_b.clone(), t1, 1.0).unwrap();
        let sol = solve(&model, &SolverConfig::default()).unwrap();
        let exact = build_bound(&model, &sol).unwrap().mean_xi;
        let runs: Vec<f64> = (0..8).map(|s| path_mean_xi(&model, 5e4, 1e3, s)).collect();
        let mean = runs.iter().sum::<f64>() / runs.len() as f64;
        let sd = (runs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs.len() - 1) as f64).sqrt();
        let se = sd / (runs.len() as f64).sqrt();
        println!("{name} theta1 = {t1}: path {mean:.4} +/- {se:.4}, bound {exact:.4}");
        assert!(
            (mean - exact).abs() < 4.0 * se + 1e-3,
            "{name} theta1 = {t1}: path {mean:.4} +/- {se:.4}, bound {exact:.4}"
        );
    }
}
