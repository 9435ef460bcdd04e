use proptest::prelude::*;

use matchq::linalg::Matrix;
use matchq::oracle::direct_truncated_solve;
use matchq::{build_bound, report, solve, MarkovianArrivalProcess, QueueModel, SolverConfig};

fn map_strategy() -> impl Strategy<Value = MarkovianArrivalProcess> {
    (1usize..=3).prop_flat_map(|m| {
        (
            proptest::collection::vec(0.0f64..2.0, m * m),
            proptest::collection::vec(0.05f64..3.0, m * m),
        )
            .prop_map(move |(off, d)| {
                let mut c = Matrix::zeros(m, m);
                let d = Matrix::from_vec(m, m, d).unwrap();
                for i in 0..m {
                    let mut out: f64 = d.row(i).iter().sum();
                    for j in 0..m {
                        if i != j {
                            c[(i, j)] = off[i * m + j];
                            out += off[i * m + j];
                        }
                    }
                    c[(i, i)] = -out;
                }
                MarkovianArrivalProcess::validate(c, d).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solve_agrees_with_dense_solve(a in map_strategy(), b in map_strategy(),
                                     t1 in 0.2f64..3.0, t2 in 0.2f64..3.0) {
        let model = QueueModel::new(a, b, t1, t2).unwrap();
        let sol = solve(&model, &SolverConfig::default()).unwrap();
        let direct = direct_truncated_solve(&model, sol.k_star + 10).unwrap();
        for (k, p) in sol.levels() {
            prop_assert!(p.sub(direct.pi_at(k).unwrap()).norm_inf() < 1e-10);
        }
        let r = report(&sol);
        prop_assert!((r.p_no_a + r.p_no_b - r.p_empty - 1.0).abs() < 1e-12);
        prop_assert!(r.mean_q_a >= 0.0 && r.mean_q_b >= 0.0);
        let bound = build_bound(&model, &sol).unwrap();
        prop_assert!(bound.mean_xi >= 0.0);
        prop_assert!((bound.prob_immediate() - r.p_no_a).abs() < 1e-12);
    }

    #[test]
    fn mirroring_swaps_the_sides(a in map_strategy(), b in map_strategy(),
                                 t1 in 0.2f64..3.0, t2 in 0.2f64..3.0) {
        let model = QueueModel::new(a, b, t1, t2).unwrap();
        let r = report(&solve(&model, &SolverConfig::default()).unwrap());
        let m = report(&solve(&model.mirrored(), &SolverConfig::default()).unwrap());
        prop_assert!((r.p_no_a - m.p_no_b).abs() < 1e-10);
        prop_assert!((r.mean_q_a - m.mean_q_b).abs() < 1e-9);
        prop_assert!((r.mean_level_diff + m.mean_level_diff).abs() < 1e-9);
    }
}
