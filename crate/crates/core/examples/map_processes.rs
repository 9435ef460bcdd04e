// Building and inspecting Markovian arrival processes.

use std::error::Error;

use matchq::{MarkovianArrivalProcess, Matrix};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let poisson = MarkovianArrivalProcess::poisson(5.0)?;
    let erlang = MarkovianArrivalProcess::erlang(2, 4.0)?;
    let bursty = MarkovianArrivalProcess::validate(
        Matrix::from_rows(&[[-10.0, 0.0], [1.0, -1.0]])?,
        Matrix::from_rows(&[[9.0, 1.0], [0.0, 0.0]])?,
    )?;

    for (name, map) in [
        ("poisson(5)", &poisson),
        ("erlang(2, 4)", &erlang),
        ("order-2", &bursty),
    ] {
        let s = map.summarize()?;
        println!(
            "{name:<14} order {}  rate {:.4}  alpha {:?}",
            map.order(),
            s.rate,
            s.alpha
        );
    }

    // Rows of C + D must sum to zero.
    let broken = MarkovianArrivalProcess::validate(
        Matrix::from_rows(&[[-2.0, 1.0], [1.0, -2.0]])?,
        Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.5]])?,
    );
    match broken {
        Ok(_) => return Err("expected a row-sum violation".into()),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
