// Which parameter combinations give a stationary distribution.

use std::error::Error;

use matchq::{classify, RecurrenceTag};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cases = [
        (5.0, 41.0 / 9.0, 0.25, 1.0),
        (1.0, 1.0, 0.0, 0.0),
        (1.0, 2.0, 0.0, 0.0),
        (2.0, 1.0, 0.5, 0.0),
        (1.0, 2.0, 0.5, 0.0),
        (1.0, 2.0, 0.0, 0.5),
    ];
    println!(
        "{:>8} {:>8} {:>6} {:>6}  class",
        "lambda1", "lambda2", "theta1", "theta2"
    );
    for (l1, l2, t1, t2) in cases {
        let class = classify(l1, l2, t1, t2)?;
        println!("{l1:>8.4} {l2:>8.4} {t1:>6} {t2:>6}  {class}");
        if t1 > 0.0 && t2 > 0.0 {
            assert_eq!(class.tag, RecurrenceTag::PositiveRecurrent);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
