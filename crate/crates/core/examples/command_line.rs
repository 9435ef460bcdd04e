// Driving the command-line front end in-process.

use std::error::Error;

use matchq::cli;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let model = concat!(env!("CARGO_MANIFEST_DIR"), "/models/table2_erlang.json");
    for args in [
        vec!["matchq", "classify", model],
        vec!["matchq", "solve", model, "--precision", "6"],
        vec![
            "matchq",
            "sweep",
            model,
            "--axis",
            "theta1=0.5,1,2",
            "--measures",
            "p_no_a,mean_level_diff",
        ],
    ] {
        let out = cli::run(&args);
        println!("$ {}\n{}", args[1..].join(" "), out.stdout);
        if out.code != cli::EXIT_OK {
            return Err(out.stderr.into());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
