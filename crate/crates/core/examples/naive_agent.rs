// A trigram model decoded with a narrow beam settles on a caption that is
// common in parts but rare as a whole.

use caption_forge::cli::demo_naive_agent;
use caption_forge::decoder::BeamConfig;
use caption_forge::Result;

pub fn run_example() -> Result<()> {
    let cfg = BeamConfig {
        alpha: 0.6,
        beta: 2,
        kappa: 2,
        max_len: 15,
    };
    let report = demo_naive_agent(&cfg)?;
    print!("{}", report.text);
    assert!(report.population.iter().any(|c| c == "chicken and waffles"));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
