//! How many samples does a histogram need to beat the bridge's Dirichlet?

use laplace_bridge::harness::{self, KlConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = KlConfig {
        seed: 3,
        truth_samples: 50_000,
        sample_counts: harness::sample_counts_125(10, 50_000),
        bins_per_axis: 30,
    };
    let settings = harness::default_kl_settings();
    let rows = harness::kl_experiment(&settings[1..2], &cfg)?;
    println!("{:>8} {:>10} {:>10}", "n", "sampling", "bridge");
    for r in &rows {
        println!("{:>8} {:>10.4} {:>10.4}", r.sample_count, r.kl_sampling, r.kl_lb);
    }
    println!("crossover: {:?}", harness::crossover(&rows));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
