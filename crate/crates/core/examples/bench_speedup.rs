//! Per-record cost of the bridge predictive vs Monte Carlo.

use laplace_bridge::harness::{bench, BenchConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = BenchConfig { k: 10, batch: 1000, repeats: 1, ..Default::default() };
    for r in bench(&cfg)? {
        println!("{:>8}: {:.2e} s/record ({:.0}x lb)", r.method, r.per_record_time, r.ratio_to_lb);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
