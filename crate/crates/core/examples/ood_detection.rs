//! Separating confident inputs from diffuse ones by maximum confidence.

use laplace_bridge::dist::LogitGaussian;
use laplace_bridge::harness;
use laplace_bridge::io::{Line, LogitRecord};
use laplace_bridge::predictive::Method;

fn records(prefix: &str, n: usize, f: impl Fn(usize) -> LogitGaussian) -> Vec<Line<LogitRecord>> {
    (0..n)
        .map(|i| Line { line: i + 1, record: LogitRecord::from_gaussian(format!("{prefix}{i}"), None, &f(i)) })
        .collect()
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let in_dist = records("in", 200, |i| {
        let mut mu = vec![0.0; 5];
        mu[i % 5] = 4.0;
        LogitGaussian::isotropic(mu, 0.5).unwrap()
    });
    let ood = records("out", 200, |i| LogitGaussian::isotropic(vec![0.2 * (i % 3) as f64, 0.0, 0.0, 0.0, 0.0], 3.0).unwrap());
    for m in Method::ALL {
        let r = harness::ood_eval(&in_dist, &ood, m, 1000, 11)?;
        println!("{:>7}: MMC in {:.3}, MMC out {:.3}, AUROC {:.3}", r.method, r.mmc_in, r.mmc_out, r.auroc);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
